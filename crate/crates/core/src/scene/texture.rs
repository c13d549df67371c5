//! Procedural and image textures, sampled at continuous uv with wrap-around.

use base64::Engine;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::SceneError;
use crate::io::{read_file, read_ppm};
use crate::raster::RgbImage;

pub type Rgb = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextureFilter {
    #[default]
    Nearest,
    Bilinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum TextureKind {
    Checker {
        cells: f64,
        a: Rgb,
        b: Rgb,
    },
    /// Fractal value noise with smooth interpolation on a wrapping lattice.
    Noise {
        seed: u32,
        cells: u32,
        octaves: u32,
        a: Rgb,
        b: Rgb,
    },
    Gradient {
        angle: f64,
        repeats: f64,
        a: Rgb,
        b: Rgb,
    },
    Image {
        #[serde(serialize_with = "ser_image", deserialize_with = "de_image")]
        pixels: RgbImage,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Texture {
    pub asset_id: String,
    pub kind: TextureKind,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImageRecord {
    width: usize,
    height: usize,
    rgb_base64: String,
}

fn ser_image<S: Serializer>(img: &RgbImage, s: S) -> Result<S::Ok, S::Error> {
    ImageRecord {
        width: img.width(),
        height: img.height(),
        rgb_base64: base64::engine::general_purpose::STANDARD.encode(img.data()),
    }
    .serialize(s)
}

fn de_image<'de, D: Deserializer<'de>>(d: D) -> Result<RgbImage, D::Error> {
    use serde::de::Error;
    let r = ImageRecord::deserialize(d)?;
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(r.rgb_base64)
        .map_err(D::Error::custom)?;
    RgbImage::from_vec(r.width, r.height, 3, bytes)
        .ok_or_else(|| D::Error::custom("image size mismatch"))
}

fn lerp(a: &Rgb, b: &Rgb, t: f64) -> Rgb {
    [
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    ]
}

fn wrap01(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// 32-bit integer hash (lowbias32) mapped to `[0, 1)`.
fn lattice(seed: u32, x: u32, y: u32, octave: u32) -> f64 {
    let mut h = seed
        ^ x.wrapping_mul(0x9e37_79b1)
        ^ y.wrapping_mul(0x85eb_ca77)
        ^ octave.wrapping_mul(0xc2b2_ae3d);
    h ^= h >> 16;
    h = h.wrapping_mul(0x7feb_352d);
    h ^= h >> 15;
    h = h.wrapping_mul(0x846c_a68b);
    h ^= h >> 16;
    h as f64 / 4_294_967_296.0
}

fn value_noise(seed: u32, cells: u32, octaves: u32, u: f64, v: f64) -> f64 {
    let mut total = 0.0;
    let mut amplitude = 1.0;
    let mut norm = 0.0;
    for o in 0..octaves.max(1) {
        let n = cells << o;
        let (x, y) = (wrap01(u) * n as f64, wrap01(v) * n as f64);
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (sx, sy) = (fx * fx * (3.0 - 2.0 * fx), fy * fy * (3.0 - 2.0 * fy));
        let (ix, iy) = (x0 as u32 % n, y0 as u32 % n);
        let (jx, jy) = ((ix + 1) % n, (iy + 1) % n);
        let top = lattice(seed, ix, iy, o) * (1.0 - sx) + lattice(seed, jx, iy, o) * sx;
        let bottom = lattice(seed, ix, jy, o) * (1.0 - sx) + lattice(seed, jx, jy, o) * sx;
        total += amplitude * (top * (1.0 - sy) + bottom * sy);
        norm += amplitude;
        amplitude *= 0.5;
    }
    total / norm
}

impl Texture {
    /// Color in `[0, 255]` per channel.
    pub fn sample(&self, u: f64, v: f64, filter: TextureFilter) -> Rgb {
        match &self.kind {
            TextureKind::Checker { cells, a, b } => {
                let parity = ((wrap01(u) * cells).floor() + (wrap01(v) * cells).floor()) as i64;
                if parity.rem_euclid(2) == 0 {
                    *a
                } else {
                    *b
                }
            }
            TextureKind::Noise {
                seed,
                cells,
                octaves,
                a,
                b,
            } => lerp(a, b, value_noise(*seed, *cells, *octaves, u, v)),
            TextureKind::Gradient {
                angle,
                repeats,
                a,
                b,
            } => {
                let s = wrap01((u * angle.cos() + v * angle.sin()) * repeats);
                // triangle wave keeps the gradient continuous across the wrap
                lerp(a, b, 1.0 - (2.0 * s - 1.0).abs())
            }
            TextureKind::Image { pixels } => sample_image(pixels, u, v, filter),
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        match &self.kind {
            TextureKind::Image { pixels } if pixels.len_pixels() == 0 => Err(SceneError::Asset(
                format!("texture {} has an empty raster", self.asset_id),
            )),
            TextureKind::Noise { cells: 0, .. } => Err(SceneError::Asset(format!(
                "texture {} has zero noise cells",
                self.asset_id
            ))),
            _ => Ok(()),
        }
    }
}

fn sample_image(img: &RgbImage, u: f64, v: f64, filter: TextureFilter) -> Rgb {
    let (w, h) = (img.width(), img.height());
    let texel = |x: i64, y: i64| {
        let p = img.pixel(
            x.rem_euclid(w as i64) as usize,
            y.rem_euclid(h as i64) as usize,
        );
        [p[0] as f64, p[1] as f64, p[2] as f64]
    };
    // v = 0 is the bottom row
    let x = wrap01(u) * w as f64;
    let y = (1.0 - wrap01(v)) * h as f64;
    match filter {
        TextureFilter::Nearest => texel(x.floor() as i64, y.floor() as i64),
        TextureFilter::Bilinear => {
            let (gx, gy) = (x - 0.5, y - 0.5);
            let (x0, y0) = (gx.floor(), gy.floor());
            let (fx, fy) = (gx - x0, gy - y0);
            let (x0, y0) = (x0 as i64, y0 as i64);
            let top = lerp(&texel(x0, y0), &texel(x0 + 1, y0), fx);
            let bottom = lerp(&texel(x0, y0 + 1), &texel(x0 + 1, y0 + 1), fx);
            lerp(&top, &bottom, fy)
        }
    }
}

/// Loads a binary PPM (P6) as an image texture.
pub fn load_texture_image(path: &std::path::Path) -> Result<Texture, SceneError> {
    let bytes = read_file(path)?;
    let pixels = read_ppm(&bytes)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tex = Texture {
        asset_id: format!("img/{stem}"),
        kind: TextureKind::Image { pixels },
    };
    tex.validate()?;
    Ok(tex)
}

/// Deterministic procedural texture derived only from its index and kind.
pub fn procedural_texture(kind: &str, index: u32) -> Texture {
    let h = |k: u32| lattice(0x5eed_0000 ^ index, k, kind.len() as u32, 7);
    let color = |k: u32| [h(k) * 255.0, h(k + 1) * 255.0, h(k + 2) * 255.0];
    let asset_id = format!("tex/{kind}/{index:03}");
    let kind = match kind {
        "checker" => TextureKind::Checker {
            cells: (2.0 + (h(10) * 14.0).floor()) * 2.0,
            a: color(0),
            b: color(3),
        },
        "gradient" => TextureKind::Gradient {
            angle: h(10) * std::f64::consts::TAU,
            repeats: 1.0 + (h(11) * 6.0).floor(),
            a: color(0),
            b: color(3),
        },
        _ => TextureKind::Noise {
            seed: (h(12) * 4_294_967_295.0) as u32,
            cells: 4 + (h(10) * 28.0) as u32,
            octaves: 2 + (h(11) * 3.0) as u32,
            a: color(0),
            b: color(3),
        },
    };
    Texture { asset_id, kind }
}
