//! Deterministic z-buffer rasterizer: RGB, depth, index masks and the three
//! 3D-position passes for one frame and view.
//!
//! Each pixel is sampled once at its center. Coverage follows the top-left
//! rule, depth ties go to the earlier triangle, and every per-pixel quantity
//! is computed from absolute coordinates, so the output does not depend on
//! how rows are split into bands or on the number of workers.

use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{CameraPose, GeometryError, View};
use crate::io::FormatError;
use crate::raster::{IndexMap, Raster, RgbImage, ScalarMap};
use crate::scene::{ObjectTransform, SceneError, SceneSpec, Texture, TextureFilter};

/// Near clipping distance in camera units.
pub const NEAR_PLANE: f64 = 0.05;

/// Ambient and diffuse weights of the shading term `ambient + diffuse · |n · l|`.
const AMBIENT: f64 = 0.35;
const DIFFUSE: f64 = 0.65;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("output sink: {0}")]
    Sink(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub filter: TextureFilter,
    /// Rows per parallel band; affects scheduling only.
    pub band_rows: usize,
    /// Direction towards the light in world coordinates.
    pub light: Vector3<f64>,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            filter: TextureFilter::Nearest,
            band_rows: 16,
            light: Vector3::new(0.3, -1.0, -0.4).normalize(),
        }
    }
}

/// Render output for one frame and view. Float passes hold NaN and index
/// passes hold 0 at void pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePasses {
    pub view: View,
    pub frame: u32,
    pub rgb: RgbImage,
    pub depth: ScalarMap,
    /// Camera-frame position at `frame`.
    pub pos3d_t: ScalarMap,
    /// Same surface point at `frame - 1`, in that frame's camera coordinates.
    pub pos3d_prev: Option<ScalarMap>,
    /// Same surface point at `frame + 1`, in that frame's camera coordinates.
    pub pos3d_next: Option<ScalarMap>,
    pub object_index: IndexMap,
    pub material_index: IndexMap,
}

impl FramePasses {
    pub fn width(&self) -> usize {
        self.depth.width()
    }

    pub fn height(&self) -> usize {
        self.depth.height()
    }

    pub fn is_covered(&self, x: usize, y: usize) -> bool {
        self.object_index.get(x, y, 0) != 0
    }
}

#[derive(Clone, Copy)]
struct Vertex {
    cam: Vector3<f64>,
    obj: Vector3<f64>,
    uv: Vector2<f64>,
}

impl Vertex {
    fn lerp(&self, other: &Vertex, s: f64) -> Vertex {
        Vertex {
            cam: self.cam + (other.cam - self.cam) * s,
            obj: self.obj + (other.obj - self.obj) * s,
            uv: self.uv + (other.uv - self.uv) * s,
        }
    }
}

struct ScreenTri {
    screen: [Vector2<f64>; 3],
    inv_z: [f64; 3],
    obj: [Vector3<f64>; 3],
    uv: [Vector2<f64>; 3],
    area: f64,
    /// Inclusive pixel bounds `(x0, x1, y0, y1)`.
    bounds: (usize, usize, usize, usize),
    instance: u32,
    slot: u16,
    shade: f64,
}

/// Sutherland-Hodgman clip of a triangle against `z >= NEAR_PLANE`.
fn clip_near(tri: [Vertex; 3]) -> Vec<Vertex> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let (a, b) = (tri[i], tri[(i + 1) % 3]);
        let (ina, inb) = (a.cam.z >= NEAR_PLANE, b.cam.z >= NEAR_PLANE);
        if ina {
            out.push(a);
        }
        if ina != inb {
            let s = (NEAR_PLANE - a.cam.z) / (b.cam.z - a.cam.z);
            let mut v = a.lerp(&b, s);
            v.cam.z = NEAR_PLANE;
            out.push(v);
        }
    }
    out
}

/// `true` when a zero edge function value on edge `d` counts as inside.
fn owns_edge(d: &Vector2<f64>) -> bool {
    d.y < 0.0 || (d.y == 0.0 && d.x > 0.0)
}

fn edge(a: &Vector2<f64>, b: &Vector2<f64>, p: &Vector2<f64>) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

struct Prepared<'a> {
    tris: Vec<ScreenTri>,
    textures: Vec<Vec<&'a Texture>>,
    materials: Vec<Vec<u16>>,
    indices: Vec<u16>,
}

fn prepare<'a>(
    spec: &'a SceneSpec,
    t: u32,
    pose: &CameraPose,
    light: &Vector3<f64>,
) -> Result<Prepared<'a>, RenderError> {
    let k = spec.intrinsics();
    let (w, h) = (k.width() as usize, k.height() as usize);
    let f = k.focal_px();
    let c = k.principal_point();
    let instances: Vec<_> = spec.instances().collect();
    let per_instance: Vec<Result<Vec<ScreenTri>, RenderError>> = instances
        .par_iter()
        .enumerate()
        .map(|(ii, inst)| {
            let mesh = &spec.meshes[&inst.mesh];
            let xf = inst.transform_at(t as f64)?;
            let world: Vec<Vector3<f64>> = mesh.vertices.iter().map(|v| xf.apply(v)).collect();
            let mut out = Vec::new();
            for (tri, &slot) in mesh.triangles.iter().zip(&mesh.materials) {
                let idx = tri.map(|i| i as usize);
                let n = (world[idx[1]] - world[idx[0]]).cross(&(world[idx[2]] - world[idx[0]]));
                let shade = AMBIENT + DIFFUSE * n.normalize().dot(light).abs();
                let verts = idx.map(|i| Vertex {
                    cam: pose.world_to_camera(&world[i]),
                    obj: mesh.vertices[i],
                    uv: mesh.uv[i],
                });
                let poly = clip_near(verts);
                for j in 1..poly.len().saturating_sub(1) {
                    let v = [poly[0], poly[j], poly[j + 1]];
                    let mut screen = v.map(|v| {
                        Vector2::new(f * v.cam.x / v.cam.z + c.x, f * v.cam.y / v.cam.z + c.y)
                    });
                    let mut v = v;
                    let mut area = edge(&screen[0], &screen[1], &screen[2]);
                    if area < 0.0 {
                        screen.swap(1, 2);
                        v.swap(1, 2);
                        area = -area;
                    }
                    if !(area > 0.0) || !area.is_finite() {
                        continue;
                    }
                    let lo = screen[0].inf(&screen[1]).inf(&screen[2]);
                    let hi = screen[0].sup(&screen[1]).sup(&screen[2]);
                    let x0 = (lo.x - 0.5).ceil().max(0.0);
                    let y0 = (lo.y - 0.5).ceil().max(0.0);
                    let x1 = (hi.x - 0.5).floor().min(w as f64 - 1.0);
                    let y1 = (hi.y - 0.5).floor().min(h as f64 - 1.0);
                    if x0 > x1 || y0 > y1 {
                        continue;
                    }
                    out.push(ScreenTri {
                        screen,
                        inv_z: v.map(|v| 1.0 / v.cam.z),
                        obj: v.map(|v| v.obj),
                        uv: v.map(|v| v.uv),
                        area,
                        bounds: (x0 as usize, x1 as usize, y0 as usize, y1 as usize),
                        instance: ii as u32,
                        slot,
                        shade,
                    });
                }
            }
            Ok(out)
        })
        .collect();
    let mut tris = Vec::new();
    for r in per_instance {
        tris.extend(r?);
    }
    let textures = instances
        .iter()
        .map(|inst| inst.textures.iter().map(|id| &spec.textures[id]).collect())
        .collect();
    Ok(Prepared {
        tris,
        textures,
        materials: instances
            .iter()
            .map(|i| i.material_indices.clone())
            .collect(),
        indices: instances.iter().map(|i| i.object_index).collect(),
    })
}

/// Per-instance transforms and camera pose at a neighbouring frame.
fn frame_context(
    spec: &SceneSpec,
    t: u32,
    view: View,
) -> Result<(Vec<ObjectTransform>, CameraPose), RenderError> {
    let xfs = spec
        .instances()
        .map(|inst| inst.transform_at(t as f64))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((xfs, spec.camera_pose(t, view)?))
}

struct Band {
    rgb: Vec<u8>,
    depth: Vec<f32>,
    pos: [Vec<f32>; 3],
    object: Vec<u16>,
    material: Vec<u16>,
}

/// Rasterizes frame `t` (1-based) for one view.
pub fn rasterize_frame(
    spec: &SceneSpec,
    t: u32,
    view: View,
    opts: &RenderOptions,
) -> Result<FramePasses, RenderError> {
    spec.check_time(t)?;
    let k = spec.intrinsics();
    let (w, h) = (k.width() as usize, k.height() as usize);
    let pose = spec.camera_pose(t, view)?;
    let prepared = prepare(spec, t, &pose, &opts.light)?;
    let current = frame_context(spec, t, view)?;
    let prev = if t > 1 {
        Some(frame_context(spec, t - 1, view)?)
    } else {
        None
    };
    let next = if t < spec.frames {
        Some(frame_context(spec, t + 1, view)?)
    } else {
        None
    };
    let contexts = [Some(&current), prev.as_ref(), next.as_ref()];
    let band_rows = opts.band_rows.max(1);

    let bands: Vec<Band> = (0..h.div_ceil(band_rows))
        .into_par_iter()
        .map(|b| {
            let y_start = b * band_rows;
            let y_end = (y_start + band_rows).min(h);
            let n = (y_end - y_start) * w;
            let mut zbuf = vec![f64::INFINITY; n];
            let mut frag: Vec<Option<(u32, [f64; 3])>> = vec![None; n];
            for (ti, tri) in prepared.tris.iter().enumerate() {
                let (x0, x1, y0, y1) = tri.bounds;
                if y1 < y_start || y0 >= y_end {
                    continue;
                }
                let s = &tri.screen;
                let d = [s[2] - s[1], s[0] - s[2], s[1] - s[0]];
                let own = d.map(|d| owns_edge(&d));
                for y in y0.max(y_start)..=y1.min(y_end - 1) {
                    for x in x0..=x1 {
                        let p = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
                        let e = [
                            edge(&s[1], &s[2], &p),
                            edge(&s[2], &s[0], &p),
                            edge(&s[0], &s[1], &p),
                        ];
                        let inside = (0..3).all(|i| e[i] > 0.0 || (e[i] == 0.0 && own[i]));
                        if !inside {
                            continue;
                        }
                        let l = e.map(|e| e / tri.area);
                        let wsum = l[0] * tri.inv_z[0] + l[1] * tri.inv_z[1] + l[2] * tri.inv_z[2];
                        let z = 1.0 / wsum;
                        let i = (y - y_start) * w + x;
                        if z < zbuf[i] {
                            zbuf[i] = z;
                            frag[i] = Some((
                                ti as u32,
                                [
                                    l[0] * tri.inv_z[0] * z,
                                    l[1] * tri.inv_z[1] * z,
                                    l[2] * tri.inv_z[2] * z,
                                ],
                            ));
                        }
                    }
                }
            }
            let mut band = Band {
                rgb: vec![0; n * 3],
                depth: vec![f32::NAN; n],
                pos: [
                    vec![f32::NAN; n * 3],
                    vec![f32::NAN; n * 3],
                    vec![f32::NAN; n * 3],
                ],
                object: vec![0; n],
                material: vec![0; n],
            };
            for (i, f) in frag.iter().enumerate() {
                let Some((ti, mu)) = f else { continue };
                let tri = &prepared.tris[*ti as usize];
                let ii = tri.instance as usize;
                let p_obj = tri.obj[0] * mu[0] + tri.obj[1] * mu[1] + tri.obj[2] * mu[2];
                let uv = tri.uv[0] * mu[0] + tri.uv[1] * mu[1] + tri.uv[2] * mu[2];
                for (pass, ctx) in contexts.iter().enumerate() {
                    if let Some((xfs, cam)) = ctx {
                        let q = cam.world_to_camera(&xfs[ii].apply(&p_obj));
                        band.pos[pass][i * 3..i * 3 + 3]
                            .copy_from_slice(&[q.x as f32, q.y as f32, q.z as f32]);
                    }
                }
                band.depth[i] = band.pos[0][i * 3 + 2];
                band.object[i] = prepared.indices[ii];
                band.material[i] = prepared.materials[ii][tri.slot as usize];
                let color =
                    prepared.textures[ii][tri.slot as usize].sample(uv.x, uv.y, opts.filter);
                for (out, channel) in band.rgb[i * 3..i * 3 + 3].iter_mut().zip(color) {
                    *out = (channel * tri.shade).round().clamp(0.0, 255.0) as u8;
                }
            }
            band
        })
        .collect();

    let mut rgb = Vec::with_capacity(w * h * 3);
    let mut depth = Vec::with_capacity(w * h);
    let mut pos: [Vec<f32>; 3] = Default::default();
    let mut object = Vec::with_capacity(w * h);
    let mut material = Vec::with_capacity(w * h);
    for b in bands {
        rgb.extend(b.rgb);
        depth.extend(b.depth);
        for (dst, src) in pos.iter_mut().zip(b.pos) {
            dst.extend(src);
        }
        object.extend(b.object);
        material.extend(b.material);
    }
    let [p_t, p_prev, p_next] = pos;
    let map3 = |v: Vec<f32>| Raster::from_vec(w, h, 3, v).expect("band sizes");
    Ok(FramePasses {
        view,
        frame: t,
        rgb: Raster::from_vec(w, h, 3, rgb).expect("band sizes"),
        depth: Raster::from_vec(w, h, 1, depth).expect("band sizes"),
        pos3d_t: map3(p_t),
        pos3d_prev: prev.is_some().then(|| map3(p_prev)),
        pos3d_next: next.is_some().then(|| map3(p_next)),
        object_index: Raster::from_vec(w, h, 1, object).expect("band sizes"),
        material_index: Raster::from_vec(w, h, 1, material).expect("band sizes"),
    })
}

/// Receives rendered frames in order `(1, L), (1, R), (2, L), ...`.
pub trait FrameSink {
    fn put(&mut self, passes: &FramePasses) -> Result<(), RenderError>;
    /// Called once when the sequence stops early.
    fn abort(&mut self, reason: &str);
}

/// Renders every frame and view of `spec` into `sink`; returns the frame count written.
pub fn render_sequence(
    spec: &SceneSpec,
    opts: &RenderOptions,
    sink: &mut dyn FrameSink,
) -> Result<usize, RenderError> {
    let mut written = 0;
    for t in 1..=spec.frames {
        let (l, r) = rayon::join(
            || rasterize_frame(spec, t, View::Left, opts),
            || rasterize_frame(spec, t, View::Right, opts),
        );
        for passes in [l, r] {
            let result = passes.and_then(|p| sink.put(&p));
            if let Err(e) = result {
                sink.abort(&format!("frame {t}: {e}"));
                return Err(e);
            }
            written += 1;
        }
    }
    Ok(written)
}
