//! Disparity estimation by one-sided 1D correlation of patch features,
//! winner-take-all selection and parabolic sub-pixel refinement.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{Raster, RgbImage, ScalarMap};

/// Per-pixel feature vectors, `channels` values per pixel.
pub type FeatureMap = Raster<f64>;

/// Marker stored for hypotheses whose match would fall left of the image.
pub const INVALID_COST: f64 = f64::NEG_INFINITY;

/// Largest sub-pixel offset magnitude returned by refinement.
pub const MAX_OFFSET: f64 = 0.5 - 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("feature maps differ: {a:?} vs {b:?}")]
    Shape {
        a: (usize, usize, usize),
        b: (usize, usize, usize),
    },
    #[error("disparity range {0} must lie in 1..=width ({1})")]
    Range(usize, usize),
    #[error("images must have 1 or 3 channels, got {0}")]
    Channels(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureParams {
    /// Patch half-size; the feature has `(2r + 1)²` channels.
    pub radius: usize,
    /// Scale each mean-subtracted patch to unit length.
    pub normalize: bool,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            radius: 1,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchParams {
    /// Number of disparity hypotheses `D`, covering `0..D`.
    pub max_disp: usize,
    pub features: FeatureParams,
    pub refine: bool,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            max_disp: 160,
            features: FeatureParams::default(),
            refine: true,
        }
    }
}

/// Luma of an RGB image, or the single channel of a gray image, in `[0, 255]`.
pub fn grayscale(image: &RgbImage) -> Result<ScalarMap, MatchError> {
    let (w, h) = (image.width(), image.height());
    match image.channels() {
        1 => Ok(image.map(|v| v as f32)),
        3 => {
            let data = image
                .data()
                .chunks_exact(3)
                .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) as f32)
                .collect();
            Ok(ScalarMap::from_vec(w, h, 1, data).expect("one value per pixel"))
        }
        c => Err(MatchError::Channels(c)),
    }
}

/// Mean-subtracted `(2r+1)²` patch around each pixel, with clamped borders.
pub fn extract_features(gray: &ScalarMap, params: &FeatureParams) -> FeatureMap {
    let (w, h) = (gray.width(), gray.height());
    let r = params.radius as i64;
    let channels = ((2 * r + 1) * (2 * r + 1)) as usize;
    let mut out = FeatureMap::filled(w, h, channels, 0.0);
    out.data_mut()
        .par_chunks_mut(w * channels)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                let f = &mut row[x * channels..(x + 1) * channels];
                let mut c = 0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                        let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                        f[c] = gray.get(sx, sy, 0) as f64;
                        c += 1;
                    }
                }
                let mean = f.iter().sum::<f64>() / channels as f64;
                f.iter_mut().for_each(|v| *v -= mean);
                if params.normalize {
                    let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > 1e-9 {
                        f.iter_mut().for_each(|v| *v /= norm);
                    } else {
                        f.iter_mut().for_each(|v| *v = 0.0);
                    }
                }
            }
        });
    out
}

/// Correlation of `a(x, y)` with `b(x − d, y)` for `d ∈ [0, D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    width: usize,
    height: usize,
    hypotheses: usize,
    data: Vec<f64>,
}

impl CostVolume {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn hypotheses(&self) -> usize {
        self.hypotheses
    }

    /// `None` for hypotheses that reach left of the image.
    pub fn get(&self, x: usize, y: usize, d: usize) -> Option<f64> {
        let v = self.data[(y * self.width + x) * self.hypotheses + d];
        (v != INVALID_COST).then_some(v)
    }

    /// All hypotheses at one pixel, invalid ones holding [`INVALID_COST`].
    pub fn costs(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.hypotheses;
        &self.data[i..i + self.hypotheses]
    }
}

fn dims(m: &FeatureMap) -> (usize, usize, usize) {
    (m.width(), m.height(), m.channels())
}

fn check(a: &FeatureMap, b: &FeatureMap, hypotheses: usize) -> Result<(), MatchError> {
    if !a.same_shape(b) {
        return Err(MatchError::Shape {
            a: dims(a),
            b: dims(b),
        });
    }
    if hypotheses < 1 || hypotheses > a.width() {
        return Err(MatchError::Range(hypotheses, a.width()));
    }
    Ok(())
}

fn row_costs(a: &FeatureMap, b: &FeatureMap, y: usize, hypotheses: usize, out: &mut [f64]) {
    let c = a.channels();
    for x in 0..a.width() {
        let fa = a.pixel(x, y);
        for d in 0..hypotheses {
            out[x * hypotheses + d] = if d > x {
                INVALID_COST
            } else {
                let fb = b.pixel(x - d, y);
                let mut s = 0.0;
                for k in 0..c {
                    s += fa[k] * fb[k];
                }
                s
            };
        }
    }
}

pub fn correlate_1d(
    a: &FeatureMap,
    b: &FeatureMap,
    hypotheses: usize,
) -> Result<CostVolume, MatchError> {
    check(a, b, hypotheses)?;
    let (w, h) = (a.width(), a.height());
    let mut data = vec![0.0; w * h * hypotheses];
    data.par_chunks_mut(w * hypotheses)
        .enumerate()
        .for_each(|(y, row)| row_costs(a, b, y, hypotheses, row));
    Ok(CostVolume {
        width: w,
        height: h,
        hypotheses,
        data,
    })
}

/// Best hypothesis (ties to the smaller one) and its margin over the runner-up.
fn winner(costs: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for d in 1..costs.len() {
        if costs[d] != INVALID_COST && costs[d] > costs[best] {
            best = d;
        }
    }
    let second = costs
        .iter()
        .enumerate()
        .filter(|&(d, &c)| d != best && c != INVALID_COST)
        .map(|(_, &c)| c)
        .fold(f64::NEG_INFINITY, f64::max);
    (best, costs[best] - second)
}

/// Vertex offset of the parabola through `(−1, c_m)`, `(0, c_0)`, `(1, c_p)`, clamped below 0.5.
pub fn parabola_offset(c_m: f64, c_0: f64, c_p: f64) -> f64 {
    let denom = 2.0 * (c_m - 2.0 * c_0 + c_p);
    if denom == 0.0 || !denom.is_finite() {
        return 0.0;
    }
    ((c_m - c_p) / denom).clamp(-MAX_OFFSET, MAX_OFFSET)
}

fn refined(costs: &[f64], d: usize) -> f64 {
    if d == 0 || d + 1 >= costs.len() || costs[d + 1] == INVALID_COST {
        return d as f64;
    }
    d as f64 + parabola_offset(costs[d - 1], costs[d], costs[d + 1])
}

/// Winner-take-all disparity and confidence (best minus second-best cost;
/// infinite where only one hypothesis is valid).
pub fn wta_disparity(cv: &CostVolume) -> (ScalarMap, ScalarMap) {
    let (w, h) = (cv.width, cv.height);
    let mut disp = ScalarMap::filled(w, h, 1, 0.0);
    let mut conf = ScalarMap::filled(w, h, 1, 0.0);
    for y in 0..h {
        for x in 0..w {
            let (d, c) = winner(cv.costs(x, y));
            disp.set(x, y, 0, d as f32);
            conf.set(x, y, 0, c as f32);
        }
    }
    (disp, conf)
}

/// Parabolic refinement of integer winners; boundary hypotheses are left as is.
pub fn subpixel_refine(cv: &CostVolume, wta: &ScalarMap) -> ScalarMap {
    let mut out = wta.clone();
    for y in 0..cv.height {
        for x in 0..cv.width {
            let d = wta.get(x, y, 0) as usize;
            out.set(x, y, 0, refined(cv.costs(x, y), d) as f32);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisparityEstimate {
    pub disparity: ScalarMap,
    pub confidence: ScalarMap,
}

/// Full pipeline on a rectified pair, one row of the cost volume at a time.
pub fn estimate_disparity(
    left: &RgbImage,
    right: &RgbImage,
    params: &MatchParams,
) -> Result<DisparityEstimate, MatchError> {
    let (gl, gr) = (grayscale(left)?, grayscale(right)?);
    let a = extract_features(&gl, &params.features);
    let b = extract_features(&gr, &params.features);
    check(&a, &b, params.max_disp)?;
    let (w, h) = (a.width(), a.height());
    let d_count = params.max_disp;
    let rows: Vec<(Vec<f32>, Vec<f32>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut costs = vec![0.0; w * d_count];
            row_costs(&a, &b, y, d_count, &mut costs);
            let mut disp = Vec::with_capacity(w);
            let mut conf = Vec::with_capacity(w);
            for x in 0..w {
                let c = &costs[x * d_count..(x + 1) * d_count];
                let (d, margin) = winner(c);
                disp.push(if params.refine {
                    refined(c, d)
                } else {
                    d as f64
                } as f32);
                conf.push(margin as f32);
            }
            (disp, conf)
        })
        .collect();
    let (disp, conf): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok(DisparityEstimate {
        disparity: ScalarMap::from_vec(w, h, 1, disp.concat()).expect("row sizes"),
        confidence: ScalarMap::from_vec(w, h, 1, conf.concat()).expect("row sizes"),
    })
}
