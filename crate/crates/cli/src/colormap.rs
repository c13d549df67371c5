//! Display colormaps: the Middlebury flow color wheel and a "hot" ramp for
//! scalar maps. Non-finite samples are black.

use sfgen::raster::{Raster, RgbImage};

const SEGMENTS: [usize; 6] = [15, 6, 4, 11, 13, 6];

/// The 55-entry Middlebury color wheel, red at index 0.
pub fn color_wheel() -> Vec<[f64; 3]> {
    let [ry, yg, gc, cb, bm, mr] = SEGMENTS;
    let ramp = |i: usize, n: usize| (255 * i / n) as f64;
    let mut wheel = Vec::with_capacity(SEGMENTS.iter().sum());
    wheel.extend((0..ry).map(|i| [255.0, ramp(i, ry), 0.0]));
    wheel.extend((0..yg).map(|i| [255.0 - ramp(i, yg), 255.0, 0.0]));
    wheel.extend((0..gc).map(|i| [0.0, 255.0, ramp(i, gc)]));
    wheel.extend((0..cb).map(|i| [0.0, 255.0 - ramp(i, cb), 255.0]));
    wheel.extend((0..bm).map(|i| [ramp(i, bm), 0.0, 255.0]));
    wheel.extend((0..mr).map(|i| [255.0, 0.0, 255.0 - ramp(i, mr)]));
    wheel
}

fn to_byte(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Hue from the direction of `(u, v)` (image axes, angle 0 along +x),
/// saturation from `|(u, v)| / max_flow`. Beyond `max_flow` the color darkens.
pub fn flow_color(u: f64, v: f64, max_flow: f64, wheel: &[[f64; 3]]) -> [u8; 3] {
    if !(u.is_finite() && v.is_finite()) {
        return [0, 0, 0];
    }
    let rad = if max_flow > 0.0 {
        u.hypot(v) / max_flow
    } else {
        0.0
    };
    let n = wheel.len();
    let phase = (v.atan2(u) / std::f64::consts::TAU).rem_euclid(1.0);
    let fk = phase * n as f64;
    let k0 = (fk.floor() as usize) % n;
    let k1 = (k0 + 1) % n;
    let f = fk - fk.floor();
    let mut out = [0u8; 3];
    for c in 0..3 {
        let col = ((1.0 - f) * wheel[k0][c] + f * wheel[k1][c]) / 255.0;
        let col = if rad <= 1.0 {
            1.0 - rad * (1.0 - col)
        } else {
            col * 0.75
        };
        out[c] = to_byte(col);
    }
    out
}

/// Black → red → yellow → white over `v ∈ [0, 1]`; luminance is non-decreasing in `v`.
pub fn hot(v: f64) -> [u8; 3] {
    if !v.is_finite() {
        return [0, 0, 0];
    }
    let v = v.clamp(0.0, 1.0);
    [
        to_byte(3.0 * v),
        to_byte(3.0 * v - 1.0),
        to_byte(3.0 * v - 2.0),
    ]
}

/// Largest finite flow magnitude, or 1 when there is none.
pub fn default_max_flow(flow: &Raster<f32>) -> f64 {
    let m = flow
        .data()
        .chunks_exact(2)
        .map(|p| (p[0] as f64).hypot(p[1] as f64))
        .filter(|m| m.is_finite())
        .fold(0.0, f64::max);
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Largest finite absolute value, or 1 when there is none.
pub fn default_max_abs(map: &Raster<f32>) -> f64 {
    let m = map
        .data()
        .iter()
        .map(|&v| (v as f64).abs())
        .filter(|m| m.is_finite())
        .fold(0.0, f64::max);
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

pub fn colorize_flow(flow: &Raster<f32>, max_flow: f64) -> RgbImage {
    let wheel = color_wheel();
    let data = flow
        .data()
        .chunks_exact(2)
        .flat_map(|p| flow_color(p[0] as f64, p[1] as f64, max_flow, &wheel))
        .collect();
    Raster::from_vec(flow.width(), flow.height(), 3, data).expect("three samples per pixel")
}

/// `hot(d / max)`, or `hot((d / max + 1) / 2)` when `signed`.
pub fn colorize_scalar(map: &Raster<f32>, max: f64, signed: bool) -> RgbImage {
    let data = map
        .data()
        .iter()
        .flat_map(|&d| {
            let r = d as f64 / max;
            hot(if signed { 0.5 * (r + 1.0) } else { r })
        })
        .collect();
    Raster::from_vec(map.width(), map.height(), 3, data).expect("three samples per pixel")
}
