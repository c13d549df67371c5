//! Error measures: endpoint error, D1-all, aggregation over frames and
//! fixed-format comparison tables.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{Mask, Raster, ScalarMap};

/// D1 outlier thresholds: absolute (px) and relative to the ground truth.
pub const D1_ABSOLUTE: f64 = 3.0;
pub const D1_RELATIVE: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("shape mismatch: prediction {pred:?}, ground truth {gt:?}")]
    Shape {
        pred: (usize, usize, usize),
        gt: (usize, usize, usize),
    },
    #[error("mask size differs from the maps")]
    MaskShape,
    #[error("vector maps must have 1 or 2 channels, got {0}")]
    Channels(usize),
    #[error("no pixel left to evaluate")]
    EmptyMask,
    #[error("prediction is not finite at ({x}, {y})")]
    NonFinitePrediction { x: usize, y: usize },
    #[error("nothing to aggregate")]
    NoReports,
    #[error("cannot aggregate {0:?} with {1:?}")]
    MixedMetrics(Metric, Metric),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Epe,
    D1All,
}

/// Result of one metric on one map.
///
/// `valid` counts pixels with usable ground truth; each is either
/// `evaluated` or `excluded` by the mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: Metric,
    /// Mean EPE, or the D1 outlier fraction.
    pub value: f64,
    /// Sum of per-pixel errors, or the outlier count.
    pub total: f64,
    pub valid: usize,
    pub evaluated: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpeResult {
    /// Per-pixel error, NaN where not evaluated.
    pub per_pixel: ScalarMap,
    pub report: MetricReport,
}

fn dims<T>(m: &Raster<T>) -> (usize, usize, usize) {
    (m.width(), m.height(), m.channels())
}

fn check(pred: &Raster<f32>, gt: &Raster<f32>, mask: Option<&Mask>) -> Result<(), EvalError> {
    if !pred.same_shape(gt) {
        return Err(EvalError::Shape {
            pred: dims(pred),
            gt: dims(gt),
        });
    }
    if !(1..=2).contains(&gt.channels()) {
        return Err(EvalError::Channels(gt.channels()));
    }
    if mask.is_some_and(|m| !m.same_size(gt) || m.channels() != 1) {
        return Err(EvalError::MaskShape);
    }
    Ok(())
}

/// Per-pixel Euclidean norm of `pred − gt` and its mean over the pixels where
/// the ground truth is finite and the mask (if any) is set.
pub fn epe_map(
    pred: &Raster<f32>,
    gt: &Raster<f32>,
    mask: Option<&Mask>,
) -> Result<EpeResult, EvalError> {
    check(pred, gt, mask)?;
    let (w, h, c) = dims(gt);
    let mut per_pixel = ScalarMap::filled(w, h, 1, f32::NAN);
    let (mut valid, mut evaluated, mut total) = (0usize, 0usize, 0.0f64);
    for i in 0..w * h {
        let g = &gt.data()[i * c..(i + 1) * c];
        if g.iter().any(|v| !v.is_finite()) {
            continue;
        }
        valid += 1;
        if mask.is_some_and(|m| !m.data()[i]) {
            continue;
        }
        let p = &pred.data()[i * c..(i + 1) * c];
        if p.iter().any(|v| !v.is_finite()) {
            return Err(EvalError::NonFinitePrediction { x: i % w, y: i / w });
        }
        let mut sq = 0.0;
        for k in 0..c {
            let d = p[k] as f64 - g[k] as f64;
            sq += d * d;
        }
        let e = sq.sqrt();
        per_pixel.data_mut()[i] = e as f32;
        total += e;
        evaluated += 1;
    }
    if evaluated == 0 {
        return Err(EvalError::EmptyMask);
    }
    Ok(EpeResult {
        per_pixel,
        report: MetricReport {
            metric: Metric::Epe,
            value: total / evaluated as f64,
            total,
            valid,
            evaluated,
            excluded: valid - evaluated,
        },
    })
}

/// `true` when the error is larger than 3 px and larger than 5% of the ground truth.
pub fn is_d1_outlier(pred: f64, gt: f64) -> bool {
    let err = (pred - gt).abs();
    err > D1_ABSOLUTE && err > D1_RELATIVE * gt.abs()
}

/// Fraction of D1 outliers among evaluated pixels. Pixels with non-finite or
/// non-positive ground truth are not valid.
pub fn d1_all(
    pred: &ScalarMap,
    gt: &ScalarMap,
    mask: Option<&Mask>,
) -> Result<MetricReport, EvalError> {
    check(pred, gt, mask)?;
    if gt.channels() != 1 {
        return Err(EvalError::Channels(gt.channels()));
    }
    let w = gt.width();
    let (mut valid, mut evaluated, mut outliers) = (0usize, 0usize, 0usize);
    for (i, (&p, &g)) in pred.data().iter().zip(gt.data()).enumerate() {
        if !(g.is_finite() && g > 0.0) {
            continue;
        }
        valid += 1;
        if mask.is_some_and(|m| !m.data()[i]) {
            continue;
        }
        if !p.is_finite() {
            return Err(EvalError::NonFinitePrediction { x: i % w, y: i / w });
        }
        evaluated += 1;
        if is_d1_outlier(p as f64, g as f64) {
            outliers += 1;
        }
    }
    if evaluated == 0 {
        return Err(EvalError::EmptyMask);
    }
    Ok(MetricReport {
        metric: Metric::D1All,
        value: outliers as f64 / evaluated as f64,
        total: outliers as f64,
        valid,
        evaluated,
        excluded: valid - evaluated,
    })
}

/// Complement of an occlusion mask: the non-occluded pixels.
pub fn non_occluded(occlusion: &Mask) -> Mask {
    occlusion.map(|o| !o)
}

/// Dataset-level result under both weightings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub metric: Metric,
    /// Total error over total evaluated pixels.
    pub per_pixel: f64,
    /// Mean of the per-frame values.
    pub per_frame: f64,
    pub frames: usize,
    pub valid: usize,
    pub evaluated: usize,
    pub excluded: usize,
}

pub fn aggregate(reports: &[MetricReport]) -> Result<AggregateReport, EvalError> {
    let first = reports.first().ok_or(EvalError::NoReports)?;
    if let Some(r) = reports.iter().find(|r| r.metric != first.metric) {
        return Err(EvalError::MixedMetrics(first.metric, r.metric));
    }
    let total: f64 = reports.iter().map(|r| r.total).sum();
    let evaluated: usize = reports.iter().map(|r| r.evaluated).sum();
    Ok(AggregateReport {
        metric: first.metric,
        per_pixel: total / evaluated as f64,
        per_frame: reports.iter().map(|r| r.value).sum::<f64>() / reports.len() as f64,
        frames: reports.len(),
        valid: reports.iter().map(|r| r.valid).sum(),
        evaluated,
        excluded: reports.iter().map(|r| r.excluded).sum(),
    })
}

/// Round half away from zero at `decimals`, after removing binary
/// representation noise (so 2.345 rounds to 2.35).
pub fn round_decimal(x: f64, decimals: u32) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let fine = (x.abs() * 1e12).round();
    let step = 10f64.powi(12 - decimals as i32);
    let units = ((fine + step / 2.0) / step).floor();
    x.signum() * units / 10f64.powi(decimals as i32)
}

/// One table cell value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "metric", content = "value")]
pub enum Cell {
    Epe(f64),
    D1All(f64),
}

impl Cell {
    pub fn format(&self) -> String {
        match *self {
            Cell::Epe(v) => format!("{:.2}", round_decimal(v, 2)),
            Cell::D1All(v) => format!("{:.2}%", round_decimal(v * 100.0, 2)),
        }
    }
}

/// Text table with one row per method and one column per dataset key, both
/// sorted; absent cells print as `---`.
pub fn render_table(rows: &BTreeMap<String, BTreeMap<String, Cell>>) -> String {
    let columns: BTreeSet<&String> = rows.values().flat_map(|r| r.keys()).collect();
    let mut grid: Vec<Vec<String>> = Vec::with_capacity(rows.len() + 1);
    let mut header = vec!["method".to_string()];
    header.extend(columns.iter().map(|c| c.to_string()));
    grid.push(header);
    for (method, cells) in rows {
        let mut line = vec![method.clone()];
        line.extend(columns.iter().map(|c| {
            cells
                .get(*c)
                .map(Cell::format)
                .unwrap_or_else(|| "---".into())
        }));
        grid.push(line);
    }
    let widths: Vec<usize> = (0..grid[0].len())
        .map(|j| grid.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, line) in grid.iter().enumerate() {
        let cells: Vec<String> = line
            .iter()
            .enumerate()
            .map(|(j, s)| {
                if j == 0 {
                    format!("{s:<w$}", w = widths[j])
                } else {
                    format!("{s:>w$}", w = widths[j])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
            out.push_str(&rule.join("  "));
            out.push('\n');
        }
    }
    out
}
