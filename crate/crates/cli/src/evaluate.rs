use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use sfgen::dataset::{load_float_map, load_flow, load_mask};
use sfgen::eval::{
    aggregate, d1_all, epe_map, non_occluded, render_table, AggregateReport, Cell, MetricReport,
};
use sfgen::raster::{Mask, Raster};

use crate::config::{config_path_for_file, write_json};
use crate::{EvaluateArgs, MapKind, MetricArg};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Kind {
    Flow,
    Disparity,
    Dispchange,
}

fn resolve_kind(kind: MapKind, gt: &Path) -> anyhow::Result<Kind> {
    Ok(match kind {
        MapKind::Flow => Kind::Flow,
        MapKind::Disparity => Kind::Disparity,
        MapKind::Dispchange => Kind::Dispchange,
        MapKind::Auto => match gt.extension().and_then(|e| e.to_str()) {
            Some("flo") => Kind::Flow,
            Some("pfm") => Kind::Disparity,
            _ => anyhow::bail!(
                "eval: {}: cannot infer the map kind; pass --kind",
                gt.display()
            ),
        },
    })
}

fn load(kind: Kind, path: &Path) -> anyhow::Result<Raster<f32>> {
    let map = match kind {
        Kind::Flow => load_flow(path)?,
        Kind::Disparity | Kind::Dispchange => load_float_map(path)?,
    };
    let expected = if kind == Kind::Flow { 2 } else { 1 };
    anyhow::ensure!(
        map.channels() == expected,
        "eval: {}: expected {expected} channel(s), found {}",
        path.display(),
        map.channels()
    );
    Ok(map)
}

#[derive(Debug, Serialize)]
struct FrameScores {
    pred: String,
    gt: String,
    occlusion: Option<String>,
    epe: Option<MetricReport>,
    epe_noc: Option<MetricReport>,
    d1_all: Option<MetricReport>,
    d1_all_noc: Option<MetricReport>,
}

#[derive(Debug, Default, Serialize)]
struct Aggregates {
    epe: Option<AggregateReport>,
    epe_noc: Option<AggregateReport>,
    d1_all: Option<AggregateReport>,
    d1_all_noc: Option<AggregateReport>,
}

#[derive(Debug, Serialize)]
struct Report {
    command: &'static str,
    version: &'static str,
    method: String,
    dataset: String,
    kind: Kind,
    metrics: Vec<&'static str>,
    frames: Vec<FrameScores>,
    aggregate: Aggregates,
    table: String,
}

fn score(
    with_epe: bool,
    with_d1: bool,
    kind: Kind,
    pred_path: &Path,
    gt_path: &Path,
    occ_path: Option<&PathBuf>,
) -> anyhow::Result<FrameScores> {
    let pred = load(kind, pred_path)?;
    let gt = load(kind, gt_path)?;
    let noc: Option<Mask> = occ_path
        .map(|p| load_mask(p).map(|m| non_occluded(&m)))
        .transpose()?;
    let ctx = |e: sfgen::eval::EvalError| {
        anyhow::anyhow!(
            "eval: {} vs {}: {e}",
            pred_path.display(),
            gt_path.display()
        )
    };
    let epe = |mask: Option<&Mask>| epe_map(&pred, &gt, mask).map(|r| r.report).map_err(ctx);
    let d1 = |mask: Option<&Mask>| d1_all(&pred, &gt, mask).map_err(ctx);
    Ok(FrameScores {
        pred: pred_path.display().to_string(),
        gt: gt_path.display().to_string(),
        occlusion: occ_path.map(|p| p.display().to_string()),
        epe: with_epe.then(|| epe(None)).transpose()?,
        epe_noc: match (&noc, with_epe) {
            (Some(m), true) => Some(epe(Some(m))?),
            _ => None,
        },
        d1_all: with_d1.then(|| d1(None)).transpose()?,
        d1_all_noc: match (&noc, with_d1) {
            (Some(m), true) => Some(d1(Some(m))?),
            _ => None,
        },
    })
}

fn collect(
    frames: &[FrameScores],
    pick: fn(&FrameScores) -> Option<MetricReport>,
) -> anyhow::Result<Option<AggregateReport>> {
    let reports: Vec<MetricReport> = frames.iter().filter_map(pick).collect();
    if reports.is_empty() {
        return Ok(None);
    }
    Ok(Some(
        aggregate(&reports).map_err(|e| anyhow::anyhow!("eval: {e}"))?,
    ))
}

pub fn run(a: &EvaluateArgs) -> anyhow::Result<()> {
    anyhow::ensure!(
        a.pred.len() == a.gt.len(),
        "eval: {} predictions but {} ground-truth maps",
        a.pred.len(),
        a.gt.len()
    );
    anyhow::ensure!(
        a.occlusion.is_empty() || a.occlusion.len() == a.gt.len(),
        "eval: {} occlusion masks for {} pairs",
        a.occlusion.len(),
        a.gt.len()
    );
    let kind = resolve_kind(a.kind, &a.gt[0])?;
    let with_epe = matches!(a.metric, MetricArg::All | MetricArg::Epe);
    let with_d1 = matches!(a.metric, MetricArg::All | MetricArg::D1all) && kind == Kind::Disparity;
    anyhow::ensure!(
        with_epe || with_d1,
        "eval: D1-all is defined for disparity maps only"
    );
    let mut frames = Vec::with_capacity(a.gt.len());
    for (i, (p, g)) in a.pred.iter().zip(&a.gt).enumerate() {
        frames.push(score(with_epe, with_d1, kind, p, g, a.occlusion.get(i))?);
    }
    let aggregate = Aggregates {
        epe: collect(&frames, |f| f.epe)?,
        epe_noc: collect(&frames, |f| f.epe_noc)?,
        d1_all: collect(&frames, |f| f.d1_all)?,
        d1_all_noc: collect(&frames, |f| f.d1_all_noc)?,
    };
    let mut cells = BTreeMap::new();
    let columns = [
        ("EPE", aggregate.epe.map(|r| Cell::Epe(r.per_pixel))),
        ("EPE noc", aggregate.epe_noc.map(|r| Cell::Epe(r.per_pixel))),
        ("D1-all", aggregate.d1_all.map(|r| Cell::D1All(r.per_pixel))),
        (
            "D1-all noc",
            aggregate.d1_all_noc.map(|r| Cell::D1All(r.per_pixel)),
        ),
    ];
    for (name, cell) in columns {
        if let Some(c) = cell {
            cells.insert(format!("{} {name}", a.dataset), c);
        }
    }
    let table = render_table(&BTreeMap::from([(a.method.clone(), cells)]));
    print!("{table}");
    let mut metrics = Vec::new();
    if with_epe {
        metrics.push("epe");
    }
    if with_d1 {
        metrics.push("d1_all");
    }
    let report = Report {
        command: "evaluate",
        version: env!("CARGO_PKG_VERSION"),
        method: a.method.clone(),
        dataset: a.dataset.clone(),
        kind,
        metrics,
        frames,
        aggregate,
        table,
    };
    if let Some(out) = &a.out {
        write_json(out, &report)?;
        write_json(
            &config_path_for_file(out),
            &serde_json::json!({
                "command": "evaluate",
                "version": env!("CARGO_PKG_VERSION"),
                "kind": kind,
                "metric": format!("{:?}", a.metric).to_lowercase(),
                "method": a.method,
                "dataset": a.dataset,
                "pairs": a.gt.len(),
                "occlusion_split": !a.occlusion.is_empty(),
                "table_weighting": "per_pixel",
            }),
        )?;
    }
    Ok(())
}
