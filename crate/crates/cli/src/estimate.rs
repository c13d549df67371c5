use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use sfgen::io::{read_file, read_pnm, write_file, write_pfm, Pnm};
use sfgen::matching::{estimate_disparity, FeatureParams, MatchParams};
use sfgen::raster::RgbImage;

use crate::config::{config_path_for_file, write_json};
use crate::EstimateArgs;

#[derive(Debug, Serialize)]
struct EstimateConfig {
    command: &'static str,
    version: &'static str,
    left: String,
    right: String,
    width: usize,
    height: usize,
    requested_max_disp: usize,
    max_disp: usize,
    params: MatchParams,
}

fn read_image(path: &Path) -> anyhow::Result<RgbImage> {
    let bytes = read_file(path).context("io")?;
    match read_pnm(&bytes).with_context(|| format!("io: {}", path.display()))? {
        Pnm::Gray8(r) | Pnm::Rgb8(r) => Ok(r),
        Pnm::Gray16(_) => anyhow::bail!(
            "io: {}: 16-bit images are not accepted by the matcher",
            path.display()
        ),
    }
}

pub fn run(a: &EstimateArgs) -> anyhow::Result<()> {
    let left = read_image(&a.left)?;
    let right = read_image(&a.right)?;
    anyhow::ensure!(
        left.same_size(&right),
        "match: size mismatch: {} is {}x{}, {} is {}x{}",
        a.left.display(),
        left.width(),
        left.height(),
        a.right.display(),
        right.width(),
        right.height()
    );
    anyhow::ensure!(a.max_disp > 0, "match: --max-disp must be positive");
    let params = MatchParams {
        max_disp: a.max_disp.min(left.width()),
        features: FeatureParams {
            radius: a.radius,
            normalize: !a.no_normalize,
        },
        refine: !a.no_refine,
    };
    let config = EstimateConfig {
        command: "estimate",
        version: env!("CARGO_PKG_VERSION"),
        left: a.left.display().to_string(),
        right: a.right.display().to_string(),
        width: left.width(),
        height: left.height(),
        requested_max_disp: a.max_disp,
        max_disp: params.max_disp,
        params,
    };
    let est = estimate_disparity(&left, &right, &params).context("match")?;
    write_file(&a.out, &write_pfm(&est.disparity)?).context("io")?;
    if let Some(path) = &a.confidence {
        write_file(path, &write_pfm(&est.confidence)?).context("io")?;
    }
    write_json(&config_path_for_file(&a.out), &config)?;
    println!(
        "estimate: {} hypotheses, wrote {}",
        params.max_disp,
        a.out.display()
    );
    Ok(())
}
