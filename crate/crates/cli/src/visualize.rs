use serde::Serialize;

use sfgen::dataset::{load_float_map, load_flow};
use sfgen::io::{write_file, write_ppm};

use crate::colormap::{colorize_flow, colorize_scalar, default_max_abs, default_max_flow};
use crate::config::{config_path_for_file, write_json};
use crate::VisualizeArgs;

#[derive(Debug, Serialize)]
struct VisualizeConfig {
    command: &'static str,
    version: &'static str,
    input: String,
    kind: &'static str,
    colormap: &'static str,
    max: f64,
    signed: bool,
}

pub fn run(a: &VisualizeArgs) -> anyhow::Result<()> {
    let ext = a.input.extension().and_then(|e| e.to_str()).unwrap_or("");
    let (image, kind, colormap, max) = match ext {
        "flo" => {
            let flow = load_flow(&a.input)?;
            let max = a.max_flow.unwrap_or_else(|| default_max_flow(&flow));
            (colorize_flow(&flow, max), "flow", "middlebury_wheel", max)
        }
        "pfm" => {
            let map = load_float_map(&a.input)?;
            anyhow::ensure!(
                map.channels() == 1,
                "visualize: {}: expected a single-channel map, found {} channels",
                a.input.display(),
                map.channels()
            );
            let max = a.max_disp.unwrap_or_else(|| default_max_abs(&map));
            (colorize_scalar(&map, max, a.signed), "scalar", "hot", max)
        }
        _ => anyhow::bail!(
            "visualize: {}: unknown input format (expected .flo or .pfm)",
            a.input.display()
        ),
    };
    anyhow::ensure!(
        max > 0.0 && max.is_finite(),
        "visualize: normalization {max} must be positive"
    );
    write_file(&a.out, &write_ppm(&image)?)?;
    let config = VisualizeConfig {
        command: "visualize",
        version: env!("CARGO_PKG_VERSION"),
        input: a.input.display().to_string(),
        kind,
        colormap,
        max,
        signed: a.signed,
    };
    write_json(&config_path_for_file(&a.out), &config)?;
    println!("visualize: wrote {}", a.out.display());
    Ok(())
}
