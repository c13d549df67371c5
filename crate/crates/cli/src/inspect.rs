use std::path::Path;

use sfgen::dataset::{load_float_map, load_flow, load_manifest};
use sfgen::io::{read_file, read_pnm, Pnm, RunStatus};
use sfgen::raster::Raster;

use crate::InspectArgs;

fn describe_scene(dir: &Path) -> anyhow::Result<()> {
    let m = load_manifest(dir)?;
    let k = &m.intrinsics;
    println!("dataset      {}", m.dataset);
    println!("format       {}", m.format_version);
    println!("seed         {}", m.seed);
    println!("frames       {}", m.frames.len());
    println!("resolution   {}x{}", k.width(), k.height());
    println!(
        "focal        {} mm / {} mm sensor = {} px",
        k.focal_mm(),
        k.sensor_width_mm(),
        k.focal_px()
    );
    println!("baseline     {}", m.baseline);
    println!(
        "files        {}",
        m.frames.iter().map(|f| f.files.len()).sum::<usize>()
    );
    let missing = m.missing_files(dir);
    match &m.status {
        RunStatus::Complete => println!("status       complete"),
        RunStatus::Partial { reason } => println!("status       partial ({reason})"),
    }
    anyhow::ensure!(
        missing.is_empty(),
        "io: {}: {} listed files are missing, first {}",
        dir.display(),
        missing.len(),
        missing[0]
    );
    anyhow::ensure!(
        m.status == RunStatus::Complete,
        "io: {}: run did not complete",
        dir.display()
    );
    Ok(())
}

fn stats(name: &str, map: &Raster<f32>) {
    let finite: Vec<f32> = map
        .data()
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .collect();
    let min = finite.iter().copied().fold(f32::INFINITY, f32::min);
    let max = finite.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    println!(
        "{name} {}x{}x{}  finite {}  non-finite {}  min {min}  max {max}",
        map.width(),
        map.height(),
        map.channels(),
        finite.len(),
        map.data().len() - finite.len()
    );
}

fn describe_file(path: &Path) -> anyhow::Result<()> {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "flo" => stats("flo", &load_flow(path)?),
        "pfm" => stats("pfm", &load_float_map(path)?),
        "ppm" | "pgm" => {
            let bytes = read_file(path)?;
            let image =
                read_pnm(&bytes).map_err(|e| anyhow::anyhow!("io: {}: {e}", path.display()))?;
            let (kind, max) = match &image {
                Pnm::Gray8(r) => ("pgm 8-bit", r.data().iter().map(|&v| v as u32).max()),
                Pnm::Gray16(r) => ("pgm 16-bit", r.data().iter().map(|&v| v as u32).max()),
                Pnm::Rgb8(r) => ("ppm", r.data().iter().map(|&v| v as u32).max()),
            };
            println!(
                "{kind} {}x{}  max sample {}",
                image.width(),
                image.height(),
                max.unwrap_or(0)
            );
        }
        _ => anyhow::bail!("inspect: {}: unknown file format", path.display()),
    }
    Ok(())
}

pub fn run(a: &InspectArgs) -> anyhow::Result<()> {
    if a.path.is_dir() {
        describe_scene(&a.path)
    } else {
        describe_file(&a.path)
    }
}
