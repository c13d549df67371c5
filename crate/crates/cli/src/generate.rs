use anyhow::Context;
use serde::Serialize;

use sfgen::dataset::{derive_dataset, generate_dataset, DatasetOptions, OCCLUSION_EPSILON_RATIO};
use sfgen::groundtruth::BoundaryParams;
use sfgen::render::RenderOptions;
use sfgen::scene::{
    generate_driving_preset, generate_flyingthings_scene, AssetPool, CameraConfig, DrivingParams,
    FlyingThingsParams, GenerationParams, SceneSpec, Split, TextureFilter,
};

use crate::config::write_json;
use crate::{DeriveArgs, FilterArg, GenerateArgs, Preset, SplitArg};

pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Serialize)]
struct GenerateConfig {
    command: &'static str,
    version: &'static str,
    preset: &'static str,
    seed: u64,
    frames: u32,
    width: u32,
    height: u32,
    focal_mm: f64,
    sensor_width_mm: f64,
    focal_px: f64,
    principal_point: [f64; 2],
    baseline: f64,
    texture_filter: TextureFilter,
    light: [f64; 3],
    assets_dir: Option<String>,
    groundtruth: bool,
    scene: String,
    generation: GenerationParams,
    depth_scale: f64,
    occlusion_epsilon: f64,
    min_flow_difference: f64,
    min_area: usize,
}

fn build_scene(a: &GenerateArgs, pool: &AssetPool) -> anyhow::Result<SceneSpec> {
    let camera = CameraConfig {
        width: a.size.width,
        height: a.size.height,
        focal_mm: a.focal_mm,
        sensor_width_mm: a.sensor_mm,
        baseline: a.baseline,
    };
    let spec = match a.preset {
        Preset::Flyingthings => {
            let mut p = FlyingThingsParams {
                camera,
                frames: a.frames,
                split: match a.split {
                    SplitArg::Train => Split::Train,
                    SplitArg::Test => Split::Test,
                },
                ..FlyingThingsParams::default()
            };
            if let Some(n) = a.objects {
                p.n_objects = [n, n];
            }
            if let Some(n) = a.background {
                p.n_background = n;
            }
            generate_flyingthings_scene(a.seed, &p, pool)
        }
        Preset::Driving => {
            anyhow::ensure!(
                a.split == SplitArg::Train,
                "cli: --split applies to the flyingthings preset only"
            );
            let mut p = DrivingParams {
                camera,
                frames: a.frames,
                ..DrivingParams::default()
            };
            if let Some(n) = a.objects {
                p.n_oncoming = [n, n];
            }
            if let Some(n) = a.background {
                p.n_parked = n;
            }
            generate_driving_preset(a.seed, &p, pool)
        }
    };
    spec.context("scene")
}

pub fn run(a: &GenerateArgs) -> anyhow::Result<()> {
    let mut pool = AssetPool::builtin();
    if let Some(dir) = &a.assets_dir {
        pool.ingest_dir(dir)
            .with_context(|| format!("scene: assets {}", dir.display()))?;
    }
    let spec = build_scene(a, &pool)?;
    let render = RenderOptions {
        filter: match a.texture_filter {
            FilterArg::Nearest => TextureFilter::Nearest,
            FilterArg::Bilinear => TextureFilter::Bilinear,
        },
        ..RenderOptions::default()
    };
    let boundaries = BoundaryParams::default();
    let k = spec.intrinsics();
    let pp = k.principal_point();
    let config = GenerateConfig {
        command: "generate",
        version: env!("CARGO_PKG_VERSION"),
        preset: match a.preset {
            Preset::Flyingthings => "flyingthings",
            Preset::Driving => "driving",
        },
        seed: a.seed,
        frames: spec.frames,
        width: k.width(),
        height: k.height(),
        focal_mm: k.focal_mm(),
        sensor_width_mm: k.sensor_width_mm(),
        focal_px: k.focal_px(),
        principal_point: [pp.x, pp.y],
        baseline: spec.rig.baseline,
        texture_filter: render.filter,
        light: [render.light.x, render.light.y, render.light.z],
        assets_dir: a.assets_dir.as_ref().map(|d| d.display().to_string()),
        groundtruth: !a.no_groundtruth,
        scene: spec.name.clone(),
        generation: spec.params.clone(),
        depth_scale: spec.depth_scale,
        occlusion_epsilon: OCCLUSION_EPSILON_RATIO * spec.depth_scale,
        min_flow_difference: boundaries.min_flow_difference,
        min_area: boundaries.min_area,
    };
    write_json(&a.out.join(CONFIG_FILE), &config)?;
    if a.dry_run {
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::to_value(&config)?)?
        );
        return Ok(());
    }
    let opts = DatasetOptions {
        render,
        boundaries,
        skip_groundtruth: a.no_groundtruth,
    };
    let manifest = generate_dataset(&spec, &a.out, &opts)?;
    println!(
        "generate: wrote {} frames of {} to {}",
        manifest.frames.len(),
        spec.name,
        a.out.join(&spec.name).display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct DeriveConfig {
    command: &'static str,
    version: &'static str,
    min_flow_difference: f64,
    min_area: usize,
    occlusion_epsilon_ratio: f64,
}

pub fn run_derive(a: &DeriveArgs) -> anyhow::Result<()> {
    let boundaries = BoundaryParams {
        min_flow_difference: a.min_flow_difference,
        min_area: a.min_area,
    };
    let config = DeriveConfig {
        command: "derive",
        version: env!("CARGO_PKG_VERSION"),
        min_flow_difference: boundaries.min_flow_difference,
        min_area: boundaries.min_area,
        occlusion_epsilon_ratio: OCCLUSION_EPSILON_RATIO,
    };
    write_json(&a.scene.join("derive.config.json"), &config)?;
    let manifest = derive_dataset(&a.scene, &boundaries)?;
    println!(
        "derive: {} frames in {}",
        manifest.frames.len(),
        a.scene.display()
    );
    Ok(())
}
