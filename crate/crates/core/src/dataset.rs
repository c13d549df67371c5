//! On-disk dataset layout: renders a scene, derives its ground truth and
//! writes every pass plus `manifest.json` and `scene.json`.
//!
//! Files live at `{scene}/{pass}/{frame:04}_{L|R}.{ext}` below the output
//! directory; manifest paths are relative to the scene directory.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geometry::{CameraPose, StereoRig, View};
use crate::groundtruth::{derive_groundtruth, BoundaryParams, GroundTruthError, GroundTruthFrame};
use crate::io::{
    read_file, read_flo, read_manifest, read_pfm, read_pgm16, read_pgm8, read_ppm, write_file,
    write_flo, write_manifest, write_pfm, write_pgm16, write_pgm8, write_ppm, FormatError,
    FrameCameras, Manifest, RunStatus,
};
use crate::raster::{IndexMap, Mask, Raster, RgbImage, ScalarMap};
use crate::render::{render_sequence, FramePasses, FrameSink, RenderError, RenderOptions};
use crate::scene::{SceneError, SceneSpec};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCENE_FILE: &str = "scene.json";

/// Occlusion depth tolerance relative to the scene depth scale.
pub const OCCLUSION_EPSILON_RATIO: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("render: {0}")]
    Render(#[from] RenderError),
    #[error("groundtruth: frame {frame} view {view}: {source}")]
    GroundTruth {
        frame: u32,
        view: &'static str,
        source: GroundTruthError,
    },
    #[error("io: {0}")]
    Format(#[from] FormatError),
    #[error("scene: {0}")]
    Scene(#[from] SceneError),
    #[error("dataset: {0}")]
    Layout(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DatasetOptions {
    pub render: RenderOptions,
    pub boundaries: BoundaryParams,
    /// Render passes only; ground truth can be added later with [`derive_dataset`].
    pub skip_groundtruth: bool,
}

/// A map and the file format it is stored in.
enum Payload<'a> {
    Rgb(&'a RgbImage),
    Float(&'a ScalarMap),
    Flow(&'a Raster<f32>),
    Index(&'a IndexMap),
    Mask(&'a Mask),
}

impl Payload<'_> {
    fn extension(&self) -> &'static str {
        match self {
            Payload::Rgb(_) => "ppm",
            Payload::Float(_) => "pfm",
            Payload::Flow(_) => "flo",
            Payload::Index(_) | Payload::Mask(_) => "pgm",
        }
    }

    fn encode(&self) -> Result<Vec<u8>, FormatError> {
        match self {
            Payload::Rgb(m) => write_ppm(m),
            Payload::Float(m) => write_pfm(m),
            Payload::Flow(m) => write_flo(m),
            Payload::Index(m) => write_pgm16(m),
            Payload::Mask(m) => write_pgm8(&m.map(|b| if b { 255 } else { 0 })),
        }
    }
}

/// Manifest key of a pass file.
pub fn file_key(pass: &str, view: View) -> String {
    format!("{pass}/{}", view.tag())
}

/// Scene-relative path of a pass file.
pub fn pass_path(pass: &str, frame: u32, view: View, extension: &str) -> String {
    format!("{pass}/{frame:04}_{}.{extension}", view.tag())
}

fn render_payloads(p: &FramePasses) -> Vec<(&'static str, Payload<'_>)> {
    let mut out = vec![
        ("rgb", Payload::Rgb(&p.rgb)),
        ("depth", Payload::Float(&p.depth)),
        ("pos3d_t", Payload::Float(&p.pos3d_t)),
        ("object_index", Payload::Index(&p.object_index)),
        ("material_index", Payload::Index(&p.material_index)),
    ];
    if let Some(m) = &p.pos3d_prev {
        out.push(("pos3d_prev", Payload::Float(m)));
    }
    if let Some(m) = &p.pos3d_next {
        out.push(("pos3d_next", Payload::Float(m)));
    }
    out
}

fn groundtruth_payloads(g: &GroundTruthFrame) -> Vec<(&'static str, Payload<'_>)> {
    let mut out = vec![("disparity", Payload::Float(&g.disparity))];
    let optional: [(&'static str, Option<Payload<'_>>); 7] = [
        ("flow_fwd", g.flow_fwd.as_ref().map(Payload::Flow)),
        ("flow_bwd", g.flow_bwd.as_ref().map(Payload::Flow)),
        (
            "dispchange_fwd",
            g.dispchange_fwd.as_ref().map(Payload::Float),
        ),
        (
            "dispchange_bwd",
            g.dispchange_bwd.as_ref().map(Payload::Float),
        ),
        (
            "motion_boundaries",
            g.motion_boundaries.as_ref().map(Payload::Mask),
        ),
        ("occlusion_fwd", g.occlusion_fwd.as_ref().map(Payload::Mask)),
        ("occlusion_bwd", g.occlusion_bwd.as_ref().map(Payload::Mask)),
    ];
    out.extend(
        optional
            .into_iter()
            .filter_map(|(name, p)| p.map(|p| (name, p))),
    );
    out
}

fn write_payloads(
    root: &Path,
    manifest: &mut Manifest,
    frame: u32,
    view: View,
    payloads: &[(&'static str, Payload<'_>)],
) -> Result<(), FormatError> {
    for (pass, payload) in payloads {
        let rel = pass_path(pass, frame, view, payload.extension());
        write_file(&root.join(&rel), &payload.encode()?)?;
        manifest
            .frame_mut(frame)
            .files
            .insert(file_key(pass, view), rel);
    }
    Ok(())
}

fn save_manifest(root: &Path, manifest: &Manifest) -> Result<(), FormatError> {
    write_file(
        &root.join(MANIFEST_FILE),
        write_manifest(manifest)?.as_bytes(),
    )
}

/// Frame sink that writes passes as they arrive and derives the ground truth
/// of frame `t` once frame `t + 1` of the same view is available.
pub struct DatasetWriter {
    root: PathBuf,
    manifest: Manifest,
    rig: StereoRig,
    epsilon: f64,
    boundaries: BoundaryParams,
    groundtruth: bool,
    /// Per view: the previous and current frame awaiting derivation.
    window: [(Option<FramePasses>, Option<FramePasses>); 2],
    error: Option<DatasetError>,
}

fn view_slot(view: View) -> usize {
    match view {
        View::Left => 0,
        View::Right => 1,
    }
}

impl DatasetWriter {
    /// Prepares the scene directory and writes `scene.json`.
    pub fn new(
        spec: &SceneSpec,
        scene_dir: &Path,
        opts: &DatasetOptions,
    ) -> Result<Self, DatasetError> {
        let generation = serde_json::to_value(&spec.params).map_err(FormatError::from)?;
        let manifest = Manifest::new(
            spec.name.clone(),
            spec.seed,
            generation,
            *spec.intrinsics(),
            spec.rig.baseline,
            spec.depth_scale,
        );
        write_file(&scene_dir.join(SCENE_FILE), spec.to_json()?.as_bytes())?;
        let mut cameras = Vec::with_capacity(spec.frames as usize);
        for t in 1..=spec.frames {
            cameras.push((
                t,
                spec.camera_pose(t, View::Left)?,
                spec.camera_pose(t, View::Right)?,
            ));
        }
        let mut writer = Self {
            root: scene_dir.to_path_buf(),
            manifest,
            rig: spec.rig,
            epsilon: OCCLUSION_EPSILON_RATIO * spec.depth_scale,
            boundaries: opts.boundaries,
            groundtruth: !opts.skip_groundtruth,
            window: [(None, None), (None, None)],
            error: None,
        };
        for (t, left, right) in cameras {
            writer.manifest.frame_mut(t).camera = Some(FrameCameras { left, right });
        }
        Ok(writer)
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn derive(
        &mut self,
        prev: Option<&FramePasses>,
        cur: &FramePasses,
        next: Option<&FramePasses>,
    ) -> Result<(), DatasetError> {
        let gt = derive_groundtruth(prev, cur, next, &self.rig, self.epsilon, &self.boundaries)
            .map_err(|source| DatasetError::GroundTruth {
                frame: cur.frame,
                view: cur.view.tag(),
                source,
            })?;
        write_payloads(
            &self.root,
            &mut self.manifest,
            cur.frame,
            cur.view,
            &groundtruth_payloads(&gt),
        )?;
        Ok(())
    }

    fn accept(&mut self, passes: &FramePasses) -> Result<(), DatasetError> {
        write_payloads(
            &self.root,
            &mut self.manifest,
            passes.frame,
            passes.view,
            &render_payloads(passes),
        )?;
        if !self.groundtruth {
            return Ok(());
        }
        let slot = view_slot(passes.view);
        let (prev, cur) = std::mem::take(&mut self.window[slot]);
        if let Some(cur) = cur {
            self.derive(prev.as_ref(), &cur, Some(passes))?;
            self.window[slot] = (Some(cur), Some(passes.clone()));
        } else {
            self.window[slot] = (None, Some(passes.clone()));
        }
        Ok(())
    }

    /// Derives the last frame, marks the run complete and writes the manifest.
    pub fn finish(mut self) -> Result<Manifest, DatasetError> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        let result = (|| -> Result<(), DatasetError> {
            for slot in 0..2 {
                let (prev, cur) = std::mem::take(&mut self.window[slot]);
                if let Some(cur) = cur {
                    self.derive(prev.as_ref(), &cur, None)?;
                }
            }
            Ok(())
        })();
        if let Err(e) = result {
            self.fail(&e.to_string());
            return Err(e);
        }
        self.manifest.status = RunStatus::Complete;
        save_manifest(&self.root, &self.manifest)?;
        Ok(self.manifest)
    }

    fn fail(&mut self, reason: &str) {
        self.manifest.status = RunStatus::Partial {
            reason: reason.to_string(),
        };
        // best effort: the original error is what gets reported
        let _ = save_manifest(&self.root, &self.manifest);
    }
}

impl FrameSink for DatasetWriter {
    fn put(&mut self, passes: &FramePasses) -> Result<(), RenderError> {
        self.accept(passes).map_err(|e| {
            let message = e.to_string();
            self.error = Some(e);
            RenderError::Sink(message)
        })
    }

    fn abort(&mut self, reason: &str) {
        self.fail(reason);
    }
}

/// Renders `spec` into `out_dir/{spec.name}` and returns the written manifest.
pub fn generate_dataset(
    spec: &SceneSpec,
    out_dir: &Path,
    opts: &DatasetOptions,
) -> Result<Manifest, DatasetError> {
    spec.validate()?;
    let mut writer = DatasetWriter::new(spec, &out_dir.join(&spec.name), opts)?;
    if let Err(e) = render_sequence(spec, &opts.render, &mut writer) {
        return Err(writer.error.take().unwrap_or(DatasetError::Render(e)));
    }
    writer.finish()
}

pub fn load_manifest(scene_dir: &Path) -> Result<Manifest, DatasetError> {
    let bytes = read_file(&scene_dir.join(MANIFEST_FILE))?;
    let text = String::from_utf8(bytes).map_err(|_| {
        DatasetError::Layout(format!(
            "{}: not UTF-8",
            scene_dir.join(MANIFEST_FILE).display()
        ))
    })?;
    Ok(read_manifest(&text)?)
}

fn manifest_path(scene_dir: &Path, manifest: &Manifest, frame: u32, key: &str) -> Option<PathBuf> {
    manifest
        .frame(frame)
        .and_then(|f| f.files.get(key))
        .map(|rel| scene_dir.join(rel))
}

fn annotate(path: &Path) -> impl FnOnce(FormatError) -> DatasetError + '_ {
    move |e| match e {
        FormatError::File { .. } => DatasetError::Format(e),
        other => DatasetError::Layout(format!("{}: {other}", path.display())),
    }
}

fn read_with<T>(
    path: &Path,
    decode: fn(&[u8]) -> Result<T, FormatError>,
) -> Result<T, DatasetError> {
    let bytes = read_file(path)?;
    decode(&bytes).map_err(annotate(path))
}

/// Reads the render passes of one frame and view back from disk.
pub fn load_frame_passes(
    scene_dir: &Path,
    manifest: &Manifest,
    frame: u32,
    view: View,
) -> Result<FramePasses, DatasetError> {
    let path = |pass: &str| manifest_path(scene_dir, manifest, frame, &file_key(pass, view));
    let required = |pass: &str| {
        path(pass).ok_or_else(|| {
            DatasetError::Layout(format!("frame {frame} view {}: no {pass} file", view.tag()))
        })
    };
    let optional = |pass: &str| path(pass).map(|p| read_with(&p, read_pfm)).transpose();
    Ok(FramePasses {
        view,
        frame,
        rgb: read_with(&required("rgb")?, read_ppm)?,
        depth: read_with(&required("depth")?, read_pfm)?,
        pos3d_t: read_with(&required("pos3d_t")?, read_pfm)?,
        pos3d_prev: optional("pos3d_prev")?,
        pos3d_next: optional("pos3d_next")?,
        object_index: read_with(&required("object_index")?, read_pgm16)?,
        material_index: read_with(&required("material_index")?, read_pgm16)?,
    })
}

/// Reads a flow file (`.flo`).
pub fn load_flow(path: &Path) -> Result<Raster<f32>, DatasetError> {
    read_with(path, read_flo)
}

/// Reads a float map (`.pfm`).
pub fn load_float_map(path: &Path) -> Result<ScalarMap, DatasetError> {
    read_with(path, read_pfm)
}

/// Reads an 8-bit mask; any nonzero sample is set.
pub fn load_mask(path: &Path) -> Result<Mask, DatasetError> {
    Ok(read_with(path, read_pgm8)?.map(|v| v != 0))
}

/// Derives the ground truth of a rendered scene directory from its stored
/// passes and rewrites the manifest.
pub fn derive_dataset(
    scene_dir: &Path,
    boundaries: &BoundaryParams,
) -> Result<Manifest, DatasetError> {
    let mut manifest = load_manifest(scene_dir)?;
    let first = manifest
        .frames
        .first()
        .and_then(|f| f.camera.as_ref())
        .ok_or_else(|| DatasetError::Layout("manifest lists no frames".into()))?;
    let rig = StereoRig::new(first.left, manifest.baseline, manifest.intrinsics)
        .map_err(SceneError::from)?;
    let epsilon = OCCLUSION_EPSILON_RATIO * manifest.depth_scale;
    let indices: Vec<u32> = manifest.frames.iter().map(|f| f.index).collect();
    let stored = manifest.clone();
    for view in View::BOTH {
        let load = |i: usize| -> Result<Option<FramePasses>, DatasetError> {
            indices
                .get(i)
                .map(|&t| load_frame_passes(scene_dir, &stored, t, view))
                .transpose()
        };
        let mut prev: Option<FramePasses> = None;
        let mut cur = load(0)?;
        for i in 0..indices.len() {
            let next = load(i + 1)?;
            let c = cur.as_ref().expect("frame loaded");
            let gt = derive_groundtruth(prev.as_ref(), c, next.as_ref(), &rig, epsilon, boundaries)
                .map_err(|source| DatasetError::GroundTruth {
                    frame: c.frame,
                    view: view.tag(),
                    source,
                })?;
            write_payloads(
                scene_dir,
                &mut manifest,
                c.frame,
                view,
                &groundtruth_payloads(&gt),
            )?;
            prev = cur;
            cur = next;
        }
    }
    manifest.status = RunStatus::Complete;
    save_manifest(scene_dir, &manifest)?;
    Ok(manifest)
}

/// Left and right camera poses recorded for `frame`.
pub fn frame_cameras(manifest: &Manifest, frame: u32) -> Option<(CameraPose, CameraPose)> {
    manifest
        .frame(frame)
        .and_then(|f| f.camera.as_ref())
        .map(|c| (c.left, c.right))
}
