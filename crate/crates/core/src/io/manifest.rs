use std::collections::BTreeMap;
use std::path::{Component, Path};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::FormatError;
use crate::geometry::{CameraIntrinsics, CameraPose};

pub const MANIFEST_VERSION: &str = "sfgen-manifest/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "state")]
pub enum RunStatus {
    Complete,
    /// The run stopped early; files listed so far exist, the rest are missing.
    Partial {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameCameras {
    pub left: CameraPose,
    pub right: CameraPose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<FrameCameras>,
    /// `{pass}/{view}` → path relative to the scene directory.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: String,
    pub dataset: String,
    pub seed: u64,
    pub status: RunStatus,
    /// Generation parameters exactly as resolved by the generator.
    pub generation: Value,
    pub intrinsics: CameraIntrinsics,
    pub baseline: f64,
    /// Reference depth used to scale occlusion tolerances.
    pub depth_scale: f64,
    pub frames: Vec<FrameRecord>,
}

impl Manifest {
    pub fn new(
        dataset: impl Into<String>,
        seed: u64,
        generation: Value,
        intrinsics: CameraIntrinsics,
        baseline: f64,
        depth_scale: f64,
    ) -> Self {
        Self {
            format_version: MANIFEST_VERSION.to_string(),
            dataset: dataset.into(),
            seed,
            status: RunStatus::Partial {
                reason: "run in progress".into(),
            },
            generation,
            intrinsics,
            baseline,
            depth_scale,
            frames: Vec::new(),
        }
    }

    pub fn frame(&self, index: u32) -> Option<&FrameRecord> {
        self.frames.iter().find(|f| f.index == index)
    }

    pub fn frame_mut(&mut self, index: u32) -> &mut FrameRecord {
        if let Some(pos) = self.frames.iter().position(|f| f.index == index) {
            return &mut self.frames[pos];
        }
        self.frames.push(FrameRecord {
            index,
            camera: None,
            files: BTreeMap::new(),
        });
        self.frames.sort_by_key(|f| f.index);
        let pos = self.frames.iter().position(|f| f.index == index).unwrap();
        &mut self.frames[pos]
    }

    pub fn validate(&self) -> Result<(), FormatError> {
        if !(self.baseline > 0.0) {
            return Err(FormatError::Manifest(format!(
                "baseline {} must be positive",
                self.baseline
            )));
        }
        for frame in &self.frames {
            if frame.camera.is_none() {
                return Err(FormatError::Manifest(format!(
                    "frame {}: missing camera block",
                    frame.index
                )));
            }
            for (pass, path) in &frame.files {
                let p = Path::new(path);
                let portable = !path.contains('\\')
                    && p.components().all(|c| matches!(c, Component::Normal(_)));
                if !portable {
                    return Err(FormatError::Manifest(format!(
                        "frame {}: path {path:?} for {pass} is not relative and portable",
                        frame.index
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks that every listed file exists below `root`.
    pub fn missing_files(&self, root: &Path) -> Vec<String> {
        self.frames
            .iter()
            .flat_map(|f| f.files.values())
            .filter(|rel| !root.join(rel).is_file())
            .cloned()
            .collect()
    }
}

/// Pretty JSON with keys sorted at every level, newline-terminated.
pub fn write_manifest(m: &Manifest) -> Result<String, FormatError> {
    m.validate()?;
    let value = sort_keys(serde_json::to_value(m)?);
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

pub fn read_manifest(text: &str) -> Result<Manifest, FormatError> {
    let value: Value = serde_json::from_str(text)?;
    let version = value
        .get("format_version")
        .and_then(Value::as_str)
        .ok_or_else(|| FormatError::Manifest("missing format_version".into()))?;
    if version != MANIFEST_VERSION {
        return Err(FormatError::IncompatibleVersion {
            expected: MANIFEST_VERSION,
            found: version.to_string(),
        });
    }
    let m: Manifest = serde_json::from_value(value)?;
    m.validate()?;
    Ok(m)
}

pub(crate) fn sort_keys(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, sort_keys(v));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}
