//! Seeded procedural scenes: assets, objects on smooth trajectories and an
//! animated stereo rig.

mod assets;
mod driving;
mod flyingthings;
pub mod mesh;
pub mod rng;
pub mod texture;
mod trajectory;

pub use assets::{
    split_assets, split_side, AssetPool, Split, PROCEDURAL_TEXTURES_PER_KIND, REFERENCE_SPLIT_RATIO,
};
pub use driving::{generate_driving_preset, DrivingParams};
pub use flyingthings::{generate_flyingthings_scene, FlyingThingsParams};
pub use mesh::{load_obj_mesh, parse_obj, Mesh};
pub use texture::{load_texture_image, Texture, TextureFilter, TextureKind};
pub use trajectory::{Keyframe, RigidPose, Trajectory};

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraIntrinsics, CameraPose, GeometryError, StereoRig, View};
use crate::io::FormatError;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("asset pool has no {0} on the requested split side")]
    EmptyAssetPool(&'static str),
    #[error("trajectory: {0}")]
    Trajectory(String),
    #[error("time {time} outside trajectory domain [{start}, {end}]")]
    TimeOutOfRange { time: f64, start: f64, end: f64 },
    #[error("mesh {asset_id}: {message}")]
    InvalidMesh { asset_id: String, message: String },
    #[error("OBJ parse error at line {line}: {message}")]
    ObjParse { line: usize, message: String },
    #[error("asset: {0}")]
    Asset(String),
    #[error("scene: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Camera settings shared by every preset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub width: u32,
    pub height: u32,
    pub focal_mm: f64,
    pub sensor_width_mm: f64,
    pub baseline: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            width: 960,
            height: 540,
            focal_mm: 35.0,
            sensor_width_mm: 32.0,
            baseline: 1.0,
        }
    }
}

impl CameraConfig {
    pub fn intrinsics(&self) -> Result<CameraIntrinsics, GeometryError> {
        CameraIntrinsics::new(self.focal_mm, self.sensor_width_mm, self.width, self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectRole {
    Ground,
    Shell,
    Background,
    Foreground,
}

/// Object → world transform at one instant: `world = R · (scale ⊙ v) + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub scale: Vector3<f64>,
}

impl ObjectTransform {
    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v.component_mul(&self.scale) + self.translation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectInstance {
    pub object_index: u16,
    pub role: ObjectRole,
    /// Asset id of the mesh in [`SceneSpec::meshes`].
    pub mesh: String,
    /// Texture asset id per material slot.
    pub textures: Vec<String>,
    /// Scene-wide material index per material slot.
    pub material_indices: Vec<u16>,
    pub scale: Vector3<f64>,
    pub trajectory: Trajectory,
}

impl ObjectInstance {
    pub fn transform_at(&self, t: f64) -> Result<ObjectTransform, SceneError> {
        let pose = self.trajectory.eval(t)?;
        Ok(ObjectTransform {
            rotation: *pose.rotation.to_rotation_matrix().matrix(),
            translation: pose.position,
            scale: self.scale,
        })
    }
}

/// Resolved generation parameters, recorded verbatim in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "preset")]
pub enum GenerationParams {
    Flyingthings(FlyingThingsParams),
    Driving(DrivingParams),
    /// Hand-built scenes (tests, fixtures).
    Custom {
        description: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub name: String,
    pub seed: u64,
    /// Frames are numbered `1..=frames`.
    pub frames: u32,
    pub params: GenerationParams,
    /// Rig configuration; `rig.left` is the left camera pose at frame 1.
    pub rig: StereoRig,
    /// Left camera center and camera→world rotation over time.
    pub rig_trajectory: Trajectory,
    /// Reference depth of the scene content (occlusion tolerance scale).
    pub depth_scale: f64,
    pub meshes: BTreeMap<String, Mesh>,
    pub textures: BTreeMap<String, Texture>,
    pub ground_plane: ObjectInstance,
    pub shell: Option<ObjectInstance>,
    pub background_objects: Vec<ObjectInstance>,
    pub objects: Vec<ObjectInstance>,
}

pub fn pose_from_rigid(p: &RigidPose) -> Result<CameraPose, GeometryError> {
    CameraPose::from_camera_to_world(*p.rotation.to_rotation_matrix().matrix(), p.position)
}

pub fn rigid_from_camera_to_world(rotation: Matrix3<f64>, center: Vector3<f64>) -> RigidPose {
    RigidPose {
        position: center,
        rotation: UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(rotation)),
    }
}

impl SceneSpec {
    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.rig.intrinsics
    }

    pub fn check_time(&self, t: u32) -> Result<(), SceneError> {
        if t < 1 || t > self.frames {
            return Err(SceneError::TimeOutOfRange {
                time: t as f64,
                start: 1.0,
                end: self.frames as f64,
            });
        }
        Ok(())
    }

    /// The rig with its left camera placed at frame `t`.
    pub fn rig_at(&self, t: u32) -> Result<StereoRig, SceneError> {
        self.check_time(t)?;
        let pose = pose_from_rigid(&self.rig_trajectory.eval(t as f64)?)?;
        Ok(self.rig.with_left(pose))
    }

    pub fn camera_pose(&self, t: u32, view: View) -> Result<CameraPose, SceneError> {
        Ok(self.rig_at(t)?.pose(view))
    }

    /// Ground, shell, background, then foreground, in rendering order.
    pub fn instances(&self) -> impl Iterator<Item = &ObjectInstance> {
        std::iter::once(&self.ground_plane)
            .chain(self.shell.iter())
            .chain(self.background_objects.iter())
            .chain(self.objects.iter())
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: String| Err(SceneError::Invalid(m));
        if self.frames < 2 {
            return bad(format!("{} frames; at least 2 required", self.frames));
        }
        if !(self.depth_scale > 0.0) {
            return bad("depth scale must be positive".into());
        }
        let (start, end) = (self.rig_trajectory.start(), self.rig_trajectory.end());
        if start > 1.0 || end < self.frames as f64 {
            return bad("rig trajectory does not cover every frame".into());
        }
        let mut seen = BTreeSet::new();
        for inst in self.instances() {
            if inst.object_index == 0 || !seen.insert(inst.object_index) {
                return bad(format!(
                    "object index {} is reserved or duplicated",
                    inst.object_index
                ));
            }
            let Some(mesh) = self.meshes.get(&inst.mesh) else {
                return bad(format!(
                    "object {} references unknown mesh {}",
                    inst.object_index, inst.mesh
                ));
            };
            if inst.textures.len() != mesh.material_count as usize
                || inst.material_indices.len() != mesh.material_count as usize
            {
                return bad(format!(
                    "object {} needs one texture and material index per slot",
                    inst.object_index
                ));
            }
            if let Some(t) = inst
                .textures
                .iter()
                .find(|t| !self.textures.contains_key(*t))
            {
                return bad(format!(
                    "object {} references unknown texture {t}",
                    inst.object_index
                ));
            }
            if inst.material_indices.contains(&0) {
                return bad(format!(
                    "object {} uses reserved material index 0",
                    inst.object_index
                ));
            }
            if inst.trajectory.start() > 1.0 || inst.trajectory.end() < self.frames as f64 {
                return bad(format!(
                    "object {} trajectory does not cover every frame",
                    inst.object_index
                ));
            }
            mesh.validate(&inst.scale)?;
        }
        Ok(())
    }

    /// Canonical JSON: sorted keys, newline-terminated.
    pub fn to_json(&self) -> Result<String, SceneError> {
        let value =
            crate::io::sort_json_keys(serde_json::to_value(self).map_err(FormatError::from)?);
        let mut text = serde_json::to_string_pretty(&value).map_err(FormatError::from)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let spec: SceneSpec = serde_json::from_str(text).map_err(FormatError::from)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Assigns object and material indices and collects the assets a scene uses.
pub(crate) struct SceneBuilder<'a> {
    pool: &'a AssetPool,
    next_object: u16,
    next_material: u16,
    pub meshes: BTreeMap<String, Mesh>,
    pub textures: BTreeMap<String, Texture>,
}

impl<'a> SceneBuilder<'a> {
    pub fn new(pool: &'a AssetPool) -> Self {
        Self {
            pool,
            next_object: 1,
            next_material: 1,
            meshes: BTreeMap::new(),
            textures: BTreeMap::new(),
        }
    }

    pub fn instance(
        &mut self,
        role: ObjectRole,
        mesh: Mesh,
        textures: Vec<String>,
        scale: Vector3<f64>,
        trajectory: Trajectory,
    ) -> Result<ObjectInstance, SceneError> {
        if textures.len() != mesh.material_count as usize {
            return Err(SceneError::Invalid(format!(
                "{} needs {} textures",
                mesh.asset_id, mesh.material_count
            )));
        }
        for t in &textures {
            let tex = self
                .pool
                .textures
                .get(t)
                .ok_or_else(|| SceneError::Asset(format!("unknown texture {t}")))?;
            self.textures
                .entry(t.clone())
                .or_insert_with(|| tex.clone());
        }
        let object_index = self.next_object;
        self.next_object = self
            .next_object
            .checked_add(1)
            .ok_or_else(|| SceneError::Config("too many objects for 16-bit indices".into()))?;
        let material_indices: Vec<u16> = (0..mesh.material_count)
            .map(|k| self.next_material.checked_add(k))
            .collect::<Option<_>>()
            .ok_or_else(|| SceneError::Config("too many materials for 16-bit indices".into()))?;
        self.next_material += mesh.material_count;
        let id = mesh.asset_id.clone();
        self.meshes.entry(id.clone()).or_insert(mesh);
        Ok(ObjectInstance {
            object_index,
            role,
            mesh: id,
            textures,
            material_indices,
            scale,
            trajectory,
        })
    }

    pub fn pool_mesh(&self, id: &str) -> Result<Mesh, SceneError> {
        self.pool
            .meshes
            .get(id)
            .cloned()
            .ok_or_else(|| SceneError::Asset(format!("unknown mesh {id}")))
    }
}

pub(crate) fn random_unit_vector<R: rand::Rng>(rng: &mut R) -> Vector3<f64> {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).sqrt();
    Vector3::new(r * phi.cos(), r * phi.sin(), z)
}

pub(crate) fn random_rotation<R: rand::Rng>(rng: &mut R, max_angle: f64) -> UnitQuaternion<f64> {
    let axis = random_unit_vector(rng);
    let angle = rng.random_range(-max_angle..=max_angle);
    UnitQuaternion::from_scaled_axis(axis * angle)
}

pub(crate) fn pick<'s, R: rand::Rng>(rng: &mut R, items: &'s [String]) -> &'s String {
    &items[rng.random_range(0..items.len())]
}

/// `true` when `world` projects inside the image of `pose` in front of the camera.
pub(crate) fn visible_from(
    world: &Vector3<f64>,
    pose: &CameraPose,
    k: &CameraIntrinsics,
    min_depth: f64,
) -> bool {
    let p = pose.world_to_camera(world);
    p.z >= min_depth
        && crate::geometry::project(&p, k)
            .map(|px| k.contains(&px))
            .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn object_transform_applies_scale_then_rotation() {
        let inst_rot = UnitQuaternion::from_euler_angles(0.0, std::f64::consts::FRAC_PI_2, 0.0);
        let t = ObjectTransform {
            rotation: *inst_rot.to_rotation_matrix().matrix(),
            translation: Vector3::new(0.0, 0.0, 10.0),
            scale: Vector3::new(2.0, 1.0, 1.0),
        };
        let w = t.apply(&Vector3::new(1.0, 0.0, 0.0));
        assert!((w - Vector3::new(0.0, 0.0, 8.0)).amax() < 1e-12);
    }
}
