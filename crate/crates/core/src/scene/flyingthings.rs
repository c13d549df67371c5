//! Randomized "flying things" scenes: foreground objects on smooth random
//! trajectories in front of static background shapes on a textured ground.

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::assets::{AssetPool, Split, REFERENCE_SPLIT_RATIO};
use super::mesh::{cuboid, cylinder, ground_grid};
use super::rng::{stream_rng, Stream};
use super::{
    pick, pose_from_rigid, random_rotation, random_unit_vector, rigid_from_camera_to_world,
    visible_from, CameraConfig, GenerationParams, Keyframe, ObjectInstance, ObjectRole, RigidPose,
    SceneBuilder, SceneError, SceneSpec, Trajectory,
};
use crate::geometry::{look_at, unproject, CameraIntrinsics, CameraPose, PixelPos, StereoRig};

/// Height of the ground plane (world +Y points down).
pub(crate) const GROUND_Y: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlyingThingsParams {
    pub camera: CameraConfig,
    pub frames: u32,
    /// Inclusive range of the foreground object count.
    pub n_objects: [u32; 2],
    pub n_background: u32,
    pub split: Split,
    pub split_ratio: f64,
    /// Camera-depth range of foreground keyframe positions.
    pub depth_range: [f64; 2],
    /// Per-frame foreground displacement as a fraction of the depth range.
    pub object_speed: [f64; 2],
    /// Maximum foreground rotation per frame, radians.
    pub object_spin: f64,
    /// Per-frame camera displacement, world units.
    pub camera_speed: [f64; 2],
    /// Maximum camera yaw/pitch change between camera keyframes, radians.
    pub camera_turn: f64,
    /// Render a large textured box around the scene so that no pixel is void.
    pub shell: bool,
}

impl Default for FlyingThingsParams {
    fn default() -> Self {
        Self {
            camera: CameraConfig::default(),
            frames: 10,
            n_objects: [5, 20],
            n_background: 200,
            split: Split::Train,
            split_ratio: REFERENCE_SPLIT_RATIO,
            depth_range: [6.0, 30.0],
            object_speed: [0.005, 0.04],
            object_spin: 0.05,
            camera_speed: [0.05, 0.3],
            camera_turn: 0.1,
            shell: true,
        }
    }
}

impl FlyingThingsParams {
    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: String| Err(SceneError::Config(m));
        let [lo, hi] = self.n_objects;
        if !(1 <= lo && lo <= hi && hi <= 100) {
            return bad(format!(
                "object count range {lo}..={hi} must lie within 1..=100"
            ));
        }
        if self.frames < 2 {
            return bad(format!("{} frames; at least 2 required", self.frames));
        }
        let [z0, z1] = self.depth_range;
        if !(z0 > 0.0 && z0 < z1 && z1.is_finite()) {
            return bad("depth range must be positive and increasing".into());
        }
        for (name, [a, b]) in [
            ("object speed", self.object_speed),
            ("camera speed", self.camera_speed),
        ] {
            if !(a >= 0.0 && a <= b && b.is_finite()) {
                return bad(format!("{name} range must be non-negative and ordered"));
            }
        }
        if !(self.object_spin >= 0.0 && self.camera_turn >= 0.0) {
            return bad("rotation magnitudes must be non-negative".into());
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad(format!(
                "split ratio {} must lie in (0, 1)",
                self.split_ratio
            ));
        }
        Ok(())
    }
}

/// Keyframe times spanning `[1, frames]`, interior ones jittered around even spacing.
fn keyframe_times(rng: &mut ChaCha8Rng, count: usize, frames: u32) -> Vec<f64> {
    let span = frames as f64 - 1.0;
    (0..count)
        .map(|k| {
            let jitter = if k == 0 || k + 1 == count {
                0.0
            } else {
                rng.random_range(-0.3..0.3)
            };
            1.0 + span * (k as f64 + jitter) / (count - 1) as f64
        })
        .collect()
}

fn uniform(rng: &mut ChaCha8Rng, [a, b]: [f64; 2]) -> f64 {
    rng.random_range(a..=b)
}

/// A random world point inside the central part of the camera frustum.
fn sample_in_view(
    rng: &mut ChaCha8Rng,
    pose: &CameraPose,
    k: &CameraIntrinsics,
    depth: [f64; 2],
) -> Vector3<f64> {
    let (w, h) = (k.width() as f64, k.height() as f64);
    let px = PixelPos::new(
        rng.random_range(0.1 * w..0.9 * w),
        rng.random_range(0.1 * h..0.9 * h),
    );
    let z = uniform(rng, depth);
    pose.camera_to_world(&unproject(&px, z, k).expect("positive depth"))
}

fn camera_trajectory(seed: u64, p: &FlyingThingsParams) -> Result<Trajectory, SceneError> {
    let mut rng = stream_rng(seed, Stream::Rig);
    let count = if p.frames >= 3 { 3 } else { 2 };
    let times = keyframe_times(&mut rng, count, p.frames);
    let mut yaw: f64 = rng.random_range(-0.2..0.2);
    let mut pitch: f64 = rng.random_range(0.03..0.1);
    let mut center = Vector3::new(
        rng.random_range(-2.0..2.0),
        rng.random_range(-0.5..0.5),
        0.0,
    );
    let mut keys = Vec::with_capacity(count);
    for (i, &time) in times.iter().enumerate() {
        if i > 0 {
            let dt = time - times[i - 1];
            let heading = yaw + rng.random_range(-0.8..0.8);
            let dir =
                Vector3::new(heading.sin(), rng.random_range(-0.1..0.1), heading.cos()).normalize();
            center += dir * uniform(&mut rng, p.camera_speed) * dt;
            yaw += rng.random_range(-1.0..=1.0) * p.camera_turn;
            pitch = (pitch + rng.random_range(-0.5..=0.5) * p.camera_turn).clamp(0.0, 0.15);
        }
        let forward = Vector3::new(
            yaw.sin() * pitch.cos(),
            pitch.sin(),
            yaw.cos() * pitch.cos(),
        );
        let r = look_at(&center, &(center + forward), &Vector3::new(0.0, 1.0, 0.0));
        let pose = rigid_from_camera_to_world(r, center);
        keys.push(Keyframe {
            time,
            position: pose.position,
            rotation: pose.rotation,
        });
    }
    Trajectory::new(keys)
}

fn static_trajectory(
    position: Vector3<f64>,
    rotation: UnitQuaternion<f64>,
    frames: u32,
) -> Result<Trajectory, SceneError> {
    Trajectory::stationary(RigidPose { position, rotation }, 1.0, frames as f64)
}

fn textures_for(rng: &mut ChaCha8Rng, ids: &[String], slots: u16) -> Vec<String> {
    (0..slots).map(|_| pick(rng, ids).clone()).collect()
}

pub(crate) fn ground_and_shell(
    b: &mut SceneBuilder,
    rng: &mut ChaCha8Rng,
    textures: &[String],
    center_z: f64,
    frames: u32,
    with_shell: bool,
) -> Result<(ObjectInstance, Option<ObjectInstance>), SceneError> {
    let ground_mesh = ground_grid(16, 48.0);
    let ground = b.instance(
        ObjectRole::Ground,
        ground_mesh,
        textures_for(rng, textures, 1),
        Vector3::new(800.0, 1.0, 800.0),
        static_trajectory(
            Vector3::new(0.0, GROUND_Y, center_z),
            UnitQuaternion::identity(),
            frames,
        )?,
    )?;
    let shell = if with_shell {
        let mesh = cuboid();
        let tex = textures_for(rng, textures, mesh.material_count);
        let half = 400.0;
        Some(b.instance(
            ObjectRole::Shell,
            mesh,
            tex,
            Vector3::repeat(2.0 * half),
            // the bottom face sits slightly below the ground
            static_trajectory(
                Vector3::new(0.0, GROUND_Y + 1.0 - half, center_z),
                UnitQuaternion::identity(),
                frames,
            )?,
        )?)
    } else {
        None
    };
    Ok((ground, shell))
}

/// Keyframed random flight that stays visible at every keyframe.
fn foreground_trajectory(
    rng: &mut ChaCha8Rng,
    p: &FlyingThingsParams,
    rig: &Trajectory,
    k: &CameraIntrinsics,
) -> Result<Trajectory, SceneError> {
    let count = rng.random_range(3..=6usize);
    let times = keyframe_times(rng, count, p.frames);
    let depth_span = p.depth_range[1] - p.depth_range[0];
    let speed = uniform(rng, p.object_speed) * depth_span;
    let spin = rng.random_range(0.0..=p.object_spin);
    let spin_axis = random_unit_vector(rng);
    let mut rotation = random_rotation(rng, std::f64::consts::PI);
    let mut keys: Vec<Keyframe> = Vec::with_capacity(count);
    for (i, &time) in times.iter().enumerate() {
        let cam = pose_from_rigid(&rig.eval(time)?)?;
        let min_depth = 0.5 * p.depth_range[0];
        let position = if i == 0 {
            sample_in_view(rng, &cam, k, p.depth_range)
        } else {
            let prev = keys[i - 1].position;
            let dt = time - keys[i - 1].time;
            let step = speed * dt;
            let mut found = None;
            for _ in 0..32 {
                let candidate = prev + random_unit_vector(rng) * step;
                if visible_from(&candidate, &cam, k, min_depth) {
                    found = Some(candidate);
                    break;
                }
            }
            match found {
                Some(c) => c,
                None => {
                    let target = sample_in_view(rng, &cam, k, p.depth_range);
                    let toward =
                        prev + (target - prev).normalize() * step.min((target - prev).norm());
                    if visible_from(&toward, &cam, k, min_depth) {
                        toward
                    } else {
                        target
                    }
                }
            }
        };
        if i > 0 {
            let dt = time - keys[i - 1].time;
            let wobble = random_rotation(rng, 0.3 * spin * dt);
            rotation = wobble * UnitQuaternion::from_scaled_axis(spin_axis * spin * dt) * rotation;
        }
        keys.push(Keyframe {
            time,
            position,
            rotation,
        });
    }
    Trajectory::new(keys)
}

/// Builds a randomized scene from `seed` and `params` using assets from `pool`.
pub fn generate_flyingthings_scene(
    seed: u64,
    params: &FlyingThingsParams,
    pool: &AssetPool,
) -> Result<SceneSpec, SceneError> {
    params.validate()?;
    let k = params.camera.intrinsics()?;
    let mesh_ids = pool.mesh_ids(params.split, params.split_ratio);
    let texture_ids = pool.texture_ids(params.split, params.split_ratio);
    if mesh_ids.is_empty() {
        return Err(SceneError::EmptyAssetPool("meshes"));
    }
    if texture_ids.is_empty() {
        return Err(SceneError::EmptyAssetPool("textures"));
    }
    let rig_trajectory = camera_trajectory(seed, params)?;
    let rig = StereoRig::new(
        pose_from_rigid(&rig_trajectory.eval(1.0)?)?,
        params.camera.baseline,
        k,
    )?;
    let mut b = SceneBuilder::new(pool);

    let mut rng = stream_rng(seed, Stream::Ground);
    let (ground_plane, shell) = ground_and_shell(
        &mut b,
        &mut rng,
        &texture_ids,
        150.0,
        params.frames,
        params.shell,
    )?;

    let mut background_objects = Vec::with_capacity(params.n_background as usize);
    for i in 0..params.n_background {
        let mut rng = stream_rng(seed, Stream::Background(i));
        let mesh = if rng.random_bool(0.5) {
            cuboid()
        } else {
            cylinder(16, 1.0)
        };
        let scale = Vector3::new(
            rng.random_range(1.0..8.0),
            rng.random_range(1.0..12.0),
            rng.random_range(1.0..8.0),
        );
        let position = Vector3::new(
            rng.random_range(-60.0..60.0),
            GROUND_Y - 0.5 * scale.y,
            rng.random_range(30.0..120.0),
        );
        let rotation = UnitQuaternion::from_axis_angle(
            &Vector3::y_axis(),
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        let tex = textures_for(&mut rng, &texture_ids, mesh.material_count);
        background_objects.push(b.instance(
            ObjectRole::Background,
            mesh,
            tex,
            scale,
            static_trajectory(position, rotation, params.frames)?,
        )?);
    }

    let mut layout = stream_rng(seed, Stream::Layout);
    let n_objects = layout.random_range(params.n_objects[0]..=params.n_objects[1]);
    let mut objects = Vec::with_capacity(n_objects as usize);
    for i in 0..n_objects {
        let mut rng = stream_rng(seed, Stream::Foreground(i));
        let mesh = b.pool_mesh(pick(&mut rng, &mesh_ids))?;
        let base = rng.random_range(1.0..3.5);
        let scale = Vector3::new(
            base * rng.random_range(0.6..1.4),
            base * rng.random_range(0.6..1.4),
            base * rng.random_range(0.6..1.4),
        );
        let tex = textures_for(&mut rng, &texture_ids, mesh.material_count);
        let trajectory = foreground_trajectory(&mut rng, params, &rig_trajectory, &k)?;
        objects.push(b.instance(ObjectRole::Foreground, mesh, tex, scale, trajectory)?);
    }

    let spec = SceneSpec {
        name: format!("flyingthings_{seed}"),
        seed,
        frames: params.frames,
        params: GenerationParams::Flyingthings(params.clone()),
        rig,
        rig_trajectory,
        depth_scale: params.depth_range[1],
        meshes: b.meshes,
        textures: b.textures,
        ground_plane,
        shell,
        background_objects,
        objects,
    };
    spec.validate()?;
    Ok(spec)
}
