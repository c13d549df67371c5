//! Street-level preset: a forward-driving rig in the right lane, oncoming box
//! cars in the left lane, parked cars and buildings along the road.

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::assets::AssetPool;
use super::flyingthings::{ground_and_shell, GROUND_Y};
use super::mesh::{box_car, cuboid};
use super::rng::{stream_rng, Stream};
use super::{
    pick, pose_from_rigid, rigid_from_camera_to_world, CameraConfig, GenerationParams, Keyframe,
    ObjectRole, RigidPose, SceneBuilder, SceneError, SceneSpec, Trajectory,
};
use crate::geometry::{look_at, StereoRig};

/// Focal lengths of the two camera variants, mm.
pub const DRIVING_FOCAL_LENGTHS: [f64; 2] = [35.0, 15.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrivingParams {
    pub camera: CameraConfig,
    pub frames: u32,
    /// Inclusive range of the oncoming car count.
    pub n_oncoming: [u32; 2],
    pub n_parked: u32,
    pub n_buildings: u32,
    /// Rig displacement per frame along the road.
    pub camera_speed: f64,
    /// Oncoming car speed range per frame.
    pub car_speed: [f64; 2],
    /// Lateral offset of each lane center from the road axis.
    pub lane_offset: f64,
    pub camera_height: f64,
}

impl Default for DrivingParams {
    fn default() -> Self {
        Self {
            camera: CameraConfig::default(),
            frames: 10,
            n_oncoming: [2, 6],
            n_parked: 20,
            n_buildings: 40,
            camera_speed: 0.8,
            car_speed: [0.4, 1.2],
            lane_offset: 1.8,
            camera_height: 1.6,
        }
    }
}

impl DrivingParams {
    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: String| Err(SceneError::Config(m));
        if !DRIVING_FOCAL_LENGTHS.contains(&self.camera.focal_mm) {
            return bad(format!(
                "driving focal length must be 35 or 15 mm, got {}",
                self.camera.focal_mm
            ));
        }
        if self.frames < 2 {
            return bad(format!("{} frames; at least 2 required", self.frames));
        }
        let [lo, hi] = self.n_oncoming;
        if lo > hi || hi > 100 {
            return bad(format!("oncoming car range {lo}..={hi} is invalid"));
        }
        let [a, b] = self.car_speed;
        if !(a >= 0.0
            && a <= b
            && b.is_finite()
            && self.camera_speed >= 0.0
            && self.camera_speed.is_finite())
        {
            return bad("speeds must be finite, non-negative and ordered".into());
        }
        if !(self.lane_offset > 0.0 && self.camera_height > 0.0 && self.camera_height < GROUND_Y) {
            return bad("lane offset and camera height must be positive".into());
        }
        Ok(())
    }
}

fn key_times(frames: u32) -> Vec<f64> {
    if frames >= 3 {
        vec![1.0, (1.0 + frames as f64) * 0.5, frames as f64]
    } else {
        vec![1.0, frames as f64]
    }
}

fn linear_trajectory(
    times: &[f64],
    at: impl Fn(f64) -> RigidPose,
) -> Result<Trajectory, SceneError> {
    Trajectory::new(
        times
            .iter()
            .map(|&time| {
                let p = at(time);
                Keyframe {
                    time,
                    position: p.position,
                    rotation: p.rotation,
                }
            })
            .collect(),
    )
}

/// Builds the driving scene for `seed`.
pub fn generate_driving_preset(
    seed: u64,
    params: &DrivingParams,
    pool: &AssetPool,
) -> Result<SceneSpec, SceneError> {
    params.validate()?;
    let k = params.camera.intrinsics()?;
    let texture_ids: Vec<String> = pool.textures.keys().cloned().collect();
    if texture_ids.is_empty() {
        return Err(SceneError::EmptyAssetPool("textures"));
    }
    let frames = params.frames;
    let times = key_times(frames);
    let travel = params.camera_speed * (frames as f64 - 1.0);

    let mut rng = stream_rng(seed, Stream::Rig);
    let pitch: f64 = rng.random_range(0.0..0.03);
    let eye_y = GROUND_Y - params.camera_height;
    let lane = params.lane_offset;
    let rig_trajectory = linear_trajectory(&times, |t| {
        let center = Vector3::new(lane, eye_y, params.camera_speed * (t - 1.0));
        let forward = Vector3::new(0.0, pitch.sin(), pitch.cos());
        rigid_from_camera_to_world(
            look_at(&center, &(center + forward), &Vector3::new(0.0, 1.0, 0.0)),
            center,
        )
    })?;
    let rig = StereoRig::new(
        pose_from_rigid(&rig_trajectory.eval(1.0)?)?,
        params.camera.baseline,
        k,
    )?;
    let mut b = SceneBuilder::new(pool);

    let mut rng = stream_rng(seed, Stream::Ground);
    let (ground_plane, shell) =
        ground_and_shell(&mut b, &mut rng, &texture_ids, 0.5 * travel, frames, true)?;

    let car_scale = |rng: &mut rand_chacha::ChaCha8Rng| {
        Vector3::new(
            rng.random_range(1.6..2.0),
            rng.random_range(1.3..1.7),
            rng.random_range(3.8..4.8),
        )
    };
    let mut background_objects = Vec::new();
    for i in 0..params.n_parked {
        let mut rng = stream_rng(seed, Stream::Background(i));
        let mesh = box_car();
        let scale = car_scale(&mut rng);
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let position = Vector3::new(
            side * (lane + 2.6 + rng.random_range(0.0..0.4)),
            GROUND_Y - 0.5 * scale.y,
            rng.random_range(5.0..travel + 120.0),
        );
        let rotation =
            UnitQuaternion::from_axis_angle(&Vector3::y_axis(), rng.random_range(-0.05..0.05));
        let tex = (0..mesh.material_count)
            .map(|_| pick(&mut rng, &texture_ids).clone())
            .collect();
        let traj = Trajectory::stationary(RigidPose { position, rotation }, 1.0, frames as f64)?;
        background_objects.push(b.instance(ObjectRole::Background, mesh, tex, scale, traj)?);
    }
    for i in 0..params.n_buildings {
        let mut rng = stream_rng(seed, Stream::Background(params.n_parked + i));
        let mesh = cuboid();
        let scale = Vector3::new(
            rng.random_range(6.0..14.0),
            rng.random_range(6.0..20.0),
            rng.random_range(8.0..25.0),
        );
        let side = if i % 2 == 0 { 1.0 } else { -1.0 };
        let position = Vector3::new(
            side * (lane + 7.0 + 0.5 * scale.x + rng.random_range(0.0..3.0)),
            GROUND_Y - 0.5 * scale.y,
            rng.random_range(-10.0..travel + 200.0),
        );
        let tex = (0..mesh.material_count)
            .map(|_| pick(&mut rng, &texture_ids).clone())
            .collect();
        let traj = Trajectory::stationary(
            RigidPose {
                position,
                rotation: UnitQuaternion::identity(),
            },
            1.0,
            frames as f64,
        )?;
        background_objects.push(b.instance(ObjectRole::Background, mesh, tex, scale, traj)?);
    }

    let mut layout = stream_rng(seed, Stream::Layout);
    let n_cars = layout.random_range(params.n_oncoming[0]..=params.n_oncoming[1]);
    let mut objects = Vec::new();
    for i in 0..n_cars {
        let mut rng = stream_rng(seed, Stream::Vehicle(i));
        let mesh = box_car();
        let scale = car_scale(&mut rng);
        let speed = rng.random_range(params.car_speed[0]..=params.car_speed[1]);
        let x = -lane + rng.random_range(-0.2..0.2);
        // still at least 12 units ahead of the rig at the last frame
        let closing = (speed + params.camera_speed) * (frames as f64 - 1.0);
        let z0 = 12.0 + closing + rng.random_range(0.0..40.0);
        let y = GROUND_Y - 0.5 * scale.y;
        let rotation = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), std::f64::consts::PI);
        let traj = linear_trajectory(&times, |t| RigidPose {
            position: Vector3::new(x, y, z0 - speed * (t - 1.0)),
            rotation,
        })?;
        let tex = (0..mesh.material_count)
            .map(|_| pick(&mut rng, &texture_ids).clone())
            .collect();
        objects.push(b.instance(ObjectRole::Foreground, mesh, tex, scale, traj)?);
    }

    let spec = SceneSpec {
        name: format!("driving_{seed}"),
        seed,
        frames,
        params: GenerationParams::Driving(params.clone()),
        rig,
        rig_trajectory,
        depth_scale: 60.0,
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
