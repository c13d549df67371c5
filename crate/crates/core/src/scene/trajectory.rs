//! Keyframed rigid trajectories: Catmull-Rom (Hermite with finite-difference
//! tangents) for position, spherical-linear interpolation for rotation.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::SceneError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    pub time: f64,
    pub position: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

/// Position and orientation of a rigid body (body → world).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    pub position: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    keyframes: Vec<Keyframe>,
}

impl Trajectory {
    /// Keyframe times must be finite and strictly increasing; at least two keyframes.
    pub fn new(keyframes: Vec<Keyframe>) -> Result<Self, SceneError> {
        if keyframes.len() < 2 {
            return Err(SceneError::Trajectory(format!(
                "need at least 2 keyframes, got {}",
                keyframes.len()
            )));
        }
        if keyframes
            .iter()
            .any(|k| !k.time.is_finite() || k.position.iter().any(|v| !v.is_finite()))
        {
            return Err(SceneError::Trajectory("keyframes must be finite".into()));
        }
        if keyframes.windows(2).any(|w| !(w[0].time < w[1].time)) {
            return Err(SceneError::Trajectory(
                "keyframe times must be strictly increasing".into(),
            ));
        }
        Ok(Self { keyframes })
    }

    /// A single pose repeated at both ends of `[start, end]`.
    pub fn stationary(pose: RigidPose, start: f64, end: f64) -> Result<Self, SceneError> {
        let key = |time| Keyframe {
            time,
            position: pose.position,
            rotation: pose.rotation,
        };
        Self::new(vec![key(start), key(end)])
    }

    pub fn keyframes(&self) -> &[Keyframe] {
        &self.keyframes
    }

    pub fn start(&self) -> f64 {
        self.keyframes[0].time
    }

    pub fn end(&self) -> f64 {
        self.keyframes[self.keyframes.len() - 1].time
    }

    pub fn is_stationary(&self) -> bool {
        let k0 = &self.keyframes[0];
        self.keyframes
            .iter()
            .all(|k| k.position == k0.position && k.rotation == k0.rotation)
    }

    fn tangent(&self, i: usize) -> Vector3<f64> {
        let k = &self.keyframes;
        let (a, b) = match i {
            0 => (0, 1),
            i if i == k.len() - 1 => (i - 1, i),
            i => (i - 1, i + 1),
        };
        (k[b].position - k[a].position) / (k[b].time - k[a].time)
    }

    pub fn eval(&self, t: f64) -> Result<RigidPose, SceneError> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(SceneError::TimeOutOfRange {
                time: t,
                start: self.start(),
                end: self.end(),
            });
        }
        if let Some(k) = self.keyframes.iter().find(|k| k.time == t) {
            return Ok(RigidPose {
                position: k.position,
                rotation: k.rotation,
            });
        }
        let i = self
            .keyframes
            .windows(2)
            .position(|w| t > w[0].time && t < w[1].time)
            .expect("time inside domain and not on a keyframe");
        let (k0, k1) = (&self.keyframes[i], &self.keyframes[i + 1]);
        let dt = k1.time - k0.time;
        let s = (t - k0.time) / dt;
        let (s2, s3) = (s * s, s * s * s);
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        // h00 = 1 - h01, written so that equal keyframes stay bit-identical
        let position = k0.position
            + (k1.position - k0.position) * h01
            + self.tangent(i) * (h10 * dt)
            + self.tangent(i + 1) * (h11 * dt);
        let rotation = k0
            .rotation
            .try_slerp(&k1.rotation, s, 1e-12)
            .unwrap_or(k0.rotation);
        Ok(RigidPose { position, rotation })
    }
}
