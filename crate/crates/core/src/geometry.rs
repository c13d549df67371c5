//! Pinhole cameras and the rectified stereo rig.
//!
//! Conventions used throughout the crate: camera coordinates have +X right,
//! +Y down and +Z forward; pixel `(i, j)` covers `[i, i+1) × [j, j+1)` with
//! its center at `(i + 0.5, j + 0.5)`, origin at the top-left corner.
//! Disparity is positive; a left-view pixel at `u` matches the right view at
//! `u - d`.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A 3-vector in camera (or world) coordinates.
pub type Point3 = Vector3<f64>;
/// Continuous pixel position `(u, v)`.
pub type PixelPos = Vector2<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point is behind the camera (Z = {0})")]
    BehindCamera(f64),
    #[error("invalid depth {0}: depth must be positive")]
    InvalidDepth(f64),
    #[error("invalid disparity {0}: disparity must be positive")]
    InvalidDisparity(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("rotation is not orthonormal (max |RᵀR - I| = {0:e}, det = {1})")]
    NotOrthonormal(f64, f64),
    #[error("stereo baseline must be positive, got {0}")]
    InvalidBaseline(f64),
}

/// Sensor-derived intrinsics shared by both views of the rig.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntrinsicsRecord", into = "IntrinsicsRecord")]
pub struct CameraIntrinsics {
    focal_px: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
    sensor_width_mm: f64,
    focal_mm: f64,
}

/// On-disk form: focal length and sensor in millimetres, size and principal point in pixels.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntrinsicsRecord {
    focal_mm: f64,
    sensor_width_mm: f64,
    width: u32,
    height: u32,
    cx: f64,
    cy: f64,
}

impl TryFrom<IntrinsicsRecord> for CameraIntrinsics {
    type Error = GeometryError;

    fn try_from(r: IntrinsicsRecord) -> Result<Self, Self::Error> {
        CameraIntrinsics::with_principal_point(
            r.focal_mm,
            r.sensor_width_mm,
            r.width,
            r.height,
            r.cx,
            r.cy,
        )
    }
}

impl From<CameraIntrinsics> for IntrinsicsRecord {
    fn from(k: CameraIntrinsics) -> Self {
        IntrinsicsRecord {
            focal_mm: k.focal_mm,
            sensor_width_mm: k.sensor_width_mm,
            width: k.width,
            height: k.height,
            cx: k.cx,
            cy: k.cy,
        }
    }
}

impl CameraIntrinsics {
    /// Intrinsics with the principal point at the image center.
    pub fn new(
        focal_mm: f64,
        sensor_width_mm: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        Self::with_principal_point(
            focal_mm,
            sensor_width_mm,
            width,
            height,
            width as f64 / 2.0,
            height as f64 / 2.0,
        )
    }

    pub fn with_principal_point(
        focal_mm: f64,
        sensor_width_mm: f64,
        width: u32,
        height: u32,
        cx: f64,
        cy: f64,
    ) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "image size {width}x{height} must be non-zero"
            )));
        }
        if !(focal_mm > 0.0 && focal_mm.is_finite())
            || !(sensor_width_mm > 0.0 && sensor_width_mm.is_finite())
        {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal length {focal_mm}mm and sensor width {sensor_width_mm}mm must be positive"
            )));
        }
        if !cx.is_finite() || !cy.is_finite() {
            return Err(GeometryError::InvalidIntrinsics(
                "principal point must be finite".into(),
            ));
        }
        Ok(Self {
            focal_px: focal_mm / sensor_width_mm * width as f64,
            cx,
            cy,
            width,
            height,
            sensor_width_mm,
            focal_mm,
        })
    }

    pub fn focal_px(&self) -> f64 {
        self.focal_px
    }

    pub fn principal_point(&self) -> PixelPos {
        PixelPos::new(self.cx, self.cy)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn focal_mm(&self) -> f64 {
        self.focal_mm
    }

    pub fn sensor_width_mm(&self) -> f64 {
        self.sensor_width_mm
    }

    /// The 3×3 calibration matrix `K`.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.focal_px,
            0.0,
            self.cx, //
            0.0,
            self.focal_px,
            self.cy, //
            0.0,
            0.0,
            1.0,
        )
    }

    /// True when a continuous pixel position lies inside the image rectangle.
    pub fn contains(&self, px: &PixelPos) -> bool {
        px.x >= 0.0 && px.y >= 0.0 && px.x < self.width as f64 && px.y < self.height as f64
    }
}

/// Rigid world→camera transform: `p_cam = rotation · p_world + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRecord", into = "PoseRecord")]
pub struct CameraPose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRecord {
    /// Row-major world→camera rotation.
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl TryFrom<PoseRecord> for CameraPose {
    type Error = GeometryError;

    fn try_from(r: PoseRecord) -> Result<Self, Self::Error> {
        CameraPose::new(
            Matrix3::from_row_slice(&r.rotation),
            Vector3::from_column_slice(&r.translation),
        )
    }
}

impl From<CameraPose> for PoseRecord {
    fn from(p: CameraPose) -> Self {
        let r = &p.rotation;
        PoseRecord {
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)], //
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)], //
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            translation: [p.translation.x, p.translation.y, p.translation.z],
        }
    }
}

const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

impl CameraPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let dev = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if !(dev < ORTHONORMAL_TOLERANCE) || det <= 0.0 {
            return Err(GeometryError::NotOrthonormal(dev, det));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds the pose of a camera whose axes (in world coordinates) are the
    /// columns of `camera_to_world` and whose optical center is `center`.
    pub fn from_camera_to_world(
        camera_to_world: Matrix3<f64>,
        center: Point3,
    ) -> Result<Self, GeometryError> {
        let rotation = camera_to_world.transpose();
        let translation = -(rotation * center);
        Self::new(rotation, translation)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Optical center in world coordinates.
    pub fn center(&self) -> Point3 {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn world_to_camera(&self, p: &Point3) -> Point3 {
        self.rotation * p + self.translation
    }

    pub fn camera_to_world(&self, p: &Point3) -> Point3 {
        self.rotation.transpose() * (p - self.translation)
    }

    /// The 3×4 extrinsics matrix `[R | t]`, row-major.
    pub fn extrinsics_row_major(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x, //
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y, //
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
        ]
    }

    /// The same camera moved by `offset` along its own axes.
    pub fn offset_in_camera_frame(&self, offset: &Vector3<f64>) -> Self {
        Self {
            rotation: self.rotation,
            translation: self.translation - offset,
        }
    }
}

/// Which camera of the rig.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum View {
    Left,
    Right,
}

impl View {
    pub const BOTH: [View; 2] = [View::Left, View::Right];

    /// Single-letter tag used in file names.
    pub fn tag(self) -> &'static str {
        match self {
            View::Left => "L",
            View::Right => "R",
        }
    }
}

/// Rectified rig: the right camera is the left camera translated by
/// `baseline` along the left camera's +X axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StereoRig {
    pub left: CameraPose,
    pub baseline: f64,
    pub intrinsics: CameraIntrinsics,
}

impl StereoRig {
    pub fn new(
        left: CameraPose,
        baseline: f64,
        intrinsics: CameraIntrinsics,
    ) -> Result<Self, GeometryError> {
        if !(baseline > 0.0 && baseline.is_finite()) {
            return Err(GeometryError::InvalidBaseline(baseline));
        }
        Ok(Self {
            left,
            baseline,
            intrinsics,
        })
    }

    pub fn right(&self) -> CameraPose {
        self.left
            .offset_in_camera_frame(&Vector3::new(self.baseline, 0.0, 0.0))
    }

    pub fn pose(&self, view: View) -> CameraPose {
        match view {
            View::Left => self.left,
            View::Right => self.right(),
        }
    }

    pub fn with_left(&self, left: CameraPose) -> Self {
        Self { left, ..*self }
    }

    /// `b · f` in pixel-world units; disparity is this divided by depth.
    pub fn baseline_focal(&self) -> f64 {
        self.baseline * self.intrinsics.focal_px()
    }
}

pub fn project(p: &Point3, k: &CameraIntrinsics) -> Result<PixelPos, GeometryError> {
    if !(p.z > 0.0) {
        return Err(GeometryError::BehindCamera(p.z));
    }
    let f = k.focal_px();
    Ok(PixelPos::new(f * p.x / p.z + k.cx, f * p.y / p.z + k.cy))
}

pub fn unproject(px: &PixelPos, depth: f64, k: &CameraIntrinsics) -> Result<Point3, GeometryError> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(GeometryError::InvalidDepth(depth));
    }
    let f = k.focal_px();
    Ok(Point3::new(
        (px.x - k.cx) * depth / f,
        (px.y - k.cy) * depth / f,
        depth,
    ))
}

pub fn depth_to_disparity(depth: f64, rig: &StereoRig) -> Result<f64, GeometryError> {
    if !(depth > 0.0) {
        return Err(GeometryError::InvalidDepth(depth));
    }
    Ok(rig.baseline_focal() / depth)
}

pub fn disparity_to_depth(disparity: f64, rig: &StereoRig) -> Result<f64, GeometryError> {
    if !(disparity > 0.0) {
        return Err(GeometryError::InvalidDisparity(disparity));
    }
    Ok(rig.baseline_focal() / disparity)
}

/// Re-expresses a point given in camera `a`'s frame in camera `b`'s frame.
pub fn transform_point(p: &Point3, a: &CameraPose, b: &CameraPose) -> Point3 {
    b.world_to_camera(&a.camera_to_world(p))
}

/// Camera-to-world rotation for a camera at `eye` looking at `target`, with
/// image rows running along `down` (+Y of the camera).
pub fn look_at(eye: &Point3, target: &Point3, down: &Vector3<f64>) -> Matrix3<f64> {
    let forward = (target - eye).normalize();
    let right = down.cross(&forward).normalize();
    let down = forward.cross(&right);
    Matrix3::from_columns(&[right, down, forward])
}
