//! Scene-flow ground truth derived from rendered passes: optical flow in both
//! directions, disparity, disparity change, motion boundaries, occlusion, and
//! 3D motion reconstructed from those components.

use nalgebra::Vector3;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{unproject, CameraIntrinsics, CameraPose, PixelPos, Point3, StereoRig, View};
use crate::raster::{bilinear_taps, Mask, Raster, ScalarMap};
use crate::render::FramePasses;

#[derive(Debug, Error, PartialEq)]
pub enum GroundTruthError {
    #[error("non-positive depth {depth} at covered pixel ({x}, {y})")]
    DataCorruption { x: usize, y: usize, depth: f32 },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn tag(self) -> &'static str {
        match self {
            Direction::Forward => "fwd",
            Direction::Backward => "bwd",
        }
    }

    fn pass(self, passes: &FramePasses) -> Option<&ScalarMap> {
        match self {
            Direction::Forward => passes.pos3d_next.as_ref(),
            Direction::Backward => passes.pos3d_prev.as_ref(),
        }
    }
}

/// Motion-boundary thresholds: minimum flow difference across an object edge
/// and minimum 8-connected component size, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryParams {
    pub min_flow_difference: f64,
    pub min_area: usize,
}

impl Default for BoundaryParams {
    fn default() -> Self {
        Self {
            min_flow_difference: 1.5,
            min_area: 10,
        }
    }
}

/// Complete ground truth for one frame and view. Direction-dependent maps are
/// absent at the first (backward) or last (forward) frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthFrame {
    pub view: View,
    pub frame: u32,
    pub flow_fwd: Option<Raster<f32>>,
    pub flow_bwd: Option<Raster<f32>>,
    pub disparity: ScalarMap,
    pub dispchange_fwd: Option<ScalarMap>,
    pub dispchange_bwd: Option<ScalarMap>,
    pub motion_boundaries: Option<Mask>,
    pub occlusion_fwd: Option<Mask>,
    pub occlusion_bwd: Option<Mask>,
    pub valid: Mask,
}

fn point(map: &ScalarMap, i: usize) -> Point3 {
    let p = &map.data()[i * 3..i * 3 + 3];
    Point3::new(p[0] as f64, p[1] as f64, p[2] as f64)
}

/// Pinhole projection as `f64`; callers guarantee `z > 0`.
fn project_raw(p: &Point3, k: &CameraIntrinsics) -> PixelPos {
    let f = k.focal_px();
    let c = k.principal_point();
    PixelPos::new(f * p.x / p.z + c.x, f * p.y / p.z + c.y)
}

pub fn valid_mask(passes: &FramePasses) -> Mask {
    passes.object_index.map(|i| i != 0)
}

/// `b · f / depth` at covered pixels, NaN at void pixels.
pub fn derive_disparity(
    passes: &FramePasses,
    rig: &StereoRig,
) -> Result<ScalarMap, GroundTruthError> {
    let bf = rig.baseline_focal();
    let w = passes.width();
    let mut out = ScalarMap::filled(w, passes.height(), 1, f32::NAN);
    for (i, (&z, &obj)) in passes
        .depth
        .data()
        .iter()
        .zip(passes.object_index.data())
        .enumerate()
    {
        if obj == 0 {
            continue;
        }
        if !(z > 0.0) {
            return Err(GroundTruthError::DataCorruption {
                x: i % w,
                y: i / w,
                depth: z,
            });
        }
        out.data_mut()[i] = (bf / z as f64) as f32;
    }
    Ok(out)
}

/// `project(pos3d_{t±1}) − project(pos3d_t)`; `None` at a sequence boundary.
///
/// Points that fall behind the camera in the other frame have no image
/// position there and get NaN.
pub fn derive_flow(
    passes: &FramePasses,
    direction: Direction,
    k: &CameraIntrinsics,
) -> Option<Raster<f32>> {
    let other = direction.pass(passes)?;
    let (w, h) = (passes.width(), passes.height());
    let mut out = Raster::filled(w, h, 2, f32::NAN);
    out.data_mut()
        .par_chunks_mut(2 * w)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                let i = y * w + x;
                if passes.object_index.data()[i] == 0 {
                    continue;
                }
                let (p, q) = (point(&passes.pos3d_t, i), point(other, i));
                if !(q.z > 0.0) {
                    continue;
                }
                let d = project_raw(&q, k) - project_raw(&p, k);
                row[2 * x] = d.x as f32;
                row[2 * x + 1] = d.y as f32;
            }
        });
    Some(out)
}

/// `b·f / Z_{t±1} − b·f / Z_t`, positive for approaching surfaces; `None` at a sequence boundary.
pub fn derive_disparity_change(
    passes: &FramePasses,
    rig: &StereoRig,
    direction: Direction,
) -> Option<ScalarMap> {
    let other = direction.pass(passes)?;
    let bf = rig.baseline_focal();
    let mut out = ScalarMap::filled(passes.width(), passes.height(), 1, f32::NAN);
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        if passes.object_index.data()[i] == 0 {
            continue;
        }
        let (z, z_other) = (
            passes.depth.data()[i] as f64,
            other.data()[i * 3 + 2] as f64,
        );
        if z_other > 0.0 {
            *v = (bf / z_other - bf / z) as f32;
        }
    }
    Some(out)
}

/// Marks both pixels of every 4-neighbour pair that lies on different objects
/// and whose flow differs by at least the threshold, then removes 8-connected
/// components smaller than the minimum area.
pub fn derive_motion_boundaries(
    object_index: &Raster<u16>,
    flow: &Raster<f32>,
    params: &BoundaryParams,
) -> Result<Mask, GroundTruthError> {
    if !object_index.same_size(flow) || flow.channels() != 2 {
        return Err(GroundTruthError::Shape(
            "object index and flow sizes differ".into(),
        ));
    }
    let (w, h) = (object_index.width(), object_index.height());
    let mut marked = Mask::filled(w, h, 1, false);
    let flow_at = |x: usize, y: usize| {
        let f = flow.pixel(x, y);
        (f[0] as f64, f[1] as f64)
    };
    for y in 0..h {
        for x in 0..w {
            for (nx, ny) in [(x + 1, y), (x, y + 1)] {
                if nx >= w || ny >= h {
                    continue;
                }
                let (a, b) = (object_index.get(x, y, 0), object_index.get(nx, ny, 0));
                if a == b {
                    continue;
                }
                let (fa, fb) = (flow_at(x, y), flow_at(nx, ny));
                let diff = ((fa.0 - fb.0).powi(2) + (fa.1 - fb.1).powi(2)).sqrt();
                if diff >= params.min_flow_difference {
                    marked.set(x, y, 0, true);
                    marked.set(nx, ny, 0, true);
                }
            }
        }
    }
    Ok(remove_small_components(&marked, params.min_area))
}

/// Drops 8-connected components of `true` pixels with fewer than `min_area` pixels.
pub fn remove_small_components(mask: &Mask, min_area: usize) -> Mask {
    let (w, h) = (mask.width(), mask.height());
    let mut out = mask.clone();
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut component = Vec::new();
    for start in 0..w * h {
        if seen[start] || !mask.data()[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        component.clear();
        while let Some(i) = stack.pop() {
            component.push(i);
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] && mask.data()[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if component.len() < min_area {
            for &i in &component {
                out.data_mut()[i] = false;
            }
        }
    }
    out
}

/// Pixels of `passes` that are not visible in `other` (the frame in `direction`).
///
/// A covered pixel is occluded when its point is behind the camera or outside
/// the image in the other frame, when any bilinear tap there is void or shows
/// a different object, or when the interpolated depth there is nearer than the
/// point's depth by more than `epsilon`. `None` at a sequence boundary.
pub fn compute_occlusion_mask(
    passes: &FramePasses,
    other: &FramePasses,
    direction: Direction,
    k: &CameraIntrinsics,
    epsilon: f64,
) -> Result<Option<Mask>, GroundTruthError> {
    let Some(moved) = direction.pass(passes) else {
        return Ok(None);
    };
    if passes.width() != other.width() || passes.height() != other.height() {
        return Err(GroundTruthError::Shape("frames differ in size".into()));
    }
    let (w, h) = (passes.width(), passes.height());
    let mut out = Mask::filled(w, h, 1, false);
    out.data_mut()
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, occluded) in row.iter_mut().enumerate() {
                let i = y * w + x;
                let obj = passes.object_index.data()[i];
                if obj == 0 {
                    continue;
                }
                let q = point(moved, i);
                if !(q.z > 0.0) {
                    *occluded = true;
                    continue;
                }
                let px = project_raw(&q, k);
                if !(px.x >= 0.0 && px.y >= 0.0 && px.x < w as f64 && px.y < h as f64) {
                    *occluded = true;
                    continue;
                }
                let mut depth = 0.0;
                let mut mismatch = false;
                for (tx, ty, wt) in bilinear_taps(w, h, px.x, px.y) {
                    if wt == 0.0 {
                        continue;
                    }
                    if other.object_index.get(tx, ty, 0) != obj {
                        mismatch = true;
                        break;
                    }
                    depth += wt * other.depth.get(tx, ty, 0) as f64;
                }
                *occluded = mismatch || depth < q.z - epsilon;
            }
        });
    Ok(Some(out))
}

/// Derives every ground-truth map of `cur`. `prev` and `next` are the same
/// view at the neighbouring frames; they are needed for the occlusion masks.
pub fn derive_groundtruth(
    prev: Option<&FramePasses>,
    cur: &FramePasses,
    next: Option<&FramePasses>,
    rig: &StereoRig,
    occlusion_epsilon: f64,
    boundaries: &BoundaryParams,
) -> Result<GroundTruthFrame, GroundTruthError> {
    let k = &rig.intrinsics;
    let flow_fwd = derive_flow(cur, Direction::Forward, k);
    let motion_boundaries = flow_fwd
        .as_ref()
        .map(|f| derive_motion_boundaries(&cur.object_index, f, boundaries))
        .transpose()?;
    let occlusion = |other: Option<&FramePasses>, dir| match other {
        Some(o) => compute_occlusion_mask(cur, o, dir, k, occlusion_epsilon),
        None => Ok(None),
    };
    Ok(GroundTruthFrame {
        view: cur.view,
        frame: cur.frame,
        flow_bwd: derive_flow(cur, Direction::Backward, k),
        disparity: derive_disparity(cur, rig)?,
        dispchange_fwd: derive_disparity_change(cur, rig, Direction::Forward),
        dispchange_bwd: derive_disparity_change(cur, rig, Direction::Backward),
        motion_boundaries,
        occlusion_fwd: occlusion(next, Direction::Forward)?,
        occlusion_bwd: occlusion(prev, Direction::Backward)?,
        valid: valid_mask(cur),
        flow_fwd,
    })
}

/// A surface point at `t` and its motion to the other frame, both in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneFlowVector {
    pub position: Point3,
    pub motion: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ComponentError {
    #[error("no ground truth at this pixel")]
    Missing,
    #[error("disparity is not positive")]
    Disparity,
    #[error("disparity plus disparity change is not positive")]
    TargetDisparity,
}

/// Per-pixel scene flow, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFlowMap {
    pub width: usize,
    pub height: usize,
    pub vectors: Vec<Result<SceneFlowVector, ComponentError>>,
}

impl SceneFlowMap {
    pub fn get(&self, x: usize, y: usize) -> &Result<SceneFlowVector, ComponentError> {
        &self.vectors[y * self.width + x]
    }
}

/// Recovers 3D points and motion from flow, disparity and disparity change.
///
/// `pose_t` is the camera at `t` and `pose_other` the camera at the frame the
/// flow points to; both must belong to the view the maps were derived for.
pub fn reconstruct_scene_flow(
    flow: &Raster<f32>,
    disparity: &ScalarMap,
    dispchange: &ScalarMap,
    rig: &StereoRig,
    pose_t: &CameraPose,
    pose_other: &CameraPose,
) -> Result<SceneFlowMap, GroundTruthError> {
    if !flow.same_size(disparity) || !flow.same_size(dispchange) || flow.channels() != 2 {
        return Err(GroundTruthError::Shape(
            "flow, disparity and disparity change sizes differ".into(),
        ));
    }
    let (w, h) = (flow.width(), flow.height());
    let k = &rig.intrinsics;
    let bf = rig.baseline_focal();
    let vectors = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let d = disparity.data()[i] as f64;
            let dd = dispchange.data()[i] as f64;
            let (fu, fv) = (flow.data()[2 * i] as f64, flow.data()[2 * i + 1] as f64);
            if [d, dd, fu, fv].iter().any(|v| v.is_nan()) {
                return Err(ComponentError::Missing);
            }
            if !(d > 0.0) {
                return Err(ComponentError::Disparity);
            }
            if !(d + dd > 0.0) {
                return Err(ComponentError::TargetDisparity);
            }
            let px = PixelPos::new(x as f64 + 0.5, y as f64 + 0.5);
            let p = unproject(&px, bf / d, k).map_err(|_| ComponentError::Disparity)?;
            let q = unproject(&(px + PixelPos::new(fu, fv)), bf / (d + dd), k)
                .map_err(|_| ComponentError::TargetDisparity)?;
            let position = pose_t.camera_to_world(&p);
            Ok(SceneFlowVector {
                position,
                motion: pose_other.camera_to_world(&q) - position,
            })
        })
        .collect();
    Ok(SceneFlowMap {
        width: w,
        height: h,
        vectors,
    })
}

/// World-frame motion of each covered pixel's surface point as stored by the
/// renderer: `pos3d_{t±1}` and `pos3d_t` mapped through their cameras.
pub fn renderer_motion(
    passes: &FramePasses,
    direction: Direction,
    pose_t: &CameraPose,
    pose_other: &CameraPose,
) -> Option<Vec<Option<Vector3<f64>>>> {
    let other = direction.pass(passes)?;
    Some(
        (0..passes.width() * passes.height())
            .map(|i| {
                (passes.object_index.data()[i] != 0).then(|| {
                    pose_other.camera_to_world(&point(other, i))
                        - pose_t.camera_to_world(&point(&passes.pos3d_t, i))
                })
            })
            .collect(),
    )
}
