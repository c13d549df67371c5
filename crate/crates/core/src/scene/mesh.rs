//! Triangle meshes: built-in primitives and Wavefront OBJ ingestion.

use std::collections::HashMap;
use std::f64::consts::TAU;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::SceneError;

/// Minimum triangle area (object units, after scaling) for a valid mesh.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mesh {
    pub asset_id: String,
    pub vertices: Vec<Vector3<f64>>,
    pub uv: Vec<Vector2<f64>>,
    pub triangles: Vec<[u32; 3]>,
    /// Material slot of each triangle, `0..material_count`.
    pub materials: Vec<u16>,
    pub material_count: u16,
}

impl Mesh {
    pub fn triangle_area(&self, tri: &[u32; 3], scale: &Vector3<f64>) -> f64 {
        let p = |i: u32| self.vertices[i as usize].component_mul(scale);
        (p(tri[1]) - p(tri[0]))
            .cross(&(p(tri[2]) - p(tri[0])))
            .norm()
            * 0.5
    }

    /// Checks index ranges, attribute lengths and triangle areas under `scale`.
    pub fn validate(&self, scale: &Vector3<f64>) -> Result<(), SceneError> {
        let invalid = |msg: String| SceneError::InvalidMesh {
            asset_id: self.asset_id.clone(),
            message: msg,
        };
        if self.triangles.is_empty() {
            return Err(invalid("mesh has no triangles".into()));
        }
        if self.uv.len() != self.vertices.len() {
            return Err(invalid(format!(
                "{} uv for {} vertices",
                self.uv.len(),
                self.vertices.len()
            )));
        }
        if self.materials.len() != self.triangles.len() {
            return Err(invalid("one material slot per triangle required".into()));
        }
        if let Some(m) = self.materials.iter().find(|&&m| m >= self.material_count) {
            return Err(invalid(format!(
                "material slot {m} >= material count {}",
                self.material_count
            )));
        }
        let n = self.vertices.len() as u32;
        for (i, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(invalid(format!(
                    "triangle {i} references a vertex out of range"
                )));
            }
            let area = self.triangle_area(tri, scale);
            if !(area > MIN_TRIANGLE_AREA) {
                return Err(invalid(format!(
                    "triangle {i} is degenerate (area {area:e})"
                )));
            }
        }
        Ok(())
    }

    /// Axis-aligned bounds `(min, max)` of the vertices.
    pub fn bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }
}

#[derive(Default)]
struct Builder {
    vertices: Vec<Vector3<f64>>,
    uv: Vec<Vector2<f64>>,
    triangles: Vec<[u32; 3]>,
    materials: Vec<u16>,
}

impl Builder {
    fn vertex(&mut self, p: Vector3<f64>, uv: Vector2<f64>) -> u32 {
        self.vertices.push(p);
        self.uv.push(uv);
        (self.vertices.len() - 1) as u32
    }

    fn tri(&mut self, a: u32, b: u32, c: u32, material: u16) {
        self.triangles.push([a, b, c]);
        self.materials.push(material);
    }

    fn quad(&mut self, corners: [Vector3<f64>; 4], material: u16) {
        let uvs = [
            Vector2::new(0.0, 0.0),
            Vector2::new(1.0, 0.0),
            Vector2::new(1.0, 1.0),
            Vector2::new(0.0, 1.0),
        ];
        let ids: Vec<u32> = corners
            .iter()
            .zip(uvs)
            .map(|(p, uv)| self.vertex(*p, uv))
            .collect();
        self.tri(ids[0], ids[1], ids[2], material);
        self.tri(ids[0], ids[2], ids[3], material);
    }

    fn finish(self, asset_id: impl Into<String>, material_count: u16) -> Mesh {
        Mesh {
            asset_id: asset_id.into(),
            vertices: self.vertices,
            uv: self.uv,
            triangles: self.triangles,
            materials: self.materials,
            material_count,
        }
    }
}

/// Axis-aligned box spanning `[-0.5, 0.5]` on X and Z; the +Y (bottom) face is
/// a unit square and the -Y (top) face is scaled by `top_scale`.
/// Material slots: 0 for ±X, 1 for ±Y, 2 for ±Z.
fn frustum_box(asset_id: &str, top_scale: f64) -> Mesh {
    let mut b = Builder::default();
    let corner = |x: f64, y: f64, z: f64| {
        let s = if y < 0.0 { top_scale } else { 1.0 };
        Vector3::new(x * s, y, z * s)
    };
    let h = 0.5;
    // +X / -X
    b.quad(
        [
            corner(h, -h, -h),
            corner(h, -h, h),
            corner(h, h, h),
            corner(h, h, -h),
        ],
        0,
    );
    b.quad(
        [
            corner(-h, -h, h),
            corner(-h, -h, -h),
            corner(-h, h, -h),
            corner(-h, h, h),
        ],
        0,
    );
    // -Y (top) / +Y (bottom)
    b.quad(
        [
            corner(-h, -h, h),
            corner(h, -h, h),
            corner(h, -h, -h),
            corner(-h, -h, -h),
        ],
        1,
    );
    b.quad(
        [
            corner(-h, h, -h),
            corner(h, h, -h),
            corner(h, h, h),
            corner(-h, h, h),
        ],
        1,
    );
    // +Z / -Z
    b.quad(
        [
            corner(h, -h, h),
            corner(-h, -h, h),
            corner(-h, h, h),
            corner(h, h, h),
        ],
        2,
    );
    b.quad(
        [
            corner(-h, -h, -h),
            corner(h, -h, -h),
            corner(h, h, -h),
            corner(-h, h, -h),
        ],
        2,
    );
    b.finish(asset_id, 3)
}

pub fn cuboid() -> Mesh {
    frustum_box("prim/cuboid", 1.0)
}

/// Truncated pyramid with the top face scaled by `top_scale`.
pub fn frustum(top_scale: f64) -> Mesh {
    frustum_box(
        &format!("prim/frustum/t{:02}", (top_scale * 10.0).round() as u32),
        top_scale,
    )
}

/// Cylinder (or truncated cone) along Y with height 1 and bottom radius 0.5.
/// Slot 0 is the side, slot 1 the caps.
pub fn cylinder(segments: u32, top_ratio: f64) -> Mesh {
    let id = if top_ratio == 1.0 {
        format!("prim/cylinder/s{segments:02}")
    } else {
        format!(
            "prim/cone/s{segments:02}/r{:02}",
            (top_ratio * 10.0).round() as u32
        )
    };
    let mut b = Builder::default();
    let ring = |i: u32, y: f64, r: f64| {
        let a = TAU * i as f64 / segments as f64;
        Vector3::new(r * a.cos(), y, r * a.sin())
    };
    let (r_bottom, r_top) = (0.5, 0.5 * top_ratio);
    let mut top = Vec::new();
    let mut bottom = Vec::new();
    for i in 0..=segments {
        let u = i as f64 / segments as f64;
        top.push(b.vertex(ring(i, -0.5, r_top), Vector2::new(u, 0.0)));
        bottom.push(b.vertex(ring(i, 0.5, r_bottom), Vector2::new(u, 1.0)));
    }
    for i in 0..segments as usize {
        b.tri(top[i], bottom[i], bottom[i + 1], 0);
        b.tri(top[i], bottom[i + 1], top[i + 1], 0);
    }
    for (y, r) in [(-0.5, r_top), (0.5, r_bottom)] {
        let center = b.vertex(Vector3::new(0.0, y, 0.0), Vector2::new(0.5, 0.5));
        let rim: Vec<u32> = (0..segments)
            .map(|i| {
                let p = ring(i, y, r);
                b.vertex(
                    p,
                    Vector2::new(0.5 + p.x / (2.0 * r), 0.5 + p.z / (2.0 * r)),
                )
            })
            .collect();
        for i in 0..segments as usize {
            b.tri(center, rim[i], rim[(i + 1) % segments as usize], 1);
        }
    }
    b.finish(id, 2)
}

/// UV sphere of radius 0.5.
pub fn sphere(rings: u32, segments: u32) -> Mesh {
    let mut b = Builder::default();
    let point = |ring: u32, seg: u32| {
        let theta = std::f64::consts::PI * ring as f64 / rings as f64;
        let phi = TAU * seg as f64 / segments as f64;
        Vector3::new(
            0.5 * theta.sin() * phi.cos(),
            -0.5 * theta.cos(),
            0.5 * theta.sin() * phi.sin(),
        )
    };
    let mut grid = vec![vec![0u32; segments as usize + 1]; rings as usize + 1];
    for (r, row) in grid.iter_mut().enumerate() {
        for (s, slot) in row.iter_mut().enumerate() {
            let uv = Vector2::new(s as f64 / segments as f64, r as f64 / rings as f64);
            *slot = b.vertex(point(r as u32, s as u32), uv);
        }
    }
    for r in 0..rings as usize {
        for s in 0..segments as usize {
            let (a, bb, c, d) = (
                grid[r][s],
                grid[r][s + 1],
                grid[r + 1][s + 1],
                grid[r + 1][s],
            );
            if r != 0 {
                b.tri(a, bb, c, 0);
            }
            if r != rings as usize - 1 {
                b.tri(a, c, d, 0);
            }
        }
    }
    b.finish(format!("prim/sphere/r{rings:02}s{segments:02}"), 1)
}

/// Torus around Y with outer radius 0.5; `tube_ratio` is tube radius over outer radius.
pub fn torus(major_segments: u32, minor_segments: u32, tube_ratio: f64) -> Mesh {
    let mut b = Builder::default();
    let tube = 0.5 * tube_ratio;
    let major = 0.5 - tube;
    let mut grid = vec![vec![0u32; minor_segments as usize + 1]; major_segments as usize + 1];
    for (i, row) in grid.iter_mut().enumerate() {
        let a = TAU * i as f64 / major_segments as f64;
        for (j, slot) in row.iter_mut().enumerate() {
            let c = TAU * j as f64 / minor_segments as f64;
            let r = major + tube * c.cos();
            let p = Vector3::new(r * a.cos(), tube * c.sin(), r * a.sin());
            *slot = b.vertex(
                p,
                Vector2::new(
                    i as f64 / major_segments as f64,
                    j as f64 / minor_segments as f64,
                ),
            );
        }
    }
    for i in 0..major_segments as usize {
        for j in 0..minor_segments as usize {
            let (p, q, r, s) = (
                grid[i][j],
                grid[i + 1][j],
                grid[i + 1][j + 1],
                grid[i][j + 1],
            );
            b.tri(p, q, r, 0);
            b.tri(p, r, s, 0);
        }
    }
    b.finish(
        format!(
            "prim/torus/m{major_segments:02}t{:02}",
            (tube_ratio * 100.0).round() as u32
        ),
        1,
    )
}

/// Flat plane in XZ at Y = 0 spanning `[-0.5, 0.5]²`, split into `cells × cells` quads.
/// Texture coordinates run over `[0, uv_repeat]`.
pub fn ground_grid(cells: u32, uv_repeat: f64) -> Mesh {
    let mut b = Builder::default();
    let n = cells as usize;
    let mut ids = vec![vec![0u32; n + 1]; n + 1];
    for (i, row) in ids.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            let (u, v) = (j as f64 / n as f64, i as f64 / n as f64);
            *slot = b.vertex(
                Vector3::new(u - 0.5, 0.0, v - 0.5),
                Vector2::new(u * uv_repeat, v * uv_repeat),
            );
        }
    }
    for i in 0..n {
        for j in 0..n {
            b.tri(ids[i][j], ids[i][j + 1], ids[i + 1][j + 1], 0);
            b.tri(ids[i][j], ids[i + 1][j + 1], ids[i + 1][j], 0);
        }
    }
    b.finish(format!("prim/ground/c{cells}"), 1)
}

/// Square in the XY plane at Z = 0 spanning `[-0.5, 0.5]²`, texture over `[0, 1]²`.
pub fn quad() -> Mesh {
    let mut b = Builder::default();
    let h = 0.5;
    b.quad(
        [
            Vector3::new(-h, -h, 0.0),
            Vector3::new(h, -h, 0.0),
            Vector3::new(h, h, 0.0),
            Vector3::new(-h, h, 0.0),
        ],
        0,
    );
    b.finish("prim/quad", 1)
}

/// Box car in a unit bounding box: a full-width body in the lower 60% and a
/// narrower cabin on top. Slot 0 is the body, slot 1 the cabin. Length runs along Z.
pub fn box_car() -> Mesh {
    let body = frustum_box("", 1.0);
    let cabin = frustum_box("", 0.8);
    let mut b = Builder::default();
    let mut append = |m: &Mesh, map: &dyn Fn(&Vector3<f64>) -> Vector3<f64>, slot: u16| {
        let base = b.vertices.len() as u32;
        for (v, uv) in m.vertices.iter().zip(&m.uv) {
            b.vertex(map(v), *uv);
        }
        for t in &m.triangles {
            b.tri(base + t[0], base + t[1], base + t[2], slot);
        }
    };
    append(&body, &|v| Vector3::new(v.x, 0.2 + v.y * 0.6, v.z), 0);
    append(
        &cabin,
        &|v| Vector3::new(v.x * 0.9, -0.3 + v.y * 0.4, v.z * 0.5 - 0.05),
        1,
    );
    b.finish("prim/boxcar", 2)
}

/// Built-in foreground shape pool (variants of every primitive kind).
pub fn primitive_pool() -> Vec<Mesh> {
    let mut pool = vec![cuboid()];
    pool.extend((3..=9).map(|t| frustum(t as f64 / 10.0)));
    pool.extend((6..=32).map(|s| cylinder(s, 1.0)));
    for r in [2, 4, 6, 8] {
        for s in [8, 16, 24] {
            pool.push(cylinder(s, r as f64 / 10.0));
        }
    }
    for rings in [6, 8, 10, 12] {
        for segs in [8, 12, 16, 20] {
            pool.push(sphere(rings, segs));
        }
    }
    for ratio in [0.15, 0.25, 0.35, 0.45] {
        for segs in [12, 16, 24] {
            pool.push(torus(segs, 8, ratio));
        }
    }
    pool
}

/// Corner `(position, texcoord)` indices, material slot and source line.
type Face = (Vec<(usize, Option<usize>)>, u16, usize);

/// Parses the `v` / `vt` / `f` / `usemtl` subset of Wavefront OBJ.
///
/// Polygons are fan-triangulated, negative (relative) indices are supported,
/// and each `usemtl` name becomes a material slot. Degenerate triangles are
/// dropped; a mesh with nothing left is rejected. When no face carries
/// texture coordinates, uv is a planar projection onto the two axes of
/// largest bounding-box extent, normalized to `[0, 1]`.
pub fn parse_obj(text: &str, asset_id: &str) -> Result<Mesh, SceneError> {
    let perr = |line: usize, message: String| SceneError::ObjParse { line, message };
    let mut positions: Vec<Vector3<f64>> = Vec::new();
    let mut texcoords: Vec<Vector2<f64>> = Vec::new();
    let mut faces: Vec<Face> = Vec::new();
    let mut slots: HashMap<String, u16> = HashMap::new();
    let mut current_slot = 0u16;

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut parts = line.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        let nums = |parts: std::str::SplitWhitespace, n: usize| -> Result<Vec<f64>, SceneError> {
            let vals: Vec<f64> = parts
                .map(|p| {
                    p.parse::<f64>()
                        .map_err(|_| perr(line_no, format!("invalid number {p:?}")))
                })
                .collect::<Result<_, _>>()?;
            if vals.len() < n || vals.iter().any(|v| !v.is_finite()) {
                return Err(perr(
                    line_no,
                    format!("expected {n} finite numbers after {tag:?}"),
                ));
            }
            Ok(vals)
        };
        match tag {
            "v" => {
                let v = nums(parts, 3)?;
                positions.push(Vector3::new(v[0], v[1], v[2]));
            }
            "vt" => {
                let v = nums(parts, 1)?;
                texcoords.push(Vector2::new(v[0], v.get(1).copied().unwrap_or(0.0)));
            }
            "f" => {
                let mut corners = Vec::new();
                for item in parts {
                    let mut fields = item.split('/');
                    let resolve = |field: Option<&str>,
                                   count: usize,
                                   what: &str|
                     -> Result<Option<usize>, SceneError> {
                        match field {
                            None | Some("") => Ok(None),
                            Some(s) => {
                                let i: i64 = s.parse().map_err(|_| {
                                    perr(line_no, format!("invalid {what} index {s:?}"))
                                })?;
                                let idx = if i > 0 { i - 1 } else { count as i64 + i };
                                if i == 0 || idx < 0 || idx >= count as i64 {
                                    return Err(perr(
                                        line_no,
                                        format!("{what} index {i} out of range (have {count})"),
                                    ));
                                }
                                Ok(Some(idx as usize))
                            }
                        }
                    };
                    let v =
                        resolve(fields.next(), positions.len(), "vertex")?.ok_or_else(|| {
                            perr(
                                line_no,
                                format!("face corner {item:?} lacks a vertex index"),
                            )
                        })?;
                    let t = resolve(fields.next(), texcoords.len(), "texture")?;
                    corners.push((v, t));
                }
                if corners.len() < 3 {
                    return Err(perr(line_no, "face needs at least 3 corners".into()));
                }
                faces.push((corners, current_slot, line_no));
            }
            "usemtl" => {
                let name = parts.next().unwrap_or("").to_string();
                let next = slots.len() as u16;
                current_slot = *slots.entry(name).or_insert(next);
            }
            "vn" | "vp" | "o" | "g" | "s" | "mtllib" | "l" | "p" => {}
            other => return Err(perr(line_no, format!("unsupported record {other:?}"))),
        }
    }
    if faces.is_empty() {
        return Err(SceneError::InvalidMesh {
            asset_id: asset_id.into(),
            message: "OBJ contains no faces".into(),
        });
    }

    let has_uv = faces
        .iter()
        .all(|(c, _, _)| c.iter().all(|(_, t)| t.is_some()));
    let planar = planar_uv(&positions);
    let mut b = Builder::default();
    let mut remap: HashMap<(usize, Option<usize>), u32> = HashMap::new();
    let unit = Vector3::repeat(1.0);
    let mut kept = 0usize;
    for (corners, slot, _) in &faces {
        let ids: Vec<u32> = corners
            .iter()
            .map(|&(v, t)| {
                let key = (v, if has_uv { t } else { None });
                *remap.entry(key).or_insert_with(|| {
                    let uv = match key.1 {
                        Some(t) => texcoords[t],
                        None => planar[v],
                    };
                    b.vertex(positions[v], uv)
                })
            })
            .collect();
        for k in 1..ids.len() - 1 {
            let tri = [ids[0], ids[k], ids[k + 1]];
            let p = |i: u32| b.vertices[i as usize];
            let area = (p(tri[1]) - p(tri[0]))
                .cross(&(p(tri[2]) - p(tri[0])))
                .norm()
                * 0.5;
            if area > MIN_TRIANGLE_AREA {
                b.tri(tri[0], tri[1], tri[2], *slot);
                kept += 1;
            }
        }
    }
    if kept == 0 {
        return Err(SceneError::InvalidMesh {
            asset_id: asset_id.into(),
            message: "every face is degenerate".into(),
        });
    }
    let material_count = slots.len().max(1) as u16;
    let mesh = b.finish(asset_id, material_count);
    mesh.validate(&unit)?;
    Ok(mesh)
}

fn planar_uv(positions: &[Vector3<f64>]) -> Vec<Vector2<f64>> {
    if positions.is_empty() {
        return Vec::new();
    }
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in positions {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let ext = hi - lo;
    // drop the axis of smallest extent; keep the other two in index order
    let drop = (0..3)
        .min_by(|&a, &b| ext[a].partial_cmp(&ext[b]).unwrap().then(b.cmp(&a)))
        .unwrap();
    let keep: Vec<usize> = (0..3).filter(|&a| a != drop).collect();
    positions
        .iter()
        .map(|p| {
            let coord = |a: usize| {
                if ext[a] > 0.0 {
                    (p[a] - lo[a]) / ext[a]
                } else {
                    0.0
                }
            };
            Vector2::new(coord(keep[0]), coord(keep[1]))
        })
        .collect()
}

pub fn load_obj_mesh(path: &std::path::Path) -> Result<Mesh, SceneError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SceneError::Asset(format!("{}: {e}", path.display())))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_obj(&text, &format!("obj/{stem}"))
}
