//! Asset pools and the disjoint train/test split.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::mesh::{load_obj_mesh, primitive_pool, Mesh};
use super::texture::{load_texture_image, procedural_texture, Texture};
use super::SceneError;

/// Train fraction of the reference model collection (32 872 of 35 927 models).
pub const REFERENCE_SPLIT_RATIO: f64 = 32_872.0 / 35_927.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    #[default]
    Train,
    Test,
}

/// Position of an id in `[0, 1)`, from the first 8 bytes of its SHA-256.
fn split_key(asset_id: &str) -> f64 {
    let digest = Sha256::digest(asset_id.as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    (u64::from_be_bytes(head) >> 11) as f64 / (1u64 << 53) as f64
}

pub fn split_side(asset_id: &str, ratio: f64) -> Split {
    if split_key(asset_id) < ratio {
        Split::Train
    } else {
        Split::Test
    }
}

/// Partitions ids into `(train, test)`; each id's side depends only on the id.
pub fn split_assets<S: AsRef<str>>(
    asset_ids: &[S],
    ratio: f64,
) -> Result<(Vec<String>, Vec<String>), SceneError> {
    if asset_ids.is_empty() {
        return Err(SceneError::Config("asset id list is empty".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(SceneError::Config(format!(
            "split ratio {ratio} must lie in (0, 1)"
        )));
    }
    let (train, test): (Vec<_>, Vec<_>) = asset_ids
        .iter()
        .map(|s| s.as_ref().to_string())
        .partition(|id| split_side(id, ratio) == Split::Train);
    Ok((train, test))
}

pub const PROCEDURAL_TEXTURES_PER_KIND: u32 = 96;

/// Every mesh and texture a generator may draw from, keyed by asset id.
#[derive(Debug, Clone, Default)]
pub struct AssetPool {
    pub meshes: BTreeMap<String, Mesh>,
    pub textures: BTreeMap<String, Texture>,
}

impl AssetPool {
    /// Built-in primitives and procedural textures.
    pub fn builtin() -> Self {
        let mut pool = Self::default();
        for m in primitive_pool() {
            pool.meshes.insert(m.asset_id.clone(), m);
        }
        for kind in ["checker", "noise", "gradient"] {
            for i in 0..PROCEDURAL_TEXTURES_PER_KIND {
                let t = procedural_texture(kind, i);
                pool.textures.insert(t.asset_id.clone(), t);
            }
        }
        pool
    }

    /// Adds every `*.obj` and `*.ppm` file in `dir` (non-recursive, sorted by name).
    pub fn ingest_dir(&mut self, dir: &Path) -> Result<usize, SceneError> {
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| SceneError::Asset(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        let mut added = 0;
        for path in entries {
            match path.extension().and_then(|e| e.to_str()) {
                Some("obj") => {
                    let m = load_obj_mesh(&path)?;
                    self.meshes.insert(m.asset_id.clone(), m);
                    added += 1;
                }
                Some("ppm") => {
                    let t = load_texture_image(&path)?;
                    self.textures.insert(t.asset_id.clone(), t);
                    added += 1;
                }
                _ => {}
            }
        }
        Ok(added)
    }

    /// Ids on one side of the split, sorted.
    pub fn mesh_ids(&self, side: Split, ratio: f64) -> Vec<String> {
        self.meshes
            .keys()
            .filter(|id| split_side(id, ratio) == side)
            .cloned()
            .collect()
    }

    pub fn texture_ids(&self, side: Split, ratio: f64) -> Vec<String> {
        self.textures
            .keys()
            .filter(|id| split_side(id, ratio) == side)
            .cloned()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_ratio_reproduces_sizes_approximately() {
        let ids: Vec<String> = (0..35_927).map(|i| format!("shapenet/{i:05}")).collect();
        let (train, test) = split_assets(&ids, REFERENCE_SPLIT_RATIO).unwrap();
        assert_eq!(train.len() + test.len(), 35_927);
        // binomial standard deviation is about 53 ids
        assert!(
            (train.len() as i64 - 32_872).abs() < 250,
            "train {}",
            train.len()
        );
    }

    #[test]
    fn builtin_pool_has_both_sides() {
        let pool = AssetPool::builtin();
        for side in [Split::Train, Split::Test] {
            assert!(!pool.mesh_ids(side, REFERENCE_SPLIT_RATIO).is_empty());
            assert!(!pool.texture_ids(side, REFERENCE_SPLIT_RATIO).is_empty());
        }
    }

    #[test]
    fn bad_arguments() {
        assert!(split_assets::<&str>(&[], 0.5).is_err());
        assert!(split_assets(&["a"], 0.0).is_err());
        assert!(split_assets(&["a"], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn split_is_an_order_independent_partition(ids in proptest::collection::btree_set("[a-z0-9/]{1,12}", 1..60), ratio in 0.05f64..0.95, rot in 0usize..60) {
            let ids: Vec<String> = ids.into_iter().collect();
            let (train, test) = split_assets(&ids, ratio).unwrap();
            prop_assert!(train.iter().all(|t| !test.contains(t)));
            let mut union: Vec<String> = train.iter().chain(&test).cloned().collect();
            union.sort();
            prop_assert_eq!(&union, &ids);

            let mut permuted = ids.clone();
            permuted.reverse();
            let k = rot % permuted.len();
            permuted.rotate_left(k);
            let (train2, _) = split_assets(&permuted, ratio).unwrap();
            for id in &ids {
                prop_assert_eq!(train.contains(id), train2.contains(id));
            }
        }
    }
}
