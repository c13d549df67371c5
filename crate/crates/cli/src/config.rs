use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

/// Resolved-config path for a command whose output is a single file.
pub fn config_path_for_file(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".config.json");
    out.with_file_name(name)
}

/// Writes `value` as pretty JSON with sorted keys.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let value = serde_json::to_value(value).context("cli: serializing JSON")?;
    let mut text = serde_json::to_string_pretty(&value).context("cli: serializing JSON")?;
    text.push('\n');
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("cli: creating {}", parent.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("cli: writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_config_sits_next_to_output() {
        assert_eq!(
            config_path_for_file(Path::new("a/b/disp.pfm")),
            PathBuf::from("a/b/disp.pfm.config.json")
        );
    }

    #[test]
    fn keys_are_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        #[derive(Serialize)]
        struct C {
            zeta: u32,
            alpha: u32,
        }
        write_json(&path, &C { zeta: 1, alpha: 2 }).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.find("alpha") < text.find("zeta"));
    }
}
