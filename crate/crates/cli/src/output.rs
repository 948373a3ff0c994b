//! File output: CSV tables with shortest round-trip floats and pretty JSON
//! reports, each written to a temporary file and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pxlap::NodeField;
use serde::Serialize;

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutDir { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf> {
        let target = self.path(name);
        write_atomic(&target, text.as_bytes())?;
        Ok(target)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }
}

pub fn write_atomic(target: &Path, bytes: &[u8]) -> Result<()> {
    let dir = target.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(target).with_context(|| format!("writing {}", target.display()))?;
    Ok(())
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:?}")
}

/// `x,u` or `x,y,u` rows, one per node.
pub fn solution_csv(u: &NodeField) -> String {
    let mesh = u.mesh();
    let mut out = String::from(if mesh.dim() == 1 { "x,u\n" } else { "x,y,u\n" });
    for (k, &v) in u.values().iter().enumerate() {
        let x = mesh.node(k);
        if mesh.dim() == 1 {
            let _ = writeln!(out, "{},{}", fmt_float(x[0]), fmt_float(v));
        } else {
            let _ = writeln!(out, "{},{},{}", fmt_float(x[0]), fmt_float(x[1]), fmt_float(v));
        }
    }
    out
}
