//! On-disk formats: the tessellation document and JSON-lines detection lists.

use std::fs;
use std::path::Path;

use omniview::sphere_geom::SphereDir;
use omniview::tessellation::Tessellation;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewportRecord {
    pub index: usize,
    pub lon: f64,
    pub lat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TessellationFile {
    pub format_version: u32,
    pub count: usize,
    pub fov: f64,
    pub size: usize,
    pub viewports: Vec<ViewportRecord>,
}

impl TessellationFile {
    pub fn from_tessellation(t: &Tessellation) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            count: t.count(),
            fov: t.fov(),
            size: t.size(),
            viewports: t
                .viewports()
                .iter()
                .map(|vp| ViewportRecord {
                    index: vp.index,
                    lon: vp.center.lon(),
                    lat: vp.center.lat(),
                })
                .collect(),
        }
    }

    pub fn to_tessellation(&self) -> Result<Tessellation, String> {
        if self.format_version != FORMAT_VERSION {
            return Err(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            ));
        }
        if self.count != self.viewports.len() {
            return Err(format!(
                "header count {} but {} viewport records",
                self.count,
                self.viewports.len()
            ));
        }
        let mut centers = Vec::with_capacity(self.count);
        for (i, rec) in self.viewports.iter().enumerate() {
            if rec.index != i {
                return Err(format!("record {i} has index {}", rec.index));
            }
            let c = SphereDir::new(rec.lon, rec.lat).map_err(|e| format!("record {i}: {e}"))?;
            centers.push(c);
        }
        Tessellation::from_centers(&centers, self.fov, self.size).map_err(|e| e.to_string())
    }
}

pub fn read_tessellation(path: &Path) -> CliResult<Tessellation> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: TessellationFile =
        serde_json::from_str(&text).map_err(|e| CliError::invalid(path, e))?;
    file.to_tessellation().map_err(|e| CliError::invalid(path, e))
}

pub fn tessellation_to_string(t: &Tessellation) -> String {
    let mut s = serde_json::to_string_pretty(&TessellationFile::from_tessellation(t))
        .expect("tessellation serializes");
    s.push('\n');
    s
}

/// Reads one record per non-blank line. Unknown fields are ignored so
/// detector output can carry extras (labels, ids).
pub fn read_records<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line)
            .map_err(|e| CliError::invalid(path, format!("line {}: {e}", n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn records_to_string<T: Serialize>(records: &[T]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("record serializes"));
        s.push('\n');
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
