//! Optional TOML configuration mirroring the pipeline parameters. Flags
//! given on the command line take precedence.

use std::fs;
use std::path::{Path, PathBuf};

use omniview::blur_metric::{BlurStatistic, DEFAULT_GRAD_THRESHOLD, DEFAULT_STRETCH_MAX};
use omniview::fusion::{MergeMode, DEFAULT_IOU_THRESHOLD};
use omniview::tessellation::{DEFAULT_COUNT, DEFAULT_FOV};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Viewport raster size used when neither a flag nor the config sets one:
/// matched to a 3840-wide source at the default fov.
pub const DEFAULT_SIZE: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TessellationParams {
    pub count: usize,
    pub fov: f64,
    pub size: usize,
}

impl Default for TessellationParams {
    fn default() -> Self {
        Self {
            count: DEFAULT_COUNT,
            fov: DEFAULT_FOV,
            size: DEFAULT_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionParams {
    pub iou_threshold: f64,
    pub merge: MergeMode,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            merge: MergeMode::Discard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlurParams {
    pub grad_threshold: f64,
    pub stretch_max: f64,
    pub statistic: BlurStatistic,
    pub compensate: bool,
}

impl Default for BlurParams {
    fn default() -> Self {
        Self {
            grad_threshold: DEFAULT_GRAD_THRESHOLD,
            stretch_max: DEFAULT_STRETCH_MAX,
            statistic: BlurStatistic::Mean,
            compensate: true,
        }
    }
}

/// Paths and raster sizes shared by several commands.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoParams {
    pub tessellation: Option<PathBuf>,
    pub viewport_dir: Option<PathBuf>,
    pub width: Option<usize>,
    pub height: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub tessellation: TessellationParams,
    pub fusion: FusionParams,
    pub blur: BlurParams,
    pub io: IoParams,
    /// Render-stage worker count; absent means one per core.
    pub jobs: Option<usize>,
}

impl PipelineConfig {
    /// Parses a config file. Relative paths inside it are taken relative
    /// to the file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: Self = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.io.tessellation, &mut cfg.io.viewport_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}
