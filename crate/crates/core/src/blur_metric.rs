//! No-reference blur estimate from the widths of vertical edges, with
//! widths corrected for the horizontal stretch of the equirectangular
//! projection.
//!
//! An edge pixel is a horizontal-gradient maximum along its row. Its width
//! is the distance between the luminance extrema found by walking left and
//! right from it. A row at latitude `lat` is stretched horizontally by
//! `1 / cos(lat)`, so raw widths there are divided by that factor before
//! averaging.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::projection::EquirectImage;

pub const DEFAULT_GRAD_THRESHOLD: f64 = 0.04;
pub const DEFAULT_STRETCH_MAX: f64 = 100.0;
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Per-row horizontal stretch factors of an equirect frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionMap {
    stretch: Vec<f64>,
    stretch_max: f64,
}

impl DistortionMap {
    pub fn height(&self) -> usize {
        self.stretch.len()
    }

    pub fn stretch(&self, row: usize) -> f64 {
        self.stretch[row]
    }

    pub fn stretch_max(&self) -> f64 {
        self.stretch_max
    }

    pub fn factors(&self) -> &[f64] {
        &self.stretch
    }
}

/// `stretch(row) = min(1 / cos(lat(row)), stretch_max)`, with `lat` taken
/// at the row's pixel center. The latitude is computed from the signed
/// offset to the equator so mirrored rows get bit-identical factors.
pub fn compute_distortion_map(h: usize, stretch_max: f64) -> Result<DistortionMap> {
    if h == 0 {
        return Err(invalid("height", "must be at least 1"));
    }
    if !(stretch_max > 1.0) || !stretch_max.is_finite() {
        return Err(invalid("stretch_max", format!("{stretch_max} must exceed 1")));
    }
    let hf = h as f64;
    let stretch = (0..h)
        .map(|row| {
            let lat = (hf / 2.0 - (row as f64 + 0.5)) * (180.0 / hf);
            let cos = lat.to_radians().cos();
            if cos <= 0.0 {
                stretch_max
            } else {
                (1.0 / cos).min(stretch_max)
            }
        })
        .collect();
    Ok(DistortionMap {
        stretch,
        stretch_max,
    })
}

/// Single-channel luminance plane.
#[derive(Debug, Clone, PartialEq)]
pub struct LumaPlane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl LumaPlane {
    pub fn from_image(img: &EquirectImage) -> Self {
        let data = match img.channels() {
            1 => img.data().iter().map(|&v| v as f64).collect(),
            _ => img
                .data()
                .chunks_exact(3)
                .map(|p| {
                    LUMA_WEIGHTS[0] * p[0] as f64
                        + LUMA_WEIGHTS[1] * p[1] as f64
                        + LUMA_WEIGHTS[2] * p[2] as f64
                })
                .collect(),
        };
        Self {
            width: img.width(),
            height: img.height(),
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.width..(r + 1) * self.width]
    }

    /// Horizontal gradient: central difference smoothed `[1, 2, 1] / 4`
    /// over the neighbouring rows. x wraps, y clamps.
    pub fn horizontal_gradient(&self) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        let diff: Vec<f64> = (0..h)
            .flat_map(|r| {
                let row = self.row(r);
                (0..w).map(move |c| (row[(c + 1) % w] - row[(c + w - 1) % w]) / 2.0)
            })
            .collect();
        let mut out = vec![0.0; w * h];
        for r in 0..h {
            let up = r.saturating_sub(1);
            let down = (r + 1).min(h - 1);
            for c in 0..w {
                out[r * w + c] =
                    (diff[up * w + c] + 2.0 * diff[r * w + c] + diff[down * w + c]) / 4.0;
            }
        }
        out
    }
}

pub fn detect_vertical_edges(img: &EquirectImage, grad_threshold: f64) -> Vec<(usize, usize)> {
    detect_edges_in(&LumaPlane::from_image(img), grad_threshold)
}

/// Pixels whose gradient magnitude exceeds the threshold and peaks along the
/// row. On a plateau of equal magnitudes the rightmost pixel wins.
fn detect_edges_in(luma: &LumaPlane, grad_threshold: f64) -> Vec<(usize, usize)> {
    let (w, h) = (luma.width, luma.height);
    let grad = luma.horizontal_gradient();
    let mut out = Vec::new();
    for r in 0..h {
        let g = &grad[r * w..(r + 1) * w];
        for c in 0..w {
            let m = g[c].abs();
            if m > grad_threshold && m >= g[(c + w - 1) % w].abs() && m > g[(c + 1) % w].abs() {
                out.push((r, c));
            }
        }
    }
    out
}

/// Outcome of measuring one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeWidth {
    Width(usize),
    /// The walk toward an extremum exceeded the step cap.
    CapReached,
    /// The row itself shows no luminance change at this pixel (the edge
    /// response came from a neighbouring row).
    Flat,
}

/// Measures the edge at `(row, col)`; see [`measure_in`].
pub fn measure_edge_width(img: &EquirectImage, row: usize, col: usize) -> EdgeWidth {
    measure_in(&LumaPlane::from_image(img), row, col)
}

/// Distance between the nearest luminance extrema left and right of the
/// edge pixel, walking cyclically at most `w / 4` steps each way.
fn measure_in(luma: &LumaPlane, row: usize, col: usize) -> EdgeWidth {
    let w = luma.width;
    let line = luma.row(row);
    let at = |c: isize| line[c.rem_euclid(w as isize) as usize];
    let c = col as isize;
    let slope = at(c + 1) - at(c - 1);
    if slope == 0.0 {
        return EdgeWidth::Flat;
    }
    let rising = slope > 0.0;
    let cap = (w / 4).max(1);
    // step toward larger values on the high side, smaller on the low side
    let walk = |dir: isize, ascend: bool| -> Option<usize> {
        let mut p = c;
        let mut steps = 0;
        loop {
            let next = at(p + dir);
            let moving = if ascend { next > at(p) } else { next < at(p) };
            if !moving {
                return Some(steps);
            }
            if steps == cap {
                return None;
            }
            p += dir;
            steps += 1;
        }
    };
    let (right, left) = if rising {
        (walk(1, true), walk(-1, false))
    } else {
        (walk(1, false), walk(-1, true))
    };
    match (left, right) {
        (Some(l), Some(r)) if l + r > 0 => EdgeWidth::Width(l + r),
        (Some(_), Some(_)) => EdgeWidth::Flat,
        _ => EdgeWidth::CapReached,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlurStatistic {
    #[default]
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlurConfig {
    pub grad_threshold: f64,
    pub stretch_max: f64,
    pub statistic: BlurStatistic,
    /// Divide widths by the row's stretch factor.
    pub compensate: bool,
}

impl Default for BlurConfig {
    fn default() -> Self {
        Self {
            grad_threshold: DEFAULT_GRAD_THRESHOLD,
            stretch_max: DEFAULT_STRETCH_MAX,
            statistic: BlurStatistic::Mean,
            compensate: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeSample {
    pub row: usize,
    pub col: usize,
    pub width: usize,
    pub compensated_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowSummary {
    pub row: usize,
    pub edge_count: usize,
    pub mean_width: f64,
    pub mean_compensated_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlurReport {
    pub edge_count: usize,
    pub discarded_count: usize,
    /// Absent when no edge was accepted.
    pub global_blur: Option<f64>,
    pub mean_uncompensated_width: Option<f64>,
    pub compensated: bool,
    /// Rows with at least one accepted edge, top to bottom.
    pub rows: Vec<RowSummary>,
}

/// Accepted edge samples in row-major order plus the number discarded.
pub fn edge_samples(img: &EquirectImage, config: &BlurConfig) -> Result<(Vec<EdgeSample>, usize)> {
    let luma = LumaPlane::from_image(img);
    let map = compute_distortion_map(img.height(), config.stretch_max)?;
    let mut samples = Vec::new();
    let mut discarded = 0;
    for (row, col) in detect_edges_in(&luma, config.grad_threshold) {
        match measure_in(&luma, row, col) {
            EdgeWidth::Width(width) => samples.push(EdgeSample {
                row,
                col,
                width,
                compensated_width: width as f64 / map.stretch(row),
            }),
            EdgeWidth::CapReached | EdgeWidth::Flat => discarded += 1,
        }
    }
    Ok((samples, discarded))
}

fn statistic(values: &mut [f64], stat: BlurStatistic) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(match stat {
        BlurStatistic::Mean => values.iter().sum::<f64>() / values.len() as f64,
        BlurStatistic::Median => {
            values.sort_by(f64::total_cmp);
            let n = values.len();
            if n % 2 == 1 {
                values[n / 2]
            } else {
                (values[n / 2 - 1] + values[n / 2]) / 2.0
            }
        }
    })
}

pub fn global_blur(img: &EquirectImage, config: &BlurConfig) -> Result<BlurReport> {
    if !(config.grad_threshold >= 0.0) {
        return Err(invalid("grad_threshold", "must be non-negative"));
    }
    let (samples, discarded_count) = edge_samples(img, config)?;
    let mut raw: Vec<f64> = samples.iter().map(|s| s.width as f64).collect();
    let mut comp: Vec<f64> = samples.iter().map(|s| s.compensated_width).collect();
    let mean_uncompensated_width = statistic(&mut raw.clone(), BlurStatistic::Mean);
    let global = if config.compensate {
        statistic(&mut comp, config.statistic)
    } else {
        statistic(&mut raw, config.statistic)
    };

    let mut rows: Vec<RowSummary> = Vec::new();
    for s in &samples {
        match rows.last_mut() {
            Some(last) if last.row == s.row => {
                last.edge_count += 1;
                last.mean_width += s.width as f64;
                last.mean_compensated_width += s.compensated_width;
            }
            _ => rows.push(RowSummary {
                row: s.row,
                edge_count: 1,
                mean_width: s.width as f64,
                mean_compensated_width: s.compensated_width,
            }),
        }
    }
    for r in &mut rows {
        r.mean_width /= r.edge_count as f64;
        r.mean_compensated_width /= r.edge_count as f64;
    }

    Ok(BlurReport {
        edge_count: samples.len(),
        discarded_count,
        global_blur: global,
        mean_uncompensated_width,
        compensated: config.compensate,
        rows,
    })
}
