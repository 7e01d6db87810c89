//! Covering the sphere with overlapping square viewports.
//!
//! Viewport centers come from the golden-angle spiral (Vogel's method):
//! `z_k = 1 - (2k + 1)/n`, `lat_k = asin(z_k)`, `lon_k = k * golden_angle`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sphere_geom::{dir_to_vec, wrap_lon, SphereDir, ViewportFrame};

/// `360 * (1 - 1/phi)`, the golden angle in degrees.
pub const GOLDEN_ANGLE_DEG: f64 = 137.507_764_050_037_85;

pub const DEFAULT_COUNT: usize = 240;
pub const DEFAULT_FOV: f64 = 24.0;

/// One rectilinear view of the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewport {
    pub center: SphereDir,
    /// Edge-to-edge angle along each axis through the center, degrees.
    pub fov: f64,
    /// Raster side length in pixels.
    pub size: usize,
    pub index: usize,
}

impl Viewport {
    pub fn new(center: SphereDir, fov: f64, size: usize, index: usize) -> Result<Self> {
        validate_fov(fov)?;
        validate_size(size)?;
        Ok(Self {
            center,
            fov,
            size,
            index,
        })
    }

    pub fn frame(&self) -> ViewportFrame {
        ViewportFrame::for_viewport(self)
    }

    /// Angular radius of the footprint's corners, degrees.
    pub fn corner_radius(&self) -> f64 {
        (2f64.sqrt() * (self.fov / 2.0).to_radians().tan())
            .atan()
            .to_degrees()
    }
}

fn validate_fov(fov: f64) -> Result<()> {
    if !(fov > 0.0 && fov < 90.0) {
        return Err(invalid("fov", format!("{fov} not in (0, 90)")));
    }
    Ok(())
}

fn validate_size(size: usize) -> Result<()> {
    if size < 2 {
        return Err(invalid("size", format!("{size} < 2")));
    }
    Ok(())
}

/// Raster size that matches the source pixel density at a viewport center.
pub fn matched_viewport_size(fov: f64, source_width: usize) -> usize {
    ((fov * source_width as f64 / 360.0).round() as usize).max(2)
}

/// An ordered, immutable set of viewports sharing one FOV and raster size.
#[derive(Debug, Clone, PartialEq)]
pub struct Tessellation {
    viewports: Vec<Viewport>,
    fov: f64,
    size: usize,
}

impl Tessellation {
    /// Assembles a tessellation from explicit centers (e.g. read from a
    /// file). Indices are assigned in order.
    pub fn from_centers(centers: &[SphereDir], fov: f64, size: usize) -> Result<Self> {
        if centers.is_empty() {
            return Err(invalid("count", "tessellation needs at least one viewport"));
        }
        let viewports = centers
            .iter()
            .enumerate()
            .map(|(index, &c)| Viewport::new(c, fov, size, index))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            viewports,
            fov,
            size,
        })
    }

    pub fn viewports(&self) -> &[Viewport] {
        &self.viewports
    }

    pub fn viewport(&self, index: usize) -> Result<&Viewport> {
        self.viewports.get(index).ok_or(Error::ViewportIndex {
            index,
            count: self.viewports.len(),
        })
    }

    pub fn count(&self) -> usize {
        self.viewports.len()
    }

    pub fn fov(&self) -> f64 {
        self.fov
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn frames(&self) -> Vec<ViewportFrame> {
        self.viewports.iter().map(Viewport::frame).collect()
    }
}

pub fn vogel_points(n: usize) -> Result<Vec<SphereDir>> {
    if n == 0 {
        return Err(invalid("n", "need at least one point"));
    }
    let nf = n as f64;
    Ok((0..n)
        .map(|k| {
            let z = 1.0 - (2 * k + 1) as f64 / nf;
            let lat = z.asin().to_degrees().clamp(-90.0, 90.0);
            let lon = wrap_lon(k as f64 * GOLDEN_ANGLE_DEG);
            SphereDir::new(lon, lat).expect("latitude from asin is in range")
        })
        .collect())
}

/// One north-aligned square viewport per Vogel point.
pub fn make_tessellation(count: usize, fov: f64, size: usize) -> Result<Tessellation> {
    if count == 0 {
        return Err(invalid("count", "need at least one viewport"));
    }
    validate_fov(fov)?;
    validate_size(size)?;
    Tessellation::from_centers(&vogel_points(count)?, fov, size)
}

/// Frames plus a cheap cone pre-test for repeated containment queries.
pub(crate) struct FrameSet {
    frames: Vec<ViewportFrame>,
    centers: Vec<[f64; 3]>,
    cos_radius: f64,
}

impl FrameSet {
    pub(crate) fn new(t: &Tessellation) -> Self {
        let frames = t.frames();
        let centers = frames.iter().map(|f| f.center().to_array()).collect();
        // corner radius plus a margin so the pre-test never rejects a hit
        let radius = t.viewports[0].corner_radius() + 1e-6;
        Self {
            frames,
            centers,
            cos_radius: radius.to_radians().cos(),
        }
    }

    fn candidate(&self, i: usize, p: [f64; 3]) -> bool {
        crate::sphere_geom::dot(self.centers[i], p) >= self.cos_radius
    }

    pub(crate) fn any_contains(&self, p: [f64; 3]) -> bool {
        (0..self.frames.len()).any(|i| self.candidate(i, p) && self.frames[i].contains(p))
    }

    pub(crate) fn containing(&self, p: [f64; 3]) -> impl Iterator<Item = usize> + '_ {
        (0..self.frames.len()).filter(move |&i| self.candidate(i, p) && self.frames[i].contains(p))
    }
}

/// Fraction of `samples` Vogel test directions strictly inside at least
/// one viewport.
pub fn coverage_fraction(t: &Tessellation, samples: usize) -> Result<f64> {
    let tests = vogel_points(samples)?;
    let set = FrameSet::new(t);
    let hit = tests
        .iter()
        .filter(|d| set.any_contains(dir_to_vec(**d).to_array()))
        .count();
    Ok(hit as f64 / samples as f64)
}

/// Ascending indices of the viewports whose footprint strictly contains `d`.
pub fn viewports_containing(t: &Tessellation, d: SphereDir) -> Vec<usize> {
    let p = dir_to_vec(d).to_array();
    FrameSet::new(t).containing(p).collect()
}

/// Conservative equirect pixel region that can hold a viewport's footprint.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PixelBounds {
    pub rows: Range<usize>,
    /// First column and number of columns, cyclic in x.
    pub col_start: usize,
    pub col_len: usize,
}

impl PixelBounds {
    pub(crate) fn cols(&self, w: usize) -> impl Iterator<Item = usize> + '_ {
        let start = self.col_start;
        (0..self.col_len).map(move |k| (start + k) % w)
    }
}

pub(crate) fn pixel_bounds(vp: &Viewport, w: usize, h: usize) -> PixelBounds {
    let r = vp.corner_radius();
    let lat = vp.center.lat();
    let (wf, hf) = (w as f64, h as f64);
    let top = lat + r;
    let bottom = lat - r;
    let row_of = |lat: f64| (90.0 - lat) / 180.0 * hf;
    let r0 = (row_of(top.min(90.0)).floor() as isize - 1).max(0) as usize;
    let r1 = ((row_of(bottom.max(-90.0)).ceil() as isize + 1).max(0) as usize).min(h);
    let rows = r0..r1.max(r0);
    if top >= 90.0 || bottom <= -90.0 {
        return PixelBounds {
            rows,
            col_start: 0,
            col_len: w,
        };
    }
    let half_lon = (r.to_radians().sin() / lat.to_radians().cos())
        .min(1.0)
        .asin()
        .to_degrees();
    let cx = (vp.center.lon() + 180.0) / 360.0 * wf;
    let half_px = half_lon / 360.0 * wf + 2.0;
    let len = (2.0 * half_px).ceil() as usize + 1;
    if len >= w {
        return PixelBounds {
            rows,
            col_start: 0,
            col_len: w,
        };
    }
    let start = (cx - half_px).floor().rem_euclid(wf) as usize % w;
    PixelBounds {
        rows,
        col_start: start,
        col_len: len,
    }
}

/// Per-pixel overlap counts of a tessellation rendered into an
/// equirectangular raster, with the footprint borders marked.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMap {
    pub width: usize,
    pub height: usize,
    /// Number of viewports strictly containing each pixel center.
    pub counts: Vec<u32>,
    /// Pixels inside some footprint with a 4-neighbour outside it.
    pub outline: Vec<bool>,
}

impl OverlapMap {
    pub fn min_count(&self) -> u32 {
        self.counts.iter().copied().min().unwrap_or(0)
    }

    pub fn max_count(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn covered_fraction(&self) -> f64 {
        let covered = self.counts.iter().filter(|&&c| c > 0).count();
        covered as f64 / self.counts.len() as f64
    }
}

pub fn overlap_map(t: &Tessellation, w: usize, h: usize) -> Result<OverlapMap> {
    if w < 2 || h < 1 {
        return Err(invalid("raster", format!("{w}x{h} too small")));
    }
    let dirs = pixel_directions(w, h);
    let mut counts = vec![0u32; w * h];
    let mut outline = vec![false; w * h];
    let mut inside = vec![false; w * h];
    for vp in t.viewports() {
        let frame = vp.frame();
        let bounds = pixel_bounds(vp, w, h);
        let mut touched = Vec::new();
        for row in bounds.rows.clone() {
            for col in bounds.cols(w) {
                let i = row * w + col;
                if frame.contains(dirs[i]) {
                    inside[i] = true;
                    counts[i] += 1;
                    touched.push(i);
                }
            }
        }
        for &i in &touched {
            let (row, col) = (i / w, i % w);
            let left = row * w + (col + w - 1) % w;
            let right = row * w + (col + 1) % w;
            let edge = !inside[left]
                || !inside[right]
                || (row > 0 && !inside[i - w])
                || (row + 1 < h && !inside[i + w]);
            if edge {
                outline[i] = true;
            }
        }
        for &i in &touched {
            inside[i] = false;
        }
    }
    Ok(OverlapMap {
        width: w,
        height: h,
        counts,
        outline,
    })
}

/// Unit vectors of every pixel center, row-major.
pub(crate) fn pixel_directions(w: usize, h: usize) -> Vec<[f64; 3]> {
    use crate::sphere_geom::{equirect_to_dir, EquirectCoord};
    let mut out = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            let d = equirect_to_dir(
                EquirectCoord::new(col as f64 + 0.5, row as f64 + 0.5),
                w,
                h,
            );
            out.push(dir_to_vec(d).to_array());
        }
    }
    out
}
