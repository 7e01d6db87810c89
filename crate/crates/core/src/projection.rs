//! Rendering viewport images out of an equirectangular frame and blending
//! per-viewport images back into one.
//!
//! Back-projection gathers: every destination pixel inside a viewport's
//! footprint samples that viewport image and adds `weight * value` to an
//! accumulator and `weight` to a weight raster. Dividing the two at the end
//! gives the fused frame.

use crate::error::{invalid, Error, Result};
use crate::sphere_geom::{
    dir_to_equirect, vec_to_dir, EquirectCoord, ViewportCoord, ViewportFrame,
};
use crate::tessellation::{pixel_bounds, pixel_directions, Viewport};

/// Weights at or below this are treated as "never touched" by
/// [`BlendAccumulator::finalize`].
pub const WEIGHT_EPS: f64 = 1e-8;

/// An equirectangular frame: row-major, interleaved `f32` samples in `[0, 1]`.
/// Column 0 is adjacent to column `width - 1` on the sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct EquirectImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

fn validate_channels(channels: usize) -> Result<()> {
    if channels != 1 && channels != 3 {
        return Err(invalid("channels", format!("{channels} is neither 1 nor 3")));
    }
    Ok(())
}

impl EquirectImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width < 2 || height < 1 {
            return Err(invalid("image", format!("{width}x{height} too small")));
        }
        validate_channels(channels)?;
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch {
                expected: format!("{} samples", width * height * channels),
                actual: format!("{} samples", data.len()),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds a frame by evaluating `f(col, row, channel)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for row in 0..height {
            for col in 0..width {
                for ch in 0..channels {
                    data.push(f(col, row, ch));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn pixel(&self, col: usize, row: usize) -> &[f32] {
        let i = (row * self.width + col) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Bilinear sample into `out`, x wrapping across the seam, y clamped.
    pub fn sample_into(&self, c: EquirectCoord, out: &mut [f32]) {
        let (w, h) = (self.width, self.height);
        let fx = c.x - 0.5;
        let fy = (c.y - 0.5).clamp(0.0, (h - 1) as f64);
        let x0f = fx.floor();
        let tx = fx - x0f;
        let x0 = (x0f as i64).rem_euclid(w as i64) as usize;
        let x1 = (x0 + 1) % w;
        let y0 = fy.floor() as usize;
        let ty = fy - y0 as f64;
        let y1 = (y0 + 1).min(h - 1);
        bilerp(&self.data, w, self.channels, [x0, x1], [y0, y1], tx, ty, out);
    }

    /// Rotates the frame about the polar axis by whole columns.
    pub fn roll_columns(&self, shift: isize) -> Self {
        let w = self.width as isize;
        let mut out = self.clone();
        for row in 0..self.height {
            for col in 0..self.width {
                let src = (col as isize - shift).rem_euclid(w) as usize;
                let di = (row * self.width + col) * self.channels;
                let si = (row * self.width + src) * self.channels;
                out.data[di..di + self.channels].copy_from_slice(&self.data[si..si + self.channels]);
            }
        }
        out
    }
}

#[allow(clippy::too_many_arguments)]
fn bilerp(
    data: &[f32],
    w: usize,
    channels: usize,
    xs: [usize; 2],
    ys: [usize; 2],
    tx: f64,
    ty: f64,
    out: &mut [f32],
) {
    let weights = [
        (1.0 - tx) * (1.0 - ty),
        tx * (1.0 - ty),
        (1.0 - tx) * ty,
        tx * ty,
    ];
    let idx = [
        (ys[0] * w + xs[0]) * channels,
        (ys[0] * w + xs[1]) * channels,
        (ys[1] * w + xs[0]) * channels,
        (ys[1] * w + xs[1]) * channels,
    ];
    for (ch, o) in out.iter_mut().enumerate().take(channels) {
        let mut acc = 0.0f64;
        for k in 0..4 {
            acc += weights[k] * data[idx[k] + ch] as f64;
        }
        *o = acc as f32;
    }
}

/// Bilinear sample of an equirect frame; see [`EquirectImage::sample_into`].
pub fn sample_bilinear(img: &EquirectImage, c: EquirectCoord) -> Vec<f32> {
    let mut out = vec![0.0; img.channels];
    img.sample_into(c, &mut out);
    out
}

/// A square rectilinear rendering of one viewport.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewportImage {
    viewport: Viewport,
    channels: usize,
    data: Vec<f32>,
}

impl ViewportImage {
    pub fn new(viewport: Viewport, channels: usize, data: Vec<f32>) -> Result<Self> {
        validate_channels(channels)?;
        let n = viewport.size * viewport.size * channels;
        if data.len() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n} samples"),
                actual: format!("{} samples", data.len()),
            });
        }
        Ok(Self {
            viewport,
            channels,
            data,
        })
    }

    pub fn viewport(&self) -> &Viewport {
        &self.viewport
    }

    pub fn size(&self) -> usize {
        self.viewport.size
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, col: usize, row: usize) -> &[f32] {
        let i = (row * self.size() + col) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Bilinear sample at continuous raster coordinates, clamped at all
    /// four borders.
    pub fn sample_into(&self, px: f64, py: f64, out: &mut [f32]) {
        let s = self.size();
        let last = (s - 1) as f64;
        let fx = (px - 0.5).clamp(0.0, last);
        let fy = (py - 0.5).clamp(0.0, last);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let tx = fx - x0 as f64;
        let ty = fy - y0 as f64;
        let x1 = (x0 + 1).min(s - 1);
        let y1 = (y0 + 1).min(s - 1);
        bilerp(&self.data, s, self.channels, [x0, x1], [y0, y1], tx, ty, out);
    }
}

/// Viewport-plane coordinates of the center of raster pixel `(col, row)`.
pub fn pixel_to_viewport_coord(col: f64, row: f64, size: usize) -> ViewportCoord {
    let s = size as f64;
    ViewportCoord::new(2.0 * col / s - 1.0, 1.0 - 2.0 * row / s)
}

/// Inverse of [`pixel_to_viewport_coord`] on continuous coordinates.
pub fn viewport_coord_to_pixel(c: ViewportCoord, size: usize) -> (f64, f64) {
    let s = size as f64;
    ((c.u + 1.0) / 2.0 * s, (1.0 - c.v) / 2.0 * s)
}

pub fn render_viewport(img: &EquirectImage, vp: &Viewport) -> ViewportImage {
    let frame = vp.frame();
    let s = vp.size;
    let ch = img.channels;
    let mut data = vec![0.0f32; s * s * ch];
    for row in 0..s {
        for col in 0..s {
            let c = pixel_to_viewport_coord(col as f64 + 0.5, row as f64 + 0.5, s);
            let d = vec_to_dir(frame.unproject(c));
            let e = dir_to_equirect(d, img.width, img.height);
            let i = (row * s + col) * ch;
            img.sample_into(e, &mut data[i..i + ch]);
        }
    }
    ViewportImage {
        viewport: *vp,
        channels: ch,
        data,
    }
}

/// Blending weight as a function of viewport-plane position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlendKernel {
    /// `(1 - |u|)(1 - |v|)`, vanishing on the border.
    #[default]
    Tent,
    /// Constant 1 over the footprint interior.
    Flat,
}

impl BlendKernel {
    pub fn weight(&self, c: ViewportCoord) -> f64 {
        match self {
            BlendKernel::Tent => (1.0 - c.u.abs()) * (1.0 - c.v.abs()),
            BlendKernel::Flat => 1.0,
        }
    }
}

/// Paired accumulator and weight rasters in equirect space.
#[derive(Debug, Clone)]
pub struct BlendAccumulator {
    width: usize,
    height: usize,
    channels: usize,
    kernel: BlendKernel,
    accum: Vec<f64>,
    weight: Vec<f64>,
    directions: Vec<[f64; 3]>,
}

/// Result of [`BlendAccumulator::finalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlendOutput {
    pub image: EquirectImage,
    /// Pixels whose weight stayed at or below [`WEIGHT_EPS`].
    pub fallback_count: usize,
}

impl BlendAccumulator {
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::with_kernel(width, height, channels, BlendKernel::default())
    }

    pub fn with_kernel(
        width: usize,
        height: usize,
        channels: usize,
        kernel: BlendKernel,
    ) -> Result<Self> {
        if width < 2 || height < 1 {
            return Err(invalid("accumulator", format!("{width}x{height} too small")));
        }
        validate_channels(channels)?;
        Ok(Self {
            width,
            height,
            channels,
            kernel,
            accum: vec![0.0; width * height * channels],
            weight: vec![0.0; width * height],
            directions: pixel_directions(width, height),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn accum(&self) -> &[f64] {
        &self.accum
    }

    /// Adds one viewport image. Pixels outside its footprint are untouched.
    pub fn accumulate(&mut self, vimg: &ViewportImage) -> Result<()> {
        if vimg.channels != self.channels {
            return Err(Error::DimensionMismatch {
                expected: format!("{} channels", self.channels),
                actual: format!("{} channels", vimg.channels),
            });
        }
        let vp = vimg.viewport();
        let frame = ViewportFrame::for_viewport(vp);
        let bounds = pixel_bounds(vp, self.width, self.height);
        let ch = self.channels;
        let mut value = [0.0f32; 3];
        for row in bounds.rows.clone() {
            for col in bounds.cols(self.width) {
                let i = row * self.width + col;
                let Some(c) = frame.project(self.directions[i]) else {
                    continue;
                };
                if !c.is_interior() {
                    continue;
                }
                let wgt = self.kernel.weight(c);
                if wgt <= 0.0 {
                    continue;
                }
                let (px, py) = viewport_coord_to_pixel(c, vp.size);
                vimg.sample_into(px, py, &mut value[..ch]);
                for (k, v) in value[..ch].iter().enumerate() {
                    self.accum[i * ch + k] += wgt * *v as f64;
                }
                self.weight[i] += wgt;
            }
        }
        Ok(())
    }

    /// Divides accumulator by weight; pixels with weight `<= WEIGHT_EPS` get
    /// `fallback` (one value per channel, or a single value for all).
    pub fn finalize(&self, fallback: &[f32]) -> Result<BlendOutput> {
        let ch = self.channels;
        if fallback.len() != ch && fallback.len() != 1 {
            return Err(Error::DimensionMismatch {
                expected: format!("1 or {ch} fallback values"),
                actual: format!("{} values", fallback.len()),
            });
        }
        let fb = |k: usize| fallback[if fallback.len() == 1 { 0 } else { k }];
        let mut data = vec![0.0f32; self.width * self.height * ch];
        let mut fallback_count = 0;
        for (i, &w) in self.weight.iter().enumerate() {
            if w > WEIGHT_EPS {
                for k in 0..ch {
                    data[i * ch + k] = (self.accum[i * ch + k] / w) as f32;
                }
            } else {
                fallback_count += 1;
                for k in 0..ch {
                    data[i * ch + k] = fb(k);
                }
            }
        }
        Ok(BlendOutput {
            image: EquirectImage::new(self.width, self.height, ch, data)?,
            fallback_count,
        })
    }
}

pub fn backproject_accumulate(acc: &mut BlendAccumulator, vimg: &ViewportImage) -> Result<()> {
    acc.accumulate(vimg)
}

pub fn finalize_blend(acc: &BlendAccumulator, fallback: &[f32]) -> Result<BlendOutput> {
    acc.finalize(fallback)
}

/// Resamples a frame to the detector's input size. The target must keep the
/// 2:1 aspect. Axes that shrink are box-filtered over the source
/// footprint; axes that grow are interpolated bilinearly (cyclic in x).
pub fn prepare_detector_input(
    img: &EquirectImage,
    target_w: usize,
    target_h: usize,
) -> Result<EquirectImage> {
    if target_w == 0 || target_h == 0 {
        return Err(invalid("target", "zero-sized target"));
    }
    if target_w != 2 * target_h {
        return Err(invalid(
            "target",
            format!("{target_w}x{target_h} is not 2:1"),
        ));
    }
    if target_w == img.width && target_h == img.height {
        return Ok(img.clone());
    }
    let ch = img.channels;
    let xw = axis_weights(img.width, target_w, true);
    let yw = axis_weights(img.height, target_h, false);

    let mut tmp = vec![0.0f64; img.height * target_w * ch];
    for row in 0..img.height {
        for (tx, taps) in xw.iter().enumerate() {
            for k in 0..ch {
                let mut acc = 0.0;
                for &(sx, wgt) in taps {
                    acc += wgt * img.data[(row * img.width + sx) * ch + k] as f64;
                }
                tmp[(row * target_w + tx) * ch + k] = acc;
            }
        }
    }
    let mut data = vec![0.0f32; target_w * target_h * ch];
    for (ty, taps) in yw.iter().enumerate() {
        for tx in 0..target_w {
            for k in 0..ch {
                let mut acc = 0.0;
                for &(sy, wgt) in taps {
                    acc += wgt * tmp[(sy * target_w + tx) * ch + k];
                }
                data[(ty * target_w + tx) * ch + k] = acc as f32;
            }
        }
    }
    EquirectImage::new(target_w, target_h, ch, data)
}

/// Per-output-sample taps `(source index, weight)` along one axis.
fn axis_weights(src: usize, dst: usize, cyclic: bool) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            if dst <= src {
                let a = i as f64 * scale;
                let b = (i + 1) as f64 * scale;
                let first = a.floor() as usize;
                let last = (b.ceil() as usize).min(src);
                (first..last)
                    .filter_map(|s| {
                        let overlap = b.min((s + 1) as f64) - a.max(s as f64);
                        (overlap > 0.0).then_some((s, overlap / scale))
                    })
                    .collect()
            } else {
                let pos = (i as f64 + 0.5) * scale - 0.5;
                let p0 = pos.floor();
                let t = pos - p0;
                let (s0, s1) = if cyclic {
                    let s0 = (p0 as i64).rem_euclid(src as i64) as usize;
                    (s0, (s0 + 1) % src)
                } else {
                    let s0 = p0.clamp(0.0, (src - 1) as f64) as usize;
                    let s1 = ((p0 + 1.0).clamp(0.0, (src - 1) as f64)) as usize;
                    (s0, s1)
                };
                vec![(s0, 1.0 - t), (s1, t)]
            }
        })
        .collect()
}

/// Peak signal-to-noise ratio in dB for signals in `[0, 1]`.
pub fn psnr(a: &EquirectImage, b: &EquirectImage) -> Result<f64> {
    if (a.width, a.height, a.channels) != (b.width, b.height, b.channels) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}x{}", a.width, a.height, a.channels),
            actual: format!("{}x{}x{}", b.width, b.height, b.channels),
        });
    }
    let mse = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        / a.data.len() as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    })
}
