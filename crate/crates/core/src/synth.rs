//! Synthetic equirect frames with known structure, used by the test suites
//! and handy for trying the pipeline without real footage.

use crate::error::{invalid, Result};
use crate::projection::EquirectImage;
use crate::sphere_geom::{dir_to_vec, equirect_to_dir, EquirectCoord};

/// A smooth field defined on the sphere itself, so it is continuous across
/// the seam and at the poles. Values stay inside `[0.1, 0.9]`.
pub fn smooth_sphere_image(w: usize, h: usize, channels: usize) -> Result<EquirectImage> {
    const COEFFS: [[f64; 4]; 3] = [
        [0.20, 0.15, 0.10, 0.05],
        [-0.15, 0.10, 0.05, 0.20],
        [0.10, -0.20, 0.15, -0.05],
    ];
    EquirectImage::from_fn(w, h, channels, |col, row, ch| {
        let d = equirect_to_dir(
            EquirectCoord::new(col as f64 + 0.5, row as f64 + 0.5),
            w,
            h,
        );
        let v = dir_to_vec(d);
        let (x, y, z) = (v.x(), v.y(), v.z());
        let k = COEFFS[ch];
        (0.5 + k[0] * x + k[1] * y * z + k[2] * (x * x - y * y) + k[3] * z) as f32
    })
}

/// Periodic stripe profile sampled at continuous position `s`: a rising
/// ramp of width `ramp` starting at 0, high until `period / 2`, a falling
/// ramp of the same width, low for the rest of the period.
pub fn stripe_profile(s: f64, period: f64, ramp: f64) -> f64 {
    let t = s.rem_euclid(period);
    let half = period / 2.0;
    if t < ramp {
        t / ramp
    } else if t <= half {
        1.0
    } else if t < half + ramp {
        1.0 - (t - half) / ramp
    } else {
        0.0
    }
}

/// Vertical pinstripes on the rows whose center latitude lies in
/// `[lat_lo, lat_hi]`; every other row is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pinstripe {
    pub period: f64,
    /// Transition width in pixels before stretching.
    pub ramp: f64,
    /// Horizontal magnification of the pattern about pixel centers.
    pub stretch: f64,
    pub lat_lo: f64,
    pub lat_hi: f64,
}

impl Pinstripe {
    /// Unit-width black/white transitions, period 8, around the equator.
    pub fn sharp_equator() -> Self {
        Self {
            period: 8.0,
            ramp: 1.0,
            stretch: 1.0,
            lat_lo: -3.0,
            lat_hi: 3.0,
        }
    }

    pub fn render(&self, w: usize, h: usize) -> Result<EquirectImage> {
        if !(self.period > 2.0 * self.ramp && self.ramp > 0.0 && self.stretch > 0.0) {
            return Err(invalid("pinstripe", format!("{self:?}")));
        }
        EquirectImage::from_fn(w, h, 1, |col, row, _| {
            let lat = equirect_to_dir(EquirectCoord::new(0.5, row as f64 + 0.5), w, h).lat();
            if lat < self.lat_lo || lat > self.lat_hi {
                0.0
            } else {
                stripe_profile(col as f64 / self.stretch, self.period, self.ramp) as f32
            }
        })
    }
}

/// The compensation test pair: a ramp-2 pinstripe at the equator and the
/// same pattern magnified 2x horizontally around latitude 60, where the
/// projection stretches content by 2.
pub fn stretched_pinstripe_pair(w: usize, h: usize) -> Result<(EquirectImage, EquirectImage)> {
    let base = Pinstripe {
        period: 16.0,
        ramp: 2.0,
        stretch: 1.0,
        lat_lo: -2.0,
        lat_hi: 2.0,
    };
    let high = Pinstripe {
        stretch: 2.0,
        lat_lo: 58.0,
        lat_hi: 62.0,
        ..base
    };
    Ok((base.render(w, h)?, high.render(w, h)?))
}

/// Separable Gaussian blur, truncated at `ceil(3 sigma)`, cyclic in x and
/// clamped in y. `sigma == 0` returns the input unchanged.
pub fn gaussian_blur(img: &EquirectImage, sigma: f64) -> Result<EquirectImage> {
    if !(sigma >= 0.0) {
        return Err(invalid("sigma", format!("{sigma} is negative")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= sum);

    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let src = img.data();
    let mut tmp = vec![0.0f64; src.len()];
    for r in 0..h {
        for c in 0..w {
            for k in 0..ch {
                let mut acc = 0.0;
                for (i, kv) in kernel.iter().enumerate() {
                    let sc = (c as isize + i as isize - radius).rem_euclid(w as isize) as usize;
                    acc += kv * src[(r * w + sc) * ch + k] as f64;
                }
                tmp[(r * w + c) * ch + k] = acc;
            }
        }
    }
    let mut out = vec![0.0f32; src.len()];
    for r in 0..h {
        for c in 0..w {
            for k in 0..ch {
                let mut acc = 0.0;
                for (i, kv) in kernel.iter().enumerate() {
                    let sr = (r as isize + i as isize - radius).clamp(0, h as isize - 1) as usize;
                    acc += kv * tmp[(sr * w + c) * ch + k];
                }
                out[(r * w + c) * ch + k] = acc as f32;
            }
        }
    }
    EquirectImage::new(w, h, ch, out)
}
