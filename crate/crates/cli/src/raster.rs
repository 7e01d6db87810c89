//! 8-bit PNG I/O with linear value mapping (`byte / 255`).

use std::path::Path;

use image::{DynamicImage, ExtendedColorType, ImageFormat};
use omniview::projection::EquirectImage;

use crate::error::{CliError, CliResult};

/// Decoded raster: width, height, channels (1 or 3) and values in [0, 1].
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

pub fn read_raster(path: &Path) -> CliResult<Raster> {
    let img = image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => CliError::io(path, e),
        source => CliError::Image {
            path: path.to_path_buf(),
            source,
        },
    })?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    let (channels, bytes) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw()),
        DynamicImage::ImageLumaA8(_) => (1, img.to_luma8().into_raw()),
        DynamicImage::ImageRgb8(b) => (3, b.into_raw()),
        DynamicImage::ImageRgba8(_) => (3, img.to_rgb8().into_raw()),
        other => {
            return Err(CliError::invalid(
                path,
                format!("unsupported pixel format {:?}, expected 8-bit gray or RGB", other.color()),
            ))
        }
    };
    Ok(Raster {
        width,
        height,
        channels,
        data: bytes.iter().map(|&b| b as f32 / 255.0).collect(),
    })
}

pub fn read_equirect(path: &Path) -> CliResult<EquirectImage> {
    let r = read_raster(path)?;
    EquirectImage::new(r.width, r.height, r.channels, r.data).map_err(|e| CliError::invalid(path, e))
}

/// Round-half-up quantization to 8 bits, clamped.
pub fn quantize(v: f32) -> u8 {
    (v as f64 * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn write_png(path: &Path, width: usize, height: usize, channels: usize, data: &[f32]) -> CliResult<()> {
    let bytes: Vec<u8> = data.iter().map(|&v| quantize(v)).collect();
    write_png_bytes(path, width, height, channels, &bytes)
}

pub fn write_png_bytes(
    path: &Path,
    width: usize,
    height: usize,
    channels: usize,
    bytes: &[u8],
) -> CliResult<()> {
    let color = match channels {
        1 => ExtendedColorType::L8,
        3 => ExtendedColorType::Rgb8,
        c => return Err(CliError::Validation(format!("cannot write {c}-channel image"))),
    };
    image::save_buffer_with_format(path, bytes, width as u32, height as u32, color, ImageFormat::Png)
        .map_err(|source| match source {
            image::ImageError::IoError(e) => CliError::io(path, e),
            source => CliError::Image {
                path: path.to_path_buf(),
                source,
            },
        })
}

pub fn write_equirect(path: &Path, img: &EquirectImage) -> CliResult<()> {
    write_png(path, img.width(), img.height(), img.channels(), img.data())
}
