#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use image::{ExtendedColorType, ImageFormat};
use omniview::projection::EquirectImage;

pub fn omniview(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_omniview"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs the binary and returns stdout, panicking with stderr on failure.
pub fn ok(args: &[&str]) -> String {
    let out = omniview(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Value of a `key: value` line of a command's report.
pub fn field(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
        .unwrap_or_else(|| panic!("no `{key}` in {report:?}"))
        .to_string()
}

/// Writes an image with independent 8-bit quantization (round half up).
pub fn save(path: &Path, img: &EquirectImage) {
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|&v| (v as f64 * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8)
        .collect();
    let color = if img.channels() == 1 {
        ExtendedColorType::L8
    } else {
        ExtendedColorType::Rgb8
    };
    image::save_buffer_with_format(
        path,
        &bytes,
        img.width() as u32,
        img.height() as u32,
        color,
        ImageFormat::Png,
    )
    .unwrap();
}

/// Decodes an 8-bit PNG: (width, height, channels, bytes).
pub fn load_bytes(path: &Path) -> (usize, usize, usize, Vec<u8>) {
    let img = image::open(path).unwrap();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let ch = img.color().channel_count() as usize;
    (w, h, ch, img.into_bytes())
}

pub fn load(path: &Path) -> EquirectImage {
    let (w, h, ch, bytes) = load_bytes(path);
    EquirectImage::new(w, h, ch, bytes.iter().map(|&b| b as f32 / 255.0).collect()).unwrap()
}

pub fn psnr_bytes(a: &[u8], b: &[u8]) -> f64 {
    let mse: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        / a.len() as f64;
    10.0 * (255.0f64 * 255.0 / mse).log10()
}
