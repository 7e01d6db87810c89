//! One function per subcommand. Each reads and validates all of its inputs
//! before the first output file is written, and returns the text to print.

use std::fs;
use std::path::{Path, PathBuf};

use omniview::blur_metric::{global_blur, BlurConfig};
use omniview::fusion::{lift_detection, spherical_nms_with, Detection, MergeMode, ViewportDetection};
use omniview::projection::{
    prepare_detector_input, render_viewport, BlendAccumulator, BlendKernel, ViewportImage,
};
use omniview::tessellation::{coverage_fraction, make_tessellation, overlap_map};
use rayon::prelude::*;

use crate::config::TessellationParams;
use crate::error::{CliError, CliResult};
use crate::formats::{read_records, read_tessellation, records_to_string, tessellation_to_string, write_text};
use crate::raster::{quantize, read_equirect, read_raster, write_equirect, write_png_bytes};

/// Gray level of the brightest overlap count in the coverage image;
/// outlines are drawn at 255 above it.
const COVERAGE_MAX_LEVEL: f64 = 200.0;

pub fn viewport_file(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("{index:04}.png"))
}

pub fn viewports(params: &TessellationParams, out: &Path) -> CliResult<String> {
    let t = make_tessellation(params.count, params.fov, params.size)?;
    write_text(out, &tessellation_to_string(&t))?;
    Ok(format!(
        "viewports: {}\nfov: {}\nsize: {}\n",
        t.count(),
        t.fov(),
        t.size()
    ))
}

pub fn render(image: &Path, tessellation: &Path, out_dir: &Path, jobs: Option<usize>) -> CliResult<String> {
    let img = read_equirect(image)?;
    let t = read_tessellation(tessellation)?;
    if img.width() != 2 * img.height() {
        eprintln!(
            "warning: {} is {}x{}, not 2:1",
            image.display(),
            img.width(),
            img.height()
        );
    }
    if jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs:?} workers: {e}")))?;
    pool.install(|| {
        t.viewports().par_iter().try_for_each(|vp| {
            let v = render_viewport(&img, vp);
            let bytes: Vec<u8> = v.data().iter().map(|&x| quantize(x)).collect();
            write_png_bytes(&viewport_file(out_dir, vp.index), vp.size, vp.size, v.channels(), &bytes)
        })
    })?;
    Ok(format!("rendered: {}\n", t.count()))
}

pub fn blend(
    tessellation: &Path,
    viewport_dir: &Path,
    width: usize,
    height: usize,
    kernel: BlendKernel,
    out: &Path,
) -> CliResult<String> {
    let t = read_tessellation(tessellation)?;
    for vp in t.viewports() {
        let p = viewport_file(viewport_dir, vp.index);
        if !p.is_file() {
            return Err(CliError::Validation(format!(
                "viewport {} missing: {}",
                vp.index,
                p.display()
            )));
        }
    }
    let mut acc: Option<BlendAccumulator> = None;
    for vp in t.viewports() {
        let p = viewport_file(viewport_dir, vp.index);
        let r = read_raster(&p)?;
        if r.width != vp.size || r.height != vp.size {
            return Err(CliError::invalid(
                &p,
                format!(
                    "viewport {} is {}x{}, tessellation size is {}",
                    vp.index, r.width, r.height, vp.size
                ),
            ));
        }
        let acc = match &mut acc {
            Some(a) => a,
            None => acc.insert(BlendAccumulator::with_kernel(width, height, r.channels, kernel)?),
        };
        let vimg = ViewportImage::new(*vp, r.channels, r.data)?;
        acc.accumulate(&vimg)
            .map_err(|e| CliError::invalid(&p, format!("viewport {}: {e}", vp.index)))?;
    }
    let acc = acc.expect("tessellation is never empty");
    let fallback = vec![0.0; acc.channels()];
    let result = acc.finalize(&fallback)?;
    write_equirect(out, &result.image)?;
    Ok(format!("fallback_pixels: {}\n", result.fallback_count))
}

pub fn lift(input: &Path, tessellation: &Path, width: usize, height: usize, out: &Path) -> CliResult<String> {
    let t = read_tessellation(tessellation)?;
    let dets: Vec<ViewportDetection> = read_records(input)?;
    let mut lifted = Vec::with_capacity(dets.len());
    let mut skipped = 0;
    for (n, vd) in dets.iter().enumerate() {
        match lift_detection(vd, &t, width, height) {
            Ok(d) => lifted.push(d),
            Err(e @ omniview::Error::DegenerateBox { .. }) => {
                eprintln!("warning: record {}: {e}; skipped", n + 1);
                skipped += 1;
            }
            Err(e) => return Err(CliError::invalid(input, format!("record {}: {e}", n + 1))),
        }
    }
    write_text(out, &records_to_string(&lifted))?;
    Ok(format!("lifted: {}\nskipped: {skipped}\n", lifted.len()))
}

fn check_equirect_box(d: &Detection, width: usize) -> Result<(), String> {
    let w = width as f64;
    let finite = [d.score, d.x, d.y, d.bw, d.bh].iter().all(|v| v.is_finite());
    if !finite {
        return Err("non-finite field".into());
    }
    if !(0.0..=1.0).contains(&d.score) {
        return Err(format!("score {} not in [0, 1]", d.score));
    }
    if !(0.0..w).contains(&d.x) || !(d.bw > 0.0 && d.bw <= w) {
        return Err(format!("x {} / bw {} outside a {width}-px wide frame", d.x, d.bw));
    }
    if d.y < 0.0 || d.bh <= 0.0 {
        return Err(format!("y {} / bh {} invalid", d.y, d.bh));
    }
    Ok(())
}

pub fn nms(input: &Path, iou_threshold: f64, merge: MergeMode, width: usize, out: &Path) -> CliResult<String> {
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(CliError::Usage(format!("iou threshold {iou_threshold} not in [0, 1]")));
    }
    if width < 1 {
        return Err(CliError::Usage("width must be positive".into()));
    }
    let dets: Vec<Detection> = read_records(input)?;
    for (n, d) in dets.iter().enumerate() {
        check_equirect_box(d, width).map_err(|e| CliError::invalid(input, format!("record {}: {e}", n + 1)))?;
    }
    let kept = spherical_nms_with(&dets, iou_threshold, width, merge);
    write_text(out, &records_to_string(&kept))?;
    Ok(format!("input: {}\nkept: {}\n", dets.len(), kept.len()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"))
}

pub fn blur(image: &Path, config: &BlurConfig) -> CliResult<String> {
    let img = read_equirect(image)?;
    let r = global_blur(&img, config)?;
    Ok(format!(
        "edge_count: {}\ndiscarded_count: {}\nglobal_blur: {}\nmean_uncompensated_width: {}\ncompensated: {}\n",
        r.edge_count,
        r.discarded_count,
        fmt_opt(r.global_blur),
        fmt_opt(r.mean_uncompensated_width),
        r.compensated
    ))
}

pub fn coverage(
    tessellation: &Path,
    width: usize,
    height: usize,
    samples: usize,
    out: &Path,
) -> CliResult<String> {
    let t = read_tessellation(tessellation)?;
    let map = overlap_map(&t, width, height)?;
    let fraction = coverage_fraction(&t, samples)?;
    let scale = COVERAGE_MAX_LEVEL / map.max_count().max(1) as f64;
    let bytes: Vec<u8> = map
        .counts
        .iter()
        .zip(&map.outline)
        .map(|(&c, &edge)| if edge { 255 } else { (c as f64 * scale).round() as u8 })
        .collect();
    write_png_bytes(out, width, height, 1, &bytes)?;
    Ok(format!(
        "min_overlap: {}\nmax_overlap: {}\ncoverage_fraction: {fraction:.6}\n",
        map.min_count(),
        map.max_count()
    ))
}

pub fn prepare(image: &Path, target_w: usize, target_h: usize, out: &Path) -> CliResult<String> {
    let img = read_equirect(image)?;
    let resized = prepare_detector_input(&img, target_w, target_h)?;
    write_equirect(out, &resized)?;
    Ok(format!(
        "source: {}x{}\ntarget: {}x{}\n",
        img.width(),
        img.height(),
        resized.width(),
        resized.height()
    ))
}
