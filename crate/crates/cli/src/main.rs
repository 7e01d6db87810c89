use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use omniview::blur_metric::{BlurConfig, BlurStatistic};
use omniview::fusion::MergeMode;
use omniview::projection::BlendKernel;
use omniview_cli::commands;
use omniview_cli::config::PipelineConfig;
use omniview_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "omniview", version, about = "Viewport-based processing of equirectangular images")]
struct Cli {
    /// TOML file with pipeline parameters; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Frame {
    /// Equirect width in pixels.
    #[arg(long)]
    width: Option<usize>,
    /// Equirect height in pixels.
    #[arg(long)]
    height: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a tessellation file.
    Viewports {
        #[arg(long)]
        count: Option<usize>,
        /// Field of view in degrees.
        #[arg(long)]
        fov: Option<f64>,
        /// Viewport raster size in pixels.
        #[arg(long, conflicts_with = "match_width")]
        size: Option<usize>,
        /// Pick the size that matches the pixel density of a source this wide.
        #[arg(long)]
        match_width: Option<usize>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Render every viewport of an equirect image to `<out>/NNNN.png`.
    Render {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        tessellation: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Render workers.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Back-project rendered viewports into one equirect image.
    Blend {
        #[arg(long)]
        tessellation: Option<PathBuf>,
        #[arg(long)]
        viewports: Option<PathBuf>,
        #[command(flatten)]
        frame: Frame,
        #[arg(long, value_enum, default_value_t = KernelArg::Tent)]
        kernel: KernelArg,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Map viewport detections to equirect boxes.
    Lift {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        tessellation: Option<PathBuf>,
        #[command(flatten)]
        frame: Frame,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Non-maximum suppression with longitude wrap-around.
    Nms {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        iou_threshold: Option<f64>,
        #[arg(long, value_enum)]
        merge: Option<MergeArg>,
        /// Equirect width in pixels.
        #[arg(long)]
        width: Option<usize>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Print the global blur estimate of an equirect image.
    Blur {
        #[arg(long)]
        image: PathBuf,
        /// Divide edge widths by the latitude stretch (default).
        #[arg(long, overrides_with = "no_compensate")]
        compensate: bool,
        #[arg(long, overrides_with = "compensate")]
        no_compensate: bool,
        #[arg(long)]
        grad_threshold: Option<f64>,
        #[arg(long)]
        stretch_max: Option<f64>,
        #[arg(long, value_enum)]
        statistic: Option<StatisticArg>,
    },
    /// Draw per-pixel viewport overlap counts and footprint outlines.
    Coverage {
        #[arg(long)]
        tessellation: Option<PathBuf>,
        #[command(flatten)]
        frame: Frame,
        /// Test directions for the coverage fraction.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Resize a frame to a 2:1 detector input size.
    Prepare {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        target_width: usize,
        #[arg(long)]
        target_height: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Tent,
    Flat,
}

#[derive(Clone, Copy, ValueEnum)]
enum MergeArg {
    Discard,
    WeightedMean,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatisticArg {
    Mean,
    Median,
}

fn required<T>(v: Option<T>, what: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("missing {what} (flag or config file)")))
}

fn frame(f: Frame, cfg: &PipelineConfig) -> CliResult<(usize, usize)> {
    Ok((
        required(f.width.or(cfg.io.width), "--width")?,
        required(f.height.or(cfg.io.height), "--height")?,
    ))
}

fn run(cli: Cli) -> CliResult<String> {
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let tess_path = |flag: Option<PathBuf>| required(flag.or(cfg.io.tessellation.clone()), "--tessellation");
    match cli.command {
        Command::Viewports {
            count,
            fov,
            size,
            match_width,
            out,
        } => {
            let mut p = cfg.tessellation.clone();
            p.count = count.unwrap_or(p.count);
            p.fov = fov.unwrap_or(p.fov);
            if let Some(w) = match_width {
                p.size = omniview::tessellation::matched_viewport_size(p.fov, w);
            }
            p.size = size.unwrap_or(p.size);
            commands::viewports(&p, &out)
        }
        Command::Render {
            image,
            tessellation,
            out,
            jobs,
        } => {
            let out = required(out.or(cfg.io.viewport_dir.clone()), "--out")?;
            commands::render(&image, &tess_path(tessellation)?, &out, jobs.or(cfg.jobs))
        }
        Command::Blend {
            tessellation,
            viewports,
            frame: f,
            kernel,
            out,
        } => {
            let (w, h) = frame(f, &cfg)?;
            let dir = required(viewports.or(cfg.io.viewport_dir.clone()), "--viewports")?;
            let kernel = match kernel {
                KernelArg::Tent => BlendKernel::Tent,
                KernelArg::Flat => BlendKernel::Flat,
            };
            commands::blend(&tess_path(tessellation)?, &dir, w, h, kernel, &out)
        }
        Command::Lift {
            detections,
            tessellation,
            frame: f,
            out,
        } => {
            let (w, h) = frame(f, &cfg)?;
            commands::lift(&detections, &tess_path(tessellation)?, w, h, &out)
        }
        Command::Nms {
            detections,
            iou_threshold,
            merge,
            width,
            out,
        } => {
            let merge = match merge {
                Some(MergeArg::Discard) => MergeMode::Discard,
                Some(MergeArg::WeightedMean) => MergeMode::WeightedMean,
                None => cfg.fusion.merge,
            };
            let thr = iou_threshold.unwrap_or(cfg.fusion.iou_threshold);
            let w = required(width.or(cfg.io.width), "--width")?;
            commands::nms(&detections, thr, merge, w, &out)
        }
        Command::Blur {
            image,
            compensate,
            no_compensate,
            grad_threshold,
            stretch_max,
            statistic,
        } => {
            let b = &cfg.blur;
            let config = BlurConfig {
                grad_threshold: grad_threshold.unwrap_or(b.grad_threshold),
                stretch_max: stretch_max.unwrap_or(b.stretch_max),
                statistic: match statistic {
                    Some(StatisticArg::Mean) => BlurStatistic::Mean,
                    Some(StatisticArg::Median) => BlurStatistic::Median,
                    None => b.statistic,
                },
                compensate: if no_compensate {
                    false
                } else {
                    compensate || b.compensate
                },
            };
            commands::blur(&image, &config)
        }
        Command::Coverage {
            tessellation,
            frame: f,
            samples,
            out,
        } => {
            let (w, h) = frame(f, &cfg)?;
            commands::coverage(&tess_path(tessellation)?, w, h, samples, &out)
        }
        Command::Prepare {
            image,
            target_width,
            target_height,
            out,
        } => commands::prepare(&image, target_width, target_height, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
