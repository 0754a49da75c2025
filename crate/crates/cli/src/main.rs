use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use edgetrace_core::engine::{fd_check, gradient_image, GradConfig, Loss};
use edgetrace_core::io::{read_pfm, write_pfm, write_png_preview, write_signed_png_preview};
use edgetrace_core::optimize::{optimize, AdamConfig};
use edgetrace_core::render::{render, ImageBuffer, RenderConfig};
use edgetrace_core::scene::{load_scene, Scene};

/// Differentiable triangle-mesh path tracer.
#[derive(Parser)]
#[command(name = "edgetrace", version)]
struct Cli {
    /// Worker threads (default: EDGETRACE_THREADS or all cores). Results
    /// are identical for any value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RenderOpts {
    /// Scene description (JSON).
    scene: PathBuf,
    /// Samples per pixel.
    #[arg(long, default_value_t = 16)]
    spp: u32,
    /// Maximum indirect bounces.
    #[arg(long, default_value_t = 1)]
    max_bounces: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl RenderOpts {
    fn config(&self) -> RenderConfig {
        RenderConfig { spp: self.spp, max_bounces: self.max_bounces, seed: self.seed }
    }
}

#[derive(Args)]
struct GradOpts {
    /// Screen-space edge samples for camera-visibility gradients.
    #[arg(long, default_value_t = 10_000)]
    primary_edge_samples: usize,
    /// Edge samples per bounce per pixel sample for shadow/occlusion
    /// gradients. 0 disables secondary edge sampling.
    #[arg(long, default_value_t = 1)]
    secondary_edge_samples: u32,
    /// Loss for gradient/optimization commands.
    #[arg(long, value_parser = parse_loss, default_value = "l2")]
    loss: Loss,
    /// Step size of the central-difference oracle.
    #[arg(long, default_value_t = 1e-3)]
    fd_step: f64,
}

impl GradOpts {
    fn config(&self, render: RenderConfig) -> GradConfig {
        GradConfig {
            render,
            primary_edge_samples: self.primary_edge_samples,
            secondary_edge_samples: self.secondary_edge_samples,
            loss: self.loss,
            fd_step: self.fd_step,
        }
    }
}

fn parse_loss(s: &str) -> Result<Loss, String> {
    match s.to_ascii_lowercase().as_str() {
        "l2" => Ok(Loss::L2),
        "l1" => Ok(Loss::L1),
        other => Err(format!("unknown loss {other:?} (expected l1 or l2)")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene to a PFM image.
    Render {
        #[command(flatten)]
        opts: RenderOpts,
        /// Output PFM path.
        #[arg(long)]
        out: PathBuf,
        /// Optional tonemapped PNG preview.
        #[arg(long)]
        png: Option<PathBuf>,
    },
    /// Per-pixel derivative image for one scene parameter.
    GradImage {
        #[command(flatten)]
        opts: RenderOpts,
        #[command(flatten)]
        grad: GradOpts,
        /// Parameter path, e.g. mesh[0].translation.x
        #[arg(long)]
        param: String,
        /// Output PFM path.
        #[arg(long)]
        out: PathBuf,
        /// Optional signed red/blue PNG preview.
        #[arg(long)]
        png: Option<PathBuf>,
    },
    /// Compare the analytic loss gradient against finite differences.
    /// Exits 1 if the relative L1 error exceeds the tolerance.
    FdCheck {
        #[command(flatten)]
        opts: RenderOpts,
        #[command(flatten)]
        grad: GradOpts,
        /// Target image (PFM). Defaults to black.
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long, default_value_t = 0.01)]
        tolerance: f64,
        /// Write a JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Fit registered parameters to a target image with Adam.
    Optimize {
        #[command(flatten)]
        opts: RenderOpts,
        #[command(flatten)]
        grad: GradOpts,
        /// Target image (PFM).
        #[arg(long)]
        target: PathBuf,
        #[arg(long, default_value_t = 300)]
        iterations: u32,
        #[arg(long, default_value_t = 1e-2)]
        learning_rate: f64,
        /// Enable Adam bias correction (off by default).
        #[arg(long)]
        bias_correction: bool,
        /// Append one JSON line per iteration here.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Write a JSON report (final parameters and loss) here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    /// A requested check did not pass (exit 1).
    CheckFailed(String),
    /// Bad input: unreadable files, invalid scenes, unknown parameters
    /// (exit 2).
    Usage(String),
}

fn load(path: &PathBuf) -> Result<Scene, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    load_scene(&text).map_err(|e| CliError::Usage(format!("invalid scene {}: {e}", path.display())))
}

fn load_target(path: &PathBuf) -> Result<ImageBuffer, CliError> {
    read_pfm(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Usage(format!("i/o error: {e}"))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Render { opts, out, png } => {
            let scene = load(&opts.scene)?;
            let image = render(&scene, &opts.config());
            write_pfm(&out, &image).map_err(io_err)?;
            if let Some(p) = png {
                write_png_preview(&p, &image).map_err(io_err)?;
            }
            eprintln!("rendered {}x{} ({} spp)", image.width, image.height, opts.spp);
            Ok(())
        }
        Command::GradImage { opts, grad, param, out, png } => {
            let scene = load(&opts.scene)?;
            let cfg = grad.config(opts.config());
            let image = gradient_image(&scene, &param, &cfg)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            write_pfm(&out, &image).map_err(io_err)?;
            if let Some(p) = png {
                write_signed_png_preview(&p, &image).map_err(io_err)?;
            }
            eprintln!("gradient image for {param}");
            Ok(())
        }
        Command::FdCheck { opts, grad, target, tolerance, report } => {
            let scene = load(&opts.scene)?;
            let cfg = grad.config(opts.config());
            let target = match target {
                Some(p) => load_target(&p)?,
                None => {
                    let (w, h) = scene.camera.resolution;
                    ImageBuffer::new(w, h)
                }
            };
            if (target.width, target.height) != scene.camera.resolution {
                return Err(CliError::Usage(format!(
                    "target is {}x{} but the camera renders {}x{}",
                    target.width, target.height, scene.camera.resolution.0, scene.camera.resolution.1
                )));
            }
            let r = fd_check(&scene, &target, &cfg);
            let pass = r.rel_l1 <= tolerance;
            if let Some(path) = report {
                let json = serde_json::json!({
                    "rel_l1": r.rel_l1,
                    "tolerance": tolerance,
                    "pass": pass,
                    "analytic": r.analytic.values,
                    "fd": r.fd.values,
                });
                fs::write(&path, serde_json::to_string_pretty(&json).unwrap()).map_err(io_err)?;
            }
            println!(
                "fd-check: rel_l1={:.6} tolerance={} -> {}",
                r.rel_l1,
                tolerance,
                if pass { "PASS" } else { "FAIL" }
            );
            if pass {
                Ok(())
            } else {
                Err(CliError::CheckFailed(format!(
                    "relative L1 error {:.6} exceeds {tolerance}",
                    r.rel_l1
                )))
            }
        }
        Command::Optimize {
            opts,
            grad,
            target,
            iterations,
            learning_rate,
            bias_correction,
            trajectory,
            report,
        } => {
            let scene = load(&opts.scene)?;
            let target = load_target(&target)?;
            if (target.width, target.height) != scene.camera.resolution {
                return Err(CliError::Usage("target resolution mismatch".into()));
            }
            let cfg = grad.config(opts.config());
            let adam = AdamConfig {
                learning_rate,
                bias_correction,
                iterations,
                ..AdamConfig::default()
            };
            let mut log: Option<BufWriter<fs::File>> = match &trajectory {
                Some(p) => Some(BufWriter::new(fs::File::create(p).map_err(io_err)?)),
                None => None,
            };
            let result = optimize(&scene, &target, &cfg, &adam, |rec| {
                if let Some(w) = log.as_mut() {
                    let line = serde_json::json!({
                        "iter": rec.iter,
                        "loss": rec.loss,
                        "params": rec.params,
                        "wall_ms": rec.wall_ms,
                    });
                    // line-buffered so a crash keeps the prefix
                    let _ = writeln!(w, "{line}");
                    let _ = w.flush();
                }
                eprintln!("iter {:4}  loss {:.6e}", rec.iter, rec.loss);
            })
            .map_err(|e| CliError::Usage(e.to_string()))?;
            if let Some(path) = report {
                let paths: Vec<&str> = scene
                    .registry
                    .entries()
                    .iter()
                    .map(|e| e.path.as_str())
                    .collect();
                let json = serde_json::json!({
                    "final_loss": result.final_loss,
                    "iterations": iterations,
                    "parameter_paths": paths,
                    "params": result.params,
                });
                fs::write(&path, serde_json::to_string_pretty(&json).unwrap()).map_err(io_err)?;
            }
            println!("optimize: final loss {:.6e}", result.final_loss);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("EDGETRACE_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    if let Some(n) = threads {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            eprintln!("warning: thread pool already initialized");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::CheckFailed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
