use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ltew_core::baselines::{classical_warp, Kernel1D};
use ltew_core::geometry::TransformSpec;
use ltew_core::gradcheck;
use ltew_core::metrics::{psnr_with_count, reports_to_csv, MetricReport};
use ltew_core::model::FreqRecord;
use ltew_core::raster::read_mask;
use ltew_core::training::{run_training, TrainConfig};
use ltew_core::{ImageBuffer, LtewNet, ModelWeights, WarpOptions};

type CliResult<T = ()> = Result<T, String>;

#[derive(Parser)]
#[command(name = "ltew", version, about = "Continuous image warping with local texture estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Warp an image through a transform spec.
    Warp {
        #[arg(long)]
        input: PathBuf,
        /// One-record transform spec file.
        #[arg(long)]
        transform: PathBuf,
        /// Model weights; required for `--method ltew`.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Ltew)]
        method: Method,
        /// Queries per inference batch.
        #[arg(long, default_value_t = 4096)]
        chunk: usize,
        /// Also write the valid mask (8-bit gray, 255 = valid).
        #[arg(long)]
        mask_out: Option<PathBuf>,
        /// Raise small Jacobian diagonals to the training minimum before
        /// phase estimation.
        #[arg(long)]
        clamp_shape: bool,
    },
    /// Train a model from a key = value config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_weights: PathBuf,
        /// Print the loss every N steps.
        #[arg(long, default_value_t = 100)]
        log_every: usize,
    },
    /// PSNR (or masked mPSNR) of a prediction against ground truth.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Run the finite-difference gradient suite.
    GradCheck {
        /// Defaults to a fresh random seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Dump the estimated frequencies of every latent cell.
    FreqDump {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Ltew,
    Bicubic,
    Bilinear,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Warp {
            input,
            transform,
            weights,
            out,
            method,
            chunk,
            mask_out,
            clamp_shape,
        } => warp(&input, &transform, weights.as_deref(), &out, method, chunk, mask_out.as_deref(), clamp_shape),
        Command::Train {
            config,
            out_weights,
            log_every,
        } => train(&config, &out_weights, log_every),
        Command::Eval { gt, pred, mask, report } => eval(&gt, &pred, mask.as_deref(), &report),
        Command::GradCheck { seed } => grad_check(seed),
        Command::FreqDump { input, weights, out } => freq_dump(&input, &weights, &out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn at(path: &Path) -> impl Fn(ltew_core::Error) -> String + '_ {
    move |e| format!("{}: {e}", path.display())
}

fn read_image(path: &Path) -> CliResult<ImageBuffer> {
    ImageBuffer::read(path).map_err(|e| e.to_string())
}

fn load_net(path: &Path) -> CliResult<LtewNet<f32>> {
    let weights = ModelWeights::<f32>::load(path).map_err(at(path))?;
    LtewNet::from_weights(weights).map_err(at(path))
}

#[allow(clippy::too_many_arguments)]
fn warp(
    input: &Path,
    transform: &Path,
    weights: Option<&Path>,
    out: &Path,
    method: Method,
    chunk: usize,
    mask_out: Option<&Path>,
    clamp_shape: bool,
) -> CliResult {
    if chunk == 0 {
        return Err("--chunk must be positive".into());
    }
    let img = read_image(input)?;
    let text = std::fs::read_to_string(transform).map_err(|e| format!("{}: {e}", transform.display()))?;
    let spec: TransformSpec = text.parse().map_err(at(transform))?;
    let t = spec.build(img.size()).map_err(at(transform))?;
    let result = match method {
        Method::Ltew => {
            let weights = weights.ok_or("--weights is required for --method ltew")?;
            let opts = WarpOptions {
                chunk,
                clamp_shape,
                ..WarpOptions::default()
            };
            load_net(weights)?.warp_image(&img, &t, &opts).map_err(|e| e.to_string())?
        }
        Method::Bicubic => classical_warp(&img, &t, Kernel1D::Bicubic),
        Method::Bilinear => classical_warp(&img, &t, Kernel1D::Bilinear),
    };
    result.write(out).map_err(|e| e.to_string())?;
    if let Some(path) = mask_out {
        result.write_mask(path).map_err(|e| e.to_string())?;
    }
    eprintln!(
        "wrote {} ({}x{}, {} valid pixels)",
        out.display(),
        result.width(),
        result.height(),
        result.valid_count()
    );
    Ok(())
}

fn train(config: &Path, out_weights: &Path, log_every: usize) -> CliResult {
    let cfg = TrainConfig::from_file(config).map_err(at(config))?;
    let images = cfg.dataset.load().map_err(|e| e.to_string())?;
    eprintln!("training on {} images, {} parameters", images.len(), {
        let shapes = cfg.model.weight_shapes();
        shapes.iter().map(|(_, s)| s.iter().product::<usize>()).sum::<usize>()
    });
    let out = run_training(&cfg, &images, |row| {
        if log_every > 0 && row.step % log_every == 0 {
            eprintln!("step {:>6}  lr {:.2e}  loss {:.6}", row.step, row.lr, row.loss);
        }
    })
    .map_err(|e| e.to_string())?;
    out.net.weights().save(out_weights).map_err(at(out_weights))?;
    if let Some(last) = out.trace.last() {
        eprintln!("finished {} steps, final loss {:.6}", out.trace.len(), last.loss);
    }
    Ok(())
}

fn eval(gt: &Path, pred: &Path, mask: Option<&Path>, report: &Path) -> CliResult {
    let gt_img = read_image(gt)?;
    let pred_img = read_image(pred)?;
    let (metric, mask) = match mask {
        Some(path) => {
            let (size, m) = read_mask(path).map_err(|e| e.to_string())?;
            if size != gt_img.size() {
                return Err(format!("{}: mask size does not match the images", path.display()));
            }
            ("mpsnr", Some(m))
        }
        None => ("psnr", None),
    };
    let (value, valid_px) = psnr_with_count(&gt_img, &pred_img, mask.as_deref()).map_err(|e| e.to_string())?;
    let row = MetricReport {
        image: pred.display().to_string(),
        metric: metric.to_string(),
        value,
        valid_px,
    };
    std::fs::write(report, reports_to_csv(std::slice::from_ref(&row)))
        .map_err(|e| format!("{}: {e}", report.display()))?;
    println!("{metric} {value:.4} dB over {valid_px} pixels");
    Ok(())
}

fn grad_check(seed: Option<u64>) -> CliResult {
    let seed = seed.unwrap_or_else(rand::random);
    println!("gradient check, seed {seed}");
    let reports = gradcheck::run_suite(seed).map_err(|e| e.to_string())?;
    for r in &reports {
        println!("  {r}");
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        return Err(format!("{failed} gradient checks failed"));
    }
    Ok(())
}

fn freq_dump(input: &Path, weights: &Path, out: &Path) -> CliResult {
    let img = read_image(input)?;
    let net = load_net(weights)?;
    let z = net.encode(&img).map_err(|e| e.to_string())?;
    let fourier = net.estimate_fourier(&z).map_err(|e| e.to_string())?;
    let size = fourier.size();
    let mut csv = String::from(FreqRecord::CSV_HEADER);
    csv.push('\n');
    for r in fourier.freq_dump(0..size.h, 0..size.w) {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    std::fs::write(out, csv).map_err(|e| format!("{}: {e}", out.display()))?;
    Ok(())
}
