//! `cmfd`: detect copy-move forgeries, synthesize corpora, evaluate and
//! benchmark.
//!
//! Exit status: 0 clean or inconclusive, 1 forged (detect only), 2 error.

mod annotate;
mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cmfd::imgcore::load_rgb;
use cmfd::pipeline::{
    benchmark_paths, corpus_images, describe_totals, evaluate_corpus, write_bench_csv, write_curves_csv,
    write_metrics_csv, ForgeryDetector,
};
use cmfd::synth::generate_corpus;
use cmfd::{GroundTruth, Verdict};

use config::ConfigArgs;

#[derive(Debug, Parser)]
#[command(name = "cmfd", version, about = "Keypoint-based copy-move forgery detection")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect duplicated regions in one image; writes report.json and
    /// annotated.png.
    Detect {
        image: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Ground truth to score matches against.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        /// Identifier stored in the report (default: file stem).
        #[arg(long)]
        image_id: Option<String>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Render a corpus from a JSON Lines manifest.
    Synth {
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score a corpus; writes metrics.csv and curves.csv.
    Eval {
        corpus: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Time detect, describe and match for both descriptor kinds; writes a
    /// CSV table.
    Bench {
        corpus: PathBuf,
        #[arg(long, default_value = "bench.csv")]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

type CmdResult = Result<ExitCode, String>;

fn err<E: std::fmt::Display>(ctx: impl AsRef<Path>) -> impl FnOnce(E) -> String {
    move |e| format!("{}: {e}", ctx.as_ref().display())
}

fn create(path: &Path) -> Result<BufWriter<File>, String> {
    File::create(path).map(BufWriter::new).map_err(err(path))
}

fn detect(image: &Path, out_dir: &Path, gt: Option<&Path>, image_id: Option<String>, cfg: &ConfigArgs) -> CmdResult {
    let cfg = cfg.resolve()?;
    let img = load_rgb(image).map_err(err(image))?;
    let gt = match gt {
        Some(p) => Some(GroundTruth::load(p).map_err(err(p))?),
        None => None,
    };
    let id = image_id.unwrap_or_else(|| {
        image
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let detector = ForgeryDetector::new(cfg).map_err(|e| e.to_string())?;
    let report = detector.detect_rgb(&img, &id, gt.as_ref()).map_err(err(image))?;

    std::fs::create_dir_all(out_dir).map_err(err(out_dir))?;
    let report_path = out_dir.join("report.json");
    let json = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
    std::fs::write(&report_path, json + "\n").map_err(err(&report_path))?;
    let annotated_path = out_dir.join("annotated.png");
    annotate::annotate(&img, &report)
        .save_with_format(&annotated_path, image::ImageFormat::Png)
        .map_err(err(&annotated_path))?;

    let cdr = report
        .correct_detection_ratio
        .map(|c| format!(", correct detection ratio {c:.2}%"))
        .unwrap_or_default();
    println!(
        "{}: {} ({} keypoints, {} matched pairs{cdr})",
        report.image_id,
        report.verdict.as_str(),
        report.keypoint_count,
        report.matched_pair_count
    );
    Ok(if report.verdict == Verdict::Forged {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn synth(manifest: &Path, out_dir: &Path) -> CmdResult {
    let items = generate_corpus(manifest, out_dir).map_err(err(manifest))?;
    println!("wrote {} items to {}", items.len(), out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn eval(corpus: &Path, out_dir: &Path, cfg: &ConfigArgs) -> CmdResult {
    let cfg = cfg.resolve()?;
    let out = evaluate_corpus(corpus, &cfg).map_err(err(corpus))?;
    std::fs::create_dir_all(out_dir).map_err(err(out_dir))?;
    let metrics = out_dir.join("metrics.csv");
    write_metrics_csv(&out.rows, create(&metrics)?).map_err(err(&metrics))?;
    let curves = out_dir.join("curves.csv");
    write_curves_csv(&out.curves, create(&curves)?).map_err(err(&curves))?;
    let mean = out
        .mean_cdr()
        .map(|m| format!("{m:.2}%"))
        .unwrap_or_else(|| "n/a".into());
    println!("{} images, mean correct detection ratio {mean}", out.rows.len());
    Ok(ExitCode::SUCCESS)
}

fn bench(corpus: &Path, out: &Path, cfg: &ConfigArgs) -> CmdResult {
    let cfg = cfg.resolve()?;
    let paths = corpus_images(corpus).map_err(err(corpus))?;
    let rows = benchmark_paths(&paths, &cfg).map_err(err(corpus))?;
    write_bench_csv(&rows, create(out)?).map_err(err(out))?;
    let (brisk, surf) = describe_totals(&rows);
    if brisk > 0.0 {
        println!("describe: binary {brisk:.4}s, surf baseline {surf:.4}s, speedup {:.2}x", surf / brisk);
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> CmdResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err("--threads must be at least 1".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    match &cli.command {
        Command::Detect {
            image,
            out_dir,
            ground_truth,
            image_id,
            cfg,
        } => detect(image, out_dir, ground_truth.as_deref(), image_id.clone(), cfg),
        Command::Synth { manifest, out_dir } => synth(manifest, out_dir),
        Command::Eval { corpus, out_dir, cfg } => eval(corpus, out_dir, cfg),
        Command::Bench { corpus, out, cfg } => bench(corpus, out, cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
