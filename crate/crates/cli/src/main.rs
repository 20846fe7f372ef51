use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pdq_core::io::{self, ValidationReport};
use pdq_core::synth::{synthetic_dataset, CovarianceModel, Fixture, PerturbationSpec, SceneSpec};
use pdq_core::{
    build_report, compute_stats, compute_stats_filtered, evaluate_dataset, rasterize_within, render_report, worker_count,
    BackgroundNormalization, EvalConfig, MatchingMode, PixelRect, ProbabilisticDetection, QualityConfig, ReportFormat,
    DEFAULT_SUPPORT_THRESHOLD,
};

/// Probability-based detection quality scoring.
#[derive(Parser)]
#[command(name = "pdq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a detection submission against ground truth.
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        det: PathBuf,
        #[arg(long)]
        classes: PathBuf,
        #[arg(long, default_value = "table")]
        format: String,
        /// Inclusion probabilities below this are treated as zero.
        #[arg(long, default_value_t = DEFAULT_SUPPORT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Matching::ClassAgnostic)]
        matching: Matching,
        #[arg(long, value_enum, default_value_t = Normalization::GroundTruth)]
        background_normalization: Normalization,
        /// Keep tiny ground-truth objects instead of filtering them after matching.
        #[arg(long)]
        keep_tiny: bool,
        /// Frame workers; defaults to PDQ_WORKERS or the core count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check a submission for structural problems.
    Validate {
        #[arg(long)]
        det: PathBuf,
        #[arg(long)]
        classes: PathBuf,
    },
    /// Dataset statistics for a ground-truth file.
    Stats {
        #[arg(long)]
        gt: PathBuf,
        /// Class list; defaults to the names found in the file.
        #[arg(long)]
        classes: Option<PathBuf>,
        /// Drop tiny objects before counting.
        #[arg(long)]
        filter_tiny: bool,
    },
    /// Write a grayscale heatmap of one frame's detections.
    Render {
        #[arg(long)]
        det: PathBuf,
        #[arg(long)]
        frame: u64,
        #[arg(long)]
        out: PathBuf,
        /// Ground truth providing the image size.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long, requires = "height")]
        width: Option<u32>,
        #[arg(long, requires = "width")]
        height: Option<u32>,
        #[arg(long, default_value_t = DEFAULT_SUPPORT_THRESHOLD)]
        threshold: f64,
    },
    /// Generate a seeded synthetic fixture (gt.json, det.json, classes.txt).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        frames: usize,
        #[arg(long, default_value_t = 2)]
        sequences: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        translation_sigma: f64,
        #[arg(long, default_value_t = 0.0)]
        scale_sigma: f64,
        #[arg(long, default_value_t = 0.0)]
        label_flip: f64,
        #[arg(long, default_value_t = 1.0)]
        confidence: f64,
        /// `zero`, `fixed:<variance>` or `percentage:<fraction>`.
        #[arg(long, default_value = "zero")]
        covariance: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Matching {
    ClassAgnostic,
    SameClass,
}

#[derive(Clone, Copy, ValueEnum)]
enum Normalization {
    GroundTruth,
    Detection,
}

enum Failure {
    Validation(String),
    Io(String),
}

impl From<ValidationReport> for Failure {
    fn from(r: ValidationReport) -> Self {
        Failure::Validation(r.to_string())
    }
}

impl From<pdq_core::Error> for Failure {
    fn from(e: pdq_core::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn read_classes(path: &Path) -> Result<Vec<String>, Failure> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Failure::Validation(format!("{}: not UTF-8", path.display())))?;
    Ok(io::parse_class_list(&text)?)
}

fn load_detections(doc: &io::SubmissionDocument) -> Result<BTreeMap<u64, Vec<ProbabilisticDetection<f64>>>, Failure> {
    doc.frames.keys().map(|k| Ok((*k, doc.detections::<f64>(*k)?))).collect()
}

fn main() -> ExitCode {
    env_logger::Builder::new().filter_level(log::LevelFilter::Warn).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprint!("{msg}");
            if !msg.ends_with('\n') {
                eprintln!();
            }
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Evaluate { gt, det, classes, format, threshold, out, matching, background_normalization, keep_tiny, workers } => {
            let format: ReportFormat = format.parse()?;
            let class_names = read_classes(&classes)?;
            let gt_doc = io::parse_ground_truth(&read(&gt)?, &class_names)?;
            let sub = io::parse_submission(&read(&det)?, class_names.len())?;
            let mut quality = QualityConfig::with_threshold(threshold)?;
            quality.background_normalization = match background_normalization {
                Normalization::GroundTruth => BackgroundNormalization::GroundTruthSize,
                Normalization::Detection => BackgroundNormalization::DetectionSize,
            };
            let config = EvalConfig {
                quality,
                matching: match matching {
                    Matching::ClassAgnostic => MatchingMode::ClassAgnostic,
                    Matching::SameClass => MatchingMode::SameClass,
                },
                filter_tiny: !keep_tiny,
            };
            let detections = load_detections(&sub)?;
            let eval = evaluate_dataset(&gt_doc.frames, &detections, &config, workers.unwrap_or_else(worker_count))?;
            let text = render_report(&build_report(&eval, &gt_doc.frames, &class_names), format);
            match out {
                Some(path) => write(&path, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Validate { det, classes } => {
            let class_names = read_classes(&classes)?;
            let sub = io::parse_submission(&read(&det)?, class_names.len())?;
            println!("ok: {} frames, {} detections", sub.frames.len(), sub.num_detections());
            Ok(())
        }
        Command::Stats { gt, classes, filter_tiny } => {
            let bytes = read(&gt)?;
            let class_names = match classes {
                Some(path) => read_classes(&path)?,
                None => io::ground_truth_class_names(&bytes)?,
            };
            let doc = io::parse_ground_truth(&bytes, &class_names)?;
            let stats = if filter_tiny { compute_stats_filtered(&doc.frames) } else { compute_stats(&doc.frames) };
            print!("{}", stats.render_table(Some(&class_names)));
            Ok(())
        }
        Command::Render { det, frame, out, gt, width, height, threshold } => {
            let bytes = read(&det)?;
            let class_count = io::submission_class_count(&bytes).unwrap_or(0);
            let sub = io::parse_submission(&bytes, class_count)?;
            let dets = sub.detections::<f64>(frame)?;
            let image = match (gt, width.zip(height)) {
                (_, Some((w, h))) => Some(PixelRect::image(w, h)),
                (Some(path), None) => {
                    let gt_bytes = read(&path)?;
                    let names = io::ground_truth_class_names(&gt_bytes)?;
                    let doc = io::parse_ground_truth(&gt_bytes, &names)?;
                    let f = doc.frame(frame).ok_or_else(|| Failure::Validation(format!("frame {frame} not in ground truth")))?;
                    Some(f.image_rect())
                }
                (None, None) => None,
            };
            render(&dets, image, threshold, &out)
        }
        Command::Synth { out, frames, sequences, seed, translation_sigma, scale_sigma, label_flip, confidence, covariance } => {
            let covariance = parse_covariance(&covariance)?;
            let scene = SceneSpec::default();
            let perturbation = PerturbationSpec {
                translation_sigma,
                scale_sigma,
                label_flip_probability: label_flip,
                label_confidence: confidence,
                covariance,
                num_classes: scene.num_classes,
            };
            let (gts, dets) = synthetic_dataset(&scene, &perturbation, frames, sequences, seed)?;
            let names: Vec<String> = (0..scene.num_classes).map(|c| format!("class{c}")).collect();
            Fixture::new(&gts, &dets, &names).write_to(&out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))
        }
    }
}

fn parse_covariance(text: &str) -> Result<CovarianceModel, Failure> {
    let bad = || Failure::Validation(format!("bad covariance model `{text}`"));
    let value = |v: &str| v.parse::<f64>().map_err(|_| bad());
    match text.split_once(':') {
        None if text == "zero" => Ok(CovarianceModel::Zero),
        Some(("fixed", v)) => Ok(CovarianceModel::Fixed(value(v)?)),
        Some(("percentage", v)) => Ok(CovarianceModel::Percentage(value(v)?)),
        _ => Err(bad()),
    }
}

/// Per-pixel maximum over detections, scaled to 0..=255. Without an image
/// size the canvas spans from the origin to the furthest support region.
fn render(dets: &[ProbabilisticDetection<f64>], image: Option<PixelRect>, threshold: f64, out: &Path) -> Result<(), Failure> {
    let canvas = match image {
        Some(r) => r,
        None => {
            let mut extent = PixelRect::new(0, 0, 0, 0);
            for d in dets {
                let s = pdq_core::support_region(&d.pbox, threshold)?;
                extent.x_max = extent.x_max.max(s.x_max);
                extent.y_max = extent.y_max.max(s.y_max);
            }
            extent
        }
    };
    let (w, h) = (canvas.width() as u32, canvas.height() as u32);
    let mut img = image::GrayImage::new(w, h);
    for d in dets {
        let heat = rasterize_within(&d.pbox, threshold, &canvas)?;
        let r = heat.rect();
        for y in r.y_min..=r.y_max {
            for x in r.x_min..=r.x_max {
                let v = (heat.get(x, y) * 255.0).round() as u8;
                let px = img.get_pixel_mut(x as u32, y as u32);
                px.0[0] = px.0[0].max(v);
            }
        }
    }
    img.save(out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))
}
