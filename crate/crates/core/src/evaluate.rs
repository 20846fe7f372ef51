//! Whole-dataset evaluation with frame-level parallelism.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::assignment::{score_frame, EvalConfig, FrameResult};
use crate::error::Error;
use crate::ground_truth::GroundTruthFrame;
use crate::pbox::ProbabilisticDetection;
use crate::report::{aggregate, per_class_breakdown, EvaluationSummary, Report, SummaryAccumulator};
use crate::scalar::Scalar;

/// Environment variable overriding the number of frame workers.
pub const WORKERS_ENV: &str = "PDQ_WORKERS";

/// Worker count from `PDQ_WORKERS`, else the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Per-frame results in ground-truth frame order, plus the global summary.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEvaluation<T> {
    pub frames: Vec<FrameResult<T>>,
    pub summary: EvaluationSummary<T>,
}

/// Scores every ground-truth frame against its detections.
///
/// Frames without detections score all their objects as false negatives;
/// detections on frames absent from the ground truth are an error.
/// Detection pixels are clipped to each frame's image unless `config`
/// already sets a clip rectangle. Results do not depend on `workers`.
pub fn evaluate_dataset<T: Scalar>(
    ground_truth: &[GroundTruthFrame],
    detections: &BTreeMap<u64, Vec<ProbabilisticDetection<T>>>,
    config: &EvalConfig<T>,
    workers: usize,
) -> Result<DatasetEvaluation<T>, Error> {
    let known: std::collections::HashSet<u64> = ground_truth.iter().map(|f| f.frame_index).collect();
    if let Some(k) = detections.keys().find(|k| !known.contains(k)) {
        return Err(Error::UnknownFrame(*k));
    }
    let empty = Vec::new();
    let score = |frame: &GroundTruthFrame| {
        let mut cfg = *config;
        if cfg.quality.clip.is_none() {
            cfg.quality.clip = Some(frame.image_rect());
        }
        let dets = detections.get(&frame.frame_index).unwrap_or(&empty);
        score_frame(&frame.objects, dets, &cfg)
    };
    let frames: Vec<FrameResult<T>> = if workers <= 1 {
        ground_truth.iter().map(score).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
        pool.install(|| ground_truth.par_iter().map(score).collect::<Result<_, _>>())?
    };
    let summary = aggregate(&frames);
    Ok(DatasetEvaluation { frames, summary })
}

/// Global, per-class and per-sequence views of an evaluation.
/// `ground_truth` must be the frames the evaluation was run on.
pub fn build_report<T: Scalar>(eval: &DatasetEvaluation<T>, ground_truth: &[GroundTruthFrame], class_names: &[String]) -> Report {
    let name = |c: usize| class_names.get(c).cloned().unwrap_or_else(|| c.to_string());
    let per_class = per_class_breakdown(&eval.frames).into_iter().map(|(c, s)| (name(c), s.to_f64())).collect();
    let mut by_sequence: BTreeMap<&str, SummaryAccumulator<T>> = BTreeMap::new();
    for (frame, result) in ground_truth.iter().zip(&eval.frames) {
        by_sequence.entry(frame.sequence.as_str()).or_default().add_frame(result);
    }
    let per_sequence = by_sequence.into_iter().map(|(s, acc)| (s.to_string(), acc.finish().to_f64())).collect();
    Report { summary: eval.summary.to_f64(), per_class, per_sequence }
}
