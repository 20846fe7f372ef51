//! Probability-based Detection Quality (PDQ) scoring.
//!
//! Detections are probabilistic bounding boxes whose corners are Gaussian;
//! each is compared pixel-wise against ground-truth segments, matched
//! optimally per frame and aggregated into a single dataset score.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiation.

pub mod assignment;
pub mod error;
pub mod evaluate;
pub mod ground_truth;
pub mod heatmap;
pub mod io;
pub mod normal;
pub mod pbox;
pub mod quality;
pub mod rect;
pub mod report;
pub mod scalar;
pub mod synth;

pub use assignment::{score_frame, solve_assignment, EvalConfig, FrameResult, Match, MatchingMode};
pub use error::{CovarianceIssue, Error};
pub use evaluate::{build_report, evaluate_dataset, worker_count, DatasetEvaluation};
pub use ground_truth::{compute_stats, compute_stats_filtered, is_tiny, tight_bbox, DatasetStats, GroundTruthFrame, GroundTruthObject, SegmentMask};
pub use heatmap::{rasterize, rasterize_within, Heatmap};
pub use normal::{bivariate_normal_cdf, standard_bivariate_normal_cdf, standard_normal_cdf, Covariance2};
pub use pbox::{pixel_inclusion_probability, support_region, GaussianCorner, PBox, ProbabilisticDetection, DEFAULT_SUPPORT_THRESHOLD};
pub use quality::{pairwise_pdq, BackgroundNormalization, PairwiseQuality, QualityConfig};
pub use rect::PixelRect;
pub use report::{aggregate, per_class_breakdown, render_report, EvaluationSummary, Report, ReportFormat};
pub use scalar::Scalar;

pub type PBoxF64 = PBox<f64>;
pub type PBoxF32 = PBox<f32>;
pub type DetectionF64 = ProbabilisticDetection<f64>;
pub type DetectionF32 = ProbabilisticDetection<f32>;
pub type HeatmapF64 = Heatmap<f64>;
pub type FrameResultF64 = FrameResult<f64>;
pub type SummaryF64 = EvaluationSummary<f64>;
pub type EvalConfigF64 = EvalConfig<f64>;
