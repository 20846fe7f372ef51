use thiserror::Error;

/// Why a covariance matrix was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CovarianceIssue {
    #[error("negative variance")]
    NegativeVariance,
    #[error("covariance matrix is not symmetric")]
    NonSymmetric,
    #[error("covariance matrix is not positive semi-definite")]
    NotPositiveSemidefinite,
    #[error("covariance matrix has non-finite entries")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid covariance: {0}")]
    InvalidCovariance(CovarianceIssue),
    #[error("support threshold {0} outside (0, 0.5)")]
    InvalidThreshold(f64),
    #[error("inverted box: top-left mean lies right of or below bottom-right mean")]
    InvertedBox,
    #[error("non-finite corner mean")]
    NonFiniteMean,
    #[error("invalid label probabilities: {0}")]
    InvalidLabelProbabilities(String),
    #[error("segment mask has no set pixels")]
    EmptyMask,
    #[error("mask data length {found} does not match {expected} pixels")]
    MaskSizeMismatch { expected: usize, found: usize },
    #[error("frame indices differ within one frame: expected {expected}, found {found}")]
    MixedFrames { expected: u64, found: u64 },
    #[error("brute-force scoring supports at most 6x6 frames, got {gts} gts x {dets} dets")]
    TooLarge { gts: usize, dets: usize },
    #[error("detections reference frame {0}, which has no ground truth")]
    UnknownFrame(u64),
    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),
    #[error("unknown report format `{0}`")]
    UnknownFormat(String),
    #[error("malformed report: {0}")]
    MalformedReport(String),
}
