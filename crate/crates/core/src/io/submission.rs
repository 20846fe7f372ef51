use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{malformed, Diagnostic, DiagnosticKind, ValidationReport};
use crate::error::{CovarianceIssue, Error};
use crate::normal::check_covariance;
use crate::pbox::{GaussianCorner, PBox, ProbabilisticDetection, LABEL_MASS_TOLERANCE};
use crate::scalar::Scalar;

/// One detection as written in a submission file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub label_probs: Vec<f64>,
    /// Corner means `[x1, y1, x2, y2]`.
    pub bbox: [f64; 4],
    /// Top-left then bottom-right corner covariance; absent means zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covars: Option<[[[f64; 2]; 2]; 2]>,
}

impl DetectionRecord {
    pub fn to_detection<T: Scalar>(&self, frame_index: u64) -> Result<ProbabilisticDetection<T>, Error> {
        let b = self.bbox.map(T::lit);
        let cov = |m: [[f64; 2]; 2]| m.map(|r| r.map(T::lit));
        let zero = [[0.0; 2]; 2];
        let [c_tl, c_br] = self.covars.unwrap_or([zero, zero]);
        let pbox = PBox::new(GaussianCorner::new([b[0], b[1]], cov(c_tl))?, GaussianCorner::new([b[2], b[3]], cov(c_br))?)?;
        ProbabilisticDetection::new(pbox, self.label_probs.iter().map(|p| T::lit(*p)).collect(), frame_index)
    }

    fn check(&self, class_count: usize, frame: &str, record: usize, report: &mut ValidationReport) {
        let mut flag = |kind, msg: String| report.push(Diagnostic::new(kind, Some(frame), Some(record), msg));
        if self.label_probs.len() != class_count {
            flag(
                DiagnosticKind::WrongProbVectorLength,
                format!("{} label probabilities, expected {class_count}", self.label_probs.len()),
            );
        }
        if let Some((i, p)) = self.label_probs.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            flag(DiagnosticKind::InvalidProbability, format!("label_probs[{i}] = {p} outside [0, 1]"));
        } else {
            let total: f64 = self.label_probs.iter().sum();
            if total > 1.0 + LABEL_MASS_TOLERANCE {
                flag(DiagnosticKind::InvalidProbability, format!("label_probs sum to {total}"));
            }
        }
        if self.bbox.iter().any(|v| !v.is_finite()) {
            flag(DiagnosticKind::NonFinite, "bbox has non-finite coordinates".into());
        } else if self.bbox[0] > self.bbox[2] || self.bbox[1] > self.bbox[3] {
            flag(DiagnosticKind::InvertedBox, format!("bbox {:?} has x1 > x2 or y1 > y2", self.bbox));
        }
        for (name, m) in ["top-left", "bottom-right"].iter().zip(self.covars.iter().flatten()) {
            if let Err(issue) = check_covariance(*m) {
                let kind = match issue {
                    CovarianceIssue::NegativeVariance => DiagnosticKind::NegativeVariance,
                    CovarianceIssue::NonSymmetric => DiagnosticKind::NonSymmetricCovariance,
                    CovarianceIssue::NotPositiveSemidefinite => DiagnosticKind::NotPositiveSemidefinite,
                    CovarianceIssue::NonFinite => DiagnosticKind::NonFinite,
                };
                flag(kind, format!("{name} covariance {m:?}: {issue}"));
            }
        }
    }
}

/// Detections per frame index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubmissionDocument {
    pub frames: BTreeMap<u64, Vec<DetectionRecord>>,
}

#[derive(Serialize)]
struct Wire<'a> {
    frames: BTreeMap<String, &'a Vec<DetectionRecord>>,
}

impl SubmissionDocument {
    pub fn to_json(&self) -> String {
        let wire = Wire { frames: self.frames.iter().map(|(k, v)| (k.to_string(), v)).collect() };
        serde_json::to_string_pretty(&wire).expect("submission serializes")
    }

    pub fn detections<T: Scalar>(&self, frame_index: u64) -> Result<Vec<ProbabilisticDetection<T>>, Error> {
        self.frames
            .get(&frame_index)
            .map(|recs| recs.iter().map(|r| r.to_detection(frame_index)).collect())
            .unwrap_or_else(|| Ok(Vec::new()))
    }

    pub fn num_detections(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }
}

/// Length of the first label vector in a submission, if any record has one.
pub fn submission_class_count(bytes: &[u8]) -> Option<usize> {
    let root: Value = serde_json::from_slice(bytes).ok()?;
    root.get("frames")?
        .as_object()?
        .values()
        .filter_map(Value::as_array)
        .flatten()
        .find_map(|r| r.get("label_probs").and_then(Value::as_array).map(Vec::len))
}

/// Parses and validates a submission, collecting every violation.
///
/// Expected shape: `{"frames": {"<frame index>": [record, ...]}}`.
pub fn parse_submission(bytes: &[u8], class_count: usize) -> Result<SubmissionDocument, ValidationReport> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| malformed(format!("not valid JSON: {e}")))?;
    let frames = root
        .as_object()
        .and_then(|o| o.get("frames"))
        .and_then(Value::as_object)
        .ok_or_else(|| malformed("expected an object with a `frames` object"))?;
    let mut report = ValidationReport::default();
    let mut doc = SubmissionDocument::default();
    for (key, records) in frames {
        let Ok(index) = key.parse::<u64>() else {
            report.push(Diagnostic::new(DiagnosticKind::MalformedSyntax, Some(key), None, "frame key is not a non-negative integer"));
            continue;
        };
        let Some(records) = records.as_array() else {
            report.push(Diagnostic::new(DiagnosticKind::MalformedSyntax, Some(key), None, "frame entry is not an array"));
            continue;
        };
        let mut parsed = Vec::with_capacity(records.len());
        for (i, raw) in records.iter().enumerate() {
            match DetectionRecord::deserialize(raw) {
                Ok(rec) => {
                    rec.check(class_count, key, i, &mut report);
                    parsed.push(rec);
                }
                Err(e) => report.push(Diagnostic::new(DiagnosticKind::MalformedSyntax, Some(key), Some(i), e.to_string())),
            }
        }
        doc.frames.insert(index, parsed);
    }
    report.into_result(doc)
}
