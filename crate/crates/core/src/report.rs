//! Dataset-level aggregation and report rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assignment::FrameResult;
use crate::error::Error;
use crate::scalar::Scalar;

/// Column headers, in contract order.
pub const REPORT_COLUMNS: [&str; 7] = [
    "PDQ",
    "Overall Quality",
    "Spatial Quality",
    "Label Quality",
    "True Positives",
    "False Positives",
    "False Negatives",
];

/// PDQ score with its breakdown statistics.
///
/// The three quality columns are means over true positives.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvaluationSummary<T> {
    pub pdq: T,
    pub overall_quality: T,
    pub spatial_quality: T,
    pub label_quality: T,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

impl<T: Scalar> EvaluationSummary<T> {
    /// Rebuilds a summary from published totals: `pdq = overall · TP / (TP + FP + FN)`.
    pub fn from_totals(
        overall_quality: T,
        spatial_quality: T,
        label_quality: T,
        true_positives: u64,
        false_positives: u64,
        false_negatives: u64,
    ) -> Self {
        let denom = true_positives + false_positives + false_negatives;
        let pdq = if denom == 0 || true_positives == 0 {
            T::zero()
        } else {
            overall_quality * T::lit(true_positives as f64) / T::lit(denom as f64)
        };
        Self { pdq, overall_quality, spatial_quality, label_quality, true_positives, false_positives, false_negatives }
    }

    pub fn to_f64(&self) -> EvaluationSummary<f64> {
        EvaluationSummary {
            pdq: self.pdq.to_f64_lossy(),
            overall_quality: self.overall_quality.to_f64_lossy(),
            spatial_quality: self.spatial_quality.to_f64_lossy(),
            label_quality: self.label_quality.to_f64_lossy(),
            true_positives: self.true_positives,
            false_positives: self.false_positives,
            false_negatives: self.false_negatives,
        }
    }
}

/// Running sums; merging two accumulators is associative and commutative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SummaryAccumulator<T> {
    pub sum_ppdq: T,
    pub sum_spatial: T,
    pub sum_label: T,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

impl<T: Scalar> SummaryAccumulator<T> {
    pub fn add_frame(&mut self, frame: &FrameResult<T>) {
        for m in &frame.matches {
            self.sum_ppdq = self.sum_ppdq + m.quality.ppdq;
            self.sum_spatial = self.sum_spatial + m.quality.spatial_quality;
            self.sum_label = self.sum_label + m.quality.label_quality;
        }
        self.true_positives += frame.true_positives();
        self.false_positives += frame.false_positives();
        self.false_negatives += frame.false_negatives();
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.sum_ppdq = self.sum_ppdq + other.sum_ppdq;
        self.sum_spatial = self.sum_spatial + other.sum_spatial;
        self.sum_label = self.sum_label + other.sum_label;
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
        self
    }

    pub fn finish(&self) -> EvaluationSummary<T> {
        let denom = self.true_positives + self.false_positives + self.false_negatives;
        let tp = T::lit(self.true_positives as f64);
        let mean = |s: T| if self.true_positives == 0 { T::zero() } else { s / tp };
        let pdq = if denom == 0 {
            log::warn!("no ground truths and no detections: PDQ is undefined, reporting 0");
            T::zero()
        } else {
            self.sum_ppdq / T::lit(denom as f64)
        };
        EvaluationSummary {
            pdq,
            overall_quality: mean(self.sum_ppdq),
            spatial_quality: mean(self.sum_spatial),
            label_quality: mean(self.sum_label),
            true_positives: self.true_positives,
            false_positives: self.false_positives,
            false_negatives: self.false_negatives,
        }
    }
}

/// PDQ over all frames: summed pPDQ divided by `TP + FP + FN`.
pub fn aggregate<T: Scalar>(frames: &[FrameResult<T>]) -> EvaluationSummary<T> {
    let mut acc = SummaryAccumulator::default();
    for f in frames {
        acc.add_frame(f);
    }
    acc.finish()
}

/// Per-class summaries. Matches and false negatives count toward the
/// ground-truth class, false positives toward the detection's most probable class.
pub fn per_class_breakdown<T: Scalar>(frames: &[FrameResult<T>]) -> BTreeMap<usize, EvaluationSummary<T>> {
    let mut acc: BTreeMap<usize, SummaryAccumulator<T>> = BTreeMap::new();
    for f in frames {
        for m in &f.matches {
            let a = acc.entry(f.gt_classes[m.gt]).or_default();
            a.sum_ppdq = a.sum_ppdq + m.quality.ppdq;
            a.sum_spatial = a.sum_spatial + m.quality.spatial_quality;
            a.sum_label = a.sum_label + m.quality.label_quality;
            a.true_positives += 1;
        }
        for &d in &f.false_positive_dets {
            acc.entry(f.det_classes[d]).or_default().false_positives += 1;
        }
        for &g in &f.false_negative_gts {
            acc.entry(f.gt_classes[g]).or_default().false_negatives += 1;
        }
    }
    acc.into_iter().map(|(k, a)| (k, a.finish())).collect()
}

/// Output encoding of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "table" => Ok(Self::Table),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::UnknownFormat(s.to_string())),
        }
    }
}

/// A global summary plus labelled breakdown rows.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Report {
    pub summary: EvaluationSummary<f64>,
    pub per_class: Vec<(String, EvaluationSummary<f64>)>,
    pub per_sequence: Vec<(String, EvaluationSummary<f64>)>,
}

/// One row of a rendered report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scope: String,
    pub name: String,
    pub summary: EvaluationSummary<f64>,
}

impl Report {
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut rows = vec![ReportRow { scope: "all".into(), name: "all".into(), summary: self.summary }];
        for (scope, list) in [("class", &self.per_class), ("sequence", &self.per_sequence)] {
            rows.extend(list.iter().map(|(name, s)| ReportRow { scope: scope.into(), name: name.clone(), summary: *s }));
        }
        rows
    }
}

fn summary_cells(s: &EvaluationSummary<f64>) -> [String; 7] {
    [
        format!("{:.3}", s.pdq),
        format!("{:.3}", s.overall_quality),
        format!("{:.3}", s.spatial_quality),
        format!("{:.3}", s.label_quality),
        s.true_positives.to_string(),
        s.false_positives.to_string(),
        s.false_negatives.to_string(),
    ]
}

/// The seven statistics separated by two spaces, e.g.
/// `0.141  0.482  0.384  0.737  98916  41645  197451`.
pub fn format_summary_row(s: &EvaluationSummary<f64>) -> String {
    summary_cells(s).join("  ")
}

pub fn render_report(report: &Report, format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => render_table(report),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("report serializes") + "\n",
    }
}

fn render_table(report: &Report) -> String {
    let rows = report.rows();
    let labels: Vec<String> = rows
        .iter()
        .map(|r| if r.scope == "all" { "all".to_string() } else { format!("{}:{}", r.scope, r.name) })
        .collect();
    let cells: Vec<[String; 7]> = rows.iter().map(|r| summary_cells(&r.summary)).collect();
    let label_w = labels.iter().map(String::len).chain(["Scope".len()]).max().unwrap_or(0);
    let widths: Vec<usize> = (0..7)
        .map(|i| cells.iter().map(|c| c[i].len()).chain([REPORT_COLUMNS[i].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let _ = write!(out, "{:<label_w$}", "Scope");
    for (h, w) in REPORT_COLUMNS.iter().zip(&widths) {
        let _ = write!(out, "  {h:>w$}");
    }
    out.push('\n');
    for (label, row) in labels.iter().zip(&cells) {
        let _ = write!(out, "{label:<label_w$}");
        for (v, w) in row.iter().zip(&widths) {
            let _ = write!(out, "  {v:>w$}");
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render_csv(report: &Report) -> String {
    let mut out = format!("scope,name,{}\n", REPORT_COLUMNS.join(","));
    for row in report.rows() {
        let _ = writeln!(out, "{},{},{}", csv_field(&row.scope), csv_field(&row.name), summary_cells(&row.summary).join(","));
    }
    out
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = vec![String::new()];
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                chars.next();
                fields.last_mut().unwrap().push('"');
            }
            ('"', _) => quoted = !quoted,
            (',', false) => fields.push(String::new()),
            _ => fields.last_mut().unwrap().push(c),
        }
    }
    fields
}

/// Parses the CSV produced by [`render_report`].
pub fn parse_csv_report(text: &str) -> Result<Vec<ReportRow>, Error> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::MalformedReport("empty input".into()))?;
    let expected = format!("scope,name,{}", REPORT_COLUMNS.join(","));
    if header.trim() != expected {
        return Err(Error::MalformedReport(format!("unexpected header `{header}`")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f = split_csv_line(line);
            if f.len() != 9 {
                return Err(Error::MalformedReport(format!("row {}: expected 9 fields, got {}", i + 1, f.len())));
            }
            let real = |k: usize| f[k].parse::<f64>().map_err(|e| Error::MalformedReport(format!("row {}: {e}", i + 1)));
            let int = |k: usize| f[k].parse::<u64>().map_err(|e| Error::MalformedReport(format!("row {}: {e}", i + 1)));
            Ok(ReportRow {
                scope: f[0].clone(),
                name: f[1].clone(),
                summary: EvaluationSummary {
                    pdq: real(2)?,
                    overall_quality: real(3)?,
                    spatial_quality: real(4)?,
                    label_quality: real(5)?,
                    true_positives: int(6)?,
                    false_positives: int(7)?,
                    false_negatives: int(8)?,
                },
            })
        })
        .collect()
}
