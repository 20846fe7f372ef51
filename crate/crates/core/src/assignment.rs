//! Per-frame optimal assignment of detections to ground truths.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::ground_truth::{is_tiny, GroundTruthObject};
use crate::pbox::ProbabilisticDetection;
use crate::quality::{DetectionRaster, PairwiseQuality, QualityConfig};
use crate::scalar::Scalar;

/// Which (ground truth, detection) pairs may be matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchingMode {
    /// Any pair; label disagreement only lowers label quality.
    #[default]
    ClassAgnostic,
    /// Only pairs whose detection argmax equals the ground-truth class.
    SameClass,
}

/// Everything that shapes how a frame is scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig<T> {
    pub quality: QualityConfig<T>,
    pub matching: MatchingMode,
    /// Drop tiny ground truths (and their assigned detections) after matching.
    pub filter_tiny: bool,
}

impl<T: Scalar> Default for EvalConfig<T> {
    fn default() -> Self {
        Self { quality: QualityConfig::default(), matching: MatchingMode::default(), filter_tiny: true }
    }
}

/// A true positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match<T> {
    pub gt: usize,
    pub det: usize,
    pub quality: PairwiseQuality<T>,
}

/// Outcome of scoring one frame.
///
/// Every detection index appears in exactly one of `matches`,
/// `false_positive_dets` and `filtered_pairs`; every ground-truth index in
/// exactly one of `matches`, `false_negative_gts` and `filtered_pairs`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameResult<T> {
    pub frame_index: u64,
    pub matches: Vec<Match<T>>,
    pub false_positive_dets: Vec<usize>,
    pub false_negative_gts: Vec<usize>,
    pub filtered_pairs: Vec<(usize, Option<usize>)>,
    /// Class of each ground truth, by index.
    pub gt_classes: Vec<usize>,
    /// Most probable class of each detection, by index.
    pub det_classes: Vec<usize>,
}

impl<T: Scalar> FrameResult<T> {
    pub fn true_positives(&self) -> u64 {
        self.matches.len() as u64
    }

    pub fn false_positives(&self) -> u64 {
        self.false_positive_dets.len() as u64
    }

    pub fn false_negatives(&self) -> u64 {
        self.false_negative_gts.len() as u64
    }

    /// Sum of pPDQ over matches, accumulated in ground-truth order.
    pub fn total_ppdq(&self) -> T {
        self.matches.iter().fold(T::zero(), |acc, m| acc + m.quality.ppdq)
    }

    /// Checks the partition invariant for `num_gts` ground truths and `num_dets` detections.
    pub fn is_partition(&self, num_gts: usize, num_dets: usize) -> bool {
        let mut gt_seen = vec![0u8; num_gts];
        let mut det_seen = vec![0u8; num_dets];
        let bump = |v: &mut Vec<u8>, i: usize| match v.get_mut(i) {
            Some(c) => {
                *c += 1;
                true
            }
            None => false,
        };
        let mut ok = true;
        for m in &self.matches {
            ok &= bump(&mut gt_seen, m.gt) && bump(&mut det_seen, m.det) && m.quality.ppdq > T::zero();
        }
        for &d in &self.false_positive_dets {
            ok &= bump(&mut det_seen, d);
        }
        for &g in &self.false_negative_gts {
            ok &= bump(&mut gt_seen, g);
        }
        for &(g, d) in &self.filtered_pairs {
            ok &= bump(&mut gt_seen, g);
            if let Some(d) = d {
                ok &= bump(&mut det_seen, d);
            }
        }
        ok && gt_seen.iter().all(|c| *c == 1) && det_seen.iter().all(|c| *c == 1)
    }
}

/// One-to-one assignment maximizing the summed quality.
///
/// Rectangular matrices are implicitly padded with zeros. The returned
/// assignment always has `min(rows, cols)` pairs sorted by row: positive
/// pairs come from a Hungarian solve (ties nudged toward the
/// lexicographically smallest choice), and the remaining rows are paired in
/// ascending order with the remaining columns, all of which have quality zero
/// against them.
pub fn solve_assignment<T: Scalar>(quality: &[Vec<T>]) -> Vec<(usize, usize)> {
    let rows = quality.len();
    let cols = quality.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    debug_assert!(quality.iter().all(|r| r.len() == cols));
    let at = |r: usize, c: usize| quality[r][c];

    let mut pairs: Vec<(usize, usize)> = if rows <= cols {
        hungarian_min(rows, cols, |r, c| -at(r, c))
    } else {
        hungarian_min(cols, rows, |c, r| -at(r, c)).into_iter().map(|(c, r)| (r, c)).collect()
    };
    pairs.retain(|&(r, c)| at(r, c) > T::zero());
    polish_ties(&mut pairs, rows, cols, &at);

    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; cols];
    for &(r, c) in &pairs {
        row_used[r] = true;
        col_used[c] = true;
    }
    let free_cols: Vec<usize> = (0..cols).filter(|c| !col_used[*c]).collect();
    let free_rows = (0..rows).filter(|r| !row_used[*r]);
    pairs.extend(free_rows.zip(free_cols));
    pairs.sort_unstable();
    pairs
}

/// Classic O(n²m) Hungarian algorithm with potentials; `n <= m`.
/// Returns `(row, col)` for every row.
fn hungarian_min<T: Scalar>(n: usize, m: usize, cost: impl Fn(usize, usize) -> T) -> Vec<(usize, usize)> {
    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); m + 1];
    // p[j]: row (1-based) assigned to column j; column 0 is a sentinel.
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=m).filter(|&j| p[j] != 0).map(|j| (p[j] - 1, j - 1)).collect()
}

/// Exchanges that keep the total exactly unchanged but move the assignment
/// toward the lexicographically smallest one (duplicate detections, equal rows).
fn polish_ties<T: Scalar>(pairs: &mut [(usize, usize)], rows: usize, cols: usize, at: &impl Fn(usize, usize) -> T) {
    let mut changed = true;
    while changed {
        changed = false;
        pairs.sort_unstable();
        // Swap columns between two assigned rows.
        'swap: for a in 0..pairs.len() {
            for b in a + 1..pairs.len() {
                let ((r1, c1), (r2, c2)) = (pairs[a], pairs[b]);
                if c2 < c1
                    && at(r1, c2) > T::zero()
                    && at(r2, c1) > T::zero()
                    && at(r1, c2) + at(r2, c1) == at(r1, c1) + at(r2, c2)
                {
                    pairs[a] = (r1, c2);
                    pairs[b] = (r2, c1);
                    changed = true;
                    break 'swap;
                }
            }
        }
        if changed {
            continue;
        }
        let used_rows: Vec<bool> = (0..rows).map(|r| pairs.iter().any(|p| p.0 == r)).collect();
        let used_cols: Vec<bool> = (0..cols).map(|c| pairs.iter().any(|p| p.1 == c)).collect();
        'moves: for pair in pairs.iter_mut() {
            let (r, c) = *pair;
            // A lower free row with the same value takes this column.
            if let Some(r2) = (0..r).find(|&r2| !used_rows[r2] && at(r2, c) == at(r, c)) {
                *pair = (r2, c);
                changed = true;
                break 'moves;
            }
            // A lower free column with the same value replaces this one.
            if let Some(c2) = (0..c).find(|&c2| !used_cols[c2] && at(r, c2) == at(r, c)) {
                *pair = (r, c2);
                changed = true;
                break 'moves;
            }
        }
    }
}

/// Pairwise quality for every (ground truth, detection) pair; each detection
/// is rasterized once.
pub fn quality_matrix<T: Scalar>(
    gts: &[GroundTruthObject],
    dets: &[ProbabilisticDetection<T>],
    config: &EvalConfig<T>,
) -> Result<Vec<Vec<PairwiseQuality<T>>>, Error> {
    let rasters = dets
        .iter()
        .map(|d| DetectionRaster::new(&d.pbox, &config.quality))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(gts
        .iter()
        .map(|gt| {
            dets.iter()
                .zip(&rasters)
                .map(|(det, raster)| {
                    let q = raster.pairwise(gt, det, &config.quality);
                    match config.matching {
                        MatchingMode::SameClass if det.argmax_class() != gt.class_id => {
                            PairwiseQuality { ppdq: T::zero(), ..q }
                        }
                        _ => q,
                    }
                })
                .collect()
        })
        .collect())
}

pub(crate) fn check_single_frame<T: Scalar>(gts: &[GroundTruthObject], dets: &[ProbabilisticDetection<T>]) -> Result<u64, Error> {
    let mut indices = gts.iter().map(|g| g.frame_index).chain(dets.iter().map(|d| d.frame_index));
    let Some(expected) = indices.next() else {
        return Ok(0);
    };
    match indices.find(|f| *f != expected) {
        Some(found) => Err(Error::MixedFrames { expected, found }),
        None => Ok(expected),
    }
}

/// Turns an assignment into TP/FP/FN, demoting zero-quality pairs and then
/// removing tiny ground truths together with their assigned detection.
pub(crate) fn classify_assignment<T: Scalar>(
    frame_index: u64,
    gts: &[GroundTruthObject],
    dets: &[ProbabilisticDetection<T>],
    qualities: &[Vec<PairwiseQuality<T>>],
    assignment: &[(usize, usize)],
    filter_tiny: bool,
) -> FrameResult<T> {
    let mut det_of_gt: Vec<Option<usize>> = vec![None; gts.len()];
    for &(g, d) in assignment {
        det_of_gt[g] = Some(d);
    }
    let mut result = FrameResult {
        frame_index,
        gt_classes: gts.iter().map(|g| g.class_id).collect(),
        det_classes: dets.iter().map(|d| d.argmax_class()).collect(),
        ..FrameResult::default()
    };
    let mut det_used = vec![false; dets.len()];
    for (g, gt) in gts.iter().enumerate() {
        let assigned = det_of_gt[g];
        if let Some(d) = assigned {
            det_used[d] = true;
        }
        if filter_tiny && is_tiny(gt) {
            result.filtered_pairs.push((g, assigned));
            continue;
        }
        match assigned {
            Some(d) if qualities[g][d].ppdq > T::zero() => {
                result.matches.push(Match { gt: g, det: d, quality: qualities[g][d] });
            }
            Some(d) => {
                result.false_negative_gts.push(g);
                result.false_positive_dets.push(d);
            }
            None => result.false_negative_gts.push(g),
        }
    }
    result.false_positive_dets.extend((0..dets.len()).filter(|d| !det_used[*d]));
    result.false_positive_dets.sort_unstable();
    result
}

/// Scores one frame: pairwise qualities, optimal assignment, zero-quality
/// demotion and the post-match tiny-object filter.
pub fn score_frame<T: Scalar>(
    gts: &[GroundTruthObject],
    dets: &[ProbabilisticDetection<T>],
    config: &EvalConfig<T>,
) -> Result<FrameResult<T>, Error> {
    let frame_index = check_single_frame(gts, dets)?;
    let qualities = quality_matrix(gts, dets, config)?;
    let ppdq: Vec<Vec<T>> = qualities.iter().map(|row| row.iter().map(|q| q.ppdq).collect()).collect();
    let assignment = solve_assignment(&ppdq);
    Ok(classify_assignment(frame_index, gts, dets, &qualities, &assignment, config.filter_tiny))
}
