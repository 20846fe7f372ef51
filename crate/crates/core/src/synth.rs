//! Synthetic scenes, perturbed detections and brute-force reference scorers.
//!
//! The reference paths here are deliberately naive: a per-pixel double loop
//! for the losses, Monte Carlo sampling for inclusion probabilities and full
//! enumeration for the assignment.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::assignment::{classify_assignment, quality_matrix, check_single_frame, EvalConfig, FrameResult};
use crate::error::Error;
use crate::ground_truth::{GroundTruthFrame, GroundTruthObject, SegmentMask};
use crate::io::{serialize_ground_truth, DetectionRecord, SubmissionDocument};
use crate::pbox::{pixel_center, pixel_inclusion_probability, GaussianCorner, PBox, ProbabilisticDetection};
use crate::quality::{BackgroundNormalization, PROBABILITY_CLAMP};
use crate::rect::PixelRect;
use crate::scalar::Scalar;

/// Largest frame the brute-force scorer accepts, per side.
pub const BRUTE_FORCE_LIMIT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Rectangle,
    Ellipse,
    /// A rectangle with one quadrant removed.
    LShape,
}

/// Parameters of a random scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    pub max_objects: usize,
    pub num_classes: usize,
    pub min_side: i64,
    pub max_side: i64,
    pub shapes: Vec<ShapeKind>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            max_objects: 4,
            num_classes: 3,
            min_side: 12,
            max_side: 40,
            shapes: vec![ShapeKind::Rectangle, ShapeKind::Ellipse, ShapeKind::LShape],
        }
    }
}

/// Planted objects on an otherwise empty image.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub width: u32,
    pub height: u32,
    pub seed: u64,
    pub frame_index: u64,
    pub objects: Vec<GroundTruthObject>,
}

fn shape_mask(kind: ShapeKind, r: &PixelRect, corner: u8) -> SegmentMask {
    match kind {
        ShapeKind::Rectangle => SegmentMask::filled(r),
        ShapeKind::Ellipse => {
            let cx = (r.x_min + r.x_max) as f64 / 2.0;
            let cy = (r.y_min + r.y_max) as f64 / 2.0;
            let ax = r.width() as f64 / 2.0;
            let ay = r.height() as f64 / 2.0;
            SegmentMask::from_pixels((r.y_min..=r.y_max).flat_map(|y| (r.x_min..=r.x_max).map(move |x| (x, y))).filter(|&(x, y)| {
                let dx = (x as f64 - cx) / ax;
                let dy = (y as f64 - cy) / ay;
                dx * dx + dy * dy <= 1.0
            }))
        }
        ShapeKind::LShape => {
            let mx = r.x_min + r.width() / 2;
            let my = r.y_min + r.height() / 2;
            SegmentMask::from_pixels((r.y_min..=r.y_max).flat_map(|y| (r.x_min..=r.x_max).map(move |x| (x, y))).filter(|&(x, y)| {
                let right = x >= mx;
                let lower = y >= my;
                (right as u8) | ((lower as u8) << 1) != corner
            }))
        }
    }
}

impl SyntheticScene {
    /// Places up to `spec.max_objects` non-overlapping shapes; identical
    /// seeds give identical scenes.
    pub fn generate(spec: &SceneSpec, seed: u64, frame_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut placed: Vec<PixelRect> = Vec::new();
        let mut objects = Vec::new();
        let max_w = spec.max_side.min(spec.width as i64);
        let max_h = spec.max_side.min(spec.height as i64);
        let mut attempts = 0;
        while objects.len() < spec.max_objects && attempts < 100 * spec.max_objects.max(1) && !spec.shapes.is_empty() {
            attempts += 1;
            let w = rng.gen_range(spec.min_side.min(max_w)..=max_w);
            let h = rng.gen_range(spec.min_side.min(max_h)..=max_h);
            let x = rng.gen_range(0..=spec.width as i64 - w);
            let y = rng.gen_range(0..=spec.height as i64 - h);
            let kind = spec.shapes[rng.gen_range(0..spec.shapes.len())];
            let class_id = rng.gen_range(0..spec.num_classes.max(1));
            let corner = rng.gen_range(0..4u8);
            let rect = PixelRect::new(x, y, x + w - 1, y + h - 1);
            let margin = PixelRect::new(x - 1, y - 1, x + w, y + h);
            if placed.iter().any(|p| !p.intersect(&margin).is_empty()) {
                continue;
            }
            let mask = shape_mask(kind, &rect, corner);
            if let Ok(obj) = GroundTruthObject::new(class_id, objects.len() as u64, mask, frame_index) {
                placed.push(rect);
                objects.push(obj);
            }
        }
        Self { width: spec.width, height: spec.height, seed, frame_index, objects }
    }

    pub fn into_frame(self, sequence: impl Into<String>) -> GroundTruthFrame {
        GroundTruthFrame { frame_index: self.frame_index, sequence: sequence.into(), width: self.width, height: self.height, objects: self.objects }
    }

    pub fn image_rect(&self) -> PixelRect {
        PixelRect::image(self.width, self.height)
    }
}

/// How corner covariances are assigned to generated detections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovarianceModel {
    Zero,
    /// The same isotropic variance (pixels²) on both corners.
    Fixed(f64),
    /// Corner standard deviations equal to this fraction of the box width and height.
    Percentage(f64),
}

/// Noise applied when turning planted objects into detections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    /// Standard deviation of the box-center shift, in pixels.
    pub translation_sigma: f64,
    /// Standard deviation of the relative size change.
    pub scale_sigma: f64,
    pub label_flip_probability: f64,
    /// Probability mass on the reported class; the rest is shared evenly.
    pub label_confidence: f64,
    pub covariance: CovarianceModel,
    pub num_classes: usize,
}

impl PerturbationSpec {
    /// Exact boxes, zero covariance, full confidence in the true class.
    pub fn perfect(num_classes: usize) -> Self {
        Self {
            translation_sigma: 0.0,
            scale_sigma: 0.0,
            label_flip_probability: 0.0,
            label_confidence: 1.0,
            covariance: CovarianceModel::Zero,
            num_classes,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |what: &str| Err(Error::InvalidPerturbation(what.to_string()));
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        let prob = |v: f64| (0.0..=1.0).contains(&v);
        if !nonneg(self.translation_sigma) || !nonneg(self.scale_sigma) {
            return bad("noise standard deviations must be finite and non-negative");
        }
        if !prob(self.label_flip_probability) || !prob(self.label_confidence) {
            return bad("probabilities must lie in [0, 1]");
        }
        if self.num_classes == 0 {
            return bad("at least one class is required");
        }
        match self.covariance {
            CovarianceModel::Fixed(v) | CovarianceModel::Percentage(v) if !nonneg(v) => bad("covariance parameter must be non-negative"),
            _ => Ok(()),
        }
    }
}

/// One perturbed detection per planted object. Deterministic in the scene seed;
/// the covariance model does not change the random draws.
pub fn generate<T: Scalar>(spec: &PerturbationSpec, scene: &SyntheticScene) -> Result<Vec<ProbabilisticDetection<T>>, Error> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    rng.set_stream(1);
    let shift = Normal::new(0.0, spec.translation_sigma).expect("validated sigma");
    let scale = Normal::new(0.0, spec.scale_sigma).expect("validated sigma");
    scene
        .objects
        .iter()
        .map(|obj| {
            let r = obj.bbox();
            let (x1, y1, x2, y2) = (r.x_min as f64, r.y_min as f64, (r.x_max + 1) as f64, (r.y_max + 1) as f64);
            let (dx, dy) = (shift.sample(&mut rng), shift.sample(&mut rng));
            let (sw, sh) = (scale.sample(&mut rng), scale.sample(&mut rng));
            let flip = rng.gen_bool(spec.label_flip_probability);
            let other = if spec.num_classes > 1 { rng.gen_range(0..spec.num_classes - 1) } else { 0 };

            let (w, h) = (x2 - x1, y2 - y1);
            let (nw, nh) = ((w * (1.0 + sw)).max(0.0), (h * (1.0 + sh)).max(0.0));
            let (cx, cy) = ((x1 + x2) / 2.0 + dx, (y1 + y2) / 2.0 + dy);
            let corners = if spec.translation_sigma == 0.0 && spec.scale_sigma == 0.0 {
                [x1, y1, x2, y2]
            } else {
                [cx - nw / 2.0, cy - nh / 2.0, cx + nw / 2.0, cy + nh / 2.0]
            };
            let (vx, vy) = match spec.covariance {
                CovarianceModel::Zero => (0.0, 0.0),
                CovarianceModel::Fixed(v) => (v, v),
                CovarianceModel::Percentage(p) => ((p * nw).powi(2), (p * nh).powi(2)),
            };

            let true_class = obj.class_id.min(spec.num_classes - 1);
            let reported = if flip && spec.num_classes > 1 { (true_class + 1 + other) % spec.num_classes } else { true_class };
            let mut probs = vec![0.0; spec.num_classes];
            if spec.num_classes > 1 {
                let rest = (1.0 - spec.label_confidence) / (spec.num_classes - 1) as f64;
                probs.iter_mut().for_each(|p| *p = rest);
            }
            probs[reported] = spec.label_confidence;

            let c = corners.map(T::lit);
            let cov2 = |a: f64, b: f64| [[T::lit(a), T::zero()], [T::zero(), T::lit(b)]];
            let pbox = PBox::new(GaussianCorner::new([c[0], c[1]], cov2(vx, vy))?, GaussianCorner::new([c[2], c[3]], cov2(vx, vy))?)?;
            ProbabilisticDetection::new(pbox, probs.into_iter().map(T::lit).collect(), scene.frame_index)
        })
        .collect()
}

/// Monte Carlo estimate of the inclusion probability at `point`, with its
/// binomial standard error. Corners are sampled independently from their
/// Gaussians and the point counts when it lies in the closed sampled box.
pub fn mc_inclusion_probability<T: Scalar>(point: [f64; 2], pbox: &PBox<T>, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = |c: &GaussianCorner<T>| {
        let m = c.mean().map(|v| v.to_f64_lossy());
        let cov = c.covariance().to_matrix().map(|r| r.map(|v| v.to_f64_lossy()));
        // Cholesky factor of a PSD 2x2 matrix.
        let l11 = cov[0][0].max(0.0).sqrt();
        let l21 = if l11 > 0.0 { cov[1][0] / l11 } else { 0.0 };
        let l22 = (cov[1][1] - l21 * l21).max(0.0).sqrt();
        (m, l11, l21, l22)
    };
    let tl = sampler(pbox.top_left());
    let br = sampler(pbox.bottom_right());
    let draw = |(m, l11, l21, l22): ([f64; 2], f64, f64, f64), rng: &mut ChaCha8Rng| {
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        [m[0] + l11 * z1, m[1] + l21 * z1 + l22 * z2]
    };
    let mut hits = 0usize;
    for _ in 0..samples {
        let a = draw(tl, &mut rng);
        let b = draw(br, &mut rng);
        if a[0] <= point[0] && point[0] <= b[0] && a[1] <= point[1] && point[1] <= b[1] {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    (p, (p * (1.0 - p) / samples as f64).sqrt())
}

/// Foreground and background losses from a plain loop over every pixel of `frame`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaiveLosses {
    pub foreground: f64,
    pub background: f64,
    /// Whether any segment pixel had nonzero probability.
    pub overlaps: bool,
}

/// Reference loss computation; assumes the segment lies inside `frame`.
pub fn naive_pair_losses<T: Scalar>(
    gt: &GroundTruthObject,
    pbox: &PBox<T>,
    threshold: f64,
    normalization: BackgroundNormalization,
    frame: &PixelRect,
) -> NaiveLosses {
    let bbox = gt.bbox();
    let mut fg = 0.0;
    let mut bg = 0.0;
    let mut detection_pixels = 0usize;
    let mut overlaps = false;
    for y in frame.y_min..=frame.y_max {
        for x in frame.x_min..=frame.x_max {
            let mut p = pixel_inclusion_probability([pixel_center::<T>(x), pixel_center::<T>(y)], pbox).to_f64_lossy();
            if p < threshold {
                p = 0.0;
            }
            if gt.segment().contains(x, y) {
                fg -= p.max(PROBABILITY_CLAMP).ln();
                overlaps |= p > 0.0;
            }
            if p > threshold {
                detection_pixels += 1;
                if !bbox.contains(x, y) {
                    bg -= (1.0 - p).max(PROBABILITY_CLAMP).ln();
                }
            }
        }
    }
    let n = gt.pixel_count() as f64;
    let bg_norm = match normalization {
        BackgroundNormalization::GroundTruthSize => n,
        BackgroundNormalization::DetectionSize => detection_pixels as f64,
    };
    NaiveLosses { foreground: fg / n, background: if bg_norm > 0.0 { bg / bg_norm } else { 0.0 }, overlaps }
}

/// Scores a frame by trying every maximal one-to-one assignment.
///
/// The best total wins; among equal totals the first in lexicographic order
/// of per-ground-truth detection indices (unassigned last) is kept. Pairwise
/// qualities come from the regular kernel so totals are bit-comparable.
pub fn brute_force_frame_score<T: Scalar>(
    gts: &[GroundTruthObject],
    dets: &[ProbabilisticDetection<T>],
    config: &EvalConfig<T>,
) -> Result<FrameResult<T>, Error> {
    if gts.len() > BRUTE_FORCE_LIMIT || dets.len() > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge { gts: gts.len(), dets: dets.len() });
    }
    let frame_index = check_single_frame(gts, dets)?;
    let qualities = quality_matrix(gts, dets, config)?;
    let q: Vec<Vec<T>> = qualities.iter().map(|r| r.iter().map(|p| p.ppdq).collect()).collect();
    let pairs = gts.len().min(dets.len());
    let mut best: Option<(T, Vec<Option<usize>>)> = None;
    let mut current = Vec::with_capacity(gts.len());
    let mut used = vec![false; dets.len()];
    enumerate(&q, pairs, &mut current, &mut used, &mut best);
    let choice = best.map(|(_, c)| c).unwrap_or_default();
    let assignment: Vec<(usize, usize)> = choice.iter().enumerate().filter_map(|(g, d)| d.map(|d| (g, d))).collect();
    Ok(classify_assignment(frame_index, gts, dets, &qualities, &assignment, config.filter_tiny))
}

fn enumerate<T: Scalar>(
    q: &[Vec<T>],
    pairs: usize,
    current: &mut Vec<Option<usize>>,
    used: &mut [bool],
    best: &mut Option<(T, Vec<Option<usize>>)>,
) {
    let row = current.len();
    if row == q.len() {
        let assigned = current.iter().flatten().count();
        if assigned == pairs {
            let total = current.iter().enumerate().filter_map(|(g, d)| d.map(|d| q[g][d])).fold(T::zero(), |a, v| a + v);
            if best.as_ref().is_none_or(|(b, _)| total > *b) {
                *best = Some((total, current.clone()));
            }
        }
        return;
    }
    for d in 0..used.len() {
        if !used[d] {
            used[d] = true;
            current.push(Some(d));
            enumerate(q, pairs, current, used, best);
            current.pop();
            used[d] = false;
        }
    }
    let assigned = current.iter().flatten().count();
    let rows_left = q.len() - row - 1;
    if assigned + rows_left >= pairs {
        current.push(None);
        enumerate(q, pairs, current, used, best);
        current.pop();
    }
}

/// Text contents of an on-disk fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub ground_truth: String,
    pub submission: String,
    pub classes: String,
}

pub const FIXTURE_GT_FILE: &str = "gt.json";
pub const FIXTURE_DET_FILE: &str = "det.json";
pub const FIXTURE_CLASSES_FILE: &str = "classes.txt";

impl Fixture {
    pub fn new(frames: &[GroundTruthFrame], detections: &[Vec<ProbabilisticDetection<f64>>], class_names: &[String]) -> Self {
        let mut doc = SubmissionDocument::default();
        for (frame, dets) in frames.iter().zip(detections) {
            let records = dets.iter().map(detection_record).collect();
            doc.frames.insert(frame.frame_index, records);
        }
        Self {
            ground_truth: serialize_ground_truth(frames, class_names),
            submission: doc.to_json(),
            classes: class_names.join("\n") + "\n",
        }
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(FIXTURE_GT_FILE), &self.ground_truth)?;
        std::fs::write(dir.join(FIXTURE_DET_FILE), &self.submission)?;
        std::fs::write(dir.join(FIXTURE_CLASSES_FILE), &self.classes)
    }
}

fn detection_record(d: &ProbabilisticDetection<f64>) -> DetectionRecord {
    let (tl, br) = (d.pbox.top_left(), d.pbox.bottom_right());
    let covars = [tl.covariance().to_matrix(), br.covariance().to_matrix()];
    DetectionRecord {
        label_probs: d.label_probs().to_vec(),
        bbox: [tl.mean()[0], tl.mean()[1], br.mean()[0], br.mean()[1]],
        covars: if covars.iter().flatten().flatten().all(|v| *v == 0.0) { None } else { Some(covars) },
    }
}

/// Ground-truth frames with their detections, frame by frame.
pub type SyntheticDataset = (Vec<GroundTruthFrame>, Vec<Vec<ProbabilisticDetection<f64>>>);

/// A seeded multi-frame dataset with detections; frames are split evenly
/// over `sequences` sequences named `seq0`, `seq1`, ...
pub fn synthetic_dataset(
    scene: &SceneSpec,
    perturbation: &PerturbationSpec,
    frames: usize,
    sequences: usize,
    seed: u64,
) -> Result<SyntheticDataset, Error> {
    let per_seq = frames.div_ceil(sequences.max(1)).max(1);
    let mut gts = Vec::with_capacity(frames);
    let mut dets = Vec::with_capacity(frames);
    for k in 0..frames {
        let s = SyntheticScene::generate(scene, seed.wrapping_mul(1_000_003).wrapping_add(k as u64), k as u64);
        dets.push(generate(perturbation, &s)?);
        gts.push(s.into_frame(format!("seq{}", k / per_seq)));
    }
    Ok((gts, dets))
}
