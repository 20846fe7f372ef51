//! Pairwise spatial and label quality between one ground-truth object and
//! one detection.
//!
//! The foreground loss averages `-ln P(x ∈ D)` over the ground-truth
//! segment. The background loss sums `-ln (1 - P(x ∈ D))` over detection
//! pixels outside the ground-truth bounding box. Pixels inside the bounding
//! box but outside the segment enter neither sum. Probabilities are clamped
//! to at least [`PROBABILITY_CLAMP`] inside the logarithms.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::ground_truth::GroundTruthObject;
use crate::heatmap::{rasterize_region, Heatmap};
use crate::pbox::{check_threshold, support_region, PBox, ProbabilisticDetection, DEFAULT_SUPPORT_THRESHOLD};
use crate::rect::PixelRect;
use crate::scalar::Scalar;

/// Lower clamp for probabilities inside logarithms.
pub const PROBABILITY_CLAMP: f64 = 1e-14;

/// Denominator of the background loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundNormalization {
    /// Divide by the number of ground-truth segment pixels.
    #[default]
    GroundTruthSize,
    /// Divide by the number of pixels in the detection's pixel set.
    DetectionSize,
}

/// Settings shared by every pair in an evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityConfig<T> {
    /// Inclusion probability below which a pixel is outside the detection.
    pub threshold: T,
    pub background_normalization: BackgroundNormalization,
    /// Image bounds; detection pixels outside are ignored. `None` leaves the
    /// plane unbounded.
    pub clip: Option<PixelRect>,
}

impl<T: Scalar> Default for QualityConfig<T> {
    fn default() -> Self {
        Self {
            threshold: T::lit(DEFAULT_SUPPORT_THRESHOLD),
            background_normalization: BackgroundNormalization::default(),
            clip: None,
        }
    }
}

impl<T: Scalar> QualityConfig<T> {
    pub fn with_threshold(threshold: T) -> Result<Self, Error> {
        check_threshold(threshold)?;
        Ok(Self { threshold, ..Self::default() })
    }

    pub fn clipped_to(mut self, clip: PixelRect) -> Self {
        self.clip = Some(clip);
        self
    }
}

/// Losses and qualities of one (ground truth, detection) pair.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PairwiseQuality<T> {
    pub foreground_loss: T,
    pub background_loss: T,
    pub spatial_quality: T,
    pub label_quality: T,
    pub ppdq: T,
}

impl<T: Scalar> PairwiseQuality<T> {
    /// Combines losses and label quality. Spatial quality is exactly zero
    /// when the detection gives no segment pixel a nonzero probability.
    pub fn from_parts(foreground_loss: T, background_loss: T, label_quality: T, overlaps: bool) -> Self {
        let spatial_quality = if overlaps { (-(foreground_loss + background_loss)).exp() } else { T::zero() };
        Self {
            foreground_loss,
            background_loss,
            spatial_quality,
            label_quality,
            ppdq: (spatial_quality * label_quality).sqrt(),
        }
    }
}

/// Probability the detection assigns to `true_class`; zero for classes it omits.
pub fn label_quality<T: Scalar>(det: &ProbabilisticDetection<T>, true_class: usize) -> T {
    det.label_probs().get(true_class).copied().unwrap_or_else(T::zero)
}

/// A detection rasterized once and reused against every ground truth.
#[derive(Debug, Clone)]
pub struct DetectionRaster<T> {
    heatmap: Heatmap<T>,
    log_inside: Vec<T>,
    log_outside: Vec<T>,
    background_total: T,
    pixel_set_size: usize,
}

impl<T: Scalar> DetectionRaster<T> {
    pub fn new(pbox: &PBox<T>, config: &QualityConfig<T>) -> Result<Self, Error> {
        let mut region = support_region(pbox, config.threshold)?;
        if let Some(clip) = &config.clip {
            region = region.intersect(clip);
        }
        Ok(Self::from_heatmap(rasterize_region(pbox, config.threshold, region), config.threshold))
    }

    /// Wraps an arbitrary probability map; cells at or below `threshold`
    /// are outside the detection's pixel set.
    pub fn from_heatmap(heatmap: Heatmap<T>, threshold: T) -> Self {
        let eps = T::lit(PROBABILITY_CLAMP);
        let log_inside = heatmap.map(|p| p.max(eps).ln());
        let log_outside = heatmap.map(|p| if p > threshold { (T::one() - p).max(eps).ln() } else { T::zero() });
        let pixel_set_size = heatmap.values().iter().filter(|p| **p > threshold).count();
        let background_total = log_outside.iter().fold(T::zero(), |acc, v| acc + *v);
        Self { heatmap, log_inside, log_outside, background_total, pixel_set_size }
    }

    pub fn heatmap(&self) -> &Heatmap<T> {
        &self.heatmap
    }

    /// Number of cells whose probability exceeds the support threshold.
    pub fn pixel_set_size(&self) -> usize {
        self.pixel_set_size
    }

    /// Foreground loss and whether any segment pixel has nonzero probability.
    pub fn foreground_loss(&self, gt: &GroundTruthObject) -> (T, bool) {
        let window = self.heatmap.rect();
        let (ox, oy) = self.heatmap.origin();
        let w = self.heatmap.width();
        let mut sum = T::zero();
        let mut covered = 0u64;
        let mut overlaps = false;
        gt.segment().for_each_run_in(&window, |y, x, n| {
            let start = (y - oy) as usize * w + (x - ox) as usize;
            for i in start..start + n {
                sum = sum + self.log_inside[i];
                overlaps |= self.heatmap.values()[i] > T::zero();
            }
            covered += n as u64;
        });
        let outside = gt.pixel_count() - covered;
        if outside > 0 {
            sum = sum + T::lit(outside as f64) * T::lit(PROBABILITY_CLAMP).ln();
        }
        (-sum / T::lit(gt.pixel_count() as f64), overlaps)
    }

    /// Background loss against `gt`'s bounding box.
    pub fn background_loss(&self, gt: &GroundTruthObject, normalization: BackgroundNormalization) -> T {
        let window = self.heatmap.rect();
        let bbox = gt.bbox();
        let sum = if window.intersect(&bbox).is_empty() {
            self.background_total
        } else {
            let w = self.heatmap.width();
            let mut sum = T::zero();
            for (j, row) in self.log_outside.chunks(w.max(1)).enumerate() {
                let y = window.y_min + j as i64;
                if y < bbox.y_min || y > bbox.y_max {
                    sum = row.iter().fold(sum, |acc, v| acc + *v);
                } else {
                    let left = (bbox.x_min - window.x_min).clamp(0, w as i64) as usize;
                    let right = (bbox.x_max + 1 - window.x_min).clamp(0, w as i64) as usize;
                    sum = row[..left].iter().fold(sum, |acc, v| acc + *v);
                    sum = row[right..].iter().fold(sum, |acc, v| acc + *v);
                }
            }
            sum
        };
        let denom = match normalization {
            BackgroundNormalization::GroundTruthSize => gt.pixel_count() as f64,
            BackgroundNormalization::DetectionSize => self.pixel_set_size as f64,
        };
        if denom == 0.0 {
            T::zero()
        } else {
            -sum / T::lit(denom)
        }
    }

    /// Full pairwise quality against `gt` for a detection with these label probabilities.
    pub fn pairwise(&self, gt: &GroundTruthObject, det: &ProbabilisticDetection<T>, config: &QualityConfig<T>) -> PairwiseQuality<T> {
        let (fg, overlaps) = self.foreground_loss(gt);
        let bg = self.background_loss(gt, config.background_normalization);
        PairwiseQuality::from_parts(fg, bg, label_quality(det, gt.class_id), overlaps)
    }
}

/// Mean negative log inclusion probability over the segment pixels.
pub fn foreground_loss<T: Scalar>(gt: &GroundTruthObject, det: &ProbabilisticDetection<T>, config: &QualityConfig<T>) -> Result<T, Error> {
    Ok(DetectionRaster::new(&det.pbox, config)?.foreground_loss(gt).0)
}

/// Normalized negative log exclusion probability over detection pixels
/// outside the ground-truth bounding box.
pub fn background_loss<T: Scalar>(gt: &GroundTruthObject, det: &ProbabilisticDetection<T>, config: &QualityConfig<T>) -> Result<T, Error> {
    Ok(DetectionRaster::new(&det.pbox, config)?.background_loss(gt, config.background_normalization))
}

/// Pairwise PDQ: `sqrt(Q_S · Q_L)` with `Q_S = exp(-(L_FG + L_BG))`.
pub fn pairwise_pdq<T: Scalar>(gt: &GroundTruthObject, det: &ProbabilisticDetection<T>, config: &QualityConfig<T>) -> Result<PairwiseQuality<T>, Error> {
    Ok(DetectionRaster::new(&det.pbox, config)?.pairwise(gt, det, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_truth::SegmentMask;

    fn gt_rect(rect: PixelRect, class_id: usize) -> GroundTruthObject {
        GroundTruthObject::new(class_id, 0, SegmentMask::filled(&rect), 0).unwrap()
    }

    fn det(pbox: PBox<f64>, probs: Vec<f64>) -> ProbabilisticDetection<f64> {
        ProbabilisticDetection::new(pbox, probs, 0).unwrap()
    }

    #[test]
    fn label_quality_reads_true_class() {
        let d = det(PBox::from_corners(0.0, 0.0, 1.0, 1.0).unwrap(), vec![0.7, 0.3]);
        assert_eq!(label_quality(&d, 0), 0.7);
        assert_eq!(label_quality(&d, 1), 0.3);
        assert_eq!(label_quality(&d, 5), 0.0);
        let d = det(PBox::from_corners(0.0, 0.0, 1.0, 1.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(label_quality(&d, 0), 0.0);
    }

    #[test]
    fn perfect_detection_scores_one() {
        let rect = PixelRect::new(10, 12, 29, 25);
        let gt = gt_rect(rect, 1);
        let d = det(PBox::covering(&rect).unwrap(), vec![0.0, 1.0]);
        let q = pairwise_pdq(&gt, &d, &QualityConfig::default()).unwrap();
        assert_eq!(q.foreground_loss, 0.0);
        assert_eq!(q.background_loss, 0.0);
        assert_eq!(q.ppdq, 1.0);
    }

    #[test]
    fn wrong_class_scores_zero() {
        let rect = PixelRect::new(10, 12, 29, 25);
        let d = det(PBox::covering(&rect).unwrap(), vec![1.0, 0.0]);
        let q = pairwise_pdq(&gt_rect(rect, 1), &d, &QualityConfig::default()).unwrap();
        assert_eq!(q.spatial_quality, 1.0);
        assert_eq!(q.ppdq, 0.0);
    }

    #[test]
    fn geometric_mean() {
        let q = PairwiseQuality::from_parts(0.25_f64.ln().abs(), 0.0, 0.64, true);
        assert!((q.spatial_quality - 0.25).abs() < 1e-15);
        assert!((q.ppdq - 0.4).abs() < 1e-15);
    }

    #[test]
    fn overconfident_extra_pixels_pay_clamp() {
        let rect = PixelRect::new(10, 10, 19, 19);
        let gt = gt_rect(rect, 0);
        // three extra columns of 10 pixels at probability 1
        let d = det(PBox::from_corners(10.0, 10.0, 23.0, 20.0).unwrap(), vec![1.0]);
        let bg = background_loss(&gt, &d, &QualityConfig::default()).unwrap();
        let want = (30.0 / 100.0) * -(PROBABILITY_CLAMP.ln());
        assert!((bg - want).abs() < 1e-12, "{bg} vs {want}");
        let q = pairwise_pdq(&gt, &d, &QualityConfig::default()).unwrap();
        assert!((q.ppdq - (-want / 2.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn half_probability_foreground() {
        // A single column band where the bottom-right x corner sits exactly on
        // the pixel centers: P = 0.5 for every pixel.
        let rect = PixelRect::new(10, 10, 10, 19);
        let gt = gt_rect(rect, 0);
        let tl = crate::pbox::GaussianCorner::fixed(0.0, 0.0);
        let br = crate::pbox::GaussianCorner::new([10.5, 40.0], [[1.0, 0.0], [0.0, 0.0]]).unwrap();
        let d = det(PBox::new(tl, br).unwrap(), vec![1.0]);
        let fg = foreground_loss(&gt, &d, &QualityConfig::default()).unwrap();
        assert!((fg - std::f64::consts::LN_2).abs() < 1e-12, "{fg}");
    }

    #[test]
    fn disjoint_detection_has_zero_spatial_quality() {
        let gt = gt_rect(PixelRect::new(0, 0, 9, 9), 0);
        let d = det(PBox::from_corners(50.0, 50.0, 60.0, 60.0).unwrap(), vec![1.0]);
        let q = pairwise_pdq(&gt, &d, &QualityConfig::default()).unwrap();
        assert_eq!(q.spatial_quality, 0.0);
        assert_eq!(q.ppdq, 0.0);
        assert!((q.foreground_loss + PROBABILITY_CLAMP.ln()).abs() < 1e-12);
        // the reported losses still agree with the exponential form
        assert!((-(q.foreground_loss + q.background_loss)).exp() < 1e-12);
    }

    #[test]
    fn detection_size_normalization() {
        let gt = gt_rect(PixelRect::new(10, 10, 19, 19), 0);
        let d = det(PBox::from_corners(10.0, 10.0, 23.0, 20.0).unwrap(), vec![1.0]);
        let cfg = QualityConfig { background_normalization: BackgroundNormalization::DetectionSize, ..QualityConfig::default() };
        let bg = background_loss(&gt, &d, &cfg).unwrap();
        let want = (30.0 / 130.0) * -(PROBABILITY_CLAMP.ln());
        assert!((bg - want).abs() < 1e-12);
    }

    #[test]
    fn clip_removes_off_image_background() {
        let gt = gt_rect(PixelRect::new(0, 0, 9, 9), 0);
        let d = det(PBox::from_corners(-5.0, 0.0, 10.0, 10.0).unwrap(), vec![1.0]);
        let open = pairwise_pdq(&gt, &d, &QualityConfig::default()).unwrap();
        assert!(open.background_loss > 0.0);
        let clipped = pairwise_pdq(&gt, &d, &QualityConfig::default().clipped_to(PixelRect::image(32, 32))).unwrap();
        assert_eq!(clipped.background_loss, 0.0);
        assert_eq!(clipped.ppdq, 1.0);
    }

    #[test]
    fn works_in_single_precision() {
        let rect = PixelRect::new(3, 3, 20, 14);
        let gt = gt_rect(rect, 0);
        let pbox = PBox::<f32>::covering(&rect).unwrap().with_isotropic_covariance(2.0, 2.0).unwrap();
        let d = ProbabilisticDetection::new(pbox, vec![0.9f32], 0).unwrap();
        let q32 = pairwise_pdq(&gt, &d, &QualityConfig::default()).unwrap();
        let d64 = det(pbox.cast(), vec![0.9]);
        let q64 = pairwise_pdq(&gt, &d64, &QualityConfig::default()).unwrap();
        assert!((f64::from(q32.ppdq) - q64.ppdq).abs() < 1e-4);
        assert!(q64.ppdq > 0.0 && q64.ppdq < 1.0);
    }
}
