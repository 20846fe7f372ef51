//! Probabilistic bounding boxes with Gaussian corners.
//!
//! A pixel belongs to a detection with the probability that the top-left
//! corner lies above-left of the pixel center and the bottom-right corner
//! lies below-right of it. The two corners are independent.

use crate::error::Error;
use crate::normal::{bivariate_cdf, upper_tail_quantile, Covariance2};
use crate::rect::PixelRect;
use crate::scalar::Scalar;

/// Default cut-off below which a pixel is treated as outside a detection.
pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 0.0027;

/// Slack allowed on the sum of a label distribution.
pub const LABEL_MASS_TOLERANCE: f64 = 1e-6;

/// Continuous coordinate of the center of pixel index `i`.
#[inline]
pub fn pixel_center<T: Scalar>(i: i64) -> T {
    T::lit(i as f64) + T::lit(0.5)
}

/// A box corner distributed as a 2D Gaussian in image coordinates
/// (x right, y down, pixels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianCorner<T> {
    mean: [T; 2],
    covariance: Covariance2<T>,
}

impl<T: Scalar> GaussianCorner<T> {
    pub fn new(mean: [T; 2], covariance: [[T; 2]; 2]) -> Result<Self, Error> {
        Self::with_covariance(mean, Covariance2::from_matrix(covariance)?)
    }

    pub fn with_covariance(mean: [T; 2], covariance: Covariance2<T>) -> Result<Self, Error> {
        if !(mean[0].is_finite() && mean[1].is_finite()) {
            return Err(Error::NonFiniteMean);
        }
        Ok(Self { mean, covariance })
    }

    /// A deterministic corner.
    pub fn fixed(x: T, y: T) -> Self {
        Self { mean: [x, y], covariance: Covariance2::zero() }
    }

    pub fn mean(&self) -> [T; 2] {
        self.mean
    }

    pub fn covariance(&self) -> &Covariance2<T> {
        &self.covariance
    }

    /// `P(corner <= point)` componentwise.
    #[inline]
    pub fn prob_at_or_before(&self, point: [T; 2]) -> T {
        bivariate_cdf(point, self.mean, &self.covariance)
    }

    /// `P(corner >= point)` componentwise.
    #[inline]
    pub fn prob_at_or_after(&self, point: [T; 2]) -> T {
        // Negating both axes leaves the covariance unchanged.
        bivariate_cdf([-point[0], -point[1]], [-self.mean[0], -self.mean[1]], &self.covariance)
    }

    pub fn cast<U: Scalar>(&self) -> GaussianCorner<U> {
        let c = |v: T| U::lit(v.to_f64_lossy());
        GaussianCorner {
            mean: [c(self.mean[0]), c(self.mean[1])],
            covariance: Covariance2 { xx: c(self.covariance.xx), xy: c(self.covariance.xy), yy: c(self.covariance.yy) },
        }
    }
}

/// Probabilistic bounding box: independent Gaussian top-left and
/// bottom-right corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PBox<T> {
    top_left: GaussianCorner<T>,
    bottom_right: GaussianCorner<T>,
}

impl<T: Scalar> PBox<T> {
    pub fn new(top_left: GaussianCorner<T>, bottom_right: GaussianCorner<T>) -> Result<Self, Error> {
        let (tl, br) = (top_left.mean(), bottom_right.mean());
        if tl[0] > br[0] || tl[1] > br[1] {
            return Err(Error::InvertedBox);
        }
        Ok(Self { top_left, bottom_right })
    }

    /// A conventional box: zero-covariance corners at `(x1, y1)` and `(x2, y2)`.
    pub fn from_corners(x1: T, y1: T, x2: T, y2: T) -> Result<Self, Error> {
        if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteMean);
        }
        Self::new(GaussianCorner::fixed(x1, y1), GaussianCorner::fixed(x2, y2))
    }

    /// The continuous box exactly covering the pixels of `rect`.
    pub fn covering(rect: &PixelRect) -> Result<Self, Error> {
        Self::from_corners(
            T::lit(rect.x_min as f64),
            T::lit(rect.y_min as f64),
            T::lit((rect.x_max + 1) as f64),
            T::lit((rect.y_max + 1) as f64),
        )
    }

    /// Same means, both corners given `covariance`.
    pub fn with_isotropic_covariance(&self, var_x: T, var_y: T) -> Result<Self, Error> {
        let cov = Covariance2::diagonal(var_x, var_y)?;
        Ok(Self {
            top_left: GaussianCorner::with_covariance(self.top_left.mean(), cov)?,
            bottom_right: GaussianCorner::with_covariance(self.bottom_right.mean(), cov)?,
        })
    }

    pub fn top_left(&self) -> &GaussianCorner<T> {
        &self.top_left
    }

    pub fn bottom_right(&self) -> &GaussianCorner<T> {
        &self.bottom_right
    }

    /// Both corner covariances are diagonal, so inclusion factorizes per axis.
    pub fn is_axis_separable(&self) -> bool {
        self.top_left.covariance().is_diagonal() && self.bottom_right.covariance().is_diagonal()
    }

    pub fn translate(&self, dx: T, dy: T) -> Self {
        let shift = |c: &GaussianCorner<T>| GaussianCorner { mean: [c.mean[0] + dx, c.mean[1] + dy], covariance: c.covariance };
        Self { top_left: shift(&self.top_left), bottom_right: shift(&self.bottom_right) }
    }

    pub fn cast<U: Scalar>(&self) -> PBox<U> {
        PBox { top_left: self.top_left.cast(), bottom_right: self.bottom_right.cast() }
    }
}

/// Probability that `point` lies inside the box.
#[inline]
pub fn pixel_inclusion_probability<T: Scalar>(point: [T; 2], pbox: &PBox<T>) -> T {
    let p = pbox.top_left.prob_at_or_before(point) * pbox.bottom_right.prob_at_or_after(point);
    p.max(T::zero()).min(T::one())
}

pub(crate) fn check_threshold<T: Scalar>(threshold: T) -> Result<(), Error> {
    if threshold > T::zero() && threshold < T::lit(0.5) {
        Ok(())
    } else {
        Err(Error::InvalidThreshold(threshold.to_f64_lossy()))
    }
}

/// Integer rectangle outside of which every pixel center has inclusion
/// probability below `threshold`.
///
/// Each edge is the corner mean pushed outward by `k` marginal standard
/// deviations, where `Φ(-k) = threshold`, then floored to a pixel index. The
/// result may exceed the tight rectangle by one pixel per edge.
pub fn support_region<T: Scalar>(pbox: &PBox<T>, threshold: T) -> Result<PixelRect, Error> {
    check_threshold(threshold)?;
    let k = upper_tail_quantile(threshold);
    let tl = pbox.top_left();
    let br = pbox.bottom_right();
    let lo_x = tl.mean()[0] - k * tl.covariance().xx.sqrt();
    let lo_y = tl.mean()[1] - k * tl.covariance().yy.sqrt();
    let hi_x = br.mean()[0] + k * br.covariance().xx.sqrt();
    let hi_y = br.mean()[1] + k * br.covariance().yy.sqrt();
    let idx = |v: T| v.floor().to_f64_lossy().clamp(-1e15, 1e15) as i64;
    Ok(PixelRect::new(idx(lo_x), idx(lo_y), idx(hi_x), idx(hi_y)))
}

/// A probabilistic detection: a PBox plus a distribution over the
/// configured class list.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilisticDetection<T> {
    pub pbox: PBox<T>,
    label_probs: Vec<T>,
    pub frame_index: u64,
}

impl<T: Scalar> ProbabilisticDetection<T> {
    /// Entries must lie in `[0, 1]` and sum to at most `1 + 1e-6`; the
    /// remaining mass is implicitly "unknown".
    pub fn new(pbox: PBox<T>, label_probs: Vec<T>, frame_index: u64) -> Result<Self, Error> {
        validate_label_probs(&label_probs)?;
        Ok(Self { pbox, label_probs, frame_index })
    }

    pub fn label_probs(&self) -> &[T] {
        &self.label_probs
    }

    /// Most probable class; lowest index wins ties.
    pub fn argmax_class(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.label_probs.iter().enumerate() {
            if *p > self.label_probs[best] {
                best = i;
            }
        }
        best
    }
}

pub(crate) fn validate_label_probs<T: Scalar>(probs: &[T]) -> Result<(), Error> {
    if let Some(p) = probs.iter().find(|p| !(**p >= T::zero() && **p <= T::one())) {
        return Err(Error::InvalidLabelProbabilities(format!("entry {p} outside [0, 1]")));
    }
    let total: T = probs.iter().copied().sum();
    if total > T::one() + T::lit(LABEL_MASS_TOLERANCE) {
        return Err(Error::InvalidLabelProbabilities(format!("entries sum to {total}")));
    }
    Ok(())
}
