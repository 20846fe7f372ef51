//! Univariate and bivariate normal distribution functions.
//!
//! The univariate CDF uses Schonfelder's Chebyshev expansion of `erfc`
//! (accurate to about 1e-15 in `f64`). The bivariate CDF follows Genz's
//! `BVND` routine, a Drezner–Wesolowsky quadrature with a separate
//! expansion for strongly correlated inputs. Negative strong correlation is
//! reduced to the positive case through `P(X>h, Y>k; r) = P(X>h) - P(X>h, Y>-k; -r)`,
//! which avoids the loss of accuracy of the original routine for `r <= -0.925`.
#![allow(clippy::excessive_precision)]

use crate::error::{CovarianceIssue, Error};
use crate::scalar::Scalar;

const ERFC_CHEBYSHEV: [f64; 25] = [
    6.10143081923200417926465815756e-1,
    -4.34841272712577471828182820888e-1,
    1.76351193643605501125840298123e-1,
    -6.0710795609249414860051215825e-2,
    1.7712068995694114486147141191e-2,
    -4.321119385567293818599864968e-3,
    8.54216676887098678819832055e-4,
    -1.27155090609162742628893940e-4,
    1.1248167243671189468847072e-5,
    3.13063885421820972630152e-7,
    -2.70988068537762022009086e-7,
    3.0737622701407688440959e-8,
    2.515620384817622937314e-9,
    -1.028929921320319127590e-9,
    2.9944052119949939363e-11,
    2.6051789687266936290e-11,
    -2.634839924171969386e-12,
    -6.43404509890636443e-13,
    1.12457401801663447e-13,
    1.7281533389986098e-14,
    -4.264101694942375e-15,
    -5.45371977880191e-16,
    1.58697607761671e-16,
    2.0899837844334e-17,
    -5.900526869409e-18,
];

/// Gauss–Legendre half rules `(weight, abscissa)` for 6, 12 and 20 points.
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705e+00, -0.9324695142031522e+00),
    (0.3607615730481384e+00, -0.6612093864662647e+00),
    (0.4679139345726904e+00, -0.2386191860831970e+00),
];

const GL12: [(f64, f64); 6] = [
    (0.4717533638651177e-01, -0.9815606342467191e+00),
    (0.1069393259953183e+00, -0.9041172563704750e+00),
    (0.1600783285433464e+00, -0.7699026741943050e+00),
    (0.2031674267230659e+00, -0.5873179542866171e+00),
    (0.2334925365383547e+00, -0.3678314989981802e+00),
    (0.2491470458134029e+00, -0.1252334085114692e+00),
];

const GL20: [(f64, f64); 10] = [
    (0.1761400713915212e-01, -0.9931285991850949e+00),
    (0.4060142980038694e-01, -0.9639719272779138e+00),
    (0.6267204833410906e-01, -0.9122344282513259e+00),
    (0.8327674157670475e-01, -0.8391169718222188e+00),
    (0.1019301198172404e+00, -0.7463319064601508e+00),
    (0.1181945319615184e+00, -0.6360536807265150e+00),
    (0.1316886384491766e+00, -0.5108670019508271e+00),
    (0.1420961093183821e+00, -0.3737060887154196e+00),
    (0.1491729864726037e+00, -0.2277858511416451e+00),
    (0.1527533871307259e+00, -0.7652652113349733e-01),
];

/// Standard normal CDF `Φ(z)`.
pub fn standard_normal_cdf<T: Scalar>(z: T) -> T {
    if z.is_nan() {
        return z;
    }
    let xa = z.abs() / T::SQRT_2();
    let tail = if xa > T::lit(100.0) {
        T::zero()
    } else {
        let t = (T::lit(8.0) * xa - T::lit(30.0)) / (T::lit(4.0) * xa + T::lit(15.0));
        let (mut bm, mut b, mut bp) = (T::zero(), T::zero(), T::zero());
        for &a in ERFC_CHEBYSHEV.iter().rev() {
            bp = b;
            b = bm;
            bm = t * b - bp + T::lit(a);
        }
        (-xa * xa).exp() * (bm - bp) / T::lit(4.0)
    };
    if z > T::zero() {
        T::one() - tail
    } else {
        tail
    }
}

/// Smallest `k` (to within bisection resolution, rounded up) with `Φ(-k) <= tail`.
///
/// `tail` must lie in `(0, 0.5)`.
pub(crate) fn upper_tail_quantile<T: Scalar>(tail: T) -> T {
    let (mut lo, mut hi) = (T::zero(), T::lit(40.0));
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if standard_normal_cdf(-mid) <= tail {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Upper orthant probability `P(X > h, Y > k)` for a standard bivariate
/// normal pair with correlation `r`.
fn upper_orthant<T: Scalar>(h: T, k: T, r: T) -> T {
    let one = T::one();
    let half = T::lit(0.5);
    let two_pi = T::lit(2.0) * T::PI();
    let abs_r = r.abs();

    if abs_r <= T::lit(0.925) {
        let mut bvn = T::zero();
        if abs_r > T::zero() {
            let quad: &[(f64, f64)] = if abs_r < T::lit(0.3) {
                &GL6
            } else if abs_r < T::lit(0.75) {
                &GL12
            } else {
                &GL20
            };
            let hk = h * k;
            let hs = (h * h + k * k) * half;
            let asr = half * r.asin();
            for &(w, x) in quad {
                for sign in [-one, one] {
                    let sn = (asr * (sign * T::lit(x) + one)).sin();
                    bvn = bvn + T::lit(w) * ((sn * hk - hs) / (one - sn * sn)).exp();
                }
            }
            bvn = bvn * asr / two_pi;
        }
        return bvn + standard_normal_cdf(-h) * standard_normal_cdf(-k);
    }

    if r < T::zero() {
        let v = standard_normal_cdf(-h) - upper_orthant(h, -k, -r);
        return v.max(T::zero());
    }

    // 0.925 < r <= 1
    let hk = h * k;
    let mut bvn = T::zero();
    if r < one {
        let a_s = (one - r) * (one + r);
        let mut a = a_s.sqrt();
        let b_s = (h - k) * (h - k);
        let c = (T::lit(4.0) - hk) / T::lit(8.0);
        let d = (T::lit(12.0) - hk) / T::lit(16.0);
        let asr = -half * (b_s / a_s + hk);
        if asr > T::lit(-100.0) {
            bvn = a
                * asr.exp()
                * (one - c * (b_s - a_s) * (one - d * b_s / T::lit(5.0)) / T::lit(3.0)
                    + c * d * a_s * a_s / T::lit(5.0));
        }
        if -hk < T::lit(100.0) {
            let b = b_s.sqrt();
            bvn = bvn
                - (-half * hk).exp()
                    * two_pi.sqrt()
                    * standard_normal_cdf(-b / a)
                    * b
                    * (one - c * b_s * (one - d * b_s / T::lit(5.0)) / T::lit(3.0));
        }
        a = a * half;
        for &(w, x) in GL20.iter() {
            for sign in [-one, one] {
                let xs = (a * (sign * T::lit(x) + one)).powi(2);
                let rs = (one - xs).sqrt();
                let asr = -half * (b_s / xs + hk);
                if asr > T::lit(-100.0) {
                    bvn = bvn
                        + a * T::lit(w)
                            * asr.exp()
                            * ((-hk * (one - rs) / (T::lit(2.0) * (one + rs))).exp() / rs
                                - (one + c * xs * (one + d * xs)));
                }
            }
        }
        bvn = -bvn / two_pi;
    }
    (bvn + standard_normal_cdf(-h.max(k))).max(T::zero()).min(one)
}

/// `P(X <= a, Y <= b)` for a standard bivariate normal with correlation `rho`.
pub fn standard_bivariate_normal_cdf<T: Scalar>(a: T, b: T, rho: T) -> T {
    let rho = rho.max(-T::one()).min(T::one());
    upper_orthant(-a, -b, rho).max(T::zero()).min(T::one())
}

/// Symmetric positive semi-definite 2×2 covariance, stored as its three
/// distinct entries.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Covariance2<T> {
    pub xx: T,
    pub xy: T,
    pub yy: T,
}

impl<T: Scalar> Covariance2<T> {
    pub fn zero() -> Self {
        Self { xx: T::zero(), xy: T::zero(), yy: T::zero() }
    }

    pub fn diagonal(var_x: T, var_y: T) -> Result<Self, Error> {
        Self::from_matrix([[var_x, T::zero()], [T::zero(), var_y]])
    }

    /// Validates and canonicalizes a full matrix.
    ///
    /// Off-diagonal entries that differ by more than a relative `1e-9` are
    /// rejected; smaller asymmetries are averaged away. A negative
    /// determinant within the same relative tolerance is accepted as rounding
    /// noise.
    pub fn from_matrix(m: [[T; 2]; 2]) -> Result<Self, Error> {
        check_covariance(m).map_err(Error::InvalidCovariance)
    }

    pub fn to_matrix(self) -> [[T; 2]; 2] {
        [[self.xx, self.xy], [self.xy, self.yy]]
    }

    pub fn is_diagonal(&self) -> bool {
        self.xy == T::zero()
    }

    pub fn is_zero(&self) -> bool {
        self.xx == T::zero() && self.xy == T::zero() && self.yy == T::zero()
    }
}

/// Relative tolerance for the symmetry and semi-definiteness checks.
pub const COVARIANCE_TOLERANCE: f64 = 1e-9;

pub(crate) fn check_covariance<T: Scalar>(m: [[T; 2]; 2]) -> Result<Covariance2<T>, CovarianceIssue> {
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CovarianceIssue::NonFinite);
    }
    let (xx, yy) = (m[0][0], m[1][1]);
    if xx < T::zero() || yy < T::zero() {
        return Err(CovarianceIssue::NegativeVariance);
    }
    let scale = m.iter().flatten().fold(T::one(), |acc, v| acc.max(v.abs()));
    let tol = T::lit(COVARIANCE_TOLERANCE) * scale;
    if (m[0][1] - m[1][0]).abs() > tol {
        return Err(CovarianceIssue::NonSymmetric);
    }
    let xy = (m[0][1] + m[1][0]) / T::lit(2.0);
    if xx * yy - xy * xy < -tol * scale {
        return Err(CovarianceIssue::NotPositiveSemidefinite);
    }
    // A zero variance forces a zero covariance term.
    let xy = if xx == T::zero() || yy == T::zero() { T::zero() } else { xy };
    Ok(Covariance2 { xx, xy, yy })
}

/// `P(X <= x)` for `X ~ N(mean, var)`; zero variance is a closed step at `mean`.
#[inline]
pub fn univariate_cdf<T: Scalar>(x: T, mean: T, var: T) -> T {
    if var == T::zero() {
        if mean <= x {
            T::one()
        } else {
            T::zero()
        }
    } else {
        standard_normal_cdf((x - mean) / var.sqrt())
    }
}

/// `P(X <= point)` componentwise for `X ~ N(mean, cov)` with a validated covariance.
pub fn bivariate_cdf<T: Scalar>(point: [T; 2], mean: [T; 2], cov: &Covariance2<T>) -> T {
    if cov.xy == T::zero() {
        return univariate_cdf(point[0], mean[0], cov.xx) * univariate_cdf(point[1], mean[1], cov.yy);
    }
    let sx = cov.xx.sqrt();
    let sy = cov.yy.sqrt();
    let rho = cov.xy / (sx * sy);
    standard_bivariate_normal_cdf((point[0] - mean[0]) / sx, (point[1] - mean[1]) / sy, rho)
}

/// `P(X <= point)` componentwise for `X ~ N(mean, covariance)`.
///
/// Fails with [`Error::InvalidCovariance`] when `covariance` is not a
/// symmetric positive semi-definite matrix.
pub fn bivariate_normal_cdf<T: Scalar>(point: [T; 2], mean: [T; 2], covariance: [[T; 2]; 2]) -> Result<T, Error> {
    let cov = Covariance2::from_matrix(covariance)?;
    Ok(bivariate_cdf(point, mean, &cov))
}
