//! Cross-checks of the numerical kernels against independent references.

// reference values keep every digit they were computed with
#![allow(clippy::excessive_precision)]

use pdq_core::ground_truth::{tight_bbox, SegmentMask};
use pdq_core::{
    bivariate_normal_cdf, pixel_inclusion_probability, solve_assignment, standard_bivariate_normal_cdf, standard_normal_cdf,
    support_region, GaussianCorner, PBox, PixelRect,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

fn phi_ref(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

fn density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `P(X <= a, Y <= b)` for standard normals with correlation `rho`, by
/// integrating the conditional CDF against the marginal density.
fn bivariate_ref(a: f64, b: f64, rho: f64) -> f64 {
    let s = (1.0 - rho * rho).sqrt();
    let f = |x: f64| density(x) * phi_ref((b - rho * x) / s);
    integrate(&f, -12.0, a.max(-12.0), 1e-14)
}

#[test]
fn univariate_cdf_matches_reference() {
    let mut x = -38.0;
    while x <= 9.0 {
        let ours = standard_normal_cdf(x);
        let reference = phi_ref(x);
        // the reference erfc is accurate to roughly 1e-10 relative in the far tail
        let tol = 1e-15_f64.max(reference * 1e-9);
        assert!((ours - reference).abs() <= tol, "x = {x}: {ours} vs {reference}");
        x += 0.0173;
    }
}

#[test]
fn univariate_cdf_matches_high_precision_values() {
    // 30-digit values of the standard normal CDF
    let table = [
        (-30.0_f64, 4.906_713_927_148_187e-198_f64),
        (-20.0, 2.753_624_118_606_233_7e-89),
        (-8.0, 6.220_960_574_271_784_1e-16),
        (-5.0, 2.866_515_718_791_939_1e-7),
        (-3.0, 0.001_349_898_031_630_094_5),
        (-1.5, 0.066_807_201_268_858_066),
        (-0.5, 0.308_537_538_725_986_9),
        (0.25, 0.598_706_325_682_923_7),
        (2.0, 0.977_249_868_051_820_8),
        (6.0, 0.999_999_999_013_412_4),
    ];
    for (x, want) in table {
        let got = standard_normal_cdf(x);
        // exp(-x²/2) carries a relative error growing like x² ulp
        let tol = want * f64::EPSILON * (x * x).max(8.0);
        assert!((got - want).abs() <= tol, "x = {x}: {got} vs {want}");
    }
}

#[test]
fn one_sigma_product_matches_integration() {
    let s = 2.5;
    let p = bivariate_normal_cdf([3.0 + s, -1.0 + s], [3.0, -1.0], [[s * s, 0.0], [0.0, s * s]]).unwrap();
    let reference = bivariate_ref(1.0, 1.0, 0.0);
    assert!((p - reference).abs() < 1e-10, "{p} vs {reference}");
    assert!((p - 0.707_860_981_737_141).abs() < 1e-15);
}

#[test]
fn bivariate_cdf_matches_integration() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..400 {
        let a = rng.gen_range(-4.0..4.0);
        let b = rng.gen_range(-4.0..4.0);
        let rho = rng.gen_range(-0.995..0.995);
        let ours = standard_bivariate_normal_cdf(a, b, rho);
        let reference = bivariate_ref(a, b, rho);
        assert!((ours - reference).abs() < 1e-10, "({a}, {b}, {rho}): {ours} vs {reference}");
    }
}

#[test]
fn correlated_corner_matches_integration() {
    // Convert a general covariance into standardized form by hand.
    let (mx, my) = (4.0, -3.0);
    let (vx, vy, c): (f64, f64, f64) = (9.0, 4.0, -3.6);
    let (x, y) = (5.5, -2.0);
    let ours = bivariate_normal_cdf([x, y], [mx, my], [[vx, c], [c, vy]]).unwrap();
    let reference = bivariate_ref((x - mx) / vx.sqrt(), (y - my) / vy.sqrt(), c / (vx * vy).sqrt());
    assert!((ours - reference).abs() < 1e-10);
}

fn random_corner(rng: &mut ChaCha8Rng, mean: [f64; 2]) -> GaussianCorner<f64> {
    let (l1, l2) = (rng.gen_range(0.0..25.0), rng.gen_range(0.0..25.0));
    let t: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let (c, s) = (t.cos(), t.sin());
    let cov = [[l1 * c * c + l2 * s * s, (l1 - l2) * c * s], [(l1 - l2) * c * s, l1 * s * s + l2 * c * c]];
    GaussianCorner::new(mean, cov).unwrap()
}

#[test]
fn support_region_covers_scanned_extent() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..40 {
        let x1 = rng.gen_range(0.0..30.0);
        let y1 = rng.gen_range(0.0..30.0);
        let tl = random_corner(&mut rng, [x1, y1]);
        let (w, h) = (rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0));
        let br = random_corner(&mut rng, [x1 + w, y1 + h]);
        let pbox = PBox::new(tl, br).unwrap();
        let region = support_region(&pbox, 0.0027).unwrap();
        let mut scanned: Option<PixelRect> = None;
        for y in -30..90 {
            for x in -30..90 {
                if pixel_inclusion_probability([x as f64 + 0.5, y as f64 + 0.5], &pbox) >= 0.0027 {
                    let r = scanned.get_or_insert(PixelRect::new(x, y, x, y));
                    *r = PixelRect::new(r.x_min.min(x), r.y_min.min(y), r.x_max.max(x), r.y_max.max(y));
                }
            }
        }
        let scanned = scanned.expect("a mode above threshold");
        assert_eq!(region.intersect(&scanned), scanned, "case {case}: {region:?} vs {scanned:?}");
    }
}

#[test]
fn separable_support_is_the_tail_bound() {
    let pbox = PBox::new(
        GaussianCorner::new([10.0, 10.0], [[1.0, 0.0], [0.0, 1.0]]).unwrap(),
        GaussianCorner::new([20.0, 20.0], [[1.0, 0.0], [0.0, 1.0]]).unwrap(),
    )
    .unwrap();
    // With unit variance, k is the upper 0.0027 quantile of the standard normal.
    let k = statrs::distribution::Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - 0.0027);
    let lo = (10.0 - k).floor() as i64;
    let hi = (20.0 + k).floor() as i64;
    assert_eq!(support_region(&pbox, 0.0027).unwrap(), PixelRect::new(lo, lo, hi, hi));
}

#[test]
fn tight_bbox_matches_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let (w, h) = (rng.gen_range(1..=64usize), rng.gen_range(1..=64usize));
        let density = rng.gen_range(0.001..0.2);
        let bits: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(density)).collect();
        let origin = (rng.gen_range(-10..10), rng.gen_range(-10..10));
        let mask = SegmentMask::from_bits(origin, w, h, &bits).unwrap();
        let set: Vec<(i64, i64)> =
            (0..w * h).filter(|i| bits[*i]).map(|i| (origin.0 + (i % w) as i64, origin.1 + (i / w) as i64)).collect();
        match set.is_empty() {
            true => assert!(tight_bbox(&mask).is_err()),
            false => {
                let r = tight_bbox(&mask).unwrap();
                assert!(set.iter().all(|&(x, y)| r.contains(x, y)));
                assert!(set.iter().any(|&(x, _)| x == r.x_min) && set.iter().any(|&(x, _)| x == r.x_max));
                assert!(set.iter().any(|&(_, y)| y == r.y_min) && set.iter().any(|&(_, y)| y == r.y_max));
            }
        }
    }
}

/// Best total over every injection of the smaller side into the larger,
/// summed in row order.
fn exhaustive_best(q: &[Vec<f64>]) -> f64 {
    fn go(q: &[Vec<f64>], row: usize, acc: f64, used: &mut Vec<bool>, skips: usize) -> f64 {
        if row == q.len() {
            return acc;
        }
        let mut best = f64::NEG_INFINITY;
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                best = best.max(go(q, row + 1, acc + q[row][c], used, skips));
                used[c] = false;
            }
        }
        if skips > 0 {
            best = best.max(go(q, row + 1, acc, used, skips - 1));
        }
        best
    }
    let cols = q.first().map_or(0, Vec::len);
    let skips = q.len().saturating_sub(cols);
    go(q, 0, 0.0, &mut vec![false; cols], skips)
}

#[test]
fn solver_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..2000 {
        let (m, n) = if case < 200 { (5, 7) } else { (rng.gen_range(1..=5), rng.gen_range(1..=5)) };
        let q: Vec<Vec<f64>> =
            (0..m).map(|_| (0..n).map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..1.0) }).collect()).collect();
        let pairs = solve_assignment(&q);
        assert_eq!(pairs.len(), m.min(n));
        let total = pairs.iter().fold(0.0, |acc, &(r, c)| acc + q[r][c]);
        let best = exhaustive_best(&q);
        assert_eq!(total, best, "case {case}: {q:?}");
    }
}
