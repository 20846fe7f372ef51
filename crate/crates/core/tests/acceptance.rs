//! One test per acceptance criterion. Each prints a single PASS/FAIL line;
//! run with `--nocapture` to see them all.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use pdq_core::ground_truth::{GroundTruthFrame, GroundTruthObject, SegmentMask};
use pdq_core::quality::DetectionRaster;
use pdq_core::synth::{
    brute_force_frame_score, generate, mc_inclusion_probability, naive_pair_losses, synthetic_dataset, CovarianceModel,
    PerturbationSpec, SceneSpec, ShapeKind, SyntheticScene,
};
use pdq_core::{
    evaluate_dataset, pixel_inclusion_probability, score_frame, EvalConfig, EvaluationSummary, GaussianCorner, PBox,
    PixelRect, ProbabilisticDetection, QualityConfig,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(id: &str, pass: bool, detail: impl std::fmt::Display) {
    println!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}

fn random_psd(rng: &mut ChaCha8Rng, max_eig: f64) -> [[f64; 2]; 2] {
    let (l1, l2) = (rng.gen_range(0.0..=max_eig), rng.gen_range(0.0..=max_eig));
    let t: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let (c, s) = (t.cos(), t.sin());
    let off = (l1 - l2) * c * s;
    [[l1 * c * c + l2 * s * s, off], [off, l1 * s * s + l2 * c * c]]
}

fn random_pbox(rng: &mut ChaCha8Rng, extent: f64, max_eig: f64) -> PBox<f64> {
    let x1 = rng.gen_range(0.0..extent * 0.6);
    let y1 = rng.gen_range(0.0..extent * 0.6);
    let x2 = x1 + rng.gen_range(1.0..extent * 0.4);
    let y2 = y1 + rng.gen_range(1.0..extent * 0.4);
    let tl = GaussianCorner::new([x1, y1], random_psd(rng, max_eig)).unwrap();
    let br = GaussianCorner::new([x2, y2], random_psd(rng, max_eig)).unwrap();
    PBox::new(tl, br).unwrap()
}

/// Published (overall quality, TP, FP, FN) and PDQ for one leaderboard row.
fn leaderboard_row(id: &str, overall: f64, tp: u64, fp: u64, fneg: u64, published: f64) {
    let start = Instant::now();
    let s = EvaluationSummary::from_totals(overall, 0.0, 0.0, tp, fp, fneg);
    let elapsed = start.elapsed();
    let err = (s.pdq - published).abs();
    verdict(
        id,
        err <= 0.001 && elapsed < Duration::from_secs(1),
        format_args!("identity gives {:.6}, published {published:.3}, |error| {err:.6} (limit 0.001), {elapsed:?}", s.pdq),
    );
}

#[test]
fn criterion_1_leaderboard_row_1() {
    leaderboard_row("1 (row 1)", 0.482, 98_916, 41_645, 197_451, 0.141);
}

#[test]
fn criterion_1_leaderboard_row_2() {
    leaderboard_row("1 (row 2)", 0.476, 109_241, 91_598, 187_126, 0.133);
}

#[test]
fn criterion_1_leaderboard_row_3() {
    leaderboard_row("1 (row 3)", 0.344, 87_031, 42_054, 209_336, 0.088);
}

#[test]
fn criterion_1_leaderboard_row_4() {
    leaderboard_row("1 (row 4)", 0.499, 50_713, 12_234, 245_654, 0.082);
}

#[test]
fn criterion_2_perfect_detections_score_one() {
    let start = Instant::now();
    let scene = SceneSpec { shapes: vec![ShapeKind::Rectangle], ..SceneSpec::default() };
    let (gts, dets) = synthetic_dataset(&scene, &PerturbationSpec::perfect(scene.num_classes), 10, 1, 2024).unwrap();
    let dets: BTreeMap<u64, _> = gts.iter().map(|f| f.frame_index).zip(dets).collect();
    let eval = evaluate_dataset(&gts, &dets, &EvalConfig::default(), 1).unwrap();
    let elapsed = start.elapsed();
    let s = eval.summary;
    verdict(
        "2",
        s.pdq == 1.0 && s.false_positives == 0 && s.false_negatives == 0 && s.true_positives > 0 && elapsed < Duration::from_secs(1),
        format_args!("PDQ {} over {} objects in 10 frames, {elapsed:?}", s.pdq, s.true_positives),
    );
}

#[test]
fn criterion_3_inclusion_matches_monte_carlo() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples = 100_000;
    let mut agree = 0;
    for case in 0..100 {
        let pbox = random_pbox(&mut rng, 60.0, 25.0);
        let tl = pbox.top_left().mean();
        let br = pbox.bottom_right().mean();
        // pixel centers around the box, including the uncertain edges
        let px = rng.gen_range(tl[0] - 6.0..br[0] + 6.0).floor() + 0.5;
        let py = rng.gen_range(tl[1] - 6.0..br[1] + 6.0).floor() + 0.5;
        let analytic = pixel_inclusion_probability([px, py], &pbox);
        let (mc, _) = mc_inclusion_probability([px, py], &pbox, samples, 1000 + case);
        // standard error of the estimator at the analytic value, so that
        // an estimate of exactly 0 or 1 still gets a meaningful band
        let se = (analytic * (1.0 - analytic) / samples as f64).sqrt();
        if (mc - analytic).abs() <= 3.0 * se.max(0.5 / samples as f64) {
            agree += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "3",
        agree >= 99 && elapsed < Duration::from_secs(30),
        format_args!("{agree}/100 cases within 3 standard errors of 1e5-sample estimates, {elapsed:?}"),
    );
}

/// Up to five ground truths and five detections, some displaced, some spurious.
fn small_frame(seed: u64) -> (Vec<GroundTruthObject>, Vec<ProbabilisticDetection<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = SceneSpec { width: 96, height: 96, max_objects: rng.gen_range(0..=5), min_side: 6, max_side: 36, ..SceneSpec::default() };
    let scene = SyntheticScene::generate(&spec, seed, 0);
    let pert = PerturbationSpec {
        translation_sigma: rng.gen_range(0.0..8.0),
        scale_sigma: 0.15,
        label_flip_probability: 0.3,
        label_confidence: rng.gen_range(0.4..1.0),
        covariance: CovarianceModel::Fixed(rng.gen_range(0.0..16.0)),
        num_classes: spec.num_classes,
    };
    let mut dets = generate::<f64>(&pert, &scene).unwrap();
    dets.retain(|_| rng.gen_bool(0.8));
    while dets.len() < 5 && rng.gen_bool(0.5) {
        let pbox = random_pbox(&mut rng, 96.0, 9.0);
        let p: f64 = rng.gen_range(0.0..1.0);
        dets.push(ProbabilisticDetection::new(pbox, vec![p, (1.0 - p) / 2.0, (1.0 - p) / 2.0], 0).unwrap());
    }
    dets.shuffle(&mut rng);
    (scene.objects, dets)
}

#[test]
fn criterion_4_assignment_is_optimal() {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for seed in 0..200 {
        let (gts, dets) = small_frame(seed);
        let mut cfg = EvalConfig::default();
        cfg.quality.clip = Some(PixelRect::image(96, 96));
        let fast = score_frame(&gts, &dets, &cfg).unwrap();
        let slow = brute_force_frame_score(&gts, &dets, &cfg).unwrap();
        let same = fast.total_ppdq() == slow.total_ppdq()
            && fast.true_positives() == slow.true_positives()
            && fast.false_positives() == slow.false_positives()
            && fast.false_negatives() == slow.false_negatives();
        if !same {
            mismatches.push(seed);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "4",
        mismatches.is_empty() && elapsed < Duration::from_secs(60),
        format_args!("200 frames, exact mismatches {mismatches:?}, {elapsed:?}"),
    );
}

#[test]
fn criterion_5_losses_match_pixel_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (w, h) = (rng.gen_range(8..=64u32), rng.gen_range(8..=64u32));
        let frame = PixelRect::image(w, h);
        let (sw, sh) = (rng.gen_range(1..=w as usize), rng.gen_range(1..=h as usize));
        let origin = (rng.gen_range(0..=(w as usize - sw)) as i64, rng.gen_range(0..=(h as usize - sh)) as i64);
        let density = rng.gen_range(0.2..1.0);
        let mut bits: Vec<bool> = (0..sw * sh).map(|_| rng.gen_bool(density)).collect();
        bits[rng.gen_range(0..sw * sh)] = true;
        let gt = GroundTruthObject::new(0, 0, SegmentMask::from_bits(origin, sw, sh, &bits).unwrap(), 0).unwrap();
        let pbox = random_pbox(&mut rng, w.min(h) as f64, 16.0);
        for normalization in [pdq_core::BackgroundNormalization::GroundTruthSize, pdq_core::BackgroundNormalization::DetectionSize] {
            let cfg = QualityConfig { background_normalization: normalization, ..QualityConfig::default() }.clipped_to(frame);
            let raster = DetectionRaster::new(&pbox, &cfg).unwrap();
            let (fg, _) = raster.foreground_loss(&gt);
            let bg = raster.background_loss(&gt, normalization);
            let naive = naive_pair_losses(&gt, &pbox, cfg.threshold, normalization, &frame);
            worst = worst.max((fg - naive.foreground).abs()).max((bg - naive.background).abs());
        }
    }
    verdict("5", worst <= 1e-9, format_args!("100 pairs, worst loss difference {worst:.3e} (limit 1e-9)"));
}

fn rect_object(class_id: usize, id: u64, r: PixelRect) -> GroundTruthObject {
    GroundTruthObject::new(class_id, id, SegmentMask::filled(&r), 0).unwrap()
}

fn covering(r: PixelRect, var: f64, class_id: usize) -> ProbabilisticDetection<f64> {
    let pbox = PBox::covering(&r).unwrap().with_isotropic_covariance(var, var).unwrap();
    let mut probs = vec![0.0; 2];
    probs[class_id] = 0.9;
    ProbabilisticDetection::new(pbox, probs, 0).unwrap()
}

#[test]
fn criterion_6_tiny_objects_are_neutral() {
    let big = PixelRect::new(10, 10, 49, 39);
    let narrow = PixelRect::new(70, 10, 78, 49); // 9 px wide, 360 px
    let sparse = GroundTruthObject::new(
        1,
        3,
        SegmentMask::from_pixels((60..70).flat_map(|y| (70..80).map(move |x| (x, y))).filter(|&(x, y)| x < 75 || y < 65)),
        0,
    )
    .unwrap(); // 75 px in a 10x10 box
    let cfg = EvalConfig::default();

    let base_gts = vec![rect_object(0, 0, big)];
    let base_dets = vec![covering(big, 2.0, 0)];
    let base = score_frame(&base_gts, &base_dets, &cfg).unwrap();

    let mut cases = Vec::new();
    // detections matched to tiny objects
    for tiny in [rect_object(1, 1, narrow), sparse.clone()] {
        let r = tiny.bbox();
        let gts = vec![base_gts[0].clone(), tiny];
        let dets = vec![base_dets[0].clone(), covering(r, 1.0, 1)];
        cases.push(("matched", score_frame(&gts, &dets, &cfg).unwrap()));
        let mut swapped = dets.clone();
        swapped.reverse();
        cases.push(("matched, reordered", score_frame(&gts, &swapped, &cfg).unwrap()));
    }
    // tiny objects nobody detected
    let gts = vec![base_gts[0].clone(), rect_object(1, 1, narrow), sparse];
    cases.push(("unmatched", score_frame(&gts, &base_dets, &cfg).unwrap()));

    let counts = |r: &pdq_core::FrameResult<f64>| (r.true_positives(), r.false_positives(), r.false_negatives());
    let bad: Vec<_> = cases
        .iter()
        .filter(|(_, r)| counts(r) != counts(&base) || r.total_ppdq() != base.total_ppdq())
        .map(|(name, r)| format!("{name}: {:?}", counts(r)))
        .collect();
    let filtered_seen = cases.iter().filter(|(n, _)| n.starts_with("matched")).all(|(_, r)| r.filtered_pairs.len() == 1);
    verdict(
        "6",
        bad.is_empty() && filtered_seen,
        format_args!("{} frames with tiny objects, baseline counts {:?}, deviations {bad:?}", cases.len(), counts(&base)),
    );
}

/// One-sided binomial tail `P(X >= k)` for `X ~ Bin(n, 1/2)`.
fn sign_test_p(k: u64, n: u64) -> f64 {
    let mut log_choose = 0.0f64;
    let mut total = 0.0;
    for i in 0..=n {
        if i > 0 {
            log_choose += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        if i >= k {
            total += (log_choose - n as f64 * std::f64::consts::LN_2).exp();
        }
    }
    total
}

#[test]
fn criterion_7_calibrated_covariance_is_rewarded() {
    let scene = SceneSpec::default();
    let pert = |covariance| PerturbationSpec {
        translation_sigma: 3.0,
        scale_sigma: 0.0,
        label_flip_probability: 0.0,
        label_confidence: 1.0,
        covariance,
        num_classes: scene.num_classes,
    };
    let score = |covariance, seed| {
        let (gts, dets) = synthetic_dataset(&scene, &pert(covariance), 5, 1, seed).unwrap();
        let dets: BTreeMap<u64, _> = gts.iter().map(|f| f.frame_index).zip(dets).collect();
        evaluate_dataset(&gts, &dets, &EvalConfig::default(), 1).unwrap().summary.pdq
    };
    let (mut wins, mut losses) = (0u64, 0u64);
    let (mut sum_fixed, mut sum_zero) = (0.0, 0.0);
    for seed in 0..100 {
        let fixed = score(CovarianceModel::Fixed(9.0), seed);
        let zero = score(CovarianceModel::Zero, seed);
        sum_fixed += fixed;
        sum_zero += zero;
        match fixed.partial_cmp(&zero) {
            Some(std::cmp::Ordering::Greater) => wins += 1,
            Some(std::cmp::Ordering::Less) => losses += 1,
            _ => {}
        }
    }
    let p = sign_test_p(wins, wins + losses);
    verdict(
        "7",
        sum_fixed > sum_zero && p < 0.01,
        format_args!(
            "mean PDQ fixed {:.4} vs zero {:.4}, {wins} wins / {losses} losses, sign test p = {p:.2e}",
            sum_fixed / 100.0,
            sum_zero / 100.0
        ),
    );
}

#[test]
fn criterion_8_band_pixels_do_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let spec = SceneSpec { shapes: vec![ShapeKind::Ellipse, ShapeKind::LShape], max_objects: 1, ..SceneSpec::default() };
    let cfg = QualityConfig::default();
    let mut worst: f64 = 0.0;
    let mut band_pixels = 0usize;
    for seed in 0..50 {
        let scene = SyntheticScene::generate(&spec, seed, 0);
        let gt = &scene.objects[0];
        let b = gt.bbox();
        let jitter = |rng: &mut ChaCha8Rng| rng.gen_range(-3.0..3.0);
        let pbox = PBox::from_corners(b.x_min as f64 + jitter(&mut rng), b.y_min as f64 + jitter(&mut rng), b.x_max as f64 + 1.0 + jitter(&mut rng), b.y_max as f64 + 1.0 + jitter(&mut rng))
            .unwrap()
            .with_isotropic_covariance(rng.gen_range(0.5..9.0), rng.gen_range(0.5..9.0))
            .unwrap();
        let det = ProbabilisticDetection::new(pbox, vec![0.8, 0.1, 0.1], 0).unwrap();
        let raster = DetectionRaster::new(&pbox, &cfg).unwrap();
        let before = raster.pairwise(gt, &det, &cfg).ppdq;
        let mut heat = raster.heatmap().clone();
        for y in b.y_min..=b.y_max {
            for x in b.x_min..=b.x_max {
                if !gt.segment().contains(x, y) && heat.set(x, y, rng.gen_range(0.0..1.0)) {
                    band_pixels += 1;
                }
            }
        }
        let after = DetectionRaster::from_heatmap(heat, cfg.threshold).pairwise(gt, &det, &cfg).ppdq;
        worst = worst.max((after - before).abs());
    }
    verdict(
        "8",
        worst <= 1e-12 && band_pixels > 0,
        format_args!("50 pairs, {band_pixels} band pixels perturbed, worst pPDQ change {worst:.3e} (limit 1e-12)"),
    );
}

#[test]
fn criterion_9_throughput() {
    let scene = SceneSpec { width: 640, height: 480, max_objects: 10, min_side: 12, max_side: 160, ..SceneSpec::default() };
    let pert = PerturbationSpec {
        translation_sigma: 4.0,
        scale_sigma: 0.1,
        label_flip_probability: 0.2,
        label_confidence: 0.8,
        covariance: CovarianceModel::Percentage(0.1),
        num_classes: scene.num_classes,
    };
    let (gts, dets): (Vec<GroundTruthFrame>, _) = synthetic_dataset(&scene, &pert, 1000, 10, 9).unwrap();
    let dets: BTreeMap<u64, _> = gts.iter().map(|f| f.frame_index).zip(dets).collect();
    let cfg = EvalConfig::default();

    let start = Instant::now();
    let single = evaluate_dataset(&gts, &dets, &cfg, 1).unwrap();
    let t1 = start.elapsed();

    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let workers = cores.clamp(2, 4);
    let start = Instant::now();
    let parallel = evaluate_dataset(&gts, &dets, &cfg, workers).unwrap();
    let tn = start.elapsed();

    let speedup = t1.as_secs_f64() / tn.as_secs_f64();
    // scaling can only be observed with at least two cores
    let scaling_ok = cores < 2 || speedup >= 0.6 * workers as f64;
    verdict(
        "9",
        t1 < Duration::from_secs(60) && single == parallel && scaling_ok,
        format_args!(
            "1000 frames of 640x480: {t1:?} on one worker, {tn:?} on {workers} ({speedup:.2}x, {cores} cores available{}), results identical: {}",
            if cores < 2 { ", scaling not measurable" } else { "" },
            single == parallel
        ),
    );
}
