//! Acceptance gate: one test per published check of the suite, each printing
//! a single PASS/FAIL line with the measured numbers (visible under
//! `--nocapture`, and always on failure). Checks that cannot hold at these
//! sizes are asserted anyway and fail with the measured gap; see the README
//! for which ones those are and why.

use std::sync::Arc;
use std::time::{Duration, Instant};

use num::{BigInt, BigRational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qtopo::complexes::{
    classical_complex, inclusion_check, rips_diameter_filtration, sensor_labels, vietoris_rips,
    FilteredComplex, SimplicialComplex,
};
use qtopo::geometry::{PartitionOfUnity, ProbeGrid, SpherePoint};
use qtopo::linalg::{operator_norm, CMatrix};
use qtopo::persistence::{homology_rank_bruteforce, reduce_to_barcode};
use qtopo::piecewise::fit_scaling_exponent;
use qtopo::pipeline::{
    run_appendix_suite, run_hypergraph_demo, run_inference_pipeline, run_nerve_demo,
    run_registration_scan, thresholded_complex, ExperimentConfig, NERVE_COVER_RADIUS,
    SPHERE_RANKS,
};
use qtopo::quantize::{
    normalized_trace, partition_member_grids, toeplitz, toeplitz_from_grid, QuantizationContext,
};
use qtopo::registration::Hypergraph;

fn verdict(label: &str, ok: bool, detail: &str) {
    let state = if ok { "PASS" } else { "FAIL" };
    println!("{label} {state}: {detail}");
    assert!(ok, "{label} {state}: {detail}");
}

fn within(budget_secs: u64, t0: Instant, label: &str) {
    let elapsed = t0.elapsed();
    assert!(
        elapsed < Duration::from_secs(budget_secs),
        "{label} exceeded its {budget_secs} s budget: took {elapsed:?}"
    );
}

fn scan_config() -> ExperimentConfig {
    ExperimentConfig {
        k: vec![16, 32, 64, 128, 256],
        ..ExperimentConfig::default()
    }
}

#[test]
fn criterion_01_quantization_resolves_the_identity() {
    let t0 = Instant::now();
    let config = ExperimentConfig::default();
    let net = Arc::new(config.net().unwrap());
    let grid = ProbeGrid::verification_default();
    let mut details = Vec::new();
    let mut ok = true;
    for k in [16usize, 64, 256] {
        let ctx = QuantizationContext::with_defaults(k).unwrap();
        let d = ctx.dim();
        let mut one = toeplitz(&ctx, |_: &SpherePoint| 1.0).unwrap();
        subtract_identity(&mut one);
        let unit_defect = operator_norm(&one, "unit symbol defect").unwrap();

        let pou = PartitionOfUnity::build(Arc::clone(&net), config.a, config.lambda, &grid).unwrap();
        let grids = partition_member_grids(&ctx, &pou).unwrap();
        let mut sum = CMatrix::zeros(d, d);
        for g in &grids {
            sum += toeplitz_from_grid(&ctx, g).unwrap();
        }
        subtract_identity(&mut sum);
        let sum_defect = operator_norm(&sum, "partition sum defect").unwrap();

        ok &= unit_defect < 1e-10 && sum_defect < 1e-10;
        details.push(format!(
            "k={k}: |T(1)-id|={unit_defect:.2e}, |sum T(f_z)-id|={sum_defect:.2e}"
        ));
    }
    within(60, t0, "criterion 1");
    verdict(
        "criterion 1 (identity resolution < 1e-10)",
        ok,
        &format!("{} [{:?}]", details.join("; "), t0.elapsed()),
    );
}

fn subtract_identity(op: &mut CMatrix) {
    for i in 0..op.nrows() {
        op[(i, i)] -= 1.0;
    }
}

#[test]
fn criterion_02_trace_correspondence_for_a_smooth_zonal_symbol() {
    let t0 = Instant::now();
    // f(u) = 1/(2-u) on the axis coordinate: mean log(3)/2, square mean 1/3.
    let f = |p: &SpherePoint| 1.0 / (2.0 - p.z());
    let exact_mean = 0.5 * 3.0_f64.ln();
    let exact_square = 1.0 / 3.0;
    let mut worst_linear: f64 = 0.0;
    let mut quad_samples = Vec::new();
    for k in [16usize, 32, 64, 128, 256] {
        let ctx = QuantizationContext::with_defaults(k).unwrap();
        let d = ctx.dim() as f64;
        let op = toeplitz(&ctx, f).unwrap();
        let linear = (op.trace().re / d - exact_mean).abs();
        worst_linear = worst_linear.max(linear);
        let quadratic = (normalized_trace(&(&op * &op)) - exact_square).abs();
        quad_samples.push((ctx.hbar(), quadratic));
    }
    // The mean itself is reproduced exactly at every level, so the rate
    // carrying the semiclassical correction is read off the squared symbol.
    let fit = fit_scaling_exponent(&quad_samples).unwrap();
    within(60, t0, "criterion 2");
    verdict(
        "criterion 2 (trace correspondence)",
        worst_linear < 1e-10 && fit.slope >= 0.9,
        &format!(
            "max |tr T(f)/d - mean(f)| = {worst_linear:.2e} (< 1e-10); \
             squared-symbol slope {:.4} (>= 0.9) [{:?}]",
            fit.slope,
            t0.elapsed()
        ),
    );
}

#[test]
fn criterion_03_pair_registration_rates() {
    let t0 = Instant::now();
    let scan = run_registration_scan(&scan_config()).unwrap();
    let (ref_k, ref_p) = scan.disjoint.reference.expect("scan includes k = 64");
    assert_eq!(ref_k, 64);
    let ok = scan.pair_report.pass
        && ref_p < 1e-8
        && scan.disjoint.log_slope_per_k < 0.0
        && scan.disjoint.correlation < -0.99;
    within(120, t0, "criterion 3");
    verdict(
        "criterion 3 (pair rates)",
        ok,
        &format!(
            "overlapping-pair slope {:.4} (>= 0.9); separated pair p(64) = {ref_p:.3e} (< 1e-8), \
             ln p per k slope {:.4}, correlation {:.5} (< -0.99) [{:?}]",
            scan.pair_report.slope,
            scan.disjoint.log_slope_per_k,
            scan.disjoint.correlation,
            t0.elapsed()
        ),
    );
}

#[test]
fn criterion_04_threshold_complex_equals_support_complex_at_desk_scale() {
    let t0 = Instant::now();
    let config = ExperimentConfig::default();
    let ctx = config.context(64).unwrap();
    let net = Arc::new(config.net().unwrap());
    let grid = ProbeGrid::verification_default();
    let mut complexes = Vec::new();
    let mut lines = Vec::new();
    let mut equal_both = true;
    for (eps, name) in [(config.a, "small scale"), (config.b, "large scale")] {
        let (q, choice) =
            thresholded_complex(&ctx, &net, &config, eps, &grid, None).unwrap();
        let c = classical_complex(&net, eps, config.lambda, config.max_dim).unwrap();
        let (extra, missing) = symmetric_difference(&q, &c);
        let equal = q == c;
        equal_both &= equal;
        lines.push(format!(
            "{name}: thresholded {:?} vs support-overlap {:?} ({} extra, {} missing, cut {} {:.4})",
            q.counts(),
            c.counts(),
            extra,
            missing,
            choice.mode,
            choice.value,
        ));
        complexes.push(q);
    }
    let nested = inclusion_check(&complexes[0], &complexes[1]).unwrap();
    lines.push(format!("small-scale complex included in large-scale: {nested}"));
    within(120, t0, "criterion 4");
    println!("criterion 4 measurements: {}", lines.join(" | "));
    verdict(
        "criterion 4 (desk-scale equality with the support complex, plus nesting)",
        equal_both && nested,
        &format!("{} [{:?}]", lines.join(" | "), t0.elapsed()),
    );
}

fn symmetric_difference(a: &SimplicialComplex, b: &SimplicialComplex) -> (usize, usize) {
    let count_missing = |from: &SimplicialComplex, within: &SimplicialComplex| {
        let mut n = 0;
        for d in 0..from.counts().len() {
            for s in from.simplices_of(d) {
                if !within.has_simplex(s) {
                    n += 1;
                }
            }
        }
        n
    };
    (count_missing(a, b), count_missing(b, a))
}

#[test]
fn criterion_05_pipeline_recovers_the_sphere_on_a_plateau() {
    let t0 = Instant::now();
    let config = ExperimentConfig::default();
    let report = run_inference_pipeline(&config).unwrap();
    let run = &report.runs[0];
    let plateau = report
        .epsilon_scan
        .as_ref()
        .and_then(|scan| scan.plateau.as_ref())
        .expect("scan finds a stable window");
    let ok = report.all_match()
        && run.image_ranks == SPHERE_RANKS
        && run.total_rank == 2
        && plateau.ratio >= 1.5
        && plateau.lo <= config.a
        && config.b <= plateau.hi;
    within(600, t0, "criterion 5");
    verdict(
        "criterion 5 (sphere ranks on a stable window)",
        ok,
        &format!(
            "image ranks {:?}, total {}; window [{:.3}, {:.3}] spans x{:.2} (>= 1.5) and \
             contains the working scales [{:?}]",
            run.image_ranks,
            run.total_rank,
            plateau.lo,
            plateau.hi,
            plateau.ratio,
            t0.elapsed()
        ),
    );
}

#[test]
fn criterion_06_support_complex_interleaves_with_rips() {
    let t0 = Instant::now();
    let config = ExperimentConfig::default();
    let net = config.net().unwrap();
    let lambda = config.lambda;
    let mut samples: Vec<f64> = (0..12)
        .map(|i| config.r * (config.r_prime / config.r).powf(i as f64 / 11.0))
        .collect();
    samples.push(config.a);
    samples.push(config.b);
    let mut checked = 0;
    for &t in &samples {
        let rips_lo = vietoris_rips(&net, t / lambda, config.max_dim).unwrap();
        let rips_at = vietoris_rips(&net, t, config.max_dim).unwrap();
        let rips_hi = vietoris_rips(&net, lambda * t, config.max_dim).unwrap();
        let support = classical_complex(&net, t, lambda, config.max_dim).unwrap();
        let support_up = classical_complex(&net, lambda * t, lambda, config.max_dim).unwrap();
        assert!(
            inclusion_check(&rips_at, &support_up).unwrap(),
            "radius-{t} neighborhood complex escapes the support complex one step up"
        );
        assert!(
            inclusion_check(&support, &rips_hi).unwrap(),
            "support complex at {t} escapes the neighborhood complex one step up"
        );
        assert!(
            inclusion_check(&rips_lo, &support).unwrap(),
            "sandwich fails on the left at {t}"
        );
        checked += 1;
    }
    within(120, t0, "criterion 6");
    verdict(
        "criterion 6 (interleaving inclusions)",
        checked == samples.len(),
        &format!(
            "both inclusions and the sandwich hold at {checked} sampled scales in \
             [{:.2}, {:.2}] [{:?}]",
            config.r,
            lambda * config.r_prime,
            t0.elapsed()
        ),
    );
}

#[test]
fn criterion_07_barcode_matches_brute_force_on_random_complexes() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_2026);
    let mut complexes = 0;
    let mut comparisons = 0;
    for _ in 0..200 {
        let fc = random_filtered_complex(&mut rng);
        let top = fc.complex().dim().unwrap_or(0);
        let barcode = reduce_to_barcode(&fc, top).unwrap();
        for v in sample_grid(&fc.grid()) {
            let sub = fc.sublevel(v).unwrap();
            let sub_top = sub.dim().unwrap_or(0);
            let mut alternating = 0i64;
            for degree in 0..=top {
                let brute = if degree <= sub_top {
                    homology_rank_bruteforce(&sub, degree).unwrap()
                } else {
                    0
                };
                let fast = barcode.betti_at(degree, v);
                assert_eq!(
                    brute, fast,
                    "rank mismatch in degree {degree} at value {v} on {:?}",
                    sub.counts()
                );
                alternating += if degree % 2 == 0 { brute as i64 } else { -(brute as i64) };
                comparisons += 1;
            }
            assert_eq!(
                sub.euler_characteristic(),
                alternating,
                "alternating rank sum disagrees with the simplex-count characteristic"
            );
        }
        complexes += 1;
    }

    // Four points at the corners of a unit square: the cycle appears when the
    // last side enters and dies when the first diagonal does.
    let side = 1.0;
    let diag = 2.0_f64.sqrt();
    let dist = vec![
        vec![0.0, side, diag, side],
        vec![side, 0.0, side, diag],
        vec![diag, side, 0.0, side],
        vec![side, diag, side, 0.0],
    ];
    let square = rips_diameter_filtration(&sensor_labels(4), &dist, 2).unwrap();
    let barcode = reduce_to_barcode(&square, 2).unwrap();
    let loops = barcode.bars(1);
    assert_eq!(loops.len(), 1, "unit square carries exactly one loop bar");
    assert_eq!((loops[0].birth, loops[0].death), (side, diag));

    within(120, t0, "criterion 7");
    verdict(
        "criterion 7 (persistence engine against brute force)",
        complexes == 200,
        &format!(
            "{comparisons} rank comparisons over {complexes} random filtered complexes, all \
             characteristics consistent, square-cloud loop bar [{side}, {diag:.6}) [{:?}]",
            t0.elapsed()
        ),
    );
}

fn random_filtered_complex(rng: &mut ChaCha8Rng) -> FilteredComplex {
    let n = rng.gen_range(3..=8);
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = rng.gen_range(0.1..2.0);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let max_dim = rng.gen_range(1..=3);
    let fc = rips_diameter_filtration(&sensor_labels(n), &dist, max_dim).unwrap();
    let complex = fc.complex();
    let top = complex.dim().unwrap_or(0);
    if top < 2 {
        return fc;
    }
    // Thin the top dimension so non-clique complexes (open loops, hollow
    // shells) show up in the sample.
    let mut lists: Vec<Vec<Vec<usize>>> =
        (0..=top).map(|d| complex.simplices_of(d).to_vec()).collect();
    lists[top].retain(|_| rng.gen_bool(0.6));
    let thinned = SimplicialComplex::from_parts(complex.labels().to_vec(), lists).unwrap();
    let values: Vec<Vec<f64>> = (0..thinned.counts().len())
        .map(|d| {
            thinned
                .simplices_of(d)
                .iter()
                .map(|s| {
                    let mut diam: f64 = 0.0;
                    for a in 0..s.len() {
                        for b in (a + 1)..s.len() {
                            diam = diam.max(dist[s[a]][s[b]]);
                        }
                    }
                    diam
                })
                .collect()
        })
        .collect();
    FilteredComplex::new(thinned, values).unwrap()
}

fn sample_grid(grid: &[f64]) -> Vec<f64> {
    match grid.len() {
        0 => vec![0.0],
        len if len <= 4 => grid.to_vec(),
        len => vec![grid[0], grid[len / 3], grid[2 * len / 3], grid[len - 1]],
    }
}

#[test]
fn criterion_08_nerve_of_a_four_cap_cover() {
    let t0 = Instant::now();
    let report = run_nerve_demo(128, 0.1, NERVE_COVER_RADIUS).unwrap();
    verdict(
        "criterion 8a (witnessed nerve has sphere homology)",
        report.classical_betti == SPHERE_RANKS,
        &format!(
            "counts {:?}, homology {:?}",
            report.classical_counts, report.classical_betti
        ),
    );
    println!(
        "criterion 8 sidecar: calibrated threshold {:.3e} reproduces the nerve: {} (window {:?})",
        report.calibrated_tau, report.calibrated_matches, report.calibration_window
    );
    within(180, t0, "criterion 8");
    verdict(
        "criterion 8b (fixed-exponent threshold nerve equals the witnessed nerve at k = 128)",
        report.literal_matches,
        &format!(
            "threshold {:.4} against subset masses max {:.3e}: counts {:?} vs {:?} [{:?}]",
            report.literal_threshold,
            report
                .subset_masses
                .iter()
                .map(|(_, m)| *m)
                .fold(f64::NEG_INFINITY, f64::max),
            report.literal_counts,
            report.classical_counts,
            t0.elapsed()
        ),
    );
}

#[test]
fn criterion_09_triple_registration_rate() {
    let t0 = Instant::now();
    let scan = run_registration_scan(&scan_config()).unwrap();
    within(180, t0, "criterion 9");
    verdict(
        "criterion 9 (three-fold registration rate)",
        scan.triple_report.pass,
        &format!(
            "slope {:.4} (>= 0.12), residual {:.2e} [{:?}]",
            scan.triple_report.slope,
            scan.triple_report.residual,
            t0.elapsed()
        ),
    );
}

#[test]
fn criterion_10_piecewise_symbol_calculus() {
    let t0 = Instant::now();
    let suite = run_appendix_suite(&scan_config()).unwrap();
    let by_name = |name: &str| {
        suite
            .reports
            .iter()
            .find(|r| r.quantity == name)
            .unwrap_or_else(|| panic!("missing report {name}"))
    };
    let projector = by_name("hemisphere projector defect");
    let kernel_mass = by_name("hemisphere boundary kernel mass");
    let cap_product = by_name("cap times complement product");
    let sqrt = by_name("indicator square root");
    let corollary = by_name("three-step registration");
    let caps_a = by_name("overlapping caps product");
    let caps_b = by_name("intersection product");
    for ((ka, va), (kb, vb)) in caps_a.samples.iter().zip(&caps_b.samples) {
        assert_eq!(ka, kb);
        assert!(
            (va - vb).abs() <= 1e-8 * va.max(*vb).max(1e-30),
            "the two product-defect routes disagree at k = {ka}: {va:.6e} vs {vb:.6e}"
        );
    }

    let spectrum = &suite.spectrum;
    let mut k1 = spectrum.k1_spectrum.clone();
    k1.sort_by(f64::total_cmp);
    let k1_exact = k1.len() == 2 && (k1[0] - 0.25).abs() < 1e-12 && (k1[1] - 0.75).abs() < 1e-12;

    let ok = projector.pass
        && projector.slope >= 0.45
        && kernel_mass.pass
        && cap_product.pass
        && cap_product.slope >= 0.2
        && caps_a.pass
        && sqrt.pass
        && sqrt.slope >= 0.1
        && corollary.pass
        && corollary.slope >= 0.1
        && suite.kernel_identity_ok
        && suite.kernel_identity_rel_error <= 1e-6
        && spectrum.gaps_decreasing
        && (spectrum.reference_opnorm - 0.25).abs() <= 0.02
        && k1_exact;
    within(300, t0, "criterion 10");
    verdict(
        "criterion 10 (piecewise calculus suite)",
        ok,
        &format!(
            "projector slope {:.3} (>= 0.45), cap product {:.3} (>= 0.2), sqrt {:.3} (>= 0.1), \
             walk gap {:.3} (>= 0.1), kernel identity {:.2e} (<= 1e-6), spectrum gaps \
             {:?} decreasing = {}, defect at 256 = {:.4} (1/4 +- 0.02), level-1 spectrum {:?} [{:?}]",
            projector.slope,
            cap_product.slope,
            sqrt.slope,
            corollary.slope,
            suite.kernel_identity_rel_error,
            spectrum.gaps,
            spectrum.gaps_decreasing,
            spectrum.reference_opnorm,
            k1,
            t0.elapsed()
        ),
    );
}

#[test]
fn criterion_11_hypergraph_walk_in_exact_arithmetic() {
    let t0 = Instant::now();
    let report = run_hypergraph_demo().unwrap();

    let chain = Hypergraph::new(3, &[vec![0, 1], vec![1, 2]]).unwrap();
    let quarter = BigRational::new(BigInt::from(1), BigInt::from(4));
    let conditional = chain.conditional(1, 0).unwrap();

    let triangle = Hypergraph::new(3, &[vec![0, 1], vec![1, 2], vec![2, 0]]).unwrap();
    let registration = triangle.sequence_probability(&[0, 1, 0]).unwrap();
    let walk = triangle.walk_probability(&[0, 1, 0]).unwrap();

    let ok = conditional == quarter
        && report.two_set.2 == "1/4"
        && report.walk_differs
        && registration != walk;
    within(1, t0, "criterion 11");
    verdict(
        "criterion 11 (exact rational toy model)",
        ok,
        &format!(
            "P(second set | first set) = {conditional} (= 1/4 exactly); three-step registration \
             {registration} vs walk {walk} [{:?}]",
            t0.elapsed()
        ),
    );
}
