use std::f64::consts::FRAC_1_SQRT_2;

use bqc_core::harness::{self, monte_carlo, run_end_to_end_with, NoiseMode, RunConfig, RunStatus};
use bqc_core::mbqc::{self, MeasurementPattern};
use bqc_core::processor::exact_success_probability;
use bqc_core::{Angle, NoiseParams};
use num_complex::Complex64 as C;

fn angles(ks: &[i64]) -> Vec<Angle> {
    ks.iter().map(|&k| Angle::new(k)).collect()
}

fn e(k: i64) -> C {
    C::from_polar(1.0, k as f64 * std::f64::consts::FRAC_PI_4)
}

#[test]
fn single_vertex_reference() {
    let p = MeasurementPattern::linear_cluster(&angles(&[0])).unwrap();
    let dist = mbqc::reference_mbqc(&p).unwrap();
    assert!((dist[0] - 1.0).abs() < 1e-12 && dist[1] == 0.0);
}

/// Two-vertex chain expanded by hand: after outcome `s` on vertex 0 the
/// second qubit is `c0|0⟩ + c1|1⟩` with `c0,1 = 1 ± (−1)^s e^{−iφ₀}` (norm² 4),
/// then measured at `(−1)^s φ₁`.
#[test]
fn two_vertex_teleportation_identity() {
    for k0 in 0..8 {
        for k1 in 0..8 {
            let mut p0 = 0.0;
            for s in [1.0, -1.0] {
                let c0 = 1.0 + s * e(-k0);
                let c1 = 1.0 - s * e(-k0);
                let xi = if s > 0.0 { k1 } else { -k1 };
                p0 += 0.5 * (c0 + e(-xi) * c1).norm_sqr() / 8.0;
            }
            let p = MeasurementPattern::linear_cluster(&angles(&[k0, k1])).unwrap();
            let dist = mbqc::reference_mbqc(&p).unwrap();
            assert!((dist[0] - p0).abs() < 1e-12, "phi = ({k0}, {k1})");
            assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
    let p = MeasurementPattern::linear_cluster(&angles(&[2, 2])).unwrap();
    assert!((mbqc::reference_mbqc(&p).unwrap()[0] - 1.0).abs() < 1e-12);
    let p = MeasurementPattern::linear_cluster(&angles(&[2, 6])).unwrap();
    assert!(mbqc::reference_mbqc(&p).unwrap()[0].abs() < 1e-12);
}

/// `H·diag(1, e^{−iφ})` per measured vertex, then a rotated measurement of the last.
fn circuit_distribution(phi: &[i64]) -> [f64; 2] {
    let s = FRAC_1_SQRT_2;
    let mut psi = [C::new(s, 0.0), C::new(s, 0.0)];
    let (last, rest) = phi.split_last().unwrap();
    for &k in rest {
        let b = psi[1] * e(-k);
        psi = [(psi[0] + b) * s, (psi[0] - b) * s];
    }
    let amp = |sign: f64| (psi[0] + sign * e(-*last) * psi[1]) * s;
    [amp(1.0).norm_sqr(), amp(-1.0).norm_sqr()]
}

#[test]
fn four_vertex_cluster_matches_circuit() {
    for phi in [[0, 0, 0, 0], [1, 2, 3, 4], [7, 1, 6, 2], [2, 2, 2, 2], [3, 0, 5, 1]] {
        let p = MeasurementPattern::linear_cluster(&angles(&phi)).unwrap();
        let reference = mbqc::reference_mbqc(&p).unwrap();
        let circuit = circuit_distribution(&phi);
        for (a, b) in reference.iter().zip(circuit) {
            assert!((a - b).abs() < 1e-12, "{phi:?}: {reference:?} vs {circuit:?}");
        }
    }
}

#[test]
fn unmasked_run_equals_reference_run() {
    let p = MeasurementPattern::linear_cluster(&angles(&[1, 5, 2, 7])).unwrap();
    for seed in 0..50 {
        let a = mbqc::run_bfk(&p, &angles(&[0; 4]), &[false; 4], &mut harness::trial_rng(seed, 0)).unwrap();
        let b = mbqc::reference_sample(&p, &mut harness::trial_rng(seed, 0)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn bfk_transcripts_are_deterministic() {
    let p = MeasurementPattern::linear_cluster(&angles(&[1, 5, 2, 7])).unwrap();
    let run = |seed| {
        mbqc::run_bfk(&p, &angles(&[3, 1, 4, 1]), &[true, false, true, true], &mut harness::trial_rng(seed, 0)).unwrap()
    };
    assert_eq!(run(9), run(9));
}

#[test]
fn sweep_corner_rows() {
    let report = harness::sweep(&RunConfig::new(vec![0.3, 1.0], vec![0.0, 1.0], 50, 2)).unwrap();
    let row = |g: f64, f: f64| report.rows.iter().find(|r| r.gamma == g && r.f == f).unwrap();
    assert_eq!(row(1.0, 1.0).p_closed_form, 0.0625);
    for g in [0.3, 1.0] {
        assert_eq!(row(g, 0.0).p_exact, 0.0);
        assert_eq!(row(g, 0.0).p_closed_form, 0.0);
        assert_eq!(row(g, 0.0).p_montecarlo, 0.0);
    }
    for r in &report.rows {
        assert!((0.0..=1.0).contains(&r.p_exact) && (0.0..=1.0).contains(&r.p_montecarlo));
        assert_eq!(r.abs_diff, (r.p_exact - r.p_closed_form).abs());
        if let Some(fid) = r.mean_fidelity {
            assert!((0.0..=1.0 + 1e-12).contains(&fid));
        }
    }
}

#[test]
fn monte_carlo_matches_exact_at_full_transmission() {
    let exact = exact_success_probability(0.5, 1.0).unwrap().p_simulated;
    let mc = monte_carlo(0.5, 1.0, 100_000, 17).unwrap();
    assert!((mc.estimate - exact).abs() <= 3.0 * mc.stderr, "{mc:?} vs {exact}");
    assert!((mc.mean_fidelity.unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn monte_carlo_stderr_scales_with_root_n() {
    let a = monte_carlo(0.2, 1.0, 4_000, 3).unwrap();
    let b = monte_carlo(0.2, 1.0, 8_000, 4).unwrap();
    let ratio = a.stderr / b.stderr;
    assert!((ratio - 2f64.sqrt()).abs() < 0.15, "ratio {ratio}");
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| harness::sweep(&RunConfig::new(vec![0.4, 0.8], vec![0.7], 300, 5)).unwrap())
    };
    assert_eq!(run(1).to_csv(), run(3).to_csv());
}

fn e2e_config(trials: usize, seed: u64) -> RunConfig {
    RunConfig::new(vec![0.0], vec![1.0], trials, seed)
}

#[test]
fn noiseless_trivial_run_is_deterministic() {
    let mut cfg = e2e_config(20, 1);
    cfg.noise = NoiseMode::Fixed(NoiseParams::identity());
    cfg.thetas = Some(vec![0]);
    cfg.masks = Some(vec![false]);
    let report = run_end_to_end_with(&cfg, &harness::trivial_pattern(), 0.0, 1.0).unwrap();
    assert_eq!(report.summary.completed, 20);
    assert_eq!(report.summary.output_counts, vec![20, 0]);
    for run in &report.runs {
        let rec = &run.transcript.records()[0];
        let herald = rec.herald.unwrap();
        assert!((herald.fidelity - 1.0).abs() < 1e-10);
        assert_eq!(u64::from(herald.attempts), run.photons_sent);
    }
}

/// With full amplification strength the heralded branch has zero weight,
/// so every photon is lost to the retry cap.
#[test]
fn full_strength_amplifier_never_heralds() {
    let mut cfg = RunConfig::new(vec![1.0], vec![1.0], 2, 1);
    cfg.noise = NoiseMode::Fixed(NoiseParams::identity());
    cfg.max_retries = 200;
    let report = run_end_to_end_with(&cfg, &harness::trivial_pattern(), 1.0, 1.0).unwrap();
    assert!(!report.all_completed());
    assert_eq!(report.runs[0].status, RunStatus::RetryCapExceeded { vertex: 0, attempts: 200 });
    assert_eq!(report.runs[0].photons_sent, 200);
}

#[test]
fn e2e_transcript_is_reproducible() {
    let pattern = MeasurementPattern::linear_cluster(&angles(&[1, 2, 3, 4])).unwrap();
    let mut cfg = RunConfig::new(vec![0.5], vec![0.7], 3, 7);
    cfg.noise = NoiseMode::Haar;
    let json = || serde_json::to_string(&run_end_to_end_with(&cfg, &pattern, 0.5, 0.7).unwrap()).unwrap();
    assert_eq!(json(), json());
}

#[test]
fn e2e_outputs_follow_reference() {
    let pattern = MeasurementPattern::linear_cluster(&angles(&[1, 2, 3, 4])).unwrap();
    let report = run_end_to_end_with(&e2e_config(10_000, 11), &pattern, 0.0, 1.0).unwrap();
    let s = &report.summary;
    assert_eq!(s.completed, 10_000);
    assert!((s.mean_fidelity.unwrap() - 1.0).abs() < 1e-10);
    let n = s.completed as f64;
    for (c, p) in s.output_counts.iter().zip(&s.reference) {
        let sigma = (p * (1.0 - p) / n).sqrt();
        assert!((*c as f64 / n - p).abs() <= 3.0 * sigma, "{c} vs {p}");
    }
}
