//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod oracle;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use bqc_core::channel::{collective_unitary, loss_mixture, sample_noise, Complex64};
use bqc_core::harness::{self, monte_carlo, trial_rng, RunConfig};
use bqc_core::mbqc::{self, MeasurementPattern};
use bqc_core::optics::{bs50, NlaNetwork};
use bqc_core::processor::{bell_ancilla, closed_form_success, decode, exact_success_probability};
use bqc_core::sender::{encode, prepare_plus_theta};
use bqc_core::{Angle, Block, LossParams, ModeLabel, ModeMap, NoiseParams, NoiseProcessor, Path, PhotonicState, Pol, Qubit};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::Rng;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome, Duration);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn noise_for(seed: u64) -> NoiseParams {
    sample_noise(&mut trial_rng(seed, 0))
}

fn noisy_photon(theta: Angle, noise: &NoiseParams) -> PhotonicState {
    collective_unitary(&encode(&prepare_plus_theta(theta)).unwrap(), noise).unwrap()
}

fn decoherence_free_distillation() -> Outcome {
    let mut rng = trial_rng(2024, 0);
    let mut heralds = 0;
    for tuple in 0..120 {
        let theta = Angle::new(rng.random_range(0..8));
        let noise = sample_noise(&mut rng);
        let gamma = f64::from(rng.random_range(1..=9u8)) / 10.0;
        let processor = NoiseProcessor::with_frozen_table(gamma).map_err(|e| e.to_string())?;
        let report = processor.distill(&noisy_photon(theta, &noise), theta).map_err(|e| e.to_string())?;
        for ev in report.events.iter().filter(|e| e.probability > 0.0) {
            let q = processor.correct(ev).map_err(|e| e.to_string())?;
            let fid = q.fidelity(&Qubit::plus_theta(theta));
            ensure((fid - 1.0).abs() <= 1e-10, || {
                format!("tuple {tuple}: {}/{} fidelity {fid}", ev.block, ev.pattern)
            })?;
            heralds += 1;
        }
    }
    Ok(format!("120 tuples, {heralds} heralded events, all corrected to fidelity 1"))
}

fn vacuum_herald_exclusivity() -> Outcome {
    let photon = noisy_photon(Angle::new(5), &noise_for(1));
    let mixture = loss_mixture(&photon, &LossParams::new(0.3).unwrap()).map_err(|e| e.to_string())?;
    let lost = &mixture.iter().find(|t| t.state.is_vacuum()).ok_or("no loss branch")?.state;
    for g in 0..=10 {
        let gamma = f64::from(g) / 10.0;
        let processor = NoiseProcessor::with_frozen_table(gamma).unwrap();
        for report in [
            processor.distill(lost, Angle::ZERO).unwrap(),
            processor.distill_blockwise(lost, Angle::ZERO).unwrap(),
        ] {
            for ev in &report.events {
                ensure(ev.probability == 0.0, || {
                    format!("gamma {gamma}: {}/{} has probability {:e}", ev.block, ev.pattern, ev.probability)
                })?;
            }
        }
    }
    Ok("no coincidence from the vacuum branch at any gamma".into())
}

fn gamma_grid() -> Vec<f64> {
    (0..=10).map(|g| f64::from(g) / 10.0).collect()
}

fn oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for gamma in gamma_grid() {
        for f in [0.0, 0.5, 1.0] {
            let want = oracle::success_probability(gamma, f, oracle::identity_noise());
            let got = exact_success_probability(gamma, f).map_err(|e| e.to_string())?.p_simulated;
            worst = worst.max((got - want).abs());
            ensure((got - want).abs() <= 1e-12, || format!("gamma {gamma}, F {f}: {got} vs oracle {want}"))?;
        }
    }
    Ok(format!("33 grid points, max deviation {worst:e}"))
}

fn closed_form_comparison() -> Outcome {
    let cfg = RunConfig::new(gamma_grid(), vec![0.0, 0.5, 1.0], 200, 4);
    let report = harness::sweep(&cfg).map_err(|e| e.to_string())?;
    ensure(report.rows.len() == 33, || format!("{} rows", report.rows.len()))?;
    for r in &report.rows {
        ensure(r.p_closed_form == closed_form_success(r.gamma, r.f), || format!("closed form at {}", r.gamma))?;
        ensure(r.abs_diff == (r.p_exact - r.p_closed_form).abs(), || "inconsistent difference".into())?;
    }
    let corner = report
        .rows
        .iter()
        .find(|r| r.gamma == 1.0 && r.f == 1.0)
        .ok_or("missing (1, 1) row")?;
    ensure(corner.p_closed_form == 0.0625, || format!("closed form at (1, 1) is {}", corner.p_closed_form))?;
    let csv = report.to_csv();
    ensure(csv.lines().next() == Some(harness::SWEEP_COLUMNS.join(",").as_str()), || "csv header".into())?;
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).map_err(|e| e.to_string())?;
    let max = json["max_abs_diff"].as_f64().ok_or("max_abs_diff missing")?;
    ensure(max == report.max_abs_diff(), || "json max_abs_diff".into())?;
    Ok(format!(
        "both columns on 33 rows; closed form at (1,1) = 0.0625, simulated {}; max |difference| = {max}",
        corner.p_exact
    ))
}

fn linearity_and_monte_carlo() -> Outcome {
    for gamma in gamma_grid() {
        let one = exact_success_probability(gamma, 1.0).unwrap().p_simulated;
        for f in [0.0, 0.25, 0.5, 0.7, 1.0] {
            let p = exact_success_probability(gamma, f).unwrap().p_simulated;
            ensure((p - f * one).abs() <= 1e-12, || format!("gamma {gamma}, F {f}: {p} vs {}", f * one))?;
        }
    }
    let exact = exact_success_probability(0.5, 0.7).unwrap().p_simulated;
    let mc = monte_carlo(0.5, 0.7, 100_000, 2025).map_err(|e| e.to_string())?;
    let z = (mc.estimate - exact).abs() / mc.stderr;
    ensure(z <= 4.0, || format!("estimate {} vs exact {exact}: {z:.2} sigma", mc.estimate))?;
    Ok(format!("linear in F; estimate {} ± {:.2e} vs exact {exact} ({z:.2} sigma)", mc.estimate, mc.stderr))
}

fn bfk_correctness() -> Outcome {
    let phi: Vec<Angle> = [1, 6, 3, 2].into_iter().map(Angle::new).collect();
    let pattern = MeasurementPattern::linear_cluster(&phi).unwrap();
    let reference = mbqc::reference_mbqc(&pattern).unwrap();
    let blinded = mbqc::blinded_average_distribution(&pattern).unwrap();
    let dev = reference
        .iter()
        .zip(&blinded)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure(dev <= 1e-10, || format!("averaged distribution deviates by {dev:e}"))?;

    let n = pattern.vertex_count();
    for seed in 0..500u64 {
        let a = mbqc::run_bfk(&pattern, &[Angle::ZERO; 4], &[false; 4], &mut trial_rng(seed, 0)).unwrap();
        let b = mbqc::reference_sample(&pattern, &mut trial_rng(seed, 0)).unwrap();
        ensure(a == b, || format!("seed {seed}: unmasked run differs from reference"))?;

        let mut rng = trial_rng(seed, 1);
        let thetas: Vec<Angle> = (0..n).map(|_| Angle::new(rng.random_range(0..8))).collect();
        let rs: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let flipped: Vec<bool> = rs.iter().map(|r| !r).collect();
        let x = mbqc::run_bfk(&pattern, &thetas, &rs, &mut trial_rng(seed, 2)).unwrap();
        let y = mbqc::run_bfk(&pattern, &thetas, &flipped, &mut trial_rng(seed, 2)).unwrap();
        for (p, q) in x.records().iter().zip(y.records()) {
            ensure(p.m == q.m && p.b != q.b, || format!("seed {seed}: vertex {} pair disagrees", p.vertex))?;
        }
    }
    Ok(format!("max deviation {dev:e}; 500 seeded pairs agree"))
}

fn exact_blindness() -> Outcome {
    for phi in Angle::all() {
        let d = mbqc::blindness_distribution(phi);
        ensure(d == [0.125; 8], || format!("phi' = {phi}: {d:?}"))?;
    }
    let mi = mbqc::blindness_mutual_information();
    ensure(mi == 0.0, || format!("mutual information {mi}"))?;
    Ok("uniform for all eight angles, mutual information 0".into())
}

fn time_bin_localization() -> Outcome {
    let theta = Angle::new(3);
    let processor = NoiseProcessor::with_frozen_table(0.4).unwrap();
    let target = Qubit::plus_theta(theta);
    let mut outer: Vec<(PhotonicState, PhotonicState)> = Vec::new();
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let photon = noisy_photon(theta, &noise_for(seed + 100));
        let decoded = decode(&photon).unwrap();
        let (_, early) = decoded.select_time_bin(0).unwrap();
        let (_, late) = decoded.select_time_bin(2).unwrap();
        outer.push((early, late));
        let report = processor.distill_blockwise(&photon, theta).unwrap();
        for ev in report.events.iter().filter(|e| e.probability > 0.0) {
            worst = worst.max(processor.correct(ev).unwrap().deviation(&target));
        }
    }
    ensure(worst <= 1e-10, || format!("corrected output deviates by {worst:e}"))?;
    let spread = |pick: fn(&(PhotonicState, PhotonicState)) -> &PhotonicState| {
        outer
            .iter()
            .map(|s| pick(s).max_deviation(pick(&outer[0])))
            .fold(0.0, f64::max)
    };
    let (e, l) = (spread(|s| &s.0), spread(|s| &s.1));
    ensure(e > 1e-3 && l > 1e-3, || format!("outer bins do not vary: {e:e}, {l:e}"))?;
    Ok(format!("outer bins vary by up to {e:.3} / {l:.3}; middle-bin output deviation {worst:e}"))
}

fn structural_invariants() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 256,
        failure_persistence: None,
        ..Config::default()
    });
    let pipeline = (0i64..8, any::<u64>(), 0.0f64..=1.0);
    runner
        .run(&pipeline, |(theta, seed, gamma)| {
            let photon = noisy_photon(Angle::new(theta), &noise_for(seed));
            prop_assert!((photon.weight() - 1.0).abs() < 1e-12);
            prop_assert_eq!(photon.photon_number(), Some(1));
            let decoded = decode(&photon).unwrap();
            prop_assert!((decoded.weight() - 1.0).abs() < 1e-12);
            prop_assert_eq!(decoded.photon_number(), Some(1));
            let paths = [Path::C1, Path::D1, Path::M1, Path::N1].into();
            let total: f64 = decoded.detection_partition(&paths).values().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            let (_, sel) = decoded.select_time_bin(1).unwrap();
            let joint = sel.tensor(&bell_ancilla(Block::M1)).unwrap();
            prop_assert!((joint.weight() - sel.weight() * bell_ancilla(Block::M1).weight()).abs() < 1e-12);
            let nla = NlaNetwork::new(gamma, Block::M1).unwrap();
            let out = nla.apply(&joint).unwrap();
            prop_assert!((out.weight() - joint.weight()).abs() < 1e-12);
            prop_assert_eq!(out.photon_number(), Some(3));
            let total: f64 = out.detection_partition(&nla.detector_paths()).values().sum();
            prop_assert!((total - out.weight()).abs() < 1e-12);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let map = bs50(Path::Port(0), Path::Port(1), Path::Port(2), Path::Port(3)).unwrap();
    runner
        .run(&(0i64..8, any::<u64>()), |(theta, seed)| {
            let a = prepare_plus_theta(Angle::new(theta));
            let b = noisy_photon(Angle::new(theta), &noise_for(seed));
            let one = Complex64::new(1.0, 0.0);
            let to_ports = ModeMap::new([
                (ModeLabel::at(Path::Src, Pol::H), vec![(ModeLabel::at(Path::Port(0), Pol::H), one)]),
                (ModeLabel::at(Path::Src, Pol::V), vec![(ModeLabel::at(Path::Port(1), Pol::V), one)]),
            ])
            .unwrap();
            let moved = a.apply_mode_map(&to_ports).unwrap();
            let lhs = moved.tensor(&b).unwrap().apply_mode_map(&map).unwrap();
            let rhs = moved.apply_mode_map(&map).unwrap().tensor(&b).unwrap();
            prop_assert!(lhs.max_deviation(&rhs) < 1e-12);
            prop_assert!((lhs.weight() - 1.0).abs() < 1e-12);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("512 randomized cases".into())
}

fn main() -> ExitCode {
    let criteria: [Check; 9] = [
        ("decoherence-free distillation", decoherence_free_distillation, Duration::from_secs(10)),
        ("vacuum herald exclusivity", vacuum_herald_exclusivity, Duration::MAX),
        ("brute-force oracle equivalence", oracle_equivalence, Duration::from_secs(60)),
        ("closed-form comparison", closed_form_comparison, Duration::MAX),
        ("F-linearity and Monte-Carlo consistency", linearity_and_monte_carlo, Duration::from_secs(30)),
        ("BFK correctness", bfk_correctness, Duration::from_secs(10)),
        ("exact blindness", exact_blindness, Duration::MAX),
        ("time-bin noise localization", time_bin_localization, Duration::MAX),
        ("structural invariants", structural_invariants, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (status, detail) = match outcome {
            Ok(_) if elapsed > budget => ("FAIL", format!("took {elapsed:.2?}, budget {budget:.0?}")),
            Ok(d) => ("PASS", d),
            Err(e) => ("FAIL", e),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {}: {status} {name} ({:.2} s) {detail}", i + 1, elapsed.as_secs_f64());
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
