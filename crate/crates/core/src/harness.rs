//! Run configuration, parameter sweeps, Monte-Carlo estimators, end-to-end
//! delegated runs and report emission.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path as FsPath, PathBuf};

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::channel::{collective_unitary, sample_noise};
use crate::error::{Error, Result};
use crate::mbqc::{self, HeraldMeta, MeasurementPattern, Transcript};
use crate::processor::{exact_success_probability, DistillReport, HeraldEvent, NoiseProcessor};
use crate::sender::{encode, prepare_plus_theta};
use crate::state::PhotonicState;
use crate::{Angle, Block, HeraldPattern, NoiseParams, Qubit};

pub const DEFAULT_RETRY_CAP: u32 = 10_000;

/// Frozen CSV header of a sweep report.
pub const SWEEP_COLUMNS: [&str; 8] = [
    "gamma",
    "F",
    "p_exact",
    "p_closed_form",
    "abs_diff",
    "p_montecarlo",
    "stderr",
    "mean_fidelity",
];

/// Independent random stream for trial `index` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn point_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum NoiseMode {
    #[default]
    Haar,
    Fixed(NoiseParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

fn default_trials() -> usize {
    1
}

fn default_retry_cap() -> u32 {
    DEFAULT_RETRY_CAP
}

/// Everything a sweep or an end-to-end run needs. Deserialized from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub gamma_grid: Vec<f64>,
    pub f_grid: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseMode,
    /// Draw one noise realization per run and reuse it for every photon.
    #[serde(default)]
    pub correlated_noise: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default = "default_retry_cap")]
    pub max_retries: u32,
    /// Fixed client angles `k` (θ = kπ/4) instead of random ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thetas: Option<Vec<i64>>,
    /// Fixed masking bits instead of random ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masks: Option<Vec<bool>>,
}

impl RunConfig {
    pub fn new(gamma_grid: Vec<f64>, f_grid: Vec<f64>, trials: usize, seed: u64) -> Self {
        RunConfig {
            gamma_grid,
            f_grid,
            trials,
            seed,
            noise: NoiseMode::Haar,
            correlated_noise: false,
            pattern: None,
            output: None,
            format: OutputFormat::Csv,
            max_retries: DEFAULT_RETRY_CAP,
            thetas: None,
            masks: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |name: &str, grid: &[f64]| -> Result<()> {
            if grid.is_empty() {
                return Err(Error::Config(format!("{name} is empty")));
            }
            match grid.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                Some(x) => Err(Error::Config(format!("{name} value {x} outside [0, 1]"))),
                None => Ok(()),
            }
        };
        in_unit("gamma_grid", &self.gamma_grid)?;
        in_unit("f_grid", &self.f_grid)?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.max_retries == 0 {
            return Err(Error::Config("max_retries must be at least 1".into()));
        }
        if let NoiseMode::Fixed(p) = &self.noise {
            p.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Parses and validates; a relative `pattern` or `output` is resolved
    /// against `base`.
    pub fn from_json(text: &str, base: Option<&FsPath>) -> Result<Self> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(base) = base {
            for p in [&mut cfg.pattern, &mut cfg.output].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, path.parent())
    }
}

/// Picks one of the eight events with its absolute probability; `None` when
/// `u` lands in the non-heralded remainder.
fn sample_event(report: &DistillReport, u: f64) -> Option<&HeraldEvent> {
    let mut acc = 0.0;
    for ev in &report.events {
        acc += ev.probability;
        if u < acc {
            return Some(ev);
        }
    }
    None
}

/// Loss-sampled trajectory of one encoded `|+_θ⟩` through the channel.
fn transmit(theta: Angle, f: f64, noise: &NoiseParams, u_loss: f64) -> Result<PhotonicState> {
    if u_loss < f {
        collective_unitary(&encode(&prepare_plus_theta(theta))?, noise)
    } else {
        Ok(PhotonicState::vacuum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub trials: usize,
    pub heralds: usize,
    pub estimate: f64,
    pub stderr: f64,
    /// Mean fidelity of the corrected output over heralded trials.
    pub mean_fidelity: Option<f64>,
}

/// `trials` independent photons: uniform θ, Haar noise, Bernoulli(F) loss,
/// then one sampled herald outcome. Trial `i` uses stream `i` of `seed`, so
/// the result does not depend on scheduling.
pub fn monte_carlo(gamma: f64, f: f64, trials: usize, seed: u64) -> Result<MonteCarloEstimate> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::OutOfRange(format!("transmission {f} outside [0, 1]")));
    }
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let processor = NoiseProcessor::with_frozen_table(gamma)?;
    let outcomes: Vec<Option<f64>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let theta = Angle::new(rng.random_range(0..8));
            let noise = sample_noise(&mut rng);
            let u_loss: f64 = rng.random();
            let u_event: f64 = rng.random();
            let state = transmit(theta, f, &noise, u_loss)?;
            let report = processor.distill_blockwise(&state, theta)?;
            Ok(sample_event(&report, u_event).map(|ev| ev.corrected_fidelity.unwrap_or(0.0)))
        })
        .collect::<Result<_>>()?;
    let fids: Vec<f64> = outcomes.into_iter().flatten().collect();
    let heralds = fids.len();
    let p = heralds as f64 / trials as f64;
    Ok(MonteCarloEstimate {
        trials,
        heralds,
        estimate: p,
        stderr: (p * (1.0 - p) / trials as f64).sqrt(),
        mean_fidelity: (heralds > 0).then(|| fids.iter().sum::<f64>() / heralds as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub p_exact: f64,
    pub p_closed_form: f64,
    pub abs_diff: f64,
    pub p_montecarlo: f64,
    pub stderr: f64,
    pub mean_fidelity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub seed: u64,
    pub trials: usize,
    pub rows: Vec<SweepRow>,
}

/// Exact success probability, closed form and Monte-Carlo estimate on the
/// γ × F grid (γ-major order).
pub fn sweep(config: &RunConfig) -> Result<SweepReport> {
    config.validate()?;
    let points: Vec<(f64, f64)> = config
        .gamma_grid
        .iter()
        .flat_map(|&g| config.f_grid.iter().map(move |&f| (g, f)))
        .collect();
    let rows = points
        .iter()
        .enumerate()
        .map(|(i, &(gamma, f))| {
            let exact = exact_success_probability(gamma, f)?;
            let mc = monte_carlo(gamma, f, config.trials, point_seed(config.seed, i))?;
            debug!("gamma={gamma} F={f} exact={} mc={}", exact.p_simulated, mc.estimate);
            Ok(SweepRow {
                gamma,
                f,
                p_exact: exact.p_simulated,
                p_closed_form: exact.p_closed_form,
                abs_diff: exact.abs_diff,
                p_montecarlo: mc.estimate,
                stderr: mc.stderr,
                mean_fidelity: mc.mean_fidelity,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepReport {
        seed: config.seed,
        trials: config.trials,
        rows,
    })
}

/// 17 significant digits.
fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn raw(x: f64) -> Box<RawValue> {
    let text = if x.is_finite() { sci(x) } else { "null".into() };
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

#[derive(Serialize)]
struct JsonRow {
    gamma: Box<RawValue>,
    #[serde(rename = "F")]
    f: Box<RawValue>,
    p_exact: Box<RawValue>,
    p_closed_form: Box<RawValue>,
    abs_diff: Box<RawValue>,
    p_montecarlo: Box<RawValue>,
    stderr: Box<RawValue>,
    mean_fidelity: Option<Box<RawValue>>,
}

#[derive(Serialize)]
struct JsonReport {
    seed: u64,
    trials: usize,
    columns: [&'static str; 8],
    max_abs_diff: Box<RawValue>,
    rows: Vec<JsonRow>,
}

impl SweepReport {
    /// Largest gap between the simulated probability and the closed form.
    pub fn max_abs_diff(&self) -> f64 {
        self.rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = SWEEP_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let fid = r.mean_fidelity.map(sci).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                sci(r.gamma),
                sci(r.f),
                sci(r.p_exact),
                sci(r.p_closed_form),
                sci(r.abs_diff),
                sci(r.p_montecarlo),
                sci(r.stderr),
                fid
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        let doc = JsonReport {
            seed: self.seed,
            trials: self.trials,
            columns: SWEEP_COLUMNS,
            max_abs_diff: raw(self.max_abs_diff()),
            rows: self
                .rows
                .iter()
                .map(|r| JsonRow {
                    gamma: raw(r.gamma),
                    f: raw(r.f),
                    p_exact: raw(r.p_exact),
                    p_closed_form: raw(r.p_closed_form),
                    abs_diff: raw(r.abs_diff),
                    p_montecarlo: raw(r.p_montecarlo),
                    stderr: raw(r.stderr),
                    mean_fidelity: r.mean_fidelity.map(raw),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }

    pub fn write(&self, path: &FsPath, format: OutputFormat) -> Result<()> {
        std::fs::write(path, self.render(format))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EventSummary {
    pub block: Block,
    pub pattern: HeraldPattern,
    pub probability: f64,
    pub purity: f64,
    pub corrected_fidelity: Option<f64>,
}

/// Serializable digest of a [`DistillReport`].
#[derive(Debug, Clone, Serialize)]
pub struct DistillSummary {
    pub gamma: f64,
    pub theta: Angle,
    pub input_weight: f64,
    pub time_bin_probability: f64,
    pub success_probability: f64,
    pub non_herald_probability: f64,
    pub events: Vec<EventSummary>,
}

impl DistillSummary {
    pub fn new(gamma: f64, theta: Angle, report: &DistillReport) -> Self {
        DistillSummary {
            gamma,
            theta,
            input_weight: report.input_weight,
            time_bin_probability: report.time_bin_probability,
            success_probability: report.success_probability,
            non_herald_probability: report.non_herald_probability,
            events: report
                .events
                .iter()
                .map(|e| EventSummary {
                    block: e.block,
                    pattern: e.pattern,
                    probability: e.probability,
                    purity: e.purity,
                    corrected_fidelity: e.corrected_fidelity,
                })
                .collect(),
        }
    }
}

/// Exact distillation of one encoded `|+_θ⟩` that survived the channel.
pub fn distill_once(gamma: f64, theta: Angle, noise: &NoiseParams) -> Result<DistillSummary> {
    let processor = NoiseProcessor::with_frozen_table(gamma)?;
    let state = collective_unitary(&encode(&prepare_plus_theta(theta))?, noise)?;
    Ok(DistillSummary::new(gamma, theta, &processor.distill(&state, theta)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    RetryCapExceeded { vertex: usize, attempts: u32 },
}

#[derive(Debug, Clone, Serialize)]
pub struct E2eRun {
    pub run: usize,
    #[serde(flatten)]
    pub status: RunStatus,
    pub photons_sent: u64,
    pub transcript: Transcript,
}

#[derive(Debug, Clone, Serialize)]
pub struct E2eSummary {
    pub completed: usize,
    pub failed: usize,
    pub photons_sent: u64,
    pub mean_attempts: f64,
    pub mean_fidelity: Option<f64>,
    /// Decoded output counts over completed runs, indexed like [`Transcript::output_index`].
    pub output_counts: Vec<u64>,
    pub reference: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct E2eReport {
    pub gamma: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub seed: u64,
    pub runs: Vec<E2eRun>,
    pub summary: E2eSummary,
}

impl E2eReport {
    pub fn all_completed(&self) -> bool {
        self.summary.failed == 0
    }
}

/// Single vertex measured at angle 0.
pub fn trivial_pattern() -> MeasurementPattern {
    MeasurementPattern::linear_cluster(&[Angle::ZERO]).expect("valid")
}

struct Feed<'a> {
    processor: &'a NoiseProcessor,
    f: f64,
    noise: NoiseMode,
    correlated: bool,
    cap: u32,
}

enum Herald {
    Ready(Qubit, HeraldMeta),
    GaveUp(u32),
}

impl Feed<'_> {
    /// Sends fresh photons carrying `θ` until one heralds or the cap is hit.
    fn acquire(
        &self,
        theta: Angle,
        shared: Option<&NoiseParams>,
        cache: &mut HashMap<(Angle, bool), DistillReport>,
        rng: &mut ChaCha8Rng,
        sent: &mut u64,
    ) -> Result<Herald> {
        for attempt in 1..=self.cap {
            let noise = match (self.noise, shared) {
                (NoiseMode::Fixed(p), _) => p,
                (NoiseMode::Haar, Some(p)) => *p,
                (NoiseMode::Haar, None) => sample_noise(rng),
            };
            let u_loss: f64 = rng.random();
            let u_event: f64 = rng.random();
            *sent += 1;
            let survived = u_loss < self.f;
            let reusable = matches!(self.noise, NoiseMode::Fixed(_)) || self.correlated;
            let key = (theta, survived);
            let report = match cache.get(&key) {
                Some(r) if reusable => r.clone(),
                _ => {
                    let state = transmit(theta, self.f, &noise, u_loss)?;
                    let r = self.processor.distill_blockwise(&state, theta)?;
                    if reusable {
                        cache.insert(key, r.clone());
                    }
                    r
                }
            };
            if let Some(ev) = sample_event(&report, u_event) {
                let q = self.processor.correct(ev)?;
                let meta = HeraldMeta {
                    attempts: attempt,
                    block: ev.block,
                    pattern: ev.pattern,
                    fidelity: q.fidelity(&Qubit::plus_theta(theta)),
                };
                return Ok(Herald::Ready(q, meta));
            }
        }
        Ok(Herald::GaveUp(self.cap))
    }
}

fn single_run(
    config: &RunConfig,
    pattern: &MeasurementPattern,
    feed: &Feed<'_>,
    run: usize,
) -> Result<E2eRun> {
    let n = pattern.vertex_count();
    let mut rng = trial_rng(config.seed, run as u64);
    let thetas: Vec<Angle> = match &config.thetas {
        Some(t) => t.iter().map(|&k| Angle::new(k)).collect(),
        None => (0..n).map(|_| Angle::new(rng.random_range(0..8))).collect(),
    };
    let rs: Vec<bool> = match &config.masks {
        Some(m) => m.clone(),
        None => (0..n).map(|_| rng.random()).collect(),
    };
    let shared = (config.correlated_noise && feed.noise == NoiseMode::Haar).then(|| sample_noise(&mut rng));
    let mut cache = HashMap::new();
    let mut sent = 0;
    let mut inputs = Vec::with_capacity(n);
    let mut metas = Vec::with_capacity(n);
    for (v, &theta) in thetas.iter().enumerate() {
        match feed.acquire(theta, shared.as_ref(), &mut cache, &mut rng, &mut sent)? {
            Herald::Ready(q, meta) => {
                inputs.push(q);
                metas.push(meta);
            }
            Herald::GaveUp(attempts) => {
                info!("run {run}: vertex {v} did not herald within {attempts} photons");
                return Ok(E2eRun {
                    run,
                    status: RunStatus::RetryCapExceeded { vertex: v, attempts },
                    photons_sent: sent,
                    transcript: Transcript::default(),
                });
            }
        }
    }
    let mut transcript = mbqc::run_bfk_with_inputs(pattern, &inputs, &thetas, &rs, &mut rng)?;
    for (v, meta) in metas.into_iter().enumerate() {
        transcript.attach_herald(v, meta);
    }
    Ok(E2eRun {
        run,
        status: RunStatus::Completed,
        photons_sent: sent,
        transcript,
    })
}

/// Full protocol, `config.trials` times: every vertex gets a heralded photon
/// (retrying up to `max_retries`), then the blinded measurement loop runs on
/// the recovered qubits. Needs single-valued γ and F grids.
pub fn run_end_to_end(config: &RunConfig) -> Result<E2eReport> {
    config.validate()?;
    let (&[gamma], &[f]) = (config.gamma_grid.as_slice(), config.f_grid.as_slice()) else {
        return Err(Error::Config("end-to-end runs need exactly one gamma and one F".into()));
    };
    let pattern = match &config.pattern {
        Some(p) => MeasurementPattern::load(p)?,
        None => trivial_pattern(),
    };
    run_end_to_end_with(config, &pattern, gamma, f)
}

pub fn run_end_to_end_with(
    config: &RunConfig,
    pattern: &MeasurementPattern,
    gamma: f64,
    f: f64,
) -> Result<E2eReport> {
    let n = pattern.vertex_count();
    if config.thetas.as_ref().is_some_and(|t| t.len() != n)
        || config.masks.as_ref().is_some_and(|m| m.len() != n)
    {
        return Err(Error::Config(format!("thetas and masks need {n} entries")));
    }
    let processor = NoiseProcessor::with_frozen_table(gamma)?;
    let feed = Feed {
        processor: &processor,
        f,
        noise: config.noise,
        correlated: config.correlated_noise,
        cap: config.max_retries,
    };
    let runs: Vec<E2eRun> = (0..config.trials)
        .into_par_iter()
        .map(|i| single_run(config, pattern, &feed, i))
        .collect::<Result<_>>()?;

    let reference = mbqc::reference_mbqc(pattern)?;
    let mut counts = vec![0u64; reference.len()];
    let mut fids = Vec::new();
    let mut attempts = Vec::new();
    for r in runs.iter().filter(|r| r.status == RunStatus::Completed) {
        counts[r.transcript.output_index()] += 1;
        for h in r.transcript.records().iter().filter_map(|x| x.herald) {
            fids.push(h.fidelity);
            attempts.push(h.attempts);
        }
    }
    let completed = runs.iter().filter(|r| r.status == RunStatus::Completed).count();
    let summary = E2eSummary {
        completed,
        failed: runs.len() - completed,
        photons_sent: runs.iter().map(|r| r.photons_sent).sum(),
        mean_attempts: if attempts.is_empty() {
            0.0
        } else {
            attempts.iter().map(|&a| f64::from(a)).sum::<f64>() / attempts.len() as f64
        },
        mean_fidelity: (!fids.is_empty()).then(|| fids.iter().sum::<f64>() / fids.len() as f64),
        output_counts: counts,
        reference,
    };
    Ok(E2eReport {
        gamma,
        f,
        seed: config.seed,
        runs,
        summary,
    })
}

/// Sampled blinded runs of a pattern against its exact unblinded distribution.
#[derive(Debug, Clone, Serialize)]
pub struct BfkAudit {
    pub trials: usize,
    pub reference: Vec<f64>,
    pub counts: Vec<u64>,
    /// Largest `|frequency − p| / σ` over outcomes with `0 < p < 1`.
    pub max_sigma: f64,
}

pub fn bfk_audit(pattern: &MeasurementPattern, trials: usize, seed: u64) -> Result<BfkAudit> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let n = pattern.vertex_count();
    let reference = mbqc::reference_mbqc(pattern)?;
    let outcomes: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let thetas: Vec<Angle> = (0..n).map(|_| Angle::new(rng.random_range(0..8))).collect();
            let rs: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            Ok(mbqc::run_bfk(pattern, &thetas, &rs, &mut rng)?.output_index())
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0u64; reference.len()];
    for o in outcomes {
        counts[o] += 1;
    }
    let nf = trials as f64;
    let max_sigma = reference
        .iter()
        .zip(&counts)
        .filter(|(p, _)| **p > 0.0 && **p < 1.0)
        .map(|(p, c)| (*c as f64 / nf - p).abs() / (p * (1.0 - p) / nf).sqrt())
        .fold(0.0, f64::max);
    Ok(BfkAudit {
        trials,
        reference,
        counts,
        max_sigma,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BlindnessAudit {
    /// Counts of each δ out of 16, one row per φ'.
    pub counts: Vec<[u32; 8]>,
    pub uniform: bool,
    pub mutual_information: f64,
}

pub fn blindness_audit() -> BlindnessAudit {
    let counts: Vec<[u32; 8]> = Angle::all().map(mbqc::blindness_counts).collect();
    BlindnessAudit {
        uniform: counts.iter().all(|c| *c == [2; 8]),
        counts,
        mutual_information: mbqc::blindness_mutual_information(),
    }
}
