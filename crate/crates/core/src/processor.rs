//! Server-side noise processing: decode both spatial branches, keep the
//! noise-free time bin, run one heralded amplification block per branch and
//! undo the known Pauli frame of each herald.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{collective_unitary, loss_mixture, LossParams, NoiseParams};
use crate::error::{Error, Result};
use crate::optics::{check_gamma, delay_arm, pbs, waveplate, Arm, NlaNetwork, Waveplate};
use crate::qubit::{Pauli, Qubit};
use crate::sender::{encode, prepare_plus_theta};
use crate::state::{
    Block, Delay, Detector, DetectionPattern, FockBasisState, ModeLabel, ModeMap, Network, Path,
    PhotonicState, Pol,
};
use crate::Angle;

/// Long-pass count of the time bin whose content does not depend on the noise.
pub const NOISE_FREE_BIN: u8 = 1;

/// Unbalanced interferometer taking one transmission path to two branch paths.
///
/// H goes to `h_branch` after a Hadamard, V to `v_branch` after HWP + Hadamard;
/// on each branch a PBS sends one polarization through the short arm and the
/// other through the long arm before recombining.
fn branch_decoder(input: Path, h_branch: Path, v_branch: Path, base: u8) -> Result<Network> {
    let p = |i: u8| Path::Port(base + i);
    Ok(Network::new()
        .then(pbs(input, p(0), p(1), p(2))?)
        .then(waveplate(Waveplate::QwpHadamard, p(1))?)
        .then(waveplate(Waveplate::Hwp, p(2))?)
        .then(waveplate(Waveplate::QwpHadamard, p(2))?)
        // H-branch: H short, V long
        .then(pbs(p(1), p(3), p(4), p(5))?)
        .then(delay_arm(p(4), Arm::Short)?)
        .then(delay_arm(p(5), Arm::Long)?)
        .then(pbs(p(4), p(5), h_branch, p(6))?)
        // V-branch: H long, V short
        .then(pbs(p(2), p(7), p(8), p(9))?)
        .then(delay_arm(p(8), Arm::Long)?)
        .then(delay_arm(p(9), Arm::Short)?)
        .then(pbs(p(8), p(9), v_branch, p(10))?))
}

/// Decoder for both transmission paths, as one network.
pub fn decoder_network() -> Result<Network> {
    Ok(branch_decoder(Path::A1, Path::C1, Path::D1, 10)?
        .extend(branch_decoder(Path::B1, Path::M1, Path::N1, 30)?))
}

fn decoder_inputs(path: Path) -> Vec<ModeLabel> {
    let mut v = Vec::new();
    for pol in Pol::BOTH {
        for delay in [Delay::S, Delay::L] {
            v.push(ModeLabel::new(path, pol, delay));
        }
    }
    v
}

fn decoder_map() -> &'static ModeMap {
    static MAP: OnceLock<ModeMap> = OnceLock::new();
    MAP.get_or_init(|| {
        decoder_network()
            .and_then(|n| {
                n.collapse(
                    decoder_inputs(Path::A1)
                        .into_iter()
                        .chain(decoder_inputs(Path::B1)),
                )
            })
            .expect("decoder wiring is a fixed isometry")
    })
}

/// Maps the post-channel state (depth 1 on `a1`/`b1`) to depth-2 states on
/// `c1`, `d1`, `m1`, `n1`. Vacuum passes through.
pub fn decode(state: &PhotonicState) -> Result<PhotonicState> {
    for m in state.modes() {
        if !matches!(m.path, Path::A1 | Path::B1) || m.delay.depth() != 1 {
            return Err(Error::Contract(format!(
                "decoder expects depth-1 photons on a1/b1, found {m}"
            )));
        }
    }
    state.apply_mode_map(decoder_map())
}

/// `(|HH⟩ + |VV⟩)/√2` on the block's two ancilla paths.
pub fn bell_ancilla(block: Block) -> PhotonicState {
    let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let pair = |pol| {
        FockBasisState::from_modes(&[
            ModeLabel::at(Path::K1(block), pol),
            ModeLabel::at(Path::K2(block), pol),
        ])
        .expect("two photons")
    };
    PhotonicState::from_terms([(pair(Pol::H), s), (pair(Pol::V), s)])
}

/// Heralding coincidence: exactly one photon in each of the two named detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HeraldPattern {
    D1D4,
    D2D3,
}

impl HeraldPattern {
    pub const ALL: [HeraldPattern; 2] = [HeraldPattern::D1D4, HeraldPattern::D2D3];

    /// Detector modes that fire. D1/D3 only ever see H, D2/D4 only V.
    pub fn detection(self, block: Block) -> DetectionPattern {
        let m = |d, p| ModeLabel::at(Path::Det(block, d), p);
        match self {
            HeraldPattern::D1D4 => {
                DetectionPattern::from([(m(Detector::D1, Pol::H), 1), (m(Detector::D4, Pol::V), 1)])
            }
            HeraldPattern::D2D3 => {
                DetectionPattern::from([(m(Detector::D2, Pol::V), 1), (m(Detector::D3, Pol::H), 1)])
            }
        }
    }
}

impl fmt::Display for HeraldPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Outcome of one (block, pattern) coincidence.
#[derive(Debug, Clone)]
pub struct HeraldEvent {
    pub block: Block,
    pub pattern: HeraldPattern,
    /// Absolute probability relative to the distilled trajectory.
    pub probability: f64,
    /// Conditioned single photon at `out[block]`, or vacuum if `probability` is 0.
    pub out_state: PhotonicState,
    /// Polarization qubit carried by `out_state`.
    pub qubit: Option<Qubit>,
    /// Purity of the reduced output polarization state.
    pub purity: f64,
    /// Fidelity with `|+_θ⟩` after the table's correction, when the table has an entry.
    pub corrected_fidelity: Option<f64>,
}

/// Pauli frame to undo for every (block, pattern).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionTable(BTreeMap<String, Pauli>);

impl CorrectionTable {
    fn key(block: Block, pattern: HeraldPattern) -> String {
        format!("{block}/{pattern}")
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (Block, HeraldPattern, Pauli)>) -> Self {
        CorrectionTable(
            entries
                .into_iter()
                .map(|(b, p, x)| (Self::key(b, p), x))
                .collect(),
        )
    }

    /// Table checked into the source, regenerated by [`derive`](Self::derive) in tests.
    pub fn frozen() -> Self {
        use HeraldPattern::*;
        CorrectionTable::from_entries([
            (Block::C1, D1D4, Pauli::XZ),
            (Block::C1, D2D3, Pauli::XZ),
            (Block::D1, D1D4, Pauli::Z),
            (Block::D1, D2D3, Pauli::Z),
            (Block::M1, D1D4, Pauli::X),
            (Block::M1, D2D3, Pauli::X),
            (Block::N1, D1D4, Pauli::I),
            (Block::N1, D2D3, Pauli::I),
        ])
    }

    pub fn get(&self, block: Block, pattern: HeraldPattern) -> Option<Pauli> {
        self.0.get(&Self::key(block, pattern)).copied()
    }

    /// Runs the pipeline for every θ under noise that populates all four
    /// branches and keeps, per (block, pattern), the first Pauli that
    /// restores `|+_θ⟩` for all θ.
    pub fn derive(gamma: f64) -> Result<Self> {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let noise = NoiseParams::new(s, s * Complex64::new(0.0, 1.0), s, -s)?;
        let processor = NoiseProcessor::new(gamma, CorrectionTable(BTreeMap::new()))?;
        let mut found: BTreeMap<(Block, HeraldPattern), BTreeSet<Pauli>> = BTreeMap::new();
        for theta in Angle::all() {
            let state = collective_unitary(&encode(&prepare_plus_theta(theta))?, &noise)?;
            let report = processor.distill(&state, theta)?;
            for ev in &report.events {
                let Some(q) = ev.qubit else {
                    return Err(Error::Contract(format!(
                        "no herald in block {} at gamma {gamma}",
                        ev.block
                    )));
                };
                let ok: BTreeSet<Pauli> = Pauli::ALL
                    .into_iter()
                    .filter(|p| (p.apply(&q).fidelity(&Qubit::plus_theta(theta)) - 1.0).abs() < 1e-10)
                    .collect();
                found
                    .entry((ev.block, ev.pattern))
                    .and_modify(|s| *s = s.intersection(&ok).copied().collect())
                    .or_insert(ok);
            }
        }
        let mut entries = Vec::new();
        for ((b, p), paulis) in found {
            let x = paulis.first().copied().ok_or_else(|| {
                Error::Contract(format!("no Pauli restores the output of {b}/{p}"))
            })?;
            entries.push((b, p, x));
        }
        Ok(CorrectionTable::from_entries(entries))
    }
}

/// Applies the table entry for the event's (block, pattern) to its output qubit.
pub fn apply_correction(event: &HeraldEvent, table: &CorrectionTable) -> Result<Qubit> {
    let pauli = table.get(event.block, event.pattern).ok_or_else(|| {
        Error::Contract(format!("no correction for {}/{}", event.block, event.pattern))
    })?;
    let q = event
        .qubit
        .ok_or_else(|| Error::Contract("cannot correct a zero-probability event".into()))?;
    Ok(pauli.apply(&q))
}

#[derive(Debug, Clone)]
pub struct DistillReport {
    pub input_weight: f64,
    pub time_bin_probability: f64,
    /// All eight (block, pattern) events in `Block::ALL × HeraldPattern::ALL` order.
    pub events: Vec<HeraldEvent>,
    pub success_probability: f64,
    pub non_herald_probability: f64,
    /// Total weight after the amplification blocks; equals `time_bin_probability`.
    pub post_block_weight: f64,
}

impl DistillReport {
    pub fn event(&self, block: Block, pattern: HeraldPattern) -> &HeraldEvent {
        &self.events[Block::ALL.iter().position(|b| *b == block).unwrap() * 2
            + HeraldPattern::ALL.iter().position(|p| *p == pattern).unwrap()]
    }

    pub fn block_probability(&self, block: Block) -> f64 {
        self.events
            .iter()
            .filter(|e| e.block == block)
            .map(|e| e.probability)
            .sum()
    }
}

/// Success probability from the simulated pipeline next to the reference closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuccessComparison {
    pub gamma: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub p_simulated: f64,
    pub p_closed_form: f64,
    pub abs_diff: f64,
}

/// Reference closed form `F(5γ⁴ − 4γ² + 1)/32`.
pub fn closed_form_success(gamma: f64, f: f64) -> f64 {
    let g2 = gamma * gamma;
    f * (5.0 * g2 * g2 - 4.0 * g2 + 1.0) / 32.0
}

#[derive(Debug, Clone)]
pub struct NoiseProcessor {
    gamma: f64,
    table: CorrectionTable,
    blocks: [NlaNetwork; 4],
}

impl NoiseProcessor {
    pub fn new(gamma: f64, table: CorrectionTable) -> Result<Self> {
        check_gamma(gamma)?;
        let blocks = [
            NlaNetwork::new(gamma, Block::C1)?,
            NlaNetwork::new(gamma, Block::D1)?,
            NlaNetwork::new(gamma, Block::M1)?,
            NlaNetwork::new(gamma, Block::N1)?,
        ];
        Ok(NoiseProcessor { gamma, table, blocks })
    }

    pub fn with_frozen_table(gamma: f64) -> Result<Self> {
        Self::new(gamma, CorrectionTable::frozen())
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn table(&self) -> &CorrectionTable {
        &self.table
    }

    /// Decodes and keeps the noise-free time bin, with absolute amplitudes.
    fn select(&self, trajectory: &PhotonicState) -> Result<(f64, PhotonicState)> {
        let decoded = decode(trajectory)?;
        let (p, selected) = decoded.select_time_bin(NOISE_FREE_BIN)?;
        Ok((p, selected.scaled(Complex64::new(p.sqrt(), 0.0))))
    }

    /// Full pipeline: all four Bell pairs and blocks act on one joint state.
    pub fn distill(&self, trajectory: &PhotonicState, theta: Angle) -> Result<DistillReport> {
        let input_weight = trajectory.weight();
        let (p_tb, mut state) = self.select(trajectory)?;
        for b in Block::ALL {
            state = state.tensor(&bell_ancilla(b))?;
        }
        for nla in &self.blocks {
            state = nla.apply(&state)?;
        }
        let post_block_weight = state.weight();
        let events = self.collect_events(theta, |nla| Ok((nla, state.clone())))?;
        Ok(self.report(input_weight, p_tb, post_block_weight, events))
    }

    /// Same marginals as [`distill`](Self::distill), one block at a time.
    ///
    /// Every block is weight-preserving, so the coincidence statistics of one
    /// block do not depend on whether the others have acted.
    pub fn distill_blockwise(&self, trajectory: &PhotonicState, theta: Angle) -> Result<DistillReport> {
        let input_weight = trajectory.weight();
        let (p_tb, state) = self.select(trajectory)?;
        let mut post_block_weight = p_tb;
        let events = self.collect_events(theta, |nla| {
            let s = nla.apply(&state.tensor(&bell_ancilla(nla.block()))?)?;
            post_block_weight = post_block_weight.max(s.weight());
            Ok((nla, s))
        })?;
        Ok(self.report(input_weight, p_tb, post_block_weight, events))
    }

    fn collect_events<'a>(
        &'a self,
        theta: Angle,
        mut state_for: impl FnMut(&'a NlaNetwork) -> Result<(&'a NlaNetwork, PhotonicState)>,
    ) -> Result<Vec<HeraldEvent>> {
        let mut events = Vec::with_capacity(8);
        for nla in &self.blocks {
            let (nla, state) = state_for(nla)?;
            let scope = nla.detector_paths();
            for pattern in HeraldPattern::ALL {
                let (p, cond) = state.project_detection_scoped(&pattern.detection(nla.block()), &scope);
                let mut ev = herald_event(nla.block(), pattern, p, &cond);
                ev.corrected_fidelity = match (ev.qubit, self.table.get(ev.block, pattern)) {
                    (Some(q), Some(x)) => Some(x.apply(&q).fidelity(&Qubit::plus_theta(theta))),
                    _ => None,
                };
                events.push(ev);
            }
        }
        Ok(events)
    }

    fn report(
        &self,
        input_weight: f64,
        p_tb: f64,
        post_block_weight: f64,
        events: Vec<HeraldEvent>,
    ) -> DistillReport {
        let success: f64 = events.iter().map(|e| e.probability).sum();
        DistillReport {
            input_weight,
            time_bin_probability: p_tb,
            success_probability: success,
            non_herald_probability: (input_weight - p_tb) + (post_block_weight - success),
            post_block_weight,
            events,
        }
    }

    pub fn correct(&self, event: &HeraldEvent) -> Result<Qubit> {
        apply_correction(event, &self.table)
    }

    /// Averages the success probability over the loss mixture of one encoded photon.
    pub fn exact_success_probability(&self, f: f64, noise: &NoiseParams) -> Result<f64> {
        let loss = LossParams::new(f)?;
        let photon = collective_unitary(&encode(&prepare_plus_theta(Angle::ZERO))?, noise)?;
        let mut total = 0.0;
        for t in loss_mixture(&photon, &loss)? {
            total += t.weight * self.distill(&t.state, Angle::ZERO)?.success_probability;
        }
        Ok(total)
    }
}

/// Success probability of the whole protocol at (γ, F), with the reference
/// closed form alongside. The total does not depend on the noise parameters,
/// so the noiseless channel is used.
pub fn exact_success_probability(gamma: f64, f: f64) -> Result<SuccessComparison> {
    let processor = NoiseProcessor::with_frozen_table(gamma)?;
    let p = processor.exact_success_probability(f, &NoiseParams::identity())?;
    let closed = closed_form_success(gamma, f);
    Ok(SuccessComparison {
        gamma,
        f,
        p_simulated: p,
        p_closed_form: closed,
        abs_diff: (p - closed).abs(),
    })
}

fn herald_event(block: Block, pattern: HeraldPattern, p: f64, cond: &PhotonicState) -> HeraldEvent {
    if p == 0.0 {
        return HeraldEvent {
            block,
            pattern,
            probability: 0.0,
            out_state: PhotonicState::vacuum(),
            qubit: None,
            purity: 0.0,
            corrected_fidelity: None,
        };
    }
    let out_path = Path::Out(block);
    // Reduced 2×2 density matrix of the output polarization.
    let mut groups: BTreeMap<FockBasisState, [Complex64; 2]> = BTreeMap::new();
    let mut delay = Delay::SL;
    for (b, &a) in cond.terms() {
        let rest = b.filtered(|m| m.path != out_path);
        let slot = groups.entry(rest).or_default();
        if let Some((m, _)) = b.occupations().iter().find(|(m, _)| m.path == out_path) {
            delay = m.delay;
            slot[(m.pol == Pol::V) as usize] += a;
        }
    }
    let mut rho = [[Complex64::default(); 2]; 2];
    for v in groups.values() {
        for i in 0..2 {
            for j in 0..2 {
                rho[i][j] += v[i] * v[j].conj();
            }
        }
    }
    let tr = rho[0][0].re + rho[1][1].re;
    let (qubit, purity) = if tr > 0.0 {
        let purity = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| rho[i][j].norm_sqr())
            .sum::<f64>()
            / (tr * tr);
        (Some(top_eigenvector(&rho)), purity)
    } else {
        (None, 0.0)
    };
    let out_state = qubit
        .map(|q| {
            PhotonicState::from_terms(Pol::BOTH.into_iter().zip(q.0).map(|(pol, a)| {
                (
                    FockBasisState::from_modes(&[ModeLabel::new(out_path, pol, delay)])
                        .expect("one photon"),
                    a,
                )
            }))
        })
        .unwrap_or_else(PhotonicState::vacuum);
    HeraldEvent {
        block,
        pattern,
        probability: p,
        out_state,
        qubit,
        purity,
        corrected_fidelity: None,
    }
}

fn top_eigenvector(rho: &[[Complex64; 2]; 2]) -> Qubit {
    let a = rho[0][0].re;
    let d = rho[1][1].re;
    let b = rho[0][1];
    let half = (a - d) / 2.0;
    let lambda = (a + d) / 2.0 + (half * half + b.norm_sqr()).sqrt();
    let v = if b.norm() > 1e-300 {
        Qubit::new(b, Complex64::new(lambda - a, 0.0))
    } else if a >= d {
        Qubit::new(Complex64::new(1.0, 0.0), Complex64::default())
    } else {
        Qubit::new(Complex64::default(), Complex64::new(1.0, 0.0))
    };
    v.canonical()
}
