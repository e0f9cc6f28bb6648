//! Linear-optical elements as [`ModeMap`] constructors, plus the heralded
//! amplification block used by the noise processor.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{
    Block, Delay, Detector, ModeLabel, ModeMap, Path, PhotonicState, Pol,
};

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn distinct(paths: &[Path]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for p in paths {
        if !seen.insert(*p) {
            return Err(Error::PathCollision(p.to_string()));
        }
    }
    Ok(())
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::OutOfRange(format!("gamma = {gamma} must lie in [0, 1]")));
    }
    Ok(())
}

/// Balanced beam splitter. `in2` picks up the relative minus sign on `out2`.
pub fn bs50(in1: Path, in2: Path, out1: Path, out2: Path) -> Result<ModeMap> {
    distinct(&[in1, in2, out1, out2])?;
    let s = re(FRAC_1_SQRT_2);
    let mut rules = Vec::new();
    for pol in Pol::BOTH {
        for delay in Delay::ALL {
            let o1 = ModeLabel::new(out1, pol, delay);
            let o2 = ModeLabel::new(out2, pol, delay);
            rules.push((ModeLabel::new(in1, pol, delay), vec![(o1, s), (o2, s)]));
            rules.push((ModeLabel::new(in2, pol, delay), vec![(o1, s), (o2, -s)]));
        }
    }
    ModeMap::new(rules)
}

/// Polarizing beam splitter: transmits H, reflects V. Light from `in1` leaves
/// H on `out_h` and V on `out_v`; light from `in2` leaves V on `out_h` and H
/// on `out_v`, which is how two arms are recombined onto one path.
pub fn pbs(in1: Path, in2: Path, out_h: Path, out_v: Path) -> Result<ModeMap> {
    distinct(&[in1, in2, out_h, out_v])?;
    let mut rules = Vec::new();
    for delay in Delay::ALL {
        let route = |inp: Path, pol: Pol, out: Path| {
            (
                ModeLabel::new(inp, pol, delay),
                vec![(ModeLabel::new(out, pol, delay), re(1.0))],
            )
        };
        rules.push(route(in1, Pol::H, out_h));
        rules.push(route(in1, Pol::V, out_v));
        rules.push(route(in2, Pol::H, out_v));
        rules.push(route(in2, Pol::V, out_h));
    }
    ModeMap::new(rules)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Waveplate {
    /// Swaps H and V.
    Hwp,
    /// H → (H+V)/√2, V → (H−V)/√2.
    QwpHadamard,
}

pub fn waveplate(kind: Waveplate, path: Path) -> Result<ModeMap> {
    let s = re(FRAC_1_SQRT_2);
    let mut rules = Vec::new();
    for delay in Delay::ALL {
        let h = ModeLabel::new(path, Pol::H, delay);
        let v = ModeLabel::new(path, Pol::V, delay);
        match kind {
            Waveplate::Hwp => {
                rules.push((h, vec![(v, re(1.0))]));
                rules.push((v, vec![(h, re(1.0))]));
            }
            Waveplate::QwpHadamard => {
                rules.push((h, vec![(h, s), (v, s)]));
                rules.push((v, vec![(h, s), (v, -s)]));
            }
        }
    }
    ModeMap::new(rules)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Short,
    Long,
}

/// One pass through a delay arm on `path`. Depth-2 photons are rejected.
pub fn delay_arm(path: Path, arm: Arm) -> Result<ModeMap> {
    let mut rules = Vec::new();
    let mut blocked = Vec::new();
    for pol in Pol::BOTH {
        for delay in Delay::ALL {
            let m = ModeLabel::new(path, pol, delay);
            if delay.depth() == 2 {
                blocked.push(m);
                continue;
            }
            let long = delay.long_count() + u8::from(arm == Arm::Long);
            let next = Delay::new(delay.depth() + 1, long)?;
            rules.push((m, vec![(ModeLabel::new(path, pol, next), re(1.0))]));
        }
    }
    Ok(ModeMap::new(rules)?.with_blocked(blocked))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PpbsVariant {
    /// Partially reflects H with amplitude γ, fully reflects V.
    Ppbs1,
    /// Mirror image: partially reflects V, fully transmits H.
    Ppbs2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpbsParams {
    gamma: f64,
    variant: PpbsVariant,
}

impl PpbsParams {
    pub fn new(gamma: f64, variant: PpbsVariant) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(PpbsParams { gamma, variant })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn variant(&self) -> PpbsVariant {
        self.variant
    }
}

/// Partial polarizing beam splitter between a signal and an ancilla input.
///
/// For the partially reflected polarization `p`:
/// `â†_{sig,p} → γ â†_{pass,p} + √(1−γ²) â†_{det,p}` and
/// `â†_{anc,p} → −γ â†_{det,p} + √(1−γ²) â†_{pass,p}`; the other polarization
/// goes `sig → pass` and `anc → −det`.
pub fn ppbs(
    params: PpbsParams,
    signal_in: Path,
    ancilla_in: Path,
    pass_out: Path,
    detector_out: Path,
) -> Result<ModeMap> {
    distinct(&[signal_in, ancilla_in, pass_out, detector_out])?;
    let g = params.gamma;
    let t = (1.0 - g * g).sqrt();
    let (partial, total) = match params.variant {
        PpbsVariant::Ppbs1 => (Pol::H, Pol::V),
        PpbsVariant::Ppbs2 => (Pol::V, Pol::H),
    };
    let mut rules = Vec::new();
    for delay in Delay::ALL {
        let m = |path, pol| ModeLabel::new(path, pol, delay);
        rules.push((
            m(signal_in, partial),
            vec![(m(pass_out, partial), re(g)), (m(detector_out, partial), re(t))],
        ));
        rules.push((
            m(ancilla_in, partial),
            vec![(m(detector_out, partial), re(-g)), (m(pass_out, partial), re(t))],
        ));
        rules.push((m(signal_in, total), vec![(m(pass_out, total), re(1.0))]));
        rules.push((m(ancilla_in, total), vec![(m(detector_out, total), re(-1.0))]));
    }
    ModeMap::new(rules)
}

/// Sign pattern of the four detector coincidences produced by one row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorVector {
    /// `H₁H₃ + H₁V₄ + V₂H₃ + V₂V₄`
    Plus,
    /// `H₁H₃ − H₁V₄ − V₂H₃ + V₂V₄`
    Minus,
}

impl DetectorVector {
    /// `(detector, pol, detector, pol, sign)` for each coincidence.
    pub fn terms(self) -> [(Detector, Pol, Detector, Pol, f64); 4] {
        let s = match self {
            DetectorVector::Plus => 1.0,
            DetectorVector::Minus => -1.0,
        };
        [
            (Detector::D1, Pol::H, Detector::D3, Pol::H, 1.0),
            (Detector::D1, Pol::H, Detector::D4, Pol::V, s),
            (Detector::D2, Pol::V, Detector::D3, Pol::H, s),
            (Detector::D2, Pol::V, Detector::D4, Pol::V, 1.0),
        ]
    }
}

/// One input row of the amplification block: signal polarization (or empty)
/// and the common polarization of the two ancilla photons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlaRow {
    pub signal: Option<Pol>,
    pub ancilla: Pol,
    /// Amplitude in front of each of the four detector terms.
    pub coefficient: f64,
    pub detectors: DetectorVector,
}

impl NlaRow {
    /// Total heralded weight carried by this row: four terms of `coefficient²`.
    pub fn heralded_weight(&self) -> f64 {
        4.0 * self.coefficient * self.coefficient
    }
}

/// Heralded amplification block acting on (signal branch, k1, k2).
///
/// Defined row by row by its input → detector-coincidence table; the
/// non-heralded remainder of every row goes to an orthogonal discard mode so
/// that the transform preserves total weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlaNetwork {
    gamma: f64,
    block: Block,
}

impl NlaNetwork {
    pub fn new(gamma: f64, block: Block) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(NlaNetwork { gamma, block })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn block(&self) -> Block {
        self.block
    }

    pub fn rows(&self) -> [NlaRow; 6] {
        let g = self.gamma;
        let g2 = g * g;
        let row = |signal, ancilla, coefficient, detectors| NlaRow {
            signal,
            ancilla,
            coefficient,
            detectors,
        };
        use DetectorVector::{Minus, Plus};
        [
            row(None, Pol::H, g / 2.0, Plus),
            row(None, Pol::V, g / 2.0, Minus),
            row(Some(Pol::H), Pol::H, (2.0 * g2 - 1.0) / 2.0, Plus),
            row(Some(Pol::H), Pol::V, g2 / 2.0, Minus),
            row(Some(Pol::V), Pol::H, g2 / 2.0, Plus),
            row(Some(Pol::V), Pol::V, (2.0 * g2 - 1.0) / 2.0, Minus),
        ]
    }

    pub fn detector_mode(&self, det: Detector, pol: Pol) -> ModeLabel {
        ModeLabel::at(Path::Det(self.block, det), pol)
    }

    pub fn detector_paths(&self) -> BTreeSet<Path> {
        Detector::ALL
            .into_iter()
            .map(|d| Path::Det(self.block, d))
            .collect()
    }

    pub fn apply(&self, state: &PhotonicState) -> Result<PhotonicState> {
        let rows = self.rows();
        let sig_path = self.block.path();
        let k1 = Path::K1(self.block);
        let k2 = Path::K2(self.block);
        state.map_basis(|basis, amp, out| {
            let mut signal: Option<ModeLabel> = None;
            let mut anc1: Option<Pol> = None;
            let mut anc2: Option<Pol> = None;
            for &(m, n) in basis.occupations() {
                let slot_err = || {
                    Error::Contract(format!(
                        "{basis} lies outside the amplification table of block {}",
                        self.block
                    ))
                };
                if m.path == sig_path {
                    if n != 1 || signal.is_some() {
                        return Err(slot_err());
                    }
                    signal = Some(m);
                } else if m.path == k1 {
                    if n != 1 || anc1.is_some() {
                        return Err(slot_err());
                    }
                    anc1 = Some(m.pol);
                } else if m.path == k2 {
                    if n != 1 || anc2.is_some() {
                        return Err(slot_err());
                    }
                    anc2 = Some(m.pol);
                }
            }
            let (Some(p1), Some(p2)) = (anc1, anc2) else {
                return Err(Error::Contract(format!(
                    "block {} needs one photon in each ancilla path, got {basis}",
                    self.block
                )));
            };
            if p1 != p2 {
                return Err(Error::Contract(format!(
                    "ancilla polarizations must agree, got {basis}"
                )));
            }
            let (idx, row) = rows
                .iter()
                .enumerate()
                .find(|(_, r)| r.signal == signal.map(|m| m.pol) && r.ancilla == p1)
                .expect("every (signal, ancilla) pair has a row");
            let rest = basis.filtered(|m| m.path != sig_path && m.path != k1 && m.path != k2);
            let out_mode = signal.map(|m| ModeLabel::new(Path::Out(self.block), m.pol, m.delay));
            if row.coefficient != 0.0 {
                for (da, pa, db, pb, sign) in row.detectors.terms() {
                    let mut added = vec![(self.detector_mode(da, pa), 1), (self.detector_mode(db, pb), 1)];
                    if let Some(o) = out_mode {
                        added.push((o, 1));
                    }
                    out.push((rest.with_added(&added)?, amp * (row.coefficient * sign)));
                }
            }
            let leftover = 1.0 - row.heralded_weight();
            if leftover > 0.0 {
                let photons = 2 + u8::from(signal.is_some());
                let discard = ModeLabel::at(Path::Discard(self.block, idx as u8), Pol::H);
                out.push((rest.with_added(&[(discard, photons)])?, amp * leftover.sqrt()));
            }
            Ok(())
        })
    }
}
