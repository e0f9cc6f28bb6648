//! Collective polarization noise on the two transmission paths and
//! whole-photon loss.

pub use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{Delay, ModeLabel, ModeMap, Path, PhotonicState, Pol};

const NORM_TOL: f64 = 1e-12;

/// `H → αH + βV` on `a1`, `H → τH + δV` on `b1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub tau: Complex64,
    pub delta: Complex64,
}

impl NoiseParams {
    pub fn new(alpha: Complex64, beta: Complex64, tau: Complex64, delta: Complex64) -> Result<Self> {
        let p = NoiseParams { alpha, beta, tau, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::default();
        NoiseParams { alpha: one, beta: zero, tau: one, delta: zero }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.alpha.norm_sqr() + self.beta.norm_sqr();
        let b = self.tau.norm_sqr() + self.delta.norm_sqr();
        if (a - 1.0).abs() > NORM_TOL || (b - 1.0).abs() > NORM_TOL {
            return Err(Error::OutOfRange(format!(
                "noise parameters must be normalized, got |α|²+|β|² = {a}, |τ|²+|δ|² = {b}"
            )));
        }
        Ok(())
    }
}

/// Unitary completion of the V row, which the channel model leaves open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VCompletion {
    /// `V → −β̄H + ᾱV`.
    #[default]
    Standard,
    /// The standard row times `i`; any other completion differs only by such a phase.
    Rephased,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    f: f64,
}

impl LossParams {
    pub fn new(f: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::OutOfRange(format!("transmission F = {f} must lie in [0, 1]")));
        }
        Ok(LossParams { f })
    }

    pub fn transmission(&self) -> f64 {
        self.f
    }
}

/// One branch of a convex mixture.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub weight: f64,
    pub state: PhotonicState,
}

fn noise_map(params: &NoiseParams, completion: VCompletion) -> Result<ModeMap> {
    let rot = match completion {
        VCompletion::Standard => Complex64::new(1.0, 0.0),
        VCompletion::Rephased => Complex64::new(0.0, 1.0),
    };
    let mut rules = Vec::new();
    for (path, a, b) in [
        (Path::A1, params.alpha, params.beta),
        (Path::B1, params.tau, params.delta),
    ] {
        for delay in [Delay::S, Delay::L] {
            let h = ModeLabel::new(path, Pol::H, delay);
            let v = ModeLabel::new(path, Pol::V, delay);
            rules.push((h, vec![(h, a), (v, b)]));
            rules.push((v, vec![(h, -b.conj() * rot), (v, a.conj() * rot)]));
        }
    }
    ModeMap::new(rules)
}

/// Applies the same polarization rotation to every delay class of a path.
pub fn collective_unitary(state: &PhotonicState, params: &NoiseParams) -> Result<PhotonicState> {
    collective_unitary_with(state, params, VCompletion::Standard)
}

pub fn collective_unitary_with(
    state: &PhotonicState,
    params: &NoiseParams,
    completion: VCompletion,
) -> Result<PhotonicState> {
    params.validate()?;
    if let Some(m) = state
        .modes()
        .into_iter()
        .find(|m| matches!(m.path, Path::A1 | Path::B1) && m.delay.depth() != 1)
    {
        return Err(Error::Contract(format!(
            "channel input must sit at delay depth 1, found {m}"
        )));
    }
    state.apply_mode_map(&noise_map(params, completion)?)
}

/// `[(F, state), (1−F, |vac⟩)]`, dropping zero-weight branches.
pub fn loss_mixture(state: &PhotonicState, params: &LossParams) -> Result<Vec<Trajectory>> {
    if state.photon_number() != Some(1) {
        return Err(Error::Contract("loss acts on a single signal photon".into()));
    }
    let f = params.f;
    let mut out = Vec::with_capacity(2);
    if f > 0.0 {
        out.push(Trajectory { weight: f, state: state.clone() });
    }
    if f < 1.0 {
        out.push(Trajectory { weight: 1.0 - f, state: PhotonicState::vacuum() });
    }
    Ok(out)
}

/// Haar-random pair of SU(2) first columns: uniform points on S³.
pub fn sample_noise<R: Rng + ?Sized>(rng: &mut R) -> NoiseParams {
    let mut column = || {
        let g: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        (Complex64::new(g[0] / n, g[1] / n), Complex64::new(g[2] / n, g[3] / n))
    };
    let (alpha, beta) = column();
    let (tau, delta) = column();
    NoiseParams { alpha, beta, tau, delta }
}
