//! Client-side preparation and time-bin encoding of rotated qubits.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::optics::{bs50, delay_arm, pbs, waveplate, Arm, Waveplate};
use crate::state::{Delay, ModeLabel, ModeMap, Network, Path, PhotonicState, Pol};
use crate::Angle;

const ARM_SHORT: Path = Path::Port(0);
const ARM_LONG: Path = Path::Port(1);
const UNUSED: Path = Path::Port(2);

/// `(|H⟩ + e^{iθ}|V⟩)/√2` at the source.
pub fn prepare_plus_theta(theta: Angle) -> PhotonicState {
    let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let h = PhotonicState::single_photon(ModeLabel::at(Path::Src, Pol::H), s);
    let v = PhotonicState::single_photon(ModeLabel::at(Path::Src, Pol::V), s * theta.phase());
    h.and_then(|h| v.map(|v| h.plus(&v)))
        .expect("amplitudes of modulus 1/√2")
}

/// PBS → HWP on the V arm → short/long arms → 50:50 BS onto `a1`/`b1`.
pub fn encoder_network() -> Result<Network> {
    Ok(Network::new()
        .then(pbs(Path::Src, UNUSED, ARM_SHORT, ARM_LONG)?)
        .then(waveplate(Waveplate::Hwp, ARM_LONG)?)
        .then(delay_arm(ARM_SHORT, Arm::Short)?)
        .then(delay_arm(ARM_LONG, Arm::Long)?)
        .then(bs50(ARM_SHORT, ARM_LONG, Path::A1, Path::B1)?))
}

fn encoder_map() -> &'static ModeMap {
    static MAP: OnceLock<ModeMap> = OnceLock::new();
    MAP.get_or_init(|| {
        encoder_network()
            .and_then(|n| n.collapse(Pol::BOTH.map(|p| ModeLabel::at(Path::Src, p))))
            .expect("encoder wiring is a fixed isometry")
    })
}

/// Encodes a source photon into the dual-path, two-time-bin, H-only form.
pub fn encode(state: &PhotonicState) -> Result<PhotonicState> {
    for (b, _) in state.terms() {
        match b.occupations() {
            [(m, 1)] if m.path == Path::Src && m.delay == Delay::ORIGIN => {}
            _ => {
                return Err(Error::Contract(format!(
                    "encoder takes one undelayed photon at the source, got {b}"
                )))
            }
        }
    }
    state.apply_mode_map(encoder_map())
}
