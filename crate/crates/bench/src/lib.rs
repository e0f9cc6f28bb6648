//! Shared fixtures for the criterion benches.

use bqc_core::channel::{collective_unitary, Complex64};
use bqc_core::sender::{encode, prepare_plus_theta};
use bqc_core::{Angle, NoiseParams, PhotonicState};

/// Encoded `|+_θ⟩` after a fixed collective rotation that populates all four branches.
pub fn noisy_photon(theta: Angle) -> PhotonicState {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let noise = NoiseParams::new(
        Complex64::new(s, 0.0),
        Complex64::new(0.0, s),
        Complex64::new(0.6, 0.0),
        Complex64::new(0.0, 0.8),
    )
    .expect("normalized");
    collective_unitary(&encode(&prepare_plus_theta(theta)).expect("encode"), &noise)
        .expect("channel")
}
