//! Two-level polarization qubits (|H⟩ ≡ |0⟩, |V⟩ ≡ |1⟩) and Pauli corrections.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::Angle;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qubit(pub [Complex64; 2]);

impl Qubit {
    pub fn new(zero: Complex64, one: Complex64) -> Self {
        Qubit([zero, one])
    }

    /// `(|0⟩ + e^{iθ}|1⟩)/√2`.
    pub fn plus_theta(theta: Angle) -> Self {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Qubit([s, s * theta.phase()])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0[0].norm_sqr() + self.0[1].norm_sqr()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        Qubit([self.0[0] / n, self.0[1] / n])
    }

    /// Global phase fixed so that the first nonzero amplitude is real and positive.
    pub fn canonical(&self) -> Self {
        let q = self.normalized();
        let pivot = if q.0[0].norm() > 1e-9 { q.0[0] } else { q.0[1] };
        let ph = pivot.conj() / pivot.norm();
        Qubit([q.0[0] * ph, q.0[1] * ph])
    }

    /// `|⟨self|other⟩|²` for normalized arguments.
    pub fn fidelity(&self, other: &Qubit) -> f64 {
        let a = self.normalized();
        let b = other.normalized();
        (a.0[0].conj() * b.0[0] + a.0[1].conj() * b.0[1]).norm_sqr()
    }

    /// Largest amplitude difference after phase canonicalization.
    pub fn deviation(&self, other: &Qubit) -> f64 {
        let a = self.canonical();
        let b = other.canonical();
        (a.0[0] - b.0[0]).norm().max((a.0[1] - b.0[1]).norm())
    }
}

/// Pauli correction. `XZ` is the product X·Z (Z acts first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Z,
    XZ,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Z, Pauli::XZ];

    pub fn apply(self, q: &Qubit) -> Qubit {
        let [a, b] = q.0;
        match self {
            Pauli::I => Qubit([a, b]),
            Pauli::X => Qubit([b, a]),
            Pauli::Z => Qubit([a, -b]),
            Pauli::XZ => Qubit([-b, a]),
        }
    }
}
