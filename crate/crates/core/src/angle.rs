//! Angles restricted to multiples of π/4, stored as integers mod 8.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use std::f64::consts::FRAC_1_SQRT_2;

const PHASES: [Complex64; 8] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex64::new(0.0, 1.0),
    Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex64::new(-1.0, 0.0),
    Complex64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    Complex64::new(0.0, -1.0),
    Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
];

/// θ = kπ/4 with k ∈ ℤ₈.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(u8);

impl Angle {
    pub const ZERO: Angle = Angle(0);
    pub const PI: Angle = Angle(4);

    pub fn new(k: i64) -> Self {
        Angle(k.rem_euclid(8) as u8)
    }

    pub fn k(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = Angle> {
        (0..8).map(Angle)
    }

    /// e^{ikπ/4}, read from a fixed table so that multiples of π/2 are exact.
    pub fn phase(self) -> Complex64 {
        PHASES[self.0 as usize]
    }

    pub fn radians(self) -> f64 {
        self.0 as f64 * std::f64::consts::FRAC_PI_4
    }

    /// Adds π when `bit` is set.
    pub fn flip_if(self, bit: bool) -> Self {
        if bit {
            self + Angle::PI
        } else {
            self
        }
    }
}

impl Add for Angle {
    type Output = Angle;
    fn add(self, rhs: Angle) -> Angle {
        Angle((self.0 + rhs.0) % 8)
    }
}

impl Sub for Angle {
    type Output = Angle;
    fn sub(self, rhs: Angle) -> Angle {
        Angle((self.0 + 8 - rhs.0) % 8)
    }
}

impl Neg for Angle {
    type Output = Angle;
    fn neg(self) -> Angle {
        Angle((8 - self.0) % 8)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}π/4", self.0)
    }
}
