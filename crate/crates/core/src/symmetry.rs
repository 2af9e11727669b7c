use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Time-symmetry class of a periodic field, selecting its admissible modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SymmetryClass {
    /// No constraint beyond reality.
    General,
    /// Even in time (cosine series).
    Even,
    /// Odd in time (sine series).
    Odd,
    /// Even modes only: period T/2.
    HalfPeriodic,
    /// Odd modes only: antiperiodic over T/2.
    HalfAntiperiodic,
}

impl SymmetryClass {
    pub const ALL: [SymmetryClass; 5] = [
        SymmetryClass::General,
        SymmetryClass::Even,
        SymmetryClass::Odd,
        SymmetryClass::HalfPeriodic,
        SymmetryClass::HalfAntiperiodic,
    ];

    pub fn from_index(s: u8) -> Result<Self> {
        match s {
            1 => Ok(Self::General),
            2 => Ok(Self::Even),
            3 => Ok(Self::Odd),
            4 => Ok(Self::HalfPeriodic),
            5 => Ok(Self::HalfAntiperiodic),
            _ => Err(Error::InvalidParameter(format!(
                "symmetry class must be in 1..=5, got {s}"
            ))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Self::General => 1,
            Self::Even => 2,
            Self::Odd => 3,
            Self::HalfPeriodic => 4,
            Self::HalfAntiperiodic => 5,
        }
    }

    pub fn contains(self, k: i64) -> bool {
        match self {
            Self::General | Self::Even => true,
            Self::Odd => k != 0,
            Self::HalfPeriodic => k % 2 == 0,
            Self::HalfAntiperiodic => k % 2 != 0,
        }
    }

    /// Temporal profile of the real basis direction at frequency `k`.
    pub fn uses_sine(self) -> bool {
        matches!(self, Self::Odd | Self::HalfAntiperiodic)
    }

    /// Smallest positive admissible frequency.
    pub fn first_positive(self) -> i64 {
        (1..).find(|&k| self.contains(k)).unwrap_or(1)
    }

    /// Orthogonal projection of the pair `(v_k, v_{-k})` onto the class, `k > 0`.
    pub fn project_pair(self, plus: Complex64, minus: Complex64) -> (Complex64, Complex64) {
        match self {
            Self::Even => {
                let a = 0.5 * (plus.re + minus.re);
                (Complex64::new(a, 0.0), Complex64::new(a, 0.0))
            }
            Self::Odd => {
                let b = 0.5 * (plus.im - minus.im);
                (Complex64::new(0.0, b), Complex64::new(0.0, -b))
            }
            _ => {
                let z = 0.5 * (plus + minus.conj());
                (z, z.conj())
            }
        }
    }

    /// Projection of the zero mode.
    pub fn project_zero(self, v: Complex64) -> Complex64 {
        if self.contains(0) {
            Complex64::new(v.re, 0.0)
        } else {
            Complex64::default()
        }
    }
}

impl fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Admissible frequencies `k` with `|k| <= cutoff`, ascending.
pub fn mode_set(sym: SymmetryClass, cutoff: usize) -> Vec<i64> {
    let k = cutoff as i64;
    (-k..=k).filter(|&m| sym.contains(m)).collect()
}
