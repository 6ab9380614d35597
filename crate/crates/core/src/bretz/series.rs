//! Truncated power series in an infinitesimal `ε`.
//!
//! Weights and transition coefficients of a hypothesis graph with
//! infinitesimal edges are carried as `c0 + c1 ε + c2 ε² + c3 ε³`. Only the
//! limit `c0` is ever compared against p-values; the higher terms keep ratios
//! such as `ε / (1 - (1 - ε))` finite and correct.

use std::ops::{Add, Mul, Sub};

const TERMS: usize = 4;

/// Coefficients with magnitude at or below this are treated as zero when
/// locating the leading term of a divisor.
const ZERO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Eps([f64; TERMS]);

impl Eps {
    pub const ZERO: Eps = Eps([0.0; TERMS]);
    pub const ONE: Eps = Eps([1.0, 0.0, 0.0, 0.0]);

    pub fn constant(x: f64) -> Self {
        Eps([x, 0.0, 0.0, 0.0])
    }

    /// `x · ε`
    pub fn infinitesimal(x: f64) -> Self {
        Eps([0.0, x, 0.0, 0.0])
    }

    /// Value as `ε → 0`.
    pub fn limit(self) -> f64 {
        self.0[0]
    }

    fn leading(self) -> Option<usize> {
        self.0.iter().position(|c| c.abs() > ZERO)
    }

    pub fn is_zero(self) -> bool {
        self.leading().is_none()
    }

    /// Series quotient, `None` when the divisor vanishes identically.
    /// Terms of the numerator below the divisor's order are noise and dropped.
    pub fn checked_div(self, rhs: Eps) -> Option<Eps> {
        let k = rhs.leading()?;
        let mut num = [0.0; TERMS];
        let mut den = [0.0; TERMS];
        num[..TERMS - k].copy_from_slice(&self.0[k..]);
        den[..TERMS - k].copy_from_slice(&rhs.0[k..]);
        let mut q = [0.0; TERMS];
        for i in 0..TERMS {
            let mut acc = num[i];
            for j in 1..=i {
                acc -= den[j] * q[i - j];
            }
            q[i] = acc / den[0];
        }
        Some(Eps(q))
    }
}

impl Add for Eps {
    type Output = Eps;
    fn add(self, rhs: Eps) -> Eps {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0) {
            *o += r;
        }
        Eps(out)
    }
}

impl Sub for Eps {
    type Output = Eps;
    fn sub(self, rhs: Eps) -> Eps {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0) {
            *o -= r;
        }
        Eps(out)
    }
}

impl Mul for Eps {
    type Output = Eps;
    fn mul(self, rhs: Eps) -> Eps {
        let mut out = [0.0; TERMS];
        for i in 0..TERMS {
            for j in 0..TERMS - i {
                out[i + j] += self.0[i] * rhs.0[j];
            }
        }
        Eps(out)
    }
}
