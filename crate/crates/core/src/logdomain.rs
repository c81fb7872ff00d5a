//! Probabilities carried as base-2 logarithms.
//!
//! Security parameters in this crate range from everyday values like
//! 10⁻¹⁰ down to quantities such as ε²/(32·g²) where g is a symmetric
//! subspace dimension that can exceed 2¹⁰⁰⁰⁰⁰. Linear `f64` cannot hold
//! those, so all ε arithmetic is carried in log₂ domain and only converted
//! to a linear [`Probability`](crate::Probability) at the edges, where
//! underflow is detectable.

use crate::stats::Probability;

/// Smallest log₂ value whose linear form is still a positive `f64`.
const MIN_LINEAR_LOG2: f64 = -1074.0;

/// A non-negative real carried as its base-2 logarithm.
///
/// Values above 1 (positive log) are permitted: a lifted security parameter
/// may exceed 1, which downstream code reports as trivial security rather
/// than an error.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogProb(f64);

#[allow(clippy::should_implement_trait)] // log-domain add/sub/mul, not the linear ops
impl LogProb {
    /// Wraps a base-2 logarithm. `-inf` encodes an exact zero.
    pub fn from_log2(log2: f64) -> Self {
        LogProb(log2)
    }

    /// Converts a linear probability; `p = 0` maps to `-inf`.
    pub fn from_linear(p: f64) -> Self {
        LogProb(libm::log2(p))
    }

    pub fn log2(self) -> f64 {
        self.0
    }

    /// Linear value; underflows to 0.0 below 2⁻¹⁰⁷⁴ (see [`Self::underflows`]).
    pub fn to_linear(self) -> f64 {
        libm::exp2(self.0)
    }

    /// True when the linear form is not representable as a positive `f64`.
    /// The log form stays exact; callers that expose linear values use this
    /// as the underflow flag.
    pub fn underflows(self) -> bool {
        self.0 < MIN_LINEAR_LOG2
    }

    /// Clamps to at most 1 and converts to a [`Probability`].
    pub fn to_probability_clamped(self) -> Probability {
        Probability::new_clamped(self.to_linear())
    }

    /// ln(1/x²) = −2·ln(2)·log₂(x). Finite only for x < 1.
    pub fn ln_inv_sq(self) -> f64 {
        -2.0 * core::f64::consts::LN_2 * self.0
    }

    /// Log-domain multiplication.
    pub fn mul(self, other: LogProb) -> LogProb {
        LogProb(self.0 + other.0)
    }

    /// Log-domain addition, `log₂(2^a + 2^b)`, stable for any magnitudes.
    pub fn add(self, other: LogProb) -> LogProb {
        let (hi, lo) = if self.0 >= other.0 {
            (self.0, other.0)
        } else {
            (other.0, self.0)
        };
        if hi == f64::NEG_INFINITY {
            return LogProb(f64::NEG_INFINITY);
        }
        LogProb(hi + libm::log2(1.0 + libm::exp2(lo - hi)))
    }

    /// Log-domain subtraction, `log₂(2^a − 2^b)`. Returns `None` when the
    /// difference would be non-positive.
    pub fn sub(self, other: LogProb) -> Option<LogProb> {
        if other.0 >= self.0 {
            return None;
        }
        let diff = 1.0 - libm::exp2(other.0 - self.0);
        if diff <= 0.0 {
            return None;
        }
        Some(LogProb(self.0 + libm::log2(diff)))
    }

    /// Log-domain square root.
    pub fn sqrt(self) -> LogProb {
        LogProb(self.0 / 2.0)
    }

    /// Log-domain square.
    pub fn sq(self) -> LogProb {
        LogProb(self.0 * 2.0)
    }

    /// Multiplies by a plain scalar factor given in log₂ (e.g. a dimension).
    pub fn scale_log2(self, log2_factor: f64) -> LogProb {
        LogProb(self.0 + log2_factor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_matches_linear_for_moderate_values() {
        let a = LogProb::from_linear(0.25);
        let b = LogProb::from_linear(0.125);
        assert!((a.add(b).to_linear() - 0.375).abs() < 1e-15);
    }

    #[test]
    fn sub_matches_linear() {
        let a = LogProb::from_linear(0.5);
        let b = LogProb::from_linear(0.125);
        assert!((a.sub(b).unwrap().to_linear() - 0.375).abs() < 1e-15);
        assert!(b.sub(a).is_none());
        assert!(a.sub(a).is_none());
    }

    #[test]
    fn add_handles_extreme_magnitudes() {
        let a = LogProb::from_log2(-100_000.0);
        let b = LogProb::from_log2(-100_001.0);
        let s = a.add(b);
        // log2(2^-100000 + 2^-100001) = -100000 + log2(1.5)
        assert!((s.log2() - (-100_000.0 + 1.5f64.log2())).abs() < 1e-12);
        assert!(s.underflows());
        assert_eq!(s.to_linear(), 0.0);
    }

    #[test]
    fn ln_inv_sq_matches_direct() {
        let e = LogProb::from_linear(1e-10);
        assert!((e.ln_inv_sq() - (1e20f64).ln()).abs() < 1e-6);
    }

    #[test]
    fn zero_is_absorbing_for_add() {
        let z = LogProb::from_linear(0.0);
        let a = LogProb::from_linear(0.5);
        assert!((z.add(a).to_linear() - 0.5).abs() < 1e-15);
        assert_eq!(z.add(z).to_linear(), 0.0);
    }
}
