//! Fixed-length acceptance tests and the Clopper-Pearson-based feasible and
//! confidence interval constructions, emitted as per-symbol probability
//! constraints for downstream consumers.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::stats::{beta_quantile, clopper_pearson, Probability};
use crate::{Error, Result};

/// Observed frequencies: one count per announcement symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrequencyVector {
    counts: Vec<u64>,
}

impl FrequencyVector {
    pub fn new(counts: Vec<u64>) -> Self {
        FrequencyVector { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Total number of rounds.
    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Observed fraction of symbol `i`.
    pub fn fraction(&self, i: usize) -> f64 {
        let n = self.n();
        if n == 0 {
            0.0
        } else {
            self.counts[i] as f64 / n as f64
        }
    }
}

/// Which construction produced a set of intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ConstraintConstruction {
    /// Worst case over the acceptance set, for fixed-length protocols.
    Feasible,
    /// Around the observation, for variable-length protocols.
    Confidence,
}

/// One per-symbol probability constraint.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SymbolInterval {
    pub symbol: String,
    pub lo: f64,
    pub hi: f64,
}

/// Interval constraints per test symbol, with the metadata needed to
/// reproduce them.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConstraintIntervals {
    pub construction: ConstraintConstruction,
    /// Total rounds behind the statistics.
    pub n: u64,
    /// The acceptance-test epsilon the construction consumed.
    pub eps_at: f64,
    pub intervals: Vec<SymbolInterval>,
    /// Symbols whose count arguments had to be clamped into [0, n].
    pub clamped_symbols: Vec<usize>,
}

impl ConstraintIntervals {
    pub fn lo(&self, i: usize) -> f64 {
        self.intervals[i].lo
    }

    pub fn hi(&self, i: usize) -> f64 {
        self.intervals[i].hi
    }
}

/// Fixed-length acceptance test: passes iff |F_obs,i − F̄_i| ≤ t_i for
/// every test symbol.
pub fn acceptance_test(fobs: &FrequencyVector, fbar: &[f64], t: &[f64]) -> Result<bool> {
    if fobs.len() != fbar.len() || fbar.len() != t.len() {
        return Err(Error::Domain("acceptance test requires matching symbol sets"));
    }
    Ok(fbar
        .iter()
        .zip(t)
        .enumerate()
        .all(|(i, (f, tol))| libm::fabs(fobs.fraction(i) - f) <= *tol))
}

fn default_symbols(k: usize) -> Vec<String> {
    (0..k).map(|i| i.to_string()).collect()
}

/// Interval constraints covering every state that could pass the
/// acceptance test `|F_obs − F̄| ≤ t` except with probability ε_AT:
///
/// lo_i = BetaQuantile(ε_AT; ⌊n(F̄_i−t_i)⌋, n−⌊n(F̄_i−t_i)⌋+1) and
/// hi_i = BetaQuantile(1−ε_AT; ⌈n(F̄_i+t_i)⌉+1, n−⌈n(F̄_i+t_i)⌉), with
/// lo = 0 at zero successes and hi = 1 at n successes. Count arguments are
/// floored/ceiled outward (the widening direction) and clamped into [0, n]
/// with the affected symbols flagged.
pub fn feasible_intervals(
    fbar: &[f64],
    t: &[f64],
    n: u64,
    eps_at: Probability,
) -> Result<ConstraintIntervals> {
    if fbar.len() != t.len() {
        return Err(Error::Domain("feasible set requires matching symbol sets"));
    }
    if n < 1 {
        return Err(Error::Domain("feasible set requires n >= 1"));
    }
    let ev = eps_at.value();
    if !(ev > 0.0 && ev < 1.0) {
        return Err(Error::Domain("feasible set requires eps in (0, 1)"));
    }
    let symbols = default_symbols(fbar.len());
    let mut intervals = Vec::with_capacity(fbar.len());
    let mut clamped = Vec::new();
    for (i, (&f, &tol)) in fbar.iter().zip(t).enumerate() {
        if !(0.0..=1.0).contains(&f) || tol < 0.0 {
            return Err(Error::Domain("reference frequencies must lie in [0, 1] with t >= 0"));
        }
        let raw_lo = n as f64 * (f - tol);
        let raw_hi = n as f64 * (f + tol);
        if raw_lo < 0.0 || raw_hi > n as f64 {
            clamped.push(i);
        }
        let x_lo = libm::floor(raw_lo.clamp(0.0, n as f64)) as u64;
        let x_hi = libm::ceil(raw_hi.clamp(0.0, n as f64)) as u64;
        let lo = if x_lo == 0 {
            0.0
        } else {
            beta_quantile(eps_at, x_lo as f64, (n - x_lo + 1) as f64)?.value()
        };
        let hi = if x_hi == n {
            1.0
        } else {
            let one_minus = Probability::new(1.0 - ev)?;
            beta_quantile(one_minus, (x_hi + 1) as f64, (n - x_hi) as f64)?.value()
        };
        intervals.push(SymbolInterval {
            symbol: symbols[i].clone(),
            lo,
            hi,
        });
    }
    Ok(ConstraintIntervals {
        construction: ConstraintConstruction::Feasible,
        n,
        eps_at: ev,
        intervals,
        clamped_symbols: clamped,
    })
}

/// Per-symbol Clopper-Pearson intervals around the observation at level
/// ε_AT/|C_test| each (two-sided), so that by the union bound the true
/// probability vector lies in all of them except with probability ε_AT.
pub fn confidence_intervals(
    fobs: &FrequencyVector,
    eps_at: Probability,
    n_test_symbols: u64,
) -> Result<ConstraintIntervals> {
    let n = fobs.n();
    if n < 1 {
        return Err(Error::Domain("confidence set requires n >= 1"));
    }
    if n_test_symbols < 1 {
        return Err(Error::Domain("confidence set requires at least one test symbol"));
    }
    let ev = eps_at.value();
    if !(ev > 0.0 && ev < 1.0) {
        return Err(Error::Domain("confidence set requires eps in (0, 1)"));
    }
    let per_symbol = Probability::new(ev / n_test_symbols as f64)?;
    let symbols = default_symbols(fobs.len());
    let mut intervals = Vec::with_capacity(fobs.len());
    for (i, &x) in fobs.counts().iter().enumerate() {
        let (lo, hi) = clopper_pearson(x, n, per_symbol)?;
        intervals.push(SymbolInterval {
            symbol: symbols[i].clone(),
            lo: lo.value(),
            hi: hi.value(),
        });
    }
    Ok(ConstraintIntervals {
        construction: ConstraintConstruction::Confidence,
        n,
        eps_at: ev,
        intervals,
        clamped_symbols: Vec::new(),
    })
}
