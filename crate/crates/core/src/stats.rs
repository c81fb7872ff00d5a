//! Statistical primitives: binary entropy, the binomial tail function and
//! its ε-level inverse, Serfling and Hoeffding deviation terms, and
//! Clopper-Pearson intervals via beta quantiles.
//!
//! All operations are pure. Counts are accepted as reals where the
//! surrounding pipeline produces fractional bounds; only final key lengths
//! are ever discretized.

use crate::logdomain::LogProb;
use crate::special::reg_inc_beta;
use crate::{Error, Result};

/// A probability value in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::Domain("probability must lie in [0, 1]"))
        }
    }

    /// Clamps into [0, 1]; NaN maps to 0.
    pub fn new_clamped(value: f64) -> Self {
        if value.is_nan() {
            Probability(0.0)
        } else {
            Probability(value.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn log2(self) -> LogProb {
        LogProb::from_linear(self.0)
    }
}

/// Inputs of the binomial tail function: `n` trials with per-trial success
/// bound `delta`, tail taken from fraction `delta + c`.
#[derive(Debug, Clone, Copy)]
pub struct TailSpec {
    n: u64,
    delta: Probability,
    c: f64,
}

impl TailSpec {
    pub fn new(n: u64, delta: Probability, c: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::Domain("tail spec requires n >= 1"));
        }
        if !c.is_finite() || c < 0.0 {
            return Err(Error::Domain("excess fraction c must be finite and >= 0"));
        }
        if delta.value() + c > 1.0 + 1e-12 {
            return Err(Error::Domain("tail spec requires delta + c <= 1"));
        }
        Ok(TailSpec { n, delta, c })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn delta(&self) -> Probability {
        self.delta
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

/// Binary entropy in bits: −x·log₂x − (1−x)·log₂(1−x) on (0, 1/2], with
/// h(0) = 0 and the clamp h(x) = 1 for x > 1/2.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain("binary entropy requires finite x >= 0"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x > 0.5 {
        return Ok(1.0);
    }
    Ok(-x * libm::log2(x) - (1.0 - x) * libm::log2(1.0 - x))
}

/// Lower summation index of the binomial tail: ⌈n(δ+c)⌉.
///
/// The product is nudged downward before the ceiling so that values that
/// are integers up to floating-point noise land on the integer itself;
/// the nudge is capped below half a grid unit so the index is never more
/// than one below the exact ceiling. Taking the smaller index enlarges
/// the tail, which is the conservative direction.
fn tail_start_index(n: u64, delta: f64, c: f64) -> u64 {
    let t = n as f64 * (delta + c);
    let nudged = t - (1e-9 * t.abs()).clamp(1e-9, 0.499);
    let k = libm::ceil(nudged);
    if k <= 0.0 {
        0
    } else if k >= n as f64 {
        (k as u64).min(n)
    } else {
        k as u64
    }
}

/// Upper binomial tail from index ⌈n(δ+c)⌉:
/// Σ_{i=⌈n(δ+c)⌉}^{n} C(n,i) δ^i (1−δ)^{n−i}.
///
/// Evaluated through the identity Pr(X ≥ k) = I_δ(k, n−k+1) for
/// X ~ Bin(n, δ), so it stays accurate for n far beyond direct summation.
pub fn binom_tail_cbin(spec: &TailSpec) -> Probability {
    let n = spec.n;
    let delta = spec.delta.value();
    let k = tail_start_index(n, delta, spec.c);
    if k == 0 {
        return Probability::ONE;
    }
    if delta == 0.0 {
        return Probability::ZERO;
    }
    if delta >= 1.0 {
        return Probability::ONE;
    }
    if k == n {
        // delta^n, in log space to dodge premature underflow
        return Probability::new_clamped(libm::exp(n as f64 * libm::log(delta)));
    }
    Probability::new_clamped(reg_inc_beta(k as f64, (n - k + 1) as f64, delta))
}

/// Inversion method for [`gamma_bin`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaBinMethod {
    /// Smallest c on the 1/n grid with C_bin(n, δ, c) ≤ ε², found by
    /// monotone bisection on the exact tail.
    Exact,
    /// Hoeffding fallback c = sqrt(ln(1/ε²)/(2n)); an upper bound on the
    /// exact inverse, immune to underflow of ε².
    Hoeffding,
}

/// ε-level inverse of the binomial tail: the excess fraction c at which the
/// tail drops to ε². By convention the δ = 0 limit returns 0.
pub fn gamma_bin(n: u64, delta: Probability, eps: Probability, method: GammaBinMethod) -> Result<f64> {
    gamma_bin_log2(n, delta, eps_to_log(eps)?, method)
}

/// Log-domain variant of [`gamma_bin`]; `log2_eps` is log₂(ε).
pub fn gamma_bin_log2(n: u64, delta: Probability, log2_eps: LogProb, method: GammaBinMethod) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain("gamma_bin requires n >= 1"));
    }
    if log2_eps.log2() >= 0.0 {
        return Err(Error::Domain("gamma_bin requires eps in (0, 1)"));
    }
    if delta.value() >= 1.0 {
        return Err(Error::Domain("gamma_bin requires delta < 1"));
    }
    if delta.value() == 0.0 {
        return Ok(0.0);
    }
    match method {
        GammaBinMethod::Hoeffding => Ok(libm::sqrt(log2_eps.ln_inv_sq() / (2.0 * n as f64))),
        GammaBinMethod::Exact => {
            let eps_sq = log2_eps.sq().to_linear();
            if eps_sq == 0.0 {
                return Err(Error::Domain(
                    "eps^2 underflows f64; use the hoeffding method for such levels",
                ));
            }
            let tail_at = |j: u64| -> f64 {
                let c = j as f64 / n as f64;
                let spec = TailSpec {
                    n,
                    delta,
                    c: c.min(1.0 - delta.value()),
                };
                binom_tail_cbin(&spec).value()
            };
            let j_max = libm::ceil(n as f64 * (1.0 - delta.value())) as u64;
            if tail_at(j_max) > eps_sq {
                // No grid point reaches the level; saturate at the largest
                // admissible c. Downstream bounds then saturate as well.
                return Ok(j_max as f64 / n as f64);
            }
            let (mut lo, mut hi) = (0u64, j_max);
            if tail_at(lo) <= eps_sq {
                return Ok(0.0);
            }
            // Invariant: tail(lo) > eps^2 >= tail(hi).
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if tail_at(mid) <= eps_sq {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(hi as f64 / n as f64)
        }
    }
}

/// Serfling sample-size factor f_serf = n_key·n_test² / ((n_key+n_test)(n_test+1)).
pub fn f_serf(n_test: f64, n_key: f64) -> f64 {
    n_key * n_test * n_test / ((n_key + n_test) * (n_test + 1.0))
}

/// Deviation term γ so that the Serfling tail exp(−2γ²·f_serf) equals ε².
pub fn gamma_serf(n_test: f64, n_key: f64, eps: Probability) -> Result<f64> {
    gamma_serf_log2(n_test, n_key, eps_to_log(eps)?)
}

/// Log-domain variant of [`gamma_serf`].
pub fn gamma_serf_log2(n_test: f64, n_key: f64, log2_eps: LogProb) -> Result<f64> {
    if n_test.is_nan() || n_test < 1.0 || n_key.is_nan() || n_key < 1.0 {
        return Err(Error::Domain("gamma_serf requires n_test >= 1 and n_key >= 1"));
    }
    Ok(libm::sqrt(log2_eps.ln_inv_sq() / (2.0 * f_serf(n_test, n_key))))
}

/// Serfling tail bound exp(−2γ²·f_serf), clamped to [0, 1].
pub fn serfling_bound(n_test: f64, n_key: f64, gamma: f64) -> Probability {
    Probability::new_clamped(libm::exp(-2.0 * gamma * gamma * f_serf(n_test, n_key)))
}

/// Hoeffding deviation sqrt((n/2)·ln(2/ε²)); 0 for n = 0.
pub fn hoeffding_dev(n: f64, eps: Probability) -> Result<f64> {
    hoeffding_dev_log2(n, eps_to_log(eps)?)
}

/// Log-domain variant of [`hoeffding_dev`].
pub fn hoeffding_dev_log2(n: f64, log2_eps: LogProb) -> Result<f64> {
    if n.is_nan() || n < 0.0 {
        return Err(Error::Domain("hoeffding_dev requires n >= 0"));
    }
    if n == 0.0 {
        return Ok(0.0);
    }
    // ln(2/eps^2) = ln 2 + ln(1/eps^2)
    Ok(libm::sqrt((n / 2.0) * (core::f64::consts::LN_2 + log2_eps.ln_inv_sq())))
}

const BETA_QUANTILE_TOL: f64 = 1e-12;
const BETA_QUANTILE_MAX_ITER: u32 = 200;

/// Quantile of the beta distribution: the p with I_p(a, b) = q, found by
/// monotone bisection to absolute tolerance 1e-12.
pub fn beta_quantile(q: Probability, a: f64, b: f64) -> Result<Probability> {
    let qv = q.value();
    if !(qv > 0.0 && qv < 1.0) {
        return Err(Error::Domain("beta_quantile requires q in (0, 1)"));
    }
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain("beta_quantile requires a > 0 and b > 0"));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut iter = 0;
    while hi - lo > BETA_QUANTILE_TOL {
        iter += 1;
        if iter > BETA_QUANTILE_MAX_ITER {
            return Err(Error::NonConvergence {
                what: "beta_quantile bisection",
                iterations: iter,
                residual: hi - lo,
            });
        }
        let mid = 0.5 * (lo + hi);
        if reg_inc_beta(a, b, mid) < qv {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Probability::new(0.5 * (lo + hi))
}

/// Two-sided Clopper-Pearson interval for `x` successes in `n` trials at
/// total level ε (ε/2 per tail):
/// lo = BetaQuantile(ε/2; x, n−x+1) with lo = 0 at x = 0, and
/// hi = BetaQuantile(1−ε/2; x+1, n−x) with hi = 1 at x = n.
pub fn clopper_pearson(x: u64, n: u64, eps: Probability) -> Result<(Probability, Probability)> {
    if n < 1 {
        return Err(Error::Domain("clopper_pearson requires n >= 1"));
    }
    if x > n {
        return Err(Error::Domain("clopper_pearson requires x <= n"));
    }
    let ev = eps.value();
    if !(ev > 0.0 && ev < 1.0) {
        return Err(Error::Domain("clopper_pearson requires eps in (0, 1)"));
    }
    let half = Probability::new(ev / 2.0)?;
    let one_minus_half = Probability::new(1.0 - ev / 2.0)?;
    let lo = if x == 0 {
        Probability::ZERO
    } else {
        beta_quantile(half, x as f64, (n - x + 1) as f64)?
    };
    let hi = if x == n {
        Probability::ONE
    } else {
        beta_quantile(one_minus_half, (x + 1) as f64, (n - x) as f64)?
    };
    Ok((lo, hi))
}

fn eps_to_log(eps: Probability) -> Result<LogProb> {
    let v = eps.value();
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::Domain("epsilon must lie in (0, 1)"));
    }
    Ok(eps.log2())
}
