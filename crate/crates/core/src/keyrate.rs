//! Phase-error-rate bound under detector mismatch and the final key-length
//! formulas for qubit and decoy-state BB84, with full ε-budget accounting.

use crate::decoy::{
    adjusted_counts, bound_one_max, bound_one_min, bound_zero_min, tau_m, Deviation,
    IntensitySpec, ObservedDecoyCounts, PhotonBounds,
};
use crate::detector::DeltaMetrics;
use crate::logdomain::LogProb;
use crate::stats::{self, binary_entropy, GammaBinMethod, Probability};
use crate::{Error, Result};

/// Below this level of ε² the exact binomial-tail inversion runs out of
/// floating-point range and the Hoeffding form is used instead.
const GAMMA_BIN_EXACT_FLOOR: f64 = 1e-15;

/// Which protocol family an ε budget is allocated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BudgetMode {
    /// Single-photon qubit BB84: ε_AT² = ε_a² + ε_b² + ε_c².
    Qubit,
    /// Decoy-state BB84: ε_AT² = 9ε_d² + ε_s² with ε_s² = ε_a² + ε_b² + ε_c².
    Decoy,
}

/// Hierarchical security-parameter allocation, carried in log₂ domain.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpsilonBudget {
    mode: BudgetMode,
    eps_pa: LogProb,
    eps_ev: LogProb,
    eps_at: LogProb,
    eps_a: LogProb,
    eps_b: LogProb,
    eps_c: LogProb,
    /// Decoy-analysis split (decoy mode only).
    eps_d: Option<LogProb>,
    /// Single-photon phase-error split (decoy mode only).
    eps_s: Option<LogProb>,
}

/// Tolerance on the quadratic-sum identities, measured on log₂ values.
const SPLIT_TOL_LOG2: f64 = 1e-11;

fn log2_quadratic_sum(parts: &[LogProb]) -> LogProb {
    let mut acc = LogProb::from_log2(f64::NEG_INFINITY);
    for p in parts {
        acc = acc.add(p.sq());
    }
    acc
}

impl EpsilonBudget {
    /// Qubit-mode budget with the acceptance-test allocation split evenly:
    /// ε_a = ε_b = ε_c = ε_AT/√3.
    pub fn qubit_even(eps_pa: LogProb, eps_ev: LogProb, eps_at: LogProb) -> Result<Self> {
        let part = eps_at.scale_log2(-0.5 * libm::log2(3.0));
        Self::validated(EpsilonBudget {
            mode: BudgetMode::Qubit,
            eps_pa,
            eps_ev,
            eps_at,
            eps_a: part,
            eps_b: part,
            eps_c: part,
            eps_d: None,
            eps_s: None,
        })
    }

    /// Decoy-mode budget with the split ε_a = ε_b = ε_c = ε_d = ε_AT/√12,
    /// which makes ε_s = ε_AT/2.
    pub fn decoy_even(eps_pa: LogProb, eps_ev: LogProb, eps_at: LogProb) -> Result<Self> {
        let part = eps_at.scale_log2(-0.5 * libm::log2(12.0));
        Self::validated(EpsilonBudget {
            mode: BudgetMode::Decoy,
            eps_pa,
            eps_ev,
            eps_at,
            eps_a: part,
            eps_b: part,
            eps_c: part,
            eps_d: Some(part),
            eps_s: Some(eps_at.scale_log2(-1.0)),
        })
    }

    /// Fully explicit allocation; the quadratic split identities must hold.
    #[allow(clippy::too_many_arguments)]
    pub fn custom(
        mode: BudgetMode,
        eps_pa: LogProb,
        eps_ev: LogProb,
        eps_at: LogProb,
        eps_a: LogProb,
        eps_b: LogProb,
        eps_c: LogProb,
        eps_d: Option<LogProb>,
        eps_s: Option<LogProb>,
    ) -> Result<Self> {
        Self::validated(EpsilonBudget {
            mode,
            eps_pa,
            eps_ev,
            eps_at,
            eps_a,
            eps_b,
            eps_c,
            eps_d,
            eps_s,
        })
    }

    fn validated(budget: EpsilonBudget) -> Result<Self> {
        for e in [budget.eps_pa, budget.eps_ev, budget.eps_at, budget.eps_a, budget.eps_b, budget.eps_c] {
            if e.log2() >= 0.0 || !e.log2().is_finite() {
                return Err(Error::Domain("epsilon values must lie strictly in (0, 1)"));
            }
        }
        let sampling = log2_quadratic_sum(&[budget.eps_a, budget.eps_b, budget.eps_c]);
        match budget.mode {
            BudgetMode::Qubit => {
                if budget.eps_d.is_some() || budget.eps_s.is_some() {
                    return Err(Error::Domain("qubit budgets carry no eps_d or eps_s"));
                }
                if libm::fabs(sampling.log2() - budget.eps_at.sq().log2()) > SPLIT_TOL_LOG2 {
                    return Err(Error::Domain(
                        "qubit budget requires eps_at^2 = eps_a^2 + eps_b^2 + eps_c^2",
                    ));
                }
            }
            BudgetMode::Decoy => {
                let (eps_d, eps_s) = match (budget.eps_d, budget.eps_s) {
                    (Some(d), Some(s)) => (d, s),
                    _ => return Err(Error::Domain("decoy budgets require eps_d and eps_s")),
                };
                if libm::fabs(sampling.log2() - eps_s.sq().log2()) > SPLIT_TOL_LOG2 {
                    return Err(Error::Domain(
                        "decoy budget requires eps_s^2 = eps_a^2 + eps_b^2 + eps_c^2",
                    ));
                }
                let total = eps_d.sq().scale_log2(libm::log2(9.0)).add(eps_s.sq());
                if libm::fabs(total.log2() - budget.eps_at.sq().log2()) > SPLIT_TOL_LOG2 {
                    return Err(Error::Domain(
                        "decoy budget requires eps_at^2 = 9 eps_d^2 + eps_s^2",
                    ));
                }
            }
        }
        Ok(budget)
    }

    pub fn mode(&self) -> BudgetMode {
        self.mode
    }

    pub fn eps_pa(&self) -> LogProb {
        self.eps_pa
    }

    pub fn eps_ev(&self) -> LogProb {
        self.eps_ev
    }

    pub fn eps_at(&self) -> LogProb {
        self.eps_at
    }

    pub fn eps_a(&self) -> LogProb {
        self.eps_a
    }

    pub fn eps_b(&self) -> LogProb {
        self.eps_b
    }

    pub fn eps_c(&self) -> LogProb {
        self.eps_c
    }

    pub fn eps_d(&self) -> Option<LogProb> {
        self.eps_d
    }

    pub fn eps_s(&self) -> Option<LogProb> {
        self.eps_s
    }

    /// Total security parameter ε_secure = 2ε_AT + ε_PA + ε_EV (log domain).
    pub fn eps_secure(&self) -> LogProb {
        self.eps_at
            .scale_log2(1.0)
            .add(self.eps_pa)
            .add(self.eps_ev)
    }

    /// Error-verification tag length ⌈log₂(1/ε_EV)⌉ in bits.
    pub fn ev_tag_bits(&self) -> f64 {
        libm::ceil(-self.eps_ev.log2())
    }
}

/// γ_bin with the method picked by the working range: exact inversion of
/// the binomial tail when ε² is representable, the Hoeffding upper bound
/// below that.
fn gamma_bin_auto(n: f64, delta: f64, log2_eps: LogProb) -> Result<f64> {
    if delta <= 0.0 {
        return Ok(0.0);
    }
    // Fewer trials give a larger deviation term, so flooring is safe.
    let n_int = libm::floor(n).max(1.0) as u64;
    let delta_p = Probability::new_clamped(delta);
    let method = if log2_eps.sq().to_linear() < GAMMA_BIN_EXACT_FLOOR {
        GammaBinMethod::Hoeffding
    } else {
        GammaBinMethod::Exact
    };
    stats::gamma_bin_log2(n_int, delta_p, log2_eps, method)
}

/// High-probability upper bound on the phase error rate:
///
/// (e_X + γ_serf(n_X, n_K; ε_a) + δ₁ + γ_bin(n_K, δ₁; ε_b)) /
/// (1 − δ₂ − γ_bin(n_K, δ₂; ε_c))
///
/// Degenerate inputs (non-positive counts, denominator ≤ 0, out-of-range
/// error rates) return the saturating value 1, which forces a zero key.
/// With δ₁ = δ₂ = 0 every correction except the Serfling term vanishes and
/// the expression reduces to e_X + γ_serf.
pub fn phase_error_bound(
    e_x: f64,
    n_x: f64,
    n_k: f64,
    deltas: &DeltaMetrics,
    budget: &EpsilonBudget,
) -> f64 {
    if !e_x.is_finite() || !(0.0..=1.0).contains(&e_x) {
        return 1.0;
    }
    if n_x.is_nan() || n_x < 1.0 || n_k.is_nan() || n_k < 1.0 {
        return 1.0;
    }
    let gamma_serf = match stats::gamma_serf_log2(n_x, n_k, budget.eps_a) {
        Ok(g) => g,
        Err(_) => return 1.0,
    };
    let gb1 = match gamma_bin_auto(n_k, deltas.delta1, budget.eps_b) {
        Ok(g) => g,
        Err(_) => return 1.0,
    };
    let gb2 = match gamma_bin_auto(n_k, deltas.delta2, budget.eps_c) {
        Ok(g) => g,
        Err(_) => return 1.0,
    };
    let denominator = 1.0 - deltas.delta2 - gb2;
    if denominator <= 0.0 {
        return 1.0;
    }
    (e_x + gamma_serf + deltas.delta1 + gb1) / denominator
}

/// Why a report carries a zero key length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AbortReason {
    /// No conclusive detection events at all.
    NoDetections,
    /// The phase-error bound reached 1/2, zeroing the entropy term.
    PhaseErrorSaturated,
    /// Error correction and ε penalties consumed the entropy budget.
    PenaltiesExceedEntropy,
}

/// Itemized bit costs subtracted from the entropy term.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Penalties {
    /// Privacy-amplification cost in bits.
    pub pa_bits: f64,
    /// Error-verification tag length in bits.
    pub ev_bits: f64,
    /// Constant offset of the applicable key-length formula.
    pub constant_bits: f64,
}

impl Penalties {
    pub fn total(&self) -> f64 {
        self.pa_bits + self.ev_bits + self.constant_bits
    }
}

/// Photon-number bounds per outcome, as consumed by the decoy pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecoyPhotonBounds {
    pub x_err: PhotonBounds,
    pub x_con: PhotonBounds,
    pub k_con: PhotonBounds,
}

/// Final key length plus every pipeline intermediate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KeyLengthReport {
    /// Secure key length in bits.
    pub key_length: u64,
    /// Phase-error-rate bound fed into the entropy term.
    pub phase_error_bound: f64,
    /// Single-photon error-rate estimate e₁ (decoy pipeline only).
    pub single_photon_error: Option<f64>,
    /// Photon-number bounds per outcome (decoy pipeline only).
    pub photon_bounds: Option<DecoyPhotonBounds>,
    /// Number of key-generation rounds entering the entropy term; for the
    /// decoy pipeline this is the single-photon lower bound B¹_min(K).
    pub key_rounds: f64,
    /// Bits spent on error correction.
    pub lambda_ec: f64,
    /// Itemized ε-driven bit costs.
    pub penalties: Penalties,
    /// Set when the key length is zero.
    pub aborted: Option<AbortReason>,
    /// log₂ of ε_AT, ε_PA, ε_EV, ε_secure for budget accounting.
    pub eps_at_log2: f64,
    pub eps_pa_log2: f64,
    pub eps_ev_log2: f64,
    pub eps_secure_log2: f64,
}

fn assemble_report(
    entropy_rounds: f64,
    bound: f64,
    lambda_ec: f64,
    penalties: Penalties,
    budget: &EpsilonBudget,
) -> KeyLengthReport {
    let h = binary_entropy(bound.clamp(0.0, 1.0)).unwrap_or(1.0);
    let raw = entropy_rounds * (1.0 - h) - lambda_ec - penalties.total();
    let key_length = if raw > 0.0 { libm::floor(raw) as u64 } else { 0 };
    let aborted = if key_length > 0 {
        None
    } else if entropy_rounds <= 0.0 {
        Some(AbortReason::NoDetections)
    } else if bound >= 0.5 {
        Some(AbortReason::PhaseErrorSaturated)
    } else {
        Some(AbortReason::PenaltiesExceedEntropy)
    };
    KeyLengthReport {
        key_length,
        phase_error_bound: bound,
        single_photon_error: None,
        photon_bounds: None,
        key_rounds: entropy_rounds,
        lambda_ec,
        penalties,
        aborted,
        eps_at_log2: budget.eps_at.log2(),
        eps_pa_log2: budget.eps_pa.log2(),
        eps_ev_log2: budget.eps_ev.log2(),
        eps_secure_log2: budget.eps_secure().log2(),
    }
}

/// Key length for single-photon qubit BB84:
/// l = max(0, ⌊n_K(1 − h(bound)) − λ_EC − 2·log₂(1/ε_PA) − ⌈log₂(1/ε_EV)⌉ + 2⌋).
pub fn keylen_qubit_bb84(
    n_k: f64,
    phase_bound: f64,
    lambda_ec: f64,
    budget: &EpsilonBudget,
) -> KeyLengthReport {
    let penalties = Penalties {
        pa_bits: -2.0 * budget.eps_pa.log2(),
        ev_bits: budget.ev_tag_bits(),
        constant_bits: -2.0,
    };
    assemble_report(n_k.max(0.0), phase_bound, lambda_ec, penalties, budget)
}

/// Key length for decoy-state BB84. Runs the full pipeline: adjusted
/// counts for each outcome, the one-photon bounds, the single-photon error
/// estimate e₁, the phase-error bound, and finally
/// l = max(0, ⌊B¹_min(K)(1 − h(bound)) − λ_EC − 2·log₂(1/(2ε_PA)) − ⌈log₂(1/ε_EV)⌉⌋).
///
/// All intermediates stay real-valued; only the final length is floored.
pub fn keylen_decoy_bb84(
    counts: &ObservedDecoyCounts,
    spec: &IntensitySpec,
    deltas: &DeltaMetrics,
    lambda_ec: f64,
    budget: &EpsilonBudget,
) -> Result<KeyLengthReport> {
    keylen_decoy_bb84_with_deviation(counts, spec, deltas, lambda_ec, budget, None)
}

/// Variant of [`keylen_decoy_bb84`] that permits disabling the statistical
/// deviation terms for oracle testing. `deviation = None` selects the
/// secure Hoeffding deviation at the budget's ε_d.
pub fn keylen_decoy_bb84_with_deviation(
    counts: &ObservedDecoyCounts,
    spec: &IntensitySpec,
    deltas: &DeltaMetrics,
    lambda_ec: f64,
    budget: &EpsilonBudget,
    deviation: Option<Deviation>,
) -> Result<KeyLengthReport> {
    let eps_d = budget
        .eps_d
        .ok_or(Error::Domain("decoy key lengths require a decoy-mode epsilon budget"))?;
    let deviation = deviation.unwrap_or(Deviation::Hoeffding(eps_d));

    let tau0 = tau_m(spec, 0).value();
    let tau1 = tau_m(spec, 1).value();
    let mut bounds = [PhotonBounds {
        b0_min: 0.0,
        b1_min: 0.0,
        b1_max: 0.0,
    }; 3];
    for (i, oc) in [&counts.x_err, &counts.x_con, &counts.k_con].iter().enumerate() {
        let adj = adjusted_counts(oc, spec, deviation)?;
        let b0 = bound_zero_min(&adj, spec, tau0)?;
        let b1_min = bound_one_min(&adj, spec, tau0, tau1, b0)?;
        let b1_max = bound_one_max(&adj, spec, tau1, oc.total())?;
        bounds[i] = PhotonBounds {
            b0_min: b0,
            b1_min: b1_min.min(b1_max),
            b1_max,
        };
    }
    let photon_bounds = DecoyPhotonBounds {
        x_err: bounds[0],
        x_con: bounds[1],
        k_con: bounds[2],
    };

    let b1_min_xcon = photon_bounds.x_con.b1_min;
    let e1 = if b1_min_xcon <= 0.0 {
        1.0
    } else {
        (photon_bounds.x_err.b1_max / b1_min_xcon).min(1.0)
    };
    let b1_min_kcon = photon_bounds.k_con.b1_min;
    let bound = phase_error_bound(e1, b1_min_xcon, b1_min_kcon, deltas, budget);

    let penalties = Penalties {
        // 2 log2(1/(2 eps_PA)) = 2 (-1 - log2 eps_PA)
        pa_bits: 2.0 * (-1.0 - budget.eps_pa.log2()),
        ev_bits: budget.ev_tag_bits(),
        constant_bits: 0.0,
    };
    let mut report = assemble_report(b1_min_kcon, bound, lambda_ec, penalties, budget);
    report.single_photon_error = Some(e1);
    report.photon_bounds = Some(photon_bounds);
    if report.key_length == 0 && counts.x_con.total() + counts.k_con.total() <= 0.0 {
        report.aborted = Some(AbortReason::NoDetections);
    }
    Ok(report)
}

/// Generic variable-length output: l = max(0, ⌊b_stat − λ_EC − θ⌋) with
/// θ = ⌈log₂(1/ε_EV)⌉ + (α/(α−1))·log₂(1/ε_PA) − 2 for a Rényi parameter
/// α ∈ (1, 2).
pub fn keylen_variable_generic(
    b_stat: f64,
    lambda_ec: f64,
    budget: &EpsilonBudget,
    alpha: f64,
) -> Result<u64> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::Domain("renyi parameter must lie in (1, 2)"));
    }
    let theta = budget.ev_tag_bits() + alpha / (alpha - 1.0) * (-budget.eps_pa.log2()) - 2.0;
    let raw = b_stat - lambda_ec - theta;
    Ok(if raw > 0.0 { libm::floor(raw) as u64 } else { 0 })
}

/// Error-correction spend λ_EC = f_EC · n_K · h(e_Z).
pub fn lambda_ec_default(n_k: f64, e_z: f64, f_ec: f64) -> Result<f64> {
    if f_ec.is_nan() || f_ec < 1.0 {
        return Err(Error::Domain("error-correction efficiency must be >= 1"));
    }
    Ok(f_ec * n_k * binary_entropy(e_z)?)
}

/// The Rényi parameter minimizing the generic variable-length penalty:
/// α = 1 + log₂(1/ε_PA)/(√n·log₂(2·dim + 1)).
pub fn optimal_renyi_alpha(n: f64, eps_pa: LogProb, dim_s: u32) -> f64 {
    1.0 + (-eps_pa.log2()) / (libm::sqrt(n) * libm::log2(2.0 * dim_s as f64 + 1.0))
}
