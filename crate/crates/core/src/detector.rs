//! Threshold-detector click model and the basis-efficiency-mismatch
//! metrics δ₁, δ₂ derived from detector characterization tolerances.
//!
//! Detectors are characterized by a nominal efficiency and dark-count
//! probability, each known only up to a relative tolerance. The metrics
//! are evaluated at the worst-case endpoints of those ranges, which upper
//! bounds the true maxima and is therefore the safe direction.

use alloc::vec::Vec;

use crate::stats::Probability;
use crate::{Error, Result};

/// Characterization of one detector pair: nominal efficiency and dark-count
/// probability with relative tolerances, plus the random-swapping flag.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectorSpec {
    /// Nominal detection efficiency η_det in (0, 1].
    pub eta_det: f64,
    /// Relative efficiency tolerance Δ_η ≥ 0.
    pub delta_eta: f64,
    /// Nominal dark-count probability per detection window in [0, 1).
    pub dc_det: f64,
    /// Relative dark-count tolerance Δ_dc ≥ 0.
    pub delta_dc: f64,
    /// Whether the 0 and 1 detectors are randomly swapped each round.
    pub swap: bool,
}

impl DetectorSpec {
    pub fn new(eta_det: f64, delta_eta: f64, dc_det: f64, delta_dc: f64, swap: bool) -> Result<Self> {
        let spec = DetectorSpec {
            eta_det,
            delta_eta,
            dc_det,
            delta_dc,
            swap,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_det > 0.0 && self.eta_det <= 1.0) {
            return Err(Error::Domain("eta_det must lie in (0, 1]"));
        }
        if self.delta_eta.is_nan() || self.delta_eta < 0.0 || self.delta_dc.is_nan() || self.delta_dc < 0.0 {
            return Err(Error::Domain("tolerances must be >= 0"));
        }
        if self.eta_det * (1.0 + self.delta_eta) > 1.0 {
            return Err(Error::Domain("eta_det(1 + delta_eta) must not exceed 1"));
        }
        if self.eta_det * (1.0 - self.delta_eta) <= 0.0 {
            return Err(Error::Domain("eta_det(1 - delta_eta) must stay positive"));
        }
        if self.dc_det.is_nan() || self.dc_det < 0.0 || self.dc_det * (1.0 + self.delta_dc) >= 1.0 {
            return Err(Error::Domain("dc_det(1 + delta_dc) must stay below 1"));
        }
        Ok(())
    }

    /// Worst-case efficiency ratio η_min/η_max = (1−Δ_η)/(1+Δ_η).
    fn eta_ratio(&self) -> f64 {
        (1.0 - self.delta_eta) / (1.0 + self.delta_eta)
    }
}

/// The two mismatch metrics: δ₁ quantifies how far the error POVMs of the
/// two bases are from each other, δ₂ the weight of the filter discard.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeltaMetrics {
    pub delta1: f64,
    pub delta2: f64,
}

/// δ₁, δ₂ for the plain active detection setup (no hardware modification).
///
/// Worst-case endpoints d_max = d(1+Δ_dc), d_min = d(1−Δ_dc) and
/// η_r = (1−Δ_η)/(1+Δ_η) are substituted per factor. The dark-count ratio
/// term is 0/0 at d = 0 and is defined as 0 there: with no dark counts at
/// all, both detectors have identical (zero) dark-count behaviour.
pub fn delta_metrics_noswap(spec: &DetectorSpec) -> Result<DeltaMetrics> {
    spec.validate()?;
    if spec.swap {
        return Err(Error::Domain("delta_metrics_noswap requires spec.swap = false"));
    }
    let d_max = spec.dc_det * (1.0 + spec.delta_dc);
    let d_min = spec.dc_det * (1.0 - spec.delta_dc);
    let eta_r = spec.eta_ratio();

    // 1 − (1−d)² = d(2−d): the expanded form avoids cancellation at the
    // tiny dark-count probabilities this is evaluated at.
    let click_min = d_min * (2.0 - d_min);
    let click_max = d_max * (2.0 - d_max);

    let (ratio_term, dark_term) = if spec.dc_det == 0.0 {
        (0.0, 0.0)
    } else {
        let ratio = 1.0 - click_min / click_max;
        (ratio, ratio * d_max * (2.0 - d_min) / click_min)
    };
    let eff_term1 =
        4.0 * libm::fabs(1.0 - libm::sqrt(1.0 - (1.0 - d_min) * (1.0 - d_min) * (1.0 - eta_r)));
    let eff_term2 = (1.0 - d_min) * (1.0 - d_min) * (1.0 - eta_r);

    Ok(DeltaMetrics {
        delta1: dark_term.max(eff_term1).min(2.0),
        delta2: ratio_term.max(eff_term2).min(1.0),
    })
}

/// δ₁, δ₂ when the 0 and 1 detectors are randomly swapped each round.
///
/// The expressions are decreasing in the averaged dark count d_m, so the
/// worst case substitutes its lower endpoint d_min = d(1−Δ_dc).
pub fn delta_metrics_swap(spec: &DetectorSpec) -> Result<DeltaMetrics> {
    spec.validate()?;
    if !spec.swap {
        return Err(Error::Domain("delta_metrics_swap requires spec.swap = true"));
    }
    let d_m = spec.dc_det * (1.0 - spec.delta_dc);
    let eta_r = spec.eta_ratio();
    let delta2 = (1.0 - d_m) * (1.0 - d_m) * (1.0 - eta_r) * (1.0 - eta_r) / 2.0;
    let delta1 = 4.0 * (1.0 - libm::sqrt(1.0 - delta2));
    Ok(DeltaMetrics {
        delta1: delta1.min(2.0),
        delta2: delta2.min(1.0),
    })
}

/// Metrics for the given spec, dispatching on the swap flag.
pub fn delta_metrics(spec: &DetectorSpec) -> Result<DeltaMetrics> {
    if spec.swap {
        delta_metrics_swap(spec)
    } else {
        delta_metrics_noswap(spec)
    }
}

/// Component-wise maximum of per-mode metrics, for detectors with several
/// characterized spatio-temporal modes.
pub fn delta_metrics_multimode(specs: &[DetectorSpec]) -> Result<DeltaMetrics> {
    let first = specs
        .first()
        .ok_or(Error::Domain("multimode metrics require at least one mode"))?;
    if specs.iter().any(|s| s.swap != first.swap) {
        return Err(Error::Domain("multimode metrics require a uniform swap flag"));
    }
    let per_mode: Vec<DeltaMetrics> = specs.iter().map(delta_metrics).collect::<Result<_>>()?;
    Ok(DeltaMetrics {
        delta1: per_mode.iter().map(|m| m.delta1).fold(0.0, f64::max),
        delta2: per_mode.iter().map(|m| m.delta2).fold(0.0, f64::max),
    })
}

/// No-click probability of a threshold detector on an n-photon input:
/// (1−dc)(1−η)ⁿ.
pub fn noclick_prob_fock(n_photons: u32, eta: f64, dc: f64) -> Probability {
    Probability::new_clamped((1.0 - dc) * libm::pow(1.0 - eta, n_photons as f64))
}

/// No-click probability on a phase-randomized coherent input of mean photon
/// number μ: the Poisson mixture of the Fock expression, (1−dc)·e^{−ημ}.
pub fn noclick_prob_coherent(mean_photons: f64, eta: f64, dc: f64) -> Probability {
    Probability::new_clamped((1.0 - dc) * libm::exp(-eta * mean_photons))
}
