//! Honest-channel outcome models for qubit and decoy-state BB84,
//! multinomial sampling of observed statistics, and Monte Carlo expected
//! key rates for fixed- versus variable-length operation.
//!
//! The click model is the standard lossy-beamsplitter one: a transmittance
//! 10^(−loss_dB/10) channel in front of threshold detectors with
//! efficiency η_det and dark-count probability d per window, misalignment
//! rotating the polarization by a fixed angle, double clicks randomly
//! remapped, and (for the single-photon protocol only) depolarization
//! mixing the bit with probability p/2. These formulas are validated
//! against an event-level Monte Carlo oracle in the tests.

use alloc::vec::Vec;

use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::Binomial;

use crate::acceptance::{acceptance_test, feasible_intervals, FrequencyVector};
use crate::decoy::{IntensitySpec, ObservedDecoyCounts, OutcomeCounts, NUM_INTENSITIES};
use crate::detector::{delta_metrics, noclick_prob_coherent, DetectorSpec};
use crate::keyrate::{
    keylen_decoy_bb84, keylen_qubit_bb84, lambda_ec_default, phase_error_bound, EpsilonBudget,
    KeyLengthReport,
};
use crate::stats::Probability;
use crate::{Error, Result};

/// Honest channel behaviour between the source and the detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelModel {
    /// Channel loss in dB; transmittance is 10^(−loss_db/10).
    pub loss_db: f64,
    /// Polarization misalignment angle in degrees.
    pub misalignment_deg: f64,
    /// Depolarization probability (single-photon protocol only).
    pub depolarization: f64,
    pub detector: DetectorSpec,
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        if self.loss_db.is_nan() || self.loss_db < 0.0 {
            return Err(Error::Domain("loss must be >= 0 dB"));
        }
        if !(0.0..=1.0).contains(&self.depolarization) {
            return Err(Error::Domain("depolarization must lie in [0, 1]"));
        }
        if !self.misalignment_deg.is_finite() {
            return Err(Error::Domain("misalignment must be finite"));
        }
        self.detector.validate()
    }

    pub fn transmittance(&self) -> f64 {
        libm::pow(10.0, -self.loss_db / 10.0)
    }

    /// Probability that an arriving photon is routed to the wrong arm.
    fn misroute_prob(&self) -> f64 {
        let s = libm::sin(self.misalignment_deg.to_radians());
        s * s
    }
}

/// Protocol configuration shared by the simulators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    /// Total rounds per protocol run.
    pub n: u64,
    /// Probability that Alice prepares in the test (X) basis.
    pub alice_x_prob: f64,
    /// Probability that Bob measures in the X basis.
    pub bob_x_prob: f64,
    /// Source intensities (decoy protocol only).
    pub intensities: Option<IntensitySpec>,
    pub budget: EpsilonBudget,
    /// Error-correction efficiency f_EC.
    pub f_ec: f64,
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Domain("protocol needs at least one round"));
        }
        for p in [self.alice_x_prob, self.bob_x_prob] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Domain("basis probabilities must lie in (0, 1)"));
            }
        }
        if self.f_ec.is_nan() || self.f_ec < 1.0 {
            return Err(Error::Domain("f_EC must be >= 1"));
        }
        Ok(())
    }
}

/// Announcement symbols of the single-photon protocol, in the frequency
/// vector's index order.
pub const QUBIT_SYMBOLS: [&str; 6] = [
    "x_err",
    "x_ok",
    "z_err",
    "z_ok",
    "inconclusive",
    "basis_mismatch",
];

pub const SYM_X_ERR: usize = 0;
pub const SYM_X_OK: usize = 1;
pub const SYM_Z_ERR: usize = 2;
pub const SYM_Z_OK: usize = 3;
pub const SYM_INCONCLUSIVE: usize = 4;
pub const SYM_MISMATCH: usize = 5;

/// Normalized outcome distribution of the single-photon protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitDist {
    pub probs: [f64; 6],
}

/// Per-(basis, intensity) outcome distribution of the decoy protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyDist {
    pub x_err: [f64; NUM_INTENSITIES],
    pub x_ok: [f64; NUM_INTENSITIES],
    pub z_err: [f64; NUM_INTENSITIES],
    pub z_ok: [f64; NUM_INTENSITIES],
    /// Matched-basis no-click probability, resolved by intensity.
    pub inconclusive: [f64; NUM_INTENSITIES],
    pub mismatch: f64,
}

/// Conclusive-error / conclusive-ok / inconclusive split for one matched
/// basis round given the two arms' no-click probabilities.
fn click_split(nc_correct: f64, nc_wrong: f64) -> (f64, f64, f64) {
    let only_correct = (1.0 - nc_correct) * nc_wrong;
    let only_wrong = nc_correct * (1.0 - nc_wrong);
    let double = (1.0 - nc_correct) * (1.0 - nc_wrong);
    // Double clicks are remapped to a uniform bit.
    let err = only_wrong + 0.5 * double;
    let ok = only_correct + 0.5 * double;
    (err, ok, nc_correct * nc_wrong)
}

/// Matched-basis outcome probabilities for a single-photon round.
fn qubit_round_split(channel: &ChannelModel) -> (f64, f64, f64) {
    let eta_ch = channel.transmittance();
    let eta_det = channel.detector.eta_det;
    let d = channel.detector.dc_det;
    // Error probability of the routed photon: depolarization mixes the bit
    // with probability p/2, misalignment rotates the rest.
    let q = channel.depolarization / 2.0
        + (1.0 - channel.depolarization) * channel.misroute_prob();

    let mut err = 0.0;
    let mut ok = 0.0;
    let mut inc = 0.0;
    // Case 1: photon lost (or never detected at the source rate eta_ch).
    let cases = [
        (1.0 - eta_ch, 1.0 - d, 1.0 - d),
        // Case 2: photon routed to the correct arm.
        (eta_ch * (1.0 - q), (1.0 - d) * (1.0 - eta_det), 1.0 - d),
        // Case 3: photon routed to the wrong arm.
        (eta_ch * q, 1.0 - d, (1.0 - d) * (1.0 - eta_det)),
    ];
    for (w, nc_c, nc_w) in cases {
        let (e, o, i) = click_split(nc_c, nc_w);
        err += w * e;
        ok += w * o;
        inc += w * i;
    }
    (err, ok, inc)
}

/// Honest outcome distribution of the single-photon protocol.
pub fn honest_probs_qubit(channel: &ChannelModel, params: &ProtocolParams) -> Result<QubitDist> {
    channel.validate()?;
    params.validate()?;
    let (err, ok, inc) = qubit_round_split(channel);
    let ax = params.alice_x_prob;
    let bx = params.bob_x_prob;
    let p_xx = ax * bx;
    let p_zz = (1.0 - ax) * (1.0 - bx);
    let mismatch = ax * (1.0 - bx) + (1.0 - ax) * bx;
    let probs = [
        p_xx * err,
        p_xx * ok,
        p_zz * err,
        p_zz * ok,
        (p_xx + p_zz) * inc,
        mismatch,
    ];
    Ok(QubitDist { probs })
}

/// Honest outcome distribution of the decoy protocol: coherent-state arms
/// with mean photon numbers μ·η_ch·cos²θ and μ·η_ch·sin²θ.
pub fn honest_probs_decoy(channel: &ChannelModel, params: &ProtocolParams) -> Result<DecoyDist> {
    channel.validate()?;
    params.validate()?;
    let spec = params
        .intensities
        .ok_or(Error::Domain("decoy simulation requires an intensity spec"))?;
    let eta_ch = channel.transmittance();
    let eta_det = channel.detector.eta_det;
    let d = channel.detector.dc_det;
    let q = channel.misroute_prob();

    let ax = params.alice_x_prob;
    let bx = params.bob_x_prob;
    let p_xx = ax * bx;
    let p_zz = (1.0 - ax) * (1.0 - bx);

    let mut dist = DecoyDist {
        x_err: [0.0; 3],
        x_ok: [0.0; 3],
        z_err: [0.0; 3],
        z_ok: [0.0; 3],
        inconclusive: [0.0; 3],
        mismatch: ax * (1.0 - bx) + (1.0 - ax) * bx,
    };
    for k in 0..NUM_INTENSITIES {
        let mu = spec.mu()[k] * eta_ch;
        let nc_c = noclick_prob_coherent(mu * (1.0 - q), eta_det, d).value();
        let nc_w = noclick_prob_coherent(mu * q, eta_det, d).value();
        let (err, ok, inc) = click_split(nc_c, nc_w);
        let p_k = spec.p_mu()[k];
        dist.x_err[k] = p_xx * p_k * err;
        dist.x_ok[k] = p_xx * p_k * ok;
        dist.z_err[k] = p_zz * p_k * err;
        dist.z_ok[k] = p_zz * p_k * ok;
        dist.inconclusive[k] = (p_xx + p_zz) * p_k * inc;
    }
    Ok(dist)
}

/// One multinomial draw over the given probabilities, by chained binomial
/// splits. Deterministic for a fixed generator state.
fn multinomial<R: Rng>(probs: &[f64], n: u64, rng: &mut R) -> Vec<u64> {
    let mut out = Vec::with_capacity(probs.len());
    let mut remaining = n;
    let mut mass_left = 1.0f64;
    for (i, &p) in probs.iter().enumerate() {
        if i + 1 == probs.len() {
            out.push(remaining);
            break;
        }
        if remaining == 0 || mass_left <= 0.0 {
            out.push(0);
            continue;
        }
        let cond = (p / mass_left).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, cond)
            .map(|b| b.sample(rng))
            .unwrap_or(0);
        out.push(draw);
        remaining -= draw;
        mass_left -= p;
    }
    out
}

/// Samples one run's qubit frequency vector; deterministic under the seed.
pub fn sample_qubit_fobs(dist: &QubitDist, n: u64, seed: u64) -> FrequencyVector {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    FrequencyVector::new(multinomial(&dist.probs, n, &mut rng))
}

/// Samples one run's decoy counts plus the observed Z error rate;
/// deterministic under the seed.
pub fn sample_decoy_counts(dist: &DecoyDist, n: u64, seed: u64) -> Result<(ObservedDecoyCounts, f64)> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut probs = Vec::with_capacity(5 * NUM_INTENSITIES + 1);
    for k in 0..NUM_INTENSITIES {
        probs.push(dist.x_err[k]);
        probs.push(dist.x_ok[k]);
        probs.push(dist.z_err[k]);
        probs.push(dist.z_ok[k]);
        probs.push(dist.inconclusive[k]);
    }
    probs.push(dist.mismatch);
    let draw = multinomial(&probs, n, &mut rng);
    counts_from_category_draw(&draw)
}

fn counts_from_category_draw(draw: &[u64]) -> Result<(ObservedDecoyCounts, f64)> {
    let mut x_err = [0.0; 3];
    let mut x_con = [0.0; 3];
    let mut k_con = [0.0; 3];
    let mut z_err_total = 0.0;
    for k in 0..NUM_INTENSITIES {
        let xe = draw[5 * k] as f64;
        let xo = draw[5 * k + 1] as f64;
        let ze = draw[5 * k + 2] as f64;
        let zo = draw[5 * k + 3] as f64;
        x_err[k] = xe;
        x_con[k] = xe + xo;
        k_con[k] = ze + zo;
        z_err_total += ze;
    }
    let counts = ObservedDecoyCounts::new(
        OutcomeCounts::new(x_err)?,
        OutcomeCounts::new(x_con)?,
        OutcomeCounts::new(k_con)?,
    )?;
    let nk: f64 = k_con.iter().sum();
    let e_z = if nk > 0.0 { z_err_total / nk } else { 0.0 };
    Ok((counts, e_z))
}

/// Expected (real-valued) decoy counts for `n` rounds of the honest model,
/// plus the honest Z-basis error rate.
pub fn expected_decoy_counts(dist: &DecoyDist, n: u64) -> Result<(ObservedDecoyCounts, f64)> {
    let nf = n as f64;
    let mut x_err = [0.0; 3];
    let mut x_con = [0.0; 3];
    let mut k_con = [0.0; 3];
    let mut z_err_total = 0.0;
    for k in 0..NUM_INTENSITIES {
        x_err[k] = nf * dist.x_err[k];
        x_con[k] = nf * (dist.x_err[k] + dist.x_ok[k]);
        k_con[k] = nf * (dist.z_err[k] + dist.z_ok[k]);
        z_err_total += nf * dist.z_err[k];
    }
    let counts = ObservedDecoyCounts::new(
        OutcomeCounts::new(x_err)?,
        OutcomeCounts::new(x_con)?,
        OutcomeCounts::new(k_con)?,
    )?;
    let nk: f64 = k_con.iter().sum();
    let e_z = if nk > 0.0 { z_err_total / nk } else { 0.0 };
    Ok((counts, e_z))
}

/// Variable-length key report for one observed qubit frequency vector.
pub fn qubit_report_from_fobs(
    fobs: &FrequencyVector,
    channel: &ChannelModel,
    params: &ProtocolParams,
) -> Result<KeyLengthReport> {
    let deltas = delta_metrics(&channel.detector)?;
    let n_x = (fobs.counts()[SYM_X_ERR] + fobs.counts()[SYM_X_OK]) as f64;
    let n_k = (fobs.counts()[SYM_Z_ERR] + fobs.counts()[SYM_Z_OK]) as f64;
    let e_x = if n_x > 0.0 {
        fobs.counts()[SYM_X_ERR] as f64 / n_x
    } else {
        1.0
    };
    let e_z = if n_k > 0.0 {
        fobs.counts()[SYM_Z_ERR] as f64 / n_k
    } else {
        0.0
    };
    let lambda = lambda_ec_default(n_k, e_z, params.f_ec)?;
    let bound = phase_error_bound(e_x, n_x, n_k, &deltas, &params.budget);
    Ok(keylen_qubit_bb84(n_k, bound, lambda, &params.budget))
}

/// Variable-length key report for the decoy protocol at the expected
/// observations of the honest channel.
pub fn decoy_report_expected(
    channel: &ChannelModel,
    params: &ProtocolParams,
) -> Result<KeyLengthReport> {
    let spec = params
        .intensities
        .ok_or(Error::Domain("decoy report requires an intensity spec"))?;
    let dist = honest_probs_decoy(channel, params)?;
    let (counts, e_z) = expected_decoy_counts(&dist, params.n)?;
    let deltas = delta_metrics(&channel.detector)?;
    let lambda = lambda_ec_default(counts.k_con.total(), e_z, params.f_ec)?;
    keylen_decoy_bb84(&counts, &spec, &deltas, lambda, &params.budget)
}

/// Fixed-length key length evaluated at the worst frequencies compatible
/// with the acceptance test `|F_obs − F̄| ≤ t` on the four conclusive
/// symbols, through the same key-length backend as the variable path.
pub fn fixed_length_key(
    channel: &ChannelModel,
    params: &ProtocolParams,
    tolerance: f64,
) -> Result<KeyLengthReport> {
    let dist = honest_probs_qubit(channel, params)?;
    let fbar: Vec<f64> = (0..4).map(|i| dist.probs[i]).collect();
    let t = alloc::vec![tolerance; 4];
    // The interval construction needs a representable level; budgets whose
    // eps_AT underflows linear f64 fall back to the smallest usable one.
    let eps_at = params.budget.eps_at().to_probability_clamped();
    let eps_at = if eps_at.value() <= 0.0 {
        Probability::new(1e-300).expect("minimal level is representable")
    } else {
        eps_at
    };
    let intervals = feasible_intervals(&fbar, &t, params.n, eps_at)?;
    let n = params.n as f64;
    // Worst admissible corner for the key length: maximal test error rate,
    // minimal test and key round counts, maximal error-correction spend.
    let err_hi = intervals.hi(SYM_X_ERR);
    let err_lo = intervals.lo(SYM_X_ERR);
    let ok_lo = intervals.lo(SYM_X_OK);
    let e_x_worst = if err_hi + ok_lo > 0.0 {
        (err_hi / (err_hi + ok_lo)).min(1.0)
    } else {
        1.0
    };
    let n_x_worst = n * (err_lo + ok_lo);
    let n_k_worst = n * (intervals.lo(SYM_Z_ERR) + intervals.lo(SYM_Z_OK));
    let z_err_hi = intervals.hi(SYM_Z_ERR);
    let z_ok_lo = intervals.lo(SYM_Z_OK);
    let e_z_worst = if z_err_hi + z_ok_lo > 0.0 {
        (z_err_hi / (z_err_hi + z_ok_lo)).min(0.5)
    } else {
        0.5
    };
    let n_k_high = n * (intervals.hi(SYM_Z_ERR) + intervals.hi(SYM_Z_OK));
    let lambda = lambda_ec_default(n_k_high, e_z_worst, params.f_ec)?;
    let deltas = delta_metrics(&channel.detector)?;
    let bound = phase_error_bound(e_x_worst, n_x_worst, n_k_worst, &deltas, &params.budget);
    Ok(keylen_qubit_bb84(n_k_worst, bound, lambda, &params.budget))
}

/// Protocol mode for expected-rate estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateMode {
    /// Fixed-length operation with the given uniform acceptance tolerance.
    Fixed(f64),
    /// Variable-length operation.
    Variable,
}

/// Acceptance-probability-weighted mean key rate and its standard error,
/// over `trials` independent protocol runs. Per-trial randomness derives
/// from (seed, trial index), so results do not depend on execution order.
pub fn expected_key_rate(
    mode: RateMode,
    channel: &ChannelModel,
    params: &ProtocolParams,
    trials: u32,
    seed: u64,
) -> Result<(f64, f64)> {
    if trials < 1 {
        return Err(Error::Domain("expected rate needs at least one trial"));
    }
    let dist = honest_probs_qubit(channel, params)?;
    let fixed = match mode {
        RateMode::Fixed(t) => {
            if t.is_nan() || t < 0.0 {
                return Err(Error::Domain("acceptance tolerance must be >= 0"));
            }
            Some((t, fixed_length_key(channel, params, t)?.key_length))
        }
        RateMode::Variable => None,
    };
    // Only the four conclusive symbols are tested; the inconclusive and
    // mismatch tallies carry unit tolerance.
    let full_fbar: Vec<f64> = dist.probs.to_vec();
    let tolerances = |t: f64| {
        let mut v = alloc::vec![t; 4];
        v.extend_from_slice(&[1.0, 1.0]);
        v
    };
    let mut rates = Vec::with_capacity(trials as usize);
    for trial in 0..trials {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let fobs = FrequencyVector::new(multinomial(&dist.probs, params.n, &mut rng));
        let rate = match &fixed {
            Some((t, l_fixed)) => {
                // The acceptance test checks the four conclusive symbols
                // against their reference fractions of the full round count.
                let pass = acceptance_test(&fobs, &full_fbar, &tolerances(*t))?;
                if pass {
                    *l_fixed as f64 / params.n as f64
                } else {
                    0.0
                }
            }
            None => {
                let report = qubit_report_from_fobs(&fobs, channel, params)?;
                report.key_length as f64 / params.n as f64
            }
        };
        rates.push(rate);
    }
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let var = rates
        .iter()
        .map(|r| (r - mean) * (r - mean))
        .sum::<f64>()
        / rates.len().max(1) as f64;
    let std_err = libm::sqrt(var / rates.len() as f64);
    Ok((mean, std_err))
}
