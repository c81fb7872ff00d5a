//! Postselection-technique accounting: symmetric-subspace dimension in log
//! domain, the protocol-dependent dimension parameter x, and the ε and
//! key-length lift transforms from IID to coherent attacks.
//!
//! The dimension factor g = C(n+x−1, n) can exceed 2^100000, so every
//! quantity touching it is carried as a base-2 logarithm.

use alloc::vec::Vec;

use crate::logdomain::LogProb;
use crate::special::{ln_binom, ln_gamma};
use crate::{Error, Result};

/// Side length up to which the binomial logarithm is summed exactly; the
/// difference of large log-gammas cancels catastrophically for n ~ 10¹⁰.
const SYM_DIM_SUM_LIMIT: u64 = 4_000_000;

/// log₂ of the n-fold symmetric subspace dimension C(n+x−1, n).
pub fn log2_sym_dim(n: u64, x: u32) -> Result<f64> {
    if x < 1 {
        return Err(Error::Domain("symmetric subspace requires x >= 1"));
    }
    if x == 1 || n == 0 {
        return Ok(0.0);
    }
    let top = n + x as u64 - 1;
    let k = (x as u64 - 1).min(n);
    if k <= SYM_DIM_SUM_LIMIT {
        // ln C(top, k) = sum_{j=0}^{k-1} ln(top - j) - ln Gamma(k+1), with
        // compensated summation to hold absolute error near 1e-11.
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for j in 0..k {
            let term = libm::log((top - j) as f64);
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        Ok((sum - ln_gamma(k as f64 + 1.0)) / core::f64::consts::LN_2)
    } else {
        Ok(ln_binom(top as f64, n as f64) / core::f64::consts::LN_2)
    }
}

/// Dimension parameter for a protocol without block structure: dA²·dB².
pub fn x_generic(d_a: u32, d_b: u32) -> Result<u64> {
    if d_a < 1 || d_b < 1 {
        return Err(Error::Domain("dimensions must be >= 1"));
    }
    Ok(d_a as u64 * d_a as u64 * d_b as u64 * d_b as u64)
}

/// Dimension parameter with block-diagonal structure: Σ over (dA_i, dB_j)
/// block pairs of dA_i²·dB_j².
pub fn x_block_diagonal(blocks: &[(u32, u32)]) -> Result<u64> {
    if blocks.is_empty() {
        return Err(Error::Domain("block list must be non-empty"));
    }
    let mut sum = 0u64;
    for &(d_a, d_b) in blocks {
        sum += x_generic(d_a, d_b)?;
    }
    Ok(sum)
}

/// Block pairs for single-photon qubit BB84 with the qubit squasher:
/// Alice is a qubit, Bob decomposes into vacuum and qubit blocks.
pub fn qubit_bb84_blocks() -> Vec<(u32, u32)> {
    alloc::vec![(2, 1), (2, 2)]
}

/// Block pairs for decoy-state BB84 with `n_int` intensities under the
/// tagging source map: Alice contributes n_int·d_Ā per tag class with
/// n_int+2 classes, Bob again splits into vacuum and qubit blocks.
pub fn decoy_bb84_blocks(n_int: u32, d_a_bar: u32) -> Vec<(u32, u32)> {
    let alice_dim = n_int * d_a_bar;
    let classes = n_int + 2;
    let mut blocks = Vec::new();
    for _ in 0..classes {
        blocks.push((alice_dim, 1));
        blocks.push((alice_dim, 2));
    }
    blocks
}

/// Parameters of one postselection lift.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PSParams {
    n: u64,
    x: u32,
    eps_tilde: LogProb,
    log2_g: f64,
}

impl PSParams {
    pub fn new(n: u64, x: u32, eps_tilde: LogProb) -> Result<Self> {
        let log2_g = log2_sym_dim(n, x)?;
        Ok(PSParams {
            n,
            x,
            eps_tilde,
            log2_g,
        })
    }

    /// The default free-parameter choice ε̃ = ε_target/(2g), which spends
    /// half the target on the g·ε̃ term of the lifted secrecy level.
    pub fn with_default_eps_tilde(n: u64, x: u32, eps_target: LogProb) -> Result<Self> {
        let log2_g = log2_sym_dim(n, x)?;
        let eps_tilde = LogProb::from_log2(eps_target.log2() - 1.0 - log2_g);
        Ok(PSParams {
            n,
            x,
            eps_tilde,
            log2_g,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn x(&self) -> u32 {
        self.x
    }

    pub fn eps_tilde(&self) -> LogProb {
        self.eps_tilde
    }

    pub fn log2_g(&self) -> f64 {
        self.log2_g
    }

    /// Key-length cost of the lift in bits: 2·log₂g + 2·log₂(1/(2ε̃)).
    pub fn key_penalty_bits(&self) -> f64 {
        2.0 * self.log2_g + 2.0 * (-1.0 - self.eps_tilde.log2())
    }
}

/// Key length surviving the lift: max(0, ⌊l − 2·log₂g − 2·log₂(1/(2ε̃))⌋).
pub fn lift_key_length(l: u64, params: &PSParams) -> u64 {
    let raw = l as f64 - params.key_penalty_bits();
    if raw > 0.0 {
        libm::floor(raw) as u64
    } else {
        0
    }
}

/// Secrecy level after the lift: g·(sqrt(8·ε_iid) + ε̃), in log domain.
/// The result may exceed 1, signalling trivial security, without error.
pub fn lift_epsilon(eps_iid: LogProb, params: &PSParams) -> LogProb {
    let sqrt_term = LogProb::from_log2((3.0 + eps_iid.log2()) / 2.0);
    sqrt_term.add(params.eps_tilde).scale_log2(params.log2_g)
}

/// The IID secrecy level required to reach `eps_target` after the lift:
/// (ε_target − g·ε̃)²/(8·g²), in log domain. Fails with the floor g·ε̃ when
/// the target does not exceed it.
pub fn required_iid_epsilon(eps_target: LogProb, params: &PSParams) -> Result<LogProb> {
    let g_eps_tilde = params.eps_tilde.scale_log2(params.log2_g);
    let margin = eps_target
        .sub(g_eps_tilde)
        .ok_or(Error::InfeasibleTarget {
            log2_floor: g_eps_tilde.log2(),
        })?;
    Ok(LogProb::from_log2(
        margin.sq().log2() - 3.0 - 2.0 * params.log2_g,
    ))
}
