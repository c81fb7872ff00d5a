//! Ideal universal₂ Toeplitz hashing over GF(2), error verification, and
//! the variable-input-length privacy-amplification procedure.
//!
//! Bit conventions, frozen: bit index 0 is the first transmitted bit. The
//! Toeplitz matrix entry at row j, column i (0-based) reads seed index
//! j−i+m−1 for input length m, so seed[0..m−1] is the reversed first row
//! and seed[m−1..m+l−2] the first column. Tags serialize as lowercase hex,
//! most-significant bit first.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::stats::Probability;
use crate::{Error, Result};

/// An ordered sequence of bits, packed 64 per word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString {
            words: alloc::vec![0; len.div_ceil(64)],
            len,
        }
    }

    /// Builds from a slice of 0/1 values.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut s = BitString::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => s.set(i, 1),
                _ => return Err(Error::Domain("bit values must be 0 or 1")),
            }
        }
        Ok(s)
    }

    /// Draws `len` uniform bits from the given generator.
    pub fn random<R: RngCore>(len: usize, rng: &mut R) -> Self {
        let mut words = alloc::vec![0u64; len.div_ceil(64)];
        for w in words.iter_mut() {
            *w = rng.next_u64();
        }
        let mut s = BitString { words, len };
        s.mask_tail();
        s
    }

    fn mask_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> u8 {
        assert!(i < self.len, "bit index out of range");
        ((self.words[i / 64] >> (i % 64)) & 1) as u8
    }

    pub fn set(&mut self, i: usize, value: u8) {
        assert!(i < self.len, "bit index out of range");
        if value & 1 == 1 {
            self.words[i / 64] |= 1u64 << (i % 64);
        } else {
            self.words[i / 64] &= !(1u64 << (i % 64));
        }
    }

    /// Word w, or 0 past the end.
    fn word(&self, w: usize) -> u64 {
        self.words.get(w).copied().unwrap_or(0)
    }

    /// Bitwise XOR of equal-length strings.
    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        if self.len != other.len {
            return Err(Error::Domain("xor requires equal lengths"));
        }
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(BitString {
            words,
            len: self.len,
        })
    }

    /// Lowercase hex, most-significant bit first: bit 0 becomes the top bit
    /// of the first digit; the final nibble is zero-padded on the right.
    pub fn to_hex(&self) -> String {
        let mut out = String::with_capacity(self.len.div_ceil(4));
        for nib_idx in 0..self.len.div_ceil(4) {
            let mut nib = 0u8;
            for k in 0..4 {
                let i = nib_idx * 4 + k;
                let bit = if i < self.len { self.get(i) } else { 0 };
                nib = (nib << 1) | bit;
            }
            out.push(core::char::from_digit(nib as u32, 16).unwrap());
        }
        out
    }
}

/// Seed of a Toeplitz matrix hashing m bits to l bits: m+l−1 random bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToeplitzSeed {
    bits: BitString,
}

impl ToeplitzSeed {
    pub fn new(bits: BitString) -> Self {
        ToeplitzSeed { bits }
    }

    pub fn random<R: RngCore>(input_len: usize, output_len: usize, rng: &mut R) -> Self {
        let seed_len = seed_len(input_len, output_len);
        ToeplitzSeed {
            bits: BitString::random(seed_len, rng),
        }
    }

    pub fn bits(&self) -> &BitString {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Seed bits needed to hash `m` bits to `l` bits.
pub fn seed_len(m: usize, l: usize) -> usize {
    (m + l).saturating_sub(1)
}

/// Applies the Toeplitz hash T·x over GF(2): output bit j is
/// ⊕_i seed[j−i+m−1]·x_i.
pub fn toeplitz_hash(seed: &ToeplitzSeed, input: &BitString, l: usize) -> Result<BitString> {
    let m = input.len();
    if l == 0 {
        return Ok(BitString::zeros(0));
    }
    if seed.len() != seed_len(m, l) {
        return Err(Error::Domain("seed length must equal input length + output length - 1"));
    }
    if m == 0 {
        return Ok(BitString::zeros(l));
    }
    // With r the reversed seed, row j of the matrix is r[l-1-j .. l-1-j+m],
    // so each output bit is a shifted AND-parity against the input words.
    let total = seed.len();
    let mut rev = BitString::zeros(total);
    for i in 0..total {
        if seed.bits.get(total - 1 - i) == 1 {
            rev.set(i, 1);
        }
    }
    let mut out = BitString::zeros(l);
    let in_words = m.div_ceil(64);
    for j in 0..l {
        let base = l - 1 - j;
        let woff = base / 64;
        let shift = base % 64;
        let mut acc = 0u64;
        for w in 0..in_words {
            let mut window = rev.word(woff + w) >> shift;
            if shift != 0 {
                window |= rev.word(woff + w + 1) << (64 - shift);
            }
            let mut x = input.word(w);
            if w == in_words - 1 && !m.is_multiple_of(64) {
                x &= (1u64 << (m % 64)) - 1;
            }
            acc ^= window & x;
        }
        if !acc.count_ones().is_multiple_of(2) {
            out.set(j, 1);
        }
    }
    Ok(out)
}

/// Error verification: both parties hash their pre-amplification strings to
/// ⌈log₂(1/ε_EV)⌉ bits with the shared seed; the run continues only when
/// the tags match. Returns Alice's tag and the match flag.
pub fn error_verification(
    s_a: &BitString,
    s_b: &BitString,
    seed: &ToeplitzSeed,
    eps_ev: Probability,
) -> Result<(BitString, bool)> {
    if s_a.len() != s_b.len() {
        return Err(Error::Domain("error verification requires equal lengths"));
    }
    let tag_len = ev_tag_len(eps_ev)?;
    let tag_a = toeplitz_hash(seed, s_a, tag_len)?;
    let tag_b = toeplitz_hash(seed, s_b, tag_len)?;
    let matched = tag_a == tag_b;
    Ok((tag_a, matched))
}

/// Tag length ⌈log₂(1/ε_EV)⌉ for error verification.
pub fn ev_tag_len(eps_ev: Probability) -> Result<usize> {
    let v = eps_ev.value();
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::Domain("eps_EV must lie in (0, 1)"));
    }
    Ok(libm::ceil(-libm::log2(v)) as usize)
}

/// Per-input-length Toeplitz seeds for variable-input privacy
/// amplification. Seeds are either generated lazily from a PRNG stream
/// keyed by the input length (the protocol then announces only the seed it
/// used) or supplied explicitly.
#[derive(Debug, Clone)]
pub struct SeedTable {
    out_len: usize,
    explicit: BTreeMap<usize, ToeplitzSeed>,
    prng_key: Option<u64>,
}

impl SeedTable {
    /// Lazily generates the seed for each observed length from a
    /// deterministic per-length stream of the given key.
    pub fn from_prng(key: u64, out_len: usize) -> Self {
        SeedTable {
            out_len,
            explicit: BTreeMap::new(),
            prng_key: Some(key),
        }
    }

    /// Uses only the provided seeds; absent lengths are an error.
    pub fn from_seeds(seeds: BTreeMap<usize, ToeplitzSeed>, out_len: usize) -> Self {
        SeedTable {
            out_len,
            explicit: seeds,
            prng_key: None,
        }
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }

    /// The seed assigned to inputs of length `m`.
    pub fn seed_for(&self, m: usize) -> Result<ToeplitzSeed> {
        if let Some(seed) = self.explicit.get(&m) {
            return Ok(seed.clone());
        }
        match self.prng_key {
            Some(key) => {
                let mut rng = ChaCha12Rng::seed_from_u64(key);
                rng.set_stream(m as u64);
                Ok(ToeplitzSeed::random(m, self.out_len, &mut rng))
            }
            None => Err(Error::Domain("seed table has no seed for this input length")),
        }
    }
}

/// Variable-input privacy amplification: select the seed assigned to
/// len(s) and hash to the table's output length.
pub fn pa_variable_input(s: &BitString, table: &SeedTable) -> Result<BitString> {
    let seed = table.seed_for(s.len())?;
    toeplitz_hash(&seed, s, table.out_len())
}

/// A raw sifting symbol: a key bit or the discard marker ⊥.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawSymbol {
    Zero,
    One,
    Discard,
}

/// Drops the ⊥ positions and concatenates the surviving bits in order. The
/// ⊥ positions must exactly match the announced discard positions.
pub fn discard_map(s_raw: &[RawSymbol], announced_discards: &[usize]) -> Result<BitString> {
    let actual: Vec<usize> = s_raw
        .iter()
        .enumerate()
        .filter_map(|(i, s)| (*s == RawSymbol::Discard).then_some(i))
        .collect();
    if actual != announced_discards {
        return Err(Error::Domain("discard positions do not match the announcements"));
    }
    let mut out = BitString::zeros(s_raw.len() - actual.len());
    let mut j = 0;
    for s in s_raw {
        match s {
            RawSymbol::Zero => j += 1,
            RawSymbol::One => {
                out.set(j, 1);
                j += 1;
            }
            RawSymbol::Discard => {}
        }
    }
    Ok(out)
}
