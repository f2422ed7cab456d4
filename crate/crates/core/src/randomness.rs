//! One-way random tape and κ-wise independent polynomial hashing.
//!
//! The tape is a ChaCha8 keystream keyed by `SHA-256(master_seed)`. ChaCha's
//! block counter is little-endian, so bit `i` of the tape is bit `i % 64` of
//! the `i / 64`-th little-endian 64-bit word of the keystream. Independent
//! streams (one per trial) use the ChaCha stream id.

use rand::{Error as RandError, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// `⌈log₂ x⌉` for `x ≥ 1` (0 for `x ≤ 1`).
pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Smallest prime `p ≥ lower` (and `p ≥ 2`).
pub fn next_prime(lower: u64) -> u64 {
    let mut p = lower.max(2);
    while !primal_check::miller_rabin(p) {
        p += 1;
    }
    p
}

/// Largest prime `p < upper`.
pub fn prev_prime(upper: u64) -> u64 {
    assert!(upper > 2);
    let mut p = upper - 1;
    while !primal_check::miller_rabin(p) {
        p -= 1;
    }
    p
}

#[derive(Debug, thiserror::Error)]
pub enum SeedError {
    #[error("master seed is not valid hex: {0}")]
    BadHex(#[from] hex::FromHexError),
}

/// Parses a hex master seed. Empty strings are allowed and give the empty key.
pub fn parse_seed_hex(s: &str) -> Result<Vec<u8>, SeedError> {
    let s = s.trim();
    let s = s.strip_prefix("0x").unwrap_or(s);
    if s.len() % 2 == 1 {
        Ok(hex::decode(format!("0{s}"))?)
    } else {
        Ok(hex::decode(s)?)
    }
}

/// Packed bit string, bit `i` stored at bit `i % 64` of word `i / 64`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    fn push_bits(&mut self, value: u64, count: u32) {
        if count == 0 {
            return;
        }
        let off = (self.len % 64) as u32;
        if off == 0 {
            self.words.push(value);
        } else {
            *self.words.last_mut().unwrap() |= value << off;
            if off + count > 64 {
                self.words.push(value >> (64 - off));
            }
        }
        self.len += count as usize;
    }
}

/// One-way access to a pseudorandom bit stream.
///
/// Bits are handed out strictly in order; `position` counts bits consumed and
/// there is no way to rewind.
#[derive(Clone, Debug)]
pub struct RandomTape {
    rng: ChaCha8Rng,
    buf: u64,
    buf_bits: u32,
    position: u64,
}

impl RandomTape {
    pub fn new(master_seed: &[u8]) -> Self {
        Self::with_stream(master_seed, 0)
    }

    /// Tape for stream `id` under the same master seed (per-trial derivation).
    pub fn with_stream(master_seed: &[u8], id: u64) -> Self {
        let key: [u8; 32] = Sha256::digest(master_seed).into();
        Self::from_key(key, id)
    }

    pub fn from_key(key: [u8; 32], id: u64) -> Self {
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(id);
        RandomTape {
            rng,
            buf: 0,
            buf_bits: 0,
            position: 0,
        }
    }

    pub fn from_hex(seed: &str) -> Result<Self, SeedError> {
        Ok(Self::new(&parse_seed_hex(seed)?))
    }

    /// Bits consumed so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    /// Next `count ≤ 64` bits as an integer (first bit drawn is the least significant).
    pub fn draw_u64(&mut self, count: u32) -> u64 {
        assert!(count <= 64);
        if count == 0 {
            return 0;
        }
        self.position += count as u64;
        if count <= self.buf_bits {
            let v = if count == 64 {
                self.buf
            } else {
                self.buf & ((1u64 << count) - 1)
            };
            self.buf = if count == 64 { 0 } else { self.buf >> count };
            self.buf_bits -= count;
            return v;
        }
        let have = self.buf_bits;
        let low = self.buf;
        let word = self.rng.next_u64();
        let need = count - have;
        let high = if need == 64 { word } else { word & ((1u64 << need) - 1) };
        self.buf = if need == 64 { 0 } else { word >> need };
        self.buf_bits = 64 - need;
        if have == 0 {
            high
        } else {
            low | (high << have)
        }
    }

    pub fn draw_bits(&mut self, count: usize) -> BitString {
        let mut out = BitString::default();
        let mut left = count;
        while left > 0 {
            let k = left.min(64) as u32;
            out.push_bits(self.draw_u64(k), k);
            left -= k as usize;
        }
        out
    }

    /// Uniform integer in `[0, bound)` by rejection on `⌈log₂ bound⌉`-bit draws.
    pub fn draw_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let bits = ceil_log2(bound);
        loop {
            let v = self.draw_u64(bits);
            if v < bound {
                return v;
            }
        }
    }
}

impl RngCore for RandomTape {
    fn next_u32(&mut self) -> u32 {
        self.draw_u64(32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.draw_u64(64)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for b in dest {
            *b = self.draw_u64(8) as u8;
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), RandError> {
        self.fill_bytes(dest);
        Ok(())
    }
}

/// Arithmetic modulo a prime `p < 2⁶³`, Barrett-reduced when `p < 2³²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrimeField {
    p: u64,
    barrett: u64,
}

impl PrimeField {
    pub fn new(p: u64) -> Self {
        assert!((2..1 << 63).contains(&p));
        let barrett = if p < 1 << 32 {
            (u128::from(u64::MAX) + 1).div_euclid(u128::from(p)) as u64
        } else {
            0
        };
        PrimeField { p, barrett }
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    #[inline]
    fn reduce_small(&self, x: u64) -> u64 {
        let q = ((u128::from(x) * u128::from(self.barrett)) >> 64) as u64;
        let r = x - q * self.p;
        if r >= self.p {
            r - self.p
        } else {
            r
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        if self.barrett != 0 {
            self.reduce_small(a * b)
        } else {
            ((u128::from(a) * u128::from(b)) % u128::from(self.p)) as u64
        }
    }

    /// Σ coeffs[i]·x^i mod p. Two interleaved Horner chains in x².
    pub fn eval_poly(&self, coeffs: &[u64], x: u64) -> u64 {
        let x = x % self.p;
        if coeffs.len() <= 2 {
            return match coeffs {
                [] => 0,
                [c0] => *c0,
                [c0, c1] => self.add(*c0, self.mul(*c1, x)),
                _ => unreachable!(),
            };
        }
        if self.barrett != 0 {
            let x2 = self.reduce_small(x * x);
            let top = coeffs.len() - 1;
            // even chain holds c0, c2, ...; odd chain holds c1, c3, ...
            let (mut e, mut o) = (0u64, 0u64);
            let mut i = top - (top % 2);
            let mut j = if top % 2 == 1 { top } else { top - 1 };
            loop {
                e = self.reduce_small(e * x2 + coeffs[i]);
                o = self.reduce_small(o * x2 + coeffs[j]);
                if j == 1 {
                    break;
                }
                i -= 2;
                j -= 2;
            }
            if i != 0 {
                e = self.reduce_small(e * x2 + coeffs[0]);
            }
            self.add(e, self.reduce_small(o * x))
        } else {
            let mut acc = 0u64;
            for &c in coeffs.iter().rev() {
                acc = self.add(self.mul(acc, x), c);
            }
            acc
        }
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }
}

/// How the field prime is chosen for a level hash.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldChoice {
    /// Smallest prime `p ≥ max(m, range)`.
    #[default]
    Smallest,
    /// Largest prime below `2^b`, where `2^(b−1)` is the first power of two
    /// `≥ max(m, range·2²⁰)`. The range reduction bias is below 2⁻²⁰, and since
    /// `p` sits just under `2^b`, reducing `b` tape bits mod `p` is near uniform.
    LowBias,
}

impl FieldChoice {
    pub fn prime_for(self, m: u64, range_bound: u64) -> u64 {
        match self {
            FieldChoice::Smallest => next_prime(m.max(range_bound)),
            FieldChoice::LowBias => {
                let b = ceil_log2(m.max(range_bound << 20)) + 1;
                assert!(b < 64, "field too large");
                prev_prime(1 << b)
            }
        }
    }
}

/// Coefficients of a degree-(κ−1) polynomial over `F_p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KWiseSeed {
    coefficients: Vec<u64>,
    field: PrimeField,
}

impl KWiseSeed {
    pub fn new(prime: u64, coefficients: Vec<u64>) -> Self {
        assert!(!coefficients.is_empty());
        assert!(coefficients.iter().all(|&c| c < prime));
        KWiseSeed {
            coefficients,
            field: PrimeField::new(prime),
        }
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[u64] {
        &self.coefficients
    }

    pub fn prime(&self) -> u64 {
        self.field.modulus()
    }

    /// Seed size in bits: κ·⌈log₂ p⌉.
    pub fn bit_len(&self) -> u64 {
        self.coefficients.len() as u64 * u64::from(ceil_log2(self.prime()))
    }

    /// Polynomial value at `x`, in `[0, p)`.
    #[inline]
    pub fn eval(&self, x: u64) -> u64 {
        self.field.eval_poly(&self.coefficients, x)
    }
}

/// Draws a κ-wise independent seed over the prime chosen by `field`.
///
/// Each coefficient consumes exactly `⌈log₂ p⌉` bits and is reduced mod p.
pub fn sample_kwise_in(tape: &mut RandomTape, kappa: usize, m: u64, range_bound: u64, field: FieldChoice) -> KWiseSeed {
    assert!(kappa >= 1 && m >= 1 && range_bound >= 1);
    let p = field.prime_for(m, range_bound);
    let bits = ceil_log2(p);
    let coefficients = (0..kappa).map(|_| tape.draw_u64(bits) % p).collect();
    KWiseSeed::new(p, coefficients)
}

/// [`sample_kwise_in`] with the smallest admissible prime.
pub fn sample_kwise(tape: &mut RandomTape, kappa: usize, m: u64, range_bound: u64) -> KWiseSeed {
    sample_kwise_in(tape, kappa, m, range_bound, FieldChoice::Smallest)
}

/// Biased level hash `[m] → [n] ∪ {0}`: the polynomial value mod 2n, shifted
/// to `[1, 2n]`, with `[n+1, 2n]` collapsed to 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelHash {
    seed: KWiseSeed,
    n: u32,
    m: u64,
}

impl LevelHash {
    pub fn new(seed: KWiseSeed, n: u32, m: u64) -> Self {
        assert!(n >= 1);
        LevelHash { seed, n, m }
    }

    pub fn seed(&self) -> &KWiseSeed {
        &self.seed
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    #[inline]
    pub fn eval(&self, j: u64) -> u32 {
        debug_assert!(j >= 1 && j <= self.m);
        reduce_to_level(self.seed.eval(j), self.n)
    }
}

/// Maps a field value to `[n] ∪ {0}` via `value mod 2n`.
#[inline]
pub fn reduce_to_level(value: u64, n: u32) -> u32 {
    let r = value % (2 * u64::from(n));
    if r < u64::from(n) {
        r as u32 + 1
    } else {
        0
    }
}

pub fn sample_level(tape: &mut RandomTape, kappa: usize, n: u32, m: u64, field: FieldChoice) -> LevelHash {
    let seed = sample_kwise_in(tape, kappa, m, 2 * u64::from(n), field);
    LevelHash::new(seed, n, m)
}

/// `eval_level` as a free function.
pub fn eval_level(h: &LevelHash, j: u64) -> u32 {
    h.eval(j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn all_seeds(p: u64, kappa: usize) -> impl Iterator<Item = Vec<u64>> {
        let total = p.pow(kappa as u32);
        (0..total).map(move |mut code| {
            (0..kappa)
                .map(|_| {
                    let c = code % p;
                    code /= p;
                    c
                })
                .collect()
        })
    }

    fn naive_eval(coeffs: &[u64], x: u64, p: u64) -> u64 {
        let mut acc = 0u128;
        let mut pow = 1u128;
        for &c in coeffs {
            acc = (acc + u128::from(c) * pow) % u128::from(p);
            pow = pow * u128::from(x) % u128::from(p);
        }
        acc as u64
    }

    #[test]
    fn zero_length_draw() {
        let mut tape = RandomTape::new(b"x");
        assert!(tape.draw_bits(0).is_empty());
        assert_eq!(tape.position(), 0);
    }

    #[test]
    fn draws_replay_and_split_consistently() {
        let mut a = RandomTape::new(b"seed");
        let x = a.draw_bits(64);
        let y = a.draw_bits(64);
        assert_ne!(x, y);
        assert_eq!(a.position(), 128);

        let mut b = RandomTape::new(b"seed");
        assert_eq!(b.draw_bits(64), x);
        assert_eq!(b.draw_bits(64), y);

        // Odd-sized draws read the same stream.
        let mut c = RandomTape::new(b"seed");
        let mut bits = Vec::new();
        for k in [3usize, 17, 1, 40, 64, 3] {
            let s = c.draw_bits(k);
            bits.extend((0..k).map(|i| s.get(i)));
        }
        let expect: Vec<bool> = (0..64).map(|i| x.get(i)).chain((0..64).map(|i| y.get(i))).collect();
        assert_eq!(bits, expect);
    }

    #[test]
    fn streams_differ() {
        let mut a = RandomTape::with_stream(b"s", 0);
        let mut b = RandomTape::with_stream(b"s", 1);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn hex_seed_parsing() {
        assert_eq!(parse_seed_hex("0x0a0b").unwrap(), vec![10, 11]);
        assert_eq!(parse_seed_hex("abc").unwrap(), vec![0x0a, 0xbc]);
        assert!(parse_seed_hex("zz").is_err());
    }

    #[test]
    fn primes() {
        assert_eq!(next_prime(0), 2);
        assert_eq!(next_prime(8), 11);
        assert_eq!(next_prime(17), 17);
        assert_eq!(next_prime(1 << 20), 1_048_583);
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(17), 5);
        assert_eq!(ceil_log2(1 << 20), 20);
    }

    #[test]
    fn field_eval_matches_naive() {
        let mut tape = RandomTape::new(b"poly");
        for p in [2u64, 3, 17, 65_537, 4_294_967_291, 1_099_511_627_791] {
            let f = PrimeField::new(p);
            for kappa in [1usize, 2, 3, 4, 7, 240] {
                let coeffs: Vec<u64> = (0..kappa).map(|_| tape.draw_below(p)).collect();
                for _ in 0..20 {
                    let x = tape.next_u64() % (4 * p);
                    assert_eq!(f.eval_poly(&coeffs, x), naive_eval(&coeffs, x, p));
                }
            }
        }
    }

    #[test]
    fn seed_accounting() {
        let mut tape = RandomTape::new(b"acct");
        let seed = sample_kwise(&mut tape, 5, 100, 16);
        assert_eq!(seed.prime(), 101);
        assert_eq!(seed.degree(), 5);
        assert_eq!(tape.position(), 5 * 7);
        assert_eq!(seed.bit_len(), 35);

        let constant = sample_kwise(&mut tape, 1, 8, 8);
        assert_eq!(constant.degree(), 1);
    }

    #[test]
    fn same_tape_prefix_same_seed() {
        let a = sample_kwise(&mut RandomTape::new(b"k"), 4, 1000, 64);
        let b = sample_kwise(&mut RandomTape::new(b"k"), 4, 1000, 64);
        assert_eq!(a, b);
    }

    #[test]
    fn pairwise_exhaustive_exactly_one_seed() {
        // κ=2 over p=11 (smallest prime ≥ 8): every pair of distinct points and
        // every pair of field values is hit by exactly one seed.
        let p = next_prime(8);
        let mut hits: HashMap<(u64, u64, u64, u64), u32> = HashMap::new();
        for coeffs in all_seeds(p, 2) {
            let s = KWiseSeed::new(p, coeffs);
            for x1 in 1..=8u64 {
                for x2 in (x1 + 1)..=8 {
                    *hits.entry((x1, s.eval(x1), x2, s.eval(x2))).or_default() += 1;
                }
            }
        }
        assert_eq!(hits.len(), 28 * (p * p) as usize);
        assert!(hits.values().all(|&c| c == 1));
    }

    /// Number of residues `v ∈ [0, p)` with `v mod range = r`.
    fn preimages(p: u64, range: u64, r: u64) -> u64 {
        p / range + u64::from(r < p % range)
    }

    #[test]
    fn kwise_range_reduced_law_is_product_of_marginals() {
        // Exhaustive over all p^κ seeds for p ≤ 17, κ ≤ 3: the joint law of the
        // reduced outputs equals the product of the exact reduced marginals.
        for &(p, kappa, range) in &[
            (5u64, 2usize, 4u64),
            (7, 3, 4),
            (11, 2, 8),
            (13, 3, 6),
            (17, 2, 16),
            (17, 3, 2),
        ] {
            let f = PrimeField::new(p);
            let points: Vec<u64> = (1..=kappa as u64).collect();
            let mut counts: HashMap<Vec<u64>, u64> = HashMap::new();
            for coeffs in all_seeds(p, kappa) {
                let key = points.iter().map(|&x| f.eval_poly(&coeffs, x) % range).collect();
                *counts.entry(key).or_default() += 1;
            }
            let total = p.pow(kappa as u32);
            let mut outputs = vec![vec![]];
            for _ in 0..kappa {
                outputs = outputs
                    .into_iter()
                    .flat_map(|o| (0..range).map(move |r| [o.clone(), vec![r]].concat()))
                    .collect();
            }
            let bias = (1.0 + range as f64 / p as f64).powi(kappa as i32) - 1.0;
            for o in outputs {
                let expect: u64 = o.iter().map(|&r| preimages(p, range, r)).product();
                let got = counts.get(&o).copied().unwrap_or(0);
                assert_eq!(got, expect, "p={p} κ={kappa} tuple={o:?}");
                let uniform = total as f64 / range.pow(kappa as u32) as f64;
                assert!((got as f64 / uniform - 1.0).abs() <= bias + 1e-12);
            }
        }
    }

    #[test]
    fn level_marginals_exhaustive() {
        for &(n, p) in &[(1u32, 2u64), (1, 3), (2, 5), (3, 7), (4, 11), (8, 17)] {
            let mut zero = 0u64;
            let mut per = vec![0u64; n as usize + 1];
            for coeffs in all_seeds(p, 2) {
                let h = LevelHash::new(KWiseSeed::new(p, coeffs), n, p);
                let v = h.eval(1);
                if v == 0 {
                    zero += 1;
                } else {
                    per[v as usize] += 1;
                }
            }
            let total = (p * p) as f64;
            let bias = f64::from(n) / p as f64;
            assert!((zero as f64 / total - 0.5).abs() <= bias);
            for &c in &per[1..] {
                assert!((c as f64 / total - 0.5 / f64::from(n)).abs() <= 1.0 / p as f64);
            }
            if p == 2 {
                assert_eq!(zero * 2, p * p);
            }
        }
    }

    #[test]
    fn low_bias_prime() {
        let p = FieldChoice::LowBias.prime_for(64, 64);
        assert!(p >= 64 << 20);
        assert!(primal_check::miller_rabin(p));
        let b = ceil_log2(p);
        assert_eq!(b, 27);
        // the doubled residues [0, 2^b − p) are a tiny fraction of the field
        assert!(((1u64 << b) - p) << 16 < p);
        assert_eq!(prev_prime(8), 7);
        assert_eq!(prev_prime(3), 2);
    }
}
