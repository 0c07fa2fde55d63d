//! Exhaustive ground truth for the guessing games at toy widths.
//!
//! Deliberately shares nothing with the game code beyond `sha2`: inputs are
//! raw byte strings, guesses are plain integers, and every acceptance
//! predicate is written out long-hand.

use rayon::prelude::*;
use sha2::{Digest as _, Sha256};

use crate::adversary::OracleSummary;
use crate::error::{Error, Result};

/// Default enumeration cap, `2^24` tuples.
pub const DEFAULT_CAP_BITS: u32 = 24;

/// Public data of one game instance, as raw big-endian bytes of length `len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleInstance {
    /// Guess order `(ID, x, PW, b)`.
    Alg3 {
        len: usize,
        kn: Vec<u8>,
        n: Vec<u8>,
        bits: [u32; 4],
    },
    /// Guess order `(PW, ID)`.
    Alg4 {
        len: usize,
        r: Vec<u8>,
        b: Vec<u8>,
        bits: [u32; 2],
    },
    /// Guess `ID`.
    Alg5 {
        len: usize,
        q: Vec<u8>,
        b: Vec<u8>,
        x: Vec<u8>,
        pw: Vec<u8>,
        id_bits: u32,
    },
    /// Guess `ID`; `key` is the stored `Q ⊕ PWB`.
    Alg6 {
        len: usize,
        q: Vec<u8>,
        r: Vec<u8>,
        key: Vec<u8>,
        x: Vec<u8>,
        id_bits: u32,
    },
}

/// Every accepting tuple of one instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcceptingSet {
    pub universe: u64,
    pub tuples: Vec<Vec<u64>>,
}

fn h(len: usize, parts: &[&[u8]]) -> Vec<u8> {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p);
    }
    hasher.finalize()[..len].to_vec()
}

fn be(len: usize, v: u64) -> Vec<u8> {
    let mut out = vec![0u8; len];
    let raw = v.to_be_bytes();
    let take = len.min(8);
    out[len - take..].copy_from_slice(&raw[8 - take..]);
    out
}

fn xor(a: &[u8], b: &[u8]) -> Vec<u8> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

impl OracleInstance {
    pub fn bits(&self) -> Vec<u32> {
        match self {
            OracleInstance::Alg3 { bits, .. } => bits.to_vec(),
            OracleInstance::Alg4 { bits, .. } => bits.to_vec(),
            OracleInstance::Alg5 { id_bits, .. } | OracleInstance::Alg6 { id_bits, .. } => {
                vec![*id_bits]
            }
        }
    }

    fn total_bits(&self) -> u32 {
        self.bits().iter().sum()
    }

    /// Components the predicate actually reads. The others are accepted
    /// whatever their value.
    pub fn read_components(&self) -> Vec<usize> {
        match self {
            // PW* and b* cancel in h(ID‖x) ⊕ h(PW⊕b) ⊕ h(PW⊕b)
            OracleInstance::Alg3 { .. } => vec![0, 1],
            OracleInstance::Alg4 { .. } => vec![0, 1],
            OracleInstance::Alg5 { .. } | OracleInstance::Alg6 { .. } => vec![0],
        }
    }

    /// Mixed-radix decode of `index`, first component most significant.
    pub fn tuple(&self, mut index: u64) -> Vec<u64> {
        let bits = self.bits();
        let mut out = vec![0; bits.len()];
        for (slot, b) in out.iter_mut().zip(&bits).rev() {
            *slot = index & ((1u64 << b) - 1);
            index >>= b;
        }
        out
    }

    /// The acceptance predicate on one guess tuple.
    pub fn accepts(&self, t: &[u64]) -> bool {
        match self {
            OracleInstance::Alg3 { len, kn, n, .. } => {
                let target = xor(kn, n);
                let id = be(*len, t[0]);
                let x = be(*len, t[1]);
                let pwb_in = xor(&be(*len, t[2]), &be(*len, t[3]));
                let a = h(*len, &[&id, &x]);
                let p1 = h(*len, &[&pwb_in]);
                let p2 = h(*len, &[&pwb_in]);
                xor(&xor(&a, &p1), &p2) == target
            }
            OracleInstance::Alg4 { len, r, b, .. } => {
                let pw = be(*len, t[0]);
                let id = be(*len, t[1]);
                let inner = h(*len, &[&xor(&pw, b)]);
                h(*len, &[&inner, &id]) == *r
            }
            OracleInstance::Alg5 { len, q, b, x, pw, .. } => {
                let id = be(*len, t[0]);
                let left = h(*len, &[&id, x]);
                let right = h(*len, &[&xor(pw, b)]);
                xor(&left, &right) == *q
            }
            OracleInstance::Alg6 { .. } => {
                let (q_hit, r_hit) = self.alg6_checks(t[0]).expect("alg6 instance");
                q_hit || r_hit
            }
        }
    }

    /// Algorithm 6's two comparisons for guess `id`.
    pub fn alg6_checks(&self, id: u64) -> Option<(bool, bool)> {
        let OracleInstance::Alg6 { len, q, r, key, x, .. } = self else {
            return None;
        };
        let pwb = xor(key, q);
        let id = be(*len, id);
        let q_star = xor(&h(*len, &[&id, x]), &pwb);
        let r_star = h(*len, &[&pwb, &id]);
        Some((q_star == *q, r_star == *r))
    }

    /// Enumerates the whole guess universe.
    pub fn enumerate(&self, cap_bits: u32) -> Result<AcceptingSet> {
        let total = self.total_bits();
        if total > cap_bits || total >= 64 {
            return Err(Error::BudgetExceeded {
                requested: 1u64.checked_shl(total).unwrap_or(u64::MAX),
                limit: 1u64 << cap_bits.min(63),
            });
        }
        let universe = 1u64 << total;
        let tuples = (0..universe)
            .into_par_iter()
            .filter_map(|i| {
                let t = self.tuple(i);
                self.accepts(&t).then_some(t)
            })
            .collect();
        Ok(AcceptingSet { universe, tuples })
    }
}

impl AcceptingSet {
    pub fn size(&self) -> u64 {
        self.tuples.len() as u64
    }

    /// Probability that one uniform guess accepts.
    pub fn rate(&self) -> f64 {
        self.size() as f64 / self.universe as f64
    }

    /// Splits the set against the planted secrets.
    pub fn summarize(&self, instance: &OracleInstance, truth: &[u64]) -> OracleSummary {
        let read = instance.read_components();
        let mut genuine = 0;
        let mut structural = 0;
        let mut collisions = 0;
        for t in &self.tuples {
            if t.as_slice() == truth {
                genuine += 1;
            } else if read.iter().all(|&i| t[i] == truth[i]) {
                structural += 1;
            } else {
                collisions += 1;
            }
        }
        OracleSummary {
            universe: self.universe,
            accepting: self.size(),
            genuine,
            structural,
            collisions,
        }
    }
}
