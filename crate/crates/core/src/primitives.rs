//! Fixed-width words, the instrumented one-way hash, value encoding and the
//! logical clock.
//!
//! Every digest, identity, nonce and token in both schemes is a [`Word`] of
//! the same width `L`, so `⊕` is always defined. `‖` is fixed-width framing:
//! `concat([a, b])` is simply `a.bytes ++ b.bytes`.
//!
//! `h(.)` is SHA-256 truncated to `L` bytes. Production profile uses the full
//! 32 bytes; toy profiles go down to 2 bytes so brute-force oracles finish.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::BitXor;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::error::{Error, Result};
use crate::model::{Phase, Role, Scheme};

/// Largest supported word width in bytes (the SHA-256 output size).
pub const MAX_WIDTH: usize = 32;
/// Smallest supported word width in bytes (toy profile).
pub const MIN_WIDTH: usize = 2;
/// Production word width.
pub const DEFAULT_WIDTH: usize = 32;

/// Fixed-width byte string. Bytes past `len` are always zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    len: u8,
    bytes: [u8; MAX_WIDTH],
}

/// Output of `h(.)`. Digests live in the same domain as every other value.
pub type Digest = Word;

pub fn check_width(width: usize) -> Result<()> {
    if (MIN_WIDTH..=MAX_WIDTH).contains(&width) {
        Ok(())
    } else {
        Err(Error::InvalidWidth(width))
    }
}

impl Word {
    pub fn zero(width: usize) -> Self {
        assert!(
            (1..=MAX_WIDTH).contains(&width),
            "word width {width} out of range"
        );
        Word {
            len: width as u8,
            bytes: [0; MAX_WIDTH],
        }
    }

    /// Left-zero-pads `data` to `width` bytes.
    pub fn from_bytes(width: usize, data: &[u8]) -> Result<Self> {
        if data.len() > width {
            return Err(Error::Overflow {
                needed: data.len(),
                width,
            });
        }
        let mut w = Word::zero(width);
        w.bytes[width - data.len()..width].copy_from_slice(data);
        Ok(w)
    }

    /// Big-endian encoding of `value`, left-padded.
    pub fn from_u64(width: usize, value: u64) -> Result<Self> {
        let be = value.to_be_bytes();
        let skip = be.iter().take_while(|b| **b == 0).count();
        Word::from_bytes(width, &be[skip..])
    }

    /// Inverse of [`Word::from_u64`]; `None` if the value needs more than 64 bits.
    pub fn to_u64(&self) -> Option<u64> {
        let b = self.as_bytes();
        let cut = b.len().saturating_sub(8);
        if b[..cut].iter().any(|x| *x != 0) {
            return None;
        }
        Some(b[cut..].iter().fold(0u64, |acc, x| (acc << 8) | u64::from(*x)))
    }

    pub fn random<R: RngCore + ?Sized>(rng: &mut R, width: usize) -> Self {
        let mut w = Word::zero(width);
        rng.fill_bytes(&mut w.bytes[..width]);
        w
    }

    /// Uniform value in `[0, 2^bits)`, i.e. a random word with everything
    /// above the low `bits` bits cleared.
    pub fn random_bits<R: RngCore + ?Sized>(rng: &mut R, width: usize, bits: u32) -> Self {
        let mut w = Word::random(rng, width);
        w.mask_low_bits(bits);
        w
    }

    fn mask_low_bits(&mut self, bits: u32) {
        let width = self.width();
        let bits = bits as usize;
        if bits >= width * 8 {
            return;
        }
        let full = bits / 8;
        let rem = bits % 8;
        for (i, byte) in self.bytes[..width].iter_mut().rev().enumerate() {
            if i < full {
                continue;
            } else if i == full && rem > 0 {
                *byte &= (1u8 << rem) - 1;
            } else {
                *byte = 0;
            }
        }
    }

    pub fn width(&self) -> usize {
        self.len as usize
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes[..self.width()]
    }

    pub fn is_zero(&self) -> bool {
        self.as_bytes().iter().all(|b| *b == 0)
    }

    pub fn xor(&self, other: &Word) -> Word {
        assert_eq!(self.len, other.len, "xor of words with different widths");
        let mut out = *self;
        for (a, b) in out.bytes.iter_mut().zip(other.bytes.iter()) {
            *a ^= *b;
        }
        out
    }

    /// Flips bit `bit` counted from the least significant end.
    pub fn flip_bit(&self, bit: usize) -> Word {
        let width = self.width();
        let mut out = *self;
        let idx = width - 1 - (bit / 8) % width;
        out.bytes[idx] ^= 1 << (bit % 8);
        out
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.as_bytes())
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let raw = hex::decode(s).map_err(|e| Error::Parse(format!("bad hex {s:?}: {e}")))?;
        check_width(raw.len())?;
        Word::from_bytes(raw.len(), &raw)
    }
}

impl BitXor for Word {
    type Output = Word;

    fn bitxor(self, rhs: Word) -> Word {
        self.xor(&rhs)
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({})", self.to_hex())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Word::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Fixed-width framing of `‖`: each part contributes exactly its `L` bytes.
pub fn concat(parts: &[Word]) -> Vec<u8> {
    let mut out = Vec::with_capacity(parts.iter().map(Word::width).sum());
    for p in parts {
        out.extend_from_slice(p.as_bytes());
    }
    out
}

/// Unmetered `h(.)`: SHA-256 truncated to `width` bytes.
pub fn digest(width: usize, data: &[u8]) -> Digest {
    let full = Sha256::digest(data);
    Word::from_bytes(width, &full[..width]).expect("width checked by caller")
}

fn digest_words(width: usize, parts: &[Word]) -> Digest {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p.as_bytes());
    }
    let full = hasher.finalize();
    Word::from_bytes(width, &full[..width]).expect("width checked by caller")
}

/// Something that can be turned into a [`Word`] of a given width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Value<'a> {
    Identity(&'a str),
    Password(&'a str),
    Nonce(u64),
    Timestamp(Timestamp),
    Counter(u64),
}

/// Canonical word form of `value`.
///
/// Strings are length-prefixed before padding so that e.g. `"a"` and `"\0a"`
/// stay distinct; integers are plain big-endian.
pub fn encode(value: Value<'_>, width: usize) -> Result<Word> {
    match value {
        Value::Identity(s) | Value::Password(s) => {
            let raw = s.as_bytes();
            if raw.len() > u8::MAX as usize || raw.len() + 1 > width {
                return Err(Error::Overflow {
                    needed: raw.len() + 1,
                    width,
                });
            }
            let mut canon = Vec::with_capacity(raw.len() + 1);
            canon.push(raw.len() as u8);
            canon.extend_from_slice(raw);
            Word::from_bytes(width, &canon)
        }
        Value::Nonce(v) | Value::Counter(v) => Word::from_u64(width, v),
        Value::Timestamp(t) => Word::from_u64(width, t.0),
    }
}

/// Recovers an integer (nonce, counter or timestamp tick) from its word form.
pub fn decode_u64(word: &Word) -> Result<u64> {
    word.to_u64()
        .ok_or_else(|| Error::Parse(format!("word {word} does not hold a 64-bit value")))
}

/// Logical time in ticks.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn to_word(self, width: usize) -> Result<Word> {
        encode(Value::Timestamp(self), width)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Monotone logical clock.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Clock {
    now: u64,
}

impl Clock {
    pub fn starting_at(tick: u64) -> Self {
        Clock { now: tick }
    }

    pub fn now(&self) -> Timestamp {
        Timestamp(self.now)
    }

    pub fn advance(&mut self, ticks: u64) {
        self.now += ticks;
    }
}

/// Attribution label for a hash invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scope {
    Protocol {
        scheme: Scheme,
        phase: Phase,
        role: Role,
    },
    Adversary,
    Unattributed,
}

impl Scope {
    pub fn protocol(scheme: Scheme, phase: Phase, role: Role) -> Self {
        Scope::Protocol {
            scheme,
            phase,
            role,
        }
    }
}

/// Per-scope hash invocation counter.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HashMeter {
    counts: BTreeMap<Scope, u64>,
}

impl HashMeter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Metered `h(data)`.
    pub fn hash(&mut self, scope: Scope, width: usize, data: &[u8]) -> Digest {
        *self.counts.entry(scope).or_insert(0) += 1;
        digest(width, data)
    }

    /// Borrows the meter for a run of hashes under one scope.
    pub fn scoped(&mut self, scope: Scope, width: usize) -> ScopedHasher<'_> {
        ScopedHasher {
            meter: self,
            scope,
            width,
        }
    }

    pub fn count(&self, scope: Scope) -> u64 {
        self.counts.get(&scope).copied().unwrap_or(0)
    }

    /// Sum over roles for one (scheme, phase).
    pub fn phase_total(&self, scheme: Scheme, phase: Phase) -> u64 {
        self.counts
            .iter()
            .filter(|(s, _)| {
                matches!(s, Scope::Protocol { scheme: sc, phase: ph, .. } if *sc == scheme && *ph == phase)
            })
            .map(|(_, c)| *c)
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn merge(&mut self, other: &HashMeter) {
        for (scope, c) in &other.counts {
            *self.counts.entry(*scope).or_insert(0) += c;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Scope, &u64)> {
        self.counts.iter()
    }
}

/// A [`HashMeter`] bound to one scope and one output width.
pub struct ScopedHasher<'m> {
    meter: &'m mut HashMeter,
    scope: Scope,
    width: usize,
}

impl ScopedHasher<'_> {
    /// `h(p_0 ‖ p_1 ‖ ...)`.
    pub fn h(&mut self, parts: &[Word]) -> Digest {
        *self.meter.counts.entry(self.scope).or_insert(0) += 1;
        digest_words(self.width, parts)
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SHA256_OF_32_ZERO_BYTES: &str =
        "66687aadf862bd776c8fc18b8e9f8e20089714856ee233b3902a591d0d5f2925";

    #[test]
    fn known_answer_on_zero_word() {
        let z = Word::zero(32);
        assert_eq!(digest(32, z.as_bytes()).to_hex(), SHA256_OF_32_ZERO_BYTES);
        // toy widths keep the leading bytes
        assert_eq!(digest(4, z.as_bytes()).to_hex(), &SHA256_OF_32_ZERO_BYTES[..8]);
    }

    #[test]
    fn known_answer_abc() {
        let mut m = HashMeter::new();
        let d = m.hash(Scope::Unattributed, 32, b"abc");
        assert_eq!(
            d.to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn meter_counts_one_per_call() {
        let mut m = HashMeter::new();
        let scope = Scope::protocol(Scheme::Improved, Phase::Issue, Role::User);
        let before = m.count(scope);
        m.hash(scope, 32, b"x");
        assert_eq!(m.count(scope), before + 1);
        let a = Word::zero(32);
        m.scoped(scope, 32).h(&[a, a]);
        assert_eq!(m.count(scope), before + 2);
        assert_eq!(m.count(Scope::Unattributed), 0);
    }

    #[test]
    fn scoped_hash_equals_hash_of_concat() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let parts: Vec<Word> = (0..3).map(|_| Word::random(&mut rng, 32)).collect();
        let mut m = HashMeter::new();
        let via_concat = m.hash(Scope::Unattributed, 32, &concat(&parts));
        let direct = m.scoped(Scope::Unattributed, 32).h(&parts);
        assert_eq!(via_concat, direct);
    }

    #[test]
    fn concat_framing() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Word::random(&mut rng, 32);
        let b = Word::random(&mut rng, 32);
        let c = Word::random(&mut rng, 32);
        assert_eq!(concat(&[a]), a.as_bytes());
        assert_ne!(concat(&[a, b]), concat(&[b, a]));
        assert_eq!(concat(&[a, b, c]).len(), 96);
    }

    #[test]
    fn xor_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Word::random(&mut rng, 32);
        let b = Word::random(&mut rng, 32);
        let zero = Word::zero(32);
        assert_eq!(a ^ a, zero);
        assert_eq!(a ^ zero, a);
        assert_eq!((a ^ b) ^ b, a);
    }

    #[test]
    fn xor_laws_exhaustive_at_one_byte() {
        // every (a, b, c) over a 1-byte domain
        let w = |v: u8| Word::from_bytes(1, &[v]).unwrap();
        for a in 0..=255u8 {
            for b in 0..=255u8 {
                assert_eq!(w(a) ^ w(b), w(b) ^ w(a));
                assert_eq!(w(a) ^ w(b), w(a ^ b));
            }
        }
        for a in (0..=255u8).step_by(7) {
            for b in (0..=255u8).step_by(5) {
                for c in 0..=255u8 {
                    assert_eq!((w(a) ^ w(b)) ^ w(c), w(a) ^ (w(b) ^ w(c)));
                }
            }
        }
    }

    #[test]
    fn construction_pads_left_and_rejects_long_input() {
        let w = Word::from_bytes(4, &[0xab]).unwrap();
        assert_eq!(w.as_bytes(), &[0, 0, 0, 0xab]);
        assert!(matches!(
            Word::from_bytes(2, &[1, 2, 3]),
            Err(Error::Overflow { .. })
        ));
    }

    #[test]
    fn encode_examples() {
        assert!(encode(Value::Timestamp(Timestamp(0)), 32).unwrap().is_zero());
        let a = encode(Value::Identity("alice"), 32).unwrap();
        assert_eq!(a, encode(Value::Identity("alice"), 32).unwrap());
        let n = encode(Value::Nonce(0xdead_beef), 32).unwrap();
        assert_eq!(decode_u64(&n).unwrap(), 0xdead_beef);
        assert!(matches!(
            encode(Value::Identity("way too long"), 4),
            Err(Error::Overflow { .. })
        ));
        assert!(matches!(
            encode(Value::Counter(1 << 20), 2),
            Err(Error::Overflow { .. })
        ));
        // length prefix keeps leading-NUL identities apart
        assert_ne!(
            encode(Value::Identity("a"), 8).unwrap(),
            encode(Value::Identity("\0a"), 8).unwrap()
        );
    }

    #[test]
    fn random_bits_stays_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for bits in [0u32, 1, 5, 8, 12, 17, 64] {
            for _ in 0..50 {
                let w = Word::random_bits(&mut rng, 32, bits);
                let v = w.to_u64().unwrap();
                if bits < 64 {
                    assert!(v < (1u64 << bits), "bits={bits} v={v}");
                }
            }
        }
    }

    #[test]
    fn clock_is_monotone() {
        let mut c = Clock::starting_at(5);
        let t0 = c.now();
        c.advance(0);
        c.advance(3);
        assert!(c.now() >= t0);
        assert_eq!(c.now(), Timestamp(8));
    }

    proptest! {
        #[test]
        fn xor_group_laws(a in any::<[u8; 32]>(), b in any::<[u8; 32]>(), c in any::<[u8; 32]>()) {
            let (a, b, c) = (
                Word::from_bytes(32, &a).unwrap(),
                Word::from_bytes(32, &b).unwrap(),
                Word::from_bytes(32, &c).unwrap(),
            );
            prop_assert_eq!((a ^ b) ^ c, a ^ (b ^ c));
            prop_assert_eq!(a ^ b, b ^ a);
            prop_assert!((a ^ a).is_zero());
        }

        #[test]
        fn encode_is_injective_on_distinct_strings(a in "[a-z0-9]{1,20}", b in "[a-z0-9]{1,20}") {
            let ea = encode(Value::Identity(&a), 32).unwrap();
            let eb = encode(Value::Identity(&b), 32).unwrap();
            prop_assert_eq!(a == b, ea == eb);
        }

        #[test]
        fn integer_round_trip(v in any::<u64>(), width in 8usize..=32) {
            let w = encode(Value::Counter(v), width).unwrap();
            prop_assert_eq!(decode_u64(&w).unwrap(), v);
        }

        #[test]
        fn hex_round_trip(bytes in proptest::collection::vec(any::<u8>(), 2..=32)) {
            let w = Word::from_bytes(bytes.len(), &bytes).unwrap();
            prop_assert_eq!(Word::from_hex(&w.to_hex()).unwrap(), w);
        }
    }
}
