//! Guessing games against the improved scheme.
//!
//! Each game holds exactly what its adversary holds; `accepts` evaluates
//! one guess through the metered hash and attributes the calls to
//! [`Scope::Adversary`].

use rayon::prelude::*;

use crate::adversary::{trial_rng, GameResult};
use crate::error::{Error, Result};
use crate::model::{Field, LoginMessage, ServerRecord};
use crate::primitives::{HashMeter, Scope, Word};

/// Guesses per rayon work unit; each unit has its own RNG stream.
pub const CHUNK: u64 = 4096;

pub trait Game: Sync {
    /// Names of the guessed components, in guess order.
    const COMPONENTS: &'static [&'static str];
    /// Hash evaluations spent on every guess.
    const HASHES_PER_GUESS: u64;

    fn width(&self) -> usize;

    fn accepts(&self, guess: &[Word], meter: &mut HashMeter) -> bool;
}

/// Algorithm 3: eavesdropper holding `Kn` and `n_i` guesses `(ID, x, PW, b)`.
#[derive(Debug, Clone, Copy)]
pub struct Alg3 {
    pub kn: Word,
    pub n: Word,
}

impl Alg3 {
    pub fn from_login(m1: &LoginMessage) -> Result<Self> {
        Ok(Alg3 {
            kn: m1.word(Field::Kn)?,
            n: m1.word(Field::N)?,
        })
    }
}

impl Game for Alg3 {
    const COMPONENTS: &'static [&'static str] = &["ID", "x", "PW", "b"];
    const HASHES_PER_GUESS: u64 = 3;

    fn width(&self) -> usize {
        self.kn.width()
    }

    fn accepts(&self, guess: &[Word], meter: &mut HashMeter) -> bool {
        let [id, x, pw, b] = guess else {
            panic!("alg3 guesses have four components")
        };
        let mut s = meter.scoped(Scope::Adversary, self.width());
        // h(ID*‖x*) ⊕ h(PW*⊕b*) ⊕ h(PW*⊕b*), evaluated as printed
        let guess = s.h(&[*id, *x]) ^ s.h(&[*pw ^ *b]) ^ s.h(&[*pw ^ *b]);
        guess == self.kn ^ self.n
    }
}

/// Algorithm 4: card thief holding `R_i` and `b` guesses `(PW, ID)`.
#[derive(Debug, Clone, Copy)]
pub struct Alg4 {
    pub r: Word,
    pub b: Word,
}

impl Game for Alg4 {
    const COMPONENTS: &'static [&'static str] = &["PW", "ID"];
    const HASHES_PER_GUESS: u64 = 2;

    fn width(&self) -> usize {
        self.r.width()
    }

    fn accepts(&self, guess: &[Word], meter: &mut HashMeter) -> bool {
        let [pw, id] = guess else {
            panic!("alg4 guesses have two components")
        };
        let mut s = meter.scoped(Scope::Adversary, self.width());
        let inner = s.h(&[*pw ^ self.b]);
        s.h(&[inner, *id]) == self.r
    }
}

/// Algorithm 5: card thief who also holds the true `x` and `PW` guesses `ID`.
#[derive(Debug, Clone, Copy)]
pub struct Alg5 {
    pub q: Word,
    pub b: Word,
    pub x: Word,
    pub pw: Word,
}

impl Game for Alg5 {
    const COMPONENTS: &'static [&'static str] = &["ID"];
    const HASHES_PER_GUESS: u64 = 2;

    fn width(&self) -> usize {
        self.q.width()
    }

    fn accepts(&self, guess: &[Word], meter: &mut HashMeter) -> bool {
        let [id] = guess else {
            panic!("alg5 guesses have one component")
        };
        let mut s = meter.scoped(Scope::Adversary, self.width());
        let q = s.h(&[*id, self.x]) ^ s.h(&[self.pw ^ self.b]);
        q == self.q
    }
}

/// Algorithm 6: malicious head end holding its record, `x` and a live `m_1`.
#[derive(Debug, Clone, Copy)]
pub struct Alg6 {
    pub q: Word,
    pub r: Word,
    pub pwb: Word,
    pub x: Word,
}

impl Alg6 {
    /// Lines 2-4: `Kn ⊕ n_i` locates the record; `PWB = (Q⊕PWB) ⊕ Q`.
    pub fn setup(m1: &LoginMessage, db: &[ServerRecord], x: Word) -> Result<Self> {
        let key = m1.word(Field::Kn)? ^ m1.word(Field::N)?;
        let rec = db
            .iter()
            .find_map(|r| match r {
                ServerRecord::Improved(rec) if rec.lookup_key == key => Some(*rec),
                _ => None,
            })
            .ok_or(Error::UnknownUser)?;
        Ok(Alg6 {
            q: rec.q,
            r: rec.r,
            pwb: rec.lookup_key ^ rec.q,
            x,
        })
    }

    /// Both Guess-step comparisons, `(Q* == Q, R* == R)`.
    pub fn checks(&self, id: Word, meter: &mut HashMeter) -> (bool, bool) {
        let mut s = meter.scoped(Scope::Adversary, self.q.width());
        let q = s.h(&[id, self.x]) ^ self.pwb;
        let r = s.h(&[self.pwb, id]);
        (q == self.q, r == self.r)
    }
}

impl Game for Alg6 {
    const COMPONENTS: &'static [&'static str] = &["ID"];
    const HASHES_PER_GUESS: u64 = 2;

    fn width(&self) -> usize {
        self.q.width()
    }

    fn accepts(&self, guess: &[Word], meter: &mut HashMeter) -> bool {
        let [id] = guess else {
            panic!("alg6 guesses have one component")
        };
        let (q, r) = self.checks(*id, meter);
        q || r
    }
}

/// Plays `guesses` uniform guesses, component `i` drawn below `2^bits[i]`.
pub fn campaign<G: Game>(
    game: &G,
    bits: &[u32],
    guesses: u64,
    max_guesses: u64,
    seed: u64,
) -> Result<GameResult> {
    if guesses > max_guesses {
        return Err(Error::BudgetExceeded {
            requested: guesses,
            limit: max_guesses,
        });
    }
    if bits.len() != G::COMPONENTS.len() {
        return Err(Error::Parse(format!(
            "expected {} widths, got {}",
            G::COMPONENTS.len(),
            bits.len()
        )));
    }
    let width = game.width();
    let chunks = guesses.div_ceil(CHUNK);
    let result = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = trial_rng(seed, chunk);
            let mut meter = HashMeter::new();
            let count = CHUNK.min(guesses - chunk * CHUNK);
            let mut guess = vec![Word::zero(width); bits.len()];
            let mut hits = 0;
            for _ in 0..count {
                for (slot, b) in guess.iter_mut().zip(bits) {
                    *slot = Word::random_bits(&mut rng, width, *b);
                }
                hits += u64::from(game.accepts(&guess, &mut meter));
            }
            GameResult::new(count, hits, meter.count(Scope::Adversary))
        })
        .reduce(|| GameResult::new(0, 0, 0), GameResult::merge);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::world::{ImprovedWorld, SecretBits};
    use crate::model::Params;

    fn planted(seed: u64, bits: SecretBits) -> (ImprovedWorld, LoginMessage) {
        let mut rng = trial_rng(seed, 0);
        let mut w = ImprovedWorld::plant(&mut rng, Params::default(), bits).unwrap();
        w.issue(&mut rng).unwrap();
        let m1 = w.logins()[0].0.clone();
        (w, m1)
    }

    fn truth_accepts<G: Game>(game: &G, truth: &[Word]) -> bool {
        game.accepts(truth, &mut HashMeter::new())
    }

    #[test]
    fn planted_truth_wins_every_game() {
        let (w, m1) = planted(1, SecretBits::full(32));
        let s = w.secrets;
        let x = w.hes.secrets.x;
        assert!(truth_accepts(&Alg3::from_login(&m1).unwrap(), &[s.id, x, s.pw, s.b]));
        let card = w.user.card;
        assert!(truth_accepts(&Alg4 { r: card.r, b: card.b }, &[s.pw, s.id]));
        let alg5 = Alg5 {
            q: card.q,
            b: card.b,
            x,
            pw: s.pw,
        };
        assert!(truth_accepts(&alg5, &[s.id]));
        let db: Vec<_> = w.hes.records().map(|r| ServerRecord::Improved(*r)).collect();
        let alg6 = Alg6::setup(&m1, &db, x).unwrap();
        assert_eq!(alg6.pwb, w.lookup_key() ^ card.q);
        assert_eq!(alg6.checks(s.id, &mut HashMeter::new()), (true, true));
    }

    #[test]
    fn wrong_guesses_lose_at_full_width() {
        let (w, m1) = planted(2, SecretBits::full(32));
        let s = w.secrets;
        let g = Alg3::from_login(&m1).unwrap();
        assert!(!truth_accepts(&g, &[s.id.flip_bit(0), w.hes.secrets.x, s.pw, s.b]));
        let card = w.user.card;
        assert!(!truth_accepts(&Alg4 { r: card.r, b: card.b }, &[s.pw, s.id.flip_bit(3)]));
    }

    #[test]
    fn alg3_ignores_password_components() {
        let (w, m1) = planted(3, SecretBits::full(32));
        let g = Alg3::from_login(&m1).unwrap();
        let s = w.secrets;
        let any = Word::from_u64(32, 12345).unwrap();
        assert!(truth_accepts(&g, &[s.id, w.hes.secrets.x, any, any]));
    }

    #[test]
    fn budget_is_guesses_times_cost() {
        let (w, m1) = planted(4, SecretBits::full(32));
        let g = Alg3::from_login(&m1).unwrap();
        let r = campaign(&g, &[256; 4], 10_000, 1 << 20, 9).unwrap();
        assert_eq!(r.trials, 10_000);
        assert_eq!(r.budget_used, 10_000 * Alg3::HASHES_PER_GUESS);
        assert_eq!(r.successes, 0);
        let card = w.user.card;
        let r = campaign(&Alg4 { r: card.r, b: card.b }, &[256; 2], 5000, 1 << 20, 9).unwrap();
        assert_eq!(r.budget_used, 5000 * Alg4::HASHES_PER_GUESS);
    }

    #[test]
    fn budget_cap_is_enforced() {
        let (_, m1) = planted(5, SecretBits::full(32));
        let g = Alg3::from_login(&m1).unwrap();
        let err = campaign(&g, &[8; 4], 101, 100, 0).unwrap_err();
        assert_eq!(
            err,
            Error::BudgetExceeded {
                requested: 101,
                limit: 100
            }
        );
    }

    #[test]
    fn campaign_is_deterministic() {
        let bits = SecretBits {
            id: 4,
            x: 4,
            pw: 4,
            b: 4,
        };
        let (_, m1) = planted(6, bits);
        let g = Alg3::from_login(&m1).unwrap();
        let a = campaign(&g, &[4; 4], 20_000, 1 << 20, 5).unwrap();
        let b = campaign(&g, &[4; 4], 20_000, 1 << 20, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.successes > 0);
    }
}
