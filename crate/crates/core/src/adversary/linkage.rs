//! Identity recovery (Algorithm 1) and session linking (Algorithm 2).

use std::collections::{HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::world::{ChenWorld, ImprovedWorld, SecretBits};
use crate::adversary::{trial_rng, GameResult};
use crate::chen::ChenHes;
use crate::error::{Error, Result};
use crate::improved::ImprovedHes;
use crate::model::{Field, LoginMessage, Params, Scheme, ServerSecrets};
use crate::primitives::{HashMeter, Scope, Word};

/// The field an identity-recovery attack unmasks: `CID_i` in Chen traffic;
/// improved traffic has no `CID_i` on the wire, so `Kn` stands in.
fn identity_slot(m1: &LoginMessage) -> Result<Word> {
    m1.word(Field::Cid)
        .or_else(|_| m1.word(Field::Kn))
        .map_err(|_| Error::MalformedMessage("no identity-bearing field".into()))
}

/// `CID_i ⊕ h(κ‖T_1‖n_i)`.
pub fn alg1_privilege_insider(m1: &LoginMessage, kappa: Word, meter: &mut HashMeter) -> Result<Word> {
    let slot = identity_slot(m1)?;
    let t1 = m1.time(Field::T1)?.to_word(kappa.width())?;
    let n = m1.word(Field::N)?;
    Ok(slot ^ meter.scoped(Scope::Adversary, kappa.width()).h(&[kappa, t1, n]))
}

/// Set of pseudonyms `ID*` seen so far. Append-only.
#[derive(Debug, Clone, Default)]
pub struct PseudonymStore {
    entries: HashSet<Word>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sighting {
    Seen,
    Unseen,
}

impl PseudonymStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, pseudonym: &Word) -> bool {
        self.entries.contains(pseudonym)
    }
}

/// Computes `ID* = CID_i ⊕ h(y*‖T_1‖n_i)` and records it.
pub fn alg2_trace(
    store: &mut PseudonymStore,
    y_star: Word,
    m1: &LoginMessage,
    meter: &mut HashMeter,
) -> Result<(Word, Sighting)> {
    let pseudonym = alg1_privilege_insider(m1, y_star, meter)?;
    let sighting = if store.entries.insert(pseudonym) {
        Sighting::Unseen
    } else {
        Sighting::Seen
    };
    Ok((pseudonym, sighting))
}

/// Which `y*` the tracer commits to for a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YStar {
    /// The shared head-end key `κ`, available to any head end.
    Kappa,
    /// A uniformly random word, as Algorithm 2 literally prescribes.
    Random,
}

/// Algorithm 1 over `sessions` independent worlds. Session `i` attacks the
/// last login of a run of `i mod 3 + 1` rounds, so issue, subscription and
/// hand-off messages all appear.
pub fn alg1_campaign(scheme: Scheme, sessions: u64, params: Params, seed: u64) -> Result<GameResult> {
    let bits = SecretBits::full(params.width);
    (0..sessions)
        .into_par_iter()
        .map(|i| -> Result<GameResult> {
            let mut rng = trial_rng(seed, i);
            let rounds = (i % 3) as usize + 1;
            let mut meter = HashMeter::new();
            let (m1, kappa, id) = match scheme {
                Scheme::Chen => {
                    let mut w = ChenWorld::plant(&mut rng, params, bits)?;
                    w.run_rounds(&mut rng, rounds)?;
                    let m1 = w.logins().pop().expect("at least one round").0;
                    (m1, w.hes.secrets.hy, w.secrets.id)
                }
                Scheme::Improved => {
                    let mut w = ImprovedWorld::plant(&mut rng, params, bits)?;
                    w.run_rounds(&mut rng, rounds)?;
                    let m1 = w.logins().pop().expect("at least one round").0;
                    (m1, w.hes.secrets.hy, w.secrets.id)
                }
            };
            let recovered = alg1_privilege_insider(&m1, kappa, &mut meter)?;
            Ok(GameResult::new(1, u64::from(recovered == id), meter.count(Scope::Adversary)))
        })
        .try_reduce(|| GameResult::new(0, 0, 0), |a, b| Ok(a.merge(b)))
}

/// Outcome of an Algorithm 2 campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkageReport {
    pub scheme: Scheme,
    pub y_star: YStar,
    pub users: u64,
    pub sessions: u64,
    /// Sessions of a user who had logged in before.
    pub repeat_sessions: u64,
    /// Repeat sessions classified `seen` under that same user's pseudonym.
    pub linked: u64,
    /// Sessions classified `seen` under another user's pseudonym.
    pub false_links: u64,
    pub same_user_rate: f64,
    pub false_link_rate: f64,
    pub budget_used: u64,
}

impl LinkageReport {
    pub fn to_line(&self) -> String {
        format!(
            "alg2 scheme={} y*={} users={} sessions={} same_user_rate={:.6} ({}/{}) false_link_rate={:.6} ({}/{}) budget={}",
            self.scheme,
            match self.y_star {
                YStar::Kappa => "kappa",
                YStar::Random => "random",
            },
            self.users,
            self.sessions,
            self.same_user_rate,
            self.linked,
            self.repeat_sessions,
            self.false_link_rate,
            self.false_links,
            self.sessions,
            self.budget_used,
        )
    }
}

/// Each user's identity with the login messages it sent, in order.
pub type Population = Vec<(Word, Vec<LoginMessage>)>;

/// Login messages of `users` users at one head end, `per_user` rounds each.
/// Users are independent, so each runs against its own copy of the head end.
pub fn population_logins(
    scheme: Scheme,
    users: u64,
    per_user: usize,
    params: Params,
    seed: u64,
) -> Result<(ServerSecrets, Population)> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let secrets = ServerSecrets::random(&mut master, params.width);
    let bits = SecretBits::full(params.width);
    let per_user: Result<Vec<_>> = (0..users)
        .into_par_iter()
        .map(|u| {
            let mut rng = trial_rng(seed, u + 1);
            let (id, logins) = match scheme {
                Scheme::Chen => {
                    let mut w = ChenWorld::join(ChenHes::new(secrets, params), &mut rng, bits)?;
                    w.run_rounds(&mut rng, per_user)?;
                    (w.secrets.id, w.logins())
                }
                Scheme::Improved => {
                    let mut w = ImprovedWorld::join(ImprovedHes::new(secrets, params), &mut rng, bits)?;
                    w.run_rounds(&mut rng, per_user)?;
                    (w.secrets.id, w.logins())
                }
            };
            Ok((id, logins.into_iter().map(|(m, _)| m).collect()))
        })
        .collect();
    Ok((secrets, per_user?))
}

/// Algorithm 2 over `users × per_user` sessions, observed round-robin.
pub fn alg2_campaign(
    scheme: Scheme,
    users: u64,
    per_user: usize,
    y_star: YStar,
    params: Params,
    seed: u64,
) -> Result<LinkageReport> {
    let (secrets, population) = population_logins(scheme, users, per_user, params, seed)?;
    let y = match y_star {
        YStar::Kappa => secrets.hy,
        YStar::Random => Word::random(&mut trial_rng(seed, u64::MAX), params.width),
    };
    let mut store = PseudonymStore::new();
    let mut owner: HashMap<Word, usize> = HashMap::new();
    let mut meter = HashMeter::new();
    let (mut sessions, mut repeat, mut linked, mut false_links) = (0u64, 0u64, 0u64, 0u64);
    for round in 0..per_user {
        for (user, (_, logins)) in population.iter().enumerate() {
            let Some(m1) = logins.get(round) else { continue };
            let (pseudonym, sighting) = alg2_trace(&mut store, y, m1, &mut meter)?;
            sessions += 1;
            if round > 0 {
                repeat += 1;
            }
            match sighting {
                Sighting::Seen if owner.get(&pseudonym) == Some(&user) => linked += 1,
                Sighting::Seen => false_links += 1,
                Sighting::Unseen => {
                    owner.insert(pseudonym, user);
                }
            }
        }
    }
    let rate = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(LinkageReport {
        scheme,
        y_star,
        users,
        sessions,
        repeat_sessions: repeat,
        linked,
        false_links,
        same_user_rate: rate(linked, repeat),
        false_link_rate: rate(false_links, sessions),
        budget_used: meter.count(Scope::Adversary),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::Timestamp;

    #[test]
    fn alg1_recovers_chen_identity() {
        let mut rng = trial_rng(1, 0);
        let mut w = ChenWorld::plant(&mut rng, Params::default(), SecretBits::full(32)).unwrap();
        w.issue(&mut rng).unwrap();
        let m1 = w.logins()[0].0.clone();
        let mut meter = HashMeter::new();
        let id = alg1_privilege_insider(&m1, w.hes.secrets.hy, &mut meter).unwrap();
        assert_eq!(id, w.secrets.id);
        assert_eq!(meter.count(Scope::Adversary), 1);
    }

    #[test]
    fn alg1_fails_on_perturbed_nonce() {
        let mut rng = trial_rng(2, 0);
        let mut w = ChenWorld::plant(&mut rng, Params::default(), SecretBits::full(32)).unwrap();
        w.issue(&mut rng).unwrap();
        let mut m1 = w.logins()[0].0.clone();
        let n = m1.word(Field::N).unwrap();
        m1.set_word(Field::N, n ^ Word::from_u64(32, 1).unwrap()).unwrap();
        let id = alg1_privilege_insider(&m1, w.hes.secrets.hy, &mut HashMeter::new()).unwrap();
        assert_ne!(id, w.secrets.id);
    }

    #[test]
    fn alg1_rejects_messages_without_identity_slot() {
        let m = LoginMessage {
            scheme: Scheme::Chen,
            phase: crate::model::Phase::Issue,
            fields: vec![(Field::T1, crate::model::FieldValue::Time(Timestamp(0)))],
        };
        let err = alg1_privilege_insider(&m, Word::zero(32), &mut HashMeter::new()).unwrap_err();
        assert!(matches!(err, Error::MalformedMessage(_)));
    }

    #[test]
    fn small_campaigns() {
        let p = Params::default();
        let chen = alg1_campaign(Scheme::Chen, 60, p, 3).unwrap();
        assert_eq!((chen.trials, chen.successes), (60, 60));
        let imp = alg1_campaign(Scheme::Improved, 60, p, 3).unwrap();
        assert_eq!(imp.successes, 0);

        let r = alg2_campaign(Scheme::Chen, 20, 4, YStar::Kappa, p, 4).unwrap();
        assert_eq!(r.sessions, 80);
        assert_eq!((r.linked, r.repeat_sessions, r.false_links), (60, 60, 0));
        let r = alg2_campaign(Scheme::Chen, 20, 4, YStar::Random, p, 4).unwrap();
        assert_eq!(r.linked, 0);
        let r = alg2_campaign(Scheme::Improved, 20, 4, YStar::Kappa, p, 4).unwrap();
        assert_eq!(r.linked + r.false_links, 0);
    }

    #[test]
    fn distinct_users_are_unseen() {
        let (secrets, pop) = population_logins(Scheme::Chen, 2, 1, Params::default(), 5).unwrap();
        let mut store = PseudonymStore::new();
        let mut meter = HashMeter::new();
        for (_, logins) in &pop {
            let (_, s) = alg2_trace(&mut store, secrets.hy, &logins[0], &mut meter).unwrap();
            assert_eq!(s, Sighting::Unseen);
        }
        assert_eq!(store.len(), 2);
    }
}
