//! Planted instances for Algorithms 3-6, paired with their oracle twins.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::games::{campaign, Alg3, Alg4, Alg5, Alg6, Game};
use crate::adversary::oracle::OracleInstance;
use crate::adversary::world::{ImprovedWorld, SecretBits};
use crate::adversary::{binomial_interval, trial_rng, GameKind, GameReport, GameResult};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::model::{Params, Scheme, ServerRecord};
use crate::primitives::{HashMeter, Word};

/// Confidence level of every acceptance interval.
pub const CI_LEVEL: f64 = 0.99;

#[derive(Debug, Clone, Copy)]
pub enum AnyGame {
    Alg3(Alg3),
    Alg4(Alg4),
    Alg5(Alg5),
    Alg6(Alg6),
}

impl AnyGame {
    pub fn accepts(&self, guess: &[Word], meter: &mut HashMeter) -> bool {
        match self {
            AnyGame::Alg3(g) => g.accepts(guess, meter),
            AnyGame::Alg4(g) => g.accepts(guess, meter),
            AnyGame::Alg5(g) => g.accepts(guess, meter),
            AnyGame::Alg6(g) => g.accepts(guess, meter),
        }
    }

    pub fn hashes_per_guess(&self) -> u64 {
        match self {
            AnyGame::Alg3(_) => Alg3::HASHES_PER_GUESS,
            AnyGame::Alg4(_) => Alg4::HASHES_PER_GUESS,
            AnyGame::Alg5(_) => Alg5::HASHES_PER_GUESS,
            AnyGame::Alg6(_) => Alg6::HASHES_PER_GUESS,
        }
    }

    fn campaign(&self, bits: &[u32], guesses: u64, max: u64, seed: u64) -> Result<GameResult> {
        match self {
            AnyGame::Alg3(g) => campaign(g, bits, guesses, max, seed),
            AnyGame::Alg4(g) => campaign(g, bits, guesses, max, seed),
            AnyGame::Alg5(g) => campaign(g, bits, guesses, max, seed),
            AnyGame::Alg6(g) => campaign(g, bits, guesses, max, seed),
        }
    }
}

/// A game against a freshly planted honest instance, plus the harness-only
/// truth and an oracle view built from the same public bytes.
#[derive(Debug, Clone)]
pub struct Planted {
    pub kind: GameKind,
    pub game: AnyGame,
    pub oracle: OracleInstance,
    /// Planted secrets in guess order.
    pub truth: Vec<Word>,
    pub bits: Vec<u32>,
}

impl Planted {
    pub fn truth_u64(&self) -> Option<Vec<u64>> {
        self.truth.iter().map(Word::to_u64).collect()
    }
}

/// Guess-component bit-lengths of `kind` under `widths`.
pub fn component_bits(kind: GameKind, widths: &crate::config::ToyWidths) -> Result<Vec<u32>> {
    Ok(match kind {
        GameKind::Alg3 => widths.alg3.to_vec(),
        GameKind::Alg4 => widths.alg4.to_vec(),
        GameKind::Alg5 => vec![widths.alg5],
        GameKind::Alg6 => vec![widths.alg6],
        GameKind::Alg1 | GameKind::Alg2 => {
            return Err(Error::Parse(format!("{kind} is not a guessing game")))
        }
    })
}

/// Plants one improved-scheme user whose guessed secrets are drawn from
/// `bits` and runs one honest issue phase to produce the observed `m_1`.
pub fn plant(kind: GameKind, params: Params, bits: &[u32], seed: u64) -> Result<Planted> {
    let full = (params.width * 8) as u32;
    let mut sb = SecretBits::full(params.width);
    match (kind, bits) {
        (GameKind::Alg3, [id, x, pw, b]) => {
            sb = SecretBits {
                id: *id,
                x: *x,
                pw: *pw,
                b: *b,
            }
        }
        (GameKind::Alg4, [pw, id]) => {
            sb.pw = *pw;
            sb.id = *id;
        }
        (GameKind::Alg5 | GameKind::Alg6, [id]) => sb.id = *id,
        _ => return Err(Error::Parse(format!("wrong widths {bits:?} for {kind}"))),
    }
    if bits.iter().any(|&b| b == 0 || b > full) {
        return Err(Error::Parse(format!("widths {bits:?} exceed {full}-bit words")));
    }
    let mut rng = trial_rng(seed, 0);
    let mut w = ImprovedWorld::plant(&mut rng, params, sb)?;
    w.issue(&mut rng)?;
    let m1 = w.logins()[0].0.clone();
    let (s, x, card, len) = (w.secrets, w.hes.secrets.x, w.user.card, params.width);
    let raw = |w: Word| w.as_bytes().to_vec();
    let (game, oracle, truth) = match kind {
        GameKind::Alg3 => {
            let g = Alg3::from_login(&m1)?;
            let o = OracleInstance::Alg3 {
                len,
                kn: raw(g.kn),
                n: raw(g.n),
                bits: [bits[0], bits[1], bits[2], bits[3]],
            };
            (AnyGame::Alg3(g), o, vec![s.id, x, s.pw, s.b])
        }
        GameKind::Alg4 => {
            let g = Alg4 { r: card.r, b: card.b };
            let o = OracleInstance::Alg4 {
                len,
                r: raw(card.r),
                b: raw(card.b),
                bits: [bits[0], bits[1]],
            };
            (AnyGame::Alg4(g), o, vec![s.pw, s.id])
        }
        GameKind::Alg5 => {
            let g = Alg5 {
                q: card.q,
                b: card.b,
                x,
                pw: s.pw,
            };
            let o = OracleInstance::Alg5 {
                len,
                q: raw(card.q),
                b: raw(card.b),
                x: raw(x),
                pw: raw(s.pw),
                id_bits: bits[0],
            };
            (AnyGame::Alg5(g), o, vec![s.id])
        }
        GameKind::Alg6 => {
            let db: Vec<ServerRecord> = w.hes.records().map(|r| ServerRecord::Improved(*r)).collect();
            let g = Alg6::setup(&m1, &db, x)?;
            let rec = w.hes.records().next().expect("planted user");
            let o = OracleInstance::Alg6 {
                len,
                q: raw(rec.q),
                r: raw(rec.r),
                key: raw(rec.lookup_key),
                x: raw(x),
                id_bits: bits[0],
            };
            (AnyGame::Alg6(g), o, vec![s.id])
        }
        GameKind::Alg1 | GameKind::Alg2 => unreachable!("rejected above"),
    };
    Ok(Planted {
        kind,
        game,
        oracle,
        truth,
        bits: bits.to_vec(),
    })
}

/// Monte-Carlo campaign at toy widths, judged against the exact binomial
/// interval around the oracle's acceptance rate.
pub fn toy_campaign(kind: GameKind, word_bytes: usize, cfg: &Config, seed: u64) -> Result<GameReport> {
    let bits = component_bits(kind, &cfg.toy_widths)?;
    let planted = plant(kind, cfg.params_at(word_bytes), &bits, seed)?;
    let set = planted.oracle.enumerate(cfg.oracle_cap_bits)?;
    let truth = planted.truth_u64().expect("toy secrets fit in 64 bits");
    let summary = set.summarize(&planted.oracle, &truth);
    let result = planted
        .game
        .campaign(&bits, cfg.toy_guesses, cfg.max_guesses, seed ^ 0x5eed)?;
    let interval = binomial_interval(result.trials, set.rate(), CI_LEVEL);
    Ok(GameReport {
        game: kind,
        scheme: Scheme::Improved,
        word_bytes,
        widths: bits,
        seed,
        result,
        hashes_per_guess: planted.game.hashes_per_guess(),
        oracle: Some(summary),
        interval: Some(interval),
        expectation: format!(
            "successes in 99% binomial CI of p={}/{}",
            set.size(),
            set.universe
        ),
        met: interval.contains(result.successes)
            && result.budget_used == result.trials * planted.game.hashes_per_guess(),
    })
}

/// Full-width campaign; any success would mean a broken harness.
pub fn production_campaign(kind: GameKind, cfg: &Config, seed: u64) -> Result<GameReport> {
    let params = cfg.params();
    let full = (params.width * 8) as u32;
    let arity = component_bits(kind, &cfg.toy_widths)?.len();
    let bits = vec![full; arity];
    let planted = plant(kind, params, &bits, seed)?;
    let result = planted
        .game
        .campaign(&bits, cfg.production_guesses, cfg.max_guesses, seed ^ 0x5eed)?;
    Ok(GameReport {
        game: kind,
        scheme: Scheme::Improved,
        word_bytes: params.width,
        widths: Vec::new(),
        seed,
        result,
        hashes_per_guess: planted.game.hashes_per_guess(),
        oracle: None,
        interval: None,
        expectation: "0 successes".into(),
        met: result.successes == 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifferentialReport {
    pub game: GameKind,
    pub word_bytes: usize,
    pub instances: u64,
    pub agreements: u64,
    /// Instances whose drawn guess was accepted (by both sides).
    pub accepted: u64,
    /// Whether game and oracle agree on the entire universe of instance 0.
    pub exhaustive_agreement: bool,
}

impl DifferentialReport {
    pub fn passed(&self) -> bool {
        self.agreements == self.instances && self.exhaustive_agreement
    }

    pub fn to_line(&self) -> String {
        format!(
            "differential {} L={} agree={}/{} accepted={} exhaustive={}",
            self.game, self.word_bytes, self.agreements, self.instances, self.accepted, self.exhaustive_agreement
        )
    }
}

fn words_of(planted: &Planted, t: &[u64], width: usize) -> Vec<Word> {
    let _ = planted;
    t.iter()
        .map(|v| Word::from_u64(width, *v).expect("toy value fits"))
        .collect()
}

/// Game and oracle on `instances` random instances, one guess each: the
/// planted truth for odd instances, a uniform tuple for even ones.
pub fn differential(kind: GameKind, word_bytes: usize, cfg: &Config, instances: u64, seed: u64) -> Result<DifferentialReport> {
    let bits = component_bits(kind, &cfg.toy_widths)?;
    let params = cfg.params_at(word_bytes);
    let outcomes: Result<Vec<(bool, bool)>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let planted = plant(kind, params, &bits, seed.wrapping_add(i))?;
            let tuple = if i % 2 == 1 {
                planted.truth_u64().expect("toy secrets fit in 64 bits")
            } else {
                let mut rng = trial_rng(seed, i);
                let idx = rand::Rng::gen_range(&mut rng, 0..1u64 << bits.iter().sum::<u32>());
                planted.oracle.tuple(idx)
            };
            let game = planted.game.accepts(&words_of(&planted, &tuple, word_bytes), &mut HashMeter::new());
            let oracle = planted.oracle.accepts(&tuple);
            Ok((game == oracle, game))
        })
        .collect();
    let outcomes = outcomes?;
    let planted = plant(kind, params, &bits, seed)?;
    let set = planted.oracle.enumerate(cfg.oracle_cap_bits)?;
    let game_set: Vec<Vec<u64>> = (0..set.universe)
        .into_par_iter()
        .filter_map(|i| {
            let t = planted.oracle.tuple(i);
            planted
                .game
                .accepts(&words_of(&planted, &t, word_bytes), &mut HashMeter::new())
                .then_some(t)
        })
        .collect();
    Ok(DifferentialReport {
        game: kind,
        word_bytes,
        instances,
        agreements: outcomes.iter().filter(|(agree, _)| *agree).count() as u64,
        accepted: outcomes.iter().filter(|(_, acc)| *acc).count() as u64,
        exhaustive_agreement: game_set == set.tuples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Config {
        Config {
            toy_guesses: 1 << 14,
            production_guesses: 20_000,
            ..Config::default()
        }
    }

    #[test]
    fn toy_campaigns_land_in_their_intervals() {
        let cfg = small();
        for kind in [GameKind::Alg3, GameKind::Alg4, GameKind::Alg5, GameKind::Alg6] {
            let r = toy_campaign(kind, 32, &cfg, 11).unwrap();
            assert!(r.met, "{}", r.to_line());
            let o = r.oracle.unwrap();
            assert_eq!(o.genuine, 1);
            assert_eq!(o.collisions, 0);
        }
    }

    #[test]
    fn alg3_accepting_set_spans_password_space() {
        let r = toy_campaign(GameKind::Alg3, 32, &small(), 12).unwrap();
        let o = r.oracle.unwrap();
        // every (PW*, b*) completes the true (ID, x)
        assert_eq!(o.accepting, 256);
        assert_eq!(o.structural, 255);
    }

    #[test]
    fn production_campaigns_never_win() {
        let cfg = small();
        for kind in [GameKind::Alg3, GameKind::Alg4, GameKind::Alg5, GameKind::Alg6] {
            let r = production_campaign(kind, &cfg, 13).unwrap();
            assert!(r.met, "{}", r.to_line());
            assert_eq!(r.result.budget_used, r.result.trials * r.hashes_per_guess);
        }
    }

    #[test]
    fn differential_agreement() {
        let cfg = small();
        for kind in [GameKind::Alg3, GameKind::Alg4, GameKind::Alg5, GameKind::Alg6] {
            for width in [32, 2] {
                let d = differential(kind, width, &cfg, 40, 14).unwrap();
                assert!(d.passed(), "{}", d.to_line());
                assert!(d.accepted >= 20);
            }
        }
    }

    #[test]
    fn guessing_games_only() {
        assert!(plant(GameKind::Alg1, Params::default(), &[8], 0).is_err());
        assert!(plant(GameKind::Alg5, Params::default(), &[8, 8], 0).is_err());
    }
}
