//! Honest instances that games are played against.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::chen::{self, ChenHes, ChenUser};
use crate::error::{Error, Result};
use crate::improved::{self, ImprovedHes, ImprovedUser};
use crate::model::{
    Channel, LoginMessage, Params, Phase, ResponseMessage, Scheme, ServerSecrets, Token,
    TokenChain, TranscriptEntry, UserSecrets, WireMessage,
};
use crate::primitives::{HashMeter, Timestamp, Word};

/// Bit-lengths the planted secrets are drawn from. Values are stored
/// big-endian in full L-byte words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecretBits {
    pub id: u32,
    pub x: u32,
    pub pw: u32,
    pub b: u32,
}

impl SecretBits {
    pub fn full(width: usize) -> Self {
        let bits = (width * 8) as u32;
        SecretBits {
            id: bits,
            x: bits,
            pw: bits,
            b: bits,
        }
    }

    pub fn check(&self, width: usize) -> Result<()> {
        let max = (width * 8) as u32;
        for bits in [self.id, self.x, self.pw, self.b] {
            if bits == 0 || bits > max {
                return Err(Error::Parse(format!(
                    "secret bit-length {bits} outside 1..={max}"
                )));
            }
        }
        Ok(())
    }

    fn user<R: RngCore + ?Sized>(&self, rng: &mut R, width: usize) -> UserSecrets {
        UserSecrets {
            id: Word::random_bits(rng, width, self.id),
            pw: Word::random_bits(rng, width, self.pw),
            b: Word::random_bits(rng, width, self.b),
        }
    }

    fn server<R: RngCore + ?Sized>(&self, rng: &mut R, width: usize) -> ServerSecrets {
        let x = Word::random_bits(rng, width, self.x);
        let y = Word::random(rng, width);
        ServerSecrets::new(x, y)
    }
}

/// Either head end, for harnesses that drive both schemes.
#[derive(Debug, Clone)]
pub enum AnyHes {
    Chen(ChenHes),
    Improved(ImprovedHes),
}

impl AnyHes {
    pub fn scheme(&self) -> Scheme {
        match self {
            AnyHes::Chen(_) => Scheme::Chen,
            AnyHes::Improved(_) => Scheme::Improved,
        }
    }

    pub fn params(&self) -> Params {
        match self {
            AnyHes::Chen(h) => h.params,
            AnyHes::Improved(h) => h.params,
        }
    }

    pub fn respond<R: RngCore + ?Sized>(
        &mut self,
        m: &LoginMessage,
        now: Timestamp,
        rng: &mut R,
        meter: &mut HashMeter,
    ) -> Result<(ResponseMessage, Token)> {
        match self {
            AnyHes::Chen(h) => chen::respond(h, m, now, rng, meter),
            AnyHes::Improved(h) => improved::respond(h, m, now, rng, meter),
        }
    }

    /// Snapshot of every stored record, for before/after comparisons.
    pub fn snapshot(&self) -> Vec<String> {
        match self {
            AnyHes::Chen(h) => h.records().map(|r| format!("{r:?}")).collect(),
            AnyHes::Improved(h) => h.records().map(|r| format!("{r:?}")).collect(),
        }
    }
}

/// All login messages of a transcript with their send ticks.
pub fn logins(entries: &[TranscriptEntry]) -> Vec<(LoginMessage, Timestamp)> {
    entries
        .iter()
        .filter_map(|e| match &e.message {
            WireMessage::Login(m) => Some((m.clone(), e.tick)),
            WireMessage::Response(_) => None,
        })
        .collect()
}

/// One Chen head end with one registered user.
#[derive(Debug, Clone)]
pub struct ChenWorld {
    pub hes: ChenHes,
    pub secrets: UserSecrets,
    pub user: ChenUser,
    pub chan: Channel,
    pub meter: HashMeter,
}

impl ChenWorld {
    pub fn plant<R: RngCore + ?Sized>(rng: &mut R, params: Params, bits: SecretBits) -> Result<Self> {
        params.validate()?;
        bits.check(params.width)?;
        let hes = ChenHes::new(bits.server(rng, params.width), params);
        Self::join(hes, rng, bits)
    }

    /// Registers a fresh user at an existing head end.
    pub fn join<R: RngCore + ?Sized>(mut hes: ChenHes, rng: &mut R, bits: SecretBits) -> Result<Self> {
        let mut meter = HashMeter::new();
        let secrets = bits.user(rng, hes.params.width);
        let (card, _) = chen::register(&secrets, &mut hes, &mut meter)?;
        let user = ChenUser {
            card,
            id: secrets.id,
            pw: secrets.pw,
            hy: hes.kappa(),
        };
        Ok(ChenWorld {
            hes,
            secrets,
            user,
            chan: Channel::new(),
            meter,
        })
    }

    pub fn issue<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<chen::Outcome> {
        chen::run_issue(&self.user, &mut self.hes, &mut self.chan, rng, &mut self.meter)
    }

    /// Runs `phases` rounds in [`round_phase`] order; returns the last outcome.
    pub fn run_rounds<R: RngCore + ?Sized>(&mut self, rng: &mut R, phases: usize) -> Result<chen::Outcome> {
        let chain = self.hes.params.token_chain;
        let mut out = self.issue(rng)?;
        for round in 1..phases {
            out = if round_phase(round, chain) == Phase::Subscription {
                chen::run_subscription(
                    &self.user,
                    &out.user_token,
                    &mut self.hes,
                    &mut self.chan,
                    rng,
                    &mut self.meter,
                )?
            } else {
                let mut sess = out.session.clone();
                let token = sess
                    .chained_token(chain)
                    .ok_or_else(|| Error::MalformedMessage("no chained token".into()))?;
                chen::run_handoff(&mut sess, &token, &mut self.hes, &mut self.chan, rng, &mut self.meter)?
            };
        }
        Ok(out)
    }

    pub fn logins(&self) -> Vec<(LoginMessage, Timestamp)> {
        logins(self.chan.transcript().entries())
    }
}

/// One improved-scheme head end with one registered user.
#[derive(Debug, Clone)]
pub struct ImprovedWorld {
    pub hes: ImprovedHes,
    pub secrets: UserSecrets,
    pub user: ImprovedUser,
    pub chan: Channel,
    pub meter: HashMeter,
}

impl ImprovedWorld {
    pub fn plant<R: RngCore + ?Sized>(rng: &mut R, params: Params, bits: SecretBits) -> Result<Self> {
        params.validate()?;
        bits.check(params.width)?;
        let hes = ImprovedHes::new(bits.server(rng, params.width), params);
        Self::join(hes, rng, bits)
    }

    pub fn join<R: RngCore + ?Sized>(mut hes: ImprovedHes, rng: &mut R, bits: SecretBits) -> Result<Self> {
        let mut meter = HashMeter::new();
        let secrets = bits.user(rng, hes.params.width);
        let (card, _) = improved::register(&secrets, &mut hes, &mut meter)?;
        let user = ImprovedUser {
            card,
            id: secrets.id,
            pw: secrets.pw,
        };
        Ok(ImprovedWorld {
            hes,
            secrets,
            user,
            chan: Channel::new(),
            meter,
        })
    }

    pub fn issue<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<improved::Outcome> {
        improved::run_issue(&self.user, &mut self.hes, &mut self.chan, rng, &mut self.meter)
    }

    pub fn run_rounds<R: RngCore + ?Sized>(&mut self, rng: &mut R, phases: usize) -> Result<improved::Outcome> {
        let chain = self.hes.params.token_chain;
        let mut out = self.issue(rng)?;
        for round in 1..phases {
            out = if round_phase(round, chain) == Phase::Subscription {
                improved::run_subscription(
                    &self.user,
                    &out.user_token,
                    &mut self.hes,
                    &mut self.chan,
                    rng,
                    &mut self.meter,
                )?
            } else {
                let token = out
                    .session
                    .chained_token(chain)
                    .ok_or_else(|| Error::MalformedMessage("no chained token".into()))?;
                improved::run_handoff(&out.session, &token, &mut self.hes, &mut self.chan, rng, &mut self.meter)?
            };
        }
        Ok(out)
    }

    pub fn logins(&self) -> Vec<(LoginMessage, Timestamp)> {
        logins(self.chan.transcript().entries())
    }

    /// `Q_i ⊕ PWB_i` of the planted user.
    pub fn lookup_key(&self) -> Word {
        let pwb = crate::primitives::digest(self.hes.params.width, (self.secrets.pw ^ self.secrets.b).as_bytes());
        self.user.card.q ^ pwb
    }
}

/// Phase of round `round`: issue, subscription, then hand-offs. A Θ-chained
/// deployment skips subscription, which would consume Θ.
pub fn round_phase(round: usize, chain: TokenChain) -> Phase {
    match (round, chain) {
        (0, _) => Phase::Issue,
        (1, TokenChain::Gamma) => Phase::Subscription,
        _ => Phase::Handoff,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::trial_rng;

    #[test]
    fn toy_secrets_stay_in_range() {
        let mut rng = trial_rng(1, 0);
        let bits = SecretBits {
            id: 4,
            x: 5,
            pw: 6,
            b: 7,
        };
        let w = ImprovedWorld::plant(&mut rng, Params::default(), bits).unwrap();
        assert!(w.secrets.id.to_u64().unwrap() < 16);
        assert!(w.hes.secrets.x.to_u64().unwrap() < 32);
        assert!(w.secrets.pw.to_u64().unwrap() < 64);
        assert!(w.secrets.b.to_u64().unwrap() < 128);
        assert!(w.hes.record(&w.lookup_key()).is_some());
    }

    #[test]
    fn bits_wider_than_word_are_rejected() {
        let mut rng = trial_rng(1, 0);
        let bits = SecretBits::full(4);
        assert!(ChenWorld::plant(&mut rng, Params::with_width(2), bits).is_err());
    }

    #[test]
    fn rounds_cover_all_phases_in_both_chains() {
        for chain in [TokenChain::Gamma, TokenChain::Theta] {
            let params = Params {
                token_chain: chain,
                ..Params::default()
            };
            let mut rng = trial_rng(2, 0);
            let mut c = ChenWorld::plant(&mut rng, params, SecretBits::full(32)).unwrap();
            let out = c.run_rounds(&mut rng, 4).unwrap();
            assert_eq!(out.user_token, out.server_token);
            let phases: Vec<_> = c.logins().iter().map(|(m, _)| m.phase).collect();
            assert_eq!(phases, (0..4).map(|r| round_phase(r, chain)).collect::<Vec<_>>());

            let mut i = ImprovedWorld::plant(&mut rng, params, SecretBits::full(32)).unwrap();
            let out = i.run_rounds(&mut rng, 4).unwrap();
            assert_eq!(out.user_token, out.server_token);
            assert_eq!(i.logins().len(), 4);
        }
    }
}
