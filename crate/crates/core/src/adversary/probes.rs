//! Mechanical checks over transcripts, and attacks the six games do not
//! cover. Probe results are reported next to the games; they never feed the
//! security-matrix verdicts.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::linkage::population_logins;
use crate::adversary::world::{ChenWorld, ImprovedWorld, SecretBits};
use crate::adversary::trial_rng;
use crate::error::Result;
use crate::improved;
use crate::model::{Field, LoginMessage, Params, Phase, ResponseMessage, Scheme, Transcript, WireMessage};
use crate::primitives::{digest, concat, HashMeter, Timestamp, Word};

/// A field, or the XOR of two fields, of one message that equals `ID_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IdHit {
    pub phase: Phase,
    pub first: Field,
    pub second: Option<Field>,
}

/// Every single field and every pairwise XOR of fields, per message.
pub fn id_absence_scan(transcript: &Transcript, id: Word) -> Vec<IdHit> {
    let mut hits = Vec::new();
    for e in transcript.entries() {
        let words = e.message.words();
        for (i, (f1, w1)) in words.iter().enumerate() {
            if *w1 == id {
                hits.push(IdHit {
                    phase: e.phase,
                    first: *f1,
                    second: None,
                });
            }
            for (f2, w2) in &words[i + 1..] {
                if *w1 ^ *w2 == id {
                    hits.push(IdHit {
                        phase: e.phase,
                        first: *f1,
                        second: Some(*f2),
                    });
                }
            }
        }
    }
    hits
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdAbsenceReport {
    pub scheme: Scheme,
    pub worlds: u64,
    pub messages: u64,
    /// Hits in the first run.
    pub hits: Vec<IdHit>,
    /// Hits that recur at the same (phase, fields) under a different seed.
    pub structural: Vec<IdHit>,
}

impl IdAbsenceReport {
    pub fn passed(&self) -> bool {
        self.structural.is_empty()
    }
}

fn scan_worlds(scheme: Scheme, worlds: u64, params: Params, seed: u64) -> Result<(u64, BTreeSet<IdHit>, Vec<IdHit>)> {
    let bits = SecretBits::full(params.width);
    let per_world: Result<Vec<(u64, Vec<IdHit>)>> = (0..worlds)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let (t, id) = match scheme {
                Scheme::Chen => {
                    let mut w = ChenWorld::plant(&mut rng, params, bits)?;
                    w.run_rounds(&mut rng, 4)?;
                    (w.chan.transcript().clone(), w.secrets.id)
                }
                Scheme::Improved => {
                    let mut w = ImprovedWorld::plant(&mut rng, params, bits)?;
                    w.run_rounds(&mut rng, 4)?;
                    (w.chan.transcript().clone(), w.secrets.id)
                }
            };
            Ok((t.len() as u64, id_absence_scan(&t, id)))
        })
        .collect();
    let per_world = per_world?;
    let messages = per_world.iter().map(|(n, _)| n).sum();
    let hits: Vec<IdHit> = per_world.into_iter().flat_map(|(_, h)| h).collect();
    Ok((messages, hits.iter().copied().collect(), hits))
}

/// Scans `worlds` honest histories (issue, subscription, two hand-offs) for
/// the identity. Any hit is re-checked under another seed; only hits that
/// recur are treated as structural.
pub fn id_absence_check(scheme: Scheme, worlds: u64, params: Params, seed: u64) -> Result<IdAbsenceReport> {
    let (messages, kinds, hits) = scan_worlds(scheme, worlds, params, seed)?;
    let structural = if hits.is_empty() {
        Vec::new()
    } else {
        let (_, again, _) = scan_worlds(scheme, worlds, params, seed.wrapping_add(0x9e37_79b9))?;
        kinds.intersection(&again).copied().collect()
    };
    Ok(IdAbsenceReport {
        scheme,
        worlds,
        messages,
        hits,
        structural,
    })
}

/// A login-field combination that stays fixed across one user's sessions and
/// differs between users, i.e. a long-lived pseudonym.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticCombo {
    pub fields: Vec<Field>,
}

impl StaticCombo {
    pub fn name(&self) -> String {
        self.fields
            .iter()
            .map(|f| f.as_str())
            .collect::<Vec<_>>()
            .join("^")
    }
}

fn combos(m: &LoginMessage) -> BTreeMap<Vec<Field>, Word> {
    let words = WireMessage::Login(m.clone()).words();
    let mut out = BTreeMap::new();
    for (i, (f1, w1)) in words.iter().enumerate() {
        out.insert(vec![*f1], *w1);
        for (f2, w2) in &words[i + 1..] {
            out.insert(vec![*f1, *f2], *w1 ^ *w2);
        }
    }
    out
}

/// Every single field or field pair of the login messages that acts as a
/// per-user constant across `per_user` sessions of `users` users.
pub fn static_pseudonym_scan(
    scheme: Scheme,
    users: u64,
    per_user: usize,
    params: Params,
    seed: u64,
) -> Result<Vec<StaticCombo>> {
    let (_, population) = population_logins(scheme, users, per_user, params, seed)?;
    let mut candidates: Option<BTreeSet<Vec<Field>>> = None;
    let mut per_user_value: Vec<BTreeMap<Vec<Field>, Word>> = Vec::new();
    for (_, logins) in &population {
        let maps: Vec<_> = logins.iter().map(combos).collect();
        let mut constant = BTreeMap::new();
        if let Some(first) = maps.first() {
            for (k, v) in first {
                if maps.iter().all(|m| m.get(k) == Some(v)) {
                    constant.insert(k.clone(), *v);
                }
            }
        }
        let keys: BTreeSet<_> = constant.keys().cloned().collect();
        candidates = Some(match candidates {
            None => keys,
            Some(c) => c.intersection(&keys).cloned().collect(),
        });
        per_user_value.push(constant);
    }
    let mut out = Vec::new();
    for combo in candidates.unwrap_or_default() {
        let distinct: HashSet<Word> = per_user_value.iter().map(|m| m[&combo]).collect();
        if distinct.len() == per_user_value.len() {
            out.push(StaticCombo { fields: combo });
        }
    }
    Ok(out)
}

/// Outcome of a beyond-the-games attack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub name: String,
    pub scheme: Scheme,
    pub attack_succeeded: bool,
    pub detail: String,
}

impl ProbeOutcome {
    pub fn to_line(&self) -> String {
        format!(
            "probe {} scheme={} attack={} {}",
            self.name,
            self.scheme,
            if self.attack_succeeded { "succeeded" } else { "failed" },
            self.detail
        )
    }
}

/// Card contents `(R, Q, b)` plus one eavesdropped `m_1` give
/// `PWB = Kn ⊕ n ⊕ Q`, which is all a fresh issue login needs.
pub fn stolen_card_eavesdrop_probe(params: Params, seed: u64) -> Result<ProbeOutcome> {
    let mut rng = trial_rng(seed, 0);
    let mut w = ImprovedWorld::plant(&mut rng, params, SecretBits::full(params.width))?;
    w.issue(&mut rng)?;
    let observed = w.logins()[0].0.clone();
    let card = w.user.card;
    let pwb = observed.word(Field::Kn)? ^ observed.word(Field::N)? ^ card.q;

    let mut meter = HashMeter::new();
    let now = w.chan.now();
    let (sess, m1) = improved::forged_issue_login(pwb, card.q, card.r, &params, now, &mut rng, &mut meter)?;
    let outcome = improved::respond(&mut w.hes, &m1, now, &mut rng, &mut meter)
        .and_then(|(m2, server)| improved::finalize(&sess, &m2, now, &mut meter).map(|user| user == server));
    let succeeded = matches!(outcome, Ok(true));
    Ok(ProbeOutcome {
        name: "stolen_card_plus_eavesdrop".into(),
        scheme: Scheme::Improved,
        attack_succeeded: succeeded,
        detail: format!(
            "recovered_pwb_correct={} login_outcome={:?}",
            pwb == w.lookup_key() ^ card.q,
            outcome.map(|_| "token agreed")
        ),
    })
}

/// A stolen record `(Q, R, Q⊕PWB)` yields `PWB`, enough to impersonate the
/// user to the head end and the head end to the user.
pub fn stolen_db_probe(params: Params, seed: u64) -> Result<ProbeOutcome> {
    let width = params.width;
    let mut rng = trial_rng(seed, 0);
    let mut w = ImprovedWorld::plant(&mut rng, params, SecretBits::full(width))?;
    let rec = *w.hes.records().next().expect("one user registered");
    let pwb = rec.lookup_key ^ rec.q;

    // as the user
    let mut meter = HashMeter::new();
    let now = w.chan.now();
    let (sess, m1) = improved::forged_issue_login(pwb, rec.q, rec.r, &params, now, &mut rng, &mut meter)?;
    let as_user = improved::respond(&mut w.hes, &m1, now, &mut rng, &mut meter)
        .and_then(|(m2, server)| improved::finalize(&sess, &m2, now, &mut meter).map(|u| u == server));

    // as the head end, answering the real user without x or y
    let (honest, m1) = improved::issue_login(&w.user.card, w.user.id, w.user.pw, &params, now, &mut rng, &mut meter)?;
    let kn = m1.word(Field::Kn)?;
    let n = m1.word(Field::N)?;
    let t1 = m1.time(Field::T1)?.to_word(width)?;
    let t2 = Timestamp(now.0 + 1);
    let t2w = t2.to_word(width)?;
    let cid = kn ^ digest(width, &concat(&[kn, t1, n]));
    let planted = Word::random(&mut rng, width);
    let forged = ResponseMessage {
        scheme: Scheme::Improved,
        phase: Phase::Issue,
        d: digest(width, &concat(&[rec.r ^ kn, cid, t2w, n])),
        e_or_f: planted ^ digest(width, &concat(&[rec.q, t2w, pwb])),
        t2,
    };
    let as_server = improved::finalize(&honest, &forged, t2, &mut meter).map(|t| t.value == planted);

    Ok(ProbeOutcome {
        name: "stolen_verifier_table".into(),
        scheme: Scheme::Improved,
        attack_succeeded: matches!(as_user, Ok(true)) && matches!(as_server, Ok(true)),
        detail: format!("user_impersonation={as_user:?} server_impersonation={as_server:?}"),
    })
}

/// Chen contrast for [`stolen_card_eavesdrop_probe`]: the card and an
/// eavesdropped login give `ID` (through the published `κ`) but not `P`.
pub fn chen_stolen_card_probe(params: Params, seed: u64, attempts: u64) -> Result<ProbeOutcome> {
    let width = params.width;
    let mut rng = trial_rng(seed, 0);
    let mut w = ChenWorld::plant(&mut rng, params, SecretBits::full(width))?;
    w.issue(&mut rng)?;
    let observed = w.logins()[0].0.clone();
    let card = w.user.card;
    let mut meter = HashMeter::new();
    let id = crate::adversary::alg1_privilege_insider(&observed, w.user.hy, &mut meter)?;
    let mut accepted = 0;
    for _ in 0..attempts {
        let pwb = Word::random(&mut rng, width);
        let now = w.chan.now();
        let (_, m1) = crate::chen::forged_issue_login(id, pwb, card.q ^ pwb, w.user.hy, card.r, &params, now, &mut rng, &mut meter)?;
        if crate::chen::respond(&mut w.hes, &m1, now, &mut rng, &mut meter).is_ok() {
            accepted += 1;
        }
    }
    Ok(ProbeOutcome {
        name: "stolen_card_plus_eavesdrop".into(),
        scheme: Scheme::Chen,
        attack_succeeded: accepted > 0,
        detail: format!("id_recovered={} forged_logins_accepted={accepted}/{attempts}", id == w.secrets.id),
    })
}
