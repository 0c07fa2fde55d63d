//! The improved scheme. The server never sees `ID_i` after registration; it
//! indexes users by `Q_i ⊕ PWB_i`, which every login reveals as `Kn ⊕ n_i`.
//!
//! Subscription and hand-off logins carry a fifth field `V = token ⊕ Kn`
//! so the server can check token possession.

use std::collections::BTreeMap;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::model::{
    check_window, Channel, Field, FieldValue, ImprovedRecord, LoginMessage, Params, Phase,
    ResponseMessage, Role, Scheme, ServerRecord, ServerSecrets, SmartCard, Token, TokenChain,
    UserSecrets,
};
use crate::primitives::{HashMeter, Scope, Timestamp, Word};

fn scope(phase: Phase, role: Role) -> Scope {
    Scope::protocol(Scheme::Improved, phase, role)
}

/// A head-end system running the improved scheme.
#[derive(Debug, Clone)]
pub struct ImprovedHes {
    pub secrets: ServerSecrets,
    pub params: Params,
    db: BTreeMap<Word, ImprovedRecord>,
}

impl ImprovedHes {
    pub fn new(secrets: ServerSecrets, params: Params) -> Self {
        ImprovedHes {
            secrets,
            params,
            db: BTreeMap::new(),
        }
    }

    /// Looks a record up by `Q_i ⊕ PWB_i`.
    pub fn record(&self, lookup_key: &Word) -> Option<&ImprovedRecord> {
        self.db.get(lookup_key)
    }

    pub fn records(&self) -> impl Iterator<Item = &ImprovedRecord> {
        self.db.values()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ImprovedUser {
    pub card: SmartCard,
    pub id: Word,
    pub pw: Word,
}

/// User-side state for one round plus what hand-off needs later.
#[derive(Debug, Clone)]
pub struct ImprovedUserSession {
    pub pwb: Word,
    pub q: Word,
    pub r: Word,
    /// `n_i` (or `n_i^new`).
    pub n: Word,
    /// `Kn = Q_i ⊕ PWB_i ⊕ n_i`.
    pub kn: Word,
    pub cid: Word,
    /// `R_t = R_i ⊕ Kn`, issue phase only.
    pub rt: Option<Word>,
    pub phase: Phase,
    pub theta: Option<Token>,
    pub gamma: Option<Token>,
    delta_t: u64,
}

impl ImprovedUserSession {
    pub fn chained_token(&self, chain: TokenChain) -> Option<Token> {
        match chain {
            TokenChain::Theta => self.theta,
            TokenChain::Gamma => self.gamma,
        }
    }

    fn store(&mut self, token: Token, chain: TokenChain) {
        match (self.phase, chain) {
            (Phase::Issue, _) | (Phase::Handoff, TokenChain::Theta) => self.theta = Some(token),
            _ => self.gamma = Some(token),
        }
        if self.phase == Phase::Subscription {
            self.theta = None;
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub user_token: Token,
    pub server_token: Token,
    pub session: ImprovedUserSession,
}

/// Initialization: `Q_i = h(ID_i‖x) ⊕ PWB_i`, `R_i = h(PWB_i‖ID_i)`.
pub fn register(
    user: &UserSecrets,
    hes: &mut ImprovedHes,
    meter: &mut HashMeter,
) -> Result<(SmartCard, ServerRecord)> {
    let width = hes.params.width;
    let pwb = meter
        .scoped(scope(Phase::Registration, Role::User), width)
        .h(&[user.pw ^ user.b]);
    let mut s = meter.scoped(scope(Phase::Registration, Role::Server), width);
    let q = s.h(&[user.id, hes.secrets.x]) ^ pwb;
    let r = s.h(&[pwb, user.id]);
    let lookup_key = q ^ pwb;
    if hes.db.contains_key(&lookup_key) {
        return Err(Error::DuplicateId);
    }
    let record = ImprovedRecord {
        q,
        r,
        lookup_key,
        issued_theta: None,
        issued_gamma: None,
        handoff_tag: None,
    };
    hes.db.insert(lookup_key, record);
    let card = SmartCard {
        scheme: Scheme::Improved,
        k: None,
        r,
        q,
        b: user.b,
    };
    Ok((card, ServerRecord::Improved(record)))
}

/// `PWB_i` and the local check `R_i == h(PWB_i‖ID_i)`.
fn unlock(
    card: &SmartCard,
    id: Word,
    pw: Word,
    phase: Phase,
    width: usize,
    meter: &mut HashMeter,
) -> Result<Word> {
    if card.scheme != Scheme::Improved {
        return Err(Error::WrongScheme);
    }
    let mut s = meter.scoped(scope(phase, Role::User), width);
    let pwb = s.h(&[pw ^ card.b]);
    if s.h(&[pwb, id]) != card.r {
        return Err(Error::AuthLocal);
    }
    Ok(pwb)
}

/// Fresh `n`, `Kn`, `CID_i`, `C_i` and the login message. `token` adds `V`.
#[allow(clippy::too_many_arguments)]
fn build_login<R: RngCore + ?Sized>(
    phase: Phase,
    pwb: Word,
    q: Word,
    r: Word,
    token: Option<&Token>,
    t1: Timestamp,
    delta_t: u64,
    rng: &mut R,
    meter: &mut HashMeter,
) -> Result<(ImprovedUserSession, LoginMessage)> {
    let width = q.width();
    let n = Word::random(rng, width);
    let kn = q ^ pwb ^ n;
    let t1w = t1.to_word(width)?;
    let mut s = meter.scoped(scope(phase, Role::User), width);
    let cid = kn ^ s.h(&[kn, t1w, n]);
    let c = s.h(&[q, cid, t1w, n]);

    let mut fields = vec![(Field::Kn, FieldValue::Word(kn))];
    if let Some(tok) = token {
        fields.push((Field::V, FieldValue::Word(tok.value ^ kn)));
    }
    fields.extend([
        (Field::C, FieldValue::Word(c)),
        (Field::T1, FieldValue::Time(t1)),
        (Field::N, FieldValue::Word(n)),
    ]);
    let m = LoginMessage {
        scheme: Scheme::Improved,
        phase,
        fields,
    };
    let sess = ImprovedUserSession {
        pwb,
        q,
        r,
        n,
        kn,
        cid,
        rt: (phase == Phase::Issue).then_some(r ^ kn),
        phase,
        theta: None,
        gamma: None,
        delta_t,
    };
    Ok((sess, m))
}

/// Issue phase, user side: `m_1 = [Kn, C_i, T_1, n_i]`.
pub fn issue_login<R: RngCore + ?Sized>(
    card: &SmartCard,
    id: Word,
    pw: Word,
    params: &Params,
    now: Timestamp,
    rng: &mut R,
    meter: &mut HashMeter,
) -> Result<(ImprovedUserSession, LoginMessage)> {
    let pwb = unlock(card, id, pw, Phase::Issue, params.width, meter)?;
    build_login(
        Phase::Issue,
        pwb,
        card.q,
        card.r,
        None,
        now,
        params.delta_t,
        rng,
        meter,
    )
}

/// Issue-phase login from raw `PWB`, `Q`, `R`, skipping the local check.
pub fn forged_issue_login<R: RngCore + ?Sized>(
    pwb: Word,
    q: Word,
    r: Word,
    params: &Params,
    now: Timestamp,
    rng: &mut R,
    meter: &mut HashMeter,
) -> Result<(ImprovedUserSession, LoginMessage)> {
    build_login(Phase::Issue, pwb, q, r, None, now, params.delta_t, rng, meter)
}

/// Subscription phase, user side: `m_1 = [Kn, V, C_i, T_1, n_i]` with `V = Θ ⊕ Kn`.
#[allow(clippy::too_many_arguments)]
pub fn subscription_login<R: RngCore + ?Sized>(
    card: &SmartCard,
    id: Word,
    pw: Word,
    theta: &Token,
    params: &Params,
    now: Timestamp,
    rng: &mut R,
    meter: &mut HashMeter,
) -> Result<(ImprovedUserSession, LoginMessage)> {
    let pwb = unlock(card, id, pw, Phase::Subscription, params.width, meter)?;
    let (mut sess, m) = build_login(
        Phase::Subscription,
        pwb,
        card.q,
        card.r,
        Some(theta),
        now,
        params.delta_t,
        rng,
        meter,
    )?;
    sess.theta = Some(*theta);
    Ok((sess, m))
}

/// Hand-off, user side, from stored session state. No `ID`/`PW` input.
pub fn handoff_login<R: RngCore + ?Sized>(
    prev: &ImprovedUserSession,
    token: &Token,
    now: Timestamp,
    rng: &mut R,
    meter: &mut HashMeter,
) -> Result<(ImprovedUserSession, LoginMessage)> {
    let (mut sess, m) = build_login(
        Phase::Handoff,
        prev.pwb,
        prev.q,
        prev.r,
        Some(token),
        now,
        prev.delta_t,
        rng,
        meter,
    )?;
    sess.theta = prev.theta;
    sess.gamma = prev.gamma;
    Ok((sess, m))
}

/// HES side of any phase.
pub fn respond<R: RngCore + ?Sized>(
    hes: &mut ImprovedHes,
    m: &LoginMessage,
    now: Timestamp,
    rng: &mut R,
    meter: &mut HashMeter,
) -> Result<(ResponseMessage, Token)> {
    if m.scheme != Scheme::Improved {
        return Err(Error::WrongScheme);
    }
    m.validate()?;
    let phase = m.phase;
    let width = hes.params.width;
    let chain = hes.params.token_chain;
    let t1 = m.time(Field::T1)?;
    check_window(t1, now, hes.params.delta_t)?;

    let kn = m.word(Field::Kn)?;
    let c = m.word(Field::C)?;
    let n = m.word(Field::N)?;
    let t1w = t1.to_word(width)?;
    let y = hes.secrets.y;

    let key = kn ^ n;
    let record = *hes.db.get(&key).ok_or(Error::UnknownUser)?;
    let mut s = meter.scoped(scope(phase, Role::Server), width);

    // Q_i ⊕ PWB_i ⊕ h(y‖R_i): compared with the last hand-off tag when one
    // exists; before any hand-off the lookup itself is the check.
    let new_tag = match phase {
        Phase::Subscription | Phase::Handoff => {
            let tag = key ^ s.h(&[y, record.r]);
            if record.handoff_tag.is_some_and(|t| t != tag) {
                return Err(Error::UnknownUser);
            }
            Some(tag)
        }
        _ => None,
    };

    let cid = kn ^ s.h(&[kn, t1w, n]);
    if s.h(&[record.q, cid, t1w, n]) != c {
        return Err(Error::MacMismatch);
    }

    match phase {
        Phase::Issue => {}
        Phase::Subscription => {
            let presented = m.word(Field::V)? ^ kn;
            if record.issued_theta != Some(presented) {
                return Err(Error::TokenMismatch);
            }
        }
        Phase::Handoff => {
            let presented = m.word(Field::V)? ^ kn;
            let expected = match chain {
                TokenChain::Theta => record.issued_theta,
                TokenChain::Gamma => record.issued_gamma,
            };
            if expected != Some(presented) {
                return Err(Error::TokenMismatch);
            }
        }
        Phase::Registration => return Err(Error::UnsupportedPhase(phase)),
    }

    let token = Word::random(rng, width);
    let t2 = now;
    let t2w = t2.to_word(width)?;
    // n ⊕ Q ⊕ Kn == PWB, so the user can strip this mask with its own PWB.
    let mask_seed = n ^ record.q ^ kn;
    let (d, e) = if phase == Phase::Issue {
        (
            s.h(&[record.r ^ kn, cid, t2w, n]),
            token ^ s.h(&[record.q, t2w, mask_seed]),
        )
    } else {
        (
            s.h(&[record.r, cid, t2w, n]),
            token ^ s.h(&[record.r, t2w, mask_seed]),
        )
    };

    let rec = hes.db.get_mut(&key).expect("looked up above");
    match (phase, chain) {
        (Phase::Issue, _) => rec.issued_theta = Some(token),
        (Phase::Subscription, _) => {
            rec.issued_theta = None;
            rec.issued_gamma = Some(token);
        }
        (Phase::Handoff, TokenChain::Theta) => rec.issued_theta = Some(token),
        (Phase::Handoff, TokenChain::Gamma) => rec.issued_gamma = Some(token),
        (Phase::Registration, _) => unreachable!(),
    }
    if phase == Phase::Handoff {
        rec.handoff_tag = new_tag;
    }

    let m2 = ResponseMessage {
        scheme: Scheme::Improved,
        phase,
        d,
        e_or_f: e,
        t2,
    };
    Ok((m2, Token::for_phase(token, phase)))
}

/// User side after `m_2`.
pub fn finalize(
    sess: &ImprovedUserSession,
    m2: &ResponseMessage,
    now: Timestamp,
    meter: &mut HashMeter,
) -> Result<Token> {
    if m2.phase != sess.phase || m2.scheme != Scheme::Improved {
        return Err(Error::MalformedMessage("response for another phase".into()));
    }
    check_window(m2.t2, now, sess.delta_t)?;
    let width = sess.q.width();
    let t2w = m2.t2.to_word(width)?;
    let mut s = meter.scoped(scope(sess.phase, Role::User), width);
    let (auth_key, mask_key) = match sess.rt {
        Some(rt) => (rt, sess.q),
        None => (sess.r, sess.r),
    };
    if s.h(&[auth_key, sess.cid, t2w, sess.n]) != m2.d {
        return Err(Error::ServerAuth);
    }
    // The server's mask argument n ⊕ Q ⊕ Kn unwinds to PWB, not n ⊕ PWB.
    let value = m2.e_or_f ^ s.h(&[mask_key, t2w, sess.pwb]);
    Ok(Token::for_phase(value, sess.phase))
}

fn exchange<R: RngCore + ?Sized>(
    mut sess: ImprovedUserSession,
    m: LoginMessage,
    hes: &mut ImprovedHes,
    chan: &mut Channel,
    rng: &mut R,
    meter: &mut HashMeter,
) -> Result<Outcome> {
    let m = chan.send_login(m)?;
    let (m2, server_token) = respond(hes, &m, chan.now(), rng, meter)?;
    let m2 = chan.send_response(m2)?;
    let user_token = finalize(&sess, &m2, chan.now(), meter)?;
    sess.store(user_token, hes.params.token_chain);
    Ok(Outcome {
        user_token,
        server_token,
        session: sess,
    })
}

pub fn run_issue<R: RngCore + ?Sized>(
    user: &ImprovedUser,
    hes: &mut ImprovedHes,
    chan: &mut Channel,
    rng: &mut R,
    meter: &mut HashMeter,
) -> Result<Outcome> {
    let params = hes.params;
    let (sess, m) = issue_login(&user.card, user.id, user.pw, &params, chan.now(), rng, meter)?;
    exchange(sess, m, hes, chan, rng, meter)
}

pub fn run_subscription<R: RngCore + ?Sized>(
    user: &ImprovedUser,
    theta: &Token,
    hes: &mut ImprovedHes,
    chan: &mut Channel,
    rng: &mut R,
    meter: &mut HashMeter,
) -> Result<Outcome> {
    let params = hes.params;
    let (sess, m) = subscription_login(
        &user.card,
        user.id,
        user.pw,
        theta,
        &params,
        chan.now(),
        rng,
        meter,
    )?;
    exchange(sess, m, hes, chan, rng, meter)
}

/// Re-authentication without re-login against `hes`.
pub fn run_handoff<R: RngCore + ?Sized>(
    prev: &ImprovedUserSession,
    token: &Token,
    hes: &mut ImprovedHes,
    chan: &mut Channel,
    rng: &mut R,
    meter: &mut HashMeter,
) -> Result<Outcome> {
    let (sess, m) = handoff_login(prev, token, chan.now(), rng, meter)?;
    exchange(sess, m, hes, chan, rng, meter)
}
