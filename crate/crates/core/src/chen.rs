//! The original scheme: registration, issue, subscription and hand-off.
//!
//! Users only ever learn `h(y)` (it is the server's published key), so every
//! user-side formula that names `y` is evaluated with `κ = h(y)`; the server
//! side uses the same `κ`. Every HES holds `κ`, which is exactly what the
//! privilege-insider and tracing attacks exploit.

use std::collections::BTreeMap;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::model::{
    check_window, Channel, ChenRecord, Field, FieldValue, LoginMessage, Params, Phase,
    ResponseMessage, Role, Scheme, ServerRecord, ServerSecrets, SmartCard, Token, TokenChain,
    UserSecrets,
};
use crate::primitives::{encode, HashMeter, Scope, Timestamp, Value, Word};

/// Registration number written for a first-time registration.
pub const FIRST_REGISTRATION: u64 = 1;

fn scope(phase: Phase, role: Role) -> Scope {
    Scope::protocol(Scheme::Chen, phase, role)
}

/// A head-end system running the original scheme.
#[derive(Debug, Clone)]
pub struct ChenHes {
    pub secrets: ServerSecrets,
    pub params: Params,
    db: BTreeMap<Word, ChenRecord>,
}

impl ChenHes {
    pub fn new(secrets: ServerSecrets, params: Params) -> Self {
        ChenHes {
            secrets,
            params,
            db: BTreeMap::new(),
        }
    }

    pub fn record(&self, id: &Word) -> Option<&ChenRecord> {
        self.db.get(id)
    }

    pub fn records(&self) -> impl Iterator<Item = &ChenRecord> {
        self.db.values()
    }

    /// The published `h(y)`.
    pub fn kappa(&self) -> Word {
        self.secrets.hy
    }
}

/// What a registered user holds: the card, the memorised `ID`/`PW`, and the
/// server's published `h(y)`.
#[derive(Debug, Clone, Copy)]
pub struct ChenUser {
    pub card: SmartCard,
    pub id: Word,
    pub pw: Word,
    pub hy: Word,
}

/// User-side state between `m_1` and `m_2`, kept across phases for hand-off.
#[derive(Debug, Clone)]
pub struct ChenUserSession {
    pub id: Word,
    /// `PWB_i = h(PW_i ⊕ b)`.
    pub pwb: Word,
    pub k: Word,
    /// `P = Q ⊕ PWB_i`, equal to `h(h(ID_i‖N)‖x)` for an honest card.
    pub p: Word,
    /// `κ = h(y)`.
    pub hy: Word,
    pub n: Word,
    pub cid: Word,
    pub phase: Phase,
    pub theta: Option<Token>,
    pub gamma: Option<Token>,
    delta_t: u64,
}

impl ChenUserSession {
    /// The token a hand-off will prove under `chain`.
    pub fn chained_token(&self, chain: TokenChain) -> Option<Token> {
        match chain {
            TokenChain::Theta => self.theta,
            TokenChain::Gamma => self.gamma,
        }
    }

    fn store(&mut self, phase: Phase, token: Token, chain: TokenChain) {
        match (phase, chain) {
            (Phase::Issue, _) | (Phase::Handoff, TokenChain::Theta) => self.theta = Some(token),
            _ => self.gamma = Some(token),
        }
        if phase == Phase::Subscription {
            self.theta = None;
        }
    }
}

/// Both sides' view of a completed phase.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub user_token: Token,
    pub server_token: Token,
    pub session: ChenUserSession,
}

/// Initialization over the secure channel: the user blinds its password and
/// the server issues `[K, R, Q]`; the user adds `b`.
pub fn register(
    user: &UserSecrets,
    hes: &mut ChenHes,
    meter: &mut HashMeter,
) -> Result<(SmartCard, ServerRecord)> {
    let width = hes.params.width;
    let pwb = meter
        .scoped(scope(Phase::Registration, Role::User), width)
        .h(&[user.pw ^ user.b]);

    if hes.db.contains_key(&user.id) {
        return Err(Error::DuplicateId);
    }
    let n_counter = FIRST_REGISTRATION;
    let mut s = meter.scoped(scope(Phase::Registration, Role::Server), width);
    let k = s.h(&[user.id ^ pwb]);
    let ud = s.h(&[user.id, encode(Value::Counter(n_counter), width)?]);
    let q = s.h(&[ud, hes.secrets.x]) ^ pwb;
    let hy = s.h(&[hes.secrets.y]);
    let r = s.h(&[pwb, user.id]) ^ hy;

    let record = ChenRecord {
        id: user.id,
        n_counter,
        issued_theta: None,
        issued_gamma: None,
    };
    hes.db.insert(user.id, record);
    let card = SmartCard {
        scheme: Scheme::Chen,
        k: Some(k),
        r,
        q,
        b: user.b,
    };
    Ok((card, ServerRecord::Chen(record)))
}

/// Card-side unlock: recomputes `PWB_i`, checks `K`, derives `P`.
fn unlock(
    card: &SmartCard,
    id: Word,
    pw: Word,
    phase: Phase,
    width: usize,
    meter: &mut HashMeter,
) -> Result<(Word, Word, Word)> {
    if card.scheme != Scheme::Chen {
        return Err(Error::WrongScheme);
    }
    let stored_k = card.k.ok_or(Error::WrongScheme)?;
    let mut s = meter.scoped(scope(phase, Role::User), width);
    let pwb = s.h(&[pw ^ card.b]);
    let k = s.h(&[id ^ pwb]);
    if k != stored_k {
        return Err(Error::AuthLocal);
    }
    Ok((pwb, k, card.q ^ pwb))
}

/// Builds `m = [slot, C_i, CID_i, T_1, n_i]`; `carried` is masked into the
/// first slot with `h(κ‖n_i)`.
#[allow(clippy::too_many_arguments)]
fn build_login<R: RngCore + ?Sized>(
    phase: Phase,
    id: Word,
    p: Word,
    hy: Word,
    carried: Word,
    width: usize,
    t1: Timestamp,
    rng: &mut R,
    meter: &mut HashMeter,
) -> Result<(Word, Word, LoginMessage)> {
    let n = Word::random(rng, width);
    let t1w = t1.to_word(width)?;
    let mut s = meter.scoped(scope(phase, Role::User), width);
    let slot = carried ^ s.h(&[hy, n]);
    let cid = id ^ s.h(&[hy, t1w, n]);
    let c = s.h(&[p, cid, t1w, n]);
    let slot_field = if phase == Phase::Handoff {
        Field::Z
    } else {
        Field::R
    };
    let m = LoginMessage {
        scheme: Scheme::Chen,
        phase,
        fields: vec![
            (slot_field, FieldValue::Word(slot)),
            (Field::C, FieldValue::Word(c)),
            (Field::Cid, FieldValue::Word(cid)),
            (Field::T1, FieldValue::Time(t1)),
            (Field::N, FieldValue::Word(n)),
        ],
    };
    Ok((n, cid, m))
}

/// Issue phase, user side up to sending `m`.
#[allow(clippy::too_many_arguments)]
pub fn issue_login<R: RngCore + ?Sized>(
    card: &SmartCard,
    id: Word,
    pw: Word,
    hy: Word,
    params: &Params,
    now: Timestamp,
    rng: &mut R,
    meter: &mut HashMeter,
) -> Result<(ChenUserSession, LoginMessage)> {
    let (pwb, k, p) = unlock(card, id, pw, Phase::Issue, params.width, meter)?;
    let (n, cid, m) = build_login(
        Phase::Issue,
        id,
        p,
        hy,
        card.r,
        params.width,
        now,
        rng,
        meter,
    )?;
    let sess = ChenUserSession {
        id,
        pwb,
        k,
        p,
        hy,
        n,
        cid,
        phase: Phase::Issue,
        theta: None,
        gamma: None,
        delta_t: params.delta_t,
    };
    Ok((sess, m))
}

/// Issue-phase login from raw `ID`, `PWB` and `P`, skipping the card check.
/// Impersonation harnesses feed it guessed or stolen values.
#[allow(clippy::too_many_arguments)]
pub fn forged_issue_login<R: RngCore + ?Sized>(
    id: Word,
    pwb: Word,
    p: Word,
    hy: Word,
    r: Word,
    params: &Params,
    now: Timestamp,
    rng: &mut R,
    meter: &mut HashMeter,
) -> Result<(ChenUserSession, LoginMessage)> {
    let (n, cid, m) = build_login(Phase::Issue, id, p, hy, r, params.width, now, rng, meter)?;
    let sess = ChenUserSession {
        id,
        pwb,
        k: Word::zero(params.width),
        p,
        hy,
        n,
        cid,
        phase: Phase::Issue,
        theta: None,
        gamma: None,
        delta_t: params.delta_t,
    };
    Ok((sess, m))
}

/// Subscription phase, user side: re-enters `ID`/`PW` and carries `Θ` in the
/// `R_i` slot.
#[allow(clippy::too_many_arguments)]
pub fn subscription_login<R: RngCore + ?Sized>(
    card: &SmartCard,
    id: Word,
    pw: Word,
    hy: Word,
    theta: &Token,
    params: &Params,
    now: Timestamp,
    rng: &mut R,
    meter: &mut HashMeter,
) -> Result<(ChenUserSession, LoginMessage)> {
    let (pwb, k, p) = unlock(card, id, pw, Phase::Subscription, params.width, meter)?;
    let (n, cid, m) = build_login(
        Phase::Subscription,
        id,
        p,
        hy,
        theta.value,
        params.width,
        now,
        rng,
        meter,
    )?;
    let sess = ChenUserSession {
        id,
        pwb,
        k,
        p,
        hy,
        n,
        cid,
        phase: Phase::Subscription,
        theta: Some(*theta),
        gamma: None,
        delta_t: params.delta_t,
    };
    Ok((sess, m))
}

/// Hand-off, user side. Works from the stored session; no password entry.
pub fn handoff_login<R: RngCore + ?Sized>(
    sess: &mut ChenUserSession,
    token: &Token,
    now: Timestamp,
    rng: &mut R,
    meter: &mut HashMeter,
) -> Result<LoginMessage> {
    let width = sess.p.width();
    let (n, cid, m) = build_login(
        Phase::Handoff,
        sess.id,
        sess.p,
        sess.hy,
        token.value,
        width,
        now,
        rng,
        meter,
    )?;
    sess.n = n;
    sess.cid = cid;
    sess.phase = Phase::Handoff;
    Ok(m)
}

/// HES side of any phase. Returns `m_2` and the token the server now holds.
pub fn respond<R: RngCore + ?Sized>(
    hes: &mut ChenHes,
    m: &LoginMessage,
    now: Timestamp,
    rng: &mut R,
    meter: &mut HashMeter,
) -> Result<(ResponseMessage, Token)> {
    if m.scheme != Scheme::Chen {
        return Err(Error::WrongScheme);
    }
    m.validate()?;
    let phase = m.phase;
    let width = hes.params.width;
    let t1 = m.time(Field::T1)?;
    check_window(t1, now, hes.params.delta_t)?;

    let slot = match phase {
        Phase::Handoff => m.word(Field::Z)?,
        _ => m.word(Field::R)?,
    };
    let c = m.word(Field::C)?;
    let cid = m.word(Field::Cid)?;
    let n = m.word(Field::N)?;
    let t1w = t1.to_word(width)?;
    let kappa = hes.secrets.hy;
    let x = hes.secrets.x;

    let mut s = meter.scoped(scope(phase, Role::Server), width);
    let id = cid ^ s.h(&[kappa, t1w, n]);
    let record = *hes.db.get(&id).ok_or(Error::UnknownUser)?;
    let ud = s.h(&[id, encode(Value::Counter(record.n_counter), width)?]);
    let p = s.h(&[ud, x]);
    if s.h(&[p, cid, t1w, n]) != c {
        return Err(Error::MacMismatch);
    }
    let unmasked = slot ^ s.h(&[kappa, n]);
    let chain = hes.params.token_chain;
    match phase {
        // R_t is recovered but not checked in the issue phase
        Phase::Issue => {}
        Phase::Subscription => {
            if record.issued_theta != Some(unmasked) {
                return Err(Error::TokenMismatch);
            }
        }
        Phase::Handoff => {
            let expected = match chain {
                TokenChain::Theta => record.issued_theta,
                TokenChain::Gamma => record.issued_gamma,
            };
            if expected != Some(unmasked) {
                return Err(Error::TokenMismatch);
            }
        }
        Phase::Registration => return Err(Error::UnsupportedPhase(phase)),
    }

    let token = Word::random(rng, width);
    let t2 = now;
    let t2w = t2.to_word(width)?;
    let d = s.h(&[p, cid, t2w, n]);
    let e = token ^ s.h(&[p, t2w, n]);

    let rec = hes.db.get_mut(&id).expect("looked up above");
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

    let m2 = ResponseMessage {
        scheme: Scheme::Chen,
        phase,
        d,
        e_or_f: e,
        t2,
    };
    Ok((m2, Token::for_phase(token, phase)))
}

/// User side after `m_2`: window check, `D'_i == D_i`, unmask the token.
pub fn finalize(
    sess: &mut ChenUserSession,
    m2: &ResponseMessage,
    now: Timestamp,
    meter: &mut HashMeter,
) -> Result<Token> {
    if m2.phase != sess.phase || m2.scheme != Scheme::Chen {
        return Err(Error::MalformedMessage("response for another phase".into()));
    }
    check_window(m2.t2, now, sess.delta_t)?;
    let width = sess.p.width();
    let t2w = m2.t2.to_word(width)?;
    let mut s = meter.scoped(scope(sess.phase, Role::User), width);
    if s.h(&[sess.p, sess.cid, t2w, sess.n]) != m2.d {
        return Err(Error::ServerAuth);
    }
    let token = Token::for_phase(m2.e_or_f ^ s.h(&[sess.p, t2w, sess.n]), sess.phase);
    Ok(token)
}

fn exchange<R: RngCore + ?Sized>(
    sess: &mut ChenUserSession,
    m: LoginMessage,
    hes: &mut ChenHes,
    chan: &mut Channel,
    rng: &mut R,
    meter: &mut HashMeter,
) -> Result<Outcome> {
    let m = chan.send_login(m)?;
    let (m2, server_token) = respond(hes, &m, chan.now(), rng, meter)?;
    let m2 = chan.send_response(m2)?;
    let user_token = finalize(sess, &m2, chan.now(), meter)?;
    sess.store(sess.phase, user_token, hes.params.token_chain);
    Ok(Outcome {
        user_token,
        server_token,
        session: sess.clone(),
    })
}

/// Full issue round over `chan`.
pub fn run_issue<R: RngCore + ?Sized>(
    user: &ChenUser,
    hes: &mut ChenHes,
    chan: &mut Channel,
    rng: &mut R,
    meter: &mut HashMeter,
) -> Result<Outcome> {
    let params = hes.params;
    let (mut sess, m) = issue_login(
        &user.card,
        user.id,
        user.pw,
        user.hy,
        &params,
        chan.now(),
        rng,
        meter,
    )?;
    exchange(&mut sess, m, hes, chan, rng, meter)
}

/// Full subscription round: proves `theta`, obtains `γ`.
pub fn run_subscription<R: RngCore + ?Sized>(
    user: &ChenUser,
    theta: &Token,
    hes: &mut ChenHes,
    chan: &mut Channel,
    rng: &mut R,
    meter: &mut HashMeter,
) -> Result<Outcome> {
    let params = hes.params;
    let (mut sess, m) = subscription_login(
        &user.card,
        user.id,
        user.pw,
        user.hy,
        theta,
        &params,
        chan.now(),
        rng,
        meter,
    )?;
    exchange(&mut sess, m, hes, chan, rng, meter)
}

/// Full hand-off round to `hes` (the new head end) from an earlier session.
pub fn run_handoff<R: RngCore + ?Sized>(
    sess: &mut ChenUserSession,
    token: &Token,
    hes: &mut ChenHes,
    chan: &mut Channel,
    rng: &mut R,
    meter: &mut HashMeter,
) -> Result<Outcome> {
    let m = handoff_login(sess, token, chan.now(), rng, meter)?;
    exchange(sess, m, hes, chan, rng, meter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::digest;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        rng: ChaCha8Rng,
        meter: HashMeter,
        hes: ChenHes,
        user: ChenUser,
        secrets: UserSecrets,
        chan: Channel,
    }

    fn fixture(seed: u64) -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = Params::default();
        let mut meter = HashMeter::new();
        let mut hes = ChenHes::new(ServerSecrets::random(&mut rng, 32), params);
        let secrets = UserSecrets::random(&mut rng, 32);
        let (card, _) = register(&secrets, &mut hes, &mut meter).unwrap();
        let user = ChenUser {
            card,
            id: secrets.id,
            pw: secrets.pw,
            hy: hes.kappa(),
        };
        Fixture {
            rng,
            meter,
            hes,
            user,
            secrets,
            chan: Channel::new(),
        }
    }

    #[test]
    fn duplicate_registration_rejected() {
        let mut f = fixture(1);
        assert_eq!(
            register(&f.secrets, &mut f.hes, &mut f.meter).unwrap_err(),
            Error::DuplicateId
        );
    }

    #[test]
    fn card_values_invert_algebraically() {
        let f = fixture(2);
        let pwb = digest(32, (f.secrets.pw ^ f.secrets.b).as_bytes());
        let hy = digest(32, f.hes.secrets.y.as_bytes());
        let h_pwb_id = digest(32, &crate::primitives::concat(&[pwb, f.secrets.id]));
        assert_eq!(f.user.card.r ^ h_pwb_id, hy);
        let ud = digest(
            32,
            &crate::primitives::concat(&[f.secrets.id, Word::from_u64(32, 1).unwrap()]),
        );
        let p = digest(32, &crate::primitives::concat(&[ud, f.hes.secrets.x]));
        assert_eq!(f.user.card.q ^ pwb, p);
        assert_eq!(f.user.card.param_count(), 4);
    }

    #[test]
    fn wrong_password_fails_locally() {
        let mut f = fixture(3);
        let bad = f.user.pw.flip_bit(0);
        let err = issue_login(
            &f.user.card,
            f.user.id,
            bad,
            f.user.hy,
            &f.hes.params,
            Timestamp(0),
            &mut f.rng,
            &mut f.meter,
        )
        .unwrap_err();
        assert_eq!(err, Error::AuthLocal);
    }

    #[test]
    fn login_shape_and_cid_inversion() {
        let mut f = fixture(4);
        let (_, m) = issue_login(
            &f.user.card,
            f.user.id,
            f.user.pw,
            f.user.hy,
            &f.hes.params,
            Timestamp(3),
            &mut f.rng,
            &mut f.meter,
        )
        .unwrap();
        assert_eq!(m.field_count(), 5);
        let t1 = m.time(Field::T1).unwrap().to_word(32).unwrap();
        let n = m.word(Field::N).unwrap();
        let mask = digest(32, &crate::primitives::concat(&[f.hes.kappa(), t1, n]));
        assert_eq!(m.word(Field::Cid).unwrap() ^ mask, f.user.id);
    }

    #[test]
    fn honest_issue_agrees() {
        let mut f = fixture(5);
        let out = run_issue(&f.user, &mut f.hes, &mut f.chan, &mut f.rng, &mut f.meter).unwrap();
        assert_eq!(out.user_token, out.server_token);
        assert_eq!(f.chan.transcript().len(), 2);
        assert_eq!(
            f.hes.record(&f.user.id).unwrap().issued_theta,
            Some(out.server_token.value)
        );
    }

    #[test]
    fn stale_login_rejected() {
        let mut f = fixture(6);
        let (_, m) = issue_login(
            &f.user.card,
            f.user.id,
            f.user.pw,
            f.user.hy,
            &f.hes.params,
            Timestamp(0),
            &mut f.rng,
            &mut f.meter,
        )
        .unwrap();
        let err = respond(&mut f.hes, &m, Timestamp(3), &mut f.rng, &mut f.meter).unwrap_err();
        assert!(matches!(err, Error::StaleTimestamp { .. }));
    }

    #[test]
    fn flipped_c_rejected() {
        let mut f = fixture(7);
        let (_, mut m) = issue_login(
            &f.user.card,
            f.user.id,
            f.user.pw,
            f.user.hy,
            &f.hes.params,
            Timestamp(0),
            &mut f.rng,
            &mut f.meter,
        )
        .unwrap();
        let c = m.word(Field::C).unwrap();
        m.set_word(Field::C, c.flip_bit(17)).unwrap();
        let err = respond(&mut f.hes, &m, Timestamp(1), &mut f.rng, &mut f.meter).unwrap_err();
        assert_eq!(err, Error::MacMismatch);
    }

    #[test]
    fn unknown_identity_rejected() {
        let mut f = fixture(8);
        let (_, mut m) = issue_login(
            &f.user.card,
            f.user.id,
            f.user.pw,
            f.user.hy,
            &f.hes.params,
            Timestamp(0),
            &mut f.rng,
            &mut f.meter,
        )
        .unwrap();
        let cid = m.word(Field::Cid).unwrap();
        m.set_word(Field::Cid, cid.flip_bit(3)).unwrap();
        let err = respond(&mut f.hes, &m, Timestamp(1), &mut f.rng, &mut f.meter).unwrap_err();
        assert_eq!(err, Error::UnknownUser);
    }

    #[test]
    fn corrupted_d_and_late_m2_rejected() {
        let mut f = fixture(9);
        let params = f.hes.params;
        let (sess, m) = issue_login(
            &f.user.card,
            f.user.id,
            f.user.pw,
            f.user.hy,
            &params,
            Timestamp(0),
            &mut f.rng,
            &mut f.meter,
        )
        .unwrap();
        let (m2, _) = respond(&mut f.hes, &m, Timestamp(1), &mut f.rng, &mut f.meter).unwrap();
        let mut bad = m2;
        bad.d = bad.d.flip_bit(0);
        assert_eq!(
            finalize(&mut sess.clone(), &bad, Timestamp(2), &mut f.meter).unwrap_err(),
            Error::ServerAuth
        );
        assert!(matches!(
            finalize(&mut sess.clone(), &m2, Timestamp(4), &mut f.meter).unwrap_err(),
            Error::StaleTimestamp { .. }
        ));
    }

    #[test]
    fn subscription_and_handoff_agree() {
        let mut f = fixture(10);
        let issue = run_issue(&f.user, &mut f.hes, &mut f.chan, &mut f.rng, &mut f.meter).unwrap();
        let sub = run_subscription(
            &f.user,
            &issue.user_token,
            &mut f.hes,
            &mut f.chan,
            &mut f.rng,
            &mut f.meter,
        )
        .unwrap();
        assert_eq!(sub.user_token, sub.server_token);
        let logins = f.chan.transcript().logins().count();
        assert_eq!(logins, 2);
        assert_eq!(f.chan.transcript().len(), 4);

        let mut sess = sub.session.clone();
        let mut roamed = f.hes.clone();
        let ho = run_handoff(
            &mut sess,
            &sub.user_token,
            &mut roamed,
            &mut f.chan,
            &mut f.rng,
            &mut f.meter,
        )
        .unwrap();
        assert_eq!(ho.user_token, ho.server_token);
    }

    #[test]
    fn forged_theta_rejected() {
        let mut f = fixture(11);
        run_issue(&f.user, &mut f.hes, &mut f.chan, &mut f.rng, &mut f.meter).unwrap();
        let forged = Token::new(Word::random(&mut f.rng, 32), crate::model::TokenKind::Theta);
        let err = run_subscription(
            &f.user,
            &forged,
            &mut f.hes,
            &mut f.chan,
            &mut f.rng,
            &mut f.meter,
        )
        .unwrap_err();
        assert_eq!(err, Error::TokenMismatch);
    }

    #[test]
    fn revoked_token_handoff_rejected() {
        let mut f = fixture(12);
        let issue = run_issue(&f.user, &mut f.hes, &mut f.chan, &mut f.rng, &mut f.meter).unwrap();
        let sub = run_subscription(
            &f.user,
            &issue.user_token,
            &mut f.hes,
            &mut f.chan,
            &mut f.rng,
            &mut f.meter,
        )
        .unwrap();
        let mut sess = sub.session.clone();
        // the consumed Θ is no longer live
        let err = run_handoff(
            &mut sess,
            &issue.user_token,
            &mut f.hes,
            &mut f.chan,
            &mut f.rng,
            &mut f.meter,
        )
        .unwrap_err();
        assert_eq!(err, Error::TokenMismatch);
    }
}
