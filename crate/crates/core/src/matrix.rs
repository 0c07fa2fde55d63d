//! Security-feature matrix. Every verdict is the conjunction of named,
//! individually runnable checks; nothing is hand-entered.

use std::collections::BTreeMap;
use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::adversary::campaigns::toy_campaign;
use crate::adversary::linkage::{alg1_campaign, alg2_campaign};
use crate::adversary::probes::id_absence_check;
use crate::adversary::world::{AnyHes, ChenWorld, ImprovedWorld, SecretBits};
use crate::adversary::{trial_rng, GameKind, YStar};
use crate::chen::{self, ChenUserSession};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::improved::{self, ImprovedUserSession};
use crate::model::{Field, FieldValue, LoginMessage, Params, Phase, ResponseMessage, Scheme, Token, Transcript};
use crate::primitives::{concat, digest, HashMeter, Timestamp, Word};

/// The seven compared features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Feature {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    S7,
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Feature::S1,
        Feature::S2,
        Feature::S3,
        Feature::S4,
        Feature::S5,
        Feature::S6,
        Feature::S7,
    ];

    pub fn describe(&self) -> &'static str {
        match self {
            Feature::S1 => "stolen/lost smart card and user impersonation",
            Feature::S2 => "stolen verifier table and server impersonation",
            Feature::S3 => "denial of access",
            Feature::S4 => "identity privacy towards other servers",
            Feature::S5 => "user untraceability",
            Feature::S6 => "mutual authentication",
            Feature::S7 => "privilege insider",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl Verdict {
    pub fn symbol(&self) -> &'static str {
        match self {
            Verdict::Pass => "✓",
            Verdict::Fail => "✗",
            Verdict::NotApplicable => "n/a",
        }
    }
}

/// One executed check. `resisted` is true when the attack it models failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub check: String,
    /// CLI invocation that reruns the check on its own.
    pub command: String,
    pub resisted: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub feature: Feature,
    pub verdict: Verdict,
    pub evidence: Vec<Evidence>,
}

impl Cell {
    fn from_evidence(feature: Feature, evidence: Vec<Evidence>) -> Self {
        let verdict = if evidence.is_empty() {
            Verdict::NotApplicable
        } else if evidence.iter().all(|e| e.resisted) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Cell {
            feature,
            verdict,
            evidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityMatrixRow {
    pub scheme: Scheme,
    pub cells: Vec<Cell>,
}

impl SecurityMatrixRow {
    pub fn verdicts(&self) -> Vec<Verdict> {
        self.cells.iter().map(|c| c.verdict).collect()
    }

    pub fn verdict(&self, feature: Feature) -> Verdict {
        self.cells
            .iter()
            .find(|c| c.feature == feature)
            .map_or(Verdict::NotApplicable, |c| c.verdict)
    }

    /// The row as printed in the comparison table.
    pub fn expected(scheme: Scheme) -> Vec<Verdict> {
        use Verdict::{Fail, Pass};
        match scheme {
            Scheme::Chen => vec![Pass, Pass, Pass, Fail, Fail, Pass, Fail],
            Scheme::Improved => vec![Pass; 7],
        }
    }

    pub fn matches_expected(&self) -> bool {
        self.verdicts() == Self::expected(self.scheme)
    }

    pub fn summary_line(&self) -> String {
        let cells: Vec<String> = self
            .cells
            .iter()
            .map(|c| format!("{}={}", c.feature, c.verdict.symbol()))
            .collect();
        format!("matrix scheme={} {}", self.scheme, cells.join(" "))
    }

    pub fn to_lines(&self) -> Vec<String> {
        let mut lines = vec![self.summary_line()];
        for c in &self.cells {
            for e in &c.evidence {
                lines.push(format!(
                    "  {} {} {} [{}] {} ({})",
                    c.feature,
                    if e.resisted { "resisted" } else { "broken" },
                    e.check,
                    e.command,
                    e.detail,
                    c.feature.describe()
                ));
            }
        }
        lines
    }
}

/// Trial counts for the matrix checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixSize {
    /// Sessions for the Algorithm 1 and 2 campaigns.
    pub sessions: u64,
    /// Forged logins or responses per impersonation check.
    pub attempts: u64,
    /// Honest worlds whose transcripts seed the flood.
    pub flood_worlds: u64,
}

impl Default for MatrixSize {
    fn default() -> Self {
        MatrixSize {
            sessions: 1000,
            attempts: 200,
            flood_worlds: 20,
        }
    }
}

/// One world of either scheme, with its user's in-flight session type.
#[derive(Debug, Clone)]
enum Rig {
    Chen(Box<ChenWorld>),
    Improved(Box<ImprovedWorld>),
}

#[derive(Debug, Clone)]
enum UserSession {
    Chen(ChenUserSession),
    Improved(ImprovedUserSession),
}

impl Rig {
    fn plant<R: RngCore + ?Sized>(scheme: Scheme, rng: &mut R, params: Params) -> Result<Self> {
        let bits = SecretBits::full(params.width);
        Ok(match scheme {
            Scheme::Chen => Rig::Chen(Box::new(ChenWorld::plant(rng, params, bits)?)),
            Scheme::Improved => Rig::Improved(Box::new(ImprovedWorld::plant(rng, params, bits)?)),
        })
    }

    fn params(&self) -> Params {
        match self {
            Rig::Chen(w) => w.hes.params,
            Rig::Improved(w) => w.hes.params,
        }
    }

    fn now(&self) -> Timestamp {
        match self {
            Rig::Chen(w) => w.chan.now(),
            Rig::Improved(w) => w.chan.now(),
        }
    }

    fn transcript(&self) -> &Transcript {
        match self {
            Rig::Chen(w) => w.chan.transcript(),
            Rig::Improved(w) => w.chan.transcript(),
        }
    }

    fn snapshot(&self) -> Vec<String> {
        match self {
            Rig::Chen(w) => AnyHes::Chen(w.hes.clone()).snapshot(),
            Rig::Improved(w) => AnyHes::Improved(w.hes.clone()).snapshot(),
        }
    }

    fn run_rounds<R: RngCore + ?Sized>(&mut self, rng: &mut R, rounds: usize) -> Result<bool> {
        Ok(match self {
            Rig::Chen(w) => {
                let o = w.run_rounds(rng, rounds)?;
                o.user_token == o.server_token
            }
            Rig::Improved(w) => {
                let o = w.run_rounds(rng, rounds)?;
                o.user_token == o.server_token
            }
        })
    }

    fn honest_login<R: RngCore + ?Sized>(&self, rng: &mut R, meter: &mut HashMeter) -> Result<(UserSession, LoginMessage)> {
        let now = self.now();
        Ok(match self {
            Rig::Chen(w) => {
                let u = &w.user;
                let (s, m) = chen::issue_login(&u.card, u.id, u.pw, u.hy, &w.hes.params, now, rng, meter)?;
                (UserSession::Chen(s), m)
            }
            Rig::Improved(w) => {
                let u = &w.user;
                let (s, m) = improved::issue_login(&u.card, u.id, u.pw, &w.hes.params, now, rng, meter)?;
                (UserSession::Improved(s), m)
            }
        })
    }

    /// Issue login built from a guessed `ID` and password and the stolen card.
    fn card_only_login<R: RngCore + ?Sized>(&self, rng: &mut R, meter: &mut HashMeter) -> Result<LoginMessage> {
        let params = self.params();
        let width = params.width;
        let now = self.now();
        let pw_guess = Word::random(rng, width);
        Ok(match self {
            Rig::Chen(w) => {
                let card = w.user.card;
                let pwb = digest(width, &concat(&[pw_guess ^ card.b]));
                let id_guess = Word::random(rng, width);
                let hy = w.hes.secrets.hy;
                chen::forged_issue_login(id_guess, pwb, card.q ^ pwb, hy, card.r, &params, now, rng, meter)?.1
            }
            Rig::Improved(w) => {
                let card = w.user.card;
                let pwb = digest(width, &concat(&[pw_guess ^ card.b]));
                improved::forged_issue_login(pwb, card.q, card.r, &params, now, rng, meter)?.1
            }
        })
    }

    fn respond<R: RngCore + ?Sized>(
        &mut self,
        m: &LoginMessage,
        now: Timestamp,
        rng: &mut R,
        meter: &mut HashMeter,
    ) -> Result<(ResponseMessage, Token)> {
        match self {
            Rig::Chen(w) => chen::respond(&mut w.hes, m, now, rng, meter),
            Rig::Improved(w) => improved::respond(&mut w.hes, m, now, rng, meter),
        }
    }
}

fn finalize(sess: &mut UserSession, m2: &ResponseMessage, now: Timestamp, meter: &mut HashMeter) -> Result<Token> {
    match sess {
        UserSession::Chen(s) => chen::finalize(s, m2, now, meter),
        UserSession::Improved(s) => improved::finalize(s, m2, now, meter),
    }
}

fn reason(err: &Error) -> String {
    let dbg = format!("{err:?}");
    dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
}

fn tally(map: &BTreeMap<String, u64>) -> String {
    let parts: Vec<String> = map.iter().map(|(k, v)| format!("{k}={v}")).collect();
    parts.join(",")
}

/// Stolen card `(K, R, Q, b)` or `(R, Q, b)` and no eavesdropping: forged
/// issue logins with guessed identity and password.
pub fn card_only_impersonation(scheme: Scheme, params: Params, attempts: u64, seed: u64) -> Result<Evidence> {
    let mut rng = trial_rng(seed, 0);
    let mut rig = Rig::plant(scheme, &mut rng, params)?;
    let mut meter = HashMeter::new();
    let mut accepted = 0;
    let mut reasons = BTreeMap::new();
    for _ in 0..attempts {
        let m1 = rig.card_only_login(&mut rng, &mut meter)?;
        let now = rig.now();
        match rig.respond(&m1, now, &mut rng, &mut meter) {
            Ok(_) => accepted += 1,
            Err(e) => *reasons.entry(reason(&e)).or_default() += 1,
        }
    }
    Ok(Evidence {
        check: "card_only_impersonation".into(),
        command: format!("paytv matrix --scheme {scheme} --seed {seed}"),
        resisted: accepted == 0,
        detail: format!("accepted={accepted}/{attempts} rejected[{}]", tally(&reasons)),
    })
}

/// A head end without the long-term secrets answers honest logins with
/// fabricated responses; the user must reject every one.
pub fn rogue_server_impersonation(scheme: Scheme, params: Params, attempts: u64, seed: u64) -> Result<Evidence> {
    let mut rng = trial_rng(seed, 0);
    let rig = Rig::plant(scheme, &mut rng, params)?;
    let mut meter = HashMeter::new();
    let width = params.width;
    let mut accepted = 0;
    let mut reasons = BTreeMap::new();
    for _ in 0..attempts {
        let (mut sess, m1) = rig.honest_login(&mut rng, &mut meter)?;
        let t2 = Timestamp(rig.now().0 + 1);
        let forged = ResponseMessage {
            scheme,
            phase: m1.phase,
            d: Word::random(&mut rng, width),
            e_or_f: Word::random(&mut rng, width),
            t2,
        };
        match finalize(&mut sess, &forged, t2, &mut meter) {
            Ok(_) => accepted += 1,
            Err(e) => *reasons.entry(reason(&e)).or_default() += 1,
        }
    }
    Ok(Evidence {
        check: "rogue_server_impersonation".into(),
        command: format!("paytv matrix --scheme {scheme} --seed {seed}"),
        resisted: accepted == 0,
        detail: format!("accepted={accepted}/{attempts} rejected[{}]", tally(&reasons)),
    })
}

fn word_fields(m: &LoginMessage) -> Vec<Field> {
    m.fields
        .iter()
        .filter(|(_, v)| matches!(v, FieldValue::Word(_)))
        .map(|(f, _)| *f)
        .collect()
}

fn with_time(m: &LoginMessage, t: Timestamp) -> LoginMessage {
    let mut out = m.clone();
    for (f, v) in &mut out.fields {
        if *f == Field::T1 {
            *v = FieldValue::Time(t);
        }
    }
    out
}

/// Stale replays, bit-flipped and random-field logins, truncated messages,
/// wrong scheme and registration-phase tags. All must be rejected, the head
/// end's records must not change, and an honest round must still succeed.
pub fn flood_resistance(scheme: Scheme, params: Params, worlds: u64, seed: u64) -> Result<Evidence> {
    let mut sent = 0u64;
    let mut accepted = 0u64;
    let mut corrupted = 0u64;
    let mut honest_after = 0u64;
    let mut reasons = BTreeMap::new();
    for i in 0..worlds {
        let mut rng = trial_rng(seed, i);
        let mut rig = Rig::plant(scheme, &mut rng, params)?;
        rig.run_rounds(&mut rng, 3)?;
        let recorded: Vec<(LoginMessage, Timestamp)> =
            rig.transcript().logins().map(|(m, t)| (m.clone(), t)).collect();
        let before = rig.snapshot();
        let now = rig.now();
        let mut flood: Vec<(LoginMessage, Timestamp)> = Vec::new();
        for (m, t1) in &recorded {
            flood.push((m.clone(), Timestamp(t1.0 + params.delta_t + 1)));
            let fresh = with_time(m, now);
            for f in word_fields(&fresh) {
                let mut flipped = fresh.clone();
                let w = flipped.word(f)?;
                flipped.set_word(f, w.flip_bit((rng.next_u32() as usize) % (params.width * 8)))?;
                flood.push((flipped, now));
            }
            let mut garbage = fresh.clone();
            for f in word_fields(&fresh) {
                garbage.set_word(f, Word::random(&mut rng, params.width))?;
            }
            flood.push((garbage, now));
            let mut short = fresh.clone();
            short.fields.pop();
            flood.push((short, now));
            let mut other = fresh.clone();
            other.scheme = match scheme {
                Scheme::Chen => Scheme::Improved,
                Scheme::Improved => Scheme::Chen,
            };
            flood.push((other, now));
            let mut reg = fresh.clone();
            reg.phase = Phase::Registration;
            flood.push((reg, now));
        }
        let mut meter = HashMeter::new();
        for (m, at) in &flood {
            sent += 1;
            match rig.respond(m, *at, &mut rng, &mut meter) {
                Ok(_) => accepted += 1,
                Err(e) => *reasons.entry(reason(&e)).or_default() += 1,
            }
        }
        if rig.snapshot() != before {
            corrupted += 1;
        }
        if rig.run_rounds(&mut rng, 3)? {
            honest_after += 1;
        }
    }
    Ok(Evidence {
        check: "flood_resistance".into(),
        command: format!("paytv matrix --scheme {scheme} --seed {seed}"),
        resisted: accepted == 0 && corrupted == 0 && honest_after == worlds,
        detail: format!(
            "sent={sent} accepted={accepted} corrupted_worlds={corrupted} honest_after={honest_after}/{worlds} rejected[{}]",
            tally(&reasons)
        ),
    })
}

/// Each side detects a modified authenticator from the other: a flipped `D`
/// fails at the user, a flipped `C` fails at the head end.
pub fn mutual_authentication(scheme: Scheme, params: Params, attempts: u64, seed: u64) -> Result<Evidence> {
    let mut rng = trial_rng(seed, 0);
    let rig = Rig::plant(scheme, &mut rng, params)?;
    let mut meter = HashMeter::new();
    let bits = params.width * 8;
    let (mut honest, mut user_rejects, mut server_rejects) = (0u64, 0u64, 0u64);
    for _ in 0..attempts {
        let now = rig.now();
        let (mut sess, m1) = rig.honest_login(&mut rng, &mut meter)?;
        let (m2, server_token) = rig.clone().respond(&m1, now, &mut rng, &mut meter)?;
        if finalize(&mut sess.clone(), &m2, now, &mut meter)? == server_token {
            honest += 1;
        }
        let mut bad = m2;
        bad.d = bad.d.flip_bit((rng.next_u32() as usize) % bits);
        if matches!(finalize(&mut sess, &bad, now, &mut meter), Err(Error::ServerAuth)) {
            user_rejects += 1;
        }
        let mut bad = m1.clone();
        let c = bad.word(Field::C)?;
        bad.set_word(Field::C, c.flip_bit((rng.next_u32() as usize) % bits))?;
        if matches!(rig.clone().respond(&bad, now, &mut rng, &mut meter), Err(Error::MacMismatch)) {
            server_rejects += 1;
        }
    }
    Ok(Evidence {
        check: "mutual_authentication".into(),
        command: format!("paytv matrix --scheme {scheme} --seed {seed}"),
        resisted: honest == attempts && user_rejects == attempts && server_rejects == attempts,
        detail: format!(
            "honest_agree={honest}/{attempts} tampered_D_rejected={user_rejects}/{attempts} tampered_C_rejected={server_rejects}/{attempts}"
        ),
    })
}

fn game_evidence(kind: GameKind, cfg: &Config, seed: u64) -> Result<Evidence> {
    let r = toy_campaign(kind, cfg.width, cfg, seed)?;
    let o = r.oracle.expect("toy campaigns carry an oracle summary");
    let ci = r.interval.expect("toy campaigns carry an interval");
    Ok(Evidence {
        check: format!("{kind}_toy_campaign"),
        command: format!("paytv attack {kind} --seed {seed}"),
        resisted: r.met,
        detail: format!(
            "successes={}/{} ci=[{},{}] oracle_accepting={}/{}",
            r.result.successes, r.result.trials, ci.lo, ci.hi, o.accepting, o.universe
        ),
    })
}

fn alg1_evidence(scheme: Scheme, cfg: &Config, sessions: u64, seed: u64) -> Result<Evidence> {
    let r = alg1_campaign(scheme, sessions, cfg.params(), seed)?;
    Ok(Evidence {
        check: "alg1_privilege_insider".into(),
        command: format!("paytv attack alg1 --scheme {scheme} --trials {sessions} --seed {seed}"),
        resisted: r.successes == 0,
        detail: format!("id_recovered={}/{} rate={:.6}", r.successes, r.trials, r.success_rate),
    })
}

fn id_absence_evidence(scheme: Scheme, cfg: &Config, worlds: u64, seed: u64) -> Result<Evidence> {
    let r = id_absence_check(scheme, worlds, cfg.params(), seed)?;
    Ok(Evidence {
        check: "id_absence_scan".into(),
        command: format!("paytv matrix --scheme {scheme} --seed {seed}"),
        resisted: r.passed(),
        detail: format!(
            "messages={} hits={} structural={}",
            r.messages,
            r.hits.len(),
            r.structural.len()
        ),
    })
}

fn alg2_evidence(scheme: Scheme, cfg: &Config, sessions: u64, seed: u64) -> Result<Evidence> {
    let per_user = 4;
    let users = (sessions / per_user as u64).max(2);
    let r = alg2_campaign(scheme, users, per_user, YStar::Kappa, cfg.params(), seed)?;
    Ok(Evidence {
        check: "alg2_trace_kappa".into(),
        command: format!("paytv attack alg2 --scheme {scheme} --trials {} --seed {seed}", users * per_user as u64),
        resisted: r.linked == 0,
        detail: format!(
            "linked={}/{} false_links={}/{}",
            r.linked, r.repeat_sessions, r.false_links, r.sessions
        ),
    })
}

/// Runs every check for one scheme.
pub fn security_row(scheme: Scheme, cfg: &Config, size: MatrixSize, seed: u64) -> Result<SecurityMatrixRow> {
    let params = cfg.params();
    let mut cells = Vec::new();
    for feature in Feature::ALL {
        let s = seed.wrapping_add(feature as u64);
        let mut ev = Vec::new();
        match (feature, scheme) {
            (Feature::S1, _) => {
                ev.push(card_only_impersonation(scheme, params, size.attempts, s)?);
                if scheme == Scheme::Improved {
                    ev.push(game_evidence(GameKind::Alg4, cfg, s)?);
                    ev.push(game_evidence(GameKind::Alg5, cfg, s)?);
                }
            }
            (Feature::S2, _) => {
                ev.push(rogue_server_impersonation(scheme, params, size.attempts, s)?);
                if scheme == Scheme::Improved {
                    ev.push(game_evidence(GameKind::Alg6, cfg, s)?);
                }
            }
            (Feature::S3, _) => ev.push(flood_resistance(scheme, params, size.flood_worlds, s)?),
            (Feature::S4, _) => {
                ev.push(id_absence_evidence(scheme, cfg, size.flood_worlds, s)?);
                ev.push(alg1_evidence(scheme, cfg, size.sessions, s)?);
            }
            (Feature::S5, _) => ev.push(alg2_evidence(scheme, cfg, size.sessions, s)?),
            (Feature::S6, _) => ev.push(mutual_authentication(scheme, params, size.attempts, s)?),
            (Feature::S7, Scheme::Chen) => ev.push(alg1_evidence(scheme, cfg, size.sessions, s)?),
            (Feature::S7, Scheme::Improved) => {
                ev.push(alg1_evidence(scheme, cfg, size.sessions, s)?);
                ev.push(game_evidence(GameKind::Alg6, cfg, s)?);
            }
        }
        cells.push(Cell::from_evidence(feature, ev));
    }
    Ok(SecurityMatrixRow { scheme, cells })
}

/// Both in-scope rows.
pub fn security_matrix(cfg: &Config, size: MatrixSize, seed: u64) -> Result<Vec<SecurityMatrixRow>> {
    [Scheme::Chen, Scheme::Improved]
        .into_iter()
        .map(|s| security_row(s, cfg, size, seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (Config, MatrixSize) {
        let cfg = Config {
            toy_guesses: 1 << 12,
            ..Config::default()
        };
        let size = MatrixSize {
            sessions: 60,
            attempts: 20,
            flood_worlds: 3,
        };
        (cfg, size)
    }

    #[test]
    fn rows_match_the_table() {
        let (cfg, size) = small();
        for row in security_matrix(&cfg, size, 7).unwrap() {
            assert!(row.matches_expected(), "{}", row.to_lines().join("\n"));
            for c in &row.cells {
                assert!(!c.evidence.is_empty());
            }
        }
    }

    #[test]
    fn individual_checks() {
        let p = Params::default();
        for scheme in [Scheme::Chen, Scheme::Improved] {
            assert!(card_only_impersonation(scheme, p, 10, 1).unwrap().resisted);
            assert!(rogue_server_impersonation(scheme, p, 10, 1).unwrap().resisted);
            let f = flood_resistance(scheme, p, 2, 1).unwrap();
            assert!(f.resisted, "{}", f.detail);
            let m = mutual_authentication(scheme, p, 10, 1).unwrap();
            assert!(m.resisted, "{}", m.detail);
        }
    }

    #[test]
    fn expected_rows() {
        let chen: String = SecurityMatrixRow::expected(Scheme::Chen).iter().map(Verdict::symbol).collect();
        assert_eq!(chen, "✓✓✓✗✗✓✗");
        assert!(SecurityMatrixRow::expected(Scheme::Improved).iter().all(|v| *v == Verdict::Pass));
    }

    #[test]
    fn empty_cells_are_not_applicable() {
        assert_eq!(Cell::from_evidence(Feature::S1, vec![]).verdict, Verdict::NotApplicable);
        assert_eq!(serde_json::to_string(&Verdict::NotApplicable).unwrap(), "\"n/a\"");
    }
}
