//! Records shared by both schemes: secrets, cards, server records, wire
//! messages, the public channel and the freshness window.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::primitives::{self, Clock, Timestamp, Word, DEFAULT_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Chen,
    Improved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Registration,
    Issue,
    Subscription,
    Handoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Server,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    UserToServer,
    ServerToUser,
}

macro_rules! text_enum {
    ($ty:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(&self) -> &'static str {
                match self { $($ty::$variant => $text),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($ty::$variant),)+
                    other => Err(Error::Parse(format!(
                        concat!("unknown ", stringify!($ty), " {:?}"), other
                    ))),
                }
            }
        }
    };
}

text_enum!(Scheme { Chen => "chen", Improved => "improved" });
text_enum!(Phase {
    Registration => "registration",
    Issue => "issue",
    Subscription => "subscription",
    Handoff => "handoff",
});
text_enum!(Role { User => "user", Server => "server" });
text_enum!(Direction { UserToServer => "u2s", ServerToUser => "s2u" });

/// Which previously issued token a hand-off proves possession of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenChain {
    Theta,
    #[default]
    Gamma,
}

text_enum!(TokenChain { Theta => "theta", Gamma => "gamma" });

/// Deployment parameters shared by every actor in one simulated world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    /// Word and digest width in bytes.
    pub width: usize,
    /// Accepted send/receive difference in ticks.
    pub delta_t: u64,
    pub token_chain: TokenChain,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            width: DEFAULT_WIDTH,
            delta_t: 2,
            token_chain: TokenChain::Gamma,
        }
    }
}

impl Params {
    pub fn with_width(width: usize) -> Self {
        Params {
            width,
            ..Params::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        primitives::check_width(self.width)
    }
}

/// `T_recv - T_send <= ΔT`.
pub fn check_window(t_send: Timestamp, t_recv: Timestamp, delta: u64) -> Result<()> {
    if t_recv < t_send {
        return Err(Error::ClockSkew {
            send: t_send.0,
            recv: t_recv.0,
        });
    }
    if t_recv.0 - t_send.0 <= delta {
        Ok(())
    } else {
        Err(Error::StaleTimestamp {
            send: t_send.0,
            recv: t_recv.0,
            delta,
        })
    }
}

/// `ID_i`, `PW_i` and the blinding number `b` a user chooses at registration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSecrets {
    pub id: Word,
    pub pw: Word,
    pub b: Word,
}

impl UserSecrets {
    pub fn random<R: RngCore + ?Sized>(rng: &mut R, width: usize) -> Self {
        UserSecrets {
            id: Word::random(rng, width),
            pw: Word::random(rng, width),
            b: Word::random(rng, width),
        }
    }
}

/// Server master secret `x`, key `y`, and the published `h(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerSecrets {
    pub x: Word,
    pub y: Word,
    pub hy: Word,
}

impl ServerSecrets {
    pub fn new(x: Word, y: Word) -> Self {
        ServerSecrets {
            x,
            y,
            hy: primitives::digest(y.width(), y.as_bytes()),
        }
    }

    pub fn random<R: RngCore + ?Sized>(rng: &mut R, width: usize) -> Self {
        let x = Word::random(rng, width);
        let y = Word::random(rng, width);
        ServerSecrets::new(x, y)
    }
}

/// Contents of an issued smart card, i.e. everything a power-analysis
/// adversary walks away with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmartCard {
    pub scheme: Scheme,
    /// `K`, Chen cards only.
    pub k: Option<Word>,
    pub r: Word,
    pub q: Word,
    pub b: Word,
}

impl SmartCard {
    /// Number of stored parameters.
    pub fn param_count(&self) -> usize {
        3 + usize::from(self.k.is_some())
    }
}

/// Chen server-side entry, keyed by the clear identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChenRecord {
    pub id: Word,
    /// `N`, the registration number.
    pub n_counter: u64,
    pub issued_theta: Option<Word>,
    pub issued_gamma: Option<Word>,
}

/// Improved-scheme entry, keyed by `Q_i ⊕ PWB_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImprovedRecord {
    pub q: Word,
    pub r: Word,
    /// Immutable index key `Q_i ⊕ PWB_i`.
    pub lookup_key: Word,
    pub issued_theta: Option<Word>,
    pub issued_gamma: Option<Word>,
    /// Last `PWB_i ⊕ Q_i ⊕ h(y‖R_i)` written by a hand-off. Audit only.
    pub handoff_tag: Option<Word>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ServerRecord {
    Chen(ChenRecord),
    Improved(ImprovedRecord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    /// `Θ`, issue phase.
    Theta,
    /// `γ`, subscription phase.
    Gamma,
    /// `γ_i`, hand-off phase.
    GammaI,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub value: Word,
    pub kind: TokenKind,
}

impl Token {
    pub fn new(value: Word, kind: TokenKind) -> Self {
        Token { value, kind }
    }

    pub fn for_phase(value: Word, phase: Phase) -> Self {
        let kind = match phase {
            Phase::Subscription => TokenKind::Gamma,
            Phase::Handoff => TokenKind::GammaI,
            _ => TokenKind::Theta,
        };
        Token { value, kind }
    }
}

/// Named message field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Field {
    /// Chen's masked `R_i` slot.
    R,
    /// Chen's hand-off token carrier `Z_i`.
    Z,
    Kn,
    /// Token-proof `Θ ⊕ Kn` / `γ ⊕ Kn` in improved subscription and hand-off.
    V,
    C,
    Cid,
    T1,
    N,
    D,
    E,
    F,
    T2,
}

text_enum!(Field {
    R => "R",
    Z => "Z",
    Kn => "Kn",
    V => "V",
    C => "C",
    Cid => "CID",
    T1 => "T1",
    N => "n",
    D => "D",
    E => "E",
    F => "F",
    T2 => "T2",
});

impl Field {
    pub fn is_time(&self) -> bool {
        matches!(self, Field::T1 | Field::T2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldValue {
    Word(Word),
    Time(Timestamp),
}

/// Login-direction field order for a (scheme, phase).
pub fn login_schema(scheme: Scheme, phase: Phase) -> Option<&'static [Field]> {
    use Field::*;
    match (scheme, phase) {
        (Scheme::Chen, Phase::Issue | Phase::Subscription) => Some(&[R, C, Cid, T1, N]),
        (Scheme::Chen, Phase::Handoff) => Some(&[Z, C, Cid, T1, N]),
        (Scheme::Improved, Phase::Issue) => Some(&[Kn, C, T1, N]),
        (Scheme::Improved, Phase::Subscription | Phase::Handoff) => Some(&[Kn, V, C, T1, N]),
        (_, Phase::Registration) => None,
    }
}

/// Response-direction field order for a phase.
pub fn response_schema(phase: Phase) -> Option<&'static [Field]> {
    use Field::*;
    match phase {
        Phase::Issue | Phase::Subscription => Some(&[D, E, T2]),
        Phase::Handoff => Some(&[D, F, T2]),
        Phase::Registration => None,
    }
}

/// `m_1`: a tagged record in scheme-definition field order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoginMessage {
    pub scheme: Scheme,
    pub phase: Phase,
    pub fields: Vec<(Field, FieldValue)>,
}

impl LoginMessage {
    pub fn get(&self, field: Field) -> Option<FieldValue> {
        self.fields
            .iter()
            .find(|(f, _)| *f == field)
            .map(|(_, v)| *v)
    }

    pub fn word(&self, field: Field) -> Result<Word> {
        match self.get(field) {
            Some(FieldValue::Word(w)) => Ok(w),
            _ => Err(Error::MalformedMessage(format!("missing word field {field}"))),
        }
    }

    pub fn time(&self, field: Field) -> Result<Timestamp> {
        match self.get(field) {
            Some(FieldValue::Time(t)) => Ok(t),
            _ => Err(Error::MalformedMessage(format!("missing time field {field}"))),
        }
    }

    /// Replaces a word field in place; used by tamper tests and attack harnesses.
    pub fn set_word(&mut self, field: Field, value: Word) -> Result<()> {
        match self.fields.iter_mut().find(|(f, _)| *f == field) {
            Some((_, v @ FieldValue::Word(_))) => {
                *v = FieldValue::Word(value);
                Ok(())
            }
            _ => Err(Error::MalformedMessage(format!("missing word field {field}"))),
        }
    }

    pub fn field_count(&self) -> usize {
        self.fields.len()
    }

    /// Checks field names, order and kinds against the scheme definition.
    pub fn validate(&self) -> Result<()> {
        let schema = login_schema(self.scheme, self.phase).ok_or(Error::UnsupportedPhase(self.phase))?;
        check_fields(&self.fields, schema)
    }
}

/// `m_2 = [D_i, E_i | F_i, T_2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseMessage {
    pub scheme: Scheme,
    pub phase: Phase,
    pub d: Word,
    pub e_or_f: Word,
    pub t2: Timestamp,
}

impl ResponseMessage {
    fn mask_field(&self) -> Field {
        if self.phase == Phase::Handoff {
            Field::F
        } else {
            Field::E
        }
    }

    pub fn fields(&self) -> Vec<(Field, FieldValue)> {
        vec![
            (Field::D, FieldValue::Word(self.d)),
            (self.mask_field(), FieldValue::Word(self.e_or_f)),
            (Field::T2, FieldValue::Time(self.t2)),
        ]
    }

    fn from_fields(scheme: Scheme, phase: Phase, fields: &[(Field, FieldValue)]) -> Result<Self> {
        let schema = response_schema(phase).ok_or(Error::UnsupportedPhase(phase))?;
        check_fields(fields, schema)?;
        let word = |i: usize| match fields[i].1 {
            FieldValue::Word(w) => w,
            FieldValue::Time(_) => unreachable!("schema checked"),
        };
        let t2 = match fields[2].1 {
            FieldValue::Time(t) => t,
            FieldValue::Word(_) => unreachable!("schema checked"),
        };
        Ok(ResponseMessage {
            scheme,
            phase,
            d: word(0),
            e_or_f: word(1),
            t2,
        })
    }
}

fn check_fields(fields: &[(Field, FieldValue)], schema: &[Field]) -> Result<()> {
    if fields.len() != schema.len() {
        return Err(Error::MalformedMessage(format!(
            "expected {} fields, got {}",
            schema.len(),
            fields.len()
        )));
    }
    for ((name, value), expected) in fields.iter().zip(schema) {
        if name != expected {
            return Err(Error::MalformedMessage(format!(
                "expected field {expected}, got {name}"
            )));
        }
        let ok = matches!(
            (expected.is_time(), value),
            (true, FieldValue::Time(_)) | (false, FieldValue::Word(_))
        );
        if !ok {
            return Err(Error::MalformedMessage(format!("field {name} has wrong kind")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum WireMessage {
    Login(LoginMessage),
    Response(ResponseMessage),
}

impl WireMessage {
    pub fn scheme(&self) -> Scheme {
        match self {
            WireMessage::Login(m) => m.scheme,
            WireMessage::Response(m) => m.scheme,
        }
    }

    pub fn phase(&self) -> Phase {
        match self {
            WireMessage::Login(m) => m.phase,
            WireMessage::Response(m) => m.phase,
        }
    }

    pub fn direction(&self) -> Direction {
        match self {
            WireMessage::Login(_) => Direction::UserToServer,
            WireMessage::Response(_) => Direction::ServerToUser,
        }
    }

    pub fn fields(&self) -> Vec<(Field, FieldValue)> {
        match self {
            WireMessage::Login(m) => m.fields.clone(),
            WireMessage::Response(m) => m.fields(),
        }
    }

    /// Word-valued fields only (timestamps excluded).
    pub fn words(&self) -> Vec<(Field, Word)> {
        self.fields()
            .into_iter()
            .filter_map(|(f, v)| match v {
                FieldValue::Word(w) => Some((f, w)),
                FieldValue::Time(_) => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub direction: Direction,
    pub phase: Phase,
    pub message: WireMessage,
    pub tick: Timestamp,
}

impl TranscriptEntry {
    /// One line: `scheme phase direction @tick name=value ...`.
    pub fn to_line(&self) -> String {
        let mut line = format!(
            "{} {} {} @{}",
            self.message.scheme(),
            self.phase,
            self.direction,
            self.tick
        );
        for (name, value) in self.message.fields() {
            match value {
                FieldValue::Word(w) => line.push_str(&format!(" {name}={w}")),
                FieldValue::Time(t) => line.push_str(&format!(" {name}={t}")),
            }
        }
        line
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let mut parts = line.split_whitespace();
        let mut next = |what: &str| {
            parts
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {what} in {line:?}")))
        };
        let scheme: Scheme = next("scheme")?.parse()?;
        let phase: Phase = next("phase")?.parse()?;
        let direction: Direction = next("direction")?.parse()?;
        let tick_s = next("tick")?;
        let tick = tick_s
            .strip_prefix('@')
            .and_then(|t| t.parse().ok())
            .map(Timestamp)
            .ok_or_else(|| Error::Parse(format!("bad tick {tick_s:?}")))?;
        let mut fields = Vec::new();
        for part in parts {
            let (name, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad field {part:?}")))?;
            let name: Field = name.parse()?;
            let value = if name.is_time() {
                FieldValue::Time(Timestamp(
                    value
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad time {value:?}")))?,
                ))
            } else {
                FieldValue::Word(Word::from_hex(value)?)
            };
            fields.push((name, value));
        }
        let message = match direction {
            Direction::UserToServer => {
                let m = LoginMessage {
                    scheme,
                    phase,
                    fields,
                };
                m.validate()?;
                WireMessage::Login(m)
            }
            Direction::ServerToUser => {
                WireMessage::Response(ResponseMessage::from_fields(scheme, phase, &fields)?)
            }
        };
        Ok(TranscriptEntry {
            direction,
            phase,
            message,
            tick,
        })
    }
}

/// Append-only log of everything sent on the public channel.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn logins(&self) -> impl Iterator<Item = (&LoginMessage, Timestamp)> {
        self.entries.iter().filter_map(|e| match &e.message {
            WireMessage::Login(m) => Some((m, e.tick)),
            WireMessage::Response(_) => None,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.to_line());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let entries = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(TranscriptEntry::parse_line)
            .collect::<Result<Vec<_>>>()?;
        Ok(Transcript { entries })
    }
}

/// The public channel: a transcript plus the simulation clock.
///
/// Every send is logged and costs one tick; delivery is unmodified.
#[derive(Debug, Clone, Default)]
pub struct Channel {
    pub clock: Clock,
    transcript: Transcript,
}

impl Channel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(tick: u64) -> Self {
        Channel {
            clock: Clock::starting_at(tick),
            transcript: Transcript::new(),
        }
    }

    pub fn send(&mut self, message: WireMessage) -> Result<WireMessage> {
        channel_send(&mut self.transcript, message.clone(), self.clock.now())?;
        self.clock.advance(1);
        Ok(message)
    }

    pub fn send_login(&mut self, m: LoginMessage) -> Result<LoginMessage> {
        match self.send(WireMessage::Login(m))? {
            WireMessage::Login(m) => Ok(m),
            WireMessage::Response(_) => unreachable!(),
        }
    }

    pub fn send_response(&mut self, m: ResponseMessage) -> Result<ResponseMessage> {
        match self.send(WireMessage::Response(m))? {
            WireMessage::Response(m) => Ok(m),
            WireMessage::Login(_) => unreachable!(),
        }
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }
}

/// Appends `message` to `transcript` after checking it against its schema.
pub fn channel_send(
    transcript: &mut Transcript,
    message: WireMessage,
    tick: Timestamp,
) -> Result<()> {
    if let WireMessage::Login(m) = &message {
        m.validate()?;
    }
    transcript.entries.push(TranscriptEntry {
        direction: message.direction(),
        phase: message.phase(),
        message,
        tick,
    });
    Ok(())
}
