//! Re-delivery of recorded logins against a head end that has moved on.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::world::{AnyHes, ChenWorld, ImprovedWorld, SecretBits};
use crate::adversary::{trial_rng, GameResult};
use crate::error::Result;
use crate::model::{Params, Phase, Scheme, Transcript};
use crate::primitives::{HashMeter, Timestamp};

/// Per-phase replay tallies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub attempts: u64,
    pub accepted: u64,
    /// Rejection reason (error variant name) → count.
    pub rejections: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub scheme: Scheme,
    pub offset: u64,
    pub result: GameResult,
    pub phases: BTreeMap<Phase, PhaseStats>,
}

impl ReplayReport {
    fn empty(scheme: Scheme, offset: u64) -> Self {
        ReplayReport {
            scheme,
            offset,
            result: GameResult::new(0, 0, 0),
            phases: BTreeMap::new(),
        }
    }

    fn merge(mut self, other: ReplayReport) -> ReplayReport {
        self.result = self.result.merge(other.result);
        for (phase, s) in other.phases {
            let mine = self.phases.entry(phase).or_default();
            mine.attempts += s.attempts;
            mine.accepted += s.accepted;
            for (k, v) in s.rejections {
                *mine.rejections.entry(k).or_default() += v;
            }
        }
        self
    }

    pub fn phase(&self, phase: Phase) -> PhaseStats {
        self.phases.get(&phase).cloned().unwrap_or_default()
    }

    pub fn to_lines(&self) -> Vec<String> {
        self.phases
            .iter()
            .map(|(phase, s)| {
                let reasons: Vec<String> = s.rejections.iter().map(|(k, v)| format!("{k}={v}")).collect();
                format!(
                    "replay scheme={} offset={} phase={} attempts={} accepted={} rejected[{}]",
                    self.scheme,
                    self.offset,
                    phase,
                    s.attempts,
                    s.accepted,
                    reasons.join(",")
                )
            })
            .collect()
    }
}

fn reason(err: &crate::error::Error) -> String {
    let dbg = format!("{err:?}");
    dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
}

/// Re-sends every recorded login at `T_1 + offset`, each against a fresh
/// copy of `hes` so one replay cannot disturb the next.
pub fn replay_harness(transcript: &Transcript, hes: &AnyHes, offset: u64, seed: u64) -> ReplayReport {
    let mut report = ReplayReport::empty(hes.scheme(), offset);
    let mut rng = trial_rng(seed, 0);
    let mut meter = HashMeter::new();
    let mut accepted = 0;
    let mut attempts = 0;
    for (m1, sent) in transcript.logins() {
        let mut target = hes.clone();
        let now = Timestamp(sent.0 + offset);
        let stats = report.phases.entry(m1.phase).or_default();
        stats.attempts += 1;
        attempts += 1;
        match target.respond(m1, now, &mut rng, &mut meter) {
            Ok(_) => {
                stats.accepted += 1;
                accepted += 1;
            }
            Err(e) => *stats.rejections.entry(reason(&e)).or_default() += 1,
        }
    }
    report.result = GameResult::new(attempts, accepted, 0);
    report
}

/// `runs` honest issue → subscription → hand-off histories, each replayed
/// against its own post-run head end.
pub fn replay_campaign(scheme: Scheme, runs: u64, offset: u64, params: Params, seed: u64) -> Result<ReplayReport> {
    let bits = SecretBits::full(params.width);
    (0..runs)
        .into_par_iter()
        .map(|i| -> Result<ReplayReport> {
            let mut rng = trial_rng(seed, i);
            let (transcript, hes) = match scheme {
                Scheme::Chen => {
                    let mut w = ChenWorld::plant(&mut rng, params, bits)?;
                    w.run_rounds(&mut rng, 3)?;
                    (w.chan.transcript().clone(), AnyHes::Chen(w.hes))
                }
                Scheme::Improved => {
                    let mut w = ImprovedWorld::plant(&mut rng, params, bits)?;
                    w.run_rounds(&mut rng, 3)?;
                    (w.chan.transcript().clone(), AnyHes::Improved(w.hes))
                }
            };
            Ok(replay_harness(&transcript, &hes, offset, seed ^ i))
        })
        .try_reduce(|| ReplayReport::empty(scheme, offset), |a, b| Ok(a.merge(b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stale_replays_are_all_rejected() {
        for scheme in [Scheme::Chen, Scheme::Improved] {
            let p = Params::default();
            let r = replay_campaign(scheme, 10, p.delta_t + 1, p, 1).unwrap();
            assert_eq!(r.result.trials, 30);
            assert_eq!(r.result.successes, 0);
            assert_eq!(r.phase(Phase::Issue).rejections.get("StaleTimestamp"), Some(&10));
        }
    }

    #[test]
    fn same_window_replays() {
        for scheme in [Scheme::Chen, Scheme::Improved] {
            let r = replay_campaign(scheme, 10, 0, Params::default(), 2).unwrap();
            assert_eq!(r.phase(Phase::Issue).accepted, 10);
            for phase in [Phase::Subscription, Phase::Handoff] {
                let s = r.phase(phase);
                assert_eq!(s.accepted, 0);
                assert_eq!(s.rejections.get("TokenMismatch"), Some(&10));
            }
        }
    }

    #[test]
    fn window_boundary_is_inclusive() {
        let p = Params::default();
        let r = replay_campaign(Scheme::Improved, 5, p.delta_t, p, 3).unwrap();
        assert_eq!(r.phase(Phase::Issue).accepted, 5);
    }
}
