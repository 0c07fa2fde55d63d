//! Hash-count benchmark: one honest registration and issue round per scheme,
//! read back from the meter.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adversary::world::{ChenWorld, ImprovedWorld, SecretBits};
use crate::adversary::trial_rng;
use crate::error::Result;
use crate::model::{login_schema, Params, Phase, Role, Scheme};
use crate::primitives::{HashMeter, Scope};

/// Cost of one hash, in hundredths of a microsecond.
pub const HASH_COST_CENTI_US: u64 = 13;

/// Formats hundredths of a microsecond as `0.39`.
pub fn micros(centi: u64) -> String {
    format!("{}.{:02}", centi / 100, centi % 100)
}

/// One row of the performance comparison. Times are derived from the
/// counts, never measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerfRow {
    pub scheme: Scheme,
    /// Hashes in registration, both parties.
    pub p1: u64,
    /// `p1` × 0.13 μs, in hundredths of a μs.
    pub p2_centi_us: u64,
    /// User-side hashes in the issue round.
    pub p3: u64,
    pub p4_centi_us: u64,
    /// Server-side hashes in the issue round.
    pub p5: u64,
    pub p6_centi_us: u64,
    /// Parameters stored on the smart card.
    pub p7: u64,
    /// Fields of the issue-phase login message.
    pub p8: u64,
    /// Largest login message over all phases.
    pub p8_operational: u64,
}

impl PerfRow {
    pub fn new(scheme: Scheme, p1: u64, p3: u64, p5: u64, p7: u64, p8: u64, p8_operational: u64) -> Self {
        PerfRow {
            scheme,
            p1,
            p2_centi_us: p1 * HASH_COST_CENTI_US,
            p3,
            p4_centi_us: p3 * HASH_COST_CENTI_US,
            p5,
            p6_centi_us: p5 * HASH_COST_CENTI_US,
            p7,
            p8,
            p8_operational,
        }
    }

    /// The row as printed in the comparison table.
    pub fn expected(scheme: Scheme) -> Self {
        match scheme {
            Scheme::Chen => PerfRow::new(scheme, 6, 7, 7, 4, 5, 5),
            Scheme::Improved => PerfRow::new(scheme, 3, 6, 4, 3, 4, 5),
        }
    }

    /// Compares the table columns; `p8_operational` is a footnote only.
    pub fn matches(&self, other: &PerfRow) -> bool {
        let cols = |r: &PerfRow| {
            (
                r.scheme,
                r.p1,
                r.p2_centi_us,
                r.p3,
                r.p4_centi_us,
                r.p5,
                r.p6_centi_us,
                r.p7,
                r.p8,
            )
        };
        cols(self) == cols(other)
    }

    pub fn to_line(&self) -> String {
        format!(
            "perf scheme={} P1={} P2={} P3={} P4={} P5={} P6={} P7={} P8={} (operational {})",
            self.scheme,
            self.p1,
            micros(self.p2_centi_us),
            self.p3,
            micros(self.p4_centi_us),
            self.p5,
            micros(self.p6_centi_us),
            self.p7,
            self.p8,
            self.p8_operational
        )
    }
}

fn max_login_fields(scheme: Scheme) -> u64 {
    [Phase::Issue, Phase::Subscription, Phase::Handoff]
        .into_iter()
        .filter_map(|p| login_schema(scheme, p))
        .map(|s| s.len() as u64)
        .max()
        .unwrap_or(0)
}

/// Runs one honest registration and issue round and tallies the meter.
pub fn bench_counts(scheme: Scheme, params: Params, seed: u64) -> Result<PerfRow> {
    let mut rng = trial_rng(seed, 0);
    let bits = SecretBits::full(params.width);
    let (meter, card_params, m1_fields): (HashMeter, usize, usize) = match scheme {
        Scheme::Chen => {
            let mut w = ChenWorld::plant(&mut rng, params, bits)?;
            w.issue(&mut rng)?;
            (w.meter.clone(), w.user.card.param_count(), w.logins()[0].0.field_count())
        }
        Scheme::Improved => {
            let mut w = ImprovedWorld::plant(&mut rng, params, bits)?;
            w.issue(&mut rng)?;
            (w.meter.clone(), w.user.card.param_count(), w.logins()[0].0.field_count())
        }
    };
    let count = |phase, role| meter.count(Scope::protocol(scheme, phase, role));
    Ok(PerfRow::new(
        scheme,
        meter.phase_total(scheme, Phase::Registration),
        count(Phase::Issue, Role::User),
        count(Phase::Issue, Role::Server),
        card_params as u64,
        m1_fields as u64,
        max_login_fields(scheme),
    ))
}

/// Mean wall-clock nanoseconds per honest issue round. Informational only.
pub fn wall_clock_issue_ns(scheme: Scheme, params: Params, rounds: u64, seed: u64) -> Result<u64> {
    let mut rng = trial_rng(seed, 0);
    let bits = SecretBits::full(params.width);
    let rounds = rounds.max(1);
    let start;
    match scheme {
        Scheme::Chen => {
            let mut w = ChenWorld::plant(&mut rng, params, bits)?;
            start = Instant::now();
            for _ in 0..rounds {
                w.issue(&mut rng)?;
            }
        }
        Scheme::Improved => {
            let mut w = ImprovedWorld::plant(&mut rng, params, bits)?;
            start = Instant::now();
            for _ in 0..rounds {
                w.issue(&mut rng)?;
            }
        }
    }
    Ok((start.elapsed().as_nanos() / rounds as u128) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_match_the_table() {
        for scheme in [Scheme::Chen, Scheme::Improved] {
            let row = bench_counts(scheme, Params::default(), 1).unwrap();
            assert!(row.matches(&PerfRow::expected(scheme)), "{}", row.to_line());
            assert_eq!(row.p8_operational, 5);
        }
    }

    #[test]
    fn derived_times() {
        let r = PerfRow::expected(Scheme::Improved);
        assert_eq!(
            [micros(r.p2_centi_us), micros(r.p4_centi_us), micros(r.p6_centi_us)],
            ["0.39", "0.78", "0.52"]
        );
        let c = PerfRow::expected(Scheme::Chen);
        assert_eq!(
            [micros(c.p2_centi_us), micros(c.p4_centi_us), micros(c.p6_centi_us)],
            ["0.78", "0.91", "0.91"]
        );
        assert_eq!(micros(260), "2.60");
    }

    #[test]
    fn counts_do_not_depend_on_width() {
        for width in [2, 16] {
            for scheme in [Scheme::Chen, Scheme::Improved] {
                let row = bench_counts(scheme, Params::with_width(width), 2).unwrap();
                assert!(row.matches(&PerfRow::expected(scheme)));
            }
        }
    }

    #[test]
    fn wall_clock_runs() {
        assert!(wall_clock_issue_ns(Scheme::Improved, Params::default(), 3, 0).is_ok());
    }
}
