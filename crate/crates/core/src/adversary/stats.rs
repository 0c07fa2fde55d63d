use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

/// Closed range of success counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: u64,
    pub hi: u64,
}

impl Interval {
    pub fn contains(&self, k: u64) -> bool {
        self.lo <= k && k <= self.hi
    }
}

/// Central interval holding at least `level` of the mass of
/// Binomial(`trials`, `p`): the `(1-level)/2` and `(1+level)/2` quantiles.
pub fn binomial_interval(trials: u64, p: f64, level: f64) -> Interval {
    assert!((0.0..=1.0).contains(&p), "probability out of range");
    assert!(level > 0.0 && level < 1.0, "level out of range");
    if trials == 0 || p == 0.0 {
        return Interval { lo: 0, hi: 0 };
    }
    if p == 1.0 {
        return Interval {
            lo: trials,
            hi: trials,
        };
    }
    let dist = Binomial::new(p, trials).expect("validated parameters");
    let tail = (1.0 - level) / 2.0;
    Interval {
        lo: quantile(&dist, trials, tail),
        hi: quantile(&dist, trials, 1.0 - tail),
    }
}

/// Smallest `k` with `P(X <= k) >= q`.
fn quantile(dist: &Binomial, trials: u64, q: f64) -> u64 {
    let (mut lo, mut hi) = (0, trials);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if dist.cdf(mid) >= q {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}
