//! Experiment configuration. Every key has a default, so an empty file (or
//! no file) is valid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Params, TokenChain};
use crate::primitives::check_width;

/// Environment variable consulted for the default master seed.
pub const SEED_ENV: &str = "PAYTV_SEED";
pub const DEFAULT_SEED: u64 = 20_240_602;

/// Bit-lengths of the guessed components for each toy game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyWidths {
    /// `(ID, x, PW, b)`.
    pub alg3: [u32; 4],
    /// `(PW, ID)`.
    pub alg4: [u32; 2],
    /// `ID`.
    pub alg5: u32,
    /// `ID`.
    pub alg6: u32,
}

impl Default for ToyWidths {
    fn default() -> Self {
        ToyWidths {
            alg3: [4, 4, 4, 4],
            alg4: [6, 6],
            alg5: 10,
            alg6: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Word width L in bytes.
    pub width: usize,
    /// Freshness window ΔT in ticks.
    pub delta_t: u64,
    pub token_chain: TokenChain,
    pub seed: u64,
    pub toy_widths: ToyWidths,
    /// Word widths the toy campaigns run at; 2 bytes makes collisions likely.
    pub toy_word_bytes: Vec<usize>,
    pub toy_guesses: u64,
    pub production_guesses: u64,
    /// Upper bound on guesses for any one campaign.
    pub max_guesses: u64,
    /// Oracle enumeration cap, as a power of two.
    pub oracle_cap_bits: u32,
}

impl Default for Config {
    fn default() -> Self {
        let p = Params::default();
        Config {
            width: p.width,
            delta_t: p.delta_t,
            token_chain: p.token_chain,
            seed: DEFAULT_SEED,
            toy_widths: ToyWidths::default(),
            toy_word_bytes: vec![32, 2],
            toy_guesses: 1 << 16,
            production_guesses: 1_000_000,
            max_guesses: 100_000_000,
            oracle_cap_bits: crate::adversary::oracle::DEFAULT_CAP_BITS,
        }
    }
}

impl Config {
    pub fn params(&self) -> Params {
        Params {
            width: self.width,
            delta_t: self.delta_t,
            token_chain: self.token_chain,
        }
    }

    pub fn params_at(&self, width: usize) -> Params {
        Params {
            width,
            ..self.params()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_width(self.width)?;
        for w in &self.toy_word_bytes {
            check_width(*w)?;
        }
        let t = &self.toy_widths;
        let all = t.alg3.iter().chain(&t.alg4).chain([&t.alg5, &t.alg6]);
        for &bits in all {
            if bits == 0 || bits > 32 {
                return Err(Error::Parse(format!("toy width {bits} outside 1..=32")));
            }
        }
        if self.oracle_cap_bits > 40 {
            return Err(Error::Parse("oracle_cap_bits above 40".into()));
        }
        Ok(())
    }
}
