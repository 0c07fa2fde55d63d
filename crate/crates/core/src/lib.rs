//! Executable lab for two hash-and-XOR mobile pay-TV authentication schemes:
//! the original protocol (`chen`), a repaired variant (`improved`), the
//! attack games that separate them (`adversary`), and the table generators
//! (`bench`, `matrix`).

pub mod adversary;
pub mod bench;
pub mod chen;
pub mod config;
pub mod error;
pub mod improved;
pub mod matrix;
pub mod model;
pub mod primitives;

pub use config::Config;
pub use error::{Error, Result};
pub use model::{Params, Phase, Role, Scheme, TokenChain};
pub use primitives::{HashMeter, Timestamp, Word};
