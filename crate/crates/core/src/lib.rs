//! Random multiplicative functions: prime tables, Rademacher and Steinhaus
//! samplers, large-prime partial sums, truncated Euler products and the
//! Monte Carlo harness that checks moment and martingale inequalities.

pub mod accum;
pub mod error;
pub mod euler;
pub mod harness;
pub mod quad;
pub mod rmf;
pub mod sieve;
pub mod stats;
pub mod sums;

pub use error::{Error, Result};
pub use rmf::{derive_seed, ComplexValue, Model, SampledFunction};
pub use sieve::{Factorization, PrimeTables};
