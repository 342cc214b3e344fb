//! Universal outlier hypothesis testing on finite alphabets.
//!
//! - [`simplex`]: pmfs, types, and the divergences `D`, `B`, `C`.
//! - [`detectors`]: test statistics and decision rules.
//! - [`exponents`]: closed-form exponents, the constrained exponent programs,
//!   and the KL-ball lower bounds.
//! - [`oracle`]: exact error probabilities by type-class enumeration.
//! - [`sim`]: seeded Monte Carlo error estimates and exponent sweeps.

pub mod detectors;
pub mod error;
pub mod exponents;
pub mod oracle;
pub mod sim;
pub mod simplex;

pub use detectors::{
    Detector, HypothesisFamily, HypothesisId, Laws, ObservationMatrix, ScoreTable,
};
pub use error::{Error, Result};
pub use simplex::{Pmf, TypeVector};
