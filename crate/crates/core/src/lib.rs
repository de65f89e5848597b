//! Bayesian Stackelberg Markov games (BSMGs).
//!
//! The crate is layered bottom-up:
//!
//! - [`game`] holds the game model, instance files, validation and random
//!   instance generation.
//! - [`lp`] is a dense two-phase simplex used by every exact solver.
//! - [`stage`] solves one-shot games: Bayesian strong Stackelberg equilibria
//!   by multiple LPs, the Harsanyi transformation, maximin and a small Nash
//!   solver.
//! - [`oracle`] plans on a fully known game with Stackelberg value iteration.
//! - [`env`] exposes simulators through a narrow public API.
//! - [`learn`] contains Bayesian Strong Stackelberg Q-learning and the
//!   baseline agents it is compared against.

pub mod env;
pub mod error;
pub mod game;
pub mod learn;
pub mod lp;
pub mod matrix;
pub mod oracle;
pub mod stage;

pub use error::{Error, Result};
pub use matrix::Matrix;

/// Absolute slack used when checking that a vector lies on the simplex.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// True when `x` is nonnegative and sums to one within [`SIMPLEX_TOL`].
pub fn on_simplex(x: &[f64]) -> bool {
    !x.is_empty()
        && x.iter().all(|&p| p.is_finite() && p >= -SIMPLEX_TOL)
        && (x.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
}
