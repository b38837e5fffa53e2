//! Risk-sensitive average-cost semi-Markov games on finite state spaces.
//!
//! The crate computes the value and stationary saddle-point strategies of
//! the zero-sum game, stationary Nash equilibria of the non-zero-sum game,
//! and provides a Monte-Carlo simulator and brute-force references used to
//! certify both.
//!
//! The pipeline for the zero-sum game is:
//!
//! 1. [`transform::build_cost_table`] folds the immediate cost, the running
//!    cost over the sojourn and a pay rate `g` into a discrete one-step cost.
//! 2. [`discrete_solver::solve_discrete_game`] solves the multiplicative
//!    Shapley equation of that discrete game and returns its growth rate.
//! 3. [`zero_sum::solve_zero_sum`] searches for the `g` at which the growth
//!    rate vanishes; that `g` is the value.

pub mod discrete_solver;
pub mod error;
pub mod matrix_game;
pub mod model;
pub mod nash;
pub mod oracle;
pub mod quadrature;
pub mod rootfind;
pub mod simulator;
pub mod transform;
pub mod zero_sum;

pub use error::{Error, Result};
pub use model::{GameModel, Player, RunningCost, SojournDist, StationaryStrategy};
