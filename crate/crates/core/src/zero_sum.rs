//! Zero-sum semi-Markov game: value, saddle point and its certificate.
//!
//! The value `g` is the root of `g -> mu(D_g)`, the growth rate of the
//! discrete game built from the transformed cost at pay rate `g`. The
//! function is nonincreasing, so bracket expansion plus bisection finds it.

use serde_json::{json, Value};

use crate::discrete_solver::{solve_discrete_game, solve_discrete_mdp, DiscreteSolution, Sense};
use crate::error::{Error, Result};
use crate::model::{
    state_map, strategy_to_value, validate, CheckStatus, GameModel, Player, StationaryStrategy,
    SCHEMA_VERSION,
};
use crate::rootfind::{find_root, RootOptions};
use crate::transform::{build_cost_table, Payoff};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Ok,
    /// Irreducibility could not be established; the result is reported but
    /// the existence theory does not cover it.
    UnsupportedAssumptions,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Ok => "ok",
            SolveStatus::UnsupportedAssumptions => "unsupported-assumptions",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ZeroSumReport {
    pub g: f64,
    /// Relative values, `max h = 0`.
    pub h: Vec<f64>,
    pub strategy1: StationaryStrategy,
    pub strategy2: StationaryStrategy,
    pub residual: f64,
    pub mu: f64,
    pub bracket: (f64, f64),
    /// `g` minus player 1's best-response value against `strategy2`.
    pub gap1: f64,
    /// `g` minus player 2's best-response value against `strategy1`.
    pub gap2: f64,
    pub mu_trace: Vec<(f64, f64)>,
    pub iterations: usize,
    pub status: SolveStatus,
}

impl ZeroSumReport {
    pub fn to_json(&self, model: &GameModel) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "model_hash": model.hash(),
            "status": self.status.as_str(),
            "g": self.g,
            "h": state_map(model, &self.h),
            "strategy1": strategy_to_value(model, Player::One, &self.strategy1),
            "strategy2": strategy_to_value(model, Player::Two, &self.strategy2),
            "residual": self.residual,
            "mu": self.mu,
            "bracket": [self.bracket.0, self.bracket.1],
            "gap1": self.gap1,
            "gap2": self.gap2,
            "certificate": "stationary deviations only",
            "mu_trace": self.mu_trace.iter().map(|(g, mu)| json!([g, mu])).collect::<Vec<_>>(),
            "iterations": self.iterations,
        })
    }
}

fn tag_g(g: f64) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::SolverFailure {
            message,
            residual,
            history,
        } => Error::SolverFailure {
            message: format!("{message} (at g = {g})"),
            residual,
            history,
        },
        other => other,
    }
}

fn discrete_at(model: &GameModel, g: f64) -> Result<DiscreteSolution> {
    let table = build_cost_table(model, Payoff::ZeroSum, g);
    solve_discrete_game(model, &table).map_err(tag_g(g))
}

/// Growth rate of the discrete game with cost `D_g`.
pub fn mu_of_g(model: &GameModel, g: f64) -> Result<f64> {
    Ok(discrete_at(model, g)?.mu)
}

pub fn solve_zero_sum(model: &GameModel) -> Result<ZeroSumReport> {
    solve_zero_sum_with(model, &RootOptions::default())
}

/// Value and saddle point, with the bisection controlled by `opts`.
pub fn solve_zero_sum_with(model: &GameModel, opts: &RootOptions) -> Result<ZeroSumReport> {
    model.check()?;
    let report = validate(model);
    let status = if report.irreducibility_status == CheckStatus::Pass {
        SolveStatus::Ok
    } else {
        log::warn!("irreducibility not established; report marked unsupported-assumptions");
        SolveStatus::UnsupportedAssumptions
    };
    let root = find_root(opts, |g| {
        let sol = discrete_at(model, g)?;
        Ok((sol.mu, sol))
    })?;
    let sol = root.payload;
    let strategy1 = sol.strategy1.expect("game mode returns both strategies");
    let strategy2 = sol.strategy2.expect("game mode returns both strategies");
    let (gap1, gap2) = saddle_gaps(model, root.g, &strategy1, &strategy2)?;
    Ok(ZeroSumReport {
        g: root.g,
        h: sol.h,
        strategy1,
        strategy2,
        residual: sol.residual,
        mu: root.value,
        bracket: root.bracket,
        gap1,
        gap2,
        mu_trace: root.trace,
        iterations: sol.iterations,
        status,
    })
}

/// Value of the best stationary reply of `player` to `opponent` in the
/// zero-sum game (player 1 minimizes, player 2 maximizes).
pub fn best_reply_value(
    model: &GameModel,
    opponent: &StationaryStrategy,
    player: Player,
    start: f64,
) -> Result<f64> {
    let sense = match player {
        Player::One => Sense::Minimize,
        Player::Two => Sense::Maximize,
    };
    let root = find_root(&RootOptions::starting_at(start), |g| {
        let table = build_cost_table(model, Payoff::ZeroSum, g);
        let sol = solve_discrete_mdp(model, &table, opponent, player, sense).map_err(tag_g(g))?;
        Ok((sol.mu, ()))
    })?;
    Ok(root.g)
}

/// `(g - BR1(strategy2), g - BR2(strategy1))`.
///
/// At a saddle point both vanish. A positive `gap1` means `strategy2` lets
/// player 1 pay less than `g`; a negative `gap2` means `strategy1` lets
/// player 2 extract more than `g`.
pub fn saddle_gaps(
    model: &GameModel,
    g: f64,
    strategy1: &StationaryStrategy,
    strategy2: &StationaryStrategy,
) -> Result<(f64, f64)> {
    let br1 = best_reply_value(model, strategy2, Player::One, g)?;
    let br2 = best_reply_value(model, strategy1, Player::Two, g)?;
    Ok((g - br1, g - br2))
}

pub fn verify_saddle(model: &GameModel, report: &ZeroSumReport) -> Result<(f64, f64)> {
    saddle_gaps(model, report.g, &report.strategy1, &report.strategy2)
}
