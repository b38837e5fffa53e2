//! Equivalent discrete-time one-step cost of a semi-Markov transition.
//!
//! For a pay rate `g` the transformed cost of a cell is
//!
//! ```text
//! D_g(i, a, b) = C(i, a, b) + (1/theta) ln E[exp(theta (R(S) - g S))]
//! ```
//!
//! where `R(s)` is the running cost integrated over `[0, s]` and `S` has the
//! sojourn law of the cell. Zero-sum tables include `C` and use player 1's
//! running cost; per-player tables for the non-zero-sum game use that
//! player's running cost and no immediate cost.

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::model::{GameModel, Grid, Player, SCHEMA_VERSION};

/// Which cost a table is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Payoff {
    /// Immediate cost plus player 1's running cost.
    ZeroSum,
    /// The given player's running cost only.
    Player(Player),
}

impl Payoff {
    pub fn player(self) -> Player {
        match self {
            Payoff::ZeroSum => Player::One,
            Payoff::Player(p) => p,
        }
    }

    pub fn includes_immediate(self) -> bool {
        matches!(self, Payoff::ZeroSum)
    }
}

/// `D_g` for every admissible cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    pub values: Grid<f64>,
    pub g: f64,
    pub payoff: Payoff,
}

impl CostTable {
    pub fn player(&self) -> Player {
        self.payoff.player()
    }

    pub fn get(&self, i: usize, a: usize, b: usize) -> f64 {
        self.values[i][a][b]
    }

    /// Largest absolute entry.
    pub fn sup_norm(&self) -> f64 {
        self.entries().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |self - other|` over matching cells.
    pub fn distance(&self, other: &CostTable) -> f64 {
        self.entries()
            .zip(other.entries())
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().flatten().copied()
    }

    /// Same table with `c` added to every entry.
    pub fn shifted(&self, c: f64) -> CostTable {
        self.map(|v| v + c)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> CostTable {
        CostTable {
            values: self
                .values
                .iter()
                .map(|s| s.iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect())
                .collect(),
            g: self.g,
            payoff: self.payoff,
        }
    }

    /// Debug export: `values` as nested arrays `[state][action1][action2]`.
    pub fn to_json(&self, model: &GameModel) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "g": self.g,
            "player": self.player(),
            "zero_sum": self.payoff == Payoff::ZeroSum,
            "model_hash": model.hash(),
            "values": self.values,
        })
    }
}

/// `int_0^s rho^player(i, a, b)(t) dt`, exact.
pub fn integrated_running_cost(
    model: &GameModel,
    player: Player,
    i: usize,
    a: usize,
    b: usize,
    s: f64,
) -> Result<f64> {
    if !(0.0..=model.horizon_bound).contains(&s) {
        return Err(Error::Domain(format!(
            "sojourn length {s} outside [0, {}]",
            model.horizon_bound
        )));
    }
    Ok(model.running_cost(player)[i][a][b].integral(s))
}

/// `(1/theta) ln E[exp(theta (R(S) - g S))]` for the cell's sojourn law.
pub fn sojourn_log_mgf(
    model: &GameModel,
    player: Player,
    i: usize,
    a: usize,
    b: usize,
    g: f64,
) -> f64 {
    let theta = model.theta;
    let rc = &model.running_cost(player)[i][a][b];
    let log_e = model.sojourn[i][a][b]
        .log_expect_exp(model.horizon_bound, |s| theta * (rc.integral(s) - g * s));
    log_e / theta
}

/// `D_g` over all cells.
pub fn build_cost_table(model: &GameModel, payoff: Payoff, g: f64) -> CostTable {
    let player = payoff.player();
    let values = (0..model.n_states())
        .map(|i| {
            (0..model.actions1[i].len())
                .map(|a| {
                    (0..model.actions2[i].len())
                        .map(|b| {
                            let c = if payoff.includes_immediate() {
                                model.immediate(i, a, b)
                            } else {
                                0.0
                            };
                            c + sojourn_log_mgf(model, player, i, a, b, g)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    CostTable { values, g, payoff }
}
