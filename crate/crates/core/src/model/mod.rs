//! Game description, stationary strategies and their JSON formats.
//!
//! A [`GameModel`] is the finite-state semi-Markov game: per-state action
//! sets for both players, an optional immediate cost, polynomial running
//! costs, sojourn-time laws on `(0, horizon_bound]` and the controlled
//! transition law. Tables are indexed `[state][action1][action2]`.

mod io;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quadrature;

pub use io::{load_model, parse_model, parse_strategy, save_model, save_strategy};
pub(crate) use io::strategy_to_value;
pub use validate::{
    compute_m_rho, first_passage_moments, validate, Check, CheckStatus, FirstPassage,
    ValidationReport, MAX_ENUMERATED_PAIRS,
};

/// Tolerance on probability sums (transition rows, atom weights, mixes).
pub const PROB_TOL: f64 = 1e-12;

/// Highest polynomial degree accepted for running costs.
pub const MAX_DEGREE: usize = 8;

/// Report format version shared by every JSON report.
pub const SCHEMA_VERSION: u32 = 1;

/// Table indexed by `[state][action1][action2]`.
pub type Grid<T> = Vec<Vec<Vec<T>>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Player::One => 1,
            Player::Two => 2,
        }
    }
}

impl TryFrom<u8> for Player {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Player::One),
            2 => Ok(Player::Two),
            other => Err(format!("player must be 1 or 2, got {other}")),
        }
    }
}

impl From<Player> for u8 {
    fn from(p: Player) -> u8 {
        p.index()
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Polynomial running-cost rate `rho(t) = sum_k c_k t^k` on `[0, B]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunningCost {
    pub coefficients: Vec<f64>,
}

impl RunningCost {
    pub fn new(coefficients: Vec<f64>) -> Self {
        RunningCost { coefficients }
    }

    pub fn constant(c: f64) -> Self {
        RunningCost::new(vec![c])
    }

    pub fn zero() -> Self {
        RunningCost::new(vec![0.0])
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    /// Exact antiderivative from 0, `sum_k c_k s^(k+1) / (k+1)`.
    pub fn integral(&self, s: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * s + c / (k + 1) as f64)
            * s
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|&c| c == 0.0)
    }
}

/// Law of a sojourn time, supported on `(0, horizon_bound]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SojournDist {
    /// Finite list of `(s_k, w_k)` atoms.
    Atoms { atoms: Vec<(f64, f64)> },
    /// Uniform on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Exponential with the given rate, conditioned on `(0, horizon_bound]`.
    TruncatedExponential { rate: f64 },
}

impl SojournDist {
    pub fn deterministic(s: f64) -> Self {
        SojournDist::Atoms {
            atoms: vec![(s, 1.0)],
        }
    }

    /// Atom list with weights divided by their sum.
    pub fn atoms_normalized(atoms: Vec<(f64, f64)>) -> Self {
        let total: f64 = atoms.iter().map(|&(_, w)| w).sum();
        SojournDist::Atoms {
            atoms: atoms.into_iter().map(|(s, w)| (s, w / total)).collect(),
        }
    }

    /// Checks support and normalization against the horizon bound.
    pub fn check(&self, horizon: f64) -> std::result::Result<(), String> {
        match self {
            SojournDist::Atoms { atoms } => {
                if atoms.is_empty() {
                    return Err("atom list is empty".into());
                }
                for &(s, w) in atoms {
                    if !(s.is_finite() && w.is_finite()) {
                        return Err(format!("non-finite atom ({s}, {w})"));
                    }
                    if s <= 0.0 {
                        return Err(format!("atom at {s} is not positive"));
                    }
                    if s > horizon {
                        return Err(format!("atom at {s} exceeds horizon bound {horizon}"));
                    }
                    if w <= 0.0 {
                        return Err(format!("atom weight {w} is not positive"));
                    }
                }
                let total: f64 = atoms.iter().map(|&(_, w)| w).sum();
                if (total - 1.0).abs() > PROB_TOL {
                    return Err(format!("atom weights sum to {total}"));
                }
                Ok(())
            }
            SojournDist::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err("non-finite uniform bounds".into());
                }
                if !(0.0 <= *lo && lo < hi && *hi <= horizon) {
                    return Err(format!(
                        "uniform support [{lo}, {hi}] not inside [0, {horizon}] with lo < hi"
                    ));
                }
                Ok(())
            }
            SojournDist::TruncatedExponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(format!("rate {rate} is not a positive real"));
                }
                Ok(())
            }
        }
    }

    /// `log E[exp(f(S))]`, exact for atoms, 64-node Gauss-Legendre otherwise.
    ///
    /// Evaluated with a max-shift so large exponents do not overflow.
    pub fn log_expect_exp<F: Fn(f64) -> f64>(&self, horizon: f64, f: F) -> f64 {
        match self {
            SojournDist::Atoms { atoms } => {
                log_sum_exp(atoms.iter().map(|&(s, w)| w.ln() + f(s)))
            }
            SojournDist::Uniform { lo, hi } => {
                let rule = quadrature::gauss_legendre_64();
                let half = 0.5 * (hi - lo);
                let mid = 0.5 * (hi + lo);
                // density 1/(hi - lo) times Jacobian half => weight w/2
                log_sum_exp(
                    rule.iter()
                        .map(|&(x, w)| (0.5 * w).ln() + f(mid + half * x)),
                )
            }
            SojournDist::TruncatedExponential { rate } => {
                let rule = quadrature::gauss_legendre_64();
                let half = 0.5 * horizon;
                let log_norm = rate.ln() - (-(-rate * horizon).exp_m1()).ln();
                log_norm
                    + log_sum_exp(rule.iter().map(|&(x, w)| {
                        let s = half * (x + 1.0);
                        (w * half).ln() - rate * s + f(s)
                    }))
            }
        }
    }

    /// `E[g(S)]` for a nonnegative integrand, same integration rules.
    pub fn expect<F: Fn(f64) -> f64>(&self, horizon: f64, g: F) -> f64 {
        match self {
            SojournDist::Atoms { atoms } => atoms.iter().map(|&(s, w)| w * g(s)).sum(),
            SojournDist::Uniform { lo, hi } => {
                let half = 0.5 * (hi - lo);
                let mid = 0.5 * (hi + lo);
                quadrature::gauss_legendre_64()
                    .iter()
                    .map(|&(x, w)| 0.5 * w * g(mid + half * x))
                    .sum()
            }
            SojournDist::TruncatedExponential { rate } => {
                let half = 0.5 * horizon;
                let norm = rate / (-(-rate * horizon).exp_m1());
                norm * quadrature::gauss_legendre_64()
                    .iter()
                    .map(|&(x, w)| {
                        let s = half * (x + 1.0);
                        w * half * (-rate * s).exp() * g(s)
                    })
                    .sum::<f64>()
            }
        }
    }

    /// Inverse-CDF draw from a uniform variate `u` in `(0, 1]`.
    pub fn sample(&self, horizon: f64, u: f64) -> f64 {
        match self {
            SojournDist::Atoms { atoms } => {
                let mut acc = 0.0;
                for &(s, w) in atoms {
                    acc += w;
                    if u <= acc {
                        return s;
                    }
                }
                atoms.last().map(|&(s, _)| s).unwrap_or(horizon)
            }
            SojournDist::Uniform { lo, hi } => {
                let s = lo + u * (hi - lo);
                // u > 0 keeps s > 0 unless lo == 0 and u underflows
                if s > 0.0 {
                    s
                } else {
                    f64::MIN_POSITIVE
                }
            }
            SojournDist::TruncatedExponential { rate } => {
                let mass = -(-rate * horizon).exp_m1();
                let s = -(-u * mass).ln_1p() / rate;
                s.clamp(f64::MIN_POSITIVE, horizon)
            }
        }
    }
}

pub(crate) fn log_sum_exp<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let terms: Vec<f64> = terms.into_iter().collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|&t| (t - max).exp()).sum::<f64>().ln()
}

/// JSON object `state -> value`.
pub(crate) fn state_map(model: &GameModel, values: &[f64]) -> serde_json::Value {
    let mut m = serde_json::Map::new();
    for (name, v) in model.states.iter().zip(values) {
        m.insert(name.clone(), serde_json::json!(v));
    }
    serde_json::Value::Object(m)
}

/// Full game description.
///
/// Fields are public for programmatic construction; [`GameModel::check`]
/// reports every violated hard invariant and [`load_model`] refuses models
/// that fail it.
#[derive(Debug, Clone, PartialEq)]
pub struct GameModel {
    pub states: Vec<String>,
    pub actions1: Vec<Vec<String>>,
    pub actions2: Vec<Vec<String>>,
    pub theta: f64,
    pub horizon_bound: f64,
    pub reference_state: usize,
    pub immediate_cost: Option<Grid<f64>>,
    pub running_cost1: Grid<RunningCost>,
    /// Player 2's running cost; falls back to `running_cost1` when absent.
    pub running_cost2: Option<Grid<RunningCost>>,
    pub sojourn: Grid<SojournDist>,
    /// `transition[i][a][b][j]`
    pub transition: Grid<Vec<f64>>,
}

impl GameModel {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self, player: Player, i: usize) -> usize {
        match player {
            Player::One => self.actions1[i].len(),
            Player::Two => self.actions2[i].len(),
        }
    }

    pub fn actions(&self, player: Player) -> &[Vec<String>] {
        match player {
            Player::One => &self.actions1,
            Player::Two => &self.actions2,
        }
    }

    pub fn running_cost(&self, player: Player) -> &Grid<RunningCost> {
        match player {
            Player::One => &self.running_cost1,
            Player::Two => self.running_cost2.as_ref().unwrap_or(&self.running_cost1),
        }
    }

    pub fn immediate(&self, i: usize, a: usize, b: usize) -> f64 {
        self.immediate_cost.as_ref().map_or(0.0, |c| c[i][a][b])
    }

    /// Iterates over every admissible `(i, a, b)`.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.n_states()).flat_map(move |i| {
            let nb = self.actions2[i].len();
            (0..self.actions1[i].len()).flat_map(move |a| (0..nb).map(move |b| (i, a, b)))
        })
    }

    pub fn cell_name(&self, i: usize, a: usize, b: usize) -> String {
        format!(
            "({}, {}, {})",
            self.states[i], self.actions1[i][a], self.actions2[i][b]
        )
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    /// Same model with a different risk parameter.
    pub fn with_theta(&self, theta: f64) -> GameModel {
        GameModel {
            theta,
            ..self.clone()
        }
    }

    /// Number of pure stationary strategy pairs, saturating.
    pub fn pure_pair_count(&self) -> u128 {
        (0..self.n_states()).fold(1u128, |acc, i| {
            acc.saturating_mul((self.actions1[i].len() * self.actions2[i].len()) as u128)
        })
    }

    /// Every hard-invariant violation as `(check, location, detail)`.
    pub fn violations(&self) -> Vec<(String, String, String)> {
        let mut out = Vec::new();
        let mut push = |check: &str, loc: String, detail: String| {
            out.push((check.to_string(), loc, detail));
        };
        if !(self.theta.is_finite() && self.theta > 0.0) {
            push("theta", "theta".into(), format!("{} is not a positive real", self.theta));
        }
        if !(self.horizon_bound.is_finite() && self.horizon_bound > 0.0) {
            push(
                "horizon_bound",
                "horizon_bound".into(),
                format!("{} is not a positive real", self.horizon_bound),
            );
        }
        if self.states.is_empty() {
            push("states", "states".into(), "no states".into());
        }
        if self.reference_state >= self.n_states() {
            push(
                "reference_state",
                "reference_state".into(),
                format!("index {} out of range", self.reference_state),
            );
        }
        for i in 0..self.n_states() {
            if self.actions1[i].is_empty() {
                push("actions", format!("actions1[{}]", self.states[i]), "empty".into());
            }
            if self.actions2[i].is_empty() {
                push("actions", format!("actions2[{}]", self.states[i]), "empty".into());
            }
        }
        let horizon = self.horizon_bound;
        for (i, a, b) in self.cells() {
            let cell = self.cell_name(i, a, b);
            if let Some(c) = &self.immediate_cost {
                if !c[i][a][b].is_finite() {
                    push("immediate_cost", cell.clone(), "non-finite".into());
                }
            }
            for (player, grid) in [
                (1, Some(&self.running_cost1)),
                (2, self.running_cost2.as_ref()),
            ] {
                if let Some(grid) = grid {
                    let rc = &grid[i][a][b];
                    if rc.degree() > MAX_DEGREE {
                        push(
                            "running_cost",
                            format!("running_cost{player}{cell}"),
                            format!("degree {} exceeds {MAX_DEGREE}", rc.degree()),
                        );
                    }
                    if rc.coefficients.iter().any(|c| !c.is_finite()) {
                        push(
                            "running_cost",
                            format!("running_cost{player}{cell}"),
                            "non-finite coefficient".into(),
                        );
                    }
                }
            }
            if let Err(e) = self.sojourn[i][a][b].check(horizon) {
                push("sojourn", cell.clone(), e);
            }
            let row = &self.transition[i][a][b];
            if let Some(j) = row.iter().position(|&p| !(p.is_finite() && p >= 0.0)) {
                push(
                    "stochasticity",
                    cell.clone(),
                    format!("entry to {} is {}", self.states[j], row[j]),
                );
            } else {
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > PROB_TOL {
                    push(
                        "stochasticity",
                        cell.clone(),
                        format!("transition row sums to {total}"),
                    );
                }
            }
        }
        out
    }

    /// First hard-invariant violation as an error.
    pub fn check(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            None => Ok(()),
            Some((check, location, detail)) => Err(Error::invalid(check, location, detail)),
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let text = save_model(self);
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Per-state mixed action for one player.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryStrategy {
    pub probs: Vec<Vec<f64>>,
}

impl StationaryStrategy {
    pub fn new(probs: Vec<Vec<f64>>) -> Self {
        StationaryStrategy { probs }
    }

    pub fn uniform(model: &GameModel, player: Player) -> Self {
        let probs = model
            .actions(player)
            .iter()
            .map(|acts| vec![1.0 / acts.len() as f64; acts.len()])
            .collect();
        StationaryStrategy { probs }
    }

    /// Deterministic strategy playing `choice[i]` in state `i`.
    pub fn pure(model: &GameModel, player: Player, choice: &[usize]) -> Self {
        let probs = model
            .actions(player)
            .iter()
            .zip(choice)
            .map(|(acts, &c)| {
                let mut row = vec![0.0; acts.len()];
                row[c] = 1.0;
                row
            })
            .collect();
        StationaryStrategy { probs }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i]
    }

    /// Checks shape and probability constraints for `player` in `model`.
    pub fn check(&self, model: &GameModel, player: Player) -> Result<()> {
        if self.probs.len() != model.n_states() {
            return Err(Error::dimension(
                format!("strategy{player}"),
                format!(
                    "{} state rows, model has {}",
                    self.probs.len(),
                    model.n_states()
                ),
            ));
        }
        for (i, row) in self.probs.iter().enumerate() {
            let loc = format!("strategy{player}[{}]", model.states[i]);
            if row.len() != model.n_actions(player, i) {
                return Err(Error::dimension(
                    loc,
                    format!(
                        "{} probabilities for {} actions",
                        row.len(),
                        model.n_actions(player, i)
                    ),
                ));
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::invalid("strategy", loc, "negative or non-finite entry"));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > PROB_TOL {
                return Err(Error::invalid(
                    "strategy",
                    loc,
                    format!("probabilities sum to {total}"),
                ));
            }
        }
        Ok(())
    }

    /// `(1 - lambda) * self + lambda * other`, state by state.
    pub fn mix(&self, other: &StationaryStrategy, lambda: f64) -> StationaryStrategy {
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| {
                let row: Vec<f64> = p
                    .iter()
                    .zip(q)
                    .map(|(x, y)| (1.0 - lambda) * x + lambda * y)
                    .collect();
                let total: f64 = row.iter().sum();
                row.into_iter().map(|x| x / total).collect()
            })
            .collect();
        StationaryStrategy { probs }
    }

    /// Largest per-state total-variation distance.
    pub fn tv_distance(&self, other: &StationaryStrategy) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| 0.5 * p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Moves up to `amount` of probability from each state's most likely
    /// action to the next action (cyclically). Single-action states are
    /// left alone, so the total-variation distance is `amount` whenever some
    /// state has two or more actions and every largest entry is at least
    /// `amount`.
    pub fn shift_mass(&self, amount: f64) -> StationaryStrategy {
        let probs = self
            .probs
            .iter()
            .map(|row| {
                let mut row = row.clone();
                if row.len() > 1 {
                    let top = (0..row.len())
                        .fold(0, |best, k| if row[k] > row[best] { k } else { best });
                    let moved = amount.min(row[top]);
                    row[top] -= moved;
                    let next = (top + 1) % row.len();
                    row[next] += moved;
                }
                row
            })
            .collect();
        StationaryStrategy { probs }
    }

    /// Pure action per state when every row is a point mass.
    pub fn as_pure(&self) -> Option<Vec<usize>> {
        self.probs
            .iter()
            .map(|row| row.iter().position(|&p| p == 1.0))
            .collect()
    }
}
