//! Average-cost equation of the embedded discrete-time risk-sensitive game.
//!
//! For a cost table `D` the log-Shapley operator is
//!
//! ```text
//! T(h)(i) = (1/theta) ln val_i[ e^{theta D(i,a,b)} sum_j p_ij(a,b) e^{theta h(j)} ]
//! ```
//!
//! and the solver looks for `(mu, h)` with `mu + h = T(h)`. The same scheme
//! handles the single-controller problem (one player optimizes against a
//! fixed opponent) and plain policy evaluation (both strategies fixed).

use crate::error::{Error, Result};
use crate::matrix_game::{solve_matrix_game, MatrixGame};
use crate::model::{log_sum_exp, GameModel, Player, StationaryStrategy};
use crate::transform::CostTable;

/// Span tolerance of relative value iteration.
pub const SPAN_TOL: f64 = 1e-10;
/// Sweeps of plain relative value iteration before the fallback starts.
pub const MAX_RVI_SWEEPS: usize = 100_000;
const MAX_DISCOUNT_ITERS: usize = 1_000_000;
const DISCOUNT_TOL: f64 = 1e-12;
const MAX_BETA_EXPONENT: u32 = 40;
const SWEEPS_PER_BETA: usize = 20_000;
const KM_STEP: f64 = 0.5;
const MAX_KM_SWEEPS: usize = 1_000_000;
const HISTORY_KEEP: usize = 200;
/// Above this `theta (|D| + |h|)` the local matrix is built with a log offset.
pub const OVERFLOW_GUARD: f64 = 650.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Which optimization sits inside the operator.
#[derive(Debug, Clone, Copy)]
pub enum Operator<'a> {
    /// Local zero-sum matrix game in every state.
    Game,
    /// One player optimizes over pure actions against a fixed opponent.
    Single {
        opponent: &'a StationaryStrategy,
        player: Player,
        sense: Sense,
    },
    /// Both strategies fixed.
    Fixed {
        strategy1: &'a StationaryStrategy,
        strategy2: &'a StationaryStrategy,
    },
}

#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    pub mu: f64,
    pub h: Vec<f64>,
    pub strategy1: Option<StationaryStrategy>,
    pub strategy2: Option<StationaryStrategy>,
    pub iterations: usize,
    /// `max_i |mu + h(i) - T(h)(i)|`.
    pub residual: f64,
}

impl DiscreteSolution {
    pub fn strategy(&self, player: Player) -> Option<&StationaryStrategy> {
        match player {
            Player::One => self.strategy1.as_ref(),
            Player::Two => self.strategy2.as_ref(),
        }
    }
}

/// `M_i[a][b] = e^{theta D(i,a,b)} sum_j p_ij(a,b) e^{theta h(j)}`, possibly
/// divided by `e^{log_offset}`.
#[derive(Debug, Clone)]
pub struct LocalMatrix {
    pub game: MatrixGame,
    pub log_offset: f64,
}

/// `ln sum_j p_ij(a,b) e^{theta h(j)}` for every `(a, b)` of state `i`.
fn log_continuation(model: &GameModel, h: &[f64], i: usize) -> Vec<Vec<f64>> {
    let theta = model.theta;
    model.transition[i]
        .iter()
        .map(|row_a| {
            row_a
                .iter()
                .map(|p| {
                    log_sum_exp(
                        p.iter()
                            .zip(h)
                            .filter(|(&pj, _)| pj > 0.0)
                            .map(|(&pj, &hj)| pj.ln() + theta * hj),
                    )
                })
                .collect()
        })
        .collect()
}

/// `theta D(i,a,b) + ln sum_j p_ij(a,b) e^{theta h(j)}`.
fn log_entries(model: &GameModel, table: &CostTable, h: &[f64], i: usize) -> Vec<Vec<f64>> {
    let theta = model.theta;
    let mut cont = log_continuation(model, h, i);
    for (a, row) in cont.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            *v += theta * table.values[i][a][b];
        }
    }
    cont
}

pub fn shapley_local_matrix(
    model: &GameModel,
    table: &CostTable,
    h: &[f64],
    i: usize,
) -> LocalMatrix {
    let logs = log_entries(model, table, h, i);
    let d_norm = table.values[i].iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let h_norm = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let log_offset = if model.theta * (d_norm + h_norm) > OVERFLOW_GUARD {
        logs.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        0.0
    };
    let entries = logs
        .iter()
        .map(|row| row.iter().map(|v| (v - log_offset).exp()).collect())
        .collect();
    LocalMatrix {
        game: MatrixGame::new(entries).expect("local matrix entries are finite"),
        log_offset,
    }
}

fn row_log(probs: &[f64]) -> impl Iterator<Item = (usize, f64)> + '_ {
    probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(k, &p)| (k, p.ln()))
}

/// Log of the opponent-averaged payoff of each own pure action.
fn single_logs(
    logs: &[Vec<f64>],
    opponent: &[f64],
    player: Player,
) -> Vec<f64> {
    match player {
        Player::One => logs
            .iter()
            .map(|row| log_sum_exp(row_log(opponent).map(|(b, lp)| lp + row[b])))
            .collect(),
        Player::Two => (0..logs[0].len())
            .map(|b| log_sum_exp(row_log(opponent).map(|(a, lp)| lp + logs[a][b])))
            .collect(),
    }
}

fn pick(values: &[f64], sense: Sense) -> (f64, usize) {
    let mut best = (values[0], 0);
    for (k, &v) in values.iter().enumerate().skip(1) {
        let better = match sense {
            Sense::Minimize => v < best.0,
            Sense::Maximize => v > best.0,
        };
        if better {
            best = (v, k);
        }
    }
    best
}

/// Local choices made by the operator in one state.
enum Choice {
    Mixed(Vec<f64>, Vec<f64>),
    Pure(usize),
    None,
}

fn apply_state(
    model: &GameModel,
    table: &CostTable,
    op: &Operator,
    h: &[f64],
    i: usize,
) -> (f64, Choice) {
    let theta = model.theta;
    match op {
        Operator::Game => {
            let local = shapley_local_matrix(model, table, h, i);
            let sol = solve_matrix_game(&local.game);
            (
                (local.log_offset + sol.value.ln()) / theta,
                Choice::Mixed(sol.row_mix, sol.col_mix),
            )
        }
        Operator::Single {
            opponent,
            player,
            sense,
        } => {
            let logs = log_entries(model, table, h, i);
            let values = single_logs(&logs, opponent.row(i), *player);
            let (v, k) = pick(&values, *sense);
            (v / theta, Choice::Pure(k))
        }
        Operator::Fixed {
            strategy1,
            strategy2,
        } => {
            let logs = log_entries(model, table, h, i);
            let v = log_sum_exp(row_log(strategy1.row(i)).flat_map(|(a, la)| {
                let row = &logs[a];
                row_log(strategy2.row(i)).map(move |(b, lb)| la + lb + row[b])
            }));
            (v / theta, Choice::None)
        }
    }
}

/// One application of the operator.
pub fn apply_operator(model: &GameModel, table: &CostTable, op: &Operator, h: &[f64]) -> Vec<f64> {
    (0..model.n_states())
        .map(|i| apply_state(model, table, op, h, i).0)
        .collect()
}

/// `max_i |mu + h(i) - T(h)(i)|`.
pub fn optimality_residual(
    model: &GameModel,
    table: &CostTable,
    op: &Operator,
    mu: f64,
    h: &[f64],
) -> f64 {
    apply_operator(model, table, op, h)
        .iter()
        .zip(h)
        .fold(0.0, |m, (t, hi)| m.max((mu + hi - t).abs()))
}

fn span(v: &[f64]) -> (f64, f64) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    (min, max)
}

#[derive(Clone, Copy)]
enum Normalize {
    Max,
    At(usize),
}

impl Normalize {
    fn offset(self, v: &[f64]) -> f64 {
        match self {
            Normalize::Max => span(v).1,
            Normalize::At(k) => v[k],
        }
    }
}

struct Fixed {
    mu: f64,
    h: Vec<f64>,
    iterations: usize,
}

fn push_history(history: &mut Vec<f64>, s: f64) {
    if history.len() == 2 * HISTORY_KEEP {
        history.drain(..HISTORY_KEEP);
    }
    history.push(s);
}

/// Damped relative value iteration `h <- (1 - tau) h + tau (T(h) - c)`.
///
/// `tau = 1` is plain relative value iteration.
fn relative_value_iteration(
    model: &GameModel,
    table: &CostTable,
    op: &Operator,
    norm: Normalize,
    mut h: Vec<f64>,
    tau: f64,
    max_sweeps: usize,
    history: &mut Vec<f64>,
) -> Option<Fixed> {
    for k in 1..=max_sweeps {
        let th = apply_operator(model, table, op, &h);
        let diff: Vec<f64> = th.iter().zip(&h).map(|(t, x)| t - x).collect();
        let (lo, hi) = span(&diff);
        if !(lo.is_finite() && hi.is_finite()) {
            return None;
        }
        push_history(history, hi - lo);
        if hi - lo < SPAN_TOL {
            return Some(Fixed {
                mu: 0.5 * (lo + hi),
                h,
                iterations: k,
            });
        }
        let c = norm.offset(&th);
        h = h
            .iter()
            .zip(&th)
            .map(|(x, t)| (1.0 - tau) * x + tau * (t - c))
            .collect();
    }
    None
}

/// `V_beta` with `V <- T(beta V)` from `start`, to a relative sup-change of
/// `DISCOUNT_TOL`.
fn discounted_iterate(
    model: &GameModel,
    table: &CostTable,
    op: &Operator,
    beta: f64,
    start: Vec<f64>,
    max_iters: usize,
) -> std::result::Result<(Vec<f64>, usize), (Vec<f64>, f64)> {
    let mut v = start;
    let mut change = f64::INFINITY;
    for k in 1..=max_iters {
        let scaled: Vec<f64> = v.iter().map(|x| beta * x).collect();
        let next = apply_operator(model, table, op, &scaled);
        change = next
            .iter()
            .zip(&v)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()));
        let size = next.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        v = next;
        if change < DISCOUNT_TOL * size {
            return Ok((v, k));
        }
    }
    Err((v, change))
}

/// Fixed point of the discounted operator `V = T(beta V)`, from `V = 0`.
///
/// With `opponent` set, player `player`'s single-controller operator is
/// used instead of the local matrix game.
pub fn discounted_fixed_point(
    model: &GameModel,
    table: &CostTable,
    beta: f64,
    op: &Operator,
) -> Result<Vec<f64>> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("discount factor {beta} not in (0, 1)")));
    }
    discounted_iterate(model, table, op, beta, vec![0.0; model.n_states()], MAX_DISCOUNT_ITERS)
        .map(|(v, _)| v)
        .map_err(|(_, change)| {
            Error::solver(
                format!("discounted iteration at beta = {beta} did not converge"),
                change,
                vec![change],
            )
        })
}

/// Vanishing-discount estimate: `(1 - beta) max V_beta` extrapolated over the
/// last three `beta_n = 1 - 2^-n`, and the centered `V_beta` of the last one.
fn vanishing_discount(
    model: &GameModel,
    table: &CostTable,
    op: &Operator,
    norm: Normalize,
) -> Option<(f64, Vec<f64>)> {
    let mut v = vec![0.0; model.n_states()];
    let mut estimates: Vec<f64> = Vec::new();
    let mut h = None;
    for n in 1..=MAX_BETA_EXPONENT {
        let beta = 1.0 - 0.5f64.powi(n as i32);
        match discounted_iterate(model, table, op, beta, v.clone(), SWEEPS_PER_BETA) {
            Ok((next, _)) => {
                let c = norm.offset(&next);
                estimates.push((1.0 - beta) * span(&next).1);
                h = Some(next.iter().map(|x| x - c).collect::<Vec<f64>>());
                v = next;
            }
            Err(_) => break,
        }
    }
    let h = h?;
    let mu = match estimates.as_slice() {
        [.., a, b, c] => {
            // errors shrink like 2^-n: two Richardson levels
            let r1 = 2.0 * b - a;
            let r2 = 2.0 * c - b;
            (4.0 * r2 - r1) / 3.0
        }
        [.., c] => *c,
        [] => return None,
    };
    log::debug!(
        "vanishing discount: {} discount levels, extrapolated mu {mu:.12}",
        estimates.len()
    );
    Some((mu, h))
}

fn solve_with(
    model: &GameModel,
    table: &CostTable,
    op: &Operator,
    norm: Normalize,
) -> Result<Fixed> {
    let mut history = Vec::new();
    let n = model.n_states();
    if let Some(fixed) =
        relative_value_iteration(model, table, op, norm, vec![0.0; n], 1.0, MAX_RVI_SWEEPS, &mut history)
    {
        return Ok(fixed);
    }
    log::warn!(
        "relative value iteration stalled after {MAX_RVI_SWEEPS} sweeps (span {:e}); trying vanishing discount",
        history.last().copied().unwrap_or(f64::NAN)
    );
    let start = match vanishing_discount(model, table, op, norm) {
        Some((_, h)) => h,
        None => vec![0.0; n],
    };
    match relative_value_iteration(model, table, op, norm, start, KM_STEP, MAX_KM_SWEEPS, &mut history) {
        Some(mut fixed) => {
            fixed.iterations += MAX_RVI_SWEEPS;
            Ok(fixed)
        }
        None => Err(Error::solver(
            "relative value iteration and vanishing-discount fallback both failed",
            history.last().copied().unwrap_or(f64::NAN),
            history,
        )),
    }
}

fn finish(
    model: &GameModel,
    table: &CostTable,
    op: &Operator,
    fixed: Fixed,
) -> DiscreteSolution {
    let n = model.n_states();
    let mut th = vec![0.0; n];
    let mut rows1 = Vec::with_capacity(n);
    let mut rows2 = Vec::with_capacity(n);
    let mut pure = Vec::with_capacity(n);
    for (i, t) in th.iter_mut().enumerate() {
        let (v, choice) = apply_state(model, table, op, &fixed.h, i);
        *t = v;
        match choice {
            Choice::Mixed(r, c) => {
                rows1.push(r);
                rows2.push(c);
            }
            Choice::Pure(k) => pure.push(k),
            Choice::None => {}
        }
    }
    let residual = th
        .iter()
        .zip(&fixed.h)
        .fold(0.0f64, |m, (t, x)| m.max((fixed.mu + x - t).abs()));
    let (strategy1, strategy2) = match op {
        Operator::Game => (
            Some(StationaryStrategy::new(rows1)),
            Some(StationaryStrategy::new(rows2)),
        ),
        Operator::Single { player, .. } => {
            let s = Some(StationaryStrategy::pure(model, *player, &pure));
            match player {
                Player::One => (s, None),
                Player::Two => (None, s),
            }
        }
        Operator::Fixed {
            strategy1,
            strategy2,
        } => (Some((*strategy1).clone()), Some((*strategy2).clone())),
    };
    DiscreteSolution {
        mu: fixed.mu,
        h: fixed.h,
        strategy1,
        strategy2,
        iterations: fixed.iterations,
        residual,
    }
}

/// Solves `mu + h = T(h)` for the local matrix game; `max h = 0`.
pub fn solve_discrete_game(model: &GameModel, table: &CostTable) -> Result<DiscreteSolution> {
    let op = Operator::Game;
    let fixed = solve_with(model, table, &op, Normalize::Max)?;
    Ok(finish(model, table, &op, fixed))
}

/// Single-controller version: `player` optimizes (in direction `sense`)
/// against `opponent`; `h(i*) = 0` and the returned strategy is pure.
pub fn solve_discrete_mdp(
    model: &GameModel,
    table: &CostTable,
    opponent: &StationaryStrategy,
    player: Player,
    sense: Sense,
) -> Result<DiscreteSolution> {
    opponent.check(model, player.other())?;
    let op = Operator::Single {
        opponent,
        player,
        sense,
    };
    let fixed = solve_with(model, table, &op, Normalize::At(model.reference_state))?;
    Ok(finish(model, table, &op, fixed))
}

/// Growth rate and relative values of a fixed pair; `h(i*) = 0`.
pub fn evaluate_strategies(
    model: &GameModel,
    table: &CostTable,
    strategy1: &StationaryStrategy,
    strategy2: &StationaryStrategy,
) -> Result<DiscreteSolution> {
    strategy1.check(model, Player::One)?;
    strategy2.check(model, Player::Two)?;
    let op = Operator::Fixed {
        strategy1,
        strategy2,
    };
    let fixed = solve_with(model, table, &op, Normalize::At(model.reference_state))?;
    Ok(finish(model, table, &op, fixed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RunningCost, SojournDist};
    use crate::oracle::spectral_radius;
    use crate::transform::{build_cost_table, Payoff};
    use proptest::prelude::*;

    /// Model whose tables are only used for shape and transitions.
    fn shell(p: Vec<Vec<Vec<Vec<f64>>>>, n1: usize, n2: usize, theta: f64) -> GameModel {
        let n = p.len();
        GameModel {
            states: (0..n).map(|i| format!("s{i}")).collect(),
            actions1: vec![(0..n1).map(|a| format!("a{a}")).collect(); n],
            actions2: vec![(0..n2).map(|b| format!("b{b}")).collect(); n],
            theta,
            horizon_bound: 1.0,
            reference_state: 0,
            immediate_cost: None,
            running_cost1: vec![vec![vec![RunningCost::zero(); n2]; n1]; n],
            running_cost2: None,
            sojourn: vec![vec![vec![SojournDist::deterministic(1.0); n2]; n1]; n],
            transition: p,
        }
    }

    fn table(values: Vec<Vec<Vec<f64>>>) -> CostTable {
        CostTable {
            values,
            g: 0.0,
            payoff: Payoff::ZeroSum,
        }
    }

    fn uniform_p(n: usize, n1: usize, n2: usize) -> Vec<Vec<Vec<Vec<f64>>>> {
        vec![vec![vec![vec![1.0 / n as f64; n]; n2]; n1]; n]
    }

    #[test]
    fn local_matrix_examples() {
        let m = shell(uniform_p(2, 2, 2), 2, 2, 1.0);
        let t = table(vec![vec![vec![0.0; 2]; 2]; 2]);
        let local = shapley_local_matrix(&m, &t, &[0.0, 0.0], 0);
        assert_eq!(local.log_offset, 0.0);
        for row in local.game.entries() {
            for &v in row {
                assert!((v - 1.0).abs() < 1e-15);
            }
        }
        let m = shell(vec![vec![vec![vec![1.0]; 2]; 2]], 2, 2, 1.0);
        let c = vec![vec![vec![0.0, 2.0], vec![3.0, 1.0]]];
        let local = shapley_local_matrix(&m, &table(c.clone()), &[0.0], 0);
        for a in 0..2 {
            for b in 0..2 {
                let want = c[0][a][b].exp();
                assert!((local.game.get(a, b) - want).abs() < 1e-13 * want);
            }
        }
    }

    #[test]
    fn overflow_guard_offsets() {
        let m = shell(vec![vec![vec![vec![1.0]; 2]; 2]], 2, 2, 1.0);
        let c = vec![vec![vec![1000.0, 1002.0], vec![1003.0, 1001.0]]];
        let local = shapley_local_matrix(&m, &table(c), &[0.0], 0);
        assert_eq!(local.log_offset, 1003.0);
        let sol = solve_matrix_game(&local.game);
        let v = local.log_offset + sol.value.ln();
        let small = shapley_local_matrix(&m, &table(vec![vec![vec![0.0, 2.0], vec![3.0, 1.0]]]), &[0.0], 0);
        let v0 = solve_matrix_game(&small.game).value.ln();
        assert!((v - 1000.0 - v0).abs() < 1e-12);
    }

    #[test]
    fn constant_costs() {
        let m = shell(uniform_p(3, 2, 2), 2, 2, 0.7);
        let t = table(vec![vec![vec![1.25; 2]; 2]; 3]);
        let sol = solve_discrete_game(&m, &t).unwrap();
        assert!((sol.mu - 1.25).abs() < 1e-12);
        assert!(sol.h.iter().all(|x| x.abs() < 1e-12));
        assert!(sol.residual < 1e-10);
        let v = discounted_fixed_point(&m, &t, 0.9, &Operator::Game).unwrap();
        for x in v {
            assert!((x - 12.5).abs() < 1e-9);
        }
        let opp = StationaryStrategy::uniform(&m, Player::Two);
        let sol = solve_discrete_mdp(&m, &t, &opp, Player::One, Sense::Minimize).unwrap();
        assert!((sol.mu - 1.25).abs() < 1e-12);
        assert!(sol.h.iter().all(|x| x.abs() < 1e-12));
        assert!(sol.strategy2.is_none());
    }

    #[test]
    fn scalar_discounted_contraction() {
        let m = shell(vec![vec![vec![vec![1.0]]]], 1, 1, 2.0);
        let v = discounted_fixed_point(&m, &table(vec![vec![vec![-0.3]]]), 0.75, &Operator::Game)
            .unwrap();
        assert!((v[0] + 1.2).abs() < 1e-11);
        assert!(discounted_fixed_point(&m, &table(vec![vec![vec![0.0]]]), 1.0, &Operator::Game).is_err());
    }

    #[test]
    fn action_independent_costs_give_perron_root() {
        let p = vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3], vec![0.25, 0.25, 0.5]];
        let d = [0.4, -1.0, 2.0];
        let theta = 0.6;
        let m = shell(p.iter().map(|row| vec![vec![row.clone(); 2]; 2]).collect(), 2, 2, theta);
        let t = table(d.iter().map(|&x| vec![vec![x; 2]; 2]).collect());
        let sol = solve_discrete_game(&m, &t).unwrap();
        let q: Vec<Vec<f64>> = (0..3)
            .map(|i| p[i].iter().map(|pij| (theta * d[i]).exp() * pij).collect())
            .collect();
        let want = spectral_radius(&q).unwrap().ln() / theta;
        assert!((sol.mu - want).abs() < 1e-10, "{} vs {want}", sol.mu);
        assert!(sol.h.iter().copied().fold(f64::NEG_INFINITY, f64::max).abs() < 1e-15);
    }

    #[test]
    fn one_state_matrix_game() {
        let m = shell(vec![vec![vec![vec![1.0]; 2]; 2]], 2, 2, 1.0);
        let c = vec![vec![vec![0.0, 2.0], vec![3.0, 1.0]]];
        let sol = solve_discrete_game(&m, &table(c)).unwrap();
        let e = MatrixGame::new(vec![vec![1.0, 2f64.exp()], vec![3f64.exp(), 1f64.exp()]]).unwrap();
        let want = solve_matrix_game(&e).value.ln();
        assert!((sol.mu - want).abs() < 1e-12);
        // equalizing mix of the exponentiated game
        let s1 = sol.strategy1.unwrap();
        let (x0, e1, e2, e3) = (s1.probs[0][0], 1.0, 2f64.exp(), 3f64.exp());
        let want_x0 = (e3 - 1f64.exp()) / (e3 - 1f64.exp() + e2 - e1);
        assert!((x0 - want_x0).abs() < 1e-12);
    }

    #[test]
    fn periodic_chain_uses_fallback() {
        // deterministic swap between two states: plain iteration oscillates
        let p = vec![vec![vec![vec![0.0, 1.0]]], vec![vec![vec![1.0, 0.0]]]];
        let m = shell(p, 1, 1, 1.0);
        let t = table(vec![vec![vec![1.0]], vec![vec![3.0]]]);
        let sol = solve_discrete_game(&m, &t).unwrap();
        assert!((sol.mu - 2.0).abs() < 1e-9);
        assert!(sol.iterations > MAX_RVI_SWEEPS);
        assert!(sol.residual < 1e-9);
        assert!((sol.h[0] - sol.h[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn singleton_opponent_matches_game() {
        let p = vec![
            vec![vec![vec![0.3, 0.7]], vec![vec![0.9, 0.1]]],
            vec![vec![vec![0.5, 0.5]], vec![vec![0.2, 0.8]]],
        ];
        let m = shell(p, 2, 1, 0.8);
        let t = table(vec![vec![vec![1.0], vec![0.2]], vec![vec![-0.5], vec![0.7]]]);
        let game = solve_discrete_game(&m, &t).unwrap();
        let opp = StationaryStrategy::uniform(&m, Player::Two);
        let mdp = solve_discrete_mdp(&m, &t, &opp, Player::One, Sense::Minimize).unwrap();
        assert!((game.mu - mdp.mu).abs() < 1e-10);
        assert_eq!(mdp.h[0], 0.0);
        assert_eq!(game.strategy1.unwrap().as_pure(), mdp.strategy1.unwrap().as_pure());
    }

    #[test]
    fn mdp_matches_pure_policy_enumeration() {
        let p = vec![
            vec![
                vec![vec![0.3, 0.7], vec![0.6, 0.4]],
                vec![vec![0.5, 0.5], vec![0.2, 0.8]],
            ],
            vec![
                vec![vec![0.7, 0.3], vec![0.6, 0.4]],
                vec![vec![0.8, 0.2], vec![0.65, 0.35]],
            ],
        ];
        let m = shell(p, 2, 2, 0.4);
        let t = table(vec![
            vec![vec![1.0, 2.5], vec![3.0, 0.5]],
            vec![vec![0.5, 1.5], vec![2.0, 1.0]],
        ]);
        let opp = StationaryStrategy::new(vec![vec![0.3, 0.7], vec![0.6, 0.4]]);
        for (sense, better) in [(Sense::Minimize, -1.0), (Sense::Maximize, 1.0)] {
            let player = Player::One;
            let sol = solve_discrete_mdp(&m, &t, &opp, player, sense).unwrap();
            let mut best = f64::NAN;
            for a0 in 0..2 {
                for a1 in 0..2 {
                    let s1 = StationaryStrategy::pure(&m, player, &[a0, a1]);
                    let mu = crate::oracle::perron_mu(&m, &t, &s1, &opp).unwrap();
                    if best.is_nan() || better * (mu - best) > 0.0 {
                        best = mu;
                    }
                }
            }
            assert!((sol.mu - best).abs() < 1e-9, "{sense:?}: {} vs {best}", sol.mu);
        }
    }

    #[test]
    fn evaluation_matches_perron() {
        let p = vec![
            vec![vec![vec![0.3, 0.7], vec![0.6, 0.4]], vec![vec![0.5, 0.5], vec![0.2, 0.8]]],
            vec![vec![vec![0.7, 0.3], vec![0.6, 0.4]], vec![vec![0.8, 0.2], vec![0.65, 0.35]]],
        ];
        let m = shell(p, 2, 2, 0.9);
        let t = table(vec![
            vec![vec![1.0, -2.5], vec![3.0, 0.5]],
            vec![vec![0.5, 1.5], vec![-2.0, 1.0]],
        ]);
        let s1 = StationaryStrategy::new(vec![vec![0.1, 0.9], vec![0.5, 0.5]]);
        let s2 = StationaryStrategy::new(vec![vec![0.75, 0.25], vec![0.0, 1.0]]);
        let sol = evaluate_strategies(&m, &t, &s1, &s2).unwrap();
        let want = crate::oracle::perron_mu(&m, &t, &s1, &s2).unwrap();
        assert!((sol.mu - want).abs() < 1e-10);
        assert_eq!(sol.h[0], 0.0);
    }

    #[test]
    fn zero_sum_table_from_model_solves() {
        let mut m = shell(uniform_p(2, 2, 2), 2, 2, 0.5);
        m.immediate_cost = Some(vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]; 2]);
        let t = build_cost_table(&m, Payoff::ZeroSum, 0.0);
        let sol = solve_discrete_game(&m, &t).unwrap();
        assert!(sol.residual < 1e-10);
        // symmetric game: both players mix evenly
        for row in sol.strategy1.unwrap().probs.iter().chain(&sol.strategy2.unwrap().probs) {
            assert!((row[0] - 0.5).abs() < 1e-12);
        }
    }

    fn random_case() -> impl Strategy<Value = (GameModel, Vec<Vec<Vec<f64>>>)> {
        (1usize..=3, 1usize..=3, 1usize..=3, 0.1..2.0f64).prop_flat_map(|(n, n1, n2, theta)| {
            let rows = prop::collection::vec(
                prop::collection::vec(prop::collection::vec(prop::collection::vec(0.05..1.0f64, n), n2), n1),
                n,
            );
            let d = prop::collection::vec(
                prop::collection::vec(prop::collection::vec(-2.0..2.0f64, n2), n1),
                n,
            );
            (rows, d).prop_map(move |(raw, d)| {
                let p = raw
                    .into_iter()
                    .map(|s| {
                        s.into_iter()
                            .map(|a| {
                                a.into_iter()
                                    .map(|r| {
                                        let t: f64 = r.iter().sum();
                                        r.into_iter().map(|x| x / t).collect()
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect();
                (shell(p, n1, n2, theta), d)
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn shift_equivariance((m, d) in random_case(), c in -3.0..3.0f64) {
            let t = table(d);
            let base = solve_discrete_game(&m, &t).unwrap();
            let shifted = solve_discrete_game(&m, &t.shifted(c)).unwrap();
            prop_assert!((shifted.mu - base.mu - c).abs() <= 1e-8);
            for (x, y) in base.h.iter().zip(&shifted.h) {
                prop_assert!((x - y).abs() <= 1e-8);
            }
            prop_assert!(base.residual <= 1e-8);
        }

        #[test]
        fn nonexpansive_and_monotone((m, d) in random_case(), bump in prop::collection::vec(0.0..1.0f64, 27)) {
            let t = table(d);
            let mut k = 0;
            let bigger = CostTable {
                values: t.values.iter().map(|s| s.iter().map(|r| r.iter().map(|v| {
                    k += 1;
                    v + bump[(k - 1) % bump.len()]
                }).collect()).collect()).collect(),
                ..t.clone()
            };
            let a = solve_discrete_game(&m, &t).unwrap().mu;
            let b = solve_discrete_game(&m, &bigger).unwrap().mu;
            prop_assert!(b >= a - 1e-9);
            prop_assert!(b - a <= t.distance(&bigger) + 1e-9);
        }

        #[test]
        fn discounted_bound((m, d) in random_case(), beta in 0.1..0.95f64) {
            let t = table(d);
            let v = discounted_fixed_point(&m, &t, beta, &Operator::Game).unwrap();
            let bound = t.sup_norm() / (1.0 - beta);
            prop_assert!(v.iter().all(|x| x.abs() <= bound + 1e-9));
        }
    }
}
