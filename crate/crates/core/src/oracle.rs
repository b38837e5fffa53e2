//! Brute-force references: exact finite-horizon exponential cost, Perron
//! roots of fixed-strategy evaluation matrices, and grid search for matrix
//! games.

use crate::error::{Error, Result};
use crate::matrix_game::MatrixGame;
use crate::model::{log_sum_exp, GameModel, Player, StationaryStrategy};
use crate::rootfind::{find_root, Root, RootOptions};
use crate::transform::{build_cost_table, CostTable, Payoff};

const POWER_TOL: f64 = 1e-13;
const MAX_POWER_ITERS: usize = 10_000_000;
const MAX_EXACT_HORIZON: usize = 10_000;

/// Perron root of a nonnegative square matrix.
///
/// Power iteration on `I + A / s` (`s` the largest row sum), which is
/// primitive whenever `A` is irreducible, with Collatz-Wielandt bounds as
/// the stopping rule.
pub fn spectral_radius(matrix: &[Vec<f64>]) -> Result<f64> {
    let n = matrix.len();
    if n == 0 || matrix.iter().any(|r| r.len() != n) {
        return Err(Error::Domain("spectral radius needs a nonempty square matrix".into()));
    }
    if matrix.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Domain("spectral radius needs finite nonnegative entries".into()));
    }
    let s = matrix
        .iter()
        .map(|r| r.iter().sum::<f64>())
        .fold(0.0, f64::max);
    if s == 0.0 {
        return Err(Error::Domain("zero matrix has no Perron root".into()));
    }
    let mut x = vec![1.0; n];
    let mut last = f64::NAN;
    for _ in 0..MAX_POWER_ITERS {
        let y: Vec<f64> = (0..n)
            .map(|i| x[i] + matrix[i].iter().zip(&x).map(|(a, xj)| a * xj).sum::<f64>() / s)
            .collect();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (yi, xi) in y.iter().zip(&x) {
            if *xi > 0.0 {
                let r = yi / xi;
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        let est = 0.5 * (lo + hi);
        let norm = y.iter().copied().fold(0.0, f64::max);
        x = y.into_iter().map(|v| v / norm).collect();
        if hi - lo < POWER_TOL * est || (est - last).abs() < 1e-3 * POWER_TOL * est {
            return Ok((est - 1.0) * s);
        }
        last = est;
    }
    Err(Error::solver(
        "power iteration did not converge",
        f64::NAN,
        Vec::new(),
    ))
}

/// `ln Q` with `Q_ij = sum_{a,b} psi(a|i) phi(b|i) e^{theta D(i,a,b)} p_ij(a,b)`.
pub fn log_evaluation_matrix(
    model: &GameModel,
    table: &CostTable,
    strategy1: &StationaryStrategy,
    strategy2: &StationaryStrategy,
) -> Vec<Vec<f64>> {
    let n = model.n_states();
    let theta = model.theta;
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut terms = Vec::new();
                    for (a, &pa) in strategy1.row(i).iter().enumerate() {
                        for (b, &pb) in strategy2.row(i).iter().enumerate() {
                            let p = model.transition[i][a][b][j];
                            if pa > 0.0 && pb > 0.0 && p > 0.0 {
                                terms.push(pa.ln() + pb.ln() + theta * table.values[i][a][b] + p.ln());
                            }
                        }
                    }
                    log_sum_exp(terms)
                })
                .collect()
        })
        .collect()
}

/// `(1/theta) ln rho(Q)` for a fixed strategy pair.
pub fn perron_mu(
    model: &GameModel,
    table: &CostTable,
    strategy1: &StationaryStrategy,
    strategy2: &StationaryStrategy,
) -> Result<f64> {
    let logs = log_evaluation_matrix(model, table, strategy1, strategy2);
    let shift = logs.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let q: Vec<Vec<f64>> = logs
        .iter()
        .map(|r| r.iter().map(|v| (v - shift).exp()).collect())
        .collect();
    Ok((spectral_radius(&q)?.ln() + shift) / model.theta)
}

/// `ln E_start[exp(theta sum_{k<n} D(X_k, A_k, B_k))]` by exact forward
/// recursion in log space.
pub fn exact_exp_cost(
    model: &GameModel,
    table: &CostTable,
    strategy1: &StationaryStrategy,
    strategy2: &StationaryStrategy,
    start: usize,
    n: usize,
) -> Result<f64> {
    if n > MAX_EXACT_HORIZON {
        return Err(Error::Domain(format!("horizon {n} exceeds {MAX_EXACT_HORIZON}")));
    }
    if start >= model.n_states() {
        return Err(Error::Domain(format!("start state {start} out of range")));
    }
    let logs = log_evaluation_matrix(model, table, strategy1, strategy2);
    let states = model.n_states();
    let mut v = vec![f64::NEG_INFINITY; states];
    v[start] = 0.0;
    for _ in 0..n {
        v = (0..states)
            .map(|j| log_sum_exp((0..states).map(|i| v[i] + logs[i][j])))
            .collect();
    }
    Ok(log_sum_exp(v))
}

/// Root in `g` of the fixed-pair growth rate, through the Perron route.
///
/// This is the pair's risk-sensitive average cost for the given payoff.
pub fn evaluation_root(
    model: &GameModel,
    strategy1: &StationaryStrategy,
    strategy2: &StationaryStrategy,
    payoff: Payoff,
    opts: &RootOptions,
) -> Result<Root<()>> {
    strategy1.check(model, Player::One)?;
    strategy2.check(model, Player::Two)?;
    find_root(opts, |g| {
        let table = build_cost_table(model, payoff, g);
        Ok((perron_mu(model, &table, strategy1, strategy2)?, ()))
    })
}

fn check_grid(game: &MatrixGame, grid_points: usize) -> Result<usize> {
    let ok = |k: usize| (2..=4).contains(&k);
    if !ok(game.rows()) || !ok(game.cols()) {
        return Err(Error::Domain(format!(
            "grid search supports 2 to 4 actions per player, got {}x{}",
            game.rows(),
            game.cols()
        )));
    }
    if grid_points < 101 {
        return Err(Error::Domain(format!("grid needs at least 101 points, got {grid_points}")));
    }
    Ok(grid_points - 1)
}

/// Calls `f` on every mix `k / steps` with `k` a composition of `steps`.
fn for_each_grid_mix(parts: usize, steps: usize, mut f: impl FnMut(&[f64])) {
    fn rec(k: &mut Vec<usize>, left: usize, parts: usize, steps: usize, f: &mut dyn FnMut(&[f64])) {
        if k.len() + 1 == parts {
            k.push(left);
            let mix: Vec<f64> = k.iter().map(|&c| c as f64 / steps as f64).collect();
            f(&mix);
            k.pop();
            return;
        }
        for c in 0..=left {
            k.push(c);
            rec(k, left - c, parts, steps, f);
            k.pop();
        }
    }
    rec(&mut Vec::with_capacity(parts), steps, parts, steps, &mut f);
}

/// `min` over grid row mixes of the best pure column payoff.
pub fn grid_minimax(game: &MatrixGame, grid_points: usize) -> Result<f64> {
    let steps = check_grid(game, grid_points)?;
    let mut best = f64::INFINITY;
    for_each_grid_mix(game.rows(), steps, |x| {
        let v = game.col_payoffs(x).into_iter().fold(f64::NEG_INFINITY, f64::max);
        best = best.min(v);
    });
    Ok(best)
}

/// `max` over grid column mixes of the best pure row payoff.
pub fn grid_maximin(game: &MatrixGame, grid_points: usize) -> Result<f64> {
    let steps = check_grid(game, grid_points)?;
    let mut best = f64::NEG_INFINITY;
    for_each_grid_mix(game.cols(), steps, |y| {
        let v = game.row_payoffs(y).into_iter().fold(f64::INFINITY, f64::min);
        best = best.max(v);
    });
    Ok(best)
}
