//! Finite two-person zero-sum matrix games in mixed strategies.
//!
//! The row player picks a mixed row `psi` and minimizes `psi^T M phi`; the
//! column player picks `phi` and maximizes it. Games are solved by the
//! textbook linear program after scaling and shifting the matrix to
//! positive entries, using the simplex method with Bland's rule.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    entries: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameSolution {
    pub value: f64,
    pub row_mix: Vec<f64>,
    pub col_mix: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Minimizing row player.
    Row,
    /// Maximizing column player.
    Column,
}

impl MatrixGame {
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self> {
        if entries.is_empty() || entries[0].is_empty() {
            return Err(Error::Domain("matrix game needs at least one row and column".into()));
        }
        let n = entries[0].len();
        if entries.iter().any(|r| r.len() != n) {
            return Err(Error::Domain("matrix game rows have different lengths".into()));
        }
        if entries.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix game has non-finite entries".into()));
        }
        Ok(MatrixGame { entries })
    }

    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> usize {
        self.entries[0].len()
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r][c]
    }

    /// `x^T M y`.
    pub fn payoff(&self, x: &[f64], y: &[f64]) -> f64 {
        self.entries
            .iter()
            .zip(x)
            .map(|(row, &xr)| xr * row.iter().zip(y).map(|(m, yc)| m * yc).sum::<f64>())
            .sum()
    }

    /// Payoff of each pure row against `y`.
    pub fn row_payoffs(&self, y: &[f64]) -> Vec<f64> {
        self.entries
            .iter()
            .map(|row| row.iter().zip(y).map(|(m, yc)| m * yc).sum())
            .collect()
    }

    /// Payoff of each pure column against `x`.
    pub fn col_payoffs(&self, x: &[f64]) -> Vec<f64> {
        (0..self.cols())
            .map(|c| self.entries.iter().zip(x).map(|(row, xr)| row[c] * xr).sum())
            .collect()
    }

    /// `min_r max_c M[r][c]`.
    pub fn pure_minimax(&self) -> f64 {
        self.entries
            .iter()
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min)
    }

    /// `max_c min_r M[r][c]`.
    pub fn pure_maximin(&self) -> f64 {
        (0..self.cols())
            .map(|c| self.entries.iter().map(|row| row[c]).fold(f64::INFINITY, f64::min))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn max_abs(&self) -> f64 {
        self.entries.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Optimal pure reply to `opponent_mix` and its payoff.
///
/// `Side::Row` minimizes over rows against a column mix, `Side::Column`
/// maximizes over columns against a row mix. Ties go to the lowest index.
pub fn best_response(game: &MatrixGame, opponent_mix: &[f64], side: Side) -> Result<(f64, usize)> {
    let (payoffs, want) = match side {
        Side::Row => (game.row_payoffs(opponent_mix), game.cols()),
        Side::Column => (game.col_payoffs(opponent_mix), game.rows()),
    };
    if opponent_mix.len() != want {
        return Err(Error::Domain(format!(
            "opponent mix has {} entries, expected {want}",
            opponent_mix.len()
        )));
    }
    let mut best = (payoffs[0], 0);
    for (k, &v) in payoffs.iter().enumerate().skip(1) {
        let better = match side {
            Side::Row => v < best.0,
            Side::Column => v > best.0,
        };
        if better {
            best = (v, k);
        }
    }
    Ok(best)
}

const PIVOT_EPS: f64 = 1e-12;

/// Value and one optimal mixed strategy per player.
pub fn solve_matrix_game(game: &MatrixGame) -> GameSolution {
    let (m, n) = (game.rows(), game.cols());
    if m == 1 || n == 1 {
        return solve_degenerate(game);
    }
    let scale = match game.max_abs() {
        s if s > 0.0 => s,
        _ => 1.0,
    };
    let min = game
        .entries
        .iter()
        .flatten()
        .fold(f64::INFINITY, |acc, &v| acc.min(v / scale));
    let shift = 1.0 - min;
    // maximize 1^T x subject to M'^T x <= 1, x >= 0; one constraint per column
    let width = m + n;
    let mut tab: Vec<Vec<f64>> = (0..n)
        .map(|c| {
            let mut row = vec![0.0; width + 1];
            for r in 0..m {
                row[r] = game.entries[r][c] / scale + shift;
            }
            row[m + c] = 1.0;
            row[width] = 1.0;
            row
        })
        .collect();
    // reduced costs; objective value kept in the last slot
    let mut obj = vec![0.0; width + 1];
    obj[..m].fill(1.0);
    let mut basis: Vec<usize> = (m..width).collect();

    let mut pivots = 0usize;
    while let Some(enter) = (0..width).find(|&k| obj[k] > PIVOT_EPS) {
        let mut leave: Option<usize> = None;
        for r in 0..n {
            let a = tab[r][enter];
            if a > PIVOT_EPS {
                let ratio = tab[r][width] / a;
                leave = match leave {
                    None => Some(r),
                    Some(l) => {
                        let best = tab[l][width] / tab[l][enter];
                        if ratio < best - 1e-15 || (ratio <= best + 1e-15 && basis[r] < basis[l]) {
                            Some(r)
                        } else {
                            Some(l)
                        }
                    }
                };
            }
        }
        // the feasible region is bounded because every entry of M' is >= 1
        let Some(l) = leave else { break };
        pivot(&mut tab, &mut obj, l, enter);
        basis[l] = enter;
        pivots += 1;
        log::trace!("pivot {pivots}: enter {enter}, leave row {l}, objective {:.15}", -obj[width]);
        if log::log_enabled!(log::Level::Trace) {
            for row in &tab {
                log::trace!("  {row:?}");
            }
        }
    }

    let mut x = vec![0.0; m];
    for (r, &v) in basis.iter().enumerate() {
        if v < m {
            x[v] = tab[r][width].max(0.0);
        }
    }
    let y: Vec<f64> = (0..n).map(|c| (-obj[m + c]).max(0.0)).collect();
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let row_mix: Vec<f64> = x.iter().map(|v| v / sx).collect();
    let col_mix: Vec<f64> = y.iter().map(|v| v / sy).collect();
    let value = (1.0 / sx - shift) * scale;
    GameSolution {
        value,
        row_mix,
        col_mix,
    }
}

fn pivot(tab: &mut [Vec<f64>], obj: &mut [f64], l: usize, enter: usize) {
    let p = tab[l][enter];
    for v in tab[l].iter_mut() {
        *v /= p;
    }
    tab[l][enter] = 1.0;
    let pivot_row = tab[l].clone();
    for (r, row) in tab.iter_mut().enumerate() {
        if r == l {
            continue;
        }
        let f = row[enter];
        if f != 0.0 {
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            row[enter] = 0.0;
        }
    }
    let f = obj[enter];
    for (v, pv) in obj.iter_mut().zip(&pivot_row) {
        *v -= f * pv;
    }
    obj[enter] = 0.0;
}

/// One row or one column: the other player simply optimizes.
fn solve_degenerate(game: &MatrixGame) -> GameSolution {
    let (m, n) = (game.rows(), game.cols());
    if m == 1 {
        let (value, c) = best_response(game, &[1.0], Side::Column).expect("1-row game");
        let mut col_mix = vec![0.0; n];
        col_mix[c] = 1.0;
        GameSolution {
            value,
            row_mix: vec![1.0],
            col_mix,
        }
    } else {
        let (value, r) = best_response(game, &[1.0], Side::Row).expect("1-column game");
        let mut row_mix = vec![0.0; m];
        row_mix[r] = 1.0;
        GameSolution {
            value,
            row_mix,
            col_mix: vec![1.0],
        }
    }
}
