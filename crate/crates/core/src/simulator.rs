//! Monte-Carlo simulation of the semi-Markov game under stationary
//! strategies.
//!
//! Every path owns a ChaCha8 stream selected by its index, so results do
//! not depend on how paths are scheduled across threads.

use std::fmt::Write as _;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{GameModel, Player, StationaryStrategy, SCHEMA_VERSION};

/// Two-sided 99% standard normal quantile.
const Z99: f64 = 2.5758293035489;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Record {
    pub x: usize,
    pub a: usize,
    pub b: usize,
    /// Sojourn `S_n`.
    pub s: f64,
    /// Jump time `T_n`.
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Epochs `0..=n_t`, all with `T_n <= t_max`.
    pub records: Vec<Record>,
    pub t_max: f64,
    pub n_t: usize,
}

fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

fn categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = k;
            if u < acc {
                return k;
            }
        }
    }
    last
}

/// Runs one path, calling `visit` for every epoch with `T_n <= t_max`.
fn walk(
    model: &GameModel,
    strategy1: &StationaryStrategy,
    strategy2: &StationaryStrategy,
    start: usize,
    t_max: f64,
    rng: &mut ChaCha8Rng,
    mut visit: impl FnMut(Record),
) {
    let mut x = start;
    let mut t = 0.0;
    loop {
        let a = categorical(strategy1.row(x), rng.random::<f64>());
        let b = categorical(strategy2.row(x), rng.random::<f64>());
        let u = 1.0 - rng.random::<f64>();
        let s = model.sojourn[x][a][b].sample(model.horizon_bound, u);
        visit(Record { x, a, b, s, t });
        let next = t + s;
        if next > t_max {
            return;
        }
        x = categorical(&model.transition[x][a][b], rng.random::<f64>());
        t = next;
    }
}

fn check_inputs(
    model: &GameModel,
    strategy1: &StationaryStrategy,
    strategy2: &StationaryStrategy,
    start: usize,
    t_max: f64,
) -> Result<()> {
    strategy1.check(model, Player::One)?;
    strategy2.check(model, Player::Two)?;
    if start >= model.n_states() {
        return Err(Error::Domain(format!("start state {start} out of range")));
    }
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::Domain(format!("time horizon {t_max} is not positive")));
    }
    Ok(())
}

/// One path up to the first jump after `t_max`; path index 0 of `seed`.
pub fn simulate_trajectory(
    model: &GameModel,
    strategy1: &StationaryStrategy,
    strategy2: &StationaryStrategy,
    start: usize,
    t_max: f64,
    seed: u64,
) -> Result<Trajectory> {
    check_inputs(model, strategy1, strategy2, start, t_max)?;
    let mut records = Vec::new();
    let mut rng = path_rng(seed, 0);
    walk(model, strategy1, strategy2, start, t_max, &mut rng, |r| records.push(r));
    let n_t = records.len() - 1;
    Ok(Trajectory {
        records,
        t_max,
        n_t,
    })
}

/// Cost of a single epoch: the immediate cost in zero-sum mode plus the
/// running cost over the part of the sojourn before `t_max`.
fn epoch_cost(model: &GameModel, r: &Record, t_max: f64, player: Player, zero_sum: bool) -> f64 {
    let rho = if zero_sum { Player::One } else { player };
    let elapsed = r.s.min(t_max - r.t);
    let running = model.running_cost(rho)[r.x][r.a][r.b].integral(elapsed);
    if zero_sum {
        model.immediate(r.x, r.a, r.b) + running
    } else {
        running
    }
}

/// Total cost up to `t_max` along a trajectory.
///
/// Zero-sum mode charges the immediate cost at every epoch `0..=n_t` and
/// player 1's running cost; otherwise only `player`'s running cost.
pub fn accumulate_cost(model: &GameModel, traj: &Trajectory, player: Player, zero_sum: bool) -> f64 {
    traj.records
        .iter()
        .map(|r| epoch_cost(model, r, traj.t_max, player, zero_sum))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JEstimate {
    pub schema_version: u32,
    pub point: f64,
    /// Approximate 99% interval from the delta method on the log-mean.
    pub ci99: (f64, f64),
    pub n_paths: usize,
    pub t: f64,
    /// `ln` of the sample mean of `exp(theta C_t)`.
    pub log_mean: f64,
    pub seed: u64,
    pub player: Player,
    pub zero_sum: bool,
}

#[derive(Debug, Clone)]
pub struct EstimateRequest<'a> {
    pub strategy1: &'a StationaryStrategy,
    pub strategy2: &'a StationaryStrategy,
    pub start: usize,
    pub t: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub player: Player,
    pub zero_sum: bool,
}

/// `(1 / (theta t)) ln mean(exp(theta C_t))` over independent paths.
pub fn estimate_j(model: &GameModel, req: &EstimateRequest) -> Result<JEstimate> {
    check_inputs(model, req.strategy1, req.strategy2, req.start, req.t)?;
    if req.n_paths < 100 {
        return Err(Error::Domain(format!("need at least 100 paths, got {}", req.n_paths)));
    }
    let theta = model.theta;
    let exponents: Vec<f64> = (0..req.n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(req.seed, k);
            let mut cost = 0.0;
            walk(model, req.strategy1, req.strategy2, req.start, req.t, &mut rng, |r| {
                cost += epoch_cost(model, &r, req.t, req.player, req.zero_sum);
            });
            theta * cost
        })
        .collect();
    let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Overflow(
            "path cost exponent is not finite; use a smaller theta * t".into(),
        ));
    }
    let n = req.n_paths as f64;
    let weights: Vec<f64> = exponents.iter().map(|x| (x - max).exp()).collect();
    let mean_w = weights.iter().sum::<f64>() / n;
    let var_w = weights.iter().map(|w| (w - mean_w).powi(2)).sum::<f64>() / (n - 1.0);
    let log_mean = max + mean_w.ln();
    let se_log = (var_w / n).sqrt() / mean_w;
    if !(log_mean.is_finite() && se_log.is_finite()) {
        return Err(Error::Overflow(
            "log-mean of exp(theta C_t) is not finite; use a smaller theta * t".into(),
        ));
    }
    let scale = theta * req.t;
    let point = log_mean / scale;
    let half = Z99 * se_log / scale;
    Ok(JEstimate {
        schema_version: SCHEMA_VERSION,
        point,
        ci99: (point - half, point + half),
        n_paths: req.n_paths,
        t: req.t,
        log_mean,
        seed: req.seed,
        player: req.player,
        zero_sum: req.zero_sum,
    })
}

/// CSV with columns `n,X,A,B,S,T`, using state and action names.
pub fn trajectory_csv(model: &GameModel, traj: &Trajectory) -> String {
    let mut out = String::from("n,X,A,B,S,T\n");
    for (n, r) in traj.records.iter().enumerate() {
        let _ = writeln!(
            out,
            "{n},{},{},{},{},{}",
            model.states[r.x], model.actions1[r.x][r.a], model.actions2[r.x][r.b], r.s, r.t
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRow {
    pub n: usize,
    pub empirical: f64,
    pub bound: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub schema_version: u32,
    pub alpha: f64,
    pub r_alpha: u64,
    pub t: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub rows: Vec<TailRow>,
    pub violations: usize,
}

/// Smallest integer `r >= 1` with `sup_{i,a,b} E[exp(-r S)] <= alpha`.
pub fn r_alpha(model: &GameModel, alpha: f64) -> Result<u64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha {alpha} not in (0, 1)")));
    }
    let horizon = model.horizon_bound;
    let sup = |r: u64| {
        model
            .cells()
            .map(|(i, a, b)| model.sojourn[i][a][b].expect(horizon, |s| (-(r as f64) * s).exp()))
            .fold(0.0, f64::max)
    };
    let ok = |r: u64| sup(r) <= alpha * (1.0 + 1e-12);
    if ok(1) {
        return Ok(1);
    }
    let mut hi = 2u64;
    while !ok(hi) {
        if hi >= 1 << 60 {
            return Err(Error::Domain(
                "sojourn laws put too much mass near zero for a finite r_alpha".into(),
            ));
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Empirical `P[N_t >= n]` under uniform strategies from the reference
/// state against the bound `alpha^n exp(r_alpha t)`.
pub fn tail_diagnostic(
    model: &GameModel,
    alpha: f64,
    t: f64,
    n_paths: usize,
    seed: u64,
) -> Result<TailReport> {
    let r = r_alpha(model, alpha)?;
    if n_paths == 0 {
        return Err(Error::Domain("need at least one path".into()));
    }
    let s1 = StationaryStrategy::uniform(model, Player::One);
    let s2 = StationaryStrategy::uniform(model, Player::Two);
    check_inputs(model, &s1, &s2, model.reference_state, t)?;
    let counts: Vec<usize> = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(seed, k);
            let mut epochs = 0usize;
            walk(model, &s1, &s2, model.reference_state, t, &mut rng, |_| epochs += 1);
            epochs - 1
        })
        .collect();
    let max_n = counts.iter().copied().max().unwrap_or(0);
    let total = n_paths as f64;
    let mut at_least = vec![0usize; max_n + 2];
    for &c in &counts {
        at_least[c] += 1;
    }
    for n in (0..=max_n).rev() {
        at_least[n] += at_least[n + 1];
    }
    let rows: Vec<TailRow> = (1..=max_n)
        .map(|n| {
            let empirical = at_least[n] as f64 / total;
            let bound = (n as f64 * alpha.ln() + r as f64 * t).exp();
            let violation = bound < 1.0
                && empirical - bound > 3.0 * (bound * (1.0 - bound) / total).sqrt();
            TailRow {
                n,
                empirical,
                bound,
                violation,
            }
        })
        .collect();
    let violations = rows.iter().filter(|r| r.violation).count();
    Ok(TailReport {
        schema_version: SCHEMA_VERSION,
        alpha,
        r_alpha: r,
        t,
        n_paths,
        seed,
        rows,
        violations,
    })
}
