//! Non-zero-sum game: single-controller best responses and damped
//! best-response iteration towards a stationary Nash equilibrium.
//!
//! Each player minimizes their own risk-sensitive average running cost.
//! A best response against a fixed opponent is the root in `g` of the
//! single-controller growth rate built from that player's cost table.

use serde_json::{json, Value};

use crate::discrete_solver::{apply_operator, solve_discrete_mdp, Operator, Sense};
use crate::error::{Error, Result};
use crate::model::{
    compute_m_rho, log_sum_exp, state_map, strategy_to_value, validate, CheckStatus, GameModel, Player,
    StationaryStrategy, SCHEMA_VERSION,
};
use crate::oracle::evaluation_root;
use crate::rootfind::{find_root, RootOptions};
use crate::transform::{build_cost_table, Payoff};

/// Gap tolerance for declaring convergence.
pub const GAP_TOL: f64 = 1e-6;
/// Residual tolerance of the coupled optimality equations.
pub const COUPLED_TOL: f64 = 1e-7;
const HITTING_TOL: f64 = 1e-12;
const MAX_HITTING_ITERS: usize = 1_000_000;
const DIVERGENCE_BOUND: f64 = 1e100;

#[derive(Debug, Clone)]
pub struct BestResponse {
    pub player: Player,
    pub g: f64,
    /// Relative values with `h(i*) = 0`.
    pub h: Vec<f64>,
    /// Pure optimal reply.
    pub strategy: StationaryStrategy,
    pub residual: f64,
    pub mu_trace: Vec<(f64, f64)>,
}

pub fn best_response(
    model: &GameModel,
    opponent: &StationaryStrategy,
    player: Player,
) -> Result<BestResponse> {
    best_response_from(model, opponent, player, 0.0)
}

/// Best response with the root search started at `start`.
pub fn best_response_from(
    model: &GameModel,
    opponent: &StationaryStrategy,
    player: Player,
    start: f64,
) -> Result<BestResponse> {
    opponent.check(model, player.other())?;
    let root = find_root(&RootOptions::starting_at(start), |g| {
        let table = build_cost_table(model, Payoff::Player(player), g);
        let sol = solve_discrete_mdp(model, &table, opponent, player, Sense::Minimize)?;
        Ok((sol.mu, sol))
    })?;
    let sol = root.payload;
    let strategy = sol
        .strategy(player)
        .cloned()
        .expect("single-controller solve returns the controlled strategy");
    Ok(BestResponse {
        player,
        g: root.g,
        h: sol.h,
        strategy,
        residual: sol.residual,
        mu_trace: root.trace,
    })
}

/// Everything needed to judge a strategy pair.
#[derive(Debug, Clone)]
struct Certificate {
    g: [f64; 2],
    gap: [f64; 2],
    br: [BestResponse; 2],
    residual: f64,
}

fn certify(
    model: &GameModel,
    s1: &StationaryStrategy,
    s2: &StationaryStrategy,
    starts: [f64; 2],
) -> Result<Certificate> {
    let br1 = best_response_from(model, s2, Player::One, starts[0])?;
    let br2 = best_response_from(model, s1, Player::Two, starts[1])?;
    let mut g = [0.0; 2];
    let mut gap = [0.0; 2];
    let mut residual: f64 = 0.0;
    for (k, (player, br)) in [(Player::One, &br1), (Player::Two, &br2)].into_iter().enumerate() {
        g[k] = evaluation_root(model, s1, s2, Payoff::Player(player), &RootOptions::starting_at(br.g))?.g;
        gap[k] = g[k] - br.g;
        // how far the pair's own strategy is from attaining the minimum
        let table = build_cost_table(model, Payoff::Player(player), br.g);
        let opponent = if player == Player::One { s2 } else { s1 };
        let best = apply_operator(
            model,
            &table,
            &Operator::Single {
                opponent,
                player,
                sense: Sense::Minimize,
            },
            &br.h,
        );
        let own = apply_operator(
            model,
            &table,
            &Operator::Fixed {
                strategy1: s1,
                strategy2: s2,
            },
            &br.h,
        );
        let defect = best
            .iter()
            .zip(&own)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        residual = residual.max(br.residual).max(defect);
    }
    Ok(Certificate {
        g,
        gap,
        br: [br1, br2],
        residual,
    })
}

impl Certificate {
    fn accepted(&self) -> bool {
        self.gap.iter().all(|x| x.abs() <= GAP_TOL) && self.residual <= COUPLED_TOL
    }
}

#[derive(Debug, Clone)]
pub struct NashOptions {
    pub damping: f64,
    pub max_iters: usize,
    pub init1: Option<StationaryStrategy>,
    pub init2: Option<StationaryStrategy>,
}

impl Default for NashOptions {
    fn default() -> Self {
        NashOptions {
            damping: 0.5,
            max_iters: 500,
            init1: None,
            init2: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NashReport {
    pub strategy1: StationaryStrategy,
    pub strategy2: StationaryStrategy,
    /// Each player's evaluation root under the returned pair.
    pub g1: f64,
    pub g2: f64,
    /// Best-response relative values, `h(i*) = 0`.
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    /// `g_m` minus player `m`'s best-response value.
    pub gap1: f64,
    pub gap2: f64,
    /// Largest residual of the two coupled optimality equations.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub damping: f64,
    pub init: [String; 2],
    /// Outcome of the first-passage moment check the existence theory needs.
    pub assumption3: CheckStatus,
}

impl NashReport {
    pub fn to_json(&self, model: &GameModel) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "model_hash": model.hash(),
            "converged": self.converged,
            "iterations": self.iterations,
            "damping": self.damping,
            "init": { "strategy1": self.init[0], "strategy2": self.init[1] },
            "g1": self.g1,
            "g2": self.g2,
            "h1": state_map(model, &self.h1),
            "h2": state_map(model, &self.h2),
            "strategy1": strategy_to_value(model, Player::One, &self.strategy1),
            "strategy2": strategy_to_value(model, Player::Two, &self.strategy2),
            "gap1": self.gap1,
            "gap2": self.gap2,
            "residual": self.residual,
            "certificate": "stationary deviations only",
            "assumption3_status": self.assumption3,
        })
    }
}

/// Damped simultaneous best-response iteration.
///
/// Besides the damped iterate, every round also checks the undamped pair
/// of best responses; if that pure pair is already an equilibrium it is
/// returned. Non-convergence is reported, not raised.
pub fn solve_nash(model: &GameModel, opts: &NashOptions) -> Result<NashReport> {
    model.check()?;
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::Domain(format!("damping {} not in (0, 1]", opts.damping)));
    }
    let label = |s: &Option<StationaryStrategy>| {
        if s.is_some() { "given" } else { "uniform" }.to_string()
    };
    let init = [label(&opts.init1), label(&opts.init2)];
    let assumption3 = validate(model).assumption3_status;
    if assumption3 != CheckStatus::Pass {
        log::warn!("first-passage moment bound does not hold; equilibrium existence is not guaranteed");
    }
    let mut s1 = opts
        .init1
        .clone()
        .unwrap_or_else(|| StationaryStrategy::uniform(model, Player::One));
    let mut s2 = opts
        .init2
        .clone()
        .unwrap_or_else(|| StationaryStrategy::uniform(model, Player::Two));
    s1.check(model, Player::One)?;
    s2.check(model, Player::Two)?;

    let report = |s1: StationaryStrategy, s2: StationaryStrategy, c: Certificate, it: usize, ok: bool| {
        let [br1, br2] = c.br;
        NashReport {
            strategy1: s1,
            strategy2: s2,
            g1: c.g[0],
            g2: c.g[1],
            h1: br1.h,
            h2: br2.h,
            gap1: c.gap[0],
            gap2: c.gap[1],
            residual: c.residual,
            iterations: it,
            converged: ok,
            damping: opts.damping,
            init: init.clone(),
            assumption3,
        }
    };

    let mut starts = [0.0, 0.0];
    for it in 1..=opts.max_iters {
        let cert = certify(model, &s1, &s2, starts)?;
        log::debug!(
            "nash iteration {it}: gaps ({:.3e}, {:.3e}), residual {:.3e}",
            cert.gap[0],
            cert.gap[1],
            cert.residual
        );
        if cert.accepted() {
            return Ok(report(s1, s2, cert, it, true));
        }
        starts = [cert.br[0].g, cert.br[1].g];
        let c1 = cert.br[0].strategy.clone();
        let c2 = cert.br[1].strategy.clone();
        if c1 != s1 || c2 != s2 {
            let cand = certify(model, &c1, &c2, starts)?;
            if cand.accepted() {
                return Ok(report(c1, c2, cand, it, true));
            }
        }
        s1 = s1.mix(&c1, opts.damping);
        s2 = s2.mix(&c2, opts.damping);
    }
    let cert = certify(model, &s1, &s2, starts)?;
    let ok = cert.accepted();
    Ok(report(s1, s2, cert, opts.max_iters, ok))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NashCheck {
    pub g1: f64,
    pub g2: f64,
    pub gap1: f64,
    pub gap2: f64,
}

/// Evaluation roots of the pair and each player's gap to a best response.
pub fn verify_nash(
    model: &GameModel,
    strategy1: &StationaryStrategy,
    strategy2: &StationaryStrategy,
) -> Result<NashCheck> {
    let g1 = evaluation_root(model, strategy1, strategy2, Payoff::Player(Player::One), &RootOptions::default())?.g;
    let g2 = evaluation_root(model, strategy1, strategy2, Payoff::Player(Player::Two), &RootOptions::default())?.g;
    let br1 = best_response_from(model, strategy2, Player::One, g1)?;
    let br2 = best_response_from(model, strategy1, Player::Two, g2)?;
    Ok(NashCheck {
        g1,
        g2,
        gap1: g1 - br1.g,
        gap2: g2 - br2.g,
    })
}

/// Log-weights of the opponent-averaged own actions in state `i`:
/// `out[own] = [(opponent weight, a, b)]`.
fn cells_for(
    model: &GameModel,
    opponent: &StationaryStrategy,
    player: Player,
    i: usize,
) -> Vec<Vec<(f64, usize, usize)>> {
    let (n1, n2) = (model.actions1[i].len(), model.actions2[i].len());
    let own_n = if player == Player::One { n1 } else { n2 };
    (0..own_n)
        .map(|own| {
            opponent
                .row(i)
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(o, &p)| match player {
                    Player::One => (p, own, o),
                    Player::Two => (p, o, own),
                })
                .collect()
        })
        .collect()
}

/// `E_i[R^tau*]` maximized over the player's stationary replies, by
/// monotone iteration from zero; `None` when it diverges.
fn first_passage_canary(
    model: &GameModel,
    opponent: &StationaryStrategy,
    player: Player,
    r: f64,
) -> Option<Vec<f64>> {
    let n = model.n_states();
    let target = model.reference_state;
    let mut u = vec![0.0; n];
    for _ in 0..MAX_HITTING_ITERS {
        let next: Vec<f64> = (0..n)
            .map(|i| {
                cells_for(model, opponent, player, i)
                    .iter()
                    .map(|cells| {
                        cells
                            .iter()
                            .map(|&(w, a, b)| {
                                let p = &model.transition[i][a][b];
                                let cont: f64 = (0..n)
                                    .map(|j| if j == target { p[j] } else { p[j] * u[j] })
                                    .sum();
                                w * r * cont
                            })
                            .sum::<f64>()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        let size = next.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if !(size < DIVERGENCE_BOUND) {
            return None;
        }
        let change = next.iter().zip(&u).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        u = next;
        if change < HITTING_TOL * size {
            return Some(u);
        }
    }
    None
}

/// Relative values through the first-passage representation: the
/// multiplicative cost accumulated until the chain first returns to the
/// reference state, minimized over the player's replies.
///
/// Fails with [`Error::HittingTimeUnavailable`] when the first-passage
/// moment `E[R^tau*]`, `R = exp(2 theta B M_rho)`, diverges for some reply,
/// or when the iteration itself does not settle.
pub fn hitting_time_h(
    model: &GameModel,
    opponent: &StationaryStrategy,
    player: Player,
    g: f64,
) -> Result<Vec<f64>> {
    opponent.check(model, player.other())?;
    let m_rho = compute_m_rho(model, Player::One).max(compute_m_rho(model, Player::Two));
    let r = (2.0 * model.theta * model.horizon_bound * m_rho).exp();
    if first_passage_canary(model, opponent, player, r).is_none() {
        return Err(Error::HittingTimeUnavailable(format!(
            "first-passage moment E[R^tau*] diverges for R = {r:.6e}"
        )));
    }

    let theta = model.theta;
    let n = model.n_states();
    let target = model.reference_state;
    let table = build_cost_table(model, Payoff::Player(player), g);
    let cells: Vec<_> = (0..n).map(|i| cells_for(model, opponent, player, i)).collect();
    let mut w = vec![0.0; n];
    for _ in 0..MAX_HITTING_ITERS {
        let next: Vec<f64> = (0..n)
            .map(|i| {
                cells[i]
                    .iter()
                    .map(|own| {
                        log_sum_exp(own.iter().map(|&(p, a, b)| {
                            let row = &model.transition[i][a][b];
                            let cont = log_sum_exp((0..n).filter(|&j| row[j] > 0.0).map(|j| {
                                row[j].ln() + if j == target { 0.0 } else { w[j] }
                            }));
                            p.ln() + theta * table.values[i][a][b] + cont
                        }))
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        if next.iter().any(|v| !v.is_finite() || *v > DIVERGENCE_BOUND.ln()) {
            return Err(Error::HittingTimeUnavailable(
                "first-passage iteration diverged".into(),
            ));
        }
        let change = next.iter().zip(&w).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        w = next;
        if change < HITTING_TOL {
            return Ok(w.into_iter().map(|v| v / theta).collect());
        }
    }
    Err(Error::HittingTimeUnavailable(format!(
        "first-passage iteration did not settle within {MAX_HITTING_ITERS} sweeps"
    )))
}
