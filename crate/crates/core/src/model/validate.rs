use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{GameModel, Player, SCHEMA_VERSION};

/// Models with more pure stationary pairs than this skip enumeration.
pub const MAX_ENUMERATED_PAIRS: u128 = 4096;

/// Sample count for the running-cost sup norm (equispaced, endpoints included).
const M_RHO_SAMPLES: usize = 1025;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

/// First-passage generating function bound behind the moment check.
#[derive(Debug, Clone, Serialize)]
pub struct FirstPassage {
    /// `R = exp(2 theta B M_rho)`.
    pub r: f64,
    /// `sup_i E_i[R^tau*]` over the enumerated pure pairs, `None` if infinite
    /// or not computed.
    pub sup: Option<f64>,
    pub finite: bool,
    pub enumerated: bool,
    pub pairs_checked: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub schema_version: u32,
    pub checks: Vec<Check>,
    pub m_rho: f64,
    pub irreducibility_status: CheckStatus,
    pub assumption3_status: CheckStatus,
    pub assumption3: FirstPassage,
}

impl ValidationReport {
    pub fn has_failure(&self) -> bool {
        self.checks.iter().any(|c| c.status == CheckStatus::Fail)
    }

    pub fn status(&self) -> CheckStatus {
        self.checks
            .iter()
            .map(|c| c.status)
            .max_by_key(|s| match s {
                CheckStatus::Pass => 0,
                CheckStatus::Warn => 1,
                CheckStatus::Fail => 2,
            })
            .unwrap_or(CheckStatus::Pass)
    }
}

/// `max_{i,a,b} max_{t in [0,B]} |rho^player(t)|` on a 1025-point grid.
///
/// Exact for monotone or piecewise-monotone costs whose extrema fall on
/// grid points; otherwise it may slightly underestimate the sup.
pub fn compute_m_rho(model: &GameModel, player: Player) -> f64 {
    let grid = model.running_cost(player);
    let horizon = model.horizon_bound;
    let steps = (M_RHO_SAMPLES - 1) as f64;
    model
        .cells()
        .map(|(i, a, b)| {
            let rc = &grid[i][a][b];
            (0..M_RHO_SAMPLES)
                .map(|k| rc.eval(horizon * k as f64 / steps).abs())
                .chain([rc.eval(0.0).abs(), rc.eval(horizon).abs()])
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// `E_i[r^tau]` for every state `i`, where `tau` is the first epoch `n >= 1`
/// with `X_n = target` under the transition matrix `p`.
///
/// Returns `None` when the generating function diverges, that is when the
/// spectral radius of `r * p` restricted to the other states is at least 1.
pub fn first_passage_moments(p: &[Vec<f64>], target: usize, r: f64) -> Option<Vec<f64>> {
    let n = p.len();
    let others: Vec<usize> = (0..n).filter(|&j| j != target).collect();
    let k = others.len();
    let mut u_others = DVector::<f64>::zeros(k);
    if k > 0 {
        let a = DMatrix::from_fn(k, k, |x, y| r * p[others[x]][others[y]]);
        let radius = a
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if !(radius < 1.0 - 1e-12) {
            return None;
        }
        let lhs = DMatrix::<f64>::identity(k, k) - a;
        let rhs = DVector::from_fn(k, |x, _| r * p[others[x]][target]);
        u_others = lhs.lu().solve(&rhs)?;
    }
    let mut u = vec![0.0; n];
    for (x, &j) in others.iter().enumerate() {
        u[j] = u_others[x];
    }
    u[target] = r * (p[target][target]
        + others
            .iter()
            .enumerate()
            .map(|(x, &j)| p[target][j] * u_others[x])
            .sum::<f64>());
    if u.iter().all(|v| v.is_finite() && *v > 0.0) {
        Some(u)
    } else {
        None
    }
}

/// Embedded-chain transition matrix under a pure pair.
fn pure_pair_matrix(model: &GameModel, a: &[usize], b: &[usize]) -> Vec<Vec<f64>> {
    (0..model.n_states())
        .map(|i| model.transition[i][a[i]][b[i]].clone())
        .collect()
}

pub(crate) fn strongly_connected(n: usize, edge: impl Fn(usize, usize) -> bool) -> bool {
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let e = if forward { edge(u, v) } else { edge(v, u) };
                if e && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    n == 0 || (reach(true) && reach(false))
}

/// Visits every pure stationary pair as `(choice1, choice2)`.
fn for_each_pure_pair(model: &GameModel, mut f: impl FnMut(&[usize], &[usize]) -> bool) {
    let n = model.n_states();
    let radix: Vec<(usize, usize)> = (0..n)
        .map(|i| (model.actions1[i].len(), model.actions2[i].len()))
        .collect();
    let mut a = vec![0usize; n];
    let mut b = vec![0usize; n];
    loop {
        if !f(&a, &b) {
            return;
        }
        // mixed-radix increment over (a_0, b_0, a_1, b_1, ...)
        let mut i = 0;
        loop {
            if i == n {
                return;
            }
            b[i] += 1;
            if b[i] < radix[i].1 {
                break;
            }
            b[i] = 0;
            a[i] += 1;
            if a[i] < radix[i].0 {
                break;
            }
            a[i] = 0;
            i += 1;
        }
    }
}

/// Runs the structural, irreducibility and first-passage moment checks.
pub fn validate(model: &GameModel) -> ValidationReport {
    let mut checks = Vec::new();
    let violations = model.violations();
    let hard_ok = violations.is_empty();
    for name in ["theta", "horizon_bound", "states", "reference_state", "actions"] {
        let failed: Vec<_> = violations.iter().filter(|v| v.0 == name).collect();
        checks.push(match failed.first() {
            None => Check {
                name: name.into(),
                status: CheckStatus::Pass,
                detail: "ok".into(),
            },
            Some((_, loc, detail)) => Check {
                name: name.into(),
                status: CheckStatus::Fail,
                detail: format!("{loc}: {detail}"),
            },
        });
    }
    for name in ["stochasticity", "sojourn", "running_cost", "immediate_cost"] {
        let failed: Vec<_> = violations.iter().filter(|v| v.0 == name).collect();
        if failed.is_empty() {
            checks.push(Check {
                name: name.into(),
                status: CheckStatus::Pass,
                detail: "ok".into(),
            });
        }
        for (_, loc, detail) in failed {
            checks.push(Check {
                name: name.into(),
                status: CheckStatus::Fail,
                detail: format!("{loc}: {detail}"),
            });
        }
    }

    let structural = model.reference_state < model.n_states() && model.n_states() > 0;
    let pairs = model.pure_pair_count();
    let enumerable = structural && pairs <= MAX_ENUMERATED_PAIRS;

    // irreducibility
    let n = model.n_states();
    let (irreducibility_status, irr_detail) = if !structural {
        (CheckStatus::Fail, "model has no usable states".to_string())
    } else if enumerable {
        let mut bad: Option<(Vec<usize>, Vec<usize>)> = None;
        for_each_pure_pair(model, |a, b| {
            let p = pure_pair_matrix(model, a, b);
            if strongly_connected(n, |u, v| p[u][v] > 0.0) {
                true
            } else {
                bad = Some((a.to_vec(), b.to_vec()));
                false
            }
        });
        match bad {
            None => (
                CheckStatus::Pass,
                format!("all {pairs} pure stationary pairs give an irreducible chain"),
            ),
            Some((a, b)) => (
                CheckStatus::Fail,
                format!("reducible chain under pure pair {}", describe_pair(model, &a, &b)),
            ),
        }
    } else {
        let max_graph = strongly_connected(n, |u, v| {
            (0..model.actions1[u].len()).any(|a| {
                (0..model.actions2[u].len()).any(|b| model.transition[u][a][b][v] > 0.0)
            })
        });
        let min_graph = strongly_connected(n, |u, v| {
            (0..model.actions1[u].len()).all(|a| {
                (0..model.actions2[u].len()).all(|b| model.transition[u][a][b][v] > 0.0)
            })
        });
        if !max_graph {
            (
                CheckStatus::Fail,
                "chain is reducible under every policy (union graph not strongly connected)"
                    .to_string(),
            )
        } else if min_graph {
            (
                CheckStatus::Pass,
                "sufficient condition holds: always-positive edges form a strongly connected graph"
                    .to_string(),
            )
        } else {
            (
                CheckStatus::Warn,
                format!("{pairs} pure pairs exceed the enumeration cap; sufficient condition not met"),
            )
        }
    };
    checks.push(Check {
        name: "irreducibility".into(),
        status: irreducibility_status,
        detail: irr_detail,
    });

    // first-passage moments
    let m_rho = if structural {
        compute_m_rho(model, Player::One).max(compute_m_rho(model, Player::Two))
    } else {
        f64::NAN
    };
    let r = (2.0 * model.theta * model.horizon_bound * m_rho).exp();
    let mut fp = FirstPassage {
        r,
        sup: None,
        finite: false,
        enumerated: enumerable,
        pairs_checked: 0,
    };
    let (assumption3_status, a3_detail) = if !(hard_ok && structural) {
        (CheckStatus::Warn, "skipped: model violates hard invariants".to_string())
    } else if !enumerable {
        (
            CheckStatus::Warn,
            format!("{pairs} pure pairs exceed the enumeration cap; first-passage bound not computed"),
        )
    } else {
        let mut sup: f64 = 0.0;
        let mut infinite: Option<(Vec<usize>, Vec<usize>)> = None;
        for_each_pure_pair(model, |a, b| {
            fp.pairs_checked += 1;
            let p = pure_pair_matrix(model, a, b);
            match first_passage_moments(&p, model.reference_state, r) {
                Some(u) => {
                    sup = u.into_iter().fold(sup, f64::max);
                    true
                }
                None => {
                    infinite = Some((a.to_vec(), b.to_vec()));
                    false
                }
            }
        });
        match infinite {
            None => {
                fp.sup = Some(sup);
                fp.finite = true;
                (
                    CheckStatus::Pass,
                    format!("R = {r:.6e}, sup_i E_i[R^tau*] = {sup:.6e}"),
                )
            }
            Some((a, b)) => (
                CheckStatus::Fail,
                format!(
                    "R = {r:.6e}: E[R^tau*] diverges under pure pair {}",
                    describe_pair(model, &a, &b)
                ),
            ),
        }
    };
    checks.push(Check {
        name: "assumption3".into(),
        // only a warning gate: zero-sum solving does not rely on it
        status: if assumption3_status == CheckStatus::Fail {
            CheckStatus::Warn
        } else {
            assumption3_status
        },
        detail: a3_detail,
    });

    ValidationReport {
        schema_version: SCHEMA_VERSION,
        checks,
        m_rho,
        irreducibility_status,
        assumption3_status,
        assumption3: fp,
    }
}

fn describe_pair(model: &GameModel, a: &[usize], b: &[usize]) -> String {
    let parts: Vec<String> = (0..model.n_states())
        .map(|i| {
            format!(
                "{}: ({}, {})",
                model.states[i], model.actions1[i][a[i]], model.actions2[i][b[i]]
            )
        })
        .collect();
    format!("{{{}}}", parts.join(", "))
}
