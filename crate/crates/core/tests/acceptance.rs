//! Acceptance suite over the fixed models in `tests/data`.
//!
//! Every criterion runs even when an earlier one fails; the test prints one
//! `PASS`/`FAIL` line per criterion and fails at the end if any did.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::time::{Duration, Instant};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rsgame::discrete_solver::{evaluate_strategies, solve_discrete_game};
use rsgame::matrix_game::MatrixGame;
use rsgame::model::load_model;
use rsgame::nash::{best_response, hitting_time_h, solve_nash, verify_nash, NashOptions};
use rsgame::oracle::{evaluation_root, exact_exp_cost, grid_minimax, perron_mu};
use rsgame::rootfind::RootOptions;
use rsgame::simulator::{estimate_j, tail_diagnostic, EstimateRequest};
use rsgame::transform::{build_cost_table, Payoff};
use rsgame::zero_sum::{saddle_gaps, solve_zero_sum, verify_saddle};
use rsgame::{Error, GameModel, Player, RunningCost, SojournDist, StationaryStrategy};

fn data(name: &str) -> GameModel {
    let path = format!("{}/tests/data/{name}.json", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    load_model(&text).unwrap_or_else(|e| panic!("{path}: {e}"))
}

struct Outcome {
    id: u32,
    title: &'static str,
    limit: Option<Duration>,
    elapsed: Duration,
    result: Result<String, String>,
}

impl Outcome {
    fn passed(&self) -> bool {
        self.result.is_ok() && self.limit.is_none_or(|l| self.elapsed <= l)
    }

    fn line(&self) -> String {
        let detail = match &self.result {
            Ok(d) => d.clone(),
            Err(e) => e.clone(),
        };
        let timing = match self.limit {
            Some(l) => format!("{:.2?} (limit {:?})", self.elapsed, l),
            None => format!("{:.2?}", self.elapsed),
        };
        format!(
            "[{}] criterion {} {}: {detail}; {timing}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.title
        )
    }
}

fn run(
    id: u32,
    title: &'static str,
    limit: Option<Duration>,
    body: fn() -> Result<String, String>,
) -> Outcome {
    let start = Instant::now();
    let result = match std::panic::catch_unwind(body) {
        Ok(r) => r,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    };
    Outcome {
        id,
        title,
        limit,
        elapsed: start.elapsed(),
        result,
    }
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn err(e: Error) -> String {
    e.to_string()
}

fn closed_form_value() -> Result<String, String> {
    let m = data("t1");
    let r = solve_zero_sum(&m).map_err(err)?;
    let h_max = r.h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    ensure!((r.g - 4.0).abs() <= 1e-9, "g = {}", r.g);
    ensure!(h_max <= 1e-9, "|h| = {h_max:e}");
    ensure!(r.residual <= 1e-8, "residual = {:e}", r.residual);
    Ok(format!("g = {}, |h| = {h_max:e}, residual = {:e}", r.g, r.residual))
}

fn deterministic_reduction() -> Result<String, String> {
    let m = data("t2");
    let r = solve_zero_sum(&m).map_err(err)?;
    let c = build_cost_table(&m, Payoff::ZeroSum, 0.0);
    let mu_c = solve_discrete_game(&m, &c).map_err(err)?.mu;
    let exp_c: Vec<Vec<f64>> = c.values[0]
        .iter()
        .map(|row| row.iter().map(|v| (m.theta * v).exp()).collect())
        .collect();
    let grid = grid_minimax(&MatrixGame::new(exp_c).map_err(err)?, 1001).map_err(err)?.ln() / m.theta;
    ensure!((r.g - mu_c).abs() <= 1e-8, "g = {} vs mu_C = {mu_c}", r.g);
    ensure!((r.g - grid).abs() <= 2e-3, "g = {} vs grid = {grid}", r.g);
    ensure!((mu_c - grid).abs() <= 2e-3, "mu_C = {mu_c} vs grid = {grid}");
    Ok(format!("g = {}, mu_C = {mu_c}, grid = {grid}", r.g))
}

fn saddle_certificate() -> Result<String, String> {
    let mut notes = Vec::new();
    for name in ["t2", "t3"] {
        let m = data(name);
        let r = solve_zero_sum(&m).map_err(err)?;
        let (gap1, gap2) = verify_saddle(&m, &r).map_err(err)?;
        ensure!(gap1.abs() <= 1e-7 && gap2.abs() <= 1e-7, "{name}: gaps ({gap1:e}, {gap2:e})");
        let worse1 = r.strategy1.shift_mass(0.2);
        let worse2 = r.strategy2.shift_mass(0.2);
        ensure!(
            (worse1.tv_distance(&r.strategy1) - 0.2).abs() < 1e-12
                && (worse2.tv_distance(&r.strategy2) - 0.2).abs() < 1e-12,
            "{name}: perturbation is not at distance 0.2"
        );
        let (_, p2) = saddle_gaps(&m, r.g, &worse1, &r.strategy2).map_err(err)?;
        let (p1, _) = saddle_gaps(&m, r.g, &r.strategy1, &worse2).map_err(err)?;
        ensure!(p2 < -1e-4, "{name}: perturbed strategy1 gives gap2 = {p2:e}");
        ensure!(p1 > 1e-4, "{name}: perturbed strategy2 gives gap1 = {p1:e}");
        notes.push(format!("{name} gaps ({gap1:.1e}, {gap2:.1e}) perturbed ({p1:.3e}, {p2:.3e})"));
    }
    Ok(notes.join("; "))
}

fn random_strategy(m: &GameModel, player: Player, rng: &mut ChaCha8Rng) -> StationaryStrategy {
    let probs = (0..m.n_states())
        .map(|i| {
            let w: Vec<f64> = (0..m.n_actions(player, i)).map(|_| rng.random::<f64>() + 0.01).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|x| x / total).collect()
        })
        .collect();
    StationaryStrategy::new(probs)
}

fn evaluation_equivalence() -> Result<String, String> {
    let m = data("t3");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let s1 = random_strategy(&m, Player::One, &mut rng);
        let s2 = random_strategy(&m, Player::Two, &mut rng);
        let g = 4.0 * rng.random::<f64>();
        let table = build_cost_table(&m, Payoff::ZeroSum, g);
        let iterative = evaluate_strategies(&m, &table, &s1, &s2).map_err(err)?.mu;
        let n = 2000;
        let growth = (exact_exp_cost(&m, &table, &s1, &s2, 0, n).map_err(err)?
            - exact_exp_cost(&m, &table, &s1, &s2, 0, n - 1).map_err(err)?)
            / m.theta;
        let perron = perron_mu(&m, &table, &s1, &s2).map_err(err)?;
        let d = (iterative - growth)
            .abs()
            .max((iterative - perron).abs())
            .max((growth - perron).abs());
        ensure!(d <= 1e-7, "pair {k}: iterative {iterative}, growth {growth}, perron {perron}");
        worst = worst.max(d);
    }
    Ok(format!("20 pairs, max pairwise difference {worst:e}"))
}

fn monte_carlo() -> Result<String, String> {
    let m = data("t3");
    let r = solve_zero_sum(&m).map_err(err)?;
    let est = estimate_j(
        &m,
        &EstimateRequest {
            strategy1: &r.strategy1,
            strategy2: &r.strategy2,
            start: m.reference_state,
            t: 200.0,
            n_paths: 100_000,
            seed: 0,
            player: Player::One,
            zero_sum: true,
        },
    )
    .map_err(err)?;
    ensure!(
        est.ci99.0 <= r.g && r.g <= est.ci99.1,
        "T3: g = {} outside ci [{}, {}] (point {})",
        r.g,
        est.ci99.0,
        est.ci99.1,
        est.point
    );

    let t1 = data("t1");
    let one = StationaryStrategy::new(vec![vec![1.0]]);
    let t = 25.3;
    let est1 = estimate_j(
        &t1,
        &EstimateRequest {
            strategy1: &one,
            strategy2: &one,
            start: 0,
            t,
            n_paths: 100,
            seed: 0,
            player: Player::One,
            zero_sum: true,
        },
    )
    .map_err(err)?;
    // epochs start at 0, 0.5, ..., so N_t = floor(t / 0.5)
    let n_t = (t / 0.5).floor();
    let closed = (n_t + 1.0) * 2.0 / t;
    ensure!(est1.point == closed, "T1: point {} vs closed form {closed}", est1.point);
    Ok(format!(
        "T3 g = {} in [{}, {}]; T1 point {} = {closed}",
        r.g, est.ci99.0, est.ci99.1, est1.point
    ))
}

fn cells<T>(
    (n, n1, n2): (usize, usize, usize),
    rng: &mut ChaCha8Rng,
    mut f: impl FnMut(&mut ChaCha8Rng) -> T,
) -> Vec<Vec<Vec<T>>> {
    (0..n)
        .map(|_| (0..n1).map(|_| (0..n2).map(|_| f(rng)).collect()).collect())
        .collect()
}

/// Random model with up to 3 states and 3 actions per player.
fn random_model(rng: &mut ChaCha8Rng) -> GameModel {
    let n = rng.random_range(1..=3usize);
    let n1 = rng.random_range(1..=3usize);
    let n2 = rng.random_range(1..=3usize);
    let horizon = 0.5 + 2.0 * rng.random::<f64>();
    let theta = 0.05 + 1.5 * rng.random::<f64>();
    let dims = (n, n1, n2);
    let immediate = cells(dims, rng, |r| 4.0 * r.random::<f64>() - 2.0);
    let running = cells(dims, rng, |r| RunningCost::new(vec![r.random::<f64>(), 0.5 * r.random::<f64>()]));
    let sojourn = cells(dims, rng, |r| {
        if r.random::<bool>() {
            SojournDist::Uniform {
                lo: 0.1 * horizon,
                hi: horizon,
            }
        } else {
            SojournDist::atoms_normalized(vec![
                (horizon * (0.1 + 0.4 * r.random::<f64>()), 0.1 + r.random::<f64>()),
                (horizon, 0.1 + r.random::<f64>()),
            ])
        }
    });
    let transition = cells(dims, rng, |r| {
        let w: Vec<f64> = (0..n).map(|_| 0.05 + r.random::<f64>()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect::<Vec<f64>>()
    });
    GameModel {
        states: (0..n).map(|i| format!("s{i}")).collect(),
        actions1: vec![(0..n1).map(|a| format!("a{a}")).collect(); n],
        actions2: vec![(0..n2).map(|b| format!("b{b}")).collect(); n],
        theta,
        horizon_bound: horizon,
        reference_state: 0,
        immediate_cost: Some(immediate),
        running_cost1: running,
        running_cost2: None,
        sojourn,
        transition,
    }
}

fn structural_suite() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = [0.0f64; 3];
    for k in 0..200 {
        let m = random_model(&mut rng);
        m.check().map_err(|e| format!("case {k}: {e}"))?;
        let g = 6.0 * rng.random::<f64>() - 3.0;
        let g2 = 6.0 * rng.random::<f64>() - 3.0;
        let c = 4.0 * rng.random::<f64>() - 2.0;
        let d = build_cost_table(&m, Payoff::ZeroSum, g);
        let d2 = build_cost_table(&m, Payoff::ZeroSum, g2);
        let lip = d.distance(&d2) - m.horizon_bound * (g - g2).abs();
        ensure!(lip <= 1e-9, "case {k}: Lipschitz excess {lip:e}");

        let mu = solve_discrete_game(&m, &d).map_err(|e| format!("case {k}: {e}"))?.mu;
        let mu_c = solve_discrete_game(&m, &d.shifted(c)).map_err(|e| format!("case {k}: {e}"))?.mu;
        let shift = (mu_c - mu - c).abs();
        ensure!(shift <= 1e-8, "case {k}: shift defect {shift:e}");

        let mut bigger = d.clone();
        for v in bigger.values.iter_mut().flatten().flatten() {
            *v += rng.random::<f64>();
        }
        let mu_big = solve_discrete_game(&m, &bigger).map_err(|e| format!("case {k}: {e}"))?.mu;
        let drop = mu - mu_big;
        ensure!(drop <= 1e-9, "case {k}: mu decreased by {drop:e} under a larger cost");
        worst = [worst[0].max(lip), worst[1].max(shift), worst[2].max(drop)];
    }
    Ok(format!(
        "200 cases, zero violations (max Lipschitz excess {:e}, shift defect {:e}, monotone drop {:e})",
        worst[0], worst[1], worst[2]
    ))
}

fn nash_certificate() -> Result<String, String> {
    let m = data("t4");
    let opts = NashOptions {
        damping: 0.5,
        max_iters: 500,
        ..NashOptions::default()
    };
    let r = solve_nash(&m, &opts).map_err(err)?;
    ensure!(r.converged, "T4 did not converge in {} iterations", r.iterations);
    ensure!(
        r.gap1.abs() <= 1e-6 && r.gap2.abs() <= 1e-6,
        "T4 gaps ({:e}, {:e})",
        r.gap1,
        r.gap2
    );
    let check = verify_nash(&m, &r.strategy1, &r.strategy2).map_err(err)?;
    ensure!(
        check.gap1.abs() <= 1e-6 && check.gap2.abs() <= 1e-6,
        "T4 independent gaps ({:e}, {:e})",
        check.gap1,
        check.gap2
    );

    let d = data("t4_decoupled");
    let rd = solve_nash(&d, &opts).map_err(err)?;
    ensure!(rd.converged && rd.iterations <= 2, "decoupled: {} iterations", rd.iterations);
    let mut diff = 0.0f64;
    for player in [Player::One, Player::Two] {
        let best = enumerate_pure_optimum(&d, player)?;
        let got = if player == Player::One { rd.g1 } else { rd.g2 };
        ensure!((got - best).abs() <= 1e-7, "decoupled player {player}: {got} vs enumeration {best}");
        diff = diff.max((got - best).abs());
    }
    Ok(format!(
        "T4 in {} iterations, gaps ({:.1e}, {:.1e}), verified ({:.1e}, {:.1e}); decoupled in {} with enumeration difference {diff:e}",
        r.iterations, r.gap1, r.gap2, check.gap1, check.gap2, rd.iterations
    ))
}

/// Smallest evaluation root over the pure stationary policies of `player`,
/// with the opponent mixing uniformly.
fn enumerate_pure_optimum(m: &GameModel, player: Player) -> Result<f64, String> {
    let opponent = StationaryStrategy::uniform(m, player.other());
    let sizes: Vec<usize> = (0..m.n_states()).map(|i| m.n_actions(player, i)).collect();
    let mut choice = vec![0usize; sizes.len()];
    let mut best = f64::INFINITY;
    loop {
        let own = StationaryStrategy::pure(m, player, &choice);
        let (s1, s2) = match player {
            Player::One => (&own, &opponent),
            Player::Two => (&opponent, &own),
        };
        let g = evaluation_root(m, s1, s2, Payoff::Player(player), &RootOptions::default())
            .map_err(err)?
            .g;
        best = best.min(g);
        let mut k = 0;
        loop {
            if k == choice.len() {
                return Ok(best);
            }
            choice[k] += 1;
            if choice[k] < sizes[k] {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

fn hitting_time() -> Result<String, String> {
    let mut worst = 0.0f64;
    for name in ["t3", "t4"] {
        let m = data(name);
        for player in [Player::One, Player::Two] {
            let opponent = StationaryStrategy::uniform(&m, player.other());
            let br = best_response(&m, &opponent, player).map_err(err)?;
            let h = hitting_time_h(&m, &opponent, player, br.g).map_err(err)?;
            for i in (0..m.n_states()).filter(|&i| i != m.reference_state) {
                let d = (h[i] - br.h[i]).abs();
                ensure!(d <= 1e-6, "{name} player {player} state {i}: {} vs {}", h[i], br.h[i]);
                worst = worst.max(d);
            }
        }
    }
    let m = data("t3");
    let hot = m.with_theta(50.0 * m.theta);
    let opponent = StationaryStrategy::uniform(&hot, Player::Two);
    let outcome = hitting_time_h(&hot, &opponent, Player::One, 0.0);
    ensure!(
        matches!(outcome, Err(Error::HittingTimeUnavailable(_))),
        "inflated theta gave {outcome:?}"
    );
    Ok(format!("max difference {worst:e}; inflated theta diverges"))
}

fn tail_bound() -> Result<String, String> {
    let m = data("t3");
    let r = tail_diagnostic(&m, 0.5, 20.0, 10_000, 0).map_err(err)?;
    ensure!(r.violations == 0, "{} violations", r.violations);
    Ok(format!("r_alpha = {}, {} rows, zero violations", r.r_alpha, r.rows.len()))
}

#[test]
fn acceptance() {
    let secs = Duration::from_secs;
    let outcomes = [
        run(1, "closed-form zero-sum value", Some(secs(1)), closed_form_value),
        run(2, "deterministic-sojourn reduction", Some(secs(5)), deterministic_reduction),
        run(3, "saddle certificate", Some(secs(30)), saddle_certificate),
        run(4, "policy-evaluation equivalence", None, evaluation_equivalence),
        run(5, "Monte-Carlo consistency", Some(secs(60)), monte_carlo),
        run(6, "Lipschitz/shift/monotone suite", None, structural_suite),
        run(7, "Nash certificate", Some(secs(120)), nash_certificate),
        run(8, "hitting-time representation", None, hitting_time),
        run(9, "tail bound", None, tail_bound),
    ];
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.passed()).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
