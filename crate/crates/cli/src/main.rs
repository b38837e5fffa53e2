//! `rsgame` command-line front end.
//!
//! Every subcommand prints one JSON document on standard output. Human
//! summaries and diagnostics go to standard error.
//!
//! Exit codes: 0 success, 1 invalid input or a failing validation, 2 Nash
//! iteration did not converge, 3 solver failure, 64 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde_json::{json, Value};

use rsgame::matrix_game::{solve_matrix_game, MatrixGame};
use rsgame::model::{parse_model, parse_strategy, validate, SCHEMA_VERSION};
use rsgame::nash::{solve_nash, NashOptions};
use rsgame::oracle::{evaluation_root, exact_exp_cost, grid_maximin, grid_minimax, perron_mu, spectral_radius};
use rsgame::rootfind::RootOptions;
use rsgame::simulator::{estimate_j, simulate_trajectory, tail_diagnostic, trajectory_csv, EstimateRequest};
use rsgame::transform::{build_cost_table, Payoff};
use rsgame::zero_sum::{solve_zero_sum_with, SolveStatus};
use rsgame::{Error, GameModel, Player, StationaryStrategy};

const EXIT_INPUT: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "rsgame", version, about = "Risk-sensitive semi-Markov game solver")]
struct Cli {
    /// Worker threads for the simulator (overrides RSGAME_THREADS; default 1).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Raise log verbosity on standard error (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file and report every invariant and assumption.
    Validate { model: PathBuf },
    /// Value and saddle point of the zero-sum game.
    SolveZs {
        model: PathBuf,
        /// Final bracket width of the root search in g.
        #[arg(long)]
        tol: Option<f64>,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stationary Nash equilibrium by damped best-response iteration.
    SolveNash {
        model: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        damping: f64,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
        #[arg(long)]
        init1: Option<String>,
        #[arg(long)]
        init2: Option<String>,
    },
    /// Risk-sensitive average cost of a fixed strategy pair.
    Eval {
        model: PathBuf,
        #[command(flatten)]
        pair: Pair,
        #[command(flatten)]
        payoff: PayoffArgs,
    },
    /// Monte-Carlo estimate of the finite-horizon criterion.
    Simulate {
        model: PathBuf,
        #[command(flatten)]
        pair: Pair,
        #[command(flatten)]
        payoff: PayoffArgs,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Start state (default: the reference state).
        #[arg(long)]
        start: Option<String>,
        /// Also write the first sampled trajectory as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Empirical tail of the jump count against its exponential bound.
    Tail {
        model: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Brute-force reference computations.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Log of the exact n-step exponential cost from a start state.
    ExactExpCost {
        model: PathBuf,
        #[command(flatten)]
        pair: Pair,
        #[command(flatten)]
        payoff: PayoffArgs,
        #[arg(long)]
        g: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        start: Option<String>,
    },
    /// Growth rate of a fixed pair from the Perron root.
    PerronMu {
        model: PathBuf,
        #[command(flatten)]
        pair: Pair,
        #[command(flatten)]
        payoff: PayoffArgs,
        #[arg(long)]
        g: f64,
    },
    /// Transformed one-step cost table at pay rate g.
    CostTable {
        model: PathBuf,
        #[command(flatten)]
        payoff: PayoffArgs,
        #[arg(long)]
        g: f64,
    },
    /// Perron root of a nonnegative matrix given as a JSON array of rows.
    SpectralRadius { matrix: PathBuf },
    /// Grid minimax and maximin of a matrix game, next to its LP value.
    GridMinimax {
        matrix: PathBuf,
        #[arg(long, default_value_t = 1001)]
        grid: usize,
    },
}

#[derive(Args)]
struct Pair {
    /// Player 1 strategy file, or `uniform`.
    #[arg(long)]
    p1: String,
    /// Player 2 strategy file, or `uniform`.
    #[arg(long)]
    p2: String,
}

/// Payoff selection. With neither flag, models without a second running
/// cost are evaluated as zero-sum and the others for player 1.
#[derive(Args)]
struct PayoffArgs {
    /// Use this player's running cost alone.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    player: Option<u8>,
    /// Zero-sum payoff: immediate cost plus player 1's running cost.
    #[arg(long)]
    zero_sum: bool,
}

impl PayoffArgs {
    fn payoff(&self, model: &GameModel) -> Payoff {
        let player = Player::try_from(self.player.unwrap_or(1)).expect("clap restricts the range");
        if self.zero_sum || (self.player.is_none() && model.running_cost2.is_none()) {
            Payoff::ZeroSum
        } else {
            Payoff::Player(player)
        }
    }
}

fn payoff_fields(payoff: Payoff) -> (Player, bool) {
    (payoff.player(), payoff == Payoff::ZeroSum)
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } | Error::Dimension { .. } | Error::Invalid { .. } => EXIT_INPUT,
            Error::Domain(_) => EXIT_USAGE,
            Error::SolverFailure { .. }
            | Error::BracketExhausted { .. }
            | Error::HittingTimeUnavailable(_)
            | Error::Overflow(_) => EXIT_SOLVER,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<GameModel, Failure> {
    let model = parse_model(&read(path)?).map_err(|e| in_file(path, e))?;
    model.check().map_err(|e| in_file(path, e))?;
    Ok(model)
}

fn in_file(path: &Path, e: Error) -> Failure {
    let mut f = Failure::from(e);
    f.message = format!("{}: {}", path.display(), f.message);
    f
}

fn strategy(model: &GameModel, player: Player, arg: &str) -> Result<StationaryStrategy, Failure> {
    if arg == "uniform" {
        return Ok(StationaryStrategy::uniform(model, player));
    }
    let path = Path::new(arg);
    let (declared, s) = parse_strategy(&read(path)?, model).map_err(|e| in_file(path, e))?;
    if declared != player {
        return Err(Failure::input(format!(
            "{arg}: strategy is for player {declared}, expected player {player}"
        )));
    }
    Ok(s)
}

fn pair(model: &GameModel, p: &Pair) -> Result<(StationaryStrategy, StationaryStrategy), Failure> {
    Ok((
        strategy(model, Player::One, &p.p1)?,
        strategy(model, Player::Two, &p.p2)?,
    ))
}

fn state(model: &GameModel, name: Option<&str>) -> Result<usize, Failure> {
    match name {
        None => Ok(model.reference_state),
        Some(n) => model
            .state_index(n)
            .ok_or_else(|| Failure::usage(format!("unknown state `{n}`"))),
    }
}

fn emit(value: &Value) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    // a closed pipe downstream is not an error of ours
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn matrix(path: &Path) -> Result<Vec<Vec<f64>>, Failure> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| Failure::input(format!("{}: expected a JSON array of rows: {e}", path.display())))
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Validate { model } => {
            let m = parse_model(&read(&model)?).map_err(|e| in_file(&model, e))?;
            let report = validate(&m);
            for c in report.checks.iter().filter(|c| c.detail != "ok") {
                eprintln!("{:?} {}: {}", c.status, c.name, c.detail);
            }
            emit(&serde_json::to_value(&report).expect("report serializes"));
            Ok(if report.has_failure() { EXIT_INPUT } else { 0 })
        }
        Command::SolveZs { model, tol, out } => {
            let m = load(&model)?;
            let mut opts = RootOptions::default();
            if let Some(tol) = tol {
                if !(tol > 0.0 && tol.is_finite()) {
                    return Err(Failure::usage(format!("--tol must be positive, got {tol}")));
                }
                opts.width_tol = tol;
            }
            let r = solve_zero_sum_with(&m, &opts)?;
            if r.status == SolveStatus::UnsupportedAssumptions {
                eprintln!("warning: irreducibility not established; result is outside the supported theory");
            }
            eprintln!("g = {} (gaps {:.2e}, {:.2e})", r.g, r.gap1, r.gap2);
            let doc = r.to_json(&m);
            match out {
                Some(path) => {
                    let text = serde_json::to_string_pretty(&doc).expect("reports serialize") + "\n";
                    std::fs::write(&path, text)
                        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
                }
                None => emit(&doc),
            }
            Ok(0)
        }
        Command::SolveNash {
            model,
            damping,
            max_iters,
            init1,
            init2,
        } => {
            let m = load(&model)?;
            let opts = NashOptions {
                damping,
                max_iters,
                init1: init1.map(|a| strategy(&m, Player::One, &a)).transpose()?,
                init2: init2.map(|a| strategy(&m, Player::Two, &a)).transpose()?,
            };
            let r = solve_nash(&m, &opts)?;
            eprintln!(
                "converged = {} after {} iterations, g1 = {}, g2 = {}",
                r.converged, r.iterations, r.g1, r.g2
            );
            emit(&r.to_json(&m));
            Ok(if r.converged { 0 } else { EXIT_NOT_CONVERGED })
        }
        Command::Eval { model, pair: p, payoff } => {
            let m = load(&model)?;
            let (s1, s2) = pair(&m, &p)?;
            let payoff = payoff.payoff(&m);
            let root = evaluation_root(&m, &s1, &s2, payoff, &RootOptions::default())?;
            let (player, zero_sum) = payoff_fields(payoff);
            emit(&json!({
                "schema_version": SCHEMA_VERSION,
                "model_hash": m.hash(),
                "player": player,
                "zero_sum": zero_sum,
                "g": root.g,
                "bracket": [root.bracket.0, root.bracket.1],
                "mu_trace": root.trace.iter().map(|(g, mu)| json!([g, mu])).collect::<Vec<_>>(),
            }));
            Ok(0)
        }
        Command::Simulate {
            model,
            pair: p,
            payoff,
            t,
            paths,
            seed,
            start,
            csv,
        } => {
            let m = load(&model)?;
            let (s1, s2) = pair(&m, &p)?;
            let start = state(&m, start.as_deref())?;
            let (player, zero_sum) = payoff_fields(payoff.payoff(&m));
            let est = estimate_j(
                &m,
                &EstimateRequest {
                    strategy1: &s1,
                    strategy2: &s2,
                    start,
                    t,
                    n_paths: paths,
                    seed,
                    player,
                    zero_sum,
                },
            )?;
            if let Some(path) = csv {
                let traj = simulate_trajectory(&m, &s1, &s2, start, t, seed)?;
                std::fs::write(&path, trajectory_csv(&m, &traj))
                    .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            }
            eprintln!("J = {} (99% ci {} .. {})", est.point, est.ci99.0, est.ci99.1);
            emit(&serde_json::to_value(&est).expect("estimate serializes"));
            Ok(0)
        }
        Command::Tail {
            model,
            alpha,
            t,
            paths,
            seed,
        } => {
            let m = load(&model)?;
            let r = tail_diagnostic(&m, alpha, t, paths, seed)?;
            eprintln!("r_alpha = {}, {} violations", r.r_alpha, r.violations);
            emit(&serde_json::to_value(&r).expect("tail report serializes"));
            Ok(0)
        }
        Command::Oracle(cmd) => oracle(cmd),
    }
}

fn oracle(cmd: OracleCommand) -> Outcome {
    let value = match cmd {
        OracleCommand::ExactExpCost {
            model,
            pair: p,
            payoff,
            g,
            n,
            start,
        } => {
            let m = load(&model)?;
            let (s1, s2) = pair(&m, &p)?;
            let start = state(&m, start.as_deref())?;
            let table = build_cost_table(&m, payoff.payoff(&m), g);
            let log_value = exact_exp_cost(&m, &table, &s1, &s2, start, n)?;
            json!({
                "schema_version": SCHEMA_VERSION,
                "model_hash": m.hash(),
                "g": g,
                "n": n,
                "start": m.states[start],
                "log_value": log_value,
            })
        }
        OracleCommand::PerronMu { model, pair: p, payoff, g } => {
            let m = load(&model)?;
            let (s1, s2) = pair(&m, &p)?;
            let table = build_cost_table(&m, payoff.payoff(&m), g);
            json!({
                "schema_version": SCHEMA_VERSION,
                "model_hash": m.hash(),
                "g": g,
                "mu": perron_mu(&m, &table, &s1, &s2)?,
            })
        }
        OracleCommand::CostTable { model, payoff, g } => {
            let m = load(&model)?;
            build_cost_table(&m, payoff.payoff(&m), g).to_json(&m)
        }
        OracleCommand::SpectralRadius { matrix: path } => {
            let a = matrix(&path)?;
            json!({
                "schema_version": SCHEMA_VERSION,
                "spectral_radius": spectral_radius(&a)?,
            })
        }
        OracleCommand::GridMinimax { matrix: path, grid } => {
            let game = MatrixGame::new(matrix(&path)?)?;
            let lp = solve_matrix_game(&game);
            json!({
                "schema_version": SCHEMA_VERSION,
                "grid_points": grid,
                "grid_minimax": grid_minimax(&game, grid)?,
                "grid_maximin": grid_maximin(&game, grid)?,
                "lp_value": lp.value,
            })
        }
    };
    emit(&value);
    Ok(0)
}

fn threads(flag: Option<usize>) -> Result<usize, Failure> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var("RSGAME_THREADS") {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Failure::usage(format!("RSGAME_THREADS must be a positive integer, got `{v}`")))?,
            Err(_) => 1,
        },
    };
    if n == 0 {
        return Err(Failure::usage("thread count must be positive"));
    }
    Ok(n)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            if !e.to_string().contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    let outcome = threads(cli.threads).and_then(|n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
        run(cli)
    });
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            if f.code == EXIT_USAGE {
                eprintln!("run `rsgame --help` for usage");
            }
            ExitCode::from(f.code)
        }
    }
}
