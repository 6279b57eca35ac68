use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use oneshot::adversary::{build_grid, OracleKind, OracleReport};
use oneshot::interval::{numeric_interval_adversary, optimal_interval, worst_b, IntervalDensity, IntervalOracle};
use oneshot::lipschitz::{error, is_lipschitz};
use oneshot::metric::{estimate_doubling_dimension, randomized_lower_bound};
use oneshot::solver::{auto_oracle, build_oracle, constraint_generation, deterministic_baseline, SolverConfig};
use oneshot::{io, Error, MetricSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

mod bench;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "oneshot", version, about = "Single-sample average estimation on finite metric spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the sampling distribution for a metric.
    Solve {
        metric: PathBuf,
        #[command(flatten)]
        oracle: OracleArgs,
        #[arg(long, default_value_t = 1e-6)]
        rel_tol: f64,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
    },
    /// Find a worst-case function for a given distribution.
    Adversary {
        metric: PathBuf,
        distribution: PathBuf,
        #[command(flatten)]
        oracle: OracleArgs,
    },
    /// Randomized lower bound from the mean median distance.
    LowerBound {
        metric: PathBuf,
        /// Doubling dimension; estimated when absent.
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Estimation error of a function under a distribution.
    Eval {
        metric: PathBuf,
        function: PathBuf,
        distribution: PathBuf,
    },
    /// Closed-form optimum on the unit interval.
    Interval {
        #[command(subcommand)]
        action: Option<IntervalAction>,
    },
    /// Solve every fixture in a directory and print a CSV table.
    Bench {
        suite: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Oracle for every instance; chosen per instance when absent.
        #[arg(long)]
        oracle: Option<OracleName>,
        #[arg(long, default_value_t = bench::DEFAULT_GAMMA)]
        gamma: f64,
        /// Append a wall-time column (makes the output nondeterministic).
        #[arg(long)]
        timing: bool,
    },
    /// Print a random metric fixture.
    GenFixture {
        #[arg(long, value_enum)]
        kind: FixtureKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
    },
}

#[derive(Subcommand)]
enum IntervalAction {
    /// Cross-check the closed form on a discretized interval.
    Verify {
        #[arg(long, default_value_t = 21)]
        grid_n: usize,
        #[arg(long, default_value_t = 0.01)]
        gamma: f64,
    },
}

#[derive(Args)]
struct OracleArgs {
    /// Chosen from the instance when absent.
    #[arg(long)]
    oracle: Option<OracleName>,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleName {
    Exact,
    LineDp,
    Grid,
}

impl From<OracleName> for OracleKind {
    fn from(o: OracleName) -> Self {
        match o {
            OracleName::Exact => OracleKind::Exact,
            OracleName::LineDp => OracleKind::LineDp,
            OracleName::Grid => OracleKind::Grid,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureKind {
    Line,
    Points,
}

#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    /// sha256 over the input files, in argument order.
    input_digest: String,
    config: Value,
    version: &'static str,
    wall_time_s: f64,
    result: Value,
}

enum Failure {
    Input(String),
    Resource(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InstanceTooLarge { .. } | Error::GridTooFine { .. } | Error::ClassTooLarge { .. } => {
                Failure::Resource(e.to_string())
            }
            _ => Failure::Input(e.to_string()),
        }
    }
}

type CmdResult = Result<Outcome, Failure>;

struct Outcome {
    command: &'static str,
    inputs: Vec<Vec<u8>>,
    config: Value,
    result: Value,
    converged: bool,
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn text(bytes: &[u8], path: &Path) -> Result<String, Failure> {
    String::from_utf8(bytes.to_vec()).map_err(|_| Failure::Input(format!("{}: not UTF-8", path.display())))
}

fn digest(inputs: &[Vec<u8>]) -> String {
    let mut h = Sha256::new();
    for bytes in inputs {
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn load_metric(path: &Path) -> Result<(MetricSpace, Vec<u8>), Failure> {
    let bytes = read(path)?;
    let space = io::parse_metric(&text(&bytes, path)?)?;
    Ok((space, bytes))
}

fn solver_config(space: &MetricSpace, args: &OracleArgs) -> SolverConfig {
    let oracle = args.oracle.map(OracleKind::from).unwrap_or_else(|| auto_oracle(space));
    SolverConfig {
        delta: args.delta,
        gamma_override: args.gamma,
        beta: args.beta,
        ..SolverConfig::default().with_oracle(oracle)
    }
}

fn resolved_beta(space: &MetricSpace, beta: Option<f64>) -> (f64, &'static str) {
    match beta {
        Some(b) => (b, "given"),
        None => (estimate_doubling_dimension(space), "estimated"),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn cmd_solve(metric: &Path, args: &OracleArgs, rel_tol: f64, max_iters: usize) -> CmdResult {
    let (space, bytes) = load_metric(metric)?;
    let config = SolverConfig {
        rel_tol,
        max_iters,
        ..solver_config(&space, args)
    };
    let r = constraint_generation(&space, &config)?;
    let (median, m) = deterministic_baseline(&space);
    eprintln!(
        "solve: n = {}, oracle = {}, upper = {:.6}, lower bound = {:.6}, baseline m = {:.6}, {} iterations{}",
        space.len(),
        config.oracle,
        r.upper,
        r.lower_bound,
        m,
        r.iterations,
        if r.converged { "" } else { " (not converged)" }
    );
    Ok(Outcome {
        command: "solve",
        inputs: vec![bytes],
        config: to_value(&config),
        result: json!({
            "p": r.p.probs(),
            "upper": r.upper,
            "upper_on_l": r.upper_on_l,
            "lower_bound": r.lower_bound,
            "deterministic_baseline": m,
            "median": { "index": median, "label": space.labels()[median] },
            "iterations": r.iterations,
            "converged": r.converged,
            "active_set_size": r.active_set.len(),
            "guarantee": r.guarantee,
            "beta": r.beta,
            "scale": space.scale(),
        }),
        converged: r.converged,
    })
}

fn cmd_adversary(metric: &Path, distribution: &Path, args: &OracleArgs) -> CmdResult {
    let (space, metric_bytes) = load_metric(metric)?;
    let dist_bytes = read(distribution)?;
    let p = io::parse_distribution(&text(&dist_bytes, distribution)?)?;
    if p.len() != space.len() {
        return Err(Error::DimensionMismatch {
            expected: space.len(),
            found: p.len(),
        }
        .into());
    }
    let config = solver_config(&space, args);
    config.validate()?;
    let (beta, _) = resolved_beta(&space, args.beta);
    let report: OracleReport = build_oracle(&space, &config, beta)?.separate(&p)?;
    eprintln!("adversary: oracle = {}, value = {:.6}", config.oracle, report.value);
    let mut cfg = to_value(&config);
    cfg["beta"] = json!(beta);
    if config.oracle == OracleKind::Grid {
        let grid = build_grid(&space, beta, config.delta, config.gamma_override)?;
        cfg["gamma"] = json!(grid.gamma);
        cfg["delta"] = json!(grid.delta);
    }
    Ok(Outcome {
        command: "adversary",
        inputs: vec![metric_bytes, dist_bytes],
        config: cfg,
        result: json!({
            "witness": report.witness,
            "value": report.value,
            "guarantee": report.guarantee,
        }),
        converged: true,
    })
}

fn cmd_lower_bound(metric: &Path, beta: Option<f64>) -> CmdResult {
    let (space, bytes) = load_metric(metric)?;
    let (beta, source) = resolved_beta(&space, beta);
    let median = space.one_median();
    let lb = randomized_lower_bound(&median, beta)?;
    eprintln!(
        "lower-bound: beta = {beta} ({source}), m = {:.6}, bound = {lb:.6}",
        median.mean_distance
    );
    Ok(Outcome {
        command: "lower-bound",
        inputs: vec![bytes],
        config: json!({ "beta": beta, "beta_source": source }),
        result: json!({
            "lower_bound": lb,
            "mean_distance": median.mean_distance,
            "median_index": median.index,
            "beta": beta,
            "scale": space.scale(),
        }),
        converged: true,
    })
}

fn cmd_eval(metric: &Path, function: &Path, distribution: &Path) -> CmdResult {
    let (space, metric_bytes) = load_metric(metric)?;
    let f_bytes = read(function)?;
    let p_bytes = read(distribution)?;
    let f = io::parse_function(&text(&f_bytes, function)?)?;
    let p = io::parse_distribution(&text(&p_bytes, distribution)?)?;
    f.check_len(space.len())?;
    let value = error(&f, &p)?;
    let lipschitz = is_lipschitz(&space, &f, 1e-9);
    eprintln!("eval: error = {value:.6}, lipschitz = {lipschitz}");
    Ok(Outcome {
        command: "eval",
        inputs: vec![metric_bytes, f_bytes, p_bytes],
        config: json!({}),
        result: json!({ "error": value, "average": f.average(), "lipschitz": lipschitz }),
        converged: true,
    })
}

fn cmd_interval(action: Option<&IntervalAction>) -> CmdResult {
    let s = optimal_interval();
    match action {
        None => {
            let (b, worst) = worst_b(s.c)?;
            eprintln!("interval: c = {:.6}, value = {:.6}", s.c, s.value);
            Ok(Outcome {
                command: "interval",
                inputs: vec![],
                config: json!({}),
                result: json!({
                    "c": s.c,
                    "support": [s.support.0, s.support.1],
                    "value": s.value,
                    "b_star": s.b_star,
                    "worst_b": b,
                    "worst_value": worst,
                }),
                converged: true,
            })
        }
        Some(IntervalAction::Verify { grid_n, gamma }) => {
            let density = IntervalDensity::UniformOn {
                lo: s.support.0,
                hi: s.support.1,
            };
            let oracle = IntervalOracle::LineDp { gamma: *gamma };
            let numeric = numeric_interval_adversary(&density, *grid_n, oracle)?.value;
            let gap = (numeric - s.value).abs();
            eprintln!("interval verify: closed form {:.6}, numeric {numeric:.6}, gap {gap:.2e}", s.value);
            Ok(Outcome {
                command: "interval verify",
                inputs: vec![],
                config: json!({ "grid_n": grid_n, "gamma": gamma }),
                result: json!({ "closed_form": s.value, "numeric": numeric, "gap": gap }),
                converged: true,
            })
        }
    }
}

fn gen_fixture(kind: FixtureKind, n: usize, seed: u64, dim: usize) -> Result<String, Failure> {
    if n < 2 {
        return Err(Failure::Input(format!("need at least 2 points, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = match kind {
        FixtureKind::Line => {
            let mut coords: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            coords.sort_by(f64::total_cmp);
            io::MetricInput::Line { coords, labels: None }
        }
        FixtureKind::Points => {
            if dim == 0 {
                return Err(Failure::Input("dim must be at least 1".into()));
            }
            let coords = (0..n).map(|_| (0..dim).map(|_| rng.gen()).collect()).collect();
            io::MetricInput::Points {
                dim,
                coords,
                labels: None,
            }
        }
    };
    Ok(serde_json::to_string(&input).expect("serializable"))
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("ONESHOT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::Input(format!("ONESHOT_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Input(e.to_string()))
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    configure_threads()?;
    let start = Instant::now();
    let outcome = match &cli.command {
        Command::Solve {
            metric,
            oracle,
            rel_tol,
            max_iters,
        } => cmd_solve(metric, oracle, *rel_tol, *max_iters)?,
        Command::Adversary {
            metric,
            distribution,
            oracle,
        } => cmd_adversary(metric, distribution, oracle)?,
        Command::LowerBound { metric, beta } => cmd_lower_bound(metric, *beta)?,
        Command::Eval {
            metric,
            function,
            distribution,
        } => cmd_eval(metric, function, distribution)?,
        Command::Interval { action } => cmd_interval(action.as_ref())?,
        Command::Bench {
            suite,
            seed,
            oracle,
            gamma,
            timing,
        } => {
            let csv = bench::run(suite, *seed, oracle.map(OracleKind::from), *gamma, *timing)?;
            print!("{csv}");
            return Ok(0);
        }
        Command::GenFixture { kind, n, seed, dim } => {
            println!("{}", gen_fixture(*kind, *n, *seed, *dim)?);
            return Ok(0);
        }
    };
    let manifest = RunManifest {
        command: outcome.command,
        input_digest: digest(&outcome.inputs),
        config: outcome.config,
        version: VERSION,
        wall_time_s: start.elapsed().as_secs_f64(),
        result: outcome.result,
    };
    println!("{}", serde_json::to_string_pretty(&manifest).expect("serializable"));
    Ok(if outcome.converged { 0 } else { 2 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Resource(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use oneshot::SamplingDistribution;

    #[test]
    fn digest_separates_inputs() {
        let a = digest(&[b"ab".to_vec(), b"c".to_vec()]);
        let b = digest(&[b"a".to_vec(), b"bc".to_vec()]);
        assert_ne!(a, b);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn resource_errors_map_to_their_own_code() {
        assert!(matches!(
            Failure::from(Error::InstanceTooLarge { n: 20, cap: 12 }),
            Failure::Resource(_)
        ));
        assert!(matches!(Failure::from(Error::NotALine), Failure::Input(_)));
    }

    #[test]
    fn fixtures_are_seeded() {
        let a = gen_fixture(FixtureKind::Points, 5, 7, 3).ok().unwrap();
        let b = gen_fixture(FixtureKind::Points, 5, 7, 3).ok().unwrap();
        assert_eq!(a, b);
        assert!(io::parse_metric(&a).is_ok());
    }

    #[test]
    fn unit_distribution_shape() {
        let p = SamplingDistribution::uniform(2);
        assert_eq!(to_value(&p), json!({ "p": [0.5, 0.5] }));
    }
}
