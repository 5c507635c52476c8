//! Command-line surface: analytic evaluation, simulation, analytic-vs-MC
//! validation, distribution inspection and region-map generation.
//!
//! All numeric output uses nine significant digits and is byte-identical
//! for identical argument vectors and seeds, regardless of worker count.

use crate::catalan::{CatalanDistribution, CatalanKind};
use crate::closed_form::{
    revenue_ratio_efsm, revenue_ratio_hm, revenue_ratio_lsm, GammaZeroMode, MiningParams,
    StrategyMetrics,
};
use crate::race_sim::{run_monte_carlo, MonteCarloEstimate, SimulatedMetrics, StrategyKind};
use crate::sweep::{compute_map, emit_map, fmt_sig9, GridSpec, MapFormat, RegionMap, SmMode};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ARGS: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_IO: i32 = 4;

const GLOSSARY: &str = "parameter glossary:
  q       attacker's share of the network hashrate, 0 < q < 1/2
  gamma   fraction of the honest hashpower that mines on the attacker's
          fork during a tie
  b       block reward (--block-reward), defaults to 1
  tau0    average inter-block time of the whole network (--tau0),
          defaults to 1

environment:
  STUBBORN_LAB_THREADS   caps the worker count (0 or unset = automatic)";

#[derive(Debug, Parser)]
#[command(
    name = "stubborn-lab",
    version,
    about = "Profitability laboratory for stubborn Bitcoin mining strategies",
    after_help = GLOSSARY
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Hm,
    Sm,
    Lsm,
    Efsm,
}

impl StrategyArg {
    fn kind(self) -> StrategyKind {
        match self {
            StrategyArg::Hm => StrategyKind::Honest,
            StrategyArg::Sm => StrategyKind::Selfish,
            StrategyArg::Lsm => StrategyKind::LeadStubborn,
            StrategyArg::Efsm => StrategyKind::EqualForkStubborn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistKindArg {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Ppm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SmModeArg {
    Skip,
    Simulate,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form metrics for one strategy (hm, lsm, efsm; sm has none)
    Eval {
        /// Strategy to evaluate
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        /// Attacker hashrate share
        #[arg(long)]
        q: f64,
        /// Connectivity during ties; required for lsm and efsm
        #[arg(long)]
        gamma: Option<f64>,
        /// Block reward b
        #[arg(long, default_value_t = 1.0)]
        block_reward: f64,
        /// Average inter-block time tau0
        #[arg(long, default_value_t = 1.0)]
        tau0: f64,
        /// Evaluate the gamma -> 0 limit instead of refusing at gamma = 0
        #[arg(long)]
        limit: bool,
    },
    /// Monte Carlo estimates with standard errors for one strategy
    Simulate {
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        #[arg(long)]
        q: f64,
        /// Connectivity during ties; required for sm, lsm and efsm
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        block_reward: f64,
        #[arg(long, default_value_t = 1.0)]
        tau0: f64,
        /// Number of simulated attack cycles
        #[arg(long, default_value_t = 1_000_000)]
        cycles: u64,
        /// Master seed; cycle i draws from stream i of this seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Simulate and compare against the closed forms; nonzero exit on drift
    Validate {
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        block_reward: f64,
        #[arg(long, default_value_t = 1.0)]
        tau0: f64,
        #[arg(long, default_value_t = 1_000_000)]
        cycles: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Allowed deviation in standard errors
        #[arg(long, default_value_t = 4.0)]
        sigmas: f64,
    },
    /// Print a (p,q)-Catalan pmf next to empirical sampling frequencies
    Dist {
        /// first: C_n p (pq)^n; second: p at 0, C_{n-1} (pq)^n beyond
        #[arg(long, value_enum)]
        kind: DistKindArg,
        /// Honest share, 1/2 < p < 1
        #[arg(long)]
        p: f64,
        /// Largest tabulated support point
        #[arg(long, default_value_t = 10)]
        n_max: u64,
        /// Number of inverse-CDF draws
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Classify the (q, gamma) plane and write it as CSV or PPM
    Map {
        #[arg(long, default_value_t = 101)]
        q_steps: usize,
        #[arg(long, default_value_t = 101)]
        gamma_steps: usize,
        #[arg(long, default_value_t = crate::sweep::DEFAULT_Q_MIN)]
        q_min: f64,
        #[arg(long, default_value_t = crate::sweep::DEFAULT_Q_MAX)]
        q_max: f64,
        #[arg(long, default_value_t = 0.0)]
        gamma_min: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma_max: f64,
        /// Score selfish mining by per-cell simulation or skip it (score 0)
        #[arg(long, value_enum, default_value_t = SmModeArg::Skip)]
        sm_mode: SmModeArg,
        /// Per-cell cycles when sm-mode is simulate
        #[arg(long, default_value_t = 100_000)]
        cycles: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        /// Output file path
        #[arg(long)]
        output: PathBuf,
    },
}

/// Cap rayon's worker count from STUBBORN_LAB_THREADS (0 or unset = auto).
/// Results never depend on the worker count; this is purely a resource knob.
pub fn init_thread_pool_from_env() {
    if let Ok(value) = std::env::var("STUBBORN_LAB_THREADS") {
        if let Ok(n) = value.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

enum RunError {
    Args(String),
    Io(std::io::Error),
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

/// Execute a parsed command, writing human-readable key=value output.
/// Returns the process exit code: 0 ok, 2 bad arguments, 3 validation
/// failure, 4 I/O failure.
pub fn run(cli: Cli, out: &mut dyn Write) -> i32 {
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(RunError::Args(msg)) => {
            eprintln!("error: {msg}");
            EXIT_ARGS
        }
        Err(RunError::Io(err)) => {
            eprintln!("i/o error: {err}");
            EXIT_IO
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32, RunError> {
    match command {
        Command::Eval { strategy, q, gamma, block_reward, tau0, limit } => {
            eval_cmd(strategy, q, gamma, block_reward, tau0, limit, out)
        }
        Command::Simulate { strategy, q, gamma, block_reward, tau0, cycles, seed } => {
            simulate_cmd(strategy, q, gamma, block_reward, tau0, cycles, seed, out)
        }
        Command::Validate { strategy, q, gamma, block_reward, tau0, cycles, seed, sigmas } => {
            validate_cmd(strategy, q, gamma, block_reward, tau0, cycles, seed, sigmas, out)
        }
        Command::Dist { kind, p, n_max, samples, seed } => {
            dist_cmd(kind, p, n_max, samples, seed, out)
        }
        Command::Map {
            q_steps,
            gamma_steps,
            q_min,
            q_max,
            gamma_min,
            gamma_max,
            sm_mode,
            cycles,
            seed,
            format,
            output,
        } => map_cmd(
            q_steps, gamma_steps, q_min, q_max, gamma_min, gamma_max, sm_mode, cycles, seed,
            format, output, out,
        ),
    }
}

fn build_params(
    strategy: StrategyArg,
    q: f64,
    gamma: Option<f64>,
    block_reward: f64,
    tau0: f64,
) -> Result<MiningParams, RunError> {
    let params = if strategy == StrategyArg::Hm {
        MiningParams::honest_baseline(q, block_reward, tau0)
    } else {
        let gamma = gamma.ok_or_else(|| {
            RunError::Args(format!("--gamma is required for strategy {}", strategy.kind().label()))
        })?;
        MiningParams::new(q, gamma, block_reward, tau0)
    };
    params.map_err(|e| RunError::Args(e.to_string()))
}

fn print_metrics(out: &mut dyn Write, params: &MiningParams, label: &str, m: &StrategyMetrics) -> Result<(), RunError> {
    writeln!(out, "strategy={label}")?;
    writeln!(out, "q={}", fmt_sig9(params.q()))?;
    writeln!(out, "gamma={}", fmt_sig9(params.gamma()))?;
    writeln!(out, "block_reward={}", fmt_sig9(params.block_reward()))?;
    writeln!(out, "tau0={}", fmt_sig9(params.tau0()))?;
    writeln!(out, "revenue_ratio={}", fmt_sig9(m.revenue_ratio))?;
    writeln!(out, "delta={}", fmt_sig9(m.delta))?;
    writeln!(out, "q_tilde={}", fmt_sig9(m.apparent_hashrate))?;
    writeln!(out, "expected_duration={}", fmt_sig9(m.expected_cycle_duration))?;
    writeln!(out, "expected_revenue={}", fmt_sig9(m.expected_cycle_revenue))?;
    Ok(())
}

fn closed_form_metrics(
    strategy: StrategyArg,
    params: &MiningParams,
    mode: GammaZeroMode,
) -> Result<StrategyMetrics, RunError> {
    match strategy {
        StrategyArg::Hm => Ok(revenue_ratio_hm(params)),
        StrategyArg::Lsm => revenue_ratio_lsm(params, mode).map_err(|e| RunError::Args(e.to_string())),
        StrategyArg::Efsm => revenue_ratio_efsm(params, mode).map_err(|e| RunError::Args(e.to_string())),
        StrategyArg::Sm => Err(RunError::Args(
            "selfish mining has no closed form here; use `simulate --strategy sm`".into(),
        )),
    }
}

fn eval_cmd(
    strategy: StrategyArg,
    q: f64,
    gamma: Option<f64>,
    block_reward: f64,
    tau0: f64,
    limit: bool,
    out: &mut dyn Write,
) -> Result<i32, RunError> {
    let params = build_params(strategy, q, gamma, block_reward, tau0)?;
    let mode = if limit { GammaZeroMode::Limit } else { GammaZeroMode::Strict };
    let metrics = closed_form_metrics(strategy, &params, mode)?;
    print_metrics(out, &params, strategy.kind().label(), &metrics)?;
    Ok(EXIT_OK)
}

fn print_estimate(out: &mut dyn Write, name: &str, est: &MonteCarloEstimate) -> Result<(), RunError> {
    writeln!(
        out,
        "{name}_mean={} {name}_stderr={}",
        fmt_sig9(est.mean),
        fmt_sig9(est.std_error)
    )?;
    Ok(())
}

fn print_simulated(out: &mut dyn Write, m: &SimulatedMetrics) -> Result<(), RunError> {
    print_estimate(out, "duration", &m.duration)?;
    print_estimate(out, "revenue", &m.revenue)?;
    print_estimate(out, "official_blocks", &m.official_blocks)?;
    print_estimate(out, "n_prime", &m.n_prime)?;
    print_estimate(out, "revenue_ratio", &m.revenue_ratio)?;
    print_estimate(out, "delta", &m.delta)?;
    print_estimate(out, "q_hat", &m.apparent_hashrate)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate_cmd(
    strategy: StrategyArg,
    q: f64,
    gamma: Option<f64>,
    block_reward: f64,
    tau0: f64,
    cycles: u64,
    seed: u64,
    out: &mut dyn Write,
) -> Result<i32, RunError> {
    let params = build_params(strategy, q, gamma, block_reward, tau0)?;
    let metrics = run_monte_carlo(strategy.kind(), &params, cycles, seed)
        .map_err(|e| RunError::Args(e.to_string()))?;
    writeln!(out, "strategy={}", strategy.kind().label())?;
    writeln!(out, "q={}", fmt_sig9(params.q()))?;
    writeln!(out, "gamma={}", fmt_sig9(params.gamma()))?;
    writeln!(out, "cycles={cycles}")?;
    writeln!(out, "seed={seed}")?;
    print_simulated(out, &metrics)?;
    Ok(EXIT_OK)
}

struct Comparison {
    name: &'static str,
    estimate: MonteCarloEstimate,
    theory: f64,
}

fn comparisons(theory: &StrategyMetrics, sim: &SimulatedMetrics, params: &MiningParams, n_prime_theory: f64) -> Vec<Comparison> {
    // E[N v N'] follows from delta's definition
    let official_theory = theory.expected_cycle_duration / (params.tau0() * theory.delta);
    vec![
        Comparison { name: "duration", estimate: sim.duration, theory: theory.expected_cycle_duration },
        Comparison { name: "revenue", estimate: sim.revenue, theory: theory.expected_cycle_revenue },
        Comparison { name: "official_blocks", estimate: sim.official_blocks, theory: official_theory },
        Comparison { name: "n_prime", estimate: sim.n_prime, theory: n_prime_theory },
        Comparison { name: "revenue_ratio", estimate: sim.revenue_ratio, theory: theory.revenue_ratio },
        Comparison { name: "delta", estimate: sim.delta, theory: theory.delta },
        Comparison { name: "q_hat", estimate: sim.apparent_hashrate, theory: theory.apparent_hashrate },
    ]
}

#[allow(clippy::too_many_arguments)]
fn validate_cmd(
    strategy: StrategyArg,
    q: f64,
    gamma: Option<f64>,
    block_reward: f64,
    tau0: f64,
    cycles: u64,
    seed: u64,
    sigmas: f64,
    out: &mut dyn Write,
) -> Result<i32, RunError> {
    if sigmas <= 0.0 || sigmas.is_nan() {
        return Err(RunError::Args(format!("--sigmas must be positive, got {sigmas}")));
    }
    let params = build_params(strategy, q, gamma, block_reward, tau0)?;
    let sim = run_monte_carlo(strategy.kind(), &params, cycles, seed)
        .map_err(|e| RunError::Args(e.to_string()))?;
    writeln!(out, "strategy={}", strategy.kind().label())?;
    writeln!(out, "q={} gamma={}", fmt_sig9(params.q()), fmt_sig9(params.gamma()))?;
    writeln!(out, "cycles={cycles} seed={seed} sigmas={}", fmt_sig9(sigmas))?;

    if strategy == StrategyArg::Sm {
        writeln!(out, "note=selfish mining has no closed form; reporting estimates only")?;
        print_simulated(out, &sim)?;
        writeln!(out, "result=pass")?;
        return Ok(EXIT_OK);
    }

    // validation compares against the gamma -> 0 limits at gamma = 0; the
    // simulator has no singularity there
    let theory = closed_form_metrics(strategy, &params, GammaZeroMode::Limit)?;
    let n_prime_theory = match strategy {
        StrategyArg::Hm => params.q(),
        StrategyArg::Lsm => {
            CatalanDistribution::new(CatalanKind::SecondType, params.p())
                .map_err(|e| RunError::Args(e.to_string()))?
                .mean()
        }
        StrategyArg::Efsm => {
            CatalanDistribution::new(CatalanKind::FirstType, params.p())
                .map_err(|e| RunError::Args(e.to_string()))?
                .mean()
        }
        StrategyArg::Sm => unreachable!(),
    };

    let mut all_ok = true;
    for cmp in comparisons(&theory, &sim, &params, n_prime_theory) {
        let drift = cmp.estimate.sigmas_from(cmp.theory);
        let ok = drift <= sigmas;
        all_ok &= ok;
        writeln!(
            out,
            "{}: sim={} se={} theory={} sigmas={} {}",
            cmp.name,
            fmt_sig9(cmp.estimate.mean),
            fmt_sig9(cmp.estimate.std_error),
            fmt_sig9(cmp.theory),
            fmt_sig9(drift),
            if ok { "ok" } else { "FAIL" }
        )?;
    }
    writeln!(out, "result={}", if all_ok { "pass" } else { "fail" })?;
    Ok(if all_ok { EXIT_OK } else { EXIT_VALIDATION })
}

fn dist_cmd(
    kind: DistKindArg,
    p: f64,
    n_max: u64,
    samples: u64,
    seed: u64,
    out: &mut dyn Write,
) -> Result<i32, RunError> {
    if samples == 0 {
        return Err(RunError::Args("--samples must be positive".into()));
    }
    if n_max > 64 {
        return Err(RunError::Args(format!("--n-max must be at most 64, got {n_max}")));
    }
    let (catalan_kind, label) = match kind {
        DistKindArg::First => (CatalanKind::FirstType, "first"),
        DistKindArg::Second => (CatalanKind::SecondType, "second"),
    };
    let dist = CatalanDistribution::new(catalan_kind, p)
        .map_err(|e| RunError::Args(e.to_string()))?;

    let mut counts = vec![0u64; n_max as usize + 2];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let x = dist.sample(&mut rng);
        let bin = (x as usize).min(n_max as usize + 1);
        counts[bin] += 1;
    }

    writeln!(
        out,
        "# {label}-type (p,q)-Catalan, p={}, samples={samples}, seed={seed}",
        fmt_sig9(p)
    )?;
    writeln!(out, "n pmf empirical")?;
    let mut tabulated = 0.0;
    for n in 0..=n_max {
        let mass = dist.pmf(n);
        tabulated += mass;
        let freq = counts[n as usize] as f64 / samples as f64;
        writeln!(out, "{n} {} {}", fmt_sig9(mass), fmt_sig9(freq))?;
    }
    let tail_freq = counts[n_max as usize + 1] as f64 / samples as f64;
    let tail_mass = (1.0 - tabulated).max(0.0);
    writeln!(out, ">{n_max} {} {}", fmt_sig9(tail_mass), fmt_sig9(tail_freq))?;
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn map_cmd(
    q_steps: usize,
    gamma_steps: usize,
    q_min: f64,
    q_max: f64,
    gamma_min: f64,
    gamma_max: f64,
    sm_mode: SmModeArg,
    cycles: u64,
    seed: u64,
    format: FormatArg,
    output: PathBuf,
    out: &mut dyn Write,
) -> Result<i32, RunError> {
    let grid = GridSpec::new(q_min, q_max, gamma_min, gamma_max, q_steps, gamma_steps)
        .map_err(|e| RunError::Args(e.to_string()))?;
    let mode = match sm_mode {
        SmModeArg::Skip => SmMode::Skip,
        SmModeArg::Simulate => SmMode::Simulate { n_cycles: cycles, seed },
    };
    let map = compute_map(&grid, mode).map_err(|e| RunError::Args(e.to_string()))?;
    let bytes = emit_map(
        &map,
        match format {
            FormatArg::Csv => MapFormat::Csv,
            FormatArg::Ppm => MapFormat::Ppm,
        },
    );
    std::fs::write(&output, &bytes)?;
    writeln!(out, "{}", summary_line(&map))?;
    writeln!(out, "wrote={}", output.display())?;
    Ok(EXIT_OK)
}

fn summary_line(map: &RegionMap) -> String {
    let counts = map.region_counts();
    let mut line = format!("cells={}", map.cells.len());
    for (kind, count) in StrategyKind::ALL.iter().zip(counts) {
        let _ = write!(line, " {}={count}", kind.label());
    }
    line
}
