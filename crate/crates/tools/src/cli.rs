//! The `sp2` command line.
//!
//! Exit codes: 0 on success, 1 when a run completed but a cross-check
//! failed (dominance, sufficiency, or a trace invariant), 2 on usage or
//! I/O errors.

use std::io::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sp2_core::progression::{count_series, series_bounds, Capacity, DEFAULT_BUDGET};
use sp2_core::rta::{analyze_all, AnalyzeOptions, XPolicy};
use sp2_core::sim::{check_trace, simulate, ReleasePattern};

use crate::experiment::{run_experiment, write_report, ExperimentConfig};
use crate::format;
use crate::generate::{generate_flowset, GeneratorParams};

/// Environment variable naming the default output directory for
/// `experiment` runs.
pub const OUT_DIR_ENV: &str = "SP2_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "sp2",
    version,
    about = "Analysis, simulation, and experiment workbench for all-or-nothing \
             network-on-chip switching"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run both schedulability tests on a flow-set file and emit CSV
    Analyze {
        flowset: PathBuf,
        /// Suspension-assignment policy of the suspension-aware test
        #[arg(long, value_enum, default_value_t = PolicyArg::Default)]
        x_policy: PolicyArg,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a flow-set file and emit the schedule trace
    Simulate {
        flowset: PathBuf,
        /// Number of cycles to run
        #[arg(long)]
        horizon: u64,
        #[arg(long, value_enum, default_value_t = ReleasesArg::Sync)]
        releases: ReleasesArg,
        /// Seed for periodic offsets and sporadic gaps
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Probability of stretching a sporadic gap by one more cycle
        #[arg(long, default_value_t = 0.25)]
        jitter: f64,
        /// Write the trace here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print bounds on the cycles one unobstructed message can take
    Enumerate {
        #[arg(long)]
        flits: u64,
        /// Links on the message's path
        #[arg(long)]
        links: usize,
        /// Per-buffer flit capacity (unbounded when omitted)
        #[arg(long)]
        capacity: Option<u64>,
        /// Also count the distinct transmission schedules
        #[arg(long)]
        count: bool,
        /// Distinct-state budget for the enumeration
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Generate a random flow set and write it to a file
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        rows: u16,
        #[arg(long)]
        cols: u16,
        #[arg(long)]
        flows: u32,
        #[arg(long, default_value_t = 1)]
        flits_min: u64,
        #[arg(long, default_value_t = 32)]
        flits_max: u64,
        #[arg(long, default_value_t = 100)]
        period_min: u64,
        #[arg(long, default_value_t = 1000)]
        period_max: u64,
        /// Smallest deadline factor (deadline = factor * period)
        #[arg(long, default_value_t = 0.8)]
        deadline_min: f64,
        #[arg(long, default_value_t = 1.0)]
        deadline_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Add per-router core injection/ejection links
        #[arg(long)]
        core_links: bool,
    },
    /// Run a seeded generate/analyze/simulate sweep from a config file
    Experiment {
        config: PathBuf,
        /// Output directory (else config `out_dir`, then $SP2_OUT_DIR, then `.`)
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    /// Suspension charged as release jitter wherever it can occur
    Default,
    /// Minimum over all suspension assignments (capped)
    Exhaustive,
    /// Every direct blocker charged as release jitter
    AllZero,
}

impl From<PolicyArg> for XPolicy {
    fn from(p: PolicyArg) -> XPolicy {
        match p {
            PolicyArg::Default => XPolicy::SuspensionAsJitter,
            PolicyArg::Exhaustive => XPolicy::Exhaustive,
            PolicyArg::AllZero => XPolicy::AllZero,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReleasesArg {
    /// Every flow releases at cycle 0 and then strictly periodically
    Sync,
    /// Strictly periodic from a seeded offset within each period
    Periodic,
    /// Period-plus-random-gap releases from the seed
    Sporadic,
}

/// Parses `argv`, runs the chosen subcommand, and returns the exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Analyze { flowset, x_policy, out } => analyze(&flowset, x_policy, out),
        Command::Simulate { flowset, horizon, releases, seed, jitter, out } => {
            run_simulate(&flowset, horizon, releases, seed, jitter, out)
        }
        Command::Enumerate { flits, links, capacity, count, budget } => {
            enumerate(flits, links, capacity, count, budget)
        }
        Command::Generate {
            out,
            rows,
            cols,
            flows,
            flits_min,
            flits_max,
            period_min,
            period_max,
            deadline_min,
            deadline_max,
            seed,
            core_links,
        } => {
            let params = GeneratorParams {
                rows,
                cols,
                core_links,
                flows,
                flits: [flits_min, flits_max],
                period: [period_min, period_max],
                deadline_factor: [deadline_min, deadline_max],
                seed,
            };
            let (topo, fs) = generate_flowset(&params)?;
            format::save_flowset(&out, &topo, &fs)?;
            eprintln!("wrote {} flows to {}", fs.len(), out.display());
            Ok(0)
        }
        Command::Experiment { config, out_dir } => experiment(&config, out_dir),
    }
}

fn emit(text: &str, out: Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(&path, text)
            .with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn analyze(flowset: &std::path::Path, policy: PolicyArg, out: Option<PathBuf>) -> Result<i32> {
    let (_, fs) = format::load_flowset(flowset)?;
    let options = AnalyzeOptions { x_policy: policy.into(), ..AnalyzeOptions::default() };
    let result = analyze_all(&fs, &options)?;
    emit(&format::analysis_csv(&result), out)?;
    Ok(0)
}

fn run_simulate(
    flowset: &std::path::Path,
    horizon: u64,
    releases: ReleasesArg,
    seed: u64,
    jitter: f64,
    out: Option<PathBuf>,
) -> Result<i32> {
    let (topo, fs) = format::load_flowset(flowset)?;
    let pattern = match releases {
        ReleasesArg::Sync => ReleasePattern::synchronous(&fs, horizon),
        ReleasesArg::Periodic => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let offsets: Vec<u64> =
                fs.flows().iter().map(|f| rng.gen_range(0..f.period)).collect();
            ReleasePattern::with_offsets(&fs, &offsets, horizon)?
        }
        ReleasesArg::Sporadic => ReleasePattern::sporadic(&fs, horizon, seed, jitter),
    };
    let outcome = simulate(&fs, &pattern, horizon, topo.link_count())?;
    let violations = check_trace(&outcome.trace, &fs);
    emit(&format::render_trace(&outcome.trace), out)?;
    eprintln!(
        "horizon={} misses={} trace_violations={} valid={}",
        horizon,
        outcome.miss_count,
        violations.len(),
        outcome.valid
    );
    for v in &violations {
        eprintln!("violation: {v}");
    }
    Ok(if violations.is_empty() && outcome.valid { 0 } else { 1 })
}

fn enumerate(
    flits: u64,
    links: usize,
    capacity: Option<u64>,
    count: bool,
    budget: usize,
) -> Result<i32> {
    let capacity = match capacity {
        None => Capacity::Unbounded,
        Some(k) => Capacity::Bounded(k),
    };
    let (min, max) = series_bounds(flits, links, capacity, budget)?;
    if count {
        let series = count_series(flits, links, capacity, budget)?;
        println!("min={min},max={max},count={series}");
    } else {
        println!("min={min},max={max}");
    }
    Ok(0)
}

fn experiment(config_path: &std::path::Path, out_dir: Option<PathBuf>) -> Result<i32> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", config_path.display()))?;
    let dir = out_dir
        .or_else(|| config.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let report = run_experiment(&config)?;
    let written = write_report(&report, &dir)?;
    println!(
        "instances={} dominance_violations={} sufficiency_violations={} \
         trace_violations={} model_violations={}",
        report.outcomes.len(),
        report.dominance_violations,
        report.sufficiency_violations,
        report.trace_violations,
        report.model_violations,
    );
    for b in &report.bins {
        let ratio = |n: u64| {
            if b.instances == 0 { 0.0 } else { n as f64 / b.instances as f64 }
        };
        println!(
            "bin {:.1}-{:.1}: instances={} sp2={:.4} baseline={:.4}",
            b.lo,
            b.hi,
            b.instances,
            ratio(b.schedulable_sp2),
            ratio(b.schedulable_baseline)
        );
    }
    for path in &written {
        eprintln!("wrote {}", path.display());
    }
    Ok(if report.clean() { 0 } else { 1 })
}
