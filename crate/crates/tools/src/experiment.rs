//! Seeded experiment sweeps: generate, analyze, simulate, cross-check, and
//! write CSV reports.

use std::fs;
use std::path::{Path as StdPath, PathBuf};

use anyhow::{ensure, Context, Result};
use serde::{Deserialize, Serialize};
use sp2_core::rta::{analyze_all, dominance_of, AnalysisResult, AnalyzeOptions, DominanceReport};
use sp2_core::sim::{check_trace, simulate, EventKind, ReleasePattern};
use sp2_core::{FlowSet, Topology};

use crate::format::{analysis_csv_row, ANALYSIS_CSV_HEADER};
use crate::generate::{generate_flowset, GeneratorParams};

/// A sweep of `instances` generated flow sets, seeds `base_seed` upward.
/// Every instance is analyzed by both tests, simulated under synchronous
/// release plus `sporadic_runs` sporadic seeds, and cross-checked.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub rows: u16,
    pub cols: u16,
    #[serde(default)]
    pub core_links: bool,
    pub flows: u32,
    pub flits: [u64; 2],
    pub period: [u64; 2],
    pub deadline_factor: [f64; 2],
    pub instances: u64,
    pub base_seed: u64,
    #[serde(default = "default_sporadic_runs")]
    pub sporadic_runs: u64,
    /// Probability of stretching a sporadic gap by one more cycle.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    /// Simulation horizon: twice the longest period, capped here.
    #[serde(default = "default_horizon_cap")]
    pub horizon_cap: u64,
    /// Default output directory for this experiment's CSV files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

fn default_sporadic_runs() -> u64 {
    20
}

fn default_jitter() -> f64 {
    0.25
}

fn default_horizon_cap() -> u64 {
    1_000_000
}

impl ExperimentConfig {
    fn generator_params(&self, seed: u64) -> GeneratorParams {
        GeneratorParams {
            rows: self.rows,
            cols: self.cols,
            core_links: self.core_links,
            flows: self.flows,
            flits: self.flits,
            period: self.period,
            deadline_factor: self.deadline_factor,
            seed,
        }
    }
}

/// Everything measured on one generated instance.
#[derive(Debug, Clone)]
pub struct InstanceOutcome {
    pub seed: u64,
    /// Demand of the busiest link: the largest per-link sum of
    /// `c_hat / period` over the flows crossing it.
    pub utilization: f64,
    pub analysis: AnalysisResult,
    pub dominance: DominanceReport,
    pub miss_count: u64,
    /// Simulation runs in which a flow passed by the suspension-aware test
    /// missed a deadline or ran past its bound, counted per flow and run.
    pub sufficiency_violations: u64,
    pub trace_violations: u64,
    pub model_violations: u64,
}

impl InstanceOutcome {
    pub fn schedulable_sp2(&self) -> bool {
        self.analysis.all_schedulable_sp2()
    }

    pub fn schedulable_baseline(&self) -> bool {
        self.analysis.all_schedulable_baseline()
    }
}

/// Acceptance counts for one utilization bin `[lo, hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinStat {
    pub lo: f64,
    pub hi: f64,
    pub instances: u64,
    pub schedulable_sp2: u64,
    pub schedulable_baseline: u64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub outcomes: Vec<InstanceOutcome>,
    pub bins: Vec<BinStat>,
    pub dominance_violations: u64,
    pub sufficiency_violations: u64,
    pub trace_violations: u64,
    /// Runs in which some flow's release arrived while its previous
    /// message was unfinished. Expected under overload; reported, but not
    /// a cross-check failure.
    pub model_violations: u64,
}

impl ExperimentReport {
    /// True when every cross-check held on every instance.
    pub fn clean(&self) -> bool {
        self.dominance_violations == 0
            && self.sufficiency_violations == 0
            && self.trace_violations == 0
    }
}

const BIN_WIDTH: f64 = 0.1;

/// Runs the whole sweep in memory. Deterministic: every random draw
/// derives from `base_seed` and the instance/run indices.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    ensure!(
        (0.0..1.0).contains(&config.jitter),
        "jitter must lie in [0, 1)"
    );
    ensure!(config.horizon_cap >= 1, "horizon cap must be positive");
    let mut outcomes = Vec::with_capacity(config.instances as usize);
    for i in 0..config.instances {
        let seed = config.base_seed.wrapping_add(i);
        let params = config.generator_params(seed);
        let (topo, fs) =
            generate_flowset(&params).with_context(|| format!("instance seed {seed}"))?;
        outcomes.push(run_instance(config, seed, &topo, &fs)?);
    }
    let bins = bin_outcomes(&outcomes);
    let dominance_violations =
        outcomes.iter().map(|o| o.dominance.violations.len() as u64).sum();
    let sufficiency_violations = outcomes.iter().map(|o| o.sufficiency_violations).sum();
    let trace_violations = outcomes.iter().map(|o| o.trace_violations).sum();
    let model_violations = outcomes.iter().map(|o| o.model_violations).sum();
    Ok(ExperimentReport {
        outcomes,
        bins,
        dominance_violations,
        sufficiency_violations,
        trace_violations,
        model_violations,
    })
}

fn run_instance(
    config: &ExperimentConfig,
    seed: u64,
    topo: &Topology,
    fs: &FlowSet,
) -> Result<InstanceOutcome> {
    let analysis = analyze_all(fs, &AnalyzeOptions::default())?;
    let dominance = dominance_of(&analysis);
    let utilization = peak_link_utilization(topo, fs);

    let mut miss_count = 0;
    let mut sufficiency_violations = 0;
    let mut trace_violations = 0;
    let mut model_violations = 0;
    if !fs.is_empty() {
        let max_period = fs.flows().iter().map(|f| f.period).max().unwrap();
        let horizon = (2 * max_period).min(config.horizon_cap);
        for run in 0..=config.sporadic_runs {
            let pattern = if run == 0 {
                ReleasePattern::synchronous(fs, horizon)
            } else {
                ReleasePattern::sporadic(fs, horizon, mix_seed(seed, run), config.jitter)
            };
            let outcome = simulate(fs, &pattern, horizon, topo.link_count())?;
            miss_count += outcome.miss_count;
            trace_violations += check_trace(&outcome.trace, fs).len() as u64;
            if !outcome.valid {
                model_violations += 1;
            }
            for (idx, row) in analysis.rows.iter().enumerate() {
                let Some(bound) = row.r_sp2 else { continue };
                let missed = outcome
                    .trace
                    .events()
                    .iter()
                    .any(|e| e.kind == EventKind::Miss && e.flow == row.id);
                let over = outcome.responses[idx].iter().any(|&r| r > bound);
                if missed || over {
                    sufficiency_violations += 1;
                }
            }
        }
    }

    Ok(InstanceOutcome {
        seed,
        utilization,
        analysis,
        dominance,
        miss_count,
        sufficiency_violations,
        trace_violations,
        model_violations,
    })
}

/// Derives the release-pattern seed of one sporadic run from the instance
/// seed, keeping runs decorrelated without any shared state.
fn mix_seed(seed: u64, run: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(run)
}

pub fn peak_link_utilization(topo: &Topology, fs: &FlowSet) -> f64 {
    let mut per_link = vec![0.0f64; topo.link_count()];
    for f in fs.flows() {
        let share = f.effective_time() as f64 / f.period as f64;
        for &l in f.path.links() {
            per_link[l.0 as usize] += share;
        }
    }
    per_link.iter().copied().fold(0.0, f64::max)
}

fn bin_outcomes(outcomes: &[InstanceOutcome]) -> Vec<BinStat> {
    let Some(top) = outcomes
        .iter()
        .map(|o| (o.utilization / BIN_WIDTH) as usize)
        .max()
    else {
        return Vec::new();
    };
    let mut bins: Vec<BinStat> = (0..=top)
        .map(|i| BinStat {
            lo: i as f64 * BIN_WIDTH,
            hi: (i + 1) as f64 * BIN_WIDTH,
            instances: 0,
            schedulable_sp2: 0,
            schedulable_baseline: 0,
        })
        .collect();
    for o in outcomes {
        let bin = &mut bins[(o.utilization / BIN_WIDTH) as usize];
        bin.instances += 1;
        bin.schedulable_sp2 += u64::from(o.schedulable_sp2());
        bin.schedulable_baseline += u64::from(o.schedulable_baseline());
    }
    bins
}

/// Writes `instances.csv`, `flows.csv`, and `summary.csv` under `dir`.
/// Output bytes depend only on the report.
pub fn write_report(report: &ExperimentReport, dir: &StdPath) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let mut instances = String::from(
        "seed,utilization,schedulable_sp2,schedulable_baseline,miss_count,\
         dominance_violations,sufficiency_violations,trace_violations,model_violations\n",
    );
    for o in &report.outcomes {
        instances.push_str(&format!(
            "{},{:.6},{},{},{},{},{},{},{}\n",
            o.seed,
            o.utilization,
            o.schedulable_sp2(),
            o.schedulable_baseline(),
            o.miss_count,
            o.dominance.violations.len(),
            o.sufficiency_violations,
            o.trace_violations,
            o.model_violations,
        ));
    }

    let mut flows = String::from("seed,");
    flows.push_str(ANALYSIS_CSV_HEADER);
    flows.push('\n');
    for o in &report.outcomes {
        for row in &o.analysis.rows {
            flows.push_str(&format!("{},{}\n", o.seed, analysis_csv_row(row)));
        }
    }

    let mut summary =
        String::from("bin_lo,bin_hi,instances,ratio_sp2,ratio_baseline\n");
    for b in &report.bins {
        let ratio = |n: u64| {
            if b.instances == 0 { 0.0 } else { n as f64 / b.instances as f64 }
        };
        summary.push_str(&format!(
            "{:.1},{:.1},{},{:.4},{:.4}\n",
            b.lo,
            b.hi,
            b.instances,
            ratio(b.schedulable_sp2),
            ratio(b.schedulable_baseline),
        ));
    }

    let mut written = Vec::new();
    for (name, text) in [
        ("instances.csv", instances),
        ("flows.csv", flows),
        ("summary.csv", summary),
    ] {
        let path = dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(instances: u64) -> ExperimentConfig {
        ExperimentConfig {
            rows: 3,
            cols: 3,
            core_links: false,
            flows: 5,
            flits: [1, 20],
            period: [50, 400],
            deadline_factor: [0.7, 1.0],
            instances,
            base_seed: 7,
            sporadic_runs: 3,
            jitter: 0.25,
            horizon_cap: 1_000_000,
            out_dir: None,
        }
    }

    #[test]
    fn zero_instances_is_an_empty_report() {
        let report = run_experiment(&config(0)).unwrap();
        assert!(report.outcomes.is_empty());
        assert!(report.bins.is_empty());
        assert!(report.clean());
    }

    #[test]
    fn sweep_is_clean_and_reproducible() {
        let report = run_experiment(&config(20)).unwrap();
        assert!(report.clean(), "cross-checks failed: {report:?}");
        assert_eq!(report.outcomes.len(), 20);
        let again = run_experiment(&config(20)).unwrap();
        for (a, b) in report.outcomes.iter().zip(&again.outcomes) {
            assert_eq!(a.seed, b.seed);
            assert_eq!(a.utilization, b.utilization);
            assert_eq!(a.miss_count, b.miss_count);
            assert_eq!(a.analysis.sp2_responses(), b.analysis.sp2_responses());
        }
        assert_eq!(report.bins, again.bins);
        let total: u64 = report.bins.iter().map(|b| b.instances).sum();
        assert_eq!(total, 20);
    }

    #[test]
    fn report_files_are_deterministic() {
        let report = run_experiment(&config(5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let first = write_report(&report, &dir.path().join("a")).unwrap();
        let second = write_report(&report, &dir.path().join("b")).unwrap();
        assert_eq!(first.len(), 3);
        for (a, b) in first.iter().zip(&second) {
            let bytes_a = fs::read(a).unwrap();
            assert!(!bytes_a.is_empty());
            assert_eq!(bytes_a, fs::read(b).unwrap());
        }
        let flows = fs::read_to_string(&first[1]).unwrap();
        assert_eq!(flows.lines().count(), 1 + 5 * 5);
    }
}
