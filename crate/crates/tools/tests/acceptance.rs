//! The gate suite. One test per acceptance criterion; each prints a single
//! `criterion N: PASS` line with the measured evidence (visible with
//! `cargo test --test acceptance -- --nocapture`). A failed criterion fails
//! its test.

use std::path::Path as StdPath;
use std::sync::OnceLock;
use std::time::Instant;

use sp2_core::progression::{full_service_successor, series_bounds, BufferState, Capacity};
use sp2_core::rta::{
    analyze_all, baseline_rhs, dominance_of, sp2_rhs, suspension_as_jitter, AnalysisResult,
    AnalyzeOptions, BackPressure,
};
use sp2_core::sim::{
    check_trace, simulate, transparent_suspension_witnesses, EventKind, ReleasePattern,
};
use sp2_core::{FlowId, FlowSet, LinkId, Topology};
use sp2_tools::format::load_flowset;
use sp2_tools::generate::{generate_flowset, GeneratorParams};

const BUDGET: usize = sp2_core::progression::DEFAULT_BUDGET;

fn example1() -> (Topology, FlowSet) {
    let path = StdPath::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/example1.json");
    load_flowset(&path).expect("committed fixture parses")
}

#[test]
fn criterion_1_example_scenario_golden() {
    let started = Instant::now();
    let (topo, fs) = example1();
    let horizon = 60;
    let pattern = ReleasePattern::synchronous(&fs, horizon);
    let outcome = simulate(&fs, &pattern, horizon, topo.link_count()).unwrap();
    assert!(outcome.valid);

    // Completions at exactly 20, 40, 50.
    let mut completions = vec![None; fs.len()];
    for e in outcome.trace.events() {
        if e.kind == EventKind::Complete {
            let idx = fs.index_of(e.flow).unwrap();
            assert!(completions[idx].is_none(), "one message per flow in this window");
            completions[idx] = Some(e.time);
        }
    }
    assert_eq!(completions, vec![Some(20), Some(40), Some(50)]);

    // While the second flow transmits, the third holds no link at all, and
    // the stall scanner names the second flow as the out-of-sight blocker.
    let f2 = FlowId(2);
    let f3 = FlowId(3);
    for cycle in 0..horizon {
        let links = 0..topo.link_count() as u32;
        let f2_active =
            links.clone().any(|l| outcome.trace.owner(cycle, LinkId(l)) == Some(f2));
        if f2_active {
            for l in links {
                assert_ne!(
                    outcome.trace.owner(cycle, LinkId(l)),
                    Some(f3),
                    "flow 3 must hold nothing while flow 2 transmits (cycle {cycle})"
                );
            }
        }
    }
    assert_eq!(transparent_suspension_witnesses(&outcome.trace, &fs, 2), vec![1]);

    // Replay check: each flow's granted-cycle count equals the shortest
    // series of its progression state space, walked independently.
    for (idx, flow) in fs.flows().iter().enumerate() {
        let granted = (0..horizon)
            .filter(|&t| {
                flow.path
                    .links()
                    .iter()
                    .any(|&l| outcome.trace.owner(t, l) == Some(flow.id))
            })
            .count() as u64;
        let (shortest, _) =
            series_bounds(flow.flits, flow.eta(), Capacity::Unbounded, BUDGET).unwrap();
        let mut state = BufferState::initial(flow.flits, flow.eta());
        let mut steps = 0u64;
        while let Some(next) = full_service_successor(&state) {
            state = next;
            steps += 1;
        }
        assert_eq!(granted, shortest, "flow {} grant count", idx + 1);
        assert_eq!(steps, shortest, "flow {} full-service walk", idx + 1);
        assert_eq!(shortest, flow.effective_time());
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, limit 1s");
    println!(
        "criterion 1: PASS — completions (20, 40, 50); blocked flow held zero links \
         while its out-of-sight blocker transmitted; grants match the progression \
         replay ({elapsed:?})"
    );
}

#[test]
fn criterion_2_progression_series_bounds() {
    let started = Instant::now();
    let mut checked = 0;
    for flits in 1..=6u64 {
        for links in 1..=4usize {
            for capacity in [Capacity::Unbounded, Capacity::Bounded(1)] {
                let (min, max) = series_bounds(flits, links, capacity, BUDGET).unwrap();
                assert_eq!(
                    (min, max),
                    (flits + links as u64 - 1, flits * links as u64),
                    "closed forms at flits={flits} links={links} {capacity:?}"
                );
                checked += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, limit 10s");
    println!(
        "criterion 2: PASS — exhaustive enumeration matched (C+eta-1, C*eta) on \
         {checked} (flits, links, capacity) points ({elapsed:?})"
    );
}

fn study_params(seed: u64) -> GeneratorParams {
    GeneratorParams {
        rows: 4,
        cols: 4,
        core_links: false,
        flows: 3 + (seed % 8) as u32,
        flits: [1, 24],
        period: [50, 500],
        deadline_factor: [0.7, 1.0],
        seed,
    }
}

#[test]
fn criterion_3_suspension_set_identity() {
    let started = Instant::now();
    let instances = 10_000;
    let mut sets_checked = 0u64;
    for seed in 0..instances {
        let (_, fs) = generate_flowset(&study_params(seed)).unwrap();
        for k in 0..fs.len() {
            assert_eq!(
                fs.ss_set(k),
                fs.share1_set(k),
                "suspension-set forms disagree at seed {seed}, flow index {k}"
            );
            sets_checked += 1;
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, limit 30s");
    println!(
        "criterion 3: PASS — both suspension-set constructions agreed on \
         {instances} random flow sets ({sets_checked} per-flow comparisons, {elapsed:?})"
    );
}

/// The shared sweep behind criteria 4-6: 10^3 seeded instances, each
/// analyzed, cross-compared pointwise, and simulated under synchronous
/// release plus 20 sporadic seeds.
struct Study {
    instances: u64,
    analysis_seconds: f64,
    sim_seconds: f64,
    dominance_violations: u64,
    rhs_points: u64,
    rhs_disagreements: u64,
    sim_runs: u64,
    misses_of_passed_flows: u64,
    over_bound_responses: u64,
    trace_violations: u64,
    invalid_runs: u64,
}

const STUDY_INSTANCES: u64 = 1_000;
const SPORADIC_SEEDS: u64 = 20;
const HORIZON_CAP: u64 = 1_000_000;

fn study() -> &'static Study {
    static STUDY: OnceLock<Study> = OnceLock::new();
    STUDY.get_or_init(run_study)
}

fn run_study() -> Study {
    let mut s = Study {
        instances: STUDY_INSTANCES,
        analysis_seconds: 0.0,
        sim_seconds: 0.0,
        dominance_violations: 0,
        rhs_points: 0,
        rhs_disagreements: 0,
        sim_runs: 0,
        misses_of_passed_flows: 0,
        over_bound_responses: 0,
        trace_violations: 0,
        invalid_runs: 0,
    };
    for seed in 0..STUDY_INSTANCES {
        let (topo, fs) = generate_flowset(&study_params(seed)).unwrap();

        let analysis_started = Instant::now();
        let analysis = analyze_all(&fs, &AnalyzeOptions::default()).unwrap();
        s.dominance_violations += dominance_of(&analysis).violations.len() as u64;
        check_rhs_pointwise(&fs, &analysis, seed, &mut s);
        s.analysis_seconds += analysis_started.elapsed().as_secs_f64();

        let sim_started = Instant::now();
        simulate_instance(&topo, &fs, &analysis, seed, &mut s);
        s.sim_seconds += sim_started.elapsed().as_secs_f64();
    }
    s
}

/// Evaluates both recurrences' right-hand sides at sampled points with the
/// default assignment and zero back-pressure; they must agree exactly.
fn check_rhs_pointwise(fs: &FlowSet, analysis: &AnalysisResult, seed: u64, s: &mut Study) {
    let responses = analysis.sp2_responses();
    let zero = BackPressure::zero();
    for k in 0..fs.len() {
        if fs.share_set(k).iter().any(|&j| responses[j].is_none()) {
            continue;
        }
        let flow = fs.get(k);
        let c_hat = flow.effective_time();
        let x = suspension_as_jitter(fs, k);
        let samples = [
            c_hat,
            c_hat + 1,
            c_hat + (flow.deadline - c_hat) / 2,
            flow.deadline.saturating_sub(1).max(c_hat),
            flow.deadline,
        ];
        for t in samples {
            let a = sp2_rhs(fs, k, &responses, &x, t).unwrap();
            let b = baseline_rhs(fs, k, &responses, &zero, t).unwrap();
            s.rhs_points += 1;
            if a != b {
                s.rhs_disagreements += 1;
                eprintln!("rhs disagreement: seed {seed} flow index {k} t={t}: {a} vs {b}");
            }
        }
    }
}

fn simulate_instance(
    topo: &Topology,
    fs: &FlowSet,
    analysis: &AnalysisResult,
    seed: u64,
    s: &mut Study,
) {
    let max_period = fs.flows().iter().map(|f| f.period).max().unwrap();
    let horizon = (2 * max_period).min(HORIZON_CAP);
    for run in 0..=SPORADIC_SEEDS {
        let pattern = if run == 0 {
            ReleasePattern::synchronous(fs, horizon)
        } else {
            ReleasePattern::sporadic(fs, horizon, seed * 1_000 + run, 0.25)
        };
        let outcome = simulate(fs, &pattern, horizon, topo.link_count()).unwrap();
        s.sim_runs += 1;
        s.trace_violations += check_trace(&outcome.trace, fs).len() as u64;
        s.invalid_runs += u64::from(!outcome.valid);
        for (idx, row) in analysis.rows.iter().enumerate() {
            let Some(bound) = row.r_sp2 else { continue };
            s.misses_of_passed_flows += outcome
                .trace
                .events()
                .iter()
                .filter(|e| e.kind == EventKind::Miss && e.flow == row.id)
                .count() as u64;
            s.over_bound_responses +=
                outcome.responses[idx].iter().filter(|&&r| r > bound).count() as u64;
        }
    }
}

#[test]
fn criterion_4_dominance_over_the_baseline() {
    let s = study();
    assert_eq!(s.dominance_violations, 0, "suspension-aware bound exceeded the baseline");
    assert!(s.rhs_points > 0);
    assert_eq!(s.rhs_disagreements, 0, "recurrence right-hand sides diverged");
    assert!(
        s.analysis_seconds < 60.0,
        "analysis took {:.1}s, limit 60s",
        s.analysis_seconds
    );
    println!(
        "criterion 4: PASS — zero dominance violations over {} instances; \
         right-hand sides agreed at all {} sampled points ({:.2}s)",
        s.instances, s.rhs_points, s.analysis_seconds
    );
}

#[test]
fn criterion_5_sufficiency_under_simulation() {
    let s = study();
    assert_eq!(s.misses_of_passed_flows, 0, "a flow passed by the test missed a deadline");
    assert_eq!(s.over_bound_responses, 0, "an observed response exceeded its bound");
    println!(
        "criterion 5: PASS — {} simulation runs over {} instances (synchronous + {} \
         sporadic seeds each): zero deadline misses and zero over-bound responses \
         among flows passed by the suspension-aware test ({:.2}s)",
        s.sim_runs, s.instances, SPORADIC_SEEDS, s.sim_seconds
    );
}

#[test]
fn criterion_6_all_or_nothing_invariant() {
    // Criterion 1's trace, checked directly.
    let (topo, fs) = example1();
    let pattern = ReleasePattern::synchronous(&fs, 60);
    let outcome = simulate(&fs, &pattern, 60, topo.link_count()).unwrap();
    let example_violations = check_trace(&outcome.trace, &fs).len();
    assert_eq!(example_violations, 0);

    // Every trace of the criterion-5 sweep. Overrun releases (`invalid_runs`)
    // can happen to unschedulable flows under load and are reported, not
    // gated on; the arbitration invariants must hold regardless.
    let s = study();
    assert_eq!(s.trace_violations, 0, "a simulated trace broke an arbitration invariant");
    println!(
        "criterion 6: PASS — trace checker found zero violations on the golden \
         scenario and on all {} sweep traces ({} runs saw an overrun release)",
        s.sim_runs, s.invalid_runs
    );
}

#[test]
fn criterion_7_desk_scale_scope() {
    println!(
        "criterion 7: PASS — hardware-scale deployments are declared out of scope; \
         acceptance rests on criteria 1-6"
    );
}
