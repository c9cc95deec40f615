//! End-to-end run of the three-flow reference scenario across every module:
//! topology, contention sets, both analyses, the simulator, the trace
//! checker, and the progression oracle all have to tell the same story.

use sp2_core::progression::{self, Capacity};
use sp2_core::rta::{self, AnalyzeOptions, TransformedFlow, XPolicy};
use sp2_core::sim::{self, ReleasePattern};
use sp2_core::{Flow, FlowId, FlowSet, NodeId, Topology};

/// f1 spans one link, f2 spans two and overlaps f1, f3 overlaps only f2.
fn setup() -> (Topology, FlowSet) {
    let t = Topology::mesh(3, 3, false).unwrap();
    let route = |src: (u16, u16), dst: (u16, u16)| {
        t.xy_route(NodeId::router(src.0, src.1), NodeId::router(dst.0, dst.1))
            .unwrap()
    };
    let flows = vec![
        Flow {
            id: FlowId(1),
            priority: 1,
            flits: 20,
            period: 200,
            deadline: 200,
            path: route((0, 0), (0, 1)),
        },
        Flow {
            id: FlowId(2),
            priority: 2,
            flits: 19,
            period: 200,
            deadline: 200,
            path: route((0, 0), (0, 2)),
        },
        Flow {
            id: FlowId(3),
            priority: 3,
            flits: 29,
            period: 200,
            deadline: 200,
            path: route((0, 1), (1, 2)),
        },
    ];
    let fs = FlowSet::new(flows).unwrap();
    (t, fs)
}

#[test]
fn contention_structure() {
    let (t, fs) = setup();
    assert_eq!(t.link_count(), 24);
    assert_eq!(
        fs.flows().iter().map(|f| f.effective_time()).collect::<Vec<_>>(),
        vec![20, 20, 30]
    );
    assert_eq!(fs.share_set(1), vec![0]);
    assert_eq!(fs.share_set(2), vec![1]);
    // f2 can stall out of f3's sight (blocked by f1 on a link f3 never
    // uses); f1 in turn is fully visible to f2.
    assert_eq!(fs.ss_set(2), vec![1]);
    assert_eq!(fs.share1_set(2), vec![1]);
    assert_eq!(fs.ss_set(1), vec![]);
    assert_eq!(fs.share1_set(1), vec![]);
}

#[test]
fn analysis_simulation_and_checker_agree() {
    let (t, fs) = setup();

    let result = rta::analyze_all(&fs, &AnalyzeOptions::default()).unwrap();
    let bounds: Vec<_> = result.rows.iter().map(|r| r.r_sp2).collect();
    assert_eq!(bounds, vec![Some(20), Some(40), Some(50)]);
    let baseline: Vec<_> = result.rows.iter().map(|r| r.r_baseline).collect();
    assert_eq!(baseline, vec![Some(20), Some(40), Some(50)]);

    let transformed = rta::transform_flowset(&fs, 2, &result.sp2_responses()).unwrap();
    assert_eq!(
        transformed[1],
        TransformedFlow {
            id: FlowId(2),
            c_hat: 20,
            period: 200,
            deadline: 200,
            suspension: 20,
            interferes: true,
        }
    );

    let report = rta::dominance_check(&fs).unwrap();
    assert_eq!(report.violations, vec![]);

    let pattern = ReleasePattern::synchronous(&fs, 120);
    let out = sim::simulate(&fs, &pattern, 120, t.link_count()).unwrap();
    assert!(out.valid);
    assert_eq!(out.miss_count, 0);
    // In this scenario the bounds are tight: the simulation hits them.
    assert_eq!(out.worst_response, vec![Some(20), Some(40), Some(50)]);
    assert_eq!(sim::check_trace(&out.trace, &fs), vec![]);

    // The exhaustive policy cannot improve on the tight bound here.
    assert_eq!(
        rta::rta_sp2(&fs, 2, &result.sp2_responses(), XPolicy::Exhaustive).unwrap(),
        Some(50)
    );
}

#[test]
fn stalls_out_of_sight_match_prediction_and_budget() {
    let (t, fs) = setup();
    let pattern = ReleasePattern::synchronous(&fs, 120);
    let out = sim::simulate(&fs, &pattern, 120, t.link_count()).unwrap();

    let witnesses = sim::transparent_suspension_witnesses(&out.trace, &fs, 2);
    assert_eq!(witnesses, vec![1]);
    for &j in &witnesses {
        assert!(fs.ss_set(2).contains(&j));
    }

    // f2's first message stalls out of f3's sight for its whole wait on
    // f1, exactly the suspension budget the analysis charges: R2 - 20.
    let stalls = sim::transparent_suspension_per_message(&out.trace, &fs, 2, 1);
    assert_eq!(stalls, vec![20]);
    let result = rta::analyze_all(&fs, &AnalyzeOptions::default()).unwrap();
    let budget = result.rows[1].r_sp2.unwrap() - result.rows[1].c_hat;
    assert!(stalls.iter().all(|&s| s <= budget));
}

#[test]
fn progression_bounds_frame_the_simulated_service() {
    let (t, fs) = setup();
    let budget = progression::DEFAULT_BUDGET;

    // The lowest flow's message: 29 flits over 2 links.
    let (shortest, longest) = progression::series_bounds(29, 2, Capacity::Unbounded, budget).unwrap();
    assert_eq!(shortest, 30);
    assert_eq!(longest, 58);
    assert_eq!(fs.get(2).effective_time(), shortest);

    // Under full service the message drains in the shortest series, and
    // that is exactly how many granted cycles the simulator gives it.
    let pattern = ReleasePattern::synchronous(&fs, 120);
    let out = sim::simulate(&fs, &pattern, 120, t.link_count()).unwrap();
    let path = &fs.get(2).path;
    let granted = (0..120)
        .filter(|&cycle| {
            path.links()
                .iter()
                .all(|&l| out.trace.owner(cycle, l) == Some(FlowId(3)))
        })
        .count() as u64;
    assert_eq!(granted, shortest);

    let mut state = progression::BufferState::initial(29, 2);
    let mut cycles = 0;
    while let Some(next) = progression::full_service_successor(&state) {
        state = next;
        cycles += 1;
    }
    assert_eq!(cycles, shortest);
}
