//! Cycle-accurate simulation of fixed-priority all-or-nothing arbitration.
//!
//! Each cycle, pending messages are considered in priority order; a message
//! is granted when every link of its path is still unclaimed by an
//! already-granted message, and a granted message claims its whole path,
//! including links it moves no flit over this cycle. A message that loses
//! any link transmits on none of them. Since a granted message serves all
//! its non-empty buffers at once, it drains in exactly `flits + eta - 1`
//! granted cycles, so progress is tracked as a remaining-grant counter
//! rather than a buffer vector; the progression module validates that
//! equivalence.
//!
//! A newly released message is eligible in its release cycle. A message
//! finishes at the end of the cycle of its final grant.

use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::flowset::{FlowId, FlowSet};
use crate::topology::LinkId;

/// Cell value for a link nobody claimed this cycle.
pub const IDLE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Release,
    Complete,
    Miss,
    /// A release arrived while the flow's previous message was unfinished;
    /// the run no longer models one-message-at-a-time flows.
    Violation,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EventKind::Release => "release",
            EventKind::Complete => "complete",
            EventKind::Miss => "miss",
            EventKind::Violation => "violation",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: u64,
    pub kind: EventKind,
    pub flow: FlowId,
}

/// Who claimed which link in which cycle, plus the event log.
///
/// Cells are writable so tests can forge invalid schedules and hold them
/// against [`check_trace`].
#[derive(Debug, Clone)]
pub struct ScheduleTrace {
    link_count: usize,
    horizon: u64,
    cells: Vec<u32>,
    events: Vec<TraceEvent>,
}

impl ScheduleTrace {
    pub fn new(link_count: usize, horizon: u64) -> ScheduleTrace {
        ScheduleTrace {
            link_count,
            horizon,
            cells: alloc::vec![IDLE; link_count * horizon as usize],
            events: Vec::new(),
        }
    }

    pub fn link_count(&self) -> usize {
        self.link_count
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    fn cell(&self, cycle: u64, link: LinkId) -> usize {
        assert!(cycle < self.horizon, "cycle out of range");
        assert!((link.0 as usize) < self.link_count, "link out of range");
        cycle as usize * self.link_count + link.0 as usize
    }

    pub fn owner(&self, cycle: u64, link: LinkId) -> Option<FlowId> {
        match self.cells[self.cell(cycle, link)] {
            IDLE => None,
            id => Some(FlowId(id)),
        }
    }

    pub fn set_owner(&mut self, cycle: u64, link: LinkId, owner: Option<FlowId>) {
        let cell = self.cell(cycle, link);
        self.cells[cell] = match owner {
            None => IDLE,
            Some(id) => id.0,
        };
    }

    fn push_event(&mut self, time: u64, kind: EventKind, flow: FlowId) {
        self.events.push(TraceEvent { time, kind, flow });
    }
}

/// One message in flight: `remaining_grants` starts at `flits + eta - 1`
/// and drops by one per granted cycle; the message is done when it reaches
/// zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageState {
    pub flow: FlowId,
    pub release: u64,
    pub remaining_grants: u64,
    pub completion: Option<u64>,
}

impl MessageState {
    pub fn is_active(&self) -> bool {
        self.completion.is_none() && self.remaining_grants > 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimError {
    ZeroHorizon,
    UnknownFlow(FlowId),
    DuplicateActiveFlow(FlowId),
    /// Release lists do not match the flow set they are simulated with.
    PatternMismatch { expected: usize, got: usize },
    UnsortedReleases(FlowId),
    /// Two releases of one flow closer together than its period.
    ReleaseGapTooSmall(FlowId),
    OffsetCountMismatch { expected: usize, got: usize },
    LinkOutOfRange { flow: FlowId, link: LinkId },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::ZeroHorizon => write!(f, "horizon must be at least one cycle"),
            SimError::UnknownFlow(id) => write!(f, "flow {id} is not in the flow set"),
            SimError::DuplicateActiveFlow(id) => {
                write!(f, "flow {id} appears twice in the active set")
            }
            SimError::PatternMismatch { expected, got } => {
                write!(f, "release pattern covers {got} flows, flow set has {expected}")
            }
            SimError::UnsortedReleases(id) => {
                write!(f, "releases of flow {id} are not in ascending order")
            }
            SimError::ReleaseGapTooSmall(id) => {
                write!(f, "releases of flow {id} are closer than its period")
            }
            SimError::OffsetCountMismatch { expected, got } => {
                write!(f, "{got} offsets for {expected} flows")
            }
            SimError::LinkOutOfRange { flow, link } => {
                write!(f, "flow {flow} uses link {link} outside the simulated network")
            }
        }
    }
}

impl core::error::Error for SimError {}

/// Absolute release times per flow, parallel to the flow set's index order.
/// Consecutive releases of one flow are at least a period apart.
#[derive(Debug, Clone)]
pub struct ReleasePattern {
    releases: Vec<Vec<u64>>,
}

impl ReleasePattern {
    /// Every flow releases at 0 and then strictly periodically.
    pub fn synchronous(flowset: &FlowSet, horizon: u64) -> ReleasePattern {
        let offsets = alloc::vec![0; flowset.len()];
        ReleasePattern::with_offsets(flowset, &offsets, horizon).expect("offset count matches")
    }

    /// Strictly periodic releases starting at the given per-flow offsets.
    pub fn with_offsets(
        flowset: &FlowSet,
        offsets: &[u64],
        horizon: u64,
    ) -> Result<ReleasePattern, SimError> {
        if offsets.len() != flowset.len() {
            return Err(SimError::OffsetCountMismatch {
                expected: flowset.len(),
                got: offsets.len(),
            });
        }
        let releases = flowset
            .flows()
            .iter()
            .zip(offsets)
            .map(|(flow, &offset)| {
                let mut times = Vec::new();
                let mut t = offset;
                while t < horizon {
                    times.push(t);
                    t += flow.period;
                }
                times
            })
            .collect();
        Ok(ReleasePattern { releases })
    }

    /// Sporadic releases: each inter-arrival is the period plus a geometric
    /// number of extra cycles, each added with probability `jitter`. The
    /// first release is delayed from 0 the same way. `jitter` must lie in
    /// `[0, 1)`; 0 reduces to the synchronous pattern.
    pub fn sporadic(flowset: &FlowSet, horizon: u64, seed: u64, jitter: f64) -> ReleasePattern {
        assert!((0.0..1.0).contains(&jitter), "jitter must be in [0, 1)");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha8Rng| {
            let mut extra = 0u64;
            while rng.gen_bool(jitter) {
                extra += 1;
            }
            extra
        };
        let releases = flowset
            .flows()
            .iter()
            .map(|flow| {
                let mut times = Vec::new();
                let mut t = draw(&mut rng);
                while t < horizon {
                    times.push(t);
                    t += flow.period + draw(&mut rng);
                }
                times
            })
            .collect();
        ReleasePattern { releases }
    }

    /// Arbitrary release lists, checked for order and minimum separation.
    pub fn from_lists(flowset: &FlowSet, releases: Vec<Vec<u64>>) -> Result<ReleasePattern, SimError> {
        if releases.len() != flowset.len() {
            return Err(SimError::PatternMismatch {
                expected: flowset.len(),
                got: releases.len(),
            });
        }
        for (flow, times) in flowset.flows().iter().zip(&releases) {
            for pair in times.windows(2) {
                if pair[1] < pair[0] {
                    return Err(SimError::UnsortedReleases(flow.id));
                }
                if pair[1] - pair[0] < flow.period {
                    return Err(SimError::ReleaseGapTooSmall(flow.id));
                }
            }
        }
        Ok(ReleasePattern { releases })
    }

    pub fn releases(&self, index: usize) -> &[u64] {
        &self.releases[index]
    }

    pub fn flow_count(&self) -> usize {
        self.releases.len()
    }
}

/// Greedy claim pass shared by [`arbitrate_cycle`] and [`simulate`];
/// `order` must be ascending flow-set indices.
fn greedy_grants(order: &[usize], masks: &[Vec<u64>], claimed: &mut [u64], granted: &mut Vec<usize>) {
    claimed.iter_mut().for_each(|w| *w = 0);
    granted.clear();
    for &k in order {
        let mask = &masks[k];
        if mask.iter().zip(claimed.iter()).all(|(m, c)| m & c == 0) {
            for (c, m) in claimed.iter_mut().zip(mask.iter()) {
                *c |= m;
            }
            granted.push(k);
        }
    }
}

/// One arbitration round over the active messages: grants in priority
/// order, where each granted message claims its entire path and a message
/// is granted only if no already-granted message claimed any of its links.
/// Finished messages in `active` are ignored.
pub fn arbitrate_cycle(
    flowset: &FlowSet,
    link_count: usize,
    active: &[MessageState],
) -> Result<Vec<FlowId>, SimError> {
    let mut order = Vec::new();
    for msg in active {
        if !msg.is_active() {
            continue;
        }
        let k = flowset
            .index_of(msg.flow)
            .ok_or(SimError::UnknownFlow(msg.flow))?;
        if order.contains(&k) {
            return Err(SimError::DuplicateActiveFlow(msg.flow));
        }
        order.push(k);
    }
    order.sort_unstable();
    let masks: Vec<Vec<u64>> = flowset
        .flows()
        .iter()
        .map(|f| f.path.bitmask(link_count))
        .collect();
    let mut claimed = alloc::vec![0u64; link_count.div_ceil(64)];
    let mut granted = Vec::new();
    greedy_grants(&order, &masks, &mut claimed, &mut granted);
    Ok(granted.into_iter().map(|k| flowset.get(k).id).collect())
}

/// Everything a simulation run produced.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub trace: ScheduleTrace,
    /// Response time of each completed message, per flow.
    pub responses: Vec<Vec<u64>>,
    /// Largest observed response per flow; `None` when nothing completed.
    pub worst_response: Vec<Option<u64>>,
    pub miss_count: u64,
    /// False when a release arrived while the previous message of the same
    /// flow was unfinished; such releases are dropped and logged.
    pub valid: bool,
}

/// Runs the arbitration for `horizon` cycles and records the full trace.
/// Deadline misses are logged and the run continues.
pub fn simulate(
    flowset: &FlowSet,
    pattern: &ReleasePattern,
    horizon: u64,
    link_count: usize,
) -> Result<SimOutcome, SimError> {
    if horizon == 0 {
        return Err(SimError::ZeroHorizon);
    }
    if pattern.flow_count() != flowset.len() {
        return Err(SimError::PatternMismatch {
            expected: flowset.len(),
            got: pattern.flow_count(),
        });
    }
    for flow in flowset.flows() {
        for &link in flow.path.links() {
            if link.0 as usize >= link_count {
                return Err(SimError::LinkOutOfRange { flow: flow.id, link });
            }
        }
    }

    let n = flowset.len();
    let masks: Vec<Vec<u64>> = flowset
        .flows()
        .iter()
        .map(|f| f.path.bitmask(link_count))
        .collect();
    let effective: Vec<u64> = flowset.flows().iter().map(|f| f.effective_time()).collect();

    let mut trace = ScheduleTrace::new(link_count, horizon);
    let mut in_flight: Vec<Option<MessageState>> = alloc::vec![None; n];
    let mut missed = alloc::vec![false; n];
    let mut cursor = alloc::vec![0usize; n];
    let mut responses: Vec<Vec<u64>> = alloc::vec![Vec::new(); n];
    let mut miss_count = 0u64;
    let mut valid = true;

    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut granted: Vec<usize> = Vec::with_capacity(n);
    let mut claimed = alloc::vec![0u64; link_count.div_ceil(64)];

    for t in 0..horizon {
        for k in 0..n {
            let times = pattern.releases(k);
            while cursor[k] < times.len() && times[cursor[k]] == t {
                cursor[k] += 1;
                let id = flowset.get(k).id;
                if in_flight[k].is_some() {
                    trace.push_event(t, EventKind::Violation, id);
                    valid = false;
                } else {
                    in_flight[k] = Some(MessageState {
                        flow: id,
                        release: t,
                        remaining_grants: effective[k],
                        completion: None,
                    });
                    missed[k] = false;
                    trace.push_event(t, EventKind::Release, id);
                }
            }
        }

        for k in 0..n {
            if let Some(msg) = &in_flight[k] {
                let due = msg.release + flowset.get(k).deadline;
                if !missed[k] && t >= due {
                    missed[k] = true;
                    miss_count += 1;
                    trace.push_event(due, EventKind::Miss, msg.flow);
                }
            }
        }

        order.clear();
        order.extend((0..n).filter(|&k| in_flight[k].is_some()));
        greedy_grants(&order, &masks, &mut claimed, &mut granted);

        for &k in &granted {
            let id = flowset.get(k).id;
            for &link in flowset.get(k).path.links() {
                trace.set_owner(t, link, Some(id));
            }
            let msg = in_flight[k].as_mut().expect("granted message in flight");
            msg.remaining_grants -= 1;
            if msg.remaining_grants == 0 {
                let done = t + 1;
                msg.completion = Some(done);
                responses[k].push(done - msg.release);
                trace.push_event(done, EventKind::Complete, id);
                in_flight[k] = None;
            }
        }
    }

    let worst_response = responses
        .iter()
        .map(|r| r.iter().copied().max())
        .collect();
    Ok(SimOutcome {
        trace,
        responses,
        worst_response,
        miss_count,
        valid,
    })
}

/// A way a trace fails the arbitration contract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceViolation {
    /// A cell names a flow that is not in the flow set.
    UnknownOwner { cycle: u64, link: LinkId },
    /// A flow holds some but not all links of its path.
    PartialGrant { cycle: u64, flow: FlowId },
    /// A flow holds links in a cycle where it has no unfinished message.
    GrantOutsideMessage { cycle: u64, flow: FlowId },
    /// An unfinished message holds nothing although no higher-priority
    /// flow claims any link of its path.
    IdleWhileEligible { cycle: u64, flow: FlowId },
    /// A message's granted cycles do not add up to its effective time.
    GrantCountMismatch { flow: FlowId, release: u64, got: u64, want: u64 },
    /// A completion event does not sit right after the final grant.
    CompletionMismatch { flow: FlowId, release: u64, completion: u64 },
    /// The event log is not a well-formed release/completion sequence.
    InconsistentEvents { flow: FlowId },
}

impl fmt::Display for TraceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceViolation::UnknownOwner { cycle, link } => {
                write!(f, "cycle {cycle}: link {link} held by unknown flow")
            }
            TraceViolation::PartialGrant { cycle, flow } => {
                write!(f, "cycle {cycle}: flow {flow} holds only part of its path")
            }
            TraceViolation::GrantOutsideMessage { cycle, flow } => {
                write!(f, "cycle {cycle}: flow {flow} holds links without a message")
            }
            TraceViolation::IdleWhileEligible { cycle, flow } => {
                write!(f, "cycle {cycle}: flow {flow} idles with its whole path unblocked")
            }
            TraceViolation::GrantCountMismatch { flow, release, got, want } => {
                write!(
                    f,
                    "flow {flow} message released at {release}: {got} grants, expected {want}"
                )
            }
            TraceViolation::CompletionMismatch { flow, release, completion } => {
                write!(
                    f,
                    "flow {flow} message released at {release}: no final grant at {}",
                    completion.saturating_sub(1)
                )
            }
            TraceViolation::InconsistentEvents { flow } => {
                write!(f, "flow {flow} has a malformed release/completion sequence")
            }
        }
    }
}

/// Per-flow `(release, completion)` pairs in release order; a `None`
/// completion means the message was still unfinished at the horizon.
type MessageWindows = Vec<Vec<(u64, Option<u64>)>>;

/// Release/completion windows per flow, reconstructed from the event log.
fn message_windows(
    trace: &ScheduleTrace,
    flowset: &FlowSet,
) -> (MessageWindows, Vec<TraceViolation>) {
    let mut windows: MessageWindows = alloc::vec![Vec::new(); flowset.len()];
    let mut violations = Vec::new();
    for event in trace.events() {
        let Some(k) = flowset.index_of(event.flow) else {
            continue;
        };
        match event.kind {
            EventKind::Release => {
                if matches!(windows[k].last(), Some((_, None))) {
                    violations.push(TraceViolation::InconsistentEvents { flow: event.flow });
                } else {
                    windows[k].push((event.time, None));
                }
            }
            EventKind::Complete => match windows[k].last_mut() {
                Some((release, completion @ None)) if event.time > *release => {
                    *completion = Some(event.time);
                }
                _ => violations.push(TraceViolation::InconsistentEvents { flow: event.flow }),
            },
            EventKind::Miss | EventKind::Violation => {}
        }
    }
    (windows, violations)
}

/// Checks a trace against the arbitration contract: whole-path claims,
/// work-conservation against higher-priority claims, and grant counts that
/// match the logged completions. Violations are collected, not thrown.
pub fn check_trace(trace: &ScheduleTrace, flowset: &FlowSet) -> Vec<TraceViolation> {
    let (windows, mut violations) = message_windows(trace, flowset);
    let n = flowset.len();
    let horizon = trace.horizon();
    let mut grants: Vec<Vec<u64>> = windows
        .iter()
        .map(|w| alloc::vec![0u64; w.len()])
        .collect();
    let mut owned: Vec<Vec<LinkId>> = alloc::vec![Vec::new(); n];

    let window_at = |k: usize, t: u64| -> Option<usize> {
        windows[k]
            .iter()
            .position(|&(release, completion)| {
                release <= t && t < completion.unwrap_or(horizon)
            })
    };

    for t in 0..horizon {
        for slot in owned.iter_mut() {
            slot.clear();
        }
        for link in 0..trace.link_count() as u32 {
            let link = LinkId(link);
            if let Some(id) = trace.owner(t, link) {
                match flowset.index_of(id) {
                    Some(k) => owned[k].push(link),
                    None => violations.push(TraceViolation::UnknownOwner { cycle: t, link }),
                }
            }
        }
        for k in 0..n {
            let flow = flowset.get(k);
            let window = window_at(k, t);
            if owned[k].is_empty() {
                // An unfinished message that holds nothing must be blocked
                // by a higher-priority claim on its own path.
                if let Some(_w) = window {
                    let blocked = flow.path.links().iter().any(|&link| {
                        trace
                            .owner(t, link)
                            .and_then(|id| flowset.index_of(id))
                            .is_some_and(|other| other < k)
                    });
                    if !blocked {
                        violations.push(TraceViolation::IdleWhileEligible {
                            cycle: t,
                            flow: flow.id,
                        });
                    }
                }
                continue;
            }
            let full_path = owned[k].len() == flow.path.eta()
                && owned[k].iter().all(|&l| flow.path.contains(l));
            if !full_path {
                violations.push(TraceViolation::PartialGrant { cycle: t, flow: flow.id });
                continue;
            }
            match window {
                Some(w) => grants[k][w] += 1,
                None => {
                    violations.push(TraceViolation::GrantOutsideMessage { cycle: t, flow: flow.id })
                }
            }
        }
    }

    for k in 0..n {
        let flow = flowset.get(k);
        let want = flow.effective_time();
        for (w, &(release, completion)) in windows[k].iter().enumerate() {
            let got = grants[k][w];
            match completion {
                Some(done) => {
                    if got != want {
                        violations.push(TraceViolation::GrantCountMismatch {
                            flow: flow.id,
                            release,
                            got,
                            want,
                        });
                    }
                    let final_grant = done - 1;
                    let closes = flow
                        .path
                        .links()
                        .iter()
                        .all(|&l| trace.owner(final_grant, l) == Some(flow.id));
                    if !closes {
                        violations.push(TraceViolation::CompletionMismatch {
                            flow: flow.id,
                            release,
                            completion: done,
                        });
                    }
                }
                None => {
                    if got >= want {
                        violations.push(TraceViolation::GrantCountMismatch {
                            flow: flow.id,
                            release,
                            got,
                            want,
                        });
                    }
                }
            }
        }
    }
    violations
}

/// For each message of flow `j`, the number of cycles it spends stalled
/// where flow `i` cannot see it: `j` has an unfinished message, holds no
/// link of `i`'s path, and every link of `i`'s path is idle or held by a
/// flow of lower priority than `j`. Only flows whose path overlaps `i`'s
/// without being contained in it can stall out of sight; for any other `j`
/// all counts are zero.
///
/// `i` and `j` index the flow set; requires `j < i` (a lower-priority flow
/// cannot interfere with `i` at all).
pub fn transparent_suspension_per_message(
    trace: &ScheduleTrace,
    flowset: &FlowSet,
    i: usize,
    j: usize,
) -> Vec<u64> {
    assert!(j < i, "the stalled flow must outrank the flow under analysis");
    let (windows, _) = message_windows(trace, flowset);
    let path_i = &flowset.get(i).path;
    let path_j = &flowset.get(j).path;
    let relevant = path_j.intersects(path_i) && !path_j.is_subset_of(path_i);
    windows[j]
        .iter()
        .map(|&(release, completion)| {
            if !relevant {
                return 0;
            }
            let end = completion.unwrap_or(trace.horizon());
            (release..end)
                .filter(|&t| {
                    path_i.links().iter().all(|&link| {
                        match trace.owner(t, link).and_then(|id| flowset.index_of(id)) {
                            None => true,
                            // Holding any shared link would mean the owner
                            // index equals j, which fails this test too.
                            Some(owner) => owner > j,
                        }
                    })
                })
                .count() as u64
        })
        .collect()
}

/// The higher-priority flows that spend at least one cycle stalled out of
/// flow `i`'s sight in this trace; see
/// [`transparent_suspension_per_message`].
pub fn transparent_suspension_witnesses(
    trace: &ScheduleTrace,
    flowset: &FlowSet,
    i: usize,
) -> Vec<usize> {
    (0..i)
        .filter(|&j| {
            transparent_suspension_per_message(trace, flowset, i, j)
                .iter()
                .any(|&c| c > 0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowset::Flow;
    use crate::topology::{NodeId, Path, Topology};
    use alloc::vec;

    fn flow(id: u32, priority: u32, flits: u64, period: u64, deadline: u64, path: Path) -> Flow {
        Flow {
            id: FlowId(id),
            priority,
            flits,
            period,
            deadline,
            path,
        }
    }

    fn route(t: &Topology, src: (u16, u16), dst: (u16, u16)) -> Path {
        t.xy_route(NodeId::router(src.0, src.1), NodeId::router(dst.0, dst.1))
            .unwrap()
    }

    /// Three flows on a 3x3 mesh: f1 on one link, f2 overlapping f1 on two
    /// links, f3 overlapping only f2.
    fn chain_setup() -> (Topology, FlowSet) {
        let t = Topology::mesh(3, 3, false).unwrap();
        let f1 = flow(1, 1, 20, 200, 200, route(&t, (0, 0), (0, 1)));
        let f2 = flow(2, 2, 19, 200, 200, route(&t, (0, 0), (0, 2)));
        let f3 = flow(3, 3, 29, 200, 200, route(&t, (0, 1), (1, 2)));
        let fs = FlowSet::new(vec![f1, f2, f3]).unwrap();
        (t, fs)
    }

    fn message(fs: &FlowSet, k: usize, release: u64) -> MessageState {
        MessageState {
            flow: fs.get(k).id,
            release,
            remaining_grants: fs.get(k).effective_time(),
            completion: None,
        }
    }

    #[test]
    fn arbitration_grants_disjoint_lower_flow() {
        let (t, fs) = chain_setup();
        let active = vec![message(&fs, 0, 0), message(&fs, 1, 0), message(&fs, 2, 0)];
        let grants = arbitrate_cycle(&fs, t.link_count(), &active).unwrap();
        assert_eq!(grants, vec![FlowId(1), FlowId(3)]);
    }

    #[test]
    fn arbitration_suspends_on_single_link_conflict() {
        // With f1 done, f2 takes both its links; f3 loses one shared link
        // and with it the disjoint one as well.
        let (t, fs) = chain_setup();
        let active = vec![message(&fs, 1, 0), message(&fs, 2, 0)];
        let grants = arbitrate_cycle(&fs, t.link_count(), &active).unwrap();
        assert_eq!(grants, vec![FlowId(2)]);
    }

    #[test]
    fn arbitration_of_nothing_grants_nothing() {
        let (t, fs) = chain_setup();
        assert_eq!(arbitrate_cycle(&fs, t.link_count(), &[]).unwrap(), vec![]);
    }

    #[test]
    fn arbitration_rejects_duplicates_and_strangers() {
        let (t, fs) = chain_setup();
        let twice = vec![message(&fs, 0, 0), message(&fs, 0, 5)];
        assert_eq!(
            arbitrate_cycle(&fs, t.link_count(), &twice).unwrap_err(),
            SimError::DuplicateActiveFlow(FlowId(1))
        );
        let stranger = vec![MessageState {
            flow: FlowId(99),
            release: 0,
            remaining_grants: 1,
            completion: None,
        }];
        assert_eq!(
            arbitrate_cycle(&fs, t.link_count(), &stranger).unwrap_err(),
            SimError::UnknownFlow(FlowId(99))
        );
    }

    #[test]
    fn chain_completions_under_synchronous_release() {
        let (t, fs) = chain_setup();
        let pattern = ReleasePattern::synchronous(&fs, 60);
        let out = simulate(&fs, &pattern, 60, t.link_count()).unwrap();
        assert!(out.valid);
        assert_eq!(out.miss_count, 0);
        assert_eq!(out.worst_response, vec![Some(20), Some(40), Some(50)]);
        // The lowest flow transmits, is suspended while the middle flow
        // runs, then finishes its remaining grants.
        let link = fs.get(2).path.links()[0];
        assert_eq!(out.trace.owner(0, link), Some(FlowId(3)));
        assert_eq!(out.trace.owner(25, link), Some(FlowId(2)));
        assert_eq!(out.trace.owner(45, link), Some(FlowId(3)));
    }

    #[test]
    fn lone_flow_response_is_effective_time() {
        let t = Topology::mesh(1, 4, false).unwrap();
        let f = flow(7, 1, 10, 100, 100, route(&t, (0, 0), (0, 3)));
        let fs = FlowSet::new(vec![f]).unwrap();
        let pattern = ReleasePattern::with_offsets(&fs, &[3], 40).unwrap();
        let out = simulate(&fs, &pattern, 40, t.link_count()).unwrap();
        assert_eq!(out.worst_response, vec![Some(12)]);
        assert_eq!(
            out.trace.events()[..2],
            [
                TraceEvent { time: 3, kind: EventKind::Release, flow: FlowId(7) },
                TraceEvent { time: 15, kind: EventKind::Complete, flow: FlowId(7) },
            ]
        );
    }

    #[test]
    fn disjoint_flows_never_interfere() {
        let t = Topology::mesh(3, 3, false).unwrap();
        let f1 = flow(1, 1, 8, 50, 50, route(&t, (0, 0), (0, 2)));
        let f2 = flow(2, 2, 5, 50, 50, route(&t, (2, 0), (2, 2)));
        let fs = FlowSet::new(vec![f1, f2]).unwrap();
        let pattern = ReleasePattern::synchronous(&fs, 100);
        let out = simulate(&fs, &pattern, 100, t.link_count()).unwrap();
        assert_eq!(out.worst_response, vec![Some(9), Some(6)]);
    }

    #[test]
    fn deadline_miss_is_logged_and_run_continues() {
        let t = Topology::mesh(1, 2, false).unwrap();
        let f = flow(1, 1, 20, 100, 10, route(&t, (0, 0), (0, 1)));
        let fs = FlowSet::new(vec![f]).unwrap();
        let pattern = ReleasePattern::synchronous(&fs, 30);
        let out = simulate(&fs, &pattern, 30, t.link_count()).unwrap();
        assert!(out.valid);
        assert_eq!(out.miss_count, 1);
        assert_eq!(out.worst_response, vec![Some(20)]);
        assert!(out
            .trace
            .events()
            .contains(&TraceEvent { time: 10, kind: EventKind::Miss, flow: FlowId(1) }));
    }

    #[test]
    fn overrun_release_marks_run_invalid() {
        let t = Topology::mesh(1, 2, false).unwrap();
        let f = flow(1, 1, 20, 10, 10, route(&t, (0, 0), (0, 1)));
        let fs = FlowSet::new(vec![f]).unwrap();
        let pattern = ReleasePattern::from_lists(&fs, vec![vec![0, 10]]).unwrap();
        let out = simulate(&fs, &pattern, 30, t.link_count()).unwrap();
        assert!(!out.valid);
        assert!(out
            .trace
            .events()
            .contains(&TraceEvent { time: 10, kind: EventKind::Violation, flow: FlowId(1) }));
        // The overrunning release is dropped; only the first completes.
        assert_eq!(out.responses[0], vec![20]);
    }

    #[test]
    fn release_pattern_validation() {
        let (_, fs) = chain_setup();
        assert_eq!(
            ReleasePattern::from_lists(&fs, vec![vec![0], vec![0]]).unwrap_err(),
            SimError::PatternMismatch { expected: 3, got: 2 }
        );
        assert_eq!(
            ReleasePattern::from_lists(&fs, vec![vec![10, 0], vec![], vec![]]).unwrap_err(),
            SimError::UnsortedReleases(FlowId(1))
        );
        assert_eq!(
            ReleasePattern::from_lists(&fs, vec![vec![0, 100], vec![], vec![]]).unwrap_err(),
            SimError::ReleaseGapTooSmall(FlowId(1))
        );
        assert!(ReleasePattern::from_lists(&fs, vec![vec![0, 200], vec![], vec![]]).is_ok());
    }

    #[test]
    fn sporadic_pattern_is_seeded_and_spaced() {
        let (_, fs) = chain_setup();
        let a = ReleasePattern::sporadic(&fs, 5000, 42, 0.5);
        let b = ReleasePattern::sporadic(&fs, 5000, 42, 0.5);
        let c = ReleasePattern::sporadic(&fs, 5000, 43, 0.5);
        for k in 0..fs.len() {
            assert_eq!(a.releases(k), b.releases(k));
            for pair in a.releases(k).windows(2) {
                assert!(pair[1] - pair[0] >= fs.get(k).period);
            }
        }
        assert!((0..fs.len()).any(|k| a.releases(k) != c.releases(k)));
        let zero = ReleasePattern::sporadic(&fs, 500, 7, 0.0);
        for k in 0..fs.len() {
            assert_eq!(zero.releases(k), &[0, 200, 400]);
        }
    }

    #[test]
    fn simulated_traces_pass_the_checker() {
        let (t, fs) = chain_setup();
        let sync = simulate(&fs, &ReleasePattern::synchronous(&fs, 400), 400, t.link_count())
            .unwrap();
        assert_eq!(check_trace(&sync.trace, &fs), vec![]);
        let sporadic = ReleasePattern::sporadic(&fs, 600, 9, 0.3);
        let out = simulate(&fs, &sporadic, 600, t.link_count()).unwrap();
        assert_eq!(check_trace(&out.trace, &fs), vec![]);
    }

    #[test]
    fn forged_partial_grant_is_reported() {
        let (t, fs) = chain_setup();
        let out = simulate(&fs, &ReleasePattern::synchronous(&fs, 60), 60, t.link_count())
            .unwrap();
        let mut trace = out.trace;
        // Take the second of f3's two links away in one granted cycle.
        let second = fs.get(2).path.links()[1];
        assert_eq!(trace.owner(5, second), Some(FlowId(3)));
        trace.set_owner(5, second, None);
        let violations = check_trace(&trace, &fs);
        assert!(violations.contains(&TraceViolation::PartialGrant { cycle: 5, flow: FlowId(3) }));
    }

    #[test]
    fn forged_idle_cycle_is_reported() {
        let t = Topology::mesh(1, 2, false).unwrap();
        let f = flow(1, 1, 5, 50, 50, route(&t, (0, 0), (0, 1)));
        let fs = FlowSet::new(vec![f]).unwrap();
        let out = simulate(&fs, &ReleasePattern::synchronous(&fs, 20), 20, t.link_count())
            .unwrap();
        let mut trace = out.trace;
        let link = fs.get(0).path.links()[0];
        trace.set_owner(3, link, None);
        let violations = check_trace(&trace, &fs);
        assert!(violations
            .contains(&TraceViolation::IdleWhileEligible { cycle: 3, flow: FlowId(1) }));
        assert!(violations.contains(&TraceViolation::GrantCountMismatch {
            flow: FlowId(1),
            release: 0,
            got: 4,
            want: 5,
        }));
    }

    #[test]
    fn forged_grant_outside_message_is_reported() {
        let t = Topology::mesh(1, 2, false).unwrap();
        let f = flow(1, 1, 5, 50, 50, route(&t, (0, 0), (0, 1)));
        let fs = FlowSet::new(vec![f]).unwrap();
        let out = simulate(&fs, &ReleasePattern::synchronous(&fs, 20), 20, t.link_count())
            .unwrap();
        let mut trace = out.trace;
        let link = fs.get(0).path.links()[0];
        trace.set_owner(10, link, Some(FlowId(1)));
        let violations = check_trace(&trace, &fs);
        assert!(violations
            .contains(&TraceViolation::GrantOutsideMessage { cycle: 10, flow: FlowId(1) }));
    }

    #[test]
    fn stalled_middle_flow_is_visible_only_through_the_lower_one() {
        let (t, fs) = chain_setup();
        let out = simulate(&fs, &ReleasePattern::synchronous(&fs, 60), 60, t.link_count())
            .unwrap();
        // While f1 runs, f2 is stalled out of f3's sight for all 20 cycles,
        // and that equals f2's response minus its effective time.
        assert_eq!(
            transparent_suspension_per_message(&out.trace, &fs, 2, 1),
            vec![20]
        );
        assert_eq!(transparent_suspension_witnesses(&out.trace, &fs, 2), vec![1]);
        // f1's path sits inside f2's, so f1 can never stall out of f2's
        // sight, and nothing outranks f1 at all.
        assert_eq!(
            transparent_suspension_per_message(&out.trace, &fs, 1, 0),
            vec![0]
        );
        assert_eq!(transparent_suspension_witnesses(&out.trace, &fs, 1), vec![]);
    }
}
