//! Response-time analyses for all-or-nothing arbitration.
//!
//! Both tests bound the worst response of a flow `k` by a least fixed point
//! of a ceiling recurrence over its direct blockers (the flows of
//! [`FlowSet::share_set`]). They differ in how they charge the stall time
//! of a blocker that can itself be stalled out of sight:
//!
//! * [`rta_sp2`] treats that stall as suspension. Each blocker carries a
//!   suspension budget `S_j = R_j - c_hat_j` when it can stall invisibly
//!   (membership in [`FlowSet::ss_set`]), zero otherwise, and a binary
//!   choice `x_j` decides whether the budget is charged as release jitter
//!   (`x_j = 0`) or as carried-in demand (`x_j = 1`). Every assignment is a
//!   safe test; policies pick which ones to evaluate.
//! * [`rta_baseline`] is the classical wormhole-style bound: every direct
//!   blocker in [`FlowSet::share1_set`] contributes its full `R_j -
//!   c_hat_j` as interference jitter, plus an optional per-pair
//!   back-pressure constant on each blocker's demand.
//!
//! With all back-pressure at zero the baseline recurrence is exactly the
//! suspension recurrence under the default assignment, so the suspension
//! test never reports a larger bound; [`dominance_check`] verifies that on
//! concrete sets.
//!
//! Demand is counted in effective time `c_hat = C + eta - 1` throughout:
//! a message occupies its links for the pipeline fill as well.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::flowset::{FlowId, FlowSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RtaError {
    /// The analyses assume constrained deadlines.
    DeadlineExceedsPeriod(FlowId),
    /// A direct blocker of the analyzed flow has no response-time bound.
    MissingResponse(FlowId),
    /// A supplied response-time bound is below the flow's effective time.
    InvalidResponse(FlowId),
}

impl fmt::Display for RtaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RtaError::DeadlineExceedsPeriod(id) => {
                write!(f, "flow {id} has a deadline beyond its period")
            }
            RtaError::MissingResponse(id) => {
                write!(f, "flow {id} has no response-time bound yet")
            }
            RtaError::InvalidResponse(id) => {
                write!(f, "flow {id} has a response-time bound below its effective time")
            }
        }
    }
}

impl core::error::Error for RtaError {}

/// Which suspension assignments [`rta_sp2`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XPolicy {
    /// The default assignment: jitter for the blockers that can stall out
    /// of sight, carried-in demand for the rest. Makes every carried term
    /// vanish.
    SuspensionAsJitter,
    /// Minimum over all assignments to the direct blockers, capped at
    /// 2^16 vectors; beyond the cap only the default and all-jitter
    /// assignments are evaluated.
    Exhaustive,
    /// Jitter for every direct blocker.
    AllZero,
}

/// Per-pair back-pressure constants for [`rta_baseline`], in cycles.
/// Unset pairs are zero; values are non-negative by construction.
#[derive(Debug, Clone, Default)]
pub struct BackPressure {
    pairs: BTreeMap<(FlowId, FlowId), u64>,
}

impl BackPressure {
    pub fn zero() -> BackPressure {
        BackPressure::default()
    }

    /// Sets the extra demand charged per message of `blocker` in the
    /// analysis of `blocked`.
    pub fn set(&mut self, blocker: FlowId, blocked: FlowId, cycles: u64) {
        self.pairs.insert((blocker, blocked), cycles);
    }

    pub fn get(&self, blocker: FlowId, blocked: FlowId) -> u64 {
        self.pairs.get(&(blocker, blocked)).copied().unwrap_or(0)
    }
}

/// A higher-priority flow as the suspension-aware analysis of flow `k`
/// sees it: demand, period, deadline, and suspension budget. Flows outside
/// the share set are reported with `interferes` false and contribute
/// nothing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformedFlow {
    pub id: FlowId,
    pub c_hat: u64,
    pub period: u64,
    pub deadline: u64,
    /// `R - c_hat` when the flow can stall out of `k`'s sight, else 0.
    pub suspension: u64,
    pub interferes: bool,
}

/// Shared per-call context: the analyzed flow's blockers and their
/// validated response data.
struct Context {
    share: Vec<usize>,
    c_hat_k: u64,
    /// Suspension budget per index `j < k`; nonzero only for blockers that
    /// can stall out of sight.
    budgets: Vec<u64>,
    /// Jitter `R_j - c_hat_j` per index `j < k`, for blockers only.
    slack: Vec<u64>,
}

fn context(fs: &FlowSet, k: usize, responses: &[Option<u64>]) -> Result<Context, RtaError> {
    let share = fs.share_set(k);
    let ss = fs.ss_set(k);
    let mut budgets = alloc::vec![0u64; k];
    let mut slack = alloc::vec![0u64; k];
    for &j in &share {
        let flow = fs.get(j);
        let r = responses
            .get(j)
            .copied()
            .flatten()
            .ok_or(RtaError::MissingResponse(flow.id))?;
        let c_hat = flow.effective_time();
        if r < c_hat {
            return Err(RtaError::InvalidResponse(flow.id));
        }
        slack[j] = r - c_hat;
    }
    for &j in &ss {
        budgets[j] = slack[j];
    }
    Ok(Context {
        share,
        c_hat_k: fs.get(k).effective_time(),
        budgets,
        slack,
    })
}

fn sp2_rhs_ctx(fs: &FlowSet, ctx: &Context, x: &[bool], t: u64) -> u64 {
    // carried[i] = sum of budgets charged as demand at or below priority i.
    let k = ctx.budgets.len();
    let mut carried = alloc::vec![0u64; k + 1];
    for j in (0..k).rev() {
        carried[j] = carried[j + 1] + if x[j] { ctx.budgets[j] } else { 0 };
    }
    let mut total = ctx.c_hat_k;
    for &i in &ctx.share {
        let flow = fs.get(i);
        let jitter = if x[i] { 0 } else { ctx.slack[i] };
        total += (t + carried[i] + jitter).div_ceil(flow.period) * flow.effective_time();
    }
    total
}

/// One evaluation of the suspension-aware recurrence's right-hand side for
/// flow `k` at time `t` under assignment `x` (length `k`, `true` charging
/// that blocker's budget as carried-in demand). Exposed so the equality
/// with [`baseline_rhs`] under the default assignment and zero
/// back-pressure can be checked pointwise.
pub fn sp2_rhs(
    fs: &FlowSet,
    k: usize,
    responses: &[Option<u64>],
    x: &[bool],
    t: u64,
) -> Result<u64, RtaError> {
    assert_eq!(x.len(), k, "one assignment bit per higher-priority flow");
    let ctx = context(fs, k, responses)?;
    Ok(sp2_rhs_ctx(fs, &ctx, x, t))
}

fn baseline_rhs_ctx(
    fs: &FlowSet,
    k: usize,
    ctx: &Context,
    share1: &[usize],
    back_pressure: &BackPressure,
    t: u64,
) -> u64 {
    let blocked = fs.get(k).id;
    let mut total = ctx.c_hat_k;
    for &j in &ctx.share {
        let flow = fs.get(j);
        let jitter = if share1.contains(&j) { ctx.slack[j] } else { 0 };
        let demand = flow.effective_time() + back_pressure.get(flow.id, blocked);
        total += (t + jitter).div_ceil(flow.period) * demand;
    }
    total
}

/// One evaluation of the baseline recurrence's right-hand side; see
/// [`sp2_rhs`].
pub fn baseline_rhs(
    fs: &FlowSet,
    k: usize,
    responses: &[Option<u64>],
    back_pressure: &BackPressure,
    t: u64,
) -> Result<u64, RtaError> {
    let ctx = context(fs, k, responses)?;
    let share1 = fs.share1_set(k);
    Ok(baseline_rhs_ctx(fs, k, &ctx, &share1, back_pressure, t))
}

/// The default assignment for flow `k`: jitter (`false`) for blockers that
/// can stall out of sight, carried-in demand (`true`) for everything else.
pub fn suspension_as_jitter(fs: &FlowSet, k: usize) -> Vec<bool> {
    let ss = fs.ss_set(k);
    (0..k).map(|j| !ss.contains(&j)).collect()
}

/// Least-fixed-point run: `value` is the fixed point if it stays within
/// the deadline, `evaluations` counts right-hand-side evaluations. The
/// iterate increases by at least one cycle per step, so evaluations are
/// bounded by the deadline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPointRun {
    pub value: Option<u64>,
    pub evaluations: u64,
}

fn solve(start: u64, deadline: u64, mut rhs: impl FnMut(u64) -> u64) -> FixedPointRun {
    if start > deadline {
        return FixedPointRun { value: None, evaluations: 0 };
    }
    let mut t = start;
    let mut evaluations = 0;
    loop {
        let next = rhs(t);
        evaluations += 1;
        if next == t {
            return FixedPointRun { value: Some(t), evaluations };
        }
        if next > deadline {
            return FixedPointRun { value: None, evaluations };
        }
        debug_assert!(next > t, "recurrence must be monotone");
        t = next;
    }
}

/// Detailed outcome of one suspension-aware analysis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sp2Report {
    pub response: Option<u64>,
    /// Right-hand-side evaluations of the winning run (of the default
    /// assignment's run when nothing converged).
    pub evaluations: u64,
    /// The assignment behind `response`.
    pub x: Vec<bool>,
    pub vectors_tried: u64,
}

const EXHAUSTIVE_CAP_BITS: usize = 16;

/// Suspension-aware response-time bound for flow `k`; see the module doc.
/// `responses` holds the already-computed bounds of the higher-priority
/// flows (indexed like the flow set); bounds must be present for every
/// direct blocker. `None` means not schedulable by this test.
pub fn rta_sp2(
    fs: &FlowSet,
    k: usize,
    responses: &[Option<u64>],
    policy: XPolicy,
) -> Result<Option<u64>, RtaError> {
    Ok(rta_sp2_report(fs, k, responses, policy)?.response)
}

/// [`rta_sp2`] with evaluation counts and the winning assignment.
pub fn rta_sp2_report(
    fs: &FlowSet,
    k: usize,
    responses: &[Option<u64>],
    policy: XPolicy,
) -> Result<Sp2Report, RtaError> {
    let flow = fs.get(k);
    if flow.deadline > flow.period {
        return Err(RtaError::DeadlineExceedsPeriod(flow.id));
    }
    let ctx = context(fs, k, responses)?;
    let default_x = suspension_as_jitter(fs, k);

    let run = |x: &[bool]| solve(ctx.c_hat_k, flow.deadline, |t| sp2_rhs_ctx(fs, &ctx, x, t));

    let candidates: Vec<Vec<bool>> = match policy {
        XPolicy::SuspensionAsJitter => alloc::vec![default_x.clone()],
        XPolicy::AllZero => alloc::vec![alloc::vec![false; k]],
        XPolicy::Exhaustive => {
            if ctx.share.len() > EXHAUSTIVE_CAP_BITS {
                alloc::vec![default_x.clone(), alloc::vec![false; k]]
            } else {
                // Only bits of direct blockers can change the recurrence;
                // the rest keep the default assignment.
                (0u64..(1 << ctx.share.len()))
                    .map(|bits| {
                        let mut x = default_x.clone();
                        for (pos, &j) in ctx.share.iter().enumerate() {
                            x[j] = bits & (1 << pos) != 0;
                        }
                        x
                    })
                    .collect()
            }
        }
    };

    let mut best: Option<(u64, Vec<bool>, u64)> = None;
    let mut fallback: Option<(u64, Vec<bool>)> = None;
    let mut vectors_tried = 0;
    for x in candidates {
        let attempt = run(&x);
        vectors_tried += 1;
        if fallback.is_none() {
            fallback = Some((attempt.evaluations, x.clone()));
        }
        if let Some(value) = attempt.value {
            let better = best.as_ref().is_none_or(|&(b, _, _)| value < b);
            if better {
                best = Some((value, x, attempt.evaluations));
            }
        }
    }
    Ok(match best {
        Some((value, x, evaluations)) => Sp2Report {
            response: Some(value),
            evaluations,
            x,
            vectors_tried,
        },
        None => {
            let (evaluations, x) = fallback.expect("at least one assignment evaluated");
            Sp2Report { response: None, evaluations, x, vectors_tried }
        }
    })
}

/// Baseline wormhole-style response-time bound for flow `k`; see the
/// module doc. `None` means not schedulable by this test.
pub fn rta_baseline(
    fs: &FlowSet,
    k: usize,
    responses: &[Option<u64>],
    back_pressure: &BackPressure,
) -> Result<Option<u64>, RtaError> {
    Ok(rta_baseline_report(fs, k, responses, back_pressure)?.value)
}

/// [`rta_baseline`] with the evaluation count.
pub fn rta_baseline_report(
    fs: &FlowSet,
    k: usize,
    responses: &[Option<u64>],
    back_pressure: &BackPressure,
) -> Result<FixedPointRun, RtaError> {
    let flow = fs.get(k);
    if flow.deadline > flow.period {
        return Err(RtaError::DeadlineExceedsPeriod(flow.id));
    }
    let ctx = context(fs, k, responses)?;
    let share1 = fs.share1_set(k);
    Ok(solve(ctx.c_hat_k, flow.deadline, |t| {
        baseline_rhs_ctx(fs, k, &ctx, &share1, back_pressure, t)
    }))
}

/// The higher-priority flows as the suspension-aware analysis of flow `k`
/// sees them, suspension budgets filled in from `responses`.
pub fn transform_flowset(
    fs: &FlowSet,
    k: usize,
    responses: &[Option<u64>],
) -> Result<Vec<TransformedFlow>, RtaError> {
    let ctx = context(fs, k, responses)?;
    Ok((0..k)
        .map(|j| {
            let flow = fs.get(j);
            TransformedFlow {
                id: flow.id,
                c_hat: flow.effective_time(),
                period: flow.period,
                deadline: flow.deadline,
                suspension: ctx.budgets[j],
                interferes: ctx.share.contains(&j),
            }
        })
        .collect())
}

/// Analysis of one flow within [`analyze_all`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowAnalysis {
    pub id: FlowId,
    pub eta: usize,
    pub c_hat: u64,
    pub period: u64,
    pub deadline: u64,
    pub r_sp2: Option<u64>,
    pub evaluations_sp2: u64,
    /// Winning assignment of the suspension-aware test; empty when the
    /// flow was skipped because a blocker already failed.
    pub x: Vec<bool>,
    pub r_baseline: Option<u64>,
    pub evaluations_baseline: u64,
}

impl FlowAnalysis {
    pub fn schedulable_sp2(&self) -> bool {
        self.r_sp2.is_some()
    }

    pub fn schedulable_baseline(&self) -> bool {
        self.r_baseline.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisResult {
    pub rows: Vec<FlowAnalysis>,
}

impl AnalysisResult {
    pub fn all_schedulable_sp2(&self) -> bool {
        self.rows.iter().all(|r| r.schedulable_sp2())
    }

    pub fn all_schedulable_baseline(&self) -> bool {
        self.rows.iter().all(|r| r.schedulable_baseline())
    }

    /// Suspension-aware bounds indexed like the flow set.
    pub fn sp2_responses(&self) -> Vec<Option<u64>> {
        self.rows.iter().map(|r| r.r_sp2).collect()
    }
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub x_policy: XPolicy,
    pub back_pressure: BackPressure,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            x_policy: XPolicy::SuspensionAsJitter,
            back_pressure: BackPressure::zero(),
        }
    }
}

/// Analyzes every flow in priority order, each test against its own chain
/// of prior bounds. A flow whose direct blocker already failed a test is
/// reported unschedulable by that test without running it (its bound would
/// rest on a response time that does not exist).
pub fn analyze_all(fs: &FlowSet, options: &AnalyzeOptions) -> Result<AnalysisResult, RtaError> {
    let n = fs.len();
    let mut rows = Vec::with_capacity(n);
    let mut sp2_chain: Vec<Option<u64>> = alloc::vec![None; n];
    let mut base_chain: Vec<Option<u64>> = alloc::vec![None; n];
    for k in 0..n {
        let flow = fs.get(k);
        let share = fs.share_set(k);

        let sp2_ready = share.iter().all(|&j| sp2_chain[j].is_some());
        let (r_sp2, evaluations_sp2, x) = if sp2_ready {
            let report = rta_sp2_report(fs, k, &sp2_chain, options.x_policy)?;
            (report.response, report.evaluations, report.x)
        } else {
            (None, 0, Vec::new())
        };
        sp2_chain[k] = r_sp2;

        let base_ready = share.iter().all(|&j| base_chain[j].is_some());
        let (r_baseline, evaluations_baseline) = if base_ready {
            let run = rta_baseline_report(fs, k, &base_chain, &options.back_pressure)?;
            (run.value, run.evaluations)
        } else {
            (None, 0)
        };
        base_chain[k] = r_baseline;

        rows.push(FlowAnalysis {
            id: flow.id,
            eta: flow.eta(),
            c_hat: flow.effective_time(),
            period: flow.period,
            deadline: flow.deadline,
            r_sp2,
            evaluations_sp2,
            x,
            r_baseline,
            evaluations_baseline,
        });
    }
    Ok(AnalysisResult { rows })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DominancePair {
    pub id: FlowId,
    pub r_sp2: Option<u64>,
    pub r_baseline: Option<u64>,
}

/// Outcome of [`dominance_check`]: `violations` lists flows where the
/// baseline converged but the suspension-aware test did not beat or match
/// it. Must stay empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DominanceReport {
    pub pairs: Vec<DominancePair>,
    pub violations: Vec<FlowId>,
}

/// Compares the suspension-aware test (default assignment) against the
/// baseline with zero back-pressure on every flow of the set.
pub fn dominance_check(fs: &FlowSet) -> Result<DominanceReport, RtaError> {
    Ok(dominance_of(&analyze_all(fs, &AnalyzeOptions::default())?))
}

/// The dominance verdicts of an existing analysis: wherever the baseline
/// converged, the suspension-aware bound must exist and not exceed it.
pub fn dominance_of(result: &AnalysisResult) -> DominanceReport {
    let mut pairs = Vec::with_capacity(result.rows.len());
    let mut violations = Vec::new();
    for row in &result.rows {
        let dominated = match (row.r_sp2, row.r_baseline) {
            (_, None) => true,
            (Some(s), Some(b)) => s <= b,
            (None, Some(_)) => false,
        };
        if !dominated {
            violations.push(row.id);
        }
        pairs.push(DominancePair {
            id: row.id,
            r_sp2: row.r_sp2,
            r_baseline: row.r_baseline,
        });
    }
    DominanceReport { pairs, violations }
}
