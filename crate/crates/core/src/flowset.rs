//! Periodic message flows and their contention structure.
//!
//! A flow repeatedly injects a message of `flits` flits along a fixed [`Path`].
//! Under all-or-nothing arbitration a message occupies every link of its path
//! for the whole transmission, so the time to drain one message over an
//! `eta`-link path is `flits + eta - 1` cycles (the pipeline fill costs
//! `eta - 1` extra cycles). Contention between flows is therefore captured
//! entirely by which paths overlap, not by where they overlap.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use crate::topology::Path;

/// Identifier for a flow, unique within a [`FlowSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowId(pub u32);

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A periodic flow: a message of `flits` flits released every `period`
/// cycles, due `deadline` cycles after release, transmitted along `path`.
///
/// Lower `priority` values win arbitration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    pub id: FlowId,
    pub priority: u32,
    pub flits: u64,
    pub period: u64,
    pub deadline: u64,
    pub path: Path,
}

impl Flow {
    /// Number of links on the flow's path.
    pub fn eta(&self) -> usize {
        self.path.eta()
    }

    /// Cycles to transmit one message when never blocked:
    /// `flits + eta - 1`, the flit count plus the pipeline fill.
    pub fn effective_time(&self) -> u64 {
        self.flits + self.path.eta() as u64 - 1
    }
}

/// Validation failures for a [`FlowSet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlowSetError {
    ZeroFlits(FlowId),
    ZeroPeriod(FlowId),
    ZeroDeadline(FlowId),
    DuplicateId(FlowId),
    DuplicatePriority(u32),
}

impl fmt::Display for FlowSetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowSetError::ZeroFlits(id) => write!(f, "flow {id} has zero flits"),
            FlowSetError::ZeroPeriod(id) => write!(f, "flow {id} has zero period"),
            FlowSetError::ZeroDeadline(id) => write!(f, "flow {id} has zero deadline"),
            FlowSetError::DuplicateId(id) => write!(f, "duplicate flow id {id}"),
            FlowSetError::DuplicatePriority(p) => write!(f, "duplicate priority {p}"),
        }
    }
}

impl core::error::Error for FlowSetError {}

/// A set of flows held in descending priority, so index order equals
/// arbitration precedence: index 0 always wins against index 1, and so on.
/// Ids and priorities are unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowSet {
    flows: Vec<Flow>,
}

impl FlowSet {
    /// Validates and sorts the flows by ascending `priority` value.
    pub fn new(mut flows: Vec<Flow>) -> Result<Self, FlowSetError> {
        for flow in &flows {
            if flow.flits == 0 {
                return Err(FlowSetError::ZeroFlits(flow.id));
            }
            if flow.period == 0 {
                return Err(FlowSetError::ZeroPeriod(flow.id));
            }
            if flow.deadline == 0 {
                return Err(FlowSetError::ZeroDeadline(flow.id));
            }
        }
        let mut ids = BTreeSet::new();
        let mut priorities = BTreeSet::new();
        for flow in &flows {
            if !ids.insert(flow.id) {
                return Err(FlowSetError::DuplicateId(flow.id));
            }
            if !priorities.insert(flow.priority) {
                return Err(FlowSetError::DuplicatePriority(flow.priority));
            }
        }
        flows.sort_by_key(|f| f.priority);
        Ok(FlowSet { flows })
    }

    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    /// Flows in descending priority.
    pub fn flows(&self) -> &[Flow] {
        &self.flows
    }

    pub fn get(&self, index: usize) -> &Flow {
        &self.flows[index]
    }

    /// Position of the flow with the given id, if present.
    pub fn index_of(&self, id: FlowId) -> Option<usize> {
        self.flows.iter().position(|f| f.id == id)
    }

    /// Indices of the higher-priority flows whose paths overlap flow `k`'s
    /// path. These are exactly the flows that can ever block flow `k`.
    ///
    /// `k` indexes [`Self::flows`]; panics if out of range.
    pub fn share_set(&self, k: usize) -> Vec<usize> {
        let path_k = &self.flows[k].path;
        (0..k)
            .filter(|&i| self.flows[i].path.intersects(path_k))
            .collect()
    }

    /// Indices of the flows in [`Self::share_set`] that can suspend flow
    /// `k` mid-transmission: flow `l` qualifies when some higher-priority
    /// flow `n` overlaps `l`'s path but is disjoint from `k`'s, because `n`
    /// can then stall `l` on a link flow `k` does not see while `l` keeps
    /// holding the links it shares with `k`.
    pub fn ss_set(&self, k: usize) -> Vec<usize> {
        let path_k = &self.flows[k].path;
        self.share_set(k)
            .into_iter()
            .filter(|&l| {
                self.share_set(l)
                    .into_iter()
                    .any(|n| !self.flows[n].path.intersects(path_k))
            })
            .collect()
    }

    /// The suspension-capable subset of [`Self::share_set`] computed by set
    /// difference: drop every flow whose own blockers all lie inside flow
    /// `k`'s share set.
    ///
    /// Equals [`Self::ss_set`]; kept as a separate computation so each can
    /// check the other.
    pub fn share1_set(&self, k: usize) -> Vec<usize> {
        let share_k: BTreeSet<usize> = self.share_set(k).into_iter().collect();
        let mut dropped: BTreeSet<usize> = BTreeSet::new();
        for &l in &share_k {
            let share_l: BTreeSet<usize> = self.share_set(l).into_iter().collect();
            if share_l.difference(&share_k).next().is_none() {
                dropped.insert(l);
            }
        }
        share_k.difference(&dropped).copied().collect()
    }
}
