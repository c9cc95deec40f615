//! Flit progression of a single message over its path, modelled as a state
//! graph.
//!
//! A message of `flits` flits on an `eta`-link path is described by `eta + 1`
//! counts: element 0 is the source queue, elements `1..eta` are the buffers
//! behind each link, element `eta` is the sink. In one cycle the network
//! serves some non-empty subset of the links; link `j` (1-based) may fire
//! only if element `j - 1` held a flit at the start of the cycle, so a flit
//! cannot cross two links in the same cycle. Buffers between links hold at
//! most `capacity` flits after the move.
//!
//! Every move strictly increases the weighted sum `sum(j * counts[j])`, so
//! the state graph is a DAG and the exhaustive walks below terminate. They
//! exist to check the closed forms used by the analyses: the shortest series
//! is `flits + eta - 1` (every link served every cycle) and the longest is
//! `flits * eta` (one link served per cycle).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

/// Buffer occupancy of one message; see the module doc for the layout.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BufferState {
    counts: Vec<u64>,
}

impl BufferState {
    /// State before any cycle: all flits queued at the source.
    pub fn initial(flits: u64, links: usize) -> BufferState {
        let mut counts = alloc::vec![0; links + 1];
        counts[0] = flits;
        BufferState { counts }
    }

    /// Builds a state from raw counts (`links + 1` elements).
    pub fn from_counts(counts: Vec<u64>) -> BufferState {
        assert!(counts.len() >= 2, "state needs a source and a sink element");
        BufferState { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn links(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn flits(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// True once every flit has reached the sink.
    pub fn is_terminal(&self) -> bool {
        self.counts[..self.counts.len() - 1].iter().all(|&c| c == 0)
    }
}

impl fmt::Display for BufferState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.counts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Buffer bound for the intermediate elements. The source and sink are
/// never bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capacity {
    Unbounded,
    Bounded(u64),
}

impl Capacity {
    fn admits(self, count: u64) -> bool {
        match self {
            Capacity::Unbounded => true,
            Capacity::Bounded(limit) => count <= limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProgressionError {
    ZeroFlits,
    ZeroLinks,
    ZeroCapacity,
    /// The walk touched more distinct states than the budget allows.
    BudgetExceeded { budget: usize },
    /// The number of series does not fit in a u128.
    CountOverflow,
}

impl fmt::Display for ProgressionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProgressionError::ZeroFlits => write!(f, "message must carry at least one flit"),
            ProgressionError::ZeroLinks => write!(f, "path must have at least one link"),
            ProgressionError::ZeroCapacity => write!(f, "buffer capacity must be at least one"),
            ProgressionError::BudgetExceeded { budget } => {
                write!(f, "state budget of {budget} exceeded")
            }
            ProgressionError::CountOverflow => write!(f, "series count overflows u128"),
        }
    }
}

impl core::error::Error for ProgressionError {}

/// Default cap on distinct states explored by [`series_bounds`] and
/// [`count_series`].
pub const DEFAULT_BUDGET: usize = 1_000_000;

/// All states reachable from `state` in one cycle: one per non-empty subset
/// of the fireable links whose post-move buffers respect `capacity`.
///
/// Distinct subsets always yield distinct states, because the fired set can
/// be read back off the state delta (see [`fired_links`]), so the result
/// contains no duplicates.
pub fn valid_successors(state: &BufferState, capacity: Capacity) -> Vec<BufferState> {
    let eta = state.links();
    let fireable: Vec<usize> = (1..=eta)
        .filter(|&j| state.counts[j - 1] >= 1)
        .collect();
    assert!(fireable.len() < 64, "subset enumeration is limited to 63 fireable links");
    let mut out = Vec::new();
    for mask in 1u64..(1u64 << fireable.len()) {
        let mut counts = state.counts.clone();
        for (bit, &j) in fireable.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                counts[j - 1] -= 1;
                counts[j] += 1;
            }
        }
        if (1..eta).all(|e| capacity.admits(counts[e])) {
            out.push(BufferState { counts });
        }
    }
    out
}

/// The links (1-based) fired between two consecutive states, recovered from
/// the suffix sums of the delta: link `j` fired exactly when the flits at or
/// beyond element `j` grew by one. Returns `None` if the delta is not a
/// single valid move, including when no link fired or a link fired without
/// an upstream flit.
pub fn fired_links(before: &BufferState, after: &BufferState) -> Option<Vec<usize>> {
    if before.counts.len() != after.counts.len() {
        return None;
    }
    let eta = before.links();
    let mut fired = Vec::new();
    let mut suffix: i128 = 0;
    let mut indicator = alloc::vec![0i128; eta + 1];
    for j in (0..=eta).rev() {
        suffix += after.counts[j] as i128 - before.counts[j] as i128;
        indicator[j] = suffix;
    }
    if indicator[0] != 0 {
        return None;
    }
    // Indexing two buffers at offset positions; an iterator chain only
    // obscures that.
    #[allow(clippy::needless_range_loop)]
    for j in 1..=eta {
        match indicator[j] {
            0 => {}
            1 => {
                if before.counts[j - 1] < 1 {
                    return None;
                }
                fired.push(j);
            }
            _ => return None,
        }
    }
    if fired.is_empty() {
        return None;
    }
    Some(fired)
}

/// The move made when every fireable link is served, which is how the
/// network treats a message that wins all its links. Serving all fireable
/// links can never overfill a buffer: a buffer that is already full has a
/// flit to send, so its own link fires too. Returns `None` on a terminal
/// state.
pub fn full_service_successor(state: &BufferState) -> Option<BufferState> {
    if state.is_terminal() {
        return None;
    }
    let eta = state.links();
    let mut counts = state.counts.clone();
    for j in (1..=eta).rev() {
        if state.counts[j - 1] >= 1 {
            counts[j - 1] -= 1;
            counts[j] += 1;
        }
    }
    Some(BufferState { counts })
}

fn check_args(flits: u64, links: usize, capacity: Capacity) -> Result<(), ProgressionError> {
    if flits == 0 {
        return Err(ProgressionError::ZeroFlits);
    }
    if links == 0 {
        return Err(ProgressionError::ZeroLinks);
    }
    if capacity == Capacity::Bounded(0) {
        return Err(ProgressionError::ZeroCapacity);
    }
    Ok(())
}

/// Exhaustive walk of the state DAG, folding a value per state over its
/// successors. `base` is the value of the terminal state.
fn fold_states<T: Clone, F>(
    flits: u64,
    links: usize,
    capacity: Capacity,
    budget: usize,
    base: T,
    combine: F,
) -> Result<T, ProgressionError>
where
    F: Fn(&[T]) -> Result<T, ProgressionError>,
{
    enum Frame {
        Enter(BufferState),
        Exit(BufferState, Vec<BufferState>),
    }
    let initial = BufferState::initial(flits, links);
    let mut memo: BTreeMap<BufferState, T> = BTreeMap::new();
    let mut stack = alloc::vec![Frame::Enter(initial.clone())];
    while let Some(frame) = stack.pop() {
        match frame {
            Frame::Enter(state) => {
                if memo.contains_key(&state) {
                    continue;
                }
                if state.is_terminal() {
                    memo.insert(state, base.clone());
                    if memo.len() > budget {
                        return Err(ProgressionError::BudgetExceeded { budget });
                    }
                    continue;
                }
                let successors = valid_successors(&state, capacity);
                stack.push(Frame::Exit(state, successors.clone()));
                for succ in &successors {
                    if !memo.contains_key(succ) {
                        stack.push(Frame::Enter(succ.clone()));
                    }
                }
            }
            Frame::Exit(state, successors) => {
                if memo.contains_key(&state) {
                    continue;
                }
                let values: Vec<T> = successors
                    .iter()
                    .map(|s| memo.get(s).expect("successor folded first").clone())
                    .collect();
                let value = combine(&values)?;
                memo.insert(state, value);
                if memo.len() > budget {
                    return Err(ProgressionError::BudgetExceeded { budget });
                }
            }
        }
    }
    Ok(memo.remove(&initial).expect("initial state folded"))
}

/// Shortest and longest series (cycles to drain the message) over all valid
/// progressions, computed by exhaustive walk. Descending into `Exit` before
/// its successors never happens: the walk is post-order, so both bounds are
/// exact.
pub fn series_bounds(
    flits: u64,
    links: usize,
    capacity: Capacity,
    budget: usize,
) -> Result<(u64, u64), ProgressionError> {
    check_args(flits, links, capacity)?;
    fold_states(flits, links, capacity, budget, (0u64, 0u64), |succ| {
        let min = succ.iter().map(|&(lo, _)| lo).min().expect("nonterminal state has successors");
        let max = succ.iter().map(|&(_, hi)| hi).max().expect("nonterminal state has successors");
        Ok((min + 1, max + 1))
    })
}

/// Number of distinct series, where two series differ if any cycle serves a
/// different set of links. Since the fired set is recoverable from each
/// state delta, this equals the number of paths through the state DAG.
pub fn count_series(
    flits: u64,
    links: usize,
    capacity: Capacity,
    budget: usize,
) -> Result<u128, ProgressionError> {
    check_args(flits, links, capacity)?;
    fold_states(flits, links, capacity, budget, 1u128, |succ| {
        let mut total: u128 = 0;
        for &c in succ {
            total = total.checked_add(c).ok_or(ProgressionError::CountOverflow)?;
        }
        Ok(total)
    })
}
