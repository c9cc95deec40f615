//! Seeded random flow-set generation.

use anyhow::{bail, ensure, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sp2_core::{Flow, FlowId, FlowSet, NodeId, Topology};
use std::collections::BTreeSet;

/// Knobs for [`generate_flowset`]. All draws come from one stream seeded
/// with `seed`, so equal params give equal flow sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    pub rows: u16,
    pub cols: u16,
    #[serde(default)]
    pub core_links: bool,
    pub flows: u32,
    /// Inclusive flit-count range per message.
    pub flits: [u64; 2],
    /// Inclusive period range; periods are drawn log-uniformly.
    pub period: [u64; 2],
    /// Inclusive deadline-factor range within (0, 1]; the deadline is
    /// `max(c_hat, floor(d * period))`.
    pub deadline_factor: [f64; 2],
    pub seed: u64,
}

/// Builds a mesh and `flows` random flows on it: distinct source/dest
/// router pairs, XY paths, deadline-monotonic priorities (ties broken by
/// id). Periods are clamped up to the effective time so every flow could
/// at least run alone; deadlines stay constrained.
pub fn generate_flowset(p: &GeneratorParams) -> Result<(Topology, FlowSet)> {
    ensure!(p.flits[0] >= 1 && p.flits[0] <= p.flits[1], "flit range is empty");
    ensure!(p.period[0] >= 1 && p.period[0] <= p.period[1], "period range is empty");
    ensure!(
        p.deadline_factor[0] > 0.0
            && p.deadline_factor[0] <= p.deadline_factor[1]
            && p.deadline_factor[1] <= 1.0,
        "deadline factors must satisfy 0 < min <= max <= 1"
    );
    let topo = Topology::mesh(p.rows, p.cols, p.core_links)?;
    let routers = topo.router_count();
    let pairs = routers * (routers - 1);
    if p.flows as usize > pairs {
        bail!("{} flows will not fit on {} distinct router pairs", p.flows, pairs);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let cols = usize::from(p.cols);
    let mut used: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut drafts = Vec::with_capacity(p.flows as usize);
    for id in 1..=p.flows {
        let (src, dst) = loop {
            let a = rng.gen_range(0..routers);
            let b = rng.gen_range(0..routers);
            if a != b && used.insert((a, b)) {
                break (a, b);
            }
        };
        let src = NodeId::router((src / cols) as u16, (src % cols) as u16);
        let dst = NodeId::router((dst / cols) as u16, (dst % cols) as u16);
        let path = topo.xy_route(src, dst)?;
        let flits = rng.gen_range(p.flits[0]..=p.flits[1]);
        let period_drawn = log_uniform(&mut rng, p.period[0], p.period[1]);
        let factor = rng
            .gen::<f64>()
            .mul_add(p.deadline_factor[1] - p.deadline_factor[0], p.deadline_factor[0]);
        let c_hat = flits + path.eta() as u64 - 1;
        let period = period_drawn.max(c_hat);
        let deadline = ((factor * period as f64).floor() as u64).max(c_hat);
        drafts.push((FlowId(id), flits, period, deadline, path));
    }

    let mut order: Vec<usize> = (0..drafts.len()).collect();
    order.sort_by_key(|&i| (drafts[i].3, drafts[i].0));
    let mut flows = Vec::with_capacity(drafts.len());
    for (rank, &i) in order.iter().enumerate() {
        let (id, flits, period, deadline, ref path) = drafts[i];
        flows.push(Flow {
            id,
            priority: rank as u32 + 1,
            flits,
            period,
            deadline,
            path: path.clone(),
        });
    }
    Ok((topo, FlowSet::new(flows)?))
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: u64, hi: u64) -> u64 {
    if lo == hi {
        return lo;
    }
    let (lo_ln, hi_ln) = ((lo as f64).ln(), (hi as f64).ln());
    let drawn = (rng.gen::<f64>().mul_add(hi_ln - lo_ln, lo_ln)).exp().round() as u64;
    drawn.clamp(lo, hi)
}
