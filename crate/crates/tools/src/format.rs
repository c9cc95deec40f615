//! On-disk formats: the JSON flow-set document, the textual schedule trace,
//! and the analysis CSV.
//!
//! A flow-set file names a mesh topology and a list of flows:
//!
//! ```json
//! {
//!   "topology": { "type": "mesh", "rows": 3, "cols": 3 },
//!   "flows": [
//!     { "id": 1, "priority": 1, "flits": 20, "period": 200, "deadline": 200,
//!       "source": [0, 0], "dest": [0, 1] }
//!   ]
//! }
//! ```
//!
//! `source` and `dest` are `[row, col]` router coordinates. A flow may carry
//! an explicit `path`: the full sequence of routers it visits, source first,
//! destination last, each consecutive pair adjacent; every hop names one
//! directed link. Without `path` the flow takes the XY route. Serialization
//! always writes the path out, so a parse of a serialized set reproduces it
//! exactly, link for link.

use std::fs;
use std::path::Path as StdPath;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use sp2_core::rta::AnalysisResult;
use sp2_core::sim::ScheduleTrace;
use sp2_core::{Flow, FlowId, FlowSet, NodeId, Path, Topology};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    #[serde(rename = "type")]
    pub kind: String,
    pub rows: u16,
    pub cols: u16,
    /// Include per-router core injection/ejection links.
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub core_links: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowDoc {
    pub id: u32,
    pub priority: u32,
    pub flits: u64,
    pub period: u64,
    pub deadline: u64,
    pub source: [u16; 2],
    pub dest: [u16; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<[u16; 2]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSetDoc {
    pub topology: TopologyDoc,
    pub flows: Vec<FlowDoc>,
}

pub fn doc_to_model(doc: &FlowSetDoc) -> Result<(Topology, FlowSet)> {
    if doc.topology.kind != "mesh" {
        bail!("unsupported topology type {:?} (only \"mesh\")", doc.topology.kind);
    }
    let topo = Topology::mesh(doc.topology.rows, doc.topology.cols, doc.topology.core_links)?;
    let mut flows = Vec::with_capacity(doc.flows.len());
    for f in &doc.flows {
        let path = flow_path(&topo, f).with_context(|| format!("flow {}", f.id))?;
        flows.push(Flow {
            id: FlowId(f.id),
            priority: f.priority,
            flits: f.flits,
            period: f.period,
            deadline: f.deadline,
            path,
        });
    }
    let fs = FlowSet::new(flows)?;
    Ok((topo, fs))
}

fn flow_path(topo: &Topology, f: &FlowDoc) -> Result<Path> {
    let src = NodeId::router(f.source[0], f.source[1]);
    let dst = NodeId::router(f.dest[0], f.dest[1]);
    let Some(seq) = &f.path else {
        return Ok(topo.xy_route(src, dst)?);
    };
    ensure!(seq.len() >= 2, "an explicit path needs at least two routers");
    ensure!(seq[0] == f.source, "an explicit path must start at the source router");
    ensure!(seq[seq.len() - 1] == f.dest, "an explicit path must end at the destination router");
    let mut links = Vec::with_capacity(seq.len() - 1);
    for hop in seq.windows(2) {
        let a = NodeId::router(hop[0][0], hop[0][1]);
        let b = NodeId::router(hop[1][0], hop[1][1]);
        links.push(topo.link_between(a, b)?);
    }
    Ok(Path::new(topo, links)?)
}

pub fn model_to_doc(topo: &Topology, fs: &FlowSet) -> Result<FlowSetDoc> {
    let mut flows = Vec::with_capacity(fs.len());
    for f in fs.flows() {
        let seq = router_sequence(topo, &f.path)?;
        flows.push(FlowDoc {
            id: f.id.0,
            priority: f.priority,
            flits: f.flits,
            period: f.period,
            deadline: f.deadline,
            source: seq[0],
            dest: seq[seq.len() - 1],
            path: Some(seq),
        });
    }
    Ok(FlowSetDoc {
        topology: TopologyDoc {
            kind: "mesh".to_string(),
            rows: topo.rows(),
            cols: topo.cols(),
            core_links: topo.has_core_links(),
        },
        flows,
    })
}

fn router_sequence(topo: &Topology, path: &Path) -> Result<Vec<[u16; 2]>> {
    let links = path.links();
    let mut seq = Vec::with_capacity(links.len() + 1);
    seq.push(router_coords(topo.link(links[0])?.src)?);
    for &id in links {
        seq.push(router_coords(topo.link(id)?.dst)?);
    }
    Ok(seq)
}

fn router_coords(node: NodeId) -> Result<[u16; 2]> {
    match node {
        NodeId::Router { row, col } => Ok([row, col]),
        other => bail!("flow paths must stay on router links, found {other}"),
    }
}

pub fn parse_flowset(text: &str) -> Result<(Topology, FlowSet)> {
    let doc: FlowSetDoc = serde_json::from_str(text)?;
    doc_to_model(&doc)
}

pub fn serialize_flowset(topo: &Topology, fs: &FlowSet) -> Result<String> {
    let doc = model_to_doc(topo, fs)?;
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    Ok(text)
}

pub fn load_flowset(path: &StdPath) -> Result<(Topology, FlowSet)> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_flowset(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn save_flowset(path: &StdPath, topo: &Topology, fs: &FlowSet) -> Result<()> {
    let text = serialize_flowset(topo, fs)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Renders a trace as text: one line per cycle listing every link's owner
/// (`-` when idle), then the event log.
///
/// ```text
/// 0,0=1,1=-,2=3
/// E,0,release,1
/// ```
pub fn render_trace(trace: &ScheduleTrace) -> String {
    let mut out = String::new();
    for cycle in 0..trace.horizon() {
        out.push_str(&cycle.to_string());
        for link in 0..trace.link_count() {
            out.push(',');
            out.push_str(&link.to_string());
            out.push('=');
            match trace.owner(cycle, sp2_core::LinkId(link as u32)) {
                Some(flow) => out.push_str(&flow.to_string()),
                None => out.push('-'),
            }
        }
        out.push('\n');
    }
    for event in trace.events() {
        out.push_str(&format!("E,{},{},{}\n", event.time, event.kind, event.flow));
    }
    out
}

pub const ANALYSIS_CSV_HEADER: &str =
    "flow_id,eta,c_hat,R_sp2,R_baseline,schedulable_sp2,schedulable_baseline,iters";

/// One CSV row per flow, priority order, empty R cells for failed tests.
/// `iters` counts right-hand-side evaluations of the suspension-aware test.
pub fn analysis_csv(result: &AnalysisResult) -> String {
    let mut out = String::from(ANALYSIS_CSV_HEADER);
    out.push('\n');
    for row in &result.rows {
        out.push_str(&analysis_csv_row(row));
        out.push('\n');
    }
    out
}

pub fn analysis_csv_row(row: &sp2_core::rta::FlowAnalysis) -> String {
    let opt = |r: Option<u64>| r.map(|v| v.to_string()).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{}",
        row.id,
        row.eta,
        row.c_hat,
        opt(row.r_sp2),
        opt(row.r_baseline),
        row.schedulable_sp2(),
        row.schedulable_baseline(),
        row.evaluations_sp2,
    )
}
