//! NoC topologies as directed-link graphs, with dimension-ordered routing.
//!
//! A topology is a set of routers on a grid, optionally one core per router,
//! and directed links. Adjacent routers are always connected by two physically
//! separate links (one per direction), as are a core and its router. Link ids
//! are assigned in a fixed construction order, so they are stable across runs
//! for identical construction parameters.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

/// A core or router, addressed by its grid position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeId {
    Router { row: u16, col: u16 },
    Core { row: u16, col: u16 },
}

impl NodeId {
    pub fn router(row: u16, col: u16) -> Self {
        NodeId::Router { row, col }
    }

    pub fn core(row: u16, col: u16) -> Self {
        NodeId::Core { row, col }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Router { row, col } => write!(f, "R({row},{col})"),
            NodeId::Core { row, col } => write!(f, "A({row},{col})"),
        }
    }
}

/// Stable identifier of one directed link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId(pub u32);

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One directed link between two distinct nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub id: LinkId,
    pub src: NodeId,
    pub dst: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopologyError {
    /// Mesh dimensions must both be at least one.
    ZeroDimension,
    /// Route endpoints must be distinct routers of this topology.
    UnknownRouter(NodeId),
    /// A flow must traverse at least one link.
    EmptyRoute,
    /// Path validation: the links do not form a chain, or a link repeats.
    BrokenChain { position: usize },
    RepeatedLink(LinkId),
    UnknownLink(LinkId),
    /// No link connects the given node pair.
    NotAdjacent(NodeId, NodeId),
}

impl fmt::Display for TopologyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyError::ZeroDimension => write!(f, "mesh dimensions must be positive"),
            TopologyError::UnknownRouter(n) => write!(f, "unknown router {n}"),
            TopologyError::EmptyRoute => write!(f, "a route must traverse at least one link"),
            TopologyError::BrokenChain { position } => {
                write!(f, "links {position} and {} do not chain", position + 1)
            }
            TopologyError::RepeatedLink(l) => write!(f, "link {l} repeats within the path"),
            TopologyError::UnknownLink(l) => write!(f, "link {l} is not part of the topology"),
            TopologyError::NotAdjacent(a, b) => write!(f, "no link connects {a} to {b}"),
        }
    }
}

impl core::error::Error for TopologyError {}

/// Directed-link graph of cores, routers, and links.
///
/// Immutable after construction; all queries take `&self`.
#[derive(Debug, Clone)]
pub struct Topology {
    rows: u16,
    cols: u16,
    with_core_links: bool,
    links: Vec<Link>,
    by_endpoints: BTreeMap<(NodeId, NodeId), LinkId>,
}

impl Topology {
    /// Build a 2-D mesh of `rows x cols` routers.
    ///
    /// Every adjacent router pair gets an up-link and a down-link; with
    /// `with_core_links`, every router also gets an injection and an ejection
    /// link to its core. Link ids are assigned row-major, core pair first,
    /// then the eastward pair, then the southward pair.
    pub fn mesh(rows: u16, cols: u16, with_core_links: bool) -> Result<Self, TopologyError> {
        if rows == 0 || cols == 0 {
            return Err(TopologyError::ZeroDimension);
        }
        let mut links = Vec::new();
        let mut by_endpoints = BTreeMap::new();
        let add = |links: &mut Vec<Link>,
                   by_endpoints: &mut BTreeMap<(NodeId, NodeId), LinkId>,
                   src: NodeId,
                   dst: NodeId| {
            let id = LinkId(links.len() as u32);
            links.push(Link { id, src, dst });
            by_endpoints.insert((src, dst), id);
        };
        for row in 0..rows {
            for col in 0..cols {
                let here = NodeId::router(row, col);
                if with_core_links {
                    let core = NodeId::core(row, col);
                    add(&mut links, &mut by_endpoints, core, here);
                    add(&mut links, &mut by_endpoints, here, core);
                }
                if col + 1 < cols {
                    let east = NodeId::router(row, col + 1);
                    add(&mut links, &mut by_endpoints, here, east);
                    add(&mut links, &mut by_endpoints, east, here);
                }
                if row + 1 < rows {
                    let south = NodeId::router(row + 1, col);
                    add(&mut links, &mut by_endpoints, here, south);
                    add(&mut links, &mut by_endpoints, south, here);
                }
            }
        }
        Ok(Topology { rows, cols, with_core_links, links, by_endpoints })
    }

    pub fn rows(&self) -> u16 {
        self.rows
    }

    pub fn cols(&self) -> u16 {
        self.cols
    }

    pub fn has_core_links(&self) -> bool {
        self.with_core_links
    }

    pub fn router_count(&self) -> usize {
        usize::from(self.rows) * usize::from(self.cols)
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> Result<&Link, TopologyError> {
        self.links.get(id.0 as usize).ok_or(TopologyError::UnknownLink(id))
    }

    /// The directed link from `src` to `dst`, if the nodes are connected.
    pub fn link_between(&self, src: NodeId, dst: NodeId) -> Result<LinkId, TopologyError> {
        self.by_endpoints
            .get(&(src, dst))
            .copied()
            .ok_or(TopologyError::NotAdjacent(src, dst))
    }

    fn check_router(&self, node: NodeId) -> Result<(u16, u16), TopologyError> {
        match node {
            NodeId::Router { row, col } if row < self.rows && col < self.cols => Ok((row, col)),
            other => Err(TopologyError::UnknownRouter(other)),
        }
    }

    /// Dimension-ordered route between two routers: X (column index) first,
    /// then Y (row index). Deterministic, loop-free, and exactly Manhattan
    /// distance long.
    pub fn xy_route(&self, src: NodeId, dst: NodeId) -> Result<Path, TopologyError> {
        let (r0, c0) = self.check_router(src)?;
        let (r1, c1) = self.check_router(dst)?;
        if src == dst {
            return Err(TopologyError::EmptyRoute);
        }
        let mut links = Vec::new();
        let (mut row, mut col) = (r0, c0);
        while col != c1 {
            let next = if col < c1 { col + 1 } else { col - 1 };
            links.push(self.link_between(NodeId::router(row, col), NodeId::router(row, next))?);
            col = next;
        }
        while row != r1 {
            let next = if row < r1 { row + 1 } else { row - 1 };
            links.push(self.link_between(NodeId::router(row, col), NodeId::router(next, col))?);
            row = next;
        }
        Path::new(self, links)
    }
}

/// An ordered, loop-free sequence of links through a topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    links: Vec<LinkId>,
}

impl Path {
    /// Validate a user-supplied link sequence: non-empty, chained
    /// (each link starts where the previous one ended), and free of repeats.
    pub fn new(topology: &Topology, links: Vec<LinkId>) -> Result<Self, TopologyError> {
        if links.is_empty() {
            return Err(TopologyError::EmptyRoute);
        }
        for (position, pair) in links.windows(2).enumerate() {
            if topology.link(pair[0])?.dst != topology.link(pair[1])?.src {
                return Err(TopologyError::BrokenChain { position });
            }
        }
        topology.link(*links.last().unwrap())?;
        let mut seen = links.clone();
        seen.sort_unstable();
        for pair in seen.windows(2) {
            if pair[0] == pair[1] {
                return Err(TopologyError::RepeatedLink(pair[0]));
            }
        }
        Ok(Path { links })
    }

    /// Number of links in the path (written `eta` throughout the crate).
    pub fn eta(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[LinkId] {
        &self.links
    }

    pub fn contains(&self, link: LinkId) -> bool {
        self.links.contains(&link)
    }

    /// True if the two paths have at least one link in common.
    pub fn intersects(&self, other: &Path) -> bool {
        self.links.iter().any(|l| other.links.contains(l))
    }

    /// True if every link of `self` also appears in `other`.
    pub fn is_subset_of(&self, other: &Path) -> bool {
        self.links.iter().all(|l| other.links.contains(l))
    }

    /// Occupancy bitmask over `link_count` links, one bit per link id.
    pub fn bitmask(&self, link_count: usize) -> Vec<u64> {
        let words = link_count.div_ceil(64);
        let mut mask = alloc::vec![0u64; words];
        for l in &self.links {
            let bit = l.0 as usize;
            mask[bit / 64] |= 1 << (bit % 64);
        }
        mask
    }
}
