//! Weighted multigraphs, oriented-edge algebra, and the cycle-rooted
//! spanning forest (CRSF) structure shared by every other module.

use thiserror::Error;

pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("conductance must be strictly positive, got {0} on edge ({1}, {2})")]
    NonpositiveConductance(f64, VertexId, VertexId),
    #[error("self-loop edges are not supported (vertex {0})")]
    SelfLoop(VertexId),
    #[error("vertex id {0} out of range (vertex count {1})")]
    VertexOutOfRange(VertexId, usize),
}

/// An edge of the graph together with a traversal direction.
///
/// `reversed == false` means traversal from the stored endpoint `a` to `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrientedEdge {
    pub edge: EdgeId,
    pub reversed: bool,
}

impl OrientedEdge {
    pub fn forward(edge: EdgeId) -> Self {
        OrientedEdge { edge, reversed: false }
    }

    pub fn backward(edge: EdgeId) -> Self {
        OrientedEdge { edge, reversed: true }
    }

    /// Reversal; an involution.
    pub fn rev(self) -> Self {
        OrientedEdge { edge: self.edge, reversed: !self.reversed }
    }

    /// Dense id in `[0, 2*edge_count)`.
    pub fn index(self) -> usize {
        2 * self.edge + self.reversed as usize
    }

    pub fn from_index(i: usize) -> Self {
        OrientedEdge { edge: i / 2, reversed: i % 2 == 1 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EdgeData {
    pub a: VertexId,
    pub b: VertexId,
    pub conductance: f64,
}

/// Immutable weighted multigraph. Parallel edges are allowed, self-loops are
/// rejected. Oriented-edge ids are stable and deterministic given the input
/// edge order; all sampling reproducibility flows from that.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    vertex_count: usize,
    edges: Vec<EdgeData>,
    adjacency: Vec<Vec<OrientedEdge>>,
    weighted_degree: Vec<f64>,
}

impl WeightedGraph {
    pub fn build(
        vertex_count: usize,
        edge_list: &[(VertexId, VertexId, f64)],
    ) -> Result<Self, GraphError> {
        let mut edges = Vec::with_capacity(edge_list.len());
        let mut adjacency = vec![Vec::new(); vertex_count];
        let mut weighted_degree = vec![0.0; vertex_count];
        for &(a, b, c) in edge_list {
            if a >= vertex_count {
                return Err(GraphError::VertexOutOfRange(a, vertex_count));
            }
            if b >= vertex_count {
                return Err(GraphError::VertexOutOfRange(b, vertex_count));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            if !(c > 0.0) {
                return Err(GraphError::NonpositiveConductance(c, a, b));
            }
            let id = edges.len();
            edges.push(EdgeData { a, b, conductance: c });
            adjacency[a].push(OrientedEdge::forward(id));
            adjacency[b].push(OrientedEdge::backward(id));
            weighted_degree[a] += c;
            weighted_degree[b] += c;
        }
        Ok(WeightedGraph { vertex_count, edges, adjacency, weighted_degree })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, id: EdgeId) -> &EdgeData {
        &self.edges[id]
    }

    pub fn edges(&self) -> &[EdgeData] {
        &self.edges
    }

    pub fn conductance(&self, e: OrientedEdge) -> f64 {
        self.edges[e.edge].conductance
    }

    pub fn tail(&self, e: OrientedEdge) -> VertexId {
        let d = &self.edges[e.edge];
        if e.reversed { d.b } else { d.a }
    }

    pub fn head(&self, e: OrientedEdge) -> VertexId {
        let d = &self.edges[e.edge];
        if e.reversed { d.a } else { d.b }
    }

    /// Oriented edges with tail `v`.
    pub fn adjacency(&self, v: VertexId) -> &[OrientedEdge] {
        &self.adjacency[v]
    }

    pub fn weighted_degree(&self, v: VertexId) -> f64 {
        self.weighted_degree[v]
    }

    pub fn is_connected(&self) -> bool {
        if self.vertex_count == 0 {
            return true;
        }
        let mut seen = vec![false; self.vertex_count];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &e in &self.adjacency[v] {
                let w = self.head(e);
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.vertex_count
    }

    /// Checks that a walk given as oriented edges is closed and connected
    /// head-to-tail.
    pub fn is_closed_walk(&self, walk: &[OrientedEdge]) -> bool {
        if walk.is_empty() {
            return false;
        }
        for i in 0..walk.len() {
            let next = walk[(i + 1) % walk.len()];
            if self.head(walk[i]) != self.tail(next) {
                return false;
            }
        }
        true
    }
}

/// An oriented CRSF (or essential CRSF with roots) in functional-graph form:
/// every non-root vertex carries exactly one outgoing arc. Cycle lists and
/// component ids are derived views.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientedCrsf {
    arcs: Vec<Option<OrientedEdge>>,
}

impl OrientedCrsf {
    pub fn from_arcs(arcs: Vec<Option<OrientedEdge>>) -> Self {
        OrientedCrsf { arcs }
    }

    pub fn arcs(&self) -> &[Option<OrientedEdge>] {
        &self.arcs
    }

    pub fn arc(&self, v: VertexId) -> Option<OrientedEdge> {
        self.arcs[v]
    }

    /// Edge ids used, sorted; the canonical key of the unoriented CRSF.
    pub fn edge_key(&self) -> Vec<EdgeId> {
        let mut k: Vec<EdgeId> = self.arcs.iter().flatten().map(|e| e.edge).collect();
        k.sort_unstable();
        k
    }

    /// Dense key of the oriented configuration (arc index per vertex,
    /// `usize::MAX` for roots).
    pub fn arc_key(&self) -> Vec<usize> {
        self.arcs
            .iter()
            .map(|a| a.map(|e| e.index()).unwrap_or(usize::MAX))
            .collect()
    }

    /// The oriented cycles, each as the arc sequence starting from the
    /// smallest vertex on the cycle.
    pub fn cycles(&self, g: &WeightedGraph) -> Vec<Vec<OrientedEdge>> {
        let n = self.arcs.len();
        // state: 0 unvisited, 1 on current probe, 2 done
        let mut state = vec![0u8; n];
        let mut cycles = Vec::new();
        for start in 0..n {
            if state[start] != 0 {
                continue;
            }
            let mut probe: Vec<VertexId> = Vec::new();
            let mut v = start;
            loop {
                if state[v] == 1 {
                    // closed a new cycle at v
                    let at = probe.iter().position(|&u| u == v).unwrap();
                    let cyc_vertices = &probe[at..];
                    let min_at = cyc_vertices
                        .iter()
                        .enumerate()
                        .min_by_key(|(_, &u)| u)
                        .map(|(i, _)| i)
                        .unwrap();
                    let k = cyc_vertices.len();
                    let mut cyc = Vec::with_capacity(k);
                    for i in 0..k {
                        let u = cyc_vertices[(min_at + i) % k];
                        cyc.push(self.arcs[u].unwrap());
                    }
                    cycles.push(cyc);
                    break;
                }
                if state[v] == 2 {
                    break;
                }
                state[v] = 1;
                probe.push(v);
                match self.arcs[v] {
                    Some(e) => v = g.head(e),
                    None => break, // root
                }
            }
            for &u in &probe {
                state[u] = 2;
            }
        }
        cycles
    }

    /// Per-vertex component id (dense, in discovery order). Root vertices
    /// that carry no arc get their own component.
    pub fn component_ids(&self, g: &WeightedGraph) -> Vec<usize> {
        let n = self.arcs.len();
        let mut comp = vec![usize::MAX; n];
        let mut next_id = 0;
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut probe = vec![start];
            let mut v = start;
            let id = loop {
                match self.arcs[v] {
                    Some(e) => {
                        let w = g.head(e);
                        if comp[w] != usize::MAX {
                            break comp[w];
                        }
                        if probe.contains(&w) {
                            let id = next_id;
                            next_id += 1;
                            break id;
                        }
                        probe.push(w);
                        v = w;
                    }
                    None => {
                        let id = next_id;
                        next_id += 1;
                        break id;
                    }
                }
            };
            for &u in &probe {
                comp[u] = id;
            }
        }
        comp
    }

    /// Reorients every cycle to a canonical direction: the arc leaving the
    /// cycle's smallest vertex points to its smaller-id cycle neighbor
    /// (smaller edge id breaks ties between parallel edges). Used to discard
    /// the orientation when targeting unoriented measures.
    pub fn canonicalize_orientations(&mut self, g: &WeightedGraph) {
        for cyc in self.cycles(g) {
            let first = cyc[0];
            let last = *cyc.last().unwrap();
            let fwd_nbr = g.head(first);
            let bwd_nbr = g.tail(last);
            let flip = match bwd_nbr.cmp(&fwd_nbr) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Greater => false,
                std::cmp::Ordering::Equal => last.edge < first.edge,
            };
            if flip {
                for e in cyc {
                    self.arcs[g.head(e)] = Some(e.rev());
                }
            }
        }
    }
}

/// True iff `s` satisfies the CRSF invariants on `g`: every non-root vertex
/// has exactly one outgoing arc whose tail is that vertex, and no cycle is a
/// doubled edge. Vertices in `roots` must carry no arc; with an empty root
/// set this validates a genuine CRSF (every component then carries a cycle).
///
/// Panics on dangling edge ids; structural violations return `false`.
pub fn validate_crsf(g: &WeightedGraph, s: &OrientedCrsf, roots: &[VertexId]) -> bool {
    let n = g.vertex_count();
    if s.arcs().len() != n {
        return false;
    }
    let mut is_root = vec![false; n];
    for &r in roots {
        is_root[r] = true;
    }
    for v in 0..n {
        match s.arc(v) {
            Some(e) => {
                if is_root[v] || g.tail(e) != v {
                    return false;
                }
            }
            None => {
                if !is_root[v] {
                    return false;
                }
            }
        }
    }
    // doubled-edge "cycles" (an edge traversed both ways) are not cycles
    for cyc in s.cycles(g) {
        if cyc.len() == 2 && cyc[0].edge == cyc[1].edge {
            return false;
        }
    }
    true
}

/// Checks whether an undirected edge subset spans `g` as a CRSF: every
/// component of the subgraph has equal vertex and edge counts.
pub fn is_crsf_edge_set(g: &WeightedGraph, edge_ids: &[EdgeId]) -> bool {
    let n = g.vertex_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &id in edge_ids {
        let d = g.edge(id);
        let (ra, rb) = (find(&mut parent, d.a), find(&mut parent, d.b));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    let mut vcount = vec![0usize; n];
    let mut ecount = vec![0usize; n];
    for v in 0..n {
        let r = find(&mut parent, v);
        vcount[r] += 1;
    }
    for &id in edge_ids {
        let r = find(&mut parent, g.edge(id).a);
        ecount[r] += 1;
    }
    (0..n).all(|v| parent[v] != v || vcount[v] == ecount[v])
}

/// Product of conductances over the edges of the (valid) CRSF.
pub fn crsf_edge_weight(g: &WeightedGraph, s: &OrientedCrsf) -> f64 {
    s.arcs()
        .iter()
        .flatten()
        .map(|&e| g.conductance(e))
        .product()
}
