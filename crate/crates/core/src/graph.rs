//! Road-network style instance graphs and their conversion to sparse cost
//! matrices.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{parse_err, parse_field, strip_comment, SparseCostMatrix};
use crate::rng::seeded;

/// A demand marker: node index and its load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Demand {
    pub node: usize,
    pub load: f64,
}

/// Undirected weighted graph with demand and candidate markers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InstanceGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    coords: Vec<Option<[f64; 2]>>,
    adjacency: Vec<Vec<(usize, f64)>>,
    n_edges: usize,
    demands: Vec<Demand>,
    candidates: Vec<usize>,
}

impl InstanceGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a node; re-adding an existing name updates its coordinates.
    pub fn add_node(&mut self, name: &str, coord: Option<[f64; 2]>) -> usize {
        if let Some(&i) = self.index.get(name) {
            if coord.is_some() {
                self.coords[i] = coord;
            }
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        self.coords.push(coord);
        self.adjacency.push(Vec::new());
        i
    }

    pub fn add_edge(&mut self, a: usize, b: usize, length: f64) -> Result<()> {
        self.check_node(a)?;
        self.check_node(b)?;
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "edge length must be finite and positive, got {length}"
            )));
        }
        if a == b {
            return Err(Error::InvalidArgument(format!("self loop at node {}", self.names[a])));
        }
        self.adjacency[a].push((b, length));
        self.adjacency[b].push((a, length));
        self.n_edges += 1;
        Ok(())
    }

    pub fn add_demand(&mut self, node: usize, load: f64) -> Result<()> {
        self.check_node(node)?;
        if !(load.is_finite() && load > 0.0) {
            return Err(Error::InvalidArgument(format!("load must be positive, got {load}")));
        }
        self.demands.push(Demand { node, load });
        Ok(())
    }

    pub fn add_candidate(&mut self, node: usize) -> Result<()> {
        self.check_node(node)?;
        if !self.candidates.contains(&node) {
            self.candidates.push(node);
        }
        Ok(())
    }

    fn check_node(&self, i: usize) -> Result<()> {
        if i >= self.names.len() {
            return Err(Error::InvalidArgument(format!("unknown node index {i}")));
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn node_name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn coord(&self, i: usize) -> Option<[f64; 2]> {
        self.coords[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    /// Demand markers in insertion order; index `i` here is demand `i` of any
    /// matrix built from this graph.
    pub fn demands(&self) -> &[Demand] {
        &self.demands
    }

    /// Explicit candidate markers, in insertion order.
    pub fn candidate_markers(&self) -> &[usize] {
        &self.candidates
    }

    /// Component label per node.
    pub fn components(&self) -> Vec<usize> {
        let n = self.n_nodes();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Shortest-path distances from `source`, expanding only up to `bound`.
    /// Unreached nodes stay at infinity.
    pub fn shortest_paths(&self, source: usize, bound: f64) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.n_nodes()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Entry { d: 0.0, node: source });
        while let Some(Entry { d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for &(v, w) in &self.adjacency[node] {
                let nd = d + w;
                if nd <= bound && nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Entry { d: nd, node: v });
                }
            }
        }
        dist
    }

    /// Parse the line-based graph format:
    /// `node <id> [x y]`, `edge <id1> <id2> <length>`, `demand <id> <load>`,
    /// `candidate <id>`. Nodes must be declared before they are referenced.
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut g = InstanceGraph::new();
        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line?;
            let line = strip_comment(&line);
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let node = |g: &InstanceGraph, name: &str| {
                g.node_index(name)
                    .ok_or_else(|| parse_err(lineno, &format!("unknown node {name:?}")))
            };
            let wrap = |e: Error| match e {
                Error::InvalidArgument(msg) => parse_err(lineno, &msg),
                e => e,
            };
            match (f[0], f.len()) {
                ("node", 2) => {
                    g.add_node(f[1], None);
                }
                ("node", 4) => {
                    let c = [parse_field(f[2], lineno)?, parse_field(f[3], lineno)?];
                    g.add_node(f[1], Some(c));
                }
                ("edge", 4) => {
                    let a = node(&g, f[1])?;
                    let b = node(&g, f[2])?;
                    g.add_edge(a, b, parse_field(f[3], lineno)?).map_err(wrap)?;
                }
                ("demand", 3) => {
                    let a = node(&g, f[1])?;
                    g.add_demand(a, parse_field(f[2], lineno)?).map_err(wrap)?;
                }
                ("candidate", 2) => {
                    let a = node(&g, f[1])?;
                    g.add_candidate(a)?;
                }
                _ => return Err(parse_err(lineno, &format!("unrecognized line {line:?}"))),
            }
        }
        Ok(g)
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, name) in self.names.iter().enumerate() {
            match self.coords[i] {
                Some([x, y]) => writeln!(out, "node {name} {x} {y}")?,
                None => writeln!(out, "node {name}")?,
            }
        }
        for (a, adj) in self.adjacency.iter().enumerate() {
            for &(b, w) in adj {
                if a < b {
                    writeln!(out, "edge {} {} {}", self.names[a], self.names[b], w)?;
                }
            }
        }
        for d in &self.demands {
            writeln!(out, "demand {} {}", self.names[d.node], d.load)?;
        }
        for &c in &self.candidates {
            writeln!(out, "candidate {}", self.names[c])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    d: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance
        other.d.total_cmp(&self.d).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Nodes of degree at least `min_degree`. A connected component that holds a
/// demand but no such node contributes its highest-degree node (lowest index
/// on ties) so that it is not left without candidates. Sorted by index.
pub fn select_candidates(graph: &InstanceGraph, min_degree: usize) -> Vec<usize> {
    let label = graph.components();
    let n_comp = label.iter().copied().max().map_or(0, |c| c + 1);
    let mut has_candidate = vec![false; n_comp];
    let mut has_demand = vec![false; n_comp];
    let mut best: Vec<Option<usize>> = vec![None; n_comp];
    let mut selected = Vec::new();
    for (v, &c) in label.iter().enumerate() {
        if graph.degree(v) >= min_degree {
            selected.push(v);
            has_candidate[c] = true;
        }
        if best[c].is_none_or(|b| graph.degree(v) > graph.degree(b)) {
            best[c] = Some(v);
        }
    }
    for d in graph.demands() {
        has_demand[label[d.node]] = true;
    }
    for c in 0..n_comp {
        if has_demand[c] && !has_candidate[c] {
            selected.push(best[c].expect("component has a node"));
        }
    }
    selected.sort_unstable();
    selected
}

/// Candidates to use for a graph: its explicit markers if it has any,
/// otherwise [`select_candidates`].
pub fn default_candidates(graph: &InstanceGraph, min_degree: usize) -> Vec<usize> {
    if graph.candidate_markers().is_empty() {
        select_candidates(graph, min_degree)
    } else {
        graph.candidate_markers().to_vec()
    }
}

/// Sparse cost matrix of shortest-path distances between the graph's demands
/// (rows, in marker order) and `candidates` (columns, in the given order).
/// Pairs farther apart than `max_cost` are left out; a distance of exactly
/// `max_cost` is kept. With `load_weighted` each cost is multiplied by the
/// demand's load.
pub fn truncated_costs(
    graph: &InstanceGraph,
    candidates: &[usize],
    max_cost: f64,
    load_weighted: bool,
) -> Result<SparseCostMatrix> {
    if max_cost.is_nan() || max_cost <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "max_cost must be positive, got {max_cost}"
        )));
    }
    for &c in candidates {
        graph.check_node(c)?;
    }
    let demands = graph.demands();
    // a node may carry several demand markers
    let mut demands_at: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, d) in demands.iter().enumerate() {
        demands_at.entry(d.node).or_default().push(i);
    }
    let per_candidate: Vec<Vec<(usize, usize, f64)>> = candidates
        .par_iter()
        .enumerate()
        .map(|(j, &source)| {
            let dist = graph.shortest_paths(source, max_cost);
            let mut out = Vec::new();
            for (&node, idx) in &demands_at {
                let sp = dist[node];
                if sp <= max_cost {
                    for &o in idx {
                        let w = if load_weighted { demands[o].load * sp } else { sp };
                        out.push((o, j, w));
                    }
                }
            }
            out
        })
        .collect();
    SparseCostMatrix::new(
        demands.len(),
        candidates.len(),
        per_candidate.into_iter().flatten(),
        None,
    )
}

/// Grid spacing of [`synth_grid`] in cost units.
pub const GRID_SPACING: f64 = 100.0;

/// Synthetic street grid: a `width x height` lattice with jittered node
/// positions, edge lengths equal to the Euclidean distance of their end
/// points, and some edges pruned. A random spanning tree is never pruned and
/// no pruning leaves a node with fewer than two edges, so the grid stays
/// connected without dead ends. Each node is a demand with probability
/// `demand_density`, carrying a log-normal load.
pub fn synth_grid(width: usize, height: usize, demand_density: f64, seed: u64) -> Result<InstanceGraph> {
    const JITTER: f64 = 0.2 * GRID_SPACING;
    const PRUNE: f64 = 0.25;
    if width < 2 || height < 2 {
        return Err(Error::InvalidArgument("grid needs width, height >= 2".into()));
    }
    if !(0.0..=1.0).contains(&demand_density) {
        return Err(Error::InvalidArgument("demand density must be in [0, 1]".into()));
    }
    let mut rng = seeded(seed, 0);
    let mut g = InstanceGraph::new();
    for y in 0..height {
        for x in 0..width {
            let px = x as f64 * GRID_SPACING + rng.random_range(-JITTER..=JITTER);
            let py = y as f64 * GRID_SPACING + rng.random_range(-JITTER..=JITTER);
            g.add_node(&(y * width + x).to_string(), Some([px, py]));
        }
    }
    let mut lattice = Vec::new();
    for y in 0..height {
        for x in 0..width {
            let v = y * width + x;
            if x + 1 < width {
                lattice.push((v, v + 1));
            }
            if y + 1 < height {
                lattice.push((v, v + width));
            }
        }
    }
    lattice.shuffle(&mut rng);
    let n = width * height;
    let mut uf = UnionFind::new(n);
    let mut in_tree = vec![false; lattice.len()];
    for (e, &(a, b)) in lattice.iter().enumerate() {
        in_tree[e] = uf.union(a, b);
    }
    let mut degree = vec![0usize; n];
    for &(a, b) in &lattice {
        degree[a] += 1;
        degree[b] += 1;
    }
    let mut keep = vec![true; lattice.len()];
    for (e, &(a, b)) in lattice.iter().enumerate() {
        if !in_tree[e] && degree[a] > 2 && degree[b] > 2 && rng.random_bool(PRUNE) {
            keep[e] = false;
            degree[a] -= 1;
            degree[b] -= 1;
        }
    }
    let mut kept: Vec<(usize, usize)> = lattice.iter().zip(&keep).filter(|(_, &k)| k).map(|(&e, _)| e).collect();
    kept.sort_unstable();
    for (a, b) in kept {
        let (pa, pb) = (g.coords[a].unwrap(), g.coords[b].unwrap());
        let len = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
        g.add_edge(a, b, len)?;
    }
    let loads = LogNormal::new(0.0, 0.5).expect("valid log-normal parameters");
    for v in 0..n {
        if rng.random_bool(demand_density) {
            g.add_demand(v, loads.sample(&mut rng))?;
        }
    }
    Ok(g)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(text: &str) -> InstanceGraph {
        InstanceGraph::read_text(text.as_bytes()).unwrap()
    }

    #[test]
    fn path_graph_falls_back_to_middle() {
        let g = graph("node a\nnode b\nnode c\nedge a b 1\nedge b c 1\ndemand a 1\n");
        assert_eq!(select_candidates(&g, 3), vec![g.node_index("b").unwrap()]);
    }

    #[test]
    fn star_selects_hub() {
        let g = graph(
            "node h\nnode a\nnode b\nnode c\nnode d\nedge h a 1\nedge h b 1\nedge h c 1\nedge h d 1\ndemand a 1\n",
        );
        assert_eq!(select_candidates(&g, 3), vec![0]);
    }

    #[test]
    fn component_without_demand_gets_no_fallback() {
        let g = graph("node a\nnode b\nnode c\nnode d\nedge a b 1\nedge c d 1\ndemand a 1\n");
        assert_eq!(select_candidates(&g, 3), vec![0]);
    }

    #[test]
    fn boundary_cost_is_inclusive() {
        let g = graph("node j\nnode o\nedge j o 5\ndemand o 2\n");
        let m = truncated_costs(&g, &[0], 5.0, false).unwrap();
        assert_eq!(m.entries().collect::<Vec<_>>(), vec![(0, 0, 5.0)]);
        let m = truncated_costs(&g, &[0], 4.99, false).unwrap();
        assert_eq!(m.nnz(), 0);
        let m = truncated_costs(&g, &[0], 5.0, true).unwrap();
        assert_eq!(m.cost(0, 0), Some(10.0));
        assert!(truncated_costs(&g, &[0], 0.0, false).is_err());
        assert!(truncated_costs(&g, &[0], -1.0, false).is_err());
    }

    #[test]
    fn demand_on_candidate_node_costs_zero() {
        let g = graph("node j\nnode o\nedge j o 5\ndemand j 1\ncandidate j\n");
        let m = truncated_costs(&g, g.candidate_markers(), 1.0, false).unwrap();
        assert_eq!(m.cost(0, 0), Some(0.0));
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "edge a b 1\n",
            "node a\nnode b\nedge a b -1\n",
            "node a\nnode b\nedge a b x\n",
            "node a\ndemand a 0\n",
            "node a\nfoo a\n",
            "node a\nedge a a 1\n",
        ] {
            assert!(
                matches!(InstanceGraph::read_text(bad.as_bytes()), Err(Error::Parse { .. })),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn text_round_trip() {
        let g = synth_grid(4, 3, 0.5, 1).unwrap();
        let mut buf = Vec::new();
        g.write_text(&mut buf).unwrap();
        let back = InstanceGraph::read_text(buf.as_slice()).unwrap();
        assert_eq!(back.n_nodes(), g.n_nodes());
        assert_eq!(back.n_edges(), g.n_edges());
        assert_eq!(back.demands(), g.demands());
        for v in 0..g.n_nodes() {
            let mut a = g.neighbors(v).to_vec();
            let mut b = back.neighbors(v).to_vec();
            a.sort_by_key(|x| x.0);
            b.sort_by_key(|x| x.0);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn smallest_grid() {
        let g = synth_grid(2, 2, 1.0, 42).unwrap();
        assert_eq!(g.n_nodes(), 4);
        assert_eq!(g.n_edges(), 4);
        assert_eq!(g.demands().len(), 4);
        assert!(synth_grid(1, 5, 0.5, 0).is_err());
        assert!(synth_grid(3, 3, 1.5, 0).is_err());
    }

    #[test]
    fn grid_is_deterministic_and_connected() {
        for seed in 0..10 {
            let a = synth_grid(12, 9, 0.4, seed).unwrap();
            let b = synth_grid(12, 9, 0.4, seed).unwrap();
            assert_eq!(a, b);
            assert!(a.components().iter().all(|&c| c == 0));
            assert!((0..a.n_nodes()).all(|v| a.degree(v) >= 2));
            assert!(a.n_edges() < 12 * 8 + 11 * 9);
        }
        assert_ne!(synth_grid(6, 6, 0.5, 1).unwrap(), synth_grid(6, 6, 0.5, 2).unwrap());
    }
}
