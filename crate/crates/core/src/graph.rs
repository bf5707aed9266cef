//! Social graphs and the coverage ("notify") function.
//!
//! `h(S) = |⋃_{i∈S} Z_i|` where `Z_i` is the neighbourhood of `i`. A selected
//! node only counts as covered when one of its neighbours is selected; nodes
//! never cover themselves.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense node index, `0..n`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Undirected simple graph in CSR form with a map back to the ids used in
/// the source file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SocialGraph {
    offsets: Vec<usize>,
    adjacency: Vec<NodeId>,
    original_ids: Vec<u64>,
}

impl SocialGraph {
    pub fn empty() -> Self {
        SocialGraph {
            offsets: vec![0],
            adjacency: Vec::new(),
            original_ids: Vec::new(),
        }
    }

    /// Builds a graph on dense ids `0..n`; original ids equal dense ids.
    /// Self-loops are dropped and duplicate edges merged.
    pub fn from_dense_edges(n: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let mut pairs = Vec::new();
        for (u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::domain(format!("edge ({u}, {v}) outside 0..{n}")));
            }
            if u != v {
                pairs.push((u.min(v), u.max(v)));
            }
        }
        Ok(Self::build((0..n as u64).collect(), pairs))
    }

    /// Builds a graph from edges over arbitrary ids, re-indexing densely in
    /// ascending original-id order.
    pub fn from_original_edges(nodes: impl IntoIterator<Item = u64>, edges: &[(u64, u64)]) -> Self {
        let mut ids: BTreeSet<u64> = nodes.into_iter().collect();
        for &(u, v) in edges {
            ids.insert(u);
            ids.insert(v);
        }
        let original_ids: Vec<u64> = ids.into_iter().collect();
        let dense = |x: u64| original_ids.binary_search(&x).expect("id collected above") as u32;
        let pairs = edges
            .iter()
            .filter(|(u, v)| u != v)
            .map(|&(u, v)| {
                let (a, b) = (dense(u), dense(v));
                (a.min(b), a.max(b))
            })
            .collect();
        Self::build(original_ids, pairs)
    }

    fn build(original_ids: Vec<u64>, mut pairs: Vec<(u32, u32)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        let n = original_ids.len();
        let mut degree = vec![0usize; n];
        for &(u, v) in &pairs {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut adjacency = vec![NodeId(0); offsets[n]];
        for &(u, v) in &pairs {
            adjacency[fill[u as usize]] = NodeId(v);
            fill[u as usize] += 1;
            adjacency[fill[v as usize]] = NodeId(u);
            fill[v as usize] += 1;
        }
        for i in 0..n {
            adjacency[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        SocialGraph {
            offsets,
            adjacency,
            original_ids,
        }
    }

    pub fn node_count(&self) -> usize {
        self.original_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.len() / 2
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count() as u32).map(NodeId)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.index() < self.node_count()
    }

    /// `Z_i`, sorted ascending.
    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        &self.adjacency[self.offsets[node.index()]..self.offsets[node.index() + 1]]
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.offsets[node.index() + 1] - self.offsets[node.index()]
    }

    pub fn original_id(&self, node: NodeId) -> u64 {
        self.original_ids[node.index()]
    }

    pub fn dense_id(&self, original: u64) -> Option<NodeId> {
        self.original_ids
            .binary_search(&original)
            .ok()
            .map(|i| NodeId(i as u32))
    }

    pub fn check_node(&self, node: NodeId) -> Result<()> {
        if self.contains(node) {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "unknown node {node} (graph has {} nodes)",
                self.node_count()
            )))
        }
    }

    /// Undirected edges `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes()
            .flat_map(move |u| self.neighbors(u).iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// `j ∈ Z_i ⇔ i ∈ Z_j`, no self-loops, no duplicates.
    pub fn is_symmetric(&self) -> bool {
        self.nodes().all(|u| {
            let nb = self.neighbors(u);
            nb.windows(2).all(|w| w[0] < w[1])
                && nb
                    .iter()
                    .all(|&v| v != u && self.neighbors(v).binary_search(&u).is_ok())
        })
    }

    /// `original_id,dense_id` rows with a header.
    pub fn write_id_map_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "original_id,dense_id")?;
        for (dense, original) in self.original_ids.iter().enumerate() {
            writeln!(out, "{original},{dense}")?;
        }
        Ok(())
    }

    pub fn coverage_oracle(&self) -> CoverageOracle<'_> {
        CoverageOracle { graph: self }
    }
}

/// Reads whitespace-separated `u v` pairs. Blank lines and lines starting
/// with `#` are skipped; extra columns are ignored.
pub fn load_edge_list<R: BufRead>(reader: R) -> Result<SocialGraph> {
    let mut edges = Vec::new();
    let mut nodes = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let mut field = |name: &str| -> Result<u64> {
            let tok = parts.next().ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: format!("missing {name} endpoint"),
            })?;
            tok.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("invalid node id {tok:?}"),
            })
        };
        let u = field("first")?;
        let v = field("second")?;
        nodes.push(u);
        nodes.push(v);
        edges.push((u, v));
    }
    Ok(SocialGraph::from_original_edges(nodes, &edges))
}

/// Read-only view evaluating `h` and marginal notifications.
#[derive(Clone, Copy, Debug)]
pub struct CoverageOracle<'g> {
    graph: &'g SocialGraph,
}

impl<'g> CoverageOracle<'g> {
    pub fn new(graph: &'g SocialGraph) -> Self {
        CoverageOracle { graph }
    }

    pub fn graph(&self) -> &'g SocialGraph {
        self.graph
    }

    /// `h(S)`.
    pub fn coverage(&self, set: &[NodeId]) -> Result<usize> {
        let mut state = self.session();
        for &node in set {
            self.graph.check_node(node)?;
            state.add(node);
        }
        Ok(state.covered_count())
    }

    /// `h(S ∪ {j}) − h(S)`; `j` must not be in `S`.
    pub fn marginal(&self, j: NodeId, set: &[NodeId]) -> Result<usize> {
        self.graph.check_node(j)?;
        if set.contains(&j) {
            return Err(Error::domain(format!("node {j} already in the conditioning set")));
        }
        let mut state = self.session();
        for &node in set {
            self.graph.check_node(node)?;
            state.add(node);
        }
        Ok(state.gain(j))
    }

    /// Fresh incremental covered-set state. Each mechanism run owns its own.
    pub fn session(&self) -> CoverState<'g> {
        CoverState {
            graph: self.graph,
            covered: FixedBitSet::with_capacity(self.graph.node_count()),
            count: 0,
        }
    }
}

/// Covered set of a growing selection.
#[derive(Clone, Debug)]
pub struct CoverState<'g> {
    graph: &'g SocialGraph,
    covered: FixedBitSet,
    count: usize,
}

impl<'g> CoverState<'g> {
    /// Marginal notification of `node` against the current selection.
    pub fn gain(&self, node: NodeId) -> usize {
        self.graph
            .neighbors(node)
            .iter()
            .filter(|v| !self.covered.contains(v.index()))
            .count()
    }

    /// Adds `node`'s neighbourhood and returns how many devices were new.
    pub fn add(&mut self, node: NodeId) -> usize {
        let mut fresh = 0;
        for v in self.graph.neighbors(node) {
            if !self.covered.put(v.index()) {
                fresh += 1;
            }
        }
        self.count += fresh;
        fresh
    }

    pub fn covered_count(&self) -> usize {
        self.count
    }

    pub fn is_covered(&self, node: NodeId) -> bool {
        self.covered.contains(node.index())
    }

    pub fn covered_nodes(&self) -> Vec<NodeId> {
        self.covered.ones().map(|i| NodeId(i as u32)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn ids(v: &[u32]) -> Vec<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    #[test]
    fn loads_path_and_skips_comments() {
        let g = load_edge_list("# c\n0 1\n1 2".as_bytes()).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.neighbors(NodeId(1)), ids(&[0, 2]).as_slice());
    }

    #[test]
    fn deduplicates_symmetric_repeats() {
        let g = load_edge_list("0 1\n1 0\n0 1".as_bytes()).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(g.is_symmetric());
    }

    #[test]
    fn drops_self_loops() {
        let g = load_edge_list("4 4\n4 9\n".as_bytes()).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.coverage_oracle().coverage(&ids(&[0])).unwrap(), 1);
    }

    #[test]
    fn empty_input_is_empty_graph() {
        let g = load_edge_list("".as_bytes()).unwrap();
        assert_eq!(g.node_count(), 0);
        let g = load_edge_list("# only a comment\n\n".as_bytes()).unwrap();
        assert_eq!(g.node_count(), 0);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        match load_edge_list("0 1\n# ok\n2 x\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match load_edge_list("0 1\n7\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sparse_ids_reindexed_in_ascending_order() {
        let g = load_edge_list("100 7\n7 42\n".as_bytes()).unwrap();
        assert_eq!(g.original_id(NodeId(0)), 7);
        assert_eq!(g.original_id(NodeId(1)), 42);
        assert_eq!(g.original_id(NodeId(2)), 100);
        assert_eq!(g.dense_id(42), Some(NodeId(1)));
        assert_eq!(g.dense_id(5), None);
        let mut csv = Vec::new();
        g.write_id_map_csv(&mut csv).unwrap();
        assert_eq!(
            String::from_utf8(csv).unwrap(),
            "original_id,dense_id\n7,0\n42,1\n100,2\n"
        );
    }

    #[test]
    fn ex6_coverage_matches_worked_example() {
        let g = fixtures::ex6_graph();
        let h = g.coverage_oracle();
        let n = |i: u64| g.dense_id(i).unwrap();
        assert_eq!(h.coverage(&[]).unwrap(), 0);
        assert_eq!(h.coverage(&[n(1)]).unwrap(), 4);
        assert_eq!(h.coverage(&[n(1), n(6)]).unwrap(), 6);
        assert_eq!(h.marginal(n(3), &[n(1)]).unwrap(), 0);
        assert_eq!(h.marginal(n(6), &[n(1)]).unwrap(), 2);
    }

    #[test]
    fn oracle_domain_errors() {
        let g = fixtures::ex6_graph();
        let h = g.coverage_oracle();
        assert!(matches!(h.coverage(&[NodeId(6)]), Err(Error::Domain(_))));
        assert!(matches!(h.marginal(NodeId(0), &[NodeId(0)]), Err(Error::Domain(_))));
        assert!(matches!(h.marginal(NodeId(9), &[]), Err(Error::Domain(_))));
    }

    #[test]
    fn saturated_node_has_zero_marginal() {
        // Z_1 = {0} is already covered by Z_2 = {0, 3}
        let g = SocialGraph::from_dense_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4), (2, 3)]).unwrap();
        let h = g.coverage_oracle();
        assert_eq!(h.marginal(NodeId(1), &[NodeId(2)]).unwrap(), 0);
    }
}
