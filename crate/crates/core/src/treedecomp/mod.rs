//! Tree decompositions of influence diagrams.
//!
//! Clusters hold chance and decision variables only. A value variable is
//! covered when some cluster contains its parent set.

mod build;
mod transform;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::error::{Error, Result};
use crate::model::{InfluenceDiagram, VarId, VarKind};

pub use build::{build_decomposition, elimination_width, exact_elimination_order, min_fill_order, moral_graph, MoralGraph};
pub use transform::{binarize, default_root, ensure_value_leaves, root_and_order};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeDecomposition {
    clusters: Vec<Vec<VarId>>,
    edges: Vec<(usize, usize)>,
    root: Option<usize>,
    value_leaves: BTreeMap<VarId, usize>,
}

impl TreeDecomposition {
    /// Clusters are sorted and deduplicated; edges are kept as given. Nothing
    /// is validated.
    pub fn new(clusters: Vec<Vec<VarId>>, edges: Vec<(usize, usize)>) -> Self {
        let clusters = clusters
            .into_iter()
            .map(|mut c| {
                c.sort_unstable();
                c.dedup();
                c
            })
            .collect();
        TreeDecomposition { clusters, edges, root: None, value_leaves: BTreeMap::new() }
    }

    pub fn with_root(mut self, root: Option<usize>) -> Self {
        self.root = root;
        self
    }

    pub fn with_value_leaves(mut self, leaves: BTreeMap<VarId, usize>) -> Self {
        self.value_leaves = leaves;
        self
    }

    pub fn num_nodes(&self) -> usize {
        self.clusters.len()
    }

    pub fn clusters(&self) -> &[Vec<VarId>] {
        &self.clusters
    }

    pub fn cluster(&self, node: usize) -> &[VarId] {
        &self.clusters[node]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn root(&self) -> Option<usize> {
        self.root
    }

    pub fn value_leaves(&self) -> &BTreeMap<VarId, usize> {
        &self.value_leaves
    }

    /// Largest cluster size minus one (0 for a tree of empty clusters).
    pub fn width(&self) -> usize {
        self.clusters.iter().map(Vec::len).max().unwrap_or(0).saturating_sub(1)
    }

    /// Neighbors of every node, in edge-list order.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.clusters.len()];
        for &(a, b) in &self.edges {
            if a < adj.len() && b < adj.len() {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        adj
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == node || b == node).count()
    }

    pub fn is_binary(&self) -> bool {
        self.adjacency().iter().all(|n| n.len() <= 3)
    }

    pub fn covers(&self, node: usize, vars: &[VarId]) -> bool {
        vars.iter().all(|v| self.clusters[node].binary_search(v).is_ok())
    }

    /// Smallest node whose cluster contains `vars`.
    pub fn covering_node(&self, vars: &[VarId]) -> Option<usize> {
        (0..self.num_nodes()).find(|&i| self.covers(i, vars))
    }

    /// Parent of each node under the current root; the root maps to `None`.
    pub fn parents(&self) -> Option<Vec<Option<usize>>> {
        let root = self.root?;
        let adj = self.adjacency();
        let mut parent = vec![None; self.num_nodes()];
        let mut seen = vec![false; self.num_nodes()];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    parent[j] = Some(i);
                    queue.push_back(j);
                }
            }
        }
        Some(parent)
    }

    /// Children of each node, left to right in edge-list order.
    pub fn children(&self) -> Option<Vec<Vec<usize>>> {
        let parent = self.parents()?;
        let adj = self.adjacency();
        Some(
            (0..self.num_nodes())
                .map(|i| adj[i].iter().copied().filter(|&j| parent[j] == Some(i)).collect())
                .collect(),
        )
    }

    /// Nodes with every child before its parent.
    pub fn postorder(&self) -> Option<Vec<usize>> {
        let children = self.children()?;
        let mut out = Vec::with_capacity(self.num_nodes());
        let mut stack = vec![(self.root?, false)];
        while let Some((i, expanded)) = stack.pop() {
            if expanded {
                out.push(i);
            } else {
                stack.push((i, true));
                stack.extend(children[i].iter().rev().map(|&c| (c, false)));
            }
        }
        Some(out)
    }

    /// Euler tour from the root: each node is listed on arrival and again
    /// after returning from each child, `2m - 1` entries in total.
    pub fn euler_tour(&self) -> Option<Vec<usize>> {
        let children = self.children()?;
        let mut out = Vec::with_capacity(2 * self.num_nodes());
        fn walk(i: usize, children: &[Vec<usize>], out: &mut Vec<usize>) {
            out.push(i);
            for &c in &children[i] {
                walk(c, children, out);
                out.push(i);
            }
        }
        walk(self.root?, &children, &mut out);
        Some(out)
    }

    /// Childless nodes in depth-first (left to right) order.
    pub fn leaves_in_order(&self) -> Option<Vec<usize>> {
        let children = self.children()?;
        let tour = self.euler_tour()?;
        let mut seen = BTreeSet::new();
        Some(tour.into_iter().filter(|&i| children[i].is_empty() && seen.insert(i)).collect())
    }

    pub(crate) fn clusters_mut(&mut self) -> &mut Vec<Vec<VarId>> {
        &mut self.clusters
    }

    pub(crate) fn edges_mut(&mut self) -> &mut Vec<(usize, usize)> {
        &mut self.edges
    }

    pub(crate) fn value_leaves_mut(&mut self) -> &mut BTreeMap<VarId, usize> {
        &mut self.value_leaves
    }

    pub(crate) fn check_node(&self, node: usize) -> Result<()> {
        if node < self.num_nodes() {
            Ok(())
        } else {
            Err(Error::UnknownNode(node))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecompositionViolation {
    #[error("decomposition has no nodes")]
    Empty,
    #[error("edge ({0}, {1}) refers to a missing node or is a loop")]
    BadEdge(usize, usize),
    #[error("not a tree: {nodes} nodes, {edges} edges, connected = {connected}")]
    NotATree { nodes: usize, edges: usize, connected: bool },
    #[error("node {0} contains {1}, which is not a chance or decision variable")]
    ForeignVariable(usize, String),
    #[error("family not covered: {0}")]
    FamilyNotCovered(String),
    #[error("running intersection violated for {0}")]
    RunningIntersection(String),
    #[error("root {0} is not a node")]
    BadRoot(usize),
    #[error("value leaf for {0} at node {1} is not a leaf with cluster Pa({0})")]
    BadValueLeaf(String, usize),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecompositionReport {
    pub violations: Vec<DecompositionViolation>,
}

impl DecompositionReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for DecompositionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks tree-ness, family preservation and running intersection, plus the
/// root and value-leaf annotations when present.
pub fn validate_decomposition(d: &InfluenceDiagram, t: &TreeDecomposition) -> DecompositionReport {
    use DecompositionViolation as V;
    let mut out = Vec::new();
    let m = t.num_nodes();
    if m == 0 {
        return DecompositionReport { violations: vec![V::Empty] };
    }

    let mut edges_ok = true;
    for &(a, b) in t.edges() {
        if a >= m || b >= m || a == b {
            out.push(V::BadEdge(a, b));
            edges_ok = false;
        }
    }
    let adj = t.adjacency();
    let connected = edges_ok && component_size(&adj, 0, |_| true) == m;
    if !edges_ok || t.edges().len() != m - 1 || !connected {
        out.push(V::NotATree { nodes: m, edges: t.edges().len(), connected });
    }

    for (i, cluster) in t.clusters().iter().enumerate() {
        for &v in cluster {
            if v.0 >= d.num_variables() || d.kind(v) == VarKind::Value {
                let name = if v.0 < d.num_variables() { d.name(v).to_owned() } else { v.to_string() };
                out.push(V::ForeignVariable(i, name));
            }
        }
    }

    for x in d.ids() {
        let needed = match d.kind(x) {
            VarKind::Value => d.parents(x),
            _ => d.family(x),
        };
        if t.covering_node(&needed).is_none() {
            out.push(V::FamilyNotCovered(d.name(x).to_owned()));
        }
    }

    if edges_ok {
        for x in d.state_vars() {
            let holders: Vec<usize> = (0..m).filter(|&i| t.cluster(i).binary_search(&x).is_ok()).collect();
            if let Some(&start) = holders.first() {
                let reached = component_size(&adj, start, |i| t.cluster(i).binary_search(&x).is_ok());
                if reached != holders.len() {
                    out.push(V::RunningIntersection(d.name(x).to_owned()));
                }
            }
        }
    }

    if let Some(r) = t.root() {
        if r >= m {
            out.push(V::BadRoot(r));
        }
    }
    for (&v, &leaf) in t.value_leaves() {
        let ok = v.0 < d.num_variables()
            && leaf < m
            && adj[leaf].len() <= 1
            && t.cluster(leaf) == d.parents(v).as_slice();
        if !ok {
            let name = if v.0 < d.num_variables() { d.name(v).to_owned() } else { v.to_string() };
            out.push(V::BadValueLeaf(name, leaf));
        }
    }

    DecompositionReport { violations: out }
}

/// Nodes reachable from `start` through nodes satisfying `keep`.
fn component_size(adj: &[Vec<usize>], start: usize, keep: impl Fn(usize) -> bool) -> usize {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 0;
    while let Some(i) = stack.pop() {
        count += 1;
        for &j in &adj[i] {
            if !seen[j] && keep(j) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    count
}
