use std::collections::BTreeSet;

use crate::model::{InfluenceDiagram, VarId, VarKind};

use super::TreeDecomposition;

/// Graphs up to this many vertices get an exact elimination ordering.
pub const EXACT_ORDER_LIMIT: usize = 10;

/// Moral graph over the chance and decision variables: every family is a
/// clique, and so is every value variable's parent set.
#[derive(Clone, Debug)]
pub struct MoralGraph {
    pub vertices: Vec<VarId>,
    pub adjacency: Vec<BTreeSet<usize>>,
}

pub fn moral_graph(d: &InfluenceDiagram) -> MoralGraph {
    let vertices = d.state_vars();
    let local = |v: VarId| vertices.binary_search(&v).expect("state variable");
    let mut adjacency = vec![BTreeSet::new(); vertices.len()];
    for x in d.ids() {
        let clique = match d.kind(x) {
            VarKind::Value => d.parents(x),
            _ => d.family(x),
        };
        for &a in &clique {
            for &b in &clique {
                if a != b {
                    adjacency[local(a)].insert(local(b));
                }
            }
        }
    }
    MoralGraph { vertices, adjacency }
}

/// Width of the decomposition induced by eliminating in `order`.
pub fn elimination_width(g: &MoralGraph, order: &[usize]) -> usize {
    let mut adj = g.adjacency.clone();
    let mut width = 0;
    for &v in order {
        let nbrs: Vec<usize> = adj[v].iter().copied().collect();
        width = width.max(nbrs.len());
        eliminate(&mut adj, v, &nbrs);
    }
    width
}

fn eliminate(adj: &mut [BTreeSet<usize>], v: usize, nbrs: &[usize]) {
    for &a in nbrs {
        adj[a].remove(&v);
        for &b in nbrs {
            if a != b {
                adj[a].insert(b);
            }
        }
    }
    adj[v].clear();
}

fn fill_in(adj: &[BTreeSet<usize>], v: usize) -> usize {
    let nbrs: Vec<usize> = adj[v].iter().copied().collect();
    let mut missing = 0;
    for (i, &a) in nbrs.iter().enumerate() {
        for &b in &nbrs[i + 1..] {
            if !adj[a].contains(&b) {
                missing += 1;
            }
        }
    }
    missing
}

/// Greedy min-fill ordering; ties go to the smaller degree, then the smaller index.
pub fn min_fill_order(g: &MoralGraph) -> Vec<usize> {
    let n = g.vertices.len();
    let mut adj = g.adjacency.clone();
    let mut alive: BTreeSet<usize> = (0..n).collect();
    let mut order = Vec::with_capacity(n);
    while !alive.is_empty() {
        let v = *alive
            .iter()
            .min_by_key(|&&v| (fill_in(&adj, v), adj[v].len(), v))
            .expect("non-empty");
        let nbrs: Vec<usize> = adj[v].iter().copied().collect();
        eliminate(&mut adj, v, &nbrs);
        alive.remove(&v);
        order.push(v);
    }
    order
}

/// Optimal elimination ordering by dynamic programming over vertex subsets.
/// Exponential in the number of vertices; meant for small graphs.
pub fn exact_elimination_order(g: &MoralGraph) -> Vec<usize> {
    let n = g.vertices.len();
    assert!(n <= 20, "exact ordering is limited to 20 vertices");
    let full = (1usize << n) - 1;
    let nbr_mask: Vec<usize> = g.adjacency.iter().map(|s| s.iter().fold(0, |m, &b| m | (1 << b))).collect();

    // Vertices outside `set ∪ {v}` reachable from v through `set`.
    let q = |set: usize, v: usize| -> usize {
        let mut inside = 1usize << v;
        let mut frontier = nbr_mask[v];
        let mut outside = 0usize;
        while frontier != 0 {
            let w = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            if inside & (1 << w) != 0 {
                continue;
            }
            inside |= 1 << w;
            if set & (1 << w) != 0 {
                frontier |= nbr_mask[w] & !inside;
            } else {
                outside |= 1 << w;
            }
        }
        outside.count_ones() as usize
    };

    let mut best = vec![usize::MAX; full + 1];
    let mut last = vec![usize::MAX; full + 1];
    best[0] = 0;
    for set in 1..=full {
        let mut bits = set;
        while bits != 0 {
            let v = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let rest = set & !(1 << v);
            let cost = best[rest].max(q(rest, v));
            if cost < best[set] {
                best[set] = cost;
                last[set] = v;
            }
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut set = full;
    while set != 0 {
        let v = last[set];
        order.push(v);
        set &= !(1 << v);
    }
    order.reverse();
    order
}

/// Tree decomposition from an elimination ordering, with clusters that are
/// contained in a neighbor merged away.
fn decomposition_from_order(g: &MoralGraph, order: &[usize]) -> TreeDecomposition {
    let n = g.vertices.len();
    if n == 0 {
        return TreeDecomposition::new(vec![vec![]], vec![]);
    }
    let mut pos = vec![0; n];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    let mut adj = g.adjacency.clone();
    let mut clusters: Vec<BTreeSet<usize>> = Vec::with_capacity(n);
    let mut parent: Vec<Option<usize>> = Vec::with_capacity(n);
    for &v in order {
        let nbrs: Vec<usize> = adj[v].iter().copied().collect();
        let mut c: BTreeSet<usize> = nbrs.iter().copied().collect();
        c.insert(v);
        clusters.push(c);
        parent.push(nbrs.iter().map(|&u| pos[u]).min());
        eliminate(&mut adj, v, &nbrs);
    }

    let mut tree: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut roots = Vec::new();
    for (k, p) in parent.iter().enumerate() {
        match *p {
            Some(p) => {
                tree[k].insert(p);
                tree[p].insert(k);
            }
            None => roots.push(k),
        }
    }
    for w in roots.windows(2) {
        tree[w[0]].insert(w[1]);
        tree[w[1]].insert(w[0]);
    }

    let mut alive = vec![true; n];
    loop {
        let mut merged = false;
        for a in 0..n {
            if !alive[a] {
                continue;
            }
            let target = tree[a].iter().copied().find(|&b| clusters[a].is_subset(&clusters[b]));
            if let Some(b) = target {
                let nbrs: Vec<usize> = tree[a].iter().copied().filter(|&x| x != b).collect();
                for x in nbrs {
                    tree[x].remove(&a);
                    tree[x].insert(b);
                    tree[b].insert(x);
                }
                tree[b].remove(&a);
                tree[a].clear();
                alive[a] = false;
                merged = true;
            }
        }
        if !merged {
            break;
        }
    }

    let kept: Vec<usize> = (0..n).filter(|&k| alive[k]).collect();
    let mut renumber = vec![usize::MAX; n];
    for (new, &old) in kept.iter().enumerate() {
        renumber[old] = new;
    }
    let out_clusters = kept.iter().map(|&k| clusters[k].iter().map(|&v| g.vertices[v]).collect()).collect();
    let mut edges = Vec::new();
    for &a in &kept {
        for &b in &tree[a] {
            if a < b {
                edges.push((renumber[a], renumber[b]));
            }
        }
    }
    edges.sort_unstable();
    TreeDecomposition::new(out_clusters, edges)
}

/// A valid (unrooted) decomposition of the moral graph. Small graphs get an
/// optimal ordering, larger ones the min-fill heuristic.
pub fn build_decomposition(d: &InfluenceDiagram) -> TreeDecomposition {
    let g = moral_graph(d);
    let order = if g.vertices.len() <= EXACT_ORDER_LIMIT {
        exact_elimination_order(&g)
    } else {
        min_fill_order(&g)
    };
    decomposition_from_order(&g, &order)
}
