use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::InfluenceDiagram;

use super::TreeDecomposition;

/// Splits every node with more than three neighbors into a chain of copies
/// of its cluster. Already-binary trees come back unchanged.
pub fn binarize(t: &TreeDecomposition) -> TreeDecomposition {
    let mut out = t.clone();
    let adj = t.adjacency();
    for (i, nbrs) in adj.iter().enumerate() {
        if nbrs.len() <= 3 {
            continue;
        }
        let cluster = t.cluster(i).to_vec();
        let mut current = i;
        let mut remaining = &nbrs[2..];
        while remaining.len() > 1 {
            let copy = out.num_nodes();
            out.clusters_mut().push(cluster.clone());
            out.edges_mut().push((current, copy));
            rewire(&mut out, i, remaining[0], copy);
            current = copy;
            remaining = &remaining[1..];
        }
        if let Some(&last) = remaining.first() {
            rewire(&mut out, i, last, current);
        }
    }
    out
}

/// Replaces the edge `from - nb` by `to - nb`.
fn rewire(t: &mut TreeDecomposition, from: usize, nb: usize, to: usize) {
    if from == to {
        return;
    }
    for e in t.edges_mut().iter_mut() {
        if *e == (from, nb) {
            *e = (to, nb);
            return;
        }
        if *e == (nb, from) {
            *e = (nb, to);
            return;
        }
    }
}

/// Gives every value variable `V` its own leaf whose cluster is exactly
/// `Pa(V)`, keeping the tree binary and the width unchanged.
///
/// A node `i` covering `Pa(V)` receives a new leaf child `k`. When `i`
/// already has three neighbors, a copy `j` of `i` takes over all of them but
/// one (the parent, when rooted) first.
pub fn ensure_value_leaves(d: &InfluenceDiagram, t: &TreeDecomposition) -> Result<TreeDecomposition> {
    let mut out = t.clone();
    let parents_of_root = t.parents();
    let mut used: BTreeSet<usize> = BTreeSet::new();
    out.value_leaves_mut().clear();

    for v in d.value_vars() {
        let pa = d.parents(v);
        let adj = out.adjacency();
        let existing = (0..out.num_nodes())
            .find(|&i| adj[i].len() <= 1 && !used.contains(&i) && out.cluster(i) == pa.as_slice() && Some(i) != out.root());
        if let Some(leaf) = existing {
            used.insert(leaf);
            out.value_leaves_mut().insert(v, leaf);
            continue;
        }

        let covering: Vec<usize> = (0..out.num_nodes()).filter(|&i| out.covers(i, &pa)).collect();
        if covering.is_empty() {
            return Err(Error::FamilyNotCovered(v));
        }
        let free = covering.iter().copied().filter(|i| !used.contains(i));
        let attach = match free.clone().find(|&i| adj[i].len() <= 2) {
            Some(i) => i,
            None => match free.clone().next() {
                Some(i) => split(&mut out, i, parents_of_root.as_ref().and_then(|p| p.get(i).copied().flatten())),
                None => {
                    // only value leaves cover Pa(V): slide a copy of one in above it
                    let leaf = covering[0];
                    let copy = out.num_nodes();
                    let cl = out.cluster(leaf).to_vec();
                    out.clusters_mut().push(cl);
                    match adj[leaf].first() {
                        Some(&nb) => {
                            rewire(&mut out, leaf, nb, copy);
                            out.edges_mut().push((copy, leaf));
                        }
                        None => out.edges_mut().push((leaf, copy)),
                    }
                    copy
                }
            },
        };
        let leaf = out.num_nodes();
        out.clusters_mut().push(pa);
        out.edges_mut().push((attach, leaf));
        used.insert(leaf);
        out.value_leaves_mut().insert(v, leaf);
    }
    Ok(out)
}

/// Moves all neighbors of `i` except `keep` (or its first neighbor) to a new
/// copy of `i`, returning `i` with one free slot.
fn split(t: &mut TreeDecomposition, i: usize, keep: Option<usize>) -> usize {
    let nbrs = t.adjacency()[i].clone();
    let keep = keep.filter(|k| nbrs.contains(k)).unwrap_or(nbrs[0]);
    let copy = t.num_nodes();
    let cl = t.cluster(i).to_vec();
    t.clusters_mut().push(cl);
    for nb in nbrs.into_iter().filter(|&nb| nb != keep) {
        rewire(t, i, nb, copy);
    }
    t.edges_mut().push((i, copy));
    i
}

/// Roots the decomposition at `root`. Parent/child relations, the Euler tour
/// and the leaf order are then available from the returned tree.
pub fn root_and_order(t: &TreeDecomposition, root: usize) -> Result<TreeDecomposition> {
    t.check_node(root)?;
    Ok(t.clone().with_root(Some(root)))
}

/// Smallest node with at most two neighbors that is not a value leaf, so the
/// root has at most two children and every value leaf stays childless.
/// Falls back to node 0 when the tree is too small for that.
pub fn default_root(t: &TreeDecomposition) -> usize {
    let adj = t.adjacency();
    let leaves: BTreeSet<usize> = t.value_leaves().values().copied().collect();
    (0..t.num_nodes())
        .find(|&i| adj[i].len() <= 2 && !leaves.contains(&i))
        .or_else(|| (0..t.num_nodes()).find(|&i| adj[i].len() <= 2))
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fixtures, DiagramBuilder, VarId};
    use crate::treedecomp::{build_decomposition, validate_decomposition};

    fn star(leaves: usize) -> (InfluenceDiagram, TreeDecomposition) {
        // hub variable H with one child per leaf
        let mut b = DiagramBuilder::new();
        let h = b.chance("H", 2, &[], vec![0.5, 0.5]);
        let mut clusters = vec![vec![h]];
        let mut edges = Vec::new();
        for k in 0..leaves {
            let c = b.chance(&format!("L{k}"), 2, &[h], vec![0.5; 4]);
            clusters.push(vec![h, c]);
            edges.push((0, k + 1));
        }
        (b.build(), TreeDecomposition::new(clusters, edges))
    }

    #[test]
    fn star_becomes_binary() {
        let (d, t) = star(5);
        assert!(validate_decomposition(&d, &t).is_empty());
        let b = binarize(&t);
        assert!(b.is_binary());
        assert_eq!(b.width(), t.width());
        assert!(validate_decomposition(&d, &b).is_empty(), "{}", validate_decomposition(&d, &b));
        for c in t.clusters() {
            assert!(b.clusters().contains(c));
        }
    }

    #[test]
    fn binary_tree_is_unchanged() {
        let (_, t) = star(3);
        assert_eq!(binarize(&t), t);
        let single = TreeDecomposition::new(vec![vec![VarId(0)]], vec![]);
        assert_eq!(binarize(&single), single);
    }

    #[test]
    fn existing_leaf_is_reused() {
        let mut b = DiagramBuilder::new();
        let a = b.chance("A", 2, &[], vec![0.5, 0.5]);
        let c = b.chance("C", 2, &[a], vec![0.5; 4]);
        let v = b.value("V", &[c], vec![0.0, 1.0]);
        let d = b.build();
        let t = TreeDecomposition::new(vec![vec![a, c], vec![c]], vec![(0, 1)]);
        let out = ensure_value_leaves(&d, &t).unwrap();
        assert_eq!(out.clusters(), t.clusters());
        assert_eq!(out.edges(), t.edges());
        assert_eq!(out.value_leaves().get(&v), Some(&1));
    }

    #[test]
    fn two_values_on_one_internal_node() {
        let mut b = DiagramBuilder::new();
        let a = b.chance("A", 2, &[], vec![0.5, 0.5]);
        let c = b.chance("B", 2, &[a], vec![0.5; 4]);
        let e = b.chance("C", 2, &[a], vec![0.5; 4]);
        b.value("V1", &[a], vec![0.0, 1.0]);
        b.value("V2", &[a], vec![1.0, 0.0]);
        let d = b.build();
        // node 0 = {A} has three neighbours
        let t = TreeDecomposition::new(
            vec![vec![a], vec![a, c], vec![a, e], vec![a]],
            vec![(0, 1), (0, 2), (0, 3)],
        );
        let out = ensure_value_leaves(&d, &t).unwrap();
        // node 3 is reused for V1; V2 hangs off node 1, which has a free slot
        assert_eq!(out.num_nodes(), t.num_nodes() + 1);
        assert_eq!(out.width(), t.width());
        assert!(out.is_binary());
        let r = validate_decomposition(&d, &out);
        assert!(r.is_empty(), "{r}");

        let fig = fixtures::figure_one();
        let t = binarize(&build_decomposition(&fig));
        let out = ensure_value_leaves(&fig, &t).unwrap();
        assert_eq!(out.value_leaves().len(), 2);
        assert_eq!(out.width(), t.width());
        assert!(validate_decomposition(&fig, &out).is_empty());
    }

    #[test]
    fn no_values_means_no_change() {
        let (d, t) = star(3);
        assert_eq!(ensure_value_leaves(&d, &t).unwrap(), t);
    }

    #[test]
    fn uncovered_value_parents_fail() {
        let mut b = DiagramBuilder::new();
        let a = b.chance("A", 2, &[], vec![0.5, 0.5]);
        let c = b.chance("C", 2, &[], vec![0.5, 0.5]);
        let v = b.value("V", &[a, c], vec![0.0; 4]);
        let d = b.build();
        let t = TreeDecomposition::new(vec![vec![a], vec![c]], vec![(0, 1)]);
        assert_eq!(ensure_value_leaves(&d, &t), Err(Error::FamilyNotCovered(v)));
    }

    #[test]
    fn rooting() {
        let t = TreeDecomposition::new(vec![vec![], vec![], vec![]], vec![(0, 1), (1, 2)]);
        let r = root_and_order(&t, 0).unwrap();
        assert_eq!(r.parents().unwrap().iter().filter(|p| p.is_some()).count(), 2);
        assert_eq!(root_and_order(&t, 3), Err(Error::UnknownNode(3)));

        let single = root_and_order(&TreeDecomposition::new(vec![vec![]], vec![]), 0).unwrap();
        assert_eq!(single.euler_tour().unwrap(), vec![0]);
        assert!(single.children().unwrap()[0].is_empty());

        let (_, star3) = star(3);
        let rooted = root_and_order(&star3, default_root(&star3)).unwrap();
        assert_eq!(rooted.euler_tour().unwrap().len(), 2 * 4 - 1);
    }
}
