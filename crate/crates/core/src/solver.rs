//! Leaf-to-root propagation of potential sets over a tree decomposition.
//!
//! Every node starts from the product of the tables assigned to it, one
//! member per combination of pure policies for the decisions assigned
//! there. A node combines its own set with its children's messages, sums out
//! the variables it does not share with its parent, and prunes the result to
//! an α-covering with `α = 1 + ε / (2m)`. The best scalar reaching the root
//! is the expected utility of the strategy recorded in its provenance and is
//! within a factor `1 + ε` of the maximum expected utility.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::model::{pure_policy, pure_policy_count, validate_diagram, InfluenceDiagram, Strategy, VarId, VarKind};
use crate::potential::{combine_sets, covering, CoveringStats, Member, Potential, PotentialSet, Provenance};
use crate::reduction::{normalize_utilities, reduce_to_single_value, ReductionResult};
use crate::treedecomp::{
    binarize, build_decomposition, default_root, ensure_value_leaves, root_and_order, validate_decomposition,
    TreeDecomposition,
};

/// Default cap on the size of any set the solver builds.
pub const DEFAULT_MAX_SET_SIZE: u128 = 5_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub epsilon: f64,
    /// Skip coverings and return the maximum expected utility exactly.
    pub exact: bool,
    pub max_set_size: Option<u128>,
    pub collect_stats: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { epsilon: 0.1, exact: false, max_set_size: Some(DEFAULT_MAX_SET_SIZE), collect_stats: false }
    }
}

impl SolverConfig {
    pub fn approximate(epsilon: f64) -> Self {
        SolverConfig { epsilon, ..Self::default() }
    }

    pub fn exact() -> Self {
        SolverConfig { epsilon: 0.0, exact: true, ..Self::default() }
    }

    pub fn with_stats(mut self) -> Self {
        self.collect_stats = true;
        self
    }

    pub fn with_max_set_size(mut self, cap: Option<u128>) -> Self {
        self.max_set_size = cap;
        self
    }

    /// `ε = 0` means exact.
    pub fn is_exact(&self) -> bool {
        self.exact || self.epsilon == 0.0
    }

    /// `1 + ε / (2m)`, or `None` in exact mode.
    pub fn alpha(&self, m: usize) -> Option<f64> {
        (!self.is_exact()).then(|| 1.0 + self.epsilon / (2.0 * m as f64))
    }

    fn check(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Precondition(format!("epsilon must be finite and >= 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Node each table is assigned to: chance CPTs, decision policies and the
/// utility go to the smallest node covering the family (parents for value
/// variables).
pub type Assignment = BTreeMap<VarId, usize>;

pub fn assign_factors(d: &InfluenceDiagram, t: &TreeDecomposition) -> Result<Assignment> {
    d.ids()
        .map(|x| {
            let needed = match d.kind(x) {
                VarKind::Value => d.parents(x),
                _ => d.family(x),
            };
            t.covering_node(&needed).map(|i| (x, i)).ok_or(Error::FamilyNotCovered(x))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeStats {
    pub node: usize,
    pub cluster: Vec<VarId>,
    /// `|K_i|` after initialization.
    pub initial: usize,
    /// `|A_i|`, the number of combinations formed.
    pub combined: u128,
    /// `|B_i|`.
    pub marginal: usize,
    /// `|C_i|`, the message sent to the parent.
    pub message: usize,
    /// Smallest positive entry in `B_i`.
    pub min_positive: Option<f64>,
    /// Covering size bound `(1 - ⌊log_α t⌋)^η` for `B_i`, approximate mode only.
    pub bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverResult {
    /// Expected utility of `strategy`, on the caller's utility scale.
    pub value: f64,
    /// Value on the normalized `[0, 1]` scale the propagation ran on.
    pub normalized_value: f64,
    pub offset: f64,
    pub scale: f64,
    pub strategy: Strategy,
    pub alpha: Option<f64>,
    /// Number of nodes in the decomposition propagated over.
    pub m: usize,
    pub stats: Vec<NodeStats>,
    pub elapsed: Duration,
}

impl SolverResult {
    /// Total message size `Σ |C_i|`.
    pub fn total_message_size(&self) -> usize {
        self.stats.iter().map(|s| s.message).sum()
    }
}

/// What the observer passed to [`solve_observed`] sees at each node.
pub struct NodeEvent<'a> {
    pub node: usize,
    pub marginal: &'a PotentialSet,
    pub message: &'a PotentialSet,
    pub covering: Option<&'a CoveringStats>,
}

pub fn solve(d: &InfluenceDiagram, t: &TreeDecomposition, cfg: &SolverConfig) -> Result<SolverResult> {
    solve_observed(d, t, cfg, &mut |_| {})
}

/// [`solve`], reporting every node's marginal set and message.
pub fn solve_observed(
    d: &InfluenceDiagram,
    t: &TreeDecomposition,
    cfg: &SolverConfig,
    observer: &mut dyn FnMut(&NodeEvent<'_>),
) -> Result<SolverResult> {
    let start = Instant::now();
    cfg.check()?;
    let values = d.value_vars();
    if values.len() != 1 {
        return Err(Error::Precondition(format!("expected one value variable, found {}", values.len())));
    }
    let value_var = values[0];
    let utility = d.reward(value_var).ok_or_else(|| Error::Precondition("value variable without rewards".into()))?;
    if utility.table.iter().any(|u| !(0.0..=1.0).contains(u)) {
        return Err(Error::Precondition("utilities must lie in [0, 1]".into()));
    }
    let report = validate_decomposition(d, t);
    if !report.is_empty() {
        return Err(Error::Precondition(format!("invalid decomposition: {}", report.to_string().trim_end())));
    }
    if !t.is_binary() {
        return Err(Error::Precondition("decomposition is not binary".into()));
    }
    let root = t.root().ok_or_else(|| Error::Precondition("decomposition is not rooted".into()))?;
    let children = t.children().expect("rooted");
    let parents = t.parents().expect("rooted");
    let order = t.postorder().expect("rooted");
    let m = t.num_nodes();
    let alpha = cfg.alpha(m);
    let cap = cfg.max_set_size.unwrap_or(u128::MAX);

    let sigma = assign_factors(d, t)?;
    let mut initial = initialize(d, t, &sigma, cap)?;

    let mut messages: Vec<Option<PotentialSet>> = vec![None; m];
    let mut stats = Vec::new();
    for &i in &order {
        let own = initial[i].take().expect("each node is processed once");
        let kids: Vec<PotentialSet> = children[i].iter().map(|&j| messages[j].take().expect("child before parent")).collect();
        let combined = kids.iter().fold(own.len() as u128, |acc, k| acc.saturating_mul(k.len() as u128));
        if combined > cap {
            return Err(Error::SetTooLarge { node: i, size: combined, cap });
        }
        let keep: Vec<VarId> = match parents[i] {
            Some(p) => t.cluster(i).iter().copied().filter(|v| t.cluster(p).binary_search(v).is_ok()).collect(),
            None => Vec::new(),
        };
        let marginal = combine_and_marginalize(d, t.cluster(i), &own, &kids, &keep);
        let (message, cov_stats) = match alpha {
            Some(a) => {
                let (c, s) = covering(&marginal, a)?;
                (c, Some(s))
            }
            None => (marginal.clone(), None),
        };
        observer(&NodeEvent { node: i, marginal: &marginal, message: &message, covering: cov_stats.as_ref() });
        if cfg.collect_stats {
            stats.push(NodeStats {
                node: i,
                cluster: t.cluster(i).to_vec(),
                initial: own.len(),
                combined,
                marginal: marginal.len(),
                message: message.len(),
                min_positive: cov_stats.as_ref().map_or_else(|| min_positive(&marginal), |s| s.min_positive),
                bound: cov_stats.as_ref().and_then(CoveringStats::bound),
            });
        }
        messages[i] = Some(message);
    }

    let top = messages[root].take().expect("root processed");
    let best = top
        .members()
        .iter()
        .map(|m| (m.potential.as_scalar().expect("root message is scalar"), &m.provenance))
        .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(a.1)))
        .ok_or_else(|| Error::Precondition("no strategy reached the root".into()))?;

    let strategy = strategy_from(d, best.1)?;
    Ok(SolverResult {
        value: best.0,
        normalized_value: best.0,
        offset: 0.0,
        scale: 1.0,
        strategy,
        alpha,
        m,
        stats,
        elapsed: start.elapsed(),
    })
}

fn min_positive(k: &PotentialSet) -> Option<f64> {
    k.members().iter().filter_map(|m| m.potential.min_positive()).min_by(f64::total_cmp)
}

/// Completes a provenance to a full strategy; decisions it does not mention
/// get their first pure policy.
fn strategy_from(d: &InfluenceDiagram, provenance: &Provenance) -> Result<Strategy> {
    d.decision_vars()
        .into_iter()
        .map(|dec| pure_policy(d, dec, provenance.get(dec).unwrap_or(0) as u128))
        .collect::<Result<Vec<_>>>()
        .map(Strategy::new)
}

fn pair_with_cards(d: &InfluenceDiagram, vars: &[VarId]) -> Vec<(VarId, usize)> {
    vars.iter().map(|&v| (v, d.cardinality(v))).collect()
}

/// `K_i` for every node: `1(X_i)` times the assigned CPTs and utility, one
/// member per combination of the assigned decisions' pure policies.
fn initialize(d: &InfluenceDiagram, t: &TreeDecomposition, sigma: &Assignment, cap: u128) -> Result<Vec<Option<PotentialSet>>> {
    let m = t.num_nodes();
    let mut base: Vec<Potential> = (0..m).map(|i| Potential::unit(&pair_with_cards(d, t.cluster(i)))).collect();
    let mut policy_sets: Vec<Vec<PotentialSet>> = vec![Vec::new(); m];
    let mut sizes = vec![1u128; m];

    for (&x, &i) in sigma {
        match d.kind(x) {
            VarKind::Chance => {
                let cpt = d.cpt(x).expect("chance variable has a CPT");
                let mut order = vec![x];
                order.extend(&cpt.parents);
                let cards: Vec<usize> = order.iter().map(|&v| d.cardinality(v)).collect();
                base[i] = base[i].multiply(&Potential::from_table(&order, &cards, &cpt.table)?)?;
            }
            VarKind::Value => {
                let r = d.reward(x).expect("value variable has rewards");
                let cards: Vec<usize> = r.parents.iter().map(|&v| d.cardinality(v)).collect();
                base[i] = base[i].multiply(&Potential::from_table(&r.parents, &cards, &r.table)?)?;
            }
            VarKind::Decision => {
                let count = pure_policy_count(d, x)?.unwrap_or(u128::MAX);
                sizes[i] = sizes[i].saturating_mul(count);
                if sizes[i] > cap {
                    return Err(Error::SetTooLarge { node: i, size: sizes[i], cap });
                }
                let mut order = vec![x];
                order.extend(d.parents(x));
                let cards: Vec<usize> = order.iter().map(|&v| d.cardinality(v)).collect();
                let members = (0..count)
                    .map(|k| {
                        let p = pure_policy(d, x, k)?;
                        Ok(Member {
                            potential: Potential::from_table(&order, &cards, &p.table)?,
                            provenance: Provenance::single(x, k as usize),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let scope = members[0].potential.scope().to_vec();
                let cards = members[0].potential.cards().to_vec();
                policy_sets[i].push(PotentialSet::new(scope, cards, members)?);
            }
        }
    }

    base.into_iter()
        .zip(policy_sets)
        .map(|(b, sets)| {
            let mut all = vec![PotentialSet::singleton(b)];
            all.extend(sets);
            Ok(Some(combine_sets(&all)?))
        })
        .collect()
}

/// Streams `A_i = COMBINE(K_i, C_j ...)` and sums each product down to
/// `keep` without materializing `A_i`. Members come out with `K_i` varying
/// slowest, then the children in order.
fn combine_and_marginalize(
    d: &InfluenceDiagram,
    cluster: &[VarId],
    own: &PotentialSet,
    kids: &[PotentialSet],
    keep: &[VarId],
) -> PotentialSet {
    let cards: Vec<usize> = cluster.iter().map(|&v| d.cardinality(v)).collect();
    let eta: usize = cards.iter().product();
    let keep_cards: Vec<usize> = keep.iter().map(|&v| d.cardinality(v)).collect();
    let out_len: usize = keep_cards.iter().product();

    // table offsets, per cluster assignment, into each child message and the output
    let index_map = |scope: &[VarId], scope_cards: &[usize]| -> Vec<usize> {
        let strides = crate::potential::strides_within(cluster, scope, scope_cards);
        let mut map = Vec::with_capacity(eta);
        let mut digits = vec![0usize; cluster.len()];
        let mut idx = 0usize;
        for _ in 0..eta {
            map.push(idx);
            for k in 0..digits.len() {
                digits[k] += 1;
                idx += strides[k];
                if digits[k] < cards[k] {
                    break;
                }
                idx -= strides[k] * cards[k];
                digits[k] = 0;
            }
        }
        map
    };
    let kid_maps: Vec<Vec<usize>> = kids.iter().map(|k| index_map(k.scope(), k.cards())).collect();
    let out_map = index_map(keep, &keep_cards);

    let mut members = Vec::new();
    if own.is_empty() || kids.iter().any(PotentialSet::is_empty) {
        return PotentialSet::from_distinct(keep.to_vec(), keep_cards, members);
    }
    let mut choice = vec![0usize; kids.len()];
    let mut product = vec![0.0; eta];
    for k in own.members() {
        debug_assert_eq!(k.potential.scope(), cluster);
        loop {
            let mut provenance = k.provenance.clone();
            product.copy_from_slice(k.potential.values());
            for ((kid, map), &c) in kids.iter().zip(&kid_maps).zip(&choice) {
                let member = &kid.members()[c];
                provenance = provenance
                    .union(&member.provenance)
                    .expect("each decision is assigned to exactly one node");
                let vals = member.potential.values();
                for (p, &idx) in product.iter_mut().zip(map) {
                    *p *= vals[idx];
                }
            }
            let mut out = vec![0.0; out_len];
            for (&p, &idx) in product.iter().zip(&out_map) {
                out[idx] += p;
            }
            members.push(Member {
                potential: Potential::new(keep.to_vec(), keep_cards.clone(), out).expect("well-formed marginal"),
                provenance,
            });

            let mut j = kids.len();
            loop {
                if j == 0 {
                    break;
                }
                j -= 1;
                choice[j] += 1;
                if choice[j] < kids[j].len() {
                    break;
                }
                choice[j] = 0;
                if j == 0 {
                    j = usize::MAX;
                    break;
                }
            }
            if kids.is_empty() || j == usize::MAX {
                break;
            }
        }
    }
    PotentialSet::from_distinct(keep.to_vec(), keep_cards, members)
}

/// Every intermediate object of [`solve_full`].
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub base: TreeDecomposition,
    pub binary: TreeDecomposition,
    pub with_leaves: TreeDecomposition,
    pub rooted: TreeDecomposition,
    pub reduction: ReductionResult,
    pub normalized: InfluenceDiagram,
    pub offset: f64,
    pub scale: f64,
}

/// Decomposes (or takes `base`), binarizes, adds value leaves, roots,
/// reduces to one value variable and normalizes. `d` needs at least one
/// value variable.
pub fn prepare(d: &InfluenceDiagram, base: Option<TreeDecomposition>) -> Result<Pipeline> {
    let report = validate_diagram(d);
    if !report.is_empty() {
        return Err(Error::Precondition(format!("invalid diagram: {}", report.to_string().trim_end())));
    }
    let base = match base {
        Some(t) => {
            let r = validate_decomposition(d, &t);
            if !r.is_empty() {
                return Err(Error::Precondition(format!("invalid decomposition: {}", r.to_string().trim_end())));
            }
            t
        }
        None => build_decomposition(d),
    };
    let binary = binarize(&base);
    let with_leaves = ensure_value_leaves(d, &binary)?;
    let rooted = root_and_order(&with_leaves, default_root(&with_leaves))?;
    let reduction = reduce_to_single_value(d, &rooted)?;
    let (normalized, offset, scale) = normalize_utilities(&reduction.diagram)?;
    Ok(Pipeline { base, binary, with_leaves, rooted, reduction, normalized, offset, scale })
}

/// Solves an arbitrary valid diagram: runs [`prepare`] and [`solve`], then
/// maps the value back to the original utility scale.
pub fn solve_full(d: &InfluenceDiagram, cfg: &SolverConfig) -> Result<SolverResult> {
    solve_full_with(d, None, cfg, &mut |_| {})
}

pub fn solve_full_with(
    d: &InfluenceDiagram,
    base: Option<TreeDecomposition>,
    cfg: &SolverConfig,
    observer: &mut dyn FnMut(&NodeEvent<'_>),
) -> Result<SolverResult> {
    cfg.check()?;
    if d.value_vars().is_empty() {
        let report = validate_diagram(d);
        if !report.is_empty() {
            return Err(Error::Precondition(format!("invalid diagram: {}", report.to_string().trim_end())));
        }
        // nothing to gain: every strategy is worth zero
        return Ok(SolverResult {
            value: 0.0,
            normalized_value: 0.0,
            offset: 0.0,
            scale: 1.0,
            strategy: strategy_from(d, &Provenance::empty())?,
            alpha: None,
            m: 0,
            stats: Vec::new(),
            elapsed: Duration::ZERO,
        });
    }
    let start = Instant::now();
    let p = prepare(d, base)?;
    let mut result = solve_observed(&p.normalized, &p.reduction.decomposition, cfg, observer)?;
    result.offset = p.offset;
    result.scale = p.scale;
    result.value = p.offset + p.scale * result.normalized_value;
    result.elapsed = start.elapsed();
    Ok(result)
}
