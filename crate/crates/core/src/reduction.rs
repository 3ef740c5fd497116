//! Reduction of a diagram with several value variables to an equivalent one
//! with a single value variable, and affine renormalization of utilities.
//!
//! Each value variable `V_i` becomes a binary chance variable `W_i` with
//! `P(w_i = 1 | Pa(V_i)) = (U_i(Pa(V_i)) - L) / (H - L)`, where `L` and `H`
//! bound all rewards. A chain `O_1 -> ... -> O_q` averages the `W_i`:
//! `P(o_i = 1 | C, D) = (1/i) Σ_{j<=i} P(w_j = 1 | C, D)`. The new value
//! variable reads `O_q` with `U(o_q = 1) = qH`, `U(o_q = 2) = qL`, which
//! reproduces the original expected utility for every strategy.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{Cpt, InfluenceDiagram, RewardTable, VarId, VarKind, Variable};
use crate::treedecomp::TreeDecomposition;

/// Largest joint space [`verify_chain_identity`] will enumerate.
pub const CHAIN_CHECK_CAP: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionResult {
    pub diagram: InfluenceDiagram,
    pub decomposition: TreeDecomposition,
    pub lower: f64,
    pub upper: f64,
    /// `W_1..W_q` in chain order. `W_i` reuses the slot of the value
    /// variable it replaces.
    pub w_vars: Vec<VarId>,
    pub o_vars: Vec<VarId>,
    /// The original value variables in chain order.
    pub replaced: Vec<VarId>,
    pub value_var: VarId,
    pub q: usize,
}

/// Smallest and largest reward entry. A constant reward widens the upper
/// bound by one so that the bounds stay distinct.
pub fn utility_bounds(d: &InfluenceDiagram) -> Result<(f64, f64)> {
    if d.value_vars().is_empty() {
        return Err(Error::Precondition("diagram has no value variable".into()));
    }
    let entries = d.rewards().values().flat_map(|r| r.table.iter().copied());
    let (lo, hi) = entries.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), u| (lo.min(u), hi.max(u)));
    if !lo.is_finite() {
        // every reward table is empty: some parent has no states
        return Ok((0.0, 1.0));
    }
    Ok(if hi > lo { (lo, hi) } else { (lo, lo + 1.0) })
}

fn fresh_name(d: &InfluenceDiagram, taken: &mut Vec<String>, base: String) -> String {
    let mut name = base;
    while d.find(&name).is_some() || taken.contains(&name) {
        name.push('_');
    }
    taken.push(name.clone());
    name
}

/// Builds the single-value diagram and its decomposition.
///
/// `t` must be binary, rooted, and carry a value leaf for every value
/// variable. Leaves are chained in the order they appear in the Euler tour,
/// and `O_{i-1}` is added to every node the tour passes between `ℓ_{i-1}`
/// and `ℓ_i`, which restores running intersection while growing any cluster
/// by at most three variables.
pub fn reduce_to_single_value(d: &InfluenceDiagram, t: &TreeDecomposition) -> Result<ReductionResult> {
    let (lower, upper) = utility_bounds(d)?;
    if !t.is_binary() {
        return Err(Error::Precondition("decomposition is not binary".into()));
    }
    let tour = t.euler_tour().ok_or_else(|| Error::Precondition("decomposition is not rooted".into()))?;
    let values = d.value_vars();
    let mut placed = Vec::with_capacity(values.len());
    for &v in &values {
        let leaf = *t
            .value_leaves()
            .get(&v)
            .ok_or_else(|| Error::Precondition(format!("no value leaf for {}", d.name(v))))?;
        if t.cluster(leaf) != d.parents(v).as_slice() {
            return Err(Error::Precondition(format!("value leaf of {} does not match its parents", d.name(v))));
        }
        let first = tour.iter().position(|&i| i == leaf).expect("every node is on the tour");
        placed.push((first, leaf, v));
    }
    placed.sort_unstable();
    if placed.windows(2).any(|w| w[0].1 == w[1].1) {
        return Err(Error::Precondition("two value variables share a leaf".into()));
    }
    let q = placed.len();
    let span = upper - lower;

    let mut variables: Vec<Variable> = d.variables().to_vec();
    let mut cpts: BTreeMap<VarId, Cpt> = d.cpts().clone();
    let mut arcs = d.arcs().to_vec();
    let mut taken = Vec::new();

    let replaced: Vec<VarId> = placed.iter().map(|&(_, _, v)| v).collect();
    for &v in &replaced {
        let name = fresh_name(d, &mut taken, format!("W_{}", d.name(v)));
        variables[v.0] = Variable::chance(name, 2);
        let reward: &RewardTable = d.reward(v).expect("value variable has a reward table");
        let table = reward
            .table
            .iter()
            .flat_map(|&u| {
                let p = (u - lower) / span;
                [p, 1.0 - p]
            })
            .collect();
        cpts.insert(v, Cpt { parents: reward.parents.clone(), table });
    }
    let w_vars = replaced.clone();

    let mut o_vars = Vec::with_capacity(q);
    for i in 1..=q {
        let id = VarId(variables.len());
        variables.push(Variable::chance(fresh_name(d, &mut taken, format!("O_{i}")), 2));
        let w = w_vars[i - 1];
        let cpt = if i == 1 {
            arcs.push((w, id));
            Cpt { parents: vec![w], table: vec![1.0, 0.0, 0.0, 1.0] }
        } else {
            let prev = o_vars[i - 2];
            arcs.push((prev, id));
            arcs.push((w, id));
            let fi = i as f64;
            // parent assignment index = o_{i-1} + 2 w_i
            Cpt {
                parents: vec![prev, w],
                table: vec![
                    1.0, 0.0, // o_{i-1} = 1, w_i = 1
                    1.0 / fi, (fi - 1.0) / fi, // o_{i-1} = 2, w_i = 1
                    (fi - 1.0) / fi, 1.0 / fi, // o_{i-1} = 1, w_i = 2
                    0.0, 1.0, // o_{i-1} = 2, w_i = 2
                ],
            }
        };
        cpts.insert(id, cpt);
        o_vars.push(id);
    }

    let value_var = VarId(variables.len());
    variables.push(Variable::value(fresh_name(d, &mut taken, "U".into())));
    let qf = q as f64;
    let last = *o_vars.last().expect("q >= 1");
    arcs.push((last, value_var));
    let rewards = BTreeMap::from([(value_var, RewardTable { parents: vec![last], table: vec![qf * upper, qf * lower] })]);

    let diagram = InfluenceDiagram::from_parts(variables, arcs, cpts, rewards);

    let mut clusters: Vec<Vec<VarId>> = t.clusters().to_vec();
    let positions: Vec<usize> = placed.iter().map(|&(pos, _, _)| pos).collect();
    for (i, &(_, leaf, _)) in placed.iter().enumerate() {
        clusters[leaf].push(w_vars[i]);
        clusters[leaf].push(o_vars[i]);
        if i > 0 {
            for &node in &tour[positions[i - 1]..=positions[i]] {
                clusters[node].push(o_vars[i - 1]);
            }
        }
    }
    let decomposition = TreeDecomposition::new(clusters, t.edges().to_vec()).with_root(t.root());

    Ok(ReductionResult { diagram, decomposition, lower, upper, w_vars, o_vars, replaced, value_var, q })
}

/// Largest deviation between `P(o_i = 1 | C, D)` marginalized through the
/// chain CPTs and `(1/i) Σ_{j<=i} P(w_j = 1 | C, D)`, over every joint
/// assignment of the original chance and decision variables and every `i`.
pub fn verify_chain_identity(r: &ReductionResult, d: &InfluenceDiagram) -> Result<f64> {
    let size = d.joint_size();
    if size > CHAIN_CHECK_CAP {
        return Err(Error::TooLarge { what: "joint assignments", size, cap: CHAIN_CHECK_CAP });
    }
    let vars = d.state_vars();
    let reduced = &r.diagram;
    let w_tables: Vec<&Cpt> = r.w_vars.iter().map(|&w| reduced.cpt(w).expect("W has a CPT")).collect();
    let o_tables: Vec<&Cpt> = r.o_vars.iter().map(|&o| reduced.cpt(o).expect("O has a CPT")).collect();

    let mut assignment = vec![0usize; reduced.num_variables()];
    let mut worst: f64 = 0.0;
    for _ in 0..size {
        let pw: Vec<f64> = w_tables
            .iter()
            .zip(&r.w_vars)
            .map(|(cpt, _)| {
                let mut idx = 0;
                let mut stride = 1;
                for &p in &cpt.parents {
                    idx += assignment[p.0] * stride;
                    stride *= reduced.cardinality(p);
                }
                cpt.table[2 * idx]
            })
            .collect();

        let mut p_o = 0.0;
        let mut running = 0.0;
        for i in 0..r.q {
            let table = &o_tables[i].table;
            let pwi = [pw[i], 1.0 - pw[i]];
            p_o = if i == 0 {
                (0..2).map(|w| table[2 * w] * pwi[w]).sum()
            } else {
                let po = [p_o, 1.0 - p_o];
                let mut s = 0.0;
                for w in 0..2 {
                    for o in 0..2 {
                        s += table[2 * (o + 2 * w)] * po[o] * pwi[w];
                    }
                }
                s
            };
            running += pw[i];
            worst = worst.max((p_o - running / (i + 1) as f64).abs());
        }

        for &v in &vars {
            assignment[v.0] += 1;
            if assignment[v.0] < d.cardinality(v) {
                break;
            }
            assignment[v.0] = 0;
        }
    }
    Ok(worst)
}

/// Maps the single reward table through `u -> (u - offset) / scale` with
/// `offset` its minimum and `scale` its range (1 if constant), so every
/// utility lands in `[0, 1]`. Returns `(diagram, offset, scale)`.
pub fn normalize_utilities(d: &InfluenceDiagram) -> Result<(InfluenceDiagram, f64, f64)> {
    let values = d.value_vars();
    if values.len() != 1 {
        return Err(Error::Precondition(format!("expected one value variable, found {}", values.len())));
    }
    let table = &d.reward(values[0]).expect("value variable has a reward table").table;
    let lo = table.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = table.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (offset, scale) = if !lo.is_finite() { (0.0, 1.0) } else if hi > lo { (lo, hi - lo) } else { (lo, 1.0) };
    let out = d.map_rewards(|_, t| t.iter().map(|&u| ((u - offset) / scale).clamp(0.0, 1.0)).collect());
    Ok((out, offset, scale))
}

/// True if `d` has exactly the kinds a reduced diagram should have.
pub fn is_single_value(d: &InfluenceDiagram) -> bool {
    d.ids().filter(|&v| d.kind(v) == VarKind::Value).count() == 1
}
