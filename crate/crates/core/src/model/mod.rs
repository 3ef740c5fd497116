//! Influence diagrams, policies and strategies.
//!
//! Tables are dense and row-major with the child (or action) index fastest,
//! followed by the parents in their listed order, first parent fastest. A
//! parent assignment `(p1, ..., pk)` with child state `c` lives at offset
//! `c + |child| * (p1 + |P1| * (p2 + ...))`.

mod eval;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

pub use eval::{
    brute_force_meu, enumerate_pure_policies, expected_utility, pure_policy, pure_policy_count,
    Evaluator, DEFAULT_STRATEGY_CAP,
};
pub use validate::{validate_diagram, ValidationReport, Violation};

/// Index of a variable in its diagram's declaration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    Chance,
    Decision,
    Value,
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarKind::Chance => "chance",
            VarKind::Decision => "decision",
            VarKind::Value => "value",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    /// Number of states. Value variables have none and carry 0.
    pub cardinality: usize,
    pub states: Option<Vec<String>>,
}

impl Variable {
    pub fn chance(name: impl Into<String>, cardinality: usize) -> Self {
        Variable { name: name.into(), kind: VarKind::Chance, cardinality, states: None }
    }

    pub fn decision(name: impl Into<String>, cardinality: usize) -> Self {
        Variable { name: name.into(), kind: VarKind::Decision, cardinality, states: None }
    }

    pub fn value(name: impl Into<String>) -> Self {
        Variable { name: name.into(), kind: VarKind::Value, cardinality: 0, states: None }
    }
}

/// Conditional probability table `P(child | parents)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cpt {
    pub parents: Vec<VarId>,
    pub table: Vec<f64>,
}

/// Reward `U(parents)`, one entry per parent assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardTable {
    pub parents: Vec<VarId>,
    pub table: Vec<f64>,
}

/// An influence diagram `(C, D, V, G, P, U)`.
///
/// Construction does not validate; run [`validate_diagram`] before handing a
/// diagram to anything that assumes the invariants.
#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceDiagram {
    variables: Vec<Variable>,
    arcs: Vec<(VarId, VarId)>,
    cpts: BTreeMap<VarId, Cpt>,
    rewards: BTreeMap<VarId, RewardTable>,
}

impl InfluenceDiagram {
    pub fn from_parts(
        variables: Vec<Variable>,
        arcs: Vec<(VarId, VarId)>,
        cpts: BTreeMap<VarId, Cpt>,
        rewards: BTreeMap<VarId, RewardTable>,
    ) -> Self {
        InfluenceDiagram { variables, arcs, cpts, rewards }
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.variables.len()).map(VarId)
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn name(&self, id: VarId) -> &str {
        &self.variables[id.0].name
    }

    pub fn kind(&self, id: VarId) -> VarKind {
        self.variables[id.0].kind
    }

    pub fn cardinality(&self, id: VarId) -> usize {
        self.variables[id.0].cardinality
    }

    pub fn arcs(&self) -> &[(VarId, VarId)] {
        &self.arcs
    }

    pub fn cpts(&self) -> &BTreeMap<VarId, Cpt> {
        &self.cpts
    }

    pub fn cpt(&self, id: VarId) -> Option<&Cpt> {
        self.cpts.get(&id)
    }

    pub fn rewards(&self) -> &BTreeMap<VarId, RewardTable> {
        &self.rewards
    }

    pub fn reward(&self, id: VarId) -> Option<&RewardTable> {
        self.rewards.get(&id)
    }

    fn of_kind(&self, kind: VarKind) -> Vec<VarId> {
        self.ids().filter(|&v| self.kind(v) == kind).collect()
    }

    pub fn chance_vars(&self) -> Vec<VarId> {
        self.of_kind(VarKind::Chance)
    }

    pub fn decision_vars(&self) -> Vec<VarId> {
        self.of_kind(VarKind::Decision)
    }

    pub fn value_vars(&self) -> Vec<VarId> {
        self.of_kind(VarKind::Value)
    }

    /// Chance and decision variables, the ones that carry states.
    pub fn state_vars(&self) -> Vec<VarId> {
        self.ids().filter(|&v| self.kind(v) != VarKind::Value).collect()
    }

    /// Parents from the arc set, sorted by id.
    pub fn parents(&self, id: VarId) -> Vec<VarId> {
        let mut ps: Vec<VarId> =
            self.arcs.iter().filter(|&&(_, to)| to == id).map(|&(from, _)| from).collect();
        ps.sort_unstable();
        ps.dedup();
        ps
    }

    pub fn children(&self, id: VarId) -> Vec<VarId> {
        let mut cs: Vec<VarId> =
            self.arcs.iter().filter(|&&(from, _)| from == id).map(|&(_, to)| to).collect();
        cs.sort_unstable();
        cs.dedup();
        cs
    }

    /// `Fa(X) = {X} ∪ Pa(X)`, sorted.
    pub fn family(&self, id: VarId) -> Vec<VarId> {
        let mut fa = self.parents(id);
        fa.push(id);
        fa.sort_unstable();
        fa
    }

    /// Parents in the order their own table lists them: the CPT or reward
    /// listing when there is one, sorted arc order for decisions.
    pub fn table_parents(&self, id: VarId) -> Vec<VarId> {
        match self.kind(id) {
            VarKind::Chance => self.cpts.get(&id).map(|c| c.parents.clone()),
            VarKind::Value => self.rewards.get(&id).map(|r| r.parents.clone()),
            VarKind::Decision => None,
        }
        .unwrap_or_else(|| self.parents(id))
    }

    /// Number of joint assignments of the chance and decision variables,
    /// saturating at `u128::MAX`.
    pub fn joint_size(&self) -> u128 {
        self.state_vars()
            .iter()
            .fold(1u128, |acc, &v| acc.saturating_mul(self.cardinality(v) as u128))
    }

    /// A topological order of all variables, ties broken by id. `None` if
    /// the arcs contain a cycle or point outside the diagram.
    pub fn topological_order(&self) -> Option<Vec<VarId>> {
        let n = self.variables.len();
        let mut indegree = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(from, to) in &self.arcs {
            if from.0 >= n || to.0 >= n {
                return None;
            }
            out[from.0].push(to.0);
            indegree[to.0] += 1;
        }
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(VarId(v));
            for &w in &out[v] {
                indegree[w] -= 1;
                if indegree[w] == 0 {
                    ready.insert(w);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Copy of the diagram with every reward table replaced by `f(table)`.
    pub fn map_rewards(&self, mut f: impl FnMut(VarId, &[f64]) -> Vec<f64>) -> Self {
        let mut out = self.clone();
        for (&v, r) in out.rewards.iter_mut() {
            r.table = f(v, &r.table);
        }
        out
    }
}

/// Incremental construction of a diagram. Tables added through the builder
/// also add the corresponding arcs.
#[derive(Clone, Debug, Default)]
pub struct DiagramBuilder {
    variables: Vec<Variable>,
    arcs: Vec<(VarId, VarId)>,
    cpts: BTreeMap<VarId, Cpt>,
    rewards: BTreeMap<VarId, RewardTable>,
}

impl DiagramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn variable(&mut self, var: Variable) -> VarId {
        self.variables.push(var);
        VarId(self.variables.len() - 1)
    }

    pub fn chance(&mut self, name: &str, cardinality: usize, parents: &[VarId], table: Vec<f64>) -> VarId {
        let id = self.variable(Variable::chance(name, cardinality));
        self.arcs.extend(parents.iter().map(|&p| (p, id)));
        self.cpts.insert(id, Cpt { parents: parents.to_vec(), table });
        id
    }

    pub fn decision(&mut self, name: &str, cardinality: usize, parents: &[VarId]) -> VarId {
        let id = self.variable(Variable::decision(name, cardinality));
        self.arcs.extend(parents.iter().map(|&p| (p, id)));
        id
    }

    pub fn value(&mut self, name: &str, parents: &[VarId], table: Vec<f64>) -> VarId {
        let id = self.variable(Variable::value(name));
        self.arcs.extend(parents.iter().map(|&p| (p, id)));
        self.rewards.insert(id, RewardTable { parents: parents.to_vec(), table });
        id
    }

    pub fn arc(&mut self, from: VarId, to: VarId) -> &mut Self {
        self.arcs.push((from, to));
        self
    }

    pub fn build(self) -> InfluenceDiagram {
        InfluenceDiagram::from_parts(self.variables, self.arcs, self.cpts, self.rewards)
    }
}

/// `P(D | Pa(D))`, laid out like a CPT with the parents sorted by id.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub decision: VarId,
    pub parents: Vec<VarId>,
    pub cardinality: usize,
    pub table: Vec<f64>,
}

impl Policy {
    /// Deterministic policy choosing `actions[j]` under parent assignment `j`.
    pub fn pure(decision: VarId, parents: Vec<VarId>, cardinality: usize, actions: &[usize]) -> Self {
        let mut table = vec![0.0; cardinality * actions.len()];
        for (j, &a) in actions.iter().enumerate() {
            table[a + cardinality * j] = 1.0;
        }
        Policy { decision, parents, cardinality, table }
    }

    pub fn num_parent_states(&self) -> usize {
        self.table.len().checked_div(self.cardinality).unwrap_or(0)
    }

    pub fn column(&self, parent_state: usize) -> &[f64] {
        &self.table[parent_state * self.cardinality..(parent_state + 1) * self.cardinality]
    }

    pub fn is_pure(&self) -> bool {
        self.table.chunks(self.cardinality.max(1)).all(|col| {
            col.iter().filter(|&&p| p == 1.0).count() == 1 && col.iter().all(|&p| p == 0.0 || p == 1.0)
        })
    }

    /// The action of a pure policy under each parent assignment.
    pub fn actions(&self) -> Option<Vec<usize>> {
        if !self.is_pure() {
            return None;
        }
        Some(
            self.table
                .chunks(self.cardinality)
                .map(|col| col.iter().position(|&p| p == 1.0).unwrap())
                .collect(),
        )
    }
}

/// One policy per decision variable.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Strategy {
    pub policies: BTreeMap<VarId, Policy>,
}

impl Strategy {
    pub fn new(policies: impl IntoIterator<Item = Policy>) -> Self {
        Strategy { policies: policies.into_iter().map(|p| (p.decision, p)).collect() }
    }

    pub fn policy(&self, decision: VarId) -> Option<&Policy> {
        self.policies.get(&decision)
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    /// The strategy using the uniform randomized policy for every decision.
    pub fn uniform(d: &InfluenceDiagram) -> Self {
        Strategy::new(d.decision_vars().into_iter().map(|dec| {
            let parents = d.parents(dec);
            let card = d.cardinality(dec);
            let gamma: usize = parents.iter().map(|&p| d.cardinality(p)).product();
            Policy { decision: dec, parents, cardinality: card, table: vec![1.0 / card as f64; card * gamma] }
        }))
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parents_and_family() {
        let d = fixtures::figure_one();
        let c2 = d.find("C2").unwrap();
        let names: Vec<&str> = d.parents(c2).iter().map(|&p| d.name(p)).collect();
        assert_eq!(names, ["C1", "D2"]);
        assert_eq!(d.family(c2).len(), 3);
        assert_eq!(d.value_vars().len(), 2);
        assert_eq!(d.joint_size(), 16);
    }

    #[test]
    fn topological_order_respects_arcs() {
        let d = fixtures::figure_one();
        let order = d.topological_order().unwrap();
        let pos = |v: VarId| order.iter().position(|&x| x == v).unwrap();
        for &(a, b) in d.arcs() {
            assert!(pos(a) < pos(b));
        }
    }

    #[test]
    fn cycle_has_no_topological_order() {
        let mut b = DiagramBuilder::new();
        let a = b.chance("A", 2, &[], vec![0.5, 0.5]);
        let c = b.chance("B", 2, &[a], vec![0.5, 0.5, 0.5, 0.5]);
        b.arc(c, a);
        assert!(b.build().topological_order().is_none());
    }

    #[test]
    fn pure_policy_actions_round_trip() {
        let p = Policy::pure(VarId(0), vec![VarId(1)], 3, &[2, 0]);
        assert_eq!(p.table, vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        assert!(p.is_pure());
        assert_eq!(p.actions(), Some(vec![2, 0]));
        let mixed = Policy { table: vec![0.5, 0.5], ..Policy::pure(VarId(0), vec![], 2, &[0]) };
        assert!(!mixed.is_pure());
    }
}
