use crate::error::{Error, Result};

use super::{InfluenceDiagram, Policy, Strategy, VarId, VarKind};

/// Default cap on the number of pure strategies [`brute_force_meu`] enumerates.
pub const DEFAULT_STRATEGY_CAP: u128 = 10_000_000;

struct Step {
    var: VarId,
    card: usize,
    parents: Vec<VarId>,
    strides: Vec<usize>,
    /// Position in the evaluator's decision list, or `None` for chance variables.
    decision: Option<usize>,
}

struct Reward {
    parents: Vec<VarId>,
    strides: Vec<usize>,
    table: Vec<f64>,
}

/// Exact expected utility by enumeration of joint assignments.
///
/// Variables are visited in topological order and zero-probability branches
/// are skipped, so a pure strategy only pays for the chance variables.
pub struct Evaluator<'a> {
    diagram: &'a InfluenceDiagram,
    steps: Vec<Step>,
    rewards: Vec<Reward>,
    decisions: Vec<VarId>,
}

fn strides(d: &InfluenceDiagram, parents: &[VarId]) -> Vec<usize> {
    let mut acc = 1;
    parents
        .iter()
        .map(|&p| {
            let s = acc;
            acc *= d.cardinality(p);
            s
        })
        .collect()
}

impl<'a> Evaluator<'a> {
    /// Expects a valid diagram.
    pub fn new(diagram: &'a InfluenceDiagram) -> Self {
        let decisions = diagram.decision_vars();
        let order = diagram.topological_order().expect("diagram must be acyclic");
        let steps = order
            .into_iter()
            .filter(|&v| diagram.kind(v) != VarKind::Value)
            .map(|v| {
                let parents = diagram.table_parents(v);
                Step {
                    var: v,
                    card: diagram.cardinality(v),
                    strides: strides(diagram, &parents),
                    parents,
                    decision: decisions.iter().position(|&x| x == v),
                }
            })
            .collect();
        let rewards = diagram
            .rewards()
            .values()
            .map(|r| Reward { strides: strides(diagram, &r.parents), parents: r.parents.clone(), table: r.table.clone() })
            .collect();
        Evaluator { diagram, steps, rewards, decisions }
    }

    pub fn decisions(&self) -> &[VarId] {
        &self.decisions
    }

    /// `policies[k]` is the table of the `k`-th decision in [`Self::decisions`].
    pub fn evaluate(&self, policies: &[&[f64]]) -> f64 {
        debug_assert_eq!(policies.len(), self.decisions.len());
        let mut assignment = vec![0usize; self.diagram.num_variables()];
        self.descend(0, &mut assignment, 1.0, policies)
    }

    fn descend(&self, depth: usize, assignment: &mut [usize], prob: f64, policies: &[&[f64]]) -> f64 {
        let Some(step) = self.steps.get(depth) else {
            let total: f64 = self
                .rewards
                .iter()
                .map(|r| r.table[offset(&r.parents, &r.strides, assignment)])
                .sum();
            return prob * total;
        };
        let table: &[f64] = match step.decision {
            Some(k) => policies[k],
            None => &self.diagram.cpt(step.var).expect("chance variable without CPT").table,
        };
        let base = step.card * offset(&step.parents, &step.strides, assignment);
        let mut acc = 0.0;
        for s in 0..step.card {
            let p = table[base + s];
            if p == 0.0 {
                continue;
            }
            assignment[step.var.0] = s;
            acc += self.descend(depth + 1, assignment, prob * p, policies);
        }
        acc
    }
}

fn offset(parents: &[VarId], strides: &[usize], assignment: &[usize]) -> usize {
    parents.iter().zip(strides).map(|(p, s)| assignment[p.0] * s).sum()
}

fn check_strategy(d: &InfluenceDiagram, s: &Strategy) -> Result<()> {
    let decisions = d.decision_vars();
    if s.len() != decisions.len() {
        return Err(Error::StrategyMismatch(format!(
            "{} policies for {} decisions",
            s.len(),
            decisions.len()
        )));
    }
    for dec in decisions {
        let p = s
            .policy(dec)
            .ok_or_else(|| Error::StrategyMismatch(format!("no policy for {}", d.name(dec))))?;
        let parents = d.parents(dec);
        let gamma: usize = parents.iter().map(|&v| d.cardinality(v)).product();
        if p.parents != parents || p.cardinality != d.cardinality(dec) || p.table.len() != gamma * p.cardinality {
            return Err(Error::StrategyMismatch(format!("policy for {} has the wrong shape", d.name(dec))));
        }
    }
    Ok(())
}

/// `E_S = Σ_{C,D} P_S(C, D) U(C, D)` by enumeration. Randomized policies are allowed.
pub fn expected_utility(d: &InfluenceDiagram, s: &Strategy) -> Result<f64> {
    check_strategy(d, s)?;
    let eval = Evaluator::new(d);
    let tables: Vec<&[f64]> = eval.decisions().iter().map(|dec| s.policies[dec].table.as_slice()).collect();
    Ok(eval.evaluate(&tables))
}

fn decision_shape(d: &InfluenceDiagram, decision: VarId) -> Result<(Vec<VarId>, usize, usize)> {
    if decision.0 >= d.num_variables() {
        return Err(Error::UnknownVariable(decision));
    }
    if d.kind(decision) != VarKind::Decision {
        return Err(Error::NotADecision(decision));
    }
    let parents = d.parents(decision);
    let gamma = parents.iter().map(|&p| d.cardinality(p)).product();
    Ok((parents, d.cardinality(decision), gamma))
}

/// `|D|^γ`, or `None` on overflow.
pub fn pure_policy_count(d: &InfluenceDiagram, decision: VarId) -> Result<Option<u128>> {
    let (_, card, gamma) = decision_shape(d, decision)?;
    Ok(u32::try_from(gamma).ok().and_then(|g| (card as u128).checked_pow(g)))
}

/// The `index`-th pure policy. Policies are ordered lexicographically by
/// their action vector over parent assignments, the first parent assignment
/// being most significant.
pub fn pure_policy(d: &InfluenceDiagram, decision: VarId, index: u128) -> Result<Policy> {
    let (parents, card, gamma) = decision_shape(d, decision)?;
    let mut actions = vec![0usize; gamma];
    let mut rest = index;
    for a in actions.iter_mut().rev() {
        *a = (rest % card as u128) as usize;
        rest /= card as u128;
    }
    if rest != 0 {
        return Err(Error::Precondition(format!("policy index {index} out of range")));
    }
    Ok(Policy::pure(decision, parents, card, &actions))
}

/// Every pure policy of `decision`, in the order of [`pure_policy`].
pub fn enumerate_pure_policies(d: &InfluenceDiagram, decision: VarId) -> Result<Vec<Policy>> {
    let count = pure_policy_count(d, decision)?;
    let count = count
        .filter(|&c| c <= usize::MAX as u128)
        .ok_or(Error::TooLarge { what: "pure policies", size: u128::MAX, cap: usize::MAX as u128 })?;
    (0..count).map(|k| pure_policy(d, decision, k)).collect()
}

/// Maximum expected utility over all pure strategies with one maximizing
/// strategy. Ties keep the first strategy in enumeration order, which runs
/// over the decisions in id order with the last decision varying fastest.
pub fn brute_force_meu(d: &InfluenceDiagram, cap: u128) -> Result<(f64, Strategy)> {
    let eval = Evaluator::new(d);
    let decisions = eval.decisions().to_vec();
    let mut counts = Vec::with_capacity(decisions.len());
    let mut total: u128 = 1;
    for &dec in &decisions {
        let c = pure_policy_count(d, dec)?.unwrap_or(u128::MAX);
        total = total.saturating_mul(c);
        counts.push(c);
    }
    if total > cap {
        return Err(Error::TooLarge { what: "pure strategies", size: total, cap });
    }

    let mut index = vec![0u128; decisions.len()];
    let mut policies: Vec<Policy> =
        decisions.iter().map(|&dec| pure_policy(d, dec, 0)).collect::<Result<_>>()?;
    let mut best: Option<(f64, Vec<u128>)> = None;
    loop {
        let tables: Vec<&[f64]> = policies.iter().map(|p| p.table.as_slice()).collect();
        let value = eval.evaluate(&tables);
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, index.clone()));
        }
        // odometer, last decision fastest
        let mut k = decisions.len();
        loop {
            if k == 0 {
                let (value, idx) = best.expect("at least one strategy");
                let strategy = Strategy::new(
                    decisions.iter().zip(&idx).map(|(&dec, &i)| pure_policy(d, dec, i)).collect::<Result<Vec<_>>>()?,
                );
                return Ok((value, strategy));
            }
            k -= 1;
            index[k] += 1;
            if index[k] < counts[k] {
                policies[k] = pure_policy(d, decisions[k], index[k])?;
                break;
            }
            index[k] = 0;
            policies[k] = pure_policy(d, decisions[k], 0)?;
        }
    }
}
