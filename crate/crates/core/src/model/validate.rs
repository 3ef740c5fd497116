use std::collections::{BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

use super::{InfluenceDiagram, VarId, VarKind};

const COLUMN_TOLERANCE: f64 = 1e-12;

/// One broken invariant. Names refer to the offending variable.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("{0}: duplicate variable id")]
    DuplicateId(String),
    #[error("arc {0} -> {1} refers to an unknown variable")]
    DanglingArc(usize, usize),
    #[error("{0}: arc to itself")]
    SelfLoop(String),
    #[error("arcs contain a directed cycle")]
    Cycle,
    #[error("{0}: value variable has child {1}")]
    ValueHasChild(String, String),
    #[error("{0}: {1} variable needs cardinality >= 1")]
    BadCardinality(String, VarKind),
    #[error("{0}: value variable must not carry a cardinality")]
    ValueCardinality(String),
    #[error("{0}: chance variable has no CPT")]
    MissingCpt(String),
    #[error("{0}: table attached to a {1} variable")]
    StrayTable(String, VarKind),
    #[error("{0}: table parents {1:?} do not match the arc parents {2:?}")]
    ParentMismatch(String, Vec<String>, Vec<String>),
    #[error("{0}: table has {1} entries, expected {2}")]
    TableShape(String, usize, usize),
    #[error("{0}: probability {1} outside [0, 1]")]
    BadProbability(String, f64),
    #[error("{0}: CPT column {1} sums to {2}")]
    ColumnSum(String, usize, f64),
    #[error("{0}: value variable has no reward table")]
    MissingReward(String),
    #[error("{0}: non-finite reward {1}")]
    NonFiniteReward(String, f64),
}

impl Violation {
    /// Name of the variable the violation is about, if any.
    pub fn variable(&self) -> Option<&str> {
        use Violation::*;
        match self {
            DuplicateId(v) | SelfLoop(v) | ValueHasChild(v, _) | BadCardinality(v, _)
            | ValueCardinality(v) | MissingCpt(v) | StrayTable(v, _) | ParentMismatch(v, _, _)
            | TableShape(v, _, _) | BadProbability(v, _) | ColumnSum(v, _, _) | MissingReward(v)
            | NonFiniteReward(v, _) => Some(v),
            DanglingArc(..) | Cycle => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn mentions(&self, name: &str) -> bool {
        self.violations.iter().any(|v| v.variable() == Some(name))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every diagram invariant. An empty report means the diagram is valid.
pub fn validate_diagram(d: &InfluenceDiagram) -> ValidationReport {
    let mut out = Vec::new();
    let n = d.num_variables();

    let mut seen = HashSet::new();
    for v in d.variables() {
        if !seen.insert(v.name.as_str()) {
            out.push(Violation::DuplicateId(v.name.clone()));
        }
    }

    let mut arcs_ok = true;
    for &(from, to) in d.arcs() {
        if from.0 >= n || to.0 >= n {
            out.push(Violation::DanglingArc(from.0, to.0));
            arcs_ok = false;
        } else if from == to {
            out.push(Violation::SelfLoop(d.name(from).to_owned()));
        }
    }
    if !arcs_ok {
        return ValidationReport { violations: out };
    }
    if d.topological_order().is_none() {
        out.push(Violation::Cycle);
    }

    for id in d.ids() {
        let var = d.variable(id);
        let name = &var.name;
        match var.kind {
            VarKind::Value => {
                for c in d.children(id) {
                    out.push(Violation::ValueHasChild(name.clone(), d.name(c).to_owned()));
                }
                if var.cardinality != 0 {
                    out.push(Violation::ValueCardinality(name.clone()));
                }
            }
            kind if var.cardinality == 0 => out.push(Violation::BadCardinality(name.clone(), kind)),
            _ => {}
        }
    }

    for (&id, cpt) in d.cpts() {
        if id.0 >= n {
            out.push(Violation::DanglingArc(id.0, id.0));
            continue;
        }
        let name = d.name(id).to_owned();
        if d.kind(id) != VarKind::Chance {
            out.push(Violation::StrayTable(name, d.kind(id)));
            continue;
        }
        if !check_parents(d, id, &cpt.parents, &mut out) {
            continue;
        }
        let card = d.cardinality(id);
        let gamma: usize = cpt.parents.iter().map(|&p| d.cardinality(p)).product();
        if cpt.table.len() != card * gamma {
            out.push(Violation::TableShape(name, cpt.table.len(), card * gamma));
            continue;
        }
        if card == 0 {
            continue;
        }
        if let Some(&p) = cpt.table.iter().find(|&&p| !(0.0..=1.0).contains(&p)) {
            out.push(Violation::BadProbability(name.clone(), p));
        }
        for (j, col) in cpt.table.chunks(card).enumerate() {
            let s: f64 = col.iter().sum();
            if (s - 1.0).abs() > COLUMN_TOLERANCE || s.is_nan() {
                out.push(Violation::ColumnSum(name.clone(), j, s));
            }
        }
    }

    for (&id, r) in d.rewards() {
        if id.0 >= n {
            out.push(Violation::DanglingArc(id.0, id.0));
            continue;
        }
        let name = d.name(id).to_owned();
        if d.kind(id) != VarKind::Value {
            out.push(Violation::StrayTable(name, d.kind(id)));
            continue;
        }
        if !check_parents(d, id, &r.parents, &mut out) {
            continue;
        }
        let gamma: usize = r.parents.iter().map(|&p| d.cardinality(p)).product();
        if r.table.len() != gamma {
            out.push(Violation::TableShape(name, r.table.len(), gamma));
            continue;
        }
        if let Some(&u) = r.table.iter().find(|u| !u.is_finite()) {
            out.push(Violation::NonFiniteReward(name, u));
        }
    }

    for id in d.ids() {
        match d.kind(id) {
            VarKind::Chance if d.cpt(id).is_none() => out.push(Violation::MissingCpt(d.name(id).to_owned())),
            VarKind::Value if d.reward(id).is_none() => {
                out.push(Violation::MissingReward(d.name(id).to_owned()))
            }
            _ => {}
        }
    }

    ValidationReport { violations: out }
}

fn check_parents(d: &InfluenceDiagram, id: VarId, listed: &[VarId], out: &mut Vec<Violation>) -> bool {
    let n = d.num_variables();
    let listed_set: BTreeSet<VarId> = listed.iter().copied().collect();
    let arc_set: BTreeSet<VarId> = d.parents(id).into_iter().collect();
    let names = |s: &mut dyn Iterator<Item = &VarId>| -> Vec<String> {
        s.map(|&v| if v.0 < n { d.name(v).to_owned() } else { v.to_string() }).collect()
    };
    if listed_set != arc_set || listed_set.len() != listed.len() || listed.iter().any(|p| p.0 >= n) {
        out.push(Violation::ParentMismatch(
            d.name(id).to_owned(),
            names(&mut listed.iter()),
            names(&mut arc_set.iter()),
        ));
        return false;
    }
    true
}
