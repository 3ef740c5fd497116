//! JSON interchange format for diagrams and decompositions.
//!
//! Variables are referred to by their `id` string everywhere. Tables use the
//! child-fastest layout of the core crate with parents in the listed order.
//! Keys are emitted in sorted order and variables in declaration order, which
//! fixes the variable numbering.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use limid_core::model::{validate_diagram, Cpt, RewardTable, ValidationReport};
use limid_core::treedecomp::{validate_decomposition, DecompositionReport};
use limid_core::{InfluenceDiagram, TreeDecomposition, VarId, VarKind, Variable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagramDocument {
    #[serde(default)]
    pub arcs: Vec<[String; 2]>,
    #[serde(default)]
    pub cpts: BTreeMap<String, TableDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<DecompositionDoc>,
    /// Set by `reduce`; ignored when parsing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduction: Option<ReductionMeta>,
    #[serde(default)]
    pub rewards: BTreeMap<String, TableDoc>,
    pub variables: Vec<VariableDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cardinality: Option<usize>,
    pub id: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableDoc {
    pub parents: Vec<String>,
    pub table: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionDoc {
    pub clusters: Vec<Vec<String>>,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionMeta {
    pub lower: f64,
    pub q: usize,
    pub upper: f64,
}

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("variables[{index}] ({id}): unknown kind {kind:?}")]
    UnknownKind { index: usize, id: String, kind: String },
    #[error("variables[{index}] ({id}): missing cardinality")]
    MissingCardinality { index: usize, id: String },
    #[error("{context}: unknown variable {id:?}")]
    UnknownVariable { context: String, id: String },
    #[error("invalid diagram:\n{0}")]
    Invalid(ValidationReport),
    #[error("invalid decomposition:\n{0}")]
    InvalidDecomposition(DecompositionReport),
}

fn resolve(ids: &BTreeMap<&str, VarId>, context: impl Fn() -> String, id: &str) -> Result<VarId, DocumentError> {
    ids.get(id).copied().ok_or_else(|| DocumentError::UnknownVariable { context: context(), id: id.to_owned() })
}

impl DiagramDocument {
    /// Builds the diagram and decomposition without validating either.
    pub fn to_model(&self) -> Result<(InfluenceDiagram, Option<TreeDecomposition>), DocumentError> {
        let mut ids: BTreeMap<&str, VarId> = BTreeMap::new();
        let mut variables = Vec::with_capacity(self.variables.len());
        for (index, v) in self.variables.iter().enumerate() {
            let kind = match v.kind.as_str() {
                "chance" => VarKind::Chance,
                "decision" => VarKind::Decision,
                "value" => VarKind::Value,
                other => return Err(DocumentError::UnknownKind { index, id: v.id.clone(), kind: other.to_owned() }),
            };
            let cardinality = match (kind, v.cardinality) {
                (VarKind::Value, c) => c.unwrap_or(0),
                (_, Some(c)) => c,
                (_, None) => return Err(DocumentError::MissingCardinality { index, id: v.id.clone() }),
            };
            // duplicates keep the first id and are reported by validation
            ids.entry(v.id.as_str()).or_insert(VarId(index));
            variables.push(Variable { name: v.id.clone(), kind, cardinality, states: v.states.clone() });
        }

        let arcs = self
            .arcs
            .iter()
            .enumerate()
            .map(|(i, [a, b])| {
                let ctx = || format!("arcs[{i}]");
                Ok((resolve(&ids, ctx, a)?, resolve(&ids, ctx, b)?))
            })
            .collect::<Result<Vec<_>, DocumentError>>()?;

        let tables = |section: &str, map: &BTreeMap<String, TableDoc>| {
            map.iter()
                .map(|(id, t)| {
                    let ctx = || format!("{section}.{id}");
                    let owner = resolve(&ids, ctx, id)?;
                    let parents =
                        t.parents.iter().map(|p| resolve(&ids, ctx, p)).collect::<Result<Vec<_>, DocumentError>>()?;
                    Ok((owner, parents, t.table.clone()))
                })
                .collect::<Result<Vec<_>, DocumentError>>()
        };
        let cpts = tables("cpts", &self.cpts)?
            .into_iter()
            .map(|(id, parents, table)| (id, Cpt { parents, table }))
            .collect();
        let rewards = tables("rewards", &self.rewards)?
            .into_iter()
            .map(|(id, parents, table)| (id, RewardTable { parents, table }))
            .collect();
        let diagram = InfluenceDiagram::from_parts(variables, arcs, cpts, rewards);

        let decomposition = match &self.decomposition {
            None => None,
            Some(dd) => {
                let clusters = dd
                    .clusters
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        c.iter()
                            .map(|x| resolve(&ids, || format!("decomposition.clusters[{i}]"), x))
                            .collect::<Result<Vec<_>, DocumentError>>()
                    })
                    .collect::<Result<Vec<_>, DocumentError>>()?;
                let edges = dd.edges.iter().map(|&[a, b]| (a, b)).collect();
                Some(TreeDecomposition::new(clusters, edges).with_root(dd.root))
            }
        };
        Ok((diagram, decomposition))
    }

    pub fn from_model(d: &InfluenceDiagram, t: Option<&TreeDecomposition>) -> Self {
        let name = |v: VarId| d.name(v).to_owned();
        let names = |vs: &[VarId]| vs.iter().map(|&v| name(v)).collect::<Vec<_>>();
        DiagramDocument {
            arcs: d.arcs().iter().map(|&(a, b)| [name(a), name(b)]).collect(),
            cpts: d.cpts().iter().map(|(&v, c)| (name(v), TableDoc { parents: names(&c.parents), table: c.table.clone() })).collect(),
            decomposition: t.map(|t| DecompositionDoc {
                clusters: t.clusters().iter().map(|c| names(c)).collect(),
                edges: t.edges().iter().map(|&(a, b)| [a, b]).collect(),
                root: t.root(),
            }),
            reduction: None,
            rewards: d
                .rewards()
                .iter()
                .map(|(&v, r)| (name(v), TableDoc { parents: names(&r.parents), table: r.table.clone() }))
                .collect(),
            variables: d
                .variables()
                .iter()
                .map(|v| VariableDoc {
                    cardinality: (v.kind != VarKind::Value).then_some(v.cardinality),
                    id: v.name.clone(),
                    kind: v.kind.to_string(),
                    states: v.states.clone(),
                })
                .collect(),
        }
    }
}

/// Parses without validating.
pub fn parse_unvalidated(text: &str) -> Result<(InfluenceDiagram, Option<TreeDecomposition>), DocumentError> {
    serde_json::from_str::<DiagramDocument>(text)?.to_model()
}

/// Parses and validates the diagram and, when present, the decomposition.
pub fn parse(text: &str) -> Result<(InfluenceDiagram, Option<TreeDecomposition>), DocumentError> {
    let (d, t) = parse_unvalidated(text)?;
    let report = validate_diagram(&d);
    if !report.is_empty() {
        return Err(DocumentError::Invalid(report));
    }
    if let Some(t) = &t {
        let report = validate_decomposition(&d, t);
        if !report.is_empty() {
            return Err(DocumentError::InvalidDecomposition(report));
        }
    }
    Ok((d, t))
}

pub fn serialize(d: &InfluenceDiagram, t: Option<&TreeDecomposition>) -> String {
    to_json(&DiagramDocument::from_model(d, t))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIGURE_ONE: &str = r#"{
        "variables": [
            {"id": "D1", "kind": "decision", "cardinality": 2},
            {"id": "C1", "kind": "chance", "cardinality": 2},
            {"id": "D2", "kind": "decision", "cardinality": 2},
            {"id": "C2", "kind": "chance", "cardinality": 2},
            {"id": "V1", "kind": "value"},
            {"id": "V2", "kind": "value"}
        ],
        "arcs": [["D1", "C1"], ["C1", "C2"], ["D2", "C2"], ["C1", "V1"], ["C2", "V2"]],
        "cpts": {
            "C1": {"parents": ["D1"], "table": [0.9, 0.1, 0.4, 0.6]},
            "C2": {"parents": ["C1", "D2"], "table": [0.7, 0.3, 0.2, 0.8, 0.5, 0.5, 0.1, 0.9]}
        },
        "rewards": {
            "V1": {"parents": ["C1"], "table": [1.0, 0.2]},
            "V2": {"parents": ["C2"], "table": [0.5, 1.0]}
        }
    }"#;

    #[test]
    fn parses_figure_one() {
        let (d, t) = parse(FIGURE_ONE).unwrap();
        assert_eq!(d.num_variables(), 6);
        assert_eq!(d.value_vars().len(), 2);
        assert_eq!(d.decision_vars().len(), 2);
        assert!(t.is_none());
        let c2 = d.find("C2").unwrap();
        assert_eq!(d.cpt(c2).unwrap().parents, vec![d.find("C1").unwrap(), d.find("D2").unwrap()]);
    }

    #[test]
    fn empty_document() {
        let (d, t) = parse(r#"{"variables": []}"#).unwrap();
        assert_eq!(d.num_variables(), 0);
        assert!(t.is_none());
    }

    #[test]
    fn wrong_table_length_names_the_variable() {
        let text = FIGURE_ONE.replace("[0.9, 0.1, 0.4, 0.6]", "[0.9, 0.1, 0.4]");
        let err = parse(&text).unwrap_err();
        assert!(matches!(err, DocumentError::Invalid(_)));
        assert!(err.to_string().contains("C1"), "{err}");
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = parse("{\"variables\": [\n  {\"id\": }]}").unwrap_err();
        assert!(matches!(err, DocumentError::Json(_)));
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn bad_references() {
        let text = FIGURE_ONE.replace(r#"["D2", "C2"]"#, r#"["D9", "C2"]"#);
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("arcs[2]") && err.to_string().contains("D9"), "{err}");
        let text = FIGURE_ONE.replace(r#""kind": "value""#, r#""kind": "utility""#);
        assert!(matches!(parse(&text).unwrap_err(), DocumentError::UnknownKind { index: 4, .. }));
        let text = FIGURE_ONE.replace(r#"{"id": "D1", "kind": "decision", "cardinality": 2}"#, r#"{"id": "D1", "kind": "decision"}"#);
        assert!(matches!(parse(&text).unwrap_err(), DocumentError::MissingCardinality { index: 0, .. }));
    }

    #[test]
    fn round_trip() {
        let (d, _) = parse(FIGURE_ONE).unwrap();
        let text = serialize(&d, None);
        let (again, _) = parse(&text).unwrap();
        assert_eq!(again, d);
        assert_eq!(serialize(&again, None), text);
    }

    #[test]
    fn decomposition_is_checked() {
        let mut doc: DiagramDocument = serde_json::from_str(FIGURE_ONE).unwrap();
        doc.decomposition = Some(DecompositionDoc {
            clusters: vec![vec!["D1".into(), "C1".into()], vec!["C1".into(), "D2".into(), "C2".into()]],
            edges: vec![[0, 1]],
            root: Some(0),
        });
        let (d, t) = parse(&to_json(&doc)).unwrap();
        assert_eq!(t.as_ref().unwrap().width(), 2);
        assert_eq!(DiagramDocument::from_model(&d, t.as_ref()), doc);

        doc.decomposition.as_mut().unwrap().clusters[1].retain(|x| x != "D2");
        assert!(matches!(parse(&to_json(&doc)).unwrap_err(), DocumentError::InvalidDecomposition(_)));
    }
}
