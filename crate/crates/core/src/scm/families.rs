//! Synthetic generators reproducing the three residual-influence failure modes
//! plus a semi-synthetic heart-disease scenario, each with an analytic
//! ground-truth effect table on the logit scale.

use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{FittedSem, GatedTerm, SemError, StructuralEquation};
use crate::data::Dataset;
use crate::graph::{CausalGraph, CausalPath, NodeKind, NodeSpec, Role, DEFAULT_MAX_PATH_LENGTH};
use crate::predictor::LinearModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Target reaches the outcome only through two mediators.
    Proxy,
    /// Two mediated paths of equal size and opposite sign.
    Cancellation,
    /// Target reaches the outcome only inside a gated subpopulation.
    Subgroup,
    /// Proxy structure plus a confounder and a direct edge.
    Heart,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Proxy, Family::Cancellation, Family::Subgroup, Family::Heart];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Proxy => "proxy",
            Family::Cancellation => "cancellation",
            Family::Subgroup => "subgroup",
            Family::Heart => "heart",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = SemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| SemError::UnknownFamily(s.to_string()))
    }
}

/// One analytic effect: `path` is a path label, `TOTAL` or `DIRECT`;
/// `subgroup` is empty for population-wide rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub path: String,
    pub subgroup: String,
    pub effect: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub rows: Vec<TruthRow>,
}

impl GroundTruth {
    pub fn effect(&self, path: &str, subgroup: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.path == path && r.subgroup == subgroup)
            .map(|r| r.effect)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        std::fs::write(path, self.to_csv())
    }

    pub fn from_csv(text: &str) -> Result<Self, csv::Error> {
        let rows = csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<Result<_, _>>()?;
        Ok(Self { rows })
    }
}

/// Output of [`gen_failure_mode`].
#[derive(Debug, Clone)]
pub struct FailureFixture {
    pub family: Family,
    pub data: Dataset,
    pub graph: CausalGraph,
    pub sem: FittedSem,
    pub truth: GroundTruth,
    /// The generating outcome equation as a scorer over the outcome's parents.
    pub oracle_model: LinearModel,
    /// Gate column and threshold for the subgroup family.
    pub gate: Option<(String, f64)>,
}

const SUBGROUP_GATE: &str = "age";
/// Roughly the lower quartile of the gate distribution N(48, 12).
const SUBGROUP_BELOW: f64 = 40.0;

/// Samples `n` rows from the family's generator. `strength` scales every
/// target-to-mediator or mediator-to-outcome coefficient that carries the
/// target's influence.
pub fn gen_failure_mode(family: Family, n: usize, seed: u64, strength: f64) -> Result<FailureFixture, SemError> {
    if !(strength.is_finite() && strength > 0.0) {
        return Err(SemError::InvalidStrength(strength));
    }
    let s = strength;
    let (nodes, equations, gate) = match family {
        Family::Proxy => (
            vec![
                cont("age"),
                NodeSpec::new("smoking", Role::Target, NodeKind::Binary),
                cont("bp"),
                cont("bmi"),
                outcome("risk"),
            ],
            vec![
                StructuralEquation::linear("age", &[], 0.0, 1.0),
                StructuralEquation::logistic("smoking", &[], -0.847),
                StructuralEquation::linear("bp", &[("age", 0.3), ("smoking", s)], 0.0, 0.8),
                StructuralEquation::linear("bmi", &[("age", 0.2), ("smoking", 0.8 * s)], 0.0, 0.8),
                StructuralEquation::logistic("risk", &[("age", 0.3), ("bmi", 0.8), ("bp", 1.0)], -1.0),
            ],
            None,
        ),
        Family::Cancellation => (
            vec![
                NodeSpec::new("education", Role::Target, NodeKind::Continuous),
                cont("cscore"),
                cont("escore"),
                cont("nscore"),
                outcome("risk"),
            ],
            vec![
                StructuralEquation::linear("education", &[], 0.0, 1.0),
                StructuralEquation::linear("cscore", &[("education", 1.0)], 0.0, 1.0),
                StructuralEquation::linear("escore", &[("education", 1.0)], 0.0, 1.0),
                StructuralEquation::linear("nscore", &[], 0.0, 1.0),
                StructuralEquation::logistic("risk", &[("cscore", -s), ("escore", s), ("nscore", 0.5)], 0.0),
            ],
            None,
        ),
        Family::Subgroup => {
            let mean_age = 48.0;
            let age_weight = 0.02;
            (
                vec![
                    NodeSpec::new("bmi", Role::Target, NodeKind::Continuous),
                    cont("age"),
                    cont("bp"),
                    outcome("risk"),
                ],
                vec![
                    StructuralEquation::linear("bmi", &[], 0.0, 1.0),
                    StructuralEquation::linear("age", &[], mean_age, 12.0),
                    StructuralEquation::linear("bp", &[("bmi", 1.0)], 0.0, 0.5),
                    StructuralEquation::logistic("risk", &[("age", age_weight), ("bp", 0.0)], -0.5 - age_weight * mean_age)
                        .with_gated(GatedTerm {
                            feature: "bp".into(),
                            gate: SUBGROUP_GATE.into(),
                            below: SUBGROUP_BELOW,
                            weight: 0.6 * s,
                        }),
                ],
                Some((SUBGROUP_GATE.to_string(), SUBGROUP_BELOW)),
            )
        }
        Family::Heart => (
            vec![
                cont("age"),
                NodeSpec::new("smoking", Role::Target, NodeKind::Binary),
                cont("bp"),
                cont("bmi"),
                outcome("risk"),
            ],
            vec![
                StructuralEquation::linear("age", &[], 0.0, 1.0),
                StructuralEquation::logistic("smoking", &[("age", 0.4)], -0.85),
                StructuralEquation::linear("bp", &[("age", 0.3), ("smoking", s)], 0.0, 0.8),
                StructuralEquation::linear("bmi", &[("age", 0.2), ("smoking", 0.8 * s)], 0.0, 0.8),
                StructuralEquation::logistic(
                    "risk",
                    &[("age", 0.3), ("bmi", 0.8), ("bp", 1.0), ("smoking", 0.5 * s)],
                    -1.2,
                ),
            ],
            None,
        ),
    };

    let edges = equations
        .iter()
        .flat_map(|eq| eq.parents.iter().map(move |p| (p.clone(), eq.node.clone())))
        .collect();
    let graph = CausalGraph::new(nodes, edges)?;
    let sem = FittedSem::new(graph.clone(), equations)?;
    let data = super::sample_synthetic(&sem, n, seed)?;
    let truth = ground_truth(&sem, gate.as_ref())?;
    let outcome_eq = sem.equation(graph.outcome()).expect("outcome equation");
    let parents: Vec<&str> = outcome_eq.parents.iter().map(String::as_str).collect();
    let mut oracle_model = LinearModel::manual(&parents, &outcome_eq.weights, outcome_eq.intercept)
        .expect("generating coefficients are finite");
    for term in &outcome_eq.gated {
        oracle_model = oracle_model.with_gated(term.clone()).expect("gated parents are in schema");
    }
    Ok(FailureFixture {
        family,
        data,
        graph,
        sem,
        truth,
        oracle_model,
        gate,
    })
}

fn cont(name: &str) -> NodeSpec {
    NodeSpec::feature(name)
}

fn outcome(name: &str) -> NodeSpec {
    NodeSpec::new(name, Role::Outcome, NodeKind::Binary)
}

/// Per-path products of generating coefficients. Gated terms count as part
/// of their edge's weight inside the gate and not outside it.
fn ground_truth(sem: &FittedSem, gate: Option<&(String, f64)>) -> Result<GroundTruth, SemError> {
    let graph = sem.graph();
    let target = graph.target().expect("families declare a target").to_string();
    let paths = graph.enumerate_paths(DEFAULT_MAX_PATH_LENGTH)?;
    let edge_weight = |src: &str, dst: &str, inside: bool| {
        let eq = sem.equation(dst).expect("non-root node");
        let gated: f64 = eq
            .gated
            .iter()
            .filter(|g| inside && g.feature == src)
            .map(|g| g.weight)
            .sum();
        eq.weight(src).unwrap_or(0.0) + gated
    };
    let path_effect = |p: &CausalPath, inside: bool| p.edges().map(|(a, b)| edge_weight(a, b, inside)).product::<f64>();
    let scopes: Vec<(String, bool)> = match gate {
        None => vec![(String::new(), false)],
        Some((col, below)) => vec![(format!("{col}<{below}"), true), (format!("{col}>={below}"), false)],
    };
    let mut rows = Vec::new();
    for (label, inside) in scopes {
        let direct = if graph.has_edge(&target, graph.outcome()) {
            edge_weight(&target, graph.outcome(), inside)
        } else {
            0.0
        };
        let total: f64 = paths.paths.iter().map(|p| path_effect(p, inside)).sum();
        rows.push(TruthRow {
            path: "TOTAL".into(),
            subgroup: label.clone(),
            effect: total,
        });
        rows.push(TruthRow {
            path: "DIRECT".into(),
            subgroup: label.clone(),
            effect: direct,
        });
        for p in &paths.paths {
            rows.push(TruthRow {
                path: p.label(),
                subgroup: label.clone(),
                effect: path_effect(p, inside),
            });
        }
    }
    Ok(GroundTruth { rows })
}
