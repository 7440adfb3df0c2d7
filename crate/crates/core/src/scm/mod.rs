//! Linear structural causal models over a [`CausalGraph`].
//!
//! A [`FittedSem`] holds one [`StructuralEquation`] per non-root node. Root
//! nodes are exogenous unless an equation (intercept and noise scale only) is
//! supplied, which [`sample_synthetic`] needs to draw them.

mod counterfactual;
mod families;
mod fit;
mod sample;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::counterfactual::{counterfactual_row, BoundSem, EdgeMask, Intervention};
pub use self::families::{gen_failure_mode, Family, FailureFixture, GroundTruth, TruthRow};
pub use self::fit::{fit_sem, MAX_LOGISTIC_ITERATIONS, MIN_ROWS_PER_COEFFICIENT};
pub use self::sample::sample_synthetic;
use crate::data::DataError;
use crate::graph::{CausalGraph, GraphError, NodeKind, NodeSpec, Role};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SemError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("column `{0}` missing from data")]
    MissingColumn(String),
    #[error("node `{node}`: {rows} rows for {coefficients} coefficients (need {needed})")]
    InsufficientRows {
        node: String,
        rows: usize,
        coefficients: usize,
        needed: usize,
    },
    #[error("node `{node}`: design is rank deficient, `{column}` is collinear with [{}]", .collinear_with.join(", "))]
    RankDeficient {
        node: String,
        column: String,
        collinear_with: Vec<String>,
    },
    #[error("node `{node}`: logistic fit did not converge in {iterations} iterations (gradient norm {grad_norm:.3e})")]
    NonConvergence {
        node: String,
        iterations: usize,
        grad_norm: f64,
    },
    #[error("invalid equation for `{node}`: {reason}")]
    InvalidEquation { node: String, reason: String },
    #[error("node `{0}` has no structural equation")]
    MissingEquation(String),
    #[error("cannot intervene on the outcome node `{0}`")]
    OutcomeAssignment(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("edge {0} -> {1} is not in the graph")]
    UnknownEdge(String, String),
    #[error("sample size must be positive")]
    ZeroRows,
    #[error("strength must be positive, got {0}")]
    InvalidStrength(f64),
    #[error("unknown failure-mode family `{0}`")]
    UnknownFamily(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    #[default]
    Identity,
    Logistic,
}

/// Interaction term `weight * x[feature] * 1{x[gate] < below}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatedTerm<T = f64> {
    pub feature: String,
    pub gate: String,
    pub below: T,
    pub weight: T,
}

impl<T: Scalar> GatedTerm<T> {
    pub fn contribution(&self, feature: T, gate: T) -> T {
        if gate < self.below {
            self.weight * feature
        } else {
            T::zero()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralEquation<T = f64> {
    pub node: String,
    pub parents: Vec<String>,
    pub weights: Vec<T>,
    pub intercept: T,
    pub link: Link,
    pub residual_scale: T,
    pub gated: Vec<GatedTerm<T>>,
}

impl<T: Scalar> StructuralEquation<T> {
    pub fn linear(node: &str, parents: &[(&str, f64)], intercept: f64, residual_scale: f64) -> Self {
        Self {
            node: node.to_string(),
            parents: parents.iter().map(|(p, _)| p.to_string()).collect(),
            weights: parents.iter().map(|&(_, w)| T::of(w)).collect(),
            intercept: T::of(intercept),
            link: Link::Identity,
            residual_scale: T::of(residual_scale),
            gated: Vec::new(),
        }
    }

    pub fn logistic(node: &str, parents: &[(&str, f64)], intercept: f64) -> Self {
        Self {
            link: Link::Logistic,
            residual_scale: T::zero(),
            ..Self::linear(node, parents, intercept, 0.0)
        }
    }

    pub fn with_gated(mut self, term: GatedTerm<T>) -> Self {
        self.gated.push(term);
        self
    }

    pub fn weight(&self, parent: &str) -> Option<T> {
        self.parents
            .iter()
            .position(|p| p == parent)
            .map(|i| self.weights[i])
    }

    /// Linear predictor given parent values in `self.parents` order.
    pub fn eta(&self, parent_values: &[T]) -> T {
        let mut eta = parent_values
            .iter()
            .zip(&self.weights)
            .fold(self.intercept, |acc, (&x, &w)| acc + w * x);
        for g in &self.gated {
            let f = self.parents.iter().position(|p| *p == g.feature).expect("validated");
            let gate = self.parents.iter().position(|p| *p == g.gate).expect("validated");
            eta = eta + g.contribution(parent_values[f], parent_values[gate]);
        }
        eta
    }

    /// Conditional mean: `eta` for identity links, `P(node = 1)` for logistic.
    pub fn mean(&self, parent_values: &[T]) -> T {
        match self.link {
            Link::Identity => self.eta(parent_values),
            Link::Logistic => self.eta(parent_values).logistic(),
        }
    }
}

/// Per-node fit diagnostics.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeFit<T = f64> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<T>,
    /// Standard errors by parent name, plus `"(intercept)"`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub std_errors: BTreeMap<String, T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedSem<T = f64> {
    graph: CausalGraph,
    equations: BTreeMap<String, StructuralEquation<T>>,
    diagnostics: BTreeMap<String, NodeFit<T>>,
}

impl<T: Scalar> FittedSem<T> {
    /// Validates `equations` against `graph`: parents match the graph exactly,
    /// weights are aligned, logistic links only on binary nodes, and every
    /// non-root feature node has an equation.
    pub fn new(graph: CausalGraph, equations: Vec<StructuralEquation<T>>) -> Result<Self, SemError> {
        let mut map = BTreeMap::new();
        for eq in equations {
            validate_equation(&graph, &eq)?;
            let node = eq.node.clone();
            if map.insert(node.clone(), eq).is_some() {
                return Err(invalid(&node, "duplicate equation"));
            }
        }
        for n in graph.nodes() {
            if n.role != Role::Outcome && !graph.parents(&n.name).is_empty() && !map.contains_key(&n.name) {
                return Err(SemError::MissingEquation(n.name.clone()));
            }
        }
        Ok(Self {
            graph,
            equations: map,
            diagnostics: BTreeMap::new(),
        })
    }

    pub fn with_diagnostics(mut self, diagnostics: BTreeMap<String, NodeFit<T>>) -> Self {
        self.diagnostics = diagnostics;
        self
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn equation(&self, node: &str) -> Option<&StructuralEquation<T>> {
        self.equations.get(node)
    }

    pub fn equations(&self) -> impl Iterator<Item = &StructuralEquation<T>> {
        self.equations.values()
    }

    pub fn diagnostics(&self) -> &BTreeMap<String, NodeFit<T>> {
        &self.diagnostics
    }

    /// Rebinds the target role; equations are unaffected.
    pub fn with_target(&self, target: &str) -> Result<Self, SemError> {
        Ok(Self {
            graph: self.graph.with_target(target)?,
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> String {
        let nodes = self
            .graph
            .nodes()
            .iter()
            .map(|n| {
                let eq = self.equations.get(&n.name);
                SemNodeFile {
                    spec: n.clone(),
                    weights: eq.map(|e| {
                        e.parents
                            .iter()
                            .cloned()
                            .zip(e.weights.iter().copied())
                            .collect()
                    }),
                    intercept: eq.map(|e| e.intercept),
                    link: eq.map(|e| e.link),
                    residual_scale: eq.map(|e| e.residual_scale),
                    gated: eq.map(|e| e.gated.clone()).unwrap_or_default(),
                    fit: self.diagnostics.get(&n.name).cloned(),
                }
            })
            .collect();
        serde_json::to_string_pretty(&SemFile {
            nodes,
            edges: self.graph.edges().to_vec(),
        })
        .expect("sem serializes")
    }
}

fn invalid(node: &str, reason: impl Into<String>) -> SemError {
    SemError::InvalidEquation {
        node: node.to_string(),
        reason: reason.into(),
    }
}

fn validate_equation<T: Scalar>(graph: &CausalGraph, eq: &StructuralEquation<T>) -> Result<(), SemError> {
    let spec = graph
        .node(&eq.node)
        .ok_or_else(|| SemError::UnknownNode(eq.node.clone()))?;
    if eq.weights.len() != eq.parents.len() {
        return Err(invalid(&eq.node, "weights and parents differ in length"));
    }
    let declared: BTreeSet<&str> = eq.parents.iter().map(String::as_str).collect();
    let actual: BTreeSet<&str> = graph.parents(&eq.node).into_iter().collect();
    if declared.len() != eq.parents.len() || declared != actual {
        return Err(invalid(
            &eq.node,
            format!("parents {:?} do not match graph parents {:?}", eq.parents, actual),
        ));
    }
    if !(eq.residual_scale >= T::zero()) {
        return Err(invalid(&eq.node, "residual_scale must be nonnegative"));
    }
    if eq.link == Link::Logistic && spec.kind != NodeKind::Binary {
        return Err(invalid(&eq.node, "logistic link requires a binary node"));
    }
    if !eq.intercept.is_finite() || eq.weights.iter().any(|w| !w.is_finite()) {
        return Err(invalid(&eq.node, "coefficients must be finite"));
    }
    for g in &eq.gated {
        if !declared.contains(g.feature.as_str()) || !declared.contains(g.gate.as_str()) {
            return Err(invalid(&eq.node, "gated term must reference parents"));
        }
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
struct SemNodeFile<T> {
    #[serde(flatten)]
    spec: NodeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<BTreeMap<String, T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intercept: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    link: Option<Link>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    residual_scale: Option<T>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    gated: Vec<GatedTerm<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fit: Option<NodeFit<T>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
struct SemFile<T> {
    nodes: Vec<SemNodeFile<T>>,
    #[serde(default)]
    edges: Vec<(String, String)>,
}

/// Parses a SEM file: a graph file whose nodes may carry
/// `weights` (parent -> coefficient), `intercept`, `link`, `residual_scale`
/// and `gated` terms. Nodes with none of these have no equation.
pub fn parse_sem<T: Scalar>(text: &str) -> Result<FittedSem<T>, SemError> {
    let file: SemFile<T> = serde_json::from_str(text).map_err(|e| SemError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let graph = CausalGraph::new(
        file.nodes.iter().map(|n| n.spec.clone()).collect(),
        file.edges,
    )?;
    let mut equations = Vec::new();
    let mut diagnostics = BTreeMap::new();
    for n in file.nodes {
        let name = n.spec.name.clone();
        if let Some(fit) = n.fit {
            diagnostics.insert(name.clone(), fit);
        }
        let has_eq = n.weights.is_some() || n.intercept.is_some() || n.link.is_some() || n.residual_scale.is_some();
        if !has_eq {
            continue;
        }
        let weights = n.weights.unwrap_or_default();
        let parents: Vec<String> = graph.parents(&name).iter().map(|p| p.to_string()).collect();
        for key in weights.keys() {
            if !parents.contains(key) {
                return Err(invalid(&name, format!("weight for non-parent `{key}`")));
            }
        }
        let w = parents
            .iter()
            .map(|p| {
                weights
                    .get(p)
                    .copied()
                    .ok_or_else(|| invalid(&name, format!("missing weight for parent `{p}`")))
            })
            .collect::<Result<Vec<T>, _>>()?;
        equations.push(StructuralEquation {
            node: name,
            parents,
            weights: w,
            intercept: n.intercept.unwrap_or_default(),
            link: n.link.unwrap_or_default(),
            residual_scale: n.residual_scale.unwrap_or_default(),
            gated: n.gated,
        });
    }
    Ok(FittedSem::new(graph, equations)?.with_diagnostics(diagnostics))
}
