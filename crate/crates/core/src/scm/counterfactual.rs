//! Residual-preserving, edge-selective counterfactuals.
//!
//! Each node keeps its abducted residual (observed value minus the equation's
//! prediction from observed parents). Walking the graph in topological order,
//! a node is recomputed from a mix of parent values: the counterfactual value
//! through active edges and the observed value through inactive ones.
//! Nodes with no changed active parent keep their observed value bit for bit.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{FittedSem, Link, SemError, StructuralEquation};
use crate::graph::Role;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Intervention<T = f64> {
    pub assignments: BTreeMap<String, T>,
    pub active_edges: BTreeSet<(String, String)>,
}

impl<T: Scalar> Intervention<T> {
    pub fn assign(node: &str, value: T) -> Self {
        Self {
            assignments: BTreeMap::from([(node.to_string(), value)]),
            active_edges: BTreeSet::new(),
        }
    }

    pub fn through<'e>(mut self, edges: impl IntoIterator<Item = (&'e str, &'e str)>) -> Self {
        self.active_edges
            .extend(edges.into_iter().map(|(a, b)| (a.to_string(), b.to_string())));
        self
    }

    /// Activates every graph edge.
    pub fn through_all(mut self, sem: &FittedSem<T>) -> Self {
        self.active_edges.extend(sem.graph().edges().iter().cloned());
        self
    }
}

struct NodePlan<'a, T> {
    col: usize,
    eq: Option<&'a StructuralEquation<T>>,
    parent_cols: Vec<usize>,
    parent_names: Vec<&'a str>,
    name: &'a str,
}

/// A SEM bound to a concrete row layout.
pub struct BoundSem<'a, T = f64> {
    sem: &'a FittedSem<T>,
    plan: Vec<NodePlan<'a, T>>,
    columns: HashMap<&'a str, usize>,
    width: usize,
}

/// Per-node, per-parent activity flags aligned with a [`BoundSem`].
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMask {
    active: Vec<Vec<bool>>,
}

impl<'a, T: Scalar> BoundSem<'a, T> {
    /// Binds to rows laid out as `columns`; every non-outcome graph node must
    /// be present. Extra columns pass through untouched.
    pub fn bind(sem: &'a FittedSem<T>, columns: &[&str]) -> Result<Self, SemError> {
        let graph = sem.graph();
        let mut map = HashMap::new();
        for n in graph.nodes() {
            if n.role == Role::Outcome {
                continue;
            }
            let c = columns
                .iter()
                .position(|&c| c == n.name)
                .ok_or_else(|| SemError::MissingColumn(n.name.clone()))?;
            map.insert(n.name.as_str(), c);
        }
        let outcome = graph.outcome();
        let plan = graph
            .kahn_order()
            .expect("validated graph")
            .into_iter()
            .map(|i| &graph.nodes()[i])
            .filter(|n| n.name != outcome)
            .map(|n| {
                let eq = sem.equation(&n.name);
                let parent_names: Vec<&str> = match eq {
                    Some(e) => e.parents.iter().map(String::as_str).collect(),
                    None => Vec::new(),
                };
                NodePlan {
                    col: map[n.name.as_str()],
                    eq,
                    parent_cols: parent_names.iter().map(|p| map[p]).collect(),
                    parent_names,
                    name: n.name.as_str(),
                }
            })
            .collect();
        Ok(Self {
            sem,
            plan,
            columns: map,
            width: columns.len(),
        })
    }

    pub fn column_of(&self, node: &str) -> Option<usize> {
        self.columns.get(node).copied()
    }

    /// Column index for an assignment target; the outcome cannot be assigned.
    pub fn assignment_column(&self, node: &str) -> Result<usize, SemError> {
        if node == self.sem.graph().outcome() {
            return Err(SemError::OutcomeAssignment(node.to_string()));
        }
        self.column_of(node)
            .ok_or_else(|| SemError::UnknownNode(node.to_string()))
    }

    /// Compiles an edge set; edges into the outcome are accepted and ignored
    /// here (they govern what the model sees, not feature propagation).
    pub fn mask(&self, active_edges: &BTreeSet<(String, String)>) -> Result<EdgeMask, SemError> {
        let graph = self.sem.graph();
        for (a, b) in active_edges {
            if !graph.has_edge(a, b) {
                return Err(SemError::UnknownEdge(a.clone(), b.clone()));
            }
        }
        let active = self
            .plan
            .iter()
            .map(|p| {
                p.parent_names
                    .iter()
                    .map(|&parent| active_edges.contains(&(parent.to_string(), p.name.to_string())))
                    .collect()
            })
            .collect();
        Ok(EdgeMask { active })
    }

    /// Counterfactual row for pre-resolved `(column, value)` assignments.
    pub fn counterfactual(&self, row: &[T], mask: &EdgeMask, assignments: &[(usize, T)]) -> Vec<T> {
        debug_assert_eq!(row.len(), self.width);
        let mut cf = row.to_vec();
        let mut changed = vec![false; row.len()];
        let mut observed_parents = Vec::new();
        let mut mixed_parents = Vec::new();
        for (plan, active) in self.plan.iter().zip(&mask.active) {
            if let Some(&(_, v)) = assignments.iter().find(|(c, _)| *c == plan.col) {
                cf[plan.col] = v;
                changed[plan.col] = v != row[plan.col];
                continue;
            }
            let Some(eq) = plan.eq else { continue };
            let touched = plan
                .parent_cols
                .iter()
                .zip(active)
                .any(|(&p, &on)| on && changed[p]);
            if !touched {
                continue;
            }
            observed_parents.clear();
            mixed_parents.clear();
            for (&p, &on) in plan.parent_cols.iter().zip(active) {
                observed_parents.push(row[p]);
                mixed_parents.push(if on { cf[p] } else { row[p] });
            }
            let observed = row[plan.col];
            let value = match eq.link {
                Link::Identity => observed + (eq.eta(&mixed_parents) - eq.eta(&observed_parents)),
                Link::Logistic => {
                    let residual = observed - eq.mean(&observed_parents);
                    if eq.mean(&mixed_parents) + residual >= T::of(0.5) {
                        T::one()
                    } else {
                        T::zero()
                    }
                }
            };
            cf[plan.col] = value;
            changed[plan.col] = value != observed;
        }
        cf
    }

    pub fn apply(&self, row: &[T], intervention: &Intervention<T>) -> Result<Vec<T>, SemError> {
        let mask = self.mask(&intervention.active_edges)?;
        let assignments = intervention
            .assignments
            .iter()
            .map(|(node, &v)| Ok((self.assignment_column(node)?, v)))
            .collect::<Result<Vec<_>, SemError>>()?;
        Ok(self.counterfactual(row, &mask, &assignments))
    }
}

/// Abduction, action and prediction for a single row laid out as `columns`.
pub fn counterfactual_row<T: Scalar>(
    sem: &FittedSem<T>,
    columns: &[&str],
    row: &[T],
    intervention: &Intervention<T>,
) -> Result<Vec<T>, SemError> {
    BoundSem::bind(sem, columns)?.apply(row, intervention)
}
