use std::collections::BTreeMap;

use super::{FittedSem, Link, NodeFit, SemError, StructuralEquation};
use crate::data::Dataset;
use crate::graph::{CausalGraph, NodeKind, Role};
use crate::linalg;
use crate::logistic::{self, GdOptions};
use crate::scalar::Scalar;

pub const MIN_ROWS_PER_COEFFICIENT: usize = 10;
pub const MAX_LOGISTIC_ITERATIONS: usize = 5000;
const LOGISTIC_TOL: f64 = 1e-6;

/// Regresses every non-root feature node on its graph parents: ordinary
/// least squares for continuous nodes, logistic regression for binary ones.
pub fn fit_sem<T: Scalar>(graph: &CausalGraph, data: &Dataset<T>) -> Result<FittedSem<T>, SemError> {
    let mut columns: BTreeMap<&str, Vec<T>> = BTreeMap::new();
    for n in graph.nodes() {
        if n.role == Role::Outcome {
            continue;
        }
        let col = data
            .column(&n.name)
            .ok_or_else(|| SemError::MissingColumn(n.name.clone()))?;
        columns.insert(n.name.as_str(), col);
    }

    let mut equations = Vec::new();
    let mut diagnostics = BTreeMap::new();
    for n in graph.nodes() {
        if n.role == Role::Outcome {
            continue;
        }
        let parents = graph.parents(&n.name);
        if parents.is_empty() {
            continue;
        }
        let coefficients = parents.len() + 1;
        let needed = MIN_ROWS_PER_COEFFICIENT * coefficients;
        if data.n_rows() < needed {
            return Err(SemError::InsufficientRows {
                node: n.name.clone(),
                rows: data.n_rows(),
                coefficients,
                needed,
            });
        }
        let y = &columns[n.name.as_str()];
        let xs: Vec<Vec<T>> = parents.iter().map(|p| columns[p].clone()).collect();

        // collinearity is checked on the same design for both link types
        let mut design = Vec::with_capacity(coefficients);
        design.push(vec![T::one(); data.n_rows()]);
        design.extend(xs.iter().cloned());
        let ls = linalg::least_squares(&design, y).map_err(|rd| {
            let name = |i: usize| {
                if i == 0 {
                    "(intercept)".to_string()
                } else {
                    parents[i - 1].to_string()
                }
            };
            SemError::RankDeficient {
                node: n.name.clone(),
                column: name(rd.column),
                collinear_with: rd.depends_on.into_iter().map(name).collect(),
            }
        })?;

        let parent_names: Vec<String> = parents.iter().map(|p| p.to_string()).collect();
        match n.kind {
            NodeKind::Continuous => {
                let mut std_errors: BTreeMap<String, T> = parent_names
                    .iter()
                    .cloned()
                    .zip(ls.std_errors[1..].iter().copied())
                    .collect();
                std_errors.insert("(intercept)".into(), ls.std_errors[0]);
                diagnostics.insert(
                    n.name.clone(),
                    NodeFit {
                        r2: Some(ls.r2),
                        accuracy: None,
                        std_errors,
                    },
                );
                equations.push(StructuralEquation {
                    node: n.name.clone(),
                    parents: parent_names,
                    weights: ls.coef[1..].to_vec(),
                    intercept: ls.coef[0],
                    link: Link::Identity,
                    residual_scale: ls.residual_sd,
                    gated: Vec::new(),
                });
            }
            NodeKind::Binary => {
                let fit = logistic::fit(
                    &xs,
                    y,
                    GdOptions {
                        step: None,
                        max_iter: MAX_LOGISTIC_ITERATIONS,
                        tol: T::of(LOGISTIC_TOL),
                        l2: T::zero(),
                    },
                );
                if !fit.converged {
                    return Err(SemError::NonConvergence {
                        node: n.name.clone(),
                        iterations: fit.iterations,
                        grad_norm: fit.grad_norm.as_f64(),
                    });
                }
                let eq = StructuralEquation {
                    node: n.name.clone(),
                    parents: parent_names,
                    weights: fit.weights,
                    intercept: fit.intercept,
                    link: Link::Logistic,
                    residual_scale: T::zero(),
                    gated: Vec::new(),
                };
                let half = T::of(0.5);
                let correct = (0..data.n_rows())
                    .filter(|&i| {
                        let pv: Vec<T> = xs.iter().map(|c| c[i]).collect();
                        let pred = if eq.mean(&pv) >= half { T::one() } else { T::zero() };
                        pred == y[i]
                    })
                    .count();
                diagnostics.insert(
                    n.name.clone(),
                    NodeFit {
                        r2: None,
                        accuracy: Some(T::of(correct as f64 / data.n_rows() as f64)),
                        std_errors: BTreeMap::new(),
                    },
                );
                equations.push(eq);
            }
        }
    }
    Ok(FittedSem::new(graph.clone(), equations)?.with_diagnostics(diagnostics))
}
