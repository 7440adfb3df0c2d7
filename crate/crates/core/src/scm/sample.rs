use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{FittedSem, Link, SemError};
use crate::data::{Column, Dataset};
use crate::graph::Role;
use crate::scalar::Scalar;

/// Draws `n` rows ancestrally in topological order: Gaussian noise for
/// identity links, Bernoulli draws for logistic links.
///
/// Every feature node needs an equation (roots: intercept and noise scale).
/// The outcome column is emitted only when it has an equation.
pub fn sample_synthetic<T: Scalar>(sem: &FittedSem<T>, n: usize, seed: u64) -> Result<Dataset<T>, SemError> {
    if n == 0 {
        return Err(SemError::ZeroRows);
    }
    let graph = sem.graph();
    let mut emitted: Vec<&str> = Vec::new();
    for node in graph.nodes() {
        if sem.equation(&node.name).is_some() {
            emitted.push(&node.name);
        } else if node.role != Role::Outcome {
            return Err(SemError::MissingEquation(node.name.clone()));
        }
    }
    let position = |name: &str| emitted.iter().position(|&e| e == name).expect("emitted");

    // (output column, equation, parent columns) in topological order
    let plan: Vec<_> = graph
        .topological_order()
        .into_iter()
        .filter_map(|name| {
            let eq = sem.equation(&name)?;
            let parents: Vec<usize> = eq.parents.iter().map(|p| position(p)).collect();
            Some((position(&name), eq, parents))
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut parent_values = Vec::new();
    for _ in 0..n {
        let mut row = vec![T::zero(); emitted.len()];
        for (col, eq, parents) in &plan {
            parent_values.clear();
            parent_values.extend(parents.iter().map(|&p| row[p]));
            row[*col] = match eq.link {
                Link::Identity => {
                    let noise: f64 = rng.sample(StandardNormal);
                    eq.eta(&parent_values) + eq.residual_scale * T::of(noise)
                }
                Link::Logistic => {
                    let p = eq.mean(&parent_values).as_f64();
                    if rng.gen::<f64>() < p {
                        T::one()
                    } else {
                        T::zero()
                    }
                }
            };
        }
        rows.push(row);
    }
    let columns = emitted
        .iter()
        .map(|&name| Column::new(name, graph.node(name).expect("graph node").kind))
        .collect();
    Ok(Dataset::new(columns, rows)?)
}
