//! Finite-difference verification of the analytic loss gradient.

use rand::Rng as _;

use super::loss::{batch_loss, batch_loss_and_grad, GraphGrad};
use super::TrainedGraph;
use crate::catalog::{FactTriple, GraphFacts};
use crate::rng::Rng;

/// Parameter groups of a graph, in a fixed order.
pub const GROUPS: [&str; 7] = [
    "skill_vectors",
    "env_encoder",
    "task_encoder",
    "env_relation.normal",
    "env_relation.translation",
    "task_relation.normal",
    "task_relation.translation",
];

fn group_mut(g: &mut TrainedGraph<f64>, k: usize) -> Vec<&mut f64> {
    match k {
        0 => g.skill_vectors.iter_mut().flatten().collect(),
        1 => g.env_encoder.params_mut().collect(),
        2 => g.task_encoder.params_mut().collect(),
        3 => g.env_relation.normal.iter_mut().collect(),
        4 => g.env_relation.translation.iter_mut().collect(),
        5 => g.task_relation.normal.iter_mut().collect(),
        6 => g.task_relation.translation.iter_mut().collect(),
        _ => unreachable!("seven groups"),
    }
}

fn group_grad(g: &GraphGrad<f64>, k: usize) -> Vec<f64> {
    match k {
        0 => g.skill_vectors.iter().flatten().copied().collect(),
        1 => g.env_encoder.params().copied().collect(),
        2 => g.task_encoder.params().copied().collect(),
        3 => g.env_relation.normal.clone(),
        4 => g.env_relation.translation.clone(),
        5 => g.task_relation.normal.clone(),
        6 => g.task_relation.translation.clone(),
        _ => unreachable!("seven groups"),
    }
}

/// Outcome of checking one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupCheck {
    pub group: &'static str,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

/// Compares the analytic directional derivative of the batch loss along a
/// random unit direction inside each parameter group against a central
/// difference with step `h`.
///
/// The error is relative to the group's gradient norm, which bounds the
/// derivative along any unit direction; a direction nearly orthogonal to the
/// gradient would otherwise measure only rounding noise. Groups whose gradient
/// and difference are both below `1e-10` report zero error.
pub fn check_batch(
    graph: &TrainedGraph<f64>,
    facts: &GraphFacts,
    batch: &[FactTriple],
    ortho_weight: f64,
    h: f64,
    rng: &mut Rng,
) -> Vec<GroupCheck> {
    let (_, grad) = batch_loss_and_grad(graph, facts, batch, ortho_weight);
    let total = |g: &TrainedGraph<f64>| {
        let mut l = batch_loss(g, facts, batch);
        if ortho_weight > 0.0 {
            l += ortho_weight
                * (super::loss::orthogonality_penalty(&g.env_relation)
                    + super::loss::orthogonality_penalty(&g.task_relation));
        }
        l
    };
    (0..GROUPS.len())
        .map(|k| {
            let gk = group_grad(&grad, k);
            let mut dir: Vec<f64> = (0..gk.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            dir.iter_mut().for_each(|v| *v /= n);
            let analytic: f64 = gk.iter().zip(&dir).map(|(a, b)| a * b).sum();
            let shifted = |sign: f64| {
                let mut g = graph.clone();
                for (p, d) in group_mut(&mut g, k).into_iter().zip(&dir) {
                    *p += sign * h * d;
                }
                total(&g)
            };
            let numeric = (shifted(1.0) - shifted(-1.0)) / (2.0 * h);
            let grad_norm = gk.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = grad_norm.max(numeric.abs());
            let rel_error = if scale < 1e-10 { 0.0 } else { (analytic - numeric).abs() / scale };
            GroupCheck {
                group: GROUPS[k],
                analytic,
                numeric,
                rel_error,
            }
        })
        .collect()
}
