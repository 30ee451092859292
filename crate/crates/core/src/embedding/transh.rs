//! Hyperplane-projected translation scores.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::scalar::{dot, norm};
use crate::Real;

/// How entities are compared under a relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Project head and tail onto the relation hyperplane, then translate.
    #[default]
    TransH,
    /// Plain translation `h + d - t`; the hyperplane normal is ignored.
    TransE,
}

/// Relation as a unit hyperplane normal `w` and a translation `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RelationEmbedding<T: Real> {
    pub normal: Vec<T>,
    pub translation: Vec<T>,
}

impl<T: Real> RelationEmbedding<T> {
    /// Both vectors uniform in `[-0.1, 0.1]`, then the normal rescaled to unit length.
    pub fn random(dim: usize, rng: &mut Rng) -> Self {
        let mut draw = || (0..dim).map(|_| T::lit(rng.random_range(-0.1..=0.1))).collect::<Vec<T>>();
        let mut rel = Self {
            normal: draw(),
            translation: draw(),
        };
        rel.normalize();
        rel
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            normal: vec![T::zero(); dim],
            translation: vec![T::zero(); dim],
        }
    }

    pub fn normalize(&mut self) {
        let n = norm(&self.normal);
        if n > T::zero() {
            self.normal.iter_mut().for_each(|v| *v = *v / n);
        }
    }

    pub fn axpy(&mut self, alpha: T, other: &Self) {
        for (p, &g) in self.normal.iter_mut().zip(&other.normal) {
            *p = *p + alpha * g;
        }
        for (p, &g) in self.translation.iter_mut().zip(&other.translation) {
            *p = *p + alpha * g;
        }
    }
}

/// `(h - wᵀh w) + d - (t - wᵀt w)`, or `h + d - t` in TransE mode.
pub fn residual<T: Real>(head: &[T], rel: &RelationEmbedding<T>, tail: &[T], mode: ScoreMode) -> Vec<T> {
    match mode {
        ScoreMode::TransE => head
            .iter()
            .zip(tail)
            .zip(&rel.translation)
            .map(|((&h, &t), &d)| h + d - t)
            .collect(),
        ScoreMode::TransH => {
            let wh = dot(&rel.normal, head);
            let wt = dot(&rel.normal, tail);
            head.iter()
                .zip(tail)
                .zip(rel.translation.iter().zip(&rel.normal))
                .map(|((&h, &t), (&d, &w))| (h - wh * w) + d - (t - wt * w))
                .collect()
        }
    }
}

/// `exp(-λ ‖residual‖)`, in `(0, 1]`.
pub fn transh_score<T: Real>(head: &[T], rel: &RelationEmbedding<T>, tail: &[T], lambda: T) -> T {
    score_with_mode(head, rel, tail, lambda, ScoreMode::TransH)
}

pub fn score_with_mode<T: Real>(
    head: &[T],
    rel: &RelationEmbedding<T>,
    tail: &[T],
    lambda: T,
    mode: ScoreMode,
) -> T {
    (-lambda * norm(&residual(head, rel, tail, mode))).exp()
}

/// Gradients of a scalar loss with respect to one score's inputs.
#[derive(Debug, Clone)]
pub struct ScoreGrad<T> {
    pub head: Vec<T>,
    pub tail: Vec<T>,
    pub normal: Vec<T>,
    pub translation: Vec<T>,
}

/// Score plus its backward pass for upstream gradient `dl_ds = ∂L/∂S`.
pub fn score_backward<T: Real>(
    head: &[T],
    rel: &RelationEmbedding<T>,
    tail: &[T],
    lambda: T,
    mode: ScoreMode,
    dl_ds: T,
) -> (T, ScoreGrad<T>) {
    let r = residual(head, rel, tail, mode);
    let n = norm(&r);
    let s = (-lambda * n).exp();
    let dim = r.len();
    // ∂S/∂r = -λ S r / ‖r‖; taken as zero at the kink r = 0
    let coef = if n > T::zero() { -lambda * s * dl_ds / n } else { T::zero() };
    let g_r: Vec<T> = r.iter().map(|&v| coef * v).collect();
    let grad = match mode {
        ScoreMode::TransE => ScoreGrad {
            head: g_r.clone(),
            tail: g_r.iter().map(|&v| -v).collect(),
            normal: vec![T::zero(); dim],
            translation: g_r,
        },
        ScoreMode::TransH => {
            let w = &rel.normal;
            let wg = dot(w, &g_r);
            let proj: Vec<T> = g_r.iter().zip(w).map(|(&g, &wi)| g - wg * wi).collect();
            let u: Vec<T> = head.iter().zip(tail).map(|(&h, &t)| h - t).collect();
            let wu = dot(w, &u);
            ScoreGrad {
                tail: proj.iter().map(|&v| -v).collect(),
                head: proj,
                normal: u
                    .iter()
                    .zip(&g_r)
                    .map(|(&ui, &gi)| -(wg * ui + wu * gi))
                    .collect(),
                translation: g_r,
            }
        }
    };
    (s, grad)
}
