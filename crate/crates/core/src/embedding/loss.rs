//! Contrastive loss over positive, negative and soft triples, with analytic gradients.

use super::transh::{score_backward, RelationEmbedding, ScoreGrad};
use super::{ContextEncoder, TrainedGraph};
use crate::catalog::{Entity, FactTriple, GraphFacts, RelationKind, TripleKind};
use crate::scalar::dot;
use crate::Real;

/// Per-triple term: `(S-1)²`, `S²`, or `max(0, S - 1 + δ)`.
pub fn triple_loss<T: Real>(kind: TripleKind, score: T, margin: T) -> T {
    match kind {
        TripleKind::Positive => (score - T::one()).powi(2),
        TripleKind::Negative => score * score,
        TripleKind::Soft => (score - T::one() + margin).max(T::zero()),
    }
}

fn triple_loss_grad<T: Real>(kind: TripleKind, score: T, margin: T) -> T {
    let two = T::lit(2.0);
    match kind {
        TripleKind::Positive => two * (score - T::one()),
        TripleKind::Negative => two * score,
        TripleKind::Soft => {
            if score - T::one() + margin > T::zero() {
                T::one()
            } else {
                T::zero()
            }
        }
    }
}

/// Gradient accumulator with the same layout as the graph's parameters.
#[derive(Debug, Clone)]
pub struct GraphGrad<T: Real> {
    pub skill_vectors: Vec<Vec<T>>,
    pub env_encoder: ContextEncoder<T>,
    pub task_encoder: ContextEncoder<T>,
    pub env_relation: RelationEmbedding<T>,
    pub task_relation: RelationEmbedding<T>,
}

impl<T: Real> GraphGrad<T> {
    pub fn zeros(graph: &TrainedGraph<T>) -> Self {
        Self {
            skill_vectors: vec![vec![T::zero(); graph.dim]; graph.skill_vectors.len()],
            env_encoder: graph.env_encoder.zeros_like(),
            task_encoder: graph.task_encoder.zeros_like(),
            env_relation: RelationEmbedding::zeros(graph.dim),
            task_relation: RelationEmbedding::zeros(graph.dim),
        }
    }

    fn relation_mut(&mut self, kind: RelationKind) -> &mut RelationEmbedding<T> {
        match kind {
            RelationKind::EnvToSkill => &mut self.env_relation,
            RelationKind::TaskToSkill => &mut self.task_relation,
        }
    }

    /// Gradient entries in the order of [`TrainedGraph::params_mut`].
    pub fn values(&self) -> impl Iterator<Item = T> + '_ {
        self.skill_vectors
            .iter()
            .flatten()
            .chain(self.env_encoder.params())
            .chain(self.task_encoder.params())
            .chain(&self.env_relation.normal)
            .chain(&self.env_relation.translation)
            .chain(&self.task_relation.normal)
            .chain(&self.task_relation.translation)
            .copied()
    }

    /// `graph += alpha · self`.
    pub fn apply(&self, graph: &mut TrainedGraph<T>, alpha: T) {
        for (v, g) in graph.skill_vectors.iter_mut().zip(&self.skill_vectors) {
            for (p, &d) in v.iter_mut().zip(g) {
                *p = *p + alpha * d;
            }
        }
        graph.env_encoder.axpy(alpha, &self.env_encoder);
        graph.task_encoder.axpy(alpha, &self.task_encoder);
        graph.env_relation.axpy(alpha, &self.env_relation);
        graph.task_relation.axpy(alpha, &self.task_relation);
    }
}

enum Embedded<T: Real> {
    Env(super::mlp::ForwardCache<T>),
    Task(super::mlp::ForwardCache<T>),
    Skill(usize, Vec<T>),
}

impl<T: Real> Embedded<T> {
    fn new(graph: &TrainedGraph<T>, facts: &GraphFacts, e: Entity) -> Self {
        match e {
            Entity::Env(i) => {
                let x = facts.env_instances[i].features().map(T::lit);
                Embedded::Env(graph.env_encoder.forward_cached(&x))
            }
            Entity::Task(i) => {
                let x: Vec<T> = facts.task_instances[i].flat().into_iter().map(T::lit).collect();
                Embedded::Task(graph.task_encoder.forward_cached(&x))
            }
            Entity::Skill(i) => Embedded::Skill(i, graph.skill_vectors[i].clone()),
        }
    }

    fn vector(&self) -> &[T] {
        match self {
            Embedded::Env(c) | Embedded::Task(c) => c.output(),
            Embedded::Skill(_, v) => v,
        }
    }

    fn backward(&self, graph: &TrainedGraph<T>, g: &[T], grad: &mut GraphGrad<T>) {
        match self {
            Embedded::Env(c) => graph.env_encoder.backward(c, g, &mut grad.env_encoder),
            Embedded::Task(c) => graph.task_encoder.backward(c, g, &mut grad.task_encoder),
            Embedded::Skill(i, _) => {
                for (p, &d) in grad.skill_vectors[*i].iter_mut().zip(g) {
                    *p = *p + d;
                }
            }
        }
    }
}

/// Summed loss over `batch`.
pub fn batch_loss<T: Real>(graph: &TrainedGraph<T>, facts: &GraphFacts, batch: &[FactTriple]) -> T {
    batch
        .iter()
        .map(|t| triple_loss(t.kind, graph.score_triple(facts, t), T::lit(t.margin)))
        .sum()
}

/// Hyperplane orthogonality penalty `(w·d)² / ‖d‖²` for one relation.
pub fn orthogonality_penalty<T: Real>(rel: &RelationEmbedding<T>) -> T {
    let dd = dot(&rel.translation, &rel.translation);
    if dd > T::zero() {
        dot(&rel.normal, &rel.translation).powi(2) / dd
    } else {
        T::zero()
    }
}

fn orthogonality_backward<T: Real>(rel: &RelationEmbedding<T>, weight: T, grad: &mut RelationEmbedding<T>) {
    let dd = dot(&rel.translation, &rel.translation);
    if dd <= T::zero() {
        return;
    }
    let wd = dot(&rel.normal, &rel.translation);
    let two = T::lit(2.0);
    for i in 0..rel.normal.len() {
        grad.normal[i] = grad.normal[i] + weight * two * wd * rel.translation[i] / dd;
        grad.translation[i] = grad.translation[i]
            + weight * (two * wd * rel.normal[i] / dd - two * wd * wd * rel.translation[i] / (dd * dd));
    }
}

/// Summed loss over `batch` plus `ortho_weight` times both relations'
/// orthogonality penalties, and the gradient of that total.
pub fn batch_loss_and_grad<T: Real>(
    graph: &TrainedGraph<T>,
    facts: &GraphFacts,
    batch: &[FactTriple],
    ortho_weight: T,
) -> (T, GraphGrad<T>) {
    let mut grad = GraphGrad::zeros(graph);
    let mut total = T::zero();
    for t in batch {
        let head = Embedded::new(graph, facts, t.head);
        let tail = Embedded::new(graph, facts, t.tail);
        let rel = graph.relation(t.relation);
        let margin = T::lit(t.margin);
        let (score, _) = score_backward(head.vector(), rel, tail.vector(), graph.lambda, graph.mode, T::zero());
        total = total + triple_loss(t.kind, score, margin);
        let dl_ds = triple_loss_grad(t.kind, score, margin);
        if dl_ds == T::zero() {
            continue;
        }
        let (_, sg): (T, ScoreGrad<T>) =
            score_backward(head.vector(), rel, tail.vector(), graph.lambda, graph.mode, dl_ds);
        head.backward(graph, &sg.head, &mut grad);
        tail.backward(graph, &sg.tail, &mut grad);
        let rg = grad.relation_mut(t.relation);
        for i in 0..sg.normal.len() {
            rg.normal[i] = rg.normal[i] + sg.normal[i];
            rg.translation[i] = rg.translation[i] + sg.translation[i];
        }
    }
    if ortho_weight > T::zero() {
        for kind in [RelationKind::EnvToSkill, RelationKind::TaskToSkill] {
            let rel = graph.relation(kind);
            total = total + ortho_weight * orthogonality_penalty(rel);
            orthogonality_backward(rel, ortho_weight, grad.relation_mut(kind));
        }
    }
    (total, grad)
}
