//! Stochastic gradient descent over augmented triple batches.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use tracing::{debug, info};

use super::kernels::{SoftMargin, ENV_KAPPA_CAP, TASK_KAPPA_CAP};
use super::loss::{batch_loss_and_grad, GraphGrad};
use super::mlp::ContextEncoder;
use super::transh::{RelationEmbedding, ScoreMode};
use super::triples::{generate_triples, TripleConfig, TriplePools};
use super::{skill_entries, TrainedGraph, DEFAULT_LAMBDA, EMBED_DIM, MODEL_SCHEMA};
use crate::catalog::{GraphFacts, SkillCatalog, TASK_DIM};
use crate::rng::{stream, Stream};
use crate::{Error, Real, Result};

/// Update rule applied to the summed batch gradient.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    /// Adam with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub dim: usize,
    pub hidden: Vec<usize>,
    pub lambda: f64,
    pub lr: f64,
    /// Step size at epoch `k` is `lr / (1 + lr_decay · k)`.
    pub lr_decay: f64,
    pub epochs: usize,
    /// Positive facts per batch, before augmentation.
    pub batch_size: usize,
    pub k_neg: usize,
    pub k_soft: usize,
    pub seed: u64,
    pub mode: ScoreMode,
    pub ortho_weight: f64,
    pub c_delta_env: f64,
    pub c_delta_task: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::Adam,
            dim: EMBED_DIM,
            hidden: vec![64, 64],
            lambda: DEFAULT_LAMBDA,
            lr: 3e-3,
            lr_decay: 0.05,
            epochs: 100,
            batch_size: 32,
            k_neg: 4,
            k_soft: 2,
            seed: 0,
            mode: ScoreMode::TransH,
            ortho_weight: 0.0,
            c_delta_env: 7.0,
            c_delta_task: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Invalid("layer sizes must be positive".into()));
        }
        if !(self.lambda > 0.0) || !(self.lr > 0.0) || self.lr_decay < 0.0 || self.ortho_weight < 0.0 {
            return Err(Error::Invalid("lambda and lr must be positive; decay and penalty non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Invalid("batch size must be positive".into()));
        }
        if self.c_delta_env < 0.0 || self.c_delta_task < 0.0 {
            return Err(Error::Invalid("soft-margin scales must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T: Real> {
    pub graph: TrainedGraph<T>,
    /// Mean loss per triple for each epoch.
    pub loss_trace: Vec<f64>,
}

impl<T: Real> TrainOutcome<T> {
    pub fn write_loss_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_loss_csv(&self.loss_trace, path)
    }
}

pub fn write_loss_csv(trace: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| Error::Invalid(format!("{}: {e}", path.display()));
    w.write_record(["epoch", "loss"]).map_err(io)?;
    for (k, l) in trace.iter().enumerate() {
        w.write_record([k.to_string(), format!("{l:e}")]).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Fresh parameters for `catalog`, seeded from `cfg.seed`.
pub fn init_graph<T: Real>(catalog: &SkillCatalog, cfg: &TrainConfig) -> TrainedGraph<T> {
    let mut rng = stream(cfg.seed, Stream::Init);
    let sizes = |input: usize| {
        let mut s = vec![input];
        s.extend(&cfg.hidden);
        s.push(cfg.dim);
        s
    };
    let env_scale = catalog.env_feature_scale().map(T::lit).to_vec();
    let env_encoder = ContextEncoder::new(&sizes(3), env_scale, &mut rng);
    let task_encoder = ContextEncoder::new(&sizes(TASK_DIM), vec![T::one(); TASK_DIM], &mut rng);
    let skill_vectors = (0..catalog.skills.len())
        .map(|_| (0..cfg.dim).map(|_| T::lit(rng.random_range(-0.1..0.1))).collect())
        .collect();
    let env_relation = RelationEmbedding::random(cfg.dim, &mut rng);
    let task_relation = RelationEmbedding::random(cfg.dim, &mut rng);
    TrainedGraph {
        schema: MODEL_SCHEMA.into(),
        dim: cfg.dim,
        lambda: T::lit(cfg.lambda),
        mode: cfg.mode,
        skills: skill_entries(catalog),
        skill_vectors,
        env_encoder,
        task_encoder,
        env_relation,
        task_relation,
        env_pair_norm_max: catalog.env_pair_norm_max(),
        v_max: catalog.v_max,
    }
}

/// Trains a fresh graph on `facts`.
pub fn train<T: Real>(catalog: &SkillCatalog, facts: &GraphFacts, cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if catalog.skills.is_empty() {
        return Err(Error::CatalogTooSmall("training needs at least one skill"));
    }
    train_from(init_graph(catalog, cfg), facts, cfg)
}

/// Continues training from `graph`; zero epochs returns it unchanged.
pub fn train_from<T: Real>(
    mut graph: TrainedGraph<T>,
    facts: &GraphFacts,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if facts.skill_ids.len() != graph.num_skills() {
        return Err(Error::Dimension {
            expected: graph.num_skills(),
            got: facts.skill_ids.len(),
        });
    }
    let pools = TriplePools::new(facts);
    let tcfg = TripleConfig {
        k_neg: cfg.k_neg,
        k_soft: cfg.k_soft,
        env_margin: SoftMargin {
            scale: cfg.c_delta_env,
            cap: ENV_KAPPA_CAP,
        },
        task_margin: SoftMargin {
            scale: cfg.c_delta_task,
            cap: TASK_KAPPA_CAP,
        },
        env_pair_norm_max: graph.env_pair_norm_max,
    };
    let mut batch_rng = stream(cfg.seed, Stream::Batches);
    let mut triple_rng = stream(cfg.seed, Stream::Triples);
    let mut order: Vec<usize> = (0..facts.positives.len()).collect();
    let ortho = T::lit(cfg.ortho_weight);
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let mut adam = Adam::new(if cfg.optimizer == Optimizer::Adam { graph.params_mut().count() } else { 0 });
    for epoch in 0..cfg.epochs {
        let lr = T::lit(cfg.lr / (1.0 + cfg.lr_decay * epoch as f64));
        order.shuffle(&mut batch_rng);
        let (mut total, mut count) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let positives: Vec<_> = chunk.iter().map(|&i| facts.positives[i].clone()).collect();
            let batch = generate_triples(&positives, facts, &pools, &tcfg, &mut triple_rng)?;
            let (loss, grad) = batch_loss_and_grad(&graph, facts, &batch, ortho);
            let loss = loss.as_f64();
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("loss became {loss} at epoch {epoch}")));
            }
            match cfg.optimizer {
                Optimizer::Sgd => grad.apply(&mut graph, -lr),
                Optimizer::Adam => adam.step(&mut graph, &grad, lr),
            }
            if graph.mode == ScoreMode::TransH {
                graph.env_relation.normalize();
                graph.task_relation.normalize();
            }
            total += loss;
            count += batch.len();
        }
        let mean = if count > 0 { total / count as f64 } else { 0.0 };
        debug!(epoch, loss = mean, "epoch done");
        loss_trace.push(mean);
    }
    if !graph.is_finite() {
        return Err(Error::Numerical("parameters became non-finite".into()));
    }
    info!(epochs = cfg.epochs, final_loss = loss_trace.last().copied().unwrap_or(0.0), "training finished");
    Ok(TrainOutcome { graph, loss_trace })
}

struct Adam<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    fn new(n: usize) -> Self {
        Self {
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }

    fn step(&mut self, graph: &mut TrainedGraph<T>, grad: &GraphGrad<T>, lr: T) {
        let (b1, b2, eps) = (T::lit(0.9), T::lit(0.999), T::lit(1e-8));
        self.t += 1;
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        let moments = self.m.iter_mut().zip(self.v.iter_mut());
        for ((p, g), (m, v)) in graph.params_mut().zip(grad.values()).zip(moments) {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            *p = *p - lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
    }
}
