//! Joint embedding of skills, environments and tasks.

pub mod gradcheck;
pub mod kernels;
pub mod loss;
pub mod mlp;
pub mod sbm;
pub mod train;
pub mod transh;
pub mod triples;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use kernels::{env_kappa, soft_margin, task_kappa, SoftMargin};
pub use loss::{batch_loss, batch_loss_and_grad, triple_loss, GraphGrad};
pub use mlp::ContextEncoder;
pub use train::{init_graph, train, train_from, Optimizer, TrainConfig, TrainOutcome};
pub use transh::{transh_score, RelationEmbedding, ScoreMode};
pub use triples::{generate_triples, TripleConfig, TriplePools};

use crate::catalog::{Entity, EnvInstance, GraphFacts, RelationKind, SkillCatalog, TaskVector};
use crate::{Error, Real, Result};

pub const MODEL_SCHEMA: &str = "rsg-model-v1";
pub const EMBED_DIM: usize = 48;
pub const DEFAULT_LAMBDA: f64 = 3.0;

/// Catalog metadata carried alongside each skill vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillEntry {
    pub id: String,
    pub name: String,
    pub env_class: String,
    pub task_name: String,
}

/// Immutable post-training bundle, persisted as `rsg-model-v1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrainedGraph<T: Real> {
    pub schema: String,
    pub dim: usize,
    pub lambda: T,
    pub mode: ScoreMode,
    pub skills: Vec<SkillEntry>,
    pub skill_vectors: Vec<Vec<T>>,
    pub env_encoder: ContextEncoder<T>,
    pub task_encoder: ContextEncoder<T>,
    pub env_relation: RelationEmbedding<T>,
    pub task_relation: RelationEmbedding<T>,
    /// Catalog-wide maximum of the `(Δf, Δμ)` norm used by the environment kernel.
    pub env_pair_norm_max: f64,
    pub v_max: f64,
}

impl<T: Real> TrainedGraph<T> {
    pub fn num_skills(&self) -> usize {
        self.skills.len()
    }

    pub fn skill_index(&self, id: &str) -> Option<usize> {
        self.skills.iter().position(|s| s.id == id)
    }

    pub fn relation(&self, kind: RelationKind) -> &RelationEmbedding<T> {
        match kind {
            RelationKind::EnvToSkill => &self.env_relation,
            RelationKind::TaskToSkill => &self.task_relation,
        }
    }

    pub fn encode_env(&self, env: &EnvInstance) -> Vec<T> {
        let x = env.features().map(T::lit);
        self.env_encoder.forward(&x)
    }

    pub fn encode_task(&self, task: &TaskVector) -> Vec<T> {
        let x: Vec<T> = task.flat().into_iter().map(T::lit).collect();
        self.task_encoder.forward(&x)
    }

    pub fn embed(&self, facts: &GraphFacts, entity: Entity) -> Vec<T> {
        match entity {
            Entity::Env(i) => self.encode_env(&facts.env_instances[i]),
            Entity::Task(i) => self.encode_task(&facts.task_instances[i]),
            Entity::Skill(i) => self.skill_vectors[i].clone(),
        }
    }

    pub fn score(&self, head: &[T], relation: RelationKind, tail: &[T]) -> T {
        transh::score_with_mode(head, self.relation(relation), tail, self.lambda, self.mode)
    }

    pub fn score_triple(&self, facts: &GraphFacts, t: &crate::catalog::FactTriple) -> T {
        self.score(&self.embed(facts, t.head), t.relation, &self.embed(facts, t.tail))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(text).map_err(Error::json)?;
        if g.schema != MODEL_SCHEMA {
            return Err(Error::Schema {
                found: g.schema,
                expected: MODEL_SCHEMA.into(),
            });
        }
        if g.skill_vectors.len() != g.skills.len() || g.skill_vectors.iter().any(|v| v.len() != g.dim) {
            return Err(Error::Invalid("skill vectors do not match the skill list".into()));
        }
        if !(g.lambda > T::zero()) {
            return Err(Error::Invalid("lambda must be positive".into()));
        }
        Ok(g)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Every trainable parameter in a fixed order shared with [`GraphGrad::values`].
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.skill_vectors
            .iter_mut()
            .flatten()
            .chain(self.env_encoder.params_mut())
            .chain(self.task_encoder.params_mut())
            .chain(self.env_relation.normal.iter_mut())
            .chain(self.env_relation.translation.iter_mut())
            .chain(self.task_relation.normal.iter_mut())
            .chain(self.task_relation.translation.iter_mut())
    }

    pub fn is_finite(&self) -> bool {
        self.lambda.is_finite()
            && self.skill_vectors.iter().flatten().all(|v| v.is_finite())
            && self.env_encoder.is_finite()
            && self.task_encoder.is_finite()
            && [&self.env_relation, &self.task_relation]
                .iter()
                .all(|r| r.normal.iter().chain(&r.translation).all(|v| v.is_finite()))
    }
}

pub fn skill_entries(catalog: &SkillCatalog) -> Vec<SkillEntry> {
    catalog
        .skills
        .iter()
        .map(|s| SkillEntry {
            id: s.id.clone(),
            name: s.name.clone(),
            env_class: s.env_class.clone(),
            task_name: s.task_name.clone(),
        })
        .collect()
}
