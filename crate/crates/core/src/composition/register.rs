//! Adding a composed skill back into the catalog and the trained graph.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::catalog::{append_skill_facts, EnvClass, EnvInstance, GraphFacts, Interval, SkillCatalog, SkillRecord};
use crate::embedding::{train_from, SkillEntry, TrainConfig, TrainedGraph};
use crate::rng::{stream, Stream};
use crate::toysim::GeneratorSpec;
use crate::{Error, Real, Result};

/// Description of a skill produced by composition or fine-tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewSkill {
    pub id: String,
    pub name: String,
    pub task_name: String,
    /// Context the skill was adapted to; registered as a point environment class.
    pub env: EnvInstance,
    pub generator: GeneratorSpec,
}

#[derive(Debug, Clone)]
pub struct Registration<T: Real> {
    pub catalog: SkillCatalog,
    pub facts: GraphFacts,
    pub graph: TrainedGraph<T>,
    /// Per-epoch loss of the incremental retrain.
    pub loss_trace: Vec<f64>,
}

/// Returns a copy of `catalog` with `skill` appended, together with a point
/// environment class and a generator entry named after the skill id.
pub fn add_skill_to_catalog(catalog: &SkillCatalog, skill: &NewSkill) -> Result<SkillCatalog> {
    if catalog.skill(&skill.id).is_some() {
        return Err(Error::DuplicateId(skill.id.clone()));
    }
    skill.generator.validate().map_err(Error::Invalid)?;
    let class_name = format!("{} env", skill.id);
    let generator_id = format!("gen:{}", skill.id);
    if catalog.env_class(&class_name).is_some() || catalog.generators.contains_key(&generator_id) {
        return Err(Error::DuplicateId(class_name));
    }

    let mut catalog = catalog.clone();
    let e = &skill.env;
    catalog.env_classes.push(EnvClass::new(
        &class_name,
        Interval::point(e.friction),
        Interval::point(e.flatness),
        Interval::point(e.slope),
    ));
    catalog.generators.insert(generator_id.clone(), skill.generator.clone());
    catalog.skills.push(SkillRecord {
        id: skill.id.clone(),
        name: skill.name.clone(),
        env_class: class_name.clone(),
        task_name: skill.task_name.clone(),
        generator: generator_id,
    });
    catalog.validate()?;
    Ok(catalog)
}

/// Appends `skill` to the catalog, samples its facts with `instances` per
/// relation, and warm-starts training from `graph` for `cfg.epochs` epochs.
///
/// With zero epochs every existing parameter is left as it was; the new skill
/// vector starts between the translated embeddings of its own contexts.
pub fn register_new_skill<T: Real>(
    graph: &TrainedGraph<T>,
    catalog: &SkillCatalog,
    facts: &GraphFacts,
    skill: NewSkill,
    instances: usize,
    seed: u64,
    cfg: &TrainConfig,
) -> Result<Registration<T>> {
    if catalog.skill(&skill.id).is_some() || graph.skill_index(&skill.id).is_some() {
        return Err(Error::DuplicateId(skill.id));
    }
    if graph.num_skills() != catalog.skills.len() || facts.skill_ids.len() != catalog.skills.len() {
        return Err(Error::Invalid("graph, catalog and facts describe different skill sets".into()));
    }
    let catalog = add_skill_to_catalog(catalog, &skill)?;
    let class_name = format!("{} env", skill.id);

    let k = facts.skill_ids.len();
    let mut facts = facts.clone();
    append_skill_facts(&mut facts, &catalog, k, instances, seed)?;

    let mut graph = graph.clone();
    let env_emb = graph.encode_env(&skill.env);
    let first_task = facts.task_owner.iter().position(|&o| o == k).expect("new skill has task instances");
    let task_emb = graph.encode_task(&facts.task_instances[first_task]);
    let mut rng = stream(seed ^ k as u64, Stream::Init);
    let half = T::lit(0.5);
    let vector = (0..graph.dim)
        .map(|i| {
            let jitter = T::lit(rng.random_range(-1e-3..1e-3));
            half * (env_emb[i] + graph.env_relation.translation[i] + task_emb[i] + graph.task_relation.translation[i])
                + jitter
        })
        .collect();
    graph.skills.push(SkillEntry {
        id: skill.id,
        name: skill.name,
        env_class: class_name,
        task_name: skill.task_name,
    });
    graph.skill_vectors.push(vector);

    let (graph, loss_trace) = if cfg.epochs == 0 {
        (graph, Vec::new())
    } else {
        let out = train_from(graph, &facts, cfg)?;
        (out.graph, out.loss_trace)
    };
    Ok(Registration {
        catalog,
        facts,
        graph,
        loss_trace,
    })
}
