//! Negative and soft triple generation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::kernels::{env_kappa, task_kappa, SoftMargin};
use crate::catalog::{Entity, FactTriple, GraphFacts, RelationKind, TripleKind};
use crate::rng::Rng;
use crate::{Error, Result};

/// Index of the graph's instance pools by owner skill and by context class.
#[derive(Debug, Clone)]
pub struct TriplePools {
    env_by_skill: Vec<Vec<usize>>,
    task_by_skill: Vec<Vec<usize>>,
    env_by_class: BTreeMap<String, Vec<usize>>,
    task_by_class: BTreeMap<String, Vec<usize>>,
    env_classes: Vec<String>,
    task_classes: Vec<String>,
}

impl TriplePools {
    pub fn new(facts: &GraphFacts) -> Self {
        let n = facts.skill_ids.len();
        let mut env_by_skill = vec![Vec::new(); n];
        let mut task_by_skill = vec![Vec::new(); n];
        let mut env_by_class: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut task_by_class: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, &owner) in facts.env_owner.iter().enumerate() {
            env_by_skill[owner].push(i);
            env_by_class
                .entry(facts.env_instances[i].class_name.clone())
                .or_default()
                .push(i);
        }
        for (i, &owner) in facts.task_owner.iter().enumerate() {
            task_by_skill[owner].push(i);
            task_by_class.entry(facts.task_class[i].clone()).or_default().push(i);
        }
        Self {
            env_classes: env_by_class.keys().cloned().collect(),
            task_classes: task_by_class.keys().cloned().collect(),
            env_by_skill,
            task_by_skill,
            env_by_class,
            task_by_class,
        }
    }
}

/// Counts and margin maps for batch augmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripleConfig {
    pub k_neg: usize,
    pub k_soft: usize,
    pub env_margin: SoftMargin,
    pub task_margin: SoftMargin,
    pub env_pair_norm_max: f64,
}

/// The four wrong-form corruptions of a positive fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum WrongForm {
    /// `(e, r_e→s, e′)`
    EnvTail,
    /// `(t, r_t→s, t′)`
    TaskTail,
    /// `(e, r_t→s, s)`
    EnvUnderTaskRelation,
    /// `(t, r_e→s, s)`
    TaskUnderEnvRelation,
}

const FORMS: [WrongForm; 4] = [
    WrongForm::EnvTail,
    WrongForm::TaskTail,
    WrongForm::EnvUnderTaskRelation,
    WrongForm::TaskUnderEnvRelation,
];

fn pick(pool: &[usize], rng: &mut Rng) -> Option<usize> {
    (!pool.is_empty()).then(|| pool[rng.random_range(0..pool.len())])
}

/// Uniform index in `0..n` other than `not`.
fn pick_other(n: usize, not: usize, rng: &mut Rng) -> Option<usize> {
    if n < 2 {
        return None;
    }
    let r = rng.random_range(0..n - 1);
    Some(if r >= not { r + 1 } else { r })
}

fn negative(head: Entity, relation: RelationKind, tail: Entity) -> FactTriple {
    FactTriple {
        head,
        relation,
        tail,
        kind: TripleKind::Negative,
        margin: 0.0,
    }
}

/// Soft triple `(new_head, r, skill)` whose margin is the soft-margin image of
/// the kernel between the new and original heads.
pub fn soft_triple(
    facts: &GraphFacts,
    cfg: &TripleConfig,
    original: &FactTriple,
    new_head: Entity,
) -> FactTriple {
    let margin = match (original.head, new_head) {
        (Entity::Env(o), Entity::Env(n)) => cfg.env_margin.delta(env_kappa(
            &facts.env_instances[o],
            &facts.env_instances[n],
            cfg.env_pair_norm_max,
        )),
        (Entity::Task(o), Entity::Task(n)) => cfg
            .task_margin
            .delta(task_kappa(&facts.task_instances[o], &facts.task_instances[n])),
        _ => panic!("soft triple head must keep the original head type"),
    };
    FactTriple {
        head: new_head,
        relation: original.relation,
        tail: original.tail,
        kind: TripleKind::Soft,
        margin,
    }
}

/// Returns the positives followed by, per positive, `k_neg` wrong-form
/// negatives (forms cycled through a per-positive random permutation, so four
/// negatives cover each form once) and `k_soft` soft triples whose heads come
/// from other context classes of the same relation.
///
/// Soft triples are skipped for a relation with a single context class.
pub fn generate_triples(
    positives: &[FactTriple],
    facts: &GraphFacts,
    pools: &TriplePools,
    cfg: &TripleConfig,
    rng: &mut Rng,
) -> Result<Vec<FactTriple>> {
    let mut out = positives.to_vec();
    for p in positives {
        let Entity::Skill(skill) = p.tail else {
            return Err(Error::Invalid("positive fact must end at a skill".into()));
        };
        let env_head = |rng: &mut Rng| match p.head {
            Entity::Env(e) => Some(e),
            _ => pick(&pools.env_by_skill[skill], rng),
        };
        let task_head = |rng: &mut Rng| match p.head {
            Entity::Task(t) => Some(t),
            _ => pick(&pools.task_by_skill[skill], rng),
        };
        let mut forms = FORMS;
        forms.shuffle(rng);
        for j in 0..cfg.k_neg {
            let triple = match forms[j % 4] {
                WrongForm::EnvTail => {
                    let e = env_head(rng).ok_or(Error::CatalogTooSmall("environment instance"))?;
                    let other = pick_other(facts.env_instances.len(), e, rng)
                        .ok_or(Error::CatalogTooSmall("environment instance"))?;
                    negative(Entity::Env(e), RelationKind::EnvToSkill, Entity::Env(other))
                }
                WrongForm::TaskTail => {
                    let t = task_head(rng).ok_or(Error::CatalogTooSmall("task instance"))?;
                    let other = pick_other(facts.task_instances.len(), t, rng)
                        .ok_or(Error::CatalogTooSmall("task instance"))?;
                    negative(Entity::Task(t), RelationKind::TaskToSkill, Entity::Task(other))
                }
                WrongForm::EnvUnderTaskRelation => {
                    let e = env_head(rng).ok_or(Error::CatalogTooSmall("environment instance"))?;
                    negative(Entity::Env(e), RelationKind::TaskToSkill, p.tail)
                }
                WrongForm::TaskUnderEnvRelation => {
                    let t = task_head(rng).ok_or(Error::CatalogTooSmall("task instance"))?;
                    negative(Entity::Task(t), RelationKind::EnvToSkill, p.tail)
                }
            };
            out.push(triple);
        }
        if cfg.k_soft == 0 {
            continue;
        }
        let (classes, by_class, own_class) = match p.head {
            Entity::Env(e) => (
                &pools.env_classes,
                &pools.env_by_class,
                facts.env_instances[e].class_name.as_str(),
            ),
            Entity::Task(t) => (&pools.task_classes, &pools.task_by_class, facts.task_class[t].as_str()),
            Entity::Skill(_) => return Err(Error::Invalid("positive fact must start at a context".into())),
        };
        let others: Vec<&String> = classes.iter().filter(|c| c.as_str() != own_class).collect();
        if others.is_empty() {
            continue;
        }
        for _ in 0..cfg.k_soft {
            let class = others[rng.random_range(0..others.len())];
            let idx = pick(&by_class[class], rng).expect("class pools are non-empty");
            let head = match p.head {
                Entity::Env(_) => Entity::Env(idx),
                _ => Entity::Task(idx),
            };
            out.push(soft_triple(facts, cfg, p, head));
        }
    }
    Ok(out)
}
