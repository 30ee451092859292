//! Evaluation harness: link prediction, per-class score separation, the
//! overlap comparison against the similarity baseline, and one-to-many checks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::{EnvInstance, GraphFacts, RelationKind, SkillCatalog, TripleKind};
use crate::embedding::sbm::{sbm_score, SBM_TAU};
use crate::embedding::{generate_triples, SoftMargin, TrainedGraph, TripleConfig, TriplePools};
use crate::rng::{stream, Stream};
use crate::inference::infer;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitRate {
    pub hits: usize,
    pub queries: usize,
}

impl HitRate {
    pub fn rate(&self) -> f64 {
        if self.queries == 0 {
            0.0
        } else {
            self.hits as f64 / self.queries as f64
        }
    }
}

fn check_aligned<T: Real>(graph: &TrainedGraph<T>, facts: &GraphFacts) -> Result<()> {
    let same = graph.skills.len() == facts.skill_ids.len()
        && graph.skills.iter().zip(&facts.skill_ids).all(|(a, b)| &a.id == b);
    if same {
        Ok(())
    } else {
        Err(Error::Invalid("facts and graph list different skills".into()))
    }
}

/// One query per skill: its environment class midpoint with its first task
/// instance in `facts`. A hit ranks that skill first.
pub fn class_query_top1<T: Real>(graph: &TrainedGraph<T>, catalog: &SkillCatalog, facts: &GraphFacts) -> Result<HitRate> {
    check_aligned(graph, facts)?;
    let mut rate = HitRate { hits: 0, queries: 0 };
    for (k, skill) in catalog.skills.iter().enumerate() {
        let env = catalog
            .env_class(&skill.env_class)
            .ok_or_else(|| Error::Invalid(format!("unknown class {}", skill.env_class)))?
            .midpoint();
        let Some(t) = facts.task_owner.iter().position(|&o| o == k) else {
            continue;
        };
        let ranked = infer(graph, &env, &facts.task_instances[t]);
        rate.queries += 1;
        if ranked[0].skill_id == skill.id {
            rate.hits += 1;
        }
    }
    Ok(rate)
}

/// Pairs the i-th environment instance of each skill with its i-th task instance.
pub fn instance_query_top1<T: Real>(graph: &TrainedGraph<T>, facts: &GraphFacts) -> Result<HitRate> {
    check_aligned(graph, facts)?;
    let env_emb: Vec<Vec<T>> = facts.env_instances.iter().map(|e| graph.encode_env(e)).collect();
    let task_emb: Vec<Vec<T>> = facts.task_instances.iter().map(|t| graph.encode_task(t)).collect();
    let mut rate = HitRate { hits: 0, queries: 0 };
    for k in 0..graph.num_skills() {
        let envs = facts.env_owner.iter().enumerate().filter(|(_, &o)| o == k).map(|(i, _)| i);
        let tasks = facts.task_owner.iter().enumerate().filter(|(_, &o)| o == k).map(|(i, _)| i);
        for (e, t) in envs.zip(tasks) {
            let best = (0..graph.num_skills())
                .map(|j| {
                    let s = &graph.skill_vectors[j];
                    let v = graph.score(&env_emb[e], RelationKind::EnvToSkill, s)
                        * graph.score(&task_emb[t], RelationKind::TaskToSkill, s);
                    (j, v.as_f64())
                })
                .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            rate.queries += 1;
            if best.0 == k {
                rate.hits += 1;
            }
        }
    }
    Ok(rate)
}

/// Scores of every context instance against one skill, grouped by context class.
pub type ClassScores = BTreeMap<String, Vec<f64>>;

/// For every skill: environment-relation scores grouped by environment class,
/// and task-relation scores grouped by task class.
pub fn class_score_distributions<T: Real>(
    graph: &TrainedGraph<T>,
    catalog: &SkillCatalog,
    facts: &GraphFacts,
) -> Result<Vec<(ClassScores, ClassScores)>> {
    check_aligned(graph, facts)?;
    let env_emb: Vec<Vec<T>> = facts.env_instances.iter().map(|e| graph.encode_env(e)).collect();
    let task_emb: Vec<Vec<T>> = facts.task_instances.iter().map(|t| graph.encode_task(t)).collect();
    let env_class: Vec<&str> = facts
        .env_owner
        .iter()
        .map(|&o| catalog.skills[o].env_class.as_str())
        .collect();
    Ok(graph
        .skill_vectors
        .iter()
        .map(|s| {
            let mut env = ClassScores::new();
            for (e, emb) in env_emb.iter().enumerate() {
                let v = graph.score(emb, RelationKind::EnvToSkill, s).as_f64();
                env.entry(env_class[e].to_string()).or_default().push(v);
            }
            let mut task = ClassScores::new();
            for (t, emb) in task_emb.iter().enumerate() {
                let v = graph.score(emb, RelationKind::TaskToSkill, s).as_f64();
                task.entry(facts.task_class[t].clone()).or_default().push(v);
            }
            (env, task)
        })
        .collect())
}

/// Linear-interpolated quantile of unsorted data.
pub fn quantile(data: &[f64], q: f64) -> f64 {
    let mut v = data.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// True when the median of `true_class` exceeds the 75th percentile of every other class.
pub fn separates(scores: &ClassScores, true_class: &str) -> bool {
    let Some(own) = scores.get(true_class) else {
        return false;
    };
    let m = quantile(own, 0.5);
    scores
        .iter()
        .filter(|(c, _)| c.as_str() != true_class)
        .all(|(_, v)| m > quantile(v, 0.75))
}

/// Counts of cross-class scores above the true class median.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub above: usize,
    pub total: usize,
}

impl Overlap {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.above as f64 / self.total as f64
        }
    }

    pub fn add(&mut self, scores: &ClassScores, true_class: &str) {
        let Some(own) = scores.get(true_class) else {
            return;
        };
        let m = quantile(own, 0.5);
        for (c, v) in scores {
            if c != true_class {
                self.above += v.iter().filter(|&&x| x > m).count();
                self.total += v.len();
            }
        }
    }
}

/// Separation and overlap summary over both context types.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    /// Fraction of skills whose true environment class separates.
    pub env_separated: f64,
    /// Fraction of skills whose true task class separates.
    pub task_separated: f64,
    pub overlap: Overlap,
}

pub fn summarize(catalog: &SkillCatalog, per_skill: &[(ClassScores, ClassScores)]) -> SeparationReport {
    let n = per_skill.len().max(1) as f64;
    let mut env_ok = 0usize;
    let mut task_ok = 0usize;
    let mut overlap = Overlap::default();
    for (skill, (env, task)) in catalog.skills.iter().zip(per_skill) {
        env_ok += separates(env, &skill.env_class) as usize;
        task_ok += separates(task, &skill.task_name) as usize;
        overlap.add(env, &skill.env_class);
        overlap.add(task, &skill.task_name);
    }
    SeparationReport {
        env_separated: env_ok as f64 / n,
        task_separated: task_ok as f64 / n,
        overlap,
    }
}

pub fn rsg_separation<T: Real>(graph: &TrainedGraph<T>, catalog: &SkillCatalog, facts: &GraphFacts) -> Result<SeparationReport> {
    Ok(summarize(catalog, &class_score_distributions(graph, catalog, facts)?))
}

fn centroid_scores(
    members: &BTreeMap<String, Vec<Vec<f64>>>,
    queries: &[(String, Vec<f64>)],
    target: &str,
    tau: f64,
) -> Result<ClassScores> {
    let class = members
        .get(target)
        .ok_or_else(|| Error::EmptyClass(target.to_string()))?;
    let x_max = max_centroid_distance(members);
    let mut out = ClassScores::new();
    for (c, q) in queries {
        out.entry(c.clone()).or_default().push(sbm_score(q, class, x_max, tau)?);
    }
    Ok(out)
}

/// Largest sample-to-centroid distance over all samples and classes, so every
/// normalized distance stays inside `[0, 1]`.
fn max_centroid_distance(members: &BTreeMap<String, Vec<Vec<f64>>>) -> f64 {
    let centroids: Vec<Vec<f64>> = members
        .values()
        .map(|m| {
            let n = m.len() as f64;
            (0..m[0].len()).map(|i| m.iter().map(|x| x[i]).sum::<f64>() / n).collect()
        })
        .collect();
    let mut best = 0.0f64;
    for x in members.values().flatten() {
        for c in &centroids {
            let d = x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            best = best.max(d);
        }
    }
    best
}

/// The same separation report for the centroid-distance baseline, with
/// class centroids taken from `reference` and queries from `facts`.
pub fn sbm_separation(catalog: &SkillCatalog, reference: &GraphFacts, facts: &GraphFacts) -> Result<SeparationReport> {
    Ok(summarize(catalog, &sbm_class_score_distributions(catalog, reference, facts, SBM_TAU)?))
}

/// Per-skill class score distributions of the centroid-distance baseline.
pub fn sbm_class_score_distributions(
    catalog: &SkillCatalog,
    reference: &GraphFacts,
    facts: &GraphFacts,
    tau: f64,
) -> Result<Vec<(ClassScores, ClassScores)>> {
    let env_of = |f: &GraphFacts, i: usize| catalog.skills[f.env_owner[i]].env_class.clone();
    let mut env_members: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for (i, e) in reference.env_instances.iter().enumerate() {
        env_members.entry(env_of(reference, i)).or_default().push(e.features().to_vec());
    }
    let mut task_members: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for (i, t) in reference.task_instances.iter().enumerate() {
        task_members.entry(reference.task_class[i].clone()).or_default().push(t.flat());
    }
    let env_queries: Vec<(String, Vec<f64>)> = facts
        .env_instances
        .iter()
        .enumerate()
        .map(|(i, e)| (env_of(facts, i), e.features().to_vec()))
        .collect();
    let task_queries: Vec<(String, Vec<f64>)> = facts
        .task_instances
        .iter()
        .zip(&facts.task_class)
        .map(|(t, c)| (c.clone(), t.flat()))
        .collect();
    let mut env_cache: BTreeMap<String, ClassScores> = BTreeMap::new();
    let mut task_cache: BTreeMap<String, ClassScores> = BTreeMap::new();
    let mut per_skill = Vec::with_capacity(catalog.skills.len());
    for skill in &catalog.skills {
        if !env_cache.contains_key(&skill.env_class) {
            let s = centroid_scores(&env_members, &env_queries, &skill.env_class, tau)?;
            env_cache.insert(skill.env_class.clone(), s);
        }
        if !task_cache.contains_key(&skill.task_name) {
            let s = centroid_scores(&task_members, &task_queries, &skill.task_name, tau)?;
            task_cache.insert(skill.task_name.clone(), s);
        }
        per_skill.push((env_cache[&skill.env_class].clone(), task_cache[&skill.task_name].clone()));
    }
    Ok(per_skill)
}

/// One CSV line per score: `skill_id,relation,true_class,class,score`.
pub fn write_class_scores_csv(
    path: impl AsRef<Path>,
    catalog: &SkillCatalog,
    per_skill: &[(ClassScores, ClassScores)],
) -> Result<()> {
    let path = path.as_ref();
    let err = |e: csv::Error| Error::Invalid(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["skill_id", "relation", "true_class", "class", "score"]).map_err(err)?;
    for (skill, (env, task)) in catalog.skills.iter().zip(per_skill) {
        for (relation, scores, true_class) in [("env", env, &skill.env_class), ("task", task, &skill.task_name)] {
            for (class, values) in scores {
                for v in values {
                    w.write_record([
                        skill.id.as_str(),
                        relation,
                        true_class.as_str(),
                        class.as_str(),
                        &format!("{v:e}"),
                    ])
                    .map_err(err)?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Environment-relation scores of the first environment instance against every skill.
pub fn one_to_many_scores<T: Real>(graph: &TrainedGraph<T>, env: &EnvInstance) -> Vec<f64> {
    let e = graph.encode_env(env);
    graph
        .skill_vectors
        .iter()
        .map(|s| graph.score(&e, RelationKind::EnvToSkill, s).as_f64())
        .collect()
}

/// Probability that a positive fact of `facts` outscores one of its
/// wrong-form corruptions (ties count one half), over `k_neg` negatives per
/// positive.
pub fn ranking_auc<T: Real>(graph: &TrainedGraph<T>, facts: &GraphFacts, k_neg: usize, seed: u64) -> Result<f64> {
    check_aligned(graph, facts)?;
    let cfg = TripleConfig {
        k_neg,
        k_soft: 0,
        env_margin: SoftMargin::env(),
        task_margin: SoftMargin::task(),
        env_pair_norm_max: graph.env_pair_norm_max,
    };
    let mut rng = stream(seed, Stream::Evaluation);
    let triples = generate_triples(&facts.positives, facts, &TriplePools::new(facts), &cfg, &mut rng)?;
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for t in &triples {
        let s = graph.score_triple(facts, t).as_f64();
        match t.kind {
            TripleKind::Positive => pos.push(s),
            TripleKind::Negative => neg.push(s),
            TripleKind::Soft => {}
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Invalid("ranking AUC needs positives and negatives".into()));
    }
    neg.sort_by(|a, b| a.total_cmp(b));
    let mut wins = 0.0;
    for p in &pos {
        let below = neg.partition_point(|n| n < p);
        let ties = neg[below..].partition_point(|n| n <= p);
        wins += below as f64 + 0.5 * ties as f64;
    }
    Ok(wins / (pos.len() * neg.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.75), 3.25);
    }

    #[test]
    fn separation_and_overlap() {
        let mut s = ClassScores::new();
        s.insert("a".into(), vec![0.9, 0.8, 0.95]);
        s.insert("b".into(), vec![0.1, 0.2, 0.85]);
        assert!(separates(&s, "a"));
        assert!(!separates(&s, "b"));
        let mut o = Overlap::default();
        o.add(&s, "a");
        assert_eq!((o.above, o.total), (0, 3));
        let mut o = Overlap::default();
        o.add(&s, "b");
        assert_eq!((o.above, o.total), (3, 3));
    }
}
