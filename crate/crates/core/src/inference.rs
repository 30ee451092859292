//! Skill inference from an (environment, task) query and score-based dispatch.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::{EnvInstance, RelationKind, TaskVector, TASK_DIM};
use crate::embedding::TrainedGraph;
use crate::{Error, Real, Result};

/// Scores at or above this deploy the top skill directly.
pub const ALPHA_HIGH: f64 = 0.9;
/// Scores at or above this (and below [`ALPHA_HIGH`]) compose the top skills.
pub const ALPHA_LOW: f64 = 0.7;
pub const DEFAULT_SELECT: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillScore {
    pub skill_id: String,
    pub s_task: f64,
    pub s_env: f64,
    pub s: f64,
}

/// Ranks every skill by `S_task · S_env`, descending, ties broken by skill id.
pub fn infer<T: Real>(graph: &TrainedGraph<T>, env: &EnvInstance, task: &TaskVector) -> Vec<SkillScore> {
    let e = graph.encode_env(env);
    let t = graph.encode_task(task);
    let mut out: Vec<SkillScore> = graph
        .skills
        .iter()
        .zip(&graph.skill_vectors)
        .map(|(entry, s)| {
            let s_env = graph.score(&e, RelationKind::EnvToSkill, s).as_f64();
            let s_task = graph.score(&t, RelationKind::TaskToSkill, s).as_f64();
            SkillScore {
                skill_id: entry.id.clone(),
                s_task,
                s_env,
                s: s_task * s_env,
            }
        })
        .collect();
    sort_scores(&mut out);
    out
}

/// Like [`infer`] but takes the task as a flat feature slice.
pub fn infer_flat<T: Real>(graph: &TrainedGraph<T>, env: &EnvInstance, task: &[f64]) -> Result<Vec<SkillScore>> {
    if task.len() != TASK_DIM {
        return Err(Error::Dimension {
            expected: TASK_DIM,
            got: task.len(),
        });
    }
    Ok(infer(graph, env, &TaskVector::from_flat(task)?))
}

pub fn sort_scores(scores: &mut [SkillScore]) {
    scores.sort_by(|a, b| {
        b.s.partial_cmp(&a.s)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.skill_id.cmp(&b.skill_id))
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DispatchMode {
    Execute,
    Compose,
    Finetune,
}

/// Score thresholds separating the three dispatch modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub high: f64,
    pub low: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            high: ALPHA_HIGH,
            low: ALPHA_LOW,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        if 0.0 <= self.low && self.low < self.high && self.high <= 1.0 {
            Ok(())
        } else {
            Err(Error::Invalid(format!(
                "thresholds need 0 <= low < high <= 1, got low {} high {}",
                self.low, self.high
            )))
        }
    }

    pub fn mode(&self, score: f64) -> DispatchMode {
        if score >= self.high {
            DispatchMode::Execute
        } else if score >= self.low {
            DispatchMode::Compose
        } else {
            DispatchMode::Finetune
        }
    }
}

impl DispatchMode {
    pub fn for_score(score: f64) -> Self {
        Thresholds::default().mode(score)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchDecision {
    pub mode: DispatchMode,
    pub selected: Vec<String>,
    /// Scores of the selected skills, in the same order.
    pub scores: Vec<f64>,
    pub top_score: f64,
}

/// Picks the application mode from the top score of a ranked list.
pub fn dispatch(ranked: &[SkillScore], n_select: usize) -> Result<DispatchDecision> {
    dispatch_with(ranked, n_select, &Thresholds::default())
}

pub fn dispatch_with(ranked: &[SkillScore], n_select: usize, thresholds: &Thresholds) -> Result<DispatchDecision> {
    thresholds.validate()?;
    let top = ranked
        .first()
        .ok_or(Error::CatalogTooSmall("dispatch needs at least one ranked skill"))?;
    let mode = thresholds.mode(top.s);
    let n = match mode {
        DispatchMode::Execute => 1,
        _ => n_select.max(1).min(ranked.len()),
    };
    Ok(DispatchDecision {
        mode,
        selected: ranked[..n].iter().map(|r| r.skill_id.clone()).collect(),
        scores: ranked[..n].iter().map(|r| r.s).collect(),
        top_score: top.s,
    })
}

/// Ranking head plus the dispatch decision for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryReport {
    pub ranking: Vec<SkillScore>,
    #[serde(flatten)]
    pub decision: DispatchDecision,
}

/// Infers, dispatches, and keeps the `top_k` best entries of the ranking.
pub fn query<T: Real>(
    graph: &TrainedGraph<T>,
    env: &EnvInstance,
    task: &TaskVector,
    top_k: usize,
    n_select: usize,
    thresholds: &Thresholds,
) -> Result<QueryReport> {
    let mut ranking = infer(graph, env, task);
    let decision = dispatch_with(&ranking, n_select, thresholds)?;
    ranking.truncate(top_k.max(1));
    Ok(QueryReport { ranking, decision })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub env_index: usize,
    pub task_index: usize,
    pub scores: Vec<SkillScore>,
}

/// Full ranking for every (environment, task) query pair, environment-major.
pub fn score_matrix<T: Real>(
    graph: &TrainedGraph<T>,
    envs: &[EnvInstance],
    tasks: &[TaskVector],
) -> Result<Vec<ScoreRow>> {
    if envs.is_empty() || tasks.is_empty() {
        return Err(Error::Invalid("score matrix needs at least one query of each kind".into()));
    }
    let mut rows = Vec::with_capacity(envs.len() * tasks.len());
    for (i, e) in envs.iter().enumerate() {
        for (j, t) in tasks.iter().enumerate() {
            rows.push(ScoreRow {
                env_index: i,
                task_index: j,
                scores: infer(graph, e, t),
            });
        }
    }
    Ok(rows)
}

/// One CSV line per (query pair, skill): `env_index,task_index,rank,skill_id,s_env,s_task,s`.
pub fn write_score_matrix_csv(rows: &[ScoreRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let err = |e: csv::Error| Error::Invalid(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["env_index", "task_index", "rank", "skill_id", "s_env", "s_task", "s"])
        .map_err(err)?;
    for row in rows {
        for (rank, sc) in row.scores.iter().enumerate() {
            w.write_record([
                row.env_index.to_string(),
                row.task_index.to_string(),
                (rank + 1).to_string(),
                sc.skill_id.clone(),
                format!("{:e}", sc.s_env),
                format!("{:e}", sc.s_task),
                format!("{:e}", sc.s),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
