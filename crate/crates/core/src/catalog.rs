//! Skills, environment classes, task profiles, and the graph facts they induce.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::{self, Stream};
use crate::toysim::{self, BodyState, EnvDynamics, GeneratorSpec};
use crate::{Error, Result};

pub const CATALOG_SCHEMA: &str = "rsg-catalog-v1";
pub const FACTS_SCHEMA: &str = "rsg-facts-v1";
pub const TASK_SCHEMA: &str = "rsg-task-v1";
pub const TASK_STEPS: usize = 11;
pub const TASK_FEATURES: usize = 7;
pub const TASK_DIM: usize = TASK_STEPS * TASK_FEATURES;
pub const DEFAULT_V_MAX: f64 = 2.0;
/// Simulation steps spanned by the 11 waypoints of a queried task profile.
pub const DEFAULT_COMMAND_PERIOD: usize = 50;
/// Disturbance scale applied to the anchor rollouts that produce task instances.
pub const DEFAULT_TASK_NOISE: f64 = 1.0;

/// Closed interval, serialized as `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn sample(&self, rng: &mut rng::Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }
}

impl From<(f64, f64)> for Interval {
    fn from((lo, hi): (f64, f64)) -> Self {
        Self { lo, hi }
    }
}

impl From<Interval> for (f64, f64) {
    fn from(i: Interval) -> Self {
        (i.lo, i.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvClass {
    pub name: String,
    pub friction: Interval,
    pub flatness: Interval,
    pub slope: Interval,
}

impl EnvClass {
    pub fn new(name: &str, friction: Interval, flatness: Interval, slope: Interval) -> Self {
        Self {
            name: name.to_string(),
            friction,
            flatness,
            slope,
        }
    }

    pub fn midpoint(&self) -> EnvInstance {
        EnvInstance::new(&self.name, self.friction.mid(), self.flatness.mid(), self.slope.mid())
    }

    pub fn contains(&self, env: &EnvInstance) -> bool {
        self.friction.contains(env.friction)
            && self.flatness.contains(env.flatness)
            && self.slope.contains(env.slope)
    }
}

/// A concrete environment: friction μ, flatness f, slope θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvInstance {
    #[serde(default)]
    pub class_name: String,
    pub friction: f64,
    pub flatness: f64,
    pub slope: f64,
}

impl EnvInstance {
    pub fn new(class_name: &str, friction: f64, flatness: f64, slope: f64) -> Self {
        Self {
            class_name: class_name.to_string(),
            friction,
            flatness,
            slope,
        }
    }

    pub fn features(&self) -> [f64; 3] {
        [self.friction, self.flatness, self.slope]
    }
}

/// `n` instances drawn uniformly from the class box; deterministic given `seed`.
pub fn sample_env_instances(class: &EnvClass, n: usize, seed: u64) -> Vec<EnvInstance> {
    let mut rng = rng::stream(seed, Stream::EnvSampling);
    (0..n)
        .map(|_| {
            let friction = class.friction.sample(&mut rng);
            let flatness = class.flatness.sample(&mut rng);
            let slope = class.slope.sample(&mut rng);
            EnvInstance::new(&class.name, friction, flatness, slope)
        })
        .collect()
}

/// One step of a task profile: `[vx, vy, vz, |v|, 𝟙(ω≥0), 𝟙(ω<0), |ω|]`.
pub type TaskStep = [f64; TASK_FEATURES];

/// CoM velocity profile over 11 timesteps, flattened to 77 features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskVector {
    pub steps: [TaskStep; TASK_STEPS],
}

impl TaskVector {
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() != TASK_DIM {
            return Err(Error::Dimension {
                expected: TASK_DIM,
                got: flat.len(),
            });
        }
        let mut steps = [[0.0; TASK_FEATURES]; TASK_STEPS];
        for (k, chunk) in flat.chunks(TASK_FEATURES).enumerate() {
            steps[k].copy_from_slice(chunk);
        }
        Ok(Self { steps })
    }

    pub fn flat(&self) -> Vec<f64> {
        self.steps.iter().flatten().copied().collect()
    }

    /// Normalized linear velocity at step `k`.
    pub fn velocity(&self, k: usize) -> [f64; 3] {
        let s = &self.steps[k];
        [s[0], s[1], s[2]]
    }

    /// Signed yaw rate at step `k`, recovered from the one-hot sign and magnitude.
    pub fn yaw_rate(&self, k: usize) -> f64 {
        let s = &self.steps[k];
        if s[5] > 0.5 {
            -s[6]
        } else {
            s[6]
        }
    }

    /// `+1` for a non-negative yaw step, `-1` otherwise.
    pub fn yaw_sign(&self, k: usize) -> f64 {
        if self.steps[k][5] > 0.5 {
            -1.0
        } else {
            1.0
        }
    }

    /// Per-step command for tracking this profile in the simulator.
    pub fn command(&self, v_max: f64, period_steps: usize) -> toysim::TaskCommand {
        toysim::TaskCommand {
            schedule: (0..TASK_STEPS)
                .map(|k| toysim::CommandPoint {
                    vx: self.steps[k][0] * v_max,
                    vy: self.steps[k][1] * v_max,
                    yaw_rate: self.yaw_rate(k),
                })
                .collect(),
            h_target: toysim::NOMINAL_HEIGHT,
            period_steps,
        }
    }

    pub fn check_invariants(&self) -> Result<()> {
        for (k, s) in self.steps.iter().enumerate() {
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!("task step {k} is not finite")));
            }
            if s[4] + s[5] != 1.0 || !(s[4] == 0.0 || s[4] == 1.0) {
                return Err(Error::Invalid(format!("task step {k}: yaw one-hot broken")));
            }
            if s[3] < 0.0 || s[6] < 0.0 || s[..3].iter().any(|v| v.abs() > 1.0) {
                return Err(Error::Invalid(format!("task step {k}: out of range")));
            }
        }
        Ok(())
    }

    /// Reads `rsg-task-v1` JSON or a bare array of 77 numbers.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Flat(Vec<f64>),
            Doc {
                #[serde(default)]
                schema: Option<String>,
                steps: Vec<Vec<f64>>,
            },
        }
        match serde_json::from_str::<Repr>(text).map_err(Error::json)? {
            Repr::Flat(v) => Self::from_flat(&v),
            Repr::Doc { schema, steps } => {
                if let Some(s) = schema {
                    if s != TASK_SCHEMA {
                        return Err(Error::Schema {
                            found: s,
                            expected: TASK_SCHEMA.into(),
                        });
                    }
                }
                if steps.len() != TASK_STEPS || steps.iter().any(|s| s.len() != TASK_FEATURES) {
                    return Err(Error::Dimension {
                        expected: TASK_DIM,
                        got: steps.iter().map(Vec::len).sum(),
                    });
                }
                Self::from_flat(&steps.concat())
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "schema": TASK_SCHEMA,
            "steps": self.steps,
        }))
        .expect("task vector serializes")
    }
}

/// Samples 11 evenly spaced states (by index) and encodes their CoM motion.
///
/// Velocities are divided by `v_max` and clamped to `[-1, 1]`; a yaw rate of
/// exactly zero counts as non-negative.
pub fn build_task_vector(traj: &[BodyState], v_max: f64) -> Result<TaskVector> {
    if traj.len() < TASK_STEPS {
        return Err(Error::TrajectoryTooShort {
            len: traj.len(),
            need: TASK_STEPS,
        });
    }
    if !(v_max > 0.0) {
        return Err(Error::Invalid(format!("v_max must be positive, got {v_max}")));
    }
    let last = traj.len() - 1;
    let mut steps = [[0.0; TASK_FEATURES]; TASK_STEPS];
    for (k, step) in steps.iter_mut().enumerate() {
        let idx = (k * last + (TASK_STEPS - 1) / 2) / (TASK_STEPS - 1);
        let s = &traj[idx];
        let v = s.velocity.map(|c| (c / v_max).clamp(-1.0, 1.0));
        let speed = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let w = s.yaw_rate;
        let nonneg = if w >= 0.0 { 1.0 } else { 0.0 };
        *step = [v[0], v[1], v[2], speed, nonneg, 1.0 - nonneg, w.abs()];
    }
    Ok(TaskVector { steps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillRecord {
    pub id: String,
    pub name: String,
    pub env_class: String,
    pub task_name: String,
    /// Key into the catalog's generator registry.
    pub generator: String,
}

/// Declarative inventory read from `rsg-catalog-v1` JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillCatalog {
    pub schema: String,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    pub anchor_class: String,
    pub env_classes: Vec<EnvClass>,
    pub generators: BTreeMap<String, GeneratorSpec>,
    pub skills: Vec<SkillRecord>,
}

fn default_v_max() -> f64 {
    DEFAULT_V_MAX
}

impl SkillCatalog {
    pub fn new(anchor_class: &str, env_classes: Vec<EnvClass>) -> Self {
        Self {
            schema: CATALOG_SCHEMA.into(),
            v_max: DEFAULT_V_MAX,
            anchor_class: anchor_class.into(),
            env_classes,
            generators: BTreeMap::new(),
            skills: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cat: Self = serde_json::from_str(text).map_err(Error::json)?;
        cat.validate()?;
        Ok(cat)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CATALOG_SCHEMA {
            return Err(Error::Schema {
                found: self.schema.clone(),
                expected: CATALOG_SCHEMA.into(),
            });
        }
        if !(self.v_max > 0.0) {
            return Err(Error::Invalid(format!("v_max must be positive, got {}", self.v_max)));
        }
        let mut names = BTreeSet::new();
        for c in &self.env_classes {
            if !names.insert(c.name.as_str()) {
                return Err(Error::DuplicateId(c.name.clone()));
            }
            for (field, iv) in [("friction", c.friction), ("flatness", c.flatness), ("slope", c.slope)] {
                if !(iv.lo.is_finite() && iv.hi.is_finite()) {
                    return Err(Error::Invalid(format!("{}.{field} is not finite", c.name)));
                }
                if iv.lo > iv.hi {
                    return Err(Error::RangeInverted {
                        field: format!("{}.{field}", c.name),
                        lo: iv.lo,
                        hi: iv.hi,
                    });
                }
            }
        }
        if !names.contains(self.anchor_class.as_str()) {
            return Err(Error::Dangling {
                what: "anchor",
                id: "anchor_class".into(),
                target: self.anchor_class.clone(),
            });
        }
        for (id, g) in &self.generators {
            g.validate()
                .map_err(|m| Error::Invalid(format!("generator {id:?}: {m}")))?;
        }
        let mut ids = BTreeSet::new();
        let mut pairs = BTreeSet::new();
        for s in &self.skills {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
            if !pairs.insert((s.env_class.as_str(), s.task_name.as_str())) {
                return Err(Error::DuplicateId(format!("{}/{}", s.env_class, s.task_name)));
            }
            if !names.contains(s.env_class.as_str()) {
                return Err(Error::Dangling {
                    what: "skill",
                    id: s.id.clone(),
                    target: s.env_class.clone(),
                });
            }
            if !self.generators.contains_key(&s.generator) {
                return Err(Error::Dangling {
                    what: "skill",
                    id: s.id.clone(),
                    target: s.generator.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn env_class(&self, name: &str) -> Option<&EnvClass> {
        self.env_classes.iter().find(|c| c.name == name)
    }

    pub fn skill(&self, id: &str) -> Option<&SkillRecord> {
        self.skills.iter().find(|s| s.id == id)
    }

    pub fn generator(&self, skill: &SkillRecord) -> Result<&GeneratorSpec> {
        self.generators.get(&skill.generator).ok_or_else(|| Error::Dangling {
            what: "skill",
            id: skill.id.clone(),
            target: skill.generator.clone(),
        })
    }

    /// Midpoint instance of the anchor class.
    pub fn anchor(&self) -> EnvInstance {
        self.env_class(&self.anchor_class)
            .expect("validated anchor")
            .midpoint()
    }

    /// Distinct task names in first-appearance order.
    pub fn task_names(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.skills
            .iter()
            .filter(|s| seen.insert(s.task_name.as_str()))
            .map(|s| s.task_name.clone())
            .collect()
    }

    /// Largest `‖(Δf, Δμ)‖` between any two points of the catalog's class boxes.
    pub fn env_pair_norm_max(&self) -> f64 {
        let (mut f_lo, mut f_hi, mut m_lo, mut m_hi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for c in &self.env_classes {
            f_lo = f_lo.min(c.flatness.lo);
            f_hi = f_hi.max(c.flatness.hi);
            m_lo = m_lo.min(c.friction.lo);
            m_hi = m_hi.max(c.friction.hi);
        }
        if self.env_classes.is_empty() {
            return 1.0;
        }
        ((f_hi - f_lo).powi(2) + (m_hi - m_lo).powi(2)).sqrt()
    }

    /// Largest absolute value of each environment feature over all classes.
    pub fn env_feature_scale(&self) -> [f64; 3] {
        let mut s = [0.0f64; 3];
        for c in &self.env_classes {
            for (i, iv) in [c.friction, c.flatness, c.slope].iter().enumerate() {
                s[i] = s[i].max(iv.lo.abs()).max(iv.hi.abs());
            }
        }
        s.map(|v| if v > 0.0 { v } else { 1.0 })
    }
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<SkillCatalog> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path, e))?;
    SkillCatalog::from_json(&text)
}

/// Rolls the skill's generator out `n` times in `anchor_env` with per-rollout
/// disturbances of scale `noise`, returning one task profile per rollout.
pub fn collect_task_instances(
    catalog: &SkillCatalog,
    skill: &SkillRecord,
    anchor_env: &EnvInstance,
    n: usize,
    noise: f64,
    seed: u64,
) -> Result<Vec<TaskVector>> {
    let spec = catalog.generator(skill)?;
    task_instances_for(spec, anchor_env, n, noise, catalog.v_max, seed)
}

pub fn task_instances_for(
    spec: &GeneratorSpec,
    anchor_env: &EnvInstance,
    n: usize,
    noise: f64,
    v_max: f64,
    seed: u64,
) -> Result<Vec<TaskVector>> {
    let period = spec.period_steps(toysim::DT).max(TASK_STEPS);
    let dynamics = EnvDynamics::from_instance(anchor_env).with_disturbance(noise);
    let mut stream = rng::stream(seed, Stream::TaskRollouts);
    (0..n)
        .map(|_| {
            let traj = toysim::rollout(spec, &dynamics, 2 * period, stream.random());
            build_task_vector(&traj.states[period + 1..], v_max)
        })
        .collect()
}

/// Which relation a triple uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    EnvToSkill,
    TaskToSkill,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Entity {
    Env(usize),
    Task(usize),
    Skill(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripleKind {
    Positive,
    Negative,
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactTriple {
    pub head: Entity,
    pub relation: RelationKind,
    pub tail: Entity,
    pub kind: TripleKind,
    /// Soft margin δ; zero for positive and negative triples.
    #[serde(default)]
    pub margin: f64,
}

impl FactTriple {
    pub fn positive(head: Entity, relation: RelationKind, tail: Entity) -> Self {
        Self {
            head,
            relation,
            tail,
            kind: TripleKind::Positive,
            margin: 0.0,
        }
    }
}

/// Materialized graph: context instance pools plus the positive facts linking them to skills.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFacts {
    pub schema: String,
    pub skill_ids: Vec<String>,
    pub env_instances: Vec<EnvInstance>,
    /// Skill index each environment instance was sampled for.
    pub env_owner: Vec<usize>,
    pub task_instances: Vec<TaskVector>,
    pub task_owner: Vec<usize>,
    /// Task class (task name) of each task instance.
    pub task_class: Vec<String>,
    pub positives: Vec<FactTriple>,
}

impl GraphFacts {
    pub fn env_class_of(&self, env: usize) -> &str {
        &self.env_instances[env].class_name
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("facts serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let facts: Self = serde_json::from_str(text).map_err(Error::json)?;
        if facts.schema != FACTS_SCHEMA {
            return Err(Error::Schema {
                found: facts.schema,
                expected: FACTS_SCHEMA.into(),
            });
        }
        let n = facts.skill_ids.len();
        let bad_owner = facts.env_owner.iter().chain(&facts.task_owner).any(|&o| o >= n);
        if bad_owner
            || facts.env_owner.len() != facts.env_instances.len()
            || facts.task_owner.len() != facts.task_instances.len()
            || facts.task_class.len() != facts.task_instances.len()
        {
            return Err(Error::Invalid("facts file has inconsistent instance tables".into()));
        }
        Ok(facts)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Samples `n` environment instances and `n` anchor task instances per skill.
///
/// The instance pools are fixed here, once, and reused for every training epoch.
pub fn materialize(catalog: &SkillCatalog, n: usize, seed: u64) -> Result<GraphFacts> {
    let mut facts = GraphFacts {
        schema: FACTS_SCHEMA.into(),
        skill_ids: Vec::new(),
        env_instances: Vec::new(),
        env_owner: Vec::new(),
        task_instances: Vec::new(),
        task_owner: Vec::new(),
        task_class: Vec::new(),
        positives: Vec::new(),
    };
    for k in 0..catalog.skills.len() {
        append_skill_facts(&mut facts, catalog, k, n, seed)?;
    }
    Ok(facts)
}

/// Samples instances and positive facts for skill `k`, which must be the next
/// skill `facts` does not yet cover. Per-skill seeding makes appending
/// equivalent to re-materializing the whole catalog.
pub fn append_skill_facts(facts: &mut GraphFacts, catalog: &SkillCatalog, k: usize, n: usize, seed: u64) -> Result<()> {
    if facts.skill_ids.len() != k {
        return Err(Error::Dimension {
            expected: k,
            got: facts.skill_ids.len(),
        });
    }
    let skill = catalog
        .skills
        .get(k)
        .ok_or_else(|| Error::Invalid(format!("catalog has no skill at index {k}")))?;
    let class = catalog.env_class(&skill.env_class).ok_or_else(|| Error::Dangling {
        what: "env class",
        id: skill.id.clone(),
        target: skill.env_class.clone(),
    })?;
    let tasks = collect_task_instances(
        catalog,
        skill,
        &catalog.anchor(),
        n,
        DEFAULT_TASK_NOISE,
        rng::mix(seed, 2 * k as u64 + 1),
    )?;
    facts.skill_ids.push(skill.id.clone());
    for env in sample_env_instances(class, n, rng::mix(seed, 2 * k as u64)) {
        let idx = facts.env_instances.len();
        facts.env_instances.push(env);
        facts.env_owner.push(k);
        facts.positives.push(FactTriple::positive(
            Entity::Env(idx),
            RelationKind::EnvToSkill,
            Entity::Skill(k),
        ));
    }
    for t in tasks {
        let idx = facts.task_instances.len();
        facts.task_instances.push(t);
        facts.task_owner.push(k);
        facts.task_class.push(skill.task_name.clone());
        facts.positives.push(FactTriple::positive(
            Entity::Task(idx),
            RelationKind::TaskToSkill,
            Entity::Skill(k),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn state(v: [f64; 3], w: f64) -> BodyState {
        BodyState {
            position: [0.0; 3],
            velocity: v,
            yaw: 0.0,
            yaw_rate: w,
            height: 0.3,
            pitch: 0.0,
        }
    }

    #[test]
    fn full_catalog_counts() {
        let cat = fixtures::full_catalog();
        cat.validate().unwrap();
        assert_eq!(cat.skills.len(), 320);
        assert_eq!(cat.env_classes.len(), 12);
        assert_eq!(cat.task_names().len(), 31);
        let indoor = cat.env_class("Indoor Floor").unwrap();
        assert_eq!(indoor.friction, Interval::new(0.6, 0.9));
        assert_eq!(indoor.flatness, Interval::point(0.0));
        assert_eq!(indoor.slope, Interval::point(0.0));
    }

    #[test]
    fn empty_skill_list_is_valid() {
        let cat = SkillCatalog::new("Indoor Floor", fixtures::full_env_classes());
        let back = SkillCatalog::from_json(&cat.to_json()).unwrap();
        assert!(back.skills.is_empty());
    }

    #[test]
    fn catalog_round_trips() {
        let cat = fixtures::full_catalog();
        assert_eq!(SkillCatalog::from_json(&cat.to_json()).unwrap(), cat);
    }

    #[test]
    fn rejects_duplicates_inversions_and_dangling_refs() {
        let base = fixtures::synthetic_catalog();

        let mut dup = base.clone();
        dup.skills.push(dup.skills[0].clone());
        assert!(matches!(dup.validate(), Err(Error::DuplicateId(_))));

        let mut inv = base.clone();
        inv.env_classes[1].friction = Interval::new(0.5, 0.1);
        assert!(matches!(inv.validate(), Err(Error::RangeInverted { .. })));

        let mut dangling = base.clone();
        dangling.skills[0].generator = "nope".into();
        assert!(matches!(dangling.validate(), Err(Error::Dangling { .. })));

        let err = SkillCatalog::from_json("{\"schema\": \"rsg-catalog-v1\",\n \"anchor_class\": 3}").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn indoor_floor_samples() {
        let cat = fixtures::full_catalog();
        let inst = sample_env_instances(cat.env_class("Indoor Floor").unwrap(), 100, 7);
        assert_eq!(inst.len(), 100);
        for e in &inst {
            assert_eq!(e.flatness, 0.0);
            assert_eq!(e.slope, 0.0);
            assert!((0.6..=0.9).contains(&e.friction));
        }
    }

    #[test]
    fn point_class_samples_identical() {
        let c = EnvClass::new("pt", Interval::point(0.5), Interval::point(1.0), Interval::point(0.1));
        let inst = sample_env_instances(&c, 5, 3);
        assert!(inst.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn upstairs_friction_mean() {
        let cat = fixtures::full_catalog();
        let inst = sample_env_instances(cat.env_class("Upstairs").unwrap(), 1000, 1);
        let mean = inst.iter().map(|e| e.friction).sum::<f64>() / 1000.0;
        assert!((mean - 1.35).abs() < 0.01, "{mean}");
    }

    #[test]
    fn constant_forward_profile() {
        let traj = vec![state([1.0, 0.0, 0.0], 0.0); 30];
        let t = build_task_vector(&traj, 1.0).unwrap();
        for s in t.steps {
            assert_eq!(s, [1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn zero_profile_and_negative_yaw() {
        let t = build_task_vector(&vec![state([0.0; 3], 0.0); 11], 2.0).unwrap();
        assert!(t.steps.iter().all(|s| *s == [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]));
        let t = build_task_vector(&vec![state([0.0; 3], -2.0); 11], 2.0).unwrap();
        assert!(t.steps.iter().all(|s| s[4..] == [0.0, 1.0, 2.0]));
        assert_eq!(t.yaw_rate(3), -2.0);
    }

    #[test]
    fn short_trajectory_rejected() {
        assert!(matches!(
            build_task_vector(&vec![state([0.0; 3], 0.0); 10], 1.0),
            Err(Error::TrajectoryTooShort { len: 10, need: 11 })
        ));
    }

    #[test]
    fn forward_skill_task_instances_move_forward() {
        let cat = fixtures::full_catalog();
        let skill = cat.skills.iter().find(|s| s.task_name == "Forward Walking").unwrap();
        let inst = collect_task_instances(&cat, skill, &cat.anchor(), 100, 1.0, 3).unwrap();
        assert_eq!(inst.len(), 100);
        for k in 0..TASK_STEPS {
            let mean = inst.iter().map(|t| t.steps[k][0]).sum::<f64>() / 100.0;
            assert!(mean > 0.0);
        }
        let quiet = collect_task_instances(&cat, skill, &cat.anchor(), 4, 0.0, 3).unwrap();
        assert!(quiet.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(collect_task_instances(&cat, skill, &cat.anchor(), 1, 1.0, 3).unwrap().len(), 1);
    }

    #[test]
    fn task_json_accepts_both_shapes() {
        let t = build_task_vector(&vec![state([0.5, -0.2, 0.0], 0.7); 11], 2.0).unwrap();
        assert_eq!(TaskVector::from_json(&t.to_json()).unwrap(), t);
        let flat = serde_json::to_string(&t.flat()).unwrap();
        assert_eq!(TaskVector::from_json(&flat).unwrap(), t);
        assert!(matches!(
            TaskVector::from_json("[1, 2, 3]"),
            Err(Error::Dimension { expected: 77, got: 3 })
        ));
    }

    #[test]
    fn pair_norm_max_spans_flatness_and_friction() {
        let cat = fixtures::full_catalog();
        let expect = (25.375f64.powi(2) + (1.5f64 - 0.01).powi(2)).sqrt();
        assert_relative_eq!(cat.env_pair_norm_max(), expect, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn sampled_instances_stay_in_class(class_idx in 0usize..12, seed in any::<u64>()) {
            let classes = fixtures::full_env_classes();
            let c = &classes[class_idx];
            let a = sample_env_instances(c, 20, seed);
            prop_assert!(a.iter().all(|e| c.contains(e)));
            prop_assert_eq!(a, sample_env_instances(c, 20, seed));
        }

        #[test]
        fn task_vector_invariants_hold(
            vs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0, -6.0f64..6.0), 11..40),
            zero_yaw in any::<bool>(),
        ) {
            let traj: Vec<_> = vs.iter().map(|&(x, y, z, w)| state([x, y, z], if zero_yaw { 0.0 } else { w })).collect();
            let t = build_task_vector(&traj, 2.0).unwrap();
            prop_assert!(t.check_invariants().is_ok());
        }
    }
}
