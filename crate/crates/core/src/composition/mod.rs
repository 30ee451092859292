//! Linear action composition of fundamental skills and its optimizers.

pub mod bo;
pub mod finetune;
pub mod gp;
pub mod register;

use serde::{Deserialize, Serialize};

pub use bo::{bo_maximize, bo_optimize, bo_optimize_observed, BoConfig, BoStep, BoTrace};
pub use finetune::{finetune, finetune_from, FinetuneConfig, FinetuneOutcome};
pub use gp::{gp_fit, gp_predict, GaussianProcess, GpHyper};
pub use register::{add_skill_to_catalog, register_new_skill, NewSkill, Registration};

use crate::catalog::{EnvInstance, SkillCatalog};
use crate::toysim::{
    self, CompositePolicy, EnvDynamics, GeneratorSpec, SkillGenerator, TaskCommand, WeightedGenerator, ACTION_DIM,
};
use crate::{Error, Real, Result};

/// Default bound on the bias magnitude, in action units.
pub const BIAS_BOUND: f64 = 0.5;
/// Rollout length used to score a composition.
pub const EVAL_HORIZON: usize = 150;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasShape {
    #[default]
    Scalar,
    PerAction,
}

impl BiasShape {
    pub fn len(self) -> usize {
        match self {
            BiasShape::Scalar => 1,
            BiasShape::PerAction => ACTION_DIM,
        }
    }
}

/// Simplex weights over the selected skills plus an action bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CompositionParams<T: Real> {
    pub weights: Vec<T>,
    /// One entry (broadcast) or one per action dimension.
    pub bias: Vec<T>,
}

impl<T: Real> CompositionParams<T> {
    pub fn new(weights: Vec<T>, bias: Vec<T>) -> Result<Self> {
        let p = Self { weights, bias };
        p.validate()?;
        Ok(p)
    }

    /// Weights proportional to `scores` (uniform when they sum to zero), zero bias.
    pub fn from_scores(scores: &[f64], shape: BiasShape) -> Result<Self> {
        if scores.is_empty() || scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::Invalid("initial scores must be finite and non-negative".into()));
        }
        let total: f64 = scores.iter().sum();
        let n = scores.len() as f64;
        let weights = scores
            .iter()
            .map(|&s| T::lit(if total > 0.0 { s / total } else { 1.0 / n }))
            .collect();
        Self::new(weights, vec![T::zero(); shape.len()])
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::Invalid("composition needs at least one weight".into()));
        }
        if self.bias.len() != 1 && self.bias.len() != ACTION_DIM {
            return Err(Error::Dimension {
                expected: ACTION_DIM,
                got: self.bias.len(),
            });
        }
        let sum: T = self.weights.iter().copied().sum();
        if self.weights.iter().any(|w| !w.is_finite() || *w < T::zero())
            || (sum - T::one()).abs() > T::lit(1e-9)
        {
            return Err(Error::Invalid(format!("weights must lie on the simplex (sum {sum})")));
        }
        if self.bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::Invalid("bias must be finite".into()));
        }
        Ok(())
    }

    pub fn bias_at(&self, i: usize) -> T {
        if self.bias.len() == 1 {
            self.bias[0]
        } else {
            self.bias[i]
        }
    }

    /// `[w₁ … wₙ, b…]`.
    pub fn to_vector(&self) -> Vec<T> {
        self.weights.iter().chain(&self.bias).copied().collect()
    }

    pub fn from_vector(x: &[T], n: usize) -> Result<Self> {
        if x.len() <= n {
            return Err(Error::Dimension {
                expected: n + 1,
                got: x.len(),
            });
        }
        Self::new(x[..n].to_vec(), x[n..].to_vec())
    }

    pub fn to_f64(&self) -> CompositionParams<f64> {
        CompositionParams {
            weights: self.weights.iter().map(|w| w.as_f64()).collect(),
            bias: self.bias.iter().map(|b| b.as_f64()).collect(),
        }
    }
}

/// `Σ wᵢ aⁱ + b` over the rows of `actions`.
pub fn compose_action<T: Real>(actions: &[Vec<T>], params: &CompositionParams<T>) -> Result<Vec<T>> {
    params.validate()?;
    if actions.len() != params.weights.len() {
        return Err(Error::Dimension {
            expected: params.weights.len(),
            got: actions.len(),
        });
    }
    let dim = actions.first().map_or(0, Vec::len);
    if actions.iter().any(|a| a.len() != dim) || (params.bias.len() != 1 && params.bias.len() != dim) {
        return Err(Error::Dimension {
            expected: params.bias.len().max(1),
            got: dim,
        });
    }
    Ok((0..dim)
        .map(|j| {
            actions
                .iter()
                .zip(&params.weights)
                .map(|(a, &w)| w * a[j])
                .sum::<T>()
                + params.bias_at(j)
        })
        .collect())
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex<T: Real>(v: &[T]) -> Vec<T> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (i, &ui) in u.iter().enumerate() {
        cumsum = cumsum + ui;
        let t = (cumsum - T::one()) / T::lit((i + 1) as f64);
        if ui - t > T::zero() {
            theta = t;
        }
    }
    let mut w: Vec<T> = v.iter().map(|&x| (x - theta).max(T::zero())).collect();
    // absorb rounding so the sum is one to machine precision
    let s: T = w.iter().copied().sum();
    if s > T::zero() {
        w.iter_mut().for_each(|x| *x = *x / s);
    }
    w
}

/// Composite policy for `generators` under `params`.
pub fn composite_policy(generators: &[SkillGenerator], params: &CompositionParams<f64>) -> CompositePolicy {
    CompositePolicy {
        parts: generators
            .iter()
            .zip(&params.weights)
            .map(|(g, &w)| WeightedGenerator {
                weight: w,
                generator: *g,
            })
            .collect(),
        bias: params.bias.clone(),
    }
}

/// Mean `R_target` of the composed policy over one seeded rollout.
pub fn evaluate_composition(
    generators: &[SkillGenerator],
    params: &CompositionParams<f64>,
    cmd: &TaskCommand,
    env: &EnvInstance,
    horizon: usize,
    seed: u64,
) -> f64 {
    let policy = composite_policy(generators, params);
    let dynamics = EnvDynamics::from_instance(env);
    let traj = toysim::rollout(&policy, &dynamics, horizon, seed);
    toysim::r_target(&traj, cmd)
}

/// Looks up the primitive generator of each skill id.
pub fn primitive_generators(catalog: &SkillCatalog, ids: &[String]) -> Result<Vec<SkillGenerator>> {
    ids.iter()
        .map(|id| {
            let skill = catalog
                .skill(id)
                .ok_or_else(|| Error::Invalid(format!("unknown skill {id}")))?;
            match catalog.generator(skill)? {
                GeneratorSpec::Primitive(g) => Ok(*g),
                GeneratorSpec::Composite(_) => Err(Error::Invalid(format!(
                    "skill {id} is itself a composition and cannot be recombined"
                ))),
            }
        })
        .collect()
}
