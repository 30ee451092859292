//! Bayesian optimization of composition parameters.

use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use tracing::debug;

use super::gp::{GaussianProcess, GpHyper};
use super::{evaluate_composition, BiasShape, CompositionParams, BIAS_BOUND, EVAL_HORIZON};
use crate::catalog::EnvInstance;
use crate::rng::{self, stream, Stream};
use crate::toysim::{SkillGenerator, TaskCommand};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoConfig {
    /// Objective evaluations, including the initial point.
    pub budget: usize,
    /// Random candidates scored by expected improvement per iteration.
    pub candidates: usize,
    pub bias_shape: BiasShape,
    pub bias_bound: f64,
    pub horizon: usize,
    pub hyper: GpHyper,
    /// Exploration offset in expected improvement.
    pub xi: f64,
    /// Fit the GP to returns minus their running mean.
    pub center: bool,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            budget: 60,
            candidates: 256,
            bias_shape: BiasShape::Scalar,
            bias_bound: BIAS_BOUND,
            horizon: EVAL_HORIZON,
            hyper: GpHyper::default(),
            xi: 0.01,
            center: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoStep {
    pub iteration: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub incumbent: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoTrace {
    pub steps: Vec<BoStep>,
}

impl BoTrace {
    pub fn best(&self) -> f64 {
        self.steps.last().map_or(f64::NEG_INFINITY, |s| s.incumbent)
    }

    /// First iteration (1-based) whose incumbent reaches `level`.
    pub fn iterations_to(&self, level: f64) -> Option<usize> {
        self.steps.iter().find(|s| s.incumbent >= level).map(|s| s.iteration)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let err = |e: csv::Error| Error::Invalid(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record(["iteration", "x", "y", "incumbent"]).map_err(err)?;
        for s in &self.steps {
            let x: Vec<String> = s.x.iter().map(|v| format!("{v:e}")).collect();
            w.write_record([
                s.iteration.to_string(),
                x.join(";"),
                format!("{:e}", s.y),
                format!("{:e}", s.incumbent),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Expected improvement of a Gaussian `(mean, var)` over `best + xi`.
pub fn expected_improvement(mean: f64, var: f64, best: f64, xi: f64) -> f64 {
    let sd = var.sqrt();
    let gain = mean - best - xi;
    if sd < 1e-12 {
        return gain.max(0.0);
    }
    let z = gain / sd;
    gain * normal_cdf(z) + sd * normal_pdf(z)
}

/// Uniform point of the simplex × bias box.
pub fn random_candidate(n: usize, cfg: &BoConfig, rng: &mut rng::Rng) -> CompositionParams<f64> {
    let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = e.iter().sum();
    let bias = (0..cfg.bias_shape.len())
        .map(|_| rng.random_range(-cfg.bias_bound..=cfg.bias_bound))
        .collect();
    CompositionParams {
        weights: e.iter().map(|v| v / total).collect(),
        bias,
    }
}

/// Maximizes `objective` starting from `init`; the first evaluation is `init` itself.
///
/// `observer` sees every step as it is recorded.
pub fn bo_maximize<F, O>(
    init: CompositionParams<f64>,
    cfg: &BoConfig,
    seed: u64,
    mut objective: F,
    mut observer: O,
) -> Result<(CompositionParams<f64>, BoTrace)>
where
    F: FnMut(&CompositionParams<f64>) -> Result<f64>,
    O: FnMut(&BoStep),
{
    init.validate()?;
    if cfg.budget == 0 {
        return Err(Error::Invalid("BO budget must be at least 1".into()));
    }
    if init.bias.len() != cfg.bias_shape.len() {
        return Err(Error::Dimension {
            expected: cfg.bias_shape.len(),
            got: init.bias.len(),
        });
    }
    let n = init.weights.len();
    let mut rng = stream(seed, Stream::BoCandidates);
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(cfg.budget);
    let mut ys: Vec<f64> = Vec::with_capacity(cfg.budget);
    let mut best = (init.clone(), f64::NEG_INFINITY);
    let mut trace = BoTrace::default();
    let mut candidate = init;
    for iteration in 1..=cfg.budget {
        let y = objective(&candidate)?;
        if !y.is_finite() {
            return Err(Error::Numerical(format!("objective returned {y} at iteration {iteration}")));
        }
        if y > best.1 {
            best = (candidate.clone(), y);
        }
        let step = BoStep {
            iteration,
            x: candidate.to_vector(),
            y,
            incumbent: best.1,
        };
        observer(&step);
        xs.push(step.x.clone());
        ys.push(y);
        trace.steps.push(step);
        if iteration == cfg.budget {
            break;
        }
        let offset = if cfg.center { ys.iter().sum::<f64>() / ys.len() as f64 } else { 0.0 };
        let centered: Vec<f64> = ys.iter().map(|y| y - offset).collect();
        let gp = GaussianProcess::fit(xs.clone(), centered, cfg.hyper)?;
        let incumbent = best.1 - offset;
        let mut top: Option<(f64, CompositionParams<f64>)> = None;
        for _ in 0..cfg.candidates.max(1) {
            let c = random_candidate(n, cfg, &mut rng);
            let (m, v) = gp.predict(&c.to_vector());
            let ei = expected_improvement(m, v, incumbent, cfg.xi);
            if top.as_ref().is_none_or(|(e, _)| ei > *e) {
                top = Some((ei, c));
            }
        }
        let (ei, next) = top.expect("at least one candidate");
        debug!(iteration, y, incumbent = best.1, ei, "bo step");
        candidate = next;
    }
    Ok((best.0, trace))
}

/// Optimizes the composition of `generators` for `cmd` in `env`.
///
/// Weights start at `init_scores` renormalized onto the simplex with zero bias.
pub fn bo_optimize(
    generators: &[SkillGenerator],
    init_scores: &[f64],
    cmd: &TaskCommand,
    env: &EnvInstance,
    cfg: &BoConfig,
    seed: u64,
) -> Result<(CompositionParams<f64>, BoTrace)> {
    bo_optimize_observed(generators, init_scores, cmd, env, cfg, seed, |_| {})
}

pub fn bo_optimize_observed<O: FnMut(&BoStep)>(
    generators: &[SkillGenerator],
    init_scores: &[f64],
    cmd: &TaskCommand,
    env: &EnvInstance,
    cfg: &BoConfig,
    seed: u64,
    observer: O,
) -> Result<(CompositionParams<f64>, BoTrace)> {
    check_skill_count(generators.len(), init_scores.len())?;
    let init = CompositionParams::from_scores(init_scores, cfg.bias_shape)?;
    let rollout_seed = rng::mix(seed, 0);
    bo_maximize(
        init,
        cfg,
        seed,
        |p| Ok(evaluate_composition(generators, p, cmd, env, cfg.horizon, rollout_seed)),
        observer,
    )
}

pub(crate) fn check_skill_count(generators: usize, scores: usize) -> Result<()> {
    if generators != scores {
        return Err(Error::Dimension {
            expected: generators,
            got: scores,
        });
    }
    if !(2..=5).contains(&generators) {
        return Err(Error::Invalid(format!("composition takes 2 to 5 skills, got {generators}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(p: &CompositionParams<f64>) -> Result<f64> {
        Ok(-((p.weights[0] - 0.8).powi(2) + (p.bias[0] - 0.1).powi(2)))
    }

    #[test]
    fn budget_one_returns_initialization() {
        let init = CompositionParams::new(vec![0.5, 0.5], vec![0.0]).unwrap();
        let cfg = BoConfig { budget: 1, ..Default::default() };
        let (p, trace) = bo_maximize(init.clone(), &cfg, 3, quadratic, |_| {}).unwrap();
        assert_eq!(p, init);
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.steps[0].y, quadratic(&init).unwrap());
    }

    #[test]
    fn incumbent_is_monotone_and_improves() {
        let init = CompositionParams::new(vec![0.2, 0.8], vec![-0.3]).unwrap();
        let cfg = BoConfig { budget: 30, ..Default::default() };
        let mut seen = Vec::new();
        let (p, trace) = bo_maximize(init, &cfg, 5, quadratic, |s| seen.push(s.incumbent)).unwrap();
        assert!(trace.steps.windows(2).all(|w| w[1].incumbent >= w[0].incumbent));
        assert_eq!(seen.len(), 30);
        assert!(trace.best() > -0.01, "best {}", trace.best());
        assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_given_seed() {
        let init = CompositionParams::new(vec![0.5, 0.5], vec![0.0]).unwrap();
        let cfg = BoConfig { budget: 10, ..Default::default() };
        let a = bo_maximize(init.clone(), &cfg, 9, quadratic, |_| {}).unwrap();
        let b = bo_maximize(init, &cfg, 9, quadratic, |_| {}).unwrap();
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn candidates_stay_in_the_box() {
        let cfg = BoConfig::default();
        let mut rng = stream(1, Stream::BoCandidates);
        for _ in 0..200 {
            let c = random_candidate(3, &cfg, &mut rng);
            assert!(c.validate().is_ok());
            assert!(c.bias[0].abs() <= BIAS_BOUND);
        }
    }

    #[test]
    fn expected_improvement_limits() {
        assert_eq!(expected_improvement(2.0, 0.0, 1.0, 0.0), 1.0);
        assert_eq!(expected_improvement(0.0, 0.0, 1.0, 0.0), 0.0);
        assert!((expected_improvement(1.0, 1.0, 1.0, 0.0) - normal_pdf(0.0)).abs() < 1e-15);
    }
}
