//! Clipped-surrogate policy gradient over composition weights, bias and
//! generator parameters, with Gaussian exploration in parameter space.

use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use tracing::debug;

use super::{evaluate_composition, project_simplex, BiasShape, CompositionParams, BIAS_BOUND, EVAL_HORIZON};
use crate::catalog::EnvInstance;
use crate::rng::{self, stream, Stream};
use crate::toysim::{SkillGenerator, TaskCommand, TUNABLE_PARAMS};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    /// Environment steps available for exploration rollouts.
    pub budget_steps: usize,
    pub horizon: usize,
    pub episodes_per_update: usize,
    /// Exploration standard deviation in parameter space.
    pub sigma: f64,
    pub lr: f64,
    pub clip: f64,
    /// Surrogate ascent steps per batch.
    pub epochs: usize,
    /// Step size of the running-mean return baseline.
    pub baseline_rate: f64,
    pub bias_shape: BiasShape,
    pub bias_bound: f64,
    /// Also adapt each skill's generator parameters.
    pub tune_generators: bool,
    /// Largest KL divergence between successive exploration distributions;
    /// surrogate epochs stop once an update reaches it.
    pub target_kl: f64,
    /// Draw exploration noise in mirrored pairs `μ ± σz` sharing a rollout seed.
    pub antithetic: bool,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            budget_steps: 60_000,
            horizon: EVAL_HORIZON,
            episodes_per_update: 8,
            sigma: 0.05,
            lr: 0.02,
            clip: 0.2,
            epochs: 4,
            baseline_rate: 0.2,
            bias_shape: BiasShape::Scalar,
            bias_bound: BIAS_BOUND,
            tune_generators: true,
            antithetic: true,
            target_kl: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Exploration steps consumed so far.
    pub env_steps: usize,
    /// Mean return of the exploration episodes of this update.
    pub sample_return: f64,
    /// Return of the mean policy after this update.
    pub policy_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneOutcome {
    pub params: CompositionParams<f64>,
    pub generators: Vec<SkillGenerator>,
    pub curve: Vec<CurvePoint>,
    pub env_steps: usize,
    /// Return of the initial mean policy.
    pub initial_return: f64,
}

impl FinetuneOutcome {
    pub fn final_return(&self) -> f64 {
        self.curve.last().map_or(self.initial_return, |c| c.policy_return)
    }

    /// Steps consumed when the mean policy first reaches `level`.
    pub fn steps_to(&self, level: f64) -> Option<usize> {
        if self.initial_return >= level {
            return Some(0);
        }
        self.curve.iter().find(|c| c.policy_return >= level).map(|c| c.env_steps)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let err = |e: csv::Error| Error::Invalid(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record(["env_steps", "sample_return", "policy_return"]).map_err(err)?;
        for c in &self.curve {
            w.write_record([
                c.env_steps.to_string(),
                format!("{:e}", c.sample_return),
                format!("{:e}", c.policy_return),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Flat parameter layout `[w…, b…, φ₁…, φₙ…]`.
struct Layout {
    n: usize,
    bias: usize,
    tune: bool,
}

impl Layout {
    fn pack(&self, p: &CompositionParams<f64>, gens: &[SkillGenerator]) -> Vec<f64> {
        let mut v = p.to_vector();
        if self.tune {
            v.extend(gens.iter().flat_map(|g| g.tunable()));
        }
        v
    }

    /// Maps a raw parameter vector onto a valid policy.
    fn unpack(
        &self,
        theta: &[f64],
        base: &[SkillGenerator],
        bound: f64,
    ) -> (CompositionParams<f64>, Vec<SkillGenerator>) {
        let weights = project_simplex(&theta[..self.n]);
        let bias = theta[self.n..self.n + self.bias]
            .iter()
            .map(|b| b.clamp(-bound, bound))
            .collect();
        let mut gens = base.to_vec();
        if self.tune {
            let off = self.n + self.bias;
            for (i, g) in gens.iter_mut().enumerate() {
                let phi = &theta[off + i * TUNABLE_PARAMS..off + (i + 1) * TUNABLE_PARAMS];
                g.set_tunable(phi);
                g.params.amplitude = g.params.amplitude.max(0.0);
                g.params.vertical = g.params.vertical.max(0.0);
            }
        }
        (CompositionParams { weights, bias }, gens)
    }
}

/// Monte-Carlo score-function estimate of `∇_μ E[R(θ)]` for `θ ~ N(μ, σ²I)`:
/// the mean of `(R_i - baseline) (θ_i - μ) / σ²`.
pub fn score_function_gradient(samples: &[Vec<f64>], returns: &[f64], mu: &[f64], sigma: f64, baseline: f64) -> Vec<f64> {
    let mut g = vec![0.0; mu.len()];
    for (theta, r) in samples.iter().zip(returns) {
        for ((gi, t), m) in g.iter_mut().zip(theta).zip(mu) {
            *gi += (r - baseline) * (t - m) / (sigma * sigma);
        }
    }
    let n = samples.len().max(1) as f64;
    g.iter_mut().for_each(|v| *v /= n);
    g
}

/// Gradient of the clipped surrogate `mean(min(ρA, clip(ρ)A))` with respect to the mean `mu`.
fn clipped_surrogate_gradient(
    samples: &[Vec<f64>],
    advantages: &[f64],
    mu: &[f64],
    mu_old: &[f64],
    sigma: f64,
    clip: f64,
) -> Vec<f64> {
    let s2 = sigma * sigma;
    let mut g = vec![0.0; mu.len()];
    for (theta, &a) in samples.iter().zip(advantages) {
        let sq = |m: &[f64]| theta.iter().zip(m).map(|(t, m)| (t - m).powi(2)).sum::<f64>();
        let ratio = ((sq(mu_old) - sq(mu)) / (2.0 * s2)).exp();
        let clipped = (a > 0.0 && ratio > 1.0 + clip) || (a < 0.0 && ratio < 1.0 - clip);
        if clipped {
            continue;
        }
        for ((gi, t), m) in g.iter_mut().zip(theta).zip(mu) {
            *gi += a * ratio * (t - m) / s2;
        }
    }
    let n = samples.len().max(1) as f64;
    g.iter_mut().for_each(|v| *v /= n);
    g
}

/// Fine-tunes the composition of `generators` starting from score-seeded weights.
pub fn finetune(
    generators: &[SkillGenerator],
    init_scores: &[f64],
    cmd: &TaskCommand,
    env: &EnvInstance,
    cfg: &FinetuneConfig,
    seed: u64,
) -> Result<FinetuneOutcome> {
    if generators.len() != init_scores.len() {
        return Err(Error::Dimension {
            expected: generators.len(),
            got: init_scores.len(),
        });
    }
    let init = CompositionParams::from_scores(init_scores, cfg.bias_shape)?;
    let top = init_scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map_or(0, |(i, _)| i);
    finetune_from(generators, init, top, cmd, env, cfg, seed)
}

/// Fine-tunes from explicit initial parameters; `top` names the skill whose
/// solo return seeds the baseline.
pub fn finetune_from(
    generators: &[SkillGenerator],
    init: CompositionParams<f64>,
    top: usize,
    cmd: &TaskCommand,
    env: &EnvInstance,
    cfg: &FinetuneConfig,
    seed: u64,
) -> Result<FinetuneOutcome> {
    init.validate()?;
    if generators.is_empty() || generators.len() != init.weights.len() || top >= generators.len() {
        return Err(Error::Dimension {
            expected: generators.len().max(1),
            got: init.weights.len(),
        });
    }
    for g in generators {
        g.validate().map_err(Error::Invalid)?;
    }
    if !(cfg.sigma > 0.0) || !(cfg.lr > 0.0) || cfg.horizon == 0 || cfg.episodes_per_update == 0 {
        return Err(Error::Invalid("sigma, lr, horizon and batch size must be positive".into()));
    }
    let layout = Layout {
        n: generators.len(),
        bias: init.bias.len(),
        tune: cfg.tune_generators,
    };
    let eval_seed = rng::mix(seed, u64::MAX);
    let evaluate = |p: &CompositionParams<f64>, g: &[SkillGenerator], s: u64| {
        evaluate_composition(g, p, cmd, env, cfg.horizon, s)
    };
    let initial_return = evaluate(&init, generators, eval_seed);
    let mut solo = vec![0.0; generators.len()];
    solo[top] = 1.0;
    let solo = CompositionParams {
        weights: solo,
        bias: vec![0.0; init.bias.len()],
    };
    let mut baseline = evaluate(&solo, generators, eval_seed);

    let mut mu = layout.pack(&init, generators);
    let mut rng = stream(seed, Stream::Finetune);
    let mut curve = Vec::new();
    let mut steps = 0usize;
    let mut episode = 0u64;
    let mut current = (init, generators.to_vec());
    let batch_steps = cfg.episodes_per_update * cfg.horizon;
    while steps + batch_steps <= cfg.budget_steps {
        let mut samples = Vec::with_capacity(cfg.episodes_per_update);
        let mut returns = Vec::with_capacity(cfg.episodes_per_update);
        let mut z: Vec<f64> = Vec::new();
        for k in 0..cfg.episodes_per_update {
            let mirrored = cfg.antithetic && k % 2 == 1;
            if mirrored {
                z.iter_mut().for_each(|v| *v = -*v);
            } else {
                z = (0..mu.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
                episode += 1;
            }
            let theta: Vec<f64> = mu.iter().zip(&z).map(|(m, z)| m + cfg.sigma * z).collect();
            let (p, g) = layout.unpack(&theta, generators, cfg.bias_bound);
            returns.push(evaluate(&p, &g, rng::mix(seed, episode)));
            samples.push(theta);
        }
        steps += batch_steps;
        if returns.iter().any(|r| !r.is_finite()) {
            return Err(Error::Numerical(format!("non-finite return after {steps} steps")));
        }
        let mean_r = returns.iter().sum::<f64>() / returns.len() as f64;
        let rms = (returns.iter().map(|r| (r - baseline).powi(2)).sum::<f64>() / returns.len() as f64).sqrt();
        let advantages: Vec<f64> = returns.iter().map(|r| (r - baseline) / (rms + 1e-8)).collect();
        let mu_old = mu.clone();
        for _ in 0..cfg.epochs {
            let g = clipped_surrogate_gradient(&samples, &advantages, &mu, &mu_old, cfg.sigma, cfg.clip);
            // the score gradient carries a 1/σ factor per unit step; rescale so `lr` is in parameter units
            for (m, gi) in mu.iter_mut().zip(&g) {
                *m += cfg.lr * cfg.sigma * gi;
            }
            // KL(N(μ_old, σ²I) ‖ N(μ, σ²I)) = |μ - μ_old|² / 2σ²
            let shift2: f64 = mu.iter().zip(&mu_old).map(|(a, b)| (a - b).powi(2)).sum();
            let kl = shift2 / (2.0 * cfg.sigma * cfg.sigma);
            if kl >= cfg.target_kl {
                let shrink = (cfg.target_kl / kl).sqrt();
                for (m, o) in mu.iter_mut().zip(&mu_old) {
                    *m = o + (*m - o) * shrink;
                }
                break;
            }
        }
        let projected = project_simplex(&mu[..layout.n]);
        mu[..layout.n].copy_from_slice(&projected);
        for b in &mut mu[layout.n..layout.n + layout.bias] {
            *b = b.clamp(-cfg.bias_bound, cfg.bias_bound);
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("parameters became non-finite after {steps} steps")));
        }
        baseline += cfg.baseline_rate * (mean_r - baseline);
        current = layout.unpack(&mu, generators, cfg.bias_bound);
        let policy_return = evaluate(&current.0, &current.1, eval_seed);
        debug!(steps, mean_r, policy_return, "finetune update");
        curve.push(CurvePoint {
            env_steps: steps,
            sample_return: mean_r,
            policy_return,
        });
    }
    Ok(FinetuneOutcome {
        params: current.0,
        generators: current.1,
        curve,
        env_steps: steps,
        initial_return,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::EnvInstance;

    #[test]
    fn score_function_matches_finite_difference_on_a_toy() {
        // R(θ) = -(θ-1)²; E[R] = -(μ-1)² - σ², so d/dμ E[R] = -2(μ-1)
        let (mu, sigma, n) = (0.3, 0.1, 10_000);
        let mut rng = stream(11, Stream::Finetune);
        let samples: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                vec![mu + sigma * z]
            })
            .collect();
        let returns: Vec<f64> = samples.iter().map(|t| -(t[0] - 1.0f64).powi(2)).collect();
        let g = score_function_gradient(&samples, &returns, &[mu], sigma, 0.0)[0];
        let expect = |m: f64| -(m - 1.0f64).powi(2) - sigma * sigma;
        let h = 1e-5;
        let fd = (expect(mu + h) - expect(mu - h)) / (2.0 * h);
        let per: Vec<f64> = samples
            .iter()
            .zip(&returns)
            .map(|(t, r)| r * (t[0] - mu) / (sigma * sigma))
            .collect();
        let mean = per.iter().sum::<f64>() / n as f64;
        let se = (per.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt() / (n as f64).sqrt();
        assert!((g - fd).abs() < 3.0 * se, "estimate {g}, fd {fd}, se {se}");
    }

    #[test]
    fn zero_budget_returns_initialization() {
        let gens = [SkillGenerator::gait(0.6, 0.0, 0.0), SkillGenerator::gait(0.6, 1.57, 0.0)];
        let env = EnvInstance::new("Indoor Floor", 0.75, 0.0, 0.0);
        let cfg = FinetuneConfig {
            budget_steps: 0,
            ..Default::default()
        };
        let out = finetune(&gens, &[0.8, 0.2], &TaskCommand::constant(0.5, 0.0, 0.0), &env, &cfg, 1).unwrap();
        assert!(out.curve.is_empty());
        assert_eq!(out.generators, gens);
        assert!((out.params.weights[0] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn updates_stay_on_the_simplex() {
        let gens = [SkillGenerator::gait(0.6, 0.0, 0.0), SkillGenerator::gait(0.6, 1.57, 0.0)];
        let env = EnvInstance::new("Indoor Floor", 0.75, 0.0, 0.0);
        let cfg = FinetuneConfig {
            budget_steps: 20 * 8 * EVAL_HORIZON,
            ..Default::default()
        };
        let cmd = TaskCommand::constant(0.3, 0.3, 0.0);
        let a = finetune(&gens, &[0.5, 0.5], &cmd, &env, &cfg, 2).unwrap();
        let b = finetune(&gens, &[0.5, 0.5], &cmd, &env, &cfg, 2).unwrap();
        assert_eq!(a, b);
        assert!((a.params.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(a.params.weights.iter().all(|&w| w >= 0.0));
        assert_eq!(a.curve.len(), 20);
    }
}
