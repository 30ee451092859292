//! Gaussian-process regression with a squared-exponential kernel.

use serde::{Deserialize, Serialize};

use crate::linalg::Cholesky;
use crate::{Error, Real, Result};

/// Diagonal jitter added once when the first factorization fails.
pub const JITTER: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub sigma_f: f64,
    pub length: f64,
    pub sigma_noise: f64,
    pub mean: f64,
}

impl Default for GpHyper {
    fn default() -> Self {
        Self {
            sigma_f: 2.0,
            length: 1.0,
            sigma_noise: 1e-4,
            mean: 0.0,
        }
    }
}

impl GpHyper {
    pub fn kernel<T: Real>(&self, a: &[T], b: &[T]) -> T {
        let d2: T = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
        let sf = T::lit(self.sigma_f);
        let l = T::lit(self.length);
        sf * sf * (-d2 / (T::lit(2.0) * l * l)).exp()
    }
}

#[derive(Debug, Clone)]
pub struct GaussianProcess<T: Real> {
    pub hyper: GpHyper,
    inputs: Vec<Vec<T>>,
    observations: Vec<T>,
    chol: Cholesky<T>,
    /// `(K + σ²I)⁻¹ (y - m₀)`.
    alpha: Vec<T>,
    jittered: bool,
}

impl<T: Real> GaussianProcess<T> {
    /// Factorizes `K + σ_noise² I`; on failure retries once with extra jitter.
    pub fn fit(inputs: Vec<Vec<T>>, observations: Vec<T>, hyper: GpHyper) -> Result<Self> {
        let n = inputs.len();
        if n == 0 || n != observations.len() {
            return Err(Error::Dimension {
                expected: n.max(1),
                got: observations.len(),
            });
        }
        let d = inputs[0].len();
        if inputs.iter().any(|x| x.len() != d) {
            return Err(Error::Invalid("GP inputs have differing dimensions".into()));
        }
        if inputs.iter().flatten().chain(&observations).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite GP training data".into()));
        }
        let noise = T::lit(hyper.sigma_noise * hyper.sigma_noise);
        let mut k = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = hyper.kernel(&inputs[i], &inputs[j]);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
            k[i * n + i] = k[i * n + i] + noise;
        }
        let (chol, jittered) = match Cholesky::factor(&k, n) {
            Some(c) => (c, false),
            None => {
                let jitter = T::lit(JITTER * hyper.sigma_f * hyper.sigma_f);
                for i in 0..n {
                    k[i * n + i] = k[i * n + i] + jitter;
                }
                let c = Cholesky::factor(&k, n).ok_or_else(|| {
                    Error::Numerical(format!("GP kernel matrix of {n} points is not positive definite even with jitter"))
                })?;
                (c, true)
            }
        };
        let m0 = T::lit(hyper.mean);
        let centered: Vec<T> = observations.iter().map(|&y| y - m0).collect();
        let alpha = chol.solve(&centered);
        Ok(Self {
            hyper,
            inputs,
            observations,
            chol,
            alpha,
            jittered,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn jittered(&self) -> bool {
        self.jittered
    }

    pub fn observations(&self) -> &[T] {
        &self.observations
    }

    /// Posterior mean and variance at `x`; the variance is clamped at zero.
    pub fn predict(&self, x: &[T]) -> (T, T) {
        let k: Vec<T> = self.inputs.iter().map(|xi| self.hyper.kernel(xi, x)).collect();
        let mean = T::lit(self.hyper.mean) + k.iter().zip(&self.alpha).map(|(&a, &b)| a * b).sum::<T>();
        let v = self.chol.solve_lower(&k);
        let var = self.hyper.kernel(x, x) - v.iter().map(|&a| a * a).sum::<T>();
        (mean, var.max(T::zero()))
    }
}

pub fn gp_fit<T: Real>(inputs: Vec<Vec<T>>, observations: Vec<T>, hyper: GpHyper) -> Result<GaussianProcess<T>> {
    GaussianProcess::fit(inputs, observations, hyper)
}

pub fn gp_predict<T: Real>(gp: &GaussianProcess<T>, x: &[T]) -> (T, T) {
    gp.predict(x)
}
