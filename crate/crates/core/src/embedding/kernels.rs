//! Context dissimilarity kernels and the soft-margin map built on them.

use serde::{Deserialize, Serialize};

use crate::catalog::{EnvInstance, TaskVector, TASK_STEPS};

/// Analytic maximum of either task-kernel term over 11 steps.
pub const TASK_KAPPA_CAP: f64 = 2.0 * TASK_STEPS as f64;
pub const ENV_KAPPA_CAP: f64 = 1.0;

/// `max(|Δθ|/2, ‖(Δf, Δμ)‖ / x_max)` where `x_max` is the catalog-wide
/// maximum of the `(Δf, Δμ)` norm.
pub fn env_kappa(a: &EnvInstance, b: &EnvInstance, pair_norm_max: f64) -> f64 {
    let slope = (a.slope - b.slope).abs() / 2.0;
    let df = a.flatness - b.flatness;
    let dmu = a.friction - b.friction;
    let planar = (df * df + dmu * dmu).sqrt() / pair_norm_max;
    slope.max(planar)
}

fn unit(v: [f64; 3]) -> Option<[f64; 3]> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (n > 0.0).then(|| v.map(|c| c / n))
}

/// `max(Σₜ |sign ωₙ − sign ωₒ|, Σₜ [1 − v̂ₙ·v̂ₒ])`.
///
/// Signs come from the one-hot yaw encoding (zero counts as positive). A step
/// where either velocity is zero contributes nothing to the cosine sum.
pub fn task_kappa(a: &TaskVector, b: &TaskVector) -> f64 {
    let mut sign_term = 0.0;
    let mut cos_term = 0.0;
    for k in 0..TASK_STEPS {
        sign_term += (a.yaw_sign(k) - b.yaw_sign(k)).abs();
        let (va, vb) = (a.velocity(k), b.velocity(k));
        if va == vb {
            continue;
        }
        if let (Some(u), Some(v)) = (unit(va), unit(vb)) {
            let c = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]).clamp(-1.0, 1.0);
            cos_term += 1.0 - c;
        }
    }
    sign_term.max(cos_term)
}

/// Linear map from kernel value to soft margin, `δ = min(1, c·κ/κ_cap)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftMargin {
    pub scale: f64,
    pub cap: f64,
}

impl SoftMargin {
    pub fn env() -> Self {
        Self {
            scale: 1.0,
            cap: ENV_KAPPA_CAP,
        }
    }

    pub fn task() -> Self {
        Self {
            scale: 1.0,
            cap: TASK_KAPPA_CAP,
        }
    }

    pub fn delta(&self, kappa: f64) -> f64 {
        soft_margin(kappa, self.scale, self.cap)
    }
}

pub fn soft_margin(kappa: f64, scale: f64, cap: f64) -> f64 {
    (scale * kappa.max(0.0) / cap).min(1.0)
}
