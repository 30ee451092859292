//! Converting a drawn centre-of-mass path into a task query.

use serde::{Deserialize, Serialize};

use crate::catalog::{build_task_vector, TaskVector, TASK_STEPS};
use crate::toysim::{BodyState, NOMINAL_HEIGHT};
use crate::{Error, Result};

pub const DEFAULT_WINDOW: usize = 5;

/// One polyline vertex: position in metres, timestamp in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SketchPoint {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

/// Centered moving average of positions and timestamps over `window` points,
/// shrinking at the ends.
pub fn smooth(points: &[SketchPoint], window: usize) -> Vec<SketchPoint> {
    let half = (window.max(1) / 2).min(points.len().saturating_sub(1) / 2);
    (0..points.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(points.len() - 1);
            let n = (hi - lo + 1) as f64;
            let (sx, sy, st) = points[lo..=hi]
                .iter()
                .fold((0.0, 0.0, 0.0), |a, p| (a.0 + p.x, a.1 + p.y, a.2 + p.t));
            SketchPoint {
                x: sx / n,
                y: sy / n,
                t: st / n,
            }
        })
        .collect()
}

/// `n` points equally spaced in arc length, with interpolated timestamps.
pub fn resample(points: &[SketchPoint], n: usize) -> Vec<SketchPoint> {
    let mut cum = vec![0.0];
    for w in points.windows(2) {
        let d = ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt();
        cum.push(cum.last().unwrap() + d);
    }
    let total = *cum.last().unwrap();
    let mut seg = 0;
    (0..n)
        .map(|k| {
            let target = total * k as f64 / (n - 1) as f64;
            while seg + 1 < points.len() - 1 && cum[seg + 1] < target {
                seg += 1;
            }
            let (a, b) = (points[seg], points[(seg + 1).min(points.len() - 1)]);
            let span = cum[(seg + 1).min(points.len() - 1)] - cum[seg];
            let u = if span > 0.0 { ((target - cum[seg]) / span).clamp(0.0, 1.0) } else { 0.0 };
            SketchPoint {
                x: a.x + u * (b.x - a.x),
                y: a.y + u * (b.y - a.y),
                t: a.t + u * (b.t - a.t),
            }
        })
        .collect()
}

/// Derivative of the parabola through three neighbouring samples, evaluated
/// at sample `i`. Falls back to a two-point slope when only two distinct
/// timestamps are available.
fn derivative(t: &[f64], y: &[f64], i: usize) -> f64 {
    let n = t.len();
    if n >= 3 {
        let j = i.clamp(1, n - 2);
        let (t0, t1, t2) = (t[j - 1], t[j], t[j + 1]);
        let (h0, h1, h2) = (t0 - t1, t1 - t2, t0 - t2);
        if h0 != 0.0 && h1 != 0.0 && h2 != 0.0 {
            let x = t[i];
            let l0 = (2.0 * x - t1 - t2) / (h0 * h2);
            let l1 = (2.0 * x - t0 - t2) / (-h0 * h1);
            let l2 = (2.0 * x - t0 - t1) / (h2 * h1);
            return l0 * y[j - 1] + l1 * y[j] + l2 * y[j + 1];
        }
    }
    let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
    let dt = t[b] - t[a];
    if dt > 0.0 {
        (y[b] - y[a]) / dt
    } else {
        0.0
    }
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI
}

/// Smooths, resamples to 11 waypoints, differentiates, and encodes the path
/// as a task vector. The body starts facing +x and turns with the path
/// tangent; planar velocities are expressed in that turning frame.
pub fn sketch_to_task(points: &[SketchPoint], window: usize, v_max: f64) -> Result<TaskVector> {
    if points.len() < 2 {
        return Err(Error::Invalid(format!("a sketch needs at least 2 points, got {}", points.len())));
    }
    if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite() && p.t.is_finite())) {
        return Err(Error::Invalid("sketch coordinates must be finite".into()));
    }
    if points.windows(2).any(|w| w[1].t < w[0].t) {
        return Err(Error::Invalid("sketch timestamps must be non-decreasing".into()));
    }
    let rest = |_| BodyState {
        position: [0.0; 3],
        velocity: [0.0; 3],
        yaw: 0.0,
        yaw_rate: 0.0,
        height: NOMINAL_HEIGHT,
        pitch: 0.0,
    };
    let degenerate = points.iter().all(|p| p.x == points[0].x && p.y == points[0].y);
    if degenerate {
        let states: Vec<BodyState> = (0..TASK_STEPS).map(rest).collect();
        return build_task_vector(&states, v_max);
    }
    let duration = points.last().unwrap().t - points[0].t;
    if !(duration > 0.0) {
        return Err(Error::Invalid("sketch spans zero time".into()));
    }
    let smoothed = smooth(points, window);
    if smoothed.iter().all(|p| p.x == smoothed[0].x && p.y == smoothed[0].y) {
        let states: Vec<BodyState> = (0..TASK_STEPS).map(rest).collect();
        return build_task_vector(&states, v_max);
    }
    let wp = resample(&smoothed, TASK_STEPS);
    let n = wp.len();
    let ts: Vec<f64> = wp.iter().map(|p| p.t).collect();
    let xs: Vec<f64> = wp.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = wp.iter().map(|p| p.y).collect();
    let vel: Vec<[f64; 2]> = (0..n).map(|i| [derivative(&ts, &xs, i), derivative(&ts, &ys, i)]).collect();
    let heading: Vec<f64> = vel.iter().map(|v| v[1].atan2(v[0])).collect();
    let start = heading[0];
    let mut yaw = vec![0.0; n];
    for i in 1..n {
        yaw[i] = yaw[i - 1] + wrap_angle(heading[i] - heading[i - 1]);
    }
    let states: Vec<BodyState> = (0..n)
        .map(|i| {
            let yaw_rate = derivative(&ts, &yaw, i);
            let (s, c) = yaw[i].sin_cos();
            let [vx, vy] = vel[i];
            BodyState {
                position: [wp[i].x, wp[i].y, NOMINAL_HEIGHT],
                velocity: [c * vx + s * vy, -s * vx + c * vy, 0.0],
                yaw: start + yaw[i],
                yaw_rate,
                height: NOMINAL_HEIGHT,
                pitch: 0.0,
            }
        })
        .collect();
    build_task_vector(&states, v_max)
}
