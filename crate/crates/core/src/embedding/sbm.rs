//! Similarity-based baseline: distance of a context to a class centroid.

use crate::{Error, Result};

/// Temperature of the baseline similarity.
pub const SBM_TAU: f64 = 3.0;

/// `exp(-τ·κ̂)` where `κ̂` is the distance from `query` to the centroid of
/// `class_members`, divided by `x_max` and clipped to `[0, 1]`.
pub fn sbm_score(query: &[f64], class_members: &[Vec<f64>], x_max: f64, tau: f64) -> Result<f64> {
    let first = class_members
        .first()
        .ok_or_else(|| Error::EmptyClass("no members to form a centroid".into()))?;
    let dim = first.len();
    if query.len() != dim || class_members.iter().any(|m| m.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            got: query.len(),
        });
    }
    let n = class_members.len() as f64;
    let centroid: Vec<f64> = (0..dim)
        .map(|i| class_members.iter().map(|m| m[i]).sum::<f64>() / n)
        .collect();
    let dist = query
        .iter()
        .zip(&centroid)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let kappa = if x_max > 0.0 { (dist / x_max).min(1.0) } else { 0.0 };
    Ok((-tau * kappa).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centroid_scores_one() {
        let members = vec![vec![0.0, 0.0], vec![2.0, 0.0]];
        assert_eq!(sbm_score(&[1.0, 0.0], &members, 1.0, SBM_TAU).unwrap(), 1.0);
    }

    #[test]
    fn unit_distance_gives_exp_minus_three() {
        let s = sbm_score(&[1.0], &[vec![0.0]], 1.0, SBM_TAU).unwrap();
        assert!((s - (-3.0f64).exp()).abs() < 1e-15);
        assert!((s - 0.0498).abs() < 1e-4);
    }

    #[test]
    fn single_member_is_its_own_centroid() {
        let s = sbm_score(&[0.3, 0.4], &[vec![0.3, 0.4]], 2.0, SBM_TAU).unwrap();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn empty_class_errors() {
        assert!(matches!(sbm_score(&[0.0], &[], 1.0, SBM_TAU), Err(Error::EmptyClass(_))));
    }
}
