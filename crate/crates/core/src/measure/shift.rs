use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Slack used when comparing support points.
const POINT_TOL: f64 = 1e-12;

/// A finitely supported real-valued distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct RealDistribution {
    points: Vec<(f64, f64)>,
}

impl RealDistribution {
    /// From `(value, probability)` pairs; weights are normalized.
    pub fn new(points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut merged: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
        for (v, w) in points {
            if !v.is_finite() || w.is_nan() || w < 0.0 {
                return Err(Error::InvalidParameter(format!("bad point ({v}, {w})")));
            }
            let key = ordered_key(v);
            let e = merged.entry(key).or_insert((v, 0.0));
            e.1 += w;
        }
        let total: f64 = merged.values().map(|(_, w)| w).sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("distribution has no mass".into()));
        }
        Ok(Self {
            points: merged
                .into_values()
                .filter(|(_, w)| *w > 0.0)
                .map(|(v, w)| (v, w / total))
                .collect(),
        })
    }

    /// Empirical distribution of samples.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        Self::new(samples.iter().map(|&s| (s, 1.0)))
    }

    pub fn point(v: f64) -> Self {
        Self {
            points: vec![(v, 1.0)],
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// `Pr[X ≤ x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.points
            .iter()
            .filter(|(v, _)| *v <= x + POINT_TOL)
            .map(|(_, w)| w)
            .sum()
    }

    /// `Pr[X < x]`.
    pub fn cdf_strict(&self, x: f64) -> f64 {
        self.points
            .iter()
            .filter(|(v, _)| *v < x - POINT_TOL)
            .map(|(_, w)| w)
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.points.iter().map(|(v, w)| v * w).sum()
    }
}

fn ordered_key(v: f64) -> u64 {
    let b = v.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

/// `sup_x Pr[A ≤ x] − Pr[B ≤ x + ε]`. The supremum of the step difference is
/// reached at a support point of `A` or just left of a point of `B` shifted by `ε`.
fn one_sided(a: &RealDistribution, b: &RealDistribution, eps: f64) -> f64 {
    let at_a = a.points.iter().map(|(x, _)| a.cdf(*x) - b.cdf(x + eps));
    let before_b = b
        .points
        .iter()
        .map(|(s, _)| a.cdf_strict(s - eps) - b.cdf_strict(*s));
    at_a.chain(before_b).fold(0.0f64, f64::max)
}

/// Smallest `δ` with `Pr[D₀ ≤ x] ≤ Pr[D₁ ≤ x + ε] + δ` and the symmetric
/// inequality for every real `x`.
pub fn shift_distance(d0: &RealDistribution, d1: &RealDistribution, eps: f64) -> Result<f64> {
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::InvalidParameter(format!("shift {eps} must be ≥ 0")));
    }
    Ok(one_sided(d0, d1, eps).max(one_sided(d1, d0, eps)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct evaluation of the definition on a fine grid.
    fn grid_shift(d0: &RealDistribution, d1: &RealDistribution, eps: f64) -> f64 {
        let mut worst = 0.0f64;
        for k in -2000..=4000 {
            let x = k as f64 / 1000.0 + 0.000_37;
            worst = worst
                .max(d0.cdf(x) - d1.cdf(x + eps))
                .max(d1.cdf(x) - d0.cdf(x + eps));
        }
        worst
    }

    #[test]
    fn examples() {
        let a = RealDistribution::new([(0.2, 0.5), (0.7, 0.5)]).unwrap();
        assert_eq!(shift_distance(&a, &a, 0.0).unwrap(), 0.0);
        assert_eq!(shift_distance(&a, &a, 0.3).unwrap(), 0.0);
        let p = RealDistribution::point(0.5);
        let q = RealDistribution::point(0.6);
        assert_eq!(shift_distance(&p, &q, 0.1).unwrap(), 0.0);
        let z = RealDistribution::point(0.0);
        let o = RealDistribution::point(1.0);
        assert_eq!(shift_distance(&z, &o, 0.5).unwrap(), 1.0);
        assert!(shift_distance(&z, &o, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn matches_grid_evaluation(
            a in prop::collection::vec((0u32..20, 1u32..5), 1..5),
            b in prop::collection::vec((0u32..20, 1u32..5), 1..5),
            e in 0u32..6,
        ) {
            let d0 = RealDistribution::new(a.iter().map(|&(v, w)| (v as f64 / 20.0, w as f64))).unwrap();
            let d1 = RealDistribution::new(b.iter().map(|&(v, w)| (v as f64 / 20.0, w as f64))).unwrap();
            let eps = e as f64 / 20.0 + 0.013;
            let exact = shift_distance(&d0, &d1, eps).unwrap();
            let grid = grid_shift(&d0, &d1, eps);
            prop_assert!(exact >= grid - 1e-12);
            prop_assert!(exact <= grid + 1e-12, "exact {} grid {}", exact, grid);
        }

        #[test]
        fn symmetric_and_monotone_in_eps(
            a in prop::collection::vec((0u32..20, 1u32..5), 1..5),
            b in prop::collection::vec((0u32..20, 1u32..5), 1..5),
        ) {
            let d0 = RealDistribution::new(a.iter().map(|&(v, w)| (v as f64 / 20.0, w as f64))).unwrap();
            let d1 = RealDistribution::new(b.iter().map(|&(v, w)| (v as f64 / 20.0, w as f64))).unwrap();
            let s1 = shift_distance(&d0, &d1, 0.1).unwrap();
            prop_assert_eq!(s1, shift_distance(&d1, &d0, 0.1).unwrap());
            prop_assert!(shift_distance(&d0, &d1, 0.2).unwrap() <= s1 + 1e-15);
        }
    }
}
