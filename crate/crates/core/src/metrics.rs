//! Precision and soundness evaluation of computed inner-approximations.
//!
//! Precision uses the minimum width ratio over the axis directions between
//! the inner set and a reference outer set; the reference is the interval
//! enclosure of many simulated trajectory endpoints. Soundness flows
//! samples of the inner set backward through the time-inverted system and
//! counts how many land in the initial set.

use crate::error::{Error, Result};
use crate::ode::{integrate, System};
use crate::zonotope::{IntervalBox, Zonotope};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub gamma_min: f64,
    /// Inner/outer width ratio per axis.
    pub width_ratios: Vec<f64>,
    pub samples: usize,
    pub soundness: f64,
    pub seed: u64,
    /// Not serialized: report files must be byte-reproducible.
    #[serde(skip, default)]
    pub wall_seconds: f64,
}

/// Minimum over the axis directions of the inner-to-outer width ratio.
pub fn gamma_min(inner: &Zonotope, outer: &Zonotope) -> Result<f64> {
    Ok(width_ratios(inner, outer)?
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

/// Per-axis width ratios `(support(U, e_i) + support(U, -e_i)) / (same on O)`.
pub fn width_ratios(inner: &Zonotope, outer: &Zonotope) -> Result<Vec<f64>> {
    let n = inner.dim();
    if outer.dim() != n {
        return Err(Error::DimensionMismatch("gamma_min sets".into()));
    }
    let mut ratios = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let wi = inner.support(&e) + {
            e[i] = -1.0;
            inner.support(&e)
        };
        e[i] = 1.0;
        let wo = outer.support(&e) + {
            e[i] = -1.0;
            outer.support(&e)
        };
        if wo <= 0.0 {
            return Err(Error::Invalid(format!(
                "outer reference has zero width on axis {i}"
            )));
        }
        ratios.push(wi / wo);
    }
    Ok(ratios)
}

pub fn gamma_min_box(inner: &Zonotope, outer: &IntervalBox) -> Result<f64> {
    gamma_min(inner, &outer.to_zonotope())
}

pub fn width_ratios_box(inner: &Zonotope, outer: &IntervalBox) -> Result<Vec<f64>> {
    width_ratios(inner, &outer.to_zonotope())
}

/// Interval enclosure of `count` random trajectory endpoints at time `t`,
/// deterministic for a fixed seed.
pub fn simulation_hull(
    system: &System,
    x0: &Zonotope,
    t: f64,
    count: usize,
    seed: u64,
) -> Result<IntervalBox> {
    if count == 0 {
        return Err(Error::Invalid("simulation hull needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let start = x0.sample_point(&mut rng);
        points.push(integrate(system, &start, t, 1e-9)?);
    }
    IntervalBox::hull_of_points(&points)
}

/// Fraction of `count` samples of `inner` whose backward flow over `t`
/// lands in `x0` inflated by `1e-6` per axis.
pub fn soundness_check(
    system: &System,
    inner: &Zonotope,
    x0: &Zonotope,
    t: f64,
    count: usize,
    seed: u64,
) -> Result<f64> {
    if count == 0 {
        return Err(Error::Invalid("soundness check needs at least one sample".into()));
    }
    let inverted = system.time_invert();
    let margin = Zonotope::from_box(vec![0.0; x0.dim()], &vec![1e-6; x0.dim()])?;
    let inflated = x0.minkowski_sum(&margin)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..count {
        let sample = inner.sample_point(&mut rng);
        let back = integrate(&inverted, &sample, t, 1e-9)?;
        if inflated.contains_point(&back, 1e-9)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::System;
    use rand::Rng;

    #[test]
    fn gamma_of_identical_sets_is_one() {
        let z = Zonotope::from_columns(
            vec![1.0, 2.0],
            &[vec![1.0, 0.3], vec![0.0, 0.7]],
        )
        .unwrap();
        assert!((gamma_min(&z, &z).unwrap() - 1.0).abs() < 1e-12);
        assert!((gamma_min(&z.shrink(0.5), &z).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gamma_golden_ratio() {
        let inner = Zonotope::from_box(vec![0.0, 0.0], &[1.0, 0.3]).unwrap();
        let outer = Zonotope::from_box(vec![0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((gamma_min(&inner, &outer).unwrap() - 0.3).abs() < 1e-12);
        let ratios = width_ratios(&inner, &outer).unwrap();
        assert!((ratios[0] - 1.0).abs() < 1e-12);
        assert!((ratios[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn gamma_invariances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(71);
        for _ in 0..30 {
            let n = 2;
            let inner = Zonotope::from_box(
                vec![rng.random_range(-1.0..1.0); n],
                &[rng.random_range(0.1..1.0), rng.random_range(0.1..1.0)],
            )
            .unwrap();
            let outer = Zonotope::from_box(
                inner.center.clone(),
                &[rng.random_range(1.0..2.0), rng.random_range(1.0..2.0)],
            )
            .unwrap();
            let g = gamma_min(&inner, &outer).unwrap();
            assert!(g > 0.0 && g <= 1.0 + 1e-12);
            // common translation
            let shift = vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let t_inner = Zonotope::new(
                crate::linalg::add(&inner.center, &shift),
                inner.generators.clone(),
            )
            .unwrap();
            let t_outer = Zonotope::new(
                crate::linalg::add(&outer.center, &shift),
                outer.generators.clone(),
            )
            .unwrap();
            assert!((gamma_min(&t_inner, &t_outer).unwrap() - g).abs() < 1e-9);
            // common scaling
            let s = rng.random_range(0.5..3.0);
            assert!((gamma_min(&inner.shrink(s), &outer.shrink(s)).unwrap() - g).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_width_outer_rejected() {
        let inner = Zonotope::from_box(vec![0.0, 0.0], &[1.0, 1.0]).unwrap();
        let outer = Zonotope::from_box(vec![0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!(gamma_min(&inner, &outer).is_err());
    }

    #[test]
    fn simulation_hull_frozen_flow() {
        let sys = System::from_strings("frozen", 2, &["0".into(), "0".into()]).unwrap();
        let x0 = Zonotope::from_box(vec![1.0, -1.0], &[0.5, 0.5]).unwrap();
        let hull = simulation_hull(&sys, &x0, 1.0, 500, 7).unwrap();
        let exact = x0.interval_hull();
        // the sampled hull sits inside the exact hull, for any sample count
        assert!(exact.contains_box(&hull, 1e-12));
        // a single sample gives a degenerate box
        let one = simulation_hull(&sys, &x0, 1.0, 1, 7).unwrap();
        assert_eq!(one.lower, one.upper);
        // reproducibility
        let again = simulation_hull(&sys, &x0, 1.0, 500, 7).unwrap();
        assert_eq!(hull, again);
    }

    #[test]
    fn soundness_of_static_set() {
        let sys = System::from_strings("frozen", 2, &["0".into(), "0".into()]).unwrap();
        let x0 = Zonotope::from_box(vec![0.0, 0.0], &[1.0, 1.0]).unwrap();
        let s = soundness_check(&sys, &x0, &x0, 1.0, 200, 3).unwrap();
        assert_eq!(s, 1.0);
        // a translated set misses the initial set entirely
        let outside = Zonotope::from_box(vec![5.0, 5.0], &[1.0, 1.0]).unwrap();
        let s = soundness_check(&sys, &outside, &x0, 1.0, 200, 3).unwrap();
        assert_eq!(s, 0.0);
    }
}
