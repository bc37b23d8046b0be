//! Conservative one-step outer-approximation of the flow.
//!
//! The stepper linearizes `f` at the center of the input set, propagates the
//! affine part through a truncated matrix exponential with a rigorous
//! truncation remainder, and bounds the linearization error over a
//! Picard-style a-priori enclosure via interval Hessian bounds (Lagrange
//! form). The error terms enter the result as an axis-aligned generator
//! block, so the output is guaranteed to contain every trajectory endpoint
//! `phi(h; x0)` with `x0` in the input set. Steps whose error block is large
//! relative to the propagated set are recursively halved.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::ode::System;
use crate::zonotope::{IntervalBox, Zonotope};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OuterParams {
    /// Truncation order of the matrix-exponential Taylor series.
    pub taylor_order: usize,
    /// Growth factor applied to a failed a-priori enclosure candidate.
    pub enclosure_inflation: f64,
    pub max_picard_iters: usize,
    /// Maximum recursive step-halving depth.
    pub max_step_splits: usize,
    /// A step is halved while its error block exceeds this fraction of the
    /// input set width. Smaller values trade time for tightness.
    pub split_tolerance: f64,
}

impl Default for OuterParams {
    fn default() -> Self {
        OuterParams {
            taylor_order: 10,
            enclosure_inflation: 1.1,
            max_picard_iters: 50,
            max_step_splits: 8,
            split_tolerance: 1e-5,
        }
    }
}

impl OuterParams {
    pub fn validate(&self) -> Result<()> {
        if self.taylor_order < 2 {
            return Err(Error::Invalid("taylor_order must be at least 2".into()));
        }
        if self.enclosure_inflation <= 0.0 {
            return Err(Error::Invalid("enclosure_inflation must be positive".into()));
        }
        if self.max_picard_iters == 0 || self.max_step_splits == 0 {
            return Err(Error::Invalid("iteration limits must be positive".into()));
        }
        if self.split_tolerance <= 0.0 {
            return Err(Error::Invalid("split_tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// A box `Y` with `hull(Z) + [0,h]·f(Y) ⊆ Y`: every trajectory starting in
/// `Z` stays in `Y` throughout `[0, h]`. The returned box is the tightened
/// image `hull(Z) + [0,h]·f(Y)` of the first fixpoint found.
pub fn a_priori_enclosure(
    system: &System,
    z: &Zonotope,
    h: f64,
    params: &OuterParams,
) -> Result<IntervalBox> {
    let hull = z.interval_hull();
    let margin = 1e-9 * (1.0 + linalg::norm_inf(&z.center));
    let mut y = hull.widen(1.0, margin);
    for _ in 0..params.max_picard_iters {
        let f = system.interval_eval(&y)?;
        let lower: Vec<f64> = hull
            .lower
            .iter()
            .zip(&f)
            .map(|(l, iv)| l + (h * iv.lo).min(0.0))
            .collect();
        let upper: Vec<f64> = hull
            .upper
            .iter()
            .zip(&f)
            .map(|(u, iv)| u + (h * iv.hi).max(0.0))
            .collect();
        let image = IntervalBox::new(lower, upper)?;
        if y.contains_box(&image, 0.0) {
            return Ok(image);
        }
        y = image.widen(params.enclosure_inflation, margin);
    }
    Err(Error::Enclosure(format!(
        "no invariant box after {} iterations (h = {h})",
        params.max_picard_iters
    )))
}

/// Truncated Taylor sums `T = Σ_{k<=K} M^k/k!` and `P = Σ_{k<=K} M^k/(k+1)!`.
fn exp_taylor(m: &Mat, order: usize) -> (Mat, Mat) {
    let n = m.rows();
    let mut t = Mat::identity(n);
    let mut p = Mat::identity(n);
    let mut power = Mat::identity(n);
    let mut kfac = 1.0;
    for k in 1..=order {
        power = m.matmul(&power).expect("square powers");
        kfac *= k as f64;
        t = t.add(&power.scale(1.0 / kfac)).expect("same shape");
        p = p.add(&power.scale(1.0 / (kfac * (k as f64 + 1.0)))).expect("same shape");
    }
    (t, p)
}

/// `m^(K+1) e^m / (K+1)!` — remainder bound for the order-K Taylor
/// truncation of the exponential at argument norm `m`.
fn exp_remainder(m: f64, order: usize) -> f64 {
    let mut term = 1.0;
    for k in 1..=order + 1 {
        term *= m / k as f64;
    }
    term * m.exp()
}

/// Upper bound on `e^{|M|} d` componentwise (`d >= 0`), via the truncated
/// series plus the scalar remainder applied to `max(d)`.
fn exp_abs_apply(m_abs: &Mat, d: &[f64], order: usize) -> Vec<f64> {
    let mut total = d.to_vec();
    let mut v = d.to_vec();
    for k in 1..=order {
        v = m_abs.matvec(&v);
        for x in &mut v {
            *x /= k as f64;
        }
        for (t, x) in total.iter_mut().zip(&v) {
            *t += x;
        }
    }
    let rem = exp_remainder(m_abs.norm_inf(), order) * linalg::norm_inf(d);
    for t in &mut total {
        *t += rem;
    }
    total
}

struct SingleStep {
    result: Zonotope,
    /// largest half-width of the error block
    err_max: f64,
    /// largest axis half-width of the input set
    width_in: f64,
}

fn single_step(
    system: &System,
    z: &Zonotope,
    h: f64,
    params: &OuterParams,
) -> Result<SingleStep> {
    let n = system.dim;
    let enclosure = a_priori_enclosure(system, z, h, params)?;

    // Linearize halfway along the drift of the center, which roughly halves
    // the distance trajectories stray from the expansion point.
    let drift = system.eval(&z.center)?;
    let mut z_star = z.center.clone();
    linalg::axpy(&mut z_star, 0.5 * h, &drift);
    let b = system.eval(&z_star)?;
    let jac = system.jacobian(&z_star)?;

    // Hessian bounds must hold on the segment from z* to any enclosure
    // point, so evaluate them on the hull of both.
    let domain = {
        let lower: Vec<f64> =
            enclosure.lower.iter().zip(&z_star).map(|(l, s)| l.min(*s)).collect();
        let upper: Vec<f64> =
            enclosure.upper.iter().zip(&z_star).map(|(u, s)| u.max(*s)).collect();
        IntervalBox::new(lower, upper)?
    };
    let hessians = system.hessian_bound(&domain)?;

    // Lagrange bound on the linearization error, per component, using the
    // per-axis enclosure radii about z*:
    // |r_i(x)| <= 1/2 Σ_jk sup|H_i(j,k)| r_j r_k
    let rad: Vec<f64> = (0..n)
        .map(|i| {
            (domain.lower[i] - z_star[i])
                .abs()
                .max((domain.upper[i] - z_star[i]).abs())
        })
        .collect();
    let delta: Vec<f64> = hessians
        .iter()
        .map(|hm| {
            let form: f64 = (0..n)
                .map(|j| (0..n).map(|k| hm.get(j, k) * rad[j] * rad[k]).sum::<f64>())
                .sum();
            0.5 * form
        })
        .collect();

    let m = jac.scale(h);
    let m_norm = m.norm_inf();
    let (t_k, psi_k) = exp_taylor(&m, params.taylor_order);
    let eta = exp_remainder(m_norm, params.taylor_order);

    // disturbance integral: |∫ e^{A(h-s)} w ds| <= h e^{|A|h} delta, entrywise
    let disturbance = {
        let amp = exp_abs_apply(&m.abs(), &delta, params.taylor_order);
        amp.iter().map(|v| v * h).collect::<Vec<f64>>()
    };

    // truncation of e^{Ah} acting on Z - z*, and of the particular integral
    let hull = z.interval_hull();
    let width_in = (0..n).map(|i| hull.width(i) * 0.5).fold(0.0_f64, f64::max);
    let rad_z = (0..n)
        .map(|i| {
            (hull.lower[i] - z_star[i])
                .abs()
                .max((hull.upper[i] - z_star[i]).abs())
        })
        .fold(0.0_f64, f64::max);
    let trunc_gen = eta * rad_z;
    // tail of Σ M^k/(k+1)! past order K is bounded by ||M||^(K+1) e^||M|| / (K+2)!
    let trunc_b =
        h * exp_remainder(m_norm, params.taylor_order) / (params.taylor_order as f64 + 2.0)
            * linalg::norm_inf(&b);

    // center' = z* + T_K (c - z*) + h Ψ_K b
    let mut center = z_star.clone();
    let shifted = linalg::sub(&z.center, &z_star);
    linalg::axpy(&mut center, 1.0, &t_k.matvec(&shifted));
    linalg::axpy(&mut center, h, &psi_k.matvec(&b));

    let mut gens = t_k.matmul(&z.generators)?;
    let mut err_max = 0.0_f64;
    for i in 0..n {
        let e = trunc_gen + trunc_b + disturbance[i];
        err_max = err_max.max(e);
        if e > 0.0 {
            let mut col = vec![0.0; n];
            col[i] = e;
            gens.push_col(&col);
        }
    }
    Ok(SingleStep { result: Zonotope::new(center, gens)?, err_max, width_in })
}

/// One-step outer-approximation `O(h; Z) ⊇ Φ(h; Z)`.
///
/// A step whose error block is not tiny relative to the input width is
/// replaced by two chained half steps, recursively up to `max_step_splits`;
/// splitting refreshes the linearization point along the flow, which is the
/// main tightness lever of the method. Enclosure failures trigger the same
/// splitting. Per-step results are sound at any depth, so a failed split
/// falls back to the coarse result.
pub fn outer_step(system: &System, z: &Zonotope, h: f64, params: &OuterParams) -> Result<Zonotope> {
    params.validate()?;
    if h <= 0.0 {
        return Err(Error::Invalid("step size must be positive".into()));
    }
    step_recursive(system, z, h, params, params.max_step_splits)
}

fn step_recursive(
    system: &System,
    z: &Zonotope,
    h: f64,
    params: &OuterParams,
    depth: usize,
) -> Result<Zonotope> {
    let floor = 1e-10 * (1.0 + linalg::norm_inf(&z.center));
    match single_step(system, z, h, params) {
        Ok(step) => {
            let needs_split =
                step.err_max > floor.max(params.split_tolerance * step.width_in);
            if !needs_split || depth == 0 {
                return Ok(step.result);
            }
            match split_once(system, z, h, params, depth) {
                Ok(refined) => Ok(refined),
                Err(_) => Ok(step.result),
            }
        }
        Err(e) => {
            if depth == 0 {
                return Err(e);
            }
            split_once(system, z, h, params, depth)
        }
    }
}

fn split_once(
    system: &System,
    z: &Zonotope,
    h: f64,
    params: &OuterParams,
    depth: usize,
) -> Result<Zonotope> {
    let first = step_recursive(system, z, h / 2.0, params, depth - 1)?;
    let second = step_recursive(system, &first, h / 2.0, params, depth - 1)?;
    // Chaining substeps stacks error columns; cap the growth by box-merging
    // the smallest columns (an enclosing operation, so soundness is kept).
    Ok(compact_columns(second, z.num_generators() + 2 * z.dim()))
}

/// Keep the `cap` largest generator columns and replace the rest by their
/// componentwise interval hull (at most `n` axis-aligned columns). The
/// result contains the input set.
fn compact_columns(z: Zonotope, cap: usize) -> Zonotope {
    let n = z.dim();
    let p = z.num_generators();
    if p <= cap + n {
        return z;
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        let na = linalg::norm_inf(z.generators.col(a));
        let nb = linalg::norm_inf(z.generators.col(b));
        nb.partial_cmp(&na).unwrap().then(a.cmp(&b))
    });
    let (keep, merge) = order.split_at(cap);
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    let mut gens = z.generators.select_cols(&keep);
    let mut widths = vec![0.0; n];
    for &j in merge {
        for (w, v) in widths.iter_mut().zip(z.generators.col(j)) {
            *w += v.abs();
        }
    }
    for (i, w) in widths.iter().enumerate() {
        if *w > 0.0 {
            let mut col = vec![0.0; n];
            col[i] = *w;
            gens.push_col(&col);
        }
    }
    Zonotope { center: z.center, generators: gens }
}

/// Outer-approximation of the flow of a single state.
pub fn outer_point(system: &System, x: &[f64], h: f64, params: &OuterParams) -> Result<Zonotope> {
    outer_step(system, &Zonotope::point(x.to_vec()), h, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{benchmark, integrate, System};
    
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frozen() -> System {
        System::from_strings("frozen", 2, &["0".into(), "0".into()]).unwrap()
    }

    #[test]
    fn enclosure_of_frozen_system_is_hull() {
        let z = Zonotope::from_box(vec![1.0, -2.0], &[0.5, 0.25]).unwrap();
        let y = a_priori_enclosure(&frozen(), &z, 0.1, &OuterParams::default()).unwrap();
        let hull = z.interval_hull();
        assert_eq!(y.lower, hull.lower);
        assert_eq!(y.upper, hull.upper);
    }

    #[test]
    fn enclosure_contains_decay_trajectory() {
        let sys = System::from_strings("decay", 1, &["-x1".into()]).unwrap();
        let z = Zonotope::point(vec![1.0]);
        let h = 0.05f64;
        let y = a_priori_enclosure(&sys, &z, h, &OuterParams::default()).unwrap();
        assert!(y.lower[0] <= (-h).exp() && y.upper[0] >= 1.0);
    }

    #[test]
    fn enclosure_monte_carlo_containment() {
        let b = benchmark("ElectroOsc").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let h = 0.05;
        let y = a_priori_enclosure(&b.system, &b.x0, h, &OuterParams::default()).unwrap();
        for _ in 0..200 {
            let x0 = b.x0.sample_point(&mut rng);
            // check a few intermediate times as well as the endpoint
            for frac in [0.25, 0.5, 1.0] {
                let xt = integrate(&b.system, &x0, h * frac, 1e-10).unwrap();
                assert!(y.contains(&xt, 1e-9), "trajectory escapes the enclosure");
            }
        }
    }

    #[test]
    fn frozen_system_step_is_identity() {
        let z = Zonotope::from_box(vec![1.0, 2.0], &[0.3, 0.4]).unwrap();
        let out = outer_step(&frozen(), &z, 0.25, &OuterParams::default()).unwrap();
        assert_eq!(out, z);
    }

    #[test]
    fn linear_step_matches_closed_form() {
        // rotation block: exp([[0,-w],[w,0]] h) is a rotation by wh
        let sys = System::from_strings("rotation", 2, &["-x2".into(), "x1".into()]).unwrap();
        let params = OuterParams::default();
        let z = Zonotope::from_box(vec![1.0, 0.0], &[0.1, 0.1]).unwrap();
        let h = 0.2; // |A| h = 0.2
        let out = outer_step(&sys, &z, h, &params).unwrap();
        let (s, c) = h.sin_cos();
        let rot = Mat::from_rows(&[vec![c, -s], vec![s, c]]).unwrap();
        let exact = z.linear_image(&rot).unwrap();
        // soundness plus tightness: support gaps below 1e-6 on the axes
        for d in [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]] {
            let gap = out.support(&d) - exact.support(&d);
            assert!(gap >= -1e-12, "outer must dominate the exact image");
            assert!(gap <= 1e-6, "excess width {gap} too large");
        }
    }

    #[test]
    fn electro_osc_step_contains_trajectories() {
        let b = benchmark("ElectroOsc").unwrap();
        let params = OuterParams::default();
        let out = outer_step(&b.system, &b.x0, 0.05, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..1000 {
            let x0 = b.x0.sample_point(&mut rng);
            let xe = integrate(&b.system, &x0, 0.05, 1e-10).unwrap();
            assert!(out.contains_point(&xe, 1e-8).unwrap(), "endpoint escaped");
        }
    }

    #[test]
    fn point_step_contains_integrated_endpoint_and_shrinks() {
        let b = benchmark("ElectroOsc").unwrap();
        let params = OuterParams::default();
        let x = b.x0.center.clone();
        let mut prev_width = f64::INFINITY;
        for h in [0.05, 0.025, 0.0125] {
            let out = outer_point(&b.system, &x, h, &params).unwrap();
            let xe = integrate(&b.system, &x, h, 1e-11).unwrap();
            assert!(out.contains_point(&xe, 1e-9).unwrap());
            let hull = out.interval_hull();
            let width = (0..2).map(|i| hull.width(i)).fold(0.0_f64, f64::max);
            // empirical convergence at least linear in h
            assert!(
                width <= 0.75 * prev_width,
                "width {width} did not shrink linearly from {prev_width}"
            );
            prev_width = width;
        }
        // frozen dynamics keep the point exact
        let out = outer_point(&frozen(), &[1.0, 2.0], 0.3, &params).unwrap();
        assert_eq!(out, Zonotope::point(vec![1.0, 2.0]));
    }

    #[test]
    fn random_subsets_stay_sound() {
        let b = benchmark("Rossler").unwrap();
        let params = OuterParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        for _ in 0..3 {
            // random sub-zonotope of the initial set
            let c = b.x0.sample_point(&mut rng);
            let z = Zonotope::from_box(c, &[0.02, 0.02, 0.02]).unwrap();
            for h in [0.01, 0.05] {
                let out = outer_step(&b.system, &z, h, &params).unwrap();
                for _ in 0..200 {
                    let x0 = z.sample_point(&mut rng);
                    let xe = integrate(&b.system, &x0, h, 1e-10).unwrap();
                    assert!(out.contains_point(&xe, 1e-8).unwrap());
                }
            }
        }
    }
}
