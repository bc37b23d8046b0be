//! Inner-approximation of reachable sets by contracting one-step
//! outer-approximations against the propagated boundary of the current set.
//!
//! One step works on `U_k` as follows: the exact boundary of `U_k` is
//! extracted and refined into pieces; every piece and the whole set are
//! propagated with the conservative outer stepper; the whole-set
//! outer-approximation is then contracted until it is disjoint from every
//! propagated boundary piece; finally the candidate is certified by flowing
//! its center backward through the time-inverted system and checking that
//! the resulting outer-approximation lands inside `U_k`. A certified
//! candidate is a subset of the true reachable set `Φ(h; U_k)`: it avoids
//! the image of the boundary (which covers the boundary of the reachable
//! set), it is connected, and it contains one reachable point.

use crate::error::{Error, Result};
use crate::linalg;
use crate::lp;
use crate::ode::System;
use crate::outer::{outer_point, outer_step, OuterParams};
use crate::tiling::refine_boundary;
use crate::zonotope::{cross_product, Zonotope};
use crate::DEFAULT_TOL;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InnerParams {
    /// Separation margin kept between the candidate and every propagated
    /// boundary piece.
    pub epsilon: f64,
    /// Maximum number of refined boundary pieces per step; 0 picks the
    /// dimension-dependent default `max(4 n (n-1), 24)`.
    pub boundary_budget: usize,
    /// Generator-count cap for the whole-set outer-approximation, as a
    /// multiple of the dimension. The candidate inherits the cap, which
    /// keeps the per-step boundary extraction tractable over long horizons.
    /// Capping only ever enlarges the outer set, so soundness is unaffected.
    pub max_candidate_order: usize,
    pub outer: OuterParams,
    /// Time step.
    pub h: f64,
    /// Number of steps.
    pub n_steps: usize,
}

impl Default for InnerParams {
    fn default() -> Self {
        InnerParams {
            epsilon: 1e-6,
            boundary_budget: 0,
            max_candidate_order: 5,
            outer: OuterParams::default(),
            h: 0.05,
            n_steps: 1,
        }
    }
}

impl InnerParams {
    pub fn budget_for_dim(&self, n: usize) -> usize {
        if self.boundary_budget > 0 {
            self.boundary_budget
        } else {
            (4 * n * n.saturating_sub(1).max(1)).max(24)
        }
    }

    /// Generator cap for the whole-set outer-approximation. The order
    /// multiplier is additionally clamped by an absolute allowance that
    /// shrinks with the dimension, since facet enumeration is combinatorial
    /// in the generator count.
    pub fn candidate_cap(&self, n: usize) -> usize {
        let allowance = if n <= 4 {
            6
        } else if n <= 9 {
            4
        } else {
            2
        };
        (self.max_candidate_order * n).min(n + allowance).max(n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon <= 0.0 {
            return Err(Error::Invalid("epsilon must be positive".into()));
        }
        if self.h <= 0.0 {
            return Err(Error::Invalid("step size must be positive".into()));
        }
        if self.max_candidate_order == 0 {
            return Err(Error::Invalid("max_candidate_order must be positive".into()));
        }
        self.outer.validate()
    }
}

/// Everything recorded about one attempted step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub t_start: f64,
    pub h: f64,
    pub u_k: Zonotope,
    pub boundary_pieces: Vec<Zonotope>,
    pub outer_whole: Option<Zonotope>,
    pub outer_pieces: Vec<Zonotope>,
    pub candidate: Option<Zonotope>,
    pub verified: bool,
    /// Stage that failed, when the step is not verified.
    pub failure: Option<String>,
}

impl StepRecord {
    pub fn next_set(&self) -> Option<&Zonotope> {
        if self.verified {
            self.candidate.as_ref()
        } else {
            None
        }
    }
}

/// Attitude vector of a flat outer-approximation: the normal of the
/// hyperplane spanned by its top `n-1` independent generators by norm.
pub fn attitude(zo: &Zonotope) -> Result<Vec<f64>> {
    let n = zo.dim();
    let p = zo.num_generators();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        let na = linalg::norm2(zo.generators.col(a));
        let nb = linalg::norm2(zo.generators.col(b));
        nb.partial_cmp(&na).unwrap().then(a.cmp(&b))
    });
    let scale = order
        .first()
        .map(|&j| linalg::norm2(zo.generators.col(j)))
        .unwrap_or(0.0);
    let mut chosen: Vec<usize> = Vec::new();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for &j in &order {
        if chosen.len() == n - 1 {
            break;
        }
        let mut v = zo.generators.col(j).to_vec();
        for q in &basis {
            let d = linalg::dot(q, &v);
            linalg::axpy(&mut v, -d, q);
        }
        let nv = linalg::norm2(&v);
        if nv > DEFAULT_TOL * scale.max(1e-300) {
            for x in &mut v {
                *x /= nv;
            }
            basis.push(v);
            chosen.push(j);
        }
    }
    if chosen.len() < n - 1 {
        return Err(Error::RankDeficient(format!(
            "attitude needs {} independent generators, found {}",
            n - 1,
            chosen.len()
        )));
    }
    chosen.sort_unstable();
    cross_product(&zo.generators.select_cols(&chosen), DEFAULT_TOL)
}

/// Generator processing order for the contraction loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortMode {
    /// Sort by alignment with the attitude vector (the production mode).
    ByAttitude,
    /// Keep the generator order as-is (diagnostic mode).
    Unsorted,
}

/// Contract `candidate` until it is disjoint from every boundary
/// outer-approximation, keeping a margin of `epsilon` in the generator
/// coefficients. The result is a subset of `candidate` (possibly with fewer
/// generators); its generator columns are reordered by the attitude sort.
pub fn contract(
    candidate: &Zonotope,
    boundary_outers: &[Zonotope],
    epsilon: f64,
) -> Result<Zonotope> {
    contract_with_mode(candidate, boundary_outers, epsilon, SortMode::ByAttitude)
}

pub fn contract_with_mode(
    candidate: &Zonotope,
    boundary_outers: &[Zonotope],
    epsilon: f64,
    mode: SortMode,
) -> Result<Zonotope> {
    if epsilon <= 0.0 {
        return Err(Error::Invalid("epsilon must be positive".into()));
    }
    let mut current = candidate.clone();
    for (piece_idx, piece) in boundary_outers.iter().enumerate() {
        if piece.dim() != current.dim() {
            return Err(Error::DimensionMismatch("contract boundary piece".into()));
        }
        if mode == SortMode::ByAttitude {
            let at = attitude(piece)?;
            let at_norm = linalg::norm2(&at);
            let p = current.num_generators();
            let mut order: Vec<usize> = (0..p).collect();
            // |cos angle(g, attitude)| descending, stable on index
            let alignment = |j: usize| -> f64 {
                let g = current.generators.col(j);
                let ng = linalg::norm2(g);
                if ng == 0.0 {
                    return 0.0;
                }
                (linalg::dot(g, &at) / (ng * at_norm)).abs()
            };
            order.sort_by(|&a, &b| {
                alignment(b).partial_cmp(&alignment(a)).unwrap().then(a.cmp(&b))
            });
            current = Zonotope::new(current.center.clone(), current.generators.select_cols(&order))?;
        }
        let mut separated = false;
        let mut l = 0usize;
        while l < current.num_generators() {
            let Some((lo, hi)) = lp::intersection_range(&current, piece, l)? else {
                separated = true;
                break;
            };
            const FULL_TOL: f64 = 1e-7;
            if lo <= -1.0 + FULL_TOL && hi >= 1.0 - FULL_TOL {
                // the piece spans this generator fully: drop it
                current = Zonotope::new(
                    current.center.clone(),
                    current.generators.delete_col(l),
                )?;
                continue;
            }
            let left_hi = lo - epsilon;
            let right_lo = hi + epsilon;
            let left_len = left_hi - (-1.0);
            let right_len = 1.0 - right_lo;
            let (glo, ghi) = if left_len < 0.0 && right_len < 0.0 {
                return Err(Error::ContractionCollapse(format!(
                    "piece {piece_idx}: range [{lo:.6}, {hi:.6}] leaves no margin at epsilon {epsilon}"
                )));
            } else if left_len >= right_len {
                // ties keep the lower interval
                (-1.0, left_hi)
            } else {
                (right_lo, 1.0)
            };
            let mid = 0.5 * (ghi + glo);
            let half = 0.5 * (ghi - glo);
            let g = current.generators.col(l).to_vec();
            let mut center = current.center.clone();
            linalg::axpy(&mut center, mid, &g);
            let mut gens = current.generators.clone();
            for (i, gi) in g.iter().enumerate() {
                gens.set(i, l, gi * half);
            }
            current = Zonotope::new(center, gens)?;
            separated = true;
            l += 1;
        }
        if !separated && !lp::zonotopes_disjoint(&current, piece)? {
            return Err(Error::ContractionCollapse(format!(
                "piece {piece_idx}: candidate exhausted its generators while still intersecting"
            )));
        }
    }
    Ok(current)
}

/// Certify an inner-approximation candidate: flow the candidate's center
/// backward for `h` and require the resulting outer-approximation to land
/// inside `u_k`, which proves the center is reachable from `u_k`.
pub fn verify_candidate(
    system: &System,
    candidate: &Zonotope,
    u_k: &Zonotope,
    h: f64,
    outer_params: &OuterParams,
) -> Result<bool> {
    let inverted = system.time_invert();
    let backward = outer_point(&inverted, &candidate.center, h, outer_params)?;
    lp::contains_zonotope(&backward, u_k)
}

/// Order cap applied to an *outer* set: box-merge the smallest generators
/// (by `||.||_1 - ||.||_inf`) so that at most `cap` columns remain.
/// Enlarges the set, which is sound for outer-approximations only.
fn cap_outer_order(z: &Zonotope, cap: usize) -> Zonotope {
    let n = z.dim();
    let p = z.num_generators();
    if p <= cap.max(n) {
        return z.clone();
    }
    let keep_shape = cap.max(n) - n;
    let mut order: Vec<usize> = (0..p).collect();
    let score = |j: usize| -> f64 {
        let col = z.generators.col(j);
        let l1: f64 = col.iter().map(|v| v.abs()).sum();
        l1 - linalg::norm_inf(col)
    };
    // largest score first: those stay as shape generators
    order.sort_by(|&a, &b| score(b).partial_cmp(&score(a)).unwrap().then(a.cmp(&b)));
    let mut keep: Vec<usize> = order[..keep_shape].to_vec();
    keep.sort_unstable();
    let merge: Vec<usize> = order[keep_shape..].to_vec();
    let mut gens = z.generators.select_cols(&keep);
    let mut widths = vec![0.0; n];
    for &j in &merge {
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
    Zonotope { center: z.center.clone(), generators: gens }
}

/// Exact volume when the subset count is small, interval-hull volume
/// otherwise; only used to order boundary pieces.
fn volume_proxy(z: &Zonotope) -> f64 {
    let n = z.dim();
    let p = z.num_generators();
    let mut subsets = 1.0_f64;
    for k in 0..n {
        subsets *= (p - k) as f64 / (k + 1) as f64;
    }
    if p >= n && subsets <= 20_000.0 {
        z.volume()
    } else {
        let hull = z.interval_hull();
        (0..n).map(|i| hull.width(i)).product()
    }
}

/// One inner-approximation step `U_k -> U_{k+1}`. Failures are recorded in
/// the step record, never raised.
pub fn inner_step(system: &System, u_k: &Zonotope, t_start: f64, params: &InnerParams) -> StepRecord {
    let mut record = StepRecord {
        t_start,
        h: params.h,
        u_k: u_k.clone(),
        boundary_pieces: Vec::new(),
        outer_whole: None,
        outer_pieces: Vec::new(),
        candidate: None,
        verified: false,
        failure: None,
    };
    let n = system.dim;
    let budget = params.budget_for_dim(n);

    // 1. boundary extraction and refinement; a degenerate set is its own
    //    boundary
    let pieces = if u_k.is_full_dimensional(DEFAULT_TOL) {
        match refine_boundary(u_k, budget, DEFAULT_TOL) {
            Ok(p) => p,
            Err(e) => {
                record.failure = Some(format!("boundary refinement: {e}"));
                return record;
            }
        }
    } else {
        vec![u_k.clone()]
    };
    record.boundary_pieces = pieces.clone();

    // 2. outer-approximations of the whole set and of each boundary piece
    let outer_whole = match outer_step(system, u_k, params.h, &params.outer) {
        Ok(o) => cap_outer_order(&o, params.candidate_cap(n)),
        Err(e) => {
            record.failure = Some(format!("outer step: {e}"));
            return record;
        }
    };
    record.outer_whole = Some(outer_whole.clone());
    let mut outer_pieces = Vec::with_capacity(pieces.len());
    for piece in &pieces {
        match outer_step(system, piece, params.h, &params.outer) {
            Ok(o) => outer_pieces.push(o),
            Err(e) => {
                record.failure = Some(format!("boundary outer step: {e}"));
                return record;
            }
        }
    }
    // large pieces constrain the candidate most: contract against them first
    let mut order: Vec<usize> = (0..outer_pieces.len()).collect();
    let volumes: Vec<f64> = outer_pieces.iter().map(volume_proxy).collect();
    order.sort_by(|&a, &b| volumes[b].partial_cmp(&volumes[a]).unwrap().then(a.cmp(&b)));
    let ordered: Vec<Zonotope> = order.iter().map(|&i| outer_pieces[i].clone()).collect();
    record.outer_pieces = ordered.clone();

    // 3. contraction
    let candidate = match contract(&outer_whole, &ordered, params.epsilon) {
        Ok(c) => c,
        Err(e) => {
            record.failure = Some(format!("contraction: {e}"));
            return record;
        }
    };
    record.candidate = Some(candidate.clone());

    // 4. certification through the time-inverted flow
    match verify_candidate(system, &candidate, u_k, params.h, &params.outer) {
        Ok(true) => record.verified = true,
        Ok(false) => record.failure = Some("verification: containment test failed".into()),
        Err(e) => record.failure = Some(format!("verification: {e}")),
    }
    record
}

/// Iterate `inner_step` for `params.n_steps` steps starting from `x0`.
///
/// A failed step is retried once as two half steps. On persistent failure
/// the run stops early; the returned records end with the failing one.
pub fn inner_reach(system: &System, x0: &Zonotope, params: &InnerParams) -> Result<Vec<StepRecord>> {
    params.validate()?;
    if x0.dim() != system.dim {
        return Err(Error::DimensionMismatch("initial set dimension".into()));
    }
    let mut records: Vec<StepRecord> = Vec::new();
    let mut current = x0.clone();
    let mut t = 0.0;
    for _ in 0..params.n_steps {
        let record = inner_step(system, &current, t, params);
        if record.verified {
            current = record.candidate.clone().expect("verified step has a candidate");
            t += record.h;
            records.push(record);
            continue;
        }
        // retry as two half steps
        let mut half = params.clone();
        half.h = params.h / 2.0;
        let first = inner_step(system, &current, t, &half);
        if !first.verified {
            records.push(record);
            break;
        }
        let mid = first.candidate.clone().expect("verified step has a candidate");
        let second = inner_step(system, &mid, t + half.h, &half);
        if !second.verified {
            records.push(record);
            break;
        }
        current = second.candidate.clone().expect("verified step has a candidate");
        t += params.h;
        records.push(first);
        records.push(second);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::benchmark;
    use crate::zonotope::Zonotope;

    fn example_piece() -> Zonotope {
        Zonotope::from_columns(vec![1.0, 0.0], &[vec![1.2, 0.0], vec![0.0, 0.2]]).unwrap()
    }

    fn example_candidate() -> Zonotope {
        Zonotope::from_box(vec![1.0, 1.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn attitude_of_flat_piece() {
        let at = attitude(&example_piece()).unwrap();
        assert!((at[0] - 0.0).abs() < 1e-12);
        assert!((at[1] + 1.2).abs() < 1e-12);
        // axis-aligned flat box in 3d: attitude along ±e3
        let flat = Zonotope::from_columns(
            vec![0.0; 3],
            &[vec![2.0, 0.0, 0.0], vec![0.0, 1.5, 0.0], vec![0.0, 0.0, 1e-4]],
        )
        .unwrap();
        let at = attitude(&flat).unwrap();
        assert!(at[0].abs() < 1e-12 && at[1].abs() < 1e-12);
        assert!(at[2].abs() > 0.0);
        // uniform scaling scales the attitude, not its direction
        let scaled = example_piece().shrink(2.0);
        let at2 = attitude(&scaled).unwrap();
        assert!((at2[0] - 0.0).abs() < 1e-12);
        assert!((at2[1] + 2.4).abs() < 1e-12);
    }

    #[test]
    fn contraction_sorted_golden() {
        let out = contract_with_mode(
            &example_candidate(),
            &[example_piece()],
            0.01,
            SortMode::ByAttitude,
        )
        .unwrap();
        assert!((out.center[0] - 1.0).abs() < 1e-9);
        assert!((out.center[1] - 1.105).abs() < 1e-9);
        assert_eq!(out.num_generators(), 2);
        assert!((out.generators.get(0, 0) - 0.0).abs() < 1e-9);
        assert!((out.generators.get(1, 0) - 0.895).abs() < 1e-9);
        assert!((out.generators.get(0, 1) - 1.0).abs() < 1e-9);
        assert!((out.generators.get(1, 1) - 0.0).abs() < 1e-9);
    }

    #[test]
    fn contraction_unsorted_golden() {
        let out = contract_with_mode(
            &example_candidate(),
            &[example_piece()],
            0.01,
            SortMode::Unsorted,
        )
        .unwrap();
        assert!((out.center[0] - 1.0).abs() < 1e-9);
        assert!((out.center[1] - 1.105).abs() < 1e-9);
        assert_eq!(out.num_generators(), 1);
        assert!((out.generators.get(0, 0) - 0.0).abs() < 1e-9);
        assert!((out.generators.get(1, 0) - 0.895).abs() < 1e-9);
    }

    #[test]
    fn contraction_no_pieces_is_identity() {
        let c = example_candidate();
        assert_eq!(contract(&c, &[], 1e-6).unwrap(), c);
    }

    #[test]
    fn contraction_separates_and_nests() {
        let c = example_candidate();
        let piece = example_piece();
        let out = contract(&c, &[piece.clone()], 0.01).unwrap();
        assert!(lp::zonotopes_disjoint(&out, &piece).unwrap());
        assert!(out.num_generators() <= c.num_generators());
        // nesting via support functions in many directions
        for k in 0..1000 {
            let a = std::f64::consts::TAU * k as f64 / 1000.0;
            let d = [a.cos(), a.sin()];
            assert!(out.support(&d) <= c.support(&d) + 1e-9);
        }
    }

    #[test]
    fn contraction_collapse_detected() {
        // the piece swallows the candidate almost fully along both axes:
        // the range is nearly [-1,1] but not within the delete tolerance
        let candidate = Zonotope::from_box(vec![0.0, 0.0], &[1.0, 1.0]).unwrap();
        let piece = Zonotope::from_box(vec![0.0, 0.0], &[0.999, 0.999]).unwrap();
        let err = contract(&candidate, &[piece], 0.01).unwrap_err();
        assert!(matches!(err, Error::ContractionCollapse(_)));
    }

    #[test]
    fn verify_frozen_system() {
        let sys = System::from_strings("frozen", 2, &["0".into(), "0".into()]).unwrap();
        let u = example_candidate();
        assert!(verify_candidate(&sys, &u, &u, 0.1, &OuterParams::default()).unwrap());
        // a far-away candidate cannot be certified
        let far = Zonotope::from_box(vec![50.0, 50.0], &[1.0, 1.0]).unwrap();
        assert!(!verify_candidate(&sys, &far, &u, 0.1, &OuterParams::default()).unwrap());
    }

    #[test]
    fn inner_step_frozen_flow() {
        let sys = System::from_strings("frozen", 2, &["0".into(), "0".into()]).unwrap();
        let u0 = Zonotope::from_box(vec![0.0, 0.0], &[1.0, 1.0]).unwrap();
        let params = InnerParams { h: 0.1, ..Default::default() };
        let rec = inner_step(&sys, &u0, 0.0, &params);
        assert!(rec.verified, "failure: {:?}", rec.failure);
        let u1 = rec.candidate.unwrap();
        // under frozen dynamics the candidate is U_0 minus a thin collar
        for k in 0..32 {
            let a = std::f64::consts::TAU * k as f64 / 32.0;
            let d = [a.cos(), a.sin()];
            assert!(u1.support(&d) <= u0.support(&d) + 1e-9);
            assert!(u1.support(&d) >= u0.support(&d) - 1e-2, "collar too thick");
        }
    }

    #[test]
    fn inner_step_linear_contraction() {
        let sys = System::from_strings("contract", 2, &["-x1".into(), "-x2".into()]).unwrap();
        let u0 = Zonotope::from_box(vec![0.0, 0.0], &[1.0, 1.0]).unwrap();
        let params = InnerParams { h: 0.05, ..Default::default() };
        let rec = inner_step(&sys, &u0, 0.0, &params);
        assert!(rec.verified, "failure: {:?}", rec.failure);
        let u1 = rec.candidate.unwrap();
        // the flow shrinks space by e^{-h}; the inner set must fit in the
        // slightly inflated exact image
        let shrink = (-0.05f64).exp();
        let hull = u1.interval_hull();
        for i in 0..2 {
            assert!(hull.upper[i] <= shrink + 1e-6);
            assert!(hull.lower[i] >= -shrink - 1e-6);
        }
        // and it must not be empty or tiny
        assert!(u1.volume() > 0.5 * (2.0 * shrink).powi(2));
    }

    #[test]
    fn inner_reach_zero_steps() {
        let sys = System::from_strings("frozen", 2, &["0".into(), "0".into()]).unwrap();
        let x0 = Zonotope::from_box(vec![0.0, 0.0], &[1.0, 1.0]).unwrap();
        let params = InnerParams { n_steps: 0, ..Default::default() };
        let records = inner_reach(&sys, &x0, &params).unwrap();
        assert!(records.is_empty());
    }

    #[test]
    fn contraction_separates_every_piece_in_a_real_run() {
        let b = benchmark("ElectroOsc").unwrap();
        let params = InnerParams { h: 0.05, n_steps: 5, ..Default::default() };
        let records = inner_reach(&b.system, &b.x0, &params).unwrap();
        assert_eq!(records.len(), 5);
        for rec in &records {
            assert!(rec.verified);
            let candidate = rec.candidate.as_ref().unwrap();
            for (i, piece) in rec.outer_pieces.iter().enumerate() {
                assert!(
                    lp::zonotopes_disjoint(candidate, piece).unwrap(),
                    "step at t={} still intersects piece {i}",
                    rec.t_start
                );
            }
            // the candidate nests inside the whole-set outer-approximation
            let outer = rec.outer_whole.as_ref().unwrap();
            for k in 0..256 {
                let a = std::f64::consts::TAU * k as f64 / 256.0;
                let d = [a.cos(), a.sin()];
                assert!(candidate.support(&d) <= outer.support(&d) + 1e-9);
            }
        }
    }

    #[test]
    fn inner_reach_electro_osc_one_step() {
        let b = benchmark("ElectroOsc").unwrap();
        let params = InnerParams { h: 0.05, n_steps: 1, ..Default::default() };
        let records = inner_reach(&b.system, &b.x0, &params).unwrap();
        assert_eq!(records.len(), 1);
        assert!(records[0].verified, "failure: {:?}", records[0].failure);
        // spot-check soundness: integrate the candidate center backward and
        // require it to land in X0
        let u1 = records[0].candidate.as_ref().unwrap();
        let back = crate::ode::integrate(
            &b.system.time_invert(),
            &u1.center,
            0.05,
            1e-10,
        )
        .unwrap();
        assert!(b.x0.contains_point(&back, 1e-6).unwrap());
    }
}
