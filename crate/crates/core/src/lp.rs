//! Dense linear-programming kernel and the zonotope LP queries.
//!
//! The kernel is a two-phase primal simplex on equality constraints with
//! box-bounded variables,
//!
//! ```text
//!     minimize  c'x   subject to  A x = b,  l <= x <= u,
//! ```
//!
//! where bounds may be infinite. Entering variables follow Bland's rule
//! (lowest eligible index) which precludes cycling; the ratio test breaks
//! ties by the lowest basic variable index and handles bound flips of the
//! entering variable. Phase one minimizes the sum of artificial variables;
//! its optimum doubles as the minimal L1 equality residual, which the
//! membership and disjointness queries use directly.
//!
//! Everything is dense: problems in this crate have at most a few hundred
//! variables.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::zonotope::Zonotope;

/// Feasibility / optimality tolerance of the kernel.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Pivot elements smaller than this are treated as zero.
const PIVOT_TOL: f64 = 1e-11;
/// Iteration cap; exceeding it is reported as a solver failure, never as
/// infeasibility.
const MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct LinearProgram {
    /// Minimized objective, one coefficient per variable.
    pub objective: Vec<f64>,
    pub eq_matrix: Mat,
    pub eq_rhs: Vec<f64>,
    pub var_lower: Vec<f64>,
    pub var_upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, point: Vec<f64> },
    Infeasible,
    Unbounded,
}

#[derive(Clone, Copy, PartialEq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Free variable resting at zero.
    AtZero,
}

struct Tableau {
    m: usize,
    /// structural + artificial columns
    ntot: usize,
    /// row-reduced constraint matrix, `m x ntot`, column-major
    t: Mat,
    rhs_values: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: Vec<VarState>,
    /// current value of every variable
    x: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
}

impl Tableau {
    /// Build the phase-one tableau: nonbasic structurals rest on a finite
    /// bound (or zero when free), artificials absorb the residual.
    fn new(lp: &LinearProgram) -> Result<Self> {
        let m = lp.eq_matrix.rows();
        let nvars = lp.eq_matrix.cols();
        if lp.objective.len() != nvars
            || lp.var_lower.len() != nvars
            || lp.var_upper.len() != nvars
            || lp.eq_rhs.len() != m
        {
            return Err(Error::DimensionMismatch("linear program shapes".into()));
        }
        for j in 0..nvars {
            if lp.var_lower[j] > lp.var_upper[j] {
                return Err(Error::Invalid(format!(
                    "variable {j} has lower bound above upper bound"
                )));
            }
        }
        let ntot = nvars + m;
        let mut t = Mat::zeros(m, ntot);
        for j in 0..nvars {
            t.col_mut(j).copy_from_slice(lp.eq_matrix.col(j));
        }
        let mut lower = lp.var_lower.clone();
        let mut upper = lp.var_upper.clone();
        let mut state = Vec::with_capacity(ntot);
        let mut x = vec![0.0; ntot];
        for j in 0..nvars {
            let (l, u) = (lower[j], upper[j]);
            if l.is_finite() {
                x[j] = l;
                state.push(VarState::AtLower);
            } else if u.is_finite() {
                x[j] = u;
                state.push(VarState::AtUpper);
            } else {
                x[j] = 0.0;
                state.push(VarState::AtZero);
            }
        }
        // residual of the start point
        let mut resid = lp.eq_rhs.clone();
        for j in 0..nvars {
            if x[j] != 0.0 {
                let col = lp.eq_matrix.col(j);
                for i in 0..m {
                    resid[i] -= col[i] * x[j];
                }
            }
        }
        // Negate rows with negative residual so every artificial column is
        // +e_i and the start tableau equals B^{-1} A for the artificial
        // basis.
        let mut basis = Vec::with_capacity(m);
        for i in 0..m {
            if resid[i] < 0.0 {
                for j in 0..nvars {
                    let v = -t.get(i, j);
                    t.set(i, j, v);
                }
            }
            let j = nvars + i;
            t.set(i, j, 1.0);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            x[j] = resid[i].abs();
            state.push(VarState::Basic);
            basis.push(j);
        }
        Ok(Tableau {
            m,
            ntot,
            t,
            rhs_values: basis.iter().map(|&j| x[j]).collect(),
            lower,
            upper,
            state,
            x,
            basis,
            iterations: 0,
        })
    }

    fn reduced_cost(&self, cost: &[f64], j: usize) -> f64 {
        let mut d = cost[j];
        let col = self.t.col(j);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                d -= cb * col[i];
            }
        }
        d
    }

    /// One phase of simplex iterations for the given cost vector.
    /// Returns `true` on optimality, `false` on unboundedness.
    fn run(&mut self, cost: &[f64]) -> Result<bool> {
        loop {
            self.iterations += 1;
            if self.iterations > MAX_ITER {
                return Err(Error::SolverFailure("iteration cap exceeded".into()));
            }
            // Bland: lowest-index eligible entering variable.
            let mut entering = None;
            for j in 0..self.ntot {
                if self.state[j] == VarState::Basic {
                    continue;
                }
                if self.lower[j] == self.upper[j] {
                    continue; // fixed variable can never move
                }
                let d = self.reduced_cost(cost, j);
                let dir = match self.state[j] {
                    VarState::AtLower if d < -FEASIBILITY_TOL => 1.0,
                    VarState::AtUpper if d > FEASIBILITY_TOL => -1.0,
                    VarState::AtZero if d < -FEASIBILITY_TOL => 1.0,
                    VarState::AtZero if d > FEASIBILITY_TOL => -1.0,
                    _ => continue,
                };
                entering = Some((j, dir));
                break;
            }
            let Some((q, dir)) = entering else {
                return Ok(true);
            };

            // Ratio test: largest step `step >= 0` of x_q in direction `dir`
            // keeping basics within bounds; the entering variable's own span
            // allows a bound flip.
            let mut step = self.upper[q] - self.lower[q]; // may be inf
            let mut leave: Option<usize> = None; // row index
            let col = self.t.col(q).to_vec();
            for i in 0..self.m {
                let a = col[i] * dir;
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let bi = self.basis[i];
                let xb = self.x[bi];
                // x_b changes by -a * step
                let limit = if a > 0.0 {
                    if self.lower[bi].is_finite() {
                        (xb - self.lower[bi]) / a
                    } else {
                        f64::INFINITY
                    }
                } else if self.upper[bi].is_finite() {
                    (xb - self.upper[bi]) / a
                } else {
                    f64::INFINITY
                };
                let limit = limit.max(0.0);
                if limit < step - PIVOT_TOL {
                    step = limit;
                    leave = Some(i);
                } else if limit <= step + PIVOT_TOL
                    && leave.map_or(false, |r| bi < self.basis[r])
                {
                    step = step.min(limit);
                    leave = Some(i);
                }
            }
            if step.is_infinite() {
                return Ok(false);
            }

            match leave {
                None => {
                    // bound flip of the entering variable
                    self.apply_step(q, dir, step, &col);
                    self.state[q] = match self.state[q] {
                        VarState::AtLower => VarState::AtUpper,
                        VarState::AtUpper => VarState::AtLower,
                        s => s,
                    };
                }
                Some(r) => {
                    self.apply_step(q, dir, step, &col);
                    let leaving = self.basis[r];
                    // classify the leaving variable at the bound it hit
                    self.state[leaving] = if col[r] * dir > 0.0 {
                        if self.lower[leaving].is_finite() {
                            self.x[leaving] = self.lower[leaving];
                            VarState::AtLower
                        } else {
                            VarState::AtZero
                        }
                    } else if self.upper[leaving].is_finite() {
                        self.x[leaving] = self.upper[leaving];
                        VarState::AtUpper
                    } else {
                        VarState::AtZero
                    };
                    self.pivot(r, q)?;
                }
            }
        }
    }

    fn apply_step(&mut self, q: usize, dir: f64, step: f64, col: &[f64]) {
        if step == 0.0 {
            return;
        }
        self.x[q] += dir * step;
        for i in 0..self.m {
            let bi = self.basis[i];
            self.x[bi] -= col[i] * dir * step;
            self.rhs_values[i] = self.x[bi];
        }
    }

    /// Gauss–Jordan pivot: variable of column `q` becomes basic in row `r`.
    fn pivot(&mut self, r: usize, q: usize) -> Result<()> {
        let piv = self.t.get(r, q);
        if piv.abs() <= PIVOT_TOL {
            return Err(Error::SolverFailure("vanishing pivot".into()));
        }
        let inv = 1.0 / piv;
        for j in 0..self.ntot {
            let v = self.t.get(r, j) * inv;
            self.t.set(r, j, v);
        }
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t.get(i, q);
            if f != 0.0 {
                for j in 0..self.ntot {
                    let v = self.t.get(i, j) - f * self.t.get(r, j);
                    self.t.set(i, j, v);
                }
            }
        }
        self.basis[r] = q;
        self.state[q] = VarState::Basic;
        Ok(())
    }

    fn phase_one_objective(&self, nvars: usize) -> f64 {
        (nvars..self.ntot).map(|j| self.x[j]).sum()
    }
}

/// Solve a linear program. `Infeasible` and `Unbounded` are ordinary
/// outcomes; `Err` is reserved for malformed input and solver failures.
pub fn solve(lp: &LinearProgram) -> Result<LpOutcome> {
    let nvars = lp.eq_matrix.cols();
    let mut tab = Tableau::new(lp)?;

    // Phase one: minimize the artificial sum.
    let mut cost1 = vec![0.0; tab.ntot];
    for j in nvars..tab.ntot {
        cost1[j] = 1.0;
    }
    let optimal = tab.run(&cost1)?;
    debug_assert!(optimal, "phase one is bounded below by zero");
    let scale = 1.0 + lp.eq_rhs.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    if tab.phase_one_objective(nvars) > FEASIBILITY_TOL * scale {
        return Ok(LpOutcome::Infeasible);
    }

    // Pin artificials to zero for phase two; basic ones may remain at zero.
    for j in nvars..tab.ntot {
        tab.lower[j] = 0.0;
        tab.upper[j] = 0.0;
        if tab.state[j] != VarState::Basic {
            tab.state[j] = VarState::AtLower;
            tab.x[j] = 0.0;
        }
    }

    let mut cost2 = vec![0.0; tab.ntot];
    cost2[..nvars].copy_from_slice(&lp.objective);
    let optimal = tab.run(&cost2)?;
    if !optimal {
        return Ok(LpOutcome::Unbounded);
    }
    let point: Vec<f64> = tab.x[..nvars].to_vec();
    let value = lp
        .objective
        .iter()
        .zip(&point)
        .map(|(c, x)| c * x)
        .sum::<f64>();
    Ok(LpOutcome::Optimal { value, point })
}

/// Minimal L1 residual of `A x = b` over the box `l <= x <= u` — the phase-one
/// optimum, in the units of `b`. Zero (up to tolerance) means the system is
/// feasible. The system is rescaled to unit magnitude internally so that
/// very small problems (tiny generators) do not stall on the kernel's
/// absolute tolerances.
pub fn min_equality_residual(
    eq_matrix: &Mat,
    eq_rhs: &[f64],
    var_lower: &[f64],
    var_upper: &[f64],
) -> Result<f64> {
    let nvars = eq_matrix.cols();
    let mut magnitude = eq_rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for j in 0..nvars {
        for v in eq_matrix.col(j) {
            magnitude = magnitude.max(v.abs());
        }
    }
    let scale = if magnitude > 0.0 && magnitude.is_finite() { 1.0 / magnitude } else { 1.0 };
    let lp = LinearProgram {
        objective: vec![0.0; nvars],
        eq_matrix: eq_matrix.scale(scale),
        eq_rhs: eq_rhs.iter().map(|v| v * scale).collect(),
        var_lower: var_lower.to_vec(),
        var_upper: var_upper.to_vec(),
    };
    let mut tab = Tableau::new(&lp)?;
    let mut cost1 = vec![0.0; tab.ntot];
    for j in nvars..tab.ntot {
        cost1[j] = 1.0;
    }
    tab.run(&cost1)?;
    Ok(tab.phase_one_objective(nvars) / scale)
}

/// Joint equality system `c1 + G1 a = c2 + G2 b` with `a`, `b` in unit boxes,
/// shared by the intersection queries below.
fn joint_system(z1: &Zonotope, z2: &Zonotope) -> Result<(Mat, Vec<f64>)> {
    if z1.dim() != z2.dim() {
        return Err(Error::DimensionMismatch("zonotope pair".into()));
    }
    let n = z1.dim();
    let p1 = z1.num_generators();
    let p2 = z2.num_generators();
    let mut a = Mat::zeros(n, p1 + p2);
    for j in 0..p1 {
        a.col_mut(j).copy_from_slice(z1.generators.col(j));
    }
    for j in 0..p2 {
        let col: Vec<f64> = z2.generators.col(j).iter().map(|v| -v).collect();
        a.col_mut(p1 + j).copy_from_slice(&col);
    }
    let rhs: Vec<f64> = z2
        .center
        .iter()
        .zip(&z1.center)
        .map(|(c2, c1)| c2 - c1)
        .collect();
    Ok((a, rhs))
}

/// Range `[min a_l, max a_l]` of generator coefficient `l` of `zu` over the
/// intersection with `zo`; `None` when the zonotopes are disjoint.
pub fn intersection_range(zu: &Zonotope, zo: &Zonotope, l: usize) -> Result<Option<(f64, f64)>> {
    let p1 = zu.num_generators();
    if l >= p1 {
        return Err(Error::Invalid(format!(
            "generator index {l} out of range ({p1} generators)"
        )));
    }
    let (a, rhs) = joint_system(zu, zo)?;
    let nv = a.cols();
    let mut objective = vec![0.0; nv];
    objective[l] = 1.0;
    let lp = LinearProgram {
        objective: objective.clone(),
        eq_matrix: a,
        eq_rhs: rhs,
        var_lower: vec![-1.0; nv],
        var_upper: vec![1.0; nv],
    };
    let lo = match solve(&lp)? {
        LpOutcome::Infeasible => return Ok(None),
        LpOutcome::Unbounded => unreachable!("all variables are boxed"),
        LpOutcome::Optimal { value, .. } => value,
    };
    let mut neg = lp;
    neg.objective[l] = -1.0;
    let hi = match solve(&neg)? {
        LpOutcome::Infeasible => return Ok(None),
        LpOutcome::Unbounded => unreachable!("all variables are boxed"),
        LpOutcome::Optimal { value, .. } => -value,
    };
    Ok(Some((lo, hi)))
}

/// True iff the joint membership LP is infeasible.
pub fn zonotopes_disjoint(z1: &Zonotope, z2: &Zonotope) -> Result<bool> {
    let (a, rhs) = joint_system(z1, z2)?;
    let nv = a.cols();
    let residual = min_equality_residual(&a, &rhs, &vec![-1.0; nv], &vec![1.0; nv])?;
    let scale = 1.0 + rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(residual > FEASIBILITY_TOL * scale)
}

/// Sufficient containment test `zin ⊆ zout`.
///
/// Searches for a matrix `K` and vector `b` with `G_in = G_out K`,
/// `c_out - c_in = G_out b` and, per row `i` of `[K b]`,
/// `Σ_j |K(i,j)| + |b(i)| <= 1`. A direct certificate through a full-rank
/// square submatrix of `G_out` is tried first; the general search is a
/// feasibility LP with absolute values split into nonnegative pairs.
/// `false` means the test was inconclusive, which callers must treat as
/// not-contained; the condition is one-sided and never claims containment
/// that does not hold.
pub fn contains_zonotope(zin: &Zonotope, zout: &Zonotope) -> Result<bool> {
    if zin.dim() != zout.dim() {
        return Err(Error::DimensionMismatch("containment pair".into()));
    }
    if square_submatrix_certificate(zin, zout)? {
        return Ok(true);
    }
    containment_lp(zin, zout)
}

/// Fast path: route all of `zin` through `n` independent columns of
/// `G_out`. Sound but incomplete; returns `false` when the certificate does
/// not apply or its row budget is exceeded.
fn square_submatrix_certificate(zin: &Zonotope, zout: &Zonotope) -> Result<bool> {
    let n = zin.dim();
    let pivots = {
        let mut p = zout.generators.pivot_columns(1e-12);
        if p.len() < n {
            return Ok(false);
        }
        p.truncate(n);
        p.sort_unstable();
        p
    };
    let square = zout.generators.select_cols(&pivots);
    let mut rhs = zin.generators.clone();
    let diff: Vec<f64> = zout
        .center
        .iter()
        .zip(&zin.center)
        .map(|(o, i)| o - i)
        .collect();
    rhs.push_col(&diff);
    let Ok(solution) = square.solve_mat(&rhs) else {
        return Ok(false);
    };
    // row k of [K b] has entries only for pivot columns; a small safety
    // margin covers the solve's rounding
    for k in 0..n {
        let sum: f64 = (0..solution.cols()).map(|j| solution.get(k, j).abs()).sum();
        if sum > 1.0 - 1e-9 * (1.0 + sum) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn containment_lp(zin: &Zonotope, zout: &Zonotope) -> Result<bool> {
    let n = zin.dim();
    let p1 = zin.num_generators();
    let p2 = zout.num_generators();

    // Variables: K+ (p2*p1), K- (p2*p1), b+ (p2), b- (p2), slack (p2).
    let nk = p2 * p1;
    let nv = 2 * nk + 3 * p2;
    let kp = |k: usize, j: usize| k * p1 + j;
    let km = |k: usize, j: usize| nk + k * p1 + j;
    let bp = |k: usize| 2 * nk + k;
    let bm = |k: usize| 2 * nk + p2 + k;
    let sl = |k: usize| 2 * nk + 2 * p2 + k;

    let rows = n * p1 + n + p2;
    let mut a = Mat::zeros(rows, nv);
    let mut rhs = vec![0.0; rows];

    // G_out (K+ - K-) = G_in, one row per (axis, column of G_in)
    for j in 0..p1 {
        for axis in 0..n {
            let r = j * n + axis;
            for k in 0..p2 {
                let g = zout.generators.get(axis, k);
                if g != 0.0 {
                    a.set(r, kp(k, j), g);
                    a.set(r, km(k, j), -g);
                }
            }
            rhs[r] = zin.generators.get(axis, j);
        }
    }
    // G_out (b+ - b-) = c_out - c_in
    for axis in 0..n {
        let r = n * p1 + axis;
        for k in 0..p2 {
            let g = zout.generators.get(axis, k);
            if g != 0.0 {
                a.set(r, bp(k), g);
                a.set(r, bm(k), -g);
            }
        }
        rhs[r] = zout.center[axis] - zin.center[axis];
    }
    // Σ_j (K+ + K-)(k,j) + b+(k) + b-(k) + slack_k = 1
    for k in 0..p2 {
        let r = n * p1 + n + k;
        for j in 0..p1 {
            a.set(r, kp(k, j), 1.0);
            a.set(r, km(k, j), 1.0);
        }
        a.set(r, bp(k), 1.0);
        a.set(r, bm(k), 1.0);
        a.set(r, sl(k), 1.0);
        rhs[r] = 1.0;
    }

    let residual = min_equality_residual(&a, &rhs, &vec![0.0; nv], &vec![f64::INFINITY; nv])?;
    let scale = 1.0 + rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(residual <= FEASIBILITY_TOL * scale)
}
