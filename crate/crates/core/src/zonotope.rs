//! Zonotope value type and elementary geometric operations.
//!
//! A zonotope is the set `{ c + G a : a in [-1,1]^p }` for a center `c` and
//! a generator matrix `G` with one generator per column. No normalization
//! is applied: generator columns may be linearly dependent, zero generators
//! are legal, and `p = 0` encodes a single point.

use crate::error::{Error, Result};
use crate::linalg::{self, for_each_combination, Mat};
use crate::lp;
use crate::DEFAULT_TOL;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zonotope {
    pub center: Vec<f64>,
    /// `n x p` generator matrix; column `j` is generator `g_j`.
    pub generators: Mat,
}

impl Zonotope {
    pub fn new(center: Vec<f64>, generators: Mat) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::Invalid("zonotope dimension must be at least 1".into()));
        }
        if generators.rows() != center.len() {
            return Err(Error::DimensionMismatch(format!(
                "center has dimension {}, generators have {} rows",
                center.len(),
                generators.rows()
            )));
        }
        Ok(Zonotope { center, generators })
    }

    /// A single point (zero generators).
    pub fn point(center: Vec<f64>) -> Self {
        let n = center.len();
        Zonotope { center, generators: Mat::zeros(n, 0) }
    }

    pub fn from_columns(center: Vec<f64>, cols: &[Vec<f64>]) -> Result<Self> {
        let g = Mat::from_columns(center.len(), cols)?;
        Zonotope::new(center, g)
    }

    /// Axis-aligned box `center ± radius` as a zonotope with diagonal
    /// generators; zero radii are kept (zero columns are legal).
    pub fn from_box(center: Vec<f64>, radius: &[f64]) -> Result<Self> {
        let n = center.len();
        if radius.len() != n {
            return Err(Error::DimensionMismatch("box radius length".into()));
        }
        let mut g = Mat::zeros(n, n);
        for i in 0..n {
            g.set(i, i, radius[i]);
        }
        Zonotope::new(center, g)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.cols()
    }

    /// Numeric rank of the generator matrix.
    pub fn rank(&self, tol: f64) -> usize {
        self.generators.rank(tol)
    }

    pub fn is_full_dimensional(&self, tol: f64) -> bool {
        self.rank(tol) == self.dim()
    }

    /// Parallelotope test: exactly `n` generators of full rank.
    pub fn is_parallelotope(&self, tol: f64) -> bool {
        self.num_generators() == self.dim() && self.is_full_dimensional(tol)
    }

    /// Support function `h(d) = d·c + Σ_j |d·g_j|`.
    pub fn support(&self, d: &[f64]) -> f64 {
        assert_eq!(d.len(), self.dim(), "support direction dimension");
        let mut s = linalg::dot(d, &self.center);
        for j in 0..self.num_generators() {
            s += linalg::dot(d, self.generators.col(j)).abs();
        }
        s
    }

    /// The point of the zonotope that maximizes `d·x`
    /// (ties resolved toward `+g_j` when `d·g_j = 0`... the choice does not
    /// affect the support value).
    pub fn support_point(&self, d: &[f64]) -> Vec<f64> {
        let mut x = self.center.clone();
        for j in 0..self.num_generators() {
            let g = self.generators.col(j);
            let s = if linalg::dot(d, g) >= 0.0 { 1.0 } else { -1.0 };
            linalg::axpy(&mut x, s, g);
        }
        x
    }

    /// Componentwise interval hull `c_i ± Σ_j |G(i,j)|`.
    pub fn interval_hull(&self) -> IntervalBox {
        let n = self.dim();
        let mut lower = self.center.clone();
        let mut upper = self.center.clone();
        for j in 0..self.num_generators() {
            let g = self.generators.col(j);
            for i in 0..n {
                lower[i] -= g[i].abs();
                upper[i] += g[i].abs();
            }
        }
        IntervalBox { lower, upper }
    }

    /// Exact volume by the sum over all `n`-subsets of generators of the
    /// absolute determinants, scaled by `2^n`. Returns 0 when the generator
    /// matrix is rank deficient (in particular whenever `p < n`).
    pub fn volume(&self) -> f64 {
        let n = self.dim();
        let p = self.num_generators();
        if p < n {
            return 0.0;
        }
        let mut sum = 0.0;
        for_each_combination(p, n, |idx| {
            let sq = self.generators.select_cols(idx);
            sum += sq.det().abs();
        });
        sum * 2f64.powi(n as i32)
    }

    /// Uniform sample `c + G a` with `a` uniform on `[-1,1]^p`.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut x = self.center.clone();
        for j in 0..self.num_generators() {
            let a: f64 = rng.random_range(-1.0..=1.0);
            linalg::axpy(&mut x, a, self.generators.col(j));
        }
        x
    }

    /// LP membership test: feasibility of `c + G a = x`, `a in [-1,1]^p`,
    /// accepting residuals up to `tol` per coordinate.
    pub fn contains_point(&self, x: &[f64], tol: f64) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch("contains_point".into()));
        }
        let p = self.num_generators();
        let rhs = linalg::sub(x, &self.center);
        let residual =
            lp::min_equality_residual(&self.generators, &rhs, &vec![-1.0; p], &vec![1.0; p])?;
        Ok(residual <= tol)
    }

    /// Minkowski sum: centers add, generator matrices concatenate.
    pub fn minkowski_sum(&self, other: &Zonotope) -> Result<Zonotope> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch("minkowski_sum".into()));
        }
        let mut g = self.generators.clone();
        for j in 0..other.num_generators() {
            g.push_col(other.generators.col(j));
        }
        Zonotope::new(linalg::add(&self.center, &other.center), g)
    }

    /// Image under a linear map: `A Z = <A c, A G>`.
    pub fn linear_image(&self, a: &Mat) -> Result<Zonotope> {
        if a.cols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "linear_image: map has {} columns, zonotope dimension {}",
                a.cols(),
                self.dim()
            )));
        }
        let c = a.matvec(&self.center);
        let g = a.matmul(&self.generators)?;
        Zonotope::new(c, g)
    }

    /// Scale all generators by `s` about the center.
    pub fn shrink(&self, s: f64) -> Zonotope {
        Zonotope { center: self.center.clone(), generators: self.generators.scale(s) }
    }
}

/// Axis-aligned box with `lower <= upper` componentwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl IntervalBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch("interval box bounds".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::Invalid("interval box needs lower <= upper".into()));
        }
        Ok(IntervalBox { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn radius(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (u - l)).collect()
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= l - slack && *v <= u + slack)
    }

    pub fn contains_box(&self, other: &IntervalBox, slack: f64) -> bool {
        other
            .lower
            .iter()
            .zip(&other.upper)
            .zip(self.lower.iter().zip(&self.upper))
            .all(|((ol, ou), (l, u))| *ol >= l - slack && *ou <= u + slack)
    }

    pub fn inflate(&self, eps: f64) -> IntervalBox {
        IntervalBox {
            lower: self.lower.iter().map(|l| l - eps).collect(),
            upper: self.upper.iter().map(|u| u + eps).collect(),
        }
    }

    /// Grow the box about its center by `factor` plus an absolute margin.
    pub fn widen(&self, factor: f64, margin: f64) -> IntervalBox {
        let c = self.center();
        let r = self.radius();
        let lower = c.iter().zip(&r).map(|(ci, ri)| ci - ri * factor - margin).collect();
        let upper = c.iter().zip(&r).map(|(ci, ri)| ci + ri * factor + margin).collect();
        IntervalBox { lower, upper }
    }

    pub fn to_zonotope(&self) -> Zonotope {
        Zonotope::from_box(self.center(), &self.radius()).expect("box dimensions agree")
    }

    pub fn hull_of_points(points: &[Vec<f64>]) -> Result<IntervalBox> {
        let first = points
            .first()
            .ok_or_else(|| Error::Invalid("hull of empty point set".into()))?;
        let mut lower = first.clone();
        let mut upper = first.clone();
        for p in &points[1..] {
            for i in 0..p.len() {
                lower[i] = lower[i].min(p[i]);
                upper[i] = upper[i].max(p[i]);
            }
        }
        Ok(IntervalBox { lower, upper })
    }
}

/// Generalized cross product: the vector of signed `(n-1)`-minors of an
/// `n x (n-1)` matrix, orthogonal to every column.
///
/// Component `i` is `(-1)^(i+1) det(M with row i deleted)` (1-based `i`).
/// Errors when every minor vanishes below `tol` times the Hadamard scale of
/// the columns, which happens exactly when the columns are rank deficient.
pub fn cross_product(m: &Mat, tol: f64) -> Result<Vec<f64>> {
    let n = m.rows();
    if m.cols() + 1 != n {
        return Err(Error::DimensionMismatch(format!(
            "cross product needs an n x (n-1) matrix, got {} x {}",
            n,
            m.cols()
        )));
    }
    let mut v = vec![0.0; n];
    for i in 0..n {
        let minor = m.delete_row(i).det();
        v[i] = if i % 2 == 0 { minor } else { -minor };
    }
    // Hadamard bound of the columns as the natural scale for the minors.
    let scale: f64 = (0..m.cols()).map(|j| linalg::norm2(m.col(j))).product();
    if linalg::norm_inf(&v) <= tol * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::RankDeficient(
            "cross product of rank-deficient columns".into(),
        ));
    }
    Ok(v)
}

/// Numeric rank with the crate-wide pivoted-QR scheme.
pub fn numeric_rank(m: &Mat, tol: f64) -> usize {
    m.rank(tol)
}

/// Convenience wrapper using the crate default tolerance.
pub fn cross_product_default(m: &Mat) -> Result<Vec<f64>> {
    cross_product(m, DEFAULT_TOL)
}
