//! Exact facet enumeration of a full-dimensional zonotope and the
//! boundary-matrix encoding.
//!
//! Facets of a zonotope come in centrally symmetric pairs. Each pair lies in
//! two parallel hyperplanes spanned by a rank-(n-1) subset of generators;
//! the facet centers are obtained by pushing the zonotope center along every
//! generator not parallel to the hyperplane, one sign per side. A row of the
//! boundary matrix records, per generator, whether it stays a generator of
//! the facet (0) or was added to (+1) / subtracted from (-1) the center.

use crate::error::{Error, Result};
use crate::linalg::{self, for_each_combination, Mat};
use crate::zonotope::{cross_product, Zonotope};
use serde::{Deserialize, Serialize};

/// Row-per-facet encoding of a zonotope boundary. `entries[i][j]` is one of
/// -1, 0, +1 with the decoding handled by [`facet_from_row`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMatrix {
    pub entries: Vec<Vec<i8>>,
    pub base: Zonotope,
}

impl BoundaryMatrix {
    pub fn num_facets(&self) -> usize {
        self.entries.len()
    }
}

/// A facet: an (n-1)-dimensional zonotope on the boundary of `base`,
/// together with its outward normal and its row in the boundary matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    pub zonotope: Zonotope,
    pub normal: Vec<f64>,
    pub row: usize,
}

/// Quantized dedup key for a hyperplane normal: unit length, first nonzero
/// component positive, bucketed at `tol`.
fn normal_key(v: &[f64], tol: f64) -> Vec<i64> {
    let norm = linalg::norm2(v);
    let mut unit: Vec<f64> = v.iter().map(|x| x / norm).collect();
    if let Some(first) = unit.iter().find(|x| x.abs() > tol) {
        if *first < 0.0 {
            for u in &mut unit {
                *u = -*u;
            }
        }
    }
    unit.iter().map(|u| (u / tol).round() as i64).collect()
}

/// All (n-1)-subsets of generator columns spanning a hyperplane, one subset
/// per distinct hyperplane (first subset in lexicographic order wins).
pub fn hyperplane_bases(generators: &Mat, tol: f64) -> Vec<Vec<usize>> {
    spanning_subsets(generators, tol)
        .into_iter()
        .map(|(subset, _)| subset)
        .collect()
}

fn spanning_subsets(generators: &Mat, tol: f64) -> Vec<(Vec<usize>, Vec<f64>)> {
    let n = generators.rows();
    let p = generators.cols();
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    if p + 1 < n {
        return out;
    }
    debug_assert!(
        subset_count(p, n - 1) <= 5e7,
        "facet enumeration over {p} choose {} subsets",
        n - 1
    );
    for_each_combination(p, n - 1, |subset| {
        let sub = generators.select_cols(subset);
        let Ok(v) = cross_product(&sub, tol) else {
            return; // rank-deficient subset spans no hyperplane
        };
        if seen.insert(normal_key(&v, tol)) {
            out.push((subset.to_vec(), v));
        }
    });
    out
}

fn subset_count(p: usize, k: usize) -> f64 {
    let mut c = 1.0_f64;
    for i in 0..k {
        c *= (p - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Exact boundary of a full-dimensional zonotope: the list of facets and the
/// boundary matrix. Fails with `NotFullDimensional` when the generators span
/// less than the ambient space, in which case the zonotope is its own
/// boundary.
pub fn extract_boundary(z: &Zonotope, tol: f64) -> Result<(Vec<Facet>, BoundaryMatrix)> {
    let n = z.dim();
    let p = z.num_generators();
    let rank = z.rank(tol);
    if rank < n {
        return Err(Error::NotFullDimensional { rank, dim: n });
    }
    if subset_count(p, n - 1) > 5e7 {
        return Err(Error::Invalid(format!(
            "boundary extraction over {p} generators in dimension {n} is intractable"
        )));
    }
    let mut facets = Vec::new();
    let mut entries: Vec<Vec<i8>> = Vec::new();
    for (subset, v) in spanning_subsets(&z.generators, tol) {
        let v_norm = linalg::norm2(&v);
        let mut center_neg = z.center.clone(); // facet on the -v side
        let mut center_pos = z.center.clone();
        let mut row_neg = vec![0i8; p];
        let mut row_pos = vec![0i8; p];
        let mut facet_cols: Vec<usize> = subset.clone();
        for k in 0..p {
            if subset.contains(&k) {
                continue;
            }
            let g = z.generators.col(k);
            let d = linalg::dot(&v, g);
            if d.abs() <= tol * v_norm * linalg::norm2(g) {
                facet_cols.push(k);
            } else if d > 0.0 {
                linalg::axpy(&mut center_neg, -1.0, g);
                linalg::axpy(&mut center_pos, 1.0, g);
                row_neg[k] = -1;
                row_pos[k] = 1;
            } else {
                linalg::axpy(&mut center_neg, 1.0, g);
                linalg::axpy(&mut center_pos, -1.0, g);
                row_neg[k] = 1;
                row_pos[k] = -1;
            }
        }
        facet_cols.sort_unstable();
        let gens = z.generators.select_cols(&facet_cols);
        let outward_neg: Vec<f64> = v.iter().map(|x| -x).collect();
        facets.push(Facet {
            zonotope: Zonotope::new(center_neg, gens.clone())?,
            normal: outward_neg,
            row: entries.len(),
        });
        entries.push(row_neg);
        facets.push(Facet {
            zonotope: Zonotope::new(center_pos, gens)?,
            normal: v,
            row: entries.len(),
        });
        entries.push(row_pos);
    }
    let matrix = BoundaryMatrix { entries, base: z.clone() };
    Ok((facets, matrix))
}

/// Decode a boundary-matrix row without the facet rank check: center is
/// `c + Σ_j row[j]·g_j`, generators are the columns with entry 0.
pub fn decode_row(base: &Zonotope, row: &[i8]) -> Result<Zonotope> {
    let p = base.num_generators();
    if row.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "row has {} entries, zonotope has {p} generators",
            row.len()
        )));
    }
    let mut center = base.center.clone();
    let mut cols = Vec::new();
    for (j, &e) in row.iter().enumerate() {
        match e {
            0 => cols.push(j),
            1 => linalg::axpy(&mut center, 1.0, base.generators.col(j)),
            -1 => linalg::axpy(&mut center, -1.0, base.generators.col(j)),
            other => {
                return Err(Error::Invalid(format!(
                    "boundary row entry must be -1, 0 or 1, got {other}"
                )))
            }
        }
    }
    Zonotope::new(center, base.generators.select_cols(&cols))
}

/// Decode a row as a facet, checking that the zero-entry columns span a
/// hyperplane (rank exactly n-1).
pub fn facet_from_row(base: &Zonotope, row: &[i8], tol: f64) -> Result<Zonotope> {
    let facet = decode_row(base, row)?;
    let rank = facet.generators.rank(tol);
    if rank != base.dim().saturating_sub(1) {
        return Err(Error::RankDeficient(format!(
            "facet generators have rank {rank}, expected {}",
            base.dim() - 1
        )));
    }
    Ok(facet)
}

/// The 2n facets of a full-rank parallelotope: `<c ± g_i, G without column i>`.
pub fn parallelotope_boundary(p: &Zonotope, tol: f64) -> Result<Vec<Facet>> {
    let n = p.dim();
    if p.num_generators() != n {
        return Err(Error::Invalid(format!(
            "parallelotope needs exactly {n} generators, got {}",
            p.num_generators()
        )));
    }
    if p.rank(tol) < n {
        return Err(Error::NotFullDimensional { rank: p.rank(tol), dim: n });
    }
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let gens = p.generators.delete_col(i);
        let v = cross_product(&gens, tol)?;
        let gi = p.generators.col(i);
        let orient = if linalg::dot(&v, gi) >= 0.0 { 1.0 } else { -1.0 };
        let outward: Vec<f64> = v.iter().map(|x| x * orient).collect();
        let inward: Vec<f64> = v.iter().map(|x| -x * orient).collect();
        let mut c_plus = p.center.clone();
        linalg::axpy(&mut c_plus, 1.0, gi);
        let mut c_minus = p.center.clone();
        linalg::axpy(&mut c_minus, -1.0, gi);
        out.push(Facet {
            zonotope: Zonotope::new(c_plus, gens.clone())?,
            normal: outward,
            row: 2 * i,
        });
        out.push(Facet {
            zonotope: Zonotope::new(c_minus, gens)?,
            normal: inward,
            row: 2 * i + 1,
        });
    }
    Ok(out)
}

/// (n-1)-dimensional measure of a facet's generator set:
/// `2^(n-1) Σ ||CP(subset)||` over all (n-1)-subsets of its generators.
pub fn facet_measure(generators: &Mat, tol: f64) -> f64 {
    let n = generators.rows();
    let p = generators.cols();
    if p + 1 < n {
        return 0.0;
    }
    let mut sum = 0.0;
    for_each_combination(p, n - 1, |subset| {
        let sub = generators.select_cols(subset);
        if let Ok(v) = cross_product(&sub, tol) {
            sum += linalg::norm2(&v);
        }
    });
    sum * 2f64.powi(n as i32 - 1)
}
