//! Splitting a zonotope into non-overlapping sub-zonotopes and refining the
//! facets of a boundary.
//!
//! One tiling pass walks the generator columns left to right. Moving the
//! facets that face the negative side of generator `g_j` across the zonotope
//! removes `g_j` and sweeps out one sub-zonotope per moved facet; the sweep
//! is recorded by copying the facet's boundary-matrix row into the tiling
//! matrix with entry `j` zeroed. After `p - n` passes a parallelotope
//! remains and is emitted as the final row. Stopping after any earlier pass
//! still yields a valid tiling, which is how tile budgets are honored.

use crate::boundary::{self, decode_row, extract_boundary, Facet};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::zonotope::{cross_product, Zonotope};
use serde::{Deserialize, Serialize};

/// Row-per-tile encoding over a permuted copy of the source zonotope.
///
/// `permutation[j]` is the original index of column `j` of `base`; zero
/// generator columns of the input are dropped before permuting and do not
/// appear in `base` (they contribute nothing to the set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilingMatrix {
    pub entries: Vec<Vec<i8>>,
    pub base: Zonotope,
    pub permutation: Vec<usize>,
}

impl TilingMatrix {
    pub fn num_tiles(&self) -> usize {
        self.entries.len()
    }
}

/// Reorder generator columns so the last `n` are full rank, as one tiling
/// pass requires. Zero columns are dropped. When the trailing block is
/// already full rank the order is kept as-is; otherwise a pivoted-QR column
/// selection is moved to the right, preserving relative order on both sides.
/// Returns the reordered zonotope and the original index of each column.
pub fn normalize_generator_order(z: &Zonotope, tol: f64) -> Result<(Zonotope, Vec<usize>)> {
    let n = z.dim();
    let scale = (0..z.num_generators())
        .map(|j| crate::linalg::norm2(z.generators.col(j)))
        .fold(0.0_f64, f64::max);
    let kept: Vec<usize> = (0..z.num_generators())
        .filter(|&j| crate::linalg::norm2(z.generators.col(j)) > tol * scale.max(1e-300))
        .collect();
    let gens = z.generators.select_cols(&kept);
    let p = gens.cols();
    if gens.rank(tol) < n {
        return Err(Error::NotFullDimensional { rank: gens.rank(tol), dim: n });
    }
    let trailing: Vec<usize> = (p - n..p).collect();
    if gens.select_cols(&trailing).rank(tol) == n {
        let z2 = Zonotope::new(z.center.clone(), gens)?;
        return Ok((z2, kept));
    }
    let pivots = {
        let mut pv = gens.pivot_columns(tol);
        pv.truncate(n);
        pv.sort_unstable();
        pv
    };
    let mut order: Vec<usize> = (0..p).filter(|j| !pivots.contains(j)).collect();
    order.extend_from_slice(&pivots);
    let z2 = Zonotope::new(z.center.clone(), gens.select_cols(&order))?;
    let permutation = order.iter().map(|&j| kept[j]).collect();
    Ok((z2, permutation))
}

/// Full tiling: all `p - n` passes.
pub fn tile(z: &Zonotope, tol: f64) -> Result<TilingMatrix> {
    tile_limited(z, tol, None)
}

/// Tiling stopped between passes once another pass would push the tile
/// count (rows plus the residual) past `max_tiles`. One pass always runs,
/// so the result can exceed `max_tiles` when the first pass alone emits
/// more; the residual row always completes the cover.
pub fn tile_with_budget(z: &Zonotope, tol: f64, max_tiles: usize) -> Result<TilingMatrix> {
    tile_limited(z, tol, Some(max_tiles))
}

fn tile_limited(z: &Zonotope, tol: f64, max_tiles: Option<usize>) -> Result<TilingMatrix> {
    let n = z.dim();
    let (base, permutation) = normalize_generator_order(z, tol)?;
    let p = base.num_generators();
    let (_, bm) = extract_boundary(&base, tol)?;
    let mut rows = bm.entries;
    let mut tiles: Vec<Vec<i8>> = Vec::new();
    let mut stopped_at = p - n;
    for j in 0..p - n {
        if let Some(cap) = max_tiles {
            // the residual row will account for one more tile
            let next_emit = rows.iter().filter(|r| r[j] == -1).count();
            if tiles.len() + next_emit + 1 > cap && !tiles.is_empty() {
                stopped_at = j;
                break;
            }
        }
        rows.retain(|r| r[j] != 0);
        for r in rows.iter_mut() {
            if r[j] == -1 {
                let mut t = r.clone();
                t[j] = 0;
                tiles.push(t);
                r[j] = 1;
            }
        }
    }
    // residual zonotope: generators stopped_at..p, center shifted by the
    // removed generators
    let mut residual = vec![0i8; p];
    for e in residual.iter_mut().take(stopped_at) {
        *e = 1;
    }
    tiles.push(residual);
    Ok(TilingMatrix { entries: tiles, base, permutation })
}

/// Decode every row of a tiling matrix, restoring the original generator
/// column order inside each tile.
pub fn tiles_from_matrix(t: &TilingMatrix) -> Result<Vec<Zonotope>> {
    let mut out = Vec::with_capacity(t.entries.len());
    for row in &t.entries {
        let tile = decode_row(&t.base, row)?;
        // order the tile's generator columns by original index
        let kept: Vec<usize> = row
            .iter()
            .enumerate()
            .filter(|(_, &e)| e == 0)
            .map(|(j, _)| j)
            .collect();
        let mut order: Vec<usize> = (0..kept.len()).collect();
        order.sort_by_key(|&k| t.permutation[kept[k]]);
        let gens = tile.generators.select_cols(&order);
        out.push(Zonotope::new(tile.center, gens)?);
    }
    Ok(out)
}

/// Convenience: tile and decode in one call.
pub fn tile_zonotope(z: &Zonotope, tol: f64) -> Result<Vec<Zonotope>> {
    tiles_from_matrix(&tile(z, tol)?)
}

/// Split a full-rank parallelotope into `k^n` congruent pieces: generators
/// scaled by `1/k`, centers on the regular grid `c + G·delta` with
/// `delta_i = (2 t_i + 1 - k)/k`.
pub fn split_parallelotope_grid(p: &Zonotope, k: usize) -> Result<Vec<Zonotope>> {
    let n = p.dim();
    if k == 0 {
        return Err(Error::Invalid("grid factor must be positive".into()));
    }
    if p.num_generators() != n {
        return Err(Error::Invalid(format!(
            "grid split needs a parallelotope, got {} generators in dimension {n}",
            p.num_generators()
        )));
    }
    let scaled = p.generators.scale(1.0 / k as f64);
    let mut out = Vec::with_capacity(k.pow(n as u32));
    let mut idx = vec![0usize; n];
    loop {
        let delta: Vec<f64> = idx.iter().map(|&t| (2 * t + 1) as f64 / k as f64 - 1.0).collect();
        let offset = p.generators.matvec(&delta);
        let center = crate::linalg::add(&p.center, &offset);
        out.push(Zonotope::new(center, scaled.clone())?);
        // advance the multi-index
        let mut axis = 0;
        loop {
            if axis == n {
                return Ok(out);
            }
            idx[axis] += 1;
            if idx[axis] < k {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

/// Project a facet onto the hyperplane coordinates, split it there, and map
/// the pieces back. The transform is `x -> B' x` for a rank-(n-1) submatrix
/// `B` of the facet generators; the inverse stacks `B'` over the hyperplane
/// normal. Splitting keeps going until `budget` pieces exist or every piece
/// is a parallelotope.
pub fn refine_facet(f: &Facet, budget: usize, tol: f64) -> Result<Vec<Zonotope>> {
    let n = f.zonotope.dim();
    if n < 2 {
        return Ok(vec![f.zonotope.clone()]);
    }
    let budget = budget.max(1);
    let gens = &f.zonotope.generators;
    let basis_cols = gens.first_independent_columns(n - 1, tol)?;
    let b = gens.select_cols(&basis_cols);
    let bt = b.transpose();
    let normal = cross_product(&b, tol)?;

    // transformed facet in R^{n-1}
    let projected = f.zonotope.linear_image(&bt)?;

    let mut pieces: Vec<Zonotope> = Vec::new();
    if projected.is_parallelotope(tol) || projected.num_generators() == n - 1 {
        let k = largest_grid_factor(budget, n - 1);
        if k <= 1 {
            pieces.push(projected);
        } else {
            pieces = split_parallelotope_grid(&projected, k)?;
        }
    } else {
        pieces.push(projected);
        let mut frozen = 0usize; // prefix that refused to split further
        loop {
            if pieces.len() >= budget {
                break;
            }
            let Some(pos) = pieces[frozen..]
                .iter()
                .position(|z| !z.is_parallelotope(tol))
                .map(|p| p + frozen)
            else {
                break;
            };
            let headroom = budget - pieces.len() + 1;
            if headroom < 2 {
                break;
            }
            let piece = pieces.remove(pos);
            let sub = tiles_from_matrix(&tile_with_budget(&piece, tol, headroom)?)?;
            if sub.len() > headroom {
                // one pass already overshoots the budget: keep unrefined
                pieces.insert(pos, piece);
                frozen = pos + 1;
                continue;
            }
            for (offset, s) in sub.into_iter().enumerate() {
                pieces.insert(pos + offset, s);
            }
        }
    }

    // inverse transform: solve [B'; normal'] x = [x_tilde; normal·c_b]
    let mut stacked = Mat::zeros(n, n);
    for i in 0..n - 1 {
        for j in 0..n {
            stacked.set(i, j, bt.get(i, j));
        }
    }
    for j in 0..n {
        stacked.set(n - 1, j, normal[j]);
    }
    let plane_offset = crate::linalg::dot(&normal, &f.zonotope.center);
    let mut out = Vec::with_capacity(pieces.len());
    for piece in &pieces {
        let mut rhs_c = piece.center.clone();
        rhs_c.push(plane_offset);
        let center = stacked.solve(&rhs_c)?;
        let mut g = Mat::zeros(n, piece.num_generators());
        for j in 0..piece.num_generators() {
            let mut rhs = piece.generators.col(j).to_vec();
            rhs.push(0.0);
            let col = stacked.solve(&rhs)?;
            g.col_mut(j).copy_from_slice(&col);
        }
        out.push(Zonotope::new(center, g)?);
    }
    Ok(out)
}

fn largest_grid_factor(budget: usize, dim: usize) -> usize {
    let mut k = 1usize;
    while (k + 1).pow(dim as u32) <= budget {
        k += 1;
    }
    k
}

/// Extract the boundary of `z` and refine each facet, distributing `budget`
/// pieces proportionally to facet measure (at least one piece per facet).
/// With `budget` at or below the facet count the facets are returned
/// unrefined.
pub fn refine_boundary(z: &Zonotope, budget: usize, tol: f64) -> Result<Vec<Zonotope>> {
    let (facets, _) = extract_boundary(z, tol)?;
    let count = facets.len();
    if budget <= count {
        return Ok(facets.into_iter().map(|f| f.zonotope).collect());
    }
    let measures: Vec<f64> = facets
        .iter()
        .map(|f| boundary::facet_measure(&f.zonotope.generators, tol))
        .collect();
    let total: f64 = measures.iter().sum();
    let mut out = Vec::new();
    for (f, m) in facets.iter().zip(&measures) {
        let share = if total > 0.0 { (budget as f64 * m / total).floor() as usize } else { 1 };
        let pieces = refine_facet(f, share.max(1), tol)?;
        out.extend(pieces);
    }
    Ok(out)
}
