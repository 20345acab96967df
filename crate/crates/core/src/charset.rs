//! Characteristic sets: skew-symmetric Hessians, bracket generation and grid scans.

use std::collections::{HashMap, HashSet};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SrmError};
use crate::expr::{self, Expr};
use crate::field::{bracket_coords, VectorField};
use crate::manifold::ManifoldModel;
use crate::surface::{surface_frame, Hypersurface, Locus, ParamBox};

/// Relative singular-value threshold for numerical rank.
pub const RANK_TOL: f64 = 1e-6;
/// Deepest bracket level explored by [`bracket_generation_step`].
pub const MAX_BRACKET_DEPTH: usize = 6;
/// Scan cells are flagged when `|N₀|` at the center is below `SCAN_CONSTANT · h`.
pub const SCAN_CONSTANT: f64 = 2.0;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SkewHessianResult {
    /// `([X_j, X_k] φ)(p)`.
    pub matrix: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub skew_residual: f64,
    /// `rank/2 + 1`, a lower bound for the codimension in `Σ` of a submanifold locally
    /// containing the characteristic set near `p` when `Tφ(p) ≠ 0`.
    pub codimension_bound: usize,
}

/// Skew-symmetric Hessian of a function with gradient `grad` (coordinates) at `p`.
pub fn skew_hessian(fields: &[VectorField], grad: &DVector<f64>, p: &[f64]) -> Result<SkewHessianResult> {
    let k = fields.len();
    let mut h = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in (i + 1)..k {
            let v = bracket_coords(&fields[i], &fields[j], p).dot(grad);
            h[(i, j)] = v;
            h[(j, i)] = -v;
        }
    }
    let skew_residual = (&h + h.transpose()).abs().max();
    let mut sv: Vec<f64> = h.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = if smax <= 1e-12 {
        0
    } else {
        let cut = RANK_TOL * smax;
        if sv.iter().any(|s| *s > 0.1 * cut && *s < 10.0 * cut) {
            return Err(SrmError::Numerical("singular values too close to the rank threshold".into()));
        }
        sv.iter().filter(|s| **s > cut).count()
    };
    Ok(SkewHessianResult {
        matrix: h.row_iter().map(|r| r.iter().copied().collect()).collect(),
        singular_values: sv,
        rank,
        skew_residual,
        codimension_bound: rank / 2 + 1,
    })
}

/// Fields `X_j = ∂_j` for `j < k` and `X_k = ∂_k + Σ_{m=1}^{n-k} (x¹)^m ∂_{k+m}` on `ℝⁿ`
/// (1-based indices).
pub fn sharp_example_fields(n: usize, k: usize) -> Result<Vec<VectorField>> {
    if !(n > k && k >= 2) {
        return Err(SrmError::InvalidInput(format!("need n > k ≥ 2, got n = {n}, k = {k}")));
    }
    let unit = |j: usize| (0..n).map(|i| Expr::Const(if i == j { 1.0 } else { 0.0 })).collect::<Vec<_>>();
    let mut out: Vec<VectorField> = (0..k - 1).map(|j| VectorField::from_exprs(format!("X{}", j + 1), unit(j))).collect();
    let mut last = unit(k - 1);
    for m in 1..=(n - k) {
        last[k - 1 + m] = expr::pow(Expr::Var(0), m as f64);
    }
    out.push(VectorField::from_exprs(format!("X{k}"), last));
    Ok(out)
}

fn span_rank(vectors: &[DVector<f64>], dim: usize) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(dim, vectors.len(), |i, j| vectors[j][i]);
    let sv = m.svd(false, false).singular_values;
    let smax = sv.max();
    if smax <= 1e-12 {
        return 0;
    }
    sv.iter().filter(|s| **s > RANK_TOL * smax).count()
}

/// Smallest bracket depth at which the iterated brackets of `fields` span the tangent
/// space at `p`, or `None` if they do not by [`MAX_BRACKET_DEPTH`].
///
/// Depths above 2 need expression fields.
pub fn bracket_generation_step(fields: &[VectorField], p: &[f64]) -> Result<Option<usize>> {
    let dim = p.len();
    let mut all: Vec<DVector<f64>> = fields.iter().map(|f| f.at(p)).collect();
    if span_rank(&all, dim) == dim {
        return Ok(Some(1));
    }
    let symbolic = fields.iter().all(|f| f.symbolic().is_some());
    if !symbolic {
        for i in 0..fields.len() {
            for j in (i + 1)..fields.len() {
                all.push(bracket_coords(&fields[i], &fields[j], p));
            }
        }
        return if span_rank(&all, dim) == dim {
            Ok(Some(2))
        } else {
            Err(SrmError::InvalidInput("brackets beyond depth 2 need expression fields".into()))
        };
    }
    let mut previous: Vec<VectorField> = fields.to_vec();
    for depth in 2..=MAX_BRACKET_DEPTH {
        let mut next = Vec::new();
        for x in fields {
            for y in &previous {
                let b = VectorField::bracket_symbolic(x, y).expect("expression fields");
                if b.symbolic().unwrap().iter().all(|c| c.is_zero()) {
                    continue;
                }
                all.push(b.at(p));
                next.push(b);
            }
        }
        if span_rank(&all, dim) == dim {
            return Ok(Some(depth));
        }
        previous = next;
        if previous.len() > 256 {
            previous.truncate(256);
        }
    }
    Ok(None)
}

/// One flagged cell of a scan.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ScanCell {
    pub center: Vec<f64>,
    pub size: f64,
    pub n0: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CharScanResult {
    /// Flagged cells at the finest level.
    pub cells: Vec<ScanCell>,
    /// Flagged counts per level; each level halves the cell size.
    pub counts: Vec<usize>,
    pub min_n0: f64,
    /// Mean of `log₂(N_{h/2} / N_h)` over the refinement steps.
    pub dimension_estimate: Option<f64>,
    /// Connected components of the finest flagged cells.
    pub components: usize,
}

/// Hierarchical scan of a parameter box: level 0 uses `cells` per axis and each
/// further level subdivides the flagged cells.
pub fn scan_box(
    domain: &ParamBox,
    cells: usize,
    levels: usize,
    n0: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
) -> Result<CharScanResult> {
    let dim = domain.dim();
    if cells == 0 || levels == 0 {
        return Err(SrmError::InvalidInput("scan needs at least one cell and one level".into()));
    }
    let total = cells.checked_pow(dim as u32).filter(|t| *t <= 4_000_000).ok_or_else(|| {
        SrmError::InvalidInput("scan grid too large".into())
    })?;
    let side0: Vec<f64> = domain.bounds.iter().map(|(a, b)| (b - a) / cells as f64).collect();
    let mut current: Vec<Vec<usize>> = (0..total)
        .map(|mut idx| {
            (0..dim)
                .map(|_| {
                    let r = idx % cells;
                    idx /= cells;
                    r
                })
                .collect()
        })
        .collect();
    let mut counts = Vec::with_capacity(levels);
    let mut min_n0 = f64::INFINITY;
    let mut flagged_cells: Vec<(Vec<usize>, f64)> = Vec::new();
    for level in 0..levels {
        let scale = (1usize << level) as f64;
        let side: Vec<f64> = side0.iter().map(|s| s / scale).collect();
        let h = side.iter().cloned().fold(0.0, f64::max);
        let evals: Vec<Result<f64>> = current
            .par_iter()
            .map(|idx| {
                let c: Vec<f64> = (0..dim).map(|k| domain.bounds[k].0 + (idx[k] as f64 + 0.5) * side[k]).collect();
                n0(&c)
            })
            .collect();
        let mut flagged = Vec::new();
        for (idx, v) in current.iter().zip(evals) {
            let v = v?;
            min_n0 = min_n0.min(v);
            if v < SCAN_CONSTANT * h {
                flagged.push((idx.clone(), v));
            }
        }
        counts.push(flagged.len());
        if level + 1 == levels {
            flagged_cells = flagged;
            break;
        }
        current = flagged
            .iter()
            .flat_map(|(idx, _)| {
                (0..1usize << dim).map(move |child| (0..dim).map(|k| 2 * idx[k] + (child >> k & 1)).collect::<Vec<_>>())
            })
            .collect();
    }
    let finest = (1usize << (levels - 1)) as f64;
    let side: Vec<f64> = side0.iter().map(|s| s / finest).collect();
    let size = side.iter().cloned().fold(0.0, f64::max);
    let components = count_components(&flagged_cells.iter().map(|c| c.0.clone()).collect::<Vec<_>>());
    let ratios: Vec<f64> = counts
        .windows(2)
        .filter(|w| w[0] > 0 && w[1] > 0)
        .map(|w| (w[1] as f64 / w[0] as f64).log2())
        .collect();
    let dimension_estimate = (!ratios.is_empty() && ratios.len() == levels - 1)
        .then(|| ratios.iter().sum::<f64>() / ratios.len() as f64);
    Ok(CharScanResult {
        cells: flagged_cells
            .into_iter()
            .map(|(idx, v)| ScanCell {
                center: (0..dim).map(|k| domain.bounds[k].0 + (idx[k] as f64 + 0.5) * side[k]).collect(),
                size,
                n0: v,
            })
            .collect(),
        counts,
        min_n0,
        dimension_estimate,
        components,
    })
}

fn count_components(cells: &[Vec<usize>]) -> usize {
    let index: HashMap<&Vec<usize>, usize> = cells.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let mut seen = HashSet::new();
    let mut components = 0;
    for start in 0..cells.len() {
        if !seen.insert(start) {
            continue;
        }
        components += 1;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            let c = &cells[i];
            let dim = c.len();
            for offset in 0..3usize.pow(dim as u32) {
                let mut rem = offset;
                let mut nb = Vec::with_capacity(dim);
                let mut valid = true;
                for x in c {
                    let step = (rem % 3) as isize - 1;
                    rem /= 3;
                    let v = *x as isize + step;
                    if v < 0 {
                        valid = false;
                        break;
                    }
                    nb.push(v as usize);
                }
                if !valid {
                    continue;
                }
                if let Some(&j) = index.get(&nb) {
                    if seen.insert(j) {
                        stack.push(j);
                    }
                }
            }
        }
    }
    components
}

/// Scan of a parametrized surface for small `|N₀|`. Bubble profiles are scanned in
/// the profile angle only.
pub fn characteristic_scan(m: &ManifoldModel, s: &Hypersurface, cells: usize, levels: usize) -> Result<CharScanResult> {
    let dom = s.domain().ok_or(SrmError::UnboundedDomain)?;
    match s {
        Hypersurface::Profile(b) => {
            let reference = b.sphere_reference();
            let theta = ParamBox::new(vec![dom.bounds[0]]);
            scan_box(&theta, cells, levels, &|x: &[f64]| {
                let mut xi = vec![x[0]];
                xi.extend_from_slice(&reference);
                Ok(surface_frame(m, s, &Locus::Param(xi))?.n0_norm)
            })
        }
        _ => scan_box(&dom, cells, levels, &|xi: &[f64]| Ok(surface_frame(m, s, &Locus::Param(xi.to_vec()))?.n0_norm)),
    }
}

/// Ambient point of a scan cell center (profile scans fix the sphere factor).
pub fn cell_point(s: &Hypersurface, center: &[f64]) -> Result<Vec<f64>> {
    match s {
        Hypersurface::Profile(b) if center.len() == 1 => {
            let mut xi = center.to_vec();
            xi.extend(b.sphere_reference());
            s.param_point(&xi)
        }
        _ => s.param_point(center),
    }
}

/// `|(X_j Φ)_j| / |∇Φ|` at a point of `Σ = {Φ = 0}`.
pub fn field_n0_proxy(fields: &[VectorField], grad: &DVector<f64>, p: &[f64]) -> f64 {
    let g = grad.norm();
    if g == 0.0 {
        return 0.0;
    }
    fields.iter().map(|f| f.at(p).dot(grad).powi(2)).sum::<f64>().sqrt() / g
}

/// Scan of a graph or level-set-backed surface against a bare family of vector fields.
pub fn characteristic_scan_fields(fields: &[VectorField], s: &Hypersurface, cells: usize, levels: usize) -> Result<CharScanResult> {
    let dom = s.domain().ok_or(SrmError::UnboundedDomain)?;
    scan_box(&dom, cells, levels, &|xi: &[f64]| {
        let p = s.param_point(xi)?;
        let (_, grad, _) = s
            .level(&p)
            .ok_or_else(|| SrmError::InvalidInput("field scans need a defining function".into()))?;
        Ok(field_n0_proxy(fields, &grad, &p))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::field::ScalarField;
    use crate::manifold::builtin_heisenberg;

    #[test]
    fn heisenberg_t_has_standard_skew_hessian() {
        let m = builtin_heisenberg(1).unwrap();
        let grad = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let r = skew_hessian(m.horizontal(), &grad, &[0.3, -0.2, 0.5]).unwrap();
        assert_eq!(r.matrix, vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
        assert_eq!(r.rank, 2);
        let r = skew_hessian(m.horizontal(), &DVector::zeros(3), &[0.3, -0.2, 0.5]).unwrap();
        assert_eq!(r.rank, 0);
    }

    #[test]
    fn sharp_fields_generate_at_expected_step() {
        for (n, k) in [(3, 2), (4, 2), (5, 3)] {
            let f = sharp_example_fields(n, k).unwrap();
            let p: Vec<f64> = (0..n).map(|i| 0.1 * i as f64 - 0.2).collect();
            assert_eq!(bracket_generation_step(&f, &p).unwrap(), Some(n - k + 1), "n={n} k={k}");
        }
        assert!(sharp_example_fields(2, 2).is_err());
    }

    #[test]
    fn sharp_example_scan_dimension() {
        let f = sharp_example_fields(3, 2).unwrap();
        let s = Hypersurface::graph(2, ScalarField::from_expr(Expr::parse("x^2", &["x", "y"]).unwrap(), 2), vec![(-1.0, 1.0); 2]);
        let r = characteristic_scan_fields(&f, &s, 8, 3).unwrap();
        assert!((r.dimension_estimate.unwrap() - 1.0).abs() < 0.2, "{r:?}");
        assert!(r.cells.iter().all(|c| c.center[0].abs() < c.size));
    }

    #[test]
    fn vertical_plane_has_no_characteristic_cells() {
        let m = builtin_heisenberg(1).unwrap();
        let s = Hypersurface::graph(0, ScalarField::from_expr(Expr::parse("0", &["y", "t"]).unwrap(), 2), vec![(-1.0, 1.0); 2]);
        let r = characteristic_scan(&m, &s, 8, 2).unwrap();
        assert!(r.cells.is_empty());
        assert_eq!(r.components, 0);
        assert!(r.dimension_estimate.is_none());
    }
}
