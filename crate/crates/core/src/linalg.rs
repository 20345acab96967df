//! Dense generalized symmetric eigenproblems with an optional linear constraint.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SrmError};

/// Eigenpairs of `A x = μ M x`, ascending, with `M`-orthonormal columns.
#[derive(Clone, Debug)]
pub struct GenEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Orthonormal basis (columns) of the orthogonal complement of `c` via one Householder reflection.
pub fn householder_complement(c: &DVector<f64>) -> DMatrix<f64> {
    let n = c.len();
    let norm = c.norm();
    let mut v = c.clone();
    let alpha = if c[0] >= 0.0 { -norm } else { norm };
    v[0] -= alpha;
    let vn = v.norm();
    let mut hmat = DMatrix::identity(n, n);
    if vn > 0.0 {
        let w = v / vn;
        hmat -= &w * w.transpose() * 2.0;
    }
    hmat.columns(1, n - 1).into_owned()
}

fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    (a - a.transpose()).abs().max()
}

/// Solves `A x = μ M x` for symmetric `A` and symmetric positive definite `M`.
///
/// With `constraint = Some(c)` the problem is restricted to `{x : cᵀx = 0}`.
pub fn generalized_symmetric_eigen(
    a: &DMatrix<f64>,
    m: &DMatrix<f64>,
    constraint: Option<&DVector<f64>>,
) -> Result<GenEigen> {
    let scale = a.abs().max().max(1.0);
    if max_asymmetry(a) > 1e-10 * scale {
        return Err(SrmError::Numerical("stiffness matrix is not symmetric".into()));
    }
    let (ar, mr, z) = match constraint {
        Some(c) => {
            let z = householder_complement(c);
            (z.transpose() * a * &z, z.transpose() * m * &z, Some(z))
        }
        None => (a.clone(), m.clone(), None),
    };
    let mr = (&mr + mr.transpose()) * 0.5;
    let chol = mr
        .cholesky()
        .ok_or_else(|| SrmError::Numerical("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| SrmError::Numerical("singular mass factor".into()))?;
    let c = &linv * &ar * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|i, j| eig.eigenvalues[*i].partial_cmp(&eig.eigenvalues[*j]).unwrap());
    let values: Vec<f64> = order.iter().map(|i| eig.eigenvalues[*i]).collect();
    let y = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, k| eig.eigenvectors[(r, order[k])]);
    let x = linv.transpose() * y;
    let vectors = match z {
        Some(z) => z * x,
        None => x,
    };
    Ok(GenEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_is_orthonormal() {
        let c = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let z = householder_complement(&c);
        assert!((z.transpose() * &z - DMatrix::identity(3, 3)).abs().max() < 1e-14);
        assert!((z.transpose() * c).abs().max() < 1e-14);
    }

    #[test]
    fn constrained_diagonal_problem() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let m = DMatrix::identity(3, 3);
        let e = generalized_symmetric_eigen(&a, &m, Some(&DVector::from_vec(vec![1.0, 0.0, 0.0]))).unwrap();
        assert!((e.values[0] - 2.0).abs() < 1e-12);
        assert!(e.vectors.column(0)[0].abs() < 1e-12);
    }
}

/// Symmetric banded matrix in lower-band storage.
#[derive(Clone, Debug, PartialEq)]
pub struct SymBand {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBand { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[i * (self.bw + 1) + (i - j)]
        }
    }

    /// Adds `v` to entry `(i, j)`; only the lower triangle is stored, so callers add each
    /// off-diagonal pair once.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry outside band");
        self.data[i * (self.bw + 1) + (i - j)] += v;
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let a = self.data[i * (self.bw + 1) + (i - j)];
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    pub fn mul_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, x.ncols());
        for k in 0..x.ncols() {
            out.set_column(k, &self.mul_vec(&x.column(k).into_owned()));
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// `self + s·other` (same shape).
    pub fn axpy(&self, s: f64, other: &SymBand) -> SymBand {
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        out
    }

    /// Banded Cholesky factor `L` (lower, same storage), or `None` if not positive definite.
    pub fn cholesky(&self) -> Option<BandCholesky> {
        let (n, bw) = (self.n, self.bw);
        let mut l = self.data.clone();
        let idx = |i: usize, j: usize| i * (bw + 1) + (i - j);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = l[idx(i, j)];
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    s -= l[idx(i, k)] * l[idx(j, k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return None;
                    }
                    l[idx(i, i)] = s.sqrt();
                } else {
                    l[idx(i, j)] = s / l[idx(j, j)];
                }
            }
        }
        Some(BandCholesky { n, bw, l })
    }
}

/// Cholesky factor of a [`SymBand`].
#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let (n, bw) = (self.n, self.bw);
        let idx = |i: usize, j: usize| i * (bw + 1) + (i - j);
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[idx(i, k)] * y[k];
            }
            y[i] = s / self.l[idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..(i + bw + 1).min(n) {
                s -= self.l[idx(k, i)] * y[k];
            }
            y[i] = s / self.l[idx(i, i)];
        }
        y
    }
}

/// Smallest eigenpairs of `A x = μ M x` for banded symmetric `A`, `M` (M positive definite),
/// optionally restricted to `{cᵀx = 0}`, by shift-and-invert subspace iteration.
pub fn band_smallest_eigen(
    a: &SymBand,
    m: &SymBand,
    constraint: Option<&DVector<f64>>,
    count: usize,
    shift: f64,
    tol: f64,
) -> Result<GenEigen> {
    let n = a.dim();
    let block = (count + 4).min(n.saturating_sub(1)).max(1);
    let mut sigma = shift;
    let mut failed = false;
    let chol = loop {
        match a.axpy(-sigma, m).cholesky() {
            Some(c) if !failed => break c,
            Some(_) => {
                // keep a margin from the eigenvalue that blocked the previous shift
                sigma = 2.0 * sigma - 1.0;
                failed = false;
                if let Some(c) = a.axpy(-sigma, m).cholesky() {
                    break c;
                }
            }
            None => {
                sigma = 2.0 * sigma - 1.1;
                failed = true;
                if sigma < -1e12 {
                    return Err(SrmError::Numerical("no positive definite shift found".into()));
                }
            }
        }
    };
    let w = constraint.map(|c| {
        let w = chol.solve(c);
        let cw = c.dot(&w);
        (c.clone(), w, cw)
    });
    let project = |y: &mut DVector<f64>| {
        if let Some((c, w, cw)) = &w {
            let lam = c.dot(y) / cw;
            *y -= w * lam;
        }
    };
    let mut x = DMatrix::from_fn(n, block, |i, k| (((i + 1) * (k + 3)) as f64 * 0.7548776662).sin() + if k == 0 { 1.0 } else { 0.0 });
    for k in 0..block {
        let mut col = x.column(k).into_owned();
        project(&mut col);
        x.set_column(k, &col);
    }
    let mut prev: Vec<f64> = vec![f64::INFINITY; count];
    for _ in 0..2000 {
        let mx = m.mul_mat(&x);
        let mut y = DMatrix::zeros(n, block);
        for k in 0..block {
            let mut col = chol.solve(&mx.column(k).into_owned());
            project(&mut col);
            y.set_column(k, &col);
        }
        let y = y.qr().q();
        let ar = y.transpose() * a.mul_mat(&y);
        let mr = y.transpose() * m.mul_mat(&y);
        let ar = (&ar + ar.transpose()) * 0.5;
        let small = generalized_symmetric_eigen(&ar, &mr, None)?;
        x = &y * &small.vectors;
        let vals: Vec<f64> = small.values[..count].to_vec();
        let scale = vals.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        let done = vals.iter().zip(&prev).all(|(v, p)| (v - p).abs() <= tol * scale);
        prev = vals;
        if done {
            let vectors = x.columns(0, count).into_owned();
            return Ok(GenEigen { values: prev, vectors });
        }
    }
    Err(SrmError::Numerical("subspace iteration did not converge".into()))
}

#[cfg(test)]
mod band_tests {
    use super::*;

    #[test]
    fn banded_matches_dense() {
        let n = 40;
        let mut a = SymBand::zeros(n, 2);
        let mut m = SymBand::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0 + (i as f64).sin());
            m.add(i, i, 1.0);
            if i + 1 < n {
                a.add(i + 1, i, -1.0);
                m.add(i + 1, i, 0.2);
            }
            if i + 2 < n {
                a.add(i + 2, i, 0.3);
            }
        }
        let m2 = {
            let mut m2 = SymBand::zeros(n, 2);
            for i in 0..n {
                for j in i.saturating_sub(1)..=i {
                    m2.add(i, j, m.get(i, j));
                }
            }
            m2
        };
        let c = DVector::from_fn(n, |i, _| 1.0 + 0.1 * i as f64);
        let dense = generalized_symmetric_eigen(&a.to_dense(), &m2.to_dense(), Some(&c)).unwrap();
        let band = band_smallest_eigen(&a, &m2, Some(&c), 3, -1.0, 1e-13).unwrap();
        for k in 0..3 {
            assert!((dense.values[k] - band.values[k]).abs() < 1e-9, "{k}");
        }
        assert!(c.dot(&band.vectors.column(0)).abs() < 1e-10);
    }
}
