//! Vertically rigid sub-Riemannian manifold models.
//!
//! A model is a single global chart carrying a frame `X_1..X_h` of the horizontal
//! distribution followed by a vertical frame `T_1..T_v`. The Riemannian metric is the
//! one making the full frame orthonormal, so every tangent vector is handled through
//! its frame components. An adapted connection is described by its coefficients
//! `Γ[a][b][c] = <∇_{E_a} E_b, E_c>` in the same frame.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Result, SrmError};
use crate::field::{d1_4, VectorField};

/// Connection coefficients `Γ[a][b][c] = <∇_{E_a} E_b, E_c>` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Christoffel {
    d: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(d: usize) -> Self {
        Christoffel { d, data: vec![0.0; d * d * d] }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.d + b) * self.d + c]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        self.data[(a * self.d + b) * self.d + c] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }
}

/// Choice of adapted connection.
#[derive(Clone)]
pub enum Connection {
    /// The frame is parallel: all coefficients vanish.
    Flat,
    /// Koszul formula applied to the horizontal structure functions, vertical frame parallel.
    Canonical,
    /// User-supplied coefficients.
    Custom(Arc<dyn Fn(&[f64]) -> Christoffel + Send + Sync>),
}

impl std::fmt::Debug for Connection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Connection::Flat => write!(f, "Flat"),
            Connection::Canonical => write!(f, "Canonical"),
            Connection::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Dilating flow data.
#[derive(Clone)]
pub struct Dilation {
    /// One weight per vertical frame field.
    pub weights: Vec<f64>,
    /// Infinitesimal generator of the flow.
    pub generator: VectorField,
    /// Closed-form flow `(p, λ) ↦ D_λ(p)`, when known.
    pub flow: Option<Arc<dyn Fn(&[f64], f64) -> DVector<f64> + Send + Sync>>,
}

impl std::fmt::Debug for Dilation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dilation").field("weights", &self.weights).finish()
    }
}

/// Ambient model: frames, metric, adapted connection and optional dilation.
#[derive(Clone, Debug)]
pub struct ManifoldModel {
    pub name: String,
    dim: usize,
    horizontal: Vec<VectorField>,
    vertical: Vec<VectorField>,
    rigidity: Vec<usize>,
    connection: Connection,
    dilation: Option<Dilation>,
    complex_structure: Option<DMatrix<f64>>,
}

impl ManifoldModel {
    /// Builds a model from frame fields.
    ///
    /// `rigidity` assigns an equivalence class id to each vertical field.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        horizontal: Vec<VectorField>,
        vertical: Vec<VectorField>,
        rigidity: Vec<usize>,
        connection: Connection,
    ) -> Result<Self> {
        if horizontal.len() + vertical.len() != dim {
            return Err(SrmError::InvalidInput(format!(
                "{} horizontal + {} vertical fields do not span dimension {dim}",
                horizontal.len(),
                vertical.len()
            )));
        }
        if horizontal.is_empty() {
            return Err(SrmError::InvalidInput("no horizontal fields".into()));
        }
        if rigidity.len() != vertical.len() {
            return Err(SrmError::InvalidInput("rigidity partition must label every vertical field".into()));
        }
        Ok(ManifoldModel {
            name: name.into(),
            dim,
            horizontal,
            vertical,
            rigidity,
            connection,
            dilation: None,
            complex_structure: None,
        })
    }

    pub fn with_dilation(mut self, d: Dilation) -> Result<Self> {
        if d.weights.len() != self.vertical.len() {
            return Err(SrmError::InvalidInput("one dilation weight per vertical field".into()));
        }
        self.dilation = Some(d);
        Ok(self)
    }

    /// Constant complex structure on horizontal frame components.
    pub fn with_complex_structure(mut self, j: DMatrix<f64>) -> Self {
        self.complex_structure = Some(j);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dim_horizontal(&self) -> usize {
        self.horizontal.len()
    }

    pub fn dim_vertical(&self) -> usize {
        self.vertical.len()
    }

    pub fn connection(&self) -> &Connection {
        &self.connection
    }

    pub fn dilation(&self) -> Option<&Dilation> {
        self.dilation.as_ref()
    }

    pub fn complex_structure(&self) -> Option<&DMatrix<f64>> {
        self.complex_structure.as_ref()
    }

    pub fn rigidity_classes(&self) -> &[usize] {
        &self.rigidity
    }

    /// Homogeneous dimension `Q = h + Σγ`.
    pub fn homogeneous_dimension(&self) -> Option<f64> {
        self.dilation
            .as_ref()
            .map(|d| self.dim_horizontal() as f64 + d.weights.iter().sum::<f64>())
    }

    /// Frame field `a` (horizontal first, then vertical).
    pub fn field(&self, a: usize) -> &VectorField {
        let h = self.horizontal.len();
        if a < h {
            &self.horizontal[a]
        } else {
            &self.vertical[a - h]
        }
    }

    pub fn horizontal(&self) -> &[VectorField] {
        &self.horizontal
    }

    pub fn vertical(&self) -> &[VectorField] {
        &self.vertical
    }

    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(SrmError::OutsideChart(format!(
                "expected {} coordinates, got {}",
                self.dim,
                p.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(SrmError::OutsideChart("non-finite coordinate".into()));
        }
        Ok(())
    }

    /// Coordinate matrix whose columns are the frame fields at `p`.
    pub fn frame_matrix(&self, p: &[f64]) -> DMatrix<f64> {
        let mut f = DMatrix::zeros(self.dim, self.dim);
        for a in 0..self.dim {
            f.set_column(a, &self.field(a).at(p));
        }
        f
    }

    /// Lie bracket of two frame fields in coordinates.
    pub fn bracket(&self, a: usize, b: usize, p: &[f64]) -> Result<DVector<f64>> {
        self.check_point(p)?;
        Ok(crate::field::bracket_coords(self.field(a), self.field(b), p))
    }

    /// Lie bracket computed purely by central differences (for convergence checks).
    pub fn bracket_fd(&self, a: usize, b: usize, p: &[f64], h: f64) -> Result<DVector<f64>> {
        self.check_point(p)?;
        if h < f64::EPSILON * 16.0 {
            return Err(SrmError::StepUnderflow(h));
        }
        let (x, y) = (self.field(a), self.field(b));
        let jx = crate::field::fd_jacobian(&|q| x.at(q), p, h);
        let jy = crate::field::fd_jacobian(&|q| y.at(q), p, h);
        Ok(jy * x.at(p) - jx * y.at(p))
    }

    /// Everything pointwise: frame, inverse, structure functions, connection, torsion.
    pub fn geometry(&self, p: &[f64]) -> Result<PointGeometry> {
        self.check_point(p)?;
        let d = self.dim;
        let frame = self.frame_matrix(p);
        let det = frame.determinant();
        if det.abs() < 1e-12 {
            return Err(SrmError::DegenerateFrame(det.abs()));
        }
        let frame_inv = frame
            .clone()
            .try_inverse()
            .ok_or(SrmError::DegenerateFrame(det.abs()))?;
        let jacs: Vec<DMatrix<f64>> = (0..d).map(|a| self.field(a).jacobian(p)).collect();
        let mut structure = vec![0.0; d * d * d];
        for a in 0..d {
            for b in (a + 1)..d {
                let br = &jacs[b] * frame.column(a) - &jacs[a] * frame.column(b);
                let comps = &frame_inv * br;
                for c in 0..d {
                    structure[(a * d + b) * d + c] = comps[c];
                    structure[(b * d + a) * d + c] = -comps[c];
                }
            }
        }
        let h = self.dim_horizontal();
        let gamma = match &self.connection {
            Connection::Flat => Christoffel::zeros(d),
            Connection::Canonical => {
                let mut g = Christoffel::zeros(d);
                let c = |x: usize, y: usize, z: usize| structure[(x * d + y) * d + z];
                for a in 0..h {
                    for b in 0..h {
                        for m in 0..h {
                            g.set(a, b, m, 0.5 * (c(a, b, m) - c(b, m, a) + c(m, a, b)));
                        }
                    }
                }
                g
            }
            Connection::Custom(f) => {
                let g = f(p);
                if g.dim() != d {
                    return Err(SrmError::InvalidInput("connection coefficients have wrong dimension".into()));
                }
                g
            }
        };
        let mut torsion = vec![0.0; d * d * d];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    torsion[(a * d + b) * d + c] =
                        gamma.get(a, b, c) - gamma.get(b, a, c) - structure[(a * d + b) * d + c];
                }
            }
        }
        Ok(PointGeometry { p: p.to_vec(), d, h, frame, frame_inv, structure, gamma, torsion })
    }

    /// Connection coefficients at `p`.
    pub fn christoffel(&self, p: &[f64]) -> Result<Christoffel> {
        Ok(self.geometry(p)?.gamma)
    }

    /// `⟨R(E_a,E_b)E_c, E_d⟩` at `p`, flattened as `((a*d+b)*d+c)*d+e`.
    pub fn curvature(&self, p: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim;
        let g0 = self.geometry(p)?;
        let mut r = vec![0.0; d * d * d * d];
        if matches!(self.connection, Connection::Flat) {
            return Ok(r);
        }
        // dgamma[a] = E_a(Γ) at p
        let step = 1e-3 * p.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        let mut dgamma = Vec::with_capacity(d);
        for a in 0..d {
            let dir = g0.frame.column(a).into_owned();
            let mut acc = vec![0.0; d * d * d];
            let shifted: Vec<Christoffel> = [-2.0, -1.0, 1.0, 2.0]
                .iter()
                .map(|s| {
                    let q: Vec<f64> = p.iter().zip(dir.iter()).map(|(x, v)| x + s * step * v).collect();
                    self.christoffel(&q)
                })
                .collect::<Result<_>>()?;
            for (i, v) in acc.iter_mut().enumerate() {
                *v = (shifted[0].data[i] - 8.0 * shifted[1].data[i] + 8.0 * shifted[2].data[i]
                    - shifted[3].data[i])
                    / (12.0 * step);
            }
            dgamma.push(acc);
        }
        let gm = &g0.gamma;
        let idx3 = |a: usize, b: usize, c: usize| (a * d + b) * d + c;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        let mut v = dgamma[a][idx3(b, c, e)] - dgamma[b][idx3(a, c, e)];
                        for f in 0..d {
                            v += gm.get(b, c, f) * gm.get(a, f, e) - gm.get(a, c, f) * gm.get(b, f, e);
                            v -= g0.structure[idx3(a, b, f)] * gm.get(f, c, e);
                        }
                        r[((a * d + b) * d + c) * d + e] = v;
                    }
                }
            }
        }
        Ok(r)
    }

    /// Largest `|⟨[X_i, T_α], T_β⟩|` over horizontal `X_i` and equivalent `α ∼ β`.
    pub fn rigidity_residual(&self, p: &[f64]) -> Result<f64> {
        let g = self.geometry(p)?;
        let (h, d) = (self.dim_horizontal(), self.dim);
        let mut worst: f64 = 0.0;
        for i in 0..h {
            for al in h..d {
                for be in h..d {
                    if self.rigidity[al - h] == self.rigidity[be - h] {
                        worst = worst.max(g.structure(i, al, be).abs());
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Extracts torsion components against a graded orthonormal frame.
    ///
    /// Columns of `frame` are frame-component vectors: horizontal block first.
    pub fn torsion_components(&self, p: &[f64], frame: &DMatrix<f64>) -> Result<TorsionComponents> {
        let g = self.geometry(p)?;
        let (h, d) = (self.dim_horizontal(), self.dim);
        if frame.nrows() != d || frame.ncols() != d {
            return Err(SrmError::InvalidInput("graded frame must be square of full dimension".into()));
        }
        let gram = frame.transpose() * frame;
        let resid = (gram - DMatrix::identity(d, d)).abs().max();
        if resid > 1e-8 {
            return Err(SrmError::NonOrthonormalFrame(resid));
        }
        let block = frame.view((h, 0), (d - h, h)).abs().max();
        if block > 1e-8 {
            return Err(SrmError::NonOrthonormalFrame(block));
        }
        let col = |i: usize| frame.column(i).into_owned();
        let tor = |i: usize, j: usize| g.torsion_vec(&col(i), &col(j));
        let v = d - h;
        let mut out = TorsionComponents {
            c: vec![vec![vec![0.0; h]; h]; v],
            a: vec![vec![vec![0.0; v]; h]; h],
            b: vec![vec![vec![0.0; v]; v]; h],
            d: vec![vec![vec![0.0; v]; h]; v],
            e: vec![vec![vec![0.0; v]; v]; v],
        };
        for j in 0..h {
            for i in 0..h {
                let t = tor(j, i);
                for be in 0..v {
                    out.c[be][j][i] = 0.5 * t.dot(&col(h + be));
                }
            }
            for al in 0..v {
                let t = tor(j, h + al);
                for m in 0..h {
                    out.a[m][j][al] = t.dot(&col(m));
                }
                for be in 0..v {
                    out.d[be][j][al] = t.dot(&col(h + be));
                }
            }
        }
        for al in 0..v {
            for be in 0..v {
                let t = tor(h + al, h + be);
                for j in 0..h {
                    out.b[j][al][be] = 0.5 * t.dot(&col(j));
                }
                for ga in 0..v {
                    out.e[ga][al][be] = 0.5 * t.dot(&col(h + ga));
                }
            }
        }
        Ok(out)
    }
}

/// Torsion tensor components against a graded frame `(e_1..e_h, T_1..T_v)`.
///
/// * `c[β][j][i] = ½⟨Tor(e_j,e_i),T_β⟩`
/// * `a[j][i][α] = ⟨Tor(e_i,T_α),e_j⟩`
/// * `b[j][α][β] = ½⟨Tor(T_α,T_β),e_j⟩`
/// * `d[β][j][α] = ⟨Tor(e_j,T_α),T_β⟩`
/// * `e[β][α][γ] = ½⟨Tor(T_α,T_γ),T_β⟩`
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TorsionComponents {
    pub c: Vec<Vec<Vec<f64>>>,
    pub a: Vec<Vec<Vec<f64>>>,
    pub b: Vec<Vec<Vec<f64>>>,
    pub d: Vec<Vec<Vec<f64>>>,
    pub e: Vec<Vec<Vec<f64>>>,
}

/// Pointwise geometric data of a model.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub p: Vec<f64>,
    d: usize,
    h: usize,
    /// Columns are frame fields in coordinates.
    pub frame: DMatrix<f64>,
    pub frame_inv: DMatrix<f64>,
    structure: Vec<f64>,
    pub gamma: Christoffel,
    torsion: Vec<f64>,
}

impl PointGeometry {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn dim_horizontal(&self) -> usize {
        self.h
    }

    /// `⟨[E_a,E_b],E_c⟩`.
    #[inline]
    pub fn structure(&self, a: usize, b: usize, c: usize) -> f64 {
        self.structure[(a * self.d + b) * self.d + c]
    }

    /// `⟨Tor(E_a,E_b),E_c⟩`.
    #[inline]
    pub fn torsion(&self, a: usize, b: usize, c: usize) -> f64 {
        self.torsion[(a * self.d + b) * self.d + c]
    }

    /// Torsion of two vectors given by frame components.
    pub fn torsion_vec(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let d = self.d;
        let mut out = DVector::zeros(d);
        for a in 0..d {
            if u[a] == 0.0 {
                continue;
            }
            for b in 0..d {
                let w = u[a] * v[b];
                if w == 0.0 {
                    continue;
                }
                for c in 0..d {
                    out[c] += w * self.torsion(a, b, c);
                }
            }
        }
        out
    }

    /// Bracket of the constant-coefficient extensions of `u` and `v`.
    pub fn bracket_vec(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let d = self.d;
        let mut out = DVector::zeros(d);
        for a in 0..d {
            for b in 0..d {
                let w = u[a] * v[b];
                if w == 0.0 {
                    continue;
                }
                for c in 0..d {
                    out[c] += w * self.structure(a, b, c);
                }
            }
        }
        out
    }

    /// Connection term `Σ u^a v^b Γ[a][b][c]` (the part of `∇_u v` beyond `u(v^c)`).
    pub fn gamma_apply(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let d = self.d;
        let mut out = DVector::zeros(d);
        if self.gamma.is_zero() {
            return out;
        }
        for a in 0..d {
            for b in 0..d {
                let w = u[a] * v[b];
                if w == 0.0 {
                    continue;
                }
                for c in 0..d {
                    out[c] += w * self.gamma.get(a, b, c);
                }
            }
        }
        out
    }

    pub fn to_frame(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.frame_inv * v
    }

    pub fn to_coords(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.frame * v
    }

    /// Riemannian volume density in coordinates.
    pub fn volume_density(&self) -> f64 {
        1.0 / self.frame.determinant().abs()
    }
}

/// Heisenberg group ℍⁿ with coordinates `(x_1..x_n, y_1..y_n, t)`.
pub fn builtin_heisenberg(n: usize) -> Result<ManifoldModel> {
    if n < 1 {
        return Err(SrmError::InvalidInput("Heisenberg dimension n must be ≥ 1".into()));
    }
    let d = 2 * n + 1;
    let t = 2 * n;
    let mut horizontal = Vec::with_capacity(2 * n);
    for j in 0..n {
        horizontal.push(
            VectorField::new(format!("X{}", j + 1), move |p| {
                let mut v = DVector::zeros(d);
                v[j] = 1.0;
                v[t] = -0.5 * p[n + j];
                v
            })
            .with_jacobian(move |_| {
                let mut m = DMatrix::zeros(d, d);
                m[(t, n + j)] = -0.5;
                m
            }),
        );
    }
    for j in 0..n {
        horizontal.push(
            VectorField::new(format!("Y{}", j + 1), move |p| {
                let mut v = DVector::zeros(d);
                v[n + j] = 1.0;
                v[t] = 0.5 * p[j];
                v
            })
            .with_jacobian(move |_| {
                let mut m = DMatrix::zeros(d, d);
                m[(t, j)] = 0.5;
                m
            }),
        );
    }
    let vertical = vec![VectorField::new("T", move |_| {
        let mut v = DVector::zeros(d);
        v[t] = 1.0;
        v
    })
    .with_jacobian(move |_| DMatrix::zeros(d, d))];
    let generator = VectorField::new("dilation", move |p| {
        let mut v = DVector::from_column_slice(p);
        v[t] *= 2.0;
        v
    })
    .with_jacobian(move |_| {
        let mut m = DMatrix::identity(d, d);
        m[(t, t)] = 2.0;
        m
    });
    let flow = Arc::new(move |p: &[f64], lam: f64| {
        let mut v = DVector::from_column_slice(p) * lam.exp();
        v[t] = p[t] * (2.0 * lam).exp();
        v
    });
    // J X_j = -Y_j, J Y_j = X_j
    let mut jm = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        jm[(n + j, j)] = -1.0;
        jm[(j, n + j)] = 1.0;
    }
    ManifoldModel::new(format!("heisenberg-{n}"), d, horizontal, vertical, vec![0], Connection::Flat)?
        .with_dilation(Dilation { weights: vec![2.0], generator, flow: Some(flow) })
        .map(|m| m.with_complex_structure(jm))
}

/// Rototranslation group with coordinates `(x, y, θ)`.
pub fn builtin_rototranslation() -> ManifoldModel {
    let x1 = VectorField::new("X1", |p| DVector::from_vec(vec![p[2].cos(), p[2].sin(), 0.0]))
        .with_jacobian(|p| {
            let mut m = DMatrix::zeros(3, 3);
            m[(0, 2)] = -p[2].sin();
            m[(1, 2)] = p[2].cos();
            m
        });
    let x2 = VectorField::new("X2", |_| DVector::from_vec(vec![0.0, 0.0, 1.0]))
        .with_jacobian(|_| DMatrix::zeros(3, 3));
    let t = VectorField::new("T", |p| DVector::from_vec(vec![p[2].sin(), -p[2].cos(), 0.0]))
        .with_jacobian(|p| {
            let mut m = DMatrix::zeros(3, 3);
            m[(0, 2)] = p[2].cos();
            m[(1, 2)] = p[2].sin();
            m
        });
    ManifoldModel::new("rototranslation", 3, vec![x1, x2], vec![t], vec![0], Connection::Flat)
        .expect("static frame data is consistent")
}

/// Scalar directional derivative along a coordinate direction with a fourth-order stencil.
pub fn directional(f: impl Fn(&[f64]) -> f64, p: &[f64], dir: &DVector<f64>, h: f64) -> f64 {
    d1_4(
        |s| {
            let q: Vec<f64> = p.iter().zip(dir.iter()).map(|(x, v)| x + s * v).collect();
            f(&q)
        },
        h,
    )
}

/// Step for fourth-order stencils: about eps^(1/5) relative to the point scale.
pub fn stencil_step(p: &[f64]) -> f64 {
    let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    1e-3 * norm.max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_bracket_is_t() {
        let m = builtin_heisenberg(1).unwrap();
        let b = m.bracket(0, 1, &[0.3, -1.1, 2.0]).unwrap();
        assert!((b - DVector::from_vec(vec![0.0, 0.0, 1.0])).norm() < 1e-15);
        assert_eq!(m.homogeneous_dimension(), Some(4.0));
        assert_eq!(builtin_heisenberg(2).unwrap().homogeneous_dimension(), Some(6.0));
        assert!(builtin_heisenberg(0).is_err());
    }

    #[test]
    fn rototranslation_torsion_table() {
        let m = builtin_rototranslation();
        let p = [0.2, -0.5, 0.9];
        let g = m.geometry(&p).unwrap();
        let e = |i: usize| {
            let mut v = DVector::zeros(3);
            v[i] = 1.0;
            v
        };
        assert!((g.torsion_vec(&e(0), &e(1)) + e(2)).norm() < 1e-14);
        assert!(g.torsion_vec(&e(2), &e(0)).norm() < 1e-14);
        assert!((g.torsion_vec(&e(2), &e(1)) - e(0)).norm() < 1e-14);
        // [X1, X2] = T
        let b = m.bracket(0, 1, &p).unwrap();
        assert!((b - m.field(2).at(&p)).norm() < 1e-14);
    }

    #[test]
    fn canonical_connection_reduces_to_flat_on_heisenberg() {
        let h = builtin_heisenberg(2).unwrap();
        let can = ManifoldModel::new(
            "h2-canonical",
            5,
            h.horizontal().to_vec(),
            h.vertical().to_vec(),
            vec![0],
            Connection::Canonical,
        )
        .unwrap();
        let g = can.geometry(&[0.1, 0.2, -0.3, 0.4, 0.5]).unwrap();
        assert!(g.gamma.is_zero());
    }
}
