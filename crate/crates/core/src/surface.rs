//! Hypersurface representations and the pointwise horizontal frame.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bubble;
use crate::error::{Result, SrmError};
use crate::field::{d1_4_vec, PointFn, ScalarField};
use crate::manifold::{stencil_step, ManifoldModel, PointGeometry};

/// Default absolute threshold on `|N₀|` below which a point counts as characteristic.
pub const CHAR_THRESHOLD: f64 = 1e-8;

/// Axis-aligned parameter box. Faces of `closed` axes carry no boundary
/// (periodic or collapsed directions).
#[derive(Clone, Debug, PartialEq)]
pub struct ParamBox {
    pub bounds: Vec<(f64, f64)>,
    pub closed: Vec<bool>,
}

impl ParamBox {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        let n = bounds.len();
        ParamBox { bounds, closed: vec![false; n] }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, xi: &[f64]) -> bool {
        xi.iter().zip(&self.bounds).all(|(x, (a, b))| *x >= *a && *x <= *b)
    }
}

/// Defining function `Φ` with `Σ = {Φ = 0}`.
#[derive(Clone, Debug)]
pub struct LevelSet {
    pub phi: ScalarField,
    pub orientation: f64,
}

/// Graph `x_axis = f(other coordinates)` over a parameter box.
#[derive(Clone, Debug)]
pub struct GraphSurface {
    pub axis: usize,
    pub f: ScalarField,
    pub domain: ParamBox,
    pub orientation: f64,
}

impl GraphSurface {
    fn embed(&self, xi: &[f64]) -> Vec<f64> {
        let mut p = Vec::with_capacity(xi.len() + 1);
        p.extend_from_slice(&xi[..self.axis]);
        p.push(self.f.value(xi));
        p.extend_from_slice(&xi[self.axis..]);
        p
    }

    fn project(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .enumerate()
            .filter(|(i, _)| *i != self.axis)
            .map(|(_, v)| *v)
            .collect()
    }
}

/// Rotationally invariant bubble `t = ±φ(r)` in ℍⁿ, `n ∈ {1, 2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BubbleProfile {
    pub l: f64,
    pub n: usize,
    /// Range of the profile angle; `(0, π)` is the closed bubble.
    pub theta: (f64, f64),
}

impl BubbleProfile {
    pub fn new(l: f64, n: usize) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(SrmError::InvalidInput(format!("bubble radius must be positive, got {l}")));
        }
        if !(n == 1 || n == 2) {
            return Err(SrmError::InvalidInput("bubble profiles are provided for n = 1, 2".into()));
        }
        Ok(BubbleProfile { l, n, theta: (0.0, std::f64::consts::PI) })
    }

    /// The part of the bubble with profile angle in `[θ₀, θ₁]`.
    pub fn patch(l: f64, n: usize, theta0: f64, theta1: f64) -> Result<Self> {
        if !(0.0 <= theta0 && theta0 < theta1 && theta1 <= std::f64::consts::PI) {
            return Err(SrmError::InvalidInput(format!("bad profile angle range [{theta0}, {theta1}]")));
        }
        Ok(BubbleProfile { theta: (theta0, theta1), ..Self::new(l, n)? })
    }

    pub fn is_closed(&self) -> bool {
        self.theta == (0.0, std::f64::consts::PI)
    }

    /// Point with profile angle `θ ∈ [0, π]` and sphere coordinates.
    ///
    /// For `n = 2` the sphere coordinates are `(η, ξ₁, ξ₂)` with
    /// `z₁ = r cos η e^{iξ₁}`, `z₂ = r sin η e^{iξ₂}`; for `n = 1` a single angle.
    pub fn point(&self, theta: f64, sphere: &[f64]) -> Vec<f64> {
        let r = self.l * theta.sin();
        let t = bubble::height(self.l, theta);
        match self.n {
            1 => vec![r * sphere[0].cos(), r * sphere[0].sin(), t],
            _ => {
                let (eta, a, b) = (sphere[0], sphere[1], sphere[2]);
                vec![
                    r * eta.cos() * a.cos(),
                    r * eta.sin() * b.cos(),
                    r * eta.cos() * a.sin(),
                    r * eta.sin() * b.sin(),
                    t,
                ]
            }
        }
    }

    /// Parameter box of the `θ`-chart.
    pub fn domain(&self) -> ParamBox {
        use std::f64::consts::PI;
        match self.n {
            1 => ParamBox { bounds: vec![self.theta, (0.0, 2.0 * PI)], closed: vec![false, true] },
            _ => ParamBox {
                bounds: vec![self.theta, (0.0, PI / 2.0), (0.0, 2.0 * PI), (0.0, 2.0 * PI)],
                closed: vec![false, true, true, true],
            },
        }
    }

    /// Measure of the unit sphere `S^{2n-1}`.
    /// Fixed point of the sphere factor used by rotationally reduced computations.
    pub fn sphere_reference(&self) -> Vec<f64> {
        if self.n == 1 {
            vec![0.3]
        } else {
            vec![std::f64::consts::FRAC_PI_4, 0.3, 0.7]
        }
    }

    pub fn sphere_measure(&self) -> f64 {
        use std::f64::consts::PI;
        match self.n {
            1 => 2.0 * PI,
            _ => 2.0 * PI * PI,
        }
    }

    /// Density of the sphere measure in the chosen angular coordinates.
    pub fn sphere_density(&self, sphere: &[f64]) -> f64 {
        match self.n {
            1 => 1.0,
            _ => sphere[0].sin() * sphere[0].cos(),
        }
    }

    fn radius(&self, p: &[f64]) -> f64 {
        p[..2 * self.n].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Radial defining function: `(Φ, Φ_r, Φ_t, Φ_rr, Φ_rt, Φ_tt)` at `(r, t)`.
    fn radial(&self, r: f64, t: f64) -> [f64; 6] {
        let l = self.l;
        if r < 0.9 * l {
            let s = if t >= 0.0 { 1.0 } else { -1.0 };
            [
                s * t - bubble::phi(l, r),
                -bubble::dphi(l, r),
                s,
                -bubble::d2phi(l, r),
                0.0,
                0.0,
            ]
        } else {
            let th = bubble::theta_of_height(l, t);
            let (s, c) = th.sin_cos();
            [
                r - l * s,
                1.0,
                2.0 * c / (l * s * s),
                0.0,
                0.0,
                4.0 * (1.0 + c * c) / (l * l * l * s.powi(5)),
            ]
        }
    }

    fn level(&self, p: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let m = 2 * self.n;
        let d = m + 1;
        let r = self.radius(p);
        let [v, fr, ft, frr, frt, ftt] = self.radial(r, p[m]);
        let mut g = DVector::zeros(d);
        let mut h = DMatrix::zeros(d, d);
        g[m] = ft;
        h[(m, m)] = ftt;
        if r > 0.0 {
            for i in 0..m {
                let ui = p[i] / r;
                g[i] = fr * ui;
                h[(i, m)] = frt * ui;
                h[(m, i)] = frt * ui;
                for j in 0..m {
                    let uj = p[j] / r;
                    let delta = if i == j { 1.0 } else { 0.0 };
                    h[(i, j)] = frr * ui * uj + fr * (delta - ui * uj) / r;
                }
            }
        } else {
            for i in 0..m {
                h[(i, i)] = frr;
            }
        }
        (v, g, h)
    }
}

/// Parametrized immersion `F: Ξ → M`.
#[derive(Clone)]
pub struct Immersion {
    pub map: PointFn<DVector<f64>>,
    pub jacobian: Option<PointFn<DMatrix<f64>>>,
    pub domain: ParamBox,
    pub orientation: f64,
}

impl std::fmt::Debug for Immersion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Immersion").field("domain", &self.domain).finish()
    }
}

/// A hypersurface in one of the supported representations.
#[derive(Clone, Debug)]
pub enum Hypersurface {
    LevelSet(LevelSet),
    Graph(GraphSurface),
    Profile(BubbleProfile),
    Immersion(Immersion),
}

/// Where on the surface a quantity is evaluated.
#[derive(Clone, Debug, PartialEq)]
pub enum Locus {
    Ambient(Vec<f64>),
    Param(Vec<f64>),
}

impl Hypersurface {
    pub fn level_set(phi: ScalarField) -> Self {
        Hypersurface::LevelSet(LevelSet { phi, orientation: 1.0 })
    }

    pub fn graph(axis: usize, f: ScalarField, domain: Vec<(f64, f64)>) -> Self {
        Hypersurface::Graph(GraphSurface { axis, f, domain: ParamBox::new(domain), orientation: 1.0 })
    }

    pub fn bubble(l: f64, n: usize) -> Result<Self> {
        Ok(Hypersurface::Profile(BubbleProfile::new(l, n)?))
    }

    pub fn bubble_patch(l: f64, n: usize, theta0: f64, theta1: f64) -> Result<Self> {
        Ok(Hypersurface::Profile(BubbleProfile::patch(l, n, theta0, theta1)?))
    }

    pub fn immersion(
        map: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
        domain: ParamBox,
    ) -> Self {
        Hypersurface::Immersion(Immersion { map: Arc::new(map), jacobian: None, domain, orientation: 1.0 })
    }

    /// Reverses the orientation.
    pub fn flipped(mut self) -> Self {
        match &mut self {
            Hypersurface::LevelSet(l) => l.orientation = -l.orientation,
            Hypersurface::Graph(g) => g.orientation = -g.orientation,
            Hypersurface::Immersion(i) => i.orientation = -i.orientation,
            Hypersurface::Profile(_) => {}
        }
        self
    }

    /// Whether [`Hypersurface::level`] returns an exact Hessian.
    pub fn has_analytic_hessian(&self) -> bool {
        match self {
            Hypersurface::LevelSet(l) => l.phi.has_hessian(),
            Hypersurface::Graph(g) => g.f.has_hessian(),
            Hypersurface::Profile(_) => true,
            Hypersurface::Immersion(_) => false,
        }
    }

    pub fn has_level_set(&self) -> bool {
        !matches!(self, Hypersurface::Immersion(_))
    }

    /// Oriented defining function, its coordinate gradient and Hessian.
    pub fn level(&self, p: &[f64]) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        match self {
            Hypersurface::LevelSet(l) => {
                let o = l.orientation;
                Some((o * l.phi.value(p), l.phi.gradient(p) * o, l.phi.hessian(p) * o))
            }
            Hypersurface::Graph(g) => {
                let xi = g.project(p);
                let o = g.orientation;
                let d = p.len();
                let gf = g.f.gradient(&xi);
                let hf = g.f.hessian(&xi);
                let mut grad = DVector::zeros(d);
                let mut hess = DMatrix::zeros(d, d);
                let map = |k: usize| if k < g.axis { k } else { k + 1 };
                grad[g.axis] = o;
                for i in 0..xi.len() {
                    grad[map(i)] = -o * gf[i];
                    for j in 0..xi.len() {
                        hess[(map(i), map(j))] = -o * hf[(i, j)];
                    }
                }
                Some((o * (p[g.axis] - g.f.value(&xi)), grad, hess))
            }
            Hypersurface::Profile(b) => Some(b.level(p)),
            Hypersurface::Immersion(_) => None,
        }
    }

    pub fn domain(&self) -> Option<ParamBox> {
        match self {
            Hypersurface::Graph(g) => Some(g.domain.clone()),
            Hypersurface::Profile(b) => Some(b.domain()),
            Hypersurface::Immersion(i) => Some(i.domain.clone()),
            Hypersurface::LevelSet(_) => None,
        }
    }

    /// `F(ξ)`.
    pub fn param_point(&self, xi: &[f64]) -> Result<Vec<f64>> {
        match self {
            Hypersurface::Graph(g) => Ok(g.embed(xi)),
            Hypersurface::Profile(b) => Ok(b.point(xi[0], &xi[1..])),
            Hypersurface::Immersion(i) => Ok((i.map)(xi).iter().copied().collect()),
            Hypersurface::LevelSet(_) => Err(SrmError::UnboundedDomain),
        }
    }

    /// `DF(ξ)` as a `dim × m` coordinate matrix.
    pub fn param_jacobian(&self, xi: &[f64]) -> Result<DMatrix<f64>> {
        match self {
            Hypersurface::Graph(g) => {
                let m = xi.len();
                let gf = g.f.gradient(xi);
                let mut j = DMatrix::zeros(m + 1, m);
                for k in 0..m {
                    let row = if k < g.axis { k } else { k + 1 };
                    j[(row, k)] = 1.0;
                    j[(g.axis, k)] = gf[k];
                }
                Ok(j)
            }
            Hypersurface::Immersion(i) if i.jacobian.is_some() => Ok((i.jacobian.as_ref().unwrap())(xi)),
            _ => {
                let f = |x: &[f64]| DVector::from_vec(self.param_point(x).unwrap_or_default());
                Ok(fd_jacobian_4(&f, xi))
            }
        }
    }

    /// Sign relating the parameter orientation to the chosen normal.
    fn param_orientation(&self) -> f64 {
        match self {
            Hypersurface::Immersion(i) => i.orientation,
            _ => 1.0,
        }
    }

    /// `|Φ| / |∇Φ|` at `p`.
    pub fn defect(&self, p: &[f64]) -> Option<f64> {
        self.level(p).map(|(v, g, _)| v.abs() / g.norm().max(f64::MIN_POSITIVE))
    }

    /// Lifts a locus to an ambient point.
    pub fn locate(&self, locus: &Locus) -> Result<Vec<f64>> {
        match locus {
            Locus::Ambient(p) => Ok(p.clone()),
            Locus::Param(xi) => self.param_point(xi),
        }
    }
}

/// Fourth-order finite-difference Jacobian.
pub fn fd_jacobian_4(f: &dyn Fn(&[f64]) -> DVector<f64>, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let h = stencil_step(x);
    let f0 = f(x);
    let mut j = DMatrix::zeros(f0.len(), n);
    for k in 0..n {
        let col = d1_4_vec(
            |s| {
                let mut q = x.to_vec();
                q[k] += s;
                f(&q)
            },
            h,
        );
        j.set_column(k, &col);
    }
    j
}

/// How the horizontal tangent frame is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FramePolicy {
    /// Gram–Schmidt, dropping the horizontal field most aligned with `ν`.
    Auto,
    /// Gram–Schmidt with a fixed dropped index.
    Frozen(usize),
}

/// Per-point package of normals and the horizontal tangent frame.
///
/// All vectors are frame components: horizontal block, then vertical block.
#[derive(Clone, Debug)]
pub struct SurfaceFrame {
    pub p: Vec<f64>,
    /// Unit Riemannian normal.
    pub n: DVector<f64>,
    pub n0_norm: f64,
    pub nu: Option<DVector<f64>>,
    /// Vertical coefficients with `N ∝ ν + Σ a_β T_β`.
    pub a: Option<DVector<f64>>,
    pub e: Vec<DVector<f64>>,
    pub nu_top: Option<DVector<f64>>,
    pub dropped: Option<usize>,
}

impl SurfaceFrame {
    pub fn is_characteristic(&self) -> bool {
        self.nu.is_none()
    }

    pub fn nu(&self) -> Result<&DVector<f64>> {
        self.nu.as_ref().ok_or(SrmError::CharacteristicPoint(self.n0_norm))
    }

    pub fn a(&self) -> Result<&DVector<f64>> {
        self.a.as_ref().ok_or(SrmError::CharacteristicPoint(self.n0_norm))
    }

    /// `N_v = Σ a_β T_β` in frame components.
    pub fn n_v(&self, h: usize) -> Result<DVector<f64>> {
        let a = self.a()?;
        let mut out = DVector::zeros(self.n.len());
        for (b, v) in a.iter().enumerate() {
            out[h + b] = *v;
        }
        Ok(out)
    }
}

/// Builds the frame from a (not necessarily unit) normal given in frame components.
pub fn frame_from_normal(
    m: &ManifoldModel,
    s: &Hypersurface,
    p: &[f64],
    n_raw: &DVector<f64>,
    policy: FramePolicy,
) -> Result<SurfaceFrame> {
    let h = m.dim_horizontal();
    let d = m.dim();
    let norm = n_raw.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(SrmError::DegenerateSurface(norm));
    }
    let n = n_raw / norm;
    let n0 = n.rows(0, h).norm();
    if n0 < CHAR_THRESHOLD {
        return Ok(SurfaceFrame {
            p: p.to_vec(),
            n,
            n0_norm: n0,
            nu: None,
            a: None,
            e: Vec::new(),
            nu_top: None,
            dropped: None,
        });
    }
    let mut nu = DVector::zeros(d);
    nu.rows_mut(0, h).copy_from(&(n.rows(0, h) / n0));
    let a = DVector::from_iterator(d - h, n.rows(h, d - h).iter().map(|v| v / n0));
    let nu_top = &nu - &n * n0;
    let (e, dropped) = match explicit_frame(m, s, p, &nu) {
        Some(e) => (e, None),
        None => {
            let drop = match policy {
                FramePolicy::Frozen(k) => k,
                FramePolicy::Auto => (0..h)
                    .max_by(|x, y| nu[*x].abs().partial_cmp(&nu[*y].abs()).unwrap())
                    .unwrap_or(0),
            };
            (gram_schmidt_tangent(&nu, h, d, drop)?, Some(drop))
        }
    };
    Ok(SurfaceFrame { p: p.to_vec(), n, n0_norm: n0, nu: Some(nu), a: Some(a), e, nu_top: Some(nu_top), dropped })
}

fn gram_schmidt_tangent(nu: &DVector<f64>, h: usize, d: usize, drop: usize) -> Result<Vec<DVector<f64>>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(h - 1);
    for i in (0..h).filter(|i| *i != drop) {
        let mut w = DVector::zeros(d);
        w[i] = 1.0;
        w -= nu * nu[i];
        for q in &out {
            let c = q.dot(&w);
            w -= q * c;
        }
        let len = w.norm();
        if len < 1e-12 {
            return Err(SrmError::DegenerateFrame(len));
        }
        out.push(w / len);
    }
    Ok(out)
}

/// Explicit rotational frame `(Jν, e, Je)` on bubbles in ℍ², `(Jν)` in ℍ¹.
fn explicit_frame(m: &ManifoldModel, s: &Hypersurface, p: &[f64], nu: &DVector<f64>) -> Option<Vec<DVector<f64>>> {
    let b = match s {
        Hypersurface::Profile(b) => b,
        _ => return None,
    };
    let j = m.complex_structure()?;
    let h = m.dim_horizontal();
    if h != 2 * b.n {
        return None;
    }
    let d = m.dim();
    let mut jnu = DVector::zeros(d);
    jnu.rows_mut(0, h).copy_from(&(j * nu.rows(0, h)));
    if b.n == 1 {
        return Some(vec![jnu]);
    }
    let r = b.radius(p);
    if r <= 0.0 {
        return None;
    }
    let (x1, x2, y1, y2) = (p[0], p[1], p[2], p[3]);
    let e = DVector::from_vec(vec![x2 / r, -x1 / r, -y2 / r, y1 / r, 0.0]);
    let mut je = DVector::zeros(d);
    je.rows_mut(0, h).copy_from(&(j * e.rows(0, h)));
    Some(vec![jnu, e, je])
}

/// Normal in frame components from the level set at `p` (no on-surface check).
pub fn level_normal(g: &PointGeometry, grad: &DVector<f64>) -> DVector<f64> {
    g.frame.transpose() * grad
}

/// Generalized cross product of tangent vectors: `det[v, t_1..t_m] = ⟨v, N⟩`.
pub fn cross_normal(tangents: &[DVector<f64>]) -> DVector<f64> {
    let d = tangents.len() + 1;
    let mut mtx = DMatrix::zeros(d, d);
    for (k, t) in tangents.iter().enumerate() {
        mtx.set_column(k + 1, t);
    }
    DVector::from_fn(d, |a, _| {
        let mut m2 = mtx.clone();
        let mut ea = DVector::zeros(d);
        ea[a] = 1.0;
        m2.set_column(0, &ea);
        m2.determinant()
    })
}

/// Frame at an ambient point of a level-set surface, skipping the on-surface test.
pub fn frame_extension(m: &ManifoldModel, s: &Hypersurface, p: &[f64], policy: FramePolicy) -> Result<SurfaceFrame> {
    let g = m.geometry(p)?;
    let (_, grad, _) = s.level(p).ok_or(SrmError::UnboundedDomain)?;
    frame_from_normal(m, s, p, &level_normal(&g, &grad), policy)
}

/// Parametric data at `ξ`: frame-component tangents, cross normal and the sign that
/// aligns the parametrization with the surface orientation.
pub struct ParamData {
    pub p: Vec<f64>,
    pub jac: DMatrix<f64>,
    pub tangents: Vec<DVector<f64>>,
    pub n_raw: DVector<f64>,
    pub sign: f64,
}

pub fn param_data(m: &ManifoldModel, s: &Hypersurface, xi: &[f64]) -> Result<ParamData> {
    let p = s.param_point(xi)?;
    let g = m.geometry(&p)?;
    let jac = s.param_jacobian(xi)?;
    let tangents: Vec<DVector<f64>> = (0..jac.ncols()).map(|k| g.to_frame(&jac.column(k).into_owned())).collect();
    let n_raw = cross_normal(&tangents);
    let sign = match s.level(&p) {
        Some((_, grad, _)) => {
            let dot = level_normal(&g, &grad).dot(&n_raw);
            if dot < 0.0 {
                -1.0
            } else {
                1.0
            }
        }
        None => s.param_orientation(),
    };
    Ok(ParamData { p, jac, tangents, n_raw, sign })
}

/// Frame at a locus.
pub fn surface_frame(m: &ManifoldModel, s: &Hypersurface, locus: &Locus) -> Result<SurfaceFrame> {
    surface_frame_with(m, s, locus, FramePolicy::Auto)
}

pub fn surface_frame_with(m: &ManifoldModel, s: &Hypersurface, locus: &Locus, policy: FramePolicy) -> Result<SurfaceFrame> {
    match locus {
        Locus::Ambient(p) => {
            m.check_point(p)?;
            let defect = s.defect(p).ok_or(SrmError::UnboundedDomain)?;
            let scale = p.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
            if defect > 1e-7 * scale {
                return Err(SrmError::NotOnSurface(defect));
            }
            frame_extension(m, s, p, policy)
        }
        Locus::Param(xi) => {
            let p = s.param_point(xi)?;
            m.check_point(&p)?;
            if s.has_level_set() {
                frame_extension(m, s, &p, policy)
            } else {
                let pd = param_data(m, s, xi)?;
                frame_from_normal(m, s, &p, &(&pd.n_raw * pd.sign), policy)
            }
        }
    }
}

/// `|N₀|(p) < threshold`.
pub fn is_characteristic(m: &ManifoldModel, s: &Hypersurface, locus: &Locus, threshold: f64) -> Result<bool> {
    Ok(surface_frame(m, s, locus)?.n0_norm < threshold)
}

/// Derivative of a frame-derived vector quantity along a tangent vector `v` (frame components).
///
/// Level-set surfaces differentiate the natural extension along the ambient straight
/// line; parametrized surfaces differentiate through the chart.
pub fn tangent_derivative(
    m: &ManifoldModel,
    s: &Hypersurface,
    locus: &Locus,
    frame: &SurfaceFrame,
    v: &DVector<f64>,
    f: &dyn Fn(&SurfaceFrame) -> Result<DVector<f64>>,
) -> Result<DVector<f64>> {
    let policy = frame.dropped.map(FramePolicy::Frozen).unwrap_or(FramePolicy::Auto);
    let g = m.geometry(&frame.p)?;
    let vc = g.to_coords(v);
    match locus {
        Locus::Param(xi) if !s.has_level_set() => {
            let jac = s.param_jacobian(xi)?;
            let c = jac
                .clone()
                .svd(true, true)
                .solve(&vc, 1e-14)
                .map_err(|e| SrmError::Numerical(e.to_string()))?;
            let h = stencil_step(xi);
            let eval = |t: f64| -> Result<DVector<f64>> {
                let q: Vec<f64> = xi.iter().zip(c.iter()).map(|(x, ci)| x + t * ci).collect();
                f(&surface_frame_with(m, s, &Locus::Param(q), policy)?)
            };
            let vals = [eval(-2.0 * h)?, eval(-h)?, eval(h)?, eval(2.0 * h)?];
            Ok((&vals[0] - &vals[1] * 8.0 + &vals[2] * 8.0 - &vals[3]) / (12.0 * h))
        }
        _ => {
            let p = &frame.p;
            let h = stencil_step(p) * 0.2;
            let eval = |t: f64| -> Result<DVector<f64>> {
                let q: Vec<f64> = p.iter().zip(vc.iter()).map(|(x, ci)| x + t * ci).collect();
                f(&frame_extension(m, s, &q, policy)?)
            };
            let vals = [eval(-2.0 * h)?, eval(-h)?, eval(h)?, eval(2.0 * h)?];
            Ok((&vals[0] - &vals[1] * 8.0 + &vals[2] * 8.0 - &vals[3]) / (12.0 * h))
        }
    }
}

/// Scalar version of [`tangent_derivative`].
pub fn tangent_derivative_scalar(
    m: &ManifoldModel,
    s: &Hypersurface,
    locus: &Locus,
    frame: &SurfaceFrame,
    v: &DVector<f64>,
    f: &dyn Fn(&SurfaceFrame) -> Result<f64>,
) -> Result<f64> {
    let wrapped = |fr: &SurfaceFrame| -> Result<DVector<f64>> { Ok(DVector::from_element(1, f(fr)?)) };
    Ok(tangent_derivative(m, s, locus, frame, v, &wrapped)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::manifold::builtin_heisenberg;

    #[test]
    fn vertical_plane_frame() {
        let m = builtin_heisenberg(1).unwrap();
        let s = Hypersurface::level_set(ScalarField::from_expr(Expr::parse_indexed("x1", "x", 3).unwrap(), 3));
        let f = surface_frame(&m, &s, &Locus::Ambient(vec![0.0, 0.7, -2.0])).unwrap();
        assert!((f.n0_norm - 1.0).abs() < 1e-14);
        assert!((f.nu().unwrap()[0] - 1.0).abs() < 1e-14);
        assert!(f.a().unwrap()[0].abs() < 1e-14);
        assert!(matches!(
            surface_frame(&m, &s, &Locus::Ambient(vec![0.5, 0.0, 0.0])),
            Err(SrmError::NotOnSurface(_))
        ));
    }

    #[test]
    fn cross_normal_is_orthogonal() {
        let t = vec![DVector::from_vec(vec![1.0, 2.0, 0.5]), DVector::from_vec(vec![0.0, -1.0, 3.0])];
        let n = cross_normal(&t);
        assert!(n.dot(&t[0]).abs() < 1e-14 && n.dot(&t[1]).abs() < 1e-14);
    }
}
