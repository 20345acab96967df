//! Horizontal second fundamental form, divergences, Ricci term and surface measures.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Result, SrmError};
use crate::linalg::householder_complement;
use crate::manifold::ManifoldModel;
use crate::quadrature::{try_weighted_sum, BoxRule, GaussLegendre};
use crate::surface::{param_data, surface_frame, tangent_derivative, Hypersurface, Locus, SurfaceFrame};

/// Threshold below which an imaginary part counts as zero when pairing eigenvalues.
pub const PAIRING_TOL: f64 = 1e-9;

/// How derivatives of `ν` are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeMethod {
    /// Analytic when the defining function has an exact Hessian, otherwise finite differences.
    Auto,
    Analytic,
    FiniteDifference,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CurvatureData {
    pub ii0: Vec<Vec<f64>>,
    pub h: f64,
    pub trace_ii0_sq: f64,
    /// `(re, im)`, sorted by real then imaginary part.
    pub eigenvalues: Vec<(f64, f64)>,
    pub div_nu: f64,
    pub div_sigma_nu: f64,
    /// `Σ_i ⟨Tor(ν, t_i), t_i⟩` over `TΣ`.
    pub torsion_trace: f64,
    pub ric_nu_nu: f64,
    pub n0_norm: f64,
    pub a: Vec<f64>,
}

/// Derivatives `(D_v ν, D_v a)` of the level-set extensions of `ν` and `a` along any
/// vector `v` (frame components) at `p`, from the Hessian of the defining function.
pub fn normal_derivative(m: &ManifoldModel, s: &Hypersurface, p: &[f64], v: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let g = m.geometry(p)?;
    let (h, d) = (m.dim_horizontal(), m.dim());
    let (_, grad, hess) = s.level(p).ok_or(SrmError::UnboundedDomain)?;
    let vc = g.to_coords(v);
    let mut dn = g.frame.transpose() * (&hess * &vc);
    for a in 0..d {
        dn[a] += (m.field(a).jacobian(p) * &vc).dot(&grad);
    }
    let n_raw = g.frame.transpose() * &grad;
    let g0 = n_raw.rows(0, h).into_owned();
    let n0 = g0.norm();
    if n0 < crate::surface::CHAR_THRESHOLD * n_raw.norm() {
        return Err(SrmError::CharacteristicPoint(n0 / n_raw.norm()));
    }
    let nu = &g0 / n0;
    let dg0 = dn.rows(0, h).into_owned();
    let radial = nu.dot(&dg0) / n0;
    let dnu_h = &dg0 / n0 - &nu * radial;
    let mut dnu = DVector::zeros(d);
    dnu.rows_mut(0, h).copy_from(&dnu_h);
    let da = DVector::from_fn(d - h, |b, _| dn[h + b] / n0 - n_raw[h + b] / n0 * radial);
    Ok((dnu, da))
}

fn use_analytic(s: &Hypersurface, method: DerivativeMethod) -> Result<bool> {
    match method {
        DerivativeMethod::Auto => Ok(s.has_analytic_hessian()),
        DerivativeMethod::Analytic if s.has_level_set() => Ok(true),
        DerivativeMethod::Analytic => Err(SrmError::InvalidInput("analytic derivatives need a defining function".into())),
        DerivativeMethod::FiniteDifference => Ok(false),
    }
}

/// `⟨∇_{e_i} ν, e_j⟩` in the basis of `frame`.
pub fn second_fundamental_form_at(
    m: &ManifoldModel,
    s: &Hypersurface,
    locus: &Locus,
    frame: &SurfaceFrame,
    method: DerivativeMethod,
) -> Result<DMatrix<f64>> {
    let nu = frame.nu()?;
    let g = m.geometry(&frame.p)?;
    let analytic = use_analytic(s, method)?;
    let k = frame.e.len();
    let mut out = DMatrix::zeros(k, k);
    for (i, ei) in frame.e.iter().enumerate() {
        let dnu = if analytic {
            normal_derivative(m, s, &frame.p, ei)?.0
        } else {
            tangent_derivative(m, s, locus, frame, ei, &|fr: &SurfaceFrame| Ok(fr.nu()?.clone()))?
        };
        let cov = dnu + g.gamma_apply(ei, nu);
        for (j, ej) in frame.e.iter().enumerate() {
            out[(i, j)] = cov.dot(ej);
        }
    }
    Ok(out)
}

pub fn second_fundamental_form(m: &ManifoldModel, s: &Hypersurface, locus: &Locus) -> Result<DMatrix<f64>> {
    let frame = surface_frame(m, s, locus)?;
    second_fundamental_form_at(m, s, locus, &frame, DerivativeMethod::Auto)
}

pub fn mean_curvature(m: &ManifoldModel, s: &Hypersurface, locus: &Locus) -> Result<f64> {
    Ok(second_fundamental_form(m, s, locus)?.trace())
}

/// Eigenvalues of a real square matrix as sorted `(re, im)` pairs.
pub fn sorted_eigenvalues(a: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let scale = a.abs().max().max(1.0);
    let mut ev: Vec<(f64, f64)> = a
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.re, if z.im.abs() < PAIRING_TOL * scale { 0.0 } else { z.im }))
        .collect();
    ev.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.partial_cmp(&y.1).unwrap()));
    ev
}

/// `Σ_β ⟨[ν, T_β], T_β⟩`, which is tensorial in `ν`.
pub fn bracket_correction(m: &ManifoldModel, frame: &SurfaceFrame) -> Result<f64> {
    let nu = frame.nu()?;
    let g = m.geometry(&frame.p)?;
    let (h, d) = (m.dim_horizontal(), m.dim());
    let mut acc = 0.0;
    for i in 0..h {
        for b in h..d {
            acc += nu[i] * g.structure(i, b, b);
        }
    }
    Ok(acc)
}

/// `Σ_i ⟨Tor(ν, t_i), t_i⟩` over an orthonormal basis of `TΣ`; equals `div_Σ ν − div ν`.
pub fn tangential_torsion_trace(m: &ManifoldModel, frame: &SurfaceFrame) -> Result<f64> {
    let nu = frame.nu()?;
    let g = m.geometry(&frame.p)?;
    let tangents = householder_complement(&frame.n);
    Ok(tangents
        .column_iter()
        .map(|t| {
            let t = t.into_owned();
            g.torsion_vec(nu, &t).dot(&t)
        })
        .sum())
}

/// `div ν = H − Σ_β ⟨[ν, T_β], T_β⟩`.
pub fn div_nu(m: &ManifoldModel, s: &Hypersurface, locus: &Locus) -> Result<f64> {
    let frame = surface_frame(m, s, locus)?;
    let ii = second_fundamental_form_at(m, s, locus, &frame, DerivativeMethod::Auto)?;
    Ok(ii.trace() - bracket_correction(m, &frame)?)
}

/// Surface divergence `ι*(L_Z ω) / ω` of a field given in frame components, computed from
/// the Riemannian metric in coordinates and tangential derivatives of `Z`.
pub fn div_sigma(
    m: &ManifoldModel,
    s: &Hypersurface,
    locus: &Locus,
    frame: &SurfaceFrame,
    z: &dyn Fn(&SurfaceFrame) -> Result<DVector<f64>>,
) -> Result<f64> {
    div_sigma_with(m, s, locus, frame, z, None)
}

type FrameDerivative<'a> = &'a dyn Fn(&DVector<f64>) -> Result<DVector<f64>>;

fn div_sigma_with(
    m: &ManifoldModel,
    s: &Hypersurface,
    locus: &Locus,
    frame: &SurfaceFrame,
    z: &dyn Fn(&SurfaceFrame) -> Result<DVector<f64>>,
    dz_frame: Option<FrameDerivative>,
) -> Result<f64> {
    let g = m.geometry(&frame.p)?;
    let d = m.dim();
    let tangents = householder_complement(&frame.n);
    let zf = z(frame)?;
    let zc = g.to_coords(&zf);
    let mut dframe = DMatrix::zeros(d, d);
    for a in 0..d {
        dframe.set_column(a, &(m.field(a).jacobian(&frame.p) * &zc));
    }
    let amat = &g.frame_inv * dframe;
    let zcoords = |fr: &SurfaceFrame| -> Result<DVector<f64>> { Ok(m.geometry(&fr.p)?.to_coords(&z(fr)?)) };
    let mut acc = 0.0;
    for k in 0..tangents.ncols() {
        let t = tangents.column(k).into_owned();
        let dz = match dz_frame {
            Some(dzf) => {
                let tc = g.to_coords(&t);
                let mut out = &g.frame * dzf(&t)?;
                for a in 0..d {
                    out += (m.field(a).jacobian(&frame.p) * &tc) * zf[a];
                }
                out
            }
            None => tangent_derivative(m, s, locus, frame, &t, &zcoords)?,
        };
        acc += t.dot(&(&g.frame_inv * dz)) - t.dot(&(&amat * &t));
    }
    Ok(acc)
}

/// `div_Σ ν`, with derivatives of `ν` taken from the Hessian of the defining function
/// when it is available.
pub fn div_sigma_nu_at(m: &ManifoldModel, s: &Hypersurface, locus: &Locus, frame: &SurfaceFrame) -> Result<f64> {
    let nu = |fr: &SurfaceFrame| Ok(fr.nu()?.clone());
    if s.has_analytic_hessian() {
        let p = frame.p.clone();
        let dnu = move |v: &DVector<f64>| Ok(normal_derivative(m, s, &p, v)?.0);
        div_sigma_with(m, s, locus, frame, &nu, Some(&dnu))
    } else {
        div_sigma_with(m, s, locus, frame, &nu, None)
    }
}

pub fn div_sigma_nu(m: &ManifoldModel, s: &Hypersurface, locus: &Locus) -> Result<f64> {
    let frame = surface_frame(m, s, locus)?;
    div_sigma_nu_at(m, s, locus, &frame)
}

/// `Σ_j ⟨R(e_j, ν)ν, e_j⟩` over the horizontal tangent frame.
pub fn ricci_nu_nu_at(m: &ManifoldModel, frame: &SurfaceFrame) -> Result<f64> {
    let nu = frame.nu()?;
    let d = m.dim();
    let r = m.curvature(&frame.p)?;
    if r.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for e in &frame.e {
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for f in 0..d {
                        let w = e[a] * nu[b] * nu[c] * e[f];
                        if w != 0.0 {
                            acc += w * r[((a * d + b) * d + c) * d + f];
                        }
                    }
                }
            }
        }
    }
    Ok(acc)
}

pub fn ricci_nu_nu(m: &ManifoldModel, s: &Hypersurface, locus: &Locus) -> Result<f64> {
    ricci_nu_nu_at(m, &surface_frame(m, s, locus)?)
}

pub fn curvature_data(m: &ManifoldModel, s: &Hypersurface, locus: &Locus) -> Result<CurvatureData> {
    let frame = surface_frame(m, s, locus)?;
    let ii = second_fundamental_form_at(m, s, locus, &frame, DerivativeMethod::Auto)?;
    let h = ii.trace();
    let div_nu = h - bracket_correction(m, &frame)?;
    let div_sigma_nu = div_sigma_nu_at(m, s, locus, &frame)?;
    Ok(CurvatureData {
        ii0: ii.row_iter().map(|r| r.iter().copied().collect()).collect(),
        h,
        trace_ii0_sq: (&ii * &ii).trace(),
        eigenvalues: sorted_eigenvalues(&ii),
        div_nu,
        div_sigma_nu,
        torsion_trace: tangential_torsion_trace(m, &frame)?,
        ric_nu_nu: ricci_nu_nu_at(m, &frame)?,
        n0_norm: frame.n0_norm,
        a: frame.a()?.iter().copied().collect(),
    })
}

/// Value of a quadrature together with the change from a half-resolution run.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct MeasureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub nodes: usize,
    pub rule: String,
}

/// Gauss–Legendre product rule with `order` nodes on each of `panels` panels per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct QuadSpec {
    pub order: usize,
    pub panels: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec { order: 10, panels: 4 }
    }
}

impl QuadSpec {
    pub fn refined(self) -> Self {
        QuadSpec { order: self.order, panels: 2 * self.panels }
    }
}

/// Pointwise densities with respect to parameter measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Densities {
    pub perimeter: f64,
    pub area: f64,
    /// `Υ = Q⁻¹ X ⌟ dV` pulled back.
    pub upsilon: f64,
}

pub fn densities(m: &ManifoldModel, s: &Hypersurface, xi: &[f64]) -> Result<Densities> {
    let pd = param_data(m, s, xi)?;
    let h = m.dim_horizontal();
    let n = &pd.n_raw * pd.sign;
    let upsilon = match (m.dilation(), m.homogeneous_dimension()) {
        (Some(dil), Some(q)) => {
            let g = m.geometry(&pd.p)?;
            g.to_frame(&dil.generator.at(&pd.p)).dot(&n) / q
        }
        _ => f64::NAN,
    };
    Ok(Densities { perimeter: n.rows(0, h).norm(), area: n.norm(), upsilon })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Measure {
    Perimeter,
    Area,
    Upsilon,
}

fn integrate_once(m: &ManifoldModel, s: &Hypersurface, spec: QuadSpec, which: Measure) -> Result<(f64, usize)> {
    let pick = |d: Densities| match which {
        Measure::Perimeter => d.perimeter,
        Measure::Area => d.area,
        Measure::Upsilon => d.upsilon,
    };
    if let Hypersurface::Profile(b) = s {
        // rotation invariance: one sphere point per θ node
        let sphere_ref: Vec<f64> = if b.n == 1 { vec![0.3] } else { vec![std::f64::consts::FRAC_PI_4, 0.3, 0.7] };
        let w = b.sphere_measure() / b.sphere_density(&sphere_ref);
        let rule = GaussLegendre::new(spec.order).composite(b.theta.0, b.theta.1, spec.panels);
        let pts: Vec<(Vec<f64>, f64)> = rule.nodes.iter().zip(&rule.weights).map(|(t, wt)| (vec![*t], *wt)).collect();
        let v = try_weighted_sum(&pts, |x| {
            let mut xi = vec![x[0]];
            xi.extend_from_slice(&sphere_ref);
            densities(m, s, &xi).map(pick)
        })?;
        return Ok((w * v, pts.len()));
    }
    let dom = s.domain().ok_or(SrmError::UnboundedDomain)?;
    let rule = BoxRule::uniform(&dom.bounds, spec.order, spec.panels);
    let pts = rule.points();
    let v = try_weighted_sum(&pts, |xi| densities(m, s, xi).map(pick))?;
    Ok((v, pts.len()))
}

fn measure(m: &ManifoldModel, s: &Hypersurface, spec: QuadSpec, which: Measure) -> Result<MeasureResult> {
    let (coarse, _) = integrate_once(m, s, spec, which)?;
    let fine_spec = spec.refined();
    let (value, nodes) = integrate_once(m, s, fine_spec, which)?;
    if !value.is_finite() {
        return Err(SrmError::Numerical("non-finite quadrature value".into()));
    }
    Ok(MeasureResult {
        value,
        error_estimate: (value - coarse).abs(),
        nodes,
        rule: format!("gauss-legendre order {} x {} panels", fine_spec.order, fine_spec.panels),
    })
}

/// `P₀(Σ) = ∫ |N₀| dV_Σ`.
pub fn perimeter(m: &ManifoldModel, s: &Hypersurface, spec: QuadSpec) -> Result<MeasureResult> {
    measure(m, s, spec, Measure::Perimeter)
}

pub fn riemannian_area(m: &ManifoldModel, s: &Hypersurface, spec: QuadSpec) -> Result<MeasureResult> {
    measure(m, s, spec, Measure::Area)
}

/// `∫_Σ Υ` with `Υ = Q⁻¹ X ⌟ dV`.
pub fn upsilon_integral(m: &ManifoldModel, s: &Hypersurface, spec: QuadSpec) -> Result<MeasureResult> {
    if m.dilation().is_none() {
        return Err(SrmError::NoDilation);
    }
    measure(m, s, spec, Measure::Upsilon)
}

/// Volume of the region bounded by a closed, outward-oriented `Σ`, via `∫_Σ Υ`.
pub fn enclosed_volume(m: &ManifoldModel, s: &Hypersurface, spec: QuadSpec) -> Result<MeasureResult> {
    let mut r = upsilon_integral(m, s, spec)?;
    if r.value < 0.0 {
        return Err(SrmError::InvalidInput("surface is inward oriented".into()));
    }
    r.rule.push_str(", divergence of the dilation generator");
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::field::ScalarField;
    use crate::manifold::builtin_heisenberg;

    #[test]
    fn vertical_plane_is_minimal() {
        let m = builtin_heisenberg(1).unwrap();
        let s = Hypersurface::level_set(ScalarField::from_expr(Expr::parse("x", &["x", "y", "t"]).unwrap(), 3));
        let loc = Locus::Ambient(vec![0.0, 0.4, -0.3]);
        let ii = second_fundamental_form(&m, &s, &loc).unwrap();
        assert_eq!(ii.shape(), (1, 1));
        assert!(ii[(0, 0)].abs() < 1e-14);
        assert!(div_sigma_nu(&m, &s, &loc).unwrap().abs() < 1e-9);
    }

    #[test]
    fn conjugate_pairs() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 1.0, -0.5, 0.0, 0.5, 1.0]);
        let ev = sorted_eigenvalues(&a);
        assert_eq!(ev.len(), 3);
        assert!((ev[0].0 - 1.0).abs() < 1e-14 && (ev[0].1 + 0.5).abs() < 1e-14);
        assert!((ev[1].1 - 0.5).abs() < 1e-14);
        assert_eq!(ev[2], (2.0, 0.0));
    }
}
