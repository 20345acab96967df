//! First and second variation of horizontal perimeter and stability spectra.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::bubble::{self, bubble_stability, BubbleStabilityOptions};
use crate::error::{Result, SrmError};
use crate::field::d1_4;
use crate::geom::{
    bracket_correction, div_sigma, normal_derivative, perimeter, ricci_nu_nu_at, second_fundamental_form_at,
    upsilon_integral, DerivativeMethod, QuadSpec,
};
use crate::linalg::generalized_symmetric_eigen;
use crate::manifold::ManifoldModel;
use crate::quadrature::{BoxRule, GaussLegendre};
use crate::surface::{
    cross_normal, fd_jacobian_4, param_data, surface_frame, tangent_derivative, tangent_derivative_scalar, Hypersurface,
    Locus, ParamBox, SurfaceFrame, CHAR_THRESHOLD,
};

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

/// Spectrum of one block of a stability problem. Eigenvalues are normalized.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ModeSpectrum {
    pub mode: String,
    pub bidegree: Option<(usize, usize)>,
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    pub coarse_min_eigenvalue: Option<f64>,
    pub change: Option<f64>,
    pub constraint_residual: Option<f64>,
    pub angular_coefficient: Option<f64>,
    pub null_correlation: Option<f64>,
    /// `(abscissa, value)` samples of the lowest eigenvector.
    pub eigenvector_sample: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct StabilityReport {
    pub modes: Vec<ModeSpectrum>,
    pub verdict: Verdict,
    pub resolution: usize,
    pub tolerance: f64,
    pub normalization: String,
    pub notes: Vec<String>,
}

/// Where the support of a variation lies relative to the characteristic set.
#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Support {
    AwayFromCharacteristic,
    OverCharacteristic,
}

pub type AmbientFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A variation function on `Σ`, given either as `ρ` or as `ρ₀ = ρ / |N₀|`, as a function
/// of the ambient point.
#[derive(Clone)]
pub struct VariationField {
    f: AmbientFn,
    horizontal: bool,
    pub support: Support,
    /// Parameter box containing the support; the whole domain when absent.
    pub region: Option<ParamBox>,
    /// The variation is invariant under the rotations of a bubble profile.
    pub rotational: bool,
}

impl std::fmt::Debug for VariationField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VariationField")
            .field("horizontal", &self.horizontal)
            .field("support", &self.support)
            .field("region", &self.region)
            .field("rotational", &self.rotational)
            .finish()
    }
}

impl VariationField {
    /// From the horizontal variation function `ρ₀`.
    pub fn from_rho0(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        VariationField {
            f: Arc::new(f),
            horizontal: true,
            support: Support::AwayFromCharacteristic,
            region: None,
            rotational: false,
        }
    }

    /// From the Riemannian variation function `ρ`.
    pub fn from_rho(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        VariationField { horizontal: false, ..Self::from_rho0(f) }
    }

    pub fn zero() -> Self {
        Self::from_rho0(|_| 0.0)
    }

    pub fn with_region(mut self, region: ParamBox) -> Self {
        self.region = Some(region);
        self
    }

    pub fn over_characteristic(mut self) -> Self {
        self.support = Support::OverCharacteristic;
        self
    }

    pub fn rotational(mut self) -> Self {
        self.rotational = true;
        self
    }

    pub fn is_horizontal(&self) -> bool {
        self.horizontal
    }

    /// Raw value of the defining function at an ambient point.
    pub fn raw(&self, p: &[f64]) -> f64 {
        (self.f)(p)
    }

    pub fn rho0_at(&self, frame: &SurfaceFrame) -> Result<f64> {
        if self.horizontal {
            Ok((self.f)(&frame.p))
        } else if frame.is_characteristic() {
            Err(SrmError::CharacteristicPoint(frame.n0_norm))
        } else {
            Ok((self.f)(&frame.p) / frame.n0_norm)
        }
    }

    pub fn rho_at(&self, frame: &SurfaceFrame) -> Result<f64> {
        Ok(self.rho_from(&frame.p, frame.n0_norm))
    }

    fn rho_from(&self, p: &[f64], n0: f64) -> f64 {
        if self.horizontal {
            n0 * (self.f)(p)
        } else {
            (self.f)(p)
        }
    }
}

/// Faces of the parameter domain that are boundary of `Σ`, as `(axis, upper)`.
pub fn boundary_faces(s: &Hypersurface) -> Vec<(usize, bool)> {
    let Some(dom) = s.domain() else { return Vec::new() };
    let mut out = Vec::new();
    for (k, (lo, hi)) in dom.bounds.iter().enumerate() {
        if dom.closed[k] {
            continue;
        }
        for (upper, v) in [(false, *lo), (true, *hi)] {
            if let Hypersurface::Profile(_) = s {
                if v == 0.0 || v == std::f64::consts::PI {
                    continue;
                }
            }
            out.push((k, upper));
        }
    }
    out
}

fn region_of(s: &Hypersurface, v: &VariationField) -> Result<ParamBox> {
    let dom = s.domain().ok_or(SrmError::UnboundedDomain)?;
    match &v.region {
        None => Ok(dom),
        Some(r) => {
            if r.dim() != dom.dim() {
                return Err(SrmError::BadSupport("support box has the wrong dimension".into()));
            }
            let inside = r.bounds.iter().zip(&dom.bounds).all(|((a, b), (lo, hi))| a >= lo && b <= hi && a < b);
            if !inside {
                return Err(SrmError::BadSupport("support box leaves the parameter domain".into()));
            }
            Ok(ParamBox { bounds: r.bounds.clone(), closed: dom.closed.clone() })
        }
    }
}

/// Rejects variations that do not vanish on `∂Σ` inside their support box.
fn check_support(s: &Hypersurface, v: &VariationField, region: &ParamBox) -> Result<()> {
    let dom = s.domain().ok_or(SrmError::UnboundedDomain)?;
    let m = dom.dim();
    let samples = 5usize;
    for (k, upper) in boundary_faces(s) {
        let face = if upper { dom.bounds[k].1 } else { dom.bounds[k].0 };
        let on_face = if upper { region.bounds[k].1 } else { region.bounds[k].0 };
        if (face - on_face).abs() > 1e-12 * face.abs().max(1.0) {
            continue;
        }
        let total = samples.pow((m - 1) as u32);
        for idx in 0..total {
            let mut rem = idx;
            let mut xi = vec![0.0; m];
            for (ax, x) in xi.iter_mut().enumerate() {
                if ax == k {
                    *x = face;
                    continue;
                }
                let (a, b) = region.bounds[ax];
                *x = a + (b - a) * (rem % samples) as f64 / (samples - 1) as f64;
                rem /= samples;
            }
            let p = s.param_point(&xi)?;
            if v.raw(&p).abs() > 1e-12 {
                return Err(SrmError::BadSupport(format!("variation does not vanish on the boundary face {k}")));
            }
        }
    }
    Ok(())
}

/// Reference point on the sphere factor of a bubble chart.
/// Quadrature nodes `(ξ, weight)` over `region`, reduced to the profile angle for
/// rotational variations of a bubble.
fn nodes(s: &Hypersurface, region: &ParamBox, rotational: bool, spec: QuadSpec) -> Vec<(Vec<f64>, f64)> {
    if let (Hypersurface::Profile(b), true) = (s, rotational) {
        let reference = b.sphere_reference();
        let w = b.sphere_measure() / b.sphere_density(&reference);
        let (t0, t1) = region.bounds[0];
        let rule = GaussLegendre::new(spec.order).composite(t0, t1, spec.panels);
        return rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(t, wt)| {
                let mut xi = vec![*t];
                xi.extend_from_slice(&reference);
                (xi, wt * w)
            })
            .collect();
    }
    BoxRule::uniform(&region.bounds, spec.order, spec.panels).points()
}

fn ordered_sum<const K: usize>(parts: Vec<Result<[f64; K]>>) -> Result<[f64; K]> {
    let mut acc = [0.0; K];
    for p in parts {
        let p = p?;
        for k in 0..K {
            acc[k] += p[k];
        }
    }
    Ok(acc)
}

/// Both forms of the first variation of `P₀`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct FirstVariation {
    /// `∫ [ρ div ν − div_Σ(ρ ν^⊤)] dV_Σ` over the noncharacteristic part.
    pub value: f64,
    /// `∫ ρ₀ (H − Σ_β ⟨[ν,T_β],T_β⟩) Λ`; only for supports away from the characteristic set.
    pub horizontal_form: Option<f64>,
    /// `∫ div_Σ(ρ ν^⊤) dV_Σ`.
    pub divergence_term: f64,
    /// `∫ ρ₀ Λ`, the rate of change of enclosed volume.
    pub volume_rate: f64,
    pub cross_check: Option<f64>,
    pub nodes: usize,
}

pub fn first_variation(m: &ManifoldModel, s: &Hypersurface, v: &VariationField, spec: QuadSpec) -> Result<FirstVariation> {
    let region = region_of(s, v)?;
    check_support(s, v, &region)?;
    let pts = nodes(s, &region, v.rotational, spec);
    let away = v.support == Support::AwayFromCharacteristic;
    let parts: Vec<Result<[f64; 4]>> = pts
        .par_iter()
        .map(|(xi, w)| {
            let pd = param_data(m, s, xi)?;
            let area = pd.n_raw.norm();
            let locus = Locus::Param(xi.clone());
            let fr = surface_frame(m, s, &locus)?;
            if fr.is_characteristic() {
                if away && v.raw(&fr.p) != 0.0 {
                    return Err(SrmError::BadSupport("support meets the characteristic set".into()));
                }
                return Ok([0.0; 4]);
            }
            let ii = second_fundamental_form_at(m, s, &locus, &fr, DerivativeMethod::Auto)?;
            let divnu = ii.trace() - bracket_correction(m, &fr)?;
            let rho = v.rho_at(&fr)?;
            let rho0 = v.rho0_at(&fr)?;
            let lam = fr.n0_norm * area;
            let z = |f: &SurfaceFrame| -> Result<DVector<f64>> {
                let top = f.nu_top.as_ref().ok_or(SrmError::CharacteristicPoint(f.n0_norm))?;
                Ok(top * v.rho_at(f)?)
            };
            let dz = div_sigma(m, s, &locus, &fr, &z)?;
            Ok([w * rho * divnu * area, w * dz * area, w * rho0 * divnu * lam, w * rho0 * lam])
        })
        .collect();
    let [rho_div, div_term, horizontal, volume_rate] = ordered_sum(parts)?;
    let value = rho_div - div_term;
    let (horizontal_form, cross_check) = if away {
        let err = (horizontal - value).abs();
        let scale = horizontal.abs().max(value.abs()).max(1.0);
        if err > 1e-4 * scale {
            return Err(SrmError::Numerical(format!(
                "first-variation forms disagree: {horizontal} vs {value}"
            )));
        }
        (Some(horizontal), Some(err))
    } else {
        (None, None)
    };
    Ok(FirstVariation { value, horizontal_form, divergence_term: div_term, volume_rate, cross_check, nodes: pts.len() })
}

/// `F_t(ξ) = F(ξ) + t ρ(ξ) N(ξ)` in coordinates.
fn flowed_point(m: &ManifoldModel, s: &Hypersurface, v: &VariationField, xi: &[f64], t: f64) -> Result<DVector<f64>> {
    let pd = param_data(m, s, xi)?;
    let h = m.dim_horizontal();
    let n = &pd.n_raw * pd.sign;
    let norm = n.norm();
    if norm == 0.0 {
        return Err(SrmError::DegenerateSurface(0.0));
    }
    let unit = n / norm;
    let rho = v.rho_from(&pd.p, unit.rows(0, h).norm());
    let g = m.geometry(&pd.p)?;
    Ok(DVector::from_column_slice(&pd.p) + g.to_coords(&unit) * (t * rho))
}

fn flowed_perimeter_density(m: &ManifoldModel, s: &Hypersurface, v: &VariationField, xi: &[f64], t: f64) -> Result<f64> {
    let d = m.dim();
    let map = |x: &[f64]| flowed_point(m, s, v, x, t).unwrap_or_else(|_| DVector::from_element(d, f64::NAN));
    let q = map(xi);
    let jac = fd_jacobian_4(&map, xi);
    if !jac.iter().all(|x| x.is_finite()) {
        return Err(SrmError::Numerical("flowed surface left the chart".into()));
    }
    let g = m.geometry(q.as_slice())?;
    let tangents: Vec<DVector<f64>> = (0..jac.ncols()).map(|k| g.to_frame(&jac.column(k).into_owned())).collect();
    Ok(cross_normal(&tangents).rows(0, m.dim_horizontal()).norm())
}

/// `P₀` of the part of `F_t(Σ)` over the support box.
pub fn perturbed_perimeter(m: &ManifoldModel, s: &Hypersurface, v: &VariationField, t: f64, spec: QuadSpec) -> Result<f64> {
    let region = region_of(s, v)?;
    let pts = nodes(s, &region, v.rotational, spec);
    let parts: Vec<Result<[f64; 1]>> = pts
        .par_iter()
        .map(|(xi, w)| Ok([w * flowed_perimeter_density(m, s, v, xi, t)?]))
        .collect();
    Ok(ordered_sum(parts)?[0])
}

/// Fourth-order central difference of `P₀(F_t(Σ))` at `t = 0`.
pub fn first_variation_fd(m: &ManifoldModel, s: &Hypersurface, v: &VariationField, spec: QuadSpec, h: f64) -> Result<f64> {
    let vals: Vec<f64> = [-2.0, -1.0, 1.0, 2.0]
        .iter()
        .map(|k| perturbed_perimeter(m, s, v, k * h, spec))
        .collect::<Result<_>>()?;
    let table = |x: f64| vals[[-2.0, -1.0, 1.0, 2.0].iter().position(|k| (k * h - x).abs() < 0.5 * h).unwrap()];
    Ok(d1_4(table, h))
}

/// Five-point second difference of `P₀(F_t(Σ))` at `t = 0`.
pub fn second_variation_fd_oracle(m: &ManifoldModel, s: &Hypersurface, v: &VariationField, spec: QuadSpec, h: f64) -> Result<f64> {
    let f: Vec<f64> = [-2.0, -1.0, 0.0, 1.0, 2.0]
        .iter()
        .map(|k| perturbed_perimeter(m, s, v, k * h, spec))
        .collect::<Result<_>>()?;
    Ok((-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h))
}

/// Cover of part of the characteristic set in parameter space.
#[derive(Clone, Debug, PartialEq)]
pub enum CharCover {
    /// `{ξ_axis < lo + δ}` or, with `upper`, `{ξ_axis > hi − δ}`.
    Slab { axis: usize, upper: bool },
    /// Disk of radius `δ` about a point of a two-dimensional parameter domain.
    Disk { center: Vec<f64> },
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct BoundaryLimit {
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
    /// Slope of `log|value|` against `log δ` over the sequence.
    pub decay_exponent: Option<f64>,
}

fn conormal_term(
    m: &ManifoldModel,
    s: &Hypersurface,
    v: &VariationField,
    xi: &[f64],
    along: &DVector<f64>,
    across: &DVector<f64>,
    face: &[usize],
) -> Result<f64> {
    let pd = param_data(m, s, xi)?;
    let fr = surface_frame(m, s, &Locus::Param(xi.to_vec()))?;
    if fr.is_characteristic() {
        return Err(SrmError::BadSupport("cover boundary meets the characteristic set".into()));
    }
    let combine = |c: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::zeros(m.dim());
        for (k, t) in pd.tangents.iter().enumerate() {
            out += t * c[k];
        }
        out
    };
    let mut basis: Vec<DVector<f64>> = face.iter().map(|k| pd.tangents[*k].clone()).collect();
    if along.len() > 0 {
        basis.push(combine(along));
    }
    let gram = DMatrix::from_fn(basis.len(), basis.len(), |i, j| basis[i].dot(&basis[j]));
    let measure = gram.determinant().max(0.0).sqrt();
    let mut conormal = combine(across);
    let mut ortho: Vec<DVector<f64>> = Vec::new();
    for b in &basis {
        let mut u = b.clone();
        for o in &ortho {
            u -= o * o.dot(b);
        }
        let n = u.norm();
        if n > 0.0 {
            ortho.push(u / n);
        }
    }
    for o in &ortho {
        conormal -= o * o.dot(&conormal);
    }
    let cn = conormal.norm();
    if cn == 0.0 {
        return Err(SrmError::DegenerateSurface(0.0));
    }
    conormal /= cn;
    Ok(v.rho_at(&fr)? * fr.nu()?.dot(&conormal) * measure)
}

/// `∫_{∂Ω_δ} ρ ⟨ν, N_{Ω_δ}⟩ dV_{∂Ω_δ}` for each `δ`, with `Ω_δ` the union of the covers and
/// `N_{Ω_δ}` its outward conormal within `TΣ`.
pub fn boundary_limit_term(
    m: &ManifoldModel,
    s: &Hypersurface,
    v: &VariationField,
    covers: &[CharCover],
    deltas: &[f64],
    spec: QuadSpec,
) -> Result<BoundaryLimit> {
    let dom = s.domain().ok_or(SrmError::UnboundedDomain)?;
    let dim = dom.dim();
    let mut values = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        if !(delta > 0.0) {
            return Err(SrmError::InvalidInput("cover sizes must be positive".into()));
        }
        let mut total = 0.0;
        for cover in covers {
            match cover {
                CharCover::Slab { axis, upper } => {
                    let axis = *axis;
                    if axis >= dim {
                        return Err(SrmError::InvalidInput("slab axis out of range".into()));
                    }
                    let (lo, hi) = dom.bounds[axis];
                    if 2.0 * delta >= hi - lo {
                        return Err(SrmError::BadSupport("cover exhausts the surface".into()));
                    }
                    let (pos, sign) = if *upper { (hi - delta, -1.0) } else { (lo + delta, 1.0) };
                    let others: Vec<usize> = (0..dim).filter(|k| *k != axis).collect();
                    let bounds: Vec<(f64, f64)> = others.iter().map(|k| dom.bounds[*k]).collect();
                    let pts = if bounds.is_empty() {
                        vec![(Vec::new(), 1.0)]
                    } else {
                        BoxRule::uniform(&bounds, spec.order, spec.panels).points()
                    };
                    let mut across = DVector::zeros(dim);
                    across[axis] = sign;
                    let empty = DVector::zeros(0);
                    let parts: Vec<Result<[f64; 1]>> = pts
                        .par_iter()
                        .map(|(eta, w)| {
                            let mut xi = Vec::with_capacity(dim);
                            let mut it = eta.iter();
                            for k in 0..dim {
                                xi.push(if k == axis { pos } else { *it.next().unwrap() });
                            }
                            Ok([w * conormal_term(m, s, v, &xi, &empty, &across, &others)?])
                        })
                        .collect();
                    total += ordered_sum(parts)?[0];
                }
                CharCover::Disk { center } => {
                    if dim != 2 || center.len() != 2 {
                        return Err(SrmError::InvalidInput("disk covers need a two-dimensional parameter domain".into()));
                    }
                    let rule = GaussLegendre::new(spec.order).composite(0.0, 2.0 * std::f64::consts::PI, 4 * spec.panels);
                    let pts: Vec<(f64, f64)> = rule.nodes.iter().copied().zip(rule.weights.iter().copied()).collect();
                    let parts: Vec<Result<[f64; 1]>> = pts
                        .par_iter()
                        .map(|(phi, w)| {
                            let (sn, cs) = phi.sin_cos();
                            let xi = vec![center[0] + delta * cs, center[1] + delta * sn];
                            let along = DVector::from_vec(vec![-delta * sn, delta * cs]);
                            let across = DVector::from_vec(vec![cs, sn]);
                            Ok([w * conormal_term(m, s, v, &xi, &along, &across, &[])?])
                        })
                        .collect();
                    total += ordered_sum(parts)?[0];
                }
            }
        }
        values.push(total);
    }
    let logs: Vec<(f64, f64)> = deltas
        .iter()
        .zip(&values)
        .filter(|(_, v)| v.abs() > 1e-14)
        .map(|(d, v)| (d.ln(), v.abs().ln()))
        .collect();
    let decay_exponent = if logs.len() >= 2 {
        let n = logs.len() as f64;
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    } else {
        None
    };
    Ok(BoundaryLimit { deltas: deltas.to_vec(), values, decay_exponent })
}

/// Pointwise pieces of the second-variation potential
/// `V = −Ric(ν,ν) − Tr(II₀²) − S₁ − S₂ − Σ_j [e_j(τ_j) + τ_j Γ_j] − S₃ − Σ_j τ_j²`.
#[derive(Clone, Copy, Debug, Default, Serialize, PartialEq)]
pub struct PotentialTerms {
    pub ric: f64,
    pub trace_ii0_sq: f64,
    /// `Σ ⟨Tor(ν,e_j),T_β⟩ ⟨Tor(e_j,T_β),ν⟩`.
    pub s1: f64,
    /// `Σ ⟨Tor(e_j,T_β),N_v⟩ ⟨Tor(ν,e_j),T_β⟩`.
    pub s2: f64,
    /// `Σ_j e_j(τ_j)` with `τ_j = ⟨Tor(ν,e_j),N_v⟩`.
    pub e_tau: f64,
    /// `Σ_j τ_j Γ_j` with `Γ_j = Σ_m ⟨∇_{e_m} e_j, e_m⟩`.
    pub tau_gamma: f64,
    /// `Σ ⟨Tor(ν,e_j),T_β⟩ e_j(a_β)`.
    pub s3: f64,
    pub tau_sq: f64,
}

impl PotentialTerms {
    pub fn potential(&self) -> f64 {
        -self.ric - self.trace_ii0_sq - self.s1 - self.s2 - self.e_tau - self.tau_gamma - self.s3 - self.tau_sq
    }
}

pub type FrameScalar<'a> = &'a (dyn Fn(&SurfaceFrame) -> Result<f64> + Sync);

/// Potential terms at `frame` and, when `rho0` is given, the derivatives `e_j ρ₀`.
pub fn potential_terms(
    m: &ManifoldModel,
    s: &Hypersurface,
    locus: &Locus,
    frame: &SurfaceFrame,
    rho0: Option<FrameScalar>,
) -> Result<(PotentialTerms, Vec<f64>)> {
    let g = m.geometry(&frame.p)?;
    let (h, d) = (m.dim_horizontal(), m.dim());
    let k = frame.e.len();
    let nv = d - h;
    let nu = frame.nu()?;
    let n_v = frame.n_v(h)?;
    let ii = second_fundamental_form_at(m, s, locus, frame, DerivativeMethod::Auto)?;
    let unit = |i: usize| {
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        v
    };
    let tor_nu_e: Vec<DVector<f64>> = frame.e.iter().map(|e| g.torsion_vec(nu, e)).collect();
    let mut t = PotentialTerms { ric: ricci_nu_nu_at(m, frame)?, trace_ii0_sq: (&ii * &ii).trace(), ..Default::default() };
    let tau: Vec<f64> = tor_nu_e.iter().map(|x| x.dot(&n_v)).collect();
    for j in 0..k {
        for b in 0..nv {
            let te = g.torsion_vec(&frame.e[j], &unit(h + b));
            t.s1 += tor_nu_e[j][h + b] * te.dot(nu);
            t.s2 += te.dot(&n_v) * tor_nu_e[j][h + b];
        }
        t.tau_sq += tau[j] * tau[j];
    }
    let off_tau = usize::from(rho0.is_some());
    let off_a = off_tau + k;
    let off_e = off_a + nv;
    let len = off_e + k * d;
    let stack = |fr: &SurfaceFrame| -> Result<DVector<f64>> {
        if fr.e.len() != k {
            return Err(SrmError::Numerical("horizontal tangent frame changed size".into()));
        }
        let gq = m.geometry(&fr.p)?;
        let nuq = fr.nu()?;
        let nvq = fr.n_v(h)?;
        let aq = fr.a()?;
        let mut out = DVector::zeros(len);
        if let Some(r) = rho0 {
            out[0] = r(fr)?;
        }
        for j in 0..k {
            out[off_tau + j] = gq.torsion_vec(nuq, &fr.e[j]).dot(&nvq);
            out.rows_mut(off_e + j * d, d).copy_from(&fr.e[j]);
        }
        for b in 0..nv {
            out[off_a + b] = aq[b];
        }
        Ok(out)
    };
    let derivs: Vec<DVector<f64>> = frame
        .e
        .iter()
        .map(|e| tangent_derivative(m, s, locus, frame, e, &stack))
        .collect::<Result<_>>()?;
    let grad: Vec<f64> = if rho0.is_some() { derivs.iter().map(|dv| dv[0]).collect() } else { Vec::new() };
    for j in 0..k {
        t.e_tau += derivs[j][off_tau + j];
        for b in 0..nv {
            t.s3 += tor_nu_e[j][h + b] * derivs[j][off_a + b];
        }
        let mut gamma = 0.0;
        for mm in 0..k {
            let de = derivs[mm].rows(off_e + j * d, d).into_owned() + g.gamma_apply(&frame.e[mm], &frame.e[j]);
            gamma += de.dot(&frame.e[mm]);
        }
        t.tau_gamma += tau[j] * gamma;
    }
    Ok((t, grad))
}

/// Potential of the general second-variation integrand at a locus.
pub fn general_potential(m: &ManifoldModel, s: &Hypersurface, locus: &Locus) -> Result<f64> {
    let frame = surface_frame(m, s, locus)?;
    Ok(potential_terms(m, s, locus, &frame, None)?.0.potential())
}

/// Heisenberg form of the potential: `−Tr(II₀²) − 2 (Jν)(a) − n a²`.
pub fn heisenberg_potential(m: &ManifoldModel, s: &Hypersurface, locus: &Locus) -> Result<f64> {
    let jm = m
        .complex_structure()
        .ok_or_else(|| SrmError::InvalidInput("model has no complex structure".into()))?;
    if m.dim_vertical() != 1 {
        return Err(SrmError::InvalidInput("Heisenberg form needs one vertical direction".into()));
    }
    let (h, d) = (m.dim_horizontal(), m.dim());
    let frame = surface_frame(m, s, locus)?;
    let ii = second_fundamental_form_at(m, s, locus, &frame, DerivativeMethod::Auto)?;
    let nu = frame.nu()?;
    let mut jnu = DVector::zeros(d);
    jnu.rows_mut(0, h).copy_from(&(jm * nu.rows(0, h).into_owned()));
    let a = frame.a()?[0];
    let jnu_a = if s.has_analytic_hessian() {
        normal_derivative(m, s, &frame.p, &jnu)?.1[0]
    } else {
        tangent_derivative_scalar(m, s, locus, &frame, &jnu, &|fr: &SurfaceFrame| Ok(fr.a()?[0]))?
    };
    Ok(-(&ii * &ii).trace() - 2.0 * jnu_a - (h / 2) as f64 * a * a)
}

/// Rototranslation form of the potential for a level set, with `ν = p̄X₁ + q̄X₂` and
/// `ω̄ = a`: `−H² + p̄² + 2(p̄ Tq̄ − q̄ Tp̄) + 2ω̄(q̄ νp̄ − p̄ νq̄) + ω̄²`.
pub fn rototranslation_potential(m: &ManifoldModel, s: &Hypersurface, locus: &Locus) -> Result<f64> {
    if m.dim() != 3 || m.dim_horizontal() != 2 {
        return Err(SrmError::InvalidInput("rototranslation form needs a 3-dimensional model of rank 2".into()));
    }
    if !s.has_level_set() {
        return Err(SrmError::InvalidInput("rototranslation form needs a defining function".into()));
    }
    let frame = surface_frame(m, s, locus)?;
    let ii = second_fundamental_form_at(m, s, locus, &frame, DerivativeMethod::Auto)?;
    let nu = frame.nu()?.clone();
    let w = frame.a()?[0];
    let (pb, qb) = (nu[0], nu[1]);
    let tdir = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    let (dt, _) = normal_derivative(m, s, &frame.p, &tdir)?;
    let (dn, _) = normal_derivative(m, s, &frame.p, &nu)?;
    let hm = ii.trace();
    Ok(-hm * hm + pb * pb + 2.0 * (pb * dt[1] - qb * dt[0]) + 2.0 * w * (qb * dn[0] - pb * dn[1]) + w * w)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SecondVariation {
    /// `∫ [Σ_j (e_j ρ₀)² + V ρ₀²] Λ`.
    pub value: f64,
    pub gradient_term: f64,
    pub potential_term: f64,
    pub max_abs_h: f64,
    /// `∫ ρ₀ Λ`.
    pub constraint_residual: f64,
    /// True when the surface is minimal on the support.
    pub minimal: bool,
    pub nodes: usize,
}

pub fn second_variation(m: &ManifoldModel, s: &Hypersurface, v: &VariationField, spec: QuadSpec) -> Result<SecondVariation> {
    if v.support == Support::OverCharacteristic {
        return Err(SrmError::BadSupport("second variation needs support away from the characteristic set".into()));
    }
    let region = region_of(s, v)?;
    check_support(s, v, &region)?;
    let pts = nodes(s, &region, v.rotational, spec);
    let rho0 = |fr: &SurfaceFrame| v.rho0_at(fr);
    let parts: Vec<Result<[f64; 4]>> = pts
        .par_iter()
        .map(|(xi, w)| {
            let pd = param_data(m, s, xi)?;
            let locus = Locus::Param(xi.clone());
            let fr = surface_frame(m, s, &locus)?;
            if fr.is_characteristic() {
                return Err(SrmError::BadSupport("support meets the characteristic set".into()));
            }
            let rig = m.rigidity_residual(&fr.p)?;
            if rig > 1e-10 {
                return Err(SrmError::NonRigid(rig));
            }
            let lam = fr.n0_norm * pd.n_raw.norm();
            let r0 = v.rho0_at(&fr)?;
            let ii = second_fundamental_form_at(m, s, &locus, &fr, DerivativeMethod::Auto)?;
            let hm = ii.trace().abs();
            if r0 == 0.0 {
                let zero_grad = fr
                    .e
                    .iter()
                    .map(|e| tangent_derivative_scalar(m, s, &locus, &fr, e, &rho0))
                    .collect::<Result<Vec<f64>>>()?
                    .iter()
                    .all(|g| *g == 0.0);
                if zero_grad {
                    return Ok([0.0, 0.0, 0.0, hm]);
                }
            }
            let (terms, grad) = potential_terms(m, s, &locus, &fr, Some(&rho0))?;
            let g2: f64 = grad.iter().map(|g| g * g).sum();
            Ok([w * g2 * lam, w * terms.potential() * r0 * r0 * lam, w * r0 * lam, hm])
        })
        .collect();
    let mut acc = [0.0; 3];
    let mut max_h: f64 = 0.0;
    for p in parts {
        let p = p?;
        for k in 0..3 {
            acc[k] += p[k];
        }
        max_h = max_h.max(p[3]);
    }
    let minimal = max_h < 1e-8;
    if !minimal && acc[2].abs() >= 1e-8 {
        return Err(SrmError::VariationPrecondition { h: max_h, residual: acc[2] });
    }
    Ok(SecondVariation {
        value: acc[0] + acc[1],
        gradient_term: acc[0],
        potential_term: acc[1],
        max_abs_h: max_h,
        constraint_residual: acc[2],
        minimal,
        nodes: pts.len(),
    })
}

/// Options for [`stability_spectrum`].
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumOptions {
    /// Cells per axis of the coarse Q1 mesh; the fine mesh doubles it.
    pub cells: usize,
    pub count: usize,
    pub tolerance: f64,
    pub convergence: f64,
    /// Settings for the mode-reduced bubble problem.
    pub bubble: BubbleStabilityOptions,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions { cells: 8, count: 4, tolerance: 1e-6, convergence: 1e-2, bubble: BubbleStabilityOptions::default() }
    }
}

struct NodeData {
    lam: f64,
    potential: f64,
    /// Parameter components of each `e_j`.
    dirs: Vec<DVector<f64>>,
    h: f64,
}

fn node_data(m: &ManifoldModel, s: &Hypersurface, xi: &[f64]) -> Result<NodeData> {
    let pd = param_data(m, s, xi)?;
    let locus = Locus::Param(xi.to_vec());
    let fr = surface_frame(m, s, &locus)?;
    if fr.is_characteristic() {
        return Err(SrmError::CharacteristicPoint(fr.n0_norm));
    }
    let rig = m.rigidity_residual(&fr.p)?;
    if rig > 1e-10 {
        return Err(SrmError::NonRigid(rig));
    }
    let g = m.geometry(&fr.p)?;
    let svd = pd.jac.clone().svd(true, true);
    let dirs = fr
        .e
        .iter()
        .map(|e| svd.solve(&g.to_coords(e), 1e-14).map_err(|e| SrmError::Numerical(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let (terms, _) = potential_terms(m, s, &locus, &fr, None)?;
    let ii = second_fundamental_form_at(m, s, &locus, &fr, DerivativeMethod::Auto)?;
    Ok(NodeData { lam: fr.n0_norm * pd.n_raw.norm(), potential: terms.potential(), dirs, h: ii.trace() })
}

struct Q1Result {
    values: Vec<f64>,
    sample: Vec<[f64; 2]>,
    constraint_residual: Option<f64>,
    h_values: Vec<f64>,
}

fn q1_spectrum(m: &ManifoldModel, s: &Hypersurface, dom: &ParamBox, cells: usize, count: usize) -> Result<Q1Result> {
    let dim = dom.dim();
    if cells < 2 {
        return Err(SrmError::InvalidInput("need at least two cells per axis".into()));
    }
    let inner = cells - 1;
    let ndof = inner.pow(dim as u32);
    let hx: Vec<f64> = dom.bounds.iter().map(|(a, b)| (b - a) / cells as f64).collect();
    let gl = GaussLegendre::new(3).on(0.0, 1.0);
    let ncell = cells.pow(dim as u32);
    let nq = gl.nodes.len().pow(dim as u32);
    let multi = |mut idx: usize, base: usize| -> Vec<usize> {
        (0..dim)
            .map(|_| {
                let r = idx % base;
                idx /= base;
                r
            })
            .collect()
    };
    let mut qps: Vec<(Vec<usize>, Vec<f64>, Vec<f64>, f64)> = Vec::with_capacity(ncell * nq);
    for c in 0..ncell {
        let ci = multi(c, cells);
        for q in 0..nq {
            let qi = multi(q, gl.nodes.len());
            let local: Vec<f64> = qi.iter().map(|k| gl.nodes[*k]).collect();
            let xi: Vec<f64> = (0..dim).map(|k| dom.bounds[k].0 + (ci[k] as f64 + local[k]) * hx[k]).collect();
            let w: f64 = (0..dim).map(|k| gl.weights[qi[k]] * hx[k]).product();
            qps.push((ci.clone(), local, xi, w));
        }
    }
    let data: Vec<NodeData> = qps
        .par_iter()
        .map(|(_, _, xi, _)| node_data(m, s, xi))
        .collect::<Vec<Result<NodeData>>>()
        .into_iter()
        .collect::<Result<_>>()?;
    let mut a = DMatrix::zeros(ndof, ndof);
    let mut mm = DMatrix::zeros(ndof, ndof);
    let mut c = DVector::zeros(ndof);
    let corners = 1usize << dim;
    for ((ci, local, _, w), nd) in qps.iter().zip(&data) {
        let mut idx = Vec::with_capacity(corners);
        let mut val = Vec::with_capacity(corners);
        let mut der = Vec::with_capacity(corners);
        for corner in 0..corners {
            let bits: Vec<bool> = (0..dim).map(|k| corner >> k & 1 == 1).collect();
            let node: Vec<usize> = (0..dim).map(|k| ci[k] + usize::from(bits[k])).collect();
            if node.iter().any(|v| *v == 0 || *v == cells) {
                continue;
            }
            let dof = node.iter().rev().fold(0, |acc, v| acc * inner + (v - 1));
            let f1 = |k: usize| if bits[k] { local[k] } else { 1.0 - local[k] };
            let value: f64 = (0..dim).map(f1).product();
            let grad: Vec<f64> = (0..dim)
                .map(|k| {
                    let dk = if bits[k] { 1.0 } else { -1.0 } / hx[k];
                    (0..dim).filter(|j| *j != k).map(f1).product::<f64>() * dk
                })
                .collect();
            let ej: Vec<f64> = nd.dirs.iter().map(|dir| dir.iter().zip(&grad).map(|(x, y)| x * y).sum()).collect();
            idx.push(dof);
            val.push(value);
            der.push(ej);
        }
        let wl = w * nd.lam;
        for i in 0..idx.len() {
            c[idx[i]] += wl * val[i];
            for j in 0..idx.len() {
                let grad: f64 = der[i].iter().zip(&der[j]).map(|(x, y)| x * y).sum();
                a[(idx[i], idx[j])] += wl * (grad + nd.potential * val[i] * val[j]);
                mm[(idx[i], idx[j])] += wl * val[i] * val[j];
            }
        }
    }
    let h_values: Vec<f64> = data.iter().map(|d| d.h).collect();
    let minimal = h_values.iter().all(|h| h.abs() < 1e-8);
    let constraint = (!minimal).then_some(&c);
    let eig = generalized_symmetric_eigen(&a, &mm, constraint)?;
    let v0 = eig.vectors.column(0).into_owned();
    let constraint_residual = constraint.map(|c| c.dot(&v0).abs() / (c.norm() * v0.norm()));
    let mid = inner / 2;
    let sample: Vec<[f64; 2]> = (0..inner)
        .map(|i| {
            let dof = (1..dim).fold(i, |acc, k| acc + mid * inner.pow(k as u32));
            [dom.bounds[0].0 + (i + 1) as f64 * hx[0], v0[dof]]
        })
        .collect();
    Ok(Q1Result { values: eig.values.into_iter().take(count).collect(), sample, constraint_residual, h_values })
}

/// Spectrum of the second variation.
///
/// Closed ℍ² bubbles use the mode reduction; other surfaces use Q1 elements on the
/// parameter box with zero boundary values.
pub fn stability_spectrum(m: &ManifoldModel, s: &Hypersurface, opts: &SpectrumOptions) -> Result<StabilityReport> {
    if let Hypersurface::Profile(b) = s {
        if b.n == 2 && b.is_closed() && m.dim() == 5 && m.complex_structure().is_some() {
            return bubble_stability(&BubbleStabilityOptions { l: b.l, ..opts.bubble.clone() });
        }
        return Err(SrmError::InvalidInput("profile surfaces are supported as closed ℍ² bubbles only".into()));
    }
    let dom = s.domain().ok_or(SrmError::UnboundedDomain)?;
    if dom.closed.iter().any(|c| *c) {
        return Err(SrmError::InvalidInput("parameter box must have boundary on every axis".into()));
    }
    let coarse = q1_spectrum(m, s, &dom, opts.cells, opts.count)?;
    let mean = coarse.h_values.iter().sum::<f64>() / coarse.h_values.len() as f64;
    let dev = coarse.h_values.iter().map(|h| (h - mean).abs()).fold(0.0, f64::max);
    if dev > 1e-6 * mean.abs().max(1.0) {
        return Err(SrmError::NotCmc(dev));
    }
    let fine = q1_spectrum(m, s, &dom, 2 * opts.cells, opts.count)?;
    let change = (fine.values[0] - coarse.values[0]).abs();
    let converged = change <= opts.convergence * fine.values[0].abs().max(1.0);
    let verdict = if !converged {
        Verdict::Inconclusive
    } else if fine.values[0] < -opts.tolerance {
        Verdict::Unstable
    } else {
        Verdict::Stable
    };
    Ok(StabilityReport {
        modes: vec![ModeSpectrum {
            mode: "dirichlet".into(),
            bidegree: None,
            min_eigenvalue: fine.values[0],
            coarse_min_eigenvalue: Some(coarse.values[0]),
            change: Some(change),
            eigenvalues: fine.values,
            constraint_residual: fine.constraint_residual,
            angular_coefficient: None,
            null_correlation: None,
            eigenvector_sample: fine.sample,
        }],
        verdict,
        resolution: 2 * opts.cells,
        tolerance: opts.tolerance,
        normalization: "raw".into(),
        notes: vec![format!("Q1 elements, {} cells per axis, zero boundary values", 2 * opts.cells)],
    })
}

/// Terms of the Minkowski formula `(Q−1)P₀ = QH∫Υ + ∮ X⌟Λ`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct MinkowskiReport {
    pub q: f64,
    pub h: f64,
    pub perimeter: f64,
    pub upsilon: f64,
    pub boundary: f64,
    pub residual: f64,
    pub relative_residual: f64,
    /// Enclosed volume and its slab cross-check, for closed bubbles.
    pub volume: Option<f64>,
    pub slab_volume: Option<f64>,
    pub volume_agreement: Option<f64>,
}

fn sample_h(m: &ManifoldModel, s: &Hypersurface, dom: &ParamBox) -> Result<Vec<f64>> {
    let pts: Vec<Vec<f64>> = match s {
        Hypersurface::Profile(b) => {
            let reference = b.sphere_reference();
            let (t0, t1) = dom.bounds[0];
            (1..40)
                .map(|i| {
                    let mut xi = vec![t0 + (t1 - t0) * i as f64 / 40.0];
                    xi.extend_from_slice(&reference);
                    xi
                })
                .collect()
        }
        _ => BoxRule::uniform(&dom.bounds, 3, 2).points().into_iter().map(|p| p.0).collect(),
    };
    let hs: Vec<Result<Option<f64>>> = pts
        .par_iter()
        .map(|xi| {
            let locus = Locus::Param(xi.clone());
            let fr = surface_frame(m, s, &locus)?;
            if fr.n0_norm < 1e3 * CHAR_THRESHOLD {
                return Ok(None);
            }
            Ok(Some(second_fundamental_form_at(m, s, &locus, &fr, DerivativeMethod::Auto)?.trace()))
        })
        .collect();
    Ok(hs.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect())
}

fn boundary_form_integral(m: &ManifoldModel, s: &Hypersurface, spec: QuadSpec) -> Result<f64> {
    let dom = s.domain().ok_or(SrmError::UnboundedDomain)?;
    let dil = m.dilation().ok_or(SrmError::NoDilation)?;
    let dim = dom.dim();
    let mut total = 0.0;
    for (k, upper) in boundary_faces(s) {
        let pos = if upper { dom.bounds[k].1 } else { dom.bounds[k].0 };
        let face_sign = if k % 2 == 0 { 1.0 } else { -1.0 } * if upper { 1.0 } else { -1.0 };
        let others: Vec<usize> = (0..dim).filter(|j| *j != k).collect();
        let (pts, scale): (Vec<(Vec<f64>, f64)>, f64) = match s {
            Hypersurface::Profile(b) => {
                let reference = b.sphere_reference();
                (vec![(reference.clone(), 1.0)], b.sphere_measure() / b.sphere_density(&reference))
            }
            _ if others.is_empty() => (vec![(Vec::new(), 1.0)], 1.0),
            _ => {
                let bounds: Vec<(f64, f64)> = others.iter().map(|j| dom.bounds[*j]).collect();
                (BoxRule::uniform(&bounds, spec.order, spec.panels).points(), 1.0)
            }
        };
        let parts: Vec<Result<[f64; 1]>> = pts
            .par_iter()
            .map(|(eta, w)| {
                let mut xi = Vec::with_capacity(dim);
                let mut it = eta.iter();
                for j in 0..dim {
                    xi.push(if j == k { pos } else { *it.next().unwrap() });
                }
                let pd = param_data(m, s, &xi)?;
                let fr = surface_frame(m, s, &Locus::Param(xi.clone()))?;
                let g = m.geometry(&pd.p)?;
                let x = g.to_frame(&dil.generator.at(&pd.p));
                let dd = m.dim();
                let mut mat = DMatrix::zeros(dd, dd);
                mat.set_column(0, fr.nu()?);
                mat.set_column(1, &x);
                for (c, j) in others.iter().enumerate() {
                    mat.set_column(c + 2, &pd.tangents[*j]);
                }
                Ok([w * mat.determinant() * pd.sign])
            })
            .collect();
        total += face_sign * scale * ordered_sum(parts)?[0];
    }
    Ok(total)
}

/// Checks the Minkowski formula on a CMC surface; closed bubbles also check
/// `(Q−1)P₀ = QH Vol` against a slab computation of the volume.
pub fn minkowski_check(m: &ManifoldModel, s: &Hypersurface, spec: QuadSpec) -> Result<MinkowskiReport> {
    let q = m.homogeneous_dimension().ok_or(SrmError::NoDilation)?;
    let dom = s.domain().ok_or(SrmError::UnboundedDomain)?;
    let hs = sample_h(m, s, &dom)?;
    if hs.is_empty() {
        return Err(SrmError::Numerical("no noncharacteristic samples".into()));
    }
    let h = hs.iter().sum::<f64>() / hs.len() as f64;
    let dev = hs.iter().map(|v| (v - h).abs()).fold(0.0, f64::max);
    if dev > 1e-6 * h.abs().max(1.0) {
        return Err(SrmError::NotCmc(dev));
    }
    let p0 = perimeter(m, s, spec)?.value;
    let ups = upsilon_integral(m, s, spec)?.value;
    let boundary = boundary_form_integral(m, s, spec)?;
    let residual = (q - 1.0) * p0 - q * h * ups - boundary;
    let (volume, slab_volume, volume_agreement) = match s {
        Hypersurface::Profile(b) if b.is_closed() => {
            let slab = bubble::slab_volume(b.l, b.n, 400);
            (Some(ups), Some(slab), Some((ups - slab).abs() / slab))
        }
        _ => (None, None, None),
    };
    Ok(MinkowskiReport {
        q,
        h,
        perimeter: p0,
        upsilon: ups,
        boundary,
        residual,
        relative_residual: residual.abs() / ((q - 1.0) * p0).abs().max(f64::MIN_POSITIVE),
        volume,
        slab_volume,
        volume_agreement,
    })
}
