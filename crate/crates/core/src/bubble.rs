//! The rotationally invariant CMC bubble `t = ±φ(r)` in ℍ²: profile, closed forms,
//! spherical-harmonic mode reduction of the stability form, and the Fourier inequality.

use std::f64::consts::PI;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SrmError};
use crate::linalg::{band_smallest_eigen, SymBand};
use crate::quadrature::GaussLegendre;
use crate::variation::{ModeSpectrum, StabilityReport, Verdict};

/// Profile `φ(r) = L²π/8 − (L²/4) arctan(r/√(L²−r²)) + (r/4)√(L²−r²)`.
pub fn phi(l: f64, r: f64) -> f64 {
    let w = (l * l - r * r).max(0.0).sqrt();
    l * l * PI / 8.0 - l * l / 4.0 * r.atan2(w) + r * w / 4.0
}

/// `φ'(r) = −r² / (2√(L²−r²))`.
pub fn dphi(l: f64, r: f64) -> f64 {
    -r * r / (2.0 * (l * l - r * r).sqrt())
}

/// `φ''(r) = −r(2L²−r²) / (2(L²−r²)^{3/2})`.
pub fn d2phi(l: f64, r: f64) -> f64 {
    let w2 = l * l - r * r;
    -r * (2.0 * l * l - r * r) / (2.0 * w2 * w2.sqrt())
}

/// Height in the `θ`-chart, `r = L sin θ`, covering both sheets for `θ ∈ [0, π]`.
pub fn height(l: f64, theta: f64) -> f64 {
    l * l / 8.0 * (PI - 2.0 * theta + (2.0 * theta).sin())
}

/// Inverse of [`height`] on `[0, π]`.
pub fn theta_of_height(l: f64, t: f64) -> f64 {
    let top = l * l * PI / 8.0;
    let t = t.clamp(-top, top);
    let (mut lo, mut hi) = (0.0, PI);
    let mut th = PI / 2.0 - 4.0 * t / (l * l) / 2.0;
    th = th.clamp(lo, hi);
    for _ in 0..200 {
        let f = height(l, th) - t;
        if f > 0.0 {
            lo = th;
        } else {
            hi = th;
        }
        let df = -l * l / 2.0 * th.sin().powi(2);
        let mut next = if df != 0.0 { th - f / df } else { 0.5 * (lo + hi) };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - th).abs() < 1e-16 * (1.0 + th.abs()) {
            return next;
        }
        th = next;
    }
    th
}

/// Closed-form horizontal geometry of the upper sheet at radius `r`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ClosedForms {
    pub l: f64,
    pub r: f64,
    pub phi: f64,
    pub w: f64,
    pub ii0: [[f64; 3]; 3],
    pub h: f64,
    pub trace_ii0_sq: f64,
    /// `(re, im)` pairs.
    pub eigenvalues: [(f64, f64); 3],
    pub a: f64,
    pub jnu_a: f64,
    pub n0_norm: f64,
    /// Radial perimeter density per unit sphere measure, `W r³`.
    pub lambda: f64,
}

pub fn closed_forms(l: f64, r: f64) -> Result<ClosedForms> {
    if !(r > 0.0 && r < l) {
        return Err(SrmError::InvalidInput(format!("radius {r} outside (0, {l})")));
    }
    let root = (l * l - r * r).sqrt();
    let s = root / (l * r);
    let w = l * r / (2.0 * root);
    Ok(ClosedForms {
        l,
        r,
        phi: phi(l, r),
        w,
        ii0: [[2.0 / l, 0.0, 0.0], [0.0, 1.0 / l, -s], [0.0, s, 1.0 / l]],
        h: 4.0 / l,
        trace_ii0_sq: 6.0 / (l * l) - 2.0 * (l * l - r * r) / (l * l * r * r),
        eigenvalues: [(2.0 / l, 0.0), (1.0 / l, s), (1.0 / l, -s)],
        a: 2.0 * root / (l * r),
        jnu_a: -2.0 / (r * r),
        n0_norm: l * r / (4.0 * l * l - 4.0 * r * r + l * l * r * r).sqrt(),
        lambda: w * r.powi(3),
    })
}

/// `(p̄, q̄)` components of `ν` at a point `(x₁, x₂, y₁, y₂, t)` of the upper sheet.
pub fn horizontal_normal(l: f64, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + p[3] * p[3]).sqrt();
    let s = (l * l - r * r).sqrt() / (l * r);
    let pb = (0..2).map(|j| p[j] / l - p[2 + j] * s).collect();
    let qb = (0..2).map(|j| p[2 + j] / l + p[j] * s).collect();
    (pb, qb)
}

/// Volume enclosed by the bubble in ℍⁿ by direct slab integration `∫ 2φ(r) dx dy`.
pub fn slab_volume(l: f64, n: usize, nodes: usize) -> f64 {
    let sphere = if n == 1 { 2.0 * PI } else { 2.0 * PI * PI };
    let rule = GaussLegendre::new(nodes).on(0.0, PI / 2.0);
    let radial = rule.integrate(|th| {
        let r = l * th.sin();
        2.0 * phi(l, r) * r.powi(2 * n as i32 - 1) * l * th.cos()
    });
    sphere * radial
}

/// Densities of the reduced radial inequality at `θ` for `h = ρ₀ sin θ`.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct ReducedDensities {
    /// `2L² (∂_θ ρ₀)² sin⁴θ`
    pub rho_lhs: f64,
    /// `4L² ρ₀² sin²θ`
    pub rho_rhs: f64,
    /// `(h' sin θ − h cos θ)²`
    pub h_lhs: f64,
    /// `2h²`
    pub h_rhs: f64,
}

pub fn sv_reduced_integrand(l: f64, theta: f64, h: f64, dh: f64) -> ReducedDensities {
    let (s, c) = theta.sin_cos();
    let rho = h / s;
    let drho = (dh * s - h * c) / (s * s);
    ReducedDensities {
        rho_lhs: 2.0 * l * l * drho * drho * s.powi(4),
        rho_rhs: 4.0 * l * l * rho * rho * s * s,
        h_lhs: (dh * s - h * c).powi(2),
        h_rhs: 2.0 * h * h,
    }
}

/// Result of the Fourier test of `∫(h' sin θ − h cos θ)² ≥ 2∫h²` under `∫h sin³θ = 0`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct FourierCheck {
    /// Cosine coefficients of `g = h sin θ` in `cos(2kθ)`, `k = 0..K`.
    pub a: Vec<f64>,
    /// Sine coefficients in `sin(2kθ)` (`b[0] = 0`).
    pub b: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub gap_formula: f64,
    pub gap_quadrature: f64,
    pub constraint_integral: f64,
    /// `|g(0)|` reconstructed from the coefficients.
    pub continuity_residual: f64,
    pub admissible: bool,
}

fn fine_rule() -> crate::quadrature::Rule1 {
    GaussLegendre::new(24).composite(0.0, PI, 24)
}

/// Gap `(π/2)(−2a₀² + Σ_{k≥1}(4k²−4)(a_k²+b_k²))` from coefficients of `h sin θ`.
pub fn fourier_gap(a: &[f64], b: &[f64]) -> f64 {
    let mut s = -2.0 * a[0] * a[0];
    for k in 1..a.len() {
        let kk = k as f64;
        s += (4.0 * kk * kk - 4.0) * (a[k] * a[k] + b.get(k).copied().unwrap_or(0.0).powi(2));
    }
    PI / 2.0 * s
}

/// Evaluates both sides by quadrature and the coefficient formula for a given `h`.
pub fn fourier_inequality_check(h: &dyn Fn(f64) -> f64, dh: &dyn Fn(f64) -> f64, k_max: usize) -> FourierCheck {
    let rule = fine_rule();
    let lhs = rule.integrate(|t| (dh(t) * t.sin() - h(t) * t.cos()).powi(2));
    let rhs = 2.0 * rule.integrate(|t| h(t).powi(2));
    let a: Vec<f64> = (0..=k_max)
        .map(|k| 2.0 / PI * rule.integrate(|t| h(t) * t.sin() * (2.0 * k as f64 * t).cos()))
        .collect();
    let b: Vec<f64> = (0..=k_max)
        .map(|k| if k == 0 { 0.0 } else { 2.0 / PI * rule.integrate(|t| h(t) * t.sin() * (2.0 * k as f64 * t).sin()) })
        .collect();
    let constraint_integral = rule.integrate(|t| h(t) * t.sin().powi(3));
    let continuity_residual = (a[0] / 2.0 + a[1..].iter().sum::<f64>()).abs();
    let scale = 1.0 + rule.integrate(|t| h(t).abs());
    FourierCheck {
        gap_formula: fourier_gap(&a, &b),
        gap_quadrature: lhs - rhs,
        admissible: constraint_integral.abs() < 1e-10 * scale,
        a,
        b,
        lhs,
        rhs,
        constraint_integral,
        continuity_residual,
    }
}

/// `h = g / sin θ` and `h'` for `g = a₀/2 + Σ a_k cos 2kθ + b_k sin 2kθ`.
pub fn trig_profile(a: Vec<f64>, b: Vec<f64>) -> (impl Fn(f64) -> f64 + Clone, impl Fn(f64) -> f64 + Clone) {
    let g = {
        let (a, b) = (a.clone(), b.clone());
        move |t: f64| -> (f64, f64) {
            let mut v = a[0] / 2.0;
            let mut d = 0.0;
            for k in 1..a.len() {
                let w = 2.0 * k as f64;
                let bk = b.get(k).copied().unwrap_or(0.0);
                v += a[k] * (w * t).cos() + bk * (w * t).sin();
                d += w * (-a[k] * (w * t).sin() + bk * (w * t).cos());
            }
            (v, d)
        }
    };
    let g2 = g.clone();
    (
        move |t: f64| g(t).0 / t.sin(),
        move |t: f64| {
            let (v, d) = g2(t);
            let (s, c) = t.sin_cos();
            (d * s - v * c) / (s * s)
        },
    )
}

/// Orthogonal projection of cosine coefficients onto `{a₀ = a₁, a₀/2 + Σ_{k≥1} a_k = 0}`.
pub fn project_admissible(a: &mut [f64]) {
    let n = a.len();
    let mut c1 = vec![0.0; n];
    c1[0] = 1.0;
    c1[1] = -1.0;
    let mut c2 = vec![1.0; n];
    c2[0] = 0.5;
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let g = [[dot(&c1, &c1), dot(&c1, &c2)], [dot(&c2, &c1), dot(&c2, &c2)]];
    let r = [dot(&c1, a), dot(&c2, a)];
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let l1 = (r[0] * g[1][1] - r[1] * g[0][1]) / det;
    let l2 = (g[0][0] * r[1] - g[1][0] * r[0]) / det;
    for i in 0..n {
        a[i] -= l1 * c1[i] + l2 * c2[i];
    }
}

/// Discretized radial problem for the bidegree `(p, q)` harmonic.
#[derive(Clone, Debug)]
pub struct ModeProblem {
    pub p: usize,
    pub q: usize,
    pub l: f64,
    /// `θ` nodes of the P1 grid.
    pub nodes: Vec<f64>,
    /// Whether unknowns are complex (interleaved real and imaginary parts).
    pub complex: bool,
    pub stiffness: SymBand,
    pub mass: SymBand,
    pub constraint: Option<DVector<f64>>,
}

impl ModeProblem {
    /// Angular coefficient `2[p(q+1) + q(p+1)]`.
    pub fn angular_coefficient(&self) -> f64 {
        angular_coefficient(self.p, self.q)
    }
}

pub fn angular_coefficient(p: usize, q: usize) -> f64 {
    2.0 * (p * (q + 1) + q * (p + 1)) as f64
}

/// Assembles `Q(h) = (L³/2)∫|(h' sin θ − h cos θ) + i(q−p) h sin θ|² + 2(κ−1)|h|² dθ`
/// and `M(h) = (L⁵/2)∫|h|² sin²θ dθ`, `κ = p(q+1)+q(p+1)`, on `elements` P1 elements.
pub fn mode_problem(l: f64, p: usize, q: usize, elements: usize) -> Result<ModeProblem> {
    if elements < 4 {
        return Err(SrmError::InvalidInput("at least 4 radial elements required".into()));
    }
    let c = q as f64 - p as f64;
    let kappa = (p * (q + 1) + q * (p + 1)) as f64;
    let complex = p != q;
    let nn = elements + 1;
    let stride = if complex { 2 } else { 1 };
    let size = nn * stride;
    let bw = if complex { 3 } else { 1 };
    let mut a = SymBand::zeros(size, bw);
    let mut m = SymBand::zeros(size, bw);
    let mut con = DVector::zeros(size);
    let dt = PI / elements as f64;
    let nodes: Vec<f64> = (0..nn).map(|i| i as f64 * dt).collect();
    let gl = GaussLegendre::new(3);
    let (ka, km) = (l.powi(3) / 2.0, l.powi(5) / 2.0);
    for k in 0..elements {
        let rule = gl.on(nodes[k], nodes[k + 1]);
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            let (s, co) = t.sin_cos();
            let ph = [(nodes[k + 1] - t) / dt, (t - nodes[k]) / dt];
            let dph = [-1.0 / dt, 1.0 / dt];
            let dd = [dph[0] * s - ph[0] * co, dph[1] * s - ph[1] * co];
            let ss = [s * ph[0], s * ph[1]];
            let idx = [k, k + 1];
            for x in 0..2 {
                if p == 0 && q == 0 {
                    con[idx[x]] += w * ph[x] * s.powi(3);
                }
                for y in 0..2 {
                    let (i, j) = (idx[x], idx[y]);
                    let diag = dd[x] * dd[y] + c * c * ss[x] * ss[y] + 2.0 * (kappa - 1.0) * ph[x] * ph[y];
                    let mass = s * s * ph[x] * ph[y];
                    // lower triangle only: each unordered pair once
                    if complex {
                        for part in 0..2 {
                            let (ii, jj) = (stride * i + part, stride * j + part);
                            if ii >= jj {
                                a.add(ii, jj, ka * w * diag);
                                m.add(ii, jj, km * w * mass);
                            }
                        }
                        // real row i, imaginary column j
                        let cross = -c * dd[x] * ss[y] + c * ss[x] * dd[y];
                        let (ii, jj) = (stride * i, stride * j + 1);
                        if ii >= jj {
                            a.add(ii, jj, ka * w * cross);
                        } else {
                            // entry (jj, ii) of the imaginary-real block equals this one
                            a.add(jj, ii, ka * w * cross);
                        }
                    } else if i >= j {
                        a.add(i, j, ka * w * diag);
                        m.add(i, j, km * w * mass);
                    }
                }
            }
        }
    }
    Ok(ModeProblem {
        p,
        q,
        l,
        nodes,
        complex,
        stiffness: a,
        mass: m,
        constraint: if p == 0 && q == 0 { Some(con) } else { None },
    })
}

/// Smallest eigenpairs of a mode problem. Eigenvalues are raw (scale as `L⁻²`).
pub fn solve_mode(mp: &ModeProblem, count: usize) -> Result<crate::linalg::GenEigen> {
    let shift = -1.0 / (mp.l * mp.l);
    band_smallest_eigen(&mp.stiffness, &mp.mass, mp.constraint.as_ref(), count, shift, 1e-11)
}

/// Real part of the nodal values of an eigenvector.
pub fn nodal_real(mp: &ModeProblem, v: &DVector<f64>) -> Vec<f64> {
    let stride = if mp.complex { 2 } else { 1 };
    (0..mp.nodes.len()).map(|i| v[stride * i]).collect()
}

/// `M`-weighted cosine similarity between a real mode vector and `cos θ`.
pub fn cos_theta_correlation(mp: &ModeProblem, v: &DVector<f64>) -> f64 {
    let c = DVector::from_iterator(mp.nodes.len(), mp.nodes.iter().map(|t| t.cos()));
    let mc = mp.mass.mul_vec(&c);
    let mv = mp.mass.mul_vec(v);
    (v.dot(&mc) / (v.dot(&mv).sqrt() * c.dot(&mc).sqrt())).abs()
}

/// Options for [`bubble_stability`].
#[derive(Clone, Debug, Serialize)]
pub struct BubbleStabilityOptions {
    pub l: f64,
    pub elements: usize,
    pub max_degree: usize,
    /// Normalized eigenvalues below `-tolerance` count as unstable.
    pub tolerance: f64,
    /// Allowed change of normalized eigenvalues between `n` and `2n` elements.
    pub convergence: f64,
}

impl Default for BubbleStabilityOptions {
    fn default() -> Self {
        BubbleStabilityOptions { l: 1.0, elements: 4000, max_degree: 6, tolerance: 1e-6, convergence: 1e-4 }
    }
}

/// Per-mode spectra of the volume-constrained second variation on the bubble.
pub fn bubble_stability(opts: &BubbleStabilityOptions) -> Result<StabilityReport> {
    if !(opts.l > 0.0) {
        return Err(SrmError::InvalidInput("L must be positive".into()));
    }
    if opts.max_degree < 2 {
        return Err(SrmError::InvalidInput("mode cutoff must be at least 2".into()));
    }
    let l2 = opts.l * opts.l;
    let modes: Vec<(usize, usize)> = (0..=opts.max_degree)
        .flat_map(|d| (0..=d).map(move |p| (p, d - p)))
        .collect();
    let results: Vec<Result<ModeSpectrum>> = modes
        .par_iter()
        .map(|&(p, q)| {
            let coarse = mode_problem(opts.l, p, q, opts.elements)?;
            let fine = mode_problem(opts.l, p, q, 2 * opts.elements)?;
            let ec = solve_mode(&coarse, 3)?;
            let ef = solve_mode(&fine, 3)?;
            let v = ef.vectors.column(0).into_owned();
            let residual = fine.constraint.as_ref().map(|c| c.dot(&v).abs() / (c.norm() * v.norm()));
            let real = nodal_real(&fine, &v);
            let step = (real.len() / 16).max(1);
            let sample: Vec<[f64; 2]> = fine.nodes.iter().zip(&real).step_by(step).map(|(t, h)| [*t, *h]).collect();
            let eig: Vec<f64> = ef.values.iter().map(|v| v * l2).collect();
            Ok(ModeSpectrum {
                mode: format!("({p},{q})"),
                bidegree: Some((p, q)),
                min_eigenvalue: eig[0],
                coarse_min_eigenvalue: Some(ec.values[0] * l2),
                change: Some((ec.values[0] - ef.values[0]).abs() * l2),
                eigenvalues: eig,
                constraint_residual: residual,
                angular_coefficient: Some(angular_coefficient(p, q)),
                null_correlation: if p == 0 && q == 0 { Some(cos_theta_correlation(&fine, &v)) } else { None },
                eigenvector_sample: sample,
            })
        })
        .collect();
    let modes: Vec<ModeSpectrum> = results.into_iter().collect::<Result<_>>()?;
    let converged = modes.iter().all(|m| m.change.unwrap_or(0.0) < opts.convergence);
    let negative = modes.iter().any(|m| m.min_eigenvalue < -opts.tolerance);
    let verdict = if !converged {
        Verdict::Inconclusive
    } else if negative {
        Verdict::Unstable
    } else {
        Verdict::Stable
    };
    Ok(StabilityReport {
        modes,
        verdict,
        resolution: 2 * opts.elements,
        tolerance: opts.tolerance,
        normalization: "eigenvalue × L²".into(),
        notes: vec![
            format!(
                "modes with p+q > {} are not solved: the angular coefficient 2[p(q+1)+q(p+1)] grows with the degree while the potential 2/r² is fixed",
                opts.max_degree
            ),
            "modes with p+q ≥ 1 have angular coefficient ≥ 2, which alone dominates the potential".into(),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_endpoints() {
        assert!((phi(1.0, 0.0) - PI / 8.0).abs() < 1e-15);
        assert!(phi(1.0, 1.0).abs() < 1e-15);
        for &t in &[0.3, 1.0, 2.0, 3.0] {
            let l = 1.7;
            assert!((theta_of_height(l, height(l, t)) - t).abs() < 1e-12);
            assert!((height(l, t) - phi(l, l * t.sin()) * if t <= PI / 2.0 { 1.0 } else { -1.0 }).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_derivatives() {
        let (l, r) = (1.3, 0.7);
        let h = 1e-5;
        assert!(((phi(l, r + h) - phi(l, r - h)) / (2.0 * h) - dphi(l, r)).abs() < 1e-9);
        assert!(((dphi(l, r + h) - dphi(l, r - h)) / (2.0 * h) - d2phi(l, r)).abs() < 1e-8);
    }

    #[test]
    fn closed_form_sample() {
        let c = closed_forms(1.0, 0.6).unwrap();
        assert!((c.trace_ii0_sq - (6.0 - 32.0 / 9.0)).abs() < 1e-12);
        assert!((c.jnu_a + 2.0 / 0.36).abs() < 1e-12);
        assert!(closed_forms(1.0, 1.0).is_err());
    }

    #[test]
    fn mode_matrices_symmetric_and_constrained() {
        let mp = mode_problem(1.0, 1, 0, 40).unwrap();
        let a = mp.stiffness.to_dense();
        assert!((&a - a.transpose()).abs().max() < 1e-14);
        let mp0 = mode_problem(1.0, 0, 0, 40).unwrap();
        let e = solve_mode(&mp0, 2).unwrap();
        let v = e.vectors.column(0).into_owned();
        assert!(mp0.constraint.as_ref().unwrap().dot(&v).abs() < 1e-12);
    }
}
