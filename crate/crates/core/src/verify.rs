//! Verification batteries: each compares a computed quantity with an independent
//! reference (closed forms, finite differences, coefficient formulas) and reports the
//! measured value next to its tolerance.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bubble::{self, BubbleStabilityOptions};
use crate::charset::{characteristic_scan, characteristic_scan_fields, sharp_example_fields, skew_hessian};
use crate::error::{Result, SrmError};
use crate::expr::Expr;
use crate::field::ScalarField;
use crate::geom::{bracket_correction, curvature_data, mean_curvature, QuadSpec};
use crate::manifold::{builtin_heisenberg, builtin_rototranslation, ManifoldModel};
use crate::surface::{surface_frame, Hypersurface, Locus, ParamBox};
use crate::variation::{
    first_variation, first_variation_fd, general_potential, heisenberg_potential, minkowski_check, perturbed_perimeter,
    rototranslation_potential, second_variation, second_variation_fd_oracle, VariationField,
};

const SEED: u64 = 0x5eed_0001;

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
pub enum Relation {
    #[serde(rename = "<")]
    Below,
    #[serde(rename = ">")]
    Above,
}

/// One comparison of a measured value against a bound.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check { name: name.into(), measured, relation: Relation::Below, bound, passed: measured < bound }
    }

    pub fn above(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check { name: name.into(), measured, relation: Relation::Above, bound, passed: measured > bound }
    }

    /// A boolean outcome reported as 1 (true) or 0 (false) against the bound `0.5`.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check::above(name, if ok { 1.0 } else { 0.0 }, 0.5)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.relation {
            Relation::Below => "<",
            Relation::Above => ">",
        };
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {:.6e} {rel} {:.1e}", self.name, self.measured, self.bound)
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Bubble,
    Minkowski,
    FirstVariation,
    SecondVariation,
    Divergence,
    Fourier,
    Charset,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 8] =
        ["bubble", "minkowski", "first-variation", "second-variation", "divergence", "fourier", "charset", "all"];

    fn leaves() -> [Suite; 7] {
        [
            Suite::Bubble,
            Suite::Minkowski,
            Suite::FirstVariation,
            Suite::SecondVariation,
            Suite::Divergence,
            Suite::Fourier,
            Suite::Charset,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Bubble => "bubble",
            Suite::Minkowski => "minkowski",
            Suite::FirstVariation => "first-variation",
            Suite::SecondVariation => "second-variation",
            Suite::Divergence => "divergence",
            Suite::Fourier => "fourier",
            Suite::Charset => "charset",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = SrmError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::leaves()
            .into_iter()
            .chain([Suite::All])
            .find(|v| v.name() == s)
            .ok_or_else(|| SrmError::InvalidInput(format!("unknown suite '{s}' (expected one of {})", Suite::NAMES.join(", "))))
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
    pub passed: bool,
}

pub fn run_suite(suite: Suite) -> Result<Vec<SuiteReport>> {
    let suites: Vec<Suite> = if suite == Suite::All { Suite::leaves().to_vec() } else { vec![suite] };
    let mut out = Vec::new();
    for s in suites {
        let checks = match s {
            Suite::Bubble => {
                let mut c = bubble_closed_form_checks(&[0.5, 1.0, 2.0], 50)?;
                c.extend(bubble_cmc_checks(&[0.5, 1.0, 2.0])?);
                c.extend(bubble_stability_checks(&BubbleStabilityOptions::default())?);
                c
            }
            Suite::Minkowski => {
                let mut c = minkowski_checks(1.0)?;
                c.extend(minkowski_checks(2.0)?);
                c
            }
            Suite::FirstVariation => first_variation_checks()?.into_iter().flat_map(|c| c.checks()).collect(),
            Suite::SecondVariation => {
                let mut c = potential_checks(100)?;
                c.extend(second_variation_oracle_checks()?);
                c
            }
            Suite::Divergence => {
                let mut c = divergence_checks(200)?;
                c.extend(rigidity_checks(50)?);
                c
            }
            Suite::Fourier => fourier_checks(200)?,
            Suite::Charset => charset_checks()?,
            Suite::All => unreachable!(),
        };
        out.push(SuiteReport { suite: s.name().into(), passed: all_passed(&checks), checks });
    }
    Ok(out)
}

fn field(src: &str, vars: &[&str]) -> ScalarField {
    ScalarField::from_expr(Expr::parse(src, vars).expect("built-in expression"), vars.len())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Polynomial bump `(1 − u²)⁴` on `|u| < 1`.
pub fn bump(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (1.0 - u * u).powi(4)
    } else {
        0.0
    }
}

/// Generic pipeline on the bubble against the closed forms at `radii` radii per `L`.
pub fn bubble_closed_form_checks(ls: &[f64], radii: usize) -> Result<Vec<Check>> {
    let m = builtin_heisenberg(2)?;
    let mut worst = [0.0f64; 5];
    for &l in ls {
        let s = Hypersurface::bubble(l, 2)?;
        for k in 0..radii {
            let r = l * (0.02 + 0.96 * k as f64 / (radii.max(2) - 1) as f64);
            let ang = k as f64;
            let dir = [ang.cos(), ang.sin() * (2.0 * ang).cos(), ang.sin() * (2.0 * ang).sin() * 0.6, ang.sin() * (2.0 * ang).sin() * 0.8];
            let mut p: Vec<f64> = dir.iter().map(|v| v * r).collect();
            p.push(bubble::phi(l, r));
            let c = bubble::closed_forms(l, r)?;
            let d = curvature_data(&m, &s, &Locus::Ambient(p))?;
            let mut ev = c.eigenvalues.to_vec();
            ev.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
            let ev_err = ev
                .iter()
                .zip(&d.eigenvalues)
                .map(|(a, b)| (a.0 - b.0).hypot(a.1 - b.1) / a.0.hypot(a.1))
                .fold(0.0, f64::max);
            let errs = [rel(d.h, c.h), rel(d.trace_ii0_sq, c.trace_ii0_sq), rel(d.a[0], c.a), rel(d.n0_norm, c.n0_norm), ev_err];
            for (w, e) in worst.iter_mut().zip(errs) {
                *w = w.max(e);
            }
        }
    }
    Ok(vec![
        Check::below("bubble H = 4/L, max relative error", worst[0], 1e-6),
        Check::below("bubble Tr(II0^2), max relative error", worst[1], 1e-6),
        Check::below("bubble a, max relative error", worst[2], 1e-6),
        Check::below("bubble |N0|, max relative error", worst[3], 1e-6),
        Check::below("bubble II0 eigenvalues, max relative error", worst[4], 1e-6),
    ])
}

/// Spread of `H` over a parameter grid of the closed bubble, away from the poles.
pub fn bubble_cmc_spread(l: f64) -> Result<f64> {
    let m = builtin_heisenberg(2)?;
    let s = Hypersurface::bubble(l, 2)?;
    let dom = s.domain().ok_or(SrmError::UnboundedDomain)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let per_axis = [41, 5, 5, 7];
    let mut idx = vec![0usize; dom.dim()];
    loop {
        let xi: Vec<f64> = idx
            .iter()
            .zip(&dom.bounds)
            .zip(per_axis)
            .map(|((&i, &(a, b)), n)| a + (b - a) * (i as f64 + 0.5) / n as f64)
            .collect();
        let locus = Locus::Param(xi);
        if surface_frame(&m, &s, &locus)?.n0_norm > 1e-3 {
            let h = mean_curvature(&m, &s, &locus)?;
            lo = lo.min(h);
            hi = hi.max(h);
        }
        let mut axis = 0;
        loop {
            if axis == idx.len() {
                return Ok(hi - lo);
            }
            idx[axis] += 1;
            if idx[axis] < per_axis[axis] {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

pub fn bubble_cmc_checks(ls: &[f64]) -> Result<Vec<Check>> {
    ls.iter()
        .map(|&l| Ok(Check::below(format!("bubble L={l}: max H - min H"), bubble_cmc_spread(l)?, 1e-8)))
        .collect()
}

pub fn bubble_stability_checks(opts: &BubbleStabilityOptions) -> Result<Vec<Check>> {
    let rep = bubble::bubble_stability(opts)?;
    let min = rep.modes.iter().map(|m| m.min_eigenvalue).fold(f64::INFINITY, f64::min);
    let change = rep.modes.iter().filter_map(|m| m.change).fold(0.0, f64::max);
    let corr = rep
        .modes
        .iter()
        .find(|m| m.bidegree == Some((0, 0)))
        .and_then(|m| m.null_correlation)
        .unwrap_or(0.0);
    Ok(vec![
        Check::above("bubble modes: min normalized eigenvalue", min, -opts.tolerance),
        Check::above("bubble mode (0,0): correlation with cos(theta)", corr, 0.99),
        Check::below("bubble modes: max eigenvalue change n -> 2n", change, opts.convergence),
    ])
}

/// Minkowski identity on the closed bubble of ℍ², with the perimeter and volume oracles
/// `3π³L⁵/8` and `5π³L⁶/64`.
pub fn minkowski_checks(l: f64) -> Result<Vec<Check>> {
    let m = builtin_heisenberg(2)?;
    let s = Hypersurface::bubble(l, 2)?;
    let r = minkowski_check(&m, &s, QuadSpec::default())?;
    let p_oracle = 3.0 * PI.powi(3) * l.powi(5) / 8.0;
    let v_oracle = 5.0 * PI.powi(3) * l.powi(6) / 64.0;
    let vol = r.volume.unwrap_or(f64::NAN);
    Ok(vec![
        Check::below(format!("minkowski L={l}: relative residual"), r.relative_residual, 1e-6),
        Check::below(format!("minkowski L={l}: P0 vs 3pi^3 L^5/8"), rel(r.perimeter, p_oracle), 1e-8),
        Check::below(format!("minkowski L={l}: volume vs 5pi^3 L^6/64"), rel(vol, v_oracle), 1e-8),
    ])
}

/// One (surface, variation) pair of the first-variation battery.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct FirstVariationCase {
    pub name: String,
    pub formula: f64,
    pub fd: f64,
    pub formula_refined: f64,
    pub fd_refined: f64,
    /// `|formula − fd| / max(|formula|, 1e-6)`.
    pub error: f64,
    pub error_refined: f64,
    /// Roundoff level `64 ε P₀ / h` of the difference quotient.
    pub noise_floor: f64,
}

impl FirstVariationCase {
    pub fn passed(&self) -> bool {
        let settled = (self.formula_refined - self.fd_refined).abs() < self.noise_floor;
        self.error < 1e-3 && self.error_refined < 1e-3 && (self.error_refined <= self.error || settled)
    }

    pub fn checks(&self) -> Vec<Check> {
        vec![
            Check::below(format!("{}: relative error", self.name), self.error, 1e-3),
            Check::below(format!("{}: relative error refined", self.name), self.error_refined, 1e-3),
            Check::holds(format!("{}: refined error not larger (or at roundoff level)", self.name), self.passed()),
        ]
    }
}

const FV_FLOOR: f64 = 1e-6;
const FV_STEP: f64 = 1e-4;

fn first_variation_case(
    name: &str,
    m: &ManifoldModel,
    s: &Hypersurface,
    v: &VariationField,
    spec: QuadSpec,
) -> Result<FirstVariationCase> {
    let a = first_variation(m, s, v, spec)?.value;
    let fa = first_variation_fd(m, s, v, spec, FV_STEP)?;
    let b = first_variation(m, s, v, spec.refined())?.value;
    let fb = first_variation_fd(m, s, v, spec.refined(), FV_STEP)?;
    let p0 = perturbed_perimeter(m, s, v, 0.0, spec.refined())?;
    Ok(FirstVariationCase {
        name: name.into(),
        formula: a,
        fd: fa,
        formula_refined: b,
        fd_refined: fb,
        error: (a - fa).abs() / a.abs().max(FV_FLOOR),
        error_refined: (b - fb).abs() / b.abs().max(FV_FLOOR),
        noise_floor: 64.0 * f64::EPSILON * p0.abs() / FV_STEP,
    })
}

/// The five (surface, variation) pairs.
pub fn first_variation_checks() -> Result<Vec<FirstVariationCase>> {
    let h1 = builtin_heisenberg(1)?;
    let h2 = builtin_heisenberg(2)?;
    let rt = builtin_rototranslation();
    let spec = QuadSpec { order: 10, panels: 2 };
    let mut out = Vec::new();

    let plane = Hypersurface::graph(0, field("0", &["y", "t"]), vec![(-1.0, 1.0); 2]);
    let v = VariationField::from_rho0(|p| bump(p[1] / 0.7) * bump(p[2] / 0.7) * (1.0 + 0.3 * p[1]))
        .with_region(ParamBox::new(vec![(-0.7, 0.7); 2]));
    out.push(first_variation_case("vertical plane in H1", &h1, &plane, &v, spec)?);

    let graph = Hypersurface::graph(2, field("0.3*x^2 + 0.2*y", &["x", "y"]), vec![(-1.0, 1.0); 2]);
    let v = VariationField::from_rho0(|p| bump((p[0] - 0.55) / 0.35) * bump((p[1] - 0.5) / 0.4) * (1.0 + p[0]))
        .with_region(ParamBox::new(vec![(0.2, 0.9), (0.1, 0.9)]));
    out.push(first_variation_case("graph t = 0.3x^2 + 0.2y in H1", &h1, &graph, &v, spec)?);

    let l = 1.0;
    let patch = Hypersurface::bubble_patch(l, 2, 0.3, 1.3)?;
    let mut band = patch.domain().ok_or(SrmError::UnboundedDomain)?.bounds;
    band[0] = (0.4, 1.2);
    let v = VariationField::from_rho0(move |p| bump((bubble::theta_of_height(l, p[4]) - 0.8) / 0.4))
        .with_region(ParamBox::new(band))
        .rotational();
    out.push(first_variation_case("bubble band 0.3 < theta < 1.3 in H2", &h2, &patch, &v, spec)?);

    let rplane = Hypersurface::graph(1, field("0", &["x", "theta"]), vec![(-1.0, 1.0), (0.3, 2.8)]);
    let v = VariationField::from_rho0(|p| bump(p[0] / 0.5) * bump((p[2] - 1.55) / 0.7))
        .with_region(ParamBox::new(vec![(-0.5, 0.5), (0.85, 2.25)]));
    out.push(first_variation_case("plane y = 0 in the rototranslation group", &rt, &rplane, &v, spec)?);

    let g2 = Hypersurface::graph(
        4,
        field("0.3*x1^2 + 0.2*x2*y1 + 0.1*y2^2 + x1", &["x1", "x2", "y1", "y2"]),
        vec![(-1.0, 1.0); 4],
    );
    let v = VariationField::from_rho0(|p| p[..4].iter().map(|x| bump(x / 0.5)).product::<f64>() * (1.0 + 0.5 * p[1]))
        .with_region(ParamBox::new(vec![(-0.5, 0.5); 4]));
    out.push(first_variation_case("quadratic graph in H2", &h2, &g2, &v, QuadSpec { order: 5, panels: 1 })?);
    Ok(out)
}

/// Random noncharacteristic samples on graphs and bubbles of all builtins.
fn sample_points(count: usize, min_n0: f64, seed: u64) -> Result<Vec<(ManifoldModel, Hypersurface, Locus)>> {
    let h1 = builtin_heisenberg(1)?;
    let h2 = builtin_heisenberg(2)?;
    let rt = builtin_rototranslation();
    let cases: Vec<(ManifoldModel, Hypersurface)> = vec![
        (h1.clone(), Hypersurface::graph(2, field("0.3*x^2 + 0.2*x*y - 0.1*y^2 + 0.4*y", &["x", "y"]), vec![(-1.0, 1.0); 2])),
        (h1, Hypersurface::graph(0, field("0.2*y^2 - 0.3*t + 0.1*y*t", &["y", "t"]), vec![(-1.0, 1.0); 2])),
        (
            h2.clone(),
            Hypersurface::graph(
                4,
                field("0.3*x1^2 + 0.2*x2*y1 - 0.4*y2^2 + 0.1*x1*y2 + 0.2*x1 - 0.1*y1", &["x1", "x2", "y1", "y2"]),
                vec![(-1.0, 1.0); 4],
            ),
        ),
        (h2, Hypersurface::bubble(1.3, 2)?),
        (rt.clone(), Hypersurface::graph(1, field("0.3*x^2 - 0.2*x*t - 0.1*t^2", &["x", "t"]), vec![(-1.0, 1.0), (0.2, 2.9)])),
        (rt, Hypersurface::graph(0, field("0.2*y + 0.1*sin(t)", &["y", "t"]), vec![(-1.0, 1.0), (-1.2, 1.2)])),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 50 * count {
            return Err(SrmError::Numerical("too few noncharacteristic samples".into()));
        }
        let (m, s) = &cases[out.len() % cases.len()];
        let dom = s.domain().ok_or(SrmError::UnboundedDomain)?;
        let xi: Vec<f64> = dom.bounds.iter().map(|&(a, b)| rng.gen_range(a..b)).collect();
        let locus = Locus::Param(xi);
        if surface_frame(m, s, &locus)?.n0_norm > min_n0 {
            out.push((m.clone(), s.clone(), locus));
        }
    }
    Ok(out)
}

/// `div ν`, `div_Σ ν` and the tangential torsion trace at one sample point.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct DivergenceSample {
    pub model: String,
    pub div_nu: f64,
    pub div_sigma_nu: f64,
    pub torsion_trace: f64,
}

pub fn divergence_samples(count: usize) -> Result<Vec<DivergenceSample>> {
    sample_points(count, 1e-2, SEED)?
        .into_iter()
        .map(|(m, s, locus)| {
            let d = curvature_data(&m, &s, &locus)?;
            Ok(DivergenceSample {
                model: m.name.clone(),
                div_nu: d.div_nu,
                div_sigma_nu: d.div_sigma_nu,
                torsion_trace: d.torsion_trace,
            })
        })
        .collect()
}

/// `div ν = div_Σ ν` on the Heisenberg builtins, and
/// `div_Σ ν − div ν = Σ_i ⟨Tor(ν, t_i), t_i⟩` everywhere.
pub fn divergence_checks(count: usize) -> Result<Vec<Check>> {
    let samples = divergence_samples(count)?;
    let (mut plain, mut corrected, mut n_plain) = (0.0f64, 0.0f64, 0usize);
    for d in &samples {
        if d.model != "rototranslation" {
            plain = plain.max((d.div_nu - d.div_sigma_nu).abs());
            n_plain += 1;
        }
        corrected = corrected.max((d.div_sigma_nu - d.div_nu - d.torsion_trace).abs());
    }
    Ok(vec![
        Check::below(format!("|div nu - div_Sigma nu| at {n_plain} Heisenberg points"), plain, 1e-6),
        Check::below(format!("|div_Sigma nu - div nu - torsion trace| at {count} points"), corrected, 1e-6),
    ])
}

/// `Σ_β ⟨[ν, T_β], T_β⟩` at random points of rigid builtins.
pub fn rigidity_checks(count: usize) -> Result<Vec<Check>> {
    let mut worst = 0.0f64;
    for (m, s, locus) in sample_points(count, 1e-2, SEED + 1)? {
        let frame = surface_frame(&m, &s, &locus)?;
        worst = worst.max(bracket_correction(&m, &frame)?.abs()).max(m.rigidity_residual(&frame.p)?);
    }
    Ok(vec![Check::below(format!("bracket correction at {count} points"), worst, 1e-10)])
}

/// General potential against the Heisenberg and rototranslation forms.
pub fn potential_checks(count: usize) -> Result<Vec<Check>> {
    let h2 = builtin_heisenberg(2)?;
    let heis = [
        Hypersurface::graph(
            4,
            field("0.3*x1^2 + 0.2*x2*y1 - 0.4*y2^2 + 0.1*x1*y2 + 0.2*x1 - 0.1*y1", &["x1", "x2", "y1", "y2"]),
            vec![(-1.0, 1.0); 4],
        ),
        Hypersurface::bubble(0.8, 2)?,
    ];
    let rt = builtin_rototranslation();
    let roto = Hypersurface::graph(1, field("0.3*x^2 - 0.2*x*t - 0.1*t^2", &["x", "t"]), vec![(-1.0, 1.0), (0.2, 2.9)]);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let mut draw = |m: &ManifoldModel, s: &Hypersurface| -> Result<Locus> {
        let dom = s.domain().ok_or(SrmError::UnboundedDomain)?;
        loop {
            let xi: Vec<f64> = dom.bounds.iter().map(|&(a, b)| rng.gen_range(a..b)).collect();
            let locus = Locus::Param(xi);
            if surface_frame(m, s, &locus)?.n0_norm > 0.05 {
                return Ok(locus);
            }
        }
    };
    let (mut wh, mut wr) = (0.0f64, 0.0f64);
    for k in 0..count {
        let s = &heis[k % 2];
        let locus = draw(&h2, s)?;
        wh = wh.max((general_potential(&h2, s, &locus)? - heisenberg_potential(&h2, s, &locus)?).abs());
        let locus = draw(&rt, &roto)?;
        wr = wr.max((general_potential(&rt, &roto, &locus)? - rototranslation_potential(&rt, &roto, &locus)?).abs());
    }
    Ok(vec![
        Check::below(format!("general vs Heisenberg potential at {count} points"), wh, 1e-8),
        Check::below(format!("general vs rototranslation potential at {count} points"), wr, 1e-8),
    ])
}

/// Assembled second variation against a 5-point difference of the perimeter.
pub fn second_variation_oracle_checks() -> Result<Vec<Check>> {
    let h1 = builtin_heisenberg(1)?;
    let plane = Hypersurface::graph(0, field("0", &["y", "t"]), vec![(-1.0, 1.0); 2]);
    let v1 = VariationField::from_rho0(|p| bump(p[1] / 0.7) * bump(p[2] / 0.7) * (1.0 + 0.3 * p[1]))
        .with_region(ParamBox::new(vec![(-0.7, 0.7); 2]));
    let flat = Hypersurface::graph(2, field("0", &["x", "y"]), vec![(-1.0, 1.0); 2]);
    let v2 = VariationField::from_rho0(|p| bump(((p[0] * p[0] + p[1] * p[1]).sqrt() - 0.5) / 0.25))
        .with_region(ParamBox::new(vec![(-0.8, 0.8); 2]));
    let coarse = QuadSpec { order: 10, panels: 2 };
    let mut out = Vec::new();
    for (name, s, v) in [("vertical plane in H1", &plane, &v1), ("plane t = 0 in H1, annular variation", &flat, &v2)] {
        for (label, spec, tol) in [("coarse", coarse, 1e-2), ("refined", coarse.refined(), 1e-3)] {
            let sv = second_variation(&h1, s, v, spec)?.value;
            let fd = second_variation_fd_oracle(&h1, s, v, spec, 1e-2)?;
            out.push(Check::below(format!("{name}: second variation vs difference quotient ({label})"), rel(sv, fd), tol));
        }
    }
    Ok(out)
}

/// Random admissible `h = g / sin θ` with `g = a₀/2 + Σ a_k cos 2kθ + b_k sin 2kθ`.
pub fn random_admissible(rng: &mut impl Rng, k_max: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a: Vec<f64> = (0..=k_max).map(|k| rng.gen_range(-1.0..1.0) / (1 + k * k) as f64).collect();
    let b: Vec<f64> = (0..=k_max).map(|k| if k == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) / (1 + k * k) as f64 }).collect();
    bubble::project_admissible(&mut a);
    (a, b)
}

pub fn fourier_checks(count: usize) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let k_max = 6;
    let (mut min_gap, mut agree, mut constraint, mut nonneg) = (f64::INFINITY, 0.0f64, 0.0f64, 0usize);
    for _ in 0..count {
        let (a, b) = random_admissible(&mut rng, k_max);
        let (h, dh) = bubble::trig_profile(a, b);
        let c = bubble::fourier_inequality_check(&h, &dh, k_max + 2);
        min_gap = min_gap.min(c.gap_formula);
        agree = agree.max((c.gap_formula - c.gap_quadrature).abs() / c.lhs.max(1.0));
        constraint = constraint.max(c.constraint_integral.abs());
        if c.admissible && c.gap_formula >= -1e-9 && c.gap_quadrature >= -1e-9 {
            nonneg += 1;
        }
    }
    let eq = bubble::fourier_inequality_check(&|t: f64| t.cos(), &|t: f64| -t.sin(), 8);
    Ok(vec![
        Check::above(format!("admissible profiles with gap >= -1e-9 (of {count})"), nonneg as f64, count as f64 - 0.5),
        Check::above("minimum gap", min_gap, -1e-9),
        Check::below("coefficient gap vs quadrature gap", agree, 1e-8),
        Check::below("constraint integral of the random profiles", constraint, 1e-10),
        Check::below("equality case h = cos(theta): |gap|", eq.gap_quadrature.abs().max(eq.gap_formula.abs()), 1e-10),
    ])
}

pub fn charset_checks() -> Result<Vec<Check>> {
    let h2 = builtin_heisenberg(2)?;
    let mut out = Vec::new();
    for l in [0.5, 1.0, 2.0] {
        let r = characteristic_scan(&h2, &Hypersurface::bubble(l, 2)?, 32, 3)?;
        out.push(Check::holds(format!("bubble L={l}: two characteristic components"), r.components == 2));
        out.push(Check::below(format!("bubble L={l}: dimension estimate"), r.dimension_estimate.unwrap_or(f64::NAN), 0.3));
    }
    for (n, expected) in [(4usize, 2.0), (3, 1.0)] {
        let f = sharp_example_fields(n, 2)?;
        let names: Vec<String> = (1..n).map(|i| format!("x{i}")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let s = Hypersurface::graph(n - 1, field("x1^2", &refs), vec![(-1.0, 1.0); n - 1]);
        let r = characteristic_scan_fields(&f, &s, 8, 3)?;
        let d = r.dimension_estimate.unwrap_or(f64::NAN);
        out.push(Check::below(format!("sharp example n={n}, k=2: |dimension - {expected}|"), (d - expected).abs(), 0.2));
    }
    let g = Hypersurface::graph(
        4,
        field("0.3*x1^2 + 0.2*x2*y1 - 0.4*y2^2 + 0.1*x1*y2 + 0.2*x1 - 0.1*y1", &["x1", "x2", "y1", "y2"]),
        vec![(-1.0, 1.0); 4],
    );
    let r = characteristic_scan(&h2, &g, 8, 3)?;
    let mut min_rank = usize::MAX;
    for c in &r.cells {
        let p = g.param_point(&c.center)?;
        let (_, grad, _) = g.level(&p).ok_or(SrmError::UnboundedDomain)?;
        min_rank = min_rank.min(skew_hessian(h2.horizontal(), &grad, &p)?.rank);
    }
    out.push(Check::holds(format!("quadratic graph in H2: {} flagged cells found", r.cells.len()), !r.cells.is_empty()));
    out.push(Check::above("quadratic graph in H2: min skew-Hessian rank", min_rank as f64, 1.5));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_parse() {
        for n in Suite::NAMES {
            assert_eq!(n.parse::<Suite>().unwrap().name(), n);
        }
        assert!("everything".parse::<Suite>().is_err());
    }

    #[test]
    fn check_display() {
        let c = Check::below("x", 1e-9, 1e-6);
        assert!(c.passed);
        assert!(c.to_string().starts_with("PASS x"));
        assert!(!Check::above("y", f64::NAN, 0.0).passed);
    }

    #[test]
    fn random_profiles_admissible() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let (a, b) = random_admissible(&mut rng, 5);
            let (h, dh) = bubble::trig_profile(a, b);
            let c = bubble::fourier_inequality_check(&h, &dh, 7);
            assert!(c.admissible, "{}", c.constraint_integral);
            assert!(c.continuity_residual < 1e-12);
        }
    }
}
