//! Command implementations. Each returns a report envelope, summary lines and an exit code.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use srm_core::bubble::{self, BubbleStabilityOptions};
use srm_core::charset::{cell_point, characteristic_scan, skew_hessian};
use srm_core::geom::{curvature_data, enclosed_volume, perimeter as perimeter_of, riemannian_area, QuadSpec};
use srm_core::io::{BuiltinDef, ManifoldDef, SurfaceDef, SurfaceKind, VariationDef};
use srm_core::surface::{Hypersurface, Locus};
use srm_core::variation::{
    first_variation_fd, minkowski_check, second_variation_fd_oracle, stability_spectrum, SpectrumOptions, Verdict,
};
use srm_core::verify::{run_suite, Suite};
use srm_core::{variation, ManifoldModel, SrmError};

use crate::report::{write_csv, InputDigest, ReportEnvelope};
use crate::Common;

pub struct Outcome {
    pub envelope: ReportEnvelope,
    pub summary: Vec<String>,
    pub exit: u8,
}

struct Inputs {
    manifold: ManifoldModel,
    surface: Hypersurface,
    surface_def: SurfaceDef,
    digests: Vec<InputDigest>,
}

fn read(path: &Path) -> Result<(String, Vec<u8>)> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let text = String::from_utf8(bytes.clone()).with_context(|| format!("{} is not UTF-8", path.display()))?;
    Ok((text, bytes))
}

fn parse_builtin(spec: &str) -> Option<BuiltinDef> {
    let (name, arg) = match spec.split_once(':') {
        Some((a, b)) => (a, Some(b)),
        None => (spec, None),
    };
    match (name, arg) {
        ("heisenberg", None) => Some(BuiltinDef::Heisenberg { n: 1 }),
        ("heisenberg", Some(n)) => n.parse().ok().map(|n| BuiltinDef::Heisenberg { n }),
        ("rototranslation", None) => Some(BuiltinDef::Rototranslation),
        _ => None,
    }
}

fn load_manifold(spec: &str) -> Result<(ManifoldModel, InputDigest)> {
    let path = Path::new(spec);
    if path.exists() {
        let (text, bytes) = read(path)?;
        let m = ManifoldDef::from_json(&text)
            .and_then(|d| d.build())
            .map_err(anyhow::Error::from)
            .with_context(|| format!("manifold {}", path.display()))?;
        return Ok((m, InputDigest::of_bytes("manifold", spec, &bytes)));
    }
    let b = parse_builtin(spec).ok_or_else(|| anyhow!("manifold '{spec}' is neither a file nor a builtin"))?;
    let def = ManifoldDef::builtin(b);
    let canonical = serde_json::to_string(&def)?;
    Ok((def.build()?, InputDigest::of_bytes("manifold", spec, canonical.as_bytes())))
}

fn load(common: &Common) -> Result<Inputs> {
    let default_manifold = "heisenberg:2";
    let (manifold, md) = load_manifold(common.manifold.as_deref().unwrap_or(default_manifold))?;
    let (surface_def, sd) = match (&common.surface, common.l) {
        (Some(path), _) => {
            let (text, bytes) = read(path)?;
            let def = SurfaceDef::from_json(&text)
                .map_err(anyhow::Error::from)
                .with_context(|| format!("surface {}", path.display()))?;
            (def, InputDigest::of_bytes("surface", &path.display().to_string(), &bytes))
        }
        (None, Some(l)) => {
            let n = (manifold.dim() - 1) / 2;
            let def = SurfaceDef::new(SurfaceKind::Bubble { l, n, theta: None });
            let canonical = serde_json::to_string(&def)?;
            (def, InputDigest::of_bytes("surface", &format!("bubble:L={l}"), canonical.as_bytes()))
        }
        (None, None) => bail!("give --surface <file> or --L <value>"),
    };
    let surface = surface_def
        .build(manifold.dim())
        .map_err(anyhow::Error::from)
        .with_context(|| format!("surface {}", sd.source))?;
    Ok(Inputs { manifold, surface, surface_def, digests: vec![md, sd] })
}

fn quad(common: &Common) -> QuadSpec {
    QuadSpec { panels: common.resolution.unwrap_or(QuadSpec::default().panels).max(1), ..QuadSpec::default() }
}

fn params<T: Serialize>(p: &T) -> Result<Value> {
    Ok(serde_json::to_value(p)?)
}

fn parse_point(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|c| c.trim().parse::<f64>().with_context(|| format!("bad coordinate '{c}' in '{s}'")))
        .collect()
}

#[derive(Serialize)]
struct PointEntry {
    locus: String,
    point: Option<Vec<f64>>,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    curvature: Option<srm_core::geom::CurvatureData>,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
}

pub fn curvature(common: &Common, at: &[String], param: &[String], radius: &[f64]) -> Result<Outcome> {
    let inp = load(common)?;
    let (m, s) = (&inp.manifold, &inp.surface);
    let mut loci: Vec<(String, Locus)> = Vec::new();
    for a in at {
        loci.push((format!("at {a}"), Locus::Ambient(parse_point(a)?)));
    }
    for p in param {
        loci.push((format!("param {p}"), Locus::Param(parse_point(p)?)));
    }
    if !radius.is_empty() {
        let SurfaceKind::Bubble { l, n, .. } = inp.surface_def.kind else {
            bail!("--radius needs a bubble surface");
        };
        for &r in radius {
            if !(0.0..=l).contains(&r) {
                bail!("radius {r} outside [0, {l}]");
            }
            let mut p = vec![0.0; 2 * n + 1];
            p[0] = r;
            p[2 * n] = bubble::phi(l, r);
            loci.push((format!("radius {r}"), Locus::Ambient(p)));
        }
    }
    if loci.is_empty() {
        let dom = s.domain().ok_or_else(|| anyhow!("give --at, --param or --radius for surfaces without a parameter box"))?;
        let k = common.resolution.unwrap_or(5).max(1);
        for i in 0..k {
            let f = (i as f64 + 0.5) / k as f64;
            let xi: Vec<f64> = dom.bounds.iter().map(|(a, b)| a + f * (b - a)).collect();
            loci.push((format!("diagonal {}", i + 1), Locus::Param(xi)));
        }
    }
    let mut entries = Vec::new();
    for (label, locus) in loci {
        let point = s.locate(&locus).ok();
        let entry = match curvature_data(m, s, &locus) {
            Ok(c) => PointEntry { locus: label, point, status: "ok", curvature: Some(c), message: None },
            Err(SrmError::CharacteristicPoint(n0)) => PointEntry {
                locus: label,
                point,
                status: "characteristic",
                curvature: None,
                message: Some(format!("|N0| = {n0:e}")),
            },
            Err(e) => PointEntry { locus: label, point, status: "rejected", curvature: None, message: Some(e.to_string()) },
        };
        entries.push(entry);
    }
    let mut summary = Vec::new();
    let mut rows = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        match &e.curvature {
            Some(c) => {
                summary.push(format!("{}: H = {:.12}, |N0| = {:.6e}", e.locus, c.h, c.n0_norm));
                rows.push(vec![i as f64, c.h]);
            }
            None => summary.push(format!("{}: {} ({})", e.locus, e.status, e.message.as_deref().unwrap_or(""))),
        }
    }
    if let Some(path) = &common.dump_csv {
        write_csv(path, &["index", "H"], &rows)?;
    }
    let envelope = ReportEnvelope::new("curvature", inp.digests, params(&json!({}))?, json!({ "points": entries }));
    Ok(Outcome { envelope, summary, exit: 0 })
}

pub fn perimeter(common: &Common) -> Result<Outcome> {
    let inp = load(common)?;
    let (m, s) = (&inp.manifold, &inp.surface);
    let spec = quad(common);
    let p0 = perimeter_of(m, s, spec)?;
    let area = riemannian_area(m, s, spec)?;
    let closed = matches!(s, Hypersurface::Profile(b) if b.is_closed());
    let volume = if closed { Some(enclosed_volume(m, s, spec)?) } else { None };
    let mut summary = vec![
        format!("P0 = {:.15} (change under refinement {:.2e})", p0.value, p0.error_estimate),
        format!("area = {:.15}", area.value),
    ];
    if let Some(v) = &volume {
        summary.push(format!("volume = {:.15}", v.value));
    }
    let envelope = ReportEnvelope::new(
        "perimeter",
        inp.digests,
        params(&spec)?,
        json!({ "perimeter": p0, "riemannian_area": area, "volume": volume }),
    );
    Ok(Outcome { envelope, summary, exit: 0 })
}

fn load_variation(path: &Path, dim: usize) -> Result<(variation::VariationField, InputDigest)> {
    let (text, bytes) = read(path)?;
    let v = VariationDef::from_json(&text)
        .and_then(|d| d.build(dim))
        .map_err(anyhow::Error::from)
        .with_context(|| format!("variation {}", path.display()))?;
    Ok((v, InputDigest::of_bytes("variation", &path.display().to_string(), &bytes)))
}

pub fn first_variation(common: &Common, path: &Path, oracle: bool) -> Result<Outcome> {
    let mut inp = load(common)?;
    let (v, vd) = load_variation(path, inp.manifold.dim())?;
    inp.digests.push(vd);
    let spec = quad(common);
    let fv = variation::first_variation(&inp.manifold, &inp.surface, &v, spec)?;
    let fd = if oracle { Some(first_variation_fd(&inp.manifold, &inp.surface, &v, spec, 1e-4)?) } else { None };
    let mut summary = vec![format!("first variation = {:.12e}", fv.value)];
    if let Some(h) = fv.horizontal_form {
        summary.push(format!("horizontal form = {h:.12e}"));
    }
    if let Some(d) = fd {
        summary.push(format!("difference quotient = {d:.12e}"));
    }
    let envelope = ReportEnvelope::new(
        "first-variation",
        inp.digests,
        params(&json!({ "quadrature": spec, "oracle": oracle }))?,
        json!({ "first_variation": fv, "difference_quotient": fd }),
    );
    Ok(Outcome { envelope, summary, exit: 0 })
}

pub fn second_variation(common: &Common, path: &Path, oracle: bool) -> Result<Outcome> {
    let mut inp = load(common)?;
    let (v, vd) = load_variation(path, inp.manifold.dim())?;
    inp.digests.push(vd);
    let spec = quad(common);
    let sv = variation::second_variation(&inp.manifold, &inp.surface, &v, spec)?;
    let fd = if oracle { Some(second_variation_fd_oracle(&inp.manifold, &inp.surface, &v, spec, 1e-2)?) } else { None };
    let mut summary = vec![format!(
        "second variation = {:.12e} (gradient {:.6e}, potential {:.6e})",
        sv.value, sv.gradient_term, sv.potential_term
    )];
    if let Some(d) = fd {
        summary.push(format!("difference quotient = {d:.12e}"));
    }
    let envelope = ReportEnvelope::new(
        "second-variation",
        inp.digests,
        params(&json!({ "quadrature": spec, "oracle": oracle }))?,
        json!({ "second_variation": sv, "difference_quotient": fd }),
    );
    Ok(Outcome { envelope, summary, exit: 0 })
}

pub fn stability(common: &Common) -> Result<Outcome> {
    let inp = load(common)?;
    let is_bubble = matches!(inp.surface, Hypersurface::Profile(_));
    let defaults = SpectrumOptions::default();
    let tol = common.tol.unwrap_or(defaults.tolerance);
    let opts = SpectrumOptions {
        cells: if is_bubble { defaults.cells } else { common.resolution.unwrap_or(defaults.cells) },
        count: if is_bubble { defaults.count } else { common.modes.unwrap_or(defaults.count) },
        tolerance: tol,
        bubble: BubbleStabilityOptions {
            elements: if is_bubble { common.resolution.unwrap_or(defaults.bubble.elements) } else { defaults.bubble.elements },
            max_degree: if is_bubble { common.modes.unwrap_or(defaults.bubble.max_degree) } else { defaults.bubble.max_degree },
            tolerance: tol,
            ..defaults.bubble.clone()
        },
        ..defaults
    };
    let report = match stability_spectrum(&inp.manifold, &inp.surface, &opts) {
        Ok(r) => r,
        Err(SrmError::NotCmc(dev)) => {
            let envelope = ReportEnvelope::new(
                "stability",
                inp.digests,
                params(&opts)?,
                json!({ "verdict": "not-cmc", "max_deviation": dev }),
            );
            return Ok(Outcome {
                envelope,
                summary: vec![format!("surface is not CMC: max |div nu - c| = {dev:.6e}")],
                exit: 4,
            });
        }
        Err(e) => return Err(e.into()),
    };
    let worst = report.modes.iter().min_by(|a, b| a.min_eigenvalue.total_cmp(&b.min_eigenvalue));
    if let (Some(path), Some(w)) = (&common.dump_csv, worst) {
        let rows: Vec<Vec<f64>> = w.eigenvector_sample.iter().map(|[x, y]| vec![*x, *y]).collect();
        write_csv(path, &["abscissa", "eigenvector"], &rows)?;
    }
    let mut summary: Vec<String> = report
        .modes
        .iter()
        .map(|m| format!("mode {}: min eigenvalue {:.6e}", m.mode, m.min_eigenvalue))
        .collect();
    summary.push(format!("verdict: {:?}", report.verdict));
    let exit = match report.verdict {
        Verdict::Stable => 0,
        Verdict::Inconclusive => 2,
        Verdict::Unstable => 3,
    };
    let envelope = ReportEnvelope::new("stability", inp.digests, params(&opts)?, serde_json::to_value(&report)?);
    Ok(Outcome { envelope, summary, exit })
}

pub fn minkowski(common: &Common) -> Result<Outcome> {
    let inp = load(common)?;
    let spec = quad(common);
    let tol = common.tol.unwrap_or(1e-6);
    let r = minkowski_check(&inp.manifold, &inp.surface, spec)?;
    let passed = r.relative_residual < tol;
    let summary = vec![
        format!("Q = {}, H = {:.12}", r.q, r.h),
        format!("(Q-1) P0 = {:.15}", (r.q - 1.0) * r.perimeter),
        format!("Q H int(Upsilon) + boundary = {:.15}", r.q * r.h * r.upsilon + r.boundary),
        format!("relative residual {:.3e} ({})", r.relative_residual, if passed { "pass" } else { "fail" }),
    ];
    let envelope = ReportEnvelope::new(
        "minkowski-check",
        inp.digests,
        params(&json!({ "quadrature": spec, "tol": tol }))?,
        json!({ "report": r, "passed": passed }),
    );
    Ok(Outcome { envelope, summary, exit: if passed { 0 } else { 5 } })
}

pub fn bubble_report(common: &Common) -> Result<Outcome> {
    let l = match (&common.surface, common.l) {
        (None, Some(l)) => l,
        (None, None) => 1.0,
        (Some(_), _) => {
            let inp = load(common)?;
            match inp.surface_def.kind {
                SurfaceKind::Bubble { l, n: 2, theta: None } => l,
                _ => bail!("bubble-report needs a closed bubble in H^2"),
            }
        }
    };
    let common = Common { l: Some(l), surface: None, manifold: Some("heisenberg:2".into()), ..common.clone() };
    let inp = load(&common)?;
    let spec = quad(&common);
    let k = common.resolution.unwrap_or(11).max(2);
    let forms: Vec<bubble::ClosedForms> = (0..k)
        .map(|i| bubble::closed_forms(l, l * (i as f64 + 0.5) / k as f64))
        .collect::<srm_core::Result<_>>()?;
    let p0 = perimeter_of(&inp.manifold, &inp.surface, spec)?;
    let vol = enclosed_volume(&inp.manifold, &inp.surface, spec)?;
    let p_oracle = 3.0 * PI.powi(3) * l.powi(5) / 8.0;
    let v_oracle = 5.0 * PI.powi(3) * l.powi(6) / 64.0;
    if let Some(path) = &common.dump_csv {
        let rows: Vec<Vec<f64>> = forms.iter().map(|c| vec![c.r, c.phi, c.n0_norm, c.trace_ii0_sq, c.a]).collect();
        write_csv(path, &["r", "phi", "n0_norm", "trace_ii0_sq", "a"], &rows)?;
    }
    let summary = vec![
        format!("L = {l}, H = {}", 4.0 / l),
        format!("P0 = {:.15} (3 pi^3 L^5 / 8 = {:.15})", p0.value, p_oracle),
        format!("volume = {:.15} (5 pi^3 L^6 / 64 = {:.15})", vol.value, v_oracle),
    ];
    let envelope = ReportEnvelope::new(
        "bubble-report",
        inp.digests,
        params(&json!({ "L": l, "quadrature": spec, "radii": k }))?,
        json!({
            "mean_curvature": 4.0 / l,
            "perimeter": p0,
            "perimeter_closed_form": p_oracle,
            "volume": vol,
            "volume_closed_form": v_oracle,
            "closed_forms": forms,
        }),
    );
    Ok(Outcome { envelope, summary, exit: 0 })
}

#[derive(Serialize)]
struct RankEntry {
    point: Vec<f64>,
    rank: usize,
    codimension_bound: usize,
}

pub fn charset(common: &Common, levels: usize) -> Result<Outcome> {
    let inp = load(common)?;
    let (m, s) = (&inp.manifold, &inp.surface);
    let cells = common.resolution.unwrap_or(16).max(1);
    let scan = characteristic_scan(m, s, cells, levels.max(1))?;
    let mut ranks = Vec::new();
    if s.has_level_set() {
        for c in &scan.cells {
            let p = cell_point(s, &c.center)?;
            let Some((_, grad, _)) = s.level(&p) else { continue };
            let sk = skew_hessian(m.horizontal(), &grad, &p)?;
            ranks.push(RankEntry { point: p, rank: sk.rank, codimension_bound: sk.codimension_bound });
        }
    }
    let summary = vec![
        format!("flagged cells per level: {:?}", scan.counts),
        format!(
            "dimension estimate: {}",
            scan.dimension_estimate.map(|d| format!("{d:.3}")).unwrap_or_else(|| "none".into())
        ),
        format!("components: {}", scan.components),
        format!("min skew-Hessian rank: {:?}", ranks.iter().map(|r| r.rank).min()),
    ];
    let envelope = ReportEnvelope::new(
        "charset",
        inp.digests,
        params(&json!({ "cells": cells, "levels": levels }))?,
        json!({ "scan": scan, "skew_hessian_ranks": ranks }),
    );
    Ok(Outcome { envelope, summary, exit: 0 })
}

pub fn verify(_common: &Common, suite: &str) -> Result<Outcome> {
    let s: Suite = suite.parse()?;
    let reports = run_suite(s)?;
    let mut summary = Vec::new();
    for r in &reports {
        for c in &r.checks {
            summary.push(format!("[{}] {c}", r.suite));
        }
    }
    let passed = reports.iter().all(|r| r.passed);
    summary.push(format!("verify {suite}: {}", if passed { "all checks passed" } else { "FAILED" }));
    let envelope = ReportEnvelope::new(
        "verify",
        Vec::new(),
        params(&json!({ "suite": suite }))?,
        json!({ "suites": reports, "passed": passed }),
    );
    Ok(Outcome { envelope, summary, exit: if passed { 0 } else { 5 } })
}
