//! JSON definition files (`srm-v1`) for manifolds, surfaces and variations.
//!
//! Expressions use the grammar of [`crate::expr`]. Ambient coordinates are
//! `x1..xd`; immersion parameters are `u1..um`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SrmError};
use crate::expr::{Expr, ParseError};
use crate::field::{ScalarField, VectorField};
use crate::manifold::{builtin_heisenberg, builtin_rototranslation, Connection, Dilation, ManifoldModel};
use crate::surface::{Hypersurface, Immersion, ParamBox};
use crate::variation::VariationField;

pub const SCHEMA_VERSION: &str = "srm-v1";

/// Manifold definition.
///
/// Either `builtin` is set, or the frame is given explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldDef {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<BuiltinDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub horizontal: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vertical: Vec<Vec<String>>,
    /// Equivalence class id for each vertical field.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rigidity: Vec<usize>,
    #[serde(default)]
    pub connection: ConnectionDef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dilation: Option<DilationDef>,
    /// Constant complex structure on horizontal frame components (row-major).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complex_structure: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BuiltinDef {
    Heisenberg { n: usize },
    Rototranslation,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConnectionDef {
    #[default]
    Canonical,
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DilationDef {
    pub weights: Vec<f64>,
    /// Components of the infinitesimal generator.
    pub generator: Vec<String>,
}

/// Surface definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDef {
    pub version: String,
    #[serde(flatten)]
    pub kind: SurfaceKind,
    /// Reverse the orientation.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub flip: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SurfaceKind {
    /// `{phi = 0}` with `phi` in the ambient coordinates.
    LevelSet { phi: String },
    /// Bubble set of ℍⁿ, optionally restricted to a band `theta ∈ [θ0, θ1]`.
    Bubble {
        #[serde(rename = "L")]
        l: f64,
        #[serde(default = "default_bubble_n")]
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<[f64; 2]>,
    },
    /// `x_axis = f(other coordinates)`; `axis` counts from 1 and `f` uses the
    /// remaining ambient names in order.
    Graph { axis: usize, f: String, domain: Vec<[f64; 2]> },
    /// Component expressions in `u1..um` over a parameter box.
    Immersion { components: Vec<String>, domain: Vec<[f64; 2]> },
}

fn default_bubble_n() -> usize {
    2
}

/// Variation definition. Exactly one of `rho0` and `rho` must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationDef {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub rotational: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub over_characteristic: bool,
}

fn json_error(e: serde_json::Error) -> SrmError {
    let text = e.to_string();
    let message = match text.rfind(" at line ") {
        Some(i) => text[..i].to_string(),
        None => text,
    };
    SrmError::Parse(ParseError { line: e.line(), column: e.column(), message })
}

fn check_version(v: &str) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(SrmError::InvalidInput(format!("unsupported version '{v}', expected '{SCHEMA_VERSION}'")));
    }
    Ok(())
}

fn parse_in(src: &str, names: &[String], what: &str) -> Result<Expr> {
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    Expr::parse(src, &refs).map_err(|e| {
        SrmError::Parse(ParseError { message: format!("{what}: {}", e.message), ..e })
    })
}

fn indexed(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn boxed(domain: &[[f64; 2]]) -> Result<Vec<(f64, f64)>> {
    if domain.iter().any(|[a, b]| !(a.is_finite() && b.is_finite() && a < b)) {
        return Err(SrmError::InvalidInput("domain intervals must be finite with lo < hi".into()));
    }
    Ok(domain.iter().map(|[a, b]| (*a, *b)).collect())
}

impl ManifoldDef {
    pub fn from_json(src: &str) -> Result<Self> {
        serde_json::from_str(src).map_err(json_error)
    }

    pub fn builtin(b: BuiltinDef) -> Self {
        ManifoldDef {
            version: SCHEMA_VERSION.into(),
            name: None,
            builtin: Some(b),
            horizontal: Vec::new(),
            vertical: Vec::new(),
            rigidity: Vec::new(),
            connection: ConnectionDef::Canonical,
            dilation: None,
            complex_structure: None,
        }
    }

    pub fn build(&self) -> Result<ManifoldModel> {
        check_version(&self.version)?;
        if let Some(b) = &self.builtin {
            if !self.horizontal.is_empty() || !self.vertical.is_empty() {
                return Err(SrmError::InvalidInput("builtin manifold cannot also list frame fields".into()));
            }
            return match b {
                BuiltinDef::Heisenberg { n } => builtin_heisenberg(*n),
                BuiltinDef::Rototranslation => Ok(builtin_rototranslation()),
            };
        }
        let dim = self.horizontal.len() + self.vertical.len();
        let names = indexed("x", dim);
        let field = |label: String, comps: &[String]| -> Result<VectorField> {
            if comps.len() != dim {
                return Err(SrmError::InvalidInput(format!(
                    "{label} has {} components, expected {dim}",
                    comps.len()
                )));
            }
            let exprs = comps
                .iter()
                .enumerate()
                .map(|(i, c)| parse_in(c, &names, &format!("{label}[{}]", i + 1)))
                .collect::<Result<Vec<_>>>()?;
            Ok(VectorField::from_exprs(label, exprs))
        };
        let horizontal = self
            .horizontal
            .iter()
            .enumerate()
            .map(|(i, c)| field(format!("X{}", i + 1), c))
            .collect::<Result<Vec<_>>>()?;
        let vertical = self
            .vertical
            .iter()
            .enumerate()
            .map(|(i, c)| field(format!("T{}", i + 1), c))
            .collect::<Result<Vec<_>>>()?;
        let connection = match self.connection {
            ConnectionDef::Canonical => Connection::Canonical,
            ConnectionDef::Flat => Connection::Flat,
        };
        let name = self.name.clone().unwrap_or_else(|| "custom".into());
        let mut m = ManifoldModel::new(name, dim, horizontal, vertical, self.rigidity.clone(), connection)?;
        if let Some(d) = &self.dilation {
            let generator = field("dilation generator".into(), &d.generator)?;
            m = m.with_dilation(Dilation { weights: d.weights.clone(), generator, flow: None })?;
        }
        if let Some(j) = &self.complex_structure {
            let h = m.dim_horizontal();
            if j.len() != h || j.iter().any(|r| r.len() != h) {
                return Err(SrmError::InvalidInput(format!("complex structure must be {h}x{h}")));
            }
            m = m.with_complex_structure(DMatrix::from_fn(h, h, |a, b| j[a][b]));
        }
        Ok(m)
    }
}

impl SurfaceDef {
    pub fn from_json(src: &str) -> Result<Self> {
        serde_json::from_str(src).map_err(json_error)
    }

    pub fn new(kind: SurfaceKind) -> Self {
        SurfaceDef { version: SCHEMA_VERSION.into(), kind, flip: false }
    }

    /// Builds the surface in an ambient space of dimension `dim`.
    pub fn build(&self, dim: usize) -> Result<Hypersurface> {
        check_version(&self.version)?;
        let names = indexed("x", dim);
        let s = match &self.kind {
            SurfaceKind::LevelSet { phi } => {
                Hypersurface::level_set(ScalarField::from_expr(parse_in(phi, &names, "phi")?, dim))
            }
            SurfaceKind::Bubble { l, n, theta } => {
                if 2 * n + 1 != dim {
                    return Err(SrmError::InvalidInput(format!(
                        "bubble of H^{n} needs a {}-dimensional ambient, got {dim}",
                        2 * n + 1
                    )));
                }
                match theta {
                    Some([a, b]) => Hypersurface::bubble_patch(*l, *n, *a, *b)?,
                    None => Hypersurface::bubble(*l, *n)?,
                }
            }
            SurfaceKind::Graph { axis, f, domain } => {
                if *axis < 1 || *axis > dim {
                    return Err(SrmError::InvalidInput(format!("graph axis {axis} outside 1..={dim}")));
                }
                if domain.len() != dim - 1 {
                    return Err(SrmError::InvalidInput(format!("graph domain needs {} intervals", dim - 1)));
                }
                let rest: Vec<String> =
                    names.iter().enumerate().filter(|(i, _)| i + 1 != *axis).map(|(_, s)| s.clone()).collect();
                let e = parse_in(f, &rest, "f")?;
                Hypersurface::graph(axis - 1, ScalarField::from_expr(e, dim - 1), boxed(domain)?)
            }
            SurfaceKind::Immersion { components, domain } => {
                if components.len() != dim {
                    return Err(SrmError::InvalidInput(format!("immersion needs {dim} components")));
                }
                if domain.len() != dim - 1 {
                    return Err(SrmError::InvalidInput(format!("immersion domain needs {} intervals", dim - 1)));
                }
                let params = indexed("u", dim - 1);
                let exprs = components
                    .iter()
                    .enumerate()
                    .map(|(i, c)| parse_in(c, &params, &format!("components[{}]", i + 1)))
                    .collect::<Result<Vec<_>>>()?;
                let jac: Vec<Vec<Expr>> = exprs.iter().map(|e| e.gradient(dim - 1)).collect();
                let map_exprs = exprs.clone();
                Hypersurface::Immersion(Immersion {
                    map: Arc::new(move |u| DVector::from_iterator(dim, map_exprs.iter().map(|e| e.eval(u)))),
                    jacobian: Some(Arc::new(move |u| DMatrix::from_fn(dim, dim - 1, |i, j| jac[i][j].eval(u)))),
                    domain: ParamBox::new(boxed(domain)?),
                    orientation: 1.0,
                })
            }
        };
        Ok(if self.flip { s.flipped() } else { s })
    }
}

impl VariationDef {
    pub fn from_json(src: &str) -> Result<Self> {
        serde_json::from_str(src).map_err(json_error)
    }

    pub fn build(&self, dim: usize) -> Result<VariationField> {
        check_version(&self.version)?;
        let names = indexed("x", dim);
        let mut v = match (&self.rho0, &self.rho) {
            (Some(src), None) => {
                let e = parse_in(src, &names, "rho0")?;
                VariationField::from_rho0(move |p| e.eval(p))
            }
            (None, Some(src)) => {
                let e = parse_in(src, &names, "rho")?;
                VariationField::from_rho(move |p| e.eval(p))
            }
            _ => return Err(SrmError::InvalidInput("give exactly one of 'rho0' and 'rho'".into())),
        };
        if let Some(r) = &self.region {
            v = v.with_region(ParamBox::new(boxed(r)?));
        }
        if self.rotational {
            v = v.rotational();
        }
        if self.over_characteristic {
            v = v.over_characteristic();
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_heisenberg_matches_builtin() {
        let src = r#"{
            "version": "srm-v1",
            "name": "H1",
            "horizontal": [["1", "0", "-x2/2"], ["0", "1", "x1/2"]],
            "vertical": [["0", "0", "1"]],
            "rigidity": [0],
            "dilation": {"weights": [2], "generator": ["x1", "x2", "2*x3"]}
        }"#;
        let m = ManifoldDef::from_json(src).unwrap().build().unwrap();
        let h = builtin_heisenberg(1).unwrap();
        let p = [0.3, -0.7, 1.1];
        assert!((m.frame_matrix(&p) - h.frame_matrix(&p)).norm() < 1e-14);
        let b = m.bracket(0, 1, &p).unwrap();
        assert!((b - DVector::from_vec(vec![0.0, 0.0, 1.0])).norm() < 1e-12);
        assert_eq!(m.homogeneous_dimension(), Some(4.0));
    }

    #[test]
    fn builtin_reference() {
        let m = ManifoldDef::from_json(r#"{"version":"srm-v1","builtin":{"model":"heisenberg","n":2}}"#)
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(m.dim(), 5);
        let r = ManifoldDef::from_json(r#"{"version":"srm-v1","builtin":{"model":"rototranslation"}}"#)
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(r.dim(), 3);
    }

    #[test]
    fn wrong_version_rejected() {
        let d = ManifoldDef::from_json(r#"{"version":"srm-v0","builtin":{"model":"rototranslation"}}"#).unwrap();
        assert!(matches!(d.build(), Err(SrmError::InvalidInput(_))));
    }

    #[test]
    fn expression_error_has_position() {
        let d = SurfaceDef::from_json(r#"{"version":"srm-v1","type":"level-set","phi":"x1 + * x2"}"#).unwrap();
        match d.build(3) {
            Err(SrmError::Parse(e)) => assert_eq!(e.column, 6),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_line() {
        match SurfaceDef::from_json("{\n\"version\": \"srm-v1\",\n\"type\": }") {
            Err(SrmError::Parse(e)) => assert_eq!(e.line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn surface_kinds_agree() {
        let level = SurfaceDef::from_json(r#"{"version":"srm-v1","type":"level-set","phi":"x3 - x1*x2"}"#)
            .unwrap()
            .build(3)
            .unwrap();
        let graph = SurfaceDef::from_json(
            r#"{"version":"srm-v1","type":"graph","axis":3,"f":"x1*x2","domain":[[-1,1],[-1,1]]}"#,
        )
        .unwrap()
        .build(3)
        .unwrap();
        let imm = SurfaceDef::from_json(
            r#"{"version":"srm-v1","type":"immersion","components":["u1","u2","u1*u2"],"domain":[[-1,1],[-1,1]]}"#,
        )
        .unwrap()
        .build(3)
        .unwrap();
        let p = graph.param_point(&[0.2, 0.5]).unwrap();
        assert!(level.defect(&p).unwrap() < 1e-14);
        let q = imm.param_point(&[0.2, 0.5]).unwrap();
        assert_eq!(p, q);
        let j = imm.param_jacobian(&[0.2, 0.5]).unwrap();
        assert!((j[(2, 0)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn bubble_dimension_checked() {
        let d = SurfaceDef::from_json(r#"{"version":"srm-v1","type":"bubble","L":1.0}"#).unwrap();
        assert!(d.build(5).is_ok());
        assert!(d.build(3).is_err());
    }

    #[test]
    fn variation_needs_one_density() {
        let d = VariationDef::from_json(r#"{"version":"srm-v1","rho0":"1","rho":"1"}"#).unwrap();
        assert!(d.build(3).is_err());
        let v = VariationDef::from_json(r#"{"version":"srm-v1","rho":"x1^2","region":[[-0.5,0.5],[0,1]]}"#)
            .unwrap()
            .build(3)
            .unwrap();
        assert!(!v.is_horizontal());
        assert_eq!(v.raw(&[0.5, 0.0, 0.0]), 0.25);
    }

    #[test]
    fn definitions_round_trip() {
        let d = SurfaceDef::new(SurfaceKind::Bubble { l: 2.0, n: 2, theta: Some([0.3, 1.2]) });
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(SurfaceDef::from_json(&s).unwrap(), d);
        let m = ManifoldDef::builtin(BuiltinDef::Heisenberg { n: 1 });
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(ManifoldDef::from_json(&s).unwrap(), m);
    }
}
