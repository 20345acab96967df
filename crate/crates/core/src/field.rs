//! Coordinate vector fields and scalar functions with optional analytic derivatives.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::expr::{self, Expr};

pub type PointFn<T> = Arc<dyn Fn(&[f64]) -> T + Send + Sync>;

/// Default finite-difference step: cbrt(eps)·max(1, |p|).
pub fn fd_step(p: &[f64]) -> f64 {
    let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    f64::EPSILON.cbrt() * norm.max(1.0)
}

/// Fourth-order central difference of a scalar function of one variable at 0.
pub fn d1_4(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h)
}

/// Fourth-order central difference of a vector function of one variable at 0.
pub fn d1_4_vec(f: impl Fn(f64) -> DVector<f64>, h: f64) -> DVector<f64> {
    (f(-2.0 * h) - f(-h) * 8.0 + f(h) * 8.0 - f(2.0 * h)) / (12.0 * h)
}

/// Central-difference Jacobian, `J[(i, j)] = ∂_j f^i`.
pub fn fd_jacobian(f: &dyn Fn(&[f64]) -> DVector<f64>, p: &[f64], h: f64) -> DMatrix<f64> {
    let n = p.len();
    let f0 = f(p);
    let mut jac = DMatrix::zeros(f0.len(), n);
    let mut q = p.to_vec();
    for j in 0..n {
        q[j] = p[j] + h;
        let fp = f(&q);
        q[j] = p[j] - h;
        let fm = f(&q);
        q[j] = p[j];
        jac.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    jac
}

/// Vector field given by its coordinate components.
#[derive(Clone)]
pub struct VectorField {
    pub name: String,
    eval: PointFn<DVector<f64>>,
    jac: Option<PointFn<DMatrix<f64>>>,
    symbolic: Option<Vec<Expr>>,
}

impl std::fmt::Debug for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorField")
            .field("name", &self.name)
            .field("analytic_jacobian", &self.jac.is_some())
            .finish()
    }
}

impl VectorField {
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        VectorField { name: name.into(), eval: Arc::new(eval), jac: None, symbolic: None }
    }

    pub fn with_jacobian(
        mut self,
        jac: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jac = Some(Arc::new(jac));
        self
    }

    /// Field whose components are expressions in the coordinates.
    pub fn from_exprs(name: impl Into<String>, comps: Vec<Expr>) -> Self {
        let n = comps.len();
        let grads: Vec<Vec<Expr>> = comps.iter().map(|c| c.gradient(n)).collect();
        let c1 = comps.clone();
        VectorField {
            name: name.into(),
            eval: Arc::new(move |p| DVector::from_iterator(n, c1.iter().map(|c| c.eval(p)))),
            jac: Some(Arc::new(move |p| {
                DMatrix::from_fn(n, n, |i, j| grads[i][j].eval(p))
            })),
            symbolic: Some(comps),
        }
    }

    pub fn at(&self, p: &[f64]) -> DVector<f64> {
        (self.eval)(p)
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jac.is_some()
    }

    pub fn symbolic(&self) -> Option<&[Expr]> {
        self.symbolic.as_deref()
    }

    /// `J[(i, j)] = ∂_j V^i`, analytic when available.
    pub fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        match &self.jac {
            Some(j) => j(p),
            None => self.fd_jacobian(p),
        }
    }

    pub fn fd_jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        fd_jacobian(&*self.eval, p, fd_step(p))
    }

    /// Symbolic Lie bracket of two expression fields.
    pub fn bracket_symbolic(a: &VectorField, b: &VectorField) -> Option<VectorField> {
        let (sa, sb) = (a.symbolic()?, b.symbolic()?);
        let n = sa.len();
        let comps = (0..n)
            .map(|i| {
                let mut acc = Expr::Const(0.0);
                for j in 0..n {
                    acc = expr::add(acc, expr::mul(sa[j].clone(), sb[i].diff(j)));
                    acc = expr::sub(acc, expr::mul(sb[j].clone(), sa[i].diff(j)));
                }
                acc
            })
            .collect();
        Some(VectorField::from_exprs(format!("[{},{}]", a.name, b.name), comps))
    }
}

/// `[X, Y](p) = J_Y X - J_X Y` in coordinates.
pub fn bracket_coords(x: &VectorField, y: &VectorField, p: &[f64]) -> DVector<f64> {
    y.jacobian(p) * x.at(p) - x.jacobian(p) * y.at(p)
}

/// Scalar function with optional analytic gradient and Hessian.
#[derive(Clone)]
pub struct ScalarField {
    value: PointFn<f64>,
    grad: Option<PointFn<DVector<f64>>>,
    hess: Option<PointFn<DMatrix<f64>>>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("analytic_gradient", &self.grad.is_some())
            .field("analytic_hessian", &self.hess.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn new(value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField { value: Arc::new(value), grad: None, hess: None }
    }

    pub fn with_gradient(
        mut self,
        g: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.grad = Some(Arc::new(g));
        self
    }

    pub fn with_hessian(
        mut self,
        h: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.hess = Some(Arc::new(h));
        self
    }

    /// Function of `n` variables given as an expression; derivatives are symbolic.
    pub fn from_expr(e: Expr, n: usize) -> Self {
        let g = e.gradient(n);
        let h: Vec<Vec<Expr>> = g.iter().map(|gi| gi.gradient(n)).collect();
        let e1 = e.clone();
        ScalarField {
            value: Arc::new(move |p| e1.eval(p)),
            grad: Some(Arc::new(move |p| DVector::from_iterator(n, g.iter().map(|c| c.eval(p))))),
            hess: Some(Arc::new(move |p| DMatrix::from_fn(n, n, |i, j| h[i][j].eval(p)))),
        }
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        (self.value)(p)
    }

    pub fn has_hessian(&self) -> bool {
        self.hess.is_some()
    }

    pub fn gradient(&self, p: &[f64]) -> DVector<f64> {
        match &self.grad {
            Some(g) => g(p),
            None => {
                let h = fd_step(p);
                let mut q = p.to_vec();
                DVector::from_fn(p.len(), |j, _| {
                    q[j] = p[j] + h;
                    let fp = (self.value)(&q);
                    q[j] = p[j] - h;
                    let fm = (self.value)(&q);
                    q[j] = p[j];
                    (fp - fm) / (2.0 * h)
                })
            }
        }
    }

    pub fn hessian(&self, p: &[f64]) -> DMatrix<f64> {
        match &self.hess {
            Some(h) => h(p),
            None => {
                let g = |q: &[f64]| self.gradient(q);
                let jac = fd_jacobian(&g, p, fd_step(p));
                (&jac + jac.transpose()) * 0.5
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbolic_bracket_matches_numeric() {
        let x = VectorField::from_exprs(
            "X",
            vec![Expr::parse_indexed("1", "x", 3).unwrap(), Expr::Const(0.0), Expr::parse_indexed("-x2/2", "x", 3).unwrap()],
        );
        let y = VectorField::from_exprs(
            "Y",
            vec![Expr::Const(0.0), Expr::Const(1.0), Expr::parse_indexed("x1/2", "x", 3).unwrap()],
        );
        let b = VectorField::bracket_symbolic(&x, &y).unwrap();
        let p = [0.3, -0.4, 2.0];
        let num = bracket_coords(&x, &y, &p);
        assert!((b.at(&p) - &num).norm() < 1e-14);
        assert!((num - DVector::from_vec(vec![0.0, 0.0, 1.0])).norm() < 1e-14);
    }

    #[test]
    fn fourth_order_difference() {
        let d = d1_4(|s| (0.7 + s).sin(), 1e-3);
        assert!((d - 0.7f64.cos()).abs() < 1e-12);
    }
}
