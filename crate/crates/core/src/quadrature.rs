//! Gauss–Legendre rules: one-dimensional, composite, and tensor products over boxes.

use std::f64::consts::PI;

/// Nodes and weights on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Rule mapped to `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> Rule1 {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        Rule1 {
            nodes: self.nodes.iter().map(|x| c + h * x).collect(),
            weights: self.weights.iter().map(|w| h * w).collect(),
        }
    }

    /// Composite rule on `[a, b]` with `panels` equal panels.
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> Rule1 {
        let panels = panels.max(1);
        let mut out = Rule1 { nodes: Vec::new(), weights: Vec::new() };
        let h = (b - a) / panels as f64;
        for k in 0..panels {
            let r = self.on(a + k as f64 * h, a + (k + 1) as f64 * h);
            out.nodes.extend(r.nodes);
            out.weights.extend(r.weights);
        }
        out
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A one-dimensional rule on a concrete interval.
#[derive(Clone, Debug)]
pub struct Rule1 {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1 {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

/// Tensor-product rule over an axis-aligned box.
#[derive(Clone, Debug)]
pub struct BoxRule {
    pub axes: Vec<Rule1>,
}

impl BoxRule {
    /// `order` Gauss nodes on each of `panels[i]` panels along axis `i`.
    pub fn new(bounds: &[(f64, f64)], order: usize, panels: &[usize]) -> Self {
        let gl = GaussLegendre::new(order);
        BoxRule {
            axes: bounds
                .iter()
                .zip(panels)
                .map(|(&(a, b), &p)| gl.composite(a, b, p))
                .collect(),
        }
    }

    pub fn uniform(bounds: &[(f64, f64)], order: usize, panels: usize) -> Self {
        Self::new(bounds, order, &vec![panels; bounds.len()])
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.nodes.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All `(point, weight)` pairs in a fixed lexicographic order.
    pub fn points(&self) -> Vec<(Vec<f64>, f64)> {
        let dim = self.axes.len();
        let sizes: Vec<usize> = self.axes.iter().map(|a| a.nodes.len()).collect();
        let total: usize = sizes.iter().product();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let mut x = Vec::with_capacity(dim);
            let mut w = 1.0;
            for (k, &i) in idx.iter().enumerate() {
                x.push(self.axes[k].nodes[i]);
                w *= self.axes[k].weights[i];
            }
            out.push((x, w));
            for k in (0..dim).rev() {
                idx[k] += 1;
                if idx[k] < sizes[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }
}

/// Parallel weighted sum with a fixed reduction order.
pub fn weighted_sum<F>(points: &[(Vec<f64>, f64)], f: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    use rayon::prelude::*;
    let vals: Vec<f64> = points.par_iter().map(|(x, w)| w * f(x)).collect();
    vals.iter().sum()
}

/// Like [`weighted_sum`] but propagates the first error in node order.
pub fn try_weighted_sum<F, E>(points: &[(Vec<f64>, f64)], f: F) -> Result<f64, E>
where
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    E: Send,
{
    use rayon::prelude::*;
    let vals: Vec<Result<f64, E>> = points.par_iter().map(|(x, w)| f(x).map(|v| w * v)).collect();
    let mut acc = 0.0;
    for v in vals {
        acc += v?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials() {
        for n in 1..12 {
            let gl = GaussLegendre::new(n);
            for deg in 0..(2 * n) {
                let num: f64 = gl.nodes.iter().zip(&gl.weights).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((num - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn box_rule_volume() {
        let r = BoxRule::uniform(&[(0.0, 2.0), (-1.0, 1.0), (0.0, PI)], 3, 2);
        let v = weighted_sum(&r.points(), |x| x[0] * x[2].sin());
        assert!((v - 2.0 * 2.0 * 2.0).abs() < 1e-4);
        assert_eq!(r.len(), 216);
    }
}
