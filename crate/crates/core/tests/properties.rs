use proptest::prelude::*;
use srm_core::bubble::{self, closed_forms, fourier_inequality_check, project_admissible, trig_profile};
use srm_core::expr::Expr;
use srm_core::geom::curvature_data;
use srm_core::io::{SurfaceDef, SurfaceKind};
use srm_core::surface::{Hypersurface, Locus};
use srm_core::builtin_heisenberg;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn profile_scales_quadratically(l in 0.2f64..5.0, f in 0.0f64..0.99, lam in 0.1f64..10.0) {
        let r = f * l;
        let a = bubble::phi(lam * l, lam * r);
        let b = lam * lam * bubble::phi(l, r);
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }

    #[test]
    fn profile_derivative_matches_difference(l in 0.5f64..3.0, f in 0.05f64..0.9) {
        let r = f * l;
        let h = 1e-5 * l;
        let fd = (bubble::phi(l, r + h) - bubble::phi(l, r - h)) / (2.0 * h);
        prop_assert!((fd - bubble::dphi(l, r)).abs() < 1e-7 * (1.0 + fd.abs()));
    }

    #[test]
    fn trace_of_square_matches_matrix(l in 0.2f64..5.0, f in 0.01f64..0.99) {
        let c = closed_forms(l, f * l).unwrap();
        let mut tr = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                tr += c.ii0[i][j] * c.ii0[j][i];
            }
        }
        prop_assert!((tr - c.trace_ii0_sq).abs() <= 1e-9 * (1.0 + tr.abs()));
        let ev_sum: f64 = c.eigenvalues.iter().map(|e| e.0).sum();
        prop_assert!((ev_sum - c.h).abs() < 1e-12 * c.h);
    }

    #[test]
    fn bubble_mean_curvature_is_constant(l in 0.5f64..3.0, f in 0.05f64..0.95, ang in 0.0f64..std::f64::consts::TAU, upper in any::<bool>()) {
        let m = builtin_heisenberg(2).unwrap();
        let s = Hypersurface::bubble(l, 2).unwrap();
        let r = f * l;
        let t = if upper { bubble::phi(l, r) } else { -bubble::phi(l, r) };
        let p = vec![r * ang.cos(), 0.0, r * ang.sin(), 0.0, t];
        let c = curvature_data(&m, &s, &Locus::Ambient(p)).unwrap();
        prop_assert!((c.h - 4.0 / l).abs() < 1e-9 * (4.0 / l));
    }

    #[test]
    fn admissible_projection_is_idempotent(coeffs in prop::collection::vec(-1.0f64..1.0, 4..8)) {
        let mut a = coeffs;
        project_admissible(&mut a);
        let once = a.clone();
        project_admissible(&mut a);
        for (x, y) in a.iter().zip(&once) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert!((a[0] - a[1]).abs() < 1e-12);
        prop_assert!((a[0] / 2.0 + a[1..].iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn fourier_gap_nonnegative(coeffs in prop::collection::vec(-1.0f64..1.0, 4..7),
                               sines in prop::collection::vec(-1.0f64..1.0, 4..7)) {
        let mut a = coeffs;
        project_admissible(&mut a);
        let mut b = sines;
        b.truncate(a.len());
        b[0] = 0.0;
        let k = a.len() - 1;
        let (h, dh) = trig_profile(a, b);
        let chk = fourier_inequality_check(&h, &dh, k);
        prop_assert!(chk.gap_formula >= -1e-10);
        prop_assert!((chk.gap_formula - chk.gap_quadrature).abs() < 1e-8 * (1.0 + chk.lhs.abs()));
    }

    #[test]
    fn symbolic_derivative_matches_difference(a in -2.0f64..2.0, b in -2.0f64..2.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let src = format!("{a}*x1^3 + {b}*x1*x2 + sin(x1*x2) - cos(x2)");
        let e = Expr::parse(&src, &["x1", "x2"]).unwrap();
        let h = 1e-6;
        for var in 0..2 {
            let mut p = vec![x, y];
            let mut q = vec![x, y];
            p[var] += h;
            q[var] -= h;
            let fd = (e.eval(&p) - e.eval(&q)) / (2.0 * h);
            let exact = e.diff(var).eval(&[x, y]);
            prop_assert!((fd - exact).abs() < 1e-6 * (1.0 + exact.abs()));
        }
    }

    #[test]
    fn heisenberg_brackets_are_vertical(n in 1usize..4, seed in prop::collection::vec(-3.0f64..3.0, 7)) {
        let m = builtin_heisenberg(n).unwrap();
        let p: Vec<f64> = seed.iter().copied().take(2 * n + 1).collect();
        let d = 2 * n + 1;
        for j in 0..n {
            let exact = m.bracket(j, n + j, &p).unwrap();
            let fd = m.bracket_fd(j, n + j, &p, 1e-5).unwrap();
            prop_assert!((&exact - &fd).norm() < 1e-6);
            for c in 0..d - 1 {
                prop_assert!(exact[c].abs() < 1e-12);
            }
            prop_assert!((exact[d - 1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn surface_definition_round_trips(l in 0.1f64..10.0, flip in any::<bool>()) {
        let mut def = SurfaceDef::new(SurfaceKind::Bubble { l, n: 2, theta: None });
        def.flip = flip;
        let text = serde_json::to_string(&def).unwrap();
        let back = SurfaceDef::from_json(&text).unwrap();
        prop_assert_eq!(back, def);
    }
}
