use super::*;
use crate::model::{heston_coefficients, HestonParams, RectDomain};

fn prefs() -> Preferences {
    Preferences::new(2.0, 1.5, 0.08).unwrap()
}

/// Coefficient set with correlation, a w-drift and a cross diffusion, so
/// every term of the operator and generator is active.
struct Correlated;

impl CoefficientSet for Correlated {
    fn r(&self, y: f64) -> f64 {
        0.03 + 0.01 * y
    }
    fn lambda(&self, y: f64) -> f64 {
        0.3 * y
    }
    fn sigma(&self, y: f64) -> f64 {
        (0.04 + y).sqrt()
    }
    fn rho(&self, _y: f64) -> f64 {
        0.6
    }
    fn rhohat(&self, _y: f64) -> f64 {
        0.8
    }
    fn a(&self, y: f64) -> f64 {
        -2.0 * (y - 0.3)
    }
    fn b(&self, y: f64) -> f64 {
        0.4 * (0.05 + y).sqrt()
    }
    fn alpha_w(&self, w: f64, _y: f64) -> f64 {
        -0.2 * w
    }
    fn beta_w(&self, _w: f64, y: f64) -> f64 {
        0.1 + 0.05 * y
    }
    fn gamma_w(&self, _w: f64, y: f64) -> f64 {
        (0.02 + y).sqrt()
    }
}

fn heston() -> HestonCoefficients {
    heston_coefficients(&HestonParams::reference()).unwrap()
}

use crate::model::HestonCoefficients;

/// u_ms = sin(π s)·(y - y1)(y2 - y) with s = (w + L/2)/L, and its exact
/// derivatives (u, u_w, u_y, u_ww, u_yy, u_wy).
fn manufactured(d: &RectDomain, w: f64, y: f64) -> [f64; 6] {
    let pi = std::f64::consts::PI;
    let k = pi / d.l;
    let s = k * (w + d.half_width());
    let q = (y - d.y1) * (d.y2 - y);
    let qy = d.y1 + d.y2 - 2.0 * y;
    [
        s.sin() * q,
        k * s.cos() * q,
        s.sin() * qy,
        -k * k * s.sin() * q,
        -2.0 * s.sin(),
        k * s.cos() * qy,
    ]
}

/// Continuous ℒu + G for the manufactured field, computed from the
/// operator and generator definitions.
fn continuous_operator(c: &dyn CoefficientSet, p: &Preferences, d: &RectDomain, w: f64, y: f64) -> f64 {
    let [u, uw, uy, uww, uyy, uwy] = manufactured(d, w, y);
    let (a, b, aw, bw, gw) = (c.a(y), c.b(y), c.alpha_w(w, y), c.beta_w(w, y), c.gamma_w(w, y));
    let lu = a * uy + aw * uw + 0.5 * b * b * uyy + 0.5 * (bw * bw + gw * gw) * uww + b * bw * uwy;
    let z = b * uy + bw * uw;
    let zhat = gw * uw;
    lu + crate::generators::pde_generator_g(y, u, z, zhat, c, p)
}

fn manufactured_field(g: &Grid) -> Vec<f64> {
    g.nodes().map(|(_, _, w, y)| manufactured(&g.domain, w, y)[0]).collect()
}

#[test]
fn zero_field_residual_is_generator_at_zero() {
    let p = prefs();
    let c = heston();
    let d = RectDomain::new(0.02, 0.001, 1.0).unwrap();
    let g = build_grid(&d, 12, 10).unwrap();
    let res = assemble_residual(&vec![0.0; g.len()], &g, &c, &p);
    let hp = HestonParams::reference();
    for (i, j, _, y) in g.nodes() {
        let k = g.idx(i, j);
        if g.is_boundary(i, j) {
            assert_eq!(res[k], 0.0);
            continue;
        }
        // δ^ψθ/ψ + (1-γ)(r + λ²(y+ε)/(2γ)) - δθ
        let expected = 0.08f64.powf(1.5) * -3.0 / 1.5 - (hp.r + hp.lambda * hp.lambda * y / 4.0) + 0.24;
        assert!((res[k] - expected).abs() < 1e-14, "{} vs {expected}", res[k]);
    }
}

#[test]
fn second_difference_stencils_vanish_on_linear_fields() {
    let p = prefs();
    let d = RectDomain::new(0.5, 0.1, 1.2).unwrap();
    let g = build_grid(&d, 9, 11).unwrap();
    let u: Vec<f64> = g.nodes().map(|(_, _, w, y)| 0.7 + 2.0 * w - 3.0 * y).collect();
    let problem = Problem::new(&g, &Correlated, &p, None, None);
    for j in 1..=g.ny {
        for i in 1..=g.nw {
            let s = problem.stencil(&u, i, j);
            assert!(s.uww.abs() < 1e-9 && s.uyy.abs() < 1e-9 && s.uwy.abs() < 1e-9);
            assert!((s.uw - 2.0).abs() < 1e-12 && (s.uy + 3.0).abs() < 1e-12);
        }
    }
}

#[test]
fn manufactured_truncation_error_is_second_order() {
    let p = prefs();
    let d = RectDomain::new(0.4, 0.05, 0.6).unwrap();
    let mut errs = Vec::new();
    for n in [15usize, 31, 63] {
        let g = build_grid(&d, n, n).unwrap();
        let u = manufactured_field(&g);
        let res = assemble_residual(&u, &g, &Correlated, &p);
        let err = g
            .nodes()
            .filter(|&(i, j, _, _)| !g.is_boundary(i, j))
            .map(|(i, j, w, y)| (res[g.idx(i, j)] - continuous_operator(&Correlated, &p, &d, w, y)).abs())
            .fold(0.0, f64::max);
        errs.push(err);
    }
    for pair in errs.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}, errors {errs:?}");
    }
}

#[test]
fn manufactured_solution_is_recovered_at_second_order() {
    let p = prefs();
    let d = RectDomain::new(0.4, 0.05, 0.6).unwrap();
    let mut errs = Vec::new();
    for n in [15usize, 31, 63] {
        let g = build_grid(&d, n, n).unwrap();
        let forcing: Vec<f64> = g
            .nodes()
            .map(|(_, _, w, y)| -continuous_operator(&Correlated, &p, &d, w, y))
            .collect();
        let sol = solve_dirichlet_forced(&g, &Correlated, &p, &SolverOptions::default(), &forcing).unwrap();
        assert!(sol.residual_norm <= 1e-9);
        let exact = manufactured_field(&g);
        let err = sol.u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        errs.push(err);
    }
    for pair in errs.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}, errors {errs:?}");
    }
}

#[test]
fn newton_and_picard_agree() {
    let p = prefs();
    let d = RectDomain::new(0.4, 0.05, 0.6).unwrap();
    let g = build_grid(&d, 20, 20).unwrap();
    let newton = solve_dirichlet(&g, &Correlated, &p, &SolverOptions::default()).unwrap();
    let picard_opts = SolverOptions {
        scheme: Scheme::Picard,
        max_iterations: 500,
        ..SolverOptions::default()
    };
    let picard = solve_dirichlet(&g, &Correlated, &p, &picard_opts).unwrap();
    assert_eq!(newton.scheme, Scheme::Newton);
    assert_eq!(picard.scheme, Scheme::Picard);
    assert!(newton.iterations < 20);
    let diff = newton
        .u
        .iter()
        .zip(&picard.u)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-8, "diff {diff}");
}

#[test]
fn boundary_is_exact_and_residual_meets_tolerance() {
    let p = prefs();
    let c = heston();
    let d = RectDomain::new(0.02, 0.001, 1.0).unwrap();
    let g = build_grid(&d, 24, 40).unwrap();
    let sol = solve_dirichlet(&g, &c, &p, &SolverOptions::default()).unwrap();
    for (i, j, _, _) in g.nodes() {
        if g.is_boundary(i, j) {
            assert_eq!(sol.u[g.idx(i, j)], 0.0);
        }
    }
    let res = assemble_residual(&sol.u, &g, &c, &p);
    assert!(max_norm(&res) <= 1e-9);
    assert!(sol.max_abs_u() <= sol.c_bar);
}

#[test]
fn zero_field_has_zero_gradients() {
    let d = RectDomain::new(0.02, 0.001, 1.0).unwrap();
    let g = build_grid(&d, 10, 10).unwrap();
    let (z, zh) = gradient_fields(&vec![0.0; g.len()], &g, &heston());
    assert!(z.iter().chain(&zh).all(|v| *v == 0.0));
}

#[test]
fn one_sided_boundary_derivatives_are_exact_on_quadratics() {
    let d = RectDomain::new(1.0, 0.1, 2.0).unwrap();
    let g = build_grid(&d, 10, 12).unwrap();
    let u: Vec<f64> = g.nodes().map(|(_, _, w, y)| w * w + 3.0 * y * y - w * y).collect();
    let (dw, dy) = derivatives(&u, &g);
    for (i, j, w, y) in g.nodes() {
        let k = g.idx(i, j);
        assert!((dw[k] - (2.0 * w - y)).abs() < 1e-10);
        assert!((dy[k] - (6.0 * y - w)).abs() < 1e-10);
    }
}

#[test]
fn heston_fields_reduce_to_scaled_derivatives() {
    let p = prefs();
    let c = heston();
    let d = RectDomain::new(0.02, 0.001, 1.0).unwrap();
    let g = build_grid(&d, 16, 20).unwrap();
    let sol = solve_dirichlet(&g, &c, &p, &SolverOptions::default()).unwrap();
    let mut max_sq: f64 = 0.0;
    for (i, j, _, y) in g.nodes() {
        let k = g.idx(i, j);
        assert!((sol.z_field[k] - 0.5 * y.sqrt() * sol.du_dy[k]).abs() <= 1e-15 * (1.0 + sol.du_dy[k].abs()));
        assert!((sol.zhat_field[k] - y.sqrt() * sol.du_dw[k]).abs() <= 1e-15 * (1.0 + sol.du_dw[k].abs()));
        max_sq = max_sq.max(y * sol.du_dw[k] * sol.du_dw[k]);
    }
    let b = sup_bounds(&sol);
    assert!((b.zhat_sq_max - max_sq).abs() <= 1e-12 * max_sq);
    assert_eq!(b.c_tilde_sup, sol.c_tilde_sup);
}

#[test]
fn symmetric_problem_gives_antisymmetric_zhat() {
    let p = prefs();
    let mut params = HestonParams::reference();
    params.lambda = 0.0;
    let c = heston_coefficients(&params).unwrap();
    let d = RectDomain::new(0.02, 0.001, 1.0).unwrap();
    let g = build_grid(&d, 19, 20).unwrap();
    let sol = solve_dirichlet(&g, &c, &p, &SolverOptions::default()).unwrap();
    let scale = sol.zhat_field.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(scale > 0.0);
    for j in 0..g.col_len() {
        for i in 0..g.row_len() {
            let mirror = g.nw + 1 - i;
            let a = sol.zhat_field[g.idx(i, j)];
            let b = sol.zhat_field[g.idx(mirror, j)];
            assert!((a + b).abs() <= 1e-9 * scale, "({i},{j}): {a} vs {b}");
            assert!((sol.u[g.idx(i, j)] - sol.u[g.idx(mirror, j)]).abs() <= 1e-12);
        }
    }
}

#[test]
fn shrinking_band_drives_solution_to_zero() {
    let p = prefs();
    let mut params = HestonParams::reference();
    params.lambda = 0.0;
    params.r = 0.0;
    let c = heston_coefficients(&params).unwrap();
    let mut maxima = Vec::new();
    for l in [0.08, 0.04, 0.02, 0.01] {
        let d = RectDomain::new(l, 0.001, 1.0).unwrap();
        let g = build_grid(&d, 16, 40).unwrap();
        let sol = solve_dirichlet(&g, &c, &p, &SolverOptions::default()).unwrap();
        maxima.push(sol.max_abs_u());
    }
    assert!(maxima[0] > 0.0);
    for pair in maxima.windows(2) {
        assert!(pair[1] < pair[0], "{maxima:?}");
    }
    assert!(maxima[3] < 0.1 * maxima[0], "{maxima:?}");
}

#[test]
fn truncation_level_is_raised_when_needed() {
    let p = prefs();
    let d = RectDomain::new(0.4, 0.05, 0.6).unwrap();
    let g = build_grid(&d, 15, 15).unwrap();
    // large forcing pushes |u| beyond the initial truncation level
    let forcing: Vec<f64> = g.nodes().map(|_| -40.0).collect();
    let opts = SolverOptions {
        c_bar: 0.05,
        c_bar_max: 40.0,
        ..SolverOptions::default()
    };
    let sol = solve_dirichlet_forced(&g, &Correlated, &p, &opts, &forcing).unwrap();
    assert!(sol.c_bar > 0.05, "c_bar {} max {}", sol.c_bar, sol.max_abs_u());
    assert!(sol.max_abs_u() <= sol.c_bar);
    let capped = SolverOptions {
        c_bar: 0.05,
        c_bar_max: 0.05,
        ..SolverOptions::default()
    };
    assert!(matches!(
        solve_dirichlet_forced(&g, &Correlated, &p, &capped, &forcing),
        Err(PdeError::CBarExceeded { .. })
    ));
}

#[test]
fn rounded_corners_pin_cut_nodes() {
    let p = prefs();
    let c = heston();
    let d = RectDomain::new(0.02, 0.001, 1.0).unwrap();
    let g = build_grid(&d, 20, 20).unwrap();
    let opts = SolverOptions {
        corner_radius: Some(0.25),
        ..SolverOptions::default()
    };
    let sol = solve_dirichlet(&g, &c, &p, &opts).unwrap();
    let mut cut = 0;
    for (i, j, w, y) in g.nodes() {
        if cut_corner(&g, w, y, 0.25) {
            cut += 1;
            assert_eq!(sol.u[g.idx(i, j)], 0.0);
        }
    }
    assert!(cut > 0);
    assert!(!cut_corner(&g, 0.0, 0.5, 0.25));
}

#[test]
fn option_validation() {
    let bad = SolverOptions {
        damping: 0.0,
        ..SolverOptions::default()
    };
    assert!(bad.validate().is_err());
    let bad = SolverOptions {
        tolerance: -1.0,
        ..SolverOptions::default()
    };
    assert!(bad.validate().is_err());
    assert_eq!("Picard".parse::<Scheme>().unwrap(), Scheme::Picard);
    assert!("gauss".parse::<Scheme>().is_err());
}
