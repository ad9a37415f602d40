use super::*;
use crate::geometry::{discretize, CurveDescriptor};
use crate::interactions::{condition_s_family, factorize, EigenLaw};
use crate::quadrature::adaptive_complex;
use crate::special_functions::{bessel_ik_real, i01_complex, k01};

fn circle(r: f64, n: usize) -> DiscretizedCurve {
    discretize(&CurveDescriptor::circle(r), n).unwrap()
}

/// Root of `1 + ηR I₀(κR)K₀(κR)` by bisection in `κ`.
fn delta_shell_oracle(eta: f64, r: f64, lo: f64, hi: f64) -> f64 {
    let g = |k: f64| {
        let (i0, k0) = bessel_ik_real(0, k * r).unwrap();
        1.0 + eta * r * i0 * k0
    };
    let (mut a, mut b) = (lo, hi);
    assert!(g(a) * g(b) < 0.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(a) * g(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

#[test]
fn zero_interaction_has_unit_indicator() {
    let c = circle(1.0, 32);
    let pr = BsProblem::new(&c, &InteractionSpec::zero(&c)).unwrap();
    for w in [-0.01, -1.0, -50.0] {
        let s = pr.sample(w).unwrap();
        assert!((s.indicator - 1.0).abs() < 1e-15);
    }
    let mut cfg = ScanConfig::new(-50.0, -0.01);
    cfg.points = 64;
    let found = find_eigenvalues(&pr, &cfg).unwrap();
    assert!(found.eigenvalues.is_empty());
    assert!(found.warnings.iter().any(|w| w.starts_with("NoBracket")));
}

#[test]
fn rank_and_sqrt_paths_share_spectrum() {
    let c = discretize(&CurveDescriptor::ellipse(1.5, 1.0), 48).unwrap();
    let spec = InteractionSpec::elementary(&c, 2.0, C::new(0.5, 0.3), 1.0);
    let rank = BsProblem::with_factorization(&c, factorize(&spec, &c, FactorMode::Rank).unwrap(), "rank");
    let sqrt = BsProblem::with_factorization(&c, factorize(&spec, &c, FactorMode::Sqrt).unwrap(), "sqrt");
    assert_eq!(sqrt.dim_k(), 2);
    for w in [-0.3, -4.0] {
        let eig = |pr: &BsProblem| {
            let (_, a) = pr.system(C::new(w, 0.0)).unwrap();
            let mut e: Vec<C> = nalgebra::Schur::new(a).eigenvalues().unwrap().iter().cloned().collect();
            e.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
            e
        };
        let (a, b) = (eig(&rank), eig(&sqrt));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-8, "{x} vs {y}");
        }
    }
}

#[test]
fn delta_shell_circle_matches_transcendental_root() {
    let c = circle(1.0, 64);
    let spec = InteractionSpec::delta_shell(&c, -2.0, 16);
    let pr = BsProblem::new(&c, &spec).unwrap();
    assert_eq!(pr.needed_blocks(), (true, false));
    let mut cfg = ScanConfig::new(-50.0, -1e-2);
    cfg.points = 64;
    let found = find_eigenvalues(&pr, &cfg).unwrap();
    assert_eq!(found.count(), 1, "{:?}", found.values());
    let kappa = delta_shell_oracle(-2.0, 1.0, 1.0, 1.1);
    let e = &found.eigenvalues[0];
    assert!((e.w_star + kappa * kappa).abs() < 1e-8 * kappa * kappa, "{} vs {}", e.w_star, -kappa * kappa);
    assert!(e.residual_bs < 1e-8);
    assert!(e.residual_pde < 1e-3, "pde {}", e.residual_pde);
    assert!(e.residual_tc < 1e-3, "tc {}", e.residual_tc);
}

#[test]
fn scaling_covariance_on_circle() {
    let run = |r: f64, eta: f64| {
        let c = circle(r, 48);
        let pr = BsProblem::new(&c, &InteractionSpec::delta_shell(&c, eta, 8)).unwrap();
        let mut cfg = ScanConfig::new(-20.0, -1e-2);
        cfg.points = 64;
        cfg.residuals = false;
        find_eigenvalues(&pr, &cfg).unwrap().values()
    };
    let a = run(1.0, -2.0);
    let b = run(2.0, -1.0);
    assert_eq!(a.len(), 1);
    assert_eq!(b.len(), 1);
    assert!((b[0] - a[0] / 4.0).abs() < 1e-6 * b[0].abs());
}

#[test]
fn condition_s_mu_limits() {
    let c = circle(1.0, 64);
    let spec = condition_s_family(EigenLaw::Geometric { ratio: 0.5 }, 6, &c).unwrap();
    let pr = BsProblem::new(&c, &spec).unwrap();
    assert_eq!(pr.needed_blocks(), (true, false));
    let s = pr.sample(-1e6).unwrap();
    for k in 0..2 {
        let b = spec.law_values[k];
        assert!((s.mu_values[k] - b / 8.0).abs() <= 0.1 * b / 8.0, "mu_{k} = {}", s.mu_values[k]);
    }
}

#[test]
fn condition_s_low_modes_follow_asymptote() {
    let c = circle(1.0, 64);
    let spec = condition_s_family(EigenLaw::Geometric { ratio: 0.5 }, 3, &c).unwrap();
    let pr = BsProblem::new(&c, &spec).unwrap();
    let mut cfg = ScanConfig::for_spec(&spec);
    cfg.points = 64;
    let found = find_eigenvalues(&pr, &cfg).unwrap();
    let vals = found.values();
    assert_eq!(vals.len(), 3, "{vals:?}");
    for (w, t) in vals.iter().zip(spec.asymptote_targets().iter().rev()) {
        assert!((w - t).abs() <= 0.2 * t.abs(), "{w} vs {t}");
    }
    for e in &found.eigenvalues {
        assert!(e.residual_bs < 1e-8 && e.residual_tc < 1e-3 && e.residual_pde < 1e-3, "{e:?}");
    }
}

#[test]
fn elementary_rank_bound() {
    let c = circle(1.0, 32);
    for (a, b, g) in [(-3.0, C::new(1.0, 2.0), -4.0), (4.0, C::new(0.0, -1.0), -0.5), (-5.0, C::new(0.0, 0.0), 0.0)] {
        let spec = InteractionSpec::elementary(&c, a, b, g);
        let pr = BsProblem::new(&c, &spec).unwrap();
        let mut cfg = ScanConfig::new(-200.0, -1e-4);
        cfg.points = 64;
        cfg.residuals = false;
        let found = find_eigenvalues(&pr, &cfg).unwrap();
        assert!(found.count() <= 2);
        for e in &found.eigenvalues {
            assert!(e.residual_bs < 1e-8, "{e:?}");
        }
    }
}

fn gaussian(center: C, sigma: f64, amp: C) -> impl Fn(C) -> C {
    move |x: C| amp * (-(x - center).norm_sqr() / (2.0 * sigma * sigma)).exp()
}

/// `(-Δ-w)⁻¹` of a radial Gaussian at distance `r` from its centre via the
/// radial Green's function `I₀(κr_<)K₀(κr_>)`.
fn radial_oracle(w: C, sigma: f64, r: f64) -> C {
    let kappa = crate::special_functions::kappa_of(w).unwrap();
    let g = |s: f64| (-s * s / (2.0 * sigma * sigma)).exp();
    let inner = adaptive_complex(|s| i01_complex(kappa * s).0 * g(s) * s, 0.0, r, 1e-14);
    let outer = adaptive_complex(|s| k01(kappa * s).0 * g(s) * s, r.max(1e-300), r + 14.0 * sigma, 1e-14);
    let k0r = if r > 0.0 { k01(kappa * r).0 } else { C::new(0.0, 0.0) };
    k0r * inner + i01_complex(kappa * r).0 * outer
}

#[test]
fn free_resolvent_matches_radial_oracle() {
    let grid = Grid::new(48, 5.0);
    for w in [C::new(-1.0, 0.0), C::new(-1.0, 1.0)] {
        let center = C::new(0.3, -0.2);
        let rhs = grid.sample(gaussian(center, 0.6, C::new(1.0, 0.0)));
        let u = free_resolvent(grid, w, &rhs);
        let pts = grid.points();
        let mut err: f64 = 0.0;
        let mut peak: f64 = 0.0;
        for q in (0..pts.len()).step_by(97) {
            let o = radial_oracle(w, 0.6, (pts[q] - center).norm());
            err = err.max((u[q] - o).norm());
            peak = peak.max(o.norm());
        }
        assert!(err < 1e-6 * peak, "{err} vs {peak}");
    }
}

#[test]
fn krein_zero_and_identities() {
    let c = circle(1.0, 32);
    let grid = Grid::new(40, 4.5);
    let f = grid.sample(gaussian(C::new(0.4, 0.1), 0.6, C::new(1.0, 0.0)));
    let g = grid.sample(gaussian(C::new(-0.3, 0.5), 0.55, C::new(1.0, 0.0)));

    let zero = BsProblem::new(&c, &InteractionSpec::zero(&c)).unwrap();
    let out = krein_apply(&zero, grid, C::new(-1.0, 0.0), &f).unwrap();
    let d: f64 = out.values.iter().zip(&out.free).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(d == 0.0);

    let spec = InteractionSpec::elementary(&c, -1.5, C::new(0.4, 0.2), 0.7);
    let pr = BsProblem::new(&c, &spec).unwrap();

    // first resolvent identity
    let (w1, w2) = (C::new(-1.0, 0.5), C::new(-2.0, -0.3));
    let s1 = KreinSolver::new(&pr, grid, w1).unwrap();
    let s2 = KreinSolver::new(&pr, grid, w2).unwrap();
    let field = Field::from_values(grid, &f);
    let r1 = s1.apply_field(&field).unwrap().eval_grid(&c).unwrap();
    let r2f = s2.apply_field(&field).unwrap();
    let r2 = r2f.eval_grid(&c).unwrap();
    let r12 = s1.apply_field(&r2f).unwrap().eval_grid(&c).unwrap();
    let lhs: Vec<C> = r1.iter().zip(&r2).map(|(a, b)| a - b).collect();
    let rhs: Vec<C> = r12.iter().map(|z| z * (w1 - w2)).collect();
    let diff: Vec<C> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    assert!(grid.norm(&diff) < 1e-3 * grid.norm(&lhs), "{}", grid.norm(&diff) / grid.norm(&lhs));

    // self-adjointness at real w
    let s = KreinSolver::new(&pr, grid, C::new(-0.7, 0.0)).unwrap();
    let rf = s.apply_field(&Field::from_values(grid, &f)).unwrap();
    let rg = s.apply_field(&Field::from_values(grid, &g)).unwrap();
    let a = rf.inner_smooth(&c, &g);
    let b = rg.inner_smooth(&c, &f).conj();
    assert!((a - b).norm() < 1e-6 * a.norm(), "{a} vs {b}");
}

#[test]
fn asymptotic_trends_on_circle() {
    let c = circle(1.0, 128);
    let ones = DVector::from_element(128, C::new(1.0, 0.0));
    let proj = constants_projector(&c);
    let ws = [-1e2, -1e3, -1e4];
    let rows = asymptotic_study_s(&c, &[ones], &ws, Some(&proj)).unwrap();
    let e: Vec<f64> = rows.iter().map(|r| r.density_errors[0]).collect();
    assert!(strictly_decreasing(&e), "{e:?}");
    // √|w| I₀K₀(√|w|) - 1/2 for the constant mode
    for r in &rows {
        let k = r.w.abs().sqrt();
        let (i0, k0) = crate::special_functions::bessel_ik_real_scaled(0, k);
        assert!((r.density_errors[0] - (k * i0 * k0 - 0.5).abs()).abs() < 1e-9);
        assert!((r.compact_error.unwrap() - r.density_errors[0] / 2.0 * 2.0).abs() < 1e-9);
    }
    let w = asymptotic_study_w(&c, 0.25, &ws).unwrap();
    let s: Vec<f64> = w.rows.iter().map(|r| r.scaled).collect();
    assert!(strictly_decreasing(&s), "{s:?}");
    assert!(w.growth_exponent <= 0.3);
}
