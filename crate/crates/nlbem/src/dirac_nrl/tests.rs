use super::*;
use crate::geometry::{discretize, CurveDescriptor};
use crate::layer_operators::assemble_s;
use crate::quadrature::gl;

fn circle(n: usize) -> DiscretizedCurve {
    discretize(&CurveDescriptor::circle(1.0), n).unwrap()
}

fn smooth_pair(curve: &DiscretizedCurve, amp: f64) -> (Vec<Mat2>, Vec<Mat2>) {
    let f: Vec<Mat2> = (0..curve.n_nodes)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / curve.n_nodes as f64;
            [
                [C::new(amp * (1.0 + 0.3 * t.cos()), 0.0), C::new(0.2 * amp * t.sin(), 0.1 * amp)],
                [C::new(0.0, 0.2 * amp * t.cos()), C::new(0.5 * amp, 0.0)],
            ]
        })
        .collect();
    let h = [[C::new(-1.0, 0.0), C::new(0.3, 0.2)], [C::new(0.3, -0.2), C::new(0.5, 0.0)]];
    hermitian_pair(&f, h)
}

#[test]
fn asymmetric_pair_is_rejected() {
    let c = circle(32);
    let (f, mut g) = smooth_pair(&c, 1.0);
    g[3][0][1] += C::new(0.1, 0.0);
    assert!(matches!(DiracModel::new(&c, f.clone(), g, 4.0, false), Err(DiracError::AsymmetricPair(_))));
    let (_, g) = smooth_pair(&c, 1.0);
    assert!(DiracModel::new(&c, f, g, 4.0, false).is_ok());
}

#[test]
fn n_blocks_are_the_rescaled_weyl_blocks() {
    let c = circle(48);
    let (f, g) = smooth_pair(&c, 1.0);
    let w = C::new(-1.0, 1.0);
    let cc = 12.0;
    let model = DiracModel::new(&c, f, g, cc, true).unwrap();
    let set = assemble_dirac_boundary(&c, &model, DiracEnergy::shifted(cc, w)).unwrap();
    let wc = w + w * w / (cc * cc);
    let s = assemble_s(&c, &SpectralParam::new(wc).unwrap()).matrix;
    let n = c.n_nodes;
    let amax = |m: &DMatrix<C>| m.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let d22 = amax(&(set.n_mat.view((n, n), (n, n)) - &s * w));
    let d11 = amax(&(set.n_mat.view((0, 0), (n, n)) - &s * (1.0 + w / (cc * cc))));
    assert!(d22 < 1e-12 * amax(&s) * w.norm(), "{d22}");
    assert!(d11 < 1e-12 * amax(&s), "{d11}");
}

#[test]
fn weyl_limit_has_second_order_rate() {
    let c = circle(64);
    let (rows, slope) = weyl_limit_rates(&c, C::new(-1.0, 1.0), &[10.0, 30.0, 100.0]).unwrap();
    assert!((slope + 2.0).abs() <= 0.2, "{slope} {rows:?}");
}

#[test]
fn potential_limit_has_first_order_rate() {
    let c = circle(64);
    let n = c.n_nodes;
    let dens: Vec<DVector<C>> = [(0, 0), (1, 0), (0, 2)]
        .iter()
        .map(|&(m1, m2)| {
            DVector::from_fn(2 * n, |r, _| {
                let t = 2.0 * PI * (r % n) as f64 / n as f64;
                if r < n { C::from_polar(1.0, m1 as f64 * t) } else { C::from_polar(0.5, m2 as f64 * t) }
            })
        })
        .collect();
    let (rows, slope) = potential_limit_rates(&c, C::new(-1.0, 1.0), &[10.0, 30.0, 100.0], Grid::new(32, 3.0), &dens).unwrap();
    assert!(slope <= -1.0 + 0.2, "{slope} {rows:?}");
}

#[test]
fn kernel_conjugate_pair_symmetry() {
    for (c, z) in [(1.0, C::new(0.2, 0.3)), (5.0, C::new(-3.0, 1.5)), (20.0, C::new(150.0, -2.0))] {
        let e = DiracEnergy::new(c, z);
        for d in [C::new(0.3, -0.1), C::new(-1.2, 0.7), C::new(0.05, 0.02)] {
            let a = free_dirac_kernel(&e.conj(), d);
            let b = free_dirac_kernel(&e, -d);
            for r in 0..2 {
                for q in 0..2 {
                    assert!((a[r][q] - b[q][r].conj()).norm() <= 1e-13 * (1.0 + a[r][q].norm()));
                }
            }
        }
    }
}

/// Convolution of the explicit free kernel with a Gaussian, in polar
/// coordinates around the evaluation point.
fn kernel_oracle(e: &DiracEnergy, x: C, rhs: [&dyn Fn(C) -> C; 2]) -> [C; 2] {
    let rule = gl(40);
    let breaks = [0.0, 0.25, 0.5, 1.0, 2.0, 3.5, 5.0, 7.0];
    let nt = 96;
    let mut out = [ZERO; 2];
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        for (t, wt) in rule.0.iter().zip(&rule.1) {
            let rho = 0.5 * (b - a) * t + 0.5 * (a + b);
            let wr = 0.5 * (b - a) * wt * rho * 2.0 * PI / nt as f64;
            for k in 0..nt {
                let d = C::from_polar(rho, 2.0 * PI * (k as f64 + 0.5) / nt as f64);
                let kern = free_dirac_kernel(e, d);
                let f = [rhs[0](x - d), rhs[1](x - d)];
                for r in 0..2 {
                    out[r] += (kern[r][0] * f[0] + kern[r][1] * f[1]) * wr;
                }
            }
        }
    }
    out
}

#[test]
fn free_resolvent_matches_kernel_convolution() {
    let grid = Grid::new(48, 5.0);
    let g1 = |x: C| (-(x - C::new(0.2, 0.0)).norm_sqr() / 0.72).exp() * C::new(1.0, 0.0);
    let g2 = |x: C| (-(x + C::new(0.1, 0.3)).norm_sqr() / 0.8).exp() * C::new(0.0, 0.7);
    let rhs = [grid.sample(g1), grid.sample(g2)];
    for (c, z) in [(1.0, C::new(0.1, 0.4)), (4.0, C::new(9.0, 1.0))] {
        let e = DiracEnergy::new(c, z);
        let u = free_dirac_resolvent(grid, &e, &rhs);
        let pts = grid.points();
        let (mut err, mut peak) = (0.0f64, 0.0f64);
        for q in [24 * 48 + 24, 20 * 48 + 30, 30 * 48 + 17, 10 * 48 + 40] {
            let o = kernel_oracle(&e, pts[q], [&g1, &g2]);
            for k in 0..2 {
                err = err.max((u[k][q] - o[k]).norm());
                peak = peak.max(o[k].norm());
            }
        }
        assert!(err <= 1e-4 * peak, "c={c}: {err} vs {peak}");
    }
}

#[test]
fn zero_interaction_is_free_resolvent() {
    let c = circle(32);
    let grid = Grid::new(48, 4.5);
    let zero = vec![[[ZERO; 2]; 2]; 32];
    let model = DiracModel::new(&c, zero.clone(), zero, 2.0, false).unwrap();
    let panel = default_panel(grid);
    let out = dirac_resolvent_apply(&c, &model, grid, C::new(0.5, 0.5), &panel[1]).unwrap();
    for k in 0..2 {
        assert_eq!(out.values[k], out.free[k]);
    }
}

#[test]
fn resolvent_identity_and_symmetry() {
    let c = circle(48);
    let grid = Grid::new(48, 4.5);
    let (f, g) = smooth_pair(&c, 1.5);
    let model = DiracModel::new(&c, f, g, 1.5, false).unwrap();
    let panel = default_panel(grid);
    let (z1, z2) = (C::new(0.3, 0.5), C::new(-0.2, -0.4));
    let s1 = DiracSolver::new(&c, &model, grid, DiracEnergy::new(1.5, z1)).unwrap();
    let s2 = DiracSolver::new(&c, &model, grid, DiracEnergy::new(1.5, z2)).unwrap();
    let field = DiracField::from_values(grid, &panel[2]);
    let r1 = s1.apply_field(&field).unwrap().eval_grid(&c).unwrap();
    let r2f = s2.apply_field(&field).unwrap();
    let r2 = r2f.eval_grid(&c).unwrap();
    let r12 = s1.apply_field(&r2f).unwrap().eval_grid(&c).unwrap();
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..2 {
        let lhs: Vec<C> = r1[k].iter().zip(&r2[k]).map(|(a, b)| a - b).collect();
        let diff: Vec<C> = lhs.iter().zip(&r12[k]).map(|(a, b)| a - b * (z1 - z2)).collect();
        num += grid.norm(&diff).powi(2);
        den += grid.norm(&lhs).powi(2);
    }
    assert!(num.sqrt() <= 1e-3 * den.sqrt(), "{}", (num / den).sqrt());

    // the fast path agrees with the field path
    let fast = s1.apply(&panel[2]).unwrap();
    for k in 0..2 {
        let d: f64 = fast.values[k].iter().zip(&r1[k]).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(d < 1e-12 * (1.0 + fast.values[k].iter().map(|v| v.norm()).fold(0.0, f64::max)));
    }

    // hermitian at a real energy in the gap
    let z = C::new(0.17, 0.0);
    let s = DiracSolver::new(&c, &model, grid, DiracEnergy::new(1.5, z)).unwrap();
    let a = s.apply_field(&DiracField::from_values(grid, &panel[0])).unwrap().inner_smooth(&c, &panel[4]);
    let b = s.apply_field(&DiracField::from_values(grid, &panel[4])).unwrap().inner_smooth(&c, &panel[0]).conj();
    assert!((a - b).norm() <= 1e-6 * a.norm(), "{a} vs {b}");
}

#[test]
fn gap_determinant_is_real_holomorphic_and_has_few_roots() {
    let c = circle(48);
    let models: Vec<DiracModel> = [0.5, 1.5, 3.0, 6.0]
        .iter()
        .map(|&a| {
            let (f, g) = smooth_pair(&c, a);
            DiracModel::new(&c, f, g, 1.0, false).unwrap()
        })
        .collect();
    let scans = gap_scan(&c, &models, 121).unwrap();
    let mut any = 0;
    for s in &scans {
        assert!(s.imag_ratio < 1e-10, "{}", s.imag_ratio);
        assert!(s.count <= 2, "{:?}", s.roots);
        any += s.count;
    }
    assert!(any > 0, "no model produced a gap eigenvalue");
    let cr = cauchy_riemann_defect(&c, &models[2], C::new(0.1, 0.2), 1e-3).unwrap();
    assert!(cr < 1e-5, "{cr}");
}

#[test]
fn nonrelativistic_limit_rate() {
    let c = circle(48);
    let (f, g) = diagonal_pair(&c, [-2.0, 0.5], |_, t| [1.0 + 0.3 * t.cos(), 0.8 + 0.2 * (2.0 * t).sin()]);
    let grid = Grid::new(48, 4.5);
    let panel = default_panel(grid);
    let study = nr_limit_study(&c, f, g, C::new(-1.0, 1.0), &[16.0, 32.0, 64.0, 128.0], grid, &panel).unwrap();
    assert!((study.slope + 1.0).abs() <= 0.15, "{study:?}");
    let leak: Vec<f64> = study.rows.iter().map(|r| r.leakage).collect();
    assert!(leak.windows(2).all(|p| p[1] < p[0]), "{leak:?}");
}
