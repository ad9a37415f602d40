//! Embedded invariant checks, runnable from the command line.

use crate::dirac_nrl::{free_dirac_kernel, DiracEnergy};
use crate::geometry::{discretize, CurveDescriptor, DiscretizedCurve};
use crate::interactions::InteractionSpec;
use crate::layer_operators::{assemble_layers, assemble_m, one_sided_traces, spectral_norm, AssemblyMethod, Need, Side, SpectralParam};
use crate::quadrature::adaptive_complex;
use crate::special_functions::{i01_complex, k0, k01, k1, kappa_of};
use crate::spectral_solver::{krein_apply, BsProblem, Grid};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

type C = Complex64;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value <= tolerance }
    }
}

/// `|∫₀^∞ K₀(s) ds - π/2|`.
pub fn integral_k0_defect() -> f64 {
    // s = t² removes the logarithmic endpoint singularity
    let head = adaptive_complex(|t| k0(C::new(t * t, 0.0)) * (2.0 * t), 0.0, 1.0, 1e-15);
    let tail = adaptive_complex(|s| k0(C::new(s, 0.0)), 1.0, 60.0, 1e-15);
    ((head + tail).re - PI / 2.0).abs()
}

/// Largest relative defect of `K₀' = -K₁` by central differences.
pub fn k0_derivative_defect() -> f64 {
    let pts = [C::new(0.1, 0.0), C::new(1.0, 0.0), C::new(5.0, 0.0), C::new(20.0, 0.0), C::new(0.7, -1.3), C::new(3.0, 2.0)];
    pts.iter()
        .map(|&t| {
            let h = 1e-5 * t.norm();
            let d = (k0(t + h) - k0(t - h)) / (2.0 * h);
            (d + k1(t)).norm() / k1(t).norm()
        })
        .fold(0.0, f64::max)
}

/// `‖M(w) - M(w̄)*‖`.
pub fn weyl_symmetry_defect(curve: &DiscretizedCurve, w: C) -> f64 {
    let m = assemble_m(curve, &SpectralParam::new(w).expect("w off the cut")).to_dense();
    let mb = assemble_m(curve, &SpectralParam::new(w.conj()).expect("w off the cut")).to_dense();
    spectral_norm(&(m - mb.adjoint()))
}

/// `‖W̃(w) + W(w̄)*‖`.
pub fn w_adjoint_defect(curve: &DiscretizedCurve, w: C) -> f64 {
    let need = Need { s: false, w: true, wt: true };
    let a = assemble_layers(curve, &SpectralParam::new(w).expect("w off the cut"), need, AssemblyMethod::Auto);
    let b = assemble_layers(curve, &SpectralParam::new(w.conj()).expect("w off the cut"), need, AssemblyMethod::Auto);
    spectral_norm(&(a.wt.expect("requested") + b.w.expect("requested").adjoint()))
}

/// Nodewise relative defects of the jump relations for densities `φ`:
/// `2n(γ⁺WLφ - γ⁻WLφ) = φ`, `γ⁺SLφ = γ⁻SLφ` and `2n̄(γ⁺∂_z̄SLφ - γ⁻∂_z̄SLφ) = φ`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct JumpDefects {
    pub wl_dirichlet: f64,
    pub sl_continuity: f64,
    pub sl_wirtinger: f64,
}

pub fn jump_defects(curve: &DiscretizedCurve, w: C, phi: &[C]) -> JumpDefects {
    let p = SpectralParam::new(w).expect("w off the cut");
    let zero = vec![C::new(0.0, 0.0); curve.n_nodes];
    let peak = phi.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let (wp, _) = one_sided_traces(curve, &p, &zero, phi, Side::Plus).expect("traces");
    let (wm, _) = one_sided_traces(curve, &p, &zero, phi, Side::Minus).expect("traces");
    let (sp, dp) = one_sided_traces(curve, &p, phi, &zero, Side::Plus).expect("traces");
    let (sm, dm) = one_sided_traces(curve, &p, phi, &zero, Side::Minus).expect("traces");
    let sl_peak = sp.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut out = JumpDefects { wl_dirichlet: 0.0, sl_continuity: 0.0, sl_wirtinger: 0.0 };
    for j in 0..curve.n_nodes {
        let n = curve.complex_normals[j];
        out.wl_dirichlet = out.wl_dirichlet.max(((wp[j] - wm[j]) * n * 2.0 - phi[j]).norm() / peak);
        out.sl_continuity = out.sl_continuity.max((sp[j] - sm[j]).norm() / sl_peak);
        out.sl_wirtinger = out.sl_wirtinger.max(((dp[j] - dm[j]) * n.conj() * 2.0 - phi[j]).norm() / peak);
    }
    out
}

/// `((-Δ-w)⁻¹g)(x)` for the radial Gaussian `g = exp(-|x|²/2s²)` at radius
/// `r`, from the radial Green's function `I₀(κr_<)K₀(κr_>)`.
pub fn radial_gaussian_resolvent(w: C, s: f64, r: f64) -> C {
    let kappa = kappa_of(w).expect("w off the cut");
    let g = |t: f64| (-t * t / (2.0 * s * s)).exp() * t;
    let inner = if r > 0.0 { adaptive_complex(|t| i01_complex(kappa * t).0 * g(t), 0.0, r, 1e-14) } else { C::new(0.0, 0.0) };
    let outer = adaptive_complex(|t| k01(kappa * t).0 * g(t), r, r.max(0.0) + 14.0 * s, 1e-14);
    let k0r = if r > 0.0 { k01(kappa * r).0 } else { C::new(0.0, 0.0) };
    k0r * inner + i01_complex(kappa * r).0 * outer
}

/// Largest relative error of `(T_0 - w)⁻¹` (Krein route with `B = 0`)
/// against the radial oracle, over a panel of shifted Gaussians.
pub fn zero_interaction_resolvent_defect(curve: &DiscretizedCurve, grid: Grid, w: C) -> f64 {
    let problem = BsProblem::new(curve, &InteractionSpec::zero(curve)).expect("zero spec");
    let pts = grid.points();
    let panel = [(C::new(0.0, 0.0), 0.6), (C::new(0.4, -0.3), 0.5), (C::new(-0.6, 0.5), 0.55)];
    let mut worst: f64 = 0.0;
    for (x0, s) in panel {
        let rhs = grid.sample(|x| C::new((-(x - x0).norm_sqr() / (2.0 * s * s)).exp(), 0.0));
        let out = krein_apply(&problem, grid, w, &rhs).expect("B = 0 is never singular");
        let (mut err, mut peak) = (0.0f64, 0.0f64);
        for q in (0..pts.len()).step_by(13) {
            let o = radial_gaussian_resolvent(w, s, (pts[q] - x0).norm());
            err = err.max((out.values[q] - o).norm());
            peak = peak.max(o.norm());
        }
        worst = worst.max(err / peak);
    }
    worst
}

/// `max |R(z̄)(d) - R(z)(-d)*|` on sampled free Dirac kernel entries.
pub fn dirac_kernel_symmetry_defect() -> f64 {
    let mut worst: f64 = 0.0;
    for (c, z) in [(1.0, C::new(0.2, 0.3)), (10.0, C::new(49.0, 1.0))] {
        let e = DiracEnergy::new(c, z);
        for d in [C::new(0.3, -0.1), C::new(-1.2, 0.7)] {
            let a = free_dirac_kernel(&e.conj(), d);
            let b = free_dirac_kernel(&e, -d);
            for r in 0..2 {
                for q in 0..2 {
                    worst = worst.max((a[r][q] - b[q][r].conj()).norm() / (1.0 + a[r][q].norm()));
                }
            }
        }
    }
    worst
}

/// Runs every check on a unit circle with `n` nodes.
pub fn run_all(n: usize) -> Vec<Check> {
    let curve = discretize(&CurveDescriptor::circle(1.0), n).expect("circle");
    let phi: Vec<C> = (0..n).map(|j| C::from_polar(1.0, 2.0 * PI * j as f64 / n as f64) + 0.5).collect();
    let jumps = jump_defects(&curve, C::new(-1.0, 0.0), &phi);
    let weyl = [C::new(-1.0, 0.0), C::new(-10.0, 0.0), C::new(1.0, 1.0)];
    vec![
        Check::new("integral_K0_equals_pi_over_2", integral_k0_defect(), 1e-8),
        Check::new("K0_derivative_equals_minus_K1", k0_derivative_defect(), 1e-6),
        Check::new("weyl_symmetry_M(w)=M(conj w)*", weyl.iter().map(|&w| weyl_symmetry_defect(&curve, w)).fold(0.0, f64::max), 1e-8),
        Check::new("W_tilde_equals_minus_W_adjoint", weyl.iter().map(|&w| w_adjoint_defect(&curve, w)).fold(0.0, f64::max), 1e-8),
        Check::new("jump_WL_dirichlet", jumps.wl_dirichlet, 1e-4),
        Check::new("jump_SL_continuity", jumps.sl_continuity, 1e-4),
        Check::new("jump_SL_wirtinger", jumps.sl_wirtinger, 1e-4),
        Check::new("zero_interaction_resolvent", zero_interaction_resolvent_defect(&curve, Grid::new(48, 5.0), C::new(-1.0, 0.5)), 1e-4),
        Check::new("dirac_kernel_conjugate_symmetry", dirac_kernel_symmetry_defect(), 1e-12),
    ]
}

/// Dense matrix check helper used by the command-line dump.
pub fn max_abs(m: &DMatrix<C>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}
