//! Two-dimensional Dirac operator `-ic σ·∇ + σ₃c²/2` with the non-local
//! shell interaction `c|Fδ_Σ⟩⟨Gδ_Σ|`, handled at the resolvent level, and
//! its non-relativistic limit towards `T_B ⊗ diag(1, 0)`.
//!
//! Energies are carried as `(a₊, a₋) = (z/c + c/2, z/c - c/2)`. The scalar
//! layer operators are evaluated at `ζ = a₊a₋ = z²/c² - c²/4`, which for the
//! shifted energy `z = w + c²/2` is `w + w²/c²` without cancellation.

use crate::geometry::DiscretizedCurve;
use crate::interactions::{dirac_symmetry_defect, InteractionError, InteractionSpec, Mat2, V_DIAG};
use crate::layer_operators::{assemble_layers, spectral_norm, AssemblyMethod, GammaField, LayerError, Need, SpectralParam};
use crate::rootfind::linear_fit;
use crate::spectral_solver::{BsProblem, Grid, GridSpectrum, KreinSolver, SolverError};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};
use thiserror::Error;

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);
const I: C = C::new(0.0, 1.0);

/// Relative tolerance of the `Π*_FΠ_G = Π*_GΠ_F` check.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Smallest singular value of `I + Π_G𝒞Π*_F` below which `z` is treated
/// as an eigenvalue.
pub const SINGULAR_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum DiracError {
    #[error("Π*_FΠ_G ≠ Π*_GΠ_F (defect {0:.3e})")]
    AsymmetricPair(f64),
    #[error("I + Π_G C(z) Π_F* is singular at z = {z} (σ_min {indicator:.3e})")]
    MatrixSingular { z: C, indicator: f64 },
    #[error("log-log slope fit unstable (R² = {r2:.4})")]
    SlopeFitUnstable { r2: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Interaction(#[from] InteractionError),
}

/// Energy `z` together with `a± = z/c ± c/2` and `ζ = a₊a₋`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiracEnergy {
    pub c: f64,
    pub z: C,
    pub a_plus: C,
    pub a_minus: C,
    pub zeta: C,
}

impl DiracEnergy {
    pub fn new(c: f64, z: C) -> Self {
        let a_plus = z / c + c / 2.0;
        let a_minus = z / c - c / 2.0;
        Self { c, z, a_plus, a_minus, zeta: a_plus * a_minus }
    }

    /// `z = w + c²/2`.
    pub fn shifted(c: f64, w: C) -> Self {
        let a_plus = w / c + c;
        let a_minus = w / c;
        Self { c, z: w + c * c / 2.0, a_plus, a_minus, zeta: w + w * w / (c * c) }
    }

    pub fn conj(&self) -> Self {
        Self { c: self.c, z: self.z.conj(), a_plus: self.a_plus.conj(), a_minus: self.a_minus.conj(), zeta: self.zeta.conj() }
    }

    pub fn param(&self) -> Result<SpectralParam, LayerError> {
        SpectralParam::new(self.zeta)
    }
}

/// Interaction densities `F, G` (node-sampled 2×2 matrices) and `c`.
#[derive(Clone, Debug)]
pub struct DiracModel {
    pub f: Vec<Mat2>,
    pub g: Vec<Mat2>,
    pub c: f64,
    /// Use `F_c = S_cF`, `G_c = S_cG` with `S_c = diag(c^{-1/2}, c^{1/2})`.
    pub rescaled: bool,
}

impl DiracModel {
    pub fn new(curve: &DiscretizedCurve, f: Vec<Mat2>, g: Vec<Mat2>, c: f64, rescaled: bool) -> Result<Self, DiracError> {
        let n = curve.n_nodes;
        if f.len() != n || g.len() != n {
            return Err(DiracError::InvalidParameter(format!("F and G need {n} node matrices, got {} and {}", f.len(), g.len())));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(DiracError::InvalidParameter(format!("c must be positive, got {c}")));
        }
        let scale = |a: &[Mat2]| a.iter().flat_map(|m| m.iter().flatten()).map(|z| z.norm()).fold(0.0, f64::max);
        let defect = dirac_symmetry_defect(&f, &g);
        if defect > SYMMETRY_TOL * (1.0 + scale(&f) * scale(&g)) {
            return Err(DiracError::AsymmetricPair(defect));
        }
        Ok(Self { f, g, c, rescaled })
    }

    pub fn with_c(&self, c: f64) -> Self {
        Self { c, ..self.clone() }
    }

    /// Diagonal of `S_c` (or of `I`).
    pub fn scaling(&self) -> [f64; 2] {
        if self.rescaled {
            [self.c.powf(-0.5), self.c.sqrt()]
        } else {
            [1.0, 1.0]
        }
    }

    /// `Π*_F` as a `2N×2` matrix (node coordinates), scaling included.
    pub fn pi_f_star(&self) -> DMatrix<C> {
        let n = self.f.len();
        let s = self.scaling();
        DMatrix::from_fn(2 * n, 2, |r, k| self.f[r % n][r / n][k] * s[r / n])
    }

    /// `Π_G` as a `2×2N` matrix, quadrature weights included.
    pub fn pi_g(&self, curve: &DiscretizedCurve) -> DMatrix<C> {
        let n = self.g.len();
        let s = self.scaling();
        DMatrix::from_fn(2, 2 * n, |k, r| self.g[r % n][r / n][k].conj() * s[r / n] * curve.weights[r % n])
    }

    /// The Schrödinger interaction `B = Π*_{VF}Π_{VG}` of the limit.
    pub fn limit_interaction(&self, curve: &DiscretizedCurve) -> Result<InteractionSpec, DiracError> {
        Ok(InteractionSpec::dirac_induced(curve, self.f.clone(), self.g.clone())?)
    }
}

/// Boundary operators of the Dirac problem at one energy.
#[derive(Clone, Debug)]
pub struct DiracLayerSet {
    pub energy: DiracEnergy,
    /// `𝒞^c(z)`.
    pub c_mat: DMatrix<C>,
    /// `S𝒞^c(z)S`; equals `N_c(w)` for the rescaled model at `z = w + c²/2`.
    pub n_mat: DMatrix<C>,
}

pub fn assemble_dirac_boundary(curve: &DiscretizedCurve, model: &DiracModel, energy: DiracEnergy) -> Result<DiracLayerSet, DiracError> {
    let c_mat = weyl_dirac(curve, &energy)?;
    let s = model.scaling();
    let n = curve.n_nodes;
    let n_mat = DMatrix::from_fn(2 * n, 2 * n, |r, q| c_mat[(r, q)] * s[r / n] * s[q / n]);
    Ok(DiracLayerSet { energy, c_mat, n_mat })
}

/// `𝒞^c(z) = [[a₊S, -2iW], [-2iW̃, a₋S]]` at `ζ`.
pub fn weyl_dirac(curve: &DiscretizedCurve, e: &DiracEnergy) -> Result<DMatrix<C>, DiracError> {
    let p = e.param()?;
    let set = assemble_layers(curve, &p, Need::ALL, AssemblyMethod::Auto);
    let (s, w, wt) = (set.s.expect("requested"), set.w.expect("requested"), set.wt.expect("requested"));
    let n = curve.n_nodes;
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&(&s * e.a_plus));
    m.view_mut((0, n), (n, n)).copy_from(&(&w * (-2.0 * I)));
    m.view_mut((n, 0), (n, n)).copy_from(&(&wt * (-2.0 * I)));
    m.view_mut((n, n), (n, n)).copy_from(&(&s * e.a_minus));
    Ok(m)
}

/// `V*M(w)V` with `V = diag(1, -2i)`.
pub fn weyl_v_conjugated(curve: &DiscretizedCurve, w: C) -> Result<DMatrix<C>, DiracError> {
    let m = crate::layer_operators::assemble_m(curve, &SpectralParam::new(w)?).to_dense();
    let n = curve.n_nodes;
    Ok(DMatrix::from_fn(2 * n, 2 * n, |r, q| V_DIAG[r / n].conj() * m[(r, q)] * V_DIAG[q / n]))
}

/// Free kernel of `(D₀^c - z)⁻¹` at separation `d = x - y`.
pub fn free_dirac_kernel(e: &DiracEnergy, d: C) -> Mat2 {
    let r = d.norm();
    let kappa = crate::special_functions::kappa_of(e.zeta).expect("ζ off the cut");
    let (k0, k1) = crate::special_functions::k01(kappa * r);
    let g = k0 / (2.0 * PI);
    // (iκ/2π)K₁(κr)/r · σ·d, with √ζ = iκ
    let h = I * kappa * k1 / (2.0 * PI * r);
    let c = e.c;
    [[g * e.a_plus / c, h * d.conj() / c], [h * d / c, g * e.a_minus / c]]
}

fn split(v: &DVector<C>) -> (Vec<C>, Vec<C>) {
    let n = v.len() / 2;
    (v.rows(0, n).iter().cloned().collect(), v.rows(n, n).iter().cloned().collect())
}

/// `Φ^c(z)ψ` at arbitrary points off the curve.
pub fn phi_apply(curve: &DiscretizedCurve, e: &DiracEnergy, psi: &DVector<C>, pts: &[C]) -> Result<[Vec<C>; 2], DiracError> {
    let p = e.param()?;
    let (p1, p2) = split(psi);
    let scale = |v: &[C], a: C| v.iter().map(|z| z * a).collect::<Vec<C>>();
    // upper: a₊SLψ₁ - 2iWLψ₂
    let up = GammaField::new(curve, p, &scale(&p1, e.a_plus), &scale(&p2, -2.0 * I))?.eval_many(pts);
    // lower: -2iW̃Lψ₁ + a₋SLψ₂ = ∂_z̄(SLφ₁ + WLφ₂) with φ = (-2iψ₁, -4ψ₂/a₊)
    let lo = GammaField::new(curve, p, &scale(&p1, -2.0 * I), &scale(&p2, -4.0 / e.a_plus))?.eval_many(pts);
    Ok([up.into_iter().map(|v| v.0).collect(), lo.into_iter().map(|v| v.1).collect()])
}

/// `(D₀^c - z)⁻¹` on a pair of spectra, via the exact symbol
/// `(1/c)[[a₊, ξ₁-iξ₂], [ξ₁+iξ₂, a₋]] / (|ξ|² - ζ)`.
pub fn free_dirac_spectra(f: &[GridSpectrum; 2], e: &DiracEnergy) -> [GridSpectrum; 2] {
    let u1 = f[0].resolvent(e.zeta);
    let u2 = f[1].resolvent(e.zeta);
    let ic = C::new(1.0 / e.c, 0.0);
    let mut up = u1.scaled(e.a_plus * ic);
    up.add_scaled(&u2.dz(), -2.0 * I * ic);
    let mut lo = u2.scaled(e.a_minus * ic);
    lo.add_scaled(&u1.dzb(), -2.0 * I * ic);
    [up, lo]
}

pub fn free_dirac_resolvent(grid: Grid, e: &DiracEnergy, rhs: &[Vec<C>; 2]) -> [Vec<C>; 2] {
    let f = [GridSpectrum::from_values(grid, &rhs[0]), GridSpectrum::from_values(grid, &rhs[1])];
    let u = free_dirac_spectra(&f, e);
    [u[0].values(), u[1].values()]
}

/// `Φ^c(z)ψ` term of a field.
#[derive(Clone, Debug)]
pub struct DiracLayer {
    pub energy: DiracEnergy,
    pub c_mat: Arc<DMatrix<C>>,
    pub psi: DVector<C>,
}

/// ℂ²-valued field: smooth spectra plus Dirac layer potentials.
#[derive(Clone, Debug)]
pub struct DiracField {
    pub smooth: [GridSpectrum; 2],
    pub layers: Vec<DiracLayer>,
}

impl DiracField {
    pub fn from_values(grid: Grid, values: &[Vec<C>; 2]) -> Self {
        Self { smooth: [GridSpectrum::from_values(grid, &values[0]), GridSpectrum::from_values(grid, &values[1])], layers: Vec::new() }
    }

    fn push_layer(&mut self, layer: DiracLayer) {
        if let Some(l) = self.layers.iter_mut().find(|l| l.energy.z == layer.energy.z) {
            l.psi += layer.psi;
        } else {
            self.layers.push(layer);
        }
    }

    pub fn eval_grid(&self, curve: &DiscretizedCurve) -> Result<[Vec<C>; 2], DiracError> {
        let grid = self.smooth[0].grid;
        let mut out = [self.smooth[0].values(), self.smooth[1].values()];
        let pts = grid.points();
        for l in &self.layers {
            let v = phi_apply(curve, &l.energy, &l.psi, &pts)?;
            for k in 0..2 {
                for (o, x) in out[k].iter_mut().zip(&v[k]) {
                    *o += x;
                }
            }
        }
        Ok(out)
    }

    /// `⟨self, g⟩` for smooth decaying `g`, with `⟨Φ(z)ψ, g⟩ = ⟨ψ, Φ(z)*g⟩_Σ`.
    pub fn inner_smooth(&self, curve: &DiscretizedCurve, g: &[Vec<C>; 2]) -> C {
        let grid = self.smooth[0].grid;
        let mut acc = grid.inner(&self.smooth[0].values(), &g[0]) + grid.inner(&self.smooth[1].values(), &g[1]);
        if self.layers.is_empty() {
            return acc;
        }
        let gs = [GridSpectrum::from_values(grid, &g[0]), GridSpectrum::from_values(grid, &g[1])];
        for l in &self.layers {
            let t = adjoint_trace_smooth(curve, &gs, &l.energy.conj());
            acc += l.psi.dotc(&t).conj() * curve.weights[0];
        }
        acc
    }
}

/// `Φ^c(z̄)*f = c·γ_D(D₀^c - z)⁻¹f` at the nodes.
fn adjoint_trace_smooth(curve: &DiscretizedCurve, f: &[GridSpectrum; 2], e: &DiracEnergy) -> DVector<C> {
    let n = curve.n_nodes;
    let u = free_dirac_spectra(f, e);
    let a = u[0].eval_at(&curve.points);
    let b = u[1].eval_at(&curve.points);
    DVector::from_fn(2 * n, |q, _| e.c * if q < n { a[q] } else { b[q - n] })
}

#[derive(Clone, Debug)]
pub struct DiracOutput {
    pub values: [Vec<C>; 2],
    pub free: [Vec<C>; 2],
    /// Coefficients `ξ = (I + Π_G𝒞Π*_F)⁻¹Π_G(1/√c)SΦ(z̄)*f`.
    pub xi: [C; 2],
}

/// `(D^c_{F,G} - z)⁻¹` for one energy.
pub struct DiracSolver<'a> {
    pub curve: &'a DiscretizedCurve,
    pub grid: Grid,
    pub energy: DiracEnergy,
    pub c_mat: Arc<DMatrix<C>>,
    pf: DMatrix<C>,
    pg: DMatrix<C>,
    x_inv: Matrix2<C>,
    pub indicator: f64,
    basis: OnceLock<Result<[[Vec<C>; 2]; 2], String>>,
}

impl<'a> DiracSolver<'a> {
    pub fn new(curve: &'a DiscretizedCurve, model: &DiracModel, grid: Grid, energy: DiracEnergy) -> Result<Self, DiracError> {
        if energy.c != model.c {
            return Err(DiracError::InvalidParameter(format!("energy built for c = {}, model has c = {}", energy.c, model.c)));
        }
        let c_mat = Arc::new(weyl_dirac(curve, &energy)?);
        let pf = model.pi_f_star();
        let pg = model.pi_g(curve);
        let x = bs_matrix(&c_mat, &pf, &pg);
        let indicator = x.singular_values().min();
        if indicator < SINGULAR_TOL {
            return Err(DiracError::MatrixSingular { z: energy.z, indicator });
        }
        let x_inv = x.try_inverse().ok_or(DiracError::MatrixSingular { z: energy.z, indicator })?;
        Ok(Self { curve, grid, energy, c_mat, pf, pg, x_inv, indicator, basis: OnceLock::new() })
    }

    /// `Φ(z̄)*f`.
    pub fn adjoint_trace(&self, f: &DiracField) -> Result<DVector<C>, DiracError> {
        let e = &self.energy;
        let mut t = adjoint_trace_smooth(self.curve, &f.smooth, e);
        for l in &f.layers {
            let dz = e.z - l.energy.z;
            if dz == ZERO {
                return Err(SolverError::CoincidentParameter(e.z).into());
            }
            t += (&*self.c_mat * &l.psi - &*l.c_mat * &l.psi) * (e.c / dz);
        }
        Ok(t)
    }

    /// Density `ψ` of the correction `-Φ(z)ψ`, and `ξ`.
    fn correction(&self, f: &DiracField) -> Result<(DVector<C>, Vector2<C>), DiracError> {
        let t = self.adjoint_trace(f)?;
        let xi = self.x_inv * Vector2::from_iterator((&self.pg * t).iter().cloned()) * C::new(1.0 / self.energy.c, 0.0);
        let psi = &self.pf * DVector::from_column_slice(xi.as_slice());
        Ok((psi, xi))
    }

    pub fn apply_field(&self, f: &DiracField) -> Result<DiracField, DiracError> {
        let e = self.energy;
        let mut out = DiracField { smooth: free_dirac_spectra(&f.smooth, &e), layers: Vec::new() };
        for l in &f.layers {
            let dz = e.z - l.energy.z;
            out.push_layer(DiracLayer { energy: e, c_mat: self.c_mat.clone(), psi: &l.psi / dz });
            out.push_layer(DiracLayer { energy: l.energy, c_mat: l.c_mat.clone(), psi: -&l.psi / dz });
        }
        let (psi, _) = self.correction(f)?;
        out.push_layer(DiracLayer { energy: e, c_mat: self.c_mat.clone(), psi: -psi });
        Ok(out)
    }

    /// `Φ(z)Π*_F e_k` on the grid, computed once.
    fn basis(&self) -> Result<&[[Vec<C>; 2]; 2], DiracError> {
        let b = self.basis.get_or_init(|| {
            let pts = self.grid.points();
            let mk = |k: usize| phi_apply(self.curve, &self.energy, &self.pf.column(k).into_owned(), &pts).map_err(|e| e.to_string());
            Ok([mk(0)?, mk(1)?])
        });
        b.as_ref().map_err(|m| DiracError::InvalidParameter(m.clone()))
    }

    /// Applies the resolvent to grid samples of a smooth, decaying `rhs`.
    pub fn apply(&self, rhs: &[Vec<C>; 2]) -> Result<DiracOutput, DiracError> {
        let f = DiracField::from_values(self.grid, rhs);
        for k in 0..2 {
            crate::spectral_solver::check_resolved(&self.grid, &rhs[k], &f.smooth[k])?;
        }
        let free_s = free_dirac_spectra(&f.smooth, &self.energy);
        let free = [free_s[0].values(), free_s[1].values()];
        let (_, xi) = self.correction(&f)?;
        let basis = self.basis()?;
        let values = [0, 1].map(|comp| {
            (0..free[comp].len()).map(|q| free[comp][q] - xi[0] * basis[0][comp][q] - xi[1] * basis[1][comp][q]).collect::<Vec<C>>()
        });
        Ok(DiracOutput { values, free, xi: [xi[0], xi[1]] })
    }
}

fn bs_matrix(c_mat: &DMatrix<C>, pf: &DMatrix<C>, pg: &DMatrix<C>) -> Matrix2<C> {
    let x = pg * c_mat * pf;
    Matrix2::new(C::new(1.0, 0.0) + x[(0, 0)], x[(0, 1)], x[(1, 0)], C::new(1.0, 0.0) + x[(1, 1)])
}

/// `det(I + Π_G𝒞^c(z)Π*_F)`.
pub fn dirac_determinant(curve: &DiscretizedCurve, model: &DiracModel, z: C) -> Result<C, DiracError> {
    let c_mat = weyl_dirac(curve, &DiracEnergy::new(model.c, z))?;
    Ok(bs_matrix(&c_mat, &model.pi_f_star(), &model.pi_g(curve)).determinant())
}

/// One-shot `(D^c_{F,G} - z)⁻¹ rhs`.
pub fn dirac_resolvent_apply(curve: &DiscretizedCurve, model: &DiracModel, grid: Grid, z: C, rhs: &[Vec<C>; 2]) -> Result<DiracOutput, DiracError> {
    DiracSolver::new(curve, model, grid, DiracEnergy::new(model.c, z))?.apply(rhs)
}

/// `|∂_z̄ det|/|∂_z det|` by central differences.
pub fn cauchy_riemann_defect(curve: &DiscretizedCurve, model: &DiracModel, z: C, h: f64) -> Result<f64, DiracError> {
    let d = |v: C| dirac_determinant(curve, model, v);
    let dx = (d(z + h)? - d(z - h)?) / (2.0 * h);
    let dy = (d(z + I * h)? - d(z - I * h)?) / (2.0 * h);
    let dzb = 0.5 * (dx + I * dy);
    let dz = 0.5 * (dx - I * dy);
    Ok(dzb.norm() / dz.norm().max(f64::MIN_POSITIVE))
}

/// Sampled determinant on the gap `(-c²/2, c²/2)` for one model.
#[derive(Clone, Debug, Serialize)]
pub struct GapScan {
    pub c: f64,
    pub z: Vec<f64>,
    pub det: Vec<f64>,
    /// `max |Im det| / max |det|`; zero in exact arithmetic.
    pub imag_ratio: f64,
    pub roots: Vec<f64>,
    /// Roots counted with multiplicity (tangential zeros count twice).
    pub count: usize,
}

/// Scans the gap for all `models` (sharing `c`) on `points` energies.
pub fn gap_scan(curve: &DiscretizedCurve, models: &[DiracModel], points: usize) -> Result<Vec<GapScan>, DiracError> {
    let Some(c) = models.first().map(|m| m.c) else { return Ok(Vec::new()) };
    if models.iter().any(|m| m.c != c) {
        return Err(DiracError::InvalidParameter("gap scan needs a common c".into()));
    }
    let half = c * c / 2.0;
    let zs: Vec<f64> = (0..points).map(|k| half * (-1.0 + 2.0 * (k as f64 + 0.5) / points as f64)).collect();
    let factors: Vec<(DMatrix<C>, DMatrix<C>)> = models.iter().map(|m| (m.pi_f_star(), m.pi_g(curve))).collect();
    let mut dets = vec![Vec::with_capacity(points); models.len()];
    for &z in &zs {
        let c_mat = weyl_dirac(curve, &DiracEnergy::new(c, C::new(z, 0.0)))?;
        for (k, (pf, pg)) in factors.iter().enumerate() {
            dets[k].push(bs_matrix(&c_mat, pf, pg).determinant());
        }
    }
    Ok(dets.into_iter().map(|d| summarize_gap(c, &zs, &d)).collect())
}

fn summarize_gap(c: f64, zs: &[f64], d: &[C]) -> GapScan {
    let peak = d.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let imag_ratio = d.iter().map(|v| v.im.abs()).fold(0.0, f64::max) / peak.max(f64::MIN_POSITIVE);
    let re: Vec<f64> = d.iter().map(|v| v.re).collect();
    let mut roots = Vec::new();
    let mut count = 0;
    for k in 0..re.len() - 1 {
        if re[k] == 0.0 || re[k].signum() != re[k + 1].signum() {
            let t = re[k] / (re[k] - re[k + 1]);
            roots.push(zs[k] + t * (zs[k + 1] - zs[k]));
            count += 1;
        }
    }
    for k in 1..re.len() - 1 {
        let a = re[k].abs();
        let tangential = a < re[k - 1].abs() && a < re[k + 1].abs() && re[k - 1].signum() == re[k + 1].signum() && re[k].signum() == re[k - 1].signum();
        if tangential && a < 1e-8 * peak {
            roots.push(zs[k]);
            count += 2;
        }
    }
    roots.sort_by(f64::total_cmp);
    GapScan { c, z: zs.to_vec(), det: re, imag_ratio, roots, count }
}

/// Panel of five smooth ℂ²-valued right-hand sides centred near the origin;
/// resolved on grids with `h ≤ 0.19` and half width `≥ 4.5`.
pub fn default_panel(grid: Grid) -> Vec<[Vec<C>; 2]> {
    let gauss = |x0: C, s: f64| move |x: C| (-(x - x0).norm_sqr() / (2.0 * s * s)).exp();
    let spec: [(C, f64, C, C); 5] = [
        (C::new(0.0, 0.0), 0.5, C::new(1.0, 0.0), ZERO),
        (C::new(0.6, 0.3), 0.45, C::new(1.0, 0.0), C::new(0.0, 0.5)),
        (C::new(-0.4, 0.7), 0.5, C::new(0.5, -0.5), C::new(1.0, 0.0)),
        (C::new(0.8, -0.5), 0.45, C::new(0.0, 1.0), ZERO),
        (C::new(-0.7, -0.6), 0.5, C::new(1.0, 0.0), C::new(-0.7, 0.2)),
    ];
    spec.iter()
        .map(|&(x0, s, a, b)| {
            let g = gauss(x0, s);
            // second component carries an odd factor so it is not a copy of the first
            [grid.sample(|x| a * g(x)), grid.sample(|x| b * (x - x0) * g(x) / s)]
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct NrRow {
    pub c: f64,
    /// `max_f ‖R^D f - (R_T f₁, 0)‖ / ‖f‖` over the panel.
    pub discrepancy: f64,
    /// `max_f ‖(R^D f)₂‖ / ‖(R^D f)₁‖`.
    pub leakage: f64,
    /// Log-log slope of the rows up to this one.
    pub slope_so_far: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NrStudy {
    pub w: [f64; 2],
    pub rows: Vec<NrRow>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub const DEFAULT_C_LIST: [f64; 6] = [8.0, 16.0, 32.0, 64.0, 128.0, 256.0];

/// Compares `(D^c_{F_c,G_c} - w - c²/2)⁻¹` with `(T_B - w)⁻¹ ⊗ diag(1, 0)`
/// on a right-hand-side panel for each `c`.
pub fn nr_limit_study(
    curve: &DiscretizedCurve,
    f: Vec<Mat2>,
    g: Vec<Mat2>,
    w: C,
    c_list: &[f64],
    grid: Grid,
    panel: &[[Vec<C>; 2]],
) -> Result<NrStudy, DiracError> {
    if c_list.len() < 2 {
        return Err(DiracError::InvalidParameter("need at least two values of c".into()));
    }
    if panel.is_empty() {
        return Err(DiracError::InvalidParameter("empty right-hand-side panel".into()));
    }
    let base = DiracModel::new(curve, f, g, c_list[0], true)?;
    let spec = base.limit_interaction(curve)?;
    let problem = BsProblem::new(curve, &spec)?;
    let krein = KreinSolver::new(&problem, grid, w)?;
    let limit: Vec<Vec<C>> = panel.iter().map(|r| krein.apply(&r[0]).map(|o| o.values)).collect::<Result<_, _>>()?;
    let fnorm: Vec<f64> = panel.iter().map(|r| (grid.norm(&r[0]).powi(2) + grid.norm(&r[1]).powi(2)).sqrt()).collect();

    let mut rows: Vec<NrRow> = Vec::with_capacity(c_list.len());
    for &c in c_list {
        let model = base.with_c(c);
        let solver = DiracSolver::new(curve, &model, grid, DiracEnergy::shifted(c, w))?;
        let (mut disc, mut leak) = (0.0f64, 0.0f64);
        for (k, rhs) in panel.iter().enumerate() {
            let out = solver.apply(rhs)?;
            let du: Vec<C> = out.values[0].iter().zip(&limit[k]).map(|(a, b)| a - b).collect();
            let d = (grid.norm(&du).powi(2) + grid.norm(&out.values[1]).powi(2)).sqrt();
            disc = disc.max(d / fnorm[k]);
            leak = leak.max(grid.norm(&out.values[1]) / grid.norm(&out.values[0]));
        }
        log::info!("nr limit: c = {c}, discrepancy = {disc:.6e}, leakage = {leak:.6e}");
        rows.push(NrRow { c, discrepancy: disc, leakage: leak, slope_so_far: None });
        if rows.len() >= 2 {
            let (x, y) = log_log(&rows);
            let s = linear_fit(&x, &y).1;
            rows.last_mut().expect("nonempty").slope_so_far = Some(s);
        }
    }
    let (x, y) = log_log(&rows);
    let (intercept, slope, r2) = linear_fit(&x, &y);
    if r2 < 0.9 {
        return Err(DiracError::SlopeFitUnstable { r2 });
    }
    Ok(NrStudy { w: [w.re, w.im], rows, slope, intercept, r2 })
}

fn log_log(rows: &[NrRow]) -> (Vec<f64>, Vec<f64>) {
    (rows.iter().map(|r| r.c.ln()).collect(), rows.iter().map(|r| r.discrepancy.ln()).collect())
}

/// `(c, ‖N_c(w) - V*M(w)V‖)` per `c`, with the fitted log-log slope.
pub fn weyl_limit_rates(curve: &DiscretizedCurve, w: C, c_list: &[f64]) -> Result<(Vec<(f64, f64)>, f64), DiracError> {
    let target = weyl_v_conjugated(curve, w)?;
    let n = curve.n_nodes;
    let s_unit: Vec<Mat2> = vec![[[ZERO; 2]; 2]; n];
    let mut out = Vec::new();
    for &c in c_list {
        let model = DiracModel { f: s_unit.clone(), g: s_unit.clone(), c, rescaled: true };
        let set = assemble_dirac_boundary(curve, &model, DiracEnergy::shifted(c, w))?;
        out.push((c, spectral_norm(&(set.n_mat - &target))));
    }
    let x: Vec<f64> = out.iter().map(|r| r.0.ln()).collect();
    let y: Vec<f64> = out.iter().map(|r| r.1.ln()).collect();
    Ok((out.clone(), linear_fit(&x, &y).1))
}

/// `max_ψ ‖((1/√c)Φ^c(w + c²/2)S_c - [[SL(w), -2iWL(w)], [0, 0]])ψ‖ / ‖ψ‖`
/// over a panel of boundary densities, measured on grid points; returns the
/// rows and the fitted log-log slope.
pub fn potential_limit_rates(
    curve: &DiscretizedCurve,
    w: C,
    c_list: &[f64],
    grid: Grid,
    densities: &[DVector<C>],
) -> Result<(Vec<(f64, f64)>, f64), DiracError> {
    let pts = grid.points();
    let p = SpectralParam::new(w)?;
    let n = curve.n_nodes;
    let sig_norm = |v: &DVector<C>| (v.norm_squared() * curve.weights[0]).sqrt();
    let limits: Vec<Vec<C>> = densities
        .iter()
        .map(|psi| {
            let (p1, p2) = split(psi);
            let p2: Vec<C> = p2.iter().map(|z| z * (-2.0 * I)).collect();
            GammaField::new(curve, p, &p1, &p2).map(|mut g| g.eval_many(&pts).into_iter().map(|v| v.0).collect())
        })
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for &c in c_list {
        let e = DiracEnergy::shifted(c, w);
        let s = [c.powf(-0.5), c.sqrt()];
        let mut worst = 0.0f64;
        for (psi, lim) in densities.iter().zip(&limits) {
            let scaled = DVector::from_fn(2 * n, |r, _| psi[r] * s[r / n] / c.sqrt());
            let v = phi_apply(curve, &e, &scaled, &pts)?;
            let du: Vec<C> = v[0].iter().zip(lim).map(|(a, b)| a - b).collect();
            let d = (grid.norm(&du).powi(2) + grid.norm(&v[1]).powi(2)).sqrt();
            worst = worst.max(d / sig_norm(psi));
        }
        out.push((c, worst));
    }
    let x: Vec<f64> = out.iter().map(|r| r.0.ln()).collect();
    let y: Vec<f64> = out.iter().map(|r| r.1.ln()).collect();
    Ok((out.clone(), linear_fit(&x, &y).1))
}

/// Elementary-type pair: `F = diag(f₁, f₂)`, `G = diag(g₁, g₂)` with real
/// node functions, which satisfies the symmetry condition when `f_k g_k` are
/// of the form `f_k = λ_k g_k` (`λ_k` real).
pub fn diagonal_pair(curve: &DiscretizedCurve, lambda: [f64; 2], g: impl Fn(usize, f64) -> [f64; 2]) -> (Vec<Mat2>, Vec<Mat2>) {
    let n = curve.n_nodes;
    let mut fs = Vec::with_capacity(n);
    let mut gs = Vec::with_capacity(n);
    for j in 0..n {
        let t = 2.0 * PI * j as f64 / n as f64;
        let gv = g(j, t);
        fs.push([[C::new(lambda[0] * gv[0], 0.0), ZERO], [ZERO, C::new(lambda[1] * gv[1], 0.0)]]);
        gs.push([[C::new(gv[0], 0.0), ZERO], [ZERO, C::new(gv[1], 0.0)]]);
    }
    (fs, gs)
}

/// `G = F·H` for a hermitian `H`, which always satisfies the symmetry
/// condition.
pub fn hermitian_pair(f: &[Mat2], h: Mat2) -> (Vec<Mat2>, Vec<Mat2>) {
    let g = f
        .iter()
        .map(|m| {
            let mut r = [[ZERO; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    r[a][b] = m[a][0] * h[0][b] + m[a][1] * h[1][b];
                }
            }
            r
        })
        .collect();
    (f.to_vec(), g)
}

#[cfg(test)]
mod tests;
