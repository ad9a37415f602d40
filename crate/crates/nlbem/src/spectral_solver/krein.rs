//! Free resolvent on a padded periodic grid and the Krein formula
//! `(T_B - w)⁻¹ = (-Δ-w)⁻¹ - γ(w)B₁(I + B₂M(w)B₁)⁻¹B₂γ(w̄)*`.
//!
//! Fields are kept as a smooth part (padded spectrum) plus layer terms
//! `γ(w')φ`. Applying `(-Δ-w)⁻¹` to a layer term is done exactly through
//! `(-Δ-w)⁻¹γ(w') = (γ(w) - γ(w'))/(w - w')`, and its adjoint trace through
//! `γ(w̄)*γ(w') = (M(w) - M(w'))/(w - w')`.

use super::{BsProblem, SolverError};
use crate::geometry::DiscretizedCurve;
use crate::layer_operators::{assemble_m, GammaField, SpectralParam, WeylBlockOperator};
use crate::parallel::map_indexed;
use nalgebra::{DMatrix, DVector, LU};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::sync::Arc;

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);

/// Indicator floor below which `w` counts as spectrum.
pub const NEAR_SPECTRUM: f64 = 1e-6;

/// Regular `n×n` grid on `[-A, A)²`, embedded in a `pad`-times larger
/// periodic box for the FFT.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub half_width: f64,
    pub pad: usize,
}

impl Grid {
    pub fn new(n: usize, half_width: f64) -> Self {
        Self { n, half_width, pad: 4 }
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn padded(&self) -> usize {
        self.n * self.pad
    }

    /// Point `(i, j)`; values are stored at index `j·n + i`.
    pub fn point(&self, i: usize, j: usize) -> C {
        C::new(-self.half_width + i as f64 * self.h(), -self.half_width + j as f64 * self.h())
    }

    pub fn points(&self) -> Vec<C> {
        (0..self.n * self.n).map(|q| self.point(q % self.n, q / self.n)).collect()
    }

    pub fn sample(&self, f: impl Fn(C) -> C) -> Vec<C> {
        self.points().into_iter().map(f).collect()
    }

    /// `Σ a·b̄·h²`.
    pub fn inner(&self, a: &[C], b: &[C]) -> C {
        a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<C>() * self.h().powi(2)
    }

    pub fn norm(&self, a: &[C]) -> f64 {
        self.inner(a, a).re.max(0.0).sqrt()
    }

    fn freq(&self, k: usize) -> f64 {
        let p = self.padded();
        let s = if k < p / 2 { k as f64 } else { k as f64 - p as f64 };
        2.0 * PI * s / (p as f64 * self.h())
    }
}

fn fft2(data: &mut [C], p: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(p) } else { planner.plan_fft_forward(p) };
    for row in data.chunks_mut(p) {
        fft.process(row);
    }
    let mut col = vec![ZERO; p];
    for k in 0..p {
        for l in 0..p {
            col[l] = data[l * p + k];
        }
        fft.process(&mut col);
        for l in 0..p {
            data[l * p + k] = col[l];
        }
    }
}

/// DFT coefficients of a function on the padded periodic box.
#[derive(Clone, Debug)]
pub struct GridSpectrum {
    pub grid: Grid,
    data: Vec<C>,
}

impl GridSpectrum {
    pub fn from_values(grid: Grid, values: &[C]) -> Self {
        let (n, p) = (grid.n, grid.padded());
        let off = (p - n) / 2;
        let mut data = vec![ZERO; p * p];
        for j in 0..n {
            for i in 0..n {
                data[(j + off) * p + i + off] = values[j * n + i];
            }
        }
        fft2(&mut data, p, false);
        Self { grid, data }
    }

    pub fn zero(grid: Grid) -> Self {
        let p = grid.padded();
        Self { grid, data: vec![ZERO; p * p] }
    }

    /// Values on the (unpadded) grid.
    pub fn values(&self) -> Vec<C> {
        let (n, p) = (self.grid.n, self.grid.padded());
        let off = (p - n) / 2;
        let mut data = self.data.clone();
        fft2(&mut data, p, true);
        let scale = 1.0 / (p * p) as f64;
        (0..n * n).map(|q| data[(q / n + off) * p + q % n + off] * scale).collect()
    }

    fn map_symbol(&self, f: impl Fn(f64, f64) -> C) -> Self {
        let p = self.grid.padded();
        let fx: Vec<f64> = (0..p).map(|k| self.grid.freq(k)).collect();
        let mut data = self.data.clone();
        for l in 0..p {
            for k in 0..p {
                data[l * p + k] *= f(fx[k], fx[l]);
            }
        }
        Self { grid: self.grid, data }
    }

    /// `(-Δ - w)⁻¹` with the exact symbol `1/(|ξ|² - w)`.
    pub fn resolvent(&self, w: C) -> Self {
        self.map_symbol(|a, b| (C::new(a * a + b * b, 0.0) - w).inv())
    }

    fn nyquist_free(&self, f: impl Fn(f64, f64) -> C) -> Self {
        let p = self.grid.padded();
        let nyq = self.grid.freq(p / 2);
        self.map_symbol(|a, b| if a == nyq || b == nyq { ZERO } else { f(a, b) })
    }

    /// `∂_z = ½(∂₁ - i∂₂)`.
    pub fn dz(&self) -> Self {
        self.nyquist_free(|a, b| C::new(b, a) * 0.5)
    }

    /// `∂_z̄ = ½(∂₁ + i∂₂)`.
    pub fn dzb(&self) -> Self {
        self.nyquist_free(|a, b| C::new(-b, a) * 0.5)
    }

    pub fn scaled(&self, a: C) -> Self {
        Self { grid: self.grid, data: self.data.iter().map(|z| z * a).collect() }
    }

    pub fn add_scaled(&mut self, other: &Self, a: C) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += y * a;
        }
    }

    /// Trigonometric interpolant at arbitrary points of the padded box.
    pub fn eval_at(&self, pts: &[C]) -> Vec<C> {
        let p = self.grid.padded();
        let a_p = self.grid.half_width * self.grid.pad as f64;
        let fx: Vec<f64> = (0..p).map(|k| if k == p / 2 { f64::NAN } else { self.grid.freq(k) }).collect();
        let scale = 1.0 / (p * p) as f64;
        map_indexed(pts.len(), |q| {
            let x = pts[q];
            let ex: Vec<C> = fx.iter().map(|&f| if f.is_nan() { ZERO } else { C::from_polar(1.0, f * (x.re + a_p)) }).collect();
            let mut acc = ZERO;
            for l in 0..p {
                if fx[l].is_nan() {
                    continue;
                }
                let row = &self.data[l * p..(l + 1) * p];
                let s: C = row.iter().zip(&ex).map(|(c, e)| c * e).sum();
                acc += s * C::from_polar(1.0, fx[l] * (x.im + a_p));
            }
            acc * scale
        })
    }

    /// Share of spectral energy in the outer quarter of the unpadded band.
    pub fn high_frequency_fraction(&self) -> f64 {
        let p = self.grid.padded();
        let cut = 0.75 * PI / self.grid.h();
        let (mut hi, mut tot) = (0.0, 0.0);
        for l in 0..p {
            for k in 0..p {
                let e = self.data[l * p + k].norm_sqr();
                tot += e;
                if self.grid.freq(k).abs() > cut || self.grid.freq(l).abs() > cut {
                    hi += e;
                }
            }
        }
        if tot == 0.0 {
            0.0
        } else {
            hi / tot
        }
    }
}

/// Rejects right-hand sides that are not resolved or not decayed on the grid.
pub fn check_resolved(grid: &Grid, values: &[C], spec: &GridSpectrum) -> Result<(), SolverError> {
    let n = grid.n;
    let peak = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let edge = (0..n)
        .flat_map(|i| [values[i], values[(n - 1) * n + i], values[i * n], values[i * n + n - 1]])
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if peak > 0.0 && edge > 1e-8 * peak {
        return Err(SolverError::GridTooCoarse(format!("rhs not decayed at the box edge ({:.2e} of peak)", edge / peak)));
    }
    let hf = spec.high_frequency_fraction();
    if hf > 1e-12 {
        return Err(SolverError::GridTooCoarse(format!("rhs under-resolved (high-frequency energy fraction {hf:.2e})")));
    }
    Ok(())
}

/// `γ(w)φ` term of a field.
#[derive(Clone, Debug)]
pub struct Layer {
    pub p: SpectralParam,
    pub weyl: Arc<WeylBlockOperator>,
    pub phi: DVector<C>,
}

/// Smooth part plus layer potentials.
#[derive(Clone, Debug)]
pub struct Field {
    pub smooth: GridSpectrum,
    pub layers: Vec<Layer>,
}

impl Field {
    pub fn from_values(grid: Grid, values: &[C]) -> Self {
        Self { smooth: GridSpectrum::from_values(grid, values), layers: Vec::new() }
    }

    fn push_layer(&mut self, layer: Layer) {
        if let Some(l) = self.layers.iter_mut().find(|l| l.p.w == layer.p.w) {
            l.phi += layer.phi;
        } else {
            self.layers.push(layer);
        }
    }

    /// Values at the grid points.
    pub fn eval_grid(&self, curve: &DiscretizedCurve) -> Result<Vec<C>, SolverError> {
        let grid = self.smooth.grid;
        let mut out = self.smooth.values();
        let pts = grid.points();
        let n = curve.n_nodes;
        for l in &self.layers {
            let p1: Vec<C> = l.phi.rows(0, n).iter().cloned().collect();
            let p2: Vec<C> = l.phi.rows(n, n).iter().cloned().collect();
            let vals = GammaField::new(curve, l.p, &p1, &p2)?.eval_many(&pts);
            for (o, v) in out.iter_mut().zip(vals) {
                *o += v.0;
            }
        }
        Ok(out)
    }

    /// `⟨self, g⟩_{L²(ℝ²)}` for a smooth, decaying grid function `g`; layer
    /// terms enter through `⟨γ(w')φ, g⟩ = ⟨φ, γ(w')*g⟩_Σ`.
    pub fn inner_smooth(&self, curve: &DiscretizedCurve, g: &[C]) -> C {
        let grid = self.smooth.grid;
        let mut acc = grid.inner(&self.smooth.values(), g);
        if self.layers.is_empty() {
            return acc;
        }
        let gs = GridSpectrum::from_values(grid, g);
        for l in &self.layers {
            let t = adjoint_trace_smooth(curve, &gs, l.p.w.conj());
            acc += l.phi.dotc(&t).conj() * curve.weights[0];
        }
        acc
    }
}

/// `γ(v̄)*g = (γ_D u, -γ_D∂_z̄u)` with `u = (-Δ-v)⁻¹g`.
fn adjoint_trace_smooth(curve: &DiscretizedCurve, g: &GridSpectrum, v: C) -> DVector<C> {
    let n = curve.n_nodes;
    let u = g.resolvent(v);
    let a = u.eval_at(&curve.points);
    let b = u.dzb().eval_at(&curve.points);
    DVector::from_fn(2 * n, |q, _| if q < n { a[q] } else { -b[q - n] })
}

/// Grid output of one Krein application.
#[derive(Clone, Debug)]
pub struct KreinOutput {
    pub values: Vec<C>,
    /// Free-resolvent term alone.
    pub free: Vec<C>,
    /// Correction density `B₁(I + B₂MB₁)⁻¹B₂γ(w̄)*f`.
    pub density: DVector<C>,
    pub field: Field,
}

/// `(T_B - w)⁻¹` for one `w` in the resolvent set.
pub struct KreinSolver<'a> {
    pub curve: &'a DiscretizedCurve,
    pub grid: Grid,
    pub p: SpectralParam,
    pub weyl: Arc<WeylBlockOperator>,
    b1: DMatrix<C>,
    b2: DMatrix<C>,
    lu: Option<LU<C, nalgebra::Dyn, nalgebra::Dyn>>,
    pub indicator: f64,
}

impl<'a> KreinSolver<'a> {
    pub fn new(problem: &BsProblem<'a>, grid: Grid, w: C) -> Result<Self, SolverError> {
        let p = SpectralParam::new(w)?;
        let weyl = Arc::new(assemble_m(problem.curve, &p));
        let k = problem.dim_k();
        let f = &problem.factorization;
        let (lu, indicator) = if k == 0 {
            (None, 1.0)
        } else {
            let a = DMatrix::identity(k, k) + &f.b2 * weyl.to_dense() * &f.b1;
            let ind = problem.indicator_of(&a);
            (Some(a.lu()), ind)
        };
        if indicator < NEAR_SPECTRUM {
            return Err(SolverError::NearSpectrum { w, indicator });
        }
        Ok(Self { curve: problem.curve, grid, p, weyl, b1: f.b1.clone(), b2: f.b2.clone(), lu, indicator })
    }

    /// `γ(w̄)*f`.
    pub fn adjoint_trace(&self, f: &Field) -> Result<DVector<C>, SolverError> {
        let w = self.p.w;
        let mut t = adjoint_trace_smooth(self.curve, &f.smooth, w);
        for l in &f.layers {
            let dw = w - l.p.w;
            if dw == ZERO {
                return Err(SolverError::CoincidentParameter(w));
            }
            t += (self.weyl.apply(&l.phi) - l.weyl.apply(&l.phi)) / dw;
        }
        Ok(t)
    }

    pub fn apply_field(&self, f: &Field) -> Result<Field, SolverError> {
        let w = self.p.w;
        let mut out = Field { smooth: f.smooth.resolvent(w), layers: Vec::new() };
        for l in &f.layers {
            let dw = w - l.p.w;
            if dw == ZERO {
                return Err(SolverError::CoincidentParameter(w));
            }
            out.push_layer(Layer { p: self.p, weyl: self.weyl.clone(), phi: &l.phi / dw });
            out.push_layer(Layer { p: l.p, weyl: l.weyl.clone(), phi: -&l.phi / dw });
        }
        if let Some(lu) = &self.lu {
            let t = self.adjoint_trace(f)?;
            let xi = lu.solve(&(&self.b2 * t)).expect("checked by the indicator");
            let phi = &self.b1 * xi;
            out.push_layer(Layer { p: self.p, weyl: self.weyl.clone(), phi: -phi });
        }
        Ok(out)
    }

    /// Applies the resolvent to grid samples of a decaying, resolved `rhs`.
    pub fn apply(&self, rhs: &[C]) -> Result<KreinOutput, SolverError> {
        let f = Field::from_values(self.grid, rhs);
        check_resolved(&self.grid, rhs, &f.smooth)?;
        let out = self.apply_field(&f)?;
        let free = out.smooth.values();
        let density = out.layers.iter().filter(|l| l.p.w == self.p.w).map(|l| -l.phi.clone()).next().unwrap_or_else(|| DVector::zeros(2 * self.curve.n_nodes));
        let values = out.eval_grid(self.curve)?;
        Ok(KreinOutput { values, free, density, field: out })
    }
}

/// One-shot `(T_B - w)⁻¹ rhs` on the grid.
pub fn krein_apply(problem: &BsProblem, grid: Grid, w: C, rhs: &[C]) -> Result<KreinOutput, SolverError> {
    KreinSolver::new(problem, grid, w)?.apply(rhs)
}

/// `(-Δ - w)⁻¹ rhs` on the grid alone.
pub fn free_resolvent(grid: Grid, w: C, rhs: &[C]) -> Vec<C> {
    GridSpectrum::from_values(grid, rhs).resolvent(w).values()
}
