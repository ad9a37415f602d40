//! Layer potentials `SL(w)`, `WL(w) = ∂_z SL(w)`, `W̃L(w) = ∂_z̄ SL(w)`, the
//! boundary operators `S(w)`, `W(w)`, `W̃(w)` and the Weyl function
//! `M(w) = [[S, W], [W(w̄)*, (w/4)S]]` on a discretized curve.
//!
//! All nodes carry the same weight `L/N`, so the symmetrized Nyström matrix
//! (entries scaled by `√σ_i √σ_j`) coincides with the plain Nyström matrix,
//! and discrete adjoints are conjugate transposes.
//!
//! Two assembly routes are used:
//! * for `|κ|·diam ≤ KRESS_LIMIT` the classical periodic log-splitting rule
//!   (`K₀(κr) = -½I₀(κr) ln(4 sin²) + smooth`), spectrally accurate;
//! * otherwise product integration of the kernel against the trigonometric
//!   cardinal functions on graded Gauss panels, which stays accurate when
//!   the kernel is much narrower than the node spacing.
//!
//! The strongly singular part of `W` is the static kernel `-1/(4π(𝐱-𝐲))`,
//! discretized through a symmetric conjugate-function split that makes the
//! matrix exactly antisymmetric.

use crate::geometry::DiscretizedCurve;
use crate::parallel::map_indexed;
use crate::quadrature::{adaptive_complex, cardinal, conjugate_weights, log_weights};
use crate::special_functions::{k0, k01, k0_split, k1, k1_minus_inv, k1_split, kappa_of, sqrt_im_pos, EULER_GAMMA};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// Kress assembly is used while `|κ|·diam(Σ)` stays below this value.
pub const KRESS_LIMIT: f64 = 8.0;
/// Public potential evaluation refuses points closer than this fraction of `L`.
pub const DISTANCE_FLOOR: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayerError {
    #[error("spectral parameter {0} lies on the cut [0, +inf)")]
    SpectralParamOnCut(Complex64),
    #[error("point ({x:.6}, {y:.6}) is {dist:.3e} from the curve, below the floor {floor:.3e}")]
    PointTooClose { x: f64, y: f64, dist: f64, floor: f64 },
    #[error("Richardson extrapolation diverged at node {node} (relative spread {spread:.3e})")]
    ExtrapolationDiverged { node: usize, spread: f64 },
    #[error("majorant is not integrable near the origin")]
    MajorantNotIntegrable,
    #[error("density has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Spectral parameter `w ∉ [0, ∞)` with `κ = -i√w`, `Re κ > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralParam {
    pub w: C,
    pub sqrt_w: C,
    pub kappa: C,
    pub is_real_negative: bool,
}

impl SpectralParam {
    pub fn new(w: C) -> Result<Self, LayerError> {
        let sqrt_w = sqrt_im_pos(w).ok_or(LayerError::SpectralParamOnCut(w))?;
        let kappa = kappa_of(w).ok_or(LayerError::SpectralParamOnCut(w))?;
        Ok(Self { w, sqrt_w, kappa, is_real_negative: w.im == 0.0 && w.re < 0.0 })
    }

    pub fn real(w: f64) -> Result<Self, LayerError> {
        Self::new(C::new(w, 0.0))
    }

    /// Parameter at `w̄`.
    pub fn conj(&self) -> Self {
        Self::new(self.w.conj()).expect("conjugate of a valid parameter is valid")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    S,
    W,
    WTilde,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssemblyMethod {
    Auto,
    Kress,
    ProductIntegration,
}

/// Dense Nyström matrix of a scalar boundary operator.
#[derive(Clone, Debug)]
pub struct BoundaryOperator {
    pub matrix: DMatrix<C>,
    pub kind: OperatorKind,
    pub w: C,
    pub n_nodes: usize,
    pub length: f64,
}

impl BoundaryOperator {
    pub fn apply(&self, v: &DVector<C>) -> DVector<C> {
        &self.matrix * v
    }

    pub fn adjoint(&self) -> DMatrix<C> {
        self.matrix.adjoint()
    }

    pub fn spectral_norm(&self) -> f64 {
        spectral_norm(&self.matrix)
    }
}

/// Which of `S`, `W`, `W̃` to assemble.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Need {
    pub s: bool,
    pub w: bool,
    pub wt: bool,
}

impl Need {
    pub const ALL: Need = Need { s: true, w: true, wt: true };
    pub const S: Need = Need { s: true, w: false, wt: false };
}

/// Raw matrices of one assembly pass.
#[derive(Clone, Debug, Default)]
pub struct LayerSet {
    pub s: Option<DMatrix<C>>,
    pub w: Option<DMatrix<C>>,
    pub wt: Option<DMatrix<C>>,
}

fn conj_m(m: DMatrix<C>) -> DMatrix<C> {
    m.map(|z| z.conj())
}

/// Picks the assembly route for a given `κ` and curve.
pub fn choose_method(curve: &DiscretizedCurve, kappa: C) -> AssemblyMethod {
    if kappa.norm() * curve.diameter() <= KRESS_LIMIT {
        AssemblyMethod::Kress
    } else {
        AssemblyMethod::ProductIntegration
    }
}

/// Assembles the requested operators in one pass over the kernel.
pub fn assemble_layers(curve: &DiscretizedCurve, p: &SpectralParam, need: Need, method: AssemblyMethod) -> LayerSet {
    if p.w.im < 0.0 {
        // S(w) = conj S(w̄), W(w) = conj W̃(w̄), W̃(w) = conj W(w̄)
        let c = assemble_layers(curve, &p.conj(), Need { s: need.s, w: need.wt, wt: need.w }, method);
        return LayerSet { s: c.s.map(conj_m), w: c.wt.map(conj_m), wt: c.w.map(conj_m) };
    }
    let method = match method {
        AssemblyMethod::Auto => choose_method(curve, p.kappa),
        m => m,
    };
    let mut set = match method {
        AssemblyMethod::Kress | AssemblyMethod::Auto => kress(curve, p.kappa, need),
        AssemblyMethod::ProductIntegration => product_integration(curve, p.kappa, need),
    };
    if need.w || need.wt {
        let w0 = static_w(curve);
        if let Some(m) = set.w.as_mut() {
            *m += &w0;
        }
        if let Some(m) = set.wt.as_mut() {
            *m += conj_m(w0);
        }
    }
    set
}

/// `S(w)`, kernel `(1/2π) K₀(κ|x-y|)`.
pub fn assemble_s(curve: &DiscretizedCurve, p: &SpectralParam) -> BoundaryOperator {
    let set = assemble_layers(curve, p, Need::S, AssemblyMethod::Auto);
    wrap(curve, p, OperatorKind::S, set.s.unwrap())
}

/// `W(w)`, principal-value kernel `-(κ/4π) conj(𝐱-𝐲)/|x-y| K₁(κ|x-y|)`.
pub fn assemble_w(curve: &DiscretizedCurve, p: &SpectralParam) -> BoundaryOperator {
    let set = assemble_layers(curve, p, Need { s: false, w: true, wt: false }, AssemblyMethod::Auto);
    wrap(curve, p, OperatorKind::W, set.w.unwrap())
}

/// `W̃(w)`, kernel `-(κ/4π) (𝐱-𝐲)/|x-y| K₁(κ|x-y|)`.
pub fn assemble_w_tilde(curve: &DiscretizedCurve, p: &SpectralParam) -> BoundaryOperator {
    let set = assemble_layers(curve, p, Need { s: false, w: false, wt: true }, AssemblyMethod::Auto);
    wrap(curve, p, OperatorKind::WTilde, set.wt.unwrap())
}

fn wrap(curve: &DiscretizedCurve, p: &SpectralParam, kind: OperatorKind, matrix: DMatrix<C>) -> BoundaryOperator {
    BoundaryOperator { matrix, kind, w: p.w, n_nodes: curve.n_nodes, length: curve.length }
}

/// The Weyl function as 2×2 blocks.
#[derive(Clone, Debug)]
pub struct WeylBlockOperator {
    pub w: C,
    pub blocks: [[DMatrix<C>; 2]; 2],
}

impl WeylBlockOperator {
    pub fn from_layers(w: C, s: DMatrix<C>, wm: DMatrix<C>, wt: DMatrix<C>) -> Self {
        let s22 = &s * (w / 4.0);
        // W(w̄)* = (conj W̃(w))* = W̃(w)ᵀ = -W̃(w)
        let m21 = -wt;
        Self { w, blocks: [[s, wm], [m21, s22]] }
    }

    pub fn n(&self) -> usize {
        self.blocks[0][0].nrows()
    }

    pub fn to_dense(&self) -> DMatrix<C> {
        let n = self.n();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for a in 0..2 {
            for b in 0..2 {
                m.view_mut((a * n, b * n), (n, n)).copy_from(&self.blocks[a][b]);
            }
        }
        m
    }

    /// `M(w)φ` for `φ = (φ₁, φ₂)` stacked.
    pub fn apply(&self, phi: &DVector<C>) -> DVector<C> {
        let n = self.n();
        let p1 = phi.rows(0, n).into_owned();
        let p2 = phi.rows(n, n).into_owned();
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&(&self.blocks[0][0] * &p1 + &self.blocks[0][1] * &p2));
        out.rows_mut(n, n).copy_from(&(&self.blocks[1][0] * &p1 + &self.blocks[1][1] * &p2));
        out
    }
}

/// `M(w)`; only the blocks listed in `need` are computed, the others are
/// zero (`need.s` fills the diagonal blocks, `need.w` the off-diagonal ones).
pub fn assemble_m_partial(curve: &DiscretizedCurve, p: &SpectralParam, diag: bool, off: bool) -> WeylBlockOperator {
    let n = curve.n_nodes;
    let set = assemble_layers(curve, p, Need { s: diag, w: off, wt: off }, AssemblyMethod::Auto);
    WeylBlockOperator::from_layers(
        p.w,
        set.s.unwrap_or_else(|| DMatrix::zeros(n, n)),
        set.w.unwrap_or_else(|| DMatrix::zeros(n, n)),
        set.wt.unwrap_or_else(|| DMatrix::zeros(n, n)),
    )
}

pub fn assemble_m(curve: &DiscretizedCurve, p: &SpectralParam) -> WeylBlockOperator {
    assemble_m_partial(curve, p, true, true)
}

// ---------------------------------------------------------------------------
// static Cauchy part

/// Discretization of the static PV operator with kernel `-1/(4π(𝐱-𝐲))`:
/// `W₀φ = ⅛[H(τφ) + τHφ] - (1/2N) Σ D φ` with `τ = conj(tangent)`, `H` the
/// discrete conjugate-function operator and `D` the smooth antisymmetric
/// remainder `sp/(ζ_j-ζ_i) - ¼(τ_j+τ_i)cot((t_j-t_i)/2)`.
pub fn static_w(curve: &DiscretizedCurve) -> DMatrix<C> {
    let n = curve.n_nodes;
    let sp = curve.length / (2.0 * PI);
    let h = conjugate_weights(n);
    let tau: Vec<C> = curve.unit_tangents.iter().map(|t| t.conj()).collect();
    let z = &curve.points;
    DMatrix::from_fn(n, n, |j, i| {
        if i == j {
            return ZERO;
        }
        let k = (j + n - i) % n;
        let ts = tau[j] + tau[i];
        let half = PI * (j as f64 - i as f64) / n as f64;
        let d = C::new(sp, 0.0) / (z[j] - z[i]) - ts * (0.25 / half.tan());
        ts * (h[k] / 8.0) - d / (2.0 * n as f64)
    })
}

// ---------------------------------------------------------------------------
// Kress route

fn kress(curve: &DiscretizedCurve, kappa: C, need: Need) -> LayerSet {
    let n = curve.n_nodes;
    let sp = curve.length / (2.0 * PI);
    let ht = 2.0 * PI / n as f64;
    let rw = log_weights(n);
    let lnk = kappa.ln();
    let z = &curve.points;
    let pre = -kappa / (4.0 * PI);
    let s_diag = sp / (2.0 * PI) * (-0.5 * rw[0] + ht * (-(lnk + (sp / 2.0).ln()) - EULER_GAMMA));
    let rows = map_indexed(n, |j| {
        let mut s = vec![ZERO; if need.s { n } else { 0 }];
        let mut w = vec![ZERO; if need.w { n } else { 0 }];
        let mut wt = vec![ZERO; if need.wt { n } else { 0 }];
        for i in 0..n {
            if i == j {
                if need.s {
                    s[i] = s_diag;
                }
                continue;
            }
            let k = (j + n - i) % n;
            let d = z[j] - z[i];
            let r = d.norm();
            let t = kappa * r;
            let ls = (4.0 * (PI * k as f64 / n as f64).sin().powi(2)).ln();
            let smooth_log = lnk + (r.ln() - 0.5 * ls);
            if need.s {
                let (i0, rest) = k0_split(t);
                let b = rest - i0 * smooth_log;
                s[i] = (-0.5 * rw[k] * i0 + ht * b) * (sp / (2.0 * PI));
            }
            if need.w || need.wt {
                let (i1, rest) = k1_split(t);
                let g = i1 * smooth_log + rest;
                let core = (i1 * (0.5 * rw[k]) + g * ht) * pre * sp;
                if need.w {
                    w[i] = core * d.conj() / r;
                }
                if need.wt {
                    wt[i] = core * d / r;
                }
            }
        }
        (s, w, wt)
    });
    collect_rows(n, need, rows, |j, i| (j, i))
}

fn collect_rows<F: Fn(usize, usize) -> (usize, usize)>(
    n: usize,
    need: Need,
    rows: Vec<(Vec<C>, Vec<C>, Vec<C>)>,
    place: F,
) -> LayerSet {
    let mut s = need.s.then(|| DMatrix::zeros(n, n));
    let mut w = need.w.then(|| DMatrix::zeros(n, n));
    let mut wt = need.wt.then(|| DMatrix::zeros(n, n));
    for (j, (rs, rw, rwt)) in rows.into_iter().enumerate() {
        for i in 0..n {
            let (a, b) = place(j, i);
            if let Some(m) = s.as_mut() {
                m[(a, b)] = rs[i];
            }
            if let Some(m) = w.as_mut() {
                m[(a, b)] = rw[i];
            }
            if let Some(m) = wt.as_mut() {
                m[(a, b)] = rwt[i];
            }
        }
    }
    LayerSet { s, w, wt }
}

// ---------------------------------------------------------------------------
// product-integration route

struct PiLayout {
    u: Vec<f64>,
    wt: Vec<f64>,
    /// Points `0..n_window` satisfy `|u| ≤ window`.
    n_window: usize,
}

const DYADIC_LEVELS: usize = 30;

fn pi_layout(n: usize, kappa: C, sp: f64, bilip: f64, full: bool) -> PiLayout {
    let ht = 2.0 * PI / n as f64;
    let hmax = 4.0 * ht;
    let hn = (2.0 / (kappa.norm() * sp)).min(hmax);
    let a = (40.0 / (kappa.re * bilip * sp)).min(PI);
    let p0 = hn.min(a);
    let mut half = Vec::new();
    let mut hi = p0;
    for _ in 0..DYADIC_LEVELS {
        crate::quadrature::push_panel(0.5 * hi, hi, 10, &mut half);
        hi *= 0.5;
    }
    crate::quadrature::push_panel(0.0, hi, 10, &mut half);
    let m = ((a - p0) / hn).ceil().max(0.0) as usize;
    for k in 0..m {
        let lo = p0 + (a - p0) * k as f64 / m as f64;
        let up = p0 + (a - p0) * (k + 1) as f64 / m as f64;
        crate::quadrature::push_panel(lo, up, 20, &mut half);
    }
    let n_half_window = half.len();
    let mut far = Vec::new();
    if full && a < PI {
        let m = ((PI - a) / hmax).ceil() as usize;
        for k in 0..m {
            let lo = a + (PI - a) * k as f64 / m as f64;
            let up = a + (PI - a) * (k + 1) as f64 / m as f64;
            crate::quadrature::push_panel(lo, up, 20, &mut far);
        }
    }
    let mut u = Vec::with_capacity(2 * (half.len() + far.len()));
    let mut wt = Vec::with_capacity(u.capacity());
    for &(x, w) in &half {
        u.push(x);
        wt.push(w);
        u.push(-x);
        wt.push(w);
    }
    for &(x, w) in &far {
        u.push(x);
        wt.push(w);
        u.push(-x);
        wt.push(w);
    }
    PiLayout { u, wt, n_window: 2 * n_half_window }
}

fn product_integration(curve: &DiscretizedCurve, kappa: C, need: Need) -> LayerSet {
    let n = curve.n_nodes;
    let sp = curve.length / (2.0 * PI);
    let need_w = need.w || need.wt;
    let lay = pi_layout(n, kappa, sp, curve.bilip_constant.max(1e-3), need_w);
    let q_all = lay.u.len();
    let q_s = lay.n_window;
    let pre = -kappa / (4.0 * PI) * sp;
    let map = &curve.map;

    // kernel rows: (S weights over window, W and W̃ weights over all points)
    let rows = map_indexed(n, |j| {
        let zj = curve.points[j];
        let sj = curve.params[j];
        let mut ks = vec![ZERO; if need.s { q_s } else { 0 }];
        let mut kw = vec![ZERO; if need.w { q_all } else { 0 }];
        let mut kwt = vec![ZERO; if need.wt { q_all } else { 0 }];
        let upto = if need_w { q_all } else { q_s };
        for q in 0..upto {
            let y = map.point(sj + sp * lay.u[q]).pos;
            let d = zj - y;
            let r = d.norm();
            let t = kappa * r;
            let wq = lay.wt[q];
            let far = t.re > 45.0;
            if need.s && q < q_s {
                let kv = if far { ZERO } else { k0(t) };
                ks[q] = kv * (wq * sp / (2.0 * PI));
            }
            if need_w {
                let rem = if far {
                    -t.inv()
                } else if t.norm() <= 2.0 {
                    k1_minus_inv(t)
                } else {
                    k1(t) - t.inv()
                };
                let core = pre * rem * wq;
                if need.w {
                    kw[q] = core * d.conj() / r;
                }
                if need.wt {
                    kwt[q] = core * d / r;
                }
            }
        }
        (ks, kw, kwt)
    });

    let table = |qn: usize| -> DMatrix<f64> {
        DMatrix::from_fn(qn, n, |q, d| cardinal(n, lay.u[q] - 2.0 * PI * d as f64 / n as f64))
    };
    let shift_product = |qn: usize, pick: &dyn Fn(&(Vec<C>, Vec<C>, Vec<C>)) -> &Vec<C>, t: &DMatrix<f64>| -> DMatrix<C> {
        let re = DMatrix::from_fn(n, qn, |j, q| pick(&rows[j])[q].re);
        let im = DMatrix::from_fn(n, qn, |j, q| pick(&rows[j])[q].im);
        let pr = re * t;
        let pi = im * t;
        DMatrix::from_fn(n, n, |j, i| {
            let d = (i + n - j) % n;
            C::new(pr[(j, d)], pi[(j, d)])
        })
    };

    let mut set = LayerSet::default();
    if need.s {
        let t = table(q_s);
        let m = shift_product(q_s, &|r| &r.0, &t);
        set.s = Some((&m + m.transpose()) * C::new(0.5, 0.0));
    }
    if need_w {
        let t = table(q_all);
        if need.w {
            let m = shift_product(q_all, &|r| &r.1, &t);
            set.w = Some((&m - m.transpose()) * C::new(0.5, 0.0));
        }
        if need.wt {
            let m = shift_product(q_all, &|r| &r.2, &t);
            set.wt = Some((&m - m.transpose()) * C::new(0.5, 0.0));
        }
    }
    set
}

// ---------------------------------------------------------------------------
// potentials

/// Values of a layer-potential combination at evaluation points.
#[derive(Clone, Debug)]
pub struct PotentialField {
    pub points: Vec<[f64; 2]>,
    pub values: Vec<C>,
}

/// Upsampled copy of the curve and of a ℂ²-valued density.
struct Level {
    pos: Vec<C>,
    d1: Vec<C>,
    d2: Vec<C>,
    weight: f64,
}

/// Evaluates `f = SLφ₁ + WLφ₂` and `∂_z̄ f = W̃Lφ₁ - (w/4)SLφ₂` off the
/// curve. The trapezoidal rule is applied on an upsampled copy of curve
/// and density whose spacing is matched to the distance of each point;
/// points too close for the finest level fall back to adaptive quadrature.
pub struct GammaField<'a> {
    curve: &'a DiscretizedCurve,
    p: SpectralParam,
    spec1: Vec<C>,
    spec2: Vec<C>,
    levels: Vec<Option<Level>>,
    coarse: Vec<C>,
}

const MAX_LEVEL: usize = 8;

impl<'a> GammaField<'a> {
    pub fn new(curve: &'a DiscretizedCurve, p: SpectralParam, phi1: &[C], phi2: &[C]) -> Result<Self, LayerError> {
        let n = curve.n_nodes;
        for v in [phi1, phi2] {
            if v.len() != n {
                return Err(LayerError::DimensionMismatch { expected: n, got: v.len() });
            }
        }
        let coarse: Vec<C> = (0..4 * n).map(|k| curve.map.point(curve.length * k as f64 / (4 * n) as f64).pos).collect();
        Ok(Self {
            curve,
            p,
            spec1: spectrum(phi1),
            spec2: spectrum(phi2),
            levels: (0..=MAX_LEVEL).map(|_| None).collect(),
            coarse,
        })
    }

    /// Distance from `x` to the curve (nearest sample refined by Newton).
    pub fn distance(&self, x: C) -> (f64, f64) {
        let m = self.coarse.len();
        let (mut best, mut bd) = (0, f64::INFINITY);
        for (k, y) in self.coarse.iter().enumerate() {
            let d = (x - y).norm();
            if d < bd {
                bd = d;
                best = k;
            }
        }
        let l = self.curve.length;
        let mut s = l * best as f64 / m as f64;
        for _ in 0..8 {
            let pt = self.curve.map.point(s);
            let d = pt.pos - x;
            let g = (d.conj() * pt.tangent).re;
            let hss = 1.0 + (d.conj() * pt.accel).re;
            if hss <= 0.0 {
                break;
            }
            let step = (g / hss).clamp(-l / m as f64, l / m as f64);
            s -= step;
            if step.abs() < 1e-14 * l {
                break;
            }
        }
        let pt = self.curve.map.point(s);
        ((x - pt.pos).norm().min(bd), s)
    }

    fn level(&mut self, k: usize) -> &Level {
        if self.levels[k].is_none() {
            let n = self.curve.n_nodes;
            let m = n << k;
            let pos = (0..m).map(|i| self.curve.map.point(self.curve.length * i as f64 / m as f64).pos).collect();
            self.levels[k] = Some(Level {
                pos,
                d1: upsample(&self.spec1, m),
                d2: upsample(&self.spec2, m),
                weight: self.curve.length / m as f64,
            });
        }
        self.levels[k].as_ref().unwrap()
    }

    /// Upsampling level needed at distance `dist`, or `None` if even the
    /// finest level is too coarse.
    fn level_for(&self, dist: f64) -> Option<usize> {
        let n = self.curve.n_nodes as f64;
        let need = 3.5 * self.curve.length / dist.max(1e-300);
        (0..=MAX_LEVEL).find(|&k| n * (1u64 << k) as f64 >= need)
    }

    /// `(f(x), ∂_z̄ f(x))` at one point off the curve.
    pub fn eval(&mut self, x: C) -> (C, C) {
        let (dist, s_near) = self.distance(x);
        match self.level_for(dist) {
            Some(k) => {
                self.level(k);
                self.eval_level(x, k)
            }
            None => self.eval_adaptive(x, s_near, dist),
        }
    }

    fn eval_level(&self, x: C, k: usize) -> (C, C) {
        let p = self.p;
        let lev = self.levels[k].as_ref().expect("level prepared");
        let mut acc = (ZERO, ZERO);
        for i in 0..lev.pos.len() {
            let (a, b) = kernel_terms(&p, x, lev.pos[i], lev.d1[i], lev.d2[i]);
            acc.0 += a;
            acc.1 += b;
        }
        (acc.0 * lev.weight, acc.1 * lev.weight)
    }

    fn eval_adaptive(&self, x: C, s0: f64, dist: f64) -> (C, C) {
        let l = self.curve.length;
        let p = self.p;
        let integrand = |s: f64, part: usize| -> C {
            let y = self.curve.map.point(s).pos;
            let d1 = trig_eval(&self.spec1, s / l);
            let d2 = trig_eval(&self.spec2, s / l);
            let (a, b) = kernel_terms(&p, x, y, d1, d2);
            if part == 0 {
                a
            } else {
                b
            }
        };
        let tol = 1e-12 * (1.0 + 1.0 / dist);
        let mut out = [ZERO; 2];
        for (part, o) in out.iter_mut().enumerate() {
            *o = adaptive_complex(|s| integrand(s, part), s0 - 0.5 * l, s0, tol)
                + adaptive_complex(|s| integrand(s, part), s0, s0 + 0.5 * l, tol);
        }
        (out[0], out[1])
    }

    /// Evaluates at many points in parallel.
    pub fn eval_many(&mut self, xs: &[C]) -> Vec<(C, C)> {
        let this = &*self;
        let plan: Vec<(f64, f64, Option<usize>)> = map_indexed(xs.len(), |i| {
            let (d, s) = this.distance(xs[i]);
            (d, s, this.level_for(d))
        });
        for k in 0..=MAX_LEVEL {
            if plan.iter().any(|q| q.2 == Some(k)) {
                self.level(k);
            }
        }
        let this = &*self;
        map_indexed(xs.len(), |i| match plan[i] {
            (_, _, Some(k)) => this.eval_level(xs[i], k),
            (d, s, None) => this.eval_adaptive(xs[i], s, d),
        })
    }
}

#[inline]
fn kernel_terms(p: &SpectralParam, x: C, y: C, d1: C, d2: C) -> (C, C) {
    let d = x - y;
    let r = d.norm();
    let t = p.kappa * r;
    let (kz, ko) = k01(t);
    let sl = kz / (2.0 * PI);
    let g = -p.kappa / (4.0 * PI) * ko / r;
    let wl = g * d.conj();
    let wtl = g * d;
    (sl * d1 + wl * d2, wtl * d1 - p.w / 4.0 * sl * d2)
}

fn spectrum(v: &[C]) -> Vec<C> {
    let n = v.len();
    let mut buf = v.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    for z in buf.iter_mut() {
        *z /= n as f64;
    }
    buf
}

/// Trigonometric interpolant sampled at `m ≥ N` equispaced points; the
/// Nyquist coefficient is split evenly between `±N/2`.
fn upsample(spec: &[C], m: usize) -> Vec<C> {
    let n = spec.len();
    let mut buf = vec![ZERO; m];
    let h = n / 2;
    for k in 0..n {
        if k < h {
            buf[k] = spec[k];
        } else if k > h {
            buf[m - (n - k)] = spec[k];
        }
    }
    if m > n {
        buf[h] = spec[h] * 0.5;
        buf[m - h] = spec[h] * 0.5;
    } else {
        buf[h] = spec[h];
    }
    FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
    buf
}

/// Trigonometric interpolant at relative position `x ∈ [0, 1)`.
fn trig_eval(spec: &[C], x: f64) -> C {
    let n = spec.len();
    let h = n / 2;
    let mut acc = ZERO;
    for k in 0..n {
        let f = if k < h { k as f64 } else if k > h { k as f64 - n as f64 } else { 0.0 };
        if k == h {
            acc += spec[k] * (2.0 * PI * h as f64 * x).cos();
        } else {
            acc += spec[k] * C::from_polar(1.0, 2.0 * PI * f * x);
        }
    }
    acc
}

/// `γ(w)φ = SL(w)φ₁ + WL(w)φ₂` at points at least `10⁻³ L` away from Σ.
pub fn evaluate_gamma_field(
    curve: &DiscretizedCurve,
    p: &SpectralParam,
    phi1: &[C],
    phi2: &[C],
    points: &[[f64; 2]],
) -> Result<PotentialField, LayerError> {
    let mut g = GammaField::new(curve, *p, phi1, phi2)?;
    let floor = DISTANCE_FLOOR * curve.length;
    let xs: Vec<C> = points.iter().map(|pt| C::new(pt[0], pt[1])).collect();
    for x in &xs {
        let (dist, _) = g.distance(*x);
        if dist < floor {
            return Err(LayerError::PointTooClose { x: x.re, y: x.im, dist, floor });
        }
    }
    let values = g.eval_many(&xs).into_iter().map(|v| v.0).collect();
    Ok(PotentialField { points: points.to_vec(), values })
}

/// Side of Σ: `Plus` is the bounded component Ω₊, `Minus` the exterior.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// Normal offset used for trace extrapolation.
pub fn trace_offset(curve: &DiscretizedCurve, p: &SpectralParam) -> f64 {
    (1e-2 * curve.length).min(0.05 / p.kappa.norm())
}

/// One-sided Dirichlet traces `(γ_D f, γ_D ∂_z̄ f)` of `f = γ(w)φ` at the
/// nodes, by Richardson extrapolation from offsets `h, h/2, h/4` along the
/// normal.
pub fn one_sided_traces(
    curve: &DiscretizedCurve,
    p: &SpectralParam,
    phi1: &[C],
    phi2: &[C],
    side: Side,
) -> Result<(Vec<C>, Vec<C>), LayerError> {
    let mut g = GammaField::new(curve, *p, phi1, phi2)?;
    let h = trace_offset(curve, p);
    let sign = if side == Side::Plus { -1.0 } else { 1.0 };
    let n = curve.n_nodes;
    let pts: Vec<C> = (0..3 * n)
        .map(|q| curve.points[q / 3] + curve.complex_normals[q / 3] * (sign * h * [1.0, 0.5, 0.25][q % 3]))
        .collect();
    let vals = g.eval_many(&pts);
    // second- and third-order extrapolants; their spread, measured against
    // the largest trace of each component, flags an offset that is too large
    let mut est = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for j in 0..n {
        let v = &vals[3 * j..3 * j + 3];
        for (part, e) in est.iter_mut().enumerate() {
            let pick = |k: usize| if part == 0 { v[k].0 } else { v[k].1 };
            let three = (pick(2) * 8.0 - pick(1) * 6.0 + pick(0)) / 3.0;
            let two = pick(2) * 2.0 - pick(1);
            e.push((three, two));
        }
    }
    for e in &est {
        let scale = e.iter().map(|t| t.0.norm()).fold(0.0, f64::max);
        if scale <= 1e-12 {
            continue;
        }
        for (j, t) in e.iter().enumerate() {
            let spread = (t.0 - t.1).norm() / scale;
            if spread > 1e-3 {
                return Err(LayerError::ExtrapolationDiverged { node: j, spread });
            }
        }
    }
    let [f, df] = est.map(|e| e.into_iter().map(|t| t.0).collect::<Vec<C>>());
    Ok((f, df))
}

// ---------------------------------------------------------------------------
// norms, Schur test, export

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<C>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

pub fn frobenius_norm(m: &DMatrix<C>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Kernels for the Schur-test comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SchurKernel {
    /// `(1/2π)|K₀(√|w| r)|` for real `w < 0`.
    SingleLayerModulus { w: f64 },
    /// `(κ/2π) K₁(κr) |⟨𝐧(y), x - y⟩| / r`, `κ = √|w|`: the modulus of the
    /// normal-derivative kernel, bounded on `C²` curves.
    K1DirectionalModulus { w: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchurCheck {
    pub discrete_norm: f64,
    pub analytic_bound: f64,
    pub bilip_constant: f64,
}

/// Default majorant `α(s) = (1/2π) K₀(√|w| s)` of the single-layer kernel.
pub fn k0_majorant(w: f64) -> impl Fn(f64) -> f64 {
    let k = (-w).sqrt();
    move |s: f64| k0(C::new(k * s, 0.0)).re / (2.0 * PI)
}

/// Largest sampled `|⟨𝐧(y), x - y⟩| / |x - y|²` over node pairs.
pub fn normal_chord_constant(curve: &DiscretizedCurve) -> f64 {
    let n = curve.n_nodes;
    let mut c: f64 = 0.0;
    for j in 0..n {
        for i in (0..n).filter(|&i| i != j) {
            let d = curve.points[i] - curve.points[j];
            c = c.max((curve.complex_normals[j].conj() * d).re.abs() / d.norm_sqr());
        }
    }
    c
}

/// Majorant `α(s) = c κ s K₁(κs) / 2π` of the directional kernel, with `c`
/// from [`normal_chord_constant`]; decreasing because `tK₁(t)` is.
pub fn k1_directional_majorant(w: f64, curve: &DiscretizedCurve) -> impl Fn(f64) -> f64 {
    let k = (-w).sqrt();
    let c = normal_chord_constant(curve);
    move |s: f64| if s == 0.0 { c / (2.0 * PI) } else { c * k * s * k1(C::new(k * s, 0.0)).re / (2.0 * PI) }
}

/// `∫₀^b α`, refusing majorants that are not integrable at the origin.
fn majorant_integral(alpha: &dyn Fn(f64) -> f64, b: f64) -> Result<f64, LayerError> {
    let head = adaptive_complex(|x| C::new(alpha(x), 0.0), 1e-12, 1e-6, 1e-14).re;
    let body = adaptive_complex(|x| C::new(alpha(x), 0.0), 1e-6, b, 1e-13).re;
    // a log singularity contributes ~1e-5 here, 1/s contributes ln 10⁶
    if !(head.is_finite() && body.is_finite()) || head > 1e-3 * (1.0 + body.abs()) {
        return Err(LayerError::MajorantNotIntegrable);
    }
    Ok(adaptive_complex(|x| C::new(alpha(x), 0.0), 0.0, b, 1e-13).re)
}

/// `∫₀^∞ α`, extending the range until the tail is negligible.
fn majorant_integral_infinite(alpha: &dyn Fn(f64) -> f64) -> Result<f64, LayerError> {
    let mut total = majorant_integral(alpha, 1.0)?;
    let mut a = 1.0;
    for _ in 0..60 {
        let piece = adaptive_complex(|x| C::new(alpha(x), 0.0), a, 2.0 * a, 1e-14).re;
        if !piece.is_finite() {
            break;
        }
        total += piece;
        if piece <= 1e-14 * total {
            return Ok(total);
        }
        a *= 2.0;
    }
    Err(LayerError::MajorantNotIntegrable)
}

fn directional_modulus(curve: &DiscretizedCurve, kappa: f64) -> DMatrix<C> {
    let n = curve.n_nodes;
    let h = curve.length / n as f64;
    DMatrix::from_fn(n, n, |i, j| {
        let v = if i == j {
            curve.curvature[j].abs() / (4.0 * PI)
        } else {
            let d = curve.points[i] - curve.points[j];
            let r = d.norm();
            kappa * k1(C::new(kappa * r, 0.0)).re * (curve.complex_normals[j].conj() * d).re.abs() / (2.0 * PI * r)
        };
        C::new(h * v, 0.0)
    })
}

/// Compares the discrete operator norm with `2 C_ζ⁻¹ ∫₀^{C_ζ L/2} α(s) ds`.
pub fn schur_bound_check(
    curve: &DiscretizedCurve,
    kernel: SchurKernel,
    alpha: &dyn Fn(f64) -> f64,
) -> Result<SchurCheck, LayerError> {
    let c = curve.bilip_constant;
    let integral = majorant_integral(alpha, c * curve.length / 2.0)?;
    let discrete_norm = match kernel {
        SchurKernel::SingleLayerModulus { w } => assemble_s(curve, &SpectralParam::real(w)?).spectral_norm(),
        SchurKernel::K1DirectionalModulus { w } => {
            SpectralParam::real(w)?;
            spectral_norm(&directional_modulus(curve, (-w).sqrt()))
        }
    };
    Ok(SchurCheck { discrete_norm, analytic_bound: 2.0 / c * integral, bilip_constant: c })
}

/// Potential-operator variant: the operator `L²(Σ) → L²(ℝ²)` with kernel
/// `a(x - y)`, `|a| ≤ α`, restricted to an `m × m` cell-centred grid on
/// `[-half_width, half_width]²` (cells closer than the distance floor to a
/// node are dropped), against
/// `(4/C_ζ ∫₀^{C_ζL/4} α^{2θ})^{1/2} (2π ∫₀^∞ α^{2(1-θ)} r dr)^{1/2}`.
pub fn potential_bound_check(
    curve: &DiscretizedCurve,
    kernel: &dyn Fn(f64) -> f64,
    alpha: &dyn Fn(f64) -> f64,
    theta: f64,
    half_width: f64,
    m: usize,
) -> Result<SchurCheck, LayerError> {
    let c = curve.bilip_constant;
    let first = majorant_integral(&|s| alpha(s).powf(2.0 * theta), c * curve.length / 4.0)?;
    let second = majorant_integral_infinite(&|r| alpha(r).powf(2.0 * (1.0 - theta)) * r)?;
    let bound = (4.0 / c * first).sqrt() * (2.0 * PI * second).sqrt();

    let h = 2.0 * half_width / m as f64;
    let sw = (curve.length / curve.n_nodes as f64).sqrt();
    let floor = DISTANCE_FLOOR * curve.length;
    let mut rows = Vec::new();
    for a in 0..m {
        for b in 0..m {
            let x = C::new(-half_width + (a as f64 + 0.5) * h, -half_width + (b as f64 + 0.5) * h);
            let d: Vec<f64> = curve.points.iter().map(|y| (x - y).norm()).collect();
            if d.iter().all(|&r| r >= floor) {
                rows.push(d);
            }
        }
    }
    let a = DMatrix::from_fn(rows.len(), curve.n_nodes, |q, j| C::new(h * sw * kernel(rows[q][j]), 0.0));
    let gram = a.adjoint() * &a;
    let discrete_norm = gram.symmetric_eigenvalues().iter().cloned().fold(0.0, f64::max).max(0.0).sqrt();
    Ok(SchurCheck { discrete_norm, analytic_bound: bound, bilip_constant: c })
}

/// Writes a matrix as CSV, one row per line, entries as `re,im` pairs.
pub fn write_csv(path: &Path, m: &DMatrix<C>) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for j in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|i| format!("{:.16e},{:.16e}", m[(j, i)].re, m[(j, i)].im)).collect();
        writeln!(f, "{}", row.join(","))?;
    }
    f.flush()
}

/// Samples of a function of the node index as a vector.
pub fn node_vector(curve: &DiscretizedCurve, f: impl Fn(usize) -> C) -> DVector<C> {
    DVector::from_fn(curve.n_nodes, |j, _| f(j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{discretize, CurveDescriptor};
    use crate::special_functions::{bessel_ik_real, bessel_ik_real_scaled};

    fn circle(n: usize) -> DiscretizedCurve {
        discretize(&CurveDescriptor::circle(1.0), n).unwrap()
    }

    fn mode(curve: &DiscretizedCurve, m: i32) -> DVector<C> {
        node_vector(curve, |j| C::from_polar(1.0, m as f64 * 2.0 * PI * j as f64 / curve.n_nodes as f64))
    }

    // symbols on the unit circle for w = -κ², κ real
    fn s_symbol(m: i32, kappa: f64) -> f64 {
        let (i, k) = bessel_ik_real_scaled(m.unsigned_abs(), kappa);
        i * k
    }

    fn w_symbol(m: i32, kappa: f64) -> f64 {
        let a = m.unsigned_abs();
        let (i, k) = bessel_ik_real_scaled(a, kappa);
        let (ip, kp) = bessel_ik_real_scaled(a + 1, kappa);
        // I'_a = I_{a+1} + (a/x) I_a,  K'_a = -K_{a+1} + (a/x) K_a
        let di = ip + a as f64 / kappa * i;
        let dk = -kp + a as f64 / kappa * k;
        0.5 * (0.5 * kappa * (di * k + i * dk) + m as f64 * i * k)
    }

    #[test]
    fn static_part_on_constants() {
        let c = circle(64);
        let w0 = static_w(&c);
        let v = &w0 * mode(&c, 0);
        for j in 0..64 {
            let th = 2.0 * PI * j as f64 / 64.0;
            assert!((v[j] - C::from_polar(-0.25, -th)).norm() < 1e-13);
        }
    }

    #[test]
    fn s_symbol_both_routes() {
        for (kappa, n) in [(1.0, 64), (3.0, 128)] {
            let c = circle(n);
            let p = SpectralParam::real(-kappa * kappa).unwrap();
            for method in [AssemblyMethod::Kress, AssemblyMethod::ProductIntegration] {
                let s = assemble_layers(&c, &p, Need::S, method).s.unwrap();
                for m in [0, 1, 2, 7] {
                    let v = &s * mode(&c, m);
                    let e = mode(&c, m) * C::new(s_symbol(m, kappa), 0.0);
                    let err = (v - &e).norm() / e.norm();
                    assert!(err < 1e-11, "{method:?} κ={kappa} m={m}: {err:e}");
                }
            }
        }
    }

    #[test]
    fn w_symbol_both_routes() {
        for (kappa, n) in [(1.0, 64), (2.5, 128)] {
            let c = circle(n);
            let p = SpectralParam::real(-kappa * kappa).unwrap();
            for method in [AssemblyMethod::Kress, AssemblyMethod::ProductIntegration] {
                let w = assemble_layers(&c, &p, Need { s: false, w: true, wt: false }, method).w.unwrap();
                for m in [-3, 0, 1, 2, 5] {
                    let v = &w * mode(&c, m);
                    let e = mode(&c, m - 1) * C::new(w_symbol(m, kappa), 0.0);
                    let err = (v - &e).norm() / e.norm();
                    assert!(err < 1e-10, "{method:?} κ={kappa} m={m}: {err:e}");
                }
            }
        }
    }

    #[test]
    fn large_kappa_product_integration() {
        let c = circle(256);
        for kappa in [30.0, 300.0, 1000.0] {
            let p = SpectralParam::real(-kappa * kappa).unwrap();
            let set = assemble_layers(&c, &p, Need::ALL, AssemblyMethod::Auto);
            let s = set.s.unwrap();
            let w = set.w.unwrap();
            for m in [0, 3, 20] {
                let v = &s * mode(&c, m);
                let e = mode(&c, m) * C::new(s_symbol(m, kappa), 0.0);
                assert!((v - &e).norm() / e.norm() < 1e-10, "S κ={kappa} m={m}");
                let v = &w * mode(&c, m);
                let e = mode(&c, m - 1) * C::new(w_symbol(m, kappa), 0.0);
                assert!((v - &e).norm() < 1e-10 * (1.0 + e.norm()), "W κ={kappa} m={m}");
            }
        }
    }

    #[test]
    fn weyl_symmetry_complex_w() {
        let c = discretize(&CurveDescriptor::ellipse(1.5, 1.0), 64).unwrap();
        for w in [C::new(-2.0, 0.0), C::new(1.0, 1.0), C::new(-50.0, 3.0)] {
            let p = SpectralParam::new(w).unwrap();
            let m = assemble_m(&c, &p).to_dense();
            let mb = assemble_m(&c, &p.conj()).to_dense();
            assert!(frobenius_norm(&(&m - mb.adjoint())) < 1e-12);
            let wt = assemble_w_tilde(&c, &p).matrix;
            let wb = assemble_w(&c, &p.conj()).matrix;
            assert!(frobenius_norm(&(wt + wb.adjoint())) < 1e-12);
        }
    }

    #[test]
    fn routes_agree_on_ellipse() {
        let c = discretize(&CurveDescriptor::ellipse(1.5, 1.0), 128).unwrap();
        let p = SpectralParam::new(C::new(-4.0, 1.0)).unwrap();
        let a = assemble_layers(&c, &p, Need::ALL, AssemblyMethod::Kress);
        let b = assemble_layers(&c, &p, Need::ALL, AssemblyMethod::ProductIntegration);
        let phi = node_vector(&c, |j| C::new((2.0 * PI * j as f64 / 128.0).cos().exp(), 0.3));
        for (x, y) in [(a.s, b.s), (a.w, b.w), (a.wt, b.wt)] {
            let (x, y) = (x.unwrap() * &phi, y.unwrap() * &phi);
            assert!((&x - &y).norm() / x.norm() < 1e-9, "{}", (&x - &y).norm() / x.norm());
        }
    }

    #[test]
    fn resolution_convergence_on_smooth_density() {
        // coarse nodes are every other fine node, so actions compare pointwise
        let p = SpectralParam::new(C::new(-3.0, 0.5)).unwrap();
        for desc in [CurveDescriptor::ellipse(1.5, 1.0), CurveDescriptor::star(1.0, 0.2, 3)] {
            let mut errs = Vec::new();
            for n in [32, 64, 128] {
                let act = |n: usize| {
                    let c = discretize(&desc, n).unwrap();
                    let phi = node_vector(&c, |j| C::new((2.0 * PI * j as f64 / n as f64).cos().exp(), 0.0));
                    let set = assemble_layers(&c, &p, Need { s: true, w: true, wt: false }, AssemblyMethod::Auto);
                    (set.s.unwrap() * &phi, set.w.unwrap() * &phi)
                };
                let ((s1, w1), (s2, w2)) = (act(n), act(2 * n));
                let e = (0..n).map(|j| (s1[j] - s2[2 * j]).norm().max((w1[j] - w2[2 * j]).norm())).fold(0.0, f64::max);
                errs.push(e);
            }
            assert!(errs[2] < 1e-9 || errs[1] / errs[2] >= 8.0, "{desc:?}: {errs:?}");
            assert!(errs[0] / errs[1] >= 8.0, "{desc:?}: {errs:?}");
        }
    }

    #[test]
    fn circulant_on_circle() {
        let c = circle(32);
        let p = SpectralParam::new(C::new(-1.0, 0.5)).unwrap();
        let m = assemble_layers(&c, &p, Need::ALL, AssemblyMethod::Auto);
        let s = m.s.unwrap();
        for j in 0..32 {
            for i in 0..32 {
                assert!((s[(j, i)] - s[((j + 1) % 32, (i + 1) % 32)]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn potential_matches_direct_quadrature() {
        let c = circle(64);
        let p = SpectralParam::real(-1.0).unwrap();
        let one = vec![C::new(1.0, 0.0); 64];
        let zero = vec![ZERO; 64];
        let pts = [[0.2, 0.1], [2.0, 0.0], [0.0, -1.5], [0.9, 0.0]];
        let f = evaluate_gamma_field(&c, &p, &one, &zero, &pts).unwrap();
        for (x, v) in pts.iter().zip(&f.values) {
            let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
            // SL 1 = I₀(min)K₀(max)·R for the unit circle
            let (a, b) = if rho < 1.0 { (rho, 1.0) } else { (1.0, rho) };
            let exact = bessel_ik_real(0, a).unwrap().0 * bessel_ik_real(0, b).unwrap().1;
            assert!((v.re - exact).abs() < 1e-10 && v.im.abs() < 1e-12, "{rho}: {} vs {exact}", v.re);
        }
        assert!(matches!(
            evaluate_gamma_field(&c, &p, &one, &zero, &[[1.0 + 1e-4, 0.0]]),
            Err(LayerError::PointTooClose { .. })
        ));
    }

    #[test]
    fn adaptive_fallback_near_curve() {
        let c = circle(32);
        let p = SpectralParam::real(-1.0).unwrap();
        let one = vec![C::new(1.0, 0.0); 32];
        let zero = vec![ZERO; 32];
        let mut g = GammaField::new(&c, p, &one, &zero).unwrap();
        let rho = 1.0 - 1e-5;
        let v = g.eval(C::new(rho, 0.0)).0;
        let exact = bessel_ik_real(0, rho).unwrap().0 * bessel_ik_real(0, 1.0).unwrap().1;
        assert!((v.re - exact).abs() < 1e-8, "{} vs {exact}", v.re);
    }

    #[test]
    fn traces_jump_relations() {
        let c = circle(64);
        let p = SpectralParam::real(-1.0).unwrap();
        let phi: Vec<C> = mode(&c, 1).iter().cloned().collect();
        let zero = vec![ZERO; 64];
        let (fp, _) = one_sided_traces(&c, &p, &zero, &phi, Side::Plus).unwrap();
        let (fm, _) = one_sided_traces(&c, &p, &zero, &phi, Side::Minus).unwrap();
        for j in 0..64 {
            let jump = (fp[j] - fm[j]) * c.complex_normals[j] * 2.0;
            assert!((jump - phi[j]).norm() < 1e-4, "{j}: {jump}");
        }
    }

    #[test]
    fn trace_average_and_single_layer_continuity() {
        let c = circle(64);
        let p = SpectralParam::new(C::new(-1.0, 0.3)).unwrap();
        let phi: Vec<C> = (0..64).map(|j| C::from_polar(1.0, 2.0 * PI * j as f64 / 64.0) + 0.5).collect();
        let zero = vec![ZERO; 64];
        let (fp, _) = one_sided_traces(&c, &p, &zero, &phi, Side::Plus).unwrap();
        let (fm, _) = one_sided_traces(&c, &p, &zero, &phi, Side::Minus).unwrap();
        let w = assemble_w(&c, &p).apply(&DVector::from_vec(phi.clone()));
        let avg = DVector::from_fn(64, |j, _| (fp[j] + fm[j]) * 0.5);
        assert!((&avg - &w).norm() / w.norm() < 1e-4, "{}", (&avg - &w).norm() / w.norm());
        let (sp, _) = one_sided_traces(&c, &p, &phi, &zero, Side::Plus).unwrap();
        let (sm, _) = one_sided_traces(&c, &p, &phi, &zero, Side::Minus).unwrap();
        let scale = sp.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(sp.iter().zip(&sm).all(|(a, b)| (a - b).norm() < 1e-4 * scale));
    }

    #[test]
    fn field_solves_helmholtz_and_decays() {
        let c = discretize(&CurveDescriptor::star(1.0, 0.2, 3), 64).unwrap();
        let w = C::new(-1.0, 0.4);
        let p = SpectralParam::new(w).unwrap();
        let phi1: Vec<C> = (0..64).map(|j| C::new((2.0 * PI * j as f64 / 64.0).cos().exp(), 0.0)).collect();
        let phi2: Vec<C> = (0..64).map(|j| C::from_polar(0.4, -2.0 * PI * j as f64 / 64.0)).collect();
        let mut g = GammaField::new(&c, p, &phi1, &phi2).unwrap();
        let h = 1e-3;
        for x in [C::new(0.1, 0.2), C::new(-0.4, 0.0), C::new(2.0, 1.0)] {
            let u = g.eval(x).0;
            let lap = (g.eval(x + h).0 + g.eval(x - h).0 + g.eval(x + C::i() * h).0 + g.eval(x - C::i() * h).0 - u * 4.0) / (h * h);
            let res = (-lap - w * u).norm() / u.norm();
            assert!(res < 1e-4, "{x}: {res:e}");
        }
        assert!(g.eval(C::new(10.0, 0.0)).0.norm() < g.eval(C::new(5.0, 0.0)).0.norm());
    }

    #[test]
    fn greens_identity_on_both_sides() {
        // ∫_{Ω±} (∂_z̄f·h + f·∂_z̄h) = ±½∮ 𝐧 f h, i.e. ⟨∂_z̄f, g⟩ + ⟨f, ∂_z g⟩ for g = h̄
        let n = 64;
        let c = circle(n);
        let p = SpectralParam::new(C::new(-1.0, 0.5)).unwrap();
        let th = |j: usize| 2.0 * PI * j as f64 / n as f64;
        let f1: Vec<C> = (0..n).map(|j| C::from_polar(1.0, th(j)) + 0.5).collect();
        let f2: Vec<C> = (0..n).map(|j| C::new(0.3 * (2.0 * th(j)).cos(), 0.1)).collect();
        let h1: Vec<C> = (0..n).map(|j| C::new(th(j).sin(), 0.0)).collect();
        let h2: Vec<C> = (0..n).map(|j| C::from_polar(0.5, -th(j))).collect();
        let mut f = GammaField::new(&c, p, &f1, &f2).unwrap();
        let mut h = GammaField::new(&c, p, &h1, &h2).unwrap();
        let (gx, gw) = crate::quadrature::gauss_legendre(24);
        let mut area = |panels: &[(f64, f64)]| {
            let mut sum = ZERO;
            for &(a, b) in panels {
                for (x, wt) in gx.iter().zip(&gw) {
                    let r = 0.5 * (a + b) + 0.5 * (b - a) * x;
                    for j in 0..n {
                        let z = C::from_polar(r, th(j));
                        let ((fv, fd), (hv, hd)) = (f.eval(z), h.eval(z));
                        sum += (fd * hv + fv * hd) * (0.5 * (b - a) * wt * r * 2.0 * PI / n as f64);
                    }
                }
            }
            sum
        };
        let inner = area(&[(0.0, 0.5), (0.5, 0.9), (0.9, 1.0)]);
        let outer = area(&[(1.0, 1.1), (1.1, 1.5), (1.5, 3.0), (3.0, 8.0), (8.0, 30.0)]);
        for (side, vol, sign) in [(Side::Plus, inner, 1.0), (Side::Minus, outer, -1.0)] {
            let (tf, _) = one_sided_traces(&c, &p, &f1, &f2, side).unwrap();
            let (th_, _) = one_sided_traces(&c, &p, &h1, &h2, side).unwrap();
            let bdry: C = (0..n).map(|j| c.complex_normals[j] * tf[j] * th_[j] * c.weights[j]).sum::<C>() * 0.5 * sign;
            assert!((vol - bdry).norm() < 1e-4 * (1.0 + bdry.norm()), "{side:?}: {vol} vs {bdry}");
        }
    }

    #[test]
    fn schur_bounds_hold_and_scale() {
        let e = discretize(&CurveDescriptor::ellipse(1.5, 1.0), 128).unwrap();
        for w in [-1.0, -4.0] {
            for c in [circle(128), e.clone()] {
                let s = schur_bound_check(&c, SchurKernel::SingleLayerModulus { w }, &k0_majorant(w)).unwrap();
                assert!(s.discrete_norm <= 1.01 * s.analytic_bound, "{w}: {s:?}");
                let d = schur_bound_check(&c, SchurKernel::K1DirectionalModulus { w }, &k1_directional_majorant(w, &c)).unwrap();
                assert!(d.discrete_norm <= 1.01 * d.analytic_bound, "{w}: {d:?}");
            }
        }
    }

    #[test]
    fn circle_normal_chord_constant() {
        // ⟨𝐧(y), x - y⟩ = |x - y|²/2 on the unit circle
        assert!((normal_chord_constant(&circle(64)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_integrable_majorant_rejected() {
        let e = schur_bound_check(&circle(32), SchurKernel::SingleLayerModulus { w: -1.0 }, &|s| 1.0 / s);
        assert_eq!(e, Err(LayerError::MajorantNotIntegrable));
    }

    #[test]
    fn potential_variant_bound() {
        let c = circle(64);
        let alpha = k0_majorant(-1.0);
        let p = potential_bound_check(&c, &alpha, &alpha, 0.5, 6.0, 120).unwrap();
        assert!(p.discrete_norm > 0.0 && p.discrete_norm <= 1.01 * p.analytic_bound, "{p:?}");
        // ∫₀^∞ K₀(r) r dr = 1, so the second factor is exactly 1
        let first = majorant_integral(&|s| alpha(s), c.bilip_constant * c.length / 4.0).unwrap();
        assert!((p.analytic_bound - (4.0 / c.bilip_constant * first).sqrt()).abs() < 1e-8);
    }
}
