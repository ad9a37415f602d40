//! Birman–Schwinger eigenvalue search on `(-∞, 0)`, the Krein resolvent
//! formula on a grid, and the large-`|w|` studies of `S` and `W`.

mod asymptotics;
mod krein;

pub use asymptotics::*;
pub use krein::*;

use crate::geometry::DiscretizedCurve;
use crate::interactions::{FactorMode, Factorization, InteractionError, InteractionSpec, InteractionVariant};
use crate::layer_operators::{assemble_m_partial, one_sided_traces, GammaField, LayerError, Side, SpectralParam, WeylBlockOperator};
use crate::rootfind::{brent, golden_min};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use thiserror::Error;

type C = Complex64;

/// Default acceptance level of the indicator at a refined tangential root.
pub const ROOT_ACCEPT: f64 = 1e-6;
/// Roots closer than this relative distance are merged.
pub const DEDUP_REL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Interaction(#[from] InteractionError),
    #[error("invalid scan range [{0}, {1}]: must lie in (-inf, 0) with at least 64 points")]
    InvalidRange(f64, f64),
    #[error("w = {w} is too close to the spectrum (indicator {indicator:.3e})")]
    NearSpectrum { w: C, indicator: f64 },
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("layer term at w = {0} coincides with the resolvent parameter")]
    CoincidentParameter(C),
}

/// Memo of Weyl functions for one curve, shared between problems that scan
/// the same grid. Entries stop being stored once `capacity` is reached.
pub struct WeylCache<'a> {
    curve: &'a DiscretizedCurve,
    capacity: usize,
    store: Mutex<HashMap<(u64, u64, bool, bool), Arc<WeylBlockOperator>>>,
}

impl<'a> WeylCache<'a> {
    pub fn new(curve: &'a DiscretizedCurve, capacity: usize) -> Self {
        Self { curve, capacity, store: Mutex::new(HashMap::new()) }
    }

    pub fn len(&self) -> usize {
        self.store.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, p: &SpectralParam, diag: bool, off: bool) -> Arc<WeylBlockOperator> {
        let key = |d, o| (p.w.re.to_bits(), p.w.im.to_bits(), d, o);
        {
            let store = self.store.lock().unwrap();
            for k in [key(true, true), key(diag, off)] {
                if let Some(m) = store.get(&k) {
                    return m.clone();
                }
            }
        }
        let m = Arc::new(assemble_m_partial(self.curve, p, diag, off));
        let mut store = self.store.lock().unwrap();
        if store.len() < self.capacity {
            store.insert(key(diag, off), m.clone());
        }
        m
    }
}

/// One indicator evaluation.
#[derive(Clone, Debug, Serialize)]
pub struct BSSample {
    pub w: f64,
    /// Smallest singular value of `I + B₂M(w)B₁`.
    pub indicator: f64,
    /// `det(I + B₂M(w)B₁)`, real for real `w` up to rounding.
    pub det: f64,
    /// Eigenvalues of `A(w) = -|w|^{-1/2} B^{1/2}M(w)B^{1/2}`, decreasing
    /// (definite `B` only).
    pub mu_values: Vec<f64>,
}

/// `I + B₂M(w)B₁` for a fixed curve and factorization.
pub struct BsProblem<'a> {
    pub curve: &'a DiscretizedCurve,
    pub factorization: Factorization,
    pub label: String,
    comps: (bool, bool),
    cache: Option<&'a WeylCache<'a>>,
}

impl<'a> BsProblem<'a> {
    /// Uses the lowest-dimensional factorization available for `spec`.
    pub fn new(curve: &'a DiscretizedCurve, spec: &InteractionSpec) -> Result<Self, SolverError> {
        let f = spec.factorize_default(curve)?;
        Ok(Self::with_factorization(curve, f, &spec.label))
    }

    pub fn with_factorization(curve: &'a DiscretizedCurve, factorization: Factorization, label: &str) -> Self {
        let comps = factorization.support();
        Self { curve, factorization, label: label.to_string(), comps, cache: None }
    }

    pub fn with_cache(mut self, cache: &'a WeylCache<'a>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn dim_k(&self) -> usize {
        self.factorization.dim_k
    }

    /// `(diagonal, off-diagonal)` Weyl blocks that enter `B₂MB₁`.
    pub fn needed_blocks(&self) -> (bool, bool) {
        (self.comps.0 || self.comps.1, self.comps.0 && self.comps.1)
    }

    pub fn weyl(&self, p: &SpectralParam) -> Arc<WeylBlockOperator> {
        let (d, o) = self.needed_blocks();
        match self.cache {
            Some(c) => c.get(p, d, o),
            None => Arc::new(assemble_m_partial(self.curve, p, d, o)),
        }
    }

    /// `B₂ M B₁` on 𝒦.
    pub fn reduced(&self, m: &WeylBlockOperator) -> DMatrix<C> {
        let n = self.curve.n_nodes;
        let k = self.dim_k();
        let f = &self.factorization;
        let active = [self.comps.0, self.comps.1];
        let mut q = DMatrix::zeros(k, k);
        for b in 0..2 {
            if !active[b] {
                continue;
            }
            let b1 = f.b1.rows(b * n, n);
            for a in 0..2 {
                if !active[a] {
                    continue;
                }
                let mb = &m.blocks[a][b] * b1;
                q += f.b2.columns(a * n, n) * mb;
            }
        }
        q
    }

    pub fn system(&self, w: C) -> Result<(SpectralParam, DMatrix<C>), SolverError> {
        let p = SpectralParam::new(w)?;
        let m = self.weyl(&p);
        let k = self.dim_k();
        Ok((p, DMatrix::identity(k, k) + self.reduced(&m)))
    }

    /// Smallest singular value, capped at 1 in sqrt mode where the
    /// complement of the range of `B` contributes singular values 1.
    pub fn indicator_of(&self, a: &DMatrix<C>) -> f64 {
        if a.is_empty() {
            return 1.0;
        }
        let s = a.clone().singular_values().iter().cloned().fold(f64::INFINITY, f64::min);
        if self.factorization.mode == FactorMode::Sqrt {
            s.min(1.0)
        } else {
            s
        }
    }

    pub fn sample(&self, w: f64) -> Result<BSSample, SolverError> {
        let (_, a) = self.system(C::new(w, 0.0))?;
        let indicator = self.indicator_of(&a);
        let det = if a.is_empty() { 1.0 } else { a.clone().determinant().re };
        let mu_values = if self.factorization.definite_sign.is_some() && !a.is_empty() {
            let k = a.nrows();
            let q = &a - DMatrix::<C>::identity(k, k);
            let h = (&q + q.adjoint()) * C::new(-0.5 / w.abs().sqrt(), 0.0);
            let mut mu: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().cloned().collect();
            mu.sort_by(|x, y| y.partial_cmp(x).unwrap());
            mu
        } else {
            Vec::new()
        };
        Ok(BSSample { w, indicator, det, mu_values })
    }
}

/// Log-spaced scan of `[w_min, w_max] ⊂ (-∞, 0)` and refinement settings.
#[derive(Clone, Debug, Serialize)]
pub struct ScanConfig {
    pub w_min: f64,
    pub w_max: f64,
    pub points: usize,
    /// `|w|`-relative root tolerance.
    pub rel_tol: f64,
    pub residuals: bool,
}

impl ScanConfig {
    pub fn new(w_min: f64, w_max: f64) -> Self {
        Self { w_min, w_max, points: 128, rel_tol: 1e-10, residuals: true }
    }

    /// Default range: down to `-256/b²` of the smallest declared law value
    /// for condition-(S) specs, `-10³` otherwise; up to `-10⁻⁴`.
    pub fn for_spec(spec: &InteractionSpec) -> Self {
        let w_min = match (&spec.variant, spec.law_values.last()) {
            (InteractionVariant::ConditionS { .. }, Some(b)) => -256.0 / (b * b),
            _ => -1e3,
        };
        Self::new(w_min, -1e-4)
    }

    fn validate(&self) -> Result<(), SolverError> {
        if !(self.w_min < self.w_max && self.w_max < 0.0 && self.points >= 64 && self.w_min.is_finite()) {
            return Err(SolverError::InvalidRange(self.w_min, self.w_max));
        }
        Ok(())
    }

    /// Scan abscissae, increasing in `|w|`.
    pub fn grid(&self) -> Vec<f64> {
        let (a, b) = (self.w_max.abs().ln(), self.w_min.abs().ln());
        (0..self.points).map(|i| -(a + (b - a) * i as f64 / (self.points - 1) as f64).exp()).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenResult {
    pub w_star: f64,
    pub multiplicity: usize,
    /// Smallest singular values of `I + B₂M(w*)B₁` (up to 4).
    pub singular_values: Vec<f64>,
    #[serde(skip)]
    pub null_vectors: Vec<DVector<C>>,
    /// Boundary densities `B₁ψ` (stacked `φ₁`, `φ₂`).
    #[serde(skip)]
    pub densities: Vec<DVector<C>>,
    pub residual_bs: f64,
    pub residual_pde: f64,
    pub residual_tc: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenSearch {
    pub eigenvalues: Vec<EigenResult>,
    pub scan: Vec<BSSample>,
    pub warnings: Vec<String>,
    pub dim_k: usize,
    pub mode: FactorMode,
}

impl EigenSearch {
    /// Eigenvalues with multiplicity, increasing.
    pub fn values(&self) -> Vec<f64> {
        self.eigenvalues.iter().flat_map(|e| std::iter::repeat_n(e.w_star, e.multiplicity)).collect()
    }

    pub fn count(&self) -> usize {
        self.eigenvalues.iter().map(|e| e.multiplicity).sum()
    }
}

/// Locates the eigenvalues of `T_B` in the configured range.
pub fn find_eigenvalues(problem: &BsProblem, cfg: &ScanConfig) -> Result<EigenSearch, SolverError> {
    cfg.validate()?;
    let ws = cfg.grid();
    let ts: Vec<f64> = ws.iter().map(|w| w.abs().ln()).collect();
    let mut scan = Vec::with_capacity(ws.len());
    for &w in &ws {
        scan.push(problem.sample(w)?);
    }
    let mut warnings = Vec::new();
    let xtol = cfg.rel_tol;
    let mut roots: Vec<f64> = Vec::new();
    let w_of = |t: f64| -t.exp();
    let definite = problem.factorization.definite_sign.is_some();
    let eval_err = std::cell::RefCell::new(None);
    let guard = |r: Result<BSSample, SolverError>| -> Option<BSSample> {
        match r {
            Ok(s) => Some(s),
            Err(e) => {
                eval_err.borrow_mut().get_or_insert(e);
                None
            }
        }
    };

    if definite {
        // f_k(w) = 1/√|w| - μ_k(w) changes sign at each eigenvalue
        let k = problem.dim_k();
        for idx in 0..k {
            let f_at = |i: usize| (-0.5 * ts[i]).exp() - scan[i].mu_values[idx];
            for i in 0..ts.len() - 1 {
                let (fa, fb) = (f_at(i), f_at(i + 1));
                if fa.signum() != fb.signum() || fa == 0.0 {
                    let g = |t: f64| match guard(problem.sample(w_of(t))) {
                        Some(s) => (-0.5 * t).exp() - s.mu_values[idx],
                        None => 0.0,
                    };
                    roots.push(w_of(brent(g, ts[i], ts[i + 1], fa, fb, xtol)));
                }
            }
        }
    } else {
        let mut bracketed = vec![false; ts.len()];
        for i in 0..ts.len() - 1 {
            let (fa, fb) = (scan[i].det, scan[i + 1].det);
            if fa.signum() != fb.signum() {
                bracketed[i] = true;
                bracketed[i + 1] = true;
                let g = |t: f64| guard(problem.sample(w_of(t))).map(|s| s.det).unwrap_or(0.0);
                roots.push(w_of(brent(g, ts[i], ts[i + 1], fa, fb, xtol)));
            }
        }
        // tangential zeros: local minima of the indicator without a sign change
        for i in 1..ts.len() - 1 {
            let s = scan[i].indicator;
            if s < scan[i - 1].indicator && s < scan[i + 1].indicator && !bracketed[i] && s < 0.1 {
                let g = |t: f64| guard(problem.sample(w_of(t))).map(|s| s.indicator).unwrap_or(f64::INFINITY);
                let (t, v) = golden_min(g, ts[i - 1], ts[i + 1], xtol);
                if v <= ROOT_ACCEPT {
                    roots.push(w_of(t));
                }
            }
        }
    }
    if let Some(e) = eval_err.into_inner() {
        return Err(e);
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut groups: Vec<(f64, usize)> = Vec::new();
    for r in roots {
        match groups.last_mut() {
            Some((w, m)) if (r - *w).abs() <= DEDUP_REL * w.abs() => *m += 1,
            _ => groups.push((r, 1)),
        }
    }
    if groups.is_empty() {
        warnings.push(format!("NoBracket: no eigenvalue found in [{}, {}]", cfg.w_min, cfg.w_max));
    }
    let mut eigenvalues = Vec::new();
    for (w, merged) in groups {
        let near_edge = [cfg.w_min, cfg.w_max].iter().any(|e| (w - e).abs() <= 1e-3 * e.abs());
        if near_edge {
            let msg = format!("RootAtRangeBoundary: w = {w:.6e}");
            log::warn!("{msg}");
            warnings.push(msg);
        }
        let mut res = extract(problem, w, merged)?;
        if cfg.residuals {
            let mut pde: f64 = 0.0;
            let mut tc: f64 = 0.0;
            for phi in &res.densities {
                match eigen_residuals(problem, w, phi) {
                    Ok((a, b)) => {
                        pde = pde.max(a);
                        tc = tc.max(b);
                    }
                    Err(e) => {
                        warnings.push(format!("residuals at w = {w:.6e}: {e}"));
                        pde = f64::NAN;
                        tc = f64::NAN;
                    }
                }
            }
            res.residual_pde = pde;
            res.residual_tc = tc;
        }
        eigenvalues.push(res);
    }
    log::info!("{}: {} eigenvalue(s) in [{:.3e}, {:.3e}]", problem.label, eigenvalues.len(), cfg.w_min, cfg.w_max);
    Ok(EigenSearch {
        eigenvalues,
        scan,
        warnings,
        dim_k: problem.dim_k(),
        mode: problem.factorization.mode,
    })
}

/// Null space of `I + B₂M(w)B₁` at a refined root.
fn extract(problem: &BsProblem, w: f64, merged: usize) -> Result<EigenResult, SolverError> {
    let (_, a) = problem.system(C::new(w, 0.0))?;
    let k = a.nrows();
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].partial_cmp(&svd.singular_values[j]).unwrap());
    let smin = svd.singular_values[order[0]];
    let by_threshold = order.iter().filter(|&&i| svd.singular_values[i] <= 10.0 * smin).count();
    let multiplicity = merged.max(by_threshold).min(k);
    let mut null_vectors = Vec::new();
    let mut densities = Vec::new();
    let mut residual_bs: f64 = 0.0;
    for &i in order.iter().take(multiplicity) {
        let psi: DVector<C> = v_t.row(i).adjoint();
        residual_bs = residual_bs.max((&a * &psi).norm() / psi.norm());
        densities.push(&problem.factorization.b1 * &psi);
        null_vectors.push(psi);
    }
    Ok(EigenResult {
        w_star: w,
        multiplicity,
        singular_values: order.iter().take(4).map(|&i| svd.singular_values[i]).collect(),
        null_vectors,
        densities,
        residual_bs,
        residual_pde: f64::NAN,
        residual_tc: f64::NAN,
    })
}

/// `(residual_pde, residual_tc)` of the eigenfunction `γ(w)φ`.
pub fn eigen_residuals(problem: &BsProblem, w: f64, phi: &DVector<C>) -> Result<(f64, f64), SolverError> {
    let curve = problem.curve;
    let n = curve.n_nodes;
    let p = SpectralParam::real(w)?;
    let phi1: Vec<C> = phi.rows(0, n).iter().cloned().collect();
    let phi2: Vec<C> = phi.rows(n, n).iter().cloned().collect();

    // Helmholtz residual by the five-point stencil at 8 + 8 probes
    let kappa = p.kappa.norm();
    let d = (0.05 * curve.length).min(2.0 / kappa);
    let hs = (0.25 * d).min(0.02 / kappa);
    let mut pts = Vec::new();
    for q in 0..8 {
        let j = q * n / 8;
        for sign in [-1.0, 1.0] {
            let x = curve.points[j] + curve.complex_normals[j] * (sign * d);
            for off in [C::new(0.0, 0.0), C::new(hs, 0.0), C::new(-hs, 0.0), C::new(0.0, hs), C::new(0.0, -hs)] {
                pts.push(x + off);
            }
        }
    }
    let mut g = GammaField::new(curve, p, &phi1, &phi2)?;
    let vals = g.eval_many(&pts);
    let (mut num, mut den) = (0.0, 0.0);
    for probe in vals.chunks(5) {
        let f0 = probe[0].0;
        let lap = (probe[1].0 + probe[2].0 + probe[3].0 + probe[4].0 - f0 * 4.0) / (hs * hs);
        num += (lap + f0 * w).norm_sqr();
        den += (f0 * w).norm_sqr();
    }
    let pde = if den > 0.0 { (num / den).sqrt() } else { 0.0 };

    // transmission condition Γ₀f + BΓ₁f = 0 from extrapolated traces
    let (fp, dp) = one_sided_traces(curve, &p, &phi1, &phi2, Side::Plus)?;
    let (fm, dm) = one_sided_traces(curve, &p, &phi1, &phi2, Side::Minus)?;
    let mut g0 = DVector::zeros(2 * n);
    let mut g1 = DVector::zeros(2 * n);
    for j in 0..n {
        let nn = curve.complex_normals[j];
        g0[j] = nn.conj() * (dp[j] - dm[j]) * 2.0;
        g0[n + j] = nn * (fp[j] - fm[j]) * 2.0;
        g1[j] = (fp[j] + fm[j]) * 0.5;
        g1[n + j] = -(dp[j] + dm[j]) * 0.5;
    }
    let f = &problem.factorization;
    let r = &g0 + &f.b1 * (&f.b2 * &g1);
    let tc = r.norm() / g1.norm().max(1e-300);
    Ok((pde, tc))
}

#[cfg(test)]
mod tests;
