//! Behaviour of `S(w)` and `W(w)` as `w → -∞`.

use super::SolverError;
use crate::geometry::DiscretizedCurve;
use crate::layer_operators::{assemble_layers, spectral_norm, AssemblyMethod, Need, SpectralParam};
use crate::rootfind::linear_fit;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

type C = Complex64;

#[derive(Clone, Debug, Serialize)]
pub struct SStudyRow {
    pub w: f64,
    /// `‖√|w| S(w)φ - φ/2‖ / ‖φ‖` per density.
    pub density_errors: Vec<f64>,
    /// `‖√|w| S(w)‖`.
    pub scaled_norm: f64,
    /// `‖√|w| S(w)K - K/2‖` for the declared compact `K`.
    pub compact_error: Option<f64>,
}

pub fn asymptotic_study_s(
    curve: &DiscretizedCurve,
    densities: &[DVector<C>],
    w_list: &[f64],
    compact: Option<&DMatrix<C>>,
) -> Result<Vec<SStudyRow>, SolverError> {
    let mut rows = Vec::with_capacity(w_list.len());
    for &w in w_list {
        let p = SpectralParam::real(w)?;
        let s = assemble_layers(curve, &p, Need::S, AssemblyMethod::Auto).s.expect("requested") * C::new(w.abs().sqrt(), 0.0);
        let density_errors = densities.iter().map(|phi| (&s * phi - phi * C::new(0.5, 0.0)).norm() / phi.norm()).collect();
        let compact_error = compact.map(|k| spectral_norm(&(&s * k - k * C::new(0.5, 0.0))));
        rows.push(SStudyRow { w, density_errors, scaled_norm: spectral_norm(&s), compact_error });
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct WStudyRow {
    pub w: f64,
    pub norm: f64,
    /// `|w|^{-τ}‖W(w)‖`.
    pub scaled: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WStudy {
    pub tau: f64,
    pub rows: Vec<WStudyRow>,
    /// Log-log slope of `‖W(w)‖` against `|w|`.
    pub growth_exponent: f64,
}

pub fn asymptotic_study_w(curve: &DiscretizedCurve, tau: f64, w_list: &[f64]) -> Result<WStudy, SolverError> {
    let mut rows = Vec::with_capacity(w_list.len());
    for &w in w_list {
        let p = SpectralParam::real(w)?;
        let wm = assemble_layers(curve, &p, Need { s: false, w: true, wt: false }, AssemblyMethod::Auto).w.expect("requested");
        let norm = spectral_norm(&wm);
        rows.push(WStudyRow { w, norm, scaled: w.abs().powf(-tau) * norm });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.w.abs().ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.norm.ln()).collect();
    let growth_exponent = if rows.len() >= 2 { linear_fit(&x, &y).1 } else { 0.0 };
    Ok(WStudy { tau, rows, growth_exponent })
}

/// Same study with a different `τ`, without reassembling.
pub fn rescale_w_study(study: &WStudy, tau: f64) -> WStudy {
    let rows = study.rows.iter().map(|r| WStudyRow { w: r.w, norm: r.norm, scaled: r.w.abs().powf(-tau) * r.norm }).collect();
    WStudy { tau, rows, growth_exponent: study.growth_exponent }
}

pub fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|p| p[1] < p[0])
}

/// Orthogonal projector onto constants in `L²(Σ)`.
pub fn constants_projector(curve: &DiscretizedCurve) -> DMatrix<C> {
    let n = curve.n_nodes;
    DMatrix::from_element(n, n, C::new(1.0 / n as f64, 0.0))
}
