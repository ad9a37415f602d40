//! Interaction parameters `B` on `L²(Σ;ℂ²)` and their factorizations
//! `B = B₁B₂`.
//!
//! Boundary data are stored stacked, `(φ₁ at the N nodes, φ₂ at the N
//! nodes)`, in symmetrized coordinates `v = √σ·φ`, so the discrete
//! `L²(Σ)` inner product is the Euclidean one and adjoints are conjugate
//! transposes.

use crate::geometry::DiscretizedCurve;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// Hermiticity and orthonormality tolerance.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Relative eigenvalue floor for semidefiniteness checks.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InteractionError {
    #[error("interaction matrix is not hermitian (defect {0:.3e})")]
    NonHermitianSpec(f64),
    #[error("interaction matrix is not positive semidefinite (smallest eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("factorization rank mismatch: {0}")]
    RankMismatch(String),
    #[error("{requested} modes requested but at most N/2 = {max} are resolved")]
    TooManyModes { requested: usize, max: usize },
    #[error("finite-rank vectors are not orthonormal (defect {0:.3e})")]
    NotOrthonormal(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Dirac symmetry condition fails (defect {0:.3e})")]
    AsymmetricDiracPair(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Pointwise 2×2 matrix.
pub type Mat2 = [[C; 2]; 2];

/// `V = diag(1, -2i)`.
pub const V_DIAG: [C; 2] = [C::new(1.0, 0.0), C::new(0.0, -2.0)];

#[derive(Clone, Debug)]
pub enum InteractionVariant {
    /// `Bφ = [[α, β], [β̄, γ]] ∫_Σ φ`.
    Elementary { alpha: f64, beta: C, gamma: f64 },
    /// `Σ b_n |φ_n⟩⟨φ_n|`, each `φ_n` a stacked symmetrized 2N-vector.
    FiniteRank { pairs: Vec<(f64, DVector<C>)> },
    /// `diag(B₁₁, 0)` with `B₁₁` an N×N symmetrized matrix.
    DeltaShellCompact { b11: DMatrix<C> },
    /// `diag(0, B₂₂)`.
    ObliqueType { b22: DMatrix<C> },
    /// Full block matrix with `B ⪰ 0`.
    ConditionS { b11: DMatrix<C>, b12: DMatrix<C>, b22: DMatrix<C> },
    /// `Π*_{VF} Π_{VG}` with node samples of `F`, `G`.
    DiracInduced { f: Vec<Mat2>, g: Vec<Mat2> },
}

/// Decay law of the condition-(S) family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum EigenLaw {
    Geometric { ratio: f64 },
    Power { exponent: f64 },
}

impl EigenLaw {
    pub fn value(&self, n: usize) -> f64 {
        match *self {
            EigenLaw::Geometric { ratio } => ratio.powi(n as i32),
            EigenLaw::Power { exponent } => (n as f64).powf(-exponent),
        }
    }
}

#[derive(Clone, Debug)]
pub struct InteractionSpec {
    pub variant: InteractionVariant,
    pub n_nodes: usize,
    /// Eigenvalues `b_n` of a declared condition-(S) law, if any.
    pub law_values: Vec<f64>,
    pub label: String,
}

/// Intermediate-space factorization `B = B₁B₂`.
#[derive(Clone, Debug)]
pub struct Factorization {
    pub b1: DMatrix<C>,
    pub b2: DMatrix<C>,
    pub dim_k: usize,
    pub mode: FactorMode,
    /// `Some(+1)` / `Some(-1)` when `B` is positive / negative semidefinite
    /// and `B₂ = B₁*` up to that sign (`B = s·B₁B₁*`).
    pub definite_sign: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FactorMode {
    /// Square root `|B|^{1/2}` restricted to the range of `B`.
    Sqrt,
    /// Structural low-rank factors.
    Rank,
}

impl Factorization {
    /// Component support `(uses φ₁, uses φ₂)` of the factors.
    pub fn support(&self) -> (bool, bool) {
        let n = self.b1.nrows() / 2;
        let nz = |m: &DMatrix<C>, rows: bool, c: usize| -> bool {
            if rows {
                m.rows(c * n, n).iter().any(|z| z.norm() > 0.0)
            } else {
                m.columns(c * n, n).iter().any(|z| z.norm() > 0.0)
            }
        };
        (nz(&self.b1, true, 0) || nz(&self.b2, false, 0), nz(&self.b1, true, 1) || nz(&self.b2, false, 1))
    }

    pub fn reconstruct(&self) -> DMatrix<C> {
        &self.b1 * &self.b2
    }
}

fn sqrt_weights(curve: &DiscretizedCurve) -> DVector<C> {
    DVector::from_iterator(curve.n_nodes, curve.weights.iter().map(|w| C::new(w.sqrt(), 0.0)))
}

/// Orthonormal Fourier mode `e^{imt}/√L` in symmetrized coordinates.
pub fn fourier_mode(curve: &DiscretizedCurve, m: i64) -> DVector<C> {
    let n = curve.n_nodes;
    let amp = (curve.weights[0] / curve.length).sqrt();
    DVector::from_fn(n, |j, _| C::from_polar(amp, 2.0 * PI * (m * j as i64) as f64 / n as f64))
}

/// Mode order used for truncations: 0, 1, -1, 2, -2, …
pub fn mode_index(k: usize) -> i64 {
    if k == 0 {
        0
    } else if k % 2 == 1 {
        k.div_ceil(2) as i64
    } else {
        -((k / 2) as i64)
    }
}

/// Hermitian `Σ_{|m| ≤ level} |e_m⟩⟨e_m|` scaled by `eta` (Fourier truncation
/// of `η·I`).
pub fn truncated_identity(curve: &DiscretizedCurve, eta: f64, level: usize) -> DMatrix<C> {
    let n = curve.n_nodes;
    let mut m = DMatrix::zeros(n, n);
    for k in -(level as i64)..=(level as i64) {
        let e = fourier_mode(curve, k);
        m += &e * e.adjoint() * C::new(eta, 0.0);
    }
    m
}

impl InteractionSpec {
    pub fn zero(curve: &DiscretizedCurve) -> Self {
        Self::elementary(curve, 0.0, ZERO, 0.0)
    }

    pub fn elementary(curve: &DiscretizedCurve, alpha: f64, beta: C, gamma: f64) -> Self {
        Self {
            variant: InteractionVariant::Elementary { alpha, beta, gamma },
            n_nodes: curve.n_nodes,
            law_values: Vec::new(),
            label: format!("elementary(alpha={alpha}, beta={beta}, gamma={gamma})"),
        }
    }

    pub fn finite_rank(curve: &DiscretizedCurve, pairs: Vec<(f64, DVector<C>)>) -> Result<Self, InteractionError> {
        let n2 = 2 * curve.n_nodes;
        for (_, v) in &pairs {
            if v.len() != n2 {
                return Err(InteractionError::DimensionMismatch { expected: n2, got: v.len() });
            }
        }
        let mut defect: f64 = 0.0;
        for (a, (_, u)) in pairs.iter().enumerate() {
            for (b, (_, v)) in pairs.iter().enumerate() {
                let g = u.dotc(v);
                let target = if a == b { 1.0 } else { 0.0 };
                defect = defect.max((g - target).norm());
            }
        }
        if defect > PSD_TOL {
            return Err(InteractionError::NotOrthonormal(defect));
        }
        let k = pairs.len();
        Ok(Self {
            variant: InteractionVariant::FiniteRank { pairs },
            n_nodes: curve.n_nodes,
            law_values: Vec::new(),
            label: format!("finite_rank(k={k})"),
        })
    }

    /// δ-shell strength `η` truncated to Fourier modes `|m| ≤ level`.
    pub fn delta_shell(curve: &DiscretizedCurve, eta: f64, level: usize) -> Self {
        Self {
            variant: InteractionVariant::DeltaShellCompact { b11: truncated_identity(curve, eta, level) },
            n_nodes: curve.n_nodes,
            law_values: Vec::new(),
            label: format!("delta_shell(eta={eta}, level={level})"),
        }
    }

    /// Oblique-type coupling `B₂₂ = -4η·P_level`.
    pub fn oblique(curve: &DiscretizedCurve, eta: f64, level: usize) -> Self {
        Self {
            variant: InteractionVariant::ObliqueType { b22: truncated_identity(curve, -4.0 * eta, level) },
            n_nodes: curve.n_nodes,
            law_values: Vec::new(),
            label: format!("oblique(eta={eta}, level={level})"),
        }
    }

    pub fn dirac_induced(curve: &DiscretizedCurve, f: Vec<Mat2>, g: Vec<Mat2>) -> Result<Self, InteractionError> {
        let n = curve.n_nodes;
        for v in [&f, &g] {
            if v.len() != n {
                return Err(InteractionError::DimensionMismatch { expected: n, got: v.len() });
            }
        }
        Ok(Self {
            variant: InteractionVariant::DiracInduced { f, g },
            n_nodes: n,
            law_values: Vec::new(),
            label: "dirac_induced".into(),
        })
    }

    /// Declared rank of the structural factorization, if finite.
    pub fn declared_rank(&self) -> Option<usize> {
        match &self.variant {
            InteractionVariant::Elementary { .. } | InteractionVariant::DiracInduced { .. } => Some(2),
            InteractionVariant::FiniteRank { pairs } => Some(pairs.len()),
            _ => None,
        }
    }

    /// Targets `-64/b_n²` of the condition-(S) eigenvalue asymptote.
    pub fn asymptote_targets(&self) -> Vec<f64> {
        self.law_values.iter().map(|b| -64.0 / (b * b)).collect()
    }

    /// The assembled hermitian 2N×2N matrix.
    pub fn assemble(&self, curve: &DiscretizedCurve) -> Result<DMatrix<C>, InteractionError> {
        let b = self.assemble_unchecked(curve);
        let defect = hermiticity_defect(&b);
        if defect > HERMITIAN_TOL * (1.0 + max_abs(&b)) {
            return Err(InteractionError::NonHermitianSpec(defect));
        }
        Ok(b)
    }

    fn assemble_unchecked(&self, curve: &DiscretizedCurve) -> DMatrix<C> {
        let n = curve.n_nodes;
        let mut b = DMatrix::zeros(2 * n, 2 * n);
        match &self.variant {
            InteractionVariant::Elementary { .. } | InteractionVariant::DiracInduced { .. } => {
                let f = structural_factors(self, curve);
                b = &f.0 * &f.1;
            }
            InteractionVariant::FiniteRank { pairs } => {
                for (bn, v) in pairs {
                    b += v * v.adjoint() * C::new(*bn, 0.0);
                }
            }
            InteractionVariant::DeltaShellCompact { b11 } => b.view_mut((0, 0), (n, n)).copy_from(b11),
            InteractionVariant::ObliqueType { b22 } => b.view_mut((n, n), (n, n)).copy_from(b22),
            InteractionVariant::ConditionS { b11, b12, b22 } => {
                b.view_mut((0, 0), (n, n)).copy_from(b11);
                b.view_mut((0, n), (n, n)).copy_from(b12);
                b.view_mut((n, 0), (n, n)).copy_from(&b12.adjoint());
                b.view_mut((n, n), (n, n)).copy_from(b22);
            }
        }
        b
    }

    /// Factorization with the smallest intermediate dimension available.
    pub fn factorize_default(&self, curve: &DiscretizedCurve) -> Result<Factorization, InteractionError> {
        match self.declared_rank() {
            Some(_) => {
                // a definite structural pair is better served by the sqrt path
                // when its rank is at most the declared one
                let f = factorize(self, curve, FactorMode::Rank)?;
                Ok(f)
            }
            None => factorize(self, curve, FactorMode::Sqrt),
        }
    }
}

fn max_abs(m: &DMatrix<C>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_defect(m: &DMatrix<C>) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Condition-(S) family `diag(0, Σ b_n |ψ_n⟩⟨ψ_n|)` with orthonormal Fourier
/// modes `ψ_n` (order 0, 1, -1, 2, …).
pub fn condition_s_family(law: EigenLaw, count: usize, curve: &DiscretizedCurve) -> Result<InteractionSpec, InteractionError> {
    let n = curve.n_nodes;
    if count > n / 2 {
        return Err(InteractionError::TooManyModes { requested: count, max: n / 2 });
    }
    match law {
        EigenLaw::Geometric { ratio } if !(ratio > 0.0 && ratio < 1.0) => {
            return Err(InteractionError::InvalidParameter(format!("ratio {ratio} not in (0,1)")))
        }
        EigenLaw::Power { exponent } if !(exponent > 1.0) => {
            return Err(InteractionError::InvalidParameter(format!("exponent {exponent} must exceed 1")))
        }
        _ => {}
    }
    let mut b22 = DMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(count);
    for k in 0..count {
        let b = law.value(k + 1);
        let e = fourier_mode(curve, mode_index(k));
        b22 += &e * e.adjoint() * C::new(b, 0.0);
        values.push(b);
    }
    Ok(InteractionSpec {
        variant: InteractionVariant::ConditionS { b11: DMatrix::zeros(n, n), b12: DMatrix::zeros(n, n), b22 },
        n_nodes: n,
        law_values: values,
        label: format!("condition_s({law:?}, k={count})"),
    })
}

/// `(B₁, B₂)` of the structural rank-≤2 variants.
fn structural_factors(spec: &InteractionSpec, curve: &DiscretizedCurve) -> (DMatrix<C>, DMatrix<C>) {
    let n = curve.n_nodes;
    let s = sqrt_weights(curve);
    match &spec.variant {
        InteractionVariant::Elementary { alpha, beta, gamma } => {
            // B = E C Eᵀ, E = [e₁⊗s, e₂⊗s]
            let mut e = DMatrix::zeros(2 * n, 2);
            e.view_mut((0, 0), (n, 1)).copy_from(&s);
            e.view_mut((n, 1), (n, 1)).copy_from(&s);
            let c = DMatrix::from_row_slice(2, 2, &[C::new(*alpha, 0.0), *beta, beta.conj(), C::new(*gamma, 0.0)]);
            (&e * c, e.transpose())
        }
        InteractionVariant::DiracInduced { f, g } => {
            let mut b1 = DMatrix::zeros(2 * n, 2);
            let mut b2 = DMatrix::zeros(2, 2 * n);
            for j in 0..n {
                for c in 0..2 {
                    for k in 0..2 {
                        b1[(c * n + j, k)] = s[j] * V_DIAG[c] * f[j][c][k];
                        b2[(k, c * n + j)] = s[j] * (V_DIAG[c] * g[j][c][k]).conj();
                    }
                }
            }
            (b1, b2)
        }
        _ => unreachable!("structural factors requested for a dense variant"),
    }
}

/// `B = B₁B₂` in the requested mode.
pub fn factorize(spec: &InteractionSpec, curve: &DiscretizedCurve, mode: FactorMode) -> Result<Factorization, InteractionError> {
    let n = curve.n_nodes;
    if spec.n_nodes != n {
        return Err(InteractionError::DimensionMismatch { expected: n, got: spec.n_nodes });
    }
    match mode {
        FactorMode::Rank => match &spec.variant {
            InteractionVariant::Elementary { .. } | InteractionVariant::DiracInduced { .. } => {
                let (b1, b2) = structural_factors(spec, curve);
                Ok(Factorization { dim_k: b1.ncols(), b1, b2, mode, definite_sign: None })
            }
            InteractionVariant::FiniteRank { pairs } => {
                let k = pairs.len();
                let mut b1 = DMatrix::zeros(2 * n, k);
                let mut b2 = DMatrix::zeros(k, 2 * n);
                for (c, (bn, v)) in pairs.iter().enumerate() {
                    b1.set_column(c, &(v * C::new(*bn, 0.0)));
                    b2.set_row(c, &v.adjoint());
                }
                Ok(Factorization { dim_k: k, b1, b2, mode, definite_sign: None })
            }
            _ => Err(InteractionError::RankMismatch(format!("{} has no declared finite rank", spec.label))),
        },
        FactorMode::Sqrt => {
            let b = spec.assemble(curve)?;
            let eig = b.clone().symmetric_eigen();
            let scale = eig.eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max);
            let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sign = if lo >= -PSD_TOL * scale {
                1.0
            } else if hi <= PSD_TOL * scale {
                -1.0
            } else {
                return Err(InteractionError::NotPositive(lo));
            };
            let keep: Vec<usize> = (0..2 * n).filter(|&k| eig.eigenvalues[k].abs() > PSD_TOL * scale.max(1e-300)).collect();
            let r = keep.len();
            let mut b1 = DMatrix::zeros(2 * n, r);
            for (c, &k) in keep.iter().enumerate() {
                let root = eig.eigenvalues[k].abs().sqrt();
                b1.set_column(c, &(eig.eigenvectors.column(k) * C::new(root, 0.0)));
            }
            let b2 = b1.adjoint() * C::new(sign, 0.0);
            Ok(Factorization { dim_k: r, b1, b2, mode, definite_sign: Some(sign) })
        }
    }
}

/// `Π_A f = ∫_Σ A* f dσ` for node data `A` and stacked symmetrized `f`.
pub fn pi_apply(curve: &DiscretizedCurve, a: &[Mat2], f: &DVector<C>) -> [C; 2] {
    let n = curve.n_nodes;
    let mut out = [ZERO; 2];
    for j in 0..n {
        let s = curve.weights[j].sqrt();
        for k in 0..2 {
            for c in 0..2 {
                out[k] += a[j][c][k].conj() * f[c * n + j] * s;
            }
        }
    }
    out
}

/// Max defect of `Π*_F Π_G = Π*_G Π_F`, i.e. `F(x)G(y)* = G(x)F(y)*`.
pub fn dirac_symmetry_defect(f: &[Mat2], g: &[Mat2]) -> f64 {
    let prod = |a: &Mat2, b: &Mat2| -> Mat2 {
        let mut m = [[ZERO; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                m[r][c] = a[r][0] * b[c][0].conj() + a[r][1] * b[c][1].conj();
            }
        }
        m
    };
    let mut defect: f64 = 0.0;
    for x in 0..f.len() {
        for y in 0..f.len() {
            let l = prod(&f[x], &g[y]);
            let r = prod(&g[x], &f[y]);
            for a in 0..2 {
                for b in 0..2 {
                    defect = defect.max((l[a][b] - r[a][b]).norm());
                }
            }
        }
    }
    defect
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{discretize, CurveDescriptor};

    fn circle(n: usize) -> DiscretizedCurve {
        discretize(&CurveDescriptor::circle(1.0), n).unwrap()
    }

    #[test]
    fn elementary_constant_functional_norm() {
        let c = circle(64);
        let b = InteractionSpec::elementary(&c, 1.0, ZERO, 0.0).assemble(&c).unwrap();
        let eig = b.symmetric_eigen();
        let top = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        assert!((top - 2.0 * PI).abs() < 1e-12);
        let z = InteractionSpec::zero(&c).assemble(&c).unwrap();
        assert!(z.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn rank_factorization_reproduces() {
        let c = discretize(&CurveDescriptor::ellipse(2.0, 1.0), 64).unwrap();
        let spec = InteractionSpec::elementary(&c, 1.3, C::new(0.4, -2.0), -0.7);
        let b = spec.assemble(&c).unwrap();
        let f = factorize(&spec, &c, FactorMode::Rank).unwrap();
        assert_eq!(f.dim_k, 2);
        assert!(max_abs(&(f.reconstruct() - &b)) < 1e-12 * max_abs(&b));
    }

    #[test]
    fn sqrt_of_scaled_projector() {
        let c = circle(32);
        let p = truncated_identity(&c, 1.0, 3);
        let spec = InteractionSpec {
            variant: InteractionVariant::ObliqueType { b22: &p * C::new(0.25, 0.0) },
            n_nodes: 32,
            law_values: vec![],
            label: "t".into(),
        };
        let f = factorize(&spec, &c, FactorMode::Sqrt).unwrap();
        assert_eq!(f.dim_k, 7);
        // B^{1/2} = diag(0, √b P): B₁B₁* = b P, and B₁ spans P's range
        let root = &f.b1 * f.b1.adjoint();
        assert!(max_abs(&(root.view((32, 32), (32, 32)) - &p * C::new(0.25, 0.0))) < 1e-12);
        assert!(max_abs(&root.view((0, 0), (32, 32)).into_owned()) < 1e-14);
    }

    #[test]
    fn indefinite_sqrt_rejected() {
        let c = circle(32);
        let mut b22 = truncated_identity(&c, 1.0, 0);
        b22 -= truncated_identity(&c, 2.0, 2) - truncated_identity(&c, 2.0, 1);
        let spec = InteractionSpec { variant: InteractionVariant::ObliqueType { b22 }, n_nodes: 32, law_values: vec![], label: "x".into() };
        assert!(matches!(factorize(&spec, &c, FactorMode::Sqrt), Err(InteractionError::NotPositive(_))));
    }

    #[test]
    fn condition_s_eigenvalues() {
        let c = circle(64);
        let spec = condition_s_family(EigenLaw::Geometric { ratio: 0.5 }, 6, &c).unwrap();
        let b = spec.assemble(&c).unwrap();
        let mut ev: Vec<f64> = b.symmetric_eigen().eigenvalues.iter().cloned().filter(|x| x.abs() > 1e-12).collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (k, e) in ev.iter().enumerate() {
            assert!((e - 0.5f64.powi(k as i32 + 1)).abs() < 1e-10);
        }
        assert_eq!(ev.len(), 6);
        let t = spec.asymptote_targets();
        assert!((t[5] + 64.0 * 4096.0).abs() < 1e-6);
        assert!(matches!(
            condition_s_family(EigenLaw::Power { exponent: 2.0 }, 40, &c),
            Err(InteractionError::TooManyModes { .. })
        ));
    }

    #[test]
    fn dirac_pair_rank_and_pi() {
        let c = circle(32);
        let chi = |j: usize| 1.0 + 0.3 * (2.0 * PI * j as f64 / 32.0).cos();
        let f: Vec<Mat2> = (0..32).map(|j| [[C::new(chi(j), 0.0), ZERO], [ZERO, ZERO]]).collect();
        let spec = InteractionSpec::dirac_induced(&c, f.clone(), f.clone()).unwrap();
        let b = spec.assemble(&c).unwrap();
        let sv = b.clone().singular_values();
        assert!(sv.iter().filter(|s| **s > 1e-10 * sv.max()).count() <= 2);
        assert!(dirac_symmetry_defect(&f, &f) < 1e-15);
        // Π_{VG} on constant data: ∫ (VG)* dσ · const
        let n = 32;
        let mut one = DVector::zeros(2 * n);
        for j in 0..n {
            one[j] = C::new(c.weights[j].sqrt(), 0.0);
        }
        let vg: Vec<Mat2> = f.iter().map(|m| [[m[0][0] * V_DIAG[0], m[0][1] * V_DIAG[0]], [m[1][0] * V_DIAG[1], m[1][1] * V_DIAG[1]]]).collect();
        let got = pi_apply(&c, &vg, &one);
        let expect: f64 = (0..n).map(|j| chi(j) * c.weights[j]).sum();
        assert!((got[0] - expect).norm() < 1e-12 && got[1].norm() < 1e-14);
    }

    #[test]
    fn delta_shell_truncation_acts_on_modes() {
        let c = circle(64);
        let spec = InteractionSpec::delta_shell(&c, -2.0, 8);
        let b = spec.assemble(&c).unwrap();
        for m in [-8i64, 0, 3, 8] {
            let mut v = DVector::zeros(128);
            v.rows_mut(0, 64).copy_from(&fourier_mode(&c, m));
            let bv = &b * &v;
            assert!((bv - &v * C::new(-2.0, 0.0)).norm() < 1e-12);
        }
        let mut v = DVector::zeros(128);
        v.rows_mut(0, 64).copy_from(&fourier_mode(&c, 9));
        assert!((&b * v).norm() < 1e-12);
    }
}
