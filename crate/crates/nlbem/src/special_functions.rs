//! Modified Bessel functions K₀, K₁ of complex argument, the logarithmic
//! splitting of K₁ used near the diagonal of boundary kernels, and integer
//! order Iₙ, Kₙ of real argument used by circle oracles.
//!
//! Evaluation regions for K₀/K₁ (argument `t`, `Re t ≥ 0`):
//! * `|t| ≤ 2`: power series around the logarithmic singularity,
//! * `2 < |t| ≤ 25`: Steed/Temme continued fraction (CF2),
//! * `|t| > 25`: Hankel asymptotic series with the `e^{-t}` prefactor.
//!
//! `Re t < 0` (off the cut) is reached through analytic continuation
//! `K_n(t) = (-1)^n K_n(-t) ∓ iπ I_n(-t)`.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Below this radius the power series is used.
pub const SERIES_RADIUS: f64 = 2.0;
/// Above this radius the asymptotic series is used.
pub const ASYMPTOTIC_RADIUS: f64 = 25.0;
/// Real part above which `K_ν(t)` underflows and is reported as zero.
pub const UNDERFLOW_RE: f64 = 700.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BesselError {
    #[error("argument {0} lies on the branch cut (-inf, 0]")]
    DomainError(Complex64),
    #[error("|t| = {0} exceeds the splitting range |t| <= 10")]
    SplitRangeError(f64),
    #[error("I_n({x}) overflows; scaled values e^-x I_n = {i_scaled}, e^x K_n = {k_scaled}")]
    OverflowError { x: f64, i_scaled: f64, k_scaled: f64 },
}

/// Checked result of `bessel_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEval {
    pub value: Complex64,
    pub order: u32,
    pub argument: Complex64,
    /// Set when `Re t > 700`; `value` is then exactly zero.
    pub underflow_to_zero: bool,
}

/// Square root with `Im √w > 0`; `None` on `[0, ∞)`.
pub fn sqrt_im_pos(w: Complex64) -> Option<Complex64> {
    let mut s = w.sqrt();
    if s.im < 0.0 {
        s = -s;
    }
    if s.im > 0.0 {
        Some(s)
    } else {
        None
    }
}

/// `κ = -i√w`, the decay rate of the kernels (`Re κ > 0`).
pub fn kappa_of(w: Complex64) -> Option<Complex64> {
    sqrt_im_pos(w).map(|s| Complex64::new(s.im, -s.re))
}

fn on_cut(t: Complex64) -> bool {
    (t.im == 0.0 && t.re <= 0.0) || !t.re.is_finite() || !t.im.is_finite()
}

/// `K_order(t)` for `order ∈ {0, 1}`, relative accuracy about 1e-13 in the
/// tested range `|t| ∈ [1e-8, 700]`.
pub fn bessel_k(order: u32, t: Complex64) -> Result<BesselEval, BesselError> {
    if on_cut(t) || order > 1 {
        return Err(BesselError::DomainError(t));
    }
    let underflow = t.re > UNDERFLOW_RE;
    let value = if underflow {
        Complex64::new(0.0, 0.0)
    } else if order == 0 {
        k0(t)
    } else {
        k1(t)
    };
    Ok(BesselEval { value, order, argument: t, underflow_to_zero: underflow })
}

/// Scaled `e^t K_order(t)`, finite for large `Re t`.
pub fn bessel_k_scaled(order: u32, t: Complex64) -> Result<Complex64, BesselError> {
    if on_cut(t) || order > 1 {
        return Err(BesselError::DomainError(t));
    }
    let (a, b) = k01_scaled(t);
    Ok(if order == 0 { a } else { b })
}

/// Unchecked `K₀(t)`; zero when `Re t > 700`.
pub fn k0(t: Complex64) -> Complex64 {
    if t.re > UNDERFLOW_RE {
        return Complex64::new(0.0, 0.0);
    }
    if t.norm() <= SERIES_RADIUS {
        let (i0, rest) = k0_split(t);
        return rest - t.ln() * i0;
    }
    k01_scaled(t).0 * (-t).exp()
}

/// Unchecked `K₁(t)`; zero when `Re t > 700`.
pub fn k1(t: Complex64) -> Complex64 {
    if t.re > UNDERFLOW_RE {
        return Complex64::new(0.0, 0.0);
    }
    if t.norm() <= SERIES_RADIUS {
        let (i1, rest) = k1_split(t);
        return t.inv() + i1 * t.ln() + rest;
    }
    k01_scaled(t).1 * (-t).exp()
}

/// `(K₀, K₁)` in one call.
pub fn k01(t: Complex64) -> (Complex64, Complex64) {
    if t.re > UNDERFLOW_RE {
        return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    }
    if t.norm() <= SERIES_RADIUS {
        let l = t.ln();
        let (i0, r0) = k0_split(t);
        let (i1, r1) = k1_split(t);
        return (r0 - l * i0, t.inv() + i1 * l + r1);
    }
    let e = (-t).exp();
    let (a, b) = k01_scaled(t);
    (a * e, b * e)
}

/// `K₁(t) - 1/t`, accurate also for tiny `|t|`.
pub fn k1_minus_inv(t: Complex64) -> Complex64 {
    if t.norm() <= SERIES_RADIUS {
        let (i1, rest) = k1_split(t);
        i1 * t.ln() + rest
    } else {
        k1(t) - t.inv()
    }
}

/// Splitting `K₁(t) = 1/t + t g₁(t²) ln t + t g₂(t²)`; returns
/// `(1/t, t g₁(t²) ln t + t g₂(t²))`.
pub fn bessel_k1_splitting(t: Complex64) -> Result<(Complex64, Complex64), BesselError> {
    if on_cut(t) {
        return Err(BesselError::DomainError(t));
    }
    let r = t.norm();
    if r > 10.0 {
        return Err(BesselError::SplitRangeError(r));
    }
    let (i1, rest) = k1_split(t);
    Ok((t.inv(), i1 * t.ln() + rest))
}

/// `g₁(s)` and `g₂(s)` of the splitting, `s = t²`.
pub fn k1_split_coefficients(s: Complex64) -> (Complex64, Complex64) {
    // t g1(t^2) = I1(t): g1(s) = 1/2 Σ (s/4)^k / (k!(k+1)!)
    // t g2(t^2) = -ln2 I1(t) - t/4 Σ (ψ(k+1)+ψ(k+2)) (s/4)^k/(k!(k+1)!)
    let q = s * 0.25;
    let mut term = Complex64::new(1.0, 0.0);
    let mut g1 = Complex64::new(0.0, 0.0);
    let mut sum_psi = Complex64::new(0.0, 0.0);
    let mut h_k = 0.0; // H_k
    for k in 0..200usize {
        let psi = 2.0 * (-EULER_GAMMA + h_k) + 1.0 / (k as f64 + 1.0);
        g1 += term;
        sum_psi += term * psi;
        let kk = k as f64 + 1.0;
        h_k += 1.0 / kk;
        term = term * q / (kk * (kk + 1.0));
        if term.norm() < 1e-18 * g1.norm() {
            break;
        }
    }
    let g1 = g1 * 0.5;
    let g2 = -g1 * std::f64::consts::LN_2 - sum_psi * 0.25;
    (g1, g2)
}

/// `K₀(t) = -ln(t)·I₀(t) + rest(t)`; returns `(I₀(t), rest(t))`, both entire.
pub fn k0_split(t: Complex64) -> (Complex64, Complex64) {
    let q = t * t * 0.25;
    let mut term = Complex64::new(1.0, 0.0);
    let mut i0 = Complex64::new(0.0, 0.0);
    let mut hsum = Complex64::new(0.0, 0.0);
    let mut h_k = 0.0;
    for k in 0..400usize {
        i0 += term;
        hsum += term * h_k;
        let kk = (k + 1) as f64;
        h_k += 1.0 / kk;
        term = term * q / (kk * kk);
        if term.norm() * (1.0 + h_k) < 1e-18 * i0.norm() {
            break;
        }
    }
    let rest = i0 * (std::f64::consts::LN_2 - EULER_GAMMA) + hsum;
    (i0, rest)
}

/// `K₁(t) = 1/t + ln(t)·I₁(t) + rest(t)`; returns `(I₁(t), rest(t))`.
pub fn k1_split(t: Complex64) -> (Complex64, Complex64) {
    let (g1, g2) = k1_split_coefficients(t * t);
    (t * g1, t * g2)
}

/// `I₀(t)` and `I₁(t)` by power series (intended for `|t| ≲ 30`).
pub fn i01_series(t: Complex64) -> (Complex64, Complex64) {
    let q = t * t * 0.25;
    let mut a = Complex64::new(1.0, 0.0);
    let mut b = Complex64::new(1.0, 0.0);
    let mut s0 = Complex64::new(0.0, 0.0);
    let mut s1 = Complex64::new(0.0, 0.0);
    for k in 0..400usize {
        s0 += a;
        s1 += b;
        let kk = (k + 1) as f64;
        a = a * q / (kk * kk);
        b = b * q / (kk * (kk + 1.0));
        if a.norm() < 1e-18 * s0.norm() && b.norm() < 1e-18 * s1.norm() {
            break;
        }
    }
    (s0, s1 * t * 0.5)
}

/// Scaled pair `(e^t K₀(t), e^t K₁(t))`.
fn k01_scaled(t: Complex64) -> (Complex64, Complex64) {
    if t.re < 0.0 {
        return k01_scaled_continued(t);
    }
    let r = t.norm();
    if r <= SERIES_RADIUS {
        let (a, b) = {
            let l = t.ln();
            let (i0, r0) = k0_split(t);
            let (i1, r1) = k1_split(t);
            (r0 - l * i0, t.inv() + i1 * l + r1)
        };
        let e = t.exp();
        (a * e, b * e)
    } else if r <= ASYMPTOTIC_RADIUS {
        k01_cf2_scaled(t)
    } else {
        (k_asymptotic_scaled(0, t), k_asymptotic_scaled(1, t))
    }
}

/// Steed's algorithm for Temme's second continued fraction, order 0.
fn k01_cf2_scaled(x: Complex64) -> (Complex64, Complex64) {
    let one = Complex64::new(1.0, 0.0);
    let mut b = (x + 1.0) * 2.0;
    let mut d = b.inv();
    let mut h = d;
    let mut delh = d;
    let mut q1 = Complex64::new(0.0, 0.0);
    let mut q2 = one;
    let a1 = 0.25;
    let mut q = Complex64::new(a1, 0.0);
    let mut c = Complex64::new(a1, 0.0);
    let mut a = -a1;
    let mut s = one + q * delh;
    for i in 2..20000 {
        a -= 2.0 * (i as f64 - 1.0);
        c = -c * a / i as f64;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = (b + d * a).inv();
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if dels.norm() < 1e-17 * s.norm() {
            break;
        }
    }
    let h = h * a1;
    let k0s = (Complex64::new(PI, 0.0) / (x * 2.0)).sqrt() / s;
    let k1s = k0s * (x + 0.5 - h) / x;
    (k0s, k1s)
}

fn k_asymptotic_scaled(nu: u32, t: Complex64) -> Complex64 {
    let mu = 4.0 * (nu * nu) as f64;
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let inv8t = (t * 8.0).inv();
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = term * (mu - odd * odd) * inv8t / k as f64;
        let nn = next.norm();
        if nn > prev {
            break;
        }
        prev = nn;
        term = next;
        sum += term;
        if nn < 1e-17 * sum.norm() {
            break;
        }
    }
    (Complex64::new(PI, 0.0) / (t * 2.0)).sqrt() * sum
}

/// `Re t < 0`: continuation from the right half plane.
fn k01_scaled_continued(t: Complex64) -> (Complex64, Complex64) {
    let z = -t;
    let (k0z, k1z) = k01(z);
    let (i0z, i1z) = i01_complex(z);
    let sign = if t.im >= 0.0 { -1.0 } else { 1.0 };
    let ipi = Complex64::new(0.0, PI * sign);
    let e = t.exp();
    ((k0z + ipi * i0z) * e, (-k1z + ipi * i1z) * e)
}

/// `I₀(z)`, `I₁(z)` for `Re z ≥ 0`, via series or the Wronskian with CF1.
pub fn i01_complex(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() <= 20.0 {
        return i01_series(z);
    }
    // I₁/I₀ = 1/(2/z + 1/(4/z + 1/(6/z + …))) by modified Lentz, then the
    // Wronskian I₀K₁ + I₁K₀ = 1/z.
    let tiny = 1e-300;
    let zi = z.inv();
    let mut f = zi * 2.0;
    let mut cc = f;
    let mut dd = Complex64::new(0.0, 0.0);
    for j in 1..200_000 {
        let bj = zi * (2.0 * (j + 1) as f64);
        dd = bj + dd;
        if dd.norm() < tiny {
            dd = Complex64::new(tiny, 0.0);
        }
        dd = dd.inv();
        cc = bj + cc.inv();
        if cc.norm() < tiny {
            cc = Complex64::new(tiny, 0.0);
        }
        let delta = cc * dd;
        f *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            break;
        }
    }
    let ratio = f.inv();
    let (k0z, k1z) = k01(z);
    let i0 = (z * (k1z + ratio * k0z)).inv();
    (i0, ratio * i0)
}

/// `(Iₙ(x), Kₙ(x))` for real `x > 0`.
pub fn bessel_ik_real(n: u32, x: f64) -> Result<(f64, f64), BesselError> {
    if !(x > 0.0) {
        return Err(BesselError::DomainError(Complex64::new(x, 0.0)));
    }
    let (is, ks) = bessel_ik_real_scaled(n, x);
    if x > UNDERFLOW_RE {
        return Err(BesselError::OverflowError { x, i_scaled: is, k_scaled: ks });
    }
    Ok((is * x.exp(), ks * (-x).exp()))
}

/// `(e^{-x} Iₙ(x), e^{x} Kₙ(x))` for real `x > 0`.
pub fn bessel_ik_real_scaled(n: u32, x: f64) -> (f64, f64) {
    let t = Complex64::new(x, 0.0);
    let (k0s, k1s) = k01_scaled(t);
    let (mut km, mut kc) = (k0s.re, k1s.re);
    let kn = if n == 0 {
        km
    } else {
        for j in 1..n {
            let next = km + 2.0 * j as f64 / x * kc;
            km = kc;
            kc = next;
        }
        kc
    };
    let i0s = i0_scaled_real(x);
    let in_s = if n == 0 { i0s } else { miller_ratio(n, x) * i0s };
    (in_s, kn)
}

fn i0_scaled_real(x: f64) -> f64 {
    if x <= 30.0 {
        i01_series(Complex64::new(x, 0.0)).0.re * (-x).exp()
    } else {
        // I₀(x) ~ e^x / sqrt(2πx) Σ (-1)^k a_k(0) / x^k
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            let odd = (2 * k - 1) as f64;
            let next = term * odd * odd / (8.0 * x * k as f64);
            if next.abs() > term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

/// `Iₙ(x)/I₀(x)` by Miller's downward recurrence.
fn miller_ratio(n: u32, x: f64) -> f64 {
    let tox = 2.0 / x;
    let start = 2 * (n as usize + (40.0 * n as f64).sqrt() as usize) + (2.0 * x) as usize + 40;
    let mut bip = 0.0_f64;
    let mut bi = 1.0_f64;
    let mut ans = 0.0;
    for j in (1..=start).rev() {
        let bim = bip + j as f64 * tox * bi;
        bip = bi;
        bi = bim;
        if bi.abs() > 1e200 {
            ans *= 1e-200;
            bi *= 1e-200;
            bip *= 1e-200;
        }
        if j == n as usize {
            ans = bip;
        }
    }
    ans / bi
}

/// Constants of the growth bounds
/// `|K₀(t)| ≤ κ₁ (1 + |ln|t||)/(1 + √|t|) e^{-Re t} ≤ κ̃₁ |t|^{-1/4} e^{-Re t}` and
/// `|K₁^{(j)}(t)| ≤ κ₂ (|t|^{-1/2} + (1-j)/|t| + j/|t|²) e^{-Re t}`, `j = 0, 1`,
/// as suprema of the ratios over a sample of the slit plane.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct BesselBoundConstants {
    pub kappa1: f64,
    pub kappa1_tilde: f64,
    pub kappa2: f64,
}

/// `(|K₀|, |K₁|, |K₁'|)·e^{Re t}`.
fn scaled_moduli(t: Complex64) -> (f64, f64, f64) {
    let (a, b) = if t.norm() <= SERIES_RADIUS {
        let (a, b) = k01(t);
        (a * t.exp(), b * t.exp())
    } else {
        k01_scaled(t)
    };
    // K₁' = -K₀ - K₁/t
    (a.norm(), b.norm(), (-a - b / t).norm())
}

/// Bound ratios at one point, in the order of [`BesselBoundConstants`].
pub fn bessel_bound_ratios(t: Complex64) -> [f64; 3] {
    let (k0m, k1m, d1m) = scaled_moduli(t);
    let r = t.norm();
    let k1_bound = r.powf(-0.5) + 1.0 / r;
    [
        k0m * (1.0 + r.sqrt()) / (1.0 + r.ln().abs()),
        k0m * r.powf(0.25),
        (k1m / k1_bound).max(d1m / (r.powf(-0.5) + 1.0 / (r * r))),
    ]
}

/// Polar sample: `|t|` log-spaced over `[r_min, 1]` and `[1, r_max]` with
/// `radii` points each (so the kink of `|ln|t||` at `|t| = 1` is hit), and
/// `arg t` uniform in `(-π, π)` staying `margin` away from the cut.
pub fn bessel_bound_grid(r_min: f64, r_max: f64, radii: usize, angles: usize, margin: f64) -> Vec<Complex64> {
    let steps = (radii - 1).max(1) as f64;
    let rs = (0..radii).map(|i| r_min.powf(1.0 - i as f64 / steps)).chain((1..radii).map(|i| r_max.powf(i as f64 / steps)));
    let mut pts = Vec::new();
    for r in rs {
        for k in 0..angles {
            let a = -PI + margin + (2.0 * (PI - margin)) * k as f64 / (angles - 1).max(1) as f64;
            pts.push(Complex64::from_polar(r, a));
        }
    }
    pts
}

/// Fits the bound constants on `points`.
pub fn fit_bessel_bound_constants(points: &[Complex64]) -> BesselBoundConstants {
    let mut c = [0.0f64; 3];
    for &t in points {
        for (ck, r) in c.iter_mut().zip(bessel_bound_ratios(t)) {
            *ck = ck.max(r);
        }
    }
    BesselBoundConstants { kappa1: c[0], kappa1_tilde: c[1], kappa2: c[2] }
}

/// Default fit: `|t| ∈ [10⁻⁶, 200]`, `|arg t| ≤ π - 0.05`.
pub fn default_bessel_bound_constants() -> BesselBoundConstants {
    fit_bessel_bound_constants(&bessel_bound_grid(1e-6, 200.0, 81, 41, 0.05))
}
