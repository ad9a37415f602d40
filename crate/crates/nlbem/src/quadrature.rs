//! Quadrature building blocks: Gauss–Legendre rules, adaptive integration,
//! and the periodic rules on an equispaced grid of `N` points in `[0, 2π)`
//! (logarithmic weights, conjugate-function weights, trigonometric cardinal).

use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Cached Gauss–Legendre rule.
pub fn gl(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<Vec<(usize, Arc<(Vec<f64>, Vec<f64>)>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
    let mut guard = cache.lock().unwrap();
    if let Some((_, r)) = guard.iter().find(|(m, _)| *m == n) {
        return r.clone();
    }
    let r = Arc::new(gauss_legendre(n));
    guard.push((n, r.clone()));
    r
}

/// Gauss–Legendre rule of order `n` mapped to `[a, b]`, appended to `out`.
pub fn push_panel(a: f64, b: f64, n: usize, out: &mut Vec<(f64, f64)>) {
    let rule = gl(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for (x, w) in rule.0.iter().zip(&rule.1) {
        out.push((mid + half * x, half * w));
    }
}

fn gl_on<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> Complex64 {
    let rule = gl(12);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = Complex64::new(0.0, 0.0);
    for (x, w) in rule.0.iter().zip(&rule.1) {
        s += f(mid + half * x) * (half * w);
    }
    s
}

/// Adaptive bisection with a 12-point Gauss–Legendre rule; `tol` is an
/// absolute tolerance on the total.
pub fn adaptive_complex<F: FnMut(f64) -> Complex64>(mut f: F, a: f64, b: f64, tol: f64) -> Complex64 {
    let whole = gl_on(&mut f, a, b);
    recurse(&mut f, a, b, whole, tol, 0)
}

fn recurse<F: FnMut(f64) -> Complex64>(
    f: &mut F,
    a: f64,
    b: f64,
    whole: Complex64,
    tol: f64,
    depth: usize,
) -> Complex64 {
    let m = 0.5 * (a + b);
    let left = gl_on(f, a, m);
    let right = gl_on(f, m, b);
    let both = left + right;
    // below a few ulps of the panel value further bisection only chases rounding
    if (both - whole).norm() <= tol.max(8.0 * f64::EPSILON * both.norm()) || depth >= 60 {
        return both;
    }
    recurse(f, a, m, left, 0.5 * tol, depth + 1) + recurse(f, m, b, right, 0.5 * tol, depth + 1)
}

/// Real version of [`adaptive_complex`].
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    adaptive_complex(|x| Complex64::new(f(x), 0.0), a, b, tol).re
}

/// Weights `R_k`, `k = 0..N`, of the periodic logarithmic rule
/// `∫₀^{2π} ln(4 sin²((t_j - s)/2)) f(s) ds ≈ Σ_i R_{(j-i) mod N} f(t_i)`,
/// exact for trigonometric polynomials of degree `< N/2`.
pub fn log_weights(n_nodes: usize) -> Vec<f64> {
    let n = n_nodes / 2;
    let nf = n as f64;
    (0..n_nodes)
        .map(|k| {
            let t = PI * k as f64 / nf;
            let mut s = 0.0;
            for m in 1..n {
                s += (m as f64 * t).cos() / m as f64;
            }
            -2.0 * PI / nf * s - PI / (nf * nf) * (nf * t).cos()
        })
        .collect()
}

/// Weights `H_k` of the discrete conjugate-function operator
/// `(Hf)(t) = (1/2π) PV∫ cot((s - t)/2) f(s) ds`, acting as `i·sgn(m)` on
/// `e^{ims}` for `|m| < N/2`; `(Hf)_j = Σ_i H_{(j-i) mod N} f_i`.
pub fn conjugate_weights(n_nodes: usize) -> Vec<f64> {
    let half = n_nodes / 2;
    (0..n_nodes)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n_nodes as f64;
            let mut s = 0.0;
            for m in 1..half {
                s += (m as f64 * t).sin();
            }
            -2.0 / n_nodes as f64 * s
        })
        .collect()
}

/// Trigonometric cardinal function of an even grid with `N` nodes,
/// `ℓ(u) = sin(Nu/2) cot(u/2) / N`.
pub fn cardinal(n_nodes: usize, u: f64) -> f64 {
    let nf = n_nodes as f64;
    let s = (0.5 * u).sin();
    if s.abs() < 1e-8 {
        let m = (u / (2.0 * PI)).round();
        let v = u - 2.0 * PI * m;
        if v.abs() < 1e-10 {
            return 1.0;
        }
    }
    (0.5 * nf * u).sin() * (0.5 * u).cos() / (s * nf)
}

/// Periodic spectral differentiation matrix entries `D_k` (derivative with
/// respect to the `2π`-periodic parameter), `(Df)_j = Σ_i D_{(j-i) mod N} f_i`.
pub fn diff_weights(n_nodes: usize) -> Vec<f64> {
    let h = 2.0 * PI / n_nodes as f64;
    (0..n_nodes)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                0.5 * sign / (0.5 * k as f64 * h).tan()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        for p in 0..20 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "p={p}");
        }
    }

    #[test]
    fn adaptive_handles_log_endpoint() {
        let v = adaptive(|x| x.ln(), 0.0, 1.0, 1e-13);
        assert!((v + 1.0).abs() < 1e-11);
    }

    #[test]
    fn log_rule_on_fourier_modes() {
        // ∫ ln(4 sin²(s/2)) e^{ims} ds = -2π/|m| (m ≠ 0), 0 (m = 0)
        let n = 32;
        let r = log_weights(n);
        for m in 0..n / 2 {
            let q: f64 = (0..n).map(|i| r[(n - i) % n] * (m as f64 * 2.0 * PI * i as f64 / n as f64).cos()).sum();
            let exact = if m == 0 { 0.0 } else { -2.0 * PI / m as f64 };
            assert!((q - exact).abs() < 1e-12, "m={m}: {q}");
        }
    }

    #[test]
    fn conjugate_rule_on_fourier_modes() {
        let n = 16;
        let h = conjugate_weights(n);
        for m in -7i32..=7 {
            for j in 0..n {
                let tj = 2.0 * PI * j as f64 / n as f64;
                let q: Complex64 = (0..n)
                    .map(|i| {
                        let ti = 2.0 * PI * i as f64 / n as f64;
                        Complex64::from_polar(1.0, m as f64 * ti) * h[(j + n - i) % n]
                    })
                    .sum();
                let exact = Complex64::new(0.0, (m.signum()) as f64) * Complex64::from_polar(1.0, m as f64 * tj);
                assert!((q - exact).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cardinal_interpolates() {
        let n = 16;
        for k in 0..n {
            let v = cardinal(n, 2.0 * PI * k as f64 / n as f64);
            assert!((v - if k == 0 { 1.0 } else { 0.0 }).abs() < 1e-14);
        }
        // reproduces cos(3u) from samples
        let u = 0.377;
        let s: f64 = (0..n)
            .map(|i| {
                let ti = 2.0 * PI * i as f64 / n as f64;
                (3.0 * ti).cos() * cardinal(n, u - ti)
            })
            .sum();
        assert!((s - (3.0 * u).cos()).abs() < 1e-13);
    }

    #[test]
    fn diff_rule_on_sine() {
        let n = 32;
        let d = diff_weights(n);
        for j in 0..n {
            let tj = 2.0 * PI * j as f64 / n as f64;
            let q: f64 = (0..n).map(|i| d[(j + n - i) % n] * (5.0 * 2.0 * PI * i as f64 / n as f64).sin()).sum();
            assert!((q - 5.0 * (5.0 * tj).cos()).abs() < 1e-11);
        }
    }
}
