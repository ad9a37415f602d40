//! Closed C² curves, their arc-length parametrization, and equispaced
//! (trapezoidal) discretizations with normals, tangents and the
//! bi-Lipschitz constant.
//!
//! Points and vectors in the plane are stored as complex numbers
//! `x₁ + i x₂`. The curve is oriented counter-clockwise, the tangent is
//! `t = (-n₂, n₁)` and `n` points out of the bounded component.

use crate::quadrature::gl;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("curve is not injective (chord/arc ratio {0:.3e})")]
    NonInjectiveCurve(f64),
    #[error("parametrization speed {0:.3e} is degenerate")]
    DegenerateSpeed(f64),
    #[error("invalid curve descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("N = {0} must be even and at least 16")]
    InvalidResolution(usize),
}

/// Parametric map `θ ↦ (ζ(θ), ζ'(θ), ζ''(θ))` of a custom curve.
pub type ParametricMap = Arc<dyn Fn(f64) -> [Complex64; 3] + Send + Sync>;

#[derive(Clone)]
pub enum CurveKind {
    Circle { radius: f64 },
    Ellipse { a: f64, b: f64 },
    /// `r(θ) = r0 + ε cos(mθ)`.
    Star { r0: f64, eps: f64, lobes: u32 },
    Custom { name: String, map: ParametricMap },
}

impl fmt::Debug for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveKind::Circle { radius } => write!(f, "circle(R={radius})"),
            CurveKind::Ellipse { a, b } => write!(f, "ellipse(a={a}, b={b})"),
            CurveKind::Star { r0, eps, lobes } => write!(f, "star(r0={r0}, eps={eps}, m={lobes})"),
            CurveKind::Custom { name, .. } => write!(f, "custom({name})"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CurveDescriptor {
    pub kind: CurveKind,
    /// Length of the parameter domain before arc-length normalization.
    pub period: f64,
}

impl CurveDescriptor {
    pub fn circle(radius: f64) -> Self {
        Self { kind: CurveKind::Circle { radius }, period: 2.0 * PI }
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        Self { kind: CurveKind::Ellipse { a, b }, period: 2.0 * PI }
    }

    pub fn star(r0: f64, eps: f64, lobes: u32) -> Self {
        Self { kind: CurveKind::Star { r0, eps, lobes }, period: 2.0 * PI }
    }

    pub fn custom(name: &str, period: f64, map: ParametricMap) -> Self {
        Self { kind: CurveKind::Custom { name: name.to_string(), map }, period }
    }

    /// Position and the first two derivatives in the original parameter.
    pub fn eval(&self, th: f64) -> [Complex64; 3] {
        let e = Complex64::from_polar(1.0, th);
        let i = Complex64::new(0.0, 1.0);
        match &self.kind {
            CurveKind::Circle { radius } => [e * *radius, i * e * *radius, -e * *radius],
            CurveKind::Ellipse { a, b } => {
                let (s, c) = th.sin_cos();
                [
                    Complex64::new(a * c, b * s),
                    Complex64::new(-a * s, b * c),
                    Complex64::new(-a * c, -b * s),
                ]
            }
            CurveKind::Star { r0, eps, lobes } => {
                let m = *lobes as f64;
                let r = r0 + eps * (m * th).cos();
                let dr = -eps * m * (m * th).sin();
                let ddr = -eps * m * m * (m * th).cos();
                [e * r, e * (dr + i * r), e * (ddr - r + i * 2.0 * dr)]
            }
            CurveKind::Custom { map, .. } => map(th),
        }
    }

    fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidDescriptor(m.to_string()));
        if !(self.period > 0.0) {
            return bad("period must be positive");
        }
        match &self.kind {
            CurveKind::Circle { radius } if !(*radius > 0.0) => bad("radius must be positive"),
            CurveKind::Ellipse { a, b } if !(*a > 0.0 && *b > 0.0) => bad("semi-axes must be positive"),
            CurveKind::Star { r0, eps, lobes } => {
                if !(*r0 > 0.0) || *lobes == 0 {
                    bad("star needs r0 > 0 and m >= 1")
                } else if !(eps.abs() * (*lobes as f64) < *r0) {
                    bad("star requires eps*m < r0")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Point on the curve in arc-length parametrization.
#[derive(Clone, Copy, Debug)]
pub struct CurvePoint {
    pub pos: Complex64,
    /// Unit tangent `dζ/dσ`.
    pub tangent: Complex64,
    /// `d²ζ/dσ²` (curvature times inward normal).
    pub accel: Complex64,
}

/// Numerical arc-length parametrization `σ ↦ ζ(θ(σ))`, `σ ∈ [0, L)`.
pub struct ArcLengthMap {
    desc: CurveDescriptor,
    length: f64,
    // θ, θ', θ'' at σ_k = k·L/M, quintic Hermite interpolation in between
    table: Vec<[f64; 3]>,
    exact_circle: Option<f64>,
}

impl fmt::Debug for ArcLengthMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ArcLengthMap({:?}, L={})", self.desc.kind, self.length)
    }
}

const SPEED_FLOOR: f64 = 1e-8;

impl ArcLengthMap {
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn descriptor(&self) -> &CurveDescriptor {
        &self.desc
    }

    /// Original parameter θ corresponding to arc length σ.
    pub fn theta(&self, sigma: f64) -> [f64; 3] {
        if let Some(r) = self.exact_circle {
            let s = sigma.rem_euclid(self.length);
            return [s / r, 1.0 / r, 0.0];
        }
        let m = self.table.len();
        let h = self.length / m as f64;
        let turns = (sigma / self.length).floor();
        let s = sigma - turns * self.length;
        let mut k = (s / h).floor() as usize;
        if k >= m {
            k = m - 1;
        }
        let x = (s - k as f64 * h) / h;
        let p0 = self.table[k];
        let mut p1 = self.table[(k + 1) % m];
        if k + 1 == m {
            p1[0] += self.desc.period;
        }
        let (v, d, dd) = quintic_hermite(x, h, p0, p1);
        [v + turns * self.desc.period, d, dd]
    }

    pub fn point(&self, sigma: f64) -> CurvePoint {
        let [th, dth, ddth] = self.theta(sigma);
        let [z, dz, ddz] = self.desc.eval(th);
        CurvePoint { pos: z, tangent: dz * dth, accel: ddz * (dth * dth) + dz * ddth }
    }
}

/// Quintic Hermite interpolation on `[0, h]` at relative position `x`.
fn quintic_hermite(x: f64, h: f64, p0: [f64; 3], p1: [f64; 3]) -> (f64, f64, f64) {
    let (y0, d0, s0) = (p0[0], p0[1] * h, p0[2] * h * h);
    let (y1, d1, s1) = (p1[0], p1[1] * h, p1[2] * h * h);
    let x2 = x * x;
    let x3 = x2 * x;
    let x4 = x3 * x;
    let x5 = x4 * x;
    let h0 = 1.0 - 10.0 * x3 + 15.0 * x4 - 6.0 * x5;
    let h1 = x - 6.0 * x3 + 8.0 * x4 - 3.0 * x5;
    let h2 = 0.5 * (x2 - 3.0 * x3 + 3.0 * x4 - x5);
    let h5 = 10.0 * x3 - 15.0 * x4 + 6.0 * x5;
    let h4 = -4.0 * x3 + 7.0 * x4 - 3.0 * x5;
    let h3 = 0.5 * (x3 - 2.0 * x4 + x5);
    let dh0 = -30.0 * x2 + 60.0 * x3 - 30.0 * x4;
    let dh1 = 1.0 - 18.0 * x2 + 32.0 * x3 - 15.0 * x4;
    let dh2 = 0.5 * (2.0 * x - 9.0 * x2 + 12.0 * x3 - 5.0 * x4);
    let dh5 = -dh0;
    let dh4 = -12.0 * x2 + 28.0 * x3 - 15.0 * x4;
    let dh3 = 0.5 * (3.0 * x2 - 8.0 * x3 + 5.0 * x4);
    let ddh0 = -60.0 * x + 180.0 * x2 - 120.0 * x3;
    let ddh1 = -36.0 * x + 96.0 * x2 - 60.0 * x3;
    let ddh2 = 0.5 * (2.0 - 18.0 * x + 36.0 * x2 - 20.0 * x3);
    let ddh5 = -ddh0;
    let ddh4 = -24.0 * x + 84.0 * x2 - 60.0 * x3;
    let ddh3 = 0.5 * (6.0 * x - 24.0 * x2 + 20.0 * x3);
    let v = y0 * h0 + d0 * h1 + s0 * h2 + y1 * h5 + d1 * h4 + s1 * h3;
    let d = (y0 * dh0 + d0 * dh1 + s0 * dh2 + y1 * dh5 + d1 * dh4 + s1 * dh3) / h;
    let dd = (y0 * ddh0 + d0 * ddh1 + s0 * ddh2 + y1 * ddh5 + d1 * ddh4 + s1 * ddh3) / (h * h);
    (v, d, dd)
}

/// Builds the arc-length parametrization; `resolution` is the number of
/// table intervals (at least 1024 are used).
pub fn reparametrize_arclength(
    desc: &CurveDescriptor,
    resolution: usize,
) -> Result<Arc<ArcLengthMap>, GeometryError> {
    desc.validate()?;
    let p = desc.period;
    let m = resolution.max(1024);
    let speed = |th: f64| desc.eval(th)[1].norm();

    let fine = 4 * m;
    let mut min_speed = f64::INFINITY;
    for k in 0..fine {
        min_speed = min_speed.min(speed(p * k as f64 / fine as f64));
    }
    if !(min_speed >= SPEED_FLOOR) {
        return Err(GeometryError::DegenerateSpeed(min_speed));
    }

    if let CurveKind::Circle { radius } = desc.kind {
        let map = ArcLengthMap { desc: desc.clone(), length: 2.0 * PI * radius, table: Vec::new(), exact_circle: Some(radius) };
        return Ok(Arc::new(map));
    }

    // cumulative arc length on a uniform θ grid, 10-point Gauss per cell
    let rule = gl(10);
    let dth = p / m as f64;
    let cell = |a: f64, b: f64| -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        rule.0.iter().zip(&rule.1).map(|(x, w)| w * speed(mid + half * x)).sum::<f64>() * half
    };
    let mut cum = vec![0.0; m + 1];
    for k in 0..m {
        cum[k + 1] = cum[k] + cell(k as f64 * dth, (k + 1) as f64 * dth);
    }
    let length = cum[m];
    let s_of = |th: f64| -> f64 {
        let k = ((th / dth).floor() as usize).min(m - 1);
        cum[k] + cell(k as f64 * dth, th)
    };

    let mut table = Vec::with_capacity(m);
    let mut th = 0.0;
    for k in 0..m {
        let target = length * k as f64 / m as f64;
        for _ in 0..50 {
            let f = s_of(th) - target;
            let step = f / speed(th);
            th = (th - step).clamp(0.0, p);
            if step.abs() < 1e-15 * p {
                break;
            }
        }
        let [_, dz, ddz] = desc.eval(th);
        let sp = dz.norm();
        let d1 = 1.0 / sp;
        let d2 = -(dz.conj() * ddz).re / sp.powi(4);
        table.push([th, d1, d2]);
    }
    let map = ArcLengthMap { desc: desc.clone(), length, table, exact_circle: None };

    let c = sampled_bilip(&map, 2048);
    if c < 1e-3 {
        return Err(GeometryError::NonInjectiveCurve(c));
    }
    Ok(Arc::new(map))
}

fn sampled_bilip(map: &ArcLengthMap, samples: usize) -> f64 {
    let l = map.length;
    let pts: Vec<Complex64> = (0..samples).map(|k| map.point(l * k as f64 / samples as f64).pos).collect();
    pair_ratio_min(&pts, l)
}

fn pair_ratio_min(pts: &[Complex64], l: f64) -> f64 {
    let n = pts.len();
    let h = l / n as f64;
    let mut best: f64 = 1.0;
    for i in 0..n {
        for d in 1..=n / 2 {
            let j = (i + d) % n;
            let r = (pts[i] - pts[j]).norm() / (d as f64 * h);
            best = best.min(r);
        }
    }
    best
}

/// Equispaced discretization in arc length.
#[derive(Clone, Debug)]
pub struct DiscretizedCurve {
    pub n_nodes: usize,
    pub nodes: Vec<[f64; 2]>,
    pub params: Vec<f64>,
    pub weights: Vec<f64>,
    pub normals: Vec<[f64; 2]>,
    pub tangents: Vec<[f64; 2]>,
    pub complex_normals: Vec<Complex64>,
    pub bilip_constant: f64,
    pub length: f64,
    /// Nodes as complex numbers `x₁ + i x₂`.
    pub points: Vec<Complex64>,
    /// Unit tangents as complex numbers.
    pub unit_tangents: Vec<Complex64>,
    /// Signed curvature at the nodes.
    pub curvature: Vec<f64>,
    pub map: Arc<ArcLengthMap>,
}

impl DiscretizedCurve {
    /// Diameter of the node set.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.points {
            for b in &self.points {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    /// Signed area from the trapezoidal rule, `½∮ x₁dx₂ − x₂dx₁`.
    pub fn signed_area(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.unit_tangents)
            .zip(&self.weights)
            .map(|((z, t), w)| 0.5 * (z.conj() * t).im * w)
            .sum()
    }

    pub fn sqrt_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.sqrt()).collect()
    }

    /// The same curve at a different resolution.
    pub fn resampled(&self, n: usize) -> Result<DiscretizedCurve, GeometryError> {
        build(self.map.clone(), n, Some(self.bilip_constant))
    }
}

/// Discretizes the curve with `N` equispaced arc-length nodes.
pub fn discretize(desc: &CurveDescriptor, n: usize) -> Result<DiscretizedCurve, GeometryError> {
    if n < 16 || n % 2 != 0 {
        return Err(GeometryError::InvalidResolution(n));
    }
    let map = reparametrize_arclength(desc, 4096)?;
    build(map, n, None)
}

/// Discretization including `N < 16` (used for small illustrative grids).
pub fn discretize_unchecked(desc: &CurveDescriptor, n: usize) -> Result<DiscretizedCurve, GeometryError> {
    let map = reparametrize_arclength(desc, 4096)?;
    build(map, n, None)
}

fn build(map: Arc<ArcLengthMap>, n: usize, bilip: Option<f64>) -> Result<DiscretizedCurve, GeometryError> {
    let l = map.length();
    let h = l / n as f64;
    let mut c = DiscretizedCurve {
        n_nodes: n,
        nodes: Vec::with_capacity(n),
        params: Vec::with_capacity(n),
        weights: vec![h; n],
        normals: Vec::with_capacity(n),
        tangents: Vec::with_capacity(n),
        complex_normals: Vec::with_capacity(n),
        bilip_constant: 1.0,
        length: l,
        points: Vec::with_capacity(n),
        unit_tangents: Vec::with_capacity(n),
        curvature: Vec::with_capacity(n),
        map: map.clone(),
    };
    for j in 0..n {
        let s = j as f64 * h;
        let p = map.point(s);
        let t = p.tangent / p.tangent.norm();
        // n = (t₂, −t₁)
        let nn = Complex64::new(t.im, -t.re);
        c.params.push(s);
        c.nodes.push([p.pos.re, p.pos.im]);
        c.points.push(p.pos);
        c.unit_tangents.push(t);
        c.tangents.push([t.re, t.im]);
        c.normals.push([nn.re, nn.im]);
        c.complex_normals.push(nn);
        // κ = t × ζ''
        c.curvature.push((t.conj() * p.accel).im);
    }
    c.bilip_constant = match bilip {
        Some(b) => b,
        None => estimate_bilip_constant(&c),
    };
    Ok(c)
}

/// Minimum chord/arc ratio over sampled pairs with periodic arc distance
/// at most `L/2`; uses at least 256 samples.
pub fn estimate_bilip_constant(curve: &DiscretizedCurve) -> f64 {
    if curve.n_nodes >= 256 {
        pair_ratio_min(&curve.points, curve.length)
    } else {
        sampled_bilip(&curve.map, 256)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive;

    #[test]
    fn circle_nodes_small_grid() {
        let c = discretize_unchecked(&CurveDescriptor::circle(1.0), 4).unwrap();
        let expect = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for (p, e) in c.nodes.iter().zip(expect) {
            assert!((p[0] - e[0]).abs() < 1e-15 && (p[1] - e[1]).abs() < 1e-15);
        }
        for w in &c.weights {
            assert!((w - PI / 2.0).abs() < 1e-15);
        }
        assert!(matches!(discretize(&CurveDescriptor::circle(1.0), 4), Err(GeometryError::InvalidResolution(4))));
    }

    #[test]
    fn ellipse_length_matches_adaptive_oracle() {
        let d = CurveDescriptor::ellipse(2.0, 1.0);
        let m = reparametrize_arclength(&d, 4096).unwrap();
        let oracle = adaptive(|t| (4.0 * t.sin().powi(2) + t.cos().powi(2)).sqrt(), 0.0, 2.0 * PI, 1e-14);
        assert!((m.length() - oracle).abs() / oracle < 1e-8);
    }

    #[test]
    fn unit_speed_on_sample_grid() {
        for d in [CurveDescriptor::ellipse(2.0, 1.0), CurveDescriptor::star(1.0, 0.2, 3)] {
            let m = reparametrize_arclength(&d, 4096).unwrap();
            for k in 0..997 {
                let s = m.length() * (k as f64 + 0.31) / 997.0;
                let p = m.point(s);
                assert!((p.tangent.norm() - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn star_longer_than_circle() {
        let m = reparametrize_arclength(&CurveDescriptor::star(1.0, 0.2, 3), 4096).unwrap();
        assert!(m.length() > 2.0 * PI);
        assert!(matches!(
            reparametrize_arclength(&CurveDescriptor::star(1.0, 0.4, 3), 4096),
            Err(GeometryError::InvalidDescriptor(_))
        ));
    }

    #[test]
    fn circle_bilip_constant() {
        let c = discretize(&CurveDescriptor::circle(1.0), 64).unwrap();
        assert!(c.bilip_constant >= 2.0 / PI - 1e-6);
        for r in [1.0, 5.0] {
            let c = discretize(&CurveDescriptor::circle(r), 256).unwrap();
            assert!((estimate_bilip_constant(&c) - 2.0 / PI).abs() < 1e-4);
        }
        let s = discretize(&CurveDescriptor::star(1.0, 0.2, 3), 256).unwrap();
        assert!(s.bilip_constant > 0.0 && s.bilip_constant <= 1.0);
    }

    #[test]
    fn ellipse_normal_at_vertex() {
        let c = discretize(&CurveDescriptor::ellipse(2.0, 1.0), 128).unwrap();
        assert!((c.nodes[0][0] - 2.0).abs() < 1e-12);
        assert!((c.normals[0][0] - 1.0).abs() < 1e-8 && c.normals[0][1].abs() < 1e-8);
    }

    #[test]
    fn figure_eight_is_rejected() {
        let map: ParametricMap = Arc::new(|t: f64| {
            let (s, c) = t.sin_cos();
            let (s2, c2) = (2.0 * t).sin_cos();
            [Complex64::new(s, s2), Complex64::new(c, 2.0 * c2), Complex64::new(-s, -4.0 * s2)]
        });
        let d = CurveDescriptor::custom("eight", 2.0 * PI, map);
        assert!(matches!(reparametrize_arclength(&d, 2048), Err(GeometryError::NonInjectiveCurve(_))));
    }

    #[test]
    fn degenerate_speed_is_rejected() {
        let map: ParametricMap = Arc::new(|t: f64| {
            // cusp-like: speed vanishes at t = 0
            let z = Complex64::new(t.cos(), t.sin());
            let f = 1.0 - t.cos();
            [z * f, z * t.sin() + Complex64::new(0.0, 1.0) * z * f, Complex64::new(0.0, 0.0)]
        });
        let d = CurveDescriptor::custom("cusp", 2.0 * PI, map);
        assert!(matches!(reparametrize_arclength(&d, 1024), Err(GeometryError::DegenerateSpeed(_))));
    }

    #[test]
    fn curvature_of_circle() {
        let c = discretize(&CurveDescriptor::circle(2.0), 32).unwrap();
        for k in &c.curvature {
            assert!((k - 0.5).abs() < 1e-14);
        }
        let e = discretize(&CurveDescriptor::ellipse(2.0, 1.0), 64).unwrap();
        // curvature at (2,0) is a/b² = 2
        assert!((e.curvature[0] - 2.0).abs() < 1e-8);
    }
}
