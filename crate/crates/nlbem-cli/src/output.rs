//! Output formatting shared by the tasks.

use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{}", header.join(","))?;
    for r in rows {
        writeln!(f, "{}", r.join(","))?;
    }
    f.flush()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

/// One row of a resolution sweep.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub value: f64,
    /// `|q_N - q_{N_prev}|`.
    pub difference: Option<f64>,
    /// Empirical order from three consecutive resolutions.
    pub order: Option<f64>,
    /// Richardson-extrapolated value from the last three resolutions.
    pub richardson: Option<f64>,
}

/// Empirical orders and Richardson estimates for values `q` at node counts
/// `n`, assuming `|q_N - q_∞| ≈ C N^{-p}`.
pub fn sweep_table(n: &[usize], q: &[f64]) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(n.len());
    for i in 0..n.len() {
        let difference = (i >= 1).then(|| (q[i] - q[i - 1]).abs());
        let (mut order, mut richardson) = (None, None);
        if i >= 2 {
            let (d1, d2) = ((q[i - 1] - q[i - 2]).abs(), (q[i] - q[i - 1]).abs());
            let r = n[i] as f64 / n[i - 1] as f64;
            // differences at round-off level carry no convergence information
            if d2 <= 64.0 * f64::EPSILON * q[i].abs() {
                richardson = Some(q[i]);
            } else if d1 > 0.0 {
                let p = (d1 / d2).ln() / (n[i - 1] as f64 / n[i - 2] as f64).ln();
                order = Some(p);
                if p > 0.0 {
                    richardson = Some(q[i] + (q[i] - q[i - 1]) / (r.powf(p) - 1.0));
                }
            }
        }
        rows.push(SweepRow { n: n[i], value: q[i], difference, order, richardson });
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_recovers_power_law() {
        let n = [32, 64, 128];
        let q: Vec<f64> = n.iter().map(|&k| 2.0 + 5.0 / (k as f64).powi(2)).collect();
        let t = sweep_table(&n, &q);
        assert!((t[2].order.unwrap() - 2.0).abs() < 1e-10);
        assert!((t[2].richardson.unwrap() - 2.0).abs() < 1e-12);
        assert!(t[0].difference.is_none() && t[1].order.is_none());
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.0).len(), "-2.0000000000000000e0".len());
    }
}
