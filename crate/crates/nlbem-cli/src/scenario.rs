//! Scenario file schema and validation.

use crate::CliError;
use nlbem::dirac_nrl::{diagonal_pair, DEFAULT_C_LIST};
use nlbem::geometry::{discretize, CurveDescriptor, DiscretizedCurve};
use nlbem::interactions::{condition_s_family, EigenLaw, InteractionSpec, Mat2};
use num_complex::Complex64 as C;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Eigenvalues,
    Resolvent,
    #[serde(rename = "asymptotic_S")]
    AsymptoticS,
    #[serde(rename = "asymptotic_W")]
    AsymptoticW,
    SchurBounds,
    DiracNrl,
    SelfTests,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Eigenvalues => "eigenvalues",
            Task::Resolvent => "resolvent",
            Task::AsymptoticS => "asymptotic_S",
            Task::AsymptoticW => "asymptotic_W",
            Task::SchurBounds => "schur_bounds",
            Task::DiracNrl => "dirac_nrl",
            Task::SelfTests => "self_tests",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    pub curve: CurveBlock,
    #[serde(default)]
    pub interaction: Option<InteractionBlock>,
    pub task: Task,
    #[serde(default)]
    pub eigenvalues: Option<EigenBlock>,
    #[serde(default)]
    pub resolvent: Option<ResolventBlock>,
    #[serde(default)]
    pub asymptotic: Option<AsymptoticBlock>,
    #[serde(default)]
    pub schur: Option<SchurBlock>,
    #[serde(default)]
    pub dirac: Option<DiracBlock>,
    /// Node counts of an optional resolution sweep.
    #[serde(default)]
    pub resolution_sweep: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveBlock {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
    pub n_nodes: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionBlock {
    pub variant: String,
    pub alpha: Option<f64>,
    pub beta_re: Option<f64>,
    pub beta_im: Option<f64>,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    pub level: Option<usize>,
    pub law: Option<String>,
    pub ratio: Option<f64>,
    pub exponent: Option<f64>,
    pub count: Option<usize>,
    /// Node samples of `F`, `G` for the Dirac-induced variant.
    #[serde(rename = "F")]
    pub f: Option<MatrixData>,
    #[serde(rename = "G")]
    pub g: Option<MatrixData>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenBlock {
    pub w_min: Option<f64>,
    pub w_max: Option<f64>,
    pub points: Option<usize>,
    pub rel_tol: Option<f64>,
    pub residuals: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolventBlock {
    pub w_re: f64,
    pub w_im: f64,
    pub grid_n: usize,
    pub half_width: f64,
    /// Gaussian right-hand sides `[x, y, sigma]`.
    pub sources: Vec<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticBlock {
    pub w_list: Vec<f64>,
    /// Fourier modes of the test densities (`asymptotic_S`).
    #[serde(default)]
    pub modes: Option<Vec<i64>>,
    /// Normalization exponent (`asymptotic_W`).
    #[serde(default)]
    pub tau: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchurBlock {
    pub w: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiracBlock {
    #[serde(rename = "F")]
    pub f: Option<MatrixData>,
    #[serde(rename = "G")]
    pub g: Option<MatrixData>,
    /// Couplings of a diagonal pair, used when `F`/`G` are absent.
    pub lambda: Option<[f64; 2]>,
    pub c_list: Option<Vec<f64>>,
    pub w_re: f64,
    pub w_im: f64,
    pub grid_n: Option<usize>,
    pub half_width: Option<f64>,
}

/// Node-sampled 2×2 matrices: inline rows of 8 numbers
/// `(re, im)` of `m₁₁, m₁₂, m₂₁, m₂₂`, or a CSV file with the same rows.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum MatrixData {
    Inline(Vec<[f64; 8]>),
    File(PathBuf),
}

impl MatrixData {
    fn load(&self, base: &Path, key: &str) -> Result<Vec<Mat2>, CliError> {
        let rows: Vec<[f64; 8]> = match self {
            MatrixData::Inline(v) => v.clone(),
            MatrixData::File(p) => {
                let path = base.join(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Schema(format!("{key}: cannot read {}: {e}", path.display())))?;
                text.lines()
                    .filter(|l| !l.trim().is_empty())
                    .enumerate()
                    .map(|(i, l)| {
                        let v: Result<Vec<f64>, _> = l.split(',').map(|s| s.trim().parse::<f64>()).collect();
                        match v {
                            Ok(v) if v.len() == 8 => Ok(std::array::from_fn(|k| v[k])),
                            _ => Err(CliError::Schema(format!("{key}: line {} of {} needs 8 numbers", i + 1, path.display()))),
                        }
                    })
                    .collect::<Result<_, _>>()?
            }
        };
        Ok(rows.iter().map(|r| [[C::new(r[0], r[1]), C::new(r[2], r[3])], [C::new(r[4], r[5]), C::new(r[6], r[7])]]).collect())
    }
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

/// Parses scenario text; unknown or mistyped keys are reported with their
/// full dotted path and source position.
pub fn parse(text: &str) -> Result<Scenario, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.to_string();
        let key = match msg.strip_prefix("unknown field `").and_then(|r| r.split('`').next()) {
            Some(k) if path == "." => k.to_string(),
            Some(k) if !path.ends_with(k) => format!("{path}.{k}"),
            _ => path,
        };
        schema(format!("key `{key}`: {msg}"))
    })
}

impl Scenario {
    pub fn descriptor(&self) -> Result<CurveDescriptor, CliError> {
        let p = &self.curve.params;
        let need = |k: usize| {
            if p.len() == k {
                Ok(())
            } else {
                Err(schema(format!("key `curve.params`: {} expects {k} values, got {}", self.curve.kind, p.len())))
            }
        };
        match self.curve.kind.as_str() {
            "circle" => {
                if p.is_empty() {
                    return Ok(CurveDescriptor::circle(1.0));
                }
                need(1)?;
                Ok(CurveDescriptor::circle(p[0]))
            }
            "ellipse" => {
                need(2)?;
                Ok(CurveDescriptor::ellipse(p[0], p[1]))
            }
            "star" => {
                need(3)?;
                if p[2] < 1.0 || p[2].fract() != 0.0 {
                    return Err(schema("key `curve.params`: star lobe count must be a positive integer"));
                }
                Ok(CurveDescriptor::star(p[0], p[1], p[2] as u32))
            }
            other => Err(schema(format!("key `curve.kind`: unknown curve kind `{other}` (circle, ellipse, star)"))),
        }
    }

    pub fn curve(&self, n: usize) -> Result<DiscretizedCurve, CliError> {
        discretize(&self.descriptor()?, n).map_err(|e| schema(format!("curve: {e}")))
    }

    pub fn interaction(&self, curve: &DiscretizedCurve, base: &Path) -> Result<InteractionSpec, CliError> {
        let default = InteractionBlock { variant: "zero".into(), ..Default::default() };
        let b = self.interaction.as_ref().unwrap_or(&default);
        let req = |v: Option<f64>, k: &str| v.ok_or_else(|| schema(format!("key `interaction.{k}` is required for variant `{}`", b.variant)));
        let level = || b.level.ok_or_else(|| schema(format!("key `interaction.level` is required for variant `{}`", b.variant)));
        let spec = match b.variant.as_str() {
            "zero" => InteractionSpec::zero(curve),
            "elementary" => InteractionSpec::elementary(
                curve,
                req(b.alpha, "alpha")?,
                C::new(b.beta_re.unwrap_or(0.0), b.beta_im.unwrap_or(0.0)),
                req(b.gamma, "gamma")?,
            ),
            "delta_shell" => InteractionSpec::delta_shell(curve, req(b.eta, "eta")?, level()?),
            "oblique" => InteractionSpec::oblique(curve, req(b.eta, "eta")?, level()?),
            "condition_s" => {
                let count = b.count.ok_or_else(|| schema("key `interaction.count` is required for variant `condition_s`"))?;
                let law = match b.law.as_deref().unwrap_or("geometric") {
                    "geometric" => EigenLaw::Geometric { ratio: req(b.ratio, "ratio")? },
                    "power" => EigenLaw::Power { exponent: req(b.exponent, "exponent")? },
                    other => return Err(schema(format!("key `interaction.law`: unknown law `{other}` (geometric, power)"))),
                };
                condition_s_family(law, count, curve).map_err(|e| schema(format!("interaction: {e}")))?
            }
            "dirac_induced" => {
                let f = b.f.as_ref().ok_or_else(|| schema("key `interaction.F` is required for variant `dirac_induced`"))?.load(base, "interaction.F")?;
                let g = b.g.as_ref().ok_or_else(|| schema("key `interaction.G` is required for variant `dirac_induced`"))?.load(base, "interaction.G")?;
                InteractionSpec::dirac_induced(curve, f, g).map_err(|e| schema(format!("interaction: {e}")))?
            }
            other => {
                return Err(schema(format!(
                    "key `interaction.variant`: unknown variant `{other}` (zero, elementary, delta_shell, oblique, condition_s, dirac_induced)"
                )))
            }
        };
        Ok(spec)
    }

    /// `(F, G)` node samples for the Dirac study.
    pub fn dirac_pair(&self, curve: &DiscretizedCurve, base: &Path) -> Result<(Vec<Mat2>, Vec<Mat2>), CliError> {
        let d = self.dirac_block()?;
        match (&d.f, &d.g, d.lambda) {
            (Some(f), Some(g), None) => Ok((f.load(base, "dirac.F")?, g.load(base, "dirac.G")?)),
            (None, None, Some(l)) => Ok(diagonal_pair(curve, l, |_, _| [1.0, 1.0])),
            _ => Err(schema("dirac: give either both `dirac.F` and `dirac.G`, or `dirac.lambda`")),
        }
    }

    pub fn dirac_block(&self) -> Result<&DiracBlock, CliError> {
        self.dirac.as_ref().ok_or_else(|| schema("key `dirac` is required for task `dirac_nrl`"))
    }

    pub fn c_list(&self) -> Result<Vec<f64>, CliError> {
        let l = self.dirac_block()?.c_list.clone().unwrap_or(DEFAULT_C_LIST.to_vec());
        if l.len() < 2 || l.iter().any(|c| !(*c > 0.0)) {
            return Err(schema("key `dirac.c_list`: needs at least two positive values"));
        }
        Ok(l)
    }

    /// Checks that the parameters of the chosen task are complete.
    pub fn validate(&self) -> Result<(), CliError> {
        self.descriptor()?;
        if self.curve.n_nodes < 16 || self.curve.n_nodes % 2 != 0 {
            return Err(schema(format!("key `curve.n_nodes`: N = {} must be even and at least 16", self.curve.n_nodes)));
        }
        match self.task {
            Task::Eigenvalues => {
                if let Some(e) = &self.eigenvalues {
                    let (a, b) = (e.w_min.unwrap_or(-1e3), e.w_max.unwrap_or(-1e-4));
                    if !(a < b && b < 0.0) {
                        return Err(schema(format!("key `eigenvalues.w_min`/`w_max`: range [{a}, {b}] must be non-empty and negative")));
                    }
                }
            }
            Task::Resolvent => {
                let r = self.resolvent.as_ref().ok_or_else(|| schema("key `resolvent` is required for task `resolvent`"))?;
                if r.sources.is_empty() {
                    return Err(schema("key `resolvent.sources`: at least one source is required"));
                }
            }
            Task::AsymptoticS | Task::AsymptoticW => {
                let a = self.asymptotic.as_ref().ok_or_else(|| schema("key `asymptotic` is required for asymptotic tasks"))?;
                if a.w_list.is_empty() || a.w_list.iter().any(|w| !(*w < 0.0)) {
                    return Err(schema("key `asymptotic.w_list`: needs negative values"));
                }
            }
            Task::SchurBounds => {
                if let Some(s) = &self.schur {
                    if !(s.w < 0.0) {
                        return Err(schema("key `schur.w`: must be negative"));
                    }
                }
            }
            Task::DiracNrl => {
                self.dirac_block()?;
                self.c_list()?;
            }
            Task::SelfTests => {}
        }
        if let Some(s) = &self.resolution_sweep {
            if !matches!(self.task, Task::Eigenvalues | Task::SchurBounds) {
                return Err(schema("key `resolution_sweep`: supported for tasks `eigenvalues` and `schur_bounds`"));
            }
            if s.len() < 2 || s.windows(2).any(|p| p[1] <= p[0]) {
                return Err(schema("key `resolution_sweep`: needs at least two increasing node counts"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN: &str = r#"{"curve": {"kind": "circle", "params": [1.0], "n_nodes": 64}, "task": "eigenvalues"}"#;

    #[test]
    fn minimal_scenario_parses() {
        let s = parse(MIN).unwrap();
        assert_eq!(s.task, Task::Eigenvalues);
        s.validate().unwrap();
    }

    #[test]
    fn unknown_nested_key_is_named() {
        let bad = MIN.replace("\"kind\"", "\"knd\"");
        let e = parse(&bad).unwrap_err().to_string();
        assert!(e.contains("curve.knd"), "{e}");
    }

    #[test]
    fn missing_variant_parameter_is_reported() {
        let s = parse(
            r#"{"curve": {"kind": "circle", "n_nodes": 64}, "interaction": {"variant": "delta_shell", "level": 4}, "task": "eigenvalues"}"#,
        )
        .unwrap();
        let c = s.curve(64).unwrap();
        let e = s.interaction(&c, Path::new(".")).unwrap_err().to_string();
        assert!(e.contains("interaction.eta"), "{e}");
    }
}
