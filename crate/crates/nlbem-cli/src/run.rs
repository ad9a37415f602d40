//! Task dispatch and output writing.

use crate::output::{num, sweep_table, write_csv, write_json, SweepRow};
use crate::scenario::{parse, Scenario, Task};
use crate::CliError;
use log::info;
use nalgebra::DVector;
use nlbem::dirac_nrl::{default_panel, nr_limit_study, DiracError, DiracModel};
use nlbem::geometry::DiscretizedCurve;
use nlbem::interactions::fourier_mode;
use nlbem::layer_operators::{
    assemble_layers, assemble_m, k0_majorant, k1_directional_majorant, potential_bound_check, schur_bound_check, write_csv as write_matrix,
    AssemblyMethod, Need, SchurCheck, SchurKernel, SpectralParam,
};
use nlbem::selftest::run_all;
use nlbem::spectral_solver::{asymptotic_study_s, asymptotic_study_w, find_eigenvalues, krein_apply, BsProblem, Grid, ScanConfig};
use num_complex::Complex64 as C;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub scenario_hash: String,
    pub tool_version: String,
    pub name: Option<String>,
    pub task: String,
    pub n_nodes: usize,
    /// Output files written into the output directory.
    pub outputs: Vec<String>,
    pub results: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution_sweep: Option<Vec<SweepRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunReport {
    pub fn summary(&self) -> String {
        format!("{} [{}] N = {}: outputs {}", self.task, &self.scenario_hash[..12], self.n_nodes, self.outputs.join(", "))
    }
}

/// Wall-clock timings, kept in their own file so that the other outputs
/// are byte-identical between runs.
#[derive(Default, Serialize)]
struct Timings(BTreeMap<String, f64>);

impl Timings {
    fn time<T>(&mut self, key: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.0.insert(key.to_string(), t.elapsed().as_secs_f64());
        out
    }
}

fn numerical(context: &str) -> impl Fn(&dyn std::fmt::Display) -> CliError + '_ {
    move |e| CliError::Numerical(format!("{context}: {e}"))
}

fn dirac_err(e: DiracError) -> CliError {
    match e {
        DiracError::InvalidParameter(_) | DiracError::AsymmetricPair(_) => CliError::Schema(format!("dirac: {e}")),
        other => CliError::Numerical(format!("dirac_nrl: {other}")),
    }
}

struct Ctx<'a> {
    scenario: &'a Scenario,
    base: PathBuf,
    out: &'a Path,
    hash: String,
    outputs: Vec<String>,
    timings: Timings,
}

impl Ctx<'_> {
    fn csv(&mut self, file: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        write_csv(&self.out.join(file), header, rows)?;
        self.outputs.push(file.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, file: &str, v: &T) -> Result<(), CliError> {
        write_json(&self.out.join(file), v)?;
        self.outputs.push(file.to_string());
        Ok(())
    }
}

pub fn run_scenario(path: &Path, out: &Path, dump: Option<&Path>) -> Result<RunReport, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Schema(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::Schema("scenario is not UTF-8".into()))?;
    let hash: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    let scenario = parse(&text)?;
    scenario.validate()?;
    std::fs::create_dir_all(out)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut ctx = Ctx { scenario: &scenario, base, out, hash: hash.clone(), outputs: Vec::new(), timings: Timings::default() };
    info!("scenario {} ({}), hash {hash}", path.display(), scenario.task.name());

    let n = scenario.curve.n_nodes;
    let outcome = (|| -> Result<(Value, Option<Vec<SweepRow>>), CliError> {
        let curve = ctx.timings.time("discretize", || scenario.curve(n))?;
        if let Some(dir) = dump {
            dump_operators(&scenario, &curve, &ctx.base, dir)?;
        }
        let results = match scenario.task {
            Task::Eigenvalues => task_eigenvalues(&mut ctx, &curve)?,
            Task::Resolvent => task_resolvent(&mut ctx, &curve)?,
            Task::AsymptoticS => task_asymptotic_s(&mut ctx, &curve)?,
            Task::AsymptoticW => task_asymptotic_w(&mut ctx, &curve)?,
            Task::SchurBounds => json!({ "w": schur_w(&scenario), "check": schur(&curve, schur_w(&scenario))? }),
            Task::DiracNrl => task_dirac(&mut ctx, &curve)?,
            Task::SelfTests => {
                let checks = ctx.timings.time("self_tests", || run_all(n));
                if let Some(bad) = checks.iter().find(|c| !c.passed) {
                    return Err(CliError::Numerical(format!("self-test `{}` failed: {:.3e} > {:.0e}", bad.name, bad.value, bad.tolerance)));
                }
                json!({ "checks": checks, "bessel_bound_constants": nlbem::special_functions::default_bessel_bound_constants() })
            }
        };
        let sweep = match &scenario.resolution_sweep {
            Some(list) => Some(resolution_sweep(&mut ctx, list)?),
            None => None,
        };
        Ok((results, sweep))
    })();

    let (results, sweep, error) = match outcome {
        Ok((r, s)) => (r, s, None),
        Err(e @ CliError::Numerical(_)) => (Value::Null, None, Some(e)),
        Err(e) => return Err(e),
    };
    if let Some(s) = &sweep {
        let rows: Vec<Vec<String>> = s
            .iter()
            .map(|r| vec![r.n.to_string(), num(r.value), opt(r.difference), opt(r.order), opt(r.richardson)])
            .collect();
        ctx.csv("sweep.csv", &["n_nodes", "value", "difference", "order", "richardson"], &rows)?;
    }
    write_json(&out.join("timings.json"), &ctx.timings)?;
    ctx.outputs.push("timings.json".into());
    ctx.outputs.push("report.json".into());
    let report = RunReport {
        scenario_hash: hash,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        name: scenario.name.clone(),
        task: scenario.task.name().into(),
        n_nodes: n,
        outputs: ctx.outputs,
        results,
        resolution_sweep: sweep,
        error: error.as_ref().map(|e| e.to_string()),
    };
    write_json(&out.join("report.json"), &report)?;
    match error {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn scan_config(s: &Scenario, spec: &nlbem::interactions::InteractionSpec) -> ScanConfig {
    let mut cfg = ScanConfig::for_spec(spec);
    if let Some(e) = &s.eigenvalues {
        cfg.w_min = e.w_min.unwrap_or(cfg.w_min);
        cfg.w_max = e.w_max.unwrap_or(cfg.w_max);
        cfg.points = e.points.unwrap_or(cfg.points);
        cfg.rel_tol = e.rel_tol.unwrap_or(cfg.rel_tol);
        cfg.residuals = e.residuals.unwrap_or(cfg.residuals);
    }
    cfg
}

fn task_eigenvalues(ctx: &mut Ctx, curve: &DiscretizedCurve) -> Result<Value, CliError> {
    let s = ctx.scenario;
    let spec = s.interaction(curve, &ctx.base)?;
    let problem = BsProblem::new(curve, &spec).map_err(|e| numerical("interaction")(&e))?;
    let cfg = scan_config(s, &spec);
    let found = ctx.timings.time("eigenvalues", || find_eigenvalues(&problem, &cfg)).map_err(|e| numerical("eigenvalues")(&e))?;
    let records: Vec<Value> = found
        .eigenvalues
        .iter()
        .map(|e| {
            json!({
                "w_star": e.w_star,
                "multiplicity": e.multiplicity,
                "residuals": { "bs": e.residual_bs, "pde": e.residual_pde, "tc": e.residual_tc },
                "singular_values": e.singular_values,
                "spec_hash": ctx.hash,
                "N": curve.n_nodes,
            })
        })
        .collect();
    ctx.json("eigenvalues.json", &records)?;
    let mu_cols = found.scan.iter().map(|p| p.mu_values.len()).max().unwrap_or(0);
    let mut header = vec!["w".to_string(), "indicator".into(), "det".into()];
    header.extend((1..=mu_cols).map(|k| format!("mu_{k}")));
    let rows: Vec<Vec<String>> = found
        .scan
        .iter()
        .map(|p| {
            let mut r = vec![num(p.w), num(p.indicator), num(p.det)];
            r.extend((0..mu_cols).map(|k| p.mu_values.get(k).map(|v| num(*v)).unwrap_or_default()));
            r
        })
        .collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    ctx.csv("scan.csv", &h, &rows)?;
    Ok(json!({
        "interaction": spec.label,
        "range": [cfg.w_min, cfg.w_max],
        "count": found.count(),
        "dim_k": found.dim_k,
        "mode": found.mode,
        "warnings": found.warnings,
    }))
}

fn task_resolvent(ctx: &mut Ctx, curve: &DiscretizedCurve) -> Result<Value, CliError> {
    let s = ctx.scenario;
    let r = s.resolvent.as_ref().expect("validated");
    let spec = s.interaction(curve, &ctx.base)?;
    let problem = BsProblem::new(curve, &spec).map_err(|e| numerical("interaction")(&e))?;
    let grid = Grid::new(r.grid_n, r.half_width);
    let w = C::new(r.w_re, r.w_im);
    let pts = grid.points();
    let mut rows = Vec::new();
    let mut norms = Vec::new();
    for (k, src) in r.sources.iter().enumerate() {
        let (x0, sigma) = (C::new(src[0], src[1]), src[2]);
        let rhs = grid.sample(|x| C::new((-(x - x0).norm_sqr() / (2.0 * sigma * sigma)).exp(), 0.0));
        let o = ctx.timings.time(&format!("resolvent_{k}"), || krein_apply(&problem, grid, w, &rhs)).map_err(|e| numerical("resolvent")(&e))?;
        norms.push(json!({ "source": k, "norm": grid.norm(&o.values), "free_norm": grid.norm(&o.free), "rhs_norm": grid.norm(&rhs) }));
        for (q, p) in pts.iter().enumerate() {
            rows.push(vec![k.to_string(), num(p.re), num(p.im), num(o.values[q].re), num(o.values[q].im), num(o.free[q].re), num(o.free[q].im)]);
        }
    }
    ctx.csv("resolvent.csv", &["source", "x", "y", "re", "im", "free_re", "free_im"], &rows)?;
    Ok(json!({ "w": [w.re, w.im], "grid_n": r.grid_n, "half_width": r.half_width, "norms": norms }))
}

fn task_asymptotic_s(ctx: &mut Ctx, curve: &DiscretizedCurve) -> Result<Value, CliError> {
    let a = ctx.scenario.asymptotic.as_ref().expect("validated");
    let modes = a.modes.clone().unwrap_or(vec![0, 1, 3]);
    let dens: Vec<DVector<C>> = modes.iter().map(|&m| fourier_mode(curve, m)).collect();
    let rows = ctx.timings.time("asymptotic_S", || asymptotic_study_s(curve, &dens, &a.w_list, None)).map_err(|e| numerical("asymptotic_S")(&e))?;
    let mut header = vec!["w".to_string()];
    header.extend(modes.iter().map(|m| format!("err_mode_{m}")));
    header.push("scaled_norm".into());
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![num(r.w)];
            v.extend(r.density_errors.iter().map(|e| num(*e)));
            v.push(num(r.scaled_norm));
            v
        })
        .collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    ctx.csv("rates.csv", &h, &table)?;
    let decreasing: Vec<bool> = (0..modes.len())
        .map(|k| nlbem::spectral_solver::strictly_decreasing(&rows.iter().map(|r| r.density_errors[k]).collect::<Vec<_>>()))
        .collect();
    Ok(json!({ "modes": modes, "errors_strictly_decreasing": decreasing }))
}

fn task_asymptotic_w(ctx: &mut Ctx, curve: &DiscretizedCurve) -> Result<Value, CliError> {
    let a = ctx.scenario.asymptotic.as_ref().expect("validated");
    let tau = a.tau.unwrap_or(0.25);
    let study = ctx.timings.time("asymptotic_W", || asymptotic_study_w(curve, tau, &a.w_list)).map_err(|e| numerical("asymptotic_W")(&e))?;
    let table: Vec<Vec<String>> = study.rows.iter().map(|r| vec![num(r.w), num(r.norm), num(r.scaled)]).collect();
    ctx.csv("rates.csv", &["w", "norm", "scaled"], &table)?;
    let scaled: Vec<f64> = study.rows.iter().map(|r| r.scaled).collect();
    Ok(json!({
        "tau": tau,
        "growth_exponent": study.growth_exponent,
        "scaled_strictly_decreasing": nlbem::spectral_solver::strictly_decreasing(&scaled),
    }))
}

fn schur_w(s: &Scenario) -> f64 {
    s.schur.as_ref().map(|b| b.w).unwrap_or(-1.0)
}

fn schur(curve: &DiscretizedCurve, w: f64) -> Result<Value, CliError> {
    let err = numerical("schur_bounds");
    let row = |c: SchurCheck| json!({
        "discrete_norm": c.discrete_norm,
        "analytic_bound": c.analytic_bound,
        "within_bound": c.discrete_norm <= 1.01 * c.analytic_bound,
    });
    let sl = schur_bound_check(curve, SchurKernel::SingleLayerModulus { w }, &k0_majorant(w)).map_err(|e| err(&e))?;
    let dir = schur_bound_check(curve, SchurKernel::K1DirectionalModulus { w }, &k1_directional_majorant(w, curve)).map_err(|e| err(&e))?;
    let alpha = k0_majorant(w);
    let half = 2.0 * curve.diameter() + 10.0 / (-w).sqrt();
    let pot = potential_bound_check(curve, &alpha, &alpha, 0.5, half, 96).map_err(|e| err(&e))?;
    let all = [sl, dir, pot].iter().all(|c| c.discrete_norm <= 1.01 * c.analytic_bound);
    Ok(json!({
        "bilip_constant": sl.bilip_constant,
        "single_layer": row(sl),
        "k1_directional": row(dir),
        "single_layer_potential_theta_half": row(pot),
        "within_bound": all,
    }))
}

fn task_dirac(ctx: &mut Ctx, curve: &DiscretizedCurve) -> Result<Value, CliError> {
    let s = ctx.scenario;
    let d = s.dirac_block()?;
    let (f, g) = s.dirac_pair(curve, &ctx.base)?;
    // validates the pair before the expensive study
    DiracModel::new(curve, f.clone(), g.clone(), 1.0, false).map_err(dirac_err)?;
    let grid = Grid::new(d.grid_n.unwrap_or(64), d.half_width.unwrap_or(5.0));
    let panel = default_panel(grid);
    let c_list = s.c_list()?;
    let w = C::new(d.w_re, d.w_im);
    let study = ctx.timings.time("dirac_nrl", || nr_limit_study(curve, f, g, w, &c_list, grid, &panel)).map_err(dirac_err)?;
    let rows: Vec<Vec<String>> = study
        .rows
        .iter()
        .map(|r| vec![num(r.c), num(r.discrepancy), num(r.leakage), opt(r.slope_so_far)])
        .collect();
    ctx.csv("rates.csv", &["c", "discrepancy", "leakage", "slope_so_far"], &rows)?;
    Ok(json!({ "w": study.w, "slope": study.slope, "intercept": study.intercept, "r2": study.r2, "fitted_constant": study.intercept.exp() }))
}

/// Lowest eigenvalue (or Schur norm) against `N`.
fn resolution_sweep(ctx: &mut Ctx, list: &[usize]) -> Result<Vec<SweepRow>, CliError> {
    let s = ctx.scenario;
    let mut q = Vec::with_capacity(list.len());
    for &n in list {
        let curve = s.curve(n)?;
        let v = match s.task {
            Task::Eigenvalues => {
                let spec = s.interaction(&curve, &ctx.base)?;
                let problem = BsProblem::new(&curve, &spec).map_err(|e| numerical("interaction")(&e))?;
                let mut cfg = scan_config(s, &spec);
                cfg.residuals = false;
                let found = ctx.timings.time(&format!("sweep_{n}"), || find_eigenvalues(&problem, &cfg)).map_err(|e| numerical("sweep")(&e))?;
                found.values().first().copied().ok_or_else(|| CliError::Numerical(format!("sweep: no eigenvalue found at N = {n}")))?
            }
            Task::SchurBounds => {
                let w = schur_w(s);
                schur_bound_check(&curve, SchurKernel::SingleLayerModulus { w }, &k0_majorant(w)).map_err(|e| numerical("sweep")(&e))?.discrete_norm
            }
            _ => unreachable!("validated"),
        };
        q.push(v);
    }
    Ok(sweep_table(list, &q))
}

/// `S`, `W`, `W̃`, `M` at the task's reference parameter, and `B`.
fn dump_operators(s: &Scenario, curve: &DiscretizedCurve, base: &Path, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let w = match s.task {
        Task::Resolvent => s.resolvent.as_ref().map(|r| C::new(r.w_re, r.w_im)).unwrap_or(C::new(-1.0, 0.0)),
        Task::SchurBounds => C::new(schur_w(s), 0.0),
        _ => C::new(-1.0, 0.0),
    };
    let p = SpectralParam::new(w).map_err(|e| numerical("dump")(&e))?;
    let set = assemble_layers(curve, &p, Need::ALL, AssemblyMethod::Auto);
    for (name, m) in [("S", set.s), ("W", set.w), ("W_tilde", set.wt)] {
        write_matrix(&dir.join(format!("{name}.csv")), &m.expect("requested"))?;
    }
    write_matrix(&dir.join("M.csv"), &assemble_m(curve, &p).to_dense())?;
    if s.task != Task::DiracNrl && s.task != Task::SelfTests {
        let spec = s.interaction(curve, base)?;
        let b = spec.assemble(curve).map_err(|e| numerical("dump")(&e))?;
        write_matrix(&dir.join("B.csv"), &b)?;
    }
    Ok(())
}
