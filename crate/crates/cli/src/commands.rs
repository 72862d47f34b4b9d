//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use decoctl_core::decay::{
    conditions_met, entangled_basis_fidelity, preservation_fidelity, preservation_residuals, DecayEngine, DecayScenario,
    DecoherenceHistory,
};
use decoctl_core::dephasing::{
    basis_state_fidelity, bell_fidelity, fidelity_from_density, fidelity_in_drive_frame, DephasingIntegrals, DephasingScenario,
};
use decoctl_core::linalg::CVector;
use decoctl_core::optimizer::{minimize, power_sweep, OptimizationProblem, ProblemScenario, SearchSettings};
use decoctl_core::oracle::{exact_decay_solve, mc_dephasing_fidelity, OracleReport, ToleranceKind, RNG_NAME};
use decoctl_core::recipes::{self, Dataset};
use serde_json::json;

use crate::config::{BathConfig, DephasingInitial, InitialConfig, Mode, ScenarioConfig};
use crate::output::{self, file_name, write_dataset, write_json, RunManifest, RunSummary};
use crate::CliError;

/// Decay or dephasing physics, from the mode or (for mode-agnostic commands)
/// from the bath model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Physics {
    Decay,
    Dephasing,
}

fn physics(cfg: &ScenarioConfig) -> Physics {
    match cfg.mode {
        Mode::Decay | Mode::Steer | Mode::Sweep => Physics::Decay,
        Mode::Dephasing => Physics::Dephasing,
        Mode::Optimize | Mode::Oracle => match cfg.bath {
            BathConfig::ExponentialDephasing { .. } => Physics::Dephasing,
            _ => Physics::Decay,
        },
    }
}

fn out_dir(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = out.map_or_else(|| PathBuf::from(&cfg.output.dir), Path::to_path_buf);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Artifacts of a config-driven command before they hit the disk.
struct Artifacts {
    tables: Vec<Dataset>,
    json: Vec<(String, serde_json::Value)>,
    results: serde_json::Value,
    resolved: serde_json::Value,
    rng: Option<String>,
}

fn finish(cfg: &ScenarioConfig, command: &str, dir: &Path, started: String, a: Artifacts) -> Result<Vec<PathBuf>, CliError> {
    let stem = &cfg.output.name;
    let mut files = Vec::new();
    for mut t in a.tables {
        t.name = if t.name.is_empty() { stem.clone() } else { format!("{stem}_{}", t.name) };
        files.push(write_dataset(dir, &t, cfg.output.stride)?);
    }
    for (name, value) in &a.json {
        let p = dir.join(format!("{stem}_{name}.json"));
        write_json(&p, value)?;
        files.push(p);
    }
    let manifest_path = dir.join(format!("{stem}.manifest.json"));
    let summary_path = dir.join(format!("{stem}.summary.json"));
    let summary = RunSummary { manifest: file_name(&manifest_path), config_hash: cfg.hash(), config: cfg.clone(), results: a.results };
    write_json(&summary_path, &summary)?;
    files.push(summary_path);
    let manifest = RunManifest {
        command: command.into(),
        config_hash: Some(cfg.hash()),
        engine_version: output::ENGINE_VERSION.into(),
        seed: Some(cfg.seed()),
        rng: a.rng,
        phase_convention: Some(format!("{:?}", cfg.phase_convention).to_lowercase()),
        resolved: a.resolved,
        outputs: files.iter().map(|p| file_name(p)).collect(),
        started,
        finished: output::now(),
    };
    write_json(&manifest_path, &manifest)?;
    files.push(manifest_path);
    Ok(files)
}

fn decay_resolved(s: &DecayScenario<f64>) -> serde_json::Value {
    let mem = s.bath.memory_time(s.memory);
    json!({
        "t_end": s.grid.t_end,
        "dt": s.grid.dt,
        "memory_window": if mem.is_finite() { json!(mem) } else { json!("full") },
        "phase_convention": s.phase_convention,
        "tolerances": { "offdiag": s.tolerances.offdiag, "rate": s.tolerances.rate },
        "energies": s.energies,
    })
}

fn dephasing_resolved(s: &DephasingScenario<f64>) -> serde_json::Value {
    let mem = s.bath.memory_time(s.memory);
    json!({
        "t_end": s.grid.t_end,
        "dt": s.grid.dt,
        "memory_window": if mem.is_finite() { json!(mem) } else { json!("full") },
        "flip_sign": s.flip_sign,
        "noise_model": "Gaussian (first two moments from the bath response)",
    })
}

/// `decoctl run`: dispatches on `mode`.
pub fn run(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    match cfg.mode {
        Mode::Decay => run_decay(cfg, out),
        Mode::Dephasing => run_dephasing(cfg, out),
        Mode::Optimize | Mode::Steer => optimize(cfg, out),
        Mode::Sweep => run_sweep(cfg, out),
        Mode::Oracle => oracle(cfg, out),
    }
}

fn decay_table(h: &DecoherenceHistory<f64>, s: &DecayScenario<f64>, dicke: Option<usize>) -> Dataset {
    let n = s.channels();
    let labels: Vec<String> = (0..n).map(|a| s.layout.channel(a).to_string()).collect();
    let mut cols: Vec<String> = ["t", "A_abs", "A_re", "A_im"].iter().map(|c| c.to_string()).collect();
    for l in &labels {
        cols.extend([format!("c_{l}_abs"), format!("c_{l}_re"), format!("c_{l}_im")]);
    }
    for l in &labels {
        cols.extend([format!("alpha_{l}_re"), format!("alpha_{l}_im")]);
    }
    for a in &labels {
        for b in &labels {
            cols.extend([format!("J_{a}_{b}_re"), format!("J_{a}_{b}_im")]);
        }
    }
    if dicke.is_some() {
        cols.push("F_dicke".into());
    }
    let mut d = Dataset::new("", cols);
    let nan = num_complex::Complex64::new(f64::NAN, f64::NAN);
    for (k, t) in h.times.iter().enumerate() {
        let md = h.mixing_decay(k);
        let a = md.decay.unwrap_or(nan);
        let mut row = vec![*t, a.norm(), a.re, a.im];
        let c = md.mixing.map(|c| c.to_vec()).unwrap_or_else(|| vec![nan; n]);
        for z in &c {
            row.extend([z.norm(), z.re, z.im]);
        }
        for z in h.amplitudes[k].iter() {
            row.extend([z.re, z.im]);
        }
        for z in h.j[k].iter() {
            row.extend([z.re, z.im]);
        }
        if let Some(l) = dicke {
            row.push(entangled_basis_fidelity(h, l, *t).unwrap_or(f64::NAN));
        }
        d.rows.push(row);
    }
    d
}

fn run_decay(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let started = output::now();
    let s = cfg.decay_scenario()?;
    let dir = out_dir(cfg, out)?;
    let h = DecayEngine::new(&s).map_err(|e| CliError::core("scenario", e))?.run();
    let dicke = match cfg.initial {
        Some(InitialConfig::Dicke { l }) => Some(l),
        _ => None,
    };
    let k = h.len() - 1;
    let t = h.times[k];
    let res = preservation_residuals(&h, t);
    let md = h.mixing_decay(k);
    let fid = preservation_fidelity(&h, t, &s.tolerances);
    let results = json!({
        "t_end": t,
        "decay_abs": md.decay.map(|a| a.norm()),
        "mixing_abs": md.mixing.map(|c| c.iter().map(|z| z.norm()).collect::<Vec<_>>()),
        "residuals": res,
        "conditions_met": conditions_met(&h.j[k], &res, &s.tolerances),
        "preservation_fidelity": { "value": fid.value, "approximate": fid.approximate },
        "nodes": h.len(),
    });
    let table = decay_table(&h, &s, dicke);
    finish(cfg, "run", &dir, started, Artifacts { tables: vec![table], json: vec![], results, resolved: decay_resolved(&s), rng: None })
}

fn dephasing_table(s: &DephasingScenario<f64>, ints: &DephasingIntegrals<f64>, psi: &CVector<f64>, init: DephasingInitial) -> Result<Dataset, CliError> {
    let m = s.qubits();
    let mut cols = vec!["t".to_string()];
    match init {
        DephasingInitial::Basis(_) => cols.extend(["F".into(), "F_density".into()]),
        DephasingInitial::Bell(_) => cols.extend(["F".into(), "F_density".into(), "F_drive".into()]),
        DephasingInitial::Vector => cols.extend(["F_density".into(), "F_drive".into()]),
    }
    cols.push("outside_validity".into());
    for j in 0..m {
        for jp in 0..m {
            cols.extend([format!("JP_{}_{}_re", j + 1, jp + 1), format!("JP_{}_{}_im", j + 1, jp + 1)]);
        }
    }
    let mut d = Dataset::new("", cols);
    let core = |e| CliError::core("scenario", e);
    for k in 0..ints.len() {
        let mut row = vec![ints.times[k]];
        let dens = fidelity_from_density(s, ints, psi, k).map_err(core)?;
        let primary = match init {
            DephasingInitial::Basis(_) => {
                let f = basis_state_fidelity(ints, k).value;
                row.extend([f, dens]);
                f
            }
            DephasingInitial::Bell(l) => {
                let f = bell_fidelity(s, ints, l, k).map_err(core)?.value;
                row.extend([f, dens, fidelity_in_drive_frame(s, ints, psi, k).map_err(core)?]);
                f
            }
            DephasingInitial::Vector => {
                row.extend([dens, fidelity_in_drive_frame(s, ints, psi, k).map_err(core)?]);
                dens
            }
        };
        row.push(if 1.0 - primary > 0.2 { 1.0 } else { 0.0 });
        for j in 0..m {
            for jp in 0..m {
                let z = ints.jp(k, j, jp);
                row.extend([z.re, z.im]);
            }
        }
        d.rows.push(row);
    }
    Ok(d)
}

fn run_dephasing(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let started = output::now();
    let s = cfg.dephasing_scenario()?;
    let (psi, init) = cfg.dephasing_initial(s.qubits())?;
    let dir = out_dir(cfg, out)?;
    let ints = DephasingIntegrals::compute(&s).map_err(|e| CliError::core("scenario", e))?;
    let table = dephasing_table(&s, &ints, &psi, init)?;
    let first_col = table.columns[1].clone();
    let f = table.column(&first_col).unwrap_or_default();
    let outside = table.column("outside_validity").unwrap_or_default().iter().any(|v| *v > 0.0);
    if outside {
        log::warn!("fidelity loss exceeds 0.2; second-order results are outside their validity range");
    }
    let results = json!({
        "t_end": ints.times[ints.len() - 1],
        "fidelity_column": first_col,
        "fidelity_final": f.last(),
        "fidelity_min": f.iter().copied().fold(f64::INFINITY, f64::min),
        "outside_validity": outside,
    });
    finish(cfg, "run", &dir, started, Artifacts { tables: vec![table], json: vec![], results, resolved: dephasing_resolved(&s), rng: None })
}

fn run_sweep(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let started = output::now();
    let sweep = cfg.sweep.as_ref().ok_or_else(|| CliError::validation("mode `sweep` needs a `sweep` block"))?;
    let s = cfg.decay_scenario()?;
    let dir = out_dir(cfg, out)?;
    let points = power_sweep(&s, &sweep.powers, &sweep.search).map_err(|e| CliError::core("sweep", e))?;
    let table = recipes::sweep_dataset("", &points);
    let results = json!({
        "points": points.len(),
        "fell_back": points.iter().filter(|p| p.fell_back).count(),
        "symmetrized": points.iter().filter(|p| p.symmetrized).count(),
        "local_never_worse": points.iter().all(|p| p.local_decay >= p.global_decay - 1e-9),
    });
    finish(cfg, "run", &dir, started, Artifacts { tables: vec![table], json: vec![], results, resolved: decay_resolved(&s), rng: None })
}

/// `decoctl optimize`.
pub fn optimize(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let started = output::now();
    let o = cfg.optimize.as_ref().ok_or_else(|| CliError::validation("`optimize` block is required"))?;
    let (scenario, resolved) = match physics(cfg) {
        Physics::Decay => {
            let s = cfg.decay_scenario()?;
            let r = decay_resolved(&s);
            (ProblemScenario::Decay(s), r)
        }
        Physics::Dephasing => {
            let s = cfg.dephasing_scenario()?;
            let r = dephasing_resolved(&s);
            (ProblemScenario::Dephasing(s), r)
        }
    };
    let dir = out_dir(cfg, out)?;
    let problem = OptimizationProblem { scenario, free: o.free.clone(), objective: o.objective.clone() };
    let result = minimize(problem, &o.search).map_err(|e| CliError::core("optimize", e))?;
    let mut trace = Dataset::new("trace", vec!["iteration".into(), "objective".into()]);
    trace.rows = result.trace.iter().enumerate().map(|(i, v)| vec![i as f64, *v]).collect();
    let results = json!({
        "parameters": result.parameters,
        "objective": result.objective,
        "converged": result.converged,
        "evaluations": result.evaluations,
    });
    let json = vec![("result".to_string(), serde_json::to_value(&result)?)];
    finish(cfg, "optimize", &dir, started, Artifacts { tables: vec![trace], json, results, resolved, rng: None })
}

fn report_times(cfg: &ScenarioConfig, t_end: f64) -> Vec<f64> {
    match cfg.oracle.as_ref() {
        Some(o) if !o.times.is_empty() => o.times.clone(),
        _ => (1..=5).map(|k| t_end * k as f64 / 5.0).collect(),
    }
}

/// `decoctl oracle`: engine against the exact decay solver or the Monte Carlo
/// dephasing average.
pub fn oracle(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    match physics(cfg) {
        Physics::Decay => oracle_decay(cfg, out),
        Physics::Dephasing => oracle_dephasing(cfg, out),
    }
}

fn oracle_decay(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let started = output::now();
    let s = cfg.decay_scenario()?;
    let dir = out_dir(cfg, out)?;
    let h = DecayEngine::new(&s).map_err(|e| CliError::core("scenario", e))?.run();
    let ex = exact_decay_solve(&s).map_err(|e| CliError::core("oracle", e))?;
    let decay_of = |a: &[num_complex::Complex64]| decoctl_core::decay::mixing_decay_parameters(a, 0).decay.map_or(f64::NAN, |z| z.norm());
    let mut table = Dataset::new("oracle", vec!["t".into(), "A_engine".into(), "A_exact".into(), "rel_diff".into()]);
    for k in 0..h.len() {
        let a = h.mixing_decay(k).decay.map_or(f64::NAN, |z| z.norm());
        let b = decay_of(ex.amplitudes[k].as_slice().unwrap_or(&[]));
        table.rows.push(vec![h.times[k], a, b, (a - b).abs() / b.abs()]);
    }
    let tol = cfg.oracle.as_ref().and_then(|o| o.tolerance).unwrap_or(0.05);
    let reports: Vec<OracleReport> = report_times(cfg, s.grid.t_end)
        .iter()
        .map(|&t| {
            let k = h.index_at(t);
            let r = &table.rows[k];
            OracleReport::compare("decay_abs", r[0], r[1], r[2], None, tol, ToleranceKind::Relative, None, s.grid.dt)
        })
        .collect();
    let results = json!({ "all_pass": reports.iter().all(|r| r.pass), "reports": reports.len() });
    let json = vec![("oracle_report".to_string(), serde_json::to_value(&reports)?)];
    finish(cfg, "oracle", &dir, started, Artifacts { tables: vec![table], json, results, resolved: decay_resolved(&s), rng: None })
}

fn oracle_dephasing(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let started = output::now();
    let s = cfg.dephasing_scenario()?;
    let (psi, init) = cfg.dephasing_initial(s.qubits())?;
    let dir = out_dir(cfg, out)?;
    let count = cfg.oracle.as_ref().map_or(2000, |o| o.realizations);
    let ints = DephasingIntegrals::compute(&s).map_err(|e| CliError::core("scenario", e))?;
    let mc = mc_dephasing_fidelity(&s, &psi, count, cfg.seed()).map_err(|e| CliError::core("oracle", e))?;
    let core = |e| CliError::core("scenario", e);
    let engine_at = |k: usize| -> Result<(&'static str, f64), CliError> {
        Ok(match init {
            DephasingInitial::Basis(_) => ("basis_state_fidelity", basis_state_fidelity(&ints, k).value),
            DephasingInitial::Bell(l) => ("bell_fidelity", bell_fidelity(&s, &ints, l, k).map_err(core)?.value),
            DephasingInitial::Vector => ("fidelity_from_density", fidelity_from_density(&s, &ints, &psi, k).map_err(core)?),
        })
    };
    let mut table = Dataset::new(
        "oracle",
        vec!["t".into(), "F_engine".into(), "F_density".into(), "F_mc".into(), "F_mc_stderr".into()],
    );
    for (i, t) in mc.times.iter().enumerate() {
        let k = ints.index_at(*t);
        let (_, e) = engine_at(k)?;
        let d = fidelity_from_density(&s, &ints, &psi, k).map_err(core)?;
        table.rows.push(vec![*t, e, d, mc.mean[i], mc.stderr[i]]);
    }
    let nse = cfg.oracle.as_ref().and_then(|o| o.tolerance).unwrap_or(3.0);
    let mut reports = Vec::new();
    for t in report_times(cfg, s.grid.t_end) {
        let i = mc.index_at(t);
        let (name, e) = engine_at(ints.index_at(t))?;
        reports.push(OracleReport::compare(name, mc.times[i], e, mc.mean[i], Some(mc.stderr[i]), nse, ToleranceKind::StandardErrors, Some(count), s.grid.dt));
    }
    let results = json!({ "all_pass": reports.iter().all(|r| r.pass), "reports": reports.len(), "realizations": count });
    let json = vec![("oracle_report".to_string(), serde_json::to_value(&reports)?)];
    let rng = Some(format!("{RNG_NAME}; seed {}", cfg.seed()));
    finish(cfg, "oracle", &dir, started, Artifacts { tables: vec![table], json, results, resolved: dephasing_resolved(&s), rng })
}

/// `decoctl figure`: writes every dataset of the figure plus a manifest that
/// echoes the scenarios used.
pub fn figure(name: &str, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let started = output::now();
    let params = recipes::figure_parameters(name).map_err(|e| CliError::core("figure", e))?;
    fs::create_dir_all(out)?;
    let sets = recipes::figure(name).map_err(|e| CliError::core("figure", e))?;
    let mut files = Vec::new();
    for d in &sets {
        files.push(write_dataset(out, d, 1)?);
    }
    let manifest_path = out.join(format!("{name}.manifest.json"));
    let manifest = RunManifest {
        command: format!("figure {name}"),
        config_hash: None,
        engine_version: output::ENGINE_VERSION.into(),
        seed: None,
        rng: None,
        phase_convention: Some(if name == "fig6" { "n/a (dephasing)".into() } else { "rotating".into() }),
        resolved: json!({ "scenarios": params, "search": SearchSettings::default() }),
        outputs: files.iter().map(|p| file_name(p)).collect(),
        started,
        finished: output::now(),
    };
    write_json(&manifest_path, &manifest)?;
    files.push(manifest_path);
    Ok(files)
}
