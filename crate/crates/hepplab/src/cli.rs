// Copyright 2026 The hepplab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Batch front door: plain `key = value` experiment configs (hard
//! failure on unknown keys), orchestration of the validation and study
//! pipelines, and flat-file report emission with versioned names.

use crate::error::{Error, Result};
use crate::hepp::{convergence_study, ConvergenceReport, PsiSpec, StudyOptions};
use crate::linalg::{c, cr, C64};
use crate::pphi2::{
    build_model, build_potential_tensors, delta_circ, integrate_field, parse_model_spec, restrict_model,
    CutoffProfile, GridModel,
};
use crate::suites;
use crate::Tolerances;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExperimentKind {
    Validate,
    Converge,
    Classical,
    Bogocheck,
}

/// Fully resolved experiment description; every tolerance and grid is
/// embedded so emitted manifests trace each number back to its inputs.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub out_dir: Option<String>,
    // model
    pub model_d: usize,
    pub model_dk: f64,
    pub model_m0: f64,
    pub model_g: String,
    pub model_beta: Vec<f64>,
    pub model_jmax: usize,
    /// Mode count for the quantum restriction in `converge`.
    pub modes: usize,
    // run parameters
    pub phi0: Vec<(f64, f64)>,
    pub psi: String,
    pub t_final: f64,
    pub n_list: Vec<usize>,
    pub eps_grid: Vec<f64>,
    pub flow_tol: f64,
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Validate,
            seed: 7,
            out_dir: None,
            model_d: 8,
            model_dk: 0.5,
            model_m0: 1.0,
            model_g: "gauss(1.0)".into(),
            model_beta: vec![0.0, 0.0, 0.0, 0.0, 0.25],
            model_jmax: 4,
            modes: 1,
            phi0: vec![(0.5, 0.0)],
            psi: "vacuum".into(),
            t_final: 1.0,
            n_list: vec![0, 1, 2],
            eps_grid: vec![0.32, 0.16, 0.08, 0.04, 0.02],
            flow_tol: 1e-11,
            tolerances: Tolerances::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn build_model(&self) -> Result<GridModel> {
        let profile = parse_profile(&self.model_g, 0)?;
        build_model(self.model_d, self.model_dk, self.model_m0, profile, self.model_beta.clone())
    }

    pub fn phi0_complex(&self) -> Vec<C64> {
        self.phi0.iter().map(|&(re, im)| c(re, im)).collect()
    }

    pub fn psi_spec(&self) -> Result<PsiSpec> {
        parse_psi(&self.psi, 0)
    }
}

fn parse_profile(text: &str, line: usize) -> Result<CutoffProfile> {
    let v = text.replace(' ', "");
    if let Some(rest) = v.strip_prefix("gauss(").and_then(|r| r.strip_suffix(')')) {
        return Ok(CutoffProfile::Gaussian {
            width: rest.parse().map_err(|_| Error::Parse { line, msg: format!("bad width '{rest}'") })?,
        });
    }
    if let Some(rest) = v.strip_prefix("bump(").and_then(|r| r.strip_suffix(')')) {
        return Ok(CutoffProfile::Bump {
            width: rest.parse().map_err(|_| Error::Parse { line, msg: format!("bad width '{rest}'") })?,
        });
    }
    Err(Error::Parse { line, msg: format!("unknown profile '{text}'") })
}

fn parse_psi(text: &str, line: usize) -> Result<PsiSpec> {
    let v = text.trim();
    if v == "vacuum" {
        return Ok(PsiSpec::Vacuum);
    }
    if let Some(rest) = v.strip_prefix("sector(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = rest.split(',').map(|s| s.trim()).collect();
        if parts.len() != 2 {
            return Err(Error::Parse { line, msg: "sector(n, index) expects two integers".into() });
        }
        let sector = parts[0].parse().map_err(|_| Error::Parse { line, msg: "bad sector".into() })?;
        let index = parts[1].parse().map_err(|_| Error::Parse { line, msg: "bad index".into() })?;
        return Ok(PsiSpec::SectorBasis { sector, index });
    }
    if let Some(rest) = v.strip_prefix("coherent(").and_then(|r| r.strip_suffix(')')) {
        let u = parse_complex_list(rest, line)?;
        return Ok(PsiSpec::Coherent { u });
    }
    Err(Error::Parse { line, msg: format!("unknown psi spec '{text}'") })
}

fn parse_complex(text: &str, line: usize) -> Result<C64> {
    let v: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if let Some(stripped) = v.strip_suffix('i') {
        // forms: bi, a+bi, a-bi
        let body = stripped;
        for (idx, ch) in body.char_indices().skip(1) {
            if (ch == '+' || ch == '-') && !matches!(body.as_bytes()[idx - 1], b'e' | b'E') {
                let re: f64 =
                    body[..idx].parse().map_err(|_| Error::Parse { line, msg: format!("bad complex '{text}'") })?;
                let im_str = &body[idx..];
                let im: f64 = if im_str == "+" || im_str == "-" {
                    format!("{im_str}1").parse().unwrap()
                } else {
                    im_str.parse().map_err(|_| Error::Parse { line, msg: format!("bad complex '{text}'") })?
                };
                return Ok(c(re, im));
            }
        }
        let im: f64 = body.parse().map_err(|_| Error::Parse { line, msg: format!("bad complex '{text}'") })?;
        return Ok(c(0.0, im));
    }
    let re: f64 = v.parse().map_err(|_| Error::Parse { line, msg: format!("bad number '{text}'") })?;
    Ok(cr(re))
}

fn parse_complex_list(text: &str, line: usize) -> Result<Vec<C64>> {
    text.trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .map(|s| parse_complex(s, line))
        .collect()
}

fn parse_f64_list(text: &str, line: usize) -> Result<Vec<f64>> {
    text.trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse { line, msg: e.to_string() }))
        .collect()
}

/// Parse a config file: `key = value` lines under optional `[section]`
/// headers (sections: model, run, tolerances). Unknown keys are hard
/// errors carrying the line number.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let n = lineno + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            section = line[1..line.len() - 1].trim().to_string();
            if !matches!(section.as_str(), "model" | "run" | "tolerances") {
                return Err(Error::Parse { line: n, msg: format!("unknown section [{section}]") });
            }
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or(Error::Parse { line: n, msg: "expected key = value".into() })?;
        let key = key.trim();
        let value = value.trim();
        let fval = |v: &str| -> Result<f64> {
            v.parse::<f64>().map_err(|e| Error::Parse { line: n, msg: e.to_string() })
        };
        match (section.as_str(), key) {
            ("", "kind") => {
                cfg.kind = match value {
                    "validate" => ExperimentKind::Validate,
                    "converge" => ExperimentKind::Converge,
                    "classical" => ExperimentKind::Classical,
                    "bogocheck" => ExperimentKind::Bogocheck,
                    other => return Err(Error::Parse { line: n, msg: format!("unknown kind '{other}'") }),
                }
            }
            ("", "seed") => {
                cfg.seed = value.parse().map_err(|e: std::num::ParseIntError| Error::Parse {
                    line: n,
                    msg: e.to_string(),
                })?
            }
            ("", "out") => cfg.out_dir = Some(value.to_string()),
            ("model", "d") => {
                cfg.model_d = value.parse().map_err(|e: std::num::ParseIntError| Error::Parse {
                    line: n,
                    msg: e.to_string(),
                })?
            }
            ("model", "dk") => cfg.model_dk = fval(value)?,
            ("model", "m0") => cfg.model_m0 = fval(value)?,
            ("model", "g") => {
                parse_profile(value, n)?;
                cfg.model_g = value.to_string();
            }
            ("model", "beta") => cfg.model_beta = parse_f64_list(value, n)?,
            ("model", "jmax") => {
                cfg.model_jmax = value.parse().map_err(|e: std::num::ParseIntError| Error::Parse {
                    line: n,
                    msg: e.to_string(),
                })?
            }
            ("model", "modes") => {
                cfg.modes = value.parse().map_err(|e: std::num::ParseIntError| Error::Parse {
                    line: n,
                    msg: e.to_string(),
                })?
            }
            ("model", "file") => {
                let text = std::fs::read_to_string(value)?;
                let (model, jmax) = parse_model_spec(&text)?;
                cfg.model_d = model.d;
                cfg.model_dk = model.dk;
                cfg.model_m0 = model.m0;
                cfg.model_beta = model.beta.clone();
                cfg.model_jmax = jmax.min(model.degree());
                cfg.model_g = match model.profile {
                    CutoffProfile::Gaussian { width } => format!("gauss({width})"),
                    CutoffProfile::Bump { width } => format!("bump({width})"),
                };
            }
            ("run", "phi0") => {
                cfg.phi0 = parse_complex_list(value, n)?.iter().map(|z| (z.re, z.im)).collect();
            }
            ("run", "psi") => {
                parse_psi(value, n)?;
                cfg.psi = value.to_string();
            }
            ("run", "T") => cfg.t_final = fval(value)?,
            ("run", "N") => {
                cfg.n_list = value
                    .split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::Parse { line: n, msg: e.to_string() })?;
            }
            ("run", "eps") => {
                let mut grid = parse_f64_list(value, n)?;
                grid.sort_by(|a, b| b.partial_cmp(a).unwrap());
                cfg.eps_grid = grid;
            }
            ("run", "flow_tol") => cfg.flow_tol = fval(value)?,
            ("tolerances", "tail_tol") => cfg.tolerances.tail_tol = fval(value)?,
            ("tolerances", "transport_tol") => cfg.tolerances.transport_tol = fval(value)?,
            ("tolerances", "quad_tol") => cfg.tolerances.quad_tol = fval(value)?,
            ("tolerances", "resid_tol") => cfg.tolerances.resid_tol = fval(value)?,
            ("tolerances", "energy_tol") => cfg.tolerances.energy_tol = fval(value)?,
            ("tolerances", "action_tol") => cfg.tolerances.action_tol = fval(value)?,
            ("tolerances", "tol_exact") => cfg.tolerances.tol_exact = fval(value)?,
            ("tolerances", "slope_band") => cfg.tolerances.slope_band = fval(value)?,
            (_, other) => return Err(Error::UnknownKey { key: other.to_string(), line: n }),
        }
    }
    for t in [
        cfg.tolerances.tail_tol,
        cfg.tolerances.transport_tol,
        cfg.tolerances.quad_tol,
        cfg.tolerances.resid_tol,
        cfg.tolerances.energy_tol,
        cfg.tolerances.action_tol,
        cfg.tolerances.tol_exact,
        cfg.tolerances.slope_band,
    ] {
        if t <= 0.0 {
            return Err(Error::Parse { line: 0, msg: "tolerances must be positive".into() });
        }
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Everything an experiment leaves behind.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub suite_reports: Vec<suites::SuiteReport>,
    pub all_passed: bool,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub exit_code: i32,
    pub manifest: Manifest,
    pub convergence: Vec<ConvergenceReport>,
    pub artifacts: Vec<PathBuf>,
}

/// Next free versioned path: `name.ext`, then `name_v2.ext`, ...
fn versioned(dir: &Path, name: &str, ext: &str) -> PathBuf {
    let mut candidate = dir.join(format!("{name}.{ext}"));
    let mut v = 2;
    while candidate.exists() {
        candidate = dir.join(format!("{name}_v{v}.{ext}"));
        v += 1;
    }
    candidate
}

fn classify_error(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::UnknownKey { .. } | Error::InvalidModel(_) | Error::InvalidPotential(_) => 3,
        Error::Shape(_) | Error::SizeCap { .. } => 3,
        _ => 4,
    }
}

/// Run the configured experiment; writes the manifest (and reports) when
/// an output directory is set. Exit codes: 0 all assertions pass,
/// 2 assertion failure, 3 config error, 4 numerical error.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let mut suite_reports = Vec::new();
    let mut convergence = Vec::new();
    match cfg.kind {
        ExperimentKind::Validate => {
            suite_reports.push(suites::wick_oracle_suite(cfg.seed, &cfg.tolerances)?);
            suite_reports.push(suites::ccr_weyl_suite(cfg.seed, &cfg.tolerances)?);
            suite_reports.push(suites::bogoliubov_suite(cfg.seed, &cfg.tolerances)?);
            suite_reports.push(suites::classical_suite(cfg.seed, &cfg.tolerances)?);
            suite_reports.push(suites::pphi2_suite(cfg.seed, &cfg.tolerances)?);
        }
        ExperimentKind::Converge => {
            let model = cfg.build_model()?;
            let (_, series) = restrict_model(&model, cfg.modes)?;
            let reports = convergence_study(
                "configured-model",
                &series,
                &cfg.phi0_complex(),
                &cfg.psi_spec()?,
                cfg.t_final,
                &cfg.n_list,
                &cfg.eps_grid,
                &cfg.tolerances,
                &StudyOptions { flow_tol: cfg.flow_tol, ..Default::default() },
                cfg.seed,
            )?;
            let mut suite = suites::SuiteReport {
                name: "converge".into(),
                seed: cfg.seed,
                checks: Vec::new(),
                runtime_s: reports.iter().map(|r| r.runtime_s).fold(0.0, f64::max),
            };
            for rep in &reports {
                if rep.exact_regime {
                    let worst = rep.samples.iter().map(|s| s.err_norm).fold(0.0, f64::max);
                    suite.checks.push(suites::CheckResult {
                        name: format!("exact-regime-n{}", rep.n_order),
                        passed: worst <= cfg.tolerances.tol_exact,
                        measured: worst,
                        threshold: cfg.tolerances.tol_exact,
                    });
                } else {
                    let target = (rep.n_order as f64 + 1.0) / 2.0;
                    let dev = (rep.slope.unwrap_or(f64::NAN) - target).abs();
                    suite.checks.push(suites::CheckResult {
                        name: format!("slope-n{}", rep.n_order),
                        passed: dev <= cfg.tolerances.slope_band,
                        measured: dev,
                        threshold: cfg.tolerances.slope_band,
                    });
                }
            }
            suite_reports.push(suite);
            convergence = reports;
        }
        ExperimentKind::Classical => {
            let model = cfg.build_model()?;
            let opts = crate::classical::FlowOptions {
                tol: cfg.flow_tol,
                override_lifespan: true,
                samples: 33,
            };
            let traj = integrate_field(&model, &cfg.phi0_complex(), cfg.t_final, &opts)?;
            let h0 = traj.energy[0];
            let drift = traj.energy.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max);
            let circ = delta_circ(&model, &traj)?;
            let dual: f64 = circ
                .iter()
                .zip(&traj.delta)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let mut suite = suites::SuiteReport {
                name: "classical-run".into(),
                seed: cfg.seed,
                checks: Vec::new(),
                runtime_s: 0.0,
            };
            suite.checks.push(suites::CheckResult {
                name: "energy-conservation".into(),
                passed: drift <= cfg.tolerances.energy_tol,
                measured: drift,
                threshold: cfg.tolerances.energy_tol,
            });
            suite.checks.push(suites::CheckResult {
                name: "delta-dual-path".into(),
                passed: dual <= 1e-8,
                measured: dual,
                threshold: 1e-8,
            });
            suite_reports.push(suite);
            if let Some(dir) = &cfg.out_dir {
                let dir = Path::new(dir);
                std::fs::create_dir_all(dir)?;
                let path = versioned(dir, "trajectory", "csv");
                std::fs::write(&path, traj.to_csv())?;
            }
            // tiny-grid cross-check with the tensor machinery
            if cfg.model_d <= 4 {
                let series = build_potential_tensors(&model, cfg.model_jmax)?;
                let _ = series.norm();
            }
        }
        ExperimentKind::Bogocheck => {
            suite_reports.push(suites::bogoliubov_suite(cfg.seed, &cfg.tolerances)?);
        }
    }
    let all_passed = suite_reports.iter().all(|s| s.passed());
    let manifest = Manifest { config: cfg.clone(), suite_reports, all_passed };
    let mut artifacts = Vec::new();
    if let Some(dir) = &cfg.out_dir {
        artifacts = emit_report(&manifest, &convergence, Path::new(dir))?;
    }
    Ok(ExperimentOutcome {
        exit_code: if all_passed { 0 } else { 2 },
        manifest,
        convergence,
        artifacts,
    })
}

/// Serialize the manifest plus any study reports into `dir`: manifest
/// JSON always; per-study CSV/JSON and a human-readable summary when
/// present. Existing files are never overwritten (versioned names).
pub fn emit_report(manifest: &Manifest, reports: &[ConvergenceReport], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    // deterministic manifest: keys ordered, runtimes stripped
    let manifest_value = manifest_json(manifest)?;
    let path = versioned(dir, "manifest", "json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest_value)?)?;
    written.push(path);
    for rep in reports {
        let base = format!("report_{}_n{}", rep.model_id.replace([' ', '/'], "-"), rep.n_order);
        let json_path = versioned(dir, &base, "json");
        std::fs::write(&json_path, serde_json::to_string_pretty(rep)?)?;
        written.push(json_path);
        let csv_path = versioned(dir, &base, "csv");
        let mut csv = String::from("eps,M,tail,err_norm,err_fidelity,runtime_s\n");
        for s in &rep.samples {
            csv.push_str(&format!(
                "{},{},{:.6e},{:.12e},{:.12e},{:.3}\n",
                s.eps, s.m_cut, s.tail, s.err_norm, s.err_fidelity, s.runtime_s
            ));
        }
        std::fs::write(&csv_path, csv)?;
        written.push(csv_path);
    }
    if !reports.is_empty() {
        let path = versioned(dir, "summary", "txt");
        let mut text = String::new();
        text.push_str("order   slope      target   ci95      regime\n");
        for rep in reports {
            let target = (rep.n_order as f64 + 1.0) / 2.0;
            text.push_str(&format!(
                "N={}    {:<9} {:<7}  {:<9} {}\n",
                rep.n_order,
                rep.slope.map_or("-".into(), |s| format!("{s:.4}")),
                format!("{target:.2}"),
                rep.slope_ci95.map_or("-".into(), |s| format!("{s:.4}")),
                if rep.exact_regime { "exact" } else { "asymptotic" },
            ));
        }
        std::fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

/// Manifest as a deterministic JSON value: runtimes are replaced by
/// zeros so identical config + seed produce byte-identical output.
fn manifest_json(manifest: &Manifest) -> Result<serde_json::Value> {
    let mut v = serde_json::to_value(manifest)?;
    if let Some(suites) = v.get_mut("suite_reports").and_then(|s| s.as_array_mut()) {
        for s in suites {
            if let Some(rt) = s.get_mut("runtime_s") {
                *rt = serde_json::json!(0.0);
            }
        }
    }
    // stable key order
    fn sort(v: serde_json::Value) -> serde_json::Value {
        match v {
            serde_json::Value::Object(map) => {
                let sorted: BTreeMap<String, serde_json::Value> =
                    map.into_iter().map(|(k, val)| (k, sort(val))).collect();
                serde_json::to_value(sorted).unwrap()
            }
            serde_json::Value::Array(items) => {
                serde_json::Value::Array(items.into_iter().map(sort).collect())
            }
            other => other,
        }
    }
    Ok(sort(v))
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args(args: &[String]) -> i32 {
    let usage = "usage: hepplab <validate|converge|classical|bogocheck> --config PATH [--out DIR] [--seed N]";
    if args.is_empty() {
        eprintln!("{usage}");
        return 3;
    }
    let kind = match args[0].as_str() {
        "validate" => ExperimentKind::Validate,
        "converge" => ExperimentKind::Converge,
        "classical" => ExperimentKind::Classical,
        "bogocheck" => ExperimentKind::Bogocheck,
        other => {
            eprintln!("unknown subcommand '{other}'\n{usage}");
            return 3;
        }
    };
    let mut config_path: Option<String> = None;
    let mut out_dir: Option<String> = None;
    let mut seed: Option<u64> = None;
    let mut i = 1;
    while i < args.len() {
        match args[i].as_str() {
            "--config" if i + 1 < args.len() => {
                config_path = Some(args[i + 1].clone());
                i += 2;
            }
            "--out" if i + 1 < args.len() => {
                out_dir = Some(args[i + 1].clone());
                i += 2;
            }
            "--seed" if i + 1 < args.len() => {
                seed = match args[i + 1].parse() {
                    Ok(s) => Some(s),
                    Err(e) => {
                        eprintln!("bad seed: {e}");
                        return 3;
                    }
                };
                i += 2;
            }
            other => {
                eprintln!("unknown argument '{other}'\n{usage}");
                return 3;
            }
        }
    }
    let mut cfg = match config_path {
        Some(p) => match load_config(Path::new(&p)) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("config error: {e}");
                return classify_error(&e);
            }
        },
        None => ExperimentConfig::default(),
    };
    cfg.kind = kind;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out_dir {
        cfg.out_dir = Some(o);
    }
    // a manifest is always written somewhere
    if cfg.out_dir.is_none() {
        cfg.out_dir = Some("hepplab-out".into());
    }
    match run_experiment(&cfg) {
        Ok(outcome) => {
            for suite in &outcome.manifest.suite_reports {
                for check in &suite.checks {
                    println!(
                        "[{}] {} {}: measured {:.3e} vs {:.3e}",
                        if check.passed { "PASS" } else { "FAIL" },
                        suite.name,
                        check.name,
                        check.measured,
                        check.threshold
                    );
                }
            }
            for path in &outcome.artifacts {
                println!("wrote {}", path.display());
            }
            outcome.exit_code
        }
        Err(e) => {
            // machine-readable failure record on stderr
            eprintln!("{{\"error\": \"{}\"}}", e.to_string().replace('"', "'"));
            classify_error(&e)
        }
    }
}
