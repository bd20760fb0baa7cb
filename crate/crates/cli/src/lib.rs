//! Command implementations behind the `tailrisk` binary.

pub mod config;
pub mod ingest;
pub mod output;

pub use config::RunConfig;

use ingest::{ingest_losses, Format, IngestOptions, Ingested};
use output::{write_results, write_summary, Row};
use serde_json::{json, Value};
use tailrisk::evt::{calibrate, regime_test, EmpiricalSample, LightTailParams, DEFAULT_KAPPA1};
use tailrisk::harness::{
    hedging_frequency_study, run_parameter_sweep, run_replication_study, run_rolling_windows, CellRecord,
    DataSource, HedgeConfig, StudyConfig, WindowPlan,
};
use tailrisk::network::{interpolated_exposure, FactorLawSpec, Matrix, NetworkModel};
use tailrisk::nominal::build_nominal;
use tailrisk::rng::{label, StreamKey};
use tailrisk::robust_eval::{evt_phi_cvar, inflation_diagnostic, Ambiguity};
use tailrisk::tail_models::TailRegime;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no data")]
    EmptyData,
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] tailrisk::Error),
}

impl CliError {
    /// 1 for configuration and input problems.
    pub fn exit_code(&self) -> i32 {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// EVT calibration report and nominal CVaR
    Estimate,
    /// One worst-case CVaR evaluation per β
    RobustCvar,
    /// Tail-regime test and inflation rates
    Diagnose,
    /// Replication study with coverage
    Replicate,
    /// RPEV over a (δ, θ) grid
    Sweep,
    /// Rolling windows over time-ordered data
    Windows,
    /// Replication study on network contagion losses
    Network,
    /// Rebalancing-frequency study for a discrete delta hedge
    Hedge,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Estimate => "estimate",
            Command::RobustCvar => "robust-cvar",
            Command::Diagnose => "diagnose",
            Command::Replicate => "replicate",
            Command::Sweep => "sweep",
            Command::Windows => "windows",
            Command::Network => "network",
            Command::Hedge => "hedge",
        }
    }
}

pub struct Outcome {
    pub rows: Vec<Row>,
    pub summary: Value,
}

impl Outcome {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.status != "ok" && r.status != "infinite").count()
    }
}

fn rows_from(records: &[CellRecord]) -> Vec<Row> {
    records
        .iter()
        .map(|r| Row {
            method: r.method.clone(),
            beta: r.beta,
            rep: r.rep,
            value: r.value,
            status: r.status.tag(),
        })
        .collect()
}

fn cell(method: &str, beta: f64, rep: usize, out: Result<f64, tailrisk::Error>) -> Row {
    match out {
        Ok(v) if v.is_infinite() => Row { method: method.into(), beta, rep, value: Some(v), status: "infinite".into() },
        Ok(v) => Row { method: method.into(), beta, rep, value: Some(v), status: "ok".into() },
        Err(e) => Row { method: method.into(), beta, rep, value: None, status: format!("error: {e}") },
    }
}

fn regime_name(r: &TailRegime) -> &'static str {
    match r {
        TailRegime::Frechet { .. } => "Frechet",
        TailRegime::Gumbel { .. } => "Gumbel",
    }
}

fn network_model(cfg: &RunConfig, default_clamp: bool) -> Result<NetworkModel, CliError> {
    let d = cfg.assets.unwrap_or(48);
    let k = cfg.firms.unwrap_or(24);
    let a = interpolated_exposure(d, k, cfg.lambda.unwrap_or(0.0))?;
    Ok(NetworkModel::direct(
        a,
        cfg.norm()?,
        cfg.normalize.unwrap_or(true),
        cfg.clamp.unwrap_or(default_clamp),
    )?)
}

/// Losses in file order (or draw order for a synthetic law).
pub fn load_losses(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    if let Some(path) = &cfg.data {
        let format = Format::parse(cfg.format.as_deref().unwrap_or("plain"))?;
        let negate = cfg.negate.unwrap_or(format == Format::FamaFrench);
        return match ingest_losses(path, format, IngestOptions { negate })? {
            Ingested::Losses(v) => Ok(v),
            Ingested::Factors { rows, .. } => {
                let model = network_model(cfg, true)?;
                Ok(rows.iter().map(|z| model.loss(z)).collect::<Result<_, _>>()?)
            }
        };
    }
    let law = cfg.law()?.ok_or_else(|| CliError::Config("set either data or law".into()))?;
    let n = cfg.n.unwrap_or(500);
    let mut rng = StreamKey::root(cfg.seed()).child(label("data")).rng();
    Ok(law.sample(n, &mut rng)?)
}

fn load_sample(cfg: &RunConfig) -> Result<EmpiricalSample, CliError> {
    Ok(EmpiricalSample::new(load_losses(cfg)?)?)
}

fn study_config(cfg: &RunConfig, betas: Vec<f64>) -> StudyConfig {
    StudyConfig {
        betas,
        n: cfg.n.unwrap_or(500),
        reps: cfg.reps.unwrap_or(100),
        seed: cfg.seed(),
        truth_draws: cfg.truth_draws.unwrap_or(5_000_000),
    }
}

fn summary(command: Command, cfg: &RunConfig, body: Value) -> Value {
    json!({
        "command": command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed(),
        "config": cfg,
        "result": body,
    })
}

/// Run a command without touching the filesystem (apart from reading inputs).
pub fn execute(command: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let betas = cfg.betas()?;
    let (rows, body) = match command {
        Command::Estimate => {
            let sample = load_sample(cfg)?;
            let (choice, level) = (cfg.regime_choice()?, cfg.level()?);
            let kappa1 = cfg.kappa1.unwrap_or(DEFAULT_KAPPA1);
            let mut rows = Vec::new();
            let mut reports = Vec::new();
            for &beta in &betas {
                let out = level
                    .resolve(sample.n(), beta)
                    .and_then(|b0| calibrate(&sample, b0, choice, kappa1))
                    .and_then(|cal| {
                        let cvar = build_nominal(&cal, &sample)?.cvar(beta)?;
                        Ok((cal, cvar))
                    });
                match out {
                    Ok((cal, cvar)) => {
                        rows.push(cell("nominal", beta, 0, Ok(cvar)));
                        reports.push(json!({
                            "beta": beta, "nominal_cvar": cvar, "regime": regime_name(&cal.regime),
                            "calibration": cal,
                        }));
                    }
                    Err(e) => rows.push(cell("nominal", beta, 0, Err(e))),
                }
            }
            (rows, json!({ "n": sample.n(), "levels": reports }))
        }
        Command::RobustCvar => {
            let sample = load_sample(cfg)?;
            let phi = cfg.phi()?;
            let mut ecfg = cfg.evt_config(phi)?;
            ecfg.stderr_batches = cfg.stderr_batches.unwrap_or(10);
            let key = StreamKey::root(cfg.seed()).child(label("tail"));
            let mut rows = Vec::new();
            let mut reports = Vec::new();
            for (i, &beta) in betas.iter().enumerate() {
                match evt_phi_cvar(&sample, beta, &ecfg, key.child(i as u64)) {
                    Ok((r, model)) => {
                        rows.push(cell("robust", beta, 0, Ok(r.value)));
                        reports.push(json!({
                            "beta": beta, "value": r.value, "stderr": r.stderr, "status": format!("{:?}", r.status),
                            "nominal_cvar": model.cvar(beta).ok(), "regime": regime_name(&model.regime),
                            "gamma": model.regime.gamma(), "optimizer": r.optimizer,
                        }));
                    }
                    Err(e) => rows.push(cell("robust", beta, 0, Err(e))),
                }
            }
            (rows, json!({ "n": sample.n(), "phi": phi, "levels": reports }))
        }
        Command::Diagnose => {
            let sample = load_sample(cfg)?;
            let n = sample.n();
            let k = cfg.diag_k.unwrap_or((n as f64).sqrt().floor() as usize);
            let light = LightTailParams {
                beta0: cfg.level()?.resolve(n, betas[0])?,
                kappa1: cfg.kappa1.unwrap_or(DEFAULT_KAPPA1),
            };
            let d = regime_test(&sample, k, cfg.m_bound()?, cfg.alpha.unwrap_or(0.05), light)?;
            let phi = cfg.phi()?;
            let delta = cfg.delta();
            let p = cfg.wasserstein_p.unwrap_or(1.0);
            let phi_rate = inflation_diagnostic(d.regime, Ambiguity::PhiBall { phi, delta }).map_err(|e| e.to_string());
            let w_rate = inflation_diagnostic(d.regime, Ambiguity::Wasserstein { p, delta }).map_err(|e| e.to_string());
            let rows = vec![
                cell("hill_gamma", betas[0], 0, Ok(d.hill_gamma)),
                cell("regime_gamma", betas[0], 0, Ok(d.regime.gamma())),
            ];
            let body = json!({
                "n": n, "k": d.k, "hill_gamma": d.hill_gamma, "threshold": d.threshold, "reject": d.reject,
                "regime": regime_name(&d.regime), "gamma": d.regime.gamma(),
                "inflation": { "phi": phi_rate, "wasserstein": w_rate },
            });
            (rows, body)
        }
        Command::Replicate | Command::Network => {
            let source = if command == Command::Network {
                let d = cfg.assets.unwrap_or(48);
                let marginal = config::parse_law(cfg.marginal.as_deref().unwrap_or("gpd(3,1)"))?;
                let nu = cfg.copula_nu.unwrap_or(4.0);
                let factors = FactorLawSpec::student_t(vec![marginal; d], nu, Matrix::identity(d, d))?;
                DataSource::Network { factors, model: network_model(cfg, false)? }
            } else {
                DataSource::Law(cfg.law()?.ok_or_else(|| CliError::Config("replicate needs a law".into()))?)
            };
            let study = run_replication_study(&source, &cfg.methods()?, &study_config(cfg, betas))?;
            (rows_from(&study.records), json!({ "truth": study.truth, "summaries": study.summaries }))
        }
        Command::Sweep => {
            let law = cfg.law()?.ok_or_else(|| CliError::Config("sweep needs a law".into()))?;
            let deltas = cfg.deltas.clone().unwrap_or_else(|| vec![0.01, 0.05, 0.1]);
            let thetas = cfg.thetas.clone().unwrap_or_else(|| vec![0.3, 0.5, 0.7]);
            let base = cfg.evt_config(cfg.phi()?)?;
            let beta = betas[0];
            let res = run_parameter_sweep(
                &DataSource::Law(law),
                &deltas,
                &thetas,
                beta,
                &base,
                &study_config(cfg, vec![beta]),
            )?;
            (rows_from(&res.records), json!({ "cells": res.cells }))
        }
        Command::Windows => {
            let data = load_losses(cfg)?;
            let plan = WindowPlan {
                len: data.len(),
                n: cfg.window.unwrap_or(200),
                stride: cfg.stride.unwrap_or(60),
                reps: cfg.windows.unwrap_or(30),
                grid: betas,
            };
            let res = run_rolling_windows(&data, &plan, &cfg.methods()?, cfg.seed())?;
            let mut rows: Vec<Row> = res.benchmark.iter().map(|(b, v)| cell("benchmark", *b, 0, Ok(*v))).collect();
            rows.extend(rows_from(&res.records));
            let body = json!({
                "benchmark": res.benchmark,
                "diagnostics": res.diagnostics,
                "note": "window quartiles are a stability diagnostic; windows overlap and are not independent",
            });
            (rows, body)
        }
        Command::Hedge => {
            let template = HedgeConfig {
                s0: cfg.s0.unwrap_or(25.0),
                strike: cfg.strike.unwrap_or(25.0),
                mu: cfg.mu.unwrap_or(0.1),
                sigma2: cfg.sigma2.unwrap_or(0.075),
                rate: cfg.rate.unwrap_or(0.1),
                k1: cfg.k1.unwrap_or(0.0025),
                m: 1,
            };
            let grid = cfg.m_grid.clone().unwrap_or_else(|| vec![40, 80, 160, 320, 640]);
            let beta = betas[0];
            let study = hedging_frequency_study(
                &template,
                &grid,
                beta,
                cfg.n.unwrap_or(200),
                cfg.truth_paths.unwrap_or(1_000_000),
                &cfg.methods()?,
                cfg.seed(),
            )?;
            let mut rows: Vec<Row> =
                grid.iter().zip(&study.truth).map(|(m, t)| cell("truth", beta, *m, Ok(*t))).collect();
            rows.extend(rows_from(&study.records));
            let u = study.truth_is_u_shaped();
            (rows, json!({ "study": study, "truth_u_shaped": u }))
        }
    };
    Ok(Outcome { rows, summary: summary(command, cfg, body) })
}

/// Execute and write results.csv and summary.json; returns the process exit code.
pub fn run(command: Command, cfg: &RunConfig) -> Result<i32, CliError> {
    let outcome = execute(command, cfg)?;
    let dir = cfg.out();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    write_results(&dir, &outcome.rows)?;
    write_summary(&dir, &outcome.summary)?;
    Ok(if outcome.failures() > 0 { 2 } else { 0 })
}
