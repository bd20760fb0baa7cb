//! Flat run configuration and the small string grammar for laws and rules.

use crate::CliError;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use tailrisk::divergences::PhiSpec;
use tailrisk::evt::{IntermediateLevel, RegimeChoice};
use tailrisk::harness::{MethodKind, MethodSpec};
use tailrisk::robust_eval::{EvtPhiConfig, SolverConfig};
use tailrisk::tail_models::TailLawSpec;

/// One key per setting; every key is optional and falls back to the documented default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,

    // data
    pub law: Option<String>,
    pub data: Option<PathBuf>,
    pub format: Option<String>,
    /// Treat file values as returns and negate them into losses.
    pub negate: Option<bool>,
    pub n: Option<usize>,

    // evaluation
    pub betas: Option<Vec<f64>>,
    pub methods: Option<Vec<String>>,
    pub phi: Option<String>,
    pub delta: Option<f64>,
    pub beta0: Option<String>,
    pub regime: Option<String>,
    pub m_bound: Option<f64>,
    pub alpha: Option<f64>,
    pub diag_k: Option<usize>,
    pub kappa1: Option<f64>,
    pub tail_samples: Option<usize>,
    pub stderr_batches: Option<usize>,
    pub wasserstein_p: Option<f64>,

    // replication
    pub reps: Option<usize>,
    pub truth_draws: Option<usize>,

    // sweep
    pub deltas: Option<Vec<f64>>,
    pub thetas: Option<Vec<f64>>,

    // rolling windows
    pub window: Option<usize>,
    pub stride: Option<usize>,
    pub windows: Option<usize>,

    // network
    pub assets: Option<usize>,
    pub firms: Option<usize>,
    pub lambda: Option<f64>,
    pub norm: Option<String>,
    pub normalize: Option<bool>,
    pub clamp: Option<bool>,
    pub marginal: Option<String>,
    pub copula_nu: Option<f64>,

    // hedging
    pub s0: Option<f64>,
    pub strike: Option<f64>,
    pub mu: Option<f64>,
    pub sigma2: Option<f64>,
    pub rate: Option<f64>,
    pub k1: Option<f64>,
    pub m_grid: Option<Vec<usize>>,
    pub truth_paths: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Fails for seeds above `i64::MAX`, which TOML integers cannot hold.
    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn out(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn betas(&self) -> Result<Vec<f64>, CliError> {
        let b = self.betas.clone().unwrap_or_else(|| vec![0.01]);
        if b.is_empty() {
            return Err(CliError::Config("betas must be nonempty".into()));
        }
        Ok(b)
    }

    pub fn phi(&self) -> Result<PhiSpec, CliError> {
        parse_phi(self.phi.as_deref().unwrap_or("expshifted"))
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(0.1)
    }

    pub fn level(&self) -> Result<IntermediateLevel, CliError> {
        parse_level(self.beta0.as_deref().unwrap_or("capped(0.1,0.5)"))
    }

    pub fn regime_choice(&self) -> Result<RegimeChoice, CliError> {
        match self.regime.as_deref().unwrap_or("diagnose") {
            "diagnose" => Ok(RegimeChoice::Diagnose {
                m_bound: self.m_bound()?,
                alpha: self.alpha.unwrap_or(0.05),
                k: self.diag_k,
            }),
            "heavy" => Ok(RegimeChoice::Heavy),
            "light" => Ok(RegimeChoice::Light),
            other => Err(CliError::Config(format!("regime must be diagnose, heavy or light, got {other:?}"))),
        }
    }

    /// Upper bound on γ used by the regime test; dataset specific, so it has no default.
    pub fn m_bound(&self) -> Result<f64, CliError> {
        self.m_bound
            .ok_or_else(|| CliError::Config("m_bound is required when the tail regime is diagnosed".into()))
    }

    pub fn evt_config(&self, phi: PhiSpec) -> Result<EvtPhiConfig, CliError> {
        let mut c = EvtPhiConfig::rpev(self.delta(), self.level()?, self.regime_choice()?);
        c.phi = phi;
        if let Some(k) = self.kappa1 {
            c.kappa1 = k;
        }
        c.tail_samples = self.tail_samples.unwrap_or(10_000);
        c.stderr_batches = self.stderr_batches.unwrap_or(0);
        Ok(c)
    }

    /// Method list; names are rpev, chi2, gauss, wasserstein, saa.
    pub fn methods(&self) -> Result<Vec<MethodSpec>, CliError> {
        let names = self
            .methods
            .clone()
            .unwrap_or_else(|| vec!["rpev".into(), "chi2".into(), "gauss".into()]);
        if names.is_empty() {
            return Err(CliError::Config("methods must be nonempty".into()));
        }
        names
            .iter()
            .map(|name| {
                let kind = match name.as_str() {
                    "rpev" => MethodKind::EvtPhi(self.evt_config(PhiSpec::ExpShifted)?),
                    "chi2" => MethodKind::EvtPhi(self.evt_config(PhiSpec::ChiSquare)?),
                    "gauss" => MethodKind::GaussianPhi {
                        phi: PhiSpec::ChiSquare,
                        delta: self.delta(),
                        solver: SolverConfig::default(),
                    },
                    "wasserstein" => MethodKind::Wasserstein { p: self.wasserstein_p.unwrap_or(1.0), delta: self.delta() },
                    "saa" => MethodKind::Saa,
                    other => return Err(CliError::Config(format!("unknown method {other:?}"))),
                };
                Ok(MethodSpec::new(name.clone(), kind))
            })
            .collect()
    }

    pub fn law(&self) -> Result<Option<TailLawSpec>, CliError> {
        self.law.as_deref().map(parse_law).transpose()
    }

    pub fn norm(&self) -> Result<f64, CliError> {
        match self.norm.as_deref().unwrap_or("1") {
            "inf" => Ok(f64::INFINITY),
            s => s.parse().map_err(|_| CliError::Config(format!("norm must be a number ≥ 1 or \"inf\", got {s:?}"))),
        }
    }
}

/// Split `name(a,b,...)` into the name and its numeric arguments.
fn call(text: &str) -> Result<(String, Vec<f64>), CliError> {
    let bad = || CliError::Config(format!("cannot parse {text:?}"));
    let s = text.trim();
    let Some(open) = s.find('(') else {
        return Ok((s.to_ascii_lowercase(), Vec::new()));
    };
    let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
    let args = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    Ok((s[..open].trim().to_ascii_lowercase(), args))
}

fn arity(name: &str, args: &[f64], want: usize) -> Result<(), CliError> {
    if args.len() == want {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} takes {want} arguments, got {}", args.len())))
    }
}

/// Laws: gpd(γ,σ) with tail index γ, weibull(c,q), exponential, survival(k,a,b), hazard(q,r),
/// lognormal, normal(μ,σ).
pub fn parse_law(text: &str) -> Result<TailLawSpec, CliError> {
    let (name, a) = call(text)?;
    let law = match name.as_str() {
        "gpd" => {
            arity(&name, &a, 2)?;
            TailLawSpec::GeneralizedPareto { alpha: 1.0 / a[0], sigma: a[1] }
        }
        "weibull" => {
            arity(&name, &a, 2)?;
            TailLawSpec::Weibull { c: a[0], q: a[1] }
        }
        "exponential" => {
            arity(&name, &a, 0)?;
            TailLawSpec::exponential()
        }
        "survival" => {
            arity(&name, &a, 3)?;
            TailLawSpec::SurvivalFormula { k: a[0], a: a[1], b: a[2] }
        }
        "hazard" => {
            arity(&name, &a, 2)?;
            TailLawSpec::HazardFormula { q: a[0], r: a[1] }
        }
        "lognormal" => {
            arity(&name, &a, 0)?;
            TailLawSpec::LognormalStd
        }
        "normal" => {
            arity(&name, &a, 2)?;
            TailLawSpec::Normal { mean: a[0], sd: a[1] }
        }
        _ => return Err(CliError::Config(format!("unknown law {text:?}"))),
    };
    law.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(law)
}

/// φ families: chi2, kl, expshifted, cressie(p).
pub fn parse_phi(text: &str) -> Result<PhiSpec, CliError> {
    let (name, a) = call(text)?;
    let phi = match name.as_str() {
        "chi2" | "chisquare" => PhiSpec::ChiSquare,
        "kl" => PhiSpec::KL,
        "expshifted" | "exp" => PhiSpec::ExpShifted,
        "cressie" => {
            arity(&name, &a, 1)?;
            PhiSpec::CressieRead { p: a[0] }
        }
        _ => return Err(CliError::Config(format!("unknown φ family {text:?}"))),
    };
    phi.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(phi)
}

/// β₀ rules: npower(θ), capped(cap,exponent), fixed(β₀).
pub fn parse_level(text: &str) -> Result<IntermediateLevel, CliError> {
    let (name, a) = call(text)?;
    match name.as_str() {
        "npower" => {
            arity(&name, &a, 1)?;
            Ok(IntermediateLevel::NPower { theta: a[0] })
        }
        "capped" => {
            arity(&name, &a, 2)?;
            Ok(IntermediateLevel::Capped { cap: a[0], exponent: a[1] })
        }
        "fixed" => {
            arity(&name, &a, 1)?;
            Ok(IntermediateLevel::Fixed { beta0: a[0] })
        }
        _ => Err(CliError::Config(format!("unknown β₀ rule {text:?}"))),
    }
}
