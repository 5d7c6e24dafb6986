use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::damage::{ModelKind, SolverOptions};
use crate::error::{Error, Result};
use crate::likelihood::{Indicator, LikelihoodConfig, PriorSpec};
use crate::sampler::SamplerConfig;

/// Fit configuration. Every field is optional and unknown keys are errors.
///
/// ```toml
/// model = "canadian"
/// data = "data.csv"
/// out_dir = "runs/canadian"
/// mu_s = 31.0              # default: mean failure time of the data
///
/// [sampler]
/// iterations = 10000       # per rung, burn-in included
/// burn_in = 1000
/// rungs = 20
/// ladder_exponent = 5.0
/// proposal_scale = 0.1
/// target_acceptance = 0.25
/// adapt_covariance = true
/// swap_stride = 1
/// seed = 1
/// init_attempts = 200
/// threads = 8              # does not change results
///
/// [likelihood]
/// draws = 10000
/// window = 0.5             # seconds
/// indicator = "bracket"    # or "solve"
/// rel_tol = 1e-12
/// horizon_factor = 1e6
/// max_iterations = 200
///
/// [prior]
/// mu_sd = 100.0
/// ig_shape = 0.001
/// ig_scale = 0.001
/// ```
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_s: Option<f64>,
    pub sampler: SamplerSection,
    pub likelihood: LikelihoodSection,
    pub prior: PriorSpec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub iterations: usize,
    pub burn_in: usize,
    pub rungs: usize,
    pub ladder_exponent: f64,
    pub proposal_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proposal_scales: Option<Vec<f64>>,
    /// Zero disables adaptation.
    pub target_acceptance: f64,
    pub adapt_covariance: bool,
    pub swap_stride: usize,
    pub seed: u64,
    pub init_attempts: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::<f64>::default();
        SamplerSection {
            iterations: d.iterations,
            burn_in: d.burn_in,
            rungs: d.rungs,
            ladder_exponent: d.ladder_exponent,
            proposal_scale: d.proposal_scale,
            proposal_scales: d.proposal_scales,
            target_acceptance: d.target_acceptance.unwrap_or(0.0),
            adapt_covariance: d.adapt_covariance,
            swap_stride: d.swap_stride,
            seed: d.seed,
            init_attempts: d.init_attempts,
            threads: d.threads,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LikelihoodSection {
    pub draws: usize,
    pub window: f64,
    pub indicator: Indicator,
    pub rel_tol: f64,
    pub horizon_factor: f64,
    pub max_iterations: usize,
}

impl Default for LikelihoodSection {
    fn default() -> Self {
        let d = LikelihoodConfig::<f64>::default();
        LikelihoodSection {
            draws: d.draws,
            window: d.window,
            indicator: d.indicator,
            rel_tol: d.solver.rel_tol,
            horizon_factor: d.solver.horizon_factor,
            max_iterations: d.solver.max_iterations,
        }
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.sampler_config()?;
        cfg.likelihood_config()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Canonical TOML of the resolved settings; hashed into run manifests.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn solver(&self) -> SolverOptions<f64> {
        SolverOptions {
            rel_tol: self.likelihood.rel_tol,
            horizon_factor: self.likelihood.horizon_factor,
            max_iterations: self.likelihood.max_iterations,
        }
    }

    pub fn sampler_config(&self) -> Result<SamplerConfig<f64>> {
        let s = &self.sampler;
        let cfg = SamplerConfig {
            iterations: s.iterations,
            burn_in: s.burn_in,
            rungs: s.rungs,
            ladder_exponent: s.ladder_exponent,
            proposal_scale: s.proposal_scale,
            proposal_scales: s.proposal_scales.clone(),
            target_acceptance: (s.target_acceptance > 0.0).then_some(s.target_acceptance),
            adapt_covariance: s.adapt_covariance,
            swap_stride: s.swap_stride,
            seed: s.seed,
            init_attempts: s.init_attempts,
            threads: s.threads,
        };
        cfg.validate().map_err(|e| Error::Config(format!("[sampler] {e}")))?;
        Ok(cfg)
    }

    pub fn likelihood_config(&self) -> Result<LikelihoodConfig<f64>> {
        let l = &self.likelihood;
        let cfg = LikelihoodConfig {
            draws: l.draws,
            window: l.window,
            solver: self.solver(),
            indicator: l.indicator,
        };
        cfg.validate().map_err(|e| Error::Config(format!("[likelihood] {e}")))?;
        if !(l.rel_tol > 0.0 && l.horizon_factor > 0.0 && l.max_iterations > 0) {
            return Err(Error::Config("[likelihood] solver settings must be positive".into()));
        }
        Ok(cfg)
    }
}
