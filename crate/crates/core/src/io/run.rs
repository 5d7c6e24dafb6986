//! Fit orchestration and the run directory layout:
//!
//! ```text
//! <dir>/manifest.json     seed, digests, timings
//! <dir>/config.toml       resolved configuration
//! <dir>/data.csv          the fitted dataset
//! <dir>/summary.json      evidence, quantiles, diagnostics
//! <dir>/samples/rung_NN.csv
//! ```

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ConfigFile;
use super::data::{load_dataset, write_dataset_file};
use super::manifest::RunManifest;
use crate::damage::ModelKind;
use crate::error::{Error, Result};
use crate::likelihood::{Dataset, HierarchicalTarget};
use crate::sampler::{
    estimate_log_marginal, run_parallel_tempering_with, summarize_posterior, EvidenceEstimate, ParamSummary,
    PosteriorSamples, Progress, RungTrace,
};

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub model: ModelKind,
    pub config: ConfigFile,
    pub data: Dataset<f64>,
    pub samples: PosteriorSamples<f64>,
    pub evidence: EvidenceEstimate<f64>,
    pub summary: Vec<ParamSummary<f64>>,
    pub wall_clock_s: f64,
}

/// Fits `model` to `data` with the settings of `cfg`.
pub fn fit(
    model: ModelKind,
    data: Dataset<f64>,
    cfg: &ConfigFile,
    progress: impl FnMut(Progress) + Send,
) -> Result<FitOutput> {
    let start = Instant::now();
    let target = HierarchicalTarget::new(model, data, cfg.likelihood_config()?, cfg.prior)?;
    let samples = run_parallel_tempering_with(&target, &cfg.sampler_config()?, progress)?;
    let evidence = estimate_log_marginal(&samples)?;
    let summary = summarize_posterior(&samples)?;
    let mut config = cfg.clone();
    config.model = Some(model);
    config.mu_s = Some(target.data.mu_s);
    Ok(FitOutput {
        model,
        config,
        data: target.data,
        samples,
        evidence,
        summary,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungDiagnostics {
    pub temperature: f64,
    pub acceptance: f64,
    pub solver_failures: usize,
    pub final_log_scale: f64,
    pub mean_log_lik: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: ModelKind,
    pub mu_s: f64,
    pub log_marginal: f64,
    pub log_marginal_std_error: f64,
    pub posterior: Vec<ParamSummary<f64>>,
    pub rungs: Vec<RungDiagnostics>,
    pub swap_rates: Vec<f64>,
    pub iterations: usize,
    pub burn_in: usize,
    pub init_attempts: usize,
}

fn rung_file(dir: &Path, i: usize) -> PathBuf {
    dir.join("samples").join(format!("rung_{i:02}.csv"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the run directory; `args` are recorded in the manifest.
pub fn write_run(dir: &Path, out: &FitOutput, args: &[String]) -> Result<RunManifest> {
    std::fs::create_dir_all(dir.join("samples")).map_err(|e| Error::io(dir, e))?;
    let config_text = out.config.to_toml();
    write_text(&dir.join("config.toml"), &config_text)?;
    let data_path = dir.join("data.csv");
    write_dataset_file(&data_path, &out.data)?;

    for (i, rung) in out.samples.rungs.iter().enumerate() {
        let path = rung_file(dir, i);
        let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(f));
        let mut header = vec!["iteration".to_string(), "log_lik".to_string()];
        header.extend(out.samples.names.iter().cloned());
        w.write_record(&header)?;
        for (j, (row, ll)) in rung.theta.iter().zip(&rung.log_lik).enumerate() {
            let mut rec = vec![(out.samples.burn_in + j + 1).to_string(), ll.to_string()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }

    let summary = RunSummary {
        model: out.model,
        mu_s: out.data.mu_s,
        log_marginal: out.evidence.log_marginal,
        log_marginal_std_error: out.evidence.std_error,
        posterior: out.summary.clone(),
        rungs: out
            .samples
            .rungs
            .iter()
            .zip(&out.evidence.rung_means)
            .map(|(r, &m)| RungDiagnostics {
                temperature: r.temperature,
                acceptance: r.acceptance,
                solver_failures: r.solver_failures,
                final_log_scale: r.final_log_scale,
                mean_log_lik: m,
            })
            .collect(),
        swap_rates: out.samples.swap_rates.clone(),
        iterations: out.samples.iterations,
        burn_in: out.samples.burn_in,
        init_attempts: out.samples.init_attempts,
    };
    write_text(&dir.join("summary.json"), &(serde_json::to_string_pretty(&summary)? + "\n"))?;

    let mut m = RunManifest::new("fit", args);
    m.model = Some(out.model.to_string());
    m.seed = Some(out.config.sampler.seed);
    m.config_digest = Some(super::manifest::sha256_hex(config_text.as_bytes()));
    m.dataset_digest = Some(super::manifest::sha256_file(&data_path)?);
    m.iterations = Some(out.samples.iterations);
    m.burn_in = Some(out.samples.burn_in);
    m.rungs = Some(out.samples.rungs.len());
    m.wall_clock_s = out.wall_clock_s;
    m.add_output(&dir.join("config.toml"))?;
    m.add_output(&data_path)?;
    m.add_output(&dir.join("summary.json"))?;
    for i in 0..out.samples.rungs.len() {
        m.add_output(&rung_file(dir, i))?;
    }
    m.write(&dir.join("manifest.json"))?;
    Ok(m)
}

/// A run directory read back from disk.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub manifest: RunManifest,
    pub config: ConfigFile,
    pub summary: RunSummary,
    pub data: Dataset<f64>,
    pub samples: PosteriorSamples<f64>,
}

impl RunDir {
    pub fn model(&self) -> ModelKind {
        self.summary.model
    }
}

pub fn read_run(dir: &Path) -> Result<RunDir> {
    let manifest = RunManifest::read(&dir.join("manifest.json"))?;
    let config = ConfigFile::load(&dir.join("config.toml"))?;
    let summary_path = dir.join("summary.json");
    let text = std::fs::read_to_string(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
    let summary: RunSummary = serde_json::from_str(&text)?;
    let data = load_dataset(&dir.join("data.csv"), Some(summary.mu_s))?;

    let mut names = Vec::new();
    let mut rungs = Vec::with_capacity(summary.rungs.len());
    for (i, diag) in summary.rungs.iter().enumerate() {
        let path = rung_file(dir, i);
        let source = path.display().to_string();
        let mut rdr = csv::Reader::from_path(&path).map_err(|e| Error::Parse {
            path: source.clone(),
            line: 0,
            message: e.to_string(),
        })?;
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.len() < 3 || header[0] != "iteration" || header[1] != "log_lik" {
            return Err(Error::Parse {
                path: source,
                line: 1,
                message: "expected `iteration,log_lik,<parameters>`".into(),
            });
        }
        names = header[2..].to_vec();
        let mut theta = Vec::new();
        let mut log_lik = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let nums = rec
                .iter()
                .skip(1)
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Parse {
                    path: source.clone(),
                    line,
                    message: e.to_string(),
                })?;
            log_lik.push(nums[0]);
            theta.push(nums[1..].to_vec());
        }
        rungs.push(RungTrace {
            temperature: diag.temperature,
            theta,
            log_lik,
            acceptance: diag.acceptance,
            solver_failures: diag.solver_failures,
            final_log_scale: diag.final_log_scale,
        });
    }
    let samples = PosteriorSamples {
        names,
        ladder: summary.rungs.iter().map(|r| r.temperature).collect(),
        iterations: summary.iterations,
        burn_in: summary.burn_in,
        rungs,
        swap_rates: summary.swap_rates.clone(),
        init_attempts: summary.init_attempts,
    };
    Ok(RunDir {
        manifest,
        config,
        summary,
        data,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::simulate::{simulate_dataset, RateSpec};
    use crate::likelihood::{ModelParams, UsParams};
    use crate::sampler::estimate_log_marginal;

    #[test]
    fn run_directory_round_trip() {
        let p = ModelParams::Us(UsParams {
            mu_a: 0.68,
            sigma_a: 0.1,
            mu_b: 1.15,
            sigma_b: 0.036,
        });
        let sim = simulate_dataset(&p, 12, &RateSpec::Constant { value: 0.2 }, 31.0, 5, &Default::default()).unwrap();
        let cfg = ConfigFile::parse(
            "[sampler]\niterations = 60\nburn_in = 20\nrungs = 3\n[likelihood]\ndraws = 200\nwindow = 2.0\n",
        )
        .unwrap();
        let out = fit(ModelKind::Us, sim.data, &cfg, |_| {}).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_run(dir.path(), &out, &[]).unwrap();
        let back = read_run(dir.path()).unwrap();
        assert_eq!(back.samples, out.samples);
        assert_eq!(back.data, out.data);
        assert_eq!(back.model(), ModelKind::Us);
        assert_eq!(estimate_log_marginal(&back.samples).unwrap(), out.evidence);
        assert_eq!(back.summary.posterior, out.summary);
    }
}
