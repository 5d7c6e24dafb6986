use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::damage::{failure_time, FailureOutcome, ModelKind, RampContext, SolverOptions};
use crate::error::{Error, Result};
use crate::likelihood::{param_names, sample_effects, Dataset, ModelParams, Specimen};
use crate::rng::{tag, StreamKey};
use crate::scalar::Real;

/// How loading rates are assigned to simulated specimens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RateSpec {
    Constant { value: f64 },
    /// `k = median · exp(sigma · Z)`.
    LogNormal { median: f64, sigma: f64 },
}

impl RateSpec {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            RateSpec::Constant { value } => value > 0.0 && value.is_finite(),
            RateSpec::LogNormal { median, sigma } => median > 0.0 && median.is_finite() && sigma >= 0.0 && sigma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid loading-rate law {self:?}")))
        }
    }

    pub fn typical(&self) -> f64 {
        match *self {
            RateSpec::Constant { value } => value,
            RateSpec::LogNormal { median, .. } => median,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation<F> {
    pub data: Dataset<F>,
    /// Non-failing draws that were redrawn.
    pub redrawn: usize,
}

/// Redraws allowed per specimen before the simulation gives up.
pub const SIMULATION_BUDGET: usize = 1000;

/// `n` failure times from the hierarchical model with known parameters.
///
/// Specimen `i` draws its loading rate and effects from its own substream
/// of `seed`. Non-failing draws are redrawn and counted. The dataset's
/// reference time is `mu_s`.
pub fn simulate_dataset<F: Real>(
    params: &ModelParams<F>,
    n: usize,
    rate: &RateSpec,
    mu_s: F,
    seed: u64,
    solver: &SolverOptions<F>,
) -> Result<Simulation<F>> {
    params.validate()?;
    rate.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let model = params.model();
    let root = StreamKey::root(seed).child(tag::SIMULATE);
    let mut records = Vec::with_capacity(n);
    let mut redrawn = 0;
    for i in 0..n {
        let key = root.child(i as u64);
        let k = match *rate {
            RateSpec::Constant { value } => F::lit(value),
            RateSpec::LogNormal { median, sigma } => {
                F::lit(median) * (F::lit(sigma) * F::std_normal(&mut key.child(0).rng())).exp()
            }
        };
        let ctx = RampContext::new(k, mu_s)?;
        let mut rng = key.child(1).rng();
        let mut time = None;
        for _ in 0..SIMULATION_BUDGET {
            let e = sample_effects(params, &mut rng);
            match failure_time(model, &e, &ctx, solver) {
                Ok(FailureOutcome::FailsAt(t)) => {
                    time = Some(t);
                    break;
                }
                Ok(FailureOutcome::NonFailing) | Err(Error::InvalidEffect(_)) => redrawn += 1,
                Err(e) => return Err(e),
            }
        }
        let Some(time) = time else {
            return Err(Error::BudgetExhausted {
                requested: n,
                accepted: records.len(),
                attempts: redrawn,
            });
        };
        records.push(Specimen {
            id: format!("S{:03}", i + 1),
            time,
            rate: k,
        });
    }
    Ok(Simulation {
        data: Dataset::new(records, Some(mu_s))?,
        redrawn,
    })
}

/// Generating parameters for `adm simulate`, as TOML:
///
/// ```toml
/// model = "us"            # optional when given on the command line
/// mu_s = 31.0
///
/// [params]
/// mu_A = 0.68
/// sigma_A = 0.1
/// mu_B = 1.15
/// sigma_B = 0.036
///
/// [rate]
/// kind = "lognormal"      # or kind = "constant", value = 0.2
/// median = 0.2
/// sigma = 0.25
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    #[serde(default)]
    pub model: Option<ModelKind>,
    pub mu_s: f64,
    pub params: BTreeMap<String, f64>,
    pub rate: RateSpec,
}

impl ParamsFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parameters for `model`; every name in [`param_names`] must appear,
    /// and nothing else.
    pub fn model_params(&self, model: ModelKind) -> Result<ModelParams<f64>> {
        let names = param_names(model);
        if let Some(extra) = self.params.keys().find(|k| !names.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown parameter `{extra}` for the {model} model")));
        }
        let values = names
            .iter()
            .map(|n| {
                self.params
                    .get(*n)
                    .copied()
                    .ok_or_else(|| Error::Config(format!("missing parameter `{n}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let p = ModelParams::from_slice(model, &values)?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_params(params: &ModelParams<f64>, mu_s: f64, rate: RateSpec) -> Self {
        ParamsFile {
            model: Some(params.model()),
            mu_s,
            params: param_names(params.model())
                .iter()
                .map(|n| n.to_string())
                .zip(params.to_vec())
                .collect(),
            rate,
        }
    }
}

pub fn load_params_file(path: &Path) -> Result<ParamsFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ParamsFile::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damage::{us_failure_time, UsEffects};
    use crate::likelihood::UsParams;
    use crate::stats;

    fn us(sigma: f64) -> ModelParams<f64> {
        ModelParams::Us(UsParams {
            mu_a: 0.5,
            sigma_a: sigma,
            mu_b: 0.2,
            sigma_b: sigma,
        })
    }

    #[test]
    fn zero_spread_gives_identical_times() {
        let rate = RateSpec::LogNormal { median: 0.2, sigma: 0.25 };
        let s = simulate_dataset(&us(0.0), 20, &rate, 31.0, 1, &SolverOptions::default()).unwrap();
        let t0 = s.data.records[0].time;
        assert!(s.data.records.iter().all(|r| r.time == t0));
        assert!(s.data.records.iter().any(|r| r.rate != s.data.records[0].rate));
        assert_eq!(s.redrawn, 0);
    }

    #[test]
    fn same_seed_same_data() {
        let rate = RateSpec::Constant { value: 0.2 };
        let a = simulate_dataset(&us(0.1), 30, &rate, 31.0, 9, &SolverOptions::default()).unwrap();
        let b = simulate_dataset(&us(0.1), 30, &rate, 31.0, 9, &SolverOptions::default()).unwrap();
        let c = simulate_dataset(&us(0.1), 30, &rate, 31.0, 10, &SolverOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn centered_parameters_give_mean_near_31() {
        // Choose μ_A so the deterministic solve is exactly 31 s.
        let (mu_b, sig_a, sig_b) = (1.15_f64, 0.1, 0.036);
        let b = mu_b.exp();
        let base = us_failure_time(&UsEffects { a: 1.0, b }, 31.0).unwrap().time().unwrap();
        let mu_a = (1.0 + (31.0 / base).ln()).ln();
        let det = us_failure_time(&UsEffects { a: mu_a.exp(), b }, 31.0).unwrap().time().unwrap();
        assert!((det - 31.0).abs() < 1e-9);
        let p = ModelParams::Us(UsParams {
            mu_a,
            sigma_a: sig_a,
            mu_b,
            sigma_b: sig_b,
        });
        let s = simulate_dataset(&p, 98, &RateSpec::Constant { value: 0.2 }, 31.0, 4, &SolverOptions::default()).unwrap();
        let t = s.data.times();
        let se = (stats::variance(&t) / 98.0).sqrt();
        // Skew of the log-normal A shifts the mean only slightly at these σ.
        assert!((stats::mean(&t) - 31.0).abs() < 3.0 * se, "{} ± {se}", stats::mean(&t));
    }

    #[test]
    fn non_failing_draws_are_redrawn_or_exhaust_budget() {
        let p = ModelParams::Canadian(crate::likelihood::CanadianParams {
            mu_a: 0.0,
            sigma_a: 1.0,
            mu_b: 0.0,
            sigma_b: 0.1,
            mu_c: 0.5,
            sigma_c: 0.1,
            mu_n: 0.0,
            sigma_n: 0.1,
            mu_s0: 0.0,
            sigma_s0: 0.1,
        });
        let rate = RateSpec::Constant { value: 0.2 };
        let s = simulate_dataset(&p, 40, &rate, 31.0, 2, &SolverOptions::default()).unwrap();
        assert_eq!(s.data.len(), 40);
        assert!(s.redrawn > 10);
        let never = ModelParams::Canadian(crate::likelihood::CanadianParams {
            mu_a: -5.0,
            sigma_a: 0.1,
            ..match p {
                ModelParams::Canadian(c) => c,
                _ => unreachable!(),
            }
        });
        assert!(matches!(
            simulate_dataset(&never, 3, &rate, 31.0, 2, &SolverOptions::default()),
            Err(Error::BudgetExhausted { accepted: 0, .. })
        ));
    }

    #[test]
    fn params_file_parsing() {
        let text = r#"
            mu_s = 31.0
            [params]
            mu_A = 0.6
            sigma_A = 0.1
            mu_B = 1.1
            sigma_B = 0.05
            [rate]
            kind = "lognormal"
            median = 0.2
            sigma = 0.25
        "#;
        let f = ParamsFile::parse(text).unwrap();
        assert_eq!(f.rate, RateSpec::LogNormal { median: 0.2, sigma: 0.25 });
        let p = f.model_params(ModelKind::Us).unwrap();
        assert_eq!(p.to_vec(), vec![0.6, 0.1, 1.1, 0.05]);
        assert!(f.model_params(ModelKind::Canadian).is_err());
        assert!(ParamsFile::parse(&text.replace("mu_s", "mu_x")).is_err());
        assert!(ParamsFile::parse(&text.replace("median", "centre")).is_err());
        let back = ParamsFile::parse(&toml::to_string(&ParamsFile::from_params(&p, 31.0, f.rate)).unwrap()).unwrap();
        assert_eq!(back.model_params(ModelKind::Us).unwrap(), p);
    }
}
