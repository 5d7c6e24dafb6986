//! Posterior-predictive failure times and replicate-data ECDF bands.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::damage::{failure_time, FailureOutcome, ModelKind, RampContext, SolverOptions};
use crate::error::{Error, Result};
use crate::likelihood::{sample_effects, Dataset, ModelParams, Specimen};
use crate::rng::StreamKey;
use crate::scalar::Real;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictiveSample<F> {
    /// Row of the posterior the draw used.
    pub theta_index: usize,
    pub time: F,
    /// Stress at failure, `k · T_f`.
    pub load: F,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction<F> {
    pub k: F,
    pub samples: Vec<PredictiveSample<F>>,
    /// Draws that never fail within the solver horizon.
    pub censored: usize,
    /// Draws skipped because the solver failed or the effects were unusable.
    pub skipped: usize,
    pub mean_time: F,
    pub mean_load: F,
    /// Standard error of `mean_load`.
    pub load_std_error: F,
}

enum Draw<F> {
    Fails(PredictiveSample<F>),
    Censored,
    Skipped,
}

fn draw_time<F: Real>(
    model: ModelKind,
    params: &ModelParams<F>,
    ctx: &RampContext<F>,
    solver: &SolverOptions<F>,
    rng: &mut impl Rng,
) -> Result<Option<Option<F>>> {
    let e = sample_effects(params, rng);
    match failure_time(model, &e, ctx, solver) {
        Ok(FailureOutcome::FailsAt(t)) => Ok(Some(Some(t))),
        Ok(FailureOutcome::NonFailing) => Ok(Some(None)),
        Err(Error::ConvergenceFailure { .. } | Error::InvalidEffect(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn check_rows<F: Real>(model: ModelKind, rows: &[Vec<F>]) -> Result<Vec<ModelParams<F>>> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("posterior has no rows".into()));
    }
    rows.iter().map(|r| ModelParams::from_slice(model, r)).collect()
}

/// Failure times at loading rate `k` under the posterior predictive law.
///
/// `rows` are posterior draws in natural parameters. Draw `i` uses the
/// stream `key.child(i)` to pick a row uniformly and then the effects.
pub fn predict_failure<F: Real>(
    model: ModelKind,
    rows: &[Vec<F>],
    k: F,
    mu_s: F,
    draws: usize,
    solver: &SolverOptions<F>,
    key: StreamKey,
) -> Result<Prediction<F>> {
    let params = check_rows(model, rows)?;
    let ctx = RampContext::new(k, mu_s)?;
    let out: Vec<Draw<F>> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = key.child(i as u64).rng();
            let j = rng.random_range(0..params.len());
            Ok(match draw_time(model, &params[j], &ctx, solver, &mut rng)? {
                Some(Some(t)) => Draw::Fails(PredictiveSample {
                    theta_index: j,
                    time: t,
                    load: k * t,
                }),
                Some(None) => Draw::Censored,
                None => Draw::Skipped,
            })
        })
        .collect::<Result<_>>()?;
    let mut samples = Vec::with_capacity(draws);
    let (mut censored, mut skipped) = (0, 0);
    for d in out {
        match d {
            Draw::Fails(s) => samples.push(s),
            Draw::Censored => censored += 1,
            Draw::Skipped => skipped += 1,
        }
    }
    let times: Vec<F> = samples.iter().map(|s| s.time).collect();
    let (mean_time, se) = if times.is_empty() {
        (F::nan(), F::nan())
    } else {
        (
            stats::mean(&times),
            (stats::variance(&times) / F::from_count(times.len())).sqrt(),
        )
    };
    Ok(Prediction {
        k,
        samples,
        censored,
        skipped,
        mean_time,
        mean_load: k * mean_time,
        load_std_error: k * se,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replicate<F> {
    pub theta_index: usize,
    pub data: Dataset<F>,
    /// Non-failing draws that were redrawn.
    pub redrawn: usize,
}

/// Redraws allowed per specimen before giving up.
const REDRAW_BUDGET: usize = 1000;

/// `reps` synthetic datasets shaped like `template`: each picks one
/// posterior row, then one failure time per template specimen at that
/// specimen's loading rate. Non-failing draws are redrawn.
pub fn replicate_datasets<F: Real>(
    model: ModelKind,
    rows: &[Vec<F>],
    template: &Dataset<F>,
    reps: usize,
    solver: &SolverOptions<F>,
    key: StreamKey,
) -> Result<Vec<Replicate<F>>> {
    let params = check_rows(model, rows)?;
    if reps == 0 {
        return Err(Error::InvalidInput("need at least one replicate".into()));
    }
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let rep = key.child(r as u64);
            let j = rep.child(0).rng().random_range(0..params.len());
            let mut redrawn = 0;
            let mut records = Vec::with_capacity(template.len());
            for (i, spec) in template.records.iter().enumerate() {
                let ctx = RampContext::new(spec.rate, template.mu_s)?;
                let mut rng = rep.path(&[1, i as u64]).rng();
                let mut time = None;
                for _ in 0..REDRAW_BUDGET {
                    if let Some(Some(t)) = draw_time(model, &params[j], &ctx, solver, &mut rng)? {
                        time = Some(t);
                        break;
                    }
                    redrawn += 1;
                }
                let Some(time) = time else {
                    return Err(Error::BudgetExhausted {
                        requested: template.len(),
                        accepted: records.len(),
                        attempts: redrawn,
                    });
                };
                records.push(Specimen {
                    id: spec.id.clone(),
                    time,
                    rate: spec.rate,
                });
            }
            Ok(Replicate {
                theta_index: j,
                data: Dataset::new(records, Some(template.mu_s))?,
                redrawn,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EcdfBand<F> {
    pub grid: Vec<F>,
    pub observed: Vec<F>,
    pub lower: Vec<F>,
    pub upper: Vec<F>,
}

/// Pointwise envelope of the replicate ECDFs on `grid`, with the observed
/// ECDF alongside. `central = None` gives the min/max envelope; `Some(p)`
/// the central `p` quantile band.
pub fn ecdf_band<F: Real>(replicates: &[Vec<F>], observed: &[F], grid: &[F], central: Option<F>) -> Result<EcdfBand<F>> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("grid must be nonempty and strictly increasing".into()));
    }
    if replicates.is_empty() || replicates.iter().any(|r| r.is_empty()) || observed.is_empty() {
        return Err(Error::InvalidInput("ECDFs need nonempty samples".into()));
    }
    if let Some(p) = central {
        if !(p > F::zero() && p <= F::one()) {
            return Err(Error::InvalidInput("central band level must lie in (0, 1]".into()));
        }
    }
    let sorted = |xs: &[F]| {
        let mut v = xs.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
        v
    };
    let reps: Vec<Vec<F>> = replicates.iter().map(|r| sorted(r)).collect();
    let obs = sorted(observed);
    let mut lower = Vec::with_capacity(grid.len());
    let mut upper = Vec::with_capacity(grid.len());
    for &g in grid {
        let mut vals: Vec<F> = reps.iter().map(|r| stats::ecdf_sorted(r, g)).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("ECDF values are finite"));
        let (lo, hi) = match central {
            None => (vals[0], vals[vals.len() - 1]),
            Some(p) => {
                let tail = (F::one() - p) / F::lit(2.0);
                (
                    stats::quantile_sorted(&vals, tail),
                    stats::quantile_sorted(&vals, F::one() - tail),
                )
            }
        };
        lower.push(lo);
        upper.push(hi);
    }
    Ok(EcdfBand {
        grid: grid.to_vec(),
        observed: grid.iter().map(|&g| stats::ecdf_sorted(&obs, g)).collect(),
        lower,
        upper,
    })
}

/// `points` evenly spaced values spanning every sample.
pub fn default_grid<F: Real>(samples: &[&[F]], points: usize) -> Result<Vec<F>> {
    let all = samples.iter().flat_map(|s| s.iter().copied());
    let (lo, hi) = all.fold((F::infinity(), F::neg_infinity()), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if !(lo.is_finite() && hi.is_finite()) || points < 2 {
        return Err(Error::InvalidInput("grid needs finite samples and at least 2 points".into()));
    }
    if lo == hi {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / F::from_count(points - 1);
    Ok((0..points).map(|i| lo + step * F::from_count(i)).collect())
}
