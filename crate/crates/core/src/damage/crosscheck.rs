//! Agreement between the semi-analytic failure times and the ODE oracle over
//! random effect draws.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::oracle::{integrate_damage, OracleOptions, Strength};
use super::{
    canadian2_failure_time, canadian_failure_time, failure_time, us_damage_ramp, CanadianEffects, CanadianRamp, Effects,
    LoadProfile, ModelKind, RampContext, SolverOptions, UsEffects,
};
use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::scalar::{logistic, Real};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DrawCheck {
    pub index: usize,
    pub analytic: f64,
    pub oracle: f64,
    pub rel_error: f64,
    /// Largest `|α_oracle(t) - α_analytic(t)|` over the oracle's steps.
    pub trajectory_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub model: ModelKind,
    pub draws: usize,
    pub max_rel_error: f64,
    pub max_trajectory_error: f64,
    /// Largest relative error against the `c̃ = 0` closed form.
    pub boundary_rel_error: Option<f64>,
    pub worst: Option<DrawCheck>,
    pub checks: Vec<DrawCheck>,
}

/// Effect draws that always fail: log-normal `A`, `B` for the US model;
/// positive `ã`, `c̃` with log-normal exponents and logit-normal `σ₀` for the
/// Canadian variants, centered on failure times near half a minute.
pub fn positive_draw<F: Real, R: Rng + ?Sized>(model: ModelKind, rng: &mut R) -> Effects<F> {
    let mut z = |mean: f64, sd: f64| (F::lit(mean) + F::lit(sd) * F::std_normal(rng)).exp();
    match model {
        ModelKind::Us => Effects::Us(UsEffects {
            a: z(0.7_f64.ln(), 0.4),
            b: z(1.2_f64.ln(), 0.5),
        }),
        ModelKind::Canadian | ModelKind::Canadian2 => {
            let (a_center, c_center) = if model == ModelKind::Canadian { (0.65, 1.0) } else { (64.0, 2.0) };
            let a_tilde = z(f64::ln(a_center), 0.25);
            let b = z(3.0_f64.ln(), 0.3);
            let c_tilde = z(f64::ln(c_center), 0.5);
            let n = z(0.0, 0.3);
            let sigma0 = logistic(F::lit(0.5) * F::std_normal(rng));
            Effects::Canadian(CanadianEffects {
                a_tilde,
                b,
                c_tilde,
                n,
                sigma0,
            })
        }
    }
}

fn analytic_damage<F: Real>(model: ModelKind, e: &Effects<F>, ctx: &RampContext<F>, t: F, t_s: F) -> Result<F> {
    match e {
        Effects::Us(u) => us_damage_ramp(t.min(t_s), t_s, u.b),
        Effects::Canadian(c) => {
            let ramp = CanadianRamp::new(model, c, ctx)?
                .ok_or_else(|| Error::InvalidEffect("non-failing draw in cross-check".into()))?;
            Ok(ramp.damage(t.min(t_s), t_s))
        }
    }
}

fn check_one<F: Real>(
    model: ModelKind,
    index: usize,
    key: StreamKey,
    ctx: &RampContext<F>,
    solver: &SolverOptions<F>,
    oracle: &OracleOptions<F>,
) -> Result<DrawCheck> {
    let e: Effects<F> = positive_draw(model, &mut key.child(index as u64).rng());
    let analytic = failure_time(model, &e, ctx, solver)?
        .time()
        .ok_or_else(|| Error::InvalidEffect(format!("draw {index} does not fail analytically")))?;
    let run = integrate_damage(model, &e, &LoadProfile::ramp(ctx.k), Strength::AtFailure, ctx.mu_ref, oracle)?;
    let numeric = run
        .outcome
        .time()
        .ok_or_else(|| Error::InvalidEffect(format!("draw {index} does not fail in the oracle")))?;
    let mut traj = F::zero();
    for &(t, alpha) in &run.trajectory {
        traj = traj.max((alpha - analytic_damage(model, &e, ctx, t, analytic)?).abs());
    }
    Ok(DrawCheck {
        index,
        analytic: analytic.as_f64(),
        oracle: numeric.as_f64(),
        rel_error: ((numeric - analytic) / analytic).abs().as_f64(),
        trajectory_error: traj.as_f64(),
    })
}

/// Relative error of the Canadian solvers against the explicit formula for
/// `c̃ = 0`, over `draws` effect draws.
fn boundary_check<F: Real>(model: ModelKind, draws: usize, key: StreamKey, ctx: &RampContext<F>, solver: &SolverOptions<F>) -> Result<f64> {
    let mut worst = 0.0_f64;
    for i in 0..draws {
        let Effects::Canadian(mut e) = positive_draw::<F, _>(model, &mut key.child(i as u64).rng()) else {
            unreachable!("canadian draw")
        };
        e.c_tilde = F::zero();
        let b1 = e.b + F::one();
        let x = F::one() - e.sigma0;
        let (t, want) = if model == ModelKind::Canadian {
            let t = canadian_failure_time(&e, ctx, solver)?;
            let w = (ctx.mu_ref * b1 / ((e.a_tilde * ctx.k).powf(e.b) * x.powf(b1))).powf(b1.recip());
            (t, w)
        } else {
            let t = canadian2_failure_time(&e, ctx, solver)?;
            (t, ctx.mu_ref * b1 / (e.a_tilde * x.powf(b1)))
        };
        let t = t.time().ok_or_else(|| Error::InvalidEffect("boundary draw did not fail".into()))?;
        worst = worst.max(((t - want) / want).abs().as_f64());
    }
    Ok(worst)
}

/// Compares analytic and oracle failure times and trajectories over `draws`
/// random effect vectors from [`positive_draw`].
pub fn cross_validate<F: Real>(
    model: ModelKind,
    draws: usize,
    key: StreamKey,
    ctx: &RampContext<F>,
    solver: &SolverOptions<F>,
    oracle: &OracleOptions<F>,
) -> Result<CheckReport> {
    ctx.validate()?;
    let checks: Vec<DrawCheck> = (0..draws)
        .into_par_iter()
        .map(|i| check_one(model, i, key, ctx, solver, oracle))
        .collect::<Result<_>>()?;
    let worst = checks
        .iter()
        .copied()
        .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error));
    let boundary_rel_error = if model.is_canadian() {
        Some(boundary_check(model, draws.clamp(1, 50), key.child(u64::MAX), ctx, solver)?)
    } else {
        None
    };
    Ok(CheckReport {
        model,
        draws,
        max_rel_error: checks.iter().map(|c| c.rel_error).fold(0.0, f64::max),
        max_trajectory_error: checks.iter().map(|c| c.trajectory_error).fold(0.0, f64::max),
        boundary_rel_error,
        worst,
        checks,
    })
}
