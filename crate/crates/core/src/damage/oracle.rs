//! Direct numerical integration of the damage rate equations.
//!
//! This path shares no code with the closed-form and incomplete-gamma
//! solvers, so agreement between the two is a meaningful check.

use super::{CanadianEffects, Effects, FailureOutcome, LoadProfile, ModelKind, UsEffects};
use crate::error::{Error, Result};
use crate::ode::{integrate, OdeOptions};
use crate::scalar::Real;

/// Short-term strength entering the stress ratio `τ(t)/τ_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strength<F> {
    /// A fixed, known strength.
    Known(F),
    /// The strength is the stress reached at failure, `τ_s = τ(T)`, as in a
    /// ramp test; solved as a fixed point.
    AtFailure,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions<F> {
    pub ode: OdeOptions<F>,
    /// Integration stops at `horizon_factor * mu_ref`.
    pub horizon_factor: F,
    /// Relative accuracy of the fixed-point failure time.
    pub rel_tol: F,
    pub max_iterations: usize,
}

impl<F: Real> Default for OracleOptions<F> {
    fn default() -> Self {
        OracleOptions {
            ode: OdeOptions {
                rtol: F::floor_tol(F::lit(1e-11)),
                atol: F::floor_tol(F::lit(1e-14)),
                ..OdeOptions::default()
            },
            horizon_factor: F::lit(1e6),
            rel_tol: F::floor_tol(F::lit(1e-12)),
            max_iterations: 300,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DamageRun<F> {
    /// Accepted `(t, α)` states from `t = 0` to the event or horizon.
    pub trajectory: Vec<(F, F)>,
    pub outcome: FailureOutcome<F>,
    /// Strength used for the returned trajectory.
    pub strength: F,
}

fn pos_pow<F: Real>(base: F, p: F) -> F {
    if base > F::zero() {
        base.powf(p)
    } else {
        F::zero()
    }
}

fn rate<F: Real>(model: ModelKind, effects: &Effects<F>, ratio: F, tau_s: F, alpha: F, mu: F) -> F {
    match (model, effects) {
        (ModelKind::Us, Effects::Us(UsEffects { a, b })) => (*b * ratio - *a).exp() / mu,
        (ModelKind::Canadian, Effects::Canadian(e)) => {
            let x = ratio - e.sigma0;
            (pos_pow(e.a_tilde * tau_s * x, e.b) + pos_pow(e.c_tilde * tau_s * x, e.n) * alpha) / mu
        }
        (ModelKind::Canadian2, Effects::Canadian(e)) => {
            let x = ratio - e.sigma0;
            (e.a_tilde * pos_pow(x, e.b) + e.c_tilde * pos_pow(x, e.n) * alpha) / mu
        }
        _ => F::nan(),
    }
}

fn threshold<F: Real>(effects: &Effects<F>) -> Option<F> {
    match effects {
        Effects::Us(_) => None,
        Effects::Canadian(e) => Some(e.sigma0),
    }
}

fn never_fails<F: Real>(model: ModelKind, effects: &Effects<F>) -> Result<bool> {
    match (model, effects) {
        (ModelKind::Us, Effects::Us(_)) => Ok(false),
        (ModelKind::Canadian | ModelKind::Canadian2, Effects::Canadian(CanadianEffects { a_tilde, c_tilde, .. })) => {
            Ok(*a_tilde <= F::zero() || *c_tilde < F::zero())
        }
        (m, _) => Err(Error::InvalidInput(format!("effects do not belong to the {m} model"))),
    }
}

/// One pass of the rate equation with strength `tau_s` up to `t_end`.
fn run<F: Real>(
    model: ModelKind,
    effects: &Effects<F>,
    profile: &LoadProfile<F>,
    tau_s: F,
    mu_ref: F,
    t_end: F,
    with_event: bool,
    ode: &OdeOptions<F>,
) -> Result<crate::ode::Solution<F, 1>> {
    let mut breaks = profile.kinks();
    if let Some(s0) = threshold(effects) {
        breaks.extend(profile.upcrossings(s0 * tau_s, t_end));
    }
    let rhs = |t: F, y: &[F; 1]| [rate(model, effects, profile.stress(t) / tau_s, tau_s, y[0], mu_ref)];
    let event = |_: F, y: &[F; 1]| y[0] - F::one();
    let ev: Option<&dyn Fn(F, &[F; 1]) -> F> = if with_event { Some(&event) } else { None };
    integrate(rhs, F::zero(), [F::zero()], t_end, &breaks, ev, ode)
}

/// Integrates `dα/dt` from `α(0) = 0` under `profile` until `α = 1`.
///
/// With [`Strength::AtFailure`] the failure time `T` is found by bisection
/// (accelerated with the Illinois rule) on `ln α(T)` computed with
/// `τ_s = τ(T)`, then a final pass records the trajectory. Canadian effects
/// with `ã ≤ 0` or `c̃ < 0` return `NonFailing` without integrating.
pub fn integrate_damage<F: Real>(
    model: ModelKind,
    effects: &Effects<F>,
    profile: &LoadProfile<F>,
    strength: Strength<F>,
    mu_ref: F,
    opts: &OracleOptions<F>,
) -> Result<DamageRun<F>> {
    if !(mu_ref > F::zero()) {
        return Err(Error::InvalidInput(format!("mu_ref must be positive, got {mu_ref}")));
    }
    let horizon = opts.horizon_factor * mu_ref;
    let non_failing = |strength: F| DamageRun {
        trajectory: vec![(F::zero(), F::zero())],
        outcome: FailureOutcome::NonFailing,
        strength,
    };
    if never_fails(model, effects)? {
        let s = match strength {
            Strength::Known(s) => s,
            Strength::AtFailure => F::nan(),
        };
        return Ok(non_failing(s));
    }

    let tau_s = match strength {
        Strength::Known(s) => {
            if !(s > F::zero()) {
                return Err(Error::InvalidInput(format!("strength must be positive, got {s}")));
            }
            s
        }
        Strength::AtFailure => match fixed_point(model, effects, profile, mu_ref, horizon, opts)? {
            Some(t) => profile.stress(t),
            None => return Ok(non_failing(F::nan())),
        },
    };

    let sol = run(model, effects, profile, tau_s, mu_ref, horizon, true, &opts.ode)?;
    let trajectory = sol.t.iter().zip(&sol.y).map(|(&t, y)| (t, y[0])).collect();
    let outcome = match sol.event {
        Some((t, _)) => FailureOutcome::FailsAt(t),
        None => FailureOutcome::NonFailing,
    };
    Ok(DamageRun {
        trajectory,
        outcome,
        strength: tau_s,
    })
}

/// Smallest `T` with `α(T) = 1` when `τ_s = τ(T)`; `None` past the horizon.
fn fixed_point<F: Real>(
    model: ModelKind,
    effects: &Effects<F>,
    profile: &LoadProfile<F>,
    mu_ref: F,
    horizon: F,
    opts: &OracleOptions<F>,
) -> Result<Option<F>> {
    let ode = OdeOptions {
        record: false,
        ..opts.ode
    };
    let g = |ln_t: F| -> Result<F> {
        let t = ln_t.exp();
        let tau_s = profile.stress(t);
        if !(tau_s > F::zero()) {
            return Err(Error::InvalidInput(format!(
                "load profile must be positive at candidate failure time {t}"
            )));
        }
        let sol = run(model, effects, profile, tau_s, mu_ref, t, false, &ode)?;
        Ok(sol.last().1[0].ln())
    };
    let fail = |what: &str| Error::ConvergenceFailure {
        iterations: opts.max_iterations,
        context: format!("oracle fixed point: {what}"),
    };

    let two = F::LN_2();
    let mut lo = mu_ref.ln();
    let mut g_lo = g(lo)?;
    let (mut hi, mut g_hi);
    let mut iter = 0;
    if g_lo >= F::zero() {
        hi = lo;
        g_hi = g_lo;
        while g_lo >= F::zero() {
            iter += 1;
            if iter > opts.max_iterations {
                return Err(fail("lower bracket"));
            }
            hi = lo;
            g_hi = g_lo;
            lo = lo - two;
            g_lo = g(lo)?;
        }
    } else {
        hi = lo;
        g_hi = g_lo;
        while g_hi < F::zero() {
            iter += 1;
            if iter > opts.max_iterations {
                return Err(fail("upper bracket"));
            }
            lo = hi;
            g_lo = g_hi;
            if hi >= horizon.ln() {
                return Ok(None);
            }
            hi = (hi + two).min(horizon.ln());
            g_hi = g(hi)?;
        }
    }

    // Illinois variant of regula falsi on (ln T, ln α).
    let tol = F::floor_tol(opts.rel_tol);
    let mut side = 0i8;
    while hi - lo > tol {
        iter += 1;
        if iter > opts.max_iterations {
            return Err(fail("refinement"));
        }
        let mut m = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
        if !(m > lo && m < hi) {
            m = F::lit(0.5) * (lo + hi);
        }
        let gm = g(m)?;
        if gm == F::zero() {
            return Ok(Some(m.exp()));
        }
        if gm < F::zero() {
            lo = m;
            g_lo = gm;
            if side == -1 {
                g_hi = g_hi * F::lit(0.5);
            }
            side = -1;
        } else {
            hi = m;
            g_hi = gm;
            if side == 1 {
                g_lo = g_lo * F::lit(0.5);
            }
            side = 1;
        }
    }
    Ok(Some(hi.exp()))
}
