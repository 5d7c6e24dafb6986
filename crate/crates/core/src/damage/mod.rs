//! Accumulated-damage models in non-dimensional form.
//!
//! Three models share the same contract: given specimen-level random effects
//! and a ramp load, return the time at which damage reaches one.
//!
//! * US: `μ_s α̇ = exp(-A + B τ/τ_s)`, solved in closed form.
//! * Canadian: `μ_s α̇ = [ã τ_s (τ/τ_s - σ₀)₊]^b + [c̃ τ_s (τ/τ_s - σ₀)₊]^n α`,
//!   solved through the regularized lower incomplete gamma function.
//! * Canadian2: `μ_s α̇ = a (τ/τ_s - σ₀)₊^b + c (τ/τ_s - σ₀)₊^n α` with
//!   dimensionless `a`, `c`; failure times do not depend on the loading rate.
//!
//! [`oracle::integrate_damage`] integrates any of them numerically under an
//! arbitrary piecewise-linear load and serves as an independent check.

mod canadian;
pub mod crosscheck;
pub mod oracle;
mod us;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use canadian::{canadian2_failure_time, canadian_failure_time, canadian_rate, CanadianRamp};
pub use us::{us_damage_ramp, us_failure_time, us_initial_rate, us_terminal_rate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Us,
    Canadian,
    Canadian2,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Us, ModelKind::Canadian, ModelKind::Canadian2];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Us => "us",
            ModelKind::Canadian => "canadian",
            ModelKind::Canadian2 => "canadian2",
        }
    }

    pub fn is_canadian(self) -> bool {
        !matches!(self, ModelKind::Us)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "us" => Ok(ModelKind::Us),
            "canadian" => Ok(ModelKind::Canadian),
            "canadian2" => Ok(ModelKind::Canadian2),
            other => Err(Error::InvalidInput(format!(
                "unknown model `{other}` (expected us, canadian or canadian2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FailureOutcome<F> {
    FailsAt(F),
    NonFailing,
}

impl<F: Real> FailureOutcome<F> {
    pub fn time(self) -> Option<F> {
        match self {
            FailureOutcome::FailsAt(t) => Some(t),
            FailureOutcome::NonFailing => None,
        }
    }

    pub fn is_failing(self) -> bool {
        matches!(self, FailureOutcome::FailsAt(_))
    }
}

/// Random effects of the US model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UsEffects<F> {
    pub a: F,
    pub b: F,
}

/// Random effects of both Canadian variants.
///
/// For the original model `a_tilde` and `c_tilde` carry units of inverse
/// stress (psi⁻¹); for the dimensionless variant they are plain numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanadianEffects<F> {
    pub a_tilde: F,
    pub b: F,
    pub c_tilde: F,
    pub n: F,
    pub sigma0: F,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Effects<F> {
    Us(UsEffects<F>),
    Canadian(CanadianEffects<F>),
}

impl<F> From<UsEffects<F>> for Effects<F> {
    fn from(e: UsEffects<F>) -> Self {
        Effects::Us(e)
    }
}

impl<F> From<CanadianEffects<F>> for Effects<F> {
    fn from(e: CanadianEffects<F>) -> Self {
        Effects::Canadian(e)
    }
}

/// Ramp test settings: stress rate `k` (psi/s) and the reference mean
/// failure time (seconds).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampContext<F> {
    pub k: F,
    pub mu_ref: F,
}

impl<F: Real> RampContext<F> {
    pub fn new(k: F, mu_ref: F) -> Result<Self> {
        let ctx = RampContext { k, mu_ref };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > F::zero() && self.k.is_finite()) {
            return Err(Error::InvalidInput(format!("loading rate must be positive, got {}", self.k)));
        }
        if !(self.mu_ref > F::zero() && self.mu_ref.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "reference failure time must be positive, got {}",
                self.mu_ref
            )));
        }
        Ok(())
    }

    /// Same experiment expressed in a time unit `scale` times longer.
    pub fn rescaled(&self, scale: F) -> Self {
        RampContext {
            k: self.k * scale,
            mu_ref: self.mu_ref / scale,
        }
    }
}

/// Tolerances for the semi-analytic failure-time solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<F> {
    /// Target relative accuracy of the failure time.
    pub rel_tol: F,
    /// Specimens surviving past `horizon_factor * mu_ref` are non-failing.
    pub horizon_factor: F,
    pub max_iterations: usize,
}

impl<F: Real> Default for SolverOptions<F> {
    fn default() -> Self {
        SolverOptions {
            rel_tol: F::floor_tol(F::lit(1e-12)),
            horizon_factor: F::lit(1e6),
            max_iterations: 200,
        }
    }
}

/// Failure time under a ramp for any model.
pub fn failure_time<F: Real>(
    model: ModelKind,
    effects: &Effects<F>,
    ctx: &RampContext<F>,
    opts: &SolverOptions<F>,
) -> Result<FailureOutcome<F>> {
    match (model, effects) {
        (ModelKind::Us, Effects::Us(e)) => {
            ctx.validate()?;
            let out = us_failure_time(e, ctx.mu_ref)?;
            Ok(match out {
                FailureOutcome::FailsAt(t) if t > opts.horizon_factor * ctx.mu_ref => FailureOutcome::NonFailing,
                o => o,
            })
        }
        (ModelKind::Canadian, Effects::Canadian(e)) => canadian_failure_time(e, ctx, opts),
        (ModelKind::Canadian2, Effects::Canadian(e)) => canadian2_failure_time(e, ctx, opts),
        (m, _) => Err(Error::InvalidInput(format!("effects do not belong to the {m} model"))),
    }
}

/// Piecewise-linear stress history through `(0, 0)`.
///
/// Beyond the last breakpoint the final segment is extended linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadProfile<F> {
    points: Vec<(F, F)>,
}

impl<F: Real> LoadProfile<F> {
    pub fn new(points: Vec<(F, F)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput("load profile needs at least two breakpoints".into()));
        }
        if points[0] != (F::zero(), F::zero()) {
            return Err(Error::InvalidInput("load profile must start at (0, 0)".into()));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidInput("load profile times must increase strictly".into()));
        }
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::InvalidInput("load profile must be finite".into()));
        }
        Ok(LoadProfile { points })
    }

    /// `τ(t) = k t`.
    pub fn ramp(k: F) -> Self {
        LoadProfile {
            points: vec![(F::zero(), F::zero()), (F::one(), k)],
        }
    }

    pub fn zero() -> Self {
        Self::ramp(F::zero())
    }

    pub fn points(&self) -> &[(F, F)] {
        &self.points
    }

    /// Interior breakpoint times (where the slope may jump).
    pub fn kinks(&self) -> Vec<F> {
        self.points[1..self.points.len() - 1].iter().map(|p| p.0).collect()
    }

    fn segment(&self, t: F) -> usize {
        let last = self.points.len() - 2;
        self.points[1..=last].iter().position(|p| t < p.0).unwrap_or(last)
    }

    pub fn stress(&self, t: F) -> F {
        let i = self.segment(t);
        let (t0, s0) = self.points[i];
        let (t1, s1) = self.points[i + 1];
        s0 + (s1 - s0) * (t - t0) / (t1 - t0)
    }

    /// Times in `(0, t_max)` where `τ(t)` crosses `level` from below.
    pub fn upcrossings(&self, level: F, t_max: F) -> Vec<F> {
        let mut out = Vec::new();
        let n = self.points.len();
        for i in 0..n - 1 {
            let (t0, s0) = self.points[i];
            let (t1, s1) = self.points[i + 1];
            let open_end = i == n - 2;
            if s1 > s0 && s0 < level && (open_end || s1 >= level) {
                let t = t0 + (level - s0) * (t1 - t0) / (s1 - s0);
                if t > F::zero() && t < t_max && (open_end || t <= t1) {
                    out.push(t);
                }
            }
        }
        out
    }
}

/// Beam dimensions for the mid-span deflection formula, in inches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry<F> {
    pub span: F,
    pub breadth: F,
    pub depth: F,
}

/// Force rate (lb/s) that produces deflection rate `d_rate` (in/s) in a beam
/// of modulus `e_modulus` (psi): `k = E d / C` with
/// `C = 276 L³ / (1296 b d³)`.
pub fn deflection_loading_rate<F: Real>(e_modulus: F, d_rate: F, geom: &Geometry<F>) -> Result<F> {
    if !(geom.span > F::zero() && geom.breadth > F::zero() && geom.depth > F::zero()) {
        return Err(Error::InvalidInput("beam dimensions must be positive".into()));
    }
    if !(e_modulus > F::zero()) || d_rate < F::zero() {
        return Err(Error::InvalidInput(
            "modulus must be positive and deflection rate nonnegative".into(),
        ));
    }
    let c = F::lit(276.0) * geom.span.powi(3) / (F::lit(1296.0) * geom.breadth * geom.depth.powi(3));
    Ok(e_modulus * d_rate / c)
}
