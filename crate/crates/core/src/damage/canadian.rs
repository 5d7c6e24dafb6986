use super::{CanadianEffects, FailureOutcome, ModelKind, RampContext, SolverOptions};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::special::{ln_gamma, ln_gamma_p_at_ln};

/// Damage of a Canadian-type model along a ramp, as a function of the
/// failure time `T` that fixes the short-term strength `τ_s = kT`.
///
/// With `x = t/T - σ₀` the rate equation becomes
/// `dα/dx = P x^b + Q x^n α`, where `ln P` and `ln Q` are affine in `ln T`.
/// Its solution from `α(0) = 0` is
///
/// ```text
/// α(x) = e^U · P/(n+1) · ((n+1)/Q)^s · γ(s, U),   U = Q x^{n+1}/(n+1),  s = (b+1)/(n+1)
/// ```
///
/// and every evaluation below happens on `ln α`.
#[derive(Debug, Clone, Copy)]
pub struct CanadianRamp<F> {
    ln_p0: F,
    beta_p: F,
    /// `None` when the second term vanishes (`c̃ = 0`).
    ln_q0: Option<F>,
    beta_q: F,
    b: F,
    n: F,
    s: F,
    ln_np1: F,
    ln_gamma_s: F,
    sigma0: F,
    ln_x_end: F,
}

impl<F: Real> CanadianRamp<F> {
    /// Returns `None` for effects that never fail (`ã ≤ 0` or `c̃ < 0`).
    pub fn new(model: ModelKind, e: &CanadianEffects<F>, ctx: &RampContext<F>) -> Result<Option<Self>> {
        ctx.validate()?;
        let CanadianEffects {
            a_tilde,
            b,
            c_tilde,
            n,
            sigma0,
        } = *e;
        if !(b > F::zero() && b.is_finite() && n > F::zero() && n.is_finite()) {
            return Err(Error::InvalidEffect(format!("exponents must be positive, got b = {b}, n = {n}")));
        }
        if !(sigma0 > F::zero() && sigma0 < F::one()) {
            return Err(Error::InvalidEffect(format!("sigma0 must lie in (0, 1), got {sigma0}")));
        }
        if a_tilde.is_nan() || c_tilde.is_nan() {
            return Err(Error::InvalidEffect("NaN rate coefficient".into()));
        }
        if a_tilde <= F::zero() || c_tilde < F::zero() {
            return Ok(None);
        }
        let ln_mu = ctx.mu_ref.ln();
        let ln_k = ctx.k.ln();
        let (ln_p0, beta_p, ln_q0, beta_q) = match model {
            ModelKind::Canadian => (
                -ln_mu + b * (a_tilde.ln() + ln_k),
                F::one() + b,
                -ln_mu + n * (c_tilde.ln() + ln_k),
                F::one() + n,
            ),
            ModelKind::Canadian2 => (-ln_mu + a_tilde.ln(), F::one(), -ln_mu + c_tilde.ln(), F::one()),
            ModelKind::Us => {
                return Err(Error::InvalidInput("the US model has no incomplete-gamma form".into()))
            }
        };
        let s = (b + F::one()) / (n + F::one());
        Ok(Some(CanadianRamp {
            ln_p0,
            beta_p,
            ln_q0: (c_tilde > F::zero()).then_some(ln_q0),
            beta_q,
            b,
            n,
            s,
            ln_np1: n.ln_1p(),
            ln_gamma_s: ln_gamma(s),
            sigma0,
            ln_x_end: (-sigma0).ln_1p(),
        }))
    }

    /// `ln α` at `x = e^{ln_x}` for failure time `e^{ln_t}`.
    pub fn ln_damage(&self, ln_x: F, ln_t: F) -> F {
        let ln_p = self.ln_p0 + self.beta_p * ln_t;
        let b1 = self.b + F::one();
        match self.ln_q0 {
            None => ln_p + b1 * ln_x - b1.ln(),
            Some(q0) => {
                let ln_q = q0 + self.beta_q * ln_t;
                let ln_u = ln_q + (self.n + F::one()) * ln_x - self.ln_np1;
                let u = ln_u.exp();
                u + ln_p - self.ln_np1 + self.s * (self.ln_np1 - ln_q) + self.ln_gamma_s + ln_gamma_p_at_ln(self.s, ln_u)
            }
        }
    }

    /// `ln α(T)` at the end of a ramp that fails at `T = e^{ln_t}`, and its
    /// derivative in `ln_t`.
    fn end_value_and_slope(&self, ln_t: F) -> (F, F) {
        let v = self.ln_damage(self.ln_x_end, ln_t);
        let Some(q0) = self.ln_q0 else {
            return (v, self.beta_p);
        };
        let ln_q = q0 + self.beta_q * ln_t;
        let ln_u = ln_q + (self.n + F::one()) * self.ln_x_end - self.ln_np1;
        let u = ln_u.exp();
        let ln_pr = ln_gamma_p_at_ln(self.s, ln_u);
        let hazard = (self.s * ln_u - u - self.ln_gamma_s - ln_pr).exp();
        let slope = self.beta_q * (u + hazard) + self.beta_p - self.s * self.beta_q;
        (v, slope)
    }

    pub fn ln_damage_at_end(&self, ln_t: F) -> F {
        self.ln_damage(self.ln_x_end, ln_t)
    }

    /// Damage at time `t` on a ramp whose failure time is `t_s`.
    pub fn damage(&self, t: F, t_s: F) -> F {
        let x = t / t_s - self.sigma0;
        if !(x > F::zero()) {
            return F::zero();
        }
        self.ln_damage(x.ln(), t_s.ln()).exp()
    }

    /// Failure time when the second term is absent.
    fn ln_t_without_feedback(&self) -> F {
        let b1 = self.b + F::one();
        (b1.ln() - b1 * self.ln_x_end - self.ln_p0) / self.beta_p
    }

    /// Whether the failure time lies in `[lo, hi]`, decided from the sign of
    /// `ln α` at the two ends; `ln α(T)` is increasing in `T`.
    pub fn fails_within(&self, lo: F, hi: F, horizon: F) -> bool {
        let hi = hi.min(horizon);
        if !(hi > F::zero()) || hi < lo {
            return false;
        }
        // Feedback only shortens the life, so the closed form is an upper bound.
        if lo > F::zero() && self.ln_t_without_feedback() < lo.ln() {
            return false;
        }
        let upper_ok = self.ln_damage_at_end(hi.ln()) >= F::zero();
        upper_ok && (lo <= F::zero() || self.ln_damage_at_end(lo.ln()) <= F::zero())
    }

    pub fn failure_time(&self, opts: &SolverOptions<F>, mu_ref: F) -> Result<FailureOutcome<F>> {
        let ln_h = (opts.horizon_factor * mu_ref).ln();
        let closed = self.ln_t_without_feedback();
        if self.ln_q0.is_none() {
            return Ok(if closed <= ln_h {
                FailureOutcome::FailsAt(closed.exp())
            } else {
                FailureOutcome::NonFailing
            });
        }
        let fail = |iterations: usize, what: &str| Error::ConvergenceFailure {
            iterations,
            context: format!("canadian failure time: {what}"),
        };
        let tol = F::floor_tol(opts.rel_tol);
        let mut iter = 0;

        // The feedback term only adds damage, so the closed form bounds the
        // root from above.
        let mut hi = closed.min(ln_h);
        let (mut f_hi, _) = self.end_value_and_slope(hi);
        let mut step = F::lit(1e-9) * (F::one() + hi.abs());
        while f_hi < F::zero() {
            if hi >= ln_h {
                return Ok(FailureOutcome::NonFailing);
            }
            iter += 1;
            if iter > opts.max_iterations {
                return Err(fail(iter, "upper bracket"));
            }
            hi = (hi + step).min(ln_h);
            step = step * F::lit(4.0);
            f_hi = self.end_value_and_slope(hi).0;
        }
        let mut step = F::one();
        let mut lo = hi - step;
        while self.end_value_and_slope(lo).0 >= F::zero() {
            iter += 1;
            if iter > opts.max_iterations {
                return Err(fail(iter, "lower bracket"));
            }
            step = step * F::lit(2.0);
            lo = hi - step;
        }

        let mut l = hi;
        let half = F::lit(0.5);
        loop {
            iter += 1;
            if iter > opts.max_iterations {
                return Err(fail(iter, "refinement"));
            }
            let (v, d) = self.end_value_and_slope(l);
            if v == F::zero() {
                return Ok(FailureOutcome::FailsAt(l.exp()));
            }
            if v < F::zero() {
                lo = l;
            } else {
                hi = l;
            }
            let newton = l - v / d;
            let next = if d > F::zero() && newton > lo && newton < hi {
                newton
            } else {
                half * (lo + hi)
            };
            if (next - l).abs() <= tol || hi - lo <= tol {
                return Ok(FailureOutcome::FailsAt(next.exp()));
            }
            l = next;
        }
    }
}

fn solve<F: Real>(
    model: ModelKind,
    e: &CanadianEffects<F>,
    ctx: &RampContext<F>,
    opts: &SolverOptions<F>,
) -> Result<FailureOutcome<F>> {
    match CanadianRamp::new(model, e, ctx)? {
        None => Ok(FailureOutcome::NonFailing),
        Some(r) => r.failure_time(opts, ctx.mu_ref),
    }
}

/// Ramp failure time of the Canadian model.
pub fn canadian_failure_time<F: Real>(
    e: &CanadianEffects<F>,
    ctx: &RampContext<F>,
    opts: &SolverOptions<F>,
) -> Result<FailureOutcome<F>> {
    solve(ModelKind::Canadian, e, ctx, opts)
}

/// Ramp failure time of the dimensionless-coefficient Canadian variant.
/// The loading rate in `ctx` is validated but does not enter the result.
pub fn canadian2_failure_time<F: Real>(
    e: &CanadianEffects<F>,
    ctx: &RampContext<F>,
    opts: &SolverOptions<F>,
) -> Result<FailureOutcome<F>> {
    solve(ModelKind::Canadian2, e, ctx, opts)
}

/// `dα/dt` of the Canadian model on a ramp with failure time `t_s`:
/// `([ã k T_s x]₊^b + [c̃ k T_s x]₊^n α) / μ_s` with `x = t/T_s - σ₀`.
pub fn canadian_rate<F: Real>(t: F, alpha: F, e: &CanadianEffects<F>, ctx: &RampContext<F>, t_s: F) -> F {
    let x = t / t_s - e.sigma0;
    if !(x > F::zero()) {
        return F::zero();
    }
    let scale = ctx.k * t_s * x;
    let pos_pow = |coef: F, p: F| {
        let base = coef * scale;
        if base > F::zero() {
            base.powf(p)
        } else {
            F::zero()
        }
    };
    (pos_pow(e.a_tilde, e.b) + pos_pow(e.c_tilde, e.n) * alpha) / ctx.mu_ref
}
