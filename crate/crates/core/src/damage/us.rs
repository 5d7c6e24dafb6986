use super::{FailureOutcome, UsEffects};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Below this `|B|` the ramp formulas switch to their Taylor expansions.
const SMALL_B: f64 = 1e-8;

/// `ln(e^x - 1)` for `x > 0`.
fn ln_expm1<F: Real>(x: F) -> F {
    if x > F::one() {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// Ramp failure time `T_s = μ_s B e^A / (e^B - 1)`.
///
/// For `|B| < 1e-8` the ratio `B / (e^B - 1)` is replaced by
/// `1 - B/2 + B²/12`, which tends to `μ_s e^A` as `B → 0`. Failure times too
/// large to represent are reported as non-failing.
pub fn us_failure_time<F: Real>(effects: &UsEffects<F>, mu_s: F) -> Result<FailureOutcome<F>> {
    let UsEffects { a, b } = *effects;
    if !(mu_s > F::zero()) {
        return Err(Error::InvalidInput(format!("mu_s must be positive, got {mu_s}")));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidEffect(format!("A = {a}, B = {b}")));
    }
    let small = F::lit(SMALL_B);
    let ln_t = if b.abs() < small {
        let ratio = F::one() - b / F::lit(2.0) + b * b / F::lit(12.0);
        mu_s.ln() + a + ratio.ln()
    } else if b > F::zero() {
        mu_s.ln() + b.ln() + a - ln_expm1(b)
    } else {
        return Err(Error::InvalidEffect(format!("B must be positive, got {b}")));
    };
    let t = ln_t.exp();
    Ok(if t.is_finite() {
        FailureOutcome::FailsAt(t)
    } else {
        FailureOutcome::NonFailing
    })
}

/// Damage along a ramp: `α(t) = (e^{Bt/T_s} - 1) / (e^B - 1)`.
pub fn us_damage_ramp<F: Real>(t: F, t_s: F, b: F) -> Result<F> {
    if !(t_s > F::zero()) {
        return Err(Error::Domain(format!("failure time must be positive, got {t_s}")));
    }
    if !(t >= F::zero() && t <= t_s) {
        return Err(Error::Domain(format!("t = {t} outside [0, {t_s}]")));
    }
    let x = t / t_s;
    let alpha = if b.abs() < F::lit(SMALL_B) {
        x * (F::one() + b * (x - F::one()) / F::lit(2.0))
    } else if b > F::one() {
        // Scaled by e^{-B} to stay finite for large B.
        (b * (x - F::one())).exp() * (-b * x).exp_m1() / (-b).exp_m1()
    } else {
        (b * x).exp_m1() / b.exp_m1()
    };
    Ok(alpha.max(F::zero()).min(F::one()))
}

/// Damage rate at the start of a ramp, `1 / (μ_s e^A)`.
pub fn us_initial_rate<F: Real>(effects: &UsEffects<F>, mu_s: F) -> F {
    (-effects.a).exp() / mu_s
}

/// Damage rate at failure, `(B / T_s) e^B / (e^B - 1)`.
pub fn us_terminal_rate<F: Real>(t_s: F, b: F) -> F {
    if b.abs() < F::lit(SMALL_B) {
        (F::one() + b / F::lit(2.0)) / t_s
    } else {
        b / t_s / -(-b).exp_m1()
    }
}
