//! Adaptive Dormand–Prince 5(4) integration with terminal events.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions<F> {
    pub rtol: F,
    pub atol: F,
    /// First trial step; a fraction of the span when `None`.
    pub initial_step: Option<F>,
    pub max_steps: usize,
    /// Record every accepted step in the returned trajectory.
    pub record: bool,
}

impl<F: Real> Default for OdeOptions<F> {
    fn default() -> Self {
        OdeOptions {
            rtol: F::floor_tol(F::lit(1e-10)),
            atol: F::floor_tol(F::lit(1e-13)),
            initial_step: None,
            max_steps: 1_000_000,
            record: true,
        }
    }
}

/// Accepted states of one integration run.
#[derive(Debug, Clone)]
pub struct Solution<F, const N: usize> {
    pub t: Vec<F>,
    pub y: Vec<[F; N]>,
    /// Time and state where the event function first reached zero.
    pub event: Option<(F, [F; N])>,
    pub steps: usize,
    pub rejected: usize,
}

impl<F: Real, const N: usize> Solution<F, N> {
    pub fn last(&self) -> (F, [F; N]) {
        let i = self.t.len() - 1;
        (self.t[i], self.y[i])
    }
}

const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B_STAR: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn combo<F: Real, const N: usize>(y: &[F; N], h: F, coef: &[f64], k: &[[F; N]]) -> [F; N] {
    let mut out = *y;
    for (c, ki) in coef.iter().zip(k) {
        if *c == 0.0 {
            continue;
        }
        let hc = h * F::lit(*c);
        for j in 0..N {
            out[j] = out[j] + hc * ki[j];
        }
    }
    out
}

/// One Dormand–Prince step from `(t, y)` with slope `k1 = f(t, y)`.
/// Returns the fifth-order state, its slope and the scaled error norm.
fn dp_step<F: Real, const N: usize>(
    f: &impl Fn(F, &[F; N]) -> [F; N],
    t: F,
    y: &[F; N],
    k1: &[F; N],
    h: F,
    opts: &OdeOptions<F>,
) -> ([F; N], [F; N], F) {
    let mut k = [[F::zero(); N]; 7];
    k[0] = *k1;
    let rows: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
    for (s, row) in rows.iter().enumerate() {
        let ys = combo(y, h, row, &k[..row.len()]);
        k[s + 1] = f(t + h * F::lit(C[s]), &ys);
    }
    let y5 = combo(y, h, &B[..6], &k[..6]);
    k[6] = f(t + h, &y5);
    let mut err = F::zero();
    for j in 0..N {
        let mut e = F::zero();
        for s in 0..7 {
            e = e + F::lit(B[s] - B_STAR[s]) * k[s][j];
        }
        let scale = opts.atol + opts.rtol * y[j].abs().max(y5[j].abs());
        err = err.max((h * e).abs() / scale);
    }
    (y5, k[6], err)
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`.
///
/// Steps never straddle an entry of `breakpoints`, so kinks in the right-hand
/// side are met exactly. When `event` is given, integration stops at the
/// first time its value turns nonnegative; the crossing is localized by
/// bisecting the length of the final step.
pub fn integrate<F, const N: usize>(
    f: impl Fn(F, &[F; N]) -> [F; N],
    t0: F,
    y0: [F; N],
    t_end: F,
    breakpoints: &[F],
    event: Option<&dyn Fn(F, &[F; N]) -> F>,
    opts: &OdeOptions<F>,
) -> Result<Solution<F, N>>
where
    F: Real,
{
    let mut stops: Vec<F> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > t0 && b < t_end)
        .collect();
    stops.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    stops.push(t_end);

    let mut sol = Solution {
        t: vec![t0],
        y: vec![y0],
        event: None,
        steps: 0,
        rejected: 0,
    };
    if let Some(g) = event {
        if g(t0, &y0) >= F::zero() {
            sol.event = Some((t0, y0));
            return Ok(sol);
        }
    }

    let span = t_end - t0;
    let mut h = opts.initial_step.unwrap_or(span * F::lit(1e-3));
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut stop_idx = 0;
    let safety = F::lit(0.9);
    let grow = F::lit(5.0);
    let shrink = F::lit(0.2);
    let fifth = F::lit(-0.2);

    while t < t_end {
        if sol.steps + sol.rejected >= opts.max_steps {
            return Err(Error::StepFailure {
                t: t.as_f64(),
                reason: format!("step budget of {} exhausted", opts.max_steps),
            });
        }
        let target = stops[stop_idx];
        let room = target - t;
        let clipped = h >= room;
        let step = if clipped { room } else { h };
        let min_step = F::epsilon() * F::lit(64.0) * t.abs().max(span);
        if step < min_step && !clipped {
            return Err(Error::StepFailure {
                t: t.as_f64(),
                reason: format!("step size {:e} below resolution", step.as_f64()),
            });
        }

        let (y_new, k_new, err) = dp_step(&f, t, &y, &k1, step, opts);
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            sol.rejected += 1;
            h = step * shrink;
            continue;
        }
        let factor = if err == F::zero() {
            grow
        } else {
            (safety * err.powf(fifth)).max(shrink).min(grow)
        };
        if err > F::one() {
            sol.rejected += 1;
            h = step * factor.min(F::one());
            continue;
        }

        let t_new = if clipped { target } else { t + step };
        if let Some(g) = event {
            if g(t_new, &y_new) >= F::zero() {
                let (te, ye) = localize(&f, g, t, &y, &k1, step, opts);
                sol.steps += 1;
                if opts.record {
                    sol.t.push(te);
                    sol.y.push(ye);
                }
                sol.event = Some((te, ye));
                return Ok(sol);
            }
        }

        sol.steps += 1;
        t = t_new;
        y = y_new;
        k1 = k_new;
        if opts.record || t >= t_end {
            sol.t.push(t);
            sol.y.push(y);
        }
        if clipped {
            stop_idx = (stop_idx + 1).min(stops.len() - 1);
            // Slope is discontinuous at a breakpoint; resample it.
            k1 = f(t, &y);
            h = h.max(step * factor);
        } else {
            h = step * factor;
        }
    }
    Ok(sol)
}

/// Bisects the step length from `(t, y)` until the event crossing is
/// pinned to a few ulps in `t`.
fn localize<F: Real, const N: usize>(
    f: &impl Fn(F, &[F; N]) -> [F; N],
    g: &dyn Fn(F, &[F; N]) -> F,
    t: F,
    y: &[F; N],
    k1: &[F; N],
    h: F,
    opts: &OdeOptions<F>,
) -> (F, [F; N]) {
    let mut lo = F::zero();
    let mut hi = h;
    let mut y_hi = dp_step(f, t, y, k1, hi, opts).0;
    let resolution = F::epsilon() * F::lit(4.0) * (t.abs() + h);
    for _ in 0..200 {
        if hi - lo <= resolution {
            break;
        }
        let mid = F::lit(0.5) * (lo + hi);
        let y_mid = dp_step(f, t, y, k1, mid, opts).0;
        if g(t + mid, &y_mid) >= F::zero() {
            hi = mid;
            y_hi = y_mid;
        } else {
            lo = mid;
        }
    }
    (t + hi, y_hi)
}
