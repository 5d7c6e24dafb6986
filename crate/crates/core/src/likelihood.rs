//! Hierarchical random-effects model and its Monte-Carlo likelihood.
//!
//! Each specimen draws its own damage-model effects from a population law
//! with hyperparameters θ. The likelihood of an observed failure time `T_i`
//! is the probability that the model failure time lands within a window of
//! `T_i`, estimated by the fraction of `N` effect draws that do.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::damage::{
    failure_time, us_failure_time, CanadianEffects, CanadianRamp, Effects, FailureOutcome, ModelKind, RampContext,
    SolverOptions, UsEffects,
};
use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::sampler::{Estimate, Target};
use crate::scalar::{logistic, Real};
use crate::special::ln_gamma;
use crate::stats;

/// One tested specimen.
#[derive(Debug, Clone, PartialEq)]
pub struct Specimen<F> {
    pub id: String,
    /// Failure time, seconds.
    pub time: F,
    /// Ramp loading rate.
    pub rate: F,
}

/// Failure times with their loading rates and the reference mean `μ_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F> {
    pub records: Vec<Specimen<F>>,
    pub mu_s: F,
}

impl<F: Real> Dataset<F> {
    /// Uses the sample mean of the failure times when `mu_s` is `None`.
    pub fn new(records: Vec<Specimen<F>>, mu_s: Option<F>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidInput("dataset has no records".into()));
        }
        for r in &records {
            if !(r.time > F::zero() && r.time.is_finite() && r.rate > F::zero() && r.rate.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "specimen {}: time and rate must be positive (got {}, {})",
                    r.id, r.time, r.rate
                )));
            }
        }
        let mu_s = mu_s.unwrap_or_else(|| stats::mean(&records.iter().map(|r| r.time).collect::<Vec<_>>()));
        if !(mu_s > F::zero() && mu_s.is_finite()) {
            return Err(Error::InvalidInput(format!("mu_s must be positive, got {mu_s}")));
        }
        Ok(Dataset { records, mu_s })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<F> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn rates(&self) -> Vec<F> {
        self.records.iter().map(|r| r.rate).collect()
    }

    pub fn mean_time(&self) -> F {
        stats::mean(&self.times())
    }

    pub fn median_rate(&self) -> F {
        stats::quantile(&self.rates(), F::lit(0.5))
    }

    /// The same data in a time unit `scale` times longer.
    pub fn rescaled(&self, scale: F) -> Self {
        Dataset {
            records: self
                .records
                .iter()
                .map(|r| Specimen {
                    id: r.id.clone(),
                    time: r.time / scale,
                    rate: r.rate * scale,
                })
                .collect(),
            mu_s: self.mu_s / scale,
        }
    }
}

/// US population law: `A ~ LogNormal(μ_A, σ_A²)`, `B ~ LogNormal(μ_B, σ_B²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsParams<F> {
    pub mu_a: F,
    pub sigma_a: F,
    pub mu_b: F,
    pub sigma_b: F,
}

/// Canadian population law. For the original model `ã`, `c̃` are Normal;
/// for the dimensionless variant they are log-normal. `b`, `n` are
/// log-normal and `σ₀` is logit-normal in both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CanadianParams<F> {
    pub mu_a: F,
    pub sigma_a: F,
    pub mu_b: F,
    pub sigma_b: F,
    pub mu_c: F,
    pub sigma_c: F,
    pub mu_n: F,
    pub sigma_n: F,
    pub mu_s0: F,
    pub sigma_s0: F,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelParams<F> {
    Us(UsParams<F>),
    Canadian(CanadianParams<F>),
    Canadian2(CanadianParams<F>),
}

const US_NAMES: [&str; 4] = ["mu_A", "sigma_A", "mu_B", "sigma_B"];
const CANADIAN_NAMES: [&str; 10] = [
    "mu_a", "sigma_a", "mu_b", "sigma_b", "mu_c", "sigma_c", "mu_n", "sigma_n", "mu_s0", "sigma_s0",
];

/// Parameter names in `(μ, σ)` pair order.
pub fn param_names(model: ModelKind) -> &'static [&'static str] {
    match model {
        ModelKind::Us => &US_NAMES,
        _ => &CANADIAN_NAMES,
    }
}

impl<F: Real> ModelParams<F> {
    pub fn model(&self) -> ModelKind {
        match self {
            ModelParams::Us(_) => ModelKind::Us,
            ModelParams::Canadian(_) => ModelKind::Canadian,
            ModelParams::Canadian2(_) => ModelKind::Canadian2,
        }
    }

    /// `[μ₁, σ₁, μ₂, σ₂, ...]` in [`param_names`] order.
    pub fn to_vec(&self) -> Vec<F> {
        match self {
            ModelParams::Us(p) => vec![p.mu_a, p.sigma_a, p.mu_b, p.sigma_b],
            ModelParams::Canadian(p) | ModelParams::Canadian2(p) => vec![
                p.mu_a, p.sigma_a, p.mu_b, p.sigma_b, p.mu_c, p.sigma_c, p.mu_n, p.sigma_n, p.mu_s0, p.sigma_s0,
            ],
        }
    }

    pub fn from_slice(model: ModelKind, v: &[F]) -> Result<Self> {
        let want = param_names(model).len();
        if v.len() != want {
            return Err(Error::InvalidInput(format!(
                "{model} takes {want} parameters, got {}",
                v.len()
            )));
        }
        Ok(match model {
            ModelKind::Us => ModelParams::Us(UsParams {
                mu_a: v[0],
                sigma_a: v[1],
                mu_b: v[2],
                sigma_b: v[3],
            }),
            _ => {
                let p = CanadianParams {
                    mu_a: v[0],
                    sigma_a: v[1],
                    mu_b: v[2],
                    sigma_b: v[3],
                    mu_c: v[4],
                    sigma_c: v[5],
                    mu_n: v[6],
                    sigma_n: v[7],
                    mu_s0: v[8],
                    sigma_s0: v[9],
                };
                if model == ModelKind::Canadian {
                    ModelParams::Canadian(p)
                } else {
                    ModelParams::Canadian2(p)
                }
            }
        })
    }

    /// All σ nonnegative (zero gives degenerate effects) and all values finite.
    pub fn validate(&self) -> Result<()> {
        let v = self.to_vec();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("parameters must be finite".into()));
        }
        if v.iter().skip(1).step_by(2).any(|&s| s < F::zero()) {
            return Err(Error::InvalidInput("sigma parameters must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Draws one specimen's effects. The draw order is fixed (`A, B` or
/// `a, b, c, n, σ₀`) so streams are reproducible.
pub fn sample_effects<F: Real, R: Rng + ?Sized>(params: &ModelParams<F>, rng: &mut R) -> Effects<F> {
    let mut normal = |mu: F, sigma: F| mu + sigma * F::std_normal(rng);
    match params {
        ModelParams::Us(p) => Effects::Us(UsEffects {
            a: normal(p.mu_a, p.sigma_a).exp(),
            b: normal(p.mu_b, p.sigma_b).exp(),
        }),
        ModelParams::Canadian(p) | ModelParams::Canadian2(p) => {
            let log_normal_coefs = matches!(params, ModelParams::Canadian2(_));
            let a = normal(p.mu_a, p.sigma_a);
            let b = normal(p.mu_b, p.sigma_b).exp();
            let c = normal(p.mu_c, p.sigma_c);
            let n = normal(p.mu_n, p.sigma_n).exp();
            let s0 = logistic(normal(p.mu_s0, p.sigma_s0));
            let (a_tilde, c_tilde) = if log_normal_coefs { (a.exp(), c.exp()) } else { (a, c) };
            Effects::Canadian(CanadianEffects {
                a_tilde,
                b,
                c_tilde,
                n,
                sigma0: s0,
            })
        }
    }
}

/// How a draw is tested against the failure-time window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    /// Solve for the failure time, then compare.
    Solve,
    /// For the Canadian models, compare the sign of `ln α` at the window
    /// edges instead; exact because damage at failure grows with `T`.
    Bracket,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodConfig<F> {
    /// Effect draws per specimen.
    pub draws: usize,
    /// Half-width of the failure-time window, seconds.
    pub window: F,
    pub solver: SolverOptions<F>,
    pub indicator: Indicator,
}

impl<F: Real> Default for LikelihoodConfig<F> {
    fn default() -> Self {
        LikelihoodConfig {
            draws: 10_000,
            window: F::lit(0.5),
            solver: SolverOptions::default(),
            indicator: Indicator::Bracket,
        }
    }
}

impl<F: Real> LikelihoodConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(Error::InvalidInput("draws per specimen must be at least 1".into()));
        }
        if !(self.window > F::zero()) {
            return Err(Error::InvalidInput("window must be positive".into()));
        }
        Ok(())
    }

    /// Same settings for data in a time unit `scale` times longer.
    pub fn rescaled(&self, scale: F) -> Self {
        LikelihoodConfig {
            window: self.window / scale,
            ..*self
        }
    }
}

fn draw_hits<F: Real>(
    params: &ModelParams<F>,
    e: &Effects<F>,
    spec: &Specimen<F>,
    ctx: &RampContext<F>,
    cfg: &LikelihoodConfig<F>,
) -> Result<bool> {
    let lo = spec.time - cfg.window;
    let hi = spec.time + cfg.window;
    let horizon = cfg.solver.horizon_factor * ctx.mu_ref;
    let in_window = |out: FailureOutcome<F>| matches!(out, FailureOutcome::FailsAt(t) if t >= lo && t <= hi && t <= horizon);
    let model = params.model();
    let outcome = match (e, cfg.indicator) {
        (Effects::Us(u), _) => us_failure_time(u, ctx.mu_ref),
        (Effects::Canadian(c), Indicator::Bracket) => {
            return match CanadianRamp::new(model, c, ctx) {
                Ok(Some(r)) => Ok(r.fails_within(lo, hi, horizon)),
                Ok(None) | Err(Error::InvalidEffect(_)) => Ok(false),
                Err(e) => Err(e),
            };
        }
        (Effects::Canadian(_), Indicator::Solve) => failure_time(model, e, ctx, &cfg.solver),
    };
    match outcome {
        Ok(out) => Ok(in_window(out)),
        Err(Error::InvalidEffect(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Number of the `cfg.draws` effect draws whose failure time lies within
/// `cfg.window` of the specimen's observed time.
///
/// Non-failing draws and draws with unusable effects (overflowed exponents)
/// never count.
pub fn specimen_hits<F: Real>(
    params: &ModelParams<F>,
    spec: &Specimen<F>,
    mu_s: F,
    cfg: &LikelihoodConfig<F>,
    key: StreamKey,
) -> Result<usize> {
    let ctx = RampContext::new(spec.rate, mu_s)?;
    let mut rng = key.rng();
    let mut hits = 0;
    for _ in 0..cfg.draws {
        let e = sample_effects(params, &mut rng);
        if draw_hits(params, &e, spec, &ctx, cfg)? {
            hits += 1;
        }
    }
    Ok(hits)
}

/// Hit counts of every specimen, specimen `i` drawing from `key.child(i)`.
pub fn specimen_counts<F: Real>(
    params: &ModelParams<F>,
    data: &Dataset<F>,
    cfg: &LikelihoodConfig<F>,
    key: StreamKey,
) -> Result<Vec<usize>> {
    cfg.validate()?;
    (0..data.len())
        .into_par_iter()
        .map(|i| specimen_hits(params, &data.records[i], data.mu_s, cfg, key.child(i as u64)))
        .collect()
}

/// `Σᵢ ln(countᵢ / N)`, or `-∞` when any specimen has no hits.
///
/// Specimen `i` uses the stream `key.child(i)`.
pub fn mc_log_likelihood<F: Real>(
    params: &ModelParams<F>,
    data: &Dataset<F>,
    cfg: &LikelihoodConfig<F>,
    key: StreamKey,
) -> Result<F> {
    let order: Vec<usize> = (0..data.len()).collect();
    match bounded_log_likelihood(params, data, cfg, key, &order, F::neg_infinity())? {
        Estimate::Value(v) => Ok(v),
        Estimate::Below => Ok(F::neg_infinity()),
    }
}

/// Like [`mc_log_likelihood`] but visits specimens in `order` and stops as
/// soon as the running sum falls below `floor`. Terms are nonpositive, so
/// `Below` is returned exactly when the full sum would be below `floor`,
/// whatever the chunking.
pub fn bounded_log_likelihood<F: Real>(
    params: &ModelParams<F>,
    data: &Dataset<F>,
    cfg: &LikelihoodConfig<F>,
    key: StreamKey,
    order: &[usize],
    floor: F,
) -> Result<Estimate<F>> {
    cfg.validate()?;
    let ln_n = F::from_count(cfg.draws).ln();
    let chunk = rayon::current_num_threads().max(1);
    let mut total = F::zero();
    for block in order.chunks(chunk) {
        let counts: Vec<usize> = block
            .par_iter()
            .map(|&i| specimen_hits(params, &data.records[i], data.mu_s, cfg, key.child(i as u64)))
            .collect::<Result<_>>()?;
        for c in counts {
            if c == 0 {
                return Ok(if floor == F::neg_infinity() {
                    Estimate::Value(F::neg_infinity())
                } else {
                    Estimate::Below
                });
            }
            total = total + F::from_count(c).ln() - ln_n;
            if total < floor {
                return Ok(Estimate::Below);
            }
        }
    }
    Ok(Estimate::Value(total))
}

/// Hyperprior: `Normal(0, mu_sd²)` on each μ and
/// `InvGamma(shape, scale)` on each σ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound(deserialize = "F: Real + Deserialize<'de>"))]
pub struct PriorSpec<F> {
    pub mu_sd: F,
    pub ig_shape: F,
    pub ig_scale: F,
}

impl<F: Real> Default for PriorSpec<F> {
    fn default() -> Self {
        PriorSpec {
            mu_sd: F::lit(100.0),
            ig_shape: F::lit(0.001),
            ig_scale: F::lit(0.001),
        }
    }
}

impl<F: Real> PriorSpec<F> {
    pub fn ln_normal(&self, mu: F) -> F {
        let z = mu / self.mu_sd;
        -F::lit(0.5) * z * z - self.mu_sd.ln() - F::lit(0.5) * F::TAU().ln()
    }

    /// Inverse-gamma log density at `v = σ²`.
    pub fn ln_inv_gamma(&self, v: F) -> F {
        if !(v > F::zero()) {
            return F::neg_infinity();
        }
        let (a, b) = (self.ig_shape, self.ig_scale);
        a * b.ln() - ln_gamma(a) - (a + F::one()) * v.ln() - b / v
    }

    /// Log density of `η = ln σ` when `σ²` is inverse-gamma: the density at
    /// `e^{2η}` plus the Jacobian `ln 2 + 2η`. Evaluated in `η` throughout so
    /// extreme values do not overflow.
    pub fn ln_log_sigma(&self, eta: F) -> F {
        let (a, b) = (self.ig_shape, self.ig_scale);
        let two = F::lit(2.0);
        a * b.ln() - ln_gamma(a) - (a + F::one()) * two * eta - b * (-two * eta).exp() + F::LN_2() + two * eta
    }

    /// Log prior of natural parameters `[μ₁, σ₁, ...]`.
    pub fn log_prior(&self, natural: &[F]) -> F {
        natural
            .chunks_exact(2)
            .map(|p| self.ln_normal(p[0]) + self.ln_inv_gamma(p[1] * p[1]) + if p[1] > F::zero() { F::zero() } else { F::neg_infinity() })
            .sum()
    }

    /// Log prior in sampler coordinates `[μ₁, ln σ₁, ...]`.
    pub fn log_prior_sampler(&self, theta: &[F]) -> F {
        theta
            .chunks_exact(2)
            .map(|p| self.ln_normal(p[0]) + self.ln_log_sigma(p[1]))
            .sum()
    }

    /// One draw in sampler coordinates.
    pub fn draw<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Vec<F> {
        let ig = Gamma::new(self.ig_shape.as_f64(), 1.0 / self.ig_scale.as_f64()).expect("valid gamma law");
        let mut out = Vec::with_capacity(dim);
        for _ in 0..dim / 2 {
            out.push(self.mu_sd * F::std_normal(rng));
            let precision: f64 = ig.sample(rng);
            out.push(F::lit(-0.5 * precision.ln()));
        }
        out
    }
}

pub fn log_prior<F: Real>(params: &ModelParams<F>, prior: &PriorSpec<F>) -> F {
    prior.log_prior(&params.to_vec())
}

/// `t · ln L̂ + ln π`. At `t = 0` no likelihood draws are made.
pub fn log_power_posterior<F: Real>(
    params: &ModelParams<F>,
    data: &Dataset<F>,
    cfg: &LikelihoodConfig<F>,
    prior: &PriorSpec<F>,
    t: F,
    key: StreamKey,
) -> Result<F> {
    if !(t >= F::zero() && t <= F::one()) {
        return Err(Error::InvalidInput(format!("temperature {t} outside [0, 1]")));
    }
    let lp = log_prior(params, prior);
    if t == F::zero() {
        return Ok(lp);
    }
    Ok(t * mc_log_likelihood(params, data, cfg, key)? + lp)
}

/// The hierarchical model as a sampling target over `(μ, ln σ)` pairs.
#[derive(Debug, Clone)]
pub struct HierarchicalTarget<F> {
    pub model: ModelKind,
    pub data: Dataset<F>,
    pub cfg: LikelihoodConfig<F>,
    pub prior: PriorSpec<F>,
    order: Vec<usize>,
}

impl<F: Real> HierarchicalTarget<F> {
    pub fn new(model: ModelKind, data: Dataset<F>, cfg: LikelihoodConfig<F>, prior: PriorSpec<F>) -> Result<Self> {
        cfg.validate()?;
        // Specimens far from the center are the likeliest to have no hits,
        // so they are visited first.
        let median = stats::quantile(&data.times(), F::lit(0.5));
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.sort_by(|&i, &j| {
            let di = (data.records[i].time - median).abs();
            let dj = (data.records[j].time - median).abs();
            dj.partial_cmp(&di).expect("finite times").then(i.cmp(&j))
        });
        Ok(HierarchicalTarget {
            model,
            data,
            cfg,
            prior,
            order,
        })
    }

    pub fn params(&self, theta: &[F]) -> Result<ModelParams<F>> {
        ModelParams::from_slice(self.model, &self.natural(theta))
    }

    /// Method-of-moments start: deterministic failure time at the typical
    /// loading rate equals the mean observed time, all σ = 0.1.
    pub fn moment_start(&self) -> Result<Vec<F>> {
        let t_bar = self.data.mean_time();
        let mu_s = self.data.mu_s;
        let tenth = F::lit(0.1);
        let natural = match self.model {
            ModelKind::Us => {
                let mut b0 = F::one();
                let mut a0 = F::zero();
                for _ in 0..20 {
                    a0 = (t_bar * b0.exp_m1() / (mu_s * b0)).ln();
                    if a0 > F::lit(0.05) {
                        break;
                    }
                    b0 = b0 * F::lit(2.0);
                }
                if !(a0 > F::zero()) {
                    return Err(Error::InitializationFailure { attempts: 0 });
                }
                vec![a0.ln(), tenth, b0.ln(), tenth]
            }
            ModelKind::Canadian | ModelKind::Canadian2 => {
                let k = self.data.median_rate();
                let ctx = RampContext::new(k, mu_s)?;
                let time_at = |ln_a: F| -> Result<Option<F>> {
                    let e = Effects::Canadian(CanadianEffects {
                        a_tilde: ln_a.exp(),
                        b: F::one(),
                        c_tilde: ln_a.exp(),
                        n: F::one(),
                        sigma0: F::lit(0.5),
                    });
                    Ok(failure_time(self.model, &e, &ctx, &self.cfg.solver)?.time())
                };
                // Failure time decreases in a.
                let (mut lo, mut hi) = (F::lit(-60.0), F::lit(60.0));
                for _ in 0..200 {
                    let mid = F::lit(0.5) * (lo + hi);
                    match time_at(mid)? {
                        Some(t) if t < t_bar => hi = mid,
                        _ => lo = mid,
                    }
                    if hi - lo < F::lit(1e-12) {
                        break;
                    }
                }
                let a = (F::lit(0.5) * (lo + hi)).exp();
                let (mu_a, sigma_a) = if self.model == ModelKind::Canadian {
                    (a, tenth * a)
                } else {
                    (a.ln(), tenth)
                };
                vec![mu_a, sigma_a, F::zero(), tenth, mu_a, sigma_a, F::zero(), tenth, F::zero(), tenth]
            }
        };
        Ok(to_sampler(&natural))
    }
}

fn to_sampler<F: Real>(natural: &[F]) -> Vec<F> {
    natural
        .chunks_exact(2)
        .flat_map(|p| [p[0], p[1].ln()])
        .collect()
}

impl<F: Real> Target<F> for HierarchicalTarget<F> {
    fn dim(&self) -> usize {
        param_names(self.model).len()
    }

    fn names(&self) -> Vec<String> {
        param_names(self.model).iter().map(|s| s.to_string()).collect()
    }

    fn log_prior(&self, theta: &[F]) -> F {
        self.prior.log_prior_sampler(theta)
    }

    fn log_likelihood(&self, theta: &[F], key: StreamKey, floor: F) -> Result<Estimate<F>> {
        let params = self.params(theta)?;
        bounded_log_likelihood(&params, &self.data, &self.cfg, key, &self.order, floor)
    }

    /// The moment start, then copies with every σ doubled repeatedly.
    fn initial_candidates(&self) -> Vec<Vec<F>> {
        let Ok(base) = self.moment_start() else {
            return Vec::new();
        };
        (0..7)
            .map(|j| {
                let bump = F::from_count(j) * F::LN_2();
                base.iter()
                    .enumerate()
                    .map(|(i, &v)| if i % 2 == 1 { v + bump } else { v })
                    .collect()
            })
            .collect()
    }

    fn prior_draw(&self, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<F> {
        self.prior.draw(self.dim(), rng)
    }

    /// Greedy random walk from the moment start on the smoothed estimate
    /// `Σᵢ ln((countᵢ + 0.01) / N)`, with the draws held fixed, until every
    /// specimen has a few hits or progress stalls. Returns the best point
    /// found if every specimen has at least one hit.
    fn search_start(&self, key: StreamKey) -> Result<Option<Vec<F>>> {
        const STEPS: usize = 1000;
        const MIN_HITS: usize = 5;
        const PATIENCE: usize = 200;
        let Ok(mut theta) = self.moment_start() else {
            return Ok(None);
        };
        let lik_key = key.child(0);
        let score = |theta: &[F]| -> Result<Option<(F, usize)>> {
            let Ok(params) = self.params(theta) else {
                return Ok(None);
            };
            let counts = match specimen_counts(&params, &self.data, &self.cfg, lik_key) {
                Ok(c) => c,
                Err(Error::ConvergenceFailure { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let n = F::from_count(self.cfg.draws);
            let s: F = counts.iter().map(|&c| ((F::from_count(c) + F::lit(0.01)) / n).ln()).sum();
            Ok(Some((s + self.log_prior(theta), counts.into_iter().min().unwrap_or(0))))
        };
        let Some((mut best, mut min_hits)) = score(&theta)? else {
            return Ok(None);
        };
        let scales = self.proposal_scales(&theta, F::one());
        let mut step_size = F::lit(0.2);
        let mut misses = 0;
        let mut since_best = 0;
        for step in 0..STEPS {
            if since_best == PATIENCE {
                break;
            }
            if min_hits >= MIN_HITS {
                return Ok(Some(theta));
            }
            let mut rng = key.path(&[1, step as u64]).rng();
            let cand: Vec<F> = theta
                .iter()
                .zip(&scales)
                .map(|(&x, &s)| x + step_size * s * F::std_normal(&mut rng))
                .collect();
            match score(&cand)? {
                Some((s, m)) if s > best => {
                    (theta, best, min_hits) = (cand, s, m);
                    step_size = (step_size * F::lit(1.5)).min(F::one());
                    misses = 0;
                    since_best = 0;
                }
                _ => {
                    misses += 1;
                    since_best += 1;
                    if misses == 20 {
                        step_size = (step_size * F::lit(0.5)).max(F::lit(0.01));
                        misses = 0;
                    }
                }
            }
        }
        Ok((min_hits > 0).then_some(theta))
    }

    fn proposal_scales(&self, init: &[F], base: F) -> Vec<F> {
        init.iter()
            .enumerate()
            .map(|(i, &v)| {
                let unit_carrying = self.model == ModelKind::Canadian && (i == 0 || i == 4);
                if unit_carrying && v != F::zero() {
                    base * v.abs()
                } else {
                    base
                }
            })
            .collect()
    }

    fn natural(&self, theta: &[F]) -> Vec<F> {
        theta
            .iter()
            .enumerate()
            .map(|(i, &v)| if i % 2 == 1 { v.exp() } else { v })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn us_params(sigma: f64) -> ModelParams<f64> {
        ModelParams::Us(UsParams {
            mu_a: 0.2,
            sigma_a: sigma,
            mu_b: 0.1,
            sigma_b: sigma,
        })
    }

    fn one_specimen(time: f64) -> Dataset<f64> {
        Dataset::new(
            vec![Specimen {
                id: "s1".into(),
                time,
                rate: 0.2,
            }],
            Some(31.0),
        )
        .unwrap()
    }

    fn cfg(draws: usize) -> LikelihoodConfig<f64> {
        LikelihoodConfig {
            draws,
            ..LikelihoodConfig::default()
        }
    }

    #[test]
    fn degenerate_effects_are_deterministic() {
        let mut rng = StreamKey::root(1).rng();
        let e = sample_effects(&us_params(0.0), &mut rng);
        assert_eq!(e, Effects::Us(UsEffects { a: 0.2_f64.exp(), b: 0.1_f64.exp() }));
    }

    #[test]
    fn log_a_mean_follows_law() {
        let p = us_params(0.5);
        let mut rng = StreamKey::root(2).rng();
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            if let Effects::Us(e) = sample_effects(&p, &mut rng) {
                sum += e.a.ln();
            }
        }
        assert!((sum / n as f64 - 0.2).abs() < 3.0 * 0.5 / 1e3);
    }

    #[test]
    fn sigma0_stays_in_unit_interval() {
        let p = ModelParams::Canadian(CanadianParams {
            mu_a: 0.6,
            sigma_a: 0.3,
            mu_b: 1.0,
            sigma_b: 0.5,
            mu_c: 1.0,
            sigma_c: 0.5,
            mu_n: 0.0,
            sigma_n: 0.5,
            mu_s0: 0.0,
            sigma_s0: 20.0,
        });
        let mut rng = StreamKey::root(3).rng();
        for _ in 0..10_000 {
            let Effects::Canadian(e) = sample_effects(&p, &mut rng) else { unreachable!() };
            assert!(e.sigma0 >= 0.0 && e.sigma0 <= 1.0);
        }
    }

    #[test]
    fn degenerate_likelihood_zero_or_neg_inf() {
        let p = us_params(0.0);
        let t = us_failure_time(&UsEffects { a: 0.2_f64.exp(), b: 0.1_f64.exp() }, 31.0)
            .unwrap()
            .time()
            .unwrap();
        let key = StreamKey::root(4);
        assert_eq!(mc_log_likelihood(&p, &one_specimen(t + 0.3), &cfg(50), key).unwrap(), 0.0);
        assert_eq!(mc_log_likelihood(&p, &one_specimen(t + 0.7), &cfg(50), key).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn estimate_matches_brute_force_probability() {
        let p = us_params(0.1);
        let data = one_specimen(31.0);
        // Brute force with an unrelated stream.
        let big = 2_000_000;
        let hits = specimen_hits(&p, &data.records[0], 31.0, &cfg(big), StreamKey::root(99)).unwrap();
        let prob = hits as f64 / big as f64;
        let n = 20_000;
        let est = mc_log_likelihood(&p, &data, &cfg(n), StreamKey::root(5)).unwrap().exp();
        let se = (prob * (1.0 - prob) / n as f64).sqrt();
        assert!((est - prob).abs() < 3.0 * se, "{est} vs {prob} ± {se}");
    }

    #[test]
    fn bound_stops_early_and_agrees() {
        let p = us_params(0.1);
        let t0 = us_failure_time(&UsEffects { a: 0.2_f64.exp(), b: 0.1_f64.exp() }, 31.0)
            .unwrap()
            .time()
            .unwrap();
        let recs: Vec<Specimen<f64>> = [-1.5, -0.5, 0.0, 1.0]
            .iter()
            .enumerate()
            .map(|(i, &d)| Specimen {
                id: format!("s{i}"),
                time: t0 + d,
                rate: 0.2,
            })
            .collect();
        let data = Dataset::new(recs, Some(31.0)).unwrap();
        let c = cfg(500);
        let key = StreamKey::root(6);
        let full = mc_log_likelihood(&p, &data, &c, key).unwrap();
        let order = [3, 0, 2, 1];
        match bounded_log_likelihood(&p, &data, &c, key, &order, full - 1e-9).unwrap() {
            Estimate::Value(v) => assert!((v - full).abs() < 1e-12),
            Estimate::Below => panic!("full value is above the floor"),
        }
        assert_eq!(bounded_log_likelihood(&p, &data, &c, key, &order, full + 1e-6).unwrap(), Estimate::Below);
    }

    #[test]
    fn bracket_indicator_matches_root_solve() {
        let p = ModelParams::Canadian(CanadianParams {
            mu_a: 0.65,
            sigma_a: 0.1,
            mu_b: 3.0_f64.ln(),
            sigma_b: 0.2,
            mu_c: 1.0,
            sigma_c: 0.5,
            mu_n: 0.0,
            sigma_n: 0.3,
            mu_s0: 0.0,
            sigma_s0: 0.5,
        });
        let spec = Specimen {
            id: "x".into(),
            time: 30.0,
            rate: 0.2,
        };
        for (i, window) in [0.5, 3.0, 10.0].into_iter().enumerate() {
            let mut c = cfg(3000);
            c.window = window;
            let key = StreamKey::root(7).child(i as u64);
            let fast = specimen_hits(&p, &spec, 31.0, &c, key).unwrap();
            c.indicator = Indicator::Solve;
            let slow = specimen_hits(&p, &spec, 31.0, &c, key).unwrap();
            assert_eq!(fast, slow);
            assert!(fast > 0);
        }
    }

    #[test]
    fn prior_terms() {
        let prior = PriorSpec::default();
        let sig = [0.5_f64, 1.3];
        let nat = [0.0, sig[0], 0.0, sig[1]];
        let want: f64 = 2.0 * (-(100.0_f64).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln())
            + sig
                .iter()
                .map(|s| {
                    let v = s * s;
                    0.001 * 0.001_f64.ln() - ln_gamma(0.001) - 1.001 * v.ln() - 0.001 / v
                })
                .sum::<f64>();
        assert!((prior.log_prior(&nat) - want).abs() < 1e-10);
        let shifted = [100.0, sig[0], 0.0, sig[1]];
        assert!((prior.log_prior(&nat) - prior.log_prior(&shifted) - 0.5).abs() < 1e-12);
        assert_eq!(prior.log_prior(&[0.0, 0.0, 0.0, 1.0]), f64::NEG_INFINITY);
        // Sampler coordinates add the change-of-variable term.
        let eta = [0.0, sig[0].ln(), 0.0, sig[1].ln()];
        let jac: f64 = sig.iter().map(|s| 2.0_f64.ln() + 2.0 * s.ln()).sum();
        assert!((prior.log_prior_sampler(&eta) - (want + jac)).abs() < 1e-10);
        assert!(prior.log_prior_sampler(&[0.0, -400.0]).is_finite() || prior.log_prior_sampler(&[0.0, -400.0]) == f64::NEG_INFINITY);
        assert!(prior.log_prior_sampler(&[0.0, 400.0]).is_finite());
    }

    #[test]
    fn power_posterior_weights() {
        let p = us_params(0.1);
        let data = one_specimen(31.0);
        let c = cfg(2000);
        let prior = PriorSpec::default();
        let key = StreamKey::root(8);
        let lp = log_prior(&p, &prior);
        assert_eq!(log_power_posterior(&p, &data, &c, &prior, 0.0, key).unwrap(), lp);
        let ll = mc_log_likelihood(&p, &data, &c, key).unwrap();
        let half = log_power_posterior(&p, &data, &c, &prior, 0.5, key).unwrap();
        assert!((half - (0.5 * ll + lp)).abs() < 1e-12);
        let one = log_power_posterior(&p, &data, &c, &prior, 1.0, key).unwrap();
        assert!((one - (ll + lp)).abs() < 1e-12);
    }

    #[test]
    fn rescaled_data_gives_same_estimate() {
        let p = ModelParams::Canadian(CanadianParams {
            mu_a: 0.65,
            sigma_a: 0.1,
            mu_b: 3.0_f64.ln(),
            sigma_b: 0.2,
            mu_c: 1.0,
            sigma_c: 0.5,
            mu_n: 0.0,
            sigma_n: 0.3,
            mu_s0: 0.0,
            sigma_s0: 0.5,
        });
        let data = one_specimen(30.0);
        let c = cfg(2000);
        let key = StreamKey::root(10);
        let sec = mc_log_likelihood(&p, &data, &c, key).unwrap();
        // Canadian coefficients carry inverse stress units and are unchanged;
        // only time and rate rescale.
        let min = mc_log_likelihood(&p, &data.rescaled(60.0), &c.rescaled(60.0), key).unwrap();
        assert!(sec.is_finite());
        assert!((sec - min).abs() < 1e-9, "{sec} vs {min}");
    }

    #[test]
    fn moment_start_hits_mean_time() {
        for model in ModelKind::ALL {
            let data = Dataset::new(
                (0..5)
                    .map(|i| Specimen {
                        id: i.to_string(),
                        time: 29.0 + i as f64,
                        rate: 0.2,
                    })
                    .collect(),
                None,
            )
            .unwrap();
            let target = HierarchicalTarget::new(model, data, cfg(100), PriorSpec::default()).unwrap();
            let theta = target.moment_start().unwrap();
            let mut nat = target.natural(&theta);
            for s in nat.iter_mut().skip(1).step_by(2) {
                *s = 0.0;
            }
            let p = ModelParams::from_slice(model, &nat).unwrap();
            let e = sample_effects(&p, &mut StreamKey::root(0).rng());
            let ctx = RampContext::new(0.2, 31.0).unwrap();
            let t = failure_time(model, &e, &ctx, &SolverOptions::default()).unwrap().time().unwrap();
            assert!((t - 31.0).abs() < 1e-6, "{model}: {t}");
        }
    }
}
