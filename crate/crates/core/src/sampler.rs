//! Pseudo-marginal Metropolis–Hastings under parallel tempering.
//!
//! `K` chains target the power posteriors `L(θ)^t π(θ)` on a ladder
//! `0 = t₀ < … < t_{K-1} = 1`. The rung means of the log-likelihood
//! estimate integrate over `t` to the log marginal likelihood.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{tag, StreamKey};
use crate::scalar::Real;
use crate::stats;

/// A log-likelihood estimate evaluated against an acceptance floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimate<F> {
    Value(F),
    /// The estimate is known to fall below the floor; evaluation stopped.
    Below,
}

/// Density the sampler can explore, in the coordinates it walks in.
pub trait Target<F: Real>: Sync {
    fn dim(&self) -> usize;

    fn names(&self) -> Vec<String>;

    fn log_prior(&self, theta: &[F]) -> F;

    /// Log-likelihood estimate from the stream `key`. May return `Below`
    /// whenever the estimate is less than `floor`.
    fn log_likelihood(&self, theta: &[F], key: StreamKey, floor: F) -> Result<Estimate<F>>;

    /// Deterministic starting points, tried in order.
    fn initial_candidates(&self) -> Vec<Vec<F>>;

    /// Fallback starting point.
    fn prior_draw(&self, rng: &mut ChaCha8Rng) -> Vec<F>;

    /// Searched start, tried once after the deterministic candidates.
    fn search_start(&self, _key: StreamKey) -> Result<Option<Vec<F>>> {
        Ok(None)
    }

    /// Initial per-component random-walk scales.
    fn proposal_scales(&self, init: &[F], base: F) -> Vec<F> {
        vec![base; init.len()]
    }

    /// Maps sampler coordinates to the reported parameters.
    fn natural(&self, theta: &[F]) -> Vec<F> {
        theta.to_vec()
    }
}

/// Strictly increasing temperatures from exactly 0 to exactly 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemperatureLadder<F> {
    temps: Vec<F>,
}

impl<F: Real> TemperatureLadder<F> {
    /// `tᵢ = (i / (K-1))^exponent`.
    pub fn power(rungs: usize, exponent: F) -> Result<Self> {
        if rungs < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 rungs, got {rungs}")));
        }
        if !(exponent > F::zero()) {
            return Err(Error::InvalidInput("ladder exponent must be positive".into()));
        }
        let last = F::from_count(rungs - 1);
        let mut temps: Vec<F> = (0..rungs).map(|i| (F::from_count(i) / last).powf(exponent)).collect();
        temps[0] = F::zero();
        temps[rungs - 1] = F::one();
        Self::from_temps(temps)
    }

    pub fn from_temps(temps: Vec<F>) -> Result<Self> {
        let ok = temps.len() >= 2
            && temps[0] == F::zero()
            && temps[temps.len() - 1] == F::one()
            && temps.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(Error::InvalidInput(
                "temperatures must increase strictly from 0 to 1".into(),
            ));
        }
        Ok(TemperatureLadder { temps })
    }

    pub fn temps(&self) -> &[F] {
        &self.temps
    }

    pub fn len(&self) -> usize {
        self.temps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig<F> {
    /// Iterations per rung, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub rungs: usize,
    pub ladder_exponent: F,
    /// Base random-walk scale; overridden per component by `proposal_scales`.
    pub proposal_scale: F,
    pub proposal_scales: Option<Vec<F>>,
    /// Acceptance rate targeted by burn-in adaptation; `None` disables it.
    pub target_acceptance: Option<F>,
    /// Learn a full proposal covariance from each rung's burn-in draws.
    pub adapt_covariance: bool,
    /// Swap sweep every this many iterations.
    pub swap_stride: usize,
    pub seed: u64,
    /// Starting points tried (fixed candidates, one searched start, then prior draws).
    pub init_attempts: usize,
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    pub threads: Option<usize>,
}

impl<F: Real> Default for SamplerConfig<F> {
    fn default() -> Self {
        SamplerConfig {
            iterations: 10_000,
            burn_in: 1_000,
            rungs: 20,
            ladder_exponent: F::lit(5.0),
            proposal_scale: F::lit(0.1),
            proposal_scales: None,
            target_acceptance: Some(F::lit(0.25)),
            adapt_covariance: true,
            swap_stride: 1,
            seed: 1,
            init_attempts: 200,
            threads: None,
        }
    }
}

impl<F: Real> SamplerConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidInput(format!(
                "burn_in ({}) must be less than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.rungs < 2 {
            return Err(Error::InvalidInput("need at least 2 rungs".into()));
        }
        if self.swap_stride == 0 {
            return Err(Error::InvalidInput("swap stride must be at least 1".into()));
        }
        if !(self.proposal_scale > F::zero()) {
            return Err(Error::InvalidInput("proposal scale must be positive".into()));
        }
        if let Some(t) = self.target_acceptance {
            if !(t > F::zero() && t < F::one()) {
                return Err(Error::InvalidInput("target acceptance must lie in (0, 1)".into()));
            }
        }
        Ok(())
    }

    pub fn ladder(&self) -> Result<TemperatureLadder<F>> {
        TemperatureLadder::power(self.rungs, self.ladder_exponent)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState<F> {
    pub theta: Vec<F>,
    pub log_lik: F,
    pub log_prior: F,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted,
    Rejected,
    /// The solver failed on the proposal, which was then rejected.
    SolverFailure,
}

/// Shape of the Gaussian random-walk increment.
#[derive(Debug, Clone, PartialEq)]
pub enum ProposalShape<F> {
    /// Independent increments with these standard deviations.
    Diagonal(Vec<F>),
    /// Correlated increments `L z`, with `L` lower triangular and stored
    /// row-major.
    Factor { dim: usize, lower: Vec<F> },
}

/// Random-walk proposal `θ + e^{log_scale} · step`.
pub fn propose<F: Real>(theta: &[F], shape: &ProposalShape<F>, log_scale: F, key: StreamKey) -> Vec<F> {
    let mut rng = key.rng();
    let g = log_scale.exp();
    let z: Vec<F> = theta.iter().map(|_| F::std_normal(&mut rng)).collect();
    match shape {
        ProposalShape::Diagonal(scales) => theta
            .iter()
            .zip(scales)
            .zip(&z)
            .map(|((&x, &s), &z)| x + g * s * z)
            .collect(),
        ProposalShape::Factor { dim, lower } => (0..*dim)
            .map(|i| {
                let step: F = (0..=i).map(|j| lower[i * dim + j] * z[j]).sum();
                theta[i] + g * step
            })
            .collect(),
    }
}

/// Cholesky factor of a symmetric `dim × dim` matrix, or `None` if it is
/// not positive definite.
pub fn cholesky<F: Real>(dim: usize, a: &[F]) -> Option<Vec<F>> {
    let mut l = vec![F::zero(); dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut sum = a[i * dim + j];
            for k in 0..j {
                sum = sum - l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if !(sum > F::zero()) || !sum.is_finite() {
                    return None;
                }
                l[i * dim + i] = sum.sqrt();
            } else {
                l[i * dim + j] = sum / l[j * dim + j];
            }
        }
    }
    Some(l)
}

/// Running mean and covariance of visited states.
#[derive(Debug, Clone)]
struct Moments<F> {
    n: usize,
    mean: Vec<F>,
    m2: Vec<F>,
}

impl<F: Real> Moments<F> {
    fn new(dim: usize) -> Self {
        Moments {
            n: 0,
            mean: vec![F::zero(); dim],
            m2: vec![F::zero(); dim * dim],
        }
    }

    fn push(&mut self, x: &[F]) {
        let d = self.mean.len();
        self.n += 1;
        let n = F::from_count(self.n);
        let delta: Vec<F> = x.iter().zip(&self.mean).map(|(&a, &m)| a - m).collect();
        for (m, &dl) in self.mean.iter_mut().zip(&delta) {
            *m = *m + dl / n;
        }
        for i in 0..d {
            for j in 0..d {
                self.m2[i * d + j] = self.m2[i * d + j] + delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    /// Factor of `2.38²/d · Σ`, lightly regularized by `floor²` on the diagonal.
    fn factor(&self, floor: &[F]) -> Option<Vec<F>> {
        let d = self.mean.len();
        let c = F::lit(2.38 * 2.38) / F::from_count(d) / F::from_count(self.n - 1);
        let mut a: Vec<F> = self.m2.iter().map(|&v| c * v).collect();
        for i in 0..d {
            a[i * d + i] = a[i * d + i] + floor[i] * floor[i];
        }
        cholesky(d, &a)
    }
}

/// Metropolis–Hastings acceptance of `proposal` at temperature `t`.
///
/// The likelihood estimate is drawn only when the prior allows acceptance,
/// and is evaluated against the floor it must clear. A fresh estimate is
/// kept with the state (pseudo-marginal). At `t = 0` the estimate must
/// still be finite.
pub fn mh_accept<F: Real, T: Target<F> + ?Sized>(
    target: &T,
    state: &ChainState<F>,
    proposal: Vec<F>,
    t: F,
    lik_key: StreamKey,
    accept_key: StreamKey,
) -> Result<(ChainState<F>, StepOutcome)> {
    let keep = |o| Ok((state.clone(), o));
    let lp = target.log_prior(&proposal);
    if !lp.is_finite() {
        return keep(StepOutcome::Rejected);
    }
    let ln_u = (F::one() - F::unit(&mut accept_key.rng())).ln();
    let d_prior = lp - state.log_prior;
    let floor = if t == F::zero() {
        if ln_u >= d_prior {
            return keep(StepOutcome::Rejected);
        }
        F::min_value()
    } else {
        state.log_lik + (ln_u - d_prior) / t
    };
    match target.log_likelihood(&proposal, lik_key, floor) {
        Ok(Estimate::Value(ll)) if ll.is_finite() && ll >= floor => Ok((
            ChainState {
                theta: proposal,
                log_lik: ll,
                log_prior: lp,
            },
            StepOutcome::Accepted,
        )),
        Ok(_) => keep(StepOutcome::Rejected),
        Err(Error::ConvergenceFailure { .. }) => keep(StepOutcome::SolverFailure),
        Err(e) => Err(e),
    }
}

/// Log acceptance probability of exchanging the states of rungs at
/// temperatures `t_i`, `t_j`.
pub fn swap_log_acceptance<F: Real>(t_i: F, t_j: F, log_lik_i: F, log_lik_j: F) -> F {
    let v = (t_i - t_j) * (log_lik_j - log_lik_i);
    if v.is_nan() {
        F::zero()
    } else {
        v.min(F::zero())
    }
}

/// Draws retained from one rung.
#[derive(Debug, Clone, PartialEq)]
pub struct RungTrace<F> {
    pub temperature: F,
    /// Retained draws in natural coordinates, one row per iteration.
    pub theta: Vec<Vec<F>>,
    pub log_lik: Vec<F>,
    /// Post-burn-in acceptance rate.
    pub acceptance: F,
    pub solver_failures: usize,
    /// Adapted proposal multiplier, frozen after burn-in.
    pub final_log_scale: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples<F> {
    pub names: Vec<String>,
    pub ladder: Vec<F>,
    pub iterations: usize,
    pub burn_in: usize,
    pub rungs: Vec<RungTrace<F>>,
    /// Accepted fraction of swaps for each adjacent pair.
    pub swap_rates: Vec<F>,
    pub init_attempts: usize,
}

impl<F: Real> PosteriorSamples<F> {
    /// The `t = 1` rung.
    pub fn posterior(&self) -> &RungTrace<F> {
        self.rungs.last().expect("at least two rungs")
    }

    pub fn retained(&self) -> usize {
        self.iterations - self.burn_in
    }

    pub fn column(&self, rung: usize, name: &str) -> Option<Vec<F>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(self.rungs.get(rung)?.theta.iter().map(|row| row[j]).collect())
    }
}

/// Progress report passed to observers once per iteration.
#[derive(Debug, Clone, Copy)]
pub struct Progress {
    pub iteration: usize,
    pub iterations: usize,
}

const SEARCH_RETRIES: usize = 10;

/// Finds the first start with finite prior and likelihood.
pub fn initialize<F: Real, T: Target<F> + ?Sized>(target: &T, cfg: &SamplerConfig<F>) -> Result<(ChainState<F>, usize)> {
    let root = StreamKey::root(cfg.seed).child(tag::INIT);
    let mut candidates = target.initial_candidates().into_iter();
    let mut searched: Option<Option<Vec<F>>> = None;
    let mut retries = 0;
    for attempt in 0..cfg.init_attempts {
        let found = match candidates.next() {
            Some(c) => Some(c),
            None => {
                if searched.is_none() {
                    searched = Some(target.search_start(root.child(2))?);
                }
                match &searched {
                    Some(Some(t)) if retries < SEARCH_RETRIES => {
                        retries += 1;
                        Some(t.clone())
                    }
                    _ => None,
                }
            }
        };
        let theta = found.unwrap_or_else(|| target.prior_draw(&mut root.path(&[0, attempt as u64]).rng()));
        if theta.len() != target.dim() {
            return Err(Error::InvalidInput(format!(
                "start has {} components, target has {}",
                theta.len(),
                target.dim()
            )));
        }
        let lp = target.log_prior(&theta);
        if !lp.is_finite() {
            continue;
        }
        match target.log_likelihood(&theta, root.path(&[1, attempt as u64]), F::neg_infinity()) {
            Ok(Estimate::Value(ll)) if ll.is_finite() => {
                return Ok((
                    ChainState {
                        theta,
                        log_lik: ll,
                        log_prior: lp,
                    },
                    attempt + 1,
                ))
            }
            Ok(_) | Err(Error::ConvergenceFailure { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Err(Error::InitializationFailure {
        attempts: cfg.init_attempts,
    })
}

struct Rung<F> {
    t: F,
    state: ChainState<F>,
    shape: ProposalShape<F>,
    moments: Moments<F>,
    log_scale: F,
    accepted: usize,
    failures: usize,
    theta: Vec<Vec<F>>,
    log_lik: Vec<F>,
}

pub fn run_parallel_tempering<F: Real, T: Target<F>>(target: &T, cfg: &SamplerConfig<F>) -> Result<PosteriorSamples<F>> {
    run_parallel_tempering_with(target, cfg, |_| {})
}

/// As [`run_parallel_tempering`], calling `observer` after every iteration.
pub fn run_parallel_tempering_with<F: Real, T: Target<F>>(
    target: &T,
    cfg: &SamplerConfig<F>,
    observer: impl FnMut(Progress) + Send,
) -> Result<PosteriorSamples<F>> {
    cfg.validate()?;
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(|| run_inner(target, cfg, observer)),
        None => run_inner(target, cfg, observer),
    }
}

fn run_inner<F: Real, T: Target<F>>(
    target: &T,
    cfg: &SamplerConfig<F>,
    mut observer: impl FnMut(Progress) + Send,
) -> Result<PosteriorSamples<F>> {
    let ladder = cfg.ladder()?;
    let (start, init_attempts) = initialize(target, cfg)?;
    let scales = match &cfg.proposal_scales {
        Some(s) if s.len() == target.dim() => s.clone(),
        Some(s) => {
            return Err(Error::InvalidInput(format!(
                "{} proposal scales for {} parameters",
                s.len(),
                target.dim()
            )))
        }
        None => target.proposal_scales(&start.theta, cfg.proposal_scale),
    };
    let retained = cfg.iterations - cfg.burn_in;
    let mut rungs: Vec<Rung<F>> = ladder
        .temps()
        .iter()
        .map(|&t| Rung {
            t,
            state: start.clone(),
            shape: ProposalShape::Diagonal(scales.clone()),
            moments: Moments::new(target.dim()),
            log_scale: F::zero(),
            accepted: 0,
            failures: 0,
            theta: Vec::with_capacity(retained),
            log_lik: Vec::with_capacity(retained),
        })
        .collect();
    let root = StreamKey::root(cfg.seed);
    let pairs = rungs.len() - 1;
    let mut swap_tries = vec![0usize; pairs];
    let mut swap_hits = vec![0usize; pairs];

    for it in 0..cfg.iterations {
        let burning = it < cfg.burn_in;
        rungs.par_iter_mut().enumerate().try_for_each(|(r, rung)| -> Result<()> {
            let path = [r as u64, it as u64];
            let proposal = propose(
                &rung.state.theta,
                &rung.shape,
                rung.log_scale,
                root.child(tag::PROPOSAL).path(&path),
            );
            let (next, outcome) = mh_accept(
                target,
                &rung.state,
                proposal,
                rung.t,
                root.child(tag::LIKELIHOOD).path(&path),
                root.child(tag::ACCEPT).path(&path),
            )?;
            rung.state = next;
            let hit = outcome == StepOutcome::Accepted;
            if outcome == StepOutcome::SolverFailure {
                rung.failures += 1;
            }
            if burning {
                if let Some(goal) = cfg.target_acceptance {
                    let gain = F::from_count(it + 1).powf(F::lit(-0.6));
                    let a = if hit { F::one() } else { F::zero() };
                    rung.log_scale = rung.log_scale + gain * (a - goal);
                }
                if cfg.adapt_covariance && it >= cfg.burn_in / 4 {
                    rung.moments.push(&rung.state.theta);
                    let ready = rung.moments.n >= (10 * target.dim()).max(50);
                    if ready && ((it + 1) % 100 == 0 || it + 1 == cfg.burn_in) {
                        let floor: Vec<F> = scales.iter().map(|&s| s * F::lit(1e-3)).collect();
                        if let Some(lower) = rung.moments.factor(&floor) {
                            if matches!(rung.shape, ProposalShape::Diagonal(_)) {
                                rung.log_scale = F::zero();
                            }
                            rung.shape = ProposalShape::Factor {
                                dim: target.dim(),
                                lower,
                            };
                        }
                    }
                }
            } else if hit {
                rung.accepted += 1;
            }
            Ok(())
        })?;

        if (it + 1) % cfg.swap_stride == 0 {
            for parity in 0..2 {
                for i in (parity..pairs).step_by(2) {
                    let (lo, hi) = rungs.split_at_mut(i + 1);
                    let (a, b) = (&mut lo[i], &mut hi[0]);
                    let log_acc = swap_log_acceptance(a.t, b.t, a.state.log_lik, b.state.log_lik);
                    let u = F::unit(&mut root.path(&[tag::SWAP, it as u64, i as u64]).rng());
                    swap_tries[i] += 1;
                    if (F::one() - u).ln() < log_acc {
                        std::mem::swap(&mut a.state, &mut b.state);
                        swap_hits[i] += 1;
                    }
                }
            }
        }

        if !burning {
            for rung in &mut rungs {
                rung.theta.push(target.natural(&rung.state.theta));
                rung.log_lik.push(rung.state.log_lik);
            }
        }
        observer(Progress {
            iteration: it + 1,
            iterations: cfg.iterations,
        });
    }

    Ok(PosteriorSamples {
        names: target.names(),
        ladder: ladder.temps().to_vec(),
        iterations: cfg.iterations,
        burn_in: cfg.burn_in,
        rungs: rungs
            .into_iter()
            .map(|r| RungTrace {
                temperature: r.t,
                theta: r.theta,
                log_lik: r.log_lik,
                acceptance: F::from_count(r.accepted) / F::from_count(retained),
                solver_failures: r.failures,
                final_log_scale: r.log_scale,
            })
            .collect(),
        swap_rates: swap_tries
            .iter()
            .zip(&swap_hits)
            .map(|(&n, &k)| if n == 0 { F::zero() } else { F::from_count(k) / F::from_count(n) })
            .collect(),
        init_attempts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidenceEstimate<F> {
    pub log_marginal: F,
    pub rung_means: Vec<F>,
    /// Batch-means standard error, for reporting only.
    pub std_error: F,
}

const EVIDENCE_BATCHES: usize = 20;

fn trapezoid_weights<F: Real>(temps: &[F]) -> Vec<F> {
    let half = F::lit(0.5);
    let k = temps.len();
    (0..k)
        .map(|i| {
            let left = if i > 0 { temps[i] - temps[i - 1] } else { F::zero() };
            let right = if i + 1 < k { temps[i + 1] - temps[i] } else { F::zero() };
            half * (left + right)
        })
        .collect()
}

/// Trapezoid rule `Σᵢ (tᵢ₊₁ − tᵢ)(Ēᵢ₊₁ + Ēᵢ)/2`.
pub fn estimate_log_marginal_from_means<F: Real>(temps: &[F], means: &[F]) -> Result<F> {
    if temps.len() != means.len() || temps.len() < 2 {
        return Err(Error::InvalidInput("one mean per temperature, at least two".into()));
    }
    let half = F::lit(0.5);
    Ok(temps
        .windows(2)
        .zip(means.windows(2))
        .map(|(t, e)| (t[1] - t[0]) * half * (e[0] + e[1]))
        .sum())
}

/// Thermodynamic-integration estimate of the log marginal likelihood.
pub fn estimate_log_marginal<F: Real>(samples: &PosteriorSamples<F>) -> Result<EvidenceEstimate<F>> {
    if samples.rungs.len() != samples.ladder.len() || samples.rungs.iter().any(|r| r.log_lik.is_empty()) {
        return Err(Error::InvalidInput("samples must cover every rung".into()));
    }
    let means: Vec<F> = samples.rungs.iter().map(|r| stats::mean(&r.log_lik)).collect();
    let log_marginal = estimate_log_marginal_from_means(&samples.ladder, &means)?;
    let var: F = trapezoid_weights(&samples.ladder)
        .iter()
        .zip(&samples.rungs)
        .map(|(&w, r)| w * w * stats::batch_means_variance(&r.log_lik, EVIDENCE_BATCHES))
        .sum();
    if !log_marginal.is_finite() {
        return Err(Error::InvalidInput("non-finite rung mean".into()));
    }
    Ok(EvidenceEstimate {
        log_marginal,
        rung_means: means,
        std_error: var.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BayesFactor<F> {
    pub log_b12: F,
    /// `e^{log_b12}`; may be infinite or zero when the log is large.
    pub b12: F,
}

pub fn bayes_factor<F: Real>(log_z1: F, log_z2: F) -> BayesFactor<F> {
    let log_b12 = log_z1 - log_z2;
    BayesFactor {
        log_b12,
        b12: log_b12.exp(),
    }
}

pub fn bayes_factor_of<F: Real>(e1: &EvidenceEstimate<F>, e2: &EvidenceEstimate<F>) -> BayesFactor<F> {
    bayes_factor(e1.log_marginal, e2.log_marginal)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary<F> {
    pub name: String,
    pub q025: F,
    pub median: F,
    pub q975: F,
    pub mean: F,
}

/// 2.5 %, 50 % and 97.5 % quantiles of every column of `rows`.
pub fn summarize<F: Real>(names: &[String], rows: &[Vec<F>]) -> Result<Vec<ParamSummary<F>>> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("no samples to summarize".into()));
    }
    Ok(names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let mut col: Vec<F> = rows.iter().map(|r| r[j]).collect();
            col.sort_by(|a, b| a.partial_cmp(b).expect("NaN in samples"));
            ParamSummary {
                name: name.clone(),
                q025: stats::quantile_sorted(&col, F::lit(0.025)),
                median: stats::quantile_sorted(&col, F::lit(0.5)),
                q975: stats::quantile_sorted(&col, F::lit(0.975)),
                mean: stats::mean(&col),
            }
        })
        .collect())
}

/// Quantile table of the `t = 1` rung.
pub fn summarize_posterior<F: Real>(samples: &PosteriorSamples<F>) -> Result<Vec<ParamSummary<F>>> {
    summarize(&samples.names, &samples.posterior().theta)
}

/// Independent `Normal(0, sd²)` prior with a constant likelihood.
#[derive(Debug, Clone)]
pub struct FlatTarget<F> {
    pub names: Vec<String>,
    pub prior_sd: F,
    pub log_lik: F,
}

impl<F: Real> Target<F> for FlatTarget<F> {
    fn dim(&self) -> usize {
        self.names.len()
    }

    fn names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn log_prior(&self, theta: &[F]) -> F {
        normal_log_prior(theta, self.prior_sd)
    }

    fn log_likelihood(&self, _: &[F], _: StreamKey, _: F) -> Result<Estimate<F>> {
        Ok(Estimate::Value(self.log_lik))
    }

    fn initial_candidates(&self) -> Vec<Vec<F>> {
        vec![vec![F::zero(); self.dim()]]
    }

    fn prior_draw(&self, rng: &mut ChaCha8Rng) -> Vec<F> {
        (0..self.dim()).map(|_| self.prior_sd * F::std_normal(rng)).collect()
    }
}

fn normal_log_prior<F: Real>(theta: &[F], sd: F) -> F {
    let c = -sd.ln() - F::lit(0.5) * F::TAU().ln();
    theta
        .iter()
        .map(|&x| {
            let z = x / sd;
            c - F::lit(0.5) * z * z
        })
        .sum()
}

/// Conjugate toy: each of `dim` means has prior `Normal(0, prior_sd²)` and
/// explains every observation in `obs` with unit-variance Gaussian noise.
#[derive(Debug, Clone)]
pub struct NormalMeanTarget<F> {
    pub dim: usize,
    pub prior_sd: F,
    pub obs: Vec<F>,
}

impl<F: Real> Target<F> for NormalMeanTarget<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn names(&self) -> Vec<String> {
        (1..=self.dim).map(|i| format!("mu_{i}")).collect()
    }

    fn log_prior(&self, theta: &[F]) -> F {
        normal_log_prior(theta, self.prior_sd)
    }

    fn log_likelihood(&self, theta: &[F], _: StreamKey, _: F) -> Result<Estimate<F>> {
        let c = F::lit(-0.5) * F::TAU().ln();
        let ll = theta
            .iter()
            .map(|&m| {
                self.obs
                    .iter()
                    .map(|&y| c - F::lit(0.5) * (y - m) * (y - m))
                    .sum::<F>()
            })
            .sum();
        Ok(Estimate::Value(ll))
    }

    fn initial_candidates(&self) -> Vec<Vec<F>> {
        vec![vec![stats::mean(&self.obs); self.dim]]
    }

    fn prior_draw(&self, rng: &mut ChaCha8Rng) -> Vec<F> {
        (0..self.dim).map(|_| self.prior_sd * F::std_normal(rng)).collect()
    }
}
