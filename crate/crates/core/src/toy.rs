//! Poisson-mixture toy posterior.
//!
//! `π(θ) = E_η[Poisson(θ | η)]` with `η ~ Gamma(shape, rate)`. The envelope
//! `d(θ) = e^{-θ} θ^θ / θ!` dominates every `Poisson(θ | η)`, so the event
//! `{U ≤ Poisson(θ | η) / d(θ)}` has probability `π(θ) / d(θ)` and the target
//! can be sampled by a factory Barker chain without ever evaluating `π`. The
//! mixture is Negative Binomial, which gives an exact oracle for validation.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::chain::{
    barker_step_factory, mh_step, run_chain, run_chain_with, ChainTrace, FactorTarget,
    IntegerUniformWalk,
};
use crate::coin::Coin;
use crate::diagnostics::{batch_means, chain_stats, mean, variance};
use crate::error::{Error, Result};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub gamma_shape: f64,
    pub gamma_rate: f64,
    pub rw_halfwidth: i64,
    pub iterations: usize,
    pub burn_in: usize,
    pub init: i64,
    pub seed: u64,
    pub loop_cap: Option<u64>,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            gamma_shape: 100.0,
            gamma_rate: 5.0,
            rw_halfwidth: 10,
            iterations: 200_000,
            burn_in: 1_000,
            init: 20,
            seed: 1,
            loop_cap: None,
        }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_shape > 0.0 && self.gamma_shape.is_finite()) {
            return Err(Error::config("gamma_shape", "must be positive"));
        }
        if !(self.gamma_rate > 0.0 && self.gamma_rate.is_finite()) {
            return Err(Error::config("gamma_rate", "must be positive"));
        }
        if self.rw_halfwidth < 1 {
            return Err(Error::config("rw_halfwidth", "must be at least 1"));
        }
        if self.init < 0 {
            return Err(Error::config("init", "must be non-negative"));
        }
        Ok(())
    }
}

/// `log d(θ) = -θ + θ log θ - log θ!`, with `d(0) = 1`.
pub fn log_envelope_d(theta: u64) -> f64 {
    if theta == 0 {
        return 0.0;
    }
    let t = theta as f64;
    -t + t * t.ln() - ln_gamma(t + 1.0)
}

/// `log Poisson(θ | η)`.
pub fn log_poisson_pmf(theta: u64, eta: f64) -> f64 {
    let t = theta as f64;
    let kernel = if theta == 0 { 0.0 } else { t * eta.ln() };
    -eta + kernel - ln_gamma(t + 1.0)
}

/// Exact mixture pmf (Negative Binomial), used only as a validation oracle.
pub fn nb_exact_pmf(theta: u64, cfg: &ToyConfig) -> f64 {
    let r = cfg.gamma_shape;
    let p = cfg.gamma_rate / (cfg.gamma_rate + 1.0);
    let t = theta as f64;
    (ln_gamma(t + r) - ln_gamma(r) - ln_gamma(t + 1.0) + r * p.ln() + t * (1.0 - p).ln()).exp()
}

/// Coin of probability `π(θ) / d(θ)` for one fixed `θ`.
#[derive(Debug, Clone)]
pub struct ToyCoin {
    theta: u64,
    mixing: Gamma<f64>,
}

impl Coin for ToyCoin {
    fn flip<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<bool> {
        let eta = self.mixing.sample(rng);
        let u: f64 = rng.random();
        // log Poisson(θ|η) - log d(θ); the factorials cancel
        let t = self.theta as f64;
        let log_ratio = if self.theta == 0 {
            -eta
        } else {
            -eta + t * eta.ln() + t - t * t.ln()
        };
        Ok(u.ln() <= log_ratio)
    }
}

pub fn toy_p_coin(theta: u64, cfg: &ToyConfig) -> ToyCoin {
    ToyCoin {
        theta,
        mixing: Gamma::new(cfg.gamma_shape, 1.0 / cfg.gamma_rate).expect("validated config"),
    }
}

/// The toy posterior as a factor target on the integers.
#[derive(Debug, Clone)]
pub struct ToyTarget {
    cfg: ToyConfig,
}

impl ToyTarget {
    pub fn new(cfg: &ToyConfig) -> Self {
        ToyTarget { cfg: cfg.clone() }
    }
}

impl FactorTarget<i64> for ToyTarget {
    type Coin = ToyCoin;

    fn in_support(&self, state: &i64) -> bool {
        *state >= 0
    }

    fn log_envelope(&self, state: &i64) -> f64 {
        log_envelope_d(*state as u64)
    }

    fn p_coin(&self, state: &i64) -> ToyCoin {
        toy_p_coin(*state as u64, &self.cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySummary {
    pub iterations: usize,
    pub burn_in: usize,
    pub trace_length: usize,
    pub mean: f64,
    pub variance: f64,
    pub acceptance_rate: f64,
    pub mean_loops: f64,
    pub tv_distance: f64,
    pub ess: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ToyRun {
    pub trace: ChainTrace<i64>,
    pub summary: ToySummary,
}

/// Total-variation distance between the empirical law of `states` and the
/// Negative Binomial oracle.
pub fn tv_distance_to_oracle(states: &[i64], cfg: &ToyConfig) -> f64 {
    let max = states.iter().copied().max().unwrap_or(0).max(0) as usize;
    let support = max.max(2_000);
    let mut counts = vec![0u64; support + 1];
    for &s in states {
        counts[s as usize] += 1;
    }
    let n = states.len() as f64;
    0.5 * counts
        .iter()
        .enumerate()
        .map(|(t, &c)| (c as f64 / n - nb_exact_pmf(t as u64, cfg)).abs())
        .sum::<f64>()
}

/// Runs the factory Barker chain on the toy target and summarises it after
/// discarding `burn_in` iterations.
pub fn run_toy(cfg: &ToyConfig) -> Result<ToyRun> {
    cfg.validate()?;
    let target = ToyTarget::new(cfg);
    let kernel = IntegerUniformWalk {
        half_width: cfg.rw_halfwidth,
    };
    let trace = run_chain(
        |s, rng| barker_step_factory(s, &kernel, &target, rng, cfg.loop_cap),
        cfg.init,
        cfg.iterations,
        cfg.seed,
    )?;
    let summary = summarise(&trace, cfg);
    Ok(ToyRun { trace, summary })
}

fn summarise(trace: &ChainTrace<i64>, cfg: &ToyConfig) -> ToySummary {
    let kept = trace.discard(cfg.burn_in);
    let xs: Vec<f64> = kept.states.iter().map(|&s| s as f64).collect();
    let ess = chain_stats(&kept, |&s| s as f64, 100).ok().map(|s| s.ess);
    ToySummary {
        iterations: cfg.iterations,
        burn_in: cfg.burn_in,
        trace_length: trace.len(),
        mean: mean(&xs),
        variance: if xs.len() > 1 { variance(&xs) } else { 0.0 },
        acceptance_rate: kept.acceptance_rate(),
        mean_loops: kept.mean_loops(),
        tv_distance: tv_distance_to_oracle(&kept.states, cfg),
        ess,
    }
}

/// Mean and variance of the Negative Binomial oracle.
pub fn nb_moments(cfg: &ToyConfig) -> (f64, f64) {
    let (r, b) = (cfg.gamma_shape, cfg.gamma_rate);
    (r / b, r * (b + 1.0) / (b * b))
}

/// Batch-means summary of `f = identity` along one kernel's trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelVariance {
    pub mean: f64,
    pub asymptotic_variance: f64,
    pub standard_error: f64,
    pub acceptance_rate: f64,
    pub mean_loops: f64,
    pub ess: f64,
}

fn kernel_variance(trace: &ChainTrace<i64>, n_batches: usize) -> Result<KernelVariance> {
    let xs: Vec<f64> = trace.states.iter().map(|&s| s as f64).collect();
    let bm = batch_means(&xs, n_batches)?;
    Ok(KernelVariance {
        mean: mean(&xs),
        asymptotic_variance: bm.asymptotic_variance,
        standard_error: bm.standard_error,
        acceptance_rate: trace.acceptance_rate(),
        mean_loops: trace.mean_loops(),
        ess: xs.len() as f64 * variance(&xs) / bm.asymptotic_variance,
    })
}

/// Comparison of the factory Barker chain with Metropolis-Hastings on the
/// same proposal, against `σ²_MH ≤ σ²_B ≤ 2 σ²_MH + σ²_π`.
///
/// Each side of the check is relaxed by three combined standard errors of
/// the batch-means estimates involved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichSummary {
    pub iterations: usize,
    pub burn_in: usize,
    pub n_batches: usize,
    pub barker: KernelVariance,
    pub mh: KernelVariance,
    /// `σ²_π` from the oracle.
    pub target_variance: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub holds: bool,
}

/// Runs both kernels for `cfg.iterations` steps. The Barker chain uses
/// substream 0 of `cfg.seed`, the Metropolis-Hastings chain substream 1.
pub fn run_sandwich(
    cfg: &ToyConfig,
    n_batches: usize,
) -> Result<(SandwichSummary, ChainTrace<i64>, ChainTrace<i64>)> {
    cfg.validate()?;
    let barker = run_toy(cfg)?.trace;
    let kernel = IntegerUniformWalk {
        half_width: cfg.rw_halfwidth,
    };
    let log_target = |s: &i64| {
        if *s < 0 {
            f64::NEG_INFINITY
        } else {
            nb_exact_pmf(*s as u64, cfg).ln()
        }
    };
    let mh = run_chain_with(
        |s, rng| Ok(mh_step(s, &kernel, log_target, rng)),
        cfg.init,
        cfg.iterations,
        &mut substream(cfg.seed, 1),
    )?;
    let b = kernel_variance(&barker.discard(cfg.burn_in), n_batches)?;
    let m = kernel_variance(&mh.discard(cfg.burn_in), n_batches)?;
    let target_variance = nb_moments(cfg).1;
    let lower_bound =
        m.asymptotic_variance - 3.0 * (b.standard_error.powi(2) + m.standard_error.powi(2)).sqrt();
    let upper_bound = 2.0 * m.asymptotic_variance
        + target_variance
        + 3.0 * (b.standard_error.powi(2) + 4.0 * m.standard_error.powi(2)).sqrt();
    let holds = lower_bound <= b.asymptotic_variance && b.asymptotic_variance <= upper_bound;
    let summary = SandwichSummary {
        iterations: cfg.iterations,
        burn_in: cfg.burn_in,
        n_batches,
        barker: b,
        mh: m,
        target_variance,
        lower_bound,
        upper_bound,
        holds,
    };
    Ok((summary, barker, mh))
}
