//! Factory Barker updates of the missing bridges and of the drift
//! parameters, and the Gibbs sampler that alternates them.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::io::Observations;
use super::skeleton::{
    audit_bounds, poisson_coin, propose_bridge, tighten_layer, BoundPiece, IntervalSkeleton,
    PiecewiseBounds,
};
use super::{DiffusionModel, PotentialBounds, ThetaState};
use crate::bridge::{BridgeSpec, RevealedPath, DEFAULT_DELTA};
use crate::chain::{ChainTrace, ProposalKernel, Step};
use crate::coin::{two_coin_with, Side};
use crate::diagnostics::{chain_stats, correlation, mean, quantile_sorted, variance};
use crate::error::{Error, Result};
use crate::rng::substream;

const AUDIT_GRID: usize = 10_000;

/// How the parameter step splits its Barker weights into `c · p` terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamCoin {
    /// `p_θ = exp(-Σ ∫ (g(·; θ) - a_i(θ)))` for each side separately.
    Direct,
    /// Both weights are divided by the common path functional
    /// `exp(-Σ ∫ (g(·; θ) + g(·; θ*)) / 2)`, leaving coins driven by
    /// `±(g(·; θ*) - g(·; θ)) / 2`. The Barker probability is unchanged and
    /// the coins are far likelier to land heads for local proposals.
    Symmetric,
}

/// Settings shared by the path and parameter updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpdateConfig {
    /// Layer width unit, in multiples of `√Δt`.
    pub delta: f64,
    /// Each bridge in a path update is tightened until the integral of its
    /// dominating rate `∫ r(s) ds` is at most this.
    pub rate_target: f64,
    /// Target for `Σ_i ∫ r_i(s) ds` over all intervals in the parameter step.
    pub param_rate_target: f64,
    /// Cap on bisections and extra reveals per bridge and tightening pass.
    pub max_refine: u32,
    pub param_coin: ParamCoin,
    pub loop_cap: Option<u64>,
    /// Check every bound against a dense grid of its band.
    pub audit: bool,
    /// Propose a copy of the current bridge instead of a fresh one.
    /// Exists to test the degenerate-proposal law.
    pub force_duplicate: bool,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        UpdateConfig {
            delta: DEFAULT_DELTA,
            rate_target: 1.0,
            param_rate_target: 2.0,
            max_refine: 200,
            param_coin: ParamCoin::Symmetric,
            loop_cap: None,
            audit: false,
            force_duplicate: false,
        }
    }
}

/// Result of one path or parameter update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub accepted: bool,
    /// Two-coin loops; zero when the step short-circuited.
    pub loops: u64,
}

fn audited(
    cfg: &UpdateConfig,
    f: impl Fn(f64) -> f64,
    band: (f64, f64),
    bounds: PotentialBounds,
) -> Result<PotentialBounds> {
    if cfg.audit {
        audit_bounds(f, band.0, band.1, bounds, AUDIT_GRID)?;
    }
    Ok(bounds)
}

/// Barker update of one missing bridge.
///
/// A Brownian bridge conditioned to stay in the model domain is proposed
/// and accepted with probability `G(B) / (G(B) + G(X))`,
/// `G = exp(-∫ g)`, through the two-coin algorithm with weights
/// `exp(-∫ a(s) ds)` and Poisson coins. Points revealed by the coins stay in
/// whichever bridge is kept.
pub fn path_update<M, R>(
    skel: &mut IntervalSkeleton,
    theta: &ThetaState,
    model: &M,
    cfg: &UpdateConfig,
    rng: &mut R,
) -> Result<StepOutcome>
where
    M: DiffusionModel + ?Sized,
    R: Rng + ?Sized,
{
    let spec = *skel.spec();
    let domain = model.domain();
    let mut proposal = if cfg.force_duplicate {
        skel.path.clone()
    } else {
        propose_bridge(&spec, domain, cfg.delta, rng)?
    };
    let bounds_of = |lo, hi| model.g_bounds(lo, hi, theta);
    tighten_layer(
        &mut proposal,
        bounds_of,
        cfg.rate_target,
        cfg.max_refine,
        rng,
    )?;
    tighten_layer(
        &mut skel.path,
        bounds_of,
        cfg.rate_target,
        cfg.max_refine,
        rng,
    )?;

    let g = |u| model.g(u, theta);
    let bounds_for = |path: &RevealedPath| {
        PiecewiseBounds::from_segments(path, skel.index, domain, |lo, hi| {
            audited(cfg, g, (lo, hi), model.g_bounds(lo, hi, theta))
        })
    };
    let b_prop = bounds_for(&proposal)?;
    let b_cur = bounds_for(&skel.path)?;
    let current = &mut skel.path;
    let out = two_coin_with(
        -b_prop.integral(),
        -b_cur.integral(),
        |side, rng: &mut R| match side {
            Side::A => poisson_coin(&mut proposal, g, &b_prop, rng),
            Side::B => poisson_coin(current, g, &b_cur, rng),
        },
        rng,
        cfg.loop_cap,
    )?;
    if out.bit {
        skel.path = proposal;
    }
    Ok(StepOutcome {
        accepted: out.bit,
        loops: out.loops,
    })
}

/// Current parameter value and one skeleton per observation interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsState {
    pub theta: ThetaState,
    pub skeletons: Vec<IntervalSkeleton>,
}

impl GibbsState {
    /// Starts every interval from a fresh Brownian bridge inside the domain.
    pub fn initialise<M, R>(
        model: &M,
        obs: &Observations,
        theta: ThetaState,
        delta: f64,
        rng: &mut R,
    ) -> Result<Self>
    where
        M: DiffusionModel + ?Sized,
        R: Rng + ?Sized,
    {
        obs.validate()?;
        let xs = obs
            .values
            .iter()
            .map(|&y| model.lamperti(y))
            .collect::<Result<Vec<_>>>()?;
        let mut skeletons = Vec::with_capacity(xs.len() - 1);
        for i in 0..xs.len() - 1 {
            let spec = BridgeSpec::new(
                xs[i],
                xs[i + 1],
                obs.times[i + 1] - obs.times[i],
                obs.times[i],
            );
            skeletons.push(IntervalSkeleton {
                index: i,
                y: (obs.values[i], obs.values[i + 1]),
                path: propose_bridge(&spec, model.domain(), delta, rng)?,
            });
        }
        Ok(GibbsState { theta, skeletons })
    }

    fn x_ends(&self) -> (f64, f64) {
        let first = self.skeletons.first().expect("at least one interval");
        let last = self.skeletons.last().expect("at least one interval");
        (first.spec().x_start, last.spec().x_end)
    }
}

/// Barker update of the parameters given all bridges, for the proposal
/// `proposal`.
///
/// Proposals outside the parameter domain are rejected without flipping any
/// coin. Otherwise every skeleton is tightened for the potentials of this
/// step, and the two-coin algorithm runs with weights
/// `A(x_n) - A(x_0) + log π(θ) - Σ_i ∫ a_i(s) ds` and product coins over
/// all intervals.
pub fn param_update<M, R>(
    state: &mut GibbsState,
    proposal: ThetaState,
    model: &M,
    cfg: &UpdateConfig,
    rng: &mut R,
) -> Result<StepOutcome>
where
    M: DiffusionModel + ?Sized,
    R: Rng + ?Sized,
{
    if !model.theta_in_domain(&proposal) {
        return Ok(StepOutcome {
            accepted: false,
            loops: 0,
        });
    }
    let current = state.theta;
    let (x0, xn) = state.x_ends();
    let endpoint = |t: &ThetaState| {
        model.antiderivative(xn, t) - model.antiderivative(x0, t) + model.log_prior(t)
    };
    let domain = model.domain();
    let n = state.skeletons.len();
    let per_bridge = cfg.param_rate_target / n as f64;
    let mut bounds_new = Vec::with_capacity(n);
    let mut bounds_cur = Vec::with_capacity(n);
    for skel in state.skeletons.iter_mut() {
        let index = skel.index;
        match cfg.param_coin {
            ParamCoin::Direct => {
                let both = |lo, hi| {
                    let a = model.g_bounds(lo, hi, &proposal);
                    let b = model.g_bounds(lo, hi, &current);
                    if a.r() >= b.r() {
                        a
                    } else {
                        b
                    }
                };
                tighten_layer(&mut skel.path, both, per_bridge, cfg.max_refine, rng)?;
                let g_new = |u| model.g(u, &proposal);
                let g_cur = |u| model.g(u, &current);
                bounds_new.push(PiecewiseBounds::from_segments(
                    &skel.path,
                    index,
                    domain,
                    |lo, hi| audited(cfg, g_new, (lo, hi), model.g_bounds(lo, hi, &proposal)),
                )?);
                bounds_cur.push(PiecewiseBounds::from_segments(
                    &skel.path,
                    index,
                    domain,
                    |lo, hi| audited(cfg, g_cur, (lo, hi), model.g_bounds(lo, hi, &current)),
                )?);
            }
            ParamCoin::Symmetric => {
                let half = |lo, hi| model.g_diff_bounds(lo, hi, &proposal, &current).scale(0.5);
                tighten_layer(&mut skel.path, half, per_bridge, cfg.max_refine, rng)?;
                let d = |u| model.g_diff(u, &proposal, &current);
                let b = PiecewiseBounds::from_segments(&skel.path, index, domain, |lo, hi| {
                    audited(
                        cfg,
                        d,
                        (lo, hi),
                        model.g_diff_bounds(lo, hi, &proposal, &current),
                    )
                })?;
                let scaled = |k: f64| PiecewiseBounds {
                    pieces: b
                        .pieces
                        .iter()
                        .map(|p| BoundPiece {
                            bounds: p.bounds.scale(k),
                            ..*p
                        })
                        .collect(),
                };
                bounds_new.push(scaled(0.5));
                bounds_cur.push(scaled(-0.5));
            }
        }
    }
    let integral =
        |bs: &[PiecewiseBounds]| -> f64 { bs.iter().map(PiecewiseBounds::integral).sum() };
    let log_new = endpoint(&proposal) - integral(&bounds_new);
    let log_cur = endpoint(&current) - integral(&bounds_cur);

    let param_coin = cfg.param_coin;
    let potential = move |side: Side, u: f64| match (param_coin, side) {
        (ParamCoin::Direct, Side::A) => model.g(u, &proposal),
        (ParamCoin::Direct, Side::B) => model.g(u, &current),
        (ParamCoin::Symmetric, Side::A) => 0.5 * model.g_diff(u, &proposal, &current),
        (ParamCoin::Symmetric, Side::B) => -0.5 * model.g_diff(u, &proposal, &current),
    };
    let skeletons = &mut state.skeletons;
    let out = two_coin_with(
        log_new,
        log_cur,
        |side, rng: &mut R| {
            let bounds = match side {
                Side::A => &bounds_new,
                Side::B => &bounds_cur,
            };
            for (skel, b) in skeletons.iter_mut().zip(bounds) {
                if !poisson_coin(&mut skel.path, |u| potential(side, u), b, rng)? {
                    return Ok(false);
                }
            }
            Ok(true)
        },
        rng,
        cfg.loop_cap,
    )?;
    if out.bit {
        state.theta = proposal;
    }
    Ok(StepOutcome {
        accepted: out.bit,
        loops: out.loops,
    })
}

/// Independent uniform random walks `U(γ1 ± h1)`, `U(γ2 ± h2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaWalk {
    pub h1: f64,
    pub h2: f64,
}

impl ProposalKernel<ThetaState> for ThetaWalk {
    fn propose<R: Rng + ?Sized>(&self, current: &ThetaState, rng: &mut R) -> ThetaState {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        ThetaState {
            gamma1: current.gamma1 + self.h1 * (2.0 * u1 - 1.0),
            gamma2: current.gamma2 + self.h2 * (2.0 * u2 - 1.0),
        }
    }
}

/// Counts of two-coin loop numbers in power-of-two buckets: bucket `k`
/// holds runs with `2^k ≤ loops < 2^(k+1)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoopHistogram {
    pub buckets: Vec<u64>,
    pub runs: u64,
    pub total_loops: u64,
    pub max_loops: u64,
}

impl LoopHistogram {
    pub fn record(&mut self, loops: u64) {
        if loops == 0 {
            return;
        }
        let k = (63 - loops.leading_zeros()) as usize;
        if self.buckets.len() <= k {
            self.buckets.resize(k + 1, 0);
        }
        self.buckets[k] += 1;
        self.runs += 1;
        self.total_loops += loops;
        self.max_loops = self.max_loops.max(loops);
    }

    pub fn mean(&self) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            self.total_loops as f64 / self.runs as f64
        }
    }
}

/// Configuration of a Gibbs run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GibbsConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Path sweeps per iteration.
    pub path_sweeps: usize,
    pub step_gamma1: f64,
    pub step_gamma2: f64,
    pub init: ThetaState,
    /// Update the bridges of a sweep on the rayon pool.
    pub parallel: bool,
    pub update: UpdateConfig,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            iterations: 5_000,
            burn_in: 2_000,
            seed: 1,
            path_sweeps: 2,
            step_gamma1: 0.65,
            step_gamma2: 0.01,
            init: ThetaState::new(5.0, 0.5),
            parallel: false,
            update: UpdateConfig::default(),
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.path_sweeps == 0 {
            return Err(Error::config("path_sweeps", "must be at least 1"));
        }
        if !(self.step_gamma1 >= 0.0 && self.step_gamma1.is_finite()) {
            return Err(Error::config("step_gamma1", "must be non-negative"));
        }
        if !(self.step_gamma2 >= 0.0 && self.step_gamma2.is_finite()) {
            return Err(Error::config("step_gamma2", "must be non-negative"));
        }
        let u = &self.update;
        if !(u.delta > 0.0 && u.delta.is_finite()) {
            return Err(Error::config("delta", "must be positive"));
        }
        if !(u.rate_target > 0.0 && u.rate_target.is_finite()) {
            return Err(Error::config("rate_target", "must be positive"));
        }
        if !(u.param_rate_target > 0.0 && u.param_rate_target.is_finite()) {
            return Err(Error::config("param_rate_target", "must be positive"));
        }
        if self.burn_in > self.iterations {
            return Err(Error::config("burn_in", "exceeds iterations"));
        }
        Ok(())
    }
}

/// Output of [`gibbs_run`].
#[derive(Debug, Clone)]
pub struct GibbsRun {
    /// Parameter trace; step metadata refers to the parameter update.
    pub trace: ChainTrace<ThetaState>,
    /// Accepted path proposals per sweep position.
    pub path_accepted: Vec<u64>,
    /// Path updates run per sweep position.
    pub path_updates: Vec<u64>,
    pub path_loops: LoopHistogram,
    pub param_loops: LoopHistogram,
    pub final_state: GibbsState,
}

/// Posterior summary of one parameter: `mean & s.d. & 95% C.I.`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub mean: f64,
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ess: Option<f64>,
}

impl ParameterSummary {
    pub fn covers(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsSummary {
    pub iterations: usize,
    pub burn_in: usize,
    pub trace_length: usize,
    pub gamma1: ParameterSummary,
    pub gamma2: ParameterSummary,
    pub correlation: f64,
    pub param_acceptance_rate: f64,
    pub param_mean_loops: f64,
    pub path_acceptance_rate: f64,
    pub path_mean_loops: f64,
}

fn summarise_parameter(
    trace: &ChainTrace<ThetaState>,
    f: fn(&ThetaState) -> f64,
) -> ParameterSummary {
    let xs: Vec<f64> = trace.states.iter().map(f).collect();
    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    let n_batches = (xs.len() / 50).clamp(1, 100);
    ParameterSummary {
        mean: mean(&xs),
        sd: if xs.len() > 1 {
            variance(&xs).sqrt()
        } else {
            0.0
        },
        ci_low: quantile_sorted(&sorted, 0.025),
        ci_high: quantile_sorted(&sorted, 0.975),
        ess: chain_stats(trace, f, n_batches).ok().map(|s| s.ess),
    }
}

impl GibbsRun {
    /// Posterior summaries after dropping `burn_in` iterations, with
    /// equal-tailed empirical 95% intervals.
    pub fn summary(&self, burn_in: usize) -> GibbsSummary {
        let kept = self.trace.discard(burn_in);
        let g1: Vec<f64> = kept.states.iter().map(|t| t.gamma1).collect();
        let g2: Vec<f64> = kept.states.iter().map(|t| t.gamma2).collect();
        let corr = if g1.len() > 2 {
            correlation(&g1, &g2)
        } else {
            0.0
        };
        let accepted: u64 = self.path_accepted.iter().sum();
        let updates: u64 = self.path_updates.iter().sum();
        GibbsSummary {
            iterations: self.trace.steps.len(),
            burn_in,
            trace_length: self.trace.len(),
            gamma1: summarise_parameter(&kept, |t| t.gamma1),
            gamma2: summarise_parameter(&kept, |t| t.gamma2),
            correlation: if corr.is_finite() { corr } else { 0.0 },
            param_acceptance_rate: kept.acceptance_rate(),
            param_mean_loops: kept.mean_loops(),
            path_acceptance_rate: if updates == 0 {
                0.0
            } else {
                accepted as f64 / updates as f64
            },
            path_mean_loops: self.path_loops.mean(),
        }
    }
}

/// Runs the Gibbs sampler: each iteration performs `path_sweeps` sweeps of
/// bridge updates followed by one parameter update.
///
/// Every bridge update of iteration `it`, sweep `s`, interval `i` draws from
/// its own substream, as does every parameter update, so serial and
/// parallel sweeps give identical output.
pub fn gibbs_run<M>(model: &M, obs: &Observations, cfg: &GibbsConfig) -> Result<GibbsRun>
where
    M: DiffusionModel + ?Sized,
{
    cfg.validate()?;
    if !model.theta_in_domain(&cfg.init) {
        return Err(Error::config("init", "outside the parameter domain"));
    }
    let mut init_rng = substream(cfg.seed, 0);
    let mut state = GibbsState::initialise(model, obs, cfg.init, cfg.update.delta, &mut init_rng)?;
    let n = state.skeletons.len() as u64;
    let k = cfg.path_sweeps as u64;
    let per_iteration = k * n + 1;
    let kernel = ThetaWalk {
        h1: cfg.step_gamma1,
        h2: cfg.step_gamma2,
    };

    let mut trace = ChainTrace::new(state.theta);
    let mut path_accepted = vec![0u64; cfg.path_sweeps];
    let mut path_updates = vec![0u64; cfg.path_sweeps];
    let mut path_loops = LoopHistogram::default();
    let mut param_loops = LoopHistogram::default();

    for it in 0..cfg.iterations as u64 {
        let start = Instant::now();
        let base = 1 + it * per_iteration;
        for s in 0..k {
            let theta = state.theta;
            let update = |skel: &mut IntervalSkeleton| {
                let mut rng = substream(cfg.seed, base + s * n + skel.index as u64);
                path_update(skel, &theta, model, &cfg.update, &mut rng)
            };
            let outcomes: Vec<Result<StepOutcome>> = if cfg.parallel {
                state.skeletons.par_iter_mut().map(update).collect()
            } else {
                state.skeletons.iter_mut().map(update).collect()
            };
            for o in outcomes {
                let o = o?;
                path_updates[s as usize] += 1;
                path_accepted[s as usize] += o.accepted as u64;
                path_loops.record(o.loops);
            }
        }
        let mut rng = substream(cfg.seed, base + k * n);
        let proposal = kernel.propose(&state.theta, &mut rng);
        let out = param_update(&mut state, proposal, model, &cfg.update, &mut rng)?;
        param_loops.record(out.loops);
        trace.push(
            Step {
                state: state.theta,
                accepted: out.accepted,
                loops: out.loops,
            },
            start.elapsed().as_nanos() as u64,
        );
    }
    Ok(GibbsRun {
        trace,
        path_accepted,
        path_updates,
        path_loops,
        param_loops,
        final_state: state,
    })
}
