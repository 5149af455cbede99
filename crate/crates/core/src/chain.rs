//! Markov chain drivers: Barker steps through the two-coin factory for
//! intractable targets, closed-form Barker and Metropolis-Hastings steps for
//! tractable ones, and the trace container they fill.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coin::{two_coin, Coin, WeightedCoin};
use crate::error::Result;

/// Proposal mechanism `q(x, ·)` of a Metropolis-type chain.
pub trait ProposalKernel<S> {
    fn propose<R: Rng + ?Sized>(&self, current: &S, rng: &mut R) -> S;

    /// `log q(to, from) - log q(from, to)`; zero for symmetric kernels.
    fn log_density_ratio(&self, _from: &S, _to: &S) -> f64 {
        0.0
    }
}

/// Target written as `π(x) = d(x) p(x)` with `d` computable and `p` only
/// available as a coin.
pub trait FactorTarget<S> {
    type Coin: Coin;

    /// States outside the support have `π = 0`.
    fn in_support(&self, _state: &S) -> bool {
        true
    }

    /// `log d(x)`.
    fn log_envelope(&self, state: &S) -> f64;

    /// A coin landing heads with probability `π(x) / d(x)`.
    fn p_coin(&self, state: &S) -> Self::Coin;
}

/// Outcome of a single transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Step<S> {
    pub state: S,
    pub accepted: bool,
    /// Two-coin loops spent on this step; zero when no coin was run.
    pub loops: u64,
}

impl<S> Step<S> {
    pub fn exact(state: S, accepted: bool) -> Self {
        Step {
            state,
            accepted,
            loops: 0,
        }
    }
}

/// Barker acceptance `r / (1 + r)` for `log r = log[π(φ) q(φ,θ) / π(θ) q(θ,φ)]`.
pub fn barker_acceptance(log_ratio: f64) -> f64 {
    if log_ratio <= 0.0 {
        // r / (1 + r) with r ≤ 1 stays within [r / 2, r] after rounding
        let r = log_ratio.exp();
        r / (1.0 + r)
    } else {
        1.0 / (1.0 + (-log_ratio).exp())
    }
}

/// Metropolis-Hastings acceptance `1 ∧ r`.
pub fn mh_acceptance(log_ratio: f64) -> f64 {
    log_ratio.min(0.0).exp()
}

/// One Barker step where the acceptance event is produced by the two-coin
/// algorithm from the envelope `d` and the `p`-coins of both states.
pub fn barker_step_factory<S, K, T, R>(
    current: &S,
    kernel: &K,
    target: &T,
    rng: &mut R,
    loop_cap: Option<u64>,
) -> Result<Step<S>>
where
    S: Clone,
    K: ProposalKernel<S>,
    T: FactorTarget<S>,
    R: Rng + ?Sized,
{
    let proposal = kernel.propose(current, rng);
    if !target.in_support(&proposal) {
        return Ok(Step::exact(current.clone(), false));
    }
    // c1 = d(φ) q(φ, θ), c2 = d(θ) q(θ, φ); only the ratio matters.
    let log_c1 = target.log_envelope(&proposal) + kernel.log_density_ratio(current, &proposal);
    let log_c2 = target.log_envelope(current);
    let mut a = WeightedCoin::new(log_c1, target.p_coin(&proposal));
    let mut b = WeightedCoin::new(log_c2, target.p_coin(current));
    let out = two_coin(&mut a, &mut b, rng, loop_cap)?;
    let state = if out.bit { proposal } else { current.clone() };
    Ok(Step {
        state,
        accepted: out.bit,
        loops: out.loops,
    })
}

fn log_ratio<S, K: ProposalKernel<S>>(
    current: &S,
    proposal: &S,
    kernel: &K,
    log_target: impl Fn(&S) -> f64,
) -> f64 {
    let lp = log_target(proposal);
    if lp == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    lp - log_target(current) + kernel.log_density_ratio(current, proposal)
}

/// Barker step with the acceptance probability evaluated in closed form.
pub fn barker_step_exact<S, K, R>(
    current: &S,
    kernel: &K,
    log_target: impl Fn(&S) -> f64,
    rng: &mut R,
) -> Step<S>
where
    S: Clone,
    K: ProposalKernel<S>,
    R: Rng + ?Sized,
{
    let proposal = kernel.propose(current, rng);
    let alpha = barker_acceptance(log_ratio(current, &proposal, kernel, log_target));
    if rng.random::<f64>() < alpha {
        Step::exact(proposal, true)
    } else {
        Step::exact(current.clone(), false)
    }
}

/// Standard Metropolis-Hastings step.
pub fn mh_step<S, K, R>(
    current: &S,
    kernel: &K,
    log_target: impl Fn(&S) -> f64,
    rng: &mut R,
) -> Step<S>
where
    S: Clone,
    K: ProposalKernel<S>,
    R: Rng + ?Sized,
{
    let proposal = kernel.propose(current, rng);
    let alpha = mh_acceptance(log_ratio(current, &proposal, kernel, log_target));
    if rng.random::<f64>() < alpha {
        Step::exact(proposal, true)
    } else {
        Step::exact(current.clone(), false)
    }
}

/// Per-step bookkeeping stored alongside the states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepMeta {
    pub accepted: bool,
    pub loops: u64,
    pub nanos: u64,
}

/// States visited by a chain, initial state included, plus per-step metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace<S> {
    pub states: Vec<S>,
    pub steps: Vec<StepMeta>,
}

impl<S: Clone> ChainTrace<S> {
    pub fn new(init: S) -> Self {
        ChainTrace {
            states: vec![init],
            steps: Vec::new(),
        }
    }

    pub fn push(&mut self, step: Step<S>, nanos: u64) {
        self.steps.push(StepMeta {
            accepted: step.accepted,
            loops: step.loops,
            nanos,
        });
        self.states.push(step.state);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &S {
        self.states
            .last()
            .expect("trace always holds the initial state")
    }

    /// Drops the first `burn_in` transitions (and the states before them).
    pub fn discard(&self, burn_in: usize) -> ChainTrace<S> {
        let b = burn_in.min(self.steps.len());
        ChainTrace {
            states: self.states[b..].to_vec(),
            steps: self.steps[b..].to_vec(),
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().filter(|m| m.accepted).count() as f64 / self.steps.len() as f64
    }

    /// Mean two-coin loop count over the steps that actually ran the algorithm.
    pub fn mean_loops(&self) -> f64 {
        let (n, total) = self
            .steps
            .iter()
            .filter(|m| m.loops > 0)
            .fold((0u64, 0u64), |(n, t), m| (n + 1, t + m.loops));
        if n == 0 {
            0.0
        } else {
            total as f64 / n as f64
        }
    }
}

/// Runs `n` transitions of `step` from `init`, deterministically in `seed`.
pub fn run_chain<S, F>(step: F, init: S, n: usize, seed: u64) -> Result<ChainTrace<S>>
where
    S: Clone,
    F: FnMut(&S, &mut ChaCha8Rng) -> Result<Step<S>>,
{
    run_chain_with(step, init, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// [`run_chain`] drawing from a caller-supplied generator.
pub fn run_chain_with<S, F>(
    mut step: F,
    init: S,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ChainTrace<S>>
where
    S: Clone,
    F: FnMut(&S, &mut ChaCha8Rng) -> Result<Step<S>>,
{
    let mut trace = ChainTrace::new(init);
    trace.states.reserve(n);
    trace.steps.reserve(n);
    for _ in 0..n {
        let start = Instant::now();
        let next = step(trace.last(), rng)?;
        trace.push(next, start.elapsed().as_nanos() as u64);
    }
    Ok(trace)
}

/// States that can be written as CSV trace rows.
pub trait TraceState {
    fn column_names() -> Vec<&'static str>;
    fn columns(&self) -> Vec<String>;
}

impl TraceState for i64 {
    fn column_names() -> Vec<&'static str> {
        vec!["theta"]
    }
    fn columns(&self) -> Vec<String> {
        vec![self.to_string()]
    }
}

impl TraceState for f64 {
    fn column_names() -> Vec<&'static str> {
        vec!["x"]
    }
    fn columns(&self) -> Vec<String> {
        vec![self.to_string()]
    }
}

/// Writes `iteration,<state columns>,accepted,loops`, one row per state.
///
/// Row 0 is the initial state with `accepted = 0, loops = 0`. Wall-clock
/// timings are deliberately left out so that the file is reproducible.
pub fn write_trace_csv<S: TraceState, W: Write>(trace: &ChainTrace<S>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["iteration"];
    header.extend(S::column_names());
    header.extend(["accepted", "loops"]);
    w.write_record(&header)?;
    for (i, s) in trace.states.iter().enumerate() {
        let (acc, loops) = match i.checked_sub(1).map(|j| trace.steps[j]) {
            Some(m) => (m.accepted as u8, m.loops),
            None => (0, 0),
        };
        let mut row = vec![i.to_string()];
        row.extend(s.columns());
        row.push(acc.to_string());
        row.push(loops.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Symmetric uniform random walk on the integers, excluding the zero step.
#[derive(Debug, Clone, Copy)]
pub struct IntegerUniformWalk {
    pub half_width: i64,
}

impl ProposalKernel<i64> for IntegerUniformWalk {
    fn propose<R: Rng + ?Sized>(&self, current: &i64, rng: &mut R) -> i64 {
        let k = rng.random_range(0..2 * self.half_width);
        let offset = if k < self.half_width {
            k - self.half_width
        } else {
            k - self.half_width + 1
        };
        current + offset
    }
}

/// Symmetric uniform random walk on the reals, `U(x ± half_width)`.
#[derive(Debug, Clone, Copy)]
pub struct UniformWalk {
    pub half_width: f64,
}

impl ProposalKernel<f64> for UniformWalk {
    fn propose<R: Rng + ?Sized>(&self, current: &f64, rng: &mut R) -> f64 {
        current + self.half_width * (2.0 * rng.random::<f64>() - 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coin::ConstCoin;

    struct Stay;
    impl ProposalKernel<i64> for Stay {
        fn propose<R: Rng + ?Sized>(&self, current: &i64, _rng: &mut R) -> i64 {
            *current
        }
    }

    struct Flat;
    impl FactorTarget<i64> for Flat {
        type Coin = ConstCoin;
        fn log_envelope(&self, _s: &i64) -> f64 {
            0.0
        }
        fn p_coin(&self, _s: &i64) -> ConstCoin {
            ConstCoin(true)
        }
    }

    #[test]
    fn closed_form_acceptances() {
        assert!((barker_acceptance(0.0) - 0.5).abs() < 1e-15);
        assert!((barker_acceptance(3f64.ln()) - 0.75).abs() < 1e-15);
        assert_eq!(barker_acceptance(f64::NEG_INFINITY), 0.0);
        assert_eq!(mh_acceptance(0.3), 1.0);
        assert!((mh_acceptance(0.25f64.ln()) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn degenerate_self_proposal_accepts_half_the_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let acc = (0..n)
            .filter(|_| {
                barker_step_factory(&5i64, &Stay, &Flat, &mut rng, None)
                    .unwrap()
                    .accepted
            })
            .count() as f64
            / n as f64;
        assert!((acc - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt(), "{acc}");
    }

    #[test]
    fn empty_chain_holds_init() {
        let t = run_chain(|s: &i64, _| Ok(Step::exact(*s + 1, true)), 7, 0, 1).unwrap();
        assert_eq!(t.states, vec![7]);
        assert!(t.steps.is_empty());
    }

    #[test]
    fn identity_chain_is_constant() {
        let t = run_chain(|s: &i64, _| Ok(Step::exact(*s, false)), 3, 50, 1).unwrap();
        assert_eq!(t.len(), 51);
        assert!(t.states.iter().all(|&s| s == 3));
    }

    #[test]
    fn run_chain_is_deterministic() {
        let kernel = IntegerUniformWalk { half_width: 3 };
        let step = |s: &i64, rng: &mut ChaCha8Rng| {
            Ok(barker_step_exact(
                s,
                &kernel,
                |x: &i64| -(*x as f64).powi(2) / 8.0,
                rng,
            ))
        };
        let a = run_chain(step, 0, 500, 99).unwrap();
        let b = run_chain(step, 0, 500, 99).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn integer_walk_never_proposes_zero_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = IntegerUniformWalk { half_width: 10 };
        let mut seen = [0u32; 21];
        for _ in 0..42_000 {
            let d = k.propose(&0, &mut rng);
            assert!(d != 0 && d.abs() <= 10);
            seen[(d + 10) as usize] += 1;
        }
        assert_eq!(seen[10], 0);
        assert!(seen.iter().enumerate().all(|(i, &c)| i == 10 || c > 1700));
    }

    #[test]
    fn csv_layout() {
        let mut t = ChainTrace::new(4i64);
        t.push(
            Step {
                state: 6,
                accepted: true,
                loops: 3,
            },
            10,
        );
        let mut buf = Vec::new();
        write_trace_csv(&t, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "iteration,theta,accepted,loops\n0,4,0,0\n1,6,1,3\n"
        );
    }
}
