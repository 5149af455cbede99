use barker_core::chain::{
    barker_acceptance, barker_step_factory, mh_acceptance, run_chain, FactorTarget, ProposalKernel,
};
use barker_core::coin::{first_coin_probability, two_coin, BernoulliCoin, Coin, WeightedCoin};
use barker_core::rng::substream;
use barker_core::toy::{log_envelope_d, nb_exact_pmf, run_toy, toy_p_coin, ToyConfig};
use proptest::prelude::*;
use rand::Rng;
use statrs::function::gamma::ln_gamma;

fn within_sigmas(freq: f64, p: f64, n: usize, k: f64) -> bool {
    (freq - p).abs() <= k * (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn two_coin_bit_and_loop_laws() {
    let reps = 100_000;
    for (c1, p1, c2, p2) in [
        (1.0, 0.5, 1.0, 0.5),
        (3.0, 0.2, 1.0, 0.9),
        (0.5, 0.05, 2.0, 0.3),
    ] {
        let mut rng = substream(1, 0);
        let mut a = WeightedCoin::new(f64::ln(c1), BernoulliCoin::new(p1));
        let mut b = WeightedCoin::new(f64::ln(c2), BernoulliCoin::new(p2));
        let (mut heads, mut loops, mut loops_sq) = (0usize, 0.0, 0.0);
        for _ in 0..reps {
            let out = two_coin(&mut a, &mut b, &mut rng, None).unwrap();
            heads += out.bit as usize;
            loops += out.loops as f64;
            loops_sq += (out.loops as f64).powi(2);
        }
        let p = c1 * p1 / (c1 * p1 + c2 * p2);
        assert!(within_sigmas(heads as f64 / reps as f64, p, reps, 4.0));
        // loops are geometric with success probability (c1 p1 + c2 p2) / (c1 + c2)
        let q = (c1 * p1 + c2 * p2) / (c1 + c2);
        let m = loops / reps as f64;
        let sd = ((1.0 - q) / (q * q) / reps as f64).sqrt();
        assert!(
            (m - 1.0 / q).abs() < 4.0 * sd,
            "mean loops {m} vs {}",
            1.0 / q
        );
        let var = loops_sq / reps as f64 - m * m;
        assert!((var - (1.0 - q) / (q * q)).abs() < 0.05 * (1.0 - q) / (q * q) + 1e-3);
    }
}

proptest! {
    #[test]
    fn two_coin_probability_is_scale_free(la in -30.0f64..30.0, lb in -30.0f64..30.0, k in -50.0f64..50.0) {
        let p = first_coin_probability(la, lb);
        let q = first_coin_probability(la + k, lb + k);
        prop_assert!((p - q).abs() < 1e-12);
        prop_assert!((p + first_coin_probability(lb, la) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn barker_lies_between_half_and_full_metropolis(log_ratio in -700.0f64..700.0) {
        let b = barker_acceptance(log_ratio);
        let m = mh_acceptance(log_ratio);
        prop_assert!(0.5 * m <= b && b <= m);
    }
}

/// Five-state target with `π ∝ d · p` and Bernoulli `p`-coins.
struct FiveStates {
    log_d: [f64; 5],
    p: [f64; 5],
}

impl FactorTarget<i64> for FiveStates {
    type Coin = BernoulliCoin;
    fn log_envelope(&self, s: &i64) -> f64 {
        self.log_d[*s as usize]
    }
    fn p_coin(&self, s: &i64) -> BernoulliCoin {
        BernoulliCoin::new(self.p[*s as usize])
    }
}

struct Cycle;

impl ProposalKernel<i64> for Cycle {
    fn propose<R: Rng + ?Sized>(&self, current: &i64, rng: &mut R) -> i64 {
        let step = if rng.random_bool(0.5) { 1 } else { 4 };
        (current + step) % 5
    }
}

#[test]
fn factory_chain_is_reversible_on_five_states() {
    let target = FiveStates {
        log_d: [0.0, 1.0, -0.5, 0.3, 2.0],
        p: [0.9, 0.2, 0.7, 0.5, 0.05],
    };
    let weights: Vec<f64> = (0..5)
        .map(|i| target.log_d[i].exp() * target.p[i])
        .collect();
    let total: f64 = weights.iter().sum();
    let pi: Vec<f64> = weights.iter().map(|w| w / total).collect();

    let n = 400_000;
    let trace = run_chain(
        |s, rng| barker_step_factory(s, &Cycle, &target, rng, None),
        0,
        n,
        7,
    )
    .unwrap();
    let mut flows = [[0usize; 5]; 5];
    let mut visits = [0usize; 5];
    for w in trace.states.windows(2) {
        flows[w[0] as usize][w[1] as usize] += 1;
        visits[w[1] as usize] += 1;
    }
    for i in 0..5 {
        let freq = visits[i] as f64 / n as f64;
        // generous allowance for autocorrelation
        assert!(
            (freq - pi[i]).abs() < 0.01,
            "state {i}: {freq} vs {}",
            pi[i]
        );
        for j in 0..5 {
            // π(i) P(i, j) = π(j) P(j, i), with P(i, j) = ½ α(i, j) for neighbours
            let (fij, fji) = (flows[i][j] as f64, flows[j][i] as f64);
            let sd = (fij + fji).sqrt().max(1.0);
            assert!(
                (fij - fji).abs() < 5.0 * sd,
                "flows {i}->{j}: {fij} vs {fji}"
            );
            if i != j && (i + 1) % 5 == j {
                let exact = 0.5 * barker_acceptance((pi[j] / pi[i]).ln());
                let est = fij / visits[i] as f64;
                assert!((est - exact).abs() < 0.02, "P({i},{j}) {est} vs {exact}");
            }
        }
    }
}

/// `∫ Poisson(θ | η) Gamma(η; r, β) dη` by the trapezoid rule on a wide grid.
fn mixture_pmf_quadrature(theta: u64, cfg: &ToyConfig) -> f64 {
    let (r, beta) = (cfg.gamma_shape, cfg.gamma_rate);
    let t = theta as f64;
    let log_gamma_density =
        |eta: f64| r * beta.ln() + (r - 1.0) * eta.ln() - beta * eta - ln_gamma(r);
    let log_poisson = |eta: f64| -eta + t * eta.ln() - ln_gamma(t + 1.0);
    let (lo, hi, n) = (1e-6, 80.0, 200_000);
    let h = (hi - lo) / n as f64;
    (0..=n)
        .map(|k| {
            let eta = lo + k as f64 * h;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            w * (log_gamma_density(eta) + log_poisson(eta)).exp()
        })
        .sum::<f64>()
        * h
}

#[test]
fn negative_binomial_oracle_matches_quadrature() {
    let cfg = ToyConfig::default();
    for theta in [0, 5, 12, 20, 31, 50] {
        let q = mixture_pmf_quadrature(theta, &cfg);
        let nb = nb_exact_pmf(theta, &cfg);
        assert!(
            (q - nb).abs() < 1e-9 * nb.max(1e-12),
            "θ {theta}: {q} vs {nb}"
        );
    }
    let total: f64 = (0..400).map(|t| nb_exact_pmf(t, &cfg)).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let m: f64 = (0..400).map(|t| t as f64 * nb_exact_pmf(t, &cfg)).sum();
    assert!((m - 20.0).abs() < 1e-9);
}

#[test]
fn toy_coin_lands_heads_with_probability_ratio() {
    let cfg = ToyConfig::default();
    let reps = 200_000;
    let mut rng = substream(8, 0);
    for theta in [0u64, 8, 20, 35] {
        let p = nb_exact_pmf(theta, &cfg) / log_envelope_d(theta).exp();
        assert!(p <= 1.0);
        let mut coin = toy_p_coin(theta, &cfg);
        let heads = (0..reps).filter(|_| coin.flip(&mut rng).unwrap()).count();
        assert!(
            within_sigmas(heads as f64 / reps as f64, p, reps, 4.0),
            "θ {theta}"
        );
    }
}

/// Stationary expectations of the Barker acceptance probability and of the
/// expected two-coin loop count under the 20-offset uniform walk.
fn toy_stationary_expectations(cfg: &ToyConfig) -> (f64, f64) {
    let pi = |t: i64| nb_exact_pmf(t as u64, cfg);
    let d = |t: i64| log_envelope_d(t as u64).exp();
    let (mut acceptance, mut loops) = (0.0, 0.0);
    for t in 0..150i64 {
        for u in (t - 10..=t + 10).filter(|&u| u != t && u >= 0) {
            let w = pi(t) / 20.0;
            acceptance += w * pi(u) / (pi(t) + pi(u));
            loops += w * (d(t) + d(u)) / (pi(t) + pi(u));
        }
    }
    (acceptance, loops)
}

#[test]
fn toy_acceptance_rate_matches_stationary_expectation() {
    let cfg = ToyConfig::default();
    let (acceptance, loops) = toy_stationary_expectations(&cfg);
    let run = run_toy(&ToyConfig { seed: 21, ..cfg }).unwrap();
    assert!(
        (run.summary.acceptance_rate - acceptance).abs() < 0.005,
        "{} vs {acceptance}",
        run.summary.acceptance_rate
    );
    // the loop law is so heavy-tailed that typical sample means sit well
    // below the expectation
    assert!(
        run.summary.mean_loops < loops,
        "{} vs {loops}",
        run.summary.mean_loops
    );
}
