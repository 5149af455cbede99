//! Bernoulli-factory primitives.
//!
//! A [`Coin`] is an event of fixed but unknown probability that can only be
//! sampled. The two-coin algorithm turns two weighted coins `(c1, p1)` and
//! `(c2, p2)` into an event of probability `c1 p1 / (c1 p1 + c2 p2)`, which is
//! exactly the form of Barker's acceptance probability.

use rand::Rng;

use crate::error::{Error, Result};

/// A lazily sampleable Bernoulli event.
///
/// Each call to [`Coin::flip`] must be an independent draw with the same
/// success probability, given independent randomness from `rng`. Flips may
/// have side effects (revealing more of a latent path, for instance) as long
/// as the law of each flip is unchanged.
pub trait Coin {
    fn flip<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<bool>;
}

impl<C: Coin + ?Sized> Coin for &mut C {
    fn flip<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<bool> {
        (**self).flip(rng)
    }
}

/// A coin that always lands the same way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstCoin(pub bool);

impl Coin for ConstCoin {
    fn flip<R: Rng + ?Sized>(&mut self, _rng: &mut R) -> Result<bool> {
        Ok(self.0)
    }
}

/// A coin with a known success probability. Mostly useful for testing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliCoin {
    p: f64,
}

impl BernoulliCoin {
    pub fn new(p: f64) -> Self {
        assert!((0.0..=1.0).contains(&p), "probability {p} outside [0, 1]");
        Self { p }
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

impl Coin for BernoulliCoin {
    fn flip<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<bool> {
        Ok(rng.random::<f64>() < self.p)
    }
}

/// Product coin: lands heads iff every factor does.
///
/// Factors are flipped in order and the flip stops at the first tails, so
/// later factors are never touched once the outcome is known.
#[derive(Debug, Clone)]
pub struct AndCoin<C> {
    factors: Vec<C>,
}

/// Builds the product coin of `coins`, with success probability `∏ p_i`.
///
/// # Panics
///
/// If `coins` is empty.
pub fn and_coin<C: Coin>(coins: Vec<C>) -> AndCoin<C> {
    assert!(!coins.is_empty(), "and_coin needs at least one factor");
    AndCoin { factors: coins }
}

impl<C> AndCoin<C> {
    pub fn into_inner(self) -> Vec<C> {
        self.factors
    }
}

impl<C: Coin> Coin for AndCoin<C> {
    fn flip<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<bool> {
        for c in self.factors.iter_mut() {
            if !c.flip(rng)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// A coin paired with the natural log of its positive weight `c`.
#[derive(Debug, Clone)]
pub struct WeightedCoin<C> {
    pub log_weight: f64,
    pub coin: C,
}

impl<C> WeightedCoin<C> {
    pub fn new(log_weight: f64, coin: C) -> Self {
        Self { log_weight, coin }
    }
}

/// Result of one run of the two-coin algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwoCoinOutcome {
    pub bit: bool,
    /// Passes through the first step; always at least one.
    pub loops: u64,
}

/// Which weighted coin the first-stage draw selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

/// Probability `c_a / (c_a + c_b)` from log weights, without leaving log space.
pub fn first_coin_probability(log_weight_a: f64, log_weight_b: f64) -> f64 {
    1.0 / (1.0 + (log_weight_b - log_weight_a).exp())
}

/// Runs the two-coin algorithm on two weighted coins.
///
/// Returns `bit = true` with probability `c_a p_a / (c_a p_a + c_b p_b)`.
/// `loop_cap` exists for debugging loose bounds; when it fires the step is
/// aborted with [`Error::LoopCapExceeded`] instead of being truncated.
pub fn two_coin<A, B, R>(
    a: &mut WeightedCoin<A>,
    b: &mut WeightedCoin<B>,
    rng: &mut R,
    loop_cap: Option<u64>,
) -> Result<TwoCoinOutcome>
where
    A: Coin,
    B: Coin,
    R: Rng + ?Sized,
{
    let (la, lb) = (a.log_weight, b.log_weight);
    two_coin_with(
        la,
        lb,
        |side, rng: &mut R| match side {
            Side::A => a.coin.flip(rng),
            Side::B => b.coin.flip(rng),
        },
        rng,
        loop_cap,
    )
}

/// Two-coin algorithm where both second-stage coins are served by one closure.
///
/// Useful when the two coins share mutable state (the same latent path
/// flipped under two parameter values, say) and cannot be borrowed apart.
pub fn two_coin_with<R, F>(
    log_weight_a: f64,
    log_weight_b: f64,
    mut flip: F,
    rng: &mut R,
    loop_cap: Option<u64>,
) -> Result<TwoCoinOutcome>
where
    R: Rng + ?Sized,
    F: FnMut(Side, &mut R) -> Result<bool>,
{
    for w in [log_weight_a, log_weight_b] {
        if !w.is_finite() {
            return Err(Error::InvalidWeight(w));
        }
    }
    let prob_a = first_coin_probability(log_weight_a, log_weight_b);
    let mut loops = 0u64;
    loop {
        if let Some(cap) = loop_cap {
            if loops >= cap {
                return Err(Error::LoopCapExceeded {
                    cap,
                    log_weight_a,
                    log_weight_b,
                });
            }
        }
        loops += 1;
        let side = if rng.random::<f64>() < prob_a {
            Side::A
        } else {
            Side::B
        };
        if flip(side, rng)? {
            return Ok(TwoCoinOutcome {
                bit: side == Side::A,
                loops,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn certain_coins_take_one_loop() {
        let mut rng = rng();
        let mut a = WeightedCoin::new(0.0, ConstCoin(true));
        let mut b = WeightedCoin::new(0.0, ConstCoin(true));
        let mut ones = 0;
        for _ in 0..10_000 {
            let out = two_coin(&mut a, &mut b, &mut rng, None).unwrap();
            assert_eq!(out.loops, 1);
            ones += out.bit as u32;
        }
        let f = ones as f64 / 1e4;
        assert!((f - 0.5).abs() < 4.0 * (0.25f64 / 1e4).sqrt());
    }

    #[test]
    fn null_side_never_wins() {
        let mut rng = rng();
        let mut a = WeightedCoin::new(0.0, ConstCoin(true));
        let mut b = WeightedCoin::new(0.0, ConstCoin(false));
        for _ in 0..1000 {
            assert!(two_coin(&mut a, &mut b, &mut rng, None).unwrap().bit);
        }
    }

    #[test]
    fn loop_cap_fires() {
        let mut rng = rng();
        let mut a = WeightedCoin::new(0.0, ConstCoin(false));
        let mut b = WeightedCoin::new(0.0, BernoulliCoin::new(1e-9));
        let err = two_coin(&mut a, &mut b, &mut rng, Some(5)).unwrap_err();
        assert!(matches!(err, Error::LoopCapExceeded { cap: 5, .. }));
    }

    #[test]
    fn non_finite_weight_rejected() {
        let mut rng = rng();
        let mut a = WeightedCoin::new(f64::NEG_INFINITY, ConstCoin(true));
        let mut b = WeightedCoin::new(0.0, ConstCoin(true));
        assert!(matches!(
            two_coin(&mut a, &mut b, &mut rng, None),
            Err(Error::InvalidWeight(_))
        ));
    }

    #[test]
    fn first_coin_probability_is_stable() {
        assert_eq!(first_coin_probability(800.0, 0.0), 1.0);
        assert_eq!(first_coin_probability(0.0, 800.0), 0.0);
        assert!((first_coin_probability(2f64.ln(), 0.0) - 2.0 / 3.0).abs() < 1e-15);
        // common rescaling leaves the ratio alone
        let p = first_coin_probability(1000.0 + 2f64.ln(), 1000.0);
        assert!((p - 2.0 / 3.0).abs() < 1e-12);
    }

    #[derive(Default)]
    struct Counting {
        flips: u32,
        inner: Option<BernoulliCoin>,
    }

    impl Coin for Counting {
        fn flip<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<bool> {
            self.flips += 1;
            match &mut self.inner {
                Some(c) => c.flip(rng),
                None => Ok(false),
            }
        }
    }

    #[test]
    fn and_coin_short_circuits() {
        let mut rng = rng();
        let mut coin = and_coin(vec![
            Counting::default(),
            Counting {
                flips: 0,
                inner: Some(BernoulliCoin::new(1.0)),
            },
        ]);
        for _ in 0..10 {
            assert!(!coin.flip(&mut rng).unwrap());
        }
        let factors = coin.into_inner();
        assert_eq!(factors[0].flips, 10);
        assert_eq!(factors[1].flips, 0);
    }

    #[test]
    fn and_coin_of_certain_coins_is_certain() {
        let mut rng = rng();
        let mut coin = and_coin(vec![ConstCoin(true), ConstCoin(true)]);
        assert!((0..100).all(|_| coin.flip(&mut rng).unwrap()));
    }

    #[test]
    #[should_panic]
    fn and_coin_rejects_empty() {
        let _ = and_coin::<ConstCoin>(vec![]);
    }
}
