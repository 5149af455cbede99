//! Barker's MCMC with two-coin Bernoulli-factory acceptance.
//!
//! The crate is organised bottom-up:
//!
//! * [`coin`]: coins, the two-coin algorithm and product coins.
//! * [`chain`]: Barker (factory and closed-form) and Metropolis-Hastings
//!   steps, chain traces.
//! * [`diagnostics`]: batch means, ESS and goodness-of-fit statistics.
//! * [`toy`]: the Poisson-mixture example with its Negative Binomial oracle.
//! * [`bridge`]: Brownian bridges with certified layers.
//! * [`diffusion`]: exact Gibbs inference for unit-volatility diffusions,
//!   including the Wright-Fisher model.

pub mod bridge;
pub mod chain;
pub mod coin;
pub mod diagnostics;
pub mod diffusion;
pub mod error;
pub mod rng;
pub mod toy;

pub use error::{Error, Result};
