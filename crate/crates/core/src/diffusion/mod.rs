//! Exact Bayesian inference for unit-diffusion-coefficient SDEs.
//!
//! Observations `y_0, ..., y_n` are mapped by a parameter-free Lamperti
//! transform to `x_i`, the missing bridges between them are Brownian bridges
//! reweighted by `exp(-∫ g)` with `g = (α² + α′) / 2`, and a Gibbs sampler
//! alternates factory Barker updates of the bridges and of the drift
//! parameters. Layers give certified bounds on `g` along each bridge, and
//! Poisson coins turn those bounds into events of the required probability,
//! so no transition density is ever evaluated and no time grid is used.
//!
//! The model interface assumes the Lamperti map does not depend on the
//! parameters. Observation Jacobians and Gaussian increment terms are then
//! constant in the parameters and cancel from every acceptance ratio.

mod gibbs;
mod io;
mod models;
mod skeleton;

pub use gibbs::{
    gibbs_run, param_update, path_update, GibbsConfig, GibbsRun, GibbsState, GibbsSummary,
    LoopHistogram, ParamCoin, ParameterSummary, StepOutcome, ThetaWalk, UpdateConfig,
};
pub use io::{read_observations, write_observations, write_skeletons_json, Observations};
pub use models::{
    simulate_wf_data, wf_drift_terms, wf_lamperti, wf_lamperti_inverse, ConstantDrift, DriftTerms,
    OrnsteinUhlenbeck, QuadraticOverSine, WrightFisher,
};
pub use skeleton::{
    audit_bounds, fit_to_domain, interval_bounds, poisson_coin, propose_bridge, tighten_layer,
    BoundPiece, DomainFit, IntervalSkeleton, PiecewiseBounds,
};

use serde::{Deserialize, Serialize};

use crate::bridge::BridgeSpec;
use crate::chain::TraceState;
use crate::error::Result;

/// Drift parameters `(γ1, γ2)`: drift force and reversible mean.
///
/// Stub models reuse `gamma1` as their single parameter and ignore `gamma2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaState {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl ThetaState {
    pub fn new(gamma1: f64, gamma2: f64) -> Self {
        ThetaState { gamma1, gamma2 }
    }

    /// Mutation rates `(θ1, θ2) = (γ1 γ2, γ1 (1 - γ2))`.
    pub fn mutation_rates(&self) -> (f64, f64) {
        (self.gamma1 * self.gamma2, self.gamma1 * (1.0 - self.gamma2))
    }
}

impl TraceState for ThetaState {
    fn column_names() -> Vec<&'static str> {
        vec!["gamma1", "gamma2"]
    }
    fn columns(&self) -> Vec<String> {
        vec![self.gamma1.to_string(), self.gamma2.to_string()]
    }
}

/// Certified range `[inf, sup]` of a potential over a band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialBounds {
    pub inf: f64,
    pub sup: f64,
}

impl PotentialBounds {
    pub fn new(inf: f64, sup: f64) -> Self {
        debug_assert!(inf <= sup, "empty bounds [{inf}, {sup}]");
        PotentialBounds { inf, sup }
    }

    /// Lower bound `a` used in the Poisson coin.
    pub fn a(&self) -> f64 {
        self.inf
    }

    /// Dominating intensity `r = sup - inf ≥ 0`.
    pub fn r(&self) -> f64 {
        self.sup - self.inf
    }

    /// Bounds of `k f` given bounds of `f`.
    pub fn scale(self, k: f64) -> Self {
        if k >= 0.0 {
            PotentialBounds::new(self.inf * k, self.sup * k)
        } else {
            PotentialBounds::new(self.sup * k, self.inf * k)
        }
    }

    /// Pushes both ends outwards by `1e-12 · max(1, |inf|, |sup|)`.
    pub fn widen(self) -> Self {
        let pad = 1e-12 * self.inf.abs().max(self.sup.abs()).max(1.0);
        PotentialBounds::new(self.inf - pad, self.sup + pad)
    }
}

/// A one-dimensional SDE `dX = α(X; θ) dt + dW` after the Lamperti transform.
pub trait DiffusionModel: Sync {
    /// Open state space of the transformed process.
    fn domain(&self) -> (f64, f64);

    /// Observation space to transformed space. Must not depend on θ.
    fn lamperti(&self, y: f64) -> Result<f64>;

    fn lamperti_inverse(&self, u: f64) -> f64;

    fn alpha(&self, u: f64, theta: &ThetaState) -> f64;

    /// `∂α/∂u`.
    fn alpha_prime(&self, u: f64, theta: &ThetaState) -> f64;

    /// Girsanov potential `(α² + α′) / 2`.
    fn g(&self, u: f64, theta: &ThetaState) -> f64 {
        let a = self.alpha(u, theta);
        0.5 * (a * a + self.alpha_prime(u, theta))
    }

    /// An antiderivative of `α` in `u`. Only differences enter inference.
    fn antiderivative(&self, u: f64, theta: &ThetaState) -> f64;

    /// Certified `inf` and `sup` of `g(·; θ)` over `[lo, hi] ⊂ domain`.
    fn g_bounds(&self, lo: f64, hi: f64, theta: &ThetaState) -> PotentialBounds;

    /// `g(u; new) - g(u; old)`. Override when the difference can be formed
    /// with less cancellation than subtracting two evaluations.
    fn g_diff(&self, u: f64, new: &ThetaState, old: &ThetaState) -> f64 {
        self.g(u, new) - self.g(u, old)
    }

    /// Certified bounds of `g(·; new) - g(·; old)` over `[lo, hi] ⊂ domain`.
    fn g_diff_bounds(
        &self,
        lo: f64,
        hi: f64,
        new: &ThetaState,
        old: &ThetaState,
    ) -> PotentialBounds;

    fn theta_in_domain(&self, theta: &ThetaState) -> bool;

    /// Log prior density up to a constant. Flat by default.
    fn log_prior(&self, _theta: &ThetaState) -> f64 {
        0.0
    }
}

/// `Ẋ_s = X_s - ` the line through the bridge endpoints.
pub fn detrend(value: f64, s: f64, spec: &BridgeSpec) -> f64 {
    value - trend(s, spec)
}

/// Inverse of [`detrend`].
pub fn retrend(value: f64, s: f64, spec: &BridgeSpec) -> f64 {
    value + trend(s, spec)
}

fn trend(s: f64, spec: &BridgeSpec) -> f64 {
    let w = (s - spec.t_offset) / spec.duration;
    (1.0 - w) * spec.x_start + w * spec.x_end
}
