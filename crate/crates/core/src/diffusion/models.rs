//! Concrete diffusion models: the Wright-Fisher diffusion with mutation and
//! a few tractable stubs used for validation.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use super::io::Observations;
use super::{DiffusionModel, PotentialBounds, ThetaState};
use crate::error::{Error, Result};

/// `f(u) = (p2 cos²u + p1 cos u + p0) / (8 sin²u)` on `(0, π)`.
///
/// Both the Wright-Fisher potential and differences of it between two
/// parameter values have this form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticOverSine {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

impl QuadraticOverSine {
    pub fn value(&self, u: f64) -> f64 {
        let (s, c) = u.sin_cos();
        (self.p2 * c * c + self.p1 * c + self.p0) / (8.0 * s * s)
    }

    fn value_at_cos(&self, c: f64) -> f64 {
        (self.p2 * c * c + self.p1 * c + self.p0) / (8.0 * (1.0 - c) * (1.0 + c))
    }

    /// Exact range over `[lo, hi] ⊂ (0, π)`, widened by a relative `1e-12`.
    ///
    /// In `c = cos u` the derivative of `P(c) / (1 - c²)` has numerator
    /// `p1 c² + 2 (p0 + p2) c + p1`, so interior extremes sit at its roots.
    /// The roots multiply to one, so at most one lies in `(-1, 1)`.
    pub fn bounds(&self, lo: f64, hi: f64) -> PotentialBounds {
        debug_assert!(0.0 < lo && lo <= hi && hi < PI, "band [{lo}, {hi}]");
        let (flo, fhi) = (self.value(lo), self.value(hi));
        let (mut inf, mut sup) = (flo.min(fhi), flo.max(fhi));
        let (c_lo, c_hi) = (hi.cos(), lo.cos());
        let k = self.p1;
        let m = 2.0 * (self.p0 + self.p2);
        let mut roots = [f64::NAN; 2];
        if k == 0.0 {
            if m != 0.0 {
                roots[0] = 0.0;
            }
        } else {
            let disc = m * m - 4.0 * k * k;
            if disc >= 0.0 {
                let q = -0.5 * (m + m.signum() * disc.sqrt());
                roots = [q / k, k / q];
            }
        }
        for c in roots {
            if c > c_lo && c < c_hi {
                let v = self.value_at_cos(c);
                inf = inf.min(v);
                sup = sup.max(v);
            }
        }
        PotentialBounds::new(inf, sup).widen()
    }
}

/// `α`, `g` and the antiderivative `A` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftTerms {
    pub alpha: f64,
    pub g: f64,
    pub antiderivative: f64,
}

const WF_DOMAIN: &str = "(0, 1)";
const WF_U_DOMAIN: &str = "(0, π)";

/// `η(y) = 2 arcsin √y`, mapping `(0, 1)` onto `(0, π)`.
pub fn wf_lamperti(y: f64) -> Result<f64> {
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::Domain {
            value: y,
            domain: WF_DOMAIN,
        });
    }
    Ok(2.0 * y.sqrt().asin())
}

/// `η⁻¹(u) = sin²(u / 2)`.
pub fn wf_lamperti_inverse(u: f64) -> f64 {
    let s = (0.5 * u).sin();
    s * s
}

/// Coefficients `(c0, c1) = (γ1 (2γ2 - 1), γ1 - 1)` of the transformed drift
/// `α(u) = (c0 + c1 cos u) / (2 sin u)`.
fn wf_coefficients(theta: &ThetaState) -> (f64, f64) {
    (
        theta.gamma1 * (2.0 * theta.gamma2 - 1.0),
        theta.gamma1 - 1.0,
    )
}

fn wf_potential(theta: &ThetaState) -> QuadraticOverSine {
    // (c0 + c1 c)² - 2 (c1 + c0 c)
    let (c0, c1) = wf_coefficients(theta);
    QuadraticOverSine {
        p0: c0 * c0 - 2.0 * c1,
        p1: 2.0 * c0 * (c1 - 1.0),
        p2: c1 * c1,
    }
}

fn wf_potential_diff(new: &ThetaState, old: &ThetaState) -> QuadraticOverSine {
    let (a, b) = (wf_potential(new), wf_potential(old));
    QuadraticOverSine {
        p0: a.p0 - b.p0,
        p1: a.p1 - b.p1,
        p2: a.p2 - b.p2,
    }
}

/// Drift, potential and antiderivative of the transformed Wright-Fisher
/// diffusion. `A` is normalised by `A(π/2) = 0`.
pub fn wf_drift_terms(u: f64, theta: &ThetaState) -> Result<DriftTerms> {
    if !(u > 0.0 && u < PI) {
        return Err(Error::Domain {
            value: u,
            domain: WF_U_DOMAIN,
        });
    }
    let wf = WrightFisher;
    Ok(DriftTerms {
        alpha: wf.alpha(u, theta),
        g: wf.g(u, theta),
        antiderivative: wf.antiderivative(u, theta),
    })
}

/// Neutral Wright-Fisher diffusion with mutation,
/// `dY = ½ (θ1 (1 - Y) - θ2 Y) dt + √(Y (1 - Y)) dW`, in the `(γ1, γ2)`
/// parametrisation. Flat prior on `γ1 > 0, 0 < γ2 < 1`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WrightFisher;

impl DiffusionModel for WrightFisher {
    fn domain(&self) -> (f64, f64) {
        (0.0, PI)
    }

    fn lamperti(&self, y: f64) -> Result<f64> {
        wf_lamperti(y)
    }

    fn lamperti_inverse(&self, u: f64) -> f64 {
        wf_lamperti_inverse(u)
    }

    fn alpha(&self, u: f64, theta: &ThetaState) -> f64 {
        let (c0, c1) = wf_coefficients(theta);
        let (s, c) = u.sin_cos();
        (c0 + c1 * c) / (2.0 * s)
    }

    fn alpha_prime(&self, u: f64, theta: &ThetaState) -> f64 {
        let (c0, c1) = wf_coefficients(theta);
        let (s, c) = u.sin_cos();
        -(c1 + c0 * c) / (2.0 * s * s)
    }

    fn g(&self, u: f64, theta: &ThetaState) -> f64 {
        wf_potential(theta).value(u)
    }

    fn antiderivative(&self, u: f64, theta: &ThetaState) -> f64 {
        let (c0, c1) = wf_coefficients(theta);
        0.5 * c0 * (0.5 * u).tan().ln() + 0.5 * c1 * u.sin().ln()
    }

    fn g_bounds(&self, lo: f64, hi: f64, theta: &ThetaState) -> PotentialBounds {
        wf_potential(theta).bounds(lo, hi)
    }

    fn g_diff(&self, u: f64, new: &ThetaState, old: &ThetaState) -> f64 {
        wf_potential_diff(new, old).value(u)
    }

    fn g_diff_bounds(
        &self,
        lo: f64,
        hi: f64,
        new: &ThetaState,
        old: &ThetaState,
    ) -> PotentialBounds {
        wf_potential_diff(new, old).bounds(lo, hi)
    }

    fn theta_in_domain(&self, theta: &ThetaState) -> bool {
        theta.gamma1 > 0.0 && theta.gamma1.is_finite() && theta.gamma2 > 0.0 && theta.gamma2 < 1.0
    }
}

/// Brownian motion with constant drift `α ≡ γ1`, so `g ≡ γ1² / 2`.
///
/// `g_bounds` reports `[g - lower_slack, g + upper_slack]`, which lets tests
/// drive the Poisson coin with a known gap `g - a = lower_slack` and an
/// arbitrary amount of over-thinning. With zero slack every coin is certain.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConstantDrift {
    pub lower_slack: f64,
    pub upper_slack: f64,
}

impl DiffusionModel for ConstantDrift {
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn lamperti(&self, y: f64) -> Result<f64> {
        Ok(y)
    }

    fn lamperti_inverse(&self, u: f64) -> f64 {
        u
    }

    fn alpha(&self, _u: f64, theta: &ThetaState) -> f64 {
        theta.gamma1
    }

    fn alpha_prime(&self, _u: f64, _theta: &ThetaState) -> f64 {
        0.0
    }

    fn antiderivative(&self, u: f64, theta: &ThetaState) -> f64 {
        theta.gamma1 * u
    }

    fn g_bounds(&self, _lo: f64, _hi: f64, theta: &ThetaState) -> PotentialBounds {
        let g = 0.5 * theta.gamma1 * theta.gamma1;
        PotentialBounds::new(g - self.lower_slack, g + self.upper_slack)
    }

    fn g_diff_bounds(
        &self,
        _lo: f64,
        _hi: f64,
        new: &ThetaState,
        old: &ThetaState,
    ) -> PotentialBounds {
        let d = 0.5 * (new.gamma1 * new.gamma1 - old.gamma1 * old.gamma1);
        PotentialBounds::new(d, d)
    }

    fn theta_in_domain(&self, theta: &ThetaState) -> bool {
        theta.gamma1.is_finite()
    }
}

/// Ornstein-Uhlenbeck process `dX = -κ X dt + dW` with `κ = γ1 > 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OrnsteinUhlenbeck;

/// Range of `q2 u² + q0` over `[lo, hi]`.
fn quadratic_bounds(q2: f64, q0: f64, lo: f64, hi: f64) -> PotentialBounds {
    let sq_max = (lo * lo).max(hi * hi);
    let sq_min = if lo <= 0.0 && 0.0 <= hi {
        0.0
    } else {
        (lo * lo).min(hi * hi)
    };
    let (a, b) = (q2 * sq_min + q0, q2 * sq_max + q0);
    PotentialBounds::new(a.min(b), a.max(b)).widen()
}

impl DiffusionModel for OrnsteinUhlenbeck {
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn lamperti(&self, y: f64) -> Result<f64> {
        Ok(y)
    }

    fn lamperti_inverse(&self, u: f64) -> f64 {
        u
    }

    fn alpha(&self, u: f64, theta: &ThetaState) -> f64 {
        -theta.gamma1 * u
    }

    fn alpha_prime(&self, _u: f64, theta: &ThetaState) -> f64 {
        -theta.gamma1
    }

    fn antiderivative(&self, u: f64, theta: &ThetaState) -> f64 {
        -0.5 * theta.gamma1 * u * u
    }

    fn g_bounds(&self, lo: f64, hi: f64, theta: &ThetaState) -> PotentialBounds {
        let k = theta.gamma1;
        quadratic_bounds(0.5 * k * k, -0.5 * k, lo, hi)
    }

    fn g_diff_bounds(
        &self,
        lo: f64,
        hi: f64,
        new: &ThetaState,
        old: &ThetaState,
    ) -> PotentialBounds {
        let (a, b) = (new.gamma1, old.gamma1);
        quadratic_bounds(0.5 * (a * a - b * b), -0.5 * (a - b), lo, hi)
    }

    fn theta_in_domain(&self, theta: &ThetaState) -> bool {
        theta.gamma1 > 0.0 && theta.gamma1.is_finite()
    }
}

const CLAMP_EPS: f64 = 1e-6;

/// Synthetic Wright-Fisher data by Euler-Maruyama with iterates clamped to
/// `(ε, 1 - ε)`, `ε = 1e-6`.
///
/// The initial value is drawn from the stationary `Beta(θ1, θ2)` law. Each
/// gap between observation times is split into equal sub-steps no longer
/// than `step`, so the observation times are hit exactly. For data
/// generation only; inference never uses a discretisation.
pub fn simulate_wf_data<R: Rng + ?Sized>(
    theta: &ThetaState,
    times: &[f64],
    step: f64,
    rng: &mut R,
) -> Result<Observations> {
    if !WrightFisher.theta_in_domain(theta) {
        return Err(Error::config("theta", "need gamma1 > 0 and 0 < gamma2 < 1"));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::config("step", "must be positive"));
    }
    if times.is_empty() || times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("times", "must be non-empty and increasing"));
    }
    let (th1, th2) = theta.mutation_rates();
    let stationary = Beta::new(th1, th2).map_err(|e| Error::config("theta", e.to_string()))?;
    let mut y: f64 = stationary.sample(rng).clamp(CLAMP_EPS, 1.0 - CLAMP_EPS);
    let mut values = Vec::with_capacity(times.len());
    values.push(y);
    for w in times.windows(2) {
        let gap = w[1] - w[0];
        let n_sub = (gap / step).ceil().max(1.0) as usize;
        let h = gap / n_sub as f64;
        let sqrt_h = h.sqrt();
        for _ in 0..n_sub {
            let z: f64 = StandardNormal.sample(rng);
            let drift = 0.5 * (th1 * (1.0 - y) - th2 * y);
            y += drift * h + (y * (1.0 - y)).sqrt() * sqrt_h * z;
            y = y.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS);
        }
        values.push(y);
    }
    Ok(Observations {
        times: times.to_vec(),
        values,
    })
}
