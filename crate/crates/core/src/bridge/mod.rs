//! Brownian bridges with certified bounds ("layers").
//!
//! A [`RevealedPath`] is a Brownian bridge known only at finitely many times
//! together with a [`Layer`]: interval constraints on the path infimum and
//! supremum. Further points can be revealed from their exact conditional law
//! and the layer can be refined, without ever discretising the path.

mod layer;
mod series;

pub use layer::{
    refine_layer, reveal_point, sample_layer, Bands, BridgeSpec, Layer, RevealedPath, Side,
    DEFAULT_DELTA,
};
pub use series::{containment_bounds, decide_category, decide_positive, Interval, DEFAULT_TOL};

use crate::error::Result;

/// Probability that the bridge described by `spec` stays inside
/// `(lower, upper)`, with absolute error below `tol`.
pub fn crossing_prob(spec: &BridgeSpec, lower: f64, upper: f64, tol: f64) -> Result<f64> {
    let b = containment_bounds(spec.x_start, spec.x_end, spec.duration, lower, upper, tol)?;
    debug_assert!(b.width() <= tol + 1e-15);
    Ok(b.mid())
}
