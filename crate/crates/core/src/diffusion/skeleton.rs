//! Per-interval bridge skeletons, certified potential bounds and the
//! Poisson coin.
//!
//! Layers are held for the bridge of `X` itself (endpoints `x_{i-1}`,
//! `x_i`) rather than for the detrended bridge `Ẋ`. The two carry the same
//! information because detrending is a deterministic shift, but bounds on
//! `X` can be checked against the model domain directly.
//!
//! Bounds on the potential are piecewise constant in time: one pair per
//! segment between revealed points, taken from that segment's bands.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{detrend, DiffusionModel, PotentialBounds, ThetaState};
use crate::bridge::{sample_layer, Bands, BridgeSpec, RevealedPath, Side};
use crate::error::{Error, Result};

const MAX_DOMAIN_REFINEMENTS: usize = 400;
const MAX_BRIDGE_PROPOSALS: usize = 100_000;

/// The missing path on `[t_{i-1}, t_i]`: observations, layer and every
/// point revealed so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSkeleton {
    pub index: usize,
    /// Observations `(y_{i-1}, y_i)`.
    pub y: (f64, f64),
    /// Bridge of the transformed process `X`, endpoints `x_{i-1}`, `x_i`.
    pub path: RevealedPath,
}

impl IntervalSkeleton {
    pub fn spec(&self) -> &BridgeSpec {
        self.path.spec()
    }

    pub fn duration(&self) -> f64 {
        self.spec().duration
    }

    /// Revealed points of the detrended bridge `Ẋ`; both ends are zero.
    pub fn detrended_points(&self) -> Vec<(f64, f64)> {
        let spec = *self.spec();
        self.path
            .points()
            .map(|(t, x)| (t, detrend(x, t, &spec)))
            .collect()
    }

    /// Certified band `(L, U)` of `X` on this interval.
    pub fn band(&self) -> (f64, f64) {
        let l = self.path.layer();
        (l.lower(), l.upper())
    }

    /// Flips the coin of probability `exp(-∫ (g - a_i))` for this bridge,
    /// with `a_i` constant over the interval.
    pub fn poisson_coin<M, R>(&mut self, model: &M, theta: &ThetaState, rng: &mut R) -> Result<bool>
    where
        M: DiffusionModel + ?Sized,
        R: Rng + ?Sized,
    {
        let bounds = interval_bounds(self, theta, model)?;
        let pieces = PiecewiseBounds::constant(self.spec(), bounds);
        poisson_coin(&mut self.path, |u| model.g(u, theta), &pieces, rng)
    }
}

/// Outcome of checking a layer against the model domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainFit {
    /// The certified band lies strictly inside the domain.
    Inside,
    /// The path is certain to touch or leave the domain.
    Outside,
}

/// Refines `path` until its band is certified inside `domain` or the path is
/// certified to leave it.
///
/// Refinement draws from the conditional law of the finer layer, and the
/// true extremes are almost surely not on the boundary, so this terminates
/// almost surely.
pub fn fit_to_domain<R: Rng + ?Sized>(
    path: &mut RevealedPath,
    domain: (f64, f64),
    rng: &mut R,
) -> Result<DomainFit> {
    let (lo, hi) = domain;
    if path.values().iter().any(|&v| !(lo < v && v < hi)) {
        return Ok(DomainFit::Outside);
    }
    for _ in 0..MAX_DOMAIN_REFINEMENTS {
        let mut pending = None;
        for (j, b) in path.segments().iter().enumerate() {
            if b.inf_band.1 <= lo || b.sup_band.0 >= hi {
                return Ok(DomainFit::Outside);
            }
            if pending.is_none() && b.lower() <= lo {
                pending = Some((j, Side::Lower));
            } else if pending.is_none() && b.upper() >= hi {
                pending = Some((j, Side::Upper));
            }
        }
        match pending {
            None => return Ok(DomainFit::Inside),
            Some((j, side)) => path.refine_segment(j, side, rng)?,
        }
    }
    Err(Error::NonConvergence(format!(
        "layer not resolved against domain ({lo}, {hi}) after {MAX_DOMAIN_REFINEMENTS} bisections"
    )))
}

/// Draws a Brownian bridge for `spec` conditioned to stay inside `domain`,
/// by drawing unconditioned bridges until one is certified inside.
pub fn propose_bridge<R: Rng + ?Sized>(
    spec: &BridgeSpec,
    domain: (f64, f64),
    delta: f64,
    rng: &mut R,
) -> Result<RevealedPath> {
    for _ in 0..MAX_BRIDGE_PROPOSALS {
        let mut path = sample_layer(spec, delta, rng)?;
        if fit_to_domain(&mut path, domain, rng)? == DomainFit::Inside {
            return Ok(path);
        }
    }
    Err(Error::NonConvergence(format!(
        "no bridge inside the domain after {MAX_BRIDGE_PROPOSALS} proposals"
    )))
}

/// Tightens the skeleton until the total dominating Poisson rate
/// `Σ_j Δs_j r_j` of `bounds` over its segments is at most `rate_target`,
/// using at most `max_steps` operations.
///
/// Each step works on the segment with the largest rate: an extreme whose
/// band is wider than `√Δs_j` is bisected, otherwise the path is revealed
/// at the segment midpoint. Finer bands and
/// extra points only add information about the same path, so this never
/// changes its law.
pub fn tighten_layer<B, R>(
    path: &mut RevealedPath,
    bounds: B,
    rate_target: f64,
    max_steps: u32,
    rng: &mut R,
) -> Result<()>
where
    B: Fn(f64, f64) -> PotentialBounds,
    R: Rng + ?Sized,
{
    let rate = |path: &RevealedPath, j: usize| {
        let (s0, s1) = path.segment_span(j);
        let b = path.segments()[j];
        (s1 - s0) * bounds(b.lower(), b.upper()).r()
    };
    let mut rates: Vec<f64> = (0..path.segments().len()).map(|j| rate(path, j)).collect();
    for _ in 0..max_steps {
        let total: f64 = rates.iter().sum();
        if total <= rate_target {
            break;
        }
        let j = (0..rates.len())
            .max_by(|&a, &b| rates[a].total_cmp(&rates[b]))
            .expect("a path has at least one segment");
        let (s0, s1) = path.segment_span(j);
        let b: Bands = path.segments()[j];
        let (low, high) = (b.band_width(Side::Lower), b.band_width(Side::Upper));
        if low.max(high) > (s1 - s0).sqrt() {
            let side = if low >= high {
                Side::Lower
            } else {
                Side::Upper
            };
            path.refine_segment(j, side, rng)?;
            rates[j] = rate(path, j);
        } else {
            path.reveal(0.5 * (s0 + s1), rng)?;
            rates[j] = rate(path, j);
            rates.insert(j + 1, rate(path, j + 1));
        }
    }
    Ok(())
}

/// Certified `(a_i, a_i + r_i)` for `g(·; θ)` along any path consistent with
/// the skeleton's layer.
pub fn interval_bounds<M: DiffusionModel + ?Sized>(
    skel: &IntervalSkeleton,
    theta: &ThetaState,
    model: &M,
) -> Result<PotentialBounds> {
    let (lower, upper) = checked_band(&skel.path, skel.index, model.domain())?;
    Ok(model.g_bounds(lower, upper, theta))
}

/// The certified band of `path`, or [`Error::DomainExcursion`] if it is not
/// strictly inside `domain`.
pub(super) fn checked_band(
    path: &RevealedPath,
    interval: usize,
    domain: (f64, f64),
) -> Result<(f64, f64)> {
    let layer = path.layer();
    let (lower, upper) = (layer.lower(), layer.upper());
    if !(domain.0 < lower && upper < domain.1) {
        return Err(Error::DomainExcursion {
            interval,
            lower,
            upper,
        });
    }
    Ok((lower, upper))
}

/// Checks `bounds` against `f` on an `n`-point grid of `[lo, hi]`.
pub fn audit_bounds<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    bounds: PotentialBounds,
    n: usize,
) -> Result<()> {
    let n = n.max(2);
    for k in 0..n {
        let u = lo + (hi - lo) * k as f64 / (n - 1) as f64;
        let v = f(u);
        if !(bounds.inf <= v && v <= bounds.sup) {
            return Err(Error::BoundViolation {
                value: v,
                inf: bounds.inf,
                sup: bounds.sup,
            });
        }
    }
    Ok(())
}

/// Certified bounds of a potential on the time span `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPiece {
    pub start: f64,
    pub end: f64,
    pub bounds: PotentialBounds,
}

/// Piecewise constant bounds `a(s) ≤ f(X_s) ≤ a(s) + r(s)` over a bridge,
/// fixed before a coin is flipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseBounds {
    pub pieces: Vec<BoundPiece>,
}

impl PiecewiseBounds {
    /// One piece covering the whole bridge.
    pub fn constant(spec: &BridgeSpec, bounds: PotentialBounds) -> Self {
        PiecewiseBounds {
            pieces: vec![BoundPiece {
                start: spec.t_offset,
                end: spec.t_end(),
                bounds,
            }],
        }
    }

    /// One piece per segment of `path`, from `bounds(lower, upper)` of the
    /// segment's bands. Fails with [`Error::DomainExcursion`] if a band is
    /// not strictly inside `domain`.
    pub fn from_segments<B>(
        path: &RevealedPath,
        interval: usize,
        domain: (f64, f64),
        bounds: B,
    ) -> Result<Self>
    where
        B: Fn(f64, f64) -> Result<PotentialBounds>,
    {
        let pieces = path
            .segments()
            .iter()
            .enumerate()
            .map(|(j, b)| {
                let (lower, upper) = (b.lower(), b.upper());
                if !(domain.0 < lower && upper < domain.1) {
                    return Err(Error::DomainExcursion {
                        interval,
                        lower,
                        upper,
                    });
                }
                let (start, end) = path.segment_span(j);
                Ok(BoundPiece {
                    start,
                    end,
                    bounds: bounds(lower, upper)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PiecewiseBounds { pieces })
    }

    /// `∫ a(s) ds`.
    pub fn integral(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| (p.end - p.start) * p.bounds.a())
            .sum()
    }

    /// `∫ r(s) ds`, the mean number of Poisson marks.
    pub fn rate(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| (p.end - p.start) * p.bounds.r())
            .sum()
    }
}

/// Poisson coin: an event of probability `exp(-∫ (f(X_s) - a(s)) ds)` over
/// the bridge, where `a ≤ f ≤ a + r` piecewise per `bounds`.
///
/// Marks of a rate-`r` Poisson process on each piece `× [0, 1]` are checked
/// against the graph of `(f - a) / r` by revealing the path at their times;
/// the coin lands heads iff no mark falls below the graph. The revealed
/// points stay in `path`. The scan stops at the first mark below the graph.
pub fn poisson_coin<F, R>(
    path: &mut RevealedPath,
    f: F,
    bounds: &PiecewiseBounds,
    rng: &mut R,
) -> Result<bool>
where
    F: Fn(f64) -> f64,
    R: Rng + ?Sized,
{
    let spec = *path.spec();
    for piece in &bounds.pieces {
        let b = piece.bounds;
        let (a, r) = (b.a(), b.r());
        let len = piece.end - piece.start;
        let rate = len * r;
        if rate.is_nan() || rate <= 0.0 {
            continue;
        }
        let poisson = Poisson::new(rate).map_err(|e| Error::NonConvergence(e.to_string()))?;
        let count = poisson.sample(rng) as u64;
        for _ in 0..count {
            let phi = piece.start + len * rng.random::<f64>();
            let chi: f64 = rng.random();
            let x = if phi <= spec.t_offset {
                spec.x_start
            } else if phi >= spec.t_end() {
                spec.x_end
            } else {
                path.reveal(phi, rng)?
            };
            let v = f(x);
            if !(v >= b.inf && v <= b.sup) {
                return Err(Error::BoundViolation {
                    value: v,
                    inf: b.inf,
                    sup: b.sup,
                });
            }
            if chi * r < v - a {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{ConstantDrift, WrightFisher};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn proposals_fit_inside_wf_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = BridgeSpec::new(0.3, 0.5, 1.0, 0.0);
        for _ in 0..300 {
            let p = propose_bridge(&spec, (0.0, PI), 1.0, &mut rng).unwrap();
            assert!(p.layer().lower() > 0.0 && p.layer().upper() < PI);
        }
    }

    #[test]
    fn excursion_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = BridgeSpec::new(0.3, 0.5, 1.0, 0.0);
        let skel = IntervalSkeleton {
            index: 4,
            y: (0.0, 0.0),
            path: sample_layer(&spec, 5.0, &mut rng).unwrap(),
        };
        let t = ThetaState::new(8.0, 0.5);
        assert!(matches!(
            interval_bounds(&skel, &t, &WrightFisher),
            Err(Error::DomainExcursion { interval: 4, .. })
        ));
    }

    #[test]
    fn zero_rate_coin_is_certain() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = BridgeSpec::new(0.0, 0.0, 1.0, 0.0);
        let mut skel = IntervalSkeleton {
            index: 0,
            y: (0.0, 0.0),
            path: sample_layer(&spec, 1.0, &mut rng).unwrap(),
        };
        let t = ThetaState::new(0.7, 0.5);
        for _ in 0..100 {
            assert!(skel
                .poisson_coin(&ConstantDrift::default(), &t, &mut rng)
                .unwrap());
        }
        assert_eq!(skel.path.len(), 2);
    }

    #[test]
    fn tightening_reduces_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = BridgeSpec::new(1.5, 1.7, 1.0, 0.0);
        let t = ThetaState::new(8.0, 0.5);
        let bounds = |lo, hi| WrightFisher.g_bounds(lo, hi, &t);
        for _ in 0..50 {
            let mut p = propose_bridge(&spec, (0.0, PI), 1.0, &mut rng).unwrap();
            let total = |p: &RevealedPath| {
                PiecewiseBounds::from_segments(p, 0, (0.0, PI), |lo, hi| Ok(bounds(lo, hi)))
                    .unwrap()
                    .rate()
            };
            let before = total(&p);
            tighten_layer(&mut p, bounds, 1.0, 1000, &mut rng).unwrap();
            let after = total(&p);
            assert!(after <= before);
            assert!(
                after <= 0.25 * before,
                "rate {before} -> {after} after 1000 steps"
            );
            assert!(p.respects_layer());
        }
    }

    #[test]
    fn audit_flags_violations() {
        let b = PotentialBounds::new(0.0, 1.0);
        assert!(audit_bounds(|u| u * u, 0.0, 1.0, b, 100).is_ok());
        assert!(audit_bounds(|u| u * u, 0.0, 1.1, b, 100).is_err());
    }
}
