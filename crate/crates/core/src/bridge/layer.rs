use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

use super::series::{containment_bounds, decide_category, decide_positive, Interval};
use crate::error::{Error, Result};

/// Default layer width unit, in multiples of `√duration`.
pub const DEFAULT_DELTA: f64 = 1.0;

const MAX_LAYER_INDEX: u32 = 10_000;
const MAX_REVEAL_ATTEMPTS: u64 = 10_000_000;

/// A Brownian bridge from `x_start` at time `t_offset` to `x_end` at
/// `t_offset + duration`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeSpec {
    pub x_start: f64,
    pub x_end: f64,
    pub duration: f64,
    pub t_offset: f64,
}

impl BridgeSpec {
    pub fn new(x_start: f64, x_end: f64, duration: f64, t_offset: f64) -> Self {
        assert!(duration > 0.0, "bridge duration must be positive");
        BridgeSpec {
            x_start,
            x_end,
            duration,
            t_offset,
        }
    }

    pub fn t_end(&self) -> f64 {
        self.t_offset + self.duration
    }

    fn endpoint_min(&self) -> f64 {
        self.x_start.min(self.x_end)
    }

    fn endpoint_max(&self) -> f64 {
        self.x_start.max(self.x_end)
    }
}

/// Interval constraints on the extremes of a bridge: the infimum lies in
/// `(inf_band.0, inf_band.1]` and the supremum in `[sup_band.0, sup_band.1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    pub inf_band: (f64, f64),
    pub sup_band: (f64, f64),
}

/// Which extreme of the path a refinement acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
}

impl Bands {
    pub fn lower(&self) -> f64 {
        self.inf_band.0
    }

    pub fn upper(&self) -> f64 {
        self.sup_band.1
    }

    /// Width of the uncertainty interval for the infimum or supremum.
    pub fn band_width(&self, side: Side) -> f64 {
        match side {
            Side::Lower => self.inf_band.1 - self.inf_band.0,
            Side::Upper => self.sup_band.1 - self.sup_band.0,
        }
    }

    /// Certified `P(inf ∈ (a,b], sup ∈ [c,d))` for a bridge from `x` to `y`
    /// over `duration`, by inclusion-exclusion:
    /// `γ(a,d) - γ(b,d) - γ(a,c) + γ(b,c)`.
    pub fn probability(&self, x: f64, y: f64, duration: f64, tol: f64) -> Result<Interval> {
        let (a, b) = self.inf_band;
        let (c, d) = self.sup_band;
        let gamma = |lo, hi| containment_bounds(x, y, duration, lo, hi, tol);
        let outer = gamma(a, d)?;
        if outer.hi == 0.0 {
            return Ok(Interval::ZERO);
        }
        Ok(outer - gamma(b, d)? - gamma(a, c)? + gamma(b, c)?)
    }

    /// Splits one band at its midpoint into `(outer half, inner half)`.
    fn bisect(&self, side: Side) -> (Bands, Bands) {
        match side {
            Side::Lower => {
                let (a, b) = self.inf_band;
                let mid = 0.5 * (a + b);
                (
                    Bands {
                        inf_band: (a, mid),
                        ..*self
                    },
                    Bands {
                        inf_band: (mid, b),
                        ..*self
                    },
                )
            }
            Side::Upper => {
                let (c, d) = self.sup_band;
                let mid = 0.5 * (c + d);
                (
                    Bands {
                        sup_band: (mid, d),
                        ..*self
                    },
                    Bands {
                        sup_band: (c, mid),
                        ..*self
                    },
                )
            }
        }
    }

    /// Certified probabilities of the four [`Bands::cells`] of a sub-bridge
    /// from `x` to `y`, in the same order. Every cell is a signed
    /// combination of the same four containment probabilities, because a
    /// band edge at an endpoint contributes zero.
    fn cell_probabilities(&self, x: f64, y: f64, duration: f64, tol: f64) -> Result<[Interval; 4]> {
        let (a, b) = self.inf_band;
        let (c, d) = self.sup_band;
        let gamma = |lo, hi| containment_bounds(x, y, duration, lo, hi, tol);
        let g_ad = gamma(a, d)?;
        if g_ad.hi == 0.0 {
            return Ok([Interval::ZERO; 4]);
        }
        let (g_bd, g_ac, g_bc) = (gamma(b, d)?, gamma(a, c)?, gamma(b, c)?);
        Ok([
            clamp_unit(g_ad - g_bd - g_ac + g_bc),
            clamp_unit(g_ac - g_bc),
            clamp_unit(g_bd - g_bc),
            g_bc,
        ])
    }

    /// The ways a sub-bridge from `x` to `y` can sit inside these bands:
    /// each extreme either falls in its band ("touches") or stays strictly
    /// between the band and the endpoints. Entries are
    /// `(bands, touches_inf, touches_sup)`.
    fn cells(&self, x: f64, y: f64) -> [Option<(Bands, bool, bool)>; 4] {
        let (a, b) = self.inf_band;
        let (c, d) = self.sup_band;
        let (m, big_m) = (x.min(y), x.max(y));
        let infs = [
            Some(((a, b.min(m)), true)),
            (b < m).then_some(((b, m), false)),
        ];
        let sups = [
            Some(((c.max(big_m), d), true)),
            (c > big_m).then_some(((big_m, c), false)),
        ];
        let mut out = [None; 4];
        for (i, inf) in infs.iter().enumerate() {
            for (j, sup) in sups.iter().enumerate() {
                if let (Some((ib, ti)), Some((sb, ts))) = (inf, sup) {
                    out[2 * i + j] = Some((
                        Bands {
                            inf_band: *ib,
                            sup_band: *sb,
                        },
                        *ti,
                        *ts,
                    ));
                }
            }
        }
        out
    }
}

/// The layer of a whole bridge: its sampled index and constraints on the
/// path infimum and supremum. In particular the whole path stays inside the
/// certified band `(lower(), upper())`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub spec: BridgeSpec,
    /// Index of the sampled layer; refinements keep it.
    pub index: u32,
    pub inf_band: (f64, f64),
    pub sup_band: (f64, f64),
}

impl Layer {
    pub fn lower(&self) -> f64 {
        self.inf_band.0
    }

    pub fn upper(&self) -> f64 {
        self.sup_band.1
    }

    pub fn band_width(&self, side: Side) -> f64 {
        self.bands().band_width(side)
    }

    pub fn bands(&self) -> Bands {
        Bands {
            inf_band: self.inf_band,
            sup_band: self.sup_band,
        }
    }

    /// Certified probability of this layer for its bridge.
    pub fn probability(&self, tol: f64) -> Result<Interval> {
        let s = self.spec;
        self.bands()
            .probability(s.x_start, s.x_end, s.duration, tol)
    }
}

/// A bridge revealed at finitely many times.
///
/// Every segment between consecutive revealed points carries its own
/// [`Bands`]. Given the revealed points the segments are independent
/// Brownian bridges conditioned on their bands, so revealing and refining
/// only ever touch one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevealedPath {
    spec: BridgeSpec,
    index: u32,
    /// Absolute, strictly increasing times; both endpoints included.
    times: Vec<f64>,
    values: Vec<f64>,
    /// `segments[j]` constrains the path on `[times[j], times[j + 1]]`.
    segments: Vec<Bands>,
}

fn strictly_inside(v: f64, band: (f64, f64)) -> bool {
    band.0 < v && v < band.1
}

impl RevealedPath {
    /// A bridge known only at its endpoints and conditioned on the event
    /// described by `layer`.
    pub fn from_layer(layer: Layer) -> Self {
        let s = layer.spec;
        RevealedPath {
            spec: s,
            index: layer.index,
            times: vec![s.t_offset, s.t_end()],
            values: vec![s.x_start, s.x_end],
            segments: vec![layer.bands()],
        }
    }

    pub fn spec(&self) -> &BridgeSpec {
        &self.spec
    }

    /// Envelope of the segment bands: a layer for the whole bridge.
    pub fn layer(&self) -> Layer {
        let fold = |init: f64, f: fn(f64, f64) -> f64, get: fn(&Bands) -> f64| {
            self.segments.iter().map(get).fold(init, f)
        };
        Layer {
            spec: self.spec,
            index: self.index,
            inf_band: (
                fold(f64::INFINITY, f64::min, |b| b.inf_band.0),
                fold(f64::INFINITY, f64::min, |b| b.inf_band.1),
            ),
            sup_band: (
                fold(f64::NEG_INFINITY, f64::max, |b| b.sup_band.0),
                fold(f64::NEG_INFINITY, f64::max, |b| b.sup_band.1),
            ),
        }
    }

    pub fn segments(&self) -> &[Bands] {
        &self.segments
    }

    /// Time span `(start, end)` of segment `j`.
    pub fn segment_span(&self, j: usize) -> (f64, f64) {
        (self.times[j], self.times[j + 1])
    }

    /// Certified probability of segment `j`'s bands given its endpoints.
    pub fn segment_probability(&self, j: usize, tol: f64) -> Result<Interval> {
        self.segments[j].probability(
            self.values[j],
            self.values[j + 1],
            self.times[j + 1] - self.times[j],
            tol,
        )
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    /// Number of revealed points, endpoints included.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Value at an already revealed time.
    pub fn value_at(&self, s: f64) -> Option<f64> {
        self.times
            .binary_search_by(|t| t.total_cmp(&s))
            .ok()
            .map(|i| self.values[i])
    }

    /// Reveals the path at `s` from its exact conditional law given every
    /// point revealed so far and the segment bands. Returns the value, which
    /// is also stored in the path; the segment holding `s` is split in two,
    /// with bands drawn from their joint conditional law.
    pub fn reveal<R: Rng + ?Sized>(&mut self, s: f64, rng: &mut R) -> Result<f64> {
        let spec = self.spec;
        if !(spec.t_offset < s && s < spec.t_end()) {
            return Err(Error::Domain {
                value: s,
                domain: "bridge interior (t_offset, t_offset + duration)",
            });
        }
        let idx = match self.times.binary_search_by(|t| t.total_cmp(&s)) {
            Ok(i) => return Ok(self.values[i]),
            Err(i) => i,
        };
        // neighbours: times[idx - 1] < s < times[idx]
        let seg = idx - 1;
        let (ta, tb) = (self.times[seg], self.times[idx]);
        let (va, vb) = (self.values[seg], self.values[idx]);
        let bands = self.segments[seg];
        let frac = (s - ta) / (tb - ta);
        let mean = va + frac * (vb - va);
        let sd = ((s - ta) * (tb - s) / (tb - ta)).sqrt();

        let proposal = ValueProposal::new(mean, sd, (va, vb), (s - ta, tb - s), &bands);
        for _ in 0..MAX_REVEAL_ATTEMPTS {
            let (z, envelope) = proposal.sample(rng);
            if !strictly_inside(z, (bands.lower(), bands.upper())) {
                continue;
            }
            // Accept z with probability P(bands | va, z, vb) / envelope(z)
            // and choose the pair of sub-bands in the same comparison.
            let left = bands.cells(va, z);
            let right = bands.cells(z, vb);
            let mut pairs = [None; 9];
            let mut count = 0;
            for (i, l) in left.iter().enumerate() {
                for (k, r) in right.iter().enumerate() {
                    if let (Some(l), Some(r)) = (l, r) {
                        if (l.1 || r.1) && (l.2 || r.2) {
                            pairs[count] = Some((i, k, l.0, r.0));
                            count += 1;
                        }
                    }
                }
            }
            let u = rng.random::<f64>() * envelope;
            let choice = decide_category(u, |tol| {
                let pl = bands.cell_probabilities(va, z, s - ta, tol)?;
                let pr = bands.cell_probabilities(z, vb, tb - s, tol)?;
                let mut cum = [Interval::ZERO; 9];
                let mut acc = Interval::ZERO;
                for (k, pair) in pairs.iter().enumerate() {
                    if let Some((i, j, _, _)) = pair {
                        acc = acc + pl[*i].mul_nonneg(pr[*j]);
                    }
                    cum[k] = acc;
                }
                Ok(cum)
            })?;
            if let Some(k) = choice {
                let (_, _, lb, rb) = pairs[k].expect("selected pair exists");
                assert!(
                    bands.lower() <= z && z <= bands.upper(),
                    "revealed value {z} escaped its layer [{}, {}]",
                    bands.lower(),
                    bands.upper()
                );
                self.times.insert(idx, s);
                self.values.insert(idx, z);
                self.segments[seg] = lb;
                self.segments.insert(idx, rb);
                return Ok(z);
            }
        }
        Err(Error::NonConvergence(format!(
            "reveal at {s} rejected {MAX_REVEAL_ATTEMPTS} proposals"
        )))
    }

    /// Bisects one band of segment `j` and keeps the half that holds, drawn
    /// from its conditional probability given the segment endpoints.
    pub fn refine_segment<R: Rng + ?Sized>(
        &mut self,
        j: usize,
        side: Side,
        rng: &mut R,
    ) -> Result<()> {
        let cur = self.segments[j];
        let (outer_half, inner_half) = cur.bisect(side);
        let (x, y) = (self.values[j], self.values[j + 1]);
        let dt = self.times[j + 1] - self.times[j];
        let u: f64 = rng.random();
        let take_inner = decide_positive(|tol| {
            let inner = inner_half.probability(x, y, dt, tol)?;
            let total = cur.probability(x, y, dt, tol)?;
            Ok(inner - total.scale(u))
        })?;
        self.segments[j] = if take_inner { inner_half } else { outer_half };
        Ok(())
    }

    /// Refines the segment holding the outermost bound on `side`.
    pub fn refine<R: Rng + ?Sized>(&mut self, side: Side, rng: &mut R) -> Result<()> {
        let key = |b: &Bands| match side {
            Side::Lower => b.lower(),
            Side::Upper => -b.upper(),
        };
        let j = (0..self.segments.len())
            .min_by(|&i, &k| key(&self.segments[i]).total_cmp(&key(&self.segments[k])))
            .expect("a path has at least one segment");
        self.refine_segment(j, side, rng)
    }

    /// Checks that every revealed point lies inside the bands of the
    /// segments it bounds.
    pub fn respects_layer(&self) -> bool {
        let inside = |v: f64, b: &Bands| b.lower() <= v && v <= b.upper();
        self.segments.len() + 1 == self.times.len()
            && self.times.windows(2).all(|w| w[0] < w[1])
            && self
                .segments
                .iter()
                .enumerate()
                .all(|(j, b)| inside(self.values[j], b) && inside(self.values[j + 1], b))
    }
}

/// Proposal for a revealed value: the bridge interpolation, conditioned on
/// the segment reaching the band of one extreme when that band lies beyond
/// the segment endpoints.
///
/// Given a dip to `level`, the value at the reveal time has density
/// proportional to `φ(z) h(z)` with `h(z) = 1` for `z ≤ level` and
/// `h(z) = p_1 + p_2 - p_1 p_2` above it, where `p_k` are the reflection
/// probabilities of the two flanking sub-bridges. Sampling uses the envelope
/// `p_1 + p_2`, a mixture of three truncated Gaussians. The layer event
/// implies the dip, so `P(layer | z) ≤ h(z) ≤ envelope(z)`.
struct ValueProposal {
    mean: f64,
    sd: f64,
    dip: Option<Dip>,
}

struct Dip {
    /// `+1` for a dip below `level`, `-1` for a rise above `-level`, after
    /// reflecting so that the event is always a dip.
    sign: f64,
    level: f64,
    rates: [f64; 2],
    /// Cumulative mixture weights of the three components.
    cumulative: [f64; 3],
    means: [f64; 3],
}

impl ValueProposal {
    fn new(mean: f64, sd: f64, ends: (f64, f64), spans: (f64, f64), bands: &Bands) -> Self {
        let (m, big_m) = (ends.0.min(ends.1), ends.0.max(ends.1));
        let duration = spans.0 + spans.1;
        let b = bands.inf_band.1;
        let c = bands.sup_band.0;
        let log_dip = |d0: f64, d1: f64| -2.0 * d0 * d1 / duration;
        let low = (b < m).then(|| log_dip(ends.0 - b, ends.1 - b));
        let high = (c > big_m).then(|| log_dip(c - ends.0, c - ends.1));
        let choice = match (low, high) {
            (Some(l), Some(h)) if h < l => Some((-1.0, h)),
            (Some(l), _) => Some((1.0, l)),
            (None, Some(h)) => Some((-1.0, h)),
            (None, None) => None,
        };
        let dip = choice.filter(|&(_, log_p)| log_p < -0.1).map(|(sign, _)| {
            let level = if sign > 0.0 { b } else { -c };
            let (mu, e0, e1) = (sign * mean, sign * ends.0, sign * ends.1);
            let rates = [2.0 * (e0 - level) / spans.0, 2.0 * (e1 - level) / spans.1];
            let var = sd * sd;
            let mut log_w = [0.0; 3];
            let mut means = [mu; 3];
            log_w[0] = ln_normal_sf((mu - level) / sd);
            for k in 0..2 {
                let shifted = mu - rates[k] * var;
                means[k + 1] = shifted;
                log_w[k + 1] = -rates[k] * (mu - level)
                    + 0.5 * rates[k] * rates[k] * var
                    + ln_normal_sf((level - shifted) / sd);
            }
            let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w = log_w.map(|l| (l - top).exp());
            let total: f64 = w.iter().sum();
            let cumulative = [w[0] / total, (w[0] + w[1]) / total, 1.0];
            Dip {
                sign,
                level,
                rates,
                cumulative,
                means,
            }
        });
        ValueProposal { mean, sd, dip }
    }

    /// Draws a value and returns it with the envelope ratio `h̄(z) / h_0`
    /// that bounds `P(layer | z)` up to the proposal's normalisation.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let Some(d) = &self.dip else {
            let n: f64 = StandardNormal.sample(rng);
            return (self.mean + self.sd * n, 1.0);
        };
        let v: f64 = rng.random();
        let k = d.cumulative.iter().position(|&c| v < c).unwrap_or(2);
        let alpha = (d.level - d.means[k]) / self.sd;
        let z = if k == 0 {
            d.means[0] - self.sd * normal_tail(-alpha, rng)
        } else {
            d.means[k] + self.sd * normal_tail(alpha, rng)
        };
        let envelope = if z <= d.level {
            1.0
        } else {
            let p0 = (-d.rates[0] * (z - d.level)).exp();
            let p1 = (-d.rates[1] * (z - d.level)).exp();
            p0 + p1
        };
        (d.sign * z, envelope)
    }
}

/// `ln P(N(0, 1) > x)`, accurate in the far tail.
fn ln_normal_sf(x: f64) -> f64 {
    if x < 25.0 {
        (0.5 * erfc(x / SQRT_2)).ln()
    } else {
        let x2 = x * x;
        let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
        -0.5 * x2 - (x * (2.0 * PI).sqrt()).ln() + series.ln()
    }
}

/// Standard normal conditioned to exceed `alpha`.
fn normal_tail<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha < 0.5 {
        loop {
            let n: f64 = StandardNormal.sample(rng);
            if n > alpha {
                return n;
            }
        }
    }
    // exponential proposal with the optimal rate
    let rate = 0.5 * (alpha + (alpha * alpha + 4.0).sqrt());
    loop {
        let u: f64 = rng.random();
        let z = alpha - (1.0 - u).ln() / rate;
        let v: f64 = rng.random();
        if v < (-0.5 * (z - rate) * (z - rate)).exp() {
            return z;
        }
    }
}

/// Intersects a probability bracket with `[0, 1]`.
fn clamp_unit(i: Interval) -> Interval {
    let lo = i.lo.clamp(0.0, 1.0);
    Interval::new(lo, i.hi.clamp(lo, 1.0))
}

/// Draws the layer of a fresh bridge and returns the bridge with only its
/// endpoints revealed.
///
/// Layer `ℓ` is the event that the path stays within
/// `[min - ℓ c, max + ℓ c]` but not within the `ℓ - 1` band, where
/// `c = delta · √duration`. It is then split into the three disjoint ways
/// this can happen (infimum, supremum or both in the outer annulus) so that
/// the result is an infimum/supremum layer.
pub fn sample_layer<R: Rng + ?Sized>(
    spec: &BridgeSpec,
    delta: f64,
    rng: &mut R,
) -> Result<RevealedPath> {
    assert!(delta > 0.0, "layer width unit must be positive");
    let step = delta * spec.duration.sqrt();
    let (m, big_m) = (spec.endpoint_min(), spec.endpoint_max());
    let band = |l: u32| (m - l as f64 * step, big_m + l as f64 * step);
    let gamma = |l: u32, tol: f64| -> Result<Interval> {
        if l == 0 {
            return Ok(Interval::ZERO);
        }
        let (lo, hi) = band(l);
        containment_bounds(spec.x_start, spec.x_end, spec.duration, lo, hi, tol)
    };

    let u: f64 = rng.random();
    let mut index = 0;
    for l in 1..=MAX_LAYER_INDEX {
        if decide_positive(|tol| Ok(gamma(l, tol)? - Interval::point(u)))? {
            index = l;
            break;
        }
    }
    if index == 0 {
        return Err(Error::NonConvergence(format!(
            "no layer found within {MAX_LAYER_INDEX} steps"
        )));
    }

    let (outer_lo, outer_hi) = band(index);
    let (inner_lo, inner_hi) = band(index - 1);
    let both = Layer {
        spec: *spec,
        index,
        inf_band: (outer_lo, inner_lo),
        sup_band: (inner_hi, outer_hi),
    };
    if index == 1 {
        // the inner band is [min, max], which every path leaves
        return Ok(RevealedPath::from_layer(both));
    }
    let low_only = Layer {
        sup_band: (big_m, inner_hi),
        ..both
    };
    let high_only = Layer {
        inf_band: (inner_lo, m),
        ..both
    };
    let v: f64 = rng.random();
    let total = |tol| -> Result<Interval> { Ok(gamma(index, tol)? - gamma(index - 1, tol)?) };
    let layer = if decide_positive(|tol| Ok(both.probability(tol)? - total(tol)?.scale(v)))? {
        both
    } else if decide_positive(|tol| {
        Ok(both.probability(tol)? + low_only.probability(tol)? - total(tol)?.scale(v))
    })? {
        low_only
    } else {
        high_only
    };
    Ok(RevealedPath::from_layer(layer))
}

/// Value-returning form of [`RevealedPath::reveal`].
pub fn reveal_point<R: Rng + ?Sized>(
    path: &RevealedPath,
    s: f64,
    rng: &mut R,
) -> Result<(RevealedPath, f64)> {
    let mut p = path.clone();
    let v = p.reveal(s, rng)?;
    Ok((p, v))
}

/// Value-returning form of [`RevealedPath::refine`].
pub fn refine_layer<R: Rng + ?Sized>(
    path: &RevealedPath,
    side: Side,
    rng: &mut R,
) -> Result<RevealedPath> {
    let mut p = path.clone();
    p.refine(side, rng)?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit() -> BridgeSpec {
        BridgeSpec::new(0.0, 0.0, 1.0, 0.0)
    }

    #[test]
    fn layer_probabilities_telescope_to_one() {
        let spec = unit();
        let c = containment_bounds(0.0, 0.0, 1.0, -30.0, 30.0, 1e-14).unwrap();
        assert!(c.lo > 1.0 - 1e-8);
        // partial sums are monotone in the layer index
        let mut prev = 0.0;
        for l in 1..=30 {
            let g = containment_bounds(spec.x_start, spec.x_end, 1.0, -(l as f64), l as f64, 1e-14)
                .unwrap()
                .mid();
            assert!(g >= prev);
            prev = g;
        }
    }

    #[test]
    fn sampled_layers_contain_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = BridgeSpec::new(0.4, -0.3, 0.7, 3.0);
        for _ in 0..2000 {
            let p = sample_layer(&spec, 0.5, &mut rng).unwrap();
            let l = p.layer();
            assert!(l.lower() < -0.3 && 0.4 < l.upper());
            assert!(l.inf_band.0 < l.inf_band.1 && l.sup_band.0 < l.sup_band.1);
            assert!(l.inf_band.1 <= -0.3 && l.sup_band.0 >= 0.4);
        }
    }

    #[test]
    fn reveal_rejects_times_outside() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = sample_layer(&unit(), 1.0, &mut rng).unwrap();
        assert!(p.reveal(1.0, &mut rng).is_err());
        assert!(p.reveal(-0.1, &mut rng).is_err());
        let v = p.reveal(0.5, &mut rng).unwrap();
        assert_eq!(p.reveal(0.5, &mut rng).unwrap(), v);
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn refinement_keeps_points_and_shrinks_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let mut p = sample_layer(&unit(), 1.0, &mut rng).unwrap();
            for k in 1..8 {
                p.reveal(k as f64 / 8.0, &mut rng).unwrap();
            }
            let envelope = p.layer();
            for (j, side) in [
                (0, Side::Lower),
                (3, Side::Upper),
                (3, Side::Lower),
                (7, Side::Lower),
            ] {
                let before = p.segments()[j].band_width(side);
                p.refine_segment(j, side, &mut rng).unwrap();
                assert!(p.segments()[j].band_width(side) < before);
                assert!(p.respects_layer());
            }
            p.refine(Side::Upper, &mut rng).unwrap();
            let after = p.layer();
            assert!(after.lower() >= envelope.lower() && after.upper() <= envelope.upper());
        }
    }

    #[test]
    fn determinism() {
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = sample_layer(&BridgeSpec::new(1.0, 1.5, 2.0, 0.0), 1.0, &mut rng).unwrap();
            for k in 1..10 {
                p.reveal(0.2 * k as f64, &mut rng).unwrap();
            }
            p.refine(Side::Upper, &mut rng).unwrap();
            p
        };
        assert_eq!(run(4), run(4));
    }
}
