//! Two-sided boundary non-crossing probabilities of Brownian bridges.
//!
//! For a bridge from `x` to `y` over time `T` and a band `(L, U)` containing
//! both endpoints, the probability of never leaving the band is
//!
//! ```text
//! γ = 1 - Σ_{j≥1} (σ_j - τ_j)
//! σ_j = exp(-2 (wj + L - x)(wj + L - y) / T) + exp(-2 (wj - U + x)(wj - U + y) / T)
//! τ_j = exp(-2 j (w² j + w (x - y)) / T) + exp(-2 j (w² j - w (x - y)) / T)
//! ```
//!
//! with `w = U - L`. The interleaved terms satisfy `σ_1 ≥ τ_1 ≥ σ_2 ≥ ...`
//! for every admissible input, so consecutive partial sums bracket `γ` and
//! give certified bounds at any truncation point.

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]` used to carry certified bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Product of two intervals of non-negative numbers.
    pub fn mul_nonneg(self, other: Interval) -> Interval {
        Interval::new(self.lo * other.lo, self.hi * other.hi)
    }

    pub fn scale(self, k: f64) -> Interval {
        if k >= 0.0 {
            Interval::new(self.lo * k, self.hi * k)
        } else {
            Interval::new(self.hi * k, self.lo * k)
        }
    }
}

impl std::ops::Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        Interval::new(self.lo + o.lo, self.hi + o.hi)
    }
}

impl std::ops::Sub for Interval {
    type Output = Interval;
    fn sub(self, o: Interval) -> Interval {
        Interval::new(self.lo - o.hi, self.hi - o.lo)
    }
}

/// Default absolute tolerance for direct probability queries.
pub const DEFAULT_TOL: f64 = 1e-12;

const MAX_TERMS: usize = 100_000;

/// Certified bounds on the probability that a Brownian bridge from `x` to
/// `y` over `duration` stays strictly inside `(lower, upper)`.
///
/// The returned interval has width below `tol` (plus rounding slack) and is
/// clipped to `[0, 1]`. Endpoints outside or on the boundary give exactly 0.
pub fn containment_bounds(
    x: f64,
    y: f64,
    duration: f64,
    lower: f64,
    upper: f64,
    tol: f64,
) -> Result<Interval> {
    debug_assert!(duration > 0.0 && tol > 0.0);
    if !(lower < x && x < upper && lower < y && y < upper) {
        return Ok(Interval::ZERO);
    }
    match (lower.is_finite(), upper.is_finite()) {
        (false, false) => return Ok(Interval::ONE),
        (true, false) => {
            return Ok(Interval::point(
                1.0 - (-2.0 * (x - lower) * (y - lower) / duration).exp(),
            ))
        }
        (false, true) => {
            return Ok(Interval::point(
                1.0 - (-2.0 * (upper - x) * (upper - y) / duration).exp(),
            ))
        }
        (true, true) => {}
    }

    let w = upper - lower;
    let d = x - y;
    let k = -2.0 / duration;
    // Running upper bound 1 - Σ_{i<j} (σ_i - τ_i).
    let mut upper_bound = 1.0f64;
    let mut abs_sum = 1.0f64;
    for j in 1..=MAX_TERMS {
        let jf = j as f64;
        let wj = w * jf;
        let sigma = (k * (wj + lower - x) * (wj + lower - y)).exp()
            + (k * (wj - upper + x) * (wj - upper + y)).exp();
        let lower_bound = upper_bound - sigma;
        abs_sum += sigma;
        let slack = 4.0 * f64::EPSILON * abs_sum;
        if sigma < tol {
            return Ok(clip(lower_bound - slack, upper_bound + slack));
        }
        let tau = (k * jf * (w * wj + w * d)).exp() + (k * jf * (w * wj - w * d)).exp();
        abs_sum += tau;
        let next_upper = lower_bound + tau;
        if tau < tol {
            let slack = 4.0 * f64::EPSILON * abs_sum;
            return Ok(clip(lower_bound - slack, next_upper + slack));
        }
        upper_bound = next_upper;
    }
    Err(Error::NonConvergence(format!(
        "containment series for band ({lower}, {upper}), duration {duration}, exceeded {MAX_TERMS} terms"
    )))
}

fn clip(lo: f64, hi: f64) -> Interval {
    Interval::new(lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0))
}

/// Tolerances tried, in order, when a retrospective comparison is ambiguous.
const TOLERANCE_SCHEDULE: [f64; 5] = [1e-9, 1e-12, 1e-14, 1e-15, 1e-16];

/// Decides the sign of a quantity only known through certified brackets.
///
/// `bracket(tol)` must return an interval containing the exact quantity whose
/// width shrinks with `tol`. Returns `true` if the quantity is positive and
/// `false` if it is negative; a bracket straddling zero triggers refinement.
pub fn decide_positive<F>(mut bracket: F) -> Result<bool>
where
    F: FnMut(f64) -> Result<Interval>,
{
    let mut last = Interval::ZERO;
    for tol in TOLERANCE_SCHEDULE {
        let b = bracket(tol)?;
        if b.lo > 0.0 {
            return Ok(true);
        }
        if b.hi < 0.0 {
            return Ok(false);
        }
        last = b;
    }
    Err(Error::NonConvergence(format!(
        "retrospective comparison unresolved, final bracket [{:e}, {:e}]",
        last.lo, last.hi
    )))
}

/// Locates a uniform `u` among cumulative probabilities known only through
/// certified brackets.
///
/// `cumulative(tol)` returns brackets of non-decreasing partial sums
/// `F_0 ≤ F_1 ≤ ...`. Returns the first `k` with `u < F_k`, or `None` when
/// `u` exceeds the last partial sum.
pub fn decide_category<const N: usize, F>(u: f64, mut cumulative: F) -> Result<Option<usize>>
where
    F: FnMut(f64) -> Result<[Interval; N]>,
{
    'tol: for tol in TOLERANCE_SCHEDULE {
        let cum = cumulative(tol)?;
        for (k, c) in cum.iter().enumerate() {
            if u < c.lo {
                return Ok(Some(k));
            }
            if u <= c.hi {
                continue 'tol;
            }
        }
        return Ok(None);
    }
    Err(Error::NonConvergence(format!(
        "categorical comparison unresolved for u = {u:e}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kolmogorov_cdf(x: f64) -> f64 {
        // P(sup |B| < x) for a standard 0→0 unit bridge
        1.0 - 2.0
            * (1..200)
                .map(|k| {
                    let kf = k as f64;
                    let s = if k % 2 == 1 { 1.0 } else { -1.0 };
                    s * (-2.0 * kf * kf * x * x).exp()
                })
                .sum::<f64>()
    }

    #[test]
    fn matches_kolmogorov_distribution() {
        for x in [0.3, 0.5, 1.0, 1.5, 2.5] {
            let b = containment_bounds(0.0, 0.0, 1.0, -x, x, 1e-14).unwrap();
            let k = kolmogorov_cdf(x);
            assert!(b.lo - 1e-13 <= k && k <= b.hi + 1e-13, "x={x} {b:?} {k}");
        }
    }

    #[test]
    fn endpoints_outside_give_zero() {
        assert_eq!(
            containment_bounds(2.0, 0.0, 1.0, -1.0, 1.0, 1e-12).unwrap(),
            Interval::ZERO
        );
        assert_eq!(
            containment_bounds(1.0, 0.0, 1.0, -1.0, 1.0, 1e-12).unwrap(),
            Interval::ZERO
        );
    }

    #[test]
    fn very_wide_band_is_certain() {
        let b = containment_bounds(0.3, -0.2, 2.0, -70.0, 71.0, 1e-12).unwrap();
        assert!(b.lo > 1.0 - 1e-10);
    }

    #[test]
    fn one_sided_band_is_reflection_formula() {
        let b = containment_bounds(0.5, 0.2, 1.0, 0.0, f64::INFINITY, 1e-12).unwrap();
        assert!((b.mid() - (1.0 - (-2.0f64 * 0.5 * 0.2).exp())).abs() < 1e-15);
    }

    #[test]
    fn scale_invariance() {
        // Brownian scaling: (x, y, T, L, U) → (cx, cy, c²T, cL, cU)
        let a = containment_bounds(0.2, -0.1, 1.0, -0.7, 0.9, 1e-14).unwrap();
        let b = containment_bounds(0.6, -0.3, 9.0, -2.1, 2.7, 1e-14).unwrap();
        assert!((a.mid() - b.mid()).abs() < 1e-12);
    }

    #[test]
    fn narrow_band_stays_bracketed() {
        let b = containment_bounds(0.0, 0.01, 1.0, -0.1, 0.1, 1e-12).unwrap();
        assert!(b.width() < 1e-11 && b.lo >= 0.0);
        // eigen-expansion leading term: (4/π) sin(πa/w) ... tiny either way
        assert!(b.hi < 1e-6);
    }

    #[test]
    fn decide_refines_until_resolved() {
        let mut calls = 0;
        let r = decide_positive(|tol| {
            calls += 1;
            Ok(Interval::new(1e-13 - tol, 1e-13 + tol))
        })
        .unwrap();
        assert!(r);
        assert_eq!(calls, 3);
        assert!(decide_positive(|tol| Ok(Interval::new(-tol, tol))).is_err());
    }

    #[test]
    fn category_lookup() {
        let cum = |_tol: f64| {
            Ok([
                Interval::point(0.2),
                Interval::point(0.5),
                Interval::point(0.9),
            ])
        };
        assert_eq!(decide_category(0.1, cum).unwrap(), Some(0));
        assert_eq!(decide_category(0.7, cum).unwrap(), Some(2));
        assert_eq!(decide_category(0.95, cum).unwrap(), None);
        let fuzzy = |tol: f64| Ok([Interval::new(0.3 - tol, 0.3 + tol), Interval::point(1.0)]);
        assert_eq!(decide_category(0.3 + 1e-13, fuzzy).unwrap(), Some(1));
    }
}
