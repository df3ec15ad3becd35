//! One seller, one buyer, one divisible good, concave valuation.
//!
//! The buyer's demand at price `p` solves `v'(x) = p`, capped by the budget
//! (`x <= beta / p`). The market clears at `min(v'(s), beta / s)`. With a
//! strongly concave valuation that price need not maximise revenue; with a
//! linear one it always does.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

type RealFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Bracket expansion gives up past this quantity.
const MAX_QUANTITY: f64 = 1e12;

pub struct ConcaveValuation {
    pub name: String,
    value: RealFn,
    derivative: RealFn,
    /// Strong-concavity modulus, valid on `[0, modulus_domain]`.
    pub modulus: Option<f64>,
    pub modulus_domain: f64,
    /// Slope, for linear valuations.
    pub slope: Option<f64>,
}

impl fmt::Debug for ConcaveValuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConcaveValuation")
            .field("name", &self.name)
            .field("modulus", &self.modulus)
            .field("slope", &self.slope)
            .finish()
    }
}

impl ConcaveValuation {
    pub fn new(
        name: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
        modulus: Option<(f64, f64)>,
    ) -> Self {
        Self {
            name: name.into(),
            value: Box::new(value),
            derivative: Box::new(derivative),
            modulus: modulus.map(|(m, _)| m),
            modulus_domain: modulus.map_or(f64::INFINITY, |(_, d)| d),
            slope: None,
        }
    }

    /// `v(x) = 4 / ln 2 * (1 - 2^-x)`, so `v'(x) = 4 * 2^-x`. Strongly
    /// concave on `[0, 4]` with modulus `|v''(4)| = ln 2 / 4`.
    pub fn example_a1() -> Self {
        let ln2 = std::f64::consts::LN_2;
        Self::new(
            "example-a1",
            move |x| 4.0 / ln2 * (1.0 - (-x).exp2()),
            |x| 4.0 * (-x).exp2(),
            Some((4.0 * ln2 * (-4.0f64).exp2(), 4.0)),
        )
    }

    pub fn linear(v: f64) -> Self {
        let mut val = Self::new(format!("linear:{v}"), move |x| v * x, move |_| v, None);
        val.slope = Some(v);
        val
    }

    /// `example-a1` or `linear:<v>` with `v > 0`.
    pub fn from_spec(spec: &str) -> Result<Self> {
        let bad = |message: String| Error::Parse {
            path: "valuation".into(),
            message,
        };
        if spec == "example-a1" {
            return Ok(Self::example_a1());
        }
        if let Some(rest) = spec.strip_prefix("linear:") {
            let v: f64 = rest
                .trim()
                .parse()
                .map_err(|_| bad(format!("cannot read slope in {spec:?}")))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(format!("slope must be positive and finite, got {v}")));
            }
            return Ok(Self::linear(v));
        }
        Err(bad(format!(
            "unknown valuation {spec:?}; expected example-a1 or linear:<v>"
        )))
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    pub fn marginal(&self, x: f64) -> f64 {
        (self.derivative)(x)
    }

    /// Checks monotonicity of `v` and `v'` and the modulus inequality on
    /// consecutive sample points inside the modulus domain.
    pub fn spot_check(&self, samples: &[f64]) -> bool {
        let mut xs: Vec<f64> = samples.to_vec();
        xs.sort_by(f64::total_cmp);
        xs.windows(2).all(|w| {
            let (a, b) = (w[0], w[1]);
            let monotone = self.value(b) >= self.value(a) && self.marginal(b) <= self.marginal(a);
            let strong = match self.modulus {
                Some(m) if b <= self.modulus_domain => {
                    self.marginal(a) - self.marginal(b) >= m * (b - a) * (1.0 - 1e-12)
                }
                _ => true,
            };
            monotone && strong
        })
    }
}

#[derive(Debug)]
pub struct MonopolyInstance {
    pub valuation: ConcaveValuation,
    pub supply: f64,
    /// `f64::INFINITY` for an unconstrained buyer.
    pub budget: f64,
}

impl MonopolyInstance {
    pub fn new(valuation: ConcaveValuation, supply: f64, budget: f64) -> Result<Self> {
        if !(supply >= 0.0 && supply.is_finite()) {
            return Err(Error::Domain(format!(
                "supply must be finite and nonnegative, got {supply}"
            )));
        }
        if !(budget >= 0.0) {
            return Err(Error::Domain(format!(
                "budget must be nonnegative, got {budget}"
            )));
        }
        Ok(Self {
            valuation,
            supply,
            budget,
        })
    }

    /// Revenue when the price is `p`: `p` times the units actually sold.
    pub fn revenue_at(&self, p: f64) -> Result<f64> {
        Ok(p * demand_single(self, p)?.min(self.supply))
    }
}

/// Smallest `x >= 0` with `v'(x) <= p`, by bracket expansion and
/// bisection. `None` when `v'` stays above `p` on `[0, MAX_QUANTITY]`.
fn marginal_inverse(val: &ConcaveValuation, p: f64) -> Result<Option<f64>> {
    if val.marginal(0.0) <= p {
        return Ok(Some(0.0));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while val.marginal(hi) > p {
        if val.marginal(hi) > val.marginal(lo) {
            return Err(Error::Domain(format!(
                "{}: marginal value increases",
                val.name
            )));
        }
        lo = hi;
        hi *= 2.0;
        if hi > MAX_QUANTITY {
            return Ok(None);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (flo, fmid, fhi) = (val.marginal(lo), val.marginal(mid), val.marginal(hi));
        if fmid > flo || fmid < fhi {
            return Err(Error::Domain(format!(
                "{}: marginal value is not monotone",
                val.name
            )));
        }
        if fmid > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Demand at price `p > 0`.
pub fn demand_single(inst: &MonopolyInstance, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Precondition(format!(
            "price must be positive, got {p}"
        )));
    }
    let cap = inst.budget / p;
    let wanted = match inst.valuation.slope {
        Some(v) if p > v => 0.0,
        // At or below the slope the buyer spends whatever the budget allows.
        Some(_) => f64::INFINITY,
        None => marginal_inverse(&inst.valuation, p)?.unwrap_or(f64::INFINITY),
    };
    Ok(wanted.min(cap))
}

/// Price at which demand equals supply: `min(v'(s), beta / s)`.
pub fn clearing_price(inst: &MonopolyInstance) -> Result<f64> {
    if !(inst.supply > 0.0) {
        return Err(Error::Domain("clearing needs positive supply".into()));
    }
    let p = inst
        .valuation
        .marginal(inst.supply)
        .min(inst.budget / inst.supply);
    if !(p > 0.0) {
        return Err(Error::Domain(format!(
            "marginal value at supply {} is not positive",
            inst.supply
        )));
    }
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RevenueOptimum {
    pub price: f64,
    pub quantity: f64,
    pub revenue: f64,
}

/// Smallest revenue-maximising price, searched on `[clearing, v'(0)]` by
/// golden section. Prices below clearing sell no more units, so they cannot
/// earn more.
pub fn max_revenue_price(inst: &MonopolyInstance, tol: f64) -> Result<RevenueOptimum> {
    let tol = tol.max(1e-15);
    let lo = clearing_price(inst)?;
    let top = inst.valuation.marginal(0.0);
    let hi = if top.is_finite() {
        top.max(lo)
    } else {
        lo.max(1.0) * 1e6
    };
    let rev = |p: f64| inst.revenue_at(p);

    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (rev(c)?, rev(d)?);
    while b - a > tol * b.abs().max(1.0) * 1e-3 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = rev(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = rev(d)?;
        }
    }
    let mut best = 0.5 * (a + b);
    let mut top_rev = rev(best)?;
    for p in [lo, hi] {
        let r = rev(p)?;
        if r > top_rev {
            best = p;
            top_rev = r;
        }
    }

    // Walk down any plateau to its lowest price. A smooth peak is only flat
    // to second order, so the slack must stay at rounding level.
    let slack = 8.0 * f64::EPSILON * top_rev.abs().max(1.0);
    if rev(lo)? >= top_rev - slack {
        best = lo;
    } else {
        let (mut l, mut h) = (lo, best);
        for _ in 0..200 {
            let mid = 0.5 * (l + h);
            if rev(mid)? >= top_rev - slack {
                h = mid;
            } else {
                l = mid;
            }
        }
        best = h;
    }
    let quantity = demand_single(inst, best)?.min(inst.supply);
    Ok(RevenueOptimum {
        price: best,
        quantity,
        revenue: best * quantity,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DivergenceWitness {
    pub supply: f64,
    pub epsilon: f64,
    /// Revenue from selling exactly `supply`.
    pub revenue_at_supply: f64,
    /// Revenue from selling `supply - epsilon`, strictly larger.
    pub revenue_below: f64,
    /// Smallest root of `x v'(x) = beta` (finite budgets only).
    pub tilde_x: Option<f64>,
    /// Whether `m > v'(x~) / x~` holds.
    pub modulus_exceeds_ratio: Option<bool>,
}

/// Revenue from selling `x` units: the highest price that sells them is
/// `min(v'(x), beta / x)`.
fn quantity_revenue(val: &ConcaveValuation, budget: f64, x: f64) -> f64 {
    (x * val.marginal(x)).min(budget)
}

/// Checks supply `s` for a clearing/revenue divergence: `v'(s) < m s`, and
/// selling `s - eps` with `eps = (m s - v'(s)) / 2` (halved until it works)
/// earns strictly more than selling `s`.
pub fn divergence_at(val: &ConcaveValuation, budget: f64, s: f64) -> Option<DivergenceWitness> {
    let m = val.modulus.filter(|m| *m > 0.0)?;
    if val.slope.is_some() || !(s > 0.0) || val.marginal(s) >= m * s {
        return None;
    }
    let at_s = quantity_revenue(val, budget, s);
    let mut eps = 0.5 * (m * s - val.marginal(s));
    for _ in 0..60 {
        let x = s - eps;
        if x > 0.0 {
            let below = quantity_revenue(val, budget, x);
            if below > at_s {
                let tilde_x = tilde_x(val, budget, 1e-12);
                return Some(DivergenceWitness {
                    supply: s,
                    epsilon: eps,
                    revenue_at_supply: at_s,
                    revenue_below: below,
                    tilde_x,
                    modulus_exceeds_ratio: tilde_x.map(|t| m > val.marginal(t) / t),
                });
            }
        }
        eps *= 0.5;
    }
    None
}

/// Searches supplies upward (steps of 1/8 up to the modulus domain, or 64)
/// for a divergence witness.
pub fn divergence_witness(val: &ConcaveValuation, budget: f64) -> Option<DivergenceWitness> {
    let limit = val.modulus_domain.min(64.0);
    (1..)
        .map(|k| k as f64 / 8.0)
        .take_while(|s| *s <= limit)
        .find_map(|s| divergence_at(val, budget, s))
}

/// Smallest positive root of `x v'(x) = beta`, located by scanning and
/// bisection. `None` for infinite budgets or when no root is found.
pub fn tilde_x(val: &ConcaveValuation, budget: f64, tol: f64) -> Option<f64> {
    if !budget.is_finite() {
        return None;
    }
    let h = |x: f64| x * val.marginal(x) - budget;
    let step = 1.0 / 64.0;
    let mut prev = 0.0;
    let mut x = step;
    while x <= 1e4 {
        if h(x) >= 0.0 {
            let (mut lo, mut hi) = (prev, x);
            while hi - lo > tol * hi.max(1.0) {
                let mid = 0.5 * (lo + hi);
                if h(mid) >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(hi);
        }
        prev = x;
        x += step;
    }
    None
}
