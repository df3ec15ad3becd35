//! End-to-end equilibrium computation.
//!
//! The convex program and the lattice descent are run independently and
//! must agree. The reported price is then recovered exactly from the tight
//! bang-per-buck structure and certified by the exact clearing check.

use serde::Serialize;

use crate::descent::{initial_feasible_price, lattice_descent, Schedule};
use crate::eg::{solve_eg, EgOptions};
use crate::error::{Error, Result};
use crate::exact::snap;
use crate::feasibility::{check_clearing, FeasibilityCertificate};
use crate::market::{validate_market, Allocation, Market, Outcome, PriceVector};
use crate::metrics::{
    certify_constrained_efficiency, revenue, social_welfare, EfficiencyCertificate,
};
use crate::numeric::{Rational, Scalar};

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub tol: f64,
    /// Step sizes for the descent; derived from `tol` when `None`.
    pub schedule: Option<Schedule>,
    pub max_iterations: usize,
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            schedule: None,
            max_iterations: 1_000_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Certificates<T> {
    pub clearing: FeasibilityCertificate<T>,
    pub efficiency: EfficiencyCertificate<T>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    /// Barrier iterate prices before crossover.
    pub convex_raw_prices: Vec<f64>,
    pub convex_prices: Vec<f64>,
    pub duality_gap: f64,
    pub convex_iterations: usize,
    pub descent_prices: Vec<f64>,
    pub descent_steps: usize,
    pub feasibility_checks: usize,
    pub agreement_bound: f64,
    /// Tie tolerance at which the exact price was recovered; `None` when the
    /// float descent price was certified directly.
    pub snap_tightness: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct EquilibriumResult<T> {
    pub p_star: PriceVector<T>,
    /// Exactly recovered equilibrium price, when recovery succeeded.
    pub p_star_exact: Option<PriceVector<Rational>>,
    pub allocation: Allocation<T>,
    pub revenue: T,
    pub welfare: T,
    /// Largest per-coordinate gap between the convex-program prices (after
    /// crossover) and the raw descent prices.
    pub method_agreement: f64,
    pub certificates: Certificates<T>,
    pub diagnostics: Diagnostics,
}

pub fn solve<T: Scalar>(market: &Market<T>, tol: f64) -> Result<EquilibriumResult<T>> {
    solve_with(market, &SolveOptions::with_tol(tol))
}

pub fn solve_with<T: Scalar>(
    market: &Market<T>,
    opts: &SolveOptions,
) -> Result<EquilibriumResult<T>> {
    let violations = validate_market(market);
    if !violations.is_empty() {
        return Err(Error::InvalidMarket(violations));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Precondition("tolerance must be positive".into()));
    }

    let eg = solve_eg(
        &market.as_f64(),
        &EgOptions {
            tol: opts.tol,
            max_iterations: opts.max_iterations,
        },
    )?;
    let schedule = opts
        .schedule
        .clone()
        .unwrap_or_else(|| Schedule::for_tol(opts.tol));
    let trace = lattice_descent(market, &initial_feasible_price(market), &schedule)?;
    let descent = trace.final_price.as_f64();

    // Crossover: the barrier iterate only approaches degenerate optima at a
    // square-root rate, so its tight structure is solved exactly and kept
    // when it clears.
    let convex_snap = snap(market, &eg.prices)?;
    let convex: Vec<f64> = match &convex_snap {
        Some(s) => s.prices.as_f64(),
        None => eg.prices.clone(),
    };

    let bound = 10.0 * opts.tol;
    let mut agreement = 0.0f64;
    let mut within = true;
    for (a, b) in convex.iter().zip(&descent) {
        let gap = (a - b).abs();
        agreement = agreement.max(gap);
        within &= gap <= bound * a.abs().max(b.abs()).max(1.0);
    }
    let descent_snap = snap(market, &descent)?;
    if let (Some(a), Some(b)) = (&convex_snap, &descent_snap) {
        within &= a.prices == b.prices;
    }
    if !within {
        return Err(Error::Disagreement {
            max_gap: agreement,
            bound,
            convex,
            descent,
        });
    }

    let recovered = descent_snap.or(convex_snap);
    let p_star_exact = recovered.as_ref().map(|s| s.prices.clone());
    let (p_star, tightness) = match recovered {
        Some(s) => (
            PriceVector::new(s.prices.0.iter().map(T::from_rational).collect()),
            Some(s.tightness),
        ),
        None if !T::EXACT && check_clearing(market, &trace.final_price)?.clearing == Some(true) => {
            (trace.final_price.clone(), None)
        }
        None => {
            return Err(Error::Uncertified(format!(
                "no exact clearing price near {descent:?}"
            )))
        }
    };
    let clearing = check_clearing(market, &p_star)?;
    let allocation = clearing
        .allocation
        .clone()
        .ok_or_else(|| Error::Uncertified("clearing check returned no allocation".into()))?;
    let outcome = Outcome {
        prices: p_star.clone(),
        allocation: allocation.clone(),
    };
    let efficiency = certify_constrained_efficiency(market, &outcome, &[])?;
    Ok(EquilibriumResult {
        revenue: revenue(&outcome),
        welfare: social_welfare(market, &allocation)?,
        p_star,
        p_star_exact,
        allocation,
        method_agreement: agreement,
        certificates: Certificates {
            clearing,
            efficiency,
        },
        diagnostics: Diagnostics {
            convex_raw_prices: eg.prices,
            convex_prices: convex,
            duality_gap: eg.duality_gap,
            convex_iterations: eg.iterations,
            descent_prices: descent,
            descent_steps: trace.steps.len(),
            feasibility_checks: trace.checks,
            agreement_bound: bound,
            snap_tightness: tightness,
        },
    })
}
