//! Structural property checks on generated markets.
//!
//! Each market is solved, then scanned exactly on a lattice that contains
//! the equilibrium price as a grid point, so no check depends on how finely
//! the grid happens to resolve the region near `p*`.

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::feasibility::{
    check_clearing, check_feasible, is_feasible_outcome, max_extension, meet, meet_allocation,
};
use crate::generate::{random_market, MarketShape};
use crate::market::{Market, Outcome, PriceVector};
use crate::metrics::social_welfare;
use crate::numeric::{Rational, Scalar};
use crate::oracle::{grid_scan, RegionGrid};
use crate::solver::solve;

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub markets: usize,
    pub max_buyers: usize,
    pub max_goods: usize,
    /// Feasible price pairs drawn per market for the meet check.
    pub pairs: usize,
    /// Grid size cap per market.
    pub max_points: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            markets: 20,
            max_buyers: 6,
            max_goods: 6,
            pairs: 100,
            max_points: 4096,
            seed: 0,
            tol: 1e-8,
        }
    }
}

/// A solved market with its exact lattice scan.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub seed: u64,
    pub market: Market<Rational>,
    pub p_star: PriceVector<Rational>,
    pub revenue: Rational,
    pub welfare: Rational,
    pub grid: RegionGrid<Rational>,
    /// Grid index of `p*`.
    pub star_index: usize,
    /// Largest gap between raw convex-program prices and descent prices.
    pub raw_agreement: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub failures: Vec<String>,
    /// Largest observed value of the suite's error measure.
    pub worst: f64,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            ..Self::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn fail(&mut self, seed: u64, what: String) {
        // Keep reports readable on badly broken runs.
        if self.failures.len() < 20 {
            self.failures.push(format!("market {seed}: {what}"));
        }
    }

    fn merge(&mut self, other: SuiteReport) {
        self.cases += other.cases;
        self.worst = self.worst.max(other.worst);
        for f in other.failures {
            if self.failures.len() < 20 {
                self.failures.push(f);
            }
        }
    }
}

/// Shape of market `k`: buyers and goods drawn from `1..=max`.
pub fn suite_market(cfg: &SuiteConfig, k: usize) -> (u64, Market<Rational>) {
    let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(k as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let shape = MarketShape {
        buyers: rng.gen_range(1..=cfg.max_buyers.max(1)),
        goods: rng.gen_range(1..=cfg.max_goods.max(1)),
        ..MarketShape::default()
    };
    (seed, random_market(&shape, seed))
}

/// Points per axis so that the grid stays within `max_points`.
pub fn resolution_for(goods: usize, max_points: usize) -> usize {
    let r = (max_points as f64).powf(1.0 / goods.max(1) as f64).floor() as usize;
    r.clamp(3, 400)
}

/// Solves `market` in float mode, recovers `p*` exactly and scans a
/// lattice with `p*` at coordinate 1 of each axis (one step below it is
/// included) running up to `max value + 1`.
pub fn prepare(seed: u64, market: Market<Rational>, cfg: &SuiteConfig) -> Result<Prepared> {
    let r = solve(&market.as_f64(), cfg.tol)?;
    let p_star = r
        .p_star_exact
        .clone()
        .ok_or_else(|| Error::Uncertified("no exact equilibrium price".into()))?;
    let clearing = check_clearing(&market, &p_star)?;
    let allocation = match (clearing.clearing, clearing.allocation) {
        (Some(true), Some(x)) => x,
        _ => return Err(Error::Uncertified("recovered price does not clear".into())),
    };
    let raw_agreement = r
        .diagnostics
        .convex_raw_prices
        .iter()
        .zip(&r.diagnostics.descent_prices)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let n = market.num_goods();
    let res = resolution_for(n, cfg.max_points);
    let mut bounds = Vec::with_capacity(n);
    let mut coords = Vec::with_capacity(n);
    for j in 0..n {
        let top = market.buyers.iter().fold(Rational::zero(), |acc, b| {
            Rational::max_of(&acc, &b.values[j])
        }) + Rational::one();
        let p = p_star.0[j].clone();
        let step = (top.clone() - p.clone()) / Rational::from_usize(res - 2);
        let lo = p.clone() - step.clone();
        if lo > Rational::zero() {
            bounds.push((lo, top));
            coords.push(1);
        } else {
            bounds.push((p, top));
            coords.push(0);
        }
    }
    let grid = grid_scan(&market, &bounds, res)?;
    let star_index = grid.index(&coords);
    debug_assert_eq!(grid.point(star_index), p_star);
    let welfare = social_welfare(&market, &allocation)?;
    let revenue = p_star
        .0
        .iter()
        .zip(market.supply())
        .fold(Rational::zero(), |acc, (p, s)| acc + p.clone() * s);
    Ok(Prepared {
        seed,
        market,
        p_star,
        revenue,
        welfare,
        grid,
        star_index,
        raw_agreement,
    })
}

/// Meets of feasible grid pairs are feasible, and the combined allocation
/// is feasible at the meet.
pub fn meet_closure(prep: &Prepared, pairs: usize) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("meet-closure");
    let feasible = prep.grid.feasible_indices();
    if feasible.is_empty() {
        report.fail(prep.seed, "no feasible grid point".into());
        return Ok(report);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(prep.seed.wrapping_add(17));
    let m = &prep.market;
    for _ in 0..pairs {
        let p = prep.grid.point(feasible[rng.gen_range(0..feasible.len())]);
        let q = prep.grid.point(feasible[rng.gen_range(0..feasible.len())]);
        report.cases += 1;
        let (Some(x), Some(y)) = (
            check_feasible(m, &p)?.allocation,
            check_feasible(m, &q)?.allocation,
        ) else {
            report.fail(
                prep.seed,
                format!(
                    "grid point {:?} or {:?} lost feasibility",
                    p.as_f64(),
                    q.as_f64()
                ),
            );
            continue;
        };
        let r = meet(&p, &q)?;
        if !check_feasible(m, &r)?.feasible {
            report.fail(prep.seed, format!("meet {:?} infeasible", r.as_f64()));
            continue;
        }
        let z = meet_allocation(m, &p, &q, &x, &y)?;
        let outcome = Outcome {
            prices: r.clone(),
            allocation: z,
        };
        if !is_feasible_outcome(m, &outcome) {
            report.fail(
                prep.seed,
                format!("meet allocation infeasible at {:?}", r.as_f64()),
            );
        }
    }
    Ok(report)
}

/// Revenue at `p*` is at least the max-extension revenue of every feasible
/// grid point, less `step * sum s`.
pub fn revenue_dominance(prep: &Prepared) -> SuiteReport {
    let mut report = SuiteReport::new("revenue-dominance");
    let slack = prep.grid.max_step() * prep.market.supply().iter().map(Scalar::as_f64).sum::<f64>();
    let star = prep.revenue.as_f64();
    for (i, rev) in prep.grid.revenue.iter().enumerate() {
        let Some(rev) = rev else { continue };
        report.cases += 1;
        let excess = rev.as_f64() - star;
        report.worst = report.worst.max(excess);
        if excess > slack {
            report.fail(
                prep.seed,
                format!(
                    "revenue {} at {:?} beats {star}",
                    rev.as_f64(),
                    prep.grid.point(i).as_f64()
                ),
            );
        }
    }
    report
}

/// Welfare at the equilibrium is at least that of every feasible grid
/// outcome. Grid outcomes that come within `1e-6` of it must clear and lie
/// within two grid steps of `p*`.
pub fn efficiency(prep: &Prepared) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("ce-efficiency");
    let star = prep.welfare.as_f64();
    let star_coords = prep.grid.coords(prep.star_index);
    for i in prep.grid.feasible_indices() {
        let p = prep.grid.point(i);
        let Some((x, _)) = max_extension(&prep.market, &p)? else {
            report.fail(
                prep.seed,
                format!("grid point {:?} lost feasibility", p.as_f64()),
            );
            continue;
        };
        report.cases += 1;
        let w = social_welfare(&prep.market, &x)?.as_f64();
        report.worst = report.worst.max(w - star);
        if w > star + 1e-6 {
            report.fail(
                prep.seed,
                format!("welfare {w} at {:?} beats {star}", p.as_f64()),
            );
        } else if w >= star - 1e-6 {
            let near = prep
                .grid
                .coords(i)
                .iter()
                .zip(&star_coords)
                .all(|(a, b)| a.abs_diff(*b) <= 2);
            let clears = check_clearing(&prep.market, &p)?.clearing == Some(true);
            if !(near && clears) {
                report.fail(
                    prep.seed,
                    format!(
                        "welfare {w} at {:?} (near {near}, clears {clears})",
                        p.as_f64()
                    ),
                );
            }
        }
    }
    Ok(report)
}

/// Convex-program and descent prices agree within `bound`, and cutting any
/// single coordinate of `p*` by 1% is infeasible.
pub fn cross_method(
    seed: u64,
    market: &Market<Rational>,
    p_star: &PriceVector<Rational>,
    raw_gap: f64,
    bound: f64,
) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("cross-method");
    report.cases += 1;
    report.worst = raw_gap;
    if raw_gap > bound {
        report.fail(
            seed,
            format!("convex and descent prices differ by {raw_gap:e}"),
        );
    }
    let cut = Rational::new(99.into(), 100.into());
    for j in 0..p_star.len() {
        let mut q = p_star.clone();
        q.0[j] = q.0[j].clone() * cut.clone();
        report.cases += 1;
        if check_feasible(market, &q)?.feasible {
            report.fail(seed, format!("1% cut of good {j} stays feasible"));
        }
    }
    Ok(report)
}

/// First upward perturbation of `p` (good `j` raised by `delta`) that is
/// infeasible, if any. The feasible set is closed under meets but not
/// under raising a single price.
pub fn upward_closure_gap<T: Scalar>(
    market: &Market<T>,
    p: &PriceVector<T>,
    delta: &T,
) -> Result<Option<PriceVector<T>>> {
    for j in 0..p.len() {
        let mut q = p.clone();
        q.0[j] = q.0[j].clone() + delta.clone();
        if !check_feasible(market, &q)?.feasible {
            return Ok(Some(q));
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteSummary {
    pub markets: usize,
    pub suites: Vec<SuiteReport>,
    /// Markets where a single-price increase from `p*` breaks feasibility.
    pub upward_closure_counterexamples: usize,
}

impl SuiteSummary {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::passed)
    }
}

/// Runs every suite on `cfg.markets` generated markets.
pub fn run_suites(cfg: &SuiteConfig) -> Result<SuiteSummary> {
    let mut suites = vec![
        SuiteReport::new("meet-closure"),
        SuiteReport::new("revenue-dominance"),
        SuiteReport::new("ce-efficiency"),
        SuiteReport::new("cross-method"),
    ];
    let mut upward = 0;
    for k in 0..cfg.markets {
        let (seed, market) = suite_market(cfg, k);
        let prep = match prepare(seed, market, cfg) {
            Ok(p) => p,
            Err(e) => {
                for s in &mut suites {
                    s.cases += 1;
                    s.fail(seed, format!("could not prepare: {e}"));
                }
                continue;
            }
        };
        suites[0].merge(meet_closure(&prep, cfg.pairs)?);
        suites[1].merge(revenue_dominance(&prep));
        suites[2].merge(efficiency(&prep)?);
        suites[3].merge(cross_method(
            seed,
            &prep.market,
            &prep.p_star,
            prep.raw_agreement,
            1e-5,
        )?);
        let delta = Rational::new(1.into(), 100.into());
        if upward_closure_gap(&prep.market, &prep.p_star, &delta)?.is_some() {
            upward += 1;
        }
    }
    Ok(SuiteSummary {
        markets: cfg.markets,
        suites,
        upward_closure_counterexamples: upward,
    })
}
