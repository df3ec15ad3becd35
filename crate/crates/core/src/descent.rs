//! Monotone descent over the feasible region.
//!
//! Starting from a feasible price, repeatedly lower prices while staying
//! feasible. Single-coordinate moves are not enough: the region is not
//! convex, and at a corner such as `(2/3, 2/3)` in the two-good reference
//! market neither price can fall alone, yet both can fall together. Moves
//! therefore scale a whole subset of prices by `1 - f`. For any feasible
//! `p` above the minimum, scaling the goods where `p / p*` is largest is
//! feasible for small enough `f`, so the descent cannot stall away from the
//! minimum except by running out of step sizes.
//!
//! The minimum sits where ratios tie exactly, and a finite step can only
//! land near such a ridge, never on it. Feasibility during the descent
//! therefore treats ratios within a relative band as tied. The band is a
//! few times the smallest step, which makes the widened region slightly
//! larger than the true one. The final price is accurate to about the band.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::feasibility::{check_feasible, is_feasible_within};
use crate::market::{Market, PriceVector};
use crate::numeric::Scalar;

/// Above this many goods only structured subsets are tried.
const FULL_ENUMERATION_GOODS: usize = 10;

#[derive(Clone, Debug)]
pub struct Schedule {
    /// Largest relative reduction tried.
    pub initial: f64,
    /// Smallest relative reduction; the descent stops below it.
    pub min_step: f64,
    /// Relative width within which bang-per-buck ratios count as tied.
    /// Must be a few times `min_step`, or the descent cannot step onto the
    /// tie ridges the minimum sits on.
    pub band: f64,
}

impl Schedule {
    pub fn for_tol(tol: f64) -> Self {
        Self {
            initial: 0.25,
            min_step: tol / 4.0,
            band: tol,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DescentStep<T> {
    pub goods: Vec<usize>,
    pub factor: f64,
    pub old: Vec<T>,
    pub new: Vec<T>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DescentTrace<T> {
    pub start: PriceVector<T>,
    pub steps: Vec<DescentStep<T>>,
    pub final_price: PriceVector<T>,
    /// Feasibility checks performed, accepted or not.
    pub checks: usize,
}

/// `max_i v_ij + 1` for every good. No buyer demands anything there, so the
/// zero allocation makes it feasible.
pub fn initial_feasible_price<T: Scalar>(market: &Market<T>) -> PriceVector<T> {
    PriceVector::new(
        (0..market.num_goods())
            .map(|j| {
                let top = market
                    .buyers
                    .iter()
                    .fold(T::zero(), |acc, b| T::max_of(&acc, &b.values[j]));
                top + T::one()
            })
            .collect(),
    )
}

fn subsets(n: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = if n <= FULL_ENUMERATION_GOODS {
        (1u32..(1u32 << n))
            .map(|mask| (0..n).filter(|&j| mask & (1 << j) != 0).collect())
            .collect()
    } else {
        let mut v: Vec<Vec<usize>> = vec![(0..n).collect()];
        v.extend((0..n).map(|j| vec![j]));
        v.extend((0..n).map(|j| (0..n).filter(|&k| k != j).collect()));
        v
    };
    // Big moves first: they make the most progress per accepted check.
    out.sort_by_key(|s| std::cmp::Reverse(s.len()));
    out
}

/// Bits kept when rounding exact candidates down, so that denominators stay
/// bounded over long runs.
fn rounding_bits(schedule: &Schedule) -> u32 {
    let steps = (1.0 / schedule.min_step.max(1e-300)).log2().ceil().max(0.0) as u32;
    steps + 32
}

/// Lowers prices from `p0` by subset scaling until no move of relative size
/// `schedule.min_step` stays feasible. Feasibility during the descent reads
/// ties under `schedule.band`; the start must be feasible outright.
pub fn lattice_descent<T: Scalar>(
    market: &Market<T>,
    p0: &PriceVector<T>,
    schedule: &Schedule,
) -> Result<DescentTrace<T>> {
    let ok = schedule.min_step > 0.0
        && schedule.min_step <= schedule.initial
        && schedule.initial < 1.0
        && schedule.band >= 0.0;
    if !ok {
        return Err(Error::Precondition(
            "schedule needs 0 < min_step <= initial < 1 and band >= 0".into(),
        ));
    }
    let mut checks = 1;
    if !check_feasible(market, p0)?.feasible {
        return Err(Error::Precondition("starting price is not feasible".into()));
    }
    let band = schedule.band.max(market.eff_tol());
    let bits = rounding_bits(schedule);
    let mut sets = subsets(market.num_goods());
    let mut p = p0.clone();
    let mut steps = Vec::new();
    let mut f = schedule.initial;
    while f >= schedule.min_step {
        let keep = T::one() - T::from_f64(f);
        let mut accepted = None;
        for (k, set) in sets.iter().enumerate() {
            let mut q = p.clone();
            for &j in set {
                q.0[j] = (p.0[j].clone() * keep.clone()).floor_dyadic(bits);
            }
            if q.0.iter().any(|x| *x <= T::zero()) || q == p {
                continue;
            }
            checks += 1;
            if is_feasible_within(market, &q, band)? {
                steps.push(DescentStep {
                    goods: set.clone(),
                    factor: f,
                    old: set.iter().map(|&j| p.0[j].clone()).collect(),
                    new: set.iter().map(|&j| q.0[j].clone()).collect(),
                });
                p = q;
                accepted = Some(k);
                break;
            }
        }
        match accepted {
            Some(k) => {
                // Retry the winning direction first, with a longer step.
                let set = sets.remove(k);
                sets.insert(0, set);
                f = (2.0 * f).min(schedule.initial);
            }
            None => f /= 2.0,
        }
    }
    Ok(DescentTrace {
        start: p0.clone(),
        steps,
        final_price: p,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{example1, example2, rat};

    #[test]
    fn start_is_above_all_values() {
        let p0 = initial_feasible_price(&example2());
        assert_eq!(p0.0, vec![rat(5, 1), rat(4, 1)]);
        let cert = check_feasible(&example2(), &p0).unwrap();
        assert!(cert.feasible);
        let x = cert.allocation.unwrap();
        assert!(x.0.iter().flat_map(|b| &b.0).all(|v| *v == rat(0, 1)));
    }

    #[test]
    fn single_buyer_start() {
        let m = Market::from_parts(vec![1.0, 1.0], vec![vec![5.0, 3.0]], vec![1.0]).unwrap();
        assert_eq!(initial_feasible_price(&m).0, vec![6.0, 4.0]);
    }

    #[test]
    fn example2_descends_to_equilibrium() {
        let m = example2().as_f64();
        let trace =
            lattice_descent(&m, &initial_feasible_price(&m), &Schedule::for_tol(1e-9)).unwrap();
        let p = &trace.final_price.0;
        assert!((p[0] - 0.6).abs() < 1e-7, "{p:?}");
        assert!((p[1] - 0.6).abs() < 1e-7, "{p:?}");
    }

    #[test]
    fn exact_descent_stays_feasible_and_close() {
        let m = example2();
        let schedule = Schedule::for_tol(1e-6);
        let trace = lattice_descent(&m, &initial_feasible_price(&m), &schedule).unwrap();
        let p = trace.final_price.as_f64();
        assert!(
            (p[0] - 0.6).abs() < 1e-5 && (p[1] - 0.6).abs() < 1e-5,
            "{p:?}"
        );
        let mut q = trace.start.clone();
        for step in &trace.steps {
            for (k, &j) in step.goods.iter().enumerate() {
                assert_eq!(q.0[j], step.old[k]);
                q.0[j] = step.new[k].clone();
            }
            assert!(is_feasible_within(&m, &q, schedule.band).unwrap());
        }
        assert_eq!(q, trace.final_price);
    }

    #[test]
    fn no_moves_from_the_minimum() {
        let m = example2();
        let p = PriceVector::new(vec![rat(3, 5), rat(3, 5)]);
        let trace = lattice_descent(&m, &p, &Schedule::for_tol(1e-6)).unwrap();
        assert!(trace.steps.is_empty());
    }

    #[test]
    fn example1_descends_to_budget_sum() {
        let m = example1(rat(3, 10), rat(1, 5), rat(1, 1), rat(9, 10)).as_f64();
        let p0 = PriceVector::new(vec![2.0]);
        let trace = lattice_descent(&m, &p0, &Schedule::for_tol(1e-9)).unwrap();
        assert!((trace.final_price.0[0] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let m = example2();
        let p = PriceVector::new(vec![rat(1, 2), rat(1, 2)]);
        let err = lattice_descent(&m, &p, &Schedule::for_tol(1e-6)).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }
}
