//! Revenue, welfare and equilibrium certificates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::feasibility::is_feasible_outcome;
use crate::market::{Allocation, Market, Outcome};
use crate::numeric::{dot, Scalar};

/// Seller revenue `sum_i p . x_i`.
pub fn revenue<T: Scalar>(outcome: &Outcome<T>) -> T {
    outcome
        .allocation
        .0
        .iter()
        .fold(T::zero(), |acc, x| acc + x.cost(&outcome.prices))
}

/// Total buyer value under linear valuations.
pub fn social_welfare<T: Scalar>(market: &Market<T>, allocation: &Allocation<T>) -> Result<T> {
    market.check_allocation(allocation)?;
    Ok(market
        .buyers
        .iter()
        .zip(&allocation.0)
        .fold(T::zero(), |acc, (b, x)| acc + dot(&b.values, &x.0)))
}

/// Total value under arbitrary valuations; `value(i, bundle)` is buyer
/// `i`'s value for `bundle`.
pub fn social_welfare_with<F>(allocation: &Allocation<f64>, value: F) -> f64
where
    F: Fn(usize, &[f64]) -> f64,
{
    allocation
        .0
        .iter()
        .enumerate()
        .map(|(i, x)| value(i, &x.0))
        .sum()
}

/// Feasible, and every good priced above `tol` sells its full supply.
pub fn is_competitive_equilibrium<T: Scalar>(
    market: &Market<T>,
    outcome: &Outcome<T>,
    tol: f64,
) -> bool {
    if !is_feasible_outcome(market, outcome) {
        return false;
    }
    let tol = T::eff_tol(tol);
    let sold = outcome.allocation.aggregate(market.num_goods());
    market
        .goods
        .iter()
        .zip(&sold)
        .zip(&outcome.prices.0)
        .all(|((g, x), p)| !p.is_positive_tol(tol) || x.approx_eq(&g.supply, tol))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "certified-CE-hence-efficient")]
    CertifiedEfficient,
    #[serde(rename = "not-CE")]
    NotEquilibrium,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EfficiencyCertificate<T> {
    pub verdict: Verdict,
    pub welfare: T,
    /// `sum v(x) - sum v(y) - p . (x - y)` against each challenger `y`.
    pub slacks: Vec<T>,
    pub min_slack: Option<T>,
}

/// Certifies constrained efficiency through the equilibrium check and
/// records, for each feasible challenger, the welfare slack that
/// quasi-linearity guarantees to be nonnegative at an equilibrium.
pub fn certify_constrained_efficiency<T: Scalar>(
    market: &Market<T>,
    outcome: &Outcome<T>,
    challengers: &[Outcome<T>],
) -> Result<EfficiencyCertificate<T>> {
    for (index, c) in challengers.iter().enumerate() {
        if !is_feasible_outcome(market, c) {
            return Err(Error::InfeasibleChallenger { index });
        }
    }
    let welfare = social_welfare(market, &outcome.allocation)?;
    let p = &outcome.prices;
    let mut slacks = Vec::with_capacity(challengers.len());
    for c in challengers {
        let other = social_welfare(market, &c.allocation)?;
        let spent_x = revenue(&Outcome {
            prices: p.clone(),
            allocation: outcome.allocation.clone(),
        });
        let spent_y = revenue(&Outcome {
            prices: p.clone(),
            allocation: c.allocation.clone(),
        });
        slacks.push(welfare.clone() - other - (spent_x - spent_y));
    }
    let min_slack = slacks.iter().cloned().reduce(|a, b| T::min_of(&a, &b));
    let verdict = if is_competitive_equilibrium(market, outcome, market.tol) {
        Verdict::CertifiedEfficient
    } else {
        Verdict::NotEquilibrium
    };
    Ok(EfficiencyCertificate {
        verdict,
        welfare,
        slacks,
        min_slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::{check_clearing, max_extension};
    use crate::fixtures::{example1, example2, rat};
    use crate::market::{Bundle, PriceVector};
    use crate::numeric::Rational;

    fn ce_example2() -> Outcome<Rational> {
        let prices = PriceVector::new(vec![rat(3, 5), rat(3, 5)]);
        let allocation = Allocation(vec![
            Bundle(vec![rat(0, 1), rat(5, 3)]),
            Bundle(vec![rat(4, 3), rat(1, 3)]),
            Bundle(vec![rat(5, 3), rat(0, 1)]),
        ]);
        Outcome { prices, allocation }
    }

    #[test]
    fn example2_revenue_and_welfare() {
        let m = example2();
        let o = ce_example2();
        assert_eq!(revenue(&o), rat(3, 1));
        assert_eq!(social_welfare(&m, &o.allocation).unwrap(), rat(15, 1));
        assert!(is_competitive_equilibrium(&m, &o, 0.0));
    }

    #[test]
    fn zero_allocation_is_worth_nothing() {
        let m = example2();
        let o = Outcome {
            prices: PriceVector::new(vec![rat(5, 1), rat(4, 1)]),
            allocation: Allocation::zeros(3, 2),
        };
        assert_eq!(revenue(&o), rat(0, 1));
        assert_eq!(social_welfare(&m, &o.allocation).unwrap(), rat(0, 1));
    }

    #[test]
    fn example1_revenue_is_budget_sum() {
        let (b1, b2, v1, v2) = (rat(3, 10), rat(1, 5), rat(1, 1), rat(9, 10));
        let m = example1(b1.clone(), b2.clone(), v1.clone(), v2.clone());
        let p = PriceVector::new(vec![b1.clone() + b2.clone()]);
        let x = check_clearing(&m, &p).unwrap().allocation.unwrap();
        let o = Outcome {
            prices: p,
            allocation: x,
        };
        assert_eq!(revenue(&o), b1.clone() + b2.clone());
        let total = b1.clone() + b2.clone();
        let expected = v1 * b1 / total.clone() + v2 * b2 / total;
        assert_eq!(social_welfare(&m, &o.allocation).unwrap(), expected);
    }

    #[test]
    fn upper_corner_is_not_an_equilibrium() {
        let m = example2();
        let p = PriceVector::new(vec![rat(2, 3), rat(2, 3)]);
        let (x, rev) = max_extension(&m, &p).unwrap().unwrap();
        assert_eq!(rev, rat(3, 1));
        let o = Outcome {
            prices: p,
            allocation: x,
        };
        assert!(!is_competitive_equilibrium(&m, &o, 0.0));

        let cert =
            certify_constrained_efficiency(&m, &ce_example2(), std::slice::from_ref(&o)).unwrap();
        assert_eq!(cert.verdict, Verdict::CertifiedEfficient);
        assert_eq!(cert.welfare, rat(15, 1));
        assert!(cert.min_slack.unwrap() >= rat(0, 1));
        assert!(social_welfare(&m, &o.allocation).unwrap() <= rat(15, 1));

        let flipped = certify_constrained_efficiency(&m, &o, &[]).unwrap();
        assert_eq!(flipped.verdict, Verdict::NotEquilibrium);
    }

    #[test]
    fn infeasible_challenger_is_rejected_by_index() {
        let m = example2();
        let bad = Outcome {
            prices: PriceVector::new(vec![rat(1, 2), rat(1, 2)]),
            allocation: Allocation::zeros(3, 2),
        };
        let err =
            certify_constrained_efficiency(&m, &ce_example2(), &[ce_example2(), bad]).unwrap_err();
        assert!(matches!(err, Error::InfeasibleChallenger { index: 1 }));
    }

    #[test]
    fn unsupplied_market_zero_outcome_is_equilibrium() {
        let m = Market::from_parts(vec![0.0], vec![vec![1.0]], vec![1.0]).unwrap();
        let o = Outcome {
            prices: PriceVector::new(vec![1.0]),
            allocation: Allocation::zeros(1, 1),
        };
        assert!(is_competitive_equilibrium(&m, &o, 1e-9));
    }

    #[test]
    fn oracle_welfare_matches_linear() {
        let m = example2().as_f64();
        let x = ce_example2().allocation;
        let xf = Allocation(
            x.0.iter()
                .map(|b| Bundle(crate::numeric::to_f64_vec(&b.0)))
                .collect(),
        );
        let w = social_welfare_with(&xf, |i, b| dot(&m.buyers[i].values, b));
        assert!((w - 15.0).abs() < 1e-12);
    }
}
