//! Market domain types and the budget-constrained demand correspondence for
//! linear valuations.
//!
//! Money is implicit: it is never stored in price, value or bundle vectors,
//! and always has price 1 and value 1. A buyer's bang-per-buck set may
//! contain money, which means the buyer is indifferent about keeping part of
//! the budget.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{dot, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct Good<T> {
    pub name: String,
    pub supply: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Buyer<T> {
    pub name: String,
    /// Per-unit value of each good, in money.
    pub values: Vec<T>,
    pub budget: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Market<T> {
    pub goods: Vec<Good<T>>,
    pub buyers: Vec<Buyer<T>>,
    /// Relative tie tolerance used by float mode; ignored by exact mode.
    pub tol: f64,
}

/// Strictly positive per-good prices; money is fixed at 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PriceVector<T>(pub Vec<T>);

/// Quantities of each good held by one buyer.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Bundle<T>(pub Vec<T>);

/// One bundle per buyer.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Allocation<T>(pub Vec<Bundle<T>>);

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome<T> {
    pub prices: PriceVector<T>,
    pub allocation: Allocation<T>,
}

/// Goods maximising one buyer's value-to-price ratio at given prices.
#[derive(Clone, Debug, PartialEq)]
pub struct BangPerBuckSet<T> {
    pub buyer: usize,
    /// Maximising goods, ascending.
    pub goods: Vec<usize>,
    /// Money (ratio 1) is among the maximisers.
    pub money: bool,
    /// Largest ratio over goods and money, so never below 1.
    pub max_ratio: T,
}

impl<T> BangPerBuckSet<T> {
    pub fn contains(&self, good: usize) -> bool {
        self.goods.binary_search(&good).is_ok()
    }

    /// The buyer must spend the whole budget.
    pub fn is_strict(&self) -> bool {
        !self.money
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub entity: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.rule)
    }
}

impl<T: Scalar> PriceVector<T> {
    pub fn new(prices: Vec<T>) -> Self {
        Self(prices)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(Scalar::as_f64).collect()
    }

    pub fn from_f64(prices: &[f64]) -> Self {
        Self(prices.iter().map(|&p| T::from_f64(p)).collect())
    }

    /// Errors unless every entry is strictly positive.
    pub fn ensure_positive(&self) -> Result<()> {
        match self.0.iter().position(|p| *p <= T::zero()) {
            Some(good) => Err(Error::UndefinedRatio {
                good,
                price: self.0[good].to_text(),
            }),
            None => Ok(()),
        }
    }
}

impl<T: Scalar> Bundle<T> {
    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    pub fn cost(&self, prices: &PriceVector<T>) -> T {
        dot(&self.0, &prices.0)
    }
}

impl<T: Scalar> Allocation<T> {
    pub fn zeros(m: usize, n: usize) -> Self {
        Self(vec![Bundle::zeros(n); m])
    }

    /// Total quantity of each good.
    pub fn aggregate(&self, n: usize) -> Vec<T> {
        let mut total = vec![T::zero(); n];
        for bundle in &self.0 {
            for (t, x) in total.iter_mut().zip(&bundle.0) {
                *t = t.clone() + x.clone();
            }
        }
        total
    }
}

impl<T: Scalar> Market<T> {
    /// Builds and validates a market.
    pub fn new(goods: Vec<Good<T>>, buyers: Vec<Buyer<T>>) -> Result<Self> {
        let market = Self::new_unchecked(goods, buyers);
        let violations = validate_market(&market);
        if violations.is_empty() {
            Ok(market)
        } else {
            Err(Error::InvalidMarket(violations))
        }
    }

    pub fn new_unchecked(goods: Vec<Good<T>>, buyers: Vec<Buyer<T>>) -> Self {
        Self {
            goods,
            buyers,
            tol: crate::numeric::DEFAULT_TOL,
        }
    }

    /// Convenience constructor from supplies, value rows and budgets.
    pub fn from_parts(supply: Vec<T>, values: Vec<Vec<T>>, budgets: Vec<T>) -> Result<Self> {
        let goods = supply
            .into_iter()
            .enumerate()
            .map(|(j, s)| Good {
                name: good_label(j),
                supply: s,
            })
            .collect();
        let buyers = values
            .into_iter()
            .zip(budgets)
            .enumerate()
            .map(|(i, (v, b))| Buyer {
                name: format!("{}", i + 1),
                values: v,
                budget: b,
            })
            .collect();
        Self::new(goods, buyers)
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn num_goods(&self) -> usize {
        self.goods.len()
    }

    pub fn num_buyers(&self) -> usize {
        self.buyers.len()
    }

    pub fn supply(&self) -> Vec<T> {
        self.goods.iter().map(|g| g.supply.clone()).collect()
    }

    /// Effective tie tolerance for this market's scalar type.
    pub fn eff_tol(&self) -> f64 {
        T::eff_tol(self.tol)
    }

    pub fn check_prices(&self, p: &PriceVector<T>) -> Result<()> {
        if p.len() != self.num_goods() {
            return Err(Error::Dimension {
                expected: self.num_goods(),
                got: p.len(),
            });
        }
        p.ensure_positive()
    }

    pub fn check_allocation(&self, x: &Allocation<T>) -> Result<()> {
        if x.0.len() != self.num_buyers() {
            return Err(Error::Dimension {
                expected: self.num_buyers(),
                got: x.0.len(),
            });
        }
        for bundle in &x.0 {
            if bundle.0.len() != self.num_goods() {
                return Err(Error::Dimension {
                    expected: self.num_goods(),
                    got: bundle.0.len(),
                });
            }
        }
        Ok(())
    }

    /// Converts every entry to another scalar type.
    pub fn convert<U: Scalar>(&self) -> Market<U> {
        let conv = |x: &T| -> U { U::from_rational(&x.to_rational()) };
        Market {
            goods: self
                .goods
                .iter()
                .map(|g| Good {
                    name: g.name.clone(),
                    supply: conv(&g.supply),
                })
                .collect(),
            buyers: self
                .buyers
                .iter()
                .map(|b| Buyer {
                    name: b.name.clone(),
                    values: b.values.iter().map(conv).collect(),
                    budget: conv(&b.budget),
                })
                .collect(),
            tol: self.tol,
        }
    }

    pub fn as_f64(&self) -> Market<f64> {
        self.convert()
    }

    /// Removes goods that no buyer values positively. Returns the reduced
    /// market and the original indices of the goods kept.
    pub fn strip_worthless_goods(&self) -> (Market<T>, Vec<usize>) {
        let kept: Vec<usize> = (0..self.num_goods())
            .filter(|&j| self.buyers.iter().any(|b| b.values[j] > T::zero()))
            .collect();
        let market = Market {
            goods: kept.iter().map(|&j| self.goods[j].clone()).collect(),
            buyers: self
                .buyers
                .iter()
                .map(|b| Buyer {
                    name: b.name.clone(),
                    values: kept.iter().map(|&j| b.values[j].clone()).collect(),
                    budget: b.budget.clone(),
                })
                .collect(),
            tol: self.tol,
        };
        (market, kept)
    }
}

/// `A`, `B`, ..., `Z`, then `G27`, `G28`, ...
pub fn good_label(j: usize) -> String {
    if j < 26 {
        ((b'A' + j as u8) as char).to_string()
    } else {
        format!("G{}", j + 1)
    }
}

/// Lists every broken invariant. An empty list means the market is valid.
pub fn validate_market<T: Scalar>(market: &Market<T>) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = market.num_goods();
    if n == 0 {
        out.push(Violation {
            entity: "market".into(),
            rule: "at least one good is required".into(),
        });
    }
    if market.buyers.is_empty() {
        out.push(Violation {
            entity: "market".into(),
            rule: "at least one buyer is required".into(),
        });
    }
    for (j, good) in market.goods.iter().enumerate() {
        if good.supply < T::zero() {
            out.push(Violation {
                entity: format!("good {} ({})", j, good.name),
                rule: "supply must be nonnegative".into(),
            });
        }
    }
    for (i, buyer) in market.buyers.iter().enumerate() {
        let entity = format!("buyer {} ({})", i, buyer.name);
        if buyer.budget < T::zero() {
            out.push(Violation {
                entity: entity.clone(),
                rule: "budget must be nonnegative".into(),
            });
        }
        if buyer.values.len() != n {
            out.push(Violation {
                entity: entity.clone(),
                rule: format!("expected {} values, got {}", n, buyer.values.len()),
            });
            continue;
        }
        if buyer.values.iter().any(|v| *v < T::zero()) {
            out.push(Violation {
                entity,
                rule: "values must be nonnegative".into(),
            });
        }
    }
    for (j, good) in market.goods.iter().enumerate() {
        let valued = market
            .buyers
            .iter()
            .any(|b| b.values.get(j).is_some_and(|v| *v > T::zero()));
        if !valued {
            out.push(Violation {
                entity: format!("good {} ({})", j, good.name),
                rule: "every good must be valued positively by at least one buyer".into(),
            });
            continue;
        }
        // Without a budgeted admirer the good's price can fall without bound.
        let funded = market
            .buyers
            .iter()
            .any(|b| b.budget > T::zero() && b.values.get(j).is_some_and(|v| *v > T::zero()));
        if !funded {
            out.push(Violation {
                entity: format!("good {} ({})", j, good.name),
                rule: "some buyer with a positive budget must value the good".into(),
            });
        }
    }
    out
}

/// Goods (and possibly money) maximising `v_j / p_j` for one buyer.
///
/// In float mode a good is a maximiser iff its ratio is at least
/// `(1 - tol) * max_ratio`; in exact mode ties are exact.
pub fn bang_per_buck<T: Scalar>(
    buyer_index: usize,
    buyer: &Buyer<T>,
    p: &PriceVector<T>,
    tol: f64,
) -> Result<BangPerBuckSet<T>> {
    if buyer.values.len() != p.len() {
        return Err(Error::Dimension {
            expected: buyer.values.len(),
            got: p.len(),
        });
    }
    bang_per_buck_within(buyer_index, buyer, p, T::eff_tol(tol))
}

/// As [`bang_per_buck`], but `band` is applied as given, in exact mode too.
pub fn bang_per_buck_within<T: Scalar>(
    buyer_index: usize,
    buyer: &Buyer<T>,
    p: &PriceVector<T>,
    band: f64,
) -> Result<BangPerBuckSet<T>> {
    if buyer.values.len() != p.len() {
        return Err(Error::Dimension {
            expected: buyer.values.len(),
            got: p.len(),
        });
    }
    p.ensure_positive()?;
    let tol = band;
    let ratios: Vec<T> = buyer
        .values
        .iter()
        .zip(&p.0)
        .map(|(v, price)| v.clone() / price.clone())
        .collect();
    let max_ratio = ratios.iter().fold(T::one(), |best, r| T::max_of(&best, r));
    let threshold = if tol > 0.0 {
        max_ratio.clone() * (T::one() - T::from_f64(tol))
    } else {
        max_ratio.clone()
    };
    let goods = ratios
        .iter()
        .enumerate()
        .filter(|(_, r)| **r > T::zero() && **r >= threshold)
        .map(|(j, _)| j)
        .collect();
    Ok(BangPerBuckSet {
        buyer: buyer_index,
        goods,
        money: T::one() >= threshold,
        max_ratio,
    })
}

/// Extreme points of the demanded set: the whole budget spent on one
/// maximising good, plus the zero bundle when money is a maximiser.
pub fn demand_vertices<T: Scalar>(
    buyer: &Buyer<T>,
    p: &PriceVector<T>,
    tol: f64,
) -> Result<Vec<Bundle<T>>> {
    let j = bang_per_buck(0, buyer, p, tol)?;
    let n = p.len();
    let mut out: Vec<Bundle<T>> = j
        .goods
        .iter()
        .map(|&good| {
            let mut x = Bundle::zeros(n);
            x.0[good] = buyer.budget.clone() / p.0[good].clone();
            x
        })
        .collect();
    if j.money {
        out.push(Bundle::zeros(n));
    }
    Ok(out)
}

/// Membership test for the demand correspondence.
///
/// `x` is demanded iff it only holds maximising goods, stays within the
/// budget, and exhausts the budget whenever money is not a maximiser.
pub fn is_demanded<T: Scalar>(
    buyer: &Buyer<T>,
    p: &PriceVector<T>,
    x: &Bundle<T>,
    tol: f64,
) -> bool {
    if x.0.len() != p.len() || p.ensure_positive().is_err() {
        return false;
    }
    let Ok(j) = bang_per_buck(0, buyer, p, tol) else {
        return false;
    };
    let tol = T::eff_tol(tol);
    for (good, q) in x.0.iter().enumerate() {
        if *q < T::zero() && !q.approx_eq(&T::zero(), tol) {
            return false;
        }
        // Compare money value so that the test scales with the budget.
        let spend = q.clone() * p.0[good].clone();
        if spend.is_positive_tol(tol)
            && !j.contains(good)
            && spend_matters(&spend, &buyer.budget, tol)
        {
            return false;
        }
    }
    let spend = x.cost(p);
    if !spend.approx_le(&buyer.budget, tol) {
        return false;
    }
    if !j.money && !spend.approx_ge(&buyer.budget, tol) {
        return false;
    }
    true
}

fn spend_matters<T: Scalar>(spend: &T, budget: &T, tol: f64) -> bool {
    if T::EXACT {
        return true;
    }
    let scale = T::max_of(&T::one(), budget);
    *spend > scale * T::from_f64(tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rational;

    fn q(p: i64, d: i64) -> Rational {
        Rational::new(p.into(), d.into())
    }

    fn example2() -> Market<Rational> {
        let i = |x: i64| q(x, 1);
        Market::from_parts(
            vec![i(3), i(2)],
            vec![vec![i(2), i(3)], vec![i(2), i(2)], vec![i(4), i(2)]],
            vec![i(1), i(1), i(1)],
        )
        .unwrap()
    }

    #[test]
    fn example2_is_valid() {
        assert!(validate_market(&example2()).is_empty());
    }

    #[test]
    fn worthless_good_is_rejected() {
        let m = Market::new_unchecked(
            vec![
                Good {
                    name: "A".into(),
                    supply: 1.0,
                },
                Good {
                    name: "B".into(),
                    supply: 1.0,
                },
            ],
            vec![Buyer {
                name: "1".into(),
                values: vec![1.0, 0.0],
                budget: 1.0,
            }],
        );
        let v = validate_market(&m);
        assert_eq!(v.len(), 1);
        assert!(v[0].rule.contains("valued positively"));
        assert!(v[0].entity.contains("good 1"));

        let (stripped, kept) = m.strip_worthless_goods();
        assert_eq!(kept, vec![0]);
        assert!(validate_market(&stripped).is_empty());
    }

    #[test]
    fn negative_budget_is_rejected() {
        let m = Market::new_unchecked(
            vec![Good {
                name: "A".into(),
                supply: 1.0,
            }],
            vec![Buyer {
                name: "1".into(),
                values: vec![1.0],
                budget: -1.0,
            }],
        );
        let v = validate_market(&m);
        assert!(v[0].rule.contains("budget must be nonnegative"));
    }

    #[test]
    fn good_wanted_only_by_penniless_buyers_is_rejected() {
        let m = Market::new_unchecked(
            vec![Good {
                name: "A".into(),
                supply: 1.0,
            }],
            vec![Buyer {
                name: "1".into(),
                values: vec![1.0],
                budget: 0.0,
            }],
        );
        let v = validate_market(&m);
        assert_eq!(v.len(), 1);
        assert!(v[0].rule.contains("positive budget"));
    }

    #[test]
    fn empty_market_is_rejected() {
        let m: Market<f64> = Market::new_unchecked(vec![], vec![]);
        assert_eq!(validate_market(&m).len(), 2);
    }

    #[test]
    fn bang_per_buck_example2() {
        let m = example2();
        let p = PriceVector(vec![q(3, 5), q(3, 5)]);
        let b1 = bang_per_buck(0, &m.buyers[0], &p, 0.0).unwrap();
        assert_eq!(b1.goods, vec![1]);
        assert_eq!(b1.max_ratio, q(5, 1));
        assert!(b1.is_strict());
        let b2 = bang_per_buck(1, &m.buyers[1], &p, 0.0).unwrap();
        assert_eq!(b2.goods, vec![0, 1]);
        assert_eq!(b2.max_ratio, q(10, 3));
    }

    #[test]
    fn bang_per_buck_all_tied_with_money() {
        let buyer = Buyer {
            name: "x".into(),
            values: vec![5.0, 3.0],
            budget: 1.0,
        };
        let j = bang_per_buck(0, &buyer, &PriceVector(vec![5.0, 3.0]), 1e-9).unwrap();
        assert_eq!(j.goods, vec![0, 1]);
        assert!(j.money);
        assert_eq!(j.max_ratio, 1.0);
    }

    #[test]
    fn bang_per_buck_rejects_zero_price() {
        let buyer = Buyer {
            name: "x".into(),
            values: vec![5.0, 3.0],
            budget: 1.0,
        };
        let err = bang_per_buck(0, &buyer, &PriceVector(vec![0.0, 3.0]), 1e-9).unwrap_err();
        assert!(matches!(err, Error::UndefinedRatio { good: 0, .. }));
    }

    #[test]
    fn demand_vertices_cases() {
        let m = example2();
        let p = PriceVector(vec![q(3, 5), q(3, 5)]);
        let v3 = demand_vertices(&m.buyers[2], &p, 0.0).unwrap();
        assert_eq!(v3, vec![Bundle(vec![q(5, 3), q(0, 1)])]);

        let poor = Buyer {
            name: "x".into(),
            values: vec![q(1, 1), q(1, 1)],
            budget: q(1, 1),
        };
        let high = PriceVector(vec![q(2, 1), q(3, 1)]);
        assert_eq!(
            demand_vertices(&poor, &high, 0.0).unwrap(),
            vec![Bundle::zeros(2)]
        );

        let b = Buyer {
            name: "x".into(),
            values: vec![q(2, 1), q(2, 1)],
            budget: q(1, 1),
        };
        let half = PriceVector(vec![q(1, 2), q(1, 2)]);
        assert_eq!(
            demand_vertices(&b, &half, 0.0).unwrap(),
            vec![
                Bundle(vec![q(2, 1), q(0, 1)]),
                Bundle(vec![q(0, 1), q(2, 1)])
            ]
        );
    }

    #[test]
    fn is_demanded_cases() {
        let m = example2();
        let p = PriceVector(vec![q(3, 5), q(3, 5)]);
        let buyer2 = &m.buyers[1];
        assert!(is_demanded(
            buyer2,
            &p,
            &Bundle(vec![q(4, 3), q(1, 3)]),
            0.0
        ));
        assert!(!is_demanded(
            buyer2,
            &p,
            &Bundle(vec![q(4, 3), q(0, 1)]),
            0.0
        ));
        // Buyer 1 must not receive good A.
        assert!(!is_demanded(
            &m.buyers[0],
            &p,
            &Bundle(vec![q(1, 3), q(4, 3)]),
            0.0
        ));

        let high = PriceVector(vec![q(10, 1), q(10, 1)]);
        for b in &m.buyers {
            assert!(is_demanded(b, &high, &Bundle::zeros(2), 0.0));
        }
    }

    #[test]
    fn is_demanded_float_tolerates_rounding() {
        let m = example2().as_f64();
        let p = PriceVector(vec![0.6, 0.6]);
        let x = Bundle(vec![4.0 / 3.0, 1.0 / 3.0 + 1e-13]);
        assert!(is_demanded(&m.buyers[1], &p, &x, 1e-9));
    }
}
