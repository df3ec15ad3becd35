//! Exact recovery of equilibrium prices from an approximation.
//!
//! At equilibrium every positively supplied good is bought by someone for
//! whom it is a bang-per-buck maximiser. Those tight buyer-good pairs fix
//! relative prices: a buyer indifferent between `j` and `k` forces
//! `p_j / p_k = v_j / v_k`, and a buyer indifferent between good `j` and
//! money forces `p_j = v_j`. Goods linked by tight pairs form components.
//! Components containing money are pinned absolutely; the others are scaled
//! so that their buyers' budgets exactly buy their supply.
//!
//! Tightness is read from the approximation under a ladder of tolerances,
//! and each candidate is accepted only if it passes the exact clearing
//! check.

use std::collections::VecDeque;

use num_traits::{One, Zero};

use crate::error::Result;
use crate::feasibility::check_clearing;
use crate::market::{Market, PriceVector};
use crate::numeric::{Rational, Scalar};

/// Relative tie tolerances tried in order.
pub const TIGHTNESS_LADDER: [f64; 9] = [1e-13, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5];

#[derive(Clone, Debug)]
pub struct Snapped {
    pub prices: PriceVector<Rational>,
    /// Tolerance at which the tight structure was read.
    pub tightness: f64,
}

/// Recovers the exact clearing price vector near `approx`, or `None` if no
/// rung of the ladder yields a price that clears exactly.
pub fn snap<T: Scalar>(market: &Market<T>, approx: &[f64]) -> Result<Option<Snapped>> {
    let exact: Market<Rational> = market.convert();
    market.check_prices(&PriceVector::from_f64(approx))?;
    let mut tried: Vec<Vec<Rational>> = Vec::new();
    for &tau in &TIGHTNESS_LADDER {
        let Some(candidate) = candidate(&exact, approx, tau) else {
            continue;
        };
        if tried.contains(&candidate) {
            continue;
        }
        let p = PriceVector::new(candidate.clone());
        if p.ensure_positive().is_ok() && check_clearing(&exact, &p)?.clearing == Some(true) {
            return Ok(Some(Snapped {
                prices: p,
                tightness: tau,
            }));
        }
        tried.push(candidate);
    }
    Ok(None)
}

fn candidate(market: &Market<Rational>, approx: &[f64], tau: f64) -> Option<Vec<Rational>> {
    let n = market.num_goods();
    let supplied: Vec<bool> = market
        .goods
        .iter()
        .map(|g| g.supply > Rational::zero())
        .collect();
    let budgeted: Vec<usize> = (0..market.num_buyers())
        .filter(|&i| market.buyers[i].budget > Rational::zero())
        .collect();

    // Tight goods per budgeted buyer, and whether money is tight.
    let mut tight: Vec<(usize, Vec<usize>, bool)> = Vec::new();
    for &i in &budgeted {
        let v = &market.buyers[i].values;
        let ratios: Vec<f64> = (0..n)
            .map(|j| {
                if supplied[j] {
                    v[j].as_f64() / approx[j]
                } else {
                    0.0
                }
            })
            .collect();
        let best = ratios.iter().copied().fold(1.0, f64::max);
        let cut = best * (1.0 - tau);
        let goods: Vec<usize> = (0..n)
            .filter(|&j| ratios[j] > 0.0 && ratios[j] >= cut)
            .collect();
        tight.push((i, goods, 1.0 >= cut));
    }

    // Graph over goods plus a money node `n`.
    let money = n;
    let mut adj: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); n + 1];
    for (i, goods, has_money) in &tight {
        let v = &market.buyers[*i].values;
        let Some(&hub) = goods.first() else { continue };
        for &k in &goods[1..] {
            // p_k = p_hub * v_k / v_hub
            let r = v[k].clone() / v[hub].clone();
            adj[hub].push((k, r.clone()));
            adj[k].push((hub, Rational::one() / r));
        }
        if *has_money {
            // p_hub = v_hub * p_money
            adj[money].push((hub, v[hub].clone()));
            adj[hub].push((money, Rational::one() / v[hub].clone()));
        }
    }

    let mut rel: Vec<Option<Rational>> = vec![None; n + 1];
    let mut comp = vec![usize::MAX; n + 1];
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut order: Vec<usize> = vec![money];
    order.extend((0..n).filter(|&j| supplied[j]));
    for root in order {
        if rel[root].is_some() {
            continue;
        }
        let id = components.len();
        let mut members = Vec::new();
        rel[root] = Some(Rational::one());
        comp[root] = id;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            members.push(u);
            let ru = rel[u].clone()?;
            for (w, r) in &adj[u] {
                match &rel[*w] {
                    None => {
                        rel[*w] = Some(ru.clone() * r.clone());
                        comp[*w] = id;
                        queue.push_back(*w);
                    }
                    // Inconsistent cycle: this rung's tight set is wrong.
                    Some(existing) if *existing != ru.clone() * r.clone() => return None,
                    Some(_) => {}
                }
            }
        }
        components.push(members);
    }

    let mut prices: Vec<Option<Rational>> = vec![None; n];
    for (id, members) in components.iter().enumerate() {
        if members.contains(&money) {
            for &j in members.iter().filter(|&&j| j != money) {
                prices[j] = rel[j].clone();
            }
            continue;
        }
        let mut capacity = Rational::zero();
        for &j in members {
            capacity += rel[j].clone()? * market.goods[j].supply.clone();
        }
        let spend = tight
            .iter()
            .filter(|(_, goods, _)| goods.first().is_some_and(|&g| comp[g] == id))
            .fold(Rational::zero(), |acc, (i, _, _)| {
                acc + market.buyers[*i].budget.clone()
            });
        if capacity.is_zero() || spend.is_zero() {
            return None;
        }
        let alpha = spend / capacity;
        for &j in members {
            prices[j] = Some(alpha.clone() * rel[j].clone()?);
        }
    }

    // Unsupplied goods: cheapest price no budgeted buyer strictly prefers.
    let supplied_prices: Vec<Option<Rational>> = prices.clone();
    for j in (0..n).filter(|&j| !supplied[j]) {
        let mut best = Rational::zero();
        for &i in &budgeted {
            let v = &market.buyers[i].values;
            let mut top = Rational::one();
            for k in (0..n).filter(|&k| supplied[k]) {
                let pk = supplied_prices[k].clone()?;
                let r = v[k].clone() / pk;
                if r > top {
                    top = r;
                }
            }
            let floor = v[j].clone() / top;
            if floor > best {
                best = floor;
            }
        }
        prices[j] = Some(best);
    }
    prices.into_iter().collect()
}
