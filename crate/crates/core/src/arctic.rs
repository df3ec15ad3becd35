//! Input formats and the reduction from arctic bids to plain markets.
//!
//! An arctic bid is a vector of per-unit limit values plus a budget. Each
//! bid behaves exactly like a separate buyer, so a collection of bids is
//! flattened into one pseudo-buyer per bid and results are summed back per
//! owner afterwards.
//!
//! JSON documents carry a `kind` of `market` (buyers) or `arctic` (bids).
//! Numbers are JSON numbers or `"p/q"` strings; exact mode reads both
//! without rounding.

use std::io::Read;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{Allocation, Bundle, Buyer, Good, Market, PriceVector};
use crate::numeric::{dot, parse_rational, rational_from_decimal, Rational, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Number(serde_json::Number),
    Text(String),
}

impl Num {
    fn exact(&self) -> Option<Rational> {
        match self {
            Num::Number(n) => rational_from_decimal(&n.to_string()),
            Num::Text(s) => parse_rational(s),
        }
    }

    fn read<T: Scalar>(&self, path: &str) -> Result<T> {
        let bad = || Error::Parse {
            path: path.to_string(),
            message: format!("not a number or p/q fraction: {self:?}"),
        };
        match self {
            Num::Number(n) if !T::EXACT => n.as_f64().map(T::from_f64).ok_or_else(bad),
            _ => self.exact().map(|r| T::from_rational(&r)).ok_or_else(bad),
        }
    }

    /// Integers as JSON numbers, other rationals as `"p/q"`.
    pub fn from_rational(r: &Rational) -> Self {
        if r.is_integer() {
            if let Ok(n) = r.numer().to_string().parse::<i64>() {
                return Num::Number(n.into());
            }
        }
        Num::Text(format!("{}/{}", r.numer(), r.denom()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Market,
    Arctic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodRecord {
    pub name: String,
    pub supply: Num,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuyerRecord {
    pub name: String,
    pub values: Vec<Num>,
    pub budget: Num,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidRecord {
    pub owner: String,
    pub vector: Vec<Num>,
    pub budget: Num,
}

/// Raw file contents, before any numeric interpretation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketFile {
    pub kind: Kind,
    pub goods: Vec<GoodRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buyers: Option<Vec<BuyerRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bids: Option<Vec<BidRecord>>,
    /// Reserved. Only all-zero seller costs are accepted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<Vec<Num>>,
}

impl MarketFile {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_slice(bytes);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = match e.path().to_string().as_str() {
                "." | "?" => "$".to_string(),
                p => p.to_string(),
            };
            Error::Parse {
                path,
                message: e.inner().to_string(),
            }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_market(market: &Market<Rational>) -> Self {
        Self {
            kind: Kind::Market,
            goods: market
                .goods
                .iter()
                .map(|g| GoodRecord {
                    name: g.name.clone(),
                    supply: Num::from_rational(&g.supply),
                })
                .collect(),
            buyers: Some(
                market
                    .buyers
                    .iter()
                    .map(|b| BuyerRecord {
                        name: b.name.clone(),
                        values: b.values.iter().map(Num::from_rational).collect(),
                        budget: Num::from_rational(&b.budget),
                    })
                    .collect(),
            ),
            bids: None,
            costs: None,
        }
    }

    /// Interprets the numbers and reduces bids to a market.
    pub fn interpret<T: Scalar>(&self) -> Result<Instance<T>> {
        if let Some(costs) = &self.costs {
            for (j, c) in costs.iter().enumerate() {
                let c: Rational = c.read(&format!("costs[{j}]"))?;
                if c != Rational::from_integer(0.into()) {
                    return Err(Error::OutOfScope(format!(
                        "seller costs are not supported (costs[{j}] = {c})"
                    )));
                }
            }
        }
        let goods = self
            .goods
            .iter()
            .enumerate()
            .map(|(j, g)| {
                Ok(Good {
                    name: g.name.clone(),
                    supply: g.supply.read(&format!("goods[{j}].supply"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let read_vec = |xs: &[Num], path: String| -> Result<Vec<T>> {
            xs.iter()
                .enumerate()
                .map(|(k, x)| x.read(&format!("{path}[{k}]")))
                .collect()
        };
        match self.kind {
            Kind::Market => {
                if self.bids.is_some() {
                    return Err(Error::Parse {
                        path: "bids".into(),
                        message: "a market file lists buyers, not bids".into(),
                    });
                }
                let records = self.buyers.as_deref().ok_or_else(|| Error::Parse {
                    path: "buyers".into(),
                    message: "missing field `buyers`".into(),
                })?;
                let buyers = records
                    .iter()
                    .enumerate()
                    .map(|(i, b)| {
                        Ok(Buyer {
                            name: b.name.clone(),
                            values: read_vec(&b.values, format!("buyers[{i}].values"))?,
                            budget: b.budget.read(&format!("buyers[{i}].budget"))?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Instance::direct(Market::new(goods, buyers)?))
            }
            Kind::Arctic => {
                if self.buyers.is_some() {
                    return Err(Error::Parse {
                        path: "buyers".into(),
                        message: "an arctic file lists bids, not buyers".into(),
                    });
                }
                let records = self.bids.as_deref().ok_or_else(|| Error::Parse {
                    path: "bids".into(),
                    message: "missing field `bids`".into(),
                })?;
                let bids = records
                    .iter()
                    .enumerate()
                    .map(|(k, b)| {
                        Ok(ArcticBid {
                            owner: b.owner.clone(),
                            vector: read_vec(&b.vector, format!("bids[{k}].vector"))?,
                            budget: b.budget.read(&format!("bids[{k}].budget"))?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                flatten_bids(&BidCollection::new(goods, bids)?)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArcticBid<T> {
    pub owner: String,
    /// Per-unit limit value of each good.
    pub vector: Vec<T>,
    pub budget: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BidCollection<T> {
    pub goods: Vec<Good<T>>,
    pub bids: Vec<ArcticBid<T>>,
}

impl<T: Scalar> BidCollection<T> {
    pub fn new(goods: Vec<Good<T>>, bids: Vec<ArcticBid<T>>) -> Result<Self> {
        let n = goods.len();
        for (k, bid) in bids.iter().enumerate() {
            let bad = |message: &str| Error::Parse {
                path: format!("bids[{k}]"),
                message: message.to_string(),
            };
            if bid.owner.trim().is_empty() {
                return Err(bad("owner label must be nonempty"));
            }
            if bid.vector.len() != n {
                return Err(bad(&format!(
                    "expected {n} limit values, got {}",
                    bid.vector.len()
                )));
            }
            if bid.budget < T::zero() || bid.vector.iter().any(|b| *b < T::zero()) {
                return Err(bad("budget and limit values must be nonnegative"));
            }
            if bid.budget > T::zero() && bid.vector.iter().all(|b| b.is_zero()) {
                return Err(bad("a funded bid needs a positive limit value"));
            }
        }
        Ok(Self { goods, bids })
    }
}

/// Pseudo-buyer to owner bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct OwnerMap {
    /// Owner labels in order of first appearance.
    pub owners: Vec<String>,
    /// Owner index of each pseudo-buyer.
    pub buyer_owner: Vec<usize>,
}

/// A market ready to solve, with the owners its buyers report to.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance<T> {
    pub market: Market<T>,
    pub owners: OwnerMap,
}

impl<T: Scalar> Instance<T> {
    /// Every buyer is its own owner.
    pub fn direct(market: Market<T>) -> Self {
        let owners = OwnerMap {
            owners: market.buyers.iter().map(|b| b.name.clone()).collect(),
            buyer_owner: (0..market.num_buyers()).collect(),
        };
        Self { market, owners }
    }
}

/// One pseudo-buyer per funded bid. Zero-budget bids can only ever receive
/// the zero bundle, so they are dropped; their owners still appear.
pub fn flatten_bids<T: Scalar>(collection: &BidCollection<T>) -> Result<Instance<T>> {
    let mut owners: Vec<String> = Vec::new();
    let mut buyer_owner = Vec::new();
    let mut buyers = Vec::new();
    let mut seen = std::collections::HashMap::new();
    for (k, bid) in collection.bids.iter().enumerate() {
        let owner = *seen.entry(bid.owner.clone()).or_insert_with(|| {
            owners.push(bid.owner.clone());
            owners.len() - 1
        });
        if bid.budget.is_zero() {
            warn!("dropping bid {k} of {:?}: zero budget", bid.owner);
            continue;
        }
        let count = buyer_owner.iter().filter(|&&o| o == owner).count();
        buyer_owner.push(owner);
        buyers.push(Buyer {
            name: format!("{}#{}", bid.owner, count + 1),
            values: bid.vector.clone(),
            budget: bid.budget.clone(),
        });
    }
    Ok(Instance {
        market: Market::new(collection.goods.clone(), buyers)?,
        owners: OwnerMap {
            owners,
            buyer_owner,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OwnerShare<T> {
    pub owner: String,
    pub bundle: Vec<T>,
    pub spend: T,
    pub budget: T,
}

/// Sums bundles, spend and budget per owner.
pub fn reaggregate<T: Scalar>(
    instance: &Instance<T>,
    prices: &PriceVector<T>,
    allocation: &Allocation<T>,
) -> Result<Vec<OwnerShare<T>>> {
    instance.market.check_allocation(allocation)?;
    let n = instance.market.num_goods();
    let mut shares: Vec<OwnerShare<T>> = instance
        .owners
        .owners
        .iter()
        .map(|o| OwnerShare {
            owner: o.clone(),
            bundle: vec![T::zero(); n],
            spend: T::zero(),
            budget: T::zero(),
        })
        .collect();
    for (i, Bundle(x)) in allocation.0.iter().enumerate() {
        let share = &mut shares[instance.owners.buyer_owner[i]];
        for (acc, q) in share.bundle.iter_mut().zip(x) {
            *acc = acc.clone() + q.clone();
        }
        share.spend = share.spend.clone() + dot(&prices.0, x);
        share.budget = share.budget.clone() + instance.market.buyers[i].budget.clone();
    }
    Ok(shares)
}

/// Reads any JSON document.
pub fn parse_instance<T: Scalar>(bytes: &[u8]) -> Result<Instance<T>> {
    MarketFile::from_json(bytes)?.interpret()
}

/// Reads buyers or bids from CSV with header `name,budget,v_1,...,v_n`.
/// Rows sharing a name become bids of one owner.
pub fn parse_csv<T: Scalar, R: Read>(input: R, goods: Vec<Good<T>>) -> Result<Instance<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let n = goods.len();
    let expected: Vec<String> = ["name".to_string(), "budget".to_string()]
        .into_iter()
        .chain((1..=n).map(|j| format!("v_{j}")))
        .collect();
    if headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse {
            path: "header".into(),
            message: format!("expected {}", expected.join(",")),
        });
    }
    let mut bids = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let cell = |c: usize| -> Result<T> {
            let path = format!("row {} column {}", row + 2, expected[c]);
            parse_rational(&record[c])
                .map(|r| {
                    if T::EXACT {
                        T::from_rational(&r)
                    } else {
                        record[c]
                            .parse::<f64>()
                            .map_or_else(|_| T::from_rational(&r), T::from_f64)
                    }
                })
                .ok_or(Error::Parse {
                    path,
                    message: format!("not a number: {:?}", &record[c]),
                })
        };
        bids.push(ArcticBid {
            owner: record[0].to_string(),
            budget: cell(1)?,
            vector: (2..2 + n).map(cell).collect::<Result<_>>()?,
        });
    }
    flatten_bids(&BidCollection::new(goods, bids)?)
}
