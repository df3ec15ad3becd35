//! Feasibility and market clearing of price vectors.
//!
//! At fixed prices each buyer either must spend the whole budget (strict:
//! money is not a bang-per-buck maximiser) or may spend anything up to it
//! (flexible). A price vector is feasible iff the strict buyers' budgets can
//! be routed, in money units, onto their maximising goods without any good
//! receiving more than `p_j * s_j`. That is a bipartite max-flow problem:
//!
//! ```text
//! source --beta_i--> buyer i --(j in J_i)--> good j --p_j*s_j--> sink
//! ```
//!
//! Clearing additionally requires every good's capacity to be used exactly,
//! which is checked with a lower-bounded circulation on the same graph.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{BoundedNetwork, FlowNetwork};
use crate::market::{
    bang_per_buck, bang_per_buck_within, is_demanded, validate_market, Allocation, BangPerBuckSet,
    Bundle, Market, Outcome, PriceVector,
};
use crate::numeric::{sum, Scalar};

/// Buyer-to-good spending graph at one price vector.
#[derive(Clone, Debug)]
pub struct SpendingGraph<T> {
    pub bang_per_buck: Vec<BangPerBuckSet<T>>,
    /// Money capacity `p_j * s_j` of each good.
    pub capacity: Vec<T>,
    /// `(buyer, good)` pairs with `good` in the buyer's bang-per-buck set,
    /// buyers ascending then goods ascending.
    pub edges: Vec<(usize, usize)>,
}

impl<T: Scalar> SpendingGraph<T> {
    pub fn build(market: &Market<T>, p: &PriceVector<T>) -> Result<Self> {
        Self::build_within(market, p, market.eff_tol())
    }

    /// Builds the graph with ties read under `band`, even in exact mode.
    pub fn build_within(market: &Market<T>, p: &PriceVector<T>, band: f64) -> Result<Self> {
        market.check_prices(p)?;
        let bang_per_buck = market
            .buyers
            .iter()
            .enumerate()
            .map(|(i, b)| bang_per_buck_within(i, b, p, band))
            .collect::<Result<Vec<_>>>()?;
        let capacity = market
            .goods
            .iter()
            .zip(&p.0)
            .map(|(g, price)| g.supply.clone() * price.clone())
            .collect();
        let edges = bang_per_buck
            .iter()
            .enumerate()
            .flat_map(|(i, j)| j.goods.iter().map(move |&g| (i, g)))
            .collect();
        Ok(Self {
            bang_per_buck,
            capacity,
            edges,
        })
    }

    pub fn is_strict(&self, buyer: usize) -> bool {
        self.bang_per_buck[buyer].is_strict()
    }
}

/// Set of goods whose capacity is exceeded by the budgets of strict buyers
/// who can only spend inside the set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OverDemand<T> {
    pub goods: Vec<usize>,
    pub buyers: Vec<usize>,
    /// Budget of strict buyers demanding only goods in the set.
    pub forced_spend: T,
    /// `sum p_j s_j` over the set.
    pub capacity: T,
}

impl<T: Scalar> OverDemand<T> {
    pub fn excess(&self) -> T {
        self.forced_spend.clone() - self.capacity.clone()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityCertificate<T> {
    pub feasible: bool,
    /// Only set by [`check_clearing`].
    pub clearing: Option<bool>,
    /// Feasible (and clearing, when `clearing == Some(true)`) allocation.
    pub allocation: Option<Allocation<T>>,
    pub witness: Option<OverDemand<T>>,
}

struct Layout {
    m: usize,
    n: usize,
}

impl Layout {
    fn source(&self) -> usize {
        0
    }
    fn buyer(&self, i: usize) -> usize {
        1 + i
    }
    fn good(&self, j: usize) -> usize {
        1 + self.m + j
    }
    fn sink(&self) -> usize {
        1 + self.m + self.n
    }
    fn nodes(&self) -> usize {
        2 + self.m + self.n
    }
}

fn flow_eps<T: Scalar>(market: &Market<T>, graph: &SpendingGraph<T>) -> T {
    if T::EXACT {
        return T::zero();
    }
    let scale = graph
        .capacity
        .iter()
        .chain(market.buyers.iter().map(|b| &b.budget))
        .fold(T::one(), |acc, c| T::max_of(&acc, c));
    scale * T::from_f64(1e-13)
}

/// Flow problem with strict buyers attached to the source. Flexible buyers
/// are attached later by [`max_extension`].
struct SpendingFlow<T> {
    layout: Layout,
    net: FlowNetwork<T>,
    buyer_arcs: Vec<Vec<(usize, usize)>>,
    source_arcs: Vec<Option<usize>>,
}

impl<T: Scalar> SpendingFlow<T> {
    fn new(market: &Market<T>, graph: &SpendingGraph<T>) -> Self {
        let layout = Layout {
            m: market.num_buyers(),
            n: market.num_goods(),
        };
        let mut net = FlowNetwork::new(layout.nodes(), flow_eps(market, graph));
        let mut source_arcs = vec![None; layout.m];
        for (i, buyer) in market.buyers.iter().enumerate() {
            if graph.is_strict(i) && buyer.budget > T::zero() {
                source_arcs[i] =
                    Some(net.add_edge(layout.source(), layout.buyer(i), buyer.budget.clone()));
            }
        }
        let mut buyer_arcs = vec![Vec::new(); layout.m];
        for &(i, j) in &graph.edges {
            let cap = market.buyers[i].budget.clone();
            let id = net.add_edge(layout.buyer(i), layout.good(j), cap);
            buyer_arcs[i].push((j, id));
        }
        for (j, cap) in graph.capacity.iter().enumerate() {
            net.add_edge(layout.good(j), layout.sink(), cap.clone());
        }
        Self {
            layout,
            net,
            buyer_arcs,
            source_arcs,
        }
    }

    fn allocation(&self, p: &PriceVector<T>) -> Allocation<T> {
        let mut x = Allocation::zeros(self.layout.m, self.layout.n);
        for (i, arcs) in self.buyer_arcs.iter().enumerate() {
            for &(j, id) in arcs {
                let f = self.net.flow(id);
                if f > T::zero() {
                    x.0[i].0[j] = f / p.0[j].clone();
                }
            }
        }
        x
    }
}

fn strict_demand<T: Scalar>(market: &Market<T>, graph: &SpendingGraph<T>) -> T {
    sum(market
        .buyers
        .iter()
        .enumerate()
        .filter(|(i, _)| graph.is_strict(*i))
        .map(|(_, b)| b.budget.clone()))
}

/// Decides whether `p` can be extended to a feasible outcome.
///
/// On success the certificate carries the allocation in which flexible
/// buyers receive nothing; on failure it carries an over-demanded good set
/// read off the minimum cut.
pub fn check_feasible<T: Scalar>(
    market: &Market<T>,
    p: &PriceVector<T>,
) -> Result<FeasibilityCertificate<T>> {
    ensure_valid(market)?;
    let graph = SpendingGraph::build(market, p)?;
    Ok(feasible_with_graph(market, p, &graph))
}

/// Feasibility with bang-per-buck ties widened to the relative `band`. The
/// widened region contains the exact one. Skips market validation.
pub fn is_feasible_within<T: Scalar>(
    market: &Market<T>,
    p: &PriceVector<T>,
    band: f64,
) -> Result<bool> {
    let graph = SpendingGraph::build_within(market, p, band)?;
    Ok(feasible_with_graph(market, p, &graph).feasible)
}

fn ensure_valid<T: Scalar>(market: &Market<T>) -> Result<()> {
    let violations = validate_market(market);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidMarket(violations))
    }
}

fn feasible_with_graph<T: Scalar>(
    market: &Market<T>,
    p: &PriceVector<T>,
    graph: &SpendingGraph<T>,
) -> FeasibilityCertificate<T> {
    let mut flow = SpendingFlow::new(market, graph);
    let (s, t) = (flow.layout.source(), flow.layout.sink());
    let routed = flow.net.max_flow(s, t);
    let required = strict_demand(market, graph);
    let tol = market.eff_tol();
    if routed.approx_ge(&required, tol) {
        return FeasibilityCertificate {
            feasible: true,
            clearing: None,
            allocation: Some(flow.allocation(p)),
            witness: None,
        };
    }
    let reach = flow.net.residual_reachable(s);
    let goods: Vec<usize> = (0..flow.layout.n)
        .filter(|&j| reach[flow.layout.good(j)])
        .collect();
    let buyers: Vec<usize> = (0..flow.layout.m)
        .filter(|&i| flow.source_arcs[i].is_some() && reach[flow.layout.buyer(i)])
        .collect();
    let witness = OverDemand {
        forced_spend: sum(buyers.iter().map(|&i| market.buyers[i].budget.clone())),
        capacity: sum(goods.iter().map(|&j| graph.capacity[j].clone())),
        goods,
        buyers,
    };
    FeasibilityCertificate {
        feasible: false,
        clearing: None,
        allocation: None,
        witness: Some(witness),
    }
}

/// Largest revenue obtainable at feasible prices `p`, with an allocation
/// attaining it: strict buyers are saturated first, then flexible buyers
/// spend as much as remaining capacity allows. `None` when `p` is infeasible.
pub fn max_extension<T: Scalar>(
    market: &Market<T>,
    p: &PriceVector<T>,
) -> Result<Option<(Allocation<T>, T)>> {
    ensure_valid(market)?;
    let graph = SpendingGraph::build(market, p)?;
    let mut flow = SpendingFlow::new(market, &graph);
    let (s, t) = (flow.layout.source(), flow.layout.sink());
    let routed = flow.net.max_flow(s, t);
    if !routed.approx_ge(&strict_demand(market, &graph), market.eff_tol()) {
        return Ok(None);
    }
    for (i, buyer) in market.buyers.iter().enumerate() {
        if !graph.is_strict(i) && buyer.budget > T::zero() {
            flow.net
                .add_edge(s, flow.layout.buyer(i), buyer.budget.clone());
        }
    }
    flow.net.max_flow(s, t);
    let revenue = flow.net.outflow(s);
    Ok(Some((flow.allocation(p), revenue)))
}

/// Decides whether `p` clears the market: some feasible allocation sells
/// every good's full supply.
pub fn check_clearing<T: Scalar>(
    market: &Market<T>,
    p: &PriceVector<T>,
) -> Result<FeasibilityCertificate<T>> {
    ensure_valid(market)?;
    let graph = SpendingGraph::build(market, p)?;
    let mut cert = feasible_with_graph(market, p, &graph);
    if !cert.feasible {
        cert.clearing = Some(false);
        return Ok(cert);
    }
    let layout = Layout {
        m: market.num_buyers(),
        n: market.num_goods(),
    };
    let mut net = BoundedNetwork::new(layout.nodes());
    let mut big = T::one();
    for (i, buyer) in market.buyers.iter().enumerate() {
        big = big + buyer.budget.clone();
        let lower = if graph.is_strict(i) {
            buyer.budget.clone()
        } else {
            T::zero()
        };
        net.add_edge(
            layout.source(),
            layout.buyer(i),
            lower,
            buyer.budget.clone(),
        );
    }
    let mut arcs = Vec::with_capacity(graph.edges.len());
    for &(i, j) in &graph.edges {
        let cap = market.buyers[i].budget.clone();
        arcs.push((
            i,
            j,
            net.add_edge(layout.buyer(i), layout.good(j), T::zero(), cap),
        ));
    }
    for (j, cap) in graph.capacity.iter().enumerate() {
        big = big + cap.clone();
        net.add_edge(layout.good(j), layout.sink(), cap.clone(), cap.clone());
    }
    net.add_edge(layout.sink(), layout.source(), T::zero(), big);
    match net.feasible_circulation(flow_eps(market, &graph), market.eff_tol()) {
        Some(flows) => {
            let mut x = Allocation::zeros(layout.m, layout.n);
            for (i, j, id) in arcs {
                if flows[id] > T::zero() {
                    x.0[i].0[j] = flows[id].clone() / p.0[j].clone();
                }
            }
            cert.clearing = Some(true);
            cert.allocation = Some(x);
        }
        None => cert.clearing = Some(false),
    }
    Ok(cert)
}

/// Elementwise minimum of two price vectors.
pub fn meet<T: Scalar>(p: &PriceVector<T>, q: &PriceVector<T>) -> Result<PriceVector<T>> {
    if p.len() != q.len() {
        return Err(Error::Dimension {
            expected: p.len(),
            got: q.len(),
        });
    }
    Ok(PriceVector(
        p.0.iter().zip(&q.0).map(|(a, b)| T::min_of(a, b)).collect(),
    ))
}

/// Checks both feasibility conditions of an outcome: supply is respected
/// and every buyer demands their bundle at the outcome's prices.
pub fn is_feasible_outcome<T: Scalar>(market: &Market<T>, outcome: &Outcome<T>) -> bool {
    if market.check_prices(&outcome.prices).is_err()
        || market.check_allocation(&outcome.allocation).is_err()
    {
        return false;
    }
    let tol = market.eff_tol();
    let total = outcome.allocation.aggregate(market.num_goods());
    let within_supply = total
        .iter()
        .zip(&market.goods)
        .all(|(x, g)| x.approx_le(&g.supply, tol));
    within_supply
        && market
            .buyers
            .iter()
            .zip(&outcome.allocation.0)
            .all(|(b, x)| is_demanded(b, &outcome.prices, x, tol))
}

/// Buyers who demand some good of `goods` at prices `r`.
fn demands_some<T: Scalar>(
    market: &Market<T>,
    r: &PriceVector<T>,
    in_set: &[bool],
) -> Result<Vec<bool>> {
    let tol = market.eff_tol();
    market
        .buyers
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let j = bang_per_buck(i, b, r, tol)?;
            Ok(j.goods.iter().any(|&g| in_set[g]))
        })
        .collect()
}

/// Builds a feasible allocation at `p ∧ q` from feasible outcomes at `p`
/// and `q`: buyers who demand some good priced no higher under `q` keep
/// their `q` bundle, everybody else keeps their `p` bundle.
pub fn meet_allocation<T: Scalar>(
    market: &Market<T>,
    p: &PriceVector<T>,
    q: &PriceVector<T>,
    x: &Allocation<T>,
    y: &Allocation<T>,
) -> Result<Allocation<T>> {
    let at_p = Outcome {
        prices: p.clone(),
        allocation: x.clone(),
    };
    let at_q = Outcome {
        prices: q.clone(),
        allocation: y.clone(),
    };
    if !is_feasible_outcome(market, &at_p) {
        return Err(Error::Precondition("outcome at p is not feasible".into()));
    }
    if !is_feasible_outcome(market, &at_q) {
        return Err(Error::Precondition("outcome at q is not feasible".into()));
    }
    let r = meet(p, q)?;
    let in_b: Vec<bool> = p.0.iter().zip(&q.0).map(|(a, b)| a >= b).collect();
    let from_q = demands_some(market, &r, &in_b)?;
    Ok(Allocation(
        from_q
            .iter()
            .enumerate()
            .map(|(i, &use_q)| {
                if use_q {
                    y.0[i].clone()
                } else {
                    x.0[i].clone()
                }
            })
            .collect(),
    ))
}

/// Demand-partition relations between `p`, `q` and `r = p ∧ q`, checked for
/// every buyer. Returns a description of the first violated relation.
///
/// With `A = {j : p_j < q_j}` and `B` its complement: a buyer demanding some
/// `j ∈ A` at `r` also demands it at `p` and `J(p) ⊆ J(r)`; a buyer
/// demanding some `j ∈ B` at `r` also demands it at `q`, `J(q) ⊆ J(r)`, and
/// `J(q) ⊆ B`.
pub fn demand_partition_violation<T: Scalar>(
    market: &Market<T>,
    p: &PriceVector<T>,
    q: &PriceVector<T>,
) -> Result<Option<String>> {
    let r = meet(p, q)?;
    let tol = market.eff_tol();
    let in_a: Vec<bool> = p.0.iter().zip(&q.0).map(|(a, b)| a < b).collect();
    for (i, buyer) in market.buyers.iter().enumerate() {
        let jr = bang_per_buck(i, buyer, &r, tol)?;
        let jp = bang_per_buck(i, buyer, p, tol)?;
        let jq = bang_per_buck(i, buyer, q, tol)?;
        let subset = |small: &BangPerBuckSet<T>| {
            small.goods.iter().all(|&g| jr.contains(g)) && (!small.money || jr.money)
        };
        for &g in &jr.goods {
            if in_a[g] {
                if !jp.contains(g) {
                    return Ok(Some(format!(
                        "buyer {i} demands {g} in A at r but not at p"
                    )));
                }
                if !subset(&jp) {
                    return Ok(Some(format!("buyer {i}: J(p) not within J(r)")));
                }
            } else {
                if !jq.contains(g) {
                    return Ok(Some(format!(
                        "buyer {i} demands {g} in B at r but not at q"
                    )));
                }
                if !subset(&jq) {
                    return Ok(Some(format!("buyer {i}: J(q) not within J(r)")));
                }
                if jq.goods.iter().any(|&k| in_a[k]) {
                    return Ok(Some(format!("buyer {i}: J(q) meets A")));
                }
            }
        }
    }
    Ok(None)
}

/// Spend of each buyer under an allocation.
pub fn spends<T: Scalar>(p: &PriceVector<T>, x: &Allocation<T>) -> Vec<T> {
    x.0.iter().map(|b: &Bundle<T>| b.cost(p)).collect()
}
