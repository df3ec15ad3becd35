//! Max-flow kernel (Dinic) over exact or floating-point capacities, plus the
//! circulation transform for edges with lower bounds.
//!
//! Residual capacities at or below `eps` are treated as saturated. Exact mode
//! passes `eps = 0`.

use std::collections::VecDeque;

use crate::numeric::Scalar;

#[derive(Clone, Debug)]
struct Arc<T> {
    to: usize,
    cap: T,
    flow: T,
}

#[derive(Clone, Debug)]
pub struct FlowNetwork<T> {
    arcs: Vec<Arc<T>>,
    adj: Vec<Vec<usize>>,
    eps: T,
}

impl<T: Scalar> FlowNetwork<T> {
    pub fn new(nodes: usize, eps: T) -> Self {
        Self {
            arcs: Vec::new(),
            adj: vec![Vec::new(); nodes],
            eps,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn add_node(&mut self) -> usize {
        self.adj.push(Vec::new());
        self.adj.len() - 1
    }

    /// Adds `u -> v` with capacity `cap` and returns the arc id.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: T) -> usize {
        let id = self.arcs.len();
        self.arcs.push(Arc {
            to: v,
            cap,
            flow: T::zero(),
        });
        self.arcs.push(Arc {
            to: u,
            cap: T::zero(),
            flow: T::zero(),
        });
        self.adj[u].push(id);
        self.adj[v].push(id + 1);
        id
    }

    pub fn flow(&self, arc: usize) -> T {
        self.arcs[arc].flow.clone()
    }

    pub fn capacity(&self, arc: usize) -> T {
        self.arcs[arc].cap.clone()
    }

    fn residual(&self, arc: usize) -> T {
        self.arcs[arc].cap.clone() - self.arcs[arc].flow.clone()
    }

    fn has_residual(&self, arc: usize) -> bool {
        self.residual(arc) > self.eps
    }

    fn levels(&self, s: usize) -> Vec<Option<usize>> {
        let mut level = vec![None; self.adj.len()];
        level[s] = Some(0);
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            let lu = level[u].unwrap_or(0);
            for &a in &self.adj[u] {
                let v = self.arcs[a].to;
                if level[v].is_none() && self.has_residual(a) {
                    level[v] = Some(lu + 1);
                    queue.push_back(v);
                }
            }
        }
        level
    }

    fn augment(
        &mut self,
        u: usize,
        t: usize,
        limit: T,
        level: &[Option<usize>],
        next: &mut [usize],
    ) -> T {
        if u == t {
            return limit;
        }
        while next[u] < self.adj[u].len() {
            let a = self.adj[u][next[u]];
            let v = self.arcs[a].to;
            let forward = match (level[u], level[v]) {
                (Some(lu), Some(lv)) => lv == lu + 1,
                _ => false,
            };
            if forward && self.has_residual(a) {
                let room = T::min_of(&limit, &self.residual(a));
                let pushed = self.augment(v, t, room, level, next);
                if pushed > T::zero() {
                    self.arcs[a].flow = self.arcs[a].flow.clone() + pushed.clone();
                    self.arcs[a ^ 1].flow = self.arcs[a ^ 1].flow.clone() - pushed.clone();
                    return pushed;
                }
            }
            next[u] += 1;
        }
        T::zero()
    }

    /// Augments from the current flow to a maximum `s`-`t` flow and returns
    /// the amount added. Calling it again after adding edges continues from
    /// the existing flow.
    pub fn max_flow(&mut self, s: usize, t: usize) -> T {
        let mut total = T::zero();
        loop {
            let level = self.levels(s);
            if level[t].is_none() {
                break;
            }
            let mut next = vec![0usize; self.adj.len()];
            let bound = self.source_bound(s);
            loop {
                let pushed = self.augment(s, t, bound.clone(), &level, &mut next);
                if pushed <= self.eps {
                    break;
                }
                total = total + pushed;
            }
        }
        total
    }

    fn source_bound(&self, s: usize) -> T {
        self.adj[s]
            .iter()
            .fold(T::one(), |acc, &a| acc + self.residual(a).abs_val())
    }

    /// Nodes reachable from `s` in the residual graph (source side of a
    /// minimum cut once the flow is maximal).
    pub fn residual_reachable(&self, s: usize) -> Vec<bool> {
        self.levels(s).iter().map(Option::is_some).collect()
    }

    /// Net flow leaving `u`.
    pub fn outflow(&self, u: usize) -> T {
        self.adj[u]
            .iter()
            .filter(|&&a| a % 2 == 0)
            .fold(T::zero(), |acc, &a| acc + self.arcs[a].flow.clone())
    }
}

/// Network whose arcs carry `[lower, upper]` bounds. Feasibility is decided
/// by the standard reduction to a max flow between a super source and sink.
#[derive(Clone, Debug)]
pub struct BoundedNetwork<T> {
    nodes: usize,
    edges: Vec<(usize, usize, T, T)>,
}

impl<T: Scalar> BoundedNetwork<T> {
    pub fn new(nodes: usize) -> Self {
        Self {
            nodes,
            edges: Vec::new(),
        }
    }

    pub fn add_edge(&mut self, u: usize, v: usize, lower: T, upper: T) -> usize {
        self.edges.push((u, v, lower, upper));
        self.edges.len() - 1
    }

    /// Finds a circulation satisfying every bound. Returns the flow on each
    /// edge, or `None` when no such circulation exists. `tol` is the relative
    /// slack allowed on the demand totals in float mode.
    pub fn feasible_circulation(&self, eps: T, tol: f64) -> Option<Vec<T>> {
        let source = self.nodes;
        let sink = self.nodes + 1;
        let mut net = FlowNetwork::new(self.nodes + 2, eps);
        let mut excess = vec![T::zero(); self.nodes];
        let mut ids = Vec::with_capacity(self.edges.len());
        for (u, v, lo, hi) in &self.edges {
            if hi < lo {
                return None;
            }
            ids.push(net.add_edge(*u, *v, hi.clone() - lo.clone()));
            excess[*v] = excess[*v].clone() + lo.clone();
            excess[*u] = excess[*u].clone() - lo.clone();
        }
        let mut required = T::zero();
        for (node, e) in excess.iter().enumerate() {
            if *e > T::zero() {
                net.add_edge(source, node, e.clone());
                required = required + e.clone();
            } else if *e < T::zero() {
                net.add_edge(node, sink, -e.clone());
            }
        }
        let pushed = net.max_flow(source, sink);
        if !pushed.approx_ge(&required, tol) {
            return None;
        }
        Some(
            self.edges
                .iter()
                .zip(ids)
                .map(|((_, _, lo, _), id)| lo.clone() + net.flow(id))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rational;

    fn q(p: i64, d: i64) -> Rational {
        Rational::new(p.into(), d.into())
    }

    #[test]
    fn textbook_max_flow() {
        // Standard six-node example, max flow 23.
        let mut net = FlowNetwork::new(6, 0.0);
        for (u, v, c) in [
            (0, 1, 16.0),
            (0, 2, 13.0),
            (1, 3, 12.0),
            (2, 1, 4.0),
            (2, 4, 14.0),
            (3, 2, 9.0),
            (3, 5, 20.0),
            (4, 3, 7.0),
            (4, 5, 4.0),
        ] {
            net.add_edge(u, v, c);
        }
        assert_eq!(net.max_flow(0, 5), 23.0);
        let reach = net.residual_reachable(0);
        assert!(reach[0] && !reach[5]);
    }

    #[test]
    fn exact_fractional_capacities() {
        let mut net = FlowNetwork::new(4, q(0, 1));
        net.add_edge(0, 1, q(1, 3));
        net.add_edge(0, 2, q(2, 7));
        net.add_edge(1, 3, q(1, 2));
        net.add_edge(2, 3, q(1, 5));
        net.add_edge(1, 2, q(1, 1));
        assert_eq!(net.max_flow(0, 3), q(1, 3) + q(1, 5));
    }

    #[test]
    fn incremental_augmentation() {
        let mut net = FlowNetwork::new(4, 0.0);
        net.add_edge(0, 1, 1.0);
        net.add_edge(1, 3, 5.0);
        net.add_edge(2, 3, 5.0);
        assert_eq!(net.max_flow(0, 3), 1.0);
        let first = net.add_edge(0, 2, 2.0);
        assert_eq!(net.max_flow(0, 3), 2.0);
        assert_eq!(net.flow(first), 2.0);
        assert_eq!(net.outflow(0), 3.0);
    }

    #[test]
    fn lower_bounds_feasible_and_infeasible() {
        // s=0 -> a=1 -> t=2, with t -> s closing the circulation.
        let mut net = BoundedNetwork::new(3);
        net.add_edge(0, 1, q(1, 1), q(2, 1));
        let e = net.add_edge(1, 2, q(3, 2), q(3, 2));
        net.add_edge(2, 0, q(0, 1), q(10, 1));
        let flows = net.feasible_circulation(q(0, 1), 0.0).unwrap();
        assert_eq!(flows[e], q(3, 2));

        let mut bad = BoundedNetwork::new(3);
        bad.add_edge(0, 1, q(0, 1), q(1, 1));
        bad.add_edge(1, 2, q(2, 1), q(2, 1));
        bad.add_edge(2, 0, q(0, 1), q(10, 1));
        assert!(bad.feasible_circulation(q(0, 1), 0.0).is_none());
    }
}
