//! Quasi-linear Eisenberg–Gale convex program, solved by a log-barrier
//! Newton method.
//!
//! ```text
//! maximise   sum_i beta_i log(u_i) - delta_i
//! subject to u_i <= v_i . x_i + delta_i
//!            sum_i x_ij <= s_j
//!            x >= 0, delta >= 0
//! ```
//!
//! `u_i` is eliminated (it is tight at the optimum), leaving variables
//! `x_ij` and the unspent money `delta_i`. The multipliers of the supply
//! constraints are the equilibrium prices. The Lagrange dual is
//!
//! ```text
//! g(p) = sum_j p_j s_j + sum_i beta_i (log(beta_i / lambda_i) - 1),
//! lambda_i = min(1, min_j p_j / v_ij)
//! ```
//!
//! and the reported duality gap is `g(p) - primal`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::market::Market;

#[derive(Clone, Debug)]
pub struct EgOptions {
    /// Target duality gap, in money.
    pub tol: f64,
    /// Budget of Newton steps across all barrier stages.
    pub max_iterations: usize,
}

impl Default for EgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: 1_000_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EgSolution {
    /// Units of each good per buyer.
    pub allocation: Vec<Vec<f64>>,
    /// Unspent money per buyer.
    pub leftover: Vec<f64>,
    /// `v_i . x_i + delta_i` per buyer.
    pub utilities: Vec<f64>,
    pub prices: Vec<f64>,
    pub primal: f64,
    pub dual: f64,
    pub duality_gap: f64,
    pub iterations: usize,
}

/// Variable layout: `x_ij` only for budgeted buyers, positive values and
/// positive supply; one `delta_i` per budgeted buyer.
struct Problem {
    m: usize,
    n: usize,
    budget: Vec<f64>,
    values: Vec<Vec<f64>>,
    supply: Vec<f64>,
    /// `(buyer, good)` for each x-variable.
    xs: Vec<(usize, usize)>,
    /// Index of `delta_i`, for budgeted buyers.
    delta: Vec<Option<usize>>,
    /// x-variables touching each good.
    by_good: Vec<Vec<usize>>,
    /// x-variables of each buyer.
    by_buyer: Vec<Vec<usize>>,
    nvars: usize,
}

impl Problem {
    fn new(market: &Market<f64>) -> Self {
        let m = market.num_buyers();
        let n = market.num_goods();
        let budget: Vec<f64> = market.buyers.iter().map(|b| b.budget).collect();
        let values: Vec<Vec<f64>> = market.buyers.iter().map(|b| b.values.clone()).collect();
        let supply = market.supply();
        let mut xs = Vec::new();
        let mut by_good = vec![Vec::new(); n];
        let mut by_buyer = vec![Vec::new(); m];
        for i in 0..m {
            if budget[i] <= 0.0 {
                continue;
            }
            for j in 0..n {
                if values[i][j] > 0.0 && supply[j] > 0.0 {
                    by_good[j].push(xs.len());
                    by_buyer[i].push(xs.len());
                    xs.push((i, j));
                }
            }
        }
        let mut nvars = xs.len();
        let delta = (0..m)
            .map(|i| {
                (budget[i] > 0.0).then(|| {
                    nvars += 1;
                    nvars - 1
                })
            })
            .collect();
        Self {
            m,
            n,
            budget,
            values,
            supply,
            xs,
            delta,
            by_good,
            by_buyer,
            nvars,
        }
    }

    fn start(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.nvars];
        for j in 0..self.n {
            let k = self.by_good[j].len().max(1) as f64;
            for &v in &self.by_good[j] {
                z[v] = self.supply[j] / (2.0 * k);
            }
        }
        for i in 0..self.m {
            if let Some(d) = self.delta[i] {
                z[d] = self.budget[i].max(1e-3);
            }
        }
        z
    }

    fn wealth(&self, z: &[f64], i: usize) -> f64 {
        let mut w = self.delta[i].map_or(0.0, |d| z[d]);
        for &v in &self.by_buyer[i] {
            let (_, j) = self.xs[v];
            w += self.values[i][j] * z[v];
        }
        w
    }

    fn slack(&self, z: &[f64], j: usize) -> f64 {
        self.supply[j] - self.by_good[j].iter().map(|&v| z[v]).sum::<f64>()
    }

    fn interior(&self, z: &[f64]) -> bool {
        z.iter().all(|&x| x > 0.0)
            && (0..self.n).all(|j| self.by_good[j].is_empty() || self.slack(z, j) > 0.0)
    }

    fn primal(&self, z: &[f64]) -> f64 {
        (0..self.m)
            .filter_map(|i| self.delta[i].map(|d| self.budget[i] * self.wealth(z, i).ln() - z[d]))
            .sum()
    }

    fn barrier_terms(&self) -> usize {
        self.nvars + self.by_good.iter().filter(|g| !g.is_empty()).count()
    }

    /// Barrier objective `t * primal + sum log(slacks)`.
    fn objective(&self, z: &[f64], t: f64) -> f64 {
        let mut f = t * self.primal(z);
        f += z.iter().map(|x| x.ln()).sum::<f64>();
        for j in 0..self.n {
            if !self.by_good[j].is_empty() {
                f += self.slack(z, j).ln();
            }
        }
        f
    }

    /// Gradient and negated Hessian of the barrier objective.
    fn derivatives(&self, z: &[f64], t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let nv = self.nvars;
        let mut g = DVector::zeros(nv);
        let mut h = DMatrix::zeros(nv, nv);
        for i in 0..self.m {
            let Some(d) = self.delta[i] else { continue };
            let w = self.wealth(z, i);
            let coef = t * self.budget[i] / w;
            let curv = t * self.budget[i] / (w * w);
            let mut entries: Vec<(usize, f64)> = self.by_buyer[i]
                .iter()
                .map(|&v| (v, self.values[i][self.xs[v].1]))
                .collect();
            entries.push((d, 1.0));
            for &(a, va) in &entries {
                g[a] += coef * va;
                for &(b, vb) in &entries {
                    h[(a, b)] += curv * va * vb;
                }
            }
            g[d] -= t;
        }
        for (a, &x) in z.iter().enumerate() {
            g[a] += 1.0 / x;
            h[(a, a)] += 1.0 / (x * x);
        }
        for j in 0..self.n {
            if self.by_good[j].is_empty() {
                continue;
            }
            let s = self.slack(z, j);
            for &a in &self.by_good[j] {
                g[a] -= 1.0 / s;
                for &b in &self.by_good[j] {
                    h[(a, b)] += 1.0 / (s * s);
                }
            }
        }
        (g, h)
    }

    /// Dual prices at a central point. Each price is read from the
    /// stationarity condition of the largest variable on that good, which
    /// avoids the cancellation in `1 / (t * slack_j)`.
    fn prices(&self, z: &[f64], t: f64) -> Vec<f64> {
        let mut p = vec![0.0; self.n];
        for (j, pj) in p.iter_mut().enumerate() {
            let Some(&best) = self.by_good[j]
                .iter()
                .max_by(|&&a, &&b| z[a].total_cmp(&z[b]))
            else {
                continue;
            };
            let (i, _) = self.xs[best];
            *pj = self.budget[i] * self.values[i][j] / self.wealth(z, i) + 1.0 / (t * z[best]);
        }
        // Goods with zero supply: cheapest price no budgeted buyer strictly
        // prefers over their current best ratio.
        for j in 0..self.n {
            if self.supply[j] > 0.0 {
                continue;
            }
            p[j] = (0..self.m)
                .filter(|&i| self.budget[i] > 0.0)
                .map(|i| self.values[i][j] / self.best_ratio(&p, i))
                .fold(0.0, f64::max);
        }
        p
    }

    fn best_ratio(&self, p: &[f64], i: usize) -> f64 {
        (0..self.n)
            .filter(|&j| self.supply[j] > 0.0 && p[j] > 0.0)
            .map(|j| self.values[i][j] / p[j])
            .fold(1.0, f64::max)
    }

    fn dual(&self, p: &[f64]) -> f64 {
        let mut g: f64 = (0..self.n).map(|j| p[j] * self.supply[j]).sum();
        for i in 0..self.m {
            if self.budget[i] <= 0.0 {
                continue;
            }
            let lambda = 1.0 / self.best_ratio(p, i);
            g += self.budget[i] * ((self.budget[i] / lambda).ln() - 1.0);
        }
        g
    }
}

fn newton_direction(g: &DVector<f64>, h: DMatrix<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = h.clone().cholesky() {
        return Some(chol.solve(g));
    }
    h.lu().solve(g)
}

/// Solves the program to duality gap `opts.tol`.
pub fn solve_eg(market: &Market<f64>, opts: &EgOptions) -> Result<EgSolution> {
    let violations = crate::market::validate_market(market);
    if !violations.is_empty() {
        return Err(Error::InvalidMarket(violations));
    }
    if opts.tol <= 0.0 {
        return Err(Error::Precondition("tolerance must be positive".into()));
    }
    let prob = Problem::new(market);
    let mut z = prob.start();
    let mut t = 1.0;
    let k = prob.barrier_terms() as f64;
    let mut iterations = 0usize;
    let mu = 8.0;

    loop {
        // Centering.
        for _ in 0..100 {
            let (g, h) = prob.derivatives(&z, t);
            let Some(d) = newton_direction(&g, h) else {
                break;
            };
            iterations += 1;
            let decrement = g.dot(&d);
            if !decrement.is_finite() || decrement < 1e-14 {
                break;
            }
            let mut step = 1.0;
            // Stay strictly interior.
            for (a, &x) in z.iter().enumerate() {
                if d[a] < 0.0 {
                    step = f64::min(step, -0.99 * x / d[a]);
                }
            }
            for j in 0..prob.n {
                let dj: f64 = prob.by_good[j].iter().map(|&a| d[a]).sum();
                if dj > 0.0 {
                    step = f64::min(step, 0.99 * prob.slack(&z, j) / dj);
                }
            }
            // Close to the centre the objective is too flat to compare in
            // floating point; damped Newton steps need no line search there.
            if decrement < 0.0625 {
                step = step.min(1.0 / (1.0 + decrement.sqrt()));
                let trial: Vec<f64> = z.iter().enumerate().map(|(a, x)| x + step * d[a]).collect();
                if !prob.interior(&trial) {
                    break;
                }
                z = trial;
                if decrement < 1e-10 || iterations >= opts.max_iterations {
                    break;
                }
                continue;
            }
            let f0 = prob.objective(&z, t);
            let mut accepted = false;
            while step > 1e-16 {
                let trial: Vec<f64> = z.iter().enumerate().map(|(a, x)| x + step * d[a]).collect();
                if prob.interior(&trial) {
                    let f1 = prob.objective(&trial, t);
                    if f1 >= f0 + 0.25 * step * decrement {
                        z = trial;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            if iterations >= opts.max_iterations {
                break;
            }
        }

        let prices = prob.prices(&z, t);
        let primal = prob.primal(&z);
        let dual = prob.dual(&prices);
        let gap = dual - primal;
        if k / t <= opts.tol * 1e-2 && gap.abs() <= opts.tol {
            let allocation = (0..prob.m)
                .map(|i| {
                    let mut row = vec![0.0; prob.n];
                    for &v in &prob.by_buyer[i] {
                        row[prob.xs[v].1] = z[v];
                    }
                    row
                })
                .collect();
            let leftover = (0..prob.m)
                .map(|i| prob.delta[i].map_or(0.0, |d| z[d]))
                .collect();
            let utilities = (0..prob.m).map(|i| prob.wealth(&z, i)).collect();
            return Ok(EgSolution {
                allocation,
                leftover,
                utilities,
                prices,
                primal,
                dual,
                duality_gap: gap,
                iterations,
            });
        }
        if iterations >= opts.max_iterations || t > 1e16 {
            return Err(Error::NotConverged {
                iterations,
                gap,
                last_prices: prices,
            });
        }
        t *= mu;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{example1, example2, rat, single};

    fn solve(m: &Market<f64>) -> EgSolution {
        solve_eg(m, &EgOptions::default()).unwrap()
    }

    #[test]
    fn example2_prices() {
        let s = solve(&example2().as_f64());
        assert!((s.prices[0] - 0.6).abs() < 1e-6, "{:?}", s.prices);
        assert!((s.prices[1] - 0.6).abs() < 1e-6, "{:?}", s.prices);
        assert!(s.duality_gap <= 1e-8);
        assert!(s.duality_gap >= -1e-10);
        for (j, supply) in [3.0, 2.0].iter().enumerate() {
            let sold: f64 = s.allocation.iter().map(|row| row[j]).sum();
            assert!((sold - supply).abs() < 1e-6);
        }
    }

    #[test]
    fn example1_price_is_budget_sum() {
        let m = example1(rat(3, 10), rat(2, 10), rat(1, 1), rat(9, 10)).as_f64();
        let s = solve(&m);
        assert!((s.prices[0] - 0.5).abs() < 1e-7, "{:?}", s.prices);
        assert!((s.allocation[0][0] - 0.6).abs() < 1e-6);
    }

    #[test]
    fn slack_budget_buyer_keeps_money() {
        let m = single(rat(5, 1), rat(10, 1), rat(1, 1)).as_f64();
        let s = solve(&m);
        assert!((s.prices[0] - 5.0).abs() < 1e-6);
        assert!((s.leftover[0] - 5.0).abs() < 1e-5);
        assert!((s.utilities[0] - 10.0).abs() < 1e-5);
    }

    #[test]
    fn utilities_match_allocation() {
        let m = example2().as_f64();
        let s = solve(&m);
        for (i, b) in m.buyers.iter().enumerate() {
            let w: f64 = b
                .values
                .iter()
                .zip(&s.allocation[i])
                .map(|(v, x)| v * x)
                .sum::<f64>()
                + s.leftover[i];
            assert!((w - s.utilities[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        let m = example2().as_f64();
        let err = solve_eg(
            &m,
            &EgOptions {
                tol: 0.0,
                ..EgOptions::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn tiny_iteration_budget_fails_with_last_iterate() {
        let m = example2().as_f64();
        let err = solve_eg(
            &m,
            &EgOptions {
                tol: 1e-8,
                max_iterations: 3,
            },
        )
        .unwrap_err();
        match err {
            Error::NotConverged { last_prices, .. } => assert_eq!(last_prices.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
