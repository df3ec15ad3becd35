//! Brute-force ground truth on a price lattice.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::feasibility::max_extension;
use crate::market::{validate_market, Market, PriceVector};
use crate::numeric::{format_sig, Scalar};

/// Largest number of lattice points a scan will evaluate.
pub const MAX_GRID_POINTS: usize = 10_000_000;

#[derive(Clone, Debug)]
pub struct RegionGrid<T> {
    /// `(low, high)` price per good.
    pub bounds: Vec<(T, T)>,
    /// Points per axis.
    pub resolution: usize,
    /// Max-extension revenue per point, `None` where infeasible. Good 0
    /// varies fastest.
    pub revenue: Vec<Option<T>>,
}

impl<T: Scalar> RegionGrid<T> {
    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    pub fn len(&self) -> usize {
        self.revenue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.revenue.is_empty()
    }

    pub fn step(&self, good: usize) -> T {
        let (lo, hi) = &self.bounds[good];
        (hi.clone() - lo.clone()) / T::from_usize(self.resolution - 1)
    }

    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        (0..self.dims())
            .map(|_| {
                let c = index % self.resolution;
                index /= self.resolution;
                c
            })
            .collect()
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .rev()
            .fold(0, |acc, &c| acc * self.resolution + c)
    }

    pub fn coordinate(&self, good: usize, c: usize) -> T {
        lattice_value(&self.bounds[good], self.resolution, c)
    }

    pub fn point(&self, index: usize) -> PriceVector<T> {
        PriceVector::new(
            self.coords(index)
                .into_iter()
                .enumerate()
                .map(|(j, c)| self.coordinate(j, c))
                .collect(),
        )
    }

    pub fn is_feasible(&self, index: usize) -> bool {
        self.revenue[index].is_some()
    }

    pub fn feasible_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_feasible(i)).collect()
    }

    /// Largest grid step over all axes, as a float.
    pub fn max_step(&self) -> f64 {
        (0..self.dims())
            .map(|j| self.step(j).as_f64())
            .fold(0.0, f64::max)
    }
}

fn lattice_value<T: Scalar>(bounds: &(T, T), resolution: usize, c: usize) -> T {
    let (lo, hi) = bounds;
    lo.clone() + (hi.clone() - lo.clone()) * T::from_usize(c) / T::from_usize(resolution - 1)
}

/// Evaluates feasibility and max-extension revenue at every lattice point.
pub fn grid_scan<T: Scalar>(
    market: &Market<T>,
    bounds: &[(T, T)],
    resolution: usize,
) -> Result<RegionGrid<T>> {
    let violations = validate_market(market);
    if !violations.is_empty() {
        return Err(Error::InvalidMarket(violations));
    }
    if bounds.len() != market.num_goods() {
        return Err(Error::Dimension {
            expected: market.num_goods(),
            got: bounds.len(),
        });
    }
    if resolution < 2 {
        return Err(Error::Precondition("resolution must be at least 2".into()));
    }
    if bounds.iter().any(|(lo, hi)| *lo <= T::zero() || hi < lo) {
        return Err(Error::Precondition(
            "bounds must be strictly positive with low <= high".into(),
        ));
    }
    let points = grid_points(bounds.len(), resolution).ok_or_else(|| {
        Error::Precondition(format!(
            "grid exceeds {MAX_GRID_POINTS} points; lower the resolution or the number of goods"
        ))
    })?;
    let mut grid = RegionGrid {
        bounds: bounds.to_vec(),
        resolution,
        revenue: Vec::new(),
    };
    grid.revenue = (0..points)
        .into_par_iter()
        .map(|i| {
            let p = grid.point(i);
            max_extension(market, &p).map(|r| r.map(|(_, rev)| rev))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(grid)
}

/// `resolution ^ goods`, or `None` past [`MAX_GRID_POINTS`].
pub fn grid_points(goods: usize, resolution: usize) -> Option<usize> {
    let mut total: usize = 1;
    for _ in 0..goods {
        total = total.checked_mul(resolution)?;
        if total > MAX_GRID_POINTS {
            return None;
        }
    }
    Some(total)
}

/// Elementwise minimum over the feasible points. It is itself a feasible
/// grid point whenever the feasible set is closed under meets.
pub fn oracle_min_price<T: Scalar>(grid: &RegionGrid<T>) -> Result<PriceVector<T>> {
    let feasible = grid.feasible_indices();
    if feasible.is_empty() {
        return Err(Error::NoFeasiblePoint);
    }
    let mut low = vec![usize::MAX; grid.dims()];
    for &i in &feasible {
        for (l, c) in low.iter_mut().zip(grid.coords(i)) {
            *l = (*l).min(c);
        }
    }
    let index = grid.index(&low);
    if !grid.is_feasible(index) {
        return Err(Error::Precondition(format!(
            "meet of the feasible grid points {:?} is infeasible",
            grid.point(index).as_f64()
        )));
    }
    Ok(grid.point(index))
}

/// Feasible point of largest max-extension revenue (first in scan order on
/// ties).
pub fn oracle_max_revenue<T: Scalar>(grid: &RegionGrid<T>) -> Result<(PriceVector<T>, T)> {
    let mut best: Option<(usize, &T)> = None;
    for (i, r) in grid.revenue.iter().enumerate() {
        if let Some(r) = r {
            if best.is_none_or(|(_, b)| r > b) {
                best = Some((i, r));
            }
        }
    }
    let (i, r) = best.ok_or(Error::NoFeasiblePoint)?;
    Ok((grid.point(i), r.clone()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

/// Marching-squares contour of the membership bitmap of a two-good grid.
///
/// The bitmap is padded with an infeasible ring whose coordinates are
/// clamped to the window, so a region touching the window edge is closed
/// along the frame. Contour vertices sit halfway between a feasible and an
/// infeasible sample.
pub fn region_boundary_2d<T: Scalar>(grid: &RegionGrid<T>) -> Result<Vec<Polyline>> {
    if grid.dims() != 2 {
        return Err(Error::Unsupported(format!(
            "boundary extraction needs exactly 2 goods, got {}",
            grid.dims()
        )));
    }
    let r = grid.resolution as isize;
    let axis: Vec<Vec<f64>> = (0..2)
        .map(|j| {
            (0..grid.resolution)
                .map(|c| grid.coordinate(j, c).as_f64())
                .collect()
        })
        .collect();
    let coord = |j: usize, c: isize| axis[j][c.clamp(0, r - 1) as usize];
    let inside = |cx: isize, cy: isize| {
        (0..r).contains(&cx)
            && (0..r).contains(&cy)
            && grid.is_feasible(grid.index(&[cx as usize, cy as usize]))
    };

    // Edge midpoints are identified by (doubled x, doubled y) so that shared
    // edges between cells produce identical keys.
    type Key = (isize, isize);
    let point_of = |(kx, ky): Key| {
        let x = if kx % 2 == 0 {
            coord(0, kx / 2)
        } else {
            0.5 * (coord(0, (kx - 1) / 2) + coord(0, (kx + 1) / 2))
        };
        let y = if ky % 2 == 0 {
            coord(1, ky / 2)
        } else {
            0.5 * (coord(1, (ky - 1) / 2) + coord(1, (ky + 1) / 2))
        };
        (x, y)
    };

    let mut segments: Vec<(Key, Key)> = Vec::new();
    for cy in -1..r {
        for cx in -1..r {
            // Corners: a=(cx,cy) b=(cx+1,cy) c=(cx+1,cy+1) d=(cx,cy+1)
            let a = inside(cx, cy);
            let b = inside(cx + 1, cy);
            let c = inside(cx + 1, cy + 1);
            let d = inside(cx, cy + 1);
            let bottom = (2 * cx + 1, 2 * cy);
            let right = (2 * cx + 2, 2 * cy + 1);
            let top = (2 * cx + 1, 2 * cy + 2);
            let left = (2 * cx, 2 * cy + 1);
            let case = (a as u8) | (b as u8) << 1 | (c as u8) << 2 | (d as u8) << 3;
            match case {
                0 | 15 => {}
                1 | 14 => segments.push((left, bottom)),
                2 | 13 => segments.push((bottom, right)),
                3 | 12 => segments.push((left, right)),
                4 | 11 => segments.push((right, top)),
                6 | 9 => segments.push((bottom, top)),
                7 | 8 => segments.push((left, top)),
                // Saddles: keep the feasible corners separated.
                5 => {
                    segments.push((left, top));
                    segments.push((bottom, right));
                }
                10 => {
                    segments.push((left, bottom));
                    segments.push((right, top));
                }
                _ => unreachable!(),
            }
        }
    }

    Ok(chain(&segments)
        .into_iter()
        .map(|(keys, closed)| Polyline {
            points: keys.into_iter().map(point_of).collect(),
            closed,
        })
        .collect())
}

type Vertex = (isize, isize);

/// Joins segments sharing endpoints into maximal chains, each flagged
/// closed or open.
fn chain(segments: &[(Vertex, Vertex)]) -> Vec<(Vec<Vertex>, bool)> {
    let mut adj: HashMap<Vertex, Vec<usize>> = HashMap::new();
    for (s, (u, v)) in segments.iter().enumerate() {
        adj.entry(*u).or_default().push(s);
        adj.entry(*v).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();
    let other = |s: usize, k: Vertex| {
        let (u, v) = segments[s];
        if u == k {
            v
        } else {
            u
        }
    };
    let walk = |start: Vertex, used: &mut Vec<bool>| {
        let mut path = vec![start];
        let mut at = start;
        while let Some(&s) = adj[&at].iter().find(|&&s| !used[s]) {
            used[s] = true;
            at = other(s, at);
            path.push(at);
        }
        path
    };
    // Open chains start at degree-1 endpoints; do those first.
    let mut starts: Vec<Vertex> = adj
        .iter()
        .filter(|(_, v)| v.len() == 1)
        .map(|(k, _)| *k)
        .collect();
    starts.sort_unstable();
    for k in starts {
        if adj[&k].iter().any(|&s| !used[s]) {
            out.push((walk(k, &mut used), false));
        }
    }
    for s in 0..segments.len() {
        if !used[s] {
            let path = walk(segments[s].0, &mut used);
            let closed = path.first() == path.last();
            out.push((path, closed));
        }
    }
    out
}

/// Distance from `(x, y)` to the nearest boundary segment.
pub fn distance_to_boundary(lines: &[Polyline], x: f64, y: f64) -> f64 {
    let mut best = f64::INFINITY;
    for line in lines {
        for w in line.points.windows(2) {
            best = best.min(segment_distance(w[0], w[1], (x, y)));
        }
        if let [only] = line.points.as_slice() {
            best = best.min(((only.0 - x).powi(2) + (only.1 - y).powi(2)).sqrt());
        }
    }
    best
}

fn segment_distance(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// Rows `price_1,...,price_n,feasible,max_revenue`. Revenue is empty at
/// infeasible points.
pub fn write_grid_csv<T: Scalar, W: Write>(grid: &RegionGrid<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=grid.dims()).map(|j| format!("price_{j}")).collect();
    header.push("feasible".into());
    header.push("max_revenue".into());
    w.write_record(&header)?;
    for i in 0..grid.len() {
        let mut row: Vec<String> = grid
            .point(i)
            .0
            .iter()
            .map(|x| format_sig(x.as_f64(), 12))
            .collect();
        row.push(if grid.is_feasible(i) { "1" } else { "0" }.into());
        row.push(
            grid.revenue[i]
                .as_ref()
                .map(|r| format_sig(r.as_f64(), 12))
                .unwrap_or_default(),
        );
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Rows `x,y,segment_id`; closed polylines repeat their first vertex.
pub fn write_boundary_csv<W: Write>(lines: &[Polyline], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "segment_id"])?;
    for (id, line) in lines.iter().enumerate() {
        for (x, y) in &line.points {
            w.write_record([format_sig(*x, 12), format_sig(*y, 12), id.to_string()])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
