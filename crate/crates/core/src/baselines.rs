//! Comparison algorithms: Levy-walk search, local-greedy selection, the
//! auction assignment oracle and a simplified anti-flocking search.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::AuctionError;
use crate::sensing::SectorFov;
use crate::tracking::{LocalTargetList, TargetId, EXPLORE};
use crate::estimation::RelVec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyConfig {
    /// Tail exponent mu of the step-length density `L^-mu`.
    pub exponent: f64,
    pub min_step: f64,
    pub max_step: f64,
}

impl LevyConfig {
    pub fn new(exponent: f64, min_step: f64, max_step: f64) -> Self {
        assert!(exponent > 1.0 && exponent <= 3.0, "Levy exponent must lie in (1, 3]");
        assert!(0.0 < min_step && min_step < max_step, "need 0 < min step < max step");
        Self { exponent, min_step, max_step }
    }

    /// Inverse-CDF draw from the Pareto law truncated to `[min_step, max_step]`.
    pub fn sample_step<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let a = self.exponent - 1.0;
        let lo = self.min_step.powf(-a);
        let hi = self.max_step.powf(-a);
        let u: f64 = rng.random();
        (lo - u * (lo - hi)).powf(-1.0 / a).clamp(self.min_step, self.max_step)
    }
}

/// Shift the carried Levy waypoint into the current frame; once reached,
/// draw a new step with uniform direction. `project` keeps the result
/// inside the domain. Returns the waypoint and whether it was redrawn.
pub fn levy_waypoint<R: Rng + ?Sized>(
    carried: Option<RelVec>,
    shift: RelVec,
    reach_radius: f64,
    cfg: &LevyConfig,
    project: &dyn Fn(RelVec) -> RelVec,
    rng: &mut R,
) -> (RelVec, bool) {
    if let Some(q) = carried {
        let q = q + shift;
        if q.norm() >= reach_radius {
            return (q, false);
        }
    }
    let len = cfg.sample_step(rng);
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    (project(RelVec::from_polar(len, angle)), true)
}

/// Least-uncertain local record whose estimate lies in the agent's own FOV
/// (`fov` anchored at the origin of the local frame).
pub fn local_greedy_select(local: &LocalTargetList, fov: &SectorFov) -> TargetId {
    let mut best: Option<(f64, TargetId)> = None;
    // records are sorted by id, so a strict comparison keeps the lower id on ties
    for rec in local.records().iter().filter(|r| fov.contains(r.estimate.mean)) {
        let d = rec.det();
        if best.is_none_or(|(b, _)| d < b) {
            best = Some((d, rec.target_id));
        }
    }
    best.map_or(EXPLORE, |(_, id)| id)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuctionConfig {
    /// Final bid increment.
    pub epsilon: f64,
    /// Upper bound on the number of bids before giving up.
    pub max_rounds: usize,
}

impl Default for AuctionConfig {
    fn default() -> Self {
        Self { epsilon: 0.01, max_rounds: 1_000_000 }
    }
}

/// Maximum bipartite matching over the finite arcs (Kuhn's algorithm).
fn max_matching(costs: &[Vec<f64>], cols: usize) -> usize {
    fn augment(i: usize, costs: &[Vec<f64>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for (j, c) in costs[i].iter().enumerate() {
            if !c.is_finite() || seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none_or(|k| augment(k, costs, seen, owner)) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; cols];
    (0..costs.len()).filter(|&i| augment(i, costs, &mut vec![false; cols], &mut owner)).count()
}

/// Forward auction with epsilon scaling. Rows are bidders, columns objects,
/// `f64::INFINITY` marks a forbidden pair. Every row is assigned a distinct
/// column; the total cost is within `columns * epsilon` of the optimum, so
/// integer tables with `epsilon < 1 / columns` are solved exactly.
pub fn auction_assign(costs: &[Vec<f64>], cfg: &AuctionConfig) -> Result<Vec<usize>, AuctionError> {
    let n = costs.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let m = costs[0].len();
    if costs.iter().any(|r| r.len() != m) {
        return Err(AuctionError::Ragged);
    }
    if let Some(i) = costs.iter().position(|r| !r.iter().any(|c| c.is_finite())) {
        return Err(AuctionError::NoFiniteCost(i));
    }
    if n > m || max_matching(costs, m) < n {
        return Err(AuctionError::Infeasible);
    }

    // pad with zero-cost dummy bidders so the problem is square
    let value = |i: usize, j: usize| -> Option<f64> {
        if i < n {
            let c = costs[i][j];
            c.is_finite().then_some(-c)
        } else {
            Some(0.0)
        }
    };
    let finite: Vec<f64> = costs.iter().flatten().copied().filter(|c| c.is_finite()).collect();
    let spread = finite.iter().copied().fold(0.0f64, |a, c| a.max(c.abs())) * 2.0 + 1.0;
    let lonely_gap = spread * (m as f64 + 1.0);

    let mut prices = vec![0.0; m];
    let mut eps = (spread / 4.0).max(cfg.epsilon);
    let mut rounds = 0usize;
    loop {
        let mut owner: Vec<Option<usize>> = vec![None; m];
        let mut assigned: Vec<Option<usize>> = vec![None; m];
        let mut queue: Vec<usize> = (0..m).rev().collect();
        while let Some(i) = queue.pop() {
            rounds += 1;
            if rounds > cfg.max_rounds {
                return Err(AuctionError::Infeasible);
            }
            let mut best: Option<(f64, usize)> = None;
            let mut second = f64::NEG_INFINITY;
            for (j, price) in prices.iter().enumerate() {
                let Some(v) = value(i, j) else { continue };
                let net = v - price;
                match best {
                    Some((b, _)) if net <= b => second = second.max(net),
                    _ => {
                        if let Some((b, _)) = best {
                            second = second.max(b);
                        }
                        best = Some((net, j));
                    }
                }
            }
            let (best_net, j) = best.expect("every bidder has a finite arc");
            let gap = if second.is_finite() { best_net - second } else { lonely_gap };
            prices[j] += gap + eps;
            if let Some(prev) = owner[j].replace(i) {
                assigned[prev] = None;
                queue.push(prev);
            }
            assigned[i] = Some(j);
        }
        if eps <= cfg.epsilon {
            return Ok(assigned[..n].iter().map(|a| a.expect("auction terminates with a full assignment")).collect());
        }
        eps = (eps / 5.0).max(cfg.epsilon);
    }
}

/// Assignment for tables that need not admit a complete matching: the
/// smaller side bids, every bidder may fall back to a private dummy, and
/// the result maximises the number of real pairs before minimising cost.
/// Returns the column matched to each row, if any.
pub fn auction_assign_partial(costs: &[Vec<f64>], cfg: &AuctionConfig) -> Result<Vec<Option<usize>>, AuctionError> {
    let rows = costs.len();
    if rows == 0 {
        return Ok(Vec::new());
    }
    let cols = costs[0].len();
    if costs.iter().any(|r| r.len() != cols) {
        return Err(AuctionError::Ragged);
    }
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let at = |i: usize, j: usize| if transpose { costs[j][i] } else { costs[i][j] };
    let total: f64 = costs.iter().flatten().filter(|c| c.is_finite()).map(|c| c.abs()).sum();
    let dummy = 2.0 * total + 1.0;
    let padded: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..m + n).map(|j| if j < m { at(i, j) } else if j - m == i { dummy } else { f64::INFINITY }).collect())
        .collect();
    let picks = auction_assign(&padded, cfg)?;
    let mut out = vec![None; rows];
    for (i, j) in picks.into_iter().enumerate() {
        if j < m {
            if transpose {
                out[j] = Some(i);
            } else {
                out[i] = Some(j);
            }
        }
    }
    Ok(out)
}

/// Shared global visited-cell map used by the anti-flocking baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitedMap {
    pub x_min: f64,
    pub y_min: f64,
    pub cell: f64,
    pub nx: usize,
    pub ny: usize,
    visited: Vec<bool>,
    count: usize,
}

impl VisitedMap {
    pub fn new(x_min: f64, y_min: f64, width: f64, height: f64, cell: f64) -> Self {
        let nx = ((width / cell).ceil() as usize).max(1);
        let ny = ((height / cell).ceil() as usize).max(1);
        Self { x_min, y_min, cell, nx, ny, visited: vec![false; nx * ny], count: 0 }
    }

    pub fn center(&self, ix: usize, iy: usize) -> RelVec {
        RelVec::new(self.x_min + (ix as f64 + 0.5) * self.cell, self.y_min + (iy as f64 + 0.5) * self.cell)
    }

    /// Cell containing the world point `p`, if it lies on the map.
    pub fn cell_of(&self, p: RelVec) -> Option<(usize, usize)> {
        let fx = ((p.x - self.x_min) / self.cell).floor();
        let fy = ((p.y - self.y_min) / self.cell).floor();
        (fx >= 0.0 && fy >= 0.0 && (fx as usize) < self.nx && (fy as usize) < self.ny).then_some((fx as usize, fy as usize))
    }

    pub fn is_visited(&self, ix: usize, iy: usize) -> bool {
        self.visited[iy * self.nx + ix]
    }

    pub fn set_visited(&mut self, ix: usize, iy: usize) {
        let k = iy * self.nx + ix;
        if !self.visited[k] {
            self.visited[k] = true;
            self.count += 1;
        }
    }

    pub fn visited_fraction(&self) -> f64 {
        self.count as f64 / self.visited.len() as f64
    }

    pub fn all_visited(&self) -> bool {
        self.count == self.visited.len()
    }

    pub fn reset(&mut self) {
        self.visited.iter_mut().for_each(|v| *v = false);
        self.count = 0;
    }

    /// Mark every cell whose centre lies in `fov` (a world-frame sector).
    pub fn mark_fov(&mut self, fov: &SectorFov) {
        let (lo_x, hi_x) = (fov.origin.x - fov.range, fov.origin.x + fov.range);
        let (lo_y, hi_y) = (fov.origin.y - fov.range, fov.origin.y + fov.range);
        let ix0 = (((lo_x - self.x_min) / self.cell).floor().max(0.0)) as usize;
        let iy0 = (((lo_y - self.y_min) / self.cell).floor().max(0.0)) as usize;
        let ix1 = (((hi_x - self.x_min) / self.cell).ceil().max(0.0) as usize).min(self.nx);
        let iy1 = (((hi_y - self.y_min) / self.cell).ceil().max(0.0) as usize).min(self.ny);
        for iy in iy0..iy1 {
            for ix in ix0..ix1 {
                if fov.contains(self.center(ix, iy)) {
                    self.set_visited(ix, iy);
                }
            }
        }
    }

    fn unvisited_within(&self, c: RelVec, radius: f64) -> usize {
        let span = (radius / self.cell).ceil() as i64;
        let cx = ((c.x - self.x_min) / self.cell).floor() as i64;
        let cy = ((c.y - self.y_min) / self.cell).floor() as i64;
        let mut n = 0;
        for iy in (cy - span).max(0)..=(cy + span).min(self.ny as i64 - 1) {
            for ix in (cx - span).max(0)..=(cx + span).min(self.nx as i64 - 1) {
                let (ux, uy) = (ix as usize, iy as usize);
                if !self.is_visited(ux, uy) && (self.center(ux, uy) - c).norm() <= radius {
                    n += 1;
                }
            }
        }
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntiFlockingConfig {
    /// Radius over which unvisited cells count towards a candidate's gain.
    pub gain_radius: f64,
    /// Gain lost per bl of travel.
    pub travel_weight: f64,
    /// Candidates closer than this to another agent's goal are skipped.
    pub separation: f64,
    pub cell: f64,
}

/// World-frame goal for one agent: the unvisited cell maximising
/// unexplored-area gain minus travel cost, away from other agents' goals.
/// Ties are drawn uniformly. `None` when every cell has been visited.
pub fn antiflocking_waypoint<R: Rng + ?Sized>(
    map: &VisitedMap,
    position: RelVec,
    other_goals: &[RelVec],
    cfg: &AntiFlockingConfig,
    rng: &mut R,
) -> Option<RelVec> {
    let mut scored: Vec<(f64, RelVec)> = Vec::new();
    let mut fallback: Vec<(f64, RelVec)> = Vec::new();
    for iy in 0..map.ny {
        for ix in 0..map.nx {
            if map.is_visited(ix, iy) {
                continue;
            }
            let c = map.center(ix, iy);
            let score = map.unvisited_within(c, cfg.gain_radius) as f64 - cfg.travel_weight * (c - position).norm();
            if other_goals.iter().any(|g| (*g - c).norm() < cfg.separation) {
                fallback.push((score, c));
            } else {
                scored.push((score, c));
            }
        }
    }
    let pool = if scored.is_empty() { fallback } else { scored };
    let best = pool.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<RelVec> = pool.iter().filter(|s| s.0 >= best - 1e-9).map(|s| s.1).collect();
    if ties.is_empty() {
        None
    } else {
        Some(ties[rng.random_range(0..ties.len())])
    }
}
