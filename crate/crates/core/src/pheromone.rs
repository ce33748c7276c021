//! Virtual pheromones: decaying deposits at previously visited relative
//! positions, their rasterised footprint, the max-flattened map and the
//! exploration waypoint drawn from its minima.

use std::cell::OnceCell;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::PheromoneError;
use crate::estimation::{CovMat, RelVec, EPSILON_INV};
use crate::tracking::AgentId;

/// Cells within this of the minimum count as minimisers.
pub const ARGMIN_TOLERANCE: f64 = 1e-9;
/// Gaussian kernels are cut at this Mahalanobis radius.
pub const KERNEL_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pheromone {
    pub position: RelVec,
    pub cov: CovMat,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PheromoneConfig {
    pub initial_weight: f64,
    /// Fraction of weight lost per step.
    pub decay: f64,
    /// Deposits at or below this weight are deleted.
    pub floor: f64,
    /// Radius of the disk a deposit marks as visited, bl.
    pub footprint_radius: f64,
    pub cell_size: f64,
}

impl PheromoneConfig {
    /// Number of steps a fresh deposit survives before hitting the floor.
    pub fn lifetime_steps(&self) -> usize {
        let mut w = self.initial_weight;
        let mut n = 0;
        while w > self.floor {
            w *= 1.0 - self.decay;
            n += 1;
        }
        n
    }

    /// Upper bound on the length of a single list.
    pub fn max_list_len(&self) -> usize {
        ((self.floor / self.initial_weight).ln() / (1.0 - self.decay).ln()).ceil() as usize + 1
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PheromoneList {
    pub owner: AgentId,
    pub pheromones: Vec<Pheromone>,
}

impl PheromoneList {
    pub fn new(owner: AgentId) -> Self {
        Self { owner, pheromones: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.pheromones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pheromones.is_empty()
    }

    fn decay(&mut self, cfg: &PheromoneConfig) {
        for p in self.pheromones.iter_mut() {
            p.weight *= 1.0 - cfg.decay;
        }
        self.pheromones.retain(|p| p.weight > cfg.floor);
    }
}

/// Own deposits (local frame) and neighbours' lists (each in its sender's
/// frame, placed through the tracker's neighbour position at map time).
#[derive(Debug, Clone, PartialEq)]
pub struct PheromoneState {
    pub own: PheromoneList,
    pub neighbors: BTreeMap<AgentId, PheromoneList>,
}

impl PheromoneState {
    pub fn new(owner: AgentId) -> Self {
        Self { own: PheromoneList::new(owner), neighbors: BTreeMap::new() }
    }

    pub fn update_pheromones(
        &mut self,
        received: &[&PheromoneList],
        shift: RelVec,
        shift_cov: CovMat,
        cfg: &PheromoneConfig,
    ) {
        for p in self.own.pheromones.iter_mut() {
            p.position += shift;
            p.cov += shift_cov;
        }
        self.own.decay(cfg);
        self.own.pheromones.push(Pheromone { position: shift, cov: shift_cov, weight: cfg.initial_weight });

        let mut heard = BTreeSet::new();
        for list in received.iter().filter(|l| l.owner != self.own.owner) {
            heard.insert(list.owner);
            self.neighbors.insert(list.owner, (*list).clone());
        }
        for (id, list) in self.neighbors.iter_mut() {
            if !heard.contains(id) {
                list.decay(cfg);
            }
        }
    }

    /// Every pheromone in the local frame. Neighbour deposits are offset by
    /// the supplied neighbour position; lists without one are skipped.
    pub fn combined(&self, neighbor_position: impl Fn(AgentId) -> Option<RelVec>) -> Vec<Pheromone> {
        let mut out = self.own.pheromones.clone();
        for (id, list) in &self.neighbors {
            if let Some(offset) = neighbor_position(*id) {
                out.extend(list.pheromones.iter().map(|p| Pheromone { position: p.position + offset, ..*p }));
            }
        }
        out
    }
}

#[inline]
fn lattice_index(coord: f64, cell: f64) -> i32 {
    (coord / cell).round() as i32
}

#[inline]
fn lattice_coord(index: i32, cell: f64) -> f64 {
    index as f64 * cell
}

/// A rasterised pheromone footprint on the lattice `i * cell`.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub cell: f64,
    pub i0: i32,
    pub j0: i32,
    pub width: usize,
    pub height: usize,
    /// Row-major (j outer), width * height values.
    pub values: Vec<f64>,
}

impl Region {
    pub fn get(&self, i: i32, j: i32) -> f64 {
        let (di, dj) = (i - self.i0, j - self.j0);
        if di < 0 || dj < 0 || di as usize >= self.width || dj as usize >= self.height {
            return 0.0;
        }
        self.values[dj as usize * self.width + di as usize]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Kernels narrower than this fraction of a cell act as a delta.
fn is_delta_kernel(cov: &CovMat, cell: f64) -> bool {
    let (_, hi) = cov.eigenvalues();
    KERNEL_SIGMAS * hi.max(0.0).sqrt() < 0.5 * cell
}

fn disk_bounds(center: RelVec, radius: f64, cell: f64) -> (i32, i32, i32, i32) {
    (
        ((center.x - radius) / cell).floor() as i32,
        ((center.x + radius) / cell).ceil() as i32,
        ((center.y - radius) / cell).floor() as i32,
        ((center.y + radius) / cell).ceil() as i32,
    )
}

#[inline]
fn in_disk(i: i32, j: i32, center: RelVec, radius_sq: f64, cell: f64) -> bool {
    let dx = lattice_coord(i, cell) - center.x;
    let dy = lattice_coord(j, cell) - center.y;
    dx * dx + dy * dy <= radius_sq
}

/// Disk of `radius` around the deposit, smoothed by a Gaussian with the
/// deposit's covariance (cut at three sigma) and scaled so the peak equals
/// the deposit weight.
pub fn diffuse_region(p: &Pheromone, radius: f64, cell: f64) -> Region {
    assert!(radius > 0.0 && cell > 0.0);
    let (imin, imax, jmin, jmax) = disk_bounds(p.position, radius, cell);
    let r2 = radius * radius;

    if is_delta_kernel(&p.cov, cell) {
        let width = (imax - imin + 1) as usize;
        let height = (jmax - jmin + 1) as usize;
        let mut values = vec![0.0; width * height];
        for j in jmin..=jmax {
            for i in imin..=imax {
                if in_disk(i, j, p.position, r2, cell) {
                    values[(j - jmin) as usize * width + (i - imin) as usize] = p.weight;
                }
            }
        }
        return Region { cell, i0: imin, j0: jmin, width, height, values };
    }

    let kernel = gaussian_kernel(&p.cov, cell);
    let (rx, ry) = kernel.reach;
    let (i0, j0) = (imin - rx, jmin - ry);
    let width = (imax - imin + 1 + 2 * rx) as usize;
    let height = (jmax - jmin + 1 + 2 * ry) as usize;

    // each disk row is an interval, so a kernel row contributes one
    // prefix-sum difference per output cell
    let kw = (2 * rx + 1) as usize;
    let mut prefix = vec![0.0; (2 * ry + 1) as usize * (kw + 1)];
    for &(di, dj, k) in &kernel.taps {
        prefix[(dj + ry) as usize * (kw + 1) + (di + rx) as usize + 1] += k;
    }
    for row in prefix.chunks_mut(kw + 1) {
        for m in 1..=kw {
            row[m] += row[m - 1];
        }
    }
    let spans: Vec<Option<(i32, i32)>> = (jmin..=jmax)
        .map(|j| {
            let mut inside = (imin..=imax).filter(|&i| in_disk(i, j, p.position, r2, cell));
            inside.next().map(|a| (a, inside.next_back().unwrap_or(a)))
        })
        .collect();

    let mut sums = vec![0.0; width * height];
    for y in j0..j0 + height as i32 {
        let out = &mut sums[(y - j0) as usize * width..(y - j0 + 1) as usize * width];
        for dj in -ry..=ry {
            let j = y - dj;
            let Some(&Some((a, b))) = (j >= jmin && j <= jmax).then(|| &spans[(j - jmin) as usize]) else {
                continue;
            };
            let row = &prefix[(dj + ry) as usize * (kw + 1)..(dj + ry + 1) as usize * (kw + 1)];
            for (x, v) in (i0..).zip(out.iter_mut()) {
                let lo = (x - b).max(-rx);
                let hi = (x - a).min(rx);
                if lo <= hi {
                    *v += row[(hi + rx + 1) as usize] - row[(lo + rx) as usize];
                }
            }
        }
    }
    let peak = sums.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        let scale = p.weight / peak;
        for v in sums.iter_mut() {
            *v *= scale;
        }
    }
    Region { cell, i0, j0, width, height, values: sums }
}

struct Kernel {
    reach: (i32, i32),
    taps: Vec<(i32, i32, f64)>,
}

fn gaussian_kernel(cov: &CovMat, cell: f64) -> Kernel {
    let mut c = *cov;
    let (lo, _) = c.eigenvalues();
    if lo <= EPSILON_INV {
        // rank-deficient blur: keep it a line-shaped kernel
        c += CovMat::isotropic(10.0 * EPSILON_INV - lo.min(0.0));
    }
    let inv = c.inverse().expect("regularised covariance is invertible");
    let reach = (
        (KERNEL_SIGMAS * c.xx.sqrt() / cell).ceil() as i32,
        (KERNEL_SIGMAS * c.yy.sqrt() / cell).ceil() as i32,
    );
    let limit = KERNEL_SIGMAS * KERNEL_SIGMAS;
    let mut taps = Vec::new();
    for dj in -reach.1..=reach.1 {
        for di in -reach.0..=reach.0 {
            let o = RelVec::new(lattice_coord(di, cell), lattice_coord(dj, cell));
            let m = o.dot(inv.mul_vec(o));
            if m <= limit {
                taps.push((di, dj, (-0.5 * m).exp()));
            }
        }
    }
    Kernel { reach, taps }
}

/// Square raster centred on the agent, covering the ball of `radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct PheromoneGrid {
    pub cell: f64,
    pub radius: f64,
    /// Index range is `-half..=half` on both axes.
    pub half: i32,
    values: Vec<f64>,
}

impl PheromoneGrid {
    pub fn new(radius: f64, cell: f64) -> Self {
        let half = (radius / cell).ceil() as i32;
        let side = (2 * half + 1) as usize;
        Self { cell, radius, half, values: vec![0.0; side * side] }
    }

    pub fn side(&self) -> usize {
        (2 * self.half + 1) as usize
    }

    fn offset(&self, i: i32, j: i32) -> Option<usize> {
        if i.abs() > self.half || j.abs() > self.half {
            return None;
        }
        Some((j + self.half) as usize * self.side() + (i + self.half) as usize)
    }

    pub fn get(&self, i: i32, j: i32) -> Option<f64> {
        self.offset(i, j).map(|o| self.values[o])
    }

    pub fn set(&mut self, i: i32, j: i32, v: f64) {
        if let Some(o) = self.offset(i, j) {
            self.values[o] = v;
        }
    }

    pub fn center(&self, i: i32, j: i32) -> RelVec {
        RelVec::new(lattice_coord(i, self.cell), lattice_coord(j, self.cell))
    }

    pub fn in_ball(&self, i: i32, j: i32) -> bool {
        self.center(i, j).norm() <= self.radius
    }

    /// Iterate `(i, j, value)` over every cell.
    pub fn cells(&self) -> impl Iterator<Item = (i32, i32, f64)> + '_ {
        let side = self.side();
        self.values.iter().enumerate().map(move |(o, &v)| ((o % side) as i32 - self.half, (o / side) as i32 - self.half, v))
    }

    pub fn stamp(&mut self, region: &Region) -> Result<(), PheromoneError> {
        if (region.cell - self.cell).abs() > 1e-12 {
            return Err(PheromoneError::GeometryMismatch { expected: self.cell, found: region.cell });
        }
        let jlo = region.j0.max(-self.half);
        let jhi = (region.j0 + region.height as i32 - 1).min(self.half);
        let ilo = region.i0.max(-self.half);
        let ihi = (region.i0 + region.width as i32 - 1).min(self.half);
        for j in jlo..=jhi {
            for i in ilo..=ihi {
                let v = region.values[(j - region.j0) as usize * region.width + (i - region.i0) as usize];
                let o = self.offset(i, j).expect("clipped to raster");
                if v > self.values[o] {
                    self.values[o] = v;
                }
            }
        }
        Ok(())
    }

    /// Plain-text PGM (P2): weights x1000, truncated; top row is +y.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let scaled: Vec<u64> = self.values.iter().map(|v| (v * 1000.0) as u64).collect();
        let maxval = scaled.iter().copied().max().unwrap_or(0).clamp(1, 65535);
        let side = self.side();
        writeln!(out, "P2")?;
        writeln!(out, "{side} {side}")?;
        writeln!(out, "{maxval}")?;
        for row in (0..side).rev() {
            let line: Vec<String> = scaled[row * side..(row + 1) * side].iter().map(|v| v.min(&maxval).to_string()).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Cell-wise maximum over all regions.
pub fn build_map(regions: &[Region], radius: f64, cell: f64) -> Result<PheromoneGrid, PheromoneError> {
    let mut grid = PheromoneGrid::new(radius, cell);
    for r in regions {
        grid.stamp(r)?;
    }
    Ok(grid)
}

/// Read access to a pheromone map, either a materialised grid or a lazily
/// evaluated field.
pub trait MapView {
    fn cell(&self) -> f64;
    /// Value of the lattice cell containing `q`.
    fn value_at(&self, q: RelVec) -> f64;
    /// Minimum over the admissible cells whose centres lie in the ball of
    /// `radius`, with every such cell within [`ARGMIN_TOLERANCE`] of it. If
    /// no cell is admissible the predicate is ignored.
    fn ball_minimizers(&self, radius: f64, admissible: &dyn Fn(RelVec) -> bool) -> (f64, Vec<RelVec>);
}

impl MapView for PheromoneGrid {
    fn cell(&self) -> f64 {
        self.cell
    }

    fn value_at(&self, q: RelVec) -> f64 {
        self.get(lattice_index(q.x, self.cell), lattice_index(q.y, self.cell)).unwrap_or(0.0)
    }

    fn ball_minimizers(&self, radius: f64, admissible: &dyn Fn(RelVec) -> bool) -> (f64, Vec<RelVec>) {
        let r = radius.min(self.radius);
        let ball: Vec<(RelVec, f64)> =
            self.cells().map(|(i, j, v)| (self.center(i, j), v)).filter(|(c, _)| c.norm() <= r).collect();
        let mut candidates: Vec<(RelVec, f64)> = ball.iter().copied().filter(|(c, _)| admissible(*c)).collect();
        if candidates.is_empty() {
            candidates = ball;
        }
        let min = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let cells = candidates.into_iter().filter(|c| c.1 <= min + ARGMIN_TOLERANCE).map(|c| c.0).collect();
        (min, cells)
    }
}

/// Pheromone map evaluated on demand. Point queries on undiffused
/// deposits cost one distance check each; the full raster is built when a
/// minimiser search needs it or any deposit is blurred.
pub struct PheromoneField {
    pheromones: Vec<Pheromone>,
    footprint: f64,
    radius: f64,
    cell: f64,
    grid: OnceCell<PheromoneGrid>,
}

impl PheromoneField {
    pub fn new(pheromones: Vec<Pheromone>, footprint: f64, radius: f64, cell: f64) -> Self {
        Self { pheromones, footprint, radius, cell, grid: OnceCell::new() }
    }

    pub fn grid(&self) -> &PheromoneGrid {
        self.grid.get_or_init(|| {
            let regions: Vec<Region> =
                self.pheromones.iter().map(|p| diffuse_region(p, self.footprint, self.cell)).collect();
            build_map(&regions, self.radius, self.cell).expect("regions share the field lattice")
        })
    }

    pub fn pheromones(&self) -> &[Pheromone] {
        &self.pheromones
    }
}

impl MapView for PheromoneField {
    fn cell(&self) -> f64 {
        self.cell
    }

    fn value_at(&self, q: RelVec) -> f64 {
        let (i, j) = (lattice_index(q.x, self.cell), lattice_index(q.y, self.cell));
        if let Some(grid) = self.grid.get() {
            if let Some(v) = grid.get(i, j) {
                return v;
            }
        }
        if self.pheromones.iter().any(|p| !is_delta_kernel(&p.cov, self.cell)) {
            if let Some(v) = self.grid().get(i, j) {
                return v;
            }
        }
        let r2 = self.footprint * self.footprint;
        let mut best = 0.0f64;
        for p in &self.pheromones {
            let v = if is_delta_kernel(&p.cov, self.cell) {
                if in_disk(i, j, p.position, r2, self.cell) {
                    p.weight
                } else {
                    0.0
                }
            } else {
                diffuse_region(p, self.footprint, self.cell).get(i, j)
            };
            best = best.max(v);
        }
        best
    }

    fn ball_minimizers(&self, radius: f64, admissible: &dyn Fn(RelVec) -> bool) -> (f64, Vec<RelVec>) {
        self.grid().ball_minimizers(radius, admissible)
    }
}

/// Exploration waypoint carried between steps with the map weight it had.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarriedWaypoint {
    pub waypoint: RelVec,
    pub weight: f64,
}

/// Shift the carried waypoint into the current frame and keep it unless
/// the map got heavier there or the agent has arrived; otherwise draw a
/// fresh waypoint uniformly among the least-weighted cells of the ball.
/// A waypoint that has drifted out of the ball or out of the admissible
/// region is also redrawn. Returns whether a fresh draw happened.
#[allow(clippy::too_many_arguments)]
pub fn exploration_waypoint<M: MapView, R: Rng + ?Sized>(
    map: &M,
    carried: Option<CarriedWaypoint>,
    shift: RelVec,
    ball_radius: f64,
    reach_radius: f64,
    admissible: &dyn Fn(RelVec) -> bool,
    rng: &mut R,
) -> (CarriedWaypoint, bool) {
    if let Some(c) = carried {
        let q = c.waypoint + shift;
        let dist = q.norm();
        if dist >= reach_radius && dist <= ball_radius && admissible(q) {
            let v = map.value_at(q);
            if v <= c.weight {
                return (CarriedWaypoint { waypoint: q, weight: v }, false);
            }
        }
    }
    let (min, cells) = map.ball_minimizers(ball_radius, admissible);
    let waypoint = if cells.is_empty() { RelVec::ZERO } else { cells[rng.random_range(0..cells.len())] };
    (CarriedWaypoint { waypoint, weight: if min.is_finite() { min } else { 0.0 } }, true)
}
