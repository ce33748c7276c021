//! Per-agent target memory and the distributed-greedy target negotiation.
//!
//! Each agent keeps its own list of target estimates plus the most recent
//! list received from every neighbour, stored in that neighbour's frame
//! together with a fused estimate of where the neighbour sits.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::TrackingError;
use crate::estimation::{fuse, fuse_all, propagate, CovMat, GaussianEstimate, RelVec};

pub type AgentId = u32;
/// Target identifiers are positive; 0 is reserved for "explore".
pub type TargetId = u32;

pub const EXPLORE: TargetId = 0;

/// Variance floor for relative-position measurements of neighbours, bl².
pub const RELATIVE_POSITION_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub target_id: TargetId,
    pub estimate: GaussianEstimate,
    pub last_update_step: u64,
}

impl TargetRecord {
    pub fn det(&self) -> f64 {
        self.estimate.cov.det()
    }
}

/// Records sorted by target id, at most one per id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalTargetList {
    records: Vec<TargetRecord>,
}

impl LocalTargetList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(mut records: Vec<TargetRecord>) -> Self {
        records.sort_by_key(|r| r.target_id);
        records.dedup_by_key(|r| r.target_id);
        Self { records }
    }

    pub fn records(&self) -> &[TargetRecord] {
        &self.records
    }

    pub fn get(&self, id: TargetId) -> Option<&TargetRecord> {
        self.records.binary_search_by_key(&id, |r| r.target_id).ok().map(|i| &self.records[i])
    }

    pub fn upsert(&mut self, record: TargetRecord) {
        match self.records.binary_search_by_key(&record.target_id, |r| r.target_id) {
            Ok(i) => self.records[i] = record,
            Err(i) => self.records.insert(i, record),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn retain(&mut self, f: impl FnMut(&TargetRecord) -> bool) {
        self.records.retain(f);
    }
}

/// A neighbour's last broadcast target list (neighbour frame) and the
/// fused estimate of the neighbour's relative position.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTargetList {
    pub neighbor_id: AgentId,
    pub targets: LocalTargetList,
    pub position: GaussianEstimate,
    pub last_rx_step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Upper bound on per-step target process noise (Q̄_k).
    pub process_noise_bound: CovMat,
    /// Records whose covariance determinant exceeds this are dropped.
    pub deletion_threshold: f64,
    /// Neighbour range-sensing gain: R_p = k_p * distance * I.
    pub neighbor_sensing_gain: f64,
    /// Per-step growth of a neighbour's relative-position covariance to
    /// account for the neighbour's own motion. Zero reproduces the bare
    /// displacement-only propagation.
    #[serde(default)]
    pub neighbor_motion_bound: CovMat,
}

impl TrackerConfig {
    pub fn neighbor_sensing_cov(&self, measured: RelVec) -> CovMat {
        CovMat::isotropic((self.neighbor_sensing_gain * measured.norm()).max(RELATIVE_POSITION_FLOOR))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub target_id: TargetId,
    pub estimate: GaussianEstimate,
}

/// Target list received this step together with the receiver-side
/// measurement of the sender's relative position.
#[derive(Debug, Clone, Copy)]
pub struct ReceivedTargets<'a> {
    pub sender: AgentId,
    pub targets: &'a LocalTargetList,
    pub sensed_position: RelVec,
}

/// Everything one agent knows about targets and neighbour positions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    pub owner: AgentId,
    pub local: LocalTargetList,
    pub neighbors: BTreeMap<AgentId, NeighborTargetList>,
}

impl TrackerState {
    pub fn new(owner: AgentId) -> Self {
        Self { owner, local: LocalTargetList::new(), neighbors: BTreeMap::new() }
    }

    pub fn neighbor_position(&self, id: AgentId) -> Option<&GaussianEstimate> {
        self.neighbors.get(&id).map(|n| &n.position)
    }

    pub fn record_count(&self) -> usize {
        self.local.len() + self.neighbors.values().map(|n| n.targets.len()).sum::<usize>()
    }

    /// All target ids held in any list, ascending.
    pub fn known_targets(&self) -> BTreeSet<TargetId> {
        self.local
            .records()
            .iter()
            .chain(self.neighbors.values().flat_map(|n| n.targets.records()))
            .map(|r| r.target_id)
            .collect()
    }

    /// One storage step: propagate, fuse detections, absorb received lists
    /// and prune records that have become too uncertain.
    #[allow(clippy::too_many_arguments)]
    pub fn update_storage(
        &mut self,
        step: u64,
        detections: &[Detection],
        received: &[ReceivedTargets<'_>],
        shift: RelVec,
        shift_cov: CovMat,
        cfg: &TrackerConfig,
    ) -> Result<(), TrackingError> {
        let q_bar = cfg.process_noise_bound;

        let mut local = Vec::with_capacity(self.local.len() + detections.len());
        for rec in self.local.records() {
            let prior = propagate(&rec.estimate, shift, q_bar);
            let updated = match detections.iter().find(|d| d.target_id == rec.target_id) {
                Some(det) => TargetRecord {
                    target_id: rec.target_id,
                    estimate: fuse(&det.estimate, &prior)?,
                    last_update_step: step,
                },
                None => TargetRecord { estimate: prior, ..*rec },
            };
            local.push(updated);
        }
        for det in detections {
            if self.local.get(det.target_id).is_none() {
                local.push(TargetRecord { target_id: det.target_id, estimate: det.estimate, last_update_step: step });
            }
        }
        self.local = LocalTargetList::from_records(local);
        self.local.retain(|r| r.det() <= cfg.deletion_threshold);

        let position_growth = shift_cov + cfg.neighbor_motion_bound;
        let mut heard = BTreeSet::new();
        for rx in received.iter().filter(|rx| rx.sender != self.owner) {
            heard.insert(rx.sender);
            let sensed = GaussianEstimate::new(rx.sensed_position, cfg.neighbor_sensing_cov(rx.sensed_position));
            let position = match self.neighbors.get(&rx.sender) {
                Some(prev) => fuse(&propagate(&prev.position, shift, position_growth), &sensed)?,
                None => sensed,
            };
            self.neighbors.insert(
                rx.sender,
                NeighborTargetList { neighbor_id: rx.sender, targets: rx.targets.clone(), position, last_rx_step: step },
            );
        }
        for (id, n) in self.neighbors.iter_mut() {
            if heard.contains(id) {
                continue;
            }
            n.position = propagate(&n.position, shift, position_growth);
            for rec in n.targets.records.iter_mut() {
                rec.estimate.cov += q_bar;
            }
        }
        for n in self.neighbors.values_mut() {
            n.targets.retain(|r| r.det() <= cfg.deletion_threshold);
        }
        Ok(())
    }
}

/// Re-express a neighbour-frame estimate in the local frame. Target and
/// neighbour errors are independent, so covariances add.
pub fn transform_neighbor_estimate(rec: &GaussianEstimate, neighbor: &GaussianEstimate) -> GaussianEstimate {
    GaussianEstimate::new(rec.mean + neighbor.mean, rec.cov + neighbor.cov)
}

/// First-round assignment: agents in ascending id each claim at most one
/// target, namely the first of their own targets (ascending uncertainty) on
/// which they hold the lowest determinant of every list known to `view`.
pub fn phase_one_assignment(view: &TrackerState) -> BTreeMap<TargetId, AgentId> {
    let mut lists: Vec<(AgentId, &LocalTargetList)> =
        view.neighbors.values().map(|n| (n.neighbor_id, &n.targets)).collect();
    lists.push((view.owner, &view.local));
    lists.sort_by_key(|(id, _)| *id);

    // lowest (det, agent id) holder for every target
    let mut best: BTreeMap<TargetId, (f64, AgentId)> = BTreeMap::new();
    for (agent, list) in &lists {
        for rec in list.records() {
            let cand = (rec.det(), *agent);
            best.entry(rec.target_id)
                .and_modify(|cur| {
                    if cand.0 < cur.0 || (cand.0 == cur.0 && cand.1 < cur.1) {
                        *cur = cand;
                    }
                })
                .or_insert(cand);
        }
    }

    let mut assigned: BTreeMap<TargetId, AgentId> = BTreeMap::new();
    for (agent, list) in &lists {
        let mut sorted: Vec<&TargetRecord> = list.records().iter().collect();
        sorted.sort_by(|a, b| a.det().total_cmp(&b.det()).then(a.target_id.cmp(&b.target_id)));
        for rec in sorted {
            if assigned.contains_key(&rec.target_id) {
                continue;
            }
            if best[&rec.target_id].1 == *agent {
                assigned.insert(rec.target_id, *agent);
                break;
            }
        }
    }
    assigned
}

/// Distributed-greedy selection; returns [`EXPLORE`] when nothing is left.
pub fn select_target(view: &TrackerState) -> TargetId {
    let known = view.known_targets();
    if known.is_empty() {
        return EXPLORE;
    }
    let assigned = phase_one_assignment(view);
    if let Some((&target, _)) = assigned.iter().find(|(_, &agent)| agent == view.owner) {
        return target;
    }
    let mut choice: Option<(f64, TargetId)> = None;
    for target in known.into_iter().filter(|t| !assigned.contains_key(t)) {
        let h = source_entropies(view, target).fold(f64::INFINITY, f64::min);
        if choice.is_none_or(|(best, _)| h < best) {
            choice = Some((h, target));
        }
    }
    choice.map_or(EXPLORE, |(_, t)| t)
}

/// Determinants of every local-frame estimate of `target`: the local record
/// as stored, neighbour records after the frame transform.
fn source_entropies(view: &TrackerState, target: TargetId) -> impl Iterator<Item = f64> + '_ {
    view.local.get(target).map(|r| r.det()).into_iter().chain(view.neighbors.values().filter_map(move |n| {
        n.targets.get(target).map(|r| transform_neighbor_estimate(&r.estimate, &n.position).cov.det())
    }))
}

/// Fused local-frame estimate of `target` from every list that holds it.
pub fn combined_estimate(view: &TrackerState, target: TargetId) -> Result<GaussianEstimate, TrackingError> {
    let sources: Vec<GaussianEstimate> = view
        .local
        .get(target)
        .map(|r| r.estimate)
        .into_iter()
        .chain(view.neighbors.values().filter_map(|n| {
            n.targets.get(target).map(|r| transform_neighbor_estimate(&r.estimate, &n.position))
        }))
        .collect();
    match sources.as_slice() {
        [] => Err(TrackingError::UnknownTarget(target)),
        [only] => Ok(*only),
        many => Ok(fuse_all(many)?),
    }
}

/// Waypoint that brings the target to `viewpoint` relative to the agent.
pub fn exploitation_waypoint(est: &GaussianEstimate, viewpoint: RelVec) -> RelVec {
    est.mean - viewpoint
}
