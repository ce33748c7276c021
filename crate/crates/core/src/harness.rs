//! Monte-Carlo runner: one closed-loop simulation per seed, the auction and
//! anti-flocking oracles, metrics and CSV output.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::agent::{AgentBrain, AssignmentMode, BroadcastPacket, Directive, Mode, SearchStrategy, StepInputs, Workspace};
use crate::baselines::{antiflocking_waypoint, auction_assign_partial, VisitedMap};
use crate::config::{Domain, WorldConfig};
use crate::error::{ConfigError, SimError};
use crate::estimation::RelVec;
use crate::tracking::{combined_estimate, AgentId, TargetId, EXPLORE};
use crate::world::{stream_rng, Stream, TrueTarget, WorldState};

/// Steps between pheromone map dumps.
pub const MAP_DUMP_PERIOD: u64 = 250;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SearchAlgo {
    Pheromone,
    Levy,
    Antiflocking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssignAlgo {
    GreedyDistributed,
    Auction,
    LocalGreedy,
}

impl SearchAlgo {
    pub const ALL: [SearchAlgo; 3] = [SearchAlgo::Pheromone, SearchAlgo::Levy, SearchAlgo::Antiflocking];

    pub fn as_str(self) -> &'static str {
        match self {
            SearchAlgo::Pheromone => "pheromone",
            SearchAlgo::Levy => "levy",
            SearchAlgo::Antiflocking => "antiflocking",
        }
    }

    fn strategy(self) -> SearchStrategy {
        match self {
            SearchAlgo::Pheromone => SearchStrategy::Pheromone,
            SearchAlgo::Levy => SearchStrategy::Levy,
            SearchAlgo::Antiflocking => SearchStrategy::External,
        }
    }
}

impl AssignAlgo {
    pub const ALL: [AssignAlgo; 3] = [AssignAlgo::GreedyDistributed, AssignAlgo::Auction, AssignAlgo::LocalGreedy];

    pub fn as_str(self) -> &'static str {
        match self {
            AssignAlgo::GreedyDistributed => "greedy-distributed",
            AssignAlgo::Auction => "auction",
            AssignAlgo::LocalGreedy => "local-greedy",
        }
    }

    fn mode(self) -> AssignmentMode {
        match self {
            AssignAlgo::GreedyDistributed => AssignmentMode::DistributedGreedy,
            AssignAlgo::Auction => AssignmentMode::External,
            AssignAlgo::LocalGreedy => AssignmentMode::LocalGreedy,
        }
    }
}

macro_rules! str_enum {
    ($t:ty, $what:literal) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                Self::ALL.into_iter().find(|v| v.as_str() == s).ok_or_else(|| {
                    let names: Vec<&str> = Self::ALL.iter().map(|v| v.as_str()).collect();
                    format!(concat!("unknown ", $what, " '{}', expected one of {}"), s, names.join(", "))
                })
            }
        }
    };
}

str_enum!(SearchAlgo, "search algorithm");
str_enum!(AssignAlgo, "assignment algorithm");

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub world: WorldConfig,
    pub search: SearchAlgo,
    pub assign: AssignAlgo,
    pub runs: usize,
    pub max_steps: u64,
    pub base_seed: u64,
    /// End a run at its time-to-track instead of using the whole budget.
    pub stop_when_tracked: bool,
    /// Keep pheromone map snapshots of the first run.
    pub dump_maps: bool,
}

impl ExperimentSpec {
    pub fn new(world: WorldConfig, search: SearchAlgo, assign: AssignAlgo) -> Self {
        Self { world, search, assign, runs: 60, max_steps: 4000, base_seed: 0, stop_when_tracked: false, dump_maps: false }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.runs == 0 {
            return Err(ConfigError::Invalid("runs must be at least 1".into()));
        }
        if self.max_steps == 0 {
            return Err(ConfigError::Invalid("max steps must be at least 1".into()));
        }
        self.world.validate()
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.runs as u64).map(move |k| self.base_seed.wrapping_add(k))
    }
}

/// What one agent is doing at a step, for the tracked predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub target: TargetId,
    /// Whether the selected target is inside the agent's true FOV.
    pub in_fov: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepTrace {
    pub t: u64,
    pub selections: Vec<Selection>,
}

/// Targets selected by some agent that also has them in view.
pub fn tracked_targets(selections: &[Selection]) -> BTreeSet<TargetId> {
    selections.iter().filter(|s| s.target != EXPLORE && s.in_fov).map(|s| s.target).collect()
}

/// First step at which all `n_targets` targets are tracked at once. `None`
/// (censored) if that never happens or there are no targets.
pub fn time_to_track(trace: &[StepTrace], n_targets: usize) -> Option<u64> {
    if n_targets == 0 {
        return None;
    }
    trace.iter().find(|s| tracked_targets(&s.selections).len() == n_targets).map(|s| s.t)
}

/// One agent's combined estimates, relative to its true position.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentEstimates {
    pub position: RelVec,
    pub estimates: Vec<(TargetId, RelVec)>,
}

/// Mean over agents of the summed best-agent estimation error per target.
/// A target nobody knows contributes `cap`.
pub fn objective_h(targets: &[TrueTarget], agents: &[AgentEstimates], cap: f64) -> f64 {
    assert!(!agents.is_empty(), "objective needs at least one agent");
    let mut best = vec![f64::INFINITY; targets.len()];
    let index = |id: TargetId| targets.iter().position(|t| t.target_id == id);
    for agent in agents {
        for &(id, mean) in &agent.estimates {
            if let Some(k) = index(id) {
                let err = (targets[k].position - agent.position - mean).norm();
                best[k] = best[k].min(err);
            }
        }
    }
    best.iter().map(|&b| if b.is_finite() { b } else { cap }).sum::<f64>() / agents.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub seed: u64,
    pub time_to_track: Option<u64>,
    pub first_detection: Vec<Option<u64>>,
    pub h_series: Vec<f64>,
    pub tracked_series: Vec<usize>,
    /// Times the anti-flocking map filled up and was cleared.
    pub visited_resets: usize,
}

impl RunMetrics {
    pub fn censored(&self) -> bool {
        self.time_to_track.is_none()
    }

    pub fn n_tracked_final(&self) -> usize {
        self.tracked_series.last().copied().unwrap_or(0)
    }
}

/// A plain-text map snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct MapDump {
    pub agent: AgentId,
    pub t: u64,
    pub pgm: Vec<u8>,
}

/// A closed-loop simulation for one seed.
pub struct Simulation {
    pub world: WorldState,
    pub brains: Vec<AgentBrain>,
    assign: AssignAlgo,
    previous: Vec<crate::world::Pose>,
    packets: Vec<Arc<BroadcastPacket>>,
    visited: Option<VisitedMap>,
    goals: Vec<Option<RelVec>>,
    rng: ChaCha8Rng,
    pub visited_resets: usize,
}

/// Everything observed at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub trace: StepTrace,
    pub h: f64,
    pub detected: Vec<TargetId>,
}

impl Simulation {
    pub fn new(world_cfg: &WorldConfig, search: SearchAlgo, assign: AssignAlgo, seed: u64) -> Result<Self, SimError> {
        let mut cfg = world_cfg.clone();
        cfg.seed = seed;
        let agent_cfg = Arc::new(cfg.agent_config(search.strategy(), assign.mode())?);
        let world = WorldState::new(Arc::new(cfg))?;
        Ok(Self::from_world(world, agent_cfg, search, assign))
    }

    /// Simulation over an explicit world (custom initial layout).
    pub fn from_world(
        world: WorldState,
        agent_cfg: Arc<crate::agent::AgentConfig>,
        search: SearchAlgo,
        assign: AssignAlgo,
    ) -> Self {
        let cfg = world.config();
        let seed = cfg.seed;
        let n = world.agents.len();
        let brains =
            (0..n).map(|i| AgentBrain::new(i as AgentId, Arc::clone(&agent_cfg), stream_rng(seed, Stream::Brain, i as u64))).collect();
        let visited = (search == SearchAlgo::Antiflocking).then(|| {
            let d: Domain = cfg.domain;
            VisitedMap::new(d.x_min, d.y_min, d.width, d.height, cfg.antiflocking.cell)
        });
        Self {
            previous: world.agents.clone(),
            brains,
            assign,
            packets: Vec::new(),
            visited,
            goals: vec![None; n],
            rng: stream_rng(seed, Stream::Harness, 0),
            visited_resets: 0,
            world,
        }
    }

    pub fn visited_fraction(&self) -> Option<f64> {
        self.visited.as_ref().map(|v| v.visited_fraction())
    }

    /// Sense, exchange, decide, then advance the world by one step.
    pub fn step(&mut self) -> Result<StepReport, SimError> {
        let t = self.world.t;
        let n = self.brains.len();
        let deliveries = self.world.deliver_broadcasts(&self.packets);
        let mut packets = Vec::with_capacity(n);
        let mut detected = BTreeSet::new();
        for i in 0..n {
            let detections = self.world.sense_targets(i);
            detected.extend(detections.iter().map(|d| d.target_id));
            let (displacement, shift_cov) = self.world.sense_displacement(i, &self.previous[i]);
            let inputs = StepInputs { step: t, detections: &detections, received: &deliveries[i], shift: -displacement, shift_cov };
            packets.push(Arc::new(self.brains[i].ingest(&inputs)?));
        }

        let mut directives = vec![Directive::default(); n];
        if self.assign == AssignAlgo::Auction {
            self.auction_directives(&mut directives)?;
        }
        if self.visited.is_some() {
            self.antiflocking_directives(&mut directives);
        }

        let mut controls = Vec::with_capacity(n);
        let mut selections = Vec::with_capacity(n);
        for (i, directive) in directives.iter().enumerate() {
            let heading = self.world.agents[i].heading;
            let workspace = self.world.workspace(i);
            let (u, _) = self.brains[i].decide(heading, directive, &workspace as &dyn Workspace)?;
            controls.push(u);
            let target = self.brains[i].selected();
            let in_fov = self.world.targets.iter().any(|k| k.target_id == target && self.world.agent_fov(i).contains(k.position));
            selections.push(Selection { target, in_fov });
        }
        let h = self.objective();

        self.previous = self.world.agents.clone();
        self.packets = packets;
        self.world.step_dynamics(&controls);
        Ok(StepReport { trace: StepTrace { t, selections }, h, detected: detected.into_iter().collect() })
    }

    fn objective(&self) -> f64 {
        let agents: Vec<AgentEstimates> = self
            .brains
            .iter()
            .zip(&self.world.agents)
            .map(|(b, pose)| AgentEstimates {
                position: pose.position,
                estimates: b
                    .tracker
                    .known_targets()
                    .into_iter()
                    .filter_map(|k| combined_estimate(&b.tracker, k).ok().map(|e| (k, e.mean)))
                    .collect(),
            })
            .collect();
        objective_h(&self.world.targets, &agents, self.world.config().domain.diagonal())
    }

    /// Centralised assignment over every agent's combined-estimate entropy.
    fn auction_directives(&self, directives: &mut [Directive]) -> Result<(), SimError> {
        let known: Vec<TargetId> =
            self.brains.iter().flat_map(|b| b.tracker.known_targets()).collect::<BTreeSet<_>>().into_iter().collect();
        if known.is_empty() {
            return Ok(());
        }
        let costs: Vec<Vec<f64>> = self
            .brains
            .iter()
            .map(|b| {
                known
                    .iter()
                    .map(|&k| combined_estimate(&b.tracker, k).map(|e| e.cov.det()).unwrap_or(f64::INFINITY))
                    .collect()
            })
            .collect();
        let picks = auction_assign_partial(&costs, &self.world.config().auction)?;
        for (d, pick) in directives.iter_mut().zip(picks) {
            d.target = pick.map(|j| known[j]);
        }
        Ok(())
    }

    /// Goals from the shared visited map, held until reached or seen.
    fn antiflocking_directives(&mut self, directives: &mut [Directive]) {
        let Some(map) = self.visited.as_mut() else { return };
        for i in 0..self.world.agents.len() {
            map.mark_fov(&self.world.agent_fov(i));
        }
        if map.all_visited() {
            map.reset();
            self.visited_resets += 1;
            self.goals.iter_mut().for_each(|g| *g = None);
        }
        let reach = self.world.config().reach_radius;
        let cfg = self.world.config().antiflocking;
        for i in 0..self.goals.len() {
            let position = self.world.agents[i].position;
            let stale = match self.goals[i] {
                None => true,
                Some(g) => (g - position).norm() <= reach || map.cell_of(g).is_none_or(|(ix, iy)| map.is_visited(ix, iy)),
            };
            if stale {
                let others: Vec<RelVec> = self
                    .goals
                    .iter()
                    .enumerate()
                    .filter(|&(j, g)| j != i && g.is_some() && self.brains[j].mode() == Mode::Explore)
                    .filter_map(|(_, g)| *g)
                    .collect();
                self.goals[i] = antiflocking_waypoint(map, position, &others, &cfg, &mut self.rng);
            }
            directives[i].search_waypoint = self.goals[i].map(|g| g - position);
        }
    }

    /// Pheromone maps of every agent as PGM text.
    pub fn dump_maps(&self) -> Vec<MapDump> {
        self.brains
            .iter()
            .map(|b| {
                let mut pgm = Vec::new();
                b.pheromone_field().grid().write_pgm(&mut pgm).expect("writing to memory");
                MapDump { agent: b.id, t: self.world.t, pgm }
            })
            .collect()
    }
}

/// Run one seed to completion.
pub fn run_single(spec: &ExperimentSpec, seed: u64, dumps: Option<&mut Vec<MapDump>>) -> Result<RunMetrics, SimError> {
    let mut sim = Simulation::new(&spec.world, spec.search, spec.assign, seed)?;
    let n_targets = sim.world.targets.len();
    let mut metrics = RunMetrics {
        seed,
        time_to_track: None,
        first_detection: vec![None; n_targets],
        h_series: Vec::new(),
        tracked_series: Vec::new(),
        visited_resets: 0,
    };
    let mut dumps = dumps;
    for _ in 0..spec.max_steps {
        if let Some(out) = dumps.as_deref_mut() {
            if spec.search == SearchAlgo::Pheromone && sim.world.t % MAP_DUMP_PERIOD == 0 {
                out.extend(sim.dump_maps());
            }
        }
        let report = sim.step()?;
        let t = report.trace.t;
        for id in report.detected {
            let slot = &mut metrics.first_detection[(id - 1) as usize];
            slot.get_or_insert(t);
        }
        let tracked = tracked_targets(&report.trace.selections).len();
        metrics.h_series.push(report.h);
        metrics.tracked_series.push(tracked);
        if metrics.time_to_track.is_none() && n_targets > 0 && tracked == n_targets {
            metrics.time_to_track = Some(t);
            if spec.stop_when_tracked {
                break;
            }
        }
    }
    metrics.visited_resets = sim.visited_resets;
    Ok(metrics)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub runs: usize,
    pub completed: usize,
    pub censored: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
}

impl Summary {
    /// Statistics over non-censored runs, in the order given.
    pub fn from_times(times: &[Option<u64>]) -> Self {
        let mut done: Vec<u64> = times.iter().flatten().copied().collect();
        let completed = done.len();
        let mean = (completed > 0).then(|| done.iter().map(|&t| t as f64).sum::<f64>() / completed as f64);
        done.sort_unstable();
        let median = (completed > 0).then(|| {
            if completed % 2 == 1 {
                done[completed / 2] as f64
            } else {
                (done[completed / 2 - 1] + done[completed / 2]) as f64 / 2.0
            }
        });
        Self { runs: times.len(), completed, censored: times.len() - completed, mean, median }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub runs: Vec<RunMetrics>,
    pub summary: Summary,
    pub maps: Vec<(u64, MapDump)>,
}

/// All seeds in parallel; results are in seed order.
pub fn run_monte_carlo(spec: &ExperimentSpec) -> Result<MonteCarloResult, SimError> {
    spec.validate()?;
    spec.world.agent_config(spec.search.strategy(), spec.assign.mode())?;
    let seeds: Vec<u64> = spec.seeds().collect();
    let outcomes: Vec<(RunMetrics, Vec<MapDump>)> = seeds
        .par_iter()
        .enumerate()
        .map(|(k, &seed)| {
            let mut dumps = Vec::new();
            let keep = spec.dump_maps && k == 0;
            run_single(spec, seed, keep.then_some(&mut dumps)).map(|m| (m, dumps))
        })
        .collect::<Result<_, _>>()?;
    let mut runs = Vec::with_capacity(outcomes.len());
    let mut maps = Vec::new();
    for (m, dumps) in outcomes {
        maps.extend(dumps.into_iter().map(|d| (m.seed, d)));
        runs.push(m);
    }
    let times: Vec<Option<u64>> = runs.iter().map(|r| r.time_to_track).collect();
    Ok(MonteCarloResult { summary: Summary::from_times(&times), runs, maps })
}

#[derive(Serialize)]
struct RunRow {
    seed: u64,
    time_to_track: Option<u64>,
    censored: bool,
    n_tracked_final: usize,
}

#[derive(Serialize)]
struct SeriesRow {
    seed: u64,
    t: usize,
    #[serde(rename = "H")]
    h: f64,
    n_tracked: usize,
}

#[derive(Serialize)]
struct DetectionRow {
    seed: u64,
    target_id: usize,
    first_detection: Option<u64>,
}

#[derive(Serialize)]
pub struct SummaryRow<'a> {
    pub label: &'a str,
    pub search: &'a str,
    pub assign: &'a str,
    pub n_agents: usize,
    pub n_targets: usize,
    pub runs: usize,
    pub completed: usize,
    pub censored: usize,
    pub mean_time_to_track: Option<f64>,
    pub median_time_to_track: Option<f64>,
}

impl<'a> SummaryRow<'a> {
    pub fn new(label: &'a str, spec: &ExperimentSpec, s: &Summary) -> Self {
        Self {
            label,
            search: spec.search.as_str(),
            assign: spec.assign.as_str(),
            n_agents: spec.world.n_agents,
            n_targets: spec.world.n_targets,
            runs: s.runs,
            completed: s.completed,
            censored: s.censored,
            mean_time_to_track: s.mean,
            median_time_to_track: s.median,
        }
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    time_unit: &'a str,
    search: &'a str,
    assign: &'a str,
    runs: usize,
    max_steps: u64,
    base_seed: u64,
    stop_when_tracked: bool,
    tracked_predicate: &'a str,
    version: &'a str,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// runs.csv, series.csv, first_detection.csv, summary.csv, metadata.toml,
/// config.toml and, when kept, maps/*.pgm.
pub fn write_outputs(dir: &Path, spec: &ExperimentSpec, result: &MonteCarloResult) -> Result<(), SimError> {
    fs::create_dir_all(dir)?;
    write_csv(
        &dir.join("runs.csv"),
        result.runs.iter().map(|r| RunRow {
            seed: r.seed,
            time_to_track: r.time_to_track,
            censored: r.censored(),
            n_tracked_final: r.n_tracked_final(),
        }),
    )?;
    write_csv(
        &dir.join("series.csv"),
        result.runs.iter().flat_map(|r| {
            r.h_series
                .iter()
                .zip(&r.tracked_series)
                .enumerate()
                .map(move |(t, (&h, &n))| SeriesRow { seed: r.seed, t, h, n_tracked: n })
        }),
    )?;
    write_csv(
        &dir.join("first_detection.csv"),
        result.runs.iter().flat_map(|r| {
            r.first_detection.iter().enumerate().map(move |(k, &f)| DetectionRow { seed: r.seed, target_id: k + 1, first_detection: f })
        }),
    )?;
    write_csv(&dir.join("summary.csv"), [SummaryRow::new("run", spec, &result.summary)])?;
    let meta = Metadata {
        time_unit: "steps",
        search: spec.search.as_str(),
        assign: spec.assign.as_str(),
        runs: spec.runs,
        max_steps: spec.max_steps,
        base_seed: spec.base_seed,
        stop_when_tracked: spec.stop_when_tracked,
        tracked_predicate: "every target selected by an agent that has it in its true field of view",
        version: env!("CARGO_PKG_VERSION"),
    };
    fs::write(dir.join("metadata.toml"), toml::to_string(&meta).expect("metadata serialises"))?;
    fs::write(dir.join("config.toml"), spec.world.to_toml())?;
    if !result.maps.is_empty() {
        let maps = dir.join("maps");
        fs::create_dir_all(&maps)?;
        for (seed, d) in &result.maps {
            fs::write(maps.join(format!("seed{seed}_agent{}_t{:05}.pgm", d.agent, d.t)), &d.pgm)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepGrid {
    AgentsTargets,
    EnvSize,
    Fov,
}

impl SweepGrid {
    pub const ALL: [SweepGrid; 3] = [SweepGrid::AgentsTargets, SweepGrid::EnvSize, SweepGrid::Fov];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepGrid::AgentsTargets => "agents-targets",
            SweepGrid::EnvSize => "env-size",
            SweepGrid::Fov => "fov",
        }
    }

    /// Labelled world variants derived from `base`.
    pub fn points(self, base: &WorldConfig) -> Vec<(String, WorldConfig)> {
        let with = |label: String, f: &dyn Fn(&mut WorldConfig)| {
            let mut w = base.clone();
            f(&mut w);
            (label, w)
        };
        match self {
            SweepGrid::AgentsTargets => [2, 4, 6, 8]
                .into_iter()
                .flat_map(|a| [2, 4, 6].into_iter().map(move |k| (a, k)))
                .map(|(a, k)| {
                    with(format!("agents={a},targets={k}"), &|w| {
                        w.n_agents = a;
                        w.n_targets = k;
                    })
                })
                .collect(),
            SweepGrid::EnvSize => [10.0, 30.0, 50.0]
                .into_iter()
                .map(|s| with(format!("size={s}"), &|w| w.domain = Domain::square(s)))
                .collect(),
            SweepGrid::Fov => [2.0, 3.0, 4.0, 5.0]
                .into_iter()
                .filter(|&r| r <= base.comm_radius)
                .map(|r| with(format!("fov_range={r}"), &|w| w.sensor.range = r))
                .collect(),
        }
    }
}

str_enum!(SweepGrid, "sweep grid");

/// One Monte-Carlo batch per grid point and search algorithm. Each batch
/// writes into its own sub-directory; sweep.csv collects the summaries.
pub fn run_sweep(
    base: &ExperimentSpec,
    grids: &[SweepGrid],
    searches: &[SearchAlgo],
    out: Option<&Path>,
) -> Result<Vec<(String, ExperimentSpec, Summary)>, SimError> {
    let mut batches = Vec::new();
    for grid in grids {
        for (label, world) in grid.points(&base.world) {
            for &search in searches {
                let spec = ExperimentSpec { world: world.clone(), search, ..base.clone() };
                spec.validate()?;
                batches.push((format!("{}:{label}", grid.as_str()), spec));
            }
        }
    }
    let mut rows = Vec::new();
    for (label, spec) in batches {
        let result = run_monte_carlo(&spec)?;
        if let Some(dir) = out {
            let sub: PathBuf = dir.join(format!("{}_{}", label.replace([':', ',', '='], "_"), spec.search));
            write_outputs(&sub, &spec, &result)?;
        }
        rows.push((label, spec, result.summary));
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_csv(&dir.join("sweep.csv"), rows.iter().map(|(l, s, sum)| SummaryRow::new(l, s, sum)))?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::CovMat;
    use rand::{Rng, SeedableRng};

    fn target(id: TargetId, x: f64, y: f64) -> TrueTarget {
        TrueTarget { target_id: id, position: RelVec::new(x, y), noise: CovMat::ZERO }
    }

    fn sel(target: TargetId, in_fov: bool) -> Selection {
        Selection { target, in_fov }
    }

    #[test]
    fn objective_examples() {
        let targets = [target(1, 5.0, 5.0)];
        let exact = AgentEstimates { position: RelVec::new(1.0, 1.0), estimates: vec![(1, RelVec::new(4.0, 4.0))] };
        assert_eq!(objective_h(&targets, std::slice::from_ref(&exact), 100.0), 0.0);

        let off = AgentEstimates { position: RelVec::new(1.0, 1.0), estimates: vec![(1, RelVec::new(5.0, 4.0))] };
        let blind = AgentEstimates { position: RelVec::ZERO, estimates: vec![] };
        assert_eq!(objective_h(&targets, &[off, blind.clone()], 100.0), 0.5);
        assert_eq!(objective_h(&targets, &[blind.clone(), blind.clone()], 42.0), 21.0);
        // the cap only stands in for unknown targets
        let far = AgentEstimates { position: RelVec::ZERO, estimates: vec![(1, RelVec::new(-95.0, 5.0))] };
        assert_eq!(objective_h(&targets, &[far, blind], 42.0), 50.0);
    }

    fn naive_h(targets: &[TrueTarget], agents: &[AgentEstimates], cap: f64) -> f64 {
        let mut sum = 0.0;
        for t in targets {
            let mut best = f64::INFINITY;
            for a in agents {
                for (id, m) in &a.estimates {
                    if *id == t.target_id {
                        let dx = t.position.x - a.position.x - m.x;
                        let dy = t.position.y - a.position.y - m.y;
                        best = best.min((dx * dx + dy * dy).sqrt());
                    }
                }
            }
            sum += if best.is_finite() { best } else { cap };
        }
        sum / agents.len() as f64
    }

    fn random_scene(rng: &mut impl Rng) -> (Vec<TrueTarget>, Vec<AgentEstimates>) {
        let nt = rng.random_range(0..6);
        let na = rng.random_range(1..8);
        let targets: Vec<TrueTarget> =
            (0..nt).map(|k| target(k + 1, rng.random_range(0.0..30.0), rng.random_range(0.0..30.0))).collect();
        let agents = (0..na)
            .map(|_| AgentEstimates {
                position: RelVec::new(rng.random_range(0.0..30.0), rng.random_range(0.0..30.0)),
                estimates: {
                    let mut e = Vec::new();
                    for k in 1..=nt {
                        if rng.random_bool(0.6) {
                            e.push((k, RelVec::new(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0))));
                        }
                    }
                    e
                },
            })
            .collect();
        (targets, agents)
    }

    #[test]
    fn objective_matches_naive_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let (targets, agents) = random_scene(&mut rng);
            let cap = 30.0 * 2f64.sqrt();
            assert!((objective_h(&targets, &agents, cap) - naive_h(&targets, &agents, cap)).abs() <= 1e-12);
        }
    }

    #[test]
    fn time_to_track_examples() {
        let trace: Vec<StepTrace> = (0..20)
            .map(|t| StepTrace { t, selections: vec![sel(if t >= 10 { 1 } else { 0 }, t >= 10)] })
            .collect();
        assert_eq!(time_to_track(&trace, 1), Some(10));

        let blind: Vec<StepTrace> = (0..20).map(|t| StepTrace { t, selections: vec![sel(0, false)] }).collect();
        assert_eq!(time_to_track(&blind, 1), None);

        // agent A holds target 1 from t=5, agent B acquires target 2 at t=12
        let staggered: Vec<StepTrace> = (0..20)
            .map(|t| StepTrace {
                t,
                selections: vec![sel(if t >= 5 { 1 } else { 0 }, t >= 5), sel(2, t >= 12)],
            })
            .collect();
        assert_eq!(time_to_track(&staggered, 2), Some(12));
    }

    #[test]
    fn selection_without_view_is_not_tracking() {
        assert!(tracked_targets(&[sel(3, false), sel(0, true)]).is_empty());
        assert_eq!(tracked_targets(&[sel(3, true), sel(3, true)]).len(), 1);
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::from_times(&[Some(10), None, Some(30), Some(20), None]);
        assert_eq!((s.runs, s.completed, s.censored), (5, 3, 2));
        assert_eq!((s.mean, s.median), (Some(20.0), Some(20.0)));
        let s = Summary::from_times(&[Some(1), Some(4)]);
        assert_eq!(s.median, Some(2.5));
        let s = Summary::from_times(&[None]);
        assert_eq!((s.mean, s.median), (None, None));
    }

    #[test]
    fn names_round_trip() {
        for s in SearchAlgo::ALL {
            assert_eq!(s.as_str().parse::<SearchAlgo>().unwrap(), s);
        }
        for a in AssignAlgo::ALL {
            assert_eq!(a.as_str().parse::<AssignAlgo>().unwrap(), a);
        }
        assert!("auction-ish".parse::<AssignAlgo>().is_err());
    }

    #[test]
    fn sweep_grids() {
        let base = WorldConfig::preset("sim-2d").unwrap();
        assert_eq!(SweepGrid::AgentsTargets.points(&base).len(), 12);
        let sizes: Vec<f64> = SweepGrid::EnvSize.points(&base).iter().map(|(_, w)| w.domain.width).collect();
        assert_eq!(sizes, [10.0, 30.0, 50.0]);
        assert!(SweepGrid::Fov.points(&base).iter().all(|(_, w)| w.validate().is_ok()));
    }
}
