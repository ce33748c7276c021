//! Ground truth: unicycle agents, Brownian targets, sector-FOV measurements,
//! the r-disk broadcast channel and displacement sensing.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::agent::{BroadcastPacket, ControlInput, Delivery, Workspace};
use crate::config::{Domain, WorldConfig};
use crate::error::ConfigError;
use crate::estimation::{wrap_angle, CovMat, GaussianEstimate, RelVec};
use crate::sensing::{CovarianceMap, SectorFov};
use crate::tracking::{Detection, TargetId};

/// Independent random streams derived from one master seed. Each entity
/// owns its stream, so adding agents leaves target noise untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Setup = 0,
    Brain = 1,
    Sensor = 2,
    Target = 3,
    Channel = 4,
    Displacement = 5,
    Harness = 6,
}

pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 32) | index);
    rng
}

fn gaussian<R: Rng + ?Sized>(cov: &CovMat, rng: &mut R) -> RelVec {
    let z = RelVec::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    cov.color(z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: RelVec,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueTarget {
    pub target_id: TargetId,
    pub position: RelVec,
    pub noise: CovMat,
}

/// Keeps an agent's waypoints inside the domain, seen from its true pose.
#[derive(Debug, Clone, Copy)]
pub struct LocalDomain {
    pub domain: Domain,
    pub origin: RelVec,
}

impl Workspace for LocalDomain {
    fn contains(&self, q: RelVec) -> bool {
        self.domain.contains(self.origin + q)
    }

    fn project(&self, q: RelVec) -> RelVec {
        self.domain.clamp(self.origin + q) - self.origin
    }
}

pub struct WorldState {
    cfg: Arc<WorldConfig>,
    pub t: u64,
    pub agents: Vec<Pose>,
    pub targets: Vec<TrueTarget>,
    cov_map: CovarianceMap,
    fov: SectorFov,
    target_rngs: Vec<ChaCha8Rng>,
    sensor_rngs: Vec<ChaCha8Rng>,
    channel_rngs: Vec<ChaCha8Rng>,
    displacement_rngs: Vec<ChaCha8Rng>,
}

impl WorldState {
    /// Random initial poses and target positions drawn from the setup stream.
    pub fn new(cfg: Arc<WorldConfig>) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let d = cfg.domain;
        let mut setup = stream_rng(cfg.seed, Stream::Setup, 0);
        let uniform_point =
            |rng: &mut ChaCha8Rng| RelVec::new(d.x_min + rng.random::<f64>() * d.width, d.y_min + rng.random::<f64>() * d.height);
        let agents = (0..cfg.n_agents)
            .map(|_| {
                let position = uniform_point(&mut setup);
                Pose { position, heading: wrap_angle(setup.random_range(-std::f64::consts::PI..std::f64::consts::PI)) }
            })
            .collect();
        let targets = (0..cfg.n_targets)
            .map(|k| TrueTarget { target_id: k as TargetId + 1, position: uniform_point(&mut setup), noise: cfg.target_noise })
            .collect();
        Self::with_layout(cfg, agents, targets)
    }

    /// Explicit initial layout; positions must lie in the domain.
    pub fn with_layout(cfg: Arc<WorldConfig>, agents: Vec<Pose>, targets: Vec<TrueTarget>) -> Result<Self, ConfigError> {
        cfg.validate()?;
        if agents.iter().map(|a| a.position).chain(targets.iter().map(|t| t.position)).any(|p| !cfg.domain.contains(p)) {
            return Err(ConfigError::Invalid("initial positions must lie inside the domain".into()));
        }
        let seed = cfg.seed;
        let per = |s: Stream, n: usize| (0..n).map(|i| stream_rng(seed, s, i as u64)).collect::<Vec<_>>();
        Ok(Self {
            cov_map: cfg.covariance_map()?,
            fov: cfg.fov(),
            target_rngs: per(Stream::Target, targets.len()),
            sensor_rngs: per(Stream::Sensor, agents.len()),
            channel_rngs: per(Stream::Channel, agents.len()),
            displacement_rngs: per(Stream::Displacement, agents.len()),
            t: 0,
            agents,
            targets,
            cfg,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    /// World-frame FOV of agent `i`.
    pub fn agent_fov(&self, i: usize) -> SectorFov {
        let p = self.agents[i];
        self.fov.at(p.position, p.heading)
    }

    pub fn workspace(&self, i: usize) -> LocalDomain {
        LocalDomain { domain: self.cfg.domain, origin: self.agents[i].position }
    }

    pub fn step_dynamics(&mut self, inputs: &[ControlInput]) {
        assert_eq!(inputs.len(), self.agents.len());
        let d = self.cfg.domain;
        for (pose, u) in self.agents.iter_mut().zip(inputs) {
            let moved = pose.position + RelVec::from_polar(u.u1, pose.heading);
            pose.position = d.reflect(moved);
            pose.heading = wrap_angle(pose.heading + u.u2);
        }
        for (target, rng) in self.targets.iter_mut().zip(self.target_rngs.iter_mut()) {
            let step = gaussian(&target.noise, rng);
            target.position = d.reflect(target.position + step);
        }
        self.t += 1;
    }

    /// Noisy relative positions of every target inside agent `i`'s FOV,
    /// each with the covariance the sensor model assigns to it.
    pub fn sense_targets(&mut self, i: usize) -> Vec<Detection> {
        let fov = self.agent_fov(i);
        let scale = self.cfg.sensor.noise_scale;
        let mut out = Vec::new();
        for target in &self.targets {
            if !fov.contains(target.position) {
                continue;
            }
            let rel = target.position - fov.origin;
            let cov = self.cov_map.cov_at(&fov.to_polar(target.position)).rotate(fov.heading);
            let noise = gaussian(&cov, &mut self.sensor_rngs[i]) * scale;
            out.push(Detection { target_id: target.target_id, estimate: GaussianEstimate::new(rel + noise, cov) });
        }
        out
    }

    pub fn is_reception_step(&self) -> bool {
        self.t.is_multiple_of(self.cfg.rx_period)
    }

    /// Packets from every sender within range, on reception steps only. The
    /// receiver measures the sender's relative position with noise
    /// `k_p * distance` per axis.
    pub fn deliver_broadcasts(&mut self, packets: &[Arc<BroadcastPacket>]) -> Vec<Vec<Delivery>> {
        let n = self.agents.len();
        let mut out = vec![Vec::new(); n];
        if !self.is_reception_step() {
            return out;
        }
        for (i, inbox) in out.iter_mut().enumerate() {
            for packet in packets {
                let j = packet.sender as usize;
                if j == i || j >= n {
                    continue;
                }
                let rel = self.agents[j].position - self.agents[i].position;
                let dist = rel.norm();
                if dist > self.cfg.comm_radius {
                    continue;
                }
                let cov = CovMat::isotropic(self.cfg.neighbor_sensing_gain * dist);
                let sensed = rel + gaussian(&cov, &mut self.channel_rngs[i]);
                inbox.push(Delivery { packet: Arc::clone(packet), sensed_position: sensed });
            }
        }
        out
    }

    /// Measured displacement since `previous` and its covariance R_Δp.
    pub fn sense_displacement(&mut self, i: usize, previous: &Pose) -> (RelVec, CovMat) {
        let truth = self.agents[i].position - previous.position;
        let r = self.cfg.displacement_noise;
        (truth + gaussian(&r, &mut self.displacement_rngs[i]), r)
    }
}
