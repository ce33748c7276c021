//! World configuration: TOML schema, shipped presets and the assumption
//! checks every run passes before its first step.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, AssignmentMode, ControlBounds, PdGains, SearchStrategy};
use crate::baselines::{AntiFlockingConfig, AuctionConfig, LevyConfig};
use crate::error::ConfigError;
use crate::estimation::{CovMat, RelVec};
use crate::pheromone::PheromoneConfig;
use crate::sensing::{best_viewpoint, AnalyticCovMap, CalibrationTable, CovarianceMap, SectorFov};
use crate::tracking::TrackerConfig;

/// Calibration table used by the `hardware-table` preset.
pub const BUILTIN_TABLE: &str = include_str!("../data/hardware_table.csv");
/// Value of `sensor.calibration` selecting [`BUILTIN_TABLE`].
pub const BUILTIN_TABLE_NAME: &str = "builtin";

pub const PRESETS: [&str; 2] = ["sim-2d", "hardware-table"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub x_min: f64,
    pub y_min: f64,
    pub width: f64,
    pub height: f64,
}

impl Domain {
    pub fn square(side: f64) -> Self {
        Self { x_min: 0.0, y_min: 0.0, width: side, height: side }
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.width
    }

    pub fn y_max(&self) -> f64 {
        self.y_min + self.height
    }

    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }

    pub fn contains(&self, p: RelVec) -> bool {
        (self.x_min..=self.x_max()).contains(&p.x) && (self.y_min..=self.y_max()).contains(&p.y)
    }

    pub fn clamp(&self, p: RelVec) -> RelVec {
        RelVec::new(p.x.clamp(self.x_min, self.x_max()), p.y.clamp(self.y_min, self.y_max()))
    }

    /// Mirror a coordinate back across whichever wall it crossed.
    pub fn reflect(&self, p: RelVec) -> RelVec {
        fn fold(v: f64, lo: f64, hi: f64) -> f64 {
            let span = hi - lo;
            if span <= 0.0 {
                return lo;
            }
            let period = 2.0 * span;
            let m = (v - lo).rem_euclid(period);
            lo + if m > span { period - m } else { m }
        }
        RelVec::new(fold(p.x, self.x_min, self.x_max()), fold(p.y, self.y_min, self.y_max()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    /// r_s, bl.
    pub range: f64,
    /// Full sector angle, degrees.
    pub aperture_deg: f64,
    pub k1: f64,
    pub k2: f64,
    /// Range with the best estimates, bl.
    pub best_range: f64,
    pub eta_floor: f64,
    /// Multiplier on the simulated measurement noise; 0 gives exact readings.
    pub noise_scale: f64,
    /// `"builtin"` or a CSV path; absent means the analytic map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<String>,
    pub n_nearest: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PheromoneParams {
    pub initial_weight: f64,
    pub decay: f64,
    pub floor: f64,
    pub cell_size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyParams {
    pub exponent: f64,
    pub min_step: f64,
    /// Defaults to the domain diagonal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub name: String,
    pub seed: u64,
    pub n_agents: usize,
    pub n_targets: usize,
    pub domain: Domain,
    /// True per-step target noise Q_k.
    pub target_noise: CovMat,
    /// Bound Q̄_k the agents assume.
    pub target_noise_bound: CovMat,
    pub comm_radius: f64,
    pub rx_period: u64,
    pub neighbor_sensing_gain: f64,
    /// Extra per-step growth of neighbour position uncertainty; defaults to
    /// `max_speed² I`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighbor_motion_bound: Option<CovMat>,
    pub max_speed: f64,
    pub max_turn_deg: f64,
    /// R_Δp.
    pub displacement_noise: CovMat,
    pub deletion_threshold: f64,
    pub reach_radius: f64,
    pub sensor: SensorConfig,
    pub pheromone: PheromoneParams,
    pub gains: PdGains,
    pub levy: LevyParams,
    pub auction: AuctionConfig,
    pub antiflocking: AntiFlockingConfig,
}

impl WorldConfig {
    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        match name {
            "sim-2d" => Ok(Self::sim_2d()),
            "hardware-table" => Ok(Self::hardware_table()),
            other => Err(ConfigError::UnknownPreset(other.to_string())),
        }
    }

    fn sim_2d() -> Self {
        Self {
            name: "sim-2d".into(),
            seed: 0,
            n_agents: 6,
            n_targets: 4,
            domain: Domain::square(30.0),
            target_noise: CovMat::isotropic(0.01),
            target_noise_bound: CovMat::isotropic(0.01),
            comm_radius: 12.0,
            rx_period: 3,
            neighbor_sensing_gain: 1.0,
            neighbor_motion_bound: None,
            max_speed: 0.4,
            max_turn_deg: 15.0,
            displacement_noise: CovMat::ZERO,
            deletion_threshold: 3600.0,
            reach_radius: 0.5,
            sensor: SensorConfig {
                range: 4.0,
                aperture_deg: 120.0,
                k1: 1.0,
                k2: 1.0,
                best_range: 2.0,
                eta_floor: AnalyticCovMap::DEFAULT_ETA_FLOOR,
                noise_scale: 1.0,
                calibration: None,
                n_nearest: 4,
            },
            pheromone: PheromoneParams { initial_weight: 35.0, decay: 0.16, floor: 0.1, cell_size: 0.25 },
            gains: PdGains::default(),
            levy: LevyParams { exponent: 1.5, min_step: 1.0, max_step: None },
            auction: AuctionConfig::default(),
            antiflocking: AntiFlockingConfig { gain_radius: 4.0, travel_weight: 1.0, separation: 8.0, cell: 1.0 },
        }
    }

    fn hardware_table() -> Self {
        Self {
            name: "hardware-table".into(),
            n_agents: 2,
            n_targets: 2,
            domain: Domain { x_min: 0.0, y_min: 0.0, width: 10.0, height: 6.0 },
            target_noise: CovMat::isotropic(0.01),
            target_noise_bound: CovMat::diag(0.19, 0.15),
            comm_radius: 6.5,
            rx_period: 2,
            neighbor_sensing_gain: 0.1,
            max_speed: 0.6,
            displacement_noise: CovMat::diag(0.18451235, 0.20685948),
            sensor: SensorConfig {
                range: 5.5,
                calibration: Some(BUILTIN_TABLE_NAME.into()),
                ..Self::sim_2d().sensor
            },
            pheromone: PheromoneParams { initial_weight: 15.0, decay: 0.3, floor: 0.1, cell_size: 0.25 },
            antiflocking: AntiFlockingConfig { gain_radius: 5.5, travel_weight: 1.0, separation: 3.0, cell: 1.0 },
            ..Self::sim_2d()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn fov(&self) -> SectorFov {
        SectorFov::new(self.sensor.range, self.sensor.aperture_deg.to_radians())
    }

    pub fn levy(&self) -> LevyConfig {
        LevyConfig::new(self.levy.exponent, self.levy.min_step, self.levy.max_step.unwrap_or(self.domain.diagonal()))
    }

    pub fn bounds(&self) -> ControlBounds {
        ControlBounds { max_speed: self.max_speed, max_turn: self.max_turn_deg.to_radians() }
    }

    pub fn covariance_map(&self) -> Result<CovarianceMap, ConfigError> {
        let s = &self.sensor;
        let analytic = AnalyticCovMap { k1: s.k1, k2: s.k2, best_range: s.best_range, eta_floor: s.eta_floor };
        let r_max = self.fov().diameter();
        Ok(match s.calibration.as_deref() {
            None => CovarianceMap::Analytic(analytic),
            Some(BUILTIN_TABLE_NAME) => CovarianceMap::Table(CalibrationTable::read_csv(BUILTIN_TABLE.as_bytes(), s.n_nearest, r_max)?),
            Some(path) => CovarianceMap::Table(CalibrationTable::read_csv(std::fs::File::open(path)?, s.n_nearest, r_max)?),
        })
    }

    pub fn agent_config(&self, search: SearchStrategy, assignment: AssignmentMode) -> Result<AgentConfig, ConfigError> {
        let fov = self.fov();
        let map = self.covariance_map()?;
        Ok(AgentConfig {
            tracker: TrackerConfig {
                process_noise_bound: self.target_noise_bound,
                deletion_threshold: self.deletion_threshold,
                neighbor_sensing_gain: self.neighbor_sensing_gain,
                neighbor_motion_bound: self
                    .neighbor_motion_bound
                    .unwrap_or(CovMat::isotropic(self.max_speed * self.max_speed)),
            },
            pheromone: PheromoneConfig {
                initial_weight: self.pheromone.initial_weight,
                decay: self.pheromone.decay,
                floor: self.pheromone.floor,
                footprint_radius: self.sensor.range,
                cell_size: self.pheromone.cell_size,
            },
            comm_radius: self.comm_radius,
            reach_radius: self.reach_radius,
            fov,
            viewpoint: best_viewpoint(&map, &fov),
            gains: self.gains,
            bounds: self.bounds(),
            search,
            assignment,
            levy: self.levy(),
        })
    }

    /// Structural sanity plus the modelling assumptions. Runs on every load
    /// and again before a simulation starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        if self.n_agents == 0 {
            return invalid("n_agents must be at least 1");
        }
        if !(self.domain.width > 0.0 && self.domain.height > 0.0) {
            return invalid("domain must have positive width and height");
        }
        if self.rx_period == 0 {
            return invalid("rx_period must be at least 1");
        }
        if !(self.comm_radius > 0.0 && self.sensor.range > 0.0) {
            return invalid("radii must be positive");
        }
        if !(self.sensor.aperture_deg > 0.0 && self.sensor.aperture_deg <= 360.0) {
            return invalid("aperture_deg must lie in (0, 360]");
        }
        if self.sensor.noise_scale < 0.0 || self.sensor.eta_floor <= 0.0 || self.sensor.n_nearest == 0 {
            return invalid("sensor noise parameters out of range");
        }
        let p = &self.pheromone;
        if !(p.decay > 0.0 && p.decay < 1.0 && p.floor > 0.0 && p.floor < p.initial_weight && p.cell_size > 0.0) {
            return invalid("pheromone parameters need 0 < decay < 1, 0 < floor < initial_weight and cell_size > 0");
        }
        if !(self.max_speed > 0.0 && self.max_turn_deg > 0.0 && self.reach_radius > 0.0 && self.deletion_threshold > 0.0) {
            return invalid("speeds, reach radius and deletion threshold must be positive");
        }
        if !(self.levy.exponent > 1.0 && self.levy.exponent <= 3.0 && self.levy.min_step > 0.0)
            || self.levy.max_step.is_some_and(|m| m <= self.levy.min_step)
            || self.levy.min_step >= self.domain.diagonal() && self.levy.max_step.is_none()
        {
            return invalid("levy parameters need 1 < exponent <= 3 and 0 < min_step < max_step");
        }
        if !(self.auction.epsilon > 0.0) || !(self.antiflocking.cell > 0.0) {
            return invalid("auction epsilon and anti-flocking cell must be positive");
        }
        for (name, c) in [
            ("target_noise", self.target_noise),
            ("target_noise_bound", self.target_noise_bound),
            ("displacement_noise", self.displacement_noise),
            ("neighbor_motion_bound", self.neighbor_motion_bound.unwrap_or_default()),
        ] {
            if !c.is_finite() || !c.is_psd() {
                return Err(ConfigError::Invalid(format!("{name} must be a finite PSD matrix")));
            }
        }

        if self.sensor.range > self.comm_radius {
            return Err(ConfigError::FovOutsideCommBall { sensing_radius: self.sensor.range, comm_radius: self.comm_radius });
        }
        if !self.target_noise_bound.dominates(&self.target_noise) {
            return Err(ConfigError::ProcessNoiseUnbounded);
        }
        let target_step = 3.0 * self.target_noise.eigenvalues().1.max(0.0).sqrt();
        if self.max_speed <= target_step {
            return Err(ConfigError::AgentTooSlow { agent_speed: self.max_speed, target_step });
        }
        Ok(())
    }
}
