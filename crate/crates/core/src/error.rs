use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("singular covariance (smallest eigenvalue {min_eigenvalue:e}); missing noise floor upstream?")]
    SingularCovariance { min_eigenvalue: f64 },
    #[error("nothing to fuse")]
    Empty,
}

#[derive(Debug, Error)]
pub enum SensingError {
    #[error("calibration table is empty")]
    EmptyTable,
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("bounding box has zero or negative area")]
    ZeroArea,
    #[error("invalid calibration entry: {0}")]
    InvalidEntry(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackingError {
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error("target {0} is not held in any list")]
    UnknownTarget(u32),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PheromoneError {
    #[error("region raster geometry does not match the map (cell {expected} vs {found})")]
    GeometryMismatch { expected: f64, found: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AuctionError {
    #[error("bidder {0} has no finite-cost object")]
    NoFiniteCost(usize),
    #[error("no assignment covers every bidder")]
    Infeasible,
    #[error("cost table rows have unequal lengths")]
    Ragged,
}

/// A violated modelling assumption or malformed configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("assumption violated: sensing radius {sensing_radius} exceeds communication radius {comm_radius}")]
    FovOutsideCommBall { sensing_radius: f64, comm_radius: f64 },
    #[error("assumption violated: target noise Q_k is not bounded by Q̄_k")]
    ProcessNoiseUnbounded,
    #[error("assumption violated: agent speed {agent_speed} does not exceed worst-case target step {target_step}")]
    AgentTooSlow { agent_speed: f64, target_step: f64 },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("failed to parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Sensing(#[from] SensingError),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Tracking(#[from] TrackingError),
    #[error(transparent)]
    Auction(#[from] AuctionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<EstimationError> for SimError {
    fn from(e: EstimationError) -> Self {
        SimError::Tracking(TrackingError::Estimation(e))
    }
}
