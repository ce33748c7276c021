//! Cooperative multi-agent search and tracking with relative-frame target
//! estimates and virtual pheromones.

pub mod error;
pub mod agent;
pub mod baselines;
pub mod config;
pub mod estimation;
pub mod harness;
pub mod pheromone;
pub mod sensing;
pub mod tracking;
pub mod world;
