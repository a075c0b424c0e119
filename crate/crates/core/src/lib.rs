//! Discrete-event simulation of LoRaWAN uplinks under reactive jamming.
//!
//! Layers, bottom up: [`phy`] timing, [`codec`] frames, [`medium`] capture
//! and scheduling, [`actors`] devices, server and adversaries, [`sim`] the
//! scenario engine, then [`detect`], [`trace`] and [`experiments`] on top.
//!
//! Real-valued parts are generic over [`num::Real`]; the aliases below fix
//! them to `f64`.

pub mod actors;
pub mod codec;
pub mod detect;
pub mod experiments;
pub mod medium;
pub mod num;
pub mod phy;
pub mod scenario;
pub mod sim;
pub mod trace;

pub use phy::{time_on_air, Jammability, LatencyModel, Micros, RadioParams};
pub use scenario::Scenario;
pub use sim::{run, RunMetrics, RunOutput};

pub type CaptureMatrix = medium::CaptureMatrix<f64>;
pub type LinkModel = medium::LinkModel<f64>;
pub type Simulation = sim::Simulation<f64>;
pub type TrafficStats = trace::TrafficStats<f64>;
pub type DetectorConfig = detect::DetectorConfig<f64>;
pub type Detector = detect::Detector<f64>;
