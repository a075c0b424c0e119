//! Behavioural state machines driven by the simulation engine.

pub mod device;
pub mod jammer;
pub mod policy;
pub mod server;

pub use device::{Attempt, ChannelPlan, DeviceConfig, DeviceError, EndDevice, Traffic, UplinkKind, Uplink};
pub use jammer::{JamMode, Jammer, JammerConfig, JammerStats, Listen, Reaction, ReplayConfig, ReplayStore, StoredFrame, Wormhole, WormholeConfig, WormholeStats};
pub use policy::{CompiledPolicy, JamPolicy, PolicyError};
pub use server::{NetworkServer, Received, ServerTally, Verdict};
