//! Discrete-event simulation of the `n`-th queueing system under a
//! pluggable control policy.

mod dist;
mod engine;
mod observe;
mod policy;

pub use dist::Sampler;
pub use engine::{
    run, run_observed, Engine, Event, EventKind, Observer, Record, SimState, Trajectory,
};
pub use observe::{event_kind_names, EventLog, InvariantMonitor, TrackingStats};
pub use policy::{
    AoPolicy, FullBufferRejectOnly, Policy, PolicyDecision, PolicyKind, StaticPriority,
    ThresholdWeights,
};

/// Seed of replication `index` derived from a base seed (SplitMix64 mix),
/// so replications stay independent of scheduling.
pub fn replication_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
