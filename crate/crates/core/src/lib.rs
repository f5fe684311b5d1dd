//! Moderate-deviation heavy-traffic control of a multi-class single-server
//! queue with finite buffers and a risk-sensitive cost.
//!
//! - [`model`]: parameters, validation and the `n`-th system
//! - [`paths`]: piecewise-linear paths and the Skorokhod map on an interval
//! - [`workload`]: workload geometry, `h`, the curves `gamma` and `gamma_a`
//! - [`game`]: the differential game, its value, free boundary and playouts
//! - [`sim`]: discrete-event simulation under pluggable policies
//! - [`rscost`]: Monte-Carlo estimation of the risk-sensitive cost

pub mod error;
pub mod fixtures;
pub mod game;
pub mod model;
pub mod numeric;
pub mod paths;
pub mod rscost;
pub mod sim;
pub mod workload;

pub use error::{Error, Result};
pub use game::{solve_game, GamePlay, GameSolution};
pub use model::{instantiate, validate, ClassParams, Dist, ModelParams, NthSystem, ValidationReport};
pub use paths::{skorohod_map, PLPath, ReflectionTriple};
pub use rscost::{estimate_jn, RsEstimate, RunningCost};
pub use sim::{Policy, PolicyDecision, PolicyKind, SimState, Trajectory};
pub use workload::WorkloadGeometry;
