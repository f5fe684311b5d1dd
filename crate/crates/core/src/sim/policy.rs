//! Control policies: the asymptotically optimal threshold/priority policy
//! and two comparison baselines.
//!
//! A policy maps integer queue lengths to service fractions `B` and to the
//! overload switch for class `i*`. Forced rejections at full buffers are
//! applied by the engine regardless of the policy.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::game::GameSolution;
use crate::model::NthSystem;

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyDecision {
    /// Service fractions, a point of the simplex.
    pub service: Vec<f64>,
    /// `false` while arrivals of class `i*` are rejected as overload.
    pub admit_istar: bool,
}

impl PolicyDecision {
    pub fn idle(classes: usize) -> Self {
        PolicyDecision {
            service: vec![0.0; classes],
            admit_istar: true,
        }
    }
}

pub trait Policy: Send + Sync {
    fn name(&self) -> &'static str;

    /// Class whose arrivals are rejected when `admit_istar` is false.
    fn istar(&self) -> usize;

    /// Writes the decision for queue lengths `x` into `out`.
    fn decide(&self, x: &[u64], system: &NthSystem, out: &mut PolicyDecision);
}

/// Workload weights used for the overload threshold test.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ThresholdWeights {
    /// Limit weights `theta_i = 1/mu_i`.
    #[default]
    Limit,
    /// `n`-th system weights `theta^n_i = n/mu^n_i`.
    Scaled,
}

/// Threshold rejection of class `i*` above workload `a*`, plus the
/// priority rule that tracks the interior curve `gamma_a`: the highest
/// class below its level `a_i` gets no service while any other class is
/// nonempty, and the others share the server in proportion to `rho_i`.
#[derive(Clone, Debug)]
pub struct AoPolicy {
    pub theta: Vec<f64>,
    pub rho: Vec<f64>,
    /// Curve levels `a_i = D_i - 3 eps0`.
    pub levels: Vec<f64>,
    pub a_star: f64,
    pub istar: usize,
    pub weights: ThresholdWeights,
}

impl AoPolicy {
    pub fn new(solution: &GameSolution) -> Self {
        let g = &solution.geometry;
        AoPolicy {
            theta: g.theta.clone(),
            rho: g.rho.clone(),
            levels: g.a.clone(),
            a_star: solution.a_star(),
            istar: g.istar,
            weights: ThresholdWeights::Limit,
        }
    }

    pub fn with_weights(mut self, weights: ThresholdWeights) -> Self {
        self.weights = weights;
        self
    }

    /// Service fractions `rho'(x)` for an MD-scaled state.
    pub fn service_fractions(&self, x: &[f64], out: &mut [f64]) {
        self.fractions_by(|i| x[i], out);
    }

    fn fractions_by(&self, x: impl Fn(usize) -> f64, out: &mut [f64]) {
        out.iter_mut().for_each(|b| *b = 0.0);
        let n = out.len();
        if (0..n).all(|i| x(i) == 0.0) {
            return;
        }
        let low = (0..n).rev().find(|&i| x(i) < self.levels[i]).unwrap_or(n - 1);
        let mut total = 0.0;
        for i in 0..n {
            if i != low && x(i) > 0.0 {
                total += self.rho[i];
            }
        }
        if total > 0.0 {
            for i in 0..n {
                if i != low && x(i) > 0.0 {
                    out[i] = self.rho[i] / total;
                }
            }
        } else {
            out[low] = 1.0;
        }
    }

    pub fn overload(&self, x: &[f64], system: &NthSystem) -> bool {
        self.overload_by(|i| x[i], system)
    }

    fn overload_by(&self, x: impl Fn(usize) -> f64, system: &NthSystem) -> bool {
        let theta = match self.weights {
            ThresholdWeights::Limit => &self.theta,
            ThresholdWeights::Scaled => &system.theta,
        };
        let w: f64 = theta.iter().enumerate().map(|(i, t)| t * x(i)).sum();
        w >= self.a_star
    }
}

impl Policy for AoPolicy {
    fn name(&self) -> &'static str {
        "ao"
    }

    fn istar(&self) -> usize {
        self.istar
    }

    fn decide(&self, x: &[u64], system: &NthSystem, out: &mut PolicyDecision) {
        let scaled = |i: usize| x[i] as f64 / system.scale;
        self.fractions_by(scaled, &mut out.service);
        out.admit_istar = !self.overload_by(scaled, system);
    }
}

/// Serves the lowest-indexed nonempty class at full rate (the `c mu` order
/// after relabeling); only forced rejections.
#[derive(Clone, Debug)]
pub struct StaticPriority {
    pub istar: usize,
}

impl Policy for StaticPriority {
    fn name(&self) -> &'static str {
        "static-priority"
    }

    fn istar(&self) -> usize {
        self.istar
    }

    fn decide(&self, x: &[u64], _system: &NthSystem, out: &mut PolicyDecision) {
        out.service.iter_mut().for_each(|b| *b = 0.0);
        if let Some(i) = x.iter().position(|&v| v > 0) {
            out.service[i] = 1.0;
        }
        out.admit_istar = true;
    }
}

/// The AO service rule without overload rejections.
#[derive(Clone, Debug)]
pub struct FullBufferRejectOnly {
    pub inner: AoPolicy,
}

impl Policy for FullBufferRejectOnly {
    fn name(&self) -> &'static str {
        "full-buffer-reject-only"
    }

    fn istar(&self) -> usize {
        self.inner.istar
    }

    fn decide(&self, x: &[u64], system: &NthSystem, out: &mut PolicyDecision) {
        self.inner
            .fractions_by(|i| x[i] as f64 / system.scale, &mut out.service);
        out.admit_istar = true;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Ao,
    StaticPriority,
    FullBufferRejectOnly,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [
        PolicyKind::Ao,
        PolicyKind::StaticPriority,
        PolicyKind::FullBufferRejectOnly,
    ];

    pub fn build(self, solution: &GameSolution) -> Box<dyn Policy> {
        let ao = AoPolicy::new(solution);
        match self {
            PolicyKind::Ao => Box::new(ao),
            PolicyKind::StaticPriority => Box::new(StaticPriority { istar: ao.istar }),
            PolicyKind::FullBufferRejectOnly => Box::new(FullBufferRejectOnly { inner: ao }),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Ao => "ao",
            PolicyKind::StaticPriority => "static-priority",
            PolicyKind::FullBufferRejectOnly => "full-buffer-reject-only",
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ao" => Ok(PolicyKind::Ao),
            "static-priority" => Ok(PolicyKind::StaticPriority),
            "full-buffer-reject-only" => Ok(PolicyKind::FullBufferRejectOnly),
            other => Err(Error::domain("policy", format!("unknown policy kind `{other}`"))),
        }
    }
}
