//! Monte-Carlo estimation of the risk-sensitive cost
//! `J^n = b^{-2} log E int_0^T exp(b^2 H_t) dt`, with the running cost
//! `H_t = int_0^t hold . X~ du + reject . R~(t)` and `b = b_n`.
//!
//! Everything is accumulated in log space; the integral of `exp(b^2 H)`
//! over a linear piece of `H` is taken in closed form.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::NthSystem;
use crate::numeric::{log_int_exp_linear, LogSum};
use crate::sim::{
    replication_seed, run_observed, Event, Observer, Policy, PolicyDecision, SimState,
    Trajectory,
};

/// Effective sample sizes below this share of `M` are flagged.
pub const HEAVY_TAIL_SHARE: f64 = 0.05;

/// A linear piece `H(t) = value + slope (t - start)` on `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub value: f64,
    pub slope: f64,
}

impl Segment {
    pub fn value_at(&self, t: f64) -> f64 {
        self.value + self.slope * (t - self.start)
    }
}

/// Piecewise-linear, right-continuous running cost with upward jumps at
/// rejections. Consecutive pieces with equal slope and no jump are merged.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunningCost {
    pub segments: Vec<Segment>,
}

impl RunningCost {
    /// `H(t)`, right-continuous; `t` is clamped to the covered interval.
    pub fn eval(&self, t: f64) -> f64 {
        let Some(first) = self.segments.first() else {
            return 0.0;
        };
        if t <= first.start {
            return first.value;
        }
        let k = self.segments.partition_point(|s| s.start <= t) - 1;
        let seg = &self.segments[k];
        seg.value_at(t.min(seg.end))
    }

    pub fn end(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }
}

trait SegmentSink {
    fn segment(&mut self, seg: Segment);
}

impl SegmentSink for Vec<Segment> {
    fn segment(&mut self, seg: Segment) {
        self.push(seg);
    }
}

/// `log int exp(b^2 H)` accumulated segment by segment.
struct LogWeight {
    b2: f64,
    acc: LogSum,
}

impl SegmentSink for LogWeight {
    fn segment(&mut self, seg: Segment) {
        let dt = seg.end - seg.start;
        self.acc
            .push(log_int_exp_linear(self.b2 * seg.value, self.b2 * seg.slope, dt));
    }
}

/// Builds `H` from the event stream of a run.
struct CostObserver<S> {
    hold: Vec<f64>,
    reject: Vec<f64>,
    scale: f64,
    pending: Option<Segment>,
    sink: S,
}

impl<S: SegmentSink> CostObserver<S> {
    fn new(system: &NthSystem, sink: S) -> Self {
        let p = &system.params.classes;
        CostObserver {
            hold: p.iter().map(|c| c.hold_cost).collect(),
            reject: p.iter().map(|c| c.reject_cost).collect(),
            scale: system.scale,
            pending: None,
            sink,
        }
    }

    fn holding_rate(&self, x: &[u64]) -> f64 {
        self.hold.iter().zip(x).map(|(h, &v)| h * v as f64).sum::<f64>() / self.scale
    }

    /// Closes the pending piece at `t` and opens one with the new slope.
    fn cut(&mut self, t: f64, jump: f64, slope: f64) {
        let Some(seg) = self.pending else {
            return;
        };
        if jump == 0.0 && slope == seg.slope {
            return;
        }
        let value = seg.value_at(t);
        if t > seg.start {
            self.sink.segment(Segment { end: t, ..seg });
        }
        self.pending = Some(Segment {
            start: t,
            end: t,
            value: value + jump,
            slope,
        });
    }
}

impl<S: SegmentSink> Observer for CostObserver<S> {
    fn on_start(&mut self, state: &SimState, _decision: &PolicyDecision) {
        self.pending = Some(Segment {
            start: state.t,
            end: state.t,
            value: 0.0,
            slope: self.holding_rate(&state.x),
        });
    }

    fn on_event(&mut self, event: &Event, state: &SimState, _decision: &PolicyDecision) {
        let jump = if event.kind.is_rejection() {
            self.reject[event.class] / self.scale
        } else {
            0.0
        };
        let slope = self.holding_rate(&state.x);
        self.cut(event.time, jump, slope);
    }

    fn on_finish(&mut self, state: &SimState) {
        if let Some(seg) = self.pending.take() {
            if state.t > seg.start {
                self.sink.segment(Segment { end: state.t, ..seg });
            }
        }
    }
}

/// Running cost `H` of a recorded trajectory on `[0, horizon]`.
pub fn running_cost(traj: &Trajectory, system: &NthSystem) -> RunningCost {
    let mut obs = CostObserver::new(system, Vec::new());
    let mut records = traj.records.iter();
    if let Some(first) = records.next() {
        obs.on_start(&first.state, &first.decision);
    }
    for r in records {
        if let Some(e) = &r.event {
            obs.on_event(e, &r.state, &r.decision);
        }
    }
    obs.on_finish(&traj.final_state);
    RunningCost {
        segments: obs.sink,
    }
}

/// `log int_0^T exp(b^2 H_t) dt`, exact on each linear piece.
pub fn replication_log_weight(h: &RunningCost, b: f64, t_end: f64) -> Result<f64> {
    if !(t_end > 0.0) || t_end > h.end() + 1e-12 * t_end.max(1.0) {
        return Err(Error::domain(
            "replication_log_weight",
            format!("T={t_end} outside (0, {}]", h.end()),
        ));
    }
    let mut lw = LogWeight {
        b2: b * b,
        acc: LogSum::default(),
    };
    for seg in &h.segments {
        if seg.start >= t_end {
            break;
        }
        lw.segment(Segment {
            end: seg.end.min(t_end),
            ..*seg
        });
    }
    Ok(lw.acc.ln())
}

/// Streams `log int_0^t exp(b_n^2 H_u) du` while a run progresses; the
/// value is complete after the run finishes.
pub struct LogWeightObserver(CostObserver<LogWeight>);

impl LogWeightObserver {
    pub fn new(system: &NthSystem) -> Self {
        let sink = LogWeight {
            b2: system.b_n * system.b_n,
            acc: LogSum::default(),
        };
        LogWeightObserver(CostObserver::new(system, sink))
    }

    pub fn log_weight(&self) -> f64 {
        self.0.sink.acc.ln()
    }
}

impl Observer for LogWeightObserver {
    fn on_start(&mut self, state: &SimState, decision: &PolicyDecision) {
        self.0.on_start(state, decision);
    }
    fn on_event(&mut self, event: &Event, state: &SimState, decision: &PolicyDecision) {
        self.0.on_event(event, state, decision);
    }
    fn on_finish(&mut self, state: &SimState) {
        self.0.on_finish(state);
    }
}

/// Log weight of one simulated replication, streamed without storing the
/// trajectory.
pub fn simulate_log_weight(
    system: &NthSystem,
    policy: &dyn Policy,
    horizon: f64,
    seed: u64,
) -> Result<f64> {
    let mut obs = LogWeightObserver::new(system);
    run_observed(system, policy, horizon, seed, &mut obs)?;
    Ok(obs.log_weight())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RsEstimate {
    /// Estimate of `J^n`.
    pub value: f64,
    pub replications: usize,
    pub log_weights: Vec<f64>,
    /// `(sum w)^2 / sum w^2` of the normalized weights.
    pub ess: f64,
    /// Set when `ess < 0.05 M`: the mean is dominated by a few replications
    /// and the estimate is biased low.
    pub heavy_tail: bool,
    pub b: f64,
}

impl RsEstimate {
    pub fn from_log_weights(log_weights: Vec<f64>, b: f64) -> Result<Self> {
        let m = log_weights.len();
        if m < 2 {
            return Err(Error::domain("estimate", format!("need at least 2 replications, got {m}")));
        }
        let mut acc = LogSum::default();
        for &lw in &log_weights {
            acc.push(lw);
        }
        let value = acc.ln_mean(m as f64) / (b * b);
        let (sum, sum_sq) = log_weights.iter().fold((0.0, 0.0), |(s, q), &lw| {
            let w = (lw - acc.max).exp();
            (s + w, q + w * w)
        });
        let ess = sum * sum / sum_sq;
        Ok(RsEstimate {
            value,
            replications: m,
            log_weights,
            ess,
            heavy_tail: ess < HEAVY_TAIL_SHARE * m as f64,
            b,
        })
    }

    /// Pools two shards of replications.
    pub fn merge(&self, other: &RsEstimate) -> Result<RsEstimate> {
        if self.b != other.b {
            return Err(Error::domain("merge", "shards use different scalings"));
        }
        let mut lw = self.log_weights.clone();
        lw.extend_from_slice(&other.log_weights);
        RsEstimate::from_log_weights(lw, self.b)
    }
}

/// Runs `m` independent replications (in parallel) and estimates `J^n`.
/// The result depends only on `(seed, m)`.
pub fn estimate_jn(
    system: &NthSystem,
    policy: &dyn Policy,
    horizon: f64,
    m: usize,
    seed: u64,
) -> Result<RsEstimate> {
    if m < 2 {
        return Err(Error::domain("estimate_jn", format!("need at least 2 replications, got {m}")));
    }
    let log_weights = (0..m as u64)
        .into_par_iter()
        .map(|k| simulate_log_weight(system, policy, horizon, replication_seed(seed, k)))
        .collect::<Result<Vec<f64>>>()?;
    RsEstimate::from_log_weights(log_weights, system.b_n)
}

/// `b^{-2} log( M^{-1} sum_k delta exp(b^2 H_k(T - delta)) )`, a lower
/// bound for the estimate built from the same replications, valid because
/// `H` is nondecreasing.
pub fn lower_envelope(costs: &[RunningCost], b: f64, t_end: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < t_end) {
        return Err(Error::domain("lower_envelope", format!("delta={delta} outside (0, {t_end})")));
    }
    let b2 = b * b;
    let mut acc = LogSum::default();
    for h in costs {
        acc.push(b2 * h.eval(t_end - delta) + delta.ln());
    }
    Ok(acc.ln_mean(costs.len() as f64) / b2)
}
