//! Streaming observers: invariant checks, curve-tracking statistics and a
//! CSV event log.

use std::io::Write;

use super::engine::{Event, EventKind, Observer, SimState};
use super::policy::PolicyDecision;
use crate::model::NthSystem;
use crate::workload::WorkloadGeometry;

const SIMPLEX_TOL: f64 = 1e-12;

/// Counts violations of the pathwise invariants at every event.
#[derive(Clone, Debug, Default)]
pub struct InvariantMonitor {
    x0: Vec<u64>,
    caps: Vec<u64>,
    /// Also require `sum B = 1` on nonempty states.
    pub work_conserving: bool,
    last_alloc: Vec<f64>,
    last_t: f64,
    pub events: u64,
    pub balance: u64,
    pub buffer: u64,
    pub admissibility: u64,
    pub simplex: u64,
    pub allocation: u64,
    pub work_conservation: u64,
}

impl InvariantMonitor {
    pub fn new(system: &NthSystem, work_conserving: bool) -> Self {
        InvariantMonitor {
            x0: system.x0_counts.clone(),
            caps: system.buffer_caps.clone(),
            work_conserving,
            ..Default::default()
        }
    }

    pub fn violations(&self) -> u64 {
        self.balance
            + self.buffer
            + self.admissibility
            + self.simplex
            + self.allocation
            + self.work_conservation
    }

    fn check(&mut self, state: &SimState, decision: &PolicyDecision) {
        self.events += 1;
        if !state.balance_holds(&self.x0) {
            self.balance += 1;
        }
        if state.x.iter().zip(&self.caps).any(|(x, c)| x > c) {
            self.buffer += 1;
        }
        let b = &decision.service;
        if b.iter().any(|&v| v < 0.0) || b.iter().sum::<f64>() > 1.0 + SIMPLEX_TOL {
            self.simplex += 1;
        }
        if state.x.iter().zip(b).any(|(&x, &v)| x == 0 && v != 0.0) {
            self.admissibility += 1;
        }
        let nonempty = state.x.iter().any(|&x| x > 0);
        if self.work_conserving && nonempty && (b.iter().sum::<f64>() - 1.0).abs() > SIMPLEX_TOL {
            self.work_conservation += 1;
        }
        self.check_allocation(state);
    }

    fn check_allocation(&mut self, state: &SimState) {
        if !self.last_alloc.is_empty() {
            let dt = state.t - self.last_t;
            let grown: f64 = state
                .alloc
                .iter()
                .zip(&self.last_alloc)
                .map(|(a, b)| a - b)
                .sum();
            let decreasing = state.alloc.iter().zip(&self.last_alloc).any(|(a, b)| a < b);
            if decreasing || grown > dt + 1e-9 * (1.0 + state.t) {
                self.allocation += 1;
            }
        }
        self.last_alloc.clone_from(&state.alloc);
        self.last_t = state.t;
    }
}

impl Observer for InvariantMonitor {
    fn on_start(&mut self, state: &SimState, decision: &PolicyDecision) {
        self.check(state, decision);
    }
    fn on_event(&mut self, _event: &Event, state: &SimState, decision: &PolicyDecision) {
        self.check(state, decision);
    }
    fn on_finish(&mut self, state: &SimState) {
        self.check_allocation(state);
    }
}

/// Time-weighted statistics of the scaled state: the fraction of time the
/// state is farther than `eps` (sup norm) from the curve `gamma_a` of its
/// workload, the fraction spent above the overload threshold while still
/// admitting class `i*`, and the rejection totals per class.
#[derive(Clone, Debug)]
pub struct TrackingStats {
    geometry: WorkloadGeometry,
    scale: f64,
    theta_n: Vec<f64>,
    eps: f64,
    a_star: f64,
    current_off: bool,
    current_open_above: bool,
    last_t: f64,
    pub time_total: f64,
    pub time_off_curve: f64,
    pub time_open_above: f64,
    pub max_deviation: f64,
    pub rejections: Vec<u64>,
}

impl TrackingStats {
    pub fn new(system: &NthSystem, geometry: &WorkloadGeometry, eps: f64, a_star: f64) -> Self {
        TrackingStats {
            geometry: geometry.clone(),
            scale: system.scale,
            theta_n: system.theta.clone(),
            eps,
            a_star,
            current_off: false,
            current_open_above: false,
            last_t: 0.0,
            time_total: 0.0,
            time_off_curve: 0.0,
            time_open_above: 0.0,
            max_deviation: 0.0,
            rejections: vec![0; system.num_classes()],
        }
    }

    pub fn off_curve_fraction(&self) -> f64 {
        self.time_off_curve / self.time_total
    }

    pub fn open_above_fraction(&self) -> f64 {
        self.time_open_above / self.time_total
    }

    /// Share of all rejections that hit class `class`; one when nothing was
    /// rejected.
    pub fn rejection_share(&self, class: usize) -> f64 {
        let total: u64 = self.rejections.iter().sum();
        if total == 0 {
            1.0
        } else {
            self.rejections[class] as f64 / total as f64
        }
    }

    fn accrue(&mut self, t: f64) {
        let dt = t - self.last_t;
        self.time_total += dt;
        if self.current_off {
            self.time_off_curve += dt;
        }
        if self.current_open_above {
            self.time_open_above += dt;
        }
        self.last_t = t;
    }

    fn classify(&mut self, state: &SimState, decision: &PolicyDecision) {
        let x: Vec<f64> = state.x.iter().map(|&v| v as f64 / self.scale).collect();
        // the curve is only defined up to total buffer workload
        let w: f64 = x.iter().zip(&self.theta_n).map(|(a, b)| a * b).sum();
        let w = w.clamp(0.0, self.geometry.total);
        let target = self.geometry.gamma_a_unchecked(w);
        let dev = x
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        self.max_deviation = self.max_deviation.max(dev);
        self.current_off = dev > self.eps;
        let w_limit = self.geometry.dot_theta(&x);
        self.current_open_above = w_limit > self.a_star && decision.admit_istar;
    }
}

impl Observer for TrackingStats {
    fn on_start(&mut self, state: &SimState, decision: &PolicyDecision) {
        self.last_t = state.t;
        self.classify(state, decision);
    }
    fn on_event(&mut self, event: &Event, state: &SimState, decision: &PolicyDecision) {
        self.accrue(event.time);
        if event.kind.is_rejection() {
            self.rejections[event.class] += 1;
        }
        self.classify(state, decision);
    }
    fn on_finish(&mut self, state: &SimState) {
        self.accrue(state.t);
    }
}

/// Writes `time,kind,class,x_1,...,x_I` per event; the initial snapshot has
/// kind `start`. Write errors are kept and reported by [`EventLog::finish`].
pub struct EventLog<W: Write> {
    out: W,
    error: Option<std::io::Error>,
}

impl<W: Write> EventLog<W> {
    pub fn new(out: W) -> Self {
        EventLog { out, error: None }
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }

    fn write_row(&mut self, time: f64, kind: &str, class: Option<usize>, x: &[u64]) {
        if self.error.is_some() {
            return;
        }
        let class = class.map(|c| (c + 1).to_string()).unwrap_or_default();
        let mut line = format!("{time:.16e},{kind},{class}");
        for v in x {
            line.push(',');
            line.push_str(&v.to_string());
        }
        line.push('\n');
        if let Err(e) = self.out.write_all(line.as_bytes()) {
            self.error = Some(e);
        }
    }
}

impl<W: Write> Observer for EventLog<W> {
    fn on_start(&mut self, state: &SimState, _decision: &PolicyDecision) {
        let mut header = String::from("time,kind,class");
        for i in 1..=state.x.len() {
            header.push_str(&format!(",x_{i}"));
        }
        header.push('\n');
        if let Err(e) = self.out.write_all(header.as_bytes()) {
            self.error = Some(e);
        }
        self.write_row(state.t, "start", None, &state.x);
    }
    fn on_event(&mut self, event: &Event, state: &SimState, _decision: &PolicyDecision) {
        self.write_row(event.time, event.kind.as_str(), Some(event.class), &state.x);
    }
}

/// Kind names used in the event log.
pub fn event_kind_names() -> [&'static str; 4] {
    [
        EventKind::Arrival.as_str(),
        EventKind::ForcedRejection.as_str(),
        EventKind::OverloadRejection.as_str(),
        EventKind::Completion.as_str(),
    ]
}
