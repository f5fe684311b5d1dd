//! Event-driven engine for the `n`-th system.
//!
//! Service is modeled as potential service evaluated at cumulative allocated
//! time: class `i` owns a renewal sequence of service epochs in "effort"
//! units, and a completion happens when the allocated time `T_i` reaches
//! the next epoch. Between events the policy decision is constant, so all
//! event times are exact.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dist::Sampler;
use super::policy::{Policy, PolicyDecision};
use crate::error::{Error, Result};
use crate::model::NthSystem;

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub x: Vec<u64>,
    /// Cumulative allocated service time `T_i`.
    pub alloc: Vec<f64>,
    pub next_arrival: Vec<f64>,
    /// Value of `T_i` at which the next potential service completes.
    pub next_service_epoch: Vec<f64>,
    pub arrivals: Vec<u64>,
    pub completions: Vec<u64>,
    pub forced: Vec<u64>,
    pub overload: Vec<u64>,
}

impl SimState {
    /// `X_i = X0_i + A_i - S_i - R^forced_i - R^overload_i`, checked in
    /// integer arithmetic.
    pub fn balance_holds(&self, x0: &[u64]) -> bool {
        (0..self.x.len()).all(|i| {
            let inflow = x0[i] as i128 + self.arrivals[i] as i128;
            let outflow =
                self.completions[i] as i128 + self.forced[i] as i128 + self.overload[i] as i128;
            inflow - outflow == self.x[i] as i128
        })
    }

    pub fn rejections(&self, class: usize) -> u64 {
        self.forced[class] + self.overload[class]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    /// Admitted arrival.
    Arrival,
    ForcedRejection,
    OverloadRejection,
    Completion,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Arrival => "arrival",
            EventKind::ForcedRejection => "forced_rejection",
            EventKind::OverloadRejection => "overload_rejection",
            EventKind::Completion => "completion",
        }
    }

    pub fn is_rejection(self) -> bool {
        matches!(self, EventKind::ForcedRejection | EventKind::OverloadRejection)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub class: usize,
}

/// Streaming hooks; states are passed after the event has been applied and
/// the policy re-queried.
pub trait Observer {
    fn on_start(&mut self, _state: &SimState, _decision: &PolicyDecision) {}
    fn on_event(&mut self, _event: &Event, _state: &SimState, _decision: &PolicyDecision) {}
    /// Called once with the state advanced to the horizon.
    fn on_finish(&mut self, _state: &SimState) {}
}

impl Observer for () {}

impl<O: Observer + ?Sized> Observer for &mut O {
    fn on_start(&mut self, state: &SimState, decision: &PolicyDecision) {
        (**self).on_start(state, decision);
    }
    fn on_event(&mut self, event: &Event, state: &SimState, decision: &PolicyDecision) {
        (**self).on_event(event, state, decision);
    }
    fn on_finish(&mut self, state: &SimState) {
        (**self).on_finish(state);
    }
}

impl<A: Observer, B: Observer> Observer for (A, B) {
    fn on_start(&mut self, state: &SimState, decision: &PolicyDecision) {
        self.0.on_start(state, decision);
        self.1.on_start(state, decision);
    }
    fn on_event(&mut self, event: &Event, state: &SimState, decision: &PolicyDecision) {
        self.0.on_event(event, state, decision);
        self.1.on_event(event, state, decision);
    }
    fn on_finish(&mut self, state: &SimState) {
        self.0.on_finish(state);
        self.1.on_finish(state);
    }
}

const STREAM_ARRIVAL: u64 = 0;
const STREAM_SERVICE: u64 = 1;

fn stream_rng(seed: u64, class: usize, kind: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * class as u64 + kind);
    rng
}

pub struct Engine<'a> {
    system: &'a NthSystem,
    policy: &'a dyn Policy,
    state: SimState,
    decision: PolicyDecision,
    ia: Vec<Sampler>,
    st: Vec<Sampler>,
    ia_rng: Vec<ChaCha8Rng>,
    st_rng: Vec<ChaCha8Rng>,
    istar: usize,
}

impl<'a> Engine<'a> {
    pub fn new(system: &'a NthSystem, policy: &'a dyn Policy, seed: u64) -> Self {
        let classes = system.num_classes();
        let params = &system.params.classes;
        let ia: Vec<Sampler> = params.iter().map(|c| Sampler::new(c.ia_distribution())).collect();
        let st: Vec<Sampler> = params.iter().map(|c| Sampler::new(c.st_distribution())).collect();
        let mut ia_rng: Vec<ChaCha8Rng> =
            (0..classes).map(|i| stream_rng(seed, i, STREAM_ARRIVAL)).collect();
        let mut st_rng: Vec<ChaCha8Rng> =
            (0..classes).map(|i| stream_rng(seed, i, STREAM_SERVICE)).collect();
        let next_arrival = (0..classes)
            .map(|i| ia[i].sample(&mut ia_rng[i]) / system.lambda[i])
            .collect();
        let next_service_epoch = (0..classes)
            .map(|i| st[i].sample(&mut st_rng[i]) / system.mu[i])
            .collect();
        let state = SimState {
            t: 0.0,
            x: system.x0_counts.clone(),
            alloc: vec![0.0; classes],
            next_arrival,
            next_service_epoch,
            arrivals: vec![0; classes],
            completions: vec![0; classes],
            forced: vec![0; classes],
            overload: vec![0; classes],
        };
        let mut decision = PolicyDecision::idle(classes);
        policy.decide(&state.x, system, &mut decision);
        Engine {
            system,
            policy,
            state,
            decision,
            ia,
            st,
            ia_rng,
            st_rng,
            istar: policy.istar(),
        }
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn decision(&self) -> &PolicyDecision {
        &self.decision
    }

    /// Earliest pending event under the current decision: completions come
    /// before arrivals at equal times, then lower class indices.
    fn earliest(&self) -> (f64, bool, usize) {
        let s = &self.state;
        let mut best = (f64::INFINITY, true, usize::MAX);
        for (i, &b) in self.decision.service.iter().enumerate() {
            if b > 0.0 {
                let t = s.t + (s.next_service_epoch[i] - s.alloc[i]).max(0.0) / b;
                if t < best.0 {
                    best = (t, false, i);
                }
            }
        }
        for (i, &t) in s.next_arrival.iter().enumerate() {
            if t < best.0 {
                best = (t, true, i);
            }
        }
        best
    }

    fn advance_to(&mut self, t: f64) {
        let dt = t - self.state.t;
        if dt > 0.0 {
            for (a, &b) in self.state.alloc.iter_mut().zip(&self.decision.service) {
                *a += b * dt;
            }
        }
        self.state.t = t;
    }

    /// Applies the next event if it happens no later than `horizon`;
    /// otherwise advances the clock to `horizon` and returns `None`.
    pub fn step(&mut self, horizon: f64) -> Result<Option<Event>> {
        let (time, is_arrival, class) = self.earliest();
        if !time.is_finite() {
            return Err(Error::Numeric(format!(
                "nonfinite event time at t={} (class {class})",
                self.state.t
            )));
        }
        if time > horizon {
            self.advance_to(horizon.max(self.state.t));
            return Ok(None);
        }
        self.advance_to(time);
        let i = class;
        let kind = if is_arrival {
            let s = &mut self.state;
            s.arrivals[i] += 1;
            let kind = if s.x[i] + 1 > self.system.buffer_caps[i] {
                s.forced[i] += 1;
                EventKind::ForcedRejection
            } else if i == self.istar && !self.decision.admit_istar {
                s.overload[i] += 1;
                EventKind::OverloadRejection
            } else {
                s.x[i] += 1;
                EventKind::Arrival
            };
            s.next_arrival[i] += self.ia[i].sample(&mut self.ia_rng[i]) / self.system.lambda[i];
            kind
        } else {
            let s = &mut self.state;
            // pin the allocation to the epoch so rounding cannot accumulate
            s.alloc[i] = s.alloc[i].max(s.next_service_epoch[i]);
            s.x[i] -= 1;
            s.completions[i] += 1;
            s.next_service_epoch[i] += self.st[i].sample(&mut self.st_rng[i]) / self.system.mu[i];
            EventKind::Completion
        };
        self.policy.decide(&self.state.x, self.system, &mut self.decision);
        Ok(Some(Event { time, kind, class }))
    }

    /// Runs to `horizon`, streaming every event to `observer`.
    pub fn run_observed(mut self, horizon: f64, observer: &mut impl Observer) -> Result<SimState> {
        observer.on_start(&self.state, &self.decision);
        while let Some(event) = self.step(horizon)? {
            observer.on_event(&event, &self.state, &self.decision);
        }
        observer.on_finish(&self.state);
        Ok(self.state)
    }
}

/// One logged event with the post-event state and decision; the first
/// record (no event) is the initial snapshot.
#[derive(Clone, Debug)]
pub struct Record {
    pub event: Option<Event>,
    pub state: SimState,
    pub decision: PolicyDecision,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub horizon: f64,
    pub scale: f64,
    pub theta_n: Vec<f64>,
    pub x0: Vec<u64>,
    pub records: Vec<Record>,
    pub final_state: SimState,
}

impl Trajectory {
    /// MD-scaled queue lengths after record `k`.
    pub fn scaled_x(&self, k: usize) -> Vec<f64> {
        self.records[k].state.x.iter().map(|&v| v as f64 / self.scale).collect()
    }

    /// MD-scaled cumulative rejections after record `k`.
    pub fn scaled_rejections(&self, k: usize) -> Vec<f64> {
        let s = &self.records[k].state;
        (0..s.x.len()).map(|i| s.rejections(i) as f64 / self.scale).collect()
    }

    /// `theta^n . X~` after record `k`.
    pub fn workload(&self, k: usize) -> f64 {
        self.scaled_x(k).iter().zip(&self.theta_n).map(|(x, t)| x * t).sum()
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.records.iter().filter_map(|r| r.event.as_ref())
    }
}

#[derive(Default)]
struct Recorder {
    records: Vec<Record>,
    last: Option<SimState>,
}

impl Observer for Recorder {
    fn on_start(&mut self, state: &SimState, decision: &PolicyDecision) {
        self.records.push(Record {
            event: None,
            state: state.clone(),
            decision: decision.clone(),
        });
    }
    fn on_event(&mut self, event: &Event, state: &SimState, decision: &PolicyDecision) {
        self.records.push(Record {
            event: Some(*event),
            state: state.clone(),
            decision: decision.clone(),
        });
    }
    fn on_finish(&mut self, state: &SimState) {
        self.last = Some(state.clone());
    }
}

/// Simulates to `horizon` and keeps the full event log in memory.
pub fn run(system: &NthSystem, policy: &dyn Policy, horizon: f64, seed: u64) -> Result<Trajectory> {
    let mut rec = Recorder::default();
    let final_state = Engine::new(system, policy, seed).run_observed(horizon, &mut rec)?;
    Ok(Trajectory {
        horizon,
        scale: system.scale,
        theta_n: system.theta.clone(),
        x0: system.x0_counts.clone(),
        records: rec.records,
        final_state,
    })
}

/// Simulates to `horizon` without storing the trajectory.
pub fn run_observed(
    system: &NthSystem,
    policy: &dyn Policy,
    horizon: f64,
    seed: u64,
    observer: &mut impl Observer,
) -> Result<SimState> {
    Engine::new(system, policy, seed).run_observed(horizon, observer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::f1;
    use crate::model::{instantiate, Dist};

    /// Serves class 1 at a fixed rate whenever it is nonempty.
    struct Fixed(f64);

    impl Policy for Fixed {
        fn name(&self) -> &'static str {
            "fixed"
        }
        fn istar(&self) -> usize {
            0
        }
        fn decide(&self, x: &[u64], _s: &NthSystem, out: &mut PolicyDecision) {
            out.service[0] = if x[0] > 0 { self.0 } else { 0.0 };
            out.admit_istar = true;
        }
    }

    /// Critically loaded single class with deterministic renewals, `n = 1`.
    fn deterministic_single(rate: f64, x0: f64) -> NthSystem {
        let mut p = f1();
        let c = &mut p.classes[0];
        c.lambda = rate;
        c.mu = rate;
        c.var_ia = 0.0;
        c.var_st = 0.0;
        c.ia_dist = Some(Dist::Deterministic);
        c.st_dist = Some(Dist::Deterministic);
        c.buffer = 100.0;
        c.tilde_lambda = 0.0;
        c.tilde_mu = 0.0;
        instantiate(&p.with_x0(vec![x0]), 1).unwrap()
    }

    fn times_of(traj: &Trajectory, kind: EventKind) -> Vec<f64> {
        traj.events().filter(|e| e.kind == kind).map(|e| e.time).collect()
    }

    #[test]
    fn unit_renewal_arrivals() {
        let sys = deterministic_single(1.0, 0.0);
        let traj = run(&sys, &Fixed(0.0), 3.5, 1).unwrap();
        assert_eq!(times_of(&traj, EventKind::Arrival), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn full_service_completions() {
        let sys = deterministic_single(2.0, 2.0);
        assert_eq!(sys.x0_counts, vec![2]);
        let traj = run(&sys, &Fixed(1.0), 1.2, 1).unwrap();
        assert_eq!(times_of(&traj, EventKind::Completion), vec![0.5, 1.0]);
        assert_eq!(traj.final_state.alloc, vec![1.2]);
    }

    #[test]
    fn zero_service_never_completes() {
        let sys = deterministic_single(2.0, 2.0);
        let traj = run(&sys, &Fixed(0.0), 30.0, 1).unwrap();
        assert!(times_of(&traj, EventKind::Completion).is_empty());
        assert_eq!(traj.final_state.alloc, vec![0.0]);
    }

    #[test]
    fn half_rate_service_preserves_progress() {
        let sys = deterministic_single(2.0, 1.0);
        let traj = run(&sys, &Fixed(0.5), 1.2, 1).unwrap();
        assert_eq!(times_of(&traj, EventKind::Completion), vec![1.0]);
    }

    #[test]
    fn completions_precede_arrivals_at_ties() {
        let sys = deterministic_single(2.0, 2.0);
        let traj = run(&sys, &Fixed(1.0), 1.0, 1).unwrap();
        let kinds: Vec<EventKind> = traj.events().map(|e| e.kind).collect();
        use EventKind::*;
        assert_eq!(kinds, vec![Completion, Arrival, Completion, Arrival]);
    }

    #[test]
    fn zero_horizon_keeps_initial_snapshot_only() {
        let sys = instantiate(&f1(), 100).unwrap();
        let traj = run(&sys, &Fixed(1.0), 0.0, 3).unwrap();
        assert_eq!(traj.records.len(), 1);
        assert!(traj.records[0].event.is_none());
        assert_eq!(traj.final_state.t, 0.0);
    }

    #[test]
    fn forced_rejection_at_full_buffer() {
        let mut p = f1();
        p.classes[0].buffer = 0.5;
        let p = p.with_x0(vec![0.5]);
        let sys = instantiate(&p, 1).unwrap();
        assert_eq!(sys.buffer_caps, vec![0]);
        let traj = run(&sys, &Fixed(0.0), 20.0, 9).unwrap();
        assert!(traj.final_state.forced[0] > 0);
        assert_eq!(traj.final_state.x, vec![0]);
        assert!(traj.final_state.balance_holds(&traj.x0));
    }

    #[test]
    fn same_seed_same_path() {
        let sys = instantiate(&f1(), 100).unwrap();
        let a = run(&sys, &Fixed(1.0), 2.0, 11).unwrap();
        let b = run(&sys, &Fixed(1.0), 2.0, 11).unwrap();
        let c = run(&sys, &Fixed(1.0), 2.0, 12).unwrap();
        assert_eq!(a.final_state, b.final_state);
        assert_ne!(a.final_state, c.final_state);
        for r in &a.records {
            assert!(r.state.balance_holds(&a.x0));
        }
    }
}
