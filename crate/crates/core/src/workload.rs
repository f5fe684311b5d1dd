//! Workload geometry: the effective holding cost `h`, the cost-minimizing
//! curve `gamma`, its interior approximation `gamma_a`, and the rejection
//! constant `r` with its class `i*`.
//!
//! Classes are assumed labeled so that `hbar_i mu_i` is nonincreasing; the
//! cheapest way to hold a given workload fills class `I` first, then
//! `I-1`, and so on.

use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadGeometry {
    pub theta: Vec<f64>,
    pub hold: Vec<f64>,
    pub buffers: Vec<f64>,
    pub rho: Vec<f64>,
    /// `theta . D`.
    pub total: f64,
    /// `hat_d[j] = sum_{i >= j} theta_i D_i` over 0-based classes, so
    /// `hat_d[0] = D` and `hat_d[I] = 0`.
    pub hat_d: Vec<f64>,
    /// Rejection class (0-based).
    pub istar: usize,
    pub r: f64,
    pub eps0: f64,
    /// `a_i = D_i - 3 eps0`.
    pub a: Vec<f64>,
    pub hat_a: Vec<f64>,
    /// `theta . a`.
    pub theta_a: f64,
}

fn partial_sums(theta: &[f64], caps: &[f64]) -> Vec<f64> {
    let n = theta.len();
    let mut out = vec![0.0; n + 1];
    for j in (0..n).rev() {
        out[j] = out[j + 1] + theta[j] * caps[j];
    }
    out
}

/// Greedy fill of workload `w` against capacities `caps`, whose partial
/// sums are `hat`.
fn fill(theta: &[f64], caps: &[f64], hat: &[f64], w: f64) -> Vec<f64> {
    let n = theta.len();
    let mut out = vec![0.0; n];
    for j in (0..n).rev() {
        if w >= hat[j] {
            continue;
        }
        // classes after j are full, class j is partial
        for i in j + 1..n {
            out[i] = caps[i];
        }
        out[j] = ((w - hat[j + 1]) / theta[j]).min(caps[j]);
        return out;
    }
    caps.to_vec()
}

impl WorkloadGeometry {
    pub fn new(params: &ModelParams, eps0: f64) -> Result<Self> {
        let theta = params.theta();
        let buffers = params.buffers();
        let min_d = buffers.iter().copied().fold(f64::INFINITY, f64::min);
        if !(eps0 > 0.0 && eps0 < min_d / 4.0) {
            return Err(Error::domain(
                "WorkloadGeometry::new",
                format!("eps0={eps0} must lie in (0, min D_i / 4 = {})", min_d / 4.0),
            ));
        }
        let hold: Vec<f64> = params.classes.iter().map(|c| c.hold_cost).collect();
        let hat_d = partial_sums(&theta, &buffers);
        let (istar, r) = params
            .classes
            .iter()
            .map(|c| c.reject_cost * c.mu)
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best });
        let a: Vec<f64> = buffers.iter().map(|d| d - 3.0 * eps0).collect();
        let hat_a = partial_sums(&theta, &a);
        Ok(WorkloadGeometry {
            total: hat_d[0],
            theta_a: hat_a[0],
            theta,
            hold,
            buffers,
            rho: params.rho(),
            hat_d,
            istar,
            r,
            eps0,
            a,
            hat_a,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.theta.len()
    }

    fn check_range(&self, op: &'static str, w: f64, hi: f64) -> Result<()> {
        if !(w >= 0.0 && w <= hi) {
            return Err(Error::domain(op, format!("w={w} outside [0, {hi}]")));
        }
        Ok(())
    }

    pub fn dot_theta(&self, x: &[f64]) -> f64 {
        self.theta.iter().zip(x).map(|(t, v)| t * v).sum()
    }

    pub fn dot_hold(&self, x: &[f64]) -> f64 {
        self.hold.iter().zip(x).map(|(h, v)| h * v).sum()
    }

    /// Breakpoints of `h` in increasing order, `0` and `D` included.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.hat_d.iter().rev().copied().collect()
    }

    /// Minimal holding cost rate at workload `w`.
    pub fn h(&self, w: f64) -> Result<f64> {
        self.check_range("h", w, self.total)?;
        Ok(self.h_unchecked(w))
    }

    pub(crate) fn h_unchecked(&self, w: f64) -> f64 {
        let n = self.num_classes();
        let w = w.clamp(0.0, self.total);
        let mut cost = 0.0;
        for j in (0..n).rev() {
            if w < self.hat_d[j] {
                return cost + self.hold[j] * (w - self.hat_d[j + 1]) / self.theta[j];
            }
            cost += self.hold[j] * self.buffers[j];
        }
        cost
    }

    /// Slope of `h` on the piece to the right of `w`.
    pub fn h_right_slope(&self, w: f64) -> f64 {
        let n = self.num_classes();
        for j in (0..n).rev() {
            if w < self.hat_d[j] {
                return self.hold[j] / self.theta[j];
            }
        }
        self.hold[0] / self.theta[0]
    }

    pub fn h_max(&self) -> f64 {
        self.dot_hold(&self.buffers)
    }

    /// Inverse of `h` on `[0, h(D)]`.
    pub fn h_inverse(&self, v: f64) -> Result<f64> {
        let hmax = self.h_max();
        if !(v >= 0.0 && v <= hmax) {
            return Err(Error::domain("h_inverse", format!("v={v} outside [0, {hmax}]")));
        }
        let n = self.num_classes();
        let mut base = 0.0;
        for j in (0..n).rev() {
            let top = base + self.hold[j] * self.buffers[j];
            if v <= top || j == 0 {
                let w = self.hat_d[j + 1] + (v - base) * self.theta[j] / self.hold[j];
                return Ok(w.min(self.hat_d[j]));
            }
            base = top;
        }
        unreachable!()
    }

    /// Cost-minimizing queue configuration holding workload `w`.
    pub fn gamma(&self, w: f64) -> Result<Vec<f64>> {
        self.check_range("gamma", w, self.total)?;
        Ok(fill(&self.theta, &self.buffers, &self.hat_d, w))
    }

    /// Interior approximation of `gamma` that keeps every class at or below
    /// `a_i` up to workload `theta . a`, then interpolates linearly to `D`.
    pub fn gamma_a(&self, w: f64) -> Result<Vec<f64>> {
        self.check_range("gamma_a", w, self.total)?;
        Ok(self.gamma_a_unchecked(w))
    }

    pub(crate) fn gamma_a_unchecked(&self, w: f64) -> Vec<f64> {
        let w = w.clamp(0.0, self.total);
        if w < self.theta_a {
            return fill(&self.theta, &self.a, &self.hat_a, w);
        }
        let lam = (w - self.theta_a) / (self.total - self.theta_a);
        self.a
            .iter()
            .zip(&self.buffers)
            .map(|(a, d)| a + lam * (d - a))
            .collect()
    }

    /// `hbar . gamma_a(w)` on `[0, theta . a]`.
    pub fn h_a(&self, w: f64) -> Result<f64> {
        self.check_range("h_a", w, self.theta_a)?;
        Ok(self.dot_hold(&self.gamma_a_unchecked(w)))
    }

    /// `sup_{[0, theta . a]} |h_a - h|` on a 10^4-point grid with every
    /// breakpoint of both functions inserted (exact for these piecewise
    /// linear functions).
    pub fn omega1(&self) -> f64 {
        let top = self.theta_a;
        let mut grid: Vec<f64> = (0..=10_000).map(|k| top * k as f64 / 10_000.0).collect();
        grid.extend(self.hat_a.iter().copied().filter(|&w| w <= top));
        grid.extend(self.hat_d.iter().copied().filter(|&w| w <= top));
        grid.iter()
            .map(|&w| (self.dot_hold(&self.gamma_a_unchecked(w)) - self.h_unchecked(w)).abs())
            .fold(0.0, f64::max)
    }
}
