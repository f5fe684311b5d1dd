//! The one-dimensional differential game that governs the MD limit.
//!
//! The maximizer perturbs the workload by `psi1 - psi2` and pays the
//! quadratic rate `I`; the minimizer idles (`zeta`) and rejects (`rho`) to
//! keep the dynamics in `[0, D]`, paying `r` per unit rejected. The value is
//! finite iff `-y >= r/(4s)`, in which case it is given in closed form up to
//! the free boundary `beta0` and grows linearly with slope `r` above it.

mod play;
mod rate;

pub use play::{AboveBarrierCheck, GamePlay, PlayoutResult, PsiStar};
pub use rate::{
    class_weights, decompose, decomposition_constant, quadratic_action, rate_i, rate_j, recompose,
};

use crate::error::{Error, Result};
use crate::model::{require_valid, CheckScope, ModelParams};
use crate::numeric::{integrate_upper_sqrt_singular, integrate_with_breaks};
use crate::workload::WorkloadGeometry;

const QUAD_TOL: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct GameSolution {
    /// Limit drift of the workload, `sum theta_i (tilde_lambda_i - rho_i tilde_mu_i)`.
    pub y: f64,
    pub s1: f64,
    pub s2: f64,
    /// `(1/s1 + 1/s2)^{-1}`.
    pub s: f64,
    pub r: f64,
    pub istar: usize,
    /// Free boundary; `None` when the value is infinite.
    pub beta0: Option<f64>,
    pub finite: bool,
    pub geometry: WorkloadGeometry,
    /// `(w, V(w))` at `0`, the breakpoints of `h` below `beta0`, and `beta0`.
    knots: Vec<(f64, f64)>,
}

/// Solves the game: constants, free boundary and the value function.
pub fn solve_game(params: &ModelParams, eps0: f64) -> Result<GameSolution> {
    require_valid(params, CheckScope::Game)?;
    let geometry = WorkloadGeometry::new(params, eps0)?;
    let y: f64 = params
        .classes
        .iter()
        .map(|c| c.theta() * (c.tilde_lambda - c.rho() * c.tilde_mu))
        .sum();
    let s1 = 1.0
        / params
            .classes
            .iter()
            .map(|c| 2.0 * c.rho() * c.var_ia / c.mu)
            .sum::<f64>();
    let s2 = 1.0
        / params
            .classes
            .iter()
            .map(|c| 2.0 * c.rho() * c.var_st / c.mu)
            .sum::<f64>();
    let s = 1.0 / (1.0 / s1 + 1.0 / s2);
    let r = geometry.r;
    let finite = -y >= r / (4.0 * s);

    let mut sol = GameSolution {
        y,
        s1,
        s2,
        s,
        r,
        istar: geometry.istar,
        beta0: None,
        finite,
        geometry,
        knots: Vec::new(),
    };
    if !finite {
        return Ok(sol);
    }

    let target = -r * r / (4.0 * s) - r * y;
    let h_max = sol.geometry.h_max();
    let beta0 = if target > h_max {
        sol.geometry.total
    } else {
        sol.geometry.h_inverse(target.max(0.0))?
    };
    sol.beta0 = Some(beta0);

    let mut pts = vec![0.0];
    pts.extend(
        sol.geometry
            .breakpoints()
            .into_iter()
            .filter(|&w| w > 0.0 && w < beta0),
    );
    pts.push(beta0);
    let mut knots = vec![(0.0, 0.0)];
    let mut acc = 0.0;
    for w in pts.windows(2) {
        acc += integrate_with_breaks(|u| sol.slope_below(u), w[0], w[1], &[], QUAD_TOL)?;
        knots.push((w[1], acc));
    }
    knots.dedup_by(|a, b| a.0 == b.0);
    sol.knots = knots;
    Ok(sol)
}

impl GameSolution {
    fn require_finite(&self) -> Result<f64> {
        self.beta0.ok_or(Error::InfiniteValue)
    }

    pub fn total(&self) -> f64 {
        self.geometry.total
    }

    /// `y^2 - h(u)/s`, clamped at zero.
    fn radicand(&self, u: f64) -> f64 {
        (self.y * self.y - self.geometry.h_unchecked(u) / self.s).max(0.0)
    }

    /// `2s(-y - sqrt(y^2 - h(u)/s))`, the derivative of `V` below `beta0`.
    fn slope_below(&self, u: f64) -> f64 {
        2.0 * self.s * (-self.y - self.radicand(u).sqrt())
    }

    /// Derivative of `V` (right derivative at `beta0`).
    pub fn value_slope(&self, w: f64) -> Result<f64> {
        let beta0 = self.require_finite()?;
        if w < beta0 {
            Ok(self.slope_below(w))
        } else {
            Ok(self.r)
        }
    }

    /// Game value `V(x)` for `x` in `[0, D]`.
    pub fn value(&self, x: f64) -> Result<f64> {
        let beta0 = self.require_finite()?;
        if !(x >= 0.0 && x <= self.total()) {
            return Err(Error::domain("value", format!("x={x} outside [0, {}]", self.total())));
        }
        if x > beta0 {
            let vb = self.knots.last().unwrap().1;
            return Ok(vb + self.r * (x - beta0));
        }
        let k = self.knots.partition_point(|&(w, _)| w <= x) - 1;
        let (w0, v0) = self.knots[k];
        if w0 == x {
            return Ok(v0);
        }
        Ok(v0 + integrate_with_breaks(|u| self.slope_below(u), w0, x, &[], QUAD_TOL)?)
    }

    /// `tau*_x = int_0^x (y^2 - h(xi)/s)^{-1/2} d xi`, the time the driven
    /// state under `psi*_x` needs to reach zero.
    pub fn tau_star(&self, x: f64) -> Result<f64> {
        let beta0 = self.require_finite()?;
        if !(x >= 0.0 && x <= beta0) {
            return Err(Error::domain("tau_star", format!("x={x} outside [0, {beta0}]")));
        }
        // The radicand is nonincreasing and can vanish only at `beta0`, so
        // only the last piece needs the singular-endpoint treatment.
        let mut pts = vec![0.0];
        pts.extend(self.geometry.breakpoints().into_iter().filter(|&w| w > 0.0 && w < x));
        pts.push(x);
        let f = |u: f64| 1.0 / self.radicand(u).sqrt();
        let tol = 1e-11 / pts.len() as f64;
        let mut sum = 0.0;
        for w in pts.windows(2) {
            sum += integrate_upper_sqrt_singular(&f, w[0], w[1], tol)?;
        }
        Ok(sum)
    }

    /// Threshold for overload rejections, `min(beta0, theta . a)`.
    pub fn a_star(&self) -> f64 {
        match self.beta0 {
            Some(b) => b.min(self.geometry.theta_a),
            None => self.geometry.theta_a,
        }
    }

    /// Default termination horizon `4 (tau*_{beta0} + D / |y + r/(2s)| + 1)`.
    /// The middle term is dropped when `psi_sharp` gives zero net drift.
    pub fn default_horizon(&self) -> Result<f64> {
        let beta0 = self.require_finite()?;
        let drift = self.y + self.r / (2.0 * self.s);
        let travel = if drift.abs() < 1e-12 {
            0.0
        } else {
            self.total() / drift.abs()
        };
        Ok(4.0 * (self.tau_star(beta0)? + travel + 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{f1, f1_with_buffer, f1_with_drift, f2};

    /// Hand antiderivative of `0.5 (1 - sqrt(1 - 4u))` for F1.
    fn f1_value_oracle(x: f64) -> f64 {
        let x = x.min(0.25);
        0.5 * (x + ((1.0 - 4.0 * x).powf(1.5) - 1.0) / 6.0)
    }

    #[test]
    fn f1_constants() {
        let g = solve_game(&f1(), 0.1).unwrap();
        assert_eq!(g.y, -1.0);
        assert_eq!(g.s1, 0.5);
        assert_eq!(g.s2, 0.5);
        assert_eq!(g.s, 0.25);
        assert_eq!(g.r, 0.5);
        assert!(g.finite);
        assert_eq!(g.beta0, Some(0.25));
    }

    #[test]
    fn f1_values_match_antiderivative() {
        let g = solve_game(&f1(), 0.1).unwrap();
        for x in [0.0, 0.05, 0.1, 0.2, 0.25] {
            assert!((g.value(x).unwrap() - f1_value_oracle(x)).abs() < 1e-12, "x={x}");
        }
        assert!((g.value(0.25).unwrap() - 1.0 / 24.0).abs() < 1e-12);
        assert!((g.value(0.5).unwrap() - 1.0 / 6.0).abs() < 1e-12);
        assert!((g.value(0.1).unwrap() - 0.0053965).abs() < 1e-7);
    }

    #[test]
    fn beta0_second_branch() {
        let g = solve_game(&f1_with_buffer(0.2), 0.01).unwrap();
        assert_eq!(g.beta0, Some(0.2));
    }

    #[test]
    fn infinite_value() {
        let g = solve_game(&f1_with_drift(-0.1), 0.1).unwrap();
        assert!(!g.finite);
        assert_eq!(g.beta0, None);
        assert!(matches!(g.value(0.1), Err(Error::InfiniteValue)));
    }

    #[test]
    fn f2_constants() {
        let g = solve_game(&f2(), 0.1).unwrap();
        assert!((g.y + 1.5).abs() < 1e-15);
        assert!((g.s - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(g.r, 1.0);
        assert_eq!(g.istar, 0);
        assert!((g.beta0.unwrap() - 0.375).abs() < 1e-12);
        assert!((g.a_star() - 0.375).abs() < 1e-12);
    }

    #[test]
    fn value_is_increasing_and_convex_below_beta0() {
        for p in [f1(), f2()] {
            let g = solve_game(&p, 0.1).unwrap();
            let b = g.beta0.unwrap();
            let vals: Vec<f64> = (0..=200).map(|k| g.value(b * k as f64 / 200.0).unwrap()).collect();
            let slopes: Vec<f64> = vals.windows(2).map(|w| w[1] - w[0]).collect();
            assert!(slopes.iter().all(|&d| d > 0.0));
            assert!(slopes.windows(2).all(|w| w[1] >= w[0] - 1e-14));
        }
    }

    #[test]
    fn smooth_fit_slope_at_beta0() {
        for p in [f1(), f2()] {
            let g = solve_game(&p, 0.1).unwrap();
            let b = g.beta0.unwrap();
            let left = g.value_slope(b - 1e-14).unwrap();
            let formula = 2.0 * g.s * (-g.y - (g.y + g.r / (2.0 * g.s)).abs());
            assert!((left - formula).abs() < 1e-6, "{left} vs {formula}");
            assert!(left <= g.r + 1e-12);
        }
    }

    #[test]
    fn radicand_nonnegative_below_beta0() {
        let g = solve_game(&f2(), 0.1).unwrap();
        let b = g.beta0.unwrap();
        for k in 0..=1000 {
            let u = b * k as f64 / 1000.0;
            assert!(g.y * g.y - g.geometry.h(u).unwrap() / g.s >= -1e-12);
        }
    }

    #[test]
    fn tau_star_f1() {
        let g = solve_game(&f1(), 0.1).unwrap();
        assert!((g.tau_star(0.25).unwrap() - 0.5).abs() < 1e-7);
        let expected = 0.5 * (1.0 - 0.6f64.sqrt());
        assert!((g.tau_star(0.1).unwrap() - expected).abs() < 1e-10);
        assert_eq!(g.tau_star(0.0).unwrap(), 0.0);
    }

    #[test]
    fn default_horizon_guards_zero_drift() {
        let g = solve_game(&f1(), 0.1).unwrap();
        assert!((g.default_horizon().unwrap() - 6.0).abs() < 1e-6);
        let g2 = solve_game(&f2(), 0.1).unwrap();
        let h = g2.default_horizon().unwrap();
        assert!(h.is_finite() && h > 4.0);
    }
}
