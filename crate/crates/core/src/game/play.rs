//! Playing the game: reference maximizer paths, the barrier strategy of
//! the minimizer, and exact cost evaluation along piecewise-linear plays.

use rayon::prelude::*;

use super::rate::rate_i;
use super::GameSolution;
use crate::error::{Error, Result};
use crate::paths::{skorohod_map, union_grid, PLPath};

/// One play of the game on `[0, t_end]`.
#[derive(Clone, Debug)]
pub struct GamePlay {
    pub x: f64,
    pub beta: f64,
    pub psi1: PLPath,
    pub psi2: PLPath,
    /// Idling control (lower pushing).
    pub zeta: PLPath,
    /// Rejection control (upper pushing).
    pub rho: PLPath,
    pub phi: PLPath,
    pub t_end: f64,
}

/// Maximizer path `psi*_x` that drives the state to zero along the
/// characteristic of `V`, with the time it takes.
#[derive(Clone, Debug)]
pub struct PsiStar {
    pub psi1: PLPath,
    pub psi2: PLPath,
    pub omega: PLPath,
    /// Hitting time of zero by `x + y t + omega(t)`.
    pub hitting_time: f64,
    /// The same time by quadrature.
    pub tau_quadrature: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlayoutResult {
    pub value: f64,
    pub best_candidate: usize,
    pub best_time: f64,
    /// Per-candidate maximum over the time grid.
    pub per_candidate: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AboveBarrierCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// Crossing time of `beta0 + delta`; `None` if no crossing before `t_max`.
    pub tau: Option<f64>,
}

/// Running integral of a piecewise-linear integrand, exact on every piece.
struct Antiderivative {
    grid: Vec<f64>,
    cum: Vec<f64>,
    /// Integrand at the left and right end of each piece.
    ends: Vec<(f64, f64)>,
}

impl Antiderivative {
    fn eval(&self, t: f64) -> f64 {
        if t <= self.grid[0] {
            return 0.0;
        }
        let k = self.grid.partition_point(|&g| g <= t);
        if k >= self.grid.len() {
            return *self.cum.last().unwrap();
        }
        let k = k - 1;
        let (t0, t1) = (self.grid[k], self.grid[k + 1]);
        let (f0, f1) = self.ends[k];
        let ft = f0 + (f1 - f0) * (t - t0) / (t1 - t0);
        self.cum[k] + 0.5 * (t - t0) * (f0 + ft)
    }
}

impl GameSolution {
    fn require_beta0(&self) -> Result<f64> {
        self.beta0.ok_or(Error::InfiniteValue)
    }

    /// `psi#(t) = (r t / (2 s1), -r t / (2 s2))` on `[0, T]`.
    pub fn psi_sharp(&self, t_end: f64) -> Result<(PLPath, PLPath)> {
        self.require_beta0()?;
        Ok((
            PLPath::linear(0.0, self.r / (2.0 * self.s1), t_end),
            PLPath::linear(0.0, -self.r / (2.0 * self.s2), t_end),
        ))
    }

    /// Integrates `omega' = -y - sqrt(y^2 - h(x + y t + omega)/s)` from
    /// `omega(0) = 0` with classical RK4 until the driven state reaches 0.
    pub fn psi_star(&self, x: f64) -> Result<PsiStar> {
        let beta0 = self.require_beta0()?;
        if !(x >= 0.0 && x < beta0) {
            return Err(Error::domain("psi_star", format!("x={x} outside [0, {beta0})")));
        }
        let tau_quadrature = self.tau_star(x)?;
        if x == 0.0 {
            let p = PLPath::point(0.0);
            return Ok(PsiStar {
                psi1: p.clone(),
                psi2: p.clone(),
                omega: p,
                hitting_time: 0.0,
                tau_quadrature,
            });
        }
        let y = self.y;
        let rhs = |t: f64, w: f64| {
            let z = (x + y * t + w).clamp(0.0, self.total());
            -y - (y * y - self.geometry.h_unchecked(z) / self.s).max(0.0).sqrt()
        };
        let dt = 1e-4 * tau_quadrature;
        let max_steps = 100_000_000usize;
        let mut grid = vec![0.0];
        let mut omega = vec![0.0];
        let (mut t, mut w) = (0.0f64, 0.0f64);
        let mut hit = None;
        for _ in 0..max_steps {
            let k1 = rhs(t, w);
            let k2 = rhs(t + 0.5 * dt, w + 0.5 * dt * k1);
            let k3 = rhs(t + 0.5 * dt, w + 0.5 * dt * k2);
            let k4 = rhs(t + dt, w + dt * k3);
            let w_next = w + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            let t_next = t + dt;
            let z_now = x + y * t + w;
            let z_next = x + y * t_next + w_next;
            if z_next <= 0.0 {
                let frac = z_now / (z_now - z_next);
                let th = t + frac * dt;
                if th > t {
                    grid.push(th);
                    omega.push(-x - y * th);
                }
                hit = Some(th);
                break;
            }
            t = t_next;
            w = w_next;
            grid.push(t);
            omega.push(w);
        }
        let hitting_time =
            hit.ok_or_else(|| Error::Numeric(format!("psi_star({x}) did not reach zero")))?;
        let omega = PLPath::new(grid, omega)?;
        let psi1 = omega.map(|v| self.s / self.s1 * v);
        let psi2 = omega.map(|v| -self.s / self.s2 * v);
        Ok(PsiStar {
            psi1,
            psi2,
            omega,
            hitting_time,
            tau_quadrature,
        })
    }

    /// The `beta`-barrier response to `psi`: the Skorokhod map on
    /// `[0, beta]` of `x + y t + psi1 - psi2`.
    pub fn barrier_strategy(&self, beta: f64, psi1: &PLPath, psi2: &PLPath, x: f64) -> Result<GamePlay> {
        let d = self.total();
        if !(beta > 0.0 && beta <= d) {
            return Err(Error::domain("barrier_strategy", format!("beta={beta} outside (0, {d}]")));
        }
        if !(x >= 0.0 && x <= d) {
            return Err(Error::domain("barrier_strategy", format!("x={x} outside [0, {d}]")));
        }
        let t_end = psi1.end().min(psi2.end());
        let grid: Vec<f64> = union_grid(&[psi1.grid(), psi2.grid()])
            .into_iter()
            .filter(|&t| t <= t_end)
            .collect();
        let values = grid
            .iter()
            .map(|&t| x + self.y * t + psi1.eval_unchecked(t) - psi2.eval_unchecked(t))
            .collect();
        let omega = PLPath::new(grid, values)?;
        let refl = skorohod_map(&omega, 0.0, beta)?;
        Ok(GamePlay {
            x,
            beta,
            psi1: psi1.clone(),
            psi2: psi2.clone(),
            zeta: refl.eta1,
            rho: refl.eta2,
            phi: refl.phi,
            t_end,
        })
    }

    /// `int h(phi(t)) dt` as a running integral, with the breakpoints of `h`
    /// crossed by `phi` inserted so the integrand is linear on every piece.
    fn holding_antiderivative(&self, phi: &PLPath) -> Antiderivative {
        let bps = self.geometry.breakpoints();
        let g = phi.grid();
        let v = phi.values();
        let mut grid = vec![g[0]];
        let mut cum = vec![0.0];
        let mut ends = Vec::with_capacity(g.len());
        let mut acc = 0.0;
        let h = |w: f64| self.geometry.h_unchecked(w);
        for k in 0..g.len().saturating_sub(1) {
            let (t0, t1, v0, v1) = (g[k], g[k + 1], v[k], v[k + 1]);
            let mut cuts: Vec<f64> = bps
                .iter()
                .filter(|&&b| (b > v0.min(v1)) && (b < v0.max(v1)))
                .map(|&b| t0 + (t1 - t0) * (b - v0) / (v1 - v0))
                .filter(|&t| t > t0 && t < t1)
                .collect();
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut prev_t = t0;
            let mut prev_f = h(v0);
            for t in cuts.into_iter().chain(std::iter::once(t1)) {
                let f = if t == t1 {
                    h(v1)
                } else {
                    h(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
                };
                acc += 0.5 * (t - prev_t) * (prev_f + f);
                ends.push((prev_f, f));
                grid.push(t);
                cum.push(acc);
                prev_t = t;
                prev_f = f;
            }
        }
        Antiderivative { grid, cum, ends }
    }

    /// `int_0^T h(phi) dt + r rho(T) - I(T, psi)` at `T = play.t_end`.
    pub fn cost(&self, play: &GamePlay) -> Result<f64> {
        Ok(self.cost_at(play, &[play.t_end])?[0])
    }

    /// The cost of a play stopped at each of `times` (all within the play).
    pub fn cost_at(&self, play: &GamePlay, times: &[f64]) -> Result<Vec<f64>> {
        let holding = self.holding_antiderivative(&play.phi);
        times
            .iter()
            .map(|&t| {
                if !(t >= 0.0 && t <= play.t_end) {
                    return Err(Error::domain(
                        "cost",
                        format!("T={t} outside [0, {}]", play.t_end),
                    ));
                }
                let rate = rate_i(self.s1, self.s2, &play.psi1, &play.psi2, t)?;
                Ok(holding.eval(t) + self.r * play.rho.eval(t)? - rate)
            })
            .collect()
    }

    /// Maximum over candidates and termination times of the cost against
    /// the `beta`-barrier. Candidates shorter than the time grid are held
    /// constant; candidates are evaluated in parallel and reduced in order.
    pub fn playout_sup(
        &self,
        x: f64,
        beta: f64,
        family: &[(PLPath, PLPath)],
        times: &[f64],
    ) -> Result<PlayoutResult> {
        if family.is_empty() {
            return Err(Error::domain("playout_sup", "empty candidate family"));
        }
        if times.is_empty() {
            return Err(Error::domain("playout_sup", "empty time grid"));
        }
        let t_max = times.iter().copied().fold(0.0, f64::max);
        let rows: Vec<Result<(f64, f64)>> = family
            .par_iter()
            .map(|(p1, p2)| {
                let play =
                    self.barrier_strategy(beta, &p1.extend_constant(t_max), &p2.extend_constant(t_max), x)?;
                let costs = self.cost_at(&play, times)?;
                Ok(costs
                    .into_iter()
                    .zip(times)
                    .fold((f64::NEG_INFINITY, 0.0), |best, (c, &t)| {
                        if c > best.0 {
                            (c, t)
                        } else {
                            best
                        }
                    }))
            })
            .collect();
        let mut per_candidate = Vec::with_capacity(rows.len());
        let mut best = (f64::NEG_INFINITY, 0usize, 0.0);
        for (i, row) in rows.into_iter().enumerate() {
            let (c, t) = row?;
            per_candidate.push(c);
            if c > best.0 {
                best = (c, i, t);
            }
        }
        Ok(PlayoutResult {
            value: best.0,
            best_candidate: best.1,
            best_time: best.2,
            per_candidate,
        })
    }

    /// Checks that, playing `psi#` from `x > beta0 + delta` against the
    /// minimizer controls `(zeta, rho)`, the cost accrued until the dynamics
    /// cross `beta0 + delta` strictly exceeds `r (x - beta0 - delta)`. With no
    /// crossing before `t_max` the comparison is made at `t_max`.
    pub fn check_above_barrier(
        &self,
        x: f64,
        delta: f64,
        zeta: &PLPath,
        rho: &PLPath,
        t_max: f64,
    ) -> Result<AboveBarrierCheck> {
        let beta0 = self.require_beta0()?;
        let level = beta0 + delta;
        if !(delta > 0.0 && x > level && x <= self.total()) {
            return Err(Error::domain(
                "check_above_barrier",
                format!("need beta0 + delta < x <= D, got x={x}, beta0 + delta={level}"),
            ));
        }
        let gap = x - level;
        if !(rho.first_value() - zeta.first_value() < gap) {
            return Err(Error::domain(
                "check_above_barrier",
                format!(
                    "initial rejection {} reaches the level (gap {gap})",
                    rho.first_value() - zeta.first_value()
                ),
            ));
        }
        if zeta.start() != 0.0 || rho.start() != 0.0 {
            return Err(Error::domain("check_above_barrier", "controls must start at t = 0"));
        }
        let zeta = zeta.extend_constant(t_max);
        let rho = rho.extend_constant(t_max);
        let (p1, p2) = self.psi_sharp(t_max)?;
        let drift = self.y + p1.last_value() / t_max - p2.last_value() / t_max;
        let grid: Vec<f64> = union_grid(&[zeta.grid(), rho.grid(), p1.grid()])
            .into_iter()
            .filter(|&t| t <= t_max)
            .collect();
        let values: Vec<f64> = grid
            .iter()
            .map(|&t| x + drift * t + zeta.eval_unchecked(t) - rho.eval_unchecked(t))
            .collect();

        // first crossing of the level
        let mut tau = None;
        for k in 0..values.len() {
            if values[k] <= level {
                tau = Some(if k == 0 {
                    grid[0]
                } else {
                    let (v0, v1) = (values[k - 1], values[k]);
                    grid[k - 1] + (grid[k] - grid[k - 1]) * (v0 - level) / (v0 - v1)
                });
                break;
            }
        }
        let stop = tau.unwrap_or(t_max);
        let phi = PLPath::new(grid, values)?.truncate(stop.max(f64::MIN_POSITIVE))?;
        if phi.values().iter().any(|&v| v > self.total()) {
            return Err(Error::domain(
                "check_above_barrier",
                "dynamics leave [0, D] before crossing",
            ));
        }
        let holding = self.holding_antiderivative(&phi).eval(stop);
        let lhs = holding + self.r * rho.eval(stop)? - rate_i(self.s1, self.s2, &p1, &p2, stop)?;
        let rhs = self.r * gap;
        Ok(AboveBarrierCheck {
            holds: lhs > rhs,
            lhs,
            rhs,
            tau,
        })
    }
}
