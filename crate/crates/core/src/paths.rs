//! Piecewise-linear paths and the two-sided Skorokhod map on `[a, b]`.
//!
//! The map is solved exactly: on each linear piece of the input the
//! constrained path either moves freely or is held at an endpoint, and at
//! most one regime switch can occur per piece. Switch times are inserted
//! into the output grid.

use crate::error::{Error, Result};

/// Continuous path, linear between grid points.
#[derive(Clone, Debug, PartialEq)]
pub struct PLPath {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl PLPath {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid.len() != values.len() {
            return Err(Error::domain(
                "PLPath::new",
                format!("grid has {} points, values {}", grid.len(), values.len()),
            ));
        }
        if grid.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::domain("PLPath::new", "nonfinite grid point or value"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("PLPath::new", "grid must be strictly increasing"));
        }
        Ok(PLPath { grid, values })
    }

    /// Single-point path at `t = 0`.
    pub fn point(value: f64) -> Self {
        PLPath {
            grid: vec![0.0],
            values: vec![value],
        }
    }

    pub fn zero(t_end: f64) -> Self {
        Self::linear(0.0, 0.0, t_end)
    }

    /// `start + slope * t` on `[0, t_end]`.
    pub fn linear(start: f64, slope: f64, t_end: f64) -> Self {
        if t_end <= 0.0 {
            return Self::point(start);
        }
        PLPath {
            grid: vec![0.0, t_end],
            values: vec![start, start + slope * t_end],
        }
    }

    /// Samples `f` on the given grid.
    pub fn from_fn(grid: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.grid[0]
    }

    pub fn end(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    pub fn first_value(&self) -> f64 {
        self.values[0]
    }

    pub fn last_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    fn contains(&self, t: f64) -> bool {
        t >= self.start() && t <= self.end()
    }

    /// Linear interpolation; `t` outside the grid is an error.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !self.contains(t) {
            return Err(Error::domain(
                "PLPath::eval",
                format!("t={t} outside [{}, {}]", self.start(), self.end()),
            ));
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        let k = self.grid.partition_point(|&g| g <= t);
        if k == 0 {
            return self.values[0];
        }
        if k == self.grid.len() {
            return *self.values.last().unwrap();
        }
        let (t0, t1) = (self.grid[k - 1], self.grid[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        if t == t0 {
            return v0;
        }
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Re-expresses the path on `grid`, which must lie within the path's
    /// domain and contain all of its breakpoints to be lossless.
    pub fn resample(&self, grid: &[f64]) -> Result<PLPath> {
        let values = grid
            .iter()
            .map(|&t| self.eval(t))
            .collect::<Result<Vec<_>>>()?;
        PLPath::new(grid.to_vec(), values)
    }

    /// Holds the last value constant up to `t_end` (no-op if already longer).
    pub fn extend_constant(&self, t_end: f64) -> PLPath {
        let mut out = self.clone();
        if t_end > self.end() {
            out.grid.push(t_end);
            out.values.push(self.last_value());
        }
        out
    }

    /// Restriction to `[start, t_end]`, with `t_end` inserted as a breakpoint.
    pub fn truncate(&self, t_end: f64) -> Result<PLPath> {
        let v = self.eval(t_end)?;
        let mut grid: Vec<f64> = self.grid.iter().copied().filter(|&t| t < t_end).collect();
        let mut values: Vec<f64> = self.values[..grid.len()].to_vec();
        grid.push(t_end);
        values.push(v);
        PLPath::new(grid, values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PLPath {
        PLPath {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise linear combination `sum c_k p_k` on the union grid over
    /// the common domain.
    pub fn combine(terms: &[(f64, &PLPath)]) -> Result<PLPath> {
        let grids: Vec<&[f64]> = terms.iter().map(|(_, p)| p.grid()).collect();
        let grid = union_grid(&grids);
        let end = terms.iter().map(|(_, p)| p.end()).fold(f64::INFINITY, f64::min);
        let grid: Vec<f64> = grid.into_iter().filter(|&t| t <= end).collect();
        let values = grid
            .iter()
            .map(|&t| terms.iter().map(|(c, p)| c * p.eval_unchecked(t)).sum())
            .collect();
        PLPath::new(grid, values)
    }

    /// Slopes of the linear pieces.
    pub fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]))
    }

    /// `sup |self - other|` over the common domain (attained on the union grid).
    pub fn sup_distance(&self, other: &PLPath) -> f64 {
        let grid = union_grid(&[self.grid(), other.grid()]);
        let end = self.end().min(other.end());
        grid.iter()
            .filter(|&&t| t <= end)
            .map(|&t| (self.eval_unchecked(t) - other.eval_unchecked(t)).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_nondecreasing(&self, tol: f64) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0] - tol)
    }
}

/// Sorted union of several grids with exact duplicates removed.
pub fn union_grid(grids: &[&[f64]]) -> Vec<f64> {
    let mut all: Vec<f64> = grids.iter().flat_map(|g| g.iter().copied()).collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.dedup();
    all
}

/// Output of the Skorokhod map: the constrained path and the lower and
/// upper pushing processes, all on the same (refined) grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ReflectionTriple {
    pub phi: PLPath,
    /// Pushing at the lower endpoint; `eta1(0)` holds any initial jump.
    pub eta1: PLPath,
    /// Pushing at the upper endpoint; `eta2(0)` holds any initial jump.
    pub eta2: PLPath,
}

impl ReflectionTriple {
    pub fn grid(&self) -> &[f64] {
        self.phi.grid()
    }
}

/// Two-sided Skorokhod map `Gamma_[a,b]` of a piecewise-linear input.
pub fn skorohod_map(omega: &PLPath, a: f64, b: f64) -> Result<ReflectionTriple> {
    if !(a < b) {
        return Err(Error::domain("skorohod_map", format!("need a < b, got [{a}, {b}]")));
    }
    let g = omega.grid();
    let w = omega.values();
    let mut grid = Vec::with_capacity(g.len() + 8);
    let mut phi = Vec::with_capacity(g.len() + 8);
    let mut eta1 = Vec::with_capacity(g.len() + 8);
    let mut eta2 = Vec::with_capacity(g.len() + 8);

    let w0 = w[0];
    let (mut p, mut e1, mut e2) = if w0 < a {
        (a, a - w0, 0.0)
    } else if w0 > b {
        (b, 0.0, w0 - b)
    } else {
        (w0, 0.0, 0.0)
    };
    grid.push(g[0]);
    phi.push(p);
    eta1.push(e1);
    eta2.push(e2);

    for k in 0..g.len() - 1 {
        let (t0, t1) = (g[k], g[k + 1]);
        let dw = w[k + 1] - w[k];
        if dw > 0.0 {
            let room = b - p;
            if dw <= room {
                p += dw;
            } else {
                if room > 0.0 {
                    let th = t0 + (t1 - t0) * room / dw;
                    if th > t0 && th < t1 {
                        grid.push(th);
                        phi.push(b);
                        eta1.push(e1);
                        eta2.push(e2);
                    }
                }
                p = b;
                e2 += dw - room;
            }
        } else if dw < 0.0 {
            let room = p - a;
            if -dw <= room {
                p += dw;
            } else {
                if room > 0.0 {
                    let th = t0 + (t1 - t0) * room / (-dw);
                    if th > t0 && th < t1 {
                        grid.push(th);
                        phi.push(a);
                        eta1.push(e1);
                        eta2.push(e2);
                    }
                }
                p = a;
                e1 += -dw - room;
            }
        }
        grid.push(t1);
        phi.push(p.clamp(a, b));
        eta1.push(e1);
        eta2.push(e2);
    }

    Ok(ReflectionTriple {
        phi: PLPath::new(grid.clone(), phi)?,
        eta1: PLPath::new(grid.clone(), eta1)?,
        eta2: PLPath::new(grid, eta2)?,
    })
}

/// `||Gamma(omega) - Gamma(tilde)||_T / ||omega - tilde||_T`, the sup taken
/// over all three output components. Identical inputs give 0.
pub fn lipschitz_probe(omega: &PLPath, tilde: &PLPath, a: f64, b: f64) -> Result<f64> {
    let din = omega.sup_distance(tilde);
    if din == 0.0 {
        return Ok(0.0);
    }
    let x = skorohod_map(omega, a, b)?;
    let y = skorohod_map(tilde, a, b)?;
    let dout = x
        .phi
        .sup_distance(&y.phi)
        .max(x.eta1.sup_distance(&y.eta1))
        .max(x.eta2.sup_distance(&y.eta2));
    Ok(dout / din)
}

/// Modulus of continuity `sup { |f(s) - f(t)| : s, t in [t0, T], |s - t| <= delta }`.
///
/// For a piecewise-linear path the window range `max - min` is convex in the
/// window position between events where an endpoint crosses a grid point, so
/// only those positions need checking.
pub fn osc(path: &PLPath, delta: f64, t_end: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::domain("osc", "delta must be positive"));
    }
    if !path.contains(t_end) {
        return Err(Error::domain("osc", format!("T={t_end} outside the grid")));
    }
    let t0 = path.start();
    let g = path.grid();
    let window_range = |lo: f64, hi: f64| {
        let mut mx = path.eval_unchecked(lo).max(path.eval_unchecked(hi));
        let mut mn = path.eval_unchecked(lo).min(path.eval_unchecked(hi));
        let i0 = g.partition_point(|&t| t <= lo);
        for k in i0..g.len() {
            if g[k] >= hi {
                break;
            }
            mx = mx.max(path.values()[k]);
            mn = mn.min(path.values()[k]);
        }
        mx - mn
    };
    if delta >= t_end - t0 {
        return Ok(window_range(t0, t_end));
    }
    let last = t_end - delta;
    let mut starts: Vec<f64> = vec![t0, last];
    for &t in g {
        if t >= t0 && t <= last {
            starts.push(t);
        }
        let s = t - delta;
        if s >= t0 && s <= last {
            starts.push(s);
        }
    }
    Ok(starts
        .into_iter()
        .map(|s| window_range(s, s + delta))
        .fold(0.0, f64::max))
}
