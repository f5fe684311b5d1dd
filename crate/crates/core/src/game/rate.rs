//! Quadratic rate functions of the maximizer's perturbation paths and the
//! optimal split of a one-dimensional path across classes.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::paths::PLPath;

const ANCHOR_TOL: f64 = 1e-12;

/// `int_0^T psi'(u)^2 du`, exact for a piecewise-linear path.
pub fn quadratic_action(path: &PLPath, t_end: f64) -> Result<f64> {
    if path.start() != 0.0 || path.first_value().abs() > ANCHOR_TOL {
        return Err(Error::domain(
            "rate",
            format!(
                "path must start at (0, 0), starts at ({}, {})",
                path.start(),
                path.first_value()
            ),
        ));
    }
    if t_end > path.end() || t_end < 0.0 {
        return Err(Error::domain(
            "rate",
            format!("T={t_end} outside [0, {}]", path.end()),
        ));
    }
    let g = path.grid();
    let v = path.values();
    let mut sum = 0.0;
    for k in 0..g.len().saturating_sub(1) {
        if g[k] >= t_end {
            break;
        }
        let slope = (v[k + 1] - v[k]) / (g[k + 1] - g[k]);
        let dt = g[k + 1].min(t_end) - g[k];
        sum += slope * slope * dt;
    }
    Ok(sum)
}

/// `s1 int (psi1')^2 + s2 int (psi2')^2` over `[0, T]`.
pub fn rate_i(s1: f64, s2: f64, psi1: &PLPath, psi2: &PLPath, t_end: f64) -> Result<f64> {
    Ok(s1 * quadratic_action(psi1, t_end)? + s2 * quadratic_action(psi2, t_end)?)
}

/// Per-class weights `s_{i,1} = 1/(2 lambda_i var_ia)` and
/// `s_{i,2} = 1/(2 mu_i var_st)`.
pub fn class_weights(params: &ModelParams) -> (Vec<f64>, Vec<f64>) {
    params
        .classes
        .iter()
        .map(|c| (0.5 / (c.lambda * c.var_ia), 0.5 / (c.mu * c.var_st)))
        .unzip()
}

/// Multi-class rate function: `sum_i w1_i int (psi1_i')^2 + sum_i w2_i int (psi2_i')^2`.
pub fn rate_j(
    psi1: &[PLPath],
    psi2: &[PLPath],
    w1: &[f64],
    w2: &[f64],
    t_end: f64,
) -> Result<f64> {
    if psi1.len() != w1.len() || psi2.len() != w2.len() {
        return Err(Error::domain("rate_j", "weights and paths differ in length"));
    }
    let mut sum = 0.0;
    for (p, w) in psi1.iter().zip(w1).chain(psi2.iter().zip(w2)) {
        sum += w * quadratic_action(p, t_end)?;
    }
    Ok(sum)
}

/// `(sum_k theta_k^2 l_k / alpha_k)^{-1}`: the cost per unit of
/// `int psi'^2` of the cheapest split.
pub fn decomposition_constant(alpha: &[f64], speeds: &[f64], theta: &[f64]) -> f64 {
    let denom: f64 = theta
        .iter()
        .zip(speeds)
        .zip(alpha)
        .map(|((t, l), a)| t * t * l / a)
        .sum();
    1.0 / denom
}

/// Cheapest split of `psi` into per-class paths `psi_i` with
/// `sum_i theta_i psi_i(l_i u) = psi(u)`:
/// `psi_i(u) = (theta_i l_i / alpha_i) c psi(u / l_i)` for `u <= l_i T`,
/// constant afterwards, where `c` is [`decomposition_constant`].
pub fn decompose(
    psi: &PLPath,
    alpha: &[f64],
    speeds: &[f64],
    theta: &[f64],
) -> Result<Vec<PLPath>> {
    if speeds.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
        return Err(Error::domain("decompose", format!("speeds must lie in (0, 1]: {speeds:?}")));
    }
    if alpha.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::domain("decompose", "weights must be positive"));
    }
    if alpha.len() != speeds.len() || alpha.len() != theta.len() {
        return Err(Error::domain("decompose", "length mismatch"));
    }
    if psi.start() != 0.0 || psi.first_value().abs() > ANCHOR_TOL {
        return Err(Error::domain("decompose", "path must start at (0, 0)"));
    }
    let c = decomposition_constant(alpha, speeds, theta);
    let t_end = psi.end();
    (0..alpha.len())
        .map(|i| {
            let factor = theta[i] * speeds[i] / alpha[i] * c;
            let mut grid: Vec<f64> = psi.grid().iter().map(|t| t * speeds[i]).collect();
            let mut values: Vec<f64> = psi.values().iter().map(|v| factor * v).collect();
            if speeds[i] < 1.0 && t_end > 0.0 {
                grid.push(t_end);
                values.push(*values.last().unwrap());
            }
            PLPath::new(grid, values)
        })
        .collect()
}

/// `sum_i theta_i psi_i(l_i u)` on `grid`.
pub fn recompose(parts: &[PLPath], speeds: &[f64], theta: &[f64], grid: &[f64]) -> Result<PLPath> {
    let values = grid
        .iter()
        .map(|&u| {
            parts
                .iter()
                .zip(speeds)
                .zip(theta)
                .map(|((p, l), th)| p.eval(l * u).map(|v| th * v))
                .sum::<Result<f64>>()
        })
        .collect::<Result<Vec<_>>>()?;
    PLPath::new(grid.to_vec(), values)
}
