//! Reference configurations used throughout the tests, benches and the
//! bundled `configs/` files.

use crate::model::{ClassParams, ModelParams, DEFAULT_SCALING_EXPONENT};

fn class(lambda: f64, mu: f64, tilde_mu: f64, buffer: f64, hold: f64, reject: f64) -> ClassParams {
    ClassParams {
        lambda,
        mu,
        var_ia: 1.0,
        var_st: 1.0,
        tilde_lambda: 0.0,
        tilde_mu,
        buffer,
        hold_cost: hold,
        reject_cost: reject,
        ia_dist: None,
        st_dist: None,
        label: 0,
    }
}

/// Single class, `lambda = mu = 1`, unit variances, `D = 2`, `hbar = 1`,
/// `rbar = 0.5`, `tilde_mu = 1`. Game constants: `y = -1`, `s = 1/4`,
/// `r = 1/2`, `h(w) = w`, `beta0 = 1/4`.
pub fn f1() -> ModelParams {
    ModelParams::new(
        vec![class(1.0, 1.0, 1.0, 2.0, 1.0, 0.5)],
        vec![0.1],
        DEFAULT_SCALING_EXPONENT,
    )
}

/// F1 with buffer `D`.
pub fn f1_with_buffer(d: f64) -> ModelParams {
    let mut p = f1();
    p.classes[0].buffer = d;
    p.x0 = vec![p.x0[0].min(d)];
    p
}

/// F1 with drift `y` (set through `tilde_mu = -y`).
pub fn f1_with_drift(y: f64) -> ModelParams {
    let mut p = f1();
    p.classes[0].tilde_mu = -y;
    p
}

/// Two classes: `lambda = (0.5, 1)`, `mu = (1, 2)`, `hbar = (3, 1)`,
/// `D = (1, 1)`, `rbar = (1, 1)`, `tilde_mu = (2, 2)`, unit variances.
/// Game constants: `y = -1.5`, `s = 1/3`, `r = 1`, `i* = 1`, `beta0 = 0.375`.
/// The initial state `(0.5, 0.7)` sits on the interior curve for
/// `eps0 = 0.1` with workload above the rejection threshold.
pub fn f2() -> ModelParams {
    ModelParams::new(
        vec![
            class(0.5, 1.0, 2.0, 1.0, 3.0, 1.0),
            class(1.0, 2.0, 2.0, 1.0, 1.0, 1.0),
        ],
        vec![0.5, 0.7],
        DEFAULT_SCALING_EXPONENT,
    )
}

/// Three classes with distinct `hbar_i mu_i`, used for policy case analysis.
pub fn f3() -> ModelParams {
    ModelParams::new(
        vec![
            class(0.2, 1.0, 1.0, 1.0, 4.0, 1.0),
            class(0.6, 2.0, 1.0, 1.0, 1.5, 2.0),
            class(2.0, 4.0, 1.0, 1.0, 0.5, 0.2),
        ],
        vec![0.2, 0.2, 0.2],
        DEFAULT_SCALING_EXPONENT,
    )
}
