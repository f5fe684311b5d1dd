//! Model parameters of the multi-class single-server queue and the
//! moderate-deviation scaling that produces the `n`-th system.
//!
//! Classes are always stored in decreasing order of `hold_cost * mu`; the
//! constructors relabel and keep the original position in
//! [`ClassParams::label`] for reporting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution of a normalized (mean one) interarrival or service time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dist {
    Exponential,
    /// Uniform on `[1 - half_width, 1 + half_width]`, `0 <= half_width <= 1`.
    Uniform {
        half_width: f64,
    },
    Deterministic,
    /// Gamma with the given shape and scale `1 / shape`.
    Gamma {
        shape: f64,
    },
}

impl Dist {
    pub fn mean(&self) -> f64 {
        1.0
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Dist::Exponential => 1.0,
            Dist::Uniform { half_width } => half_width * half_width / 3.0,
            Dist::Deterministic => 0.0,
            Dist::Gamma { shape } => 1.0 / shape,
        }
    }

    /// Distribution used when a config leaves it unspecified: gamma with
    /// the requested variance (exponential when the variance is one).
    pub fn default_for_variance(var: f64) -> Dist {
        if var == 1.0 {
            Dist::Exponential
        } else if var == 0.0 {
            Dist::Deterministic
        } else {
            Dist::Gamma { shape: 1.0 / var }
        }
    }

    fn well_formed(&self) -> bool {
        match *self {
            Dist::Uniform { half_width } => (0.0..=1.0).contains(&half_width),
            Dist::Gamma { shape } => shape.is_finite() && shape > 0.0,
            _ => true,
        }
    }
}

/// Per-class primitives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassParams {
    /// First-order arrival rate.
    pub lambda: f64,
    /// First-order service rate.
    pub mu: f64,
    /// Variance of the normalized interarrival time.
    pub var_ia: f64,
    /// Variance of the normalized service time.
    pub var_st: f64,
    #[serde(default)]
    pub tilde_lambda: f64,
    #[serde(default)]
    pub tilde_mu: f64,
    /// Buffer size in MD-scaled units.
    pub buffer: f64,
    pub hold_cost: f64,
    /// Cost per rejected job.
    pub reject_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ia_dist: Option<Dist>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub st_dist: Option<Dist>,
    /// Position of the class in the configuration before relabeling.
    #[serde(skip)]
    pub label: usize,
}

impl ClassParams {
    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    pub fn theta(&self) -> f64 {
        1.0 / self.mu
    }

    pub fn ia_distribution(&self) -> Dist {
        self.ia_dist
            .unwrap_or_else(|| Dist::default_for_variance(self.var_ia))
    }

    pub fn st_distribution(&self) -> Dist {
        self.st_dist
            .unwrap_or_else(|| Dist::default_for_variance(self.var_st))
    }

    /// Cost rate per unit of workload, the relabeling key.
    pub fn cost_index(&self) -> f64 {
        self.hold_cost * self.mu
    }
}

pub const DEFAULT_SCALING_EXPONENT: f64 = 0.3;

fn default_exponent() -> f64 {
    DEFAULT_SCALING_EXPONENT
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub classes: Vec<ClassParams>,
    /// Initial MD-scaled queue lengths, one per class.
    pub x0: Vec<f64>,
    /// `a` in `b_n = n^a`.
    #[serde(default = "default_exponent")]
    pub scaling_exponent: f64,
}

impl ModelParams {
    /// Builds parameters, relabeling classes so that `hold_cost * mu` is
    /// nonincreasing (ties keep their input order).
    pub fn new(mut classes: Vec<ClassParams>, x0: Vec<f64>, scaling_exponent: f64) -> Self {
        for (i, c) in classes.iter_mut().enumerate() {
            c.label = i;
        }
        let mut order: Vec<usize> = (0..classes.len()).collect();
        order.sort_by(|&i, &j| {
            classes[j]
                .cost_index()
                .partial_cmp(&classes[i].cost_index())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let x0 = if x0.len() == classes.len() {
            order.iter().map(|&i| x0[i]).collect()
        } else {
            x0
        };
        let classes = order.iter().map(|&i| classes[i].clone()).collect();
        ModelParams {
            classes,
            x0,
            scaling_exponent,
        }
    }

    /// Parses a JSON config. Errors name the offending key path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: ModelParams = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            Error::Config {
                key,
                message: e.into_inner().to_string(),
            }
        })?;
        Ok(ModelParams::new(raw.classes, raw.x0, raw.scaling_exponent))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model params serialize")
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn rho(&self) -> Vec<f64> {
        self.classes.iter().map(ClassParams::rho).collect()
    }

    pub fn theta(&self) -> Vec<f64> {
        self.classes.iter().map(ClassParams::theta).collect()
    }

    pub fn buffers(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.buffer).collect()
    }

    /// Initial workload `theta . x0`.
    pub fn initial_workload(&self) -> f64 {
        self.classes
            .iter()
            .zip(&self.x0)
            .map(|(c, x)| c.theta() * x)
            .sum()
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = x0;
        self
    }
}

/// Which assumptions a check guards.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckScope {
    /// Needed to build and simulate the `n`-th system.
    Model,
    /// Additionally needed by the differential game (positive variances).
    Game,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub scope: CheckScope,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn passed_for(&self, scope: CheckScope) -> bool {
        self.checks
            .iter()
            .filter(|c| scope == CheckScope::Game || c.scope == CheckScope::Model)
            .all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn failed(&self, name: &str) -> bool {
        self.failures().any(|c| c.name == name)
    }

    fn push(&mut self, name: &'static str, scope: CheckScope, passed: bool, detail: String) {
        self.checks.push(Check {
            name,
            scope,
            passed,
            detail,
        });
    }

    fn require(&self, scope: CheckScope) -> Result<()> {
        if self.passed_for(scope) {
            return Ok(());
        }
        let msg = self
            .failures()
            .filter(|c| scope == CheckScope::Game || c.scope == CheckScope::Model)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidModel(msg))
    }
}

pub const CRITICAL_LOAD_TOL: f64 = 1e-12;

/// Checks every standing assumption and reports each one.
pub fn validate(params: &ModelParams) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let classes = &params.classes;

    rep.push(
        "nonempty",
        CheckScope::Model,
        !classes.is_empty(),
        format!("{} classes", classes.len()),
    );

    for (i, c) in classes.iter().enumerate() {
        let positive = [
            ("lambda", c.lambda),
            ("mu", c.mu),
            ("buffer", c.buffer),
            ("hold_cost", c.hold_cost),
            ("reject_cost", c.reject_cost),
        ];
        let bad: Vec<_> = positive
            .iter()
            .filter(|(_, v)| !(v.is_finite() && *v > 0.0))
            .map(|(k, v)| format!("class {i}: {k}={v}"))
            .collect();
        rep.push(
            "positive rates and costs",
            CheckScope::Model,
            bad.is_empty(),
            bad.join(", "),
        );

        let finite_tilde = c.tilde_lambda.is_finite() && c.tilde_mu.is_finite();
        rep.push(
            "finite second-order rates",
            CheckScope::Model,
            finite_tilde,
            format!("class {i}: tilde_lambda={}, tilde_mu={}", c.tilde_lambda, c.tilde_mu),
        );

        let var_ok = c.var_ia > 0.0 && c.var_st > 0.0 && c.var_ia.is_finite() && c.var_st.is_finite();
        rep.push(
            "positive variances",
            CheckScope::Game,
            var_ok,
            format!("class {i}: var_ia={}, var_st={}", c.var_ia, c.var_st),
        );

        for (which, dist, var) in [
            ("ia_dist", c.ia_distribution(), c.var_ia),
            ("st_dist", c.st_distribution(), c.var_st),
        ] {
            let ok = dist.well_formed() && (dist.variance() - var).abs() <= 1e-12 * var.max(1.0);
            rep.push(
                "distribution moments",
                CheckScope::Model,
                ok,
                format!(
                    "class {i}: {which} {:?} has variance {} (expected {var})",
                    dist,
                    dist.variance()
                ),
            );
        }
    }

    let load: f64 = classes.iter().map(ClassParams::rho).sum();
    rep.push(
        "critical load",
        CheckScope::Model,
        (load - 1.0).abs() <= CRITICAL_LOAD_TOL,
        format!("sum rho = {load}"),
    );

    let ordered = classes
        .windows(2)
        .all(|w| w[0].cost_index() >= w[1].cost_index());
    rep.push(
        "labeling",
        CheckScope::Model,
        ordered,
        format!(
            "hold_cost*mu = {:?}",
            classes.iter().map(ClassParams::cost_index).collect::<Vec<_>>()
        ),
    );

    let a = params.scaling_exponent;
    rep.push(
        "scaling exponent",
        CheckScope::Model,
        a > 0.0 && a < 0.5,
        format!("a = {a}"),
    );

    let x0_ok = params.x0.len() == classes.len()
        && params
            .x0
            .iter()
            .zip(classes)
            .all(|(x, c)| *x >= 0.0 && *x <= c.buffer);
    rep.push(
        "initial state",
        CheckScope::Model,
        x0_ok,
        format!("x0 = {:?}", params.x0),
    );

    rep
}

pub fn require_valid(params: &ModelParams, scope: CheckScope) -> Result<()> {
    validate(params).require(scope)
}

/// The `n`-th queueing system derived from the limit parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NthSystem {
    pub n: u64,
    /// `b_n = n^a`.
    pub b_n: f64,
    /// `b_n * sqrt(n)`, the MD scale of queue lengths.
    pub scale: f64,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    /// `n / mu^n_i`.
    pub theta: Vec<f64>,
    /// `sum_i theta^n_i D_i`.
    pub d_n: f64,
    pub x0_counts: Vec<u64>,
    /// Largest admissible integer queue length per class.
    pub buffer_caps: Vec<u64>,
    pub params: ModelParams,
}

impl NthSystem {
    pub fn num_classes(&self) -> usize {
        self.lambda.len()
    }

    pub fn scaled(&self, count: u64) -> f64 {
        count as f64 / self.scale
    }
}

/// Builds the `n`-th system: `lambda^n = n lambda + b_n sqrt(n) tilde_lambda`
/// and likewise for `mu^n`; initial counts are `round(b_n sqrt(n) x0)`.
pub fn instantiate(params: &ModelParams, n: u64) -> Result<NthSystem> {
    if n == 0 {
        return Err(Error::domain("instantiate", "n must be positive"));
    }
    require_valid(params, CheckScope::Model)?;
    let nf = n as f64;
    let b_n = nf.powf(params.scaling_exponent);
    let scale = b_n * nf.sqrt();
    let lambda: Vec<f64> = params
        .classes
        .iter()
        .map(|c| nf * c.lambda + scale * c.tilde_lambda)
        .collect();
    let mu: Vec<f64> = params
        .classes
        .iter()
        .map(|c| nf * c.mu + scale * c.tilde_mu)
        .collect();
    if lambda.iter().chain(&mu).any(|v| !(*v > 0.0)) {
        return Err(Error::domain(
            "instantiate",
            format!("n={n} gives nonpositive rates; increase n"),
        ));
    }
    let theta: Vec<f64> = mu.iter().map(|m| nf / m).collect();
    let d_n = theta
        .iter()
        .zip(&params.classes)
        .map(|(t, c)| t * c.buffer)
        .sum();
    let buffer_caps: Vec<u64> = params
        .classes
        .iter()
        .map(|c| (scale * c.buffer).floor() as u64)
        .collect();
    let x0_counts = params
        .x0
        .iter()
        .zip(&buffer_caps)
        .map(|(x, cap)| ((scale * x).round() as u64).min(*cap))
        .collect();
    Ok(NthSystem {
        n,
        b_n,
        scale,
        lambda,
        mu,
        theta,
        d_n,
        x0_counts,
        buffer_caps,
        params: params.clone(),
    })
}
