//! The five experiment kinds. Each streams its rows to the spec's output;
//! parallel work is collected in index order so output is reproducible.

use std::fs::{self, File};
use std::io::BufWriter;

use mdq_core::model::instantiate;
use mdq_core::paths::PLPath;
use mdq_core::rscost::{estimate_jn, LogWeightObserver};
use mdq_core::sim::{replication_seed, run_observed, EventLog, PolicyKind, TrackingStats};
use mdq_core::{solve_game, GameSolution, ModelParams, NthSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::args::{ExperimentKind, ExperimentSpec};
use crate::output::{emit_csv_to, timestamp_comment, Field, Row};
use crate::CliError;

pub const GAME_HEADER: [&str; 4] = ["x", "V", "beta0", "finite"];
pub const SADDLE_HEADER: [&str; 8] = [
    "x",
    "V",
    "saddle_cost",
    "playout_sup",
    "best_candidate",
    "best_time",
    "candidates",
    "within_tol",
];
pub const SIMULATE_HEADER: [&str; 15] = [
    "n",
    "policy",
    "replication",
    "seed",
    "T",
    "arrivals",
    "completions",
    "forced_rejections",
    "overload_rejections",
    "istar_rejection_share",
    "off_curve_fraction",
    "open_above_fraction",
    "max_deviation",
    "final_workload",
    "log_weight",
];
pub const ESTIMATE_HEADER: [&str; 9] = [
    "n", "b_n", "policy", "T", "M", "value", "ess", "heavy_tail", "V_ref",
];

/// Tolerance of the saddle-check comparison against `V(x)`.
pub const SADDLE_TOL: f64 = 1e-3;
/// Termination-time grid used for playout suprema.
const PLAYOUT_TIMES: usize = 600;
const DEFAULT_X_POINTS: usize = 21;

pub fn load_params(spec: &ExperimentSpec) -> Result<ModelParams, CliError> {
    let text = fs::read_to_string(&spec.config).map_err(|e| CliError::ReadConfig {
        path: spec.config.clone(),
        source: e,
    })?;
    Ok(ModelParams::from_json(&text)?)
}

/// Runs the experiment and writes its CSV.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<(), CliError> {
    spec.validate()?;
    let params = load_params(spec)?;
    let game = solve_game(&params, spec.eps0)?;
    let comment = spec.include_timestamp.then(timestamp_comment);
    let out = spec.out.as_deref();
    let comment = comment.as_deref();
    match spec.kind {
        ExperimentKind::GameTable => {
            let xs = x_grid_for_table(spec, &game)?;
            emit_csv_to(out, comment, &GAME_HEADER, xs.into_iter().map(|x| game_row(&game, x)))
        }
        ExperimentKind::SaddleCheck => {
            let rows = saddle_rows(spec, &game)?;
            emit_csv_to(out, comment, &SADDLE_HEADER, rows.into_iter().map(Ok))
        }
        ExperimentKind::Simulate => {
            let horizon = horizon(spec, &game)?;
            let policies = policies_or(spec, &[PolicyKind::Ao]);
            let mut log_slot = spec.event_log.clone();
            let chunks = spec.n_grid.iter().flat_map(|&n| {
                let policies = policies.clone();
                policies.into_iter().map(move |p| (n, p))
            });
            let game = &game;
            let params = &params;
            let rows = chunks
                .map(move |(n, p)| simulate_chunk(spec, params, game, n, p, horizon, log_slot.take()))
                .flat_map(|chunk| match chunk {
                    Ok(rows) => rows.into_iter().map(Ok).collect::<Vec<_>>(),
                    Err(e) => vec![Err(e)],
                });
            emit_csv_to(out, comment, &SIMULATE_HEADER, rows)
        }
        ExperimentKind::Convergence => {
            let horizon = horizon(spec, &game)?;
            let v_ref = game.value(params.initial_workload())?;
            let rows = spec
                .n_grid
                .iter()
                .map(|&n| estimate_row(spec, &params, &game, n, PolicyKind::Ao, horizon, v_ref));
            emit_csv_to(out, comment, &ESTIMATE_HEADER, rows)
        }
        ExperimentKind::PolicyCompare => {
            let horizon = horizon(spec, &game)?;
            let v_ref = game.value(params.initial_workload())?;
            let policies = policies_or(spec, &PolicyKind::ALL);
            let rows = spec.n_grid.iter().flat_map(|&n| {
                let (params, game) = (&params, &game);
                policies
                    .iter()
                    .map(move |&p| estimate_row(spec, params, game, n, p, horizon, v_ref))
            });
            emit_csv_to(out, comment, &ESTIMATE_HEADER, rows)
        }
    }
}

fn policies_or(spec: &ExperimentSpec, default: &[PolicyKind]) -> Vec<PolicyKind> {
    if spec.policies.is_empty() {
        default.to_vec()
    } else {
        spec.policies.clone()
    }
}

fn horizon(spec: &ExperimentSpec, game: &GameSolution) -> Result<f64, CliError> {
    match spec.horizon {
        Some(t) => Ok(t),
        None => Ok(game.default_horizon()?),
    }
}

fn x_grid_for_table(spec: &ExperimentSpec, game: &GameSolution) -> Result<Vec<f64>, CliError> {
    let total = game.total();
    if spec.x_grid.is_empty() {
        let k = DEFAULT_X_POINTS - 1;
        return Ok((0..=k).map(|i| total * i as f64 / k as f64).collect());
    }
    if let Some(x) = spec.x_grid.iter().find(|&&x| !(0.0..=total).contains(&x)) {
        return Err(CliError::Usage(format!("--x-grid value {x} outside [0, {total}]")));
    }
    Ok(spec.x_grid.clone())
}

fn game_row(game: &GameSolution, x: f64) -> Result<Row, CliError> {
    if !game.finite {
        return Ok(vec![x.into(), f64::INFINITY.into(), Field::Empty, false.into()]);
    }
    let beta0 = game.beta0.expect("finite game has a free boundary");
    Ok(vec![x.into(), game.value(x)?.into(), beta0.into(), true.into()])
}

/// Random walk path on `[0, t_end]` through `inner` random interior knots.
fn random_walk(rng: &mut ChaCha8Rng, t_end: f64, inner: usize, scale: f64) -> Result<PLPath, CliError> {
    let mut grid: Vec<f64> = (0..inner).map(|_| rng.random::<f64>() * t_end).collect();
    grid.push(0.0);
    grid.push(t_end);
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| *a - *b < 1e-9 * t_end);
    let mut v = 0.0;
    let values = (0..grid.len())
        .map(|k| {
            if k > 0 {
                v += scale * (2.0 * rng.random::<f64>() - 1.0);
            }
            v
        })
        .collect();
    Ok(PLPath::new(grid, values)?)
}

/// Random candidates followed by `0`, `psi#` and `psi*_x`.
fn playout_family(
    game: &GameSolution,
    x: f64,
    count: usize,
    rng: &mut ChaCha8Rng,
    t_end: f64,
) -> Result<Vec<(PLPath, PLPath)>, CliError> {
    let mut family = Vec::with_capacity(count + 3);
    for _ in 0..count {
        let scale = 0.5 * rng.random::<f64>();
        let p1 = random_walk(rng, t_end, 12, scale)?;
        let p2 = random_walk(rng, t_end, 12, scale)?;
        family.push((p1, p2));
    }
    family.push((PLPath::zero(t_end), PLPath::zero(t_end)));
    family.push(game.psi_sharp(t_end)?);
    let ps = game.psi_star(x)?;
    family.push((ps.psi1, ps.psi2));
    Ok(family)
}

fn saddle_rows(spec: &ExperimentSpec, game: &GameSolution) -> Result<Vec<Row>, CliError> {
    let beta0 = game.beta0.ok_or(mdq_core::Error::InfiniteValue)?;
    let t_end = horizon(spec, game)?;
    let xs = if spec.x_grid.is_empty() {
        vec![0.2 * beta0, 0.4 * beta0, 0.8 * beta0]
    } else {
        spec.x_grid.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows = Vec::with_capacity(xs.len());
    for x in xs {
        let v = game.value(x)?;
        let ps = game.psi_star(x)?;
        let play = game.barrier_strategy(beta0, &ps.psi1, &ps.psi2, x)?;
        let saddle = game.cost_at(&play, &[ps.hitting_time])?[0];
        let family = playout_family(game, x, spec.replications, &mut rng, t_end)?;
        let times: Vec<f64> = (1..=PLAYOUT_TIMES)
            .map(|k| t_end * k as f64 / PLAYOUT_TIMES as f64)
            .chain([ps.hitting_time])
            .collect();
        let sup = game.playout_sup(x, beta0, &family, &times)?;
        let ok = (saddle - v).abs() <= SADDLE_TOL && sup.value <= v + SADDLE_TOL;
        rows.push(vec![
            x.into(),
            v.into(),
            saddle.into(),
            sup.value.into(),
            sup.best_candidate.into(),
            sup.best_time.into(),
            family.len().into(),
            ok.into(),
        ]);
    }
    Ok(rows)
}

fn system(params: &ModelParams, n: u64) -> Result<NthSystem, CliError> {
    Ok(instantiate(params, n)?)
}

/// Rows of one `(n, policy)` block; the first replication also feeds the
/// event log when one is requested.
fn simulate_chunk(
    spec: &ExperimentSpec,
    params: &ModelParams,
    game: &GameSolution,
    n: u64,
    kind: PolicyKind,
    horizon: f64,
    event_log: Option<std::path::PathBuf>,
) -> Result<Vec<Row>, CliError> {
    let sys = system(params, n)?;
    let policy = kind.build(game);
    let istar = game.istar;
    let one = |rep: u64, log: Option<&mut EventLog<BufWriter<File>>>| -> Result<Row, CliError> {
        let seed = replication_seed(spec.seed, rep);
        let mut stats = TrackingStats::new(&sys, &game.geometry, spec.eps0, game.a_star());
        let mut lw = LogWeightObserver::new(&sys);
        let state = match log {
            Some(log) => run_observed(&sys, policy.as_ref(), horizon, seed, &mut (&mut stats, (&mut lw, log)))?,
            None => run_observed(&sys, policy.as_ref(), horizon, seed, &mut (&mut stats, &mut lw))?,
        };
        let workload: f64 = state
            .x
            .iter()
            .zip(&sys.theta)
            .map(|(&x, th)| th * sys.scaled(x))
            .sum();
        Ok(vec![
            n.into(),
            kind.as_str().into(),
            rep.into(),
            seed.into(),
            horizon.into(),
            state.arrivals.iter().sum::<u64>().into(),
            state.completions.iter().sum::<u64>().into(),
            state.forced.iter().sum::<u64>().into(),
            state.overload.iter().sum::<u64>().into(),
            stats.rejection_share(istar).into(),
            stats.off_curve_fraction().into(),
            stats.open_above_fraction().into(),
            stats.max_deviation.into(),
            workload.into(),
            lw.log_weight().into(),
        ])
    };
    let m = spec.replications as u64;
    let mut rows = Vec::with_capacity(spec.replications);
    let mut first = 0;
    if let Some(path) = event_log {
        let file = File::create(&path).map_err(|e| CliError::Output { path, source: e })?;
        let mut log = EventLog::new(BufWriter::new(file));
        rows.push(one(0, Some(&mut log))?);
        log.finish()?;
        first = 1;
    }
    let rest: Vec<Result<Row, CliError>> = (first..m).into_par_iter().map(|rep| one(rep, None)).collect();
    for r in rest {
        rows.push(r?);
    }
    Ok(rows)
}

fn estimate_row(
    spec: &ExperimentSpec,
    params: &ModelParams,
    game: &GameSolution,
    n: u64,
    kind: PolicyKind,
    horizon: f64,
    v_ref: f64,
) -> Result<Row, CliError> {
    let sys = system(params, n)?;
    let policy = kind.build(game);
    let est = estimate_jn(&sys, policy.as_ref(), horizon, spec.replications, spec.seed)?;
    Ok(vec![
        n.into(),
        sys.b_n.into(),
        kind.as_str().into(),
        horizon.into(),
        spec.replications.into(),
        est.value.into(),
        est.ess.into(),
        est.heavy_tail.into(),
        v_ref.into(),
    ])
}
