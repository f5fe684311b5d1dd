//! Command-line surface and the validated experiment description.

use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use mdq_core::sim::PolicyKind;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    /// `V(x)` and the free boundary on an x grid.
    GameTable,
    /// Barrier-vs-`psi*` cost and playout suprema against `V(x)`.
    SaddleCheck,
    /// Per-replication statistics of simulated runs.
    Simulate,
    /// Risk-sensitive cost under the AO policy for each n.
    Convergence,
    /// AO policy against the baselines, paired seeds.
    PolicyCompare,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::GameTable => "game-table",
            ExperimentKind::SaddleCheck => "saddle-check",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::PolicyCompare => "policy-compare",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mdq", version, about = "Moderate-deviation queue control experiments")]
#[command(args_conflicts_with_subcommands = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,

    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the game value: columns x, V, beta0, finite.
    Game(GameArgs),
}

#[derive(Debug, Args)]
pub struct GameArgs {
    /// Model configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated workloads; default 21 points on [0, D].
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x_grid: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub eps0: f64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub include_timestamp: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Model configuration (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub experiment: Option<ExperimentKind>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Replications per estimate; for saddle-check, the number of random
    /// playout candidates.
    #[arg(long, default_value_t = 1000)]
    pub replications: usize,
    /// Comma-separated scale indices, e.g. `100,1000,10000`.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Vec<u64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Horizon T; defaults to the game-derived horizon.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Interior margin of the approximating curve.
    #[arg(long, default_value_t = 0.1)]
    pub eps0: f64,
    /// Write a `# generated at ...` comment above the header.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub include_timestamp: bool,
    /// Comma-separated workloads for game-table and saddle-check.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x_grid: Vec<f64>,
    /// Policies for simulate and policy-compare (default: ao for simulate,
    /// all for policy-compare).
    #[arg(long, value_delimiter = ',')]
    pub policy: Vec<PolicyKind>,
    /// simulate: write the event log of the first run to this file.
    #[arg(long)]
    pub event_log: Option<PathBuf>,
}

/// A fully specified experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub config: PathBuf,
    pub kind: ExperimentKind,
    pub n_grid: Vec<u64>,
    pub horizon: Option<f64>,
    pub replications: usize,
    pub eps0: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub include_timestamp: bool,
    pub x_grid: Vec<f64>,
    pub policies: Vec<PolicyKind>,
    pub event_log: Option<PathBuf>,
}

impl ExperimentSpec {
    /// A spec with defaults for everything but the config and the kind.
    pub fn new(config: impl Into<PathBuf>, kind: ExperimentKind) -> Self {
        ExperimentSpec {
            config: config.into(),
            kind,
            n_grid: Vec::new(),
            horizon: None,
            replications: 1000,
            eps0: 0.1,
            seed: 1,
            out: None,
            include_timestamp: true,
            x_grid: Vec::new(),
            policies: Vec::new(),
            event_log: None,
        }
    }

    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        match cli.command {
            Some(Command::Game(g)) => {
                let mut spec = ExperimentSpec::new(g.config, ExperimentKind::GameTable);
                spec.x_grid = g.x_grid;
                spec.eps0 = g.eps0;
                spec.out = g.out;
                spec.include_timestamp = g.include_timestamp;
                spec.validate()?;
                Ok(spec)
            }
            None => {
                let r = cli.run;
                let config = r
                    .config
                    .ok_or_else(|| CliError::Usage("--config is required".into()))?;
                let kind = r
                    .experiment
                    .ok_or_else(|| CliError::Usage("--experiment is required".into()))?;
                let spec = ExperimentSpec {
                    config,
                    kind,
                    n_grid: r.n_grid,
                    horizon: r.horizon,
                    replications: r.replications,
                    eps0: r.eps0,
                    seed: r.seed,
                    out: r.out,
                    include_timestamp: r.include_timestamp,
                    x_grid: r.x_grid,
                    policies: r.policy,
                    event_log: r.event_log,
                };
                spec.validate()?;
                Ok(spec)
            }
        }
    }

    /// Checks the fields the kind needs.
    pub fn validate(&self) -> Result<(), CliError> {
        use ExperimentKind::*;
        let usage = |m: String| Err(CliError::Usage(m));
        if !(self.eps0.is_finite() && self.eps0 > 0.0) {
            return usage(format!("--eps0 must be positive, got {}", self.eps0));
        }
        if let Some(t) = self.horizon {
            if !(t.is_finite() && t > 0.0) {
                return usage(format!("--horizon must be positive, got {t}"));
            }
        }
        if self.x_grid.iter().any(|x| !x.is_finite()) {
            return usage("--x-grid values must be finite".into());
        }
        let needs_n = matches!(self.kind, Simulate | Convergence | PolicyCompare);
        if needs_n && self.n_grid.is_empty() {
            return usage(format!("{} needs a nonempty --n-grid", self.kind.as_str()));
        }
        if self.n_grid.contains(&0) {
            return usage("--n-grid entries must be positive".into());
        }
        let min_m = match self.kind {
            GameTable => 0,
            SaddleCheck | Simulate => 1,
            Convergence | PolicyCompare => 2,
        };
        if self.replications < min_m {
            return usage(format!(
                "{} needs --replications >= {min_m}",
                self.kind.as_str()
            ));
        }
        if self.kind == Convergence && self.policies.iter().any(|&p| p != PolicyKind::Ao) {
            return usage("convergence runs the ao policy only".into());
        }
        if self.event_log.is_some() && self.kind != Simulate {
            return usage("--event-log applies to simulate only".into());
        }
        Ok(())
    }
}
