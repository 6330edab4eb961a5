use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use qst_core::consensus::{consensus_solve, shard_measurements, write_disagreement_csv, Topology};
use qst_core::experiment::{default_measurement_budget, emit_csv, run_experiment, write_csv, ExperimentSpec};
use qst_core::pauli::{sample_ensemble, MeasurementEnsemble};
use qst_core::seed::{self, Stream};
use qst_core::solvers::{solve, solve_admm_simple, SolveReport, SolverConfig, SolverKind};
use qst_core::states::{reconstruction_error, relative_error, simulate_measurements, NoiseModel, StateFixture};
use qst_core::{Error, Result};

/// Compressive quantum state tomography from random Pauli measurements.
#[derive(Parser, Debug)]
#[command(name = "qst", version)]
pub struct Cli {
    /// Debug-level logging.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a random rank-r state and, optionally, a Pauli ensemble.
    Generate(GenerateArgs),
    /// Reconstruct a stored state from simulated measurements.
    Solve(SolveArgs),
    /// Run a measurement-rate sweep and write the summary CSV.
    Sweep(SweepArgs),
    /// Distributed reconstruction over simulated agents.
    ConsensusDemo(ConsensusArgs),
}

#[derive(Args, Debug)]
pub struct NoiseArgs {
    /// Gaussian noise std relative to the state's Frobenius norm.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// Fraction of the d² entries carrying an outlier.
    #[arg(long, default_value_t = 0.0)]
    pub outlier_fraction: f64,
    /// Outlier std relative to the state's Frobenius norm.
    #[arg(long, default_value_t = 0.0)]
    pub outlier_sigma: f64,
}

impl NoiseArgs {
    fn model(&self) -> NoiseModel {
        NoiseModel::gaussian(self.sigma).with_outliers(self.outlier_fraction, self.outlier_sigma)
    }
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub q: usize,
    #[arg(long, default_value_t = 1)]
    pub r: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// State file; `.json` selects JSON, anything else the binary layout.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a random ensemble here.
    #[arg(long)]
    pub ensemble_out: Option<PathBuf>,
    /// Ensemble size; defaults to the quick-start budget.
    #[arg(long, conflicts_with = "eta")]
    pub m: Option<usize>,
    /// Ensemble size as a fraction of d².
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub ensemble: PathBuf,
    #[arg(long, default_value = "admm_simple")]
    pub solver: SolverKind,
    /// Solver configuration as JSON; omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long, default_value_t = 0)]
    pub noise_seed: u64,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Experiment spec as JSON. Replaces all other sweep flags.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, required_unless_present = "spec")]
    pub q: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub r: usize,
    /// Comma-separated measurement rates.
    #[arg(long, value_delimiter = ',')]
    pub eta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated subset of ls, admm_simple, admm_robust.
    #[arg(long, value_delimiter = ',')]
    pub solvers: Option<Vec<SolverKind>>,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Worker threads for trials; rayon's default when omitted.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the full result, including per-trial errors, as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ConsensusArgs {
    #[arg(long, default_value_t = 4)]
    pub agents: usize,
    /// Topology as JSON `{n, edges}`; complete graph when omitted.
    #[arg(long)]
    pub topology: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub q: usize,
    #[arg(long, default_value_t = 1)]
    pub r: usize,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 300)]
    pub rounds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Disagreement trace CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Solve(args) => solve_cmd(args),
        Command::Sweep(args) => sweep(args),
        Command::ConsensusDemo(args) => consensus_demo(args),
    }
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        }),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn generate(args: GenerateArgs) -> Result<()> {
    let d = 1usize << args.q.min(usize::BITS as usize - 1);
    let fixture = StateFixture::generate(d, args.r, args.seed)?;
    fixture.save(&args.out)?;
    info!("wrote {}x{} rank-{} state to {}", d, d, args.r, args.out.display());

    if let Some(path) = &args.ensemble_out {
        let m = match (args.m, args.eta) {
            (Some(m), _) => m,
            (None, Some(eta)) => (eta * (d * d) as f64).round() as usize,
            (None, None) => default_measurement_budget(args.q, args.r),
        };
        let ens = sample_ensemble(args.q, m, seed::stream_seed(args.seed, Stream::Ensemble))?;
        write_text(Some(path), &ens.to_json()?)?;
        info!("wrote {m} Pauli words to {}", path.display());
    }
    Ok(())
}

fn solve_cmd(args: SolveArgs) -> Result<()> {
    let fixture = StateFixture::load(&args.state)?;
    let ens = MeasurementEnsemble::from_json(&read_text(&args.ensemble)?)?;
    let cfg: SolverConfig = match &args.config {
        Some(p) => serde_json::from_str(&read_text(p)?)?,
        None => SolverConfig::default(),
    };
    let data = simulate_measurements(&ens, &fixture.state, &args.noise.model(), args.noise_seed)?;
    let res = solve(args.solver, &ens, &data.record, &cfg)?;
    if !res.converged {
        warn!("{} stopped after {} iterations without meeting the tolerances", args.solver, res.iterations);
    }
    let err = reconstruction_error(&fixture.state, &res.rho_hat)?;
    info!("{}: error {err:.3e} after {} iterations", args.solver, res.iterations);
    let report = SolveReport::new(args.solver, &res, &cfg, &ens, Some(err));
    write_text(args.out.as_deref(), &report.to_json()?)
}

fn sweep_spec(args: &SweepArgs) -> Result<ExperimentSpec> {
    if let Some(path) = &args.spec {
        return ExperimentSpec::load(path);
    }
    let q = args.q.ok_or_else(|| Error::Spec("--q is required without --spec".into()))?;
    let mut spec = ExperimentSpec::gaussian_sweep(q, args.r, args.seed);
    spec.noise = args.noise.model();
    spec.trials = args.trials;
    if let Some(eta) = &args.eta {
        spec.eta_grid = eta.clone();
    }
    spec.solvers = match &args.solvers {
        Some(s) => s.clone(),
        None if spec.noise.has_outliers() => vec![SolverKind::Ls, SolverKind::AdmmRobust],
        None => vec![SolverKind::Ls, SolverKind::AdmmSimple],
    };
    spec.validate()?;
    Ok(spec)
}

fn sweep(args: SweepArgs) -> Result<()> {
    let spec = sweep_spec(&args)?;
    info!(
        "sweep q={} r={} trials={} over {} rates with {:?}",
        spec.q,
        spec.r,
        spec.trials,
        spec.eta_grid.len(),
        spec.solvers.iter().map(|s| s.name()).collect::<Vec<_>>()
    );
    let result = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Parameter(e.to_string()))?
            .install(|| run_experiment(&spec))?,
        None => run_experiment(&spec)?,
    };
    for row in result.rows.iter().filter(|r| r.failures > 0) {
        warn!("{} at eta {}: {} of {} trials failed", row.solver, row.eta, row.failures, row.trials);
    }
    emit_csv(&result, &args.out)?;
    if let Some(path) = &args.json {
        write_text(Some(path), &serde_json::to_string_pretty(&result)?)?;
    }
    if log::log_enabled!(log::Level::Info) {
        let mut table = Vec::new();
        write_csv(&result, &mut table)?;
        info!("wrote {}\n{}", args.out.display(), String::from_utf8_lossy(&table).trim_end());
    }
    Ok(())
}

fn consensus_demo(args: ConsensusArgs) -> Result<()> {
    let topology = match &args.topology {
        Some(p) => Topology::load(p)?,
        None => Topology::complete(args.agents)?,
    };
    if topology.len() != args.agents {
        return Err(Error::Topology(format!(
            "topology describes {} agents, --agents is {}",
            topology.len(),
            args.agents
        )));
    }
    let spec = ExperimentSpec {
        eta_grid: vec![args.eta],
        trials: 1,
        ..ExperimentSpec::gaussian_sweep(args.q, args.r, args.seed)
    };
    spec.validate()?;
    let seeds = qst_core::experiment::trial_seeds(args.seed, 0, 0);
    let truth = qst_core::states::random_density(spec.dim(), args.r, seeds.state)?;
    let ens = sample_ensemble(args.q, spec.measurements(args.eta), seeds.ensemble)?;
    let data = simulate_measurements(&ens, &truth, &args.noise.model(), seeds.noise)?;

    let cfg = SolverConfig::default();
    let central = solve_admm_simple(&ens, &data.record, &cfg)?;
    let mut shards = shard_measurements(&ens, &data.record, args.agents, args.seed)?;
    let res = consensus_solve(&mut shards, &topology, &cfg, args.rounds)?;

    info!(
        "{} agents, {} rounds: error vs truth {:.3e}, vs centralized {:.3e}, final disagreement {:.3e}",
        args.agents,
        res.iterations,
        reconstruction_error(&truth, &res.rho_hat)?,
        relative_error(&central.rho_hat, &res.rho_hat)?,
        res.history.last().map_or(0.0, |r| r.primal)
    );
    let mut buf = Vec::new();
    write_disagreement_csv(&res.history, &mut buf)?;
    write_text(args.out.as_deref(), &String::from_utf8_lossy(&buf))
}
