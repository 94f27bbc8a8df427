//! Command-line front end. `main.rs` only forwards to [`main_with`].

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{self, PresetKind, RunConfig, FIELD_REFERENCE};
use crate::diagnostics;
use crate::error::{Error, Result};
use crate::experiments;
use crate::mnist;
use crate::sim::{self, AlgorithmVariant};
use crate::topology::{TopologyKind, TopologySpec};

#[derive(Debug, Parser)]
#[command(name = "barycenter", version, about = "Asynchronous decentralized entropic Wasserstein barycenters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one run and write its trace CSV.
    #[command(after_long_help = FIELD_REFERENCE)]
    Run(RunArgs),
    /// Run the invariant suites; exits nonzero if any fails.
    Diagnostics,
    /// Print a filled config for a named experiment.
    #[command(after_long_help = FIELD_REFERENCE)]
    Preset(PresetArgs),
    /// Turn IDX images of one digit into a JSON measure manifest.
    MnistPrepare(MnistArgs),
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// JSON config file (fields listed below).
    #[arg(long)]
    pub config: PathBuf,
    /// Destination of the trace CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides sim.master_seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides algorithm.variant.
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Overrides sim.horizon_s (virtual seconds).
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    A2dwb,
    A2dwbn,
    SyncBaseline,
}

impl From<VariantArg> for AlgorithmVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::A2dwb => AlgorithmVariant::A2dwb,
            VariantArg::A2dwbn => AlgorithmVariant::A2dwbn,
            VariantArg::SyncBaseline => AlgorithmVariant::SyncBaseline,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PresetArg {
    Gaussian,
    Quadratic,
    Mnist,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TopologyArg {
    Complete,
    ErdosRenyi,
    Cycle,
    Star,
}

#[derive(Debug, clap::Args)]
pub struct PresetArgs {
    /// Experiment to configure.
    #[arg(value_enum)]
    pub kind: PresetArg,
    /// Network topology.
    #[arg(long, value_enum, default_value = "cycle")]
    pub topology: TopologyArg,
    /// Number of nodes.
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    /// Edge probability for erdos-renyi.
    #[arg(long, default_value_t = 0.2)]
    pub er_edge_prob: f64,
    /// Write here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct MnistArgs {
    /// IDX image file (magic 0x803).
    #[arg(long)]
    pub images: PathBuf,
    /// IDX label file (magic 0x801).
    #[arg(long)]
    pub labels: PathBuf,
    /// Digit to select.
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=9))]
    pub digit: u8,
    /// Number of images, one per node.
    #[arg(long)]
    pub count: usize,
    /// Seed of the image selection.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep zero-intensity pixels as zero-weight atoms.
    #[arg(long)]
    pub keep_zero: bool,
    /// Destination of the JSON manifest.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let stdout = std::io::stdout();
    match dispatch(cli.command, &mut stdout.lock()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config { .. } => 2,
                _ => 1,
            })
        }
    }
}

/// Runs a parsed command, writing its report to `out`.
pub fn dispatch(command: Command, out: &mut dyn Write) -> Result<ExitCode> {
    match command {
        Command::Run(args) => cmd_run(&args, out).map(|_| ExitCode::SUCCESS),
        Command::Diagnostics => cmd_diagnostics(out),
        Command::Preset(args) => cmd_preset(&args, out).map(|_| ExitCode::SUCCESS),
        Command::MnistPrepare(args) => cmd_mnist_prepare(&args, out).map(|_| ExitCode::SUCCESS),
    }
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<sim::SimOutput> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.sim.master_seed = seed;
    }
    if let Some(v) = args.variant {
        cfg.algorithm.variant = v.into();
    }
    if let Some(h) = args.horizon {
        cfg.sim.horizon_s = h;
    }
    let run = cfg.prepare()?;
    let result = sim::run_sim(&run.graph, &run.objective, &run.sim)?;
    experiments::emit_csv(&result.trace, &args.out)?;
    let last = result
        .trace
        .last()
        .ok_or_else(|| Error::Invariant("trace has no snapshots".into()))?;
    writeln!(out, "variant: {}", cfg.algorithm.variant.as_str())?;
    writeln!(out, "gamma: {:e}", run.sim.gamma)?;
    writeln!(out, "iterations: {}", result.iterations)?;
    writeln!(out, "final dual objective: {:.10e}", last.dual_objective)?;
    writeln!(out, "final consensus distance: {:.10e}", last.consensus_distance)?;
    writeln!(out, "trace: {}", args.out.display())?;
    Ok(result)
}

pub fn cmd_diagnostics(out: &mut dyn Write) -> Result<ExitCode> {
    let mut all = true;
    for report in diagnostics::run_all() {
        writeln!(out, "{report}")?;
        all &= report.passed;
    }
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

pub fn cmd_preset(args: &PresetArgs, out: &mut dyn Write) -> Result<()> {
    let kind = match args.topology {
        TopologyArg::Complete => TopologyKind::Complete,
        TopologyArg::ErdosRenyi => TopologyKind::ErdosRenyi,
        TopologyArg::Cycle => TopologyKind::Cycle,
        TopologyArg::Star => TopologyKind::Star,
    };
    let spec = if kind == TopologyKind::ErdosRenyi {
        TopologySpec::erdos_renyi(args.m, args.er_edge_prob, 0)
    } else {
        TopologySpec::new(kind, args.m)
    };
    let preset = match args.kind {
        PresetArg::Gaussian => PresetKind::Gaussian,
        PresetArg::Quadratic => PresetKind::Quadratic,
        PresetArg::Mnist => PresetKind::Mnist,
    };
    let text = config::preset(preset, spec)?.to_json();
    match &args.out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => writeln!(out, "{text}")?,
    }
    Ok(())
}

pub fn cmd_mnist_prepare(args: &MnistArgs, out: &mut dyn Write) -> Result<()> {
    let images = mnist::parse_idx_images(&std::fs::read(&args.images)?)?;
    let labels = mnist::parse_idx_labels(&std::fs::read(&args.labels)?)?;
    let manifest = mnist::prepare_manifest(&images, &labels, args.digit, args.count, args.seed, !args.keep_zero)?;
    std::fs::write(&args.out, serde_json::to_string(&manifest)?)?;
    writeln!(
        out,
        "wrote {} measures of digit {} to {}",
        manifest.measures.len(),
        args.digit,
        args.out.display()
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn run_help_lists_every_config_field() {
        let help = Cli::command()
            .find_subcommand_mut("run")
            .expect("run exists")
            .render_long_help()
            .to_string();
        for field in [
            "topology.kind",
            "topology.m",
            "topology.er_edge_prob",
            "topology.seed",
            "problem.preset",
            "algorithm.variant",
            "algorithm.gamma",
            "algorithm.tau_assumed",
            "algorithm.batch",
            "algorithm.epsilon",
            "sim.horizon_s",
            "sim.activation.mode",
            "sim.activation.interval_s",
            "sim.delay.support",
            "sim.delay.probs",
            "sim.master_seed",
            "eval.eval_every_s",
            "eval.eval_samples",
            "eval.eval_seed",
            "--config",
            "--out",
            "--seed",
            "--variant",
            "--horizon",
        ] {
            assert!(help.contains(field), "missing {field}");
        }
    }
}
