//! `postdp`: noise sampling, sensitivity estimation, protection, attacks and
//! privacy-budget sweeps from the command line.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use postdp_core::experiments::{
    emit_report, load_report, resolve_sensitivity, row_noise_seed, run_sweep, train_attacker, train_pipeline,
    trend_statistics, victim_attack_accuracy, write_report, ReportFormat, SensitivitySource, SweepConfig, SweepReport,
};
use postdp_core::mechanisms::{scale_for_budget, MechanismKind, MechanismSpec, PrivacyBudget, DEFAULT_GAUSSIAN_DELTA};
use postdp_core::mia::write_attack_csv;
use postdp_core::protection::{protect_existing, ReleasedModel};
use postdp_core::RngStream;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "postdp", version)]
/// Post-training noise protection for fine-tuned classifiers
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw noise samples from a mechanism
    Sample(SampleArgs),
    /// Estimate the fine-tuning sensitivity from sampled adjacent pairs
    Sensitivity(SensitivityArgs),
    /// Train, perturb the head once, and export the released model
    Protect(ProtectArgs),
    /// Run the shadow-model membership attack against an exported model
    Attack(AttackArgs),
    /// Run a full privacy-budget sweep
    Sweep(SweepArgs),
    /// Reformat or summarise a JSON sweep report
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Desk,
    Overfit,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// JSON sweep configuration
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration used when --config is absent
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    /// Overrides the configuration's master seed
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<SweepConfig> {
        let mut cfg = match &self.config {
            Some(p) => SweepConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
            None => match self.preset {
                Preset::Desk => SweepConfig::desk(0),
                Preset::Overfit => SweepConfig::overfit(0),
            },
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long, value_parser = parse_kind)]
    mechanism: MechanismKind,
    /// Logistic s, Laplace b or Gaussian σ
    #[arg(long)]
    scale: f64,
    /// δ for the Gaussian mechanism (default 1e-5)
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, short = 'n', default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SensitivityArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Number of sampled pairs; defaults to the configuration's m, or 50
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProtectArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_parser = parse_kind)]
    mechanism: MechanismKind,
    /// Privacy budget; the scale follows from the configured sensitivity
    #[arg(long, conflicts_with = "scale", required_unless_present = "scale")]
    epsilon: Option<f64>,
    /// Noise scale used directly
    #[arg(long)]
    scale: Option<f64>,
    /// Seed of the noise draw; derived from the master seed when absent
    #[arg(long)]
    noise_seed: Option<u64>,
    /// Output directory for the released model
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AttackArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Directory written by `protect`
    #[arg(long)]
    model: PathBuf,
    /// Also write the shadow attack records as CSV
    #[arg(long)]
    attack_data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// JSON report
    #[arg(long)]
    out: PathBuf,
    /// Per-row CSV
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Repeat-averaged CSV
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutputFormat {
    Csv,
    Summary,
    Json,
    /// Rank correlations of ε against utility loss and attack accuracy
    Trends,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// JSON report written by `sweep`
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<MechanismKind, String> {
    s.parse().map_err(|e: postdp_core::Error| e.to_string())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(value: &impl Serialize, path: Option<&Path>) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn sample(args: SampleArgs) -> Result<()> {
    let delta = match args.mechanism {
        MechanismKind::Gaussian => args.delta.unwrap_or(DEFAULT_GAUSSIAN_DELTA),
        _ => args.delta.unwrap_or(0.0),
    };
    let spec = MechanismSpec::new(args.mechanism, args.scale, delta)?;
    let mut w = output(args.out.as_deref())?;
    writeln!(w, "value")?;
    for v in spec.noise(RngStream::new(args.seed, 0), args.count) {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

fn sensitivity(args: SensitivityArgs) -> Result<()> {
    let mut cfg = args.config.load()?;
    let seed = match cfg.sensitivity {
        SensitivitySource::Sampled { seed, .. } => seed,
        _ => 0,
    };
    let m = match (args.m, &cfg.sensitivity) {
        (Some(m), _) | (None, &SensitivitySource::Sampled { m, .. }) => m,
        (None, _) => 50,
    };
    cfg.sensitivity = SensitivitySource::Sampled { m, seed };
    let pipeline = train_pipeline(&cfg)?;
    let est = resolve_sensitivity(&cfg, &pipeline)?.estimate.context("sampling produced no estimate")?;
    write_json(&est, args.out.as_deref())
}

fn protect(args: ProtectArgs) -> Result<()> {
    let cfg = args.config.load()?;
    let pipeline = train_pipeline(&cfg)?;
    let sens = resolve_sensitivity(&cfg, &pipeline)?.for_kind(args.mechanism).ok();
    let delta = if args.mechanism == MechanismKind::Gaussian { cfg.delta } else { 0.0 };
    let spec = match (args.epsilon, args.scale) {
        (Some(eps), _) => {
            let sens = sens.context("the configuration provides no sensitivity for this mechanism")?;
            scale_for_budget(args.mechanism, PrivacyBudget::new(eps, delta)?, sens)?
        }
        (None, Some(scale)) => MechanismSpec::new(args.mechanism, scale, delta)?,
        (None, None) => bail!("one of --epsilon or --scale is required"),
    };
    let noise_seed = args.noise_seed.unwrap_or_else(|| row_noise_seed(cfg.master_seed, args.mechanism, 0, 0));
    let model = protect_existing(&pipeline.theta, &pipeline.omega, &spec, noise_seed)?;
    let released = model.release(sens)?;
    released.export(&args.out).with_context(|| format!("exporting to {}", args.out.display()))?;
    eprintln!(
        "released {} model (scale {}) to {}",
        spec.kind(),
        spec.scale(),
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct AttackResult {
    mia_accuracy: f64,
    shadow_attack_accuracy: f64,
    members: usize,
    nonmembers: usize,
}

fn attack(args: AttackArgs) -> Result<()> {
    let cfg = args.config.load()?;
    let released = ReleasedModel::load(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let pipeline = train_pipeline(&cfg)?;
    let (classifier, records) = train_attacker(&cfg, &pipeline)?;
    if let Some(path) = &args.attack_data {
        write_attack_csv(&records, File::create(path)?)?;
    }
    let per_side = pipeline.splits.finetune.len().min(pipeline.splits.holdout.len());
    let result = AttackResult {
        mia_accuracy: victim_attack_accuracy(&cfg, &pipeline, &classifier, &released.theta, &released.omega)?,
        shadow_attack_accuracy: classifier.accuracy(&records)?,
        members: per_side,
        nonmembers: per_side,
    };
    write_json(&result, args.out.as_deref())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let cfg = args.config.load()?;
    let report = run_sweep(&cfg)?;
    emit(&report, ReportFormat::Json, &args.out)?;
    if let Some(p) = &args.csv {
        emit(&report, ReportFormat::Csv, p)?;
    }
    if let Some(p) = &args.summary {
        emit(&report, ReportFormat::SummaryCsv, p)?;
    }
    Ok(())
}

fn emit(report: &SweepReport, format: ReportFormat, path: &Path) -> Result<()> {
    emit_report(report, path, format).with_context(|| format!("writing {}", path.display()))
}

fn report(args: ReportArgs) -> Result<()> {
    let report = load_report(&args.input)
        .with_context(|| format!("reading report {}", args.input.display()))?;
    let format = match args.format {
        OutputFormat::Csv => ReportFormat::Csv,
        OutputFormat::Summary => ReportFormat::SummaryCsv,
        OutputFormat::Json => ReportFormat::Json,
        OutputFormat::Trends => return write_json(&trend_statistics(&report)?, args.out.as_deref()),
    };
    let mut w = output(args.out.as_deref())?;
    write_report(&report, format, &mut w)?;
    w.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Sample(a) => sample(a),
        Command::Sensitivity(a) => sensitivity(a),
        Command::Protect(a) => protect(a),
        Command::Attack(a) => attack(a),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a),
    }
}
