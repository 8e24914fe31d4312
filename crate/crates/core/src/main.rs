use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use allserp_core::config::{FlavorSelection, PipelineConfig};
use allserp_core::emit::{
    write_audit_report, write_build_outputs, write_inventory_reports, write_registration_report, write_run_summary,
    write_trial_documents, Provenance,
};
use allserp_core::pipeline::{load_rules, run_corpus, CorpusRun};
use allserp_core::synth::write_synth_corpus;
use allserp_core::Result;

#[derive(Parser)]
#[command(name = "allserp", version, about = "Typed AOI extraction and behavioral enrichment for SERP trials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build AOI tables, per-trial JSON and every corpus report.
    BuildAois(RunArgs),
    /// Shipped-ad consistency audit and gaze/cursor registration probe.
    Audit(RunArgs),
    /// Etype inventory, position click rates and content features.
    Inventory(RunArgs),
    /// Per-trial JSON plus screenshots for the replay viewer.
    ReplayEmit(RunArgs),
    /// Write a synthetic corpus with ground truth.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    input_dir: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// TOML config; CLI flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long, value_enum)]
    flavor: Option<FlavorArg>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    activity_threshold: Option<f64>,
    #[arg(long)]
    min_gap_rows: Option<u32>,
    #[arg(long)]
    min_card_height: Option<u32>,
    #[arg(long)]
    composite_trigger_height: Option<u32>,
    #[arg(long)]
    tolerance_x: Option<f64>,
    #[arg(long)]
    tolerance_y: Option<f64>,
    #[arg(long)]
    ad_iou_threshold: Option<f64>,
    #[arg(long)]
    registration_window_ms: Option<i64>,
    #[arg(long)]
    registration_threshold_px: Option<f64>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FlavorArg {
    Typed,
    TypedGapfill,
    OrganicHybrid,
    All,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gaussian pixel noise.
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
}

impl RunArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(r) = &self.rules {
            c.rules = Some(r.clone());
        }
        if let Some(f) = self.flavor {
            c.flavor = match f {
                FlavorArg::Typed => FlavorSelection::Typed,
                FlavorArg::TypedGapfill => FlavorSelection::TypedGapfill,
                FlavorArg::OrganicHybrid => FlavorSelection::OrganicHybrid,
                FlavorArg::All => FlavorSelection::All,
            };
        }
        if let Some(j) = self.jobs {
            c.jobs = j;
        }
        let s = &mut c.segmentation;
        if let Some(v) = self.activity_threshold {
            s.activity_threshold = v;
        }
        if let Some(v) = self.min_gap_rows {
            s.min_gap_rows = v;
        }
        if let Some(v) = self.min_card_height {
            s.min_card_height = v;
        }
        if let Some(v) = self.composite_trigger_height {
            s.composite_trigger_height = v;
        }
        if let Some(v) = self.tolerance_x {
            c.attribution.tolerance_x = v;
        }
        if let Some(v) = self.tolerance_y {
            c.attribution.tolerance_y = v;
        }
        if let Some(v) = self.ad_iou_threshold {
            c.ad_iou_threshold = v;
        }
        if let Some(v) = self.registration_window_ms {
            c.registration.window_ms = v;
        }
        if let Some(v) = self.registration_threshold_px {
            c.registration.threshold_px = v;
        }
        Ok(c)
    }
}

fn report(run: &CorpusRun, out_dir: &Path) -> ExitCode {
    eprintln!(
        "{} trials processed, {} failed; outputs in {}",
        run.trials.len(),
        run.failures.len(),
        out_dir.display()
    );
    for f in &run.failures {
        eprintln!("  {}: {} ({})", f.trial_id, f.reason, f.detail);
    }
    if run.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

#[derive(Clone, Copy)]
enum Task {
    Build,
    Audit,
    Inventory,
    Replay,
}

fn run_task(task: Task, a: &RunArgs) -> Result<ExitCode> {
    let config = a.config()?;
    let rules = load_rules(&config)?;
    let run = run_corpus(&a.input_dir, &config)?;
    let provenance = Provenance::new(&config, &rules);
    match task {
        Task::Build => {
            write_build_outputs(&a.out_dir, &run, &config, &rules)?;
        }
        Task::Audit => {
            let audit = write_audit_report(&a.out_dir, &run, &provenance)?;
            write_registration_report(&a.out_dir, &run, &provenance)?;
            write_run_summary(&a.out_dir, &run, &provenance)?;
            eprintln!(
                "{} shipped rects, {} disagreements, mean IoU {}",
                audit.n_classifications,
                audit.n_disagreements,
                audit.mean_iou.map_or("n/a".into(), |m| format!("{m:.4}"))
            );
        }
        Task::Inventory => {
            write_inventory_reports(&a.out_dir, &run, &provenance)?;
            write_run_summary(&a.out_dir, &run, &provenance)?;
        }
        Task::Replay => {
            write_trial_documents(&a.out_dir, &run, &config.flavor.flavors(), true)?;
        }
    }
    Ok(report(&run, &a.out_dir))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::BuildAois(a) => run_task(Task::Build, &a),
        Command::Audit(a) => run_task(Task::Audit, &a),
        Command::Inventory(a) => run_task(Task::Inventory, &a),
        Command::ReplayEmit(a) => run_task(Task::Replay, &a),
        Command::Synth(a) => {
            let truths = write_synth_corpus(&a.out_dir, a.n, a.seed, a.noise_sigma)?;
            eprintln!("wrote {} trials to {}", truths.len(), a.out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
