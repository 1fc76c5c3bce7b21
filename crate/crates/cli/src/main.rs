//! `avcal` command-line front end.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tracing_subscriber::filter::LevelFilter;

use avcal::doe::build_orthogonal_array;
use avcal::fielddata::{export_csv, export_events_csv, extract_events, read_field_data, DataSource, FieldDataset, ParseOptions};
use avcal::metrics::evaluate_moes;
use avcal::pipeline::{self, all_mops, calibrate_with, render_report, write_report_series, CalibrationConfig, CalibrationReport};
use avcal::roadsim::{run_scenario, run_scenario_with, Detector, FrameFilter, ScenarioConfig, TrajectoryLog};

#[derive(Parser)]
#[command(name = "avcal", version, about = "Calibrate a traffic simulator against AV detection data")]
struct Cli {
    /// Log level for diagnostics on stderr (error, warn, info, debug).
    #[arg(long, global = true, default_value = "warn")]
    log: LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write what the subject vehicle detects.
    Simulate(SimulateArgs),
    /// Extract events and measures of performance from detection data.
    Extract(ExtractArgs),
    /// Run the two-stage calibration.
    Calibrate(CalibrateArgs),
    /// Evaluation errors between a field and a simulated dataset.
    Evaluate(EvaluateArgs),
    /// Design of experiments.
    #[command(subcommand)]
    Doe(DoeCommand),
    /// Render a calibration report as text and a plot-ready CSV series.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario TOML; the built-in corridor when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Detection log (CSV) of the post-warm-up period.
    #[arg(long, short)]
    out: PathBuf,
    /// Also write every vehicle's state at every step.
    #[arg(long)]
    trajectories: Option<PathBuf>,
    /// Also write spawn, lane-change and collision events.
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    /// Detection data CSV.
    data: PathBuf,
    /// Calibration config supplying event thresholds and lane counts.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the extracted events here.
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Calibration config TOML; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Field data CSV; overrides `field_data` in the config.
    #[arg(long)]
    field: Option<PathBuf>,
    /// Run directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Calibrate the bundled synthetic recovery scenario instead, with this
    /// master seed. Its ground truth is printed alongside the report.
    #[arg(long, conflicts_with_all = ["config", "field", "seed"])]
    synthetic: Option<u64>,
}

#[derive(Args)]
struct EvaluateArgs {
    field: PathBuf,
    sim: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DoeCommand {
    /// Emit a strength-2 orthogonal array as CSV with 1-based levels.
    Gen {
        #[arg(long)]
        levels: usize,
        #[arg(long)]
        factors: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ReportArgs {
    /// `report.json` from a run directory.
    report: PathBuf,
    /// Write the per-generation accuracy series here.
    #[arg(long)]
    series: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_config(path: Option<&Path>) -> Result<CalibrationConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(CalibrationConfig::from_toml(&text)?)
        }
        None => Ok(CalibrationConfig::default()),
    }
}

fn read_data(path: &Path) -> Result<FieldDataset> {
    read_field_data(path, &ParseOptions::default()).with_context(|| format!("reading {}", path.display()))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut sc = match &a.scenario {
        Some(p) => ScenarioConfig::from_toml(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = a.seed {
        sc.seed = s;
    }
    sc.validate()?;
    let mut det = Detector::new(&sc)?;
    let mut records = Vec::new();
    // Keeping every frame is only worth its memory when trajectories are
    // wanted.
    let log = if a.trajectories.is_some() {
        let log = run_scenario(&sc)?;
        records.extend(log.frames.iter().filter(|f| !f.warmup).filter_map(|f| det.observe(f)));
        log
    } else {
        let (summary, events) = run_scenario_with(&sc, FrameFilter::PostWarmup, |f| records.extend(det.observe(f)))?;
        TrajectoryLog {
            time_step: sc.time_step,
            frames: Vec::new(),
            events,
            summary,
        }
    };
    export_csv(&FieldDataset::new(records, DataSource::Simulation), create(&a.out)?)?;
    if let Some(p) = &a.trajectories {
        let links: Vec<String> = sc.network.links.iter().map(|l| l.id.clone()).collect();
        log.write_csv(&links, create(p)?)?;
    }
    if let Some(p) = &a.events {
        log.write_events_csv(create(p)?)?;
    }
    let s = &log.summary;
    eprintln!("{:?}: {} vehicles spawned, {} collisions", log.outcome(), s.spawned, s.collisions);
    Ok(())
}

fn extract(a: ExtractArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let data = read_data(&a.data)?;
    let events = extract_events(&data, &cfg.events);
    if let Some(p) = &a.events {
        export_events_csv(&events, create(p)?)?;
    }
    let mops = all_mops(&data, &events, &cfg.metric_config())?;
    println!("{}", serde_json::to_string_pretty(&mops)?);
    Ok(())
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let (mut cfg, field, truth) = match a.synthetic {
        Some(seed) => {
            let case = pipeline::synthetic::recovery_case(seed)?;
            (case.config.clone(), case.field.clone(), Some(case))
        }
        None => {
            let mut cfg = load_config(a.config.as_deref())?;
            if let Some(f) = a.field {
                cfg.field_data = Some(f);
            }
            let Some(path) = cfg.field_data.clone() else {
                bail!("no field data: pass --field or set field_data in the config");
            };
            let field = read_data(&path)?;
            (cfg, field, None)
        }
    };
    if let Some(o) = a.out {
        cfg.output_dir = Some(o);
    }
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    let report = calibrate_with(&cfg, field)?;
    print!("{}", render_report(&report));
    if let Some(case) = truth {
        let o = case.assess(&report);
        println!("\nground truth");
        for (id, v) in &case.truth.values {
            println!("  {id:<36} {v:.4}");
        }
        println!(
            "inputs recovered: {}, planted parameters found: {}, final accuracy {:.4}",
            o.inputs_recovered, o.planted_found, o.final_accuracy
        );
    }
    if report.failure.is_some() {
        std::process::exit(2);
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let field = read_data(&a.field)?;
    let sim = read_data(&a.sim)?;
    let fe = extract_events(&field, &cfg.events);
    let se = extract_events(&sim, &cfg.events);
    let moe = evaluate_moes((&field, &fe), (&sim, &se), &cfg.cutin, &cfg.metric_config());
    println!("{}", serde_json::to_string_pretty(&moe)?);
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&a.report).with_context(|| format!("reading {}", a.report.display()))?;
    let r: CalibrationReport = serde_json::from_str(&text)?;
    print!("{}", render_report(&r));
    if let Some(p) = &a.series {
        write_report_series(&r, create(p)?)?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_max_level(cli.log)
        .with_writer(io::stderr)
        .init();
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Extract(a) => extract(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Doe(DoeCommand::Gen { levels, factors, out }) => {
            let oa = build_orthogonal_array(levels, factors)?;
            oa.write_csv(output(out.as_deref())?)?;
            Ok(())
        }
        Command::Report(a) => report(a),
    }
}
