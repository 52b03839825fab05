use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use taxreform::design::write_balance_csv;
use taxreform::diagnose::{build_outcomes, write_series};
use taxreform::estimate::bracket_by_row;
use taxreform::panel::{load_panel, Panel};
use taxreform::pipeline::{
    balance_tables, design_for, diagnostics, estimate_all, load_design, obtain_panel, parse_groups,
    run_pipeline, write_design, write_error_report, write_estimates, Bundle, Mode, PipelineConfig,
};
use taxreform::{Error, Result};

/// Joint-taxation reform: synthetic panels, treatment design and elasticity estimates.
#[derive(Debug, Parser)]
#[command(name = "taxreform", version)]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true, env = "TAXREFORM_CONFIG")]
    config: Option<PathBuf>,

    /// Worker threads for panel generation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a panel and write panel.csv.
    Generate(Common),
    /// Assign treatment, income groups and placebo arms.
    Assign(Common),
    /// Covariate balance tables.
    Balance(Common),
    /// Event studies, TOT and elasticities.
    Estimate(Common),
    /// Plot data for identification diagnostics.
    Diagnose(Common),
    /// Every stage in one run.
    Pipeline(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Output directory; stage commands also read earlier outputs from it.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Seed for synthetic generation.
    #[arg(long)]
    seed: Option<u64>,

    /// Number of simulated individuals.
    #[arg(long)]
    n: Option<usize>,

    /// Factor deflating the 1987 law to 1986 prices.
    #[arg(long)]
    deflation_factor: Option<f64>,

    /// Income groups as LO:HI,LO:HI (low, then medium).
    #[arg(long)]
    groups: Option<String>,

    /// Panel CSV; switches to file mode.
    #[arg(long)]
    panel: Option<PathBuf>,

    /// Assignment CSV for balance, estimate and diagnose.
    #[arg(long)]
    assignments: Option<PathBuf>,

    /// Skip the robustness variants.
    #[arg(long)]
    no_robustness: bool,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Assign(_) => "assign",
            Command::Balance(_) => "balance",
            Command::Estimate(_) => "estimate",
            Command::Diagnose(_) => "diagnose",
            Command::Pipeline(_) => "pipeline",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Generate(c)
            | Command::Assign(c)
            | Command::Balance(c)
            | Command::Estimate(c)
            | Command::Diagnose(c)
            | Command::Pipeline(c) => c,
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let c = cli.command.common();
    if let Some(s) = c.seed {
        cfg.seed = Some(s);
    }
    if let Some(n) = c.n {
        cfg.dgp.n_individuals = n;
    }
    if let Some(f) = c.deflation_factor {
        cfg.deflation_factor = f;
    }
    if let Some(g) = &c.groups {
        cfg.groups = parse_groups(g)?;
    }
    if let Some(p) = &c.panel {
        cfg.mode = Mode::File;
        cfg.paths.panel = Some(p.clone());
    }
    if c.no_robustness {
        cfg.robustness = false;
    }
    // Stage commands pick up a panel written by an earlier `generate`.
    if cfg.mode == Mode::Synthetic
        && !matches!(cli.command, Command::Generate(_) | Command::Pipeline(_))
    {
        cfg.mode = Mode::File;
        cfg.paths.panel = Some(c.out.join("panel.csv"));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_panel(cfg: &PipelineConfig) -> Result<Panel> {
    let path = cfg
        .paths
        .panel
        .as_deref()
        .expect("file mode has a panel path");
    let (panel, report) = load_panel(path)?;
    for w in &report.warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(panel)
}

fn assignments_path(c: &Common) -> PathBuf {
    c.assignments
        .clone()
        .unwrap_or_else(|| c.out.join("assignments.csv"))
}

fn run(cli: &Cli, bundle: &mut Bundle) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let c = cli.command.common();
    let calendar = cfg.calendar()?;
    let loaded_design = |panel: &Panel| -> Result<_> {
        let p = assignments_path(c);
        if p.exists() {
            load_design(&p, &cfg.groups, &cfg.trim)
        } else {
            log::info!("{} not found; assigning from scratch", p.display());
            design_for(
                panel,
                &calendar,
                cfg.deflation_factor,
                &cfg.groups,
                &cfg.trim,
            )
        }
    };
    match &cli.command {
        Command::Pipeline(_) => {
            run_pipeline(&cfg, bundle)?;
            return Ok(());
        }
        Command::Generate(_) => {
            let panel = obtain_panel(&cfg, &calendar)?;
            panel.write_csv(&bundle.path("panel.csv")?)?;
        }
        Command::Assign(_) => {
            let panel = read_panel(&cfg)?;
            let design = design_for(
                &panel,
                &calendar,
                cfg.deflation_factor,
                &cfg.groups,
                &cfg.trim,
            )?;
            write_design(bundle, &design)?;
        }
        Command::Balance(_) => {
            let panel = read_panel(&cfg)?;
            let design = loaded_design(&panel)?;
            write_balance_csv(
                &bundle.path("balance.csv")?,
                &balance_tables(&panel, &design)?,
            )?;
        }
        Command::Estimate(_) => {
            let panel = read_panel(&cfg)?;
            let design = loaded_design(&panel)?;
            let analysis = estimate_all(&panel, &calendar, &cfg, design)?;
            write_estimates(bundle, &analysis)?;
        }
        Command::Diagnose(_) => {
            let panel = read_panel(&cfg)?;
            let design = loaded_design(&panel)?;
            let outcomes = build_outcomes(&panel, &calendar.prices);
            let brackets = bracket_by_row(&panel, &calendar);
            let points = diagnostics(&panel, &calendar, &design, &outcomes, &brackets)?;
            write_series(&bundle.path("diagnostics.csv")?, &points)?;
        }
    }
    bundle.write_manifest(&cfg, cli.command.name())
}

/// Usage problems exit with 2, data and estimation failures with 1.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidFactor(_) | Error::OverlappingGroups(_) => 2,
        _ => 1,
    }
}

fn start(out: &Path, cli: &Cli) -> Result<Bundle> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Bundle::new(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .parse_default_env()
        .init();
    let out = cli.command.common().out.clone();
    let command = cli.command.name();
    let mut bundle = Bundle::default();
    let result = start(&out, &cli).and_then(|b| {
        bundle = b;
        run(&cli, &mut bundle)
    });
    match result {
        Ok(()) => {
            let stale = out.join(taxreform::pipeline::ERROR_REPORT);
            if stale.exists() {
                let _ = std::fs::remove_file(stale);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("taxreform {command}: {e}");
            write_error_report(&out, command, &e, &bundle.files);
            ExitCode::from(exit_code(&e))
        }
    }
}
