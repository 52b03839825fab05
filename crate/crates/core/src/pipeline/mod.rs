//! End-to-end run: panel, design, balance, estimation, diagnostics, manifest.
//!
//! The analysis runs in memory ([`analyze`]) and is then written as a bundle
//! of CSVs plus `manifest.json`. Every file is a deterministic function of the
//! configuration (and input files), so reruns are byte-identical.

mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::design::{
    build_design, covariate_table, read_assignments, stratify_income, write_assignments,
    write_balance_csv, write_bins, BalanceTable, Comparison, Design, DesignAssignment, Group,
    GroupBounds, PlaceboStatus, Status, TrimRule,
};
use crate::diagnose::{
    bracket_shares, build_outcomes, bunching_histogram, bunching_series, composition_series,
    density_series, employment_series, linear_grid, outcome_paths, schedule_series, write_series,
    OutcomeKind, OutcomeSet, SeriesPoint,
};
use crate::error::{Error, Result};
use crate::estimate::{
    bracket_by_row, elasticity, event_study, tot_iv, write_coefficients, write_summary,
    EventStudyOptions, EventStudyResult, MechanicalContrast, SummaryRow, TotOptions,
};
use crate::panel::{load_panel, quasi_balance, Panel};
use crate::prices::{TaxCalendar, LAST_YEAR};
use crate::synth::generate_panel;
use crate::tax::BracketLocation;

pub use config::{parse_groups, Mode, Paths, PipelineConfig};

pub const MANIFEST: &str = "manifest.json";
pub const ERROR_REPORT: &str = "error.json";

/// Start year for bracket-based outputs; earlier bracket data are treated as unavailable.
pub const BRACKET_START_YEAR: i32 = 1984;

/// Everything the pipeline computes from one panel.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub design: Design,
    pub balance: Vec<BalanceTable>,
    /// `(comparison label, outcome, result)`.
    pub event_studies: Vec<(String, OutcomeKind, EventStudyResult)>,
    pub summary: Vec<SummaryRow>,
    pub diagnostics: Vec<SeriesPoint>,
}

impl Analysis {
    pub fn summary_row(
        &self,
        comparison: &str,
        variant: &str,
        outcome: OutcomeKind,
    ) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| {
            r.comparison == comparison && r.variant == variant && r.outcome == outcome.name()
        })
    }
}

/// Builds or loads the panel named by the configuration.
pub fn obtain_panel(cfg: &PipelineConfig, calendar: &TaxCalendar) -> Result<Panel> {
    match cfg.mode {
        Mode::Synthetic => {
            let mut dgp = cfg.dgp.clone();
            dgp.seed = cfg.effective_seed();
            generate_panel(&dgp, calendar)
        }
        Mode::File => {
            let path = cfg.paths.panel.as_ref().expect("validated");
            let (panel, report) = load_panel(path)?;
            for w in &report.warnings {
                log::warn!("{}: {w}", path.display());
            }
            log::info!("loaded {} rows for {} ids", report.n_rows, report.n_ids);
            Ok(panel)
        }
    }
}

pub fn design_for(
    panel: &Panel,
    calendar: &TaxCalendar,
    deflation_factor: f64,
    groups: &GroupBounds,
    trim: &TrimRule,
) -> Result<Design> {
    let sys87adj = calendar.counterfactual_1987(deflation_factor)?;
    build_design(panel, &calendar.sys86, &sys87adj, groups, trim)
}

fn ids_where(
    assignments: &[DesignAssignment],
    f: impl Fn(&DesignAssignment) -> bool,
) -> BTreeSet<u64> {
    assignments.iter().filter(|a| f(a)).map(|a| a.id).collect()
}

/// Covariate balance: treated vs control per group, employed-in-1986 vs
/// employed-in-1993 within each low-group arm, and the placebo arms.
pub fn balance_tables(panel: &Panel, design: &Design) -> Result<Vec<BalanceTable>> {
    let a = &design.assignments;
    let mut tables = Vec::new();
    for (g, name) in [(Group::Low, "low"), (Group::Medium, "medium")] {
        let t = ids_where(a, |x| x.group == g && x.status == Status::Treated);
        let c = ids_where(a, |x| x.group == g && x.status == Status::Control);
        tables.push(covariate_table(
            panel,
            &format!("treated_vs_control_{name}"),
            ("treated", &t),
            ("control", &c),
        )?);
    }
    for (status, name) in [(Status::Treated, "treated"), (Status::Control, "control")] {
        let all = ids_where(a, |x| x.group == Group::Low && x.status == status);
        let stay: BTreeSet<u64> = all
            .iter()
            .copied()
            .filter(|&id| panel.get(id, LAST_YEAR).is_some_and(|r| r.employed))
            .collect();
        tables.push(covariate_table(
            panel,
            &format!("employed86_vs_employed93_low_{name}"),
            ("employed_1986", &all),
            ("employed_1993", &stay),
        )?);
    }
    if has_placebo(a) {
        let pa = Comparison::Placebo.arms(a);
        let pt: BTreeSet<u64> = pa.iter().filter(|(_, &t)| t).map(|(&i, _)| i).collect();
        let pc: BTreeSet<u64> = pa.iter().filter(|(_, &t)| !t).map(|(&i, _)| i).collect();
        tables.push(covariate_table(
            panel,
            "placebo",
            ("p_treated", &pt),
            ("p_control", &pc),
        )?);
    }
    Ok(tables)
}

fn with_context(e: Error, what: &str) -> Error {
    match e {
        Error::Collinear(m) => Error::Collinear(format!("{what}: {m}")),
        Error::WeakInstrument(m) => Error::WeakInstrument(format!("{what}: {m}")),
        Error::Degenerate(m) => Error::Degenerate(format!("{what}: {m}")),
        e => e,
    }
}

/// TOT and elasticity for one comparison and outcome.
pub fn summarize(
    panel: &Panel,
    outcomes: &OutcomeSet,
    brackets: &[Option<BracketLocation>],
    assignments: &[DesignAssignment],
    comparison: Comparison,
    variant: &str,
    outcome: OutcomeKind,
) -> Result<SummaryRow> {
    let what = format!("{} {variant} {}", comparison.label(), outcome.name());
    let arms = comparison.arms(assignments);
    let tot = tot_iv(
        panel,
        outcomes.column(outcome),
        &arms,
        brackets,
        &TotOptions::default(),
    )
    .map_err(|e| with_context(e, &what))?;
    let contrast = MechanicalContrast::from_assignments(assignments, comparison)
        .map_err(|e| with_context(e, &what))?;
    let elasticity = match elasticity(
        tot.beta,
        tot.se,
        contrast.mean_treated,
        contrast.mean_control,
    ) {
        Ok(e) => Some(e),
        Err(Error::ZeroContrast(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(SummaryRow {
        comparison: comparison.label().into(),
        variant: variant.into(),
        outcome: outcome.name().into(),
        effect: if outcome.is_binary() {
            "semi_elasticity"
        } else {
            "elasticity"
        }
        .into(),
        tot,
        contrast,
        elasticity,
    })
}

fn has_placebo(assignments: &[DesignAssignment]) -> bool {
    assignments
        .iter()
        .any(|a| a.placebo_status != PlaceboStatus::None)
}

fn comparisons(design: &Design) -> Vec<Comparison> {
    let mut v = vec![
        Comparison::Group(Group::Low),
        Comparison::Group(Group::Medium),
    ];
    if has_placebo(&design.assignments) {
        v.push(Comparison::Placebo);
    }
    v
}

fn variant_label(g: &GroupBounds) -> String {
    format!("low_{}_{}", g.low.lo, g.low.hi)
}

/// Diagnostic plot data for one design.
pub fn diagnostics(
    panel: &Panel,
    calendar: &TaxCalendar,
    design: &Design,
    outcomes: &OutcomeSet,
    brackets: &[Option<BracketLocation>],
) -> Result<Vec<SeriesPoint>> {
    let a = &design.assignments;
    let mut pts = Vec::new();

    pts.extend(design.bins.iter().map(|b| SeriesPoint {
        series: "treated_share_by_li86_bin".into(),
        x: b.lo,
        y: b.treated_share(),
        arm: if b.trimmed { "trimmed" } else { "kept" }.into(),
    }));

    let li86: BTreeMap<u64, f64> = a.iter().map(|x| (x.id, x.li86)).collect();
    let wife86: BTreeMap<u64, f64> = a.iter().map(|x| (x.id, x.wife_li86)).collect();
    let all_arms: BTreeMap<u64, bool> = a
        .iter()
        .filter(|x| x.in_arms())
        .map(|x| (x.id, x.status == Status::Treated))
        .collect();
    if !all_arms.is_empty() {
        pts.extend(density_series(
            "density_li86",
            &li86,
            &all_arms,
            &linear_grid(50_000.0, 350_000.0, 121),
        )?);
    }

    let sample_ids: BTreeSet<u64> = a.iter().map(|x| x.id).collect();
    let balanced = quasi_balance(panel, &sample_ids);
    let balanced_outcomes = build_outcomes(&balanced, &calendar.prices);
    for cmp in comparisons(design) {
        let arms = cmp.arms(a);
        if arms.is_empty() {
            continue;
        }
        let prefix = |mut p: SeriesPoint| {
            p.series = format!("{}.{}", cmp.label(), p.series);
            p
        };
        if cmp == Comparison::Group(Group::Low) {
            pts.extend(
                density_series(
                    "density_wife_li86",
                    &wife86,
                    &arms,
                    &linear_grid(0.0, 300_000.0, 121),
                )?
                .into_iter()
                .map(prefix),
            );
        }
        pts.extend(employment_series(&balanced, &arms).into_iter().map(prefix));
        pts.extend(
            composition_series(panel, &arms, &calendar.prices)
                .into_iter()
                .map(prefix),
        );
        pts.extend(
            bracket_shares(panel, brackets, &arms, BRACKET_START_YEAR)
                .into_iter()
                .map(prefix),
        );
        pts.extend(
            outcome_paths(
                &balanced,
                "log_wage",
                balanced_outcomes.column(OutcomeKind::LogWage),
                &arms,
            )
            .into_iter()
            .map(prefix),
        );
        pts.extend(
            outcome_paths(
                panel,
                "jjt_cum",
                outcomes.column(OutcomeKind::JjtCum),
                &arms,
            )
            .into_iter()
            .map(prefix),
        );
    }

    let low_ids = ids_where(a, |x| x.group == Group::Low && x.in_arms());
    pts.extend(bunching_series(&bunching_histogram(
        panel, calendar, &low_ids,
    )));

    pts.extend(schedule_series(
        &[("1986", &calendar.sys86), ("1987", &calendar.sys87)],
        400_000.0,
        500.0,
    ));
    Ok(pts)
}

/// Design, balance, estimation and diagnostics for a loaded panel.
pub fn analyze(panel: &Panel, calendar: &TaxCalendar, cfg: &PipelineConfig) -> Result<Analysis> {
    let design = design_for(
        panel,
        calendar,
        cfg.deflation_factor,
        &cfg.groups,
        &cfg.trim,
    )?;
    estimate_all(panel, calendar, cfg, design)
}

/// Estimation and diagnostics given an existing design.
pub fn estimate_all(
    panel: &Panel,
    calendar: &TaxCalendar,
    cfg: &PipelineConfig,
    design: Design,
) -> Result<Analysis> {
    let balance = balance_tables(panel, &design)?;
    let outcomes = build_outcomes(panel, &calendar.prices);
    let brackets = bracket_by_row(panel, calendar);

    let mut event_studies = Vec::new();
    let mut summary = Vec::new();
    for cmp in comparisons(&design) {
        let arms = cmp.arms(&design.assignments);
        for &kind in &cfg.outcomes {
            let what = format!("{} {}", cmp.label(), kind.name());
            let es = event_study(
                panel,
                outcomes.column(kind),
                &arms,
                &EventStudyOptions::default(),
            )
            .map_err(|e| with_context(e, &what))?;
            event_studies.push((cmp.label().to_string(), kind, es));
            summary.push(summarize(
                panel,
                &outcomes,
                &brackets,
                &design.assignments,
                cmp,
                "baseline",
                kind,
            )?);
        }
    }
    if cfg.robustness {
        for bounds in cfg.groups.robustness_variants(cfg.robustness_step) {
            let variant = design_for(panel, calendar, cfg.deflation_factor, &bounds, &cfg.trim)?;
            summary.push(summarize(
                panel,
                &outcomes,
                &brackets,
                &variant.assignments,
                Comparison::Group(Group::Low),
                &variant_label(&bounds),
                OutcomeKind::LogWage,
            )?);
        }
    }
    let diagnostics = diagnostics(panel, calendar, &design, &outcomes, &brackets)?;
    Ok(Analysis {
        design,
        balance,
        event_studies,
        summary,
        diagnostics,
    })
}

/// Rebuilds a design from a saved assignment file. Placebo cutoffs are not
/// stored, so only the placebo labels survive; income bins are recomputed.
pub fn load_design(path: &Path, groups: &GroupBounds, trim: &TrimRule) -> Result<Design> {
    let assignments = read_assignments(path)?;
    let bins = stratify_income(&mut assignments.clone(), groups, trim)?;
    Ok(Design {
        assignments,
        bins,
        placebo: None,
    })
}

/// Tracks written files for the manifest and for partial-output reports.
#[derive(Debug, Default)]
pub struct Bundle {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl Bundle {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Bundle {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&mut self, name: &str) -> Result<PathBuf> {
        let p = self.dir.join(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        self.files.push(name.to_string());
        Ok(p)
    }

    fn digest(&self, name: &str) -> Result<String> {
        let p = self.dir.join(name);
        let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
        Ok(hex::encode(Sha256::digest(bytes)))
    }

    /// Writes `manifest.json` listing every file with its SHA-256.
    pub fn write_manifest(&self, cfg: &PipelineConfig, command: &str) -> Result<()> {
        #[derive(Serialize)]
        struct FileEntry {
            name: String,
            sha256: String,
        }
        #[derive(Serialize)]
        struct Manifest<'a> {
            tool: &'a str,
            version: &'a str,
            command: &'a str,
            status: &'a str,
            mode: Mode,
            seed: Option<u64>,
            config_sha256: String,
            files: Vec<FileEntry>,
        }
        let files = self
            .files
            .iter()
            .map(|n| {
                Ok(FileEntry {
                    name: n.clone(),
                    sha256: self.digest(n)?,
                })
            })
            .collect::<Result<_>>()?;
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            status: "complete",
            mode: cfg.mode,
            seed: (cfg.mode == Mode::Synthetic).then(|| cfg.effective_seed()),
            config_sha256: config_hash(cfg),
            files,
        };
        let p = self.dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n";
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }
}

/// SHA-256 of the resolved configuration rendered as TOML.
pub fn config_hash(cfg: &PipelineConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_toml().as_bytes()))
}

/// Writes a failure report; the files already written are listed as partial.
pub fn write_error_report(dir: &Path, command: &str, err: &Error, partial: &[String]) {
    #[derive(Serialize)]
    struct Report<'a> {
        status: &'a str,
        command: &'a str,
        error: String,
        partial_outputs: &'a [String],
    }
    let r = Report {
        status: "failed",
        command,
        error: err.to_string(),
        partial_outputs: partial,
    };
    if std::fs::create_dir_all(dir).is_ok() {
        let text = serde_json::to_string_pretty(&r).expect("report serializes") + "\n";
        if let Err(e) = std::fs::write(dir.join(ERROR_REPORT), text) {
            log::error!("could not write error report: {e}");
        }
    }
}

pub fn write_design(bundle: &mut Bundle, design: &Design) -> Result<()> {
    write_assignments(&bundle.path("assignments.csv")?, &design.assignments)?;
    write_bins(&bundle.path("income_bins.csv")?, &design.bins)
}

pub fn write_estimates(bundle: &mut Bundle, analysis: &Analysis) -> Result<()> {
    for (cmp, kind, es) in &analysis.event_studies {
        let name = format!("coefficients/{cmp}_{}.csv", kind.name());
        write_coefficients(&bundle.path(&name)?, es)?;
    }
    write_summary(&bundle.path("summary.csv")?, &analysis.summary)
}

/// Full run into `bundle.dir`; returns the in-memory analysis.
pub fn run_pipeline(cfg: &PipelineConfig, bundle: &mut Bundle) -> Result<Analysis> {
    cfg.validate()?;
    let calendar = cfg.calendar()?;
    let panel = obtain_panel(cfg, &calendar)?;
    if cfg.mode == Mode::Synthetic {
        panel.write_csv(&bundle.path("panel.csv")?)?;
    }
    let analysis = analyze(&panel, &calendar, cfg)?;
    write_design(bundle, &analysis.design)?;
    write_balance_csv(&bundle.path("balance.csv")?, &analysis.balance)?;
    write_estimates(bundle, &analysis)?;
    write_series(&bundle.path("diagnostics.csv")?, &analysis.diagnostics)?;
    bundle.write_manifest(cfg, "pipeline")?;
    log::info!(
        "wrote {} files to {}",
        bundle.files.len(),
        bundle.dir.display()
    );
    Ok(analysis)
}
