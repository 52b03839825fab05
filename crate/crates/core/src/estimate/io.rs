use std::path::Path;

use super::{ElasticityResult, EventStudyResult, MechanicalContrast, TotResult};
use crate::error::{Error, Result};

/// Columns: `year,beta,se,ci_lo,ci_hi`.
pub fn write_coefficients(path: &Path, r: &EventStudyResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["year", "beta", "se", "ci_lo", "ci_hi"])?;
    for c in &r.coefficients {
        w.write_record([
            c.year.to_string(),
            c.beta.to_string(),
            c.se.to_string(),
            c.ci_lo.to_string(),
            c.ci_hi.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const SUMMARY_COLUMNS: [&str; 22] = [
    "comparison",
    "variant",
    "outcome",
    "effect",
    "first_stage",
    "first_stage_se",
    "first_stage_f",
    "f_above_104_7",
    "reduced_form",
    "reduced_form_se",
    "beta_tot",
    "beta_tot_se",
    "mech_treated_mean",
    "mech_treated_sd",
    "mech_control_mean",
    "mech_control_sd",
    "epsilon",
    "epsilon_se",
    "n_obs",
    "n_clusters",
    "n_treated",
    "n_control",
];

/// One line of the elasticity summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub comparison: String,
    /// Group-bound variant label; `baseline` for the configured bounds.
    pub variant: String,
    pub outcome: String,
    /// `elasticity` for log outcomes, `semi_elasticity` for binary ones.
    pub effect: String,
    pub tot: TotResult,
    pub contrast: MechanicalContrast,
    /// Absent when the mechanical contrast is zero (e.g. placebo arms).
    pub elasticity: Option<ElasticityResult>,
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        let t = &r.tot;
        let c = &r.contrast;
        let (eps, eps_se) = r.elasticity.map_or((String::new(), String::new()), |e| {
            (e.epsilon.to_string(), e.se.to_string())
        });
        w.write_record([
            r.comparison.clone(),
            r.variant.clone(),
            r.outcome.clone(),
            r.effect.clone(),
            t.first_stage.to_string(),
            t.first_stage_se.to_string(),
            t.f_stat.to_string(),
            u8::from(t.strong_instrument()).to_string(),
            t.reduced_form.to_string(),
            t.reduced_form_se.to_string(),
            t.beta.to_string(),
            t.se.to_string(),
            c.mean_treated.to_string(),
            c.sd_treated.to_string(),
            c.mean_control.to_string(),
            c.sd_control.to_string(),
            eps,
            eps_se,
            t.n_obs.to_string(),
            t.n_clusters.to_string(),
            c.n_treated.to_string(),
            c.n_control.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
