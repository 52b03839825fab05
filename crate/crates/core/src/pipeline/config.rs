//! Pipeline configuration file.
//!
//! ```toml
//! mode = "synthetic"          # synthetic | file
//! seed = 1                    # synthetic mode: overrides dgp.seed
//! deflation_factor = 1.02     # 1987 law to 1986 prices for treatment assignment
//! outcomes = ["log_wage", "log_earnings", "log_daily_hours", "log_annual_hours",
//!             "skilled", "white_collar", "jjt_cum"]
//! robustness = true           # four extra low-group variants, log wage
//! robustness_step = 5000.0
//!
//! [paths]                     # relative paths resolve against the config file
//! panel = "panel.csv"         # required in file mode
//! deflator = "cpi.csv"        # optional year,index table (default 2% a year)
//! tax_1986 = "law86.toml"     # optional parameter files (default built-ins)
//! tax_1987 = "law87.toml"
//!
//! [groups]
//! low = { lo = 120000.0, hi = 160000.0 }
//! medium = { lo = 160000.0, hi = 280000.0 }
//!
//! [trim]
//! bin_width = 20000.0
//! min_share = 0.1
//! max_share = 0.9
//!
//! [dgp]                       # synthetic mode; every field optional
//! n_individuals = 40000
//! true_semi_elasticity_per_year = 0.1
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::design::{GroupBounds, Range, TrimRule};
use crate::diagnose::{OutcomeKind, ALL_OUTCOMES};
use crate::error::{Error, Result};
use crate::prices::{PriceIndex, TaxCalendar};
use crate::synth::DgpConfig;
use crate::tax::{TaxSystem, DEFAULT_DEFLATION_FACTOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Synthetic,
    File,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub panel: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deflator: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tax_1986: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tax_1987: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub deflation_factor: f64,
    pub outcomes: Vec<OutcomeKind>,
    pub robustness: bool,
    pub robustness_step: f64,
    pub paths: Paths,
    pub groups: GroupBounds,
    pub trim: TrimRule,
    pub dgp: DgpConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: Mode::Synthetic,
            seed: None,
            deflation_factor: DEFAULT_DEFLATION_FACTOR,
            outcomes: ALL_OUTCOMES.to_vec(),
            robustness: true,
            robustness_step: 5_000.0,
            paths: Paths::default(),
            groups: GroupBounds::default(),
            trim: TrimRule::default(),
            dgp: DgpConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Parses a config file; relative paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.paths.panel,
            &mut cfg.paths.deflator,
            &mut cfg.paths.tax_1986,
            &mut cfg.paths.tax_1987,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Seed used for synthetic generation.
    pub fn effective_seed(&self) -> u64 {
        self.seed.unwrap_or(self.dgp.seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.deflation_factor.is_finite() && self.deflation_factor > 0.0) {
            return Err(Error::InvalidFactor(self.deflation_factor));
        }
        self.groups.validate()?;
        self.trim.validate()?;
        if self.robustness {
            if !(self.robustness_step > 0.0 && self.robustness_step.is_finite()) {
                return Err(Error::Config("robustness_step must be > 0".into()));
            }
            for v in self.groups.robustness_variants(self.robustness_step) {
                v.validate()?;
            }
        }
        if self.outcomes.is_empty() {
            return Err(Error::Config("outcomes must not be empty".into()));
        }
        match self.mode {
            Mode::Synthetic => self.dgp.validate(),
            Mode::File if self.paths.panel.is_none() => {
                Err(Error::Config("file mode needs paths.panel".into()))
            }
            Mode::File => Ok(()),
        }
    }

    /// Tax calendar from the configured deflator and parameter files.
    pub fn calendar(&self) -> Result<TaxCalendar> {
        let prices = match &self.paths.deflator {
            Some(p) => PriceIndex::load(p)?,
            None => PriceIndex::default(),
        };
        let load = |p: &Option<PathBuf>, builtin: fn() -> TaxSystem| match p {
            Some(p) => TaxSystem::load(p),
            None => Ok(builtin()),
        };
        Ok(TaxCalendar::new(
            load(&self.paths.tax_1986, TaxSystem::y1986)?,
            load(&self.paths.tax_1987, TaxSystem::y1987)?,
            prices,
        ))
    }
}

/// Parses `LO:HI,LO:HI` (low then medium) into group bounds.
pub fn parse_groups(s: &str) -> Result<GroupBounds> {
    let ranges: Vec<Range> = s
        .split(',')
        .map(|part| {
            let (lo, hi) = part
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("group '{part}' is not LO:HI")))?;
            let num = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad group bound '{v}'")))
            };
            Ok(Range::new(num(lo)?, num(hi)?))
        })
        .collect::<Result<_>>()?;
    match ranges[..] {
        [low, medium] => {
            let g = GroupBounds { low, medium };
            g.validate()?;
            Ok(g)
        }
        _ => Err(Error::Config(format!(
            "expected two groups LO:HI,LO:HI, got {}",
            ranges.len()
        ))),
    }
}
