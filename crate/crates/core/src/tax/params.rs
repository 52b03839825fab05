//! Plain-text parameter files, one table per tax line:
//!
//! ```toml
//! year = "1987"
//! ceiling = 0.73
//!
//! [regional]
//! cutoff = 21200
//! rate = 0.29
//!
//! [middle]
//! base = "li_plus_pos_ci"   # taxable | li_plus_pos_ci | li_plus_ci_over_k
//! cutoff = 130000
//! joint = true
//! rate = 0.06
//! ```
//!
//! `li_plus_ci_over_k` takes an extra `k = <DKK>` key.

use serde::{Deserialize, Serialize};

use super::{BaseRule, Bracket, TaxSystem};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamFile {
    year: String,
    ceiling: f64,
    regional: RegionalSpec,
    bottom: BracketSpec,
    middle: BracketSpec,
    top: BracketSpec,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionalSpec {
    cutoff: f64,
    rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BracketSpec {
    base: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    cutoff: f64,
    #[serde(default)]
    joint: bool,
    rate: f64,
}

impl BracketSpec {
    fn into_bracket(self, name: &str) -> Result<Bracket> {
        let base = match (self.base.as_str(), self.k) {
            ("taxable", None) => BaseRule::Taxable,
            ("li_plus_pos_ci", None) => BaseRule::LiPlusPosCi,
            ("li_plus_ci_over_k", Some(k)) => BaseRule::LiPlusCiOverK { k },
            ("li_plus_ci_over_k", None) => {
                return Err(Error::InvalidSystem(format!(
                    "[{name}] base li_plus_ci_over_k needs k"
                )))
            }
            (other, Some(_)) if other != "li_plus_ci_over_k" => {
                return Err(Error::InvalidSystem(format!(
                    "[{name}] k is only valid with li_plus_ci_over_k"
                )))
            }
            (other, _) => {
                return Err(Error::InvalidSystem(format!(
                    "[{name}] unknown base rule '{other}'"
                )))
            }
        };
        Ok(Bracket {
            base,
            cutoff: self.cutoff,
            rate: self.rate,
            joint: self.joint,
        })
    }

    fn from_bracket(b: &Bracket) -> Self {
        let (base, k) = match b.base {
            BaseRule::Taxable => ("taxable", None),
            BaseRule::LiPlusPosCi => ("li_plus_pos_ci", None),
            BaseRule::LiPlusCiOverK { k } => ("li_plus_ci_over_k", Some(k)),
        };
        BracketSpec {
            base: base.into(),
            k,
            cutoff: b.cutoff,
            joint: b.joint,
            rate: b.rate,
        }
    }
}

pub(super) fn parse(text: &str) -> Result<TaxSystem> {
    let file: ParamFile =
        toml::from_str(text).map_err(|e| Error::InvalidSystem(e.message().to_string()))?;
    TaxSystem::new(TaxSystem {
        year: file.year,
        regional_rate: file.regional.rate,
        regional_cutoff: file.regional.cutoff,
        bottom: file.bottom.into_bracket("bottom")?,
        middle: file.middle.into_bracket("middle")?,
        top: file.top.into_bracket("top")?,
        ceiling: file.ceiling,
    })
}

pub(super) fn render(sys: &TaxSystem) -> String {
    let file = ParamFile {
        year: sys.year.clone(),
        ceiling: sys.ceiling,
        regional: RegionalSpec {
            cutoff: sys.regional_cutoff,
            rate: sys.regional_rate,
        },
        bottom: BracketSpec::from_bracket(&sys.bottom),
        middle: BracketSpec::from_bracket(&sys.middle),
        top: BracketSpec::from_bracket(&sys.top),
    };
    toml::to_string(&file).expect("tax parameters serialize")
}
