//! Danish personal income tax law for 1986 and 1987.
//!
//! A [`TaxSystem`] holds one year's regional tax and the three cumulative
//! national brackets. Each national bracket carries its own base rule, so the
//! 1987 broadening of the middle and top bases is expressed as data rather
//! than code. Evaluation lives in [`engine`].

mod engine;
mod params;

pub use engine::{
    bracket_location, deflate_system, effective_mtr, joint_middle_transfer, liability_breakdown,
    mechanical_ntr_change, mtr_schedule, scale_system, statutory_mtr, tax_liability, taxable_bases,
    LiabilityBreakdown, TaxableBases, MTR_INCREMENT,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Statutory inflation adjustment applied when expressing the 1987 system in 1986 prices.
pub const DEFAULT_DEFLATION_FACTOR: f64 = 1.02;

/// How a national bracket's tax base is built from the income concepts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BaseRule {
    /// `LI + CI - D`
    Taxable,
    /// `LI + max(CI, 0)`
    LiPlusPosCi,
    /// `LI + max(CI - K, 0)`
    LiPlusCiOverK { k: f64 },
}

impl BaseRule {
    pub fn apply(&self, li: f64, ci: f64, d: f64) -> f64 {
        match *self {
            BaseRule::Taxable => li + ci - d,
            BaseRule::LiPlusPosCi => li + ci.max(0.0),
            BaseRule::LiPlusCiOverK { k } => li + (ci - k).max(0.0),
        }
    }

    fn scaled(self, factor: f64) -> Self {
        match self {
            BaseRule::LiPlusCiOverK { k } => BaseRule::LiPlusCiOverK { k: k * factor },
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub base: BaseRule,
    pub cutoff: f64,
    pub rate: f64,
    /// Unused allowances of a non-liable spouse transfer to the other spouse.
    pub joint: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NationalBracket {
    Bottom,
    Middle,
    Top,
}

/// Highest national bracket in which a person is liable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BracketLocation {
    None,
    Bottom,
    Middle,
    Top,
}

impl BracketLocation {
    pub fn as_str(&self) -> &'static str {
        match self {
            BracketLocation::None => "NONE",
            BracketLocation::Bottom => "BOTTOM",
            BracketLocation::Middle => "MIDDLE",
            BracketLocation::Top => "TOP",
        }
    }

    /// Middle or top: the endogenous bracket indicator of the TOT regression.
    pub fn is_middle_or_above(&self) -> bool {
        matches!(self, BracketLocation::Middle | BracketLocation::Top)
    }
}

impl std::fmt::Display for BracketLocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BracketLocation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NONE" => Ok(BracketLocation::None),
            "BOTTOM" => Ok(BracketLocation::Bottom),
            "MIDDLE" => Ok(BracketLocation::Middle),
            "TOP" => Ok(BracketLocation::Top),
            other => Err(Error::Config(format!("unknown bracket location '{other}'"))),
        }
    }
}

/// One year's parameterization of the income tax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxSystem {
    pub year: String,
    /// Average regional (municipal + county + church) rate; records may override it.
    pub regional_rate: f64,
    /// Regional tax applies to `LI + CI - D` above this cutoff.
    pub regional_cutoff: f64,
    pub bottom: Bracket,
    pub middle: Bracket,
    pub top: Bracket,
    /// Marginal-tax ceiling; the top rate is reduced so the combined rate never exceeds it.
    pub ceiling: f64,
}

impl TaxSystem {
    /// Validates and returns the system.
    pub fn new(sys: TaxSystem) -> Result<TaxSystem> {
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("regional", self.regional_rate),
            ("bottom", self.bottom.rate),
            ("middle", self.middle.rate),
            ("top", self.top.rate),
        ];
        for (name, r) in rates {
            if !(r.is_finite() && (0.0..1.0).contains(&r)) {
                return Err(Error::InvalidSystem(format!(
                    "{name} rate {r} outside [0, 1)"
                )));
            }
        }
        if !(self.ceiling.is_finite() && self.ceiling > 0.0 && self.ceiling < 1.0) {
            return Err(Error::InvalidSystem(format!(
                "ceiling {} outside (0, 1)",
                self.ceiling
            )));
        }
        let cutoffs = [
            self.regional_cutoff,
            self.bottom.cutoff,
            self.middle.cutoff,
            self.top.cutoff,
        ];
        if cutoffs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidSystem(
                "cutoffs must be finite and >= 0".into(),
            ));
        }
        if !(self.bottom.cutoff < self.middle.cutoff && self.middle.cutoff < self.top.cutoff) {
            return Err(Error::InvalidSystem(format!(
                "cutoffs must increase strictly: bottom {} middle {} top {}",
                self.bottom.cutoff, self.middle.cutoff, self.top.cutoff
            )));
        }
        for b in [&self.bottom, &self.middle, &self.top] {
            if let BaseRule::LiPlusCiOverK { k } = b.base {
                if !k.is_finite() || k < 0.0 {
                    return Err(Error::InvalidSystem(format!(
                        "base threshold K={k} invalid"
                    )));
                }
            }
        }
        if self.bottom.joint || self.top.joint {
            return Err(Error::InvalidSystem(
                "joint transfer is only modelled for the middle bracket".into(),
            ));
        }
        if self.regional_rate + self.bottom.rate + self.middle.rate > self.ceiling {
            return Err(Error::InvalidSystem(format!(
                "regional + bottom + middle rates exceed the ceiling {}",
                self.ceiling
            )));
        }
        Ok(())
    }

    pub fn bracket(&self, b: NationalBracket) -> &Bracket {
        match b {
            NationalBracket::Bottom => &self.bottom,
            NationalBracket::Middle => &self.middle,
            NationalBracket::Top => &self.top,
        }
    }

    /// Built-in 1986 system (pre-reform).
    pub fn y1986() -> TaxSystem {
        TaxSystem {
            year: "1986".into(),
            regional_rate: 0.280,
            regional_cutoff: 20_700.0,
            bottom: Bracket {
                base: BaseRule::Taxable,
                cutoff: 23_200.0,
                rate: 0.199,
                joint: false,
            },
            middle: Bracket {
                base: BaseRule::Taxable,
                cutoff: 113_400.0,
                rate: 0.144,
                joint: false,
            },
            top: Bracket {
                base: BaseRule::Taxable,
                cutoff: 186_100.0,
                rate: 0.108,
                joint: false,
            },
            ceiling: 0.730,
        }
    }

    /// Built-in 1987 system (post-reform, nominal 1987 DKK).
    pub fn y1987() -> TaxSystem {
        TaxSystem {
            year: "1987".into(),
            regional_rate: 0.290,
            regional_cutoff: 21_200.0,
            bottom: Bracket {
                base: BaseRule::Taxable,
                cutoff: 27_100.0,
                rate: 0.220,
                joint: false,
            },
            middle: Bracket {
                base: BaseRule::LiPlusPosCi,
                cutoff: 130_000.0,
                rate: 0.060,
                joint: true,
            },
            top: Bracket {
                base: BaseRule::LiPlusCiOverK { k: 60_000.0 },
                cutoff: 200_000.0,
                rate: 0.120,
                joint: false,
            },
            // Not binding at the 1987 statutory rates.
            ceiling: 0.730,
        }
    }

    /// Looks up a built-in system by year label.
    pub fn builtin(year: &str) -> Option<TaxSystem> {
        match year.trim() {
            "1986" | "86" => Some(Self::y1986()),
            "1987" | "87" => Some(Self::y1987()),
            _ => None,
        }
    }

    /// Multiplies every DKK-denominated parameter by `factor`; rates are untouched.
    pub(crate) fn scaled_by(&self, factor: f64) -> TaxSystem {
        let scale = |b: &Bracket| Bracket {
            base: b.base.scaled(factor),
            cutoff: b.cutoff * factor,
            ..*b
        };
        TaxSystem {
            year: self.year.clone(),
            regional_rate: self.regional_rate,
            regional_cutoff: self.regional_cutoff * factor,
            bottom: scale(&self.bottom),
            middle: scale(&self.middle),
            top: scale(&self.top),
            ceiling: self.ceiling,
        }
    }

    pub fn from_param_str(text: &str) -> Result<TaxSystem> {
        params::parse(text)
    }

    pub fn load(path: &std::path::Path) -> Result<TaxSystem> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        params::parse(&text).map_err(|e| match e {
            Error::InvalidSystem(m) => Error::InvalidSystem(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_param_string(&self) -> String {
        params::render(self)
    }
}

/// Spouse counterparts of the three income concepts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpouseIncome {
    pub li: f64,
    pub ci: f64,
    pub d: f64,
}

/// One person-year of income (own and, when married, spouse).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncomeRecord {
    /// Labor income.
    pub li: f64,
    /// Capital income (interest income minus interest on debt); often negative.
    pub ci: f64,
    /// Itemized deductions.
    pub d: f64,
    /// Present iff married.
    pub spouse: Option<SpouseIncome>,
    /// Municipal rate overriding the system's average regional rate.
    pub regional_rate: Option<f64>,
    /// Carried through; enters no implemented base.
    pub personal_income: Option<f64>,
    /// Carried through; enters no implemented base.
    pub stock_income: Option<f64>,
}

impl IncomeRecord {
    pub fn single(li: f64, ci: f64, d: f64) -> Self {
        IncomeRecord {
            li,
            ci,
            d,
            spouse: None,
            regional_rate: None,
            personal_income: None,
            stock_income: None,
        }
    }

    pub fn married(li: f64, ci: f64, d: f64, spouse: SpouseIncome) -> Self {
        IncomeRecord {
            spouse: Some(spouse),
            ..Self::single(li, ci, d)
        }
    }

    pub fn is_married(&self) -> bool {
        self.spouse.is_some()
    }

    pub fn with_li(&self, li: f64) -> Self {
        IncomeRecord { li, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        let mut values = vec![("li", self.li), ("ci", self.ci), ("d", self.d)];
        if let Some(s) = self.spouse {
            values.extend([("li_w", s.li), ("ci_w", s.ci), ("d_w", s.d)]);
        }
        for (name, v) in values {
            if !v.is_finite() {
                return Err(Error::InvalidRecord(format!("{name} is not finite")));
            }
        }
        if self.d < 0.0 {
            return Err(Error::InvalidRecord(format!("d = {} < 0", self.d)));
        }
        if let Some(s) = self.spouse {
            if s.d < 0.0 {
                return Err(Error::InvalidRecord(format!("d_w = {} < 0", s.d)));
            }
        }
        if let Some(r) = self.regional_rate {
            if !(r.is_finite() && (0.0..1.0).contains(&r)) {
                return Err(Error::InvalidRecord(format!(
                    "regional rate {r} outside [0, 1)"
                )));
            }
        }
        Ok(())
    }

    /// Scales every DKK amount (own and spouse) by `factor`.
    pub fn scaled_by(&self, factor: f64) -> Self {
        IncomeRecord {
            li: self.li * factor,
            ci: self.ci * factor,
            d: self.d * factor,
            spouse: self.spouse.map(|s| SpouseIncome {
                li: s.li * factor,
                ci: s.ci * factor,
                d: s.d * factor,
            }),
            personal_income: self.personal_income.map(|v| v * factor),
            stock_income: self.stock_income.map(|v| v * factor),
            regional_rate: self.regional_rate,
        }
    }
}
