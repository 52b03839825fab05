//! Sample selection, treatment and placebo assignment, income groups and
//! overlap trimming.
//!
//! Treatment is a deterministic function of each person's 1986 income
//! (own and wife's) and two tax systems: the 1986 law and the 1987 law
//! expressed in 1986 prices. A person in the 1986 bottom bracket is treated
//! when the counterfactual system would put him in the middle bracket and a
//! control when it would keep him in the bottom bracket.

mod balance;
mod io;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::Panel;
use crate::prices::BASE_YEAR;
use crate::tax::{bracket_location, mechanical_ntr_change, BracketLocation, TaxSystem};

pub use balance::{
    balance_table, covariate_table, normalized_difference, write_balance_csv, BalanceRow,
    BalanceTable, Covariate, COVARIATES,
};
pub use io::{read_assignments, write_assignments, write_bins};

/// Age limit (strict) for the 1986 sample.
pub const MAX_AGE: u32 = 50;

macro_rules! label_enum {
    ($(#[$m:meta])* $name:ident { $($var:ident => $s:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "SCREAMING_SNAKE_CASE")]
        pub enum $name { $($var),+ }

        impl $name {
            pub fn as_str(&self) -> &'static str {
                match self { $($name::$var => $s),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($s => Ok($name::$var),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($name), " '{}'"), other
                    ))),
                }
            }
        }
    };
}

label_enum!(
    /// Treatment status from the 1986 and counterfactual bracket locations.
    Status { Treated => "TREATED", Control => "CONTROL", Excluded => "EXCLUDED" }
);
label_enum!(
    PlaceboStatus { PTreated => "P_TREATED", PControl => "P_CONTROL", None => "NONE" }
);
label_enum!(
    Group { Low => "LOW", Medium => "MEDIUM", Trimmed => "TRIMMED", Out => "OUT" }
);

/// Design labels for one sample member, all evaluated at 1986 income.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignAssignment {
    pub id: u64,
    pub status: Status,
    pub placebo_status: PlaceboStatus,
    pub group: Group,
    pub b86: BracketLocation,
    pub b87_counterfactual: BracketLocation,
    /// `log(1 - tau87adj) - log(1 - tau86)` at 1986 income.
    pub mechanical_change: f64,
    pub li86: f64,
    pub wife_li86: f64,
}

impl DesignAssignment {
    pub fn in_arms(&self) -> bool {
        self.status != Status::Excluded
    }
}

/// Half-open `[lo, hi)` bounds on 1986 labor income.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x < self.hi
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupBounds {
    pub low: Range,
    pub medium: Range,
}

impl Default for GroupBounds {
    fn default() -> Self {
        GroupBounds {
            low: Range::new(120_000.0, 160_000.0),
            medium: Range::new(160_000.0, 280_000.0),
        }
    }
}

impl GroupBounds {
    pub fn validate(&self) -> Result<()> {
        for r in [self.low, self.medium] {
            if !(r.lo.is_finite() && r.hi.is_finite() && r.lo < r.hi) {
                return Err(Error::OverlappingGroups(format!(
                    "empty or invalid range {r}"
                )));
            }
        }
        if self.low.lo < self.medium.hi && self.medium.lo < self.low.hi {
            return Err(Error::OverlappingGroups(format!(
                "low {} and medium {} overlap",
                self.low, self.medium
            )));
        }
        Ok(())
    }

    /// The four low-group variants moving one bound by `step`.
    ///
    /// The medium range is pushed up where needed so the groups stay disjoint.
    pub fn robustness_variants(&self, step: f64) -> [GroupBounds; 4] {
        let lo = self.low;
        [
            Range::new(lo.lo - step, lo.hi),
            Range::new(lo.lo + step, lo.hi),
            Range::new(lo.lo, lo.hi - step),
            Range::new(lo.lo, lo.hi + step),
        ]
        .map(|low| GroupBounds {
            low,
            medium: Range::new(self.medium.lo.max(low.hi), self.medium.hi),
        })
    }

    pub fn group_of(&self, li86: f64) -> Group {
        if self.low.contains(li86) {
            Group::Low
        } else if self.medium.contains(li86) {
            Group::Medium
        } else {
            Group::Out
        }
    }
}

/// Treated-share trimming on fixed-width 1986 income bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrimRule {
    pub bin_width: f64,
    pub min_share: f64,
    pub max_share: f64,
}

impl Default for TrimRule {
    fn default() -> Self {
        TrimRule {
            bin_width: 20_000.0,
            min_share: 0.1,
            max_share: 0.9,
        }
    }
}

impl TrimRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return Err(Error::Config(format!(
                "bin_width {} must be > 0",
                self.bin_width
            )));
        }
        if !(0.0..=1.0).contains(&self.min_share)
            || !(0.0..=1.0).contains(&self.max_share)
            || self.min_share > self.max_share
        {
            return Err(Error::Config(format!(
                "trim range [{}, {}] must lie in [0, 1]",
                self.min_share, self.max_share
            )));
        }
        Ok(())
    }

    fn bin(&self, li86: f64) -> i64 {
        (li86 / self.bin_width).floor() as i64
    }
}

/// Treated share in one income bin, the overlap companion to the income histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct BinShare {
    pub lo: f64,
    pub hi: f64,
    pub n_treated: usize,
    pub n_control: usize,
    pub trimmed: bool,
}

impl BinShare {
    pub fn treated_share(&self) -> f64 {
        self.n_treated as f64 / (self.n_treated + self.n_control) as f64
    }
}

/// Placebo quartiles of wives' 1986 labor income among low-group controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaceboCutoffs {
    pub q1: f64,
    pub q2: f64,
}

/// Full design for one panel: assignments sorted by id plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub assignments: Vec<DesignAssignment>,
    pub bins: Vec<BinShare>,
    pub placebo: Option<PlaceboCutoffs>,
}

impl Design {
    pub fn by_id(&self) -> BTreeMap<u64, &DesignAssignment> {
        self.assignments.iter().map(|a| (a.id, a)).collect()
    }

    pub fn count(&self, group: Group, status: Status) -> usize {
        self.assignments
            .iter()
            .filter(|a| a.group == group && a.status == status)
            .count()
    }
}

/// Which two arms a comparison uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Comparison {
    /// Treated vs control within an income group.
    Group(Group),
    /// Placebo-treated vs placebo-control.
    Placebo,
}

impl Comparison {
    pub fn label(&self) -> &'static str {
        match self {
            Comparison::Group(Group::Low) => "low",
            Comparison::Group(Group::Medium) => "medium",
            Comparison::Group(Group::Trimmed) => "trimmed",
            Comparison::Group(Group::Out) => "out",
            Comparison::Placebo => "placebo",
        }
    }

    /// `Some(true)` for the treated arm, `Some(false)` for the comparison arm.
    pub fn arm(&self, a: &DesignAssignment) -> Option<bool> {
        match self {
            Comparison::Group(g) if a.group == *g => match a.status {
                Status::Treated => Some(true),
                Status::Control => Some(false),
                Status::Excluded => None,
            },
            Comparison::Placebo => match a.placebo_status {
                PlaceboStatus::PTreated => Some(true),
                PlaceboStatus::PControl => Some(false),
                PlaceboStatus::None => None,
            },
            _ => None,
        }
    }

    /// Map from id to treated flag for every id in one of the two arms.
    pub fn arms(&self, assignments: &[DesignAssignment]) -> BTreeMap<u64, bool> {
        assignments
            .iter()
            .filter_map(|a| self.arm(a).map(|t| (a.id, t)))
            .collect()
    }
}

/// Men who in 1986 were under 50, held a November job, were married and had a
/// wife with positive labor income.
pub fn select_sample(panel: &Panel) -> BTreeSet<u64> {
    panel
        .year_rows(BASE_YEAR)
        .filter(|r| {
            r.employed
                && r.age.is_some_and(|a| a < MAX_AGE)
                && r.income
                    .and_then(|inc| inc.spouse)
                    .is_some_and(|s| s.li > 0.0)
        })
        .map(|r| r.id)
        .collect()
}

/// Classifies each sample id from its 1986 income record.
///
/// Groups start as [`Group::Out`] and placebo status as `NONE`; see
/// [`stratify_income`] and [`assign_placebo`].
pub fn assign_treatment(
    panel: &Panel,
    sample: &BTreeSet<u64>,
    sys86: &TaxSystem,
    sys87adj: &TaxSystem,
) -> Result<Vec<DesignAssignment>> {
    sample
        .iter()
        .map(|&id| {
            let rec = panel
                .get(id, BASE_YEAR)
                .and_then(|r| r.income)
                .ok_or_else(|| {
                    Error::InvalidRecord(format!("id {id} has no 1986 income record"))
                })?;
            let b86 = bracket_location(&rec, sys86);
            let b87 = bracket_location(&rec, sys87adj);
            let status = match (b86, b87) {
                (BracketLocation::Bottom, BracketLocation::Middle) => Status::Treated,
                (BracketLocation::Bottom, BracketLocation::Bottom) => Status::Control,
                _ => Status::Excluded,
            };
            Ok(DesignAssignment {
                id,
                status,
                placebo_status: PlaceboStatus::None,
                group: Group::Out,
                b86,
                b87_counterfactual: b87,
                mechanical_change: mechanical_ntr_change(&rec, sys86, sys87adj)?,
                li86: rec.li,
                wife_li86: rec.spouse.map_or(0.0, |s| s.li),
            })
        })
        .collect()
}

/// Labels income groups and trims bins with extreme treated shares.
///
/// Shares are computed over all treated and control ids; an id in a trimmed
/// bin gets [`Group::Trimmed`] if it would otherwise be LOW or MEDIUM.
pub fn stratify_income(
    assignments: &mut [DesignAssignment],
    bounds: &GroupBounds,
    trim: &TrimRule,
) -> Result<Vec<BinShare>> {
    bounds.validate()?;
    trim.validate()?;
    let mut counts: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
    for a in assignments.iter().filter(|a| a.in_arms()) {
        let c = counts.entry(trim.bin(a.li86)).or_default();
        match a.status {
            Status::Treated => c.0 += 1,
            _ => c.1 += 1,
        }
    }
    let bins: Vec<BinShare> = counts
        .into_iter()
        .map(|(k, (t, c))| {
            let share = t as f64 / (t + c) as f64;
            BinShare {
                lo: k as f64 * trim.bin_width,
                hi: (k + 1) as f64 * trim.bin_width,
                n_treated: t,
                n_control: c,
                trimmed: share < trim.min_share || share > trim.max_share,
            }
        })
        .collect();
    let trimmed: BTreeSet<i64> = bins
        .iter()
        .filter(|b| b.trimmed)
        .map(|b| trim.bin(b.lo + 0.5 * trim.bin_width))
        .collect();
    for a in assignments.iter_mut() {
        a.group = match bounds.group_of(a.li86) {
            Group::Out => Group::Out,
            _ if a.in_arms() && trimmed.contains(&trim.bin(a.li86)) => Group::Trimmed,
            g => g,
        };
    }
    Ok(bins)
}

/// Median-unbiased sample quantile (Hyndman-Fan type 8) of sorted data.
pub fn quantile_type8(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty data");
    let h = (n as f64 + 1.0 / 3.0) * p + 1.0 / 3.0;
    if h <= 1.0 {
        return sorted[0];
    }
    if h >= n as f64 {
        return sorted[n - 1];
    }
    let j = h.floor() as usize;
    let frac = h - j as f64;
    sorted[j - 1] + frac * (sorted[j] - sorted[j - 1])
}

/// Splits low-group controls by the first two quartiles of wives' 1986 labor income.
pub fn assign_placebo(assignments: &mut [DesignAssignment]) -> Result<PlaceboCutoffs> {
    let is_pool = |a: &DesignAssignment| a.group == Group::Low && a.status == Status::Control;
    let mut wife: Vec<f64> = assignments
        .iter()
        .filter(|a| is_pool(a))
        .map(|a| a.wife_li86)
        .collect();
    wife.sort_by(f64::total_cmp);
    if wife.len() < 2 || wife[0] == wife[wife.len() - 1] {
        return Err(Error::Degenerate(format!(
            "wives' labor income among {} low-group controls has no spread",
            wife.len()
        )));
    }
    let cut = PlaceboCutoffs {
        q1: quantile_type8(&wife, 0.25),
        q2: quantile_type8(&wife, 0.5),
    };
    for a in assignments.iter_mut() {
        a.placebo_status = if !is_pool(a) {
            PlaceboStatus::None
        } else if a.wife_li86 < cut.q1 {
            PlaceboStatus::PControl
        } else if a.wife_li86 < cut.q2 {
            PlaceboStatus::PTreated
        } else {
            PlaceboStatus::None
        };
    }
    Ok(cut)
}

/// Selection, assignment, stratification and placebo in one pass.
///
/// A degenerate placebo pool leaves `placebo` empty rather than failing.
pub fn build_design(
    panel: &Panel,
    sys86: &TaxSystem,
    sys87adj: &TaxSystem,
    bounds: &GroupBounds,
    trim: &TrimRule,
) -> Result<Design> {
    let sample = select_sample(panel);
    let mut assignments = assign_treatment(panel, &sample, sys86, sys87adj)?;
    let bins = stratify_income(&mut assignments, bounds, trim)?;
    let placebo = match assign_placebo(&mut assignments) {
        Ok(c) => Some(c),
        Err(Error::Degenerate(msg)) => {
            log::warn!("placebo groups not formed: {msg}");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(Design {
        assignments,
        bins,
        placebo,
    })
}
