//! Outcome variables built from the panel.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{OccRank, Panel, PanelRow};
use crate::prices::PriceIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    /// Log real hourly wage of the November job.
    LogWage,
    /// Log real annual earnings of the November job.
    LogEarnings,
    LogDailyHours,
    LogAnnualHours,
    /// Occupation ranked skilled or higher.
    Skilled,
    /// Occupation ranked low-level white-collar or higher.
    WhiteCollar,
    /// At least one job-to-job transition since the first sample year.
    JjtCum,
}

pub const ALL_OUTCOMES: [OutcomeKind; 7] = [
    OutcomeKind::LogWage,
    OutcomeKind::LogEarnings,
    OutcomeKind::LogDailyHours,
    OutcomeKind::LogAnnualHours,
    OutcomeKind::Skilled,
    OutcomeKind::WhiteCollar,
    OutcomeKind::JjtCum,
];

impl OutcomeKind {
    pub fn name(&self) -> &'static str {
        match self {
            OutcomeKind::LogWage => "log_wage",
            OutcomeKind::LogEarnings => "log_earnings",
            OutcomeKind::LogDailyHours => "log_daily_hours",
            OutcomeKind::LogAnnualHours => "log_annual_hours",
            OutcomeKind::Skilled => "skilled",
            OutcomeKind::WhiteCollar => "white_collar",
            OutcomeKind::JjtCum => "jjt_cum",
        }
    }

    /// Linear-probability outcomes report semi-elasticities.
    pub fn is_binary(&self) -> bool {
        matches!(
            self,
            OutcomeKind::Skilled | OutcomeKind::WhiteCollar | OutcomeKind::JjtCum
        )
    }
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OutcomeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_OUTCOMES
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown outcome '{s}'")))
    }
}

/// Every outcome for every panel row, aligned with [`Panel::rows`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutcomeSet {
    pub log_wage: Vec<Option<f64>>,
    pub log_earnings: Vec<Option<f64>>,
    pub log_daily_hours: Vec<Option<f64>>,
    pub log_annual_hours: Vec<Option<f64>>,
    pub skilled: Vec<Option<f64>>,
    pub white_collar: Vec<Option<f64>>,
    pub jjt: Vec<Option<bool>>,
    pub jjt_cum: Vec<Option<f64>>,
}

impl OutcomeSet {
    pub fn column(&self, kind: OutcomeKind) -> &[Option<f64>] {
        match kind {
            OutcomeKind::LogWage => &self.log_wage,
            OutcomeKind::LogEarnings => &self.log_earnings,
            OutcomeKind::LogDailyHours => &self.log_daily_hours,
            OutcomeKind::LogAnnualHours => &self.log_annual_hours,
            OutcomeKind::Skilled => &self.skilled,
            OutcomeKind::WhiteCollar => &self.white_collar,
            OutcomeKind::JjtCum => &self.jjt_cum,
        }
    }
}

fn dummy(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn real_log_wage(r: &PanelRow, prices: &PriceIndex) -> Option<f64> {
    r.log_wage.map(|w| w - prices.level(r.year).ln())
}

/// A transition between consecutive years: new workplace, strictly higher real
/// wage and no unemployment benefits in either year.
fn is_jjt(prev: &PanelRow, cur: &PanelRow, prices: &PriceIndex) -> bool {
    cur.year == prev.year + 1
        && prev.employed
        && cur.employed
        && matches!((prev.workplace_id, cur.workplace_id), (Some(a), Some(b)) if a != b)
        && matches!(
            (real_log_wage(prev, prices), real_log_wage(cur, prices)),
            (Some(a), Some(b)) if b > a
        )
        && prev.ui_benefit == Some(false)
        && cur.ui_benefit == Some(false)
}

/// Outcomes are missing when the person holds no November job.
pub fn build_outcomes(panel: &Panel, prices: &PriceIndex) -> OutcomeSet {
    let n = panel.len();
    let mut out = OutcomeSet {
        log_wage: Vec::with_capacity(n),
        log_earnings: Vec::with_capacity(n),
        log_daily_hours: Vec::with_capacity(n),
        log_annual_hours: Vec::with_capacity(n),
        skilled: Vec::with_capacity(n),
        white_collar: Vec::with_capacity(n),
        jjt: Vec::with_capacity(n),
        jjt_cum: Vec::with_capacity(n),
    };
    let rows = panel.rows();
    let mut ever = false;
    for (i, r) in rows.iter().enumerate() {
        let prev = (i > 0 && rows[i - 1].id == r.id).then(|| &rows[i - 1]);
        if prev.is_none() {
            ever = false;
        }
        let price = prices.level(r.year);
        let job = |v: Option<f64>| v.filter(|_| r.employed);
        out.log_wage.push(job(real_log_wage(r, prices)));
        out.log_earnings.push(job(r
            .earn_nov
            .filter(|&e| e > 0.0)
            .map(|e| (e / price).ln())));
        out.log_daily_hours
            .push(job(r.hours_daily.filter(|&h| h > 0.0).map(f64::ln)));
        out.log_annual_hours
            .push(job(r.hours_annual.filter(|&h| h > 0.0).map(f64::ln)));
        out.skilled
            .push(job(r.occ_rank.map(|k| dummy(k >= OccRank::SKILLED))));
        out.white_collar.push(job(r
            .occ_rank
            .map(|k| dummy(k >= OccRank::LOW_WHITE_COLLAR))));
        let jjt = prev.map(|p| is_jjt(p, r, prices));
        ever |= jjt == Some(true);
        out.jjt.push(jjt);
        out.jjt_cum.push(r.employed.then_some(dummy(ever)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job(id: u64, year: i32, wage: f64, workplace: u64, ui: bool) -> PanelRow {
        let mut r = PanelRow::missing(id, year);
        r.employed = true;
        r.log_wage = Some(wage.ln());
        r.workplace_id = Some(workplace);
        r.ui_benefit = Some(ui);
        r.occ_rank = OccRank::new(3);
        r
    }

    fn flat() -> PriceIndex {
        PriceIndex::constant_inflation(0.0)
    }

    #[test]
    fn jjt_conditions() {
        let p = Panel::new(vec![
            job(1, 1985, 100.0, 1, false),
            job(1, 1986, 110.0, 2, false),
            job(2, 1985, 110.0, 1, false),
            job(2, 1986, 100.0, 2, false),
            job(3, 1985, 100.0, 1, false),
            job(3, 1986, 110.0, 2, true),
            job(4, 1985, 100.0, 1, false),
            job(4, 1986, 110.0, 1, false),
            job(4, 1987, 90.0, 1, false),
        ])
        .unwrap();
        let o = build_outcomes(&p, &flat());
        assert_eq!(o.jjt[1], Some(true));
        assert_eq!(o.jjt[3], Some(false));
        assert_eq!(o.jjt[5], Some(false));
        assert_eq!(o.jjt_cum[1], Some(1.0));
        assert_eq!(&o.jjt_cum[6..9], &[Some(0.0); 3]);
        assert_eq!(o.jjt[0], None);
    }

    #[test]
    fn jjt_cum_persists_through_non_employment() {
        let mut gap = PanelRow::missing(1, 1987);
        gap.ui_benefit = Some(true);
        let p = Panel::new(vec![
            job(1, 1985, 100.0, 1, false),
            job(1, 1986, 110.0, 2, false),
            gap,
            job(1, 1988, 100.0, 2, false),
        ])
        .unwrap();
        let o = build_outcomes(&p, &flat());
        assert_eq!(o.jjt_cum, vec![Some(0.0), Some(1.0), None, Some(1.0)]);
        assert_eq!(o.log_wage[2], None);
    }

    #[test]
    fn real_values_and_dummies() {
        let prices = PriceIndex::default();
        let mut r = job(1, 1987, 102.0, 1, false);
        r.earn_nov = Some(204_000.0);
        r.occ_rank = OccRank::new(2);
        let p = Panel::new(vec![r]).unwrap();
        let o = build_outcomes(&p, &prices);
        assert!((o.log_wage[0].unwrap() - 100f64.ln()).abs() < 1e-12);
        assert!((o.log_earnings[0].unwrap() - 200_000f64.ln()).abs() < 1e-12);
        assert_eq!(o.skilled[0], Some(1.0));
        assert_eq!(o.white_collar[0], Some(0.0));
        assert_eq!(o.log_daily_hours[0], None);
    }
}
