use super::{BracketLocation, IncomeRecord, NationalBracket, TaxSystem};
use crate::error::{Error, Result};

/// DKK increment used for the finite-difference effective marginal rate.
pub const MTR_INCREMENT: f64 = 100.0;

/// Regional base and one base per national bracket, before any joint adjustment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaxableBases {
    pub regional: f64,
    pub bottom: f64,
    pub middle: f64,
    pub top: f64,
}

pub fn taxable_bases(rec: &IncomeRecord, sys: &TaxSystem) -> TaxableBases {
    let (li, ci, d) = (rec.li, rec.ci, rec.d);
    TaxableBases {
        regional: li + ci - d,
        bottom: sys.bottom.base.apply(li, ci, d),
        middle: sys.middle.base.apply(li, ci, d),
        top: sys.top.base.apply(li, ci, d),
    }
}

/// Own middle-bracket base after absorbing a non-liable spouse's unused allowance.
///
/// Identity unless the middle bracket is joint and the record is married.
pub fn joint_middle_transfer(rec: &IncomeRecord, sys: &TaxSystem) -> f64 {
    let own = sys.middle.base.apply(rec.li, rec.ci, rec.d);
    match rec.spouse {
        Some(s) if sys.middle.joint => {
            let spouse_base = sys.middle.base.apply(s.li, s.ci, s.d);
            // A middle-liable spouse has no allowance left.
            let allowance = (sys.middle.cutoff - spouse_base).max(0.0);
            (own - allowance).max(0.0)
        }
        _ => own,
    }
}

fn regional_rate(rec: &IncomeRecord, sys: &TaxSystem) -> f64 {
    rec.regional_rate.unwrap_or(sys.regional_rate)
}

/// Top rate after the ceiling reduction for this record's regional rate.
fn top_rate(rec: &IncomeRecord, sys: &TaxSystem) -> f64 {
    let below_top = regional_rate(rec, sys) + sys.bottom.rate + sys.middle.rate;
    sys.top.rate.min((sys.ceiling - below_top).max(0.0))
}

/// Liability split by tax component (DKK).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiabilityBreakdown {
    pub regional: f64,
    pub bottom: f64,
    pub middle: f64,
    pub top: f64,
}

impl LiabilityBreakdown {
    pub fn total(&self) -> f64 {
        self.regional + self.bottom + self.middle + self.top
    }
}

pub fn liability_breakdown(rec: &IncomeRecord, sys: &TaxSystem) -> LiabilityBreakdown {
    let bases = taxable_bases(rec, sys);
    let middle_base = joint_middle_transfer(rec, sys);
    let excess = |base: f64, cutoff: f64| (base - cutoff).max(0.0);
    LiabilityBreakdown {
        regional: regional_rate(rec, sys) * excess(bases.regional, sys.regional_cutoff),
        bottom: sys.bottom.rate * excess(bases.bottom, sys.bottom.cutoff),
        middle: sys.middle.rate * excess(middle_base, sys.middle.cutoff),
        top: top_rate(rec, sys) * excess(bases.top, sys.top.cutoff),
    }
}

/// Simulated tax liability in DKK.
pub fn tax_liability(rec: &IncomeRecord, sys: &TaxSystem) -> f64 {
    liability_breakdown(rec, sys).total()
}

/// Bases that strictly exceed their cutoffs, middle base joint-adjusted.
fn liable(rec: &IncomeRecord, sys: &TaxSystem, b: NationalBracket) -> bool {
    let base = match b {
        NationalBracket::Middle => joint_middle_transfer(rec, sys),
        other => sys.bracket(other).base.apply(rec.li, rec.ci, rec.d),
    };
    base > sys.bracket(b).cutoff
}

pub fn bracket_location(rec: &IncomeRecord, sys: &TaxSystem) -> BracketLocation {
    if liable(rec, sys, NationalBracket::Top) {
        BracketLocation::Top
    } else if liable(rec, sys, NationalBracket::Middle) {
        BracketLocation::Middle
    } else if liable(rec, sys, NationalBracket::Bottom) {
        BracketLocation::Bottom
    } else {
        BracketLocation::None
    }
}

/// Effective marginal rate on labor income: liability change from DKK 100 more LI.
pub fn effective_mtr(rec: &IncomeRecord, sys: &TaxSystem) -> f64 {
    let up = rec.with_li(rec.li + MTR_INCREMENT);
    (tax_liability(&up, sys) - tax_liability(rec, sys)) / MTR_INCREMENT
}

/// Statutory marginal rate on the next krone of labor income (right derivative).
pub fn statutory_mtr(rec: &IncomeRecord, sys: &TaxSystem) -> f64 {
    let bases = taxable_bases(rec, sys);
    let mut rate = 0.0;
    if bases.regional >= sys.regional_cutoff {
        rate += regional_rate(rec, sys);
    }
    if bases.bottom >= sys.bottom.cutoff {
        rate += sys.bottom.rate;
    }
    // Once positive, the adjusted middle base moves one-for-one with LI.
    if joint_middle_transfer(rec, sys) >= sys.middle.cutoff {
        rate += sys.middle.rate;
    }
    if bases.top >= sys.top.cutoff {
        rate += top_rate(rec, sys);
    }
    rate
}

/// Expresses `sys` in prices `factor` times lower: every DKK parameter is divided by `factor`.
pub fn deflate_system(sys: &TaxSystem, factor: f64) -> Result<TaxSystem> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::InvalidFactor(factor));
    }
    Ok(sys.scaled_by(1.0 / factor))
}

/// Inverse of [`deflate_system`]: multiplies every DKK parameter by `factor`.
pub fn scale_system(sys: &TaxSystem, factor: f64) -> Result<TaxSystem> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::InvalidFactor(factor));
    }
    Ok(sys.scaled_by(factor))
}

/// `log(1 - tau87_adj) - log(1 - tau86)` holding the record at its 1986 income.
pub fn mechanical_ntr_change(
    rec: &IncomeRecord,
    sys86: &TaxSystem,
    sys87adj: &TaxSystem,
) -> Result<f64> {
    let tau86 = effective_mtr(rec, sys86);
    let tau87 = effective_mtr(rec, sys87adj);
    for (tau, label) in [(tau86, &sys86.year), (tau87, &sys87adj.year)] {
        if tau >= 1.0 {
            return Err(Error::RateAtOrAboveOne {
                rate: tau,
                context: format!("system {label}"),
            });
        }
    }
    Ok((1.0 - tau87).ln() - (1.0 - tau86).ln())
}

/// Marginal rate on labor income along `li_grid` for a single filer with `CI = D = 0`.
pub fn mtr_schedule(sys: &TaxSystem, li_grid: &[f64]) -> Vec<(f64, f64)> {
    li_grid
        .iter()
        .map(|&li| (li, statutory_mtr(&IncomeRecord::single(li, 0.0, 0.0), sys)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tax::SpouseIncome;
    use approx::assert_abs_diff_eq;

    fn married(li: f64, ci: f64, d: f64, li_w: f64) -> IncomeRecord {
        IncomeRecord::married(
            li,
            ci,
            d,
            SpouseIncome {
                li: li_w,
                ci: 0.0,
                d: 0.0,
            },
        )
    }

    #[test]
    fn bases_follow_1987_rules() {
        let sys = TaxSystem::y1987();
        let b = taxable_bases(&IncomeRecord::single(150_000.0, 0.0, 0.0), &sys);
        assert_eq!(b.middle, 150_000.0);

        let b = taxable_bases(&IncomeRecord::single(100_000.0, -30_000.0, 10_000.0), &sys);
        assert_eq!(b.bottom, 60_000.0);
        assert_eq!(b.middle, 100_000.0);
        assert_eq!(b.top, 100_000.0);
        assert_eq!(b.regional, 60_000.0);

        for sys in [TaxSystem::y1986(), TaxSystem::y1987()] {
            let b = taxable_bases(&IncomeRecord::single(0.0, 0.0, 0.0), &sys);
            assert_eq!(
                (b.regional, b.bottom, b.middle, b.top),
                (0.0, 0.0, 0.0, 0.0)
            );
        }
    }

    #[test]
    fn top_base_only_counts_capital_income_above_k() {
        let sys = TaxSystem::y1987();
        let b = taxable_bases(&IncomeRecord::single(100_000.0, 75_000.0, 0.0), &sys);
        assert_eq!(b.top, 115_000.0);
        assert_eq!(b.middle, 175_000.0);
    }

    #[test]
    fn joint_transfer_examples() {
        let sys = TaxSystem::y1987();
        assert_eq!(
            joint_middle_transfer(&married(150_000.0, 0.0, 0.0, 100_000.0), &sys),
            120_000.0
        );
        assert_eq!(
            joint_middle_transfer(&married(150_000.0, 0.0, 0.0, 130_000.0), &sys),
            150_000.0
        );
        assert_eq!(
            joint_middle_transfer(&married(150_000.0, 0.0, 0.0, 170_000.0), &sys),
            150_000.0
        );
        assert_eq!(
            joint_middle_transfer(&married(150_000.0, 0.0, 0.0, 20_000.0), &sys),
            40_000.0
        );
        // 1986 had no transfer.
        assert_eq!(
            joint_middle_transfer(&married(150_000.0, 0.0, 0.0, 20_000.0), &TaxSystem::y1986()),
            150_000.0
        );
        // Single filers keep their own base.
        assert_eq!(
            joint_middle_transfer(&IncomeRecord::single(150_000.0, 0.0, 0.0), &sys),
            150_000.0
        );
        // Transfer cannot push the base below zero.
        assert_eq!(
            joint_middle_transfer(&married(10_000.0, 0.0, 0.0, 0.0), &sys),
            0.0
        );
    }

    #[test]
    fn liability_hand_cases() {
        let sys = TaxSystem::y1986();
        assert_abs_diff_eq!(
            tax_liability(&IncomeRecord::single(150_000.0, 0.0, 0.0), &sys),
            66_707.60,
            epsilon = 0.005
        );
        assert_abs_diff_eq!(
            tax_liability(&IncomeRecord::single(100_000.0, 0.0, 0.0), &sys),
            37_487.20,
            epsilon = 0.005
        );
        assert_eq!(
            tax_liability(&IncomeRecord::single(20_000.0, 0.0, 0.0), &sys),
            0.0
        );
    }

    #[test]
    fn cutoff_equality_is_not_liable() {
        let sys = TaxSystem::y1986();
        let rec = IncomeRecord::single(113_400.0, 0.0, 0.0);
        assert_eq!(bracket_location(&rec, &sys), BracketLocation::Bottom);
        assert_eq!(liability_breakdown(&rec, &sys).middle, 0.0);
    }

    #[test]
    fn bracket_locations_1986() {
        let sys = TaxSystem::y1986();
        let at = |taxable: f64| bracket_location(&IncomeRecord::single(taxable, 0.0, 0.0), &sys);
        assert_eq!(at(105_000.0), BracketLocation::Bottom);
        assert_eq!(at(150_000.0), BracketLocation::Middle);
        assert_eq!(at(200_000.0), BracketLocation::Top);
        assert_eq!(at(20_000.0), BracketLocation::None);
    }

    #[test]
    fn statutory_rates_and_ceiling() {
        let s86 = TaxSystem::y1986();
        let s87 = TaxSystem::y1987();
        let mtr =
            |li: f64, sys: &TaxSystem| effective_mtr(&IncomeRecord::single(li, 0.0, 0.0), sys);
        assert_abs_diff_eq!(mtr(100_000.0, &s86), 0.479, epsilon = 1e-12);
        assert_abs_diff_eq!(mtr(150_000.0, &s86), 0.623, epsilon = 1e-12);
        assert_abs_diff_eq!(mtr(300_000.0, &s86), 0.730, epsilon = 1e-12);
        assert_abs_diff_eq!(mtr(100_000.0, &s87), 0.510, epsilon = 1e-12);
        assert_abs_diff_eq!(mtr(150_000.0, &s87), 0.570, epsilon = 1e-12);
        assert_abs_diff_eq!(mtr(300_000.0, &s87), 0.690, epsilon = 1e-12);
    }

    #[test]
    fn deflation() {
        let s = deflate_system(&TaxSystem::y1987(), 1.02).unwrap();
        assert_abs_diff_eq!(s.middle.cutoff, 127_450.98, epsilon = 0.005);
        assert_abs_diff_eq!(s.top.cutoff, 196_078.43, epsilon = 0.005);
        assert_eq!(s.middle.rate, 0.06);
        assert_eq!(
            deflate_system(&TaxSystem::y1987(), 1.0).unwrap(),
            TaxSystem::y1987()
        );
        assert!(matches!(
            deflate_system(&TaxSystem::y1987(), 0.0),
            Err(Error::InvalidFactor(_))
        ));
        assert!(deflate_system(&TaxSystem::y1987(), -1.0).is_err());
        assert!(deflate_system(&TaxSystem::y1987(), f64::NAN).is_err());
    }

    #[test]
    fn mechanical_change_arithmetic() {
        let rec = IncomeRecord::single(150_000.0, 0.0, 0.0);
        let s86 = TaxSystem::y1986();
        let s86_bottom = IncomeRecord::single(100_000.0, 0.0, 0.0);
        let s87 = TaxSystem::y1987();
        let d = mechanical_ntr_change(&s86_bottom, &s86, &s87).unwrap();
        assert_abs_diff_eq!(d, (0.49f64 / 0.521).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(d, -0.0613, epsilon = 5e-5);
        let d = mechanical_ntr_change(&rec, &s86, &s86).unwrap();
        assert_eq!(d, 0.0);
        // A 1986 bottom-bracket filer pushed to the 1987 middle bracket.
        // The wife is middle-liable herself, so no allowance transfers.
        let married_rec = married(140_000.0, -40_000.0, 0.0, 140_000.0);
        let d = mechanical_ntr_change(&married_rec, &s86, &s87).unwrap();
        assert_abs_diff_eq!(d, (0.430f64 / 0.521).ln(), epsilon = 1e-12);
        // The quoted -0.1921 is rounded from rounded rates.
        assert_abs_diff_eq!(d, -0.1921, epsilon = 2e-4);
    }

    #[test]
    fn schedules_step_at_cutoffs() {
        let grid: Vec<f64> = (0..=3_000).map(|i| i as f64 * 100.0).collect();
        let steps = |sys: &TaxSystem| {
            let mut out: Vec<f64> = Vec::new();
            for (_, r) in mtr_schedule(sys, &grid) {
                if out.last().is_none_or(|l| (l - r).abs() > 1e-12) {
                    out.push(r);
                }
            }
            out
        };
        let s86 = steps(&TaxSystem::y1986());
        let want86 = [0.0, 0.28, 0.479, 0.623, 0.730];
        assert_eq!(s86.len(), want86.len());
        for (a, b) in s86.iter().zip(want86) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let s87 = steps(&TaxSystem::y1987());
        let want87 = [0.0, 0.29, 0.510, 0.570, 0.690];
        assert_eq!(s87.len(), want87.len());
        for (a, b) in s87.iter().zip(want87) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let low: Vec<f64> = (0..20).map(|i| i as f64 * 1_000.0).collect();
        assert!(mtr_schedule(&TaxSystem::y1986(), &low)
            .iter()
            .all(|(_, r)| *r == 0.0));
    }

    #[test]
    fn schedule_jumps_exactly_at_cutoff() {
        let sys = TaxSystem::y1986();
        let s = mtr_schedule(&sys, &[113_399.99, 113_400.0]);
        assert_abs_diff_eq!(s[0].1, 0.479, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1].1, 0.623, epsilon = 1e-12);
    }

    #[test]
    fn regional_override() {
        let sys = TaxSystem::y1986();
        let mut rec = IncomeRecord::single(100_000.0, 0.0, 0.0);
        rec.regional_rate = Some(0.30);
        assert_abs_diff_eq!(effective_mtr(&rec, &sys), 0.499, epsilon = 1e-12);
        // Ceiling still binds in the top bracket.
        rec.li = 300_000.0;
        assert_abs_diff_eq!(effective_mtr(&rec, &sys), 0.730, epsilon = 1e-12);
    }

    #[test]
    fn mtr_at_or_above_one_is_rejected() {
        let mut sys = TaxSystem::y1986();
        sys.ceiling = 0.99;
        sys.regional_rate = 0.9;
        sys.bottom.rate = 0.05;
        sys.middle.rate = 0.04;
        sys.top.rate = 0.5;
        let rec = IncomeRecord::single(300_000.0, 0.0, 0.0);
        // 0.9 + 0.05 + 0.04 = 0.99 then top capped at 0.
        assert!(effective_mtr(&rec, &sys) < 1.0);
        let mut rec = rec;
        rec.regional_rate = Some(0.95);
        assert!(mechanical_ntr_change(&rec, &sys, &sys).is_err());
    }
}
