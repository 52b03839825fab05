//! Synthetic household panel with a known wage response to net-of-tax rates.
//!
//! Log real hourly wages follow
//!
//! ```text
//! w_it = a_i + g_t + gamma * sum_{s=1987..t} log(1 - tau_is) + e_it
//! ```
//!
//! where `tau_is` is the effective marginal rate the tax engine assigns to the
//! person's year-`s` income under that year's law. Taxable incomes track the
//! 1986 level in real terms, plus one permanent post-reform shift and
//! transitory noise; they do not respond to wages, so each person's
//! post-reform bracket is stationary and the TOT regression targets a single
//! number:
//!
//! ```text
//! eps* = gamma * (H + 1) / 2,   H = number of post-reform years (7)
//! ```
//!
//! i.e. the average cumulative exposure over the post-reform window per unit
//! of net-of-tax contrast. Employment exits and attrition are independent of
//! potential outcomes, so composition diagnostics should stay flat.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Education, OccRank, Panel, PanelRow};
use crate::prices::{sample_years, TaxCalendar, BASE_YEAR, FIRST_YEAR, LAST_YEAR, REFORM_YEAR};
use crate::tax::{effective_mtr, IncomeRecord, SpouseIncome};

/// Number of post-reform years in the sample window.
pub const POST_YEARS: i32 = LAST_YEAR - REFORM_YEAR + 1;

/// First year with daily hours in the job-spell data.
pub const DAILY_HOURS_FROM: i32 = 1985;

/// Net-of-tax reference for centring year effects: the 1987 bottom-bracket rate.
const REFERENCE_RATE: f64 = 0.51;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogNormalSpec {
    pub median: f64,
    pub log_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalSpec {
    pub mean: f64,
    pub sd: f64,
}

/// Data-generating process. Every field has a default; see [`DgpConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    pub n_individuals: usize,
    pub seed: u64,
    /// Log-wage response per year of exposure to log(1 - tau).
    pub true_semi_elasticity_per_year: f64,
    pub age_min: u32,
    pub age_max: u32,
    pub married_share: f64,
    /// Share of wives with strictly positive labor income.
    pub wife_working_share: f64,
    pub own_li: LogNormalSpec,
    pub wife_li: LogNormalSpec,
    /// Own CI = intercept + slope * max(LI - 100k, 0) + N(0, sd).
    pub ci_intercept: f64,
    pub ci_slope: f64,
    pub ci_sd: f64,
    pub deductions: NormalSpec,
    pub wife_ci: NormalSpec,
    pub wife_deductions: NormalSpec,
    /// Permanent log shift of own LI from 1987 on.
    pub permanent_income_sd: f64,
    /// Year-specific log noise on own LI outside 1986.
    pub transitory_income_sd: f64,
    /// Permanent log shift of the wife's LI from 1987 on; the main source of
    /// bracket non-compliance.
    pub wife_permanent_income_sd: f64,
    pub wife_transitory_income_sd: f64,
    /// Per-year probability of leaving the sample after 1986 (absorbing).
    pub attrition_hazard: f64,
    /// Per-year probability of holding no November job.
    pub employment_exit_hazard: f64,
    pub measurement_noise_sd: f64,
    /// Individual log-wage effect; `mean` is the level at the median LI.
    pub individual_effect: NormalSpec,
    /// Loading of the individual effect on log(LI_86 / median).
    pub individual_effect_li_loading: f64,
    /// Real log-wage growth per year.
    pub wage_trend: f64,
    pub year_effect_sd: f64,
    pub daily_hours: NormalSpec,
    pub annual_days: NormalSpec,
    /// Promotion when N(0,1) + loading * tax increment exceeds the threshold.
    pub promotion_threshold: f64,
    pub promotion_loading: f64,
    pub jjt_threshold: f64,
    pub jjt_loading: f64,
    pub ui_share: f64,
    pub regional_rate: Option<f64>,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            n_individuals: 40_000,
            seed: 1,
            true_semi_elasticity_per_year: 0.1,
            age_min: 25,
            age_max: 54,
            married_share: 0.9,
            wife_working_share: 0.92,
            own_li: LogNormalSpec {
                median: 145_000.0,
                log_sd: 0.17,
            },
            wife_li: LogNormalSpec {
                median: 95_000.0,
                log_sd: 0.40,
            },
            ci_intercept: -10_000.0,
            ci_slope: -0.7,
            ci_sd: 18_000.0,
            deductions: NormalSpec {
                mean: 10_500.0,
                sd: 7_000.0,
            },
            wife_ci: NormalSpec {
                mean: -6_000.0,
                sd: 13_000.0,
            },
            wife_deductions: NormalSpec {
                mean: 8_000.0,
                sd: 8_000.0,
            },
            permanent_income_sd: 0.05,
            transitory_income_sd: 0.03,
            wife_permanent_income_sd: 0.7,
            wife_transitory_income_sd: 0.3,
            // 1 - (1 - h)^7 = 2.2% by 1993.
            attrition_hazard: 0.003174,
            employment_exit_hazard: 0.05,
            measurement_noise_sd: 0.05,
            individual_effect: NormalSpec { mean: 4.6, sd: 0.2 },
            individual_effect_li_loading: 0.8,
            wage_trend: 0.02,
            year_effect_sd: 0.005,
            daily_hours: NormalSpec { mean: 7.4, sd: 0.5 },
            annual_days: NormalSpec {
                mean: 225.0,
                sd: 12.0,
            },
            promotion_threshold: 1.8,
            promotion_loading: 10.0,
            jjt_threshold: 2.0,
            jjt_loading: 10.0,
            ui_share: 0.04,
            regional_rate: None,
        }
    }
}

impl DgpConfig {
    /// Default process with `gamma` chosen so that [`true_elasticity`] is `eps`.
    pub fn with_elasticity(eps: f64) -> Self {
        DgpConfig {
            true_semi_elasticity_per_year: gamma_for_elasticity(eps),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("dgp: {m}")));
        if self.n_individuals == 0 {
            return bad("n_individuals must be > 0".into());
        }
        for (name, p) in [
            ("attrition_hazard", self.attrition_hazard),
            ("employment_exit_hazard", self.employment_exit_hazard),
            ("married_share", self.married_share),
            ("wife_working_share", self.wife_working_share),
            ("ui_share", self.ui_share),
        ] {
            if !(0.0..1.0).contains(&p) && !(p == 1.0 && name.ends_with("share")) {
                return bad(format!("{name} = {p} outside [0, 1)"));
            }
        }
        for (name, sd) in [
            ("measurement_noise_sd", self.measurement_noise_sd),
            ("permanent_income_sd", self.permanent_income_sd),
            ("transitory_income_sd", self.transitory_income_sd),
            ("wife_permanent_income_sd", self.wife_permanent_income_sd),
            ("wife_transitory_income_sd", self.wife_transitory_income_sd),
            ("ci_sd", self.ci_sd),
            ("year_effect_sd", self.year_effect_sd),
            ("own_li.log_sd", self.own_li.log_sd),
            ("wife_li.log_sd", self.wife_li.log_sd),
            ("individual_effect.sd", self.individual_effect.sd),
            ("deductions.sd", self.deductions.sd),
            ("wife_ci.sd", self.wife_ci.sd),
            ("wife_deductions.sd", self.wife_deductions.sd),
            ("daily_hours.sd", self.daily_hours.sd),
            ("annual_days.sd", self.annual_days.sd),
        ] {
            if !(sd.is_finite() && sd >= 0.0) {
                return bad(format!("{name} = {sd} must be >= 0"));
            }
        }
        if self.own_li.median <= 0.0 || self.wife_li.median <= 0.0 {
            return bad("income medians must be > 0".into());
        }
        if self.age_min > self.age_max {
            return bad("age_min > age_max".into());
        }
        if !self.true_semi_elasticity_per_year.is_finite() {
            return bad("true_semi_elasticity_per_year must be finite".into());
        }
        if self.daily_hours.mean <= 0.0 || self.annual_days.mean <= 0.0 {
            return bad("hours means must be > 0".into());
        }
        if let Some(r) = self.regional_rate {
            if !(0.0..1.0).contains(&r) {
                return bad(format!("regional_rate {r} outside [0, 1)"));
            }
        }
        Ok(())
    }
}

/// Long-run elasticity implied by the per-year response: `gamma * (H + 1) / 2`.
pub fn true_elasticity(cfg: &DgpConfig) -> f64 {
    cfg.true_semi_elasticity_per_year * mean_exposure_years()
}

pub fn gamma_for_elasticity(eps: f64) -> f64 {
    eps / mean_exposure_years()
}

fn mean_exposure_years() -> f64 {
    (POST_YEARS as f64 + 1.0) / 2.0
}

/// Draws the full unbalanced panel, canonical `(id, year)` order. Ids start at 1.
pub fn generate_panel(cfg: &DgpConfig, calendar: &TaxCalendar) -> Result<Panel> {
    cfg.validate()?;
    let years = YearEffects::draw(cfg);
    let systems: Vec<_> = sample_years().map(|y| calendar.system(y)).collect();
    let people: Vec<Vec<PanelRow>> = (1..=cfg.n_individuals as u64)
        .into_par_iter()
        .map(|id| Person::simulate(id, cfg, calendar, &systems, &years))
        .collect::<Result<_>>()?;
    Panel::new(people.into_iter().flatten().collect())
}

struct YearEffects {
    g: Vec<f64>,
}

impl YearEffects {
    fn draw(cfg: &DgpConfig) -> Self {
        let mut rng = stream(cfg.seed, u64::MAX);
        let noise = Normal::new(0.0, cfg.year_effect_sd).unwrap();
        let offset = cfg.true_semi_elasticity_per_year * (1.0 - REFERENCE_RATE).ln();
        let g = sample_years()
            .map(|y| {
                let t = (y - BASE_YEAR) as f64;
                let e = if y == BASE_YEAR {
                    0.0
                } else {
                    noise.sample(&mut rng)
                };
                // A worker who stays in the bottom bracket sees only the trend.
                let centring = if y >= REFORM_YEAR {
                    -offset * (y - BASE_YEAR) as f64
                } else {
                    0.0
                };
                cfg.wage_trend * t + e + centring
            })
            .collect();
        YearEffects { g }
    }

    fn get(&self, year: i32) -> f64 {
        self.g[(year - FIRST_YEAR) as usize]
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normal(rng: &mut ChaCha8Rng, spec: NormalSpec) -> f64 {
    Normal::new(spec.mean, spec.sd).unwrap().sample(rng)
}

fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    Normal::new(0.0, 1.0).unwrap().sample(rng)
}

struct Person;

impl Person {
    fn simulate(
        id: u64,
        cfg: &DgpConfig,
        calendar: &TaxCalendar,
        systems: &[crate::tax::TaxSystem],
        years: &YearEffects,
    ) -> Result<Vec<PanelRow>> {
        let mut rng = stream(cfg.seed, id);

        // Fixed traits, 1986 values.
        let age86 = rng.random_range(cfg.age_min..=cfg.age_max);
        let married = rng.random_bool(cfg.married_share);
        let wife_works = married && rng.random_bool(cfg.wife_working_share);
        let li86 = LogNormal::new(cfg.own_li.median.ln(), cfg.own_li.log_sd)
            .unwrap()
            .sample(&mut rng);
        let ci86 = cfg.ci_intercept
            + cfg.ci_slope * (li86 - 100_000.0).max(0.0)
            + cfg.ci_sd * std_normal(&mut rng);
        let d86 = normal(&mut rng, cfg.deductions).max(0.0);
        let wife_li86 = if wife_works {
            LogNormal::new(cfg.wife_li.median.ln(), cfg.wife_li.log_sd)
                .unwrap()
                .sample(&mut rng)
        } else {
            0.0
        };
        let wife_ci86 = normal(&mut rng, cfg.wife_ci);
        let wife_d86 = normal(&mut rng, cfg.wife_deductions).max(0.0);
        let psi = cfg.permanent_income_sd * std_normal(&mut rng);
        let psi_w = cfg.wife_permanent_income_sd * std_normal(&mut rng);

        let education = match rng.random::<f64>() {
            u if u < 0.35 => Education::Low,
            u if u < 0.92 => Education::Middle,
            _ => Education::High,
        };
        let n_children = match rng.random::<f64>() {
            u if u < 0.15 => 0,
            u if u < 0.45 => 1,
            u if u < 0.85 => 2,
            _ => 3,
        };
        let full_time = rng.random_bool(0.5);
        let private_sector = rng.random_bool(0.7);
        let a_i = cfg.individual_effect.mean
            + cfg.individual_effect_li_loading * (li86 / cfg.own_li.median).ln()
            + cfg.individual_effect.sd * std_normal(&mut rng);
        let daily_base = normal(&mut rng, cfg.daily_hours).clamp(2.0, 12.0);
        let mut rank = {
            let u: f64 = rng.random();
            let cum = [0.34, 0.63, 0.88, 0.95, 0.98, 1.0];
            OccRank::new(cum.iter().position(|&c| u < c).unwrap_or(5) as u8 + 1).unwrap()
        };
        let mut workplace = id * 1_000;
        let mut prev_employed = false;
        let mut moves = 0u64;

        let regional_rate = cfg.regional_rate;
        let sys86 = &systems[(BASE_YEAR - FIRST_YEAR) as usize];
        let mut tau86 = None;
        let mut exposure = 0.0;
        let mut rows = Vec::with_capacity(13);
        let mut attrited = false;

        for year in sample_years() {
            let price = calendar.prices.level(year);
            let post = year >= REFORM_YEAR;
            if post && !attrited && rng.random_bool(cfg.attrition_hazard) {
                attrited = true;
            }
            // Draw every year's shocks even after attrition so streams stay aligned.
            let eta = if year == BASE_YEAR {
                0.0
            } else {
                cfg.transitory_income_sd * std_normal(&mut rng)
            };
            let eta_w = if year == BASE_YEAR {
                0.0
            } else {
                cfg.wife_transitory_income_sd * std_normal(&mut rng)
            };
            let employed = !rng.random_bool(cfg.employment_exit_hazard);
            let noise = cfg.measurement_noise_sd * std_normal(&mut rng);
            let promo_shock = std_normal(&mut rng);
            let move_shock = std_normal(&mut rng);
            let hours_noise = 0.1 * std_normal(&mut rng);
            let days = normal(&mut rng, cfg.annual_days).clamp(120.0, 300.0);
            let ui_draw: f64 = rng.random();
            if attrited {
                continue;
            }

            let shift = if post { psi } else { 0.0 };
            let shift_w = if post { psi_w } else { 0.0 };
            let spouse = married.then(|| SpouseIncome {
                li: wife_li86 * price * (shift_w + eta_w).exp(),
                ci: wife_ci86 * price,
                d: wife_d86 * price,
            });
            let income = IncomeRecord {
                li: li86 * price * (shift + eta).exp(),
                ci: ci86 * price,
                d: d86 * price,
                spouse,
                regional_rate,
                personal_income: None,
                stock_income: None,
            };
            let sys = &systems[(year - FIRST_YEAR) as usize];
            let tau = effective_mtr(&income, sys);
            if tau >= 1.0 {
                return Err(Error::RateAtOrAboveOne {
                    rate: tau,
                    context: format!("synthetic id {id}, year {year}"),
                });
            }
            if year == BASE_YEAR {
                tau86 = Some(effective_mtr(&income, sys86));
            }
            // Current-year tax increment that drives promotions and job moves.
            let increment = match (post, tau86) {
                (true, Some(t86)) => {
                    cfg.true_semi_elasticity_per_year * ((1.0 - tau) / (1.0 - t86)).ln()
                }
                _ => 0.0,
            };
            if post {
                exposure += (1.0 - tau).ln();
            }

            let mut row = PanelRow::missing(id, year);
            row.income = Some(income);
            row.age = Some((age86 as i32 + year - BASE_YEAR).max(0) as u32);
            row.n_children = Some(n_children);
            row.education = Some(education);
            if employed {
                if prev_employed {
                    if promo_shock + cfg.promotion_loading * increment > cfg.promotion_threshold {
                        rank = rank.promoted();
                    }
                    if move_shock + cfg.jjt_loading * increment > cfg.jjt_threshold {
                        moves += 1;
                        workplace = id * 1_000 + moves;
                    }
                } else if year != FIRST_YEAR && move_shock > 0.0 {
                    moves += 1;
                    workplace = id * 1_000 + moves;
                }
                let real_log_wage =
                    a_i + years.get(year) + cfg.true_semi_elasticity_per_year * exposure + noise;
                let daily = (daily_base + hours_noise).max(1.0);
                let annual = daily * days;
                let nominal_wage = real_log_wage.exp() * price;
                row.employed = true;
                row.earn_nov = Some(nominal_wage * annual);
                row.log_wage = Some(real_log_wage + price.ln());
                row.hours_annual = Some(annual);
                row.hours_daily = (year >= DAILY_HOURS_FROM).then_some(daily);
                row.occ_rank = Some(rank);
                row.workplace_id = Some(workplace);
                row.ui_benefit = Some(ui_draw < cfg.ui_share);
                row.full_time = Some(full_time);
                row.private_sector = Some(private_sector);
            } else {
                row.ui_benefit = Some(ui_draw < 0.5);
            }
            prev_employed = employed;
            rows.push(row);
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize, seed: u64) -> DgpConfig {
        DgpConfig {
            n_individuals: n,
            seed,
            ..DgpConfig::default()
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cal = TaxCalendar::default();
        let a = generate_panel(&small(300, 9), &cal).unwrap();
        let b = generate_panel(&small(300, 9), &cal).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_csv_to(&mut x).unwrap();
        b.write_csv_to(&mut y).unwrap();
        assert_eq!(x, y);
        let c = generate_panel(&small(300, 10), &cal).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn true_elasticity_is_linear_in_gamma() {
        let mut cfg = DgpConfig {
            true_semi_elasticity_per_year: 0.0,
            ..DgpConfig::default()
        };
        assert_eq!(true_elasticity(&cfg), 0.0);
        cfg.true_semi_elasticity_per_year = 0.1;
        let e1 = true_elasticity(&cfg);
        assert!((e1 - 0.4).abs() < 1e-15);
        cfg.true_semi_elasticity_per_year = 0.2;
        assert!((true_elasticity(&cfg) - 2.0 * e1).abs() < 1e-15);
        assert!((true_elasticity(&DgpConfig::with_elasticity(0.4)) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn rows_respect_panel_invariants() {
        let cal = TaxCalendar::default();
        let p = generate_panel(&small(500, 3), &cal).unwrap();
        for r in p.rows() {
            if !r.employed {
                assert!(r.log_wage.is_none() && r.occ_rank.is_none());
            }
            if r.year < DAILY_HOURS_FROM {
                assert!(r.hours_daily.is_none());
            }
        }
        // No rows before attrition is possible are missing.
        for id in p.ids() {
            let rows = p.person(id);
            assert_eq!(rows[0].year, FIRST_YEAR);
            assert!(rows.len() >= (BASE_YEAR - FIRST_YEAR + 1) as usize);
        }
    }

    #[test]
    fn rejects_invalid_config() {
        let cal = TaxCalendar::default();
        let mut cfg = small(10, 1);
        cfg.attrition_hazard = 1.0;
        assert!(generate_panel(&cfg, &cal).is_err());
        let mut cfg = small(10, 1);
        cfg.measurement_noise_sd = -1.0;
        assert!(generate_panel(&cfg, &cal).is_err());
    }

    #[test]
    fn rejects_rates_at_or_above_one() {
        let mut cal = TaxCalendar::default();
        cal.sys87.ceiling = 0.999;
        let mut cfg = small(20, 1);
        cfg.regional_rate = Some(0.99);
        assert!(matches!(
            generate_panel(&cfg, &cal),
            Err(Error::RateAtOrAboveOne { .. })
        ));
    }
}
