//! Person-year panel: data model, CSV ingestion and the quasi-balanced transform.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prices::{sample_years, FIRST_YEAR, LAST_YEAR};
use crate::tax::{IncomeRecord, SpouseIncome};

/// Six ranked occupational categories, 1 = unskilled … 6 = highest.
///
/// 2 is skilled and 3 is low-level white-collar; only the order matters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OccRank(u8);

impl OccRank {
    pub const UNSKILLED: OccRank = OccRank(1);
    pub const SKILLED: OccRank = OccRank(2);
    pub const LOW_WHITE_COLLAR: OccRank = OccRank(3);
    pub const HIGHEST: OccRank = OccRank(6);

    pub fn new(rank: u8) -> Option<OccRank> {
        (1..=6).contains(&rank).then_some(OccRank(rank))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn promoted(self) -> OccRank {
        OccRank((self.0 + 1).min(6))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Education {
    Low,
    Middle,
    High,
}

impl Education {
    pub fn as_str(&self) -> &'static str {
        match self {
            Education::Low => "low",
            Education::Middle => "middle",
            Education::High => "high",
        }
    }

    fn parse(s: &str) -> Option<Education> {
        match s {
            "low" | "0" => Some(Education::Low),
            "middle" | "1" => Some(Education::Middle),
            "high" | "2" => Some(Education::High),
            _ => None,
        }
    }
}

/// One person-year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub id: u64,
    pub year: i32,
    /// Holds a primary job on 28 November.
    pub employed: bool,
    pub income: Option<IncomeRecord>,
    /// Log nominal gross hourly wage of the November job.
    pub log_wage: Option<f64>,
    /// Nominal annual earnings from the November job.
    pub earn_nov: Option<f64>,
    pub hours_daily: Option<f64>,
    pub hours_annual: Option<f64>,
    pub occ_rank: Option<OccRank>,
    pub workplace_id: Option<u64>,
    /// Received unemployment benefits during the year.
    pub ui_benefit: Option<bool>,
    pub age: Option<u32>,
    pub n_children: Option<u32>,
    pub education: Option<Education>,
    pub full_time: Option<bool>,
    pub private_sector: Option<bool>,
}

impl PanelRow {
    /// A filler row: only the key and `employed = false`.
    pub fn missing(id: u64, year: i32) -> PanelRow {
        PanelRow {
            id,
            year,
            employed: false,
            income: None,
            log_wage: None,
            earn_nov: None,
            hours_daily: None,
            hours_annual: None,
            occ_rank: None,
            workplace_id: None,
            ui_benefit: None,
            age: None,
            n_children: None,
            education: None,
            full_time: None,
            private_sector: None,
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        if !(FIRST_YEAR..=LAST_YEAR).contains(&self.year) {
            return Err(format!("year outside {FIRST_YEAR}-{LAST_YEAR}"));
        }
        if self.employed {
            if self.log_wage.is_none() {
                return Err("employed but log_wage is missing".into());
            }
        } else {
            let job_fields = [
                ("log_wage", self.log_wage.is_some()),
                ("earn_nov", self.earn_nov.is_some()),
                ("hours_daily", self.hours_daily.is_some()),
                ("hours_annual", self.hours_annual.is_some()),
                ("occ_rank", self.occ_rank.is_some()),
                ("workplace_id", self.workplace_id.is_some()),
            ];
            if let Some((name, _)) = job_fields.iter().find(|(_, present)| *present) {
                return Err(format!("not employed but {name} is present"));
            }
        }
        if let Some(w) = self.log_wage {
            if !w.is_finite() {
                return Err("log_wage is not finite".into());
            }
        }
        for (name, v) in [
            ("earn_nov", self.earn_nov),
            ("hours_daily", self.hours_daily),
            ("hours_annual", self.hours_annual),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(format!("{name} must be finite and > 0"));
                }
            }
        }
        if let Some(inc) = &self.income {
            inc.validate().map_err(|e| e.to_string())?;
        }
        Ok(())
    }
}

/// Immutable panel in canonical `(id, year)` order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Panel {
    rows: Vec<PanelRow>,
    index: BTreeMap<u64, (usize, usize)>,
}

impl Panel {
    /// Sorts rows and checks key uniqueness and row invariants.
    pub fn new(mut rows: Vec<PanelRow>) -> Result<Panel> {
        for (i, r) in rows.iter().enumerate() {
            r.check().map_err(|message| Error::RowInvariant {
                row: i as u64 + 1,
                id: r.id,
                year: r.year,
                message,
            })?;
        }
        rows.sort_by_key(|r| (r.id, r.year));
        for w in rows.windows(2) {
            if w[0].id == w[1].id && w[0].year == w[1].year {
                return Err(Error::DuplicateKey {
                    id: w[0].id,
                    year: w[0].year,
                    row: 0,
                });
            }
        }
        Ok(Self::from_sorted(rows))
    }

    fn from_sorted(rows: Vec<PanelRow>) -> Panel {
        let mut index = BTreeMap::new();
        let mut start = 0;
        for i in 1..=rows.len() {
            if i == rows.len() || rows[i].id != rows[start].id {
                index.insert(rows[start].id, (start, i));
                start = i;
            }
        }
        Panel { rows, index }
    }

    pub fn rows(&self) -> &[PanelRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.index.keys().copied()
    }

    pub fn n_ids(&self) -> usize {
        self.index.len()
    }

    /// All rows of one person in year order.
    pub fn person(&self, id: u64) -> &[PanelRow] {
        self.index
            .get(&id)
            .map_or(&[][..], |&(a, b)| &self.rows[a..b])
    }

    /// Positions of one person's rows in [`Panel::rows`].
    pub fn person_span(&self, id: u64) -> std::ops::Range<usize> {
        self.index.get(&id).map_or(0..0, |&(a, b)| a..b)
    }

    pub fn get(&self, id: u64, year: i32) -> Option<&PanelRow> {
        let rows = self.person(id);
        rows.binary_search_by_key(&year, |r| r.year)
            .ok()
            .map(|i| &rows[i])
    }

    /// Rows for `year`, one per person who has one.
    pub fn year_rows(&self, year: i32) -> impl Iterator<Item = &PanelRow> + '_ {
        self.index.keys().filter_map(move |&id| self.get(id, year))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_csv_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{}", COLUMNS.join(","))?;
        let mut line = String::with_capacity(256);
        for r in &self.rows {
            line.clear();
            format_row(r, &mut line);
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Panel CSV columns, in file order.
pub const COLUMNS: [&str; 25] = [
    "id",
    "year",
    "employed",
    "li",
    "ci",
    "d",
    "married",
    "li_w",
    "ci_w",
    "d_w",
    "regional_rate",
    "personal_income",
    "stock_income",
    "log_wage",
    "earn_nov",
    "hours_daily",
    "hours_annual",
    "occ_rank",
    "workplace_id",
    "ui_benefit",
    "age",
    "n_children",
    "education",
    "full_time",
    "private_sector",
];

const OPTIONAL_COLUMNS: [&str; 3] = ["regional_rate", "personal_income", "stock_income"];

fn opt<T: std::fmt::Display>(out: &mut String, v: Option<T>) {
    use std::fmt::Write as _;
    if let Some(v) = v {
        let _ = write!(out, "{v}");
    }
}

fn flag(b: bool) -> u8 {
    u8::from(b)
}

fn format_row(r: &PanelRow, out: &mut String) {
    use std::fmt::Write as _;
    let _ = write!(out, "{},{},{},", r.id, r.year, flag(r.employed));
    let inc = r.income.as_ref();
    let sp = inc.and_then(|i| i.spouse);
    opt(out, inc.map(|i| i.li));
    out.push(',');
    opt(out, inc.map(|i| i.ci));
    out.push(',');
    opt(out, inc.map(|i| i.d));
    out.push(',');
    opt(out, inc.map(|i| flag(i.is_married())));
    out.push(',');
    opt(out, sp.map(|s| s.li));
    out.push(',');
    opt(out, sp.map(|s| s.ci));
    out.push(',');
    opt(out, sp.map(|s| s.d));
    out.push(',');
    opt(out, inc.and_then(|i| i.regional_rate));
    out.push(',');
    opt(out, inc.and_then(|i| i.personal_income));
    out.push(',');
    opt(out, inc.and_then(|i| i.stock_income));
    out.push(',');
    opt(out, r.log_wage);
    out.push(',');
    opt(out, r.earn_nov);
    out.push(',');
    opt(out, r.hours_daily);
    out.push(',');
    opt(out, r.hours_annual);
    out.push(',');
    opt(out, r.occ_rank.map(|o| o.get()));
    out.push(',');
    opt(out, r.workplace_id);
    out.push(',');
    opt(out, r.ui_benefit.map(flag));
    out.push(',');
    opt(out, r.age);
    out.push(',');
    opt(out, r.n_children);
    out.push(',');
    opt(out, r.education.map(|e| e.as_str()));
    out.push(',');
    opt(out, r.full_time.map(flag));
    out.push(',');
    opt(out, r.private_sector.map(flag));
}

/// What `load_panel` saw besides the rows themselves.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub n_rows: usize,
    pub n_ids: usize,
    /// Missing-cell count per column.
    pub missing: BTreeMap<String, usize>,
    pub warnings: Vec<String>,
}

struct Cells<'a> {
    record: &'a csv::StringRecord,
    cols: &'a BTreeMap<&'static str, usize>,
    row: u64,
    path: &'a Path,
}

impl Cells<'_> {
    fn raw(&self, name: &str) -> Option<&str> {
        let s = self
            .cols
            .get(name)
            .and_then(|&i| self.record.get(i))?
            .trim();
        (!s.is_empty()).then_some(s)
    }

    fn err(&self, name: &str, value: &str, what: &str) -> Error {
        Error::Parse {
            path: self.path.into(),
            row: self.row,
            message: format!("column {name}: '{value}' is not {what}"),
        }
    }

    fn parse<T: std::str::FromStr>(&self, name: &str, what: &str) -> Result<Option<T>> {
        match self.raw(name) {
            None => Ok(None),
            Some(s) => s.parse().map(Some).map_err(|_| self.err(name, s, what)),
        }
    }

    fn f64(&self, name: &str) -> Result<Option<f64>> {
        let v: Option<f64> = self.parse(name, "a number")?;
        match v {
            Some(x) if !x.is_finite() => Err(self.err(name, &x.to_string(), "a finite number")),
            v => Ok(v),
        }
    }

    fn bool(&self, name: &str) -> Result<Option<bool>> {
        match self.raw(name) {
            None => Ok(None),
            Some("1") | Some("true") | Some("TRUE") => Ok(Some(true)),
            Some("0") | Some("false") | Some("FALSE") => Ok(Some(false)),
            Some(s) => Err(self.err(name, s, "a 0/1 flag")),
        }
    }

    fn required<T>(&self, name: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| Error::Parse {
            path: self.path.into(),
            row: self.row,
            message: format!("column {name} is required"),
        })
    }
}

fn parse_row(c: &Cells<'_>) -> Result<PanelRow> {
    let id: u64 = c.required("id", c.parse("id", "a non-negative integer")?)?;
    let year: i32 = c.required("year", c.parse("year", "an integer year")?)?;
    let employed = c.required("employed", c.bool("employed")?)?;
    let invariant = |message: String| Error::RowInvariant {
        row: c.row,
        id,
        year,
        message,
    };

    let li = c.f64("li")?;
    let income = match li {
        None => {
            for name in ["ci", "d", "married", "li_w", "ci_w", "d_w"] {
                if c.raw(name).is_some() {
                    return Err(invariant(format!("{name} present without li")));
                }
            }
            None
        }
        Some(li) => {
            let ci = c
                .f64("ci")?
                .ok_or_else(|| invariant("li present but ci missing".into()))?;
            let d = c
                .f64("d")?
                .ok_or_else(|| invariant("li present but d missing".into()))?;
            let married = c
                .bool("married")?
                .ok_or_else(|| invariant("li present but married missing".into()))?;
            let spouse_cells = [c.f64("li_w")?, c.f64("ci_w")?, c.f64("d_w")?];
            let spouse = match (married, spouse_cells) {
                (true, [Some(li), Some(ci), Some(d)]) => Some(SpouseIncome { li, ci, d }),
                (false, [None, None, None]) => None,
                (true, _) => return Err(invariant("married but spouse income incomplete".into())),
                (false, _) => {
                    return Err(invariant("spouse income present but not married".into()))
                }
            };
            Some(IncomeRecord {
                li,
                ci,
                d,
                spouse,
                regional_rate: c.f64("regional_rate")?,
                personal_income: c.f64("personal_income")?,
                stock_income: c.f64("stock_income")?,
            })
        }
    };
    let occ_rank = match c.parse::<u8>("occ_rank", "a rank 1-6")? {
        None => None,
        Some(r) => {
            Some(OccRank::new(r).ok_or_else(|| c.err("occ_rank", &r.to_string(), "a rank 1-6"))?)
        }
    };
    let education = match c.raw("education") {
        None => None,
        Some(s) => {
            Some(Education::parse(s).ok_or_else(|| c.err("education", s, "low/middle/high"))?)
        }
    };
    let row = PanelRow {
        id,
        year,
        employed,
        income,
        log_wage: c.f64("log_wage")?,
        earn_nov: c.f64("earn_nov")?,
        hours_daily: c.f64("hours_daily")?,
        hours_annual: c.f64("hours_annual")?,
        occ_rank,
        workplace_id: c.parse("workplace_id", "a non-negative integer")?,
        ui_benefit: c.bool("ui_benefit")?,
        age: c.parse("age", "a non-negative integer")?,
        n_children: c.parse("n_children", "a non-negative integer")?,
        education,
        full_time: c.bool("full_time")?,
        private_sector: c.bool("private_sector")?,
    };
    row.check().map_err(invariant)?;
    Ok(row)
}

/// Loads and validates a panel CSV. Row numbers in errors count the header as row 1.
pub fn load_panel(path: &Path) -> Result<(Panel, LoadReport)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(std::io::BufReader::new(file));
    let headers = rdr.headers()?.clone();
    let mut cols = BTreeMap::new();
    for name in COLUMNS {
        match headers.iter().position(|h| h.trim() == name) {
            Some(i) => {
                cols.insert(name, i);
            }
            None if OPTIONAL_COLUMNS.contains(&name) => {}
            None => {
                return Err(Error::Parse {
                    path: path.into(),
                    row: 1,
                    message: format!("header is missing column '{name}'"),
                })
            }
        }
    }
    let mut report = LoadReport::default();
    for h in headers.iter() {
        if !COLUMNS.contains(&h.trim()) {
            report
                .warnings
                .push(format!("ignoring unknown column '{h}'"));
        }
    }
    let mut rows = Vec::new();
    let mut seen: BTreeSet<(u64, i32)> = BTreeSet::new();
    let mut record = csv::StringRecord::new();
    let mut row_no = 1u64;
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| Error::Parse {
            path: path.into(),
            row: row_no + 1,
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        row_no += 1;
        let cells = Cells {
            record: &record,
            cols: &cols,
            row: row_no,
            path,
        };
        for &name in cols.keys() {
            if cells.raw(name).is_none() {
                *report.missing.entry(name.to_string()).or_default() += 1;
            }
        }
        let row = parse_row(&cells)?;
        if !seen.insert((row.id, row.year)) {
            return Err(Error::DuplicateKey {
                id: row.id,
                year: row.year,
                row: row_no,
            });
        }
        rows.push(row);
    }
    let panel = Panel::new(rows)?;
    report.n_rows = panel.len();
    report.n_ids = panel.n_ids();
    for id in panel.ids() {
        if panel.get(id, crate::prices::BASE_YEAR).is_none() {
            report.warnings.push(format!("id {id} has no 1986 row"));
        }
    }
    Ok((panel, report))
}

/// Fills every missing sample-id person-year with an `employed = false` row.
///
/// Only `ids` appear in the output; existing rows are copied unchanged.
pub fn quasi_balance(panel: &Panel, ids: &BTreeSet<u64>) -> Panel {
    let mut rows = Vec::with_capacity(ids.len() * 13);
    for &id in ids {
        let own = panel.person(id);
        let mut it = own.iter().peekable();
        for year in sample_years() {
            match it.peek() {
                Some(r) if r.year == year => rows.push(it.next().cloned().unwrap()),
                _ => rows.push(PanelRow::missing(id, year)),
            }
        }
    }
    Panel::from_sorted(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "id,year,employed,li,ci,d,married,li_w,ci_w,d_w,log_wage,earn_nov,hours_daily,hours_annual,occ_rank,workplace_id,ui_benefit,age,n_children,education,full_time,private_sector";

    fn write(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{HEADER}").unwrap();
        write!(f, "{body}").unwrap();
        f
    }

    const GOOD: &str = "\
1,1985,1,140000,-30000,10000,1,90000,0,5000,4.6,200000,7.5,1650,2,10,0,35,1,middle,1,1
1,1986,1,145000,-30000,10000,1,95000,0,5000,4.7,210000,7.5,1650,2,10,0,36,1,middle,1,1
1,1987,0,20000,-30000,10000,1,95000,0,5000,,,,,,,1,37,1,middle,,
";

    #[test]
    fn loads_well_formed_file() {
        let f = write(GOOD);
        let (panel, report) = load_panel(f.path()).unwrap();
        assert_eq!(panel.len(), 3);
        assert_eq!(report.n_rows, 3);
        assert!(report.warnings.is_empty(), "{:?}", report.warnings);
        assert_eq!(report.missing.get("log_wage"), Some(&1));
        let r = panel.get(1, 1986).unwrap();
        assert_eq!(r.income.unwrap().spouse.unwrap().li, 95_000.0);
        assert_eq!(r.occ_rank, OccRank::new(2));
    }

    #[test]
    fn rejects_duplicate_key() {
        let body = format!("{GOOD}1,1986,1,145000,-30000,10000,1,95000,0,5000,4.7,210000,7.5,1650,2,10,0,36,1,middle,1,1\n");
        let f = write(&body);
        match load_panel(f.path()) {
            Err(Error::DuplicateKey {
                id: 1,
                year: 1986,
                row: 5,
            }) => {}
            other => panic!("expected duplicate-key error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_employed_without_wage() {
        let f = write(
            "2,1986,1,145000,-30000,10000,1,95000,0,5000,,210000,7.5,1650,2,10,0,36,1,middle,1,1\n",
        );
        let err = load_panel(f.path()).unwrap_err();
        match err {
            Error::RowInvariant { row: 2, id: 2, .. } => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_malformed_number_with_row() {
        let f = write("3,1986,1,14x000,-30000,10000,1,95000,0,5000,4.7,210000,7.5,1650,2,10,0,36,1,middle,1,1\n");
        let err = load_panel(f.path()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }), "{err}");
        assert!(err.to_string().contains("li"));
    }

    #[test]
    fn rejects_spouse_fields_for_single() {
        let f = write("4,1986,1,145000,-30000,10000,0,95000,0,5000,4.7,210000,7.5,1650,2,10,0,36,1,middle,1,1\n");
        assert!(matches!(
            load_panel(f.path()),
            Err(Error::RowInvariant { .. })
        ));
    }

    #[test]
    fn rejects_missing_column() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "id,year").unwrap();
        assert!(matches!(
            load_panel(f.path()),
            Err(Error::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let f = write(GOOD);
        let (panel, _) = load_panel(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        panel.write_csv(out.path()).unwrap();
        let (again, _) = load_panel(out.path()).unwrap();
        assert_eq!(panel, again);
    }

    #[test]
    fn quasi_balance_fills_gaps() {
        let mut rows: Vec<PanelRow> = (1981..=1992)
            .map(|y| {
                let mut r = PanelRow::missing(7, y);
                r.employed = true;
                r.log_wage = Some(4.0);
                r
            })
            .collect();
        rows.push(PanelRow::missing(8, 1986));
        let panel = Panel::new(rows).unwrap();
        let ids: BTreeSet<u64> = [7].into();
        let qb = quasi_balance(&panel, &ids);
        assert_eq!(qb.len(), 13);
        let last = qb.get(7, 1993).unwrap();
        assert!(!last.employed && last.log_wage.is_none());
        assert_eq!(qb.get(7, 1990), panel.get(7, 1990));
        assert!(qb.person(8).is_empty());

        assert_eq!(quasi_balance(&qb, &ids), qb);
        assert!(quasi_balance(&panel, &BTreeSet::new()).is_empty());
    }
}
