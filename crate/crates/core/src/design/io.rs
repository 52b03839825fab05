//! Assignment and bin-share CSVs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BinShare, DesignAssignment, Group, PlaceboStatus, Status};
use crate::error::{Error, Result};
use crate::tax::BracketLocation;

#[derive(Serialize, Deserialize)]
struct AssignmentRecord {
    id: u64,
    status: Status,
    placebo_status: PlaceboStatus,
    group: Group,
    b86: BracketLocation,
    b87_counterfactual: BracketLocation,
    li86: f64,
    wife_li86: f64,
    mechanical_change: f64,
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

/// Columns: `id,status,placebo_status,group,b86,b87_counterfactual,li86,wife_li86,mechanical_change`.
pub fn write_assignments(path: &Path, assignments: &[DesignAssignment]) -> Result<()> {
    let mut w = writer(path)?;
    for a in assignments {
        w.serialize(AssignmentRecord {
            id: a.id,
            status: a.status,
            placebo_status: a.placebo_status,
            group: a.group,
            b86: a.b86,
            b87_counterfactual: a.b87_counterfactual,
            li86: a.li86,
            wife_li86: a.wife_li86,
            mechanical_change: a.mechanical_change,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_assignments(path: &Path) -> Result<Vec<DesignAssignment>> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ));
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out: Vec<DesignAssignment> = Vec::new();
    for (i, rec) in rdr.deserialize::<AssignmentRecord>().enumerate() {
        let r = rec.map_err(|e| Error::Parse {
            path: path.into(),
            row: i as u64 + 2,
            message: e.to_string(),
        })?;
        out.push(DesignAssignment {
            id: r.id,
            status: r.status,
            placebo_status: r.placebo_status,
            group: r.group,
            b86: r.b86,
            b87_counterfactual: r.b87_counterfactual,
            mechanical_change: r.mechanical_change,
            li86: r.li86,
            wife_li86: r.wife_li86,
        });
    }
    out.sort_by_key(|a| a.id);
    if let Some(w) = out.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::Parse {
            path: path.into(),
            row: 0,
            message: format!("duplicate id {}", w[0].id),
        });
    }
    Ok(out)
}

/// Columns: `bin_lo,bin_hi,n_treated,n_control,treated_share,trimmed`.
pub fn write_bins(path: &Path, bins: &[BinShare]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "bin_lo",
        "bin_hi",
        "n_treated",
        "n_control",
        "treated_share",
        "trimmed",
    ])?;
    for b in bins {
        w.write_record([
            b.lo.to_string(),
            b.hi.to_string(),
            b.n_treated.to_string(),
            b.n_control.to_string(),
            b.treated_share().to_string(),
            u8::from(b.trimmed).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignments_round_trip() {
        let a = vec![DesignAssignment {
            id: 7,
            status: Status::Treated,
            placebo_status: PlaceboStatus::None,
            group: Group::Low,
            b86: BracketLocation::Bottom,
            b87_counterfactual: BracketLocation::Middle,
            mechanical_change: -0.19196483306573087,
            li86: 145_000.5,
            wife_li86: 120_000.0,
        }];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_assignments(&p, &a).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("id,status,placebo_status,group,b86,b87_counterfactual"));
        assert!(text.contains("7,TREATED,NONE,LOW,BOTTOM,MIDDLE"));
        assert_eq!(read_assignments(&p).unwrap(), a);
    }
}
