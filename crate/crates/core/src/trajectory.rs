//! Per-step episode logs as CSV.
//!
//! Columns: `step,x,y,z,vx,vy,vz,fx,fy,fz,reward`, then the task's reward
//! components and extras in their fixed order.

use std::collections::BTreeMap;
use std::path::Path;

use crate::env::StepRecord;
use crate::error::{Error, Result};

const BASE: [&str; 11] = ["step", "x", "y", "z", "vx", "vy", "vz", "fx", "fy", "fz", "reward"];

pub fn write(path: &Path, steps: &[StepRecord]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    if let Some(first) = steps.first() {
        let mut header: Vec<&str> = BASE.to_vec();
        header.extend(first.components.iter().map(|(k, _)| *k));
        header.extend(first.extras.iter().map(|(k, _)| *k));
        w.write_record(&header).map_err(csv_err)?;
    }
    for s in steps {
        let p = s.state.position;
        let v = s.state.velocity;
        let f = s.thrust.components();
        let mut row = vec![s.step.to_string()];
        row.extend(
            [p.x, p.y, p.z, v.x, v.y, v.z, f[0], f[1], f[2], s.reward]
                .iter()
                .chain(s.components.iter().map(|(_, v)| v))
                .chain(s.extras.iter().map(|(_, v)| v))
                .map(|x| x.to_string()),
        );
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Column name to values.
pub type Columns = BTreeMap<String, Vec<f64>>;

pub fn read(path: &Path) -> Result<Columns> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut cols: Columns = header.iter().map(|h| (h.clone(), Vec::new())).collect();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        for (h, field) in header.iter().zip(rec.iter()) {
            let v = field.parse::<f64>().map_err(|e| Error::Format {
                path: path.to_path_buf(),
                reason: format!("column `{h}`: {e}"),
            })?;
            cols.get_mut(h).unwrap().push(v);
        }
    }
    Ok(cols)
}
