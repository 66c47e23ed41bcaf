//! CSV and JSON persistence.

use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Choice, Good, ObservationPanel};

use super::metrics::MetricsRow;

fn header(d_x: usize, d_z: usize) -> Vec<String> {
    let mut h = vec!["id".to_string(), "t".to_string(), "y".to_string()];
    h.extend((1..=d_x).map(|k| format!("xa_{k}")));
    h.extend((1..=d_x).map(|k| format!("xb_{k}")));
    h.extend((1..=d_z).map(|k| format!("z_{k}")));
    h
}

/// One row per (individual, period); z is repeated in every period.
pub fn write_panel<W: Write>(panel: &ObservationPanel, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(panel.d_x(), panel.d_z()))?;
    let mut row = Vec::new();
    for i in 0..panel.n() {
        for t in 0..panel.t_len() {
            row.clear();
            row.push(i.to_string());
            row.push(t.to_string());
            row.push(panel.y(i, t).label().to_string());
            for good in Good::BOTH {
                row.extend(panel.x(i, t, good).iter().map(|v| v.to_string()));
            }
            row.extend(panel.z(i).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn count_prefix(h: &csv::StringRecord, prefix: &str) -> usize {
    h.iter().filter(|c| c.starts_with(prefix)).count()
}

/// Rows must be sorted by id then t, with the same number of periods per id.
/// Row numbers in errors count data rows from 1.
pub fn read_panel<R: Read>(input: R) -> Result<ObservationPanel> {
    let mut rdr = csv::Reader::from_reader(input);
    let h = rdr.headers()?.clone();
    let (d_x, d_z) = (count_prefix(&h, "xa_"), count_prefix(&h, "z_"));
    let expected = header(d_x, d_z);
    if d_x == 0 || d_z == 0 || h.len() != expected.len() || h.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(Error::Parse { row: 0, msg: format!("header must be {}", expected.join(",")) });
    }
    let (mut x, mut z, mut y) = (Vec::new(), Vec::new(), Vec::new());
    let mut ids: Vec<usize> = Vec::new();
    let mut t_len = 0usize;
    let mut current_t = 0usize;
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        let int = |c: usize| -> Result<usize> {
            rec[c].trim().parse().map_err(|_| Error::Parse { row, msg: format!("bad integer {:?}", &rec[c]) })
        };
        let id = int(0)?;
        let t = int(1)?;
        let choice: Choice = rec[2].parse().map_err(|e: Error| Error::Parse { row, msg: e.to_string() })?;
        let mut values = Vec::with_capacity(rec.len() - 3);
        for c in 3..rec.len() {
            let v: f64 = rec[c]
                .trim()
                .parse()
                .map_err(|_| Error::Parse { row, msg: format!("bad number {:?} in {}", &rec[c], &h[c]) })?;
            if !v.is_finite() {
                return Err(Error::Parse { row, msg: format!("non-finite value in {}", &h[c]) });
            }
            values.push(v);
        }
        if ids.last() != Some(&id) {
            if !ids.is_empty() {
                if t_len == 0 {
                    t_len = current_t + 1;
                } else if current_t + 1 != t_len {
                    return Err(Error::Parse { row, msg: "unbalanced panel".into() });
                }
            }
            if t != 0 {
                return Err(Error::Parse { row, msg: format!("individual {id} must start at t = 0") });
            }
            ids.push(id);
            z.extend_from_slice(&values[2 * d_x..]);
        } else if t != current_t + 1 {
            return Err(Error::Parse { row, msg: format!("periods of individual {id} out of order") });
        } else if values[2 * d_x..] != z[z.len() - d_z..] {
            return Err(Error::Parse { row, msg: format!("z of individual {id} changes over time") });
        }
        current_t = t;
        x.extend_from_slice(&values[..2 * d_x]);
        y.push(choice);
    }
    if ids.is_empty() {
        return Err(Error::Parse { row: 0, msg: "panel has no rows".into() });
    }
    if t_len == 0 {
        t_len = current_t + 1;
    } else if current_t + 1 != t_len {
        return Err(Error::Parse { row: y.len(), msg: "unbalanced panel".into() });
    }
    ObservationPanel::new(ids.len(), t_len, d_x, d_z, x, z, y)
}

pub fn save_panel(panel: &ObservationPanel, path: &Path) -> Result<()> {
    write_panel(panel, BufWriter::new(File::create(path)?))
}

pub fn load_panel(path: &Path) -> Result<ObservationPanel> {
    read_panel(BufReader::new(File::open(path)?))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_metrics<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["estimator", "parameter", "design", "n", "t_len", "err", "sd", "rmse", "mad", "successes", "failures"])?;
    for r in rows {
        let parameter = match r.parameter {
            super::metrics::Block::Beta => "beta",
            super::metrics::Block::Gamma => "gamma",
        };
        w.write_record([
            r.estimator.clone(),
            parameter.to_string(),
            r.design.to_string(),
            r.n.to_string(),
            r.t_len.to_string(),
            opt(r.err),
            r.sd.to_string(),
            r.rmse.to_string(),
            r.mad.to_string(),
            r.successes.to_string(),
            r.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_metrics_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    write_metrics(rows, BufWriter::new(File::create(path)?))
}
