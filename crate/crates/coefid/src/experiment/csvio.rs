//! CSV emission and parsing.
//!
//! All floating-point values are written with 17 significant digits
//! (`{:.16e}`), enough to round-trip an f64 exactly.

use std::path::Path;

use crate::direct::{FieldTrajectory, TimeGrid};
use crate::error::{Error, Result};
use crate::inverse::IdentificationResult;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `t,value` series.
pub fn observations_csv(times: &[f64], values: &[f64]) -> String {
    let mut s = String::from("t,value\n");
    for (t, v) in times.iter().zip(values) {
        s.push_str(&fmt_f64(*t));
        s.push(',');
        s.push_str(&fmt_f64(*v));
        s.push('\n');
    }
    s
}

/// Full nodal trajectory, one row per time level.
pub fn field_csv(traj: &FieldTrajectory) -> String {
    let n = traj.states.first().map_or(0, |s| s.len());
    let mut s = String::from("t");
    for i in 0..n {
        s.push_str(&format!(",node_{i}"));
    }
    s.push('\n');
    for (n_step, state) in traj.states.iter().enumerate() {
        s.push_str(&fmt_f64(traj.grid.time(n_step)));
        for v in state {
            s.push(',');
            s.push_str(&fmt_f64(*v));
        }
        s.push('\n');
    }
    s
}

/// Recovered coefficient series, one row per time step starting at `t_1`.
/// The `p_exact` column is present only when the exact coefficient is known.
pub fn identification_csv(
    grid: TimeGrid,
    result: &IdentificationResult,
    p_exact: Option<&dyn Fn(f64) -> f64>,
) -> String {
    let mut s = String::from(match p_exact {
        Some(_) => "t,p_recovered,p_exact,w_functional,residual\n",
        None => "t,p_recovered,w_functional,residual\n",
    });
    for n in 0..result.p_series.len() {
        let t = grid.time(n + 1);
        s.push_str(&fmt_f64(t));
        s.push(',');
        s.push_str(&fmt_f64(result.p_series[n]));
        if let Some(exact) = p_exact {
            s.push(',');
            s.push_str(&fmt_f64(exact(t)));
        }
        s.push(',');
        s.push_str(&fmt_f64(result.diagnostics[n].w_functional));
        s.push(',');
        s.push_str(&fmt_f64(result.diagnostics[n].residual));
        s.push('\n');
    }
    s
}

/// Parse a `t,value` CSV (header required).
pub fn read_observations(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "t,value" => {}
        other => {
            return Err(Error::Csv(format!(
                "{}: expected header `t,value`, found {other:?}",
                path.display()
            )))
        }
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let t: f64 = cols
            .next()
            .ok_or_else(|| Error::Csv(format!("row {i}: missing t")))?
            .trim()
            .parse()
            .map_err(|e| Error::Csv(format!("row {i}: bad t ({e})")))?;
        let v: f64 = cols
            .next()
            .ok_or_else(|| Error::Csv(format!("row {i}: missing value")))?
            .trim()
            .parse()
            .map_err(|e| Error::Csv(format!("row {i}: bad value ({e})")))?;
        if cols.next().is_some() {
            return Err(Error::Csv(format!("row {i}: too many columns")));
        }
        times.push(t);
        values.push(v);
    }
    if times.len() < 2 {
        return Err(Error::Csv("need at least two observation rows".into()));
    }
    Ok((times, values))
}

/// Parse an identification CSV back into named columns.
pub fn read_identification(path: &Path) -> Result<IdentificationTable> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Csv(format!("{}: empty file", path.display())))?;
    let columns: Vec<&str> = header.split(',').collect();
    let has_exact = match columns.as_slice() {
        ["t", "p_recovered", "p_exact", "w_functional", "residual"] => true,
        ["t", "p_recovered", "w_functional", "residual"] => false,
        _ => {
            return Err(Error::Csv(format!(
                "{}: unexpected header `{header}`",
                path.display()
            )))
        }
    };
    let mut table = IdentificationTable::default();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let expect = if has_exact { 5 } else { 4 };
        if cols.len() != expect {
            return Err(Error::Csv(format!(
                "row {i}: expected {expect} columns, found {}",
                cols.len()
            )));
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|e| Error::Csv(format!("row {i}: bad {what} ({e})")))
        };
        table.t.push(parse(cols[0], "t")?);
        table.p_recovered.push(parse(cols[1], "p_recovered")?);
        let mut k = 2;
        if has_exact {
            table.p_exact.push(parse(cols[2], "p_exact")?);
            k = 3;
        }
        table.w_functional.push(parse(cols[k], "w_functional")?);
        table.residual.push(parse(cols[k + 1], "residual")?);
    }
    Ok(table)
}

#[derive(Debug, Default, Clone)]
pub struct IdentificationTable {
    pub t: Vec<f64>,
    pub p_recovered: Vec<f64>,
    pub p_exact: Vec<f64>,
    pub w_functional: Vec<f64>,
    pub residual: Vec<f64>,
}
