//! CSV tables. Floats are written in Rust's shortest round-trip form, so
//! reading a file back reproduces the values bit for bit.

use std::path::Path;

use birkhoff_core::integrator::{Grid, StateLevel};
use birkhoff_core::monitor::DissipationReport;
use birkhoff_core::problems::ConvergenceRow;

use crate::CliError;

fn io_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(io_err(path))?;
    w.write_record(header).map_err(io_err(path))?;
    for r in rows {
        w.write_record(&r).map_err(io_err(path))?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// `t,x,u,p,q`, one row per node, ordered by level then node.
pub fn write_solution(path: &Path, grid: &Grid, levels: &[StateLevel]) -> Result<(), CliError> {
    let rows = levels.iter().flat_map(|l| {
        l.z.iter().enumerate().map(move |(i, n)| {
            vec![
                grid.t(l.j).to_string(),
                grid.x(i).to_string(),
                n[0].to_string(),
                n[1].to_string(),
                n[2].to_string(),
            ]
        })
    });
    write_rows(path, &["t", "x", "u", "p", "q"], rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionRow {
    pub t: f64,
    pub x: f64,
    pub z: [f64; 3],
}

pub fn read_solution(path: &Path) -> Result<Vec<SolutionRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(io_err(path))?;
    let header = r.headers().map_err(io_err(path))?.clone();
    if header.iter().collect::<Vec<_>>() != ["t", "x", "u", "p", "q"] {
        return Err(CliError::Io(format!("{}: unexpected header", path.display())));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(io_err(path))?;
        let v = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        if v.len() != 5 {
            return Err(CliError::Io(format!("{}: expected 5 fields", path.display())));
        }
        out.push(SolutionRow { t: v[0], x: v[1], z: [v[2], v[3], v[4]] });
    }
    Ok(out)
}

/// `t,max_box_residual,global_weighted_form,global_unweighted_form`.
pub fn write_report(path: &Path, grid: &Grid, report: &DissipationReport) -> Result<(), CliError> {
    let rows = (0..report.per_level.len()).map(|j| {
        vec![
            grid.t(j).to_string(),
            report.per_level[j].to_string(),
            report.global_form[j].to_string(),
            report.global_unweighted_form[j].to_string(),
        ]
    });
    write_rows(path, &["t", "max_box_residual", "global_weighted_form", "global_unweighted_form"], rows)
}

/// `dx,dt,l2_error,observed_order`; the order is empty where undefined.
pub fn write_convergence(path: &Path, rows: &[ConvergenceRow]) -> Result<(), CliError> {
    let rows = rows.iter().map(|r| {
        vec![
            r.dx.to_string(),
            r.dt.to_string(),
            r.l2_error.to_string(),
            r.observed_order.map(|o| o.to_string()).unwrap_or_default(),
        ]
    });
    write_rows(path, &["dx", "dt", "l2_error", "observed_order"], rows)
}
