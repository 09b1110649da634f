//! Plain-text summary of CSV files written by the other commands.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use rmf_core::{Error, Result};

use crate::args::{Global, ReportArgs};

fn describe(experiment: &str) -> &'static str {
    let head = experiment.split('.').next().unwrap_or(experiment);
    match (head, experiment) {
        (_, "doob.maximal") => "Doob maximal inequality",
        (_, "doob.lp") => "Doob L^p inequality",
        (_, "product-expectation.drift") => "Euler product mean, drift in t",
        ("decomposition", _) => "M_f decomposition vs enumeration",
        ("hypercontractive", _) => "Hypercontractive moment bound",
        ("hoeffding", _) => "Conditional Hoeffding tail",
        ("submartingale-z", _) => "Z submartingale step",
        ("submartingale-y", _) => "Y submartingale step",
        ("parseval", _) => "Parseval identity",
        ("product-expectation", _) => "Euler product second moment",
        ("sigma-event", _) => "Truncated Parseval integral",
        ("variance", _) => "Conditional variance ratio",
        _ => "other",
    }
}

#[derive(Default)]
struct Group {
    experiment: String,
    model: String,
    rows: u64,
    violated: u64,
    reran: u64,
    /// Largest (estimate - target) / std_error over rows with a target.
    max_z: Option<f64>,
}

fn parse_f(s: &str) -> Option<f64> {
    if s.is_empty() {
        None
    } else {
        s.parse().ok()
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::InvalidArgument(format!("{}: {e}", path.display()))
}

fn check_table(path: &Path, rd: &mut csv::Reader<File>, out: &mut String) -> Result<u64> {
    let headers = rd.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidArgument(format!("{}: missing column {name}", path.display())))
    };
    let (ie, im, iest, ise, ib, ix, iv, ir) = (
        col("experiment")?,
        col("model")?,
        col("estimate")?,
        col("std_error")?,
        col("bound")?,
        col("exact")?,
        col("violated")?,
        col("reran")?,
    );
    let mut groups: Vec<Group> = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let (e, m) = (&rec[ie], &rec[im]);
        let i = match groups.iter().position(|g| g.experiment == e && g.model == m) {
            Some(i) => i,
            None => {
                groups.push(Group { experiment: e.to_string(), model: m.to_string(), ..Default::default() });
                groups.len() - 1
            }
        };
        let g = &mut groups[i];
        g.rows += 1;
        g.violated += u64::from(&rec[iv] == "true");
        g.reran += u64::from(&rec[ir] == "true");
        let target = parse_f(&rec[ix]).or_else(|| parse_f(&rec[ib]));
        if let (Some(est), Some(se), Some(t)) = (parse_f(&rec[iest]), parse_f(&rec[ise]), target) {
            if se > 0.0 {
                let z = if parse_f(&rec[ix]).is_some() { (est - t).abs() / se } else { (est - t) / se };
                g.max_z = Some(g.max_z.map_or(z, |m: f64| m.max(z)));
            }
        }
    }
    let _ = writeln!(
        out,
        "{:<34} {:<26} {:<11} {:>6} {:>8} {:>6} {:>9}",
        "inequality", "experiment", "model", "rows", "violated", "reran", "max_z"
    );
    let mut violated = 0;
    for g in &groups {
        violated += g.violated;
        let z = g.max_z.map_or_else(|| "-".to_string(), |z| format!("{z:.2}"));
        let _ = writeln!(
            out,
            "{:<34} {:<26} {:<11} {:>6} {:>8} {:>6} {:>9}",
            describe(&g.experiment),
            g.experiment,
            if g.model.is_empty() { "-" } else { &g.model },
            g.rows,
            g.violated,
            g.reran,
            z
        );
    }
    Ok(violated)
}

fn simulate_table(path: &Path, rd: &mut csv::Reader<File>, out: &mut String) -> Result<u64> {
    let headers = rd.headers().map_err(|e| csv_err(path, e))?.clone();
    let pos = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ik), Some(is), Some(iv)) = (pos("row_kind"), pos("statistic"), pos("value")) else {
        return Err(Error::InvalidArgument(format!("{}: not a simulate table", path.display())));
    };
    let (mut points, mut summaries) = (0u64, 0u64);
    let mut ensemble = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        match &rec[ik] {
            "point" => points += 1,
            "summary" => summaries += 1,
            "ensemble" => ensemble.push((rec[is].to_string(), rec[iv].to_string())),
            _ => {}
        }
    }
    let _ = writeln!(out, "simulation: {points} point rows, {summaries} summary rows");
    for (k, v) in ensemble {
        let shown = parse_f(&v).map_or(v, |f| format!("{f:.6}"));
        let _ = writeln!(out, "  {k:<26} {shown}");
    }
    Ok(0)
}

pub fn report(g: &Global, a: &ReportArgs) -> Result<u64> {
    let mut out = String::new();
    let mut violated = 0;
    for path in &a.inputs {
        let mut rd = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::InvalidArgument(format!("{}: {other:?}", path.display())),
        })?;
        let headers = rd.headers().map_err(|e| csv_err(path, e))?.clone();
        let _ = writeln!(out, "== {}", path.display());
        if headers.iter().any(|h| h == "experiment") {
            violated += check_table(path, &mut rd, &mut out)?;
        } else if headers.iter().any(|h| h == "row_kind") {
            violated += simulate_table(path, &mut rd, &mut out)?;
        } else {
            return Err(Error::InvalidArgument(format!("{}: unrecognized columns", path.display())));
        }
        out.push('\n');
    }
    let _ = writeln!(out, "total violated rows: {violated}");
    match &g.out {
        Some(p) => std::fs::write(p, out)?,
        None => io::stdout().lock().write_all(out.as_bytes())?,
    }
    Ok(violated)
}
