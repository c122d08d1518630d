//! Precision report output: aggregate JSON and a per-ray scatter CSV.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::raycast::ErrorReport;

/// One row per analyzed ray: `L,n,angle_deg,pos_err`.
pub fn scatter_csv(report: &ErrorReport) -> String {
    let mut out = String::from("L,n,angle_deg,pos_err\n");
    for s in &report.samples {
        writeln!(
            out,
            "{},{},{:e},{:e}",
            s.length, s.crossed, s.angle_deg, s.position_error
        )
        .unwrap();
    }
    out
}

pub fn write_scatter_csv(report: &ErrorReport, path: impl AsRef<Path>) -> io::Result<()> {
    fs::write(path, scatter_csv(report))
}

/// Writes any serializable report (usually a list of `ErrorReport`s) as
/// pretty JSON.
pub fn write_report_json<T: serde::Serialize + ?Sized>(
    report: &T,
    path: impl AsRef<Path>,
) -> io::Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(io::Error::other)?;
    fs::write(path, text + "\n")
}
