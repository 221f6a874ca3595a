//! Long-format plot data: `(x, series, value)` triples any plotting tool
//! can consume. Welfare distributions come out as sorted (welfare, ecdf)
//! pairs per rule; frontiers as one row per (budget, t).

use policylab_core::harness::{DesignFrontier, ReplicationReport};
use policylab_core::io::fmt_real;

const HEADER: &str = "x,series,value\n";

/// Empirical welfare CDFs, one series per rule kind.
pub fn replication_cdf_csv(report: &ReplicationReport) -> String {
    let mut out = String::from(HEADER);
    let b = report.welfare.len();
    for (col, kind) in report.classes.iter().enumerate() {
        let mut values: Vec<f64> = report.welfare.iter().map(|row| row[col]).collect();
        values.sort_by(f64::total_cmp);
        for (i, w) in values.iter().enumerate() {
            out.push_str(&format!(
                "{},{kind},{}\n",
                fmt_real(*w),
                fmt_real((i + 1) as f64 / b as f64)
            ));
        }
    }
    out
}

/// Mean welfare per (budget, t): x = budget, series = "t=<t>".
pub fn frontier_plot_csv(frontier: &DesignFrontier) -> String {
    let mut out = String::from(HEADER);
    for cell in &frontier.cells {
        out.push_str(&format!(
            "{},t={},{}\n",
            fmt_real(cell.budget),
            cell.t,
            fmt_real(cell.mean_welfare)
        ));
    }
    out
}
