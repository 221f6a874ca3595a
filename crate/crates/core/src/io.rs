//! CSV dataset schema: `id,y,d,e,x1,...,xd,m1,...,mk`.
//!
//! `d` is 0/1, `e` lies in (0, 1), and missing measurements are empty cells
//! (measurement vectors may be ragged). Reals are serialized with 17
//! significant digits so a write/read cycle reproduces every 64-bit float
//! exactly. Latent values and proxies are not part of the schema: proxies
//! are derived from measurements, and latent values exist only inside
//! synthetic generators.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};

/// 17 significant digits: exact decimal round-trip for f64.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Optional dataset-level constants; anything absent is derived from the
/// sample (k from the propensity column, M as the tightest outcome cover).
#[derive(Debug, Clone, Copy, Default)]
pub struct CsvLoadOptions {
    pub overlap_k: Option<f64>,
    pub outcome_bound_m: Option<f64>,
}

fn parse_cell(raw: &str, line: usize, what: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| Error::Csv {
        line,
        message: format!("malformed {what}: {raw:?}"),
    })
}

/// Read a dataset from the core CSV schema.
pub fn read_dataset_csv_with(path: &Path, opts: CsvLoadOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => {
            return Err(Error::Csv {
                line: 1,
                message: "empty file: header row required".into(),
            })
        }
    };
    let cols: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    if cols.len() < 4 || cols[0] != "id" || cols[1] != "y" || cols[2] != "d" || cols[3] != "e" {
        return Err(Error::Csv {
            line: 1,
            message: format!("header must start with id,y,d,e; got {header:?}"),
        });
    }
    let mut dim = 0usize;
    let mut pos = 4usize;
    while pos < cols.len() && cols[pos] == format!("x{}", dim + 1) {
        dim += 1;
        pos += 1;
    }
    let mut k = 0usize;
    while pos < cols.len() && cols[pos] == format!("m{}", k + 1) {
        k += 1;
        pos += 1;
    }
    if pos != cols.len() {
        return Err(Error::Csv {
            line: 1,
            message: format!(
                "unexpected column {:?} after x1..x{dim},m1..m{k}",
                cols[pos]
            ),
        });
    }

    let mut observations = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols.len() {
            return Err(Error::Csv {
                line: line_no,
                message: format!("expected {} cells, found {}", cols.len(), cells.len()),
            });
        }
        let outcome = parse_cell(cells[1], line_no, "y")?;
        let treated = match cells[2].trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Csv {
                    line: line_no,
                    message: format!("d must be 0 or 1, got {other:?}"),
                })
            }
        };
        let propensity = parse_cell(cells[3], line_no, "e")?;
        if !(propensity > 0.0 && propensity < 1.0) {
            return Err(Error::Csv {
                line: line_no,
                message: format!("e = {propensity} outside (0, 1)"),
            });
        }
        let mut covariates = Vec::with_capacity(dim);
        for j in 0..dim {
            covariates.push(parse_cell(cells[4 + j], line_no, &format!("x{}", j + 1))?);
        }
        let mut measurements = Vec::new();
        for j in 0..k {
            let raw = cells[4 + dim + j].trim();
            if raw.is_empty() {
                continue;
            }
            measurements.push(parse_cell(raw, line_no, &format!("m{}", j + 1))?);
        }
        observations.push(Observation {
            outcome,
            treated,
            propensity,
            covariates,
            latent: None,
            measurements,
            proxy: None,
        });
    }

    let overlap_k = opts.overlap_k.unwrap_or_else(|| {
        observations
            .iter()
            .map(|o| o.propensity.min(1.0 - o.propensity))
            .fold(f64::INFINITY, f64::min)
            .min(0.5 * (1.0 - 1e-9))
    });
    let outcome_bound_m = opts.outcome_bound_m.unwrap_or_else(|| {
        2.0 * observations
            .iter()
            .map(|o| o.outcome.abs())
            .fold(0.0f64, f64::max)
    });
    Ok(Dataset {
        observations,
        overlap_k,
        outcome_bound_m,
    })
}

/// Read a dataset, deriving the dataset-level constants from the sample.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    read_dataset_csv_with(path, CsvLoadOptions::default())
}

/// Write a dataset in the core CSV schema. The measurement width is the
/// maximum count across observations; short rows get trailing empty cells.
pub fn write_dataset_csv<W: Write>(d: &Dataset, out: &mut W) -> Result<()> {
    let dim = d.covariate_dim();
    let k = d.max_measurements();
    let mut header = String::from("id,y,d,e");
    for j in 1..=dim {
        header.push_str(&format!(",x{j}"));
    }
    for j in 1..=k {
        header.push_str(&format!(",m{j}"));
    }
    writeln!(out, "{header}")?;
    for (i, o) in d.observations.iter().enumerate() {
        let mut row = format!(
            "{},{},{},{}",
            i + 1,
            fmt_real(o.outcome),
            u8::from(o.treated),
            fmt_real(o.propensity)
        );
        for x in &o.covariates {
            row.push(',');
            row.push_str(&fmt_real(*x));
        }
        for j in 0..k {
            row.push(',');
            if let Some(m) = o.measurements.get(j) {
                row.push_str(&fmt_real(*m));
            }
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

/// Write a dataset to a file atomically (temp file + rename).
pub fn write_dataset_csv_file(d: &Dataset, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        write_dataset_csv(d, &mut f)?;
        f.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Render a design frontier as CSV with the contract columns
/// `budget,t,n_feasible,mean_welfare,is_optimal`.
pub fn frontier_to_csv(f: &crate::harness::DesignFrontier) -> String {
    let mut out = String::from("budget,t,n_feasible,mean_welfare,is_optimal\n");
    for cell in &f.cells {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_real(cell.budget),
            cell.t,
            cell.n_feasible,
            fmt_real(cell.mean_welfare),
            cell.is_optimal
        ));
    }
    out
}
