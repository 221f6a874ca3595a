//! Empirical welfare estimation and exhaustive search over threshold classes.
//!
//! The welfare estimate is the inverse-propensity-weighted sample analog
//!
//! ```text
//! W_n(G) = (1/n) * sum_i [ Y_i D_i / e_i * G_i  +  Y_i (1 - D_i) / (1 - e_i) * (1 - G_i) ]
//! ```
//!
//! with known propensities taken from the data. `ewm_search` enumerates every
//! rule in a finite class and is exact: its result provably equals brute-force
//! enumeration, with ties broken toward the lexicographically smallest
//! threshold vector so replications are deterministic and order-free.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observation, PolicyClassSpec, PolicyKind, ThresholdRule};
use crate::dgp::{self, DgpSpec};
use crate::error::{Error, Result};
use crate::par;

/// An IPW welfare value for one rule on one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareEstimate {
    pub value: f64,
    pub n_used: usize,
    pub rule: ThresholdRule,
}

fn check_propensities(d: &Dataset) -> Result<()> {
    for (row, o) in d.observations.iter().enumerate() {
        if !(o.propensity > 0.0 && o.propensity < 1.0) {
            return Err(Error::InvalidPropensity {
                row,
                value: o.propensity,
            });
        }
    }
    Ok(())
}

/// Per-unit IPW contribution when treated by the rule / not treated by it.
#[inline]
fn ipw_terms(o: &Observation) -> (f64, f64) {
    if o.treated {
        (o.outcome / o.propensity, 0.0)
    } else {
        (0.0, o.outcome / (1.0 - o.propensity))
    }
}

/// IPW welfare of `rule` on `d`.
pub fn ipw_welfare(d: &Dataset, rule: &ThresholdRule) -> Result<WelfareEstimate> {
    if d.is_empty() {
        return Err(Error::Precondition("empty dataset".into()));
    }
    check_propensities(d)?;
    let mut acc = 0.0;
    for (row, o) in d.observations.iter().enumerate() {
        let (w1, w0) = ipw_terms(o);
        acc += if rule.assign(o, row)? { w1 } else { w0 };
    }
    Ok(WelfareEstimate {
        value: acc / d.len() as f64,
        n_used: d.len(),
        rule: rule.clone(),
    })
}

/// IPW welfare of the treat-nobody rule: the status-quo benchmark.
pub fn status_quo_welfare(d: &Dataset) -> Result<WelfareEstimate> {
    ipw_welfare(d, &ThresholdRule::treat_nobody(d.covariate_dim()))
}

/// IPW value of the randomized benchmark that assigns with the experiment's
/// own propensities. Plugging G_i = e_i into the IPW formula collapses it to
/// the sample mean of observed outcomes, which is what this returns.
pub fn random_benchmark_welfare(d: &Dataset) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::Precondition("empty dataset".into()));
    }
    check_propensities(d)?;
    Ok(d.observations.iter().map(|o| o.outcome).sum::<f64>() / d.len() as f64)
}

/// Grid cell of a unit along every active axis: `cell[axis]` is the index of
/// the largest grid threshold the unit satisfies (-1 when it satisfies none).
/// Rule with axis index `j` treats the unit iff `j <= cell[axis]` on every
/// axis, which reproduces `>=` on covariates and strict `>` on the proxy.
fn unit_cells(o: &Observation, row: usize, class: &PolicyClassSpec) -> Result<Vec<isize>> {
    let mut cells = Vec::with_capacity(
        class.covariate_grids.len() + usize::from(class.kind == PolicyKind::Augmented),
    );
    for (dim, grid) in class.covariate_grids.iter().enumerate() {
        let x = o.covariates.get(dim).copied().ok_or_else(|| {
            Error::Precondition(format!(
                "row {row}: covariate dimension {dim} missing for this class"
            ))
        })?;
        let satisfied = grid.partition_point(|t| *t <= x);
        cells.push(satisfied as isize - 1);
    }
    if class.kind == PolicyKind::Augmented {
        let proxy = o.proxy.ok_or(Error::MissingProxy { row })?;
        let satisfied = class.proxy_grid.partition_point(|t| *t < proxy);
        cells.push(satisfied as isize - 1);
    }
    Ok(cells)
}

fn rule_from_flat(class: &PolicyClassSpec, flat: usize) -> ThresholdRule {
    let mut sizes: Vec<usize> = class.covariate_grids.iter().map(|g| g.len()).collect();
    if class.kind == PolicyKind::Augmented {
        sizes.push(class.proxy_grid.len());
    }
    let mut idx = vec![0usize; sizes.len()];
    let mut rem = flat;
    for (pos, size) in sizes.iter().enumerate().rev() {
        idx[pos] = rem % size;
        rem /= size;
    }
    let covariate_thresholds: Vec<f64> = class
        .covariate_grids
        .iter()
        .zip(idx.iter())
        .map(|(g, &j)| g[j])
        .collect();
    let proxy_threshold = if class.kind == PolicyKind::Augmented {
        Some(class.proxy_grid[idx[idx.len() - 1]])
    } else {
        None
    };
    ThresholdRule {
        covariate_thresholds,
        proxy_threshold,
    }
}

/// Exhaustive empirical welfare maximization over a threshold class.
///
/// Returns the rule attaining the maximum IPW welfare on `d`. Rules are
/// ranked by welfare with exact float comparison; among ties the smallest
/// flat index wins, which is the lexicographically smallest threshold vector
/// because each axis grid is sorted ascending. Grid cells are evaluated in
/// parallel; the scan that picks the winner is sequential over the ordered
/// welfare vector, so the result is independent of scheduling.
pub fn ewm_search(d: &Dataset, class: &PolicyClassSpec) -> Result<WelfareEstimate> {
    class.validate()?;
    if class.kind == PolicyKind::Random {
        return Err(Error::InvalidParameter(
            "the random benchmark has no rules to search".into(),
        ));
    }
    if d.is_empty() {
        return Err(Error::Precondition("empty dataset".into()));
    }
    check_propensities(d)?;
    for grid in class
        .covariate_grids
        .iter()
        .chain((class.kind == PolicyKind::Augmented).then_some(&class.proxy_grid))
    {
        if grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidParameter(
                "threshold grids must be sorted ascending".into(),
            ));
        }
    }

    let n = d.len();
    let mut cells = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (row, o) in d.observations.iter().enumerate() {
        cells.push(unit_cells(o, row, class)?);
        weights.push(ipw_terms(o));
    }
    let axes = cells[0].len();
    let rule_count = class.rule_count();

    // One welfare value per rule, in flat (lexicographic) order.
    let welfare: Vec<f64> = par::map_collect(rule_count, |flat| {
        let mut sizes: Vec<usize> = class.covariate_grids.iter().map(|g| g.len()).collect();
        if class.kind == PolicyKind::Augmented {
            sizes.push(class.proxy_grid.len());
        }
        let mut idx = vec![0isize; axes];
        let mut rem = flat;
        for pos in (0..axes).rev() {
            idx[pos] = (rem % sizes[pos]) as isize;
            rem /= sizes[pos];
        }
        let mut acc = 0.0;
        for (cell, (w1, w0)) in cells.iter().zip(weights.iter()) {
            let treat = cell.iter().zip(idx.iter()).all(|(c, j)| j <= c);
            acc += if treat { *w1 } else { *w0 };
        }
        acc / n as f64
    });

    let mut best_flat = 0usize;
    let mut best_value = welfare[0];
    for (flat, &v) in welfare.iter().enumerate().skip(1) {
        if v > best_value {
            best_value = v;
            best_flat = flat;
        }
    }
    Ok(WelfareEstimate {
        value: best_value,
        n_used: n,
        rule: rule_from_flat(class, best_flat),
    })
}

/// The first-best assignment for a synthetic family: 1{tau(x, a) >= 0}
/// evaluated on the true latent value.
#[derive(Debug, Clone)]
pub struct OracleRule {
    spec: DgpSpec,
}

impl OracleRule {
    pub fn assign(&self, o: &Observation, row: usize) -> Result<bool> {
        let latent = o
            .latent
            .ok_or_else(|| Error::Precondition(format!("observation {row} has no latent value")))?;
        Ok(dgp::first_best_assigns(&self.spec, &o.covariates, latent))
    }
}

/// Build the oracle rule for a family with closed-form CATE.
pub fn first_best_rule(spec: &DgpSpec) -> Result<OracleRule> {
    spec.validate()?;
    Ok(OracleRule { spec: spec.clone() })
}

/// IPW welfare of an arbitrary assignment function; used to evaluate oracle
/// rules that act on latent values rather than thresholds.
pub fn ipw_welfare_assigned<F>(d: &Dataset, mut assign: F) -> Result<f64>
where
    F: FnMut(&Observation, usize) -> Result<bool>,
{
    if d.is_empty() {
        return Err(Error::Precondition("empty dataset".into()));
    }
    check_propensities(d)?;
    let mut acc = 0.0;
    for (row, o) in d.observations.iter().enumerate() {
        let (w1, w0) = ipw_terms(o);
        acc += if assign(o, row)? { w1 } else { w0 };
    }
    Ok(acc / d.len() as f64)
}
