//! Domain types: observations, datasets, threshold rules, and policy classes,
//! plus numeric validation of the identifying assumptions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One experimental unit.
///
/// `latent` is populated only by synthetic generators; `proxy` is derived from
/// `measurements` (see `dgp::build_proxy`) and is required by augmented rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Realized outcome, in welfare units.
    pub outcome: f64,
    /// Treatment indicator.
    pub treated: bool,
    /// Known propensity score, in (0, 1).
    pub propensity: f64,
    /// Observed covariates, length d shared across the dataset.
    pub covariates: Vec<f64>,
    /// True latent factor, present only in synthetic data.
    pub latent: Option<f64>,
    /// Repeated noisy measurements of the latent factor.
    pub measurements: Vec<f64>,
    /// Derived proxy (average of selected measurements).
    pub proxy: Option<f64>,
}

/// A sample of observations together with the dataset-level constants the
/// identifying assumptions refer to: the overlap constant `k` and the outcome
/// support half-width bound `M/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub observations: Vec<Observation>,
    /// Overlap constant k in (0, 1/2): propensities must lie in [k, 1-k].
    pub overlap_k: f64,
    /// Outcome bound M: outcomes must lie in [-M/2, M/2].
    pub outcome_bound_m: f64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Covariate dimension of the first observation (0 for an empty dataset).
    pub fn covariate_dim(&self) -> usize {
        self.observations.first().map_or(0, |o| o.covariates.len())
    }

    /// True when every observation carries a proxy value.
    pub fn has_proxies(&self) -> bool {
        !self.is_empty() && self.observations.iter().all(|o| o.proxy.is_some())
    }

    /// Largest measurement count across observations.
    pub fn max_measurements(&self) -> usize {
        self.observations
            .iter()
            .map(|o| o.measurements.len())
            .max()
            .unwrap_or(0)
    }

    /// Smallest measurement count across observations.
    pub fn min_measurements(&self) -> usize {
        self.observations
            .iter()
            .map(|o| o.measurements.len())
            .min()
            .unwrap_or(0)
    }

    /// New dataset holding clones of the observations at `indices`, in order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            observations: indices
                .iter()
                .map(|&i| self.observations[i].clone())
                .collect(),
            overlap_k: self.overlap_k,
            outcome_bound_m: self.outcome_bound_m,
        }
    }
}

/// Which assumption a row violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// |outcome| > M/2.
    OutcomeBound,
    /// propensity outside [k, 1-k].
    Overlap,
    /// covariate vector length differs from the dataset's dimension.
    CovariateDim,
    /// a numeric field is NaN or infinite.
    NonFinite,
    /// dataset-level constant out of range (k or M).
    BadConstant,
}

/// One violated predicate, with the offending row when applicable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub row: Option<usize>,
    pub message: String,
}

/// Check the bounded-outcome and strict-overlap assumptions numerically.
///
/// Returns one entry per violated predicate; an empty report means the
/// dataset satisfies both, plus basic shape and finiteness checks.
pub fn validate_dataset(d: &Dataset) -> Vec<Violation> {
    let mut report = Vec::new();
    if !(d.overlap_k > 0.0 && d.overlap_k < 0.5) {
        report.push(Violation {
            kind: ViolationKind::BadConstant,
            row: None,
            message: format!("overlap_k = {} must lie in (0, 1/2)", d.overlap_k),
        });
    }
    if !(d.outcome_bound_m.is_finite() && d.outcome_bound_m >= 0.0) {
        report.push(Violation {
            kind: ViolationKind::BadConstant,
            row: None,
            message: format!(
                "outcome_bound_m = {} must be finite and >= 0",
                d.outcome_bound_m
            ),
        });
    }
    let dim = d.covariate_dim();
    let half = d.outcome_bound_m / 2.0;
    for (row, o) in d.observations.iter().enumerate() {
        if !o.outcome.is_finite()
            || !o.propensity.is_finite()
            || o.covariates.iter().any(|x| !x.is_finite())
            || o.measurements.iter().any(|m| !m.is_finite())
        {
            report.push(Violation {
                kind: ViolationKind::NonFinite,
                row: Some(row),
                message: format!("row {row} contains a non-finite value"),
            });
            continue;
        }
        if o.outcome.abs() > half {
            report.push(Violation {
                kind: ViolationKind::OutcomeBound,
                row: Some(row),
                message: format!(
                    "row {row}: |outcome| = {} exceeds M/2 = {half}",
                    o.outcome.abs()
                ),
            });
        }
        if o.propensity < d.overlap_k || o.propensity > 1.0 - d.overlap_k {
            report.push(Violation {
                kind: ViolationKind::Overlap,
                row: Some(row),
                message: format!(
                    "row {row}: propensity {} outside [{}, {}]",
                    o.propensity,
                    d.overlap_k,
                    1.0 - d.overlap_k
                ),
            });
        }
        if o.covariates.len() != dim {
            report.push(Violation {
                kind: ViolationKind::CovariateDim,
                row: Some(row),
                message: format!(
                    "row {row}: covariate dimension {} != {dim}",
                    o.covariates.len()
                ),
            });
        }
    }
    report
}

/// Serde helpers that keep infinite thresholds representable in JSON
/// (numbers stay numbers; non-finite values become "inf"/"-inf" strings).
pub(crate) mod real_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    fn encode(x: f64) -> Repr {
        if x.is_finite() {
            Repr::Number(x)
        } else if x == f64::INFINITY {
            Repr::Text("inf".into())
        } else {
            Repr::Text("-inf".into())
        }
    }

    fn decode<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Number(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(E::custom(format!("unrecognized real literal {other:?}"))),
            },
        }
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            v.iter()
                .copied()
                .map(encode)
                .collect::<Vec<_>>()
                .serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?
                .into_iter()
                .map(decode)
                .collect()
        }
    }

    pub mod vec_vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
            v.iter()
                .map(|inner| inner.iter().copied().map(encode).collect::<Vec<_>>())
                .collect::<Vec<_>>()
                .serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
            Vec::<Vec<Repr>>::deserialize(d)?
                .into_iter()
                .map(|inner| inner.into_iter().map(decode).collect())
                .collect()
        }
    }

    pub mod opt {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            v.map(encode).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Option::<Repr>::deserialize(d)?.map(decode).transpose()
        }
    }
}

/// A rectangular assignment rule: treat iff every covariate is `>=` its
/// threshold and, when `proxy_threshold` is present, the proxy is strictly
/// `>` its threshold. `-inf` entries deactivate a dimension, so the
/// all-`-inf` rule treats everyone in the class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    #[serde(with = "real_serde::vec")]
    pub covariate_thresholds: Vec<f64>,
    #[serde(with = "real_serde::opt", default)]
    pub proxy_threshold: Option<f64>,
}

impl ThresholdRule {
    /// Covariate-only rule.
    pub fn covariate(thresholds: Vec<f64>) -> Self {
        Self {
            covariate_thresholds: thresholds,
            proxy_threshold: None,
        }
    }

    /// Augmented rule with a proxy cutoff.
    pub fn augmented(thresholds: Vec<f64>, proxy_threshold: f64) -> Self {
        Self {
            covariate_thresholds: thresholds,
            proxy_threshold: Some(proxy_threshold),
        }
    }

    /// Rule that treats every unit (all constraints inactive).
    pub fn treat_all(dim: usize) -> Self {
        Self::covariate(vec![f64::NEG_INFINITY; dim])
    }

    /// Rule that treats no unit.
    pub fn treat_nobody(dim: usize) -> Self {
        Self::covariate(vec![f64::INFINITY; dim])
    }

    pub fn is_augmented(&self) -> bool {
        self.proxy_threshold.is_some()
    }

    /// Evaluate the rule on one observation.
    ///
    /// Errors when the rule carries a proxy threshold but the observation has
    /// no proxy; `row` is only used to label that error.
    pub fn assign(&self, o: &Observation, row: usize) -> Result<bool> {
        let covariates_ok = self
            .covariate_thresholds
            .iter()
            .zip(o.covariates.iter())
            .all(|(t, x)| x >= t);
        match self.proxy_threshold {
            None => Ok(covariates_ok),
            Some(t) => {
                let proxy = o.proxy.ok_or(Error::MissingProxy { row })?;
                Ok(covariates_ok && proxy > t)
            }
        }
    }
}

/// Evaluate `rule` on `o`. Free-function form of [`ThresholdRule::assign`].
pub fn rule_assign(rule: &ThresholdRule, o: &Observation) -> Result<bool> {
    rule.assign(o, 0)
}

/// The three rule families compared throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Benchmark that assigns with the experiment's own propensities.
    Random,
    /// Rectangular rule over covariates only.
    CovariateBased,
    /// Rectangular rule over covariates plus a proxy cutoff.
    Augmented,
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PolicyKind::Random => write!(f, "random"),
            PolicyKind::CovariateBased => write!(f, "cb"),
            PolicyKind::Augmented => write!(f, "augmented"),
        }
    }
}

/// A finite policy class: per-dimension candidate thresholds and the class's
/// VC dimension (supplied as metadata, never derived here).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyClassSpec {
    pub kind: PolicyKind,
    /// Sorted candidate thresholds per covariate dimension.
    #[serde(with = "real_serde::vec_vec", default)]
    pub covariate_grids: Vec<Vec<f64>>,
    /// Sorted candidate proxy thresholds; used iff `kind` is `Augmented`.
    #[serde(with = "real_serde::vec", default)]
    pub proxy_grid: Vec<f64>,
    pub vc_dimension: usize,
}

impl PolicyClassSpec {
    /// Validate grid shape against the class kind.
    pub fn validate(&self) -> Result<()> {
        if self.vc_dimension == 0 {
            return Err(Error::InvalidParameter("vc_dimension must be >= 1".into()));
        }
        if matches!(self.kind, PolicyKind::Random) {
            return Ok(());
        }
        for (dim, g) in self.covariate_grids.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::EmptyGrid { dim });
            }
        }
        if matches!(self.kind, PolicyKind::Augmented) && self.proxy_grid.is_empty() {
            return Err(Error::EmptyGrid {
                dim: self.covariate_grids.len(),
            });
        }
        Ok(())
    }

    /// Number of candidate rules in the class.
    pub fn rule_count(&self) -> usize {
        let cov: usize = self.covariate_grids.iter().map(|g| g.len()).product();
        match self.kind {
            PolicyKind::Random => 0,
            PolicyKind::CovariateBased => cov,
            PolicyKind::Augmented => cov * self.proxy_grid.len(),
        }
    }

    /// Build a class from empirical quantiles of the active variables.
    ///
    /// Each dimension gets `quantiles` interior quantile cutoffs plus the
    /// `-inf` sentinel, so "ignore this dimension" is always in the class.
    /// The VC dimension defaults to (number of active dimensions + 1).
    pub fn from_quantiles(d: &Dataset, kind: PolicyKind, quantiles: usize) -> Result<Self> {
        if quantiles == 0 {
            return Err(Error::InvalidParameter(
                "quantile count must be >= 1".into(),
            ));
        }
        let dim = d.covariate_dim();
        let mut covariate_grids = Vec::with_capacity(dim);
        if !matches!(kind, PolicyKind::Random) {
            for j in 0..dim {
                let values: Vec<f64> = d.observations.iter().map(|o| o.covariates[j]).collect();
                covariate_grids.push(quantile_grid(&values, quantiles));
            }
        }
        let proxy_grid = if matches!(kind, PolicyKind::Augmented) {
            if !d.has_proxies() {
                return Err(Error::Precondition(
                    "augmented class requires proxies on every observation".into(),
                ));
            }
            let values: Vec<f64> = d
                .observations
                .iter()
                .map(|o| o.proxy.expect("checked above"))
                .collect();
            quantile_grid(&values, quantiles)
        } else {
            Vec::new()
        };
        let active = match kind {
            PolicyKind::Random => 0,
            PolicyKind::CovariateBased => dim,
            PolicyKind::Augmented => dim + 1,
        };
        Ok(Self {
            kind,
            covariate_grids,
            proxy_grid,
            vc_dimension: active + 1,
        })
    }
}

/// `-inf` sentinel followed by `q` interior empirical quantiles (deduplicated).
fn quantile_grid(values: &[f64], q: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut grid = vec![f64::NEG_INFINITY];
    if sorted.is_empty() {
        return grid;
    }
    let n = sorted.len();
    for j in 1..=q {
        let level = j as f64 / (q + 1) as f64;
        let idx = ((level * n as f64).ceil() as usize).clamp(1, n) - 1;
        let v = sorted[idx];
        if grid.last() != Some(&v) {
            grid.push(v);
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(outcome: f64, treated: bool, e: f64, x: Vec<f64>) -> Observation {
        Observation {
            outcome,
            treated,
            propensity: e,
            covariates: x,
            latent: None,
            measurements: vec![],
            proxy: None,
        }
    }

    #[test]
    fn overlap_violation_names_row() {
        let d = Dataset {
            observations: vec![
                obs(1.0, false, 0.3, vec![0.0]),
                obs(1.0, true, 0.01, vec![0.0]),
            ],
            overlap_k: 0.1,
            outcome_bound_m: 10.0,
        };
        let report = validate_dataset(&d);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].kind, ViolationKind::Overlap);
        assert_eq!(report[0].row, Some(1));
    }

    #[test]
    fn outcome_bound_violation() {
        let d = Dataset {
            observations: vec![obs(7.0, false, 0.3, vec![0.0])],
            overlap_k: 0.2,
            outcome_bound_m: 10.0,
        };
        let report = validate_dataset(&d);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].kind, ViolationKind::OutcomeBound);
    }

    #[test]
    fn clean_dataset_yields_empty_report() {
        let d = Dataset {
            observations: vec![
                obs(-5.0, false, 1.0 / 3.0, vec![0.0]),
                obs(5.0, true, 1.0 / 3.0, vec![1.0]),
            ],
            overlap_k: 0.2,
            outcome_bound_m: 10.0,
        };
        assert!(validate_dataset(&d).is_empty());
    }

    #[test]
    fn vacuous_rule_treats_everyone() {
        let rule = ThresholdRule::treat_all(2);
        let o = obs(0.0, false, 0.5, vec![-1e9, 1e9]);
        assert!(rule_assign(&rule, &o).unwrap());
    }

    #[test]
    fn failed_covariate_constraint() {
        let rule = ThresholdRule::covariate(vec![30.0, 8.0]);
        let o = obs(0.0, false, 0.5, vec![29.0, 10.0]);
        assert!(!rule_assign(&rule, &o).unwrap());
    }

    #[test]
    fn proxy_threshold_is_strict() {
        let rule = ThresholdRule::augmented(vec![30.0, 8.0], 0.4);
        let mut o = obs(0.0, false, 0.5, vec![35.0, 10.0]);
        o.proxy = Some(0.4);
        assert!(!rule_assign(&rule, &o).unwrap());
        o.proxy = Some(0.4000001);
        assert!(rule_assign(&rule, &o).unwrap());
    }

    #[test]
    fn augmented_rule_without_proxy_errors() {
        let rule = ThresholdRule::augmented(vec![f64::NEG_INFINITY], 0.0);
        let o = obs(0.0, false, 0.5, vec![0.0]);
        assert!(matches!(
            rule_assign(&rule, &o),
            Err(Error::MissingProxy { .. })
        ));
    }

    #[test]
    fn augmented_rule_treats_subset_of_cb_rule() {
        // Same covariate thresholds; adding a proxy cutoff can only shrink
        // the treated set.
        let cb = ThresholdRule::covariate(vec![0.0]);
        let aug = ThresholdRule::augmented(vec![0.0], 0.3);
        for i in 0..200 {
            let mut o = obs(0.0, false, 0.5, vec![(i as f64 - 100.0) / 25.0]);
            o.proxy = Some(((i * 7) % 41) as f64 / 40.0 - 0.5);
            let treated_aug = rule_assign(&aug, &o).unwrap();
            let treated_cb = rule_assign(&cb, &o).unwrap();
            assert!(!treated_aug || treated_cb);
        }
    }

    #[test]
    fn rule_json_round_trips_infinite_sentinels() {
        let rule = ThresholdRule {
            covariate_thresholds: vec![f64::NEG_INFINITY, 30.0],
            proxy_threshold: Some(f64::NEG_INFINITY),
        };
        let json = serde_json::to_string(&rule).unwrap();
        assert!(json.contains("-inf"));
        let back: ThresholdRule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rule);
    }

    #[test]
    fn quantile_grid_has_sentinel_and_median() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let g = quantile_grid(&values, 9);
        assert_eq!(g[0], f64::NEG_INFINITY);
        assert!(g.contains(&50.0));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
