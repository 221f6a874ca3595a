//! Resampling harnesses: welfare evaluation over repeated sample splits,
//! design evaluation under a budget constraint, and regret-rate experiments
//! against generator oracles.
//!
//! All replication loops are indexed maps whose per-item seeds derive from
//! the replication indices alone, so reports are invariant to the order and
//! parallelization of the loops.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{validate_dataset, Dataset, PolicyClassSpec, PolicyKind};
use crate::dgp::{self, DgpSpec, ProxyPlan};
use crate::error::{Error, Result};
use crate::math::{derive_seed, mean_sd, standard_error};
use crate::par;
use crate::policy;

/// Seed-tag namespaces for the independent streams derived from one
/// replication seed.
const TAG_RANKERS: u64 = 1;
const TAG_SUBSAMPLE: u64 = 2;

/// Repeated sample-splitting plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    /// Share of the sample used for estimation (0.6 in the reference design).
    pub est_fraction: f64,
    /// Number of replications B.
    pub replications_b: usize,
    pub base_seed: u64,
}

impl SplitPlan {
    fn validate(&self, n: usize) -> Result<()> {
        if !(self.est_fraction > 0.0 && self.est_fraction < 1.0) {
            return Err(Error::InvalidParameter(
                "est_fraction must lie in (0, 1)".into(),
            ));
        }
        let est = (self.est_fraction * n as f64).floor() as usize;
        if est < 1 || n - est < 1 {
            return Err(Error::InvalidParameter(format!(
                "est_fraction {} leaves an empty split for n = {n}",
                self.est_fraction
            )));
        }
        if self.replications_b == 0 {
            return Err(Error::InvalidParameter(
                "replications_b must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Shuffle `0..n` with a dedicated stream and split at the estimation share.
fn split_indices(n: usize, est_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    let cut = (est_fraction * n as f64).floor() as usize;
    let test = idx.split_off(cut);
    (idx, test)
}

/// Per-replication welfare for each requested rule kind, with harm rates
/// against the per-replication status quo and pairwise mean gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    /// Column order of the welfare matrix.
    pub classes: Vec<PolicyKind>,
    /// B rows, one column per class.
    pub welfare: Vec<Vec<f64>>,
    /// Status-quo (treat nobody) test welfare per replication.
    pub status_quo: Vec<f64>,
    pub status_quo_mean: f64,
    /// Mean test welfare per class.
    pub mean_welfare: Vec<f64>,
    /// Share of replications with welfare strictly below the status quo.
    pub harm_rate: Vec<f64>,
    /// `mean_gain[i][j]` = mean over replications of (class j - class i).
    pub mean_gain: Vec<Vec<f64>>,
}

impl ReplicationReport {
    /// Mean welfare gain of `kind` over the status quo.
    pub fn gain_over_status_quo(&self, kind: PolicyKind) -> Option<f64> {
        let col = self.classes.iter().position(|k| *k == kind)?;
        Some(self.mean_welfare[col] - self.status_quo_mean)
    }
}

/// Welfare evaluation over repeated estimation/test splits.
///
/// For b = 1..B the sample is split with seed `base_seed + b`, each class is
/// fit by exhaustive search on the estimation split, and all rules plus the
/// status quo are evaluated on the test split. The random benchmark is the
/// propensity-weighted identity, i.e. the test-sample mean outcome.
pub fn run_algorithm1(
    d: &Dataset,
    plan: &SplitPlan,
    classes: &[PolicyClassSpec],
) -> Result<ReplicationReport> {
    plan.validate(d.len())?;
    let violations = validate_dataset(d);
    if !violations.is_empty() {
        return Err(Error::Precondition(format!(
            "dataset fails validation with {} violation(s); first: {}",
            violations.len(),
            violations[0].message
        )));
    }
    if !classes.iter().any(|c| c.kind == PolicyKind::Random) {
        return Err(Error::InvalidParameter(
            "classes must include the random-rule benchmark".into(),
        ));
    }
    for class in classes {
        class.validate()?;
        if class.kind == PolicyKind::Augmented && !d.has_proxies() {
            return Err(Error::Precondition(
                "augmented class requested but the data carry no proxies".into(),
            ));
        }
    }

    let b_total = plan.replications_b;
    let rows: Vec<Result<(Vec<f64>, f64)>> = par::map_collect(b_total, |b_idx| {
        let b = b_idx as u64 + 1;
        let (est_idx, test_idx) = split_indices(d.len(), plan.est_fraction, plan.base_seed + b);
        let est = d.subset(&est_idx);
        let test = d.subset(&test_idx);
        let mut row = Vec::with_capacity(classes.len());
        for class in classes {
            let w = match class.kind {
                PolicyKind::Random => policy::random_benchmark_welfare(&test)?,
                _ => {
                    let best = policy::ewm_search(&est, class)?;
                    policy::ipw_welfare(&test, &best.rule)?.value
                }
            };
            row.push(w);
        }
        let sq = policy::status_quo_welfare(&test)?.value;
        Ok((row, sq))
    });

    let mut welfare = Vec::with_capacity(b_total);
    let mut status_quo = Vec::with_capacity(b_total);
    for r in rows {
        let (row, sq) = r?;
        welfare.push(row);
        status_quo.push(sq);
    }

    let cols = classes.len();
    let bf = b_total as f64;
    let mut mean_welfare = vec![0.0; cols];
    let mut harm = vec![0usize; cols];
    for (row, sq) in welfare.iter().zip(status_quo.iter()) {
        for (c, w) in row.iter().enumerate() {
            mean_welfare[c] += w;
            if w < sq {
                harm[c] += 1;
            }
        }
    }
    for m in mean_welfare.iter_mut() {
        *m /= bf;
    }
    let harm_rate: Vec<f64> = harm.iter().map(|h| *h as f64 / bf).collect();
    let mut mean_gain = vec![vec![0.0; cols]; cols];
    for (i, gi) in mean_gain.iter_mut().enumerate() {
        for (j, g) in gi.iter_mut().enumerate() {
            *g = mean_welfare[j] - mean_welfare[i];
        }
    }
    let status_quo_mean = status_quo.iter().sum::<f64>() / bf;

    Ok(ReplicationReport {
        classes: classes.iter().map(|c| c.kind).collect(),
        welfare,
        status_quo,
        status_quo_mean,
        mean_welfare,
        harm_rate,
        mean_gain,
    })
}

/// Feasible policy-learning sample size under a linear budget:
/// `min(floor(B0 / (cn + ct * t)), pool_cap)`.
///
/// Callers guarantee `cn > 0` and `b0 > 0`.
pub fn feasible_n(t: usize, b0: f64, cn: f64, ct: f64, pool_cap: usize) -> usize {
    let raw = (b0 / (cn + ct * t as f64)).floor();
    if raw <= 0.0 {
        0
    } else {
        (raw as usize).min(pool_cap)
    }
}

/// Configuration of the design-evaluation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignEvalConfig {
    pub budgets: Vec<f64>,
    pub t_grid: Vec<usize>,
    pub cost_cn: f64,
    pub cost_ct: f64,
    /// Proxy redraws R per (split, t).
    pub proxy_draws_r: usize,
    /// Quantiles per active dimension when building threshold grids.
    pub grid_quantiles: usize,
}

/// One (budget, t) cell of the design frontier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierCell {
    pub budget: f64,
    pub t: usize,
    pub n_feasible: usize,
    /// Mean test welfare of the design: the covariate-based rule at t = 0,
    /// the augmented rule at t > 0.
    pub mean_welfare: f64,
    pub std_error: f64,
    /// Mean test welfare of the covariate-based rule fit on the same
    /// feasible subsample; equals `mean_welfare` at t = 0.
    pub mean_welfare_cb: f64,
    pub is_optimal: bool,
}

/// Per-budget summary of the frontier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub budget: f64,
    pub t_star: usize,
    pub n_star: usize,
    pub welfare_star: f64,
    /// Welfare of the t = 0 design at this budget, when 0 is in the grid.
    pub cb_only_welfare: Option<f64>,
    pub gain: Option<f64>,
}

/// Output of [`run_algorithm2`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFrontier {
    pub cells: Vec<FrontierCell>,
    pub rows: Vec<FrontierRow>,
    /// Unit-draws whose proxy had to fall back to fewer than t measurements.
    pub ragged_proxy_units: usize,
}

/// Design evaluation under a budget constraint.
///
/// Outer replications b = 1..B draw a common estimation/test split with seed
/// `base_seed + b`. Per (t, r) the item seed is the documented formula
/// `100000*b + 1000*t + r` (r = 0 on the t = 0 path); ranker selection and
/// the estimation-pool shuffle derive from it through separate streams. The
/// feasible subsample at each budget is a prefix of that one shuffle, so for
/// fixed (b, t, r) the units used at a larger budget are a superset of those
/// used at a smaller one and frontier curves are not confounded by
/// resampling noise across budgets.
pub fn run_algorithm2(
    d: &Dataset,
    cfg: &DesignEvalConfig,
    plan: &SplitPlan,
) -> Result<DesignFrontier> {
    plan.validate(d.len())?;
    if cfg.budgets.is_empty() || cfg.t_grid.is_empty() {
        return Err(Error::InvalidParameter(
            "budgets and t_grid must be nonempty".into(),
        ));
    }
    if !cfg.cost_cn.is_finite() || cfg.cost_cn <= 0.0 || cfg.cost_ct < 0.0 {
        return Err(Error::InvalidParameter(
            "cost_cn must be > 0 and cost_ct >= 0".into(),
        ));
    }
    if cfg.proxy_draws_r == 0 {
        return Err(Error::InvalidParameter("proxy_draws_r must be >= 1".into()));
    }
    let max_t = cfg.t_grid.iter().copied().max().unwrap_or(0);
    if max_t > 0 && d.min_measurements() == 0 {
        return Err(Error::Precondition(
            "t > 0 requested but some units have no measurements".into(),
        ));
    }

    struct ItemOut {
        /// Per budget: (augmented-or-cb welfare, cb welfare) per inner rep.
        per_budget: Vec<Vec<(f64, f64)>>,
        ragged: usize,
    }

    let items: Vec<(usize, usize)> = (1..=plan.replications_b)
        .flat_map(|b| cfg.t_grid.iter().map(move |&t| (b, t)))
        .collect();

    let results: Vec<Result<ItemOut>> = par::map_collect(items.len(), |item_idx| {
        let (b, t) = items[item_idx];
        let (est_idx, test_idx) =
            split_indices(d.len(), plan.est_fraction, plan.base_seed + b as u64);
        let pool_cap = est_idx.len();
        let reps = if t == 0 { 1 } else { cfg.proxy_draws_r };
        let mut per_budget = vec![Vec::with_capacity(reps); cfg.budgets.len()];
        let mut ragged = 0usize;
        for r in 1..=reps {
            let item_seed =
                100_000 * b as u64 + 1_000 * t as u64 + if t == 0 { 0 } else { r as u64 };
            // Proxy over the full sample so estimation and test agree.
            let (proxied, flagged) = if t > 0 {
                let plan_t = ProxyPlan::random(t, derive_seed(item_seed, TAG_RANKERS));
                let (ds, flagged) = dgp::build_proxy_ragged(d, &plan_t)?;
                (ds, flagged)
            } else {
                (d.clone(), 0)
            };
            ragged += flagged;
            let test = proxied.subset(&test_idx);
            // One budget-independent shuffle of the estimation pool.
            let mut pool = est_idx.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(item_seed, TAG_SUBSAMPLE));
            for i in (1..pool.len()).rev() {
                let j = rng.random_range(0..=i);
                pool.swap(i, j);
            }
            for (bi, &budget) in cfg.budgets.iter().enumerate() {
                let n = feasible_n(t, budget, cfg.cost_cn, cfg.cost_ct, pool_cap);
                if n == 0 {
                    per_budget[bi].push((f64::NAN, f64::NAN));
                    continue;
                }
                let train = proxied.subset(&pool[..n]);
                let cb_class = PolicyClassSpec::from_quantiles(
                    &train,
                    PolicyKind::CovariateBased,
                    cfg.grid_quantiles,
                )?;
                let cb_rule = policy::ewm_search(&train, &cb_class)?.rule;
                let cb_w = policy::ipw_welfare(&test, &cb_rule)?.value;
                let design_w = if t == 0 {
                    cb_w
                } else {
                    let aug_class = PolicyClassSpec::from_quantiles(
                        &train,
                        PolicyKind::Augmented,
                        cfg.grid_quantiles,
                    )?;
                    let aug_rule = policy::ewm_search(&train, &aug_class)?.rule;
                    policy::ipw_welfare(&test, &aug_rule)?.value
                };
                per_budget[bi].push((design_w, cb_w));
            }
        }
        Ok(ItemOut { per_budget, ragged })
    });

    // Sequential aggregation in item order keeps sums bit-stable.
    let mut sums: Vec<Vec<f64>> = vec![vec![0.0; cfg.t_grid.len()]; cfg.budgets.len()];
    let mut cb_sums = sums.clone();
    let mut samples: Vec<Vec<Vec<f64>>> =
        vec![vec![Vec::new(); cfg.t_grid.len()]; cfg.budgets.len()];
    let mut counts: Vec<Vec<usize>> = vec![vec![0; cfg.t_grid.len()]; cfg.budgets.len()];
    let mut n_feasible: Vec<Vec<usize>> = vec![vec![0; cfg.t_grid.len()]; cfg.budgets.len()];
    let mut ragged_total = 0usize;
    for (item_idx, out) in results.into_iter().enumerate() {
        let out = out?;
        let (_, t) = items[item_idx];
        let ti = cfg.t_grid.iter().position(|&x| x == t).expect("own grid");
        ragged_total += out.ragged;
        for (bi, reps) in out.per_budget.iter().enumerate() {
            n_feasible[bi][ti] = feasible_n(
                t,
                cfg.budgets[bi],
                cfg.cost_cn,
                cfg.cost_ct,
                ((plan.est_fraction * d.len() as f64).floor()) as usize,
            );
            for &(w, cb) in reps {
                if w.is_nan() {
                    continue;
                }
                sums[bi][ti] += w;
                cb_sums[bi][ti] += cb;
                samples[bi][ti].push(w);
                counts[bi][ti] += 1;
            }
        }
    }

    let mut cells = Vec::with_capacity(cfg.budgets.len() * cfg.t_grid.len());
    let mut rows = Vec::with_capacity(cfg.budgets.len());
    for (bi, &budget) in cfg.budgets.iter().enumerate() {
        let mut best_ti = 0usize;
        let mut best_w = f64::NEG_INFINITY;
        for ti in 0..cfg.t_grid.len() {
            if counts[bi][ti] == 0 {
                continue;
            }
            let mean = sums[bi][ti] / counts[bi][ti] as f64;
            if mean > best_w {
                best_w = mean;
                best_ti = ti;
            }
        }
        for (ti, &t) in cfg.t_grid.iter().enumerate() {
            let c = counts[bi][ti];
            let mean = if c == 0 {
                f64::NAN
            } else {
                sums[bi][ti] / c as f64
            };
            let mean_cb = if c == 0 {
                f64::NAN
            } else {
                cb_sums[bi][ti] / c as f64
            };
            cells.push(FrontierCell {
                budget,
                t,
                n_feasible: n_feasible[bi][ti],
                mean_welfare: mean,
                std_error: if c == 0 {
                    f64::NAN
                } else {
                    standard_error(&samples[bi][ti])
                },
                mean_welfare_cb: mean_cb,
                is_optimal: ti == best_ti,
            });
        }
        let cb_only = cfg
            .t_grid
            .iter()
            .position(|&t| t == 0)
            .filter(|&ti| counts[bi][ti] > 0)
            .map(|ti| sums[bi][ti] / counts[bi][ti] as f64);
        rows.push(FrontierRow {
            budget,
            t_star: cfg.t_grid[best_ti],
            n_star: n_feasible[bi][best_ti],
            welfare_star: best_w,
            cb_only_welfare: cb_only,
            gain: cb_only.map(|c| best_w - c),
        });
    }

    Ok(DesignFrontier {
        cells,
        rows,
        ragged_proxy_units: ragged_total,
    })
}

/// How the policy class is supplied to rate experiments: a fixed grid, or
/// quantile grids rebuilt from each generated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClassSpecSource {
    Fixed(PolicyClassSpec),
    Quantile { kind: PolicyKind, quantiles: usize },
}

impl ClassSpecSource {
    fn instantiate(&self, d: &Dataset) -> Result<PolicyClassSpec> {
        match self {
            ClassSpecSource::Fixed(c) => Ok(c.clone()),
            ClassSpecSource::Quantile { kind, quantiles } => {
                PolicyClassSpec::from_quantiles(d, *kind, *quantiles)
            }
        }
    }
}

/// Mean regret at one sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub mean_regret: f64,
    pub std_error: f64,
}

/// Output of [`regret_rate_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub points: Vec<RatePoint>,
    /// Least-squares slope of log mean regret on log n.
    pub log_log_slope: f64,
}

const TAG_RATE: u64 = 3;

/// Monte Carlo regret of fitted rules against the generator oracle.
///
/// For each n in `n_grid` and each of `reps` fresh samples, a rule is fit by
/// exhaustive search and its exact (or `mc_n`-draw Monte Carlo) population
/// welfare is subtracted from the oracle welfare.
pub fn regret_rate_experiment(
    spec: &DgpSpec,
    class: &ClassSpecSource,
    n_grid: &[usize],
    reps: usize,
    mc_n: usize,
) -> Result<RateReport> {
    spec.validate()?;
    if n_grid.is_empty() || reps == 0 {
        return Err(Error::InvalidParameter(
            "n_grid and reps must be nonempty".into(),
        ));
    }
    let oracle = dgp::oracle_welfare(spec)?;
    let items: Vec<(usize, usize)> = n_grid
        .iter()
        .flat_map(|&n| (0..reps).map(move |r| (n, r)))
        .collect();
    let regrets: Vec<Result<f64>> = par::map_collect(items.len(), |idx| {
        let (n, r) = items[idx];
        let sample_seed = derive_seed(
            derive_seed(spec.seed, TAG_RATE),
            ((n as u64) << 20) ^ r as u64,
        );
        let sample_spec = DgpSpec {
            family: spec.family.clone(),
            seed: sample_seed,
        };
        let d = dgp::generate(&sample_spec, n)?;
        let class = class.instantiate(&d)?;
        let best = policy::ewm_search(&d, &class)?;
        let w = dgp::true_welfare(spec, &best.rule, None, mc_n)?;
        Ok(oracle - w.value)
    });

    let mut per_n: Vec<Vec<f64>> = vec![Vec::with_capacity(reps); n_grid.len()];
    for (idx, r) in regrets.into_iter().enumerate() {
        let (n, _) = items[idx];
        let ni = n_grid.iter().position(|&x| x == n).expect("own grid");
        per_n[ni].push(r?);
    }
    let points: Vec<RatePoint> = n_grid
        .iter()
        .zip(per_n.iter())
        .map(|(&n, values)| {
            let (mean, sd) = mean_sd(values);
            RatePoint {
                n,
                mean_regret: mean,
                std_error: sd / (values.len() as f64).sqrt(),
            }
        })
        .collect();

    let fit: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.mean_regret > 0.0)
        .map(|p| ((p.n as f64).ln(), p.mean_regret.ln()))
        .collect();
    let log_log_slope = ols_slope(&fit);

    Ok(RateReport {
        points,
        log_log_slope,
    })
}

fn ols_slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return f64::NAN;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Observation, ThresholdRule};
    use crate::dgp::{CbLowerParams, DgpFamily, HaLowerParams, LatentNormalParams};

    fn toy_dataset() -> Dataset {
        let obs = |y: f64, d: bool, x: f64| Observation {
            outcome: y,
            treated: d,
            propensity: 0.5,
            covariates: vec![x],
            latent: None,
            measurements: vec![],
            proxy: None,
        };
        Dataset {
            observations: vec![
                obs(1.0, true, 0.1),
                obs(-1.0, false, 0.2),
                obs(2.0, true, 0.8),
                obs(0.5, false, 0.9),
            ],
            overlap_k: 0.25,
            outcome_bound_m: 10.0,
        }
    }

    fn cb_class() -> PolicyClassSpec {
        PolicyClassSpec {
            kind: PolicyKind::CovariateBased,
            covariate_grids: vec![vec![f64::NEG_INFINITY, 0.5]],
            proxy_grid: vec![],
            vc_dimension: 2,
        }
    }

    fn random_class() -> PolicyClassSpec {
        PolicyClassSpec {
            kind: PolicyKind::Random,
            covariate_grids: vec![],
            proxy_grid: vec![],
            vc_dimension: 1,
        }
    }

    #[test]
    fn single_replication_report_shape() {
        let d = toy_dataset();
        let plan = SplitPlan {
            est_fraction: 0.5,
            replications_b: 1,
            base_seed: 9,
        };
        let report = run_algorithm1(&d, &plan, &[random_class(), cb_class()]).unwrap();
        assert_eq!(report.welfare.len(), 1);
        assert_eq!(report.welfare[0].len(), 2);
        for h in &report.harm_rate {
            assert!(*h == 0.0 || *h == 1.0);
        }
    }

    #[test]
    fn missing_random_benchmark_is_an_error() {
        let d = toy_dataset();
        let plan = SplitPlan {
            est_fraction: 0.5,
            replications_b: 1,
            base_seed: 9,
        };
        assert!(run_algorithm1(&d, &plan, &[cb_class()]).is_err());
    }

    #[test]
    fn harm_rate_is_the_ecdf_at_the_status_quo() {
        let spec = DgpSpec {
            family: DgpFamily::LatentNormal(LatentNormalParams {
                dim: 1,
                tau_const: 0.0,
                tau_x: vec![0.5],
                tau_a: 1.0,
                latent_sd: 1.0,
                sigma_u: 0.5,
                baseline_sd: 1.0,
                p: 0.5,
                n_measurements: 2,
            }),
            seed: 77,
        };
        let d = dgp::generate(&spec, 400).unwrap();
        let plan = SplitPlan {
            est_fraction: 0.6,
            replications_b: 40,
            base_seed: 5,
        };
        let report = run_algorithm1(&d, &plan, &[random_class(), cb_class()]).unwrap();
        for (c, _) in report.classes.iter().enumerate() {
            let ecdf = report
                .welfare
                .iter()
                .zip(report.status_quo.iter())
                .filter(|(row, sq)| row[c] < **sq)
                .count() as f64
                / plan.replications_b as f64;
            assert_eq!(report.harm_rate[c], ecdf);
            assert!((0.0..=1.0).contains(&report.harm_rate[c]));
        }
    }

    #[test]
    fn zero_effect_dgp_has_vanishing_gains() {
        let spec = DgpSpec {
            family: DgpFamily::LatentNormal(LatentNormalParams {
                dim: 1,
                tau_const: 0.0,
                tau_x: vec![0.0],
                tau_a: 0.0,
                latent_sd: 1.0,
                sigma_u: 0.5,
                baseline_sd: 1.0,
                p: 0.5,
                n_measurements: 2,
            }),
            seed: 3,
        };
        let d = dgp::generate(&spec, 2_000).unwrap();
        let plan = SplitPlan {
            est_fraction: 0.6,
            replications_b: 200,
            base_seed: 1,
        };
        let report = run_algorithm1(&d, &plan, &[random_class(), cb_class()]).unwrap();
        // Y(1) = Y(0): every policy's welfare estimates the same mean, so all
        // pairwise gains shrink to Monte Carlo noise.
        for row in &report.mean_gain {
            for g in row {
                assert!(g.abs() < 0.1, "gain {g}");
            }
        }
    }

    #[test]
    fn feasible_n_reference_points() {
        assert_eq!(feasible_n(2, 600.0, 0.75, 0.25, 794), 480);
        assert_eq!(feasible_n(4, 1000.0, 0.75, 0.25, 794), 571);
        assert_eq!(feasible_n(0, 600.0, 0.75, 0.25, 794), 794);
    }

    fn small_design_inputs() -> (Dataset, DesignEvalConfig, SplitPlan) {
        let spec = DgpSpec {
            family: DgpFamily::LatentNormal(LatentNormalParams {
                dim: 1,
                tau_const: 0.0,
                tau_x: vec![0.3],
                tau_a: 2.0,
                latent_sd: 1.0,
                sigma_u: 1.0,
                baseline_sd: 0.5,
                p: 1.0 / 3.0,
                n_measurements: 4,
            }),
            seed: 15,
        };
        let d = dgp::generate(&spec, 300).unwrap();
        let cfg = DesignEvalConfig {
            budgets: vec![60.0, 120.0],
            t_grid: vec![0, 1, 2],
            cost_cn: 0.75,
            cost_ct: 0.25,
            proxy_draws_r: 2,
            grid_quantiles: 4,
        };
        let plan = SplitPlan {
            est_fraction: 0.6,
            replications_b: 3,
            base_seed: 11,
        };
        (d, cfg, plan)
    }

    #[test]
    fn degenerate_design_grid_is_cb_only() {
        let (d, mut cfg, plan) = small_design_inputs();
        cfg.budgets = vec![90.0];
        cfg.t_grid = vec![0];
        let f = run_algorithm2(&d, &cfg, &plan).unwrap();
        assert_eq!(f.rows.len(), 1);
        assert_eq!(f.rows[0].t_star, 0);
        assert_eq!(f.rows[0].welfare_star, f.rows[0].cb_only_welfare.unwrap());
        assert_eq!(f.rows[0].gain, Some(0.0));
    }

    #[test]
    fn design_frontier_is_deterministic() {
        let (d, cfg, plan) = small_design_inputs();
        let a = run_algorithm2(&d, &cfg, &plan).unwrap();
        let b = run_algorithm2(&d, &cfg, &plan).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn frontier_star_beats_cb_only_by_construction() {
        let (d, cfg, plan) = small_design_inputs();
        let f = run_algorithm2(&d, &cfg, &plan).unwrap();
        for row in &f.rows {
            if row.t_star > 0 {
                assert!(row.welfare_star >= row.cb_only_welfare.unwrap());
            }
        }
    }

    #[test]
    fn adding_budgets_leaves_existing_cells_unchanged() {
        // Subsampling streams never depend on the budget (prefix sampling),
        // so enlarging the budget grid cannot perturb existing cells.
        let (d, mut cfg, plan) = small_design_inputs();
        cfg.budgets = vec![60.0];
        let small = run_algorithm2(&d, &cfg, &plan).unwrap();
        cfg.budgets = vec![60.0, 150.0];
        let wide = run_algorithm2(&d, &cfg, &plan).unwrap();
        for cell in &small.cells {
            let twin = wide
                .cells
                .iter()
                .find(|c| c.budget == cell.budget && c.t == cell.t)
                .unwrap();
            assert_eq!(twin.mean_welfare, cell.mean_welfare);
            assert_eq!(twin.n_feasible, cell.n_feasible);
        }
    }

    #[test]
    fn informative_proxy_stays_in_the_optimal_design() {
        // Strong latent heterogeneity with noisy measurements: every budget
        // keeps at least one measurement, and loosening the budget never
        // makes the best design worse.
        let spec = DgpSpec {
            family: DgpFamily::LatentNormal(LatentNormalParams {
                dim: 1,
                tau_const: 0.0,
                tau_x: vec![0.8],
                tau_a: 1.2,
                latent_sd: 1.0,
                sigma_u: 2.5,
                baseline_sd: 1.0,
                p: 1.0 / 3.0,
                n_measurements: 5,
            }),
            seed: 400,
        };
        let d = dgp::generate(&spec, 900).unwrap();
        let cfg = DesignEvalConfig {
            budgets: vec![60.0, 120.0, 240.0, 480.0],
            t_grid: vec![0, 1, 2, 3, 4, 5],
            cost_cn: 0.5,
            cost_ct: 0.5,
            proxy_draws_r: 10,
            grid_quantiles: 5,
        };
        let plan = SplitPlan {
            est_fraction: 0.6,
            replications_b: 12,
            base_seed: 21,
        };
        let f = run_algorithm2(&d, &cfg, &plan).unwrap();
        for row in &f.rows {
            assert!(
                row.t_star >= 1,
                "budget {}: t* = {}",
                row.budget,
                row.t_star
            );
        }
        assert!(
            f.rows.last().unwrap().welfare_star > f.rows.first().unwrap().welfare_star,
            "welfare should improve from the tightest to the loosest budget"
        );
    }

    #[test]
    fn cb_lower_regret_is_flat_at_half_sigma0() {
        let spec = DgpSpec {
            family: DgpFamily::CbLower(CbLowerParams {
                mu_x: 0.0,
                sigma_x: 1.0,
                sigma0: 1.0,
                p: 0.5,
            }),
            seed: 4,
        };
        let source = ClassSpecSource::Quantile {
            kind: PolicyKind::CovariateBased,
            quantiles: 5,
        };
        let report = regret_rate_experiment(&spec, &source, &[100, 1_000], 10, 10_000).unwrap();
        for p in &report.points {
            assert!(
                (p.mean_regret - 0.5).abs() < 1e-12,
                "regret {}",
                p.mean_regret
            );
        }
    }

    #[test]
    fn ha_lower_noise_floor_dominates_at_large_n() {
        let spec = DgpSpec {
            family: DgpFamily::HaLower(HaLowerParams {
                mu_x: 0.0,
                sigma_x: 1.0,
                kappa: 1.0,
                rho: 0.25,
                m: 2.0,
                p: 0.5,
            }),
            seed: 44,
        };
        let source = ClassSpecSource::Quantile {
            kind: PolicyKind::Augmented,
            quantiles: 9,
        };
        let report = regret_rate_experiment(&spec, &source, &[16_000], 40, 0).unwrap();
        let r = report.points[0].mean_regret;
        assert!((r - 0.25).abs() < 0.02, "regret {r}");
    }

    #[test]
    fn bayes_threshold_rule_welfare_used_by_rate_checks() {
        // The fitted-rule welfare path and the direct closed form agree.
        let spec = DgpSpec {
            family: DgpFamily::HaLower(HaLowerParams {
                mu_x: 0.0,
                sigma_x: 1.0,
                kappa: 1.0,
                rho: 0.25,
                m: 2.0,
                p: 0.5,
            }),
            seed: 2,
        };
        let rule = ThresholdRule::augmented(vec![f64::NEG_INFINITY], 0.0);
        let w = dgp::true_welfare(&spec, &rule, None, 0).unwrap();
        assert!((w.value - 0.75).abs() < 1e-12);
    }
}
