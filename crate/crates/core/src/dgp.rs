//! Synthetic data generators.
//!
//! Three families are implemented:
//!
//! * `cb_lower` — the two-point latent construction that makes every
//!   covariate-based rule worthless: X ~ N(mu_x, sigma_x^2), A in
//!   {-sigma0, +sigma0} with probability 1/2 each, Y(0) = 0, Y(1) = A.
//! * `ha_lower` — the uniform-latent / two-point-noise construction with an
//!   irreducible proxy ambiguity zone: A ~ Unif[-1/kappa, 1/kappa],
//!   eps in {-rho, +rho}, A_hat = A + eps, Y(d) = ±(M/2)·sign(A).
//! * `latent_normal` — a smooth family with linear CATE in (x, a), Gaussian
//!   latent factor, and repeated noisy measurements, used for rate and
//!   resampling experiments.
//!
//! Every draw is produced from a per-observation ChaCha stream keyed by the
//! spec seed and the row index, so generation is bit-reproducible under any
//! degree of parallelism.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observation, ThresholdRule};
use crate::error::{Error, Result};
use crate::math::{derive_seed, mean_sd, normal_cdf, normal_pdf, sign_pos};
use crate::par;

/// Parameters of the covariate-based lower-bound construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbLowerParams {
    pub mu_x: f64,
    pub sigma_x: f64,
    /// Latent scale: A takes values -sigma0 and +sigma0.
    pub sigma0: f64,
    /// Constant treatment probability.
    pub p: f64,
}

/// Parameters of the proxy lower-bound construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaLowerParams {
    pub mu_x: f64,
    pub sigma_x: f64,
    /// Margin constant: A ~ Unif[-1/kappa, 1/kappa].
    pub kappa: f64,
    /// Proxy error scale: eps in {-rho, +rho}; requires rho <= 1/(2 kappa).
    pub rho: f64,
    /// Outcome bound: Y(d) = ±(m/2)·sign(A).
    pub m: f64,
    pub p: f64,
}

/// Parameters of the smooth latent-heterogeneity family.
///
/// Covariates are iid standard normal, A ~ N(0, latent_sd^2), the CATE is
/// tau(x, a) = tau_const + tau_x·x + tau_a·a, Y(0) ~ N(0, baseline_sd^2),
/// measurements are A + N(0, sigma_u^2) repeated `n_measurements` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentNormalParams {
    pub dim: usize,
    pub tau_const: f64,
    pub tau_x: Vec<f64>,
    pub tau_a: f64,
    pub latent_sd: f64,
    /// Measurement noise sd (homoskedastic, so m0 = sigma_u).
    pub sigma_u: f64,
    pub baseline_sd: f64,
    pub p: f64,
    #[serde(default = "default_n_measurements")]
    pub n_measurements: usize,
}

fn default_n_measurements() -> usize {
    5
}

/// Generative family plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum DgpFamily {
    CbLower(CbLowerParams),
    HaLower(HaLowerParams),
    LatentNormal(LatentNormalParams),
}

impl DgpFamily {
    pub fn name(&self) -> &'static str {
        match self {
            DgpFamily::CbLower(_) => "cb_lower",
            DgpFamily::HaLower(_) => "ha_lower",
            DgpFamily::LatentNormal(_) => "latent_normal",
        }
    }
}

/// A complete generative specification: family, parameters, and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    #[serde(flatten)]
    pub family: DgpFamily,
    pub seed: u64,
}

impl DgpSpec {
    /// Check parameter constraints; every generator calls this first.
    pub fn validate(&self) -> Result<()> {
        let check_p = |p: f64| -> Result<()> {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "treatment probability p = {p} must lie in (0, 1)"
                )));
            }
            Ok(())
        };
        match &self.family {
            DgpFamily::CbLower(c) => {
                check_p(c.p)?;
                if !c.sigma_x.is_finite() || c.sigma_x <= 0.0 {
                    return Err(Error::InvalidParameter("sigma_x must be > 0".into()));
                }
                if !c.sigma0.is_finite() || c.sigma0 <= 0.0 {
                    return Err(Error::InvalidParameter("sigma0 must be > 0".into()));
                }
            }
            DgpFamily::HaLower(h) => {
                check_p(h.p)?;
                if !h.sigma_x.is_finite() || h.sigma_x <= 0.0 {
                    return Err(Error::InvalidParameter("sigma_x must be > 0".into()));
                }
                if !h.kappa.is_finite() || h.kappa <= 0.0 {
                    return Err(Error::InvalidParameter("kappa must be > 0".into()));
                }
                if !h.m.is_finite() || h.m <= 0.0 {
                    return Err(Error::InvalidParameter("m must be > 0".into()));
                }
                if h.rho < 0.0 {
                    return Err(Error::InvalidParameter("rho must be >= 0".into()));
                }
                let limit = 1.0 / (2.0 * h.kappa);
                if h.rho > limit {
                    return Err(Error::OutOfRegime { rho: h.rho, limit });
                }
            }
            DgpFamily::LatentNormal(l) => {
                check_p(l.p)?;
                if l.tau_x.len() != l.dim {
                    return Err(Error::InvalidParameter(format!(
                        "tau_x has {} entries but dim = {}",
                        l.tau_x.len(),
                        l.dim
                    )));
                }
                for (name, v) in [
                    ("latent_sd", l.latent_sd),
                    ("sigma_u", l.sigma_u),
                    ("baseline_sd", l.baseline_sd),
                ] {
                    if v < 0.0 {
                        return Err(Error::InvalidParameter(format!("{name} must be >= 0")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Constant propensity of the family.
    pub fn propensity(&self) -> f64 {
        match &self.family {
            DgpFamily::CbLower(c) => c.p,
            DgpFamily::HaLower(h) => h.p,
            DgpFamily::LatentNormal(l) => l.p,
        }
    }
}

/// One synthetic unit with both potential outcomes, used internally and by
/// the Monte Carlo welfare evaluators.
#[derive(Debug, Clone)]
pub struct SyntheticDraw {
    pub covariates: Vec<f64>,
    pub latent: f64,
    pub y0: f64,
    pub y1: f64,
    pub treated: bool,
    pub measurements: Vec<f64>,
    /// Intrinsic proxy (only `ha_lower` ships one with the data).
    pub proxy: Option<f64>,
}

fn draw_unit(spec: &DgpSpec, stream: u64) -> SyntheticDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    match &spec.family {
        DgpFamily::CbLower(c) => {
            let x = Normal::new(c.mu_x, c.sigma_x)
                .expect("validated")
                .sample(&mut rng);
            let a = if rng.random::<bool>() {
                c.sigma0
            } else {
                -c.sigma0
            };
            let treated = rng.random::<f64>() < c.p;
            SyntheticDraw {
                covariates: vec![x],
                latent: a,
                y0: 0.0,
                y1: a,
                treated,
                measurements: vec![],
                proxy: None,
            }
        }
        DgpFamily::HaLower(h) => {
            let x = Normal::new(h.mu_x, h.sigma_x)
                .expect("validated")
                .sample(&mut rng);
            let half_width = 1.0 / h.kappa;
            let a = rng.random_range(-half_width..half_width);
            let eps = if rng.random::<bool>() { h.rho } else { -h.rho };
            let treated = rng.random::<f64>() < h.p;
            let s = sign_pos(a);
            let proxy = a + eps;
            // Outside the ambiguity zone the proxy recovers the sign exactly.
            debug_assert!(proxy.abs() < h.rho || sign_pos(proxy) == s);
            SyntheticDraw {
                covariates: vec![x],
                latent: a,
                y0: -h.m / 2.0 * s,
                y1: h.m / 2.0 * s,
                treated,
                measurements: vec![proxy],
                proxy: Some(proxy),
            }
        }
        DgpFamily::LatentNormal(l) => {
            let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
            let covariates: Vec<f64> = (0..l.dim).map(|_| std_normal.sample(&mut rng)).collect();
            let a = l.latent_sd * std_normal.sample(&mut rng);
            let y0 = l.baseline_sd * std_normal.sample(&mut rng);
            let tau = l.tau_const
                + l.tau_x
                    .iter()
                    .zip(covariates.iter())
                    .map(|(c, x)| c * x)
                    .sum::<f64>()
                + l.tau_a * a;
            let treated = rng.random::<f64>() < l.p;
            let measurements: Vec<f64> = (0..l.n_measurements)
                .map(|_| a + l.sigma_u * std_normal.sample(&mut rng))
                .collect();
            SyntheticDraw {
                covariates,
                latent: a,
                y0,
                y1: y0 + tau,
                treated,
                measurements,
                proxy: None,
            }
        }
    }
}

impl SyntheticDraw {
    fn into_observation(self, propensity: f64) -> Observation {
        let outcome = if self.treated { self.y1 } else { self.y0 };
        Observation {
            outcome,
            treated: self.treated,
            propensity,
            covariates: self.covariates,
            latent: Some(self.latent),
            measurements: self.measurements,
            proxy: self.proxy,
        }
    }
}

/// Generate `n` observations from `spec`, with latent values populated.
///
/// The outcome bound stored on the dataset is exact for the proof families
/// (2*sigma0 and m respectively) and the tightest sample cover for
/// `latent_normal`, whose Gaussian outcomes have unbounded support.
pub fn generate(spec: &DgpSpec, n: usize) -> Result<Dataset> {
    spec.validate()?;
    let p = spec.propensity();
    let draws = par::map_collect(n, |i| draw_unit(spec, i as u64));
    let outcome_bound_m = match &spec.family {
        DgpFamily::CbLower(c) => 2.0 * c.sigma0,
        DgpFamily::HaLower(h) => h.m,
        DgpFamily::LatentNormal(_) => {
            2.0 * draws
                .iter()
                .map(|d| if d.treated { d.y1.abs() } else { d.y0.abs() })
                .fold(0.0f64, f64::max)
        }
    };
    let observations = draws.into_iter().map(|d| d.into_observation(p)).collect();
    Ok(Dataset {
        observations,
        // Tightest valid overlap constant; capped below 1/2, which the
        // strict-overlap assumption excludes even when p = 1/2.
        overlap_k: p.min(1.0 - p).min(0.5 * (1.0 - 1e-9)),
        outcome_bound_m,
    })
}

/// How measurements are chosen when building a proxy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// The first `t` measurements in stored order.
    FirstT,
    /// `t` measurements chosen by a seeded per-unit shuffle. For a fixed
    /// seed the selected sets are nested in `t` (prefixes of one
    /// permutation), which keeps measurement sweeps comparable across `t`.
    RandomT,
}

/// Proxy construction plan: average `t` measurements per unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProxyPlan {
    pub t: usize,
    pub selection: Selection,
    pub selection_seed: u64,
}

impl ProxyPlan {
    pub fn first(t: usize) -> Self {
        Self {
            t,
            selection: Selection::FirstT,
            selection_seed: 0,
        }
    }

    pub fn random(t: usize, selection_seed: u64) -> Self {
        Self {
            t,
            selection: Selection::RandomT,
            selection_seed,
        }
    }
}

fn selected_mean(o: &Observation, row: usize, plan: &ProxyPlan, t_use: usize) -> f64 {
    let k = o.measurements.len();
    debug_assert!(t_use >= 1 && t_use <= k);
    match plan.selection {
        Selection::FirstT => o.measurements[..t_use].iter().sum::<f64>() / t_use as f64,
        Selection::RandomT => {
            let mut idx: Vec<usize> = (0..k).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(plan.selection_seed);
            rng.set_stream(row as u64);
            // Fisher-Yates; taking a prefix of the full permutation keeps
            // selections nested across t for a fixed seed.
            for i in (1..k).rev() {
                let j = rng.random_range(0..=i);
                idx.swap(i, j);
            }
            idx[..t_use].iter().map(|&i| o.measurements[i]).sum::<f64>() / t_use as f64
        }
    }
}

/// Set `proxy` to the mean of `t` selected measurements on every observation.
///
/// Errors if `t` is zero (a no-proxy design must omit the proxy, not zero it)
/// or if any observation has fewer than `t` measurements. See
/// [`build_proxy_ragged`] for the permissive variant used by design sweeps.
pub fn build_proxy(d: &Dataset, plan: &ProxyPlan) -> Result<Dataset> {
    if plan.t == 0 {
        return Err(Error::InvalidParameter(
            "t = 0 declares a proxy-free design; omit the proxy instead of zeroing it".into(),
        ));
    }
    for (row, o) in d.observations.iter().enumerate() {
        if o.measurements.len() < plan.t {
            return Err(Error::NotEnoughMeasurements {
                row,
                available: o.measurements.len(),
                requested: plan.t,
            });
        }
    }
    let mut out = d.clone();
    for (row, o) in out.observations.iter_mut().enumerate() {
        o.proxy = Some(selected_mean(o, row, plan, plan.t));
    }
    Ok(out)
}

/// Like [`build_proxy`], but units with fewer than `t` measurements use all
/// they have. Returns the dataset and the number of units that fell short.
pub fn build_proxy_ragged(d: &Dataset, plan: &ProxyPlan) -> Result<(Dataset, usize)> {
    if plan.t == 0 {
        return Err(Error::InvalidParameter(
            "t = 0 declares a proxy-free design; omit the proxy instead of zeroing it".into(),
        ));
    }
    let mut out = d.clone();
    let mut flagged = 0usize;
    for (row, o) in out.observations.iter_mut().enumerate() {
        let available = o.measurements.len();
        if available == 0 {
            return Err(Error::NotEnoughMeasurements {
                row,
                available,
                requested: plan.t,
            });
        }
        let t_use = plan.t.min(available);
        if t_use < plan.t {
            flagged += 1;
        }
        o.proxy = Some(selected_mean(o, row, plan, t_use));
    }
    Ok((out, flagged))
}

/// A welfare value with its provenance: exact closed form or Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueWelfare {
    pub value: f64,
    /// Zero when the value is a closed form.
    pub std_error: f64,
    pub exact: bool,
}

impl TrueWelfare {
    fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            exact: true,
        }
    }
}

/// Population welfare of the first-best rule that observes the latent factor.
pub fn oracle_welfare(spec: &DgpSpec) -> Result<f64> {
    spec.validate()?;
    match &spec.family {
        // E[A 1{A > 0}] with A = ±sigma0 equiprobable.
        DgpFamily::CbLower(c) => Ok(c.sigma0 / 2.0),
        // The oracle always realizes +m/2.
        DgpFamily::HaLower(h) => Ok(h.m / 2.0),
        // E[tau^+] for tau ~ N(tau_const, s^2), plus E[Y(0)] = 0.
        DgpFamily::LatentNormal(l) => {
            let s2 = l.tau_x.iter().map(|c| c * c).sum::<f64>()
                + l.tau_a * l.tau_a * l.latent_sd * l.latent_sd;
            let mu = l.tau_const;
            if s2 == 0.0 {
                return Ok(mu.max(0.0));
            }
            let s = s2.sqrt();
            Ok(mu * normal_cdf(mu / s) + s * normal_pdf(mu / s))
        }
    }
}

/// P(lo < A < hi) for A ~ Unif[-w, w], with clamping.
fn uniform_prob(lo: f64, hi: f64, w: f64) -> f64 {
    let lo = lo.max(-w);
    let hi = hi.min(w);
    if hi <= lo {
        0.0
    } else {
        (hi - lo) / (2.0 * w)
    }
}

/// Closed-form welfare of a threshold rule under `ha_lower`.
///
/// Welfare is (m/2)(1 - 2 P(assignment != 1{A >= 0})); the misclassification
/// probability integrates the two-point noise against the uniform latent.
fn ha_lower_rule_welfare(h: &HaLowerParams, rule: &ThresholdRule) -> f64 {
    let w = 1.0 / h.kappa;
    // P(all covariate constraints hold); the single covariate is pure noise.
    let px: f64 = rule
        .covariate_thresholds
        .iter()
        .map(|t| {
            if *t == f64::NEG_INFINITY {
                1.0
            } else {
                1.0 - normal_cdf((t - h.mu_x) / h.sigma_x)
            }
        })
        .product();
    let mis = match rule.proxy_threshold {
        // Assignment independent of A: error probability is exactly 1/2
        // regardless of px, so welfare is 0 for every covariate-only rule.
        None => 0.5,
        Some(theta) => {
            // proxy > theta means A > theta - eps for eps = ±rho.
            let ba_given_neg = 0.5 * uniform_prob(theta + h.rho, 0.0, w)
                + 0.5 * uniform_prob(theta - h.rho, 0.0, w);
            let ba_given_pos = 0.5 * uniform_prob((theta + h.rho).max(0.0), w, w)
                + 0.5 * uniform_prob((theta - h.rho).max(0.0), w, w);
            px * ba_given_neg + 0.5 - px * ba_given_pos
        }
    };
    h.m / 2.0 * (1.0 - 2.0 * mis)
}

const MC_WELFARE_TAG: u64 = 0x7765_6c66; // "welf"

/// Monte Carlo welfare of a threshold rule over `mc_n` fresh draws.
///
/// For `latent_normal` an augmented rule needs a [`ProxyPlan`] to say how the
/// proxy is assembled from measurements; `ha_lower` carries its own proxy.
pub fn monte_carlo_rule_welfare(
    spec: &DgpSpec,
    rule: &ThresholdRule,
    plan: Option<&ProxyPlan>,
    mc_n: usize,
) -> Result<TrueWelfare> {
    spec.validate()?;
    if mc_n == 0 {
        return Err(Error::InvalidParameter("mc_n must be >= 1".into()));
    }
    let mc_spec = DgpSpec {
        family: spec.family.clone(),
        seed: derive_seed(spec.seed, MC_WELFARE_TAG),
    };
    let needs_plan =
        rule.is_augmented() && matches!(spec.family, DgpFamily::LatentNormal(_)) && plan.is_none();
    if needs_plan {
        return Err(Error::Precondition(
            "augmented rule on latent_normal requires a proxy plan".into(),
        ));
    }
    let contributions = par::map_collect(mc_n, |i| {
        let mut draw = draw_unit(&mc_spec, i as u64);
        if let Some(plan) = plan {
            if draw.proxy.is_none() && draw.measurements.len() >= plan.t && plan.t >= 1 {
                let o = Observation {
                    outcome: 0.0,
                    treated: false,
                    propensity: 0.5,
                    covariates: draw.covariates.clone(),
                    latent: Some(draw.latent),
                    measurements: draw.measurements.clone(),
                    proxy: None,
                };
                draw.proxy = Some(selected_mean(&o, i, plan, plan.t));
            }
        }
        let o = Observation {
            outcome: 0.0,
            treated: false,
            propensity: 0.5,
            covariates: draw.covariates.clone(),
            latent: Some(draw.latent),
            measurements: draw.measurements.clone(),
            proxy: draw.proxy,
        };
        match rule.assign(&o, i) {
            Ok(true) => Ok(draw.y1),
            Ok(false) => Ok(draw.y0),
            Err(e) => Err(e),
        }
    });
    let mut values = Vec::with_capacity(mc_n);
    for c in contributions {
        values.push(c?);
    }
    let (mean, sd) = mean_sd(&values);
    Ok(TrueWelfare {
        value: mean,
        std_error: sd / (mc_n as f64).sqrt(),
        exact: false,
    })
}

/// Monte Carlo welfare of the first-best rule 1{tau(x, a) >= 0}.
pub fn monte_carlo_oracle_welfare(spec: &DgpSpec, mc_n: usize) -> Result<TrueWelfare> {
    spec.validate()?;
    if mc_n == 0 {
        return Err(Error::InvalidParameter("mc_n must be >= 1".into()));
    }
    let mc_spec = DgpSpec {
        family: spec.family.clone(),
        seed: derive_seed(spec.seed, MC_WELFARE_TAG),
    };
    let values = par::map_collect(mc_n, |i| {
        let draw = draw_unit(&mc_spec, i as u64);
        if first_best_assigns(spec, &draw.covariates, draw.latent) {
            draw.y1
        } else {
            draw.y0
        }
    });
    let (mean, sd) = mean_sd(&values);
    Ok(TrueWelfare {
        value: mean,
        std_error: sd / (mc_n as f64).sqrt(),
        exact: false,
    })
}

/// First-best assignment evaluated on the latent value.
pub(crate) fn first_best_assigns(spec: &DgpSpec, covariates: &[f64], latent: f64) -> bool {
    match &spec.family {
        DgpFamily::CbLower(_) => latent > 0.0,
        DgpFamily::HaLower(_) => latent >= 0.0,
        DgpFamily::LatentNormal(l) => {
            let tau = l.tau_const
                + l.tau_x
                    .iter()
                    .zip(covariates.iter())
                    .map(|(c, x)| c * x)
                    .sum::<f64>()
                + l.tau_a * latent;
            tau >= 0.0
        }
    }
}

/// Population welfare of a threshold rule: closed form where the family
/// admits one, Monte Carlo over `mc_n` fresh draws otherwise.
pub fn true_welfare(
    spec: &DgpSpec,
    rule: &ThresholdRule,
    plan: Option<&ProxyPlan>,
    mc_n: usize,
) -> Result<TrueWelfare> {
    spec.validate()?;
    match &spec.family {
        DgpFamily::CbLower(_) => {
            if rule.is_augmented() {
                return Err(Error::Precondition(
                    "cb_lower produces no proxies; augmented rules are not applicable".into(),
                ));
            }
            // E[A·G(X)] = 0 for every covariate-only rule: A is mean zero
            // and independent of X.
            Ok(TrueWelfare::exact(0.0))
        }
        DgpFamily::HaLower(h) => Ok(TrueWelfare::exact(ha_lower_rule_welfare(h, rule))),
        DgpFamily::LatentNormal(_) => monte_carlo_rule_welfare(spec, rule, plan, mc_n),
    }
}

/// Conditional CATE dispersion sigma_bar, where the family admits a closed
/// form: `cb_lower` gives sigma0, `latent_normal` gives |tau_a|·latent_sd.
pub fn sigma_bar_analytic(spec: &DgpSpec) -> Result<f64> {
    spec.validate()?;
    match &spec.family {
        DgpFamily::CbLower(c) => Ok(c.sigma0),
        DgpFamily::LatentNormal(l) => Ok(l.tau_a.abs() * l.latent_sd),
        DgpFamily::HaLower(_) => Err(Error::UnsupportedFamily {
            family: spec.family.name().to_string(),
            what: "sigma_bar",
        }),
    }
}

/// Empirical root mean squared error of the proxy against the latent value.
pub fn empirical_proxy_rmse(d: &Dataset) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (row, o) in d.observations.iter().enumerate() {
        let proxy = o.proxy.ok_or(Error::MissingProxy { row })?;
        let latent = o
            .latent
            .ok_or_else(|| Error::Precondition(format!("observation {row} has no latent value")))?;
        let e = proxy - latent;
        sum += e * e;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Precondition("empty dataset".into()));
    }
    Ok((sum / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cb_spec(sigma0: f64, seed: u64) -> DgpSpec {
        DgpSpec {
            family: DgpFamily::CbLower(CbLowerParams {
                mu_x: 0.0,
                sigma_x: 1.0,
                sigma0,
                p: 0.5,
            }),
            seed,
        }
    }

    fn ha_spec(kappa: f64, rho: f64, m: f64, seed: u64) -> DgpSpec {
        DgpSpec {
            family: DgpFamily::HaLower(HaLowerParams {
                mu_x: 0.0,
                sigma_x: 1.0,
                kappa,
                rho,
                m,
                p: 0.5,
            }),
            seed,
        }
    }

    fn ln_spec(seed: u64) -> DgpSpec {
        DgpSpec {
            family: DgpFamily::LatentNormal(LatentNormalParams {
                dim: 1,
                tau_const: 0.0,
                tau_x: vec![0.5],
                tau_a: 1.0,
                latent_sd: 1.0,
                sigma_u: 1.0,
                baseline_sd: 1.0,
                p: 1.0 / 3.0,
                n_measurements: 5,
            }),
            seed,
        }
    }

    #[test]
    fn cb_lower_two_point_latent_moments() {
        let d = generate(&cb_spec(1.0, 1), 1_000_000).unwrap();
        let latents: Vec<f64> = d.observations.iter().map(|o| o.latent.unwrap()).collect();
        let (mean, sd) = mean_sd(&latents);
        assert!(mean.abs() < 3e-3, "latent mean {mean}");
        assert!((sd - 1.0).abs() < 3e-3, "latent sd {sd}");
    }

    #[test]
    fn ha_lower_ambiguity_zone_mass() {
        // P(|A_hat| < rho) = kappa * rho.
        let d = generate(&ha_spec(1.0, 0.25, 2.0, 5), 1_000_000).unwrap();
        let inside = d
            .observations
            .iter()
            .filter(|o| o.proxy.unwrap().abs() < 0.25)
            .count();
        let share = inside as f64 / d.len() as f64;
        assert!((share - 0.25).abs() < 0.005, "share {share}");
    }

    #[test]
    fn ha_lower_sign_recovery_outside_zone() {
        let d = generate(&ha_spec(1.0, 0.25, 2.0, 6), 100_000).unwrap();
        for o in &d.observations {
            let proxy = o.proxy.unwrap();
            if proxy.abs() >= 0.25 {
                assert_eq!(sign_pos(proxy), sign_pos(o.latent.unwrap()));
            }
        }
    }

    #[test]
    fn ha_lower_oracle_welfare_closed_form_and_mc() {
        let spec = ha_spec(1.0, 0.25, 2.0, 7);
        assert_eq!(oracle_welfare(&spec).unwrap(), 1.0);
        let mc = monte_carlo_oracle_welfare(&spec, 1_000_000).unwrap();
        assert!((mc.value - 1.0).abs() < 0.01, "mc oracle {}", mc.value);
    }

    #[test]
    fn ha_lower_bayes_rule_welfare_and_regret() {
        // kappa = 1, rho = 0.25, m = 2: the proxy-threshold-at-zero rule has
        // welfare 0.75, hence regret 0.25 against the oracle's 1.0.
        let spec = ha_spec(1.0, 0.25, 2.0, 8);
        let bayes = ThresholdRule::augmented(vec![f64::NEG_INFINITY], 0.0);
        let w = true_welfare(&spec, &bayes, None, 0).unwrap();
        assert!(w.exact);
        assert!((w.value - 0.75).abs() < 1e-12, "welfare {}", w.value);
    }

    #[test]
    fn cb_lower_any_covariate_rule_is_worthless() {
        let spec = cb_spec(1.0, 9);
        for rule in [
            ThresholdRule::treat_all(1),
            ThresholdRule::treat_nobody(1),
            ThresholdRule::covariate(vec![0.3]),
        ] {
            let w = true_welfare(&spec, &rule, None, 0).unwrap();
            assert!(w.exact);
            assert_eq!(w.value, 0.0);
        }
        assert_eq!(oracle_welfare(&spec).unwrap(), 0.5);
    }

    #[test]
    fn proxy_single_measurement_mean() {
        let mut d = generate(&ln_spec(3), 10).unwrap();
        d.observations[0].measurements = vec![0.2, 0.4, 0.6];
        let with_one = build_proxy(&d, &ProxyPlan::first(1)).unwrap();
        assert_eq!(
            with_one.observations[0].proxy.unwrap(),
            d.observations[0].measurements[0]
        );
        let with_three = build_proxy(&d, &ProxyPlan::first(3)).unwrap();
        assert!((with_three.observations[0].proxy.unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn proxy_t_zero_is_an_error() {
        let d = generate(&ln_spec(3), 4).unwrap();
        assert!(build_proxy(&d, &ProxyPlan::first(0)).is_err());
    }

    #[test]
    fn proxy_rmse_matches_sigma_u_over_sqrt_t() {
        let d = generate(&ln_spec(4), 100_000).unwrap();
        let with_proxy = build_proxy(&d, &ProxyPlan::first(4)).unwrap();
        let rmse = empirical_proxy_rmse(&with_proxy).unwrap();
        assert!((rmse - 0.5).abs() < 0.01, "rmse {rmse}");
    }

    #[test]
    fn random_selection_is_nested_in_t() {
        let d = generate(&ln_spec(5), 50).unwrap();
        let p2 = build_proxy(&d, &ProxyPlan::random(2, 99)).unwrap();
        let p3 = build_proxy(&d, &ProxyPlan::random(3, 99)).unwrap();
        // Nested prefixes: 3-measurement mean recoverable from the 2-mean
        // plus one extra measurement, so 3*m3 - 2*m2 must be a measurement.
        for (row, (a, b)) in p2
            .observations
            .iter()
            .zip(p3.observations.iter())
            .enumerate()
        {
            let extra = 3.0 * b.proxy.unwrap() - 2.0 * a.proxy.unwrap();
            let found = d.observations[row]
                .measurements
                .iter()
                .any(|m| (m - extra).abs() < 1e-9);
            assert!(found, "row {row}: {extra} not among measurements");
        }
    }

    #[test]
    fn generation_is_deterministic_and_schedule_invariant() {
        let spec = ln_spec(21);
        let a = generate(&spec, 5_000).unwrap();
        let b = generate(&spec, 5_000).unwrap();
        assert_eq!(a, b);
        // Sequential path must agree with whatever the default path produced.
        let seq: Vec<Observation> = par::map_collect_seq(5_000, |i| {
            draw_unit(&spec, i as u64).into_observation(spec.propensity())
        });
        assert_eq!(a.observations, seq);
    }

    #[test]
    fn noise_is_independent_of_latent() {
        let spec = ln_spec(31);
        let d = generate(&spec, 1_000_000).unwrap();
        let with_proxy = build_proxy(&d, &ProxyPlan::first(1)).unwrap();
        let pairs: Vec<(f64, f64)> = with_proxy
            .observations
            .iter()
            .map(|o| (o.latent.unwrap(), o.proxy.unwrap() - o.latent.unwrap()))
            .collect();
        let (ma, _) = mean_sd(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
        let (me, _) = mean_sd(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
        let mut cov = 0.0;
        let mut va = 0.0;
        let mut ve = 0.0;
        for (a, e) in &pairs {
            cov += (a - ma) * (e - me);
            va += (a - ma) * (a - ma);
            ve += (e - me) * (e - me);
        }
        let corr = cov / (va.sqrt() * ve.sqrt());
        assert!(corr.abs() < 0.01, "corr {corr}");
    }

    #[test]
    fn invalid_specs_name_the_constraint() {
        let mut spec = ha_spec(1.0, 0.6, 2.0, 1);
        assert!(matches!(spec.validate(), Err(Error::OutOfRegime { .. })));
        spec = ha_spec(1.0, 0.25, 2.0, 1);
        if let DgpFamily::HaLower(h) = &mut spec.family {
            h.p = 1.5;
        }
        assert!(spec.validate().is_err());
    }

    #[test]
    fn latent_normal_oracle_welfare_matches_mc() {
        let spec = ln_spec(12);
        let closed = oracle_welfare(&spec).unwrap();
        let mc = monte_carlo_oracle_welfare(&spec, 400_000).unwrap();
        assert!(
            (closed - mc.value).abs() < 4.0 * mc.std_error + 1e-3,
            "closed {closed} mc {}",
            mc.value
        );
    }

    #[test]
    fn sigma_bar_matches_numeric_conditional_variance() {
        // Independent route: estimate E_X[sqrt(V_A(tau | X))] by simulating
        // the latent factor at fixed covariate draws.
        let spec = ln_spec(91);
        let closed = sigma_bar_analytic(&spec).unwrap();
        let l = match &spec.family {
            DgpFamily::LatentNormal(l) => l.clone(),
            _ => unreachable!(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(314);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut sd_sum = 0.0;
        let x_draws = 200;
        for _ in 0..x_draws {
            let x: Vec<f64> = (0..l.dim).map(|_| normal.sample(&mut rng)).collect();
            let base: f64 = l.tau_const
                + l.tau_x
                    .iter()
                    .zip(x.iter())
                    .map(|(c, v)| c * v)
                    .sum::<f64>();
            let taus: Vec<f64> = (0..4_000)
                .map(|_| base + l.tau_a * l.latent_sd * normal.sample(&mut rng))
                .collect();
            let (_, sd) = mean_sd(&taus);
            sd_sum += sd;
        }
        let numeric = sd_sum / x_draws as f64;
        assert!(
            (numeric - closed).abs() / closed < 0.02,
            "numeric {numeric} vs closed {closed}"
        );
    }

    #[test]
    fn sigma_bar_closed_forms() {
        assert_eq!(sigma_bar_analytic(&cb_spec(1.0, 1)).unwrap(), 1.0);
        let mut spec = ln_spec(1);
        if let DgpFamily::LatentNormal(l) = &mut spec.family {
            l.tau_a = 2.0;
            l.latent_sd = 0.5;
        }
        assert_eq!(sigma_bar_analytic(&spec).unwrap(), 1.0);
        if let DgpFamily::LatentNormal(l) = &mut spec.family {
            l.tau_a = 0.0;
        }
        assert_eq!(sigma_bar_analytic(&spec).unwrap(), 0.0);
        assert!(sigma_bar_analytic(&ha_spec(1.0, 0.2, 2.0, 1)).is_err());
    }
}
