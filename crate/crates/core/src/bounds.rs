//! Closed-form regret-bound calculators and the minimax design optimizer.
//!
//! The four bounds share the statistical term `C * (M/k) * sqrt(v/n)` and
//! differ in the approximation term: the residual CATE dispersion sigma_bar
//! for covariate-based rules, the noise propagation `M * kappa * L_s * rMSE`
//! for augmented rules, and their lower-bound counterparts `C3 * sigma0` and
//! `C5 * M * kappa * rho`. The universal constants have no numeric values in
//! the source theory; they are explicit inputs with proof-default values
//! (C1 = C2 = C4 = 1, C3 = C5 = 1/4), and every report echoes the constants
//! it used because regime decisions depend on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use crate::dgp::sigma_bar_analytic;

/// The universal constants appearing in the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

impl Default for BoundConstants {
    /// Proof defaults: the lower-bound proofs pin C3 = C5 = 1/4 and leave
    /// the statistical constants free; unit scale is used for those.
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 1.0,
            c3: 0.25,
            c4: 1.0,
            c5: 0.25,
        }
    }
}

impl BoundConstants {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("C1", self.c1),
            ("C2", self.c2),
            ("C3", self.c3),
            ("C4", self.c4),
            ("C5", self.c5),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "constant {name} = {v} must be strictly positive"
                )));
            }
        }
        Ok(())
    }
}

/// Primitives feeding the bound calculators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Outcome bound M.
    pub m: f64,
    /// Overlap constant k in (0, 1/2).
    pub k: f64,
    /// Policy-learning sample size.
    pub n: usize,
    /// VC dimension of the policy class.
    pub v: usize,
    /// Margin constant.
    pub kappa: f64,
    /// Lipschitz constant of the score in the latent argument.
    pub lipschitz_ls: f64,
    /// Proxy root mean squared error (conditional on the auxiliary sample
    /// when the proxy is learned externally).
    pub rmse: f64,
    /// Residual CATE dispersion sigma_bar.
    pub sigma_bar: f64,
    /// Misspecification gap Delta; zero under the flexibility assumption.
    #[serde(default)]
    pub delta_misspec: f64,
    #[serde(default)]
    pub constants: BoundConstants,
}

impl BoundInputs {
    fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        if !self.m.is_finite() || self.m <= 0.0 {
            return Err(Error::InvalidParameter("M must be > 0".into()));
        }
        // k = 1/2 (the least restrictive overlap, e = 1/2 everywhere) is
        // accepted here: M/k stays well-defined and reference calculations
        // use it.
        if !(self.k > 0.0 && self.k <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "k = {} must lie in (0, 1/2]",
                self.k
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("sample size n must be >= 1".into()));
        }
        if self.v == 0 {
            return Err(Error::InvalidParameter("VC dimension must be >= 1".into()));
        }
        for (name, v) in [("kappa", self.kappa), ("lipschitz_ls", self.lipschitz_ls)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be > 0")));
            }
        }
        for (name, v) in [
            ("rmse", self.rmse),
            ("sigma_bar", self.sigma_bar),
            ("delta_misspec", self.delta_misspec),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0")));
            }
        }
        Ok(())
    }

    fn statistical_term(&self, c: f64) -> f64 {
        c * (self.m / self.k) * (self.v as f64 / self.n as f64).sqrt()
    }
}

/// Upper bound on the regret of covariate-based rules:
/// `C1 (M/k) sqrt(v/n) + sigma_bar + delta`.
pub fn cb_upper_bound(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    Ok(b.statistical_term(b.constants.c1) + b.sigma_bar + b.delta_misspec)
}

/// Minimax lower bound for covariate-based rules:
/// `C2 (M/k) sqrt(v/n) + C3 sigma0`.
pub fn cb_lower_bound(b: &BoundInputs, sigma0: f64) -> Result<f64> {
    b.validate()?;
    if sigma0 < 0.0 {
        return Err(Error::InvalidParameter("sigma0 must be >= 0".into()));
    }
    Ok(b.statistical_term(b.constants.c2) + b.constants.c3 * sigma0)
}

/// Upper bound on the regret of proxy-augmented rules:
/// `C1 (M/k) sqrt(v/n) + M kappa L_s rMSE`.
pub fn ha_upper_bound(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    Ok(b.statistical_term(b.constants.c1) + b.m * b.kappa * b.lipschitz_ls * b.rmse)
}

/// Minimax lower bound for proxy-augmented rules:
/// `C4 (M/k) sqrt(v/n) + C5 M kappa rho`, valid for `rho <= 1/(2 kappa)`.
pub fn ha_lower_bound(b: &BoundInputs, rho: f64) -> Result<f64> {
    b.validate()?;
    if rho < 0.0 {
        return Err(Error::InvalidParameter("rho must be >= 0".into()));
    }
    let limit = 1.0 / (2.0 * b.kappa);
    if rho > limit {
        return Err(Error::OutOfRegime { rho, limit });
    }
    Ok(b.statistical_term(b.constants.c4) + b.constants.c5 * b.m * b.kappa * rho)
}

/// Which class the minimax comparison favors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassPreference {
    PreferAugmented,
    PreferCb,
}

/// Minimax comparison between the covariate-based and augmented classes.
///
/// Augmented rules are preferred iff
/// `sigma_bar >= C1 (M/k) (sqrt(v_xa) - sqrt(v_x)) / sqrt(n) + M kappa L_s rMSE`,
/// where sigma_bar comes from the CB inputs, the VC dimensions from each
/// side, and the noise primitives from the augmented inputs. The shared
/// primitives (M, k, n, C1) must agree between the two records.
pub fn compare_classes(b_cb: &BoundInputs, b_ha: &BoundInputs) -> Result<ClassPreference> {
    b_cb.validate()?;
    b_ha.validate()?;
    if b_cb.m != b_ha.m || b_cb.k != b_ha.k || b_cb.n != b_ha.n {
        return Err(Error::InconsistentInputs(
            "M, k, and n must agree between the CB and augmented inputs".into(),
        ));
    }
    if b_cb.constants.c1 != b_ha.constants.c1 {
        return Err(Error::InconsistentInputs(
            "C1 must agree between the CB and augmented inputs".into(),
        ));
    }
    let complexity =
        b_ha.constants.c1 * (b_ha.m / b_ha.k) * ((b_ha.v as f64).sqrt() - (b_cb.v as f64).sqrt())
            / (b_ha.n as f64).sqrt();
    let noise = b_ha.m * b_ha.kappa * b_ha.lipschitz_ls * b_ha.rmse;
    if b_cb.sigma_bar >= complexity + noise {
        Ok(ClassPreference::PreferAugmented)
    } else {
        Ok(ClassPreference::PreferCb)
    }
}

/// A budget-allocation problem between proxy precision and sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignProblem {
    pub budget_b0: f64,
    /// Cost per policy-learning observation.
    pub cost_cn: f64,
    /// Cost per unit of proxy information.
    pub cost_ct: f64,
    /// rMSE scale: h(t) = m0 / sqrt(t).
    pub m0: f64,
    /// Prior bound on the residual CATE dispersion.
    pub sigma0: f64,
    pub v_x: usize,
    pub v_xa: usize,
    /// A0 = C1 M / k.
    pub a0: f64,
    /// C0 = M kappa L_s.
    pub c0: f64,
}

impl DesignProblem {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("budget_b0", self.budget_b0),
            ("cost_cn", self.cost_cn),
            ("cost_ct", self.cost_ct),
            ("m0", self.m0),
            ("a0", self.a0),
            ("c0", self.c0),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be > 0")));
            }
        }
        if self.sigma0 < 0.0 {
            return Err(Error::InvalidParameter("sigma0 must be >= 0".into()));
        }
        if self.v_x == 0 || self.v_xa == 0 {
            return Err(Error::InvalidParameter("VC dimensions must be >= 1".into()));
        }
        Ok(())
    }
}

/// Which design the minimized upper bounds select.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignRegime {
    /// Spend the whole budget on sample size; ignore the proxy.
    CornerCb,
    /// Split the budget between proxy information and sample size.
    InteriorAugmented,
}

/// Output of [`optimal_design`]. `n_star` and `t_star` are reals; integer
/// rounding (floor, then re-check the budget) is the caller's job.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalDesign {
    pub regime: DesignRegime,
    pub n_star: f64,
    pub t_star: f64,
    /// Policy-to-proxy information ratio q = n*/t* at the interior optimum.
    pub q: f64,
    /// Minimized bound of the selected regime.
    pub bound_value: f64,
    /// Minimized bound of the covariate-only design.
    pub corner_value: f64,
    /// Minimized bound of the augmented design.
    pub interior_value: f64,
}

/// Minimax optimal budget split between proxy information and sample size.
///
/// The interior candidate comes from the first-order conditions of the
/// augmented bound under a binding budget:
///
/// ```text
/// q    = (A0 sqrt(v_xa) / (C0 m0) * ct/cn)^(2/3)
/// t*   = B0 / (ct + cn q),   n* = q t*
/// V_xa = A0 sqrt(v_xa (ct + cn q) / (B0 q)) + C0 m0 sqrt((ct + cn q) / B0)
/// ```
///
/// versus the corner candidate `n = B0/cn` with value
/// `V_x = A0 sqrt(cn v_x / B0) + sigma0`. The regime with the smaller
/// minimized value wins; ties go to the corner, the cheaper design.
pub fn optimal_design(p: &DesignProblem) -> Result<OptimalDesign> {
    p.validate()?;
    let q = (p.a0 * (p.v_xa as f64).sqrt() / (p.c0 * p.m0) * p.cost_ct / p.cost_cn).powf(2.0 / 3.0);
    let denom = p.cost_ct + p.cost_cn * q;
    let t_int = p.budget_b0 / denom;
    let n_int = q * t_int;
    let interior_value = p.a0 * (p.v_xa as f64 * denom / (p.budget_b0 * q)).sqrt()
        + p.c0 * p.m0 * (denom / p.budget_b0).sqrt();
    let corner_value = p.a0 * (p.cost_cn * p.v_x as f64 / p.budget_b0).sqrt() + p.sigma0;
    if corner_value <= interior_value {
        Ok(OptimalDesign {
            regime: DesignRegime::CornerCb,
            n_star: p.budget_b0 / p.cost_cn,
            t_star: 0.0,
            q,
            bound_value: corner_value,
            corner_value,
            interior_value,
        })
    } else {
        Ok(OptimalDesign {
            regime: DesignRegime::InteriorAugmented,
            n_star: n_int,
            t_star: t_int,
            q,
            bound_value: interior_value,
            corner_value,
            interior_value,
        })
    }
}

/// Relative disagreement of the two Lagrange-multiplier expressions at the
/// interior optimum; equals 0 when the first-order conditions hold exactly.
pub fn interior_foc_gap(p: &DesignProblem) -> Result<f64> {
    p.validate()?;
    let design = optimal_design(p)?;
    let (n, t) = match design.regime {
        DesignRegime::InteriorAugmented => (design.n_star, design.t_star),
        // The interior candidate exists even when the corner wins.
        DesignRegime::CornerCb => {
            let t = p.budget_b0 / (p.cost_ct + p.cost_cn * design.q);
            (design.q * t, t)
        }
    };
    let lambda_n = p.a0 * (p.v_xa as f64).sqrt() / (2.0 * p.cost_cn * n.powf(1.5));
    let lambda_t = p.c0 * p.m0 / (2.0 * p.cost_ct * t.powf(1.5));
    Ok((lambda_n - lambda_t).abs() / lambda_n.max(lambda_t))
}
