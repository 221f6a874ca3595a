//! Argument definitions. The structs double as the serializable `config`
//! block embedded in every report.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use policylab_core::PolicyKind;

#[derive(Debug, Parser)]
#[command(
    name = "policylab",
    about = "Policy learning with noisy proxies: welfare evaluation, regret bounds, and data-collection design",
    version
)]
pub struct Cli {
    /// Worker threads (0 = one per core); env fallback POLICYLAB_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case", tag = "command")]
pub enum Command {
    /// Generate a synthetic dataset from a JSON generator spec.
    Gen(GenArgs),
    /// Fit one rule by exhaustive empirical welfare maximization.
    Ewm(EwmArgs),
    /// Welfare evaluation over repeated sample splits.
    Eval(EvalArgs),
    /// Design evaluation under a budget constraint.
    Design(DesignArgs),
    /// Closed-form minimax design optimizer.
    Plan(PlanArgs),
    /// Regret-bound calculators and the class comparison.
    Bounds(BoundsArgs),
    /// Regret-rate experiment against the generator oracle.
    Rate(RateArgs),
    /// Convert a report to long-format plot data.
    Export(ExportArgs),
}

#[derive(Debug, clap::Args, Serialize)]
pub struct GenArgs {
    /// Generator spec (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Number of observations.
    #[arg(long)]
    pub n: usize,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassArg {
    Random,
    Cb,
    Augmented,
}

impl From<ClassArg> for PolicyKind {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::Random => PolicyKind::Random,
            ClassArg::Cb => PolicyKind::CovariateBased,
            ClassArg::Augmented => PolicyKind::Augmented,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionArg {
    First,
    Random,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct ProxyArgs {
    /// Build proxies as the mean of t measurements before fitting.
    #[arg(long)]
    pub proxy_t: Option<usize>,
    /// Measurement selection when building proxies.
    #[arg(long, value_enum, default_value = "first")]
    pub proxy_selection: SelectionArg,
    /// Selection seed for random measurement choice.
    #[arg(long, default_value_t = 0)]
    pub proxy_seed: u64,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct EwmArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Policy class to search.
    #[arg(long, value_enum)]
    pub class: ClassArg,
    /// Quantile cutoffs per active dimension (plus the -inf sentinel).
    #[arg(long, default_value_t = 10)]
    pub grid_quantiles: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub proxy: ProxyArgs,
    /// Output JSON path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Replications (sample splits).
    #[arg(long = "B", default_value_t = 2000)]
    pub replications: usize,
    /// Estimation share of each split.
    #[arg(long = "est-frac", default_value_t = 0.6)]
    pub est_frac: f64,
    /// Comma-separated rule kinds, e.g. random,cb,augmented.
    #[arg(long, value_delimiter = ',', value_enum)]
    pub classes: Vec<ClassArg>,
    #[arg(long, default_value_t = 10)]
    pub grid_quantiles: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub proxy: ProxyArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write long-format plot data (welfare CDFs) here.
    #[arg(long)]
    pub plot_out: Option<PathBuf>,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct DesignArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Budgets: start:end:step (inclusive) or a comma list.
    #[arg(long)]
    pub budgets: String,
    /// Measurement counts: lo..hi (inclusive) or a comma list.
    #[arg(long = "t")]
    pub t_grid: String,
    /// Cost per policy-learning observation.
    #[arg(long)]
    pub cn: f64,
    /// Cost per measurement per unit.
    #[arg(long)]
    pub ct: f64,
    /// Outer sample-split replications.
    #[arg(long = "B", default_value_t = 200)]
    pub replications: usize,
    /// Proxy redraws per (split, t).
    #[arg(long = "R", default_value_t = 30)]
    pub proxy_draws: usize,
    #[arg(long = "est-frac", default_value_t = 0.6)]
    pub est_frac: f64,
    #[arg(long, default_value_t = 10)]
    pub grid_quantiles: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Frontier CSV path; a .meta.json sidecar carries the full report.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub plot_out: Option<PathBuf>,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct PlanArgs {
    /// Design problem (JSON).
    #[arg(long)]
    pub problem: PathBuf,
    /// Optional output path; the plan always prints to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct BoundsArgs {
    /// Bound inputs (JSON): cb and ha input blocks plus sigma0 and rho.
    #[arg(long)]
    pub inputs: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct RateArgs {
    /// Generator spec (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, value_enum)]
    pub class: ClassArg,
    /// Comma-separated sample sizes.
    #[arg(long = "n-grid", value_delimiter = ',')]
    pub n_grid: Vec<usize>,
    #[arg(long)]
    pub reps: usize,
    #[arg(long, default_value_t = 9)]
    pub grid_quantiles: usize,
    /// Monte Carlo draws for welfare when no closed form exists.
    #[arg(long, default_value_t = 200_000)]
    pub mc_n: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct ExportArgs {
    /// An eval report JSON or a design .meta.json sidecar.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse "600:2000:200" (inclusive range) or "600,800,1000".
pub fn parse_budgets(s: &str) -> Result<Vec<f64>, String> {
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected start:end:step, got {s:?}"));
        }
        let start: f64 = parts[0]
            .parse()
            .map_err(|_| format!("bad start {:?}", parts[0]))?;
        let end: f64 = parts[1]
            .parse()
            .map_err(|_| format!("bad end {:?}", parts[1]))?;
        let step: f64 = parts[2]
            .parse()
            .map_err(|_| format!("bad step {:?}", parts[2]))?;
        if step <= 0.0 || end < start {
            return Err(format!("degenerate range {s:?}"));
        }
        let mut out = Vec::new();
        let mut b = start;
        while b <= end + 1e-9 {
            out.push(b);
            b += step;
        }
        Ok(out)
    } else {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad budget {p:?}"))
            })
            .collect()
    }
}

/// Parse "0..5" (inclusive) or "0,2,4".
pub fn parse_t_grid(s: &str) -> Result<Vec<usize>, String> {
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo
            .parse()
            .map_err(|_| format!("bad t lower bound {lo:?}"))?;
        let hi: usize = hi
            .trim_start_matches('=')
            .parse()
            .map_err(|_| format!("bad t upper bound {hi:?}"))?;
        if hi < lo {
            return Err(format!("degenerate t range {s:?}"));
        }
        Ok((lo..=hi).collect())
    } else {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("bad t {p:?}"))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_range_is_inclusive() {
        assert_eq!(
            parse_budgets("600:1000:200").unwrap(),
            vec![600.0, 800.0, 1000.0]
        );
        assert_eq!(parse_budgets("50,75").unwrap(), vec![50.0, 75.0]);
        assert!(parse_budgets("10:5:1").is_err());
    }

    #[test]
    fn t_grid_forms() {
        assert_eq!(parse_t_grid("0..5").unwrap(), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(parse_t_grid("0,2,4").unwrap(), vec![0, 2, 4]);
        assert!(parse_t_grid("5..2").is_err());
    }
}
