//! Command handlers. Each reads its inputs first, computes, then writes all
//! outputs atomically, so a failing run leaves no partial artifacts.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use policylab_core::bounds::{
    cb_lower_bound, cb_upper_bound, compare_classes, ha_lower_bound, ha_upper_bound,
    interior_foc_gap, optimal_design, BoundInputs, DesignProblem, DesignRegime,
};
use policylab_core::data::{Dataset, PolicyClassSpec, PolicyKind};
use policylab_core::dgp::{self, DgpSpec, ProxyPlan};
use policylab_core::harness::{
    regret_rate_experiment, run_algorithm1, run_algorithm2, ClassSpecSource, DesignEvalConfig,
    SplitPlan,
};
use policylab_core::io::{frontier_to_csv, read_dataset_csv, write_dataset_csv_file};
use policylab_core::policy::ewm_search;

use crate::args::{
    parse_budgets, parse_t_grid, BoundsArgs, ClassArg, Command, DesignArgs, EvalArgs, EwmArgs,
    ExportArgs, GenArgs, PlanArgs, ProxyArgs, RateArgs, SelectionArg,
};
use crate::plotdata;
use crate::{write_atomic, CliError};

pub fn dispatch(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Gen(a) => gen(a, cmd),
        Command::Ewm(a) => ewm(a, cmd),
        Command::Eval(a) => eval(a, cmd),
        Command::Design(a) => design(a, cmd),
        Command::Plan(a) => plan(a, cmd),
        Command::Bounds(a) => bounds(a, cmd),
        Command::Rate(a) => rate(a, cmd),
        Command::Export(a) => export(a),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
}

/// Report envelope: every output embeds the resolved configuration.
fn envelope(config: &Command, result: serde_json::Value) -> String {
    let doc = json!({ "config": config, "result": result });
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');
    text
}

fn load_dataset(path: &Path, proxy: &ProxyArgs) -> Result<Dataset, CliError> {
    let d = read_dataset_csv(path)?;
    match proxy.proxy_t {
        None => Ok(d),
        Some(t) => {
            let plan = match proxy.proxy_selection {
                SelectionArg::First => ProxyPlan::first(t),
                SelectionArg::Random => ProxyPlan::random(t, proxy.proxy_seed),
            };
            Ok(dgp::build_proxy(&d, &plan)?)
        }
    }
}

fn build_class(d: &Dataset, kind: ClassArg, quantiles: usize) -> Result<PolicyClassSpec, CliError> {
    let kind: PolicyKind = kind.into();
    if kind == PolicyKind::Random {
        return Ok(PolicyClassSpec {
            kind,
            covariate_grids: vec![],
            proxy_grid: vec![],
            vc_dimension: 1,
        });
    }
    Ok(PolicyClassSpec::from_quantiles(d, kind, quantiles)?)
}

fn gen(a: &GenArgs, _cmd: &Command) -> Result<(), CliError> {
    let spec: DgpSpec = read_json(&a.spec)?;
    let d = dgp::generate(&spec, a.n)?;
    write_dataset_csv_file(&d, &a.out)?;
    Ok(())
}

fn ewm(a: &EwmArgs, cmd: &Command) -> Result<(), CliError> {
    if matches!(a.class, ClassArg::Random) {
        return Err(CliError::invalid(
            "the random benchmark has no rules to fit; choose cb or augmented",
        ));
    }
    let d = load_dataset(&a.data, &a.proxy)?;
    let class = build_class(&d, a.class, a.grid_quantiles)?;
    let best = ewm_search(&d, &class)?;
    let report = envelope(
        cmd,
        json!({
            "rule": best.rule,
            "welfare": best.value,
            "n_used": best.n_used,
            "class": class,
        }),
    );
    write_atomic(&a.out, &report)
}

fn eval(a: &EvalArgs, cmd: &Command) -> Result<(), CliError> {
    if a.classes.is_empty() {
        return Err(CliError::invalid("at least one class is required"));
    }
    let d = load_dataset(&a.data, &a.proxy)?;
    let classes: Vec<PolicyClassSpec> = a
        .classes
        .iter()
        .map(|c| build_class(&d, *c, a.grid_quantiles))
        .collect::<Result<_, _>>()?;
    let plan = SplitPlan {
        est_fraction: a.est_frac,
        replications_b: a.replications,
        base_seed: a.seed,
    };
    let report = run_algorithm1(&d, &plan, &classes)?;
    if let Some(plot) = &a.plot_out {
        write_atomic(plot, &plotdata::replication_cdf_csv(&report))?;
    }
    let doc = envelope(cmd, serde_json::to_value(&report)?);
    write_atomic(&a.out, &doc)
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn design(a: &DesignArgs, cmd: &Command) -> Result<(), CliError> {
    let d = read_dataset_csv(&a.data)?;
    let cfg = DesignEvalConfig {
        budgets: parse_budgets(&a.budgets).map_err(CliError::invalid)?,
        t_grid: parse_t_grid(&a.t_grid).map_err(CliError::invalid)?,
        cost_cn: a.cn,
        cost_ct: a.ct,
        proxy_draws_r: a.proxy_draws,
        grid_quantiles: a.grid_quantiles,
    };
    let plan = SplitPlan {
        est_fraction: a.est_frac,
        replications_b: a.replications,
        base_seed: a.seed,
    };
    let frontier = run_algorithm2(&d, &cfg, &plan)?;
    write_atomic(&a.out, &frontier_to_csv(&frontier))?;
    let meta = envelope(cmd, serde_json::to_value(&frontier)?);
    write_atomic(&sidecar_path(&a.out), &meta)?;
    if let Some(plot) = &a.plot_out {
        write_atomic(plot, &plotdata::frontier_plot_csv(&frontier))?;
    }
    Ok(())
}

fn plan(a: &PlanArgs, cmd: &Command) -> Result<(), CliError> {
    let problem: DesignProblem = read_json(&a.problem)?;
    let design = optimal_design(&problem)?;
    let foc_gap = match design.regime {
        DesignRegime::InteriorAugmented => Some(interior_foc_gap(&problem)?),
        DesignRegime::CornerCb => None,
    };
    let doc = envelope(
        cmd,
        json!({ "problem": problem, "design": design, "interior_foc_gap": foc_gap }),
    );
    print!("{doc}");
    if let Some(out) = &a.out {
        write_atomic(out, &doc)?;
    }
    Ok(())
}

/// Input schema of `policylab bounds`.
#[derive(Debug, Serialize, Deserialize)]
pub struct BoundsRequest {
    pub cb: BoundInputs,
    pub ha: BoundInputs,
    pub sigma0: f64,
    pub rho: f64,
}

fn bounds(a: &BoundsArgs, cmd: &Command) -> Result<(), CliError> {
    let req: BoundsRequest = read_json(&a.inputs)?;
    let doc = envelope(
        cmd,
        json!({
            "cb_upper": cb_upper_bound(&req.cb)?,
            "cb_lower": cb_lower_bound(&req.cb, req.sigma0)?,
            "ha_upper": ha_upper_bound(&req.ha)?,
            "ha_lower": ha_lower_bound(&req.ha, req.rho)?,
            "preference": compare_classes(&req.cb, &req.ha)?,
            "constants": { "cb": req.cb.constants, "ha": req.ha.constants },
            "inputs": req,
        }),
    );
    print!("{doc}");
    if let Some(out) = &a.out {
        write_atomic(out, &doc)?;
    }
    Ok(())
}

fn rate(a: &RateArgs, cmd: &Command) -> Result<(), CliError> {
    if matches!(a.class, ClassArg::Random) {
        return Err(CliError::invalid(
            "rate experiments fit rules; choose cb or augmented",
        ));
    }
    let spec: DgpSpec = read_json(&a.spec)?;
    let source = ClassSpecSource::Quantile {
        kind: a.class.into(),
        quantiles: a.grid_quantiles,
    };
    let report = regret_rate_experiment(&spec, &source, &a.n_grid, a.reps, a.mc_n)?;
    let doc = envelope(cmd, serde_json::to_value(&report)?);
    write_atomic(&a.out, &doc)
}

fn export(a: &ExportArgs) -> Result<(), CliError> {
    let value: serde_json::Value = read_json(&a.report)?;
    let result = value.get("result").unwrap_or(&value);
    let csv = if result.get("welfare").is_some() && result.get("harm_rate").is_some() {
        let report: policylab_core::ReplicationReport = serde_json::from_value(result.clone())?;
        plotdata::replication_cdf_csv(&report)
    } else if result.get("cells").is_some() {
        let frontier: policylab_core::DesignFrontier = serde_json::from_value(result.clone())?;
        plotdata::frontier_plot_csv(&frontier)
    } else {
        return Err(CliError::parse(
            "input is neither an eval report nor a design frontier",
        ));
    };
    write_atomic(&a.out, &csv)
}
