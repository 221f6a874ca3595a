//! Shared test utilities: an independent brute-force welfare maximizer and a
//! random-instance generator.
//!
//! The brute force here deliberately avoids the library's search internals:
//! it walks the grid with nested index arithmetic, evaluates each rule by
//! applying the raw IPW formula with indicator arithmetic, and tracks the
//! best rule with a strict improvement scan.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use policylab_core::data::{Dataset, Observation, PolicyClassSpec, PolicyKind, ThresholdRule};

/// Plain enumeration maximizer: returns the best rule and its welfare.
pub fn brute_force_ewm(d: &Dataset, class: &PolicyClassSpec) -> (ThresholdRule, f64) {
    let mut grids: Vec<&[f64]> = class.covariate_grids.iter().map(|g| g.as_slice()).collect();
    if class.kind == PolicyKind::Augmented {
        grids.push(class.proxy_grid.as_slice());
    }
    let axes = grids.len();
    let mut idx = vec![0usize; axes];
    let n = d.observations.len() as f64;

    let mut best_rule: Option<ThresholdRule> = None;
    let mut best_w = f64::NEG_INFINITY;
    loop {
        let cov: Vec<f64> = (0..class.covariate_grids.len())
            .map(|ax| grids[ax][idx[ax]])
            .collect();
        let proxy = (class.kind == PolicyKind::Augmented).then(|| grids[axes - 1][idx[axes - 1]]);
        let rule = ThresholdRule {
            covariate_thresholds: cov,
            proxy_threshold: proxy,
        };
        let mut acc = 0.0;
        for o in &d.observations {
            let mut treat = rule
                .covariate_thresholds
                .iter()
                .zip(o.covariates.iter())
                .all(|(t, x)| x >= t);
            if let Some(pt) = rule.proxy_threshold {
                treat = treat && o.proxy.expect("instance has proxies") > pt;
            }
            let g = f64::from(u8::from(treat));
            let df = f64::from(u8::from(o.treated));
            acc += o.outcome * df / o.propensity * g
                + o.outcome * (1.0 - df) / (1.0 - o.propensity) * (1.0 - g);
        }
        let w = acc / n;
        if w > best_w {
            best_w = w;
            best_rule = Some(rule);
        }
        // Odometer increment, last axis fastest: visits rules in the same
        // lexicographic order the tie-break is defined over.
        let mut ax = axes;
        loop {
            if ax == 0 {
                return (best_rule.expect("nonempty grid"), best_w);
            }
            ax -= 1;
            idx[ax] += 1;
            if idx[ax] < grids[ax].len() {
                break;
            }
            idx[ax] = 0;
        }
    }
}

/// A random EWM instance: small dataset plus a compatible class.
pub fn random_instance(seed: u64) -> (Dataset, PolicyClassSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=30);
    let dim = rng.random_range(1..=3usize);
    let augmented = rng.random::<bool>();
    let cov_dims = if augmented { dim.min(2) } else { dim };

    let mut observations = Vec::with_capacity(n);
    for _ in 0..n {
        // Lattice outcomes so exact welfare ties actually occur.
        let outcome = f64::from(rng.random_range(-8..=8i32)) / 4.0;
        let treated = rng.random::<bool>();
        let propensity = [0.25, 1.0 / 3.0, 0.5, 0.6][rng.random_range(0..4usize)];
        let covariates: Vec<f64> = (0..cov_dims)
            .map(|_| f64::from(rng.random_range(-6..=6i32)) / 2.0)
            .collect();
        let proxy = augmented.then(|| f64::from(rng.random_range(-6..=6i32)) / 3.0);
        observations.push(Observation {
            outcome,
            treated,
            propensity,
            covariates,
            latent: None,
            measurements: vec![],
            proxy,
        });
    }
    let d = Dataset {
        observations,
        overlap_k: 0.2,
        outcome_bound_m: 100.0,
    };

    let mut grid_for = |max_len: usize| {
        let len = rng.random_range(1..=max_len);
        let mut g: Vec<f64> = (0..len)
            .map(|_| f64::from(rng.random_range(-6..=6i32)) / 2.0)
            .collect();
        if rng.random::<bool>() {
            g[0] = f64::NEG_INFINITY;
        }
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    };
    let covariate_grids: Vec<Vec<f64>> = (0..cov_dims).map(|_| grid_for(6)).collect();
    let proxy_grid = if augmented { grid_for(6) } else { Vec::new() };
    let class = PolicyClassSpec {
        kind: if augmented {
            PolicyKind::Augmented
        } else {
            PolicyKind::CovariateBased
        },
        covariate_grids,
        proxy_grid,
        vc_dimension: cov_dims + 1,
    };
    (d, class)
}
