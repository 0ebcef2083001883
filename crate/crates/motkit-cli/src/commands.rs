//! Command implementations. Each returns the process exit code: 0 for a
//! mathematically clean run, 1 for a mathematical failure (order violated,
//! map validation failed, thresholds exceeded); usage and I/O problems
//! surface as errors and exit 2.

use crate::io;
use crate::manifest::RunManifest;
use crate::spec::MarginalSpec;
use anyhow::{bail, Context, Result};
use motkit::curtain::{build_left_monotone, extract_t_maps, validate_t_maps, CurtainError};
use motkit::lp::{check_spence_mirrlees, solve_with_certificate, verify_monotonicity_principle,
    CostSpec, LpStatus};
use motkit::measures::{is_convex_order, Measure};
use motkit::skorokhod::{
    build_barrier, check_uniform_integrability, compare_stopping_times, default_t_max, embed,
    sample_trajectories, PathConfig,
};
use serde_json::json;
use std::path::{Path, PathBuf};

/// Shared numerical flags.
#[derive(Debug, Clone, Copy)]
pub struct SimFlags {
    pub seed: u64,
    pub dt: f64,
    pub paths: usize,
    pub samples: usize,
    pub slices: usize,
    pub tol: f64,
}

/// Duality-gap budget for `solve` reports.
const GAP_TOL: f64 = 1e-8;

fn load_marginal(arg: &str, flags: &SimFlags) -> Result<(Measure, String)> {
    let (spec, text) = MarginalSpec::parse(arg)?;
    Ok((spec.to_measure(flags.slices)?, text))
}

pub fn cmd_check_order(mu_arg: &str, nu_arg: &str, flags: &SimFlags) -> Result<i32> {
    let (mu, _) = load_marginal(mu_arg, flags)?;
    let (nu, _) = load_marginal(nu_arg, flags)?;
    let mean_gap = nu.mean() - mu.mean();
    let worst_potential_gap = mu
        .atoms()
        .iter()
        .chain(nu.atoms())
        .map(|&x| mu.potential(x) - nu.potential(x))
        .fold(f64::NEG_INFINITY, f64::max);
    let ordered = is_convex_order(&mu, &nu, flags.tol);
    println!(
        "convex order: {}  (mean gap {mean_gap:.3e}, worst potential gap {worst_potential_gap:.3e}, tol {:.1e})",
        if ordered { "yes" } else { "no" },
        flags.tol
    );
    Ok(if ordered { 0 } else { 1 })
}

pub fn cmd_build(
    mu_arg: &str,
    nu_arg: &str,
    out_coupling: Option<&Path>,
    out_tmaps: Option<&Path>,
    flags: &SimFlags,
) -> Result<i32> {
    let (mu, mu_text) = load_marginal(mu_arg, flags)?;
    let (nu, nu_text) = load_marginal(nu_arg, flags)?;
    let manifest = RunManifest::new("build", flags.seed)
        .with_input("mu", &mu_text)
        .with_input("nu", &nu_text)
        .with_tolerance("convex_order", flags.tol);

    let pi = match build_left_monotone(&mu, &nu) {
        Ok(pi) => pi,
        Err(CurtainError::NotConvexOrdered) => {
            eprintln!("marginals are not in convex order; no martingale coupling exists");
            return Ok(1);
        }
        Err(e) => return Err(e.into()),
    };
    let maps = extract_t_maps(&pi)?;
    let violations = validate_t_maps(&maps);

    if let Some(path) = out_coupling {
        io::write_coupling_json(path, &pi, &manifest)?;
        println!("coupling: {} entries -> {}", pi.entries().len(), path.display());
    }
    if let Some(path) = out_tmaps {
        io::write_tmaps_csv(path, &maps, &manifest)?;
        println!("maps: {} grid points -> {}", maps.len(), path.display());
    }
    println!(
        "martingale defect {:.3e}, left-monotone violation: {}",
        pi.martingale_defect(),
        match pi.find_left_monotone_violation() {
            None => "none".to_string(),
            Some(v) => format!("{v:?}"),
        }
    );
    if violations.is_empty() {
        println!("map validation: clean");
        Ok(0)
    } else {
        for v in &violations {
            eprintln!("map validation: {v}");
        }
        Ok(1)
    }
}

fn parse_cost(name: &str, mu: &Measure, nu: &Measure) -> Result<CostSpec> {
    Ok(match name {
        "xy_squared" => CostSpec::XySquared,
        "exp_sum" => CostSpec::ExpSum,
        "neg_xy_squared" => CostSpec::NegXySquared,
        // Plain product: the classic non-strict case, tabulated over the grid.
        "xy" => {
            let values = mu
                .atoms()
                .iter()
                .map(|&x| nu.atoms().iter().map(|&y| x * y).collect())
                .collect();
            CostSpec::tabulated(mu.atoms().to_vec(), nu.atoms().to_vec(), values)?
        }
        other => bail!("unknown cost {other:?} (expected xy_squared, exp_sum, neg_xy_squared, xy)"),
    })
}

pub fn cmd_solve(
    mu_arg: &str,
    nu_arg: &str,
    cost_name: &str,
    out: Option<&Path>,
    flags: &SimFlags,
) -> Result<i32> {
    let (mu, mu_text) = load_marginal(mu_arg, flags)?;
    let (nu, nu_text) = load_marginal(nu_arg, flags)?;
    let cost = parse_cost(cost_name, &mu, &nu)?;
    let manifest = RunManifest::new(format!("solve --cost {cost_name}"), flags.seed)
        .with_input("mu", &mu_text)
        .with_input("nu", &nu_text)
        .with_tolerance("duality_gap", GAP_TOL)
        .with_tolerance("convex_order", flags.tol);

    let span = {
        let (lo, hi) = nu.hull();
        (hi - lo).max(1.0)
    };
    let spence_mirrlees = check_spence_mirrlees(&cost, mu.atoms(), nu.atoms(), 1e-5 * span);

    let solved = solve_with_certificate(&mu, &nu, &cost)?;
    let status = match solved.primal.status {
        LpStatus::Optimal => "optimal",
        LpStatus::Infeasible => "infeasible",
        LpStatus::Unbounded => "unbounded",
    };
    if solved.primal.status != LpStatus::Optimal {
        let report = json!({
            "manifest": manifest,
            "cost": cost_name,
            "status": status,
            "spence_mirrlees": spence_mirrlees,
        });
        if let Some(path) = out {
            io::write_json(path, &report)?;
        }
        println!("status: {status} (marginals not in convex order?)");
        return Ok(1);
    }

    let optimizer = solved.primal.coupling.clone().expect("optimal");
    let dual = solved.dual.expect("optimal");
    let gap = (solved.primal.value - dual.value).abs();
    let grid_violation = dual.feasibility_gap(&mu, &nu, &cost)?;
    let support_slack = dual.support_gap(&mu, &nu, &optimizer, &cost)?;
    let lm_violation = optimizer.find_left_monotone_violation();
    let competitor_violations = verify_monotonicity_principle(&optimizer.support(), &cost)?;
    // The optimizer is cost-independent only under strict costs; skip the
    // greedy comparison otherwise.
    let tv_to_greedy = if spence_mirrlees {
        Some(optimizer.total_variation(&build_left_monotone(&mu, &nu)?))
    } else {
        None
    };

    let report = json!({
        "manifest": manifest,
        "cost": cost_name,
        "status": status,
        "spence_mirrlees": spence_mirrlees,
        "primal_value": solved.primal.value,
        "dual_value": dual.value,
        "duality_gap": gap,
        "certificate": {
            "phi": dual.phi,
            "psi": dual.psi,
            "h": dual.h,
            "grid_violation": grid_violation,
            "support_slack": support_slack,
        },
        "left_monotone_violation": lm_violation.map(|v| json!({
            "x": v.x, "y0": v.y0, "y1": v.y1, "x_prime": v.x_prime, "y_prime": v.y_prime,
        })),
        "monotonicity_violations": competitor_violations.iter().map(|v| json!({
            "x": v.x, "y0": v.y0, "y1": v.y1, "x_prime": v.x_prime, "y_prime": v.y_prime,
            "g_at_x": v.g_at_x, "g_at_x_prime": v.g_at_x_prime,
        })).collect::<Vec<_>>(),
        "tv_to_greedy": tv_to_greedy,
        "optimizer": optimizer.entries().iter()
            .map(|e| json!({"x": e.x, "y": e.y, "w": e.w}))
            .collect::<Vec<_>>(),
    });
    if let Some(path) = out {
        io::write_json(path, &report)?;
        println!("report -> {}", path.display());
    }
    println!(
        "status: optimal, value {:.12}, duality gap {gap:.3e}, spence_mirrlees {spence_mirrlees}",
        solved.primal.value
    );
    println!(
        "left-monotone violation: {}, competitor violations: {}, tv to greedy: {}",
        if lm_violation.is_some() { "found" } else { "none" },
        competitor_violations.len(),
        tv_to_greedy.map_or("n/a".to_string(), |tv| format!("{tv:.3e}")),
    );

    let clean = gap <= GAP_TOL
        && (!spence_mirrlees || (lm_violation.is_none() && competitor_violations.is_empty()));
    Ok(if clean { 0 } else { 1 })
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_embed(
    tmaps_path: &Path,
    mu_arg: &str,
    nu_arg: &str,
    out: Option<&Path>,
    out_barrier: Option<&Path>,
    out_trajectories: Option<&PathBuf>,
    n_trajectories: usize,
    flags: &SimFlags,
) -> Result<i32> {
    let (mu, mu_text) = load_marginal(mu_arg, flags)?;
    let (nu, nu_text) = load_marginal(nu_arg, flags)?;
    let tmaps_text = std::fs::read_to_string(tmaps_path)
        .with_context(|| format!("reading maps {}", tmaps_path.display()))?;
    let maps = io::read_tmaps_csv(tmaps_path)?;
    let manifest = RunManifest::new("embed", flags.seed)
        .with_input("mu", &mu_text)
        .with_input("nu", &nu_text)
        .with_input("tmaps", &tmaps_text)
        .with_tolerance("dt", flags.dt);

    let violations = validate_t_maps(&maps);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("map validation: {v}");
        }
        return Ok(1);
    }
    let barrier = build_barrier(&maps)?;
    if let Some(path) = out_barrier {
        io::write_barrier_csv(path, &barrier, &manifest)?;
        println!("barrier: {} rays -> {}", barrier.lines().len(), path.display());
    }

    let cfg = PathConfig::new(flags.dt, default_t_max(&maps), flags.seed, flags.paths)?;
    let report = embed(&mu, &maps, &nu, flags.samples, flags.seed)?;
    let comparison = compare_stopping_times(&maps, &mu, &cfg)?;

    // Time grid around the mean stopping time; height grid past twice the
    // hull radius, where both sides of the inequality vanish.
    let mean_tau = report.mean_tau.max(cfg.dt);
    let t_grid: Vec<f64> = [0.25, 0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|s| (s * mean_tau).min(cfg.t_max))
        .collect();
    let hull_radius = maps
        .t_down()
        .iter()
        .chain(maps.t_up())
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let c_grid: Vec<f64> = [0.2, 0.5, 0.9, 1.4, 2.2]
        .iter()
        .map(|s| s * hull_radius)
        .collect();
    let ui = check_uniform_integrability(&maps, &mu, &cfg, &t_grid, &c_grid)?;
    let ui_all_pass = ui.rows.iter().all(|r| r.pass);

    if let Some(path) = out_trajectories {
        let trajectories = sample_trajectories(&maps, &mu, &cfg, n_trajectories)?;
        io::write_trajectories_csv(path, &trajectories, cfg.dt, &manifest)?;
        println!("trajectories: {n_trajectories} -> {}", path.display());
    }

    let censored_warning = comparison.censored as f64 / comparison.n_paths as f64 > 1e-3
        || report.censored_fraction > 1e-3
        || ui.censored_fraction > 1e-3;
    if censored_warning {
        eprintln!("warning: more than 0.1% of paths hit the horizon and were excluded");
    }

    let json_report = json!({
        "manifest": manifest,
        "embedding": {
            "w1_to_target": report.w1_to_target,
            "mean_tau": report.mean_tau,
            "stay_fraction": report.stay_fraction,
            "censored_fraction": report.censored_fraction,
            "empirical_law": {
                "atoms": report.empirical_law.atoms(),
                "weights": report.empirical_law.weights(),
            },
        },
        "stopping_comparison": {
            "n_paths": comparison.n_paths,
            "censored": comparison.censored,
            "agreement": comparison.agreement,
            "mean_abs_diff": comparison.mean_abs_diff,
            "mean_exit_time": comparison.mean_exit_time,
        },
        "uniform_integrability": {
            "censored_fraction": ui.censored_fraction,
            "all_pass": ui_all_pass,
            "rows": ui.rows.iter().map(|r| json!({
                "t": r.t, "c": r.c, "lhs": r.lhs, "rhs": r.rhs,
                "lhs_se": r.lhs_se, "rhs_se": r.rhs_se, "pass": r.pass,
            })).collect::<Vec<_>>(),
        },
        "censored_warning": censored_warning,
    });
    if let Some(path) = out {
        io::write_json(path, &json_report)?;
        println!("report -> {}", path.display());
    }
    println!(
        "w1 to target {:.4}, stopping agreement {:.4}, ui check {}",
        report.w1_to_target,
        comparison.agreement,
        if ui_all_pass { "all pass" } else { "FAILED" },
    );
    Ok(0)
}
