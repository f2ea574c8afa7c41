//! Experiment driver on top of the `multimesh` library. Each command runs
//! one study and writes `results.csv`, `meta.json` and, where asked for,
//! solution probes into the output directory.

pub mod config;
pub mod layer;
pub mod output;
pub mod poisson;

use std::fmt::Write as _;

use anyhow::Result;
use serde_json::json;

use multimesh::ErrorReport;

pub use config::{Case, Command, ExperimentConfig, Problem, RectSpec};
pub use layer::{boundary_layer_run, LayerRun, LayerSummary};
pub use poisson::{condition_sweep, convergence_study, solve_poisson, ConditionSweep, Curve, PoissonRun, RunOptions};

use output::{fmt_opt, probe_csv, probe_grid, write_file, write_json};

/// Default probe grid resolution for the boundary-layer command.
const LAYER_PROBE: usize = 101;

/// Parameters common to every `meta.json`.
fn meta(cmd: Command, cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    let specs = cfg.rect_specs();
    let domains: Vec<_> = specs
        .iter()
        .zip(cfg.domains()?)
        .map(|(s, poly)| {
            json!({
                "bounds": s.bounds,
                "angle_deg": s.angle_deg,
                "rotation_center": [poly.centroid().x, poly.centroid().y],
                "vertices": poly.vertices().iter().map(|p| [p.x, p.y]).collect::<Vec<_>>(),
            })
        })
        .collect();
    Ok(json!({
        "command": cmd,
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": cfg,
        "k_range": cfg.k_range(cmd),
        "form_params": cfg.form_params(),
        "mesh_size": "target 2^-k; reported h is the largest cell diameter",
        "rotation": "each rectangle is rotated about its own centroid",
        "domains": domains,
    }))
}

/// Runs `cmd` and writes its output files; returns a short text summary.
pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate(cmd)?;
    match (cmd, cfg.problem) {
        (Command::BoundaryLayer, _) | (Command::Solve, Problem::BoundaryLayer) => run_layer(cmd, cfg),
        (Command::Solve, Problem::Poisson) => run_solve(cfg),
        (Command::Convergence, _) => run_convergence(cfg),
        (Command::Condition, _) => run_condition(cfg),
    }
}

fn run_solve(cfg: &ExperimentConfig) -> Result<String> {
    let ks = cfg.solve_ks();
    let run = solve_poisson(cfg.config.label(), &cfg.domains()?, &ks, &RunOptions::from_config(cfg))?;
    let n = run.topo.num_meshes();
    write_file(
        &cfg.out.join("results.csv"),
        &format!("{}\n{}\n", ErrorReport::csv_header(n), run.report.csv_row()),
    )?;
    let mut m = meta(Command::Solve, cfg)?;
    m["ks"] = json!(ks);
    m["cg"] = json!(run.cg);
    m["residual"] = json!(run.residual);
    m["asymmetry"] = json!(run.asymmetry);
    m["eigenvalues"] = json!(run.eigs);
    write_json(&cfg.out.join("meta.json"), &m)?;
    if let Some(p) = cfg.probe {
        write_file(&cfg.out.join("probe.csv"), &probe_csv(&probe_grid(&run.topo, &run.u, p)?))?;
    }
    Ok(format!(
        "{} k={:?}: dofs {}, L2 {:e}, H1 {:e}, cg {} iterations, residual {:e}",
        cfg.config.label(),
        ks,
        run.report.dofs,
        run.report.l2_err,
        run.report.h1_err,
        run.cg.iterations,
        run.residual
    ))
}

fn run_convergence(cfg: &ExperimentConfig) -> Result<String> {
    let (lo, hi) = cfg.k_range(Command::Convergence);
    let domains = cfg.domains()?;
    let curves = convergence_study(cfg.config.label(), &domains, lo, hi, &RunOptions::from_config(cfg))?;
    let mut csv = format!("ordering,step,{}\n", ErrorReport::csv_header(domains.len()));
    for c in &curves {
        let ord = c.ordering.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("-");
        for p in &c.points {
            writeln!(csv, "{ord},{},{}", p.step, p.report.csv_row())?;
        }
    }
    write_file(&cfg.out.join("results.csv"), &csv)?;
    let mut m = meta(Command::Convergence, cfg)?;
    m["protocol"] = json!("for each ordering of the parts, start with all parts at k_min and refine them one at a time up to k_max");
    write_json(&cfg.out.join("meta.json"), &m)?;
    let first = &curves[0].points;
    Ok(format!(
        "{}: {} curves of {} points; L2 {:e} -> {:e}",
        cfg.config.label(),
        curves.len(),
        first.len(),
        first[0].report.l2_err,
        first[first.len() - 1].report.l2_err
    ))
}

fn run_condition(cfg: &ExperimentConfig) -> Result<String> {
    let (lo, hi) = cfg.k_range(Command::Condition);
    let sweep = condition_sweep(&cfg.domains()?, lo, hi, &RunOptions::from_config(cfg))?;
    let mut csv = String::from("k,h,dofs,lambda_max,lambda_min,kappa\n");
    for r in &sweep.rows {
        writeln!(
            csv,
            "{},{:e},{},{},{},{}",
            r.k,
            r.h,
            r.dofs,
            fmt_opt(r.lambda_max),
            fmt_opt(r.lambda_min),
            fmt_opt(r.kappa)
        )?;
    }
    writeln!(csv, "# slope,{}", fmt_opt(sweep.slope))?;
    write_file(&cfg.out.join("results.csv"), &csv)?;
    let mut m = meta(Command::Condition, cfg)?;
    m["matrix"] = json!("Dirichlet-reduced stiffness matrix, no preconditioning");
    m["slope"] = json!(sweep.slope);
    write_json(&cfg.out.join("meta.json"), &m)?;
    Ok(format!("{}: log-log slope of kappa {}", cfg.config.label(), fmt_opt(sweep.slope)))
}

fn run_layer(cmd: Command, cfg: &ExperimentConfig) -> Result<String> {
    let (lo, hi) = match cmd {
        Command::Solve => {
            let k = cfg.k_range(Command::BoundaryLayer).0;
            (k, k)
        }
        _ => cfg.k_range(Command::BoundaryLayer),
    };
    let params = cfg.form_params();
    let mut csv = String::from("k,background_h,width,eps,dofs,obstacle_err,corner_u,half_width,cg_iterations,residual\n");
    let mut summaries = Vec::new();
    for k in lo..=hi {
        let run = boundary_layer_run(k, cfg.p, cfg.layers, &params, cfg.tol)?;
        let s = &run.summary;
        log::info!("boundary layer k = {k}: half-width {:e}", s.half_width);
        writeln!(
            csv,
            "{},{:e},{:e},{:e},{},{:e},{:e},{:e},{},{:e}",
            s.k, s.background_h, s.width, s.eps, s.dofs, s.obstacle_err, s.corner_u, s.half_width, s.cg.iterations, s.residual
        )?;
        let grid = probe_grid(&run.topo, &run.u, cfg.probe.unwrap_or(LAYER_PROBE))?;
        write_file(&cfg.out.join(format!("probe_k{k}.csv")), &probe_csv(&grid))?;
        summaries.push(run.summary);
    }
    write_file(&cfg.out.join("results.csv"), &csv)?;
    let ratios: Vec<f64> = summaries.windows(2).map(|w| w[0].half_width / w[1].half_width).collect();
    let mut m = meta(cmd, cfg)?;
    m["obstacle"] = json!({"shape": "regular hexagon", "center": [0.5, 0.5], "inradius": 0.15, "flat_side": "+x"});
    m["band_layers"] = json!(cfg.layers);
    m["half_width_ratios"] = json!(ratios);
    m["runs"] = json!(summaries);
    write_json(&cfg.out.join("meta.json"), &m)?;
    Ok(format!(
        "boundary layer k={lo}..{hi}: half-widths {:?}",
        summaries.iter().map(|s| s.half_width).collect::<Vec<_>>()
    ))
}
