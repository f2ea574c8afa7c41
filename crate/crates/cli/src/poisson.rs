//! Poisson runs with `u = sin(πx) sin(πy)`: single solves, the refinement
//! permutation study and the condition-number sweep.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use anyhow::{Context, Result};
use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;

use multimesh::analysis::{diagnostics, energy_error, error_norms, loglog_slope};
use multimesh::multimesh::build_cut_topology;
use multimesh::problem::discretize;
use multimesh::scenarios::build_stack;
use multimesh::solver::extreme_eigs;
use multimesh::{ConvexPolygon, CutTopology, ErrorReport, FormParams, MultimeshFunction, Point2, SolveReport};

use crate::config::ExperimentConfig;

pub fn exact(x: Point2) -> f64 {
    (PI * x.x).sin() * (PI * x.y).sin()
}

pub fn exact_grad(x: Point2) -> Point2 {
    Point2::new(
        PI * (PI * x.x).cos() * (PI * x.y).sin(),
        PI * (PI * x.x).sin() * (PI * x.y).cos(),
    )
}

pub fn source(x: Point2) -> f64 {
    2.0 * PI * PI * exact(x)
}

/// Everything one solve produces.
#[derive(Debug)]
pub struct PoissonRun {
    pub ks: Vec<i32>,
    pub topo: CutTopology,
    pub u: MultimeshFunction,
    pub report: ErrorReport,
    pub cg: SolveReport,
    /// `‖b − Ax‖ / ‖b‖` of the reduced system.
    pub residual: f64,
    /// `‖A − Aᵀ‖_max / ‖A‖_max` of the full assembled matrix.
    pub asymmetry: f64,
    /// `(λ_max, λ_min)` of the reduced matrix, when requested.
    pub eigs: Option<(f64, f64)>,
}

/// Options shared by every solve of a study.
#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub params: FormParams,
    pub degree: usize,
    pub tol: f64,
    pub kappa: bool,
    pub seed: u64,
}

impl RunOptions {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            params: cfg.form_params(),
            degree: cfg.p,
            tol: cfg.tol,
            kappa: cfg.kappa,
            seed: cfg.seed,
        }
    }
}

/// Solves on `domains` with mesh sizes `2^-ks[i]`. Dirichlet data is the
/// exact solution, so custom backgrounds work too.
pub fn solve_poisson(label: &str, domains: &[ConvexPolygon], ks: &[i32], opts: &RunOptions) -> Result<PoissonRun> {
    let stack = build_stack(domains, &ExperimentConfig::target_sizes(ks), opts.degree)?;
    let topo = build_cut_topology(stack, opts.params.quad_order)?;
    let disc = discretize(&topo, &opts.params, source, exact, exact)?;
    let a = &disc.system.matrix;
    let asymmetry = a.max_asymmetry() / a.max_abs();
    let sol = disc
        .solve(&topo, opts.tol)
        .with_context(|| format!("solve of {label} with k = {ks:?}"))?;
    let eigs = if opts.kappa {
        Some(extreme_eigs(&disc.reduced.matrix, opts.seed)?)
    } else {
        None
    };
    let (l2_err, h1_err) = error_norms(&sol.u, &topo, exact, exact_grad)?;
    let energy = energy_error(&sol.u, &topo, exact, exact_grad)?;
    let diag = diagnostics(&topo);
    let report = ErrorReport {
        config: label.to_string(),
        p: opts.degree,
        h: (0..topo.num_meshes()).map(|i| topo.h(i)).collect(),
        dofs: disc.dofs.len(),
        l2_err,
        h1_err,
        energy,
        kappa: eigs.map(|(hi, lo)| hi / lo),
        n_o: diag.n_o,
        c_hn: diag.c_hn,
        c_p: diag.c_p,
    };
    Ok(PoissonRun {
        ks: ks.to_vec(),
        topo,
        u: sol.u,
        report,
        cg: sol.report,
        residual: sol.residual,
        asymmetry,
        eigs,
    })
}

/// One point of a refinement curve.
#[derive(Clone, Debug, Serialize)]
pub struct CurvePoint {
    pub step: usize,
    pub ks: Vec<i32>,
    pub report: ErrorReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct Curve {
    /// Parts in the order they are refined.
    pub ordering: Vec<usize>,
    pub points: Vec<CurvePoint>,
}

/// Exponent tuples visited when refining the parts in `ordering` one after
/// the other from `k_min` to `k_max`, starting with all parts at `k_min`.
pub fn refinement_path(ordering: &[usize], k_min: i32, k_max: i32) -> Vec<Vec<i32>> {
    let mut ks = vec![k_min; ordering.len()];
    let mut path = vec![ks.clone()];
    for &part in ordering {
        for k in k_min + 1..=k_max {
            ks[part] = k;
            path.push(ks.clone());
        }
    }
    path
}

/// Every ordering of the parts, each refined through `k_min..=k_max`.
/// Tuples shared between curves are solved once; curves come out in
/// lexicographic order of their orderings.
pub fn convergence_study(
    label: &str,
    domains: &[ConvexPolygon],
    k_min: i32,
    k_max: i32,
    opts: &RunOptions,
) -> Result<Vec<Curve>> {
    let n = domains.len();
    let orderings: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    let paths: Vec<Vec<Vec<i32>>> = orderings.iter().map(|o| refinement_path(o, k_min, k_max)).collect();
    let unique: Vec<Vec<i32>> = paths.iter().flatten().cloned().sorted().dedup().collect();
    log::info!("{label}: {} orderings, {} distinct solves", orderings.len(), unique.len());
    let reports: Vec<ErrorReport> = unique
        .par_iter()
        .map(|ks| {
            solve_poisson(label, domains, ks, opts)
                .map(|r| r.report)
                .inspect_err(|e| log::error!("k = {ks:?}: {e:#}"))
        })
        .collect::<Result<_>>()?;
    let by_ks: BTreeMap<&Vec<i32>, &ErrorReport> = unique.iter().zip(&reports).collect();
    Ok(orderings
        .into_iter()
        .zip(paths)
        .map(|(ordering, path)| Curve {
            ordering,
            points: path
                .into_iter()
                .enumerate()
                .map(|(step, ks)| CurvePoint {
                    step,
                    report: by_ks[&ks].clone(),
                    ks,
                })
                .collect(),
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionRow {
    pub k: i32,
    /// Largest mesh size over all parts.
    pub h: f64,
    pub dofs: usize,
    pub lambda_max: Option<f64>,
    pub lambda_min: Option<f64>,
    pub kappa: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionSweep {
    pub rows: Vec<ConditionRow>,
    /// Fitted slope of `log κ` against `log h` over the rows with an estimate.
    pub slope: Option<f64>,
}

/// Condition number of the reduced matrix with all parts at `2^-k`. A failed
/// eigenvalue estimate leaves its row empty and is logged.
pub fn condition_sweep(domains: &[ConvexPolygon], k_min: i32, k_max: i32, opts: &RunOptions) -> Result<ConditionSweep> {
    let rows: Vec<ConditionRow> = (k_min..=k_max)
        .map(|k| -> Result<ConditionRow> {
            let ks = vec![k; domains.len()];
            let stack = build_stack(domains, &ExperimentConfig::target_sizes(&ks), opts.degree)?;
            let topo = build_cut_topology(stack, opts.params.quad_order)?;
            let disc = discretize(&topo, &opts.params, |_| 0.0, |_| 0.0, |_| 0.0)?;
            let h = (0..topo.num_meshes()).map(|i| topo.h(i)).fold(0.0, f64::max);
            let eigs = extreme_eigs(&disc.reduced.matrix, opts.seed)
                .inspect_err(|e| log::error!("k = {k}: eigenvalue estimate failed: {e}"))
                .ok();
            Ok(ConditionRow {
                k,
                h,
                dofs: disc.reduced.matrix.dim(),
                lambda_max: eigs.map(|e| e.0),
                lambda_min: eigs.map(|e| e.1),
                kappa: eigs.map(|(hi, lo)| hi / lo),
            })
        })
        .collect::<Result<_>>()?;
    let (h, kappa): (Vec<f64>, Vec<f64>) = rows.iter().filter_map(|r| r.kappa.map(|k| (r.h, k))).unzip();
    let slope = loglog_slope(&h, &kappa).ok();
    Ok(ConditionSweep { rows, slope })
}
