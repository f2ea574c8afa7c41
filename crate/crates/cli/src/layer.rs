//! `-Δu + ε⁻²u = 0` outside a hexagonal obstacle with `u = 1` on the
//! obstacle and `u = 0` on the outer boundary. The obstacle is surrounded by
//! a thin band mesh laid over a uniform background mesh.

use anyhow::{bail, Context, Result};
use serde::Serialize;

use multimesh::analysis::eval;
use multimesh::multimesh::build_cut_topology;
use multimesh::problem::discretize;
use multimesh::scenarios::{boundary_layer, OBSTACLE_CENTER, OBSTACLE_INRADIUS};
use multimesh::{CutTopology, FormParams, MultimeshFunction, Point2, SolveReport};

/// Corner point where the solution should have decayed.
pub const CORNER: Point2 = Point2 { x: 0.05, y: 0.05 };

/// Samples per obstacle edge when checking the boundary value.
const EDGE_SAMPLES: usize = 64;

/// Samples on the probe line per band width.
const LINE_SAMPLES: usize = 2000;

#[derive(Clone, Debug, Serialize)]
pub struct LayerSummary {
    pub k: i32,
    pub background_h: f64,
    pub width: f64,
    pub eps: f64,
    pub dofs: usize,
    /// Largest `|u − 1|` over the obstacle boundary.
    pub obstacle_err: f64,
    pub corner_u: f64,
    /// Distance from the obstacle, along the outward normal of its `+x`
    /// side, at which `u` first drops to 1/2.
    pub half_width: f64,
    pub cg: SolveReport,
    pub residual: f64,
    pub asymmetry: f64,
}

#[derive(Debug)]
pub struct LayerRun {
    pub summary: LayerSummary,
    pub topo: CutTopology,
    pub u: MultimeshFunction,
}

/// Solve at level `k` with the given coupling parameters; the reaction
/// term is set to `ε = w/2`.
pub fn boundary_layer_run(k: i32, degree: usize, layers: usize, params: &FormParams, tol: f64) -> Result<LayerRun> {
    if k < 0 {
        bail!("boundary-layer level {k} is negative");
    }
    let setup = boundary_layer(k as u32, layers, degree)?;
    let params = FormParams {
        reaction_eps: Some(setup.eps),
        ..*params
    };
    let topo = build_cut_topology(setup.config, params.quad_order)?;
    let disc = discretize(&topo, &params, |_| 0.0, |_| 0.0, |_| 1.0)?;
    let a = &disc.system.matrix;
    let asymmetry = a.max_asymmetry() / a.max_abs();
    let sol = disc.solve(&topo, tol).with_context(|| format!("boundary layer at k = {k}"))?;

    let mut obstacle_err: f64 = 0.0;
    for e in setup.obstacle.edges() {
        for s in 0..=EDGE_SAMPLES {
            let x = e.at(s as f64 / EDGE_SAMPLES as f64);
            obstacle_err = obstacle_err.max((eval(&sol.u, &topo, x)? - 1.0).abs());
        }
    }
    let corner_u = eval(&sol.u, &topo, CORNER)?;
    let half_width = half_width(&sol.u, &topo, setup.width)?;
    let summary = LayerSummary {
        k,
        background_h: setup.background_h,
        width: setup.width,
        eps: setup.eps,
        dofs: disc.dofs.len(),
        obstacle_err,
        corner_u,
        half_width,
        cg: sol.report,
        residual: sol.residual,
        asymmetry,
    };
    Ok(LayerRun {
        summary,
        topo,
        u: sol.u,
    })
}

/// Walks outward from the midpoint of the obstacle's `+x` side until `u`
/// falls below 1/2, interpolating linearly between samples.
fn half_width(u: &MultimeshFunction, topo: &CutTopology, width: f64) -> Result<f64> {
    let start = Point2::new(OBSTACLE_CENTER.x + OBSTACLE_INRADIUS, OBSTACLE_CENTER.y);
    let reach = (1.0 - start.x).min(8.0 * width);
    let n = (LINE_SAMPLES as f64 * reach / width).ceil() as usize;
    let ds = reach / n as f64;
    let mut prev = (0.0, eval(u, topo, start)?);
    for i in 1..=n {
        let s = i as f64 * ds;
        let v = eval(u, topo, Point2::new(start.x + s, start.y))?;
        if v < 0.5 {
            let t = (prev.1 - 0.5) / (prev.1 - v);
            return Ok(prev.0 + t * (s - prev.0));
        }
        prev = (s, v);
    }
    bail!("solution stays above 1/2 for {reach} beyond the obstacle")
}
