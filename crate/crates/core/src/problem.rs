//! End-to-end pipeline: assemble, constrain, solve, scatter back.

use crate::analysis::MultimeshFunction;
use crate::assembly::{apply_dirichlet, assemble_system, DirichletBC, DofMap, FormParams, LinearSystem, ReducedSystem};
use crate::error::{Error, Result};
use crate::geom2d::Point2;
use crate::multimesh::CutTopology;
use crate::solver::{cg_solve, norm2, SolveReport};

/// Assembled and constrained system of one problem.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub dofs: DofMap,
    pub system: LinearSystem,
    pub bc: DirichletBC,
    pub reduced: ReducedSystem,
}

/// Assembles `A_h u = l_h` with source `f`, and eliminates the boundary
/// values `g_outer` (outer boundary) and `g_inner` (hole boundaries).
pub fn discretize(
    topo: &CutTopology,
    params: &FormParams,
    f: impl Fn(Point2) -> f64 + Sync,
    g_outer: impl Fn(Point2) -> f64,
    g_inner: impl Fn(Point2) -> f64,
) -> Result<Discretization> {
    let dofs = DofMap::new(topo);
    let system = assemble_system(topo, &dofs, params, f)?;
    let bc = DirichletBC::on_boundary(topo, &dofs, g_outer, g_inner);
    let reduced = apply_dirichlet(&system, &dofs, &bc)?;
    Ok(Discretization {
        dofs,
        system,
        bc,
        reduced,
    })
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub u: MultimeshFunction,
    /// Solution over all active dofs, boundary values included.
    pub global: Vec<f64>,
    pub report: SolveReport,
    /// `‖b − Ax‖ / ‖b‖` of the reduced system.
    pub residual: f64,
}

impl Discretization {
    /// CG solve of the reduced system to relative residual `tol`. Failure
    /// to converge is an error.
    pub fn solve(&self, topo: &CutTopology, tol: f64) -> Result<Solution> {
        let a = &self.reduced.matrix;
        let maxit = 10 * a.dim() + 1000;
        let (x, report) = cg_solve(a, &self.reduced.rhs, tol, maxit)?;
        if !report.converged {
            let why = if report.iterations < maxit {
                "stagnated; the tolerance is below the attainable accuracy for this matrix"
            } else {
                "hit the iteration limit"
            };
            return Err(Error::InvalidParameter(format!(
                "cg did not converge to {tol:e}: residual {:e} after {} iterations ({why})",
                report.relative_residual, report.iterations
            )));
        }
        let ax = a.mul(&x);
        let r: Vec<f64> = self.reduced.rhs.iter().zip(&ax).map(|(b, y)| b - y).collect();
        let bn = norm2(&self.reduced.rhs);
        let residual = if bn > 0.0 { norm2(&r) / bn } else { norm2(&r) };
        let global = self.reduced.expand(&x);
        let u = MultimeshFunction::from_global(topo, &self.dofs, &global)?;
        Ok(Solution {
            u,
            global,
            report,
            residual,
        })
    }
}
