//! Multimesh functions and the quantities measured on them: point values,
//! error norms, the energy norm split into its four terms, the `‖·‖_h`
//! norm, the global interpolant and the topology constants.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::DofMap;
use crate::error::{Error, Result};
use crate::geom2d::{polyset_quadrature, triangle_quadrature, Point2};
use crate::mesh::nodal_interpolate;
use crate::multimesh::{CellRef, CutTopology};

/// A tuple `(v_0, …, v_N)` of coefficient vectors, one per mesh, each the
/// full length of its space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultimeshFunction {
    pub coeffs: Vec<Vec<f64>>,
}

impl MultimeshFunction {
    pub fn zeros(topo: &CutTopology) -> Self {
        Self::constant(topo, &vec![0.0; topo.num_meshes()])
    }

    /// Constant `values[i]` on mesh `i`.
    pub fn constant(topo: &CutTopology, values: &[f64]) -> Self {
        Self {
            coeffs: (0..topo.num_meshes()).map(|i| vec![values[i]; topo.space(i).dim()]).collect(),
        }
    }

    /// Scatters a vector over the active dofs; inactive dofs get zero.
    pub fn from_global(topo: &CutTopology, dofs: &DofMap, x: &[f64]) -> Result<Self> {
        if x.len() != dofs.len() {
            return Err(Error::DimensionMismatch {
                expected: dofs.len(),
                got: x.len(),
            });
        }
        let mut u = Self::zeros(topo);
        for (g, &v) in x.iter().enumerate() {
            let (i, d) = dofs.local(g);
            u.coeffs[i][d] = v;
        }
        Ok(u)
    }

    /// Gathers the active dofs into one vector.
    pub fn to_global(&self, dofs: &DofMap) -> Vec<f64> {
        (0..dofs.len())
            .map(|g| {
                let (i, d) = dofs.local(g);
                self.coeffs[i][d]
            })
            .collect()
    }

    pub fn check(&self, topo: &CutTopology) -> Result<()> {
        if self.coeffs.len() != topo.num_meshes() {
            return Err(Error::DimensionMismatch {
                expected: topo.num_meshes(),
                got: self.coeffs.len(),
            });
        }
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.len() != topo.space(i).dim() {
                return Err(Error::DimensionMismatch {
                    expected: topo.space(i).dim(),
                    got: c.len(),
                });
            }
        }
        Ok(())
    }

    /// Value and gradient of component `r.mesh` on cell `r.cell`.
    pub fn value_grad(&self, topo: &CutTopology, r: CellRef, x: Point2) -> (f64, Point2) {
        topo.space(r.mesh).eval(&self.coeffs[r.mesh], r.cell, x)
    }
}

/// Value at `x` taken from the topmost mesh visible there.
pub fn eval(u: &MultimeshFunction, topo: &CutTopology, x: Point2) -> Result<f64> {
    let r = topo.point_locate(x)?;
    Ok(u.value_grad(topo, r, x).0)
}

/// Broken `L²` and `H¹`-seminorm of `u_h − u` over the visible regions,
/// with quadrature of order `2p + 2` (capped at the highest rule).
pub fn error_norms(
    u_h: &MultimeshFunction,
    topo: &CutTopology,
    u: impl Fn(Point2) -> f64 + Sync,
    grad_u: impl Fn(Point2) -> Point2 + Sync,
) -> Result<(f64, f64)> {
    u_h.check(topo)?;
    let order = (2 * topo.degree() + 2).min(6);
    let cells: Vec<_> = (0..topo.num_meshes()).flat_map(|i| topo.cut_cells(i).iter()).collect();
    let parts: Vec<(f64, f64)> = cells
        .par_iter()
        .map(|cc| -> Result<(f64, f64)> {
            let rule = polyset_quadrature(&cc.visible, order)?;
            let r = CellRef::new(cc.mesh, cc.cell);
            let mut acc = (0.0, 0.0);
            for (x, w) in rule.iter() {
                let (v, g) = u_h.value_grad(topo, r, x);
                let e = v - u(x);
                let ge = g - grad_u(x);
                acc.0 += w * e * e;
                acc.1 += w * ge.dot(ge);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let (l2, h1) = parts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    Ok((l2.sqrt(), h1.sqrt()))
}

/// Squared energy norm split into its four terms:
///
/// * I: `Σ_i ‖∇v_i‖²` over the visible regions;
/// * II: `‖[∇v]‖²` over the overlaps;
/// * III: `h_i ‖∇v_i‖² + h_j ‖∇v_j‖²` over the interfaces;
/// * IV: `(h_i + h_j)⁻¹ ‖[v]‖²` over the interfaces.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub term_i: f64,
    pub term_ii: f64,
    pub term_iii: f64,
    pub term_iv: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn new(term_i: f64, term_ii: f64, term_iii: f64, term_iv: f64) -> Self {
        Self {
            term_i,
            term_ii,
            term_iii,
            term_iv,
            total: term_i + term_ii + term_iii + term_iv,
        }
    }

    pub fn norm(&self) -> f64 {
        self.total.sqrt()
    }
}

fn sum_par<T: Sync>(items: &[T], f: impl Fn(&T) -> f64 + Sync) -> f64 {
    let v: Vec<f64> = items.par_iter().map(&f).collect();
    v.iter().sum()
}

/// Energy norm terms of a broken field given per mesh and cell by `field`,
/// which returns the value and gradient of component `r.mesh` at `x`.
pub fn energy_norm_of<F>(topo: &CutTopology, field: F) -> EnergyBreakdown
where
    F: Fn(CellRef, Point2) -> (f64, Point2) + Sync,
{
    let cells: Vec<_> = (0..topo.num_meshes()).flat_map(|i| topo.cut_cells(i).iter()).collect();
    let term_i = sum_par(&cells, |cc| {
        let r = CellRef::new(cc.mesh, cc.cell);
        cc.quad
            .iter()
            .map(|(x, w)| {
                let g = field(r, x).1;
                w * g.dot(g)
            })
            .sum()
    });
    let term_ii = sum_par(topo.overlaps(), |o| {
        o.quad
            .iter()
            .map(|(x, w)| {
                let d = field(o.lower, x).1 - field(o.upper, x).1;
                w * d.dot(d)
            })
            .sum()
    });
    let (term_iii, term_iv) = {
        let v: Vec<(f64, f64)> = topo
            .facets()
            .par_iter()
            .map(|f| {
                let (hi, hj) = (topo.h(f.upper.mesh), topo.h(f.lower.mesh));
                let mut acc = (0.0, 0.0);
                for (x, w) in f.quad.iter() {
                    let (vi, gi) = field(f.upper, x);
                    let (vj, gj) = field(f.lower, x);
                    acc.0 += w * (hi * gi.dot(gi) + hj * gj.dot(gj));
                    acc.1 += w * (vi - vj).powi(2) / (hi + hj);
                }
                acc
            })
            .collect();
        v.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1))
    };
    EnergyBreakdown::new(term_i, term_ii, term_iii, term_iv)
}

pub fn energy_norm(u: &MultimeshFunction, topo: &CutTopology) -> Result<EnergyBreakdown> {
    u.check(topo)?;
    Ok(energy_norm_of(topo, |r, x| u.value_grad(topo, r, x)))
}

/// Energy norm terms of `u − u_h`, with `u` a smooth function shared by all
/// components.
pub fn energy_error(
    u_h: &MultimeshFunction,
    topo: &CutTopology,
    u: impl Fn(Point2) -> f64 + Sync,
    grad_u: impl Fn(Point2) -> Point2 + Sync,
) -> Result<EnergyBreakdown> {
    u_h.check(topo)?;
    Ok(energy_norm_of(topo, |r, x| {
        let (v, g) = u_h.value_grad(topo, r, x);
        (u(x) - v, grad_u(x) - g)
    }))
}

/// `‖v‖_{s_h}`, the square root of energy term II.
pub fn sh_norm(u: &MultimeshFunction, topo: &CutTopology) -> Result<f64> {
    Ok(energy_norm(u, topo)?.term_ii.sqrt())
}

/// `‖v‖_h`: each component over its whole active domain, so overlaps are
/// counted more than once.
pub fn h_norm(u: &MultimeshFunction, topo: &CutTopology) -> Result<f64> {
    u.check(topo)?;
    let order = 2 * topo.degree();
    let cells: Vec<_> = (0..topo.num_meshes()).flat_map(|i| topo.cut_cells(i).iter()).collect();
    let parts: Vec<f64> = cells
        .par_iter()
        .map(|cc| -> Result<f64> {
            let mesh = topo.space(cc.mesh).mesh();
            let rule = triangle_quadrature(mesh.cell_vertices(cc.cell), order)?;
            let r = CellRef::new(cc.mesh, cc.cell);
            Ok(rule.iter().map(|(x, w)| w * u.value_grad(topo, r, x).0.powi(2)).sum())
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum::<f64>().sqrt())
}

/// Nodal interpolant on every mesh, covered dofs included.
pub fn global_interpolant(topo: &CutTopology, f: impl Fn(Point2) -> f64) -> MultimeshFunction {
    MultimeshFunction {
        coeffs: (0..topo.num_meshes()).map(|i| nodal_interpolate(topo.space(i), &f)).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_o: usize,
    pub n_oi: Vec<usize>,
    /// `1 + max h_i² N_{O_i} + max h_i |Γ_i|`.
    pub c_hn: f64,
    /// `1 + max h_i N_{O_i} + max h_i² N_{O_i}`.
    pub c_p: f64,
    pub gamma_len: Vec<f64>,
}

pub fn diagnostics(topo: &CutTopology) -> Diagnostics {
    let n = topo.num_meshes();
    let h: Vec<f64> = (0..n).map(|i| topo.h(i)).collect();
    let n_oi = topo.n_oi().to_vec();
    let gamma_len = topo.gamma_len().to_vec();
    let max = |f: &dyn Fn(usize) -> f64| (0..n).map(f).fold(0.0, f64::max);
    let h2n = max(&|i| h[i] * h[i] * n_oi[i] as f64);
    let c_hn = 1.0 + h2n + max(&|i| h[i] * gamma_len[i]);
    let c_p = 1.0 + max(&|i| h[i] * n_oi[i] as f64) + h2n;
    Diagnostics {
        n_o: topo.n_o(),
        n_oi,
        c_hn,
        c_p,
        gamma_len,
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidParameter(format!("slope needs two or more pairs, got {} and {}", x.len(), y.len())));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter("log-log slope of non-positive data".into()));
    }
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("slope over a single abscissa".into()));
    }
    Ok(sxy / sxx)
}

/// One solve of a study, flattened into a `results.csv` row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub config: String,
    pub p: usize,
    /// Mesh size of every part, background first.
    pub h: Vec<f64>,
    pub dofs: usize,
    pub l2_err: f64,
    pub h1_err: f64,
    /// Terms of the energy norm of the error.
    pub energy: EnergyBreakdown,
    pub kappa: Option<f64>,
    pub n_o: usize,
    pub c_hn: f64,
    pub c_p: f64,
}

impl ErrorReport {
    pub fn csv_header(num_meshes: usize) -> String {
        let mut cols = vec!["config".to_string(), "p".to_string()];
        cols.extend((0..num_meshes).map(|i| format!("h_{i}")));
        cols.extend(
            [
                "dofs", "l2_err", "h1_err", "energy_I", "energy_II", "energy_III", "energy_IV", "kappa", "N_O", "C_hN",
                "C_P",
            ]
            .map(String::from),
        );
        cols.join(",")
    }

    /// Fields in header order; a missing `kappa` is left empty.
    pub fn csv_row(&self) -> String {
        let mut cols = vec![self.config.clone(), self.p.to_string()];
        cols.extend(self.h.iter().map(|h| format!("{h:e}")));
        cols.push(self.dofs.to_string());
        let e = &self.energy;
        cols.extend([self.l2_err, self.h1_err, e.term_i, e.term_ii, e.term_iii, e.term_iv].map(|v| format!("{v:e}")));
        cols.push(self.kappa.map_or(String::new(), |k| format!("{k:e}")));
        cols.push(self.n_o.to_string());
        cols.extend([self.c_hn, self.c_p].map(|v| format!("{v:e}")));
        cols.join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_row_matches_header() {
        let r = ErrorReport {
            config: "I".into(),
            p: 1,
            h: vec![0.25, 0.125, 0.125],
            dofs: 10,
            l2_err: 1e-3,
            h1_err: 2e-2,
            energy: EnergyBreakdown::new(1.0, 2.0, 3.0, 4.0),
            kappa: None,
            n_o: 2,
            c_hn: 1.5,
            c_p: 1.25,
        };
        let header = ErrorReport::csv_header(3);
        let row = r.csv_row();
        assert_eq!(header.split(',').count(), row.split(',').count());
        assert!(header.starts_with("config,p,h_0,h_1,h_2,dofs,l2_err"));
        assert!(row.starts_with("I,1,2.5e-1,1.25e-1,1.25e-1,10,1e-3,2e-2,1e0,2e0,3e0,4e0,,2,"));
    }

    #[test]
    fn slope_of_a_power_law() {
        let x = [0.5, 0.25, 0.125];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 2.0).abs() < 1e-12);
        assert!(loglog_slope(&x[..1], &y[..1]).is_err());
        assert!(loglog_slope(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }
}
