use std::collections::HashMap;
use std::sync::Arc;

use super::TriMesh;
use crate::error::{Error, Result};
use crate::geom2d::Point2;

pub const MAX_LOCAL_DOFS: usize = 6;

/// Affine map of one triangle: barycentric coordinates and their gradients.
#[derive(Clone, Copy, Debug)]
pub struct CellMap {
    pub vertices: [Point2; 3],
    pub grad_lambda: [Point2; 3],
    det: f64,
}

impl CellMap {
    pub fn new(vertices: [Point2; 3]) -> Self {
        let [a, b, c] = vertices;
        let (e1, e2) = (b - a, c - a);
        let det = e1.cross(e2);
        let g1 = Point2::new(e2.y, -e2.x) * (1.0 / det);
        let g2 = Point2::new(-e1.y, e1.x) * (1.0 / det);
        Self {
            vertices,
            grad_lambda: [-(g1 + g2), g1, g2],
            det,
        }
    }

    pub fn barycentric(&self, p: Point2) -> [f64; 3] {
        let [a, b, c] = self.vertices;
        let d = p - a;
        let l1 = d.cross(c - a) / self.det;
        let l2 = (b - a).cross(d) / self.det;
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det
    }

    /// Lagrange basis of `degree` at `p`. Local ordering: vertices 0, 1, 2,
    /// then (for degree 2) edge midpoints 01, 12, 20.
    pub fn basis(&self, degree: usize, p: Point2, vals: &mut [f64; MAX_LOCAL_DOFS], grads: &mut [Point2; MAX_LOCAL_DOFS]) {
        let l = self.barycentric(p);
        let g = &self.grad_lambda;
        match degree {
            1 => {
                for k in 0..3 {
                    vals[k] = l[k];
                    grads[k] = g[k];
                }
            }
            _ => {
                for k in 0..3 {
                    vals[k] = l[k] * (2.0 * l[k] - 1.0);
                    grads[k] = g[k] * (4.0 * l[k] - 1.0);
                }
                for (e, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
                    vals[3 + e] = 4.0 * l[i] * l[j];
                    grads[3 + e] = (g[j] * l[i] + g[i] * l[j]) * 4.0;
                }
            }
        }
    }
}

/// Continuous Lagrange space of degree 1 or 2 on a triangular mesh.
#[derive(Clone, Debug)]
pub struct FeSpace {
    mesh: Arc<TriMesh>,
    degree: usize,
    dof_coords: Vec<Point2>,
    cell_dofs: Vec<usize>,
}

impl FeSpace {
    pub fn new(mesh: Arc<TriMesh>, degree: usize) -> Result<Self> {
        let n_local = match degree {
            1 => 3,
            2 => 6,
            _ => return Err(Error::UnsupportedDegree(degree)),
        };
        let mut dof_coords = mesh.nodes().to_vec();
        let mut cell_dofs = Vec::with_capacity(n_local * mesh.num_cells());
        let mut edge_dof: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in mesh.cells() {
            cell_dofs.extend_from_slice(tri);
            if degree == 2 {
                for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                    let (a, b) = (tri[i], tri[j]);
                    let key = (a.min(b), a.max(b));
                    let d = *edge_dof.entry(key).or_insert_with(|| {
                        let nodes = mesh.nodes();
                        dof_coords.push(nodes[a].lerp(nodes[b], 0.5));
                        dof_coords.len() - 1
                    });
                    cell_dofs.push(d);
                }
            }
        }
        Ok(Self {
            mesh,
            degree,
            dof_coords,
            cell_dofs,
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn n_local(&self) -> usize {
        if self.degree == 1 {
            3
        } else {
            6
        }
    }

    pub fn dof_coords(&self) -> &[Point2] {
        &self.dof_coords
    }

    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        let n = self.n_local();
        &self.cell_dofs[n * c..n * (c + 1)]
    }

    pub fn cell_map(&self, c: usize) -> CellMap {
        CellMap::new(self.mesh.cell_vertices(c))
    }

    /// Dofs on boundary facet `(cell, edge)`: two vertices plus the midpoint
    /// for degree 2.
    pub fn facet_dofs(&self, cell: usize, edge: usize) -> Vec<usize> {
        let d = self.cell_dofs(cell);
        let mut out = vec![d[edge], d[(edge + 1) % 3]];
        if self.degree == 2 {
            out.push(d[3 + edge]);
        }
        out
    }

    /// Value and gradient of the finite element function `coeffs` restricted
    /// to cell `c`, evaluated at `p`.
    pub fn eval(&self, coeffs: &[f64], c: usize, p: Point2) -> (f64, Point2) {
        let map = self.cell_map(c);
        let mut vals = [0.0; MAX_LOCAL_DOFS];
        let mut grads = [Point2::default(); MAX_LOCAL_DOFS];
        map.basis(self.degree, p, &mut vals, &mut grads);
        let mut v = 0.0;
        let mut g = Point2::default();
        for (k, &d) in self.cell_dofs(c).iter().enumerate() {
            v += coeffs[d] * vals[k];
            g += grads[k] * coeffs[d];
        }
        (v, g)
    }
}

/// Nodal interpolant: `f` sampled at every dof coordinate.
pub fn nodal_interpolate(space: &FeSpace, f: impl Fn(Point2) -> f64) -> Vec<f64> {
    space.dof_coords().iter().map(|&p| f(p)).collect()
}
