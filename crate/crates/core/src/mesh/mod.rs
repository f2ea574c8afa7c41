//! Triangular premeshes, their Lagrange spaces and spatial lookup.

mod bins;
mod builders;
mod io;
mod space;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom2d::{Aabb, ConvexPolygon, Point2, Segment};

pub use bins::CellBins;
pub use builders::{build_band_mesh, build_structured_mesh};
pub use io::{read_mesh, write_mesh};
pub use space::{nodal_interpolate, CellMap, FeSpace, MAX_LOCAL_DOFS};

/// Which boundary loop a facet belongs to: the counterclockwise outer loop or
/// a clockwise loop around a hole.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    Outer,
    Inner,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub cell: usize,
    /// Local edge `k` joins local vertices `k` and `(k + 1) % 3`.
    pub edge: usize,
    pub tag: BoundaryTag,
}

#[derive(Clone, Debug)]
pub struct TriMesh {
    nodes: Vec<Point2>,
    cells: Vec<[usize; 3]>,
    boundary_facets: Vec<BoundaryFacet>,
    h: f64,
    h_min: f64,
}

impl TriMesh {
    /// Builds a mesh, checking orientation and conformity. Boundary facets
    /// are discovered from the connectivity and tagged by loop orientation.
    pub fn new(nodes: Vec<Point2>, cells: Vec<[usize; 3]>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidMesh("no cells".into()));
        }
        let mut h = 0.0_f64;
        let mut h_min = f64::INFINITY;
        for (c, tri) in cells.iter().enumerate() {
            if tri.iter().any(|&v| v >= nodes.len()) {
                return Err(Error::InvalidMesh(format!("cell {c} references a missing node")));
            }
            let [a, b, d] = tri.map(|v| nodes[v]);
            let scale = a.dist(b).max(b.dist(d)).max(d.dist(a));
            if (b - a).cross(d - a) <= 1e-14 * scale * scale {
                return Err(Error::InvalidMesh(format!("cell {c} is not positively oriented")));
            }
            h = h.max(scale);
            h_min = h_min.min(scale);
        }

        // directed edge -> (cell, local edge)
        let mut directed: HashMap<(usize, usize), (usize, usize)> = HashMap::with_capacity(3 * cells.len());
        for (c, tri) in cells.iter().enumerate() {
            for k in 0..3 {
                let e = (tri[k], tri[(k + 1) % 3]);
                if directed.insert(e, (c, k)).is_some() {
                    return Err(Error::InvalidMesh(format!("edge {e:?} is traversed twice in the same direction")));
                }
            }
        }
        let mut boundary: Vec<(usize, usize, usize, usize)> = directed
            .iter()
            .filter(|(&(a, b), _)| !directed.contains_key(&(b, a)))
            .map(|(&(a, b), &(c, k))| (a, b, c, k))
            .collect();
        boundary.sort_unstable();

        let mut next: HashMap<usize, usize> = HashMap::with_capacity(boundary.len());
        for (i, &(a, ..)) in boundary.iter().enumerate() {
            if next.insert(a, i).is_some() {
                return Err(Error::InvalidMesh(format!("boundary is pinched at node {a}")));
            }
        }
        let mut tag = vec![BoundaryTag::Outer; boundary.len()];
        let mut seen = vec![false; boundary.len()];
        for start in 0..boundary.len() {
            if seen[start] {
                continue;
            }
            let mut members = Vec::new();
            let mut cur = start;
            while !seen[cur] {
                seen[cur] = true;
                members.push(cur);
                let (_, b, ..) = boundary[cur];
                cur = *next
                    .get(&b)
                    .ok_or_else(|| Error::InvalidMesh(format!("boundary loop is open at node {b}")))?;
            }
            if cur != start {
                return Err(Error::InvalidMesh("boundary facets do not form closed loops".into()));
            }
            let o = nodes[boundary[start].0];
            let area2: f64 = members
                .iter()
                .map(|&m| (nodes[boundary[m].0] - o).cross(nodes[boundary[m].1] - o))
                .sum();
            let t = if area2 > 0.0 { BoundaryTag::Outer } else { BoundaryTag::Inner };
            for m in members {
                tag[m] = t;
            }
        }
        let mut boundary_facets: Vec<BoundaryFacet> = boundary
            .iter()
            .zip(tag)
            .map(|(&(_, _, cell, edge), tag)| BoundaryFacet { cell, edge, tag })
            .collect();
        boundary_facets.sort_unstable_by_key(|f| (f.cell, f.edge));

        Ok(Self {
            nodes,
            cells,
            boundary_facets,
            h,
            h_min,
        })
    }

    pub fn nodes(&self) -> &[Point2] {
        &self.nodes
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Mesh parameter: the largest cell diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Ratio of the largest to the smallest cell diameter.
    pub fn uniformity_ratio(&self) -> f64 {
        self.h / self.h_min
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    pub fn cell_vertices(&self, c: usize) -> [Point2; 3] {
        self.cells[c].map(|v| self.nodes[v])
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        let [a, b, d] = self.cell_vertices(c);
        0.5 * (b - a).cross(d - a)
    }

    pub fn cell_polygon(&self, c: usize) -> ConvexPolygon {
        ConvexPolygon::from_clean(self.cell_vertices(c).to_vec())
    }

    pub fn cell_bbox(&self, c: usize) -> Aabb {
        Aabb::from_points(self.cell_vertices(c))
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::from_points(self.nodes.iter().copied())
    }

    pub fn area(&self) -> f64 {
        (0..self.cells.len()).map(|c| self.cell_area(c)).sum()
    }

    pub fn facet_nodes(&self, f: &BoundaryFacet) -> (usize, usize) {
        let tri = self.cells[f.cell];
        (tri[f.edge], tri[(f.edge + 1) % 3])
    }

    pub fn facet_segment(&self, f: &BoundaryFacet) -> Segment {
        let (a, b) = self.facet_nodes(f);
        Segment::new(self.nodes[a], self.nodes[b])
    }

    /// Boundary node loops (in facet order) with their tags.
    pub fn boundary_loops(&self) -> Vec<(BoundaryTag, Vec<usize>)> {
        let next: HashMap<usize, (usize, BoundaryTag)> = self
            .boundary_facets
            .iter()
            .map(|f| {
                let (a, b) = self.facet_nodes(f);
                (a, (b, f.tag))
            })
            .collect();
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        let mut visited = std::collections::HashSet::new();
        let mut loops = Vec::new();
        for s in starts {
            if visited.contains(&s) {
                continue;
            }
            let mut lp = Vec::new();
            let mut cur = s;
            let tag = next[&s].1;
            while visited.insert(cur) {
                lp.push(cur);
                cur = next[&cur].0;
            }
            loops.push((tag, lp));
        }
        loops
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_orientation() {
        let nodes = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        assert!(TriMesh::new(nodes.clone(), vec![[0, 2, 1]]).is_err());
        assert!(TriMesh::new(nodes.clone(), vec![[0, 1, 3]]).is_err());
        let m = TriMesh::new(nodes, vec![[0, 1, 2]]).unwrap();
        assert_eq!(m.boundary_facets().len(), 3);
        assert!(m.boundary_facets().iter().all(|f| f.tag == BoundaryTag::Outer));
    }

    #[test]
    fn rejects_nonconforming() {
        // two triangles sharing an edge with the same orientation
        let nodes = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0), Point2::new(1.0, 1.0)];
        assert!(TriMesh::new(nodes, vec![[0, 1, 2], [0, 1, 3]]).is_err());
    }
}
