use super::TriMesh;
use crate::geom2d::{Aabb, Point2};

/// Uniform bin grid over a mesh's bounding box. Each cell is registered in
/// every bin its bounding box touches; queries return sorted candidate lists.
#[derive(Clone, Debug)]
pub struct CellBins {
    origin: Point2,
    size: f64,
    nx: usize,
    ny: usize,
    offsets: Vec<u32>,
    items: Vec<u32>,
}

impl CellBins {
    pub fn new(mesh: &TriMesh, bin_size: f64) -> Self {
        let bb = mesh.bbox();
        let size = bin_size.max(1e-300);
        let nx = (((bb.max.x - bb.min.x) / size).ceil() as usize).max(1);
        let ny = (((bb.max.y - bb.min.y) / size).ceil() as usize).max(1);
        let mut bins = Self {
            origin: bb.min,
            size,
            nx,
            ny,
            offsets: vec![0; nx * ny + 1],
            items: Vec::new(),
        };
        let ranges: Vec<_> = (0..mesh.num_cells()).map(|c| bins.range(&mesh.cell_bbox(c))).collect();
        for &(i0, i1, j0, j1) in &ranges {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    bins.offsets[j * nx + i + 1] += 1;
                }
            }
        }
        for k in 0..nx * ny {
            bins.offsets[k + 1] += bins.offsets[k];
        }
        let mut fill = bins.offsets.clone();
        bins.items = vec![0; bins.offsets[nx * ny] as usize];
        for (c, &(i0, i1, j0, j1)) in ranges.iter().enumerate() {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let slot = &mut fill[j * nx + i];
                    bins.items[*slot as usize] = c as u32;
                    *slot += 1;
                }
            }
        }
        bins
    }

    fn range(&self, bb: &Aabb) -> (usize, usize, usize, usize) {
        let clampi = |v: f64, n: usize| -> usize {
            if v <= 0.0 {
                0
            } else {
                (v as usize).min(n - 1)
            }
        };
        let pad = 1e-12 * self.size;
        (
            clampi((bb.min.x - pad - self.origin.x) / self.size, self.nx),
            clampi((bb.max.x + pad - self.origin.x) / self.size, self.nx),
            clampi((bb.min.y - pad - self.origin.y) / self.size, self.ny),
            clampi((bb.max.y + pad - self.origin.y) / self.size, self.ny),
        )
    }

    /// Cells whose bounding boxes may overlap `bb`.
    pub fn query(&self, bb: &Aabb) -> Vec<usize> {
        let (i0, i1, j0, j1) = self.range(bb);
        let mut out = Vec::new();
        for j in j0..=j1 {
            for i in i0..=i1 {
                let k = j * self.nx + i;
                let (s, e) = (self.offsets[k] as usize, self.offsets[k + 1] as usize);
                out.extend(self.items[s..e].iter().map(|&c| c as usize));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Lowest-index cell containing `p` (boundary inclusive, within `tol` in
    /// barycentric coordinates).
    pub fn locate(&self, mesh: &TriMesh, p: Point2, tol: f64) -> Option<usize> {
        let bb = Aabb { min: p, max: p };
        self.query(&bb).into_iter().find(|&c| {
            let [a, b, d] = mesh.cell_vertices(c);
            let det = (b - a).cross(d - a);
            let l1 = (p - a).cross(d - a) / det;
            let l2 = (b - a).cross(p - a) / det;
            l1 >= -tol && l2 >= -tol && 1.0 - l1 - l2 >= -tol
        })
    }
}
