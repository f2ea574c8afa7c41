use super::TriMesh;
use crate::error::{Error, Result};
use crate::geom2d::{ConvexPolygon, Point2};

/// Structured triangulation of a (possibly rotated) rectangle: an `nx x ny`
/// grid of quadrilaterals, each split along the same diagonal.
///
/// `nx = ceil(L1 / target_h)` and `ny = ceil(L2 / target_h)`, so every grid
/// cell has sides no longer than `target_h` and the mesh is uniform.
pub fn build_structured_mesh(rect: &ConvexPolygon, target_h: f64) -> Result<TriMesh> {
    if !(target_h > 0.0) {
        return Err(Error::InvalidParameter(format!("target_h = {target_h} must be positive")));
    }
    let v = rect.vertices();
    if v.len() != 4 {
        return Err(Error::InvalidGeometry(format!("expected a rectangle, got {} vertices", v.len())));
    }
    let e1 = v[1] - v[0];
    let e2 = v[3] - v[0];
    if e1.dot(e2).abs() > 1e-10 * e1.norm() * e2.norm() || (v[2] - v[1] - e2).norm() > 1e-10 * e2.norm() {
        return Err(Error::InvalidGeometry("polygon is not a rectangle".into()));
    }
    let (l1, l2) = (e1.norm(), e2.norm());
    if target_h > l1.max(l2) {
        log::warn!("target_h {target_h} exceeds rectangle extent {}; using a single cell pair", l1.max(l2));
    }
    let nx = ((l1 / target_h) - 1e-9).ceil().max(1.0) as usize;
    let ny = ((l2 / target_h) - 1e-9).ceil().max(1.0) as usize;

    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let t = j as f64 / ny as f64;
        for i in 0..=nx {
            let s = i as f64 / nx as f64;
            nodes.push(bilinear(v[0], v[1], v[2], v[3], s, t));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            cells.push([a, b, c]);
            cells.push([a, c, d]);
        }
    }
    TriMesh::new(nodes, cells)
}

/// Corner-exact bilinear map of the unit square onto the quadrilateral
/// `p00, p10, p11, p01`.
fn bilinear(p00: Point2, p10: Point2, p11: Point2, p01: Point2, s: f64, t: f64) -> Point2 {
    p00 * ((1.0 - s) * (1.0 - t)) + p10 * (s * (1.0 - t)) + p11 * (s * t) + p01 * ((1.0 - s) * t)
}

/// Annular band between `inner` and its mitered outward offset by `width`.
/// Each edge strip is a trapezoid meshed with `ceil(width / target_h)` layers
/// across and `ceil(len / target_h)` columns along; strips share the radial
/// node lines through the polygon corners. The inner loop is tagged
/// [`super::BoundaryTag::Inner`].
pub fn build_band_mesh(inner: &ConvexPolygon, width: f64, target_h: f64) -> Result<TriMesh> {
    if !(width > 0.0) {
        return Err(Error::InvalidParameter(format!("band width {width} must be positive")));
    }
    if !(target_h > 0.0) {
        return Err(Error::InvalidParameter(format!("target_h = {target_h} must be positive")));
    }
    let outer = inner.offset(width)?;
    let (vi, vo) = (inner.vertices(), outer.vertices());
    let n = vi.len();
    let layers = ((width / target_h) - 1e-9).ceil().max(1.0) as usize;

    let mut nodes = Vec::new();
    // radial[k][r]: node on the corner line k at layer r
    let mut radial = vec![Vec::with_capacity(layers + 1); n];
    for k in 0..n {
        for r in 0..=layers {
            radial[k].push(nodes.len());
            nodes.push(vi[k].lerp(vo[k], r as f64 / layers as f64));
        }
    }
    let mut cells = Vec::new();
    for k in 0..n {
        let k1 = (k + 1) % n;
        let len = vo[k].dist(vo[k1]);
        let cols = ((len / target_h) - 1e-9).ceil().max(1.0) as usize;
        // grid[i][r] for columns 0..=cols along the edge
        let mut grid: Vec<Vec<usize>> = Vec::with_capacity(cols + 1);
        grid.push(radial[k].clone());
        for i in 1..cols {
            let s = i as f64 / cols as f64;
            let col = (0..=layers)
                .map(|r| {
                    nodes.push(bilinear(vi[k], vi[k1], vo[k1], vo[k], s, r as f64 / layers as f64));
                    nodes.len() - 1
                })
                .collect();
            grid.push(col);
        }
        grid.push(radial[k1].clone());
        for i in 0..cols {
            for r in 0..layers {
                let (a, b, c, d) = (grid[i][r], grid[i + 1][r], grid[i + 1][r + 1], grid[i][r + 1]);
                // (along, outward) is a left-handed frame: reverse the quad
                cells.push([a, c, b]);
                cells.push([a, d, c]);
            }
        }
    }
    TriMesh::new(nodes, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom2d::rotate_rect;
    use crate::mesh::BoundaryTag;
    use std::collections::HashMap;

    fn interior_edges_shared_twice(m: &TriMesh) -> bool {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in m.cells() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let boundary = count.values().filter(|&&c| c == 1).count();
        count.values().all(|&c| c <= 2) && boundary == m.boundary_facets().len()
    }

    #[test]
    fn unit_square_counts() {
        let sq = ConvexPolygon::rectangle(0.0, 1.0, 0.0, 1.0).unwrap();
        let m = build_structured_mesh(&sq, 0.125).unwrap();
        assert_eq!(m.num_cells(), 128);
        assert!((m.h() - 2f64.sqrt() / 8.0).abs() < 1e-15);
        assert!(m.uniformity_ratio() <= 2.0);
        assert!(interior_edges_shared_twice(&m));
        let coarse = build_structured_mesh(&sq, 1.0).unwrap();
        assert_eq!(coarse.num_cells(), 2);
        assert_eq!(build_structured_mesh(&sq, 5.0).unwrap().num_cells(), 2);
        assert!(build_structured_mesh(&sq, 0.0).is_err());
    }

    #[test]
    fn area_is_conserved() {
        let r = rotate_rect((0.2, 0.8, 0.2, 0.8), 0.0, None).unwrap();
        let m = build_structured_mesh(&r, 0.075).unwrap();
        assert!((m.area() - 0.36).abs() < 1e-12 * 0.36);
        assert!(m.h() <= 2f64.sqrt() * 0.075 * (1.0 + 1e-12));
        let r = rotate_rect((0.3, 0.5, 0.05, 0.8), 44.0, None).unwrap();
        let m = build_structured_mesh(&r, 1.0 / 32.0).unwrap();
        assert!((m.area() - r.area()).abs() < 1e-12 * r.area());
        assert!(m.h() <= 2f64.sqrt() / 32.0 + 1e-15);
    }

    #[test]
    fn band_area_and_loops() {
        let hex = ConvexPolygon::regular(Point2::new(0.5, 0.5), 0.15, 6, 0.0).unwrap();
        let m = build_band_mesh(&hex, 0.1, 0.05).unwrap();
        let expect = hex.offset(0.1).unwrap().area() - hex.area();
        assert!((m.area() - expect).abs() < 1e-10);
        assert!(interior_edges_shared_twice(&m));
        let loops = m.boundary_loops();
        assert_eq!(loops.len(), 2);
        let tags: Vec<_> = loops.iter().map(|l| l.0).collect();
        assert!(tags.contains(&BoundaryTag::Outer) && tags.contains(&BoundaryTag::Inner));
        for f in m.boundary_facets().iter().filter(|f| f.tag == BoundaryTag::Inner) {
            assert!(hex.distance_to_boundary(m.facet_segment(f).midpoint()) < 1e-12);
        }
    }

    #[test]
    fn band_single_layer() {
        let hex = ConvexPolygon::regular(Point2::new(0.5, 0.5), 0.15, 6, 0.0).unwrap();
        let m = build_band_mesh(&hex, 0.1, 0.1).unwrap();
        // one layer: every cell touches both the inner and the outer loop
        let inner = hex;
        let outer = inner.offset(0.1).unwrap();
        for c in 0..m.num_cells() {
            let v = m.cell_vertices(c);
            assert!(v.iter().any(|&p| inner.distance_to_boundary(p) < 1e-12));
            assert!(v.iter().any(|&p| outer.distance_to_boundary(p) < 1e-12));
        }
        assert!(build_band_mesh(&inner, 0.0, 0.1).is_err());
    }
}
