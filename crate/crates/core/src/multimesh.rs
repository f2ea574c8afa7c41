//! Cut topology of an ordered mesh stack.
//!
//! Part 0 is the background; each higher part is placed on top of the ones
//! below it. For every part this module computes
//!
//! * the visible region of each premesh cell (the cell minus all higher
//!   predomains), which decides the active cells;
//! * the interface facets: pieces of the visible boundary of a predomain,
//!   each paired with the upper cell it bounds and the lower cell it crosses;
//! * the overlap pieces: the hidden part of each active cell, split by the
//!   visible cells of the meshes above it.
//!
//! All pieces carry quadrature rules of a fixed order.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom2d::{
    clip_segment, convex_intersect, polyset_quadrature, segment_quadrature, ConvexPolygon, Point2, PolySet, QuadRule,
    Segment, REL_TOL,
};
use crate::geom2d::Aabb;
use crate::mesh::{BoundaryTag, CellBins, FeSpace, TriMesh};

/// Cells whose visible area is at most this fraction of the cell are inactive.
pub const ACTIVE_AREA_FRACTION: f64 = 1e-14;

/// One layer of the stack: a convex predomain, its premesh and space, and an
/// optional hole that is removed from the domain (and from every lower part).
#[derive(Clone, Debug)]
pub struct Part {
    pub predomain: ConvexPolygon,
    pub void: Option<ConvexPolygon>,
    pub space: FeSpace,
}

impl Part {
    pub fn new(predomain: ConvexPolygon, space: FeSpace) -> Self {
        Self {
            predomain,
            void: None,
            space,
        }
    }

    pub fn with_void(mut self, void: ConvexPolygon) -> Self {
        self.void = Some(void);
        self
    }

    pub fn mesh(&self) -> &TriMesh {
        self.space.mesh()
    }
}

#[derive(Clone, Debug)]
pub struct MultiMeshConfig {
    pub parts: Vec<Part>,
}

impl MultiMeshConfig {
    pub fn new(parts: Vec<Part>) -> Self {
        Self { parts }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let Some(bg) = self.parts.first() else {
            return bad("no parts".into());
        };
        let degree = bg.space.degree();
        for (i, part) in self.parts.iter().enumerate() {
            if part.space.degree() != degree {
                return bad(format!("part {i} has degree {} but part 0 has {degree}", part.space.degree()));
            }
            let tol = REL_TOL * part.predomain.scale();
            let expect = part.predomain.area() - part.void.as_ref().map_or(0.0, ConvexPolygon::area);
            let got = part.mesh().area();
            if (got - expect).abs() > 1e-12 * part.predomain.area() {
                return bad(format!("mesh {i} covers area {got}, predomain minus void has {expect}"));
            }
            if let Some(v) = &part.void {
                if !v.vertices().iter().all(|&p| part.predomain.contains_strict(p, tol)) {
                    return bad(format!("void of part {i} is not strictly inside its predomain"));
                }
            }
            if i > 0 && !part.predomain.vertices().iter().all(|&p| bg.predomain.contains_strict(p, tol)) {
                return bad(format!("predomain {i} must lie strictly inside the background domain"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellRef {
    pub mesh: usize,
    pub cell: usize,
}

impl CellRef {
    pub fn new(mesh: usize, cell: usize) -> Self {
        Self { mesh, cell }
    }
}

/// An active cell and its visible part.
#[derive(Clone, Debug)]
pub struct CutCell {
    pub mesh: usize,
    pub cell: usize,
    pub visible: PolySet,
    pub quad: QuadRule,
    /// The cell is not covered by anything above it.
    pub uncut: bool,
}

/// A piece of `Γ_i` bordering the visible region of a lower mesh `j`.
#[derive(Clone, Debug)]
pub struct InterfaceFacet {
    pub segment: Segment,
    pub upper: CellRef,
    pub lower: CellRef,
    /// Unit normal pointing out of the upper predomain.
    pub normal: Point2,
    pub quad: QuadRule,
}

/// A convex piece of `K ∩ L ∩ Ω_j` where `K` is an active cell of a lower
/// mesh `i` and `L` an active cell of mesh `j > i`.
#[derive(Clone, Debug)]
pub struct OverlapPiece {
    pub polygon: ConvexPolygon,
    pub lower: CellRef,
    pub upper: CellRef,
    pub quad: QuadRule,
}

#[derive(Debug)]
pub struct CutTopology {
    config: MultiMeshConfig,
    quad_order: usize,
    cut_cells: Vec<Vec<CutCell>>,
    active_index: Vec<Vec<Option<u32>>>,
    facets: Vec<InterfaceFacet>,
    overlaps: Vec<OverlapPiece>,
    delta: Vec<Vec<bool>>,
    n_o: usize,
    n_oi: Vec<usize>,
    gamma_len: Vec<f64>,
    bins: Vec<CellBins>,
}

/// Builds the complete cut topology with quadrature of order `quad_order`.
pub fn build_cut_topology(config: MultiMeshConfig, quad_order: usize) -> Result<CutTopology> {
    config.validate()?;
    // fail early on a bad order
    polyset_quadrature(&PolySet::empty(), quad_order)?;
    let parts = &config.parts;
    let n_parts = parts.len();
    let bins: Vec<CellBins> = parts.par_iter().map(|p| CellBins::new(p.mesh(), p.mesh().h())).collect();

    let mut cut_cells = Vec::with_capacity(n_parts);
    let mut active_index = Vec::with_capacity(n_parts);
    for i in 0..n_parts {
        let mesh = parts[i].mesh();
        let occluders: Vec<(&ConvexPolygon, Aabb)> = parts[i + 1..]
            .iter()
            .flat_map(|p| std::iter::once(&p.predomain).chain(p.void.as_ref()))
            .map(|q| (q, q.bbox()))
            .collect();
        let cells: Vec<Option<CutCell>> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| visible_cell(mesh, i, c, &occluders, quad_order))
            .collect::<Result<_>>()?;
        let mut index = vec![None; mesh.num_cells()];
        let mut active = Vec::new();
        for (c, cc) in cells.into_iter().enumerate() {
            if let Some(cc) = cc {
                index[c] = Some(active.len() as u32);
                active.push(cc);
            }
        }
        cut_cells.push(active);
        active_index.push(index);
    }

    let mut topo = CutTopology {
        config,
        quad_order,
        cut_cells,
        active_index,
        facets: Vec::new(),
        overlaps: Vec::new(),
        delta: Vec::new(),
        n_o: 1,
        n_oi: Vec::new(),
        gamma_len: Vec::new(),
        bins,
    };
    topo.facets = topo.build_facets()?;
    topo.overlaps = topo.build_overlaps()?;
    topo.gamma_len = (0..n_parts)
        .map(|i| topo.facets.iter().filter(|f| f.upper.mesh == i).map(|f| f.segment.length()).sum())
        .collect();
    let (delta, n_o, n_oi) = compute_delta_no(&topo);
    topo.delta = delta;
    topo.n_o = n_o;
    topo.n_oi = n_oi;
    Ok(topo)
}

fn visible_cell(
    mesh: &TriMesh,
    i: usize,
    c: usize,
    occluders: &[(&ConvexPolygon, Aabb)],
    order: usize,
) -> Result<Option<CutCell>> {
    let poly = mesh.cell_polygon(c);
    let bb = poly.bbox();
    let area = poly.area();
    let mut visible = PolySet::single(poly);
    let mut uncut = true;
    for (q, qbb) in occluders {
        if !bb.intersects(qbb, 0.0) {
            continue;
        }
        visible = visible.subtract(q);
        uncut = false;
        if visible.is_empty() {
            break;
        }
    }
    let vis_area = visible.area();
    if vis_area <= ACTIVE_AREA_FRACTION * area {
        return Ok(None);
    }
    if (vis_area - area).abs() <= 1e-14 * area && visible.pieces.len() == 1 {
        uncut = true;
    }
    let quad = polyset_quadrature(&visible, order)?;
    Ok(Some(CutCell {
        mesh: i,
        cell: c,
        visible,
        quad,
        uncut,
    }))
}

impl CutTopology {
    pub fn config(&self) -> &MultiMeshConfig {
        &self.config
    }

    pub fn parts(&self) -> &[Part] {
        &self.config.parts
    }

    pub fn num_meshes(&self) -> usize {
        self.config.parts.len()
    }

    pub fn space(&self, i: usize) -> &FeSpace {
        &self.config.parts[i].space
    }

    pub fn degree(&self) -> usize {
        self.space(0).degree()
    }

    /// Mesh parameter `h_i`.
    pub fn h(&self, i: usize) -> f64 {
        self.config.parts[i].mesh().h()
    }

    pub fn quad_order(&self) -> usize {
        self.quad_order
    }

    /// Active cells of mesh `i`, in cell order.
    pub fn cut_cells(&self, i: usize) -> &[CutCell] {
        &self.cut_cells[i]
    }

    pub fn cut_cell(&self, r: CellRef) -> Option<&CutCell> {
        self.active_index[r.mesh][r.cell].map(|k| &self.cut_cells[r.mesh][k as usize])
    }

    pub fn is_active(&self, r: CellRef) -> bool {
        self.active_index[r.mesh][r.cell].is_some()
    }

    pub fn facets(&self) -> &[InterfaceFacet] {
        &self.facets
    }

    pub fn overlaps(&self) -> &[OverlapPiece] {
        &self.overlaps
    }

    /// Overlap indicator for `i < j`; `δ_ii = 1`; zero below the diagonal.
    pub fn delta(&self, i: usize, j: usize) -> bool {
        self.delta[i][j]
    }

    pub fn delta_matrix(&self) -> &[Vec<bool>] {
        &self.delta
    }

    /// Maximum number of overlaps `N_O`.
    pub fn n_o(&self) -> usize {
        self.n_o
    }

    /// Number of meshes below mesh `i` that it overlaps, `N_{O_i}`.
    pub fn n_oi(&self) -> &[usize] {
        &self.n_oi
    }

    /// Interface length `|Γ_i|` (zero for the background).
    pub fn gamma_len(&self) -> &[f64] {
        &self.gamma_len
    }

    pub fn bins(&self, i: usize) -> &CellBins {
        &self.bins[i]
    }

    /// Total visible area per mesh.
    pub fn visible_areas(&self) -> Vec<f64> {
        self.cut_cells.iter().map(|cs| cs.iter().map(|c| c.visible.area()).sum()).collect()
    }

    /// Area of the composite domain: background minus all holes.
    pub fn domain_area(&self) -> f64 {
        self.config.parts[0].predomain.area()
            - self.config.parts.iter().filter_map(|p| p.void.as_ref()).map(ConvexPolygon::area).sum::<f64>()
    }

    /// Topmost mesh whose visible region contains `x`, and a cell of that
    /// mesh containing `x`. Points on a predomain boundary go to the higher
    /// mesh; points strictly inside a hole are not found.
    pub fn point_locate(&self, x: Point2) -> Result<CellRef> {
        let not_found = Error::PointNotFound { x: x.x, y: x.y };
        for (i, part) in self.config.parts.iter().enumerate().rev() {
            let tol = REL_TOL * part.predomain.scale();
            if !part.predomain.contains(x, tol) {
                continue;
            }
            if part.void.as_ref().is_some_and(|v| v.contains_strict(x, tol)) {
                return Err(not_found);
            }
            let mesh = part.mesh();
            let cands = self.bins[i].query(&Aabb { min: x, max: x });
            let inside = |&c: &usize| {
                let l = crate::mesh::CellMap::new(mesh.cell_vertices(c)).barycentric(x);
                l.iter().all(|&v| v >= -1e-12)
            };
            let mut containing = cands.iter().copied().filter(|c| inside(c));
            let first = containing.next();
            let best = std::iter::once(first)
                .flatten()
                .chain(containing)
                .find(|&c| self.is_active(CellRef::new(i, c)))
                .or(first);
            return best.map(|c| CellRef::new(i, c)).ok_or(not_found);
        }
        Err(not_found)
    }

    fn build_facets(&self) -> Result<Vec<InterfaceFacet>> {
        let parts = &self.config.parts;
        let mut all = Vec::new();
        for i in 1..parts.len() {
            let mesh = parts[i].mesh();
            let pre = &parts[i].predomain;
            let h_tol = REL_TOL * mesh.h();
            let boundary: Vec<_> = mesh
                .boundary_facets()
                .iter()
                .filter(|f| f.tag == BoundaryTag::Outer)
                .copied()
                .collect();
            let facets: Vec<Vec<InterfaceFacet>> = boundary
                .par_iter()
                .map(|bf| -> Result<Vec<InterfaceFacet>> {
                    let seg = mesh.facet_segment(bf);
                    let upper = CellRef::new(i, bf.cell);
                    let mut out = Vec::new();
                    if !self.is_active(upper) {
                        return Ok(out);
                    }
                    let normal = outward_normal(pre, &seg);
                    let mut visible = vec![seg];
                    for higher in &parts[i + 1..] {
                        visible = visible.iter().flat_map(|s| clip_segment(s, &higher.predomain, false)).collect();
                    }
                    let mut remaining = visible;
                    for j in (0..i).rev() {
                        if remaining.is_empty() {
                            break;
                        }
                        let lower_dom = &parts[j].predomain;
                        let mut rest = Vec::new();
                        for s in &remaining {
                            for piece in clip_segment(s, lower_dom, true) {
                                self.split_by_lower_cells(&piece, j, normal, upper, h_tol, &mut out)?;
                            }
                            rest.extend(clip_segment(s, lower_dom, false));
                        }
                        remaining = rest;
                    }
                    Ok(out)
                })
                .collect::<Result<_>>()?;
            all.extend(facets.into_iter().flatten());
        }
        all.sort_by(|a, b| {
            (a.upper, a.lower)
                .cmp(&(b.upper, b.lower))
                .then_with(|| a.segment.a.lex_cmp(&b.segment.a))
                .then_with(|| a.segment.b.lex_cmp(&b.segment.b))
        });
        Ok(all)
    }

    fn split_by_lower_cells(
        &self,
        s: &Segment,
        j: usize,
        normal: Point2,
        upper: CellRef,
        h_tol: f64,
        out: &mut Vec<InterfaceFacet>,
    ) -> Result<()> {
        let mesh = self.config.parts[j].mesh();
        let tol = REL_TOL * mesh.h();
        for c in self.bins[j].query(&s.bbox()) {
            let poly = mesh.cell_polygon(c);
            let v = poly.vertices();
            // a segment running along an edge of this cell belongs to the cell
            // on the far side of the upper predomain, where mesh j is visible
            let mut along_edge = None;
            for k in 0..3 {
                let e = Segment::new(v[k], v[(k + 1) % 3]);
                if line_distance(&e, s.a) <= tol && line_distance(&e, s.b) <= tol {
                    along_edge = Some((v[(k + 2) % 3] - s.a).dot(normal) > 0.0);
                }
            }
            if along_edge == Some(false) {
                continue;
            }
            for piece in clip_segment(s, &poly, true) {
                if piece.length() <= h_tol {
                    continue;
                }
                let lower = CellRef::new(j, c);
                if !self.is_active(lower) {
                    log::warn!("interface piece of length {:e} falls on inactive cell {lower:?}; dropped", piece.length());
                    continue;
                }
                out.push(InterfaceFacet {
                    segment: piece,
                    upper,
                    lower,
                    normal,
                    quad: segment_quadrature(&piece, self.quad_order)?,
                });
            }
        }
        Ok(())
    }

    fn build_overlaps(&self) -> Result<Vec<OverlapPiece>> {
        let parts = &self.config.parts;
        let mut all = Vec::new();
        for i in 0..parts.len() {
            let mesh = parts[i].mesh();
            let pieces: Vec<Vec<OverlapPiece>> = self.cut_cells[i]
                .par_iter()
                .filter(|cc| !cc.uncut)
                .map(|cc| -> Result<Vec<OverlapPiece>> {
                    let k_poly = mesh.cell_polygon(cc.cell);
                    let kbb = k_poly.bbox();
                    let mut out = Vec::new();
                    for (j, upper_part) in parts.iter().enumerate().skip(i + 1) {
                        if !kbb.intersects(&upper_part.predomain.bbox(), 0.0) {
                            continue;
                        }
                        for l in self.bins[j].query(&kbb) {
                            let Some(upper) = self.cut_cell(CellRef::new(j, l)) else {
                                continue;
                            };
                            for vis in &upper.visible.pieces {
                                for polygon in convex_intersect(&k_poly, vis).pieces {
                                    let quad = polyset_quadrature(&PolySet::single(polygon.clone()), self.quad_order)?;
                                    out.push(OverlapPiece {
                                        polygon,
                                        lower: CellRef::new(i, cc.cell),
                                        upper: CellRef::new(j, l),
                                        quad,
                                    });
                                }
                            }
                        }
                    }
                    Ok(out)
                })
                .collect::<Result<_>>()?;
            all.extend(pieces.into_iter().flatten());
        }
        all.sort_by(|a, b| {
            (a.lower, a.upper)
                .cmp(&(b.lower, b.upper))
                .then_with(|| a.polygon.centroid().lex_cmp(&b.polygon.centroid()))
        });
        Ok(all)
    }

    /// Writes the facet and overlap tables as CSV for geometric regression
    /// checks.
    pub fn write_debug_csv<W1: Write, W2: Write>(&self, mut facets: W1, mut overlaps: W2) -> Result<()> {
        writeln!(facets, "i,j,ax,ay,bx,by,nx,ny")?;
        for f in &self.facets {
            let (a, b, n) = (f.segment.a, f.segment.b, f.normal);
            writeln!(
                facets,
                "{},{},{:e},{:e},{:e},{:e},{:e},{:e}",
                f.upper.mesh, f.lower.mesh, a.x, a.y, b.x, b.y, n.x, n.y
            )?;
        }
        writeln!(overlaps, "i,j,area,cx,cy")?;
        for o in &self.overlaps {
            let c = o.polygon.centroid();
            writeln!(overlaps, "{},{},{:e},{:e},{:e}", o.lower.mesh, o.upper.mesh, o.polygon.area(), c.x, c.y)?;
        }
        Ok(())
    }
}

fn line_distance(e: &Segment, p: Point2) -> f64 {
    let d = e.b - e.a;
    (d.cross(p - e.a) / d.norm()).abs()
}

/// Outward normal of the predomain edge closest to the segment midpoint.
fn outward_normal(pre: &ConvexPolygon, s: &Segment) -> Point2 {
    let m = s.midpoint();
    let (k, _) = pre
        .edges()
        .enumerate()
        .map(|(k, e)| (k, e.distance_to(m)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
        .expect("polygon has edges");
    pre.edge_normal(k)
}

/// Overlap indicator, `N_O` and `N_{O_i}` from the overlap pieces.
pub fn compute_delta_no(topo: &CutTopology) -> (Vec<Vec<bool>>, usize, Vec<usize>) {
    let n = topo.num_meshes();
    let mut area = vec![vec![0.0; n]; n];
    for o in topo.overlaps() {
        area[o.lower.mesh][o.upper.mesh] += o.polygon.area();
    }
    let mut delta = vec![vec![false; n]; n];
    for i in 0..n {
        delta[i][i] = true;
        for j in i + 1..n {
            delta[i][j] = area[i][j] > 0.0;
        }
    }
    let row_max = (0..n).map(|i| (0..n).filter(|&j| delta[i][j]).count()).max().unwrap_or(0);
    let col_max = (0..n).map(|j| (0..n).filter(|&i| delta[i][j]).count()).max().unwrap_or(0);
    let n_oi = (0..n).map(|i| (0..i).filter(|&j| delta[j][i]).count()).collect();
    (delta, row_max.max(col_max), n_oi)
}
