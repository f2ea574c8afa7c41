use serde::{Deserialize, Serialize};

use super::{Aabb, Point2, Segment, AREA_TOL, REL_TOL};
use crate::error::{Error, Result};

/// A strictly convex polygon with counterclockwise vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
}

impl ConvexPolygon {
    /// Validates and normalizes a vertex loop. Clockwise input is reversed;
    /// duplicate and collinear vertices are removed.
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite vertex".into()));
        }
        if vertices.len() < 3 {
            return Err(Error::InvalidGeometry(format!("{} vertices, need at least 3", vertices.len())));
        }
        let scale = Aabb::from_points(vertices.iter().copied()).diameter();
        let mut v = vertices;
        if signed_area(&v) < 0.0 {
            v.reverse();
        }
        let tol = REL_TOL * scale;
        let v = simplify(v, tol);
        if v.len() < 3 || signed_area(&v) <= AREA_TOL * scale * scale {
            return Err(Error::InvalidGeometry("degenerate polygon (zero area)".into()));
        }
        let n = v.len();
        for i in 0..n {
            let (a, b, c) = (v[i], v[(i + 1) % n], v[(i + 2) % n]);
            if (b - a).cross(c - b) < -tol * (c - a).norm() {
                return Err(Error::InvalidGeometry("polygon is not convex".into()));
            }
        }
        Ok(Self { vertices: v })
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::InvalidGeometry(format!("empty rectangle [{x0}, {x1}] x [{y0}, {y1}]")));
        }
        Self::new(vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ])
    }

    /// Regular `n`-gon with the given inradius. The first edge midpoint sits at
    /// angle `phase` (radians) from the center.
    pub fn regular(center: Point2, inradius: f64, n: usize, phase: f64) -> Result<Self> {
        if n < 3 || inradius <= 0.0 {
            return Err(Error::InvalidGeometry(format!("regular polygon n={n}, inradius={inradius}")));
        }
        let half = std::f64::consts::PI / n as f64;
        let r = inradius / half.cos();
        let verts = (0..n)
            .map(|k| {
                let a = phase - half + 2.0 * half * k as f64;
                center + Point2::new(r * a.cos(), r * a.sin())
            })
            .collect();
        Self::new(verts)
    }

    pub(crate) fn from_clean(vertices: Vec<Point2>) -> Self {
        Self { vertices }
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn centroid(&self) -> Point2 {
        let o = self.vertices[0];
        let mut c = Point2::default();
        let mut a_tot = 0.0;
        for w in self.vertices[1..].windows(2) {
            let a = 0.5 * (w[0] - o).cross(w[1] - o);
            c += (o + w[0] + w[1]) * (a / 3.0);
            a_tot += a;
        }
        c * (1.0 / a_tot)
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|s| s.length()).sum()
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter().copied())
    }

    /// Diameter of the bounding box; the local length scale for tolerances.
    pub fn scale(&self) -> f64 {
        self.bbox().diameter()
    }

    /// Edges in counterclockwise order.
    pub fn edges(&self) -> impl Iterator<Item = Segment> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| Segment::new(self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Closed containment: points within `tol` of the boundary count as inside.
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        self.edges().all(|e| edge_side(e.a, e.b, p) >= -tol)
    }

    /// Open containment: points within `tol` of the boundary count as outside.
    pub fn contains_strict(&self, p: Point2, tol: f64) -> bool {
        self.edges().all(|e| edge_side(e.a, e.b, p) > tol)
    }

    pub fn distance_to_boundary(&self, p: Point2) -> f64 {
        self.edges().map(|e| e.distance_to(p)).fold(f64::INFINITY, f64::min)
    }

    /// Outward unit normal of edge `i`.
    pub fn edge_normal(&self, i: usize) -> Point2 {
        let n = self.vertices.len();
        let d = self.vertices[(i + 1) % n] - self.vertices[i];
        Point2::new(d.y, -d.x) * (1.0 / d.norm())
    }

    /// Mitered outward offset by `width`.
    pub fn offset(&self, width: f64) -> Result<Self> {
        if width <= 0.0 {
            return Err(Error::InvalidGeometry(format!("offset width {width} must be positive")));
        }
        let n = self.vertices.len();
        let verts = (0..n)
            .map(|k| {
                let n0 = self.edge_normal((k + n - 1) % n);
                let n1 = self.edge_normal(k);
                self.vertices[k] + (n0 + n1) * (width / (1.0 + n0.dot(n1)))
            })
            .collect();
        Self::new(verts)
    }

    pub fn transformed(&self, f: impl Fn(Point2) -> Point2) -> Result<Self> {
        Self::new(self.vertices.iter().map(|&p| f(p)).collect())
    }
}

/// A union of pairwise interior-disjoint convex polygons.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolySet {
    pub pieces: Vec<ConvexPolygon>,
}

impl PolySet {
    pub fn empty() -> Self {
        Self { pieces: Vec::new() }
    }

    pub fn single(p: ConvexPolygon) -> Self {
        Self { pieces: vec![p] }
    }

    pub fn area(&self) -> f64 {
        self.pieces.iter().map(ConvexPolygon::area).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn bbox(&self) -> Option<Aabb> {
        self.pieces.iter().map(ConvexPolygon::bbox).reduce(|a, b| a.union(&b))
    }

    /// `self \ q`, keeping every piece convex.
    pub fn subtract(&self, q: &ConvexPolygon) -> PolySet {
        PolySet {
            pieces: self.pieces.iter().flat_map(|p| convex_difference(p, q).pieces).collect(),
        }
    }

    pub fn intersect(&self, q: &ConvexPolygon) -> PolySet {
        PolySet {
            pieces: self.pieces.iter().flat_map(|p| convex_intersect(p, q).pieces).collect(),
        }
    }

    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        self.pieces.iter().any(|q| q.contains(p, tol))
    }
}

fn signed_area(v: &[Point2]) -> f64 {
    let n = v.len();
    if n < 3 {
        return 0.0;
    }
    let o = v[0];
    let mut a = 0.0;
    for i in 1..n - 1 {
        a += (v[i] - o).cross(v[i + 1] - o);
    }
    0.5 * a
}

/// Signed distance of `p` from the line through `a -> b`; positive on the left.
#[inline]
fn edge_side(a: Point2, b: Point2, p: Point2) -> f64 {
    let d = b - a;
    d.cross(p - a) / d.norm()
}

/// Drops near-duplicate and collinear vertices of a closed loop.
fn simplify(mut v: Vec<Point2>, tol: f64) -> Vec<Point2> {
    let mut changed = true;
    while changed && v.len() >= 3 {
        changed = false;
        let n = v.len();
        for i in 0..n {
            let (p, q) = (v[(i + n - 1) % n], v[i]);
            if p.dist(q) <= tol {
                v.remove(i);
                changed = true;
                break;
            }
            let r = v[(i + 1) % n];
            let base = r - p;
            let len = base.norm();
            if len <= tol || base.cross(q - p).abs() <= tol * len {
                v.remove(i);
                changed = true;
                break;
            }
        }
    }
    v
}

/// Sutherland-Hodgman step against the line `a -> b`. Keeps the left side
/// when `keep_left`, the right side otherwise; boundary points are kept.
fn clip_half_plane(poly: &[Point2], a: Point2, b: Point2, keep_left: bool, tol: f64) -> Vec<Point2> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    if n == 0 {
        return out;
    }
    let sgn = if keep_left { 1.0 } else { -1.0 };
    let side: Vec<f64> = poly.iter().map(|&p| sgn * edge_side(a, b, p)).collect();
    for i in 0..n {
        let j = (i + 1) % n;
        let (p, q) = (poly[i], poly[j]);
        let (sp, sq) = (side[i], side[j]);
        let p_in = sp >= -tol;
        let q_in = sq >= -tol;
        if p_in {
            out.push(p);
        }
        if p_in != q_in {
            let t = sp / (sp - sq);
            out.push(p.lerp(q, t.clamp(0.0, 1.0)));
        }
    }
    out
}

fn finish(v: Vec<Point2>, scale: f64) -> Option<ConvexPolygon> {
    let v = simplify(v, REL_TOL * scale);
    if v.len() < 3 {
        return None;
    }
    let a = signed_area(&v);
    (a > AREA_TOL * scale * scale).then(|| ConvexPolygon::from_clean(v))
}

/// `p ∩ q` as a set of at most one convex piece.
pub fn convex_intersect(p: &ConvexPolygon, q: &ConvexPolygon) -> PolySet {
    let scale = p.scale().min(q.scale());
    let tol = REL_TOL * scale;
    if !p.bbox().intersects(&q.bbox(), tol) {
        return PolySet::empty();
    }
    let mut cur = p.vertices.clone();
    for e in q.edges() {
        cur = clip_half_plane(&cur, e.a, e.b, true, tol);
        if cur.len() < 3 {
            return PolySet::empty();
        }
    }
    match finish(cur, scale) {
        Some(poly) => PolySet::single(poly),
        None => PolySet::empty(),
    }
}

/// Convex decomposition of `p \ q`, obtained by peeling off the part of `p`
/// outside each edge of `q` in turn.
pub fn convex_difference(p: &ConvexPolygon, q: &ConvexPolygon) -> PolySet {
    let scale = p.scale().min(q.scale());
    let tol = REL_TOL * scale;
    if !p.bbox().intersects(&q.bbox(), tol) {
        return PolySet::single(p.clone());
    }
    let mut pieces = Vec::new();
    let mut rest = p.vertices.clone();
    for e in q.edges() {
        let outside = clip_half_plane(&rest, e.a, e.b, false, tol);
        if let Some(piece) = finish(outside, scale) {
            pieces.push(piece);
        }
        rest = clip_half_plane(&rest, e.a, e.b, true, tol);
        if rest.len() < 3 {
            break;
        }
    }
    if finish(rest, scale).is_none() {
        // p and q only touch: leave p whole instead of fragmenting it
        return PolySet::single(p.clone());
    }
    PolySet { pieces }
}

/// Parts of `s` inside (`keep_inside`) or outside `q`. Portions lying on the
/// boundary of `q` count as inside, so the two results always partition `s`.
pub fn clip_segment(s: &Segment, q: &ConvexPolygon, keep_inside: bool) -> Vec<Segment> {
    let len = s.length();
    let scale = len.min(q.scale());
    let tol = REL_TOL * scale;
    let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
    let mut empty = !s.bbox().intersects(&q.bbox(), tol);
    if !empty {
        for e in q.edges() {
            let sa = edge_side(e.a, e.b, s.a);
            let sb = edge_side(e.a, e.b, s.b);
            if sa >= -tol && sb >= -tol {
                continue;
            }
            if sa < -tol && sb < -tol {
                empty = true;
                break;
            }
            let t = sa / (sa - sb);
            if sa < sb {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
            if t0 >= t1 {
                empty = true;
                break;
            }
        }
    }
    let min_t = tol / len.max(f64::MIN_POSITIVE);
    if !empty {
        t0 = t0.clamp(0.0, 1.0);
        t1 = t1.clamp(0.0, 1.0);
        if t0 < min_t {
            t0 = 0.0;
        }
        if t1 > 1.0 - min_t {
            t1 = 1.0;
        }
        if t1 - t0 <= min_t {
            empty = true;
        }
    }
    let sub = |a: f64, b: f64| Segment::new(if a == 0.0 { s.a } else { s.at(a) }, if b == 1.0 { s.b } else { s.at(b) });
    if keep_inside {
        if empty {
            Vec::new()
        } else {
            vec![sub(t0, t1)]
        }
    } else if empty {
        vec![*s]
    } else {
        let mut out = Vec::new();
        if t0 > 0.0 {
            out.push(sub(0.0, t0));
        }
        if t1 < 1.0 {
            out.push(sub(t1, 1.0));
        }
        out
    }
}

/// Rectangle `[x0, x1] x [y0, y1]` rotated by `angle_deg` about `center`
/// (its own centroid when `None`).
pub fn rotate_rect(bounds: (f64, f64, f64, f64), angle_deg: f64, center: Option<Point2>) -> Result<ConvexPolygon> {
    let (x0, x1, y0, y1) = bounds;
    let rect = ConvexPolygon::rectangle(x0, x1, y0, y1)?;
    let c = center.unwrap_or(Point2::new(0.5 * (x0 + x1), 0.5 * (y0 + y1)));
    let angle = angle_deg.to_radians();
    rect.transformed(|p| p.rotate_about(c, angle))
}
