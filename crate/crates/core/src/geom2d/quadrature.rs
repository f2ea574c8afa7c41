use super::{ConvexPolygon, Point2, PolySet, Segment};
use crate::error::{Error, Result};

/// Quadrature points in physical coordinates with area (or length) weights.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuadRule {
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(Point2) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point2, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    fn extend(&mut self, other: QuadRule) {
        self.points.extend(other.points);
        self.weights.extend(other.weights);
    }
}

// Symmetric rules on the reference triangle, barycentric coordinates with
// weights normalized to sum to one. All weights are positive.
const S2_DEG4: [(f64, f64); 2] = [
    (0.445_948_490_915_964_886_32, 0.223_381_589_678_011_465_7),
    (0.091_576_213_509_770_743_46, 0.109_951_743_655_321_867_64),
];
const S2_DEG5: [(f64, f64); 2] = [
    (0.470_142_064_105_115_089_77, 0.132_394_152_788_506_180_74),
    (0.101_286_507_323_456_338_8, 0.125_939_180_544_827_152_6),
];
const S2_DEG6: [(f64, f64); 2] = [
    (0.249_286_745_170_910_421_29, 0.116_786_275_726_379_366_03),
    (0.063_089_014_491_502_228_34, 0.050_844_906_370_206_816_921),
];
const S3_DEG6: (f64, f64, f64) = (
    0.053_145_049_844_816_947_353,
    0.310_352_451_033_784_405_42,
    0.082_851_075_618_373_575_194,
);

fn reference_rule(order: usize) -> Result<Vec<([f64; 3], f64)>> {
    let mut rule = Vec::new();
    let s2 = |a: f64, w: f64, rule: &mut Vec<([f64; 3], f64)>| {
        let b = 1.0 - 2.0 * a;
        rule.push(([a, a, b], w));
        rule.push(([a, b, a], w));
        rule.push(([b, a, a], w));
    };
    match order {
        1 => rule.push(([1.0 / 3.0; 3], 1.0)),
        2 => s2(1.0 / 6.0, 1.0 / 3.0, &mut rule),
        3 | 4 => S2_DEG4.iter().for_each(|&(a, w)| s2(a, w, &mut rule)),
        5 => {
            rule.push(([1.0 / 3.0; 3], 0.225));
            S2_DEG5.iter().for_each(|&(a, w)| s2(a, w, &mut rule));
        }
        6 => {
            S2_DEG6.iter().for_each(|&(a, w)| s2(a, w, &mut rule));
            let (a, b, w) = S3_DEG6;
            let c = 1.0 - a - b;
            for l in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                rule.push((l, w));
            }
        }
        _ => return Err(Error::UnsupportedOrder(order)),
    }
    Ok(rule)
}

/// Rule exact for polynomials of total degree `<= order` on triangle `t`.
pub fn triangle_quadrature(t: [Point2; 3], order: usize) -> Result<QuadRule> {
    let area = 0.5 * (t[1] - t[0]).cross(t[2] - t[0]);
    let reference = reference_rule(order)?;
    let mut q = QuadRule {
        points: Vec::with_capacity(reference.len()),
        weights: Vec::with_capacity(reference.len()),
    };
    for (l, w) in reference {
        q.points.push(Point2::new(
            l[0] * t[0].x + l[1] * t[1].x + l[2] * t[2].x,
            l[0] * t[0].y + l[1] * t[1].y + l[2] * t[2].y,
        ));
        q.weights.push(w * area);
    }
    Ok(q)
}

/// Fan-triangulates every piece from its first vertex and maps the reference
/// rule onto each triangle.
pub fn polyset_quadrature(s: &PolySet, order: usize) -> Result<QuadRule> {
    let mut q = QuadRule::default();
    for piece in &s.pieces {
        q.extend(polygon_quadrature(piece, order)?);
    }
    if s.pieces.is_empty() {
        reference_rule(order)?;
    }
    Ok(q)
}

pub(crate) fn polygon_quadrature(p: &ConvexPolygon, order: usize) -> Result<QuadRule> {
    let v = p.vertices();
    let mut q = QuadRule::default();
    for w in v[1..].windows(2) {
        q.extend(triangle_quadrature([v[0], w[0], w[1]], order)?);
    }
    Ok(q)
}

/// Gauss-Legendre nodes and weights on `[0, 1]` with `n` points (1..=4).
pub fn gauss_legendre_unit(n: usize) -> Result<Vec<(f64, f64)>> {
    let sym = |t: f64, w: f64| [(0.5 - 0.5 * t, 0.5 * w), (0.5 + 0.5 * t, 0.5 * w)];
    let rule = match n {
        1 => vec![(0.5, 1.0)],
        2 => sym((1.0f64 / 3.0).sqrt(), 1.0).to_vec(),
        3 => {
            let mut r = sym((0.6f64).sqrt(), 5.0 / 9.0).to_vec();
            r.insert(1, (0.5, 4.0 / 9.0));
            r
        }
        4 => {
            let s = (6.0f64 / 5.0).sqrt();
            let inner = (3.0 / 7.0 - 2.0 / 7.0 * s).sqrt();
            let outer = (3.0 / 7.0 + 2.0 / 7.0 * s).sqrt();
            let w_inner = (18.0 + 30f64.sqrt()) / 36.0;
            let w_outer = (18.0 - 30f64.sqrt()) / 36.0;
            let [o0, o1] = sym(outer, w_outer);
            let [i0, i1] = sym(inner, w_inner);
            vec![o0, i0, i1, o1]
        }
        _ => return Err(Error::UnsupportedOrder(2 * n - 1)),
    };
    Ok(rule)
}

/// Line rule exact for polynomials of degree `<= order` along `s`.
pub fn segment_quadrature(s: &Segment, order: usize) -> Result<QuadRule> {
    if !(1..=6).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    let len = s.length();
    let rule = gauss_legendre_unit(order / 2 + 1)?;
    Ok(QuadRule {
        points: rule.iter().map(|&(t, _)| s.at(t)).collect(),
        weights: rule.iter().map(|&(_, w)| w * len).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed-form integral of x^a y^b over [x0, x1] x [y0, y1].
    fn rect_monomial(a: i32, b: i32, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        let ix = (x1.powi(a + 1) - x0.powi(a + 1)) / (a + 1) as f64;
        let iy = (y1.powi(b + 1) - y0.powi(b + 1)) / (b + 1) as f64;
        ix * iy
    }

    #[test]
    fn unit_square_examples() {
        let s = PolySet::single(ConvexPolygon::rectangle(0.0, 1.0, 0.0, 1.0).unwrap());
        let q = polyset_quadrature(&s, 2).unwrap();
        assert!((q.measure() - 1.0).abs() < 1e-15);
        assert!((q.integrate(|p| p.x) - 0.5).abs() < 1e-15);
        let q4 = polyset_quadrature(&s, 4).unwrap();
        assert!((q4.integrate(|p| p.x * p.x * p.y * p.y) - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_unsupported_order() {
        let s = PolySet::single(ConvexPolygon::rectangle(0.0, 1.0, 0.0, 1.0).unwrap());
        assert!(matches!(polyset_quadrature(&s, 0), Err(Error::UnsupportedOrder(0))));
        assert!(matches!(polyset_quadrature(&s, 7), Err(Error::UnsupportedOrder(7))));
        assert!(polyset_quadrature(&PolySet::empty(), 9).is_err());
    }

    #[test]
    fn monomials_exact_on_offset_rectangle() {
        let (x0, x1, y0, y1) = (0.3, 1.7, -0.4, 0.9);
        let s = PolySet::single(ConvexPolygon::rectangle(x0, x1, y0, y1).unwrap());
        for order in 1..=6 {
            let q = polyset_quadrature(&s, order).unwrap();
            assert!(q.weights.iter().all(|&w| w > 0.0));
            for deg in 0..=order as i32 {
                for a in 0..=deg {
                    let b = deg - a;
                    let exact = rect_monomial(a, b, x0, x1, y0, y1);
                    let got = q.integrate(|p| p.x.powi(a) * p.y.powi(b));
                    assert!(
                        (got - exact).abs() <= 1e-12 * exact.abs().max(1.0),
                        "order {order} x^{a} y^{b}: {got} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn segment_rule_exact() {
        let s = Segment::new(Point2::new(0.0, 0.0), Point2::new(2.0, 0.0));
        for order in 1..=6 {
            let q = segment_quadrature(&s, order).unwrap();
            for d in 0..=order as i32 {
                let exact = 2f64.powi(d + 1) / (d + 1) as f64;
                assert!((q.integrate(|p| p.x.powi(d)) - exact).abs() < 1e-12 * exact);
            }
        }
    }
}
