//! Ready-made domain stacks: the two overlapping-rectangle configurations,
//! a single mesh on the unit square, and the obstacle-with-band setup used
//! for the boundary layer problem.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom2d::{rotate_rect, ConvexPolygon, Point2};
use crate::mesh::{build_band_mesh, build_structured_mesh, FeSpace};
use crate::multimesh::{MultiMeshConfig, Part};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Background only.
    Single,
    /// Two nested axis-aligned squares.
    #[serde(rename = "I")]
    One,
    /// Two rotated rectangles.
    #[serde(rename = "II")]
    Two,
}

impl Scenario {
    pub fn domains(self) -> Vec<ConvexPolygon> {
        match self {
            Scenario::Single => vec![unit_square()],
            Scenario::One => config_one(),
            Scenario::Two => config_two(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Scenario::Single => "single",
            Scenario::One => "I",
            Scenario::Two => "II",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Scenario::Single),
            "I" | "i" | "1" => Ok(Scenario::One),
            "II" | "ii" | "2" => Ok(Scenario::Two),
            _ => Err(Error::InvalidConfig(format!("unknown configuration '{s}'"))),
        }
    }
}

pub fn unit_square() -> ConvexPolygon {
    ConvexPolygon::rectangle(0.0, 1.0, 0.0, 1.0).expect("unit square")
}

/// Unit square, `[0.2,0.8]²`, `[0.4,0.6]²`.
pub fn config_one() -> Vec<ConvexPolygon> {
    vec![
        unit_square(),
        ConvexPolygon::rectangle(0.2, 0.8, 0.2, 0.8).expect("rectangle"),
        ConvexPolygon::rectangle(0.4, 0.6, 0.4, 0.6).expect("rectangle"),
    ]
}

/// Unit square, `[0.2,0.8]×[0.3,0.75]` rotated 23° and `[0.3,0.5]×[0.05,0.8]`
/// rotated 44°, each about its own centroid.
pub fn config_two() -> Vec<ConvexPolygon> {
    vec![
        unit_square(),
        rotate_rect((0.2, 0.8, 0.3, 0.75), 23.0, None).expect("rectangle"),
        rotate_rect((0.3, 0.5, 0.05, 0.8), 44.0, None).expect("rectangle"),
    ]
}

/// Mesh size `2^-k`.
pub fn mesh_size(k: i32) -> f64 {
    2f64.powi(-k)
}

/// Structured meshes of the given target sizes on each rectangle.
pub fn build_stack(domains: &[ConvexPolygon], target_h: &[f64], degree: usize) -> Result<MultiMeshConfig> {
    if domains.len() != target_h.len() {
        return Err(Error::DimensionMismatch {
            expected: domains.len(),
            got: target_h.len(),
        });
    }
    let parts = domains
        .iter()
        .zip(target_h)
        .map(|(d, &h)| {
            let mesh = build_structured_mesh(d, h)?;
            Ok(Part::new(d.clone(), FeSpace::new(Arc::new(mesh), degree)?))
        })
        .collect::<Result<_>>()?;
    Ok(MultiMeshConfig::new(parts))
}

/// Stack for a scenario with mesh sizes `2^-k_i`.
pub fn scenario_stack(s: Scenario, ks: &[i32], degree: usize) -> Result<MultiMeshConfig> {
    let h: Vec<f64> = ks.iter().map(|&k| mesh_size(k)).collect();
    build_stack(&s.domains(), &h, degree)
}

pub const OBSTACLE_CENTER: Point2 = Point2 { x: 0.5, y: 0.5 };
pub const OBSTACLE_INRADIUS: f64 = 0.15;

/// Regular hexagon with a flat side facing `+x`.
pub fn obstacle() -> ConvexPolygon {
    ConvexPolygon::regular(OBSTACLE_CENTER, OBSTACLE_INRADIUS, 6, 0.0).expect("hexagon")
}

/// Unit square with `1..=max_top` random rotated rectangles on top, each
/// strictly inside the square, and random mesh sizes in `[h_min, h_max]`.
pub fn random_rect_stack<R: Rng>(rng: &mut R, max_top: usize, h_min: f64, h_max: f64, degree: usize) -> Result<MultiMeshConfig> {
    let square = unit_square();
    let n_top = rng.gen_range(1..=max_top.max(1));
    let mut domains = vec![square.clone()];
    while domains.len() <= n_top {
        let c = Point2::new(rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8));
        let (a, b) = (rng.gen_range(0.05..0.3), rng.gen_range(0.05..0.3));
        let r = rotate_rect((c.x - a, c.x + a, c.y - b, c.y + b), rng.gen_range(0.0..180.0), None)?;
        if r.vertices().iter().all(|&p| square.contains_strict(p, 1e-3)) {
            domains.push(r);
        }
    }
    let h: Vec<f64> = domains.iter().map(|_| rng.gen_range(h_min..=h_max)).collect();
    build_stack(&domains, &h, degree)
}

#[derive(Clone, Debug)]
pub struct BoundaryLayerSetup {
    pub config: MultiMeshConfig,
    pub obstacle: ConvexPolygon,
    /// Background mesh size `2^-(6+k)`.
    pub background_h: f64,
    /// Band width `0.1·2^-k`.
    pub width: f64,
    /// Layer parameter `w/2`.
    pub eps: f64,
}

/// Unit square background with a hexagonal hole, resolved by a band mesh on
/// top. The band uses `layers` cells across its width.
pub fn boundary_layer(k: u32, layers: usize, degree: usize) -> Result<BoundaryLayerSetup> {
    if layers == 0 {
        return Err(Error::InvalidParameter("band needs at least one layer".into()));
    }
    let background_h = 2f64.powi(-(6 + k as i32));
    let width = 0.1 * 2f64.powi(-(k as i32));
    let hole = obstacle();
    let band = build_band_mesh(&hole, width, width / layers as f64)?;
    let square = unit_square();
    let background = build_structured_mesh(&square, background_h)?;
    let config = MultiMeshConfig::new(vec![
        Part::new(square, FeSpace::new(Arc::new(background), degree)?),
        Part::new(hole.offset(width)?, FeSpace::new(Arc::new(band), degree)?).with_void(hole.clone()),
    ]);
    Ok(BoundaryLayerSetup {
        config,
        obstacle: hole,
        background_h,
        width,
        eps: width / 2.0,
    })
}
