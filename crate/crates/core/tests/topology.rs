//! Cut topology: measure partition, interface partition, host pairing,
//! overlap indicators and point location, checked against brute force.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use multimesh::geom2d::{clip_segment, convex_intersect, ConvexPolygon, Segment};
use multimesh::multimesh::build_cut_topology;
use multimesh::scenarios::{build_stack, config_one, random_rect_stack, scenario_stack, unit_square, Scenario};
use multimesh::{CellRef, CutTopology, Error, Point2};

fn config_one_at(k: i32) -> CutTopology {
    build_cut_topology(scenario_stack(Scenario::One, &[k, k, k], 1).unwrap(), 2).unwrap()
}

/// `|Γ_i|` by clipping the predomain boundary against the higher ones.
fn interface_length(topo: &CutTopology, i: usize) -> f64 {
    let parts = topo.parts();
    let mut segs: Vec<Segment> = parts[i].predomain.edges().collect();
    for p in &parts[i + 1..] {
        segs = segs.iter().flat_map(|s| clip_segment(s, &p.predomain, false)).collect();
    }
    segs.iter().map(Segment::length).sum()
}

fn gamma_ij(topo: &CutTopology, i: usize, j: usize) -> f64 {
    topo.facets()
        .iter()
        .filter(|f| f.upper.mesh == i && f.lower.mesh == j)
        .map(|f| f.segment.length())
        .sum()
}

fn distance_to_cell(topo: &CutTopology, r: CellRef, x: Point2) -> f64 {
    let poly = topo.space(r.mesh).mesh().cell_polygon(r.cell);
    if poly.contains(x, 0.0) {
        0.0
    } else {
        poly.distance_to_boundary(x)
    }
}

/// Overlap indicator from all cell pairs, without bins.
fn brute_force_delta(topo: &CutTopology) -> Vec<Vec<bool>> {
    let n = topo.num_meshes();
    let mut d = vec![vec![false; n]; n];
    for i in 0..n {
        d[i][i] = true;
        for j in i + 1..n {
            let mut area = 0.0;
            for k in topo.cut_cells(i) {
                let kp = topo.space(i).mesh().cell_polygon(k.cell);
                for l in topo.cut_cells(j) {
                    for piece in &l.visible.pieces {
                        area += convex_intersect(&kp, piece).area();
                    }
                }
            }
            d[i][j] = area > 0.0;
        }
    }
    d
}

#[test]
fn config_one_areas_and_interfaces() {
    let topo = config_one_at(3);
    let areas = topo.visible_areas();
    for (a, e) in areas.iter().zip([0.64, 0.32, 0.04]) {
        assert!((a - e).abs() < 1e-12, "{areas:?}");
    }
    assert!((gamma_ij(&topo, 2, 1) - 0.8).abs() < 1e-12);
    assert_eq!(gamma_ij(&topo, 2, 0), 0.0);
    assert!((topo.gamma_len()[2] - 0.8).abs() < 1e-12);
    assert!((topo.gamma_len()[1] - 2.4).abs() < 1e-12);
    assert!((gamma_ij(&topo, 1, 0) - 2.4).abs() < 1e-12);
}

#[test]
fn single_mesh_has_no_coupling() {
    let topo = build_cut_topology(scenario_stack(Scenario::Single, &[3], 1).unwrap(), 2).unwrap();
    assert!(topo.facets().is_empty() && topo.overlaps().is_empty());
    assert_eq!(topo.cut_cells(0).len(), 128);
    for cc in topo.cut_cells(0) {
        assert!(cc.uncut && cc.visible.pieces.len() == 1);
        assert!((cc.visible.area() - topo.space(0).mesh().cell_area(cc.cell)).abs() < 1e-15);
    }
    assert_eq!((topo.n_o(), topo.n_oi()), (1, &[0][..]));
}

#[test]
fn overlap_indicator_matches_brute_force() {
    // coarse background: its cells reach under the innermost square
    let coarse = config_one_at(1);
    let d = brute_force_delta(&coarse);
    assert_eq!(coarse.delta_matrix(), &d[..]);
    assert!(d[0][1] && d[0][2] && d[1][2]);
    assert_eq!(coarse.n_o(), 3);
    assert_eq!(coarse.n_oi(), &[0, 1, 2]);

    // finer background: every cell under the innermost square is hidden
    let fine = config_one_at(3);
    let d = brute_force_delta(&fine);
    assert_eq!(fine.delta_matrix(), &d[..]);
    assert!(d[0][1] && !d[0][2] && d[1][2]);
    assert_eq!(fine.n_o(), 2);
    assert_eq!(fine.n_oi(), &[0, 1, 1]);
}

#[test]
fn disjoint_top_meshes_do_not_overlap() {
    let domains = vec![
        unit_square(),
        ConvexPolygon::rectangle(0.1, 0.4, 0.1, 0.4).unwrap(),
        ConvexPolygon::rectangle(0.6, 0.9, 0.6, 0.9).unwrap(),
    ];
    let topo = build_cut_topology(build_stack(&domains, &[0.125, 0.05, 0.05], 1).unwrap(), 2).unwrap();
    assert!(!topo.delta(1, 2));
    assert!(topo.delta(0, 1) && topo.delta(0, 2));
    assert_eq!(gamma_ij(&topo, 2, 1), 0.0);
    assert_eq!(topo.n_o(), 3);
}

#[test]
fn random_stacks_conserve_measure_and_interfaces() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..40 {
        let topo = build_cut_topology(random_rect_stack(&mut rng, 3, 0.04, 0.2, 1).unwrap(), 2).unwrap();
        let total: f64 = topo.visible_areas().iter().sum();
        assert!((total - 1.0).abs() < 1e-10, "area {total}");
        for i in 1..topo.num_meshes() {
            let expect = interface_length(&topo, i);
            let got: f64 = (0..i).map(|j| gamma_ij(&topo, i, j)).sum();
            assert!((got - expect).abs() < 1e-10, "mesh {i}: {got} vs {expect}");
            assert!((topo.gamma_len()[i] - expect).abs() < 1e-10);
            for j in 0..i {
                if gamma_ij(&topo, i, j) > 0.0 {
                    assert!(topo.delta(j, i), "interface {i}->{j} without overlap");
                }
            }
        }
        for cc in (0..topo.num_meshes()).flat_map(|i| topo.cut_cells(i)) {
            assert!(cc.visible.area() > 0.0);
            assert!((cc.quad.measure() - cc.visible.area()).abs() <= 1e-12 * cc.visible.area().max(1e-3));
        }
    }
}

#[test]
fn hosts_contain_their_pieces() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut stacks = vec![scenario_stack(Scenario::Two, &[3, 4, 5], 1).unwrap()];
    stacks.extend((0..5).map(|_| random_rect_stack(&mut rng, 3, 0.05, 0.15, 1).unwrap()));
    for cfg in stacks {
        let topo = build_cut_topology(cfg, 2).unwrap();
        for f in topo.facets() {
            let m = f.segment.midpoint();
            assert!(distance_to_cell(&topo, f.upper, m) <= 1e-10);
            assert!(distance_to_cell(&topo, f.lower, m) <= 1e-10);
            assert!(f.upper.mesh > f.lower.mesh);
            assert!((f.normal.norm() - 1.0).abs() < 1e-14);
            let pre = &topo.parts()[f.upper.mesh].predomain;
            assert!(pre.distance_to_boundary(f.segment.a) < 1e-10 && pre.distance_to_boundary(f.segment.b) < 1e-10);
            // the normal points away from the upper predomain
            assert!(!pre.contains(m + f.normal * 1e-6, 0.0));
        }
        for o in topo.overlaps() {
            let c = o.polygon.centroid();
            assert!(distance_to_cell(&topo, o.lower, c) <= 1e-10);
            assert!(distance_to_cell(&topo, o.upper, c) <= 1e-10);
            assert!(o.lower.mesh < o.upper.mesh);
            assert!(topo.is_active(o.lower) && topo.is_active(o.upper));
        }
    }
}

#[test]
fn overlaps_cover_the_hidden_part_of_active_cells() {
    let topo = build_cut_topology(scenario_stack(Scenario::Two, &[3, 4, 4], 1).unwrap(), 2).unwrap();
    let mut hidden: Vec<Vec<f64>> = (0..topo.num_meshes()).map(|i| vec![0.0; topo.space(i).mesh().num_cells()]).collect();
    for o in topo.overlaps() {
        hidden[o.lower.mesh][o.lower.cell] += o.polygon.area();
    }
    for i in 0..topo.num_meshes() {
        for cc in topo.cut_cells(i) {
            let full = topo.space(i).mesh().cell_area(cc.cell);
            let h = hidden[i][cc.cell];
            assert!((cc.visible.area() + h - full).abs() < 1e-12, "mesh {i} cell {}", cc.cell);
        }
    }
}

#[test]
fn point_location_matches_classification() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for s in [Scenario::One, Scenario::Two] {
        let topo = build_cut_topology(scenario_stack(s, &[3, 4, 5], 1).unwrap(), 2).unwrap();
        for _ in 0..10_000 {
            let x = Point2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            let expect = (0..topo.num_meshes())
                .rev()
                .find(|&k| topo.parts()[k].predomain.contains(x, 1e-12))
                .unwrap();
            let r = topo.point_locate(x).unwrap();
            assert_eq!(r.mesh, expect);
            assert!(distance_to_cell(&topo, r, x) <= 1e-12);
        }
    }
    let topo = config_one_at(3);
    assert_eq!(topo.point_locate(Point2::new(0.5, 0.5)).unwrap().mesh, 2);
    assert_eq!(topo.point_locate(Point2::new(0.25, 0.25)).unwrap().mesh, 1);
    assert_eq!(topo.point_locate(Point2::new(0.1, 0.1)).unwrap().mesh, 0);
    // ties go up
    assert_eq!(topo.point_locate(Point2::new(0.4, 0.5)).unwrap().mesh, 2);
    assert!(matches!(topo.point_locate(Point2::new(1.5, 0.5)), Err(Error::PointNotFound { .. })));
}

#[test]
fn holes_are_excluded() {
    let setup = multimesh::scenarios::boundary_layer(0, 4, 1).unwrap();
    let topo = build_cut_topology(setup.config, 2).unwrap();
    let total: f64 = topo.visible_areas().iter().sum();
    assert!((total - topo.domain_area()).abs() < 1e-10);
    assert!((topo.domain_area() - (1.0 - setup.obstacle.area())).abs() < 1e-14);
    assert!(topo.point_locate(Point2::new(0.5, 0.5)).is_err());
    assert_eq!(topo.point_locate(Point2::new(0.65, 0.5)).unwrap().mesh, 1);
    // the band's outer loop is the only interface
    assert!((topo.gamma_len()[1] - setup.obstacle.offset(setup.width).unwrap().perimeter()).abs() < 1e-10);
}

#[test]
fn invalid_configurations_are_rejected() {
    let mut domains = config_one();
    domains[2] = ConvexPolygon::rectangle(0.5, 1.0, 0.4, 0.6).unwrap();
    let cfg = build_stack(&domains, &[0.25, 0.25, 0.25], 1).unwrap();
    assert!(matches!(build_cut_topology(cfg, 2), Err(Error::InvalidConfig(_))));

    let mut cfg = scenario_stack(Scenario::One, &[2, 2, 2], 1).unwrap();
    cfg.parts[1].predomain = ConvexPolygon::rectangle(0.2, 0.8, 0.2, 0.7).unwrap();
    assert!(matches!(build_cut_topology(cfg, 2), Err(Error::InvalidConfig(_))));

    let cfg = scenario_stack(Scenario::One, &[2, 2, 2], 1).unwrap();
    assert!(matches!(build_cut_topology(cfg, 9), Err(Error::UnsupportedOrder(9))));
}

#[test]
fn debug_tables_have_one_row_per_item() {
    let topo = config_one_at(2);
    let (mut f, mut o) = (Vec::new(), Vec::new());
    topo.write_debug_csv(&mut f, &mut o).unwrap();
    assert_eq!(String::from_utf8(f).unwrap().lines().count(), topo.facets().len() + 1);
    assert_eq!(String::from_utf8(o).unwrap().lines().count(), topo.overlaps().len() + 1);
}

#[test]
fn construction_is_deterministic() {
    let a = build_cut_topology(scenario_stack(Scenario::Two, &[3, 4, 5], 1).unwrap(), 2).unwrap();
    let b = build_cut_topology(scenario_stack(Scenario::Two, &[3, 4, 5], 1).unwrap(), 2).unwrap();
    let (mut fa, mut oa, mut fb, mut ob) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    a.write_debug_csv(&mut fa, &mut oa).unwrap();
    b.write_debug_csv(&mut fb, &mut ob).unwrap();
    assert_eq!((fa, oa), (fb, ob));
}
