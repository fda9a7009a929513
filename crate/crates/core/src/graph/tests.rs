use proptest::prelude::*;

use super::*;

fn z2(radius: u32) -> GraphView {
    GraphSpec::lattice(2, radius).build().unwrap()
}

fn pt(g: &GraphView, c: &[i32]) -> VertexId {
    g.lattice_point(c).unwrap()
}

#[test]
fn lattice_origin_has_axis_neighbors() {
    let g = z2(5);
    let n = g.neighbors(g.origin()).unwrap();
    assert_eq!(n.len(), 4);
    let expected: VertexSet = [[1, 0], [-1, 0], [0, 1], [0, -1]].iter().map(|c| pt(&g, c)).collect();
    assert_eq!(VertexSet::new(n), expected);
}

#[test]
fn tree_root_has_children_only() {
    let g = GraphSpec::regular_tree(2, 4).build().unwrap();
    assert_eq!(g.neighbors(g.origin()).unwrap().len(), 2);
    // Non-root vertices: parent plus two children.
    assert_eq!(g.neighbors(VertexId::new(1)).unwrap().len(), 3);
}

#[test]
fn removed_neighbor_is_dropped() {
    let g = z2(4);
    let h = g.puncture(&[(pt(&g, &[1, 0]), 0)]).unwrap();
    assert_eq!(h.neighbors(h.origin()).unwrap().len(), 3);
    assert!(matches!(h.neighbors(pt(&g, &[1, 0])), Err(Error::DeadVertex(_))));
}

#[test]
fn neighbors_beyond_truncation_fail() {
    let g = z2(2);
    let edge = pt(&g, &[3, 0]);
    assert!(matches!(g.neighbors(edge), Err(Error::TruncationTooSmall(_))));
    assert!(matches!(g.neighbors(VertexId::new(1_000_000)), Err(Error::DeadVertex(_))));
}

#[test]
fn lattice_ball_sizes() {
    let g = z2(6);
    let o = g.origin();
    assert_eq!(g.ball(o, 0).unwrap().vertices(), VertexSet::new([o]));
    assert_eq!(g.ball(o, 1).unwrap().len(), 5);
    // Breadth-first count of |x|+|y| <= 2.
    let brute = (-2..=2).flat_map(|x: i32| (-2..=2).map(move |y: i32| (x, y))).filter(|(x, y)| x.abs() + y.abs() <= 2).count();
    assert_eq!(brute, 13);
    assert_eq!(g.ball(o, 2).unwrap().len(), brute);
}

#[test]
fn ball_leaving_truncation_fails() {
    let g = z2(3);
    assert!(g.ball(g.origin(), 3).is_ok());
    assert!(matches!(g.ball(g.origin(), 4), Err(Error::TruncationTooSmall(_))));
    assert!(matches!(g.ball(pt(&g, &[1, 0]), 3), Err(Error::TruncationTooSmall(_))));
}

#[test]
fn inner_boundary_examples() {
    let g = z2(6);
    let o = g.origin();
    let b1 = g.ball(o, 1).unwrap();
    assert_eq!(b1.inner_boundary(), VertexSet::new(g.neighbors(o).unwrap()));
    let b2 = g.ball(o, 2).unwrap();
    let shell: VertexSet = b2.members().iter().filter(|(_, d)| *d == 2).map(|(u, _)| *u).collect();
    assert_eq!(shell.len(), 8);
    assert_eq!(b2.inner_boundary(), shell);

    let t = GraphSpec::regular_tree(2, 4).build().unwrap();
    let tb = t.ball(t.origin(), 1).unwrap();
    assert_eq!(tb.inner_boundary(), VertexSet::new(t.neighbors(t.origin()).unwrap()));
}

#[test]
fn interior_examples() {
    let g = z2(6);
    let o = g.origin();
    let b1 = g.ball(o, 1).unwrap().vertices();
    assert_eq!(g.interior(&b1).unwrap(), VertexSet::new([o]));
    let b2 = g.ball(o, 2).unwrap().vertices();
    assert_eq!(g.interior(&b2).unwrap(), b1);
    assert!(g.interior(&VertexSet::empty()).unwrap().is_empty());
}

#[test]
fn puncture_examples() {
    let g = z2(5);
    let o = g.origin();
    assert_eq!(g.puncture(&[]).unwrap(), g);

    let h = g.puncture(&[(o, 1)]).unwrap();
    assert_eq!(h.removed_count(), 5);
    // Distance-2 shell, enumerated: axis points lose one neighbor, diagonals two.
    for (c, before, after) in [([2, 0], 4, 3), ([0, -2], 4, 3), ([1, 1], 4, 2), ([-1, 1], 4, 2)] {
        let v = pt(&g, &c);
        assert_eq!(g.neighbors(v).unwrap().len(), before);
        assert_eq!(h.neighbors(v).unwrap().len(), after, "{c:?}");
    }
    assert_eq!(h.puncture(&[(o, 1)]).unwrap(), h);
    assert_eq!(g.puncture(&[(o, 1), (o, 1)]).unwrap(), h);
    // The original view is untouched.
    assert_eq!(g.removed_count(), 0);
}

#[test]
fn punctured_distances_go_around_holes() {
    let g = z2(8);
    let h = g.puncture(&[(pt(&g, &[1, 0]), 0)]).unwrap();
    let ball = h.ball(h.origin(), 2).unwrap();
    let d = |c: &[i32]| ball.members().iter().find(|(u, _)| *u == pt(&g, c)).map(|(_, d)| *d);
    assert_eq!(d(&[2, 0]), None, "(2,0) is 4 steps away once (1,0) is gone");
    assert_eq!(d(&[1, 1]), Some(2));
}

#[test]
fn file_three_vertex_path() {
    let g = parse_graph("vertices 3 origin 0\n0 1\n1 2\n", None).unwrap();
    assert_eq!(g.vertex_count(), 3);
    assert_eq!(g.edge_count, 2);
    assert_eq!(g.max_degree, 2);
    let view = GraphSpec::file(g).build().unwrap();
    assert_eq!(view.live_count(), 3);
    assert_eq!(view.label(view.origin()), "0");
    assert_eq!(view.parse_vertex("2").unwrap(), VertexId::new(2));
}

#[test]
fn file_errors_carry_line_numbers() {
    let err = parse_graph("vertices 3 origin 0\n0 1\n1 1\n", None).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    assert!(err.to_string().contains("self-loop"));

    let err = parse_graph("", None).unwrap_err();
    assert!(err.to_string().contains("no vertices"), "{err}");

    let err = parse_graph("vertices 3 origin 0\n0 1\n0 x\n", None).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 3, .. }));

    let err = parse_graph("vertices 3 origin 0\n0 1\n1 0\n", None).unwrap_err();
    assert!(err.to_string().contains("duplicate"));

    let err = parse_graph("vertices 3 origin 2\n0 1\n", None).unwrap_err();
    assert!(err.to_string().contains("disconnected"));

    let err = parse_graph("verts 3\n", None).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 1, .. }));
}

#[test]
fn file_keeps_origin_component_only() {
    let g = parse_graph("vertices 5 origin 3\n3 4\n0 1\n4 2\n", None).unwrap();
    assert_eq!(g.vertex_count(), 3);
    let view = GraphSpec::file(g).build().unwrap();
    assert_eq!(view.label(view.origin()), "3");
    assert!(view.parse_vertex("0").is_err());
}

#[test]
fn segment_generator_runs_along_first_axis() {
    let g = z2(40);
    let seg = SetGenerator::Segment { length: 64 }.resolve(&g).unwrap();
    assert_eq!(seg.len(), 64);
    assert_eq!(g.label(seg[0]), "(-32,0)");
    assert_eq!(g.label(seg[63]), "(31,0)");
    assert!(SetGenerator::Segment { length: 100 }.resolve(&z2(10)).is_err());
}

#[test]
fn ids_agree_across_truncation_sizes() {
    let small = z2(4);
    let big = z2(9);
    for v in small.live_vertices().filter(|&v| small.is_complete(v)) {
        assert_eq!(small.label(v), big.label(v));
    }
}

proptest! {
    #[test]
    fn neighbors_are_symmetric(dim in 1usize..4, x in -3i32..=3, y in -3i32..=3) {
        let g = GraphSpec::lattice(dim, 8).build().unwrap();
        let mut c = vec![0; dim];
        c[0] = x;
        if dim > 1 { c[1] = y; }
        let v = g.lattice_point(&c).unwrap();
        for u in g.neighbors(v).unwrap() {
            prop_assert!(g.neighbors(u).unwrap().contains(&v));
        }
    }

    #[test]
    fn inner_boundary_within_ball_and_interior_is_smaller_ball(dim in 1usize..4, radius in 1u32..=4) {
        let g = GraphSpec::lattice(dim, 6).build().unwrap();
        let ball = g.ball(g.origin(), radius).unwrap();
        prop_assert!(ball.inner_boundary().is_subset(&ball.vertices()));
        let inner = g.ball(g.origin(), radius - 1).unwrap().vertices();
        prop_assert_eq!(g.interior(&ball.vertices()).unwrap(), inner);
    }

    #[test]
    fn tree_smaller_ball_inside_interior(b in 1usize..4, radius in 1u32..=4) {
        let g = GraphSpec::regular_tree(b, 5).build().unwrap();
        let v = VertexId::new(1);
        let ball = g.ball(v, radius.min(4)).unwrap();
        let inner = g.ball(v, radius.min(4) - 1).unwrap().vertices();
        prop_assert!(inner.is_subset(&g.interior(&ball.vertices()).unwrap()));
        prop_assert!(ball.inner_boundary().is_subset(&ball.vertices()));
    }

    #[test]
    fn puncture_then_ball_respects_holes(hx in -3i32..=3, hy in -3i32..=3, r in 0u32..=2, d in 0u32..=4) {
        let g = z2(12);
        let hole = g.lattice_point(&[hx, hy]).unwrap();
        let h = g.puncture(&[(hole, r)]).unwrap();
        let removed = g.ball(hole, r).unwrap().vertices();
        let probe = g.lattice_point(&[2, 1]).unwrap();
        prop_assume!(h.is_live(probe));
        let ball = h.ball(probe, d).unwrap();
        prop_assert!(ball.vertices().is_disjoint(&removed));
        // Distances in the punctured view never beat the unpunctured ones.
        let base = g.ball(probe, d).unwrap();
        prop_assert!(ball.vertices().is_subset(&base.vertices()));
    }
}
