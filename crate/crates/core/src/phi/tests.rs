use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use super::*;
use crate::exact::enumerate_event;
use crate::graph::GraphSpec;
use crate::EventSpec;

fn z2(radius: u32) -> GraphView {
    GraphSpec::lattice(2, radius).build().unwrap()
}

fn ball_set(g: &GraphView, v: VertexId, r: u32) -> VertexSet {
    g.ball(v, r).unwrap().vertices()
}

/// Sum over all configurations of the relevant vertices, written from the
/// definition with no shared code beyond `neighbors`.
fn brute_force(g: &GraphView, v: VertexId, set: &VertexSet, conv: PhiConventions, p: &BigRational) -> BigRational {
    let nb = |u: VertexId| g.neighbors(u).unwrap();
    let interior: Vec<VertexId> = set.iter().copied().filter(|&u| nb(u).iter().all(|w| set.contains(*w))).collect();
    if !interior.contains(&v) {
        return BigRational::one();
    }
    let terms: Vec<VertexId> = set.iter().copied().filter(|u| !interior.contains(u)).collect();
    let mut random: Vec<VertexId> = interior.clone();
    if !conv.requires_source_open {
        random.retain(|&u| u != v);
    }
    let mut extra = Vec::new();
    if !conv.endpoint_interior {
        for &y in &terms {
            for w in nb(y) {
                // Endpoints away from the interior never matter.
                let reachable = nb(w).iter().any(|x| interior.contains(x));
                if reachable && !interior.contains(&w) && !extra.contains(&w) {
                    extra.push(w);
                }
            }
        }
    }
    random.extend(extra.iter().copied());
    assert!(random.len() <= 22, "oracle too large");
    let q = BigRational::one() - p;
    let mut total = BigRational::zero();
    for m in 0u64..1 << random.len() {
        let open = |u: VertexId| {
            if u == v && !conv.requires_source_open {
                return true;
            }
            random.iter().position(|&w| w == u).is_some_and(|i| m >> i & 1 == 1)
        };
        if !open(v) {
            continue;
        }
        let mut cluster = vec![v];
        let mut i = 0;
        while i < cluster.len() {
            for w in nb(cluster[i]) {
                if interior.contains(&w) && open(w) && !cluster.contains(&w) {
                    cluster.push(w);
                }
            }
            i += 1;
        }
        let hits = terms
            .iter()
            .filter(|&&y| {
                nb(y).iter().any(|w| {
                    cluster.contains(w)
                        || (!conv.endpoint_interior
                            && !interior.contains(w)
                            && open(*w)
                            && nb(*w).iter().any(|x| cluster.contains(x)))
                })
            })
            .count();
        if hits == 0 {
            continue;
        }
        let k = m.count_ones() as usize;
        let weight = num_traits::pow(p.clone(), k) * num_traits::pow(q.clone(), random.len() - k);
        total += BigRational::from_integer(hits.into()) * weight;
    }
    total
}

fn exact_rational(g: &GraphView, v: VertexId, set: &VertexSet, conv: PhiConventions, p: f64) -> BigRational {
    ExactPhi::prepare(g, v, set, conv, DEFAULT_EXACT_CAP).unwrap().unwrap().rational(&rational(p))
}

#[test]
fn unit_ball_in_z2_is_four_p() {
    let g = z2(4);
    let o = g.origin();
    let p = 0.3;
    let q = PhiQuery::new(&g, o, ball_set(&g, o, 1), p, PhiMethod::Exact);
    let r = phi_exact(&q).unwrap();
    assert_eq!(r.terms.len(), 4);
    assert_eq!(exact_rational(&g, o, &q.set, PhiConventions::default(), p), rational(p) * BigRational::from_integer(4.into()));
    assert!((r.value - 1.2).abs() < 1e-12);
    assert_eq!(r.method, PhiMethodTag::Exact);
}

#[test]
fn tree_ball_closed_form() {
    let g = GraphSpec::regular_tree(2, 6).build().unwrap();
    let o = g.origin();
    for r in 1..=4u32 {
        let p = 0.41;
        let set = ball_set(&g, o, r);
        let got = exact_rational(&g, o, &set, PhiConventions::default(), p);
        let expected = num_traits::pow(rational(2.0) * rational(p), r as usize);
        assert_eq!(got, expected, "r = {r}");
    }
}

#[test]
fn line_ball_closed_form() {
    let g = GraphSpec::lattice(1, 12).build().unwrap();
    let o = g.origin();
    for r in 1..=6u32 {
        let p = 0.7;
        let got = exact_rational(&g, o, &ball_set(&g, o, r), PhiConventions::default(), p);
        assert_eq!(got, rational(2.0) * num_traits::pow(rational(p), r as usize));
    }
}

#[test]
fn non_interior_source_gives_one() {
    let g = z2(4);
    let o = g.origin();
    let set = ball_set(&g, o, 1);
    let edge = g.lattice_point(&[1, 0]).unwrap();
    let r = phi_exact(&PhiQuery::new(&g, edge, set, 0.5, PhiMethod::Exact)).unwrap();
    assert_eq!(r.value, 1.0);
    assert!(r.terms.is_empty());
    assert_eq!(r.method, PhiMethodTag::NonInterior);
}

#[test]
fn source_outside_set_is_rejected() {
    let g = z2(4);
    let far = g.lattice_point(&[3, 0]).unwrap();
    let q = PhiQuery::new(&g, far, ball_set(&g, g.origin(), 1), 0.5, PhiMethod::Exact);
    assert!(matches!(phi_exact(&q), Err(Error::Parameter(_))));
}

#[test]
fn interior_cap_is_enforced() {
    let g = z2(10);
    let o = g.origin();
    // |B(o,4)| = 41 interior vertices in B(o,5).
    let q = PhiQuery::new(&g, o, ball_set(&g, o, 5), 0.5, PhiMethod::Exact);
    assert!(matches!(phi_exact(&q), Err(Error::InteriorTooLarge { size: 41, cap: 25 })));
}

#[test]
fn agrees_with_brute_force_on_z2_balls() {
    let g = z2(6);
    let o = g.origin();
    for conv in [
        PhiConventions::default(),
        PhiConventions { requires_source_open: false, endpoint_interior: true },
        PhiConventions { requires_source_open: true, endpoint_interior: false },
    ] {
        for r in 1..=2 {
            let set = ball_set(&g, o, r);
            let p = 0.37;
            assert_eq!(exact_rational(&g, o, &set, conv, p), brute_force(&g, o, &set, conv, &rational(p)), "{conv:?} r={r}");
        }
    }
}

#[test]
fn agrees_with_brute_force_on_irregular_sets() {
    let g = z2(6);
    // A 4x3 box plus a tail and a bump: asymmetric, off-center source.
    let mut set: Vec<VertexId> = Vec::new();
    for x in -1..=2 {
        for y in -1..=1 {
            set.push(g.lattice_point(&[x, y]).unwrap());
        }
    }
    for c in [[3, 0], [3, 1], [0, 2]] {
        set.push(g.lattice_point(&c).unwrap());
    }
    let set = VertexSet::new(set);
    assert_eq!(g.interior(&set).unwrap().len(), 4);
    let v = g.lattice_point(&[1, 0]).unwrap();
    for p in [0.2, 0.5, 0.81] {
        for endpoint_interior in [true, false] {
            let conv = PhiConventions { requires_source_open: true, endpoint_interior };
            assert_eq!(exact_rational(&g, v, &set, conv, p), brute_force(&g, v, &set, conv, &rational(p)));
        }
    }
}

#[test]
fn each_term_matches_an_enumerated_connection_event() {
    // A 2x4 ladder with a handle; the whole graph is small enough for the
    // configuration enumerator.
    let edges = [(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (6, 7), (0, 4), (1, 5), (2, 6), (3, 7), (3, 8), (8, 9)];
    let g = GraphView::from_edges(10, &edges, 0).unwrap();
    let set = VertexSet::new((0..9).map(VertexId::new));
    let v = VertexId::new(0);
    let interior = g.interior(&set).unwrap();
    let exact = ExactPhi::prepare(&g, v, &set, PhiConventions::default(), 25).unwrap().unwrap();
    let p = rational(0.45);
    for (&y, value) in exact.term_vertices().iter().zip(exact.term_rationals(&p)) {
        let targets: VertexSet = g.neighbors(y).unwrap().into_iter().filter(|w| interior.contains(*w)).collect();
        let event = EventSpec::connect(v, targets, Some(interior.clone()));
        let table = enumerate_event(&g, &event).unwrap();
        assert_eq!(table.rational(&p), value, "term {}", g.label(y));
    }
}

#[test]
fn monte_carlo_covers_exact_value() {
    let g = z2(6);
    let o = g.origin();
    let set = ball_set(&g, o, 2);
    let p = 0.6;
    let exact = phi_exact(&PhiQuery::new(&g, o, set.clone(), p, PhiMethod::Exact)).unwrap();
    let params = PercolationParams::new(p, 11, 40_000).unwrap();
    let mc = phi_mc(&PhiQuery::new(&g, o, set, p, PhiMethod::MonteCarlo(params)), &Engine::default()).unwrap();
    let (lo, hi) = mc.ci.unwrap();
    assert!(lo <= exact.value && exact.value <= hi, "{lo} {} {hi}", exact.value);
    assert_eq!(mc.terms.len(), exact.terms.len());
    for (a, b) in mc.terms.iter().zip(&exact.terms) {
        assert_eq!(a.y, b.y);
        assert!((a.probability - b.probability).abs() < 0.02);
    }
}

#[test]
fn monte_carlo_alternative_endpoints() {
    let g = z2(6);
    let o = g.origin();
    let set = ball_set(&g, o, 2);
    let conv = PhiConventions { requires_source_open: false, endpoint_interior: false };
    let p = 0.5;
    let exact = phi_exact(&PhiQuery::new(&g, o, set.clone(), p, PhiMethod::Exact).with_conventions(conv)).unwrap();
    let params = PercolationParams::new(p, 5, 40_000).unwrap();
    let mc = phi_mc(&PhiQuery::new(&g, o, set, p, PhiMethod::MonteCarlo(params)).with_conventions(conv), &Engine::default()).unwrap();
    let (lo, hi) = mc.ci.unwrap();
    assert!(lo <= exact.value && exact.value <= hi, "{lo} {} {hi}", exact.value);
}

#[test]
fn cluster_enumeration_counts_connected_sets() {
    // Connected subsets of a path containing an endpoint: one per length.
    let n = 6;
    let nbr: Vec<u64> = (0..n).map(|i| (if i > 0 { 1 << (i - 1) } else { 0 }) | (if i + 1 < n { 1 << (i + 1) } else { 0 })).collect();
    let mut count = 0;
    enumerate_clusters(&nbr, &vec![0; n], &mut |_, _, _| count += 1);
    assert_eq!(count, n);
    // Complete graph on 5 vertices: every subset containing vertex 0.
    let nbr: Vec<u64> = (0..5).map(|i| 0b11111 & !(1 << i)).collect();
    let mut seen = std::collections::HashSet::new();
    enumerate_clusters(&nbr, &[0; 5], &mut |c, _, _| assert!(seen.insert(c)));
    assert_eq!(seen.len(), 16);
}

#[test]
fn cluster_weights_sum_to_p() {
    let g = z2(6);
    let o = g.origin();
    let set = ball_set(&g, o, 4);
    let interior = g.interior(&set).unwrap();
    let layout = Layout::new(&g, o, &set).unwrap().unwrap();
    assert_eq!(layout.interior.len(), interior.len());
    let nbr: Vec<u64> = layout.interior_adj.iter().map(|a| mask(a)).collect();
    let mut table = CountTable::new(25, 25);
    enumerate_clusters(&nbr, &vec![0; nbr.len()], &mut |c, closed, _| {
        table.add(c.count_ones() as usize, closed.count_ones() as usize, 1)
    });
    let p = rational(0.3);
    assert_eq!(table.rational(&p), p);
}

#[test]
fn boundary_terms_of_unit_ball() {
    let g = z2(4);
    let set = ball_set(&g, g.origin(), 1);
    let terms = boundary_terms(&g, &set).unwrap();
    assert_eq!(VertexSet::new(terms), VertexSet::new(g.neighbors(g.origin()).unwrap()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_value_is_monotone_in_p(a in 0.01f64..0.99, b in 0.01f64..0.99, r in 1u32..=3) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let g = z2(6);
        let o = g.origin();
        let exact = ExactPhi::prepare(&g, o, &ball_set(&g, o, r), PhiConventions::default(), 25).unwrap().unwrap();
        prop_assert!(exact.rational(&rational(lo)) <= exact.rational(&rational(hi)));
        prop_assert!(exact.value(lo) <= exact.value(hi) + 1e-12);
    }

    #[test]
    fn float_and_rational_evaluations_agree(p in 0.01f64..0.99) {
        let g = z2(6);
        let o = g.origin();
        let exact = ExactPhi::prepare(&g, o, &ball_set(&g, o, 3), PhiConventions::default(), 25).unwrap().unwrap();
        let r: f64 = num_traits::ToPrimitive::to_f64(&exact.rational(&rational(p))).unwrap();
        prop_assert!((r - exact.value(p)).abs() < 1e-12 * r.max(1.0));
    }
}
