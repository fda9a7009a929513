use percobound::bounds::{lemma_bound, theorem_bound, TheoremGrid};
use percobound::packing::{certify_packing, OrderPolicy, PackingRequest, WilKind, WilMethod};
use percobound::pc::{check_pepe, connection_formula, default_audit_grid, pc_lower_bound, SupercriticalParams, WitnessConfig};
use percobound::phi::{phi, PhiMethod, PhiQuery};
use percobound::{Engine, GraphSpec, SetGenerator};

#[test]
fn tree_pipeline() {
    let view = GraphSpec::regular_tree(2, 6).build().unwrap();
    let engine = Engine::default();
    let ball = view.ball(view.origin(), 2).unwrap().vertices();
    let r = phi(&PhiQuery::new(&view, view.origin(), ball, 0.3, PhiMethod::Exact), &engine).unwrap();
    assert_eq!(r.exact.as_deref(), Some("9/25"));

    let bound = pc_lower_bound(&view, &[view.origin()], &WitnessConfig::new(0.1, 4), 0.05, &engine).unwrap();
    assert!(bound.value > 0.3 && bound.value < 0.5);
    bound.certificate.unwrap().check().unwrap();
}

#[test]
fn packing_feeds_both_bounds() {
    let view = GraphSpec::lattice(2, 24).build().unwrap();
    let set = SetGenerator::Segment { length: 16 }.resolve(&view).unwrap();
    let mut req = PackingRequest::new(set, 0.8, 0.3, 0.5);
    req.r_proxy = 8;
    req.replicas = 4000;
    req.order = OrderPolicy::Spacing { every: 4 };
    let engine = Engine::default();
    let cert = certify_packing(&view, &req, &engine).unwrap();
    assert!(cert.k >= 2 && cert.verify_disjoint());
    assert!(cert.steps.iter().all(|s| s.wil.method == WilKind::Proxy));

    let lemma = lemma_bound(0.3, 0.5, cert.k as u64).unwrap();
    let grid = TheoremGrid::default_for(0.8, 0.6);
    let t = theorem_bound(&grid, |_, _| Ok(cert.k as u64)).unwrap();
    assert!(lemma < 1.0 && t.value < 1.0);
}

#[test]
fn analytic_route_falls_back_when_constraints_fail() {
    let sp = SupercriticalParams { p: 0.7, p1: 0.65, eps: 0.1, eps1: 0.05, pc_tilde: 0.6 };
    let report = check_pepe(&sp);
    assert!(!report.holds);
    assert!(connection_formula(0.7, 0.65, 0.05).unwrap() > 0.0);

    let view = GraphSpec::lattice(2, 16).build().unwrap();
    let mut req = PackingRequest::new(vec![view.origin()], 0.7, 0.1, 0.2);
    req.r_proxy = 6;
    req.replicas = 2000;
    req.wil = WilMethod::Analytic {
        p1: sp.p1,
        eps: sp.eps,
        eps1: sp.eps1,
        pc_tilde: sp.pc_tilde,
        audit: WitnessConfig::new(0.05, 2),
        q_grid: default_audit_grid(sp.p1),
    };
    let cert = certify_packing(&view, &req, &Engine::default()).unwrap();
    let step = &cert.steps[0];
    assert_eq!(step.wil.method, WilKind::Proxy);
    assert!(step.wil.note.is_some());
}
