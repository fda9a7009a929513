use std::fmt::Write as _;

use serde::Serialize;

use percobound::bounds::{verify_disconnection, RadiusEstimate, TheoremGrid, Verdict, VerifyRequest};
use percobound::graph::load_graph;
use percobound::packing::{certify_packing, OrderPolicy, PackingRequest, WilMethod};
use percobound::pc::{default_audit_grid, pc_lower_bound, witness_set, WitnessConfig, WitnessShape};
use percobound::phi::{phi, PhiConventions, PhiMethod, PhiQuery, PhiResult};
use percobound::{Engine, Error, GraphSpec, GraphView, PercolationParams, Result, SetGenerator, VertexId, VertexSet};

use crate::output::{emit, envelope, opt, Table};
use crate::{Common, Conventions, MethodArg, Outcome, PackArgs, PackingArgs, PcArgs, PhiArgs, SetArgs, Shape, SimulateArgs, VerifyArgs, WilArg};

/// Largest truncation tried when looking for a vertex label.
const SEARCH_LIMIT: u32 = 4096;

fn graph_spec(text: &str, truncation: u32) -> Result<GraphSpec> {
    let bad = || Error::Parameter(format!("cannot parse graph '{text}' (expected lattice:<d>, tree:<b> or file:<path>)"));
    let (kind, arg) = text.split_once(':').ok_or_else(bad)?;
    match kind {
        "lattice" => Ok(GraphSpec::lattice(arg.parse().map_err(|_| bad())?, truncation)),
        "tree" => Ok(GraphSpec::regular_tree(arg.parse().map_err(|_| bad())?, truncation)),
        "file" => {
            let mut spec = GraphSpec::file(load_graph(arg)?);
            spec.truncation_radius = truncation;
            Ok(spec)
        }
        _ => Err(bad()),
    }
}

fn is_file(common: &Common) -> bool {
    common.graph.starts_with("file:")
}

/// Builds the graph deep enough that every resolved vertex has `reach`
/// complete layers around it, and records the truncation used in `common`.
fn materialize(
    common: &mut Common,
    reach: u32,
    resolve: impl Fn(&GraphView) -> Result<Vec<VertexId>>,
) -> Result<(GraphView, Vec<VertexId>)> {
    let explicit = common.truncation;
    if is_file(common) {
        let view = graph_spec(&common.graph, explicit.unwrap_or(u32::MAX))?.build()?;
        let ids = resolve(&view)?;
        return Ok((view, ids));
    }
    let mut t = explicit.unwrap_or(reach + 1).max(1);
    loop {
        let view = graph_spec(&common.graph, t)?.build()?;
        match resolve(&view) {
            Ok(ids) => {
                let need = ids.iter().map(|&v| view.base_depth(v)).max().unwrap_or(0) + reach;
                if explicit.is_none() && need > t {
                    t = need;
                    continue;
                }
                common.truncation = Some(t);
                return Ok((view, ids));
            }
            Err(Error::TruncationTooSmall(_)) if explicit.is_none() && t < SEARCH_LIMIT => t *= 2,
            Err(e) => return Err(e),
        }
    }
}

fn parse_list(view: &GraphView, text: &str) -> Result<Vec<VertexId>> {
    text.split(';').map(str::trim).filter(|s| !s.is_empty()).map(|s| view.parse_vertex(s)).collect()
}

fn origin_or(view: &GraphView, text: Option<&str>) -> Result<Vec<VertexId>> {
    match text {
        Some(t) => {
            let ids = parse_list(view, t)?;
            if ids.is_empty() {
                return Err(Error::Parameter("--origin names no vertex".into()));
            }
            Ok(ids)
        }
        None => Ok(vec![view.origin()]),
    }
}

fn resolve_set(view: &GraphView, set: &SetArgs) -> Result<Vec<VertexId>> {
    match (&set.set, set.segment_length) {
        (Some(text), _) => SetGenerator::Explicit(parse_list(view, text)?).resolve(view),
        (None, Some(length)) => SetGenerator::Segment { length }.resolve(view),
        (None, None) => Err(Error::Parameter("give S with --set or --segment-length".into())),
    }
}

fn engine(common: &Common) -> Result<Engine> {
    Engine::from_env()?.with_confidence(common.confidence)
}

fn conventions(c: &Conventions) -> PhiConventions {
    PhiConventions { requires_source_open: !c.source_may_be_closed, endpoint_interior: !c.non_interior_endpoints }
}

fn shape(s: Shape) -> WitnessShape {
    match s {
        Shape::Ball => WitnessShape::Ball,
        Shape::Box => WitnessShape::Box,
    }
}

/// Graph distance from v to the farthest member of its radius-`r` witness set.
fn witness_reach(common: &Common, s: Shape, r: u32) -> u32 {
    let dim = common.graph.strip_prefix("lattice:").and_then(|d| d.parse::<u32>().ok()).unwrap_or(1);
    match s {
        Shape::Ball => r,
        Shape::Box => r * dim,
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

#[derive(Serialize)]
struct PhiOutput {
    vertex: String,
    set_size: usize,
    #[serde(flatten)]
    phi: PhiResult,
}

pub fn phi_cmd(mut a: PhiArgs) -> Result<Outcome> {
    let engine = engine(&a.common)?;
    let origin = a.origin.clone();
    let reach = witness_reach(&a.common, a.shape, a.ball);
    let (view, ids) = materialize(&mut a.common, reach, |v| origin_or(v, origin.as_deref()))?;
    let v = ids[0];
    let set = witness_set(&view, v, a.ball, shape(a.shape))?;
    let interior = view.interior(&set)?.len();
    let params = PercolationParams::new(a.p, a.common.seed, a.replicas)?;
    let method = match a.method {
        MethodArg::Exact => PhiMethod::Exact,
        MethodArg::Mc => PhiMethod::MonteCarlo(params),
        MethodArg::Auto if interior <= a.exact_cap.min(63) => PhiMethod::Exact,
        MethodArg::Auto => PhiMethod::MonteCarlo(params),
    };
    let set_size = set.len();
    let q = PhiQuery::new(&view, v, set, a.p, method)
        .with_conventions(conventions(&a.conventions))
        .with_exact_cap(a.exact_cap);
    let result = phi(&q, &engine)?;
    let mut table = Table::new("phi_terms.csv", &["y", "label", "probability", "exact", "ci_low", "ci_high"]);
    for t in &result.terms {
        table.row(vec![
            t.y.to_string(),
            t.label.clone(),
            num(t.probability),
            opt(t.exact.as_ref()),
            opt(t.estimate.as_ref().map(|e| e.ci_low)),
            opt(t.estimate.as_ref().map(|e| e.ci_high)),
        ]);
    }
    let summary = match (&result.exact, result.ci) {
        (Some(x), _) => format!("phi = {} = {x} (exact, |S°| = {})\n", result.value, result.interior_size),
        (None, Some((lo, hi))) => format!("phi = {} [{lo}, {hi}] (Monte Carlo, |S°| = {})\n", result.value, result.interior_size),
        (None, None) => format!("phi = {} (|S°| = {})\n", result.value, result.interior_size),
    };
    let out = PhiOutput { vertex: view.label(v), set_size, phi: result };
    let json = envelope("phi", a.common.seed, &a, &out)?;
    emit(a.common.out.as_deref(), "phi.json", &json, &[table], &summary)?;
    Ok(Outcome::Done)
}

pub fn pc_bound(mut a: PcArgs) -> Result<Outcome> {
    let engine = engine(&a.common)?;
    let origin = a.origin.clone();
    let reach = witness_reach(&a.common, a.shape, a.rmax);
    let (view, family) = materialize(&mut a.common, reach, |v| origin_or(v, origin.as_deref()))?;
    let cfg = WitnessConfig {
        eps0: a.eps0,
        r_max: a.rmax,
        shape: shape(a.shape),
        exact_cap: a.exact_cap,
        conventions: conventions(&a.conventions),
        seed: a.common.seed,
        replicas: a.replicas,
    };
    let bound = pc_lower_bound(&view, &family, &cfg, a.tolerance, &engine)?;
    let mut table = Table::new(
        "pc_evaluations.csv",
        &["step", "p", "accepted", "vertex", "radius", "method", "value", "ci_low", "ci_high", "interior_size", "certified"],
    );
    for (i, step) in bound.steps.iter().enumerate() {
        for e in step.searches.iter().flat_map(|s| &s.trajectory) {
            table.row(vec![
                i.to_string(),
                num(step.p),
                step.accepted.to_string(),
                e.label.clone(),
                e.radius.to_string(),
                serde_json::to_value(e.method)?.as_str().unwrap_or_default().to_string(),
                num(e.value),
                num(e.ci_low),
                num(e.ci_high),
                e.interior_size.to_string(),
                e.certified.to_string(),
            ]);
        }
    }
    let summary = format!("p_c >= {} (grid step {}, {} bisection steps)\n", bound.value, bound.tolerance, bound.steps.len());
    let json = envelope("pc-bound", a.common.seed, &a, &bound)?;
    emit(a.common.out.as_deref(), "pc_bound.json", &json, &[table], &summary)?;
    Ok(Outcome::Done)
}

fn packing_request(set: Vec<VertexId>, args: &PackingArgs, eps: f64, c: f64, seed: u64) -> Result<PackingRequest> {
    let mut r = PackingRequest::new(set, args.p, eps, c);
    r.d_min = args.dmin;
    r.d_max = args.dmax;
    r.r_proxy = args.rproxy;
    r.seed = seed;
    r.replicas = args.replicas;
    r.order = args.spacing.map_or(OrderPolicy::NearestFirst, |every| OrderPolicy::Spacing { every });
    if args.wil == WilArg::Analytic {
        let need = |name: &str, x: Option<f64>| {
            x.ok_or_else(|| Error::Parameter(format!("--wil analytic needs --{name}")))
        };
        let p1 = need("p1", args.p1)?;
        let mut audit = WitnessConfig::new(0.05, args.audit_rmax);
        audit.seed = seed;
        audit.replicas = args.replicas;
        r.wil = WilMethod::Analytic {
            p1,
            eps,
            eps1: need("eps1", args.eps1)?,
            pc_tilde: need("pc-estimate", args.pc_estimate)?,
            audit,
            q_grid: default_audit_grid(p1),
        };
    }
    r.validate()?;
    Ok(r)
}

fn packing_table(cert: &percobound::packing::PackingCertificate) -> Table {
    let mut table = Table::new(
        "pack_steps.csv",
        &[
            "index", "w", "label", "d", "q_ball", "q_ball_low", "q_inf", "q_far", "excess_high", "margin", "stabilized",
            "structural", "wil_method", "wil_point", "wil_low", "wil_high", "wil_pass", "dependency_size",
        ],
    );
    for s in &cert.steps {
        table.row(vec![
            s.index.to_string(),
            s.w.to_string(),
            s.label.clone(),
            s.d.to_string(),
            num(s.ctd.q_ball.point),
            num(s.ctd.q_ball.ci_low),
            num(s.ctd.q_inf.point),
            num(s.ctd.q_far.point),
            num(s.ctd.excess.ci_high),
            num(s.ctd.margin),
            s.ctd.stabilized.to_string(),
            s.ctd.structural.to_string(),
            format!("{:?}", s.wil.method).to_lowercase(),
            num(s.wil.estimate.point),
            num(s.wil.estimate.ci_low),
            num(s.wil.estimate.ci_high),
            s.wil.pass.to_string(),
            s.dependency_set.len().to_string(),
        ]);
    }
    table
}

pub fn pack(mut a: PackArgs) -> Result<Outcome> {
    let engine = engine(&a.common)?;
    let set_args = a.set.clone();
    let (view, set) = materialize(&mut a.common, 2 * a.packing.rproxy, |v| resolve_set(v, &set_args))?;
    let req = packing_request(set, &a.packing, a.eps, a.c, a.common.seed)?;
    let cert = certify_packing(&view, &req, &engine)?;
    if !cert.verify_disjoint() {
        return Err(Error::Internal("dependency sets overlap".into()));
    }
    let summary = format!(
        "k = {} ({} candidates rejected, {} interval checks at confidence {})\n",
        cert.k,
        cert.rejected.len(),
        cert.interval_checks,
        cert.confidence
    );
    let table = packing_table(&cert);
    let json = envelope("pack", a.common.seed, &a, &cert)?;
    emit(a.common.out.as_deref(), "pack.json", &json, &[table], &summary)?;
    Ok(Outcome::Done)
}

fn profile_table(name: &'static str, profile: &[RadiusEstimate]) -> Table {
    let mut t = Table::new(name, &["radius", "successes", "replicas", "point", "ci_low", "ci_high"]);
    for r in profile {
        let e = &r.estimate;
        t.row(vec![
            r.radius.to_string(),
            e.successes.to_string(),
            e.replicas.to_string(),
            num(e.point),
            num(e.ci_low),
            num(e.ci_high),
        ]);
    }
    t
}

pub fn verify_bound(mut a: VerifyArgs) -> Result<Outcome> {
    let engine = engine(&a.common)?;
    let set_args = a.set.clone();
    let (view, set) = materialize(&mut a.common, 2 * a.packing.rproxy, |v| resolve_set(v, &set_args))?;
    if set.is_empty() {
        return Err(Error::Degenerate(
            "S is empty: P(∅ ↛ ∞) = 1 by the empty-intersection convention, nothing to compare".into(),
        ));
    }
    let pc_tilde = a
        .packing
        .pc_estimate
        .ok_or_else(|| Error::Parameter("verify-bound needs --pc-estimate for the floor of the p1 grid".into()))?;
    let p = a.packing.p;
    let mut grid = TheoremGrid::default_for(p, pc_tilde);
    if !a.grid_p1.is_empty() {
        grid.p1 = a.grid_p1.clone();
    }
    grid.eps = a.eps.clone();
    grid.delta = a.delta.clone();
    let packing = packing_request(set.clone(), &a.packing, a.lemma_eps, a.c, a.common.seed)?;
    let req = VerifyRequest { packing, grid };
    let report = verify_disconnection(&view, &set, &req, &engine)?;

    let mut grid_table = Table::new("verify_grid.csv", &["p1", "eps", "delta", "c", "k", "value", "identity_residual"]);
    for g in &report.theorem.points {
        grid_table.row(vec![num(g.p1), num(g.eps), num(g.delta), num(g.c), g.k.to_string(), num(g.value), num(g.identity_residual)]);
    }
    let profile = profile_table("verify_profile.csv", &report.profile);

    let e = &report.empirical;
    let g = &report.theorem.argmin;
    let mut summary = String::new();
    let radius = report.profile.last().map_or(0, |r| r.radius);
    let _ = writeln!(summary, "{:<12} {} [{}, {}] at R = {radius}", "empirical", e.point, e.ci_low, e.ci_high);
    let _ = writeln!(summary, "{:<12} k = {} (eps = {}, c = {})", "packing", report.packing.k, a.lemma_eps, a.c);
    let _ = writeln!(summary, "{:<12} {}", "lemma rhs", report.lemma_rhs);
    let _ = writeln!(
        summary,
        "{:<12} {} at p1 = {}, eps = {}, delta = {}, k = {}",
        "theorem rhs", report.theorem.value, g.p1, g.eps, g.delta, g.k
    );
    let _ = writeln!(summary, "{:<12} {}", "margin", report.margin);
    let verdict = match report.verdict {
        Verdict::Consistent => "consistent",
        Verdict::ViolationCandidate => "violation candidate",
    };
    let _ = writeln!(summary, "{:<12} {verdict}", "verdict");
    for d in &report.diagnostics {
        let _ = writeln!(summary, "  note: {d}");
    }

    let json = envelope("verify-bound", a.common.seed, &a, &report)?;
    emit(a.common.out.as_deref(), "verify.json", &json, &[grid_table, profile], &summary)?;
    Ok(match report.verdict {
        Verdict::Consistent => Outcome::Done,
        Verdict::ViolationCandidate => Outcome::Violation,
    })
}

#[derive(Serialize)]
struct SimulateOutput {
    set_size: usize,
    profile: Vec<RadiusEstimate>,
}

pub fn simulate(mut a: SimulateArgs) -> Result<Outcome> {
    let engine = engine(&a.common)?;
    let outer = *a.radii.iter().max().ok_or_else(|| Error::Parameter("no radii given".into()))?;
    if a.common.truncation.is_none() && !is_file(&a.common) {
        a.common.truncation = Some(outer);
    }
    let set_args = a.set.clone();
    let (view, set) = materialize(&mut a.common, 0, |v| resolve_set(v, &set_args))?;
    if set.is_empty() {
        return Err(Error::Degenerate("S is empty".into()));
    }
    let params = PercolationParams::new(a.p, a.common.seed, a.replicas)?;
    let profile: Vec<RadiusEstimate> = engine
        .disconnection_profile(&view, &VertexSet::new(set.iter().copied()), &a.radii, &params)?
        .into_iter()
        .zip(&a.radii)
        .map(|(estimate, &radius)| RadiusEstimate { radius, estimate })
        .collect();
    let mut summary = String::new();
    for r in &profile {
        let _ = writeln!(summary, "R = {:<6} {} [{}, {}]", r.radius, r.estimate.point, r.estimate.ci_low, r.estimate.ci_high);
    }
    let table = profile_table("simulate.csv", &profile);
    let out = SimulateOutput { set_size: set.len(), profile };
    let json = envelope("simulate", a.common.seed, &a, &out)?;
    emit(a.common.out.as_deref(), "simulate.json", &json, &[table], &summary)?;
    Ok(Outcome::Done)
}
