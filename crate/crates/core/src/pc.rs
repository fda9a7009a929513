//! Subcritical certificates from local witnesses, lower bounds on the
//! critical probability, and the connection bound on the supercritical side.
//!
//! A vertex `v` is certified at `p` when some finite set `S` with `v ∈ S°`
//! (a ball, or a box on lattices) has `φ_p^v(S) ≤ 1 − ε0`. The largest `p` at which every vertex of a
//! family is certified is a lower bound for the critical probability on that
//! family; for vertex-transitive graphs the origin alone is enough.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::engine::{Engine, PercolationParams};
use crate::error::{ensure_open_unit, Error, Result};
use crate::exact::rational;
use crate::graph::{GraphView, VertexId, VertexSet};
use crate::phi::{format_rational, phi_mc, ExactPhi, PhiConventions, PhiMethod, PhiMethodTag, PhiQuery, DEFAULT_EXACT_CAP};

/// Attached to every result of [`audit_wc1`].
pub const AUDIT_LABEL: &str = "audited, not proven";

/// Family of candidate sets `S_v` indexed by a radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessShape {
    /// Graph-distance ball `B(v,r)`.
    #[default]
    Ball,
    /// Lattices only: live points within sup-norm distance `r` of `v`.
    Box,
}

impl WitnessShape {
    pub fn name(self) -> &'static str {
        match self {
            WitnessShape::Ball => "ball",
            WitnessShape::Box => "box",
        }
    }
}

impl std::str::FromStr for WitnessShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ball" => Ok(WitnessShape::Ball),
            "box" => Ok(WitnessShape::Box),
            _ => Err(Error::Parameter(format!("unknown witness shape {s:?} (expected ball or box)"))),
        }
    }
}

/// The candidate set of radius `r` around `v`.
pub fn witness_set(view: &GraphView, v: VertexId, r: u32, shape: WitnessShape) -> Result<VertexSet> {
    view.check_live(v)?;
    let set = match shape {
        WitnessShape::Ball => view.ball(v, r)?.vertices(),
        WitnessShape::Box => {
            let center = view
                .lattice_coords(v)
                .ok_or_else(|| Error::Parameter("box witnesses need a lattice graph".into()))?
                .to_vec();
            let r = r as i32;
            let mut offset = vec![-r; center.len()];
            let mut out = Vec::new();
            loop {
                let point: Vec<i32> = center.iter().zip(&offset).map(|(c, o)| c + o).collect();
                let u = view.lattice_point(&point).ok_or_else(|| {
                    Error::TruncationTooSmall(format!("box of radius {r} around {} leaves the truncation", view.label(v)))
                })?;
                if view.is_live(u) {
                    out.push(u);
                }
                let Some(i) = offset.iter().position(|&o| o < r) else { break };
                offset[i] += 1;
                offset[..i].iter_mut().for_each(|o| *o = -r);
            }
            VertexSet::new(out)
        }
    };
    // Every member must be complete for its interior status to be known.
    view.interior(&set)?;
    Ok(set)
}

/// How φ is evaluated while searching for witnesses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessConfig {
    pub eps0: f64,
    pub r_max: u32,
    pub shape: WitnessShape,
    /// Interiors up to this size are evaluated exactly.
    pub exact_cap: usize,
    pub conventions: PhiConventions,
    pub seed: u64,
    pub replicas: u64,
}

impl WitnessConfig {
    pub fn new(eps0: f64, r_max: u32) -> Self {
        WitnessConfig {
            eps0,
            r_max,
            shape: WitnessShape::Ball,
            exact_cap: DEFAULT_EXACT_CAP,
            conventions: PhiConventions::default(),
            seed: 0,
            replicas: 20_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_open_unit("eps0", self.eps0)?;
        if self.r_max == 0 {
            return Err(Error::Parameter("r_max must be at least 1".into()));
        }
        if self.replicas == 0 {
            return Err(Error::Parameter("replicas must be positive".into()));
        }
        Ok(())
    }
}

/// One evaluation of `φ_p^v(S)` for the witness set `S` of radius `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiEvaluation {
    pub vertex: VertexId,
    pub label: String,
    pub radius: u32,
    pub p: f64,
    pub method: PhiMethodTag,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub exact: Option<String>,
    pub interior_size: usize,
    /// Whether this evaluation passed the test it was made for.
    pub certified: bool,
}

/// Exact φ tables by vertex and candidate set. Tables do not depend on `p`, so a
/// bisection over `p` enumerates every ball once.
type PhiKey = (VertexId, u32, WitnessShape, PhiConventions);

#[derive(Debug, Default)]
pub struct PhiCache {
    tables: Mutex<HashMap<PhiKey, Arc<ExactPhi>>>,
}

impl PhiCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn get(&self, view: &GraphView, v: VertexId, r: u32, set: &VertexSet, cfg: &WitnessConfig) -> Result<Arc<ExactPhi>> {
        let key = (v, r, cfg.shape, cfg.conventions);
        if let Some(t) = self.tables.lock().unwrap().get(&key) {
            return Ok(Arc::clone(t));
        }
        let table = ExactPhi::prepare(view, v, set, cfg.conventions, cfg.exact_cap)?
            .ok_or_else(|| Error::Internal(format!("{} is not interior to its own witness set", view.label(v))))?;
        let table = Arc::new(table);
        self.tables.lock().unwrap().insert(key, Arc::clone(&table));
        Ok(table)
    }
}

/// Which side of the threshold an evaluation is tested against.
#[derive(Clone, Copy)]
enum Test {
    AtMost(f64),
    Above(f64),
}

#[allow(clippy::too_many_arguments)]
fn evaluate_witness(
    view: &GraphView,
    v: VertexId,
    r: u32,
    p: f64,
    cfg: &WitnessConfig,
    test: Test,
    engine: &Engine,
    cache: &PhiCache,
) -> Result<PhiEvaluation> {
    let set = witness_set(view, v, r, cfg.shape)?;
    let interior_size = view.interior(&set)?.len();
    let label = view.label(v);
    if interior_size <= cfg.exact_cap.min(63) {
        let table = cache.get(view, v, r, &set, cfg)?;
        let exact = table.rational(&rational(p));
        let value = table.value(p);
        let certified = match test {
            Test::AtMost(t) => exact <= rational(t),
            Test::Above(t) => exact > rational(t),
        };
        return Ok(PhiEvaluation {
            vertex: v,
            label,
            radius: r,
            p,
            method: PhiMethodTag::Exact,
            value,
            ci_low: value,
            ci_high: value,
            exact: Some(format_rational(&exact)),
            interior_size,
            certified,
        });
    }
    let params = PercolationParams::new(p, cfg.seed, cfg.replicas)?;
    let q = PhiQuery::new(view, v, set, p, PhiMethod::MonteCarlo(params)).with_conventions(cfg.conventions);
    let result = phi_mc(&q, engine)?;
    let (lo, hi) = result.ci.expect("Monte Carlo result carries an interval");
    let certified = match test {
        Test::AtMost(t) => hi <= t,
        Test::Above(t) => lo > t,
    };
    Ok(PhiEvaluation {
        vertex: v,
        label,
        radius: r,
        p,
        method: PhiMethodTag::MonteCarlo,
        value: result.value,
        ci_low: lo,
        ci_high: hi,
        exact: None,
        interior_size,
        certified,
    })
}

/// Outcome of [`find_witness`]: the φ trajectory over the radii tried, and
/// the certifying evaluation if one was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessSearch {
    pub vertex: VertexId,
    pub p: f64,
    pub eps0: f64,
    pub witness: Option<PhiEvaluation>,
    pub trajectory: Vec<PhiEvaluation>,
}

impl WitnessSearch {
    pub fn radius(&self) -> Option<u32> {
        self.witness.as_ref().map(|w| w.radius)
    }
}

/// Smallest `r ≤ r_max` whose witness set has `φ_p^v(S) ≤ 1 − ε0`. Exact evaluations
/// must satisfy the inequality as rationals; Monte Carlo ones need the whole
/// interval below the threshold.
pub fn find_witness(
    view: &GraphView,
    v: VertexId,
    p: f64,
    cfg: &WitnessConfig,
    engine: &Engine,
    cache: &PhiCache,
) -> Result<WitnessSearch> {
    cfg.validate()?;
    ensure_open_unit("p", p)?;
    witness_set(view, v, cfg.r_max, cfg.shape)?;
    let threshold = 1.0 - cfg.eps0;
    let mut trajectory = Vec::new();
    for r in 1..=cfg.r_max {
        let e = evaluate_witness(view, v, r, p, cfg, Test::AtMost(threshold), engine, cache)?;
        let done = e.certified;
        trajectory.push(e);
        if done {
            return Ok(WitnessSearch { vertex: v, p, eps0: cfg.eps0, witness: trajectory.last().cloned(), trajectory });
        }
    }
    Ok(WitnessSearch { vertex: v, p, eps0: cfg.eps0, witness: None, trajectory })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcriticalCertificate {
    pub p: f64,
    pub eps0: f64,
    pub witnesses: Vec<PhiEvaluation>,
}

impl SubcriticalCertificate {
    /// Re-checks the recorded values against the margin.
    pub fn check(&self) -> Result<()> {
        for w in &self.witnesses {
            let ok = match w.method {
                PhiMethodTag::MonteCarlo => w.ci_high <= 1.0 - self.eps0,
                _ => w.value <= 1.0 - self.eps0,
            };
            if !ok || w.radius == 0 {
                return Err(Error::Internal(format!("witness at {} does not certify", w.label)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub p: f64,
    pub accepted: bool,
    pub searches: Vec<WitnessSearch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcBound {
    /// Largest grid value at which the whole family is certified, or 0.
    pub value: f64,
    pub tolerance: f64,
    pub family: Vec<String>,
    pub config: WitnessConfig,
    pub certificate: Option<SubcriticalCertificate>,
    pub steps: Vec<BisectionStep>,
}

/// Bisection over the grid `{i·tol}` for the largest `p` at which every
/// vertex of `family` has a witness. Monte Carlo evaluations at different
/// `p` share configurations, so acceptance is monotone along the search.
pub fn pc_lower_bound(
    view: &GraphView,
    family: &[VertexId],
    cfg: &WitnessConfig,
    tolerance: f64,
    engine: &Engine,
) -> Result<PcBound> {
    cfg.validate()?;
    if !(tolerance > 0.0 && tolerance <= 0.5) {
        return Err(Error::Parameter(format!("tolerance must lie in (0, 0.5], got {tolerance}")));
    }
    if family.is_empty() {
        return Err(Error::Parameter("vertex family is empty".into()));
    }
    for &v in family {
        witness_set(view, v, cfg.r_max, cfg.shape)?;
    }
    let cache = PhiCache::new();
    let n = (1.0 / tolerance).round() as u64;
    let grid = |i: u64| i as f64 / n as f64;
    let mut steps = Vec::new();
    let mut best: Option<SubcriticalCertificate> = None;
    let (mut lo, mut hi) = (0u64, n);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let p = grid(mid);
        let mut searches = Vec::with_capacity(family.len());
        let mut accepted = true;
        for &v in family {
            let s = find_witness(view, v, p, cfg, engine, &cache)?;
            accepted &= s.witness.is_some();
            searches.push(s);
            if !accepted {
                break;
            }
        }
        if accepted {
            lo = mid;
            best = Some(SubcriticalCertificate {
                p,
                eps0: cfg.eps0,
                witnesses: searches.iter().filter_map(|s| s.witness.clone()).collect(),
            });
        } else {
            hi = mid;
        }
        steps.push(BisectionStep { p, accepted, searches });
    }
    Ok(PcBound {
        value: grid(lo),
        tolerance,
        family: family.iter().map(|&v| view.label(v)).collect(),
        config: *cfg,
        certificate: best,
        steps,
    })
}

/// Parameters of the supercritical connection bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupercriticalParams {
    pub p: f64,
    pub p1: f64,
    pub eps: f64,
    pub eps1: f64,
    pub pc_tilde: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PepeReport {
    pub holds: bool,
    /// `((1−p)/(1−p1))^(1−ε1)`
    pub lhs: f64,
    /// `((1−p)/(1−p̃c))^(1−ε)`
    pub rhs: f64,
    pub violations: Vec<String>,
}

/// Checks `p1 ∈ (p̃c, p)`, `ε1 ∈ (0, ε)` and
/// `((1−p)/(1−p1))^(1−ε1) < ((1−p)/(1−p̃c))^(1−ε)`.
pub fn check_pepe(sp: &SupercriticalParams) -> PepeReport {
    let SupercriticalParams { p, p1, eps, eps1, pc_tilde } = *sp;
    let mut violations = Vec::new();
    for (name, x) in [("p", p), ("p1", p1), ("eps", eps), ("eps1", eps1), ("pc_tilde", pc_tilde)] {
        if !(x > 0.0 && x < 1.0) {
            violations.push(format!("{name} = {x} is not in (0,1)"));
        }
    }
    if !(pc_tilde < p1 && p1 < p) {
        violations.push(format!("p1 ∈ (p̃c, p) fails: p̃c = {pc_tilde}, p1 = {p1}, p = {p}"));
    }
    if !(0.0 < eps1 && eps1 < eps) {
        violations.push(format!("ε1 ∈ (0, ε) fails: ε1 = {eps1}, ε = {eps}"));
    }
    let lhs = ((1.0 - p) / (1.0 - p1)).powf(1.0 - eps1);
    let rhs = ((1.0 - p) / (1.0 - pc_tilde)).powf(1.0 - eps);
    if lhs.is_nan() || rhs.is_nan() || lhs >= rhs {
        violations.push(format!("((1-p)/(1-p1))^(1-ε1) < ((1-p)/(1-p̃c))^(1-ε) fails: {lhs} ≥ {rhs}"));
    }
    PepeReport { holds: violations.is_empty(), lhs, rhs, violations }
}

/// `1 − ((1−p)/(1−p1))^(1−ε1)` with only the arithmetic preconditions.
pub fn connection_formula(p: f64, p1: f64, eps1: f64) -> Result<f64> {
    ensure_open_unit("p", p)?;
    if !(p1 > 0.0 && p1 <= p) {
        return Err(Error::Parameter(format!("p1 must lie in (0, p], got {p1}")));
    }
    if !(0.0..1.0).contains(&eps1) {
        return Err(Error::Parameter(format!("eps1 must lie in [0,1), got {eps1}")));
    }
    Ok(1.0 - ((1.0 - p) / (1.0 - p1)).powf(1.0 - eps1))
}

/// Lower bound on `P_p(w ↔ ∞)` for a vertex satisfying the audit condition.
/// Fails with a parameter error naming every violated constraint.
pub fn connection_lower_bound(sp: &SupercriticalParams) -> Result<f64> {
    let report = check_pepe(sp);
    if !report.holds {
        return Err(Error::Parameter(report.violations.join("; ")));
    }
    connection_formula(sp.p, sp.p1, sp.eps1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wc1Audit {
    pub vertex: VertexId,
    pub p1: f64,
    pub eps1: f64,
    pub holds: bool,
    pub label: String,
    pub evaluations: Vec<PhiEvaluation>,
}

/// Bounded check of `φ_q^w(S) > 1 − ε1` over `q ∈ q_grid` and the witness
/// sets of radius `1 ≤ r ≤ cfg.r_max`. Passing says nothing about larger sets.
#[allow(clippy::too_many_arguments)]
pub fn audit_wc1(
    view: &GraphView,
    w: VertexId,
    p1: f64,
    eps1: f64,
    q_grid: &[f64],
    cfg: &WitnessConfig,
    engine: &Engine,
    cache: &PhiCache,
) -> Result<Wc1Audit> {
    ensure_open_unit("p1", p1)?;
    ensure_open_unit("eps1", eps1)?;
    witness_set(view, w, cfg.r_max, cfg.shape)?;
    if q_grid.is_empty() {
        return Err(Error::Parameter("audit grid is empty".into()));
    }
    let threshold = 1.0 - eps1;
    let mut evaluations = Vec::new();
    let mut holds = true;
    for &q in q_grid {
        if q < p1 {
            return Err(Error::Parameter(format!("audit point q = {q} is below p1 = {p1}")));
        }
        ensure_open_unit("q", q)?;
        for r in 1..=cfg.r_max {
            let e = evaluate_witness(view, w, r, q, cfg, Test::Above(threshold), engine, cache)?;
            holds &= e.certified;
            evaluations.push(e);
        }
    }
    Ok(Wc1Audit { vertex: w, p1, eps1, holds, label: AUDIT_LABEL.into(), evaluations })
}

/// Default audit points: `p1` and two more spread over `[p1, 1)`.
pub fn default_audit_grid(p1: f64) -> Vec<f64> {
    vec![p1, p1 + (1.0 - p1) / 3.0, p1 + 2.0 * (1.0 - p1) / 3.0]
}
