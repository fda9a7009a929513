//! Greedy lower bounds on the packing number.
//!
//! Candidates are taken from `S` in a fixed order. A candidate `w` in the
//! current punctured view `G_{i-1}` is accepted with the smallest radius
//! `D ∈ [D_min, D_max]` for which
//!
//! ```text
//! P(w ↛ ∂_in B(w,D)) ≤ P(w ↛ ∞) ≤ (1+ε) P(w ↛ ∂_in B(w,D))      (ctd)
//! P(w ↔ ∞) ≥ c                                                   (wil)
//! ```
//!
//! hold in `G_{i-1}`, after which `B(w,D)` is removed. Connection to
//! infinity is replaced by connection to `∂_in B(w,R_proxy)`, with a
//! stabilization check against `2·R_proxy`. Every accepted step is a valid
//! choice, so the number of steps is a lower bound on the packing number up
//! to the confidence of the individual checks.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::engine::{Engine, ExitHistogram, LevelMap, PercolationParams};
use crate::error::{ensure_open_unit, Error, Result};
use crate::graph::{GraphView, VertexId};
use crate::pc::{audit_wc1, connection_lower_bound, PhiCache, SupercriticalParams, Wc1Audit, WitnessConfig};
use crate::stats::Estimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OrderPolicy {
    /// All of `S`, nearest to the origin first.
    NearestFirst,
    /// Every `every`-th element of `S` in generator order, then nearest first.
    Spacing { every: usize },
}

/// How the connection condition is checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WilMethod {
    /// Monte Carlo estimate of `P(w ↔ ∂_in B(w,R_proxy))`, an upper bound
    /// on `P(w ↔ ∞)`: failures are definitive, passes are proxy passes.
    Proxy,
    /// The connection bound fed by a bounded audit at `w`; falls back to
    /// the proxy when the audit or the parameter constraints fail.
    Analytic { p1: f64, eps: f64, eps1: f64, pc_tilde: f64, audit: WitnessConfig, q_grid: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingRequest {
    /// `S` in generator order.
    pub set: Vec<VertexId>,
    pub p: f64,
    pub eps: f64,
    pub c: f64,
    pub d_min: u32,
    pub d_max: u32,
    pub r_proxy: u32,
    pub seed: u64,
    pub replicas: u64,
    pub order: OrderPolicy,
    pub wil: WilMethod,
}

impl PackingRequest {
    pub fn new(set: Vec<VertexId>, p: f64, eps: f64, c: f64) -> Self {
        PackingRequest {
            set,
            p,
            eps,
            c,
            d_min: 1,
            d_max: 3,
            r_proxy: 16,
            seed: 0,
            replicas: 20_000,
            order: OrderPolicy::NearestFirst,
            wil: WilMethod::Proxy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_open_unit("p", self.p)?;
        ensure_open_unit("eps", self.eps)?;
        ensure_open_unit("c", self.c)?;
        if self.d_min == 0 || self.d_min > self.d_max {
            return Err(Error::Parameter(format!("need 1 ≤ D_min ≤ D_max, got {}..{}", self.d_min, self.d_max)));
        }
        if self.r_proxy <= self.d_max {
            return Err(Error::Parameter(format!("R_proxy = {} must exceed D_max = {}", self.r_proxy, self.d_max)));
        }
        if self.replicas == 0 {
            return Err(Error::Parameter("replicas must be positive".into()));
        }
        if let OrderPolicy::Spacing { every: 0 } = self.order {
            return Err(Error::Parameter("spacing must be at least 1".into()));
        }
        Ok(())
    }

    fn params(&self) -> PercolationParams {
        PercolationParams { p: self.p, seed: self.seed, replicas: self.replicas }
    }
}

/// Candidates in the order they are tried.
pub fn candidate_order(view: &GraphView, set: &[VertexId], order: OrderPolicy) -> Vec<VertexId> {
    let mut picked: Vec<VertexId> = match order {
        OrderPolicy::NearestFirst => set.to_vec(),
        OrderPolicy::Spacing { every } => set.iter().copied().step_by(every.max(1)).collect(),
    };
    let mut seen = HashSet::new();
    picked.retain(|v| seen.insert(*v));
    // Stable: ties keep generator order.
    picked.sort_by_key(|&v| if v.index() < view.id_bound() { view.base_depth(v) } else { u32::MAX });
    picked
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtdCheck {
    pub d: u32,
    /// `P(w ↛ ∂_in B(w,D))`
    pub q_ball: Estimate,
    /// `P(w ↛ ∂_in B(w,R_proxy))`
    pub q_inf: Estimate,
    /// `P(w ↛ ∂_in B(w,2·R_proxy))`, for the stabilization test.
    pub q_far: Estimate,
    /// `q_inf − q_ball`: replicas whose cluster reaches `∂_in B(w,D)` but
    /// not `∂_in B(w,R_proxy)`.
    pub excess: Estimate,
    /// `ε·q_ball.ci_low − excess.ci_high`; the test passes when nonnegative.
    pub margin: f64,
    pub stabilized: bool,
    /// The component of `w` lies inside `B(w,D)`, so both events coincide.
    pub structural: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilKind {
    Analytic,
    Proxy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilCheck {
    pub method: WilKind,
    pub pass: bool,
    /// `"proxy pass"` for passes of the proxy.
    pub label: Option<String>,
    /// `P(w ↔ ∂_in B(w,R_proxy))`
    pub estimate: Estimate,
    /// `P(w ↔ ∂_in B(w,2·R_proxy))`
    pub estimate_far: Estimate,
    pub analytic_bound: Option<f64>,
    pub audit: Option<Wc1Audit>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingStep {
    pub index: usize,
    pub w: VertexId,
    pub label: String,
    pub d: u32,
    pub ctd: CtdCheck,
    pub wil: WilCheck,
    /// Radii tried before `d`, with their outcomes.
    pub tried: Vec<CtdCheck>,
    /// `B(w,D)` in `G_{i-1}`: every vertex the event `w ↛ ∂_in B(w,D)` depends on.
    pub dependency_set: Vec<VertexId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub w: VertexId,
    pub label: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingCertificate {
    pub k: usize,
    pub steps: Vec<PackingStep>,
    pub rejected: Vec<Rejection>,
    pub request: PackingRequest,
    pub confidence: f64,
    /// Number of individual interval statements the certificate rests on.
    pub interval_checks: usize,
    pub dependency_sets_disjoint: bool,
}

/// Exit histograms keyed by puncture history and candidate; shared between
/// packing runs on the same view that differ only in `ε` or `c`.
/// Puncture history, candidate, outer radius, `p` bits, seed, replicas.
type HistogramKey = (Vec<(VertexId, u32)>, VertexId, u32, u64, u64, u64);

#[derive(Debug, Default)]
pub struct HistogramCache {
    entries: Mutex<HashMap<HistogramKey, Arc<ExitHistogram>>>,
}

impl HistogramCache {
    pub fn new() -> Self {
        Self::default()
    }
}

struct Profile {
    hist: Arc<ExitHistogram>,
    confidence: f64,
    /// `B(w,D) = B(w,2R)` holds for every `D ≥ finite_radius`.
    finite_radius: Option<u32>,
}

impl Profile {
    fn disconnection(&self, radius: u32) -> Estimate {
        Estimate::wilson(self.hist.disconnected_at(radius), self.hist.replicas, self.confidence)
    }
}

#[allow(clippy::too_many_arguments)]
fn profile(
    view: &GraphView,
    history: &[(VertexId, u32)],
    w: VertexId,
    req: &PackingRequest,
    engine: &Engine,
    cache: &HistogramCache,
) -> Result<Profile> {
    let outer = 2 * req.r_proxy;
    let levels = LevelMap::new(view, w, outer)?;
    let deepest = levels.level.iter().copied().max().unwrap_or(0);
    let finite_radius = (deepest < outer).then_some(deepest);
    let key = (history.to_vec(), w, outer, req.p.to_bits(), req.seed, req.replicas);
    let cached = cache.entries.lock().unwrap().get(&key).cloned();
    let hist = match cached {
        Some(h) => h,
        None => {
            let h = Arc::new(engine.exit_histogram(view, &levels, &[0], true, &req.params()));
            cache.entries.lock().unwrap().insert(key, Arc::clone(&h));
            h
        }
    };
    Ok(Profile { hist, confidence: engine.confidence(), finite_radius })
}

fn ctd_from_profile(prof: &Profile, d: u32, req: &PackingRequest) -> Result<CtdCheck> {
    let q_ball = prof.disconnection(d);
    let q_inf = prof.disconnection(req.r_proxy);
    let q_far = prof.disconnection(2 * req.r_proxy);
    // Pathwise containment: reaching a farther boundary means crossing the nearer one.
    if q_ball.successes > q_inf.successes || q_inf.successes > q_far.successes {
        return Err(Error::Internal("disconnection counts are not monotone in the radius".into()));
    }
    let structural = prof.finite_radius.is_some_and(|f| d >= f);
    // q_inf ≤ (1+ε) q_ball  ⇔  q_inf − q_ball ≤ ε q_ball, and the difference
    // is itself a proportion on the coupled replicas.
    let excess = Estimate::wilson(q_inf.successes - q_ball.successes, q_inf.replicas, prof.confidence);
    let margin = req.eps * q_ball.ci_low - excess.ci_high;
    let stabilized = structural || (q_far.point - q_inf.point) < margin / 4.0;
    let pass = structural || (margin >= 0.0 && stabilized);
    Ok(CtdCheck { d, q_ball, q_inf, q_far, excess, margin, stabilized, structural, pass })
}

/// Tests the ctd condition at `w` and radius `D` in `view`.
pub fn check_ctd(view: &GraphView, w: VertexId, d: u32, req: &PackingRequest, engine: &Engine) -> Result<CtdCheck> {
    req.validate()?;
    view.check_live(w)?;
    let prof = profile(view, &[], w, req, engine, &HistogramCache::new())?;
    ctd_from_profile(&prof, d, req)
}

fn proxy_wil(prof: &Profile, req: &PackingRequest, note: Option<String>) -> WilCheck {
    let estimate = prof.disconnection(req.r_proxy).complement();
    let estimate_far = prof.disconnection(2 * req.r_proxy).complement();
    let (pass, label, note) = if req.c > req.p {
        (false, None, Some(format!("c = {} exceeds p = {}: w must be open", req.c, req.p)))
    } else if estimate.ci_high < req.c {
        (false, None, note)
    } else if estimate.ci_low >= req.c {
        (true, Some("proxy pass".to_string()), note)
    } else {
        (false, None, Some(note.unwrap_or_default() + "interval straddles c"))
    };
    WilCheck { method: WilKind::Proxy, pass, label, estimate, estimate_far, analytic_bound: None, audit: None, note }
}

#[allow(clippy::too_many_arguments)]
fn wil_from_profile(
    view: &GraphView,
    w: VertexId,
    prof: &Profile,
    req: &PackingRequest,
    engine: &Engine,
    phi_cache: &PhiCache,
) -> Result<WilCheck> {
    let WilMethod::Analytic { p1, eps, eps1, pc_tilde, audit, q_grid } = &req.wil else {
        return Ok(proxy_wil(prof, req, None));
    };
    let sp = SupercriticalParams { p: req.p, p1: *p1, eps: *eps, eps1: *eps1, pc_tilde: *pc_tilde };
    let bound = match connection_lower_bound(&sp) {
        Ok(b) => b,
        Err(e) => return Ok(proxy_wil(prof, req, Some(format!("analytic route unavailable: {e}; ")))),
    };
    let report = match audit_wc1(view, w, *p1, *eps1, q_grid, audit, engine, phi_cache) {
        Ok(r) => r,
        Err(Error::TruncationTooSmall(m)) => {
            return Ok(proxy_wil(prof, req, Some(format!("audit unavailable: {m}; "))));
        }
        Err(e) => return Err(e),
    };
    if !report.holds {
        let mut check = proxy_wil(prof, req, Some("audit failed; ".into()));
        check.audit = Some(report);
        return Ok(check);
    }
    let estimate = prof.disconnection(req.r_proxy).complement();
    let estimate_far = prof.disconnection(2 * req.r_proxy).complement();
    Ok(WilCheck {
        method: WilKind::Analytic,
        pass: bound >= req.c,
        label: Some(report.label.clone()),
        estimate,
        estimate_far,
        analytic_bound: Some(bound),
        audit: Some(report),
        note: None,
    })
}

/// Tests the wil condition at `w` in `view`.
pub fn check_wil(view: &GraphView, w: VertexId, req: &PackingRequest, engine: &Engine) -> Result<WilCheck> {
    req.validate()?;
    view.check_live(w)?;
    let prof = profile(view, &[], w, req, engine, &HistogramCache::new())?;
    wil_from_profile(view, w, &prof, req, engine, &PhiCache::new())
}

pub fn certify_packing(view: &GraphView, req: &PackingRequest, engine: &Engine) -> Result<PackingCertificate> {
    certify_packing_cached(view, req, engine, &HistogramCache::new())
}

/// [`certify_packing`] with histograms shared through `cache`.
pub fn certify_packing_cached(
    view: &GraphView,
    req: &PackingRequest,
    engine: &Engine,
    cache: &HistogramCache,
) -> Result<PackingCertificate> {
    req.validate()?;
    let phi_cache = PhiCache::new();
    let mut current = view.clone();
    let mut history: Vec<(VertexId, u32)> = Vec::new();
    let mut steps: Vec<PackingStep> = Vec::new();
    let mut rejected = Vec::new();
    let mut used: HashSet<VertexId> = HashSet::new();
    let mut interval_checks = 0;
    for w in candidate_order(view, &req.set, req.order) {
        if w.index() >= view.id_bound() || !view.is_live(w) {
            rejected.push(Rejection { w, label: w.to_string(), reason: "not a vertex of the graph".into() });
            continue;
        }
        let label = view.label(w);
        if !current.is_live(w) {
            rejected.push(Rejection { w, label, reason: "inside a removed ball".into() });
            continue;
        }
        let prof = match profile(&current, &history, w, req, engine, cache) {
            Ok(p) => p,
            Err(Error::TruncationTooSmall(m)) => {
                rejected.push(Rejection { w, label, reason: format!("truncation: {m}") });
                continue;
            }
            Err(e) => return Err(e),
        };
        let wil = wil_from_profile(&current, w, &prof, req, engine, &phi_cache)?;
        if !wil.pass {
            let reason = match wil.method {
                WilKind::Proxy => format!(
                    "connection {:.4} [{:.4}, {:.4}] below c = {}{}",
                    wil.estimate.point,
                    wil.estimate.ci_low,
                    wil.estimate.ci_high,
                    req.c,
                    wil.note.as_deref().map(|n| format!(" ({})", n.trim_end_matches("; "))).unwrap_or_default()
                ),
                WilKind::Analytic => format!("analytic bound {:.4} below c = {}", wil.analytic_bound.unwrap_or(0.0), req.c),
            };
            rejected.push(Rejection { w, label, reason });
            continue;
        }
        let mut tried = Vec::new();
        let mut chosen = None;
        for d in req.d_min..=req.d_max {
            let check = ctd_from_profile(&prof, d, req)?;
            if check.pass {
                chosen = Some(check);
                break;
            }
            tried.push(check);
        }
        let Some(ctd) = chosen else {
            let best = tried.iter().map(|t| t.margin).fold(f64::NEG_INFINITY, f64::max);
            rejected.push(Rejection {
                w,
                label,
                reason: format!("no radius in {}..={} passes (best margin {best:.4})", req.d_min, req.d_max),
            });
            continue;
        };
        let dependency_set: Vec<VertexId> = current.ball(w, ctd.d)?.members().iter().map(|&(u, _)| u).collect();
        for u in &dependency_set {
            if !used.insert(*u) {
                return Err(Error::Internal(format!("dependency sets overlap at {}", view.label(*u))));
            }
        }
        interval_checks += 3;
        current = current.puncture(&[(w, ctd.d)])?;
        history.push((w, ctd.d));
        steps.push(PackingStep { index: steps.len() + 1, w, label, d: ctd.d, ctd, wil, tried, dependency_set });
    }
    Ok(PackingCertificate {
        k: steps.len(),
        steps,
        rejected,
        request: req.clone(),
        confidence: engine.confidence(),
        interval_checks,
        dependency_sets_disjoint: true,
    })
}

impl PackingCertificate {
    /// Recomputes pairwise disjointness of the recorded dependency sets.
    pub fn verify_disjoint(&self) -> bool {
        let mut seen = HashSet::new();
        self.steps.iter().flat_map(|s| &s.dependency_set).all(|u| seen.insert(*u))
    }
}
