//! The local functional
//!
//! ```text
//! φ_p^v(S) = Σ_{y ∈ S, ∂y ⊄ S} P_p(v ~S°~ ∂y)     if v ∈ S°
//!          = 1                                    if v ∈ S \ S°
//! ```
//!
//! where `v ~S°~ ∂y` means an open path from `v` to a neighbor of `y` that
//! uses interior vertices of `S` only.
//!
//! Exact evaluation enumerates every possible open cluster `C` of `v`
//! inside the interior. A cluster is realized with probability
//! `p^|C| (1-p)^|∂C|`, so grouping the `2^|S°|` configurations by the
//! cluster they give `v` reproduces the full sum with integer counts only.

use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::engine::{sample, Engine, PercolationParams};
use crate::error::{ensure_open_unit, Error, Result};
use crate::exact::{rational, CountTable};
use crate::graph::{GraphView, VertexId, VertexSet};
use crate::stats::{mean_interval, Estimate};

pub const DEFAULT_EXACT_CAP: usize = 25;
/// Hard limit of the bitmask enumeration.
const MASK_LIMIT: usize = 63;

/// Readings of the event `v ~S°~ ∂y` that the definition leaves open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhiConventions {
    /// `v` itself must be open.
    pub requires_source_open: bool,
    /// The path endpoint in `∂y` must itself be interior. When false the
    /// path may end on an open non-interior neighbor of `y`.
    pub endpoint_interior: bool,
}

impl Default for PhiConventions {
    fn default() -> Self {
        PhiConventions { requires_source_open: true, endpoint_interior: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PhiMethod {
    Exact,
    MonteCarlo(PercolationParams),
}

#[derive(Debug, Clone)]
pub struct PhiQuery<'a> {
    pub view: &'a GraphView,
    pub v: VertexId,
    pub set: VertexSet,
    pub p: f64,
    pub method: PhiMethod,
    pub conventions: PhiConventions,
    pub exact_cap: usize,
}

impl<'a> PhiQuery<'a> {
    pub fn new(view: &'a GraphView, v: VertexId, set: VertexSet, p: f64, method: PhiMethod) -> Self {
        PhiQuery { view, v, set, p, method, conventions: PhiConventions::default(), exact_cap: DEFAULT_EXACT_CAP }
    }

    pub fn with_conventions(mut self, conventions: PhiConventions) -> Self {
        self.conventions = conventions;
        self
    }

    pub fn with_exact_cap(mut self, cap: usize) -> Self {
        self.exact_cap = cap;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiTerm {
    pub y: VertexId,
    pub label: String,
    pub probability: f64,
    /// Exact rational value, `numerator/denominator`, for exact evaluations.
    pub exact: Option<String>,
    pub estimate: Option<Estimate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiMethodTag {
    Exact,
    MonteCarlo,
    /// `v` is not interior; the value is 1 by definition.
    NonInterior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiResult {
    pub value: f64,
    pub exact: Option<String>,
    pub terms: Vec<PhiTerm>,
    pub method: PhiMethodTag,
    /// Interval on the sum (Monte Carlo only).
    pub ci: Option<(f64, f64)>,
    pub interior_size: usize,
    pub conventions: PhiConventions,
}

impl PhiResult {
    /// Upper end of what the result certifies: the exact value, or the CI top.
    pub fn upper(&self) -> f64 {
        self.ci.map_or(self.value, |(_, hi)| hi)
    }

    pub fn lower(&self) -> f64 {
        self.ci.map_or(self.value, |(lo, _)| lo)
    }

    fn non_interior(conventions: PhiConventions, interior_size: usize) -> Self {
        PhiResult {
            value: 1.0,
            exact: Some("1".into()),
            terms: Vec::new(),
            method: PhiMethodTag::NonInterior,
            ci: None,
            interior_size,
            conventions,
        }
    }
}

pub(crate) fn format_rational(r: &BigRational) -> String {
    if r.denom() == &num_bigint::BigInt::from(1) {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Vertices of `set` with at least one live neighbor outside it, by id.
pub fn boundary_terms(view: &GraphView, set: &VertexSet) -> Result<Vec<VertexId>> {
    let interior = view.interior(set)?;
    Ok(set.difference(&interior).iter().copied().collect())
}

/// Shared structure of one φ evaluation: the interior in local indices
/// (`v` is 0), its non-interior neighbors, and the targets of every term.
struct Layout {
    interior: Vec<VertexId>,
    interior_adj: Vec<Vec<u32>>,
    /// Non-interior vertices adjacent to the interior.
    outside: Vec<VertexId>,
    /// `outside_adj[k]`: interior neighbors of `outside[k]`.
    outside_adj: Vec<Vec<u32>>,
    terms: Vec<VertexId>,
    /// Interior neighbors of each `y`.
    target: Vec<Vec<u32>>,
    /// Neighbors of each `y` among `outside`.
    target_outside: Vec<Vec<u32>>,
}

impl Layout {
    fn new(view: &GraphView, v: VertexId, set: &VertexSet) -> Result<Option<Self>> {
        view.check_live(v)?;
        if !set.contains(v) {
            return Err(Error::Parameter(format!("vertex {} is not in S", view.label(v))));
        }
        let interior_set = view.interior(set)?;
        if !interior_set.contains(v) {
            return Ok(None);
        }
        let mut interior: Vec<VertexId> = vec![v];
        interior.extend(interior_set.iter().copied().filter(|&u| u != v));
        let local: HashMap<VertexId, u32> = interior.iter().enumerate().map(|(i, &u)| (u, i as u32)).collect();
        let mut outside_local: HashMap<VertexId, u32> = HashMap::new();
        let mut outside = Vec::new();
        let mut outside_adj: Vec<Vec<u32>> = Vec::new();
        let mut interior_adj = Vec::with_capacity(interior.len());
        for (i, &u) in interior.iter().enumerate() {
            let mut adj = Vec::new();
            for w in view.live_neighbors(u) {
                if let Some(&j) = local.get(&w) {
                    adj.push(j);
                } else {
                    let k = *outside_local.entry(w).or_insert_with(|| {
                        outside.push(w);
                        outside_adj.push(Vec::new());
                        outside.len() as u32 - 1
                    });
                    outside_adj[k as usize].push(i as u32);
                }
            }
            interior_adj.push(adj);
        }
        let terms: Vec<VertexId> = set.difference(&interior_set).iter().copied().collect();
        let mut target = Vec::with_capacity(terms.len());
        let mut target_outside = Vec::with_capacity(terms.len());
        for &y in &terms {
            let (mut t, mut o) = (Vec::new(), Vec::new());
            for w in view.live_neighbors(y) {
                if let Some(&j) = local.get(&w) {
                    t.push(j);
                } else if let Some(&k) = outside_local.get(&w) {
                    // Only endpoints adjacent to the interior can ever be reached.
                    o.push(k);
                }
            }
            target.push(t);
            target_outside.push(o);
        }
        Ok(Some(Layout { interior, interior_adj, outside, outside_adj, terms, target, target_outside }))
    }
}

fn mask(items: &[u32]) -> u64 {
    items.iter().fold(0, |m, &i| m | 1 << i)
}

/// Probability tables of every boundary term, independent of `p`.
#[derive(Debug, Clone)]
pub struct ExactPhi {
    interior_size: usize,
    terms: Vec<VertexId>,
    /// `tables[t][0]`: clusters hitting the target outright. `tables[t][m]`
    /// for `m >= 1`: clusters adjacent to `m` non-interior endpoints, each
    /// of which reaches the target when open (alternative endpoint rule).
    tables: Vec<Vec<CountTable>>,
    conventions: PhiConventions,
}

impl ExactPhi {
    /// `None` when `v` is not interior (φ = 1).
    pub fn prepare(view: &GraphView, v: VertexId, set: &VertexSet, conventions: PhiConventions, cap: usize) -> Result<Option<Self>> {
        let cap = cap.min(MASK_LIMIT);
        let Some(layout) = Layout::new(view, v, set)? else {
            return Ok(None);
        };
        let n = layout.interior.len();
        if n > cap {
            return Err(Error::InteriorTooLarge { size: n, cap });
        }
        if !conventions.endpoint_interior && layout.outside.len() > 64 {
            return Err(Error::Resource(format!("{} non-interior endpoints exceed 64", layout.outside.len())));
        }
        let nbr: Vec<u64> = layout.interior_adj.iter().map(|a| mask(a)).collect();
        let mut outside = vec![0u64; n];
        if !conventions.endpoint_interior {
            for (k, adj) in layout.outside_adj.iter().enumerate() {
                for &i in adj {
                    outside[i as usize] |= 1 << k;
                }
            }
        }
        let classes = if conventions.endpoint_interior {
            1
        } else {
            1 + layout.target_outside.iter().map(Vec::len).max().unwrap_or(0)
        };
        let mut tables = vec![vec![CountTable::new(n, n); classes]; layout.terms.len()];
        let shift = usize::from(!conventions.requires_source_open);
        // Terms reachable through each interior vertex and each outside endpoint.
        let mut via_interior: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut via_outside: Vec<Vec<u32>> = vec![Vec::new(); layout.outside.len()];
        for t in 0..layout.terms.len() {
            for &i in &layout.target[t] {
                via_interior[i as usize].push(t as u32);
            }
            for &k in &layout.target_outside[t] {
                via_outside[k as usize].push(t as u32);
            }
        }
        let touch = via_interior.iter().enumerate().filter(|(_, t)| !t.is_empty()).fold(0u64, |m, (i, _)| m | 1 << i);
        let mut hit = vec![0u64; layout.terms.len()];
        let mut near = vec![(0u64, 0usize); layout.terms.len()];
        let mut round = 0u64;
        let mut touched: Vec<u32> = Vec::new();
        let mut emit = |c: u64, closed: u64, near_outside: u64| {
            round += 1;
            let open = c.count_ones() as usize - shift;
            let closed = closed.count_ones() as usize;
            let mut bits = c & touch;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                for &t in &via_interior[i] {
                    if hit[t as usize] != round {
                        hit[t as usize] = round;
                        tables[t as usize][0].add(open, closed, 1);
                    }
                }
            }
            if !conventions.endpoint_interior {
                touched.clear();
                let mut bits = near_outside;
                while bits != 0 {
                    let k = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    for &t in &via_outside[k] {
                        let t = t as usize;
                        if hit[t] == round {
                            continue;
                        }
                        if near[t].0 != round {
                            near[t] = (round, 0);
                            touched.push(t as u32);
                        }
                        near[t].1 += 1;
                    }
                }
                for &t in &touched {
                    let t = t as usize;
                    tables[t][near[t].1].add(open, closed, 1);
                }
            }
        };
        enumerate_clusters(&nbr, &outside, &mut emit);
        Ok(Some(ExactPhi { interior_size: n, terms: layout.terms, tables, conventions }))
    }

    pub fn interior_size(&self) -> usize {
        self.interior_size
    }

    pub fn term_vertices(&self) -> &[VertexId] {
        &self.terms
    }

    pub fn term_values(&self, p: f64) -> Vec<f64> {
        self.tables
            .iter()
            .map(|classes| {
                classes
                    .iter()
                    .enumerate()
                    .map(|(m, t)| {
                        let reach = if m == 0 { 1.0 } else { 1.0 - (1.0 - p).powi(m as i32) };
                        reach * t.value(p)
                    })
                    .sum()
            })
            .collect()
    }

    pub fn value(&self, p: f64) -> f64 {
        self.term_values(p).iter().sum()
    }

    pub fn term_rationals(&self, p: &BigRational) -> Vec<BigRational> {
        let one = BigRational::from_integer(1.into());
        let q = &one - p;
        self.tables
            .iter()
            .map(|classes| {
                let mut total = BigRational::zero();
                for (m, t) in classes.iter().enumerate() {
                    if t.is_zero() {
                        continue;
                    }
                    let reach = if m == 0 { one.clone() } else { &one - num_traits::pow(q.clone(), m) };
                    total += reach * t.rational(p);
                }
                total
            })
            .collect()
    }

    pub fn rational(&self, p: &BigRational) -> BigRational {
        self.term_rationals(p).into_iter().fold(BigRational::zero(), |a, b| a + b)
    }

    pub fn conventions(&self) -> PhiConventions {
        self.conventions
    }
}

/// Every connected vertex set containing vertex 0, each exactly once, with
/// its interior neighborhood mask and non-interior neighborhood mask.
fn enumerate_clusters(nbr: &[u64], outside: &[u64], emit: &mut impl FnMut(u64, u64, u64)) {
    // Invariant: `frontier` = N(c) \ (c ∪ banned).
    #[allow(clippy::too_many_arguments)]
    fn grow(
        nbr: &[u64],
        outside: &[u64],
        c: u64,
        frontier: u64,
        banned: u64,
        reach: u64,
        reach_out: u64,
        emit: &mut impl FnMut(u64, u64, u64),
    ) {
        emit(c, reach & !c, reach_out);
        let mut frontier = frontier;
        let mut banned = banned;
        while frontier != 0 {
            let u = frontier.trailing_zeros() as usize;
            let bit = 1u64 << u;
            frontier &= !bit;
            let grown = c | bit;
            let next = frontier | (nbr[u] & !grown & !banned);
            grow(nbr, outside, grown, next, banned, reach | nbr[u], reach_out | outside[u], emit);
            banned |= bit;
        }
    }
    grow(nbr, outside, 1, nbr[0] & !1, 0, nbr[0], outside[0], emit);
}

fn check_query(q: &PhiQuery<'_>) -> Result<()> {
    ensure_open_unit("p", q.p)
}

/// Exact φ; fails with [`Error::InteriorTooLarge`] above `exact_cap`.
pub fn phi_exact(q: &PhiQuery<'_>) -> Result<PhiResult> {
    check_query(q)?;
    let Some(exact) = ExactPhi::prepare(q.view, q.v, &q.set, q.conventions, q.exact_cap)? else {
        let interior = q.view.interior(&q.set)?.len();
        return Ok(PhiResult::non_interior(q.conventions, interior));
    };
    let pr = rational(q.p);
    let exact_terms = exact.term_rationals(&pr);
    let values = exact.term_values(q.p);
    let total = exact_terms.iter().fold(BigRational::zero(), |a, b| a + b);
    let terms = exact
        .terms
        .iter()
        .zip(values)
        .zip(&exact_terms)
        .map(|((&y, probability), r)| PhiTerm {
            y,
            label: q.view.label(y),
            probability,
            exact: Some(format_rational(r)),
            estimate: None,
        })
        .collect::<Vec<_>>();
    Ok(PhiResult {
        value: terms.iter().map(|t| t.probability).sum(),
        exact: Some(format_rational(&total)),
        terms,
        method: PhiMethodTag::Exact,
        ci: None,
        interior_size: exact.interior_size,
        conventions: q.conventions,
    })
}

/// Monte Carlo φ: every replica's configuration serves all terms. The
/// interval on the sum treats the number of terms hit per replica as one
/// bounded sample.
pub fn phi_mc(q: &PhiQuery<'_>, engine: &Engine) -> Result<PhiResult> {
    check_query(q)?;
    let params = match q.method {
        PhiMethod::MonteCarlo(params) => params.with_p(q.p),
        PhiMethod::Exact => return Err(Error::Parameter("phi_mc needs Monte Carlo parameters".into())),
    };
    params.validate()?;
    let Some(layout) = Layout::new(q.view, q.v, &q.set)? else {
        let interior = q.view.interior(&q.set)?.len();
        return Ok(PhiResult::non_interior(q.conventions, interior));
    };
    let n = layout.interior.len();
    let conventions = q.conventions;
    let view = q.view;
    let width = layout.terms.len();
    let counts = engine.tally(params.replicas, width + 2, n, |scratch, r, acc| {
        let cfg = sample(view, &params, r);
        if conventions.requires_source_open && !cfg.is_open(layout.interior[0]) {
            return;
        }
        scratch.begin();
        scratch.visit(0);
        scratch.queue.push(0);
        let mut head = 0;
        while head < scratch.queue.len() {
            let i = scratch.queue[head] as usize;
            head += 1;
            for &j in &layout.interior_adj[i] {
                if !scratch.visited(j as usize) && cfg.is_open(layout.interior[j as usize]) {
                    scratch.visit(j as usize);
                    scratch.queue.push(j);
                }
            }
        }
        let mut hits = 0;
        for (t, slot) in acc[..width].iter_mut().enumerate() {
            let mut hit = layout.target[t].iter().any(|&j| scratch.visited(j as usize));
            if !hit && !conventions.endpoint_interior {
                hit = layout.target_outside[t].iter().any(|&k| {
                    cfg.is_open(layout.outside[k as usize])
                        && layout.outside_adj[k as usize].iter().any(|&j| scratch.visited(j as usize))
                });
            }
            *slot += u64::from(hit);
            hits += u64::from(hit);
        }
        acc[width] += hits;
        acc[width + 1] += hits * hits;
    });
    let (value, lo, hi) =
        mean_interval(counts[width], counts[width + 1], params.replicas, width as u64, engine.confidence());
    let terms: Vec<PhiTerm> = layout
        .terms
        .iter()
        .zip(&counts)
        .map(|(&y, &c)| {
            let e = Estimate::wilson(c, params.replicas, engine.confidence());
            PhiTerm { y, label: q.view.label(y), probability: e.point, exact: None, estimate: Some(e) }
        })
        .collect();
    Ok(PhiResult {
        value,
        exact: None,
        terms,
        method: PhiMethodTag::MonteCarlo,
        ci: Some((lo, hi)),
        interior_size: n,
        conventions,
    })
}

/// Dispatches on `q.method`.
pub fn phi(q: &PhiQuery<'_>, engine: &Engine) -> Result<PhiResult> {
    match q.method {
        PhiMethod::Exact => phi_exact(q),
        PhiMethod::MonteCarlo(_) => phi_mc(q, engine),
    }
}

#[cfg(test)]
mod tests;
