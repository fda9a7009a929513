//! Finite, explorable truncations of infinite locally finite graphs.
//!
//! A [`GraphView`] is materialized from a [`GraphSpec`] up to one layer past
//! the truncation radius. Vertices within the radius have their full
//! neighborhood known ("complete"); the outer halo layer only exists so that
//! complete vertices keep their true degree. Any query whose answer depends
//! on a neighborhood that is not known fails with
//! [`Error::TruncationTooSmall`] instead of silently truncating.
//!
//! Puncturing removes vertex sets and returns a new view sharing the same
//! base graph. Ids are never reused, and distances in a punctured view are
//! measured inside the punctured graph.

mod build;
mod file;

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use file::{load_graph, parse_graph, LoadedGraph};

/// Upper limit on materialized vertices for a single truncation.
pub const MAX_VERTICES: usize = 1 << 24;

/// Identifier of a vertex, stable across every view derived from one base graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(u32);

impl VertexId {
    pub const fn new(raw: u32) -> Self {
        VertexId(raw)
    }

    pub const fn raw(self) -> u32 {
        self.0
    }

    #[inline]
    pub(crate) const fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Which infinite (or file-given finite) graph a truncation is cut from.
#[derive(Debug, Clone)]
pub enum Family {
    /// The hypercubic lattice Z^d.
    Lattice { dim: usize },
    /// Rooted tree: the root has `offspring` children, every other vertex has
    /// one parent and `offspring` children.
    RegularTree { offspring: usize },
    /// Graph loaded from the plain-text adjacency format.
    File(Arc<LoadedGraph>),
}

#[derive(Debug, Clone)]
pub struct GraphSpec {
    pub family: Family,
    /// Graph distance from the origin up to which neighborhoods are complete.
    pub truncation_radius: u32,
}

impl GraphSpec {
    pub fn lattice(dim: usize, truncation_radius: u32) -> Self {
        GraphSpec { family: Family::Lattice { dim }, truncation_radius }
    }

    pub fn regular_tree(offspring: usize, truncation_radius: u32) -> Self {
        GraphSpec { family: Family::RegularTree { offspring }, truncation_radius }
    }

    /// Whole loaded graph, no truncation beyond the file itself.
    pub fn file(graph: LoadedGraph) -> Self {
        GraphSpec { family: Family::File(Arc::new(graph)), truncation_radius: u32::MAX }
    }

    /// Compact textual form, e.g. `lattice:2`, `tree:2`, `file:path`.
    pub fn describe(&self) -> String {
        match &self.family {
            Family::Lattice { dim } => format!("lattice:{dim}"),
            Family::RegularTree { offspring } => format!("tree:{offspring}"),
            Family::File(g) => match &g.path {
                Some(p) => format!("file:{}", p.display()),
                None => "file:<memory>".to_string(),
            },
        }
    }

    pub fn build(&self) -> Result<GraphView> {
        let base = match &self.family {
            Family::Lattice { dim } => build::lattice(*dim, self.truncation_radius, self.clone())?,
            Family::RegularTree { offspring } => {
                build::regular_tree(*offspring, self.truncation_radius, self.clone())?
            }
            Family::File(g) => build::from_loaded(g, self.truncation_radius, self.clone())?,
        };
        Ok(GraphView::from_base(base))
    }
}

pub(crate) enum Labels {
    Lattice { dim: usize, coords: Vec<i32>, index: HashMap<Vec<i32>, u32> },
    Plain,
    Original(Vec<u64>),
}

pub(crate) struct BaseGraph {
    spec: GraphSpec,
    offsets: Vec<u32>,
    adjacency: Vec<VertexId>,
    /// Distance from the origin in the unpunctured graph.
    depth: Vec<u32>,
    complete_radius: u32,
    max_degree: usize,
    labels: Labels,
}

impl BaseGraph {
    fn len(&self) -> usize {
        self.depth.len()
    }

    #[inline]
    fn adjacent(&self, v: VertexId) -> &[VertexId] {
        let i = v.index();
        &self.adjacency[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }
}

/// Immutable view of a truncated graph with an optional set of removed
/// vertices. Cloning is cheap; puncturing returns a new view.
#[derive(Clone)]
pub struct GraphView {
    base: Arc<BaseGraph>,
    removed: Arc<Vec<bool>>,
    removed_count: usize,
}

impl fmt::Debug for GraphView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GraphView")
            .field("graph", &self.base.spec.describe())
            .field("truncation_radius", &self.base.complete_radius)
            .field("vertices", &self.base.len())
            .field("removed", &self.removed_count)
            .finish()
    }
}

impl PartialEq for GraphView {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.base, &other.base) && self.removed == other.removed
    }
}

impl Eq for GraphView {}

impl GraphView {
    fn from_base(base: BaseGraph) -> Self {
        let n = base.len();
        GraphView { base: Arc::new(base), removed: Arc::new(vec![false; n]), removed_count: 0 }
    }

    /// Finite graph from an explicit edge list over `0..n`; only the
    /// component of `origin` is kept, renumbered breadth-first from it.
    pub fn from_edges(n: usize, edges: &[(u32, u32)], origin: u32) -> Result<Self> {
        let loaded = LoadedGraph::from_edges(n, edges, origin, None)?;
        GraphSpec::file(loaded).build()
    }

    pub fn spec(&self) -> &GraphSpec {
        &self.base.spec
    }

    /// The origin is always id 0: base graphs are numbered breadth-first from it.
    pub fn origin(&self) -> VertexId {
        VertexId(0)
    }

    /// Number of ids ever allocated in this lineage (live or removed).
    pub fn id_bound(&self) -> usize {
        self.base.len()
    }

    pub fn live_count(&self) -> usize {
        self.base.len() - self.removed_count
    }

    pub fn removed_count(&self) -> usize {
        self.removed_count
    }

    pub fn truncation_radius(&self) -> u32 {
        self.base.complete_radius
    }

    pub fn max_degree(&self) -> usize {
        self.base.max_degree
    }

    #[inline]
    pub fn is_live(&self, v: VertexId) -> bool {
        v.index() < self.base.len() && !self.removed[v.index()]
    }

    /// Whether the full neighborhood of `v` is known in this truncation.
    #[inline]
    pub fn is_complete(&self, v: VertexId) -> bool {
        self.base.depth[v.index()] <= self.base.complete_radius
    }

    /// Distance from the origin in the unpunctured base graph.
    pub fn base_depth(&self, v: VertexId) -> u32 {
        self.base.depth[v.index()]
    }

    pub fn live_vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.base.len() as u32).map(VertexId).filter(|&v| self.is_live(v))
    }

    pub(crate) fn check_live(&self, v: VertexId) -> Result<()> {
        if self.is_live(v) {
            Ok(())
        } else {
            Err(Error::DeadVertex(v.0))
        }
    }

    fn check_complete(&self, v: VertexId) -> Result<()> {
        if self.is_complete(v) {
            Ok(())
        } else {
            Err(Error::TruncationTooSmall(format!(
                "vertex {} lies at depth {} beyond the truncation radius {}",
                self.label(v),
                self.base.depth[v.index()],
                self.base.complete_radius
            )))
        }
    }

    /// Live neighbors without liveness or completeness checks.
    #[inline]
    pub(crate) fn live_neighbors(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.base.adjacent(v).iter().copied().filter(move |u| !self.removed[u.index()])
    }

    /// All live vertices adjacent to `v`, in base adjacency order.
    pub fn neighbors(&self, v: VertexId) -> Result<Vec<VertexId>> {
        self.check_live(v)?;
        self.check_complete(v)?;
        Ok(self.live_neighbors(v).collect())
    }

    /// Breadth-first ball of radius `radius` around `center`, measured in the
    /// punctured graph. Every member must be complete so that its inner
    /// boundary status is known.
    pub fn ball(&self, center: VertexId, radius: u32) -> Result<Ball> {
        self.check_live(center)?;
        let mut dist: HashMap<VertexId, u32> = HashMap::new();
        let mut order = Vec::new();
        let mut queue = VecDeque::new();
        dist.insert(center, 0);
        queue.push_back(center);
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            self.check_complete(u).map_err(|e| match e {
                Error::TruncationTooSmall(msg) => Error::TruncationTooSmall(format!(
                    "ball of radius {radius} around {} leaves the truncation ({msg})",
                    self.label(center)
                )),
                other => other,
            })?;
            order.push((u, du));
            if du == radius {
                continue;
            }
            for w in self.live_neighbors(u) {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(w) {
                    e.insert(du + 1);
                    queue.push_back(w);
                }
            }
        }
        let exits = order
            .iter()
            .map(|&(u, du)| du == radius && self.live_neighbors(u).any(|w| !dist.contains_key(&w)))
            .collect();
        Ok(Ball { center, radius, members: order, exits })
    }

    /// Vertices of `set` all of whose live neighbors also lie in `set`.
    pub fn interior(&self, set: &VertexSet) -> Result<VertexSet> {
        let mut out = Vec::new();
        for &u in set.iter() {
            self.check_live(u)?;
            self.check_complete(u)?;
            if self.live_neighbors(u).all(|w| set.contains(w)) {
                out.push(u);
            }
        }
        Ok(VertexSet::from_sorted(out))
    }

    /// Removes every listed ball (each computed in `self`) and returns the
    /// new view. A center that is already removed contributes nothing.
    pub fn puncture(&self, balls: &[(VertexId, u32)]) -> Result<GraphView> {
        let mut removed: Vec<bool> = (*self.removed).clone();
        let mut count = self.removed_count;
        for &(center, radius) in balls {
            if center.index() >= self.base.len() {
                return Err(Error::DeadVertex(center.0));
            }
            if !self.is_live(center) {
                continue;
            }
            for &(u, _) in &self.ball(center, radius)?.members {
                if !removed[u.index()] {
                    removed[u.index()] = true;
                    count += 1;
                }
            }
        }
        Ok(GraphView { base: Arc::clone(&self.base), removed: Arc::new(removed), removed_count: count })
    }

    /// Human-readable label: lattice coordinates, original file id, or raw id.
    pub fn label(&self, v: VertexId) -> String {
        match &self.base.labels {
            Labels::Lattice { dim, coords, .. } => {
                let c = &coords[v.index() * dim..(v.index() + 1) * dim];
                let parts: Vec<String> = c.iter().map(|x| x.to_string()).collect();
                format!("({})", parts.join(","))
            }
            Labels::Plain => v.0.to_string(),
            Labels::Original(ids) => ids[v.index()].to_string(),
        }
    }

    /// Inverse of [`label`](Self::label). Lattice points also accept `x:y:..`.
    pub fn parse_vertex(&self, text: &str) -> Result<VertexId> {
        let text = text.trim();
        let bad = || Error::Parameter(format!("cannot parse vertex '{text}'"));
        match &self.base.labels {
            Labels::Lattice { dim, .. } => {
                let inner = text.trim_start_matches('(').trim_end_matches(')');
                let coords: Vec<i32> = inner
                    .split([',', ':'])
                    .map(|s| s.trim().parse::<i32>().map_err(|_| bad()))
                    .collect::<Result<_>>()?;
                if coords.len() != *dim {
                    return Err(bad());
                }
                self.lattice_point(&coords).ok_or_else(|| {
                    Error::TruncationTooSmall(format!("lattice point {text} is outside the truncation"))
                })
            }
            Labels::Plain => {
                let raw: u32 = text.parse().map_err(|_| bad())?;
                if (raw as usize) < self.base.len() {
                    Ok(VertexId(raw))
                } else {
                    Err(Error::DeadVertex(raw))
                }
            }
            Labels::Original(ids) => {
                let raw: u64 = text.parse().map_err(|_| bad())?;
                ids.iter()
                    .position(|&x| x == raw)
                    .map(|i| VertexId(i as u32))
                    .ok_or_else(|| {
                        Error::Parameter(format!("vertex {raw} is not in the origin's component"))
                    })
            }
        }
    }

    /// Id of a lattice point, if the view is a lattice and the point is materialized.
    pub fn lattice_point(&self, coords: &[i32]) -> Option<VertexId> {
        match &self.base.labels {
            Labels::Lattice { index, .. } => index.get(coords).map(|&i| VertexId(i)),
            _ => None,
        }
    }

    pub fn lattice_coords(&self, v: VertexId) -> Option<&[i32]> {
        match &self.base.labels {
            Labels::Lattice { dim, coords, .. } => Some(&coords[v.index() * dim..(v.index() + 1) * dim]),
            _ => None,
        }
    }
}

/// A ball `B(center, radius)` together with per-member distances.
#[derive(Debug, Clone)]
pub struct Ball {
    pub center: VertexId,
    pub radius: u32,
    /// Members in breadth-first order with their distance to the center.
    members: Vec<(VertexId, u32)>,
    /// `exits[i]`: member `i` has a live neighbor outside the ball.
    exits: Vec<bool>,
}

impl Ball {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[(VertexId, u32)] {
        &self.members
    }

    pub fn vertices(&self) -> VertexSet {
        VertexSet::new(self.members.iter().map(|&(u, _)| u))
    }

    /// Members with at least one live neighbor outside the ball.
    pub fn inner_boundary(&self) -> VertexSet {
        VertexSet::new(
            self.members.iter().zip(&self.exits).filter(|(_, &e)| e).map(|(&(u, _), _)| u),
        )
    }
}

/// Finite set of vertices, kept sorted by id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexSet(Vec<VertexId>);

impl VertexSet {
    pub fn new(items: impl IntoIterator<Item = VertexId>) -> Self {
        let mut v: Vec<VertexId> = items.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        VertexSet(v)
    }

    fn from_sorted(v: Vec<VertexId>) -> Self {
        debug_assert!(v.windows(2).all(|w| w[0] < w[1]));
        VertexSet(v)
    }

    pub fn empty() -> Self {
        VertexSet(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, VertexId> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[VertexId] {
        &self.0
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.0.iter().all(|&v| other.contains(v))
    }

    pub fn is_disjoint(&self, other: &VertexSet) -> bool {
        self.0.iter().all(|&v| !other.contains(v))
    }

    pub fn difference(&self, other: &VertexSet) -> VertexSet {
        VertexSet(self.0.iter().copied().filter(|&v| !other.contains(v)).collect())
    }
}

impl FromIterator<VertexId> for VertexSet {
    fn from_iter<I: IntoIterator<Item = VertexId>>(iter: I) -> Self {
        VertexSet::new(iter)
    }
}

impl<'a> IntoIterator for &'a VertexSet {
    type Item = &'a VertexId;
    type IntoIter = std::slice::Iter<'a, VertexId>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Finite generators for (possibly infinite) vertex sets, resolved against a
/// view. The resolved order is the generator order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetGenerator {
    Explicit(Vec<VertexId>),
    /// Lattice points `(x, 0, .., 0)` for `x` in `-length/2 .. length - length/2`.
    Segment { length: u32 },
    /// Every materialized live lattice point on the first axis within `radius`
    /// of the origin: a window onto an infinite line.
    AxisLine { radius: u32 },
}

impl SetGenerator {
    pub fn resolve(&self, view: &GraphView) -> Result<Vec<VertexId>> {
        let axis_points = |lo: i64, hi: i64| -> Result<Vec<VertexId>> {
            let dim = match &view.base.labels {
                Labels::Lattice { dim, .. } => *dim,
                _ => return Err(Error::Parameter("segments and lines need a lattice graph".into())),
            };
            let mut out = Vec::new();
            for x in lo..hi {
                let mut c = vec![0i32; dim];
                c[0] = x as i32;
                let v = view.lattice_point(&c).ok_or_else(|| {
                    Error::TruncationTooSmall(format!("segment point x={x} lies outside the truncation"))
                })?;
                if view.is_live(v) {
                    out.push(v);
                }
            }
            Ok(out)
        };
        match self {
            SetGenerator::Explicit(ids) => {
                let mut seen = std::collections::HashSet::new();
                let mut out = Vec::new();
                for &v in ids {
                    view.check_live(v)?;
                    if seen.insert(v) {
                        out.push(v);
                    }
                }
                Ok(out)
            }
            SetGenerator::Segment { length } => {
                let half = i64::from(*length / 2);
                axis_points(-half, i64::from(*length) - half)
            }
            SetGenerator::AxisLine { radius } => {
                let r = i64::from((*radius).min(view.truncation_radius()));
                axis_points(-r, r + 1)
            }
        }
    }
}

#[cfg(test)]
mod tests;
