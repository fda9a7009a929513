//! Bernoulli site configurations, connectivity queries, and replica-parallel
//! Monte Carlo estimation.
//!
//! Replica `r` of a run with seed `s` opens vertex `v` iff
//! `uniform(s, r, v) < p`. Because the uniform does not depend on `p`, on the
//! view, or on the order in which replicas run, every estimate is
//! reproducible bit for bit on any number of workers, and configurations at
//! `p <= p'` are nested.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_open_unit, Error, Result};
use crate::graph::{GraphView, VertexId, VertexSet};
use crate::rng::ReplicaKey;
use crate::stats::{check_confidence, Estimate};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "PERCOBOUND_THREADS";

const BLOCK: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercolationParams {
    pub p: f64,
    pub seed: u64,
    pub replicas: u64,
}

impl PercolationParams {
    pub fn new(p: f64, seed: u64, replicas: u64) -> Result<Self> {
        let params = PercolationParams { p, seed, replicas };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_open_unit("p", self.p)?;
        if self.replicas == 0 {
            return Err(Error::Parameter("replicas must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_p(self, p: f64) -> Self {
        PercolationParams { p, ..self }
    }
}

/// One sampled configuration. Vertex states are computed on demand from the
/// counter-based generator; nothing is stored.
#[derive(Debug, Clone, Copy)]
pub struct Configuration<'a> {
    view: &'a GraphView,
    p: f64,
    seed: u64,
    replica_index: u64,
    key: ReplicaKey,
}

impl<'a> Configuration<'a> {
    #[inline]
    pub fn is_open(&self, v: VertexId) -> bool {
        self.view.is_live(v) && self.key.uniform(v.raw()) < self.p
    }

    pub fn open_set(&self) -> VertexSet {
        self.view.live_vertices().filter(|&v| self.is_open(v)).collect()
    }

    pub fn view(&self) -> &'a GraphView {
        self.view
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replica_index(&self) -> u64 {
        self.replica_index
    }
}

pub fn sample<'a>(view: &'a GraphView, params: &PercolationParams, replica_index: u64) -> Configuration<'a> {
    Configuration {
        view,
        p: params.p,
        seed: params.seed,
        replica_index,
        key: ReplicaKey::new(params.seed, replica_index),
    }
}

/// Open path from `v` (itself open) to some vertex of `targets`, every path
/// vertex inside `allowed` when given.
pub fn connects(cfg: &Configuration<'_>, v: VertexId, targets: &VertexSet, allowed: Option<&VertexSet>) -> bool {
    let event = EventSpec::connect(v, targets.clone(), allowed.cloned());
    let prepared = PreparedEvent::new(cfg.view, &event);
    let mut scratch = Scratch::new(cfg.view.id_bound());
    prepared.holds(cfg.view, |u| cfg.is_open(u), &mut scratch)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Connect { source: VertexId, targets: VertexSet, allowed: Option<VertexSet> },
    /// No vertex of `sources` is joined to `targets`.
    DisconnectAll { sources: VertexSet, targets: VertexSet },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSpec {
    pub kind: EventKind,
    /// When false the source vertices count as open regardless of their state.
    pub requires_source_open: bool,
}

impl EventSpec {
    pub fn connect(source: VertexId, targets: VertexSet, allowed: Option<VertexSet>) -> Self {
        EventSpec { kind: EventKind::Connect { source, targets, allowed }, requires_source_open: true }
    }

    pub fn disconnect_all(sources: VertexSet, targets: VertexSet) -> Self {
        EventSpec { kind: EventKind::DisconnectAll { sources, targets }, requires_source_open: true }
    }

    pub fn with_source_open(mut self, required: bool) -> Self {
        self.requires_source_open = required;
        self
    }

    pub fn validate(&self, view: &GraphView) -> Result<()> {
        let (sources, targets): (Vec<VertexId>, &VertexSet) = match &self.kind {
            EventKind::Connect { source, targets, .. } => (vec![*source], targets),
            EventKind::DisconnectAll { sources, targets } => (sources.iter().copied().collect(), targets),
        };
        if targets.is_empty() {
            return Err(Error::Parameter("event targets must be nonempty".into()));
        }
        for v in sources.into_iter().chain(targets.iter().copied()) {
            if v.raw() as usize >= view.id_bound() {
                return Err(Error::DeadVertex(v.raw()));
            }
        }
        Ok(())
    }
}

/// Per-worker breadth-first search buffers.
pub(crate) struct Scratch {
    stamp: Vec<u32>,
    epoch: u32,
    pub(crate) queue: Vec<u32>,
}

impl Scratch {
    pub(crate) fn new(len: usize) -> Self {
        Scratch { stamp: vec![0; len], epoch: 0, queue: Vec::new() }
    }

    #[inline]
    pub(crate) fn begin(&mut self) {
        self.queue.clear();
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
    }

    /// Marks `i`; returns false if it was already marked in this round.
    #[inline]
    pub(crate) fn visit(&mut self, i: usize) -> bool {
        if self.stamp[i] == self.epoch {
            false
        } else {
            self.stamp[i] = self.epoch;
            true
        }
    }

    #[inline]
    pub(crate) fn visited(&self, i: usize) -> bool {
        self.stamp[i] == self.epoch
    }
}

/// An event with its vertex sets expanded into membership masks.
pub(crate) struct PreparedEvent {
    sources: Vec<VertexId>,
    target: Vec<bool>,
    allowed: Option<Vec<bool>>,
    source_open: bool,
    negate: bool,
}

impl PreparedEvent {
    pub(crate) fn new(view: &GraphView, event: &EventSpec) -> Self {
        let n = view.id_bound();
        let mask = |set: &VertexSet| {
            let mut m = vec![false; n];
            for v in set {
                if let Some(slot) = m.get_mut(v.raw() as usize) {
                    *slot = true;
                }
            }
            m
        };
        match &event.kind {
            EventKind::Connect { source, targets, allowed } => PreparedEvent {
                sources: vec![*source],
                target: mask(targets),
                allowed: allowed.as_ref().map(mask),
                source_open: event.requires_source_open,
                negate: false,
            },
            EventKind::DisconnectAll { sources, targets } => PreparedEvent {
                sources: sources.iter().copied().collect(),
                target: mask(targets),
                allowed: None,
                source_open: event.requires_source_open,
                negate: true,
            },
        }
    }

    pub(crate) fn holds(&self, view: &GraphView, is_open: impl Fn(VertexId) -> bool, scratch: &mut Scratch) -> bool {
        let reached = self.reaches(view, &is_open, scratch);
        reached != self.negate
    }

    fn reaches(&self, view: &GraphView, is_open: &impl Fn(VertexId) -> bool, scratch: &mut Scratch) -> bool {
        let admissible = |u: VertexId| self.allowed.as_ref().is_none_or(|a| a[u.raw() as usize]);
        scratch.begin();
        for &s in &self.sources {
            if !view.is_live(s) || !admissible(s) || (self.source_open && !is_open(s)) {
                continue;
            }
            if self.target[s.raw() as usize] {
                return true;
            }
            if scratch.visit(s.raw() as usize) {
                scratch.queue.push(s.raw());
            }
        }
        let mut head = 0;
        while head < scratch.queue.len() {
            let u = VertexId::new(scratch.queue[head]);
            head += 1;
            for w in view.live_neighbors(u) {
                let i = w.raw() as usize;
                if scratch.visited(i) || !admissible(w) || !is_open(w) {
                    continue;
                }
                if self.target[i] {
                    return true;
                }
                scratch.visit(i);
                scratch.queue.push(w.raw());
            }
        }
        false
    }
}

/// Breadth-first levels of a ball, indexed locally, for radial queries.
pub(crate) struct LevelMap {
    pub(crate) vertices: Vec<VertexId>,
    pub(crate) level: Vec<u32>,
    /// Vertex has a live neighbor one level further out (or outside the ball).
    pub(crate) exit: Vec<bool>,
    local: Vec<u32>,
    pub(crate) outer: u32,
}

impl LevelMap {
    pub(crate) fn new(view: &GraphView, center: VertexId, outer: u32) -> Result<Self> {
        let ball = view.ball(center, outer)?;
        let mut local = vec![u32::MAX; view.id_bound()];
        let mut vertices = Vec::with_capacity(ball.len());
        let mut level = Vec::with_capacity(ball.len());
        for (i, &(u, d)) in ball.members().iter().enumerate() {
            local[u.raw() as usize] = i as u32;
            vertices.push(u);
            level.push(d);
        }
        let exit = vertices
            .iter()
            .zip(&level)
            .map(|(&u, &d)| {
                view.live_neighbors(u).any(|w| {
                    let j = local[w.raw() as usize];
                    j == u32::MAX || level[j as usize] == d + 1
                })
            })
            .collect();
        Ok(LevelMap { vertices, level, exit, local, outer })
    }

    #[inline]
    pub(crate) fn local(&self, v: VertexId) -> Option<usize> {
        match self.local[v.raw() as usize] {
            u32::MAX => None,
            j => Some(j as usize),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.vertices.len()
    }

    /// Largest level `l` such that the open cluster of `sources` inside the
    /// ball contains a vertex of the inner boundary of `B(center, l)`;
    /// `None` if it contains none. Stops as soon as `outer` is reached.
    pub(crate) fn max_exit_level(
        &self,
        view: &GraphView,
        sources: &[usize],
        source_open: bool,
        is_open: impl Fn(VertexId) -> bool,
        scratch: &mut Scratch,
    ) -> Option<u32> {
        scratch.begin();
        let mut best: Option<u32> = None;
        for &s in sources {
            if source_open && !is_open(self.vertices[s]) {
                continue;
            }
            if scratch.visit(s) {
                scratch.queue.push(s as u32);
            }
        }
        let mut head = 0;
        while head < scratch.queue.len() {
            let i = scratch.queue[head] as usize;
            head += 1;
            if self.exit[i] {
                let l = self.level[i];
                if best.is_none_or(|b| l > b) {
                    best = Some(l);
                    if l == self.outer {
                        return best;
                    }
                }
            }
            for w in view.live_neighbors(self.vertices[i]) {
                if let Some(j) = self.local(w) {
                    if !scratch.visited(j) && is_open(w) {
                        scratch.visit(j);
                        scratch.queue.push(j as u32);
                    }
                }
            }
        }
        best
    }
}

/// Counts of the maximal exit level over replicas: `counts[0]` for no exit,
/// `counts[l + 1]` for level `l`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExitHistogram {
    pub counts: Vec<u64>,
    pub replicas: u64,
}

impl ExitHistogram {
    /// Replicas in which the cluster misses the inner boundary at `radius`.
    pub fn disconnected_at(&self, radius: u32) -> u64 {
        self.counts.iter().take(radius as usize + 1).sum()
    }
}

#[derive(Clone)]
pub struct Engine {
    pool: Option<Arc<rayon::ThreadPool>>,
    confidence: f64,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("threads", &self.pool.as_ref().map(|p| p.current_num_threads()))
            .field("confidence", &self.confidence)
            .finish()
    }
}

impl Default for Engine {
    fn default() -> Self {
        Engine { pool: None, confidence: 0.95 }
    }
}

impl Engine {
    /// `None` runs on rayon's global pool.
    pub fn new(threads: Option<usize>) -> Result<Self> {
        let pool = match threads {
            None => None,
            Some(0) => return Err(Error::Parameter("worker count must be at least 1".into())),
            Some(n) => Some(Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Resource(format!("cannot start worker pool: {e}")))?,
            )),
        };
        Ok(Engine { pool, confidence: 0.95 })
    }

    /// Honors `PERCOBOUND_THREADS` when set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(THREADS_ENV) {
            Ok(v) => {
                let n: usize = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parameter(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
                Engine::new(Some(n))
            }
            Err(_) => Engine::new(None),
        }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Result<Self> {
        check_confidence(confidence)?;
        self.confidence = confidence;
        Ok(self)
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn threads(&self) -> usize {
        self.pool.as_ref().map_or_else(rayon::current_num_threads, |p| p.current_num_threads())
    }

    pub(crate) fn estimate(&self, successes: u64, replicas: u64) -> Estimate {
        Estimate::wilson(successes, replicas, self.confidence)
    }

    /// Runs `body(scratch, replica, counters)` for every replica and sums the
    /// integer counters. Summation of integers makes the result independent
    /// of scheduling.
    pub(crate) fn tally<F>(&self, replicas: u64, width: usize, scratch_len: usize, body: F) -> Vec<u64>
    where
        F: Fn(&mut Scratch, u64, &mut [u64]) + Sync,
    {
        let blocks = replicas.div_ceil(BLOCK);
        let run = || {
            (0..blocks)
                .into_par_iter()
                .fold(
                    || (Scratch::new(scratch_len), vec![0u64; width]),
                    |(mut scratch, mut acc), b| {
                        for r in b * BLOCK..((b + 1) * BLOCK).min(replicas) {
                            body(&mut scratch, r, &mut acc);
                        }
                        (scratch, acc)
                    },
                )
                .map(|(_, acc)| acc)
                .reduce(
                    || vec![0u64; width],
                    |mut a, b| {
                        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                        a
                    },
                )
        };
        match &self.pool {
            Some(pool) => pool.install(run),
            None => run(),
        }
    }

    pub fn mc_estimate(&self, view: &GraphView, event: &EventSpec, params: &PercolationParams) -> Result<Estimate> {
        params.validate()?;
        event.validate(view)?;
        let prepared = PreparedEvent::new(view, event);
        let counts = self.tally(params.replicas, 1, view.id_bound(), |scratch, r, acc| {
            let cfg = sample(view, params, r);
            if prepared.holds(view, |u| cfg.is_open(u), scratch) {
                acc[0] += 1;
            }
        });
        Ok(self.estimate(counts[0], params.replicas))
    }

    /// Histogram of the maximal exit level reached from `sources` inside
    /// `B(center, outer)`.
    pub(crate) fn exit_histogram(
        &self,
        view: &GraphView,
        levels: &LevelMap,
        sources: &[usize],
        source_open: bool,
        params: &PercolationParams,
    ) -> ExitHistogram {
        let width = levels.outer as usize + 2;
        let counts = self.tally(params.replicas, width, levels.len(), |scratch, r, acc| {
            let cfg = sample(view, params, r);
            let slot = match levels.max_exit_level(view, sources, source_open, |u| cfg.is_open(u), scratch) {
                None => 0,
                Some(l) => l as usize + 1,
            };
            acc[slot] += 1;
        });
        ExitHistogram { counts, replicas: params.replicas }
    }

    /// Probability that no vertex of `set` is joined to the inner boundary of
    /// `B(origin, radius)`: a lower bound on disconnection from infinity.
    pub fn truncated_disconnection(
        &self,
        view: &GraphView,
        set: &VertexSet,
        radius: u32,
        params: &PercolationParams,
    ) -> Result<Estimate> {
        Ok(self.disconnection_profile(view, set, &[radius], params)?.remove(0))
    }

    /// [`truncated_disconnection`](Self::truncated_disconnection) at several
    /// radii from one coupled set of replicas; the results are pathwise
    /// nondecreasing in the radius.
    pub fn disconnection_profile(
        &self,
        view: &GraphView,
        set: &VertexSet,
        radii: &[u32],
        params: &PercolationParams,
    ) -> Result<Vec<Estimate>> {
        params.validate()?;
        let outer = *radii.iter().max().ok_or_else(|| Error::Parameter("no radii given".into()))?;
        let levels = LevelMap::new(view, view.origin(), outer)?;
        let inner = *radii.iter().min().unwrap();
        let mut sources = Vec::with_capacity(set.len());
        for &v in set {
            view.check_live(v)?;
            match levels.local(v) {
                Some(i) if levels.level[i] < inner => sources.push(i),
                _ => {
                    return Err(Error::Parameter(format!(
                        "vertex {} must lie within B(origin, {})",
                        view.label(v),
                        inner.saturating_sub(1)
                    )))
                }
            }
        }
        let hist = self.exit_histogram(view, &levels, &sources, true, params);
        Ok(radii.iter().map(|&r| self.estimate(hist.disconnected_at(r), params.replicas)).collect())
    }
}
