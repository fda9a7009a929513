use std::collections::{HashMap, VecDeque};

use super::{BaseGraph, GraphSpec, Labels, LoadedGraph, VertexId, MAX_VERTICES};
use crate::error::{Error, Result};

/// Keys, depths and adjacency lists of the materialized vertices.
type Materialized<K> = (Vec<K>, Vec<u32>, Vec<Vec<u32>>);

/// Breadth-first materialization from the origin. `expand(i)` lists the
/// neighbor keys of key `i`; vertices are created up to depth `radius + 1`.
fn materialize<K, F>(origin: K, radius: u32, mut expand: F) -> Result<Materialized<K>>
where
    K: Clone + Eq + std::hash::Hash,
    F: FnMut(&K) -> Vec<K>,
{
    let halo = radius.saturating_add(1);
    let mut keys = vec![origin.clone()];
    let mut depth = vec![0u32];
    let mut index: HashMap<K, u32> = HashMap::from([(origin, 0)]);
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new()];
    let mut queue = VecDeque::from([0u32]);
    while let Some(i) = queue.pop_front() {
        let d = depth[i as usize];
        let neighbors = expand(&keys[i as usize]);
        for key in neighbors {
            let j = match index.get(&key) {
                Some(&j) => j,
                None => {
                    if d + 1 > halo {
                        continue;
                    }
                    if keys.len() >= MAX_VERTICES {
                        return Err(Error::Resource(format!(
                            "truncation of radius {radius} exceeds {MAX_VERTICES} vertices"
                        )));
                    }
                    let j = keys.len() as u32;
                    keys.push(key.clone());
                    depth.push(d + 1);
                    adjacency.push(Vec::new());
                    index.insert(key, j);
                    queue.push_back(j);
                    j
                }
            };
            if !adjacency[i as usize].contains(&j) {
                adjacency[i as usize].push(j);
            }
        }
    }
    // Halo vertices never expanded: give them their edges back to known vertices.
    for i in 0..keys.len() {
        for k in 0..adjacency[i].len() {
            let j = adjacency[i][k] as usize;
            if !adjacency[j].contains(&(i as u32)) {
                adjacency[j].push(i as u32);
            }
        }
    }
    Ok((keys, depth, adjacency))
}

fn assemble(depth: Vec<u32>, adjacency: Vec<Vec<u32>>, complete_radius: u32, labels: Labels, spec: GraphSpec) -> BaseGraph {
    let mut offsets = Vec::with_capacity(adjacency.len() + 1);
    let mut flat = Vec::new();
    offsets.push(0u32);
    let mut max_degree = 0;
    for (i, list) in adjacency.iter().enumerate() {
        if depth[i] <= complete_radius {
            max_degree = max_degree.max(list.len());
        }
        flat.extend(list.iter().map(|&j| VertexId(j)));
        offsets.push(flat.len() as u32);
    }
    BaseGraph { spec, offsets, adjacency: flat, depth, complete_radius, max_degree, labels }
}

pub(super) fn lattice(dim: usize, radius: u32, spec: GraphSpec) -> Result<BaseGraph> {
    if dim == 0 {
        return Err(Error::Parameter("lattice dimension must be at least 1".into()));
    }
    if radius == u32::MAX {
        return Err(Error::Parameter("a lattice needs a finite truncation radius".into()));
    }
    let (keys, depth, adjacency) = materialize(vec![0i32; dim], radius, |p| {
        let mut out = Vec::with_capacity(2 * dim);
        for axis in 0..dim {
            for step in [1, -1] {
                let mut q = p.clone();
                q[axis] += step;
                out.push(q);
            }
        }
        out
    })?;
    let coords: Vec<i32> = keys.iter().flatten().copied().collect();
    let index = keys.into_iter().enumerate().map(|(i, k)| (k, i as u32)).collect();
    Ok(assemble(depth, adjacency, radius, Labels::Lattice { dim, coords, index }, spec))
}

pub(super) fn regular_tree(offspring: usize, radius: u32, spec: GraphSpec) -> Result<BaseGraph> {
    if offspring == 0 {
        return Err(Error::Parameter("tree offspring count must be at least 1".into()));
    }
    if radius == u32::MAX {
        return Err(Error::Parameter("a tree needs a finite truncation radius".into()));
    }
    let halo = radius + 1;
    let mut depth = vec![0u32];
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new()];
    let mut i = 0usize;
    while i < depth.len() {
        if depth[i] < halo {
            for _ in 0..offspring {
                if depth.len() >= MAX_VERTICES {
                    return Err(Error::Resource(format!(
                        "tree truncation of radius {radius} exceeds {MAX_VERTICES} vertices"
                    )));
                }
                let child = depth.len() as u32;
                depth.push(depth[i] + 1);
                adjacency.push(vec![i as u32]);
                adjacency[i].push(child);
            }
        }
        i += 1;
    }
    Ok(assemble(depth, adjacency, radius, Labels::Plain, spec))
}

pub(super) fn from_loaded(graph: &LoadedGraph, radius: u32, spec: GraphSpec) -> Result<BaseGraph> {
    let halo = radius.saturating_add(1);
    let n = graph.adjacency.len();
    let mut depth = vec![u32::MAX; n];
    depth[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for &w in &graph.adjacency[u] {
            if depth[w as usize] == u32::MAX {
                depth[w as usize] = depth[u] + 1;
                queue.push_back(w as usize);
            }
        }
    }
    // Loaded graphs are numbered breadth-first, so kept vertices form a prefix.
    let kept = depth.iter().take_while(|&&d| d <= halo).count();
    debug_assert!(depth[kept..].iter().all(|&d| d > halo));
    let adjacency = graph.adjacency[..kept]
        .iter()
        .map(|list| list.iter().copied().filter(|&w| (w as usize) < kept).collect())
        .collect();
    depth.truncate(kept);
    let labels = Labels::Original(graph.labels[..kept].to_vec());
    Ok(assemble(depth, adjacency, radius, labels, spec))
}
