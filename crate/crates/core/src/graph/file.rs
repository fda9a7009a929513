use std::collections::{HashSet, VecDeque};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// A finite simple graph read from the plain-text adjacency format:
///
/// ```text
/// vertices N origin ID
/// u v
/// ...
/// ```
///
/// Only the connected component of the origin is kept. Vertices are
/// renumbered breadth-first from the origin; `labels` maps back to file ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedGraph {
    pub path: Option<PathBuf>,
    pub declared_vertices: usize,
    pub origin_label: u64,
    pub(crate) labels: Vec<u64>,
    pub(crate) adjacency: Vec<Vec<u32>>,
    pub edge_count: usize,
    pub max_degree: usize,
}

impl LoadedGraph {
    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub(crate) fn from_edges(n: usize, edges: &[(u32, u32)], origin: u32, path: Option<PathBuf>) -> Result<Self> {
        // Line numbers as if the edges were written to a file after the header.
        let numbered: Vec<(usize, u64, u64)> =
            edges.iter().enumerate().map(|(i, &(u, v))| (i + 2, u64::from(u), u64::from(v))).collect();
        assemble(n as u64, u64::from(origin), &numbered, path)
    }
}

/// Reads a graph file; see [`LoadedGraph`] for the format.
pub fn load_graph(path: impl AsRef<Path>) -> Result<LoadedGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_graph(&text, Some(path.to_path_buf()))
}

pub fn parse_graph(text: &str, path: Option<PathBuf>) -> Result<LoadedGraph> {
    let err = |line: usize, message: String| Error::Parse { path: path.clone(), line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| err(1, "no vertices".into()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let (n, origin) = match tokens.as_slice() {
        ["vertices", n, "origin", o] => {
            let n: u64 = n.parse().map_err(|_| err(hline, format!("bad vertex count '{n}'")))?;
            let o: u64 = o.parse().map_err(|_| err(hline, format!("bad origin id '{o}'")))?;
            (n, o)
        }
        _ => return Err(err(hline, "expected header 'vertices N origin ID'".into())),
    };
    let mut edges = Vec::new();
    for (no, line) in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [u, v] = parts.as_slice() else {
            return Err(err(no, format!("expected 'u v', got '{line}'")));
        };
        let u: u64 = u.parse().map_err(|_| err(no, format!("bad vertex id '{u}'")))?;
        let v: u64 = v.parse().map_err(|_| err(no, format!("bad vertex id '{v}'")))?;
        edges.push((no, u, v));
    }
    assemble(n, origin, &edges, path.clone()).map_err(|e| match e {
        Error::Parse { line, message, .. } => err(line, message),
        other => other,
    })
}

fn assemble(n: u64, origin: u64, edges: &[(usize, u64, u64)], path: Option<PathBuf>) -> Result<LoadedGraph> {
    let err = |line: usize, message: String| Error::Parse { path: None, line, message };
    if n == 0 {
        return Err(err(1, "no vertices".into()));
    }
    if n > super::MAX_VERTICES as u64 {
        return Err(Error::Resource(format!("{n} vertices exceeds the limit of {}", super::MAX_VERTICES)));
    }
    if origin >= n {
        return Err(err(1, format!("origin {origin} is not among the {n} vertices")));
    }
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n as usize];
    let mut seen = HashSet::new();
    for &(line, u, v) in edges {
        if u >= n || v >= n {
            return Err(err(line, format!("edge {u} {v} names a vertex outside 0..{n}")));
        }
        if u == v {
            return Err(err(line, format!("self-loop at {u}; graphs must be simple")));
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return Err(err(line, format!("duplicate edge {u} {v}")));
        }
        adjacency[u as usize].push(v as u32);
        adjacency[v as usize].push(u as u32);
    }
    // Breadth-first renumbering of the origin's component.
    let mut new_id = vec![u32::MAX; n as usize];
    let mut labels = vec![origin];
    new_id[origin as usize] = 0;
    let mut queue = VecDeque::from([origin as usize]);
    while let Some(u) = queue.pop_front() {
        for &w in &adjacency[u] {
            if new_id[w as usize] == u32::MAX {
                new_id[w as usize] = labels.len() as u32;
                labels.push(u64::from(w));
                queue.push_back(w as usize);
            }
        }
    }
    if labels.len() == 1 && n > 1 {
        return Err(err(1, format!("origin {origin} is disconnected from the other {} vertices", n - 1)));
    }
    let renumbered: Vec<Vec<u32>> = labels
        .iter()
        .map(|&old| adjacency[old as usize].iter().map(|&w| new_id[w as usize]).collect())
        .collect();
    let edge_count = renumbered.iter().map(Vec::len).sum::<usize>() / 2;
    let max_degree = renumbered.iter().map(Vec::len).max().unwrap_or(0);
    Ok(LoadedGraph {
        path,
        declared_vertices: n as usize,
        origin_label: origin,
        labels,
        adjacency: renumbered,
        edge_count,
        max_degree,
    })
}
