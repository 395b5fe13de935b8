//! Directed Bubble Hierarchical Tree clustering over a triangulated maximally
//! filtered graph.
//!
//! The graph is grown greedily: a seed 4-clique, then one vertex at a time
//! inserted into the triangular face that gains the most similarity. Every
//! insertion creates a new 4-clique ("bubble") hanging off the bubble that
//! owned the face, so the bubbles form a tree whose edges are separating
//! triangles. Each tree edge is directed toward the side the separator is
//! more strongly tied to, counting similarity above the average pair; bubbles
//! with no outgoing edge are the converging bubbles, one per cluster.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::CorrelationMatrix;

/// Seed search is exhaustive over this many highest-strength vertices.
pub const SEED_POOL: usize = 150;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bubble {
    /// Sorted vertex ids of the 4-clique.
    pub vertices: [usize; 4],
    pub parent: Option<usize>,
    /// Triangle shared with the parent.
    pub separator: Option<[usize; 3]>,
    /// Vertex whose insertion created the bubble (`None` for the seed).
    pub inserted: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredGraph {
    pub n: usize,
    /// `(i, j, similarity)` with `i < j`, in insertion order.
    pub edges: Vec<(usize, usize, f64)>,
    /// Triangular faces of the final embedding.
    pub triangulation: Vec<[usize; 3]>,
    pub bubbles: Vec<Bubble>,
    /// Full input similarity, used to orient the bubble tree.
    #[serde(skip)]
    pub similarity: DMatrix<f64>,
}

impl FilteredGraph {
    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|(a, b, _)| *a == v || *b == v).count()
    }

    fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b, w) in &self.edges {
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        adj
    }
}

/// Cluster id per stock, ids `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl Clustering {
    /// Build from arbitrary labels, renumbering clusters `1..=k` in order of
    /// their smallest member.
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut map: Vec<(usize, usize)> = Vec::new(); // (raw label, new id)
        let labels = raw
            .iter()
            .map(|&l| match map.iter().find(|(r, _)| *r == l) {
                Some(&(_, id)) => id,
                None => {
                    map.push((l, map.len() + 1));
                    map.len()
                }
            })
            .collect();
        Clustering { labels, k: map.len() }
    }

    /// Member indices of cluster `id` (1-based), ascending.
    pub fn members(&self, id: usize) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, &l)| l == id).map(|(i, _)| i).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l - 1] += 1;
        }
        sizes
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.labels.iter().any(|&l| l == 0 || l > self.k) {
            return Err(Error::validation("cluster ids must lie in 1..=k"));
        }
        if self.sizes().contains(&0) {
            return Err(Error::validation("every cluster id must be used"));
        }
        Ok(())
    }
}

/// Similarity is the correlation itself; distance is `sqrt(2 (1 - rho))`.
pub fn similarity_from_residual(g: &CorrelationMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    let sim = g.values.clone();
    let dist = sim.map(|r| (2.0 * (1.0 - r)).max(0.0).sqrt());
    (sim, dist)
}

fn check_square(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::validation(format!("{what} matrix must be square")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation(format!("{what} matrix has non-finite entries")));
    }
    for i in 0..m.nrows() {
        for j in 0..i {
            if m[(i, j)] != m[(j, i)] {
                return Err(Error::validation(format!("{what} matrix is not symmetric")));
            }
        }
    }
    Ok(())
}

fn seed_clique(sim: &DMatrix<f64>) -> [usize; 4] {
    let n = sim.nrows();
    let strength: Vec<f64> = (0..n).map(|i| (0..n).filter(|&j| j != i).map(|j| sim[(i, j)]).sum()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| strength[b].total_cmp(&strength[a]).then(a.cmp(&b)));
    let mut pool: Vec<usize> = order.into_iter().take(SEED_POOL.min(n)).collect();
    pool.sort_unstable();
    let mut best = (f64::NEG_INFINITY, [0usize; 4]);
    let m = pool.len();
    for a in 0..m {
        for b in a + 1..m {
            let (i, j) = (pool[a], pool[b]);
            let s_ij = sim[(i, j)];
            for c in b + 1..m {
                let k = pool[c];
                let s_ijk = s_ij + sim[(i, k)] + sim[(j, k)];
                for &l in &pool[c + 1..] {
                    let total = s_ijk + sim[(i, l)] + sim[(j, l)] + sim[(k, l)];
                    // Strict improvement keeps the lexicographically first clique on ties.
                    if total > best.0 {
                        best = (total, [i, j, k, l]);
                    }
                }
            }
        }
    }
    best.1
}

/// Best remaining vertex for a face: `(gain, vertex)`, ties to the lowest vertex.
fn best_vertex(sim: &DMatrix<f64>, face: &[usize; 3], placed: &[bool]) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for v in 0..placed.len() {
        if placed[v] {
            continue;
        }
        let gain = sim[(v, face[0])] + sim[(v, face[1])] + sim[(v, face[2])];
        if best.is_none_or(|(g, _)| gain > g) {
            best = Some((gain, v));
        }
    }
    best
}

fn sorted3(mut t: [usize; 3]) -> [usize; 3] {
    t.sort_unstable();
    t
}

fn sorted4(mut t: [usize; 4]) -> [usize; 4] {
    t.sort_unstable();
    t
}

/// Grow the triangulated maximally filtered graph. Needs `n >= 5`.
pub fn build_planar_graph(sim: &DMatrix<f64>) -> Result<FilteredGraph> {
    check_square(sim, "similarity")?;
    let n = sim.nrows();
    if n < 5 {
        return Err(Error::validation(format!("planar filtering needs at least 5 vertices, got {n}")));
    }
    let seed = seed_clique(sim);
    let mut placed = vec![false; n];
    let mut edges = Vec::with_capacity(3 * n - 6);
    for (a, &i) in seed.iter().enumerate() {
        placed[i] = true;
        for &j in &seed[a + 1..] {
            edges.push((i, j, sim[(i, j)]));
        }
    }
    let mut bubbles = vec![Bubble { vertices: seed, parent: None, separator: None, inserted: None }];

    struct Face {
        tri: [usize; 3],
        owner: usize,
        alive: bool,
        best: Option<(f64, usize)>,
    }
    let mut faces: Vec<Face> = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]]
        .iter()
        .map(|idx| {
            let tri = [seed[idx[0]], seed[idx[1]], seed[idx[2]]];
            Face { tri, owner: 0, alive: true, best: best_vertex(sim, &tri, &placed) }
        })
        .collect();

    for _ in 4..n {
        let mut chosen: Option<(usize, f64, usize)> = None; // (face, gain, vertex)
        for (fi, f) in faces.iter().enumerate() {
            let Some((gain, v)) = f.best.filter(|_| f.alive) else { continue };
            let better = match chosen {
                None => true,
                Some((_, g, u)) => gain > g || (gain == g && v < u),
            };
            if better {
                chosen = Some((fi, gain, v));
            }
        }
        let (fi, _, v) = chosen.expect("a face always has a candidate while vertices remain");
        placed[v] = true;
        faces[fi].alive = false;
        let [a, b, c] = faces[fi].tri;
        let owner = faces[fi].owner;
        for u in [a, b, c] {
            edges.push((u.min(v), u.max(v), sim[(u, v)]));
        }
        let bubble_id = bubbles.len();
        bubbles.push(Bubble {
            vertices: sorted4([a, b, c, v]),
            parent: Some(owner),
            separator: Some(sorted3([a, b, c])),
            inserted: Some(v),
        });
        for f in faces.iter_mut().filter(|f| f.alive && f.best.is_some_and(|(_, u)| u == v)) {
            f.best = best_vertex(sim, &f.tri, &placed);
        }
        for tri in [[a, b, v], [a, c, v], [b, c, v]] {
            faces.push(Face { tri, owner: bubble_id, alive: true, best: best_vertex(sim, &tri, &placed) });
        }
    }

    let triangulation = faces.iter().filter(|f| f.alive).map(|f| sorted3(f.tri)).collect();
    Ok(FilteredGraph { n, edges, triangulation, bubbles, similarity: sim.clone() })
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);
impl Eq for HeapItem {}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn shortest_paths(adj_dist: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj_dist.len()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::from([HeapItem(0.0, source)]);
    while let Some(HeapItem(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(x, w) in &adj_dist[u] {
            let nd = d + w;
            if nd < dist[x] {
                dist[x] = nd;
                heap.push(HeapItem(nd, x));
            }
        }
    }
    dist
}

/// Partition the vertices of `graph` into clusters, one per converging bubble.
pub fn dbht_cluster(graph: &FilteredGraph, distance: &DMatrix<f64>) -> Result<Clustering> {
    let n = graph.n;
    check_square(distance, "distance")?;
    if distance.nrows() != n {
        return Err(Error::validation("distance matrix does not match the graph"));
    }
    if graph.bubbles.len() != n - 3 || graph.edges.len() != 3 * n - 6 {
        return Err(Error::validation("graph is not a complete triangulated filtering"));
    }
    let adj = graph.adjacency();
    let first = graph.edges[0].2;
    if graph.edges.iter().all(|e| e.2 == first) {
        return Ok(Clustering { labels: vec![1; n], k: 1 });
    }
    let mut weight = vec![0.0; n * n];
    for &(a, b, w) in &graph.edges {
        weight[a * n + b] = w;
        weight[b * n + a] = w;
    }

    // Side strength counts only similarity in excess of the average pair, so
    // a large weakly-related remainder cannot outweigh a small tight group.
    let sim = &graph.similarity;
    if sim.nrows() != n {
        return Err(Error::validation("graph carries no similarity matrix"));
    }
    let off_mean = (sim.sum() - sim.trace()) / (n * (n - 1)) as f64;
    let excess: Vec<f64> = (0..n * n).map(|k| (sim[(k / n, k % n)] - off_mean).max(0.0)).collect();
    let nb = graph.bubbles.len();
    let mut children = vec![Vec::new(); nb];
    for (id, b) in graph.bubbles.iter().enumerate() {
        if let Some(p) = b.parent {
            children[p].push(id);
        }
    }
    // Bubbles are created after their parents, so reverse creation order is a post-order.
    let mut subtree: Vec<Vec<usize>> = vec![Vec::new(); nb];
    for id in (1..nb).rev() {
        let mut verts = vec![graph.bubbles[id].inserted.expect("non-root bubbles record their vertex")];
        for &c in &children[id] {
            verts.extend_from_slice(&subtree[c]);
        }
        subtree[id] = verts;
    }

    // out[b]: bubbles that b points to along directed tree edges.
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); nb];
    let mut side = vec![false; n];
    for id in 1..nb {
        let bubble = &graph.bubbles[id];
        let parent = bubble.parent.expect("non-root");
        let sep = bubble.separator.expect("non-root");
        for &v in &subtree[id] {
            side[v] = true;
        }
        let (mut toward_child, mut toward_parent) = (0.0, 0.0);
        for &u in &sep {
            for x in 0..n {
                if sep.contains(&x) {
                    continue;
                }
                let w = excess[u * n + x];
                if side[x] {
                    toward_child += w;
                } else {
                    toward_parent += w;
                }
            }
        }
        for &v in &subtree[id] {
            side[v] = false;
        }
        if toward_child > toward_parent {
            out[parent].push(id);
        } else {
            out[id].push(parent);
        }
    }
    let converging: Vec<usize> = (0..nb).filter(|&b| out[b].is_empty()).collect();
    let mut sink_slot = vec![usize::MAX; nb];
    for (slot, &b) in converging.iter().enumerate() {
        sink_slot[b] = slot;
    }

    let mut bubbles_of = vec![Vec::new(); n];
    for (id, b) in graph.bubbles.iter().enumerate() {
        for &v in &b.vertices {
            bubbles_of[v].push(id);
        }
    }
    let internal = |b: usize| -> f64 {
        let vs = &graph.bubbles[b].vertices;
        let mut s = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                s += weight[vs[i] * n + vs[j]];
            }
        }
        s
    };

    let mut assigned: Vec<Option<usize>> = vec![None; n];
    let mut deferred = Vec::new();
    for v in 0..n {
        let own: Vec<usize> = bubbles_of[v].iter().copied().filter(|&b| sink_slot[b] != usize::MAX).collect();
        match own.len() {
            0 => deferred.push(v),
            1 => assigned[v] = Some(sink_slot[own[0]]),
            _ => {
                let mut best: Option<(f64, usize)> = None;
                for &b in &own {
                    let tie: f64 = graph.bubbles[b].vertices.iter().filter(|&&u| u != v).map(|&u| weight[v * n + u]).sum();
                    let chi = tie / internal(b);
                    if best.is_none_or(|(c, _)| chi > c) {
                        best = Some((chi, b));
                    }
                }
                assigned[v] = Some(sink_slot[best.expect("non-empty").1]);
            }
        }
    }

    if !deferred.is_empty() {
        let mut reach: Vec<Vec<usize>> = vec![Vec::new(); nb];
        for b in 0..nb {
            let mut seen = vec![false; nb];
            let mut queue = VecDeque::from([b]);
            seen[b] = true;
            while let Some(x) = queue.pop_front() {
                if out[x].is_empty() {
                    reach[b].push(sink_slot[x]);
                }
                for &y in &out[x] {
                    if !seen[y] {
                        seen[y] = true;
                        queue.push_back(y);
                    }
                }
            }
        }
        let adj_dist: Vec<Vec<(usize, f64)>> =
            adj.iter().enumerate().map(|(u, nbrs)| nbrs.iter().map(|&(x, _)| (x, distance[(u, x)])).collect()).collect();
        let members_of = |slot: usize| -> Vec<usize> { (0..n).filter(|&u| assigned[u] == Some(slot)).collect() };
        let resolved: Vec<(usize, usize)> = deferred
            .iter()
            .map(|&v| {
                let mut candidates: Vec<usize> = bubbles_of[v].iter().flat_map(|&b| reach[b].iter().copied()).collect();
                candidates.sort_unstable();
                candidates.dedup();
                candidates.retain(|&s| !members_of(s).is_empty());
                if candidates.is_empty() {
                    candidates = (0..converging.len()).filter(|&s| !members_of(s).is_empty()).collect();
                }
                let dist = shortest_paths(&adj_dist, v);
                let mut best: Option<(f64, usize)> = None;
                for s in candidates {
                    let m = members_of(s);
                    let mean = m.iter().map(|&u| dist[u]).sum::<f64>() / m.len() as f64;
                    if best.is_none_or(|(d, _)| mean < d) {
                        best = Some((mean, s));
                    }
                }
                (v, best.expect("at least one converging bubble keeps a member").1)
            })
            .collect();
        for (v, s) in resolved {
            assigned[v] = Some(s);
        }
    }

    let raw: Vec<usize> = assigned.into_iter().map(|s| s.expect("every vertex assigned")).collect();
    Ok(Clustering::from_labels(&raw))
}

/// Similarity → filtered graph → clustering in one call.
pub fn cluster_correlation(g: &CorrelationMatrix) -> Result<Clustering> {
    let (sim, dist) = similarity_from_residual(g);
    let graph = build_planar_graph(&sim)?;
    dbht_cluster(&graph, &dist)
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::validation("labelings must be non-empty and of equal length"));
    }
    let ca = Clustering::from_labels(a);
    let cb = Clustering::from_labels(b);
    let mut table = vec![0u64; ca.k * cb.k];
    for (x, y) in ca.labels.iter().zip(&cb.labels) {
        table[(x - 1) * cb.k + (y - 1)] += 1;
    }
    let pairs = |c: u64| (c * c.saturating_sub(1) / 2) as f64;
    let index: f64 = table.iter().map(|&c| pairs(c)).sum();
    let row: f64 = ca.sizes().iter().map(|&s| pairs(s as u64)).sum();
    let col: f64 = cb.sizes().iter().map(|&s| pairs(s as u64)).sum();
    let total = pairs(a.len() as u64);
    let expected = row * col / total;
    let max = 0.5 * (row + col);
    if max == expected {
        // Both labelings are trivial (all singletons or one cluster).
        return Ok(if index == expected { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}
