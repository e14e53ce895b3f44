use std::collections::VecDeque;

use rand::Rng;

use super::select::SlotList;
use crate::model::ChannelModel;

/// Realised ON/OFF state of every (user, channel) pair for one epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelMatrix {
    n: usize,
    m: usize,
    on: Vec<bool>,
}

impl ChannelMatrix {
    pub fn all_on(n: usize, m: usize) -> Self {
        ChannelMatrix { n, m, on: vec![true; n * m] }
    }

    pub fn all_off(n: usize, m: usize) -> Self {
        ChannelMatrix { n, m, on: vec![false; n * m] }
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == m), "ragged channel matrix");
        ChannelMatrix { n, m, on: rows.concat() }
    }

    /// Independent Bernoulli draw per pair.
    pub fn sample<R: Rng + ?Sized>(model: &ChannelModel, rng: &mut R) -> Self {
        let (n, m) = (model.users(), model.channels());
        let mut out = Self::all_on(n, m);
        out.resample(model, rng);
        out
    }

    /// Redraws in place; skips the RNG entirely for pairs that are always ON.
    pub fn resample<R: Rng + ?Sized>(&mut self, model: &ChannelModel, rng: &mut R) {
        for i in 0..self.n {
            for j in 0..self.m {
                let h = model.on_prob(i, j);
                self.on[i * self.m + j] = h >= 1.0 || rng.random::<f64>() < h;
            }
        }
    }

    pub fn users(&self) -> usize {
        self.n
    }

    pub fn channels(&self) -> usize {
        self.m
    }

    pub fn is_on(&self, user: usize, channel: usize) -> bool {
        self.on[user * self.m + channel]
    }

    pub fn set(&mut self, user: usize, channel: usize, on: bool) {
        self.on[user * self.m + channel] = on;
    }
}

/// Bipartite graph with left vertices `0..left` and right vertices `0..right`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    pub right: usize,
    pub adj: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    pub fn new(left: usize, right: usize) -> Self {
        BipartiteGraph { right, adj: vec![Vec::new(); left] }
    }

    pub fn left(&self) -> usize {
        self.adj.len()
    }

    pub fn add_edge(&mut self, l: usize, r: usize) {
        debug_assert!(r < self.right);
        self.adj[l].push(r);
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, l: usize, r: usize) -> bool {
        self.adj[l].contains(&r)
    }
}

/// Slot-to-channel graph for one epoch plus the slot index behind each left vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotGraph {
    pub graph: BipartiteGraph,
    /// `slot_of[l]` is the slot index of left vertex `l`.
    pub slot_of: Vec<usize>,
}

/// Edge between a filled slot and channel `j` iff the channel is ON for the slot's user.
/// Vacant slots are left out.
pub fn build_bipartite(slots: &SlotList, h: &ChannelMatrix) -> SlotGraph {
    let filled: Vec<(usize, usize)> = slots
        .slots
        .iter()
        .enumerate()
        .filter_map(|(j, u)| u.map(|u| (j, u)))
        .collect();
    let mut graph = BipartiteGraph::new(filled.len(), h.channels());
    for (l, &(_, user)) in filled.iter().enumerate() {
        for ch in 0..h.channels() {
            if h.is_on(user, ch) {
                graph.add_edge(l, ch);
            }
        }
    }
    SlotGraph { graph, slot_of: filled.into_iter().map(|(j, _)| j).collect() }
}

/// A set of vertex-disjoint `(left, right)` edges.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
}

impl Matching {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Every pair is an edge and no vertex is used twice.
    pub fn is_valid_for(&self, g: &BipartiteGraph) -> bool {
        let mut l_used = vec![false; g.left()];
        let mut r_used = vec![false; g.right];
        self.pairs.iter().all(|&(l, r)| {
            let fresh = l < g.left() && r < g.right && !l_used[l] && !r_used[r];
            if fresh {
                l_used[l] = true;
                r_used[r] = true;
            }
            fresh && g.has_edge(l, r)
        })
    }
}

const UNMATCHED: usize = usize::MAX;

/// Maximum-cardinality matching by Hopcroft–Karp, `O(E sqrt(V))`.
pub fn max_matching(g: &BipartiteGraph) -> Matching {
    let nl = g.left();
    let mut match_l = vec![UNMATCHED; nl];
    let mut match_r = vec![UNMATCHED; g.right];
    let mut dist = vec![0usize; nl];

    while bfs(g, &match_l, &match_r, &mut dist) {
        let mut it = vec![0usize; nl];
        for l in 0..nl {
            if match_l[l] == UNMATCHED {
                dfs(g, l, &mut match_l, &mut match_r, &mut dist, &mut it);
            }
        }
    }

    Matching {
        pairs: match_l
            .iter()
            .enumerate()
            .filter(|(_, &r)| r != UNMATCHED)
            .map(|(l, &r)| (l, r))
            .collect(),
    }
}

// Layers free left vertices at distance 0; returns whether an augmenting path exists.
fn bfs(g: &BipartiteGraph, match_l: &[usize], match_r: &[usize], dist: &mut [usize]) -> bool {
    let mut queue = VecDeque::new();
    for l in 0..g.left() {
        if match_l[l] == UNMATCHED {
            dist[l] = 0;
            queue.push_back(l);
        } else {
            dist[l] = usize::MAX;
        }
    }
    let mut found = false;
    while let Some(l) = queue.pop_front() {
        for &r in &g.adj[l] {
            let next = match_r[r];
            if next == UNMATCHED {
                found = true;
            } else if dist[next] == usize::MAX {
                dist[next] = dist[l] + 1;
                queue.push_back(next);
            }
        }
    }
    found
}

fn dfs(
    g: &BipartiteGraph,
    l: usize,
    match_l: &mut [usize],
    match_r: &mut [usize],
    dist: &mut [usize],
    it: &mut [usize],
) -> bool {
    while it[l] < g.adj[l].len() {
        let r = g.adj[l][it[l]];
        it[l] += 1;
        let next = match_r[r];
        if next == UNMATCHED
            || (dist[next] == dist[l] + 1 && dfs(g, next, match_l, match_r, dist, it))
        {
            match_l[l] = r;
            match_r[r] = l;
            return true;
        }
    }
    dist[l] = usize::MAX;
    false
}
