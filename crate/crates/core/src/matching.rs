//! Maximum cardinality bipartite matching (Hopcroft–Karp).

use std::collections::VecDeque;

const FREE: u32 = u32::MAX;

/// Bipartite graph with `left` and `right` vertex counts and adjacency of
/// left vertices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bipartite {
    pub left: usize,
    pub right: usize,
    pub adj: Vec<Vec<u32>>,
}

impl Bipartite {
    pub fn from_edges(left: usize, right: usize, edges: &[(u32, u32)]) -> Self {
        let mut adj = vec![Vec::new(); left];
        for &(u, v) in edges {
            adj[u as usize].push(v);
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        Bipartite { left, right, adj }
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    pub fn max_left_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn max_right_degree(&self) -> usize {
        let mut deg = vec![0usize; self.right];
        for a in &self.adj {
            for &v in a {
                deg[v as usize] += 1;
            }
        }
        deg.into_iter().max().unwrap_or(0)
    }
}

/// Maximum matching as sorted `(left, right)` pairs.
pub fn hopcroft_karp(g: &Bipartite) -> Vec<(u32, u32)> {
    let mut match_l = vec![FREE; g.left];
    let mut match_r = vec![FREE; g.right];
    let mut dist = vec![u32::MAX; g.left];
    loop {
        // Layer free left vertices by alternating BFS.
        let mut queue = VecDeque::new();
        for u in 0..g.left {
            if match_l[u] == FREE {
                dist[u] = 0;
                queue.push_back(u as u32);
            } else {
                dist[u] = u32::MAX;
            }
        }
        let mut reachable = false;
        while let Some(u) = queue.pop_front() {
            for &v in &g.adj[u as usize] {
                let w = match_r[v as usize];
                if w == FREE {
                    reachable = true;
                } else if dist[w as usize] == u32::MAX {
                    dist[w as usize] = dist[u as usize] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !reachable {
            break;
        }
        let mut next = vec![0usize; g.left];
        for u in 0..g.left {
            if match_l[u] == FREE {
                augment(g, u as u32, &mut match_l, &mut match_r, &mut dist, &mut next);
            }
        }
    }
    (0..g.left).filter(|&u| match_l[u] != FREE).map(|u| (u as u32, match_l[u])).collect()
}

/// Iterative DFS along the BFS layers.
fn augment(g: &Bipartite, root: u32, match_l: &mut [u32], match_r: &mut [u32], dist: &mut [u32], next: &mut [usize]) -> bool {
    let mut stack = vec![root];
    while let Some(&u) = stack.last() {
        let ui = u as usize;
        if next[ui] == g.adj[ui].len() {
            dist[ui] = u32::MAX;
            stack.pop();
            continue;
        }
        let v = g.adj[ui][next[ui]];
        next[ui] += 1;
        let w = match_r[v as usize];
        if w == FREE {
            // Flip the path root .. u, v.
            let mut v = v;
            while let Some(x) = stack.pop() {
                let prev = match_l[x as usize];
                match_l[x as usize] = v;
                match_r[v as usize] = x;
                v = prev;
            }
            return true;
        }
        if dist[w as usize] == dist[ui] + 1 {
            stack.push(w);
        }
    }
    false
}
