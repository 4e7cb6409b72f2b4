//! Exact integer max-flow (Dinic) with residual-reachability cut extraction.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Edge {
    to: usize,
    cap: u64,
    rev: usize,
}

#[derive(Debug, Clone)]
pub struct Dinic {
    graph: Vec<Vec<Edge>>,
    level: Vec<i64>,
    iter: Vec<usize>,
}

impl Dinic {
    pub fn new(n: usize) -> Self {
        Self { graph: vec![Vec::new(); n], level: vec![-1; n], iter: vec![0; n] }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: u64) {
        let rev_to = self.graph[to].len() + usize::from(from == to);
        let rev_from = self.graph[from].len();
        self.graph[from].push(Edge { to, cap, rev: rev_to });
        self.graph[to].push(Edge { to: from, cap: 0, rev: rev_from });
    }

    fn bfs(&mut self, s: usize) {
        self.level.fill(-1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for e in &self.graph[v] {
                if e.cap > 0 && self.level[e.to] < 0 {
                    self.level[e.to] = self.level[v] + 1;
                    queue.push_back(e.to);
                }
            }
        }
    }

    fn dfs(&mut self, v: usize, t: usize, limit: u64) -> u64 {
        if v == t {
            return limit;
        }
        while self.iter[v] < self.graph[v].len() {
            let e = self.graph[v][self.iter[v]];
            if e.cap > 0 && self.level[v] < self.level[e.to] {
                let d = self.dfs(e.to, t, limit.min(e.cap));
                if d > 0 {
                    self.graph[v][self.iter[v]].cap -= d;
                    self.graph[e.to][e.rev].cap += d;
                    return d;
                }
            }
            self.iter[v] += 1;
        }
        0
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> Result<u64> {
        let mut flow: u64 = 0;
        loop {
            self.bfs(s);
            if self.level[t] < 0 {
                return Ok(flow);
            }
            self.iter.fill(0);
            loop {
                let f = self.dfs(s, t, u64::MAX);
                if f == 0 {
                    break;
                }
                flow = flow.checked_add(f).ok_or(Error::CapacityOverflow)?;
            }
        }
    }

    /// Nodes reachable from `s` in the residual graph; call after `max_flow`.
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.graph.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for e in &self.graph[v] {
                if e.cap > 0 && !seen[e.to] {
                    seen[e.to] = true;
                    queue.push_back(e.to);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_network() {
        let mut d = Dinic::new(6);
        for (a, b, c) in [(0, 1, 10), (0, 2, 10), (1, 3, 4), (1, 4, 8), (2, 4, 9), (3, 5, 10), (4, 3, 6), (4, 5, 10)] {
            d.add_edge(a, b, c);
        }
        assert_eq!(d.max_flow(0, 5).unwrap(), 19);
        let side = d.source_side(0);
        assert!(side[0] && !side[5]);
    }

    #[test]
    fn disconnected_is_zero() {
        let mut d = Dinic::new(4);
        d.add_edge(0, 1, 10);
        d.add_edge(2, 3, 5);
        assert_eq!(d.max_flow(0, 3).unwrap(), 0);
        assert_eq!(d.source_side(0), vec![true, true, false, false]);
    }
}
