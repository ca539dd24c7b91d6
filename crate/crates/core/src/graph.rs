//! Erdős–Rényi generation and the mutable multigraph the dynamics run on.
//!
//! Edges carry stable ids. Deleting an edge leaves a dead slot behind;
//! rewiring keeps the id and moves one endpoint, which is what the event
//! queue in [`crate::sim`] keys its clocks on.

use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};

pub type Vertex = usize;
pub type EdgeId = usize;

const DEAD: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvolvingGraph {
    n: usize,
    ends: Vec<[Vertex; 2]>,
    incident: Vec<Vec<EdgeId>>,
    edge_count: usize,
}

/// Connected components, largest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSummary {
    pub component_sizes: Vec<usize>,
    /// Largest size over n; zero only for the empty graph.
    pub giant_fraction: f64,
}

impl EvolvingGraph {
    /// `n` isolated vertices.
    pub fn empty(n: usize) -> Self {
        EvolvingGraph {
            n,
            ends: Vec::new(),
            incident: vec![Vec::new(); n],
            edge_count: 0,
        }
    }

    pub fn from_edges(n: usize, edges: &[(Vertex, Vertex)]) -> Result<Self> {
        let mut g = EvolvingGraph::empty(n);
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.incident[v].len()
    }

    /// Number of edge slots ever allocated, including deleted ones.
    pub fn edge_slots(&self) -> usize {
        self.ends.len()
    }

    pub fn is_alive(&self, e: EdgeId) -> bool {
        self.ends.get(e).is_some_and(|ends| ends[0] != DEAD)
    }

    pub fn endpoints(&self, e: EdgeId) -> Option<(Vertex, Vertex)> {
        self.ends
            .get(e)
            .filter(|ends| ends[0] != DEAD)
            .map(|ends| (ends[0], ends[1]))
    }

    /// The endpoint of `e` that is not `v`.
    pub fn other_end(&self, e: EdgeId, v: Vertex) -> Vertex {
        let [a, b] = self.ends[e];
        if a == v {
            b
        } else {
            a
        }
    }

    /// Ids of the edges incident to `v`, one per parallel copy.
    pub fn incident_edges(&self, v: Vertex) -> &[EdgeId] {
        &self.incident[v]
    }

    pub fn neighbors(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        self.incident[v].iter().map(move |&e| self.other_end(e, v))
    }

    /// Live edges as `(min, max)` pairs, parallel copies repeated.
    pub fn edges(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        self.ends
            .iter()
            .filter(|ends| ends[0] != DEAD)
            .map(|&[a, b]| (a.min(b), a.max(b)))
    }

    pub fn add_edge(&mut self, u: Vertex, v: Vertex) -> Result<EdgeId> {
        if u >= self.n || v >= self.n {
            return Err(Error::Consistency(format!(
                "edge ({u},{v}) out of range for n={}",
                self.n
            )));
        }
        if u == v {
            return Err(Error::Consistency(format!("self-loop at {u}")));
        }
        let e = self.ends.len();
        self.ends.push([u, v]);
        self.incident[u].push(e);
        self.incident[v].push(e);
        self.edge_count += 1;
        Ok(e)
    }

    /// Some live edge joining `u` and `v`.
    pub fn find_edge(&self, u: Vertex, v: Vertex) -> Option<EdgeId> {
        if u >= self.n || v >= self.n {
            return None;
        }
        self.incident[u]
            .iter()
            .copied()
            .find(|&e| self.other_end(e, u) == v)
    }

    fn detach(&mut self, v: Vertex, e: EdgeId) {
        let list = &mut self.incident[v];
        let pos = list
            .iter()
            .position(|&x| x == e)
            .expect("edge id missing from incidence list");
        list.swap_remove(pos);
    }

    pub fn delete_edge_id(&mut self, e: EdgeId) -> Result<()> {
        let (a, b) = self
            .endpoints(e)
            .ok_or_else(|| Error::Consistency(format!("edge id {e} is not present")))?;
        self.detach(a, e);
        self.detach(b, e);
        self.ends[e] = [DEAD, DEAD];
        self.edge_count -= 1;
        Ok(())
    }

    /// Removes one copy of the edge `(u, v)`.
    pub fn delete_edge(&mut self, u: Vertex, v: Vertex) -> Result<()> {
        let e = self
            .find_edge(u, v)
            .ok_or_else(|| Error::Consistency(format!("edge ({u},{v}) is not present")))?;
        self.delete_edge_id(e)
    }

    /// Moves the far end of `e` away from `keep`'s partner to a vertex drawn
    /// uniformly from everything except `keep`. Returns the new partner.
    ///
    /// The new partner may already be adjacent to `keep` (a parallel edge)
    /// or may be the old partner again.
    pub fn rewire_edge<R: Rng + ?Sized>(
        &mut self,
        e: EdgeId,
        keep: Vertex,
        rng: &mut R,
    ) -> Result<Vertex> {
        let (a, b) = self
            .endpoints(e)
            .ok_or_else(|| Error::Consistency(format!("edge id {e} is not present")))?;
        let old = match keep {
            k if k == a => b,
            k if k == b => a,
            _ => {
                return Err(Error::Consistency(format!(
                    "vertex {keep} is not an endpoint of edge {e}"
                )))
            }
        };
        let mut w = rng.random_range(0..self.n - 1);
        if w >= keep {
            w += 1;
        }
        self.detach(old, e);
        self.incident[w].push(e);
        self.ends[e] = [keep, w];
        Ok(w)
    }

    /// Removes one copy of `(u, v)` and attaches `u` to a uniformly random
    /// vertex other than `u`. Returns the new neighbour.
    pub fn rewire_endpoint<R: Rng + ?Sized>(
        &mut self,
        u: Vertex,
        v: Vertex,
        rng: &mut R,
    ) -> Result<Vertex> {
        let e = self
            .find_edge(u, v)
            .ok_or_else(|| Error::Consistency(format!("edge ({u},{v}) is not present")))?;
        self.rewire_edge(e, u, rng)
    }

    pub fn components(&self) -> ComponentSummary {
        let mut uf = UnionFind::new(self.n);
        for (a, b) in self.edges() {
            uf.union(a, b);
        }
        let mut sizes: Vec<usize> = Vec::new();
        for v in 0..self.n {
            if uf.find(v) == v {
                sizes.push(uf.size[v]);
            }
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        let giant_fraction = match sizes.first() {
            Some(&s) => s as f64 / self.n as f64,
            None => 0.0,
        };
        ComponentSummary {
            component_sizes: sizes,
            giant_fraction,
        }
    }

    /// Size of the component containing `v`.
    pub fn component_size_of(&self, v: Vertex) -> usize {
        let mut seen = vec![false; self.n];
        let mut stack = vec![v];
        seen[v] = true;
        let mut count = 0;
        while let Some(x) = stack.pop() {
            count += 1;
            for y in self.neighbors(x) {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        count
    }

    /// Full audit of the structural invariants.
    pub fn check_invariants(&self) -> Result<()> {
        let mut live = 0;
        for (e, &[a, b]) in self.ends.iter().enumerate() {
            if a == DEAD {
                if b != DEAD {
                    return Err(Error::Consistency(format!("half-dead edge {e}")));
                }
                continue;
            }
            live += 1;
            if a == b {
                return Err(Error::Consistency(format!("self-loop on edge {e}")));
            }
            let ca = self.incident[a].iter().filter(|&&x| x == e).count();
            let cb = self.incident[b].iter().filter(|&&x| x == e).count();
            if ca != 1 || cb != 1 {
                return Err(Error::Consistency(format!(
                    "edge {e}=({a},{b}) listed {ca}/{cb} times"
                )));
            }
        }
        let half_degree_sum: usize = self.incident.iter().map(Vec::len).sum();
        if half_degree_sum != 2 * live || live != self.edge_count {
            return Err(Error::Consistency(format!(
                "edge_count {} vs {} live edges vs degree sum {}",
                self.edge_count, live, half_degree_sum
            )));
        }
        for (v, list) in self.incident.iter().enumerate() {
            for &e in list {
                let [a, b] = self.ends[e];
                if a != v && b != v {
                    return Err(Error::Consistency(format!(
                        "vertex {v} lists edge {e} it is not on"
                    )));
                }
            }
        }
        Ok(())
    }

    /// One `u v` line per live edge, 0-indexed.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        for (a, b) in self.edges() {
            writeln!(out, "{a} {b}")?;
        }
        Ok(())
    }
}

/// Samples G(n, μ/n): every unordered pair independently present with
/// probability μ/n.
///
/// Pairs are visited with geometric skips, so the cost is linear in the
/// number of edges rather than quadratic in `n`.
pub fn generate_er<R: Rng + ?Sized>(n: usize, mu: f64, rng: &mut R) -> Result<EvolvingGraph> {
    let mut g = EvolvingGraph::empty(n);
    if n == 0 {
        return Ok(g);
    }
    if !(mu >= 0.0 && mu <= (n - 1) as f64) {
        return Err(Error::param(format!(
            "mean degree must lie in [0, n-1] = [0, {}], got {mu}",
            n - 1
        )));
    }
    let p = mu / n as f64;
    if p == 0.0 {
        return Ok(g);
    }
    let expected = 0.5 * mu * n as f64;
    g.ends.reserve((expected * 1.05) as usize + 16);
    let log_q = (-p).ln_1p();
    // Pairs (v, w) with w < v in row-major order.
    let mut v: usize = 1;
    let mut w: i64 = -1;
    while v < n {
        let r: f64 = rng.random();
        let skip = ((1.0 - r).ln() / log_q).floor();
        w += 1 + skip.min(i64::MAX as f64 / 4.0) as i64;
        while v < n && w >= v as i64 {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            g.add_edge(v, w as usize)?;
        }
    }
    Ok(g)
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn empty_population() {
        let g = generate_er(0, 3.0, &mut seed::rng(1)).unwrap();
        assert_eq!(g.n(), 0);
        assert_eq!(g.edge_count(), 0);
        assert!(g.components().component_sizes.is_empty());
    }

    #[test]
    fn zero_mean_degree_has_no_edges() {
        let g = generate_er(10_000, 0.0, &mut seed::rng(1)).unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn mean_degree_out_of_range() {
        assert!(matches!(generate_er(10, -0.1, &mut seed::rng(1)), Err(Error::Param(_))));
        assert!(matches!(generate_er(10, 9.5, &mut seed::rng(1)), Err(Error::Param(_))));
        assert!(generate_er(10, 9.0, &mut seed::rng(1)).is_ok());
    }

    #[test]
    fn complete_graph_at_maximum_degree() {
        // μ = n-1 is p = (n-1)/n, not 1, so just check plausibility.
        let g = generate_er(50, 49.0, &mut seed::rng(3)).unwrap();
        g.check_invariants().unwrap();
        assert!(g.edge_count() > 1000 && g.edge_count() <= 1225);
    }

    #[test]
    fn generation_has_no_loops_or_duplicates() {
        let g = generate_er(2000, 8.0, &mut seed::rng(9)).unwrap();
        g.check_invariants().unwrap();
        let mut pairs: Vec<_> = g.edges().collect();
        let before = pairs.len();
        pairs.sort_unstable();
        pairs.dedup();
        assert_eq!(pairs.len(), before);
    }

    #[test]
    fn isolated_vertices() {
        let g = EvolvingGraph::empty(5);
        let c = g.components();
        assert_eq!(c.component_sizes, vec![1; 5]);
        assert!((c.giant_fraction - 0.2).abs() < 1e-15);
    }

    #[test]
    fn path_is_one_component() {
        let g = EvolvingGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert_eq!(g.components().component_sizes, vec![4]);
        assert_eq!(g.component_size_of(2), 4);
    }

    #[test]
    fn delete_splits_a_two_path() {
        let mut g = EvolvingGraph::from_edges(2, &[(0, 1)]).unwrap();
        g.delete_edge(1, 0).unwrap();
        assert_eq!(g.components().component_sizes, vec![1, 1]);
        assert!(matches!(g.delete_edge(0, 1), Err(Error::Consistency(_))));
    }

    #[test]
    fn delete_both_copies_of_a_double_edge() {
        let mut g = EvolvingGraph::from_edges(3, &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.components().component_sizes, vec![2, 1]);
        g.delete_edge(0, 1).unwrap();
        g.delete_edge(0, 1).unwrap();
        assert_eq!(g.edge_count(), 0);
        g.check_invariants().unwrap();
    }

    #[test]
    fn delete_every_edge() {
        let mut g = generate_er(1000, 5.0, &mut seed::rng(4)).unwrap();
        let all: Vec<_> = g.edges().collect();
        for (u, v) in all {
            g.delete_edge(u, v).unwrap();
        }
        assert_eq!(g.edge_count(), 0);
        g.check_invariants().unwrap();
    }

    #[test]
    fn rewire_on_two_vertices_is_forced() {
        let mut g = EvolvingGraph::from_edges(2, &[(0, 1)]).unwrap();
        let mut rng = seed::rng(5);
        for _ in 0..20 {
            assert_eq!(g.rewire_endpoint(0, 1, &mut rng).unwrap(), 1);
            assert_eq!(g.edge_count(), 1);
        }
        g.check_invariants().unwrap();
    }

    #[test]
    fn rewire_missing_edge_is_an_error() {
        let mut g = EvolvingGraph::from_edges(3, &[(0, 1)]).unwrap();
        let err = g.rewire_endpoint(0, 2, &mut seed::rng(1));
        assert!(matches!(err, Err(Error::Consistency(_))));
    }

    #[test]
    fn rewire_keeps_edge_count() {
        let mut g = generate_er(500, 4.0, &mut seed::rng(6)).unwrap();
        let m = g.edge_count();
        let mut rng = seed::rng(7);
        for _ in 0..2000 {
            let e = loop {
                let e = rng.random_range(0..g.edge_slots());
                if g.is_alive(e) {
                    break e;
                }
            };
            let (a, b) = g.endpoints(e).unwrap();
            let w = g.rewire_endpoint(a, b, &mut rng).unwrap();
            assert_ne!(w, a);
            assert_eq!(g.edge_count(), m);
        }
        g.check_invariants().unwrap();
    }

    #[test]
    fn edge_list_export() {
        let g = EvolvingGraph::from_edges(4, &[(2, 0), (1, 3)]).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0 2\n1 3\n");
    }
}
