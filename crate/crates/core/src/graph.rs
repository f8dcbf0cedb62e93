//! The (k-1)-connection graph of a game.
//!
//! Vertices are the positive-mass question tuples. Two tuples are joined
//! when they agree on all but one player's question; the symmetric weight
//! function is built from the question distribution's conditionals, in
//! exact rationals. Row sums reproduce the tuple probabilities, so the
//! weights form a probability distribution over vertex pairs.

use std::collections::BTreeMap;

use num::{Signed, Zero};
use thiserror::Error;

use crate::game::{Game, QTuple};
use crate::rat::{rat_int, Rat};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("connection graph has no vertices")]
    Empty,
}

#[derive(Debug, Clone)]
pub struct ConnectionGraph {
    vertices: Vec<QTuple>,
    /// Vertex weight: the tuple's probability under the game distribution.
    vertex_weight: Vec<Rat>,
    /// Positive weights keyed by vertex index pairs with i <= j; the
    /// diagonal (self-loop) entries are stored explicitly.
    weights: BTreeMap<(usize, usize), Rat>,
    component_of: Vec<usize>,
    component_count: usize,
    rho_min: Rat,
}

impl ConnectionGraph {
    pub fn vertices(&self) -> &[QTuple] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_index(&self, x: &[u32]) -> Option<usize> {
        self.vertices.binary_search_by(|v| v.as_slice().cmp(x)).ok()
    }

    pub fn vertex_weight(&self, i: usize) -> &Rat {
        &self.vertex_weight[i]
    }

    /// rho(i, j); zero for non-adjacent pairs.
    pub fn weight(&self, i: usize, j: usize) -> Rat {
        let key = (i.min(j), i.max(j));
        self.weights.get(&key).cloned().unwrap_or_else(Rat::zero)
    }

    /// Positive entries, each unordered pair once (diagonal included).
    pub fn positive_weights(&self) -> impl Iterator<Item = (&(usize, usize), &Rat)> {
        self.weights.iter()
    }

    /// Off-diagonal positive edges, each once.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, &Rat)> {
        self.weights
            .iter()
            .filter(|((i, j), _)| i != j)
            .map(|((i, j), w)| (*i, *j, w))
    }

    pub fn component_of(&self, i: usize) -> usize {
        self.component_of[i]
    }

    pub fn component_count(&self) -> usize {
        self.component_count
    }

    /// Vertex index sets of the connected components, in canonical order.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parts = vec![Vec::new(); self.component_count];
        for (v, &c) in self.component_of.iter().enumerate() {
            parts[c].push(v);
        }
        parts
    }

    /// Smallest positive weight, diagonal and off-diagonal alike.
    pub fn rho_min(&self) -> &Rat {
        &self.rho_min
    }

    /// Exact row sum at a vertex.
    pub fn row_sum(&self, i: usize) -> Rat {
        let mut sum = Rat::zero();
        for (&(a, b), w) in &self.weights {
            if a == i && b == i {
                sum += w.clone();
            } else if a == i || b == i {
                sum += w.clone();
            }
        }
        sum
    }

    pub fn total_weight(&self) -> Rat {
        let mut sum = Rat::zero();
        for (&(a, b), w) in &self.weights {
            if a == b {
                sum += w.clone();
            } else {
                sum += w.clone() + w.clone();
            }
        }
        sum
    }
}

/// Builds the connection graph over the game's support.
///
/// Diagonal: rho(x,x) = (1/k) P(x) sum_t P(x^t | x^{-t}).
/// Off-diagonal (tuples differing at exactly player t):
/// rho(x,x') = (1/k) P(x^{-t}) P(x^t | x^{-t}) P(x'^t | x^{-t}),
/// which collapses to (1/k) P(x) P(x') / P(x^{-t}).
pub fn build_connection_graph(game: &Game) -> Result<ConnectionGraph, GraphError> {
    let k = game.players();
    let vertices: Vec<QTuple> = game.support().cloned().collect();
    if vertices.is_empty() {
        return Err(GraphError::Empty);
    }
    let vertex_weight: Vec<Rat> = vertices.iter().map(|x| game.probability(x)).collect();
    let k_rat = rat_int(k as i64);

    let mut weights: BTreeMap<(usize, usize), Rat> = BTreeMap::new();
    let mut diag: Vec<Rat> = vec![Rat::zero(); vertices.len()];
    let mut dsu: Vec<usize> = (0..vertices.len()).collect();

    fn find(dsu: &mut Vec<usize>, mut v: usize) -> usize {
        while dsu[v] != v {
            dsu[v] = dsu[dsu[v]];
            v = dsu[v];
        }
        v
    }

    for t in 0..k {
        // Bucket support vertices by the punctured tuple x^{-t}.
        let mut buckets: BTreeMap<Vec<u32>, Vec<usize>> = BTreeMap::new();
        for (idx, x) in vertices.iter().enumerate() {
            let mut key = x.clone();
            key.remove(t);
            buckets.entry(key).or_default().push(idx);
        }
        for members in buckets.values() {
            let marginal: Rat = members.iter().map(|&i| vertex_weight[i].clone()).sum();
            for (a, &i) in members.iter().enumerate() {
                diag[i] += &vertex_weight[i] * &vertex_weight[i] / (&marginal * &k_rat);
                for &j in &members[a + 1..] {
                    let w = &vertex_weight[i] * &vertex_weight[j] / (&marginal * &k_rat);
                    if w.is_positive() {
                        *weights
                            .entry((i.min(j), i.max(j)))
                            .or_insert_with(Rat::zero) += w;
                        let (ri, rj) = (find(&mut dsu, i), find(&mut dsu, j));
                        if ri != rj {
                            dsu[ri.max(rj)] = ri.min(rj);
                        }
                    }
                }
            }
        }
    }
    for (i, d) in diag.into_iter().enumerate() {
        if d.is_positive() {
            weights.insert((i, i), d);
        }
    }

    // Canonical component ids in order of first appearance.
    let mut component_of = vec![0usize; vertices.len()];
    let mut roots: BTreeMap<usize, usize> = BTreeMap::new();
    for v in 0..vertices.len() {
        let r = find(&mut dsu, v);
        let next = roots.len();
        let id = *roots.entry(r).or_insert(next);
        component_of[v] = id;
    }
    let component_count = roots.len();

    let rho_min = weights
        .values()
        .min()
        .cloned()
        .expect("support vertices always carry a positive diagonal");

    Ok(ConnectionGraph {
        vertices,
        vertex_weight,
        weights,
        component_of,
        component_count,
        rho_min,
    })
}

/// Checks the four structural invariants exactly; returns human-readable
/// failures (empty means all hold).
pub fn check_graph_invariants(game: &Game, graph: &ConnectionGraph) -> Vec<String> {
    let mut problems = Vec::new();
    let one: Rat = rat_int(1);
    for (i, x) in graph.vertices().iter().enumerate() {
        let expect = game.probability(x);
        let got = graph.row_sum(i);
        if got != expect {
            problems.push(format!("row sum at vertex {i} is {got}, expected {expect}"));
        }
    }
    let total = graph.total_weight();
    if total != one {
        problems.push(format!("total weight is {total}, expected 1"));
    }
    for (&(i, j), w) in graph.positive_weights() {
        if !w.is_positive() {
            problems.push(format!("stored non-positive weight at ({i},{j})"));
        }
        if i != j {
            let diff = graph.vertices()[i]
                .iter()
                .zip(&graph.vertices()[j])
                .filter(|(a, b)| a != b)
                .count();
            if diff != 1 {
                problems.push(format!(
                    "edge ({i},{j}) joins tuples differing in {diff} coordinates"
                ));
            }
        }
    }
    problems
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_free_uniform, build_ghz, Predicate};
    use crate::rat::{rat, rat_one};
    use std::collections::BTreeMap as Map;

    #[test]
    fn ghz_graph_is_four_isolated_self_loops() {
        let g = build_ghz();
        let h = build_connection_graph(&g).unwrap();
        assert_eq!(h.vertex_count(), 4);
        assert_eq!(h.component_count(), 4);
        assert_eq!(h.edges().count(), 0);
        for i in 0..4 {
            assert_eq!(h.weight(i, i), rat(1, 4));
        }
        assert_eq!(*h.rho_min(), rat(1, 4));
        assert!(check_graph_invariants(&g, &h).is_empty());
    }

    #[test]
    fn free_uniform_closed_form_weights() {
        for (k, d) in [(2usize, 2usize), (3, 2), (2, 3)] {
            let g = build_free_uniform(k, d).unwrap();
            let h = build_connection_graph(&g).unwrap();
            let dk1 = rat_int((d as i64).pow(k as u32 + 1));
            let diag = rat_one() / dk1.clone();
            let off = rat_one() / (dk1 * rat_int(k as i64));
            for i in 0..h.vertex_count() {
                assert_eq!(h.weight(i, i), diag);
            }
            for (i, j, w) in h.edges() {
                let diff = h.vertices()[i]
                    .iter()
                    .zip(&h.vertices()[j])
                    .filter(|(a, b)| a != b)
                    .count();
                assert_eq!(diff, 1);
                assert_eq!(*w, off);
            }
            // every Hamming-1 pair present
            let expected_edges = h.vertex_count() * k * (d - 1) / 2;
            assert_eq!(h.edges().count(), expected_edges);
            assert_eq!(h.component_count(), 1);
            assert!(check_graph_invariants(&g, &h).is_empty());
        }
    }

    #[test]
    fn free_uniform_rho_min() {
        let g = build_free_uniform(2, 2).unwrap();
        let h = build_connection_graph(&g).unwrap();
        assert_eq!(*h.rho_min(), rat(1, 16));
    }

    #[test]
    fn single_tuple_game_is_one_component() {
        let mut dist = Map::new();
        dist.insert(vec![0, 0], rat_one());
        let g = crate::game::Game::new(
            vec![vec!["q".into()]; 2],
            vec![vec!["0".into(), "1".into()]; 2],
            dist,
            Predicate::AlwaysAccept,
        )
        .unwrap();
        let h = build_connection_graph(&g).unwrap();
        assert_eq!(h.component_count(), 1);
        assert_eq!(h.weight(0, 0), rat_one());
    }

    #[test]
    fn uniform_support_rho_min_bound() {
        // mu uniform over a set S: rho_min >= 1/(k |S|^2)
        let g = build_ghz();
        let h = build_connection_graph(&g).unwrap();
        let s = g.support_len() as i64;
        assert!(*h.rho_min() >= rat(1, 3 * s * s));
    }

    /// Independent view: the joint law of the two-step process (draw x, pick
    /// a player uniformly, redraw that player's question conditioned on the
    /// rest) must reproduce rho exactly.
    #[test]
    fn random_process_oracle_matches_rho() {
        for game in [
            build_ghz(),
            build_free_uniform(2, 3).unwrap(),
            build_free_uniform(3, 2).unwrap(),
        ] {
            let h = build_connection_graph(&game).unwrap();
            let k = game.players();
            let n = h.vertex_count();
            let mut process: Map<(usize, usize), Rat> = Map::new();
            for (i, x) in h.vertices().iter().enumerate() {
                for t in 0..k {
                    // marginal of x^{-t}
                    let mut marginal = Rat::zero();
                    for y in game.support() {
                        if (0..k).all(|u| u == t || y[u] == x[u]) {
                            marginal += game.probability(y);
                        }
                    }
                    for (j, y) in h.vertices().iter().enumerate() {
                        if (0..k).all(|u| u == t || y[u] == x[u]) {
                            let w = game.probability(x) * game.probability(y)
                                / (&marginal * rat_int(k as i64));
                            *process.entry((i, j)).or_insert_with(Rat::zero) += w;
                        }
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let expect = process.get(&(i, j)).cloned().unwrap_or_else(Rat::zero);
                    assert_eq!(h.weight(i, j), expect, "mismatch at ({i},{j})");
                }
            }
        }
    }

    /// Column sums equal the vertex weights (symmetry + row-sum identity).
    #[test]
    fn resampling_identity() {
        let g = build_free_uniform(2, 3).unwrap();
        let h = build_connection_graph(&g).unwrap();
        for j in 0..h.vertex_count() {
            let mut col = Rat::zero();
            for i in 0..h.vertex_count() {
                col += h.weight(i, j);
            }
            assert_eq!(col, g.probability(&h.vertices()[j]));
        }
    }
}
