//! Canonical path systems and the congestion lower bound on expansion.
//!
//! A path set carries one simple path per ordered vertex pair. Its
//! congestion is the worst edge's load-to-capacity ratio, where the load
//! sums rho(x) rho(y) |p_xy| over paths through the edge. The reciprocal
//! certifies a lower bound on the second Laplacian eigenvalue.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::game::{Game, QTuple};
use crate::graph::ConnectionGraph;
use crate::rat::Rat;
use num::Zero;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("game is not anchored (no reserved anchoring symbol)")]
    NotAnchored,
    #[error("path endpoint or intermediate vertex missing from the graph: {0:?}")]
    MissingVertex(QTuple),
    #[error("path from {from} to {to} traverses a zero-weight edge ({a},{b})")]
    ZeroWeightEdge {
        from: usize,
        to: usize,
        a: usize,
        b: usize,
    },
    #[error("path from {from} to {to} is not simple")]
    NotSimple { from: usize, to: usize },
    #[error("path set misses the ordered pair ({0},{1})")]
    MissingPair(usize, usize),
    #[error("path from {from} to {to} has wrong endpoints")]
    BadEndpoints { from: usize, to: usize },
}

/// One simple path per ordered vertex pair, stored as vertex index
/// sequences including both endpoints. Identical pairs have the implicit
/// empty path.
#[derive(Debug, Clone)]
pub struct CanonicalPathSet {
    paths: BTreeMap<(usize, usize), Vec<usize>>,
}

impl CanonicalPathSet {
    pub fn new(paths: BTreeMap<(usize, usize), Vec<usize>>) -> CanonicalPathSet {
        CanonicalPathSet { paths }
    }

    /// Vertex sequence from x to y; empty when x == y.
    pub fn path(&self, x: usize, y: usize) -> &[usize] {
        if x == y {
            &[]
        } else {
            self.paths
                .get(&(x, y))
                .map(|p| p.as_slice())
                .unwrap_or(&[])
        }
    }

    /// Edge count of the (x, y) path.
    pub fn len(&self, x: usize, y: usize) -> usize {
        self.path(x, y).len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn ordered_pairs(&self) -> impl Iterator<Item = (&(usize, usize), &Vec<usize>)> {
        self.paths.iter()
    }

    pub fn max_len(&self) -> usize {
        self.paths
            .values()
            .map(|p| p.len().saturating_sub(1))
            .max()
            .unwrap_or(0)
    }
}

/// Structural validity: every ordered pair present, endpoints match, paths
/// simple, consecutive vertices joined by positive weight, and the reverse
/// pair is the reversed path.
pub fn validate_paths(graph: &ConnectionGraph, paths: &CanonicalPathSet) -> Result<(), PathError> {
    let n = graph.vertex_count();
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            let p = paths
                .paths
                .get(&(x, y))
                .ok_or(PathError::MissingPair(x, y))?;
            if p.first() != Some(&x) || p.last() != Some(&y) {
                return Err(PathError::BadEndpoints { from: x, to: y });
            }
            let mut seen = std::collections::BTreeSet::new();
            for &v in p {
                if !seen.insert(v) {
                    return Err(PathError::NotSimple { from: x, to: y });
                }
            }
            for w in p.windows(2) {
                if !graph.weight(w[0], w[1]).is_positive() {
                    return Err(PathError::ZeroWeightEdge {
                        from: x,
                        to: y,
                        a: w[0],
                        b: w[1],
                    });
                }
            }
            let rev = paths
                .paths
                .get(&(y, x))
                .ok_or(PathError::MissingPair(y, x))?;
            let mut r = p.clone();
            r.reverse();
            if *rev != r {
                return Err(PathError::BadEndpoints { from: y, to: x });
            }
        }
    }
    Ok(())
}

use num::Signed;

/// Exact congestion of a path set: max over edges of
/// (1/rho(e)) sum over paths through e of rho(x) rho(y) |p_xy|.
pub fn congestion(graph: &ConnectionGraph, paths: &CanonicalPathSet) -> Result<Rat, PathError> {
    let mut load: BTreeMap<(usize, usize), Rat> = BTreeMap::new();
    for (&(x, y), p) in paths.ordered_pairs() {
        if p.len() < 2 {
            continue;
        }
        let length = Rat::from_integer(((p.len() - 1) as i64).into());
        let contribution = graph.vertex_weight(x) * graph.vertex_weight(y) * &length;
        for w in p.windows(2) {
            let key = (w[0].min(w[1]), w[0].max(w[1]));
            if !graph.weight(key.0, key.1).is_positive() {
                return Err(PathError::ZeroWeightEdge {
                    from: x,
                    to: y,
                    a: key.0,
                    b: key.1,
                });
            }
            *load.entry(key).or_insert_with(Rat::zero) += contribution.clone();
        }
    }
    let mut zeta = Rat::zero();
    for ((a, b), l) in load {
        let ratio = l / graph.weight(a, b);
        if ratio > zeta {
            zeta = ratio;
        }
    }
    Ok(zeta)
}

/// The anchored-game path system: walk from x to y by lowering every
/// differing coordinate to the anchoring symbol in ascending index order,
/// then raising them to y's values in descending order. Path lengths never
/// exceed 2k, and every intermediate tuple stays inside the support.
pub fn anchored_canonical_paths(
    game: &Game,
    graph: &ConnectionGraph,
) -> Result<CanonicalPathSet, PathError> {
    let bottoms = game.anchor_ids().ok_or(PathError::NotAnchored)?;
    let n = graph.vertex_count();
    let mut paths = BTreeMap::new();
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            let xv = &graph.vertices()[x];
            let yv = &graph.vertices()[y];
            let delta: Vec<usize> = (0..game.players()).filter(|&t| xv[t] != yv[t]).collect();
            let mut seq = vec![x];
            let mut cur = xv.clone();
            for &t in &delta {
                if cur[t] != bottoms[t] {
                    cur[t] = bottoms[t];
                    let idx = graph
                        .vertex_index(&cur)
                        .ok_or_else(|| PathError::MissingVertex(cur.clone()))?;
                    seq.push(idx);
                }
            }
            for &t in delta.iter().rev() {
                if yv[t] != bottoms[t] {
                    cur[t] = yv[t];
                    let idx = graph
                        .vertex_index(&cur)
                        .ok_or_else(|| PathError::MissingVertex(cur.clone()))?;
                    seq.push(idx);
                }
            }
            debug_assert_eq!(*seq.last().unwrap(), y);
            paths.insert((x, y), seq);
        }
    }
    Ok(CanonicalPathSet { paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{anchor, build_ghz, Game, Predicate};
    use crate::graph::build_connection_graph;
    use crate::rat::{rat, rat_to_f64};
    use crate::spectral::{lambda2, normalized_laplacian};
    use std::collections::BTreeMap as Map;

    #[test]
    fn two_vertex_congestion_closed_form() {
        // a 2-player game whose connection graph is a single edge plus loops
        let mut dist = Map::new();
        dist.insert(vec![0, 0], rat(1, 2));
        dist.insert(vec![1, 0], rat(1, 2));
        let g = Game::new(
            vec![
                vec!["a".into(), "b".into()],
                vec!["c".into()],
            ],
            vec![vec!["0".into(), "1".into()]; 2],
            dist,
            Predicate::AlwaysAccept,
        )
        .unwrap();
        let h = build_connection_graph(&g).unwrap();
        assert_eq!(h.vertex_count(), 2);
        let mut paths = Map::new();
        paths.insert((0, 1), vec![0, 1]);
        paths.insert((1, 0), vec![1, 0]);
        let ps = CanonicalPathSet::new(paths);
        validate_paths(&h, &ps).unwrap();
        let zeta = congestion(&h, &ps).unwrap();
        // both ordered pairs load the single edge with length-1 paths
        let expect =
            rat(2, 1) * h.vertex_weight(0) * h.vertex_weight(1) / h.weight(0, 1);
        assert_eq!(zeta, expect);
    }

    #[test]
    fn anchored_path_shapes() {
        let g = build_ghz();
        let a = anchor(&g, &rat(1, 2)).unwrap();
        let h = build_connection_graph(&a).unwrap();
        let paths = anchored_canonical_paths(&a, &h).unwrap();
        validate_paths(&h, &paths).unwrap();
        assert!(paths.max_len() <= 2 * a.players());
        // x == y has the empty path
        assert!(paths.path(0, 0).is_empty());
        // tuples differing in one coordinate walk down to the anchor and up
        let bots = a.anchor_ids().unwrap();
        let x = h.vertex_index(&[0, 0, 1]).unwrap();
        let y = h.vertex_index(&[0, 0, bots[2]]).unwrap();
        assert_eq!(paths.len(x, y), 1);
        let z = h.vertex_index(&[0, 1, 0]).unwrap();
        // (0,0,1) -> (0,1,0): differ at coordinates 2 and 3
        let p = paths.path(x, z);
        assert_eq!(p.first(), Some(&x));
        assert_eq!(p.last(), Some(&z));
        assert!(p.len() - 1 <= 4);
    }

    #[test]
    fn anchored_congestion_certifies_lambda() {
        let g = build_ghz();
        for (num, den) in [(1i64, 10i64), (1, 4), (2, 5)] {
            let alpha = rat(num, den);
            let a = anchor(&g, &alpha).unwrap();
            let h = build_connection_graph(&a).unwrap();
            let paths = anchored_canonical_paths(&a, &h).unwrap();
            let zeta = congestion(&h, &paths).unwrap();
            let k = a.players() as i64;
            // zeta <= 8k / alpha^k
            let cap = rat(8 * k, 1) / (&alpha * &alpha * &alpha);
            assert!(zeta <= cap, "zeta {zeta} vs cap {cap} at alpha {alpha}");
            let l = normalized_laplacian(&h);
            let l2 = lambda2(&l).unwrap();
            assert!(l2.value >= 1.0 / rat_to_f64(&zeta) - 1e-8);
            // Lemma-style closed form lower bound for alpha < 1/2
            let alpha_f = rat_to_f64(&alpha);
            assert!(l2.value >= alpha_f.powi(3) / (8.0 * 3.0) - 1e-8);
        }
    }
}
