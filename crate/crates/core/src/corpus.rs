//! Seeded random game generators for tests and acceptance runs.

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::game::{Game, Predicate, QTuple};
use crate::rat::Rat;

#[derive(Debug, Clone)]
pub struct CorpusParams {
    pub players: usize,
    /// Question alphabet size per player.
    pub questions: usize,
    /// Answer alphabet size per player.
    pub answers: usize,
    /// Number of support tuples to draw (deduplicated, so the result may be
    /// smaller).
    pub support: usize,
    /// Probability numerators are drawn from 1..=max_weight.
    pub max_weight: u32,
    /// Chance that a (questions, answers) pair is accepted.
    pub accept_density: f64,
}

/// A random game with exact rational probabilities and an explicit accept
/// table, fully determined by the seed.
pub fn random_game(params: &CorpusParams, seed: u64) -> Game {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = params.players;
    let qalpha: Vec<Vec<String>> = (0..k)
        .map(|_| (0..params.questions).map(|i| format!("q{i}")).collect())
        .collect();
    let aalpha: Vec<Vec<String>> = (0..k)
        .map(|_| (0..params.answers).map(|i| format!("a{i}")).collect())
        .collect();
    let mut tuples: BTreeSet<QTuple> = BTreeSet::new();
    while tuples.len() < params.support {
        let x: QTuple = (0..k)
            .map(|_| rng.gen_range(0..params.questions) as u32)
            .collect();
        tuples.insert(x);
        if tuples.len() >= params.questions.pow(k as u32) {
            break;
        }
    }
    let weights: Vec<u32> = (0..tuples.len())
        .map(|_| rng.gen_range(1..=params.max_weight))
        .collect();
    let total: i64 = weights.iter().map(|&w| w as i64).sum();
    let mut dist = BTreeMap::new();
    for (x, w) in tuples.iter().zip(&weights) {
        dist.insert(x.clone(), Rat::new((*w as i64).into(), total.into()));
    }
    let combos = params.answers.pow(k as u32);
    let mut accepts = BTreeSet::new();
    for x in &tuples {
        for c in 0..combos {
            if rng.gen_bool(params.accept_density) {
                let mut a = vec![0u32; k];
                let mut cc = c;
                for t in (0..k).rev() {
                    a[t] = (cc % params.answers) as u32;
                    cc /= params.answers;
                }
                accepts.insert((x.clone(), a));
            }
        }
    }
    Game::new(qalpha, aalpha, dist, Predicate::AcceptTable(accepts))
        .expect("random generator must produce valid games")
}

/// Games sized for structural checks: k in {2,3}, support up to 32 tuples.
pub fn graph_corpus(count: usize, seed: u64) -> Vec<Game> {
    (0..count)
        .map(|i| {
            let k = 2 + (i % 2);
            let params = CorpusParams {
                players: k,
                questions: 3 + (i % 3),
                answers: 2,
                support: 4 + (i % 29),
                max_weight: 12,
                accept_density: 0.5,
            };
            random_game(&params, seed.wrapping_add(i as u64))
        })
        .collect()
}

/// Tiny games whose 2-fold repetitions stay inside the search budget, for
/// the exact value-law checks.
pub fn value_corpus(count: usize, seed: u64) -> Vec<Game> {
    (0..count)
        .map(|i| {
            let k = 2 + (i % 2);
            let params = CorpusParams {
                players: k,
                questions: 2,
                answers: 2,
                support: 3 + (i % 2),
                max_weight: 6,
                accept_density: 0.55,
            };
            random_game(&params, seed.wrapping_add(0x5eed + i as u64))
        })
        .collect()
}

/// Random base games for the anchoring certificates.
pub fn anchor_bases(count: usize, seed: u64) -> Vec<Game> {
    (0..count)
        .map(|i| {
            let k = 2 + (i % 2);
            let params = CorpusParams {
                players: k,
                questions: 2 + (i % 2),
                answers: 2,
                support: 3 + (i % 5),
                max_weight: 8,
                accept_density: 0.5,
            };
            random_game(&params, seed.wrapping_add(0xa2c4 + i as u64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::validate;
    use crate::rat::rat_one;

    #[test]
    fn generated_games_are_valid_and_deterministic() {
        for g in graph_corpus(20, 7) {
            assert!(validate(&g).is_empty());
            let total: Rat = g.distribution().values().cloned().sum();
            assert_eq!(total, rat_one());
        }
        let a = random_game(
            &CorpusParams {
                players: 3,
                questions: 3,
                answers: 2,
                support: 10,
                max_weight: 12,
                accept_density: 0.5,
            },
            42,
        );
        let b = random_game(
            &CorpusParams {
                players: 3,
                questions: 3,
                answers: 2,
                support: 10,
                max_weight: 12,
                accept_density: 0.5,
            },
            42,
        );
        assert!(a.semantically_eq(&b));
    }
}
