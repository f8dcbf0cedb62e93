//! Canonical representation of k-player one-round games.
//!
//! A game is a question distribution over k-tuples plus an acceptance
//! predicate. Probabilities are exact rationals, symbols are interned to
//! dense ids at construction, and values are immutable once built.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num::{Signed, Zero};
use thiserror::Error;

use crate::rat::{rat_one, Rat};

pub type SymId = u32;
/// One question per player, by interned id.
pub type QTuple = Vec<SymId>;
/// One answer per player, by interned id.
pub type ATuple = Vec<SymId>;

/// Reserved anchoring sentinel; game files may not use it.
pub const ANCHOR_SYMBOL: &str = "⊥";

/// Cap on materialized product alphabets for repeated games.
const MAX_PRODUCT_ALPHABET: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("invalid game: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("anchoring parameter must lie strictly between 0 and 1")]
    BadAlpha,
    #[error("alphabet already contains the reserved symbol {ANCHOR_SYMBOL}")]
    AlreadyAnchored,
    #[error("repetition count must be at least 1")]
    BadRepetition,
    #[error("free game requires k >= 2 and d >= 1")]
    BadFreeParams,
    #[error("product alphabet too large ({0} symbols)")]
    AlphabetTooLarge(usize),
}

/// A single validation failure with a location string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl Violation {
    fn new(location: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            location: location.into(),
            message: message.into(),
        }
    }
}

/// Acceptance predicate. Base games carry explicit tables or builtins;
/// transformed games evaluate lazily so repeated games never tabulate.
#[derive(Debug, Clone)]
pub enum Predicate {
    /// Explicit accept set over (questions, answers) id tuples.
    AcceptTable(BTreeSet<(QTuple, ATuple)>),
    /// Accepts everything; placeholder for free-game constructions.
    AlwaysAccept,
    /// x1 AND x2 AND x3 == a1 XOR a2 XOR a3 over binary ids.
    Ghz,
    /// Accepts whenever any coordinate equals the anchoring symbol,
    /// otherwise defers to the base predicate (ids are untouched because
    /// the anchor symbol is appended at the end of each alphabet).
    Anchored {
        bottom: Vec<SymId>,
        inner: Arc<Predicate>,
    },
    /// Per-coordinate conjunction of the base predicate, evaluated lazily
    /// on mixed-radix encoded question/answer vectors.
    Repeated { base: Arc<Game>, n: usize },
}

impl Predicate {
    pub fn accepts(&self, x: &[SymId], a: &[SymId]) -> bool {
        match self {
            Predicate::AcceptTable(set) => set.contains(&(x.to_vec(), a.to_vec())),
            Predicate::AlwaysAccept => true,
            Predicate::Ghz => {
                let conj = x[0] & x[1] & x[2] & 1;
                let xor = (a[0] ^ a[1] ^ a[2]) & 1;
                conj == xor
            }
            Predicate::Anchored { bottom, inner } => {
                if x.iter().zip(bottom).any(|(q, b)| q == b) {
                    true
                } else {
                    inner.accepts(x, a)
                }
            }
            Predicate::Repeated { base, n } => {
                let k = base.players();
                for i in 0..*n {
                    let mut xi = Vec::with_capacity(k);
                    let mut ai = Vec::with_capacity(k);
                    for t in 0..k {
                        xi.push(decode_component(
                            x[t],
                            base.question_alphabet(t).len(),
                            *n,
                            i,
                        ));
                        ai.push(decode_component(a[t], base.answer_alphabet(t).len(), *n, i));
                    }
                    if !base.predicate.accepts(&xi, &ai) {
                        return false;
                    }
                }
                true
            }
        }
    }
}

/// Big-endian mixed-radix encoding of a coordinate vector into one id.
pub fn encode_vec(ids: &[SymId], radix: usize) -> SymId {
    let mut v: u64 = 0;
    for &id in ids {
        v = v * radix as u64 + id as u64;
    }
    debug_assert!(v <= SymId::MAX as u64);
    v as SymId
}

/// Inverse of [`encode_vec`].
pub fn decode_vec(id: SymId, radix: usize, n: usize) -> Vec<SymId> {
    let mut out = vec![0; n];
    let mut v = id as u64;
    for i in (0..n).rev() {
        out[i] = (v % radix as u64) as SymId;
        v /= radix as u64;
    }
    out
}

fn decode_component(id: SymId, radix: usize, n: usize, i: usize) -> SymId {
    let mut v = id as u64;
    for _ in 0..(n - 1 - i) {
        v /= radix as u64;
    }
    (v % radix as u64) as SymId
}

/// A k-player one-round game with exact rational question distribution.
#[derive(Debug, Clone)]
pub struct Game {
    players: usize,
    question_alphabets: Vec<Vec<String>>,
    answer_alphabets: Vec<Vec<String>>,
    /// Positive-mass tuples only; zero-mass entries are dropped after
    /// validation so "support" always means strictly positive mass.
    distribution: BTreeMap<QTuple, Rat>,
    predicate: Predicate,
    anchor_ids: Option<Vec<SymId>>,
    anchor_alpha: Option<Rat>,
}

impl Game {
    pub fn new(
        question_alphabets: Vec<Vec<String>>,
        answer_alphabets: Vec<Vec<String>>,
        distribution: BTreeMap<QTuple, Rat>,
        predicate: Predicate,
    ) -> Result<Game, GameError> {
        let game = Game {
            players: question_alphabets.len(),
            question_alphabets,
            answer_alphabets,
            distribution,
            predicate,
            anchor_ids: None,
            anchor_alpha: None,
        };
        let violations = validate(&game);
        if !violations.is_empty() {
            return Err(GameError::Invalid(violations));
        }
        Ok(game.drop_zero_mass())
    }

    fn drop_zero_mass(mut self) -> Game {
        self.distribution.retain(|_, p| p.is_positive());
        self
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn question_alphabet(&self, t: usize) -> &[String] {
        &self.question_alphabets[t]
    }

    pub fn answer_alphabet(&self, t: usize) -> &[String] {
        &self.answer_alphabets[t]
    }

    pub fn question_alphabets(&self) -> &[Vec<String>] {
        &self.question_alphabets
    }

    pub fn answer_alphabets(&self) -> &[Vec<String>] {
        &self.answer_alphabets
    }

    /// Positive-mass question tuples with their exact probabilities.
    pub fn distribution(&self) -> &BTreeMap<QTuple, Rat> {
        &self.distribution
    }

    pub fn support(&self) -> impl Iterator<Item = &QTuple> {
        self.distribution.keys()
    }

    pub fn support_len(&self) -> usize {
        self.distribution.len()
    }

    pub fn probability(&self, x: &[SymId]) -> Rat {
        self.distribution.get(x).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn predicate(&self) -> &Predicate {
        &self.predicate
    }

    pub fn accepts(&self, x: &[SymId], a: &[SymId]) -> bool {
        self.predicate.accepts(x, a)
    }

    /// Ids of the anchoring symbol per player, for games built by [`anchor`].
    pub fn anchor_ids(&self) -> Option<&[SymId]> {
        self.anchor_ids.as_deref()
    }

    pub fn anchor_alpha(&self) -> Option<&Rat> {
        self.anchor_alpha.as_ref()
    }

    /// Question ids actually appearing for player `t` across the support.
    pub fn question_projection(&self, t: usize) -> BTreeSet<SymId> {
        self.distribution.keys().map(|x| x[t]).collect()
    }

    /// log2 of the total answer alphabet size (the product over players).
    pub fn total_answers_log2(&self) -> f64 {
        self.answer_alphabets
            .iter()
            .map(|a| (a.len() as f64).log2())
            .sum()
    }

    pub fn answer_combo_count(&self) -> usize {
        self.answer_alphabets
            .iter()
            .map(|a| a.len())
            .product::<usize>()
    }

    /// Exact test for a product question distribution.
    pub fn is_free(&self) -> bool {
        let k = self.players;
        let mut marginals: Vec<BTreeMap<SymId, Rat>> = vec![BTreeMap::new(); k];
        for (x, p) in &self.distribution {
            for t in 0..k {
                *marginals[t].entry(x[t]).or_insert_with(Rat::zero) += p.clone();
            }
        }
        for (x, p) in &self.distribution {
            let mut prod = rat_one();
            for t in 0..k {
                prod *= marginals[t][&x[t]].clone();
            }
            if prod != *p {
                return false;
            }
        }
        // Product of support projections must exactly equal the support.
        let expected: usize = marginals.iter().map(|m| m.len()).product();
        expected == self.distribution.len()
    }

    /// Structural equivalence: same shape, same distribution, and the same
    /// predicate behaviour across the support times all answer tuples.
    pub fn semantically_eq(&self, other: &Game) -> bool {
        if self.players != other.players
            || self.question_alphabets != other.question_alphabets
            || self.answer_alphabets != other.answer_alphabets
            || self.distribution != other.distribution
        {
            return false;
        }
        let combos = self.answer_combo_count();
        for x in self.support() {
            for c in 0..combos {
                let a = self.decode_answer_combo(c);
                if self.accepts(x, &a) != other.accepts(x, &a) {
                    return false;
                }
            }
        }
        true
    }

    /// Mixed-radix decode of a flat answer-combo index (player-major).
    pub fn decode_answer_combo(&self, mut c: usize) -> ATuple {
        let k = self.players;
        let mut a = vec![0; k];
        for t in (0..k).rev() {
            let sz = self.answer_alphabets[t].len();
            a[t] = (c % sz) as SymId;
            c /= sz;
        }
        a
    }

    /// Replaces the predicate, e.g. to give a free game a real acceptance rule.
    pub fn with_predicate(mut self, predicate: Predicate) -> Result<Game, GameError> {
        self.predicate = predicate;
        let violations = validate(&self);
        if !violations.is_empty() {
            return Err(GameError::Invalid(violations));
        }
        Ok(self)
    }

    pub fn with_answer_alphabets(
        mut self,
        answer_alphabets: Vec<Vec<String>>,
    ) -> Result<Game, GameError> {
        self.answer_alphabets = answer_alphabets;
        let violations = validate(&self);
        if !violations.is_empty() {
            return Err(GameError::Invalid(violations));
        }
        Ok(self)
    }
}

/// Checks every Game invariant; empty result means the game is well formed.
pub fn validate(game: &Game) -> Vec<Violation> {
    let mut out = Vec::new();
    let k = game.players;
    if k == 0 {
        out.push(Violation::new("players", "game must have at least 1 player"));
        return out;
    }
    if game.answer_alphabets.len() != k {
        out.push(Violation::new(
            "answer_alphabets",
            format!(
                "expected {k} answer alphabets, found {}",
                game.answer_alphabets.len()
            ),
        ));
    }
    for (t, alpha) in game
        .question_alphabets
        .iter()
        .chain(game.answer_alphabets.iter())
        .enumerate()
    {
        if alpha.is_empty() {
            out.push(Violation::new(format!("alphabet[{t}]"), "empty alphabet"));
        }
        let mut seen = BTreeSet::new();
        for s in alpha {
            if !seen.insert(s) {
                out.push(Violation::new(
                    format!("alphabet[{t}]"),
                    format!("duplicate symbol {s:?}"),
                ));
            }
        }
    }
    let mut total = Rat::zero();
    for (idx, (x, p)) in game.distribution.iter().enumerate() {
        let loc = format!("distribution[{idx}]");
        if x.len() != k {
            out.push(Violation::new(
                &loc,
                format!("arity mismatch: tuple has {} entries for k={k}", x.len()),
            ));
            continue;
        }
        for (t, &id) in x.iter().enumerate() {
            if (id as usize) >= game.question_alphabets[t].len() {
                out.push(Violation::new(
                    &loc,
                    format!("question id {id} out of range for player {}", t + 1),
                ));
            }
        }
        if p.is_negative() {
            out.push(Violation::new(&loc, "negative probability"));
        }
        total += p.clone();
    }
    if total != rat_one() {
        out.push(Violation::new(
            "distribution",
            format!("sum != 1 (got {})", total),
        ));
    }
    // Predicate well-formedness: builtins constrain the shape; tables must
    // reference valid ids. Lazy predicates are defined by construction.
    match &game.predicate {
        Predicate::Ghz => {
            if k != 3 {
                out.push(Violation::new("predicate", "ghz builtin requires k=3"));
            }
            for t in 0..k.min(game.question_alphabets.len()) {
                if game.question_alphabets[t].len() != 2
                    || game.answer_alphabets.get(t).map(|a| a.len()) != Some(2)
                {
                    out.push(Violation::new(
                        "predicate",
                        "ghz builtin requires binary alphabets",
                    ));
                    break;
                }
            }
        }
        Predicate::AcceptTable(set) => {
            for (x, a) in set {
                if x.len() != k || a.len() != k {
                    out.push(Violation::new("predicate", "accept entry arity mismatch"));
                    continue;
                }
                for t in 0..k {
                    if (x[t] as usize) >= game.question_alphabets[t].len()
                        || (a[t] as usize) >= game.answer_alphabets[t].len()
                    {
                        out.push(Violation::new(
                            "predicate",
                            "accept entry references an id out of range",
                        ));
                    }
                }
            }
        }
        _ => {}
    }
    out
}

/// The three-player GHZ game: questions uniform on the odd-weight triples,
/// accept iff the AND of the questions equals the XOR of the answers.
pub fn build_ghz() -> Game {
    let bin = || vec!["0".to_string(), "1".to_string()];
    let mut dist = BTreeMap::new();
    for x in [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]] {
        dist.insert(x.to_vec(), Rat::new(1.into(), 4.into()));
    }
    Game::new(
        vec![bin(), bin(), bin()],
        vec![bin(), bin(), bin()],
        dist,
        Predicate::Ghz,
    )
    .expect("ghz generator must produce a valid game")
}

/// Uniform free game on `[d]^k` with an always-accept placeholder predicate
/// and binary answer alphabets; callers swap in a real predicate as needed.
pub fn build_free_uniform(k: usize, d: usize) -> Result<Game, GameError> {
    if k < 2 || d < 1 {
        return Err(GameError::BadFreeParams);
    }
    let qalpha: Vec<String> = (1..=d).map(|i| i.to_string()).collect();
    let bin = vec!["0".to_string(), "1".to_string()];
    let total = (d as i64).pow(k as u32);
    let p = Rat::new(1.into(), total.into());
    let mut dist = BTreeMap::new();
    let mut x = vec![0 as SymId; k];
    loop {
        dist.insert(x.clone(), p.clone());
        // odometer over [d]^k
        let mut t = k;
        loop {
            if t == 0 {
                break;
            }
            t -= 1;
            x[t] += 1;
            if (x[t] as usize) < d {
                break;
            }
            x[t] = 0;
        }
        if x.iter().all(|&v| v == 0) {
            break;
        }
    }
    Game::new(
        vec![qalpha; k],
        vec![bin; k],
        dist,
        Predicate::AlwaysAccept,
    )
}

/// Anchoring transform: each question is independently replaced by the
/// reserved symbol with probability `alpha`, and any tuple containing the
/// symbol is accepted outright.
pub fn anchor(game: &Game, alpha: &Rat) -> Result<Game, GameError> {
    if !alpha.is_positive() || *alpha >= rat_one() {
        return Err(GameError::BadAlpha);
    }
    for alpha_t in &game.question_alphabets {
        if alpha_t.iter().any(|s| s == ANCHOR_SYMBOL) {
            return Err(GameError::AlreadyAnchored);
        }
    }
    let k = game.players;
    let mut question_alphabets = game.question_alphabets.clone();
    let mut bottom = Vec::with_capacity(k);
    for qa in question_alphabets.iter_mut() {
        bottom.push(qa.len() as SymId);
        qa.push(ANCHOR_SYMBOL.to_string());
    }
    let keep = rat_one() - alpha.clone();
    let mut dist: BTreeMap<QTuple, Rat> = BTreeMap::new();
    for (x, p) in &game.distribution {
        for pattern in 0..(1u32 << k) {
            let mut xa = x.clone();
            let mut factor = p.clone();
            for t in 0..k {
                if pattern >> t & 1 == 1 {
                    xa[t] = bottom[t];
                    factor *= alpha.clone();
                } else {
                    factor *= keep.clone();
                }
            }
            *dist.entry(xa).or_insert_with(Rat::zero) += factor;
        }
    }
    let predicate = Predicate::Anchored {
        bottom: bottom.clone(),
        inner: Arc::new(game.predicate.clone()),
    };
    let mut out = Game::new(
        question_alphabets,
        game.answer_alphabets.clone(),
        dist,
        predicate,
    )?;
    out.anchor_ids = Some(bottom);
    out.anchor_alpha = Some(alpha.clone());
    Ok(out)
}

/// n-fold parallel repetition. Question/answer alphabets become per-player
/// products (mixed-radix interning), the distribution is the product measure
/// over the support, and the predicate stays a lazy conjunction.
pub fn repeat(game: &Game, n: usize) -> Result<Game, GameError> {
    if n == 0 {
        return Err(GameError::BadRepetition);
    }
    if n == 1 {
        return Ok(game.clone());
    }
    let k = game.players;
    let product_alphabet = |alpha: &[String]| -> Result<Vec<String>, GameError> {
        let size = alpha.len().checked_pow(n as u32).unwrap_or(usize::MAX);
        if size > MAX_PRODUCT_ALPHABET {
            return Err(GameError::AlphabetTooLarge(size));
        }
        let mut names = Vec::with_capacity(size);
        let mut idx = vec![0usize; n];
        loop {
            names.push(
                idx.iter()
                    .map(|&i| alpha[i].as_str())
                    .collect::<Vec<_>>()
                    .join(","),
            );
            let mut t = n;
            loop {
                if t == 0 {
                    break;
                }
                t -= 1;
                idx[t] += 1;
                if idx[t] < alpha.len() {
                    break;
                }
                idx[t] = 0;
            }
            if idx.iter().all(|&v| v == 0) {
                break;
            }
        }
        Ok(names)
    };
    let mut question_alphabets = Vec::with_capacity(k);
    let mut answer_alphabets = Vec::with_capacity(k);
    for t in 0..k {
        question_alphabets.push(product_alphabet(&game.question_alphabets[t])?);
        answer_alphabets.push(product_alphabet(&game.answer_alphabets[t])?);
    }
    let supp: Vec<(&QTuple, &Rat)> = game.distribution.iter().collect();
    let mut dist = BTreeMap::new();
    let mut pick = vec![0usize; n];
    loop {
        let mut tuple = Vec::with_capacity(k);
        for t in 0..k {
            let coords: Vec<SymId> = pick.iter().map(|&c| supp[c].0[t]).collect();
            tuple.push(encode_vec(&coords, game.question_alphabets[t].len()));
        }
        let mut p = rat_one();
        for &c in &pick {
            p *= supp[c].1.clone();
        }
        dist.insert(tuple, p);
        let mut t = n;
        loop {
            if t == 0 {
                break;
            }
            t -= 1;
            pick[t] += 1;
            if pick[t] < supp.len() {
                break;
            }
            pick[t] = 0;
        }
        if pick.iter().all(|&v| v == 0) {
            break;
        }
    }
    let predicate = Predicate::Repeated {
        base: Arc::new(game.clone()),
        n,
    };
    Game::new(question_alphabets, answer_alphabets, dist, predicate)
}

/// One deterministic answer table per player, on the game's interned ids.
/// Tables are total on the question ids that appear in the support.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Strategy {
    tables: Vec<BTreeMap<SymId, SymId>>,
}

impl Strategy {
    pub fn new(tables: Vec<BTreeMap<SymId, SymId>>) -> Strategy {
        Strategy { tables }
    }

    pub fn tables(&self) -> &[BTreeMap<SymId, SymId>] {
        &self.tables
    }

    pub fn answer(&self, player: usize, question: SymId) -> Option<SymId> {
        self.tables.get(player)?.get(&question).copied()
    }

    /// Every player answers with a fixed id regardless of the question.
    pub fn constant(game: &Game, answers: &[SymId]) -> Strategy {
        let tables = (0..game.players())
            .map(|t| {
                game.question_projection(t)
                    .into_iter()
                    .map(|q| (q, answers[t]))
                    .collect()
            })
            .collect();
        Strategy { tables }
    }

    /// Lifts a base-game strategy to `repeat(base, n)` by independent
    /// per-coordinate play.
    pub fn coordinatewise(base_game: &Game, base: &Strategy, n: usize) -> Strategy {
        let k = base_game.players();
        let mut tables = Vec::with_capacity(k);
        for t in 0..k {
            let qn = base_game.question_alphabet(t).len();
            let an = base_game.answer_alphabet(t).len();
            let proj: Vec<SymId> = base_game.question_projection(t).into_iter().collect();
            let mut table = BTreeMap::new();
            let mut idx = vec![0usize; n];
            loop {
                let qvec: Vec<SymId> = idx.iter().map(|&i| proj[i]).collect();
                let avec: Vec<SymId> = qvec
                    .iter()
                    .map(|&q| base.answer(t, q).expect("base strategy must be total"))
                    .collect();
                table.insert(encode_vec(&qvec, qn), encode_vec(&avec, an));
                let mut d = n;
                loop {
                    if d == 0 {
                        break;
                    }
                    d -= 1;
                    idx[d] += 1;
                    if idx[d] < proj.len() {
                        break;
                    }
                    idx[d] = 0;
                }
                if idx.iter().all(|&v| v == 0) {
                    break;
                }
            }
            tables.push(table);
        }
        Strategy { tables }
    }

    /// A deterministic cross-coordinate strategy for `repeat(base, n)`:
    /// the answer in coordinate `i` is the base answer shifted by the
    /// question of coordinate `i+1 (mod n)`. Couples adjacent coordinates,
    /// which makes the dependency-breaking conditionals genuinely depend on
    /// the conditioned question.
    pub fn cyclic_coupled(base_game: &Game, base: &Strategy, n: usize) -> Strategy {
        let k = base_game.players();
        let mut tables = Vec::with_capacity(k);
        for t in 0..k {
            let qn = base_game.question_alphabet(t).len();
            let an = base_game.answer_alphabet(t).len();
            let proj: Vec<SymId> = base_game.question_projection(t).into_iter().collect();
            let mut table = BTreeMap::new();
            let mut idx = vec![0usize; n];
            loop {
                let qvec: Vec<SymId> = idx.iter().map(|&i| proj[i]).collect();
                let avec: Vec<SymId> = (0..n)
                    .map(|i| {
                        let h = base
                            .answer(t, qvec[i])
                            .expect("base strategy must be total");
                        (h + qvec[(i + 1) % n]) % an as SymId
                    })
                    .collect();
                table.insert(encode_vec(&qvec, qn), encode_vec(&avec, an));
                let mut d = n;
                loop {
                    if d == 0 {
                        break;
                    }
                    d -= 1;
                    idx[d] += 1;
                    if idx[d] < proj.len() {
                        break;
                    }
                    idx[d] = 0;
                }
                if idx.iter().all(|&v| v == 0) {
                    break;
                }
            }
            tables.push(table);
        }
        Strategy { tables }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    #[test]
    fn ghz_is_valid_with_the_four_support_tuples() {
        let g = build_ghz();
        assert!(validate(&g).is_empty());
        let supp: Vec<QTuple> = g.support().cloned().collect();
        assert_eq!(
            supp,
            vec![
                vec![0, 0, 1],
                vec![0, 1, 0],
                vec![1, 0, 0],
                vec![1, 1, 1]
            ]
        );
        for x in g.support() {
            assert_eq!(g.probability(x), rat(1, 4));
        }
    }

    #[test]
    fn ghz_predicate_cases() {
        let g = build_ghz();
        // 0 AND 0 AND 1 = 0, 0 XOR 0 XOR 0 = 0: accept
        assert!(g.accepts(&[0, 0, 1], &[0, 0, 0]));
        // 1 AND 1 AND 1 = 1 != 0: reject
        assert!(!g.accepts(&[1, 1, 1], &[0, 0, 0]));
    }

    #[test]
    fn validate_flags_bad_probability_sum() {
        let g = build_ghz();
        let mut dist = g.distribution().clone();
        dist.insert(vec![0, 0, 1], rat(1, 3));
        let bad = Game {
            distribution: dist,
            ..g.clone()
        };
        let violations = validate(&bad);
        assert!(violations.iter().any(|v| v.message.contains("sum != 1")));
    }

    #[test]
    fn validate_flags_arity_mismatch() {
        let g = build_ghz();
        let mut dist = g.distribution().clone();
        dist.remove(&vec![0, 0, 1]);
        dist.insert(vec![0, 0, 1, 0], rat(1, 4));
        let bad = Game {
            distribution: dist,
            ..g.clone()
        };
        let violations = validate(&bad);
        assert!(violations
            .iter()
            .any(|v| v.message.contains("arity mismatch")));
    }

    #[test]
    fn free_uniform_support_sizes() {
        let g = build_free_uniform(3, 2).unwrap();
        assert_eq!(g.support_len(), 8);
        for x in g.support() {
            assert_eq!(g.probability(x), rat(1, 8));
        }
        let g = build_free_uniform(2, 3).unwrap();
        assert_eq!(g.support_len(), 9);
        for x in g.support() {
            assert_eq!(g.probability(x), rat(1, 9));
        }
        assert!(build_free_uniform(1, 2).is_err());
        assert!(build_free_uniform(2, 0).is_err());
    }

    #[test]
    fn free_uniform_player_marginal_is_uniform() {
        let g = build_free_uniform(2, 3).unwrap();
        let mut marginal: BTreeMap<SymId, Rat> = BTreeMap::new();
        for (x, p) in g.distribution() {
            *marginal.entry(x[0]).or_insert_with(Rat::zero) += p.clone();
        }
        for (_, p) in marginal {
            assert_eq!(p, rat(1, 3));
        }
        assert!(g.is_free());
        assert!(!build_ghz().is_free());
    }

    #[test]
    fn anchor_masses() {
        let g = build_ghz();
        let a = anchor(&g, &rat(1, 2)).unwrap();
        let bots = a.anchor_ids().unwrap().to_vec();
        // all-bottom tuple has mass alpha^k
        let all_bot: QTuple = bots.clone();
        assert_eq!(a.probability(&all_bot), rat(1, 8));
        // (bot, 0, 0): only base tuple (1,0,0) is compatible
        assert_eq!(a.probability(&[bots[0], 0, 0]), rat(1, 32));
        // total mass still 1
        let total: Rat = a.distribution().values().cloned().sum();
        assert_eq!(total, rat(1, 1));
        // every bottom-containing tuple accepts regardless of the answers
        for x in a.support() {
            if x.iter().zip(&bots).any(|(q, b)| q == b) {
                for c in 0..a.answer_combo_count() {
                    let ans = a.decode_answer_combo(c);
                    assert!(a.accepts(x, &ans));
                }
            }
        }
        assert!(anchor(&g, &rat(1, 1)).is_err());
        assert!(anchor(&g, &rat(0, 1)).is_err());
        assert!(anchor(&a, &rat(1, 2)).is_err());
    }

    #[test]
    fn repeat_structure() {
        let g = build_ghz();
        let r1 = repeat(&g, 1).unwrap();
        assert!(r1.semantically_eq(&g));
        let r2 = repeat(&g, 2).unwrap();
        assert_eq!(r2.support_len(), 16);
        for x in r2.support() {
            assert_eq!(r2.probability(x), rat(1, 16));
        }
        assert!(repeat(&g, 0).is_err());
    }

    #[test]
    fn repeated_predicate_is_a_conjunction() {
        let g = build_ghz();
        let r2 = repeat(&g, 2).unwrap();
        // coordinate 1 = (1,0,0) with answers (0,0,0): win.
        // coordinate 2 = (1,1,1) with answers (0,0,0): lose. Conjunction rejects.
        let x: QTuple = (0..3)
            .map(|t| encode_vec(&[[1, 0, 0][t], [1, 1, 1][t]], 2))
            .collect();
        let a: ATuple = vec![0, 0, 0];
        assert!(!r2.accepts(&x, &a));
        // losing coordinate fixed: all-zero answers win both coordinates.
        let x: QTuple = (0..3)
            .map(|t| encode_vec(&[[1, 0, 0][t], [0, 0, 1][t]], 2))
            .collect();
        assert!(r2.accepts(&x, &a));
    }

    #[test]
    fn encode_decode_roundtrip() {
        for radix in 2..5usize {
            for n in 1..4usize {
                let mut v = vec![0 as SymId; n];
                loop {
                    let e = encode_vec(&v, radix);
                    assert_eq!(decode_vec(e, radix, n), v);
                    for (i, &c) in v.iter().enumerate() {
                        assert_eq!(decode_component(e, radix, n, i), c);
                    }
                    let mut t = n;
                    loop {
                        if t == 0 {
                            break;
                        }
                        t -= 1;
                        v[t] += 1;
                        if (v[t] as usize) < radix {
                            break;
                        }
                        v[t] = 0;
                    }
                    if v.iter().all(|&x| x == 0) {
                        break;
                    }
                }
            }
        }
    }
}
