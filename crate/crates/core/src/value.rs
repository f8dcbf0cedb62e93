//! Exact computation of game values by exhaustive strategy enumeration.
//!
//! Two methods: plain exhaustive search over all deterministic strategies,
//! and a best-response reduction that enumerates the first k-1 players and
//! derives the last player's optimal table in closed form. Both run over
//! integer win weights (support probabilities scaled by their common
//! denominator) with branch-and-bound pruning, and both return exact
//! rationals.
//!
//! Determinism contract: the value and the witness are identical for any
//! worker count. The value phase shares an atomic incumbent (pruning only),
//! and the witness phase re-searches in lexicographic order against the
//! known optimum, which makes the reported witness and enumeration count
//! independent of scheduling.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;

use num::bigint::BigInt;
use num::{Integer, One, ToPrimitive, Zero};
use thiserror::Error;

use crate::game::{Game, Strategy, SymId};
use crate::rat::Rat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    PlainExhaustive,
    BestResponse,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::PlainExhaustive => "plain-exhaustive",
            Method::BestResponse => "best-response",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    /// Cap on the number of enumerated partial strategies. The strategy
    /// space is sized up front; a space larger than the budget is an
    /// explicit error, never a silent truncation.
    pub budget: u128,
    pub threads: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            budget: 1 << 32,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValueResult {
    pub value: Rat,
    pub witness: Strategy,
    /// Partial strategies examined by the deterministic witness phase.
    pub enumerated: u64,
    pub method: Method,
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("strategy space of {space:.3e} partial strategies exceeds budget {budget}; incomplete lower bound {lower_bound}")]
    BudgetExceeded {
        space: f64,
        budget: u128,
        /// Value of the best constant strategy: a quick deterministic
        /// lower bound reported with the failure.
        lower_bound: Rat,
    },
    #[error("support weights do not fit 64-bit integers; denominators too large")]
    WeightOverflow,
    #[error("answer table too large for the packed search: {0}")]
    TableTooLarge(String),
    #[error("strategy does not match the game: {0}")]
    DomainMismatch(String),
}

/// Exact win probability of a deterministic strategy.
pub fn win_probability(game: &Game, strategy: &Strategy) -> Result<Rat, SearchError> {
    let k = game.players();
    let mut total = Rat::zero();
    for (x, p) in game.distribution() {
        let mut a = Vec::with_capacity(k);
        for t in 0..k {
            let ans = strategy.answer(t, x[t]).ok_or_else(|| {
                SearchError::DomainMismatch(format!("player {} has no answer for question id {}", t + 1, x[t]))
            })?;
            if (ans as usize) >= game.answer_alphabet(t).len() {
                return Err(SearchError::DomainMismatch(format!(
                    "player {} answer id {} out of range",
                    t + 1,
                    ans
                )));
            }
            a.push(ans);
        }
        if game.accepts(x, &a) {
            total += p.clone();
        }
    }
    Ok(total)
}

/// Best value over all constant (question-oblivious) strategies. Cheap and
/// deterministic; reported as the partial lower bound on budget failures.
fn constant_strategy_bound(game: &Game) -> Rat {
    let combos = game.answer_combo_count();
    let scan = if combos <= 4096 { combos } else { 1 };
    let mut best = Rat::zero();
    for c in 0..scan {
        let a = game.decode_answer_combo(c);
        let mut v = Rat::zero();
        for (x, p) in game.distribution() {
            if game.accepts(x, &a) {
                v += p.clone();
            }
        }
        if v > best {
            best = v;
        }
    }
    best
}

struct Packed {
    /// Per player, the sorted question ids appearing in the support.
    domains: Vec<Vec<SymId>>,
    acounts: Vec<usize>,
    weights: Vec<u64>,
    denom: BigInt,
    total: u64,
    /// slots[s] = (player, position in that player's domain)
    slots: Vec<(usize, usize)>,
    /// Per slot: tuples touched, with the tuple's combo multiplier for the
    /// slot's player.
    touch: Vec<Vec<(usize, u64)>>,
    /// Per slot: tuples whose search-player answers are all fixed once this
    /// slot is assigned.
    decided_at: Vec<Vec<usize>>,
    /// Accept bitset per tuple over full answer combos (plain method).
    accept_full: Vec<Vec<u64>>,
    /// Accept masks per tuple over partial combos (best-response): bitmask
    /// over the last player's answers.
    accept_mask: Vec<Vec<u64>>,
    /// Dense index of the last player's question per tuple (best-response).
    last_qidx: Vec<usize>,
    last_domain: Vec<SymId>,
    last_acount: usize,
    method: Method,
}

impl Packed {
    fn build(game: &Game, method: Method) -> Result<Packed, SearchError> {
        let k = game.players();
        let search_players = match method {
            Method::PlainExhaustive => k,
            Method::BestResponse => k - 1,
        };
        let domains: Vec<Vec<SymId>> = (0..k)
            .map(|t| game.question_projection(t).into_iter().collect())
            .collect();
        let acounts: Vec<usize> = (0..k).map(|t| game.answer_alphabet(t).len()).collect();

        // Scale probabilities to integer weights over the lcm denominator.
        let mut denom = BigInt::one();
        for p in game.distribution().values() {
            denom = denom.lcm(p.denom());
        }
        let mut weights = Vec::with_capacity(game.support_len());
        for p in game.distribution().values() {
            let w = p.numer() * (&denom / p.denom());
            weights.push(w.to_u64().ok_or(SearchError::WeightOverflow)?);
        }
        let total: u64 = weights.iter().sum();
        debug_assert_eq!(BigInt::from(total), denom);

        let mut slot_of: Vec<BTreeMap<SymId, usize>> = vec![BTreeMap::new(); search_players];
        let mut slots = Vec::new();
        for (t, dom) in domains.iter().enumerate().take(search_players) {
            for (pos, &q) in dom.iter().enumerate() {
                slot_of[t].insert(q, slots.len());
                slots.push((t, pos));
            }
        }

        // Player-major combo multipliers over the searched players.
        let mut mult = vec![1u64; search_players];
        for t in (0..search_players.saturating_sub(1)).rev() {
            mult[t] = mult[t + 1] * acounts[t + 1] as u64;
        }
        let combo_space: usize = acounts.iter().take(search_players).product::<usize>().max(1);
        if combo_space > (1 << 22) {
            return Err(SearchError::TableTooLarge(format!(
                "{combo_space} answer combinations per tuple"
            )));
        }

        let support: Vec<&Vec<SymId>> = game.support().collect();
        let mut touch = vec![Vec::new(); slots.len()];
        let mut decided_at = vec![Vec::new(); slots.len()];
        let mut last_qidx = Vec::new();
        let last_domain = domains.get(k - 1).cloned().unwrap_or_default();
        for (j, x) in support.iter().enumerate() {
            let mut last_slot = None;
            for t in 0..search_players {
                let s = slot_of[t][&x[t]];
                touch[s].push((j, mult[t]));
                last_slot = Some(last_slot.map_or(s, |m: usize| m.max(s)));
            }
            if let Some(s) = last_slot {
                decided_at[s].push(j);
            }
            if method == Method::BestResponse {
                last_qidx.push(last_domain.binary_search(&x[k - 1]).unwrap());
            }
        }

        let mut accept_full = Vec::new();
        let mut accept_mask = Vec::new();
        match method {
            Method::PlainExhaustive => {
                for x in &support {
                    let mut bits = vec![0u64; combo_space.div_ceil(64)];
                    for c in 0..combo_space {
                        let a = decode_combo(c as u64, &acounts[..k]);
                        if game.accepts(x, &a) {
                            bits[c / 64] |= 1 << (c % 64);
                        }
                    }
                    accept_full.push(bits);
                }
            }
            Method::BestResponse => {
                if acounts[k - 1] > 64 {
                    return Err(SearchError::TableTooLarge(format!(
                        "last player has {} answers (mask limit 64)",
                        acounts[k - 1]
                    )));
                }
                for x in &support {
                    let mut masks = vec![0u64; combo_space];
                    for (c, m) in masks.iter_mut().enumerate() {
                        let mut a = decode_combo(c as u64, &acounts[..search_players]);
                        a.push(0);
                        for alast in 0..acounts[k - 1] {
                            a[k - 1] = alast as SymId;
                            if game.accepts(x, &a) {
                                *m |= 1 << alast;
                            }
                        }
                    }
                    accept_mask.push(masks);
                }
            }
        }

        Ok(Packed {
            domains,
            acounts: acounts.clone(),
            weights,
            denom,
            total,
            slots,
            touch,
            decided_at,
            accept_full,
            accept_mask,
            last_qidx,
            last_domain,
            last_acount: acounts[k - 1],
            method,
        })
    }

    /// Number of partial strategies the search would enumerate, saturating.
    fn space(&self) -> u128 {
        let mut s: u128 = 1;
        for &(t, _) in &self.slots {
            s = s.saturating_mul(self.acounts[t] as u128);
        }
        s
    }

    fn space_f64(&self) -> f64 {
        self.slots
            .iter()
            .map(|&(t, _)| (self.acounts[t] as f64).log2())
            .sum::<f64>()
            .exp2()
    }
}

fn decode_combo(mut c: u64, acounts: &[usize]) -> Vec<SymId> {
    let mut a = vec![0 as SymId; acounts.len()];
    for t in (0..acounts.len()).rev() {
        a[t] = (c % acounts[t] as u64) as SymId;
        c /= acounts[t] as u64;
    }
    a
}

struct State {
    combo: Vec<u64>,
    decided_weight: u64,
    /// Plain: exact win weight of decided tuples. Best-response: optimistic
    /// weight (decided tuples that can still be won by some last answer).
    score: u64,
    /// Best-response: per (last-player question, last answer) win weight of
    /// decided tuples.
    acc: Vec<u64>,
}

impl State {
    fn new(p: &Packed) -> State {
        State {
            combo: vec![0; p.weights.len()],
            decided_weight: 0,
            score: 0,
            acc: vec![0; p.last_domain.len() * p.last_acount.max(1)],
        }
    }

    fn decide(&mut self, p: &Packed, j: usize, add: bool) {
        let w = p.weights[j];
        if add {
            self.decided_weight += w;
        } else {
            self.decided_weight -= w;
        }
        match p.method {
            Method::PlainExhaustive => {
                let c = self.combo[j] as usize;
                if p.accept_full[j][c / 64] >> (c % 64) & 1 == 1 {
                    if add {
                        self.score += w;
                    } else {
                        self.score -= w;
                    }
                }
            }
            Method::BestResponse => {
                let mask = p.accept_mask[j][self.combo[j] as usize];
                if mask != 0 {
                    let base = p.last_qidx[j] * p.last_acount;
                    let mut m = mask;
                    while m != 0 {
                        let a = m.trailing_zeros() as usize;
                        m &= m - 1;
                        if add {
                            self.acc[base + a] += w;
                        } else {
                            self.acc[base + a] -= w;
                        }
                    }
                    if add {
                        self.score += w;
                    } else {
                        self.score -= w;
                    }
                }
            }
        }
    }

    fn apply(&mut self, p: &Packed, slot: usize, a: u8) {
        for &(j, mult) in &p.touch[slot] {
            self.combo[j] += a as u64 * mult;
        }
        for idx in 0..p.decided_at[slot].len() {
            let j = p.decided_at[slot][idx];
            self.decide(p, j, true);
        }
    }

    fn undo(&mut self, p: &Packed, slot: usize, a: u8) {
        for idx in 0..p.decided_at[slot].len() {
            let j = p.decided_at[slot][idx];
            self.decide(p, j, false);
        }
        for &(j, mult) in &p.touch[slot] {
            self.combo[j] -= a as u64 * mult;
        }
    }

    fn bound(&self, p: &Packed) -> u64 {
        self.score + (p.total - self.decided_weight)
    }

    fn leaf_value(&self, p: &Packed) -> u64 {
        match p.method {
            Method::PlainExhaustive => self.score,
            Method::BestResponse => {
                let mut v = 0;
                for q in 0..p.last_domain.len() {
                    let base = q * p.last_acount;
                    let mut best = 0;
                    for a in 0..p.last_acount {
                        if self.acc[base + a] > best {
                            best = self.acc[base + a];
                        }
                    }
                    v += best;
                }
                v
            }
        }
    }

    /// Last player's optimal table at a leaf, ties to the smallest answer id.
    fn best_response_table(&self, p: &Packed) -> Vec<SymId> {
        let mut table = Vec::with_capacity(p.last_domain.len());
        for q in 0..p.last_domain.len() {
            let base = q * p.last_acount;
            let mut best_a = 0;
            let mut best = self.acc[base];
            for a in 1..p.last_acount {
                if self.acc[base + a] > best {
                    best = self.acc[base + a];
                    best_a = a;
                }
            }
            table.push(best_a as SymId);
        }
        table
    }
}

fn dfs_value(p: &Packed, st: &mut State, slot: usize, incumbent: &AtomicU64) {
    if slot == p.slots.len() {
        let v = st.leaf_value(p);
        incumbent.fetch_max(v, Ordering::Relaxed);
        return;
    }
    let player = p.slots[slot].0;
    for a in 0..p.acounts[player] as u8 {
        st.apply(p, slot, a);
        if st.bound(p) > incumbent.load(Ordering::Relaxed) {
            dfs_value(p, st, slot + 1, incumbent);
        }
        st.undo(p, slot, a);
    }
}

#[derive(Clone)]
struct WitnessHit {
    assignment: Vec<u8>,
    last_table: Vec<SymId>,
}

fn dfs_witness(
    p: &Packed,
    st: &mut State,
    slot: usize,
    target: u64,
    assignment: &mut Vec<u8>,
    leaves: &mut u64,
) -> Option<WitnessHit> {
    if slot == p.slots.len() {
        *leaves += 1;
        if st.leaf_value(p) == target {
            return Some(WitnessHit {
                assignment: assignment.clone(),
                last_table: match p.method {
                    Method::BestResponse => st.best_response_table(p),
                    Method::PlainExhaustive => Vec::new(),
                },
            });
        }
        return None;
    }
    let player = p.slots[slot].0;
    for a in 0..p.acounts[player] as u8 {
        st.apply(p, slot, a);
        assignment[slot] = a;
        let hit = if st.bound(p) >= target {
            dfs_witness(p, st, slot + 1, target, assignment, leaves)
        } else {
            None
        };
        st.undo(p, slot, a);
        if hit.is_some() {
            return hit;
        }
    }
    None
}

/// Lexicographic block prefixes over the first slots, sized so there are
/// enough blocks to keep the workers busy.
fn build_blocks(p: &Packed, threads: usize) -> (usize, Vec<Vec<u8>>) {
    let want = (threads.max(1)) * 8;
    let mut depth = 0;
    let mut count = 1usize;
    while depth < p.slots.len() && count < want && threads > 1 {
        count *= p.acounts[p.slots[depth].0];
        depth += 1;
    }
    let mut blocks = Vec::with_capacity(count);
    let mut cur = vec![0u8; depth];
    loop {
        blocks.push(cur.clone());
        let mut d = depth;
        loop {
            if d == 0 {
                return (depth, blocks);
            }
            d -= 1;
            cur[d] += 1;
            if (cur[d] as usize) < p.acounts[p.slots[d].0] {
                break;
            }
            cur[d] = 0;
        }
        if cur.iter().all(|&v| v == 0) {
            return (depth, blocks);
        }
    }
}

fn value_phase(p: &Packed, threads: usize) -> u64 {
    let (depth, blocks) = build_blocks(p, threads);
    let incumbent = AtomicU64::new(0);
    let next = AtomicUsize::new(0);
    let run_block = |b: usize, st: &mut State| {
        let prefix = &blocks[b];
        for (s, &a) in prefix.iter().enumerate() {
            st.apply(p, s, a);
        }
        if st.bound(p) > incumbent.load(Ordering::Relaxed) {
            dfs_value(p, st, depth, &incumbent);
        }
        for (s, &a) in prefix.iter().enumerate().rev() {
            st.undo(p, s, a);
        }
    };
    if threads <= 1 {
        let mut st = State::new(p);
        for b in 0..blocks.len() {
            run_block(b, &mut st);
        }
    } else {
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(|| {
                    let mut st = State::new(p);
                    loop {
                        let b = next.fetch_add(1, Ordering::Relaxed);
                        if b >= blocks.len() {
                            break;
                        }
                        run_block(b, &mut st);
                    }
                });
            }
        });
    }
    incumbent.load(Ordering::Relaxed)
}

fn witness_phase(p: &Packed, threads: usize, target: u64) -> (u64, WitnessHit) {
    let (depth, blocks) = build_blocks(p, threads);
    let results: Mutex<Vec<Option<(u64, Option<WitnessHit>)>>> =
        Mutex::new(vec![None; blocks.len()]);
    let next = AtomicUsize::new(0);
    let min_hit = AtomicUsize::new(usize::MAX);
    let run_block = |b: usize, st: &mut State| -> (u64, Option<WitnessHit>) {
        let prefix = &blocks[b];
        for (s, &a) in prefix.iter().enumerate() {
            st.apply(p, s, a);
        }
        let mut leaves = 0;
        let mut assignment = vec![0u8; p.slots.len()];
        assignment[..depth].copy_from_slice(prefix);
        let hit = if st.bound(p) >= target {
            dfs_witness(p, st, depth, target, &mut assignment, &mut leaves)
        } else {
            None
        };
        for (s, &a) in prefix.iter().enumerate().rev() {
            st.undo(p, s, a);
        }
        (leaves, hit)
    };
    let worker = || {
        let mut st = State::new(p);
        loop {
            let b = next.fetch_add(1, Ordering::Relaxed);
            if b >= blocks.len() {
                break;
            }
            if b > min_hit.load(Ordering::Relaxed) {
                continue;
            }
            let r = run_block(b, &mut st);
            if r.1.is_some() {
                min_hit.fetch_min(b, Ordering::Relaxed);
            }
            results.lock().unwrap()[b] = Some(r);
        }
    };
    if threads <= 1 {
        worker();
    } else {
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(worker);
            }
        });
    }
    let mut results = results.into_inner().unwrap();
    let hit_block = results
        .iter()
        .position(|r| matches!(r, Some((_, Some(_)))))
        .expect("value phase optimum must be attained");
    let mut leaves = 0;
    for r in results.iter().take(hit_block) {
        leaves += r.as_ref().expect("blocks before the hit are complete").0;
    }
    let (hit_leaves, hit) = results[hit_block].take().unwrap();
    leaves += hit_leaves;
    (leaves, hit.unwrap())
}

fn assemble_witness(game: &Game, p: &Packed, hit: &WitnessHit) -> Strategy {
    let k = game.players();
    let mut tables: Vec<BTreeMap<SymId, SymId>> = vec![BTreeMap::new(); k];
    for (s, &(t, pos)) in p.slots.iter().enumerate() {
        tables[t].insert(p.domains[t][pos], hit.assignment[s] as SymId);
    }
    if p.method == Method::BestResponse {
        for (pos, &q) in p.last_domain.iter().enumerate() {
            tables[k - 1].insert(q, hit.last_table[pos]);
        }
    }
    Strategy::new(tables)
}

/// The exact value of the game: the maximum win probability over all
/// deterministic strategies, with a witness attaining it.
pub fn game_value(
    game: &Game,
    method: Method,
    opts: &SearchOptions,
) -> Result<ValueResult, SearchError> {
    let p = Packed::build(game, method)?;
    if p.space() > opts.budget {
        return Err(SearchError::BudgetExceeded {
            space: p.space_f64(),
            budget: opts.budget,
            lower_bound: constant_strategy_bound(game),
        });
    }
    let threads = opts.threads.max(1);
    let best = value_phase(&p, threads);
    let (enumerated, hit) = witness_phase(&p, threads, best);
    let witness = assemble_witness(game, &p, &hit);
    let value = Rat::new(BigInt::from(best), p.denom.clone());
    debug_assert_eq!(win_probability(game, &witness).unwrap(), value);
    Ok(ValueResult {
        value,
        witness,
        enumerated,
        method,
    })
}

#[derive(Debug)]
pub struct ValueSequence {
    /// values[i] is the exact value of the (i+1)-fold repetition.
    pub values: Vec<Rat>,
    /// Set when some repetition level exceeded the budget; the list is
    /// truncated right before that level.
    pub truncated_at: Option<(usize, SearchError)>,
}

/// Exact values of `repeat(game, 1..=n_max)`, truncating on budget failure.
pub fn value_sequence(
    game: &Game,
    n_max: usize,
    method: Method,
    opts: &SearchOptions,
) -> ValueSequence {
    let mut values = Vec::new();
    for n in 1..=n_max {
        let repeated = match crate::game::repeat(game, n) {
            Ok(g) => g,
            Err(_) => {
                return ValueSequence {
                    values,
                    truncated_at: Some((
                        n,
                        SearchError::TableTooLarge("repeated alphabets overflow".into()),
                    )),
                }
            }
        };
        match game_value(&repeated, method, opts) {
            Ok(r) => values.push(r.value),
            Err(e) => {
                return ValueSequence {
                    values,
                    truncated_at: Some((n, e)),
                }
            }
        }
    }
    ValueSequence {
        values,
        truncated_at: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{anchor, build_free_uniform, build_ghz, repeat, Predicate};
    use crate::rat::{rat, rat_one};
    use std::collections::BTreeMap;

    #[test]
    fn ghz_all_zero_strategy_wins_three_quarters() {
        let g = build_ghz();
        let s = Strategy::constant(&g, &[0, 0, 0]);
        assert_eq!(win_probability(&g, &s).unwrap(), rat(3, 4));
    }

    #[test]
    fn coordinatewise_all_zero_on_double_ghz() {
        let g = build_ghz();
        let r2 = repeat(&g, 2).unwrap();
        let base = Strategy::constant(&g, &[0, 0, 0]);
        let lifted = Strategy::coordinatewise(&g, &base, 2);
        assert_eq!(win_probability(&r2, &lifted).unwrap(), rat(9, 16));
    }

    #[test]
    fn always_accepting_game_has_value_one() {
        let g = build_free_uniform(2, 2).unwrap();
        let s = Strategy::constant(&g, &[0, 0]);
        assert_eq!(win_probability(&g, &s).unwrap(), rat_one());
        for method in [Method::PlainExhaustive, Method::BestResponse] {
            let r = game_value(&g, method, &SearchOptions::default()).unwrap();
            assert_eq!(r.value, rat_one());
        }
    }

    #[test]
    fn ghz_value_is_three_quarters_via_both_methods() {
        let g = build_ghz();
        for method in [Method::PlainExhaustive, Method::BestResponse] {
            let r = game_value(&g, method, &SearchOptions::default()).unwrap();
            assert_eq!(r.value, rat(3, 4), "method {:?}", method);
            assert_eq!(win_probability(&g, &r.witness).unwrap(), rat(3, 4));
        }
    }

    #[test]
    fn single_question_game_with_unique_accepted_answer() {
        let mut dist = BTreeMap::new();
        dist.insert(vec![0, 0], rat_one());
        let mut accepts = std::collections::BTreeSet::new();
        accepts.insert((vec![0, 0], vec![1, 0]));
        let g = Game::new(
            vec![vec!["q".into()]; 2],
            vec![vec!["0".into(), "1".into()]; 2],
            dist,
            Predicate::AcceptTable(accepts),
        )
        .unwrap();
        for method in [Method::PlainExhaustive, Method::BestResponse] {
            let r = game_value(&g, method, &SearchOptions::default()).unwrap();
            assert_eq!(r.value, rat_one());
            assert_eq!(r.witness.answer(0, 0), Some(1));
            assert_eq!(r.witness.answer(1, 0), Some(0));
        }
    }

    #[test]
    fn anchored_value_law_on_ghz() {
        let g = build_ghz();
        let a = anchor(&g, &rat(1, 2)).unwrap();
        let r = game_value(&a, Method::BestResponse, &SearchOptions::default()).unwrap();
        // 1 - (1-alpha)^k (1 - val) = 1 - (1/8)(1/4)
        assert_eq!(r.value, rat(31, 32));
        let r = game_value(&a, Method::PlainExhaustive, &SearchOptions::default()).unwrap();
        assert_eq!(r.value, rat(31, 32));
    }

    #[test]
    fn budget_is_an_explicit_error() {
        let g = build_ghz();
        let r3 = repeat(&g, 3).unwrap();
        let err = game_value(
            &r3,
            Method::BestResponse,
            &SearchOptions {
                budget: 1 << 20,
                threads: 1,
            },
        )
        .unwrap_err();
        match err {
            SearchError::BudgetExceeded { lower_bound, .. } => {
                // constant all-zero play wins (3/4)^3 of the mass
                assert_eq!(lower_bound, rat(27, 64));
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn value_sequence_monotone_and_supermultiplicative() {
        let g = build_ghz();
        let seq = value_sequence(&g, 2, Method::BestResponse, &SearchOptions::default());
        assert!(seq.truncated_at.is_none());
        assert_eq!(seq.values[0], rat(3, 4));
        assert!(seq.values[1] <= seq.values[0]);
        assert!(seq.values[1] >= &seq.values[0] * &seq.values[0]);
    }

    #[test]
    fn worker_counts_agree() {
        let g = build_ghz();
        let r2 = repeat(&g, 2).unwrap();
        let mut results = Vec::new();
        for threads in [1, 2, 8] {
            let opts = SearchOptions {
                threads,
                ..Default::default()
            };
            let r = game_value(&r2, Method::BestResponse, &opts).unwrap();
            results.push((r.value, r.witness, r.enumerated));
        }
        assert_eq!(results[0], results[1]);
        assert_eq!(results[0], results[2]);
    }
}
