//! Exact execution of the strategy-rounding pipeline on desk-scale
//! instances: subset selection, dependency-breaking variables, conditional
//! independence checks, the global sampling distribution, and the
//! single-shot strategy, all by finite enumeration in exact rationals.
//!
//! Floating point enters only through square roots (Hellinger vectors, the
//! global distribution) and reported logarithms.

use std::collections::BTreeMap;

use num::{One, Signed, Zero};
use thiserror::Error;

use crate::game::{decode_vec, encode_vec, ATuple, Game, QTuple, Strategy, SymId};
use crate::graph::ConnectionGraph;
use crate::rat::{log2_rat, rat_to_f64, Rat};
use crate::value::{game_value, Method, SearchOptions};

/// Hole marker inside punctured question tuples.
pub const HOLE: SymId = SymId::MAX;

#[derive(Debug, Error)]
pub enum RoundingError {
    #[error("outcome space |supp|^n = {0} exceeds the enumeration cap {1}")]
    BudgetExceeded(f64, usize),
    #[error("conditioning event has zero mass")]
    ZeroMassCondition,
    #[error("subset must be a sorted proper subset of the coordinate indices")]
    BadSubset,
    #[error("no subset keeps the conditioned win event positive")]
    NoUsableSubset,
    #[error(transparent)]
    Search(#[from] crate::value::SearchError),
    #[error(transparent)]
    Game(#[from] crate::game::GameError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Spectral(#[from] crate::spectral::SpectralError),
}

/// Mixed-radix counter: yields every index vector below the limits.
/// An empty limit list yields exactly one empty vector.
pub struct Odometer {
    limits: Vec<usize>,
    cur: Vec<usize>,
    done: bool,
}

impl Odometer {
    pub fn new(limits: Vec<usize>) -> Odometer {
        let done = limits.iter().any(|&l| l == 0);
        Odometer {
            cur: vec![0; limits.len()],
            limits,
            done,
        }
    }
}

impl Iterator for Odometer {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.cur.clone();
        let mut d = self.limits.len();
        loop {
            if d == 0 {
                self.done = true;
                break;
            }
            d -= 1;
            self.cur[d] += 1;
            if self.cur[d] < self.limits[d] {
                break;
            }
            self.cur[d] = 0;
        }
        Some(out)
    }
}

/// Size-`size` subsets of 0..n in lexicographic order.
fn combinations(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(size);
    fn rec(n: usize, size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v);
            rec(n, size, v + 1, cur, out);
            cur.pop();
        }
    }
    rec(n, size, 0, &mut cur, &mut out);
    out
}

struct Outcome {
    /// Index into the base support per coordinate.
    coords: Vec<usize>,
    weight: Rat,
    /// Bit i set iff the strategy wins coordinate i.
    wins: u64,
    /// answers[player][coordinate].
    answers: Vec<Vec<SymId>>,
}

struct PuncturedBucket {
    marginal: Rat,
    /// (completion value, joint tuple probability)
    completions: Vec<(SymId, Rat)>,
}

/// Precomputed product space of an n-fold repetition under a fixed strategy.
pub struct RoundingInstance {
    pub base: Game,
    pub n: usize,
    pub k: usize,
    pub strategy: Strategy,
    /// Base support tuples in canonical order (the connection-graph order).
    pub supp: Vec<QTuple>,
    pub supp_prob: Vec<Rat>,
    outcomes: Vec<Outcome>,
    /// Per player: punctured tuple (hole at that player) -> bucket.
    punctured: Vec<BTreeMap<Vec<SymId>, PuncturedBucket>>,
}

impl RoundingInstance {
    pub fn build(
        base: &Game,
        n: usize,
        strategy: &Strategy,
        max_outcomes: usize,
    ) -> Result<RoundingInstance, RoundingError> {
        assert!(n >= 1 && n <= 64);
        let k = base.players();
        let supp: Vec<QTuple> = base.support().cloned().collect();
        let supp_prob: Vec<Rat> = supp.iter().map(|x| base.probability(x)).collect();
        let space = (supp.len() as f64).powi(n as i32);
        if space > max_outcomes as f64 {
            return Err(RoundingError::BudgetExceeded(space, max_outcomes));
        }
        let qsizes: Vec<usize> = (0..k).map(|t| base.question_alphabet(t).len()).collect();
        let asizes: Vec<usize> = (0..k).map(|t| base.answer_alphabet(t).len()).collect();

        let mut outcomes = Vec::with_capacity(space as usize);
        for pick in Odometer::new(vec![supp.len(); n]) {
            let mut weight = Rat::one();
            for &c in &pick {
                weight *= supp_prob[c].clone();
            }
            let mut answers = Vec::with_capacity(k);
            for t in 0..k {
                let qvec: Vec<SymId> = pick.iter().map(|&c| supp[c][t]).collect();
                let qid = encode_vec(&qvec, qsizes[t]);
                let aid = strategy.answer(t, qid).ok_or_else(|| {
                    crate::value::SearchError::DomainMismatch(format!(
                        "player {} lacks an answer for a support question",
                        t + 1
                    ))
                })?;
                answers.push(decode_vec(aid, asizes[t], n));
            }
            let mut wins = 0u64;
            for i in 0..n {
                let a: ATuple = (0..k).map(|t| answers[t][i]).collect();
                if base.accepts(&supp[pick[i]], &a) {
                    wins |= 1 << i;
                }
            }
            outcomes.push(Outcome {
                coords: pick,
                weight,
                wins,
                answers,
            });
        }

        let mut punctured = Vec::with_capacity(k);
        for t in 0..k {
            let mut buckets: BTreeMap<Vec<SymId>, PuncturedBucket> = BTreeMap::new();
            for (x, p) in supp.iter().zip(&supp_prob) {
                let mut key = x.clone();
                key[t] = HOLE;
                let b = buckets.entry(key).or_insert_with(|| PuncturedBucket {
                    marginal: Rat::zero(),
                    completions: Vec::new(),
                });
                b.marginal += p.clone();
                b.completions.push((x[t], p.clone()));
            }
            punctured.push(buckets);
        }

        Ok(RoundingInstance {
            base: base.clone(),
            n,
            k,
            strategy: strategy.clone(),
            supp,
            supp_prob,
            outcomes,
            punctured,
        })
    }

    fn mask(&self, s: &[usize]) -> u64 {
        s.iter().fold(0u64, |m, &i| m | 1 << i)
    }

    /// Exact probability of winning every listed coordinate.
    pub fn event_probability(&self, coords: &[usize]) -> Rat {
        let mask = self.mask(coords);
        let mut p = Rat::zero();
        for o in &self.outcomes {
            if o.wins & mask == mask {
                p += o.weight.clone();
            }
        }
        p
    }

    pub fn p_win_all(&self) -> Rat {
        let all: Vec<usize> = (0..self.n).collect();
        self.event_probability(&all)
    }

    pub fn p_win_coordinate(&self, i: usize) -> Rat {
        self.event_probability(&[i])
    }

    /// P(W_i | W_S), exact.
    pub fn conditional_win(&self, i: usize, s: &[usize]) -> Result<Rat, RoundingError> {
        let p_s = self.event_probability(s);
        if p_s.is_zero() {
            return Err(RoundingError::ZeroMassCondition);
        }
        let mut with_i = s.to_vec();
        with_i.push(i);
        Ok(self.event_probability(&with_i) / p_s)
    }

    fn free_coords(&self, s: &[usize], i: usize) -> Vec<usize> {
        (0..self.n).filter(|j| !s.contains(j) && *j != i).collect()
    }
}

/// A value of the dependency-breaking variable with coordinate i removed:
/// per remaining free coordinate the omitted player and the other players'
/// questions, plus the S questions and S answers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct BreakerValue {
    pub omega: Vec<(u8, Vec<SymId>)>,
    pub x_s: Vec<QTuple>,
    pub a_s: Vec<ATuple>,
}

pub type BreakerDist = BTreeMap<BreakerValue, Rat>;

fn normalize(dist: &mut BreakerDist) -> Result<(), RoundingError> {
    let total: Rat = dist.values().cloned().sum();
    if total.is_zero() {
        return Err(RoundingError::ZeroMassCondition);
    }
    for v in dist.values_mut() {
        *v /= total.clone();
    }
    Ok(())
}

/// Direct tabulation of P(R_{-i} | X_i = x, W_S): sweep every outcome and
/// every direction assignment, collapse to breaker values, normalize.
pub fn breaker_conditional(
    inst: &RoundingInstance,
    s: &[usize],
    i: usize,
    x_idx: usize,
) -> Result<BreakerDist, RoundingError> {
    assert!(!s.contains(&i) && i < inst.n);
    let mask = inst.mask(s);
    let free = inst.free_coords(s, i);
    let k = inst.k;
    let mut dist: BreakerDist = BTreeMap::new();
    for o in &inst.outcomes {
        if o.wins & mask != mask || o.coords[i] != x_idx {
            continue;
        }
        let x_s: Vec<QTuple> = s.iter().map(|&j| inst.supp[o.coords[j]].clone()).collect();
        let a_s: Vec<ATuple> = s
            .iter()
            .map(|&j| (0..k).map(|t| o.answers[t][j]).collect())
            .collect();
        for dirs in Odometer::new(vec![k; free.len()]) {
            let omega: Vec<(u8, Vec<SymId>)> = free
                .iter()
                .zip(&dirs)
                .map(|(&j, &d)| {
                    let mut q = inst.supp[o.coords[j]].clone();
                    q[d] = HOLE;
                    (d as u8, q)
                })
                .collect();
            let key = BreakerValue {
                omega,
                x_s: x_s.clone(),
                a_s: a_s.clone(),
            };
            *dist.entry(key).or_insert_with(Rat::zero) += o.weight.clone();
        }
    }
    normalize(&mut dist)?;
    Ok(dist)
}

/// Factored tabulation of the same conditional: enumerate breaker skeletons
/// (directions, punctured tuples, S questions), tabulate each player's
/// S-answer mass independently over its own free coordinates, and combine
/// the per-player factors. A structurally different path used to cross-check
/// the direct sweep.
pub fn breaker_conditional_factored(
    inst: &RoundingInstance,
    s: &[usize],
    i: usize,
    x_idx: usize,
) -> Result<BreakerDist, RoundingError> {
    assert!(!s.contains(&i) && i < inst.n);
    let free = inst.free_coords(s, i);
    let k = inst.k;
    let n = inst.n;
    let qsizes: Vec<usize> = (0..k)
        .map(|t| inst.base.question_alphabet(t).len())
        .collect();
    let asizes: Vec<usize> = (0..k)
        .map(|t| inst.base.answer_alphabet(t).len())
        .collect();
    let mut dist: BreakerDist = BTreeMap::new();

    for dirs in Odometer::new(vec![k; free.len()]) {
        let bucket_keys: Vec<Vec<&Vec<SymId>>> = dirs
            .iter()
            .map(|&d| inst.punctured[d].keys().collect())
            .collect();
        for bucket_pick in Odometer::new(bucket_keys.iter().map(|b| b.len()).collect()) {
            let m_j: Vec<&Vec<SymId>> = bucket_pick
                .iter()
                .zip(&bucket_keys)
                .map(|(&p, keys)| keys[p])
                .collect();
            for s_pick in Odometer::new(vec![inst.supp.len(); s.len()]) {
                let x_s: Vec<QTuple> = s_pick.iter().map(|&p| inst.supp[p].clone()).collect();
                let mut prior = Rat::one();
                for (f_pos, &d) in dirs.iter().enumerate() {
                    prior *= inst.punctured[d][m_j[f_pos]].marginal.clone();
                }
                for &p in &s_pick {
                    prior *= inst.supp_prob[p].clone();
                }

                // per-player S-answer tabulation over private free coords
                let mut per_player: Vec<BTreeMap<Vec<SymId>, Rat>> = Vec::with_capacity(k);
                for t in 0..k {
                    let my_free: Vec<usize> =
                        (0..free.len()).filter(|&fp| dirs[fp] == t).collect();
                    let limits: Vec<usize> = my_free
                        .iter()
                        .map(|&fp| inst.punctured[t][m_j[fp]].completions.len())
                        .collect();
                    let mut table: BTreeMap<Vec<SymId>, Rat> = BTreeMap::new();
                    for choice in Odometer::new(limits) {
                        let mut qvec = vec![0 as SymId; n];
                        let mut weight = Rat::one();
                        for (f_pos, &j) in free.iter().enumerate() {
                            if dirs[f_pos] == t {
                                let slot = my_free.iter().position(|&fp| fp == f_pos).unwrap();
                                let bucket = &inst.punctured[t][m_j[f_pos]];
                                let (v, joint) = &bucket.completions[choice[slot]];
                                qvec[j] = *v;
                                weight *= joint / &bucket.marginal;
                            } else {
                                qvec[j] = m_j[f_pos][t];
                            }
                        }
                        for (s_pos, &j) in s.iter().enumerate() {
                            qvec[j] = x_s[s_pos][t];
                        }
                        qvec[i] = inst.supp[x_idx][t];
                        let qid = encode_vec(&qvec, qsizes[t]);
                        if let Some(aid) = inst.strategy.answer(t, qid) {
                            let avec = decode_vec(aid, asizes[t], n);
                            let answers_s: Vec<SymId> = s.iter().map(|&j| avec[j]).collect();
                            *table.entry(answers_s).or_insert_with(Rat::zero) += weight;
                        }
                    }
                    per_player.push(table);
                }
                if per_player.iter().any(|t| t.is_empty()) {
                    continue;
                }
                let keys: Vec<Vec<&Vec<SymId>>> =
                    per_player.iter().map(|t| t.keys().collect()).collect();
                for pick in Odometer::new(keys.iter().map(|ks| ks.len()).collect()) {
                    let mut factor = prior.clone();
                    for t in 0..k {
                        factor *= per_player[t][keys[t][pick[t]]].clone();
                    }
                    if !factor.is_positive() {
                        continue;
                    }
                    let a_s: Vec<ATuple> = (0..s.len())
                        .map(|j| (0..k).map(|t| keys[t][pick[t]][j]).collect())
                        .collect();
                    let win_s = (0..s.len()).all(|j| inst.base.accepts(&x_s[j], &a_s[j]));
                    if !win_s {
                        continue;
                    }
                    let omega: Vec<(u8, Vec<SymId>)> = dirs
                        .iter()
                        .enumerate()
                        .map(|(f_pos, &d)| (d as u8, m_j[f_pos].clone()))
                        .collect();
                    let key = BreakerValue {
                        omega,
                        x_s: x_s.clone(),
                        a_s,
                    };
                    *dist.entry(key).or_insert_with(Rat::zero) += factor;
                }
            }
        }
    }
    normalize(&mut dist)?;
    Ok(dist)
}

/// Exact total variation distance, with the half-sum normalization.
pub fn tv_rat(a: &BreakerDist, b: &BreakerDist) -> Rat {
    let mut sum = Rat::zero();
    for (key, pa) in a {
        let pb = b.get(key).cloned().unwrap_or_else(Rat::zero);
        sum += (pa.clone() - pb).abs();
    }
    for (key, pb) in b {
        if !a.contains_key(key) {
            sum += pb.clone();
        }
    }
    sum / Rat::from_integer(2.into())
}

// ---------------------------------------------------------------------------
// Subset selection
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SubsetSearch {
    /// log2(1/P(W)) <= eps n/16 - log2(4/eps)?
    pub hypothesis_held: bool,
    pub log2_inv_pw: f64,
    pub hypothesis_rhs: f64,
    /// Size cap (8/eps)(log2(4/eps) + log2(1/P(W))); None when eps = 0.
    pub t_cap: Option<f64>,
    /// Chosen subset (qualified, best-scoring fallback, or forced).
    pub chosen: Vec<usize>,
    /// Did the chosen subset meet the eps/2 target?
    pub qualified: bool,
    /// Hypothesis held yet nothing qualified within the cap.
    pub hard_failure: bool,
    /// Subset supplied by the caller instead of searched.
    pub forced: bool,
    /// P_{i not in S}(not W_i | W_S) at the chosen subset.
    pub conditional_miss: Rat,
    pub candidates_checked: usize,
}

/// Exhaustive subset search in (size, lexicographic) order. When no subset
/// within the cap meets the eps/2 target the best-scoring candidate is
/// returned (smallest conditional miss, ties to smaller size then lex) with
/// `qualified` false; `hard_failure` marks the case where the hypothesis
/// held, so the guarantee itself failed.
pub fn find_subset(
    inst: &RoundingInstance,
    epsilon: &Rat,
) -> Result<SubsetSearch, RoundingError> {
    let n = inst.n;
    let p_w = inst.p_win_all();
    let eps_f = rat_to_f64(epsilon);
    let log2_inv_pw = if p_w.is_zero() {
        f64::INFINITY
    } else {
        -log2_rat(&p_w)
    };
    let hypothesis_rhs = eps_f * n as f64 / 16.0 - (4.0 / eps_f).log2();
    let hypothesis_held = eps_f > 0.0 && log2_inv_pw <= hypothesis_rhs;
    let t_cap = if eps_f > 0.0 {
        Some((8.0 / eps_f) * ((4.0 / eps_f).log2() + log2_inv_pw))
    } else {
        None
    };
    let max_size = match t_cap {
        Some(cap) if cap.is_finite() => (cap.max(0.0).floor() as usize).min(n - 1),
        _ => n - 1,
    };
    let target = epsilon / Rat::from_integer(2.into());

    let mut best: Option<(Rat, Vec<usize>)> = None;
    let mut checked = 0;
    for size in 0..=max_size {
        for s in combinations(n, size) {
            let p_s = inst.event_probability(&s);
            if p_s.is_zero() {
                continue;
            }
            checked += 1;
            let m = n - size;
            let mut miss = Rat::zero();
            for i in (0..n).filter(|i| !s.contains(i)) {
                miss += Rat::one() - inst.conditional_win(i, &s)?;
            }
            miss /= Rat::from_integer((m as i64).into());
            if miss <= target {
                return Ok(SubsetSearch {
                    hypothesis_held,
                    log2_inv_pw,
                    hypothesis_rhs,
                    t_cap,
                    chosen: s,
                    qualified: true,
                    hard_failure: false,
                    forced: false,
                    conditional_miss: miss,
                    candidates_checked: checked,
                });
            }
            if best.as_ref().map_or(true, |(b, _)| miss < *b) {
                best = Some((miss, s));
            }
        }
    }
    let (miss, chosen) = best.ok_or(RoundingError::NoUsableSubset)?;
    Ok(SubsetSearch {
        hypothesis_held,
        log2_inv_pw,
        hypothesis_rhs,
        t_cap,
        chosen,
        qualified: false,
        hard_failure: hypothesis_held,
        forced: false,
        conditional_miss: miss,
        candidates_checked: checked,
    })
}

// ---------------------------------------------------------------------------
// Conditional independence (the dependency-breaking property)
// ---------------------------------------------------------------------------

/// A full dependency-breaking value: directions and punctured questions for
/// every coordinate outside S, plus the S questions and answers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FullBreaker {
    pub omega: Vec<(u8, Vec<SymId>)>,
    pub x_s: Vec<QTuple>,
    pub a_s: Vec<ATuple>,
}

#[derive(Debug, Clone)]
pub struct IndependenceCounterexample {
    /// questions[player] is that player's question vector at the violating cell.
    pub questions: Vec<Vec<SymId>>,
    pub joint: Rat,
    pub product: Rat,
}

#[derive(Debug, Clone)]
pub struct Claim22Summary {
    pub checked: usize,
    pub counterexample: Option<IndependenceCounterexample>,
}

/// All positive-mass full breaker values with the outcomes consistent with
/// each (no winning-event conditioning: independence is a property of R
/// alone).
fn full_breakers_with_outcomes(
    inst: &RoundingInstance,
    s: &[usize],
) -> BTreeMap<FullBreaker, Vec<usize>> {
    let free: Vec<usize> = (0..inst.n).filter(|j| !s.contains(j)).collect();
    let k = inst.k;
    let mut map: BTreeMap<FullBreaker, Vec<usize>> = BTreeMap::new();
    for (oi, o) in inst.outcomes.iter().enumerate() {
        let x_s: Vec<QTuple> = s.iter().map(|&j| inst.supp[o.coords[j]].clone()).collect();
        let a_s: Vec<ATuple> = s
            .iter()
            .map(|&j| (0..k).map(|t| o.answers[t][j]).collect())
            .collect();
        for dirs in Odometer::new(vec![k; free.len()]) {
            let omega: Vec<(u8, Vec<SymId>)> = free
                .iter()
                .zip(&dirs)
                .map(|(&j, &d)| {
                    let mut q = inst.supp[o.coords[j]].clone();
                    q[d] = HOLE;
                    (d as u8, q)
                })
                .collect();
            map.entry(FullBreaker {
                omega,
                x_s: x_s.clone(),
                a_s: a_s.clone(),
            })
            .or_default()
            .push(oi);
        }
    }
    map
}

pub fn enumerate_full_breakers(inst: &RoundingInstance, s: &[usize]) -> Vec<FullBreaker> {
    full_breakers_with_outcomes(inst, s).into_keys().collect()
}

fn check_independence_cell(
    inst: &RoundingInstance,
    consistent: &[usize],
) -> Result<(), IndependenceCounterexample> {
    let k = inst.k;
    let mut joint: BTreeMap<Vec<Vec<SymId>>, Rat> = BTreeMap::new();
    let mut marginals: Vec<BTreeMap<Vec<SymId>, Rat>> = vec![BTreeMap::new(); k];
    let mut total = Rat::zero();
    for &oi in consistent {
        let o = &inst.outcomes[oi];
        let per_player: Vec<Vec<SymId>> = (0..k)
            .map(|t| o.coords.iter().map(|&c| inst.supp[c][t]).collect())
            .collect();
        for t in 0..k {
            *marginals[t]
                .entry(per_player[t].clone())
                .or_insert_with(Rat::zero) += o.weight.clone();
        }
        *joint.entry(per_player).or_insert_with(Rat::zero) += o.weight.clone();
        total += o.weight.clone();
    }
    let keys: Vec<Vec<&Vec<SymId>>> = marginals.iter().map(|m| m.keys().collect()).collect();
    for pick in Odometer::new(keys.iter().map(|ks| ks.len()).collect()) {
        let cell: Vec<Vec<SymId>> = (0..k).map(|t| keys[t][pick[t]].clone()).collect();
        let w_joint = joint.get(&cell).cloned().unwrap_or_else(Rat::zero);
        let mut w_prod = Rat::one();
        for t in 0..k {
            w_prod *= marginals[t][&cell[t]].clone();
        }
        // P_joint(cell) == prod_t P_t(cell_t), cleared of denominators:
        let lhs = w_joint.clone() * total.clone().pow((k as i32) - 1);
        if lhs != w_prod {
            let tk = total.clone().pow(k as i32);
            return Err(IndependenceCounterexample {
                questions: cell,
                joint: w_joint / total.clone(),
                product: w_prod / tk,
            });
        }
    }
    Ok(())
}

/// Outcome cells consistent with a full breaker value, as per-player
/// question vectors with their weights. With `condition_answers` false the
/// S-answer component of `r` is ignored, i.e. the joint is conditioned on
/// the question variables only; comparing the two conditionings is the
/// corrupted-conditioning control in the test suite.
pub fn conditional_cells(
    inst: &RoundingInstance,
    s: &[usize],
    r: &FullBreaker,
    condition_answers: bool,
) -> Vec<(Vec<Vec<SymId>>, Rat)> {
    let free: Vec<usize> = (0..inst.n).filter(|j| !s.contains(j)).collect();
    let k = inst.k;
    let mut cells = Vec::new();
    'outer: for o in &inst.outcomes {
        for (pos, &j) in free.iter().enumerate() {
            let (d, m) = &r.omega[pos];
            let x = &inst.supp[o.coords[j]];
            for t in 0..k {
                if t != *d as usize && x[t] != m[t] {
                    continue 'outer;
                }
            }
        }
        for (pos, &j) in s.iter().enumerate() {
            if inst.supp[o.coords[j]] != r.x_s[pos] {
                continue 'outer;
            }
            if condition_answers {
                for t in 0..k {
                    if o.answers[t][j] != r.a_s[pos][t] {
                        continue 'outer;
                    }
                }
            }
        }
        let per_player: Vec<Vec<SymId>> = (0..k)
            .map(|t| o.coords.iter().map(|&c| inst.supp[c][t]).collect())
            .collect();
        cells.push((per_player, o.weight.clone()));
    }
    cells
}

/// Verifies that conditioned on a full breaker value the players' question
/// vectors are independent across players, exactly.
pub fn check_conditional_independence(
    inst: &RoundingInstance,
    s: &[usize],
    r: &FullBreaker,
) -> Result<(), IndependenceCounterexample> {
    let map = full_breakers_with_outcomes(inst, s);
    let consistent = map.get(r).cloned().unwrap_or_default();
    check_independence_cell(inst, &consistent)
}

/// Runs the independence check over every positive-mass breaker value.
pub fn check_claim22(inst: &RoundingInstance, s: &[usize]) -> Claim22Summary {
    let map = full_breakers_with_outcomes(inst, s);
    let mut checked = 0;
    for consistent in map.values() {
        checked += 1;
        if let Err(cex) = check_independence_cell(inst, consistent) {
            return Claim22Summary {
                checked,
                counterexample: Some(cex),
            };
        }
    }
    Claim22Summary {
        checked,
        counterexample: None,
    }
}

// ---------------------------------------------------------------------------
// Distances, the global distribution, the single-shot value
// ---------------------------------------------------------------------------

/// (1/m) sum over i outside S and over rho-positive ordered pairs of
/// rho(x,x') times the statistical distance of the breaker conditionals.
/// Diagonal pairs contribute zero and are skipped.
pub fn lemma_r_diagnostic(
    inst: &RoundingInstance,
    s: &[usize],
    graph: &ConnectionGraph,
    conds: &BTreeMap<usize, Vec<BreakerDist>>,
) -> Rat {
    let m = inst.n - s.len();
    let mut sum = Rat::zero();
    for per_x in conds.values() {
        for (i_v, j_v, rho) in graph.edges() {
            let tv = tv_rat(&per_x[i_v], &per_x[j_v]);
            // both ordered directions
            sum += rho * tv * Rat::from_integer(2.into());
        }
    }
    sum / Rat::from_integer((m as i64).into())
}

#[derive(Debug, Clone)]
pub struct GlobalDistribution {
    pub i: usize,
    /// Entrywise square root of each conditional, averaged under mu; kept
    /// before normalization for the reported correction.
    pub gbar: BTreeMap<BreakerValue, f64>,
    pub gbar_norm: f64,
    pub p_tilde: BTreeMap<BreakerValue, f64>,
    pub p_tilde_total: f64,
    pub max_unit_norm_error: f64,
    /// TV(P_{R|x,W_S}, p_tilde) per support index.
    pub per_x_distance: Vec<f64>,
    /// sum_x mu(x) per_x_distance[x].
    pub avg_distance: f64,
}

fn sqrt_dist(dist: &BreakerDist) -> BTreeMap<&BreakerValue, f64> {
    dist.iter().map(|(k, v)| (k, rat_to_f64(v).sqrt())).collect()
}

/// Builds the averaged square-root vector, normalizes it, squares it into a
/// distribution, and measures the average distance to the conditionals.
pub fn global_distribution(
    inst: &RoundingInstance,
    i: usize,
    conds: &[BreakerDist],
) -> GlobalDistribution {
    let mus: Vec<f64> = inst.supp_prob.iter().map(rat_to_f64).collect();
    let mut gbar: BTreeMap<BreakerValue, f64> = BTreeMap::new();
    let mut max_unit_err: f64 = 0.0;
    let gs: Vec<BTreeMap<&BreakerValue, f64>> = conds.iter().map(sqrt_dist).collect();
    for (x, g) in gs.iter().enumerate() {
        let norm_sq: f64 = g.values().map(|v| v * v).sum();
        max_unit_err = max_unit_err.max((norm_sq.sqrt() - 1.0).abs());
        for (key, v) in g {
            *gbar.entry((*key).clone()).or_insert(0.0) += mus[x] * v;
        }
    }
    let gbar_norm: f64 = gbar.values().map(|v| v * v).sum::<f64>().sqrt();
    let p_tilde: BTreeMap<BreakerValue, f64> = gbar
        .iter()
        .map(|(k, v)| (k.clone(), (v / gbar_norm) * (v / gbar_norm)))
        .collect();
    let p_tilde_total: f64 = p_tilde.values().sum();
    let mut per_x_distance = Vec::with_capacity(conds.len());
    let mut avg = 0.0;
    for (x, cond) in conds.iter().enumerate() {
        let mut l1 = 0.0;
        for (key, p) in cond {
            let q = p_tilde.get(key).copied().unwrap_or(0.0);
            l1 += (rat_to_f64(p) - q).abs();
        }
        for (key, q) in &p_tilde {
            if !cond.contains_key(key) {
                l1 += q;
            }
        }
        let d = l1 / 2.0;
        per_x_distance.push(d);
        avg += mus[x] * d;
    }
    GlobalDistribution {
        i,
        gbar,
        gbar_norm,
        p_tilde,
        p_tilde_total,
        max_unit_norm_error: max_unit_err,
        per_x_distance,
        avg_distance: avg,
    }
}

#[derive(Debug, Clone)]
pub struct HellingerChain {
    pub pairs_checked: usize,
    /// max over pairs of H^2 - 2 TV; nonpositive (up to float noise) when
    /// the Hellinger-TV inequality holds.
    pub max_violation: f64,
    /// (1/m) sum_i sum_{ordered rho-positive pairs} rho(u,v) H^2(g_u, g_v).
    pub edge_energy: f64,
    /// (1/m) sum_i sum_x rho(x) ||g_x - gbar_i||^2.
    pub spread: f64,
}

pub fn hellinger_chain(
    inst: &RoundingInstance,
    s: &[usize],
    graph: &ConnectionGraph,
    conds: &BTreeMap<usize, Vec<BreakerDist>>,
    globals: &[GlobalDistribution],
) -> HellingerChain {
    let m = inst.n - s.len();
    let mut pairs = 0;
    let mut max_violation = f64::NEG_INFINITY;
    let mut edge_energy = 0.0;
    let mut spread = 0.0;
    for g in globals {
        let per_x = &conds[&g.i];
        let sqrts: Vec<BTreeMap<&BreakerValue, f64>> = per_x.iter().map(sqrt_dist).collect();
        for (u, v, rho) in graph.edges() {
            let mut h2 = 0.0;
            for (key, a) in &sqrts[u] {
                let b = sqrts[v].get(key).copied().unwrap_or(0.0);
                h2 += (a - b) * (a - b);
            }
            for (key, b) in &sqrts[v] {
                if !sqrts[u].contains_key(key) {
                    h2 += b * b;
                }
            }
            let tv = rat_to_f64(&tv_rat(&per_x[u], &per_x[v]));
            pairs += 1;
            max_violation = max_violation.max(h2 - 2.0 * tv);
            edge_energy += 2.0 * rat_to_f64(rho) * h2;
        }
        for (x, sq) in sqrts.iter().enumerate() {
            let mut d2 = 0.0;
            for (key, gb) in &g.gbar {
                let a = sq.get(key).copied().unwrap_or(0.0);
                d2 += (a - gb) * (a - gb);
            }
            for (key, a) in sq {
                if !g.gbar.contains_key(*key) {
                    d2 += a * a;
                }
            }
            spread += rat_to_f64(&inst.supp_prob[x]) * d2;
        }
    }
    if pairs == 0 {
        max_violation = 0.0;
    }
    HellingerChain {
        pairs_checked: pairs,
        max_violation,
        edge_energy: edge_energy / m as f64,
        spread: spread / m as f64,
    }
}

/// Win distribution of one player's private completion: the conditional of
/// the answer at coordinate i given the player's own question, the breaker
/// value, and the player's S-answer event. None when the conditioning event
/// has zero mass for this player (possible under the global source).
fn player_answer_dist(
    inst: &RoundingInstance,
    s: &[usize],
    free: &[usize],
    i: usize,
    x_idx: usize,
    r: &BreakerValue,
    t: usize,
) -> Option<BTreeMap<SymId, Rat>> {
    let n = inst.n;
    let qsize = inst.base.question_alphabet(t).len();
    let asize = inst.base.answer_alphabet(t).len();
    let my_free: Vec<usize> = (0..free.len())
        .filter(|&fp| r.omega[fp].0 as usize == t)
        .collect();
    let buckets: Vec<&PuncturedBucket> = my_free
        .iter()
        .map(|&fp| inst.punctured[t].get(&r.omega[fp].1))
        .collect::<Option<Vec<_>>>()?;
    let mut dist: BTreeMap<SymId, Rat> = BTreeMap::new();
    let mut total = Rat::zero();
    for choice in Odometer::new(buckets.iter().map(|b| b.completions.len()).collect()) {
        let mut qvec = vec![0 as SymId; n];
        let mut weight = Rat::one();
        for (f_pos, &j) in free.iter().enumerate() {
            if r.omega[f_pos].0 as usize == t {
                let slot = my_free.iter().position(|&fp| fp == f_pos).unwrap();
                let (v, joint) = &buckets[slot].completions[choice[slot]];
                qvec[j] = *v;
                weight *= joint / &buckets[slot].marginal;
            } else {
                qvec[j] = r.omega[f_pos].1[t];
            }
        }
        for (s_pos, &j) in s.iter().enumerate() {
            qvec[j] = r.x_s[s_pos][t];
        }
        qvec[i] = inst.supp[x_idx][t];
        let qid = encode_vec(&qvec, qsize);
        let aid = inst.strategy.answer(t, qid)?;
        let avec = decode_vec(aid, asize, n);
        let matches = s
            .iter()
            .enumerate()
            .all(|(s_pos, &j)| avec[j] == r.a_s[s_pos][t]);
        if matches {
            *dist.entry(avec[i]).or_insert_with(Rat::zero) += weight.clone();
            total += weight;
        }
    }
    if total.is_zero() {
        return None;
    }
    for v in dist.values_mut() {
        *v /= total.clone();
    }
    Some(dist)
}

/// Exact win probability of one round of the single-shot strategy, given
/// the referee tuple, the sampled breaker value, and private sampling.
fn single_shot_round(
    inst: &RoundingInstance,
    s: &[usize],
    free: &[usize],
    i: usize,
    x_idx: usize,
    r: &BreakerValue,
) -> Option<Rat> {
    let k = inst.k;
    let per_player: Vec<BTreeMap<SymId, Rat>> = (0..k)
        .map(|t| player_answer_dist(inst, s, free, i, x_idx, r, t))
        .collect::<Option<Vec<_>>>()?;
    let keys: Vec<Vec<&SymId>> = per_player.iter().map(|d| d.keys().collect()).collect();
    let mut win = Rat::zero();
    for pick in Odometer::new(keys.iter().map(|ks| ks.len()).collect()) {
        let a: ATuple = (0..k).map(|t| *keys[t][pick[t]]).collect();
        if inst.base.accepts(&inst.supp[x_idx], &a) {
            let mut p = Rat::one();
            for t in 0..k {
                p *= per_player[t][keys[t][pick[t]]].clone();
            }
            win += p;
        }
    }
    Some(win)
}

/// Exact value of the single-shot strategy when the breaker is sampled from
/// the exact conditional P(R_{-i} | x, W_S).
pub fn single_shot_exact(
    inst: &RoundingInstance,
    s: &[usize],
    conds: &BTreeMap<usize, Vec<BreakerDist>>,
) -> Rat {
    let m = inst.n - s.len();
    let mut acc = Rat::zero();
    for (&i, per_x) in conds {
        let free = inst.free_coords(s, i);
        for (x_idx, cond) in per_x.iter().enumerate() {
            for (r, p_r) in cond {
                let win = single_shot_round(inst, s, &free, i, x_idx, r)
                    .expect("exact-conditional sampling is always compatible");
                acc += inst.supp_prob[x_idx].clone() * p_r.clone() * win;
            }
        }
    }
    acc / Rat::from_integer((m as i64).into())
}

/// Value of the single-shot strategy when the breaker is sampled from the
/// global distribution. Incompatible samples (a player's conditioning event
/// has zero mass) count as losses.
pub fn single_shot_global(
    inst: &RoundingInstance,
    s: &[usize],
    globals: &[GlobalDistribution],
) -> f64 {
    let m = inst.n - s.len();
    let mut acc = 0.0;
    for g in globals {
        let free = inst.free_coords(s, g.i);
        for x_idx in 0..inst.supp.len() {
            let mu = rat_to_f64(&inst.supp_prob[x_idx]);
            for (r, p_r) in &g.p_tilde {
                if *p_r == 0.0 {
                    continue;
                }
                if let Some(win) = single_shot_round(inst, s, &free, g.i, x_idx, r) {
                    acc += mu * p_r * rat_to_f64(&win);
                }
            }
        }
    }
    acc / m as f64
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum StrategyChoice {
    /// Optimal strategy of the repeated game from the exact search.
    RepeatedOptimal,
    /// The base game's optimal strategy played independently per coordinate.
    Coordinatewise,
    /// The cross-coordinate coupled strategy built from the base optimum.
    Coupled,
    Provided(Strategy),
}

impl StrategyChoice {
    fn describe(&self) -> &'static str {
        match self {
            StrategyChoice::RepeatedOptimal => "repeated-optimal",
            StrategyChoice::Coordinatewise => "coordinatewise-optimal",
            StrategyChoice::Coupled => "cyclic-coupled",
            StrategyChoice::Provided(_) => "user-supplied",
        }
    }
}

#[derive(Debug, Clone)]
pub enum SubsetChoice {
    Auto,
    Fixed(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub strategy: StrategyChoice,
    pub subset: SubsetChoice,
    /// Override for epsilon; defaults to 1 - val(base).
    pub epsilon: Option<Rat>,
    pub search: SearchOptions,
    pub max_outcomes: usize,
    pub check_claim22: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            strategy: StrategyChoice::RepeatedOptimal,
            subset: SubsetChoice::Auto,
            epsilon: None,
            search: SearchOptions::default(),
            max_outcomes: 1 << 20,
            check_claim22: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RoundingReport {
    pub n: usize,
    pub k: usize,
    pub strategy_kind: String,
    pub base_value: Rat,
    pub epsilon: Rat,
    pub p_w: Rat,
    pub p_wi: Vec<Rat>,
    pub subset: SubsetSearch,
    pub s: Vec<usize>,
    pub m: usize,
    pub p_ws: Rat,
    pub delta: f64,
    pub sqrt_delta: f64,
    pub log2_answers: f64,
    pub lambda: Option<f64>,
    pub component_count: usize,
    pub claim22_checked: usize,
    pub claim22_ok: bool,
    /// Exact Lemma-style diagnostic: rho-weighted conditional distances.
    pub diagnostic: Rat,
    pub per_i: Vec<GlobalDistribution>,
    pub avg_ptilde_distance: f64,
    pub hellinger: HellingerChain,
    /// Eq-(1) bound path on the average distance: sqrt(edge_energy/lambda)
    /// plus the normalization correction. Reported, never asserted.
    pub eq1_distance_bound: Option<f64>,
    pub ss_exact: Rat,
    pub ss_rhs: Rat,
    pub ss_exact_equals_rhs: bool,
    pub ss_global: f64,
    pub ss_gap: f64,
    pub ss_gap_within_distance: bool,
    pub normalization_ok: bool,
}

/// The repeated-game strategy a pipeline run would use.
pub fn resolve_strategy(
    base: &Game,
    n: usize,
    choice: &StrategyChoice,
    search: &SearchOptions,
) -> Result<Strategy, RoundingError> {
    Ok(match choice {
        StrategyChoice::RepeatedOptimal => {
            let repeated = crate::game::repeat(base, n)?;
            game_value(&repeated, Method::BestResponse, search)?.witness
        }
        StrategyChoice::Coordinatewise => {
            let base_result = game_value(base, Method::BestResponse, search)?;
            Strategy::coordinatewise(base, &base_result.witness, n)
        }
        StrategyChoice::Coupled => {
            let base_result = game_value(base, Method::BestResponse, search)?;
            Strategy::cyclic_coupled(base, &base_result.witness, n)
        }
        StrategyChoice::Provided(s) => s.clone(),
    })
}

pub fn pipeline(
    base: &Game,
    n: usize,
    opts: &PipelineOptions,
) -> Result<RoundingReport, RoundingError> {
    let base_result = game_value(base, Method::BestResponse, &opts.search)?;
    let epsilon = opts
        .epsilon
        .clone()
        .unwrap_or_else(|| Rat::one() - base_result.value.clone());

    let strategy = resolve_strategy(base, n, &opts.strategy, &opts.search)?;
    let inst = RoundingInstance::build(base, n, &strategy, opts.max_outcomes)?;

    let p_w = inst.p_win_all();
    let p_wi: Vec<Rat> = (0..n).map(|i| inst.p_win_coordinate(i)).collect();

    let subset = match &opts.subset {
        SubsetChoice::Auto => find_subset(&inst, &epsilon)?,
        SubsetChoice::Fixed(s) => {
            let mut sorted = s.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != s.len() || sorted.iter().any(|&j| j >= n) || sorted.len() >= n {
                return Err(RoundingError::BadSubset);
            }
            let m = n - sorted.len();
            let mut miss = Rat::zero();
            for i in (0..n).filter(|i| !sorted.contains(i)) {
                miss += Rat::one() - inst.conditional_win(i, &sorted)?;
            }
            miss /= Rat::from_integer((m as i64).into());
            let qualified = miss <= &epsilon / Rat::from_integer(2.into());
            SubsetSearch {
                hypothesis_held: false,
                log2_inv_pw: if p_w.is_zero() {
                    f64::INFINITY
                } else {
                    -log2_rat(&p_w)
                },
                hypothesis_rhs: f64::NAN,
                t_cap: None,
                chosen: sorted,
                qualified,
                hard_failure: false,
                forced: true,
                conditional_miss: miss,
                candidates_checked: 1,
            }
        }
    };
    let s = subset.chosen.clone();
    let m = n - s.len();
    let p_ws = inst.event_probability(&s);
    if p_ws.is_zero() {
        return Err(RoundingError::ZeroMassCondition);
    }
    let log2_answers = base.total_answers_log2();
    let delta = (-log2_rat(&p_ws) + s.len() as f64 * log2_answers) / m as f64;

    let graph = crate::graph::build_connection_graph(base)?;
    debug_assert_eq!(graph.vertices(), inst.supp.as_slice());
    let lambda = if graph.vertex_count() >= 2 {
        let l = crate::spectral::normalized_laplacian(&graph);
        Some(crate::spectral::lambda2(&l)?.value)
    } else {
        None
    };

    let not_s: Vec<usize> = (0..n).filter(|i| !s.contains(i)).collect();
    let mut conds: BTreeMap<usize, Vec<BreakerDist>> = BTreeMap::new();
    for &i in &not_s {
        let per_x: Result<Vec<BreakerDist>, RoundingError> = (0..inst.supp.len())
            .map(|x_idx| breaker_conditional(&inst, &s, i, x_idx))
            .collect();
        conds.insert(i, per_x?);
    }

    let claim22 = if opts.check_claim22 {
        check_claim22(&inst, &s)
    } else {
        Claim22Summary {
            checked: 0,
            counterexample: None,
        }
    };

    let diagnostic = lemma_r_diagnostic(&inst, &s, &graph, &conds);

    let globals: Vec<GlobalDistribution> = not_s
        .iter()
        .map(|&i| global_distribution(&inst, i, &conds[&i]))
        .collect();
    let avg_ptilde_distance =
        globals.iter().map(|g| g.avg_distance).sum::<f64>() / m as f64;
    let hellinger = hellinger_chain(&inst, &s, &graph, &conds, &globals);
    let eq1_distance_bound = lambda.and_then(|l| {
        if l > 0.0 {
            let corr = globals
                .iter()
                .map(|g| (1.0 - g.gbar_norm).abs())
                .sum::<f64>()
                / m as f64;
            Some((hellinger.edge_energy / l).sqrt() + corr)
        } else {
            None
        }
    });

    let ss_exact = single_shot_exact(&inst, &s, &conds);
    let mut ss_rhs = Rat::zero();
    for &i in &not_s {
        ss_rhs += inst.conditional_win(i, &s)?;
    }
    ss_rhs /= Rat::from_integer((m as i64).into());
    let ss_global = single_shot_global(&inst, &s, &globals);
    let ss_gap = (ss_global - rat_to_f64(&ss_exact)).abs();
    // float slack: the global path squares square roots
    let ss_gap_within_distance = ss_gap <= avg_ptilde_distance + 1e-12;
    let normalization_ok = globals
        .iter()
        .all(|g| (g.p_tilde_total - 1.0).abs() < 1e-12 && g.max_unit_norm_error < 1e-12);

    Ok(RoundingReport {
        n,
        k: inst.k,
        strategy_kind: opts.strategy.describe().to_string(),
        base_value: base_result.value,
        epsilon,
        p_w,
        p_wi,
        s,
        m,
        p_ws,
        delta,
        sqrt_delta: delta.max(0.0).sqrt(),
        log2_answers,
        lambda,
        component_count: graph.component_count(),
        claim22_checked: claim22.checked,
        claim22_ok: claim22.counterexample.is_none(),
        diagnostic,
        per_i: globals,
        avg_ptilde_distance,
        hellinger,
        eq1_distance_bound,
        ss_exact: ss_exact.clone(),
        ss_rhs: ss_rhs.clone(),
        ss_exact_equals_rhs: ss_exact == ss_rhs,
        ss_global,
        ss_gap,
        ss_gap_within_distance,
        normalization_ok,
        subset,
    })
}
