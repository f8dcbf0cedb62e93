//! The structured game file: JSON with symbol alphabets, an exact rational
//! distribution, an explicit or builtin predicate, and an ordered transform
//! list. The reserved anchoring symbol never appears in files; anchoring is
//! recorded as a transform and re-applied on load.

use std::collections::{BTreeMap, BTreeSet};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use parrep_core::game::{
    anchor, repeat, ATuple, Game, Predicate, QTuple, Strategy, SymId, ANCHOR_SYMBOL,
};
use parrep_core::rat::{format_rat, parse_rat};
use parrep_core::game::{decode_vec, encode_vec};

pub const GAME_FILE_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistEntry {
    pub questions: Vec<String>,
    pub p: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcceptEntry {
    pub questions: Vec<String>,
    pub answers: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum PredicateJson {
    #[serde(rename = "accepts")]
    Accepts(Vec<AcceptEntry>),
    #[serde(rename = "builtin")]
    Builtin(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum TransformJson {
    #[serde(rename = "anchor")]
    Anchor(String),
    #[serde(rename = "repeat")]
    Repeat(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFileJson {
    pub schema_version: u32,
    pub players: usize,
    pub question_alphabets: Vec<Vec<String>>,
    pub answer_alphabets: Vec<Vec<String>>,
    pub distribution: Vec<DistEntry>,
    pub predicate: PredicateJson,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transforms: Vec<TransformJson>,
}

/// A transform requested on the command line, in flag order.
#[derive(Debug, Clone)]
pub enum Transform {
    Anchor(parrep_core::Rat),
    Repeat(usize),
}

impl Transform {
    pub fn describe(&self) -> String {
        match self {
            Transform::Anchor(a) => format!("anchor({})", format_rat(a)),
            Transform::Repeat(n) => format!("repeat({n})"),
        }
    }
}

pub fn apply_transforms(game: Game, transforms: &[Transform]) -> Result<Game> {
    let mut g = game;
    for t in transforms {
        g = match t {
            Transform::Anchor(a) => anchor(&g, a)?,
            Transform::Repeat(n) => repeat(&g, *n)?,
        };
    }
    Ok(g)
}

fn intern(alphabet: &[String], symbol: &str, what: &str) -> Result<SymId> {
    alphabet
        .iter()
        .position(|s| s == symbol)
        .map(|i| i as SymId)
        .ok_or_else(|| anyhow!("unknown {what} symbol {symbol:?}"))
}

/// Builds the base game from a parsed file (before transforms).
pub fn game_from_json(json: &GameFileJson) -> Result<(Game, Vec<Transform>)> {
    if json.schema_version != GAME_FILE_SCHEMA {
        bail!("unsupported game file schema version {}", json.schema_version);
    }
    let k = json.players;
    if json.question_alphabets.len() != k || json.answer_alphabets.len() != k {
        bail!("alphabet lists must have one entry per player");
    }
    for alpha in json
        .question_alphabets
        .iter()
        .chain(json.answer_alphabets.iter())
    {
        for s in alpha {
            if s == ANCHOR_SYMBOL {
                bail!("reserved symbol {ANCHOR_SYMBOL} may not appear in game files");
            }
        }
    }
    let mut dist: BTreeMap<QTuple, parrep_core::Rat> = BTreeMap::new();
    for (idx, entry) in json.distribution.iter().enumerate() {
        if entry.questions.len() != k {
            bail!("distribution[{idx}]: expected {k} questions");
        }
        let tuple: QTuple = entry
            .questions
            .iter()
            .enumerate()
            .map(|(t, s)| intern(&json.question_alphabets[t], s, "question"))
            .collect::<Result<_>>()
            .with_context(|| format!("distribution[{idx}]"))?;
        let p = parse_rat(&entry.p)
            .map_err(|e| anyhow!("distribution[{idx}]: {e}"))?;
        if dist.insert(tuple, p).is_some() {
            bail!("distribution[{idx}]: duplicate question tuple");
        }
    }
    let predicate = match &json.predicate {
        PredicateJson::Builtin(name) => match name.as_str() {
            "ghz" => Predicate::Ghz,
            "always_accept" => Predicate::AlwaysAccept,
            other => bail!("unknown builtin predicate {other:?}"),
        },
        PredicateJson::Accepts(entries) => {
            let mut set: BTreeSet<(QTuple, ATuple)> = BTreeSet::new();
            for (idx, e) in entries.iter().enumerate() {
                if e.questions.len() != k || e.answers.len() != k {
                    bail!("predicate.accepts[{idx}]: arity mismatch");
                }
                let q: QTuple = e
                    .questions
                    .iter()
                    .enumerate()
                    .map(|(t, s)| intern(&json.question_alphabets[t], s, "question"))
                    .collect::<Result<_>>()
                    .with_context(|| format!("predicate.accepts[{idx}]"))?;
                let a: ATuple = e
                    .answers
                    .iter()
                    .enumerate()
                    .map(|(t, s)| intern(&json.answer_alphabets[t], s, "answer"))
                    .collect::<Result<_>>()
                    .with_context(|| format!("predicate.accepts[{idx}]"))?;
                set.insert((q, a));
            }
            Predicate::AcceptTable(set)
        }
    };
    let game = Game::new(
        json.question_alphabets.clone(),
        json.answer_alphabets.clone(),
        dist,
        predicate,
    )
    .map_err(|e| anyhow!("invalid game: {e}"))?;
    let transforms = json
        .transforms
        .iter()
        .map(|t| {
            Ok(match t {
                TransformJson::Anchor(a) => {
                    Transform::Anchor(parse_rat(a).map_err(|e| anyhow!("transform anchor: {e}"))?)
                }
                TransformJson::Repeat(n) => Transform::Repeat(*n),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((game, transforms))
}

pub fn parse_game_file(text: &str) -> Result<(GameFileJson, Game, Vec<Transform>)> {
    let json: GameFileJson = serde_json::from_str(text)
        .map_err(|e| anyhow!("parse error at line {}, column {}: {e}", e.line(), e.column()))?;
    let (game, transforms) = game_from_json(&json)?;
    Ok((json, game, transforms))
}

/// Canonical file for a base game (no lazy transform predicates). Builtins
/// stay symbolic; everything else becomes an explicit accept table.
pub fn game_to_json(game: &Game) -> Result<GameFileJson> {
    let k = game.players();
    let distribution = game
        .distribution()
        .iter()
        .map(|(x, p)| DistEntry {
            questions: (0..k)
                .map(|t| game.question_alphabet(t)[x[t] as usize].clone())
                .collect(),
            p: format_rat(p),
        })
        .collect();
    let predicate = match game.predicate() {
        Predicate::Ghz => PredicateJson::Builtin("ghz".into()),
        Predicate::AlwaysAccept => PredicateJson::Builtin("always_accept".into()),
        _ => {
            // tabulate over the support
            let mut entries = Vec::new();
            let combos = game.answer_combo_count();
            if combos.saturating_mul(game.support_len()) > 1 << 22 {
                bail!("predicate too large to tabulate into a game file");
            }
            for x in game.support() {
                for c in 0..combos {
                    let a = game.decode_answer_combo(c);
                    if game.accepts(x, &a) {
                        entries.push(AcceptEntry {
                            questions: (0..k)
                                .map(|t| game.question_alphabet(t)[x[t] as usize].clone())
                                .collect(),
                            answers: (0..k)
                                .map(|t| game.answer_alphabet(t)[a[t] as usize].clone())
                                .collect(),
                        });
                    }
                }
            }
            PredicateJson::Accepts(entries)
        }
    };
    Ok(GameFileJson {
        schema_version: GAME_FILE_SCHEMA,
        players: k,
        question_alphabets: game.question_alphabets().to_vec(),
        answer_alphabets: game.answer_alphabets().to_vec(),
        distribution,
        predicate,
        transforms: Vec::new(),
    })
}

pub fn render_game_file(json: &GameFileJson) -> String {
    let mut s = serde_json::to_string_pretty(json).expect("game file serializes");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// Strategy files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyEntry {
    /// One symbol per repetition coordinate, in base-game symbols.
    pub question: Vec<String>,
    pub answer: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyFileJson {
    pub schema_version: u32,
    pub players: usize,
    pub reps: usize,
    /// tables[player] lists the answer vector for each question vector.
    pub tables: Vec<Vec<StrategyEntry>>,
}

/// Parses a strategy for `repeat(base, n)` written in base-game symbols.
pub fn strategy_from_json(base: &Game, n: usize, json: &StrategyFileJson) -> Result<Strategy> {
    if json.schema_version != GAME_FILE_SCHEMA {
        bail!("unsupported strategy schema version {}", json.schema_version);
    }
    if json.players != base.players() || json.reps != n {
        bail!(
            "strategy is for {} players x {} reps, expected {} x {n}",
            json.players,
            json.reps,
            base.players()
        );
    }
    let mut tables = Vec::with_capacity(base.players());
    for (t, entries) in json.tables.iter().enumerate() {
        let qn = base.question_alphabet(t).len();
        let an = base.answer_alphabet(t).len();
        let mut table = BTreeMap::new();
        for e in entries {
            if e.question.len() != n || e.answer.len() != n {
                bail!("player {}: entries must have {n} coordinates", t + 1);
            }
            let q: Vec<SymId> = e
                .question
                .iter()
                .map(|s| intern(base.question_alphabet(t), s, "question"))
                .collect::<Result<_>>()?;
            let a: Vec<SymId> = e
                .answer
                .iter()
                .map(|s| intern(base.answer_alphabet(t), s, "answer"))
                .collect::<Result<_>>()?;
            if table
                .insert(encode_vec(&q, qn), encode_vec(&a, an))
                .is_some()
            {
                bail!("player {}: duplicate question entry", t + 1);
            }
        }
        tables.push(table);
    }
    Ok(Strategy::new(tables))
}

/// Renders a strategy of `repeat(base, n)` in base-game symbols.
pub fn strategy_to_json(base: &Game, n: usize, strategy: &Strategy) -> StrategyFileJson {
    let tables = strategy
        .tables()
        .iter()
        .enumerate()
        .map(|(t, table)| {
            let qn = base.question_alphabet(t).len();
            let an = base.answer_alphabet(t).len();
            table
                .iter()
                .map(|(&q, &a)| StrategyEntry {
                    question: decode_vec(q, qn, n)
                        .into_iter()
                        .map(|id| base.question_alphabet(t)[id as usize].clone())
                        .collect(),
                    answer: decode_vec(a, an, n)
                        .into_iter()
                        .map(|id| base.answer_alphabet(t)[id as usize].clone())
                        .collect(),
                })
                .collect()
        })
        .collect();
    StrategyFileJson {
        schema_version: GAME_FILE_SCHEMA,
        players: base.players(),
        reps: n,
        tables,
    }
}
