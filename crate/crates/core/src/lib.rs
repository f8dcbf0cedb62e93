//! Exact analysis of k-player one-round games: game construction and
//! transforms (anchoring, parallel repetition), exhaustive value search,
//! connection graphs and their expansion, congestion certificates, decay
//! bounds, and the strategy-rounding simulator.

pub mod bounds;
pub mod congestion;
pub mod corpus;
pub mod game;
pub mod graph;
pub mod rat;
pub mod rounding;
pub mod spectral;
pub mod value;

pub use game::{
    anchor, build_free_uniform, build_ghz, repeat, validate, Game, GameError, Predicate,
    Strategy, SymId, ANCHOR_SYMBOL,
};
pub use graph::{build_connection_graph, ConnectionGraph};
pub use rat::{format_rat, parse_rat, Rat};
pub use value::{game_value, win_probability, Method, SearchOptions, ValueResult};
