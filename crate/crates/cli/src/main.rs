//! parrep: exact analysis of k-player one-round games from the command line.
//!
//! Subcommands: validate | graph | spectral | congestion | value | bound |
//! anchor | repeat | roundsim. Games come from files or builtin generators,
//! composable with `--anchor` / `--reps` transforms applied in flag order.
//! Reports are deterministic JSON; exit code 0 means every asserted check
//! passed, 1 is an analysis failure, 2 a usage error.

mod commands;
mod gamefile;
mod report;

use anyhow::{anyhow, bail, Result};
use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};

use gamefile::{GameFileJson, Transform};
use parrep_core::game::Game;
use parrep_core::rat::parse_rat;
use parrep_core::value::SearchOptions;

fn source_args(cmd: Command, reps_is_transform: bool) -> Command {
    let cmd = cmd
        .arg(
            Arg::new("game")
                .long("game")
                .value_name("PATH")
                .help("Load the game from a structured game file"),
        )
        .arg(
            Arg::new("gen")
                .long("gen")
                .value_name("NAME")
                .value_parser(["ghz", "free"])
                .help("Generate a builtin game"),
        )
        .arg(
            Arg::new("k")
                .long("k")
                .value_parser(value_parser!(usize))
                .default_value("3")
                .help("Players for --gen free"),
        )
        .arg(
            Arg::new("d")
                .long("d")
                .value_parser(value_parser!(usize))
                .default_value("2")
                .help("Question alphabet size for --gen free"),
        )
        .arg(
            Arg::new("anchor")
                .long("anchor")
                .value_name("A/B")
                .action(ArgAction::Append)
                .help("Anchoring transform; repeatable, applied in flag order"),
        );
    let cmd = if reps_is_transform {
        cmd.arg(
            Arg::new("reps")
                .long("reps")
                .value_name("N")
                .action(ArgAction::Append)
                .value_parser(value_parser!(usize))
                .help("Parallel-repetition transform; repeatable, applied in flag order"),
        )
    } else {
        cmd
    };
    cmd.arg(
        Arg::new("threads")
            .long("threads")
            .value_parser(value_parser!(usize))
            .default_value("1")
            .help("Worker threads for the value search (reports do not depend on this)"),
    )
    .arg(
        Arg::new("budget")
            .long("budget")
            .value_parser(value_parser!(u128))
            .default_value("4294967296")
            .help("Cap on enumerated partial strategies"),
    )
    .arg(
        Arg::new("tol")
            .long("tol")
            .value_parser(value_parser!(f64))
            .default_value("1e-8")
            .help("Tolerance for floating-point inequality checks"),
    )
    .arg(
        Arg::new("out")
            .long("out")
            .value_name("PATH")
            .help("Write the output to a file instead of stdout"),
    )
}

fn cli() -> Command {
    Command::new("parrep")
        .about("Exact analysis of k-player one-round games: values under parallel repetition, connection-graph expansion, decay bounds, and strategy rounding")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(source_args(
            Command::new("validate").about("Check every game invariant and list violations"),
            true,
        ))
        .subcommand(source_args(
            Command::new("graph")
                .about("Build the connection graph: vertices, weights, components, rho_min"),
            true,
        ))
        .subcommand(source_args(
            Command::new("spectral")
                .about("Normalized Laplacian, second eigenvalue, certified lower bounds"),
            true,
        ))
        .subcommand(source_args(
            Command::new("congestion")
                .about("Canonical paths and the congestion certificate of an anchored game"),
            true,
        ))
        .subcommand(
            source_args(
                Command::new("value").about("Exact game value by exhaustive search"),
                true,
            )
            .arg(
                Arg::new("method")
                    .long("method")
                    .value_parser(["plain", "best-response", "both"])
                    .default_value("best-response")
                    .help("Search method"),
            )
            .arg(
                Arg::new("seq")
                    .long("seq")
                    .value_name("N_MAX")
                    .value_parser(value_parser!(usize))
                    .help("Also compute the value sequence for 1..=N_MAX repetitions"),
            ),
        )
        .subcommand(
            source_args(
                Command::new("bound").about("Evaluate the exponential decay bound"),
                false,
            )
            .arg(
                Arg::new("reps")
                    .long("reps")
                    .value_name("N")
                    .value_parser(value_parser!(u64))
                    .required(true)
                    .help("Repetition count the bound is evaluated at"),
            )
            .arg(
                Arg::new("c")
                    .long("c")
                    .value_parser(value_parser!(f64))
                    .default_value("1")
                    .help("The universal constant (a run parameter)"),
            )
            .arg(
                Arg::new("epsilon")
                    .long("epsilon")
                    .value_name("A/B")
                    .help("Override epsilon = 1 - val(G) instead of searching"),
            )
            .arg(
                Arg::new("lambda")
                    .long("lambda")
                    .value_parser(value_parser!(f64))
                    .help("Override the spectral gap instead of solving"),
            )
            .arg(
                Arg::new("seq")
                    .long("seq")
                    .value_name("N_MAX")
                    .value_parser(value_parser!(usize))
                    .help("Measure val(G^n) for n = 1..=N_MAX and report the largest admissible c"),
            ),
        )
        .subcommand(
            source_args(
                Command::new("anchor").about("Emit the anchored game as a game file"),
                true,
            )
            .arg(
                Arg::new("alpha")
                    .long("alpha")
                    .value_name("A/B")
                    .required(true)
                    .help("Anchoring probability in (0,1)"),
            ),
        )
        .subcommand(
            source_args(
                Command::new("repeat").about("Emit the n-fold repeated game as a game file"),
                true,
            )
            .arg(
                Arg::new("n")
                    .long("n")
                    .value_parser(value_parser!(usize))
                    .required(true)
                    .help("Number of repetitions"),
            ),
        )
        .subcommand(
            source_args(
                Command::new("roundsim")
                    .about("Run the strategy-rounding pipeline on the repeated game"),
                false,
            )
            .arg(
                Arg::new("reps")
                    .long("reps")
                    .value_name("N")
                    .value_parser(value_parser!(usize))
                    .required(true)
                    .help("Number of repetitions simulated"),
            )
            .arg(
                Arg::new("strategy")
                    .long("strategy")
                    .default_value("optimal")
                    .help("optimal | coordinatewise | coupled | file:PATH"),
            )
            .arg(
                Arg::new("subset")
                    .long("subset")
                    .default_value("auto")
                    .help("auto | none | comma-separated 1-indexed coordinates"),
            )
            .arg(
                Arg::new("epsilon")
                    .long("epsilon")
                    .value_name("A/B")
                    .help("Override epsilon = 1 - val(G)"),
            )
            .arg(
                Arg::new("csv")
                    .long("csv")
                    .value_name("PATH")
                    .help("Write per-(i, x) distances as CSV"),
            )
            .arg(
                Arg::new("strategy-out")
                    .long("strategy-out")
                    .value_name("PATH")
                    .help("Write the strategy used by the run as a strategy file"),
            ),
        )
}

/// A resolved game source: the base game, its canonical file form, the
/// ordered transform list, and the input digest.
pub struct Loaded {
    pub base: Game,
    pub base_json: GameFileJson,
    pub transforms: Vec<Transform>,
    pub source_desc: String,
    pub digest: String,
}

impl Loaded {
    pub fn analyzed(&self) -> Result<Game> {
        gamefile::apply_transforms(self.base.clone(), &self.transforms)
    }

    pub fn transform_desc(&self) -> Vec<String> {
        self.transforms.iter().map(|t| t.describe()).collect()
    }
}

/// CLI transforms in flag order, interleaving --anchor and --reps by their
/// positions on the command line.
fn cli_transforms(m: &ArgMatches, reps_is_transform: bool) -> Result<Vec<Transform>> {
    let mut tagged: Vec<(usize, Transform)> = Vec::new();
    if let Some(values) = m.get_many::<String>("anchor") {
        let indices: Vec<usize> = m.indices_of("anchor").unwrap().collect();
        for (v, idx) in values.zip(indices) {
            let a = parse_rat(v).map_err(|e| anyhow!("--anchor: {e}"))?;
            tagged.push((idx, Transform::Anchor(a)));
        }
    }
    if reps_is_transform {
        if let Some(values) = m.get_many::<usize>("reps") {
            let indices: Vec<usize> = m.indices_of("reps").unwrap().collect();
            for (v, idx) in values.zip(indices) {
                tagged.push((idx, Transform::Repeat(*v)));
            }
        }
    }
    tagged.sort_by_key(|(idx, _)| *idx);
    Ok(tagged.into_iter().map(|(_, t)| t).collect())
}

pub fn load_source(m: &ArgMatches, reps_is_transform: bool) -> Result<Loaded> {
    let cli_t = cli_transforms(m, reps_is_transform)?;
    let (base, base_json, mut transforms, source_desc, digest) =
        match (m.get_one::<String>("game"), m.get_one::<String>("gen")) {
            (Some(_), Some(_)) => bail!("--game and --gen are mutually exclusive"),
            (Some(path), None) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| anyhow!("cannot read {path}: {e}"))?;
                let digest = report::sha256_hex(text.as_bytes());
                let (json, game, transforms) = gamefile::parse_game_file(&text)?;
                (game, json, transforms, format!("file:{path}"), digest)
            }
            (None, Some(gen)) => {
                let game = match gen.as_str() {
                    "ghz" => parrep_core::build_ghz(),
                    "free" => {
                        let k = *m.get_one::<usize>("k").unwrap();
                        let d = *m.get_one::<usize>("d").unwrap();
                        parrep_core::build_free_uniform(k, d)?
                    }
                    _ => unreachable!(),
                };
                let json = gamefile::game_to_json(&game)?;
                let digest = report::sha256_hex(gamefile::render_game_file(&json).as_bytes());
                let desc = if gen == "free" {
                    format!(
                        "gen:free(k={},d={})",
                        m.get_one::<usize>("k").unwrap(),
                        m.get_one::<usize>("d").unwrap()
                    )
                } else {
                    format!("gen:{gen}")
                };
                (game, json, Vec::new(), desc, digest)
            }
            (None, None) => bail!("a game source is required: --game PATH or --gen NAME"),
        };
    transforms.extend(cli_t);
    Ok(Loaded {
        base,
        base_json,
        transforms,
        source_desc,
        digest,
    })
}

pub fn search_options(m: &ArgMatches) -> SearchOptions {
    SearchOptions {
        budget: *m.get_one::<u128>("budget").unwrap(),
        threads: *m.get_one::<usize>("threads").unwrap(),
    }
}

fn emit(m: &ArgMatches, text: &str) -> Result<()> {
    match m.get_one::<String>("out") {
        Some(path) => std::fs::write(path, text).map_err(|e| anyhow!("cannot write {path}: {e}")),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run() -> Result<i32> {
    let matches = cli().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let (text, failed) = match name {
        "validate" => commands::cmd_validate(sub)?,
        "graph" => commands::cmd_graph(sub)?,
        "spectral" => commands::cmd_spectral(sub)?,
        "congestion" => commands::cmd_congestion(sub)?,
        "value" => commands::cmd_value(sub)?,
        "bound" => commands::cmd_bound(sub)?,
        "anchor" => commands::cmd_anchor(sub)?,
        "repeat" => commands::cmd_repeat(sub)?,
        "roundsim" => commands::cmd_roundsim(sub)?,
        _ => unreachable!(),
    };
    emit(sub, &text)?;
    Ok(if failed { 1 } else { 0 })
}

fn main() {
    match run() {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
