//! The `eqsynth` command line.
//!
//! Exit codes: 0 success (a threshold that does not hold is a result, not
//! an error), 2 unreadable input or bad usage, 3 solver failure, 4 a state
//! can avoid an unbounded objective's target, 5 value iteration did not
//! converge.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use eqsynth_core::checker::{check_property, CheckOutput, CheckerConfig, Method};
use eqsynth_core::correlated::{solve_ce, solve_cost_ce, solve_swce};
use eqsynth_core::csg::Csg;
use eqsynth_core::nash::{enumerate_ne_2p, select_optimal_ne, solve_ne, NeResult};
use eqsynth_core::nfg::{expected_utility_profile, negate_utilities, spread, welfare, NormalFormGame};
use eqsynth_core::property::parse_property;
use eqsynth_core::simulate::{simulate, SimulationConfig};
use eqsynth_core::{Criterion, Error};

use crate::formats::{read_csg, read_nfg, read_strategy, write_strategy};

#[derive(Debug, Parser)]
#[command(name = "eqsynth", version, about = "Optimal Nash and correlated equilibria for normal form and concurrent stochastic games")]
struct Cli {
    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Eq {
    Ne,
    Ce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Crit {
    Sw,
    Sf,
}

impl From<Crit> for Criterion {
    fn from(c: Crit) -> Self {
        match c {
            Crit::Sw => Criterion::SocialWelfare,
            Crit::Sf => Criterion::SocialFairness,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal equilibrium of a normal form game.
    NfgSolve(NfgSolve),
    /// Check an equilibrium property on a concurrent stochastic game.
    CsgCheck(CsgCheck),
    /// Estimate the values of a synthesized strategy by simulation.
    CsgSimulate(CsgSimulate),
    /// Time social-welfare NE and CE computation on random games.
    Bench(Bench),
}

#[derive(Debug, Args)]
struct NfgSolve {
    #[arg(long)]
    game: PathBuf,
    #[arg(long, value_enum)]
    eq: Eq,
    #[arg(long, value_enum)]
    crit: Crit,
    /// Treat utilities as costs that players minimise.
    #[arg(long)]
    minimize: bool,
}

#[derive(Debug, Args)]
struct CsgCheck {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    prop: String,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    /// Write the synthesized strategy to this file.
    #[arg(long)]
    synth: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CsgSimulate {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    strategy: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Step limit per run (default 100 times the number of states).
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Debug, Args)]
struct Bench {
    #[arg(long, default_value_t = 2)]
    players: usize,
    #[arg(long, default_value_t = 4)]
    actions: usize,
    #[arg(long, default_value_t = 20)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. }
            | Error::Shape(_)
            | Error::Distribution(_)
            | Error::InvalidGame(_)
            | Error::InvalidModel(_)
            | Error::InvalidPartition(_) => 2,
            Error::AssumptionViolated { .. } => 4,
            Error::NotConverged { .. } => 5,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn in_file(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}

/// Runs the command line `args` (program name first), writing results to
/// `out` and diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Failure {
            code: 2,
            message: "--threads must be at least 1".into(),
        }),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Failure {
                code: 3,
                message: format!("cannot start {n} threads: {e}"),
            }),
        },
        None => dispatch(&cli),
    };
    let result = result.and_then(|text| {
        out.write_all(text.as_bytes()).map_err(|e| Failure {
            code: 3,
            message: format!("cannot write output: {e}"),
        })
    });
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: &Cli) -> Result<String, Failure> {
    match &cli.command {
        Command::NfgSolve(c) => nfg_solve(c, cli.format),
        Command::CsgCheck(c) => csg_check(c, cli.format),
        Command::CsgSimulate(c) => csg_simulate(c, cli.format),
        Command::Bench(c) => Ok(bench(c, cli.format)),
    }
}

fn json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("output documents always serialize");
    s.push('\n');
    s
}

fn fmt_values(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(" ")
}

// nfg-solve

#[derive(Debug, Serialize)]
struct NfgDoc {
    schema: &'static str,
    eq: &'static str,
    crit: &'static str,
    minimize: bool,
    values: Vec<f64>,
    welfare: f64,
    spread: f64,
    witness: WitnessDoc,
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum WitnessDoc {
    /// One distribution per player.
    Profile { strategies: Vec<Vec<Weighted>> },
    /// One distribution over joint actions.
    Joint { support: Vec<Weighted> },
}

#[derive(Debug, Serialize)]
struct Weighted {
    actions: Vec<String>,
    p: f64,
}

fn nfg_solve(cmd: &NfgSolve, format: Format) -> Result<String, Failure> {
    let game = read_nfg(&read(&cmd.game)?).map_err(in_file(&cmd.game))?;
    let crit = Criterion::from(cmd.crit);
    let (values, witness) = match cmd.eq {
        Eq::Ce => {
            let r = if cmd.minimize { solve_cost_ce(&game, crit)? } else { solve_ce(&game, crit)? };
            let support = r
                .joint
                .probs()
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(j, &p)| Weighted {
                    actions: game
                        .decode(j)
                        .iter()
                        .enumerate()
                        .map(|(i, &a)| game.action_name(i, a).into_owned())
                        .collect(),
                    p,
                })
                .collect();
            (r.values, WitnessDoc::Joint { support })
        }
        Eq::Ne => {
            let solved = if cmd.minimize {
                solve_ne(&negate_utilities(&game), crit)?
            } else {
                solve_ne(&game, crit)?
            };
            let r = solved.ok_or(Failure {
                code: 3,
                message: "no Nash equilibrium found".into(),
            })?;
            let values = expected_utility_profile(&game, &r.profile)?;
            let strategies = (0..game.num_players())
                .map(|i| {
                    r.profile
                        .strategy(i)
                        .iter()
                        .enumerate()
                        .filter(|(_, &p)| p > 0.0)
                        .map(|(a, &p)| Weighted {
                            actions: vec![game.action_name(i, a).into_owned()],
                            p,
                        })
                        .collect()
                })
                .collect();
            (values, WitnessDoc::Profile { strategies })
        }
    };
    let doc = NfgDoc {
        schema: "eqsynth.nfg-solve/1",
        eq: if cmd.eq == Eq::Ce { "ce" } else { "ne" },
        crit: if cmd.crit == Crit::Sw { "sw" } else { "sf" },
        minimize: cmd.minimize,
        welfare: welfare(&values),
        spread: spread(&values),
        values,
        witness,
    };
    if format == Format::Json {
        return Ok(json(&doc));
    }
    let mut s = format!(
        "values  {}\nwelfare {:.6}\nspread  {:.6}\n",
        fmt_values(&doc.values),
        doc.welfare,
        doc.spread
    );
    match &doc.witness {
        WitnessDoc::Joint { support } => {
            s.push_str("joint strategy\n");
            for w in support {
                s.push_str(&format!("  {:.6}  ({})\n", w.p, w.actions.join(",")));
            }
        }
        WitnessDoc::Profile { strategies } => {
            for (i, dist) in strategies.iter().enumerate() {
                let parts: Vec<String> = dist.iter().map(|w| format!("{} {:.6}", w.actions[0], w.p)).collect();
                s.push_str(&format!("player {}  {}\n", i + 1, parts.join(", ")));
            }
        }
    }
    Ok(s)
}

// csg-check

#[derive(Debug, Serialize)]
struct CheckDoc {
    schema: &'static str,
    property: String,
    method: &'static str,
    iterations: usize,
    residual: f64,
    initial: Vec<InitialDoc>,
    strategy: Option<String>,
}

#[derive(Debug, Serialize)]
struct InitialDoc {
    state: usize,
    values: Vec<f64>,
    sum: f64,
    verdict: Option<bool>,
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::BackwardInduction => "backward-induction",
        Method::ValueIteration => "value-iteration",
        Method::Transformed => "counter-product-value-iteration",
    }
}

fn csg_check(cmd: &CsgCheck, format: Format) -> Result<String, Failure> {
    let csg = read_csg(&read(&cmd.model)?).map_err(in_file(&cmd.model))?;
    let property = parse_property(&cmd.prop, Some(csg.num_players())).map_err(|e| {
        let mut f = Failure::from(e);
        f.code = 2;
        f.message = format!("property: {}", f.message);
        f
    })?;
    if !(cmd.epsilon > 0.0) {
        return Err(Failure {
            code: 2,
            message: "--epsilon must be positive".into(),
        });
    }
    let config = CheckerConfig {
        epsilon: cmd.epsilon,
        max_iterations: cmd.max_iters,
        synthesize: cmd.synth.is_some(),
        ..CheckerConfig::default()
    };
    let output = check_property(&csg, &property, &config).map_err(|e| match e {
        // unknown labels and reward names are a mismatch between inputs
        Error::InvalidModel(m) => Failure {
            code: 2,
            message: format!("property: {m}"),
        },
        other => other.into(),
    })?;
    if let (Some(path), Some(strategy)) = (&cmd.synth, &output.strategy) {
        let text = write_strategy(&csg, strategy)?;
        std::fs::write(path, text).map_err(|e| Failure {
            code: 3,
            message: format!("{}: {e}", path.display()),
        })?;
    }
    let doc = check_doc(&property.to_string(), &output, cmd.synth.as_deref());
    if format == Format::Json {
        return Ok(json(&doc));
    }
    let mut s = format!("property  {}\nmethod    {}", doc.property, doc.method.replace('-', " "));
    if output.method != Method::BackwardInduction {
        s.push_str(&format!(
            " ({} iteration{}, residual {:.3e})",
            doc.iterations,
            if doc.iterations == 1 { "" } else { "s" },
            doc.residual
        ));
    }
    s.push('\n');
    for init in &doc.initial {
        s.push_str(&format!("state {}  values {}  sum {:.6}", init.state, fmt_values(&init.values), init.sum));
        if let Some(v) = init.verdict {
            s.push_str(&format!("  {}", if v { "true" } else { "false" }));
        }
        s.push('\n');
    }
    if let Some(p) = &doc.strategy {
        s.push_str(&format!("strategy written to {p}\n"));
    }
    Ok(s)
}

fn check_doc(property: &str, output: &CheckOutput, synth: Option<&Path>) -> CheckDoc {
    CheckDoc {
        schema: "eqsynth.csg-check/1",
        property: property.to_string(),
        method: method_name(output.method),
        iterations: output.iterations,
        residual: output.residual,
        initial: output
            .initial
            .iter()
            .map(|r| InitialDoc {
                state: r.state,
                values: r.values.clone(),
                sum: r.evaluation.sum,
                verdict: r.evaluation.verdict,
            })
            .collect(),
        strategy: synth.map(|p| p.display().to_string()),
    }
}

// csg-simulate

#[derive(Debug, Serialize)]
struct SimulationDoc {
    schema: &'static str,
    samples: usize,
    seed: u64,
    horizon: usize,
    reports: Vec<SimulatedState>,
}

#[derive(Debug, Serialize)]
struct SimulatedState {
    state: usize,
    means: Vec<f64>,
    /// `null` when fewer than two samples were taken.
    half_widths: Vec<f64>,
    truncated: usize,
}

fn csg_simulate(cmd: &CsgSimulate, format: Format) -> Result<String, Failure> {
    let csg: Csg = read_csg(&read(&cmd.model)?).map_err(in_file(&cmd.model))?;
    let strategy = read_strategy(&read(&cmd.strategy)?, &csg).map_err(in_file(&cmd.strategy))?;
    if cmd.samples == 0 || cmd.horizon == Some(0) {
        return Err(Failure {
            code: 2,
            message: "--samples and --horizon must be at least 1".into(),
        });
    }
    let config = SimulationConfig {
        samples: cmd.samples,
        seed: cmd.seed,
        horizon: cmd.horizon,
    };
    let reports = csg
        .initial_states()
        .iter()
        .map(|&s| simulate(&csg, &strategy, s, &config))
        .collect::<Result<Vec<_>, Error>>()?;
    let doc = SimulationDoc {
        schema: "eqsynth.csg-simulate/1",
        samples: cmd.samples,
        seed: cmd.seed,
        horizon: cmd.horizon.unwrap_or(100 * csg.num_states()),
        reports: reports
            .into_iter()
            .map(|r| SimulatedState {
                state: r.state,
                means: r.means,
                half_widths: r.half_widths,
                truncated: r.truncated,
            })
            .collect(),
    };
    if format == Format::Json {
        return Ok(json(&doc));
    }
    let mut s = format!("samples {}  seed {}  step limit {}\n", doc.samples, doc.seed, doc.horizon);
    for r in &doc.reports {
        let parts: Vec<String> = r.means.iter().zip(&r.half_widths).map(|(m, h)| format!("{m:.6} ± {h:.6}")).collect();
        s.push_str(&format!("state {}  {}", r.state, parts.join("  ")));
        if r.truncated > 0 {
            s.push_str(&format!("  ({} runs hit the step limit)", r.truncated));
        }
        s.push('\n');
    }
    Ok(s)
}

// bench

#[derive(Debug, Serialize)]
struct BenchDoc {
    schema: &'static str,
    players: usize,
    actions: usize,
    seed: u64,
    rows: Vec<BenchRow>,
}

#[derive(Debug, Serialize)]
struct BenchRow {
    solver: &'static str,
    games: usize,
    /// `null` when the solver is not run at this size.
    median_ms: Option<f64>,
}

/// Seeded games with utilities drawn uniformly from `[0, 1)`.
pub fn random_games(players: usize, actions: usize, count: usize, seed: u64) -> Vec<NormalFormGame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            NormalFormGame::from_fn(vec![actions; players], |_| (0..players).map(|_| rng.random::<f64>()).collect())
                .expect("positive action counts")
        })
        .collect()
}

pub fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 { xs[n / 2] } else { (xs[n / 2 - 1] + xs[n / 2]) / 2.0 })
}

/// Social-welfare NE by enumerating every equilibrium then selecting.
pub fn swne_2p(game: &NormalFormGame) -> Result<Option<NeResult>, Error> {
    let all = enumerate_ne_2p(game)?;
    if all.is_empty() {
        return Ok(None);
    }
    select_optimal_ne(&all, Criterion::SocialWelfare).map(Some)
}

fn bench(cmd: &Bench, format: Format) -> String {
    let games = if cmd.players == 0 || cmd.actions == 0 {
        Vec::new()
    } else {
        random_games(cmd.players, cmd.actions, cmd.count, cmd.seed)
    };
    let time = |f: &dyn Fn(&NormalFormGame)| -> Vec<f64> {
        games
            .iter()
            .map(|g| {
                let t = Instant::now();
                f(g);
                t.elapsed().as_secs_f64() * 1e3
            })
            .collect()
    };
    let mut rows = Vec::new();
    if !games.is_empty() {
        let ne = (cmd.players == 2).then(|| {
            time(&|g| {
                let _ = swne_2p(g);
            })
        });
        let ce = time(&|g| {
            let _ = solve_swce(g);
        });
        rows.push(BenchRow {
            solver: "SWNE",
            games: ne.as_ref().map_or(0, Vec::len),
            median_ms: ne.and_then(median),
        });
        rows.push(BenchRow {
            solver: "SWCE",
            games: ce.len(),
            median_ms: median(ce),
        });
    }
    let doc = BenchDoc {
        schema: "eqsynth.bench/1",
        players: cmd.players,
        actions: cmd.actions,
        seed: cmd.seed,
        rows,
    };
    if format == Format::Json {
        return json(&doc);
    }
    let mut s = format!("{} players, {} actions each\nsolver  games  median ms\n", doc.players, doc.actions);
    for r in &doc.rows {
        let median = r.median_ms.map_or_else(
            || "unsupported (two players only)".to_string(),
            |m| format!("{m:.3}"),
        );
        s.push_str(&format!("{:<6}  {:>5}  {median}\n", r.solver, r.games));
    }
    s
}
