//! Command-line front end. Exit codes: 0 success, 1 domain error (bad
//! config, protocol violation, I/O), 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairtoss_core::baselines::MechanismKind;
use fairtoss_core::rng::Purpose;
use fairtoss_core::sim::ScenarioConfig;
use fairtoss_core::{
    execute_tpc, BonusRounding, ChooserBelief, ChooserStrategy, Event, MatchConditions, ProposerStrategy, ProtocolRng,
    TeamId, Transcript, Turn, ValuationModel,
};
use rand::TryRngCore;

use crate::error::{Error, Result};
use crate::io::{self, ReportFormat};
use crate::runner;
use crate::service::{self, SessionManager, Store};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "fairtoss",
    version,
    about = "Toss, propose, choose: a fair alternative to the cricket coin toss",
    long_about = None,
    after_help = "Set FAIRTOSS_LOG (error, warn, info, debug, trace) to control log output."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one toss, propose and choose protocol and print its transcript
    Toss(TossArgs),
    /// Run a Monte Carlo experiment from a scenario file
    Simulate(SimulateArgs),
    /// Compare mechanisms on shared conditions and shared random numbers
    Compare(CompareArgs),
    /// Start the HTTP session service for live two-captain tosses
    Serve(ServeArgs),
    /// Re-execute a recorded transcript and check it reproduces exactly
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Logistic,
    Linear,
    Score,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProposerArg {
    Truthful,
    Strategic,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChooserArg {
    Rational,
    Habitual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TurnArg {
    BatFirst,
    BowlFirst,
}

impl From<TurnArg> for Turn {
    fn from(t: TurnArg) -> Turn {
        match t {
            TurnArg::BatFirst => Turn::BatFirst,
            TurnArg::BowlFirst => Turn::BowlFirst,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoundingArg {
    WholeRuns,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Debug, Args)]
pub struct TossArgs {
    /// True advantage of batting first, in runs (negative favours bowling first)
    #[arg(long = "a", value_name = "RUNS", allow_negative_numbers = true)]
    pub advantage: f64,
    /// The two team labels; the first wins the toss on coin bit 0
    #[arg(long, value_name = "A,B", value_parser = parse_teams, default_value = "AUS,NZL")]
    pub teams: [String; 2],
    /// How captains turn a run edge into utility
    #[arg(long, value_enum, default_value_t = ModelArg::Logistic)]
    pub model: ModelArg,
    /// Logistic scale in runs (logistic model only)
    #[arg(long, value_name = "RUNS", allow_negative_numbers = true, default_value_t = 30.0)]
    pub sigma: f64,
    /// Standard deviation of each side's score
    #[arg(long, value_name = "RUNS", allow_negative_numbers = true, default_value_t = 40.0)]
    pub score_sd: f64,
    /// Spread of each captain's error in judging the advantage
    #[arg(long, value_name = "RUNS", allow_negative_numbers = true, default_value_t = 0.0)]
    pub noise_sd: f64,
    /// How the toss loser picks the bonus
    #[arg(long, value_enum, default_value_t = ProposerArg::Truthful)]
    pub proposer: ProposerArg,
    /// Bonus offered by the fixed proposer
    #[arg(long, value_name = "RUNS", allow_negative_numbers = true, default_value_t = 0.0)]
    pub bonus: f64,
    /// How the toss winner picks an option
    #[arg(long, value_enum, default_value_t = ChooserArg::Rational)]
    pub chooser: ChooserArg,
    /// Turn a habitual chooser favours [default: the advantageous turn]
    #[arg(long, value_enum, value_name = "TURN")]
    pub habit: Option<TurnArg>,
    /// Runs beyond indifference a habitual chooser gives up to keep its turn
    #[arg(long, value_name = "RUNS", allow_negative_numbers = true, default_value_t = 0.0)]
    pub stubbornness: f64,
    /// Strategic proposer's belief that the chooser is habitual
    #[arg(long, value_name = "P", allow_negative_numbers = true, default_value_t = 1.0)]
    pub confidence: f64,
    /// Round the proposed bonus to whole runs, or keep it exact
    #[arg(long, value_enum, default_value_t = RoundingArg::WholeRuns)]
    pub rounding: RoundingArg,
    /// Seed for the coin and the captains' views [default: system entropy]
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Print the transcript as canonical JSON
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON transcript to this file
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file (JSON)
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Override the scenario's seed
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Override the scenario's replication count
    #[arg(long, value_name = "N")]
    pub replications: Option<u64>,
    /// Write the report here instead of standard output
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Report format
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    /// Run replications on one thread
    #[arg(long)]
    pub serial: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Scenario files sharing conditions; repeat the flag, or give one file with --mechanisms
    #[arg(long, value_name = "PATH", required = true)]
    pub config: Vec<PathBuf>,
    /// Mechanisms to run on the first scenario (plain_toss, tpc, alternation, weaker_decides, auction)
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub mechanisms: Vec<MechanismKind>,
    /// Override the shared base seed
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Override every scenario's replication count
    #[arg(long, value_name = "N")]
    pub replications: Option<u64>,
    /// Write the comparison here instead of standard output
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Report format
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Port to listen on (0 picks a free port)
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Address to bind
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Directory keeping sessions across restarts [default: memory only]
    #[arg(long, value_name = "PATH")]
    pub store: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Transcript file (JSON)
    #[arg(value_name = "PATH")]
    pub path: PathBuf,
    /// Print the replayed transcript as canonical JSON
    #[arg(long)]
    pub json: bool,
}

fn parse_teams(text: &str) -> std::result::Result<[String; 2], String> {
    match text.split(',').map(str::trim).collect::<Vec<_>>()[..] {
        [a, b] if !a.is_empty() && !b.is_empty() && a != b => Ok([a.to_string(), b.to_string()]),
        _ => Err("expected two distinct labels separated by a comma".into()),
    }
}

/// Parse `argv` and run. Output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            log::debug!("{e:?}");
            let _ = writeln!(err, "error: {e}");
            EXIT_DOMAIN
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Toss(args) => toss(args, out),
        Command::Simulate(args) => simulate(args, out),
        Command::Compare(args) => compare(args, out),
        Command::Serve(args) => serve(args),
        Command::Replay(args) => replay(args, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn entropy_seed() -> Result<u64> {
    rand::rngs::OsRng
        .try_next_u64()
        .map_err(|e| Error::io("<system entropy>", std::io::Error::other(e)))
}

fn toss(args: TossArgs, out: &mut dyn Write) -> Result<()> {
    let teams = args.teams.map(TeamId::new);
    let model = match args.model {
        ModelArg::Logistic => ValuationModel::LogisticWinProb { sigma: args.sigma },
        ModelArg::Linear => ValuationModel::LinearRuns,
        ModelArg::Score => ValuationModel::ScoreSimulation {
            score_sd: args.score_sd,
        },
    };
    model.validate()?;
    let conditions = MatchConditions::new(args.advantage, args.noise_sd, 160.0, args.score_sd)?;
    let habit: Turn = args
        .habit
        .map(Turn::from)
        .unwrap_or_else(|| Turn::advantageous_for(args.advantage));
    let proposer = match args.proposer {
        ProposerArg::Truthful => ProposerStrategy::Truthful,
        ProposerArg::Fixed => ProposerStrategy::Fixed { bonus: args.bonus },
        ProposerArg::Strategic => ProposerStrategy::Strategic {
            belief: ChooserBelief {
                bias_turn: habit,
                stubbornness: args.stubbornness,
                confidence: args.confidence,
            },
            grid_step: fairtoss_core::strategies::DEFAULT_GRID_STEP,
        },
    };
    proposer.validate()?;
    let chooser = match args.chooser {
        ChooserArg::Rational => ChooserStrategy::Rational,
        ChooserArg::Habitual => ChooserStrategy::Habitual {
            turn: habit,
            stubbornness: args.stubbornness,
        },
    };
    chooser.validate()?;
    let rounding = match args.rounding {
        RoundingArg::WholeRuns => BonusRounding::WholeRuns,
        RoundingArg::Exact => BonusRounding::Exact,
    };

    let seed = match args.seed {
        Some(seed) => seed,
        None => entropy_seed()?,
    };
    let mut view_rng = ProtocolRng::substream(seed, 0, 0, Purpose::Views)?;
    let views = [
        conditions.draw_view(teams[0].clone(), model, &mut view_rng),
        conditions.draw_view(teams[1].clone(), model, &mut view_rng),
    ];
    let transcript = execute_tpc(teams, &views, &proposer, &chooser, rounding, &mut ProtocolRng::new(seed))?;

    if let Some(path) = &args.out {
        io::write_transcript(&transcript, path)?;
    }
    if args.json {
        emit(out, &io::to_canonical_json(&transcript))
    } else {
        emit(out, &describe_transcript(&transcript))
    }
}

/// Human-readable rendering of a finished run.
pub fn describe_transcript(t: &Transcript) -> String {
    let mut lines = Vec::new();
    for event in &t.events {
        match event {
            Event::Tossed {
                lucky,
                coin_draw,
                seed_trace,
                ..
            } => lines.push(format!(
                "toss     {lucky} wins the toss (coin {coin_draw}; seed {}, stream {})",
                seed_trace.seed, seed_trace.stream
            )),
            Event::Proposed {
                by,
                bonus,
                solved_bonus,
                ..
            } => {
                let solved = match solved_bonus {
                    Some(s) if s != bonus => format!(" (indifference point {s:.3})"),
                    _ => String::new(),
                };
                lines.push(format!("propose  {by} offers {} bonus runs{solved}", runs(*bonus)));
                lines.push(format!("           option 1: {}", bundle(&t.proposal.option1)));
                lines.push(format!("           option 2: {}", bundle(&t.proposal.option2)));
            }
            Event::Chosen { by, option } => lines.push(format!("choose   {by} takes option {}", u8::from(*option))),
        }
    }
    let a = &t.allocation;
    let first = a.first_batter();
    let result = match &a.bonus_recipient {
        Some(recipient) => format!(
            "result   {first} bats first; {recipient} receives {} bonus runs",
            runs(a.bonus_runs)
        ),
        None => format!("result   {first} bats first; no bonus runs"),
    };
    lines.push(result);
    let mut text = lines.join("\n");
    text.push('\n');
    text
}

fn runs(r: f64) -> String {
    if r.fract() == 0.0 {
        format!("{r:.0}")
    } else {
        format!("{r:.3}")
    }
}

fn bundle(b: &fairtoss_core::OptionBundle) -> String {
    if b.bonus_delta < 0.0 {
        format!("{}, concede {} runs", b.turn, runs(-b.bonus_delta))
    } else if b.bonus_delta > 0.0 {
        format!("{}, receive {} runs", b.turn, runs(b.bonus_delta))
    } else {
        format!("{}, no bonus", b.turn)
    }
}

fn apply_overrides(config: &mut ScenarioConfig, seed: Option<u64>, replications: Option<u64>) -> Result<()> {
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(n) = replications {
        config.replications = n;
    }
    config.validate()?;
    Ok(())
}

fn write_or_print<R: io::Report>(report: &R, out_path: Option<&PathBuf>, format: ReportFormat, out: &mut dyn Write) -> Result<()> {
    match out_path {
        Some(path) => {
            io::write_report(report, path, format)?;
            emit(out, &format!("wrote {format} report to {}\n", path.display()))
        }
        None => emit(out, &io::render_report(report, format)),
    }
}

fn simulate(args: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = io::load_config(&args.config)?;
    apply_overrides(&mut config, args.seed, args.replications)?;
    let report = if args.serial {
        fairtoss_core::sim::run_experiment(&config)?
    } else {
        runner::run_experiment_parallel(&config)?
    };
    write_or_print(&report, args.out.as_ref(), args.format.into(), out)
}

fn compare(args: CompareArgs, out: &mut dyn Write) -> Result<()> {
    let mut configs = args
        .config
        .iter()
        .map(io::load_config)
        .collect::<Result<Vec<_>>>()?;
    if !args.mechanisms.is_empty() {
        let base = configs[0].clone();
        configs = args.mechanisms.iter().map(|&kind| base.with_mechanism(kind)).collect();
    }
    for config in &mut configs {
        apply_overrides(config, args.seed, args.replications)?;
    }
    let table = runner::compare_mechanisms_parallel(&configs)?;
    write_or_print(&table, args.out.as_ref(), args.format.into(), out)
}

fn serve(args: ServeArgs) -> Result<()> {
    let store = match &args.store {
        Some(path) => Store::directory(path)?,
        None => Store::Memory,
    };
    let manager = Arc::new(SessionManager::open(store)?);
    log::info!("loaded {} sessions", manager.len());
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io("<runtime>", e))?;
    runtime.block_on(service::serve(SocketAddr::new(args.host, args.port), manager))
}

fn replay(args: ReplayArgs, out: &mut dyn Write) -> Result<()> {
    let transcript = io::read_transcript(&args.path)?;
    let replayed = transcript.replay().map_err(|source| Error::InFile {
        path: args.path.clone(),
        source,
    })?;
    if args.json {
        emit(out, &io::to_canonical_json(&replayed))
    } else {
        emit(out, &describe_transcript(&replayed))
    }
}

/// Entry point for the binary: initialise logging and run.
pub fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FAIRTOSS_LOG", "warn")).init();
    let code = run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::ExitCode::from(code as u8)
}
