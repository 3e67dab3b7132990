//! The `qdice` command-line front end.
//!
//! Every subcommand emits one structured report with the top-level keys
//! `version`, `inputs`, `analytic`, `monte_carlo` and `bounds`; sections that
//! do not apply are `null`. Floating-point values are rounded to seven
//! significant digits. CSV output carries only the Monte Carlo table.
//!
//! Exit codes: 0 on success, 2 for invalid configuration, 3 when a solver
//! cannot bracket a root, 1 for I/O failures.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::adversary::{self, GridSpec};
use crate::dicer::{self, DiceCase, DiceReport, DiceScenario, LadderSpec, PartyReport, StageBiasVector, StageStrategies};
use crate::error::Error;
use crate::fairness::{self, BALANCED_BRACKET, CASE1_BRACKET, CASE2_BRACKET};
use crate::wcf::{self, CheatSpec, GeneralCheat, ProtocolParams, Winner};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
const SIGNIFICANT_DIGITS: usize = 7;
const DEFAULT_TRIALS: u64 = 100_000;

#[derive(Debug, Parser)]
#[command(name = "qdice", version, about = "Quantum coin flipping and dice rolling bias analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo run of one coin flip or a dice-rolling ladder.
    Simulate(Flags),
    /// Honest and optimal cheating values of one coin flip.
    Cheat(Flags),
    /// Solve a fairness condition.
    Solve(Flags),
    /// Check the composition bias bound for one party.
    BoundCheck(Flags),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Cheat(_) => "cheat",
            Command::Solve(_) => "solve",
            Command::BoundCheck(_) => "bound-check",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::Simulate(f) | Command::Cheat(f) | Command::Solve(f) | Command::BoundCheck(f) => f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheatKind {
    Honest,
    AliceDelta,
    AliceGeneral,
    BobClaimWin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveTarget {
    Balanced,
    #[value(name = "dice3-case1")]
    #[serde(rename = "dice3-case1")]
    Dice3Case1,
    #[value(name = "dice3-case2")]
    #[serde(rename = "dice3-case2")]
    Dice3Case2,
}

/// Flags shared by all subcommands. Each one may also come from `--config`,
/// a JSON file with the same keys as the report's `inputs` section.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_enum)]
    pub cheat: Option<CheatKind>,
    /// Real amplitudes ↑↑,↑↓,↓↑,↓↓ for `--cheat alice-general`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub alpha: Option<Vec<f64>>,
    /// Number of dice-rolling parties.
    #[arg(long)]
    pub dice: Option<usize>,
    /// All parties honest (the default for dice simulations).
    #[arg(long)]
    pub honest: bool,
    /// The single honest party; everyone else cheats with stage-optimal strategies.
    #[arg(long)]
    pub honest_party: Option<usize>,
    /// Second-stage implementation of the three-party protocol.
    #[arg(long)]
    pub case: Option<u8>,
    #[arg(long, value_enum)]
    pub target: Option<SolveTarget>,
    #[arg(long, value_delimiter = ',')]
    pub bracket: Option<Vec<f64>>,
    /// Party whose bias is checked by `bound-check`.
    #[arg(long)]
    pub party: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub biases: Option<Vec<f64>>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Resolved inputs, echoed into every report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    #[serde(default)]
    pub subcommand: Option<String>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub cheat: Option<CheatKind>,
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
    #[serde(default)]
    pub dice: Option<usize>,
    #[serde(default)]
    pub honest: Option<bool>,
    #[serde(default)]
    pub honest_party: Option<usize>,
    #[serde(default)]
    pub case: Option<u8>,
    #[serde(default)]
    pub target: Option<SolveTarget>,
    #[serde(default)]
    pub bracket: Option<Vec<f64>>,
    #[serde(default)]
    pub party: Option<usize>,
    #[serde(default)]
    pub biases: Option<Vec<f64>>,
    #[serde(default)]
    pub grid_points: Option<usize>,
    #[serde(default)]
    pub trials: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub format: Option<Format>,
}

impl Inputs {
    fn from_flags(subcommand: &str, flags: &Flags, base: Inputs) -> Inputs {
        Inputs {
            subcommand: Some(subcommand.to_string()),
            p: flags.p.or(base.p),
            eta: flags.eta.or(base.eta),
            delta: flags.delta.or(base.delta),
            cheat: flags.cheat.or(base.cheat),
            alpha: flags.alpha.clone().or(base.alpha),
            dice: flags.dice.or(base.dice),
            honest: if flags.honest { Some(true) } else { base.honest },
            honest_party: flags.honest_party.or(base.honest_party),
            case: flags.case.or(base.case),
            target: flags.target.or(base.target),
            bracket: flags.bracket.clone().or(base.bracket),
            party: flags.party.or(base.party),
            biases: flags.biases.clone().or(base.biases),
            grid_points: flags.grid_points.or(base.grid_points),
            trials: flags.trials.or(base.trials),
            seed: flags.seed.or(base.seed),
            format: flags.format.or(base.format),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Analytic {
    pub honest_alice: Option<f64>,
    pub honest_bob: Option<f64>,
    pub alice_optimal: Option<f64>,
    pub alice_oracle: Option<f64>,
    pub delta_star: Option<f64>,
    pub bob_optimal: Option<f64>,
    pub eta_star: Option<f64>,
    pub worst_case_losing: Option<f64>,
    pub bias: Option<f64>,
    pub residual: Option<f64>,
    pub parties: Option<Vec<PartyReport>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub outcome: String,
    pub count: u64,
    pub frequency: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub trials: u64,
    pub seed: u64,
    pub rows: Vec<FrequencyRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub party: usize,
    pub n_parties: usize,
    pub epsilon: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub checks: Vec<BoundRow>,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Version {
    pub schema: u32,
    pub toolkit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub version: Version,
    pub inputs: Inputs,
    pub analytic: Option<Analytic>,
    pub monte_carlo: Option<MonteCarlo>,
    pub bounds: Option<Bounds>,
}

impl BiasReport {
    fn new(inputs: Inputs) -> Self {
        Self {
            version: Version {
                schema: SCHEMA_VERSION,
                toolkit: TOOLKIT_VERSION.to_string(),
            },
            inputs,
            analytic: None,
            monte_carlo: None,
            bounds: None,
        }
    }

    /// JSON document with every float rounded to seven significant digits.
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        round_floats(&mut v);
        let mut s = serde_json::to_string_pretty(&v).expect("report serializes");
        s.push('\n');
        s
    }

    /// The Monte Carlo frequency table as CSV.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("outcome,count,frequency,std_error\n");
        if let Some(mc) = &self.monte_carlo {
            for row in &mc.rows {
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    row.outcome,
                    row.count,
                    round_sig(row.frequency),
                    round_sig(row.std_error)
                ));
            }
        }
        s
    }
}

pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Checks a JSON report against the published schema: required sections,
/// section types and probability ranges.
pub fn validate_report(v: &Value) -> std::result::Result<(), String> {
    let obj = v.as_object().ok_or("report is not an object")?;
    for key in ["version", "inputs", "analytic", "monte_carlo", "bounds"] {
        if !obj.contains_key(key) {
            return Err(format!("missing top-level key `{key}`"));
        }
    }
    if obj.len() != 5 {
        return Err("unexpected top-level keys".into());
    }
    let version = obj["version"].as_object().ok_or("`version` is not an object")?;
    if version.get("schema").and_then(Value::as_u64) != Some(SCHEMA_VERSION as u64) {
        return Err("unsupported schema version".into());
    }
    if !version.get("toolkit").is_some_and(Value::is_string) {
        return Err("missing toolkit version".into());
    }
    if !obj["inputs"].is_object() {
        return Err("`inputs` is not an object".into());
    }
    let prob = |x: &Value, what: &str| -> std::result::Result<(), String> {
        match x {
            Value::Null => Ok(()),
            Value::Number(n) => {
                let f = n.as_f64().unwrap_or(f64::NAN);
                if (0.0..=1.0).contains(&f) {
                    Ok(())
                } else {
                    Err(format!("{what} = {f} is not a probability"))
                }
            }
            _ => Err(format!("{what} is not a number")),
        }
    };
    match &obj["analytic"] {
        Value::Null => {}
        Value::Object(a) => {
            for key in [
                "honest_alice",
                "honest_bob",
                "alice_optimal",
                "alice_oracle",
                "delta_star",
                "bob_optimal",
                "worst_case_losing",
            ] {
                prob(a.get(key).unwrap_or(&Value::Null), key)?;
            }
            if let Some(Value::Array(parties)) = a.get("parties") {
                for p in parties {
                    prob(&p["honest_win"], "honest_win")?;
                    prob(&p["worst_case_losing"], "worst_case_losing")?;
                }
            }
        }
        _ => return Err("`analytic` is neither null nor an object".into()),
    }
    match &obj["monte_carlo"] {
        Value::Null => {}
        Value::Object(mc) => {
            let trials = mc
                .get("trials")
                .and_then(Value::as_u64)
                .filter(|t| *t >= 1)
                .ok_or("monte_carlo.trials must be a positive integer")?;
            let rows = mc
                .get("rows")
                .and_then(Value::as_array)
                .ok_or("monte_carlo.rows missing")?;
            for row in rows {
                prob(&row["frequency"], "frequency")?;
                let f = row["frequency"].as_f64().unwrap_or(0.0);
                let se = row["std_error"].as_f64().ok_or("std_error missing")?;
                let want = wcf::binomial_std_error(f, trials);
                if (se - want).abs() > 1e-6 * want.max(1e-12) + 1e-12 {
                    return Err(format!("std_error {se} inconsistent with frequency {f}"));
                }
            }
        }
        _ => return Err("`monte_carlo` is neither null nor an object".into()),
    }
    match &obj["bounds"] {
        Value::Null | Value::Object(_) => Ok(()),
        _ => Err("`bounds` is neither null nor an object".into()),
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Library(Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Library(Error::Bracketing { .. }) | CliError::Library(Error::Protocol(_)) => 3,
            CliError::Library(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "invalid configuration: {m}"),
            CliError::Library(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Library(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn require<T>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
}

fn load_config(path: &Path) -> CliResult<Inputs> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

fn params_from(inputs: &Inputs) -> CliResult<ProtocolParams> {
    Ok(ProtocolParams::new(require(inputs.p, "p")?, require(inputs.eta, "eta")?)?)
}

fn cheat_from(inputs: &Inputs) -> CliResult<CheatSpec> {
    let spec = match inputs.cheat.unwrap_or(CheatKind::Honest) {
        CheatKind::Honest => CheatSpec::Honest,
        CheatKind::BobClaimWin => CheatSpec::BobClaimWin,
        CheatKind::AliceDelta => CheatSpec::AliceDelta {
            delta: require(inputs.delta, "delta")?,
        },
        CheatKind::AliceGeneral => {
            let a = require(inputs.alpha.as_ref(), "alpha")?;
            let arr: [f64; 4] = a
                .as_slice()
                .try_into()
                .map_err(|_| CliError::Usage(format!("--alpha needs 4 amplitudes, got {}", a.len())))?;
            CheatSpec::AliceGeneral(GeneralCheat::new(arr.map(|x| Complex64::new(x, 0.0)), None)?)
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn case_from(inputs: &Inputs) -> CliResult<Option<DiceCase>> {
    match inputs.case {
        None => Ok(None),
        Some(1) => Ok(Some(DiceCase::One)),
        Some(2) => Ok(Some(DiceCase::Two)),
        Some(c) => Err(CliError::Usage(format!("--case must be 1 or 2, got {c}"))),
    }
}

fn bracket_from(inputs: &Inputs, default: (f64, f64)) -> CliResult<(f64, f64)> {
    match &inputs.bracket {
        None => Ok(default),
        Some(b) if b.len() == 2 && b[0] < b[1] => Ok((b[0], b[1])),
        Some(b) => Err(CliError::Usage(format!("--bracket needs lo,hi with lo < hi, got {b:?}"))),
    }
}

fn frequency_row(outcome: String, count: u64, trials: u64) -> FrequencyRow {
    let frequency = count as f64 / trials as f64;
    FrequencyRow {
        outcome,
        count,
        frequency,
        std_error: wcf::binomial_std_error(frequency, trials),
    }
}

fn dice_analytic(report: &DiceReport) -> (Analytic, Bounds) {
    let analytic = Analytic {
        parties: Some(report.parties.clone()),
        ..Analytic::default()
    };
    let bounds = Bounds {
        checks: report
            .parties
            .iter()
            .map(|p| BoundRow {
                party: p.party,
                n_parties: report.n_parties,
                epsilon: p.bias,
                bound: p.bound,
                holds: p.bound_holds,
            })
            .collect(),
        satisfied: report.bound_satisfied,
    };
    (analytic, bounds)
}

fn two_party_analytic(params: &ProtocolParams) -> CliResult<Analytic> {
    let mut a = Analytic {
        honest_alice: Some(params.honest_win_prob()),
        honest_bob: Some(params.p()),
        bob_optimal: Some(adversary::bob_optimal_value(params).value),
        ..Analytic::default()
    };
    match adversary::alice_optimal_value(params) {
        Ok(cv) => {
            a.alice_optimal = Some(cv.value);
            a.delta_star = cv.delta();
        }
        Err(Error::Domain(_)) | Err(Error::DegenerateParameter) => {}
        Err(e) => return Err(e.into()),
    }
    Ok(a)
}

fn cmd_simulate(mut report: BiasReport) -> CliResult<BiasReport> {
    let inputs = &mut report.inputs;
    let trials = inputs.trials.unwrap_or(DEFAULT_TRIALS);
    let seed = inputs.seed.unwrap_or(0);
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    inputs.trials = Some(trials);
    inputs.seed = Some(seed);

    if let Some(n) = inputs.dice {
        if inputs.honest == Some(true) && inputs.honest_party.is_some() {
            return Err(CliError::Usage("--honest and --honest-party are exclusive".into()));
        }
        let spec = match case_from(inputs)? {
            Some(case) => {
                if n != 3 {
                    return Err(CliError::Usage("--case applies to --dice 3 only".into()));
                }
                let eta = match inputs.eta {
                    Some(e) => e,
                    None => dicer::optimize_three_sided(case)?.fairness.eta_star,
                };
                LadderSpec::three_sided(case, eta)?
            }
            None => LadderSpec::honest_ladder(n, inputs.eta.unwrap_or(dicer::BALANCED_ETA))?,
        };
        let scenario = match inputs.honest_party {
            Some(h) => DiceScenario::Coalition {
                honest: h,
                strategies: StageStrategies::Optimal,
            },
            None => DiceScenario::AllHonest,
        };
        let dice = dicer::simulate_dice(&spec, &scenario, trials, seed)?;
        let tally = dice.monte_carlo.clone().expect("simulation fills the tally");
        let (analytic, bounds) = dice_analytic(&dice);
        report.analytic = Some(analytic);
        report.bounds = Some(bounds);
        report.monte_carlo = Some(MonteCarlo {
            trials,
            seed,
            rows: tally
                .wins
                .iter()
                .enumerate()
                .map(|(i, w)| frequency_row(format!("party-{}", i + 1), *w, trials))
                .collect(),
        });
        return Ok(report);
    }

    let params = params_from(inputs)?;
    let cheat = cheat_from(inputs)?;
    let tally = wcf::monte_carlo(&params, &cheat, trials, seed)?;
    report.analytic = Some(two_party_analytic(&params)?);
    report.monte_carlo = Some(MonteCarlo {
        trials,
        seed,
        rows: [
            ("alice", Winner::Alice),
            ("bob", Winner::Bob),
            ("abort", Winner::Abort),
        ]
        .into_iter()
        .map(|(name, w)| frequency_row(name.to_string(), tally.count(w), trials))
        .collect(),
    });
    Ok(report)
}

fn cmd_cheat(mut report: BiasReport) -> CliResult<BiasReport> {
    let params = params_from(&report.inputs)?;
    let mut analytic = two_party_analytic(&params)?;
    if analytic.alice_optimal.is_none() {
        return Err(CliError::Library(Error::Domain(
            "Alice's cheat value needs p < 1 and p + eta > 0".into(),
        )));
    }
    let grid = GridSpec {
        delta_points: report.inputs.grid_points.unwrap_or(GridSpec::default().delta_points),
        ..GridSpec::default()
    };
    analytic.alice_oracle = Some(adversary::brute_force_alice(&params, &grid, 1)?.value);
    report.analytic = Some(analytic);
    Ok(report)
}

fn cmd_solve(mut report: BiasReport) -> CliResult<BiasReport> {
    let target = require(report.inputs.target, "target")?;
    match target {
        SolveTarget::Balanced => {
            let bracket = bracket_from(&report.inputs, BALANCED_BRACKET)?;
            let s = fairness::solve_balanced_in(bracket)?;
            report.analytic = Some(Analytic {
                eta_star: Some(s.eta_star),
                alice_optimal: Some(s.achieved_values.0),
                bob_optimal: Some(s.achieved_values.1),
                worst_case_losing: Some(s.achieved_values.0),
                bias: Some(s.achieved_values.0 - 0.5),
                residual: Some(s.residual),
                ..Analytic::default()
            });
        }
        SolveTarget::Dice3Case1 | SolveTarget::Dice3Case2 => {
            let (case, default) = if target == SolveTarget::Dice3Case1 {
                (DiceCase::One, CASE1_BRACKET)
            } else {
                (DiceCase::Two, CASE2_BRACKET)
            };
            let bracket = bracket_from(&report.inputs, default)?;
            let s = dicer::optimize_three_sided_with(case, dicer::Case2Reading::Squared, bracket)?;
            let (mut analytic, bounds) = dice_analytic(&s.report);
            analytic.eta_star = Some(s.fairness.eta_star);
            analytic.worst_case_losing = Some(s.worst_case_losing);
            analytic.bias = Some(s.bias);
            analytic.residual = Some(s.fairness.residual);
            report.analytic = Some(analytic);
            report.bounds = Some(bounds);
        }
    }
    Ok(report)
}

fn cmd_bound_check(mut report: BiasReport) -> CliResult<BiasReport> {
    let inputs = &report.inputs;
    let n_parties = require(inputs.dice, "dice")?;
    let party = require(inputs.party, "party")?;
    let biases = StageBiasVector::new(require(inputs.biases.clone(), "biases")?)?;
    let losing = dicer::worst_case_losing_prob(party, n_parties, &biases)?;
    let check = dicer::bias_bound_check(party, n_parties, &biases)?;
    report.analytic = Some(Analytic {
        worst_case_losing: Some(losing),
        bias: Some(check.epsilon),
        ..Analytic::default()
    });
    report.bounds = Some(Bounds {
        checks: vec![BoundRow {
            party,
            n_parties,
            epsilon: check.epsilon,
            bound: check.bound,
            holds: check.holds,
        }],
        satisfied: check.holds,
    });
    Ok(report)
}

/// Runs a parsed command and returns the report and the rendered output.
pub fn execute(cli: &Cli) -> CliResult<(BiasReport, String)> {
    let flags = cli.command.flags();
    let base = match &flags.config {
        Some(path) => load_config(path)?,
        None => Inputs::default(),
    };
    let inputs = Inputs::from_flags(cli.command.name(), flags, base);
    let format = inputs.format.unwrap_or(Format::Json);
    let report = BiasReport::new(inputs);
    let report = match cli.command {
        Command::Simulate(_) => cmd_simulate(report)?,
        Command::Cheat(_) => cmd_cheat(report)?,
        Command::Solve(_) => cmd_solve(report)?,
        Command::BoundCheck(_) => cmd_bound_check(report)?,
    };
    let rendered = match format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    Ok((report, rendered))
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(stderr, "{e}")
            } else {
                write!(stdout, "{e}")
            };
            return code;
        }
    };
    let result = execute(&cli).and_then(|(_, rendered)| match &cli.command.flags().out {
        Some(path) => fs::write(path, rendered).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => stdout.write_all(rendered.as_bytes()).map_err(|e| CliError::Io(e.to_string())),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "qdice: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_significant_digits() {
        assert_eq!(round_sig(0.707_106_781_186_547_5), 0.707_106_8);
        assert_eq!(round_sig(1.0 / 3.0), 0.333_333_3);
        assert_eq!(round_sig(0.0), 0.0);
        assert_eq!(round_sig(1.234_567_89e-5), 1.234_568e-5);
    }

    #[test]
    fn exit_codes_by_error() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::Library(Error::Domain("x".into())).exit_code(), 2);
        let b = Error::Bracketing {
            lo: 0.0,
            hi: 1.0,
            f_lo: 1.0,
            f_hi: 1.0,
        };
        assert_eq!(CliError::Library(b).exit_code(), 3);
        assert_eq!(CliError::Io("x".into()).exit_code(), 1);
    }

    #[test]
    fn config_keys_are_checked() {
        let bad: std::result::Result<Inputs, _> = serde_json::from_str(r#"{"p": 0.5, "nope": 1}"#);
        assert!(bad.is_err());
        let ok: Inputs = serde_json::from_str(r#"{"p": 0.5, "cheat": "bob-claim-win", "target": "dice3-case1"}"#).unwrap();
        assert_eq!(ok.cheat, Some(CheatKind::BobClaimWin));
        assert_eq!(ok.target, Some(SolveTarget::Dice3Case1));
    }

    #[test]
    fn flags_override_config() {
        let base = Inputs {
            p: Some(0.3),
            eta: Some(0.1),
            trials: Some(10),
            ..Inputs::default()
        };
        let flags = Flags {
            p: Some(0.5),
            ..Flags::default()
        };
        let merged = Inputs::from_flags("cheat", &flags, base);
        assert_eq!(merged.p, Some(0.5));
        assert_eq!(merged.eta, Some(0.1));
        assert_eq!(merged.subcommand.as_deref(), Some("cheat"));
    }
}
