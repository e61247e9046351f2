//! The `placesel` command line: select, reconstruct, cover, stats, verify.
//!
//! Exit codes follow one convention everywhere: 0 for success (including a
//! passing check), 1 for a domain outcome or error (a failing bound, a
//! diverging reconstruction, a bad rule description), 2 for a usage error.
//! Everything randomized takes an explicit `--seed`; no ambient entropy is
//! ever consulted, so outputs are reproducible byte for byte.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bitseq::{BitString, PartialString};
use crate::covers::{
    build_cover_main, build_cover_pair, measure_union_exact, transfer_cover_subseq,
    verify_cover_bound, TableEnumerator,
};
use crate::dyadic::Dyadic;
use crate::engine::{self, StopReason, TraceJson};
use crate::reconstruct::{default_stage_limit, reconstruct};
use crate::rules::{RuleSpec, SelectionRule};
use crate::stats::{independence_battery, prng_stream};

/// Inline `--bits` arguments larger than this must come from a file
/// instead; shells do not enjoy megabyte argument lists.
pub const INLINE_BITS_MAX: usize = 1 << 16;

#[derive(Parser)]
#[command(
    name = "placesel",
    version,
    about = "Bounded place selections on bit strings: traces, reconstruction, covers, statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a selection rule over an input and report what it kept.
    Select(SelectArgs),
    /// Rebuild an initial segment from a (sigma, tau) string pair.
    Reconstruct(ReconstructArgs),
    /// Build a measure-bounded cover and check its bound exactly.
    Cover(CoverArgs),
    /// Run the independence battery on a seeded pseudorandom stream.
    Stats(StatsArgs),
    /// Check a recorded trace against a fresh run of the rule.
    Verify(VerifyArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct InputArgs {
    /// Inline bit string, at most 65536 characters.
    #[arg(long, value_name = "BITS")]
    bits: Option<String>,
    /// Bit file: 0/1 text, whitespace and #-comments ignored.
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    /// Rule description, e.g. pair-swap or mc-mask:10110.
    #[arg(long)]
    rule: String,
    #[command(flatten)]
    input: InputArgs,
    /// Step limit for the run.
    #[arg(long, default_value_t = usize::MAX)]
    max_steps: usize,
    /// Emit the full trace as JSON instead of the text summary.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    rule: String,
    /// The non-kept window bits.
    #[arg(long, value_name = "BITS")]
    sigma: String,
    /// The kept prefix bits.
    #[arg(long, value_name = "BITS")]
    tau: String,
    /// Stage limit; defaults to 4(|sigma| + |tau|) + 8.
    #[arg(long)]
    max_stages: Option<usize>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CoverMode {
    /// Interleaved pairs qualified by a budgeted enumeration.
    Pair,
    /// Direct cover via reconstruction from enumerated sources.
    Main,
    /// Push a cover of the kept subsequence back through a rule.
    Transfer,
}

#[derive(Args)]
struct CoverArgs {
    #[arg(long, value_enum)]
    mode: CoverMode,
    /// Enumerator table (JSON) for the pair and main modes.
    #[arg(long = "enum", value_name = "PATH")]
    enumerator: Option<PathBuf>,
    /// Rule for the main and transfer modes.
    #[arg(long)]
    rule: Option<String>,
    /// Bound exponent: the cover must measure at most 2^-i.
    #[arg(long)]
    i: Option<usize>,
    /// Oracle-prefix length bound.
    #[arg(long)]
    s: Option<usize>,
    /// Source-length bound for the main mode.
    #[arg(long)]
    sigma_bound: Option<usize>,
    /// Source cover for the transfer mode: a JSON array of bit strings.
    #[arg(long, value_name = "PATH")]
    cover: Option<PathBuf>,
    /// Per-branch step limit for the transfer mode.
    #[arg(long, default_value_t = 64)]
    depth: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    rule: String,
    /// Stream generator seed; required so every number is reproducible.
    #[arg(long)]
    seed: u64,
    /// Stream length in bits.
    #[arg(long)]
    length: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    rule: String,
    #[command(flatten)]
    input: InputArgs,
    /// Trace to check, as written by `select --json`.
    #[arg(long, value_name = "PATH")]
    trace: PathBuf,
}

enum CliError {
    /// Exit 1: the arguments were fine but the domain rejected them.
    Domain(String),
    /// Exit 2: the invocation itself is wrong.
    Usage(String),
}

fn domain(err: impl std::fmt::Display) -> CliError {
    CliError::Domain(err.to_string())
}

/// Parses `argv` and runs the requested subcommand, returning the process
/// exit code. All diagnostics go to stderr; results go to stdout.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version arrive here too; they are not errors.
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Select(args) => cmd_select(&args),
        Command::Reconstruct(args) => cmd_reconstruct(&args),
        Command::Cover(args) => cmd_cover(&args),
        Command::Stats(args) => cmd_stats(&args),
        Command::Verify(args) => cmd_verify(&args),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            2
        }
    }
}

fn parse_rule(text: &str) -> Result<SelectionRule, CliError> {
    let spec: RuleSpec = text.parse().map_err(domain)?;
    for warning in spec.validate().map_err(domain)? {
        eprintln!("warning: {warning}");
    }
    spec.build().map_err(domain)
}

fn load_bits(source: &InputArgs) -> Result<BitString, CliError> {
    match (&source.bits, &source.input) {
        (Some(text), None) => {
            if text.chars().count() > INLINE_BITS_MAX {
                return Err(CliError::Usage(format!(
                    "inline --bits is limited to {INLINE_BITS_MAX} characters; \
                     use --input FILE"
                )));
            }
            text.parse().map_err(domain)
        }
        (None, Some(path)) => read_text(path)?.parse().map_err(domain),
        // The argument group guarantees exactly one source; keep a usage
        // error anyway for programmatic callers.
        _ => Err(CliError::Usage("exactly one of --bits or --input is required".into())),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
}

fn require<T>(value: Option<T>, what: &str, mode: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("--{what} is required for --mode {mode}")))
}

fn cmd_select(args: &SelectArgs) -> Result<i32, CliError> {
    let rule = parse_rule(&args.rule)?;
    let input = load_bits(&args.input)?;
    let trace = engine::run(&rule, &input, args.max_steps);
    let wire = TraceJson::try_from(&trace).map_err(domain)?;
    if args.json {
        println!("{}", serde_json::to_string(&wire).map_err(domain)?);
    } else {
        println!("q_star={} n_prefix={}", wire.q_star, wire.n_prefix);
    }
    Ok(0)
}

fn cmd_reconstruct(args: &ReconstructArgs) -> Result<i32, CliError> {
    let rule = parse_rule(&args.rule)?;
    if rule.kind() != crate::rules::RuleKind::Bounded {
        return Err(CliError::Domain(format!(
            "rule {} is not bounded; reconstruction needs a threshold",
            rule.name()
        )));
    }
    let sigma: BitString = args.sigma.parse().map_err(domain)?;
    let tau: BitString = args.tau.parse().map_err(domain)?;
    let limit = args.max_stages.unwrap_or_else(|| default_stage_limit(&sigma, &tau));
    let run = reconstruct(&rule, &sigma, &tau, limit);
    if args.json {
        let value = match run.result() {
            Some(alpha) => serde_json::json!({
                "outcome": "converged",
                "alpha": alpha.to_string(),
                "stages_used": run.stages_used,
                "sigma_used": run.sigma_used,
                "tau_used": run.tau_used,
            }),
            None => serde_json::json!({
                "outcome": "diverged",
                "reason": run.divergence().expect("not converged").to_string(),
                "stages_used": run.stages_used,
                "sigma_used": run.sigma_used,
                "tau_used": run.tau_used,
            }),
        };
        println!("{value}");
    } else if let Some(alpha) = run.result() {
        println!("{alpha}");
        println!(
            "converged stages={} sigma_used={} tau_used={}",
            run.stages_used, run.sigma_used, run.tau_used
        );
    } else {
        println!(
            "diverged reason={} stages={} sigma_used={} tau_used={}",
            run.divergence().expect("not converged"),
            run.stages_used,
            run.sigma_used,
            run.tau_used
        );
    }
    Ok(if run.converged() { 0 } else { 1 })
}

fn load_enumerator(path: Option<&PathBuf>, mode: &str) -> Result<TableEnumerator, CliError> {
    let path = require(path, "enum", mode)?;
    TableEnumerator::from_json(&read_text(path)?).map_err(domain)
}

fn cmd_cover(args: &CoverArgs) -> Result<i32, CliError> {
    match args.mode {
        CoverMode::Pair => {
            let table = load_enumerator(args.enumerator.as_ref(), "pair")?;
            let i = require(args.i, "i", "pair")?;
            let s = require(args.s, "s", "pair")?;
            let cover = build_cover_pair(&table, i, s).map_err(domain)?;
            let members: Vec<PartialString> =
                cover.iter().map(PartialString::from).collect();
            let span = 2 * s;
            let measure = measure_union_exact(&members, span).map_err(domain)?;
            let bound = Dyadic::pow2_neg(i as u64);
            let pass = measure <= bound;
            if args.json {
                println!(
                    "{}",
                    serde_json::json!({
                        "mode": "pair",
                        "members": cover.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
                        "span": span,
                        "measure": measure.to_string(),
                        "bound": bound.to_string(),
                        "pass": pass,
                    })
                );
            } else {
                println!(
                    "members={} span={span} measure={measure} bound={bound} {}",
                    cover.len(),
                    verdict(pass)
                );
            }
            Ok(i32::from(!pass))
        }
        CoverMode::Main => {
            let table = load_enumerator(args.enumerator.as_ref(), "main")?;
            let rule = parse_rule(require(args.rule.as_ref(), "rule", "main")?)?;
            let i = require(args.i, "i", "main")?;
            let s = require(args.s, "s", "main")?;
            let sigma_bound = require(args.sigma_bound, "sigma-bound", "main")?;
            let cover = build_cover_main(&table, &rule, i, s, sigma_bound).map_err(domain)?;
            let span = cover.members.span();
            let measure = measure_union_exact(cover.members.members(), span).map_err(domain)?;
            let bound = Dyadic::pow2_neg(i as u64);
            let pass = verify_cover_bound(&cover.members, i, span).map_err(domain)?;
            if args.json {
                println!(
                    "{}",
                    serde_json::json!({
                        "mode": "main",
                        "members": cover
                            .members
                            .members()
                            .iter()
                            .map(|m| m.to_string())
                            .collect::<Vec<_>>(),
                        "span": span,
                        "measure": measure.to_string(),
                        "bound": bound.to_string(),
                        "pass": pass,
                    })
                );
            } else {
                println!(
                    "members={} span={span} measure={measure} bound={bound} {}",
                    cover.members.len(),
                    verdict(pass)
                );
            }
            Ok(i32::from(!pass))
        }
        CoverMode::Transfer => {
            let rule = parse_rule(require(args.rule.as_ref(), "rule", "transfer")?)?;
            let path = require(args.cover.as_ref(), "cover", "transfer")?;
            let sources: Vec<String> =
                serde_json::from_str(&read_text(path)?).map_err(domain)?;
            let sources: BTreeSet<BitString> = sources
                .iter()
                .map(|text| text.parse().map_err(domain))
                .collect::<Result<_, _>>()?;
            let out = transfer_cover_subseq(&rule, &sources, args.depth);
            let mut pass = true;
            let mut rows = Vec::new();
            for st in &out.sources {
                for warning in &st.warnings {
                    eprintln!("warning: {warning}");
                }
                let ok = st.meets_source_bound();
                pass &= ok;
                rows.push((st, ok));
            }
            if args.json {
                println!(
                    "{}",
                    serde_json::json!({
                        "mode": "transfer",
                        "sources": rows
                            .iter()
                            .map(|(st, ok)| serde_json::json!({
                                "source": st.source.to_string(),
                                "emitted": st
                                    .emitted
                                    .iter()
                                    .map(|m| m.to_string())
                                    .collect::<Vec<_>>(),
                                "measure": st.emitted_measure().to_string(),
                                "bound": st.source.measure().to_string(),
                                "incomplete": st.incomplete,
                                "pass": ok,
                            }))
                            .collect::<Vec<_>>(),
                        "pass": pass,
                    })
                );
            } else {
                for (st, ok) in &rows {
                    println!(
                        "source={} emitted={} measure={} bound={} incomplete={} {}",
                        display_or_empty(&st.source),
                        st.emitted.len(),
                        st.emitted_measure(),
                        st.source.measure(),
                        st.incomplete,
                        verdict(*ok)
                    );
                }
                println!(
                    "sources={} incomplete={} {}",
                    out.sources.len(),
                    out.incomplete(),
                    verdict(pass)
                );
            }
            Ok(i32::from(!pass))
        }
    }
}

fn cmd_stats(args: &StatsArgs) -> Result<i32, CliError> {
    let rule = parse_rule(&args.rule)?;
    let input = prng_stream(args.seed, args.length);
    let report = independence_battery(&rule, &input, args.seed);
    if args.json {
        println!("{}", serde_json::to_string(&report).map_err(domain)?);
    } else {
        println!(
            "battery rule={} seed={} length={} \
             (illustrative battery, not a certification of randomness)",
            report.rule, report.seed, report.stream_length
        );
        for entry in &report.entries {
            let statistic = entry
                .statistic
                .map_or_else(|| "-".into(), |v| format!("{v:.4}"));
            let status = match &entry.skipped {
                Some(reason) => format!("skip ({reason})"),
                None => verdict(entry.pass).to_string(),
            };
            println!(
                "{:<28} {:>10}  {:<34} {status}",
                entry.test_name, statistic, entry.threshold_description
            );
        }
    }
    Ok(i32::from(!report.all_pass()))
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32, CliError> {
    let rule = parse_rule(&args.rule)?;
    let input = load_bits(&args.input)?;
    let wire: TraceJson =
        serde_json::from_str(&read_text(&args.trace)?).map_err(domain)?;
    // Replay with the trace's own step count when it was step-limited,
    // otherwise without a limit — same convention as replay verification.
    let max_steps = if wire.stop_reason == StopReason::StepLimit {
        wire.positions.len()
    } else {
        usize::MAX
    };
    let rerun = engine::run(&rule, &input, max_steps);
    let pass = TraceJson::try_from(&rerun).map(|fresh| fresh == wire).unwrap_or(false);
    println!("{}", verdict(pass));
    Ok(i32::from(!pass))
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// The empty bit string shows as a visible marker instead of nothing.
fn display_or_empty(bits: &BitString) -> String {
    if bits.is_empty() {
        "(empty)".into()
    } else {
        bits.to_string()
    }
}
