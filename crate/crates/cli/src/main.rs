//! `kbo`: run scenarios, fuzz seeds, check traces, decompose channels and
//! replay the three-process example.
//!
//! Exit status: 0 pass or quiescent, 1 property failure, 2 usage or input
//! error, 3 budget exhausted.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use kbo_core::checker::{self, check_all, decompose_trace, report_jsonl, DecomposeError, Suite};
use kbo_core::fuzz::{fuzz, FuzzTemplate};
use kbo_core::golden::{self, label};
use kbo_core::trace::Outcome;
use kbo_core::{MessageId, ScenarioConfig, Trace};

const PASS: u8 = 0;
const PROPERTY_FAILURE: u8 = 1;
const USAGE: u8 = 2;
const BUDGET_EXHAUSTED: u8 = 3;

#[derive(Parser)]
#[command(name = "kbo", version, about = "k-BO-broadcast stack simulator and trace checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trace.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Trace file to write; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run and check generated scenarios.
    Fuzz {
        /// Fuzz template (TOML).
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        /// Override the template's base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "all")]
        suites: String,
        /// Directory for summary.json and failing traces.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a trace and print one verdict per line.
    Check {
        trace: PathBuf,
        #[arg(long, default_value = "all")]
        suites: String,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split a trace's delivery order into at most k channels.
    Decompose {
        trace: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Replay and check the three-process example.
    Golden {
        /// Write the replayed trace here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(USAGE)
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Run { scenario, out, seed } => cmd_run(&scenario, out.as_deref(), seed),
        Command::Fuzz { scenario, seeds, seed, suites, out } => cmd_fuzz(&scenario, seeds, seed, &suites, &out),
        Command::Check { trace, suites, out } => cmd_check(&trace, &suites, out.as_deref()),
        Command::Decompose { trace, k } => cmd_decompose(&trace, k),
        Command::Golden { out } => cmd_golden(out.as_deref()),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_trace(path: &Path) -> Result<Trace> {
    Trace::from_jsonl(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_run(scenario: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<u8> {
    let mut cfg = ScenarioConfig::from_toml(&read(scenario)?).with_context(|| format!("in {}", scenario.display()))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let trace = kbo_core::run(&cfg)?;
    write_or_print(out, &trace.to_jsonl())?;
    Ok(match trace.outcome() {
        Outcome::Quiescent => PASS,
        Outcome::BudgetExhausted => {
            eprintln!("step budget exhausted after {} ticks", trace.footer.ticks);
            BUDGET_EXHAUSTED
        }
    })
}

fn cmd_fuzz(template: &Path, seeds: u64, seed: Option<u64>, suites: &str, out: &Path) -> Result<u8> {
    let mut t = FuzzTemplate::from_toml(&read(template)?).with_context(|| format!("in {}", template.display()))?;
    if let Some(seed) = seed {
        t.base_seed = seed;
    }
    let suites = Suite::parse_list(suites)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let (mut summary, results) = fuzz(&t, seeds, &suites);
    for r in results.iter().filter(|r| r.failed()) {
        if let Ok((trace, verdicts)) = &r.result {
            let base = out.join(format!("seed-{}", r.seed));
            let written = fs::write(base.with_extension("trace.jsonl"), trace.to_jsonl())
                .and_then(|_| fs::write(base.with_extension("verdicts.jsonl"), report_jsonl(verdicts)));
            if let Err(e) = written {
                summary.errors.push(format!("seed {}: writing trace: {e}", r.seed));
            }
        }
    }
    let json = serde_json::to_string_pretty(&summary)?;
    fs::write(out.join("summary.json"), format!("{json}\n")).context("writing summary.json")?;
    println!(
        "{} seeds, {} quiescent, {} budget-exhausted, {} failing",
        summary.seeds,
        summary.quiescent,
        summary.budget_exhausted,
        summary.failing_seeds.len()
    );
    for (prop, c) in &summary.properties {
        println!("{prop:<22} pass {:>5}  fail {:>5}  not-evaluated {:>5}", c.pass, c.fail, c.not_evaluated);
    }
    for e in &summary.errors {
        eprintln!("{e}");
    }
    Ok(if summary.all_pass() { PASS } else { PROPERTY_FAILURE })
}

fn cmd_check(path: &Path, suites: &str, out: Option<&Path>) -> Result<u8> {
    let suites = Suite::parse_list(suites)?;
    let trace = load_trace(path)?;
    let verdicts = check_all(&trace, &suites);
    let report = report_jsonl(&verdicts);
    print!("{report}");
    if let Some(out) = out {
        fs::write(out, &report).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(if checker::any_failed(&verdicts) { PROPERTY_FAILURE } else { PASS })
}

fn ids(ms: &[MessageId]) -> String {
    ms.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(" ")
}

fn cmd_decompose(path: &Path, k: Option<usize>) -> Result<u8> {
    let trace = load_trace(path)?;
    let k = k.unwrap_or(trace.config.k);
    match decompose_trace(&trace, k) {
        Ok((order, channels)) => {
            println!("width {}", order.poset.width());
            for (i, chain) in channels.chains.iter().enumerate() {
                println!("channel {}: {}", i + 1, ids(chain));
            }
            for (m, c) in channels.assignment() {
                println!("{m} -> {c}");
            }
            if !order.excluded.is_empty() {
                println!("excluded: {}", ids(&order.excluded));
            }
            Ok(PASS)
        }
        Err(DecomposeError::Bound(b)) => {
            println!("width {} exceeds k = {k}", b.width);
            println!("antichain: {}", ids(&b.antichain));
            Ok(PROPERTY_FAILURE)
        }
        Err(e) => Err(e.into()),
    }
}

fn labels(ms: &[MessageId]) -> String {
    ms.iter().map(|m| label(*m)).collect::<Vec<_>>().join(" ")
}

fn cmd_golden(out: Option<&Path>) -> Result<u8> {
    let report = golden::check_example()?;
    if let Some(out) = out {
        let cfg = ScenarioConfig::from_toml(golden::EXAMPLE_SCENARIO)?;
        fs::write(out, kbo_core::run(&cfg)?.to_jsonl()).with_context(|| format!("writing {}", out.display()))?;
    }
    let mut ok = true;
    let expected = golden::example_sequences();
    println!("expected sequences:");
    for (i, s) in expected.iter().enumerate() {
        println!("  p{}: {}", i + 1, labels(s));
    }
    println!("replayed sequences:");
    for (i, s) in report.replayed.iter().enumerate() {
        println!("  p{}: {}", i + 1, labels(s));
    }
    println!("replay matches: {}", report.replay_matches);
    ok &= report.replay_matches;
    println!("width: {}", report.width);
    ok &= report.width == 2;
    match &report.k2 {
        Ok(ch) => {
            for (i, chain) in ch.chains.iter().enumerate() {
                println!("k=2 channel {}: {}", i + 1, labels(chain));
            }
        }
        Err(e) => {
            println!("k=2 decomposition failed: {e}");
            ok = false;
        }
    }
    match &report.k1 {
        Err(Some(b)) => println!("k=1 rejected, antichain: {}", labels(&b.antichain)),
        _ => {
            println!("k=1 not rejected with an antichain");
            ok = false;
        }
    }
    Ok(if ok { PASS } else { PROPERTY_FAILURE })
}
