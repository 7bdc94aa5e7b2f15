use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use taprepair::automaton::BuildOptions;
use taprepair::env::{load_channel_table, ChannelTable};
use taprepair::props::{load_catalog, parse_properties, select};
use taprepair::repair::Limits;
use taprepair::report::{run_bench, run_check, run_repair, Inputs, Report, Settings};
use taprepair::rule::parse_rules;
use taprepair::scenario::{parse_scenario, Scenario};

#[derive(Parser)]
#[command(
    name = "taprepair",
    version,
    about = "Check and repair trigger-action home automation rules"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Report violations and their patterns.
    Check(RunArgs),
    /// Check, then repair each violated property.
    Repair(RunArgs),
    /// Repair the built-in flawed rule groups.
    Bench {
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long, default_value_t = 50)]
        iter_limit: usize,
        #[arg(long, default_value_t = 15)]
        round_limit: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    rules: PathBuf,
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Property ids or group tags (comma separated), or a property file.
    /// Defaults to every catalog property that fits the rules.
    #[arg(long)]
    props: Option<String>,
    #[arg(long)]
    channels: Option<PathBuf>,
    #[arg(long, default_value_t = 60)]
    tick: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    iter_limit: usize,
    #[arg(long, default_value_t = 15)]
    round_limit: usize,
    #[arg(long, default_value_t = 1_000_000)]
    state_cap: usize,
    /// Where to write the patched rules (repair only).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load(a: &RunArgs) -> Result<(Inputs, Settings), String> {
    if a.tick == 0 || a.iter_limit == 0 || a.round_limit == 0 || a.state_cap == 0 {
        return Err("limits and tick must be positive".into());
    }
    let rules = parse_rules(&read(&a.rules)?).map_err(|e| format!("{}: {e}", a.rules.display()))?;
    let scenario = match &a.scenario {
        Some(p) => parse_scenario(&read(p)?, &rules).map_err(|e| format!("{}: {e}", p.display()))?,
        None => Scenario::default(),
    };
    let table = match &a.channels {
        Some(p) => load_channel_table(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
        None => ChannelTable::builtin(),
    };
    let catalog = load_catalog();
    let properties = match &a.props {
        Some(s) if Path::new(s).is_file() => parse_properties(&read(Path::new(s))?).map_err(|e| format!("{s}: {e}"))?,
        Some(s) => {
            let keys: Vec<String> = s
                .split(',')
                .map(|k| k.trim().to_string())
                .filter(|k| !k.is_empty())
                .collect();
            let v: Vec<_> = select(&catalog, &keys).into_iter().cloned().collect();
            if v.is_empty() {
                return Err(format!("no catalog property matches {s}"));
            }
            v
        }
        None => catalog.iter().filter(|p| p.applies_to(&rules)).cloned().collect(),
    };
    if properties.is_empty() {
        return Err("no property applies to these rules".into());
    }
    let settings = Settings {
        opts: BuildOptions {
            tick_sec: a.tick,
            seed: a.seed,
            state_cap: a.state_cap,
            ..Default::default()
        },
        limits: Limits {
            iter_limit: a.iter_limit,
            round_limit: a.round_limit,
            ..Default::default()
        },
    };
    Ok((
        Inputs {
            rules,
            scenario,
            table,
            properties,
            catalog,
        },
        settings,
    ))
}

fn emit(report: &Report, format: Format) {
    match format {
        Format::Text => print!("{}", report.to_text()),
        Format::Json => print!("{}", report.to_jsonl()),
    }
}

fn run(cli: Cli) -> Result<u8, String> {
    match cli.cmd {
        Cmd::Check(a) => {
            let (inputs, settings) = load(&a)?;
            let report = run_check(&inputs, &settings);
            emit(&report, a.format);
            Ok(report.exit_code() as u8)
        }
        Cmd::Repair(a) => {
            let (inputs, settings) = load(&a)?;
            let report = run_repair(&inputs, &settings);
            emit(&report, a.format);
            if let (Some(path), Some(text)) = (&a.out, &report.patched_rules) {
                std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))?;
            } else if let (None, Some(text), Format::Text) = (&a.out, &report.patched_rules, a.format) {
                println!("\n{text}");
            }
            Ok(report.exit_code() as u8)
        }
        Cmd::Bench {
            format,
            iter_limit,
            round_limit,
        } => {
            let limits = Limits {
                iter_limit,
                round_limit,
                ..Default::default()
            };
            let cases = run_bench(limits);
            for c in &cases {
                match format {
                    Format::Json => println!("{}", serde_json::to_string(c).unwrap()),
                    Format::Text => {
                        let mark = if c.ok() { "ok  " } else { "FAIL" };
                        println!(
                            "{mark} {:<8} {:<5} {:<4} {:>6} ms  {} iterations",
                            c.name,
                            c.property,
                            c.patterns.join(","),
                            c.millis,
                            c.iterations
                        );
                        for e in &c.edits {
                            println!("       {e}");
                        }
                    }
                }
            }
            let ok = cases.iter().filter(|c| c.ok()).count();
            if let Format::Text = format {
                println!("{ok}/{} repaired", cases.len());
            }
            Ok(if ok == cases.len() { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
