//! Command-line driver: type checking, semantic robustness checks,
//! source-to-source transformations, knowledge queries, and batch corpus
//! runs with expected-verdict sidecars.
//!
//! Exit codes: 0 — all checks pass/accept; 1 — a reject/fail with a witness;
//! 2 — usage, parse, or configuration error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use robustcheck_core::ast::{program_to_string, Program};
use robustcheck_core::attacks::AttackConfig;
use robustcheck_core::knowledge::{divergence_knowledge, knowledge, progress_knowledge, MemorySet};
use robustcheck_core::parser::parse_program;
use robustcheck_core::robustness::{
    check_integrity_robustness, check_robustness, check_robustness_checked,
    check_robustness_endorse, Status, Verdict,
};
use robustcheck_core::semantics::{LowEvent, Memory, Mode};
use robustcheck_core::transform::{lower_checked, treach};
use robustcheck_core::typecheck::typecheck;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "robustcheck",
    version,
    about = "Robustness checker for a while-language with holes, declassification, and endorsement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliMode {
    Ps,
    Pi,
}

impl From<CliMode> for Mode {
    fn from(m: CliMode) -> Mode {
        match m {
            CliMode::Ps => Mode::Ps,
            CliMode::Pi => Mode::Pi,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliProperty {
    Robustness,
    RobustnessEndorse,
    RobustnessChecked,
    Integrity,
}

impl CliProperty {
    fn name(self) -> &'static str {
        match self {
            CliProperty::Robustness => "robustness",
            CliProperty::RobustnessEndorse => "robustness-endorse",
            CliProperty::RobustnessChecked => "robustness-checked",
            CliProperty::Integrity => "integrity",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DivergeOpt {
    Auto,
    On,
    Off,
}

#[derive(Args, Clone)]
struct CheckOpts {
    /// Value domain size (values range over 0..N)
    #[arg(long, default_value_t = 4)]
    domain: u32,
    /// Maximum straight-line attack length; defaults to the number of
    /// untrusted variables
    #[arg(long)]
    attack_len: Option<usize>,
    /// Include the pure divergence attack; `auto` enables it for ps checks
    #[arg(long, value_enum, default_value_t = DivergeOpt::Auto)]
    diverge_attack: DivergeOpt,
}

impl CheckOpts {
    fn config(&self, p: &Program, mode: Mode, property: CliProperty) -> AttackConfig {
        let max_len = self
            .attack_len
            .unwrap_or_else(|| p.env.untrusted_vars().len().max(1));
        let diverge = match self.diverge_attack {
            DivergeOpt::Auto => mode == Mode::Ps && property != CliProperty::Integrity,
            DivergeOpt::On => true,
            DivergeOpt::Off => false,
        };
        AttackConfig::new(max_len, diverge)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the security type system over a program
    Typecheck {
        file: PathBuf,
        #[arg(long)]
        json: bool,
        /// Also print the checked-endorsement lowering
        #[arg(long)]
        emit_lowered: bool,
    },
    /// Decide a semantic security property by exhaustive enumeration
    Check {
        file: PathBuf,
        #[arg(long, value_enum)]
        property: CliProperty,
        #[arg(long, value_enum, default_value_t = CliMode::Pi)]
        mode: CliMode,
        #[command(flatten)]
        opts: CheckOpts,
        #[arg(long)]
        json: bool,
        /// Include wall-clock timings in the report (reports are otherwise
        /// byte-identical across runs)
        #[arg(long)]
        timings: bool,
        /// Also print the checked-endorsement lowering
        #[arg(long)]
        emit_lowered: bool,
    },
    /// Lower checked endorsements to direct ones and print the program
    Lower { file: PathBuf },
    /// Apply the explicit-reachability translation and print the program
    Treach { file: PathBuf },
    /// Parse a program and dump its AST as JSON
    Parse { file: PathBuf },
    /// Query attacker knowledge for a memory and a low-event prefix
    Knowledge {
        file: PathBuf,
        /// Full initial memory, e.g. "h=7,low=0"
        #[arg(long)]
        memory: String,
        /// Low-event prefix, e.g. "(low,0) (low,7)"; may end in term/div
        #[arg(long, default_value = "")]
        prefix: String,
        #[arg(long, value_enum, default_value_t = KnowledgeKind::Knowledge)]
        kind: KnowledgeKind,
        #[arg(long, value_enum, default_value_t = CliMode::Ps)]
        mode: CliMode,
        #[arg(long, default_value_t = 4)]
        domain: u32,
    },
    /// Run every .ifc file in a directory against its expected verdicts
    Corpus {
        dir: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KnowledgeKind {
    Knowledge,
    Progress,
    Divergence,
}

fn main() -> ExitCode {
    // die quietly when the consumer of our output goes away
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read_program(file: &Path, domain: u32) -> Result<Program, String> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| format!("cannot read {}: {e}", file.display()))?;
    let p = parse_program(&text).map_err(|e| format!("{}: {e}", file.display()))?;
    if domain < 2 {
        return Err("domain size must be at least 2".to_string());
    }
    Ok(p.with_domain(domain))
}

#[derive(Serialize)]
struct TypecheckReport {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    file: String,
    status: &'static str,
    diagnostics: Vec<robustcheck_core::typecheck::TypeError>,
}

#[derive(Serialize)]
struct CheckReport {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    file: String,
    property: &'static str,
    mode: String,
    verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_ms: Option<u128>,
}

fn run_check(
    p: &Program,
    property: CliProperty,
    mode: Mode,
    cfg: &AttackConfig,
) -> Result<Verdict, String> {
    let r = match property {
        CliProperty::Robustness => check_robustness(p, mode, cfg),
        CliProperty::RobustnessEndorse => check_robustness_endorse(p, mode, cfg),
        CliProperty::RobustnessChecked => check_robustness_checked(p, mode, cfg),
        CliProperty::Integrity => check_integrity_robustness(p, cfg),
    };
    r.map_err(|e| e.to_string())
}

fn dispatch(cmd: Command) -> Result<ExitCode, String> {
    match cmd {
        Command::Typecheck {
            file,
            json,
            emit_lowered,
        } => {
            let p = read_program(&file, 4)?;
            let diags = typecheck(&p);
            if emit_lowered && p.has_checked_endorse() {
                println!("{}", program_to_string(&lower_checked(&p)));
            }
            let ok = diags.is_empty();
            if json {
                let report = TypecheckReport {
                    tool: "robustcheck",
                    version: VERSION,
                    command: "typecheck",
                    file: file.display().to_string(),
                    status: if ok { "ok" } else { "error" },
                    diagnostics: diags,
                };
                println!("{}", serde_json::to_string_pretty(&report).unwrap());
            } else if ok {
                println!("{}: well-typed", file.display());
            } else {
                for d in &diags {
                    println!("{d}");
                }
            }
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Check {
            file,
            property,
            mode,
            opts,
            json,
            timings,
            emit_lowered,
        } => {
            let p = read_program(&file, opts.domain)?;
            let mode: Mode = mode.into();
            let cfg = opts.config(&p, mode, property);
            if emit_lowered && p.has_checked_endorse() {
                println!("{}", program_to_string(&lower_checked(&p)));
            }
            let start = Instant::now();
            let verdict = run_check(&p, property, mode, &cfg)?;
            let elapsed = start.elapsed().as_millis();
            let accepted = verdict.accepted();
            if json {
                let report = CheckReport {
                    tool: "robustcheck",
                    version: VERSION,
                    command: "check",
                    file: file.display().to_string(),
                    property: property.name(),
                    mode: mode.to_string(),
                    verdict,
                    wall_time_ms: timings.then_some(elapsed),
                };
                println!("{}", serde_json::to_string_pretty(&report).unwrap());
            } else {
                print_verdict(&file, property, mode, &verdict);
                if timings {
                    println!("  wall time: {elapsed} ms");
                }
            }
            Ok(if accepted {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Lower { file } => {
            let p = read_program(&file, 4)?;
            print!("{}", program_to_string(&lower_checked(&p)));
            Ok(ExitCode::SUCCESS)
        }
        Command::Treach { file } => {
            let p = read_program(&file, 4)?;
            let t = treach(&p).map_err(|e| e.to_string())?;
            print!("{}", program_to_string(&t));
            Ok(ExitCode::SUCCESS)
        }
        Command::Parse { file } => {
            let p = read_program(&file, 4)?;
            println!("{}", serde_json::to_string_pretty(&p).unwrap());
            Ok(ExitCode::SUCCESS)
        }
        Command::Knowledge {
            file,
            memory,
            prefix,
            kind,
            mode,
            domain,
        } => {
            let p = read_program(&file, domain)?;
            let m = parse_memory(&p, &memory)?;
            let lseq = parse_prefix(&p, &prefix)?;
            let mode: Mode = mode.into();
            let set = match kind {
                KnowledgeKind::Knowledge => knowledge(&p, &p.body, &m, &lseq, mode),
                KnowledgeKind::Progress => progress_knowledge(&p, &p.body, &m, &lseq, mode),
                KnowledgeKind::Divergence => divergence_knowledge(&p, &p.body, &m, &lseq),
            };
            print_memory_set(&p, &set);
            Ok(ExitCode::SUCCESS)
        }
        Command::Corpus { dir, json } => corpus(&dir, json),
    }
}

fn print_verdict(file: &Path, property: CliProperty, mode: Mode, v: &Verdict) {
    let status = match v.status {
        Status::Accept => "accept",
        Status::Reject => "reject",
    };
    let mode_name = if property == CliProperty::Integrity {
        "pi".to_string()
    } else {
        mode.to_string()
    };
    println!(
        "{}: {} [{}] — {status} (universe: {} fair / {} enumerated, domain {})",
        file.display(),
        property.name(),
        mode_name,
        v.universe.fair,
        v.universe.enumerated,
        v.universe.domain,
    );
    if let Some(w) = &v.witness {
        println!("  memory:    {:?}", w.memory);
        println!("  attack:    {}", w.attack);
        println!("  offending: {} (admitted by {})", w.offending, w.clause);
        println!("  release:   {} at position {}", w.event, w.event_index + 1);
        println!("  attack trace:");
        for l in &w.attack_trace {
            println!("    {l}");
        }
        println!("  offending trace:");
        for l in &w.offending_trace {
            println!("    {l}");
        }
    }
}

fn parse_memory(p: &Program, spec: &str) -> Result<Memory, String> {
    let mut m = Memory::zeros(p.env.len());
    for part in spec.split(',').filter(|s| !s.trim().is_empty()) {
        let (name, val) = part
            .split_once('=')
            .ok_or_else(|| format!("bad memory entry `{part}` (want name=value)"))?;
        let v = p
            .env
            .lookup(name.trim())
            .ok_or_else(|| format!("unknown variable `{}`", name.trim()))?;
        let val: u32 = val
            .trim()
            .parse()
            .map_err(|_| format!("bad value in `{part}`"))?;
        if val >= p.domain {
            return Err(format!("value {val} outside domain 0..{}", p.domain));
        }
        m.set(v, val);
    }
    Ok(m)
}

fn parse_prefix(p: &Program, spec: &str) -> Result<Vec<LowEvent>, String> {
    let mut out = Vec::new();
    for tok in spec.split_whitespace() {
        match tok {
            "term" | "⇓" => out.push(LowEvent::Term),
            "div" | "⇑" => out.push(LowEvent::Div),
            _ => {
                let inner = tok
                    .strip_prefix('(')
                    .and_then(|s| s.strip_suffix(')'))
                    .ok_or_else(|| format!("bad event `{tok}` (want (var,value))"))?;
                let (name, val) = inner
                    .split_once(',')
                    .ok_or_else(|| format!("bad event `{tok}`"))?;
                let v = p
                    .env
                    .lookup(name.trim())
                    .ok_or_else(|| format!("unknown variable `{}`", name.trim()))?;
                let val: u32 = val
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad value in `{tok}`"))?;
                out.push(LowEvent::Assign(v, val));
            }
        }
    }
    Ok(out)
}

fn print_memory_set(p: &Program, set: &MemorySet) {
    println!("{} memories:", set.len());
    for m in set.iter() {
        println!("  {}", m.render(&p.env));
    }
}

// --- corpus runner ----------------------------------------------------------

#[derive(Serialize, Clone)]
struct CorpusCheck {
    check: String,
    expected: String,
    actual: String,
    ok: bool,
}

#[derive(Serialize)]
struct CorpusFile {
    file: String,
    checks: Vec<CorpusCheck>,
    ok: bool,
}

#[derive(Serialize)]
struct CorpusReport {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    files: Vec<CorpusFile>,
    ok: bool,
}

struct Expectation {
    property: String,
    mode: Option<CliMode>,
    verdict: String,
}

struct FileConfig {
    domain: u32,
    attack_len: Option<usize>,
    diverge: DivergeOpt,
}

fn parse_sidecars(text: &str) -> Result<(Vec<Expectation>, FileConfig), String> {
    let mut expects = Vec::new();
    let mut cfg = FileConfig {
        domain: 4,
        attack_len: None,
        diverge: DivergeOpt::Auto,
    };
    for line in text.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("// expect:") {
            let (lhs, rhs) = rest
                .split_once('=')
                .ok_or_else(|| format!("bad expect line `{line}`"))?;
            let verdict = rhs.trim().to_string();
            let mut parts = lhs.split_whitespace();
            let property = parts
                .next()
                .ok_or_else(|| format!("bad expect line `{line}`"))?
                .to_string();
            let mode = match parts.next() {
                None => None,
                Some("ps") => Some(CliMode::Ps),
                Some("pi") => Some(CliMode::Pi),
                Some(other) => return Err(format!("bad mode `{other}` in `{line}`")),
            };
            expects.push(Expectation {
                property,
                mode,
                verdict,
            });
        } else if let Some(rest) = line.strip_prefix("// config:") {
            for kv in rest.split_whitespace() {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| format!("bad config entry `{kv}`"))?;
                match k {
                    "domain" => cfg.domain = v.parse().map_err(|_| format!("bad domain `{v}`"))?,
                    "attack-len" => {
                        cfg.attack_len =
                            Some(v.parse().map_err(|_| format!("bad attack-len `{v}`"))?)
                    }
                    "diverge" => {
                        cfg.diverge = match v {
                            "auto" => DivergeOpt::Auto,
                            "on" => DivergeOpt::On,
                            "off" => DivergeOpt::Off,
                            _ => return Err(format!("bad diverge `{v}`")),
                        }
                    }
                    _ => return Err(format!("unknown config key `{k}`")),
                }
            }
        }
    }
    Ok((expects, cfg))
}

fn corpus(dir: &Path, json: bool) -> Result<ExitCode, String> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| format!("cannot read {}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ifc"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(format!("no .ifc files in {}", dir.display()));
    }
    let mut report = CorpusReport {
        tool: "robustcheck",
        version: VERSION,
        command: "corpus",
        files: Vec::new(),
        ok: true,
    };
    for path in &files {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let (expects, fcfg) = parse_sidecars(&text)?;
        let mut checks = Vec::new();
        for e in &expects {
            let (actual, label) = run_expectation(&text, e, &fcfg)
                .map_err(|err| format!("{}: {err}", path.display()))?;
            checks.push(CorpusCheck {
                check: label,
                expected: e.verdict.clone(),
                actual: actual.clone(),
                ok: actual == e.verdict,
            });
        }
        let ok = checks.iter().all(|c| c.ok);
        report.ok &= ok;
        report.files.push(CorpusFile {
            file: path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            checks,
            ok,
        });
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&report).unwrap());
    } else {
        let width = report
            .files
            .iter()
            .map(|f| f.file.len())
            .max()
            .unwrap_or(10);
        for f in &report.files {
            for c in &f.checks {
                println!(
                    "{:width$}  {:24} expected {:7} got {:7} {}",
                    f.file,
                    c.check,
                    c.expected,
                    c.actual,
                    if c.ok { "ok" } else { "MISMATCH" },
                );
            }
        }
        println!(
            "{}",
            if report.ok {
                "all expectations met"
            } else {
                "there were mismatches"
            }
        );
    }
    Ok(if report.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn run_expectation(
    text: &str,
    e: &Expectation,
    fcfg: &FileConfig,
) -> Result<(String, String), String> {
    let label = match e.mode {
        Some(CliMode::Ps) => format!("{} ps", e.property),
        Some(CliMode::Pi) => format!("{} pi", e.property),
        None => e.property.clone(),
    };
    if e.property == "typecheck" {
        let p = parse_program(text).map_err(|err| err.to_string())?;
        let ok = typecheck(&p).is_empty();
        return Ok(((if ok { "ok" } else { "error" }).to_string(), label));
    }
    let property = match e.property.as_str() {
        "robustness" => CliProperty::Robustness,
        "robustness-endorse" => CliProperty::RobustnessEndorse,
        "robustness-checked" => CliProperty::RobustnessChecked,
        "integrity" => CliProperty::Integrity,
        other => return Err(format!("unknown property `{other}`")),
    };
    let mode: Mode = e.mode.unwrap_or(CliMode::Pi).into();
    let p = parse_program(text)
        .map_err(|err| err.to_string())?
        .with_domain(fcfg.domain);
    let max_len = fcfg
        .attack_len
        .unwrap_or_else(|| p.env.untrusted_vars().len().max(1));
    let diverge = match fcfg.diverge {
        DivergeOpt::Auto => mode == Mode::Ps && property != CliProperty::Integrity,
        DivergeOpt::On => true,
        DivergeOpt::Off => false,
    };
    let cfg = AttackConfig::new(max_len, diverge);
    let v = run_check(&p, property, mode, &cfg)?;
    let actual = match v.status {
        Status::Accept => "accept",
        Status::Reject => "reject",
    };
    Ok((actual.to_string(), label))
}
