//! `cglab`: command-line front end for the constraint-grammar laboratory.
//!
//! Subcommands tie the library into reproducible runs: grammar execution
//! (`run`), machine simulation (`tm`), machine-to-grammar compilation
//! (`compile`), differential checking (`check`), finite-state analyses
//! (`analyze`), growth benchmarks (`bench`), and input encoding (`encode`).
//!
//! Exit codes are disjoint across outcomes: 0 success (fixpoint, accepted,
//! clean check); 1 usage, file, or format errors; 2 derivation loop;
//! 3 resource bound exceeded; 4 step/application budget spent; 5 input
//! rejected; 6 tape-discipline violation; 7 differential mismatch.
//! Stdout carries data; stderr carries traces, stats, and diagnostics.

use std::fs;
use std::num::NonZeroU64;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cglab_core::analysis::{
    curve_for_compiled, curve_for_tm, equivalence_check, extract_nfa, weight_survey, CurveConfig,
};
use cglab_core::compile::{check_machine, compile, differential_check, encode_input, DiffConfig, DiffReport};
use cglab_core::engine::{derive, Bounds, DeriveOptions, DeriveResult};
use cglab_core::samples::{self, RandomTmConfig};
use cglab_core::tm::{simulate, SimOptions, TmVerdict, TuringMachine};
use cglab_core::{CohortString, Grammar};

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_LOOP: u8 = 2;
const EXIT_BOUND: u8 = 3;
const EXIT_STEP_LIMIT: u8 = 4;
const EXIT_REJECTED: u8 = 5;
const EXIT_VIOLATION: u8 = 6;
const EXIT_MISMATCH: u8 = 7;

#[derive(Parser, Debug)]
#[command(
    name = "cglab",
    version,
    about = "Constraint-grammar laboratory: grammars, machines, reductions, analyses",
    after_help = "Exit codes: 0 ok | 1 usage/input error | 2 loop | 3 bound exceeded\n\
                  4 step limit | 5 rejected | 6 tape violation | 7 differential mismatch"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a grammar on a cohort stream until fixpoint, loop, bound, or budget
    Run(RunArgs),
    /// Simulate a machine on an input string
    Tm(TmArgs),
    /// Compile a machine into an equivalent grammar
    Compile(CompileArgs),
    /// Run machine and compiled grammar side by side and compare
    Check(CheckArgs),
    /// Crossing-sequence, automaton-equivalence, and visit-budget analyses
    Analyze(AnalyzeArgs),
    /// Sample runtime growth curves over random inputs
    Bench(BenchArgs),
    /// Print the cohort-stream encoding of a machine input
    Encode(EncodeArgs),
}

/// Where a machine comes from: a description file or a built-in sample.
#[derive(Args, Debug)]
#[group(multiple = false)]
struct MachineSource {
    /// Machine description file (`states:`/`alphabet:`/`start:`/`final:`
    /// headers plus one `q A -> r B d` transition per line)
    #[arg(long, value_name = "FILE")]
    machine: Option<PathBuf>,
    /// Built-in sample machine
    #[arg(long, value_name = "NAME",
          value_parser = clap::builder::PossibleValuesParser::new(samples::SAMPLE_NAMES))]
    sample: Option<String>,
}

impl MachineSource {
    fn get(&self) -> Result<Option<(String, TuringMachine)>> {
        if let Some(path) = &self.machine {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let tm = TuringMachine::parse(&text)
                .with_context(|| format!("parsing machine {}", path.display()))?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "machine".to_string());
            Ok(Some((name, tm)))
        } else if let Some(name) = &self.sample {
            let tm = samples::by_name(name)
                .ok_or_else(|| anyhow!("unknown sample `{name}`"))?;
            Ok(Some((name.clone(), tm)))
        } else {
            Ok(None)
        }
    }

    fn load(&self) -> Result<(String, TuringMachine)> {
        self.get()?
            .ok_or_else(|| anyhow!("no machine given: pass --machine FILE or --sample NAME"))
    }
}

/// Resource bounds shared by grammar-running subcommands.
#[derive(Args, Debug)]
struct BoundsArgs {
    /// Insertion budget per original gap (fertility)
    #[arg(short = 'f', long)]
    fertility: Option<u64>,
    /// Operation budget per cohort (volume), at least 1
    #[arg(short = 'v', long)]
    volume: Option<NonZeroU64>,
    /// Largest allowed jump between consecutive action sites (distance)
    #[arg(short = 'm', long)]
    distance: Option<u64>,
    /// Application budget
    #[arg(long)]
    max_steps: Option<u64>,
}

impl BoundsArgs {
    fn bounds(&self) -> Bounds {
        Bounds {
            fertility: self.fertility,
            volume: self.volume,
            distance: self.distance,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Grammar file
    grammar: PathBuf,
    /// Cohort stream file
    cohorts: PathBuf,
    #[command(flatten)]
    bounds: BoundsArgs,
    /// Stop with exit code 2 when a string recurs
    #[arg(long)]
    detect_loops: bool,
    /// Print every applied rule and site to stderr
    #[arg(long)]
    trace: bool,
}

#[derive(Args, Debug)]
struct TmArgs {
    #[command(flatten)]
    machine: MachineSource,
    /// Input string (single-letter symbols may be run together)
    #[arg(long, default_value = "")]
    input: String,
    /// Step budget
    #[arg(long, default_value_t = 100_000)]
    max_steps: u64,
    /// Per-square visit budget; exhausting it is a violation
    #[arg(short = 'w', long)]
    weight: Option<NonZeroU64>,
    /// Print every configuration to stderr
    #[arg(long)]
    trace: bool,
}

#[derive(Args, Debug)]
struct CompileArgs {
    #[command(flatten)]
    machine: MachineSource,
    /// Write the grammar here (plus a `.manifest` sidecar mapping markers
    /// to states); without this the grammar goes to stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    machine: MachineSource,
    /// Check this grammar file against the machine instead of the freshly
    /// compiled one (for probing altered grammars)
    #[arg(long, value_name = "FILE")]
    grammar: Option<PathBuf>,
    /// Compare on every input up to this length
    #[arg(long, default_value_t = 3)]
    max_len: usize,
    /// Add this many seeded random machines to the corpus
    #[arg(long, default_value_t = 0, value_name = "COUNT")]
    random: u64,
    /// First seed for the random machines
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Machine step budget per row
    #[arg(long, default_value_t = 10_000)]
    tm_max_steps: u64,
    /// Print every row, not only the summary and the disagreements
    #[arg(long)]
    verbose: bool,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    machine: MachineSource,
    /// Tabulate boundary crossing sequences over all short inputs
    #[arg(long)]
    crossings: bool,
    /// Extract the depth-K automaton and compare it with the machine
    #[arg(long, value_name = "K")]
    k: Option<usize>,
    /// Run with this per-square visit budget over all short inputs
    #[arg(long, value_name = "W")]
    weights: Option<NonZeroU64>,
    /// Largest input length surveyed
    #[arg(long, default_value_t = 4)]
    max_len: usize,
    /// Step budget per run
    #[arg(long, default_value_t = 100_000)]
    max_steps: u64,
    /// Cap on candidate automaton states before extraction refuses
    #[arg(long, default_value_t = 1_000_000)]
    capacity: u64,
    /// CSV rows instead of aligned text
    #[arg(long)]
    csv: bool,
    /// Print full detail (all rows; the extracted automaton)
    #[arg(long)]
    verbose: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    machine: MachineSource,
    /// Input lengths to sample, ascending (at least two)
    #[arg(long, value_delimiter = ',', num_args = 1..,
          default_values_t = [8usize, 16, 32, 64, 128, 256])]
    sizes: Vec<usize>,
    /// Random inputs per length
    #[arg(long, default_value_t = 3)]
    reps: u64,
    /// Seed for the random inputs
    #[arg(long, default_value_t = 0xC0FFEE)]
    seed: u64,
    /// Tolerated relative growth of the normalized cost between sizes
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Step budget per run
    #[arg(long, default_value_t = 10_000_000)]
    max_steps: u64,
    /// Measure the compiled grammar's rule applications instead of
    /// machine steps
    #[arg(long)]
    compiled: bool,
    /// CSV points instead of the text table
    #[arg(long)]
    csv: bool,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[command(flatten)]
    machine: MachineSource,
    /// Input string to encode
    #[arg(long, default_value = "")]
    input: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Tm(args) => cmd_tm(args),
        Command::Compile(args) => cmd_compile(args),
        Command::Check(args) => cmd_check(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Encode(args) => cmd_encode(args),
    }
}

fn cmd_run(args: RunArgs) -> Result<u8> {
    let grammar_text = fs::read_to_string(&args.grammar)
        .with_context(|| format!("reading {}", args.grammar.display()))?;
    let grammar = Grammar::parse(&grammar_text)
        .with_context(|| format!("parsing grammar {}", args.grammar.display()))?;
    let cohort_text = fs::read_to_string(&args.cohorts)
        .with_context(|| format!("reading {}", args.cohorts.display()))?;
    let start = CohortString::parse(&cohort_text, &grammar.alphabet)
        .with_context(|| format!("parsing cohorts {}", args.cohorts.display()))?;

    let options = DeriveOptions {
        detect_loops: args.detect_loops,
        want_trace: args.trace,
        ..Default::default()
    };
    let outcome = derive(&grammar, start, &args.bounds.bounds(), &options);

    if let Some(trace) = &outcome.trace {
        for (i, entry) in trace.iter().enumerate() {
            eprintln!(
                "step {:>4}: rule {} ({}) at {} -> {}",
                i + 1,
                entry.rule_index,
                grammar.rules[entry.rule_index].keyword(),
                entry.site,
                entry.after
            );
        }
    }

    let code = match &outcome.result {
        DeriveResult::Fixpoint(s) => {
            print!("{}", s.serialize());
            EXIT_OK
        }
        DeriveResult::Loop { info, last } => {
            println!(
                "loop: period {} (string first seen after {} applications, seen again at {})",
                info.period(),
                info.first_seen,
                info.detected_at
            );
            println!("last: {}", last.compact());
            EXIT_LOOP
        }
        DeriveResult::BoundExceeded { kind, site, last } => {
            println!("bound exceeded: {kind} at position {site}");
            println!("last: {}", last.compact());
            EXIT_BOUND
        }
        DeriveResult::StepLimit { last } => {
            println!("step limit: rules still apply");
            println!("last: {}", last.compact());
            EXIT_STEP_LIMIT
        }
    };

    let stats = &outcome.stats;
    eprintln!("result: {}", outcome.result.label());
    eprintln!("applications: {}", stats.applications);
    eprintln!("max-gap-insertions: {}", stats.max_gap_insertions());
    eprintln!("max-cohort-ops: {}", stats.max_cohort_ops());
    eprintln!("scan-work: {}", stats.scan_work);
    Ok(code)
}

fn cmd_tm(args: TmArgs) -> Result<u8> {
    let (_, tm) = args.machine.load()?;
    let input = tm.parse_input(&args.input).context("parsing --input")?;
    let options = SimOptions {
        max_steps: args.max_steps,
        weight: args.weight,
        record_trace: args.trace,
    };
    let run = simulate(&tm, &input, &options)?;

    if let Some(trace) = &run.trace {
        for (i, config) in trace.iter().enumerate() {
            let tape: Vec<String> = config.tape.iter().map(|s| s.to_string()).collect();
            eprintln!(
                "step {:>4}: state {} head {} tape {}",
                i,
                config.state.name(),
                config.head,
                tape.join(" ")
            );
        }
    }

    let tape = run.tape_string();
    let shown = if tape.is_empty() { "(empty)" } else { &tape };
    let code = match &run.verdict {
        TmVerdict::Accepted => {
            println!("ACCEPT {shown} steps={}", run.steps);
            EXIT_OK
        }
        TmVerdict::Rejected => {
            println!("REJECT {shown} steps={}", run.steps);
            EXIT_REJECTED
        }
        TmVerdict::StepLimit => {
            println!("STEP-LIMIT {shown} steps={}", run.steps);
            EXIT_STEP_LIMIT
        }
        TmVerdict::ContractViolation(kind) => {
            println!("VIOLATION {shown} steps={}", run.steps);
            eprintln!("tape discipline violated: {kind}");
            EXIT_VIOLATION
        }
    };
    Ok(code)
}

fn cmd_compile(args: CompileArgs) -> Result<u8> {
    let (_, tm) = args.machine.load()?;
    let compiled = compile(&tm)?;
    let text = compiled.grammar.serialize();
    match &args.out {
        Some(path) => {
            fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
            let sidecar = PathBuf::from(format!("{}.manifest", path.display()));
            fs::write(&sidecar, compiled.manifest_text())
                .with_context(|| format!("writing {}", sidecar.display()))?;
            println!("rules: {}", compiled.grammar.rules.len());
            eprintln!("wrote {} and {}", path.display(), sidecar.display());
        }
        None => {
            print!("{text}");
            eprintln!("rules: {}", compiled.grammar.rules.len());
        }
    }
    Ok(EXIT_OK)
}

fn cmd_check(args: CheckArgs) -> Result<u8> {
    let config = DiffConfig { tm_max_steps: args.tm_max_steps, ..Default::default() };
    let named = args.machine.get()?;

    let report = if let Some(grammar_path) = &args.grammar {
        if args.random > 0 {
            bail!("--grammar checks a single machine; drop --random");
        }
        let (name, tm) =
            named.ok_or_else(|| anyhow!("--grammar needs --machine or --sample"))?;
        let mut compiled = compile(&tm)?;
        let text = fs::read_to_string(grammar_path)
            .with_context(|| format!("reading {}", grammar_path.display()))?;
        compiled.grammar = Grammar::parse(&text)
            .with_context(|| format!("parsing grammar {}", grammar_path.display()))?;
        let mut report = DiffReport::default();
        check_machine(&name, &tm, &compiled, args.max_len, &config, &mut report)?;
        report
    } else {
        let mut suite: Vec<(String, TuringMachine)> = Vec::new();
        if let Some(pair) = named {
            suite.push(pair);
        }
        let random_config = RandomTmConfig::default();
        for offset in 0..args.random {
            let seed = args.seed + offset;
            suite.push((format!("random-{seed}"), samples::random_tm(seed, &random_config)));
        }
        if suite.is_empty() {
            bail!("nothing to check: pass --machine FILE, --sample NAME, or --random COUNT");
        }
        differential_check(&suite, args.max_len, &config)?
    };

    print!("{}", report.render_text(args.verbose));
    Ok(if report.mismatches > 0 { EXIT_MISMATCH } else { EXIT_OK })
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<u8> {
    let modes = usize::from(args.crossings) + usize::from(args.k.is_some())
        + usize::from(args.weights.is_some());
    if modes != 1 {
        bail!("pick exactly one of --crossings, --k K, --weights W");
    }
    let (name, tm) = args.machine.load()?;

    if args.crossings {
        let mut deepest = 0;
        let mut all_alternate = true;
        if args.csv {
            println!("input,verdict,steps,deepest,alternating");
        } else {
            println!("{:<12} {:<10} {:>6} {:>8} {:>12}", "input", "verdict", "steps", "deepest", "alternating");
        }
        for input in all_inputs(&tm, args.max_len) {
            let run = simulate(&tm, &input, &SimOptions::with_max_steps(args.max_steps))?;
            let shown: String = input.iter().map(|s| &**s).collect();
            let shown = if shown.is_empty() { "(empty)".to_string() } else { shown };
            let depth = run.crossings.max_sequence_len();
            let alternating = run.crossings.alternation_ok();
            deepest = deepest.max(depth);
            all_alternate &= alternating;
            if args.csv {
                println!("{shown},{},{},{depth},{alternating}", run.verdict.label(), run.steps);
            } else {
                println!(
                    "{:<12} {:<10} {:>6} {:>8} {:>12}",
                    shown,
                    run.verdict.label(),
                    run.steps,
                    depth,
                    alternating
                );
            }
        }
        println!(
            "deepest crossing sequence: {deepest}; alternation: {}",
            if all_alternate { "ok" } else { "violated" }
        );
        return Ok(EXIT_OK);
    }

    if let Some(k) = args.k {
        let nfa = extract_nfa(&tm, k, args.capacity)?;
        eprintln!(
            "{name}: depth-{k} automaton with {} states, {} edges",
            nfa.state_count(),
            nfa.edge_count()
        );
        if args.verbose {
            print!("{}", nfa.export());
        }
        let report = equivalence_check(&tm, &nfa, args.max_len, args.max_steps)?;
        if args.csv {
            print!("{}", report.render_csv());
        } else {
            print!("{}", report.render_text());
        }
        if report.agreed() {
            println!("EQUIVALENT on all {} inputs up to length {}", report.inputs_checked(), args.max_len);
        } else {
            println!("NOT EQUIVALENT: {} disagreements", report.disagreements().len());
        }
        return Ok(EXIT_OK);
    }

    let weight = args.weights.expect("mode checked above");
    let report = weight_survey(&tm, weight, args.max_len, args.max_steps)?;
    print!("{}", report.render_text(args.verbose));
    Ok(EXIT_OK)
}

fn cmd_bench(args: BenchArgs) -> Result<u8> {
    if args.sizes.len() < 2 {
        bail!("need at least two sizes to judge growth");
    }
    if args.sizes.windows(2).any(|w| w[0] >= w[1]) {
        bail!("sizes must be strictly ascending");
    }
    let (name, tm) = args.machine.load()?;
    let config = CurveConfig {
        sizes: args.sizes.clone(),
        reps: args.reps,
        seed: args.seed,
        max_steps: args.max_steps,
        epsilon: args.epsilon,
    };
    let report = if args.compiled {
        curve_for_compiled(&tm, &name, &config)?
    } else {
        curve_for_tm(&tm, &name, &config)?
    };
    if args.csv {
        println!("n,mean,per_n,per_n_log_n");
        for p in &report.points {
            println!("{},{},{},{}", p.n, p.mean_cost, p.per_n, p.per_n_log_n);
        }
        println!("# verdict: {}", report.verdict.label());
    } else {
        print!("{}", report.render_text());
    }
    Ok(EXIT_OK)
}

fn cmd_encode(args: EncodeArgs) -> Result<u8> {
    let (_, tm) = args.machine.load()?;
    let compiled = compile(&tm)?;
    let input = tm.parse_input(&args.input).context("parsing --input")?;
    let encoded = encode_input(&compiled, &input)?;
    print!("{}", encoded.serialize());
    Ok(EXIT_OK)
}

/// Every input over the machine's alphabet up to `max_len`, shortest first.
fn all_inputs(tm: &TuringMachine, max_len: usize) -> Vec<Vec<std::sync::Arc<str>>> {
    let symbols: Vec<std::sync::Arc<str>> = tm.alphabet().map(std::sync::Arc::from).collect();
    let mut out: Vec<Vec<std::sync::Arc<str>>> = vec![Vec::new()];
    let mut layer: Vec<Vec<std::sync::Arc<str>>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for word in &layer {
            for sym in &symbols {
                let mut w = word.clone();
                w.push(sym.clone());
                next.push(w);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}
