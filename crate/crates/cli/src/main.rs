use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tarski_qe::blocks::{self, BlockCache, BlockSignature, BlockStore};
use tarski_qe::classify::{check_theorem, classify, eliminate_free, ClassifyOptions, Quadrant, Theorem};
use tarski_qe::corpus::{self, corpus_run, Header, RunOptions};
use tarski_qe::engine::{run, EngineOptions, EngineResult, Verdict};
use tarski_qe::formula::{eval_formula, split_existential, stats, to_dnf, to_dnf_capped};
use tarski_qe::oracle::{decide_univariate, formula_vars, sample_agreement, Point};
use tarski_qe::sexp::{parse_document, Document};
use tarski_qe::simplify::{simplify_clause, SignContext, Simplified};
use tarski_qe::{Formula, Var};

const EXIT_FALSE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RESOURCE: u8 = 3;

#[derive(Parser)]
#[command(name = "tarski", version, about = "Quantifier elimination over the reals with memoized generic blocks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide a sentence (or whether a theorem holds).
    Decide {
        file: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
        /// Print one line per variable elimination.
        #[arg(long)]
        trace: bool,
        /// Exit with status 1 when the verdict differs.
        #[arg(long, value_parser = ["true", "false"])]
        expect: Option<String>,
    },
    /// Place a theorem in the True/False/Mixed/Contradictory quadrants.
    Classify {
        file: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
        /// Only check whether A => H holds.
        #[arg(long)]
        theorem_only: bool,
        /// Print the simplifier's reason for each discarded clause.
        #[arg(long)]
        explain: bool,
        /// Exit with status 1 when the quadrant differs.
        #[arg(long)]
        expect: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Eliminate the quantifiers, printing the quantifier-free result.
    Eliminate {
        file: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Variables, polynomials, degrees and occurrence density.
    Stats {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Inspect and fill the block cache.
    #[command(subcommand)]
    Blocks(BlocksCommand),
    /// Exact and sampling oracles.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Run the built-in theorem corpus.
    #[command(subcommand)]
    Corpus(CorpusCommand),
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// Elimination order, comma separated.
    #[arg(long, value_delimiter = ',')]
    order: Option<Vec<String>>,
    /// Use the orders pinned in the file's `; order:` header lines.
    #[arg(long)]
    pinned: bool,
    /// Finish one clause before starting its siblings.
    #[arg(long)]
    depth_first: bool,
    /// Block cache directory (default: $TARSKI_BLOCK_CACHE; otherwise
    /// generated blocks are kept in memory only).
    #[arg(long, value_name = "DIR")]
    block_cache: Option<PathBuf>,
    #[arg(long, value_name = "SECS")]
    timeout: Option<f64>,
    #[arg(long, value_name = "N")]
    max_clauses: Option<usize>,
}

#[derive(Subcommand)]
enum BlocksCommand {
    /// Library signatures and cached records.
    List {
        #[arg(long, value_name = "DIR")]
        block_cache: Option<PathBuf>,
    },
    /// Generate, verify and store the block for a signature such as
    /// "1EQ,1GT,2GT".
    Gen {
        #[arg(long)]
        sig: String,
        #[arg(long, value_name = "DIR")]
        block_cache: Option<PathBuf>,
        #[arg(long, default_value_t = 2_000)]
        n: usize,
    },
    /// Re-check every cached block against the oracle.
    Verify {
        #[arg(long, value_name = "DIR")]
        block_cache: Option<PathBuf>,
        #[arg(long, default_value_t = 2_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Decide an existential conjunction in one variable exactly.
    DecideUnivariate { file: PathBuf },
    /// Compare two formulas on sample points, one JSON line per point.
    Equiv {
        f: PathBuf,
        g: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Check every entry against its expected outcome.
    Run {
        /// Only entries whose name contains this string.
        filter: Option<String>,
        /// Run the `*.sexp` files of this directory instead.
        #[arg(long, value_name = "DIR")]
        dir: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// List the entries of a directory in the corpus file format.
    Import { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let resource = e
                .chain()
                .any(|c| c.downcast_ref::<tarski_qe::Error>().is_some_and(|e| e.is_resource()));
            ExitCode::from(if resource { EXIT_RESOURCE } else { EXIT_USAGE })
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Decide { file, engine, trace, expect } => decide(&file, &engine, trace, expect.as_deref()),
        Command::Classify { file, engine, theorem_only, explain, expect, seed } => {
            classify_cmd(&file, &engine, theorem_only, explain, expect.as_deref(), seed)
        }
        Command::Eliminate { file, engine } => eliminate(&file, &engine),
        Command::Stats { file, json } => stats_cmd(&file, json),
        Command::Blocks(b) => blocks_cmd(b),
        Command::Oracle(o) => oracle_cmd(o),
        Command::Corpus(c) => corpus_cmd(c),
    }
}

fn read(file: &Path) -> Result<(String, Document)> {
    let text = std::fs::read_to_string(file).with_context(|| format!("cannot read {}", file.display()))?;
    let doc = parse_document(&text).with_context(|| format!("cannot parse {}", file.display()))?;
    for w in &doc.warnings {
        eprintln!("warning: {w}");
    }
    Ok((text, doc))
}

fn cache_dir(flag: Option<&Path>) -> Option<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(blocks::CACHE_ENV).map(PathBuf::from))
}

fn engine_options(args: &EngineArgs, file_text: Option<&str>) -> Result<EngineOptions> {
    let mut opts = EngineOptions::default();
    if let Some(dir) = cache_dir(args.block_cache.as_deref()) {
        opts.store = Arc::new(BlockStore::new(Some(BlockCache::open(dir)?), 2_000));
    }
    opts.order = args.order.as_ref().map(|o| o.iter().map(|v| Var::new(v.trim())).collect());
    opts.depth_first = args.depth_first;
    if let Some(s) = args.timeout {
        if !(s.is_finite() && s > 0.0) {
            bail!("--timeout must be a positive number of seconds");
        }
        opts.timeout = Some(Duration::from_secs_f64(s));
    }
    if let Some(n) = args.max_clauses {
        opts.max_clauses = n;
    }
    if args.pinned {
        if let Some(text) = file_text {
            Header::parse("input", text)?.apply_pins(&mut opts);
        }
    }
    Ok(opts)
}

fn fmt_point(p: &Point) -> String {
    let parts: Vec<String> = p.iter().map(|(v, r)| format!("{v} = {r}")).collect();
    parts.join(", ")
}

fn print_trace(label: Option<&str>, r: &EngineResult) {
    for e in &r.trace {
        match label {
            Some(l) => println!("{l} {e}"),
            None => println!("{e}"),
        }
    }
}

fn verdict_text(v: &Verdict) -> String {
    match v {
        Verdict::True => "true".into(),
        Verdict::False => "false".into(),
        Verdict::Formula(f) => f.to_string(),
    }
}

fn decide(file: &Path, args: &EngineArgs, trace: bool, expect: Option<&str>) -> Result<u8> {
    let (text, doc) = read(file)?;
    let opts = engine_options(args, Some(&text))?;
    let start = Instant::now();
    let verdict = match &doc.theorem {
        Some(form) => {
            let t = Theorem::from_form(form)?;
            if !t.free.is_empty() {
                bail!("theorem has free variables; use `tarski eliminate`");
            }
            let copts = ClassifyOptions { engine: opts, witness_budget: 0, seed: 0 };
            let check = check_theorem(&t, &copts)?;
            if trace {
                print_trace(None, &check.run);
            }
            if check.holds {
                Verdict::True
            } else {
                Verdict::False
            }
        }
        None => {
            let r = run(&doc.formula(), &opts)?;
            if trace {
                print_trace(None, &r);
            }
            r.verdict
        }
    };
    println!("{}", verdict_text(&verdict));
    eprintln!("decided in {:.3}s", start.elapsed().as_secs_f64());
    Ok(match (expect, &verdict) {
        (Some("true"), Verdict::True) | (Some("false"), Verdict::False) | (None, _) => 0,
        _ => EXIT_FALSE,
    })
}

fn theorem_of(doc: &Document) -> Result<Theorem> {
    match &doc.theorem {
        Some(form) => Ok(Theorem::from_form(form)?),
        None => bail!("the file has no (assert-theorem ..) form"),
    }
}

fn explain(t: &Theorem, cap: usize) -> Result<()> {
    for (label, matrix) in [
        ("∃(A∧H)", t.consistent_sentence_matrix()),
        ("∃(A∧¬H)", t.counterexample_matrix()),
    ] {
        let dnf = match to_dnf_capped(&matrix, cap) {
            Ok(d) => d,
            Err(e) if e.is_resource() => {
                println!("{label}: too many clauses to explain ({e})");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let ctx = SignContext::new();
        for (i, c) in dnf.clauses().iter().enumerate() {
            if let Simplified::False(cert) = simplify_clause(c, &ctx) {
                println!("{label} clause {i} discarded: {cert}");
            }
        }
    }
    Ok(())
}

fn classify_cmd(
    file: &Path,
    args: &EngineArgs,
    theorem_only: bool,
    explain_flag: bool,
    expect: Option<&str>,
    seed: u64,
) -> Result<u8> {
    let expect = match expect {
        Some(q) => Some(Quadrant::parse(q).with_context(|| format!("unknown quadrant `{q}`"))?),
        None => None,
    };
    let (text, doc) = read(file)?;
    let t = theorem_of(&doc)?;
    let engine = engine_options(args, Some(&text))?;
    let cap = engine.max_clauses;
    let opts = ClassifyOptions { engine, seed, ..ClassifyOptions::default() };
    if explain_flag {
        explain(&t.closed(), cap)?;
    }
    if theorem_only {
        let check = check_theorem(&t.closed(), &opts)?;
        if check.holds {
            println!("holds");
        } else {
            println!("does not hold");
            if let Some(p) = &check.counterexample {
                println!("counterexample: {}", fmt_point(p));
            }
        }
        return Ok(if expect.is_some() && !check.holds { EXIT_FALSE } else { 0 });
    }
    let r = classify(&t.closed(), &opts)?;
    println!("{}", r.quadrant);
    for (label, sat, w) in [
        ("A∧H", r.sat_ah == Verdict::True, &r.witnesses.ah),
        ("A∧¬H", r.sat_anot_h == Verdict::True, &r.witnesses.anot_h),
    ] {
        match (sat, w) {
            (true, Some(p)) => println!("witness {label}: {}", fmt_point(p)),
            (true, None) => println!("witness {label}: satisfiable, no rational witness found"),
            (false, _) => println!("witness {label}: unsatisfiable"),
        }
    }
    if !t.free.is_empty() {
        let (region, _) = eliminate_free(&t, &opts.engine)?;
        println!("region: {region}");
    }
    Ok(match expect {
        Some(q) if q != r.quadrant => EXIT_FALSE,
        _ => 0,
    })
}

fn eliminate(file: &Path, args: &EngineArgs) -> Result<u8> {
    let (text, doc) = read(file)?;
    let opts = engine_options(args, Some(&text))?;
    let out = match &doc.theorem {
        Some(form) => eliminate_free(&Theorem::from_form(form)?, &opts)?.0,
        None => match run(&doc.formula(), &opts)?.verdict {
            Verdict::True => Formula::True,
            Verdict::False => Formula::False,
            Verdict::Formula(f) => f,
        },
    };
    println!("{out}");
    Ok(0)
}

fn stats_cmd(file: &Path, json: bool) -> Result<u8> {
    let (_, doc) = read(file)?;
    let f = match &doc.theorem {
        Some(t) => Formula::and([t.assumptions.clone(), t.hypothesis.clone()]),
        None => doc.formula(),
    };
    let s = stats(&f);
    if json {
        println!("{}", serde_json::to_string_pretty(&s)?);
        return Ok(0);
    }
    println!("variables: {} ({})", s.variables.len(), s.variables.join(" "));
    println!("polynomials: {}", s.polynomials.len());
    println!("max total degree: {}", s.max_total_degree);
    println!("max degree in one variable: {}", s.max_var_degree);
    println!("occurrence density: {:.3}", s.density);
    if let Some(t) = &doc.theorem {
        let dnf = |g: Formula| to_dnf(&g).map(|d| d.len().to_string()).unwrap_or_else(|_| "too many".into());
        let th = Theorem::from_form(t)?;
        println!("clauses of A∧H: {}", dnf(th.consistent_sentence_matrix()));
        println!("clauses of A∧¬H: {}", dnf(th.counterexample_matrix()));
    }
    Ok(0)
}

fn open_cache(flag: Option<&Path>) -> Result<BlockCache> {
    Ok(BlockCache::open_default(flag)?)
}

fn blocks_cmd(cmd: BlocksCommand) -> Result<u8> {
    match cmd {
        BlocksCommand::List { block_cache } => {
            for sig in blocks::library() {
                println!("library  {:<8} {sig}", sig.name().unwrap_or(""));
            }
            let cache = open_cache(block_cache.as_deref())?;
            for b in cache.list()? {
                println!(
                    "cached   {:<8} {} {} clauses of {} ({})",
                    b.signature.name().unwrap_or(""),
                    b.signature,
                    to_dnf(&b.qf).map(|d| d.len()).unwrap_or(0),
                    b.provenance,
                    if b.verified { "verified" } else { "unverified" }
                );
            }
            Ok(0)
        }
        BlocksCommand::Gen { sig, block_cache, n } => {
            let sig: BlockSignature = sig.parse()?;
            let mut b = blocks::generate(&sig)?;
            let report = blocks::verify(&b, n, 0)?;
            b.verified = report.agrees();
            if !b.verified {
                println!("{}", serde_json::to_string(&report)?);
                bail!("generated block {sig} disagrees with the oracle");
            }
            let path = open_cache(block_cache.as_deref())?.put(&b)?;
            print!("{}", blocks::record_text(&b));
            eprintln!("stored {}", path.display());
            Ok(0)
        }
        BlocksCommand::Verify { block_cache, n, seed } => {
            let cache = open_cache(block_cache.as_deref())?;
            let mut failed = 0;
            for b in cache.list()? {
                let report = blocks::verify(&b, n, seed)?;
                let status = if report.agrees() { "ok" } else { "FAIL" };
                println!("{status:<4} {} ({} samples, {} disagreements)", b.signature, n, report.disagreements.len());
                failed += usize::from(!report.agrees());
            }
            Ok(if failed > 0 { EXIT_FALSE } else { 0 })
        }
    }
}

/// The quantifier-free form of a file's formula.
fn quantifier_free(file: &Path) -> Result<Formula> {
    let (_, doc) = read(file)?;
    if doc.theorem.is_some() {
        bail!("{}: expected a formula, found a theorem", file.display());
    }
    let f = doc.formula();
    if f.is_quantifier_free() {
        return Ok(f);
    }
    Ok(match run(&f, &EngineOptions::default())?.verdict {
        Verdict::True => Formula::True,
        Verdict::False => Formula::False,
        Verdict::Formula(g) => g,
    })
}

fn oracle_cmd(cmd: OracleCommand) -> Result<u8> {
    match cmd {
        OracleCommand::DecideUnivariate { file } => {
            let (_, doc) = read(&file)?;
            let (_, matrix) = split_existential(&doc.formula())?;
            let vars = formula_vars(&matrix);
            let [x] = vars.as_slice() else {
                bail!("expected exactly one variable, found {}", vars.len());
            };
            let mut sat = false;
            for c in to_dnf(&matrix)?.clauses() {
                if decide_univariate(c, x)? {
                    sat = true;
                    break;
                }
            }
            println!("{sat}");
            Ok(0)
        }
        OracleCommand::Equiv { f, g, n, seed } => {
            let f = quantifier_free(&f)?;
            let g = quantifier_free(&g)?;
            let vars: Vec<Var> = f.vars().union(&g.vars()).cloned().collect();
            let (report, rows) = sample_agreement(&vars, n, seed, true, |pt| {
                Ok((eval_formula(&f, pt)?, eval_formula(&g, pt)?))
            })?;
            for row in &rows {
                println!("{}", serde_json::to_string(row)?);
            }
            let summary = serde_json::json!({
                "sampler": report.sampler,
                "seed": report.seed,
                "n": report.n,
                "corners": report.corners,
                "disagreements": report.disagreements.len(),
            });
            println!("{summary}");
            Ok(if report.agrees() { 0 } else { EXIT_FALSE })
        }
    }
}

fn corpus_cmd(cmd: CorpusCommand) -> Result<u8> {
    match cmd {
        CorpusCommand::Run { filter, dir, json, seed, engine } => {
            let entries = match &dir {
                Some(d) => corpus::import(d)?,
                None => corpus::entries(),
            };
            let opts = RunOptions {
                engine: engine_options(&engine, None)?,
                seed,
                pinned: engine.pinned,
                ..RunOptions::default()
            };
            let report = corpus_run(&entries, filter.as_deref(), &opts);
            if report.rows.is_empty() {
                eprintln!("no entries match {:?}", filter.unwrap_or_default());
                return Ok(EXIT_USAGE);
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.table());
            }
            Ok(if report.all_passed() { 0 } else { EXIT_FALSE })
        }
        CorpusCommand::Import { dir } => {
            let entries = corpus::import(&dir)?;
            if entries.is_empty() {
                eprintln!("no entries in {}", dir.display());
                return Ok(EXIT_USAGE);
            }
            for e in &entries {
                println!("{:<28} expect {:<13} {}", e.name, e.expected.to_string(), e.description);
            }
            Ok(0)
        }
    }
}
