//! Theorem fixtures with expected outcomes, and a runner that checks them.
//!
//! Expectations live in header comments of each file:
//!
//! ```text
//! ; expect: Mixed                      quadrant, or true/false for plain sentences
//! ; expect-region: <formula>           region over the :free variables
//! ; order: v12 v11 v10                 pinned elimination order
//! ; order 3: v12 v8 v7                 pin for top-level clause 3 only
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::classify::{classify, eliminate_free, ClassifyOptions, Quadrant, Theorem, DEFAULT_WITNESS_BUDGET};
use crate::engine::{run, EngineOptions, Verdict};
use crate::error::{Error, Result};
use crate::exec;
use crate::oracle::{sample_equivalence, SAMPLER_VERSION};
use crate::poly::Var;
use crate::sexp::{parse_document, parse_formula};

/// Sample points used to compare a region with its expected formula.
pub const REGION_SAMPLES: usize = 2_000;

/// What an entry is expected to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Expected {
    /// A theorem file (`assert-theorem`) and its quadrant.
    Quadrant(Quadrant),
    /// A plain sentence (`assert`) and its truth value.
    Truth(bool),
}

impl Expected {
    pub fn parse(s: &str) -> Option<Expected> {
        match s.trim() {
            "true" | "TRUE" => Some(Expected::Truth(true)),
            "false" | "FALSE" => Some(Expected::Truth(false)),
            q => Quadrant::parse(q).map(Expected::Quadrant),
        }
    }
}

impl std::fmt::Display for Expected {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Expected::Quadrant(q) => write!(f, "{q}"),
            Expected::Truth(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: String,
    /// First comment line of the file.
    pub description: String,
    pub text: String,
    pub expected: Expected,
    pub expected_region: Option<String>,
    pub order: Option<Vec<Var>>,
    pub clause_orders: BTreeMap<usize, Vec<Var>>,
}

fn header_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let rest = line.trim_start_matches(';').trim_start();
    let rest = rest.strip_prefix(key)?;
    Some(rest.trim())
}

fn vars_of(s: &str) -> Vec<Var> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(Var::new)
        .collect()
}

/// Metadata read from the header comments of a file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Header {
    /// First comment line.
    pub description: String,
    pub expected: Option<Expected>,
    pub expected_region: Option<String>,
    pub order: Option<Vec<Var>>,
    pub clause_orders: BTreeMap<usize, Vec<Var>>,
}

impl Header {
    pub fn parse(name: &str, text: &str) -> Result<Header> {
        let mut h = Header::default();
        for line in text.lines().map(str::trim).filter(|l| l.starts_with(';')) {
            if h.description.is_empty() {
                h.description = line.trim_start_matches(';').trim().to_string();
            }
            if let Some(v) = header_value(line, "expect-region:") {
                parse_formula(v)?;
                h.expected_region = Some(v.to_string());
            } else if let Some(v) = header_value(line, "expect:") {
                h.expected = Some(Expected::parse(v).ok_or_else(|| {
                    Error::Precondition(format!("{name}: unknown expectation `{v}`"))
                })?);
            } else if let Some(v) = header_value(line, "order:") {
                h.order = Some(vars_of(v));
            } else if let Some(v) = header_value(line, "order ") {
                let (idx, vars) = v
                    .split_once(':')
                    .ok_or_else(|| Error::Precondition(format!("{name}: malformed order line `{line}`")))?;
                let idx: usize = idx
                    .trim()
                    .parse()
                    .map_err(|_| Error::Precondition(format!("{name}: malformed clause index `{idx}`")))?;
                h.clause_orders.insert(idx, vars_of(vars));
            }
        }
        Ok(h)
    }

    /// Installs the pinned orders into `opts` unless it already has some.
    pub fn apply_pins(&self, opts: &mut EngineOptions) {
        if opts.order.is_none() && opts.clause_orders.is_empty() {
            opts.order = self.order.clone();
            opts.clause_orders = self.clause_orders.clone();
        }
    }
}

impl CorpusEntry {
    /// Reads an entry from file text; the file must parse and carry an
    /// `; expect:` header.
    pub fn from_text(name: &str, text: &str) -> Result<CorpusEntry> {
        parse_document(text)?;
        let h = Header::parse(name, text)?;
        let expected = h
            .expected
            .ok_or_else(|| Error::Precondition(format!("{name}: missing `; expect:` header")))?;
        Ok(CorpusEntry {
            name: name.to_string(),
            description: h.description,
            text: text.to_string(),
            expected,
            expected_region: h.expected_region,
            order: h.order,
            clause_orders: h.clause_orders,
        })
    }
}

const EMBEDDED: [(&str, &str); 5] = [
    ("marshall", include_str!("../../../corpus/marshall.sexp")),
    ("krugman", include_str!("../../../corpus/krugman.sexp")),
    ("hicks", include_str!("../../../corpus/hicks.sexp")),
    ("jehle_reny", include_str!("../../../corpus/jehle_reny.sexp")),
    ("jehle_reny_counterexample", include_str!("../../../corpus/jehle_reny_counterexample.sexp")),
];

/// The built-in corpus.
pub fn entries() -> Vec<CorpusEntry> {
    EMBEDDED
        .iter()
        .map(|(n, t)| CorpusEntry::from_text(n, t).expect("embedded corpus entries parse"))
        .collect()
}

/// Loads every `*.sexp` file of `dir` (sorted by name) as an entry.
pub fn import(dir: &Path) -> Result<Vec<CorpusEntry>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "sexp"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            CorpusEntry::from_text(&name, &std::fs::read_to_string(p)?)
        })
        .collect()
}

#[derive(Clone)]
pub struct RunOptions {
    pub engine: EngineOptions,
    pub seed: u64,
    /// Use the pinned orders from the entry headers when `engine.order` is
    /// not set.
    pub pinned: bool,
    /// Witness-search trials per satisfiable sentence.
    pub witness_budget: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            engine: EngineOptions::default(),
            seed: 0,
            pinned: false,
            witness_budget: DEFAULT_WITNESS_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusRow {
    pub name: String,
    pub expected: String,
    pub got: Option<String>,
    /// Whether the region matched `expect-region` on sampled points.
    pub region_ok: Option<bool>,
    pub region: Option<String>,
    pub pass: bool,
    pub millis: u128,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusReport {
    pub sampler: &'static str,
    pub seed: u64,
    pub rows: Vec<CorpusRow>,
}

impl CorpusReport {
    pub fn passed(&self) -> usize {
        self.rows.iter().filter(|r| r.pass).count()
    }

    pub fn all_passed(&self) -> bool {
        self.passed() == self.rows.len()
    }

    /// The report with timings zeroed, for comparing runs.
    pub fn without_timings(&self) -> CorpusReport {
        let mut r = self.clone();
        for row in &mut r.rows {
            row.millis = 0;
        }
        r
    }

    /// Aligned text table with a summary line.
    pub fn table(&self) -> String {
        let w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(5);
        let mut out = String::new();
        let _ = writeln!(out, "{:<w$}  {:<13}  {:<13}  {:<6}  {:>9}", "entry", "expected", "got", "result", "time");
        for r in &self.rows {
            let got = r.got.clone().unwrap_or_else(|| "error".into());
            let result = if r.pass { "pass" } else { "FAIL" };
            let _ = writeln!(
                out,
                "{:<w$}  {:<13}  {:<13}  {:<6}  {:>7}ms",
                r.name, r.expected, got, result, r.millis
            );
            if let Some(e) = &r.error {
                let _ = writeln!(out, "{:<w$}    {e}", "");
            }
            if r.region_ok == Some(false) {
                let _ = writeln!(out, "{:<w$}    region mismatch: {}", "", r.region.as_deref().unwrap_or(""));
            }
        }
        let _ = writeln!(out, "{}/{} passed", self.passed(), self.rows.len());
        out
    }
}

fn engine_for(entry: &CorpusEntry, opts: &RunOptions) -> EngineOptions {
    let mut e = opts.engine.clone();
    if opts.pinned && e.order.is_none() && e.clause_orders.is_empty() {
        e.order = entry.order.clone();
        e.clause_orders = entry.clause_orders.clone();
    }
    e
}

/// Outcome of one entry: the answer and, for theorems with free variables,
/// the region and whether it matched.
fn evaluate(entry: &CorpusEntry, opts: &RunOptions) -> Result<(String, Option<String>, Option<bool>)> {
    let doc = parse_document(&entry.text)?;
    let engine = engine_for(entry, opts);
    let Some(form) = &doc.theorem else {
        let v = run(&doc.formula(), &engine)?.verdict;
        let got = match v {
            Verdict::True => "true".to_string(),
            Verdict::False => "false".to_string(),
            Verdict::Formula(f) => f.to_string(),
        };
        return Ok((got, None, None));
    };
    let t = Theorem::from_form(form)?;
    let copts = ClassifyOptions { engine: engine.clone(), witness_budget: opts.witness_budget, seed: opts.seed };
    let q = classify(&t.closed(), &copts)?.quadrant;
    if t.free.is_empty() {
        return Ok((q.to_string(), None, None));
    }
    let (region, _) = eliminate_free(&t, &engine)?;
    let ok = match &entry.expected_region {
        Some(expected) => {
            let g = parse_formula(expected)?;
            Some(sample_equivalence(&region, &g, &t.free, REGION_SAMPLES, opts.seed)?.agrees())
        }
        None => None,
    };
    Ok((q.to_string(), Some(region.to_string()), ok))
}

/// Runs the entries whose name contains `filter` (all when `None`), in
/// parallel, and compares each against its expectation.
pub fn corpus_run(entries: &[CorpusEntry], filter: Option<&str>, opts: &RunOptions) -> CorpusReport {
    let selected: Vec<&CorpusEntry> = entries
        .iter()
        .filter(|e| filter.is_none_or(|f| e.name.contains(f)))
        .collect();
    let rows = exec::map(&selected, |entry| {
        let start = Instant::now();
        let outcome = evaluate(entry, opts);
        let millis = start.elapsed().as_millis();
        let expected = entry.expected.to_string();
        match outcome {
            Ok((got, region, region_ok)) => CorpusRow {
                name: entry.name.clone(),
                pass: got == expected && region_ok != Some(false),
                expected,
                got: Some(got),
                region_ok,
                region,
                millis,
                error: None,
            },
            Err(e) => CorpusRow {
                name: entry.name.clone(),
                expected,
                got: None,
                region_ok: None,
                region: None,
                pass: false,
                millis,
                error: Some(e.to_string()),
            },
        }
    });
    CorpusReport { sampler: SAMPLER_VERSION, seed: opts.seed, rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_entries_load() {
        let es = entries();
        assert_eq!(es.len(), 5);
        let jr = es.iter().find(|e| e.name == "jehle_reny").unwrap();
        assert_eq!(jr.expected, Expected::Quadrant(Quadrant::True));
        assert_eq!(jr.order.as_ref().unwrap()[0], Var::new("v12"));
        assert_eq!(jr.clause_orders.len(), 3);
        let k = es.iter().find(|e| e.name == "krugman").unwrap();
        assert!(k.expected_region.is_some());
    }

    #[test]
    fn header_errors() {
        assert!(CorpusEntry::from_text("x", "(assert (> x 0))").is_err());
        assert!(CorpusEntry::from_text("x", "; expect: maybe\n(assert (> x 0))").is_err());
        let e = CorpusEntry::from_text("x", "; expect: true\n(assert (exists ((x Real)) (> x 0)))").unwrap();
        assert_eq!(e.expected, Expected::Truth(true));
    }

    #[test]
    fn run_small_corpus() {
        let good = CorpusEntry::from_text(
            "pos",
            "; expect: True\n(assert-theorem :assumptions (> x 1) :hypothesis (> x 0))",
        )
        .unwrap();
        let mut bad = good.clone();
        bad.name = "wrong".into();
        bad.expected = Expected::Quadrant(Quadrant::False);
        let report = corpus_run(&[good, bad], None, &RunOptions::default());
        assert_eq!(report.passed(), 1);
        let fail = report.rows.iter().find(|r| !r.pass).unwrap();
        assert_eq!(fail.name, "wrong");
        assert!(report.table().contains("FAIL"));
        assert!(corpus_run(&entries(), Some("nothing-matches"), &RunOptions::default()).rows.is_empty());
    }
}
