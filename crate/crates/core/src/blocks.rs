//! The block library: signatures of univariate conjunctions, generic
//! quantifier-free results, their instantiation, and the on-disk cache.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec;
use crate::formula::{to_dnf_capped, Atom, Clause, Dnf, Formula, Relation};
use crate::generator::{generic_coeff, generic_x, GenericConjunction};
use crate::oracle::{sample_agreement, univariate_witness, EquivalenceReport};
use crate::poly::{Polynomial, Var};
use crate::sexp::{print_formula, read_records};
use crate::simplify::{normalize_atom, simplify_atoms, SignContext, Simplified};

/// Environment variable overriding the default cache directory.
pub const CACHE_ENV: &str = "TARSKI_BLOCK_CACHE";

fn rel_rank(r: Relation) -> u8 {
    match r {
        Relation::Eq => 0,
        Relation::Gt => 1,
        Relation::Ge => 2,
        Relation::Neq => 3,
        Relation::Lt => 4,
        Relation::Le => 5,
    }
}

fn rel_token(r: Relation) -> &'static str {
    match r {
        Relation::Eq => "EQ",
        Relation::Gt => "GT",
        Relation::Ge => "GE",
        Relation::Neq => "NEQ",
        Relation::Lt => "LT",
        Relation::Le => "LE",
    }
}

fn rel_from_token(t: &str) -> Option<Relation> {
    Some(match t.to_ascii_uppercase().as_str() {
        "EQ" => Relation::Eq,
        "GT" => Relation::Gt,
        "GE" => Relation::Ge,
        "NEQ" => Relation::Neq,
        _ => return None,
    })
}

/// Structural key of a univariate conjunction: sorted (degree, relation)
/// pairs with equations first among equal degrees.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockSignature {
    constraints: Vec<(u32, Relation)>,
}

impl BlockSignature {
    pub fn new(mut constraints: Vec<(u32, Relation)>) -> Result<BlockSignature> {
        if constraints.is_empty() {
            return Err(Error::Precondition("a signature needs at least one constraint".into()));
        }
        for &(d, r) in &constraints {
            if !(1..=2).contains(&d) {
                return Err(Error::Precondition(format!("signature degree {d} is not 1 or 2")));
            }
            if matches!(r, Relation::Lt | Relation::Le) {
                return Err(Error::Precondition(format!(
                    "signatures use normalized relations, got {r}"
                )));
            }
        }
        constraints.sort_by_key(|&(d, r)| (d, rel_rank(r)));
        Ok(BlockSignature { constraints })
    }

    pub fn constraints(&self) -> &[(u32, Relation)] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// `∃x (a11 x + a10 = 0 ∧ a21 x + a20 > 0 ∧ a32 x² + a31 x + a30 > 0)`.
    pub fn block_a() -> BlockSignature {
        BlockSignature::new(vec![(1, Relation::Eq), (1, Relation::Gt), (2, Relation::Gt)]).unwrap()
    }

    /// Block-A with one more strict linear inequality.
    pub fn block_b() -> BlockSignature {
        BlockSignature::new(vec![
            (1, Relation::Eq),
            (1, Relation::Gt),
            (1, Relation::Gt),
            (2, Relation::Gt),
        ])
        .unwrap()
    }

    /// Library name of the signature, if it has one.
    pub fn name(&self) -> Option<&'static str> {
        if *self == BlockSignature::block_a() {
            Some("Block-A")
        } else if *self == BlockSignature::block_b() {
            Some("Block-B")
        } else {
            None
        }
    }

    /// Stable file key.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for BlockSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, (d, r)) in self.constraints.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "({d},{})", rel_token(*r))?;
        }
        f.write_str("]")
    }
}

impl FromStr for BlockSignature {
    type Err = Error;

    /// Accepts `[(1,EQ),(1,GT),(2,GT)]` as well as `1EQ,1GT,2GT`.
    fn from_str(s: &str) -> Result<BlockSignature> {
        let bad = || Error::Precondition(format!("cannot read signature `{s}`"));
        let cleaned: String = s
            .chars()
            .map(|c| if matches!(c, '[' | ']' | '(' | ')' | ',') { ' ' } else { c })
            .collect();
        let mut tokens: Vec<String> = Vec::new();
        for t in cleaned.split_whitespace() {
            let split = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
            if split > 0 && split < t.len() {
                tokens.push(t[..split].to_string());
                tokens.push(t[split..].to_string());
            } else {
                tokens.push(t.to_string());
            }
        }
        if tokens.is_empty() || !tokens.len().is_multiple_of(2) {
            return Err(bad());
        }
        let constraints = tokens
            .chunks(2)
            .map(|c| Some((c[0].parse::<u32>().ok()?, rel_from_token(&c[1])?)))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(bad)?;
        BlockSignature::new(constraints)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Transcribed,
    VirtualSubstitution,
    LinearRecursion,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Transcribed => "transcribed",
            Provenance::VirtualSubstitution => "generated-by-VS",
            Provenance::LinearRecursion => "generated-by-linear-recursion",
        }
    }

    fn parse(s: &str) -> Option<Provenance> {
        [Provenance::Transcribed, Provenance::VirtualSubstitution, Provenance::LinearRecursion]
            .into_iter()
            .find(|p| p.as_str() == s)
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A generic quantifier-free equivalent of `∃x` over a signature's
/// generic conjunction.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockResult {
    pub signature: BlockSignature,
    pub generic_vars: Vec<Var>,
    pub qf: Formula,
    pub provenance: Provenance,
    /// Set once oracle sampling found no disagreement.
    pub verified: bool,
}

/// Map from generic coefficients to concrete polynomials.
pub type CoeffMap = BTreeMap<Var, Polynomial>;

/// The reference quantifier-free form of Block-A, kept as ground truth
/// for the generator.
pub fn block_a_transcribed() -> BlockResult {
    use Relation::*;
    let a = |i: usize, j: usize| Polynomial::var(generic_coeff(i, j));
    let at = |p: Polynomial, r: Relation| Formula::atom(p, r);
    let k = |n: i64| Polynomial::int(n);
    let quad_at_lin1 = &(&a(3, 2) * &a(1, 0).pow(2)) + &(&a(1, 1).pow(2) * &a(3, 0))
        - &(&(&a(1, 0) * &a(1, 1)) * &a(3, 1));
    let quad_at_lin2 = &(&a(3, 2) * &a(2, 0).pow(2)) + &(&a(2, 1).pow(2) * &a(3, 0))
        - &(&(&a(2, 0) * &a(2, 1)) * &a(3, 1));
    let cross = &(&a(1, 0) * &a(2, 1)) - &(&a(1, 1) * &a(2, 0));
    let zero1 = || vec![at(a(1, 0), Eq), at(a(1, 1), Eq)];
    let with_zero = |rest: Vec<Formula>| {
        let mut v = zero1();
        v.extend(rest);
        Formula::And(v)
    };
    let qf = Formula::Or(vec![
        Formula::And(vec![at(a(1, 1), Gt), at(quad_at_lin1.clone(), Gt), at(cross.clone(), Lt)]),
        Formula::And(vec![at(cross, Gt), at(quad_at_lin1, Gt), at(a(1, 1), Lt)]),
        with_zero(vec![at(a(2, 0), Gt), at(a(3, 2), Gt)]),
        with_zero(vec![at(a(3, 2), Gt), at(a(2, 1), Neq)]),
        with_zero(vec![at(quad_at_lin2.clone(), Gt), at(a(2, 1), Neq)]),
        with_zero(vec![
            at(quad_at_lin2, Eq),
            at(&(&k(2) * &a(2, 0)) * &a(3, 2) - &(&a(2, 1) * &a(3, 1)), Lt),
            at(a(2, 1), Neq),
        ]),
        with_zero(vec![at(a(2, 1), Gt), at(a(3, 1), Gt), at(a(3, 2), Ge)]),
        with_zero(vec![
            at(
                &(&k(2) * &a(2, 0)) * &a(3, 2).pow(2) - &(&(&a(2, 1) * &a(3, 1)) * &a(3, 2)),
                Gt,
            ),
            at(
                &(&k(4) * &a(3, 0)) * &a(3, 2).pow(2) - &(&a(3, 1).pow(2) * &a(3, 2)),
                Gt,
            ),
            at(a(3, 2), Neq),
        ]),
        with_zero(vec![at(a(3, 2), Ge), at(a(2, 1), Lt), at(a(3, 1), Lt)]),
        with_zero(vec![at(a(2, 1), Eq), at(a(2, 0), Gt), at(a(3, 0), Gt), at(a(3, 2), Ge)]),
        with_zero(vec![at(a(2, 1), Eq), at(a(2, 0), Gt), at(a(3, 2), Ge), at(a(3, 1), Neq)]),
        with_zero(vec![at(a(2, 1), Gt), at(a(3, 0), Gt), at(a(3, 1), Ge), at(a(3, 2), Ge)]),
        with_zero(vec![at(a(3, 0), Gt), at(a(3, 2), Ge), at(a(2, 1), Lt), at(a(3, 1), Le)]),
    ]);
    let sig = BlockSignature::block_a();
    BlockResult {
        generic_vars: GenericConjunction::from_signature(&sig).generic_vars(),
        signature: sig,
        qf,
        provenance: Provenance::Transcribed,
        verified: false,
    }
}

/// Signatures that inputs are lifted into when they fit.
pub fn library() -> Vec<BlockSignature> {
    vec![BlockSignature::block_a(), BlockSignature::block_b()]
}

/// An atom normalized for signature matching: `<`, `≤` become `>`, `≥`
/// by negation.
fn orient(a: &Atom) -> Atom {
    match a.rel {
        Relation::Lt => Atom::new(-&a.lhs, Relation::Gt),
        Relation::Le => Atom::new(-&a.lhs, Relation::Ge),
        _ => a.clone(),
    }
}

/// Assigns entries to the slots of `target`: each entry takes the lowest
/// free slot of the same relation whose degree is at least its own. Slots
/// left over are padded with a trivially true constraint. Entries must be
/// sorted; returns the entry index held by each slot.
fn lift_into(entries: &[(u32, Relation)], target: &BlockSignature) -> Option<Vec<Option<usize>>> {
    let slots = target.constraints();
    let mut held: Vec<Option<usize>> = vec![None; slots.len()];
    for (i, e) in entries.iter().enumerate() {
        let k = (0..slots.len()).find(|&k| held[k].is_none() && slots[k].1 == e.1 && slots[k].0 >= e.0)?;
        held[k] = Some(i);
    }
    Some(held)
}

/// Computes the signature of `atoms` in `x` and the map from generic
/// coefficients to their concrete values. Inputs that fit a library block
/// are lifted into it: a linear constraint may fill a quadratic slot with
/// zero leading coefficient, and unused slots become `0 = 0` or `1 > 0`.
pub fn signature_of_atoms(atoms: &[Atom], x: &Var) -> Result<(BlockSignature, CoeffMap)> {
    let mut rows: Vec<(u32, Relation, Atom)> = Vec::with_capacity(atoms.len());
    for a in atoms {
        let a = orient(a);
        let d = a.lhs.degree_in(x);
        if d == 0 {
            return Err(Error::Precondition(format!("atom `{a}` does not contain `{x}`")));
        }
        if d > 2 {
            return Err(Error::UnsupportedDegree { var: x.clone(), degree: d, atom: a.to_string() });
        }
        rows.push((d, a.rel, a));
    }
    rows.sort_by(|p, q| (p.0, rel_rank(p.1), &p.2).cmp(&(q.0, rel_rank(q.1), &q.2)));
    let entries: Vec<(u32, Relation)> = rows.iter().map(|r| (r.0, r.1)).collect();
    let exact = BlockSignature::new(entries.clone())?;
    let (sig, held) = library()
        .into_iter()
        .find_map(|lib| lift_into(&entries, &lib).map(|h| (lib, h)))
        .unwrap_or_else(|| (exact, (0..entries.len()).map(Some).collect()));
    let mut map = CoeffMap::new();
    for (slot, (&(deg, rel), entry)) in sig.constraints().iter().zip(&held).enumerate() {
        let cs = match entry {
            Some(i) => rows[*i].2.lhs.coeffs_wrt(x),
            None if rel == Relation::Eq => Vec::new(),
            None => vec![Polynomial::one()],
        };
        for j in 0..=deg as usize {
            let c = cs.get(j).cloned().unwrap_or_else(Polynomial::zero);
            map.insert(generic_coeff(slot + 1, j), c);
        }
    }
    Ok((sig, map))
}

pub fn signature_of(c: &Clause, x: &Var) -> Result<(BlockSignature, CoeffMap)> {
    signature_of_atoms(c.atoms(), x)
}

fn check_coverage(b: &BlockResult, map: &CoeffMap) -> Result<()> {
    for v in &b.generic_vars {
        if !map.contains_key(v) {
            return Err(Error::IncompleteCoeffMap(v.clone()));
        }
    }
    Ok(())
}

/// Substitutes the coefficient map into the block's formula.
pub fn instantiate(b: &BlockResult, map: &CoeffMap) -> Result<Formula> {
    check_coverage(b, map)?;
    let mut m = map.clone();
    m.retain(|v, _| b.generic_vars.contains(v));
    Ok(b.qf.substitute(&m))
}

/// A block held as a DNF over interned generic atoms, for repeated
/// instantiation.
#[derive(Debug, Clone)]
pub struct CompiledBlock {
    pub result: BlockResult,
    atoms: Vec<Atom>,
    clauses: Vec<Vec<usize>>,
}

impl CompiledBlock {
    pub fn new(result: BlockResult) -> Result<CompiledBlock> {
        let dnf = to_dnf_capped(&result.qf, crate::formula::DEFAULT_CLAUSE_CAP)?;
        let mut index: HashMap<Atom, usize> = HashMap::new();
        let mut atoms = Vec::new();
        let clauses = dnf
            .clauses()
            .iter()
            .map(|c| {
                c.atoms()
                    .iter()
                    .map(|a| {
                        *index.entry(a.clone()).or_insert_with(|| {
                            atoms.push(a.clone());
                            atoms.len() - 1
                        })
                    })
                    .collect()
            })
            .collect();
        Ok(CompiledBlock { result, atoms, clauses })
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// Instantiates into a DNF, resolving each distinct generic atom once
    /// against `ctx` and skipping clauses as soon as one atom is false.
    pub fn instantiate_dnf(&self, map: &CoeffMap, ctx: &SignContext) -> Result<Dnf> {
        check_coverage(&self.result, map)?;
        // per atom: None = false, Some(vec![]) = true, else replacement atoms
        let resolved: Vec<Option<Vec<Atom>>> = exec::map(&self.atoms, |a| {
            let inst = Atom::new(a.lhs.substitute_many(map), a.rel);
            match inst.fold() {
                Some(true) => return Some(Vec::new()),
                Some(false) => return None,
                None => {}
            }
            match simplify_atoms(&[normalize_atom(&inst)], ctx) {
                Simplified::True => Some(Vec::new()),
                Simplified::False(_) => None,
                Simplified::Clause(c) => Some(c.into_atoms()),
            }
        });
        let mut out = Vec::new();
        'clauses: for c in &self.clauses {
            let mut atoms = Vec::new();
            for &i in c {
                match &resolved[i] {
                    None => continue 'clauses,
                    Some(v) => atoms.extend(v.iter().cloned()),
                }
            }
            if let Some(c) = Clause::new(atoms) {
                out.push(c);
            }
        }
        Ok(Dnf::from_clauses(out))
    }
}

/// Checks the block against the exact univariate decision at `n` sampled
/// coefficient assignments.
pub fn verify(b: &BlockResult, n: usize, seed: u64) -> Result<EquivalenceReport> {
    let g = GenericConjunction::from_signature(&b.signature);
    let atoms = g.atoms();
    let x = generic_x();
    let compiled = CompiledBlock::new(b.clone())?;
    let (report, _) = sample_agreement(&g.generic_vars(), n, seed, false, |pt| {
        let inst: Vec<Atom> = atoms.iter().map(|a| Atom::new(a.lhs.eval_partial(pt), a.rel)).collect();
        let truth = univariate_witness(&inst, &x)?.is_some();
        let value = compiled.eval(pt)?;
        Ok((value, truth))
    })?;
    Ok(report)
}

impl CompiledBlock {
    /// Evaluates the block formula at a coefficient assignment.
    pub fn eval(&self, pt: &BTreeMap<Var, crate::poly::Rational>) -> Result<bool> {
        let values = self
            .atoms
            .iter()
            .map(|a| a.eval(pt))
            .collect::<Result<Vec<bool>>>()?;
        Ok(self.clauses.iter().any(|c| c.iter().all(|&i| values[i])))
    }
}

/// Canonical record text for a block.
pub fn record_text(b: &BlockResult) -> String {
    let qf = print_formula(&b.qf);
    let mut s = String::new();
    s.push_str(&format!("(signature {})\n", sig_tokens(&b.signature)));
    s.push_str(&format!("(provenance {})\n", b.provenance));
    s.push_str(&format!("(verified {})\n", b.verified));
    s.push_str("(generic-vars");
    for v in &b.generic_vars {
        s.push(' ');
        s.push_str(v.name());
    }
    s.push_str(")\n");
    s.push_str(&format!("(hash {})\n", content_hash(&b.signature, &qf)));
    s.push_str(&format!("(qf {qf})\n"));
    s
}

fn sig_tokens(sig: &BlockSignature) -> String {
    sig.constraints()
        .iter()
        .map(|(d, r)| format!("{d} {}", rel_token(*r)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn content_hash(sig: &BlockSignature, qf_text: &str) -> String {
    let mut h = Sha256::new();
    h.update(sig.to_string().as_bytes());
    h.update(b"\n");
    h.update(qf_text.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses a record produced by [`record_text`], checking its hash.
pub fn parse_record(text: &str) -> Result<BlockResult> {
    let bad = |m: &str| Error::Cache(m.to_string());
    let records = read_records(text)?;
    let get = |tag: &str| records.iter().find(|r| r.tag == tag).ok_or_else(|| bad(&format!("missing `{tag}`")));
    let sig_items = &get("signature")?.items;
    let sig: BlockSignature = sig_items.join(" ").parse()?;
    let provenance = get("provenance")?
        .items
        .first()
        .and_then(|p| Provenance::parse(p))
        .ok_or_else(|| bad("bad provenance"))?;
    let verified = matches!(get("verified")?.items.first().map(String::as_str), Some("true"));
    let generic_vars = get("generic-vars")?.items.iter().map(|v| Var::new(v)).collect();
    let hash = get("hash")?.items.first().cloned().ok_or_else(|| bad("bad hash"))?;
    let qf = get("qf")?.formula.clone().ok_or_else(|| bad("bad qf"))?;
    if content_hash(&sig, &print_formula(&qf)) != hash {
        return Err(bad("content hash mismatch"));
    }
    Ok(BlockResult { signature: sig, generic_vars, qf, provenance, verified })
}

/// Directory of block records, one file per signature.
#[derive(Debug, Clone)]
pub struct BlockCache {
    dir: PathBuf,
}

impl BlockCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<BlockCache> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(BlockCache { dir })
    }

    /// Opens `dir`, or the directory named by the environment, or
    /// `./blocks`.
    pub fn open_default(dir: Option<&Path>) -> Result<BlockCache> {
        match dir {
            Some(d) => BlockCache::open(d),
            None => match std::env::var_os(CACHE_ENV) {
                Some(d) => BlockCache::open(PathBuf::from(d)),
                None => BlockCache::open("blocks"),
            },
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, sig: &BlockSignature) -> PathBuf {
        self.dir.join(format!("{}.block", sig.hash()))
    }

    /// Loads the record for `sig`. A corrupt record is moved aside with a
    /// `.quarantine` suffix and reported absent.
    pub fn get(&self, sig: &BlockSignature) -> Result<Option<BlockResult>> {
        let path = self.path_for(sig);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        match parse_record(&text) {
            Ok(b) if b.signature == *sig => Ok(Some(b)),
            Ok(_) => Ok(None),
            Err(_) => {
                let mut q = path.clone().into_os_string();
                q.push(".quarantine");
                fs::rename(&path, q)?;
                Ok(None)
            }
        }
    }

    /// Persists a verified block via write-to-temp and atomic rename.
    pub fn put(&self, b: &BlockResult) -> Result<PathBuf> {
        if !b.verified {
            return Err(Error::Cache(format!(
                "refusing to store unverified block {}",
                b.signature
            )));
        }
        let path = self.path_for(&b.signature);
        let mut tmp = tempfile_in(&self.dir)?;
        tmp.1.write_all(record_text(b).as_bytes())?;
        tmp.1.sync_all()?;
        drop(tmp.1);
        fs::rename(&tmp.0, &path)?;
        Ok(path)
    }

    /// All readable records in the cache, sorted by signature.
    pub fn list(&self) -> Result<Vec<BlockResult>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "block") {
                if let Ok(b) = parse_record(&fs::read_to_string(&path)?) {
                    out.push(b);
                }
            }
        }
        out.sort_by(|a, b| a.signature.cmp(&b.signature));
        Ok(out)
    }
}

fn tempfile_in(dir: &Path) -> Result<(PathBuf, fs::File)> {
    for k in 0..1000u32 {
        let path = dir.join(format!(".tmp-{}-{k}", std::process::id()));
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(f) => return Ok((path, f)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(Error::Cache("cannot create a temporary file".into()))
}

/// Produces the block for `sig`: linear-only inequality signatures by the
/// linear recursion, everything else by virtual substitution.
pub fn generate(sig: &BlockSignature) -> Result<BlockResult> {
    let linear_ineq = sig.len() >= 2
        && sig.constraints().iter().all(|&(d, r)| d == 1 && matches!(r, Relation::Gt | Relation::Ge));
    if linear_ineq {
        let rels: Vec<Relation> = sig.constraints().iter().map(|c| c.1).collect();
        crate::generator::generate_linear(&rels)
    } else {
        crate::generator::generate_vs(sig)
    }
}

/// In-memory block store backed by an optional disk cache. Blocks are
/// generated on demand and verified by sampling before being persisted.
pub struct BlockStore {
    cache: Option<BlockCache>,
    verify_samples: usize,
    blocks: std::sync::Mutex<HashMap<BlockSignature, std::sync::Arc<CompiledBlock>>>,
}

impl BlockStore {
    pub fn new(cache: Option<BlockCache>, verify_samples: usize) -> BlockStore {
        BlockStore { cache, verify_samples, blocks: Default::default() }
    }

    pub fn get(&self, sig: &BlockSignature) -> Result<std::sync::Arc<CompiledBlock>> {
        if let Some(b) = self.blocks.lock().unwrap().get(sig) {
            return Ok(b.clone());
        }
        let cached = match &self.cache {
            Some(c) => c.get(sig)?,
            None => None,
        };
        let block = match cached {
            Some(b) => b,
            None => {
                let mut b = generate(sig)?;
                if self.verify_samples > 0 {
                    b.verified = verify(&b, self.verify_samples, 0)?.agrees();
                    if !b.verified {
                        return Err(Error::Precondition(format!(
                            "generated block {sig} failed oracle verification"
                        )));
                    }
                    if let Some(c) = &self.cache {
                        c.put(&b)?;
                    }
                }
                b
            }
        };
        let compiled = std::sync::Arc::new(CompiledBlock::new(block)?);
        self.blocks.lock().unwrap().insert(sig.clone(), compiled.clone());
        Ok(compiled)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::p;

    fn atom(s: &str, r: Relation) -> Atom {
        Atom::new(p(s), r)
    }

    #[test]
    fn signature_display_and_parse() {
        let a = BlockSignature::block_a();
        assert_eq!(a.to_string(), "[(1,EQ),(1,GT),(2,GT)]");
        assert_eq!("1EQ,1GT,2GT".parse::<BlockSignature>().unwrap(), a);
        assert_eq!(a.to_string().parse::<BlockSignature>().unwrap(), a);
        assert!("3GT".parse::<BlockSignature>().is_err());
        assert_eq!(a.name(), Some("Block-A"));
    }

    #[test]
    fn signature_of_examples() {
        let x = Var::new("x");
        // a lone inequality is padded into Block-A
        let (sig, map) = signature_of_atoms(&[atom("x", Relation::Gt)], &x).unwrap();
        assert_eq!(sig, BlockSignature::block_a());
        assert_eq!(map[&generic_coeff(1, 1)], p("0"));
        assert_eq!(map[&generic_coeff(1, 0)], p("0"));
        assert_eq!(map[&generic_coeff(2, 1)], p("1"));
        assert_eq!(map[&generic_coeff(2, 0)], p("0"));
        assert_eq!(map[&generic_coeff(3, 0)], p("1"));
        assert_eq!(map[&generic_coeff(3, 2)], p("0"));
        // nothing in the library has a second equation
        let (sig, _) = signature_of_atoms(&[atom("x", Relation::Eq), atom("x - 1", Relation::Eq)], &x).unwrap();
        assert_eq!(sig.to_string(), "[(1,EQ),(1,EQ)]");
        let atoms = [
            atom("x^2 + y*x + 1", Relation::Gt),
            atom("x - y", Relation::Eq),
            atom("2*x + 3", Relation::Gt),
        ];
        let (sig, map) = signature_of_atoms(&atoms, &x).unwrap();
        assert_eq!(sig, BlockSignature::block_a());
        assert_eq!(map[&generic_coeff(1, 0)], p("-y"));
        assert_eq!(map[&generic_coeff(3, 1)], p("y"));
        // reordering does not matter
        let rev: Vec<Atom> = atoms.iter().rev().cloned().collect();
        assert_eq!(signature_of_atoms(&rev, &x).unwrap().0, sig);
        // three linear atoms lift into Block-A
        let lin = [atom("x - y", Relation::Eq), atom("x", Relation::Gt), atom("y - x", Relation::Lt)];
        let (sig, map) = signature_of_atoms(&lin, &x).unwrap();
        assert_eq!(sig, BlockSignature::block_a());
        assert_eq!(map[&generic_coeff(3, 2)], p("0"));
        assert!(matches!(
            signature_of_atoms(&[atom("x^3", Relation::Gt)], &x),
            Err(Error::UnsupportedDegree { .. })
        ));
        assert!(matches!(signature_of_atoms(&[atom("y", Relation::Gt)], &x), Err(Error::Precondition(_))));
    }

    #[test]
    fn instantiate_requires_full_map() {
        let b = block_a_transcribed();
        let mut map = CoeffMap::new();
        map.insert(generic_coeff(1, 1), p("1"));
        assert!(matches!(instantiate(&b, &map), Err(Error::IncompleteCoeffMap(_))));
        let id: CoeffMap = b.generic_vars.iter().map(|v| (v.clone(), Polynomial::var(v))).collect();
        assert_eq!(instantiate(&b, &id).unwrap(), b.qf);
    }

    #[test]
    fn record_round_trip_and_quarantine() {
        let dir = tempfile::tempdir().unwrap();
        let cache = BlockCache::open(dir.path()).unwrap();
        let mut b = block_a_transcribed();
        assert!(cache.get(&b.signature).unwrap().is_none());
        assert!(cache.put(&b).is_err());
        b.verified = true;
        let path = cache.put(&b).unwrap();
        let back = cache.get(&b.signature).unwrap().unwrap();
        assert_eq!(print_formula(&back.qf), print_formula(&b.qf));
        assert_eq!(back, b);
        fs::write(&path, "(signature 1 EQ").unwrap();
        assert!(cache.get(&b.signature).unwrap().is_none());
        assert!(dir.path().join(format!("{}.block.quarantine", b.signature.hash())).exists());
    }
}
