//! Tarski formulas: atoms `p rel 0`, boolean structure, quantifiers, and the
//! normal forms the engine consumes.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::poly::{Polynomial, Rational, Var};

/// Default cap on the number of clauses a DNF conversion may produce.
pub const DEFAULT_CLAUSE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Relation {
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Relation {
    pub const ALL: [Relation; 6] = [
        Relation::Eq,
        Relation::Neq,
        Relation::Lt,
        Relation::Le,
        Relation::Gt,
        Relation::Ge,
    ];

    /// Logical negation: `!(p rel 0)` is `p rel.negate() 0`.
    pub fn negate(self) -> Relation {
        match self {
            Relation::Eq => Relation::Neq,
            Relation::Neq => Relation::Eq,
            Relation::Lt => Relation::Ge,
            Relation::Ge => Relation::Lt,
            Relation::Le => Relation::Gt,
            Relation::Gt => Relation::Le,
        }
    }

    /// The relation satisfied by `-p` whenever `p` satisfies `self`.
    pub fn flip(self) -> Relation {
        match self {
            Relation::Lt => Relation::Gt,
            Relation::Gt => Relation::Lt,
            Relation::Le => Relation::Ge,
            Relation::Ge => Relation::Le,
            r => r,
        }
    }

    pub fn holds(self, sign: Ordering) -> bool {
        match self {
            Relation::Eq => sign == Ordering::Equal,
            Relation::Neq => sign != Ordering::Equal,
            Relation::Lt => sign == Ordering::Less,
            Relation::Le => sign != Ordering::Greater,
            Relation::Gt => sign == Ordering::Greater,
            Relation::Ge => sign != Ordering::Less,
        }
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Relation::Lt | Relation::Gt)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Eq => "=",
            Relation::Neq => "!=",
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Gt => ">",
            Relation::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Relation> {
        Some(match s {
            "=" => Relation::Eq,
            "!=" | "distinct" => Relation::Neq,
            "<" => Relation::Lt,
            "<=" => Relation::Le,
            ">" => Relation::Gt,
            ">=" => Relation::Ge,
            _ => return None,
        })
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

fn sign_of(r: &Rational) -> Ordering {
    if r.is_zero() {
        Ordering::Equal
    } else if r.is_positive() {
        Ordering::Greater
    } else {
        Ordering::Less
    }
}

/// `lhs rel 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub lhs: Polynomial,
    pub rel: Relation,
}

impl Atom {
    pub fn new(lhs: Polynomial, rel: Relation) -> Atom {
        Atom { lhs, rel }
    }

    /// `lhs rel rhs`, normalized to `lhs - rhs rel 0`.
    pub fn compare(lhs: &Polynomial, rel: Relation, rhs: &Polynomial) -> Atom {
        Atom::new(lhs - rhs, rel)
    }

    /// Truth value of a constant atom.
    pub fn fold(&self) -> Option<bool> {
        self.lhs
            .constant_value()
            .map(|c| self.rel.holds(sign_of(&c)))
    }

    pub fn negate(&self) -> Atom {
        Atom::new(self.lhs.clone(), self.rel.negate())
    }

    pub fn eval(&self, point: &BTreeMap<Var, Rational>) -> Result<bool> {
        Ok(self.rel.holds(sign_of(&self.lhs.eval(point)?)))
    }

    pub fn contains(&self, v: &Var) -> bool {
        self.lhs.contains_var(v)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} 0", self.lhs, self.rel)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(Vec<Var>, Box<Formula>),
    Forall(Vec<Var>, Box<Formula>),
}

#[allow(clippy::should_implement_trait)]
impl Formula {
    pub fn atom(lhs: Polynomial, rel: Relation) -> Formula {
        Formula::Atom(Atom::new(lhs, rel))
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn exists(vars: Vec<Var>, body: Formula) -> Formula {
        if vars.is_empty() {
            return body;
        }
        Formula::Exists(vars, Box::new(body))
    }

    pub fn forall(vars: Vec<Var>, body: Formula) -> Formula {
        if vars.is_empty() {
            return body;
        }
        Formula::Forall(vars, Box::new(body))
    }

    /// Conjunction with constant folding and flattening.
    pub fn and(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    /// Disjunction with constant folding and flattening.
    pub fn or(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => true,
            Formula::Not(f) => f.is_quantifier_free(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().all(Formula::is_quantifier_free),
            Formula::Implies(a, b) => a.is_quantifier_free() && b.is_quantifier_free(),
            Formula::Exists(..) | Formula::Forall(..) => false,
        }
    }

    /// Visits every atom.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => out.push(a),
            Formula::Not(f) | Formula::Exists(_, f) | Formula::Forall(_, f) => f.collect_atoms(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_atoms(out)),
            Formula::Implies(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// All variables occurring in atoms (bound or free).
    pub fn vars(&self) -> BTreeSet<Var> {
        self.atoms().iter().flat_map(|a| a.lhs.vars()).collect()
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        match self {
            Formula::True | Formula::False => BTreeSet::new(),
            Formula::Atom(a) => a.lhs.vars(),
            Formula::Not(f) => f.free_vars(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().flat_map(|f| f.free_vars()).collect(),
            Formula::Implies(a, b) => {
                let mut s = a.free_vars();
                s.extend(b.free_vars());
                s
            }
            Formula::Exists(vs, f) | Formula::Forall(vs, f) => {
                let mut s = f.free_vars();
                for v in vs {
                    s.remove(v);
                }
                s
            }
        }
    }

    pub fn map_atoms(&self, f: &mut impl FnMut(&Atom) -> Formula) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom(a) => f(a),
            Formula::Not(g) => Formula::not(g.map_atoms(f)),
            Formula::And(gs) => Formula::and(gs.iter().map(|g| g.map_atoms(f)).collect::<Vec<_>>()),
            Formula::Or(gs) => Formula::or(gs.iter().map(|g| g.map_atoms(f)).collect::<Vec<_>>()),
            Formula::Implies(a, b) => Formula::implies(a.map_atoms(f), b.map_atoms(f)),
            Formula::Exists(vs, g) => Formula::exists(vs.clone(), g.map_atoms(f)),
            Formula::Forall(vs, g) => Formula::forall(vs.clone(), g.map_atoms(f)),
        }
    }

    /// Substitutes polynomials for variables in every atom, folding constants.
    pub fn substitute(&self, map: &BTreeMap<Var, Polynomial>) -> Formula {
        self.map_atoms(&mut |a| {
            let atom = Atom::new(a.lhs.substitute_many(map), a.rel);
            match atom.fold() {
                Some(true) => Formula::True,
                Some(false) => Formula::False,
                None => Formula::Atom(atom),
            }
        })
    }

    /// Number of atom occurrences.
    pub fn size(&self) -> usize {
        self.atoms().len()
    }
}

impl From<Atom> for Formula {
    fn from(a: Atom) -> Formula {
        match a.fold() {
            Some(true) => Formula::True,
            Some(false) => Formula::False,
            None => Formula::Atom(a),
        }
    }
}

/// A conjunction of non-constant atoms, kept sorted and duplicate-free.
/// The empty clause is `true`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Clause {
    atoms: Vec<Atom>,
}

impl Clause {
    pub fn empty() -> Clause {
        Clause::default()
    }

    /// Builds a clause, dropping true constants. Returns `None` when a
    /// constant atom is false.
    pub fn new(atoms: impl IntoIterator<Item = Atom>) -> Option<Clause> {
        let mut out = Vec::new();
        for a in atoms {
            match a.fold() {
                Some(true) => {}
                Some(false) => return None,
                None => out.push(a),
            }
        }
        out.sort();
        out.dedup();
        Some(Clause { atoms: out })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn into_atoms(self) -> Vec<Atom> {
        self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.atoms.iter().flat_map(|a| a.lhs.vars()).collect()
    }

    /// Union of two clauses.
    pub fn conjoin(&self, other: &Clause) -> Clause {
        let mut atoms = Vec::with_capacity(self.atoms.len() + other.atoms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.atoms.len() && j < other.atoms.len() {
            match self.atoms[i].cmp(&other.atoms[j]) {
                Ordering::Less => {
                    atoms.push(self.atoms[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    atoms.push(other.atoms[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    atoms.push(self.atoms[i].clone());
                    i += 1;
                    j += 1;
                }
            }
        }
        atoms.extend_from_slice(&self.atoms[i..]);
        atoms.extend_from_slice(&other.atoms[j..]);
        Clause { atoms }
    }

    pub fn eval(&self, point: &BTreeMap<Var, Rational>) -> Result<bool> {
        for a in &self.atoms {
            if !a.eval(point)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn to_formula(&self) -> Formula {
        Formula::and(self.atoms.iter().cloned().map(Formula::Atom).collect::<Vec<_>>())
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("true");
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "({a})")?;
        }
        Ok(())
    }
}

/// A disjunction of clauses in first-seen order, without duplicates.
/// The empty DNF is `false`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dnf {
    clauses: Vec<Clause>,
}

impl Dnf {
    pub fn falsum() -> Dnf {
        Dnf::default()
    }

    pub fn verum() -> Dnf {
        Dnf {
            clauses: vec![Clause::empty()],
        }
    }

    pub fn from_clauses(clauses: impl IntoIterator<Item = Clause>) -> Dnf {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for c in clauses {
            if seen.insert(c.clone()) {
                out.push(c);
            }
        }
        Dnf { clauses: out }
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn into_clauses(self) -> Vec<Clause> {
        self.clauses
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_false(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn is_true(&self) -> bool {
        self.clauses.iter().any(Clause::is_empty)
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn eval(&self, point: &BTreeMap<Var, Rational>) -> Result<bool> {
        for c in &self.clauses {
            if c.eval(point)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn to_formula(&self) -> Formula {
        Formula::or(self.clauses.iter().map(Clause::to_formula).collect::<Vec<_>>())
    }

    /// Distributes `self ∧ other`, removing duplicate clauses, failing once
    /// more than `cap` distinct clauses are produced.
    pub fn product(&self, other: &Dnf, cap: usize) -> Result<Dnf> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for a in &self.clauses {
            for b in &other.clauses {
                let c = a.conjoin(b);
                if seen.insert(c.clone()) {
                    out.push(c);
                    if out.len() > cap {
                        return Err(Error::Resource(format!(
                            "DNF conversion exceeded {cap} clauses"
                        )));
                    }
                }
            }
        }
        Ok(Dnf { clauses: out })
    }

    pub fn union(mut self, other: Dnf) -> Dnf {
        let mut seen: HashSet<Clause> = self.clauses.iter().cloned().collect();
        for c in other.clauses {
            if seen.insert(c.clone()) {
                self.clauses.push(c);
            }
        }
        self
    }
}

impl fmt::Display for Dnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.clauses.is_empty() {
            return f.write_str("false");
        }
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "[{c}]")?;
        }
        Ok(())
    }
}

/// Negation normal form: implications expanded, negations pushed into atoms
/// through the relation involution, quantifiers dualized.
pub fn to_nnf(f: &Formula) -> Formula {
    nnf(f, false)
}

fn nnf(f: &Formula, negated: bool) -> Formula {
    match (f, negated) {
        (Formula::True, false) | (Formula::False, true) => Formula::True,
        (Formula::True, true) | (Formula::False, false) => Formula::False,
        (Formula::Atom(a), false) => Formula::from(a.clone()),
        (Formula::Atom(a), true) => Formula::from(a.negate()),
        (Formula::Not(g), n) => nnf(g, !n),
        (Formula::And(gs), false) | (Formula::Or(gs), true) => {
            Formula::and(gs.iter().map(|g| nnf(g, negated)).collect::<Vec<_>>())
        }
        (Formula::Or(gs), false) | (Formula::And(gs), true) => {
            Formula::or(gs.iter().map(|g| nnf(g, negated)).collect::<Vec<_>>())
        }
        (Formula::Implies(a, b), false) => Formula::or([nnf(a, true), nnf(b, false)]),
        (Formula::Implies(a, b), true) => Formula::and([nnf(a, false), nnf(b, true)]),
        (Formula::Exists(vs, g), false) | (Formula::Forall(vs, g), true) => {
            Formula::exists(vs.clone(), nnf(g, negated))
        }
        (Formula::Forall(vs, g), false) | (Formula::Exists(vs, g), true) => {
            Formula::forall(vs.clone(), nnf(g, negated))
        }
    }
}

/// Converts a quantifier-free formula to DNF. `!=` atoms are split into
/// `< ∨ >`.
pub fn to_dnf(f: &Formula) -> Result<Dnf> {
    to_dnf_capped(f, DEFAULT_CLAUSE_CAP)
}

pub fn to_dnf_capped(f: &Formula, cap: usize) -> Result<Dnf> {
    if !f.is_quantifier_free() {
        return Err(Error::Precondition(
            "DNF conversion needs a quantifier-free formula".into(),
        ));
    }
    dnf_rec(&to_nnf(f), cap)
}

fn dnf_rec(f: &Formula, cap: usize) -> Result<Dnf> {
    Ok(match f {
        Formula::True => Dnf::verum(),
        Formula::False => Dnf::falsum(),
        Formula::Atom(a) if a.rel == Relation::Neq => Dnf::from_clauses(
            [Relation::Lt, Relation::Gt]
                .into_iter()
                .filter_map(|r| Clause::new([Atom::new(a.lhs.clone(), r)])),
        ),
        Formula::Atom(a) => Dnf::from_clauses(Clause::new([a.clone()])),
        Formula::Or(gs) => {
            let mut acc = Dnf::falsum();
            for g in gs {
                acc = acc.union(dnf_rec(g, cap)?);
                if acc.len() > cap {
                    return Err(Error::Resource(format!(
                        "DNF conversion exceeded {cap} clauses"
                    )));
                }
            }
            acc
        }
        Formula::And(gs) => {
            let mut acc = Dnf::verum();
            for g in gs {
                acc = acc.product(&dnf_rec(g, cap)?, cap)?;
                if acc.is_false() {
                    break;
                }
            }
            acc
        }
        Formula::Not(_) | Formula::Implies(..) => unreachable!("input is in NNF"),
        Formula::Exists(..) | Formula::Forall(..) => unreachable!("input is quantifier-free"),
    })
}

/// One existentially quantified clause produced by distributing `∃` over a
/// DNF. Only the quantified variables the clause mentions are kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantifiedClause {
    pub vars: Vec<Var>,
    pub clause: Clause,
}

impl QuantifiedClause {
    pub fn new(vars: &[Var], clause: Clause) -> QuantifiedClause {
        let present = clause.vars();
        let mut seen = BTreeSet::new();
        let vars = vars
            .iter()
            .filter(|v| present.contains(*v) && seen.insert((*v).clone()))
            .cloned()
            .collect();
        QuantifiedClause { vars, clause }
    }
}

/// Splits a prenex existential formula into its leading quantified
/// variables and its quantifier-free matrix.
pub fn split_existential(f: &Formula) -> Result<(Vec<Var>, Formula)> {
    let mut vars = Vec::new();
    let mut cur = f;
    loop {
        match cur {
            Formula::Exists(vs, body) => {
                vars.extend(vs.iter().cloned());
                cur = body;
            }
            Formula::Forall(..) => {
                return Err(Error::UnsupportedShape(
                    "universal quantifier; dualize before distributing".into(),
                ))
            }
            body => {
                if !body.is_quantifier_free() {
                    return Err(Error::UnsupportedShape(
                        "quantifiers below the leading existential block".into(),
                    ));
                }
                return Ok((vars, body.clone()));
            }
        }
    }
}

/// `∃vars. C1 ∨ .. ∨ Cn` becomes `[∃vars∩vars(C1). C1, ..]`.
pub fn distribute_exists(f: &Formula) -> Result<Vec<QuantifiedClause>> {
    distribute_exists_capped(f, DEFAULT_CLAUSE_CAP)
}

pub fn distribute_exists_capped(f: &Formula, cap: usize) -> Result<Vec<QuantifiedClause>> {
    let (vars, body) = split_existential(f)?;
    let dnf = to_dnf_capped(&body, cap)?;
    Ok(dnf
        .into_clauses()
        .into_iter()
        .map(|c| QuantifiedClause::new(&vars, c))
        .collect())
}

/// Truth of a quantifier-free formula at a rational point.
pub fn eval_formula(f: &Formula, point: &BTreeMap<Var, Rational>) -> Result<bool> {
    Ok(match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(a) => a.eval(point)?,
        Formula::Not(g) => !eval_formula(g, point)?,
        Formula::And(gs) => {
            for g in gs {
                if !eval_formula(g, point)? {
                    return Ok(false);
                }
            }
            true
        }
        Formula::Or(gs) => {
            for g in gs {
                if eval_formula(g, point)? {
                    return Ok(true);
                }
            }
            false
        }
        Formula::Implies(a, b) => !eval_formula(a, point)? || eval_formula(b, point)?,
        Formula::Exists(..) | Formula::Forall(..) => {
            return Err(Error::Precondition(
                "cannot evaluate a quantified formula at a point".into(),
            ))
        }
    })
}

/// Structural statistics of a formula.
#[derive(Debug, Clone, Serialize)]
pub struct Stats {
    pub variables: Vec<String>,
    pub polynomials: Vec<String>,
    pub max_total_degree: u32,
    pub max_var_degree: u32,
    /// Rows are variables, columns polynomials.
    pub occurrence: Vec<Vec<u8>>,
    pub density: f64,
}

/// Counts distinct atom polynomials (up to sign and positive scaling) and
/// builds the variable/polynomial occurrence matrix.
pub fn stats(f: &Formula) -> Stats {
    let mut polys: Vec<Polynomial> = Vec::new();
    let mut seen = HashSet::new();
    for a in f.atoms() {
        if a.lhs.is_constant() {
            continue;
        }
        let prim = a.lhs.primitive();
        let canon = match prim.leading_term() {
            Some((_, c)) if c.is_negative() => -&prim,
            _ => prim,
        };
        if seen.insert(canon) {
            polys.push(a.lhs.clone());
        }
    }
    let vars: Vec<Var> = f.vars().into_iter().collect();
    let occurrence: Vec<Vec<u8>> = vars
        .iter()
        .map(|v| polys.iter().map(|p| p.contains_var(v) as u8).collect())
        .collect();
    let cells = vars.len() * polys.len();
    let ones: usize = occurrence.iter().flatten().map(|&b| b as usize).sum();
    Stats {
        variables: vars.iter().map(|v| v.name().to_string()).collect(),
        polynomials: polys.iter().map(|p| p.to_string()).collect(),
        max_total_degree: polys.iter().map(Polynomial::total_degree).max().unwrap_or(0),
        max_var_degree: polys
            .iter()
            .flat_map(|p| vars.iter().map(move |v| p.degree_in(v)))
            .max()
            .unwrap_or(0),
        occurrence,
        density: if cells == 0 { 0.0 } else { ones as f64 / cells as f64 },
    }
}
