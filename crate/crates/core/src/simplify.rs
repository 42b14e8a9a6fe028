//! Sign-based clause simplification.
//!
//! Rules, applied in order to a fixpoint (at most [`MAX_ROUNDS`] rounds):
//!
//! * R1 constant folding (after dividing out the positive content),
//! * R2 merging atoms on the same polynomial, up to sign,
//! * R3 sign propagation through monomials, including dividing out a common
//!   monomial factor of known strict sign,
//! * R4 interval intersection for linear univariate atoms,
//! * R5 substitution of equations `c*v + q = 0` with `c` a nonzero constant,
//! * R6 sums of even powers with nonnegative coefficients,
//! * R7 reduction of repeated polynomial factors,
//! * R8 reduction modulo an equation linear in some variable whose
//!   coefficient has a known strict sign, kept when it shortens the atom.
//!
//! The rules are sound but incomplete: a clause that is not reported FALSE
//! may still be unsatisfiable.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::exec;
use crate::factor;
use crate::formula::{Atom, Clause, Dnf, Relation};
use crate::poly::{Monomial, Polynomial, Rational, Var};

pub const MAX_ROUNDS: usize = 50;

/// Largest polynomial (in terms) that R7 tries to factor.
pub const MAX_FACTOR_TERMS: usize = 400;

/// A subset of `{-, 0, +}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SignSet(u8);

#[allow(clippy::should_implement_trait)]
impl SignSet {
    pub const EMPTY: SignSet = SignSet(0);
    pub const NEG: SignSet = SignSet(1);
    pub const ZERO: SignSet = SignSet(2);
    pub const POS: SignSet = SignSet(4);
    pub const NONPOS: SignSet = SignSet(3);
    pub const NONZERO: SignSet = SignSet(5);
    pub const NONNEG: SignSet = SignSet(6);
    pub const ANY: SignSet = SignSet(7);

    pub fn of_relation(rel: Relation) -> SignSet {
        match rel {
            Relation::Eq => SignSet::ZERO,
            Relation::Neq => SignSet::NONZERO,
            Relation::Lt => SignSet::NEG,
            Relation::Le => SignSet::NONPOS,
            Relation::Gt => SignSet::POS,
            Relation::Ge => SignSet::NONNEG,
        }
    }

    pub fn of_sign(s: Ordering) -> SignSet {
        match s {
            Ordering::Less => SignSet::NEG,
            Ordering::Equal => SignSet::ZERO,
            Ordering::Greater => SignSet::POS,
        }
    }

    pub fn of_rational(r: &Rational) -> SignSet {
        if r.is_zero() {
            SignSet::ZERO
        } else if r.is_positive() {
            SignSet::POS
        } else {
            SignSet::NEG
        }
    }

    /// The relation whose satisfying signs are exactly `self`; `None` for
    /// the empty and the full set.
    pub fn to_relation(self) -> Option<Relation> {
        Relation::ALL
            .into_iter()
            .find(|&r| SignSet::of_relation(r) == self)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, s: Ordering) -> bool {
        self.0 & SignSet::of_sign(s).0 != 0
    }

    pub fn is_subset(self, other: SignSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersect(self, other: SignSet) -> SignSet {
        SignSet(self.0 & other.0)
    }

    pub fn union(self, other: SignSet) -> SignSet {
        SignSet(self.0 | other.0)
    }

    fn members(self) -> impl Iterator<Item = i8> {
        [(-1i8, 1u8), (0, 2), (1, 4)]
            .into_iter()
            .filter(move |(_, b)| self.0 & b != 0)
            .map(|(s, _)| s)
    }

    fn from_i8(s: i8) -> SignSet {
        match s {
            -1 => SignSet::NEG,
            0 => SignSet::ZERO,
            _ => SignSet::POS,
        }
    }

    pub fn neg(self) -> SignSet {
        self.members()
            .fold(SignSet::EMPTY, |acc, s| acc.union(SignSet::from_i8(-s)))
    }

    pub fn mul(self, other: SignSet) -> SignSet {
        let mut out = SignSet::EMPTY;
        for a in self.members() {
            for b in other.members() {
                out = out.union(SignSet::from_i8(a * b));
            }
        }
        out
    }

    pub fn add(self, other: SignSet) -> SignSet {
        let mut out = SignSet::EMPTY;
        for a in self.members() {
            for b in other.members() {
                out = out.union(match (a, b) {
                    (0, x) | (x, 0) => SignSet::from_i8(x),
                    (x, y) if x == y => SignSet::from_i8(x),
                    _ => SignSet::ANY,
                });
            }
        }
        out
    }

    pub fn pow(self, e: u32) -> SignSet {
        if e == 0 {
            return SignSet::POS;
        }
        let mut out = SignSet::EMPTY;
        for a in self.members() {
            let s = if a < 0 && e.is_multiple_of(2) { 1 } else { a };
            out = out.union(SignSet::from_i8(s));
        }
        out
    }
}

impl fmt::Debug for SignSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::from("{");
        for (i, m) in self.members().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push(match m {
                -1 => '-',
                0 => '0',
                _ => '+',
            });
        }
        s.push('}');
        f.write_str(&s)
    }
}

/// Sign of a polynomial given sign sets for (some of) its variables.
/// Unknown variables range over all reals.
pub fn poly_sign(p: &Polynomial, signs: &BTreeMap<Var, SignSet>) -> SignSet {
    let mut acc = SignSet::ZERO;
    for (m, c) in p.terms() {
        let mut t = SignSet::of_rational(c);
        for (v, e) in m.iter() {
            let s = signs.get(v).copied().unwrap_or(SignSet::ANY);
            t = t.mul(s.pow(*e));
        }
        acc = acc.add(t);
        if acc == SignSet::ANY {
            break;
        }
    }
    acc
}

/// External knowledge a clause is simplified under.
#[derive(Debug, Clone, Default)]
pub struct SignContext {
    pub known: BTreeMap<Var, SignSet>,
    pub equalities: BTreeMap<Var, Polynomial>,
}

impl SignContext {
    pub fn new() -> SignContext {
        SignContext::default()
    }

    /// Records `v ∈ s`. Returns `false` when the result would be empty.
    pub fn assume_sign(&mut self, v: Var, s: SignSet) -> bool {
        let cur = self.known.get(&v).copied().unwrap_or(SignSet::ANY);
        let next = cur.intersect(s);
        if next.is_empty() {
            return false;
        }
        self.known.insert(v, next);
        true
    }

    /// Records `v = q`. `q` must not mention `v` or any variable already
    /// bound to an equality.
    pub fn assume_equality(&mut self, v: Var, q: Polynomial) {
        debug_assert!(!q.contains_var(&v));
        let mut single = BTreeMap::new();
        single.insert(v.clone(), q.clone());
        for r in self.equalities.values_mut() {
            if r.contains_var(&v) {
                *r = r.substitute_many(&single);
            }
        }
        self.equalities.insert(v, q);
    }

    /// Sign facts read off single-variable atoms of `c`.
    pub fn from_atoms<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> SignContext {
        let mut ctx = SignContext::new();
        for a in atoms {
            if let Some((v, s)) = var_sign_fact(a) {
                ctx.assume_sign(v, s);
            }
        }
        ctx
    }

    fn substitute(&self, p: &Polynomial) -> Polynomial {
        if self.equalities.is_empty() || !self.equalities.keys().any(|v| p.contains_var(v)) {
            return p.clone();
        }
        p.substitute_many(&self.equalities)
    }
}

/// `v ∈ s` implied by an atom `c*v^k rel 0`.
fn var_sign_fact(a: &Atom) -> Option<(Var, SignSet)> {
    if a.lhs.num_terms() != 1 {
        return None;
    }
    let (m, c) = a.lhs.terms().next()?;
    let mut it = m.iter();
    let (v, e) = it.next()?;
    if it.next().is_some() {
        return None;
    }
    // sign(c * v^e) ∈ rel
    let target = SignSet::of_relation(a.rel);
    let cs = SignSet::of_rational(c);
    let allowed = [SignSet::NEG, SignSet::ZERO, SignSet::POS]
        .into_iter()
        .filter(|&s| !cs.mul(s.pow(*e)).intersect(target).is_empty())
        .fold(SignSet::EMPTY, SignSet::union);
    Some((v.clone(), allowed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Rule {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
    R8,
}

impl Rule {
    pub fn describe(self) -> &'static str {
        match self {
            Rule::R1 => "constant folding",
            Rule::R2 => "contradictory signs on one polynomial",
            Rule::R3 => "sign propagation through monomials",
            Rule::R4 => "empty interval",
            Rule::R5 => "substituted equality",
            Rule::R6 => "sum of even powers",
            Rule::R7 => "repeated factors",
            Rule::R8 => "reduction modulo an equation",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} ({})", self, self.describe())
    }
}

/// Evidence for a FALSE verdict: `support` are the input atoms the
/// contradiction was derived from, `conflict` the derived atoms that are
/// jointly unsatisfiable. [`check_certificate`] re-validates `conflict`
/// independently of the simplifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub rule: Rule,
    pub support: Vec<Atom>,
    pub conflict: Vec<Atom>,
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.rule)?;
        for (i, a) in self.conflict.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "({a})")?;
        }
        if self.support != self.conflict {
            f.write_str(" from ")?;
            for (i, a) in self.support.iter().enumerate() {
                if i > 0 {
                    f.write_str(" & ")?;
                }
                write!(f, "({a})")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Simplified {
    True,
    False(Certificate),
    Clause(Clause),
}

impl Simplified {
    pub fn is_false(&self) -> bool {
        matches!(self, Simplified::False(_))
    }
}

/// Per-variable signs, the atoms justifying them, and whether anything
/// was rewritten.
type IntervalFacts = (BTreeMap<Var, SignSet>, BTreeMap<Var, Vec<usize>>, bool);

#[derive(Debug, Clone)]
struct Work {
    atom: Atom,
    deps: Vec<usize>,
    solved_for: Option<Var>,
}

fn merge_deps(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// R7: an atom whose polynomial `c * prod f_i^m_i` has a repeated factor,
/// rewritten over lower powers. Equations and disequations keep the
/// square-free part; strict inequalities split into the odd-multiplicity
/// part and a disequation on the even part; weak inequalities lower every
/// exponent to 1 or 2. Returns `None` when nothing changes.
pub fn split_repeated(a: &Atom) -> Option<Vec<Atom>> {
    if a.lhs.num_terms() > MAX_FACTOR_TERMS || a.lhs.vars().iter().all(|v| a.lhs.degree_in(v) <= 1) {
        return None;
    }
    if !factor::may_have_repeated_factor(&a.lhs) {
        return None;
    }
    static MEMO: OnceLock<Mutex<HashMap<Atom, Option<Vec<Atom>>>>> = OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = memo.lock().expect("memo lock").get(a) {
        return hit.clone();
    }
    let result = split_repeated_uncached(a);
    let mut m = memo.lock().expect("memo lock");
    if m.len() > 100_000 {
        m.clear();
    }
    m.insert(a.clone(), result.clone());
    result
}

fn split_repeated_uncached(a: &Atom) -> Option<Vec<Atom>> {
    let (c, fs) = factor::squarefree_factors(&a.lhs);
    if fs.iter().all(|f| f.1 == 1) {
        return None;
    }
    let all = || fs.iter().map(|f| &f.0);
    let odd = || fs.iter().filter(|f| f.1 % 2 == 1).map(|f| &f.0);
    let even = || fs.iter().filter(|f| f.1 % 2 == 0).map(|f| &f.0);
    let one = Rational::one();
    Some(match a.rel {
        Relation::Eq | Relation::Neq => vec![Atom::new(factor::product(&one, all()), a.rel)],
        Relation::Gt | Relation::Lt => {
            let mut out = vec![Atom::new(factor::product(&c, odd()), a.rel)];
            if even().next().is_some() {
                out.push(Atom::new(factor::product(&one, even()), Relation::Neq));
            }
            out
        }
        Relation::Ge | Relation::Le => {
            if fs.iter().all(|f| f.1 <= 2) {
                return None;
            }
            let reduced: Vec<(Polynomial, u32)> =
                fs.iter().map(|(f, m)| (f.clone(), if m % 2 == 1 { 1 } else { 2 })).collect();
            let mut prod = Polynomial::constant(c);
            for (f, m) in &reduced {
                prod = &prod * &f.pow(*m);
            }
            vec![Atom::new(prod, a.rel)]
        }
    })
}

/// Divides out the positive content and makes the leading coefficient
/// positive, flipping the relation as needed.
pub fn normalize_atom(a: &Atom) -> Atom {
    if a.lhs.is_zero() {
        return a.clone();
    }
    let prim = a.lhs.primitive();
    match prim.leading_term() {
        Some((_, c)) if c.is_negative() => Atom::new(-prim, a.rel.flip()),
        _ => Atom::new(prim, a.rel),
    }
}

/// Lower or upper bound `v ⋈ value`.
#[derive(Debug, Clone)]
struct Bound {
    value: Rational,
    strict: bool,
    deps: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
struct Interval {
    lo: Option<Bound>,
    hi: Option<Bound>,
}

impl Interval {
    fn tighten_lo(&mut self, b: Bound) {
        let better = match &self.lo {
            None => true,
            Some(cur) => b.value > cur.value || (b.value == cur.value && b.strict && !cur.strict),
        };
        if better {
            self.lo = Some(b);
        }
    }

    fn tighten_hi(&mut self, b: Bound) {
        let better = match &self.hi {
            None => true,
            Some(cur) => b.value < cur.value || (b.value == cur.value && b.strict && !cur.strict),
        };
        if better {
            self.hi = Some(b);
        }
    }

    fn is_empty(&self) -> bool {
        match (&self.lo, &self.hi) {
            (Some(l), Some(h)) => l.value > h.value || (l.value == h.value && (l.strict || h.strict)),
            _ => false,
        }
    }

    fn point(&self) -> Option<&Rational> {
        match (&self.lo, &self.hi) {
            (Some(l), Some(h)) if l.value == h.value && !l.strict && !h.strict => Some(&l.value),
            _ => None,
        }
    }

    fn signs(&self) -> SignSet {
        let zero = Rational::zero();
        let mut s = SignSet::EMPTY;
        let lo_below = |x: &Rational| match &self.lo {
            None => true,
            Some(b) => b.value < *x || (b.value == *x && !b.strict),
        };
        let hi_above = |x: &Rational| match &self.hi {
            None => true,
            Some(b) => b.value > *x || (b.value == *x && !b.strict),
        };
        if self.lo.as_ref().is_none_or(|b| b.value < zero) {
            s = s.union(SignSet::NEG);
        }
        if lo_below(&zero) && hi_above(&zero) {
            s = s.union(SignSet::ZERO);
        }
        if self.hi.as_ref().is_none_or(|b| b.value > zero) {
            s = s.union(SignSet::POS);
        }
        s
    }
}

/// `a*v + b` with rational `a != 0`, `b`.
fn linear_univariate(p: &Polynomial) -> Option<(Var, Rational, Rational)> {
    let vars = p.vars();
    if vars.len() != 1 || p.total_degree() != 1 {
        return None;
    }
    let v = vars.into_iter().next()?;
    let cs = p.coeffs_wrt(&v);
    Some((v, cs[1].constant_value()?, cs[0].constant_value()?))
}

struct Simplifier<'a> {
    ctx: &'a SignContext,
    input: Vec<Atom>,
    work: Vec<Work>,
}

enum Step {
    Done,
    Changed,
    Contradiction(Certificate),
}

impl<'a> Simplifier<'a> {
    fn certificate(&self, rule: Rule, conflict: &[&Work]) -> Certificate {
        let mut deps = Vec::new();
        for w in conflict {
            deps = merge_deps(&deps, &w.deps);
        }
        Certificate {
            rule,
            support: deps.iter().map(|&i| self.input[i].clone()).collect(),
            conflict: conflict.iter().map(|w| w.atom.clone()).collect(),
        }
    }

    /// The context's sign facts on `vars`, as atoms.
    fn context_atoms(&self, vars: &BTreeSet<Var>) -> Vec<Atom> {
        vars.iter()
            .filter_map(|v| {
                let rel = self.ctx.known.get(v)?.to_relation()?;
                Some(Atom::new(Polynomial::var(v), rel))
            })
            .collect()
    }

    fn certificate_with(&self, rule: Rule, conflict: Vec<Atom>, deps: &[usize]) -> Certificate {
        Certificate {
            rule,
            support: deps.iter().map(|&i| self.input[i].clone()).collect(),
            conflict,
        }
    }

    /// R5 and context equalities; then R1 on every atom.
    fn fold_and_normalize(&mut self) -> Step {
        let solved: Vec<(usize, Var, Polynomial, Vec<usize>)> = self
            .work
            .iter()
            .enumerate()
            .filter_map(|(i, w)| {
                let v = w.solved_for.clone()?;
                let cs = w.atom.lhs.coeffs_wrt(&v);
                if cs.len() != 2 {
                    return None;
                }
                let c = cs[1].constant_value()?;
                Some((i, v, cs[0].scale(&(-c.recip())), w.deps.clone()))
            })
            .collect();
        let mut out = Vec::with_capacity(self.work.len());
        let mut changed = false;
        for (i, w) in std::mem::take(&mut self.work).into_iter().enumerate() {
            let mut lhs = self.ctx.substitute(&w.atom.lhs);
            let mut deps = w.deps.clone();
            for (j, v, q, qdeps) in &solved {
                if *j != i && lhs.contains_var(v) {
                    let next = lhs.substitute(v, q);
                    if !degree_grows(&lhs, &next) {
                        lhs = next;
                        deps = merge_deps(&deps, qdeps);
                    }
                }
            }
            let atom = normalize_atom(&Atom::new(lhs, w.atom.rel));
            let mut solved_for = w.solved_for.clone();
            if let Some(v) = &solved_for {
                let cs = atom.lhs.coeffs_wrt(v);
                if cs.len() != 2 || cs[1].constant_value().is_none() {
                    solved_for = None;
                }
            }
            if atom != w.atom {
                changed = true;
            }
            let (pieces, rule) = match split_repeated(&atom) {
                Some(parts) => {
                    changed = true;
                    solved_for = None;
                    (parts, Rule::R7)
                }
                None => (vec![atom], Rule::R1),
            };
            for atom in pieces {
                let atom = normalize_atom(&atom);
                match atom.fold() {
                    Some(true) => changed = true,
                    Some(false) => {
                        let conflict = Work { atom, deps, solved_for };
                        return Step::Contradiction(self.certificate(rule, &[&conflict]));
                    }
                    None => out.push(Work { atom, deps: deps.clone(), solved_for: solved_for.clone() }),
                }
            }
        }
        self.work = out;
        if changed {
            Step::Changed
        } else {
            Step::Done
        }
    }

    /// R2: merge atoms with the same (normalized) polynomial.
    fn merge_same_polynomial(&mut self) -> Step {
        type Group = (SignSet, Vec<usize>, Vec<usize>, Option<Var>);
        let mut groups: BTreeMap<Polynomial, Group> = BTreeMap::new();
        for (i, w) in self.work.iter().enumerate() {
            let e = groups
                .entry(w.atom.lhs.clone())
                .or_insert((SignSet::ANY, Vec::new(), Vec::new(), None));
            e.0 = e.0.intersect(SignSet::of_relation(w.atom.rel));
            e.1.push(i);
            e.2 = merge_deps(&e.2, &w.deps);
            if e.3.is_none() {
                e.3 = w.solved_for.clone();
            }
            if e.0.is_empty() {
                let members: Vec<&Work> = e.1.iter().map(|&j| &self.work[j]).collect();
                return Step::Contradiction(self.certificate(Rule::R2, &members));
            }
        }
        if groups.len() == self.work.len() {
            return Step::Done;
        }
        let mut out = Vec::with_capacity(groups.len());
        for (lhs, (set, _, deps, solved_for)) in groups {
            if let Some(rel) = set.to_relation() {
                out.push(Work {
                    atom: Atom::new(lhs, rel),
                    deps,
                    solved_for: solved_for.filter(|_| rel == Relation::Eq),
                });
            }
        }
        self.work = out;
        Step::Changed
    }

    /// R4 plus single-variable sign facts. Returns per-variable signs with
    /// the dependencies that justify them.
    fn intervals(&mut self) -> Result<IntervalFacts, Certificate> {
        let mut ivs: BTreeMap<Var, Interval> = BTreeMap::new();
        let mut facts: BTreeMap<Var, (SignSet, Vec<usize>)> = BTreeMap::new();
        let mut defining = vec![false; self.work.len()];
        for (i, w) in self.work.iter().enumerate() {
            if let Some((v, a, b)) = linear_univariate(&w.atom.lhs) {
                defining[i] = true;
                // a*v + b rel 0  <=>  v rel' -b/a
                let root = -&b / &a;
                let rel = if a.is_negative() { w.atom.rel.flip() } else { w.atom.rel };
                let iv = ivs.entry(v).or_default();
                let mk = |strict| Bound {
                    value: root.clone(),
                    strict,
                    deps: w.deps.clone(),
                };
                match rel {
                    Relation::Gt => iv.tighten_lo(mk(true)),
                    Relation::Ge => iv.tighten_lo(mk(false)),
                    Relation::Lt => iv.tighten_hi(mk(true)),
                    Relation::Le => iv.tighten_hi(mk(false)),
                    Relation::Eq => {
                        iv.tighten_lo(mk(false));
                        iv.tighten_hi(mk(false));
                    }
                    Relation::Neq => defining[i] = false,
                }
            } else if let Some((v, s)) = var_sign_fact(&w.atom) {
                defining[i] = true;
                let e = facts.entry(v).or_insert((SignSet::ANY, Vec::new()));
                e.0 = e.0.intersect(s);
                e.1 = merge_deps(&e.1, &w.deps);
            }
        }
        let mut signs: BTreeMap<Var, SignSet> = self.ctx.known.clone();
        let mut sign_deps: BTreeMap<Var, Vec<usize>> = BTreeMap::new();
        for (v, iv) in &ivs {
            let deps = merge_deps(
                iv.lo.as_ref().map(|b| b.deps.as_slice()).unwrap_or(&[]),
                iv.hi.as_ref().map(|b| b.deps.as_slice()).unwrap_or(&[]),
            );
            if iv.is_empty() {
                let conflict: Vec<Atom> = self
                    .work
                    .iter()
                    .filter(|w| linear_univariate(&w.atom.lhs).is_some_and(|(u, ..)| &u == v))
                    .filter(|w| w.deps.iter().all(|d| deps.contains(d)))
                    .map(|w| w.atom.clone())
                    .chain(self.context_atoms(&BTreeSet::from([v.clone()])))
                    .collect();
                return Err(self.certificate_with(Rule::R4, conflict, &deps));
            }
            let cur = signs.get(v).copied().unwrap_or(SignSet::ANY);
            signs.insert(v.clone(), cur.intersect(iv.signs()));
            sign_deps.insert(v.clone(), deps);
        }
        for (v, (s, deps)) in &facts {
            let cur = signs.get(v).copied().unwrap_or(SignSet::ANY);
            signs.insert(v.clone(), cur.intersect(*s));
            let d = sign_deps.entry(v.clone()).or_default();
            *d = merge_deps(d, deps);
        }
        for (v, s) in &signs {
            if s.is_empty() {
                let deps = sign_deps.get(v).cloned().unwrap_or_default();
                let conflict: Vec<Atom> = self
                    .work
                    .iter()
                    .filter(|w| w.atom.lhs.vars().len() == 1 && w.atom.lhs.contains_var(v))
                    .map(|w| w.atom.clone())
                    .chain(self.context_atoms(&BTreeSet::from([v.clone()])))
                    .collect();
                return Err(self.certificate_with(Rule::R4, conflict, &deps));
            }
        }

        // keep only the tightest bounds; turn point intervals into equations
        let mut changed = false;
        let mut out = Vec::with_capacity(self.work.len());
        let mut emitted_point: BTreeSet<Var> = BTreeSet::new();
        for (i, w) in self.work.iter().enumerate() {
            if !defining[i] {
                out.push(w.clone());
                continue;
            }
            let Some((v, a, _)) = linear_univariate(&w.atom.lhs) else {
                // single-monomial sign fact; drop if the context already implies it
                let implied = self.ctx.known.get(&w.atom.lhs.vars().into_iter().next().unwrap()).is_some_and(|&s| {
                    poly_sign(&w.atom.lhs, &self.ctx.known).is_subset(SignSet::of_relation(w.atom.rel)) && !s.is_empty()
                });
                if implied {
                    changed = true;
                } else {
                    out.push(w.clone());
                }
                continue;
            };
            let iv = &ivs[&v];
            if let Some(pt) = iv.point() {
                if emitted_point.insert(v.clone()) {
                    let lhs = Polynomial::var(&v) - Polynomial::constant(pt.clone());
                    let deps = merge_deps(&iv.lo.as_ref().unwrap().deps, &iv.hi.as_ref().unwrap().deps);
                    let atom = Atom::new(lhs, Relation::Eq);
                    let solved_for = if atom == w.atom {
                        w.solved_for.clone()
                    } else {
                        changed = true;
                        None
                    };
                    out.push(Work { atom, deps, solved_for });
                } else {
                    changed = true;
                }
                continue;
            }
            let rel = if a.is_negative() { w.atom.rel.flip() } else { w.atom.rel };
            let keeps_lo = matches!(rel, Relation::Gt | Relation::Ge)
                && iv.lo.as_ref().is_some_and(|b| b.deps == w.deps);
            let keeps_hi = matches!(rel, Relation::Lt | Relation::Le)
                && iv.hi.as_ref().is_some_and(|b| b.deps == w.deps);
            let ctx_implied = poly_sign(&w.atom.lhs, &self.ctx.known).is_subset(SignSet::of_relation(w.atom.rel));
            if (keeps_lo || keeps_hi) && !ctx_implied {
                out.push(w.clone());
            } else {
                changed = true;
            }
        }
        self.work = out;
        Ok((signs, sign_deps, changed))
    }

    /// R3/R6 on atoms that are not single-variable facts.
    fn propagate_signs(&mut self, signs: &BTreeMap<Var, SignSet>, sign_deps: &BTreeMap<Var, Vec<usize>>) -> Step {
        let mut changed = false;
        let mut out = Vec::with_capacity(self.work.len());
        let facts: Vec<Atom> = self
            .work
            .iter()
            .filter(|w| w.atom.lhs.vars().len() == 1)
            .map(|w| w.atom.clone())
            .collect();
        for w in std::mem::take(&mut self.work) {
            let single_var = w.atom.lhs.vars().len() == 1
                && (linear_univariate(&w.atom.lhs).is_some() || var_sign_fact(&w.atom).is_some());
            if single_var {
                out.push(w);
                continue;
            }
            let mut atom = w.atom.clone();
            let mut deps = w.deps.clone();
            let mut touched = false;
            // divide out a monomial factor of known strict sign
            let m = atom.lhs.monomial_content();
            if !m.is_one() {
                let mut divisor = Vec::new();
                let mut flip = false;
                for (v, e) in m.iter() {
                    let s = signs.get(v).copied().unwrap_or(SignSet::ANY);
                    let strict = s == SignSet::POS || s == SignSet::NEG || (s == SignSet::NONZERO && e % 2 == 0);
                    if strict {
                        divisor.push((v.clone(), *e));
                        if s == SignSet::NEG && e % 2 == 1 {
                            flip = !flip;
                        }
                        if let Some(d) = sign_deps.get(v) {
                            deps = merge_deps(&deps, d);
                        }
                    }
                }
                if !divisor.is_empty() {
                    let dm = Monomial::from_pairs(divisor);
                    let lhs = atom.lhs.div_monomial(&dm).expect("monomial content divides");
                    let rel = if flip { atom.rel.flip() } else { atom.rel };
                    atom = normalize_atom(&Atom::new(lhs, rel));
                    touched = true;
                }
            }
            let used: Vec<&Var> = atom
                .lhs
                .vars()
                .iter()
                .filter_map(|v| signs.get_key_value(v).map(|(k, _)| k))
                .collect();
            let s = poly_sign(&atom.lhs, signs);
            let want = SignSet::of_relation(atom.rel);
            let rule = if used.is_empty() { Rule::R6 } else { Rule::R3 };
            for v in &used {
                if let Some(d) = sign_deps.get(*v) {
                    deps = merge_deps(&deps, d);
                }
            }
            if s.intersect(want).is_empty() {
                let vars = atom.lhs.vars();
                let mut conflict = vec![atom];
                conflict.extend(
                    facts
                        .iter()
                        .filter(|f| f.lhs.vars().iter().all(|v| vars.contains(v)))
                        .cloned(),
                );
                conflict.extend(self.context_atoms(&vars));
                return Step::Contradiction(self.certificate_with(rule, conflict, &deps));
            }
            if s.is_subset(want) {
                changed = true;
                continue;
            }
            let refined = s.intersect(want);
            if let Some(rel) = refined.to_relation() {
                if rel != atom.rel {
                    atom = Atom::new(atom.lhs, rel);
                    touched = true;
                }
            }
            if touched {
                changed = true;
                let solved_for = w.solved_for.filter(|_| atom.rel == Relation::Eq);
                out.push(Work {
                    atom,
                    deps,
                    solved_for,
                });
            } else {
                out.push(w);
            }
        }
        self.work = out;
        if changed {
            Step::Changed
        } else {
            Step::Done
        }
    }

    /// R8: for an equation `c*x + d = 0` with `c` of known strict sign,
    /// `c^k * p` agrees with `p(-d/c) * c^k` on the solution set, where `k`
    /// is the degree of `p` in `x`. The atom is replaced when that is
    /// shorter.
    fn reduce_by_equations(&mut self, signs: &BTreeMap<Var, SignSet>, sign_deps: &BTreeMap<Var, Vec<usize>>) -> Step {
        let mut changed = false;
        for i in 0..self.work.len() {
            if self.work[i].atom.rel != Relation::Eq {
                continue;
            }
            let e = self.work[i].atom.lhs.clone();
            if e.num_terms() > MAX_FACTOR_TERMS {
                continue;
            }
            for x in e.vars() {
                if e.degree_in(&x) != 1 {
                    continue;
                }
                let cs = e.coeffs_wrt(&x);
                let c_sign = poly_sign(&cs[1], signs);
                if c_sign != SignSet::POS && c_sign != SignSet::NEG {
                    continue;
                }
                let neg_d = -&cs[0];
                for j in 0..self.work.len() {
                    let p = &self.work[j].atom.lhs;
                    if j == i || !p.contains_var(&x) || p.num_terms() > MAX_FACTOR_TERMS {
                        continue;
                    }
                    let pc = p.coeffs_wrt(&x);
                    let k = pc.len() - 1;
                    let mut r = Polynomial::zero();
                    for (m, coeff) in pc.iter().enumerate() {
                        if !coeff.is_zero() {
                            r = &r + &(&(coeff * &neg_d.pow(m as u32)) * &cs[1].pow((k - m) as u32));
                        }
                    }
                    if r.num_terms() >= p.num_terms() || degree_grows(p, &r) {
                        continue;
                    }
                    let flip = c_sign == SignSet::NEG && k % 2 == 1;
                    let rel = if flip { self.work[j].atom.rel.flip() } else { self.work[j].atom.rel };
                    let mut deps = merge_deps(&self.work[j].deps, &self.work[i].deps);
                    for v in cs[1].vars() {
                        if let Some(d) = sign_deps.get(&v) {
                            deps = merge_deps(&deps, d);
                        }
                    }
                    let atom = normalize_atom(&Atom::new(r, rel));
                    if atom.fold() == Some(false) {
                        let conflict = Work { atom, deps, solved_for: None };
                        return Step::Contradiction(self.certificate(Rule::R8, &[&conflict]));
                    }
                    self.work[j] = Work { atom, deps, solved_for: None };
                    changed = true;
                }
            }
        }
        if changed {
            Step::Changed
        } else {
            Step::Done
        }
    }

    /// R5: marks one more equation `c*v + q = 0` (constant `c`) as solved
    /// for `v`, so later rounds substitute `v = -q/c` into the other atoms.
    fn solve_equation(&mut self) -> bool {
        let taken: BTreeSet<Var> = self.work.iter().filter_map(|w| w.solved_for.clone()).collect();
        for i in 0..self.work.len() {
            let w = &self.work[i];
            if w.atom.rel != Relation::Eq || w.solved_for.is_some() {
                continue;
            }
            let mut best = None;
            for v in w.atom.lhs.vars() {
                if taken.contains(&v) || w.atom.lhs.degree_in(&v) != 1 {
                    continue;
                }
                if w.atom.lhs.coeffs_wrt(&v)[1].constant_value().is_none() {
                    continue;
                }
                let elsewhere = self
                    .work
                    .iter()
                    .enumerate()
                    .any(|(j, o)| j != i && o.atom.lhs.contains_var(&v));
                if elsewhere {
                    best = Some(v);
                }
            }
            if let Some(v) = best {
                self.work[i].solved_for = Some(v);
                return true;
            }
        }
        false
    }
}

/// A substitution may not push any variable past degree 2 unless it was
/// already there.
fn degree_grows(before: &Polynomial, after: &Polynomial) -> bool {
    after.vars().iter().any(|v| {
        let d = after.degree_in(v);
        d > 2 && d > before.degree_in(v)
    })
}

/// Simplifies a conjunction of atoms under `ctx`.
pub fn simplify_atoms(atoms: &[Atom], ctx: &SignContext) -> Simplified {
    let input: Vec<Atom> = atoms.to_vec();
    let work = input
        .iter()
        .enumerate()
        .map(|(i, a)| Work {
            atom: a.clone(),
            deps: vec![i],
            solved_for: None,
        })
        .collect();
    let mut s = Simplifier {
        ctx,
        input,
        work,
    };
    for _ in 0..MAX_ROUNDS {
        let mut changed = false;
        match s.fold_and_normalize() {
            Step::Contradiction(c) => return Simplified::False(c),
            Step::Changed => changed = true,
            Step::Done => {}
        }
        match s.merge_same_polynomial() {
            Step::Contradiction(c) => return Simplified::False(c),
            Step::Changed => changed = true,
            Step::Done => {}
        }
        let (signs, sign_deps, ch) = match s.intervals() {
            Ok(r) => r,
            Err(c) => return Simplified::False(c),
        };
        changed |= ch;
        match s.propagate_signs(&signs, &sign_deps) {
            Step::Contradiction(c) => return Simplified::False(c),
            Step::Changed => changed = true,
            Step::Done => {}
        }
        if !changed {
            match s.reduce_by_equations(&signs, &sign_deps) {
                Step::Contradiction(c) => return Simplified::False(c),
                Step::Changed => changed = true,
                Step::Done => {}
            }
        }
        if !changed {
            changed = s.solve_equation();
        }
        if !changed {
            break;
        }
    }
    if s.work.is_empty() {
        return Simplified::True;
    }
    match Clause::new(s.work.into_iter().map(|w| w.atom)) {
        Some(c) if c.is_empty() => Simplified::True,
        Some(c) => Simplified::Clause(c),
        None => unreachable!("constant atoms are folded"),
    }
}

pub fn simplify_clause(c: &Clause, ctx: &SignContext) -> Simplified {
    simplify_atoms(c.atoms(), ctx)
}

/// Result of pruning a DNF, with a certificate per discarded clause.
#[derive(Debug, Clone)]
pub struct Pruned {
    pub dnf: Dnf,
    pub discarded: Vec<(Clause, Certificate)>,
}

/// Simplifies every clause, dropping FALSE ones; a TRUE clause makes the
/// whole DNF TRUE.
pub fn prune_dnf(d: &Dnf, ctx: &SignContext) -> Pruned {
    let results = exec::map(d.clauses(), |c| simplify_clause(c, ctx));
    let mut kept = Vec::new();
    let mut discarded = Vec::new();
    for (c, r) in d.clauses().iter().zip(results) {
        match r {
            Simplified::True => {
                return Pruned {
                    dnf: Dnf::verum(),
                    discarded,
                }
            }
            Simplified::False(cert) => discarded.push((c.clone(), cert)),
            Simplified::Clause(s) => kept.push(s),
        }
    }
    Pruned {
        dnf: Dnf::from_clauses(kept),
        discarded,
    }
}

// ---------------------------------------------------------------------------
// Certificate checking by interval arithmetic, independent of the rules above.

#[derive(Debug, Clone)]
struct Ends {
    lo: Option<(Rational, bool)>,
    hi: Option<(Rational, bool)>,
}

impl Ends {
    fn everything() -> Ends {
        Ends { lo: None, hi: None }
    }

    fn point(x: Rational) -> Ends {
        Ends {
            lo: Some((x.clone(), false)),
            hi: Some((x, false)),
        }
    }

    fn empty(&self) -> bool {
        match (&self.lo, &self.hi) {
            (Some((l, ls)), Some((h, hs))) => l > h || (l == h && (*ls || *hs)),
            _ => false,
        }
    }

    fn add(&self, o: &Ends) -> Ends {
        let f = |a: &Option<(Rational, bool)>, b: &Option<(Rational, bool)>| match (a, b) {
            (Some((x, xs)), Some((y, ys))) => Some((x + y, *xs || *ys)),
            _ => None,
        };
        Ends {
            lo: f(&self.lo, &o.lo),
            hi: f(&self.hi, &o.hi),
        }
    }

    fn scale(&self, c: &Rational) -> Ends {
        if c.is_zero() {
            return Ends::point(Rational::zero());
        }
        let m = |b: &Option<(Rational, bool)>| b.as_ref().map(|(x, s)| (x * c, *s));
        if c.is_positive() {
            Ends {
                lo: m(&self.lo),
                hi: m(&self.hi),
            }
        } else {
            Ends {
                lo: m(&self.hi),
                hi: m(&self.lo),
            }
        }
    }

    /// Product, using only the signs of the endpoints when unbounded.
    fn mul(&self, o: &Ends) -> Ends {
        // Represent endpoints as extended values: None lo = -inf, None hi = +inf.
        #[derive(Clone)]
        enum X {
            NegInf,
            Fin(Rational, bool),
            PosInf,
        }
        let lo = |b: &Option<(Rational, bool)>| match b {
            None => X::NegInf,
            Some((x, s)) => X::Fin(x.clone(), *s),
        };
        let hi = |b: &Option<(Rational, bool)>| match b {
            None => X::PosInf,
            Some((x, s)) => X::Fin(x.clone(), *s),
        };
        let prod = |a: &X, b: &X| -> X {
            let sign = |x: &X| match x {
                X::NegInf => -1,
                X::PosInf => 1,
                X::Fin(v, _) => {
                    if v.is_zero() {
                        0
                    } else if v.is_positive() {
                        1
                    } else {
                        -1
                    }
                }
            };
            match (a, b) {
                (X::Fin(x, xs), X::Fin(y, ys)) => X::Fin(x * y, *xs || *ys),
                _ => match sign(a) * sign(b) {
                    0 => X::Fin(Rational::zero(), false),
                    1 => X::PosInf,
                    _ => X::NegInf,
                },
            }
        };
        let cands = [
            prod(&lo(&self.lo), &lo(&o.lo)),
            prod(&lo(&self.lo), &hi(&o.hi)),
            prod(&hi(&self.hi), &lo(&o.lo)),
            prod(&hi(&self.hi), &hi(&o.hi)),
        ];
        let key = |x: &X| -> (i8, Option<Rational>) {
            match x {
                X::NegInf => (-1, None),
                X::Fin(v, _) => (0, Some(v.clone())),
                X::PosInf => (1, None),
            }
        };
        let min = cands.iter().min_by(|a, b| key(a).cmp(&key(b))).unwrap();
        let max = cands.iter().max_by(|a, b| key(a).cmp(&key(b))).unwrap();
        // strictness is dropped (conservative: closed bounds are wider)
        let to_lo = |x: &X| match x {
            X::Fin(v, _) => Some((v.clone(), false)),
            _ => None,
        };
        Ends {
            lo: to_lo(min),
            hi: to_lo(max),
        }
    }

    fn pow(&self, e: u32) -> Ends {
        let mut acc = Ends::point(Rational::one());
        for _ in 0..e {
            acc = acc.mul(self);
        }
        if e.is_multiple_of(2) {
            let zero = Rational::zero();
            let nonneg = Ends {
                lo: Some((zero, false)),
                hi: None,
            };
            acc = acc.intersect(&nonneg);
        }
        acc
    }

    fn intersect(&self, o: &Ends) -> Ends {
        let lo = match (&self.lo, &o.lo) {
            (None, b) | (b, None) => b.clone(),
            (Some(a), Some(b)) => Some(if a.0 > b.0 || (a.0 == b.0 && a.1) { a.clone() } else { b.clone() }),
        };
        let hi = match (&self.hi, &o.hi) {
            (None, b) | (b, None) => b.clone(),
            (Some(a), Some(b)) => Some(if a.0 < b.0 || (a.0 == b.0 && a.1) { a.clone() } else { b.clone() }),
        };
        Ends { lo, hi }
    }

    fn of_relation(rel: Relation) -> Option<Ends> {
        let z = Rational::zero();
        Some(match rel {
            Relation::Eq => Ends::point(z),
            Relation::Lt => Ends { lo: None, hi: Some((z, true)) },
            Relation::Le => Ends { lo: None, hi: Some((z, false)) },
            Relation::Gt => Ends { lo: Some((z, true)), hi: None },
            Relation::Ge => Ends { lo: Some((z, false)), hi: None },
            Relation::Neq => return None,
        })
    }
}

/// R7 split of `a`, with the factorization re-validated by expansion.
fn checked_split(a: &Atom) -> Option<Vec<Atom>> {
    if !factor::may_have_repeated_factor(&a.lhs) {
        return None;
    }
    let (c, fs) = factor::squarefree_factors(&a.lhs);
    if !factor::check_factors(&a.lhs, &c, &fs) {
        return None;
    }
    split_repeated_uncached(a)
}

fn proportional(p: &Polynomial, q: &Polynomial) -> Option<Rational> {
    let (mp, cp) = p.leading_term()?;
    let (mq, cq) = q.leading_term()?;
    if mp != mq || p.num_terms() != q.num_terms() {
        return None;
    }
    let k = cp / cq;
    (p == &q.scale(&k)).then_some(k)
}

/// Independently confirms that `cert.conflict` is unsatisfiable.
pub fn check_certificate(cert: &Certificate) -> bool {
    let mut expanded = Vec::new();
    for a in &cert.conflict {
        match checked_split(a) {
            Some(parts) => expanded.extend(parts),
            None => expanded.push(a.clone()),
        }
    }
    let atoms = &expanded;
    if atoms.is_empty() {
        return false;
    }
    if atoms.iter().any(|a| a.fold() == Some(false)) {
        return true;
    }
    // one polynomial (up to a constant factor) with incompatible relations
    for (i, a) in atoms.iter().enumerate() {
        let mut allowed = [true; 3];
        let mark = |allowed: &mut [bool; 3], rel: Relation, flip: bool| {
            for (k, s) in [Ordering::Less, Ordering::Equal, Ordering::Greater].into_iter().enumerate() {
                let s = if flip { s.reverse() } else { s };
                if !rel.holds(s) {
                    allowed[k] = false;
                }
            }
        };
        mark(&mut allowed, a.rel, false);
        for b in &atoms[i + 1..] {
            if let Some(k) = proportional(&b.lhs, &a.lhs) {
                mark(&mut allowed, b.rel, k.is_negative());
            }
        }
        if allowed.iter().all(|x| !x) {
            return true;
        }
    }
    // interval reasoning: bounds from linear univariate atoms, then range
    // evaluation of every atom
    let mut box_: BTreeMap<Var, Ends> = BTreeMap::new();
    for a in atoms {
        let vars = a.lhs.vars();
        if vars.len() != 1 || a.lhs.total_degree() != 1 {
            continue;
        }
        let v = vars.into_iter().next().unwrap();
        let cs = a.lhs.coeffs_wrt(&v);
        let (Some(k), Some(b)) = (cs[1].constant_value(), cs[0].constant_value()) else {
            continue;
        };
        let Some(rel_range) = Ends::of_relation(a.rel) else { continue };
        // k*v + b ∈ rel_range  =>  v ∈ (rel_range - b) / k
        let shifted = rel_range.add(&Ends::point(-b));
        let range = shifted.scale(&k.recip());
        let cur = box_.remove(&v).unwrap_or_else(Ends::everything);
        box_.insert(v, cur.intersect(&range));
    }
    if box_.values().any(Ends::empty) {
        return true;
    }
    for a in atoms {
        let Some(target) = Ends::of_relation(a.rel) else { continue };
        let mut range = Ends::point(Rational::zero());
        for (m, c) in a.lhs.terms() {
            let mut t = Ends::point(Rational::one());
            for (v, e) in m.iter() {
                let iv = box_.get(v).cloned().unwrap_or_else(Ends::everything);
                t = t.mul(&iv.pow(*e));
            }
            range = range.add(&t.scale(c));
        }
        if range.intersect(&target).empty() {
            return true;
        }
        // strict target touching a closed range end at 0 from the wrong side
        if a.rel == Relation::Gt && range.hi.as_ref().is_some_and(|(h, s)| h.is_zero() && *s) {
            return true;
        }
        if a.rel == Relation::Lt && range.lo.as_ref().is_some_and(|(l, s)| l.is_zero() && *s) {
            return true;
        }
    }
    false
}
