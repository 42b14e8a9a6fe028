//! Generation of generic quantifier-free equivalents: virtual substitution
//! for conjunctions of degree at most two in the eliminated variable, and
//! the recursive composition for conjunctions of linear inequalities.

use std::collections::BTreeMap;

use crate::blocks::{BlockResult, BlockSignature, Provenance};
use crate::error::{Error, Result};
use crate::formula::{to_dnf_capped, Atom, Clause, Dnf, Formula, Relation, DEFAULT_CLAUSE_CAP};
use crate::poly::{int, Polynomial, Var};
use crate::simplify::{prune_dnf, SignContext};

/// The generic coefficient `a_{i,j}`: coefficient of `x^j` in constraint `i`.
pub fn generic_coeff(i: usize, j: usize) -> Var {
    if i < 10 {
        Var::new(&format!("a{i}{j}"))
    } else {
        Var::new(&format!("a{i}_{j}"))
    }
}

/// The bound variable of generic conjunctions.
pub fn generic_x() -> Var {
    Var::new("x")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenericRow {
    pub rel: Relation,
    /// `coeffs[j]` multiplies `x^j`.
    pub coeffs: Vec<Var>,
}

/// A conjunction of constraints with symbolic coefficients, rows numbered
/// from 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenericConjunction {
    pub rows: Vec<GenericRow>,
}

impl GenericConjunction {
    pub fn new(constraints: &[(u32, Relation)]) -> GenericConjunction {
        let rows = constraints
            .iter()
            .enumerate()
            .map(|(k, &(deg, rel))| GenericRow {
                rel,
                coeffs: (0..=deg as usize).map(|j| generic_coeff(k + 1, j)).collect(),
            })
            .collect();
        GenericConjunction { rows }
    }

    pub fn from_signature(sig: &BlockSignature) -> GenericConjunction {
        GenericConjunction::new(sig.constraints())
    }

    pub fn atoms(&self) -> Vec<Atom> {
        let x = generic_x();
        self.rows
            .iter()
            .map(|r| {
                let coeffs: Vec<Polynomial> = r.coeffs.iter().map(Polynomial::var).collect();
                Atom::new(Polynomial::from_coeffs(&coeffs, &x), r.rel)
            })
            .collect()
    }

    pub fn generic_vars(&self) -> Vec<Var> {
        self.rows.iter().flat_map(|r| r.coeffs.iter().cloned()).collect()
    }
}

/// Kind of a virtual test point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestPointKind {
    NegInfinity,
    RootLinear,
    RootQuadraticPlus,
    RootQuadraticMinus,
    /// An equation whose coefficients all vanish; the remaining
    /// constraints are eliminated recursively.
    Vanishing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestPoint {
    pub kind: TestPointKind,
    /// True when the point is the root shifted by a positive infinitesimal.
    pub epsilon: bool,
    /// Side conditions over the parameters.
    pub guard: Formula,
}

#[derive(Debug, Clone)]
enum Root {
    /// `-b/a`
    Linear { a: Polynomial, b: Polynomial },
    /// `(-a1 ± sqrt(a1^2 - 4 a2 a0)) / (2 a2)`
    Quadratic { a2: Polynomial, a1: Polynomial, disc: Polynomial, plus: bool },
}

fn cmp0(p: Polynomial, rel: Relation) -> Formula {
    Formula::atom(p, rel)
}

fn discriminant(a2: &Polynomial, a1: &Polynomial, a0: &Polynomial) -> Polynomial {
    a1 * a1 - &(a2 * a0).scale(&int(4))
}

/// `A + B·sqrt(D) rel 0`, assuming `D >= 0`.
fn sqrt_condition(a: &Polynomial, b: &Polynomial, d: &Polynomial, rel: Relation) -> Formula {
    if b.is_zero() {
        return cmp0(a.clone(), rel);
    }
    let e = a * a - &(&(b * b) * d);
    match rel {
        Relation::Eq => Formula::and([cmp0(a * b, Relation::Le), cmp0(e, Relation::Eq)]),
        Relation::Neq => Formula::or([cmp0(a * b, Relation::Gt), cmp0(e, Relation::Neq)]),
        Relation::Gt => Formula::or([
            Formula::and([cmp0(a.clone(), Relation::Gt), cmp0(e.clone(), Relation::Gt)]),
            Formula::and([cmp0(b.clone(), Relation::Gt), cmp0(a.clone(), Relation::Gt)]),
            Formula::and([cmp0(b.clone(), Relation::Gt), cmp0(e, Relation::Lt)]),
        ]),
        Relation::Ge => Formula::or([
            Formula::and([cmp0(a.clone(), Relation::Ge), cmp0(e.clone(), Relation::Ge)]),
            Formula::and([cmp0(b.clone(), Relation::Ge), cmp0(e, Relation::Le)]),
        ]),
        Relation::Lt => sqrt_condition(&-a, &-b, d, Relation::Gt),
        Relation::Le => sqrt_condition(&-a, &-b, d, Relation::Ge),
    }
}

/// `q(t) rel 0` at a root `t`, where `neg` records that the root's
/// denominator is negative in the current branch.
fn sub_root(q: &Polynomial, x: &Var, rel: Relation, root: &Root, neg: bool) -> Formula {
    let c = q.coeffs_wrt(x);
    let d = c.len() - 1;
    if d == 0 {
        return cmp0(c[0].clone(), rel);
    }
    let rel = if neg && d % 2 == 1 { rel.flip() } else { rel };
    match root {
        Root::Linear { a, b } => {
            // a^d q(-b/a) = Σ c_j (-b)^j a^(d-j)
            let nb = -b;
            let mut acc = Polynomial::zero();
            for (j, cj) in c.iter().enumerate() {
                if !cj.is_zero() {
                    acc = acc + &(&(cj * &nb.pow(j as u32)) * &a.pow((d - j) as u32));
                }
            }
            cmp0(acc, rel)
        }
        Root::Quadratic { a2, a1, disc, plus } => {
            // (2 a2)^d q(t) = A + B sqrt(disc)
            let two_a2 = a2.scale(&int(2));
            let u = -a1;
            let v = if *plus { Polynomial::one() } else { -Polynomial::one() };
            let (mut pa, mut pb) = (Polynomial::one(), Polynomial::zero());
            let (mut sa, mut sb) = (Polynomial::zero(), Polynomial::zero());
            for (j, cj) in c.iter().enumerate() {
                if j > 0 {
                    let na = &(&pa * &u) + &(&(&pb * &v) * disc);
                    let nb = &(&pa * &v) + &(&pb * &u);
                    pa = na;
                    pb = nb;
                }
                if !cj.is_zero() {
                    let w = cj * &two_a2.pow((d - j) as u32);
                    sa = sa + &(&w * &pa);
                    sb = sb + &(&w * &pb);
                }
            }
            sqrt_condition(&sa, &sb, disc, rel)
        }
    }
}

fn derivatives(q: &Polynomial, x: &Var) -> Vec<Polynomial> {
    let mut out = vec![q.clone()];
    while out.last().unwrap().contains_var(x) {
        let d = out.last().unwrap().derivative(x);
        out.push(d);
    }
    out
}

/// `q(t + ε) rel 0` for `rel` in {>, ≥}, expanded lexicographically over
/// the derivatives at `t`.
fn sub_epsilon(q: &Polynomial, x: &Var, rel: Relation, root: &Root, neg: bool) -> Formula {
    let ds = derivatives(q, x);
    let mut cases = Vec::new();
    for k in 0..ds.len() {
        let mut parts: Vec<Formula> = ds[..k]
            .iter()
            .map(|p| sub_root(p, x, Relation::Eq, root, neg))
            .collect();
        parts.push(sub_root(&ds[k], x, Relation::Gt, root, neg));
        cases.push(Formula::and(parts));
    }
    if rel == Relation::Ge {
        cases.push(Formula::and(
            ds.iter().map(|p| sub_root(p, x, Relation::Eq, root, neg)),
        ));
    }
    Formula::or(cases)
}

/// `q(-∞) rel 0` for `rel` in {>, ≥}.
fn sub_neg_infinity(q: &Polynomial, x: &Var, rel: Relation) -> Formula {
    let c = q.coeffs_wrt(x);
    let mut cases = Vec::new();
    for k in (0..c.len()).rev() {
        let sk = if k % 2 == 1 { -&c[k] } else { c[k].clone() };
        let mut parts: Vec<Formula> = c[k + 1..]
            .iter()
            .map(|cj| cmp0(cj.clone(), Relation::Eq))
            .collect();
        parts.push(cmp0(sk, Relation::Gt));
        cases.push(Formula::and(parts));
    }
    if rel == Relation::Ge {
        cases.push(Formula::and(c.iter().map(|cj| cmp0(cj.clone(), Relation::Eq))));
    }
    Formula::or(cases)
}

fn check_degrees(x: &Var, atoms: &[Atom]) -> Result<()> {
    for a in atoms {
        let d = a.lhs.degree_in(x);
        if d > 2 {
            return Err(Error::UnsupportedDegree {
                var: x.clone(),
                degree: d,
                atom: a.to_string(),
            });
        }
    }
    Ok(())
}

/// Quantifier-free equivalent of `∃x. ⋀ atoms` for atoms of degree at
/// most two in `x`, by virtual substitution.
pub fn vs_exists(x: &Var, atoms: &[Atom]) -> Result<Formula> {
    check_degrees(x, atoms)?;
    let (inner, outer): (Vec<Atom>, Vec<Atom>) = atoms.iter().cloned().partition(|a| a.contains(x));
    let mut parts: Vec<Formula> = outer.into_iter().map(Formula::from).collect();
    parts.push(Formula::or(
        vs_disjuncts(x, &inner).into_iter().map(|(_, f)| f),
    ));
    Ok(Formula::and(parts))
}

/// Normalizes `<`, `≤` to `>`, `≥` and splits disequations, giving a
/// disjunction of conjunctions over `=`, `>`, `≥`.
fn normalize_relations(atoms: &[Atom]) -> Vec<Vec<Atom>> {
    let mut out: Vec<Vec<Atom>> = vec![Vec::new()];
    for a in atoms {
        match a.rel {
            Relation::Lt => out.iter_mut().for_each(|c| c.push(Atom::new(-&a.lhs, Relation::Gt))),
            Relation::Le => out.iter_mut().for_each(|c| c.push(Atom::new(-&a.lhs, Relation::Ge))),
            Relation::Neq => {
                let mut next = Vec::with_capacity(out.len() * 2);
                for c in out {
                    let mut pos = c.clone();
                    pos.push(Atom::new(a.lhs.clone(), Relation::Gt));
                    let mut neg = c;
                    neg.push(Atom::new(-&a.lhs, Relation::Gt));
                    next.push(pos);
                    next.push(neg);
                }
                out = next;
            }
            _ => out.iter_mut().for_each(|c| c.push(a.clone())),
        }
    }
    out
}

/// The guarded test-point disjuncts of `∃x. ⋀ atoms`; every atom must
/// contain `x` with degree at most two. Each formula already includes its
/// guard.
pub fn vs_disjuncts(x: &Var, atoms: &[Atom]) -> Vec<(TestPoint, Formula)> {
    if atoms.is_empty() {
        return vec![(
            TestPoint { kind: TestPointKind::NegInfinity, epsilon: false, guard: Formula::True },
            Formula::True,
        )];
    }
    normalize_relations(atoms)
        .iter()
        .flat_map(|c| disjuncts_normalized(x, c))
        .collect()
}

fn disjuncts_normalized(x: &Var, atoms: &[Atom]) -> Vec<(TestPoint, Formula)> {
    let live: Vec<Atom> = atoms.iter().filter(|a| a.contains(x)).cloned().collect();
    let fixed: Vec<Formula> = atoms
        .iter()
        .filter(|a| !a.contains(x))
        .cloned()
        .map(Formula::from)
        .collect();
    let with_fixed = |v: Vec<(TestPoint, Formula)>| -> Vec<(TestPoint, Formula)> {
        v.into_iter()
            .map(|(tp, f)| {
                let mut parts = fixed.clone();
                parts.push(f);
                (tp, Formula::and(parts))
            })
            .collect()
    };
    if live.is_empty() {
        return with_fixed(vec![(
            TestPoint { kind: TestPointKind::NegInfinity, epsilon: false, guard: Formula::True },
            Formula::True,
        )]);
    }
    let eq = live
        .iter()
        .enumerate()
        .filter(|(_, a)| a.rel == Relation::Eq)
        .min_by_key(|(_, a)| a.lhs.degree_in(x))
        .map(|(i, _)| i);
    match eq {
        Some(i) => with_fixed(gauss(x, &live, i)),
        None => with_fixed(inequality_points(x, &live)),
    }
}

/// Equation-guided elimination using equation `i`.
fn gauss(x: &Var, atoms: &[Atom], i: usize) -> Vec<(TestPoint, Formula)> {
    let c = atoms[i].lhs.coeffs_wrt(x);
    let others: Vec<Atom> = atoms
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != i)
        .map(|(_, a)| a.clone())
        .collect();
    let mut out = Vec::new();
    let signs = [(Relation::Gt, false), (Relation::Lt, true)];
    if c.len() == 2 {
        let root = Root::Linear { a: c[1].clone(), b: c[0].clone() };
        for (srel, neg) in signs {
            let guard = cmp0(c[1].clone(), srel);
            let mut parts = vec![guard.clone()];
            parts.extend(others.iter().map(|a| sub_root(&a.lhs, x, a.rel, &root, neg)));
            out.push((
                TestPoint { kind: TestPointKind::RootLinear, epsilon: false, guard },
                Formula::and(parts),
            ));
        }
        let guard = Formula::and([cmp0(c[1].clone(), Relation::Eq), cmp0(c[0].clone(), Relation::Eq)]);
        let rest = Formula::or(vs_disjuncts(x, &others).into_iter().map(|(_, f)| f));
        out.push((
            TestPoint { kind: TestPointKind::Vanishing, epsilon: false, guard: guard.clone() },
            Formula::and([guard, rest]),
        ));
    } else {
        let disc = discriminant(&c[2], &c[1], &c[0]);
        for (srel, neg) in signs {
            for plus in [true, false] {
                let root = Root::Quadratic { a2: c[2].clone(), a1: c[1].clone(), disc: disc.clone(), plus };
                let guard = Formula::and([cmp0(c[2].clone(), srel), cmp0(disc.clone(), Relation::Ge)]);
                let mut parts = vec![guard.clone()];
                parts.extend(others.iter().map(|a| sub_root(&a.lhs, x, a.rel, &root, neg)));
                let kind = if plus { TestPointKind::RootQuadraticPlus } else { TestPointKind::RootQuadraticMinus };
                out.push((TestPoint { kind, epsilon: false, guard }, Formula::and(parts)));
            }
        }
        // leading coefficient vanishes: the equation is linear
        let lin = Atom::new(Polynomial::from_coeffs(&c[..2], x), Relation::Eq);
        let mut reduced = vec![lin];
        reduced.extend(others);
        let zero = cmp0(c[2].clone(), Relation::Eq);
        for (tp, f) in vs_disjuncts(x, &reduced) {
            let guard = Formula::and([zero.clone(), tp.guard]);
            out.push((TestPoint { guard, ..tp }, Formula::and([zero.clone(), f])));
        }
    }
    out
}

/// Test points for a conjunction of `>` and `≥` constraints: −∞, roots of
/// weak constraints, and roots of strict constraints shifted by ε.
fn inequality_points(x: &Var, atoms: &[Atom]) -> Vec<(TestPoint, Formula)> {
    let mut out = Vec::new();
    let mut parts = Vec::new();
    for a in atoms {
        parts.push(sub_neg_infinity(&a.lhs, x, a.rel));
    }
    out.push((
        TestPoint { kind: TestPointKind::NegInfinity, epsilon: false, guard: Formula::True },
        Formula::and(parts),
    ));
    let signs = [(Relation::Gt, false), (Relation::Lt, true)];
    let body = |root: &Root, neg: bool, eps: bool| -> Vec<Formula> {
        atoms
            .iter()
            .map(|a| {
                if eps {
                    sub_epsilon(&a.lhs, x, a.rel, root, neg)
                } else {
                    sub_root(&a.lhs, x, a.rel, root, neg)
                }
            })
            .collect()
    };
    for a in atoms {
        let c = a.lhs.coeffs_wrt(x);
        let eps = a.rel == Relation::Gt;
        let linear_points = |out: &mut Vec<(TestPoint, Formula)>, lead_zero: Option<Formula>| {
            let root = Root::Linear { a: c[1].clone(), b: c[0].clone() };
            for (srel, neg) in signs {
                let mut g = lead_zero.clone().into_iter().collect::<Vec<_>>();
                g.push(cmp0(c[1].clone(), srel));
                let guard = Formula::and(g);
                let mut f = vec![guard.clone()];
                f.extend(body(&root, neg, eps));
                out.push((
                    TestPoint { kind: TestPointKind::RootLinear, epsilon: eps, guard },
                    Formula::and(f),
                ));
            }
        };
        if c.len() == 2 {
            linear_points(&mut out, None);
        } else {
            let disc = discriminant(&c[2], &c[1], &c[0]);
            for (srel, neg) in signs {
                for plus in [true, false] {
                    let root = Root::Quadratic { a2: c[2].clone(), a1: c[1].clone(), disc: disc.clone(), plus };
                    let guard = Formula::and([cmp0(c[2].clone(), srel), cmp0(disc.clone(), Relation::Ge)]);
                    let mut f = vec![guard.clone()];
                    f.extend(body(&root, neg, eps));
                    let kind = if plus { TestPointKind::RootQuadraticPlus } else { TestPointKind::RootQuadraticMinus };
                    out.push((TestPoint { kind, epsilon: eps, guard }, Formula::and(f)));
                }
            }
            linear_points(&mut out, Some(cmp0(c[2].clone(), Relation::Eq)));
        }
    }
    out
}

/// Quantifier-free equivalent of `∃x. g` over the generic coefficients.
pub fn vs_eliminate(g: &GenericConjunction) -> Result<Formula> {
    vs_exists(&generic_x(), &g.atoms())
}

/// Drops clauses whose atom set contains another clause's.
pub fn remove_subsumed(d: Dnf) -> Dnf {
    let mut clauses = d.into_clauses();
    clauses.sort_by_key(Clause::len);
    let mut kept: Vec<Clause> = Vec::new();
    for c in clauses {
        let subsumed = kept
            .iter()
            .any(|k| k.atoms().iter().all(|a| c.atoms().binary_search(a).is_ok()));
        if !subsumed {
            kept.push(c);
        }
    }
    Dnf::from_clauses(kept)
}

/// DNF-converts and prunes a generated formula.
pub fn finish(f: &Formula, cap: usize) -> Result<Dnf> {
    let d = to_dnf_capped(f, cap)?;
    Ok(remove_subsumed(prune_dnf(&d, &SignContext::new()).dnf))
}

/// Generates the block for `sig` by virtual substitution.
pub fn generate_vs(sig: &BlockSignature) -> Result<BlockResult> {
    let g = GenericConjunction::from_signature(sig);
    let qf = finish(&vs_eliminate(&g)?, DEFAULT_CLAUSE_CAP)?;
    Ok(BlockResult {
        signature: sig.clone(),
        generic_vars: g.generic_vars(),
        qf: qf.to_formula(),
        provenance: Provenance::VirtualSubstitution,
        verified: false,
    })
}

fn a(i: usize, j: usize) -> Polynomial {
    Polynomial::var(generic_coeff(i, j))
}

/// The reference nine-clause equivalent of
/// `∃x (a11 x + a10 > 0 ∧ a21 x + a20 > 0)`.
pub fn linear_base_two() -> BlockResult {
    use Relation::*;
    let lt0 = |p: Polynomial| cmp0(p, Lt);
    let gt0 = |p: Polynomial| cmp0(p, Gt);
    let eq0 = |p: Polynomial| cmp0(p, Eq);
    let cross = &(&a(1, 0) * &a(2, 1)) - &(&a(2, 0) * &a(1, 1));
    let qf = Formula::Or(vec![
        Formula::And(vec![lt0(a(2, 1)), lt0(a(1, 1))]),
        Formula::And(vec![lt0(a(2, 1)), gt0(a(1, 1)), lt0(cross.clone())]),
        Formula::And(vec![lt0(a(2, 1)), eq0(a(1, 1)), gt0(a(1, 0))]),
        Formula::And(vec![eq0(a(2, 1)), lt0(a(1, 1)), gt0(a(2, 0))]),
        Formula::And(vec![eq0(a(2, 1)), eq0(a(1, 1)), gt0(a(2, 0)), gt0(a(1, 0))]),
        Formula::And(vec![gt0(a(2, 1)), gt0(a(1, 1))]),
        Formula::And(vec![eq0(a(2, 1)), gt0(a(1, 1)), gt0(a(2, 0))]),
        Formula::And(vec![gt0(a(2, 1)), eq0(a(1, 1)), gt0(a(1, 0))]),
        Formula::And(vec![gt0(a(2, 1)), lt0(a(1, 1)), gt0(cross)]),
    ]);
    let sig = BlockSignature::new(vec![(1, Gt), (1, Gt)]).expect("valid signature");
    BlockResult {
        generic_vars: GenericConjunction::from_signature(&sig).generic_vars(),
        signature: sig,
        qf,
        provenance: Provenance::Transcribed,
        verified: false,
    }
}

/// The two-inequality base for relations `r1`, `r2` in {>, ≥}, same
/// clause structure as [`linear_base_two`]: the single-constraint clauses
/// keep their own relation, the cross term is strict unless both are weak.
pub fn linear_base_pair(r1: Relation, r2: Relation) -> Result<Formula> {
    use Relation::*;
    for r in [r1, r2] {
        if !matches!(r, Gt | Ge) {
            return Err(Error::Precondition(format!(
                "linear recursion takes > and >= only, got {r}"
            )));
        }
    }
    let lt0 = |p: Polynomial| cmp0(p, Lt);
    let gt0 = |p: Polynomial| cmp0(p, Gt);
    let eq0 = |p: Polynomial| cmp0(p, Eq);
    let c1 = || cmp0(a(1, 0), r1);
    let c2 = || cmp0(a(2, 0), r2);
    let (cross_lt, cross_gt) = if r1 == Ge && r2 == Ge { (Le, Ge) } else { (Lt, Gt) };
    let cross = &(&a(1, 0) * &a(2, 1)) - &(&a(2, 0) * &a(1, 1));
    Ok(Formula::Or(vec![
        Formula::And(vec![lt0(a(2, 1)), lt0(a(1, 1))]),
        Formula::And(vec![lt0(a(2, 1)), gt0(a(1, 1)), cmp0(cross.clone(), cross_lt)]),
        Formula::And(vec![lt0(a(2, 1)), eq0(a(1, 1)), c1()]),
        Formula::And(vec![eq0(a(2, 1)), lt0(a(1, 1)), c2()]),
        Formula::And(vec![eq0(a(2, 1)), eq0(a(1, 1)), c2(), c1()]),
        Formula::And(vec![gt0(a(2, 1)), gt0(a(1, 1))]),
        Formula::And(vec![eq0(a(2, 1)), gt0(a(1, 1)), c2()]),
        Formula::And(vec![gt0(a(2, 1)), eq0(a(1, 1)), c1()]),
        Formula::And(vec![gt0(a(2, 1)), lt0(a(1, 1)), cmp0(cross, cross_gt)]),
    ]))
}

/// The constraint pair contributed by the new constraint `new` and an
/// earlier constraint `i`, as (slot 1, slot 2) of the base formula. The
/// base formula is relabeled by replacing slot 2 for `i = 1` and slot 1
/// otherwise.
pub fn relabel_pair(i: usize, new: usize) -> (usize, usize) {
    if i == 2 {
        (new, 2)
    } else {
        (i, new)
    }
}

/// The base formula for constraints `i` (slot 1) and `k` (slot 2).
fn pair_formula(i: usize, k: usize, rels: &[Relation]) -> Result<Formula> {
    let base = linear_base_pair(rels[i - 1], rels[k - 1])?;
    let mut map = BTreeMap::new();
    for j in 0..2 {
        map.insert(generic_coeff(1, j), a(i, j));
        map.insert(generic_coeff(2, j), a(k, j));
    }
    Ok(base.substitute(&map))
}

/// The pair formulas added when constraint `new` joins constraints
/// `1..new`.
fn step_pairs(new: usize, rels: &[Relation]) -> Result<Vec<Formula>> {
    (1..new)
        .map(|i| {
            let (s1, s2) = relabel_pair(i, new);
            pair_formula(s1, s2, rels)
        })
        .collect()
}

fn check_linear_args(m: usize, rels: &[Relation]) -> Result<()> {
    if m < 2 || rels.len() != m {
        return Err(Error::Precondition(format!(
            "extend_linear needs m >= 2 and {m} relations, got {}",
            rels.len()
        )));
    }
    Ok(())
}

/// Quantifier-free equivalent of `∃x` over `m` linear inequalities
/// `a_{i1} x + a_{i0} rel_i 0`, composed recursively from the base
/// formula: QE(m) = QE(m−1) ∧ the relabeled pairs of constraint m with
/// every earlier constraint.
pub fn extend_linear(m: usize, rels: &[Relation]) -> Result<Formula> {
    check_linear_args(m, rels)?;
    let mut f = pair_formula(1, 2, rels)?;
    for new in 3..=m {
        let mut parts = vec![f];
        parts.extend(step_pairs(new, rels)?);
        f = Formula::And(parts);
    }
    Ok(f)
}

/// DNF of [`extend_linear`] built incrementally, pruning after every
/// product. Returns the DNF and the pruned clause count after each `m`.
pub fn extend_linear_dnf(m: usize, rels: &[Relation], cap: usize) -> Result<(Dnf, Vec<usize>)> {
    check_linear_args(m, rels)?;
    let ctx = SignContext::new();
    let prune = |d: &Dnf| prune_dnf(d, &ctx).dnf;
    let mut d = prune(&to_dnf_capped(&pair_formula(1, 2, rels)?, cap)?);
    let mut counts = vec![d.len()];
    for new in 3..=m {
        for pf in step_pairs(new, rels)? {
            let pd = to_dnf_capped(&pf, cap)?;
            d = prune(&d.product(&pd, cap)?);
        }
        counts.push(d.len());
    }
    Ok((d, counts))
}

/// Generates the block for `m` linear inequalities by the recursion.
pub fn generate_linear(rels: &[Relation]) -> Result<BlockResult> {
    let m = rels.len();
    let (d, _) = extend_linear_dnf(m, rels, DEFAULT_CLAUSE_CAP)?;
    let sig = BlockSignature::new(rels.iter().map(|&r| (1, r)).collect())?;
    Ok(BlockResult {
        generic_vars: GenericConjunction::new(&rels.iter().map(|&r| (1, r)).collect::<Vec<_>>()).generic_vars(),
        signature: sig,
        qf: remove_subsumed(d).to_formula(),
        provenance: Provenance::LinearRecursion,
        verified: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::eval_formula;
    use crate::oracle::decide_univariate;

    /// Exhaustive check over small coefficient values against the exact
    /// univariate decision.
    fn agrees_on_grid(g: &GenericConjunction, f: &Formula, values: &[i64]) {
        let vars = g.generic_vars();
        let atoms = g.atoms();
        let x = generic_x();
        let total = values.len().pow(vars.len() as u32);
        for mut idx in 0..total {
            let mut pt = BTreeMap::new();
            for v in &vars {
                pt.insert(v.clone(), int(values[idx % values.len()]));
                idx /= values.len();
            }
            let inst: Vec<Atom> = atoms
                .iter()
                .map(|a| Atom::new(a.lhs.eval_partial(&pt), a.rel))
                .collect();
            let truth = match Clause::new(inst) {
                Some(c) => decide_univariate(&c, &x).unwrap(),
                None => false,
            };
            assert_eq!(eval_formula(f, &pt).unwrap(), truth, "at {pt:?}");
        }
    }

    #[test]
    fn coefficient_names() {
        assert_eq!(generic_coeff(3, 2).name(), "a32");
        assert_eq!(generic_coeff(12, 0).name(), "a12_0");
    }

    #[test]
    fn single_linear_constraints() {
        let g = GenericConjunction::new(&[(1, Relation::Gt)]);
        let f = finish(&vs_eliminate(&g).unwrap(), 1000).unwrap().to_formula();
        agrees_on_grid(&g, &f, &[-2, -1, 0, 1, 2]);
        let g = GenericConjunction::new(&[(1, Relation::Eq)]);
        let f = vs_eliminate(&g).unwrap();
        agrees_on_grid(&g, &f, &[-2, -1, 0, 1, 2]);
    }

    #[test]
    fn quadratic_constraints() {
        for rel in [Relation::Gt, Relation::Ge, Relation::Eq, Relation::Lt, Relation::Neq] {
            let g = GenericConjunction::new(&[(2, rel)]);
            let f = vs_eliminate(&g).unwrap();
            agrees_on_grid(&g, &f, &[-2, -1, 0, 1, 2]);
        }
    }

    #[test]
    fn pairs_of_constraints() {
        let rels = [Relation::Gt, Relation::Ge, Relation::Eq];
        for r1 in rels {
            for r2 in rels {
                let g = GenericConjunction::new(&[(1, r1), (2, r2)]);
                let f = vs_eliminate(&g).unwrap();
                agrees_on_grid(&g, &f, &[-1, 0, 1]);
            }
        }
    }

    #[test]
    fn base_pair_matches_transcription() {
        let t = linear_base_two();
        assert_eq!(linear_base_pair(Relation::Gt, Relation::Gt).unwrap(), t.qf);
        let g = GenericConjunction::new(&[(1, Relation::Gt), (1, Relation::Gt)]);
        agrees_on_grid(&g, &t.qf, &[-2, -1, 0, 1, 2]);
        for (r1, r2) in [(Relation::Ge, Relation::Gt), (Relation::Gt, Relation::Ge), (Relation::Ge, Relation::Ge)] {
            let g = GenericConjunction::new(&[(1, r1), (1, r2)]);
            agrees_on_grid(&g, &linear_base_pair(r1, r2).unwrap(), &[-2, -1, 0, 1, 2]);
        }
    }

    #[test]
    fn relabeling_follows_the_composition() {
        assert_eq!(relabel_pair(1, 3), (1, 3));
        assert_eq!(relabel_pair(2, 3), (3, 2));
        let g = GenericConjunction::new(&[(1, Relation::Gt); 3]);
        agrees_on_grid(&g, &extend_linear(3, &[Relation::Gt; 3]).unwrap(), &[-1, 0, 1]);
    }

    #[test]
    fn linear_recursion_counts() {
        let f = extend_linear(3, &[Relation::Gt; 3]).unwrap();
        assert_eq!(to_dnf_capped(&f, 1_000_000).unwrap().len(), 505);
        let (_, counts) = extend_linear_dnf(4, &[Relation::Gt; 4], 1_000_000).unwrap();
        assert_eq!(counts, vec![9, 27, 81]);
    }

    #[test]
    fn output_is_free_of_x() {
        let g = GenericConjunction::new(&[(1, Relation::Eq), (1, Relation::Gt), (2, Relation::Gt)]);
        let f = vs_eliminate(&g).unwrap();
        assert!(!f.vars().contains(&generic_x()));
    }
}
