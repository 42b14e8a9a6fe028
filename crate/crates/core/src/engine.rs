//! Incremental quantifier elimination by variable using blocks.
//!
//! Each existentially quantified clause is reduced one variable at a time:
//! the atoms containing the variable are matched to a block, the block is
//! instantiated and conjoined with the remaining atoms, and every
//! surviving clause becomes a new sub-problem.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::blocks::{signature_of_atoms, BlockSignature, BlockStore};
use crate::error::{Error, Result};
use crate::exec;
use crate::formula::{
    distribute_exists_capped, split_existential, to_dnf_capped, Atom, Clause, Dnf, Formula, QuantifiedClause,
    Relation, DEFAULT_CLAUSE_CAP,
};
use crate::generator::{finish, vs_exists};
use crate::oracle::univariate_witness;
use crate::poly::Var;
use crate::simplify::{prune_dnf, simplify_atoms, SignContext, Simplified};

/// Largest signature handled through a generic block; bigger conjunctions
/// are eliminated by virtual substitution on the concrete atoms.
pub const MAX_BLOCK_CONSTRAINTS: usize = 4;

/// Most quadratic constraints in a generated (non-library) block.
pub const MAX_BLOCK_QUADRATICS: usize = 1;

/// Largest all-linear inequality signature built by the linear recursion.
pub const MAX_LINEAR_BLOCK: usize = 6;

#[derive(Clone)]
pub struct EngineOptions {
    /// Followed strictly when set.
    pub order: Option<Vec<Var>>,
    /// Orders for individual top-level clauses (by position in the
    /// distributed DNF), taking precedence over `order`.
    pub clause_orders: BTreeMap<usize, Vec<Var>>,
    /// Tie-breaker for the default heuristic.
    pub order_hint: Vec<Var>,
    pub depth_first: bool,
    pub max_clauses: usize,
    pub timeout: Option<Duration>,
    pub store: Arc<BlockStore>,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            order: None,
            clause_orders: BTreeMap::new(),
            order_hint: Vec::new(),
            depth_first: false,
            max_clauses: DEFAULT_CLAUSE_CAP,
            timeout: None,
            store: Arc::new(BlockStore::new(None, 2_000)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    True,
    False,
    Formula(Formula),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::True => f.write_str("TRUE"),
            Verdict::False => f.write_str("FALSE"),
            Verdict::Formula(g) => write!(f, "{g}"),
        }
    }
}

/// How a variable was eliminated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Method {
    Block(BlockSignature),
    DirectVs,
    /// The atoms containing the variable mention no other variable and
    /// were decided by real root isolation.
    Univariate,
    /// The variable occurred in no atom.
    Vacuous,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Block(sig) => match sig.name() {
                Some(n) => write!(f, "{n} {sig}"),
                None => write!(f, "{sig}"),
            },
            Method::DirectVs => f.write_str("direct-VS"),
            Method::Univariate => f.write_str("univariate"),
            Method::Vacuous => f.write_str("vacuous"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub clause: usize,
    pub parent: Option<usize>,
    pub var: Var,
    pub method: Method,
    /// Clauses of the instantiated block.
    pub emitted: usize,
    /// Clauses left after conjoining the other atoms and simplifying.
    pub surviving: usize,
    /// Ids given to the surviving clauses.
    pub children: Vec<usize>,
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "clause {}", self.clause)?;
        if let Some(p) = self.parent {
            write!(f, " (from {p})")?;
        }
        write!(
            f,
            ": eliminate {} via {}: {} emitted, {} surviving",
            self.var, self.method, self.emitted, self.surviving
        )?;
        if !self.children.is_empty() {
            let ids: Vec<String> = self.children.iter().map(|c| c.to_string()).collect();
            write!(f, " -> [{}]", ids.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EngineResult {
    pub verdict: Verdict,
    pub trace: Vec<TraceEntry>,
    /// Top-level clauses after distributing the quantifiers.
    pub top_clauses: usize,
}

/// Chooses the next variable to eliminate from `qc`.
///
/// With an explicit order the first listed quantified variable of degree at
/// most two in the clause is taken; unlisted variables fall back to the
/// heuristic. The heuristic ranks variables by: degree above two last, then
/// fewer quadratic atoms, then whether the signature is a library block,
/// then the number of atoms containing them, their degree, the number of
/// other variables they share atoms with, their position in `hint`, and
/// name.
pub fn choose_variable(qc: &QuantifiedClause, hint: &[Var], order: Option<&[Var]>) -> Var {
    let atoms = qc.clause.atoms();
    if let Some(order) = order {
        let eliminable = |v: &Var| atoms.iter().all(|a| a.lhs.degree_in(v) <= 2);
        if let Some(v) = order.iter().find(|v| qc.vars.contains(v) && eliminable(v)) {
            return v.clone();
        }
    }
    let key = |v: &Var| {
        let containing: Vec<&Atom> = atoms.iter().filter(|a| a.contains(v)).collect();
        let degree = containing.iter().map(|a| a.lhs.degree_in(v)).max().unwrap_or(0);
        let neighbours: BTreeSet<Var> = containing.iter().flat_map(|a| a.lhs.vars()).collect();
        let pos = hint.iter().position(|h| h == v).unwrap_or(usize::MAX);
        let c1: Vec<Atom> = containing.iter().map(|a| (*a).clone()).collect();
        let library = degree <= 2 && signature_of_atoms(&c1, v).is_ok_and(|(sig, _)| sig.name().is_some());
        let quadratic = containing.iter().filter(|a| a.lhs.degree_in(v) == 2).count();
        (degree > 2, quadratic, !library, containing.len(), degree, neighbours.len(), pos, v.name().to_string())
    };
    qc.vars.iter().min_by_key(|v| key(v)).cloned().expect("a quantified variable")
}

/// Outcome of one elimination step.
#[derive(Debug, Clone)]
pub enum Step {
    /// Some emitted clause simplified to TRUE.
    True { method: Method, emitted: usize },
    Clauses { method: Method, emitted: usize, clauses: Vec<QuantifiedClause> },
}

fn elimination_dnf(c1: &[Atom], c2: &[Atom], v: &Var, store: &BlockStore, cap: usize) -> Result<(Method, Dnf)> {
    let (sig, map) = signature_of_atoms(c1, v)?;
    let linear_ineq = sig.constraints().iter().all(|&(d, r)| d == 1 && matches!(r, Relation::Gt | Relation::Ge));
    let quadratics = sig.constraints().iter().filter(|&&(d, _)| d == 2).count();
    let use_block = sig.name().is_some()
        || (sig.len() <= MAX_BLOCK_CONSTRAINTS && quadratics <= MAX_BLOCK_QUADRATICS)
        || (linear_ineq && sig.len() <= MAX_LINEAR_BLOCK);
    let ctx = SignContext::from_atoms(c2);
    if use_block {
        let block = store.get(&sig)?;
        Ok((Method::Block(sig), block.instantiate_dnf(&map, &ctx)?))
    } else {
        let f = vs_exists(v, c1)?;
        let d = to_dnf_capped(&f, cap)?;
        Ok((Method::DirectVs, prune_dnf(&d, &ctx).dnf))
    }
}

/// Eliminates `v` from `qc`.
pub fn eliminate_variable(qc: &QuantifiedClause, v: &Var, store: &BlockStore, cap: usize) -> Result<Step> {
    let rest_vars: Vec<Var> = qc.vars.iter().filter(|w| *w != v).cloned().collect();
    let (c1, c2): (Vec<Atom>, Vec<Atom>) = qc.clause.atoms().iter().cloned().partition(|a| a.contains(v));
    if c1.is_empty() {
        return Ok(Step::Clauses {
            method: Method::Vacuous,
            emitted: 1,
            clauses: vec![QuantifiedClause::new(&rest_vars, qc.clause.clone())],
        });
    }
    let univariate = c1.iter().all(|a| a.lhs.vars().len() == 1);
    if univariate && c1.iter().any(|a| a.lhs.degree_in(v) > 2) {
        let method = Method::Univariate;
        if univariate_witness(&c1, v)?.is_none() {
            return Ok(Step::Clauses { method, emitted: 0, clauses: Vec::new() });
        }
        if c2.is_empty() {
            return Ok(Step::True { method, emitted: 1 });
        }
        let rest = Clause::new(c2).expect("simplified atoms are not constant");
        return Ok(Step::Clauses { method, emitted: 1, clauses: vec![QuantifiedClause::new(&rest_vars, rest)] });
    }
    let (method, phi) = elimination_dnf(&c1, &c2, v, store, cap)?;
    let emitted = phi.len();
    let results = exec::map(phi.clauses(), |d| {
        let mut e: Vec<Atom> = d.atoms().to_vec();
        e.extend(c2.iter().cloned());
        simplify_atoms(&e, &SignContext::new())
    });
    let mut seen = BTreeSet::new();
    let mut clauses = Vec::new();
    for r in results {
        match r {
            Simplified::True => return Ok(Step::True { method, emitted }),
            Simplified::False(_) => {}
            Simplified::Clause(c) => {
                if seen.insert(c.clone()) {
                    clauses.push(QuantifiedClause::new(&rest_vars, c));
                }
            }
        }
    }
    Ok(Step::Clauses { method, emitted, clauses })
}

/// The input as `∃vars. matrix` together with whether the verdict must be
/// negated (a universal sentence is decided through its negation).
fn existential_form(f: &Formula) -> Result<(Formula, bool)> {
    match f {
        Formula::Forall(vars, body) => Ok((Formula::exists(vars.clone(), Formula::not((**body).clone())), true)),
        Formula::Not(inner) => match &**inner {
            Formula::Forall(vars, body) => {
                Ok((Formula::exists(vars.clone(), Formula::not((**body).clone())), false))
            }
            Formula::Exists(vars, body) => Ok((Formula::exists(vars.clone(), Formula::not((**body).clone())), true)),
            _ => Ok((f.clone(), false)),
        },
        _ => Ok((f.clone(), false)),
    }
}

/// The negation of a verdict, with a residual formula put back in pruned
/// DNF without subsumed clauses.
pub fn negate(v: Verdict) -> Result<Verdict> {
    Ok(match v {
        Verdict::True => Verdict::False,
        Verdict::False => Verdict::True,
        Verdict::Formula(g) => dnf_verdict(finish(&Formula::not(g), DEFAULT_CLAUSE_CAP)?),
    })
}

fn dnf_verdict(d: Dnf) -> Verdict {
    if d.is_true() {
        Verdict::True
    } else if d.is_false() {
        Verdict::False
    } else {
        Verdict::Formula(d.to_formula())
    }
}

/// Runs incremental elimination on `f`. An existential prefix (possibly
/// empty) is eliminated; free variables stay free. A leading universal
/// block is dualized.
pub fn run(f: &Formula, opts: &EngineOptions) -> Result<EngineResult> {
    let (g, negated) = existential_form(f)?;
    let mut result = run_existential(&g, opts)?;
    if negated {
        result.verdict = negate(result.verdict)?;
    }
    Ok(result)
}

fn run_existential(f: &Formula, opts: &EngineOptions) -> Result<EngineResult> {
    let start = Instant::now();
    let (vars, _) = split_existential(f)?;
    let top = distribute_exists_capped(f, opts.max_clauses)?;
    let top_clauses = top.len();
    let mut trace = Vec::new();
    let mut next_id = 0usize;
    // (id, parent, top-level position, clause)
    let mut queue: VecDeque<(usize, Option<usize>, usize, QuantifiedClause)> = VecDeque::new();
    let mut finished: Vec<Clause> = Vec::new();
    let early_true = |trace: Vec<TraceEntry>| EngineResult { verdict: Verdict::True, trace, top_clauses };

    for (root, qc) in top.into_iter().enumerate() {
        match simplify_atoms(qc.clause.atoms(), &SignContext::new()) {
            Simplified::True => return Ok(early_true(trace)),
            Simplified::False(_) => {}
            Simplified::Clause(c) => {
                queue.push_back((next_id, None, root, QuantifiedClause::new(&qc.vars, c)));
                next_id += 1;
            }
        }
    }
    let hint: Vec<Var> = if opts.order_hint.is_empty() { vars } else { opts.order_hint.clone() };

    while !queue.is_empty() {
        if let Some(limit) = opts.timeout {
            if start.elapsed() > limit {
                return Err(Error::Resource(format!("time budget of {limit:?} exceeded")));
            }
        }
        if queue.len() + finished.len() > opts.max_clauses {
            return Err(Error::Resource(format!("more than {} live clauses", opts.max_clauses)));
        }
        // a breadth-first layer is processed concurrently; depth-first
        // takes one clause at a time from the back
        let batch: Vec<(usize, Option<usize>, usize, QuantifiedClause)> = if opts.depth_first {
            vec![queue.pop_back().unwrap()]
        } else {
            queue.drain(..).collect()
        };
        let steps = exec::map(&batch, |(_, _, root, qc)| -> Result<Option<(Var, Step)>> {
            if qc.vars.is_empty() {
                return Ok(None);
            }
            let order = opts.clause_orders.get(root).or(opts.order.as_ref());
            let v = choose_variable(qc, &hint, order.map(Vec::as_slice));
            eliminate_variable(qc, &v, &opts.store, opts.max_clauses).map(|s| Some((v, s)))
        });
        let mut pushed = Vec::new();
        for ((id, parent, root, qc), step) in batch.into_iter().zip(steps) {
            let Some((var, step)) = step? else {
                finished.push(qc.clause);
                continue;
            };
            match step {
                Step::True { method, emitted } => {
                    trace.push(TraceEntry { clause: id, parent, var, method, emitted, surviving: 0, children: Vec::new() });
                    return Ok(early_true(trace));
                }
                Step::Clauses { method, emitted, clauses } => {
                    let mut children = Vec::new();
                    let surviving = clauses.len();
                    for c in clauses {
                        children.push(next_id);
                        pushed.push((next_id, Some(id), root, c));
                        next_id += 1;
                    }
                    trace.push(TraceEntry { clause: id, parent, var, method, emitted, surviving, children });
                }
            }
        }
        if opts.depth_first {
            // keep the first child on top of the stack
            queue.extend(pushed.into_iter().rev());
        } else {
            queue.extend(pushed);
        }
    }
    let dnf = Dnf::from_clauses(finished);
    let dnf = if dnf.len() > 1 {
        finish(&dnf.to_formula(), opts.max_clauses)?
    } else {
        dnf
    };
    Ok(EngineResult { verdict: dnf_verdict(dnf), trace, top_clauses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sexp::parse_formula;

    fn decide(text: &str) -> Verdict {
        run(&parse_formula(text).unwrap(), &EngineOptions::default()).unwrap().verdict
    }

    #[test]
    fn small_sentences() {
        assert_eq!(decide("(exists ((x Real)) (and (> x 0) (< x 1)))"), Verdict::True);
        assert_eq!(decide("(exists ((x Real)) (and (> x 0) (< x 0)))"), Verdict::False);
        assert_eq!(decide("(exists ((x Real)) (< (* x x) 0))"), Verdict::False);
        assert_eq!(decide("(forall ((x Real)) (>= (* x x) 0))"), Verdict::True);
        assert_eq!(
            decide("(exists ((x Real) (y Real)) (and (= (* x y) 1) (< x 0) (> y 0)))"),
            Verdict::False
        );
        assert_eq!(decide("(exists ((x Real)) (and (< (- (^ x 4) 2) 0) (> x 1)))"), Verdict::True);
        assert_eq!(decide("(exists ((x Real)) (and (< (- (^ x 4) 1) 0) (> x 1)))"), Verdict::False);
        assert_eq!(decide("(exists ((x Real) (y Real)) (and (< (- (^ x 4) 2) 0) (> x 1) (> y x)))"), Verdict::True);
    }

    #[test]
    fn free_variables_stay_free() {
        let r = decide("(exists ((x Real)) (and (> x 0) (> y 0)))");
        assert_eq!(r, Verdict::Formula(parse_formula("(> y 0)").unwrap()));
    }

    #[test]
    fn marshall() {
        let f = "(exists ((v1 Real) (v2 Real) (v3 Real) (v4 Real)) (and (< v1 0) (> v2 0) (= (- (* v3 v2) 1) v4) (= v4 (* v3 v1)) (or (<= v3 0) (>= v4 0))))";
        assert_eq!(decide(f), Verdict::False);
    }

    #[test]
    fn choose_variable_rules() {
        let f = parse_formula("(and (> (+ v w) 0) (> w 0) (> (* w w) 1) (> v 2))").unwrap();
        let c = crate::formula::to_dnf(&f).unwrap().into_clauses().remove(0);
        let v = Var::new("v");
        let w = Var::new("w");
        let qc = QuantifiedClause::new(&[v.clone(), w.clone()], c);
        assert_eq!(choose_variable(&qc, &[], None), v);
        assert_eq!(choose_variable(&qc, &[], Some(std::slice::from_ref(&w))), w);
    }
}
