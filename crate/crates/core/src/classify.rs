//! Four-quadrant classification of a theorem `A => H`.
//!
//! | ∃(A∧H) | ∃(A∧¬H) | quadrant      |
//! |--------|---------|---------------|
//! | true   | false   | True          |
//! | true   | true    | Mixed         |
//! | false  | true    | False         |
//! | false  | false   | Contradictory |

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::engine::{negate, run, EngineOptions, EngineResult, Verdict};
use crate::error::{Error, Result};
use crate::exec;
use crate::formula::{Atom, Formula, Relation};
use crate::oracle::{witness_search, Point, Search};
use crate::poly::{Polynomial, Var};
use crate::sexp::TheoremForm;

/// Default number of witness-search trials per satisfiable sentence.
pub const DEFAULT_WITNESS_BUDGET: usize = 20_000;

/// Assumptions and hypothesis over `quantified ∪ free`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem {
    pub assumptions: Formula,
    pub hypothesis: Formula,
    pub quantified: Vec<Var>,
    pub free: Vec<Var>,
}

impl Theorem {
    /// Every variable of `assumptions` and `hypothesis` not listed in
    /// `free` is quantified. Both formulas must be quantifier-free.
    pub fn new(assumptions: Formula, hypothesis: Formula, free: Vec<Var>) -> Result<Theorem> {
        if !assumptions.is_quantifier_free() || !hypothesis.is_quantifier_free() {
            return Err(Error::Precondition("assumptions and hypothesis must be quantifier-free".into()));
        }
        let mut all: BTreeSet<Var> = assumptions.vars();
        all.extend(hypothesis.vars());
        let free_set: BTreeSet<Var> = free.iter().cloned().collect();
        if free_set.len() != free.len() {
            return Err(Error::Precondition("free variable listed twice".into()));
        }
        let quantified = all.into_iter().filter(|v| !free_set.contains(v)).collect();
        Ok(Theorem { assumptions, hypothesis, quantified, free })
    }

    pub fn from_form(t: &TheoremForm) -> Result<Theorem> {
        Theorem::new(t.assumptions.clone(), t.hypothesis.clone(), t.free.clone())
    }

    /// The same theorem with every variable quantified.
    pub fn closed(&self) -> Theorem {
        let mut quantified = self.quantified.clone();
        quantified.extend(self.free.iter().cloned());
        quantified.sort();
        Theorem { quantified, free: Vec::new(), ..self.clone() }
    }

    /// The theorem `A => ¬H`.
    pub fn negated(&self) -> Theorem {
        Theorem {
            hypothesis: Formula::not(self.hypothesis.clone()),
            ..self.clone()
        }
    }

    /// `A ∧ H`.
    pub fn consistent_sentence_matrix(&self) -> Formula {
        Formula::and([self.assumptions.clone(), self.hypothesis.clone()])
    }

    /// `A ∧ ¬H`.
    pub fn counterexample_matrix(&self) -> Formula {
        Formula::and([self.assumptions.clone(), Formula::not(self.hypothesis.clone())])
    }

    /// `∃quantified (A ∧ H)`.
    pub fn consistent_sentence(&self) -> Formula {
        Formula::exists(self.quantified.clone(), self.consistent_sentence_matrix())
    }

    /// `∃quantified (A ∧ ¬H)`, the search for a counterexample.
    pub fn counterexample_sentence(&self) -> Formula {
        Formula::exists(self.quantified.clone(), self.counterexample_matrix())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Quadrant {
    True,
    Mixed,
    False,
    Contradictory,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::True, Quadrant::Mixed, Quadrant::False, Quadrant::Contradictory];

    /// The quadrant for the satisfiability of `A∧H` and `A∧¬H`.
    pub fn from_sat(sat_ah: bool, sat_anot_h: bool) -> Quadrant {
        match (sat_ah, sat_anot_h) {
            (true, false) => Quadrant::True,
            (true, true) => Quadrant::Mixed,
            (false, true) => Quadrant::False,
            (false, false) => Quadrant::Contradictory,
        }
    }

    /// The quadrant of `A => ¬H`.
    pub fn dual(self) -> Quadrant {
        match self {
            Quadrant::True => Quadrant::False,
            Quadrant::False => Quadrant::True,
            q => q,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Quadrant::True => "True",
            Quadrant::Mixed => "Mixed",
            Quadrant::False => "False",
            Quadrant::Contradictory => "Contradictory",
        }
    }

    /// Accepts the quadrant names case-insensitively, and
    /// "contradictory-assumptions" for `Contradictory`.
    pub fn parse(s: &str) -> Option<Quadrant> {
        let l = s.to_ascii_lowercase();
        match l.as_str() {
            "true" => Some(Quadrant::True),
            "mixed" => Some(Quadrant::Mixed),
            "false" => Some(Quadrant::False),
            "contradictory" | "contradictory-assumptions" => Some(Quadrant::Contradictory),
            _ => None,
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Satisfying points found for the two conjunctions, when satisfiable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Witnesses {
    pub ah: Option<Point>,
    pub anot_h: Option<Point>,
}

#[derive(Debug, Clone)]
pub struct QuadrantResult {
    pub quadrant: Quadrant,
    pub sat_ah: Verdict,
    pub sat_anot_h: Verdict,
    pub witnesses: Witnesses,
    /// Engine runs for `∃(A∧H)` and `∃(A∧¬H)`.
    pub runs: [EngineResult; 2],
}

/// Outcome of checking only `∃(A∧¬H)`.
#[derive(Debug, Clone)]
pub struct TheoremCheck {
    /// Whether `∀(A => H)` holds.
    pub holds: bool,
    pub counterexample: Option<Point>,
    pub run: EngineResult,
}

#[derive(Clone)]
pub struct ClassifyOptions {
    pub engine: EngineOptions,
    /// Witness-search trials per satisfiable sentence; 0 disables search.
    pub witness_budget: usize,
    pub seed: u64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            engine: EngineOptions::default(),
            witness_budget: DEFAULT_WITNESS_BUDGET,
            seed: 0,
        }
    }
}

const AH: &str = "∃(A∧H)";
const ANOTH: &str = "∃(A∧¬H)";

fn closed_verdict(r: &EngineResult, context: &str) -> Result<bool> {
    match &r.verdict {
        Verdict::True => Ok(true),
        Verdict::False => Ok(false),
        Verdict::Formula(f) => {
            Err(Error::Precondition(format!("closed sentence left the residue {f}")).context(context))
        }
    }
}

fn require_closed(t: &Theorem) -> Result<()> {
    if t.free.is_empty() {
        Ok(())
    } else {
        let names: Vec<String> = t.free.iter().map(|v| v.to_string()).collect();
        Err(Error::Precondition(format!(
            "theorem has free variables ({}); use eliminate_free",
            names.join(" ")
        )))
    }
}

fn search(sentence: &Formula, opts: &ClassifyOptions) -> Result<Option<Point>> {
    if opts.witness_budget == 0 {
        return Ok(None);
    }
    Ok(match witness_search(sentence, opts.witness_budget, opts.seed)? {
        Search::Found(p) => Some(p),
        Search::Unknown => None,
    })
}

/// Decides `∃(A∧H)` and `∃(A∧¬H)` (concurrently when parallel execution
/// is enabled) and reports the quadrant, with witnesses for the
/// satisfiable sentences when the search finds them.
pub fn classify(t: &Theorem, opts: &ClassifyOptions) -> Result<QuadrantResult> {
    require_closed(t)?;
    let sentences = [(AH, t.consistent_sentence()), (ANOTH, t.counterexample_sentence())];
    let mut runs = exec::map(&sentences, |(name, f)| run(f, &opts.engine).map_err(|e| e.context(*name)))
        .into_iter();
    let ah = runs.next().expect("two runs")?;
    let anot_h = runs.next().expect("two runs")?;
    let sat_ah = closed_verdict(&ah, AH)?;
    let sat_anot_h = closed_verdict(&anot_h, ANOTH)?;
    let witnesses = Witnesses {
        ah: if sat_ah { search(&sentences[0].1, opts).map_err(|e| e.context(AH))? } else { None },
        anot_h: if sat_anot_h { search(&sentences[1].1, opts).map_err(|e| e.context(ANOTH))? } else { None },
    };
    Ok(QuadrantResult {
        quadrant: Quadrant::from_sat(sat_ah, sat_anot_h),
        sat_ah: ah.verdict.clone(),
        sat_anot_h: anot_h.verdict.clone(),
        witnesses,
        runs: [ah, anot_h],
    })
}

/// Decides only `∃(A∧¬H)`.
pub fn check_theorem(t: &Theorem, opts: &ClassifyOptions) -> Result<TheoremCheck> {
    require_closed(t)?;
    let sentence = t.counterexample_sentence();
    let r = run(&sentence, &opts.engine).map_err(|e| e.context(ANOTH))?;
    let sat = closed_verdict(&r, ANOTH)?;
    let counterexample = if sat { search(&sentence, opts).map_err(|e| e.context(ANOTH))? } else { None };
    Ok(TheoremCheck { holds: !sat, counterexample, run: r })
}

/// The condition on the free variables under which `∀quantified (A => H)`
/// holds, as the negation of the eliminated `∃quantified (A∧¬H)`.
pub fn eliminate_free(t: &Theorem, opts: &EngineOptions) -> Result<(Formula, EngineResult)> {
    let r = run(&t.counterexample_sentence(), opts).map_err(|e| e.context(ANOTH))?;
    let f = match negate(r.verdict.clone()).map_err(|e| e.context(ANOTH))? {
        Verdict::True => Formula::True,
        Verdict::False => Formula::False,
        Verdict::Formula(g) => g,
    };
    Ok((f, r))
}

/// Revealed-preference theorem over four dot products, named in the order
/// `p·q`, `p·q̂`, `p̂·q`, `p̂·q̂`:
/// `p·q ≤ p·q̂ ∧ p̂·q̂ ≤ p̂·q  ⇒  p̂·q̂ − p̂·q − p·q̂ + p·q ≤ 0`.
pub fn hicks_encode(pq: &Var, pqh: &Var, phq: &Var, phqh: &Var) -> Theorem {
    let v = Polynomial::var;
    let le = |a: Polynomial, b: Polynomial| Formula::Atom(Atom::compare(&a, Relation::Le, &b));
    let assumptions = Formula::and([le(v(pq), v(pqh)), le(v(phqh), v(phq))]);
    let lhs = &(&(&v(phqh) - &v(phq)) - &v(pqh)) + &v(pq);
    let hypothesis = Formula::atom(lhs, Relation::Le);
    Theorem::new(assumptions, hypothesis, Vec::new()).expect("quantifier-free by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::eval_formula;
    use crate::oracle::sample_point;
    use crate::poly::int;
    use crate::sexp::parse_formula;

    fn theorem(a: &str, h: &str, free: &[&str]) -> Theorem {
        Theorem::new(
            parse_formula(a).unwrap(),
            parse_formula(h).unwrap(),
            free.iter().map(|s| Var::new(s)).collect(),
        )
        .unwrap()
    }

    fn quadrant(a: &str, h: &str) -> Quadrant {
        classify(&theorem(a, h, &[]), &ClassifyOptions::default()).unwrap().quadrant
    }

    #[test]
    fn four_quadrants() {
        assert_eq!(quadrant("(> x 1)", "(> x 0)"), Quadrant::True);
        assert_eq!(quadrant("(> x 0)", "(> x 1)"), Quadrant::Mixed);
        assert_eq!(quadrant("(> x 1)", "(< x 0)"), Quadrant::False);
        assert_eq!(quadrant("(and (> v 0) (< v 0))", "(= v 0)"), Quadrant::Contradictory);
    }

    #[test]
    fn witnesses_satisfy_their_conjunction() {
        let t = theorem("(> (* x y) 1)", "(> x 0)", &[]);
        let r = classify(&t, &ClassifyOptions::default()).unwrap();
        assert_eq!(r.quadrant, Quadrant::Mixed);
        let ah = r.witnesses.ah.expect("witness for A∧H");
        let an = r.witnesses.anot_h.expect("witness for A∧¬H");
        assert!(eval_formula(&t.consistent_sentence_matrix(), &ah).unwrap());
        assert!(eval_formula(&t.counterexample_matrix(), &an).unwrap());
    }

    #[test]
    fn duality() {
        for (a, h) in [("(> x 1)", "(> x 0)"), ("(> x 0)", "(> x 1)"), ("(and (> v 0) (< v 0))", "(= v 0)")] {
            let t = theorem(a, h, &[]);
            let q = classify(&t, &ClassifyOptions::default()).unwrap().quadrant;
            let d = classify(&t.negated(), &ClassifyOptions::default()).unwrap().quadrant;
            assert_eq!(d, q.dual());
        }
    }

    #[test]
    fn free_variable_elimination() {
        let t = theorem("true", "(> v1 0)", &["v1"]);
        let (f, _) = eliminate_free(&t, &EngineOptions::default()).unwrap();
        assert_eq!(f, parse_formula("(> v1 0)").unwrap());
        let t = theorem("(> (* x y) 1)", "(> (* x y) 1)", &["x", "y"]);
        assert_eq!(eliminate_free(&t, &EngineOptions::default()).unwrap().0, Formula::True);
        // ∀x (x > a => x > 0) holds exactly when a ≥ 0
        let t = theorem("(> x a)", "(> x 0)", &["a"]);
        let (f, _) = eliminate_free(&t, &EngineOptions::default()).unwrap();
        let a = Var::new("a");
        for i in 0..200 {
            let pt = sample_point(std::slice::from_ref(&a), 200, 7, i);
            let expected = pt[&a] >= int(0);
            assert_eq!(eval_formula(&f, &pt).unwrap(), expected, "at {pt:?}");
        }
    }

    #[test]
    fn free_variables_rejected_by_classify() {
        let t = theorem("(> x a)", "(> x 0)", &["a"]);
        assert!(matches!(classify(&t, &ClassifyOptions::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn hicks() {
        let [pq, pqh, phq, phqh] = ["pq", "pqh", "phq", "phqh"].map(Var::new);
        let t = hicks_encode(&pq, &pqh, &phq, &phqh);
        assert_eq!(t.quantified.len(), 4);
        let zero: Point = [&pq, &pqh, &phq, &phqh].iter().map(|v| ((*v).clone(), int(0))).collect();
        assert!(eval_formula(&Formula::and([t.assumptions.clone(), t.hypothesis.clone()]), &zero).unwrap());
        let pt: Point = [(pq.clone(), 0), (pqh.clone(), 0), (phqh.clone(), 1), (phq.clone(), 1)]
            .into_iter()
            .map(|(v, k)| (v, int(k)))
            .collect();
        assert!(!eval_formula(&t.counterexample_matrix(), &pt).unwrap());
        let r = classify(&t, &ClassifyOptions::default()).unwrap();
        assert_eq!(r.quadrant, Quadrant::True);
    }

    #[test]
    fn errors_name_the_sentence() {
        let t = theorem("(> (+ (^ x 3) (^ y 3) (* x y)) 1)", "(> x 0)", &[]);
        let e = classify(&t, &ClassifyOptions::default()).unwrap_err();
        assert!(e.to_string().contains("∃(A∧"), "{e}");
    }
}
