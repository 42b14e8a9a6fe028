//! Seeded generators and checks shared by the property suites and the
//! acceptance report.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tarski_qe::classify::{classify, ClassifyOptions, Quadrant, Theorem};
use tarski_qe::engine::{run, EngineOptions, Verdict};
use tarski_qe::formula::{eval_formula, split_existential, to_dnf, to_nnf, Dnf};
use tarski_qe::oracle::{sample_point, witness_search, Search};
use tarski_qe::poly::int;
use tarski_qe::sexp::parse_document;
use tarski_qe::simplify::{prune_dnf, simplify_clause, SignContext, Simplified};
use tarski_qe::{Formula, Monomial, Polynomial, Relation, Var};

pub const CORPUS: [(&str, &str); 5] = [
    ("marshall", include_str!("../../../../corpus/marshall.sexp")),
    ("krugman", include_str!("../../../../corpus/krugman.sexp")),
    ("hicks", include_str!("../../../../corpus/hicks.sexp")),
    ("jehle_reny", include_str!("../../../../corpus/jehle_reny.sexp")),
    ("jehle_reny_counterexample", include_str!("../../../../corpus/jehle_reny_counterexample.sexp")),
];

pub fn corpus_text(name: &str) -> &'static str {
    CORPUS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t).expect("known corpus entry")
}

pub fn theorem(name: &str) -> Theorem {
    let doc = parse_document(corpus_text(name)).unwrap();
    Theorem::from_form(doc.theorem.as_ref().expect("theorem entry")).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn vars(names: &[&str]) -> Vec<Var> {
    names.iter().map(|n| Var::new(n)).collect()
}

/// A polynomial with up to `max_terms` terms of total degree at most
/// `max_deg` and integer coefficients in [-5, 5].
pub fn random_poly(rng: &mut ChaCha8Rng, vars: &[Var], max_deg: u32, max_terms: usize) -> Polynomial {
    let n = rng.gen_range(1..=max_terms);
    let terms = (0..n).map(|_| {
        let mut budget = rng.gen_range(0..=max_deg);
        let mut pairs = Vec::new();
        for v in vars {
            if budget == 0 {
                break;
            }
            let e = rng.gen_range(0..=budget);
            budget -= e;
            pairs.push((v.clone(), e));
        }
        (Monomial::from_pairs(pairs), int(rng.gen_range(-5..=5)))
    });
    Polynomial::from_terms(terms.collect::<Vec<_>>())
}

/// A nonconstant polynomial for use in atoms.
pub fn random_atom_poly(rng: &mut ChaCha8Rng, vars: &[Var], max_deg: u32, max_terms: usize) -> Polynomial {
    loop {
        let p = random_poly(rng, vars, max_deg, max_terms);
        if !p.is_constant() {
            return p;
        }
    }
}

pub fn random_atom(rng: &mut ChaCha8Rng, vars: &[Var], max_deg: u32) -> Formula {
    let rel = Relation::ALL[rng.gen_range(0..Relation::ALL.len())];
    Formula::atom(random_atom_poly(rng, vars, max_deg, 3), rel)
}

/// A small theorem: at most three variables, degree at most two, at most
/// four atoms (one to three assumptions and one hypothesis).
pub fn random_theorem(seed: u64) -> Theorem {
    let mut r = rng(seed);
    let all = vars(&["x", "y", "z"]);
    let k = r.gen_range(1..=3);
    let vs = &all[..k];
    let n_assumptions = r.gen_range(1..=3);
    let a = Formula::and((0..n_assumptions).map(|_| random_atom(&mut r, vs, 2)).collect::<Vec<_>>());
    let h = random_atom(&mut r, vs, 2);
    Theorem::new(a, h, Vec::new()).unwrap()
}

/// `∃ x y z` over a random conjunction or disjunction of up to four atoms.
pub fn random_existential(seed: u64) -> Formula {
    let mut r = rng(seed);
    let all = vars(&["x", "y", "z"]);
    let k = r.gen_range(1..=3);
    let vs = &all[..k];
    let n = r.gen_range(1..=4);
    let atoms: Vec<Formula> = (0..n).map(|_| random_atom(&mut r, vs, 2)).collect();
    let body = if r.gen_bool(0.7) { Formula::and(atoms) } else { Formula::or(atoms) };
    Formula::exists(vs.to_vec(), body)
}

/// Quantifier-free formulas the normal forms and simplifier are checked on.
pub fn regression_formulas() -> Vec<(String, Formula)> {
    let mut out = Vec::new();
    for name in ["marshall", "krugman", "hicks", "jehle_reny"] {
        let t = theorem(name);
        out.push((format!("{name} A∧H"), t.consistent_sentence_matrix()));
        out.push((format!("{name} A∧¬H"), t.counterexample_matrix()));
    }
    for (i, text) in [
        "(and (> (* x y) 0) (not (or (= x 1) (< (+ y z) 0))))",
        "(=> (and (>= x 0) (> y x)) (> (* y y) (* x x)))",
        "(or (and (= x 0) (>= (^ y 2) 1)) (not (<= (+ (^ x 2) (* 2 x y)) z)))",
        "(and (> x 0) (< x 0))",
        "(and (= (- (^ x 2) (* 2 x y) (- (^ y 2))) 0) (> (* x z) 0) (distinct y 1))",
    ]
    .iter()
    .enumerate()
    {
        out.push((format!("regression {i}"), tarski_qe::sexp::parse_formula(text).unwrap()));
    }
    out
}

fn simplified_dnf(d: &Dnf) -> Vec<Simplified> {
    let ctx = SignContext::new();
    d.clauses().iter().map(|c| simplify_clause(c, &ctx)).collect()
}

fn eval_simplified(s: &[Simplified], pt: &BTreeMap<Var, tarski_qe::Rational>) -> bool {
    s.iter().any(|c| match c {
        Simplified::True => true,
        Simplified::False(_) => false,
        Simplified::Clause(c) => c.eval(pt).unwrap(),
    })
}

/// Points where to_nnf, to_dnf, simplify or prune changes the truth value
/// of `f`, out of `n` samples.
pub fn truth_preservation_failures(f: &Formula, n: usize, seed: u64) -> Vec<String> {
    let vs: Vec<Var> = f.vars().into_iter().collect();
    let nnf = to_nnf(f);
    let dnf = to_dnf(f).unwrap();
    let simplified = simplified_dnf(&dnf);
    let pruned = prune_dnf(&dnf, &SignContext::new()).dnf;
    let mut failures = Vec::new();
    for i in 0..n {
        let pt = sample_point(&vs, n, seed, i);
        let truth = eval_formula(f, &pt).unwrap();
        let checks = [
            ("nnf", eval_formula(&nnf, &pt).unwrap()),
            ("dnf", dnf.eval(&pt).unwrap()),
            ("simplify", eval_simplified(&simplified, &pt)),
            ("prune", pruned.eval(&pt).unwrap()),
        ];
        for (name, v) in checks {
            if v != truth {
                failures.push(format!("{name} at sample {i}"));
            }
        }
    }
    failures
}

/// Problems with the classification of `t`: a witness that does not
/// satisfy its conjunction, a witness for an unsatisfiable conjunction,
/// or a negated theorem whose quadrant is not the dual.
pub fn theorem_problems(t: &Theorem, opts: &ClassifyOptions) -> Vec<String> {
    let mut problems = Vec::new();
    let r = match classify(t, opts) {
        Ok(r) => r,
        Err(e) => return vec![format!("classify failed: {e}")],
    };
    let matrices = [t.consistent_sentence_matrix(), t.counterexample_matrix()];
    let sats = [r.sat_ah == Verdict::True, r.sat_anot_h == Verdict::True];
    let witnesses = [&r.witnesses.ah, &r.witnesses.anot_h];
    for k in 0..2 {
        if let Some(w) = witnesses[k] {
            if !sats[k] {
                problems.push(format!("witness for unsatisfiable conjunction {k}"));
            }
            if !eval_formula(&matrices[k], w).unwrap() {
                problems.push(format!("witness {k} does not satisfy its conjunction"));
            }
        }
    }
    if Quadrant::from_sat(sats[0], sats[1]) != r.quadrant {
        problems.push("quadrant does not match the two verdicts".into());
    }
    match classify(&t.negated(), opts) {
        Ok(n) if n.quadrant == r.quadrant.dual() => {}
        Ok(n) => problems.push(format!("negation gives {} for {}", n.quadrant, r.quadrant)),
        Err(e) => problems.push(format!("classify of negation failed: {e}")),
    }
    problems
}

/// Whether a witness found by search is valid and the engine agrees that
/// the sentence is true. Returns (witness found, problem).
pub fn one_sided_check(f: &Formula, budget: usize, seed: u64) -> (bool, Option<String>) {
    let verdict = match run(f, &EngineOptions::default()) {
        Ok(r) => r.verdict,
        Err(e) => return (false, Some(format!("engine failed: {e}"))),
    };
    match witness_search(f, budget, seed).unwrap() {
        Search::Found(pt) => {
            let (_, matrix) = split_existential(f).unwrap();
            if !eval_formula(&matrix, &pt).unwrap() {
                return (true, Some("witness does not satisfy the matrix".into()));
            }
            if verdict != Verdict::True {
                return (true, Some(format!("witness found but engine says {verdict}")));
            }
            (true, None)
        }
        Search::Unknown => (false, None),
    }
}
