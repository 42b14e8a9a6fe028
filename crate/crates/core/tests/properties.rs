mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use common::*;
use tarski_qe::classify::ClassifyOptions;
use tarski_qe::factor::{check_factors, gcd, squarefree_factors};
use tarski_qe::formula::{eval_formula, split_existential};
use tarski_qe::oracle::{witness_search, Search};
use tarski_qe::poly::int;
use tarski_qe::{Monomial, Polynomial, Rational, Var};

fn xyz() -> [Var; 3] {
    [Var::new("x"), Var::new("y"), Var::new("z")]
}

fn poly_strategy() -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((-5i64..=5, 0u32..3, 0u32..3, 0u32..3), 0..5).prop_map(|terms| {
        let [x, y, z] = xyz();
        Polynomial::from_terms(
            terms
                .into_iter()
                .map(|(c, a, b, d)| {
                    (Monomial::from_pairs([(x.clone(), a), (y.clone(), b), (z.clone(), d)]), int(c))
                })
                .collect::<Vec<_>>(),
        )
    })
}

fn point_strategy() -> impl Strategy<Value = BTreeMap<Var, Rational>> {
    (-7i64..=7, -7i64..=7, -7i64..=7).prop_map(|(a, b, c)| {
        let [x, y, z] = xyz();
        [(x, int(a)), (y, int(b)), (z, int(c))].into_iter().collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn ring_laws(p in poly_strategy(), q in poly_strategy(), r in poly_strategy(), pt in point_strategy()) {
        prop_assert_eq!(&p + &q, &q + &p);
        prop_assert_eq!(&p * &q, &q * &p);
        prop_assert_eq!(&(&p + &q) + &r, &p + &(&q + &r));
        prop_assert_eq!(&(&p * &q) * &r, &p * &(&q * &r));
        prop_assert_eq!(&p * &(&q + &r), &(&p * &q) + &(&p * &r));
        prop_assert_eq!(&p + &Polynomial::zero(), p.clone());
        prop_assert_eq!(&p * &Polynomial::one(), p.clone());
        prop_assert!((&p - &p).is_zero());
        prop_assert!((&p + &(-p.clone())).is_zero());
        let prod = (&p * &q).eval(&pt).unwrap();
        prop_assert_eq!(prod, p.eval(&pt).unwrap() * q.eval(&pt).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn gcd_divides_and_squarefree_factors_multiply_back(p in poly_strategy(), q in poly_strategy()) {
        let g = gcd(&p, &q);
        if !g.is_zero() {
            prop_assert!(tarski_qe::factor::div_exact(&p, &g).is_some());
            prop_assert!(tarski_qe::factor::div_exact(&q, &g).is_some());
        }
        let sq = &(&p * &p) * &q;
        if !sq.is_zero() {
            let (c, fs) = squarefree_factors(&sq);
            prop_assert!(check_factors(&sq, &c, &fs));
        }
    }

    #[test]
    fn random_formulas_keep_their_truth(seed in any::<u64>()) {
        let f = random_existential(seed);
        let (_, matrix) = split_existential(&f).unwrap();
        let failures = truth_preservation_failures(&matrix, 50, seed);
        prop_assert!(failures.is_empty(), "{}: {:?}", matrix, failures);
    }

    #[test]
    fn witnesses_satisfy_their_formula(seed in any::<u64>()) {
        let f = random_existential(seed);
        if let Search::Found(pt) = witness_search(&f, 500, seed).unwrap() {
            let (_, matrix) = split_existential(&f).unwrap();
            prop_assert!(eval_formula(&matrix, &pt).unwrap(), "{} at {:?}", matrix, pt);
        }
    }
}

#[test]
fn regression_formulas_keep_their_truth() {
    for (name, f) in regression_formulas() {
        let failures = truth_preservation_failures(&f, 1_000, 11);
        assert!(failures.is_empty(), "{name}: {failures:?}");
    }
}

#[test]
fn quadrants_are_exclusive_and_dual() {
    let opts = ClassifyOptions { witness_budget: 2_000, ..ClassifyOptions::default() };
    for seed in 0..100 {
        let t = random_theorem(seed);
        let problems = theorem_problems(&t, &opts);
        assert!(problems.is_empty(), "seed {seed}: {problems:?}");
    }
}

#[test]
fn search_never_contradicts_the_engine() {
    let mut found = 0;
    for seed in 0..100 {
        let f = random_existential(1_000 + seed);
        let (hit, problem) = one_sided_check(&f, 2_000, seed);
        assert!(problem.is_none(), "seed {seed} {f}: {problem:?}");
        found += usize::from(hit);
    }
    assert!(found > 0);
}

#[test]
fn large_atom_factors_quickly() {
    let q: Polynomial = include_str!("data/repeated_factor_88.txt").trim().parse().unwrap();
    let start = std::time::Instant::now();
    let (c, fs) = squarefree_factors(&q);
    assert!(check_factors(&q, &c, &fs));
    assert!(start.elapsed().as_secs() < 20);
}
