//! Exact division, gcd and square-free factorization of multivariate
//! polynomials over the rationals, by recursion on the variables.

use std::collections::BTreeMap;

use num_traits::Signed;

use crate::oracle::UPoly;

use crate::poly::{Monomial, Polynomial, Rational, Var};

/// The variable of lowest degree, which keeps remainder sequences short.
fn main_var(a: &Polynomial, b: &Polynomial) -> Option<Var> {
    a.vars()
        .into_iter()
        .chain(b.vars())
        .min_by_key(|v| (a.degree_in(v).max(b.degree_in(v)), v.clone()))
}

/// Primitive integer coefficients with a positive leading coefficient.
fn normalize(p: &Polynomial) -> Polynomial {
    let q = p.primitive();
    match q.leading_term() {
        Some((_, c)) if c.is_negative() => -q,
        _ => q,
    }
}

/// `a / b` when `b` divides `a` exactly.
pub fn div_exact(a: &Polynomial, b: &Polynomial) -> Option<Polynomial> {
    if b.is_zero() {
        return None;
    }
    if a.is_zero() {
        return Some(Polynomial::zero());
    }
    if let Some(c) = b.constant_value() {
        return Some(a.scale(&c.recip()));
    }
    let x = b.vars().into_iter().next()?;
    let bc = b.coeffs_wrt(&x);
    let db = bc.len() - 1;
    let mut r = a.coeffs_wrt(&x);
    if r.len() < bc.len() {
        return None;
    }
    let mut q = vec![Polynomial::zero(); r.len() - db];
    for k in (0..q.len()).rev() {
        if r[k + db].is_zero() {
            continue;
        }
        let t = div_exact(&r[k + db], &bc[db])?;
        for (j, c) in bc.iter().enumerate() {
            r[k + j] = &r[k + j] - &(&t * c);
        }
        q[k] = t;
    }
    if r.iter().any(|c| !c.is_zero()) {
        return None;
    }
    Some(Polynomial::from_coeffs(&q, &x))
}

/// Gcd of the coefficients of `p` with respect to `x`.
fn content_in(p: &Polynomial, x: &Var) -> Polynomial {
    let mut g = Polynomial::zero();
    for c in p.coeffs_wrt(x) {
        g = gcd(&g, &c);
        if g.is_constant() && !g.is_zero() {
            return Polynomial::one();
        }
    }
    g
}

/// Pseudo-remainder `lc(q)^(deg p - deg q + 1) * p mod q` in `x`.
fn prem(p: &Polynomial, q: &Polynomial, x: &Var) -> Polynomial {
    let qc = q.coeffs_wrt(x);
    let dq = qc.len() - 1;
    let lc = &qc[dq];
    let dp = p.degree_in(x) as usize;
    if dp < dq {
        return p.clone();
    }
    let mut steps = dp - dq + 1;
    let mut r = p.clone();
    while !r.is_zero() && r.degree_in(x) as usize >= dq {
        let dr = r.degree_in(x);
        let lr = r.coeffs_wrt(x).swap_remove(dr as usize);
        let shift = Monomial::var(x.clone(), dr - dq as u32);
        r = &(&r * lc) - &(&lr * q).mul_monomial(&shift);
        steps -= 1;
    }
    if steps > 0 {
        r = &r * &lc.pow(steps as u32);
    }
    r
}

/// Greatest common divisor, normalized to primitive integer coefficients
/// with a positive leading coefficient; `gcd(0, 0) = 0`.
pub fn gcd(a: &Polynomial, b: &Polynomial) -> Polynomial {
    if a.is_zero() {
        return normalize(b);
    }
    if b.is_zero() {
        return normalize(a);
    }
    if a.is_constant() || b.is_constant() {
        return Polynomial::one();
    }
    prs_gcd(a, b)
}

/// Gcd by subresultant remainder sequences.
fn prs_gcd(a: &Polynomial, b: &Polynomial) -> Polynomial {
    if a.is_zero() {
        return normalize(b);
    }
    if b.is_zero() {
        return normalize(a);
    }
    if a.is_constant() || b.is_constant() {
        return Polynomial::one();
    }
    let x = main_var(a, b).expect("nonconstant input");
    if !a.contains_var(&x) {
        return prs_gcd(a, &content_in(b, &x));
    }
    if !b.contains_var(&x) {
        return prs_gcd(&content_in(a, &x), b);
    }
    let ca = content_in(a, &x);
    let cb = content_in(b, &x);
    let c = prs_gcd(&ca, &cb);
    let mut p = div_exact(a, &ca).expect("content divides");
    let mut q = div_exact(b, &cb).expect("content divides");
    if p.degree_in(&x) < q.degree_in(&x) {
        std::mem::swap(&mut p, &mut q);
    }
    // subresultant remainder sequence
    let mut g = Polynomial::one();
    let mut h = Polynomial::one();
    loop {
        let delta = p.degree_in(&x) - q.degree_in(&x);
        let r = prem(&p, &q, &x);
        if r.is_zero() {
            break;
        }
        if !r.contains_var(&x) {
            return normalize(&c);
        }
        p = q;
        let den = &g * &h.pow(delta);
        q = div_exact(&r, &den).expect("subresultant division is exact");
        g = p.coeffs_wrt(&x).pop().expect("nonzero");
        h = if delta == 0 {
            h
        } else {
            div_exact(&g.pow(delta), &h.pow(delta - 1)).expect("subresultant division is exact")
        };
    }
    let pp = div_exact(&q, &content_in(&q, &x)).expect("content divides");
    normalize(&(&c * &pp))
}

/// Square-free factorization `p = c * prod f_i^{m_i}` with pairwise
/// coprime, square-free, normalized `f_i`. Factors are listed with their
/// multiplicities; `p` must be nonzero.
pub fn squarefree_factors(p: &Polynomial) -> (Rational, Vec<(Polynomial, u32)>) {
    let m = p.monomial_content();
    let mut out: Vec<(Polynomial, u32)> = m.iter().map(|(v, e)| (Polynomial::var(v), *e)).collect();
    let rest = p.div_monomial(&m).expect("monomial content divides");
    if cofactor_may_repeat(&rest) {
        collect_squarefree(&rest, &mut out);
    } else if !rest.is_constant() {
        out.push((normalize(&rest), 1));
    }
    let mut prod = Polynomial::one();
    for (f, m) in &out {
        prod = &prod * &f.pow(*m);
    }
    let c = div_exact(p, &prod)
        .and_then(|q| q.constant_value())
        .expect("factors multiply back to the input");
    (c, out)
}

fn collect_squarefree(p: &Polynomial, out: &mut Vec<(Polynomial, u32)>) {
    if p.is_constant() {
        return;
    }
    let x = main_var(p, p).expect("nonconstant");
    let cont = content_in(p, &x);
    collect_squarefree(&cont, out);
    let pp = div_exact(p, &cont).expect("content divides");
    // Yun's algorithm in x
    let d = pp.derivative(&x);
    let a0 = gcd(&pp, &d);
    let mut b = div_exact(&pp, &a0).expect("gcd divides");
    let c = div_exact(&d, &a0).expect("gcd divides");
    let mut dd = &c - &b.derivative(&x);
    let mut i = 1;
    while !b.is_constant() {
        let a = gcd(&b, &dd);
        let nb = div_exact(&b, &a).expect("gcd divides");
        let nc = div_exact(&dd, &a).expect("gcd divides");
        dd = &nc - &nb.derivative(&x);
        if !a.is_constant() {
            out.push((normalize(&a), i));
        }
        b = nb;
        i += 1;
    }
}

/// Whether `c * prod f^m` expands to `p`.
pub fn check_factors(p: &Polynomial, c: &Rational, factors: &[(Polynomial, u32)]) -> bool {
    let mut prod = Polynomial::constant(c.clone());
    for (f, m) in factors {
        prod = &prod * &f.pow(*m);
    }
    prod == *p
}

/// `c * prod f` over the given factors.
pub fn product<'a>(c: &Rational, factors: impl IntoIterator<Item = &'a Polynomial>) -> Polynomial {
    let mut prod = Polynomial::constant(c.clone());
    for f in factors {
        prod = &prod * f;
    }
    prod
}

/// Cheap test that is false only when `p` is square-free. For each
/// variable `x` of degree at least two, the other variables are fixed at
/// distinct small primes and the univariate image is checked for a
/// repeated root; a repeated factor of `p` involving `x` survives any
/// such substitution that keeps the leading coefficient nonzero.
pub fn may_have_repeated_factor(p: &Polynomial) -> bool {
    let m = p.monomial_content();
    m.iter().any(|(_, e)| *e >= 2) || cofactor_may_repeat(&p.div_monomial(&m).expect("monomial content divides"))
}

fn cofactor_may_repeat(p: &Polynomial) -> bool {
    const PRIMES: [i64; 16] = [3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59];
    let vars: Vec<Var> = p.vars().into_iter().collect();
    vars.iter().any(|x| {
        if p.degree_in(x) < 2 {
            return false;
        }
        let point: BTreeMap<Var, Rational> = vars
            .iter()
            .filter(|v| *v != x)
            .enumerate()
            .map(|(i, v)| (v.clone(), Rational::from_integer(PRIMES[i % PRIMES.len()].into())))
            .collect();
        let image = p.eval_partial(&point);
        if image.degree_in(x) != p.degree_in(x) {
            return true;
        }
        match UPoly::from_poly(&image, x) {
            Ok(u) => u.gcd(&u.derivative()).degree().unwrap_or(0) > 0,
            Err(_) => true,
        }
    })
}
