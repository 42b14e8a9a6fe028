//! Exact sparse multivariate polynomials over the rationals.
//!
//! Terms are kept in a `BTreeMap` keyed by [`Monomial`], whose ordering is
//! graded lexicographic with respect to the variable order. Variables are
//! interned, so equality is a pointer comparison and the order is the
//! natural order of their names (`v2 < v10`, `a10 < a11 < a20`).

use std::borrow::Borrow;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;

/// Builds a rational from a numerator and denominator.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Formats a rational as `n` or `n/d`.
pub fn fmt_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rational(text: &str) -> Option<Rational> {
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Some((whole, frac)) = text.split_once('.') {
        let digits = format!("{whole}{frac}");
        let n: BigInt = digits.parse().ok()?;
        let d = num_traits::pow(BigInt::from(10), frac.len());
        return Some(Rational::new(n, d));
    }
    let n: BigInt = text.parse().ok()?;
    Some(Rational::from_integer(n))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum NameChunk {
    Text(Box<str>),
    // digits with leading zeros stripped, plus the original width as a tiebreak
    Num(Box<str>, usize),
}

impl NameChunk {
    fn cmp_natural(&self, other: &NameChunk) -> Ordering {
        match (self, other) {
            (NameChunk::Num(a, wa), NameChunk::Num(b, wb)) => a
                .len()
                .cmp(&b.len())
                .then_with(|| a.cmp(b))
                .then_with(|| wa.cmp(wb)),
            (NameChunk::Num(..), NameChunk::Text(_)) => Ordering::Less,
            (NameChunk::Text(_), NameChunk::Num(..)) => Ordering::Greater,
            (NameChunk::Text(a), NameChunk::Text(b)) => a.cmp(b),
        }
    }
}

fn name_chunks(name: &str) -> Vec<NameChunk> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut digits = false;
    let flush = |cur: &mut String, digits: bool, out: &mut Vec<NameChunk>| {
        if cur.is_empty() {
            return;
        }
        if digits {
            let trimmed = cur.trim_start_matches('0');
            let trimmed = if trimmed.is_empty() { "0" } else { trimmed };
            out.push(NameChunk::Num(trimmed.into(), cur.len()));
        } else {
            out.push(NameChunk::Text(cur.as_str().into()));
        }
        cur.clear();
    };
    for ch in name.chars() {
        let d = ch.is_ascii_digit();
        if d != digits {
            flush(&mut cur, digits, &mut out);
            digits = d;
        }
        cur.push(ch);
    }
    flush(&mut cur, digits, &mut out);
    out
}

struct VarInner {
    name: Box<str>,
    chunks: Vec<NameChunk>,
}

/// An interned real variable.
#[derive(Clone)]
pub struct Var(Arc<VarInner>);

fn interner() -> &'static Mutex<HashMap<Box<str>, Var>> {
    static INTERNER: OnceLock<Mutex<HashMap<Box<str>, Var>>> = OnceLock::new();
    INTERNER.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Var {
    /// Interns `name`. Panics on an empty name.
    pub fn new(name: &str) -> Var {
        assert!(!name.is_empty(), "variable names must be nonempty");
        let mut table = interner().lock().expect("variable interner poisoned");
        if let Some(v) = table.get(name) {
            return v.clone();
        }
        let v = Var(Arc::new(VarInner {
            name: name.into(),
            chunks: name_chunks(name),
        }));
        table.insert(name.into(), v.clone());
        v
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }
}

impl PartialEq for Var {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for Var {}

impl Hash for Var {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.name.hash(state)
    }
}

impl Ord for Var {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        let (a, b) = (&self.0.chunks, &other.0.chunks);
        for (x, y) in a.iter().zip(b.iter()) {
            let c = x.cmp_natural(y);
            if c != Ordering::Equal {
                return c;
            }
        }
        a.len()
            .cmp(&b.len())
            .then_with(|| self.0.name.cmp(&other.0.name))
    }
}

impl PartialOrd for Var {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Var {
        Var::new(s)
    }
}

/// A power product of variables. No zero exponents are stored; the empty
/// product is the constant monomial.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(SmallVec<[(Var, u32); 4]>);

impl Monomial {
    pub fn one() -> Monomial {
        Monomial(SmallVec::new())
    }

    pub fn var(v: Var, exp: u32) -> Monomial {
        if exp == 0 {
            return Monomial::one();
        }
        let mut s = SmallVec::new();
        s.push((v, exp));
        Monomial(s)
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Var, u32)>) -> Monomial {
        let mut map: BTreeMap<Var, u32> = BTreeMap::new();
        for (v, e) in pairs {
            *map.entry(v).or_insert(0) += e;
        }
        Monomial(map.into_iter().filter(|(_, e)| *e > 0).collect())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| *e).sum()
    }

    pub fn degree_in(&self, v: &Var) -> u32 {
        self.0
            .iter()
            .find(|(w, _)| w == v)
            .map(|(_, e)| *e)
            .unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Var, u32)> {
        self.0.iter()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = SmallVec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, b) = (&self.0[i], &other.0[j]);
            match a.0.cmp(&b.0) {
                Ordering::Less => {
                    out.push(a.clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b.clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a.0.clone(), a.1 + b.1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend(self.0[i..].iter().cloned());
        out.extend(other.0[j..].iter().cloned());
        Monomial(out)
    }

    /// Removes `v` entirely, returning its exponent and the remaining monomial.
    pub fn split_off(&self, v: &Var) -> (u32, Monomial) {
        let mut rest = SmallVec::new();
        let mut e = 0;
        for (w, k) in &self.0 {
            if w == v {
                e = *k;
            } else {
                rest.push((w.clone(), *k));
            }
        }
        (e, Monomial(rest))
    }

    /// Exponent-wise minimum.
    pub fn gcd(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .filter_map(|(v, e)| {
                    let f = other.degree_in(v);
                    (f > 0).then(|| (v.clone(), (*e).min(f)))
                })
                .collect(),
        )
    }

    /// Exact division; `None` if `other` does not divide `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = SmallVec::new();
        for (v, e) in &self.0 {
            let f = other.degree_in(v);
            if f > *e {
                return None;
            }
            if *e > f {
                out.push((v.clone(), e - f));
            }
        }
        if other.0.iter().any(|(v, _)| self.degree_in(v) == 0) {
            return None;
        }
        Some(Monomial(out))
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.0.iter().map(|(v, _)| v)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        let d = self.total_degree().cmp(&other.total_degree());
        if d != Ordering::Equal {
            return d;
        }
        for (a, b) in self.0.iter().zip(other.0.iter()) {
            match a.0.cmp(&b.0) {
                Ordering::Equal => match a.1.cmp(&b.1) {
                    Ordering::Equal => continue,
                    o => return o,
                },
                // the monomial carrying the earlier variable is larger
                Ordering::Less => return Ordering::Greater,
                Ordering::Greater => return Ordering::Less,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for (i, (v, e)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            if *e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Sparse polynomial with rational coefficients in canonical form.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, Rational>,
}

impl Polynomial {
    pub fn zero() -> Polynomial {
        Polynomial::default()
    }

    pub fn one() -> Polynomial {
        Polynomial::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Polynomial {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::one(), c);
        }
        Polynomial { terms }
    }

    pub fn int(n: i64) -> Polynomial {
        Polynomial::constant(int(n))
    }

    pub fn var(v: impl Borrow<Var>) -> Polynomial {
        Polynomial::term(Rational::one(), Monomial::var(v.borrow().clone(), 1))
    }

    pub fn named(name: &str) -> Polynomial {
        Polynomial::var(Var::new(name))
    }

    pub fn term(c: Rational, m: Monomial) -> Polynomial {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Polynomial { terms }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, Rational)>) -> Polynomial {
        let mut map: BTreeMap<Monomial, Rational> = BTreeMap::new();
        for (m, c) in terms {
            add_term(&mut map, m, c);
        }
        Polynomial { terms: map }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|m| m.is_one())
    }

    /// The value of a constant polynomial.
    pub fn constant_value(&self) -> Option<Rational> {
        if self.is_zero() {
            return Some(Rational::zero());
        }
        if self.is_constant() {
            return self.terms.values().next().cloned();
        }
        None
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in ascending monomial order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn leading_term(&self) -> Option<(&Monomial, &Rational)> {
        self.terms.iter().next_back()
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.terms
            .keys()
            .flat_map(|m| m.vars().cloned())
            .collect()
    }

    pub fn contains_var(&self, v: &Var) -> bool {
        self.terms.keys().any(|m| m.degree_in(v) > 0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::total_degree).max().unwrap_or(0)
    }

    /// Highest exponent of `v`; 0 when `v` is absent.
    pub fn degree_in(&self, v: &Var) -> u32 {
        self.terms.keys().map(|m| m.degree_in(v)).max().unwrap_or(0)
    }

    /// Dense coefficient list `[c0, .., cd]` with `self = sum ci * v^i`.
    pub fn coeffs_wrt(&self, v: &Var) -> Vec<Polynomial> {
        let d = self.degree_in(v) as usize;
        let mut maps: Vec<BTreeMap<Monomial, Rational>> = vec![BTreeMap::new(); d + 1];
        for (m, c) in &self.terms {
            let (e, rest) = m.split_off(v);
            maps[e as usize].insert(rest, c.clone());
        }
        maps.into_iter().map(|terms| Polynomial { terms }).collect()
    }

    /// Inverse of [`coeffs_wrt`](Self::coeffs_wrt).
    pub fn from_coeffs(coeffs: &[Polynomial], v: &Var) -> Polynomial {
        let mut acc = Polynomial::zero();
        for (i, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            acc = &acc + &c.mul_monomial(&Monomial::var(v.clone(), i as u32));
        }
        acc
    }

    pub fn scale(&self, k: &Rational) -> Polynomial {
        if k.is_zero() {
            return Polynomial::zero();
        }
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c * k))
                .collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Polynomial {
        if m.is_one() {
            return self.clone();
        }
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(n, c)| (n.mul(m), c.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut acc = Polynomial::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Exact value at a rational point.
    pub fn eval(&self, point: &BTreeMap<Var, Rational>) -> Result<Rational> {
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (v, e) in m.iter() {
                let x = point
                    .get(v)
                    .ok_or_else(|| Error::MissingAssignment(v.clone()))?;
                t *= num_traits::pow(x.clone(), *e as usize);
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Partially evaluates the variables present in `point`.
    pub fn eval_partial(&self, point: &BTreeMap<Var, Rational>) -> Polynomial {
        let mut map = BTreeMap::new();
        for (m, c) in &self.terms {
            let mut coeff = c.clone();
            let mut rest = Vec::new();
            for (v, e) in m.iter() {
                match point.get(v) {
                    Some(x) => coeff *= num_traits::pow(x.clone(), *e as usize),
                    None => rest.push((v.clone(), *e)),
                }
            }
            add_term(&mut map, Monomial(rest.into_iter().collect()), coeff);
        }
        Polynomial { terms: map }
    }

    /// Replaces every occurrence of `v` by `q`.
    pub fn substitute(&self, v: &Var, q: &Polynomial) -> Polynomial {
        let coeffs = self.coeffs_wrt(v);
        // Horner in q
        let mut acc = Polynomial::zero();
        for c in coeffs.iter().rev() {
            acc = &(&acc * q) + c;
        }
        acc
    }

    /// Simultaneous substitution of several variables.
    pub fn substitute_many(&self, map: &BTreeMap<Var, Polynomial>) -> Polynomial {
        let mut powers: HashMap<(Var, u32), Polynomial> = HashMap::new();
        let mut acc: BTreeMap<Monomial, Rational> = BTreeMap::new();
        for (m, c) in &self.terms {
            let mut kept = Vec::new();
            let mut factors: Vec<Polynomial> = Vec::new();
            for (v, e) in m.iter() {
                match map.get(v) {
                    Some(q) => {
                        let p = powers
                            .entry((v.clone(), *e))
                            .or_insert_with(|| q.pow(*e))
                            .clone();
                        factors.push(p);
                    }
                    None => kept.push((v.clone(), *e)),
                }
            }
            let mut prod = Polynomial::term(c.clone(), Monomial(kept.into_iter().collect()));
            // multiply small factors first
            factors.sort_by_key(|f| f.num_terms());
            for f in &factors {
                if prod.is_zero() {
                    break;
                }
                prod = &prod * f;
            }
            for (m, c) in prod.terms {
                add_term(&mut acc, m, c);
            }
        }
        Polynomial { terms: acc }
    }

    /// Positive rational content: the gcd of numerators over the lcm of
    /// denominators. Dividing by it preserves the sign of every value.
    pub fn content(&self) -> Rational {
        let mut num = BigInt::zero();
        let mut den = BigInt::one();
        for c in self.terms.values() {
            num = num.gcd(c.numer());
            den = den.lcm(c.denom());
        }
        if num.is_zero() {
            return Rational::one();
        }
        Rational::new(num, den)
    }

    /// Divides out the positive content, leaving integer coprime coefficients.
    pub fn primitive(&self) -> Polynomial {
        let c = self.content();
        if c.is_one() {
            return self.clone();
        }
        self.scale(&c.recip())
    }

    /// Largest monomial dividing every term.
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.keys();
        let Some(first) = it.next() else {
            return Monomial::one();
        };
        let mut g = first.clone();
        for m in it {
            if g.is_one() {
                break;
            }
            g = g.gcd(m);
        }
        g
    }

    pub fn div_monomial(&self, m: &Monomial) -> Option<Polynomial> {
        let mut terms = BTreeMap::new();
        for (n, c) in &self.terms {
            terms.insert(n.div(m)?, c.clone());
        }
        Some(Polynomial { terms })
    }

    /// Derivative with respect to `v`.
    pub fn derivative(&self, v: &Var) -> Polynomial {
        let mut map = BTreeMap::new();
        for (m, c) in &self.terms {
            let (e, rest) = m.split_off(v);
            if e == 0 {
                continue;
            }
            let nm = rest.mul(&Monomial::var(v.clone(), e - 1));
            add_term(&mut map, nm, c * int(e as i64));
        }
        Polynomial { terms: map }
    }

    /// The single variable `v` if `self == v` exactly.
    pub fn as_var(&self) -> Option<&Var> {
        if self.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.terms.iter().next()?;
        if !c.is_one() || m.0.len() != 1 || m.0[0].1 != 1 {
            return None;
        }
        Some(&m.0[0].0)
    }
}

fn add_term(map: &mut BTreeMap<Monomial, Rational>, m: Monomial, c: Rational) {
    if c.is_zero() {
        return;
    }
    match map.entry(m) {
        std::collections::btree_map::Entry::Vacant(e) => {
            e.insert(c);
        }
        std::collections::btree_map::Entry::Occupied(mut e) => {
            *e.get_mut() += c;
            if e.get().is_zero() {
                e.remove();
            }
        }
    }
}

impl<'a> std::ops::Add<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let (big, small) = if self.terms.len() >= rhs.terms.len() {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let mut terms = big.terms.clone();
        for (m, c) in &small.terms {
            add_term(&mut terms, m.clone(), c.clone());
        }
        Polynomial { terms }
    }
}

impl<'a> std::ops::Sub<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut terms = self.terms.clone();
        for (m, c) in &rhs.terms {
            add_term(&mut terms, m.clone(), -c.clone());
        }
        Polynomial { terms }
    }
}

impl<'a> std::ops::Mul<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut terms = BTreeMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                add_term(&mut terms, m1.mul(m2), c1 * c2);
            }
        }
        Polynomial { terms }
    }
}

impl std::ops::Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl std::ops::$tr<Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $f(self, rhs: Polynomial) -> Polynomial {
                std::ops::$tr::$f(&self, &rhs)
            }
        }
        impl<'a> std::ops::$tr<&'a Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $f(self, rhs: &'a Polynomial) -> Polynomial {
                std::ops::$tr::$f(&self, rhs)
            }
        }
        impl<'a> std::ops::$tr<Polynomial> for &'a Polynomial {
            type Output = Polynomial;
            fn $f(self, rhs: Polynomial) -> Polynomial {
                std::ops::$tr::$f(self, &rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl std::ops::Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        -&self
    }
}

impl Ord for Polynomial {
    /// Compares leading terms first, descending through the term lists.
    fn cmp(&self, other: &Self) -> Ordering {
        let mut a = self.terms.iter().rev();
        let mut b = other.terms.iter().rev();
        loop {
            match (a.next(), b.next()) {
                (None, None) => return Ordering::Equal,
                (None, Some(_)) => return Ordering::Less,
                (Some(_), None) => return Ordering::Greater,
                (Some((m1, c1)), Some((m2, c2))) => {
                    let o = m1.cmp(m2).then_with(|| c1.cmp(c2));
                    if o != Ordering::Equal {
                        return o;
                    }
                }
            }
        }
    }
}

impl PartialOrd for Polynomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            match (i, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            if m.is_one() {
                f.write_str(&fmt_rational(&mag))?;
            } else if mag.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{}*{m}", fmt_rational(&mag))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Polynomial {
    type Err = Error;

    /// Parses the infix form produced by `Display` (and a little more:
    /// parentheses and arbitrary nesting of `+ - * ^`).
    fn from_str(s: &str) -> Result<Polynomial> {
        let mut p = InfixParser {
            src: s.as_bytes(),
            pos: 0,
        };
        let out = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("trailing input"));
        }
        Ok(out)
    }
}

struct InfixParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl InfixParser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Syntax {
            line: 1,
            col: self.pos + 1,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Polynomial> {
        let mut acc = self.term()?;
        while let Some(c) = self.peek() {
            match c {
                b'+' => {
                    self.pos += 1;
                    acc = &acc + &self.term()?;
                }
                b'-' => {
                    self.pos += 1;
                    acc = &acc - &self.term()?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Polynomial> {
        let mut acc = self.factor()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            acc = &acc * &self.factor()?;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Polynomial> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(-self.factor()?);
        }
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let e = self.unsigned()?;
            return Ok(base.pow(e));
        }
        Ok(base)
    }

    fn unsigned(&mut self) -> Result<u32> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.err("expected exponent"))
    }

    fn atom(&mut self) -> Result<Polynomial> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
                {
                    self.pos += 1;
                }
                let mut text = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                if self.peek() == Some(b'/') {
                    self.pos += 1;
                    self.skip_ws();
                    let s2 = self.pos;
                    while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                    text.push('/');
                    text.push_str(&String::from_utf8_lossy(&self.src[s2..self.pos]));
                }
                parse_rational(&text)
                    .map(Polynomial::constant)
                    .ok_or_else(|| self.err("bad number"))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric()
                        || self.src[self.pos] == b'_'
                        || self.src[self.pos] == b'\'')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                Ok(Polynomial::named(name))
            }
            _ => Err(self.err("expected a term")),
        }
    }
}

/// Shorthand used throughout the tests: `p("x^2 - 1")`.
pub fn p(s: &str) -> Polynomial {
    s.parse().expect("invalid polynomial literal")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(pairs: &[(&str, Rational)]) -> BTreeMap<Var, Rational> {
        pairs
            .iter()
            .map(|(n, r)| (Var::new(n), r.clone()))
            .collect()
    }

    #[test]
    fn natural_variable_order() {
        assert!(Var::new("v2") < Var::new("v10"));
        assert!(Var::new("a10") < Var::new("a11"));
        assert!(Var::new("a11") < Var::new("a20"));
        assert!(Var::new("x") < Var::new("y"));
    }

    #[test]
    fn arith_examples() {
        assert_eq!(p("v1*v3") - p("v4"), p("v1*v3 - v4"));
        let q = p("3*x*y - 2");
        assert_eq!(&q + &Polynomial::zero(), q);
        assert_eq!(p("x + 1") * p("x - 1"), p("x^2 - 1"));
    }

    #[test]
    fn degree_examples() {
        assert_eq!(p("v12*v4^2*v8").degree_in(&Var::new("v12")), 1);
        assert_eq!(p("v11^2*v4^2").degree_in(&Var::new("v11")), 2);
        assert_eq!(p("5").degree_in(&Var::new("x")), 0);
    }

    #[test]
    fn coeffs_examples() {
        let v12 = Var::new("v12");
        assert_eq!(
            p("v1*v12 + v10*v3 + v11*v2").coeffs_wrt(&v12),
            vec![p("v10*v3 + v11*v2"), p("v1")]
        );
        assert_eq!(
            p("x^2 - 1").coeffs_wrt(&Var::new("x")),
            vec![p("-1"), p("0"), p("1")]
        );
        assert_eq!(p("y").coeffs_wrt(&Var::new("x")), vec![p("y")]);
    }

    #[test]
    fn eval_examples() {
        let pt = point(&[("v2", int(1)), ("v3", int(2)), ("v4", int(1))]);
        assert_eq!(p("v3*v2 - 1 - v4").eval(&pt).unwrap(), int(0));
        assert_eq!(p("x^2").eval(&point(&[("x", rat(-3, 2))])).unwrap(), rat(9, 4));
        match p("x*y").eval(&point(&[("x", int(2))])) {
            Err(Error::MissingAssignment(v)) => assert_eq!(v.name(), "y"),
            other => panic!("expected missing assignment, got {other:?}"),
        }
    }

    #[test]
    fn substitute_examples() {
        let a11 = Var::new("a11");
        assert_eq!(
            p("a11*x + a10").substitute(&a11, &p("v1")),
            p("v1*x + a10")
        );
        assert_eq!(p("x^2").substitute(&Var::new("x"), &p("y + 1")), p("y^2 + 2*y + 1"));
        let q = p("x^2*y - 3*x + 7");
        let x = Var::new("x");
        assert_eq!(q.substitute(&x, &Polynomial::var(&x)), q);
        let mut map = BTreeMap::new();
        map.insert(x.clone(), p("y + 1"));
        assert_eq!(q.substitute_many(&map), q.substitute(&x, &p("y + 1")));
    }

    #[test]
    fn canonical_print() {
        assert_eq!(p("1 - x + 3/2*x^2*y").to_string(), "3/2*x^2*y - x + 1");
        assert_eq!(p("-y + x").to_string(), "x - y");
        assert_eq!(p("0").to_string(), "0");
        let q = p("-1/3*a10*a21 + a20*a11 - 4");
        assert_eq!(q.to_string().parse::<Polynomial>().unwrap(), q);
    }

    #[test]
    fn content_and_monomial_content() {
        let q = p("6*x^2*y + 4*x*y^2");
        assert_eq!(q.content(), int(2));
        assert_eq!(q.primitive(), p("3*x^2*y + 2*x*y^2"));
        assert_eq!(q.monomial_content(), Monomial::from_pairs([(Var::new("x"), 1), (Var::new("y"), 1)]));
        assert_eq!(q.div_monomial(&q.monomial_content()).unwrap(), p("6*x + 4*y"));
    }

    #[test]
    fn derivative_works() {
        let x = Var::new("x");
        assert_eq!(p("a*x^2 + b*x + c").derivative(&x), p("2*a*x + b"));
    }
}
