//! Ground-truth machinery: exact univariate decision by real-root isolation,
//! randomized equivalence testing and witness search.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::formula::{eval_formula, split_existential, to_dnf_capped, Atom, Clause, Formula, Relation};
use crate::poly::{fmt_rational, int, rat, Polynomial, Rational, Var};

/// Dense univariate polynomial, coefficients from the constant term up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UPoly(Vec<Rational>);

impl UPoly {
    pub fn new(mut coeffs: Vec<Rational>) -> UPoly {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        UPoly(coeffs)
    }

    /// Reads `p` as a polynomial in `x` with rational coefficients.
    pub fn from_poly(p: &Polynomial, x: &Var) -> Result<UPoly> {
        let coeffs = p
            .coeffs_wrt(x)
            .into_iter()
            .map(|c| {
                c.constant_value().ok_or_else(|| {
                    Error::Precondition(format!("`{p}` is not univariate in `{x}`"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(UPoly::new(coeffs))
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Degree; the zero polynomial has none.
    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    fn lc(&self) -> &Rational {
        self.0.last().expect("nonzero polynomial")
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        let mut acc = Rational::zero();
        for c in self.0.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn sign_at(&self, x: &Rational) -> Ordering {
        let v = self.eval(x);
        v.cmp(&Rational::zero())
    }

    /// Sign as `x → +∞` (`pos`) or `x → −∞`.
    fn sign_at_infinity(&self, pos: bool) -> Ordering {
        let Some(d) = self.degree() else {
            return Ordering::Equal;
        };
        let s = self.lc().cmp(&Rational::zero());
        if pos || d % 2 == 0 {
            s
        } else {
            s.reverse()
        }
    }

    pub fn derivative(&self) -> UPoly {
        UPoly::new(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * int(i as i64))
                .collect(),
        )
    }

    pub fn mul(&self, o: &UPoly) -> UPoly {
        if self.is_zero() || o.is_zero() {
            return UPoly(Vec::new());
        }
        let mut out = vec![Rational::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        UPoly::new(out)
    }

    pub fn div_rem(&self, d: &UPoly) -> (UPoly, UPoly) {
        let dd = d.degree().expect("division by zero polynomial");
        let mut r = self.0.clone();
        if r.len() <= dd {
            return (UPoly(Vec::new()), self.clone());
        }
        let mut q = vec![Rational::zero(); r.len() - dd];
        let lc = d.lc().clone();
        for k in (0..q.len()).rev() {
            let c = &r[k + dd] / &lc;
            if !c.is_zero() {
                for (j, dj) in d.0.iter().enumerate() {
                    r[k + j] -= &c * dj;
                }
            }
            q[k] = c;
        }
        r.truncate(dd);
        (UPoly::new(q), UPoly::new(r))
    }

    pub fn monic(&self) -> UPoly {
        if self.is_zero() {
            return self.clone();
        }
        let lc = self.lc().clone();
        UPoly(self.0.iter().map(|c| c / &lc).collect())
    }

    pub fn gcd(&self, o: &UPoly) -> UPoly {
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            let r = a.div_rem(&b).1;
            a = b;
            b = r;
        }
        a.monic()
    }

    /// The square-free part `p / gcd(p, p')`.
    pub fn squarefree(&self) -> UPoly {
        if self.degree().unwrap_or(0) == 0 {
            return self.clone();
        }
        let g = self.gcd(&self.derivative());
        self.div_rem(&g).0.monic()
    }

    pub fn sturm_sequence(&self) -> Vec<UPoly> {
        let mut seq = vec![self.clone(), self.derivative()];
        while !seq.last().unwrap().is_zero() {
            let n = seq.len();
            let r = seq[n - 2].div_rem(&seq[n - 1]).1;
            seq.push(UPoly(r.0.iter().map(|c| -c).collect()));
        }
        seq.pop();
        seq
    }
}

fn sign_variations(signs: impl Iterator<Item = Ordering>) -> usize {
    let mut last = Ordering::Equal;
    let mut n = 0;
    for s in signs {
        if s == Ordering::Equal {
            continue;
        }
        if last != Ordering::Equal && s != last {
            n += 1;
        }
        last = s;
    }
    n
}

/// Number of distinct real roots in `(a, b]` of the first polynomial of
/// the Sturm sequence; `None` endpoints are infinite.
fn sturm_count(seq: &[UPoly], a: Option<&Rational>, b: Option<&Rational>) -> usize {
    let va = match a {
        Some(x) => sign_variations(seq.iter().map(|p| p.sign_at(x))),
        None => sign_variations(seq.iter().map(|p| p.sign_at_infinity(false))),
    };
    let vb = match b {
        Some(x) => sign_variations(seq.iter().map(|p| p.sign_at(x))),
        None => sign_variations(seq.iter().map(|p| p.sign_at_infinity(true))),
    };
    va.saturating_sub(vb)
}

/// An isolated real root: exactly rational, or the unique root in the open
/// interval `(lo, hi)` whose endpoints are not roots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RealRoot {
    Exact(Rational),
    Interval { lo: Rational, hi: Rational },
}

impl RealRoot {
    fn left(&self) -> &Rational {
        match self {
            RealRoot::Exact(r) => r,
            RealRoot::Interval { lo, .. } => lo,
        }
    }

    fn right(&self) -> &Rational {
        match self {
            RealRoot::Exact(r) => r,
            RealRoot::Interval { hi, .. } => hi,
        }
    }
}

fn cauchy_bound(p: &UPoly) -> Rational {
    let lc = p.lc().abs();
    let m = p.0[..p.0.len() - 1]
        .iter()
        .map(|c| c.abs() / &lc)
        .max()
        .unwrap_or_else(Rational::zero);
    m + Rational::one()
}

/// Isolates the distinct real roots of `p`, in increasing order.
pub fn isolate_roots(p: &UPoly) -> Vec<RealRoot> {
    if p.degree().unwrap_or(0) == 0 {
        return Vec::new();
    }
    let sf = p.squarefree();
    let seq = sf.sturm_sequence();
    let b = cauchy_bound(&sf);
    let mut out = Vec::new();
    let mut stack = vec![(-b.clone(), b)];
    let two = int(2);
    while let Some((lo, hi)) = stack.pop() {
        let n = sturm_count(&seq, Some(&lo), Some(&hi));
        match n {
            0 => continue,
            1 => {
                out.push(RealRoot::Interval { lo, hi });
                continue;
            }
            _ => {}
        }
        let mid = (&lo + &hi) / &two;
        if sf.sign_at(&mid) != Ordering::Equal {
            stack.push((lo, mid.clone()));
            stack.push((mid, hi));
            continue;
        }
        // exact rational root at the midpoint: cut out a root-free
        // neighbourhood around it
        let mut delta = (&hi - &lo) / int(4);
        loop {
            let a = &mid - &delta;
            let c = &mid + &delta;
            if sf.sign_at(&a) != Ordering::Equal
                && sf.sign_at(&c) != Ordering::Equal
                && sturm_count(&seq, Some(&a), Some(&c)) == 1
            {
                out.push(RealRoot::Exact(mid.clone()));
                stack.push((lo.clone(), a));
                stack.push((c, hi.clone()));
                break;
            }
            delta /= &two;
        }
    }
    // an isolating interval may have collapsed onto a rational root
    for r in &mut out {
        if let RealRoot::Interval { lo, hi } = r {
            let m = (&*lo + &*hi) / &two;
            if sf.sign_at(&m) == Ordering::Equal {
                *r = RealRoot::Exact(m);
            }
        }
    }
    out.sort_by(|a, b| a.left().cmp(b.left()));
    out
}

/// A point of the real line: rational, or the root of `poly` isolated in
/// `(lo, hi)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RealPoint {
    Rational(Rational),
    Root { poly: UPoly, lo: Rational, hi: Rational },
}

impl RealPoint {
    pub fn as_rational(&self) -> Option<&Rational> {
        match self {
            RealPoint::Rational(r) => Some(r),
            RealPoint::Root { .. } => None,
        }
    }
}

/// Finds a point satisfying the univariate clause, testing one sample per
/// cell of the decomposition induced by all atom polynomials.
pub fn univariate_witness(atoms: &[Atom], x: &Var) -> Result<Option<RealPoint>> {
    let mut polys: Vec<(UPoly, Relation)> = Vec::new();
    for a in atoms {
        let u = UPoly::from_poly(&a.lhs, x)?;
        match u.degree() {
            None | Some(0) => {
                let c = u.0.first().cloned().unwrap_or_else(Rational::zero);
                if !a.rel.holds(c.cmp(&Rational::zero())) {
                    return Ok(None);
                }
            }
            _ => polys.push((u, a.rel)),
        }
    }
    if polys.is_empty() {
        return Ok(Some(RealPoint::Rational(Rational::zero())));
    }
    if polys.iter().all(|(u, _)| u.degree() <= Some(2)) {
        return Ok(quadratic_witness(&polys));
    }
    let mut product = UPoly::new(vec![Rational::one()]);
    for (u, _) in &polys {
        product = product.mul(u);
    }
    let big = product.squarefree();
    let roots = isolate_roots(&big);
    let holds_at = |x: &Rational| polys.iter().all(|(u, rel)| rel.holds(u.sign_at(x)));

    // open cells
    let mut samples = Vec::with_capacity(roots.len() + 1);
    match roots.first() {
        None => samples.push(Rational::zero()),
        Some(r) => samples.push(r.left() - Rational::one()),
    }
    for w in roots.windows(2) {
        let (a, b) = (w[0].right(), w[1].left());
        samples.push(if a == b { a.clone() } else { (a + b) / int(2) });
    }
    if let Some(r) = roots.last() {
        samples.push(r.right() + Rational::one());
    }
    for s in &samples {
        if holds_at(s) {
            return Ok(Some(RealPoint::Rational(s.clone())));
        }
    }
    // roots
    for r in &roots {
        match r {
            RealRoot::Exact(v) => {
                if holds_at(v) {
                    return Ok(Some(RealPoint::Rational(v.clone())));
                }
            }
            RealRoot::Interval { lo, hi } => {
                let ok = polys.iter().all(|(u, rel)| {
                    let g = u.gcd(&big);
                    let vanishes = g.degree().unwrap_or(0) > 0
                        && sturm_count(&g.sturm_sequence(), Some(lo), Some(hi)) > 0;
                    let s = if vanishes { Ordering::Equal } else { u.sign_at(lo) };
                    rel.holds(s)
                });
                if ok {
                    return Ok(Some(RealPoint::Root {
                        poly: big.clone(),
                        lo: lo.clone(),
                        hi: hi.clone(),
                    }));
                }
            }
        }
    }
    Ok(None)
}

/// An irrational number `a + b·sqrt(d)` with `b != 0` and `d` not a
/// rational square, root of the monic quadratic `x^2 + m1 x + m0`.
#[derive(Debug, Clone)]
struct QuadRoot {
    a: Rational,
    b: Rational,
    d: Rational,
    m1: Rational,
    m0: Rational,
}

impl QuadRoot {
    /// Open interval around the value with `bits` bits of precision on
    /// the square root.
    fn interval(&self, bits: u32) -> (Rational, Rational) {
        let n = self.d.numer() * self.d.denom();
        let scaled: BigInt = n << (2 * bits as usize);
        let s = scaled.sqrt();
        let scale = Rational::from_integer(self.d.denom().clone() << bits as usize);
        let lo = Rational::from_integer(s.clone()) / &scale;
        let hi = Rational::from_integer(s + 1) / &scale;
        let (p, q) = (&self.a + &self.b * &lo, &self.a + &self.b * &hi);
        if p < q {
            (p, q)
        } else {
            (q, p)
        }
    }

    /// Value of `u` as `P + Q·sqrt(d)`.
    fn eval(&self, u: &UPoly) -> (Rational, Rational) {
        let (mut p, mut q) = (Rational::zero(), Rational::zero());
        for c in u.coeffs().iter().rev() {
            let np = &p * &self.a + &q * &self.b * &self.d + c;
            let nq = &p * &self.b + &q * &self.a;
            p = np;
            q = nq;
        }
        (p, q)
    }
}

/// Sign of `p + q·sqrt(d)` for `d > 0` not a rational square.
fn field_sign(p: &Rational, q: &Rational, d: &Rational) -> Ordering {
    let zero = Rational::zero();
    let (sp, sq) = (p.cmp(&zero), q.cmp(&zero));
    if sq == Ordering::Equal {
        return sp;
    }
    if sp == Ordering::Equal || sp == sq {
        return sq;
    }
    if p * p > q * q * d {
        sp
    } else {
        sq
    }
}

fn rational_sqrt(r: &Rational) -> Option<Rational> {
    let (n, d) = (r.numer(), r.denom());
    let (sn, sd) = (n.sqrt(), d.sqrt());
    (&sn * &sn == *n && &sd * &sd == *d).then(|| Rational::new(sn, sd))
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
enum QRoot {
    Rat(Rational),
    Irr(QuadRoot),
}

impl QRoot {
    fn bounds(&self, bits: u32) -> (Rational, Rational) {
        match self {
            QRoot::Rat(r) => (r.clone(), r.clone()),
            QRoot::Irr(q) => q.interval(bits),
        }
    }
}

fn compare_roots(x: &QRoot, y: &QRoot) -> Ordering {
    match (x, y) {
        (QRoot::Rat(r), QRoot::Rat(s)) => r.cmp(s),
        (QRoot::Irr(q), QRoot::Rat(r)) => field_sign(&(&q.a - r), &q.b, &q.d),
        (QRoot::Rat(_), QRoot::Irr(_)) => compare_roots(y, x).reverse(),
        (QRoot::Irr(q), QRoot::Irr(s)) if q.m1 == s.m1 && q.m0 == s.m0 => {
            // conjugate roots of one quadratic: the larger has positive b
            q.b.cmp(&Rational::zero()).cmp(&s.b.cmp(&Rational::zero()))
        }
        (QRoot::Irr(q), QRoot::Irr(s)) if q.d == s.d => {
            field_sign(&(&q.a - &s.a), &(&q.b - &s.b), &q.d)
        }
        (QRoot::Irr(_), QRoot::Irr(_)) => {
            // different minimal polynomials, hence distinct numbers
            let mut bits = 16;
            loop {
                let (xl, xh) = x.bounds(bits);
                let (yl, yh) = y.bounds(bits);
                if xh <= yl {
                    return Ordering::Less;
                }
                if yh <= xl {
                    return Ordering::Greater;
                }
                bits *= 2;
            }
        }
    }
}

/// A rational strictly between two distinct ordered roots.
fn between(x: &QRoot, y: &QRoot) -> Rational {
    let mut bits = 16;
    loop {
        let (_, xh) = x.bounds(bits);
        let (yl, _) = y.bounds(bits);
        if xh < yl {
            return (xh + yl) / int(2);
        }
        bits *= 2;
    }
}

/// Cell decomposition for polynomials of degree at most two, with exact
/// arithmetic in quadratic fields.
fn quadratic_witness(polys: &[(UPoly, Relation)]) -> Option<RealPoint> {
    let mut roots: Vec<QRoot> = Vec::new();
    for (u, _) in polys {
        let c = u.coeffs();
        if c.len() == 2 {
            roots.push(QRoot::Rat(-&c[0] / &c[1]));
            continue;
        }
        let disc = &c[1] * &c[1] - int(4) * &c[2] * &c[0];
        let two_a = int(2) * &c[2];
        match disc.cmp(&Rational::zero()) {
            Ordering::Less => {}
            Ordering::Equal => roots.push(QRoot::Rat(-&c[1] / &two_a)),
            Ordering::Greater => match rational_sqrt(&disc) {
                Some(s) => {
                    roots.push(QRoot::Rat((-&c[1] + &s) / &two_a));
                    roots.push(QRoot::Rat((-&c[1] - s) / &two_a));
                }
                None => {
                    for sign in [1, -1] {
                        roots.push(QRoot::Irr(QuadRoot {
                            a: -&c[1] / &two_a,
                            b: int(sign) / &two_a,
                            d: disc.clone(),
                            m1: &c[1] / &c[2],
                            m0: &c[0] / &c[2],
                        }));
                    }
                }
            },
        }
    }
    roots.sort_by(compare_roots);
    roots.dedup_by(|x, y| compare_roots(x, y) == Ordering::Equal);

    let holds_at = |x: &Rational| polys.iter().all(|(u, rel)| rel.holds(u.sign_at(x)));
    let mut samples = Vec::with_capacity(roots.len() + 1);
    match roots.first() {
        None => samples.push(Rational::zero()),
        Some(r) => samples.push(r.bounds(16).0 - Rational::one()),
    }
    for w in roots.windows(2) {
        samples.push(between(&w[0], &w[1]));
    }
    if let Some(r) = roots.last() {
        samples.push(r.bounds(16).1 + Rational::one());
    }
    if let Some(s) = samples.into_iter().find(|s| holds_at(s)) {
        return Some(RealPoint::Rational(s));
    }
    for r in &roots {
        match r {
            QRoot::Rat(v) => {
                if holds_at(v) {
                    return Some(RealPoint::Rational(v.clone()));
                }
            }
            QRoot::Irr(q) => {
                let ok = polys.iter().all(|(u, rel)| {
                    let (p, s) = q.eval(u);
                    rel.holds(field_sign(&p, &s, &q.d))
                });
                if ok {
                    let (lo, hi) = q.interval(16);
                    let poly = UPoly::new(vec![q.m0.clone(), q.m1.clone(), Rational::one()]);
                    return Some(RealPoint::Root { poly, lo, hi });
                }
            }
        }
    }
    None
}

/// Exact truth of `∃x. atoms`, for atoms univariate in `x`.
pub fn decide_univariate(c: &Clause, x: &Var) -> Result<bool> {
    Ok(univariate_witness(c.atoms(), x)?.is_some())
}

/// A rational assignment.
pub type Point = BTreeMap<Var, Rational>;

/// Identifies the sampling distribution in reports.
pub const SAMPLER_VERSION: &str = "corners+mixed-v1";

fn coordinate(rng: &mut ChaCha8Rng) -> Rational {
    match rng.gen_range(0..4) {
        0 => int(rng.gen_range(-1..=1)),
        1 => int(rng.gen_range(-3..=3)),
        2 => rat(rng.gen_range(-12..=12), rng.gen_range(1..=6)),
        _ => rat(rng.gen_range(-640..=640), rng.gen_range(1..=64)),
    }
}

fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// The `index`-th point of the pinned distribution over `vars`: when
/// `3^k <= n`, the first `3^k` indices enumerate the sign-grid corners
/// `{-1,0,1}^k`; all other points mix sign-grid values, small integers,
/// small-denominator rationals and rationals in a box of radius 10.
pub fn sample_point(vars: &[Var], n: usize, seed: u64, index: usize) -> Point {
    let corners = corner_count(vars.len(), n);
    if index < corners {
        let mut i = index;
        return vars
            .iter()
            .map(|v| {
                let d = (i % 3) as i64 - 1;
                i /= 3;
                (v.clone(), int(d))
            })
            .collect();
    }
    let mut rng = rng_for(seed, index as u64);
    vars.iter().map(|v| (v.clone(), coordinate(&mut rng))).collect()
}

fn corner_count(k: usize, n: usize) -> usize {
    let mut c: usize = 1;
    for _ in 0..k {
        c = match c.checked_mul(3) {
            Some(c) if c <= n => c,
            _ => return 0,
        };
    }
    c
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleRow {
    pub index: usize,
    pub point: BTreeMap<String, String>,
    pub f: bool,
    pub g: bool,
}

impl SampleRow {
    fn new(index: usize, point: &Point, f: bool, g: bool) -> SampleRow {
        SampleRow {
            index,
            point: point
                .iter()
                .map(|(v, r)| (v.name().to_string(), fmt_rational(r)))
                .collect(),
            f,
            g,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub sampler: &'static str,
    pub seed: u64,
    pub n: usize,
    pub corners: usize,
    pub disagreements: Vec<SampleRow>,
}

impl EquivalenceReport {
    pub fn agrees(&self) -> bool {
        self.disagreements.is_empty()
    }
}

/// Evaluates `check` at `n` pinned sample points and collects the points
/// where its two verdicts differ. `keep_rows` also returns every row.
pub fn sample_agreement<F>(
    vars: &[Var],
    n: usize,
    seed: u64,
    keep_rows: bool,
    check: F,
) -> Result<(EquivalenceReport, Vec<SampleRow>)>
where
    F: Fn(&Point) -> Result<(bool, bool)> + Sync + Send,
{
    let results = exec::map_range(n, |i| {
        let pt = sample_point(vars, n, seed, i);
        check(&pt).map(|(f, g)| (pt, f, g))
    });
    let mut rows = Vec::new();
    let mut disagreements = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let (pt, f, g) = r?;
        if f != g {
            disagreements.push(SampleRow::new(i, &pt, f, g));
        }
        if keep_rows {
            rows.push(SampleRow::new(i, &pt, f, g));
        }
    }
    Ok((
        EquivalenceReport {
            sampler: SAMPLER_VERSION,
            seed,
            n,
            corners: corner_count(vars.len(), n),
            disagreements,
        },
        rows,
    ))
}

/// Compares two quantifier-free formulas at `n` sample points.
pub fn sample_equivalence(f: &Formula, g: &Formula, vars: &[Var], n: usize, seed: u64) -> Result<EquivalenceReport> {
    Ok(sample_agreement(vars, n, seed, false, |pt| Ok((eval_formula(f, pt)?, eval_formula(g, pt)?)))?.0)
}

/// The variables of `f` in a stable order.
pub fn formula_vars(f: &Formula) -> Vec<Var> {
    f.vars().into_iter().collect()
}

/// Outcome of [`witness_search`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Search {
    Found(Point),
    Unknown,
}

/// Searches for a rational point satisfying the matrix of an existential
/// sentence (free variables are treated as existential). Each trial picks
/// a DNF clause, assigns variables at random, solves linear equations for
/// their last unassigned variable, and decides the final variable exactly.
/// Never claims unsatisfiability.
pub fn witness_search(f: &Formula, budget: usize, seed: u64) -> Result<Search> {
    let (_, matrix) = split_existential(f)?;
    let all_vars: Vec<Var> = matrix.vars().into_iter().collect();
    let clauses = match to_dnf_capped(&matrix, 20_000) {
        Ok(d) => d.into_clauses(),
        Err(e) if e.is_resource() => Vec::new(),
        Err(e) => return Err(e),
    };
    if clauses.iter().any(Clause::is_empty) {
        let pt: Point = all_vars.iter().map(|v| (v.clone(), Rational::zero())).collect();
        if eval_formula(&matrix, &pt)? {
            return Ok(Search::Found(pt));
        }
    }
    const BATCH: usize = 256;
    let mut start = 0;
    while start < budget {
        let end = (start + BATCH).min(budget);
        let found = exec::map_range(end - start, |k| {
            let trial = start + k;
            let mut rng = rng_for(seed, trial as u64);
            let mut pt = if clauses.is_empty() {
                Some(Point::new())
            } else {
                attempt(&clauses[trial % clauses.len()], &mut rng)
            }?;
            for v in &all_vars {
                if !pt.contains_key(v) {
                    pt.insert(v.clone(), coordinate(&mut rng));
                }
            }
            eval_formula(&matrix, &pt).ok()?.then_some(pt)
        });
        if let Some(pt) = found.into_iter().flatten().next() {
            return Ok(Search::Found(pt));
        }
        start = end;
    }
    Ok(Search::Unknown)
}

fn attempt(clause: &Clause, rng: &mut ChaCha8Rng) -> Option<Point> {
    let mut atoms: Vec<Atom> = clause.atoms().to_vec();
    let mut order: Vec<Var> = clause.vars().into_iter().collect();
    order.shuffle(rng);
    // reserve one linear variable per equation to be solved for
    let mut reserved: BTreeSet<Var> = BTreeSet::new();
    for a in atoms.iter().filter(|a| a.rel == Relation::Eq) {
        let cands: Vec<Var> = order
            .iter()
            .filter(|v| a.lhs.degree_in(v) == 1 && !reserved.contains(*v))
            .cloned()
            .collect();
        if let Some(v) = cands.last() {
            reserved.insert(v.clone());
        }
    }
    let mut pt = Point::new();
    let mut remaining: Vec<Var> = order;
    loop {
        if remaining.is_empty() {
            return Some(pt);
        }
        if remaining.len() == 1 {
            let x = remaining.pop().unwrap();
            let w = univariate_witness(&atoms, &x).ok()??;
            let v = w.as_rational()?.clone();
            pt.insert(x, v);
            return Some(pt);
        }
        // an equation with a single unknown, linear in it
        let mut solved = None;
        for a in atoms.iter().filter(|a| a.rel == Relation::Eq) {
            let vars = a.lhs.vars();
            if vars.len() == 1 {
                let v = vars.into_iter().next().unwrap();
                if a.lhs.degree_in(&v) == 1 {
                    let cs = a.lhs.coeffs_wrt(&v);
                    let (c1, c0) = (cs[1].constant_value()?, cs[0].constant_value()?);
                    solved = Some((v, -c0 / c1));
                    break;
                }
            }
        }
        let (v, val) = match solved {
            Some(s) => s,
            None => {
                let pick = remaining
                    .iter()
                    .position(|v| !reserved.contains(v))
                    .unwrap_or(0);
                let v = remaining[pick].clone();
                (v, coordinate(rng))
            }
        };
        remaining.retain(|r| r != &v);
        let mut single = BTreeMap::new();
        single.insert(v.clone(), val.clone());
        for a in &mut atoms {
            if a.lhs.contains_var(&v) {
                a.lhs = a.lhs.eval_partial(&single);
            }
        }
        if atoms.iter().any(|a| a.fold() == Some(false)) {
            return None;
        }
        pt.insert(v, val);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::p;

    fn clause(parts: &[(&str, Relation)]) -> Clause {
        Clause::new(parts.iter().map(|(s, r)| Atom::new(p(s), *r))).unwrap()
    }

    #[test]
    fn upoly_basics() {
        let x = Var::new("x");
        let u = UPoly::from_poly(&p("x^3 - 2*x"), &x).unwrap();
        assert_eq!(u.degree(), Some(3));
        assert_eq!(u.eval(&int(2)), int(4));
        let sq = UPoly::from_poly(&p("(x - 1)^2*(x + 2)"), &x).unwrap().squarefree();
        assert_eq!(sq, UPoly::from_poly(&p("x^2 + x - 2"), &x).unwrap());
    }

    #[test]
    fn root_isolation_counts() {
        let x = Var::new("x");
        let u = UPoly::from_poly(&p("(x^2 - 2)*(x - 1)*(x + 3)*x"), &x).unwrap();
        let roots = isolate_roots(&u);
        assert_eq!(roots.len(), 5);
        let exact: Vec<_> = roots
            .iter()
            .filter_map(|r| match r {
                RealRoot::Exact(v) => Some(v.clone()),
                _ => None,
            })
            .collect();
        assert!(exact.contains(&int(0)));
        for w in roots.windows(2) {
            assert!(w[0].right() <= w[1].left());
        }
        assert!(isolate_roots(&UPoly::from_poly(&p("x^2 + 1"), &x).unwrap()).is_empty());
    }

    #[test]
    fn decide_examples() {
        let x = Var::new("x");
        assert!(!decide_univariate(&clause(&[("x", Relation::Eq), ("x", Relation::Gt)]), &x).unwrap());
        assert!(decide_univariate(&clause(&[("x^2 - 2", Relation::Gt), ("x", Relation::Lt)]), &x).unwrap());
        assert!(decide_univariate(
            &clause(&[
                ("x + 1", Relation::Eq),
                ("2*x + 3", Relation::Gt),
                ("x^2 + x + 1", Relation::Gt)
            ]),
            &x
        )
        .unwrap());
        // irrational root satisfying an equation
        let w = univariate_witness(
            clause(&[("x^2 - 2", Relation::Eq), ("x", Relation::Gt)]).atoms(),
            &x,
        )
        .unwrap();
        assert!(matches!(w, Some(RealPoint::Root { .. })));
        assert!(!decide_univariate(&clause(&[("x^2 - 2", Relation::Eq), ("x - 2", Relation::Gt)]), &x).unwrap());
    }

    #[test]
    fn sampling_hits_boundaries() {
        let x = Var::new("x");
        let f = Formula::atom(p("x"), Relation::Gt);
        let g = Formula::atom(p("x"), Relation::Ge);
        let r = sample_equivalence(&f, &g, std::slice::from_ref(&x), 100, 7).unwrap();
        assert!(!r.agrees());
        assert_eq!(r.disagreements[0].point["x"], "0");
        let r = sample_equivalence(&f, &f, &[x], 100, 7).unwrap();
        assert!(r.agrees());
    }

    #[test]
    fn witness_search_examples() {
        let f = crate::sexp::parse_formula("(exists ((x Real)) (< (* x x) 0))").unwrap();
        assert_eq!(witness_search(&f, 200, 1).unwrap(), Search::Unknown);
        let g = crate::sexp::parse_formula(
            "(exists ((v1 Real) (v2 Real) (v3 Real) (v4 Real)) (and (< v1 0) (> v2 0) (= (- (* v3 v2) 1) v4) (= v4 (* v3 v1)) (> v3 0) (< v4 0)))",
        )
        .unwrap();
        match witness_search(&g, 2000, 1).unwrap() {
            Search::Found(pt) => {
                let (_, m) = split_existential(&g).unwrap();
                assert!(eval_formula(&m, &pt).unwrap());
            }
            Search::Unknown => panic!("no witness found"),
        }
    }

    #[test]
    fn quadratic_fast_path_matches_sturm() {
        let x = Var::new("x");
        let cases: &[&[(&str, Relation)]] = &[
            &[("x^2 - 2", Relation::Eq), ("2*x^2 - 4", Relation::Eq), ("x", Relation::Gt)],
            &[("x^2 - 2", Relation::Lt), ("x^2 - 8", Relation::Ge)],
            &[("x^2 - 2", Relation::Gt), ("x^2 - 3", Relation::Lt), ("x", Relation::Gt)],
            &[("x^2 - 3", Relation::Eq), ("x^2 - 2", Relation::Gt), ("x - 2", Relation::Lt)],
            &[("x^2 + x - 1", Relation::Le), ("3*x^2 - 5", Relation::Ge), ("x + 1/2", Relation::Neq)],
        ];
        for atoms in cases {
            let atoms: Vec<Atom> = atoms.iter().map(|(s, r)| Atom::new(p(s), *r)).collect();
            let fast = univariate_witness(&atoms, &x).unwrap().is_some();
            let cubic: Vec<Atom> = atoms
                .iter()
                .map(|a| Atom::new(&a.lhs * &p("x^2 + 1"), a.rel))
                .collect();
            let slow = univariate_witness(&cubic, &x).unwrap().is_some();
            assert_eq!(fast, slow, "{atoms:?}");
        }
    }
}
