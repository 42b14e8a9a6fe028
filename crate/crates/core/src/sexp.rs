//! S-expression reader and canonical printer for formulas and theorem files.
//!
//! Grammar (SMT-LIB flavored):
//!
//! ```text
//! (declare-const x Real)
//! (assert <formula>)
//! (assert-theorem :assumptions <formula> :hypothesis <formula> [:free (x y ..)])
//! <formula>          ; a bare formula is accepted at top level
//! ```
//!
//! Terms use `+ - * ^ /`, atoms `= < <= > >= distinct` (comparison chains
//! allowed), connectives `and or not =>`, binders `exists`/`forall`.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::formula::{Atom, Formula, Relation};
use crate::poly::{parse_rational, Polynomial, Rational, Var};

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom { text: String, line: usize, col: usize },
    List { items: Vec<Sexp>, line: usize, col: usize },
}

impl Sexp {
    fn pos(&self) -> (usize, usize) {
        match self {
            Sexp::Atom { line, col, .. } | Sexp::List { line, col, .. } => (*line, *col),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        let (line, col) = self.pos();
        Error::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn symbol(&self) -> Option<&str> {
        match self {
            Sexp::Atom { text, .. } => Some(text),
            Sexp::List { .. } => None,
        }
    }

    fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List { items, .. } => Some(items),
            Sexp::Atom { .. } => None,
        }
    }
}

fn read_all(text: &str) -> Result<Vec<Sexp>> {
    let mut stack: Vec<(Vec<Sexp>, usize, usize)> = Vec::new();
    let mut top = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => {
                chars.next();
                stack.push((Vec::new(), line, col));
                col += 1;
            }
            ')' => {
                chars.next();
                let Some((items, l, c0)) = stack.pop() else {
                    return Err(Error::Syntax {
                        line,
                        col,
                        msg: "unbalanced `)`".into(),
                    });
                };
                col += 1;
                let node = Sexp::List {
                    items,
                    line: l,
                    col: c0,
                };
                match stack.last_mut() {
                    Some((parent, ..)) => parent.push(node),
                    None => top.push(node),
                }
            }
            _ => {
                let (l, c0) = (line, col);
                let mut tok = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    tok.push(c);
                    chars.next();
                    col += 1;
                }
                let node = Sexp::Atom {
                    text: tok,
                    line: l,
                    col: c0,
                };
                match stack.last_mut() {
                    Some((parent, ..)) => parent.push(node),
                    None => top.push(node),
                }
            }
        }
    }
    if let Some((_, l, c)) = stack.pop() {
        return Err(Error::Syntax {
            line: l,
            col: c,
            msg: "unclosed `(`".into(),
        });
    }
    Ok(top)
}

/// An `(assert-theorem ..)` form.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremForm {
    pub assumptions: Formula,
    pub hypothesis: Formula,
    pub free: Vec<Var>,
}

/// A parsed input file.
#[derive(Debug, Clone, Default)]
pub struct Document {
    pub declarations: Vec<Var>,
    pub assertions: Vec<Formula>,
    pub theorem: Option<TheoremForm>,
    /// Variables used without a declaration or binder, when the file
    /// declares any constants at all.
    pub warnings: Vec<String>,
}

impl Document {
    /// The conjunction of all assertions; the theorem form is ignored.
    pub fn formula(&self) -> Formula {
        Formula::and(self.assertions.to_vec())
    }
}

struct Reader {
    declared: BTreeSet<Var>,
    bound: Vec<Var>,
    used_free: BTreeSet<Var>,
}

impl Reader {
    fn new() -> Reader {
        Reader {
            declared: BTreeSet::new(),
            bound: Vec::new(),
            used_free: BTreeSet::new(),
        }
    }

    fn term(&mut self, s: &Sexp) -> Result<Polynomial> {
        match s {
            Sexp::Atom { text, .. } => {
                if let Some(r) = parse_rational(text) {
                    return Ok(Polynomial::constant(r));
                }
                if !is_identifier(text) {
                    return Err(s.err(format!("invalid term `{text}`")));
                }
                let v = Var::new(text);
                if !self.bound.contains(&v) {
                    self.used_free.insert(v.clone());
                }
                Ok(Polynomial::var(v))
            }
            Sexp::List { items, .. } => {
                let Some(head) = items.first().and_then(Sexp::symbol) else {
                    return Err(s.err("expected an operator"));
                };
                let args = &items[1..];
                match head {
                    "+" => {
                        let mut acc = Polynomial::zero();
                        for a in args {
                            acc = &acc + &self.term(a)?;
                        }
                        Ok(acc)
                    }
                    "*" => {
                        let mut acc = Polynomial::one();
                        for a in args {
                            acc = &acc * &self.term(a)?;
                        }
                        Ok(acc)
                    }
                    "-" => match args {
                        [] => Err(s.err("`-` needs at least one argument")),
                        [a] => Ok(-self.term(a)?),
                        [a, rest @ ..] => {
                            let mut acc = self.term(a)?;
                            for b in rest {
                                acc = &acc - &self.term(b)?;
                            }
                            Ok(acc)
                        }
                    },
                    "^" => {
                        let [base, exp] = args else {
                            return Err(s.err("`^` takes a base and an exponent"));
                        };
                        let k = exp
                            .symbol()
                            .and_then(|t| t.parse::<u32>().ok())
                            .ok_or_else(|| exp.err("exponent must be a nonnegative integer literal"))?;
                        Ok(self.term(base)?.pow(k))
                    }
                    "/" => {
                        let [num, den] = args else {
                            return Err(s.err("`/` takes two arguments"));
                        };
                        let d = self
                            .literal(den)
                            .filter(|d| !d.is_zero())
                            .ok_or_else(|| den.err("divisor must be a nonzero numeric literal"))?;
                        Ok(self.term(num)?.scale(&d.recip()))
                    }
                    other => Err(s.err(format!("unknown term operator `{other}`"))),
                }
            }
        }
    }

    /// A numeric literal, possibly written `(- n)` or `(/ n d)`.
    fn literal(&self, s: &Sexp) -> Option<Rational> {
        match s {
            Sexp::Atom { text, .. } => parse_rational(text),
            Sexp::List { items, .. } => match items.as_slice() {
                [op, a] if op.symbol() == Some("-") => self.literal(a).map(|r| -r),
                [op, a, b] if op.symbol() == Some("/") => {
                    let d = self.literal(b)?;
                    if d.is_zero() {
                        return None;
                    }
                    Some(self.literal(a)? / d)
                }
                _ => None,
            },
        }
    }

    fn binders(&mut self, s: &Sexp) -> Result<Vec<Var>> {
        let list = s.list().ok_or_else(|| s.err("expected a binder list"))?;
        let mut out = Vec::new();
        for b in list {
            let (name, sort) = match b.list() {
                Some([n, t]) => (n.symbol(), t.symbol()),
                _ => return Err(b.err("binder must be `(name Real)`")),
            };
            let name = name.filter(|n| is_identifier(n)).ok_or_else(|| b.err("invalid binder name"))?;
            if sort != Some("Real") {
                return Err(b.err("only the sort Real is supported"));
            }
            let v = Var::new(name);
            if out.contains(&v) {
                return Err(b.err(format!("variable `{name}` bound twice in one quantifier")));
            }
            if self.bound.contains(&v) {
                return Err(b.err(format!("variable `{name}` shadows an enclosing binder")));
            }
            out.push(v);
        }
        if out.is_empty() {
            return Err(s.err("empty binder list"));
        }
        Ok(out)
    }

    fn formula(&mut self, s: &Sexp) -> Result<Formula> {
        match s {
            Sexp::Atom { text, .. } => match text.as_str() {
                "true" => Ok(Formula::True),
                "false" => Ok(Formula::False),
                _ => Err(s.err(format!("expected a formula, found `{text}`"))),
            },
            Sexp::List { items, .. } => {
                let Some(head) = items.first().and_then(Sexp::symbol) else {
                    return Err(s.err("expected a connective or relation"));
                };
                let args = &items[1..];
                if let Some(rel) = Relation::from_symbol(head) {
                    if rel == Relation::Neq && head != "distinct" {
                        return Err(s.err("use `distinct` or `(not (= ..))`"));
                    }
                    if args.len() < 2 {
                        return Err(s.err(format!("`{head}` needs at least two terms")));
                    }
                    let terms = args.iter().map(|a| self.term(a)).collect::<Result<Vec<_>>>()?;
                    let atoms: Vec<Formula> = terms
                        .windows(2)
                        .map(|w| Formula::Atom(Atom::compare(&w[0], rel, &w[1])))
                        .collect();
                    return Ok(if atoms.len() == 1 {
                        atoms.into_iter().next().unwrap()
                    } else {
                        Formula::And(atoms)
                    });
                }
                match head {
                    "and" | "or" => {
                        let parts = args.iter().map(|a| self.formula(a)).collect::<Result<Vec<_>>>()?;
                        Ok(match (head, parts.len()) {
                            ("and", 0) => Formula::True,
                            ("or", 0) => Formula::False,
                            ("and", _) => Formula::And(parts),
                            _ => Formula::Or(parts),
                        })
                    }
                    "not" => {
                        let [a] = args else {
                            return Err(s.err("`not` takes one argument"));
                        };
                        Ok(Formula::not(self.formula(a)?))
                    }
                    "=>" => {
                        let [a, b] = args else {
                            return Err(s.err("`=>` takes two arguments"));
                        };
                        Ok(Formula::implies(self.formula(a)?, self.formula(b)?))
                    }
                    "exists" | "forall" => {
                        let [bs, body] = args else {
                            return Err(s.err(format!("`{head}` takes a binder list and a body")));
                        };
                        let vars = self.binders(bs)?;
                        let depth = self.bound.len();
                        self.bound.extend(vars.iter().cloned());
                        let body = self.formula(body);
                        self.bound.truncate(depth);
                        let body = Box::new(body?);
                        Ok(if head == "exists" {
                            Formula::Exists(vars, body)
                        } else {
                            Formula::Forall(vars, body)
                        })
                    }
                    other => Err(s.err(format!("unknown connective `{other}`"))),
                }
            }
        }
    }

    fn theorem(&mut self, s: &Sexp, args: &[Sexp]) -> Result<TheoremForm> {
        let mut assumptions = None;
        let mut hypothesis = None;
        let mut free = Vec::new();
        let mut i = 0;
        while i < args.len() {
            let key = args[i].symbol().ok_or_else(|| args[i].err("expected a keyword"))?;
            let val = args
                .get(i + 1)
                .ok_or_else(|| args[i].err(format!("missing value for `{key}`")))?;
            match key {
                ":assumptions" => assumptions = Some(self.formula(val)?),
                ":hypothesis" => hypothesis = Some(self.formula(val)?),
                ":free" => {
                    let list = val.list().ok_or_else(|| val.err("`:free` expects a list of names"))?;
                    for n in list {
                        let name = n
                            .symbol()
                            .filter(|t| is_identifier(t))
                            .ok_or_else(|| n.err("invalid variable name"))?;
                        free.push(Var::new(name));
                    }
                }
                other => return Err(args[i].err(format!("unknown keyword `{other}`"))),
            }
            i += 2;
        }
        Ok(TheoremForm {
            assumptions: assumptions.ok_or_else(|| s.err("missing `:assumptions`"))?,
            hypothesis: hypothesis.ok_or_else(|| s.err("missing `:hypothesis`"))?,
            free,
        })
    }
}

fn is_identifier(t: &str) -> bool {
    let mut chars = t.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    t.chars()
        .all(|c| c.is_alphanumeric() || matches!(c, '_' | '.' | '\'' | '!' | '?' | '@' | '$'))
}

/// Parses a whole input file.
pub fn parse_document(text: &str) -> Result<Document> {
    let mut reader = Reader::new();
    let mut doc = Document::default();
    for top in read_all(text)? {
        let head = top.list().and_then(|l| l.first()).and_then(Sexp::symbol);
        let args = top.list().map(|l| &l[1..]).unwrap_or(&[]);
        match head {
            Some("declare-const") => {
                let [name, sort] = args else {
                    return Err(top.err("expected `(declare-const name Real)`"));
                };
                let name = name
                    .symbol()
                    .filter(|t| is_identifier(t))
                    .ok_or_else(|| name.err("invalid constant name"))?;
                if sort.symbol() != Some("Real") {
                    return Err(sort.err("only the sort Real is supported"));
                }
                let v = Var::new(name);
                if reader.declared.insert(v.clone()) {
                    doc.declarations.push(v);
                }
            }
            Some("assert") => {
                let [f] = args else {
                    return Err(top.err("`assert` takes one formula"));
                };
                let f = reader.formula(f)?;
                doc.assertions.push(f);
            }
            Some("assert-theorem") => {
                if doc.theorem.is_some() {
                    return Err(top.err("only one `assert-theorem` per file"));
                }
                doc.theorem = Some(reader.theorem(&top, args)?);
            }
            Some("check-sat") | Some("set-info") | Some("set-logic") | Some("exit") => {}
            _ => {
                let f = reader.formula(&top)?;
                doc.assertions.push(f);
            }
        }
    }
    if !reader.declared.is_empty() {
        for v in &reader.used_free {
            if !reader.declared.contains(v) {
                doc.warnings.push(format!("variable `{v}` is used but not declared"));
            }
        }
    }
    Ok(doc)
}

/// Parses a single formula (or the conjunction of a file's assertions).
pub fn parse_formula(text: &str) -> Result<Formula> {
    let doc = parse_document(text)?;
    if doc.theorem.is_some() {
        return Err(Error::UnsupportedShape(
            "expected a formula, found a theorem".into(),
        ));
    }
    match doc.assertions.len() {
        0 => Err(Error::Syntax {
            line: 1,
            col: 1,
            msg: "no formula found".into(),
        }),
        1 => Ok(doc.assertions.into_iter().next().unwrap()),
        _ => Ok(Formula::And(doc.assertions)),
    }
}

/// A top-level record `(tag item ..)`: symbol items, or for the tag `qf`
/// a single formula.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Record {
    pub tag: String,
    pub items: Vec<String>,
    pub formula: Option<Formula>,
}

pub(crate) fn read_records(text: &str) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for s in read_all(text)? {
        let items = s.list().ok_or_else(|| s.err("expected a record list"))?;
        let (head, rest) = items.split_first().ok_or_else(|| s.err("empty record"))?;
        let tag = head.symbol().ok_or_else(|| head.err("expected a record tag"))?.to_string();
        if tag == "qf" {
            let [f] = rest else {
                return Err(s.err("qf record takes one formula"));
            };
            out.push(Record { tag, items: Vec::new(), formula: Some(Reader::new().formula(f)?) });
        } else {
            let items = rest
                .iter()
                .map(|i| i.symbol().map(str::to_string).ok_or_else(|| i.err("expected a symbol")))
                .collect::<Result<Vec<_>>>()?;
            out.push(Record { tag, items, formula: None });
        }
    }
    Ok(out)
}

/// Parses a polynomial term in s-expression syntax.
pub fn parse_term(text: &str) -> Result<Polynomial> {
    let items = read_all(text)?;
    let [s] = items.as_slice() else {
        return Err(Error::Syntax {
            line: 1,
            col: 1,
            msg: "expected exactly one term".into(),
        });
    };
    Reader::new().term(s)
}

fn write_num(out: &mut String, r: &Rational) {
    let write_abs = |out: &mut String, r: &Rational| {
        if r.denom().is_one() {
            let _ = write!(out, "{}", r.numer().abs());
        } else {
            let _ = write!(out, "(/ {} {})", r.numer().abs(), r.denom());
        }
    };
    if r.is_negative() {
        out.push_str("(- ");
        write_abs(out, r);
        out.push(')');
    } else {
        write_abs(out, r);
    }
}

fn write_term(out: &mut String, c: &Rational, m: &crate::poly::Monomial) {
    if m.is_one() {
        write_num(out, c);
        return;
    }
    let factors: Vec<String> = m
        .iter()
        .map(|(v, e)| {
            if *e == 1 {
                v.to_string()
            } else {
                format!("(^ {v} {e})")
            }
        })
        .collect();
    let unit = c.abs().is_one();
    let body = if unit && factors.len() == 1 {
        factors[0].clone()
    } else {
        let mut s = String::from("(*");
        if !unit {
            s.push(' ');
            write_num(&mut s, &c.abs());
        }
        for f in &factors {
            s.push(' ');
            s.push_str(f);
        }
        s.push(')');
        s
    };
    if c.is_negative() {
        let _ = write!(out, "(- {body})");
    } else {
        out.push_str(&body);
    }
}

/// Canonical s-expression print of a polynomial, terms leading first.
pub fn print_poly(p: &Polynomial) -> String {
    let mut out = String::new();
    let terms: Vec<_> = p.terms().rev().collect();
    match terms.len() {
        0 => out.push('0'),
        1 => write_term(&mut out, terms[0].1, terms[0].0),
        _ => {
            out.push_str("(+");
            for (m, c) in terms {
                out.push(' ');
                write_term(&mut out, c, m);
            }
            out.push(')');
        }
    }
    out
}

pub fn print_atom(a: &Atom) -> String {
    let op = match a.rel {
        Relation::Neq => "distinct",
        r => r.symbol(),
    };
    format!("({op} {} 0)", print_poly(&a.lhs))
}

fn write_formula(out: &mut String, f: &Formula) {
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Atom(a) => out.push_str(&print_atom(a)),
        Formula::Not(g) => {
            out.push_str("(not ");
            write_formula(out, g);
            out.push(')');
        }
        Formula::And(gs) | Formula::Or(gs) => {
            out.push_str(if matches!(f, Formula::And(_)) { "(and" } else { "(or" });
            for g in gs {
                out.push(' ');
                write_formula(out, g);
            }
            out.push(')');
        }
        Formula::Implies(a, b) => {
            out.push_str("(=> ");
            write_formula(out, a);
            out.push(' ');
            write_formula(out, b);
            out.push(')');
        }
        Formula::Exists(vs, g) | Formula::Forall(vs, g) => {
            out.push_str(if matches!(f, Formula::Exists(..)) { "(exists (" } else { "(forall (" });
            for (i, v) in vs.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "({v} Real)");
            }
            out.push_str(") ");
            write_formula(out, g);
            out.push(')');
        }
    }
}

/// Canonical single-line s-expression print of a formula.
pub fn print_formula(f: &Formula) -> String {
    let mut out = String::new();
    write_formula(&mut out, f);
    out
}

/// Prints a theorem as a loadable file.
pub fn print_theorem(t: &TheoremForm, declarations: &[Var]) -> String {
    let mut out = String::new();
    for v in declarations {
        let _ = writeln!(out, "(declare-const {v} Real)");
    }
    let _ = writeln!(out, "(assert-theorem");
    let _ = writeln!(out, "  :assumptions {}", print_formula(&t.assumptions));
    let _ = write!(out, "  :hypothesis {}", print_formula(&t.hypothesis));
    if !t.free.is_empty() {
        let names: Vec<String> = t.free.iter().map(|v| v.to_string()).collect();
        let _ = write!(out, "\n  :free ({})", names.join(" "));
    }
    out.push_str(")\n");
    out
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_formula(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{p, rat};

    #[test]
    fn parses_exists() {
        let f = parse_formula("(exists ((x Real)) (> x 0))").unwrap();
        assert_eq!(
            f,
            Formula::Exists(vec![Var::new("x")], Box::new(Formula::atom(p("x"), Relation::Gt)))
        );
    }

    #[test]
    fn reports_syntax_errors_with_position() {
        match parse_formula("(and (> x))") {
            Err(Error::Syntax { line, col, .. }) => assert_eq!((line, col), (1, 6)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_formula("(and (> x 0)"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_formula("(> (^ x y) 0)"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_formula("(> (/ x 0) 0)"), Err(Error::Syntax { .. })));
        assert!(matches!(
            parse_formula("(exists ((x Real) (x Real)) (> x 0))"),
            Err(Error::Syntax { .. })
        ));
    }

    #[test]
    fn terms_and_literals() {
        let t = parse_term("(- (* 3 x (^ y 2)) (/ x 2) (- 1))").unwrap();
        assert_eq!(t, p("3*x*y^2 - 1/2*x + 1"));
        assert_eq!(parse_term("(/ 1 2)").unwrap(), Polynomial::constant(rat(1, 2)));
        assert_eq!(parse_term("0.5").unwrap(), Polynomial::constant(rat(1, 2)));
    }

    #[test]
    fn chains_and_warnings() {
        let doc = parse_document(
            "(declare-const a Real)\n; comment\n(assert (< b (* (/ 1 2) a) 0))",
        )
        .unwrap();
        assert_eq!(doc.assertions.len(), 1);
        assert!(matches!(&doc.assertions[0], Formula::And(v) if v.len() == 2));
        assert_eq!(doc.warnings.len(), 1);
    }

    #[test]
    fn theorem_form() {
        let doc = parse_document(
            "(assert-theorem :assumptions (> x 0) :hypothesis (>= x 0) :free (x))",
        )
        .unwrap();
        let t = doc.theorem.unwrap();
        assert_eq!(t.free, vec![Var::new("x")]);
    }

    #[test]
    fn print_parse_round_trip() {
        let src = "(forall ((x Real)) (=> (and (> (+ (* (/ 3 2) (^ x 2)) (- x) 1) 0) (distinct y 0)) (or (not (= x 0)) (<= (- (* 2 x y)) 0) true)))";
        let f = parse_formula(src).unwrap();
        let printed = print_formula(&f);
        assert_eq!(parse_formula(&printed).unwrap(), f);
        assert_eq!(print_poly(&p("-7/3")), "(- (/ 7 3))");
        assert_eq!(print_poly(&p("0")), "0");
        assert_eq!(print_poly(&p("-x*y + 2")), "(+ (- (* x y)) 2)");
    }
}
