//! Terms and quantifier-free formulas over the signature `{∧,∨,¬,0,1}`,
//! their concrete syntax, evaluation in a finite PDL, atomic diagrams, and
//! the generated formula families (`At`, `Jirr`, `F`, `P`, `Q`, `FS`, `DN`).
//!
//! Grammar: terms `0 | 1 | ident | !t | t & t | t "|" t | (t)` with
//! precedence `!` > `&` > `|`; formulas `t = t | t != t | f and f | f or f |
//! f -> f | (f)` with precedence `and` > `or` > `->`, `->` right
//! associative. Identifiers match `[a-zA-Z][a-zA-Z0-9_]*` except the
//! keywords `and` and `or`.

use std::collections::HashMap;
use std::fmt;

use crate::algebra::FinitePdl;
use crate::config::Caps;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Zero,
    One,
    Var(String),
    Not(Box<Term>),
    Meet(Box<Term>, Box<Term>),
    Join(Box<Term>, Box<Term>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QfFormula {
    Eq(Term, Term),
    Neq(Term, Term),
    And(Box<QfFormula>, Box<QfFormula>),
    Or(Box<QfFormula>, Box<QfFormula>),
    Implies(Box<QfFormula>, Box<QfFormula>),
}

/// Universal closure of a quantifier-free matrix. Variables are listed in
/// order of first occurrence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniversalSentence {
    pub matrix: QfFormula,
    pub variables: Vec<String>,
}

impl UniversalSentence {
    pub fn new(matrix: QfFormula) -> Self {
        let mut variables = Vec::new();
        collect_vars_formula(&matrix, &mut variables);
        UniversalSentence { matrix, variables }
    }
}

fn collect_vars_term(t: &Term, out: &mut Vec<String>) {
    match t {
        Term::Zero | Term::One => {}
        Term::Var(v) => {
            if !out.iter().any(|x| x == v) {
                out.push(v.clone());
            }
        }
        Term::Not(s) => collect_vars_term(s, out),
        Term::Meet(a, b) | Term::Join(a, b) => {
            collect_vars_term(a, out);
            collect_vars_term(b, out);
        }
    }
}

fn collect_vars_formula(f: &QfFormula, out: &mut Vec<String>) {
    match f {
        QfFormula::Eq(a, b) | QfFormula::Neq(a, b) => {
            collect_vars_term(a, out);
            collect_vars_term(b, out);
        }
        QfFormula::And(a, b) | QfFormula::Or(a, b) | QfFormula::Implies(a, b) => {
            collect_vars_formula(a, out);
            collect_vars_formula(b, out);
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer and parser
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Zero,
    One,
    Ident(String),
    Bang,
    Amp,
    Pipe,
    Eq,
    Neq,
    And,
    Or,
    Arrow,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '0' => {
                toks.push((Tok::Zero, i));
                i += 1;
            }
            '1' => {
                toks.push((Tok::One, i));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            '&' => {
                toks.push((Tok::Amp, i));
                i += 1;
            }
            '|' => {
                toks.push((Tok::Pipe, i));
                i += 1;
            }
            '=' => {
                toks.push((Tok::Eq, i));
                i += 1;
            }
            '!' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    toks.push((Tok::Neq, i));
                    i += 2;
                } else {
                    toks.push((Tok::Bang, i));
                    i += 1;
                }
            }
            '-' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'>' {
                    toks.push((Tok::Arrow, i));
                    i += 2;
                } else {
                    return Err(Error::Syntax { pos: i, msg: "expected '->'".into() });
                }
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                let word = &text[start..i];
                toks.push((
                    match word {
                        "and" => Tok::And,
                        "or" => Tok::Or,
                        _ => Tok::Ident(word.to_string()),
                    },
                    start,
                ));
            }
            _ => {
                return Err(Error::Syntax { pos: i, msg: format!("unexpected character '{c}'") });
            }
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|&(_, p)| p).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: &Tok) -> Result<()> {
        if self.peek() == Some(t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Syntax { pos: self.here(), msg: format!("expected {t:?}") })
        }
    }

    fn term(&mut self) -> Result<Term> {
        let mut left = self.term_meet()?;
        while self.peek() == Some(&Tok::Pipe) {
            self.pos += 1;
            let right = self.term_meet()?;
            left = Term::Join(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn term_meet(&mut self) -> Result<Term> {
        let mut left = self.term_unary()?;
        while self.peek() == Some(&Tok::Amp) {
            self.pos += 1;
            let right = self.term_unary()?;
            left = Term::Meet(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn term_unary(&mut self) -> Result<Term> {
        match self.peek() {
            Some(Tok::Bang) => {
                self.pos += 1;
                Ok(Term::Not(Box::new(self.term_unary()?)))
            }
            Some(Tok::Zero) => {
                self.pos += 1;
                Ok(Term::Zero)
            }
            Some(Tok::One) => {
                self.pos += 1;
                Ok(Term::One)
            }
            Some(Tok::Ident(_)) => {
                let Some(Tok::Ident(name)) = self.bump() else { unreachable!() };
                Ok(Term::Var(name))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let t = self.term()?;
                self.expect(&Tok::RParen)?;
                Ok(t)
            }
            _ => Err(Error::Syntax { pos: self.here(), msg: "expected a term".into() }),
        }
    }

    fn formula(&mut self) -> Result<QfFormula> {
        let left = self.formula_or()?;
        if self.peek() == Some(&Tok::Arrow) {
            self.pos += 1;
            let right = self.formula()?; // right associative
            Ok(QfFormula::Implies(Box::new(left), Box::new(right)))
        } else {
            Ok(left)
        }
    }

    fn formula_or(&mut self) -> Result<QfFormula> {
        let mut left = self.formula_and()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            let right = self.formula_and()?;
            left = QfFormula::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn formula_and(&mut self) -> Result<QfFormula> {
        let mut left = self.formula_atom()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            let right = self.formula_atom()?;
            left = QfFormula::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn formula_atom(&mut self) -> Result<QfFormula> {
        // Either an equation/disequation, or a parenthesized formula. A '('
        // may open either one, so try the equation first and rewind.
        let save = self.pos;
        match self.try_equation() {
            Ok(f) => Ok(f),
            Err(eq_err) => {
                self.pos = save;
                if self.peek() == Some(&Tok::LParen) {
                    self.pos += 1;
                    let f = self.formula()?;
                    self.expect(&Tok::RParen)?;
                    Ok(f)
                } else {
                    Err(eq_err)
                }
            }
        }
    }

    fn try_equation(&mut self) -> Result<QfFormula> {
        let left = self.term()?;
        match self.peek() {
            Some(Tok::Eq) => {
                self.pos += 1;
                Ok(QfFormula::Eq(left, self.term()?))
            }
            Some(Tok::Neq) => {
                self.pos += 1;
                Ok(QfFormula::Neq(left, self.term()?))
            }
            _ => Err(Error::Syntax { pos: self.here(), msg: "expected '=' or '!='".into() }),
        }
    }
}

pub fn parse_term(text: &str) -> Result<Term> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, end: text.len() };
    let t = p.term()?;
    if p.pos != p.toks.len() {
        return Err(Error::Syntax { pos: p.here(), msg: "trailing input".into() });
    }
    Ok(t)
}

pub fn parse_formula(text: &str) -> Result<QfFormula> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, end: text.len() };
    let f = p.formula()?;
    if p.pos != p.toks.len() {
        return Err(Error::Syntax { pos: p.here(), msg: "trailing input".into() });
    }
    Ok(f)
}

pub fn parse_sentence(text: &str) -> Result<UniversalSentence> {
    Ok(UniversalSentence::new(parse_formula(text)?))
}

// ---------------------------------------------------------------------------
// Printing (minimal parentheses; reparsing yields the same tree)
// ---------------------------------------------------------------------------

fn fmt_term(t: &Term, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let prec = match t {
        Term::Join(..) => 0,
        Term::Meet(..) => 1,
        Term::Not(..) => 2,
        _ => 3,
    };
    let parens = prec < min_prec;
    if parens {
        write!(f, "(")?;
    }
    match t {
        Term::Zero => write!(f, "0")?,
        Term::One => write!(f, "1")?,
        Term::Var(v) => write!(f, "{v}")?,
        Term::Not(s) => {
            write!(f, "!")?;
            fmt_term(s, 2, f)?;
        }
        Term::Meet(a, b) => {
            fmt_term(a, 1, f)?;
            write!(f, " & ")?;
            fmt_term(b, 2, f)?;
        }
        Term::Join(a, b) => {
            fmt_term(a, 0, f)?;
            write!(f, " | ")?;
            fmt_term(b, 1, f)?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_term(self, 0, f)
    }
}

fn fmt_formula(x: &QfFormula, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let prec = match x {
        QfFormula::Implies(..) => 0,
        QfFormula::Or(..) => 1,
        QfFormula::And(..) => 2,
        _ => 3,
    };
    let parens = prec < min_prec;
    if parens {
        write!(f, "(")?;
    }
    match x {
        QfFormula::Eq(a, b) => write!(f, "{a} = {b}")?,
        QfFormula::Neq(a, b) => write!(f, "{a} != {b}")?,
        QfFormula::And(a, b) => {
            fmt_formula(a, 2, f)?;
            write!(f, " and ")?;
            fmt_formula(b, 3, f)?;
        }
        QfFormula::Or(a, b) => {
            fmt_formula(a, 1, f)?;
            write!(f, " or ")?;
            fmt_formula(b, 2, f)?;
        }
        QfFormula::Implies(a, b) => {
            fmt_formula(a, 1, f)?;
            write!(f, " -> ")?;
            fmt_formula(b, 0, f)?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for QfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_formula(self, 0, f)
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// A variable assignment into a particular algebra, by element index.
pub type Assignment = HashMap<String, usize>;

pub fn eval_term(a: &FinitePdl, t: &Term, v: &Assignment) -> Result<usize> {
    Ok(match t {
        Term::Zero => a.zero(),
        Term::One => a.one(),
        Term::Var(name) => *v
            .get(name)
            .ok_or_else(|| Error::UnboundVariable(name.clone()))?,
        Term::Not(s) => a.neg(eval_term(a, s, v)?),
        Term::Meet(s, u) => a.meet(eval_term(a, s, v)?, eval_term(a, u, v)?),
        Term::Join(s, u) => a.join(eval_term(a, s, v)?, eval_term(a, u, v)?),
    })
}

pub fn eval_formula(a: &FinitePdl, f: &QfFormula, v: &Assignment) -> Result<bool> {
    Ok(match f {
        QfFormula::Eq(s, t) => eval_term(a, s, v)? == eval_term(a, t, v)?,
        QfFormula::Neq(s, t) => eval_term(a, s, v)? != eval_term(a, t, v)?,
        QfFormula::And(x, y) => eval_formula(a, x, v)? && eval_formula(a, y, v)?,
        QfFormula::Or(x, y) => eval_formula(a, x, v)? || eval_formula(a, y, v)?,
        QfFormula::Implies(x, y) => !eval_formula(a, x, v)? || eval_formula(a, y, v)?,
    })
}

/// Terms with variables resolved to slots, for tight evaluation loops.
enum CTerm {
    Zero,
    One,
    Var(usize),
    Not(Box<CTerm>),
    Meet(Box<CTerm>, Box<CTerm>),
    Join(Box<CTerm>, Box<CTerm>),
}

enum CFormula {
    Eq(CTerm, CTerm),
    Neq(CTerm, CTerm),
    And(Box<CFormula>, Box<CFormula>),
    Or(Box<CFormula>, Box<CFormula>),
    Implies(Box<CFormula>, Box<CFormula>),
}

fn compile_term(t: &Term, slots: &HashMap<String, usize>) -> Result<CTerm> {
    Ok(match t {
        Term::Zero => CTerm::Zero,
        Term::One => CTerm::One,
        Term::Var(v) => CTerm::Var(
            *slots
                .get(v)
                .ok_or_else(|| Error::UnboundVariable(v.clone()))?,
        ),
        Term::Not(s) => CTerm::Not(Box::new(compile_term(s, slots)?)),
        Term::Meet(a, b) => {
            CTerm::Meet(Box::new(compile_term(a, slots)?), Box::new(compile_term(b, slots)?))
        }
        Term::Join(a, b) => {
            CTerm::Join(Box::new(compile_term(a, slots)?), Box::new(compile_term(b, slots)?))
        }
    })
}

fn compile_formula(f: &QfFormula, slots: &HashMap<String, usize>) -> Result<CFormula> {
    Ok(match f {
        QfFormula::Eq(a, b) => CFormula::Eq(compile_term(a, slots)?, compile_term(b, slots)?),
        QfFormula::Neq(a, b) => CFormula::Neq(compile_term(a, slots)?, compile_term(b, slots)?),
        QfFormula::And(a, b) => CFormula::And(
            Box::new(compile_formula(a, slots)?),
            Box::new(compile_formula(b, slots)?),
        ),
        QfFormula::Or(a, b) => CFormula::Or(
            Box::new(compile_formula(a, slots)?),
            Box::new(compile_formula(b, slots)?),
        ),
        QfFormula::Implies(a, b) => CFormula::Implies(
            Box::new(compile_formula(a, slots)?),
            Box::new(compile_formula(b, slots)?),
        ),
    })
}

fn ceval_term(a: &FinitePdl, t: &CTerm, v: &[usize]) -> usize {
    match t {
        CTerm::Zero => a.zero(),
        CTerm::One => a.one(),
        CTerm::Var(i) => v[*i],
        CTerm::Not(s) => a.neg(ceval_term(a, s, v)),
        CTerm::Meet(s, u) => a.meet(ceval_term(a, s, v), ceval_term(a, u, v)),
        CTerm::Join(s, u) => a.join(ceval_term(a, s, v), ceval_term(a, u, v)),
    }
}

fn ceval_formula(a: &FinitePdl, f: &CFormula, v: &[usize]) -> bool {
    match f {
        CFormula::Eq(s, t) => ceval_term(a, s, v) == ceval_term(a, t, v),
        CFormula::Neq(s, t) => ceval_term(a, s, v) != ceval_term(a, t, v),
        CFormula::And(x, y) => ceval_formula(a, x, v) && ceval_formula(a, y, v),
        CFormula::Or(x, y) => ceval_formula(a, x, v) || ceval_formula(a, y, v),
        CFormula::Implies(x, y) => !ceval_formula(a, x, v) || ceval_formula(a, y, v),
    }
}

/// Outcome of a bounded counterexample search.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    /// Assignment (in variable order) falsifying the matrix, if one was met.
    pub counterexample: Option<Vec<usize>>,
    /// Whether the whole assignment space was scanned.
    pub complete: bool,
}

/// Scan assignments in odometer order (first variable fastest) for one
/// falsifying the matrix, stopping at the evaluation budget.
pub fn search_counterexample(
    a: &FinitePdl,
    s: &UniversalSentence,
    caps: &Caps,
) -> Result<SearchOutcome> {
    let k = s.variables.len();
    let slots: HashMap<String, usize> =
        s.variables.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
    let matrix = compile_formula(&s.matrix, &slots)?;
    let mut v = vec![0usize; k];
    let mut used: u64 = 0;
    loop {
        used += 1;
        if used > caps.eval_budget {
            return Ok(SearchOutcome { counterexample: None, complete: false });
        }
        if !ceval_formula(a, &matrix, &v) {
            return Ok(SearchOutcome { counterexample: Some(v), complete: true });
        }
        let mut i = 0;
        loop {
            if i == k {
                return Ok(SearchOutcome { counterexample: None, complete: true });
            }
            v[i] += 1;
            if v[i] < a.len() {
                break;
            }
            v[i] = 0;
            i += 1;
        }
    }
}

/// Whether the matrix holds under every assignment.
pub fn holds_universal(a: &FinitePdl, s: &UniversalSentence, caps: &Caps) -> Result<bool> {
    let out = search_counterexample(a, s, caps)?;
    if out.counterexample.is_some() {
        return Ok(false);
    }
    if !out.complete {
        return Err(Error::BudgetExceeded("holds_universal".into()));
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Atomic diagrams and the embedding test
// ---------------------------------------------------------------------------

fn and_fold(mut fs: Vec<QfFormula>) -> QfFormula {
    let first = fs.remove(0);
    fs.into_iter()
        .fold(first, |acc, f| QfFormula::And(Box::new(acc), Box::new(f)))
}

fn or_fold(mut fs: Vec<QfFormula>) -> QfFormula {
    let first = fs.remove(0);
    fs.into_iter()
        .fold(first, |acc, f| QfFormula::Or(Box::new(acc), Box::new(f)))
}

fn meet_fold(ts: Vec<Term>) -> Term {
    let mut it = ts.into_iter();
    match it.next() {
        None => Term::One,
        Some(first) => it.fold(first, |acc, t| Term::Meet(Box::new(acc), Box::new(t))),
    }
}

fn join_fold(ts: Vec<Term>) -> Term {
    let mut it = ts.into_iter();
    match it.next() {
        None => Term::Zero,
        Some(first) => it.fold(first, |acc, t| Term::Join(Box::new(acc), Box::new(t))),
    }
}

fn xvar(i: usize) -> Term {
    Term::Var(format!("x{i}"))
}

/// The atomic diagram of `A`: one variable `x{i+1}` per element (canonical
/// order), all operation-table equations, and all pairwise disequations.
pub fn diagram(a: &FinitePdl) -> QfFormula {
    let n = a.len();
    let mut lits = Vec::new();
    lits.push(QfFormula::Eq(Term::Zero, xvar(a.zero() + 1)));
    lits.push(QfFormula::Eq(Term::One, xvar(a.one() + 1)));
    for i in 0..n {
        lits.push(QfFormula::Eq(
            Term::Not(Box::new(xvar(i + 1))),
            xvar(a.neg(i) + 1),
        ));
        for j in 0..n {
            lits.push(QfFormula::Eq(
                Term::Meet(Box::new(xvar(i + 1)), Box::new(xvar(j + 1))),
                xvar(a.meet(i, j) + 1),
            ));
            lits.push(QfFormula::Eq(
                Term::Join(Box::new(xvar(i + 1)), Box::new(xvar(j + 1))),
                xvar(a.join(i, j) + 1),
            ));
        }
    }
    for m in 0..n {
        for k in m + 1..n {
            lits.push(QfFormula::Neq(xvar(m + 1), xvar(k + 1)));
        }
    }
    and_fold(lits)
}

/// Whether `B` satisfies the existential closure of `diagram(A)`, i.e.
/// whether `A` embeds into `B`.
///
/// Satisfying assignments of the diagram are exactly injective
/// homomorphisms, so the complete search runs over images of a generating
/// set of `A` and extends each choice by operation closure.
pub fn embedding_via_diagram(a: &FinitePdl, b: &FinitePdl, caps: &Caps) -> Result<bool> {
    let gens = small_generating_set(a);
    let mut images = vec![usize::MAX; gens.len()];
    let mut nodes: u64 = 0;
    try_gen_images(a, b, &gens, 0, &mut images, &mut nodes, caps)
}

/// A small generating set, found by growing subset size.
fn small_generating_set(a: &FinitePdl) -> Vec<usize> {
    for size in 0..=a.len() {
        let mut acc: Vec<usize> = Vec::new();
        if let Some(g) = find_gen_set(a, size, 0, &mut acc) {
            return g;
        }
    }
    unreachable!("the full element set generates")
}

fn find_gen_set(a: &FinitePdl, size: usize, from: usize, acc: &mut Vec<usize>) -> Option<Vec<usize>> {
    if acc.len() == size {
        if crate::algebra::closure_family(a, acc).len() == a.len() {
            return Some(acc.clone());
        }
        return None;
    }
    for i in from..a.len() {
        acc.push(i);
        if let Some(g) = find_gen_set(a, size, i + 1, acc) {
            return Some(g);
        }
        acc.pop();
    }
    None
}

fn try_gen_images(
    a: &FinitePdl,
    b: &FinitePdl,
    gens: &[usize],
    depth: usize,
    images: &mut Vec<usize>,
    nodes: &mut u64,
    caps: &Caps,
) -> Result<bool> {
    if depth == gens.len() {
        return Ok(extends_to_embedding(a, b, gens, images));
    }
    for y in 0..b.len() {
        *nodes += 1;
        if *nodes > caps.search_budget {
            return Err(Error::BudgetExceeded("embedding_via_diagram".into()));
        }
        images[depth] = y;
        if try_gen_images(a, b, gens, depth + 1, images, nodes, caps)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Close the pairs `(gen, image)` under the operations in both coordinates;
/// the diagram is satisfiable with these generator images iff the closure is
/// a single-valued injective map.
fn extends_to_embedding(a: &FinitePdl, b: &FinitePdl, gens: &[usize], images: &[usize]) -> bool {
    let mut img = vec![usize::MAX; a.len()];
    img[a.zero()] = b.zero();
    img[a.one()] = b.one();
    for (&g, &i) in gens.iter().zip(images) {
        if img[g] != usize::MAX && img[g] != i {
            return false;
        }
        img[g] = i;
    }
    loop {
        let known: Vec<usize> = (0..a.len()).filter(|&i| img[i] != usize::MAX).collect();
        let mut changed = false;
        let set = |img: &mut Vec<usize>, at: usize, val: usize, changed: &mut bool| -> bool {
            if img[at] == usize::MAX {
                img[at] = val;
                *changed = true;
                true
            } else {
                img[at] == val
            }
        };
        for &i in &known {
            let ni = b.neg(img[i]);
            if !set(&mut img, a.neg(i), ni, &mut changed) {
                return false;
            }
            for &j in &known {
                let (mv, jv) = (b.meet(img[i], img[j]), b.join(img[i], img[j]));
                if !set(&mut img, a.meet(i, j), mv, &mut changed) {
                    return false;
                }
                if !set(&mut img, a.join(i, j), jv, &mut changed) {
                    return false;
                }
            }
        }
        if !changed {
            break;
        }
    }
    if img.iter().any(|&i| i == usize::MAX) {
        return false;
    }
    let mut seen = vec![false; b.len()];
    for &i in &img {
        if seen[i] {
            return false;
        }
        seen[i] = true;
    }
    crate::algebra::is_embedding(a, b, &img)
}

// ---------------------------------------------------------------------------
// The formula families
// ---------------------------------------------------------------------------

/// An element of `S(n)`: a pair `⟨L, 𝒯⟩` with `𝒯` a nonempty set of subsets
/// of `{1..n}` and `L ⊆ ⋂𝒯`. `l` is a bitmask over `{1..n}` (bit `i-1` for
/// `i`); `t` is a bitmask over subset masks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SPair {
    pub l: u32,
    pub t: u32,
}

/// The two readings of the side condition on `L`: the literal text requires
/// `L` nonempty, which the atom/join-irreducible counts refute; the
/// corrected reading allows `L = ∅`. The corrected reading is the default
/// everywhere; the literal one is kept for the gating check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SPairReading {
    Literal,
    Corrected,
}

impl SPair {
    pub fn leq(self, other: SPair) -> bool {
        // ⟨L,𝒯⟩ ≤ ⟨L',𝒯'⟩ ⟺ L ⊇ L' and 𝒯 ⊆ 𝒯'
        other.l & !self.l == 0 && self.t & !other.t == 0
    }

    pub fn lt(self, other: SPair) -> bool {
        self.leq(other) && self != other
    }
}

/// `S(n)` in canonical order: family bitmask ascending, then `L` ascending.
pub fn s_pairs(n: usize, reading: SPairReading) -> Vec<SPair> {
    let subsets = 1u32 << n;
    let mut out = Vec::new();
    for family in 1u32..1 << subsets {
        let mut cap = (1u32 << n) - 1;
        for t in 0..subsets {
            if family >> t & 1 == 1 {
                cap &= t;
            }
        }
        let mut l = 0u32;
        loop {
            if !(reading == SPairReading::Literal && l == 0) {
                out.push(SPair { l, t: family });
            }
            if l == cap {
                break;
            }
            l = (l.wrapping_sub(cap)) & cap;
        }
    }
    out
}

/// `a_T(x⃗) = ⋀_{i∈T} x_i ∧ ⋀_{i∉T} ¬x_i` (empty meet rendered as 1).
pub fn a_term(n: usize, t_mask: u32) -> Term {
    let mut parts = Vec::new();
    for i in 1..=n {
        if t_mask >> (i - 1) & 1 == 1 {
            parts.push(xvar(i));
        }
    }
    for i in 1..=n {
        if t_mask >> (i - 1) & 1 == 0 {
            parts.push(Term::Not(Box::new(xvar(i))));
        }
    }
    meet_fold(parts)
}

/// `p_L^𝒯(x⃗) = ⋀_{i∈L} x_i ∧ ¬¬(⋁_{T∈𝒯} a_T(x⃗))`, with the join over `𝒯`
/// in decreasing subset-mask order.
pub fn p_term(n: usize, s: SPair) -> Term {
    let mut disj = Vec::new();
    for t in (0..1u32 << n).rev() {
        if s.t >> t & 1 == 1 {
            disj.push(a_term(n, t));
        }
    }
    let nn = Term::Not(Box::new(Term::Not(Box::new(join_fold(disj)))));
    let mut parts = Vec::new();
    for i in 1..=n {
        if s.l >> (i - 1) & 1 == 1 {
            parts.push(xvar(i));
        }
    }
    if parts.is_empty() {
        nn
    } else {
        Term::Meet(Box::new(meet_fold(parts)), Box::new(nn))
    }
}

/// `At_{t,n} = t ≠ 0 ⊓ ⨆_{T∈℘(n)} t = a_T`, disjuncts in decreasing
/// subset-mask order.
pub fn gen_at(t: &Term, n: usize) -> QfFormula {
    let disj = (0..1u32 << n)
        .rev()
        .map(|mask| QfFormula::Eq(t.clone(), a_term(n, mask)))
        .collect();
    QfFormula::And(
        Box::new(QfFormula::Neq(t.clone(), Term::Zero)),
        Box::new(or_fold(disj)),
    )
}

/// `Jirr_{t,n} = ⨆_{s∈S(n)} (t = p_s ⊓ t ≠ ⋁{p_{s'} : s' < s})`.
pub fn gen_jirr(t: &Term, n: usize, reading: SPairReading) -> QfFormula {
    let pairs = s_pairs(n, reading);
    let disj = pairs
        .iter()
        .map(|&s| {
            let smaller: Vec<Term> = pairs
                .iter()
                .filter(|&&s2| s2.lt(s))
                .map(|&s2| p_term(n, s2))
                .collect();
            QfFormula::And(
                Box::new(QfFormula::Eq(t.clone(), p_term(n, s))),
                Box::new(QfFormula::Neq(t.clone(), join_fold(smaller))),
            )
        })
        .collect();
    or_fold(disj)
}

fn leq_atom(lhs: Term, rhs: Term) -> QfFormula {
    // the sentence language has no order predicate; `s ≤ t` is lowered to
    // the equation `s & t = s`
    QfFormula::Eq(Term::Meet(Box::new(lhs.clone()), Box::new(rhs)), lhs)
}

fn nleq_atom(lhs: Term, rhs: Term) -> QfFormula {
    QfFormula::Neq(Term::Meet(Box::new(lhs.clone()), Box::new(rhs)), lhs)
}

fn yvar(i: usize) -> Term {
    Term::Var(format!("y{i}"))
}

fn zvar(i: usize) -> Term {
    Term::Var(format!("z{i}"))
}

/// `P_{n,m,h} = ⨅_{i≤h} y_i ≤ x_1 ⊓ ⨅_{h<j≤m} y_j ≰ x_1`.
pub fn gen_p(_n: usize, m: usize, h: usize) -> QfFormula {
    let mut lits = Vec::new();
    for i in 1..=h {
        lits.push(leq_atom(yvar(i), xvar(1)));
    }
    for j in h + 1..=m {
        lits.push(nleq_atom(yvar(j), xvar(1)));
    }
    and_fold(lits)
}

/// `Q_{n,m,h}` over `z_1..z_{2^h-1}`, with the bijection
/// `f(i) = the subset of {1..h} with bitmask i` (increasing bitmask order).
pub fn gen_q(_n: usize, m: usize, h: usize) -> QfFormula {
    let k = (1usize << h) - 1;
    let f = |i: usize| i as u32; // bitmask over {1..h}
    let mut lits = Vec::new();
    for i in 1..=k {
        lits.push(leq_atom(zvar(i), xvar(1)));
    }
    for i in 1..=k {
        for j in 1..=k {
            if f(i) & !f(j) == 0 && i != j {
                lits.push(leq_atom(zvar(i), zvar(j)));
            }
        }
    }
    for i in 1..=k {
        for j in 1..=m {
            if j <= h && f(i) >> (j - 1) & 1 == 1 {
                lits.push(leq_atom(yvar(j), zvar(i)));
            } else {
                lits.push(nleq_atom(yvar(j), zvar(i)));
            }
        }
    }
    and_fold(lits)
}

/// `DN(x,y,z) = ¬¬x = y ∨ z ⇒ (y = ¬¬x ⊔ z = ¬¬x)`.
pub fn gen_dn() -> QfFormula {
    let nn = |v: &str| Term::Not(Box::new(Term::Not(Box::new(Term::Var(v.into())))));
    QfFormula::Implies(
        Box::new(QfFormula::Eq(
            nn("x"),
            Term::Join(Box::new(Term::Var("y".into())), Box::new(Term::Var("z".into()))),
        )),
        Box::new(QfFormula::Or(
            Box::new(QfFormula::Eq(Term::Var("y".into()), nn("x"))),
            Box::new(QfFormula::Eq(Term::Var("z".into()), nn("x"))),
        )),
    )
}

fn subst_term(t: &Term, map: &HashMap<String, Term>) -> Term {
    match t {
        Term::Var(v) => map.get(v).cloned().unwrap_or_else(|| t.clone()),
        Term::Zero | Term::One => t.clone(),
        Term::Not(s) => Term::Not(Box::new(subst_term(s, map))),
        Term::Meet(a, b) => {
            Term::Meet(Box::new(subst_term(a, map)), Box::new(subst_term(b, map)))
        }
        Term::Join(a, b) => {
            Term::Join(Box::new(subst_term(a, map)), Box::new(subst_term(b, map)))
        }
    }
}

fn subst_formula(f: &QfFormula, map: &HashMap<String, Term>) -> QfFormula {
    match f {
        QfFormula::Eq(a, b) => QfFormula::Eq(subst_term(a, map), subst_term(b, map)),
        QfFormula::Neq(a, b) => QfFormula::Neq(subst_term(a, map), subst_term(b, map)),
        QfFormula::And(a, b) => QfFormula::And(
            Box::new(subst_formula(a, map)),
            Box::new(subst_formula(b, map)),
        ),
        QfFormula::Or(a, b) => QfFormula::Or(
            Box::new(subst_formula(a, map)),
            Box::new(subst_formula(b, map)),
        ),
        QfFormula::Implies(a, b) => QfFormula::Implies(
            Box::new(subst_formula(a, map)),
            Box::new(subst_formula(b, map)),
        ),
    }
}

fn term_nodes(t: &Term) -> u64 {
    match t {
        Term::Zero | Term::One | Term::Var(_) => 1,
        Term::Not(s) => 1 + term_nodes(s),
        Term::Meet(a, b) | Term::Join(a, b) => 1 + term_nodes(a) + term_nodes(b),
    }
}

fn formula_nodes(f: &QfFormula) -> u64 {
    match f {
        QfFormula::Eq(a, b) | QfFormula::Neq(a, b) => 1 + term_nodes(a) + term_nodes(b),
        QfFormula::And(a, b) | QfFormula::Or(a, b) | QfFormula::Implies(a, b) => {
            1 + formula_nodes(a) + formula_nodes(b)
        }
    }
}

/// `F_{n,m,k}(P, Q) = A ⇒ B` from the definition: the antecedent constrains
/// `x_1` to be join-irreducible and the `y_i` to be atoms of the generated
/// subalgebra; the consequent is the disjunction over `S(n+m)^k` of `Q` with
/// each `z_j` replaced by the corresponding `p`-term.
///
/// The consequent's size is `|S(n+m)|^k` disjuncts; the `node_budget` bounds
/// the materialized tree (use [`eval_fs`] for evaluation without
/// materializing).
pub fn gen_f(
    n: usize,
    m: usize,
    k: usize,
    p: &QfFormula,
    q: &QfFormula,
    reading: SPairReading,
    node_budget: u64,
) -> Result<QfFormula> {
    let nm = n + m;
    // the antecedent and consequent speak about the concatenated tuple
    // x1..xn,y1..ym; rename slots accordingly for the generated subformulas
    let concat: HashMap<String, Term> = (1..=nm)
        .map(|i| {
            let orig = format!("x{i}");
            let new = if i <= n { xvar(i) } else { yvar(i - n) };
            (orig, new)
        })
        .collect();
    let jirr_x1 = subst_formula(&gen_jirr(&xvar(1), nm, reading), &concat);
    let pairs = s_pairs(nm, reading);
    // cost precheck before building the big disjunction
    let jirr_cost = formula_nodes(&jirr_x1);
    let per_disjunct = formula_nodes(q) + k as u64 * jirr_cost;
    let disjuncts = (pairs.len() as u64)
        .checked_pow(k as u32)
        .ok_or_else(|| Error::BudgetExceeded("gen_f consequent".into()))?;
    if disjuncts.checked_mul(per_disjunct).is_none_or(|c| c > node_budget) {
        return Err(Error::BudgetExceeded(format!(
            "gen_f consequent needs ~{disjuncts} disjuncts of ~{per_disjunct} nodes"
        )));
    }
    let mut ante = vec![jirr_x1];
    for i in 1..=m {
        ante.push(subst_formula(&gen_at(&xvar(n + i), nm), &concat));
    }
    ante.push(p.clone());
    let a = and_fold(ante);

    let mut disj = Vec::new();
    let mut idx = vec![0usize; k];
    loop {
        let subst: HashMap<String, Term> = (0..k)
            .map(|j| {
                (format!("z{}", j + 1), subst_term(&p_term(nm, pairs[idx[j]]), &concat))
            })
            .collect();
        let mut parts = vec![subst_formula(q, &subst)];
        for j in 0..k {
            let pj = subst_term(&p_term(nm, pairs[idx[j]]), &concat);
            parts.push(subst_formula(&gen_jirr(&pj, nm, reading), &concat));
        }
        disj.push(and_fold(parts));
        let mut j = 0;
        loop {
            if j == k {
                let b = or_fold(disj);
                return Ok(QfFormula::Implies(Box::new(a), Box::new(b)));
            }
            idx[j] += 1;
            if idx[j] < pairs.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// `FS_{n,m,2^h-1}` = `F` applied to `P_{n,m,h}` and `Q_{n,m,h}`.
pub fn gen_fs(
    n: usize,
    m: usize,
    h: usize,
    reading: SPairReading,
    node_budget: u64,
) -> Result<QfFormula> {
    gen_f(n, m, (1 << h) - 1, &gen_p(n, m, h), &gen_q(n, m, h), reading, node_budget)
}

// ---------------------------------------------------------------------------
// Semantic evaluation of FS without materializing the tree
// ---------------------------------------------------------------------------

/// Per-assignment values needed to evaluate the `At`/`Jirr` formulas and the
/// `FS` family semantically: the values of all `a_T` and `p_L^𝒯` terms at
/// the tuple, plus the value sets picked out by the two formulas.
pub struct TupleValues {
    pub a_vals: Vec<usize>,
    pub p_vals: Vec<usize>,
    /// Values `v` satisfying `Jirr_{t,n}` whenever `t` evaluates to `v`.
    pub jirr_vals: Vec<usize>,
    /// Values `v ≠ 0` satisfying `At_{t,n}` whenever `t` evaluates to `v`.
    pub at_vals: Vec<usize>,
}

pub fn tuple_values(a: &FinitePdl, tuple: &[usize], reading: SPairReading) -> TupleValues {
    let n = tuple.len();
    let a_vals: Vec<usize> = (0..1u32 << n)
        .map(|mask| {
            let mut acc = a.one();
            for (i, &e) in tuple.iter().enumerate() {
                let part = if mask >> i & 1 == 1 { e } else { a.neg(e) };
                acc = a.meet(acc, part);
            }
            acc
        })
        .collect();
    let pairs = s_pairs(n, reading);
    let p_vals: Vec<usize> = pairs
        .iter()
        .map(|s| {
            let mut join = a.zero();
            for t in 0..1u32 << n {
                if s.t >> t & 1 == 1 {
                    join = a.join(join, a_vals[t as usize]);
                }
            }
            let mut acc = a.neg(a.neg(join));
            for (i, &e) in tuple.iter().enumerate() {
                if s.l >> i & 1 == 1 {
                    acc = a.meet(acc, e);
                }
            }
            acc
        })
        .collect();
    let mut jirr_vals: Vec<usize> = pairs
        .iter()
        .enumerate()
        .filter(|&(i, &s)| {
            let mut join = a.zero();
            for (j, &s2) in pairs.iter().enumerate() {
                if s2.lt(s) {
                    join = a.join(join, p_vals[j]);
                }
            }
            join != p_vals[i]
        })
        .map(|(i, _)| p_vals[i])
        .collect();
    jirr_vals.sort_unstable();
    jirr_vals.dedup();
    let mut at_vals: Vec<usize> =
        a_vals.iter().copied().filter(|&v| v != a.zero()).collect();
    at_vals.sort_unstable();
    at_vals.dedup();
    TupleValues { a_vals, p_vals, jirr_vals, at_vals }
}

/// Evaluate `FS_{n,m,2^h-1}` at a tuple without building the formula tree.
/// This computes the same Boolean as evaluating `gen_fs(n,m,h)`, disjunct by
/// disjunct, but shares the `p`-term values across the `S(n+m)^k` tuples.
pub fn eval_fs(
    a: &FinitePdl,
    n: usize,
    m: usize,
    h: usize,
    xs: &[usize],
    ys: &[usize],
    reading: SPairReading,
) -> bool {
    assert_eq!(xs.len(), n);
    assert_eq!(ys.len(), m);
    let tuple: Vec<usize> = xs.iter().chain(ys).copied().collect();
    let tv = tuple_values(a, &tuple, reading);
    // antecedent
    let ante = tv.jirr_vals.contains(&xs[0])
        && ys.iter().all(|y| tv.at_vals.contains(y))
        && (1..=m).all(|i| {
            let below = a.leq(ys[i - 1], xs[0]);
            if i <= h {
                below
            } else {
                !below
            }
        });
    if !ante {
        return true;
    }
    // consequent: some tuple of Jirr-formula values satisfies Q
    let k = (1usize << h) - 1;
    let f = |i: usize| i as u32;
    let mut idx = vec![0usize; k];
    if tv.jirr_vals.is_empty() {
        return false;
    }
    loop {
        let c: Vec<usize> = idx.iter().map(|&i| tv.jirr_vals[i]).collect();
        let q_ok = (0..k).all(|i| a.leq(c[i], xs[0]))
            && (0..k).all(|i| {
                (0..k).all(|j| i == j || f(i + 1) & !f(j + 1) != 0 || a.leq(c[i], c[j]))
            })
            && (0..k).all(|i| {
                (1..=m).all(|j| {
                    let wants = j <= h && f(i + 1) >> (j - 1) & 1 == 1;
                    a.leq(ys[j - 1], c[i]) == wants
                })
            });
        if q_ok {
            return true;
        }
        let mut j = 0;
        loop {
            if j == k {
                return false;
            }
            idx[j] += 1;
            if idx[j] < tv.jirr_vals.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// The subalgebra-level right-hand side of the correspondence: whether
/// "`x_1 ∈ Jirr(B)`, all `y_i ∈ At(B)`, and `B ⊨ P` imply some
/// `c⃗ ∈ Jirr(B)^k` with `B ⊨ Q`", for `B` the subalgebra generated by the
/// tuple. Computed by brute force, independently of the formula machinery.
pub fn fs_rhs_oracle(a: &FinitePdl, h: usize, xs: &[usize], ys: &[usize]) -> bool {
    let m = ys.len();
    let tuple: Vec<usize> = xs.iter().chain(ys).copied().collect();
    let family = crate::algebra::closure_family(a, &tuple);
    let is_in = |v: usize| family.binary_search(&v).is_ok();
    debug_assert!(tuple.iter().all(|&t| is_in(t)));
    let jirr_b: Vec<usize> = family
        .iter()
        .copied()
        .filter(|&v| {
            v != a.zero()
                && !family.iter().any(|&u| {
                    u != v
                        && a.leq(u, v)
                        && family.iter().any(|&w| w != v && a.leq(w, v) && a.join(u, w) == v)
                })
        })
        .collect();
    let at_b: Vec<usize> = family
        .iter()
        .copied()
        .filter(|&v| {
            v != a.zero() && !family.iter().any(|&u| u != v && u != a.zero() && a.leq(u, v))
        })
        .collect();
    let ante = jirr_b.contains(&xs[0])
        && ys.iter().all(|y| at_b.contains(y))
        && (1..=m).all(|i| a.leq(ys[i - 1], xs[0]) == (i <= h));
    if !ante {
        return true;
    }
    let k = (1usize << h) - 1;
    let f = |i: usize| i as u32;
    if jirr_b.is_empty() {
        return false;
    }
    let mut idx = vec![0usize; k];
    loop {
        let c: Vec<usize> = idx.iter().map(|&i| jirr_b[i]).collect();
        let q_ok = (0..k).all(|i| a.leq(c[i], xs[0]))
            && (0..k).all(|i| {
                (0..k).all(|j| i == j || f(i + 1) & !f(j + 1) != 0 || a.leq(c[i], c[j]))
            })
            && (0..k).all(|i| {
                (1..=m).all(|j| {
                    let wants = j <= h && f(i + 1) >> (j - 1) & 1 == 1;
                    a.leq(ys[j - 1], c[i]) == wants
                })
            });
        if q_ok {
            return true;
        }
        let mut j = 0;
        loop {
            if j == k {
                return false;
            }
            idx[j] += 1;
            if idx[j] < jirr_b.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}
