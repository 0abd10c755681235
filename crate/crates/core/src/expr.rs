//! Arithmetic expressions for config-defined fields.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?          right-associative
//! atom  := number | name | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! Names are `x0`…`x4`, `t`, `m`, `pi` and `e`; functions are `sin cos tan
//! sinh cosh tanh exp log sqrt abs`. Error offsets are 1-based byte positions.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Highest coordinate index accepted in expressions (`x0`…`x4`).
pub const MAX_COORD: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    const ALL: [Func; 10] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Sinh => v.sinh(),
            Func::Cosh => v.cosh(),
            Func::Tanh => v.tanh(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Var {
    X(usize),
    T,
    M,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub enum Node {
    Num(f64),
    Var(Var),
    Pi,
    E,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// A parsed expression. Equality compares structure and ignores source offsets.
#[derive(Debug, Clone, Serialize)]
pub struct Expr {
    pub node: Node,
    /// 1-based byte offset of the token that produced this node.
    pub offset: usize,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        match (&self.node, &other.node) {
            (Node::Num(a), Node::Num(b)) => a.to_bits() == b.to_bits(),
            (Node::Var(a), Node::Var(b)) => a == b,
            (Node::Pi, Node::Pi) | (Node::E, Node::E) => true,
            (Node::Neg(a), Node::Neg(b)) => a == b,
            (Node::Bin(o, a, b), Node::Bin(p, c, d)) => o == p && a == c && b == d,
            (Node::Call(f, a), Node::Call(g, b)) => f == g && a == b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {msg}")]
    Syntax { offset: usize, msg: String },
    #[error("unknown identifier '{name}' at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("domain error at offset {offset}: {msg}")]
    Domain { offset: usize, msg: String },
    #[error("unbound variable {name} at offset {offset}")]
    Unbound { offset: usize, name: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    Num(f64),
    Ident,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    /// Next token, its 1-based offset and its text.
    fn next(&mut self) -> Result<(Tok, usize, &'a str), ExprError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let Some(c) = rest.chars().next() else {
            return Ok((Tok::End, start + 1, ""));
        };
        let single = |t| Ok((t, start + 1, &rest[..1]));
        let out = match c {
            '+' => single(Tok::Plus),
            '-' => single(Tok::Minus),
            '*' => single(Tok::Star),
            '/' => single(Tok::Slash),
            '^' => single(Tok::Caret),
            '(' => single(Tok::LParen),
            ')' => single(Tok::RParen),
            c if c.is_ascii_digit() || c == '.' => {
                let len = number_len(rest);
                let text = &rest[..len];
                let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    offset: start + 1,
                    msg: format!("malformed number '{text}'"),
                })?;
                self.pos += len;
                return Ok((Tok::Num(v), start + 1, text));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let len = rest
                    .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                    .unwrap_or(rest.len());
                self.pos += len;
                return Ok((Tok::Ident, start + 1, &rest[..len]));
            }
            other => Err(ExprError::Syntax {
                offset: start + 1,
                msg: format!("unexpected character '{other}'"),
            }),
        };
        self.pos += 1;
        out
    }
}

/// Length of the numeric literal at the start of `s`: digits, optional
/// fraction, optional exponent.
fn number_len(s: &str) -> usize {
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    if i < b.len() && b[i] == b'.' {
        i += 1;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        if j < b.len() && b[j].is_ascii_digit() {
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    i
}

struct Parser<'a> {
    lex: Lexer<'a>,
    tok: Tok,
    offset: usize,
    text: &'a str,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ExprError> {
        let (t, o, s) = self.lex.next()?;
        self.tok = t;
        self.offset = o;
        self.text = s;
        Ok(())
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ExprError> {
        if self.tok != t {
            return Err(self.unexpected(what));
        }
        self.bump()
    }

    fn unexpected(&self, what: &str) -> ExprError {
        let found = if self.tok == Tok::End {
            "end of input".to_string()
        } else {
            format!("'{}'", self.text)
        };
        ExprError::Syntax {
            offset: self.offset,
            msg: format!("expected {what}, found {found}"),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let offset = self.offset;
            self.bump()?;
            let rhs = self.term()?;
            lhs = Expr {
                node: Node::Bin(op, Box::new(lhs), Box::new(rhs)),
                offset,
            };
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            let offset = self.offset;
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Expr {
                node: Node::Bin(op, Box::new(lhs), Box::new(rhs)),
                offset,
            };
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.tok == Tok::Minus {
            let offset = self.offset;
            self.bump()?;
            let inner = self.unary()?;
            return Ok(Expr {
                node: Node::Neg(Box::new(inner)),
                offset,
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.tok != Tok::Caret {
            return Ok(base);
        }
        let offset = self.offset;
        self.bump()?;
        let exp = self.unary()?;
        Ok(Expr {
            node: Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)),
            offset,
        })
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let offset = self.offset;
        match self.tok {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr {
                    node: Node::Num(v),
                    offset,
                })
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Tok::Ident => {
                let name = self.text;
                self.bump()?;
                if let Some(f) = Func::from_name(name) {
                    self.expect(Tok::LParen, &format!("'(' after {name}"))?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "')'")?;
                    return Ok(Expr {
                        node: Node::Call(f, Box::new(arg)),
                        offset,
                    });
                }
                let node = match name {
                    "pi" => Node::Pi,
                    "e" => Node::E,
                    "t" => Node::Var(Var::T),
                    "m" => Node::Var(Var::M),
                    _ => match coord_index(name) {
                        Some(i) => Node::Var(Var::X(i)),
                        None => {
                            return Err(ExprError::UnknownIdentifier {
                                offset,
                                name: name.to_string(),
                            })
                        }
                    },
                };
                Ok(Expr { node, offset })
            }
            _ => Err(self.unexpected("a number, name or '('")),
        }
    }
}

fn coord_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.len() != 1 {
        return None;
    }
    let i: usize = digits.parse().ok()?;
    (i <= MAX_COORD).then_some(i)
}

pub fn parse(src: &str) -> Result<Expr, ExprError> {
    let mut p = Parser {
        lex: Lexer { src, pos: 0 },
        tok: Tok::End,
        offset: 1,
        text: "",
    };
    p.bump()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(e)
}

/// Values bound to the free variables during evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Bindings<'a> {
    pub x: &'a [f64],
    pub t: Option<f64>,
    pub m: Option<f64>,
}

impl Expr {
    pub fn eval(&self, x: &[f64], m: f64) -> Result<f64, ExprError> {
        self.eval_with(&Bindings {
            x,
            t: None,
            m: Some(m),
        })
    }

    pub fn eval_with(&self, b: &Bindings) -> Result<f64, ExprError> {
        let domain = |msg: String| ExprError::Domain {
            offset: self.offset,
            msg,
        };
        let v = match &self.node {
            Node::Num(v) => *v,
            Node::Pi => std::f64::consts::PI,
            Node::E => std::f64::consts::E,
            Node::Var(var) => {
                let val = match var {
                    Var::X(i) => b.x.get(*i).copied(),
                    Var::T => b.t,
                    Var::M => b.m,
                };
                val.ok_or_else(|| ExprError::Unbound {
                    offset: self.offset,
                    name: var_name(*var),
                })?
            }
            Node::Neg(a) => -a.eval_with(b)?,
            Node::Call(f, a) => {
                let v = a.eval_with(b)?;
                match f {
                    Func::Log if v <= 0.0 => {
                        return Err(domain(format!("log of non-positive value {v}")))
                    }
                    Func::Sqrt if v < 0.0 => {
                        return Err(domain(format!("sqrt of negative value {v}")))
                    }
                    _ => {}
                }
                f.apply(v)
            }
            Node::Bin(op, l, r) => {
                let a = l.eval_with(b)?;
                let c = r.eval_with(b)?;
                match op {
                    BinOp::Add => a + c,
                    BinOp::Sub => a - c,
                    BinOp::Mul => a * c,
                    BinOp::Div => {
                        if c == 0.0 {
                            return Err(domain("division by zero".into()));
                        }
                        a / c
                    }
                    BinOp::Pow => {
                        pow(a, c).ok_or_else(|| domain(format!("{a}^{c} is not real")))?
                    }
                }
            }
        };
        if !v.is_finite() {
            return Err(domain(format!("non-finite result {v}")));
        }
        Ok(v)
    }

    /// Coordinate indices used, and whether `t` and `m` occur.
    pub fn free_vars(&self) -> (Vec<usize>, bool, bool) {
        let mut xs = Vec::new();
        let (mut t, mut m) = (false, false);
        self.visit(&mut |e| {
            if let Node::Var(v) = &e.node {
                match v {
                    Var::X(i) => xs.push(*i),
                    Var::T => t = true,
                    Var::M => m = true,
                }
            }
        });
        xs.sort_unstable();
        xs.dedup();
        (xs, t, m)
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match &self.node {
            Node::Neg(a) | Node::Call(_, a) => a.visit(f),
            Node::Bin(_, a, c) => {
                a.visit(f);
                c.visit(f);
            }
            _ => {}
        }
    }
}

fn var_name(v: Var) -> String {
    match v {
        Var::X(i) => format!("x{i}"),
        Var::T => "t".into(),
        Var::M => "m".into(),
    }
}

/// Real power with an exact fast path for integer exponents.
fn pow(a: f64, c: f64) -> Option<f64> {
    if c.fract() == 0.0 && c.abs() <= 1024.0 {
        if a == 0.0 && c < 0.0 {
            return None;
        }
        return Some(a.powi(c as i32));
    }
    if a < 0.0 {
        return None;
    }
    Some(a.powf(c))
}

/// Prints with explicit parentheses around every compound operand, so the
/// output re-parses to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn operand(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match &e.node {
                Node::Num(_) | Node::Var(_) | Node::Pi | Node::E | Node::Call(..) => {
                    write!(f, "{e}")
                }
                _ => write!(f, "({e})"),
            }
        }
        match &self.node {
            Node::Num(v) => write!(f, "{v:?}"),
            Node::Var(v) => write!(f, "{}", var_name(*v)),
            Node::Pi => write!(f, "pi"),
            Node::E => write!(f, "e"),
            Node::Neg(a) => {
                write!(f, "-")?;
                operand(a, f)
            }
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
            Node::Bin(op, a, b) => {
                operand(a, f)?;
                write!(f, " {} ", op.symbol())?;
                operand(b, f)
            }
        }
    }
}
