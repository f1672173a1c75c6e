//! Recursive-descent parser, evaluator and symbolic differentiator for the
//! small expression language used in run configurations.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := ("-" | "+") unary | power
//! power   := primary ("^" unary)?          right associative
//! primary := number | variable | func "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! Functions: `sin cos tan exp ln sqrt tanh abs min max`. Which variables may
//! appear depends on the context, see [`Vars`].

use std::fmt;

use crate::error::{Error, Result};

/// Every variable name the language knows, in any context.
const KNOWN: [&str; 7] = ["x1", "x2", "z", "y1", "y2", "t", "r"];

/// The variable set of an expression context. Variable `i` of an expression
/// reads slot `i` of the value slice passed to [`Expr::eval`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Vars {
    names: &'static [&'static str],
}

impl Vars {
    /// Base coordinates, for sampled fields.
    pub const BASE: Vars = Vars {
        names: &["x1", "x2"],
    };
    /// PMC functions `H(x, z, Y, t)`.
    pub const PMC: Vars = Vars {
        names: &["x1", "x2", "z", "y1", "y2", "t"],
    };
    /// Conformal factors `f(x, r)`.
    pub const FACTOR: Vars = Vars {
        names: &["x1", "x2", "r"],
    };
    /// Warped profiles `h(r)`.
    pub const PROFILE: Vars = Vars { names: &["r"] };

    pub fn names(&self) -> &'static [&'static str] {
        self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| *n == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Tanh,
    Abs,
    /// Only produced by differentiation of `abs`.
    Sign,
}

impl Func {
    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Tanh => v.tanh(),
            Func::Abs => v.abs(),
            Func::Sign => {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
    Min(Box<Node>, Box<Node>),
    Max(Box<Node>, Box<Node>),
    /// `if a <= b { then } else { other }`; produced by differentiating min/max.
    IfLe(Box<[Node; 4]>),
}

// Smart constructors fold constants and drop neutral elements so that
// repeated differentiation does not blow the tree up.
fn konst(v: f64) -> Node {
    Node::Const(v)
}

fn neg(a: Node) -> Node {
    match a {
        Node::Const(v) => konst(-v),
        Node::Neg(inner) => *inner,
        a => Node::Neg(Box::new(a)),
    }
}

fn add(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Const(x), Node::Const(y)) => konst(x + y),
        (Node::Const(z), b) if z == 0.0 => b,
        (a, Node::Const(z)) if z == 0.0 => a,
        (a, Node::Neg(b)) => sub(a, *b),
        (a, b) => Node::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Const(x), Node::Const(y)) => konst(x - y),
        (Node::Const(z), b) if z == 0.0 => neg(b),
        (a, Node::Const(z)) if z == 0.0 => a,
        (a, b) => Node::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Const(x), Node::Const(y)) => konst(x * y),
        (Node::Const(z), _) | (_, Node::Const(z)) if z == 0.0 => konst(0.0),
        (Node::Const(o), b) if o == 1.0 => b,
        (a, Node::Const(o)) if o == 1.0 => a,
        (Node::Const(m), b) if m == -1.0 => neg(b),
        (a, Node::Const(m)) if m == -1.0 => neg(a),
        (a, b) => Node::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Const(z), _) if z == 0.0 => konst(0.0),
        (a, Node::Const(o)) if o == 1.0 => a,
        (a, b) => Node::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Const(x), Node::Const(y)) => konst(x.powf(y)),
        (_, Node::Const(z)) if z == 0.0 => konst(1.0),
        (a, Node::Const(o)) if o == 1.0 => a,
        (a, b) => Node::Pow(Box::new(a), Box::new(b)),
    }
}

fn call(f: Func, a: Node) -> Node {
    match a {
        Node::Const(v) => konst(f.apply(v)),
        a => Node::Call(f, Box::new(a)),
    }
}

fn if_le(a: Node, b: Node, then: Node, other: Node) -> Node {
    if then == other {
        then
    } else {
        Node::IfLe(Box::new([a, b, then, other]))
    }
}

impl Node {
    fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Node::Const(v) => *v,
            Node::Var(i) => vars[*i],
            Node::Neg(a) => -a.eval(vars),
            Node::Add(a, b) => a.eval(vars) + b.eval(vars),
            Node::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Node::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Node::Div(a, b) => a.eval(vars) / b.eval(vars),
            Node::Pow(a, b) => {
                let (x, y) = (a.eval(vars), b.eval(vars));
                if y == 2.0 {
                    x * x
                } else {
                    x.powf(y)
                }
            }
            Node::Call(f, a) => f.apply(a.eval(vars)),
            Node::Min(a, b) => a.eval(vars).min(b.eval(vars)),
            Node::Max(a, b) => a.eval(vars).max(b.eval(vars)),
            Node::IfLe(p) => {
                if p[0].eval(vars) <= p[1].eval(vars) {
                    p[2].eval(vars)
                } else {
                    p[3].eval(vars)
                }
            }
        }
    }

    fn derivative(&self, var: usize) -> Node {
        match self {
            Node::Const(_) => konst(0.0),
            Node::Var(i) => konst(if *i == var { 1.0 } else { 0.0 }),
            Node::Neg(a) => neg(a.derivative(var)),
            Node::Add(a, b) => add(a.derivative(var), b.derivative(var)),
            Node::Sub(a, b) => sub(a.derivative(var), b.derivative(var)),
            Node::Mul(a, b) => add(
                mul(a.derivative(var), (**b).clone()),
                mul((**a).clone(), b.derivative(var)),
            ),
            Node::Div(a, b) => {
                let (da, db) = (a.derivative(var), b.derivative(var));
                let (a, b) = ((**a).clone(), (**b).clone());
                match db {
                    Node::Const(z) if z == 0.0 => div(da, b),
                    db => div(sub(mul(da, b.clone()), mul(a, db)), mul(b.clone(), b)),
                }
            }
            Node::Pow(a, b) => {
                let da = a.derivative(var);
                match &**b {
                    Node::Const(c) => mul(mul(konst(*c), pow((**a).clone(), konst(c - 1.0))), da),
                    _ => {
                        // d(a^b) = a^b (b' ln a + b a' / a)
                        let db = b.derivative(var);
                        let inner = add(
                            mul(db, call(Func::Ln, (**a).clone())),
                            div(mul((**b).clone(), da), (**a).clone()),
                        );
                        mul(self.clone(), inner)
                    }
                }
            }
            Node::Call(f, a) => {
                let da = a.derivative(var);
                if da == konst(0.0) {
                    return konst(0.0);
                }
                let a = (**a).clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, a),
                    Func::Cos => neg(call(Func::Sin, a)),
                    Func::Tan => add(konst(1.0), pow(call(Func::Tan, a), konst(2.0))),
                    Func::Exp => call(Func::Exp, a),
                    Func::Ln => div(konst(1.0), a),
                    Func::Sqrt => div(konst(0.5), call(Func::Sqrt, a)),
                    Func::Tanh => sub(konst(1.0), pow(call(Func::Tanh, a), konst(2.0))),
                    Func::Abs => call(Func::Sign, a),
                    Func::Sign => konst(0.0),
                };
                mul(outer, da)
            }
            Node::Min(a, b) => if_le(
                (**a).clone(),
                (**b).clone(),
                a.derivative(var),
                b.derivative(var),
            ),
            Node::Max(a, b) => if_le(
                (**a).clone(),
                (**b).clone(),
                b.derivative(var),
                a.derivative(var),
            ),
            Node::IfLe(p) => if_le(
                p[0].clone(),
                p[1].clone(),
                p[2].derivative(var),
                p[3].derivative(var),
            ),
        }
    }

    fn uses(&self, var: usize) -> bool {
        match self {
            Node::Const(_) => false,
            Node::Var(i) => *i == var,
            Node::Neg(a) | Node::Call(_, a) => a.uses(var),
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b)
            | Node::Min(a, b)
            | Node::Max(a, b) => a.uses(var) || b.uses(var),
            Node::IfLe(p) => p.iter().any(|n| n.uses(var)),
        }
    }

    fn fmt_with(&self, names: &[&str], f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(v) => write!(f, "{v:?}"),
            Node::Var(i) => write!(f, "{}", names[*i]),
            Node::Neg(a) => {
                write!(f, "(-")?;
                a.fmt_with(names, f)?;
                write!(f, ")")
            }
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b) => {
                let op = match self {
                    Node::Add(..) => "+",
                    Node::Sub(..) => "-",
                    Node::Mul(..) => "*",
                    Node::Div(..) => "/",
                    _ => "^",
                };
                write!(f, "(")?;
                a.fmt_with(names, f)?;
                write!(f, " {op} ")?;
                b.fmt_with(names, f)?;
                write!(f, ")")
            }
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_with(names, f)?;
                write!(f, ")")
            }
            Node::Min(a, b) | Node::Max(a, b) => {
                write!(
                    f,
                    "{}(",
                    if matches!(self, Node::Min(..)) {
                        "min"
                    } else {
                        "max"
                    }
                )?;
                a.fmt_with(names, f)?;
                write!(f, ", ")?;
                b.fmt_with(names, f)?;
                write!(f, ")")
            }
            Node::IfLe(p) => {
                write!(f, "if_le(")?;
                for (i, n) in p.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    n.fmt_with(names, f)?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A parsed expression over one of the [`Vars`] sets.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    root: Node,
    vars: Vars,
    source: String,
}

impl Expr {
    pub fn parse(text: &str, vars: &Vars) -> Result<Expr> {
        let tokens = lex(text)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            vars: *vars,
        };
        let root = p.expr()?;
        if let Some(tok) = p.tokens.get(p.pos) {
            return Err(Error::Parse {
                position: tok.position,
                message: format!("unexpected {}", tok.kind.describe()),
            });
        }
        Ok(Expr {
            root,
            vars: *vars,
            source: text.to_string(),
        })
    }

    pub fn constant(v: f64, vars: &Vars) -> Expr {
        Expr {
            root: konst(v),
            vars: *vars,
            source: format!("{v:?}"),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    /// Evaluates with `values[i]` bound to variable `i`; missing trailing
    /// slots read as 0.
    pub fn eval(&self, values: &[f64]) -> f64 {
        if values.len() >= self.vars.len() {
            self.root.eval(values)
        } else {
            let mut padded = [0.0; 8];
            padded[..values.len()].copy_from_slice(values);
            self.root.eval(&padded)
        }
    }

    /// Symbolic partial derivative with respect to variable `name`.
    pub fn derivative(&self, name: &str) -> Expr {
        let root = match self.vars.index(name) {
            Some(i) => self.root.derivative(i),
            None => konst(0.0),
        };
        let source = format!("d({})/d{name}", self.source);
        Expr {
            root,
            vars: self.vars,
            source,
        }
    }

    pub fn depends_on(&self, name: &str) -> bool {
        self.vars.index(name).is_some_and(|i| self.root.uses(i))
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.root {
            Node::Const(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt_with(self.vars.names, f)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String),
    Op(char),
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Number(v) => format!("number {v}"),
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Op(c) => format!("`{c}`"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    kind: TokenKind,
    /// 1-based character position of the token start.
    position: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let position = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| Error::Parse {
                position,
                message: format!("malformed number `{s}`"),
            })?;
            out.push(Token {
                kind: TokenKind::Number(v),
                position,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                kind: TokenKind::Ident(chars[start..i].iter().collect()),
                position,
            });
        } else if "+-*/^(),".contains(c) {
            out.push(Token {
                kind: TokenKind::Op(c),
                position,
            });
            i += 1;
        } else {
            return Err(Error::Parse {
                position,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    vars: Vars,
}

impl Parser {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn end_position(&self) -> usize {
        self.tokens.last().map_or(1, |t| t.position + 1)
    }

    fn expect(&mut self, op: char) -> Result<()> {
        match self.tokens.get(self.pos) {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) if *c == op => {
                self.pos += 1;
                Ok(())
            }
            Some(tok) => Err(Error::Parse {
                position: tok.position,
                message: format!("expected `{op}`, found {}", tok.kind.describe()),
            }),
            None => Err(Error::Parse {
                position: self.end_position(),
                message: format!("expected `{op}`, found end of input"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        let Some(tok) = self.tokens.get(self.pos).cloned() else {
            return Err(Error::Parse {
                position: self.end_position(),
                message: "unexpected end of input".into(),
            });
        };
        self.pos += 1;
        match tok.kind {
            TokenKind::Number(v) => Ok(Node::Const(v)),
            TokenKind::Op('(') => {
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            TokenKind::Op(c) => Err(Error::Parse {
                position: tok.position,
                message: format!("unexpected `{c}`"),
            }),
            TokenKind::Ident(name) => {
                if self.peek_op() == Some('(') {
                    self.call(&name, tok.position)
                } else if let Some(i) = self.vars.index(&name) {
                    Ok(Node::Var(i))
                } else if KNOWN.contains(&name.as_str()) {
                    Err(Error::Variable {
                        name,
                        allowed: self.vars.names.join(", "),
                    })
                } else {
                    Err(Error::Parse {
                        position: tok.position,
                        message: format!("unknown identifier `{name}`"),
                    })
                }
            }
        }
    }

    fn call(&mut self, name: &str, position: usize) -> Result<Node> {
        let binary = matches!(name, "min" | "max");
        let func = Func::from_name(name);
        if func.is_none() && !binary {
            return Err(Error::Parse {
                position,
                message: format!("unknown identifier `{name}`"),
            });
        }
        self.expect('(')?;
        let mut args = vec![self.expr()?];
        while self.peek_op() == Some(',') {
            self.pos += 1;
            args.push(self.expr()?);
        }
        self.expect(')')?;
        let want = if binary { 2 } else { 1 };
        if args.len() != want {
            return Err(Error::Parse {
                position,
                message: format!("`{name}` takes {want} argument(s), got {}", args.len()),
            });
        }
        let mut args = args.into_iter();
        let a = Box::new(args.next().unwrap());
        Ok(match (func, name) {
            (Some(f), _) => Node::Call(f, a),
            (None, "min") => Node::Min(a, Box::new(args.next().unwrap())),
            _ => Node::Max(a, Box::new(args.next().unwrap())),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pmc(text: &str) -> Expr {
        Expr::parse(text, &Vars::PMC).unwrap()
    }

    // x1 x2 z y1 y2 t
    fn at(x1: f64, x2: f64, z: f64, y1: f64, y2: f64, t: f64) -> [f64; 6] {
        [x1, x2, z, y1, y2, t]
    }

    #[test]
    fn precedence_and_associativity() {
        let p = at(0.0, 0.0, 3.0, 0.0, 0.0, 2.0);
        assert_eq!(pmc("1 + 2 * 3").eval(&p), 7.0);
        assert_eq!(pmc("-z^2").eval(&p), -9.0);
        assert_eq!(pmc("2^3^2").eval(&p), 512.0);
        assert_eq!(pmc("2^-1").eval(&p), 0.5);
        assert_eq!(pmc("8 / 4 / 2").eval(&p), 1.0);
        assert_eq!(pmc("z - t - 1").eval(&p), 0.0);
        assert_eq!(pmc("min(z, t) + max(z, t)").eval(&p), 5.0);
        assert_eq!(pmc("1.5e-1 * 2").eval(&p), 0.3);
    }

    #[test]
    fn documented_examples() {
        let h = pmc("-z");
        assert_eq!(h.eval(&at(0.3, 0.0, 1.25, 0.0, 0.0, 1.0)), -1.25);
        assert_eq!(
            h.derivative("z").eval(&at(0.3, 0.0, 1.25, 0.0, 0.0, 1.0)),
            -1.0
        );

        let h = pmc("0.5*sin(z)+0.1*sin(6.283185307179586*x1)");
        assert!((h.eval(&at(0.25, 0.0, 0.0, 0.0, 0.0, 1.0)) - 0.1).abs() <= 1e-15);

        match Expr::parse("foo(z)", &Vars::PMC) {
            Err(Error::Parse { position: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn error_positions() {
        let pos = |s: &str| match Expr::parse(s, &Vars::PMC) {
            Err(Error::Parse { position, .. }) => position,
            other => panic!("{s}: {other:?}"),
        };
        assert_eq!(pos("z +"), 4);
        assert_eq!(pos("(z"), 3);
        assert_eq!(pos("z $ 1"), 3);
        assert_eq!(pos("z z"), 3);
        assert_eq!(pos("sin(z, t)"), 1);
        assert_eq!(pos("bar"), 1);
        assert!(matches!(
            Expr::parse("r", &Vars::PMC),
            Err(Error::Variable { .. })
        ));
        assert!(matches!(
            Expr::parse("z", &Vars::FACTOR),
            Err(Error::Variable { .. })
        ));
    }

    #[test]
    fn symbolic_derivatives_match_closed_forms() {
        let p = at(0.3, -0.2, 0.7, 0.1, 0.2, 0.9);
        let cases: [(&str, &str, f64); 9] = [
            ("sin(z)", "z", 0.7f64.cos()),
            ("exp(-z)", "z", -(-0.7f64).exp()),
            ("z^3", "z", 3.0 * 0.49),
            ("sqrt(z)", "z", 0.5 / 0.7f64.sqrt()),
            ("ln(z)", "z", 1.0 / 0.7),
            ("tanh(z)", "z", 1.0 - 0.7f64.tanh().powi(2)),
            ("tan(z)", "z", 1.0 + 0.7f64.tan().powi(2)),
            ("x1*t", "t", 0.3),
            ("z^t", "t", 0.7f64.powf(0.9) * 0.7f64.ln()),
        ];
        for (text, var, want) in cases {
            let got = pmc(text).derivative(var).eval(&p);
            assert!(
                (got - want).abs() < 1e-14,
                "{text} d/d{var}: {got} vs {want}"
            );
        }
        assert_eq!(pmc("abs(z - 1)").derivative("z").eval(&p), -1.0);
        assert_eq!(pmc("min(z, t)").derivative("z").eval(&p), 1.0);
        assert_eq!(pmc("max(z, t)").derivative("z").eval(&p), 0.0);
    }

    #[test]
    fn dependency_tracking() {
        let h = pmc("x1*t + 3");
        assert!(!h.depends_on("z"));
        assert!(h.depends_on("t"));
        assert_eq!(h.derivative("z").as_constant(), Some(0.0));
    }

    #[test]
    fn display_reparses_to_same_values() {
        let h = pmc("-(z^2)*sin(x1) + max(t, 0.5)/exp(y1)");
        let again = pmc(&h.to_string());
        let p = at(0.4, 0.0, 1.3, -0.2, 0.0, 0.8);
        assert_eq!(h.eval(&p), again.eval(&p));
    }
}
