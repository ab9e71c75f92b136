//! Tiny arithmetic grammar for model coefficients and kernel densities.
//!
//! Supported: `+ - * /`, unary minus, parentheses, `sin`, `cos`, `exp`, the
//! constant `pi`, numeric literals, and the variables `t` (time) and, for
//! kernel densities, `s` (history argument). Expressions evaluate to real
//! numbers; complex coefficient data goes through Fourier-mode tables
//! instead.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    S,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::T => write!(f, "t"),
            Var::S => write!(f, "s"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Parse `src`, permitting only the listed variables.
    pub fn parse(src: &str, allowed: &[Var]) -> Result<Expr, String> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0, allowed };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(format!("unexpected trailing input at `{}`", p.rest_src()));
        }
        Ok(e)
    }

    pub fn eval(&self, t: f64, s: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::T) => t,
            Expr::Var(Var::S) => s,
            Expr::Neg(e) => -e.eval(t, s),
            Expr::Add(a, b) => a.eval(t, s) + b.eval(t, s),
            Expr::Sub(a, b) => a.eval(t, s) - b.eval(t, s),
            Expr::Mul(a, b) => a.eval(t, s) * b.eval(t, s),
            Expr::Div(a, b) => a.eval(t, s) / b.eval(t, s),
            Expr::Call(Func::Sin, e) => e.eval(t, s).sin(),
            Expr::Call(Func::Cos, e) => e.eval(t, s).cos(),
            Expr::Call(Func::Exp, e) => e.eval(t, s).exp(),
        }
    }

    /// Does the expression mention `v`?
    pub fn uses(&self, v: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(e) | Expr::Call(_, e) => e.uses(v),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.uses(v) || b.uses(v)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' | '−' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == '.') {
                    i += 1;
                }
                // Scientific notation exponents.
                if i < bytes.len() && (bytes[i] == 'e' || bytes[i] == 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == '+' || bytes[j] == '-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = bytes[start..i].iter().collect();
                let v: f64 =
                    text.parse().map_err(|_| format!("invalid number literal `{text}`"))?;
                out.push(Tok::Num(v));
            }
            c if c.is_ascii_alphabetic() || c == 'π' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == 'π') {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                out.push(Tok::Ident(text));
            }
            other => return Err(format!("unexpected character `{other}`")),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    allowed: &'a [Var],
}

impl<'a> Parser<'a> {
    fn rest_src(&self) -> String {
        format!("{:?}", &self.tokens[self.pos..])
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expr, String> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, String> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, String> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if matches!(self.peek(), Some(Tok::Plus)) {
            self.bump();
            return self.unary();
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, String> {
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                match self.bump() {
                    Some(Tok::RParen) => Ok(e),
                    _ => Err("missing closing parenthesis".into()),
                }
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "pi" | "π" => Ok(Expr::Num(std::f64::consts::PI)),
                "t" | "s" => {
                    let var = if name == "t" { Var::T } else { Var::S };
                    if !self.allowed.contains(&var) {
                        return Err(format!("variable `{var}` not allowed in this context"));
                    }
                    Ok(Expr::Var(var))
                }
                "sin" | "cos" | "exp" => {
                    let func = match name.as_str() {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        _ => Func::Exp,
                    };
                    match self.bump() {
                        Some(Tok::LParen) => {
                            let arg = self.expr()?;
                            match self.bump() {
                                Some(Tok::RParen) => Ok(Expr::Call(func, Box::new(arg))),
                                _ => Err(format!("missing `)` after {name}(...")),
                            }
                        }
                        _ => Err(format!("expected `(` after function `{name}`")),
                    }
                }
                other => Err(format!("unknown identifier `{other}`")),
            },
            other => Err(format!("unexpected token {other:?}")),
        }
    }
}
