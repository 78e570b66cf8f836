//! Symbolic expressions for user-supplied metric components.
//!
//! Supports arithmetic (+ - * / ^), unary sign, parentheses, the functions
//! sin, cos, tan, sinh, cosh, tanh, exp, log, sqrt, abs, the constants pi,
//! tau, e, and the chart coordinate names supplied at parse time.

use crate::error::{Result, TubeError};

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
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
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Tanh => x.tanh(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
        }
    }
}

#[derive(Clone, Debug)]
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
}

/// A parsed scalar expression in named variables.
#[derive(Clone, Debug)]
pub struct Expr {
    root: Node,
    text: String,
}

impl Expr {
    /// Parse `text` with the given variable names bound, in order, to the
    /// slots of the slice later passed to [`Expr::eval`].
    pub fn parse(text: &str, vars: &[&str]) -> Result<Expr> {
        let tokens = tokenize(text)?;
        let mut p = Parser { tokens: &tokens, pos: 0, vars, text };
        let root = p.expression()?;
        if p.pos != p.tokens.len() {
            return Err(p.error(format!("unexpected `{}`", p.tokens[p.pos].describe())));
        }
        Ok(Expr { root, text: text.to_string() })
    }

    pub fn eval(&self, vars: &[f64]) -> f64 {
        eval_node(&self.root, vars)
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

fn eval_node(node: &Node, vars: &[f64]) -> f64 {
    match node {
        Node::Const(c) => *c,
        Node::Var(i) => vars[*i],
        Node::Neg(a) => -eval_node(a, vars),
        Node::Add(a, b) => eval_node(a, vars) + eval_node(b, vars),
        Node::Sub(a, b) => eval_node(a, vars) - eval_node(b, vars),
        Node::Mul(a, b) => eval_node(a, vars) * eval_node(b, vars),
        Node::Div(a, b) => eval_node(a, vars) / eval_node(b, vars),
        Node::Pow(a, b) => eval_node(a, vars).powf(eval_node(b, vars)),
        Node::Call(f, a) => f.apply(eval_node(a, vars)),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Num(v) => format!("{v}"),
            Token::Ident(s) => s.clone(),
            Token::Plus => "+".into(),
            Token::Minus => "-".into(),
            Token::Star => "*".into(),
            Token::Slash => "/".into(),
            Token::Caret => "^".into(),
            Token::LParen => "(".into(),
            Token::RParen => ")".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '/' => {
                out.push(Token::Slash);
                i += 1;
            }
            '^' => {
                out.push(Token::Caret);
                i += 1;
            }
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // Exponent part, only when followed by a digit or signed digit.
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit
                    .parse()
                    .map_err(|_| TubeError::Expr(format!("bad number `{lit}` in `{text}`")))?;
                out.push(Token::Num(v));
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push(Token::Ident(text[start..i].to_string()));
            }
            _ => {
                return Err(TubeError::Expr(format!("unexpected character `{c}` in `{text}`")));
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    vars: &'a [&'a str],
    text: &'a str,
}

impl<'a> Parser<'a> {
    fn error(&self, msg: String) -> TubeError {
        TubeError::Expr(format!("{msg} in `{}`", self.text))
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expression(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(tok) = self.peek() {
            match tok {
                Token::Plus => {
                    self.pos += 1;
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Minus => {
                    self.pos += 1;
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.factor()?;
        while let Some(tok) = self.peek() {
            match tok {
                Token::Star => {
                    self.pos += 1;
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Token::Slash => {
                    self.pos += 1;
                    lhs = Node::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    // Unary sign binds looser than `^`, so -x^2 means -(x^2).
    fn factor(&mut self) -> Result<Node> {
        match self.peek() {
            Some(Token::Minus) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.factor()?)))
            }
            Some(Token::Plus) => {
                self.pos += 1;
                self.factor()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some(Token::Caret) = self.peek() {
            self.pos += 1;
            // Right associative; exponent may carry its own sign.
            let exp = self.factor()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.bump().cloned() {
            Some(Token::Num(v)) => Ok(Node::Const(v)),
            Some(Token::LParen) => {
                let inner = self.expression()?;
                match self.bump() {
                    Some(Token::RParen) => Ok(inner),
                    _ => Err(self.error("missing `)`".into())),
                }
            }
            Some(Token::Ident(name)) => {
                if let Some(Token::LParen) = self.peek() {
                    let func = Func::from_name(&name)
                        .ok_or_else(|| self.error(format!("unknown function `{name}`")))?;
                    self.pos += 1;
                    let arg = self.expression()?;
                    match self.bump() {
                        Some(Token::RParen) => Ok(Node::Call(func, Box::new(arg))),
                        _ => Err(self.error("missing `)`".into())),
                    }
                } else {
                    match name.as_str() {
                        "pi" => Ok(Node::Const(std::f64::consts::PI)),
                        "tau" => Ok(Node::Const(std::f64::consts::TAU)),
                        "e" => Ok(Node::Const(std::f64::consts::E)),
                        _ => {
                            if let Some(idx) = self.vars.iter().position(|&v| v == name) {
                                Ok(Node::Var(idx))
                            } else {
                                Err(self.error(format!("unknown identifier `{name}`")))
                            }
                        }
                    }
                }
            }
            Some(other) => Err(self.error(format!("unexpected `{}`", other.describe()))),
            None => Err(self.error("unexpected end of expression".into())),
        }
    }
}
