//! Payoff expressions over the risky-asset price path `S_0, ..., S_T`.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := number | 'S[' nat ']' | 'S_T' | 'max(S)' | 'min(S)' | 'avg(S)'
//!         | 'max(' expr ',' expr ')' | 'min(' expr ',' expr ')'
//!         | 'pos(' expr ')' | 'call(' number ')' | 'put(' number ')'
//!         | 'forward(' number ')' | 'lookback' | '(' expr ')' | '-' factor
//! ```
//!
//! `call(K)`, `put(K)`, `forward(K)` and `lookback` are sugar and desugar at
//! parse time. Path aggregates range over `S_0..=S_T`, the initial price
//! included. An expression only reads prices up to the maturity, so its value
//! is fixed by the first `T` tosses.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum PayoffExpr {
    Constant(f64),
    PriceAt(usize),
    TerminalPrice,
    PathMax,
    PathMin,
    PathAvg,
    Add(Box<PayoffExpr>, Box<PayoffExpr>),
    Sub(Box<PayoffExpr>, Box<PayoffExpr>),
    Mul(Box<PayoffExpr>, Box<PayoffExpr>),
    Div(Box<PayoffExpr>, Box<PayoffExpr>),
    Neg(Box<PayoffExpr>),
    Max2(Box<PayoffExpr>, Box<PayoffExpr>),
    Min2(Box<PayoffExpr>, Box<PayoffExpr>),
    PosPart(Box<PayoffExpr>),
}

impl PayoffExpr {
    /// `pos(S_T - strike)`
    pub fn call(strike: f64) -> Self {
        Self::PosPart(Box::new(Self::Sub(
            Box::new(Self::TerminalPrice),
            Box::new(Self::Constant(strike)),
        )))
    }

    /// `pos(strike - S_T)`
    pub fn put(strike: f64) -> Self {
        Self::PosPart(Box::new(Self::Sub(
            Box::new(Self::Constant(strike)),
            Box::new(Self::TerminalPrice),
        )))
    }

    /// `S_T - strike`
    pub fn forward(strike: f64) -> Self {
        Self::Sub(
            Box::new(Self::TerminalPrice),
            Box::new(Self::Constant(strike)),
        )
    }

    /// `max(S) - S_T`
    pub fn lookback() -> Self {
        Self::Sub(Box::new(Self::PathMax), Box::new(Self::TerminalPrice))
    }
}

/// Why a parse failed; the offset is a byte position in the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at offset {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: expected {expected}, found {found}")]
    Syntax { expected: String, found: String },
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("malformed number `{0}`")]
    MalformedNumber(String),
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(String),
    Ident(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Eof,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Number(s) => write!(f, "number `{s}`"),
            Token::Ident(s) => write!(f, "identifier `{s}`"),
            Token::LParen => f.write_str("`(`"),
            Token::RParen => f.write_str("`)`"),
            Token::LBracket => f.write_str("`[`"),
            Token::RBracket => f.write_str("`]`"),
            Token::Comma => f.write_str("`,`"),
            Token::Plus => f.write_str("`+`"),
            Token::Minus => f.write_str("`-`"),
            Token::Star => f.write_str("`*`"),
            Token::Slash => f.write_str("`/`"),
            Token::Eof => f.write_str("end of input"),
        }
    }
}

fn tokenize(input: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let bytes = input.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let single = match c {
            b'(' => Some(Token::LParen),
            b')' => Some(Token::RParen),
            b'[' => Some(Token::LBracket),
            b']' => Some(Token::RBracket),
            b',' => Some(Token::Comma),
            b'+' => Some(Token::Plus),
            b'-' => Some(Token::Minus),
            b'*' => Some(Token::Star),
            b'/' => Some(Token::Slash),
            _ => None,
        };
        if let Some(tok) = single {
            tokens.push((i, tok));
            i += 1;
        } else if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'.') {
                i += 1;
            }
            tokens.push((start, Token::Number(input[start..i].to_string())));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            tokens.push((start, Token::Ident(input[start..i].to_string())));
        } else {
            let ch = input[i..].chars().next().unwrap_or('\u{fffd}');
            return Err(ParseError {
                offset: i,
                kind: ParseErrorKind::UnexpectedChar(ch),
            });
        }
    }
    tokens.push((input.len(), Token::Eof));
    Ok(tokens)
}

/// Decimal literal: digits, optionally followed by `.` and more digits.
fn parse_decimal(text: &str, offset: usize) -> Result<f64, ParseError> {
    let malformed = || ParseError {
        offset,
        kind: ParseErrorKind::MalformedNumber(text.to_string()),
    };
    let (int, frac) = match text.split_once('.') {
        Some((int, frac)) => (int, Some(frac)),
        None => (text, None),
    };
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !digits(int) || frac.is_some_and(|f| !digits(f)) {
        return Err(malformed());
    }
    text.parse().map_err(|_| malformed())
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].1
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].0
    }

    fn bump(&mut self) -> (usize, Token) {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, expected: &str) -> ParseError {
        ParseError {
            offset: self.offset(),
            kind: ParseErrorKind::Syntax {
                expected: expected.to_string(),
                found: self.peek().to_string(),
            },
        }
    }

    fn expect(&mut self, tok: Token) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&tok.to_string()))
        }
    }

    fn expr(&mut self) -> Result<PayoffExpr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let ctor: fn(Box<PayoffExpr>, Box<PayoffExpr>) -> PayoffExpr = match self.peek() {
                Token::Plus => PayoffExpr::Add,
                Token::Minus => PayoffExpr::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = ctor(Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<PayoffExpr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let ctor: fn(Box<PayoffExpr>, Box<PayoffExpr>) -> PayoffExpr = match self.peek() {
                Token::Star => PayoffExpr::Mul,
                Token::Slash => PayoffExpr::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = ctor(Box::new(lhs), Box::new(rhs));
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        match self.peek().clone() {
            Token::Number(text) => {
                let offset = self.offset();
                self.bump();
                parse_decimal(&text, offset)
            }
            _ => Err(self.error("number")),
        }
    }

    /// Inside `max(`/`min(`/`avg(`: a lone `S` followed by `)` selects the path aggregate.
    fn is_aggregate_argument(&self) -> bool {
        matches!(self.peek(), Token::Ident(s) if s == "S")
            && matches!(self.tokens.get(self.pos + 1), Some((_, Token::RParen)))
    }

    fn factor(&mut self) -> Result<PayoffExpr, ParseError> {
        let offset = self.offset();
        if matches!(
            self.peek(),
            Token::Eof
                | Token::RParen
                | Token::RBracket
                | Token::Comma
                | Token::Plus
                | Token::Star
                | Token::Slash
        ) {
            return Err(self.error("an expression"));
        }
        match self.bump().1 {
            Token::Number(text) => parse_decimal(&text, offset).map(PayoffExpr::Constant),
            Token::Minus => Ok(PayoffExpr::Neg(Box::new(self.factor()?))),
            Token::LParen => {
                let inner = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(inner)
            }
            Token::Ident(name) => self.identifier(&name, offset),
            _ => unreachable!("non-factor tokens are rejected above"),
        }
    }

    fn identifier(&mut self, name: &str, offset: usize) -> Result<PayoffExpr, ParseError> {
        match name {
            "S" => {
                self.expect(Token::LBracket)?;
                let index = match self.peek().clone() {
                    Token::Number(text) if text.bytes().all(|b| b.is_ascii_digit()) => {
                        let at = self.offset();
                        self.bump();
                        text.parse::<usize>().map_err(|_| ParseError {
                            offset: at,
                            kind: ParseErrorKind::MalformedNumber(text.clone()),
                        })?
                    }
                    Token::Number(text) => {
                        return Err(ParseError {
                            offset: self.offset(),
                            kind: ParseErrorKind::MalformedNumber(text),
                        })
                    }
                    _ => return Err(self.error("a time index")),
                };
                self.expect(Token::RBracket)?;
                Ok(PayoffExpr::PriceAt(index))
            }
            "S_T" => Ok(PayoffExpr::TerminalPrice),
            "lookback" => Ok(PayoffExpr::lookback()),
            "max" | "min" | "avg" => {
                self.expect(Token::LParen)?;
                if self.is_aggregate_argument() {
                    self.bump();
                    self.bump();
                    return Ok(match name {
                        "max" => PayoffExpr::PathMax,
                        "min" => PayoffExpr::PathMin,
                        _ => PayoffExpr::PathAvg,
                    });
                }
                if name == "avg" {
                    return Err(self.error("`S`"));
                }
                let lhs = self.expr()?;
                self.expect(Token::Comma)?;
                let rhs = self.expr()?;
                self.expect(Token::RParen)?;
                let (lhs, rhs) = (Box::new(lhs), Box::new(rhs));
                Ok(if name == "max" {
                    PayoffExpr::Max2(lhs, rhs)
                } else {
                    PayoffExpr::Min2(lhs, rhs)
                })
            }
            "pos" => {
                self.expect(Token::LParen)?;
                let inner = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(PayoffExpr::PosPart(Box::new(inner)))
            }
            "call" | "put" | "forward" => {
                self.expect(Token::LParen)?;
                let strike = self.number()?;
                self.expect(Token::RParen)?;
                Ok(match name {
                    "call" => PayoffExpr::call(strike),
                    "put" => PayoffExpr::put(strike),
                    _ => PayoffExpr::forward(strike),
                })
            }
            other => Err(ParseError {
                offset,
                kind: ParseErrorKind::UnknownIdentifier(other.to_string()),
            }),
        }
    }
}

pub fn parse_payoff(text: &str) -> Result<PayoffExpr, ParseError> {
    let mut parser = Parser {
        tokens: tokenize(text)?,
        pos: 0,
    };
    let expr = parser.expr()?;
    if *parser.peek() != Token::Eof {
        return Err(parser.error("an operator or end of input"));
    }
    Ok(expr)
}

impl FromStr for PayoffExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_payoff(s)
    }
}

fn precedence(e: &PayoffExpr) -> u8 {
    match e {
        PayoffExpr::Add(..) | PayoffExpr::Sub(..) => 1,
        PayoffExpr::Mul(..) | PayoffExpr::Div(..) => 2,
        _ => 3,
    }
}

struct Operand<'a> {
    expr: &'a PayoffExpr,
    parens: bool,
}

impl fmt::Display for Operand<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parens {
            write!(f, "({})", self.expr)
        } else {
            write!(f, "{}", self.expr)
        }
    }
}

/// Canonical printer. The output parses back to the same tree; sugar such as
/// `call(K)` prints in its desugared form.
impl fmt::Display for PayoffExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use PayoffExpr::*;
        let binary = |f: &mut fmt::Formatter<'_>, op: &str, a: &PayoffExpr, b: &PayoffExpr| {
            let level = precedence(self);
            let lhs = Operand {
                expr: a,
                parens: precedence(a) < level,
            };
            // operators are left-associative, so an equal-precedence right operand needs parens
            let rhs = Operand {
                expr: b,
                parens: precedence(b) <= level,
            };
            write!(f, "{lhs} {op} {rhs}")
        };
        match self {
            Constant(c) => write!(f, "{c}"),
            PriceAt(t) => write!(f, "S[{t}]"),
            TerminalPrice => f.write_str("S_T"),
            PathMax => f.write_str("max(S)"),
            PathMin => f.write_str("min(S)"),
            PathAvg => f.write_str("avg(S)"),
            Add(a, b) => binary(f, "+", a, b),
            Sub(a, b) => binary(f, "-", a, b),
            Mul(a, b) => binary(f, "*", a, b),
            Div(a, b) => binary(f, "/", a, b),
            Neg(a) => write!(
                f,
                "-{}",
                Operand {
                    expr: a,
                    parens: precedence(a) < 3,
                }
            ),
            Max2(a, b) => write!(f, "max({a}, {b})"),
            Min2(a, b) => write!(f, "min({a}, {b})"),
            PosPart(a) => write!(f, "pos({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("S[{index}] is past the last price S[{last}]")]
    IndexOutOfRange { index: usize, last: usize },
    #[error("division by zero in `{node}`")]
    DivisionByZero { node: String },
    #[error("empty price path")]
    EmptyPath,
}

/// Evaluates `e` on the prices `S_0..=S_T` of one scenario.
pub fn eval_payoff(e: &PayoffExpr, prices: &[f64]) -> Result<f64, EvalError> {
    use PayoffExpr::*;
    let Some(&terminal) = prices.last() else {
        return Err(EvalError::EmptyPath);
    };
    let eval = |x: &PayoffExpr| eval_payoff(x, prices);
    Ok(match e {
        Constant(c) => *c,
        PriceAt(t) => *prices.get(*t).ok_or(EvalError::IndexOutOfRange {
            index: *t,
            last: prices.len() - 1,
        })?,
        TerminalPrice => terminal,
        PathMax => prices.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        PathMin => prices.iter().copied().fold(f64::INFINITY, f64::min),
        PathAvg => prices.iter().sum::<f64>() / prices.len() as f64,
        Add(a, b) => eval(a)? + eval(b)?,
        Sub(a, b) => eval(a)? - eval(b)?,
        Mul(a, b) => eval(a)? * eval(b)?,
        Div(a, b) => {
            let den = eval(b)?;
            if den == 0.0 {
                return Err(EvalError::DivisionByZero {
                    node: e.to_string(),
                });
            }
            eval(a)? / den
        }
        Neg(a) => -eval(a)?,
        Max2(a, b) => eval(a)?.max(eval(b)?),
        Min2(a, b) => eval(a)?.min(eval(b)?),
        PosPart(a) => eval(a)?.max(0.0),
    })
}

/// Maturity requirement of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayoffHorizon {
    /// Reads only explicit `S[t]` (or nothing); the value is the largest index.
    Explicit(usize),
    /// Reads `S_T` or a path aggregate, so the maturity must be supplied.
    /// `min_maturity` is the largest explicit index, if any.
    Parametric { min_maturity: usize },
}

impl PayoffHorizon {
    pub fn min_maturity(&self) -> usize {
        match *self {
            PayoffHorizon::Explicit(t) => t,
            PayoffHorizon::Parametric { min_maturity } => min_maturity,
        }
    }
}

pub fn payoff_horizon(e: &PayoffExpr) -> PayoffHorizon {
    fn walk(e: &PayoffExpr, max_index: &mut usize, parametric: &mut bool) {
        use PayoffExpr::*;
        match e {
            Constant(_) => {}
            PriceAt(t) => *max_index = (*max_index).max(*t),
            TerminalPrice | PathMax | PathMin | PathAvg => *parametric = true,
            Neg(a) | PosPart(a) => walk(a, max_index, parametric),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Max2(a, b) | Min2(a, b) => {
                walk(a, max_index, parametric);
                walk(b, max_index, parametric);
            }
        }
    }
    let (mut max_index, mut parametric) = (0, false);
    walk(e, &mut max_index, &mut parametric);
    if parametric {
        PayoffHorizon::Parametric {
            min_maturity: max_index,
        }
    } else {
        PayoffHorizon::Explicit(max_index)
    }
}
