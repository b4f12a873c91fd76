//! Lexer and precedence-climbing parser for map component expressions.
//!
//! Precedence from loosest to tightest: `+ -`, `* /`, unary `-`, `^`.
//! Binary operators are left associative. Exponents must be integer literals.

use std::fmt;

use thiserror::Error;

use super::{BinOp, Expr, Func};

/// Nesting deeper than this is rejected instead of risking stack exhaustion.
const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at line {line}, column {column}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedToken {
        found: String,
        expected: &'static str,
    },
    BadNumber(String),
    BadExponent(String),
    UnknownFunction(String),
    Arity {
        func: &'static str,
        expected: usize,
        got: usize,
    },
    VariableOutOfRange {
        index: usize,
        dim: usize,
    },
    PlanarOnly(String),
    TooDeep,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character `{c}`"),
            ParseErrorKind::UnexpectedToken { found, expected } => {
                write!(f, "unexpected {found}, expected {expected}")
            }
            ParseErrorKind::BadNumber(s) => write!(f, "invalid number `{s}`"),
            ParseErrorKind::BadExponent(s) => {
                write!(f, "exponent must be an integer literal, found {s}")
            }
            ParseErrorKind::UnknownFunction(s) => write!(f, "unknown function `{s}`"),
            ParseErrorKind::Arity {
                func,
                expected,
                got,
            } => {
                write!(f, "`{func}` takes {expected} argument(s), got {got}")
            }
            ParseErrorKind::VariableOutOfRange { index, dim } => {
                write!(f, "variable x{index} outside x1..x{dim}")
            }
            ParseErrorKind::PlanarOnly(s) => {
                write!(f, "`{s}` is only available in planar `F = ...` definitions")
            }
            ParseErrorKind::TooDeep => write!(f, "expression nested too deeply"),
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
    Caret,
    LParen,
    RParen,
    Comma,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number `{v}`"),
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::Caret => write!(f, "`^`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, column);
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token {
                tok,
                line: tl,
                column: tc,
            });
            i += 1;
            column += 1;
            continue;
        }
        if c == '\n' {
            i += 1;
            line += 1;
            column = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            column += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
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
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            column += i - start;
            let err = || ParseError {
                kind: ParseErrorKind::BadNumber(text.clone()),
                line: tl,
                column: tc,
            };
            let v: f64 = text.parse().map_err(|_| err())?;
            if !v.is_finite() {
                return Err(err());
            }
            out.push(Token {
                tok: Tok::Num(v),
                line: tl,
                column: tc,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            column += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                column: tc,
            });
            continue;
        }
        return Err(ParseError {
            kind: ParseErrorKind::UnexpectedChar(c),
            line: tl,
            column: tc,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    cursor: usize,
    dim: usize,
    planar: bool,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.cursor]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.cursor].clone();
        if self.cursor + 1 < self.tokens.len() {
            self.cursor += 1;
        }
        t
    }

    fn error_at(&self, tok: &Token, kind: ParseErrorKind) -> ParseError {
        ParseError {
            kind,
            line: tok.line,
            column: tok.column,
        }
    }

    fn unexpected(&self, tok: &Token, expected: &'static str) -> ParseError {
        self.error_at(
            tok,
            ParseErrorKind::UnexpectedToken {
                found: tok.tok.to_string(),
                expected,
            },
        )
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            let tok = self.peek().clone();
            return Err(self.error_at(&tok, ParseErrorKind::TooDeep));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            self.enter()?;
            let inner = self.unary()?;
            self.depth -= 1;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.primary()?;
        while self.peek().tok == Tok::Caret {
            self.bump();
            let negative = if self.peek().tok == Tok::Minus {
                self.bump();
                true
            } else {
                false
            };
            let tok = self.bump();
            let exp = match tok.tok {
                Tok::Num(v) if v.fract() == 0.0 && v.abs() <= f64::from(i32::MAX) => v as i32,
                _ => {
                    return Err(
                        self.error_at(&tok, ParseErrorKind::BadExponent(tok.tok.to_string()))
                    );
                }
            };
            base = Expr::Pow(Box::new(base), if negative { -exp } else { exp });
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let tok = self.bump();
        match tok.tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                let close = self.bump();
                if close.tok != Tok::RParen {
                    return Err(self.unexpected(&close, "`)`"));
                }
                Ok(inner)
            }
            Tok::Ident(ref name) => {
                if self.peek().tok == Tok::LParen {
                    return self.call(&tok, name);
                }
                self.identifier(&tok, name)
            }
            _ => Err(self.unexpected(&tok, "a number, identifier or `(`")),
        }
    }

    fn identifier(&self, tok: &Token, name: &str) -> Result<Expr, ParseError> {
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits.parse().unwrap_or(usize::MAX);
                if index == 0 || index > self.dim {
                    return Err(self.error_at(
                        tok,
                        ParseErrorKind::VariableOutOfRange {
                            index,
                            dim: self.dim,
                        },
                    ));
                }
                return Ok(Expr::Var(index - 1));
            }
        }
        match name {
            "z" if self.planar => Ok(Expr::Planar),
            "z" | "zmul" | "zconj" => {
                Err(self.error_at(tok, ParseErrorKind::PlanarOnly(name.into())))
            }
            "ln" | "abs" | "exp" => Err(self.unexpected(tok, "`(` after function name")),
            _ => Ok(Expr::Param(name.to_string())),
        }
    }

    fn call(&mut self, tok: &Token, name: &str) -> Result<Expr, ParseError> {
        let func = match name {
            "ln" => Func::Ln,
            "abs" => Func::Abs,
            "exp" => Func::Exp,
            "zmul" => Func::Zmul,
            "zconj" => Func::Zconj,
            _ => return Err(self.error_at(tok, ParseErrorKind::UnknownFunction(name.into()))),
        };
        if func.is_planar() && !self.planar {
            return Err(self.error_at(tok, ParseErrorKind::PlanarOnly(name.into())));
        }
        self.bump(); // '('
        self.enter()?;
        let mut args = Vec::new();
        if self.peek().tok != Tok::RParen {
            loop {
                args.push(self.expr()?);
                if self.peek().tok == Tok::Comma {
                    self.bump();
                    continue;
                }
                break;
            }
        }
        let close = self.bump();
        if close.tok != Tok::RParen {
            return Err(self.unexpected(&close, "`,` or `)`"));
        }
        self.depth -= 1;
        if args.len() != func.arity() {
            return Err(self.error_at(
                tok,
                ParseErrorKind::Arity {
                    func: func.name(),
                    expected: func.arity(),
                    got: args.len(),
                },
            ));
        }
        Ok(Expr::Call(func, args))
    }
}

fn run(src: &str, dim: usize, planar: bool) -> Result<Expr, ParseError> {
    let tokens = lex(src)?;
    let mut parser = Parser {
        tokens,
        cursor: 0,
        dim,
        planar,
        depth: 0,
    };
    let expr = parser.expr()?;
    let tail = parser.bump();
    if tail.tok != Tok::Eof {
        return Err(parser.unexpected(&tail, "an operator or end of input"));
    }
    Ok(expr)
}

/// Parses one component expression over `x1..x{dim}`.
pub fn parse(src: &str, dim: usize) -> Result<Expr, ParseError> {
    run(src, dim, false)
}

/// Parses a planar expression over `z` (and `x1`, `x2` as real parts), with
/// `zmul` and `zconj` available.
pub fn parse_planar(src: &str) -> Result<Expr, ParseError> {
    run(src, 2, true)
}
