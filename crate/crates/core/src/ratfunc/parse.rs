//! Tokenizer and rational-expression parser.
//!
//! Grammar:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' INT)?
//! atom  := NUMBER | IDENT | '(' expr ')'
//! ```
//!
//! Numbers are integers or decimals (`0.125`) and are converted exactly;
//! fractions are written with `/`. `#` starts a comment running to the end
//! of the line. The token stream is public so that document formats built
//! on top of expressions can share one lexer.

use std::fmt;

use super::function::RationalFunction;
use crate::scalar::{Coefficient, Field};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Token {
    Ident(String),
    Number(String),
    Arrow,
    Sym(char),
    Eof,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Ident(s) => write!(f, "identifier `{s}`"),
            Token::Number(s) => write!(f, "number `{s}`"),
            Token::Arrow => f.write_str("`->`"),
            Token::Sym(c) => write!(f, "`{c}`"),
            Token::Eof => f.write_str("end of input"),
        }
    }
}

/// A token with its 1-based source position.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Spanned {
    pub token: Token,
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ParseErrorKind {
    Syntax,
    UnknownParameter,
    DivisionByZero,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(kind: ParseErrorKind, line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError {
            kind,
            line,
            col,
            message: message.into(),
        }
    }

    pub fn syntax(at: &Spanned, message: impl Into<String>) -> Self {
        Self::new(ParseErrorKind::Syntax, at.line, at.col, message)
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ParseError {}

const SYMBOLS: &str = "+-*/^(),;:";

pub fn tokenize(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let (start_line, start_col) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars<'_>>| {
            let ch = chars.next();
            if ch == Some('\n') {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            ch
        };
        if c.is_whitespace() {
            bump(&mut chars);
            continue;
        }
        if c == '#' {
            while chars.peek().is_some_and(|&ch| ch != '\n') {
                bump(&mut chars);
            }
            continue;
        }
        let token = if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while chars
                .peek()
                .is_some_and(|&ch| ch.is_ascii_alphanumeric() || ch == '_')
            {
                s.push(bump(&mut chars).unwrap());
            }
            Token::Ident(s)
        } else if c.is_ascii_digit() {
            let mut s = String::new();
            while chars.peek().is_some_and(|&ch| ch.is_ascii_digit()) {
                s.push(bump(&mut chars).unwrap());
            }
            if chars.peek() == Some(&'.') {
                s.push(bump(&mut chars).unwrap());
                let mut frac = false;
                while chars.peek().is_some_and(|&ch| ch.is_ascii_digit()) {
                    s.push(bump(&mut chars).unwrap());
                    frac = true;
                }
                if !frac {
                    return Err(ParseError::new(
                        ParseErrorKind::Syntax,
                        start_line,
                        start_col,
                        format!("malformed number `{s}`"),
                    ));
                }
            }
            Token::Number(s)
        } else if c == '-' {
            bump(&mut chars);
            if chars.peek() == Some(&'>') {
                bump(&mut chars);
                Token::Arrow
            } else {
                Token::Sym('-')
            }
        } else if SYMBOLS.contains(c) {
            bump(&mut chars);
            Token::Sym(c)
        } else {
            return Err(ParseError::new(
                ParseErrorKind::Syntax,
                start_line,
                start_col,
                format!("unexpected character `{c}`"),
            ));
        };
        out.push(Spanned {
            token,
            line: start_line,
            col: start_col,
        });
    }
    out.push(Spanned {
        token: Token::Eof,
        line,
        col,
    });
    Ok(out)
}

/// Cursor over a token list that always ends in [`Token::Eof`].
pub struct Tokens {
    items: Vec<Spanned>,
    pos: usize,
}

impl Tokens {
    pub fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Tokens {
            items: tokenize(text)?,
            pos: 0,
        })
    }

    pub fn peek(&self) -> &Spanned {
        &self.items[self.pos]
    }

    pub fn peek_token(&self) -> &Token {
        &self.items[self.pos].token
    }

    /// Token `k` positions ahead (0 = next); [`Token::Eof`] past the end.
    pub fn peek_at(&self, k: usize) -> &Token {
        let last = self.items.len() - 1;
        &self.items[(self.pos + k).min(last)].token
    }

    pub fn next(&mut self) -> Spanned {
        let t = self.items[self.pos].clone();
        if self.pos + 1 < self.items.len() {
            self.pos += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        self.peek_token() == &Token::Eof
    }

    pub fn is_sym(&self, c: char) -> bool {
        self.peek_token() == &Token::Sym(c)
    }

    pub fn is_keyword(&self, word: &str) -> bool {
        matches!(self.peek_token(), Token::Ident(s) if s == word)
    }

    /// Consumes `c` if it is next.
    pub fn eat_sym(&mut self, c: char) -> bool {
        if self.is_sym(c) {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn expect_sym(&mut self, c: char) -> Result<Spanned, ParseError> {
        let t = self.next();
        if t.token == Token::Sym(c) {
            Ok(t)
        } else {
            Err(ParseError::syntax(&t, format!("expected `{c}`, found {}", t.token)))
        }
    }

    pub fn expect_arrow(&mut self) -> Result<Spanned, ParseError> {
        let t = self.next();
        if t.token == Token::Arrow {
            Ok(t)
        } else {
            Err(ParseError::syntax(&t, format!("expected `->`, found {}", t.token)))
        }
    }

    pub fn expect_ident(&mut self) -> Result<(String, Spanned), ParseError> {
        let t = self.next();
        match &t.token {
            Token::Ident(s) => Ok((s.clone(), t.clone())),
            other => Err(ParseError::syntax(&t, format!("expected identifier, found {other}"))),
        }
    }

    pub fn expect_int(&mut self) -> Result<(u32, Spanned), ParseError> {
        let t = self.next();
        match &t.token {
            Token::Number(s) if !s.contains('.') => s
                .parse::<u32>()
                .map(|v| (v, t.clone()))
                .map_err(|_| ParseError::syntax(&t, format!("integer `{s}` out of range"))),
            other => Err(ParseError::syntax(&t, format!("expected integer, found {other}"))),
        }
    }

    /// Parses an expression over `params` (position = parameter index).
    pub fn parse_expr<C: Coefficient>(
        &mut self,
        params: &[String],
    ) -> Result<RationalFunction<C>, ParseError> {
        let mut acc = self.parse_term(params)?;
        loop {
            if self.eat_sym('+') {
                acc = acc.add(&self.parse_term(params)?);
            } else if self.eat_sym('-') {
                acc = acc.sub(&self.parse_term(params)?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn parse_term<C: Coefficient>(
        &mut self,
        params: &[String],
    ) -> Result<RationalFunction<C>, ParseError> {
        let mut acc = self.parse_unary(params)?;
        loop {
            if self.eat_sym('*') {
                acc = acc.mul(&self.parse_unary(params)?);
            } else if self.is_sym('/') {
                let at = self.next();
                let rhs = self.parse_unary(params)?;
                acc = acc.div(&rhs).ok_or_else(|| {
                    ParseError::new(
                        ParseErrorKind::DivisionByZero,
                        at.line,
                        at.col,
                        "division by an identically zero expression",
                    )
                })?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn parse_unary<C: Coefficient>(
        &mut self,
        params: &[String],
    ) -> Result<RationalFunction<C>, ParseError> {
        if self.eat_sym('-') {
            return Ok(self.parse_unary(params)?.neg_ref());
        }
        if self.eat_sym('+') {
            return self.parse_unary(params);
        }
        let base = self.parse_atom(params)?;
        if self.eat_sym('^') {
            let (e, _) = self.expect_int()?;
            return Ok(base.pow(e));
        }
        Ok(base)
    }

    fn parse_atom<C: Coefficient>(
        &mut self,
        params: &[String],
    ) -> Result<RationalFunction<C>, ParseError> {
        let t = self.next();
        match &t.token {
            Token::Number(s) => C::parse_literal(s)
                .map(RationalFunction::constant)
                .ok_or_else(|| ParseError::syntax(&t, format!("malformed number `{s}`"))),
            Token::Ident(name) => match params.iter().position(|p| p == name) {
                Some(i) => Ok(RationalFunction::var(i)),
                None => Err(ParseError::new(
                    ParseErrorKind::UnknownParameter,
                    t.line,
                    t.col,
                    format!("unknown parameter `{name}`"),
                )),
            },
            Token::Sym('(') => {
                let inner = self.parse_expr(params)?;
                self.expect_sym(')')?;
                Ok(inner)
            }
            other => Err(ParseError::syntax(&t, format!("expected expression, found {other}"))),
        }
    }
}

/// Parses a complete expression; trailing tokens are an error.
pub fn parse_expression<C: Coefficient>(
    text: &str,
    params: &[String],
) -> Result<RationalFunction<C>, ParseError> {
    let mut tokens = Tokens::new(text)?;
    let f = tokens.parse_expr(params)?;
    if !tokens.at_eof() {
        let t = tokens.peek();
        return Err(ParseError::syntax(t, format!("unexpected {}", t.token)));
    }
    Ok(f)
}
