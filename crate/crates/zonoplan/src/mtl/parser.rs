//! Prefix s-expression formula syntax.
//!
//! ```text
//! formula := true | SYMBOL | ( not formula )
//!          | ( and formula formula+ ) | ( or formula formula+ )
//!          | ( until t1 t2 formula formula )
//!          | ( until* t1 t2 formula formula )      ; conventional until
//!          | ( eventually t1 t2 formula )
//!          | ( always t1 t2 formula )
//! ```
//!
//! Example: `(and (eventually 0 25 G1) (always 0 25 (not O1)))`.
//! N-ary `and`/`or` fold left into binary nodes.

use crate::mtl::formula::{conventional_until, MtlFormula};
use crate::mtl::{MtlError, MtlResult};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Sym(String),
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut sym = String::new();
    for ch in text.chars() {
        match ch {
            '(' | ')' => {
                if !sym.is_empty() {
                    tokens.push(Token::Sym(std::mem::take(&mut sym)));
                }
                tokens.push(if ch == '(' { Token::Open } else { Token::Close });
            }
            c if c.is_whitespace() => {
                if !sym.is_empty() {
                    tokens.push(Token::Sym(std::mem::take(&mut sym)));
                }
            }
            c => sym.push(c),
        }
    }
    if !sym.is_empty() {
        tokens.push(Token::Sym(sym));
    }
    tokens
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn err(&self, message: impl Into<String>) -> MtlError {
        MtlError::Parse {
            position: self.pos,
            message: message.into(),
        }
    }

    fn next(&mut self) -> MtlResult<Token> {
        let t = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| self.err("unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn expect_close(&mut self) -> MtlResult<()> {
        match self.next()? {
            Token::Close => Ok(()),
            other => Err(self.err(format!("expected `)`, found {other:?}"))),
        }
    }

    fn number(&mut self) -> MtlResult<usize> {
        match self.next()? {
            Token::Sym(s) => s
                .parse::<usize>()
                .map_err(|_| self.err(format!("expected time bound, found `{s}`"))),
            other => Err(self.err(format!("expected time bound, found {other:?}"))),
        }
    }

    fn formula(&mut self) -> MtlResult<MtlFormula> {
        match self.next()? {
            Token::Sym(s) if s == "true" => Ok(MtlFormula::True),
            Token::Sym(s) => Ok(MtlFormula::Prop(s)),
            Token::Open => {
                let head = match self.next()? {
                    Token::Sym(s) => s,
                    other => return Err(self.err(format!("expected operator, found {other:?}"))),
                };
                let node = match head.as_str() {
                    "not" => {
                        let f = self.formula()?;
                        MtlFormula::not(f)
                    }
                    "and" | "or" => {
                        let mut operands = vec![self.formula()?, self.formula()?];
                        while self.peek() != Some(&Token::Close) {
                            operands.push(self.formula()?);
                        }
                        let mut it = operands.into_iter();
                        let first = it.next().unwrap();
                        if head == "and" {
                            it.fold(first, MtlFormula::and)
                        } else {
                            it.fold(first, MtlFormula::or)
                        }
                    }
                    "until" | "until*" => {
                        let t1 = self.number()?;
                        let t2 = self.number()?;
                        let f = self.formula()?;
                        let g = self.formula()?;
                        if head == "until" {
                            MtlFormula::until(f, g, t1, t2)?
                        } else {
                            conventional_until(f, g, t1, t2)?
                        }
                    }
                    "eventually" => {
                        let t1 = self.number()?;
                        let t2 = self.number()?;
                        MtlFormula::eventually(self.formula()?, t1, t2)?
                    }
                    "always" => {
                        let t1 = self.number()?;
                        let t2 = self.number()?;
                        MtlFormula::always(self.formula()?, t1, t2)?
                    }
                    other => return Err(self.err(format!("unknown operator `{other}`"))),
                };
                self.expect_close()?;
                Ok(node)
            }
            Token::Close => Err(self.err("unexpected `)`")),
        }
    }
}

pub fn parse_formula(text: &str) -> MtlResult<MtlFormula> {
    let mut p = Parser {
        tokens: tokenize(text),
        pos: 0,
    };
    let f = p.formula()?;
    if p.pos != p.tokens.len() {
        return Err(p.err("trailing tokens after formula"));
    }
    Ok(f)
}
