//! Recursive-descent parser for the expression language.
//!
//! ```text
//! expr    := sum
//! sum     := prod { "+" prod }
//! prod    := [ posreal "*" ] atom
//! atom    := "log" "(" powsum ")" | "max" "(" expr { "," expr } ")" | "(" expr ")" | "0"
//! powsum  := powterm { "+" powterm }
//! powterm := "|" poly "|" "^" posreal
//! poly    := [ "-" ] pterm { ("+" | "-") pterm }
//! pterm   := pfactor { "*" pfactor }
//! pfactor := pbase [ "^" integer ]
//! pbase   := number [ "i" ] | "i" | "z" index | "(" poly ")"
//! ```

use num_complex::Complex64;

use super::poly::Poly;
use super::{PowTerm, PshExpr};
use crate::error::{LelongError, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64, String),
    Imag(f64),
    Ident(String),
    Sym(char),
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        let (tl, tc) = (line, column);
        if ch == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if ch.is_whitespace() {
            column += 1;
            i += 1;
            continue;
        }
        if ch.is_ascii_digit() || ch == '.' {
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
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| LelongError::Syntax {
                line: tl,
                column: tc,
                message: format!("malformed number `{s}`"),
            })?;
            column += i - start;
            if i < chars.len() && chars[i] == 'i' && !(i + 1 < chars.len() && chars[i + 1].is_alphanumeric()) {
                i += 1;
                column += 1;
                out.push(Token {
                    tok: Tok::Imag(v),
                    line: tl,
                    column: tc,
                });
            } else {
                out.push(Token {
                    tok: Tok::Num(v, s),
                    line: tl,
                    column: tc,
                });
            }
            continue;
        }
        if ch.is_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            column += i - start;
            out.push(Token {
                tok: Tok::Ident(s),
                line: tl,
                column: tc,
            });
            continue;
        }
        if "()|^+-*,".contains(ch) {
            out.push(Token {
                tok: Tok::Sym(ch),
                line: tl,
                column: tc,
            });
            i += 1;
            column += 1;
            continue;
        }
        return Err(LelongError::Syntax {
            line: tl,
            column: tc,
            message: format!("unexpected character `{ch}`"),
        });
    }
    out.push(Token {
        tok: Tok::End,
        line,
        column,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    max_dim: Option<usize>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, t: &Token, message: impl Into<String>) -> Result<T> {
        Err(LelongError::Syntax {
            line: t.line,
            column: t.column,
            message: message.into(),
        })
    }

    fn describe(t: &Tok) -> String {
        match t {
            Tok::Num(_, s) => format!("number `{s}`"),
            Tok::Imag(v) => format!("imaginary literal `{v}i`"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of input".into(),
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        let t = self.next();
        if t.tok == Tok::Sym(c) {
            Ok(())
        } else {
            self.err(&t, format!("expected `{c}`, found {}", Self::describe(&t.tok)))
        }
    }

    fn is_sym(&self, c: char) -> bool {
        self.peek().tok == Tok::Sym(c)
    }

    fn posreal(&mut self, what: &'static str) -> Result<f64> {
        let t = self.next();
        match t.tok {
            Tok::Num(v, _) => {
                if v > 0.0 && v.is_finite() {
                    Ok(v)
                } else {
                    Err(LelongError::NonPositive {
                        what,
                        value: v,
                        line: t.line,
                        column: t.column,
                    })
                }
            }
            Tok::Sym('-') => {
                let v = match self.peek().tok {
                    Tok::Num(v, _) => -v,
                    _ => return self.err(&t, format!("expected {what}")),
                };
                Err(LelongError::NonPositive {
                    what,
                    value: v,
                    line: t.line,
                    column: t.column,
                })
            }
            ref other => self.err(&t, format!("expected {what}, found {}", Self::describe(other))),
        }
    }

    fn expr(&mut self) -> Result<PshExpr> {
        let mut items = vec![self.prod()?];
        while self.is_sym('+') {
            self.next();
            items.push(self.prod()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            PshExpr::Sum(items)
        })
    }

    fn prod(&mut self) -> Result<PshExpr> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(v, _) => {
                let after = self.toks[self.pos + 1].tok.clone();
                if after == Tok::Sym('*') {
                    let c = self.posreal("scale factor")?;
                    self.expect('*')?;
                    Ok(PshExpr::Scale(c, Box::new(self.atom()?)))
                } else if v == 0.0 {
                    self.next();
                    Ok(PshExpr::zero())
                } else {
                    self.err(&t, "a bare constant is not allowed; only `0` denotes the zero function")
                }
            }
            Tok::Sym('-') => Err(self.posreal("scale factor").unwrap_err()),
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<PshExpr> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(name) if name == "log" => {
                self.expect('(')?;
                let mut terms = vec![self.powterm()?];
                while self.is_sym('+') {
                    self.next();
                    terms.push(self.powterm()?);
                }
                self.expect(')')?;
                Ok(PshExpr::LogSumPow(terms))
            }
            Tok::Ident(name) if name == "max" => {
                self.expect('(')?;
                let mut args = vec![self.expr()?];
                while self.is_sym(',') {
                    self.next();
                    args.push(self.expr()?);
                }
                self.expect(')')?;
                Ok(PshExpr::Max(args))
            }
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Num(v, _) if *v == 0.0 => Ok(PshExpr::zero()),
            Tok::Ident(name) => self.err(&t, format!("unknown function `{name}`; expected `log`, `max` or `(`")),
            other => self.err(
                &t,
                format!("expected `log`, `max`, `0` or `(`, found {}", Self::describe(other)),
            ),
        }
    }

    fn powterm(&mut self) -> Result<PowTerm> {
        self.expect('|')?;
        let p = self.poly()?;
        self.expect('|')?;
        self.expect('^')?;
        let a = self.posreal("exponent")?;
        Ok(PowTerm::new(p, a))
    }

    fn poly(&mut self) -> Result<Poly> {
        let mut acc = if self.is_sym('-') {
            self.next();
            self.pterm()?.neg()
        } else {
            self.pterm()?
        };
        loop {
            if self.is_sym('+') {
                self.next();
                acc = acc.add(&self.pterm()?);
            } else if self.is_sym('-') {
                self.next();
                acc = acc.sub(&self.pterm()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn pterm(&mut self) -> Result<Poly> {
        let mut acc = self.pfactor()?;
        while self.is_sym('*') {
            self.next();
            acc = acc.mul(&self.pfactor()?);
        }
        Ok(acc)
    }

    fn pfactor(&mut self) -> Result<Poly> {
        let base = self.pbase()?;
        if self.is_sym('^') {
            self.next();
            let t = self.next();
            match t.tok {
                Tok::Num(v, ref s) if v.fract() == 0.0 && v >= 0.0 && !s.contains(['.', 'e', 'E']) && v < 1e6 => {
                    Ok(base.pow(v as u32))
                }
                ref other => self.err(
                    &t,
                    format!("expected a nonnegative integer power, found {}", Self::describe(other)),
                ),
            }
        } else {
            Ok(base)
        }
    }

    fn pbase(&mut self) -> Result<Poly> {
        let t = self.next();
        match &t.tok {
            Tok::Num(v, _) => Ok(Poly::constant(Complex64::new(*v, 0.0))),
            Tok::Imag(v) => Ok(Poly::constant(Complex64::new(0.0, *v))),
            Tok::Ident(name) if name == "i" => Ok(Poly::constant(Complex64::new(0.0, 1.0))),
            Tok::Ident(name) => {
                let idx = name
                    .strip_prefix('z')
                    .and_then(|d| {
                        if d.starts_with('0') {
                            None
                        } else {
                            d.parse::<usize>().ok()
                        }
                    })
                    .filter(|&k| k >= 1);
                match idx {
                    Some(k) if self.max_dim.is_none_or(|n| k <= n) => Ok(Poly::var(k - 1)),
                    _ => Err(LelongError::UnknownVariable {
                        name: name.clone(),
                        line: t.line,
                        column: t.column,
                    }),
                }
            }
            Tok::Sym('(') => {
                let p = self.poly()?;
                self.expect(')')?;
                Ok(p)
            }
            other => self.err(
                &t,
                format!("expected a polynomial term, found {}", Self::describe(other)),
            ),
        }
    }
}

fn run(text: &str, max_dim: Option<usize>) -> Result<PshExpr> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, max_dim };
    let e = p.expr()?;
    let t = p.peek().clone();
    if t.tok != Tok::End {
        return p.err(&t, format!("unexpected {} after expression", Parser::describe(&t.tok)));
    }
    Ok(e)
}

/// Parses an expression; variables `z1, z2, ...` are unrestricted.
pub fn parse(text: &str) -> Result<PshExpr> {
    run(text, None)
}

/// Parses an expression on `C^n`, rejecting variables beyond `zn`.
pub fn parse_in_dim(text: &str, n: usize) -> Result<PshExpr> {
    run(text, Some(n))
}
