//! Recursive-descent parser for the formal language.
//!
//! Accepts the canonical prefix form (`Add(x,1)`) as well as infix arithmetic
//! (`x + 1`, `2x`, `AreaOf(Square(A,B,C,D)) - AreaOf(Circle(O))`), which is how
//! model replies and hand-written rule files usually spell equations.

use super::table::Pred;
use super::term::{is_point_name, is_var_name, Number, Term};
use super::FormalError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Dollar,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    start: usize,
    end: usize,
}

fn lex(input: &str) -> Result<Vec<Token>, FormalError> {
    let bytes = input.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = match c {
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'$' => Some(Tok::Dollar),
            _ => None,
        };
        if let Some(tok) = single {
            i += 1;
            out.push(Token { tok, start, end: i });
        } else if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            out.push(Token { tok: Tok::Num(input[start..i].to_string()), start, end: i });
        } else if c.is_ascii_alphabetic() {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(input[start..i].to_string()), start, end: i });
        } else {
            let ch = input[i..].chars().next().unwrap_or('?');
            return Err(FormalError::Syntax { pos: i, msg: format!("unexpected character {ch:?}") });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.len, |t| t.start)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, FormalError> {
        Err(FormalError::Syntax { pos: self.offset(), msg: msg.into() })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), FormalError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn additive(&mut self) -> Result<Term, FormalError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let pred = match self.peek() {
                Some(Tok::Plus) => Pred::Add,
                Some(Tok::Minus) => Pred::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.multiplicative()?;
            lhs = Term::App(pred, vec![lhs, rhs]);
        }
    }

    fn multiplicative(&mut self) -> Result<Term, FormalError> {
        let mut lhs = self.unary()?;
        loop {
            let pred = match self.peek() {
                Some(Tok::Star) => Pred::Mul,
                Some(Tok::Slash) => Pred::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Term::App(pred, vec![lhs, rhs]);
        }
    }

    fn unary(&mut self) -> Result<Term, FormalError> {
        if self.peek() == Some(&Tok::Minus) {
            let minus_end = self.toks[self.pos].end;
            self.pos += 1;
            if let Some(Token { tok: Tok::Num(text), start, .. }) = self.toks.get(self.pos).cloned() {
                if start == minus_end {
                    self.pos += 1;
                    let n = Number::from_decimal(&format!("-{text}"))
                        .ok_or(FormalError::Syntax { pos: start, msg: "bad number".into() })?;
                    return self.implicit_product(Term::Num(n), start + text.len());
                }
            }
            let operand = self.unary()?;
            return Ok(Term::App(Pred::Mul, vec![Term::int(-1), operand]));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Term, FormalError> {
        let base = self.primary()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Term::App(Pred::Pow, vec![base, exp]));
        }
        Ok(base)
    }

    /// `3x` and `2pi` and `2(x+1)` read as products when written without a gap.
    fn implicit_product(&mut self, num: Term, num_end: usize) -> Result<Term, FormalError> {
        let adjacent = match self.toks.get(self.pos) {
            Some(Token { tok: Tok::Ident(name), start, .. }) => {
                *start == num_end && name.starts_with(|c: char| c.is_ascii_lowercase())
            }
            Some(Token { tok: Tok::LParen, start, .. }) => *start == num_end,
            _ => false,
        };
        if adjacent {
            let rhs = self.power()?;
            Ok(Term::App(Pred::Mul, vec![num, rhs]))
        } else {
            Ok(num)
        }
    }

    fn primary(&mut self) -> Result<Term, FormalError> {
        let Some(token) = self.bump() else {
            return self.err("unexpected end of input");
        };
        match token.tok {
            Tok::Dollar => Ok(Term::Unknown),
            Tok::Num(text) => {
                let n = Number::from_decimal(&text)
                    .ok_or(FormalError::Syntax { pos: token.start, msg: "bad number".into() })?;
                self.implicit_product(Term::Num(n), token.end)
            }
            Tok::LParen => {
                let inner = self.additive()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if self.peek() == Some(&Tok::LParen) {
                    let pred = if name == "sqrt" {
                        Pred::Sqrt
                    } else {
                        Pred::from_name(&name).ok_or(FormalError::UnknownPredicate(name.clone()))?
                    };
                    self.pos += 1;
                    let mut args = Vec::new();
                    if self.peek() == Some(&Tok::RParen) {
                        return self.err(format!("{pred} needs arguments"));
                    }
                    loop {
                        args.push(self.additive()?);
                        match self.bump().map(|t| t.tok) {
                            Some(Tok::Comma) => continue,
                            Some(Tok::RParen) => break,
                            _ => {
                                self.pos -= 1;
                                return self.err("expected ',' or ')'");
                            }
                        }
                    }
                    return Ok(Term::App(pred, args));
                }
                if name == "pi" {
                    Ok(Term::Pi)
                } else if is_point_name(&name) {
                    Ok(Term::Point(name))
                } else if is_var_name(&name) {
                    Ok(Term::Var(name))
                } else if Pred::from_name(&name).is_some() {
                    Err(FormalError::Syntax { pos: token.start, msg: format!("{name} needs arguments") })
                } else {
                    Err(FormalError::BadName(name))
                }
            }
            other => Err(FormalError::Syntax { pos: token.start, msg: format!("unexpected token {other:?}") }),
        }
    }
}

/// Parses one expression and validates it against the predicate table.
pub fn parse_term(input: &str) -> Result<Term, FormalError> {
    let toks = lex(input)?;
    let mut p = Parser { toks, pos: 0, len: input.len() };
    let term = p.additive()?;
    if p.pos < p.toks.len() {
        return p.err("trailing input");
    }
    term.validate()?;
    Ok(term)
}
