//! Recursive-descent parser for target formulas.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | 'x'<k> | 'pi' | func '(' sum ')' | '(' sum ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x1^2`
//! is `-(x1^2)`. Chains of `+`/`*` fold to the left into binary nodes.

use super::{BinaryOp, Node, TargetError, TargetSpec, UnaryOp};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, TargetError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let v: f64 = lit
                .parse()
                .map_err(|_| TargetError::Syntax { pos: start, msg: format!("malformed number `{lit}`") })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => return Err(TargetError::Syntax { pos: i, msg: format!("unexpected character `{c}`") }),
            };
            out.push((i, tok));
            i += c.len_utf8();
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    dim: usize,
    nodes: Vec<Node>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn push(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn expect_rparen(&mut self) -> Result<(), TargetError> {
        match self.peek() {
            Some(Tok::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(TargetError::Syntax { pos: self.offset(), msg: "expected `)`".into() }),
        }
    }

    fn sum(&mut self) -> Result<usize, TargetError> {
        let mut lhs = self.product()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinaryOp::Add } else { BinaryOp::Sub };
            self.pos += 1;
            let rhs = self.product()?;
            lhs = self.push(Node::Binary(op, lhs, rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<usize, TargetError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinaryOp::Mul } else { BinaryOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = self.push(Node::Binary(op, lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<usize, TargetError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(self.push(Node::Unary(UnaryOp::Neg, inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<usize, TargetError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(self.push(Node::Binary(BinaryOp::Pow, base, exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<usize, TargetError> {
        let at = self.offset();
        let Some((_, tok)) = self.toks.get(self.pos).cloned() else {
            return Err(TargetError::Syntax { pos: at, msg: "unexpected end of input".into() });
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(self.push(Node::Const(v))),
            Tok::LParen => {
                let inner = self.sum()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => self.ident(at, &name),
            Tok::Op(c) => Err(TargetError::Syntax { pos: at, msg: format!("unexpected operator `{c}`") }),
            Tok::RParen => Err(TargetError::Syntax { pos: at, msg: "unexpected `)`".into() }),
        }
    }

    fn ident(&mut self, at: usize, name: &str) -> Result<usize, TargetError> {
        if let Some(func) = UnaryOp::from_name(name) {
            if self.peek() != Some(&Tok::LParen) {
                return Err(TargetError::Syntax { pos: self.offset(), msg: format!("expected `(` after `{name}`") });
            }
            self.pos += 1;
            let arg = self.sum()?;
            self.expect_rparen()?;
            return Ok(self.push(Node::Unary(func, arg)));
        }
        if name == "pi" {
            return Ok(self.push(Node::Const(std::f64::consts::PI)));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits
                    .parse()
                    .map_err(|_| TargetError::UnknownIdentifier { pos: at, name: name.into() })?;
                if index == 0 {
                    return Err(TargetError::UnknownIdentifier { pos: at, name: name.into() });
                }
                if index > self.dim {
                    return Err(TargetError::VariableOutOfRange { index, dim: self.dim });
                }
                return Ok(self.push(Node::Var(index - 1)));
            }
        }
        Err(TargetError::UnknownIdentifier { pos: at, name: name.into() })
    }
}

/// Parses a formula over `x1..x<dim>` into a binarized computation graph.
pub fn parse_expression(text: &str, dim: usize) -> Result<TargetSpec, TargetError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0, end: text.len(), dim, nodes: Vec::new() };
    let out = p.sum()?;
    if p.pos != p.toks.len() {
        return Err(TargetError::Syntax { pos: p.offset(), msg: "unexpected trailing input".into() });
    }
    TargetSpec::new(text.trim(), dim, p.nodes, out)
}
