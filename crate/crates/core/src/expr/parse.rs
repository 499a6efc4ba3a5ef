//! Parser for the surface syntax produced by [`pretty_print`](super::pretty_print).
//!
//! Layout is not significant: newlines and indentation are whitespace, and
//! every conditional must close with `else`, so `elif`/`else` always attach
//! to the innermost conditional still missing its `else`. A leading
//! `return` before a program or branch is accepted and ignored.
//!
//! Names are resolved against the schema after parsing. A boolean feature
//! in arithmetic position reads as its 0/1 value.

use thiserror::Error;

use super::print::KEYWORDS;
use super::{type_of, Comparator, Expr, Predicate, Type, TypeError};
use crate::schema::{AtomRef, FeatureKind, FeatureSchema};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown feature `{name}` at byte {pos}")]
    UnknownFeature { name: String, pos: usize },
    #[error(transparent)]
    Type(#[from] TypeError),
}

pub fn parse(text: &str, schema: &FeatureSchema) -> Result<Expr, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0, end: text.len() };
    let ast = parser.program()?;
    let want = natural_type(&ast, schema).unwrap_or(Type::Bool);
    let expr = elaborate(&ast, schema, Some(want))?;
    type_of(&expr, schema)?;
    Ok(expr)
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Name(String),
    Num(f64),
    LParen,
    RParen,
    Colon,
    Plus,
    Minus,
    Star,
    Cmp(&'static str),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let syntax = |pos, message: &str| ParseError::Syntax { pos, message: message.to_string() };
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() {
                let ch = bytes[i] as char;
                if is_ident_char(ch) {
                    i += 1;
                } else if ch == ':' && i + 1 < bytes.len() && is_ident_char(bytes[i + 1] as char) {
                    // `Feature:Level`; a block colon is always followed by space or end.
                    i += 1;
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Name(text[start..i].to_string()), pos: start });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && i + 1 < bytes.len() && (bytes[i + 1] as char).is_ascii_digit()) {
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let value: f64 = text[start..i].parse().map_err(|_| syntax(start, "malformed number"))?;
            out.push(Token { tok: Tok::Num(value), pos: start });
            continue;
        }
        let tok = match c {
            '`' => {
                let close = text[i + 1..].find('`').ok_or_else(|| syntax(start, "unterminated quoted name"))?;
                let name = &text[i + 1..i + 1 + close];
                if name.is_empty() {
                    return Err(syntax(start, "empty quoted name"));
                }
                i += close + 2;
                // the backtick marker keeps quoted names from reading as keywords
                out.push(Token { tok: Tok::Name(format!("`{name}")), pos: start });
                continue;
            }
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ':' => Tok::Colon,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '<' | '>' | '=' | '!' => {
                let two = text.get(i..i + 2).unwrap_or("");
                let sym: &'static str = match two {
                    "<=" => "<=",
                    ">=" => ">=",
                    "==" => "==",
                    "!=" => "!=",
                    _ if c == '<' => "<",
                    _ if c == '>' => ">",
                    _ => return Err(syntax(start, &format!("unexpected character `{c}`"))),
                };
                i += sym.len();
                out.push(Token { tok: Tok::Cmp(sym), pos: start });
                continue;
            }
            _ => return Err(syntax(start, &format!("unexpected character `{c}`"))),
        };
        i += c.len_utf8();
        out.push(Token { tok, pos: start });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
enum Ast {
    Bool(bool),
    Name { name: String, pos: usize },
    Num(f64),
    Not(Box<Ast>),
    And(Box<Ast>, Box<Ast>),
    Or(Box<Ast>, Box<Ast>),
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Cmp { name: String, pos: usize, comparator: Comparator, threshold: f64 },
    If(Box<Ast>, Box<Ast>, Box<Ast>),
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.pos)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { pos: self.here(), message: message.into() })
    }

    // Quoted names carry a leading backtick, so they never match here.
    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Name(n)) if n == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn program(&mut self) -> Result<Ast, ParseError> {
        let ast = self.branch()?;
        if self.pos < self.tokens.len() {
            return self.error("unexpected trailing input");
        }
        Ok(ast)
    }

    fn branch(&mut self) -> Result<Ast, ParseError> {
        self.eat_keyword("return");
        self.expr()
    }

    fn expr(&mut self) -> Result<Ast, ParseError> {
        if self.eat_keyword("if") {
            self.if_rest()
        } else {
            self.or_expr()
        }
    }

    // After `if` / `elif`.
    fn if_rest(&mut self) -> Result<Ast, ParseError> {
        let cond = self.or_expr()?;
        self.expect(Tok::Colon, "`:` after condition")?;
        let then = self.branch()?;
        let otherwise = if self.eat_keyword("elif") {
            self.if_rest()?
        } else if self.eat_keyword("else") {
            self.expect(Tok::Colon, "`:` after else")?;
            self.branch()?
        } else {
            return self.error("expected `elif` or `else`");
        };
        Ok(Ast::If(Box::new(cond), Box::new(then), Box::new(otherwise)))
    }

    fn or_expr(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.and_expr()?;
        while self.eat_keyword("or") {
            let rhs = self.and_expr()?;
            lhs = Ast::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.not_expr()?;
        while self.eat_keyword("and") {
            let rhs = self.not_expr()?;
            lhs = Ast::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Ast, ParseError> {
        if self.eat_keyword("not") {
            return Ok(Ast::Not(Box::new(self.not_expr()?)));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> Result<Ast, ParseError> {
        let start = self.here();
        let lhs = self.arith()?;
        let Some(Tok::Cmp(sym)) = self.peek().cloned() else {
            return Ok(lhs);
        };
        let comparator = match sym {
            "<=" => Comparator::Le,
            ">" => Comparator::Gt,
            other => return self.error(format!("unsupported comparator `{other}` (use `<=` or `>`)")),
        };
        self.pos += 1;
        let Ast::Name { name, pos } = lhs else {
            return Err(ParseError::Syntax {
                pos: start,
                message: "a comparison must compare a feature with a number".into(),
            });
        };
        let negative = self.peek() == Some(&Tok::Minus);
        if negative {
            self.pos += 1;
        }
        let Some(Tok::Num(v)) = self.peek().cloned() else {
            return self.error("expected a numeric threshold");
        };
        self.pos += 1;
        let threshold = if negative { -v } else { v };
        Ok(Ast::Cmp { name, pos, comparator, threshold })
    }

    fn arith(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    lhs = Ast::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    lhs = Ast::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Tok::Star) {
            self.pos += 1;
            lhs = Ast::Mul(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Ast, ParseError> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            return match self.peek().cloned() {
                Some(Tok::Num(v)) => {
                    self.pos += 1;
                    Ok(Ast::Num(-v))
                }
                _ => self.error("`-` must precede a number"),
            };
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Ast, ParseError> {
        let pos = self.here();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Ast::Num(v))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Tok::Name(n)) => {
                if let Some(quoted) = n.strip_prefix('`') {
                    self.pos += 1;
                    return Ok(Ast::Name { name: quoted.to_string(), pos });
                }
                match n.as_str() {
                    "True" | "False" => {
                        self.pos += 1;
                        Ok(Ast::Bool(n == "True"))
                    }
                    kw if KEYWORDS.contains(&kw) => self.error(format!("unexpected keyword `{kw}`")),
                    _ => {
                        self.pos += 1;
                        Ok(Ast::Name { name: n, pos })
                    }
                }
            }
            Some(_) => self.error("expected an operand"),
            None => self.error("unexpected end of input"),
        }
    }
}

/// The type an untyped node has regardless of context, if any. Bare boolean
/// feature names are ambiguous (they may read as 0/1 in arithmetic).
fn natural_type(ast: &Ast, schema: &FeatureSchema) -> Option<Type> {
    match ast {
        Ast::Bool(_) | Ast::Not(_) | Ast::And(..) | Ast::Or(..) | Ast::Cmp { .. } => Some(Type::Bool),
        Ast::Num(_) | Ast::Add(..) | Ast::Sub(..) | Ast::Mul(..) => Some(Type::Real),
        Ast::Name { name, .. } => match schema.find(name).map(|id| &schema.feature(id).kind) {
            Some(FeatureKind::Numeric) => Some(Type::Real),
            Some(FeatureKind::Boolean) => None,
            _ => schema.resolve_atom(name).map(|_| Type::Bool),
        },
        Ast::If(_, t, e) => natural_type(t, schema).or_else(|| natural_type(e, schema)),
    }
}

fn elaborate(ast: &Ast, schema: &FeatureSchema, want: Option<Type>) -> Result<Expr, ParseError> {
    let bool_child = |a: &Ast| elaborate(a, schema, Some(Type::Bool)).map(Box::new);
    let real_child = |a: &Ast| elaborate(a, schema, Some(Type::Real)).map(Box::new);
    Ok(match ast {
        Ast::Bool(b) => Expr::BoolConst(*b),
        Ast::Num(v) => Expr::RealConst(*v),
        Ast::Name { name, pos } => {
            let unknown = || ParseError::UnknownFeature { name: name.clone(), pos: *pos };
            match schema.find(name) {
                Some(id) => match schema.feature(id).kind {
                    FeatureKind::Numeric => Expr::RealAtom(id),
                    FeatureKind::Boolean if want == Some(Type::Real) => Expr::RealAtom(id),
                    FeatureKind::Boolean => Expr::BoolAtom(AtomRef::boolean(id)),
                    // a bare categorical name has no value of its own; the
                    // type checker reports the kind mismatch
                    FeatureKind::Categorical { .. } => Expr::RealAtom(id),
                },
                None => Expr::BoolAtom(schema.resolve_atom(name).ok_or_else(unknown)?),
            }
        }
        Ast::Not(c) => Expr::Not(bool_child(c)?),
        Ast::And(l, r) => Expr::And(bool_child(l)?, bool_child(r)?),
        Ast::Or(l, r) => Expr::Or(bool_child(l)?, bool_child(r)?),
        Ast::Add(l, r) => Expr::Add(real_child(l)?, real_child(r)?),
        Ast::Sub(l, r) => Expr::Sub(real_child(l)?, real_child(r)?),
        Ast::Mul(l, r) => Expr::Mul(real_child(l)?, real_child(r)?),
        Ast::Cmp { name, pos, comparator, threshold } => {
            let id = schema
                .find(name)
                .ok_or_else(|| ParseError::UnknownFeature { name: name.clone(), pos: *pos })?;
            Expr::Predicate(Predicate::new(id, *comparator, *threshold))
        }
        Ast::If(c, t, e) => {
            let branch = want.or_else(|| natural_type(ast, schema)).unwrap_or(Type::Bool);
            Expr::If(
                bool_child(c)?,
                Box::new(elaborate(t, schema, Some(branch))?),
                Box::new(elaborate(e, schema, Some(branch))?),
            )
        }
    })
}
