//! Lexer and recursive-descent parser for the surface language.
//!
//! A program is a header of `var name: (public|secret) (trusted|untrusted);`
//! declarations followed by a command. `[#]` marks an attacker hole.
//! Multi-variable checked endorsements are desugared while parsing into a
//! nest of single-variable ones, the first carrying the real condition and
//! the rest a constant-true check.

use crate::ast::{BinOp, Cmd, CmdKind, Expr, ExprKind, LabelId, Program, Span, DEFAULT_DOMAIN};
use crate::lattice::{Conf, Integ, Level, SecurityEnv, VarId};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{span}: syntax error: {msg}")]
    Syntax { msg: String, span: Span },
    /// Undeclared or invalidly declared variable.
    #[error("{span}: environment error: {msg}")]
    Env { msg: String, span: Span },
    /// Duplicate or malformed endorsement label.
    #[error("{span}: label error: {msg}")]
    Label { msg: String, span: Span },
    #[error("{span}: declassification error: {msg}")]
    Declassify { msg: String, span: Span },
}

pub type ParseResult<T> = Result<T, ParseError>;

/// Variable names with this prefix are reserved for the checked-endorsement
/// lowering and cannot be declared in source programs.
pub const TEMP_PREFIX: &str = "__chk_";

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Var,
    Public,
    Secret,
    Trusted,
    Untrusted,
    Skip,
    If,
    Else,
    While,
    Endorse,
    Declassify,
    Ident(String),
    Num(u32),
    Hole,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semi,
    Colon,
    Comma,
    Assign,
    At,
    Plus,
    Minus,
    Star,
    EqEq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Num(n) => format!("number `{n}`"),
            Tok::Eof => "end of input".to_string(),
            Tok::Hole => "`[#]`".to_string(),
            Tok::Assign => "`:=`".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::Var => "var",
            Tok::Public => "public",
            Tok::Secret => "secret",
            Tok::Trusted => "trusted",
            Tok::Untrusted => "untrusted",
            Tok::Skip => "skip",
            Tok::If => "if",
            Tok::Else => "else",
            Tok::While => "while",
            Tok::Endorse => "endorse",
            Tok::Declassify => "declassify",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Comma => ",",
            Tok::At => "@",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            _ => "",
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Lexer<'a> {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> u8 {
        let c = self.src[self.pos];
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn tokenize(mut self) -> ParseResult<Vec<(Tok, Span)>> {
        let mut out = Vec::new();
        loop {
            while let Some(c) = self.peek() {
                if c == b'/' && self.peek2() == Some(b'/') {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                } else if c == b'/' && self.peek2() == Some(b'*') {
                    let span = Span::new(self.line, self.col);
                    self.bump();
                    self.bump();
                    loop {
                        match self.peek() {
                            Some(b'*') if self.peek2() == Some(b'/') => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            Some(_) => {
                                self.bump();
                            }
                            None => {
                                return Err(ParseError::Syntax {
                                    msg: "unterminated block comment".into(),
                                    span,
                                })
                            }
                        }
                    }
                } else if c.is_ascii_whitespace() {
                    self.bump();
                } else {
                    break;
                }
            }
            let span = Span::new(self.line, self.col);
            let Some(c) = self.peek() else {
                out.push((Tok::Eof, span));
                return Ok(out);
            };
            let tok = match c {
                b'(' => {
                    self.bump();
                    Tok::LParen
                }
                b')' => {
                    self.bump();
                    Tok::RParen
                }
                b'{' => {
                    self.bump();
                    Tok::LBrace
                }
                b'}' => {
                    self.bump();
                    Tok::RBrace
                }
                b';' => {
                    self.bump();
                    Tok::Semi
                }
                b',' => {
                    self.bump();
                    Tok::Comma
                }
                b'@' => {
                    self.bump();
                    Tok::At
                }
                b'+' => {
                    self.bump();
                    Tok::Plus
                }
                b'-' => {
                    self.bump();
                    Tok::Minus
                }
                b'*' => {
                    self.bump();
                    Tok::Star
                }
                b'[' => {
                    if self.peek2() == Some(b'#') && self.src.get(self.pos + 2) == Some(&b']') {
                        self.bump();
                        self.bump();
                        self.bump();
                        Tok::Hole
                    } else {
                        return Err(ParseError::Syntax {
                            msg: "expected `[#]`".into(),
                            span,
                        });
                    }
                }
                b':' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::Assign
                    } else {
                        Tok::Colon
                    }
                }
                b'=' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::EqEq
                    } else {
                        return Err(ParseError::Syntax {
                            msg: "single `=` is not an operator; use `==` or `:=`".into(),
                            span,
                        });
                    }
                }
                b'!' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::Ne
                    } else {
                        return Err(ParseError::Syntax {
                            msg: "expected `!=`".into(),
                            span,
                        });
                    }
                }
                b'<' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::Le
                    } else {
                        Tok::Lt
                    }
                }
                b'>' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::Ge
                    } else {
                        Tok::Gt
                    }
                }
                b'&' => {
                    self.bump();
                    if self.peek() == Some(b'&') {
                        self.bump();
                        Tok::AndAnd
                    } else {
                        return Err(ParseError::Syntax {
                            msg: "expected `&&`".into(),
                            span,
                        });
                    }
                }
                b'|' => {
                    self.bump();
                    if self.peek() == Some(b'|') {
                        self.bump();
                        Tok::OrOr
                    } else {
                        return Err(ParseError::Syntax {
                            msg: "expected `||`".into(),
                            span,
                        });
                    }
                }
                b'0'..=b'9' => {
                    let mut n: u64 = 0;
                    while let Some(c @ b'0'..=b'9') = self.peek() {
                        n = n * 10 + u64::from(c - b'0');
                        if n > u64::from(u32::MAX) {
                            return Err(ParseError::Syntax {
                                msg: "number literal too large".into(),
                                span,
                            });
                        }
                        self.bump();
                    }
                    Tok::Num(n as u32)
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    let start = self.pos;
                    while let Some(c) = self.peek() {
                        // dots are permitted so generated endorsement labels
                        // survive a print/parse round trip
                        if c.is_ascii_alphanumeric() || c == b'_' || c == b'.' {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    let word = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                    match word {
                        "var" => Tok::Var,
                        "public" => Tok::Public,
                        "secret" => Tok::Secret,
                        "trusted" => Tok::Trusted,
                        "untrusted" => Tok::Untrusted,
                        "skip" => Tok::Skip,
                        "if" => Tok::If,
                        "else" => Tok::Else,
                        "while" => Tok::While,
                        "endorse" => Tok::Endorse,
                        "declassify" => Tok::Declassify,
                        _ => Tok::Ident(word.to_string()),
                    }
                }
                other => {
                    return Err(ParseError::Syntax {
                        msg: format!("unexpected character `{}`", other as char),
                        span,
                    })
                }
            };
            out.push((tok, span));
        }
    }
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    env: SecurityEnv,
    labels: Vec<String>,
    holes: usize,
    auto_label: u32,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> ParseResult<Span> {
        if *self.peek() == want {
            Ok(self.bump().1)
        } else {
            Err(ParseError::Syntax {
                msg: format!(
                    "expected {}, found {}",
                    want.describe(),
                    self.peek().describe()
                ),
                span: self.span(),
            })
        }
    }

    fn ident(&mut self) -> ParseResult<(String, Span)> {
        match self.bump() {
            (Tok::Ident(s), span) => Ok((s, span)),
            (other, span) => Err(ParseError::Syntax {
                msg: format!("expected identifier, found {}", other.describe()),
                span,
            }),
        }
    }

    fn resolve(&self, name: &str, span: Span) -> ParseResult<VarId> {
        self.env.lookup(name).ok_or_else(|| ParseError::Env {
            msg: format!("variable `{name}` is not declared"),
            span,
        })
    }

    fn intern_label(&mut self, name: String, span: Span) -> ParseResult<LabelId> {
        if self.labels.contains(&name) {
            return Err(ParseError::Label {
                msg: format!("endorsement label `{name}` is used more than once"),
                span,
            });
        }
        self.labels.push(name);
        Ok(LabelId(self.labels.len() as u32 - 1))
    }

    fn fresh_label(&mut self, span: Span) -> ParseResult<LabelId> {
        loop {
            self.auto_label += 1;
            let cand = format!("eta{}", self.auto_label);
            if !self.labels.contains(&cand) {
                return self.intern_label(cand, span);
            }
        }
    }

    /// `@name` after `endorse`, or a fresh auto-assigned label.
    fn endorse_label(&mut self) -> ParseResult<LabelId> {
        if *self.peek() == Tok::At {
            self.bump();
            let (name, span) = self.ident()?;
            self.intern_label(name, span)
        } else {
            let span = self.span();
            self.fresh_label(span)
        }
    }

    fn parse_decls(&mut self) -> ParseResult<()> {
        while *self.peek() == Tok::Var {
            self.bump();
            let (name, span) = self.ident()?;
            if name.starts_with(TEMP_PREFIX) {
                return Err(ParseError::Env {
                    msg: format!("variable names starting with `{TEMP_PREFIX}` are reserved"),
                    span,
                });
            }
            if name.contains('.') {
                return Err(ParseError::Env {
                    msg: "variable names may not contain `.`".into(),
                    span,
                });
            }
            self.expect(Tok::Colon)?;
            let conf = match self.bump() {
                (Tok::Public, _) => Conf::Public,
                (Tok::Secret, _) => Conf::Secret,
                (other, span) => {
                    return Err(ParseError::Syntax {
                        msg: format!("expected `public` or `secret`, found {}", other.describe()),
                        span,
                    })
                }
            };
            let integ = match self.bump() {
                (Tok::Trusted, _) => Integ::Trusted,
                (Tok::Untrusted, _) => Integ::Untrusted,
                (other, span) => {
                    return Err(ParseError::Syntax {
                        msg: format!(
                            "expected `trusted` or `untrusted`, found {}",
                            other.describe()
                        ),
                        span,
                    })
                }
            };
            let level = Level::new(conf, integ);
            if name == "reach" && level != Level::bottom() {
                return Err(ParseError::Env {
                    msg: "`reach` must be declared public trusted".into(),
                    span,
                });
            }
            if self.env.declare(&name, level).is_none() {
                return Err(ParseError::Env {
                    msg: format!("variable `{name}` is declared twice"),
                    span,
                });
            }
            self.expect(Tok::Semi)?;
        }
        Ok(())
    }

    /// Guard expressions of `if`/`while` may not contain declassification.
    fn parse_guard(&mut self) -> ParseResult<Expr> {
        self.expect(Tok::LParen)?;
        let span = self.span();
        let e = self.parse_expr()?;
        self.expect(Tok::RParen)?;
        if e.contains_declassify() {
            return Err(ParseError::Declassify {
                msg: "declassification is not allowed in `if`/`while` guards".into(),
                span,
            });
        }
        Ok(e)
    }

    fn parse_block(&mut self) -> ParseResult<Cmd> {
        let span = self.expect(Tok::LBrace)?;
        if *self.peek() == Tok::RBrace {
            self.bump();
            return Ok(Cmd::new(CmdKind::Skip, span));
        }
        let body = self.parse_stmts()?;
        self.expect(Tok::RBrace)?;
        Ok(body)
    }

    fn parse_stmts(&mut self) -> ParseResult<Cmd> {
        let mut items = vec![self.parse_stmt()?];
        while *self.peek() == Tok::Semi {
            self.bump();
            match self.peek() {
                Tok::RBrace | Tok::Eof => break,
                _ => items.push(self.parse_stmt()?),
            }
        }
        let mut cmd = items.pop().unwrap();
        while let Some(prev) = items.pop() {
            let span = prev.span;
            cmd = Cmd::new(CmdKind::Seq(Box::new(prev), Box::new(cmd)), span);
        }
        Ok(cmd)
    }

    fn parse_stmt(&mut self) -> ParseResult<Cmd> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Skip => {
                self.bump();
                Ok(Cmd::new(CmdKind::Skip, span))
            }
            Tok::Hole => {
                self.bump();
                let idx = self.holes;
                self.holes += 1;
                Ok(Cmd::new(CmdKind::Hole(idx), span))
            }
            Tok::If => {
                self.bump();
                let guard = self.parse_guard()?;
                let then_branch = self.parse_block()?;
                let else_branch = if *self.peek() == Tok::Else {
                    self.bump();
                    if *self.peek() == Tok::If {
                        self.parse_stmt()?
                    } else {
                        self.parse_block()?
                    }
                } else {
                    Cmd::new(CmdKind::Skip, span)
                };
                Ok(Cmd::new(
                    CmdKind::If(guard, Box::new(then_branch), Box::new(else_branch)),
                    span,
                ))
            }
            Tok::While => {
                self.bump();
                let guard = self.parse_guard()?;
                let body = self.parse_block()?;
                Ok(Cmd::new(CmdKind::While(guard, Box::new(body)), span))
            }
            Tok::Endorse => self.parse_checked_endorse(span),
            Tok::Ident(name) => {
                self.bump();
                let target = self.resolve(&name, span)?;
                self.expect(Tok::Assign)?;
                if *self.peek() == Tok::Endorse {
                    self.bump();
                    let label = self.endorse_label()?;
                    self.expect(Tok::LParen)?;
                    let expr = self.parse_expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(Cmd::new(
                        CmdKind::Endorse {
                            label,
                            target,
                            expr,
                        },
                        span,
                    ))
                } else {
                    let expr = self.parse_expr()?;
                    Ok(Cmd::new(CmdKind::Assign(target, expr), span))
                }
            }
            other => Err(ParseError::Syntax {
                msg: format!("expected a statement, found {}", other.describe()),
                span,
            }),
        }
    }

    /// `endorse@l(x1, .., xn) if (e) { c1 } else { c2 }`, desugared to a nest
    /// of single-variable checked endorsements. The outermost carries the
    /// real condition; inner ones check the constant 1 and fall back to skip,
    /// so the condition is evaluated as early as possible.
    fn parse_checked_endorse(&mut self, span: Span) -> ParseResult<Cmd> {
        self.expect(Tok::Endorse)?;
        let (base_name, label_span) = if *self.peek() == Tok::At {
            self.bump();
            let (name, sp) = self.ident()?;
            (Some(name), sp)
        } else {
            (None, self.span())
        };
        self.expect(Tok::LParen)?;
        let mut vars = Vec::new();
        loop {
            let (name, vspan) = self.ident()?;
            vars.push((self.resolve(&name, vspan)?, vspan));
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::If)?;
        // declassification is allowed in the checked condition
        self.expect(Tok::LParen)?;
        let cond = self.parse_expr()?;
        self.expect(Tok::RParen)?;
        let then_branch = self.parse_block()?;
        self.expect(Tok::Else)?;
        let else_branch = self.parse_block()?;

        let labels: Vec<LabelId> = if vars.len() == 1 {
            vec![match base_name {
                Some(name) => self.intern_label(name, label_span)?,
                None => self.fresh_label(label_span)?,
            }]
        } else {
            let base = match base_name {
                Some(name) => name,
                None => loop {
                    self.auto_label += 1;
                    let cand = format!("eta{}", self.auto_label);
                    if !self.labels.contains(&cand) {
                        break cand;
                    }
                },
            };
            let mut ls = Vec::new();
            for i in 1..=vars.len() {
                ls.push(self.intern_label(format!("{base}.{i}"), label_span)?);
            }
            ls
        };

        let mut cmd = then_branch;
        for i in (1..vars.len()).rev() {
            cmd = Cmd::new(
                CmdKind::CheckedEndorse {
                    label: labels[i],
                    var: vars[i].0,
                    cond: Expr::new(ExprKind::Const(1), span),
                    then_branch: Box::new(cmd),
                    else_branch: Box::new(Cmd::new(CmdKind::Skip, span)),
                },
                span,
            );
        }
        Ok(Cmd::new(
            CmdKind::CheckedEndorse {
                label: labels[0],
                var: vars[0].0,
                cond,
                then_branch: Box::new(cmd),
                else_branch: Box::new(else_branch),
            },
            span,
        ))
    }

    fn parse_expr(&mut self) -> ParseResult<Expr> {
        self.parse_bin(1)
    }

    fn parse_bin(&mut self, min_prec: u8) -> ParseResult<Expr> {
        let mut lhs = if min_prec >= 6 {
            self.parse_atom()?
        } else {
            self.parse_bin(min_prec + 1)?
        };
        loop {
            let op = match self.peek() {
                Tok::OrOr if min_prec == 1 => BinOp::Or,
                Tok::AndAnd if min_prec == 2 => BinOp::And,
                Tok::EqEq if min_prec == 3 => BinOp::Eq,
                Tok::Ne if min_prec == 3 => BinOp::Ne,
                Tok::Lt if min_prec == 3 => BinOp::Lt,
                Tok::Le if min_prec == 3 => BinOp::Le,
                Tok::Gt if min_prec == 3 => BinOp::Gt,
                Tok::Ge if min_prec == 3 => BinOp::Ge,
                Tok::Plus if min_prec == 4 => BinOp::Add,
                Tok::Minus if min_prec == 4 => BinOp::Sub,
                Tok::Star if min_prec == 5 => BinOp::Mul,
                _ => break,
            };
            let span = self.bump().1;
            let rhs = self.parse_bin(min_prec + 1)?;
            lhs = Expr::new(ExprKind::Bin(op, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn parse_atom(&mut self) -> ParseResult<Expr> {
        let span = self.span();
        match self.bump() {
            (Tok::Num(n), _) => Ok(Expr::new(ExprKind::Const(n), span)),
            (Tok::Ident(name), _) => {
                let v = self.resolve(&name, span)?;
                Ok(Expr::new(ExprKind::Var(v), span))
            }
            (Tok::LParen, _) => {
                let e = self.parse_expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            (Tok::Declassify, _) => {
                self.expect(Tok::LParen)?;
                let inner = self.parse_expr()?;
                self.expect(Tok::RParen)?;
                if inner.contains_declassify() {
                    return Err(ParseError::Declassify {
                        msg: "declassification may not be nested".into(),
                        span,
                    });
                }
                Ok(Expr::new(ExprKind::Declassify(Box::new(inner)), span))
            }
            (other, span) => Err(ParseError::Syntax {
                msg: format!("expected an expression, found {}", other.describe()),
                span,
            }),
        }
    }
}

/// Parse a complete program. The domain size defaults to
/// [`DEFAULT_DOMAIN`]; override with [`Program::with_domain`].
pub fn parse_program(text: &str) -> ParseResult<Program> {
    let toks = Lexer::new(text).tokenize()?;
    let mut p = Parser {
        toks,
        pos: 0,
        env: SecurityEnv::new(),
        labels: Vec::new(),
        holes: 0,
        auto_label: 0,
    };
    p.parse_decls()?;
    let body = if *p.peek() == Tok::Eof {
        Cmd::skip()
    } else {
        let body = p.parse_stmts()?;
        p.expect(Tok::Eof)?;
        body
    };
    Ok(Program {
        env: p.env,
        labels: p.labels,
        body,
        hole_count: p.holes,
        domain: DEFAULT_DOMAIN,
    })
}
