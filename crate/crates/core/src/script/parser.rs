use super::ast::{BinOp, Expr, ExprKind, Program, Span, Stmt, StmtKind};
use super::lexer::{tokenize, Tok, Token};
use super::SyntaxError;

/// Nesting bound so hostile input cannot exhaust the native stack.
const MAX_DEPTH: usize = 200;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err_at(&self, span: Span, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            line: span.line,
            col: span.col,
            message: message.into(),
        }
    }

    fn unexpected(&self, wanted: &str) -> SyntaxError {
        self.err_at(
            self.span(),
            format!("expected {wanted}, found {}", self.peek().describe()),
        )
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<Span, SyntaxError> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn enter(&mut self) -> Result<(), SyntaxError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.err_at(self.span(), "expression nested too deeply"));
        }
        Ok(())
    }

    fn program(&mut self) -> Result<Program, SyntaxError> {
        let mut stmts = Vec::new();
        loop {
            while *self.peek() == Tok::Newline {
                self.bump();
            }
            if *self.peek() == Tok::Eof {
                return Ok(Program { stmts });
            }
            stmts.push(self.stmt()?);
            match self.peek() {
                Tok::Newline => {
                    self.bump();
                }
                Tok::Eof => {}
                _ => return Err(self.unexpected("end of line")),
            }
        }
    }

    fn stmt(&mut self) -> Result<Stmt, SyntaxError> {
        let start = self.span();
        if let Tok::Ident(name) = self.peek().clone() {
            if self.toks.get(self.pos + 1).map(|t| &t.tok) == Some(&Tok::Assign) {
                self.bump();
                self.bump();
                let value = self.expr()?;
                let span = start.to(value.span);
                return Ok(Stmt {
                    kind: StmtKind::Assign {
                        target: name,
                        value,
                    },
                    span,
                });
            }
        }
        let e = self.expr()?;
        if *self.peek() == Tok::Assign {
            return Err(self.err_at(self.span(), "can only assign to a plain name"));
        }
        Ok(Stmt {
            span: e.span,
            kind: StmtKind::Expr(e),
        })
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        self.enter()?;
        let e = self.cmp();
        self.depth -= 1;
        e
    }

    fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        let span = lhs.span.to(rhs.span);
        Expr::new(
            ExprKind::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            },
            span,
        )
    }

    fn cmp(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.add()?;
        loop {
            let op = match self.peek() {
                Tok::Eq => BinOp::Eq,
                Tok::Ne => BinOp::Ne,
                Tok::Lt => BinOp::Lt,
                Tok::Le => BinOp::Le,
                Tok::Gt => BinOp::Gt,
                Tok::Ge => BinOp::Ge,
                Tok::In => BinOp::In,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.add()?;
            lhs = Self::binary(op, lhs, rhs);
        }
    }

    fn add(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.mul()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.mul()?;
            lhs = Self::binary(op, lhs, rhs);
        }
    }

    fn mul(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.post()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.post()?;
            lhs = Self::binary(op, lhs, rhs);
        }
    }

    fn args(&mut self, close: Tok, wanted: &str) -> Result<Vec<Expr>, SyntaxError> {
        let mut args = Vec::new();
        while *self.peek() != close {
            if let (Tok::Ident(_), Some(Tok::Assign)) =
                (self.peek(), self.toks.get(self.pos + 1).map(|t| &t.tok))
            {
                return Err(self.err_at(self.span(), "keyword arguments are not supported"));
            }
            args.push(self.expr()?);
            if *self.peek() == Tok::Comma {
                self.bump();
            } else if *self.peek() != close {
                return Err(self.unexpected(wanted));
            }
        }
        self.bump();
        Ok(args)
    }

    fn post(&mut self) -> Result<Expr, SyntaxError> {
        let mut e = self.atom()?;
        loop {
            match self.peek() {
                Tok::LParen => {
                    self.bump();
                    let args = self.args(Tok::RParen, "',' or ')'")?;
                    let span = e.span.to(self.prev_span());
                    e = Expr::new(
                        ExprKind::Call {
                            callee: Box::new(e),
                            args,
                        },
                        span,
                    );
                }
                Tok::Dot => {
                    self.bump();
                    let name = match self.bump().tok {
                        Tok::Ident(n) => n,
                        _ => return Err(self.err_at(self.prev_span(), "expected method name after '.'")),
                    };
                    if *self.peek() != Tok::LParen {
                        return Err(self.err_at(self.span(), "attribute access is not supported; only method calls"));
                    }
                    self.bump();
                    let args = self.args(Tok::RParen, "',' or ')'")?;
                    let span = e.span.to(self.prev_span());
                    e = Expr::new(
                        ExprKind::Method {
                            receiver: Box::new(e),
                            name,
                            args,
                        },
                        span,
                    );
                }
                Tok::LBracket => {
                    self.bump();
                    let index = self.expr()?;
                    self.expect(Tok::RBracket, "']'")?;
                    let span = e.span.to(self.prev_span());
                    e = Expr::new(
                        ExprKind::Index {
                            target: Box::new(e),
                            index: Box::new(index),
                        },
                        span,
                    );
                }
                _ => return Ok(e),
            }
        }
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        self.enter()?;
        let e = self.atom_inner();
        self.depth -= 1;
        e
    }

    fn atom_inner(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.span();
        let kind = match self.peek().clone() {
            Tok::Ident(n) => ExprKind::Ident(n),
            Tok::Int(i) => ExprKind::Int(i),
            Tok::Float(f) => ExprKind::Float(f),
            Tok::Str(s) => ExprKind::Str(s),
            Tok::True => ExprKind::Bool(true),
            Tok::False => ExprKind::Bool(false),
            Tok::LBracket => {
                self.bump();
                let items = self.args(Tok::RBracket, "',' or ']'")?;
                return Ok(Expr::new(ExprKind::List(items), start.to(self.prev_span())));
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                if *self.peek() == Tok::Comma {
                    return Err(self.err_at(self.span(), "tuples are not supported"));
                }
                self.expect(Tok::RParen, "')'")?;
                let mut inner = inner;
                inner.span = start.to(self.prev_span());
                return Ok(inner);
            }
            Tok::Minus => {
                self.bump();
                let inner = self.atom()?;
                let span = start.to(inner.span);
                return Ok(Expr::new(ExprKind::Neg(Box::new(inner)), span));
            }
            _ => return Err(self.unexpected("an expression")),
        };
        self.bump();
        Ok(Expr::new(kind, start))
    }
}

pub fn parse_program(src: &str) -> Result<Program, SyntaxError> {
    let toks = tokenize(src)?;
    Parser {
        toks,
        pos: 0,
        depth: 0,
    }
    .program()
}
