use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use super::ast::{Def, Expr, ExprKind, Param, Program, Span, Stmt, StmtKind};
use super::lexer::{tokenize, Tok, Token};
use super::types::Type;
use super::ParseError;

/// Parses a source file. `prelude` holds extern declarations supplied from
/// outside the file; `extern` lines inside the file are merged into it.
pub fn parse(
    file: &str,
    source: &str,
    prelude: &BTreeMap<String, Type>,
) -> Result<Program, ParseError> {
    let file: Arc<str> = Arc::from(file);
    let tokens = tokenize(&file, source)?;
    let mut parser = Parser { tokens, pos: 0, depth: 0, prelude: prelude.clone() };
    let stmts = parser.block_items(true)?;
    parser.expect(Tok::Eof)?;
    let mut program = Program { stmts, prelude: parser.prelude };
    program.renumber();
    Ok(program)
}

/// Parses a prelude file: one `extern name: Type` per line.
pub fn parse_prelude(file: &str, source: &str) -> Result<BTreeMap<String, Type>, ParseError> {
    let program = parse(file, source, &BTreeMap::new())?;
    if let Some(stmt) = program.stmts.first() {
        return Err(ParseError::syntax(stmt.span.clone(), "prelude files may only contain extern declarations"));
    }
    Ok(program.prelude)
}

/// Parses a type written in the surface syntax, e.g. `Function([*], Int)`.
pub fn parse_type(text: &str) -> Result<Type, ParseError> {
    let file: Arc<str> = Arc::from("<type>");
    let tokens = tokenize(&file, text)?;
    let mut parser = Parser { tokens, pos: 0, depth: 0, prelude: BTreeMap::new() };
    let ty = parser.ty()?;
    parser.eat(&Tok::Newline);
    parser.expect(Tok::Eof)?;
    Ok(ty)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    /// Number of enclosing defs.
    depth: usize,
    prelude: BTreeMap<String, Type>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span.clone()
    }

    fn prev_span(&self) -> Span {
        self.tokens[self.pos.saturating_sub(1)].span.clone()
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Span, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        ParseError::syntax(
            self.span(),
            format!("expected {wanted}, found {}", self.peek().describe()),
        )
    }

    fn ident(&mut self) -> Result<(String, Span), ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => Ok((name, self.bump().span)),
            _ => Err(self.unexpected("identifier")),
        }
    }

    /// Statements of one block, up to a dedent (or end of input at top level).
    fn block_items(&mut self, top: bool) -> Result<Vec<Stmt>, ParseError> {
        let mut stmts = Vec::new();
        let mut defined: HashSet<String> = HashSet::new();
        loop {
            match self.peek() {
                Tok::Eof if top => break,
                Tok::Dedent if !top => break,
                Tok::Extern => {
                    if !top {
                        return Err(ParseError::syntax(self.span(), "extern declarations must be at top level"));
                    }
                    self.extern_decl()?;
                }
                Tok::Def => {
                    let stmt = self.def()?;
                    if let StmtKind::Def(def) = &stmt.kind {
                        if !defined.insert(def.name.clone()) {
                            return Err(ParseError::DuplicateDef {
                                name: def.name.clone(),
                                span: def.name_span.clone(),
                            });
                        }
                    }
                    stmts.push(stmt);
                }
                Tok::Indent => return Err(ParseError::syntax(self.span(), "unexpected indent")),
                _ => {
                    stmts.push(self.simple_stmt()?);
                    while self.eat(&Tok::Semi) {
                        if *self.peek() == Tok::Newline {
                            break;
                        }
                        stmts.push(self.simple_stmt()?);
                    }
                    self.expect(Tok::Newline)?;
                }
            }
        }
        Ok(stmts)
    }

    fn extern_decl(&mut self) -> Result<(), ParseError> {
        self.expect(Tok::Extern)?;
        let (name, span) = self.ident()?;
        self.expect(Tok::Colon)?;
        let ty = self.ty()?;
        self.expect(Tok::Newline)?;
        match self.prelude.get(&name) {
            Some(prev) if *prev != ty => Err(ParseError::DuplicateDef { name, span }),
            _ => {
                self.prelude.insert(name, ty);
                Ok(())
            }
        }
    }

    fn def(&mut self) -> Result<Stmt, ParseError> {
        let start = self.expect(Tok::Def)?;
        let (name, name_span) = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let (pname, pspan) = self.ident()?;
                let annot = if self.eat(&Tok::Colon) { self.ty()? } else { Type::Unknown };
                params.push(Param { name: pname, span: pspan, annot });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        let ret = if self.eat(&Tok::Arrow) { self.ty()? } else { Type::Unknown };
        let colon = self.expect(Tok::Colon)?;
        self.expect(Tok::Newline)?;
        if *self.peek() != Tok::Indent {
            return Err(self.unexpected("an indented function body"));
        }
        self.bump();
        self.depth += 1;
        let body = self.block_items(false)?;
        self.depth -= 1;
        self.expect(Tok::Dedent)?;
        if body.is_empty() {
            return Err(ParseError::syntax(colon, "empty function body"));
        }
        let span = start.to(&colon);
        Ok(Stmt::new(span, StmtKind::Def(Def { name, name_span, params, ret, body })))
    }

    fn simple_stmt(&mut self) -> Result<Stmt, ParseError> {
        let start = self.span();
        if self.eat(&Tok::Return) {
            if self.depth == 0 {
                return Err(ParseError::syntax(start, "`return` outside of a function"));
            }
            let value = self.expr()?;
            let span = start.to(&value.span);
            return Ok(Stmt::new(span, StmtKind::Return(value)));
        }
        if let Tok::Ident(_) = self.peek() {
            if matches!(self.peek_at(1), Tok::Colon | Tok::Eq) {
                let (target, target_span) = self.ident()?;
                let annot = if self.eat(&Tok::Colon) { self.ty()? } else { Type::Unknown };
                self.expect(Tok::Eq)?;
                let value = self.expr()?;
                let span = start.to(&value.span);
                return Ok(Stmt::new(span, StmtKind::Assign { target, target_span, annot, value }));
            }
        }
        let expr = self.expr()?;
        if *self.peek() == Tok::Eq {
            let eq = self.bump().span;
            let ExprKind::Index(target, index) = expr.kind else {
                return Err(ParseError::syntax(eq, "only variables and indexed elements can be assigned"));
            };
            let value = self.expr()?;
            let span = start.to(&value.span);
            return Ok(Stmt::new(span, StmtKind::IndexAssign { target: *target, index: *index, value }));
        }
        let span = expr.span.clone();
        Ok(Stmt::new(span, StmtKind::Expr(expr)))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::If {
            let start = self.bump().span;
            let cond = self.expr()?;
            self.expect(Tok::Then)?;
            let then = self.expr()?;
            self.expect(Tok::Else)?;
            let els = self.expr()?;
            let span = start.to(&els.span);
            return Ok(Expr::new(span, ExprKind::If(Box::new(cond), Box::new(then), Box::new(els))));
        }
        let mut lhs = self.postfix()?;
        while self.eat(&Tok::Plus) {
            let rhs = self.postfix()?;
            let span = lhs.span.to(&rhs.span);
            lhs = Expr::new(span, ExprKind::Add(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut expr = self.atom()?;
        loop {
            match self.peek() {
                Tok::LParen => {
                    self.bump();
                    let args = self.comma_list(Tok::RParen)?;
                    let span = expr.span.to(&self.prev_span());
                    expr = Expr::new(span, ExprKind::Call(Box::new(expr), args));
                }
                Tok::LBracket => {
                    self.bump();
                    let index = self.expr()?;
                    self.expect(Tok::RBracket)?;
                    let span = expr.span.to(&self.prev_span());
                    expr = Expr::new(span, ExprKind::Index(Box::new(expr), Box::new(index)));
                }
                _ => return Ok(expr),
            }
        }
    }

    /// Comma-separated expressions terminated by `close` (consumed).
    fn comma_list(&mut self, close: Tok) -> Result<Vec<Expr>, ParseError> {
        let mut items = Vec::new();
        while *self.peek() != close {
            items.push(self.expr()?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(close)?;
        Ok(items)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::new(span, ExprKind::Int(v)))
            }
            Tok::True | Tok::False => {
                let value = *self.peek() == Tok::True;
                self.bump();
                Ok(Expr::new(span, ExprKind::Bool(value)))
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(Expr::new(span, ExprKind::Var(name)))
            }
            Tok::LBracket => {
                self.bump();
                let elems = self.comma_list(Tok::RBracket)?;
                let span = span.to(&self.prev_span());
                Ok(Expr::new(span, ExprKind::Array(elems)))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            _ => Err(self.unexpected("an expression")),
        }
    }

    fn ty(&mut self) -> Result<Type, ParseError> {
        match self.peek().clone() {
            Tok::Star => {
                self.bump();
                Ok(Type::Unknown)
            }
            Tok::Ident(name) => match name.as_str() {
                "Int" => {
                    self.bump();
                    Ok(Type::Int)
                }
                "Bool" => {
                    self.bump();
                    Ok(Type::Bool)
                }
                "Array" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let elem = self.ty()?;
                    self.expect(Tok::RParen)?;
                    Ok(Type::array(elem))
                }
                "Function" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    self.expect(Tok::LBracket)?;
                    let mut params = Vec::new();
                    while *self.peek() != Tok::RBracket {
                        params.push(self.ty()?);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                    self.expect(Tok::RBracket)?;
                    self.expect(Tok::Comma)?;
                    let ret = self.ty()?;
                    self.expect(Tok::RParen)?;
                    Ok(Type::function(params, ret))
                }
                _ => Err(self.unexpected("a type")),
            },
            _ => Err(self.unexpected("a type")),
        }
    }
}
