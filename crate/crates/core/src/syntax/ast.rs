use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use super::types::Type;

/// Identifies an expression or statement node. Ids are dense and assigned in
/// pre-order by [`Program::renumber`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Source position of a node. `line` and `column` are 1-based; `length` is
/// counted in characters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub file: Arc<str>,
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl Span {
    pub fn new(file: Arc<str>, line: u32, column: u32, length: u32) -> Span {
        Span { file, line, column, length }
    }

    /// Placeholder span for synthesized nodes.
    pub fn synthetic() -> Span {
        Span { file: Arc::from(""), line: 1, column: 1, length: 0 }
    }

    /// Smallest span covering `self` and `end`, assuming both sit on one line.
    pub fn to(&self, end: &Span) -> Span {
        let stop = end.column + end.length;
        Span {
            file: self.file.clone(),
            line: self.line,
            column: self.column,
            length: stop.saturating_sub(self.column),
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

impl Serialize for Span {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub id: NodeId,
    pub span: Span,
    pub kind: ExprKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    Var(String),
    Add(Box<Expr>, Box<Expr>),
    Call(Box<Expr>, Vec<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Array(Vec<Expr>),
    Index(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn new(span: Span, kind: ExprKind) -> Expr {
        Expr { id: NodeId::default(), span, kind }
    }

    /// Direct sub-expressions in evaluation order.
    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Var(_) => Vec::new(),
            ExprKind::Add(a, b) | ExprKind::Index(a, b) => vec![a, b],
            ExprKind::Call(callee, args) => {
                std::iter::once(&**callee).chain(args.iter()).collect()
            }
            ExprKind::If(c, t, e) => vec![c, t, e],
            ExprKind::Array(elems) => elems.iter().collect(),
        }
    }

    /// Pre-order traversal of this expression tree.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Expr)) {
        visit(self);
        for child in self.children() {
            child.walk(visit);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub span: Span,
    pub annot: Type,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Def {
    pub name: String,
    pub name_span: Span,
    pub params: Vec<Param>,
    pub ret: Type,
    pub body: Vec<Stmt>,
}

impl Def {
    /// The function type spelled by the definition's annotations.
    pub fn signature(&self) -> Type {
        Type::function(self.params.iter().map(|p| p.annot.clone()).collect(), self.ret.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub id: NodeId,
    pub span: Span,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Expr(Expr),
    Return(Expr),
    Def(Def),
    Assign { target: String, target_span: Span, annot: Type, value: Expr },
    IndexAssign { target: Expr, index: Expr, value: Expr },
}

impl Stmt {
    pub fn new(span: Span, kind: StmtKind) -> Stmt {
        Stmt { id: NodeId::default(), span, kind }
    }

    /// Expressions owned directly by this statement (not by nested defs).
    pub fn exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Expr(e) | StmtKind::Return(e) => vec![e],
            StmtKind::Assign { value, .. } => vec![value],
            StmtKind::IndexAssign { target, index, value } => vec![target, index, value],
            StmtKind::Def(_) => Vec::new(),
        }
    }
}

/// A parsed program: top-level statements plus the declared externs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub stmts: Vec<Stmt>,
    pub prelude: BTreeMap<String, Type>,
}

impl Program {
    /// Reassigns node ids densely in pre-order and returns the id count.
    pub fn renumber(&mut self) -> u32 {
        let mut next = 0u32;
        for stmt in &mut self.stmts {
            renumber_stmt(stmt, &mut next);
        }
        next
    }

    /// Number of node ids in use, assuming the program is numbered.
    pub fn node_count(&self) -> usize {
        let mut max = None;
        self.visit_stmts(&mut |s| {
            max = max.max(Some(s.id.0));
            for e in s.exprs() {
                e.walk(&mut |e| max = max.max(Some(e.id.0)));
            }
        });
        max.map_or(0, |m| m as usize + 1)
    }

    /// Pre-order traversal over every statement, descending into def bodies.
    pub fn visit_stmts<'a>(&'a self, visit: &mut impl FnMut(&'a Stmt)) {
        fn go<'a>(stmts: &'a [Stmt], visit: &mut impl FnMut(&'a Stmt)) {
            for s in stmts {
                visit(s);
                if let StmtKind::Def(def) = &s.kind {
                    go(&def.body, visit);
                }
            }
        }
        go(&self.stmts, visit);
    }

    /// Pre-order traversal over every expression in the program.
    pub fn visit_exprs<'a>(&'a self, visit: &mut impl FnMut(&'a Expr)) {
        self.visit_stmts(&mut |s| {
            for e in s.exprs() {
                e.walk(visit);
            }
        });
    }

    /// A copy with every span and node id erased, for structural comparison.
    pub fn erase_positions(&self) -> Program {
        let mut p = self.clone();
        for s in &mut p.stmts {
            erase_stmt(s);
        }
        p
    }

    /// Equality up to spans and node ids.
    pub fn structurally_eq(&self, other: &Program) -> bool {
        self.erase_positions() == other.erase_positions()
    }
}

fn renumber_stmt(stmt: &mut Stmt, next: &mut u32) {
    stmt.id = NodeId(*next);
    *next += 1;
    match &mut stmt.kind {
        StmtKind::Expr(e) | StmtKind::Return(e) => renumber_expr(e, next),
        StmtKind::Assign { value, .. } => renumber_expr(value, next),
        StmtKind::IndexAssign { target, index, value } => {
            renumber_expr(target, next);
            renumber_expr(index, next);
            renumber_expr(value, next);
        }
        StmtKind::Def(def) => {
            for s in &mut def.body {
                renumber_stmt(s, next);
            }
        }
    }
}

fn renumber_expr(expr: &mut Expr, next: &mut u32) {
    expr.id = NodeId(*next);
    *next += 1;
    for_each_child_mut(expr, |c| renumber_expr(c, next));
}

/// Applies `f` to each direct child of `expr`, in evaluation order.
pub fn for_each_child_mut(expr: &mut Expr, mut f: impl FnMut(&mut Expr)) {
    match &mut expr.kind {
        ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Var(_) => {}
        ExprKind::Add(a, b) | ExprKind::Index(a, b) => {
            f(a);
            f(b);
        }
        ExprKind::Call(callee, args) => {
            f(callee);
            args.iter_mut().for_each(f);
        }
        ExprKind::If(c, t, e) => {
            f(c);
            f(t);
            f(e);
        }
        ExprKind::Array(elems) => elems.iter_mut().for_each(f),
    }
}

/// Applies `f` to every expression owned by `stmt`, including those inside
/// nested definitions, children before parents.
pub fn for_each_expr_mut(stmt: &mut Stmt, f: &mut impl FnMut(&mut Expr)) {
    fn go(expr: &mut Expr, f: &mut impl FnMut(&mut Expr)) {
        for_each_child_mut(expr, |c| go(c, f));
        f(expr);
    }
    match &mut stmt.kind {
        StmtKind::Expr(e) | StmtKind::Return(e) => go(e, f),
        StmtKind::Assign { value, .. } => go(value, f),
        StmtKind::IndexAssign { target, index, value } => {
            go(target, f);
            go(index, f);
            go(value, f);
        }
        StmtKind::Def(def) => {
            for s in &mut def.body {
                for_each_expr_mut(s, f);
            }
        }
    }
}

fn erase_stmt(stmt: &mut Stmt) {
    stmt.id = NodeId::default();
    stmt.span = Span::synthetic();
    match &mut stmt.kind {
        StmtKind::Assign { target_span, .. } => *target_span = Span::synthetic(),
        StmtKind::Def(def) => {
            def.name_span = Span::synthetic();
            for p in &mut def.params {
                p.span = Span::synthetic();
            }
            for s in &mut def.body {
                erase_stmt(s);
            }
        }
        _ => {}
    }
    for_each_expr_mut(stmt, &mut |e| {
        e.id = NodeId::default();
        e.span = Span::synthetic();
    });
}
