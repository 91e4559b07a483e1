//! Cast insertion from declared types.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::resolve::{BindingKind, Resolved};
use crate::syntax::{Expr, ExprKind, NodeId, Span, Stmt, StmtKind, Type};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Towards a type with fewer `*` positions.
    Projection,
    /// From a `*`-free type to one containing `*`.
    Injection,
    /// Both sides contain `*`.
    Lateral,
}

/// `{target <= source}` applied to the value of the expression at `span`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cast {
    pub span: Span,
    pub source: Type,
    pub target: Type,
    pub direction: Direction,
}

impl Cast {
    fn new(span: Span, source: Type, target: Type) -> Cast {
        let direction = match (source.contains_unknown(), target.contains_unknown()) {
            (false, true) => Direction::Injection,
            (true, false) => Direction::Projection,
            _ => Direction::Lateral,
        };
        Cast { span, source, target, direction }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{span}: static type error: expected {expected}, found {found}")]
pub struct StaticTypeError {
    pub span: Span,
    pub found: Type,
    pub expected: Type,
}

/// A resolved program together with its static types and inserted casts.
#[derive(Debug, Clone)]
pub struct CastProgram {
    pub resolved: Resolved,
    types: Vec<Type>,
    /// Keyed by the expression whose value is cast.
    casts: HashMap<NodeId, Cast>,
}

impl CastProgram {
    pub fn static_type(&self, expr: NodeId) -> &Type {
        &self.types[expr.index()]
    }

    pub fn cast(&self, expr: NodeId) -> Option<&Cast> {
        self.casts.get(&expr)
    }

    /// Every cast site, ordered by source position.
    pub fn sites(&self) -> Vec<&Cast> {
        let mut out: Vec<&Cast> = self.casts.values().collect();
        out.sort_by(|a, b| (&a.span, &a.source, &a.target).cmp(&(&b.span, &b.source, &b.target)));
        out
    }

    pub fn site_count(&self) -> usize {
        self.casts.len()
    }
}

pub fn elaborate(resolved: &Resolved) -> Result<CastProgram, StaticTypeError> {
    let mut el = Elaborator::new(resolved, true);
    el.block(&resolved.program.stmts)?;
    Ok(CastProgram { resolved: resolved.clone(), types: el.types, casts: el.casts })
}

/// Static type of every expression, ignoring inconsistent boundaries.
pub fn static_types(resolved: &Resolved) -> Vec<Type> {
    let mut el = Elaborator::new(resolved, false);
    let _ = el.block(&resolved.program.stmts);
    el.types
}

/// `T` if both sides agree, `*` otherwise.
pub fn join(a: &Type, b: &Type) -> Type {
    if a == b {
        a.clone()
    } else {
        Type::Unknown
    }
}

struct Elaborator<'a> {
    resolved: &'a Resolved,
    strict: bool,
    types: Vec<Type>,
    casts: HashMap<NodeId, Cast>,
}

impl<'a> Elaborator<'a> {
    fn new(resolved: &'a Resolved, strict: bool) -> Self {
        Elaborator { resolved, strict, types: vec![Type::Unknown; resolved.node_count()], casts: HashMap::new() }
    }

    fn ty(&self, e: &Expr) -> &Type {
        &self.types[e.id.index()]
    }

    /// The value of `e` is used where `expected` is required.
    fn boundary(&mut self, e: &Expr, expected: &Type) -> Result<(), StaticTypeError> {
        let source = self.ty(e).clone();
        if source == *expected {
            return Ok(());
        }
        if !source.is_consistent_with(expected) {
            if self.strict {
                return Err(StaticTypeError { span: e.span.clone(), found: source, expected: expected.clone() });
            }
            return Ok(());
        }
        self.casts.insert(e.id, Cast::new(e.span.clone(), source, expected.clone()));
        Ok(())
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<(), StaticTypeError> {
        for s in stmts {
            self.stmt(s)?;
        }
        Ok(())
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<(), StaticTypeError> {
        match &stmt.kind {
            StmtKind::Expr(e) => {
                self.expr(e)?;
            }
            StmtKind::Return(e) => {
                self.expr(e)?;
                let ret = self
                    .resolved
                    .return_owner(stmt.id)
                    .and_then(|f| self.resolved.def(f))
                    .map_or(Type::Unknown, |d| d.ret.clone());
                self.boundary(e, &ret)?;
            }
            StmtKind::Def(def) => self.block(&def.body)?,
            StmtKind::Assign { value, .. } => {
                self.expr(value)?;
                let declared = self
                    .resolved
                    .assign_binding(stmt.id)
                    .map_or(Type::Unknown, |b| self.resolved.binding(b).declared.clone());
                self.boundary(value, &declared)?;
            }
            StmtKind::IndexAssign { target, index, value } => {
                self.expr(target)?;
                self.expr(index)?;
                self.expr(value)?;
                let elem = self.array_operand(target)?;
                self.boundary(index, &Type::Int)?;
                self.boundary(value, &elem)?;
            }
        }
        Ok(())
    }

    /// Element type of an indexed operand, casting a `*` operand to `Array(*)`.
    fn array_operand(&mut self, target: &Expr) -> Result<Type, StaticTypeError> {
        match self.ty(target).clone() {
            Type::Array(elem) => Ok(*elem),
            _ => {
                self.boundary(target, &Type::array(Type::Unknown))?;
                Ok(Type::Unknown)
            }
        }
    }

    fn expr(&mut self, e: &Expr) -> Result<(), StaticTypeError> {
        for child in e.children() {
            self.expr(child)?;
        }
        let ty = match &e.kind {
            ExprKind::Int(_) => Type::Int,
            ExprKind::Bool(_) => Type::Bool,
            ExprKind::Var(_) => match self.resolved.var_binding(e.id) {
                Some(b) => {
                    let binding = self.resolved.binding(b);
                    match binding.kind {
                        BindingKind::FunctionName => self.resolved.def(b).map_or(Type::Unknown, |d| d.signature()),
                        _ => binding.declared.clone(),
                    }
                }
                None => Type::Unknown,
            },
            ExprKind::Add(a, b) => {
                self.boundary(a, &Type::Int)?;
                self.boundary(b, &Type::Int)?;
                Type::Int
            }
            ExprKind::If(c, t, f) => {
                self.boundary(c, &Type::Bool)?;
                let j = join(self.ty(t), self.ty(f));
                self.boundary(t, &j)?;
                self.boundary(f, &j)?;
                j
            }
            ExprKind::Array(elems) => {
                for el in elems {
                    self.boundary(el, &Type::Unknown)?;
                }
                Type::array(Type::Unknown)
            }
            ExprKind::Index(target, index) => {
                let elem = self.array_operand(target)?;
                self.boundary(index, &Type::Int)?;
                elem
            }
            ExprKind::Call(callee, args) => {
                let (params, ret) = match self.ty(callee).clone() {
                    Type::Function(ps, r) if ps.len() == args.len() => (ps, *r),
                    _ => {
                        let expected = Type::function(vec![Type::Unknown; args.len()], Type::Unknown);
                        self.boundary(callee, &expected)?;
                        (vec![Type::Unknown; args.len()], Type::Unknown)
                    }
                };
                for (a, p) in args.iter().zip(&params) {
                    self.boundary(a, p)?;
                }
                ret
            }
        };
        self.types[e.id.index()] = ty;
        Ok(())
    }
}
