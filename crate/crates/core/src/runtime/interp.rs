//! Tree-walking evaluator for elaborated programs.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use super::elaborate::CastProgram;
use super::value::{Closure, Frame, Proxy, Snapshot, Value};
use super::{DynamicCounts, Outcome};
use crate::resolve::{BindingId, BindingKind, ScopeId};
use crate::syntax::{Expr, ExprKind, NodeId, Span, Stmt, StmtKind, Type};

const MAX_CALL_DEPTH: usize = 100_000;

#[derive(Debug, Clone)]
pub(super) enum Abort {
    Cast { span: Span, expected: Type, actual: Type },
    Runtime { span: Span, message: String },
    Budget,
}

pub(super) fn runtime(span: &Span, message: impl Into<String>) -> Abort {
    Abort::Runtime { span: span.clone(), message: message.into() }
}

enum Flow {
    Normal,
    Return(Value),
}

pub(super) struct Interp<'a> {
    pub(super) cp: &'a CastProgram,
    pub(super) counts: DynamicCounts,
    erase: bool,
    budget: u64,
    steps: u64,
    depth: usize,
    pub(super) rng: u64,
    pub(super) callees: Option<BTreeMap<NodeId, BTreeSet<BindingId>>>,
}

pub(super) struct RunResult {
    pub outcome: Outcome,
    pub counts: DynamicCounts,
    pub callees: Option<BTreeMap<NodeId, BTreeSet<BindingId>>>,
}

pub(super) fn run(cp: &CastProgram, budget: u64, erase: bool, record_callees: bool) -> RunResult {
    let mut it = Interp {
        cp,
        counts: DynamicCounts::default(),
        erase,
        budget,
        steps: 0,
        depth: 0,
        rng: 0x2545_f491_4f6c_dd1d,
        callees: record_callees.then(BTreeMap::new),
    };
    let module = Frame::new(ScopeId::MODULE, cp.resolved.scope(ScopeId::MODULE).slots.len(), None);
    let outcome = match it.top_level(&module) {
        Ok(last) => Outcome::Value { value: last.map(|v| it.snapshot(&v)) },
        Err(Abort::Cast { span, expected, actual }) => Outcome::CastFailure { span, expected, actual },
        Err(Abort::Runtime { span, message }) => Outcome::RuntimeError { span, message },
        Err(Abort::Budget) => Outcome::BudgetExhausted,
    };
    RunResult { outcome, counts: it.counts, callees: it.callees }
}

impl<'a> Interp<'a> {
    fn top_level(&mut self, frame: &Rc<Frame>) -> Result<Option<Value>, Abort> {
        let mut last = None;
        for stmt in &self.cp.resolved.program.stmts {
            if let StmtKind::Expr(e) = &stmt.kind {
                self.tick()?;
                last = Some(self.eval(e, frame)?);
            } else {
                self.exec(stmt, frame)?;
            }
        }
        Ok(last)
    }

    fn tick(&mut self) -> Result<(), Abort> {
        self.steps += 1;
        if self.steps > self.budget {
            Err(Abort::Budget)
        } else {
            Ok(())
        }
    }

    /// Type a value presents at runtime.
    pub(super) fn type_of(&self, v: &Value) -> Type {
        match v {
            Value::Int(_) => Type::Int,
            Value::Bool(_) => Type::Bool,
            Value::Array(_) => Type::array(Type::Unknown),
            Value::Closure(c) => self.cp.resolved.binding(c.func).declared.clone(),
            Value::Extern(b) => self.cp.resolved.binding(*b).declared.clone(),
            Value::Proxy(p) => p.to.clone(),
        }
    }

    /// Checks `v` against `target`, wrapping arrays and functions whose own
    /// type differs. Does not count an event; callers do.
    pub(super) fn coerce(&self, v: Value, target: &Type, blame: &Span) -> Result<Value, Abort> {
        let fail = |actual: Type| Abort::Cast { span: blame.clone(), expected: target.clone(), actual };
        match target {
            Type::Unknown => Ok(v),
            Type::Int => match v {
                Value::Int(_) => Ok(v),
                other => Err(fail(self.type_of(&other))),
            },
            Type::Bool => match v {
                Value::Bool(_) => Ok(v),
                other => Err(fail(self.type_of(&other))),
            },
            Type::Array(_) | Type::Function(..) => {
                let own = self.type_of(&v);
                if own == *target {
                    return Ok(v);
                }
                let shape_ok = match (&own, target) {
                    (Type::Array(_), Type::Array(_)) => true,
                    (Type::Function(a, _), Type::Function(b, _)) => a.len() == b.len(),
                    _ => false,
                };
                if !shape_ok || !own.is_consistent_with(target) {
                    return Err(fail(own));
                }
                if let Value::Proxy(p) = &v {
                    if p.from == *target {
                        return Ok(p.inner.clone());
                    }
                }
                Ok(Value::Proxy(Rc::new(Proxy { inner: v, from: own, to: target.clone(), blame: blame.clone() })))
            }
        }
    }

    fn lookup_frame(&self, frame: &Rc<Frame>, scope: ScopeId) -> Option<Rc<Frame>> {
        let mut cur = Some(frame.clone());
        while let Some(f) = cur {
            if f.scope == scope {
                return Some(f);
            }
            cur = f.parent.clone();
        }
        None
    }

    fn store(&self, frame: &Rc<Frame>, b: BindingId, v: Value, span: &Span) -> Result<(), Abort> {
        let binding = self.cp.resolved.binding(b);
        let scope = binding.scope.ok_or_else(|| runtime(span, "cannot assign to an extern"))?;
        let target = self.lookup_frame(frame, scope).ok_or_else(|| runtime(span, "no frame for binding"))?;
        target.slots.borrow_mut()[binding.slot] = Some(v);
        Ok(())
    }

    fn load(&self, frame: &Rc<Frame>, b: BindingId, span: &Span) -> Result<Value, Abort> {
        let binding = self.cp.resolved.binding(b);
        let Some(scope) = binding.scope else { return Ok(Value::Extern(b)) };
        let target = self.lookup_frame(frame, scope).ok_or_else(|| runtime(span, "no frame for binding"))?;
        let slot = target.slots.borrow()[binding.slot].clone();
        slot.ok_or_else(|| runtime(span, format!("`{}` used before assignment", binding.name)))
    }

    fn exec_block(&mut self, stmts: &[Stmt], frame: &Rc<Frame>) -> Result<Flow, Abort> {
        for s in stmts {
            if let Flow::Return(v) = self.exec(s, frame)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn exec(&mut self, stmt: &Stmt, frame: &Rc<Frame>) -> Result<Flow, Abort> {
        self.tick()?;
        match &stmt.kind {
            StmtKind::Expr(e) => {
                self.eval(e, frame)?;
            }
            StmtKind::Return(e) => return Ok(Flow::Return(self.eval(e, frame)?)),
            StmtKind::Def(_) => {
                let f = self.cp.resolved.def_binding(stmt.id).ok_or_else(|| runtime(&stmt.span, "unresolved def"))?;
                let closure = Value::Closure(Rc::new(Closure { func: f, env: frame.clone() }));
                self.store(frame, f, closure, &stmt.span)?;
            }
            StmtKind::Assign { value, target_span, .. } => {
                let v = self.eval(value, frame)?;
                let b = self.cp.resolved.assign_binding(stmt.id).ok_or_else(|| runtime(target_span, "unresolved assignment"))?;
                self.store(frame, b, v, target_span)?;
            }
            StmtKind::IndexAssign { target, index, value } => {
                let t = self.eval(target, frame)?;
                let i = self.eval(index, frame)?;
                let v = self.eval(value, frame)?;
                let i = self.int(&i, &index.span)?;
                self.array_write(&t, i, v, &stmt.span)?;
            }
        }
        Ok(Flow::Normal)
    }

    pub(super) fn int(&self, v: &Value, span: &Span) -> Result<i64, Abort> {
        match v {
            Value::Int(n) => Ok(*n),
            other => Err(runtime(span, format!("expected Int, found {}", self.type_of(other)))),
        }
    }

    pub(super) fn bool(&self, v: &Value, span: &Span) -> Result<bool, Abort> {
        match v {
            Value::Bool(b) => Ok(*b),
            other => Err(runtime(span, format!("expected Bool, found {}", self.type_of(other)))),
        }
    }

    fn eval(&mut self, e: &Expr, frame: &Rc<Frame>) -> Result<Value, Abort> {
        stacker::maybe_grow(64 * 1024, 2 * 1024 * 1024, || {
            self.tick()?;
            let v = self.eval_raw(e, frame)?;
            match self.cp.cast(e.id) {
                Some(cast) if !self.erase => {
                    self.counts.total += 1;
                    if cast.target == Type::Unknown {
                        self.counts.injection += 1;
                    } else {
                        self.counts.projection += 1;
                    }
                    self.coerce(v, &cast.target, &cast.span)
                }
                _ => Ok(v),
            }
        })
    }

    fn eval_raw(&mut self, e: &Expr, frame: &Rc<Frame>) -> Result<Value, Abort> {
        match &e.kind {
            ExprKind::Int(n) => Ok(Value::Int(*n)),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Var(name) => {
                let b = self.cp.resolved.var_binding(e.id).ok_or_else(|| runtime(&e.span, format!("unbound `{name}`")))?;
                if self.cp.resolved.binding(b).kind == BindingKind::Extern {
                    return Ok(Value::Extern(b));
                }
                self.load(frame, b, &e.span)
            }
            ExprKind::Add(a, b) => {
                let x = self.eval(a, frame)?;
                let y = self.eval(b, frame)?;
                let (x, y) = (self.int(&x, &a.span)?, self.int(&y, &b.span)?);
                x.checked_add(y).map(Value::Int).ok_or_else(|| runtime(&e.span, "integer overflow"))
            }
            ExprKind::If(c, t, f) => {
                let cv = self.eval(c, frame)?;
                if self.bool(&cv, &c.span)? {
                    self.eval(t, frame)
                } else {
                    self.eval(f, frame)
                }
            }
            ExprKind::Array(elems) => {
                let mut items = Vec::with_capacity(elems.len());
                for el in elems {
                    items.push(self.eval(el, frame)?);
                }
                Ok(Value::Array(Rc::new(RefCell::new(items))))
            }
            ExprKind::Index(target, index) => {
                let t = self.eval(target, frame)?;
                let i = self.eval(index, frame)?;
                let i = self.int(&i, &index.span)?;
                self.array_read(&t, i, &e.span)
            }
            ExprKind::Call(callee, args) => {
                let f = self.eval(callee, frame)?;
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a, frame)?);
                }
                self.call(e.id, &f, vals, &e.span)
            }
        }
    }

    fn record_callee(&mut self, call: NodeId, target: BindingId) {
        if let Some(map) = &mut self.callees {
            map.entry(call).or_default().insert(target);
        }
    }

    pub(super) fn call(&mut self, site: NodeId, f: &Value, args: Vec<Value>, span: &Span) -> Result<Value, Abort> {
        match f {
            Value::Closure(c) => {
                self.record_callee(site, c.func);
                self.invoke(c, args, span)
            }
            Value::Extern(b) => {
                self.record_callee(site, *b);
                self.call_extern(*b, args, span)
            }
            Value::Proxy(p) => {
                let (Type::Function(from_params, _), Type::Function(_, to_ret)) = (&p.from, &p.to) else {
                    return Err(runtime(span, "calling a non-function"));
                };
                if from_params.len() != args.len() {
                    return Err(runtime(span, format!("expected {} arguments, got {}", from_params.len(), args.len())));
                }
                self.counts.total += 1;
                self.counts.proxy_call += 1;
                let mut checked = Vec::with_capacity(args.len());
                for (a, t) in args.into_iter().zip(from_params) {
                    checked.push(self.coerce(a, t, &p.blame)?);
                }
                let r = self.call(site, &p.inner, checked, span)?;
                self.coerce(r, to_ret, &p.blame)
            }
            other => Err(runtime(span, format!("calling a non-function of type {}", self.type_of(other)))),
        }
    }

    fn invoke(&mut self, c: &Closure, args: Vec<Value>, span: &Span) -> Result<Value, Abort> {
        let resolved = &self.cp.resolved;
        let params = resolved.params(c.func);
        if params.len() != args.len() {
            return Err(runtime(span, format!("expected {} arguments, got {}", params.len(), args.len())));
        }
        if self.depth >= MAX_CALL_DEPTH {
            return Err(runtime(span, "maximum call depth exceeded"));
        }
        let scope = resolved.function_scope(c.func).ok_or_else(|| runtime(span, "missing function scope"))?;
        let frame = Frame::new(scope, resolved.scope(scope).slots.len(), Some(c.env.clone()));
        for (p, v) in params.iter().zip(args) {
            frame.slots.borrow_mut()[resolved.binding(*p).slot] = Some(v);
        }
        let def = resolved.def(c.func).ok_or_else(|| runtime(span, "missing function body"))?;
        self.depth += 1;
        let flow = self.exec_block(&def.body, &frame);
        self.depth -= 1;
        match flow? {
            Flow::Return(v) => Ok(v),
            Flow::Normal => Err(runtime(span, format!("`{}` finished without returning a value", def.name))),
        }
    }

    pub(super) fn array_read(&mut self, arr: &Value, i: i64, span: &Span) -> Result<Value, Abort> {
        match arr {
            Value::Array(cells) => {
                let cells = cells.borrow();
                usize::try_from(i)
                    .ok()
                    .and_then(|i| cells.get(i).cloned())
                    .ok_or_else(|| runtime(span, format!("index {i} out of bounds for length {}", cells.len())))
            }
            Value::Proxy(p) => {
                let Type::Array(elem) = &p.to else { return Err(runtime(span, "indexing a non-array")) };
                let v = self.array_read(&p.inner, i, span)?;
                self.counts.total += 1;
                self.counts.proxy_read += 1;
                self.coerce(v, elem, &p.blame)
            }
            other => Err(runtime(span, format!("indexing a value of type {}", self.type_of(other)))),
        }
    }

    pub(super) fn array_write(&mut self, arr: &Value, i: i64, v: Value, span: &Span) -> Result<(), Abort> {
        match arr {
            Value::Array(cells) => {
                let mut cells = cells.borrow_mut();
                let len = cells.len();
                let slot = usize::try_from(i)
                    .ok()
                    .and_then(|i| cells.get_mut(i))
                    .ok_or_else(|| runtime(span, format!("index {i} out of bounds for length {len}")))?;
                *slot = v;
                Ok(())
            }
            Value::Proxy(p) => {
                let Type::Array(elem) = &p.from else { return Err(runtime(span, "indexing a non-array")) };
                self.counts.total += 1;
                self.counts.proxy_write += 1;
                let v = self.coerce(v, elem, &p.blame)?;
                self.array_write(&p.inner, i, v, span)
            }
            other => Err(runtime(span, format!("indexing a value of type {}", self.type_of(other)))),
        }
    }

    pub(super) fn array_len(&self, arr: &Value, span: &Span) -> Result<usize, Abort> {
        match arr {
            Value::Array(cells) => Ok(cells.borrow().len()),
            Value::Proxy(p) if matches!(p.to, Type::Array(_)) => self.array_len(&p.inner, span),
            other => Err(runtime(span, format!("expected an array, found {}", self.type_of(other)))),
        }
    }

    pub(super) fn array_push(&mut self, arr: &Value, v: Value, span: &Span) -> Result<usize, Abort> {
        match arr {
            Value::Array(cells) => {
                let mut cells = cells.borrow_mut();
                cells.push(v);
                Ok(cells.len())
            }
            Value::Proxy(p) => {
                let Type::Array(elem) = &p.from else { return Err(runtime(span, "expected an array")) };
                self.counts.total += 1;
                self.counts.proxy_write += 1;
                let v = self.coerce(v, elem, &p.blame)?;
                self.array_push(&p.inner, v, span)
            }
            other => Err(runtime(span, format!("expected an array, found {}", self.type_of(other)))),
        }
    }

    pub(super) fn snapshot(&self, v: &Value) -> Snapshot {
        self.snapshot_in(v, &mut Vec::new())
    }

    fn snapshot_in(&self, v: &Value, open: &mut Vec<*const RefCell<Vec<Value>>>) -> Snapshot {
        match v {
            Value::Int(n) => Snapshot::Int(*n),
            Value::Bool(b) => Snapshot::Bool(*b),
            Value::Array(cells) => {
                let ptr = Rc::as_ptr(cells);
                if open.contains(&ptr) {
                    return Snapshot::Cycle;
                }
                open.push(ptr);
                let items = cells.borrow().iter().map(|x| self.snapshot_in(x, open)).collect();
                open.pop();
                Snapshot::Array(items)
            }
            Value::Closure(c) => {
                let span = self.cp.resolved.def(c.func).map_or_else(Span::synthetic, |d| d.name_span.clone());
                Snapshot::Function(format!("def@{span}"))
            }
            Value::Extern(b) => Snapshot::Function(format!("extern {}", self.cp.resolved.binding(*b).name)),
            Value::Proxy(p) => self.snapshot_in(&p.inner, open),
        }
    }
}
