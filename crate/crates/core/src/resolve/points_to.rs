//! Context-insensitive, flow-insensitive points-to analysis over function
//! values and array allocation sites.
//!
//! Every binding, expression, function return and array allocation site is
//! an abstract location holding a set of abstract values. Subset
//! constraints are re-applied over the whole program until nothing changes;
//! statement order and branch conditions are ignored.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::names::{BindingId, BindingKind, Resolved};
use crate::syntax::{Expr, ExprKind, NodeId, StmtKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum AbsVal {
    /// A function definition or an extern.
    Func(BindingId),
    /// An array created at this node (array literal or extern call).
    Array(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Loc {
    Node(NodeId),
    Binding(BindingId),
    Ret(BindingId),
    /// Summary element cell of an allocation site.
    Cell(NodeId),
}

/// Possible callees of every call site.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CalleeMap {
    sites: BTreeMap<NodeId, BTreeSet<BindingId>>,
}

impl CalleeMap {
    /// Targets of the call expression `call`; empty when unknown.
    pub fn targets(&self, call: NodeId) -> impl Iterator<Item = BindingId> + '_ {
        self.sites.get(&call).into_iter().flatten().copied()
    }

    pub fn target_set(&self, call: NodeId) -> BTreeSet<BindingId> {
        self.sites.get(&call).cloned().unwrap_or_default()
    }

    /// Every call site with its targets, ordered by node id.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &BTreeSet<BindingId>)> {
        self.sites.iter().map(|(k, v)| (*k, v))
    }

    /// The single definition a call site can reach, if there is exactly one
    /// and it is not an extern.
    pub fn unique_def(&self, resolved: &Resolved, call: NodeId) -> Option<BindingId> {
        let set = self.sites.get(&call)?;
        match set.iter().collect::<Vec<_>>().as_slice() {
            [only] if resolved.binding(**only).kind == BindingKind::FunctionName => Some(**only),
            _ => None,
        }
    }
}

pub fn points_to(resolved: &Resolved) -> CalleeMap {
    let mut solver = Solver { resolved, sets: HashMap::new(), changed: false };
    loop {
        solver.changed = false;
        solver.pass();
        if !solver.changed {
            break;
        }
    }
    let mut sites = BTreeMap::new();
    resolved.program.visit_exprs(&mut |e| {
        if let ExprKind::Call(callee, _) = &e.kind {
            let targets = solver
                .get(Loc::Node(callee.id))
                .iter()
                .filter_map(|v| match v {
                    AbsVal::Func(b) => Some(*b),
                    AbsVal::Array(_) => None,
                })
                .collect();
            sites.insert(e.id, targets);
        }
    });
    CalleeMap { sites }
}

struct Solver<'a> {
    resolved: &'a Resolved,
    sets: HashMap<Loc, BTreeSet<AbsVal>>,
    changed: bool,
}

impl Solver<'_> {
    fn get(&self, loc: Loc) -> BTreeSet<AbsVal> {
        self.sets.get(&loc).cloned().unwrap_or_default()
    }

    fn add_all(&mut self, loc: Loc, values: impl IntoIterator<Item = AbsVal>) {
        let set = self.sets.entry(loc).or_default();
        for v in values {
            if set.insert(v) {
                self.changed = true;
            }
        }
    }

    fn flow(&mut self, from: Loc, to: Loc) {
        let values = self.get(from);
        self.add_all(to, values);
    }

    fn arrays(&self, loc: Loc) -> Vec<NodeId> {
        self.sets
            .get(&loc)
            .into_iter()
            .flatten()
            .filter_map(|v| match v {
                AbsVal::Array(site) => Some(*site),
                AbsVal::Func(_) => None,
            })
            .collect()
    }

    fn pass(&mut self) {
        let resolved = self.resolved;
        resolved.program.visit_stmts(&mut |stmt| {
            for e in stmt.exprs() {
                self.expr(e);
            }
            match &stmt.kind {
                StmtKind::Assign { value, .. } => {
                    if let Some(b) = resolved.assign_binding(stmt.id) {
                        self.flow(Loc::Node(value.id), Loc::Binding(b));
                    }
                }
                StmtKind::IndexAssign { target, value, .. } => {
                    for site in self.arrays(Loc::Node(target.id)) {
                        self.flow(Loc::Node(value.id), Loc::Cell(site));
                    }
                }
                StmtKind::Return(value) => {
                    if let Some(f) = resolved.return_owner(stmt.id) {
                        self.flow(Loc::Node(value.id), Loc::Ret(f));
                    }
                }
                StmtKind::Expr(_) | StmtKind::Def(_) => {}
            }
        });
    }

    fn expr(&mut self, expr: &Expr) {
        for child in expr.children() {
            self.expr(child);
        }
        let here = Loc::Node(expr.id);
        match &expr.kind {
            ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Add(..) => {}
            ExprKind::Var(_) => {
                let Some(b) = self.resolved.var_binding(expr.id) else { return };
                match self.resolved.binding(b).kind {
                    BindingKind::FunctionName | BindingKind::Extern => self.add_all(here, [AbsVal::Func(b)]),
                    BindingKind::LocalVar | BindingKind::Parameter => self.flow(Loc::Binding(b), here),
                }
            }
            ExprKind::If(_, t, e) => {
                self.flow(Loc::Node(t.id), here);
                self.flow(Loc::Node(e.id), here);
            }
            ExprKind::Array(elems) => {
                self.add_all(here, [AbsVal::Array(expr.id)]);
                for el in elems {
                    self.flow(Loc::Node(el.id), Loc::Cell(expr.id));
                }
            }
            ExprKind::Index(target, _) => {
                for site in self.arrays(Loc::Node(target.id)) {
                    self.flow(Loc::Cell(site), here);
                }
            }
            ExprKind::Call(callee, args) => {
                let targets: Vec<BindingId> = self
                    .get(Loc::Node(callee.id))
                    .into_iter()
                    .filter_map(|v| match v {
                        AbsVal::Func(b) => Some(b),
                        AbsVal::Array(_) => None,
                    })
                    .collect();
                for target in targets {
                    if self.resolved.binding(target).kind == BindingKind::Extern {
                        self.extern_call(expr.id, args);
                    } else {
                        let params = self.resolved.params(target).to_vec();
                        for (arg, param) in args.iter().zip(params) {
                            self.flow(Loc::Node(arg.id), Loc::Binding(param));
                        }
                        self.flow(Loc::Ret(target), here);
                    }
                }
            }
        }
    }

    /// Externs are opaque: anything reachable from the arguments may come
    /// back out, land in a fresh array, or be stored into an argument array.
    fn extern_call(&mut self, call: NodeId, args: &[Expr]) {
        let mut reachable: BTreeSet<AbsVal> = BTreeSet::new();
        let mut arg_arrays = Vec::new();
        for arg in args {
            reachable.extend(self.get(Loc::Node(arg.id)));
            for site in self.arrays(Loc::Node(arg.id)) {
                reachable.extend(self.get(Loc::Cell(site)));
                arg_arrays.push(site);
            }
        }
        reachable.insert(AbsVal::Array(call));
        self.add_all(Loc::Node(call), reachable.iter().copied());
        self.add_all(Loc::Cell(call), reachable.iter().copied());
        for site in arg_arrays {
            self.add_all(Loc::Cell(site), reachable.iter().copied());
        }
    }
}
