//! Conservative unification-based type inference.
//!
//! Every `*` inside a declared type becomes a fresh type variable; concrete
//! positions are rigid. A `*` inside an extern's declared type is `Dyn`,
//! which unifies with anything and binds nothing. Constraints are collected
//! in groups, one per syntactic construct; if a group fails to unify (clash
//! or occurs check) every class it touched is poisoned and resolves to `*`.

use std::collections::BTreeMap;

use crate::resolve::{BindingId, BindingKind, CalleeMap, Resolved, Site};
use crate::syntax::{Expr, ExprKind, NodeId, StmtKind, Type};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Key {
    Binding(BindingId),
    Expr(NodeId),
    /// Return type of a function.
    Return(BindingId),
}

impl From<Site> for Key {
    fn from(site: Site) -> Key {
        match site {
            Site::Var(b) | Site::Param(b) => Key::Binding(b),
            Site::Return(f) => Key::Return(f),
        }
    }
}

/// Given and inferred types for every binding, expression and function
/// return of a program.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeTable {
    given: BTreeMap<Key, Type>,
    inferred: BTreeMap<Key, Type>,
}

impl TypeTable {
    pub fn given(&self, key: Key) -> Type {
        self.given.get(&key).cloned().unwrap_or(Type::Unknown)
    }

    pub fn inferred(&self, key: Key) -> Type {
        self.inferred.get(&key).cloned().unwrap_or(Type::Unknown)
    }

    pub fn keys(&self) -> impl Iterator<Item = Key> + '_ {
        self.given.keys().copied()
    }

    fn insert(&mut self, key: Key, given: Type, inferred: Type) {
        debug_assert!(inferred.refines(&given), "{inferred} does not refine {given}");
        self.given.insert(key, given);
        self.inferred.insert(key, inferred);
    }

    /// Sites whose inferred type is strictly more concrete than the given one.
    pub fn refined_sites(&self, resolved: &Resolved) -> BTreeMap<Site, Type> {
        resolved
            .sites()
            .into_iter()
            .filter_map(|s| {
                let (g, i) = (self.given(s.into()), self.inferred(s.into()));
                (g != i).then_some((s, i))
            })
            .collect()
    }
}

type TermId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Term {
    Var,
    Dyn,
    Int,
    Bool,
    Array(TermId),
    Fun(Vec<TermId>, TermId),
}

#[derive(Default)]
struct Unifier {
    terms: Vec<Term>,
    parent: Vec<TermId>,
    /// Coarser partition: terms ever unified with each other, including
    /// equal rigid and structured nodes, which `parent` keeps apart.
    /// Poison is tracked per class of this partition.
    alias: Vec<TermId>,
    poisoned: Vec<bool>,
}

struct Clash;

impl Unifier {
    fn mk(&mut self, t: Term) -> TermId {
        let id = self.terms.len() as TermId;
        self.terms.push(t);
        self.parent.push(id);
        self.alias.push(id);
        self.poisoned.push(false);
        id
    }

    fn find(&mut self, mut x: TermId) -> TermId {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        while self.parent[x as usize] != root {
            let next = self.parent[x as usize];
            self.parent[x as usize] = root;
            x = next;
        }
        root
    }

    fn link(&mut self, from: TermId, to: TermId) {
        self.parent[from as usize] = to;
        self.same(from, to);
    }

    fn alias_root(&mut self, mut x: TermId) -> TermId {
        while self.alias[x as usize] != x {
            let up = self.alias[self.alias[x as usize] as usize];
            self.alias[x as usize] = up;
            x = up;
        }
        x
    }

    fn same(&mut self, a: TermId, b: TermId) {
        let (ra, rb) = (self.alias_root(a), self.alias_root(b));
        if ra != rb {
            self.alias[ra as usize] = rb;
            if self.poisoned[ra as usize] {
                self.poisoned[rb as usize] = true;
            }
        }
    }

    fn is_poisoned(&mut self, t: TermId) -> bool {
        let r = self.alias_root(t);
        self.poisoned[r as usize]
    }

    fn occurs(&mut self, var: TermId, term: TermId) -> bool {
        let mut stack = vec![term];
        let mut seen = Vec::new();
        while let Some(t) = stack.pop() {
            let r = self.find(t);
            if r == var {
                return true;
            }
            if seen.contains(&r) {
                continue;
            }
            seen.push(r);
            match &self.terms[r as usize] {
                Term::Array(e) => stack.push(*e),
                Term::Fun(ps, ret) => {
                    stack.extend(ps.iter().copied());
                    stack.push(*ret);
                }
                _ => {}
            }
        }
        false
    }

    fn unify(&mut self, a: TermId, b: TermId) -> Result<(), Clash> {
        let mut work = vec![(a, b)];
        while let Some((a, b)) = work.pop() {
            let (ra, rb) = (self.find(a), self.find(b));
            if ra == rb {
                continue;
            }
            match (self.terms[ra as usize].clone(), self.terms[rb as usize].clone()) {
                (Term::Dyn, _) | (_, Term::Dyn) => {}
                (Term::Var, _) => {
                    if self.occurs(ra, rb) {
                        return Err(Clash);
                    }
                    self.link(ra, rb);
                }
                (_, Term::Var) => {
                    if self.occurs(rb, ra) {
                        return Err(Clash);
                    }
                    self.link(rb, ra);
                }
                // Structured nodes are never merged, so a `Dyn` position of
                // an extern signature is never replaced by a rigid one.
                (Term::Int, Term::Int) | (Term::Bool, Term::Bool) => self.same(ra, rb),
                (Term::Array(x), Term::Array(y)) => {
                    self.same(ra, rb);
                    work.push((x, y));
                }
                (Term::Fun(p, r), Term::Fun(q, s)) if p.len() == q.len() => {
                    self.same(ra, rb);
                    work.extend(p.into_iter().zip(q));
                    work.push((r, s));
                }
                _ => return Err(Clash),
            }
        }
        Ok(())
    }

    fn poison_reachable(&mut self, roots: &[TermId]) {
        let mut stack = roots.to_vec();
        let mut seen = Vec::new();
        while let Some(t) = stack.pop() {
            let r = self.find(t);
            if seen.contains(&r) {
                continue;
            }
            seen.push(r);
            let a = self.alias_root(r);
            self.poisoned[a as usize] = true;
            match &self.terms[r as usize] {
                Term::Array(e) => stack.push(*e),
                Term::Fun(ps, ret) => {
                    stack.extend(ps.iter().copied());
                    stack.push(*ret);
                }
                _ => {}
            }
        }
    }

    /// Unifies every pair of one constraint group, poisoning on failure.
    fn group(&mut self, pairs: &[(TermId, TermId)]) {
        let ok = pairs.iter().all(|&(a, b)| self.unify(a, b).is_ok());
        if !ok {
            let roots: Vec<TermId> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
            self.poison_reachable(&roots);
        }
    }

    /// Term for a declared type; `*` positions become variables, or `Dyn`
    /// for externs.
    fn term_of(&mut self, ty: &Type, dyn_unknown: bool) -> TermId {
        match ty {
            Type::Unknown if dyn_unknown => self.mk(Term::Dyn),
            Type::Unknown => self.mk(Term::Var),
            Type::Int => self.mk(Term::Int),
            Type::Bool => self.mk(Term::Bool),
            Type::Array(e) => {
                let e = self.term_of(e, dyn_unknown);
                self.mk(Term::Array(e))
            }
            Type::Function(ps, r) => {
                let ps = ps.iter().map(|p| self.term_of(p, dyn_unknown)).collect();
                let r = self.term_of(r, dyn_unknown);
                self.mk(Term::Fun(ps, r))
            }
        }
    }

    fn resolve(&mut self, t: TermId, depth: usize) -> Type {
        let r = self.find(t);
        if self.is_poisoned(r) || depth > 64 {
            return Type::Unknown;
        }
        match self.terms[r as usize].clone() {
            Term::Var | Term::Dyn => Type::Unknown,
            Term::Int => Type::Int,
            Term::Bool => Type::Bool,
            Term::Array(e) => Type::array(self.resolve(e, depth + 1)),
            Term::Fun(ps, ret) => Type::function(
                ps.iter().map(|p| self.resolve(*p, depth + 1)).collect(),
                self.resolve(ret, depth + 1),
            ),
        }
    }

    /// Fills the `*` positions of `given` from the solution, keeping every
    /// concrete position of `given` as written.
    fn refine(&mut self, given: &Type, t: TermId) -> Type {
        let r = self.find(t);
        match given {
            Type::Unknown => self.resolve(t, 0),
            Type::Int | Type::Bool => given.clone(),
            Type::Array(g) => match self.terms[r as usize].clone() {
                Term::Array(e) if !self.is_poisoned(r) => Type::array(self.refine(g, e)),
                _ => given.clone(),
            },
            Type::Function(gps, gr) => match self.terms[r as usize].clone() {
                Term::Fun(ps, ret) if !self.is_poisoned(r) && ps.len() == gps.len() => {
                    let params = gps.iter().zip(ps).map(|(g, p)| self.refine(g, p)).collect();
                    Type::function(params, self.refine(gr, ret))
                }
                _ => given.clone(),
            },
        }
    }
}

pub fn infer_types(resolved: &Resolved, cm: &CalleeMap) -> TypeTable {
    let mut cx = Infer {
        resolved,
        cm,
        u: Unifier::default(),
        bindings: vec![0; resolved.bindings().len()],
        returns: BTreeMap::new(),
        exprs: vec![None; resolved.node_count()],
    };
    cx.declare();
    resolved.program.visit_stmts(&mut |stmt| {
        for e in stmt.exprs() {
            cx.expr(e);
        }
        let u = &mut cx.u;
        match &stmt.kind {
            StmtKind::Assign { value, .. } => {
                if let Some(b) = resolved.assign_binding(stmt.id) {
                    let pair = (cx.bindings[b.index()], cx.exprs[value.id.index()].unwrap());
                    u.group(&[pair]);
                }
            }
            StmtKind::IndexAssign { target, index, value } => {
                let v = cx.exprs[value.id.index()].unwrap();
                let arr = u.mk(Term::Array(v));
                let int = u.mk(Term::Int);
                u.group(&[
                    (cx.exprs[target.id.index()].unwrap(), arr),
                    (cx.exprs[index.id.index()].unwrap(), int),
                ]);
            }
            StmtKind::Return(value) => {
                if let Some(f) = resolved.return_owner(stmt.id) {
                    u.group(&[(cx.exprs[value.id.index()].unwrap(), cx.returns[&f])]);
                }
            }
            StmtKind::Expr(_) | StmtKind::Def(_) => {}
        }
    });
    cx.finish()
}

struct Infer<'a> {
    resolved: &'a Resolved,
    cm: &'a CalleeMap,
    u: Unifier,
    bindings: Vec<TermId>,
    returns: BTreeMap<BindingId, TermId>,
    exprs: Vec<Option<TermId>>,
}

impl Infer<'_> {
    fn declare(&mut self) {
        for b in self.resolved.bindings() {
            if b.kind != BindingKind::FunctionName {
                self.bindings[b.id.index()] = self.u.term_of(&b.declared, b.kind == BindingKind::Extern);
            }
        }
        for f in self.resolved.functions() {
            let ret_ty = self.resolved.def(f).map_or(Type::Unknown, |d| d.ret.clone());
            let ret = self.u.term_of(&ret_ty, false);
            let params = self.resolved.params(f).iter().map(|p| self.bindings[p.index()]).collect();
            self.returns.insert(f, ret);
            self.bindings[f.index()] = self.u.mk(Term::Fun(params, ret));
        }
    }

    fn expr(&mut self, e: &Expr) {
        for child in e.children() {
            self.expr(child);
        }
        let u = &mut self.u;
        let t = match &e.kind {
            ExprKind::Int(_) => u.mk(Term::Int),
            ExprKind::Bool(_) => u.mk(Term::Bool),
            ExprKind::Var(_) => match self.resolved.var_binding(e.id) {
                Some(b) => self.bindings[b.index()],
                None => u.mk(Term::Var),
            },
            ExprKind::Add(a, b) => {
                let (ta, tb) = (self.exprs[a.id.index()].unwrap(), self.exprs[b.id.index()].unwrap());
                let r = u.mk(Term::Int);
                let (i1, i2) = (u.mk(Term::Int), u.mk(Term::Int));
                u.group(&[(ta, i1), (tb, i2)]);
                r
            }
            ExprKind::If(c, th, el) => {
                let r = u.mk(Term::Var);
                let b = u.mk(Term::Bool);
                let (tc, tt, te) = (self.exprs[c.id.index()].unwrap(), self.exprs[th.id.index()].unwrap(), self.exprs[el.id.index()].unwrap());
                u.group(&[(tc, b), (r, tt), (r, te)]);
                r
            }
            ExprKind::Array(elems) => {
                let el = u.mk(Term::Var);
                let pairs: Vec<_> = elems.iter().map(|x| (self.exprs[x.id.index()].unwrap(), el)).collect();
                u.group(&pairs);
                u.mk(Term::Array(el))
            }
            ExprKind::Index(target, index) => {
                let r = u.mk(Term::Var);
                let arr = u.mk(Term::Array(r));
                let int = u.mk(Term::Int);
                u.group(&[(self.exprs[target.id.index()].unwrap(), arr), (self.exprs[index.id.index()].unwrap(), int)]);
                r
            }
            ExprKind::Call(callee, args) => {
                let r = u.mk(Term::Var);
                let arg_terms: Vec<TermId> = args.iter().map(|a| self.exprs[a.id.index()].unwrap()).collect();
                let shape = u.mk(Term::Fun(arg_terms, r));
                let mut pairs = vec![(self.exprs[callee.id.index()].unwrap(), shape)];
                for target in self.cm.targets(e.id) {
                    pairs.push((self.bindings[target.index()], shape));
                }
                u.group(&pairs);
                r
            }
        };
        self.exprs[e.id.index()] = Some(t);
    }

    fn finish(mut self) -> TypeTable {
        let mut table = TypeTable::default();
        for b in self.resolved.bindings() {
            let inferred = self.u.refine(&b.declared, self.bindings[b.id.index()]);
            table.insert(Key::Binding(b.id), b.declared.clone(), inferred);
        }
        for (&f, &ret) in &self.returns {
            let given = self.resolved.def(f).map_or(Type::Unknown, |d| d.ret.clone());
            let inferred = self.u.refine(&given, ret);
            table.insert(Key::Return(f), given, inferred);
        }
        let mut exprs = Vec::new();
        self.resolved.program.visit_exprs(&mut |e| exprs.push((e.id, e.kind.clone())));
        for (id, kind) in exprs {
            let Some(t) = self.exprs[id.index()] else { continue };
            let given = match &kind {
                // An application has the declared result type of its callee.
                ExprKind::Call(callee, args) => match self.declared_type(callee) {
                    Type::Function(ps, r) if ps.len() == args.len() => *r,
                    _ => Type::Unknown,
                },
                ExprKind::Int(_) => Type::Int,
                ExprKind::Bool(_) => Type::Bool,
                ExprKind::Array(_) => Type::array(Type::Unknown),
                ExprKind::Var(_) => self
                    .resolved
                    .var_binding(id)
                    .map_or(Type::Unknown, |b| self.resolved.binding(b).declared.clone()),
                _ => Type::Unknown,
            };
            let inferred = self.u.refine(&given, t);
            table.insert(Key::Expr(id), given, inferred);
        }
        table
    }

    fn declared_type(&self, e: &Expr) -> Type {
        let ExprKind::Var(_) = e.kind else { return Type::Unknown };
        let Some(b) = self.resolved.var_binding(e.id) else { return Type::Unknown };
        let binding = self.resolved.binding(b);
        match binding.kind {
            BindingKind::FunctionName => self.resolved.def(b).map_or(Type::Unknown, |d| d.signature()),
            _ => binding.declared.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::resolve::{points_to, resolve_names};
    use crate::syntax::parse;

    fn infer(src: &str) -> (Resolved, TypeTable) {
        let r = resolve_names(&parse("t.spy", src, &BTreeMap::new()).unwrap()).unwrap();
        let cm = points_to(&r);
        let t = infer_types(&r, &cm);
        (r, t)
    }

    fn inferred_of(r: &Resolved, t: &TypeTable, label: &str) -> Type {
        t.inferred(r.find_site(label).unwrap().into())
    }

    const INTRO: &str = "\
extern succ: Function([*], *)

def f(x, y):
    u = x
    z: Bool = y
    return if z then succ(x) else succ(u)

f(succ(1), true)
";

    #[test]
    fn intro() {
        let (r, t) = infer(INTRO);
        assert_eq!(inferred_of(&r, &t, "param y"), Type::Bool);
        assert_eq!(inferred_of(&r, &t, "var z"), Type::Bool);
        assert_eq!(inferred_of(&r, &t, "param x"), Type::Unknown);
        assert_eq!(inferred_of(&r, &t, "var u"), Type::Unknown);
        assert_eq!(inferred_of(&r, &t, "return f"), Type::Unknown);
        let refined: Vec<String> = t.refined_sites(&r).keys().map(|s| r.site_label(*s)).collect();
        assert_eq!(refined, ["param y"]);
    }

    #[test]
    fn conflict_falls_back_to_unknown() {
        let (r, t) = infer("x: * = 1\ny: * = x + true\n");
        assert_eq!(inferred_of(&r, &t, "var x"), Type::Unknown);
        assert_eq!(inferred_of(&r, &t, "var y"), Type::Int);
    }

    #[test]
    fn conflict_reaches_everything_unified_with_it() {
        // `v` and the `if` are both Int, through separate literal nodes.
        let (r, t) = infer("def g():\n    v = 1\n    return (if false then 2 else v)[0]\n");
        assert_eq!(inferred_of(&r, &t, "var v"), Type::Unknown);
        assert!(t.refined_sites(&r).is_empty());
    }

    #[test]
    fn literal_entries_are_fixed() {
        let (r, t) = infer("x: * = 1\ny: * = x + true\n");
        r.program.visit_exprs(&mut |e| match e.kind {
            ExprKind::Int(_) => assert_eq!((t.given(Key::Expr(e.id)), t.inferred(Key::Expr(e.id))), (Type::Int, Type::Int)),
            ExprKind::Bool(_) => assert_eq!(t.inferred(Key::Expr(e.id)), Type::Bool),
            _ => {}
        });
    }

    #[test]
    fn concrete_given_is_preserved_under_conflict() {
        let (r, t) = infer("x: Int = 1\nx = true\n".replace("x = true", "x: Int = true").as_str());
        assert_eq!(inferred_of(&r, &t, "var x"), Type::Int);
    }

    #[test]
    fn recursion_and_occurs_check() {
        let (r, t) = infer("def loop(n, acc):\n    return if n then acc else loop(n, acc + 1)\nloop(true, 0)\n");
        assert_eq!(inferred_of(&r, &t, "param n"), Type::Bool);
        assert_eq!(inferred_of(&r, &t, "param acc"), Type::Int);
        assert_eq!(inferred_of(&r, &t, "return loop"), Type::Int);

        let (r, t) = infer("a = [1]\na = [a]\n");
        assert_eq!(inferred_of(&r, &t, "var a"), Type::Unknown);
    }

    #[test]
    fn extern_unknown_absorbs() {
        let (r, t) = infer("extern opaque: Function([*], *)\nx = opaque(1)\ny = opaque(true)\n");
        assert_eq!(inferred_of(&r, &t, "var x"), Type::Unknown);
        assert_eq!(inferred_of(&r, &t, "var y"), Type::Unknown);
        let (r, t) = infer("extern lt: Function([Int, Int], Bool)\nb = lt(1, 2)\n");
        assert_eq!(inferred_of(&r, &t, "var b"), Type::Bool);
    }

    #[test]
    fn multiple_callees_conflict() {
        let src = "\
def f(a):
    return a
def g(a):
    return a
e = f
e(1)
e = g
e(true)
";
        let (r, t) = infer(src);
        assert_eq!(t.inferred(r.find_site("param a@1:7").unwrap().into()), Type::Unknown);
    }

    #[test]
    fn partially_annotated_refines_inner_unknown() {
        let (r, t) = infer("a: Array(*) = [1, 2]\n");
        assert_eq!(inferred_of(&r, &t, "var a"), Type::array(Type::Int));
        let (r, t) = infer("a: Array(*) = []\n");
        assert_eq!(inferred_of(&r, &t, "var a"), Type::array(Type::Unknown));
    }

    #[test]
    fn higher_order_parameter() {
        let (r, t) = infer("def app(k, v):\n    return k(v) + 1\ndef inc(n):\n    return n + 1\napp(inc, 2)\n");
        assert_eq!(inferred_of(&r, &t, "param k"), Type::function(vec![Type::Int], Type::Int));
        assert_eq!(inferred_of(&r, &t, "return app"), Type::Int);
    }

    /// Candidate assignments of depth at most two over the base types.
    fn small_types() -> Vec<Type> {
        let base = [Type::Int, Type::Bool];
        let mut out: Vec<Type> = base.to_vec();
        out.extend(base.iter().map(|t| Type::array(t.clone())));
        out
    }

    #[test]
    fn array_literal_matches_enumeration() {
        // Constraints for `a: * = [1, 2]`: a = Array(e), e = typeof(1), e = typeof(2).
        let mut solutions = Vec::new();
        for a in small_types() {
            for e in small_types() {
                if a == Type::array(e.clone()) && e == Type::Int {
                    solutions.push(a.clone());
                }
            }
        }
        assert_eq!(solutions.len(), 1);
        let (r, t) = infer("a: * = [1, 2]\n");
        assert_eq!(inferred_of(&r, &t, "var a"), solutions[0]);
    }

    #[test]
    fn deterministic() {
        let (_, a) = infer(INTRO);
        let (_, b) = infer(INTRO);
        assert_eq!(a, b);
    }
}
