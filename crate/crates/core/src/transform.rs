//! Program variants: appending annotations, and the fast-slow duplication
//! of annotated functions with static dispatch at call sites.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::resolve::{points_to, resolve_names, BindingId, Resolved, Site};
use crate::runtime::static_types;
use crate::selector::AnnotationSet;
use crate::syntax::{for_each_expr_mut, Expr, ExprKind, NodeId, Program, Stmt, StmtKind, Type};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantKind {
    Given,
    Infer,
    Chosen,
}

impl VariantKind {
    pub const ALL: [VariantKind; 3] = [VariantKind::Given, VariantKind::Infer, VariantKind::Chosen];
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VariantKind::Given => "given",
            VariantKind::Infer => "infer",
            VariantKind::Chosen => "chosen",
        })
    }
}

impl FromStr for VariantKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "given" => Ok(VariantKind::Given),
            "infer" => Ok(VariantKind::Infer),
            "chosen" => Ok(VariantKind::Chosen),
            other => Err(format!("unknown variant `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TransformError {
    #[error("annotation site {0:?} does not exist in this program")]
    UnknownSite(Site),
    #[error("transformed program no longer resolves: {0}")]
    Broken(String),
}

fn check_sites(resolved: &Resolved, sites: &AnnotationSet) -> Result<(), TransformError> {
    match sites.keys().find(|s| !resolved.is_valid_site(**s)) {
        Some(s) => Err(TransformError::UnknownSite(*s)),
        None => Ok(()),
    }
}

/// Replaces the declared annotation of every site in `sites`. Spans and
/// node ids are kept.
pub fn annotate(resolved: &Resolved, sites: &AnnotationSet) -> Result<Program, TransformError> {
    check_sites(resolved, sites)?;
    let mut program = resolved.program.clone();
    annotate_block(&mut program.stmts, resolved, sites);
    Ok(program)
}

fn annotate_block(stmts: &mut [Stmt], r: &Resolved, sites: &AnnotationSet) {
    for stmt in stmts {
        apply_local(stmt, r, sites);
        let id = stmt.id;
        if let StmtKind::Def(def) = &mut stmt.kind {
            if let Some(f) = r.def_binding(id) {
                apply_signature(def, f, r, sites);
            }
            annotate_block(&mut def.body, r, sites);
        }
    }
}

fn apply_local(stmt: &mut Stmt, r: &Resolved, sites: &AnnotationSet) {
    let id = stmt.id;
    if let StmtKind::Assign { annot, .. } = &mut stmt.kind {
        // Assignments to a parameter carry the parameter's annotation.
        let site = r.assign_binding(id).and_then(|b| sites.get(&Site::Var(b)).or_else(|| sites.get(&Site::Param(b))));
        if let Some(t) = site {
            *annot = t.clone();
        }
    }
}

fn apply_signature(def: &mut crate::syntax::Def, f: BindingId, r: &Resolved, sites: &AnnotationSet) {
    for (p, b) in def.params.iter_mut().zip(r.params(f)) {
        if let Some(t) = sites.get(&Site::Param(*b)) {
            p.annot = t.clone();
        }
    }
    if let Some(t) = sites.get(&Site::Return(f)) {
        def.ret = t.clone();
    }
}

/// Duplicates every function that receives a parameter or return
/// annotation into an annotated fast copy placed just before the untouched
/// original, then points each statically resolvable call at the copy when
/// every argument's static type is a subtype of the copy's parameter type.
///
/// Annotations on locals are applied in place, except inside the original
/// of a duplicated function, which is kept verbatim; its copy carries them.
pub fn fast_slow(resolved: &Resolved, sites: &AnnotationSet) -> Result<Program, TransformError> {
    check_sites(resolved, sites)?;
    let duplicated: BTreeSet<BindingId> = sites
        .keys()
        .filter_map(|s| match s {
            Site::Return(f) => Some(*f),
            Site::Param(p) => resolved.functions().find(|f| resolved.params(*f).contains(p)),
            Site::Var(_) => None,
        })
        .collect();

    let mut used: HashSet<String> = resolved.bindings().iter().map(|b| b.name.clone()).collect();
    let mut fast_names = BTreeMap::new();
    for &f in &duplicated {
        let base = format!("{}_fast", resolved.binding(f).name);
        let mut name = base.clone();
        let mut n = 2;
        while used.contains(&name) {
            name = format!("{base}{n}");
            n += 1;
        }
        used.insert(name.clone());
        fast_names.insert(f, name);
    }

    let mut originals = Vec::new();
    let mut program = resolved.program.clone();
    program.stmts = rebuild(&resolved.program.stmts, resolved, sites, &fast_names, &[], &mut originals);
    program.renumber();
    if duplicated.is_empty() {
        return Ok(program);
    }

    let base = resolve_names(&program).map_err(|e| TransformError::Broken(e.to_string()))?;
    let callees = points_to(&base);
    let eligible = eligible_calls(&base, &callees, &originals);

    let mut decisions = vec![false; eligible.len()];
    let mut banned = vec![false; eligible.len()];
    loop {
        let current = with_dispatch(&program, &eligible, &decisions);
        let r = resolve_names(&current).map_err(|e| TransformError::Broken(e.to_string()))?;
        let types = static_types(&r);
        let fits: Vec<bool> = eligible
            .iter()
            .map(|c| {
                c.args.len() == c.fast_params.len()
                    && c.args.iter().zip(&c.fast_params).all(|(a, p)| types[a.index()].is_subtype_of(p))
            })
            .collect();
        let mut changed = false;
        for i in 0..eligible.len() {
            if decisions[i] && !fits[i] {
                decisions[i] = false;
                banned[i] = true;
                changed = true;
            }
        }
        if !changed {
            for i in 0..eligible.len() {
                if !decisions[i] && !banned[i] && fits[i] {
                    decisions[i] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok(current);
        }
    }
}

fn rebuild(
    stmts: &[Stmt],
    r: &Resolved,
    sites: &AnnotationSet,
    fast_names: &BTreeMap<BindingId, String>,
    path: &[usize],
    originals: &mut Vec<Vec<usize>>,
) -> Vec<Stmt> {
    let mut out = Vec::with_capacity(stmts.len());
    for stmt in stmts {
        let mut s = stmt.clone();
        apply_local(&mut s, r, sites);
        if let StmtKind::Def(def) = &mut s.kind {
            let f = r.def_binding(stmt.id).expect("resolved def");
            let mut here = path.to_vec();
            here.push(out.len());
            def.body = rebuild(&def.body, r, sites, fast_names, &here, originals);
            if let Some(name) = fast_names.get(&f) {
                def.name = name.clone();
                apply_signature(def, f, r, sites);
                out.push(s);
                here = path.to_vec();
                here.push(out.len());
                originals.push(here);
                out.push(stmt.clone());
                continue;
            }
        }
        out.push(s);
    }
    out
}

struct Eligible {
    call: NodeId,
    args: Vec<NodeId>,
    fast_name: String,
    fast_params: Vec<Type>,
}

/// Calls outside the kept originals whose callee is the original's name and
/// whose only possible target is that original.
fn eligible_calls(r: &Resolved, callees: &crate::resolve::CalleeMap, originals: &[Vec<usize>]) -> Vec<Eligible> {
    let mut info: BTreeMap<BindingId, (String, Vec<Type>)> = BTreeMap::new();
    for path in originals {
        let (orig, fast) = (stmt_at(&r.program.stmts, path), {
            let mut p = path.clone();
            *p.last_mut().unwrap() -= 1;
            stmt_at(&r.program.stmts, &p)
        });
        let (Some(f), StmtKind::Def(fast_def)) = (r.def_binding(orig.id), &fast.kind) else { continue };
        info.insert(f, (fast_def.name.clone(), fast_def.params.iter().map(|p| p.annot.clone()).collect()));
    }
    let skip: HashSet<NodeId> = originals.iter().map(|p| stmt_at(&r.program.stmts, p).id).collect();
    let mut out = Vec::new();
    collect_calls(&r.program.stmts, &skip, &mut |e| {
        let ExprKind::Call(callee, args) = &e.kind else { return };
        let ExprKind::Var(_) = callee.kind else { return };
        let Some(b) = r.var_binding(callee.id) else { return };
        let Some((name, params)) = info.get(&b) else { return };
        if callees.target_set(e.id) != BTreeSet::from([b]) {
            return;
        }
        out.push(Eligible {
            call: e.id,
            args: args.iter().map(|a| a.id).collect(),
            fast_name: name.clone(),
            fast_params: params.clone(),
        });
    });
    out
}

fn stmt_at<'a>(stmts: &'a [Stmt], path: &[usize]) -> &'a Stmt {
    let mut s = &stmts[path[0]];
    for &i in &path[1..] {
        let StmtKind::Def(def) = &s.kind else { unreachable!("path runs through defs") };
        s = &def.body[i];
    }
    s
}

fn collect_calls<'a>(stmts: &'a [Stmt], skip: &HashSet<NodeId>, visit: &mut impl FnMut(&'a Expr)) {
    for s in stmts {
        if skip.contains(&s.id) {
            continue;
        }
        for e in s.exprs() {
            e.walk(visit);
        }
        if let StmtKind::Def(def) = &s.kind {
            collect_calls(&def.body, skip, visit);
        }
    }
}

fn with_dispatch(program: &Program, eligible: &[Eligible], decisions: &[bool]) -> Program {
    let fast: BTreeMap<NodeId, &str> = eligible
        .iter()
        .zip(decisions)
        .filter(|(_, d)| **d)
        .map(|(c, _)| (c.call, c.fast_name.as_str()))
        .collect();
    let mut p = program.clone();
    if fast.is_empty() {
        return p;
    }
    for stmt in &mut p.stmts {
        for_each_expr_mut(stmt, &mut |e| {
            if let Some(name) = fast.get(&e.id) {
                if let ExprKind::Call(callee, _) = &mut e.kind {
                    callee.kind = ExprKind::Var(name.to_string());
                }
            }
        });
    }
    p
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::syntax::{parse, print_program};

    const INTRO: &str = "\
extern succ: Function([*], *)

def f(x, y):
    u = x
    z: Bool = y
    return if z then succ(x) else succ(u)

f(succ(1), true)
";

    fn resolve(src: &str) -> Resolved {
        resolve_names(&parse("t.spy", src, &BTreeMap::new()).unwrap()).unwrap()
    }

    fn sites(r: &Resolved, items: &[(&str, Type)]) -> AnnotationSet {
        items.iter().map(|(l, t)| (r.find_site(l).unwrap(), t.clone())).collect()
    }

    #[test]
    fn annotate_param() {
        let r = resolve(INTRO);
        let p = annotate(&r, &sites(&r, &[("param y", Type::Bool)])).unwrap();
        let expected = INTRO.replace("def f(x, y)", "def f(x, y: Bool)");
        assert!(p.structurally_eq(&parse("t.spy", &expected, &BTreeMap::new()).unwrap()));
        assert!(print_program(&p).contains("def f(x: *, y: Bool) -> *:"));
    }

    #[test]
    fn annotate_empty_is_identity_and_idempotent() {
        let r = resolve(INTRO);
        assert_eq!(annotate(&r, &AnnotationSet::new()).unwrap(), r.program);
        let s = sites(&r, &[("param x", Type::Int), ("var u", Type::Int)]);
        let once = annotate(&r, &s).unwrap();
        let twice = annotate(&resolve_names(&once).unwrap(), &s).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn annotate_rejects_stale_sites() {
        let r = resolve(INTRO);
        let mut s = AnnotationSet::new();
        s.insert(Site::Param(BindingId(999)), Type::Int);
        assert!(matches!(annotate(&r, &s), Err(TransformError::UnknownSite(_))));
    }

    #[test]
    fn fast_copy_shape() {
        let r = resolve(INTRO);
        let s = sites(&r, &[("param y", Type::Bool)]);
        let p = fast_slow(&r, &s).unwrap();
        let expected = "\
extern succ: Function([*], *)

def f_fast(x, y: Bool):
    u = x
    z: Bool = y
    return if z then succ(x) else succ(u)

def f(x, y):
    u = x
    z: Bool = y
    return if z then succ(x) else succ(u)

f_fast(succ(1), true)
";
        assert!(p.structurally_eq(&parse("t.spy", expected, &BTreeMap::new()).unwrap()), "{}", print_program(&p));
    }

    #[test]
    fn empty_set_is_identity() {
        let r = resolve(INTRO);
        assert!(fast_slow(&r, &AnnotationSet::new()).unwrap().structurally_eq(&r.program));
    }

    #[test]
    fn unknown_argument_dispatches_slow() {
        let src = "extern opaque: Function([*], *)\ndef g(n):\n    return n + 1\ng(opaque(1))\ng(2)\n";
        let r = resolve(src);
        let p = fast_slow(&r, &sites(&r, &[("param n", Type::Int)])).unwrap();
        let text = print_program(&p);
        assert!(text.contains("g(opaque(1))"), "{text}");
        assert!(text.contains("g_fast(2)"), "{text}");
    }

    #[test]
    fn recursion_and_name_collisions() {
        let src = "\
extern lt: Function([Int, Int], Bool)
extern pred: Function([*], *)
def h_fast():
    return 0
def h(n, acc):
    return if lt(n, 1) then acc else h(pred(n), acc + 1)
h(3, 0)
";
        let r = resolve(src);
        let p = fast_slow(&r, &sites(&r, &[("param acc", Type::Int), ("return h", Type::Int)])).unwrap();
        let text = print_program(&p);
        assert!(text.contains("def h_fast2(n: *, acc: Int) -> Int:"), "{text}");
        // The copy's recursive call is re-dispatched; the original's is kept.
        assert!(text.contains("return if lt(n, 1) then acc else h_fast2(pred(n), acc + 1)"), "{text}");
        assert!(text.contains("return if lt(n, 1) then acc else h(pred(n), acc + 1)"), "{text}");
        assert!(text.contains("h_fast2(3, 0)"), "{text}");
    }

    #[test]
    fn reassigned_parameters_follow_their_annotation() {
        let r = resolve("def f(n):\n    n = n + 1\n    return n\nf(1)\n");
        let s = sites(&r, &[("param n", Type::Int)]);
        let p = annotate(&r, &s).unwrap();
        assert!(resolve_names(&p).is_ok());
        assert!(print_program(&p).contains("n: Int = n + 1"));
        assert!(resolve_names(&fast_slow(&r, &s).unwrap()).is_ok());
    }

    #[test]
    fn ambiguous_call_sites_are_left_alone() {
        let src = "\
def f(a):
    return a
def g(a):
    return a
e = f
e = g
e(1)
f(2)
";
        let r = resolve(src);
        let p = fast_slow(&r, &sites(&r, &[("param a@1:7", Type::Int)])).unwrap();
        let text = print_program(&p);
        assert!(text.contains("e(1)"), "{text}");
        assert!(text.contains("f_fast(2)"), "{text}");
    }
}
