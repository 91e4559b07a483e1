//! Data-flow graph over variables, parameters, function names, literals,
//! expressions and function returns. Edges point from producer to consumer.

use std::fmt;
use std::collections::{BTreeSet, HashMap};
use std::fmt::Write;

use serde::Serialize;

use crate::infer::{Key, TypeTable};
use crate::resolve::{BindingId, BindingKind, CalleeMap, Resolved, Site};
use crate::syntax::{print_expr, Expr, ExprKind, NodeId, Span, StmtKind, Type};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct VertexId(pub u32);

impl VertexId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VertexKind {
    Var,
    Param,
    FunctionName,
    ReturnOf,
    Literal,
    Expr,
}

impl VertexKind {
    /// Kinds that carry an annotation site.
    pub fn is_site_kind(self) -> bool {
        matches!(self, VertexKind::Var | VertexKind::Param | VertexKind::ReturnOf)
    }
}

/// What a vertex stands for in the program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    Binding(BindingId),
    Return(BindingId),
    Expr(NodeId),
    /// Vertices of graphs not built from a program.
    Synthetic(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vertex {
    pub id: VertexId,
    pub kind: VertexKind,
    pub origin: Origin,
    pub name: String,
    pub given: Type,
    pub inferred: Type,
    pub span: Span,
}

impl Vertex {
    /// The annotation site this vertex represents, if any.
    pub fn site(&self) -> Option<Site> {
        match (self.kind, self.origin) {
            (VertexKind::Var, Origin::Binding(b)) => Some(Site::Var(b)),
            (VertexKind::Param, Origin::Binding(b)) => Some(Site::Param(b)),
            (VertexKind::ReturnOf, Origin::Return(f)) => Some(Site::Return(f)),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        let kind = match self.kind {
            VertexKind::Var => "var",
            VertexKind::Param => "param",
            VertexKind::FunctionName => "function-name",
            VertexKind::ReturnOf => "return-of",
            VertexKind::Literal => "literal",
            VertexKind::Expr => "expr",
        };
        format!("{kind}:{}:{}/{}", self.name, self.given, self.inferred)
    }
}

/// Optional edge rules. Both are research toggles; the defaults are the
/// ones the selector is specified against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeRules {
    /// Operands of `+` flow into the sum.
    pub operand_edges: bool,
    /// The condition of an `if` flows into its result.
    pub if_condition_edge: bool,
}

impl Default for EdgeRules {
    fn default() -> Self {
        EdgeRules { operand_edges: true, if_condition_edge: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArityMismatch {
    pub span: Span,
    pub callee: String,
    pub expected: usize,
    pub found: usize,
}

impl fmt::Display for ArityMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: `{}` takes {} arguments, call passes {}", self.span, self.callee, self.expected, self.found)
    }
}

const OPEN: u8 = 1;
const CANDIDATE: u8 = 2;
const ROOT: u8 = 4;

#[derive(Debug, Clone)]
pub struct FlowGraph {
    vertices: Vec<Vertex>,
    /// Sorted, deduplicated, without self-loops.
    edges: Vec<(VertexId, VertexId)>,
    out_offsets: Vec<u32>,
    out_targets: Vec<VertexId>,
    in_offsets: Vec<u32>,
    in_sources: Vec<VertexId>,
    by_origin: HashMap<Origin, VertexId>,
    /// Per-vertex `OPEN` / `CANDIDATE` / `ROOT` bits, kept apart from the vertices
    /// so whole-graph passes stay in cache.
    flags: Vec<u8>,
    pub diagnostics: Vec<ArityMismatch>,
}

impl FlowGraph {
    /// Builds a graph from explicit parts. Vertex ids are reassigned to list
    /// positions; self-loops and duplicate edges are dropped.
    pub fn from_parts(mut vertices: Vec<Vertex>, edges: impl IntoIterator<Item = (VertexId, VertexId)>) -> FlowGraph {
        for (i, v) in vertices.iter_mut().enumerate() {
            v.id = VertexId(i as u32);
        }
        let n = vertices.len();
        let mut edges: Vec<_> = edges.into_iter().filter(|(a, b)| a != b && a.index() < n && b.index() < n).collect();
        edges.sort_unstable();
        edges.dedup();

        let mut out_offsets = vec![0u32; n + 1];
        let mut in_offsets = vec![0u32; n + 1];
        for (a, b) in &edges {
            out_offsets[a.index() + 1] += 1;
            in_offsets[b.index() + 1] += 1;
        }
        for i in 0..n {
            out_offsets[i + 1] += out_offsets[i];
            in_offsets[i + 1] += in_offsets[i];
        }
        // Edges are sorted by source, so targets fill in order.
        let out_targets: Vec<VertexId> = edges.iter().map(|(_, b)| *b).collect();
        let mut fill = in_offsets.clone();
        let mut in_sources = vec![VertexId(0); edges.len()];
        for (a, b) in &edges {
            in_sources[fill[b.index()] as usize] = *a;
            fill[b.index()] += 1;
        }
        let by_origin = vertices.iter().map(|v| (v.origin, v.id)).collect();
        let flags = vertices
            .iter()
            .map(|v| {
                let open = if v.given.contains_unknown() { OPEN } else { 0 };
                let cand = if v.kind.is_site_kind() { CANDIDATE } else { 0 };
                let i = v.id.index();
                let root = if in_offsets[i] == in_offsets[i + 1] { ROOT } else { 0 };
                open | cand | root
            })
            .collect();
        FlowGraph {
            vertices,
            edges,
            out_offsets,
            out_targets,
            in_offsets,
            in_sources,
            by_origin,
            flags,
            diagnostics: Vec::new(),
        }
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, id: VertexId) -> &Vertex {
        &self.vertices[id.index()]
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> &[(VertexId, VertexId)] {
        &self.edges
    }

    pub fn successors(&self, v: VertexId) -> &[VertexId] {
        let i = v.index();
        &self.out_targets[self.out_offsets[i] as usize..self.out_offsets[i + 1] as usize]
    }

    pub fn predecessors(&self, v: VertexId) -> &[VertexId] {
        let i = v.index();
        &self.in_sources[self.in_offsets[i] as usize..self.in_offsets[i + 1] as usize]
    }

    /// Given type contains `*`.
    pub fn is_open(&self, v: VertexId) -> bool {
        self.flags[v.index()] & OPEN != 0
    }

    /// A variable, parameter or return vertex with an open given type.
    pub fn is_candidate(&self, v: VertexId) -> bool {
        self.flags[v.index()] & (OPEN | CANDIDATE) == OPEN | CANDIDATE
    }

    /// No incoming edge.
    pub fn is_root(&self, v: VertexId) -> bool {
        self.flags[v.index()] & ROOT != 0
    }

    pub fn has_edge(&self, a: VertexId, b: VertexId) -> bool {
        self.successors(a).binary_search(&b).is_ok()
    }

    pub fn by_origin(&self, origin: Origin) -> Option<VertexId> {
        self.by_origin.get(&origin).copied()
    }

    pub fn site_vertex(&self, site: Site) -> Option<VertexId> {
        match site {
            Site::Var(b) | Site::Param(b) => self.by_origin(Origin::Binding(b)),
            Site::Return(f) => self.by_origin(Origin::Return(f)),
        }
    }

    /// Graphviz rendering.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph flow {\n");
        for v in &self.vertices {
            let label = v.label().replace('"', "\\\"");
            let _ = writeln!(out, "  v{} [label=\"{label}\"];", v.id.0);
        }
        for (a, b) in &self.edges {
            let _ = writeln!(out, "  v{} -> v{};", a.0, b.0);
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let nodes: Vec<_> = self
            .vertices
            .iter()
            .map(|v| {
                serde_json::json!({
                    "id": v.id,
                    "kind": v.kind,
                    "name": v.name,
                    "span": v.span,
                    "given": v.given,
                    "inferred": v.inferred,
                })
            })
            .collect();
        let edges: Vec<_> = self.edges.iter().map(|(a, b)| [a.0, b.0]).collect();
        serde_json::json!({ "nodes": nodes, "edges": edges })
    }
}

pub fn build_graph(resolved: &Resolved, cm: &CalleeMap, table: &TypeTable) -> FlowGraph {
    build_graph_with(resolved, cm, table, EdgeRules::default())
}

pub fn build_graph_with(resolved: &Resolved, cm: &CalleeMap, table: &TypeTable, rules: EdgeRules) -> FlowGraph {
    let mut b = Builder { resolved, cm, table, rules, vertices: Vec::new(), index: HashMap::new(), edges: Vec::new(), diagnostics: Vec::new() };
    for binding in resolved.bindings() {
        let kind = match binding.kind {
            BindingKind::LocalVar => VertexKind::Var,
            BindingKind::Parameter => VertexKind::Param,
            BindingKind::FunctionName => VertexKind::FunctionName,
            // Created on first reference.
            BindingKind::Extern => continue,
        };
        b.add(kind, Origin::Binding(binding.id), binding.name.clone(), binding.decl_span.clone());
    }
    for f in resolved.functions() {
        let span = resolved.def(f).map_or_else(Span::synthetic, |d| d.name_span.clone());
        b.add(VertexKind::ReturnOf, Origin::Return(f), resolved.binding(f).name.clone(), span);
    }
    resolved.program.visit_stmts(&mut |stmt| {
        for e in stmt.exprs() {
            b.expr(e);
        }
        match &stmt.kind {
            StmtKind::Assign { value, .. } => {
                if let Some(target) = resolved.assign_binding(stmt.id) {
                    let (from, to) = (b.of_expr(value), b.index[&Origin::Binding(target)]);
                    b.edge(from, to);
                }
            }
            StmtKind::IndexAssign { target, value, .. } => {
                let (from, to) = (b.of_expr(value), b.of_expr(target));
                b.edge(from, to);
            }
            StmtKind::Return(value) => {
                if let Some(f) = resolved.return_owner(stmt.id) {
                    let (from, to) = (b.of_expr(value), b.index[&Origin::Return(f)]);
                    b.edge(from, to);
                }
            }
            StmtKind::Expr(_) | StmtKind::Def(_) => {}
        }
    });
    b.finish()
}

struct Builder<'a> {
    resolved: &'a Resolved,
    cm: &'a CalleeMap,
    table: &'a TypeTable,
    rules: EdgeRules,
    vertices: Vec<Vertex>,
    index: HashMap<Origin, usize>,
    edges: Vec<(usize, usize)>,
    diagnostics: Vec<ArityMismatch>,
}

impl Builder<'_> {
    fn add(&mut self, kind: VertexKind, origin: Origin, name: String, span: Span) -> usize {
        let key = match origin {
            Origin::Binding(b) => Key::Binding(b),
            Origin::Return(f) => Key::Return(f),
            Origin::Expr(id) => Key::Expr(id),
            Origin::Synthetic(_) => unreachable!(),
        };
        let (given, inferred) = (self.table.given(key), self.table.inferred(key));
        let i = self.vertices.len();
        self.vertices.push(Vertex { id: VertexId(0), kind, origin, name, given, inferred, span });
        self.index.insert(origin, i);
        i
    }

    fn edge(&mut self, from: usize, to: usize) {
        self.edges.push((from, to));
    }

    /// Vertex standing for the value of `e`. Variable occurrences share
    /// their binding's vertex.
    fn of_expr(&mut self, e: &Expr) -> usize {
        if let ExprKind::Var(name) = &e.kind {
            if let Some(b) = self.resolved.var_binding(e.id) {
                if let Some(&i) = self.index.get(&Origin::Binding(b)) {
                    return i;
                }
                let binding = self.resolved.binding(b);
                debug_assert_eq!(binding.kind, BindingKind::Extern);
                return self.add(VertexKind::FunctionName, Origin::Binding(b), name.clone(), binding.decl_span.clone());
            }
        }
        self.index[&Origin::Expr(e.id)]
    }

    fn expr(&mut self, e: &Expr) {
        for child in e.children() {
            self.expr(child);
        }
        let name = print_expr(e);
        let here = match &e.kind {
            ExprKind::Var(_) => {
                self.of_expr(e);
                return;
            }
            ExprKind::Int(_) | ExprKind::Bool(_) => {
                self.add(VertexKind::Literal, Origin::Expr(e.id), name, e.span.clone());
                return;
            }
            _ => self.add(VertexKind::Expr, Origin::Expr(e.id), name, e.span.clone()),
        };
        match &e.kind {
            ExprKind::Add(a, b) if self.rules.operand_edges => {
                let (a, b) = (self.of_expr(a), self.of_expr(b));
                self.edge(a, here);
                self.edge(b, here);
            }
            ExprKind::If(c, t, f) => {
                if self.rules.if_condition_edge {
                    let c = self.of_expr(c);
                    self.edge(c, here);
                }
                let (t, f) = (self.of_expr(t), self.of_expr(f));
                self.edge(t, here);
                self.edge(f, here);
            }
            ExprKind::Array(elems) => {
                for el in elems {
                    let el = self.of_expr(el);
                    self.edge(el, here);
                }
            }
            ExprKind::Index(target, _) => {
                let t = self.of_expr(target);
                self.edge(t, here);
            }
            ExprKind::Call(_, args) => {
                let args: Vec<usize> = args.iter().map(|a| self.of_expr(a)).collect();
                let targets: BTreeSet<BindingId> = self.cm.target_set(e.id);
                for f in targets {
                    if self.resolved.binding(f).kind != BindingKind::FunctionName {
                        continue;
                    }
                    let params = self.resolved.params(f);
                    if params.len() != args.len() {
                        self.diagnostics.push(ArityMismatch {
                            span: e.span.clone(),
                            callee: self.resolved.binding(f).name.clone(),
                            expected: params.len(),
                            found: args.len(),
                        });
                    }
                    for (&a, p) in args.iter().zip(params) {
                        let p = self.index[&Origin::Binding(*p)];
                        self.edge(a, p);
                    }
                    let ret = self.index[&Origin::Return(f)];
                    self.edge(ret, here);
                }
            }
            _ => {}
        }
    }

    fn finish(self) -> FlowGraph {
        let mut order: Vec<usize> = (0..self.vertices.len()).collect();
        order.sort_by(|&a, &b| {
            let (va, vb) = (&self.vertices[a], &self.vertices[b]);
            (&va.span, va.kind, va.origin).cmp(&(&vb.span, vb.kind, vb.origin))
        });
        let mut new_id = vec![0u32; order.len()];
        for (new, &old) in order.iter().enumerate() {
            new_id[old] = new as u32;
        }
        let vertices: Vec<Vertex> = order.iter().map(|&i| self.vertices[i].clone()).collect();
        let edges = self.edges.iter().map(|&(a, b)| (VertexId(new_id[a]), VertexId(new_id[b])));
        let mut g = FlowGraph::from_parts(vertices, edges);
        g.diagnostics = self.diagnostics;
        g
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::infer::infer_types;
    use crate::resolve::{points_to, resolve_names};
    use crate::syntax::parse;

    const INTRO: &str = "\
extern succ: Function([*], *)

def f(x, y):
    u = x
    z: Bool = y
    return if z then succ(x) else succ(u)

f(succ(1), true)
";

    fn graph(src: &str) -> FlowGraph {
        let r = resolve_names(&parse("t.spy", src, &BTreeMap::new()).unwrap()).unwrap();
        let cm = points_to(&r);
        let t = infer_types(&r, &cm);
        build_graph(&r, &cm, &t)
    }

    fn named(g: &FlowGraph, kind: VertexKind, name: &str) -> VertexId {
        let found: Vec<_> = g.vertices().iter().filter(|v| v.kind == kind && v.name == name).collect();
        assert_eq!(found.len(), 1, "{kind:?} {name}");
        found[0].id
    }

    #[test]
    fn intro_edges() {
        let g = graph(INTRO);
        use VertexKind::*;
        let e = |a: VertexId, b: VertexId| assert!(g.has_edge(a, b), "{} -> {}", g.vertex(a).label(), g.vertex(b).label());
        let (x, y, u, z) = (named(&g, Param, "x"), named(&g, Param, "y"), named(&g, Var, "u"), named(&g, Var, "z"));
        let (s1, sx, su) = (named(&g, Expr, "succ(1)"), named(&g, Expr, "succ(x)"), named(&g, Expr, "succ(u)"));
        let cond = named(&g, Expr, "if z then succ(x) else succ(u)");
        let ret = named(&g, ReturnOf, "f");
        e(s1, x);
        e(named(&g, Literal, "true"), y);
        e(x, u);
        e(y, z);
        e(sx, cond);
        e(su, cond);
        e(cond, ret);
        for v in [s1, sx, su] {
            assert!(g.predecessors(v).is_empty());
        }
        assert_eq!(g.vertex(y).inferred, Type::Bool);
        assert_eq!(g.vertex(z).given, Type::Bool);
    }

    #[test]
    fn empty_program() {
        let g = graph("");
        assert!(g.is_empty());
        assert!(g.edges().is_empty());
    }

    #[test]
    fn literal_into_var() {
        let g = graph("x: * = 1");
        assert_eq!(g.len(), 2);
        let one = named(&g, VertexKind::Literal, "1");
        assert_eq!(g.vertex(one).given, Type::Int);
        assert_eq!(g.edges(), &[(one, named(&g, VertexKind::Var, "x"))]);
    }

    #[test]
    fn array_literals_and_self_loops() {
        let g = graph("a = [true, 2]\na = a\nb = []\n");
        let lit = named(&g, VertexKind::Expr, "[true, 2]");
        assert_eq!(g.vertex(lit).given, Type::array(Type::Unknown));
        assert_eq!(g.predecessors(lit).len(), 2);
        assert_eq!(g.vertex(named(&g, VertexKind::Expr, "[]")).given, Type::array(Type::Unknown));
        let a = named(&g, VertexKind::Var, "a");
        assert!(!g.has_edge(a, a));
    }

    #[test]
    fn edge_toggles() {
        let src = "c = true\nx = if c then 1 else 2\ny = x + 1\n";
        let r = resolve_names(&parse("t", src, &BTreeMap::new()).unwrap()).unwrap();
        let cm = points_to(&r);
        let t = infer_types(&r, &cm);
        let g = build_graph_with(&r, &cm, &t, EdgeRules { operand_edges: false, if_condition_edge: true });
        let c = named(&g, VertexKind::Var, "c");
        let cond = named(&g, VertexKind::Expr, "if c then 1 else 2");
        assert!(g.has_edge(c, cond));
        let sum = named(&g, VertexKind::Expr, "x + 1");
        assert!(g.predecessors(sum).is_empty());
    }

    #[test]
    fn arity_mismatch_is_diagnosed() {
        let g = graph("def f(a, b):\n    return a\nf(1)\n");
        assert_eq!(g.diagnostics.len(), 1);
        assert_eq!((g.diagnostics[0].expected, g.diagnostics[0].found), (2, 1));
        let a = g.vertices().iter().find(|v| v.kind == VertexKind::Param && v.name == "a").unwrap().id;
        assert_eq!(g.predecessors(a).len(), 1);
    }

    #[test]
    fn name_as_value() {
        let g = graph("def f(a):\n    return a\ne = f\n");
        assert!(g.has_edge(named(&g, VertexKind::FunctionName, "f"), named(&g, VertexKind::Var, "e")));
        let fv = g.vertex(named(&g, VertexKind::FunctionName, "f"));
        assert_eq!(fv.given, Type::function(vec![Type::Unknown], Type::Unknown));
    }

    #[test]
    fn csr_agrees_with_edges() {
        let g = graph(INTRO);
        let mut from_csr = Vec::new();
        for v in g.vertices() {
            for s in g.successors(v.id) {
                from_csr.push((v.id, *s));
                assert!(g.predecessors(*s).contains(&v.id));
            }
        }
        assert_eq!(from_csr, g.edges());
        let dot = g.to_dot();
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("param:y:*/Bool"));
    }
}
