#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use typepycker::flowgraph::{FlowGraph, Origin, Vertex, VertexId, VertexKind};
use typepycker::pipeline::read_program;
use typepycker::resolve::resolve_names;
use typepycker::runtime::elaborate;
use typepycker::syntax::{parse, Program, Span, Type};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

pub fn corpus() -> Vec<(String, Program)> {
    typepycker::bench::corpus_files(&corpus_dir())
        .unwrap()
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let program = read_program(&p, &BTreeMap::new()).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, program)
        })
        .collect()
}

pub fn corpus_file(name: &str) -> Program {
    read_program(&corpus_dir().join(name), &BTreeMap::new()).unwrap()
}

pub fn program(src: &str) -> Program {
    parse("t.spy", src, &BTreeMap::new()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_type(rng: &mut impl Rng, depth: u32) -> Type {
    let leaf = depth == 0 || rng.gen_bool(0.5);
    if leaf {
        return [Type::Unknown, Type::Int, Type::Bool][rng.gen_range(0..3)].clone();
    }
    if rng.gen_bool(0.5) {
        Type::array(random_type(rng, depth - 1))
    } else {
        let n = rng.gen_range(0..3);
        let params = (0..n).map(|_| random_type(rng, depth - 1)).collect();
        Type::function(params, random_type(rng, depth - 1))
    }
}

/// A random type that `given` refines to: each `*` position is either kept
/// or replaced by a random type.
pub fn random_refinement(rng: &mut impl Rng, given: &Type) -> Type {
    match given {
        Type::Unknown if rng.gen_bool(0.6) => random_type(rng, 1),
        Type::Array(e) => Type::array(random_refinement(rng, e)),
        Type::Function(ps, r) => {
            Type::function(ps.iter().map(|p| random_refinement(rng, p)).collect(), random_refinement(rng, r))
        }
        t => t.clone(),
    }
}

pub struct GenConfig {
    /// Put random annotations on parameters, assignments and returns.
    pub annotate: bool,
    pub max_defs: usize,
    pub max_top: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { annotate: false, max_defs: 3, max_top: 5 }
    }
}

/// Random source text over the whole grammar. Names always resolve; the
/// program may still fail statically or at run time.
pub struct ProgramGen<'c> {
    rng: ChaCha8Rng,
    cfg: &'c GenConfig,
    defs: Vec<(String, usize)>,
    out: String,
    fresh: usize,
}

const EXTERNS: &str = "extern succ: Function([*], *)\nextern lt: Function([Int, Int], Bool)\n";

impl<'c> ProgramGen<'c> {
    pub fn new(seed: u64, cfg: &'c GenConfig) -> Self {
        ProgramGen { rng: rng(seed), cfg, defs: Vec::new(), out: String::new(), fresh: 0 }
    }

    pub fn source(mut self) -> String {
        self.out.push_str(EXTERNS);
        let n_defs = self.rng.gen_range(1..=self.cfg.max_defs);
        for i in 0..n_defs {
            let arity = self.rng.gen_range(0..=2);
            self.defs.push((format!("f{i}"), arity));
        }
        for i in 0..n_defs {
            let (name, arity) = self.defs[i].clone();
            self.def(&name, arity, 0);
        }
        let mut scope: Vec<String> = Vec::new();
        for _ in 0..self.rng.gen_range(1..=self.cfg.max_top) {
            let stmt = self.simple(&mut scope, 0);
            self.out.push_str(&stmt);
            self.out.push('\n');
        }
        let last = self.expr(&scope, 3);
        self.out.push_str(&last);
        self.out.push('\n');
        self.out
    }

    fn annot(&mut self) -> String {
        if self.cfg.annotate && self.rng.gen_bool(0.3) {
            format!(": {}", random_type(&mut self.rng, 1))
        } else {
            String::new()
        }
    }

    fn def(&mut self, name: &str, arity: usize, indent: usize) {
        let pad = " ".repeat(indent);
        let params: Vec<String> = (0..arity).map(|i| format!("{name}_p{i}")).collect();
        let decls: Vec<String> = params.iter().map(|p| format!("{p}{}", self.annot())).collect();
        let ret = if self.cfg.annotate && self.rng.gen_bool(0.2) {
            format!(" -> {}", random_type(&mut self.rng, 1))
        } else {
            String::new()
        };
        self.out.push_str(&format!("{pad}def {name}({}){ret}:\n", decls.join(", ")));
        let mut scope = params;
        let inner = indent + 4;
        if indent == 0 && self.rng.gen_bool(0.2) {
            let nested = format!("{name}_in");
            self.def(&nested, 1, inner);
            scope.push(nested);
        }
        for _ in 0..self.rng.gen_range(0..=2) {
            let stmt = self.simple(&mut scope, inner);
            self.out.push_str(&" ".repeat(inner));
            self.out.push_str(&stmt);
            self.out.push('\n');
        }
        let value = self.expr(&scope, 3);
        self.out.push_str(&format!("{}return {value}\n", " ".repeat(inner)));
    }

    fn simple(&mut self, scope: &mut Vec<String>, indent: usize) -> String {
        let _ = indent;
        match self.rng.gen_range(0..4) {
            0 | 1 => {
                let name = if !scope.is_empty() && self.rng.gen_bool(0.3) {
                    scope.choose(&mut self.rng).unwrap().clone()
                } else {
                    self.fresh += 1;
                    format!("v{}", self.fresh)
                };
                let value = self.expr(scope, 3);
                // Annotating a reused name could conflict with its earlier
                // annotation; only fresh names get one.
                let annot = if scope.contains(&name) { String::new() } else { self.annot() };
                if !scope.contains(&name) {
                    scope.push(name.clone());
                }
                format!("{name}{annot} = {value}")
            }
            2 => {
                let target = self.operand(scope, 1);
                let index = self.rng.gen_range(0..3);
                let value = self.expr(scope, 2);
                format!("{target}[{index}] = {value}")
            }
            _ => self.expr(scope, 3),
        }
    }

    fn leaf(&mut self, scope: &[String]) -> String {
        match self.rng.gen_range(0..6) {
            0 | 1 => self.rng.gen_range(0..5).to_string(),
            2 => ["true", "false"][self.rng.gen_range(0..2)].to_owned(),
            3 => self.defs.choose(&mut self.rng).unwrap().0.clone(),
            _ => match scope.choose(&mut self.rng) {
                Some(v) => v.clone(),
                None => self.rng.gen_range(0..5).to_string(),
            },
        }
    }

    pub fn expr(&mut self, scope: &[String], depth: u32) -> String {
        if depth == 0 || self.rng.gen_bool(0.3) {
            return self.leaf(scope);
        }
        let d = depth - 1;
        match self.rng.gen_range(0..6) {
            0 => format!("{} + {}", self.int_operand(scope, d), self.int_operand(scope, d)),
            1 => format!("if {} then {} else {}", self.cond(scope, d), self.expr(scope, d), self.expr(scope, d)),
            2 => {
                let n = self.rng.gen_range(0..3);
                let items: Vec<String> = (0..n).map(|_| self.expr(scope, d)).collect();
                format!("[{}]", items.join(", "))
            }
            3 => format!("{}[{}]", self.array_operand(scope, d), self.rng.gen_range(0..2)),
            _ => self.call(scope, d),
        }
    }

    fn call(&mut self, scope: &[String], d: u32) -> String {
        let (callee, arity) = match self.rng.gen_range(0..5) {
            0 => ("succ".to_owned(), 1),
            1 if !scope.is_empty() => (scope.choose(&mut self.rng).unwrap().clone(), self.rng.gen_range(0..3)),
            4 => {
                let (a, n) = self.defs.choose(&mut self.rng).unwrap().clone();
                let (b, _) = self.defs.choose(&mut self.rng).unwrap().clone();
                (format!("(if {} then {a} else {b})", self.cond(scope, 0)), n)
            }
            _ => self.defs.choose(&mut self.rng).unwrap().clone(),
        };
        let args: Vec<String> = (0..arity).map(|_| self.expr(scope, d)).collect();
        format!("{callee}({})", args.join(", "))
    }

    fn var_or(&mut self, scope: &[String], fallback: String) -> String {
        match scope.choose(&mut self.rng) {
            Some(v) if self.rng.gen_bool(0.5) => v.clone(),
            _ => fallback,
        }
    }

    fn cond(&mut self, scope: &[String], d: u32) -> String {
        match self.rng.gen_range(0..4) {
            0 => ["true", "false"][self.rng.gen_range(0..2)].to_owned(),
            1 => format!("lt({}, {})", self.int_operand(scope, d), self.int_operand(scope, d)),
            _ => {
                let b = ["true", "false"][self.rng.gen_range(0..2)].to_owned();
                self.var_or(scope, b)
            }
        }
    }

    fn int_operand(&mut self, scope: &[String], d: u32) -> String {
        let e = match self.rng.gen_range(0..5) {
            0 => self.rng.gen_range(0..5).to_string(),
            1 if d > 0 => self.call(scope, d - 1),
            2 if d > 0 => format!("{}[{}]", self.array_operand(scope, d - 1), self.rng.gen_range(0..2)),
            3 if d > 0 => self.expr(scope, d - 1),
            _ => {
                let n = self.rng.gen_range(0..5).to_string();
                self.var_or(scope, n)
            }
        };
        paren(e)
    }

    fn array_operand(&mut self, scope: &[String], d: u32) -> String {
        let e = match self.rng.gen_range(0..4) {
            0 => {
                let n = self.rng.gen_range(1..4);
                let items: Vec<String> = (0..n).map(|_| self.int_operand(scope, d.saturating_sub(1))).collect();
                format!("[{}]", items.join(", "))
            }
            1 if d > 0 => self.call(scope, d - 1),
            2 if d > 0 => self.expr(scope, d - 1),
            _ => {
                let fallback = format!("[{}]", self.rng.gen_range(0..5));
                self.var_or(scope, fallback)
            }
        };
        paren(e)
    }

    /// Operand of an index assignment target.
    fn operand(&mut self, scope: &[String], depth: u32) -> String {
        self.array_operand(scope, depth)
    }
}

fn paren(e: String) -> String {
    if e.contains(' ') {
        format!("({e})")
    } else {
        e
    }
}

pub fn random_source(seed: u64, cfg: &GenConfig) -> String {
    ProgramGen::new(seed, cfg).source()
}

/// First program from `seed` onwards that resolves and elaborates.
pub fn random_well_typed(seed: u64, cfg: &GenConfig) -> (u64, Program) {
    for s in seed.. {
        let src = random_source(s, cfg);
        let p = parse("gen.spy", &src, &BTreeMap::new()).unwrap_or_else(|e| panic!("{e}\n{src}"));
        if let Ok(r) = resolve_names(&p) {
            if elaborate(&r).is_ok() {
                return (s, p);
            }
        }
    }
    unreachable!()
}

pub fn random_graph(seed: u64, max_vertices: usize, max_edges: usize) -> FlowGraph {
    let mut rng = rng(seed);
    let n = rng.gen_range(1..=max_vertices);
    let kinds = [
        VertexKind::Var,
        VertexKind::Param,
        VertexKind::ReturnOf,
        VertexKind::Expr,
        VertexKind::Literal,
        VertexKind::FunctionName,
    ];
    let givens = [Type::Unknown, Type::Int, Type::Bool, Type::array(Type::Unknown), Type::array(Type::Int)];
    let vertices: Vec<Vertex> = (0..n)
        .map(|i| {
            let given = givens.choose(&mut rng).unwrap().clone();
            let inferred = random_refinement(&mut rng, &given);
            Vertex {
                id: VertexId(i as u32),
                kind: *kinds.choose(&mut rng).unwrap(),
                origin: Origin::Synthetic(i as u32),
                name: format!("v{i}"),
                given,
                inferred,
                span: Span::synthetic(),
            }
        })
        .collect();
    let m = rng.gen_range(0..=max_edges);
    let edges: Vec<(VertexId, VertexId)> =
        (0..m).map(|_| (VertexId(rng.gen_range(0..n) as u32), VertexId(rng.gen_range(0..n) as u32))).collect();
    FlowGraph::from_parts(vertices, edges)
}

/// Selection from the declarative rule: a candidate is kept when every
/// closest source has a `*`-free given type. Closest sources come from a
/// transitive closure whose intermediate vertices are restricted to
/// non-sources.
pub fn declarative_selection(g: &FlowGraph) -> BTreeSet<VertexId> {
    let n = g.len();
    let mut indeg = vec![0usize; n];
    for (_, b) in g.edges() {
        indeg[b.index()] += 1;
    }
    let is_source: Vec<bool> =
        g.vertices().iter().map(|v| !v.given.contains_unknown() || indeg[v.id.index()] == 0).collect();
    // reach[w][v]: a path w -> ... -> v whose interior avoids sources.
    let mut reach = vec![vec![false; n]; n];
    for (a, b) in g.edges() {
        reach[a.index()][b.index()] = true;
    }
    for k in (0..n).filter(|&k| !is_source[k]) {
        for i in 0..n {
            if reach[i][k] {
                let through = reach[k].clone();
                for (cell, &r) in reach[i].iter_mut().zip(&through) {
                    *cell |= r;
                }
            }
        }
    }
    g.vertices()
        .iter()
        .filter(|v| matches!(v.kind, VertexKind::Var | VertexKind::Param | VertexKind::ReturnOf))
        .filter(|v| v.given.contains_unknown())
        .filter(|v| {
            (0..n)
                .filter(|&w| w != v.id.index() && is_source[w] && reach[w][v.id.index()])
                .all(|w| !g.vertices()[w].given.contains_unknown())
        })
        .map(|v| v.id)
        .collect()
}
