use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;

use super::ResolveError;
use crate::syntax::{Def, Expr, ExprKind, NodeId, Program, Span, Stmt, StmtKind, Type};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct BindingId(pub u32);

impl BindingId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BindingKind {
    LocalVar,
    Parameter,
    FunctionName,
    Extern,
}

/// A lexical scope: the module body or one function body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScopeId(pub u32);

impl ScopeId {
    pub const MODULE: ScopeId = ScopeId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
pub struct Binding {
    pub id: BindingId,
    pub name: String,
    pub kind: BindingKind,
    pub decl_span: Span,
    /// Declared type: the annotation for variables and parameters, the
    /// annotated signature for functions, the prelude type for externs.
    pub declared: Type,
    /// Owning scope; `None` for externs.
    pub scope: Option<ScopeId>,
    /// Slot inside the owning scope's frame.
    pub slot: usize,
}

#[derive(Debug, Clone)]
pub struct Scope {
    pub parent: Option<ScopeId>,
    /// The function whose body this scope is; `None` for the module.
    pub function: Option<BindingId>,
    pub slots: Vec<BindingId>,
}

/// Where a type annotation can be written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    Var(BindingId),
    Param(BindingId),
    /// Return type of the function bound by this id.
    Return(BindingId),
}

impl Site {
    pub fn binding(self) -> BindingId {
        match self {
            Site::Var(b) | Site::Param(b) | Site::Return(b) => b,
        }
    }
}

/// A program together with the results of static name resolution.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub program: Program,
    bindings: Vec<Binding>,
    scopes: Vec<Scope>,
    /// Indexed by node id: the binding a `Var` expression refers to.
    var_refs: Vec<Option<BindingId>>,
    /// Assign statement id to the assigned binding.
    assign_targets: HashMap<NodeId, BindingId>,
    /// Def statement id to its function-name binding.
    def_bindings: HashMap<NodeId, BindingId>,
    /// Function binding to its parameter bindings, body scope and statement path.
    functions: BTreeMap<BindingId, FunctionInfo>,
    /// Return statement id to the function it returns from.
    return_owner: HashMap<NodeId, BindingId>,
}

#[derive(Debug, Clone)]
struct FunctionInfo {
    params: Vec<BindingId>,
    scope: ScopeId,
    stmt: NodeId,
    /// Indices from `program.stmts` down through nested def bodies.
    path: Vec<usize>,
}

impl Resolved {
    pub fn bindings(&self) -> &[Binding] {
        &self.bindings
    }

    pub fn binding(&self, id: BindingId) -> &Binding {
        &self.bindings[id.index()]
    }

    pub fn scopes(&self) -> &[Scope] {
        &self.scopes
    }

    pub fn scope(&self, id: ScopeId) -> &Scope {
        &self.scopes[id.index()]
    }

    pub fn node_count(&self) -> usize {
        self.var_refs.len()
    }

    /// The binding referenced by a `Var` expression.
    pub fn var_binding(&self, expr: NodeId) -> Option<BindingId> {
        self.var_refs.get(expr.index()).copied().flatten()
    }

    pub fn assign_binding(&self, stmt: NodeId) -> Option<BindingId> {
        self.assign_targets.get(&stmt).copied()
    }

    pub fn def_binding(&self, stmt: NodeId) -> Option<BindingId> {
        self.def_bindings.get(&stmt).copied()
    }

    pub fn return_owner(&self, stmt: NodeId) -> Option<BindingId> {
        self.return_owner.get(&stmt).copied()
    }

    /// Function bindings, in id order.
    pub fn functions(&self) -> impl Iterator<Item = BindingId> + '_ {
        self.functions.keys().copied()
    }

    pub fn params(&self, function: BindingId) -> &[BindingId] {
        self.functions.get(&function).map_or(&[], |f| &f.params)
    }

    pub fn function_scope(&self, function: BindingId) -> Option<ScopeId> {
        self.functions.get(&function).map(|f| f.scope)
    }

    pub fn function_stmt(&self, function: BindingId) -> Option<NodeId> {
        self.functions.get(&function).map(|f| f.stmt)
    }

    pub fn def(&self, function: BindingId) -> Option<&Def> {
        let info = self.functions.get(&function)?;
        let mut stmts = &self.program.stmts;
        let mut found = None;
        for &i in &info.path {
            let StmtKind::Def(def) = &stmts[i].kind else { return None };
            found = Some(def);
            stmts = &def.body;
        }
        found
    }

    /// Declared type of an annotation site.
    pub fn site_type(&self, site: Site) -> Type {
        match site {
            Site::Var(b) | Site::Param(b) => self.binding(b).declared.clone(),
            Site::Return(f) => self.def(f).map_or(Type::Unknown, |d| d.ret.clone()),
        }
    }

    /// Every annotation site in the program, in binding order.
    pub fn sites(&self) -> Vec<Site> {
        let mut out = Vec::new();
        for b in &self.bindings {
            match b.kind {
                BindingKind::LocalVar => out.push(Site::Var(b.id)),
                BindingKind::Parameter => out.push(Site::Param(b.id)),
                BindingKind::FunctionName => out.push(Site::Return(b.id)),
                BindingKind::Extern => {}
            }
        }
        out
    }

    pub fn is_valid_site(&self, site: Site) -> bool {
        let Some(b) = self.bindings.get(site.binding().index()) else { return false };
        matches!(
            (site, b.kind),
            (Site::Var(_), BindingKind::LocalVar)
                | (Site::Param(_), BindingKind::Parameter)
                | (Site::Return(_), BindingKind::FunctionName)
        )
    }

    /// Human-readable site label such as `param y` or `return f`.
    pub fn site_label(&self, site: Site) -> String {
        let b = self.binding(site.binding());
        let kind = match site {
            Site::Var(_) => "var",
            Site::Param(_) => "param",
            Site::Return(_) => "return",
        };
        let base = format!("{kind} {}", b.name);
        let ambiguous = self
            .sites()
            .into_iter()
            .filter(|s| *s != site && std::mem::discriminant(s) == std::mem::discriminant(&site))
            .any(|s| self.binding(s.binding()).name == b.name);
        if ambiguous {
            format!("{base}@{}", b.decl_span)
        } else {
            base
        }
    }

    /// Inverse of [`Resolved::site_label`].
    pub fn find_site(&self, label: &str) -> Option<Site> {
        self.sites().into_iter().find(|s| self.site_label(*s) == label)
    }
}

impl fmt::Display for BindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BindingKind::LocalVar => "local-var",
            BindingKind::Parameter => "parameter",
            BindingKind::FunctionName => "function-name",
            BindingKind::Extern => "extern",
        })
    }
}

/// Binds every identifier occurrence to its declaration. Scoping follows
/// Python: any name assigned or defined in a function body is local to that
/// whole body; other names resolve through enclosing bodies, then externs.
pub fn resolve_names(program: &Program) -> Result<Resolved, ResolveError> {
    let node_count = program.node_count();
    let mut r = Resolver {
        bindings: Vec::new(),
        scopes: Vec::new(),
        names: Vec::new(),
        externs: BTreeMap::new(),
        var_refs: vec![None; node_count],
        assign_targets: HashMap::new(),
        def_bindings: HashMap::new(),
        functions: BTreeMap::new(),
        return_owner: HashMap::new(),
    };
    for (name, ty) in &program.prelude {
        let id = BindingId(r.bindings.len() as u32);
        r.bindings.push(Binding {
            id,
            name: name.clone(),
            kind: BindingKind::Extern,
            decl_span: crate::syntax::Span::synthetic(),
            declared: ty.clone(),
            scope: None,
            slot: 0,
        });
        r.externs.insert(name.clone(), id);
    }
    let module = r.declare_scope(None, None, &[], &program.stmts, &[])?;
    r.resolve_block(module, &program.stmts, &[])?;
    Ok(Resolved {
        program: program.clone(),
        bindings: r.bindings,
        scopes: r.scopes,
        var_refs: r.var_refs,
        assign_targets: r.assign_targets,
        def_bindings: r.def_bindings,
        functions: r.functions,
        return_owner: r.return_owner,
    })
}

struct Resolver {
    bindings: Vec<Binding>,
    scopes: Vec<Scope>,
    /// Per scope: local name to binding.
    names: Vec<HashMap<String, BindingId>>,
    externs: BTreeMap<String, BindingId>,
    var_refs: Vec<Option<BindingId>>,
    assign_targets: HashMap<NodeId, BindingId>,
    def_bindings: HashMap<NodeId, BindingId>,
    functions: BTreeMap<BindingId, FunctionInfo>,
    return_owner: HashMap<NodeId, BindingId>,
}

impl Resolver {
    fn new_binding(&mut self, scope: ScopeId, name: &str, kind: BindingKind, span: &Span, declared: Type) -> BindingId {
        let id = BindingId(self.bindings.len() as u32);
        let slot = self.scopes[scope.index()].slots.len();
        self.scopes[scope.index()].slots.push(id);
        self.names[scope.index()].insert(name.to_string(), id);
        self.bindings.push(Binding {
            id,
            name: name.to_string(),
            kind,
            decl_span: span.clone(),
            declared,
            scope: Some(scope),
            slot,
        });
        id
    }

    /// Creates a scope and its local bindings: parameters, then defs and
    /// assignment targets in source order.
    fn declare_scope(
        &mut self,
        parent: Option<ScopeId>,
        function: Option<BindingId>,
        params: &[crate::syntax::Param],
        body: &[Stmt],
        path: &[usize],
    ) -> Result<ScopeId, ResolveError> {
        let scope = ScopeId(self.scopes.len() as u32);
        self.scopes.push(Scope { parent, function, slots: Vec::new() });
        self.names.push(HashMap::new());
        let mut param_ids = Vec::new();
        for p in params {
            if self.names[scope.index()].contains_key(&p.name) {
                return Err(ResolveError::ConflictingBinding { name: p.name.clone(), span: p.span.clone() });
            }
            param_ids.push(self.new_binding(scope, &p.name, BindingKind::Parameter, &p.span, p.annot.clone()));
        }
        if let Some(f) = function {
            if let Some(info) = self.functions.get_mut(&f) {
                info.params = param_ids;
                info.scope = scope;
            }
        }
        for (i, stmt) in body.iter().enumerate() {
            match &stmt.kind {
                StmtKind::Def(def) => {
                    if self.names[scope.index()].contains_key(&def.name) {
                        return Err(ResolveError::ConflictingBinding {
                            name: def.name.clone(),
                            span: def.name_span.clone(),
                        });
                    }
                    let id = self.new_binding(scope, &def.name, BindingKind::FunctionName, &def.name_span, def.signature());
                    self.def_bindings.insert(stmt.id, id);
                    let mut def_path = path.to_vec();
                    def_path.push(i);
                    self.functions.insert(
                        id,
                        FunctionInfo { params: Vec::new(), scope, stmt: stmt.id, path: def_path },
                    );
                }
                StmtKind::Assign { target, target_span, annot, .. } => {
                    match self.names[scope.index()].get(target).copied() {
                        Some(existing) => {
                            let b = &self.bindings[existing.index()];
                            if b.kind == BindingKind::FunctionName {
                                return Err(ResolveError::ConflictingBinding {
                                    name: target.clone(),
                                    span: target_span.clone(),
                                });
                            }
                            if b.declared != *annot {
                                return Err(ResolveError::ConflictingAnnotation {
                                    name: target.clone(),
                                    span: target_span.clone(),
                                    first: b.declared.clone(),
                                    second: annot.clone(),
                                });
                            }
                            self.assign_targets.insert(stmt.id, existing);
                        }
                        None => {
                            let id = self.new_binding(scope, target, BindingKind::LocalVar, target_span, annot.clone());
                            self.assign_targets.insert(stmt.id, id);
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(scope)
    }

    fn resolve_block(&mut self, scope: ScopeId, body: &[Stmt], path: &[usize]) -> Result<(), ResolveError> {
        let owner = self.scopes[scope.index()].function;
        for (i, stmt) in body.iter().enumerate() {
            if let StmtKind::Return(_) = stmt.kind {
                if let Some(f) = owner {
                    self.return_owner.insert(stmt.id, f);
                }
            }
            for e in stmt.exprs() {
                self.resolve_expr(scope, e)?;
            }
            if let StmtKind::Def(def) = &stmt.kind {
                let f = self.def_bindings[&stmt.id];
                let mut def_path = path.to_vec();
                def_path.push(i);
                let inner = self.declare_scope(Some(scope), Some(f), &def.params, &def.body, &def_path)?;
                self.resolve_block(inner, &def.body, &def_path)?;
            }
        }
        Ok(())
    }

    fn resolve_expr(&mut self, scope: ScopeId, expr: &Expr) -> Result<(), ResolveError> {
        let mut result = Ok(());
        expr.walk(&mut |e| {
            if result.is_err() {
                return;
            }
            if let ExprKind::Var(name) = &e.kind {
                match self.lookup(scope, name) {
                    Some(b) => self.var_refs[e.id.index()] = Some(b),
                    None => {
                        result = Err(ResolveError::UnboundIdentifier { name: name.clone(), span: e.span.clone() })
                    }
                }
            }
        });
        result
    }

    fn lookup(&self, scope: ScopeId, name: &str) -> Option<BindingId> {
        let mut cur = Some(scope);
        while let Some(s) = cur {
            if let Some(b) = self.names[s.index()].get(name) {
                return Some(*b);
            }
            cur = self.scopes[s.index()].parent;
        }
        self.externs.get(name).copied()
    }
}
