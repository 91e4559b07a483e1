//! End-to-end wiring: load, analyze, build variants, run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::flowgraph::{build_graph_with, EdgeRules, FlowGraph};
use crate::infer::{infer_types, TypeTable};
use crate::resolve::{points_to, resolve_names, CalleeMap, ResolveError, Resolved};
use crate::runtime::{elaborate, evaluate, EvalOptions, Evaluation, StaticTypeError};
use crate::selector::{select, AnnotationSet};
use crate::syntax::{parse, parse_prelude, ParseError, Program, Type};
use crate::transform::{annotate, fast_slow, TransformError, VariantKind};

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("name resolution error: {0}")]
    Resolve(#[from] ResolveError),
    #[error("{0}")]
    StaticType(#[from] StaticTypeError),
    #[error("{0}")]
    Transform(#[from] TransformError),
}

impl Error {
    /// True for errors in the analyzed program rather than in the tool's
    /// environment.
    pub fn is_program_error(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}

pub fn read_prelude(path: &Path) -> Result<BTreeMap<String, Type>, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    Ok(parse_prelude(&path.display().to_string(), &text)?)
}

pub fn read_program(path: &Path, prelude: &BTreeMap<String, Type>) -> Result<Program, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    Ok(parse(&name, &text, prelude)?)
}

/// Every static analysis result for one program.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub resolved: Resolved,
    pub callees: CalleeMap,
    pub types: TypeTable,
    pub graph: FlowGraph,
}

impl Analysis {
    pub fn new(program: &Program) -> Result<Analysis, Error> {
        Analysis::with_rules(program, EdgeRules::default())
    }

    pub fn with_rules(program: &Program, rules: EdgeRules) -> Result<Analysis, Error> {
        let resolved = resolve_names(program)?;
        let callees = points_to(&resolved);
        let types = infer_types(&resolved, &callees);
        let graph = build_graph_with(&resolved, &callees, &types, rules);
        Ok(Analysis { resolved, callees, types, graph })
    }

    /// Annotations a variant appends.
    pub fn annotations(&self, kind: VariantKind) -> AnnotationSet {
        match kind {
            VariantKind::Given => AnnotationSet::new(),
            VariantKind::Infer => self.types.refined_sites(&self.resolved),
            VariantKind::Chosen => select(&self.graph),
        }
    }

    pub fn variant(&self, kind: VariantKind, fast: bool) -> Result<Program, Error> {
        self.with_annotations(&self.annotations(kind), fast)
    }

    pub fn with_annotations(&self, sites: &AnnotationSet, fast: bool) -> Result<Program, Error> {
        Ok(if fast { fast_slow(&self.resolved, sites)? } else { annotate(&self.resolved, sites)? })
    }
}

/// Resolves, elaborates and evaluates a program.
pub fn run_program(program: &Program, options: &EvalOptions) -> Result<Evaluation, Error> {
    let resolved = resolve_names(program)?;
    let cp = elaborate(&resolved)?;
    Ok(evaluate(&cp, options))
}
