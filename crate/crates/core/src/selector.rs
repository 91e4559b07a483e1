//! Annotation selection: an inferred annotation is kept only when every
//! closest source reaching its site has a fully concrete given type.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::flowgraph::{FlowGraph, VertexId};
use crate::resolve::Site;
use crate::syntax::Type;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceClass {
    /// Given type has no `*`.
    CleanSource,
    /// No incoming edge and a given type containing `*`.
    DirtySource,
    Interior,
}

impl SourceClass {
    pub fn is_source(self) -> bool {
        self != SourceClass::Interior
    }
}

/// Sites mapped to the annotation to write there.
pub type AnnotationSet = BTreeMap<Site, Type>;

pub fn classify(g: &FlowGraph, v: VertexId) -> SourceClass {
    if !g.is_open(v) {
        SourceClass::CleanSource
    } else if g.is_root(v) {
        SourceClass::DirtySource
    } else {
        SourceClass::Interior
    }
}

pub fn classes(g: &FlowGraph) -> Vec<SourceClass> {
    g.vertices().iter().map(|v| classify(g, v.id)).collect()
}

/// Variable, parameter and return vertices whose given type contains `*`.
pub fn candidates(g: &FlowGraph) -> Vec<VertexId> {
    (0..g.len() as u32).map(VertexId).filter(|v| g.is_candidate(*v)).collect()
}

/// Sources reaching `v` through paths whose interior vertices are all
/// non-sources. Reverse traversal that stops at sources.
pub fn closest_sources(g: &FlowGraph, v: VertexId) -> BTreeSet<VertexId> {
    let mut found = BTreeSet::new();
    let mut visited = vec![false; g.len()];
    visited[v.index()] = true;
    let mut stack = vec![v];
    while let Some(cur) = stack.pop() {
        for &w in g.predecessors(cur) {
            if visited[w.index()] {
                continue;
            }
            visited[w.index()] = true;
            if classify(g, w).is_source() {
                found.insert(w);
            } else {
                stack.push(w);
            }
        }
    }
    found
}

/// Vertices reachable from a dirty source along an edge whose tail is the
/// source itself or a tainted interior vertex.
///
/// Sweeps vertices in order, expanding each dirty source and each tainted
/// interior vertex once; a vertex tainted after the sweep has passed it is
/// expanded from a stack instead. Vertices are sorted by position, so most
/// edges point forward and the sweep stays sequential.
pub fn taint(g: &FlowGraph) -> Vec<bool> {
    let n = g.len();
    let mut tainted = vec![false; n];
    let mut stack = Vec::new();
    for i in 0..n {
        let v = VertexId(i as u32);
        let expand = match classify(g, v) {
            SourceClass::DirtySource => true,
            SourceClass::Interior => tainted[i],
            SourceClass::CleanSource => false,
        };
        if !expand {
            continue;
        }
        stack.push(v);
        while let Some(cur) = stack.pop() {
            for &w in g.successors(cur) {
                if !tainted[w.index()] {
                    tainted[w.index()] = true;
                    if w.index() < i && classify(g, w) == SourceClass::Interior {
                        stack.push(w);
                    }
                }
            }
        }
    }
    tainted
}

/// Candidate vertices accepted by the selection rule, before dropping
/// annotations that would change nothing.
pub fn selected_vertices(g: &FlowGraph) -> Vec<VertexId> {
    let tainted = taint(g);
    (0..g.len() as u32).map(VertexId).filter(|v| g.is_candidate(*v) && !tainted[v.index()]).collect()
}

pub fn select(g: &FlowGraph) -> AnnotationSet {
    selected_vertices(g)
        .into_iter()
        .map(|id| g.vertex(id))
        .filter(|v| v.inferred != v.given)
        .filter_map(|v| Some((v.site()?, v.inferred.clone())))
        .collect()
}
