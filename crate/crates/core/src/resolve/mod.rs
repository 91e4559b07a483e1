//! Static name resolution and the points-to analysis that discovers the
//! possible callees of each call site.

mod names;
mod points_to;

use thiserror::Error;

pub use names::{resolve_names, Binding, BindingId, BindingKind, Resolved, Scope, ScopeId, Site};
pub use points_to::{points_to, CalleeMap};

use crate::syntax::{Span, Type};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ResolveError {
    #[error("{span}: unbound identifier `{name}`")]
    UnboundIdentifier { name: String, span: Span },
    #[error("{span}: `{name}` is annotated `{second}` here but `{first}` elsewhere")]
    ConflictingAnnotation { name: String, span: Span, first: Type, second: Type },
    #[error("{span}: `{name}` is already bound in this scope")]
    ConflictingBinding { name: String, span: Span },
}

impl ResolveError {
    pub fn span(&self) -> &Span {
        match self {
            ResolveError::UnboundIdentifier { span, .. }
            | ResolveError::ConflictingAnnotation { span, .. }
            | ResolveError::ConflictingBinding { span, .. } => span,
        }
    }
}
