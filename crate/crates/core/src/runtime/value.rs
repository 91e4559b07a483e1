use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use serde::{Serialize, Serializer};

use crate::resolve::{BindingId, ScopeId};
use crate::syntax::{Span, Type};

pub type ArrayRef = Rc<RefCell<Vec<Value>>>;

#[derive(Debug, Clone)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Array(ArrayRef),
    Closure(Rc<Closure>),
    Extern(BindingId),
    Proxy(Rc<Proxy>),
}

#[derive(Debug)]
pub struct Closure {
    pub func: BindingId,
    pub env: Rc<Frame>,
}

/// A value viewed at type `to` while its own type is `from`. Accesses are
/// checked; failures blame the cast that created the proxy.
#[derive(Debug)]
pub struct Proxy {
    pub inner: Value,
    pub from: Type,
    pub to: Type,
    pub blame: Span,
}

#[derive(Debug)]
pub struct Frame {
    pub scope: ScopeId,
    pub slots: RefCell<Vec<Option<Value>>>,
    pub parent: Option<Rc<Frame>>,
}

impl Frame {
    pub fn new(scope: ScopeId, size: usize, parent: Option<Rc<Frame>>) -> Rc<Frame> {
        Rc::new(Frame { scope, slots: RefCell::new(vec![None; size]), parent })
    }
}

/// A plain-data copy of a final value, comparable across runs and variants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Snapshot {
    Int(i64),
    Bool(bool),
    Array(Vec<Snapshot>),
    /// Identified by the definition's position, so duplicated functions
    /// compare equal to their originals.
    Function(String),
    /// An array that contains itself.
    Cycle,
}

impl fmt::Display for Snapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Snapshot::Int(n) => write!(f, "{n}"),
            Snapshot::Bool(b) => write!(f, "{b}"),
            Snapshot::Array(items) => {
                f.write_str("[")?;
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str("]")
            }
            Snapshot::Function(name) => write!(f, "<function {name}>"),
            Snapshot::Cycle => f.write_str("[...]"),
        }
    }
}

impl Serialize for Snapshot {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Snapshot::Int(n) => s.serialize_i64(*n),
            Snapshot::Bool(b) => s.serialize_bool(*b),
            Snapshot::Array(items) => items.serialize(s),
            Snapshot::Function(_) | Snapshot::Cycle => s.collect_str(self),
        }
    }
}
