use std::fmt;

use serde::{Serialize, Serializer};

/// A gradual type. `Unknown` is the dynamic type, written `*`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Unknown,
    Bool,
    Int,
    Array(Box<Type>),
    Function(Vec<Type>, Box<Type>),
}

impl Type {
    pub fn array(elem: Type) -> Type {
        Type::Array(Box::new(elem))
    }

    pub fn function(params: Vec<Type>, ret: Type) -> Type {
        Type::Function(params, Box::new(ret))
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Type::Unknown)
    }

    /// True when `*` occurs anywhere inside the type.
    pub fn contains_unknown(&self) -> bool {
        match self {
            Type::Unknown => true,
            Type::Bool | Type::Int => false,
            Type::Array(elem) => elem.contains_unknown(),
            Type::Function(params, ret) => {
                params.iter().any(Type::contains_unknown) || ret.contains_unknown()
            }
        }
    }

    /// Gradual consistency: `*` is consistent with everything, constructors
    /// must match componentwise.
    pub fn is_consistent_with(&self, other: &Type) -> bool {
        match (self, other) {
            (Type::Unknown, _) | (_, Type::Unknown) => true,
            (Type::Int, Type::Int) | (Type::Bool, Type::Bool) => true,
            (Type::Array(a), Type::Array(b)) => a.is_consistent_with(b),
            (Type::Function(pa, ra), Type::Function(pb, rb)) => {
                pa.len() == pb.len()
                    && pa.iter().zip(pb).all(|(a, b)| a.is_consistent_with(b))
                    && ra.is_consistent_with(rb)
            }
            _ => false,
        }
    }

    /// Static subtyping used for fast/slow dispatch. Every type is a subtype
    /// of `*`; arrays are invariant; functions are contravariant in their
    /// parameters and covariant in their result.
    pub fn is_subtype_of(&self, sup: &Type) -> bool {
        match (self, sup) {
            (_, Type::Unknown) => true,
            (Type::Int, Type::Int) | (Type::Bool, Type::Bool) => true,
            (Type::Array(a), Type::Array(b)) => a == b,
            (Type::Function(pa, ra), Type::Function(pb, rb)) => {
                pa.len() == pb.len()
                    && pb.iter().zip(pa).all(|(b, a)| b.is_subtype_of(a))
                    && ra.is_subtype_of(rb)
            }
            _ => false,
        }
    }

    /// True when `self` can be obtained from `given` by replacing zero or
    /// more occurrences of `*` with arbitrary types.
    pub fn refines(&self, given: &Type) -> bool {
        match (given, self) {
            (Type::Unknown, _) => true,
            (Type::Int, Type::Int) | (Type::Bool, Type::Bool) => true,
            (Type::Array(g), Type::Array(s)) => s.refines(g),
            (Type::Function(gp, gr), Type::Function(sp, sr)) => {
                gp.len() == sp.len()
                    && sp.iter().zip(gp).all(|(s, g)| s.refines(g))
                    && sr.refines(gr)
            }
            _ => false,
        }
    }

    /// Nesting depth; base types have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Type::Unknown | Type::Bool | Type::Int => 0,
            Type::Array(elem) => 1 + elem.depth(),
            Type::Function(params, ret) => {
                1 + params.iter().map(Type::depth).chain([ret.depth()]).max().unwrap_or(0)
            }
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Unknown => f.write_str("*"),
            Type::Bool => f.write_str("Bool"),
            Type::Int => f.write_str("Int"),
            Type::Array(elem) => write!(f, "Array({elem})"),
            Type::Function(params, ret) => {
                f.write_str("Function([")?;
                for (i, p) in params.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, "], {ret})")
            }
        }
    }
}

impl Serialize for Type {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contains_unknown_cases() {
        assert!(Type::array(Type::Unknown).contains_unknown());
        assert!(Type::function(vec![Type::Unknown], Type::Int).contains_unknown());
        assert!(Type::function(vec![Type::Int], Type::Unknown).contains_unknown());
        assert!(!Type::Int.contains_unknown());
        assert!(!Type::function(vec![Type::array(Type::Bool)], Type::Int).contains_unknown());
    }

    #[test]
    fn consistency() {
        assert!(Type::Unknown.is_consistent_with(&Type::Int));
        assert!(Type::array(Type::Unknown).is_consistent_with(&Type::array(Type::Int)));
        assert!(!Type::Bool.is_consistent_with(&Type::Int));
        assert!(!Type::function(vec![Type::Int], Type::Int)
            .is_consistent_with(&Type::function(vec![], Type::Int)));
    }

    #[test]
    fn subtyping() {
        assert!(Type::Int.is_subtype_of(&Type::Unknown));
        assert!(!Type::Unknown.is_subtype_of(&Type::Int));
        assert!(!Type::array(Type::Int).is_subtype_of(&Type::array(Type::Unknown)));
        let wide = Type::function(vec![Type::Unknown], Type::Int);
        let narrow = Type::function(vec![Type::Int], Type::Unknown);
        assert!(wide.is_subtype_of(&narrow));
        assert!(!narrow.is_subtype_of(&wide));
    }

    #[test]
    fn refinement() {
        let given = Type::function(vec![Type::Unknown, Type::Bool], Type::Unknown);
        let inferred = Type::function(vec![Type::Int, Type::Bool], Type::array(Type::Int));
        assert!(inferred.refines(&given));
        assert!(!given.refines(&inferred));
        assert!(!Type::Int.refines(&Type::Bool));
    }

    #[test]
    fn display() {
        let t = Type::function(vec![Type::Unknown, Type::array(Type::Int)], Type::Bool);
        assert_eq!(t.to_string(), "Function([*, Array(Int)], Bool)");
    }
}
