//! Surface syntax of the language: gradual types, the AST, a parser for the
//! indentation-based concrete syntax, and a canonical printer.
//!
//! ```text
//! prog  := line*
//! line  := "extern" id ":" T | def | simple (";" simple)*
//! def   := "def" id "(" (id [":" T]),* ")" ["->" T] ":" NEWLINE INDENT line+ DEDENT
//! simple:= "return" e | id [":" T] "=" e | e "[" e "]" "=" e | e
//! e     := "if" e "then" e "else" e | post ("+" post)*
//! post  := atom ("(" e,* ")" | "[" e "]")*
//! atom  := int | "true" | "false" | id | "[" e,* "]" | "(" e ")"
//! T     := "*" | "Bool" | "Int" | "Array(" T ")" | "Function([" T,* "]," T ")"
//! ```
//!
//! An omitted annotation means `*`.

mod ast;
mod lexer;
mod parser;
mod printer;
mod types;

use thiserror::Error;

pub use ast::{for_each_child_mut, for_each_expr_mut, Def, Expr, ExprKind, NodeId, Param, Program, Span, Stmt, StmtKind};
pub use parser::{parse, parse_prelude, parse_type};
pub use printer::{print_expr, print_program};
pub use types::Type;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{span}: {message}")]
    Syntax { span: Span, message: String },
    #[error("{span}: duplicate definition of `{name}`")]
    DuplicateDef { name: String, span: Span },
}

impl ParseError {
    pub(crate) fn syntax(span: Span, message: impl Into<String>) -> ParseError {
        ParseError::Syntax { span, message: message.into() }
    }

    pub fn span(&self) -> &Span {
        match self {
            ParseError::Syntax { span, .. } | ParseError::DuplicateDef { span, .. } => span,
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    pub(crate) const INTRO: &str = "\
extern succ: Function([*], *)

def f(x, y):
    u = x
    z: Bool = y
    return if z then succ(x) else succ(u)

f(succ(1), true)
";

    fn parse_str(src: &str) -> Program {
        parse("test.spy", src, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn brackets_continue_lines() {
        let p = parse_str("def f(a,\n      b):\n    return [a,\n  b]\nxs = [\n    [1, 2],\n    [3, 4]\n]\nf(1, 2)\n");
        assert_eq!(p.stmts.len(), 3);
        assert_eq!(print_program(&p), "def f(a: *, b: *) -> *:\n    return [a, b]\n\nxs: * = [[1, 2], [3, 4]]\nf(1, 2)\n");
        assert!(parse("t.spy", "xs = [1,\n", &BTreeMap::new()).is_err());
    }

    #[test]
    fn intro_shape() {
        let p = parse_str(INTRO);
        assert_eq!(p.stmts.len(), 2);
        let StmtKind::Def(def) = &p.stmts[0].kind else { panic!("expected def") };
        assert_eq!(def.name, "f");
        assert_eq!(def.params.len(), 2);
        assert!(def.params.iter().all(|p| p.annot == Type::Unknown));
        assert_eq!(def.ret, Type::Unknown);
        assert!(matches!(&p.stmts[1].kind, StmtKind::Expr(Expr { kind: ExprKind::Call(..), .. })));
        assert_eq!(p.prelude["succ"], Type::function(vec![Type::Unknown], Type::Unknown));
    }

    #[test]
    fn external_prelude_is_merged() {
        let mut prelude = BTreeMap::new();
        prelude.insert("succ".to_string(), Type::function(vec![Type::Unknown], Type::Unknown));
        let src = INTRO.replace("extern succ: Function([*], *)\n", "");
        let p = parse("l1.spy", &src, &prelude).unwrap();
        assert_eq!(p.prelude.len(), 1);
        assert!(p.structurally_eq(&parse_str(INTRO)));
    }

    #[test]
    fn empty_source() {
        let p = parse_str("");
        assert!(p.stmts.is_empty());
    }

    #[test]
    fn annotated_assignment() {
        let p = parse_str("x: Int = 1 + 2");
        let StmtKind::Assign { target, annot, value, .. } = &p.stmts[0].kind else { panic!() };
        assert_eq!(target, "x");
        assert_eq!(*annot, Type::Int);
        let ExprKind::Add(a, b) = &value.kind else { panic!() };
        assert_eq!(a.kind, ExprKind::Int(1));
        assert_eq!(b.kind, ExprKind::Int(2));
    }

    #[test]
    fn omitted_and_explicit_unknown_agree() {
        let a = parse_str("def g(a, b) -> *:\n    c = a\n    return c\n");
        let b = parse_str("def g(a: *, b: *):\n    c: * = a\n    return c\n");
        assert!(a.structurally_eq(&b));
    }

    #[test]
    fn spans_are_one_based() {
        let p = parse_str("x = [1, 2][0]");
        let StmtKind::Assign { value, target_span, .. } = &p.stmts[0].kind else { panic!() };
        assert_eq!((target_span.line, target_span.column), (1, 1));
        assert_eq!((value.span.column, value.span.length), (5, 9));
    }

    #[test]
    fn print_round_trips_intro() {
        let p = parse_str(INTRO);
        let text = print_program(&p);
        let q = parse_str(&text);
        assert!(p.structurally_eq(&q), "{text}");
        assert_eq!(print_program(&q), text);
    }

    #[test]
    fn print_shows_added_annotation() {
        let mut p = parse_str(INTRO);
        let StmtKind::Def(def) = &mut p.stmts[0].kind else { panic!() };
        def.params[1].annot = Type::Bool;
        let text = print_program(&p);
        assert!(text.contains("def f(x: *, y: Bool)"), "{text}");
    }

    #[test]
    fn print_empty_array() {
        let p = parse_str("a: Array(*) = []");
        assert!(print_program(&p).contains("a: Array(*) = []"));
    }

    #[test]
    fn nested_conditionals_and_postfix_round_trip() {
        let src = "def h(a):\n    return (if a then 1 else 2) + (if a then [3] else [4])[0]\n\nh(true)(1)[2]; q = 1 + (2 + 3)\n";
        let p = parse_str(src);
        let q = parse_str(&print_program(&p));
        assert!(p.structurally_eq(&q));
    }

    #[test]
    fn errors() {
        let err = parse("t.spy", "x = (1", &BTreeMap::new()).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { .. }));
        assert_eq!(err.span().line, 1);

        let err = parse("t.spy", "def f():\n    return 1\ndef f():\n    return 2\n", &BTreeMap::new())
            .unwrap_err();
        assert!(matches!(err, ParseError::DuplicateDef { ref name, .. } if name == "f"));
        assert_eq!(err.span().line, 3);

        let err = parse("t.spy", "return 1", &BTreeMap::new()).unwrap_err();
        assert!(err.to_string().contains("outside"));

        let err = parse("t.spy", "1 + 2 = 3", &BTreeMap::new()).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { .. }));

        assert!(parse("t.spy", "def f():\n        return 1\n    x = 1\n", &BTreeMap::new()).is_err());
    }

    #[test]
    fn type_syntax() {
        assert_eq!(
            parse_type("Function([Int, Array(*)], Bool)").unwrap(),
            Type::function(vec![Type::Int, Type::array(Type::Unknown)], Type::Bool)
        );
        assert_eq!(parse_type("Function([], *)").unwrap(), Type::function(vec![], Type::Unknown));
        assert!(parse_type("Float").is_err());
    }

    #[test]
    fn prelude_file() {
        let prelude = parse_prelude("p", "extern succ: Function([*], *)\nextern lt: Function([Int, Int], Bool)\n").unwrap();
        assert_eq!(prelude.len(), 2);
        assert!(parse_prelude("p", "x = 1\n").is_err());
    }
}
