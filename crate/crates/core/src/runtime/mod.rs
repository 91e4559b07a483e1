//! Cast elaboration and a cast-counting interpreter with guarded proxies.
//!
//! A cast to `*` passes the value through and counts as an injection. Any
//! other cast checks the value's tag and counts as a projection; arrays and
//! functions whose own type differs from the target are wrapped in a proxy,
//! and each later access through the proxy is counted and checked again.

mod builtins;
mod elaborate;
mod interp;
mod value;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

pub use builtins::{builtin_prelude, BUILTINS};
pub use elaborate::{elaborate, join, static_types, Cast, CastProgram, Direction, StaticTypeError};
pub use value::Snapshot;

use crate::resolve::BindingId;
use crate::syntax::{NodeId, Span, Type};

pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DynamicCounts {
    pub total: u64,
    pub projection: u64,
    pub injection: u64,
    pub proxy_read: u64,
    pub proxy_write: u64,
    pub proxy_call: u64,
}

impl DynamicCounts {
    pub fn proxy(&self) -> u64 {
        self.proxy_read + self.proxy_write + self.proxy_call
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Outcome {
    /// Normal termination; the value of the last top-level expression
    /// statement, if any ran.
    Value { value: Option<Snapshot> },
    CastFailure { span: Span, expected: Type, actual: Type },
    RuntimeError { span: Span, message: String },
    BudgetExhausted,
}

/// What two runs must agree on to count as the same behavior.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Observable {
    Value(Option<Snapshot>),
    Failure(Span),
    BudgetExhausted,
}

impl Outcome {
    pub fn is_value(&self) -> bool {
        matches!(self, Outcome::Value { .. })
    }

    pub fn observable(&self) -> Observable {
        match self {
            Outcome::Value { value } => Observable::Value(value.clone()),
            Outcome::CastFailure { span, .. } | Outcome::RuntimeError { span, .. } => Observable::Failure(span.clone()),
            Outcome::BudgetExhausted => Observable::BudgetExhausted,
        }
    }

    /// Short label used in tables.
    pub fn label(&self) -> String {
        match self {
            Outcome::Value { value: Some(v) } => format!("value {v}"),
            Outcome::Value { value: None } => "value none".to_string(),
            Outcome::CastFailure { span, .. } => format!("cast-failure@{span}"),
            Outcome::RuntimeError { span, .. } => format!("runtime-error@{span}"),
            Outcome::BudgetExhausted => "budget-exhausted".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StaticSite {
    pub span: Span,
    pub source: Type,
    pub target: Type,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub span: Span,
    pub expected: Type,
    pub actual: Type,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CastReport {
    pub static_sites: Vec<StaticSite>,
    pub dynamic: DynamicCounts,
    pub outcome: Outcome,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub budget: u64,
    /// Evaluate as if no casts had been inserted.
    pub erase_casts: bool,
    /// Record which function each call site actually invoked.
    pub record_callees: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { budget: DEFAULT_BUDGET, erase_casts: false, record_callees: false }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: CastReport,
    pub callees: Option<BTreeMap<NodeId, BTreeSet<BindingId>>>,
}

impl Evaluation {
    pub fn outcome(&self) -> &Outcome {
        &self.report.outcome
    }
}

pub fn evaluate(cp: &CastProgram, options: &EvalOptions) -> Evaluation {
    let run = interp::run(cp, options.budget, options.erase_casts, options.record_callees);
    let failures = match &run.outcome {
        Outcome::CastFailure { span, expected, actual } => {
            vec![Failure { span: span.clone(), expected: expected.clone(), actual: actual.clone() }]
        }
        _ => Vec::new(),
    };
    let static_sites = cp
        .sites()
        .into_iter()
        .map(|c| StaticSite { span: c.span.clone(), source: c.source.clone(), target: c.target.clone() })
        .collect();
    Evaluation {
        report: CastReport { static_sites, dynamic: run.counts, outcome: run.outcome, failures },
        callees: run.callees,
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::resolve::resolve_names;
    use crate::syntax::parse;

    const INTRO: &str = "\
extern succ: Function([*], *)

def f(x, y):
    u = x
    z: Bool = y
    return if z then succ(x) else succ(u)

f(succ(1), true)
";

    fn cast_program(src: &str) -> Result<CastProgram, StaticTypeError> {
        let r = resolve_names(&parse("t.spy", src, &BTreeMap::new()).unwrap()).unwrap();
        elaborate(&r)
    }

    fn run(src: &str) -> CastReport {
        evaluate(&cast_program(src).unwrap(), &EvalOptions::default()).report
    }

    fn sites(cp: &CastProgram) -> Vec<(u32, u32, String, String)> {
        cp.sites()
            .into_iter()
            .map(|c| (c.span.line, c.span.column, c.source.to_string(), c.target.to_string()))
            .collect()
    }

    fn site(line: u32, col: u32, source: &str, target: &str) -> (u32, u32, String, String) {
        (line, col, source.to_string(), target.to_string())
    }

    #[test]
    fn intro_casts() {
        let cp = cast_program(INTRO).unwrap();
        assert_eq!(
            sites(&cp),
            vec![site(5, 15, "*", "Bool"), site(8, 8, "Int", "*"), site(8, 12, "Bool", "*")]
        );
        let report = evaluate(&cp, &EvalOptions::default()).report;
        assert_eq!(report.outcome, Outcome::Value { value: Some(Snapshot::Int(3)) });
        assert_eq!(report.dynamic.total, 3);
        assert_eq!((report.dynamic.projection, report.dynamic.injection), (1, 2));
    }

    #[test]
    fn degradation_adds_three_sites() {
        let cp = cast_program(&INTRO.replace("def f(x, y)", "def f(x: Int, y)")).unwrap();
        assert_eq!(
            sites(&cp),
            vec![
                site(4, 9, "Int", "*"),
                site(5, 15, "*", "Bool"),
                site(6, 27, "Int", "*"),
                site(8, 3, "*", "Int"),
                site(8, 8, "Int", "*"),
                site(8, 12, "Bool", "*"),
            ]
        );
    }

    #[test]
    fn concrete_program_has_no_sites() {
        let src = "extern sub: Function([Int, Int], Int)\ndef f(a: Int, b: Int) -> Int:\n    return sub(a, b) + 1\nf(5, 2)\n";
        let report = run(src);
        assert!(report.static_sites.is_empty());
        assert_eq!(report.dynamic.total, 0);
        assert_eq!(report.outcome, Outcome::Value { value: Some(Snapshot::Int(4)) });
    }

    #[test]
    fn projection_success_and_failure() {
        let report = run("x = true\ny: Bool = x\ny\n");
        assert_eq!((report.dynamic.total, report.dynamic.projection), (2, 1));
        assert!(report.outcome.is_value());

        let report = run("x = true\ny: Int = x\n");
        let Outcome::CastFailure { span, expected, actual } = &report.outcome else { panic!("{:?}", report.outcome) };
        assert_eq!((span.line, span.column), (2, 10));
        assert_eq!((expected, actual), (&Type::Int, &Type::Bool));
        assert_eq!(report.failures.len(), 1);
    }

    #[test]
    fn static_type_errors() {
        let err = cast_program("x: Int = true\n").unwrap_err();
        assert_eq!((err.found.clone(), err.expected.clone()), (Type::Bool, Type::Int));
        assert!(cast_program("x = 1 + [2]\n").is_err());
        assert!(cast_program("def f(a):\n    return a\nf(1, 2)\n").is_err());
        assert!(cast_program("x = 3\ny = x[0]\n").is_ok());
    }

    #[test]
    fn array_proxies_check_each_access() {
        let src = "extern opaque: Function([*], *)\na: Array(Int) = opaque([1, 2])\na[0] = 5\na[0] + a[1]\n";
        let report = run(src);
        assert_eq!(report.outcome, Outcome::Value { value: Some(Snapshot::Int(7)) });
        assert_eq!((report.dynamic.proxy_read, report.dynamic.proxy_write), (2, 1));

        let src = "extern opaque: Function([*], *)\na: Array(Int) = opaque([1, true])\na[0]\na[1]\n";
        let report = run(src);
        let Outcome::CastFailure { span, .. } = &report.outcome else { panic!("{:?}", report.outcome) };
        assert_eq!((span.line, span.column), (2, 17));
    }

    #[test]
    fn function_proxies() {
        let src = "\
def inc(n: Int) -> Int:
    return n + 1
def apply(k, v):
    return k(v)
apply(inc, 4)
";
        let report = run(src);
        assert_eq!(report.outcome, Outcome::Value { value: Some(Snapshot::Int(5)) });
        // inc injected at the argument, projected at the call, then one
        // checked call through the resulting proxy.
        assert_eq!(report.dynamic.proxy_call, 1);

        let bad = src.replace("apply(inc, 4)", "apply(inc, true)");
        let report = run(&bad);
        assert!(matches!(report.outcome, Outcome::CastFailure { .. }), "{:?}", report.outcome);
    }

    #[test]
    fn erasure_preserves_values() {
        let cp = cast_program(INTRO).unwrap();
        let with = evaluate(&cp, &EvalOptions::default()).report;
        let without = evaluate(&cp, &EvalOptions { erase_casts: true, ..EvalOptions::default() }).report;
        assert_eq!(with.outcome, without.outcome);
        assert_eq!(without.dynamic.total, 0);
    }

    #[test]
    fn guards() {
        let report = evaluate(
            &cast_program("def f(n):\n    return f(n)\nf(1)\n").unwrap(),
            &EvalOptions { budget: 10_000, ..EvalOptions::default() },
        )
        .report;
        assert_eq!(report.outcome, Outcome::BudgetExhausted);

        let deep = "extern pred: Function([*], *)\nextern eq: Function([*, *], Bool)\ndef down(n):\n    return if eq(n, 0) then 0 else down(pred(n))\ndown(30000)\n";
        assert_eq!(run(deep).outcome, Outcome::Value { value: Some(Snapshot::Int(0)) });

        assert!(matches!(run("x = 9223372036854775807 + 1\n").outcome, Outcome::RuntimeError { .. }));
        assert!(matches!(run("[1][3]\n").outcome, Outcome::RuntimeError { .. }));
        assert!(matches!(run("def f():\n    y = 1\nf()\n").outcome, Outcome::RuntimeError { .. }));
        assert!(matches!(run("def f():\n    return y\n    y = 1\nf()\n").outcome, Outcome::RuntimeError { .. }));
        assert!(matches!(run("extern succ: Function([*], *)\nsucc(true)\n").outcome, Outcome::RuntimeError { .. }));
    }

    #[test]
    fn closures_capture_their_scope() {
        let src = "\
def outer(a):
    def inner(b):
        return a + b
    return inner
g = outer(10)
g(5)
";
        assert_eq!(run(src).outcome, Outcome::Value { value: Some(Snapshot::Int(15)) });
    }

    #[test]
    fn builtins_work() {
        let src = format!(
            "{}a = make_array(3, 0)\na[1] = 4\npush(a, 9)\nb = slice(a, 1, 4)\nb[0] + b[2] + len(b) + randint(5) - randint(5)\n",
            builtin_prelude()
        )
        .replace(" - randint(5)", "");
        let report = run(&src);
        let Outcome::Value { value: Some(Snapshot::Int(n)) } = report.outcome else { panic!("{:?}", report.outcome) };
        assert!((16..21).contains(&n));
    }

    #[test]
    fn deterministic_reports() {
        assert_eq!(run(INTRO), run(INTRO));
    }
}
