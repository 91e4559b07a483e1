//! Runtime meaning of extern functions.

use std::cell::RefCell;
use std::rc::Rc;

use super::interp::{runtime, Abort, Interp};
use super::value::Value;
use crate::resolve::BindingId;
use crate::syntax::{Span, Type};

/// Names with a built-in implementation and a suggested declaration.
pub const BUILTINS: &[(&str, &str)] = &[
    ("succ", "Function([*], *)"),
    ("pred", "Function([*], *)"),
    ("sub", "Function([Int, Int], Int)"),
    ("mul", "Function([Int, Int], Int)"),
    ("div", "Function([Int, Int], Int)"),
    ("lt", "Function([Int, Int], Bool)"),
    ("le", "Function([Int, Int], Bool)"),
    ("eq", "Function([*, *], Bool)"),
    ("not", "Function([Bool], Bool)"),
    ("len", "Function([*], Int)"),
    ("make_array", "Function([Int, *], Array(*))"),
    ("slice", "Function([*, Int, Int], Array(*))"),
    ("push", "Function([*, *], Int)"),
    ("opaque", "Function([*], *)"),
    ("randint", "Function([Int], Int)"),
];

/// Prelude text declaring every builtin with its suggested type.
pub fn builtin_prelude() -> String {
    BUILTINS.iter().map(|(n, t)| format!("extern {n}: {t}\n")).collect()
}

impl Interp<'_> {
    pub(super) fn call_extern(&mut self, b: BindingId, args: Vec<Value>, span: &Span) -> Result<Value, Abort> {
        let binding = self.cp.resolved.binding(b);
        let name = binding.name.clone();
        let declared = binding.declared.clone();
        if let Type::Function(params, _) = &declared {
            if params.len() != args.len() {
                return Err(runtime(span, format!("`{name}` expects {} arguments, got {}", params.len(), args.len())));
            }
        }
        let result = self.builtin(&name, &args, span)?;
        let ret = match &declared {
            Type::Function(_, r) => (**r).clone(),
            _ => Type::Unknown,
        };
        self.coerce(result, &ret, span).map_err(|_| runtime(span, format!("`{name}` returned a value that does not match {ret}")))
    }

    fn builtin(&mut self, name: &str, args: &[Value], span: &Span) -> Result<Value, Abort> {
        let arity = |n: usize| -> Result<(), Abort> {
            if args.len() == n {
                Ok(())
            } else {
                Err(runtime(span, format!("`{name}` expects {n} arguments, got {}", args.len())))
            }
        };
        let overflow = || runtime(span, "integer overflow");
        match name {
            "succ" | "pred" | "not" | "len" | "opaque" | "randint" => arity(1)?,
            "sub" | "mul" | "div" | "lt" | "le" | "eq" | "make_array" | "push" => arity(2)?,
            "slice" => arity(3)?,
            _ => return Err(runtime(span, format!("no built-in implementation for extern `{name}`"))),
        }
        Ok(match name {
            "succ" => Value::Int(self.int(&args[0], span)?.checked_add(1).ok_or_else(overflow)?),
            "pred" => Value::Int(self.int(&args[0], span)?.checked_sub(1).ok_or_else(overflow)?),
            "sub" => Value::Int(self.int(&args[0], span)?.checked_sub(self.int(&args[1], span)?).ok_or_else(overflow)?),
            "mul" => Value::Int(self.int(&args[0], span)?.checked_mul(self.int(&args[1], span)?).ok_or_else(overflow)?),
            "div" => {
                let (a, b) = (self.int(&args[0], span)?, self.int(&args[1], span)?);
                if b == 0 {
                    return Err(runtime(span, "division by zero"));
                }
                Value::Int(a.checked_div(b).ok_or_else(overflow)?)
            }
            "lt" => Value::Bool(self.int(&args[0], span)? < self.int(&args[1], span)?),
            "le" => Value::Bool(self.int(&args[0], span)? <= self.int(&args[1], span)?),
            "eq" => Value::Bool(match (&args[0], &args[1]) {
                (Value::Int(a), Value::Int(b)) => a == b,
                (Value::Bool(a), Value::Bool(b)) => a == b,
                _ => return Err(runtime(span, "`eq` compares two Ints or two Bools")),
            }),
            "not" => Value::Bool(!self.bool(&args[0], span)?),
            "len" => Value::Int(self.array_len(&args[0], span)? as i64),
            "opaque" => args[0].clone(),
            "make_array" => {
                let n = self.int(&args[0], span)?;
                let n = usize::try_from(n).map_err(|_| runtime(span, "negative array length"))?;
                if n > 10_000_000 {
                    return Err(runtime(span, "array too large"));
                }
                Value::Array(Rc::new(RefCell::new(vec![args[1].clone(); n])))
            }
            "slice" => {
                let len = self.array_len(&args[0], span)? as i64;
                let (lo, hi) = (self.int(&args[1], span)?, self.int(&args[2], span)?);
                if lo < 0 || hi < lo || hi > len {
                    return Err(runtime(span, format!("bad slice [{lo}, {hi}) of length {len}")));
                }
                let mut items = Vec::with_capacity((hi - lo) as usize);
                for i in lo..hi {
                    items.push(self.array_read(&args[0], i, span)?);
                }
                Value::Array(Rc::new(RefCell::new(items)))
            }
            "push" => Value::Int(self.array_push(&args[0], args[1].clone(), span)? as i64),
            "randint" => {
                let n = self.int(&args[0], span)?;
                if n <= 0 {
                    return Err(runtime(span, "randint bound must be positive"));
                }
                self.rng = self.rng.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
                Value::Int(((self.rng >> 33) % n as u64) as i64)
            }
            _ => unreachable!(),
        })
    }
}
