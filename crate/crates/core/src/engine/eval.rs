//! Expression evaluation over `a#l` and the `update_H` raise.

use crate::config::{state_lookup, Store, UnboundVariable};
use crate::lang::{assigned_vars, BinOp, Expr, Stmt, UnOp};
use crate::lattice::{Level, TaggedValue};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Unbound(#[from] UnboundVariable),
    #[error("type mismatch in `{op}`: got {found}")]
    TypeMismatch { op: String, found: String },
    #[error("`{0}` of an empty list")]
    EmptyList(&'static str),
}

fn mismatch(op: &str, vals: &[&Value]) -> EvalError {
    EvalError::TypeMismatch {
        op: op.to_string(),
        found: vals.iter().map(|v| v.type_name()).collect::<Vec<_>>().join(", "),
    }
}

/// `[e]`: the value of `e` in `a#l`, tagged with the join of the levels of
/// everything read. Literals are `L`.
pub fn eval_expr(e: &Expr, a: &Store, l: &Store) -> Result<TaggedValue, EvalError> {
    let lookup = |x: &str| state_lookup(x, a, l).cloned().map_err(EvalError::from);
    eval_with(e, &lookup)
}

/// Evaluates a variable-free expression, as found in declarations.
pub fn eval_const(e: &Expr) -> Result<Value, EvalError> {
    let lookup = |x: &str| Err(EvalError::Unbound(UnboundVariable(x.to_string())));
    eval_with(e, &lookup).map(|t| t.value)
}

fn eval_with(e: &Expr, lookup: &dyn Fn(&str) -> Result<TaggedValue, EvalError>) -> Result<TaggedValue, EvalError> {
    Ok(match e {
        Expr::Var(x) => lookup(x)?,
        Expr::This => lookup("this")?,
        Expr::Lit(v) => TaggedValue::low(v.clone()),
        Expr::Tagged(t) => t.clone(),
        Expr::List(items) => {
            let mut level = Level::L;
            let mut vals = Vec::with_capacity(items.len());
            for it in items {
                let t = eval_with(it, lookup)?;
                level = level.join(t.level);
                vals.push(t.value);
            }
            TaggedValue::new(Value::List(vals), level)
        }
        Expr::Un(op, a) => {
            let t = eval_with(a, lookup)?;
            let v = match (op, t.value) {
                (UnOp::Not, Value::Bool(b)) => Value::Bool(!b),
                (UnOp::Head, Value::List(items)) => items.into_iter().next().ok_or(EvalError::EmptyList("head"))?,
                (UnOp::Tail, Value::List(mut items)) => {
                    if items.is_empty() {
                        return Err(EvalError::EmptyList("tail"));
                    }
                    items.remove(0);
                    Value::List(items)
                }
                (op, v) => return Err(mismatch(&format!("{op:?}").to_lowercase(), &[&v])),
            };
            TaggedValue::new(v, t.level)
        }
        Expr::Bin(op, a, b) => {
            let x = eval_with(a, lookup)?;
            let y = eval_with(b, lookup)?;
            let level = x.level.join(y.level);
            let v = match (op, &x.value, &y.value) {
                (BinOp::Add, Value::Int(i), Value::Int(j)) => Value::Int(i.wrapping_add(*j)),
                (BinOp::Add, Value::Str(i), Value::Str(j)) => Value::Str(format!("{i}{j}")),
                (BinOp::Sub, Value::Int(i), Value::Int(j)) => Value::Int(i.wrapping_sub(*j)),
                (BinOp::Mul, Value::Int(i), Value::Int(j)) => Value::Int(i.wrapping_mul(*j)),
                (BinOp::Lt, Value::Int(i), Value::Int(j)) => Value::Bool(i < j),
                (BinOp::Eq, p, q) => Value::Bool(p == q),
                (BinOp::And, Value::Bool(p), Value::Bool(q)) => Value::Bool(*p && *q),
                (BinOp::Or, Value::Bool(p), Value::Bool(q)) => Value::Bool(*p || *q),
                (BinOp::Cons, h, Value::List(items)) => {
                    let mut out = Vec::with_capacity(items.len() + 1);
                    out.push(h.clone());
                    out.extend(items.iter().cloned());
                    Value::List(out)
                }
                (op, p, q) => return Err(mismatch(&format!("{op:?}").to_lowercase(), &[p, q])),
            };
            TaggedValue::new(v, level)
        }
    })
}

/// `level([ē])`: join over a list of evaluated expressions.
pub fn level_of(values: &[TaggedValue]) -> Level {
    crate::lattice::join_all(values.iter().map(|v| v.level))
}

/// Raises to `H` every assignment target occurring in `sl`, in the scope
/// that defines it. Values are unchanged.
pub fn update_h(sl: &[Stmt], a: &mut Store, l: &mut Store) {
    for x in assigned_vars(sl) {
        if let Some(v) = l.get_mut(&x).or_else(|| a.get_mut(&x)) {
            v.level = Level::H;
        }
    }
}
