//! Expression evaluation over a single row.

use crate::ast::{BinOp, Expr};
use crate::error::EvalError;
use crate::graph::Graph;
use crate::value::{Clock, Value};

use super::{execute_read, match_patterns, Binding, Row};

#[derive(Clone, Copy)]
pub struct EvalCtx<'a> {
    pub graph: &'a Graph,
    pub clock: &'a Clock,
}

pub fn eval_expr(ctx: EvalCtx<'_>, row: &Row, expr: &Expr) -> Result<Value, EvalError> {
    match expr {
        Expr::Literal(v) => Ok(v.clone()),
        Expr::Var(name) => match row.get(name) {
            Some(Binding::Value(v)) => Ok(v.clone()),
            Some(_) => Err(EvalError::ItemInValueContext(name.clone())),
            None => Err(EvalError::UnboundVariable(name.clone())),
        },
        Expr::Prop(var, key) => {
            let binding = row
                .get(var)
                .ok_or_else(|| EvalError::UnboundVariable(var.clone()))?;
            binding
                .property(ctx.graph, key)
                .ok_or_else(|| EvalError::ItemInValueContext(var.clone()))
        }
        Expr::Binary(op, l, r) => {
            let left = eval_expr(ctx, row, l)?;
            let right = eval_expr(ctx, row, r)?;
            eval_binary(*op, &left, &right)
        }
        Expr::Not(inner) => match eval_expr(ctx, row, inner)? {
            Value::Boolean(b) => Ok(Value::Boolean(!b)),
            Value::Null => Ok(Value::Boolean(true)),
            other => Err(EvalError::TypeMismatch {
                op: "NOT",
                left: other.type_name(),
                right: "boolean",
            }),
        },
        Expr::ExistsPattern(p) => {
            let rows = match_patterns(ctx, std::slice::from_ref(&**p), row)?;
            Ok(Value::Boolean(!rows.is_empty()))
        }
        Expr::ExistsBlock(stages) => {
            let rows = execute_read(ctx.graph, ctx.clock, stages, vec![row.clone()])?;
            Ok(Value::Boolean(!rows.is_empty()))
        }
        Expr::Count(_) | Expr::CountStar => Err(EvalError::AggregateOutsideWith),
        Expr::DateTimeNow => Ok(Value::DateTime(ctx.clock.now())),
    }
}

fn as_bool_lenient(v: &Value) -> Option<bool> {
    match v {
        Value::Boolean(b) => Some(*b),
        Value::Null => Some(false),
        _ => None,
    }
}

fn eval_binary(op: BinOp, left: &Value, right: &Value) -> Result<Value, EvalError> {
    let mismatch = |op: &'static str| EvalError::TypeMismatch {
        op,
        left: left.type_name(),
        right: right.type_name(),
    };
    match op {
        BinOp::And | BinOp::Or => {
            let l = as_bool_lenient(left).ok_or_else(|| mismatch(op.symbol()))?;
            let r = as_bool_lenient(right).ok_or_else(|| mismatch(op.symbol()))?;
            Ok(Value::Boolean(if op == BinOp::And { l && r } else { l || r }))
        }
        BinOp::Eq => Ok(Value::Boolean(left.loose_eq(right))),
        BinOp::Ne => {
            if left.is_null() || right.is_null() {
                return Ok(Value::Boolean(false));
            }
            Ok(Value::Boolean(!left.loose_eq(right)))
        }
        BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => {
            let verdict = match left.partial_order(right) {
                None => false,
                Some(ord) => match op {
                    BinOp::Lt => ord.is_lt(),
                    BinOp::Gt => ord.is_gt(),
                    BinOp::Le => ord.is_le(),
                    BinOp::Ge => ord.is_ge(),
                    _ => unreachable!(),
                },
            };
            Ok(Value::Boolean(verdict))
        }
        BinOp::Div => {
            let (Some(l), Some(r)) = (left.as_f64(), right.as_f64()) else {
                return Err(mismatch("/"));
            };
            if r == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            Ok(Value::Float(l / r))
        }
        BinOp::Add | BinOp::Sub | BinOp::Mul => {
            if let (Value::Integer(l), Value::Integer(r)) = (left, right) {
                let out = match op {
                    BinOp::Add => l.checked_add(*r),
                    BinOp::Sub => l.checked_sub(*r),
                    BinOp::Mul => l.checked_mul(*r),
                    _ => unreachable!(),
                };
                return out.map(Value::Integer).ok_or_else(|| mismatch(op.symbol()));
            }
            let (Some(l), Some(r)) = (left.as_f64(), right.as_f64()) else {
                return Err(mismatch(op.symbol()));
            };
            Ok(Value::Float(match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                _ => unreachable!(),
            }))
        }
    }
}

/// Boolean verdict of an expression in filter position: null is false,
/// non-booleans are a type error.
pub fn eval_filter(ctx: EvalCtx<'_>, row: &Row, expr: &Expr) -> Result<bool, EvalError> {
    let v = eval_expr(ctx, row, expr)?;
    as_bool_lenient(&v).ok_or(EvalError::TypeMismatch {
        op: "WHERE",
        left: v.type_name(),
        right: "boolean",
    })
}
