//! Guard and effect expressions.
//!
//! A deliberately small language: integer and boolean expressions over
//! declared variables, with comparisons, `+`/`-`, `&&`/`||`/`!`, and
//! assignment effects (`Inventory := Inventory - Quantity`). Text values
//! exist so models can bind labels, but no text operators are provided.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

/// Declared type of a model variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Int,
    Bool,
    Text,
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueType::Int => write!(f, "int"),
            ValueType::Bool => write!(f, "bool"),
            ValueType::Text => write!(f, "text"),
        }
    }
}

/// A runtime value in the variable environment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Text(String),
}

impl Value {
    pub fn value_type(&self) -> ValueType {
        match self {
            Value::Int(_) => ValueType::Int,
            Value::Bool(_) => ValueType::Bool,
            Value::Text(_) => ValueType::Text,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Text(s) => write!(f, "{:?}", s),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Int(n) => serializer.serialize_i64(*n),
            Value::Bool(b) => serializer.serialize_bool(*b),
            Value::Text(s) => serializer.serialize_str(s),
        }
    }
}

/// Variable environment for evaluation; sorted so snapshots serialize
/// deterministically.
pub type Env = BTreeMap<String, Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => 3,
            BinOp::Add | BinOp::Sub => 4,
        }
    }

    fn is_comparison(self) -> bool {
        self.precedence() == 3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Literal(Value),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

/// An effect: `var := expr`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub var: String,
    pub expr: Expr,
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} := {}", self.var, self.expr)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("variable `{0}` is not bound")]
    UnboundVariable(String),
    #[error("type error in `{context}`: expected {expected}, found {found}")]
    Type {
        expected: ValueType,
        found: ValueType,
        context: String,
    },
}

/// Static type-check failure against the model's variable declarations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprTypeError {
    #[error("variable `{0}` is not declared")]
    UndeclaredVariable(String),
    #[error("type error in `{context}`: expected {expected}, found {found}")]
    Mismatch {
        expected: ValueType,
        found: ValueType,
        context: String,
    },
}

impl Expr {
    pub fn int(n: i64) -> Expr {
        Expr::Literal(Value::Int(n))
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Collect every variable the expression reads.
    pub fn free_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Literal(_) => {}
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Unary(_, inner) => inner.free_vars(out),
            Expr::Binary(_, lhs, rhs) => {
                lhs.free_vars(out);
                rhs.free_vars(out);
            }
        }
    }

    pub fn eval(&self, env: &Env) -> Result<Value, EvalError> {
        match self {
            Expr::Literal(v) => Ok(v.clone()),
            Expr::Var(name) => env
                .get(name)
                .cloned()
                .ok_or_else(|| EvalError::UnboundVariable(name.clone())),
            Expr::Unary(op, inner) => {
                let v = inner.eval(env)?;
                match (op, v) {
                    (UnOp::Neg, Value::Int(n)) => Ok(Value::Int(-n)),
                    (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    (UnOp::Neg, v) => Err(EvalError::Type {
                        expected: ValueType::Int,
                        found: v.value_type(),
                        context: self.to_string(),
                    }),
                    (UnOp::Not, v) => Err(EvalError::Type {
                        expected: ValueType::Bool,
                        found: v.value_type(),
                        context: self.to_string(),
                    }),
                }
            }
            Expr::Binary(op, lhs, rhs) => {
                // Short-circuit the boolean connectives.
                if matches!(op, BinOp::And | BinOp::Or) {
                    let l = self.expect_bool(lhs.eval(env)?)?;
                    return match (op, l) {
                        (BinOp::And, false) => Ok(Value::Bool(false)),
                        (BinOp::Or, true) => Ok(Value::Bool(true)),
                        _ => Ok(Value::Bool(self.expect_bool(rhs.eval(env)?)?)),
                    };
                }
                let l = lhs.eval(env)?;
                let r = rhs.eval(env)?;
                match op {
                    BinOp::Add => Ok(Value::Int(self.expect_int(l)? + self.expect_int(r)?)),
                    BinOp::Sub => Ok(Value::Int(self.expect_int(l)? - self.expect_int(r)?)),
                    BinOp::Lt => Ok(Value::Bool(self.expect_int(l)? < self.expect_int(r)?)),
                    BinOp::Le => Ok(Value::Bool(self.expect_int(l)? <= self.expect_int(r)?)),
                    BinOp::Gt => Ok(Value::Bool(self.expect_int(l)? > self.expect_int(r)?)),
                    BinOp::Ge => Ok(Value::Bool(self.expect_int(l)? >= self.expect_int(r)?)),
                    BinOp::Eq | BinOp::Ne => {
                        if l.value_type() != r.value_type() {
                            return Err(EvalError::Type {
                                expected: l.value_type(),
                                found: r.value_type(),
                                context: self.to_string(),
                            });
                        }
                        let eq = l == r;
                        Ok(Value::Bool(if *op == BinOp::Eq { eq } else { !eq }))
                    }
                    BinOp::And | BinOp::Or => unreachable!("handled above"),
                }
            }
        }
    }

    fn expect_int(&self, v: Value) -> Result<i64, EvalError> {
        match v {
            Value::Int(n) => Ok(n),
            other => Err(EvalError::Type {
                expected: ValueType::Int,
                found: other.value_type(),
                context: self.to_string(),
            }),
        }
    }

    fn expect_bool(&self, v: Value) -> Result<bool, EvalError> {
        match v {
            Value::Bool(b) => Ok(b),
            other => Err(EvalError::Type {
                expected: ValueType::Bool,
                found: other.value_type(),
                context: self.to_string(),
            }),
        }
    }

    /// Infer the expression's type against declared variable types.
    pub fn check_type(
        &self,
        decls: &BTreeMap<String, ValueType>,
    ) -> Result<ValueType, ExprTypeError> {
        match self {
            Expr::Literal(v) => Ok(v.value_type()),
            Expr::Var(name) => decls
                .get(name)
                .copied()
                .ok_or_else(|| ExprTypeError::UndeclaredVariable(name.clone())),
            Expr::Unary(op, inner) => {
                let t = inner.check_type(decls)?;
                let want = match op {
                    UnOp::Neg => ValueType::Int,
                    UnOp::Not => ValueType::Bool,
                };
                if t == want {
                    Ok(want)
                } else {
                    Err(ExprTypeError::Mismatch {
                        expected: want,
                        found: t,
                        context: self.to_string(),
                    })
                }
            }
            Expr::Binary(op, lhs, rhs) => {
                let l = lhs.check_type(decls)?;
                let r = rhs.check_type(decls)?;
                let mismatch = |expected, found| ExprTypeError::Mismatch {
                    expected,
                    found,
                    context: self.to_string(),
                };
                match op {
                    BinOp::Add | BinOp::Sub => {
                        if l != ValueType::Int {
                            return Err(mismatch(ValueType::Int, l));
                        }
                        if r != ValueType::Int {
                            return Err(mismatch(ValueType::Int, r));
                        }
                        Ok(ValueType::Int)
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        if l != ValueType::Int {
                            return Err(mismatch(ValueType::Int, l));
                        }
                        if r != ValueType::Int {
                            return Err(mismatch(ValueType::Int, r));
                        }
                        Ok(ValueType::Bool)
                    }
                    BinOp::Eq | BinOp::Ne => {
                        if l != r {
                            return Err(mismatch(l, r));
                        }
                        Ok(ValueType::Bool)
                    }
                    BinOp::And | BinOp::Or => {
                        if l != ValueType::Bool {
                            return Err(mismatch(ValueType::Bool, l));
                        }
                        if r != ValueType::Bool {
                            return Err(mismatch(ValueType::Bool, r));
                        }
                        Ok(ValueType::Bool)
                    }
                }
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Literal(_) | Expr::Var(_) => 6,
            Expr::Unary(..) => 5,
            Expr::Binary(op, ..) => op.precedence(),
        }
    }
}

impl fmt::Display for Expr {
    /// Canonical rendering: minimal parentheses, single spaces around
    /// binary operators. `parse(format!("{e}"))` reproduces `e`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Literal(v) => write!(f, "{v}"),
            Expr::Var(name) => write!(f, "{name}"),
            Expr::Unary(op, inner) => {
                let sym = match op {
                    UnOp::Neg => "-",
                    UnOp::Not => "!",
                };
                if inner.precedence() < 5 {
                    write!(f, "{sym}({inner})")
                } else {
                    write!(f, "{sym}{inner}")
                }
            }
            Expr::Binary(op, lhs, rhs) => {
                let p = op.precedence();
                let left_parens = lhs.precedence() < p
                    || (op.is_comparison()
                        && matches!(**lhs, Expr::Binary(l, ..) if l.is_comparison()));
                // The parser left-associates, so a right child at the same
                // level needs parentheses to keep its shape.
                let right_parens = rhs.precedence() <= p;
                if left_parens {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if right_parens {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
        }
    }
}
