use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl CmpOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
        }
    }

    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Eq => lhs == rhs,
        }
    }
}

/// Row filter `<column><op><number>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgroup {
    pub column: String,
    pub op: CmpOp,
    pub value: f64,
}

impl Subgroup {
    pub fn new(column: &str, op: CmpOp, value: f64) -> Self {
        Self {
            column: column.to_string(),
            op,
            value,
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }

    pub fn matches(&self, value: f64) -> bool {
        self.op.holds(value, self.value)
    }
}

impl fmt::Display for Subgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.column, self.op.as_str(), self.value)
    }
}

impl FromStr for Subgroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        // two-character operators first so `<=` is not read as `<`
        const OPS: [(&str, CmpOp); 5] = [
            ("<=", CmpOp::Le),
            (">=", CmpOp::Ge),
            ("==", CmpOp::Eq),
            ("<", CmpOp::Lt),
            (">", CmpOp::Gt),
        ];
        let (at, token, op) = OPS
            .iter()
            .filter_map(|&(tok, op)| s.find(tok).map(|at| (at, tok, op)))
            .min_by_key(|&(at, tok, _)| (at, std::cmp::Reverse(tok.len())))
            .ok_or_else(|| format!("predicate `{s}` has no comparison operator (<, <=, >, >=, ==)"))?;
        let column = s[..at].trim();
        let number = s[at + token.len()..].trim();
        if column.is_empty() {
            return Err(format!("predicate `{s}` has no column"));
        }
        let value: f64 = number
            .parse()
            .map_err(|_| format!("predicate `{s}`: `{number}` is not a number"))?;
        if !value.is_finite() {
            return Err(format!("predicate `{s}`: threshold must be finite"));
        }
        Ok(Subgroup::new(column, op, value))
    }
}
