use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The seven bulk bitwise operations the command compiler supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BitwiseOp {
    Not,
    And,
    Or,
    Nand,
    Nor,
    Xor,
    Xnor,
}

impl BitwiseOp {
    pub const ALL: [BitwiseOp; 7] = [
        BitwiseOp::Not,
        BitwiseOp::And,
        BitwiseOp::Or,
        BitwiseOp::Nand,
        BitwiseOp::Nor,
        BitwiseOp::Xor,
        BitwiseOp::Xnor,
    ];

    pub fn is_binary(self) -> bool {
        self != BitwiseOp::Not
    }

    pub fn arity(self) -> usize {
        if self.is_binary() {
            2
        } else {
            1
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BitwiseOp::Not => "not",
            BitwiseOp::And => "and",
            BitwiseOp::Or => "or",
            BitwiseOp::Nand => "nand",
            BitwiseOp::Nor => "nor",
            BitwiseOp::Xor => "xor",
            BitwiseOp::Xnor => "xnor",
        }
    }

    /// Host reference on one 64-bit word. `b` is ignored for NOT.
    pub fn apply(self, a: u64, b: u64) -> u64 {
        match self {
            BitwiseOp::Not => !a,
            BitwiseOp::And => a & b,
            BitwiseOp::Or => a | b,
            BitwiseOp::Nand => !(a & b),
            BitwiseOp::Nor => !(a | b),
            BitwiseOp::Xor => a ^ b,
            BitwiseOp::Xnor => !(a ^ b),
        }
    }

    /// Bytes crossing the memory channel per result byte when the operation
    /// runs on a host processor: read every source, write the result.
    pub fn traffic_factor(self) -> f64 {
        (self.arity() + 1) as f64
    }
}

impl fmt::Display for BitwiseOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BitwiseOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BitwiseOp::ALL
            .into_iter()
            .find(|op| op.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown bitwise operation `{s}`")))
    }
}
