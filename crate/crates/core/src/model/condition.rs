//! Boolean expressions over property tests.
//!
//! Conditions are evaluated with Kleene three-valued logic so that a
//! partially answered context can leave a guard undecided.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Condition {
    True,
    False,
    Eq {
        property: String,
        value: String,
    },
    Ne {
        property: String,
        value: String,
    },
    In {
        property: String,
        values: Vec<String>,
    },
    Not {
        operand: Box<Condition>,
    },
    And {
        operands: Vec<Condition>,
    },
    Or {
        operands: Vec<Condition>,
    },
}

impl Condition {
    pub fn eq(property: impl Into<String>, value: impl Into<String>) -> Self {
        Condition::Eq {
            property: property.into(),
            value: value.into(),
        }
    }

    pub fn ne(property: impl Into<String>, value: impl Into<String>) -> Self {
        Condition::Ne {
            property: property.into(),
            value: value.into(),
        }
    }

    pub fn is_in<I, S>(property: impl Into<String>, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Condition::In {
            property: property.into(),
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(operand: Condition) -> Self {
        Condition::Not {
            operand: Box::new(operand),
        }
    }

    pub fn and(operands: Vec<Condition>) -> Self {
        Condition::And { operands }
    }

    pub fn or(operands: Vec<Condition>) -> Self {
        Condition::Or { operands }
    }

    /// Evaluates under Kleene logic. `lookup` returns `None` for unassigned
    /// properties, which makes every test on them undecided.
    pub fn eval<'a, F>(&self, lookup: &F) -> Option<bool>
    where
        F: Fn(&str) -> Option<&'a str>,
    {
        match self {
            Condition::True => Some(true),
            Condition::False => Some(false),
            Condition::Eq { property, value } => lookup(property).map(|v| v == value),
            Condition::Ne { property, value } => lookup(property).map(|v| v != value),
            Condition::In { property, values } => {
                lookup(property).map(|v| values.iter().any(|x| x == v))
            }
            Condition::Not { operand } => operand.eval(lookup).map(|b| !b),
            Condition::And { operands } => {
                let mut undecided = false;
                for op in operands {
                    match op.eval(lookup) {
                        Some(false) => return Some(false),
                        None => undecided = true,
                        Some(true) => {}
                    }
                }
                if undecided {
                    None
                } else {
                    Some(true)
                }
            }
            Condition::Or { operands } => {
                let mut undecided = false;
                for op in operands {
                    match op.eval(lookup) {
                        Some(true) => return Some(true),
                        None => undecided = true,
                        Some(false) => {}
                    }
                }
                if undecided {
                    None
                } else {
                    Some(false)
                }
            }
        }
    }

    /// Every property id mentioned anywhere in the tree.
    pub fn properties(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_properties(&mut out);
        out
    }

    fn collect_properties<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Condition::True | Condition::False => {}
            Condition::Eq { property, .. }
            | Condition::Ne { property, .. }
            | Condition::In { property, .. } => {
                out.insert(property);
            }
            Condition::Not { operand } => operand.collect_properties(out),
            Condition::And { operands } | Condition::Or { operands } => {
                for op in operands {
                    op.collect_properties(out);
                }
            }
        }
    }

    /// Calls `f(property, value)` for every value literal in the tree.
    pub fn for_each_test<'a>(&'a self, f: &mut impl FnMut(&'a str, &'a str)) {
        match self {
            Condition::True | Condition::False => {}
            Condition::Eq { property, value } | Condition::Ne { property, value } => {
                f(property, value)
            }
            Condition::In { property, values } => {
                for v in values {
                    f(property, v);
                }
            }
            Condition::Not { operand } => operand.for_each_test(f),
            Condition::And { operands } | Condition::Or { operands } => {
                for op in operands {
                    op.for_each_test(f);
                }
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Condition::Or { .. } => 1,
            Condition::And { .. } => 2,
            _ => 3,
        }
    }

    fn fmt_operand(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        // Nested and/or always gets parentheses so the n-ary shape survives a re-parse.
        if self.precedence() <= parent {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

/// Canonical infix rendering; this is the syntax the `.kb` parser accepts.
impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::True => f.write_str("true"),
            Condition::False => f.write_str("false"),
            Condition::Eq { property, value } => write!(f, "{property} = {value}"),
            Condition::Ne { property, value } => write!(f, "{property} != {value}"),
            Condition::In { property, values } => {
                write!(f, "{property} in ({})", values.join(", "))
            }
            Condition::Not { operand } => {
                f.write_str("NOT ")?;
                operand.fmt_operand(f, 2)
            }
            Condition::And { operands } => {
                for (i, op) in operands.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" AND ")?;
                    }
                    op.fmt_operand(f, 2)?;
                }
                Ok(())
            }
            Condition::Or { operands } => {
                for (i, op) in operands.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" OR ")?;
                    }
                    op.fmt_operand(f, 1)?;
                }
                Ok(())
            }
        }
    }
}
