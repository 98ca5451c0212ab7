//! Learning traces and the learning-rule language.

mod rule;
mod trace;

pub use rule::{eval_rule, parse_rule, LearningRule, RuleEnv, RuleError, Term, Variable};
pub use trace::{decay_and_impulse, TraceParamError, TraceParams, TraceState, TRACE_MAX};
