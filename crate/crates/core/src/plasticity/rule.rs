//! Learning-rule expressions.
//!
//! A rule is a sum of signed products. Grammar (whitespace is ignored):
//!
//! ```text
//! rule     := [sign] term (sign term)*
//! sign     := '+' | '-'
//! term     := factor ('*' factor)*
//! factor   := variable | integer | '2^' [sign] integer
//! variable := x0 | y0 | x1 | x2 | y1 | y2 | y3 | w | u0 | u1 | ... | u9
//! ```
//!
//! Integer literals must be powers of two; all literals of a term fold into
//! a single scale `2^k`. The canonical form prints each term as
//! `[2^k*]var*var...`, omitting the scale when `k = 0` and printing a bare
//! `1` for a constant term.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unsupported symbol '{symbol}' at {pos}")]
    UnsupportedSymbol { symbol: String, pos: usize },
    #[error("scale {value} at {pos} is not a power of two")]
    NonPowerOfTwo { value: String, pos: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variable {
    /// Pre-synaptic spike arriving this step.
    X0,
    /// Post-synaptic spike arriving this step.
    Y0,
    X1,
    X2,
    Y1,
    Y2,
    Y3,
    /// Weight mantissa.
    W,
    /// Epoch gate: 1 when `t` is a multiple of `2^k`.
    U(u8),
}

impl Variable {
    fn parse(name: &str) -> Option<Variable> {
        Some(match name {
            "x0" => Variable::X0,
            "y0" => Variable::Y0,
            "x1" => Variable::X1,
            "x2" => Variable::X2,
            "y1" => Variable::Y1,
            "y2" => Variable::Y2,
            "y3" => Variable::Y3,
            "w" => Variable::W,
            _ => {
                let k = name.strip_prefix('u')?;
                if k.len() != 1 {
                    return None;
                }
                Variable::U(k.parse().ok()?)
            }
        })
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variable::X0 => f.write_str("x0"),
            Variable::Y0 => f.write_str("y0"),
            Variable::X1 => f.write_str("x1"),
            Variable::X2 => f.write_str("x2"),
            Variable::Y1 => f.write_str("y1"),
            Variable::Y2 => f.write_str("y2"),
            Variable::Y3 => f.write_str("y3"),
            Variable::W => f.write_str("w"),
            Variable::U(k) => write!(f, "u{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub negative: bool,
    /// The term is multiplied by `2^scale`.
    pub scale: i32,
    pub factors: Vec<Variable>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LearningRule {
    pub terms: Vec<Term>,
}

/// Values the rule is evaluated against at one synapse and step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RuleEnv {
    pub x0: bool,
    pub y0: bool,
    pub x1: i64,
    pub x2: i64,
    pub y1: i64,
    pub y2: i64,
    pub y3: i64,
    pub w: i64,
    pub t: u64,
}

impl RuleEnv {
    fn value(&self, var: Variable) -> f64 {
        match var {
            Variable::X0 => f64::from(u8::from(self.x0)),
            Variable::Y0 => f64::from(u8::from(self.y0)),
            Variable::X1 => self.x1 as f64,
            Variable::X2 => self.x2 as f64,
            Variable::Y1 => self.y1 as f64,
            Variable::Y2 => self.y2 as f64,
            Variable::Y3 => self.y3 as f64,
            Variable::W => self.w as f64,
            Variable::U(k) => f64::from(u8::from(self.t.is_multiple_of(1u64 << k))),
        }
    }
}

impl LearningRule {
    pub fn parse(text: &str) -> Result<Self, RuleError> {
        Parser::new(text)?.rule()
    }

    pub fn eval(&self, env: &RuleEnv) -> f64 {
        self.terms
            .iter()
            .map(|term| {
                let product = term
                    .factors
                    .iter()
                    .fold(2f64.powi(term.scale), |acc, &v| acc * env.value(v));
                if term.negative {
                    -product
                } else {
                    product
                }
            })
            .sum()
    }

    pub fn uses(&self, var: Variable) -> bool {
        self.terms.iter().any(|t| t.factors.contains(&var))
    }
}

pub fn parse_rule(text: &str) -> Result<LearningRule, RuleError> {
    LearningRule::parse(text)
}

pub fn eval_rule(rule: &LearningRule, env: &RuleEnv) -> f64 {
    rule.eval(env)
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::with_capacity(self.factors.len() + 1);
        if self.scale != 0 {
            parts.push(format!("2^{}", self.scale));
        }
        parts.extend(self.factors.iter().map(Variable::to_string));
        if parts.is_empty() {
            parts.push("1".to_string());
        }
        f.write_str(&parts.join("*"))
    }
}

impl fmt::Display for LearningRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, term) in self.terms.iter().enumerate() {
            match (i, term.negative) {
                (0, false) => {}
                (0, true) => f.write_str("-")?,
                (_, false) => f.write_str(" + ")?,
                (_, true) => f.write_str(" - ")?,
            }
            write!(f, "{term}")?;
        }
        Ok(())
    }
}

impl FromStr for LearningRule {
    type Err = RuleError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LearningRule::parse(s)
    }
}

impl TryFrom<String> for LearningRule {
    type Error = RuleError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        LearningRule::parse(&s)
    }
}

impl From<LearningRule> for String {
    fn from(rule: LearningRule) -> String {
        rule.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(String),
    Plus,
    Minus,
    Star,
    Caret,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Int(s) => write!(f, "'{s}'"),
            Tok::Plus => f.write_str("'+'"),
            Tok::Minus => f.write_str("'-'"),
            Tok::Star => f.write_str("'*'"),
            Tok::Caret => f.write_str("'^'"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, RuleError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '^' => Tok::Caret,
            c if c.is_ascii_digit() => {
                let mut s = String::new();
                while let Some(&(_, d)) = chars.peek() {
                    if !d.is_ascii_digit() {
                        break;
                    }
                    s.push(d);
                    chars.next();
                }
                out.push((Tok::Int(s), pos));
                continue;
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&(_, d)) = chars.peek() {
                    if !(d.is_alphanumeric() || d == '_') {
                        break;
                    }
                    s.push(d);
                    chars.next();
                }
                out.push((Tok::Ident(s), pos));
                continue;
            }
            other => {
                return Err(RuleError::UnsupportedSymbol {
                    symbol: other.to_string(),
                    pos,
                })
            }
        };
        chars.next();
        out.push((tok, pos));
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, RuleError> {
        Ok(Parser {
            toks: tokenize(text)?,
            at: 0,
        })
    }

    fn peek(&self) -> &(Tok, usize) {
        &self.toks[self.at]
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, RuleError> {
        let (tok, pos) = self.peek();
        Err(RuleError::Syntax {
            pos: *pos,
            message: format!("expected {wanted}, found {tok}"),
        })
    }

    fn rule(&mut self) -> Result<LearningRule, RuleError> {
        let mut terms = Vec::new();
        let mut negative = match self.peek().0 {
            Tok::Minus => {
                self.bump();
                true
            }
            Tok::Plus => {
                self.bump();
                false
            }
            _ => false,
        };
        loop {
            terms.push(self.term(negative)?);
            negative = match self.peek().0 {
                Tok::Plus => false,
                Tok::Minus => true,
                Tok::End => break,
                _ => return self.unexpected("'+', '-' or '*'"),
            };
            self.bump();
        }
        Ok(LearningRule { terms })
    }

    fn term(&mut self, negative: bool) -> Result<Term, RuleError> {
        let mut term = Term {
            negative,
            scale: 0,
            factors: Vec::new(),
        };
        loop {
            self.factor(&mut term)?;
            if self.peek().0 != Tok::Star {
                return Ok(term);
            }
            self.bump();
        }
    }

    fn factor(&mut self, term: &mut Term) -> Result<(), RuleError> {
        match self.bump() {
            (Tok::Ident(name), pos) => {
                let var = Variable::parse(&name).ok_or(RuleError::UnsupportedSymbol { symbol: name, pos })?;
                term.factors.push(var);
            }
            (Tok::Int(digits), pos) => {
                if self.peek().0 == Tok::Caret {
                    if digits != "2" {
                        return Err(RuleError::NonPowerOfTwo {
                            value: format!("{digits}^..."),
                            pos,
                        });
                    }
                    self.bump();
                    let k = self.exponent()?;
                    term.scale = term.scale.checked_add(k).ok_or_else(|| RuleError::Syntax {
                        pos,
                        message: "scale exponent overflow".into(),
                    })?;
                } else {
                    let value: u64 = digits.parse().map_err(|_| RuleError::Syntax {
                        pos,
                        message: format!("integer '{digits}' too large"),
                    })?;
                    if !value.is_power_of_two() {
                        return Err(RuleError::NonPowerOfTwo { value: digits, pos });
                    }
                    term.scale += value.trailing_zeros() as i32;
                }
            }
            (tok, pos) => {
                return Err(RuleError::Syntax {
                    pos,
                    message: format!("expected a variable or power-of-two scale, found {tok}"),
                })
            }
        }
        Ok(())
    }

    fn exponent(&mut self) -> Result<i32, RuleError> {
        let negative = match self.peek().0 {
            Tok::Minus => {
                self.bump();
                true
            }
            Tok::Plus => {
                self.bump();
                false
            }
            _ => false,
        };
        match self.bump() {
            (Tok::Int(digits), pos) => {
                let k: i32 = digits
                    .parse()
                    .ok()
                    .filter(|k: &i32| *k <= 62)
                    .ok_or_else(|| RuleError::Syntax {
                        pos,
                        message: format!("exponent '{digits}' out of range"),
                    })?;
                Ok(if negative { -k } else { k })
            }
            (tok, pos) => Err(RuleError::Syntax {
                pos,
                message: format!("expected an integer exponent, found {tok}"),
            }),
        }
    }
}
