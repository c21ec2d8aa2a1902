//! Line-oriented rule language.
//!
//! ```text
//! rule  := "IF" term ("AND" term)* "THEN" var "IS" label ("WITH" float)?
//! term  := var "IS" (label | "*")
//! ```
//!
//! Keywords are case-insensitive, identifiers are not, and `#` starts a
//! comment that runs to the end of the line.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::fuzzy::LinguisticVariable;
use crate::rules::{Consequent, LabelRef, Rule, RuleBase, RuleError, RuleSource, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

/// A message tied to a 1-based line and column of the rule source.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(
            f,
            "{}:{}: {level}: {}",
            self.line, self.column, self.message
        )
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ParseOptions {
    /// Turn duplicate antecedent patterns into errors.
    pub strict: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedRules {
    pub rules: RuleBase,
    pub warnings: Vec<Diagnostic>,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok<'a> {
    Word(&'a str),
    Star,
    Number(&'a str),
}

#[derive(Clone, Debug)]
struct Token<'a> {
    tok: Tok<'a>,
    column: usize,
}

impl Token<'_> {
    fn text(&self) -> &str {
        match self.tok {
            Tok::Word(w) | Tok::Number(w) => w,
            Tok::Star => "*",
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.tok, Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }
}

const KEYWORDS: [&str; 5] = ["IF", "AND", "THEN", "IS", "WITH"];

fn is_keyword(word: &str) -> bool {
    KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(word))
}

struct LineError {
    column: usize,
    message: String,
}

fn err<T>(column: usize, message: impl Into<String>) -> Result<T, LineError> {
    Err(LineError {
        column,
        message: message.into(),
    })
}

fn lex(line: &str) -> Result<Vec<Token<'_>>, LineError> {
    let bytes = line.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let column = line[..i].chars().count() + 1;
        if c == b'#' {
            break;
        } else if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b'*' {
            tokens.push(Token {
                tok: Tok::Star,
                column,
            });
            i += 1;
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            tokens.push(Token {
                tok: Tok::Word(&line[start..i]),
                column,
            });
        } else if c.is_ascii_digit() || c == b'.' {
            let start = i;
            while i < bytes.len() {
                let b = bytes[i];
                let exp_sign =
                    (b == b'+' || b == b'-') && i > start && matches!(bytes[i - 1], b'e' | b'E');
                if b.is_ascii_digit() || b == b'.' || b == b'e' || b == b'E' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            tokens.push(Token {
                tok: Tok::Number(&line[start..i]),
                column,
            });
        } else {
            let ch = line[i..].chars().next().unwrap_or('?');
            return err(column, format!("unexpected character {ch:?}"));
        }
    }
    Ok(tokens)
}

/// Positions of the names in a parsed rule, for semantic diagnostics.
struct Spans {
    terms: Vec<(usize, usize)>,
    consequent: (usize, usize),
}

struct Cursor<'t, 'a> {
    tokens: &'t [Token<'a>],
    pos: usize,
    end_column: usize,
}

impl<'t, 'a> Cursor<'t, 'a> {
    fn peek(&self) -> Option<&'t Token<'a>> {
        self.tokens.get(self.pos)
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.end_column, |t| t.column)
    }

    fn unexpected<T>(&self, expected: &str) -> Result<T, LineError> {
        match self.peek() {
            Some(t) => err(
                t.column,
                format!(
                    "syntax error at token \"{}\": expected {expected}",
                    t.text()
                ),
            ),
            None => err(
                self.end_column,
                format!("syntax error at end of line: expected {expected}"),
            ),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), LineError> {
        match self.peek() {
            Some(t) if t.is_keyword(kw) => {
                self.pos += 1;
                Ok(())
            }
            _ => self.unexpected(kw),
        }
    }

    fn identifier(&mut self, what: &str) -> Result<(&'a str, usize), LineError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Word(w),
                column,
            }) if !is_keyword(w) => {
                self.pos += 1;
                Ok((w, *column))
            }
            _ => self.unexpected(what),
        }
    }
}

fn parse_line(line: &str, tokens: &[Token<'_>]) -> Result<(Rule, Spans), LineError> {
    let mut cur = Cursor {
        tokens,
        pos: 0,
        end_column: line.trim_end().chars().count() + 1,
    };
    cur.keyword("IF")?;
    let mut antecedent = Vec::new();
    let mut term_spans = Vec::new();
    loop {
        let (var, var_col) = cur.identifier("variable name")?;
        cur.keyword("IS")?;
        let label_col = cur.here();
        let label = match cur.peek() {
            Some(Token { tok: Tok::Star, .. }) => {
                cur.pos += 1;
                LabelRef::Any
            }
            _ => LabelRef::Label(cur.identifier("label or \"*\"")?.0.to_string()),
        };
        antecedent.push(Term {
            variable: var.to_string(),
            label,
        });
        term_spans.push((var_col, label_col));
        match cur.peek() {
            Some(t) if t.is_keyword("AND") => cur.pos += 1,
            Some(t) if t.is_keyword("THEN") => {
                cur.pos += 1;
                break;
            }
            _ => return cur.unexpected("AND or THEN"),
        }
    }
    let (out_var, out_col) = cur.identifier("output variable name")?;
    cur.keyword("IS")?;
    let (out_label, out_label_col) = cur.identifier("output label")?;
    let mut weight = 1.0;
    if cur.peek().is_some_and(|t| t.is_keyword("WITH")) {
        cur.pos += 1;
        match cur.peek() {
            Some(Token {
                tok: Tok::Number(n),
                column,
            }) => {
                weight = n
                    .parse::<f64>()
                    .or_else(|_| err(*column, format!("malformed number \"{n}\"")))?;
                if !(weight > 0.0 && weight <= 1.0) {
                    return err(*column, format!("rule weight {n} is outside (0, 1]"));
                }
                cur.pos += 1;
            }
            _ => return cur.unexpected("a weight in (0, 1]"),
        }
    }
    if cur.peek().is_some() {
        return cur.unexpected("end of rule");
    }
    Ok((
        Rule {
            antecedent,
            consequent: Consequent {
                variable: out_var.to_string(),
                label: out_label.to_string(),
            },
            weight,
        },
        Spans {
            terms: term_spans,
            consequent: (out_col, out_label_col),
        },
    ))
}

fn check_names(
    rule: &Rule,
    spans: &Spans,
    inputs: &[LinguisticVariable],
    output: &LinguisticVariable,
) -> Result<(), LineError> {
    for (i, (term, &(var_col, label_col))) in rule.antecedent.iter().zip(&spans.terms).enumerate() {
        let Some(var) = inputs.iter().find(|v| v.name() == term.variable) else {
            return err(var_col, format!("unknown variable `{}`", term.variable));
        };
        if rule.antecedent[..i]
            .iter()
            .any(|t| t.variable == term.variable)
        {
            return err(
                var_col,
                format!("variable `{}` appears twice in this rule", term.variable),
            );
        }
        if let LabelRef::Label(l) = &term.label {
            if var.label_index(l).is_none() {
                return err(
                    label_col,
                    format!("unknown label `{l}` for variable `{}`", term.variable),
                );
            }
        }
    }
    if rule.antecedent.iter().all(|t| t.label == LabelRef::Any) {
        return err(
            spans.terms[0].1,
            "rule needs at least one concrete antecedent label",
        );
    }
    if rule.consequent.variable != output.name() {
        return err(
            spans.consequent.0,
            format!(
                "unknown variable `{}`: the output variable is `{}`",
                rule.consequent.variable,
                output.name()
            ),
        );
    }
    if output.label_index(&rule.consequent.label).is_none() {
        return err(
            spans.consequent.1,
            format!(
                "unknown label `{}` for variable `{}`",
                rule.consequent.label,
                output.name()
            ),
        );
    }
    Ok(())
}

/// Parses a rule document against a stage's variables.
///
/// All line errors are collected before failing. A repeated antecedent pattern
/// replaces the earlier rule and raises a warning, or an error in strict mode.
pub fn parse_rules(
    text: &str,
    inputs: &[LinguisticVariable],
    output: &LinguisticVariable,
    options: ParseOptions,
) -> Result<ParsedRules, RuleError> {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let mut rules: Vec<(Rule, usize)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let parsed = lex(line).and_then(|tokens| {
            if tokens.is_empty() {
                return Ok(None);
            }
            let (rule, spans) = parse_line(line, &tokens)?;
            check_names(&rule, &spans, inputs, output)?;
            Ok(Some(rule))
        });
        match parsed {
            Ok(None) => {}
            Ok(Some(rule)) => {
                if let Some(pos) = rules
                    .iter()
                    .position(|(r, _)| r.pattern() == rule.pattern())
                {
                    let first_line = rules[pos].1;
                    let diag = Diagnostic {
                        severity: if options.strict {
                            Severity::Error
                        } else {
                            Severity::Warning
                        },
                        line: line_no,
                        column: 1,
                        message: format!(
                            "duplicate antecedent pattern (first seen on line {first_line})"
                        ),
                    };
                    if options.strict {
                        errors.push(diag);
                    } else {
                        warnings.push(diag);
                        rules.remove(pos);
                    }
                }
                rules.push((rule, line_no));
            }
            Err(e) => errors.push(Diagnostic {
                severity: Severity::Error,
                line: line_no,
                column: e.column,
                message: e.message,
            }),
        }
    }
    if errors.is_empty() && rules.is_empty() {
        errors.push(Diagnostic {
            severity: Severity::Error,
            line: 1,
            column: 1,
            message: "no rules".into(),
        });
    }
    if !errors.is_empty() {
        return Err(RuleError::Dsl(errors));
    }
    Ok(ParsedRules {
        rules: RuleBase {
            rules: rules.into_iter().map(|(r, _)| r).collect(),
            source: RuleSource::Parsed,
        },
        warnings,
    })
}

/// One rule per line; unit weights are left implicit.
pub fn render_rules(rb: &RuleBase) -> String {
    let mut out = String::new();
    for rule in &rb.rules {
        out.push_str(&rule.to_string());
        out.push('\n');
    }
    out
}
