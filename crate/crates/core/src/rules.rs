//! Rules, rule bases and the weighted-mean rule generator.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::Diagnostic;
use crate::fuzzy::LinguisticVariable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error("unknown input variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown label `{label}` for variable `{variable}`")]
    UnknownLabel { variable: String, label: String },
    #[error("rule consequent names `{found}` but the output variable is `{expected}`")]
    WrongOutput { expected: String, found: String },
    #[error("variable `{0}` appears twice in one antecedent")]
    RepeatedVariable(String),
    #[error("rule has no concrete antecedent term")]
    AllWildcards,
    #[error("rule weight {0} is outside (0, 1]")]
    InvalidWeight(f64),
    #[error("input `{variable}` has {found} labels; the generator needs exactly 3")]
    InputArity { variable: String, found: usize },
    #[error(
        "output `{variable}` has {found} labels; the generator needs an odd count of at least 3"
    )]
    OutputArity { variable: String, found: usize },
    #[error("weight profile: {0}")]
    InvalidWeights(String),
    #[error("{}", render_diagnostics(.0))]
    Dsl(Vec<Diagnostic>),
}

fn render_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Right-hand side of an antecedent term.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LabelRef {
    Label(String),
    Any,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub variable: String,
    pub label: LabelRef,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Consequent {
    pub variable: String,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub antecedent: Vec<Term>,
    pub consequent: Consequent,
    pub weight: f64,
}

impl Rule {
    /// Concrete (non-wildcard) terms keyed by variable; rules with equal
    /// patterns fire on exactly the same inputs.
    pub fn pattern(&self) -> BTreeMap<&str, &str> {
        self.antecedent
            .iter()
            .filter_map(|t| match &t.label {
                LabelRef::Label(l) => Some((t.variable.as_str(), l.as_str())),
                LabelRef::Any => None,
            })
            .collect()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IF ")?;
        for (i, term) in self.antecedent.iter().enumerate() {
            if i > 0 {
                write!(f, " AND ")?;
            }
            match &term.label {
                LabelRef::Label(l) => write!(f, "{} IS {}", term.variable, l)?,
                LabelRef::Any => write!(f, "{} IS *", term.variable)?,
            }
        }
        write!(
            f,
            " THEN {} IS {}",
            self.consequent.variable, self.consequent.label
        )?;
        if self.weight != 1.0 {
            write!(f, " WITH {}", self.weight)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleSource {
    Generated,
    Parsed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleBase {
    pub rules: Vec<Rule>,
    pub source: RuleSource,
}

impl RuleBase {
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Checks every name against the stage's variables.
    pub fn validate(
        &self,
        inputs: &[LinguisticVariable],
        output: &LinguisticVariable,
    ) -> Result<(), RuleError> {
        self.rules
            .iter()
            .try_for_each(|r| validate_rule(r, inputs, output))
    }
}

pub(crate) fn validate_rule(
    rule: &Rule,
    inputs: &[LinguisticVariable],
    output: &LinguisticVariable,
) -> Result<(), RuleError> {
    let mut seen: Vec<&str> = Vec::new();
    for term in &rule.antecedent {
        let var = inputs
            .iter()
            .find(|v| v.name() == term.variable)
            .ok_or_else(|| RuleError::UnknownVariable(term.variable.clone()))?;
        if seen.contains(&term.variable.as_str()) {
            return Err(RuleError::RepeatedVariable(term.variable.clone()));
        }
        seen.push(&term.variable);
        if let LabelRef::Label(label) = &term.label {
            if var.label_index(label).is_none() {
                return Err(RuleError::UnknownLabel {
                    variable: term.variable.clone(),
                    label: label.clone(),
                });
            }
        }
    }
    if rule.antecedent.iter().all(|t| t.label == LabelRef::Any) {
        return Err(RuleError::AllWildcards);
    }
    if rule.consequent.variable != output.name() {
        return Err(RuleError::WrongOutput {
            expected: output.name().to_string(),
            found: rule.consequent.variable.clone(),
        });
    }
    if output.label_index(&rule.consequent.label).is_none() {
        return Err(RuleError::UnknownLabel {
            variable: rule.consequent.variable.clone(),
            label: rule.consequent.label.clone(),
        });
    }
    if !(rule.weight > 0.0 && rule.weight <= 1.0) {
        return Err(RuleError::InvalidWeight(rule.weight));
    }
    Ok(())
}

/// Non-negative importance weights per input, normalised to sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightProfile {
    weights: Vec<(String, f64)>,
}

impl WeightProfile {
    pub fn new<I, S>(weights: I) -> Result<Self, RuleError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let raw: Vec<(String, f64)> = weights.into_iter().map(|(n, w)| (n.into(), w)).collect();
        for (i, (name, w)) in raw.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(RuleError::InvalidWeights(format!(
                    "weight {w} for `{name}` must be finite and non-negative"
                )));
            }
            if raw[..i].iter().any(|(n, _)| n == name) {
                return Err(RuleError::InvalidWeights(format!("`{name}` listed twice")));
            }
        }
        let total: f64 = raw.iter().map(|(_, w)| w).sum();
        if total <= 0.0 {
            return Err(RuleError::InvalidWeights("all weights are zero".into()));
        }
        Ok(WeightProfile {
            weights: raw.into_iter().map(|(n, w)| (n, w / total)).collect(),
        })
    }

    pub fn equal<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, RuleError> {
        WeightProfile::new(names.into_iter().map(|n| (n, 1.0)))
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.weights
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, w)| *w)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.weights.iter().map(|(n, w)| (n.as_str(), *w))
    }
}

/// Index of the output label whose peak is nearest `value`; exact ties go to
/// the label nearer the middle of the partition, which keeps mirrored
/// antecedent patterns mapped to mirrored consequents.
pub fn nearest_label_toward_middle(peaks: &[f64], value: f64) -> usize {
    const TIE: f64 = 1e-9;
    let middle = (peaks.len() - 1) as f64 / 2.0;
    let mut best = 0;
    for (j, &p) in peaks.iter().enumerate().skip(1) {
        let d = (value - p).abs();
        let best_d = (value - peaks[best]).abs();
        if d < best_d - TIE
            || ((d - best_d).abs() <= TIE
                && (j as f64 - middle).abs() < (best as f64 - middle).abs())
        {
            best = j;
        }
    }
    best
}

/// Builds the complete rule base over every combination of input labels.
///
/// Each input label stands for the crisp value at its peak; the consequent is
/// the output label nearest the weighted mean of those values. Patterns are
/// enumerated with the first input varying slowest.
pub fn generate_rulebase(
    inputs: &[LinguisticVariable],
    weights: &WeightProfile,
    output: &LinguisticVariable,
) -> Result<RuleBase, RuleError> {
    for var in inputs {
        if var.labels().len() != 3 {
            return Err(RuleError::InputArity {
                variable: var.name().to_string(),
                found: var.labels().len(),
            });
        }
    }
    let n_out = output.labels().len();
    if n_out < 3 || n_out.is_multiple_of(2) {
        return Err(RuleError::OutputArity {
            variable: output.name().to_string(),
            found: n_out,
        });
    }
    if inputs.is_empty() {
        return Err(RuleError::InvalidWeights("no inputs to weight".into()));
    }
    let mut w = Vec::with_capacity(inputs.len());
    for var in inputs {
        let wi = weights.get(var.name()).ok_or_else(|| {
            RuleError::InvalidWeights(format!("no weight for input `{}`", var.name()))
        })?;
        w.push(wi);
    }
    if let Some((extra, _)) = weights
        .iter()
        .find(|(n, _)| !inputs.iter().any(|v| v.name() == *n))
    {
        return Err(RuleError::InvalidWeights(format!(
            "weight given for `{extra}`, which is not an input"
        )));
    }
    // Re-normalise over the inputs actually present.
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(RuleError::InvalidWeights("all weights are zero".into()));
    }

    let out_peaks: Vec<f64> = output.labels().iter().map(|l| l.mf.peak()).collect();
    let k = inputs.len();
    let count = 3usize.pow(k as u32);
    let mut rules = Vec::with_capacity(count);
    let mut digits = vec![0usize; k];
    for _ in 0..count {
        let mean: f64 = digits
            .iter()
            .zip(inputs)
            .zip(&w)
            .map(|((&d, var), &wi)| wi * var.labels()[d].mf.peak())
            .sum::<f64>()
            / total;
        let j = nearest_label_toward_middle(&out_peaks, mean);
        rules.push(Rule {
            antecedent: digits
                .iter()
                .zip(inputs)
                .map(|(&d, var)| Term {
                    variable: var.name().to_string(),
                    label: LabelRef::Label(var.labels()[d].name.clone()),
                })
                .collect(),
            consequent: Consequent {
                variable: output.name().to_string(),
                label: output.labels()[j].name.clone(),
            },
            weight: 1.0,
        });
        // odometer, last input fastest
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < 3 {
                break;
            }
            *d = 0;
        }
    }
    Ok(RuleBase {
        rules,
        source: RuleSource::Generated,
    })
}
