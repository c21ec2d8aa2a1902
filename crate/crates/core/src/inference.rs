//! One Mamdani stage: fuzzify, fire, clip, aggregate, defuzzify.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy::{FuzzyError, LinguisticVariable, OperatorSet, SampledFuzzySet, Universe};
use crate::rules::{LabelRef, RuleBase, RuleError};

pub const DEFAULT_RESOLUTION: usize = 1001;
pub const MIN_RESOLUTION: usize = 101;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("resolution {0} must be odd and at least {MIN_RESOLUTION}")]
    Resolution(usize),
    #[error("duplicate input variable `{0}`")]
    DuplicateInput(String),
    #[error("stage has no inputs")]
    NoInputs,
    #[error("rule base: {0}")]
    Rules(#[from] RuleError),
    #[error("missing input `{0}`")]
    MissingInput(String),
    #[error("unexpected input `{0}`")]
    UnexpectedInput(String),
    #[error("expected {expected} inputs, got {found}")]
    InputCount { expected: usize, found: usize },
    #[error("degenerate output partition: lowest and highest labels share centroid {0}")]
    DegenerateCalibration(f64),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
}

/// Description of one stage before compilation.
#[derive(Clone, Debug, PartialEq)]
pub struct FisConfig {
    pub inputs: Vec<LinguisticVariable>,
    pub output: LinguisticVariable,
    pub rules: RuleBase,
    pub ops: OperatorSet,
    pub resolution: usize,
}

/// Raw centroids of the extreme output labels at full activation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub c_min: f64,
    pub c_max: f64,
}

impl Calibration {
    pub fn rescale(&self, x: f64, universe: Universe) -> f64 {
        rescale(x, self.c_min, self.c_max, universe)
    }
}

/// Affine map taking `c_min` to `lo` and `c_max` to `hi`, clamped to the universe.
pub fn rescale(x: f64, c_min: f64, c_max: f64, universe: Universe) -> f64 {
    let (lo, hi) = (universe.lo(), universe.hi());
    (lo + (hi - lo) * (x - c_min) / (c_max - c_min)).clamp(lo, hi)
}

pub fn calibrate(config: &FisConfig) -> Result<Calibration, InferenceError> {
    let labels = config.output.labels();
    let u = config.output.universe();
    let centroid =
        |i: usize| SampledFuzzySet::sample(&labels[i].mf, u, config.resolution).centroid();
    let c_min = centroid(0)?;
    let c_max = centroid(labels.len() - 1)?;
    if c_min >= c_max {
        return Err(InferenceError::DegenerateCalibration(c_min));
    }
    Ok(Calibration { c_min, c_max })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleFiring {
    /// Position of the rule in the stage's rule base.
    pub rule: usize,
    pub strength: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiringTrace {
    /// One entry per rule, in rule-base order; unfired rules carry strength 0.
    pub firings: Vec<RuleFiring>,
    pub aggregate_mass: f64,
    pub crisp_output: f64,
}

impl FiringTrace {
    pub fn fired(&self) -> impl Iterator<Item = &RuleFiring> {
        self.firings.iter().filter(|f| f.strength > 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Inference {
    pub output: f64,
    pub trace: FiringTrace,
}

#[derive(Clone, Debug)]
struct CompiledRule {
    /// (input index, label index); wildcards are dropped.
    terms: Vec<(usize, usize)>,
    consequent: usize,
    weight: f64,
}

/// A validated, calibrated stage ready for evaluation.
#[derive(Clone, Debug)]
pub struct Fis {
    config: FisConfig,
    compiled: Vec<CompiledRule>,
    consequents: Vec<SampledFuzzySet>,
    calibration: Calibration,
}

impl Fis {
    pub fn new(config: FisConfig) -> Result<Self, InferenceError> {
        if config.resolution < MIN_RESOLUTION || config.resolution.is_multiple_of(2) {
            return Err(InferenceError::Resolution(config.resolution));
        }
        if config.inputs.is_empty() {
            return Err(InferenceError::NoInputs);
        }
        for (i, v) in config.inputs.iter().enumerate() {
            if config.inputs[..i].iter().any(|w| w.name() == v.name()) {
                return Err(InferenceError::DuplicateInput(v.name().to_string()));
            }
        }
        config.rules.validate(&config.inputs, &config.output)?;
        if config.rules.is_empty() {
            return Err(RuleError::Dsl(vec![crate::dsl::Diagnostic {
                severity: crate::dsl::Severity::Error,
                line: 1,
                column: 1,
                message: "no rules".into(),
            }])
            .into());
        }

        let compiled = config
            .rules
            .rules
            .iter()
            .map(|rule| {
                let terms = rule
                    .antecedent
                    .iter()
                    .filter_map(|t| {
                        let vi = config.inputs.iter().position(|v| v.name() == t.variable)?;
                        match &t.label {
                            LabelRef::Label(l) => Some((vi, config.inputs[vi].label_index(l)?)),
                            LabelRef::Any => None,
                        }
                    })
                    .collect();
                CompiledRule {
                    terms,
                    consequent: config
                        .output
                        .label_index(&rule.consequent.label)
                        .expect("validated consequent"),
                    weight: rule.weight,
                }
            })
            .collect();
        let u = config.output.universe();
        let consequents = config
            .output
            .labels()
            .iter()
            .map(|l| SampledFuzzySet::sample(&l.mf, u, config.resolution))
            .collect();
        let calibration = calibrate(&config)?;
        Ok(Fis {
            config,
            compiled,
            consequents,
            calibration,
        })
    }

    pub fn config(&self) -> &FisConfig {
        &self.config
    }

    pub fn inputs(&self) -> &[LinguisticVariable] {
        &self.config.inputs
    }

    pub fn output(&self) -> &LinguisticVariable {
        &self.config.output
    }

    pub fn rules(&self) -> &RuleBase {
        &self.config.rules
    }

    pub fn calibration(&self) -> Calibration {
        self.calibration
    }

    pub fn rescale(&self, raw: f64) -> f64 {
        self.calibration.rescale(raw, self.config.output.universe())
    }

    /// Evaluates named inputs; every declared input must be present exactly once.
    pub fn infer(&self, inputs: &BTreeMap<String, f64>) -> Result<Inference, InferenceError> {
        if let Some(extra) = inputs
            .keys()
            .find(|k| !self.config.inputs.iter().any(|v| v.name() == k.as_str()))
        {
            return Err(InferenceError::UnexpectedInput(extra.clone()));
        }
        let values = self
            .config
            .inputs
            .iter()
            .map(|v| {
                inputs
                    .get(v.name())
                    .copied()
                    .ok_or_else(|| InferenceError::MissingInput(v.name().to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.infer_values(&values)
    }

    /// Evaluates inputs given in declaration order.
    pub fn infer_values(&self, values: &[f64]) -> Result<Inference, InferenceError> {
        self.run(values).map(|(inference, _)| inference)
    }

    /// Like [`Self::infer_values`] but also returns the aggregated output set.
    pub fn infer_with_aggregate(
        &self,
        values: &[f64],
    ) -> Result<(Inference, SampledFuzzySet), InferenceError> {
        self.run(values)
    }

    fn run(&self, values: &[f64]) -> Result<(Inference, SampledFuzzySet), InferenceError> {
        if values.len() != self.config.inputs.len() {
            return Err(InferenceError::InputCount {
                expected: self.config.inputs.len(),
                found: values.len(),
            });
        }
        let memberships = self
            .config
            .inputs
            .iter()
            .zip(values)
            .map(|(v, &x)| v.fuzzify(x))
            .collect::<Result<Vec<_>, _>>()?;

        let ops = self.config.ops;
        let mut acc = vec![0.0; self.config.resolution];
        let mut firings = Vec::with_capacity(self.compiled.len());
        for (i, rule) in self.compiled.iter().enumerate() {
            let degree = rule
                .terms
                .iter()
                .map(|&(vi, li)| memberships[vi][li])
                .fold(1.0, |a, m| ops.and_op.apply(a, m));
            let strength = rule.weight * degree;
            firings.push(RuleFiring { rule: i, strength });
            if strength > 0.0 {
                let consequent = self.consequents[rule.consequent].values();
                for (a, &mu) in acc.iter_mut().zip(consequent) {
                    *a = ops
                        .aggregation
                        .combine(*a, ops.implication.apply(strength, mu));
                }
            }
        }
        for a in acc.iter_mut() {
            *a = ops.aggregation.finish(*a);
        }
        let aggregate = SampledFuzzySet::from_values(self.config.output.universe(), acc)?;
        let output = aggregate.centroid()?;
        let trace = FiringTrace {
            firings,
            aggregate_mass: aggregate.mass(),
            crisp_output: output,
        };
        Ok((Inference { output, trace }, aggregate))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_rules, ParseOptions};
    use crate::fuzzy::{Aggregation, AndOp, Implication};
    use crate::rules::{generate_rulebase, WeightProfile};

    fn five() -> Universe {
        Universe::new(1.0, 5.0).unwrap()
    }

    fn generated(k: usize, weights: &[f64]) -> Fis {
        let inputs: Vec<_> = (0..k)
            .map(|i| LinguisticVariable::likert_input(format!("x{i}"), five()))
            .collect();
        let output = LinguisticVariable::likert_output("y", five(), 5);
        let wp = WeightProfile::new(
            inputs
                .iter()
                .map(|v| v.name().to_string())
                .zip(weights.iter().copied()),
        )
        .unwrap();
        let rules = generate_rulebase(&inputs, &wp, &output).unwrap();
        Fis::new(FisConfig {
            inputs,
            output,
            rules,
            ops: OperatorSet::default(),
            resolution: DEFAULT_RESOLUTION,
        })
        .unwrap()
    }

    fn single_rule(text: &str) -> Fis {
        let inputs = vec![LinguisticVariable::likert_input("a", five())];
        let output = LinguisticVariable::likert_output("y", five(), 5);
        let rules = parse_rules(text, &inputs, &output, ParseOptions::default())
            .unwrap()
            .rules;
        Fis::new(FisConfig {
            inputs,
            output,
            rules,
            ops: OperatorSet::default(),
            resolution: 1001,
        })
        .unwrap()
    }

    #[test]
    fn single_rule_at_peak_returns_full_consequent_centroid() {
        let fis = single_rule("IF a IS success THEN y IS high");
        let r = fis.infer_values(&[5.0]).unwrap();
        assert!((r.output - 4.0).abs() < 1e-9);
        assert_eq!(r.trace.firings[0].strength, 1.0);
    }

    #[test]
    fn neutral_peaks_give_midpoint() {
        let fis = generated(3, &[1.0, 1.0, 1.0]);
        let r = fis.infer_values(&[3.0, 3.0, 3.0]).unwrap();
        assert!((r.output - 3.0).abs() < 1e-6);
        assert!((fis.rescale(r.output) - 3.0).abs() < 1e-6);
    }

    #[test]
    fn calibration_constants() {
        let fis = generated(2, &[1.0, 1.0]);
        let c = fis.calibration();
        assert!((c.c_min - 4.0 / 3.0).abs() < 1e-4);
        assert!((c.c_max - 14.0 / 3.0).abs() < 1e-4);
        assert!((c.c_min + c.c_max - 6.0).abs() < 1e-6);
    }

    #[test]
    fn calibration_is_resolution_stable() {
        let a = generated(2, &[1.0, 1.0]);
        let mut cfg = a.config().clone();
        cfg.resolution = 2001;
        let b = Fis::new(cfg).unwrap();
        assert!((a.calibration().c_min - b.calibration().c_min).abs() < 1e-4);
        assert!((a.calibration().c_max - b.calibration().c_max).abs() < 1e-4);
    }

    #[test]
    fn degenerate_partition_is_rejected() {
        let cfg = FisConfig {
            inputs: vec![LinguisticVariable::likert_input("a", five())],
            output: LinguisticVariable::likert_input("y", five()),
            rules: parse_rules(
                "IF a IS success THEN y IS success",
                &[LinguisticVariable::likert_input("a", five())],
                &LinguisticVariable::likert_input("y", five()),
                ParseOptions::default(),
            )
            .unwrap()
            .rules,
            ops: OperatorSet::default(),
            resolution: 1001,
        };
        assert!(Fis::new(cfg.clone()).is_ok());
        let flat = LinguisticVariable::new(
            "y",
            five(),
            vec![crate::fuzzy::Label {
                name: "success".into(),
                mf: crate::fuzzy::MembershipFunction::trapezoidal(1.0, 1.0, 5.0, 5.0).unwrap(),
            }],
        )
        .unwrap();
        let err = Fis::new(FisConfig {
            output: flat,
            ..cfg
        })
        .unwrap_err();
        assert!(matches!(err, InferenceError::DegenerateCalibration(_)));
    }

    #[test]
    fn rescale_endpoints_and_midpoint() {
        let u = five();
        assert_eq!(rescale(4.0 / 3.0, 4.0 / 3.0, 14.0 / 3.0, u), 1.0);
        assert_eq!(rescale(14.0 / 3.0, 4.0 / 3.0, 14.0 / 3.0, u), 5.0);
        assert!((rescale(3.0, 4.0 / 3.0, 14.0 / 3.0, u) - 3.0).abs() < 1e-12);
        assert_eq!(rescale(0.0, 2.0, 4.0, u), 1.0);
        assert_eq!(rescale(9.0, 2.0, 4.0, u), 5.0);
    }

    #[test]
    fn resolution_rules() {
        let fis = generated(1, &[1.0]);
        for bad in [100, 1000, 11] {
            let mut cfg = fis.config().clone();
            cfg.resolution = bad;
            assert_eq!(Fis::new(cfg).unwrap_err(), InferenceError::Resolution(bad));
        }
    }

    #[test]
    fn named_inputs_checked() {
        let fis = generated(2, &[1.0, 1.0]);
        let mut m = BTreeMap::new();
        m.insert("x0".to_string(), 2.0);
        assert_eq!(
            fis.infer(&m).unwrap_err(),
            InferenceError::MissingInput("x1".into())
        );
        m.insert("x1".to_string(), 4.0);
        let ok = fis.infer(&m).unwrap();
        assert_eq!(ok, fis.infer_values(&[2.0, 4.0]).unwrap());
        m.insert("x9".to_string(), 4.0);
        assert_eq!(
            fis.infer(&m).unwrap_err(),
            InferenceError::UnexpectedInput("x9".into())
        );
        m.remove("x9");
        m.insert("x1".to_string(), 6.0);
        assert!(matches!(
            fis.infer(&m),
            Err(InferenceError::Fuzzy(FuzzyError::OutOfUniverse { .. }))
        ));
    }

    #[test]
    fn unfired_rule_base_is_an_error() {
        let fis = single_rule("IF a IS success THEN y IS high");
        assert_eq!(
            fis.infer_values(&[2.0]).unwrap_err(),
            InferenceError::Fuzzy(FuzzyError::EmptyAggregate)
        );
    }

    #[test]
    fn trace_records_zero_strength_rules() {
        let fis = generated(2, &[1.0, 1.0]);
        let r = fis.infer_values(&[1.0, 1.0]).unwrap();
        assert_eq!(r.trace.firings.len(), 9);
        assert_eq!(r.trace.fired().count(), 1);
        assert!(r.trace.aggregate_mass > 0.0);
        assert_eq!(r.trace.crisp_output, r.output);
    }

    #[test]
    fn rule_weight_scales_strength() {
        let fis = single_rule("IF a IS success THEN y IS high WITH 0.5");
        let r = fis.infer_values(&[4.0]).unwrap();
        assert_eq!(r.trace.firings[0].strength, 0.25);
    }

    #[test]
    fn alternative_operators() {
        let base = generated(2, &[1.0, 1.0]);
        let mut cfg = base.config().clone();
        cfg.ops.and_op = AndOp::Product;
        cfg.ops.implication = Implication::ProductScale;
        cfg.ops.aggregation = Aggregation::SumClipped;
        let alt = Fis::new(cfg).unwrap();
        let r = alt.infer_values(&[2.0, 4.0]).unwrap();
        assert!(r.trace.firings.iter().any(|f| f.strength == 0.25));
        assert!((r.output - 3.0).abs() < 1e-6);
        let lopsided = alt.infer_values(&[1.5, 4.5]).unwrap();
        assert!((1.0..=5.0).contains(&lopsided.output));
    }

    #[test]
    fn wildcard_terms_do_not_reduce_strength() {
        let inputs = vec![
            LinguisticVariable::likert_input("a", five()),
            LinguisticVariable::likert_input("b", five()),
        ];
        let output = LinguisticVariable::likert_output("y", five(), 5);
        let rules = parse_rules(
            "IF a IS success AND b IS * THEN y IS high",
            &inputs,
            &output,
            ParseOptions::default(),
        )
        .unwrap()
        .rules;
        let fis = Fis::new(FisConfig {
            inputs,
            output,
            rules,
            ops: OperatorSet::default(),
            resolution: 1001,
        })
        .unwrap();
        assert_eq!(
            fis.infer_values(&[5.0, 1.0]).unwrap().trace.firings[0].strength,
            1.0
        );
    }
}
