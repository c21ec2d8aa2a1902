//! Membership functions, linguistic variables and sampled fuzzy sets.
//!
//! Everything here is an immutable value; the Mamdani stage in
//! [`crate::inference`] is built entirely out of these pieces.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FuzzyError {
    #[error("invalid membership function: {0}")]
    InvalidShape(String),
    #[error("invalid universe [{lo}, {hi}]: lower bound must be below upper bound")]
    InvalidUniverse { lo: f64, hi: f64 },
    #[error("variable `{variable}`: {message}")]
    InvalidVariable { variable: String, message: String },
    #[error("value {value} is outside the universe [{lo}, {hi}] of variable `{variable}`")]
    OutOfUniverse {
        variable: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("sampled sets do not share a universe and resolution")]
    MismatchedSets,
    #[error("no activated consequents")]
    NoConsequents,
    #[error("empty aggregate; no rule fired")]
    EmptyAggregate,
    #[error("activation {0} is outside [0, 1]")]
    InvalidActivation(f64),
}

/// Closed interval of admissible crisp values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Universe {
    lo: f64,
    hi: f64,
}

impl Universe {
    pub fn new(lo: f64, hi: f64) -> Result<Self, FuzzyError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(FuzzyError::InvalidUniverse { lo, hi });
        }
        Ok(Universe { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// `i`-th point of an evenly spaced grid of `n` points; both ends are exact.
    pub fn grid_point(&self, i: usize, n: usize) -> f64 {
        if i == 0 {
            self.lo
        } else if i + 1 == n {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * (i as f64 / (n - 1) as f64)
        }
    }
}

/// Piecewise-linear membership function.
///
/// A triangle is a trapezoid with a single-point core, so both shapes share
/// one evaluation path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum MembershipFunction {
    Triangular { a: f64, b: f64, c: f64 },
    Trapezoidal { a: f64, b: f64, c: f64, d: f64 },
}

impl MembershipFunction {
    pub fn triangular(a: f64, b: f64, c: f64) -> Result<Self, FuzzyError> {
        if ![a, b, c].iter().all(|v| v.is_finite()) || !(a <= b && b <= c && a < c) {
            return Err(FuzzyError::InvalidShape(format!(
                "triangular({a}, {b}, {c}) requires a <= b <= c and a < c"
            )));
        }
        Ok(MembershipFunction::Triangular { a, b, c })
    }

    pub fn trapezoidal(a: f64, b: f64, c: f64, d: f64) -> Result<Self, FuzzyError> {
        if ![a, b, c, d].iter().all(|v| v.is_finite()) || !(a <= b && b <= c && c <= d && a < d) {
            return Err(FuzzyError::InvalidShape(format!(
                "trapezoidal({a}, {b}, {c}, {d}) requires a <= b <= c <= d and a < d"
            )));
        }
        Ok(MembershipFunction::Trapezoidal { a, b, c, d })
    }

    /// Breakpoints `(a, b, c, d)`; triangles repeat their peak.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        match *self {
            MembershipFunction::Triangular { a, b, c } => (a, b, b, c),
            MembershipFunction::Trapezoidal { a, b, c, d } => (a, b, c, d),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        let (a, _, _, d) = self.corners();
        (a, d)
    }

    /// Midpoint of the region where membership is 1.
    pub fn peak(&self) -> f64 {
        let (_, b, c, _) = self.corners();
        0.5 * (b + c)
    }

    pub fn membership(&self, x: f64) -> f64 {
        let (a, b, c, d) = self.corners();
        if x < a || x > d {
            0.0
        } else if x >= b && x <= c {
            1.0
        } else if x < b {
            (x - a) / (b - a)
        } else {
            (d - x) / (d - c)
        }
    }
}

pub fn membership(mf: &MembershipFunction, x: f64) -> f64 {
    mf.membership(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub name: String,
    pub mf: MembershipFunction,
}

/// A named universe with an ordered list of labelled fuzzy sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinguisticVariable {
    name: String,
    universe: Universe,
    labels: Vec<Label>,
}

/// Labels of the three-set input partition, lowest first.
pub const INPUT_LABELS: [&str; 3] = ["failure", "neutral", "success"];

fn output_label_names(n: usize) -> Vec<String> {
    let named: &[&str] = match n {
        3 => &["low", "medium", "high"],
        5 => &["very_low", "low", "medium", "high", "very_high"],
        7 => &[
            "extremely_low",
            "very_low",
            "low",
            "medium",
            "high",
            "very_high",
            "extremely_high",
        ],
        _ => &[],
    };
    if named.is_empty() {
        (1..=n).map(|i| format!("level_{i}")).collect()
    } else {
        named.iter().map(|s| s.to_string()).collect()
    }
}

impl LinguisticVariable {
    pub fn new(
        name: impl Into<String>,
        universe: Universe,
        labels: Vec<Label>,
    ) -> Result<Self, FuzzyError> {
        let name = name.into();
        let invalid = |message: String| FuzzyError::InvalidVariable {
            variable: name.clone(),
            message,
        };
        if labels.is_empty() {
            return Err(invalid("at least one label is required".into()));
        }
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].iter().any(|l| l.name == label.name) {
                return Err(invalid(format!("duplicate label `{}`", label.name)));
            }
            let (a, d) = label.mf.support();
            if a < universe.lo() || d > universe.hi() {
                return Err(invalid(format!(
                    "support [{a}, {d}] of label `{}` leaves the universe [{}, {}]",
                    label.name,
                    universe.lo(),
                    universe.hi()
                )));
            }
        }
        // Between consecutive breakpoints every membership function is linear,
        // so checking breakpoints and the midpoints between them is exhaustive.
        let mut points: Vec<f64> = vec![universe.lo(), universe.hi()];
        for label in &labels {
            let (a, b, c, d) = label.mf.corners();
            points.extend([a, b, c, d]);
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        let mids: Vec<f64> = points.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        for x in points.iter().chain(&mids) {
            if universe.contains(*x) && labels.iter().all(|l| l.mf.membership(*x) <= 0.0) {
                return Err(invalid(format!("no label covers x = {x}")));
            }
        }
        Ok(LinguisticVariable {
            name,
            universe,
            labels,
        })
    }

    /// The three-label Likert partition: failure, neutral, success.
    pub fn likert_input(name: impl Into<String>, universe: Universe) -> Self {
        let (lo, mid, hi) = (universe.lo(), universe.mid(), universe.hi());
        let shapes = [(lo, lo, mid), (lo, mid, hi), (mid, hi, hi)];
        let labels = INPUT_LABELS
            .iter()
            .zip(shapes)
            .map(|(n, (a, b, c))| Label {
                name: n.to_string(),
                mf: MembershipFunction::Triangular { a, b, c },
            })
            .collect();
        LinguisticVariable::new(name, universe, labels).expect("likert input partition is valid")
    }

    /// `n` evenly spaced triangular labels with shouldered extremes.
    pub fn likert_output(name: impl Into<String>, universe: Universe, n: usize) -> Self {
        assert!(n >= 2, "an output partition needs at least two labels");
        let peaks: Vec<f64> = (0..n).map(|i| universe.grid_point(i, n)).collect();
        let labels = output_label_names(n)
            .into_iter()
            .enumerate()
            .map(|(i, name)| {
                let a = if i == 0 { peaks[0] } else { peaks[i - 1] };
                let c = if i + 1 == n {
                    peaks[n - 1]
                } else {
                    peaks[i + 1]
                };
                Label {
                    name,
                    mf: MembershipFunction::Triangular { a, b: peaks[i], c },
                }
            })
            .collect();
        LinguisticVariable::new(name, universe, labels).expect("likert output partition is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn universe(&self) -> Universe {
        self.universe
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.name == name)
    }

    /// Memberships of `x` in every label, in label order.
    pub fn fuzzify(&self, x: f64) -> Result<Vec<f64>, FuzzyError> {
        if !self.universe.contains(x) {
            return Err(FuzzyError::OutOfUniverse {
                variable: self.name.clone(),
                value: x,
                lo: self.universe.lo(),
                hi: self.universe.hi(),
            });
        }
        Ok(self.labels.iter().map(|l| l.mf.membership(x)).collect())
    }
}

/// Fuzzy AND.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AndOp {
    #[default]
    Min,
    Product,
}

impl AndOp {
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            AndOp::Min => a.min(b),
            AndOp::Product => a * b,
        }
    }
}

/// Fuzzy OR. The rule grammar has no disjunction, so this is only reachable
/// through the library surface.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrOp {
    #[default]
    Max,
    ProbabilisticSum,
}

impl OrOp {
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            OrOp::Max => a.max(b),
            OrOp::ProbabilisticSum => a + b - a * b,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Implication {
    #[default]
    MinClip,
    ProductScale,
}

impl Implication {
    pub fn apply(self, activation: f64, mu: f64) -> f64 {
        match self {
            Implication::MinClip => mu.min(activation),
            Implication::ProductScale => mu * activation,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Max,
    SumClipped,
}

impl Aggregation {
    /// Folds one more consequent into an accumulator; call [`Self::finish`] afterwards.
    pub fn combine(self, acc: f64, mu: f64) -> f64 {
        match self {
            Aggregation::Max => acc.max(mu),
            Aggregation::SumClipped => acc + mu,
        }
    }

    pub fn finish(self, acc: f64) -> f64 {
        match self {
            Aggregation::Max => acc,
            Aggregation::SumClipped => acc.min(1.0),
        }
    }
}

/// Operator choices for one Mamdani stage. The default is min/max/min-clip/max.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorSet {
    #[serde(rename = "and", default)]
    pub and_op: AndOp,
    #[serde(rename = "or", default)]
    pub or_op: OrOp,
    #[serde(default)]
    pub implication: Implication,
    #[serde(default)]
    pub aggregation: Aggregation,
}

/// A fuzzy set discretised on an evenly spaced grid spanning its universe.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFuzzySet {
    universe: Universe,
    mu: Vec<f64>,
}

impl SampledFuzzySet {
    pub fn zeros(universe: Universe, resolution: usize) -> Self {
        assert!(resolution >= 2, "resolution must be at least 2");
        SampledFuzzySet {
            universe,
            mu: vec![0.0; resolution],
        }
    }

    pub fn sample(mf: &MembershipFunction, universe: Universe, resolution: usize) -> Self {
        assert!(resolution >= 2, "resolution must be at least 2");
        let mu = (0..resolution)
            .map(|i| mf.membership(universe.grid_point(i, resolution)))
            .collect();
        SampledFuzzySet { universe, mu }
    }

    /// Builds a set from raw grid values; each must lie in [0, 1].
    pub fn from_values(universe: Universe, mu: Vec<f64>) -> Result<Self, FuzzyError> {
        if mu.len() < 2 {
            return Err(FuzzyError::MismatchedSets);
        }
        if let Some(&bad) = mu.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(FuzzyError::InvalidActivation(bad));
        }
        Ok(SampledFuzzySet { universe, mu })
    }

    pub fn universe(&self) -> Universe {
        self.universe
    }

    pub fn resolution(&self) -> usize {
        self.mu.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.mu
    }

    pub fn x(&self, i: usize) -> f64 {
        self.universe.grid_point(i, self.mu.len())
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.mu.iter().enumerate().map(|(i, &m)| (self.x(i), m))
    }

    /// Applies implication with the given activation pointwise.
    pub fn clip(&self, activation: f64, implication: Implication) -> Result<Self, FuzzyError> {
        if !(0.0..=1.0).contains(&activation) {
            return Err(FuzzyError::InvalidActivation(activation));
        }
        Ok(SampledFuzzySet {
            universe: self.universe,
            mu: self
                .mu
                .iter()
                .map(|&m| implication.apply(activation, m))
                .collect(),
        })
    }

    /// Trapezoidal-rule integral of μ over the universe.
    pub fn mass(&self) -> f64 {
        let (mass, _) = self.moments();
        mass
    }

    fn moments(&self) -> (f64, f64) {
        let n = self.mu.len();
        let h = (self.universe.hi() - self.universe.lo()) / (n - 1) as f64;
        let mut mass = 0.0;
        let mut moment = 0.0;
        for (i, &m) in self.mu.iter().enumerate() {
            let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
            mass += w * m;
            moment += w * m * self.x(i);
        }
        (mass * h, moment * h)
    }

    /// Centre of gravity, ∫x·μ / ∫μ by the trapezoidal rule.
    pub fn centroid(&self) -> Result<f64, FuzzyError> {
        let (mass, moment) = self.moments();
        if mass <= 0.0 {
            return Err(FuzzyError::EmptyAggregate);
        }
        Ok((moment / mass).clamp(self.universe.lo(), self.universe.hi()))
    }

    fn compatible(&self, other: &SampledFuzzySet) -> bool {
        self.universe == other.universe && self.mu.len() == other.mu.len()
    }
}

/// Pointwise aggregation of consequent sets.
pub fn aggregate(
    sets: &[SampledFuzzySet],
    aggregation: Aggregation,
) -> Result<SampledFuzzySet, FuzzyError> {
    let (first, rest) = sets.split_first().ok_or(FuzzyError::NoConsequents)?;
    if rest.iter().any(|s| !first.compatible(s)) {
        return Err(FuzzyError::MismatchedSets);
    }
    let mut acc = vec![0.0; first.mu.len()];
    for set in sets {
        for (a, &m) in acc.iter_mut().zip(&set.mu) {
            *a = aggregation.combine(*a, m);
        }
    }
    for a in acc.iter_mut() {
        *a = aggregation.finish(*a);
    }
    Ok(SampledFuzzySet {
        universe: first.universe,
        mu: acc,
    })
}

pub fn defuzzify_centroid(set: &SampledFuzzySet) -> Result<f64, FuzzyError> {
    set.centroid()
}
