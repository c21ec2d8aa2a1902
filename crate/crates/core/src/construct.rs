//! The project-success construct: 14 Likert items, three dimension stages
//! and one top stage.
//!
//! A construct is described by a [`ConstructFile`] (TOML on disk) and compiled
//! into an immutable [`ConstructConfig`]. Dimension scores are defuzzified,
//! rescaled onto the Likert scale and then fuzzified again by the top stage.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{parse_rules, Diagnostic, ParseOptions};
use crate::fuzzy::{LinguisticVariable, OperatorSet, Universe};
use crate::inference::{FiringTrace, Fis, FisConfig, InferenceError, DEFAULT_RESOLUTION};
use crate::rules::{generate_rulebase, RuleBase, RuleError, WeightProfile};

pub const ITEM_COUNT: usize = 14;

/// Name of the top stage's output variable.
pub const OVERALL: &str = "overall";

/// Column / variable name of a 1-based item index, e.g. `item_07`.
pub fn item_name(index: usize) -> String {
    format!("item_{index:02}")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleProfile {
    #[default]
    FivePoint,
    SevenPoint,
}

impl ScaleProfile {
    pub fn points(self) -> u8 {
        match self {
            ScaleProfile::FivePoint => 5,
            ScaleProfile::SevenPoint => 7,
        }
    }

    pub fn lo(self) -> u8 {
        1
    }

    pub fn hi(self) -> u8 {
        self.points()
    }

    pub fn mid(self) -> u8 {
        (self.lo() + self.hi()) / 2
    }

    pub fn universe(self) -> Universe {
        Universe::new(self.lo() as f64, self.hi() as f64).expect("scale bounds are ordered")
    }

    pub fn contains(self, value: u8) -> bool {
        (self.lo()..=self.hi()).contains(&value)
    }
}

impl fmt::Display for ScaleProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleProfile::FivePoint => "five_point",
            ScaleProfile::SevenPoint => "seven_point",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionKind {
    ProjectManagementSuccess,
    ProjectImpactSuccess,
    StakeholderSatisfaction,
}

impl DimensionKind {
    pub const ALL: [DimensionKind; 3] = [
        DimensionKind::ProjectManagementSuccess,
        DimensionKind::ProjectImpactSuccess,
        DimensionKind::StakeholderSatisfaction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DimensionKind::ProjectManagementSuccess => "project_management_success",
            DimensionKind::ProjectImpactSuccess => "project_impact_success",
            DimensionKind::StakeholderSatisfaction => "stakeholder_satisfaction",
        }
    }

    pub fn index(self) -> usize {
        match self {
            DimensionKind::ProjectManagementSuccess => 0,
            DimensionKind::ProjectImpactSuccess => 1,
            DimensionKind::StakeholderSatisfaction => 2,
        }
    }
}

impl fmt::Display for DimensionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum ConstructError {
    #[error("invalid construct: {0}")]
    Invalid(String),
    #[error("stage `{stage}`: {source}")]
    Rules { stage: String, source: RuleError },
    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: String,
        source: InferenceError,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Syntax(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluationError {
    #[error("response has {0} items, expected {ITEM_COUNT}")]
    ItemCount(usize),
    #[error("{} is missing", item_name(*.0))]
    MissingItem(usize),
    #[error("{}: value {value} out of range {lo}..{hi}", item_name(*item))]
    ScaleMismatch {
        item: usize,
        value: u8,
        lo: u8,
        hi: u8,
    },
    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: String,
        source: InferenceError,
    },
}

/// One respondent's answers; `None` marks a missing item.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikertResponse {
    pub id: String,
    pub items: Vec<Option<u8>>,
}

impl LikertResponse {
    pub fn new(id: impl Into<String>, items: Vec<Option<u8>>) -> Result<Self, EvaluationError> {
        if items.len() != ITEM_COUNT {
            return Err(EvaluationError::ItemCount(items.len()));
        }
        Ok(LikertResponse {
            id: id.into(),
            items,
        })
    }

    pub fn complete(id: impl Into<String>, items: [u8; ITEM_COUNT]) -> Self {
        LikertResponse {
            id: id.into(),
            items: items.iter().map(|&v| Some(v)).collect(),
        }
    }

    pub fn uniform(id: impl Into<String>, value: u8) -> Self {
        LikertResponse::complete(id, [value; ITEM_COUNT])
    }

    /// Replaces missing items with the scale midpoint.
    pub fn impute_neutral(&self, scale: ScaleProfile) -> LikertResponse {
        LikertResponse {
            id: self.id.clone(),
            items: self
                .items
                .iter()
                .map(|v| Some(v.unwrap_or(scale.mid())))
                .collect(),
        }
    }

    /// Item x becomes lo + hi − x.
    pub fn mirror(&self, scale: ScaleProfile) -> LikertResponse {
        LikertResponse {
            id: self.id.clone(),
            items: self
                .items
                .iter()
                .map(|v| v.map(|x| scale.lo() + scale.hi() - x))
                .collect(),
        }
    }

    fn values(&self, scale: ScaleProfile) -> Result<Vec<u8>, EvaluationError> {
        if self.items.len() != ITEM_COUNT {
            return Err(EvaluationError::ItemCount(self.items.len()));
        }
        self.items
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let v = v.ok_or(EvaluationError::MissingItem(i + 1))?;
                if !scale.contains(v) {
                    return Err(EvaluationError::ScaleMismatch {
                        item: i + 1,
                        value: v,
                        lo: scale.lo(),
                        hi: scale.hi(),
                    });
                }
                Ok(v)
            })
            .collect()
    }
}

/// Classical Likert score: the arithmetic mean of all items.
pub fn baseline_mean(r: &LikertResponse) -> Result<f64, EvaluationError> {
    if r.items.len() != ITEM_COUNT {
        return Err(EvaluationError::ItemCount(r.items.len()));
    }
    let mut sum = 0.0;
    for (i, v) in r.items.iter().enumerate() {
        sum += v.ok_or(EvaluationError::MissingItem(i + 1))? as f64;
    }
    Ok(sum / ITEM_COUNT as f64)
}

/// On-disk description of a construct.
///
/// Rule bases are generated from the weights unless `rules` (a path relative
/// to the config file) or `rules_inline` supplies a rule document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructFile {
    pub scale: ScaleProfile,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Label count of every stage output; defaults to the number of scale points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_labels: Option<usize>,
    #[serde(default)]
    pub operators: OperatorSet,
    pub dimension_weights: BTreeMap<DimensionKind, f64>,
    #[serde(rename = "dimension")]
    pub dimensions: Vec<DimensionFile>,
    #[serde(default)]
    pub top: RuleSourceFile,
}

fn default_resolution() -> usize {
    DEFAULT_RESOLUTION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionFile {
    pub name: DimensionKind,
    /// 1-based item indices.
    pub items: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules_inline: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSourceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules_inline: Option<String>,
}

impl ConstructFile {
    /// 5/5/4 item split, equal item weights, dimension weights 0.2/0.5/0.3.
    pub fn default_for(scale: ScaleProfile) -> Self {
        let split: [(DimensionKind, std::ops::RangeInclusive<usize>); 3] = [
            (DimensionKind::ProjectManagementSuccess, 1..=5),
            (DimensionKind::ProjectImpactSuccess, 6..=10),
            (DimensionKind::StakeholderSatisfaction, 11..=14),
        ];
        ConstructFile {
            scale,
            resolution: DEFAULT_RESOLUTION,
            output_labels: None,
            operators: OperatorSet::default(),
            dimension_weights: BTreeMap::from([
                (DimensionKind::ProjectManagementSuccess, 0.2),
                (DimensionKind::ProjectImpactSuccess, 0.5),
                (DimensionKind::StakeholderSatisfaction, 0.3),
            ]),
            dimensions: split
                .into_iter()
                .map(|(name, items)| DimensionFile {
                    name,
                    items: items.collect(),
                    item_weights: None,
                    rules: None,
                    rules_inline: None,
                })
                .collect(),
            top: RuleSourceFile::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConstructError> {
        toml::from_str(text).map_err(|e| ConstructError::Syntax(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String, ConstructError> {
        toml::to_string_pretty(self).map_err(|e| ConstructError::Syntax(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConstructError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConstructError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        ConstructFile::from_toml_str(&text)
    }
}

#[derive(Clone, Debug)]
pub struct DimensionSpec {
    pub kind: DimensionKind,
    /// 1-based item indices, in stage input order.
    pub items: Vec<usize>,
    pub item_weights: WeightProfile,
    pub fis: Fis,
}

/// A compiled, calibrated construct. Immutable; share freely across threads.
#[derive(Clone, Debug)]
pub struct ConstructConfig {
    scale: ScaleProfile,
    dimensions: Vec<DimensionSpec>,
    dimension_weights: WeightProfile,
    top: Fis,
    file: ConstructFile,
    warnings: Vec<(String, Diagnostic)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionScore {
    pub dimension: DimensionKind,
    /// Centroid before calibration.
    pub raw: f64,
    pub score: f64,
    pub trace: FiringTrace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub id: String,
    /// In [`DimensionKind::ALL`] order.
    pub dimensions: Vec<DimensionScore>,
    pub overall_raw: f64,
    pub overall: f64,
    pub top_trace: FiringTrace,
    pub baseline: f64,
    /// overall − baseline
    pub divergence: f64,
}

impl EvaluationResult {
    pub fn dimension(&self, kind: DimensionKind) -> f64 {
        self.dimensions[kind.index()].score
    }
}

pub fn default_construct(scale: ScaleProfile) -> ConstructConfig {
    ConstructConfig::build(ConstructFile::default_for(scale), None)
        .expect("the default construct is valid")
}

fn stage_rules(
    stage: &str,
    source: &RuleSourceFile,
    base_dir: Option<&Path>,
    inputs: &[LinguisticVariable],
    output: &LinguisticVariable,
    weights: &WeightProfile,
    warnings: &mut Vec<(String, Diagnostic)>,
) -> Result<RuleBase, ConstructError> {
    let rules_err = |source| ConstructError::Rules {
        stage: stage.to_string(),
        source,
    };
    let text = match (&source.rules, &source.rules_inline) {
        (Some(_), Some(_)) => {
            return Err(ConstructError::Invalid(format!(
                "stage `{stage}` sets both `rules` and `rules_inline`"
            )))
        }
        (None, None) => return generate_rulebase(inputs, weights, output).map_err(rules_err),
        (None, Some(text)) => text.clone(),
        (Some(path), None) => {
            let full = match base_dir {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path.clone(),
            };
            std::fs::read_to_string(&full)
                .map_err(|source| ConstructError::Io { path: full, source })?
        }
    };
    let parsed = parse_rules(&text, inputs, output, ParseOptions::default()).map_err(rules_err)?;
    warnings.extend(parsed.warnings.into_iter().map(|d| (stage.to_string(), d)));
    Ok(parsed.rules)
}

impl ConstructConfig {
    /// Validates a construct description and compiles every stage.
    /// Relative rule paths resolve against `base_dir`.
    pub fn build(file: ConstructFile, base_dir: Option<&Path>) -> Result<Self, ConstructError> {
        let invalid = |m: String| Err(ConstructError::Invalid(m));
        let scale = file.scale;
        let universe = scale.universe();
        let n_out = file.output_labels.unwrap_or(scale.points() as usize);
        if n_out < 3 || n_out.is_multiple_of(2) {
            return invalid(format!(
                "output_labels must be odd and at least 3, got {n_out}"
            ));
        }

        let mut seen_items = [false; ITEM_COUNT];
        let mut by_kind: BTreeMap<DimensionKind, &DimensionFile> = BTreeMap::new();
        for dim in &file.dimensions {
            if by_kind.insert(dim.name, dim).is_some() {
                return invalid(format!("dimension `{}` is defined twice", dim.name));
            }
            if dim.items.len() < 2 {
                return invalid(format!("dimension `{}` needs at least two items", dim.name));
            }
            for &item in &dim.items {
                if !(1..=ITEM_COUNT).contains(&item) {
                    return invalid(format!("item index {item} is outside 1..{ITEM_COUNT}"));
                }
                if std::mem::replace(&mut seen_items[item - 1], true) {
                    return invalid(format!("{} is assigned more than once", item_name(item)));
                }
            }
        }
        if let Some(kind) = DimensionKind::ALL.iter().find(|k| !by_kind.contains_key(k)) {
            return invalid(format!("dimension `{kind}` is not defined"));
        }
        if let Some(i) = seen_items.iter().position(|s| !s) {
            return invalid(format!(
                "{} is not assigned to any dimension",
                item_name(i + 1)
            ));
        }

        let ops = file.operators;
        let resolution = file.resolution;
        let mut warnings = Vec::new();
        let mut dimensions = Vec::with_capacity(3);
        for kind in DimensionKind::ALL {
            let dim = by_kind[&kind];
            let names: Vec<String> = dim.items.iter().map(|&i| item_name(i)).collect();
            let item_weights = match &dim.item_weights {
                None => WeightProfile::equal(names.iter().cloned()),
                Some(w) if w.len() == names.len() => {
                    WeightProfile::new(names.iter().cloned().zip(w.iter().copied()))
                }
                Some(w) => {
                    return invalid(format!(
                        "dimension `{kind}` lists {} items but {} item weights",
                        names.len(),
                        w.len()
                    ))
                }
            }
            .map_err(|source| ConstructError::Rules {
                stage: kind.name().to_string(),
                source,
            })?;
            let inputs: Vec<_> = names
                .iter()
                .map(|n| LinguisticVariable::likert_input(n.clone(), universe))
                .collect();
            let output = LinguisticVariable::likert_output(kind.name(), universe, n_out);
            let rules = stage_rules(
                kind.name(),
                &RuleSourceFile {
                    rules: dim.rules.clone(),
                    rules_inline: dim.rules_inline.clone(),
                },
                base_dir,
                &inputs,
                &output,
                &item_weights,
                &mut warnings,
            )?;
            let fis = Fis::new(FisConfig {
                inputs,
                output,
                rules,
                ops,
                resolution,
            })
            .map_err(|source| ConstructError::Stage {
                stage: kind.name().to_string(),
                source,
            })?;
            dimensions.push(DimensionSpec {
                kind,
                items: dim.items.clone(),
                item_weights,
                fis,
            });
        }

        if file.dimension_weights.len() != 3 {
            return invalid("dimension_weights must name all three dimensions".into());
        }
        let dimension_weights = WeightProfile::new(
            DimensionKind::ALL
                .iter()
                .map(|k| (k.name(), file.dimension_weights[k])),
        )
        .map_err(|source| ConstructError::Rules {
            stage: OVERALL.into(),
            source,
        })?;
        let top_inputs: Vec<_> = DimensionKind::ALL
            .iter()
            .map(|k| LinguisticVariable::likert_input(k.name(), universe))
            .collect();
        let top_output = LinguisticVariable::likert_output(OVERALL, universe, n_out);
        let top_rules = stage_rules(
            OVERALL,
            &file.top,
            base_dir,
            &top_inputs,
            &top_output,
            &dimension_weights,
            &mut warnings,
        )?;
        let top = Fis::new(FisConfig {
            inputs: top_inputs,
            output: top_output,
            rules: top_rules,
            ops,
            resolution,
        })
        .map_err(|source| ConstructError::Stage {
            stage: OVERALL.into(),
            source,
        })?;

        Ok(ConstructConfig {
            scale,
            dimensions,
            dimension_weights,
            top,
            file,
            warnings,
        })
    }

    /// Loads a TOML construct file; rule paths resolve next to it.
    pub fn load(path: &Path) -> Result<Self, ConstructError> {
        let file = ConstructFile::load(path)?;
        ConstructConfig::build(file, path.parent())
    }

    pub fn scale(&self) -> ScaleProfile {
        self.scale
    }

    pub fn dimensions(&self) -> &[DimensionSpec] {
        &self.dimensions
    }

    pub fn dimension(&self, kind: DimensionKind) -> &DimensionSpec {
        &self.dimensions[kind.index()]
    }

    pub fn dimension_weights(&self) -> &WeightProfile {
        &self.dimension_weights
    }

    pub fn top(&self) -> &Fis {
        &self.top
    }

    /// The description this construct was compiled from.
    pub fn file(&self) -> &ConstructFile {
        &self.file
    }

    /// Duplicate-pattern warnings from hand-written rule documents, per stage.
    pub fn warnings(&self) -> &[(String, Diagnostic)] {
        &self.warnings
    }

    /// Every stage with its name: the three dimensions, then the top stage.
    pub fn stages(&self) -> impl Iterator<Item = (&str, &Fis)> {
        self.dimensions
            .iter()
            .map(|d| (d.kind.name(), &d.fis))
            .chain(std::iter::once((OVERALL, &self.top)))
    }

    pub fn stage(&self, name: &str) -> Option<&Fis> {
        self.stages().find(|(n, _)| *n == name).map(|(_, f)| f)
    }

    /// Dimension inputs for a complete response, in stage order.
    pub fn dimension_inputs(
        &self,
        kind: DimensionKind,
        r: &LikertResponse,
    ) -> Result<Vec<f64>, EvaluationError> {
        let values = r.values(self.scale)?;
        Ok(self
            .dimension(kind)
            .items
            .iter()
            .map(|&i| values[i - 1] as f64)
            .collect())
    }

    pub fn evaluate(&self, r: &LikertResponse) -> Result<EvaluationResult, EvaluationError> {
        let values = r.values(self.scale)?;
        let mut dimensions = Vec::with_capacity(3);
        for dim in &self.dimensions {
            let inputs: Vec<f64> = dim.items.iter().map(|&i| values[i - 1] as f64).collect();
            let inference =
                dim.fis
                    .infer_values(&inputs)
                    .map_err(|source| EvaluationError::Stage {
                        stage: dim.kind.name().to_string(),
                        source,
                    })?;
            dimensions.push(DimensionScore {
                dimension: dim.kind,
                raw: inference.output,
                score: dim.fis.rescale(inference.output),
                trace: inference.trace,
            });
        }
        let scores: Vec<f64> = dimensions.iter().map(|d| d.score).collect();
        let top = self
            .top
            .infer_values(&scores)
            .map_err(|source| EvaluationError::Stage {
                stage: OVERALL.into(),
                source,
            })?;
        let overall = self.top.rescale(top.output);
        let baseline = baseline_mean(r)?;
        Ok(EvaluationResult {
            id: r.id.clone(),
            dimensions,
            overall_raw: top.output,
            overall,
            top_trace: top.trace,
            baseline,
            divergence: overall - baseline,
        })
    }
}
