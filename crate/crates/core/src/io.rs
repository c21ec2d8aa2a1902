//! Dataset ingestion, score reports and plot data.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::construct::{
    item_name, ConstructConfig, DimensionKind, EvaluationError, EvaluationResult, LikertResponse,
    ScaleProfile, ITEM_COUNT, OVERALL,
};
use crate::fuzzy::LinguisticVariable;
use crate::inference::{FiringTrace, Fis};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("no such file: {}", .0.display())]
    NotFound(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("missing required column \"{0}\"")]
    MissingColumn(String),
    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Row(RowDiagnostic),
    #[error("respondent `{id}`: {source}")]
    Evaluation { id: String, source: EvaluationError },
}

fn io_error(path: &Path, source: std::io::Error) -> DataError {
    if source.kind() == std::io::ErrorKind::NotFound {
        DataError::NotFound(path.to_path_buf())
    } else {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// A problem with one input row. `line` is the 1-based line in the file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowDiagnostic {
    pub line: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    pub message: String,
}

impl fmt::Display for RowDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.column {
            Some(c) => write!(f, "line {}, column {c}: {}", self.line, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub source: PathBuf,
    pub rows: Vec<LikertResponse>,
    /// Rejected rows, in file order.
    pub diagnostics: Vec<RowDiagnostic>,
    /// Data rows read, accepted or not.
    pub rows_read: usize,
}

/// Reads `id,item_01..item_14`; the id column is optional. Blank cells are
/// missing items. Bad rows are rejected with a diagnostic, or abort the load
/// when `strict` is set.
pub fn load_csv(path: &Path, scale: ScaleProfile, strict: bool) -> Result<Dataset, DataError> {
    let file = fs::File::open(path).map_err(|e| io_error(path, e))?;
    read_csv(file, path.to_path_buf(), scale, strict)
}

pub fn read_csv<R: Read>(
    reader: R,
    source: PathBuf,
    scale: ScaleProfile,
    strict: bool,
) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_col = headers.iter().position(|h| h == "id");
    let item_cols = (1..=ITEM_COUNT)
        .map(|i| {
            let name = item_name(i);
            headers
                .iter()
                .position(|h| h == name)
                .ok_or(DataError::MissingColumn(name))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    let mut rows_read = 0;
    for record in rdr.records() {
        let record = record?;
        rows_read += 1;
        let line = record.position().map_or(rows_read as u64 + 1, |p| p.line());
        let id = match id_col.and_then(|c| record.get(c)) {
            Some(id) if !id.is_empty() => id.to_string(),
            _ => format!("row_{rows_read}"),
        };
        let parsed: Result<Vec<Option<u8>>, RowDiagnostic> = item_cols
            .iter()
            .enumerate()
            .map(|(i, &col)| {
                let cell = record.get(col).unwrap_or("");
                let diag = |message: String| RowDiagnostic {
                    line,
                    column: Some(item_name(i + 1)),
                    message,
                };
                if cell.is_empty() {
                    return Ok(None);
                }
                let value: i64 = cell
                    .parse()
                    .map_err(|_| diag(format!("\"{cell}\" is not an integer")))?;
                if value < scale.lo() as i64 || value > scale.hi() as i64 {
                    return Err(diag(format!(
                        "value {value} out of range {}..{}",
                        scale.lo(),
                        scale.hi()
                    )));
                }
                Ok(Some(value as u8))
            })
            .collect();
        match parsed {
            Ok(items) => rows.push(LikertResponse { id, items }),
            Err(d) if strict => return Err(DataError::Row(d)),
            Err(d) => diagnostics.push(d),
        }
    }
    Ok(Dataset {
        source,
        rows,
        diagnostics,
        rows_read,
    })
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ScoreOptions {
    pub impute_neutral: bool,
    /// Abort on the first row that cannot be scored.
    pub strict: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Scored,
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub project_management_success: f64,
    pub project_impact_success: f64,
    pub stakeholder_satisfaction: f64,
    pub overall: f64,
    pub baseline: f64,
    pub divergence: f64,
}

impl Scores {
    fn of(r: &EvaluationResult) -> Self {
        Scores {
            project_management_success: r.dimension(DimensionKind::ProjectManagementSuccess),
            project_impact_success: r.dimension(DimensionKind::ProjectImpactSuccess),
            stakeholder_satisfaction: r.dimension(DimensionKind::StakeholderSatisfaction),
            overall: r.overall,
            baseline: r.baseline,
            divergence: r.divergence,
        }
    }

    fn metrics(&self) -> [f64; 6] {
        [
            self.project_management_success,
            self.project_impact_success,
            self.stakeholder_satisfaction,
            self.overall,
            self.baseline,
            self.divergence,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiredRule {
    pub index: usize,
    pub rule: String,
    pub strength: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub raw_output: f64,
    pub output: f64,
    pub aggregate_mass: f64,
    /// Rules with non-zero strength only.
    pub fired: Vec<FiredRule>,
}

impl StageReport {
    pub fn new(stage: &str, fis: &Fis, trace: &FiringTrace) -> Self {
        StageReport {
            stage: stage.to_string(),
            raw_output: trace.crisp_output,
            output: fis.rescale(trace.crisp_output),
            aggregate_mass: trace.aggregate_mass,
            fired: trace
                .fired()
                .map(|f| FiredRule {
                    index: f.rule,
                    rule: fis.rules().rules[f.rule].to_string(),
                    strength: f.strength,
                })
                .collect(),
        }
    }
}

/// Per-stage reports for one evaluation, dimensions first.
pub fn stage_reports(config: &ConstructConfig, result: &EvaluationResult) -> Vec<StageReport> {
    result
        .dimensions
        .iter()
        .map(|d| {
            StageReport::new(
                d.dimension.name(),
                &config.dimension(d.dimension).fis,
                &d.trace,
            )
        })
        .chain(std::iter::once(StageReport::new(
            OVERALL,
            config.top(),
            &result.top_trace,
        )))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RespondentReport {
    pub id: String,
    pub status: RowStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Scores>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<StageReport>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Stats {
            mean,
            stddev: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scored: usize,
    pub project_management_success: Option<Stats>,
    pub project_impact_success: Option<Stats>,
    pub stakeholder_satisfaction: Option<Stats>,
    pub overall: Option<Stats>,
    pub baseline: Option<Stats>,
    pub divergence: Option<Stats>,
}

impl Summary {
    pub fn of(respondents: &[RespondentReport]) -> Summary {
        let scores: Vec<[f64; 6]> = respondents
            .iter()
            .filter_map(|r| r.scores.as_ref().map(Scores::metrics))
            .collect();
        let col = |i: usize| Stats::of(&scores.iter().map(|s| s[i]).collect::<Vec<_>>());
        Summary {
            scored: scores.len(),
            project_management_success: col(0),
            project_impact_success: col(1),
            stakeholder_satisfaction: col(2),
            overall: col(3),
            baseline: col(4),
            divergence: col(5),
        }
    }
}

/// Half-open bin `[lower, upper)` of overall − baseline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

pub const HISTOGRAM_BIN_WIDTH: f64 = 0.1;

/// Non-empty 0.1-wide bins in ascending order. Values within 1e-9 of a bin
/// edge count toward the upper bin, so 0.3 − ε lands in [0.3, 0.4).
pub fn divergence_histogram(divergences: impl IntoIterator<Item = f64>) -> Vec<HistogramBin> {
    let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
    for d in divergences {
        let k = (d / HISTOGRAM_BIN_WIDTH + 1e-9).floor() as i64;
        *bins.entry(k).or_default() += 1;
    }
    bins.into_iter()
        .map(|(k, count)| HistogramBin {
            lower: k as f64 / 10.0,
            upper: (k + 1) as f64 / 10.0,
            count,
        })
        .collect()
}

/// Run information kept apart from the per-respondent data. Contains no
/// timestamps so identical runs produce identical bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool: String,
    pub version: String,
    pub scale: ScaleProfile,
    pub resolution: usize,
    pub source: String,
    pub rows_read: usize,
    pub rows_rejected: usize,
    pub rows_scored: usize,
    pub rows_failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub metadata: ReportMetadata,
    pub summary: Summary,
    pub divergence_histogram: Vec<HistogramBin>,
    pub rejected: Vec<RowDiagnostic>,
    pub respondents: Vec<RespondentReport>,
}

/// Scores every accepted row, in parallel, preserving input order.
pub fn score_dataset(
    config: &ConstructConfig,
    ds: &Dataset,
    options: ScoreOptions,
) -> Result<ScoreReport, DataError> {
    let scale = config.scale();
    let outcomes: Vec<Result<EvaluationResult, EvaluationError>> = ds
        .rows
        .par_iter()
        .map(|row| {
            if options.impute_neutral {
                config.evaluate(&row.impute_neutral(scale))
            } else {
                config.evaluate(row)
            }
        })
        .collect();

    let mut respondents = Vec::with_capacity(outcomes.len());
    for (row, outcome) in ds.rows.iter().zip(outcomes) {
        respondents.push(match outcome {
            Ok(result) => RespondentReport {
                id: result.id.clone(),
                status: RowStatus::Scored,
                error: None,
                scores: Some(Scores::of(&result)),
                stages: stage_reports(config, &result),
            },
            Err(source) if options.strict => {
                return Err(DataError::Evaluation {
                    id: row.id.clone(),
                    source,
                })
            }
            Err(e) => RespondentReport {
                id: row.id.clone(),
                status: RowStatus::Failed,
                error: Some(e.to_string()),
                scores: None,
                stages: Vec::new(),
            },
        });
    }
    let summary = Summary::of(&respondents);
    let divergence_histogram = divergence_histogram(
        respondents
            .iter()
            .filter_map(|r| r.scores.map(|s| s.divergence)),
    );
    let rows_failed = respondents
        .iter()
        .filter(|r| r.status == RowStatus::Failed)
        .count();
    Ok(ScoreReport {
        metadata: ReportMetadata {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            scale,
            resolution: config.top().config().resolution,
            source: ds.source.display().to_string(),
            rows_read: ds.rows_read,
            rows_rejected: ds.diagnostics.len(),
            rows_scored: respondents.len() - rows_failed,
            rows_failed,
        },
        summary,
        divergence_histogram,
        rejected: ds.diagnostics.clone(),
        respondents,
    })
}

pub fn render_json(report: &ScoreReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serialises");
    s.push('\n');
    s
}

/// Stage reports for a single response, as pretty JSON.
pub fn render_stage_reports(reports: &[StageReport]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialise");
    s.push('\n');
    s
}

pub fn parse_json(text: &str) -> Result<ScoreReport, serde_json::Error> {
    serde_json::from_str(text)
}

pub const CSV_COLUMNS: [&str; 9] = [
    "id",
    "status",
    "project_management_success",
    "project_impact_success",
    "stakeholder_satisfaction",
    "overall",
    "baseline",
    "divergence",
    "error",
];

/// Flat per-respondent scores at six decimal places.
pub fn render_csv(report: &ScoreReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for r in &report.respondents {
        let mut rec: Vec<String> = vec![
            r.id.clone(),
            match r.status {
                RowStatus::Scored => "scored".into(),
                RowStatus::Failed => "failed".into(),
            },
        ];
        match &r.scores {
            Some(s) => rec.extend(s.metrics().iter().map(|v| format!("{v:.6}"))),
            None => rec.extend(std::iter::repeat_n(String::new(), 6)),
        }
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

/// Fixed responses whose aggregated sets are emitted as plot data.
pub fn worked_examples(scale: ScaleProfile) -> Vec<(&'static str, LikertResponse)> {
    let (lo, mid, hi) = (scale.lo(), scale.mid(), scale.hi());
    let mut mixed = [mid; ITEM_COUNT];
    mixed[..5].fill(mid - 1);
    mixed[5..10].fill(mid + 1);
    vec![
        ("all_lowest", LikertResponse::uniform("all_lowest", lo)),
        ("all_neutral", LikertResponse::uniform("all_neutral", mid)),
        ("all_highest", LikertResponse::uniform("all_highest", hi)),
        ("mixed", LikertResponse::complete("mixed", mixed)),
    ]
}

fn write_file(path: &Path, contents: &str) -> Result<(), DataError> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn variable_csv(var: &LinguisticVariable, resolution: usize) -> String {
    let mut out = String::from("x");
    for l in var.labels() {
        out.push(',');
        out.push_str(&l.name);
    }
    out.push('\n');
    let u = var.universe();
    for i in 0..resolution {
        let x = u.grid_point(i, resolution);
        out.push_str(&x.to_string());
        for l in var.labels() {
            out.push(',');
            out.push_str(&l.mf.membership(x).to_string());
        }
        out.push('\n');
    }
    out
}

/// Writes membership tables for every item and stage output under
/// `variables/`, and the aggregated output set of each stage for the worked
/// examples under `examples/`. Returns the written paths in order.
pub fn emit_plot_data(config: &ConstructConfig, out_dir: &Path) -> Result<Vec<PathBuf>, DataError> {
    let var_dir = out_dir.join("variables");
    let ex_dir = out_dir.join("examples");
    for d in [&var_dir, &ex_dir] {
        fs::create_dir_all(d).map_err(|e| io_error(d, e))?;
    }
    let mut written = Vec::new();

    let mut items: Vec<(usize, &LinguisticVariable, usize)> = Vec::new();
    for dim in config.dimensions() {
        let res = dim.fis.config().resolution;
        for (&item, var) in dim.items.iter().zip(dim.fis.inputs()) {
            items.push((item, var, res));
        }
    }
    items.sort_by_key(|(i, _, _)| *i);
    let outputs = config
        .stages()
        .map(|(_, fis)| (fis.output(), fis.config().resolution));
    for (var, res) in items.iter().map(|(_, v, r)| (*v, *r)).chain(outputs) {
        let path = var_dir.join(format!("{}.csv", var.name()));
        write_file(&path, &variable_csv(var, res))?;
        written.push(path);
    }

    for (name, response) in worked_examples(config.scale()) {
        let mut columns = Vec::new();
        let mut scores = Vec::new();
        for dim in config.dimensions() {
            let inputs = config
                .dimension_inputs(dim.kind, &response)
                .map_err(|source| DataError::Evaluation {
                    id: name.into(),
                    source,
                })?;
            let (inference, set) =
                dim.fis
                    .infer_with_aggregate(&inputs)
                    .map_err(|e| DataError::Evaluation {
                        id: name.into(),
                        source: EvaluationError::Stage {
                            stage: dim.kind.name().into(),
                            source: e,
                        },
                    })?;
            scores.push(dim.fis.rescale(inference.output));
            columns.push(set);
        }
        let (_, top_set) =
            config
                .top()
                .infer_with_aggregate(&scores)
                .map_err(|e| DataError::Evaluation {
                    id: name.into(),
                    source: EvaluationError::Stage {
                        stage: OVERALL.into(),
                        source: e,
                    },
                })?;
        columns.push(top_set);

        let mut out = String::from("x");
        for (stage, _) in config.stages() {
            out.push(',');
            out.push_str(stage);
        }
        out.push('\n');
        for i in 0..columns[0].resolution() {
            out.push_str(&columns[0].x(i).to_string());
            for c in &columns {
                out.push(',');
                out.push_str(&c.values()[i].to_string());
            }
            out.push('\n');
        }
        let path = ex_dir.join(format!("{name}.csv"));
        write_file(&path, &out)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::default_construct;

    const HEADER: &str = "id,item_01,item_02,item_03,item_04,item_05,item_06,item_07,item_08,item_09,item_10,item_11,item_12,item_13,item_14";

    fn read(text: &str, strict: bool) -> Result<Dataset, DataError> {
        read_csv(
            text.as_bytes(),
            "mem.csv".into(),
            ScaleProfile::FivePoint,
            strict,
        )
    }

    #[test]
    fn happy_path() {
        let text = format!(
            "{HEADER}\na,5,5,5,5,5,5,5,5,5,5,5,5,5,5\nb,1,1,1,1,1,1,1,1,1,1,1,1,1,1\nc,3,3,3,3,3,3,3,3,3,3,3,3,3,3\n"
        );
        let ds = read(&text, false).unwrap();
        assert_eq!(ds.rows.len(), 3);
        assert_eq!(ds.rows_read, 3);
        assert_eq!(ds.rows[1].id, "b");
        assert!(ds.diagnostics.is_empty());
    }

    #[test]
    fn out_of_range_row_is_rejected() {
        let text =
            format!("{HEADER}\na,5,5,5,5,5,5,5,5,5,5,5,5,5,5\nb,1,1,1,1,1,1,6,1,1,1,1,1,1,1\n");
        let ds = read(&text, false).unwrap();
        assert_eq!(ds.rows.len(), 1);
        assert_eq!(ds.diagnostics.len(), 1);
        let d = &ds.diagnostics[0];
        assert_eq!(d.line, 3);
        assert_eq!(d.column.as_deref(), Some("item_07"));
        assert_eq!(d.message, "value 6 out of range 1..5");
        match read(&text, true) {
            Err(DataError::Row(d)) => assert_eq!(d.line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_integer_and_blank_cells() {
        let text =
            format!("{HEADER}\na,5,x,5,5,5,5,5,5,5,5,5,5,5,5\nb,1,,1,1,1,1,1,1,1,1,1,1,1,1\n");
        let ds = read(&text, false).unwrap();
        assert_eq!(ds.diagnostics[0].message, "\"x\" is not an integer");
        assert_eq!(ds.rows[0].items[1], None);
    }

    #[test]
    fn missing_column_is_fatal() {
        let header = HEADER.replace(",item_07", "");
        let err = read(&format!("{header}\n"), false).unwrap_err();
        assert_eq!(err.to_string(), "missing required column \"item_07\"");
    }

    #[test]
    fn ids_are_synthesised_without_id_column() {
        let header = HEADER.trim_start_matches("id,");
        let ds = read(&format!("{header}\n3,3,3,3,3,3,3,3,3,3,3,3,3,3\n"), false).unwrap();
        assert_eq!(ds.rows[0].id, "row_1");
    }

    #[test]
    fn failed_rows_do_not_abort_the_batch() {
        let text =
            format!("{HEADER}\na,5,5,5,5,5,5,5,5,5,5,5,5,5,5\nb,1,,1,1,1,1,1,1,1,1,1,1,1,1\n");
        let ds = read(&text, false).unwrap();
        let c = default_construct(ScaleProfile::FivePoint);
        let report = score_dataset(&c, &ds, ScoreOptions::default()).unwrap();
        assert_eq!(report.respondents[1].status, RowStatus::Failed);
        assert_eq!(report.metadata.rows_failed, 1);
        assert_eq!(report.summary.scored, 1);
        let strict = ScoreOptions {
            strict: true,
            ..Default::default()
        };
        assert!(matches!(
            score_dataset(&c, &ds, strict),
            Err(DataError::Evaluation { .. })
        ));
        let imputed = ScoreOptions {
            impute_neutral: true,
            ..Default::default()
        };
        let r = score_dataset(&c, &ds, imputed).unwrap();
        assert_eq!(r.metadata.rows_failed, 0);
    }

    #[test]
    fn histogram_bins() {
        let bins = divergence_histogram([0.0, 0.05, 0.3 - 1e-15, 0.31, -0.05, 0.1]);
        let got: Vec<(f64, usize)> = bins.iter().map(|b| (b.lower, b.count)).collect();
        assert_eq!(got, vec![(-0.1, 1), (0.0, 2), (0.1, 1), (0.3, 2)]);
    }

    #[test]
    fn stats() {
        let s = Stats::of(&[1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.stddev, s.min, s.max), (2.0, 1.0, 1.0, 3.0));
        assert!(Stats::of(&[]).is_none());
    }

    #[test]
    fn missing_file() {
        let err = load_csv(
            Path::new("/definitely/not/here.csv"),
            ScaleProfile::FivePoint,
            false,
        )
        .unwrap_err();
        assert!(err.to_string().starts_with("no such file"));
    }
}
