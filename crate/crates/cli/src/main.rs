use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fuzzy_success::construct::{
    baseline_mean, item_name, ConstructConfig, ConstructError, ConstructFile, DimensionKind,
    LikertResponse, ScaleProfile, ITEM_COUNT,
};
use fuzzy_success::dsl::{parse_rules, render_rules, ParseOptions};
use fuzzy_success::io::{
    emit_plot_data, load_csv, render_csv, render_json, render_stage_reports, score_dataset,
    stage_reports, ScoreOptions,
};
use fuzzy_success::rules::{generate_rulebase, RuleError};

/// Fuzzy-logic project success scoring for Likert questionnaires.
#[derive(Parser)]
#[command(name = "fuzzy-success", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Construct file (TOML). Defaults to the built-in construct.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Built-in construct to use when no file is given.
    #[arg(long, value_enum, default_value = "five", conflicts_with = "config")]
    scale: ScaleArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Five,
    Seven,
}

impl From<ScaleArg> for ScaleProfile {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Five => ScaleProfile::FivePoint,
            ScaleArg::Seven => ScaleProfile::SevenPoint,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Score every row of a response CSV.
    Score {
        #[command(flatten)]
        config: ConfigArg,
        /// CSV with columns item_01..item_14 and an optional id column.
        #[arg(long, short)]
        input: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Defaults to the output extension, else json.
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Replace missing items with the scale midpoint.
        #[arg(long)]
        impute_neutral: bool,
        /// Stop at the first malformed or unscorable row.
        #[arg(long)]
        strict: bool,
    },
    /// Check a construct and print its rule counts and calibration.
    Validate {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Show the rules fired for a single response.
    Explain {
        #[command(flatten)]
        config: ConfigArg,
        /// Comma-separated item values in item order; leave a value empty if missing.
        #[arg(long, short, allow_hyphen_values = true)]
        response: String,
        #[arg(long)]
        impute_neutral: bool,
        /// Print the full stage reports as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Write membership and aggregate tables for plotting.
    PlotData {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Inspect or check rule documents.
    Rules {
        #[command(subcommand)]
        action: RulesCommand,
    },
    /// Print a construct file for editing.
    DefaultConfig {
        #[arg(long, value_enum, default_value = "five")]
        scale: ScaleArg,
    },
}

#[derive(Subcommand)]
enum RulesCommand {
    /// Write the weight-generated rule base of a stage in the rule language.
    Generate {
        #[command(flatten)]
        config: ConfigArg,
        /// Stage name: a dimension or `overall`.
        #[arg(long)]
        stage: String,
        /// Output file; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Parse a rule file against a stage and report diagnostics.
    Check {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        stage: String,
        file: PathBuf,
        /// Treat duplicate antecedent patterns as errors.
        #[arg(long)]
        strict: bool,
    },
}

/// Failure classes, mapped onto exit codes.
enum Failure {
    Data(anyhow::Error),
    Config(anyhow::Error),
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_CONFIG: u8 = 3;

/// Writes to stdout; a closed pipe ends the process quietly.
fn emit(args: std::fmt::Arguments) {
    if let Err(e) = std::io::stdout().lock().write_fmt(args) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: writing to stdout: {e}");
        std::process::exit(EXIT_DATA.into());
    }
}

macro_rules! out {
    ($($arg:tt)*) => { emit(format_args!($($arg)*)) };
}

macro_rules! outln {
    ($($arg:tt)*) => { emit(format_args!("{}\n", format_args!($($arg)*))) };
}

type Outcome = Result<(), Failure>;

fn data<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Data(e.into())
}

fn config_err<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Config(e.into())
}

fn load_config(arg: &ConfigArg) -> Result<ConstructConfig, Failure> {
    let config = match &arg.config {
        None => ConstructConfig::build(ConstructFile::default_for(arg.scale.into()), None),
        Some(path) => ConstructConfig::load(path),
    }
    .map_err(|e| match e {
        ConstructError::Io { path, source } if source.kind() == std::io::ErrorKind::NotFound => {
            config_err(anyhow!("no such file: {}", path.display()))
        }
        e => config_err(e),
    })?;
    for (stage, w) in config.warnings() {
        eprintln!("warning: stage `{stage}`: {w}");
    }
    Ok(config)
}

fn write_output(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => fs::write(p, text)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(data),
        None => {
            out!("{text}");
            Ok(())
        }
    }
}

fn parse_response(text: &str, scale: ScaleProfile) -> Result<LikertResponse, Failure> {
    let items = text
        .split(',')
        .enumerate()
        .map(|(i, cell)| {
            let cell = cell.trim();
            if cell.is_empty() {
                return Ok(None);
            }
            cell.parse::<u8>()
                .map(Some)
                .map_err(|_| anyhow!("{}: \"{cell}\" is not an integer", item_name(i + 1)))
        })
        .collect::<anyhow::Result<Vec<_>>>()
        .map_err(data)?;
    if items.len() != ITEM_COUNT {
        return Err(data(anyhow!(
            "expected {ITEM_COUNT} values, got {}",
            items.len()
        )));
    }
    for (i, v) in items.iter().enumerate() {
        if let Some(v) = v {
            if !scale.contains(*v) {
                return Err(data(anyhow!(
                    "{}: value {v} out of range {}..{}",
                    item_name(i + 1),
                    scale.lo(),
                    scale.hi()
                )));
            }
        }
    }
    LikertResponse::new("response", items).map_err(data)
}

fn score(
    config: &ConfigArg,
    input: &Path,
    output: Option<&Path>,
    format: Option<Format>,
    options: ScoreOptions,
) -> Outcome {
    let config = load_config(config)?;
    let ds = load_csv(input, config.scale(), options.strict).map_err(data)?;
    for d in &ds.diagnostics {
        eprintln!("warning: {}: rejected {d}", input.display());
    }
    let report = score_dataset(&config, &ds, options).map_err(data)?;
    let format = format.unwrap_or_else(|| match output.and_then(Path::extension) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
        _ => Format::Json,
    });
    let text = match format {
        Format::Json => render_json(&report),
        Format::Csv => render_csv(&report),
    };
    write_output(output, &text)?;
    let m = &report.metadata;
    eprintln!(
        "scored {} of {} rows ({} rejected, {} failed)",
        m.rows_scored, m.rows_read, m.rows_rejected, m.rows_failed
    );
    Ok(())
}

fn validate(arg: &ConfigArg) -> Outcome {
    let config = load_config(arg)?;
    let counts: Vec<String> = config
        .stages()
        .map(|(_, f)| f.rules().len().to_string())
        .collect();
    let ops = config.top().config().ops;
    outln!("scale: {}", config.scale());
    outln!("resolution: {}", config.top().config().resolution);
    outln!(
        "operators: and={:?} implication={:?} aggregation={:?}",
        ops.and_op,
        ops.implication,
        ops.aggregation
    );
    outln!("rules: {}", counts.join("+"));
    for (name, fis) in config.stages() {
        let c = fis.calibration();
        outln!(
            "{name}: {} inputs, {} rules ({:?}), output labels {}, c_min {:.6}, c_max {:.6}",
            fis.inputs().len(),
            fis.rules().len(),
            fis.rules().source,
            fis.output().labels().len(),
            c.c_min,
            c.c_max
        );
    }
    outln!("ok");
    Ok(())
}

fn explain(arg: &ConfigArg, response: &str, impute: bool, json: bool) -> Outcome {
    let config = load_config(arg)?;
    let mut r = parse_response(response, config.scale())?;
    if impute {
        r = r.impute_neutral(config.scale());
    }
    let result = config.evaluate(&r).map_err(data)?;
    let reports = stage_reports(&config, &result);
    if json {
        out!("{}", render_stage_reports(&reports));
        return Ok(());
    }
    for (report, (_, fis)) in reports.iter().zip(config.stages()) {
        outln!(
            "[{}] raw {:.6} -> {:.6}",
            report.stage,
            report.raw_output,
            report.output
        );
        for f in &report.fired {
            outln!("  {:>4}  {:.4}  {}", f.index, f.strength, f.rule);
        }
        let total = fis.rules().len();
        outln!("  {} of {total} rules fired", report.fired.len());
    }
    outln!("overall: {:.6}", result.overall);
    outln!("baseline mean: {:.6}", baseline_mean(&r).map_err(data)?);
    outln!("divergence: {:+.6}", result.divergence);
    Ok(())
}

fn plot_data(arg: &ConfigArg, out: &Path) -> Outcome {
    let config = load_config(arg)?;
    let written = emit_plot_data(&config, out).map_err(data)?;
    eprintln!("wrote {} files under {}", written.len(), out.display());
    Ok(())
}

fn rules(action: &RulesCommand) -> Outcome {
    match action {
        RulesCommand::Generate { config, stage, out } => {
            let config = load_config(config)?;
            let fis = config
                .stage(stage)
                .ok_or_else(|| config_err(anyhow!("unknown stage `{stage}`")))?;
            let weights = match DimensionKind::ALL.iter().find(|k| k.name() == stage) {
                Some(&kind) => &config.dimension(kind).item_weights,
                None => config.dimension_weights(),
            };
            let rb = generate_rulebase(fis.inputs(), weights, fis.output()).map_err(config_err)?;
            write_output(out.as_deref(), &render_rules(&rb))
        }
        RulesCommand::Check {
            config,
            stage,
            file,
            strict,
        } => {
            let config = load_config(config)?;
            let fis = config
                .stage(stage)
                .ok_or_else(|| config_err(anyhow!("unknown stage `{stage}`")))?;
            let text = fs::read_to_string(file).map_err(|e| {
                if e.kind() == std::io::ErrorKind::NotFound {
                    config_err(anyhow!("no such file: {}", file.display()))
                } else {
                    config_err(anyhow!("{}: {e}", file.display()))
                }
            })?;
            let parsed = match parse_rules(
                &text,
                fis.inputs(),
                fis.output(),
                ParseOptions { strict: *strict },
            ) {
                Ok(p) => p,
                Err(RuleError::Dsl(diags)) => {
                    for d in &diags {
                        eprintln!("{}:{d}", file.display());
                    }
                    let n = diags.len();
                    return Err(config_err(anyhow!("{}: {n} error(s)", file.display())));
                }
                Err(e) => return Err(config_err(e)),
            };
            for w in &parsed.warnings {
                eprintln!("{}:{w}", file.display());
            }
            outln!("{}: {} rules ok", file.display(), parsed.rules.len());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Score {
            config,
            input,
            output,
            format,
            impute_neutral,
            strict,
        } => score(
            &config,
            &input,
            output.as_deref(),
            format,
            ScoreOptions {
                impute_neutral,
                strict,
            },
        ),
        Command::Validate { config } => validate(&config),
        Command::Explain {
            config,
            response,
            impute_neutral,
            json,
        } => explain(&config, &response, impute_neutral, json),
        Command::PlotData { config, out } => plot_data(&config, &out),
        Command::Rules { action } => rules(&action),
        Command::DefaultConfig { scale } => {
            let text = ConstructFile::default_for(scale.into())
                .to_toml_string()
                .map_err(config_err)?;
            out!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
