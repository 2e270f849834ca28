//! Command-line front end: `reduce`, `ega`, `uva`, `bench` and `compare`.
//!
//! Exit codes: 0 on success, 2 for usage and configuration errors, 1 for
//! failures during a run.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baselines::ComponentRule;
use crate::bench::{compare, fit_reduction, run_pipeline, BenchReport, EvalMode, FittedReduction, PipelineConfig, ReductionMethod, Task};
use crate::ega::{ega, EgaSettings};
use crate::error::{Error, Result};
use crate::glasso::EbicGlassoSettings;
use crate::graph::CommunityAlgorithm;
use crate::learners::LearnerKind;
use crate::matrix::{load_csv, DataMatrix, Target};
use crate::seed::{derive_seed, DEFAULT_SEED};
use crate::uva::{uva, Combine, UvaSettings};

#[derive(Debug, Parser)]
#[command(name = "ndr", version, about = "Network-psychometric dimension reduction and benchmarking")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Master seed for every random choice.
    #[arg(long, global = true, env = "NDR_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads for `bench`/`compare` (default: available cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Format of summaries printed to standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reduce a CSV with any method and write the reduced features.
    Reduce {
        #[arg(long, value_enum)]
        method: ReductionMethod,
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        opts: ReduceArgs,
    },
    /// Exploratory Graph Analysis: network scores plus a membership JSON.
    Ega {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        opts: ReduceArgs,
    },
    /// Unique Variable Analysis: reduced variables plus a reduction-map JSON.
    Uva {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        opts: ReduceArgs,
    },
    /// Run the pipeline(s) described by a JSON config (object or array).
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Full JSON report.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep reduction methods over one dataset.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct IoArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Response column: excluded from reduction, appended to the output.
    #[arg(long)]
    pub target: Option<String>,
    /// Path of the JSON sidecar (membership, map or model); derived from
    /// `--output` when absent.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    /// EBIC γ.
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, value_enum, default_value_t = CommunityAlgorithm::Walktrap)]
    pub algorithm: CommunityAlgorithm,
    #[arg(long, default_value_t = 4)]
    pub steps: usize,
    /// UVA wTO threshold.
    #[arg(long, default_value_t = 0.25)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = Combine::Sum)]
    pub combine: Combine,
    /// PCA/ICA component rule: `variance:F`, `elbow` or `fixed:K`.
    #[arg(long, default_value = "variance:0.8", value_parser = parse_rule)]
    pub k_rule: ComponentRule,
    /// Shorthand for `--k-rule fixed:K`.
    #[arg(long, conflicts_with = "k_rule")]
    pub k: Option<usize>,
}

impl ReduceArgs {
    fn rule(&self) -> ComponentRule {
        self.k.map_or(self.k_rule, ComponentRule::Fixed)
    }

    fn glasso(&self) -> EbicGlassoSettings {
        EbicGlassoSettings {
            gamma: self.gamma,
            ..EbicGlassoSettings::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub target: String,
    #[arg(long, value_enum, default_value_t = Task::Classification)]
    pub task: Task,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = ReductionMethod::ALL)]
    pub methods: Vec<ReductionMethod>,
    /// Defaults to the learner matching `--task`.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub learners: Vec<LearnerKind>,
    #[arg(long, value_enum, default_value_t = EvalMode::LeakageSafe)]
    pub mode: EvalMode,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.25)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = CommunityAlgorithm::Walktrap)]
    pub algorithm: CommunityAlgorithm,
    #[arg(long, default_value = "variance:0.8", value_parser = parse_rule)]
    pub k_rule: ComponentRule,
    /// Full JSON report.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_rule(s: &str) -> std::result::Result<ComponentRule, String> {
    let (kind, value) = s.split_once(':').unwrap_or((s, ""));
    match kind {
        "elbow" if value.is_empty() => Ok(ComponentRule::Elbow),
        "variance" => value
            .parse::<f64>()
            .ok()
            .filter(|f| *f > 0.0 && *f <= 1.0)
            .map(ComponentRule::CumulativeVariance)
            .ok_or_else(|| format!("`{value}` is not a fraction in (0, 1]")),
        "fixed" => value
            .parse::<usize>()
            .ok()
            .filter(|k| *k > 0)
            .map(ComponentRule::Fixed)
            .ok_or_else(|| format!("`{value}` is not a positive integer")),
        _ => Err(format!("unknown rule `{s}`; use variance:F, elbow or fixed:K")),
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    2
                }
            };
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_config_error() {
                2
            } else {
                1
            }
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Reduce { method, io, opts } => reduce(*method, io, opts, cli.seed),
        Command::Ega { io, opts } => reduce(ReductionMethod::Ega, io, opts, cli.seed),
        Command::Uva { io, opts } => reduce(ReductionMethod::Uva, io, opts, cli.seed),
        Command::Bench { config, out: path } => {
            let configs = read_configs(config, cli.seed)?;
            let report = if configs.len() == 1 {
                run_pipeline(&configs[0])?
            } else {
                compare(&configs, jobs(cli.jobs))?
            };
            finish_report(&report, path, cli.format, out)
        }
        Command::Compare(args) => {
            let learners = if args.learners.is_empty() {
                vec![match args.task {
                    Task::Classification => LearnerKind::Logit,
                    Task::Regression => LearnerKind::Lasso,
                }]
            } else {
                args.learners.clone()
            };
            let mut configs = Vec::new();
            for &method in &args.methods {
                for &learner in &learners {
                    configs.push(PipelineConfig {
                        dataset: args.input.clone(),
                        target: args.target.clone(),
                        task: args.task,
                        method,
                        learner: Some(learner),
                        folds: args.folds,
                        mode: args.mode,
                        seed: cli.seed,
                        gamma: args.gamma,
                        threshold: args.threshold,
                        algorithm: args.algorithm,
                        k_rule: args.k_rule,
                        ..PipelineConfig::default()
                    });
                }
            }
            for c in &configs {
                c.validate()?;
            }
            let report = compare(&configs, jobs(cli.jobs))?;
            finish_report(&report, &args.out, cli.format, out)
        }
    }
}

fn jobs(requested: Option<usize>) -> usize {
    requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn default_sidecar(output: &Path, kind: &str) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    output.with_file_name(format!("{stem}.{kind}.json"))
}

fn reduce(method: ReductionMethod, io: &IoArgs, opts: &ReduceArgs, seed: u64) -> Result<()> {
    let (x, target) = load_csv(&io.input, io.target.as_deref())?;
    let (scores, sidecar): (DataMatrix, Option<(&str, serde_json::Value)>) = match method {
        ReductionMethod::Ega => {
            let settings = EgaSettings {
                algorithm: opts.algorithm,
                steps: opts.steps,
                glasso: opts.glasso(),
                seed: derive_seed(seed, "louvain"),
            };
            let r = ega(&x, &settings)?;
            let json = serde_json::json!({
                "membership": r.membership_json(),
                "dimensions": r.dimension_count,
                "all_isolated": r.all_isolated,
                "lambda": r.selected_lambda,
                "weights": r.model.communities,
                "edges": r.network.edge_count(),
            });
            (r.scores, Some(("membership", json)))
        }
        ReductionMethod::Uva => {
            let settings = UvaSettings {
                threshold: opts.threshold,
                combine: opts.combine,
                glasso: opts.glasso(),
            };
            let r = uva(&x, &settings)?;
            let mut json = r.map.to_json();
            json["collapsed_to_one"] = r.collapsed_to_one.into();
            (r.data, Some(("map", json)))
        }
        _ => {
            let settings = crate::bench::ReductionSettings {
                gamma: opts.gamma,
                threshold: opts.threshold,
                algorithm: opts.algorithm,
                walktrap_steps: opts.steps,
                k_rule: opts.rule(),
                combine: opts.combine,
            };
            let fitted = fit_reduction(method, &x, &settings, seed)?;
            let json = match &fitted {
                FittedReduction::Pca(m) => Some(("model", m.to_json(x.column_names()))),
                FittedReduction::Ica(m) => Some(("model", m.to_json(x.column_names()))),
                _ => None,
            };
            (fitted.transform(&x)?, json)
        }
    };
    write_scores(&io.output, &scores, target.as_ref())?;
    if let Some((kind, json)) = sidecar {
        let path = io.sidecar.clone().unwrap_or_else(|| default_sidecar(&io.output, kind));
        write_atomic(&path, &pretty(&json)?)?;
    }
    Ok(())
}

fn write_scores(path: &Path, scores: &DataMatrix, target: Option<&Target>) -> Result<()> {
    write_atomic(path, &scores.to_csv_bytes(target)?)
}

fn pretty<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Write via a temporary file in the destination directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Read one config or an array of configs; relative dataset paths resolve
/// against the config's directory, and `seed` falls back to the CLI seed.
fn read_configs(path: &Path, seed: u64) -> Result<Vec<PipelineConfig>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let items = match value {
        serde_json::Value::Array(items) => items,
        other => vec![other],
    };
    if items.is_empty() {
        return Err(Error::Config(format!("{}: no pipelines", path.display())));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    items
        .into_iter()
        .map(|mut item| {
            if let Some(obj) = item.as_object_mut() {
                obj.entry("seed").or_insert(seed.into());
            }
            let mut c: PipelineConfig =
                serde_json::from_value(item).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            c.resolve_relative_to(base);
            c.validate()?;
            Ok(c)
        })
        .collect()
}

fn finish_report(report: &BenchReport, path: &Path, format: Format, out: &mut dyn Write) -> Result<()> {
    write_atomic(path, &pretty(report)?)?;
    let summary = match format {
        Format::Csv => report.summary_csv()?,
        Format::Json => pretty(&report.summary)?,
    };
    out.write_all(&summary).map_err(|e| Error::io("<stdout>", e))
}
