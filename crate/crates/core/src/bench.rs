//! Cross-validated reduce → train → evaluate harness.
//!
//! A pipeline tunes the learner penalty on a stratified 75/25 split with a
//! 3-fold grid search, reports the 25% holdout metric, then runs k-fold CV
//! on the full data with the selected penalty. In `paper_faithful` mode the
//! reduction is fitted once on all rows; in `leakage_safe` mode it is refit
//! on the training rows of every split.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{ica_fit, ica_transform, pca_fit_with, pca_transform, ComponentRule, IcaModel, PcaModel};
use crate::ega::{ega, EgaModel, EgaSettings};
use crate::error::{Error, Result};
use crate::glasso::EbicGlassoSettings;
use crate::graph::CommunityAlgorithm;
use crate::learners::{fit_learner, FeatureScaler, grid_search, lasso_grid, LearnerKind, Response};
use crate::matrix::{load_csv, mean, sample_sd, DataMatrix};
use crate::seed;
use crate::uva::{uva, Combine, ReductionMap, UvaSettings};

/// Partition `0..n` into `k` folds of sizes differing by at most one.
///
/// With `strata`, indices are shuffled within each class and dealt
/// round-robin, class after class, so every fold gets a near-equal share of
/// each class. Indices within a fold are sorted.
pub fn kfold_split(n: usize, k: usize, seed_value: u64, strata: Option<&[usize]>) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("cannot split {n} rows into {k} folds")));
    }
    let mut rng = seed::rng_for(seed_value, "folds");
    let order: Vec<usize> = match strata {
        Some(labels) => {
            if labels.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: labels.len(),
                });
            }
            let classes = labels.iter().max().map_or(0, |m| m + 1);
            let mut order = Vec::with_capacity(n);
            for c in 0..classes {
                let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
                members.shuffle(&mut rng);
                order.extend(members);
            }
            order
        }
        None => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            order
        }
    };
    let mut folds = vec![Vec::new(); k];
    for (t, i) in order.into_iter().enumerate() {
        folds[t % k].push(i);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_lengths(y.len(), yhat.len())?;
    let mse = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64;
    Ok(mse.sqrt())
}

pub fn accuracy(y: &[usize], yhat: &[usize]) -> Result<f64> {
    check_lengths(y.len(), yhat.len())?;
    Ok(y.iter().zip(yhat).filter(|(a, b)| a == b).count() as f64 / y.len() as f64)
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, found: b });
    }
    if a == 0 {
        return Err(Error::InvalidArgument("metric of empty vectors".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReductionMethod {
    #[default]
    None,
    Pca,
    Ica,
    Ega,
    Uva,
}

impl ReductionMethod {
    pub const ALL: [ReductionMethod; 5] = [
        ReductionMethod::None,
        ReductionMethod::Pca,
        ReductionMethod::Ica,
        ReductionMethod::Ega,
        ReductionMethod::Uva,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ReductionMethod::None => "none",
            ReductionMethod::Pca => "pca",
            ReductionMethod::Ica => "ica",
            ReductionMethod::Ega => "ega",
            ReductionMethod::Uva => "uva",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[default]
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    #[value(name = "paper_faithful")]
    PaperFaithful,
    #[default]
    #[value(name = "leakage_safe")]
    LeakageSafe,
}

/// Settings shared by every reduction method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionSettings {
    pub gamma: f64,
    pub threshold: f64,
    pub algorithm: CommunityAlgorithm,
    pub walktrap_steps: usize,
    pub k_rule: ComponentRule,
    pub combine: Combine,
}

impl Default for ReductionSettings {
    fn default() -> Self {
        PipelineConfig::default().reduction()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: PathBuf,
    pub target: String,
    pub task: Task,
    pub method: ReductionMethod,
    /// Defaults to the learner matching `task`.
    pub learner: Option<LearnerKind>,
    pub folds: usize,
    pub mode: EvalMode,
    pub seed: u64,
    /// EBIC γ for EGA and UVA networks.
    pub gamma: f64,
    /// UVA wTO threshold.
    pub threshold: f64,
    pub algorithm: CommunityAlgorithm,
    pub walktrap_steps: usize,
    /// PCA/ICA component count rule.
    pub k_rule: ComponentRule,
    pub combine: Combine,
    /// Penalty grid; the learner's default grid when absent.
    pub grid: Option<Vec<f64>>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            target: String::new(),
            task: Task::Classification,
            method: ReductionMethod::None,
            learner: None,
            folds: 5,
            mode: EvalMode::LeakageSafe,
            seed: seed::DEFAULT_SEED,
            gamma: 0.5,
            threshold: 0.25,
            algorithm: CommunityAlgorithm::Walktrap,
            walktrap_steps: 4,
            k_rule: ComponentRule::default(),
            combine: Combine::Sum,
            grid: None,
        }
    }
}

impl PipelineConfig {
    pub fn reduction(&self) -> ReductionSettings {
        ReductionSettings {
            gamma: self.gamma,
            threshold: self.threshold,
            algorithm: self.algorithm,
            walktrap_steps: self.walktrap_steps,
            k_rule: self.k_rule,
            combine: self.combine,
        }
    }

    pub fn learner(&self) -> LearnerKind {
        self.learner.unwrap_or(match self.task {
            Task::Classification => LearnerKind::Logit,
            Task::Regression => LearnerKind::Lasso,
        })
    }

    /// File stem of the dataset path.
    pub fn dataset_name(&self) -> String {
        self.dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.dataset.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.as_os_str().is_empty() {
            return Err(Error::Config("`dataset` is required".into()));
        }
        if self.target.is_empty() {
            return Err(Error::Config("`target` is required".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("`folds` must be ≥ 2, got {}", self.folds)));
        }
        match (self.task, self.learner()) {
            (Task::Classification, LearnerKind::Logit) | (Task::Regression, LearnerKind::Lasso) => {}
            (t, l) => {
                return Err(Error::Config(format!(
                    "learner `{}` is incompatible with task `{}`",
                    l.name(),
                    serde_json::to_value(t)?.as_str().unwrap_or_default()
                )))
            }
        }
        if let Some(g) = &self.grid {
            if g.is_empty() || g.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Config("`grid` must be a non-empty list of penalties ≥ 0".into()));
            }
        }
        Ok(())
    }

    /// Resolve a relative dataset path against `base`.
    pub fn resolve_relative_to(&mut self, base: &Path) {
        if self.dataset.is_relative() {
            self.dataset = base.join(&self.dataset);
        }
    }
}

/// A reduction fitted on some rows, applicable to any rows with the same
/// columns.
#[derive(Debug, Clone)]
pub enum FittedReduction {
    Identity,
    Pca(PcaModel),
    Ica(IcaModel),
    Ega(EgaModel),
    Uva(ReductionMap),
}

impl FittedReduction {
    pub fn transform(&self, x: &DataMatrix) -> Result<DataMatrix> {
        match self {
            FittedReduction::Identity => Ok(x.clone()),
            FittedReduction::Pca(m) => pca_transform(m, x),
            FittedReduction::Ica(m) => ica_transform(m, x),
            FittedReduction::Ega(m) => m.transform(x),
            FittedReduction::Uva(m) => m.transform(x),
        }
    }
}

pub fn fit_reduction(
    method: ReductionMethod,
    x: &DataMatrix,
    settings: &ReductionSettings,
    seed_value: u64,
) -> Result<FittedReduction> {
    let glasso = EbicGlassoSettings {
        gamma: settings.gamma,
        ..EbicGlassoSettings::default()
    };
    Ok(match method {
        ReductionMethod::None => FittedReduction::Identity,
        ReductionMethod::Pca => FittedReduction::Pca(pca_fit_with(x, settings.k_rule)?),
        ReductionMethod::Ica => {
            let k = pca_fit_with(x, settings.k_rule)?.k;
            FittedReduction::Ica(ica_fit(x, k, seed::derive_seed(seed_value, "ica"))?)
        }
        ReductionMethod::Ega => {
            let s = EgaSettings {
                algorithm: settings.algorithm,
                steps: settings.walktrap_steps,
                glasso,
                seed: seed::derive_seed(seed_value, "louvain"),
            };
            FittedReduction::Ega(ega(x, &s)?.model)
        }
        ReductionMethod::Uva => {
            let s = UvaSettings {
                threshold: settings.threshold,
                combine: settings.combine,
                glasso,
            };
            FittedReduction::Uva(uva(x, &s)?.map)
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub dataset: String,
    pub method: ReductionMethod,
    pub learner: LearnerKind,
    pub mode: EvalMode,
    pub fold: usize,
    pub metric: String,
    pub value: f64,
}

/// Metric on the 25% split held out from penalty tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutRecord {
    pub dataset: String,
    pub method: ReductionMethod,
    pub learner: LearnerKind,
    pub penalty: f64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub dataset: String,
    pub method: ReductionMethod,
    pub learner: LearnerKind,
    pub metric: String,
    pub mean: f64,
    /// Sample sd of the fold metrics over √folds.
    pub se: f64,
    pub folds: usize,
    pub penalty: f64,
    /// Output dimension of the reduction fitted on all rows.
    pub dimensions: usize,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BenchReport {
    pub records: Vec<FoldRecord>,
    pub holdout: Vec<HoldoutRecord>,
    pub summary: Vec<Summary>,
}

impl BenchReport {
    /// Flag the summary with the best mean (ties go to the first).
    fn mark_best(&mut self) {
        self.summary.iter_mut().for_each(|s| s.best = false);
        let mut best: Option<usize> = None;
        for (i, s) in self.summary.iter().enumerate() {
            let better = match best {
                None => true,
                Some(b) => {
                    let cur = self.summary[b].mean;
                    if s.metric == "rmse" {
                        s.mean < cur
                    } else {
                        s.mean > cur
                    }
                }
            };
            if better {
                best = Some(i);
            }
        }
        if let Some(b) = best {
            self.summary[b].best = true;
        }
    }

    pub fn summary_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "dataset", "method", "learner", "metric", "mean", "se", "folds", "penalty", "dimensions", "best",
        ])
        .map_err(|e| Error::Csv(e.to_string()))?;
        for s in &self.summary {
            w.write_record([
                s.dataset.clone(),
                s.method.name().to_string(),
                s.learner.name().to_string(),
                s.metric.clone(),
                s.mean.to_string(),
                s.se.to_string(),
                s.folds.to_string(),
                s.penalty.to_string(),
                s.dimensions.to_string(),
                s.best.to_string(),
            ])
            .map_err(|e| Error::Csv(e.to_string()))?;
        }
        w.into_inner().map_err(|e| Error::Csv(e.to_string()))
    }
}

/// Mean and standard error (sample sd / √k) of fold metrics.
pub fn summarize(values: &[f64]) -> (f64, f64) {
    let se = if values.len() > 1 {
        sample_sd(values) / (values.len() as f64).sqrt()
    } else {
        0.0
    };
    (mean(values), se)
}

fn load_response(config: &PipelineConfig) -> Result<(DataMatrix, Response)> {
    let (x, target) = load_csv(&config.dataset, Some(&config.target))?;
    let target = target.ok_or_else(|| Error::Config(format!("target column `{}` not found", config.target)))?;
    let y = match config.task {
        Task::Classification => {
            let (labels, names) = target.to_labels();
            Response::Classes { labels, names }
        }
        Task::Regression => Response::Real(target.to_real()?),
    };
    Ok((x, y))
}

fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    let mut in_test = vec![false; n];
    test.iter().for_each(|&i| in_test[i] = true);
    (0..n).filter(|&i| !in_test[i]).collect()
}

/// Reduced (train, test) features for one split under the configured mode.
fn reduce_split(
    config: &PipelineConfig,
    x: &DataMatrix,
    full: Option<&DataMatrix>,
    train: &[usize],
    test: &[usize],
    seed_value: u64,
) -> Result<(DataMatrix, DataMatrix)> {
    if train.iter().any(|i| test.binary_search(i).is_ok()) {
        return Err(Error::InvalidData("training and test rows overlap".into()));
    }
    match full {
        Some(z) => Ok((z.select_rows(train)?, z.select_rows(test)?)),
        None => {
            let xtrain = x.select_rows(train)?;
            let fitted = fit_reduction(config.method, &xtrain, &config.reduction(), seed_value)?;
            Ok((fitted.transform(&xtrain)?, fitted.transform(&x.select_rows(test)?)?))
        }
    }
}

/// Run one (dataset, method, learner) pipeline.
pub fn run_pipeline(config: &PipelineConfig) -> Result<BenchReport> {
    config.validate()?;
    let dataset = config.dataset_name();
    run_inner(config, &dataset).map_err(|e| Error::Pipeline {
        dataset,
        method: config.method.name().to_string(),
        source: Box::new(e),
    })
}

fn run_inner(config: &PipelineConfig, dataset: &str) -> Result<BenchReport> {
    let (x, y) = load_response(config)?;
    let n = x.n();
    let learner = config.learner();
    let master = config.seed;

    // Paper-faithful: one reduction on every row, reused for every split.
    let full_fit = fit_reduction(config.method, &x, &config.reduction(), master)?;
    let full_scores = full_fit.transform(&x)?;
    let full = match config.mode {
        EvalMode::PaperFaithful => Some(&full_scores),
        EvalMode::LeakageSafe => None,
    };

    // Penalty tuning on 75%, holdout metric on the remaining 25%.
    let quarters = kfold_split(n, 4, seed::derive_seed(master, "holdout"), y.strata())?;
    let hold = &quarters[0];
    let tune = complement(n, hold);
    let (ztune, zhold) = reduce_split(config, &x, full, &tune, hold, seed::derive_seed(master, "tune"))?;
    let ytune = y.select(&tune);
    let grid = match (&config.grid, learner) {
        (Some(g), _) => g.clone(),
        (None, LearnerKind::Lasso) => match &ytune {
            Response::Real(v) => lasso_grid(&FeatureScaler::fit(ztune.values()).apply(ztune.values()), v),
            Response::Classes { .. } => unreachable!("validated"),
        },
        (None, kind) => kind.default_grid(),
    };
    let search = grid_search(ztune.values(), &ytune, learner, &grid, 3, seed::derive_seed(master, "grid"))?;
    let penalty = search.best_penalty;
    let tuned = fit_learner(learner, ztune.values(), &ytune, penalty)?;
    let holdout = HoldoutRecord {
        dataset: dataset.to_string(),
        method: config.method,
        learner,
        penalty,
        metric: y.metric_name().to_string(),
        value: tuned.score(zhold.values(), &y.select(hold))?,
    };

    // Final k-fold CV with the selected penalty.
    let folds = kfold_split(n, config.folds, seed::derive_seed(master, "cv"), y.strata())?;
    let mut records = Vec::with_capacity(folds.len());
    for (f, test) in folds.iter().enumerate() {
        let train = complement(n, test);
        let fold_seed = seed::derive_seed(master, &format!("cv_fold_{f}"));
        let (ztrain, ztest) = reduce_split(config, &x, full, &train, test, fold_seed)?;
        let fitted = fit_learner(learner, ztrain.values(), &y.select(&train), penalty)?;
        records.push(FoldRecord {
            dataset: dataset.to_string(),
            method: config.method,
            learner,
            mode: config.mode,
            fold: f + 1,
            metric: y.metric_name().to_string(),
            value: fitted.score(ztest.values(), &y.select(test))?,
        });
    }
    let values: Vec<f64> = records.iter().map(|r| r.value).collect();
    let (m, se) = summarize(&values);
    let mut report = BenchReport {
        summary: vec![Summary {
            dataset: dataset.to_string(),
            method: config.method,
            learner,
            metric: y.metric_name().to_string(),
            mean: m,
            se,
            folds: records.len(),
            penalty,
            dimensions: full_scores.p(),
            best: false,
        }],
        records,
        holdout: vec![holdout],
    };
    report.mark_best();
    Ok(report)
}

/// Run several pipelines over one dataset on up to `jobs` threads; results
/// are assembled in config order.
pub fn compare(configs: &[PipelineConfig], jobs: usize) -> Result<BenchReport> {
    let first = configs
        .first()
        .ok_or_else(|| Error::Config("no pipelines to compare".into()))?;
    for c in configs {
        if c.dataset != first.dataset || c.target != first.target {
            return Err(Error::Config("compared pipelines must share dataset and target".into()));
        }
        if c.task != first.task {
            return Err(Error::Config("compared pipelines have inconsistent task types".into()));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    let reports = pool.install(|| configs.par_iter().map(run_pipeline).collect::<Vec<_>>());
    let mut out = BenchReport::default();
    for r in reports {
        let r = r?;
        out.records.extend(r.records);
        out.holdout.extend(r.holdout);
        out.summary.extend(r.summary);
    }
    out.mark_best();
    Ok(out)
}
