use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EvalMode, ExperimentConfig, Method};
use super::stats::{compare, SampleStats, Verdict};
use crate::active::{run_active, IterationRecord, LoopConfig};
use crate::baselines::wsvm;
use crate::data::{read_records, Dataset, LabelMode, Records};
use crate::error::{Error, Result};
use crate::eval::auc_fast;
use crate::pairs::Model;
use crate::rng::{substream, FOLDS};
use crate::sampling::{Gamma, SamplingConfig};

pub const CURVE_FILE: &str = "curve.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MODEL_DIR: &str = "models";
const MISSING: &str = "NA";

/// One row of the per-iteration curve file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub dataset: String,
    pub strategy: String,
    pub gamma: String,
    pub mode: String,
    pub seed: u64,
    pub fold: usize,
    pub iter: usize,
    pub pool_size: usize,
    pub auc: f64,
    pub rejections: u64,
    pub wall_time_s: String,
    pub tie_policy: String,
}

/// One row of the summary file: final AUC over seeds for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub strategy: String,
    pub gamma: String,
    pub mode: String,
    pub tie_policy: String,
    pub n: usize,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub reference: String,
    pub t_pvalue: String,
    pub verdict: String,
}

impl SummaryRow {
    pub fn stats(&self) -> SampleStats {
        SampleStats {
            mean: self.auc_mean,
            std: self.auc_std,
            n: self.n,
        }
    }

    /// `strategy@gamma`, prefixed with `dataset:`.
    pub fn cell_id(&self) -> String {
        format!("{}:{}@{}", self.dataset, self.strategy, self.gamma)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub curve_path: PathBuf,
    pub summary_path: PathBuf,
    pub curves: Vec<CurveRow>,
    pub summary: Vec<SummaryRow>,
}

/// Short dataset name: the file name up to its first dot.
pub fn dataset_name(path: &Path) -> String {
    let file = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    file.split('.').next().unwrap_or(&file).to_string()
}

/// Stratified k-fold split: each class is shuffled with the seed's fold
/// substream and dealt round-robin. Returns the evaluation rows of each fold,
/// ascending.
pub fn stratified_folds(d: &Dataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || d.n_pos() < k || d.n_neg() < k {
        return Err(Error::validation(format!(
            "{k}-fold cross validation needs at least {k} instances per class"
        )));
    }
    let mut rng = substream(seed, FOLDS);
    let mut folds = vec![Vec::new(); k];
    for class in [d.pos_idx(), d.neg_idx()] {
        let mut rows = class.to_vec();
        rows.shuffle(&mut rng);
        for (pos, row) in rows.into_iter().enumerate() {
            folds[pos % k].push(row);
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

fn label_mode(cfg: &ExperimentConfig) -> LabelMode {
    cfg.positive_label
        .map_or(LabelMode::Binary, LabelMode::OneVsRest)
}

struct Source {
    name: String,
    train: Dataset,
    holdout: Option<Dataset>,
    /// Evaluation rows per seed and fold; empty in holdout mode.
    folds: Vec<Vec<Vec<usize>>>,
}

fn load_source(cfg: &ExperimentConfig, path: &Path) -> Result<Source> {
    let lm = label_mode(cfg);
    let train = read_records(path, None, lm)?;
    let (train, holdout) = match &cfg.eval {
        EvalMode::Holdout(test) => {
            let test = read_records(test, None, lm)?;
            let dim = train.dim.max(test.dim);
            (
                Dataset::from_records(train)?.with_dim(dim)?,
                Some(Dataset::from_records(test)?.with_dim(dim)?),
            )
        }
        EvalMode::CrossValidation(_) => (Dataset::from_records(train)?, None),
    };
    let folds = match cfg.eval {
        EvalMode::CrossValidation(k) => cfg
            .seeds
            .iter()
            .map(|&s| stratified_folds(&train, k, s))
            .collect::<Result<_>>()?,
        EvalMode::Holdout(_) => Vec::new(),
    };
    Ok(Source {
        name: dataset_name(path),
        train,
        holdout,
        folds,
    })
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    source: usize,
    method: Method,
    gamma: Option<Gamma>,
    seed_idx: usize,
    fold: usize,
}

fn gamma_label(g: Option<Gamma>) -> String {
    g.map_or_else(|| MISSING.to_string(), |g| g.to_string())
}

/// Seed for the loop's substreams, distinct per fold.
fn cell_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn split(src: &Source, seed_idx: usize, fold: usize) -> Result<(Dataset, Dataset)> {
    match &src.holdout {
        Some(test) => Ok((src.train.clone(), test.clone())),
        None => {
            let eval_rows = &src.folds[seed_idx][fold];
            let mut in_eval = vec![false; src.train.len()];
            for &r in eval_rows {
                in_eval[r] = true;
            }
            let train_rows: Vec<usize> = (0..src.train.len()).filter(|&r| !in_eval[r]).collect();
            Ok((src.train.subset(&train_rows)?, src.train.subset(eval_rows)?))
        }
    }
}

fn run_cell(
    cfg: &ExperimentConfig,
    src: &Source,
    cell: &Cell,
) -> Result<(Vec<IterationRecord>, Model)> {
    let (train, eval) = split(src, cell.seed_idx, cell.fold)?;
    let seed = cfg.seeds[cell.seed_idx];
    match cell.method {
        Method::Wsvm => {
            let start = Instant::now();
            let model = wsvm(&train, cfg.budget, cfg.c, cfg.mode, &cfg.solver)?;
            let auc = auc_fast(&model.scores(&eval)?, eval.labels(), cfg.tie_policy)?.auc;
            let record = IterationRecord {
                iter: 1,
                pool_size: train.len(),
                auc_eval: auc,
                rejections: 0,
                wall_time: (start.elapsed().as_secs_f64() * 1000.0).round() / 1000.0,
                objective: f64::NAN,
            };
            Ok((vec![record], model))
        }
        Method::Active(strategy) => {
            let lc = LoopConfig {
                budget: cfg.budget,
                batch: cfg.batch,
                c: cfg.c,
                sampling: SamplingConfig {
                    strategy,
                    gamma: cell.gamma.unwrap_or_default(),
                    bias_correction: cfg.bias_correction,
                    max_attempts: cfg.max_attempts,
                    seed: cell_seed(seed, cell.fold),
                },
                solver: cfg.solver,
                mode: cfg.mode,
                initial: cfg.initial_pool,
                tie_policy: cfg.tie_policy,
            };
            let (model, records) = run_active(&train, &eval, &lc)?;
            Ok((records, model))
        }
    }
}

pub fn save_model(path: &Path, m: &Model) -> Result<()> {
    fs::write(path, serde_json::to_vec(m)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    let m: Model = serde_json::from_slice(&fs::read(path)?)?;
    Model::from_weights(m.mode, m.weights)
}

/// Scores of every record under `m`, in input order.
pub fn predict(m: &Model, records: &Records) -> Result<Vec<f64>> {
    if records.dim > m.n_features() {
        return Err(Error::Dimension {
            index: records.dim - 1,
            len: m.n_features(),
        });
    }
    records.instances.iter().map(|x| m.score(x)).collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn read_curves(path: &Path) -> Result<Vec<CurveRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

type CellKey = (String, String, String);

/// The last iteration of every run, in file order.
fn final_rows(curves: &[CurveRow]) -> Vec<&CurveRow> {
    let mut last: BTreeMap<(CellKey, u64, usize), usize> = BTreeMap::new();
    for (k, r) in curves.iter().enumerate() {
        let key = (
            (r.dataset.clone(), r.strategy.clone(), r.gamma.clone()),
            r.seed,
            r.fold,
        );
        let slot = last.entry(key).or_insert(k);
        if curves[*slot].iter < r.iter {
            *slot = k;
        }
    }
    let mut idx: Vec<usize> = last.into_values().collect();
    idx.sort_unstable();
    idx.into_iter().map(|k| &curves[k]).collect()
}

/// Per-seed mean of the final AUC over folds, for each cell in file order.
fn per_seed_finals(curves: &[CurveRow]) -> Vec<(CellKey, Vec<f64>)> {
    // per cell: (seed, final AUC of each fold)
    type SeedFinals = Vec<(u64, Vec<f64>)>;
    let mut cells: Vec<(CellKey, SeedFinals)> = Vec::new();
    for r in final_rows(curves) {
        let key = (r.dataset.clone(), r.strategy.clone(), r.gamma.clone());
        if cells.last().is_none_or(|c| c.0 != key) {
            cells.push((key, Vec::new()));
        }
        let seeds = &mut cells.last_mut().unwrap().1;
        match seeds.iter_mut().find(|s| s.0 == r.seed) {
            Some(s) => s.1.push(r.auc),
            None => seeds.push((r.seed, vec![r.auc])),
        }
    }
    cells
        .into_iter()
        .map(|(k, seeds)| {
            let means = seeds
                .iter()
                .map(|(_, v)| v.iter().sum::<f64>() / v.len() as f64)
                .collect();
            (k, means)
        })
        .collect()
}

fn summarize(cfg: &ExperimentConfig, curves: &[CurveRow]) -> Result<Vec<SummaryRow>> {
    let finals = per_seed_finals(curves);
    let stats: Vec<SampleStats> = finals
        .iter()
        .map(|(_, v)| SampleStats::from_samples(v))
        .collect();
    let mut rows = Vec::with_capacity(finals.len());
    for (k, ((dataset, strategy, gamma), _)) in finals.iter().enumerate() {
        let reference = cfg.reference.and_then(|m| {
            let name = m.to_string();
            let same_data = |j: &usize| finals[*j].0 .0 == *dataset && finals[*j].0 .1 == name;
            (0..finals.len())
                .filter(same_data)
                .find(|&j| finals[j].0 .2 == *gamma)
                .or_else(|| (0..finals.len()).find(same_data))
        });
        let (ref_label, p, verdict) = match reference {
            Some(j) if j != k => {
                let label = format!("{}@{}", finals[j].0 .1, finals[j].0 .2);
                match compare(&stats[k], &stats[j], 0.95) {
                    Ok((t, v)) => (label, t.p_value.to_string(), v.to_string()),
                    Err(_) => (label, MISSING.into(), MISSING.into()),
                }
            }
            _ => (String::new(), MISSING.into(), MISSING.into()),
        };
        rows.push(SummaryRow {
            dataset: dataset.clone(),
            strategy: strategy.clone(),
            gamma: gamma.clone(),
            mode: cfg.mode.to_string(),
            tie_policy: cfg.tie_policy.to_string(),
            n: stats[k].n,
            auc_mean: stats[k].mean,
            auc_std: stats[k].std,
            reference: ref_label,
            t_pvalue: p,
            verdict,
        });
    }
    Ok(rows)
}

/// Runs every (dataset, method, γ, seed, fold) cell, writes the curve and
/// summary files under the output directory and returns their contents.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let sources: Vec<Source> = cfg
        .datasets
        .iter()
        .map(|p| load_source(cfg, p))
        .collect::<Result<_>>()?;
    let n_folds = match cfg.eval {
        EvalMode::CrossValidation(k) => k,
        EvalMode::Holdout(_) => 1,
    };

    let mut cells = Vec::new();
    for source in 0..sources.len() {
        for &method in &cfg.methods {
            let gammas: Vec<Option<Gamma>> = match method {
                Method::Wsvm => vec![None],
                Method::Active(_) => cfg.gammas.iter().copied().map(Some).collect(),
            };
            for gamma in gammas {
                for seed_idx in 0..cfg.seeds.len() {
                    for fold in 0..n_folds {
                        cells.push(Cell {
                            source,
                            method,
                            gamma,
                            seed_idx,
                            fold,
                        });
                    }
                }
            }
        }
    }

    fs::create_dir_all(&cfg.output)?;
    let model_dir = cfg.output.join(MODEL_DIR);
    if cfg.save_models {
        fs::create_dir_all(&model_dir)?;
    }

    let results: Vec<Vec<IterationRecord>> = cells
        .par_iter()
        .map(|cell| {
            let src = &sources[cell.source];
            let (records, model) = run_cell(cfg, src, cell)?;
            if cfg.save_models {
                let file = format!(
                    "{}_{}_{}_{}_{}.json",
                    src.name,
                    cell.method,
                    gamma_label(cell.gamma),
                    cfg.seeds[cell.seed_idx],
                    cell.fold
                );
                save_model(&model_dir.join(file), &model)?;
            }
            Ok(records)
        })
        .collect::<Result<_>>()?;

    let mut curves = Vec::new();
    for (cell, records) in cells.iter().zip(results) {
        for r in records {
            curves.push(CurveRow {
                dataset: sources[cell.source].name.clone(),
                strategy: cell.method.to_string(),
                gamma: gamma_label(cell.gamma),
                mode: cfg.mode.to_string(),
                seed: cfg.seeds[cell.seed_idx],
                fold: cell.fold,
                iter: r.iter,
                pool_size: r.pool_size,
                auc: r.auc_eval,
                rejections: r.rejections,
                wall_time_s: if cfg.timing {
                    format!("{:.3}", r.wall_time)
                } else {
                    MISSING.into()
                },
                tie_policy: cfg.tie_policy.to_string(),
            });
        }
    }
    let summary = summarize(cfg, &curves)?;

    let curve_path = cfg.output.join(CURVE_FILE);
    let summary_path = cfg.output.join(SUMMARY_FILE);
    write_csv(&curve_path, &curves)?;
    write_csv(&summary_path, &summary)?;

    // The summary must be reproducible from the curve file alone.
    let reread = summarize(cfg, &read_curves(&curve_path)?)?;
    if reread != summary {
        return Err(Error::validation("summary disagrees with the curve file"));
    }

    Ok(RunOutput {
        curve_path,
        summary_path,
        curves,
        summary,
    })
}

/// Finds a summary row by `[dataset:]strategy[@gamma]`; the match must be unique.
pub fn find_cell<'a>(rows: &'a [SummaryRow], id: &str) -> Result<&'a SummaryRow> {
    let (dataset, rest) = match id.split_once(':') {
        Some((d, r)) => (Some(d), r),
        None => (None, id),
    };
    let (strategy, gamma) = match rest.split_once('@') {
        Some((s, g)) => (s, Some(g)),
        None => (rest, None),
    };
    let method: Method = strategy.parse()?;
    let gamma_matches = |row: &SummaryRow, g: &str| {
        row.gamma == g
            || matches!((row.gamma.parse::<f64>(), g.parse::<f64>()), (Ok(a), Ok(b)) if a == b)
    };
    let hits: Vec<&SummaryRow> = rows
        .iter()
        .filter(|r| dataset.is_none_or(|d| r.dataset == d))
        .filter(|r| r.strategy == method.to_string())
        .filter(|r| gamma.is_none_or(|g| gamma_matches(r, g)))
        .collect();
    match hits.as_slice() {
        [one] => Ok(one),
        [] => Err(Error::validation(format!("no summary cell matches '{id}'"))),
        _ => Err(Error::validation(format!(
            "'{id}' matches {} cells; qualify it as dataset:strategy@gamma",
            hits.len()
        ))),
    }
}

/// Welch t-test between two summary cells.
pub fn ttest_cells(
    rows: &[SummaryRow],
    a: &str,
    b: &str,
    level: f64,
) -> Result<(super::stats::TTest, Verdict)> {
    compare(
        &find_cell(rows, a)?.stats(),
        &find_cell(rows, b)?.stats(),
        level,
    )
}
