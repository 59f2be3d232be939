//! The budgeted sample-then-train loop.
//!
//! Starting from `b` pairs drawn under the zero model, each iteration
//! reweights the chosen pool, retrains from the previous dual solution,
//! evaluates on held-out data and draws `b` more pairs with the current
//! model, until the pool holds `B` pairs.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{auc_fast, TiePolicy};
use crate::pairs::{realize_unchecked, Mode, Model, PairRef};
use crate::rng::{substream, Rng, RngState, INITIAL_POOL, SAMPLER, SOLVER};
use crate::sampling::{draw_hard, draw_soft, gamma_factor, support_size, SamplingConfig, Strategy};
use crate::solver::{solve_from_alpha, SolverOptions, WeightedProblem};

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub pair: PairRef,
    pub p: f64,
    pub alpha: f64,
    pub weight: f64,
}

/// The chosen pairs `L*` with their sampling probabilities, duals and weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChosenPool {
    members: Vec<PoolEntry>,
    membership: HashSet<PairRef>,
}

impl ChosenPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: Vec<PoolEntry>) -> Result<Self> {
        let mut pool = Self::new();
        for e in entries {
            if !(e.p > 0.0 && e.weight > 0.0 && e.alpha >= 0.0) {
                return Err(Error::validation(format!("invalid pool entry {e:?}")));
            }
            if !pool.membership.insert(e.pair) {
                return Err(Error::validation(format!(
                    "duplicate pool entry {:?}",
                    e.pair
                )));
            }
            pool.members.push(e);
        }
        Ok(pool)
    }

    /// Adds a pair with probability `p`, an initial weight and zero dual.
    pub fn insert(&mut self, pair: PairRef, p: f64, weight: f64) -> Result<()> {
        if !(p > 0.0) {
            return Err(Error::validation(format!(
                "pool probability must be positive, got {p}"
            )));
        }
        if !self.membership.insert(pair) {
            return Err(Error::validation(format!(
                "{pair:?} is already in the pool"
            )));
        }
        self.members.push(PoolEntry {
            pair,
            p,
            alpha: 0.0,
            weight,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.members
    }

    pub fn membership(&self) -> &HashSet<PairRef> {
        &self.membership
    }

    pub fn contains(&self, p: PairRef) -> bool {
        self.membership.contains(&p)
    }

    pub fn total_weight(&self) -> f64 {
        self.members.iter().map(|e| e.weight).sum()
    }
}

/// How the first `b` pairs are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialPool {
    /// The configured strategy under the zero model.
    #[default]
    Strategy,
    /// Uniformly at random.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    /// Total pair budget `B`.
    pub budget: usize,
    /// Pairs drawn per iteration `b`.
    pub batch: usize,
    /// Global regularization `C`.
    pub c: f64,
    pub sampling: SamplingConfig,
    pub solver: SolverOptions,
    pub mode: Mode,
    pub initial: InitialPool,
    pub tie_policy: TiePolicy,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            budget: 8000,
            batch: 100,
            c: 0.1,
            sampling: SamplingConfig::default(),
            solver: SolverOptions::default(),
            mode: Mode::Plain,
            initial: InitialPool::default(),
            tie_policy: TiePolicy::default(),
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 || self.batch == 0 {
            return Err(Error::config("budget and batch size must be positive"));
        }
        if self.batch > self.budget {
            return Err(Error::config(format!(
                "batch size {} exceeds budget {}",
                self.batch, self.budget
            )));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::config(format!("C must be positive, got {}", self.c)));
        }
        if self.sampling.max_attempts == 0 {
            return Err(Error::config("max_attempts must be positive"));
        }
        if let crate::sampling::Gamma::Value(g) = self.sampling.gamma {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::config(format!("gamma must lie in [0, 1], got {g}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub pool_size: usize,
    pub auc_eval: f64,
    /// Rejections spent drawing the pairs added before this iteration's solve.
    pub rejections: u64,
    /// Seconds, rounded to milliseconds.
    pub wall_time: f64,
    pub objective: f64,
}

impl IterationRecord {
    /// Equality on everything except wall time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        self.iter == other.iter
            && self.pool_size == other.pool_size
            && self.auc_eval.to_bits() == other.auc_eval.to_bits()
            && self.rejections == other.rejections
            && self.objective.to_bits() == other.objective.to_bits()
    }
}

/// Recomputes every pool weight for the current `|L*|` and clips the duals
/// into the new boxes.
///
/// With bias correction the weight of entry `k` is `Γ_k·|L*|·C / (p_k·Z)`
/// with `Z = Σ 1/p`; without it, `Γ_k·C`.
pub fn pool_weights(pool: &mut ChosenPool, c: f64, gamma: f64, bias_correction: bool) {
    let n = pool.members.len() as f64;
    let z: f64 = pool.members.iter().map(|e| 1.0 / e.p).sum();
    for e in &mut pool.members {
        let big_gamma = gamma_factor(e.pair, gamma);
        e.weight = if bias_correction {
            big_gamma * n * c / (e.p * z)
        } else {
            big_gamma * c
        };
        e.alpha = e.alpha.clamp(0.0, e.weight);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub pool: Vec<PoolEntry>,
    pub model: Model,
    pub sampler: RngState,
    pub solver: RngState,
    pub records: Vec<IterationRecord>,
    pub pending_rejections: u64,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

fn config_hash(cfg: &LoopConfig, train: &Dataset, eval: &Dataset) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(cfg)?);
    for v in [
        train.len(),
        train.n_pos(),
        train.dim(),
        eval.len(),
        eval.n_pos(),
    ] {
        h.update((v as u64).to_le_bytes());
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// A resumable run of the active sampling loop.
pub struct ActiveRun<'a> {
    train: &'a Dataset,
    eval: &'a Dataset,
    cfg: LoopConfig,
    gamma: f64,
    config_hash: String,
    pool: ChosenPool,
    problem: WeightedProblem,
    model: Model,
    sampler: Rng,
    solver_rng: Rng,
    records: Vec<IterationRecord>,
    pending_rejections: u64,
}

impl<'a> ActiveRun<'a> {
    /// Validates the configuration and draws the initial pool.
    pub fn new(train: &'a Dataset, eval: &'a Dataset, cfg: LoopConfig) -> Result<Self> {
        let mut run = Self::blank(train, eval, cfg)?;
        let mut init_rng = substream(cfg.sampling.seed, INITIAL_POOL);
        let n = cfg.batch.min(cfg.budget);
        let strategy = match cfg.initial {
            InitialPool::Strategy => cfg.sampling.strategy,
            InitialPool::Uniform => Strategy::Random,
        };
        run.draw(n, &mut init_rng, strategy)?;
        Ok(run)
    }

    fn blank(train: &'a Dataset, eval: &'a Dataset, cfg: LoopConfig) -> Result<Self> {
        cfg.validate()?;
        if train.n_pos() == 0 || train.n_neg() == 0 {
            return Err(Error::validation("training data needs both classes"));
        }
        let gamma = cfg.sampling.gamma.resolve(train);
        let available = support_size(train, gamma);
        if cfg.budget as u64 > available {
            return Err(Error::PoolExhausted {
                requested: cfg.budget as u64,
                available,
            });
        }
        let dim = cfg.mode.weight_len(train.dim()).max(1);
        Ok(Self {
            train,
            eval,
            cfg,
            gamma,
            config_hash: config_hash(&cfg, train, eval)?,
            pool: ChosenPool::new(),
            problem: WeightedProblem::new(dim)?,
            model: Model::zeros(cfg.mode, train.dim()),
            sampler: substream(cfg.sampling.seed, SAMPLER),
            solver_rng: substream(cfg.sampling.seed, SOLVER),
            records: Vec::new(),
            pending_rejections: 0,
        })
    }

    fn add(&mut self, pair: PairRef, p: f64) -> Result<()> {
        let weight = gamma_factor(pair, self.gamma) * self.cfg.c;
        self.pool.insert(pair, p, weight)?;
        self.problem
            .push(realize_unchecked(pair, self.train, self.cfg.mode), weight)
    }

    fn draw(&mut self, n: usize, rng: &mut Rng, strategy: Strategy) -> Result<()> {
        let scfg = SamplingConfig {
            strategy,
            ..self.cfg.sampling
        };
        if strategy.is_hard() {
            let pairs = draw_hard(self.train, &self.model, &scfg, self.pool.membership(), n)?;
            for p in pairs {
                self.add(p, 1.0)?;
            }
        } else {
            for _ in 0..n {
                let draw = draw_soft(self.train, &self.model, &scfg, self.pool.membership(), rng)?;
                self.pending_rejections += draw.rejections;
                self.add(draw.pair, draw.p)?;
            }
        }
        Ok(())
    }

    pub fn is_done(&self) -> bool {
        self.records
            .last()
            .is_some_and(|r| r.pool_size >= self.cfg.budget)
    }

    pub fn pool(&self) -> &ChosenPool {
        &self.pool
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    /// One iteration: reweight, solve, evaluate, then draw the next batch
    /// unless the budget is reached. Returns `None` once finished.
    pub fn step(&mut self) -> Result<Option<IterationRecord>> {
        if self.is_done() {
            return Ok(None);
        }
        let start = Instant::now();
        pool_weights(
            &mut self.pool,
            self.cfg.c,
            self.gamma,
            self.cfg.sampling.bias_correction,
        );
        for (k, e) in self.pool.members.iter().enumerate() {
            self.problem.set_weight(k, e.weight)?;
        }
        let alpha: Vec<f64> = self.pool.members.iter().map(|e| e.alpha).collect();
        let state = solve_from_alpha(
            &self.problem,
            &alpha,
            &self.cfg.solver,
            &mut self.solver_rng,
        )?;
        for (e, &a) in self.pool.members.iter_mut().zip(&state.alpha) {
            e.alpha = a;
        }
        self.model = Model::from_weights(self.cfg.mode, state.w)?;
        let scores = self.model.scores(self.eval)?;
        let auc = auc_fast(&scores, self.eval.labels(), self.cfg.tie_policy)?.auc;
        let pool_size = self.pool.len();
        let rejections = std::mem::take(&mut self.pending_rejections);

        if pool_size < self.cfg.budget {
            let n = self.cfg.batch.min(self.cfg.budget - pool_size);
            let mut sampler = std::mem::replace(&mut self.sampler, substream(0, SAMPLER));
            let res = self.draw(n, &mut sampler, self.cfg.sampling.strategy);
            self.sampler = sampler;
            res?;
        }

        let record = IterationRecord {
            iter: self.records.len() + 1,
            pool_size,
            auc_eval: auc,
            rejections,
            wall_time: (start.elapsed().as_secs_f64() * 1000.0).round() / 1000.0,
            objective: state.objective,
        };
        self.records.push(record);
        Ok(Some(record))
    }

    /// Runs to the budget and returns the final model and the full trace.
    pub fn finish(mut self) -> Result<(Model, Vec<IterationRecord>)> {
        while self.step()?.is_some() {}
        Ok((self.model, self.records))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config_hash: self.config_hash.clone(),
            pool: self.pool.members.clone(),
            model: self.model.clone(),
            sampler: RngState::capture(&self.sampler),
            solver: RngState::capture(&self.solver_rng),
            records: self.records.clone(),
            pending_rejections: self.pending_rejections,
        }
    }

    /// Resumes a run from a checkpoint taken under the same configuration
    /// and data.
    pub fn restore(
        train: &'a Dataset,
        eval: &'a Dataset,
        cfg: LoopConfig,
        ckpt: Checkpoint,
    ) -> Result<Self> {
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::IncompatibleCheckpoint(format!(
                "version {} (expected {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        let mut run = Self::blank(train, eval, cfg)?;
        if ckpt.config_hash != run.config_hash {
            return Err(Error::IncompatibleCheckpoint(
                "configuration or data differs from the checkpointed run".into(),
            ));
        }
        for e in &ckpt.pool {
            e.pair.validate(train)?;
        }
        if ckpt.model.mode != cfg.mode || ckpt.model.n_features() < train.dim() {
            return Err(Error::IncompatibleCheckpoint("model shape mismatch".into()));
        }
        run.pool = ChosenPool::from_entries(ckpt.pool)?;
        for e in &run.pool.members {
            run.problem
                .push(realize_unchecked(e.pair, train, cfg.mode), e.weight)?;
        }
        run.model = ckpt.model;
        run.sampler = ckpt.sampler.restore();
        run.solver_rng = ckpt.solver.restore();
        run.records = ckpt.records;
        run.pending_rejections = ckpt.pending_rejections;
        Ok(run)
    }
}

/// Runs the active sampling loop from scratch.
pub fn run_active(
    train: &Dataset,
    eval: &Dataset,
    cfg: &LoopConfig,
) -> Result<(Model, Vec<IterationRecord>)> {
    ActiveRun::new(train, eval, *cfg)?.finish()
}
