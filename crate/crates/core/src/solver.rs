//! Weighted L1-hinge linear SVM trained by dual coordinate descent.
//!
//! Every example carries the implicit label +1, so the primal is
//!
//! ```text
//! min_w  ½‖w‖² + Σ_k C_k · max(0, 1 − w·x_k)
//! ```
//!
//! and the dual maximizes `Σ α_k − ½‖Σ α_k x_k‖²` over `0 ≤ α_k ≤ C_k`.
//! Each coordinate step is the exact box-clipped Newton update on one `α_k`,
//! with `w = Σ α_k x_k` maintained incrementally. Warm starts pass the
//! previous `α`; examples appended since then start at zero.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::SparseVector;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: SparseVector,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedProblem {
    examples: Vec<Example>,
    dim: usize,
}

impl WeightedProblem {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation("problem dimension must be positive"));
        }
        Ok(Self {
            examples: Vec::new(),
            dim,
        })
    }

    pub fn with_examples(dim: usize, examples: Vec<Example>) -> Result<Self> {
        let mut prob = Self::new(dim)?;
        prob.examples.reserve(examples.len());
        for e in examples {
            prob.push(e.features, e.weight)?;
        }
        Ok(prob)
    }

    pub fn push(&mut self, features: SparseVector, weight: f64) -> Result<()> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::validation(format!(
                "example weights must be positive and finite, got {weight}"
            )));
        }
        if features.min_dim() > self.dim {
            return Err(Error::Dimension {
                index: features.min_dim() - 1,
                len: self.dim,
            });
        }
        self.examples.push(Example { features, weight });
        Ok(())
    }

    /// Replaces the weight of example `k`.
    pub fn set_weight(&mut self, k: usize, weight: f64) -> Result<()> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::validation(format!(
                "example weights must be positive and finite, got {weight}"
            )));
        }
        self.examples[k].weight = weight;
        Ok(())
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_weight(&self) -> f64 {
        self.examples.iter().map(|e| e.weight).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Bound on the largest projected-gradient (KKT) violation.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_sweeps: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverState {
    pub w: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Primal objective at `w`.
    pub objective: f64,
    /// Largest KKT violation over all examples at return.
    pub kkt_violation: f64,
    pub sweeps: usize,
    pub converged: bool,
}

/// Progress after one sweep, reported to [`solve_traced`] observers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepStats {
    pub sweep: usize,
    pub primal: f64,
    pub dual: f64,
    pub max_violation: f64,
}

/// `½‖w‖² + Σ_k C_k max(0, 1 − w·x_k)`.
pub fn objective(prob: &WeightedProblem, w: &[f64]) -> Result<f64> {
    let mut total = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    for e in &prob.examples {
        total += e.weight * (1.0 - e.features.dot(w)?).max(0.0);
    }
    Ok(total)
}

/// `Σ α_k − ½‖w‖²` for `w = Σ α_k x_k`.
pub fn dual_objective(alpha: &[f64], w: &[f64]) -> f64 {
    alpha.iter().sum::<f64>() - 0.5 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Projected gradient of the dual (as a minimization) for one example.
#[inline]
fn projected_gradient(grad: f64, alpha: f64, upper: f64) -> f64 {
    if alpha <= 0.0 {
        grad.min(0.0)
    } else if alpha >= upper {
        grad.max(0.0)
    } else {
        grad
    }
}

pub fn solve(
    prob: &WeightedProblem,
    warm: Option<&SolverState>,
    opts: &SolverOptions,
    rng: &mut Rng,
) -> Result<SolverState> {
    run(prob, warm.map(|s| s.alpha.as_slice()), opts, rng, None)
}

/// [`solve`] warm-started from a bare dual vector.
pub fn solve_from_alpha(
    prob: &WeightedProblem,
    warm_alpha: &[f64],
    opts: &SolverOptions,
    rng: &mut Rng,
) -> Result<SolverState> {
    run(prob, Some(warm_alpha), opts, rng, None)
}

/// The solver loop, calling `observe` after every sweep.
pub fn solve_traced(
    prob: &WeightedProblem,
    warm_alpha: Option<&[f64]>,
    opts: &SolverOptions,
    rng: &mut Rng,
    mut observe: impl FnMut(SweepStats),
) -> Result<SolverState> {
    run(prob, warm_alpha, opts, rng, Some(&mut observe))
}

fn run(
    prob: &WeightedProblem,
    warm_alpha: Option<&[f64]>,
    opts: &SolverOptions,
    rng: &mut Rng,
    mut observe: Option<&mut dyn FnMut(SweepStats)>,
) -> Result<SolverState> {
    if !(opts.tol > 0.0) {
        return Err(Error::validation("solver tolerance must be positive"));
    }
    let n = prob.examples.len();
    let mut alpha = vec![0.0; n];
    if let Some(warm) = warm_alpha {
        if warm.len() > n {
            return Err(Error::validation(format!(
                "warm start has {} duals for {n} examples",
                warm.len()
            )));
        }
        for (a, (&prev, e)) in alpha.iter_mut().zip(warm.iter().zip(&prob.examples)) {
            *a = prev.clamp(0.0, e.weight);
        }
    }

    let sq_norms: Vec<f64> = prob.examples.iter().map(|e| e.features.norm_sq()).collect();
    // A zero vector adds nothing to w and its hinge is the constant C_k; its
    // dual optimum is the upper bound.
    for k in 0..n {
        if sq_norms[k] == 0.0 {
            alpha[k] = prob.examples[k].weight;
        }
    }

    let mut w = vec![0.0; prob.dim];
    for (e, &a) in prob.examples.iter().zip(&alpha) {
        if a != 0.0 {
            e.features.axpy_into(a, &mut w);
        }
    }

    let mut active: Vec<usize> = (0..n).filter(|&k| sq_norms[k] > 0.0).collect();
    let mut sweeps = 0;
    let mut converged = false;

    while sweeps < opts.max_sweeps {
        active.shuffle(rng);
        let mut max_pg = 0.0f64;
        for &k in &active {
            let e = &prob.examples[k];
            let grad = e.features.dot_unchecked(&w) - 1.0;
            let pg = projected_gradient(grad, alpha[k], e.weight);
            max_pg = max_pg.max(pg.abs());
            if pg != 0.0 {
                let old = alpha[k];
                alpha[k] = (old - grad / sq_norms[k]).clamp(0.0, e.weight);
                let delta = alpha[k] - old;
                if delta != 0.0 {
                    e.features.axpy_into(delta, &mut w);
                }
            }
        }
        sweeps += 1;
        if let Some(observe) = observe.as_mut() {
            observe(SweepStats {
                sweep: sweeps,
                primal: objective(prob, &w)?,
                dual: dual_objective(&alpha, &w),
                max_violation: max_pg,
            });
        }
        if max_pg <= opts.tol && kkt_violation(prob, &alpha, &w) <= opts.tol {
            converged = true;
            break;
        }
    }

    let kkt = kkt_violation(prob, &alpha, &w);
    converged |= n == 0 || kkt <= opts.tol;
    Ok(SolverState {
        objective: objective(prob, &w)?,
        kkt_violation: kkt,
        w,
        alpha,
        sweeps,
        converged,
    })
}

/// Largest projected-gradient magnitude over all examples.
pub fn kkt_violation(prob: &WeightedProblem, alpha: &[f64], w: &[f64]) -> f64 {
    prob.examples
        .iter()
        .zip(alpha)
        .map(|(e, &a)| {
            let grad = e.features.dot_unchecked(w) - 1.0;
            projected_gradient(grad, a, e.weight).abs()
        })
        .fold(0.0, f64::max)
}
