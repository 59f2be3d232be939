//! Reference learners: the point-wise weighted SVM, RankSVM on every pair,
//! and a numerical check of the pair/point objective bound.

use std::fs;
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::pairs::{realize_unchecked, InstanceScores, Mode, Model, PairRef};
use crate::rng::{substream, SOLVER};
use crate::solver::{solve, SolverOptions, WeightedProblem};

/// Largest number of pairs [`naive_ranksvm`] materializes by default.
pub const DEFAULT_PAIR_CAP: u64 = 250_000;

/// Solver settings for the full-pair reference.
pub const NAIVE_SOLVER: SolverOptions = SolverOptions {
    tol: 1e-6,
    max_sweeps: 100_000,
};

fn need_both_classes(d: &Dataset) -> Result<()> {
    if d.n_pos() == 0 || d.n_neg() == 0 {
        return Err(Error::validation("both classes must be present"));
    }
    Ok(())
}

fn fit(prob: &WeightedProblem, mode: Mode, opts: &SolverOptions) -> Result<Model> {
    let state = solve(prob, None, opts, &mut substream(0, SOLVER))?;
    Model::from_weights(mode, state.w)
}

/// All pseudo-pairs, weighted `B·C/(2N+)` for positives and `B·C/(2N−)` for
/// negatives.
pub fn wsvm_problem(d: &Dataset, budget: usize, c: f64, mode: Mode) -> Result<WeightedProblem> {
    need_both_classes(d)?;
    let c_pos = budget as f64 * c / (2.0 * d.n_pos() as f64);
    let c_neg = budget as f64 * c / (2.0 * d.n_neg() as f64);
    let mut prob = WeightedProblem::new(mode.weight_len(d.dim()).max(1))?;
    for k in 0..d.len() {
        let (p, weight) = if d.label(k).is_positive() {
            (PairRef::PseudoPos(k as u32), c_pos)
        } else {
            (PairRef::PseudoNeg(k as u32), c_neg)
        };
        prob.push(realize_unchecked(p, d, mode), weight)?;
    }
    Ok(prob)
}

/// Point-wise weighted SVM trained through the pseudo-pair path.
pub fn wsvm(d: &Dataset, budget: usize, c: f64, mode: Mode, opts: &SolverOptions) -> Result<Model> {
    fit(&wsvm_problem(d, budget, c, mode)?, mode, opts)
}

/// Every real pair with weight `c_pair`.
pub fn naive_problem(d: &Dataset, c_pair: f64, mode: Mode, cap: u64) -> Result<WeightedProblem> {
    need_both_classes(d)?;
    let pairs = d.n_pos() as u64 * d.n_neg() as u64;
    if pairs > cap {
        return Err(Error::Size { pairs, cap });
    }
    let mut prob = WeightedProblem::new(mode.weight_len(d.dim()).max(1))?;
    for &i in d.pos_idx() {
        for &j in d.neg_idx() {
            let p = PairRef::Real {
                pos: i as u32,
                neg: j as u32,
            };
            prob.push(realize_unchecked(p, d, mode), c_pair)?;
        }
    }
    Ok(prob)
}

/// RankSVM on all positive/negative pairs, solved to tolerance 1e-6.
pub fn naive_ranksvm(d: &Dataset, c_pair: f64, mode: Mode) -> Result<Model> {
    fit(
        &naive_problem(d, c_pair, mode, DEFAULT_PAIR_CAP)?,
        mode,
        &NAIVE_SOLVER,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates both sides of the bound relating the pair-wise and point-wise
/// objectives.
///
/// `lhs` is the RankSVM objective at `w` with `C_ij = C/2` over both
/// orientations of every pair, i.e. `½‖w‖² + C·Σ [1 − w·(x_i − x_j)]_+`.
/// `rhs` is a quarter of the point-wise objective with `C+ = 2N−·C` and
/// `C− = 2N+·C`, evaluated at `(2θ, 2w)`. The threshold is not regularized.
pub fn verify_theorem1(d: &Dataset, c: f64, m: &Model) -> Result<BoundCheck> {
    need_both_classes(d)?;
    let s = InstanceScores::new(d, m)?;
    let norm = 0.5 * m.w().iter().map(|v| v * v).sum::<f64>();

    let mut pair_loss = 0.0;
    for &i in d.pos_idx() {
        for &j in d.neg_idx() {
            pair_loss += (1.0 - (s.feature(i) - s.feature(j))).max(0.0);
        }
    }
    let lhs = norm + c * pair_loss;

    let theta = m.theta();
    let c_pos = 2.0 * d.n_neg() as f64 * c;
    let c_neg = 2.0 * d.n_pos() as f64 * c;
    let pos_loss: f64 = d
        .pos_idx()
        .iter()
        .map(|&i| (1.0 - 2.0 * s.feature(i) + 2.0 * theta).max(0.0))
        .sum();
    let neg_loss: f64 = d
        .neg_idx()
        .iter()
        .map(|&j| (1.0 + 2.0 * s.feature(j) - 2.0 * theta).max(0.0))
        .sum();
    // ½‖2w‖² / 4 == ½‖w‖²
    let rhs = norm + 0.25 * (c_pos * pos_loss + c_neg * neg_loss);
    Ok(BoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9,
    })
}

/// Reads externally produced scores, one per line.
pub fn read_scores(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            l.trim().parse::<f64>().map_err(|e| Error::Parse {
                line: k + 1,
                message: format!("invalid score '{}': {e}", l.trim()),
            })
        })
        .collect()
}
