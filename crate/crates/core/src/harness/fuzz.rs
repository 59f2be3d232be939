use rand::{Rng as _, SeedableRng};

use crate::baselines::{verify_theorem1, BoundCheck};
use crate::data::{Dataset, Label, SparseVector};
use crate::error::Result;
use crate::pairs::{Mode, Model};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzReport {
    pub trials: usize,
    pub violations: Vec<(usize, BoundCheck)>,
    /// Largest `lhs − rhs` seen; at most rounding noise when the bound holds.
    pub max_gap: f64,
}

/// A random dataset with up to `max_n` instances and `max_dim` features,
/// entries in [−5, 5], roughly half of them zero, both classes present.
pub fn random_dataset(rng: &mut Rng, max_n: usize, max_dim: usize) -> Result<Dataset> {
    let n = rng.random_range(2..=max_n.max(2));
    let dim = rng.random_range(1..=max_dim.max(1));
    let first_pos = rng.random_range(0..n);
    let first_neg = (first_pos + rng.random_range(1..n)) % n;
    let mut xs = Vec::with_capacity(n);
    let mut ls = Vec::with_capacity(n);
    for k in 0..n {
        let mut entries: Vec<(u32, f64)> = Vec::new();
        for f in 0..dim as u32 {
            if rng.random_bool(0.5) {
                entries.push((f, rng.random_range(-5.0..=5.0)));
            }
        }
        xs.push(SparseVector::from_pairs(&entries)?);
        let pos = if k == first_pos {
            true
        } else if k == first_neg {
            false
        } else {
            rng.random_bool(0.5)
        };
        ls.push(if pos {
            Label::Positive
        } else {
            Label::Negative
        });
    }
    Dataset::new(xs, ls, dim)
}

/// Checks the pair/point objective bound on `trials` random datasets and
/// models.
pub fn theorem_fuzz(trials: usize, seed: u64, mode: Mode) -> Result<FuzzReport> {
    let mut rng = Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let mut max_gap = f64::NEG_INFINITY;
    for trial in 0..trials {
        let d = random_dataset(&mut rng, 50, 10)?;
        let weights = (0..mode.weight_len(d.dim()))
            .map(|_| rng.random_range(-5.0..=5.0))
            .collect();
        let m = Model::from_weights(mode, weights)?;
        let c = rng.random_range(0.001..=10.0);
        let check = verify_theorem1(&d, c, &m)?;
        max_gap = max_gap.max(check.lhs - check.rhs);
        if !check.holds {
            violations.push((trial, check));
        }
    }
    Ok(FuzzReport {
        trials,
        violations,
        max_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_fuzz_runs_clean() {
        for mode in [Mode::Plain, Mode::Threshold] {
            let r = theorem_fuzz(50, 1, mode).unwrap();
            assert!(r.violations.is_empty());
            assert!(r.max_gap <= 1e-9);
        }
    }
}
