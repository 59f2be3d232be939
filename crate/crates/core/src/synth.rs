//! Synthetic two-Gaussian ranking data.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Dataset, Label, SparseVector};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Two isotropic unit-variance Gaussians in `dim` dimensions whose means are
/// `separation` apart along the all-ones direction. Positives come first.
pub fn two_gaussians(
    n_pos: usize,
    n_neg: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if dim == 0 {
        return Err(Error::validation("dimension must be positive"));
    }
    let mut rng = Rng::seed_from_u64(seed);
    let shift = separation / (2.0 * (dim as f64).sqrt());
    let mut xs = Vec::with_capacity(n_pos + n_neg);
    let mut ls = Vec::with_capacity(n_pos + n_neg);
    for k in 0..n_pos + n_neg {
        let label = if k < n_pos {
            Label::Positive
        } else {
            Label::Negative
        };
        let offset = label.sign() * shift;
        let values: Vec<f64> = (0..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z + offset
            })
            .collect();
        xs.push(SparseVector::new((0..dim as u32).collect(), values)?);
        ls.push(label);
    }
    Dataset::new(xs, ls, dim)
}
