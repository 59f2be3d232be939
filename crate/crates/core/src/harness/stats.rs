use std::fmt;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Mean, sample standard deviation and size of a set of observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl SampleStats {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std, n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Win,
    Loss,
    Tie,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Win => "win",
            Verdict::Loss => "loss",
            Verdict::Tie => "tie",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

/// Welch's unequal-variance two-sample t-test.
pub fn welch(a: &SampleStats, b: &SampleStats) -> Result<TTest> {
    if a.n < 2 || b.n < 2 {
        return Err(Error::validation(format!(
            "t-test needs at least 2 samples per cell, got {} and {}",
            a.n, b.n
        )));
    }
    let va = a.std * a.std / a.n as f64;
    let vb = b.std * b.std / b.n as f64;
    let diff = a.mean - b.mean;
    if va + vb == 0.0 {
        // Both cells are constant: the difference is exact.
        let df = (a.n + b.n - 2) as f64;
        return Ok(if diff == 0.0 {
            TTest {
                t: 0.0,
                df,
                p_value: 1.0,
            }
        } else {
            TTest {
                t: diff.signum() * f64::INFINITY,
                df,
                p_value: 0.0,
            }
        });
    }
    let t = diff / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (a.n - 1) as f64 + vb * vb / (b.n - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::validation(e.to_string()))?;
    let p_value = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest { t, df, p_value })
}

/// Win if `a` is significantly larger than `b` at the confidence `level`,
/// loss if significantly smaller, otherwise tie.
pub fn compare(a: &SampleStats, b: &SampleStats, level: f64) -> Result<(TTest, Verdict)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::validation(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let test = welch(a, b)?;
    let verdict = if test.p_value < 1.0 - level {
        if a.mean > b.mean {
            Verdict::Win
        } else {
            Verdict::Loss
        }
    } else {
        Verdict::Tie
    };
    Ok((test, verdict))
}
