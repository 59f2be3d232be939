//! Symbolic pairs and pseudo-pairs, realized into feature vectors on demand.
//!
//! Only the positive orientation is represented: a real pair always puts the
//! positive instance first. Pseudo-pairs pit one instance against the zero
//! vector. In threshold mode every instance is extended to `[-1; x]` and the
//! model carries `θ` in slot 0 of its weight vector.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SparseVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairRef {
    /// Positive instance `pos` ranked above negative instance `neg`. Both are
    /// row indices into the dataset.
    Real { pos: u32, neg: u32 },
    /// Positive instance against the zero vector.
    PseudoPos(u32),
    /// Zero vector against a negative instance.
    PseudoNeg(u32),
}

impl PairRef {
    pub fn is_real(self) -> bool {
        matches!(self, PairRef::Real { .. })
    }

    pub fn validate(self, d: &Dataset) -> Result<()> {
        let check = |k: u32, want_pos: bool| -> Result<()> {
            let k = k as usize;
            if k >= d.len() {
                return Err(Error::Reference(format!(
                    "{self:?}: row {k} out of range for {} instances",
                    d.len()
                )));
            }
            if d.label(k).is_positive() != want_pos {
                return Err(Error::Reference(format!(
                    "{self:?}: row {k} has the wrong label"
                )));
            }
            Ok(())
        };
        match self {
            PairRef::Real { pos, neg } => {
                check(pos, true)?;
                check(neg, false)
            }
            PairRef::PseudoPos(k) => check(k, true),
            PairRef::PseudoNeg(k) => check(k, false),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Plain,
    /// Extended vectors `[-1; x]` with the threshold in weight slot 0.
    Threshold,
}

impl Mode {
    /// Length of the weight vector for `n` features.
    pub fn weight_len(self, n: usize) -> usize {
        match self {
            Mode::Plain => n,
            Mode::Threshold => n + 1,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Plain => "plain",
            Mode::Threshold => "threshold",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plain" => Ok(Mode::Plain),
            "threshold" | "th" => Ok(Mode::Threshold),
            other => Err(Error::config(format!("unknown mode '{other}'"))),
        }
    }
}

/// A linear ranking function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub mode: Mode,
    pub weights: Vec<f64>,
}

impl Model {
    pub fn zeros(mode: Mode, n_features: usize) -> Self {
        Self {
            mode,
            weights: vec![0.0; mode.weight_len(n_features)],
        }
    }

    pub fn from_weights(mode: Mode, weights: Vec<f64>) -> Result<Self> {
        if mode == Mode::Threshold && weights.is_empty() {
            return Err(Error::validation("threshold model needs a slot for θ"));
        }
        Ok(Self { mode, weights })
    }

    pub fn n_features(&self) -> usize {
        match self.mode {
            Mode::Plain => self.weights.len(),
            Mode::Threshold => self.weights.len() - 1,
        }
    }

    pub fn theta(&self) -> f64 {
        match self.mode {
            Mode::Plain => 0.0,
            Mode::Threshold => self.weights[0],
        }
    }

    /// The feature weights `w`, without `θ`.
    pub fn w(&self) -> &[f64] {
        match self.mode {
            Mode::Plain => &self.weights,
            Mode::Threshold => &self.weights[1..],
        }
    }

    /// `w·x`, ignoring the threshold.
    pub fn feature_score(&self, x: &SparseVector) -> Result<f64> {
        x.dot(self.w())
    }

    /// Ranking score of an instance; `w·x - θ` in threshold mode.
    pub fn score(&self, x: &SparseVector) -> Result<f64> {
        Ok(self.feature_score(x)? - self.theta())
    }

    pub fn scores(&self, d: &Dataset) -> Result<Vec<f64>> {
        d.instances().iter().map(|x| self.score(x)).collect()
    }
}

/// Feature vector of a pair in the given mode.
pub fn realize(p: PairRef, d: &Dataset, mode: Mode) -> Result<SparseVector> {
    p.validate(d)?;
    Ok(realize_unchecked(p, d, mode))
}

pub(crate) fn realize_unchecked(p: PairRef, d: &Dataset, mode: Mode) -> SparseVector {
    let plain = match p {
        PairRef::Real { pos, neg } => d.instance(pos as usize).sub(d.instance(neg as usize)),
        PairRef::PseudoPos(k) => d.instance(k as usize).clone(),
        PairRef::PseudoNeg(k) => d.instance(k as usize).neg(),
    };
    match (mode, p) {
        (Mode::Plain, _) => plain,
        (Mode::Threshold, PairRef::Real { .. }) => plain.extended(None),
        (Mode::Threshold, PairRef::PseudoPos(_)) => plain.extended(Some(-1.0)),
        (Mode::Threshold, PairRef::PseudoNeg(_)) => plain.extended(Some(1.0)),
    }
}

/// `w̃ · realize(p)`, the margin of the pair under the model.
pub fn pair_margin(p: PairRef, d: &Dataset, m: &Model) -> Result<f64> {
    realize(p, d, m.mode)?.dot(&m.weights)
}

/// Sizes of the real-pair and pseudo-pair sets for a given γ. Pseudo-pairs are
/// excluded when γ = 1.
pub fn count_pairs(d: &Dataset, gamma: f64) -> (u64, u64) {
    let n_real = d.n_pos() as u64 * d.n_neg() as u64;
    let n_pseudo = if gamma >= 1.0 { 0 } else { d.len() as u64 };
    (n_real, n_pseudo)
}

/// Per-instance feature scores under a fixed model, for computing many pair
/// margins cheaply.
#[derive(Debug, Clone)]
pub struct InstanceScores {
    scores: Vec<f64>,
    theta: f64,
    mode: Mode,
}

impl InstanceScores {
    pub fn new(d: &Dataset, m: &Model) -> Result<Self> {
        if m.n_features() < d.dim() {
            return Err(Error::Dimension {
                index: d.dim() - 1,
                len: m.n_features(),
            });
        }
        let w = m.w();
        Ok(Self {
            scores: d.instances().iter().map(|x| x.dot_unchecked(w)).collect(),
            theta: m.theta(),
            mode: m.mode,
        })
    }

    /// `w·x_k` without the threshold.
    pub fn feature(&self, k: usize) -> f64 {
        self.scores[k]
    }

    pub fn margin(&self, p: PairRef) -> f64 {
        match (p, self.mode) {
            (PairRef::Real { pos, neg }, _) => {
                self.scores[pos as usize] - self.scores[neg as usize]
            }
            (PairRef::PseudoPos(k), Mode::Plain) => self.scores[k as usize],
            (PairRef::PseudoNeg(k), Mode::Plain) => -self.scores[k as usize],
            (PairRef::PseudoPos(k), Mode::Threshold) => self.scores[k as usize] - self.theta,
            (PairRef::PseudoNeg(k), Mode::Threshold) => self.theta - self.scores[k as usize],
        }
    }
}
