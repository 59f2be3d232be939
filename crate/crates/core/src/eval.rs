//! Empirical bipartite ranking loss and AUC.
//!
//! Both routes count mis-ordered pairs in half-units as integers and share
//! the final division, so they agree bit-for-bit.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

/// How a tied positive/negative pair is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    /// A tie counts as a full mis-ordering, `I(r(x+) <= r(x-))`.
    #[default]
    Loss,
    /// A tie counts as half a mis-ordering (conventional AUC).
    Half,
}

impl TiePolicy {
    fn tie_penalty(self) -> u64 {
        match self {
            TiePolicy::Loss => 2,
            TiePolicy::Half => 1,
        }
    }
}

impl fmt::Display for TiePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TiePolicy::Loss => "loss",
            TiePolicy::Half => "half",
        })
    }
}

impl FromStr for TiePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "loss" => Ok(TiePolicy::Loss),
            "half" => Ok(TiePolicy::Half),
            other => Err(Error::config(format!("unknown tie policy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AucReport {
    pub auc: f64,
    pub n_pairs: u64,
    pub tie_policy: TiePolicy,
}

impl AucReport {
    /// The empirical bipartite ranking loss, `1 - auc`.
    pub fn loss(&self) -> f64 {
        1.0 - self.auc
    }
}

fn class_counts(scores: &[f64], labels: &[Label]) -> Result<(u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::validation(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::validation("scores contain NaN"));
    }
    let n_pos = labels.iter().filter(|l| l.is_positive()).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::validation(
            "AUC needs both positive and negative instances",
        ));
    }
    Ok((n_pos, n_neg))
}

fn report(half_units: u64, n_pos: u64, n_neg: u64, tie_policy: TiePolicy) -> AucReport {
    let n_pairs = n_pos * n_neg;
    let loss = half_units as f64 / (2 * n_pairs) as f64;
    AucReport {
        auc: 1.0 - loss,
        n_pairs,
        tie_policy,
    }
}

/// AUC by enumerating every positive/negative pair. O(N+ N-).
pub fn auc_bruteforce(
    scores: &[f64],
    labels: &[Label],
    tie_policy: TiePolicy,
) -> Result<AucReport> {
    let (n_pos, n_neg) = class_counts(scores, labels)?;
    let mut half_units = 0u64;
    for (&si, li) in scores.iter().zip(labels) {
        if !li.is_positive() {
            continue;
        }
        for (&sj, lj) in scores.iter().zip(labels) {
            if lj.is_positive() {
                continue;
            }
            half_units += match si.partial_cmp(&sj) {
                Some(Ordering::Less) => 2,
                Some(Ordering::Equal) => tie_policy.tie_penalty(),
                _ => 0,
            };
        }
    }
    Ok(report(half_units, n_pos, n_neg, tie_policy))
}

/// AUC by sorting, O(N log N). Equal to [`auc_bruteforce`] exactly.
pub fn auc_fast(scores: &[f64], labels: &[Label], tie_policy: TiePolicy) -> Result<AucReport> {
    let (n_pos, n_neg) = class_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // Walk score groups from highest to lowest. Every positive is mis-ordered
    // against each negative strictly above it and tied with negatives in its
    // own group.
    let mut half_units = 0u64;
    let mut neg_above = 0u64;
    let mut end = order.len();
    while end > 0 {
        let s = scores[order[end - 1]];
        let mut start = end - 1;
        while start > 0 && scores[order[start - 1]] == s {
            start -= 1;
        }
        let group = &order[start..end];
        let pos_in = group.iter().filter(|&&k| labels[k].is_positive()).count() as u64;
        let neg_in = group.len() as u64 - pos_in;
        half_units += pos_in * (2 * neg_above + tie_policy.tie_penalty() * neg_in);
        neg_above += neg_in;
        end = start;
    }
    Ok(report(half_units, n_pos, n_neg, tie_policy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(signs: &[i32]) -> Vec<Label> {
        signs
            .iter()
            .map(|&s| {
                if s > 0 {
                    Label::Positive
                } else {
                    Label::Negative
                }
            })
            .collect()
    }

    #[test]
    fn bruteforce_examples() {
        let l = labels(&[1, -1]);
        assert_eq!(
            auc_bruteforce(&[2.0, 1.0], &l, TiePolicy::Loss)
                .unwrap()
                .auc,
            1.0
        );
        assert_eq!(
            auc_bruteforce(&[1.0, 1.0], &l, TiePolicy::Loss)
                .unwrap()
                .auc,
            0.0
        );
        assert_eq!(
            auc_bruteforce(&[1.0, 1.0], &l, TiePolicy::Half)
                .unwrap()
                .auc,
            0.5
        );
        let r = auc_bruteforce(
            &[3.0, 2.0, 1.0, 0.0],
            &labels(&[1, -1, 1, -1]),
            TiePolicy::Loss,
        )
        .unwrap();
        assert_eq!(r.auc, 0.75);
        assert_eq!(r.n_pairs, 4);
        assert!((r.loss() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn fast_examples() {
        let l = labels(&[1, 1, -1, -1]);
        assert_eq!(
            auc_fast(&[0.0, 1.0, 2.0, 3.0], &l, TiePolicy::Loss)
                .unwrap()
                .auc,
            0.0
        );
        assert_eq!(auc_fast(&[5.0; 4], &l, TiePolicy::Half).unwrap().auc, 0.5);
        assert_eq!(auc_fast(&[5.0; 4], &l, TiePolicy::Loss).unwrap().auc, 0.0);
    }

    #[test]
    fn single_class_is_rejected() {
        let l = labels(&[1, 1]);
        assert!(matches!(
            auc_fast(&[1.0, 2.0], &l, TiePolicy::Loss),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            auc_bruteforce(&[1.0, 2.0], &l, TiePolicy::Loss),
            Err(Error::Validation(_))
        ));
    }

    fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<Label>)> {
        (2usize..60).prop_flat_map(|n| {
            (
                proptest::collection::vec((0i32..8).prop_map(|v| v as f64 * 0.5), n),
                proptest::collection::vec(any::<bool>(), n),
            )
                .prop_map(|(s, mut b)| {
                    b[0] = true;
                    b[1] = false;
                    let l = b
                        .into_iter()
                        .map(|p| if p { Label::Positive } else { Label::Negative })
                        .collect();
                    (s, l)
                })
        })
    }

    proptest! {
        #[test]
        fn fast_matches_bruteforce((s, l) in scored()) {
            for policy in [TiePolicy::Loss, TiePolicy::Half] {
                let a = auc_fast(&s, &l, policy).unwrap();
                let b = auc_bruteforce(&s, &l, policy).unwrap();
                prop_assert_eq!(a.auc.to_bits(), b.auc.to_bits());
            }
        }

        #[test]
        fn invariant_under_increasing_transform((s, l) in scored()) {
            let t: Vec<f64> = s.iter().map(|v| (v * 0.7).exp() + 3.0).collect();
            for policy in [TiePolicy::Loss, TiePolicy::Half] {
                prop_assert_eq!(auc_fast(&s, &l, policy).unwrap().auc,
                                auc_fast(&t, &l, policy).unwrap().auc);
            }
        }

        #[test]
        fn negated_scores_complement((s, l) in scored()) {
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            let sum = auc_fast(&s, &l, TiePolicy::Loss).unwrap().auc
                + auc_fast(&neg, &l, TiePolicy::Loss).unwrap().auc;
            prop_assert!(sum <= 1.0 + 1e-15);
            // Distinct scores: the half policy sums to one exactly.
            let distinct: Vec<f64> = (0..s.len()).map(|k| s[k] + k as f64 * 10.0).collect();
            let nd: Vec<f64> = distinct.iter().map(|v| -v).collect();
            let sum = auc_fast(&distinct, &l, TiePolicy::Half).unwrap().auc
                + auc_fast(&nd, &l, TiePolicy::Half).unwrap().auc;
            prop_assert!((sum - 1.0).abs() <= 1e-12);
        }
    }
}
