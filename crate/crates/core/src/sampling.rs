//! Sampling strategies over the unchosen pool.
//!
//! The soft strategies propose candidates uniformly from the joint set of
//! real pairs and pseudo-pairs and accept each with probability `Γ·p`, where
//! `p` is a sigmoid-shaped value of the pair's margin and `Γ` is `γ` for real
//! pairs and `1 − γ` for pseudo-pairs. The hard strategies deterministically
//! return the pairs with the smallest measure.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::pairs::{pair_margin, InstanceScores, Model, PairRef};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    Random,
    SoftClose,
    SoftCorrect,
    HardClose,
    HardCorrect,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Random,
        Strategy::SoftClose,
        Strategy::SoftCorrect,
        Strategy::HardClose,
        Strategy::HardCorrect,
    ];

    pub fn is_hard(self) -> bool {
        matches!(self, Strategy::HardClose | Strategy::HardCorrect)
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::SoftClose => "soft-close",
            Strategy::SoftCorrect => "soft-correct",
            Strategy::HardClose => "hard-close",
            Strategy::HardCorrect => "hard-correct",
        }
    }

    /// Acceptance value of a pair with the given margin, before `Γ`.
    pub fn value(self, margin: f64) -> f64 {
        match self {
            Strategy::SoftClose => soft_close_prob(margin),
            Strategy::SoftCorrect => soft_correct_prob(margin),
            _ => 1.0,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Strategy::ALL
            .into_iter()
            .find(|st| st.name().replace('-', "") == key)
            .ok_or_else(|| Error::config(format!("unknown strategy '{s}'")))
    }
}

/// Relative weight of real pairs against pseudo-pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gamma {
    Value(f64),
    /// `|D_pair| / |D*|`: every real pair and pseudo-pair weighs the same.
    Uniform,
}

impl Gamma {
    pub fn resolve(self, d: &Dataset) -> f64 {
        match self {
            Gamma::Value(g) => g,
            Gamma::Uniform => {
                let n_real = d.n_pos() as f64 * d.n_neg() as f64;
                n_real / (n_real + d.len() as f64)
            }
        }
    }
}

impl Default for Gamma {
    fn default() -> Self {
        Gamma::Value(1.0)
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Value(g) => write!(f, "{g}"),
            Gamma::Uniform => f.write_str("uniform"),
        }
    }
}

impl FromStr for Gamma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("uniform") {
            return Ok(Gamma::Uniform);
        }
        let g: f64 = s
            .parse()
            .map_err(|_| Error::config(format!("invalid gamma '{s}'")))?;
        if !(0.0..=1.0).contains(&g) {
            return Err(Error::config(format!("gamma must lie in [0, 1], got {g}")));
        }
        Ok(Gamma::Value(g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub strategy: Strategy,
    pub gamma: Gamma,
    pub bias_correction: bool,
    /// Rejections tolerated per draw before falling back to the best candidate seen.
    pub max_attempts: u32,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::SoftClose,
            gamma: Gamma::default(),
            bias_correction: true,
            max_attempts: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleDraw {
    pub pair: PairRef,
    /// Value-function probability `p` of the returned pair (1 for random and
    /// hard draws). Floored at `1 / max_attempts` on fallback.
    pub p: f64,
    /// `Γ·p`, the acceptance probability actually used.
    pub accept_prob: f64,
    /// Candidates turned down by the acceptance test.
    pub rejections: u64,
    /// Candidates discarded because they were already chosen.
    pub skipped: u64,
    /// True when no candidate was accepted within `max_attempts`.
    pub fallback: bool,
}

/// `|w·x_ij|`.
pub fn closeness(p: PairRef, d: &Dataset, m: &Model) -> Result<f64> {
    Ok(pair_margin(p, d, m)?.abs())
}

/// `−[1 − w·x_ij]_+`.
pub fn correctness(p: PairRef, d: &Dataset, m: &Model) -> Result<f64> {
    Ok(-(1.0 - pair_margin(p, d, m)?).max(0.0))
}

/// `2 / (1 + e^|margin|)`.
pub fn soft_close_prob(margin: f64) -> f64 {
    2.0 / (1.0 + margin.abs().exp())
}

/// `1 − 2 / (1 + e^h)` with `h = [1 − margin]_+`, evaluated as `tanh(h/2)`.
pub fn soft_correct_prob(margin: f64) -> f64 {
    let hinge = (1.0 - margin).max(0.0);
    (hinge / 2.0).tanh()
}

/// Inverse-probability weight of a draw.
pub fn bias_weight(draw: &SampleDraw, cfg: &SamplingConfig) -> f64 {
    debug_assert!(draw.p > 0.0, "accepted draws have positive probability");
    if cfg.bias_correction {
        1.0 / draw.p
    } else {
        1.0
    }
}

/// Which parts of the joint pair set a given γ draws from. Real pairs are
/// excluded at γ = 0 and pseudo-pairs at γ = 1, where their `Γ` is zero.
#[derive(Debug, Clone, Copy)]
struct Support {
    n_real: u64,
    n_pseudo: u64,
    gamma: f64,
}

impl Support {
    fn new(d: &Dataset, gamma: f64) -> Self {
        Self {
            n_real: if gamma > 0.0 {
                d.n_pos() as u64 * d.n_neg() as u64
            } else {
                0
            },
            n_pseudo: if gamma < 1.0 { d.len() as u64 } else { 0 },
            gamma,
        }
    }

    fn total(&self) -> u64 {
        self.n_real + self.n_pseudo
    }

    fn factor(&self, p: PairRef) -> f64 {
        gamma_factor(p, self.gamma)
    }

    fn propose(&self, d: &Dataset, rng: &mut Rng) -> PairRef {
        let u = rng.random_range(0..self.total());
        if u < self.n_real {
            let n_neg = d.n_neg() as u64;
            PairRef::Real {
                pos: d.pos_idx()[(u / n_neg) as usize] as u32,
                neg: d.neg_idx()[(u % n_neg) as usize] as u32,
            }
        } else {
            let k = (u - self.n_real) as usize;
            if d.label(k).is_positive() {
                PairRef::PseudoPos(k as u32)
            } else {
                PairRef::PseudoNeg(k as u32)
            }
        }
    }
}

/// Number of candidates `|D*|` that sampling draws from under `gamma`.
pub fn support_size(d: &Dataset, gamma: f64) -> u64 {
    Support::new(d, gamma).total()
}

/// `Γ` of a pair: `γ` for real pairs, `1 − γ` for pseudo-pairs.
pub fn gamma_factor(p: PairRef, gamma: f64) -> f64 {
    if p.is_real() {
        gamma
    } else {
        1.0 - gamma
    }
}

fn check_model(d: &Dataset, m: &Model) -> Result<()> {
    if m.n_features() < d.dim() {
        return Err(Error::Dimension {
            index: d.dim() - 1,
            len: m.n_features(),
        });
    }
    Ok(())
}

fn margin_of(p: PairRef, d: &Dataset, m: &Model) -> f64 {
    let w = m.w();
    let f = |k: u32| d.instance(k as usize).dot_unchecked(w);
    match p {
        PairRef::Real { pos, neg } => f(pos) - f(neg),
        PairRef::PseudoPos(k) => f(k) - m.theta(),
        PairRef::PseudoNeg(k) => m.theta() - f(k),
    }
}

/// One rejection-sampling draw from the unchosen part of the joint pair set.
pub fn draw_soft(
    d: &Dataset,
    m: &Model,
    cfg: &SamplingConfig,
    chosen: &HashSet<PairRef>,
    rng: &mut Rng,
) -> Result<SampleDraw> {
    check_model(d, m)?;
    let support = Support::new(d, cfg.gamma.resolve(d));
    let total = support.total();
    if chosen.len() as u64 >= total {
        return Err(Error::PoolExhausted {
            requested: 1,
            available: total.saturating_sub(chosen.len() as u64),
        });
    }

    let mut rejections = 0u64;
    let mut skipped = 0u64;
    let mut best: Option<(PairRef, f64, f64)> = None;
    loop {
        let cand = support.propose(d, rng);
        if chosen.contains(&cand) {
            skipped += 1;
            continue;
        }
        let p = cfg.strategy.value(margin_of(cand, d, m));
        let accept = support.factor(cand) * p;
        if best.is_none_or(|(_, _, a)| accept > a) {
            best = Some((cand, p, accept));
        }
        if rng.random::<f64>() < accept {
            return Ok(SampleDraw {
                pair: cand,
                p,
                accept_prob: accept,
                rejections,
                skipped,
                fallback: false,
            });
        }
        rejections += 1;
        if rejections >= u64::from(cfg.max_attempts.max(1)) {
            let (pair, p, accept) = best.expect("at least one candidate was scored");
            let floor = 1.0 / f64::from(cfg.max_attempts.max(1));
            return Ok(SampleDraw {
                pair,
                p: p.max(floor),
                accept_prob: accept,
                rejections,
                skipped,
                fallback: true,
            });
        }
    }
}

/// Measure used to rank pairs in the hard strategies; smaller is sampled first.
// Adding +0.0 maps -0.0 to +0.0, so equal measures compare equal under
// `total_cmp`.
fn hard_key(strategy: Strategy, margin: f64) -> f64 {
    match strategy {
        Strategy::HardClose => margin.abs(),
        _ => margin + 0.0,
    }
}

/// Instances grouped by identical score, ascending; members ascending by row.
struct Groups {
    keys: Vec<f64>,
    members: Vec<Vec<u32>>,
}

impl Groups {
    fn new(rows: &[usize], scores: &InstanceScores) -> Self {
        let mut sorted: Vec<(f64, u32)> = rows
            .iter()
            .map(|&k| (scores.feature(k) + 0.0, k as u32))
            .collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut keys: Vec<f64> = Vec::new();
        let mut members: Vec<Vec<u32>> = Vec::new();
        for (s, k) in sorted {
            if keys.last() == Some(&s) {
                members.last_mut().unwrap().push(k);
            } else {
                keys.push(s);
                members.push(vec![k]);
            }
        }
        Self { keys, members }
    }

    fn len(&self) -> usize {
        self.keys.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    key: f64,
    pos: usize,
    neg: usize,
    /// Direction of travel through the negative groups for the closeness scan.
    step: i8,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Cell {}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cell {
    // Reversed so that `BinaryHeap` pops the smallest key first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then(other.pos.cmp(&self.pos))
            .then(other.neg.cmp(&self.neg))
    }
}

/// Best-first enumeration of (positive group, negative group) cells in
/// non-decreasing order of the hard measure.
struct CellQueue<'a> {
    pos: &'a Groups,
    neg: &'a Groups,
    strategy: Strategy,
    heap: BinaryHeap<Cell>,
    seen: HashSet<(usize, usize)>,
}

impl<'a> CellQueue<'a> {
    fn new(pos: &'a Groups, neg: &'a Groups, strategy: Strategy) -> Self {
        let mut q = Self {
            pos,
            neg,
            strategy,
            heap: BinaryHeap::new(),
            seen: HashSet::new(),
        };
        if pos.len() == 0 || neg.len() == 0 {
            return q;
        }
        match strategy {
            Strategy::HardCorrect => q.push_correct(0, 0),
            _ => {
                for a in 0..pos.len() {
                    let s = pos.keys[a];
                    let up = neg.keys.partition_point(|&v| v < s);
                    if up < neg.len() {
                        q.push_close(a, up, 1);
                    }
                    if up > 0 {
                        q.push_close(a, up - 1, -1);
                    }
                }
            }
        }
        q
    }

    // Correctness grid: positives ascending, negatives descending, so the
    // margin grows along both axes.
    fn push_correct(&mut self, a: usize, b: usize) {
        if a < self.pos.len() && b < self.neg.len() && self.seen.insert((a, b)) {
            let neg = self.neg.len() - 1 - b;
            self.heap.push(Cell {
                key: self.pos.keys[a] - self.neg.keys[neg],
                pos: a,
                neg: b,
                step: 0,
            });
        }
    }

    fn push_close(&mut self, a: usize, g: usize, step: i8) {
        self.heap.push(Cell {
            key: (self.pos.keys[a] - self.neg.keys[g]).abs(),
            pos: a,
            neg: g,
            step,
        });
    }

    fn peek_key(&self) -> Option<f64> {
        self.heap.peek().map(|c| c.key)
    }

    /// Pops one cell and returns it as (positive group, negative group).
    fn pop(&mut self) -> Option<(usize, usize)> {
        let c = self.heap.pop()?;
        match self.strategy {
            Strategy::HardCorrect => {
                self.push_correct(c.pos + 1, c.neg);
                self.push_correct(c.pos, c.neg + 1);
                Some((c.pos, self.neg.len() - 1 - c.neg))
            }
            _ => {
                let next = c.neg as isize + c.step as isize;
                if next >= 0 && (next as usize) < self.neg.len() {
                    self.push_close(c.pos, next as usize, c.step);
                }
                Some((c.pos, c.neg))
            }
        }
    }
}

/// Appends the unchosen real pairs of `cells` in (pos, neg) order.
fn emit_cells(
    cells: &[(usize, usize)],
    pos: &Groups,
    neg: &Groups,
    chosen: &HashSet<PairRef>,
    out: &mut Vec<PairRef>,
    want: usize,
) {
    let mut by_pos: HashMap<usize, Vec<usize>> = HashMap::new();
    for &(a, g) in cells {
        by_pos.entry(a).or_default().push(g);
    }
    let mut rows: Vec<(u32, usize)> = by_pos
        .keys()
        .flat_map(|&a| pos.members[a].iter().map(move |&k| (k, a)))
        .collect();
    rows.sort_unstable();

    let mut partners: HashMap<usize, Vec<u32>> = HashMap::new();
    for (pk, a) in rows {
        let negs = partners.entry(a).or_insert_with(|| {
            let mut v: Vec<u32> = by_pos[&a]
                .iter()
                .flat_map(|&g| neg.members[g].iter().copied())
                .collect();
            v.sort_unstable();
            v
        });
        for &nk in negs.iter() {
            if out.len() >= want {
                return;
            }
            let p = PairRef::Real { pos: pk, neg: nk };
            if !chosen.contains(&p) {
                out.push(p);
            }
        }
    }
}

/// The `b` unchosen pairs with the smallest hard measure: `|s_i − s_j|` for
/// hard closeness, `s_i − s_j` for hard correctness. Ties are broken by
/// [`PairRef`] order, i.e. `(pos, neg)` for real pairs, then pseudo-pairs.
pub fn draw_hard(
    d: &Dataset,
    m: &Model,
    cfg: &SamplingConfig,
    chosen: &HashSet<PairRef>,
    b: usize,
) -> Result<Vec<PairRef>> {
    if !cfg.strategy.is_hard() {
        return Err(Error::config(format!(
            "{} is not a hard sampling strategy",
            cfg.strategy
        )));
    }
    let mut out = Vec::with_capacity(b);
    if b == 0 {
        return Ok(out);
    }
    let scores = InstanceScores::new(d, m)?;
    let support = Support::new(d, cfg.gamma.resolve(d));

    let pos_groups;
    let neg_groups;
    let empty = Groups {
        keys: Vec::new(),
        members: Vec::new(),
    };
    let (pg, ng) = if support.n_real > 0 {
        pos_groups = Groups::new(d.pos_idx(), &scores);
        neg_groups = Groups::new(d.neg_idx(), &scores);
        (&pos_groups, &neg_groups)
    } else {
        (&empty, &empty)
    };
    let mut cells = CellQueue::new(pg, ng, cfg.strategy);

    let mut pseudo: Vec<(f64, PairRef)> = Vec::new();
    if support.n_pseudo > 0 {
        pseudo = (0..d.len())
            .map(|k| {
                let p = if d.label(k).is_positive() {
                    PairRef::PseudoPos(k as u32)
                } else {
                    PairRef::PseudoNeg(k as u32)
                };
                (hard_key(cfg.strategy, scores.margin(p)), p)
            })
            .collect();
        pseudo.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }
    let mut pseudo_at = 0;

    while out.len() < b {
        let next_pseudo = pseudo.get(pseudo_at).map(|e| e.0);
        let key = match (cells.peek_key(), next_pseudo) {
            (Some(a), Some(p)) => {
                if a.total_cmp(&p) == Ordering::Greater {
                    p
                } else {
                    a
                }
            }
            (Some(a), None) => a,
            (None, Some(p)) => p,
            (None, None) => break,
        };
        let mut batch = Vec::new();
        while cells
            .peek_key()
            .is_some_and(|k| k.total_cmp(&key) == Ordering::Equal)
        {
            batch.extend(cells.pop());
        }
        emit_cells(&batch, pg, ng, chosen, &mut out, b);
        while pseudo_at < pseudo.len() && pseudo[pseudo_at].0.total_cmp(&key) == Ordering::Equal {
            let p = pseudo[pseudo_at].1;
            if out.len() < b && !chosen.contains(&p) {
                out.push(p);
            }
            pseudo_at += 1;
        }
    }

    if out.len() < b {
        return Err(Error::PoolExhausted {
            requested: b as u64,
            available: out.len() as u64,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Label, SparseVector};
    use crate::pairs::Mode;
    use crate::rng::substream;

    fn line(pos: &[f64], neg: &[f64]) -> Dataset {
        let mut xs = Vec::new();
        let mut ls = Vec::new();
        for (&v, l) in pos
            .iter()
            .map(|v| (v, Label::Positive))
            .chain(neg.iter().map(|v| (v, Label::Negative)))
        {
            xs.push(SparseVector::from_pairs(&[(0, v)]).unwrap());
            ls.push(l);
        }
        Dataset::new(xs, ls, 1).unwrap()
    }

    fn unit() -> Model {
        Model::from_weights(Mode::Plain, vec![1.0]).unwrap()
    }

    fn hard(strategy: Strategy) -> SamplingConfig {
        SamplingConfig {
            strategy,
            ..SamplingConfig::default()
        }
    }

    #[test]
    fn measures() {
        let d = line(&[0.0, -2.0, 1.5, 1.0, -1.0], &[0.0]);
        let m = unit();
        let real = |k| PairRef::Real { pos: k, neg: 5 };
        assert_eq!(closeness(real(0), &d, &m).unwrap(), 0.0);
        assert_eq!(closeness(real(1), &d, &m).unwrap(), 2.0);
        assert_eq!(closeness(real(2), &d, &m).unwrap(), 1.5);
        assert_eq!(correctness(real(3), &d, &m).unwrap(), 0.0);
        assert_eq!(correctness(real(0), &d, &m).unwrap(), -1.0);
        assert_eq!(correctness(real(4), &d, &m).unwrap(), -2.0);
    }

    #[test]
    fn probability_values() {
        assert_eq!(soft_close_prob(0.0), 1.0);
        let e = std::f64::consts::E;
        assert!((soft_close_prob(1.0) - 2.0 / (1.0 + e)).abs() < 1e-15);
        assert!((soft_close_prob(-1.0) - 0.537_883).abs() < 1e-6);
        assert!(soft_close_prob(800.0) == 0.0 && soft_close_prob(30.0) > 0.0);
        assert_eq!(soft_correct_prob(1.0), 0.0);
        assert_eq!(soft_correct_prob(3.0), 0.0);
        assert!((soft_correct_prob(0.0) - (e - 1.0) / (e + 1.0)).abs() < 1e-15);
        assert!((soft_correct_prob(0.0) - 0.462_117).abs() < 1e-6);
        assert!(soft_correct_prob(-60.0) > 0.999_999);
        // matches the literal form away from zero
        for m in [-3.0, -0.5, 0.3, 0.9] {
            let h: f64 = 1.0 - m;
            assert!((soft_correct_prob(m) - (1.0 - 2.0 / (1.0 + h.exp()))).abs() < 1e-15);
        }
    }

    #[test]
    fn probabilities_are_monotone_and_bounded() {
        let grid: Vec<f64> = (-400..=400).map(|k| k as f64 * 0.05).collect();
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (pc_a, pc_b) = (soft_correct_prob(a), soft_correct_prob(b));
            assert!((0.0..=1.0).contains(&pc_a));
            if b <= 1.0 {
                assert!(pc_b < pc_a, "{a} {b}");
            } else {
                assert_eq!(pc_b, 0.0);
            }
            if a >= 0.0 {
                assert!(soft_close_prob(b) < soft_close_prob(a));
            } else if b <= 0.0 {
                assert!(soft_close_prob(b) > soft_close_prob(a));
            }
            assert!((0.0..=1.0).contains(&soft_close_prob(a)));
        }
    }

    #[test]
    fn strategy_and_gamma_parsing() {
        assert_eq!(
            "SoftClose".parse::<Strategy>().unwrap(),
            Strategy::SoftClose
        );
        assert_eq!(
            "soft-correct".parse::<Strategy>().unwrap(),
            Strategy::SoftCorrect
        );
        assert_eq!(
            "hard_close".parse::<Strategy>().unwrap(),
            Strategy::HardClose
        );
        assert!("greedy".parse::<Strategy>().is_err());
        assert_eq!("uniform".parse::<Gamma>().unwrap(), Gamma::Uniform);
        assert_eq!("0.3".parse::<Gamma>().unwrap(), Gamma::Value(0.3));
        assert!("1.5".parse::<Gamma>().is_err());
        let d = line(&[1.0, 2.0], &[0.0, 0.0, 0.0]);
        assert!((Gamma::Uniform.resolve(&d) - 6.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn bias_weights() {
        let mut draw = SampleDraw {
            pair: PairRef::PseudoPos(0),
            p: 0.5,
            accept_prob: 0.5,
            rejections: 0,
            skipped: 0,
            fallback: false,
        };
        let on = SamplingConfig::default();
        let off = SamplingConfig {
            bias_correction: false,
            ..on
        };
        assert_eq!(bias_weight(&draw, &on), 2.0);
        draw.p = 0.25;
        assert_eq!(bias_weight(&draw, &off), 1.0);
        draw.p = 1.0;
        assert_eq!(bias_weight(&draw, &on), 1.0);
        assert_eq!(bias_weight(&draw, &off), 1.0);
    }

    #[test]
    fn zero_model_soft_close_accepts_first_candidate() {
        let d = line(&[1.0, 2.0, 3.0], &[0.5, 1.5]);
        let m = Model::zeros(Mode::Plain, 1);
        let mut rng = substream(1, "t");
        for _ in 0..50 {
            let draw = draw_soft(
                &d,
                &m,
                &SamplingConfig::default(),
                &HashSet::new(),
                &mut rng,
            )
            .unwrap();
            assert_eq!(draw.rejections, 0);
            assert_eq!(draw.p, 1.0);
            assert!(draw.pair.is_real());
        }
    }

    #[test]
    fn zero_model_soft_correct_rejection_count() {
        let d = line(&[1.0, 2.0, 3.0], &[0.5, 1.5]);
        let m = Model::zeros(Mode::Plain, 1);
        let cfg = hard(Strategy::SoftCorrect);
        let mut rng = substream(2, "t");
        let n = 20_000;
        let total: u64 = (0..n)
            .map(|_| {
                draw_soft(&d, &m, &cfg, &HashSet::new(), &mut rng)
                    .unwrap()
                    .rejections
            })
            .sum();
        let mean = total as f64 / n as f64;
        let p = soft_correct_prob(0.0);
        let expect = 1.0 / p - 1.0;
        let se = ((1.0 - p) / (p * p) / n as f64).sqrt();
        assert!((mean - expect).abs() < 4.0 * se, "{mean} vs {expect}");
        assert!((expect - 1.164).abs() < 1e-3);
    }

    #[test]
    fn gamma_zero_returns_only_pseudo_pairs() {
        let d = line(&[1.0, 2.0], &[0.5, 1.5]);
        let cfg = SamplingConfig {
            gamma: Gamma::Value(0.0),
            ..SamplingConfig::default()
        };
        let mut rng = substream(3, "t");
        for _ in 0..200 {
            let draw = draw_soft(&d, &unit(), &cfg, &HashSet::new(), &mut rng).unwrap();
            assert!(!draw.pair.is_real());
        }
    }

    #[test]
    fn draw_soft_skips_chosen_and_detects_exhaustion() {
        let d = line(&[1.0, 2.0], &[0.5]);
        let m = Model::zeros(Mode::Plain, 1);
        let mut chosen = HashSet::new();
        chosen.insert(PairRef::Real { pos: 0, neg: 2 });
        let mut rng = substream(4, "t");
        for _ in 0..50 {
            let draw = draw_soft(&d, &m, &SamplingConfig::default(), &chosen, &mut rng).unwrap();
            assert_eq!(draw.pair, PairRef::Real { pos: 1, neg: 2 });
        }
        chosen.insert(PairRef::Real { pos: 1, neg: 2 });
        assert!(matches!(
            draw_soft(&d, &m, &SamplingConfig::default(), &chosen, &mut rng),
            Err(Error::PoolExhausted { .. })
        ));
    }

    #[test]
    fn fallback_returns_best_seen() {
        // Every pair has margin ≥ 1, so soft correctness never accepts.
        let d = line(&[5.0, 6.0], &[0.0, 1.0]);
        let cfg = SamplingConfig {
            strategy: Strategy::SoftCorrect,
            max_attempts: 25,
            ..SamplingConfig::default()
        };
        let draw = draw_soft(&d, &unit(), &cfg, &HashSet::new(), &mut substream(5, "t")).unwrap();
        assert!(draw.fallback);
        assert_eq!(draw.rejections, 25);
        assert_eq!(draw.p, 1.0 / 25.0);
    }

    #[test]
    fn hard_orderings() {
        let d = line(&[1.0, 5.0], &[2.0]);
        let none = HashSet::new();
        let got = draw_hard(&d, &unit(), &hard(Strategy::HardCorrect), &none, 2).unwrap();
        assert_eq!(
            got,
            vec![
                PairRef::Real { pos: 0, neg: 2 },
                PairRef::Real { pos: 1, neg: 2 }
            ]
        );
        let got = draw_hard(&d, &unit(), &hard(Strategy::HardClose), &none, 2).unwrap();
        assert_eq!(
            got,
            vec![
                PairRef::Real { pos: 0, neg: 2 },
                PairRef::Real { pos: 1, neg: 2 }
            ]
        );
        assert!(draw_hard(&d, &unit(), &hard(Strategy::HardClose), &none, 0)
            .unwrap()
            .is_empty());
        assert!(matches!(
            draw_hard(&d, &unit(), &hard(Strategy::HardClose), &none, 3),
            Err(Error::PoolExhausted {
                requested: 3,
                available: 2
            })
        ));
        assert!(draw_hard(&d, &unit(), &hard(Strategy::SoftClose), &none, 1).is_err());
    }

    #[test]
    fn hard_ties_break_by_pair_order() {
        let d = line(&[0.0, 0.0], &[0.0, 0.0]);
        let m = Model::zeros(Mode::Plain, 1);
        let mut chosen = HashSet::new();
        chosen.insert(PairRef::Real { pos: 0, neg: 2 });
        let got = draw_hard(&d, &m, &hard(Strategy::HardClose), &chosen, 3).unwrap();
        assert_eq!(
            got,
            vec![
                PairRef::Real { pos: 0, neg: 3 },
                PairRef::Real { pos: 1, neg: 2 },
                PairRef::Real { pos: 1, neg: 3 }
            ]
        );
    }

    #[test]
    fn signed_zero_scores_tie() {
        // A -0.0 weight yields a mix of -0.0 and +0.0 measures; all tie.
        let d = line(&[0.0, 1.0], &[0.0]);
        let m = Model::from_weights(Mode::Plain, vec![-0.0]).unwrap();
        let cfg = SamplingConfig {
            strategy: Strategy::HardCorrect,
            gamma: Gamma::Value(0.5),
            ..SamplingConfig::default()
        };
        let got = draw_hard(&d, &m, &cfg, &HashSet::new(), 5).unwrap();
        assert_eq!(
            got,
            vec![
                PairRef::Real { pos: 0, neg: 2 },
                PairRef::Real { pos: 1, neg: 2 },
                PairRef::PseudoPos(0),
                PairRef::PseudoPos(1),
                PairRef::PseudoNeg(2)
            ]
        );
    }
}
