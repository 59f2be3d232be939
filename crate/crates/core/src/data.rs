//! Sparse feature vectors and labeled datasets in the LIBSVM text format.
//!
//! Feature indices are 1-based in files and 0-based in memory; the parser
//! and writer are the only places that convert between the two.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sparse vector with strictly ascending 0-based indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn new(indices: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::validation(format!(
                "sparse vector has {} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        if let Some(w) = indices.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::validation(format!(
                "sparse indices must be strictly ascending, found {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Self { indices, values })
    }

    pub fn from_pairs(entries: &[(u32, f64)]) -> Result<Self> {
        Self::new(
            entries.iter().map(|e| e.0).collect(),
            entries.iter().map(|e| e.1).collect(),
        )
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| (i as usize, v))
    }

    /// One past the largest stored index, i.e. the smallest dense length this
    /// vector fits into.
    pub fn min_dim(&self) -> usize {
        self.indices.last().map_or(0, |&i| i as usize + 1)
    }

    /// Inner product with a dense vector.
    pub fn dot(&self, dense: &[f64]) -> Result<f64> {
        if self.min_dim() > dense.len() {
            return Err(Error::Dimension {
                index: self.min_dim() - 1,
                len: dense.len(),
            });
        }
        Ok(self.dot_unchecked(dense))
    }

    /// Inner product without the range check. Panics on out-of-range indices.
    #[inline]
    pub(crate) fn dot_unchecked(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    /// `dense += scale * self`.
    #[inline]
    pub(crate) fn axpy_into(&self, scale: f64, dense: &mut [f64]) {
        for (i, v) in self.iter() {
            dense[i] += scale * v;
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Merged difference `self - other`; entries that cancel to exactly zero
    /// are dropped.
    pub fn sub(&self, other: &SparseVector) -> SparseVector {
        let mut indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        let (mut a, mut b) = (0, 0);
        let mut push = |i: u32, v: f64| {
            if v != 0.0 {
                indices.push(i);
                values.push(v);
            }
        };
        while a < self.nnz() || b < other.nnz() {
            let ia = self.indices.get(a).copied().unwrap_or(u32::MAX);
            let ib = other.indices.get(b).copied().unwrap_or(u32::MAX);
            match ia.cmp(&ib) {
                std::cmp::Ordering::Less => {
                    push(ia, self.values[a]);
                    a += 1;
                }
                std::cmp::Ordering::Greater => {
                    push(ib, -other.values[b]);
                    b += 1;
                }
                std::cmp::Ordering::Equal => {
                    push(ia, self.values[a] - other.values[b]);
                    a += 1;
                    b += 1;
                }
            }
        }
        SparseVector { indices, values }
    }

    pub fn neg(&self) -> SparseVector {
        SparseVector {
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    /// Shifts every index up by one and optionally stores `lead` at slot 0.
    /// Used to build the `[lead; x]` extended vectors of threshold mode.
    pub(crate) fn extended(&self, lead: Option<f64>) -> SparseVector {
        let extra = usize::from(lead.is_some());
        let mut indices = Vec::with_capacity(self.nnz() + extra);
        let mut values = Vec::with_capacity(self.nnz() + extra);
        if let Some(v) = lead {
            indices.push(0);
            values.push(v);
        }
        indices.extend(self.indices.iter().map(|i| i + 1));
        values.extend_from_slice(&self.values);
        SparseVector { indices, values }
    }
}

/// Difference of two sparse vectors; see [`SparseVector::sub`].
pub fn sparse_diff(a: &SparseVector, b: &SparseVector) -> SparseVector {
    a.sub(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn from_sign(sign: f64) -> Option<Label> {
        if sign == 1.0 {
            Some(Label::Positive)
        } else if sign == -1.0 {
            Some(Label::Negative)
        } else {
            None
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

/// How raw label tokens map onto the two ranking classes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LabelMode {
    /// Labels must be `+1`/`1` or `-1`.
    #[default]
    Binary,
    /// Multi-class input; instances whose label equals the value are positive,
    /// everything else negative.
    OneVsRest(f64),
    /// Any numeric label; positive when greater than zero.
    Sign,
}

/// Parsed LIBSVM records before class validation. Prediction accepts any
/// `Records`, including empty and single-class ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Records {
    pub instances: Vec<SparseVector>,
    pub labels: Vec<Label>,
    pub dim: usize,
}

/// A labeled bipartite ranking dataset. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    instances: Vec<SparseVector>,
    labels: Vec<Label>,
    pos_idx: Vec<usize>,
    neg_idx: Vec<usize>,
    dim: usize,
}

impl Dataset {
    pub fn new(instances: Vec<SparseVector>, labels: Vec<Label>, dim: usize) -> Result<Self> {
        if instances.len() != labels.len() {
            return Err(Error::validation(format!(
                "{} instances but {} labels",
                instances.len(),
                labels.len()
            )));
        }
        if instances.is_empty() {
            return Err(Error::validation("empty dataset"));
        }
        if let Some(x) = instances.iter().find(|x| x.min_dim() > dim) {
            return Err(Error::Dimension {
                index: x.min_dim() - 1,
                len: dim,
            });
        }
        let (pos_idx, neg_idx): (Vec<usize>, Vec<usize>) =
            (0..labels.len()).partition(|&k| labels[k].is_positive());
        if pos_idx.is_empty() || neg_idx.is_empty() {
            return Err(Error::validation(
                "dataset must contain both positive and negative instances",
            ));
        }
        Ok(Self {
            instances,
            labels,
            pos_idx,
            neg_idx,
            dim,
        })
    }

    pub fn from_records(records: Records) -> Result<Self> {
        Self::new(records.instances, records.labels, records.dim)
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_pos(&self) -> usize {
        self.pos_idx.len()
    }

    pub fn n_neg(&self) -> usize {
        self.neg_idx.len()
    }

    pub fn instances(&self) -> &[SparseVector] {
        &self.instances
    }

    pub fn instance(&self, k: usize) -> &SparseVector {
        &self.instances[k]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, k: usize) -> Label {
        self.labels[k]
    }

    pub fn pos_idx(&self) -> &[usize] {
        &self.pos_idx
    }

    pub fn neg_idx(&self) -> &[usize] {
        &self.neg_idx
    }

    /// Same data in a wider feature space.
    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        let needed = self
            .instances
            .iter()
            .map(SparseVector::min_dim)
            .max()
            .unwrap_or(0);
        if dim < needed {
            return Err(Error::Dimension {
                index: needed - 1,
                len: dim,
            });
        }
        self.dim = dim;
        Ok(self)
    }

    /// The instances at `rows`, in that order, keeping the feature space.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        Self::new(
            rows.iter().map(|&k| self.instances[k].clone()).collect(),
            rows.iter().map(|&k| self.labels[k]).collect(),
            self.dim,
        )
    }

    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for (x, y) in self.instances.iter().zip(&self.labels) {
            out.push_str(if y.is_positive() { "+1" } else { "-1" });
            for (i, v) in x.iter() {
                let _ = write!(out, " {}:{}", i + 1, v);
            }
            out.push('\n');
        }
        out
    }
}

/// Parses LIBSVM text into unvalidated records.
///
/// `dim` overrides the inferred dimension (max index seen); it is an error
/// for any index to exceed it.
pub fn parse_records<R: BufRead>(
    reader: R,
    dim: Option<usize>,
    label_mode: LabelMode,
) -> Result<Records> {
    let mut instances = Vec::new();
    let mut labels = Vec::new();
    let mut max_dim = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = line.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let perr = |message: String| Error::Parse {
            line: lineno,
            message,
        };
        let raw: f64 = label_tok
            .parse()
            .map_err(|_| perr(format!("invalid label '{label_tok}'")))?;
        let label = match label_mode {
            LabelMode::Binary => Label::from_sign(raw)
                .ok_or_else(|| perr(format!("label '{label_tok}' is not +1 or -1")))?,
            LabelMode::OneVsRest(positive) if raw == positive => Label::Positive,
            LabelMode::OneVsRest(_) => Label::Negative,
            LabelMode::Sign if raw > 0.0 => Label::Positive,
            LabelMode::Sign => Label::Negative,
        };

        let mut indices = Vec::new();
        let mut values = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| perr(format!("expected <index>:<value>, found '{tok}'")))?;
            let idx: u32 = idx
                .parse()
                .map_err(|_| perr(format!("invalid feature index '{idx}'")))?;
            if idx == 0 {
                return Err(perr("feature indices are 1-based".into()));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| perr(format!("invalid feature value '{val}'")))?;
            if !val.is_finite() {
                return Err(perr(format!("non-finite feature value '{val}'")));
            }
            let idx = idx - 1;
            if let Some(&prev) = indices.last() {
                if idx <= prev {
                    return Err(perr(format!(
                        "feature indices must be ascending ({} after {})",
                        idx + 1,
                        prev + 1
                    )));
                }
            }
            indices.push(idx);
            values.push(val);
        }
        let x = SparseVector { indices, values };
        max_dim = max_dim.max(x.min_dim());
        instances.push(x);
        labels.push(label);
    }

    let dim = match dim {
        Some(d) if d < max_dim => {
            return Err(Error::Dimension {
                index: max_dim - 1,
                len: d,
            })
        }
        Some(d) => d,
        None => max_dim,
    };
    Ok(Records {
        instances,
        labels,
        dim,
    })
}

/// Parses a LIBSVM byte stream into a validated [`Dataset`].
pub fn parse_libsvm<R: Read>(reader: R, dim: Option<usize>) -> Result<Dataset> {
    Dataset::from_records(parse_records(
        BufReader::new(reader),
        dim,
        LabelMode::Binary,
    )?)
}

/// Opens a LIBSVM file, transparently decompressing names ending in `.gz`.
pub fn read_records(path: &Path, dim: Option<usize>, label_mode: LabelMode) -> Result<Records> {
    let file = File::open(path)?;
    let is_gz = path.extension().is_some_and(|e| e == "gz");
    if is_gz {
        parse_records(BufReader::new(GzDecoder::new(file)), dim, label_mode)
    } else {
        parse_records(BufReader::new(file), dim, label_mode)
    }
}

pub fn read_dataset(path: &Path, dim: Option<usize>, label_mode: LabelMode) -> Result<Dataset> {
    Dataset::from_records(read_records(path, dim, label_mode)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(entries: &[(u32, f64)]) -> SparseVector {
        SparseVector::from_pairs(entries).unwrap()
    }

    #[test]
    fn parses_two_line_input() {
        let d = parse_libsvm("+1 1:0.5 3:1.0\n-1 2:2.0".as_bytes(), None).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.n_pos(), 1);
        assert_eq!(d.n_neg(), 1);
        assert_eq!(d.dim(), 3);
        assert_eq!(d.instance(0), &sv(&[(0, 0.5), (2, 1.0)]));
    }

    #[test]
    fn empty_input_is_a_validation_error() {
        let err = parse_libsvm("".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn single_class_is_a_validation_error() {
        let err = parse_libsvm("+1 1:1\n1 2:1\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn non_ascending_index_reports_line() {
        let err = parse_libsvm("+1 3:1 1:2".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = parse_libsvm("+1 1:1\n-1 2:1 2:3\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn malformed_tokens_are_parse_errors() {
        for text in [
            "+1 1:x\n-1 1:1",
            "2 1:1\n-1 1:1",
            "+1 a:1\n-1 1:1",
            "+1 11\n-1 1:1",
            "+1 0:1\n-1 1:1",
        ] {
            let err = parse_libsvm(text.as_bytes(), None).unwrap_err();
            assert!(
                matches!(err, Error::Parse { line: 1, .. }),
                "{text:?}: {err}"
            );
        }
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = "# header\n\n+1 1:1 # trailing\n   \n-1 2:1\n";
        let d = parse_libsvm(text.as_bytes(), None).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dim(), 2);
    }

    #[test]
    fn explicit_dimension_overrides_and_bounds() {
        let d = parse_libsvm("+1 1:1\n-1 2:1".as_bytes(), Some(10)).unwrap();
        assert_eq!(d.dim(), 10);
        let err = parse_libsvm("+1 1:1\n-1 5:1".as_bytes(), Some(3)).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn one_vs_rest_labels() {
        let r = parse_records(
            "1 1:1\n2 1:2\n3 1:3\n".as_bytes(),
            None,
            LabelMode::OneVsRest(1.0),
        )
        .unwrap();
        assert_eq!(
            r.labels,
            vec![Label::Positive, Label::Negative, Label::Negative]
        );
    }

    #[test]
    fn dot_examples() {
        assert_eq!(sv(&[(0, 2.0)]).dot(&[3.0]).unwrap(), 6.0);
        assert_eq!(SparseVector::empty().dot(&[]).unwrap(), 0.0);
        assert_eq!(
            sv(&[(0, 1.0), (2, -1.0)]).dot(&[2.0, 5.0, 2.0]).unwrap(),
            0.0
        );
        assert!(matches!(
            sv(&[(3, 1.0)]).dot(&[1.0, 2.0]),
            Err(Error::Dimension { index: 3, len: 2 })
        ));
    }

    #[test]
    fn diff_examples() {
        assert_eq!(
            sparse_diff(&sv(&[(0, 1.0)]), &sv(&[(0, 1.0)])),
            SparseVector::empty()
        );
        assert_eq!(
            sparse_diff(&sv(&[(0, 1.0)]), &sv(&[(1, 2.0)])),
            sv(&[(0, 1.0), (1, -2.0)])
        );
        assert_eq!(
            sparse_diff(&sv(&[(0, 3.0), (1, 1.0)]), &sv(&[(1, 1.0), (2, 4.0)])),
            sv(&[(0, 3.0), (2, -4.0)])
        );
    }

    #[test]
    fn rejects_unsorted_construction() {
        assert!(SparseVector::from_pairs(&[(2, 1.0), (1, 1.0)]).is_err());
        assert!(SparseVector::from_pairs(&[(1, 1.0), (1, 1.0)]).is_err());
    }

    #[test]
    fn reads_gzip_files() {
        use flate2::write::GzEncoder;
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.svm.gz");
        let mut enc = GzEncoder::new(File::create(&path).unwrap(), flate2::Compression::default());
        enc.write_all(b"+1 1:1\n-1 2:1\n").unwrap();
        enc.finish().unwrap();
        let d = read_dataset(&path, None, LabelMode::Binary).unwrap();
        assert_eq!((d.len(), d.dim()), (2, 2));
    }

    fn arb_sparse(dim: u32) -> impl Strategy<Value = SparseVector> {
        proptest::collection::btree_map(0..dim, -10.0f64..10.0, 0..dim as usize).prop_map(|m| {
            let (i, v): (Vec<u32>, Vec<f64>) = m.into_iter().unzip();
            SparseVector::new(i, v).unwrap()
        })
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset> {
        (1usize..8, 1usize..8).prop_flat_map(|(np, nn)| {
            proptest::collection::vec(arb_sparse(12), np + nn).prop_map(move |xs| {
                let labels = (0..np + nn)
                    .map(|k| {
                        if k < np {
                            Label::Positive
                        } else {
                            Label::Negative
                        }
                    })
                    .collect();
                Dataset::new(xs, labels, 12).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn libsvm_round_trip(d in arb_dataset()) {
            let text = d.to_libsvm();
            let back = parse_libsvm(text.as_bytes(), Some(d.dim())).unwrap();
            prop_assert_eq!(back, d);
        }

        #[test]
        fn diff_dot_is_linear(a in arb_sparse(16), b in arb_sparse(16),
                              w in proptest::collection::vec(-10.0f64..10.0, 16)) {
            let lhs = sparse_diff(&a, &b).dot(&w).unwrap();
            let rhs = a.dot(&w).unwrap() - b.dot(&w).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12, "{lhs} vs {rhs}");
        }
    }
}
