//! Evaluation machinery: the median-threshold baseline, cosine similarity,
//! rank correlation, the average absolute inter-dimension correlation, and
//! rank-weighted k-NN classification over codes.

use std::collections::{BTreeMap, HashMap};

use crate::code::{BinaryCode, CodeIndex};
use crate::embedding::EmbeddingSet;
use crate::error::{mismatch, Error, Result};
use crate::tensor::{dot, Vector};

/// Binarizes every dimension at its median over the set.
///
/// Bit `i` of row `j` is set when `E[j,i] ≥ median_i`. For even `n` the
/// median is the midpoint of the two middle order statistics.
pub fn median_binarize(set: &EmbeddingSet) -> Result<(CodeIndex, Vector)> {
    if set.is_empty() {
        return Err(Error::Empty("embedding set for median binarization"));
    }
    let thresholds: Vec<f64> = (0..set.dim()).map(|j| median(&set.column(j))).collect();
    let codes = set
        .rows()
        .map(|row| {
            let bits: Vec<bool> = row.iter().zip(&thresholds).map(|(x, t)| x >= t).collect();
            BinaryCode::from_bits(&bits)
        })
        .collect();
    let index = CodeIndex::new(set.dim(), codes, set.meta().clone())?;
    Ok((index, Vector::new(thresholds)?))
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Cosine similarity; both vectors must be nonzero.
pub fn cosine(a: &Vector, b: &Vector) -> Result<f64> {
    cosine_slices(a.as_slice(), b.as_slice())
}

fn cosine_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(mismatch("cosine", a.len(), b.len()));
    }
    let (na, nb) = (dot(a, a).sqrt(), dot(b, b).sqrt());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidArgument("cosine similarity of a zero vector".into()));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

fn check_pair_lengths(op: &'static str, x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(mismatch(op, x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(format!("{op} needs at least two observations")));
    }
    Ok(())
}

/// Sample Pearson correlation; `None` when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair_lengths("pearson", x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if is_constant(x) || is_constant(y) || sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

/// 1-based ranks, tied values sharing the mean of their rank range.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman's ρ: Pearson correlation of average ranks. `None` when either
/// input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair_lengths("spearman", x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Pairwise correlations between dimensions and their mean absolute value.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub dim: usize,
    /// Row-major `dim × dim`; `None` where a dimension is constant.
    pub correlations: Vec<Option<f64>>,
    /// `(1/d²) Σᵢ Σⱼ |ρ(i,j)|`, diagonal included, undefined entries
    /// counted as zero.
    pub average_abs: f64,
    pub constant_dims: Vec<usize>,
}

impl CorrelationReport {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.correlations[i * self.dim + j]
    }
}

/// Average absolute correlation between the dimensions of an embedding set.
pub fn avg_abs_correlation(set: &EmbeddingSet) -> Result<CorrelationReport> {
    correlation_report((0..set.dim()).map(|j| set.column(j)).collect(), set.len())
}

/// Average absolute correlation between bit positions, treating each bit as
/// a 0/1-valued dimension.
pub fn avg_abs_correlation_codes(index: &CodeIndex) -> Result<CorrelationReport> {
    let columns = (0..index.nbits())
        .map(|k| index.codes().iter().map(|c| if c.get(k) { 1.0 } else { 0.0 }).collect())
        .collect();
    correlation_report(columns, index.len())
}

fn correlation_report(columns: Vec<Vec<f64>>, n: usize) -> Result<CorrelationReport> {
    if n < 2 {
        return Err(Error::InvalidArgument("correlation needs at least two records".into()));
    }
    let dim = columns.len();
    if dim == 0 {
        return Err(Error::InvalidArgument(
            "correlation needs at least one dimension".into(),
        ));
    }
    // Center and normalize so each correlation is a single dot product.
    let mut constant_dims = Vec::new();
    let standardized: Vec<Option<Vec<f64>>> = columns
        .into_iter()
        .enumerate()
        .map(|(j, col)| {
            let mean = col.iter().sum::<f64>() / n as f64;
            let centered: Vec<f64> = col.iter().map(|x| x - mean).collect();
            let norm = dot(&centered, &centered).sqrt();
            if is_constant(&col) || norm == 0.0 {
                constant_dims.push(j);
                None
            } else {
                Some(centered.into_iter().map(|x| x / norm).collect())
            }
        })
        .collect();

    let mut correlations = vec![None; dim * dim];
    let mut total = 0.0;
    for i in 0..dim {
        let Some(ci) = &standardized[i] else { continue };
        correlations[i * dim + i] = Some(1.0);
        total += 1.0;
        for j in i + 1..dim {
            let Some(cj) = &standardized[j] else { continue };
            let rho = dot(ci, cj).clamp(-1.0, 1.0);
            correlations[i * dim + j] = Some(rho);
            correlations[j * dim + i] = Some(rho);
            total += 2.0 * rho.abs();
        }
    }
    Ok(CorrelationReport {
        dim,
        correlations,
        average_abs: total / (dim * dim) as f64,
        constant_dims,
    })
}

/// Vote weight of the neighbor at 1-based `rank`: `1/√rank`.
pub fn vote_weight(rank: usize) -> f64 {
    1.0 / (rank as f64).sqrt()
}

/// Outcome of one k-NN vote.
#[derive(Debug, Clone, PartialEq)]
pub struct Vote {
    pub label: String,
    /// Per-class weight totals, in order of each class's best rank.
    pub tallies: Vec<(String, f64)>,
}

/// Classifies `query` by a `1/√rank`-weighted vote of its `k` nearest
/// training codes. Ties between classes go to the class holding the
/// best-ranked neighbor.
pub fn knn_classify(train: &CodeIndex, query: &BinaryCode, k: usize) -> Result<Vote> {
    if train.is_empty() {
        return Err(Error::Empty("training index for k-NN classification"));
    }
    let labels = train.labels().ok_or(Error::MissingLabels)?;
    let neighbors = train.knn_search(query, k)?;
    let mut tallies: Vec<(String, f64)> = Vec::new();
    for nb in &neighbors {
        let label = &labels[nb.position];
        let w = vote_weight(nb.rank);
        match tallies.iter_mut().find(|(l, _)| l == label) {
            Some((_, score)) => *score += w,
            None => tallies.push((label.clone(), w)),
        }
    }
    let mut best = 0;
    for (i, (_, score)) in tallies.iter().enumerate() {
        if *score > tallies[best].1 {
            best = i;
        }
    }
    Ok(Vote {
        label: tallies[best].0.clone(),
        tallies,
    })
}

/// Fraction of positions where `predictions` and `truth` disagree.
pub fn classification_error<T: PartialEq>(predictions: &[T], truth: &[T]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(mismatch("classification_error", predictions.len(), truth.len()));
    }
    if truth.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    let wrong = predictions.iter().zip(truth).filter(|(p, t)| p != t).count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// k-NN classification of a whole labeled test index.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnReport {
    pub predictions: Vec<String>,
    pub error: f64,
    /// `(truth, predicted) → count`.
    pub confusion: BTreeMap<(String, String), usize>,
}

pub fn evaluate_knn(train: &CodeIndex, test: &CodeIndex, k: usize) -> Result<KnnReport> {
    let truth = test.labels().ok_or(Error::MissingLabels)?;
    train.labels().ok_or(Error::MissingLabels)?;
    let predictions = test
        .codes()
        .iter()
        .map(|c| knn_classify(train, c, k).map(|v| v.label))
        .collect::<Result<Vec<_>>>()?;
    let error = classification_error(&predictions, truth)?;
    let mut confusion = BTreeMap::new();
    for (t, p) in truth.iter().zip(&predictions) {
        *confusion.entry((t.clone(), p.clone())).or_insert(0) += 1;
    }
    Ok(KnnReport {
        predictions,
        error,
        confusion,
    })
}

/// A pair of record ids with a ground-truth similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub a: String,
    pub b: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoredPairSet {
    pub pairs: Vec<ScoredPair>,
}

impl ScoredPairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn ground_truth(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.score).collect()
    }

    fn resolve(&self, lookup: &HashMap<String, usize>) -> Result<Vec<(usize, usize)>> {
        let find = |id: &String| lookup.get(id).copied().ok_or_else(|| Error::UnknownId(id.clone()));
        self.pairs.iter().map(|p| Ok((find(&p.a)?, find(&p.b)?))).collect()
    }
}

/// Spearman's ρ between ground truth and computed similarities; `None`
/// when either side is constant.
pub fn eval_similarity(pairs: &ScoredPairSet, scores: &[f64]) -> Result<Option<f64>> {
    if pairs.len() != scores.len() {
        return Err(mismatch(
            "eval_similarity",
            format!("{} pairs", pairs.len()),
            format!("{} scores", scores.len()),
        ));
    }
    spearman(&pairs.ground_truth(), scores)
}

/// Cosine similarity of each pair of embeddings.
pub fn cosine_scores(set: &EmbeddingSet, pairs: &ScoredPairSet) -> Result<Vec<f64>> {
    let idx = pairs.resolve(&set.meta().lookup(set.len()))?;
    idx.into_iter()
        .map(|(a, b)| cosine_slices(set.row(a), set.row(b)))
        .collect()
}

/// Negated Hamming distance of each pair of codes, so that larger means
/// more similar.
pub fn hamming_scores(index: &CodeIndex, pairs: &ScoredPairSet) -> Result<Vec<f64>> {
    let idx = pairs.resolve(&index.meta().lookup(index.len()))?;
    let codes = index.codes();
    idx.into_iter()
        .map(|(a, b)| Ok(-(codes[a].hamming(&codes[b])? as f64)))
        .collect()
}
