//! Seeded fixture generators with known structure.

use crate::code::{BinaryCode, CodeIndex};
use crate::compressor::expand_code;
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::records::RecordMeta;
use crate::rng::Rng;
use crate::tensor::Matrix;

/// Embeddings that are exactly `C_true · expand(code)` for a random
/// Gaussian codebook (entries `N(0, 1/b)`) and uniformly random `b`-bit
/// codes. Returns the data with the planted codebook and codes.
pub fn planted(dim: usize, bits: usize, n: usize, seed: u64) -> Result<(EmbeddingSet, Matrix, Vec<BinaryCode>)> {
    if dim == 0 || bits == 0 {
        return Err(Error::InvalidArgument("dimension and bits must be positive".into()));
    }
    let mut rng = Rng::new(seed);
    let scale = 1.0 / (bits as f64).sqrt();
    let codebook = Matrix::new(
        dim,
        2 * bits,
        (0..dim * 2 * bits).map(|_| scale * rng.normal()).collect(),
    )?;
    let mut data = Vec::with_capacity(n * dim);
    let mut codes = Vec::with_capacity(n);
    for _ in 0..n {
        let bits: Vec<bool> = (0..bits).map(|_| rng.bernoulli(0.5)).collect();
        let code = BinaryCode::from_bits(&bits);
        data.extend(codebook.matvec(&expand_code(&code))?.into_vec());
        codes.push(code);
    }
    Ok((EmbeddingSet::new(dim, data, RecordMeta::default())?, codebook, codes))
}

/// `factors` independent standard normal factors, each copied into
/// `copies` dimensions (dimension `j` carries factor `j % factors`), with
/// independent Gaussian noise of standard deviation `noise` added to
/// every entry.
pub fn duplicated_factors(factors: usize, copies: usize, noise: f64, n: usize, seed: u64) -> Result<EmbeddingSet> {
    if factors == 0 || copies == 0 {
        return Err(Error::InvalidArgument("factors and copies must be positive".into()));
    }
    let mut rng = Rng::new(seed);
    let dim = factors * copies;
    let mut data = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let f: Vec<f64> = (0..factors).map(|_| rng.normal()).collect();
        data.extend((0..dim).map(|j| f[j % factors] + noise * rng.normal()));
    }
    EmbeddingSet::new(dim, data, RecordMeta::default())
}

/// Independent standard normal dimensions.
pub fn gaussian(dim: usize, n: usize, seed: u64) -> Result<EmbeddingSet> {
    let mut rng = Rng::new(seed);
    EmbeddingSet::new(dim, (0..n * dim).map(|_| rng.normal()).collect(), RecordMeta::default())
}

/// Two labeled clusters of codes: a random center and a second center
/// differing from it in exactly `bits / 2` positions. Each sample copies
/// the center of a fair-coin class and flips every bit independently with
/// probability `flip`. Returns `(train, test)` with labels `c0`/`c1`.
pub fn two_clusters(
    bits: usize,
    n_train: usize,
    n_test: usize,
    flip: f64,
    seed: u64,
) -> Result<(CodeIndex, CodeIndex)> {
    if bits == 0 {
        return Err(Error::InvalidArgument("bits must be positive".into()));
    }
    if !(0.0..=1.0).contains(&flip) {
        return Err(Error::InvalidArgument(format!(
            "flip probability {flip} outside [0, 1]"
        )));
    }
    let mut rng = Rng::new(seed);
    let first: Vec<bool> = (0..bits).map(|_| rng.bernoulli(0.5)).collect();
    let mut second = first.clone();
    let mut positions: Vec<usize> = (0..bits).collect();
    rng.shuffle(&mut positions);
    for &k in &positions[..bits / 2] {
        second[k] = !second[k];
    }
    let centers = [first, second];

    let sample = |n: usize, prefix: &str, rng: &mut Rng| -> Result<CodeIndex> {
        let mut codes = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let class = rng.bernoulli(0.5) as usize;
            let bits: Vec<bool> = centers[class].iter().map(|&b| b ^ rng.bernoulli(flip)).collect();
            codes.push(BinaryCode::from_bits(&bits));
            labels.push(format!("c{class}"));
        }
        let ids = (0..n).map(|i| format!("{prefix}{i}")).collect();
        CodeIndex::new(bits, codes, RecordMeta::new(n, Some(ids), Some(labels))?)
    };
    let train = sample(n_train, "train-", &mut rng)?;
    let test = sample(n_test, "test-", &mut rng)?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_rows_are_codebook_sums() {
        let (data, c, codes) = planted(6, 3, 10, 1).unwrap();
        for (i, code) in codes.iter().enumerate() {
            let mut want = vec![0.0; 6];
            for k in 0..3 {
                let col = if code.get(k) { 2 * k } else { 2 * k + 1 };
                for (r, w) in want.iter_mut().enumerate() {
                    *w += c.get(r, col);
                }
            }
            for (a, b) in data.row(i).iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn duplicated_factor_layout() {
        let set = duplicated_factors(2, 3, 0.0, 5, 4).unwrap();
        assert_eq!(set.dim(), 6);
        for row in set.rows() {
            assert_eq!(row[0], row[2]);
            assert_eq!(row[1], row[5]);
        }
    }

    #[test]
    fn clusters_have_separated_centers() {
        let (train, test) = two_clusters(64, 50, 20, 0.0, 3).unwrap();
        assert_eq!((train.len(), test.len()), (50, 20));
        let labels = train.labels().unwrap();
        let a = labels.iter().position(|l| l == "c0").unwrap();
        let b = labels.iter().position(|l| l == "c1").unwrap();
        assert_eq!(train.codes()[a].hamming(&train.codes()[b]).unwrap(), 32);
    }

    #[test]
    fn generators_are_seeded() {
        assert_eq!(gaussian(3, 4, 9).unwrap(), gaussian(3, 4, 9).unwrap());
        assert_ne!(gaussian(3, 4, 9).unwrap(), gaussian(3, 4, 10).unwrap());
    }
}
