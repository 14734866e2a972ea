//! Dense vectors and row-major matrices at `f64` precision.
//!
//! Only the handful of operations the compressor and its trainer need are
//! provided. Every public constructor rejects NaN and infinite entries.

use std::fmt;
use std::ops::Index;

use crate::error::{mismatch, Error, Result};

fn check_finite(data: &[f64], what: &str) -> Result<()> {
    match data.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("{what} entry {i} is {}", data[i]))),
        None => Ok(()),
    }
}

/// A dense real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        check_finite(&data, "vector")?;
        Ok(Self { data })
    }

    pub fn zeros(len: usize) -> Self {
        Self { data: vec![0.0; len] }
    }

    /// Callers guarantee finiteness.
    pub(crate) fn from_raw(data: Vec<f64>) -> Self {
        Self { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        if self.len() != other.len() {
            return Err(mismatch("dot", self.len(), other.len()));
        }
        Ok(dot(&self.data, &other.data))
    }

    pub fn norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Vector {
        Vector::from_raw(self.data.iter().map(|x| x * factor).collect())
    }

    fn zip_with(&self, other: &Vector, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Vector> {
        if self.len() != other.len() {
            return Err(mismatch(op, self.len(), other.len()));
        }
        let data: Vec<f64> = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Vector::new(data)
    }

    /// Applies a named scalar map to every entry.
    pub fn map(&self, f: ScalarMap) -> Vector {
        Vector::from_raw(self.data.iter().map(|&x| f.apply(x)).collect())
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(data: Vec<f64>) -> Result<Self> {
        Vector::new(data)
    }
}

/// Products of finite inputs can still overflow.
fn finite_result(op: &str, data: Vec<f64>) -> Result<Vector> {
    check_finite(&data, op)?;
    Ok(Vector::from_raw(data))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(mismatch(
                "Matrix::new",
                format!("{rows}x{cols}"),
                format!("{} values", data.len()),
            ));
        }
        check_finite(&data, "matrix")?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(mismatch("Matrix::from_rows", cols, bad.len()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("matrix entry ({r},{c}) = {value}")));
        }
        self.data[r * self.cols + c] = value;
        Ok(())
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vector {
        Vector::from_raw((0..self.rows).map(|r| self.get(r, c)).collect())
    }

    fn shape_str(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    /// `M · v`.
    pub fn matvec(&self, v: &Vector) -> Result<Vector> {
        if self.cols != v.len() {
            return Err(mismatch(
                "matvec",
                self.shape_str(),
                format!("vector of length {}", v.len()),
            ));
        }
        if self.cols == 0 {
            return Ok(Vector::zeros(self.rows));
        }
        let out = self.data.chunks_exact(self.cols).map(|row| dot(row, v.as_slice()));
        finite_result("matvec", out.collect())
    }

    /// `Mᵀ · v`, without materializing the transpose.
    pub fn matvec_transposed(&self, v: &Vector) -> Result<Vector> {
        if self.rows != v.len() {
            return Err(mismatch(
                "matvec_transposed",
                self.shape_str(),
                format!("vector of length {}", v.len()),
            ));
        }
        let mut out = vec![0.0; self.cols];
        for (row, &scale) in self.data.chunks_exact(self.cols.max(1)).zip(v.as_slice()) {
            if scale == 0.0 {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(row) {
                *o += m * scale;
            }
        }
        finite_result("matvec_transposed", out)
    }

    /// Outer product `u · vᵀ`.
    pub fn outer(u: &Vector, v: &Vector) -> Matrix {
        let mut data = Vec::with_capacity(u.len() * v.len());
        for &a in u.as_slice() {
            data.extend(v.as_slice().iter().map(|&b| a * b));
        }
        Matrix {
            rows: u.len(),
            cols: v.len(),
            data,
        }
    }

    /// `self += u · vᵀ`.
    pub(crate) fn add_outer(&mut self, u: &Vector, v: &Vector) {
        debug_assert_eq!((self.rows, self.cols), (u.len(), v.len()));
        for (row, &a) in self.data.chunks_exact_mut(self.cols.max(1)).zip(u.as_slice()) {
            if a == 0.0 {
                continue;
            }
            for (m, &b) in row.iter_mut().zip(v.as_slice()) {
                *m += a * b;
            }
        }
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            writeln!(f, "{:?}", self.row(r))?;
        }
        Ok(())
    }
}

/// Scalar maps used by the encoder layers and their backward passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarMap {
    Tanh,
    Softplus,
    TanhDeriv,
    SoftplusDeriv,
}

impl ScalarMap {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ScalarMap::Tanh => x.tanh(),
            ScalarMap::Softplus => softplus(x),
            ScalarMap::TanhDeriv => {
                let t = x.tanh();
                1.0 - t * t
            }
            ScalarMap::SoftplusDeriv => logistic(x),
        }
    }
}

/// `ln(1 + eˣ)` in the overflow-safe form `max(x, 0) + ln(1 + e^(−|x|))`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `1 / (1 + e^(−x))`, evaluated without overflow for either sign.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Free-function form of [`Matrix::matvec`].
pub fn matvec(m: &Matrix, v: &Vector) -> Result<Vector> {
    m.matvec(v)
}

/// Free-function form of [`Matrix::matvec_transposed`].
pub fn matvec_transposed(m: &Matrix, v: &Vector) -> Result<Vector> {
    m.matvec_transposed(v)
}

/// Free-function form of [`Matrix::outer`].
pub fn outer(u: &Vector, v: &Vector) -> Matrix {
    Matrix::outer(u, v)
}

/// Free-function form of [`Vector::map`].
pub fn elementwise(v: &Vector, f: ScalarMap) -> Vector {
    v.map(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn matvec_examples() {
        let id = Matrix::identity(3);
        assert_eq!(matvec(&id, &v(&[1., 2., 3.])).unwrap(), v(&[1., 2., 3.]));
        let z = Matrix::zeros(2, 3);
        assert_eq!(matvec(&z, &v(&[4., -1., 9.])).unwrap(), v(&[0., 0.]));
        let m = Matrix::from_rows(&[vec![1., 2.], vec![3., 4.]]).unwrap();
        assert_eq!(matvec(&m, &v(&[1., 1.])).unwrap(), v(&[3., 7.]));
    }

    #[test]
    fn matvec_transposed_examples() {
        let m = Matrix::from_rows(&[vec![1., 2.], vec![3., 4.]]).unwrap();
        assert_eq!(matvec_transposed(&m, &v(&[1., 1.])).unwrap(), v(&[4., 6.]));
        let id = Matrix::identity(2);
        assert_eq!(matvec_transposed(&id, &v(&[5., 6.])).unwrap(), v(&[5., 6.]));
        assert_eq!(
            matvec_transposed(&Matrix::zeros(2, 3), &v(&[1., 1.])).unwrap(),
            Vector::zeros(3)
        );
    }

    #[test]
    fn dimension_mismatch_names_shapes() {
        let m = Matrix::zeros(2, 3);
        let err = matvec(&m, &v(&[1., 2.])).unwrap_err().to_string();
        assert!(err.contains("2x3") && err.contains("length 2"), "{err}");
        assert!(matvec_transposed(&m, &v(&[1., 2., 3.])).is_err());
    }

    #[test]
    fn outer_examples() {
        let m = outer(&v(&[1., 0.]), &v(&[0., 1.]));
        assert_eq!(m, Matrix::from_rows(&[vec![0., 1.], vec![0., 0.]]).unwrap());
        assert_eq!(outer(&v(&[0., 0.]), &v(&[3., 4.])), Matrix::zeros(2, 2));
        assert_eq!(outer(&v(&[2.]), &v(&[3.])).as_slice(), &[6.]);
    }

    #[test]
    fn elementwise_examples() {
        let sp = elementwise(&v(&[0.0, 50.0, -800.0]), ScalarMap::Softplus);
        assert!((sp[0] - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((sp[1] - 50.0).abs() < 1e-12);
        assert!(sp[2] >= 0.0 && sp[2].is_finite());
        assert_eq!(elementwise(&v(&[0.0]), ScalarMap::Tanh)[0], 0.0);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::new(1, 1, vec![f64::INFINITY]).is_err());
        assert!(Matrix::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = Rng::new(3);
        for _ in 0..50 {
            let (r, c) = (1 + rng.below(9), 1 + rng.below(9));
            let m = Matrix::new(r, c, (0..r * c).map(|_| rng.normal()).collect()).unwrap();
            let u = Vector::new((0..r).map(|_| rng.normal()).collect()).unwrap();
            let x = Vector::new((0..c).map(|_| rng.normal()).collect()).unwrap();
            let lhs = m.matvec_transposed(&u).unwrap().dot(&x).unwrap();
            let rhs = u.dot(&m.matvec(&x).unwrap()).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1.0));
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = Rng::new(11);
        let h = 1e-6;
        for _ in 0..100 {
            let x = rng.uniform_range(-10.0, 10.0);
            for (f, df) in [
                (ScalarMap::Tanh, ScalarMap::TanhDeriv),
                (ScalarMap::Softplus, ScalarMap::SoftplusDeriv),
            ] {
                let fd = (f.apply(x + h) - f.apply(x - h)) / (2.0 * h);
                assert!((fd - df.apply(x)).abs() < 1e-6, "{f:?} at {x}");
            }
        }
    }
}
