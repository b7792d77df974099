//! Dense real-symmetric and complex-Hermitian matrices (row-major storage).

use num_complex::Complex64;

use crate::error::{Result, SpectralError};

#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Build from the upper triangle `f(i, j)`, `i <= j`; the lower triangle mirrors it.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Validate symmetry of a row-major buffer and wrap it.
    pub fn from_row_major(n: usize, data: Vec<f64>, tol: f64) -> Result<Self> {
        if data.len() != n * n {
            return Err(SpectralError::Shape(format!(
                "expected {} values for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        let m = Self { n, data };
        let scale = m.frobenius().max(1.0);
        for i in 0..n {
            for j in i + 1..n {
                if (m.get(i, j) - m.get(j, i)).abs() > tol * scale {
                    return Err(SpectralError::Shape(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// `P A Pᵀ` for the permutation `i ↦ perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self::from_upper(self.n, |i, j| self.get(perm[i], perm[j]))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `(1/scale) · F Fᵀ` for a `rows × cols` row-major factor.
    pub fn gram(factor: &[f64], rows: usize, cols: usize, scale: f64) -> Self {
        let mut m = Self::zeros(rows);
        for i in 0..rows {
            let ri = &factor[i * cols..(i + 1) * cols];
            for j in i..rows {
                let rj = &factor[j * cols..(j + 1) * cols];
                let dot: f64 = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
                m.set(i, j, dot / scale);
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl HermMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    /// Build from the upper triangle; diagonal imaginary parts are dropped.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    /// Sets `(i, j)` to `v` and `(j, i)` to `conj(v)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        if i == j {
            self.data[i * self.n + i] = Complex64::new(v.re, 0.0);
        } else {
            self.data[i * self.n + j] = v;
            self.data[j * self.n + i] = v.conj();
        }
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn is_hermitian_exact(&self) -> bool {
        (0..self.n).all(|i| {
            (0..self.n).all(|j| self.get(i, j) == self.get(j, i).conj())
        })
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).re).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// `(1/scale) · F F*` for a `rows × cols` row-major complex factor.
    pub fn gram(factor: &[Complex64], rows: usize, cols: usize, scale: f64) -> Self {
        let mut m = Self::zeros(rows);
        for i in 0..rows {
            let ri = &factor[i * cols..(i + 1) * cols];
            for j in i..rows {
                let rj = &factor[j * cols..(j + 1) * cols];
                let dot: Complex64 = ri.iter().zip(rj).map(|(a, b)| a * b.conj()).sum();
                m.set(i, j, dot / scale);
            }
        }
        m
    }

    /// Real `2n × 2n` embedding `[[Re, −Im], [Im, Re]]`; each eigenvalue appears twice.
    pub fn real_embedding(&self) -> SymMatrix {
        let n = self.n;
        let mut out = SymMatrix::zeros(2 * n);
        for i in 0..n {
            for j in i..n {
                let v = self.get(i, j);
                out.set(i, j, v.re);
                out.set(n + i, n + j, v.re);
                out.set(n + i, j, v.im);
                out.set(i, n + j, -v.im);
            }
        }
        out
    }
}

/// A realized matrix frame, real symmetric or complex Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameMatrix {
    Real(SymMatrix),
    Complex(HermMatrix),
}

impl FrameMatrix {
    pub fn dim(&self) -> usize {
        match self {
            FrameMatrix::Real(m) => m.dim(),
            FrameMatrix::Complex(m) => m.dim(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            FrameMatrix::Real(m) => m.trace(),
            FrameMatrix::Complex(m) => m.trace(),
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        match self {
            FrameMatrix::Real(m) => m.frobenius_sq(),
            FrameMatrix::Complex(m) => m.frobenius_sq(),
        }
    }

    /// `‖A − B‖_F²`.
    pub fn distance_sq(&self, other: &Self) -> Result<f64> {
        match (self, other) {
            (FrameMatrix::Real(a), FrameMatrix::Real(b)) if a.dim() == b.dim() => {
                Ok(a.sub(b).frobenius_sq())
            }
            (FrameMatrix::Complex(a), FrameMatrix::Complex(b)) if a.dim() == b.dim() => {
                Ok(a.sub(b).frobenius_sq())
            }
            _ => Err(SpectralError::Shape("frames differ in kind or dimension".into())),
        }
    }

    /// Entries `(i, j)` for `i <= j`, row by row (real part only for complex frames
    /// would lose data, so complex frames yield `re` then `im`).
    pub fn upper_values(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                match self {
                    FrameMatrix::Real(m) => out.push(m.get(i, j)),
                    FrameMatrix::Complex(m) => {
                        let v = m.get(i, j);
                        out.push(v.re);
                        out.push(v.im);
                    }
                }
            }
        }
        out
    }

    /// Dense row-major values (complex frames interleave re/im).
    pub fn dense_values(&self) -> Vec<f64> {
        match self {
            FrameMatrix::Real(m) => m.as_slice().to_vec(),
            FrameMatrix::Complex(m) => m.as_slice().iter().flat_map(|c| [c.re, c.im]).collect(),
        }
    }
}
