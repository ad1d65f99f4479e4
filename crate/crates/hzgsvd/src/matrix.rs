//! Column-major storage with split real and imaginary planes, plus the
//! problem and result containers.

use num_complex::Complex64;

use crate::dotprod;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Field {
    Real,
    Complex,
}

/// A dense matrix stored as a real plane and an optional imaginary plane,
/// both column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Option<Vec<f64>>,
}

/// Borrowed column (or any contiguous vector) in split form.
#[derive(Clone, Copy, Debug)]
pub struct Col<'a> {
    pub re: &'a [f64],
    pub im: Option<&'a [f64]>,
}

#[derive(Debug)]
pub struct ColMut<'a> {
    pub re: &'a mut [f64],
    pub im: Option<&'a mut [f64]>,
}

impl<'a> Col<'a> {
    pub fn real(re: &'a [f64]) -> Self {
        Col { re, im: None }
    }

    pub fn complex(re: &'a [f64], im: &'a [f64]) -> Self {
        Col { re, im: Some(im) }
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn get(&self, i: usize) -> Complex64 {
        Complex64::new(self.re[i], self.im.map_or(0.0, |v| v[i]))
    }
}

impl<'a> ColMut<'a> {
    pub fn as_col(&self) -> Col<'_> {
        Col { re: self.re, im: self.im.as_deref() }
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn get(&self, i: usize) -> Complex64 {
        Complex64::new(self.re[i], self.im.as_ref().map_or(0.0, |v| v[i]))
    }

    pub fn set(&mut self, i: usize, v: Complex64) {
        self.re[i] = v.re;
        if let Some(im) = self.im.as_mut() {
            im[i] = v.im;
        }
    }

    /// Exchanges contents with another column of the same length.
    pub fn swap_with(&mut self, other: &mut ColMut<'_>) {
        self.re.swap_with_slice(other.re);
        if let (Some(a), Some(b)) = (self.im.as_mut(), other.im.as_mut()) {
            a.swap_with_slice(b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.re.iter_mut().for_each(|x| *x *= s);
        if let Some(im) = self.im.as_mut() {
            im.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn divide(&mut self, s: f64) {
        self.re.iter_mut().for_each(|x| *x /= s);
        if let Some(im) = self.im.as_mut() {
            im.iter_mut().for_each(|x| *x /= s);
        }
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize, field: Field) -> Self {
        let len = rows * cols;
        Matrix {
            rows,
            cols,
            re: vec![0.0; len],
            im: (field == Field::Complex).then(|| vec![0.0; len]),
        }
    }

    pub fn identity(n: usize, field: Field) -> Self {
        let mut m = Self::zeros(n, n, field);
        for j in 0..n {
            m.re[j * n + j] = 1.0;
        }
        m
    }

    /// Builds a matrix from its planes, checking their lengths.
    pub fn from_planes(rows: usize, cols: usize, re: Vec<f64>, im: Option<Vec<f64>>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Invalid(format!("empty {rows}x{cols} matrix")));
        }
        let len = rows * cols;
        if re.len() != len {
            return Err(Error::LengthMismatch(re.len(), len));
        }
        if let Some(v) = im.as_ref() {
            if v.len() != len {
                return Err(Error::LengthMismatch(v.len(), len));
            }
        }
        Ok(Matrix { rows, cols, re, im })
    }

    /// Real matrix from row-major data, handy for literals.
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self::from_fn(rows, cols, Field::Real, |i, j| Complex64::new(data[i * cols + j], 0.0))
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        field: Field,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Self {
        let mut m = Self::zeros(rows, cols, field);
        for j in 0..cols {
            for i in 0..rows {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn field(&self) -> Field {
        if self.im.is_some() {
            Field::Complex
        } else {
            Field::Real
        }
    }

    pub fn is_complex(&self) -> bool {
        self.im.is_some()
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> Option<&[f64]> {
        self.im.as_deref()
    }

    pub fn re_mut(&mut self) -> &mut [f64] {
        &mut self.re
    }

    pub fn im_mut(&mut self) -> Option<&mut [f64]> {
        self.im.as_deref_mut()
    }

    pub fn into_planes(self) -> (Vec<f64>, Option<Vec<f64>>) {
        (self.re, self.im)
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let k = j * self.rows + i;
        Complex64::new(self.re[k], self.im.as_ref().map_or(0.0, |v| v[k]))
    }

    /// Sets an entry; the imaginary part is dropped for a real matrix.
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        let k = j * self.rows + i;
        self.re[k] = v.re;
        if let Some(im) = self.im.as_mut() {
            im[k] = v.im;
        }
    }

    pub fn col(&self, j: usize) -> Col<'_> {
        let r = j * self.rows..(j + 1) * self.rows;
        Col { re: &self.re[r.clone()], im: self.im.as_ref().map(|v| &v[r]) }
    }

    pub fn col_mut(&mut self, j: usize) -> ColMut<'_> {
        let r = j * self.rows..(j + 1) * self.rows;
        ColMut { re: &mut self.re[r.clone()], im: self.im.as_mut().map(|v| &mut v[r]) }
    }

    /// All columns as disjoint mutable views.
    pub fn cols_mut(&mut self) -> Vec<ColMut<'_>> {
        chunked_mut(&mut self.re, self.im.as_deref_mut(), self.rows)
    }

    /// Disjoint mutable views of consecutive groups of `width` columns.
    pub fn col_blocks_mut(&mut self, width: usize) -> Vec<ColMut<'_>> {
        chunked_mut(&mut self.re, self.im.as_deref_mut(), self.rows * width)
    }

    /// Copy of columns `start..start + width`.
    pub fn col_range(&self, start: usize, width: usize) -> Matrix {
        let r = start * self.rows..(start + width) * self.rows;
        Matrix {
            rows: self.rows,
            cols: width,
            re: self.re[r.clone()].to_vec(),
            im: self.im.as_ref().map(|v| v[r].to_vec()),
        }
    }

    /// Copy of the leading `rows × cols` submatrix.
    pub fn top_left(&self, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, self.field(), |i, j| self.get(i, j))
    }

    /// Copy of the selected columns, in the given order.
    pub fn select_cols(&self, idx: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(self.rows, idx.len(), self.field());
        for (k, &j) in idx.iter().enumerate() {
            let src = self.col(j);
            let mut dst = m.col_mut(k);
            dst.re.copy_from_slice(src.re);
            if let (Some(d), Some(s)) = (dst.im.as_mut(), src.im) {
                d.copy_from_slice(s);
            }
        }
        m
    }

    /// Same matrix promoted to the complex field.
    pub fn to_complex(&self) -> Matrix {
        let mut m = self.clone();
        if m.im.is_none() {
            m.im = Some(vec![0.0; m.re.len()]);
        }
        m
    }

    pub fn adjoint(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, self.field(), |i, j| self.get(j, i).conj())
    }

    /// `self · other`; every entry is one dot product from [`dotprod`].
    pub fn matmul(&self, other: &Matrix, compensated: bool) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::LengthMismatch(self.cols, other.rows));
        }
        let field = if self.is_complex() || other.is_complex() { Field::Complex } else { Field::Real };
        let at = self.adjoint();
        let mut c = Matrix::zeros(self.rows, other.cols, field);
        for j in 0..other.cols {
            for i in 0..self.rows {
                let v = dotprod::dot(at.col(i), other.col(j), true, compensated)?;
                c.set(i, j, v);
            }
        }
        Ok(c)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let field = if self.is_complex() || other.is_complex() { Field::Complex } else { Field::Real };
        Matrix::from_fn(self.rows, self.cols, field, |i, j| self.get(i, j) - other.get(i, j))
    }

    /// Frobenius norm, accumulated with compensated squares.
    pub fn frobenius(&self) -> f64 {
        let all = Col { re: &self.re, im: self.im.as_deref() };
        dotprod::norm_sq(all, true).sqrt()
    }

    /// Column-wise scaling by a real diagonal.
    pub fn scale_cols(&mut self, d: &[f64]) {
        assert_eq!(d.len(), self.cols);
        for (mut c, &s) in self.cols_mut().into_iter().zip(d) {
            c.scale(s);
        }
    }

    /// True when the matrix is bitwise the identity.
    pub fn is_identity(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let n = self.rows;
        let re_ok = self
            .re
            .iter()
            .enumerate()
            .all(|(k, &v)| if k % n == k / n { v == 1.0 } else { v == 0.0 });
        re_ok && self.im.as_ref().map_or(true, |im| im.iter().all(|&v| v == 0.0))
    }
}

fn chunked_mut<'a>(re: &'a mut [f64], im: Option<&'a mut [f64]>, size: usize) -> Vec<ColMut<'a>> {
    match im {
        Some(im) => re
            .chunks_mut(size)
            .zip(im.chunks_mut(size))
            .map(|(r, i)| ColMut { re: r, im: Some(i) })
            .collect(),
        None => re.chunks_mut(size).map(|r| ColMut { re: r, im: None }).collect(),
    }
}

/// A matrix pair with the dimensions it had before bordering.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemPair {
    pub f: Matrix,
    pub g: Matrix,
    pub original_n: usize,
    pub original_mf: usize,
    pub original_mg: usize,
}

impl ProblemPair {
    pub fn new(f: Matrix, g: Matrix) -> Result<Self> {
        if f.cols() != g.cols() {
            return Err(Error::Invalid(format!("F has {} columns, G has {}", f.cols(), g.cols())));
        }
        if f.field() != g.field() {
            return Err(Error::Invalid("F and G must share a field".into()));
        }
        let n = f.cols();
        if f.rows().min(g.rows()) < n {
            return Err(Error::Invalid(format!(
                "need min(m_F, m_G) >= n, got {}x{} and {}x{}",
                f.rows(),
                n,
                g.rows(),
                n
            )));
        }
        Ok(ProblemPair { original_n: n, original_mf: f.rows(), original_mg: g.rows(), f, g })
    }

    pub fn n(&self) -> usize {
        self.f.cols()
    }

    pub fn field(&self) -> Field {
        self.f.field()
    }
}

fn round_up(x: usize, m: usize) -> usize {
    x.div_ceil(m) * m
}

/// Pads columns to a multiple of `col_multiple` and rows to a multiple of
/// `row_multiple`. Each new column `n + k` of `Y` gets a single one at row
/// `m_Y + k`, so it stays decoupled from the rest and carries σ = 1.
pub fn border_pair(p: &ProblemPair, col_multiple: usize, row_multiple: usize) -> ProblemPair {
    let n = p.n();
    let n_new = round_up(n, col_multiple.max(1));
    let extra = n_new - n;
    let pad = |y: &Matrix| -> Matrix {
        let m = y.rows();
        let m_new = round_up(m + extra, row_multiple.max(1));
        if m_new == m && extra == 0 {
            return y.clone();
        }
        let mut out = Matrix::zeros(m_new, n_new, y.field());
        for j in 0..n {
            for i in 0..m {
                out.set(i, j, y.get(i, j));
            }
        }
        for k in 0..extra {
            out.set(m + k, n + k, Complex64::new(1.0, 0.0));
        }
        out
    };
    ProblemPair {
        f: pad(&p.f),
        g: pad(&p.g),
        original_n: p.original_n,
        original_mf: p.original_mf,
        original_mg: p.original_mg,
    }
}

/// Output of a solve: `F·Z = U·Σ_F`, `G·Z = V·Σ_G`, `Σ = Σ_F / Σ_G`.
#[derive(Clone, Debug, PartialEq)]
pub struct GsvdResult {
    pub u: Matrix,
    pub v: Matrix,
    pub z: Matrix,
    pub sigma_f: Vec<f64>,
    pub sigma_g: Vec<f64>,
    pub sigma: Vec<f64>,
    pub sweeps: usize,
    pub total_transforms: u64,
    pub big_transforms: u64,
    pub converged: bool,
    pub workers: usize,
}

impl GsvdResult {
    /// Generalized singular values in descending order.
    pub fn sorted_sigma(&self) -> Vec<f64> {
        let mut s = self.sigma.clone();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Drops the columns introduced by bordering and trims padded rows.
    ///
    /// A column is padding when its `Z` column vanishes on the original rows.
    pub fn strip_border(self, original_n: usize, mf: usize, mg: usize) -> Result<GsvdResult> {
        let n = self.z.cols();
        if n == original_n && self.u.rows() == mf && self.v.rows() == mg {
            return Ok(self);
        }
        let keep: Vec<usize> = (0..n)
            .filter(|&j| (0..original_n).any(|i| self.z.get(i, j) != Complex64::new(0.0, 0.0)))
            .collect();
        if keep.len() != original_n {
            return Err(Error::Invalid(format!(
                "found {} original columns after bordering, expected {}",
                keep.len(),
                original_n
            )));
        }
        let pick = |m: &Matrix, rows: usize| m.select_cols(&keep).top_left(rows, keep.len());
        Ok(GsvdResult {
            u: pick(&self.u, mf),
            v: pick(&self.v, mg),
            z: pick(&self.z, original_n),
            sigma_f: keep.iter().map(|&j| self.sigma_f[j]).collect(),
            sigma_g: keep.iter().map(|&j| self.sigma_g[j]).collect(),
            sigma: keep.iter().map(|&j| self.sigma[j]).collect(),
            ..self
        })
    }
}
