//! Dense factorizations used around the solver: Cholesky, Householder QR
//! (plain and column-pivoted), LU with complete pivoting, triangular solves
//! and a cyclic two-sided Jacobi eigensolver for Hermitian matrices.

use num_complex::Complex64;

use crate::arith::{zabs, zcmul, zmul};
use crate::dotprod;
use crate::matrix::{Col, Field, Matrix};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Dense complex working copy, column-major.
#[derive(Clone, Debug)]
struct Work {
    rows: usize,
    cols: usize,
    a: Vec<Complex64>,
}

impl Work {
    fn from(m: &Matrix) -> Self {
        let mut a = Vec::with_capacity(m.rows() * m.cols());
        for j in 0..m.cols() {
            for i in 0..m.rows() {
                a.push(m.get(i, j));
            }
        }
        Work { rows: m.rows(), cols: m.cols(), a }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> Complex64 {
        self.a[j * self.rows + i]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut Complex64 {
        &mut self.a[j * self.rows + i]
    }

    fn to_matrix(&self, rows: usize, cols: usize, field: Field) -> Matrix {
        Matrix::from_fn(rows, cols, field, |i, j| self.at(i, j))
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        if i != j {
            for r in 0..self.rows {
                self.a.swap(i * self.rows + r, j * self.rows + r);
            }
        }
    }
}

fn unit_phase(z: Complex64) -> Complex64 {
    let m = zabs(z);
    if m == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(z.re / m, z.im / m)
    }
}

/// Upper-triangular `R` with positive real diagonal and `RᴴR = M`. Only the
/// upper triangle of `M` is read.
pub fn cholesky_upper(m: &Matrix, compensated: bool) -> Result<Matrix> {
    let n = m.rows();
    if m.cols() != n {
        return Err(Error::Invalid("Cholesky needs a square matrix".into()));
    }
    let mut r = Matrix::zeros(n, n, m.field());
    for j in 0..n {
        for i in j..n {
            // s = Σ_{k<j} conj(r_kj)·r_ki
            let s = if j == 0 {
                ZERO
            } else {
                let cj = r.col(j);
                let ci = r.col(i);
                let a = Col { re: &cj.re[..j], im: cj.im.map(|v| &v[..j]) };
                let b = Col { re: &ci.re[..j], im: ci.im.map(|v| &v[..j]) };
                dotprod::dot(a, b, true, compensated)?
            };
            if i == j {
                let d = m.get(j, j).re - s.re;
                if !(d > 0.0 && d.is_finite()) {
                    return Err(Error::NotPositiveDefinite(j));
                }
                r.set(j, j, Complex64::new(d.sqrt(), 0.0));
            } else {
                let rjj = r.get(j, j).re;
                let v = m.get(j, i) - s;
                r.set(j, i, Complex64::new(v.re / rjj, v.im / rjj));
            }
        }
    }
    Ok(r)
}

/// Householder reflector `H = I - τ·v·vᴴ` acting on rows `start..`.
#[derive(Clone, Debug)]
struct Reflector {
    start: usize,
    v: Vec<Complex64>,
    tau: f64,
}

impl Reflector {
    fn apply(&self, w: &mut Work, col: usize) {
        if self.tau == 0.0 {
            return;
        }
        let mut s = ZERO;
        for (k, &vk) in self.v.iter().enumerate() {
            s += zcmul(vk, w.at(self.start + k, col));
        }
        let s = s * self.tau;
        for (k, &vk) in self.v.iter().enumerate() {
            *w.at_mut(self.start + k, col) -= zmul(vk, s);
        }
    }
}

/// Reduces column `j` below the diagonal; returns the reflector.
fn householder_step(w: &mut Work, j: usize) -> Reflector {
    let m = w.rows;
    let x: Vec<Complex64> = (j..m).map(|i| w.at(i, j)).collect();
    let alpha = x.iter().fold(0.0f64, |acc, z| acc.hypot(zabs(*z)));
    if alpha == 0.0 {
        return Reflector { start: j, v: vec![ZERO; m - j], tau: 0.0 };
    }
    let ph = unit_phase(x[0]);
    let mut v = x;
    v[0] += ph * alpha;
    let vnorm_sq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let refl = Reflector { start: j, v, tau: 2.0 / vnorm_sq };
    for c in j..w.cols {
        refl.apply(w, c);
    }
    for i in j + 1..m {
        *w.at_mut(i, j) = ZERO;
    }
    refl
}

/// Flips the signs (phases) of the rows of `R` so its diagonal is
/// nonnegative; returns the removed phases.
fn normalize_r(w: &mut Work, k: usize) -> Vec<Complex64> {
    (0..k)
        .map(|j| {
            let ph = unit_phase(w.at(j, j));
            if ph != Complex64::new(1.0, 0.0) {
                let c = ph.conj();
                for col in j..w.cols {
                    let v = zmul(c, w.at(j, col));
                    *w.at_mut(j, col) = v;
                }
                *w.at_mut(j, j) = Complex64::new(zabs(w.at(j, j)), 0.0);
            }
            ph
        })
        .collect()
}

fn rank_check(w: &Work, norms: &[f64], order: usize) -> Result<()> {
    for (j, &nrm) in norms.iter().enumerate() {
        if !(w.at(j, j).re > order as f64 * f64::EPSILON * nrm) {
            return Err(Error::RankDeficient(j));
        }
    }
    Ok(())
}

/// `R` factor (nonnegative diagonal) of the Householder QR of `y`, without
/// pivoting. `Q` is not formed.
pub fn qr_r(y: &Matrix) -> Result<Matrix> {
    let k = y.cols();
    if y.rows() < k {
        return Err(Error::Invalid("QR needs at least as many rows as columns".into()));
    }
    let norms: Vec<f64> = (0..k).map(|j| dotprod::norm_sq(y.col(j), true).sqrt()).collect();
    let mut w = Work::from(y);
    for j in 0..k {
        householder_step(&mut w, j);
    }
    normalize_r(&mut w, k);
    rank_check(&w, &norms, k)?;
    Ok(w.to_matrix(k, k, y.field()))
}

/// `R` of the stacked block pair `[Yp Yq]`.
pub fn qr_shorten(yp: &Matrix, yq: &Matrix) -> Result<Matrix> {
    let w = yp.cols();
    let mut both = Matrix::zeros(yp.rows(), w + yq.cols(), yp.field());
    for j in 0..w {
        for i in 0..yp.rows() {
            both.set(i, j, yp.get(i, j));
        }
    }
    for j in 0..yq.cols() {
        for i in 0..yq.rows() {
            both.set(i, w + j, yq.get(i, j));
        }
    }
    qr_r(&both)
}

/// Thin QR with column pivoting: `Y·P = Q·R`.
#[derive(Clone, Debug)]
pub struct PivotedQr {
    pub q: Matrix,
    pub r: Matrix,
    /// `perm[k]` is the original column placed at position `k`.
    pub perm: Vec<usize>,
}

pub fn qr_pivoted(y: &Matrix) -> Result<PivotedQr> {
    let (m, n) = (y.rows(), y.cols());
    if m < n {
        return Err(Error::Invalid("QR needs at least as many rows as columns".into()));
    }
    let mut w = Work::from(y);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut norms: Vec<f64> = (0..n).map(|j| dotprod::norm_sq(y.col(j), true).sqrt()).collect();
    let mut refl = Vec::with_capacity(n);
    for j in 0..n {
        let tail = |w: &Work, c: usize| (j..m).fold(0.0f64, |acc, i| acc.hypot(zabs(w.at(i, c))));
        let best = (j..n)
            .map(|c| (c, tail(&w, c)))
            .fold((j, -1.0), |b, (c, v)| if v > b.1 { (c, v) } else { b })
            .0;
        w.swap_cols(j, best);
        perm.swap(j, best);
        norms.swap(j, best);
        refl.push(householder_step(&mut w, j));
    }
    let phases = normalize_r(&mut w, n);
    rank_check(&w, &norms, n)?;
    let r = w.to_matrix(n, n, y.field());
    let mut q = Work { rows: m, cols: n, a: vec![ZERO; m * n] };
    for j in 0..n {
        *q.at_mut(j, j) = Complex64::new(1.0, 0.0);
    }
    for h in refl.iter().rev() {
        for c in 0..n {
            h.apply(&mut q, c);
        }
    }
    for (j, ph) in phases.iter().enumerate() {
        for i in 0..m {
            let v = zmul(q.at(i, j), *ph);
            *q.at_mut(i, j) = v;
        }
    }
    Ok(PivotedQr { q: q.to_matrix(m, n, y.field()), r, perm })
}

/// `P·x` for a permutation given as `perm[k] = source column of k`:
/// row `perm[k]` of the result is row `k` of `x`.
pub fn permute_rows(x: &Matrix, perm: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), x.cols(), x.field());
    for (k, &p) in perm.iter().enumerate() {
        for j in 0..x.cols() {
            out.set(p, j, x.get(k, j));
        }
    }
    out
}

/// LU with complete pivoting, `P·A·Q = L·U`.
#[derive(Clone, Debug)]
pub struct Lu {
    w: Work,
    row_perm: Vec<usize>,
    col_perm: Vec<usize>,
    field: Field,
}

pub fn lu_complete(a: &Matrix) -> Result<Lu> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Invalid("LU needs a square matrix".into()));
    }
    let mut w = Work::from(a);
    let mut rp: Vec<usize> = (0..n).collect();
    let mut cp: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (mut bi, mut bj, mut bv) = (k, k, -1.0);
        for j in k..n {
            for i in k..n {
                let v = zabs(w.at(i, j));
                if v > bv {
                    (bi, bj, bv) = (i, j, v);
                }
            }
        }
        if !(bv > 0.0) {
            return Err(Error::Singular);
        }
        if bi != k {
            for j in 0..n {
                w.a.swap(j * n + bi, j * n + k);
            }
            rp.swap(bi, k);
        }
        w.swap_cols(bj, k);
        cp.swap(bj, k);
        let piv = w.at(k, k);
        let inv = Complex64::new(1.0, 0.0) / piv;
        for i in k + 1..n {
            let l = w.at(i, k) * inv;
            *w.at_mut(i, k) = l;
        }
        for j in k + 1..n {
            let ukj = w.at(k, j);
            if ukj == ZERO {
                continue;
            }
            for i in k + 1..n {
                let v = w.at(i, j) - zmul(w.at(i, k), ukj);
                *w.at_mut(i, j) = v;
            }
        }
    }
    Ok(Lu { w, row_perm: rp, col_perm: cp, field: a.field() })
}

impl Lu {
    /// Solves `A·X = B`.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        let n = self.w.rows;
        let mut x = Matrix::zeros(n, b.cols(), if b.is_complex() { Field::Complex } else { self.field });
        let mut y = vec![ZERO; n];
        for c in 0..b.cols() {
            for i in 0..n {
                y[i] = b.get(self.row_perm[i], c);
            }
            for i in 0..n {
                let mut s = y[i];
                for k in 0..i {
                    s -= zmul(self.w.at(i, k), y[k]);
                }
                y[i] = s;
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= zmul(self.w.at(i, k), y[k]);
                }
                y[i] = s / self.w.at(i, i);
            }
            for i in 0..n {
                x.set(self.col_perm[i], c, y[i]);
            }
        }
        x
    }

    pub fn inverse(&self) -> Matrix {
        self.solve(&Matrix::identity(self.w.rows, self.field))
    }
}

/// `X` with `X·R = A`, `R` upper triangular.
pub fn solve_right_upper(a: &Matrix, r: &Matrix) -> Matrix {
    let n = r.rows();
    let mut x = Matrix::zeros(a.rows(), n, a.field());
    for i in 0..a.rows() {
        for j in 0..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= zmul(x.get(i, k), r.get(k, j));
            }
            x.set(i, j, s / r.get(j, j));
        }
    }
    x
}

/// `X` with `Rᴴ·X = A`, `R` upper triangular.
pub fn solve_left_upper_adjoint(r: &Matrix, a: &Matrix) -> Matrix {
    let n = r.rows();
    let mut x = Matrix::zeros(n, a.cols(), a.field());
    for c in 0..a.cols() {
        for i in 0..n {
            let mut s = a.get(i, c);
            for k in 0..i {
                s -= zcmul(r.get(k, i), x.get(k, c));
            }
            x.set(i, c, s / r.get(i, i).conj());
        }
    }
    x
}

/// Eigenvalues of a Hermitian matrix, descending, by cyclic-by-row two-sided
/// Jacobi rotations (at most `max_sweeps` sweeps).
pub fn jacobi_eigenvalues(a: &Matrix, max_sweeps: usize) -> Vec<f64> {
    let n = a.rows();
    let mut w = Work::from(a);
    for j in 0..n {
        *w.at_mut(j, j) = Complex64::new(w.at(j, j).re, 0.0);
    }
    for _ in 0..max_sweeps {
        let off: f64 = (0..n)
            .flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (i, j)))
            .map(|(i, j)| w.at(i, j).norm_sqr())
            .sum();
        let diag: f64 = (0..n).map(|j| w.at(j, j).re.powi(2)).sum();
        if off == 0.0 || off.sqrt() <= f64::EPSILON * 1e-3 * diag.sqrt() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = w.at(p, q);
                let m = zabs(apq);
                if m == 0.0 {
                    continue;
                }
                let app = w.at(p, p).re;
                let aqq = w.at(q, q).re;
                if m <= f64::EPSILON * 1e-3 * (app.abs() * aqq.abs()).sqrt() {
                    *w.at_mut(p, q) = ZERO;
                    *w.at_mut(q, p) = ZERO;
                    continue;
                }
                let ph = Complex64::new(apq.re / m, apq.im / m);
                // rotation zeroing the real symmetric problem [[app, m], [m, aqq]]
                let theta = (aqq - app) / (2.0 * m);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                // J = [[c, s·ph], [-s·conj(ph), c]] applied as Jᴴ A J
                let sp = ph * s;
                for k in 0..n {
                    let akp = w.at(k, p);
                    let akq = w.at(k, q);
                    *w.at_mut(k, p) = akp * c - akq * sp.conj();
                    *w.at_mut(k, q) = akp * sp + akq * c;
                }
                for k in 0..n {
                    let apk = w.at(p, k);
                    let aqk = w.at(q, k);
                    *w.at_mut(p, k) = apk * c - aqk * sp;
                    *w.at_mut(q, k) = apk * sp.conj() + aqk * c;
                }
                *w.at_mut(p, q) = ZERO;
                *w.at_mut(q, p) = ZERO;
                let (dp, dq) = (w.at(p, p).re, w.at(q, q).re);
                *w.at_mut(p, p) = Complex64::new(dp, 0.0);
                *w.at_mut(q, q) = Complex64::new(dq, 0.0);
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|j| w.at(j, j).re).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}
