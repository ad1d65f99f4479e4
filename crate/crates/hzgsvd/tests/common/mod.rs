//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use hzgsvd::kernel2x2::{finalize_transform, form_pivot, relatively_orthogonal, rescale_pivot, transform, Mat2, PivotPair};
use hzgsvd::matrix::Col;
use hzgsvd::Criterion;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const ULP: f64 = f64::EPSILON / 2.0;

/// Exact complex rationals.
#[derive(Clone, Debug)]
struct Q {
    re: BigRational,
    im: BigRational,
}

impl Q {
    fn of(z: Complex64) -> Q {
        Q { re: BigRational::from_float(z.re).unwrap(), im: BigRational::from_float(z.im).unwrap() }
    }
    fn add(&self, o: &Q) -> Q {
        Q { re: &self.re + &o.re, im: &self.im + &o.im }
    }
    fn mul(&self, o: &Q) -> Q {
        Q { re: &self.re * &o.re - &self.im * &o.im, im: &self.re * &o.im + &self.im * &o.re }
    }
    fn conj(&self) -> Q {
        Q { re: self.re.clone(), im: -self.im.clone() }
    }
    fn approx(&self) -> Complex64 {
        Complex64::new(self.re.to_f64().unwrap(), self.im.to_f64().unwrap())
    }
}

/// `Zᴴ·M·Z` evaluated exactly, then rounded, for Hermitian
/// `M = [[m11, m12], [conj m12, m22]]`.
pub fn congruence(z: &Mat2, m11: f64, m12: Complex64, m22: f64) -> Mat2 {
    let m = [
        [Q::of(Complex64::new(m11, 0.0)), Q::of(m12)],
        [Q::of(m12.conj()), Q::of(Complex64::new(m22, 0.0))],
    ];
    let zq: Vec<Vec<Q>> = z.iter().map(|r| r.iter().map(|&v| Q::of(v)).collect()).collect();
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, o) in row.iter_mut().enumerate() {
            let mut s = Q { re: BigRational::zero(), im: BigRational::zero() };
            for k in 0..2 {
                for l in 0..2 {
                    s = s.add(&zq[k][i].conj().mul(&m[k][l]).mul(&zq[l][j]));
                }
            }
            *o = s.approx();
        }
    }
    out
}

fn random_col(rng: &mut ChaCha8Rng, m: usize, complex: bool) -> (Vec<f64>, Vec<f64>) {
    let mut draw = || -> f64 { rng.sample(StandardNormal) };
    let re: Vec<f64> = (0..m).map(|_| draw()).collect();
    let im: Vec<f64> = (0..m).map(|_| if complex { draw() } else { 0.0 }).collect();
    (re, im)
}

fn view(v: &(Vec<f64>, Vec<f64>), complex: bool) -> Col<'_> {
    if complex {
        Col::complex(&v.0, &v.1)
    } else {
        Col::real(&v.0)
    }
}

/// A pivot formed from four Gaussian columns of length 3 to 12, rescaled so
/// that `b11 = b22 = 1`.
pub fn random_pivot(rng: &mut ChaCha8Rng, complex: bool) -> PivotPair {
    let m = rng.gen_range(3..=12);
    let cols: Vec<_> = (0..4).map(|_| random_col(rng, m, complex)).collect();
    let p = form_pivot(
        view(&cols[0], complex),
        view(&cols[1], complex),
        view(&cols[2], complex),
        view(&cols[3], complex),
        false,
    )
    .unwrap();
    rescale_pivot(p)
}

/// Worst errors over a pivot suite, in units of `ε/2`.
#[derive(Clone, Copy, Debug, Default)]
pub struct PivotSuite {
    pub pivots: usize,
    /// `max |Zᴴ B' Z − I|` entrywise.
    pub b_err: f64,
    /// `|(Zᴴ A' Z)₁₂| / √(a11' a22')`.
    pub a_err: f64,
    /// The same two, restricted to `|b12'| ≤ 0.9`.
    pub b_err_moderate: f64,
    pub a_err_moderate: f64,
    /// `|(Zᴴ A' Z)₁₂| / √(a11'' a22'')`.
    pub a_err_transformed: f64,
    /// The two errors relative to `‖Ẑ‖²_F`, and for `Â` also to `max(a11', a22')`.
    pub b_err_backward: f64,
    pub a_err_backward: f64,
    /// Pivots whose transformed diagonal came out increasing.
    pub unsorted: usize,
    pub singular: usize,
}

/// Runs `count` random pivots that fail the orthogonality test through the
/// transform, sorting and finalization.
pub fn pivot_suite(seed: u64, complex: bool, count: usize) -> PivotSuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = PivotSuite::default();
    while s.pivots < count {
        let p = random_pivot(&mut rng, complex);
        if relatively_orthogonal(&p, 2, f64::EPSILON) {
            continue;
        }
        s.pivots += 1;
        let (body, _) = transform(&p, complex);
        let unit = PivotPair { d11: 1.0, d22: 1.0, ..p };
        let fin = finalize_transform(&body, &unit, true, Criterion::C1, complex);
        let bt = congruence(&fin.z, 1.0, p.b12, 1.0);
        let at = congruence(&fin.z, p.a11, p.a12, p.a22);
        let eb = [(bt[0][0] - 1.0).norm(), (bt[1][1] - 1.0).norm(), bt[0][1].norm()].into_iter().fold(0.0, f64::max) / ULP;
        let ea = at[0][1].norm() / (p.a11.sqrt() * p.a22.sqrt()) / ULP;
        s.b_err = s.b_err.max(eb);
        s.a_err = s.a_err.max(ea);
        if p.b12.norm() <= 0.9 {
            s.b_err_moderate = s.b_err_moderate.max(eb);
            s.a_err_moderate = s.a_err_moderate.max(ea);
        }
        s.a_err_transformed = s.a_err_transformed.max(at[0][1].norm() / (at[0][0].re * at[1][1].re).sqrt() / ULP);
        let zn: f64 = fin.z.iter().flatten().map(|v| v.norm_sqr()).sum();
        s.b_err_backward = s.b_err_backward.max(eb / zn);
        s.a_err_backward = s.a_err_backward.max(at[0][1].norm() / (zn * p.a11.max(p.a22)) / ULP);
        if at[0][0].re < at[1][1].re * (1.0 - 1e-12) {
            s.unsorted += 1;
        }
        let det = fin.z[0][0] * fin.z[1][1] - fin.z[0][1] * fin.z[1][0];
        if !(det.norm() > 0.0) {
            s.singular += 1;
        }
    }
    s
}

/// Bit patterns of both planes.
pub fn bits(m: &hzgsvd::Matrix) -> Vec<u64> {
    m.re().iter().chain(m.im().unwrap_or(&[])).map(|x| x.to_bits()).collect()
}

/// Bitwise equality of every matrix and vector in two results.
pub fn same_bits(a: &hzgsvd::GsvdResult, b: &hzgsvd::GsvdResult) -> bool {
    let v = |x: &[f64]| x.iter().map(|y| y.to_bits()).collect::<Vec<_>>();
    bits(&a.u) == bits(&b.u)
        && bits(&a.v) == bits(&b.v)
        && bits(&a.z) == bits(&b.z)
        && v(&a.sigma_f) == v(&b.sigma_f)
        && v(&a.sigma_g) == v(&b.sigma_g)
        && v(&a.sigma) == v(&b.sigma)
        && (a.sweeps, a.total_transforms, a.big_transforms, a.converged)
            == (b.sweeps, b.total_transforms, b.big_transforms, b.converged)
}
