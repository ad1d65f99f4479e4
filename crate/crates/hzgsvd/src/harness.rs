//! Test-pair generation, accuracy metrics, and the comparison with the
//! route through the generalized eigenproblem of the Grammians.
//!
//! Generation accumulates products with compensated dot products; there is
//! no higher precision involved, so tolerances checked against generated
//! references are a few orders of magnitude looser than machine precision.

use std::f64::consts::PI;
use std::fmt::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::blocked::solve;
use crate::config::SolverConfig;
use crate::factor::{cholesky_upper, jacobi_eigenvalues, lu_complete, solve_left_upper_adjoint, solve_right_upper};
use crate::matrix::{Field, GsvdResult, Matrix, ProblemPair};
use crate::{Error, Result};

/// Parameters of a generated pair `F = U·Σ_F·X`, `G = V·Σ_G·X`.
#[derive(Clone, Debug, PartialEq)]
pub struct GenSpec {
    pub n: usize,
    pub sigma_f: Vec<f64>,
    pub sigma_g: Vec<f64>,
    /// Eigenvalues of the Hermitian shared factor `X`.
    pub lambda_x: Vec<f64>,
    pub seed: u64,
    pub field: Field,
    /// Use `U = V = X = I`.
    pub identity_factors: bool,
}

impl GenSpec {
    /// Values drawn log-uniformly from `[1e-2, 1]`, `X` with eigenvalues in
    /// `[1, 10]`.
    pub fn random(n: usize, seed: u64, field: Field) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
        let mut draw = |lo: f64, hi: f64| -> Vec<f64> {
            (0..n).map(|_| 10f64.powf(rng.gen_range(lo..=hi))).collect()
        };
        let sigma_f = draw(-2.0, 0.0);
        let sigma_g = draw(-2.0, 0.0);
        let lambda_x = draw(0.0, 1.0);
        GenSpec { n, sigma_f, sigma_g, lambda_x, seed, field, identity_factors: false }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 || [self.sigma_f.len(), self.sigma_g.len(), self.lambda_x.len()] != [n, n, n] {
            return Err(Error::Invalid("generator diagonals must have length n >= 1".into()));
        }
        let all = self.sigma_f.iter().chain(&self.sigma_g).chain(&self.lambda_x);
        if !all.clone().all(|&v| v > 0.0 && v.is_finite()) {
            return Err(Error::Invalid("prescribed values must be positive".into()));
        }
        Ok(())
    }
}

/// Residuals, orthogonality defects and errors in `σ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccuracyReport {
    pub res_f: f64,
    pub res_g: f64,
    pub orth_u: f64,
    pub orth_v: f64,
    pub max_rel_sigma: Option<f64>,
    pub avg_rel_sigma: Option<f64>,
}

impl AccuracyReport {
    pub const TSV_HEADER: &'static str = "res_f\tres_g\torth_u\torth_v\tmax_rel_sigma\tavg_rel_sigma";

    pub fn tsv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "NaN".to_string(), |x| format!("{x:.17e}"));
        format!(
            "{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{}\t{}",
            self.res_f,
            self.res_g,
            self.orth_u,
            self.orth_v,
            opt(self.max_rel_sigma),
            opt(self.avg_rel_sigma)
        )
    }
}

fn normal(rng: &mut ChaCha8Rng, field: Field) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = if field == Field::Complex { rng.sample(StandardNormal) } else { 0.0 };
    Complex64::new(re, im)
}

fn unit(rng: &mut ChaCha8Rng, field: Field) -> Complex64 {
    match field {
        Field::Real => Complex64::new(if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0),
        Field::Complex => Complex64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI)),
    }
}

/// A random orthogonal (unitary) matrix: `n - 1` random Householder
/// reflectors applied to a random diagonal of signs (phases).
pub fn random_orthogonal(n: usize, seed: u64, field: Field) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        q[j * n + j] = unit(&mut rng, field);
    }
    for k in (0..n.saturating_sub(1)).rev() {
        let len = n - k;
        let v: Vec<Complex64> = (0..len).map(|_| normal(&mut rng, field)).collect();
        let vv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vv == 0.0 {
            continue;
        }
        let tau = 2.0 / vv;
        for j in 0..n {
            let col = &mut q[j * n + k..(j + 1) * n];
            let s: Complex64 = v.iter().zip(col.iter()).map(|(a, b)| a.conj() * b).sum::<Complex64>() * tau;
            for (c, a) in col.iter_mut().zip(&v) {
                *c -= a * s;
            }
        }
    }
    Matrix::from_fn(n, n, field, |i, j| q[j * n + i])
}

fn scale_rows(m: &Matrix, d: &[f64]) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), m.field(), |i, j| m.get(i, j) * d[i])
}

/// Generates the pair and its reference `σ`, sorted descending.
pub fn gen_pair(spec: &GenSpec) -> Result<(ProblemPair, Vec<f64>)> {
    spec.validate()?;
    let (n, field) = (spec.n, spec.field);
    let sf = Matrix::from_fn(n, n, field, |i, j| Complex64::new(if i == j { spec.sigma_f[i] } else { 0.0 }, 0.0));
    let sg = Matrix::from_fn(n, n, field, |i, j| Complex64::new(if i == j { spec.sigma_g[i] } else { 0.0 }, 0.0));
    let (f, g) = if spec.identity_factors {
        (sf, sg)
    } else {
        let s = spec.seed.wrapping_mul(4);
        let w = random_orthogonal(n, s, field);
        let u = random_orthogonal(n, s + 1, field);
        let v = random_orthogonal(n, s + 2, field);
        let x = scale_rows(&w.adjoint(), &spec.lambda_x);
        let x = w.matmul(&x, true)?;
        let f = u.matmul(&scale_rows(&x, &spec.sigma_f), true)?;
        let g = v.matmul(&scale_rows(&x, &spec.sigma_g), true)?;
        (f, g)
    };
    let mut sigma: Vec<f64> = spec.sigma_f.iter().zip(&spec.sigma_g).map(|(a, b)| a / b).collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    Ok((ProblemPair::new(f, g)?, sigma))
}

/// Pair with `A = FᴴF`, `κ₂(A) = 10`, and `B = GᴴG`, `κ₂(B) = 10^j`.
#[derive(Clone, Debug)]
pub struct ConditionPair {
    pub pair: ProblemPair,
    pub a: Matrix,
    pub b: Matrix,
    pub lambda_a: Vec<f64>,
    pub lambda_b: Vec<f64>,
}

/// `n` values log-spaced from 1 down to `10^-e`.
fn log_spaced(n: usize, e: f64) -> Vec<f64> {
    (0..n).map(|i| 10f64.powf(-e * i as f64 / (n - 1) as f64)).collect()
}

/// `F = diag(√λ_A)·Q_Aᴴ`, `G = diag(√λ_B)·Q_Bᴴ` for random `Q_A`, `Q_B`.
pub fn gen_condition_pair(n: usize, j: u32, seed: u64, field: Field) -> Result<ConditionPair> {
    if n < 2 {
        return Err(Error::Invalid("condition pairs need n >= 2".into()));
    }
    let lambda_a = log_spaced(n, 1.0);
    let lambda_b = log_spaced(n, j as f64);
    let sqrt = |v: &[f64]| v.iter().map(|x| x.sqrt()).collect::<Vec<_>>();
    let qa = random_orthogonal(n, seed.wrapping_mul(2), field);
    let qb = random_orthogonal(n, seed.wrapping_mul(2) + 1, field);
    let f = scale_rows(&qa.adjoint(), &sqrt(&lambda_a));
    let g = scale_rows(&qb.adjoint(), &sqrt(&lambda_b));
    // Grammians as a user of the eigenproblem would form them.
    let a = f.adjoint().matmul(&f, false)?;
    let b = g.adjoint().matmul(&g, false)?;
    Ok(ConditionPair { pair: ProblemPair::new(f, g)?, a, b, lambda_a, lambda_b })
}

/// Eigenvalues of `(A, B)` via `B = RᴴR`, `C = R⁻ᴴ·A·R⁻¹` and Jacobi on `C`,
/// sorted descending. A Cholesky failure is returned as the error.
pub fn gevd_route(a: &Matrix, b: &Matrix) -> Result<Vec<f64>> {
    let r = cholesky_upper(b, false)?;
    let y = solve_right_upper(a, &r);
    let mut c = solve_left_upper_adjoint(&r, &y);
    // symmetrize away the rounding of the two solves
    let n = c.rows();
    for j in 0..n {
        for i in j + 1..n {
            let v = (c.get(i, j) + c.get(j, i).conj()) * 0.5;
            c.set(i, j, v);
            c.set(j, i, v.conj());
        }
    }
    Ok(jacobi_eigenvalues(&c, 30))
}

/// Relative errors `|x_i - r_i| / |r_i|` of the descending-sorted values.
fn rel_errors(x: &[f64], reference: &[f64]) -> Vec<f64> {
    let mut xs = x.to_vec();
    xs.sort_by(|a, b| b.total_cmp(a));
    let mut rs = reference.to_vec();
    rs.sort_by(|a, b| b.total_cmp(a));
    xs.iter().zip(&rs).map(|(a, b)| ((a - b) / b).abs()).collect()
}

/// Maximal relative error; NaN when any value is NaN.
pub fn max_rel_error(x: &[f64], reference: &[f64]) -> f64 {
    rel_errors(x, reference).into_iter().fold(0.0, |m, e| if e.is_nan() || m.is_nan() { f64::NAN } else { m.max(e) })
}

/// Metrics of `r` against `p`; `X = Z⁻¹` comes from LU with complete
/// pivoting.
pub fn accuracy_report(p: &ProblemPair, r: &GsvdResult, reference: Option<&[f64]>) -> Result<AccuracyReport> {
    let x = lu_complete(&r.z)?.inverse();
    let residual = |y: &Matrix, w: &Matrix, s: &[f64]| -> Result<f64> {
        let mut ws = w.clone();
        ws.scale_cols(s);
        let back = ws.matmul(&x, true)?;
        Ok(y.sub(&back).frobenius() / y.frobenius())
    };
    let orth = |w: &Matrix| -> Result<f64> {
        let g = w.adjoint().matmul(w, true)?;
        Ok(g.sub(&Matrix::identity(g.rows(), g.field())).frobenius())
    };
    let (max_rel_sigma, avg_rel_sigma) = match reference {
        Some(rf) => {
            let e = rel_errors(&r.sigma, rf);
            (Some(max_rel_error(&r.sigma, rf)), Some(e.iter().sum::<f64>() / e.len() as f64))
        }
        None => (None, None),
    };
    Ok(AccuracyReport {
        res_f: residual(&p.f, &r.u, &r.sigma_f)?,
        res_g: residual(&p.g, &r.v, &r.sigma_g)?,
        orth_u: orth(&r.u)?,
        orth_v: orth(&r.v)?,
        max_rel_sigma,
        avg_rel_sigma,
    })
}

/// One row of the conditioning experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PitfallRow {
    pub j: u32,
    pub kappa_b: f64,
    pub mre_gsvd: f64,
    /// NaN when the Cholesky factorization of `B` failed.
    pub mre_gevd: f64,
}

/// Reference solver: compensated dot products, prescaling, and a gate four
/// times tighter.
pub fn reference_config() -> SolverConfig {
    SolverConfig { gate_eps: f64::EPSILON / 4.0, ..SolverConfig::variant(1).expect("valid variant") }
}

pub fn pitfall_row(n: usize, j: u32, seed: u64, cfg: &SolverConfig) -> Result<PitfallRow> {
    let cp = gen_condition_pair(n, j, seed, Field::Real)?;
    let reference = solve(&cp.pair.f, &cp.pair.g, &reference_config())?.sigma;
    let sigma = solve(&cp.pair.f, &cp.pair.g, cfg)?.sigma;
    let mre_gevd = match gevd_route(&cp.a, &cp.b) {
        Ok(lambda) => {
            let s: Vec<f64> = lambda.iter().map(|l| l.sqrt()).collect();
            max_rel_error(&s, &reference)
        }
        Err(e) if e.is_rank_failure() => f64::NAN,
        Err(e) => return Err(e),
    };
    Ok(PitfallRow { j, kappa_b: 10f64.powi(j as i32), mre_gsvd: max_rel_error(&sigma, &reference), mre_gevd })
}

pub fn pitfall_report(n: usize, exponents: &[u32], seed: u64) -> Result<Vec<PitfallRow>> {
    let cfg = SolverConfig::default();
    exponents.iter().map(|&j| pitfall_row(n, j, seed, &cfg)).collect()
}

pub fn pitfall_tsv(rows: &[PitfallRow]) -> String {
    let mut out = String::from("kappaB\tmre_gsvd\tmre_gevd\n");
    for r in rows {
        let _ = writeln!(out, "{:e}\t{:.3e}\t{:.3e}", r.kappa_b, r.mre_gsvd, r.mre_gevd);
    }
    out
}

/// The 4×4 upper-triangular pair of ones, with `g11` replaced in `G`.
pub fn small_pitfall_pair(g11: f64) -> ProblemPair {
    let tri = |i: usize, j: usize| Complex64::new(if i <= j { 1.0 } else { 0.0 }, 0.0);
    let f = Matrix::from_fn(4, 4, Field::Real, tri);
    let mut g = f.clone();
    g.set(0, 0, Complex64::new(g11, 0.0));
    ProblemPair::new(f, g).expect("square pair")
}
