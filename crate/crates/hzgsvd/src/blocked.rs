//! The blocked level: Grammians of block-column pairs, their triangular
//! factors, an inner pointwise solve, and the block postmultiplication.
//! Also the inter-sweep and final rescaling, the tall-pair preprocessing
//! and the public entry points.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::arith::{zfma, zmul};
use crate::config::SolverConfig;
use crate::dotprod;
use crate::factor::{cholesky_upper, permute_rows, qr_pivoted, qr_shorten};
use crate::matrix::{border_pair, Col, ColMut, Field, GsvdResult, Matrix, ProblemPair};
use crate::pointwise::{diag_matrix, gsvd_1x1, prescale_init, solve_pointwise, SweepStats};
use crate::strategies::gen_table;
use crate::{Error, Result};

/// Summary of a run of outer sweeps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OuterRun {
    pub sweeps: usize,
    pub stats: SweepStats,
    /// The last sweep performed no big transformation.
    pub converged: bool,
}

fn split_cols<'b>(b: &'b ColMut<'_>, w: usize) -> Vec<Col<'b>> {
    let m = b.re.len() / w;
    (0..w)
        .map(|k| Col {
            re: &b.re[k * m..(k + 1) * m],
            im: b.im.as_deref().map(|v| &v[k * m..(k + 1) * m]),
        })
        .collect()
}

/// `YᴴY` for the columns `y`: the lower triangle is computed, the upper is
/// its conjugate.
fn grammian(y: &[Col<'_>], field: Field, compensated: bool) -> Result<Matrix> {
    let k = y.len();
    let mut a = Matrix::zeros(k, k, field);
    for j in 0..k {
        a.set(j, j, Complex64::new(dotprod::norm_sq(y[j], compensated), 0.0));
        for i in j + 1..k {
            let v = dotprod::dot(y[i], y[j], true, compensated)?;
            a.set(i, j, v);
            a.set(j, i, v.conj());
        }
    }
    Ok(a)
}

fn field_of(c: &Col<'_>) -> Field {
    if c.im.is_some() {
        Field::Complex
    } else {
        Field::Real
    }
}

/// `Â = [Fp Fq]ᴴ[Fp Fq]`, `B̂ = [Gp Gq]ᴴ[Gp Gq]`.
pub fn form_grammians(fp: &Matrix, fq: &Matrix, gp: &Matrix, gq: &Matrix, compensated: bool) -> Result<(Matrix, Matrix)> {
    fn cols<'m>(p: &'m Matrix, q: &'m Matrix) -> Vec<Col<'m>> {
        (0..p.cols()).map(|j| p.col(j)).chain((0..q.cols()).map(|j| q.col(j))).collect()
    }
    let a = grammian(&cols(fp, fq), fp.field(), compensated)?;
    let b = grammian(&cols(gp, gq), gp.field(), compensated)?;
    Ok((a, b))
}

/// `[Yp Yq] ← [Yp Yq]·Z̃` on two block views of width `w` each.
///
/// Zero coefficients are skipped; each output column starts from its first
/// nonzero product and accumulates the rest with fused multiply-adds.
fn postmultiply_views(yp: &mut ColMut<'_>, yq: &mut ColMut<'_>, w: usize, zt: &Matrix) {
    let m = yp.re.len() / w;
    let n2 = 2 * w;
    let src_re: Vec<f64> = yp.re.iter().chain(yq.re.iter()).copied().collect();
    let src_im: Option<Vec<f64>> = match (yp.im.as_deref(), yq.im.as_deref()) {
        (Some(a), Some(b)) => Some(a.iter().chain(b.iter()).copied().collect()),
        _ => None,
    };
    let mut out_re = vec![0.0; m];
    let mut out_im = vec![0.0; m];
    for c in 0..n2 {
        let mut first = true;
        for k in 0..n2 {
            let coef = zt.get(k, c);
            if coef.re == 0.0 && coef.im == 0.0 {
                continue;
            }
            let sr = &src_re[k * m..(k + 1) * m];
            match src_im.as_deref() {
                Some(si) => {
                    let si = &si[k * m..(k + 1) * m];
                    for r in 0..m {
                        let y = Complex64::new(sr[r], si[r]);
                        let v = if first { zmul(y, coef) } else { zfma(y, coef, Complex64::new(out_re[r], out_im[r])) };
                        out_re[r] = v.re;
                        out_im[r] = v.im;
                    }
                }
                None => {
                    let a = coef.re;
                    if first {
                        out_re.iter_mut().zip(sr).for_each(|(o, &y)| *o = y * a);
                    } else {
                        out_re.iter_mut().zip(sr).for_each(|(o, &y)| *o = y.mul_add(a, *o));
                    }
                }
            }
            first = false;
        }
        if first {
            out_re.fill(0.0);
            out_im.fill(0.0);
        }
        let (blk_re, blk_im, j) = if c < w {
            (&mut *yp.re, yp.im.as_deref_mut(), c)
        } else {
            (&mut *yq.re, yq.im.as_deref_mut(), c - w)
        };
        blk_re[j * m..(j + 1) * m].copy_from_slice(&out_re);
        if let Some(im) = blk_im {
            im[j * m..(j + 1) * m].copy_from_slice(&out_im);
        }
    }
}

/// `[Yp Yq] ← [Yp Yq]·Z̃` for whole matrices `Yp`, `Yq` of equal width.
pub fn postmultiply(yp: &mut Matrix, yq: &mut Matrix, zt: &Matrix) {
    let w = yp.cols();
    assert_eq!(yq.cols(), w);
    assert_eq!((zt.rows(), zt.cols()), (2 * w, 2 * w));
    let mut a = yp.col_blocks_mut(w);
    let mut b = yq.col_blocks_mut(w);
    postmultiply_views(&mut a[0], &mut b[0], w, zt);
}

/// Per column `θ_j = 1/√(‖f_j‖² + ‖g_j‖²)` scales `z_j`. When `final_` is
/// set, `f_j` and `g_j` are normalized as well and `(Σ_F, Σ_G, Σ)` returned.
pub fn rescale_z(
    f: &mut Matrix,
    g: &mut Matrix,
    z: &mut Matrix,
    final_: bool,
    compensated: bool,
) -> Result<Option<(Vec<f64>, Vec<f64>, Vec<f64>)>> {
    let n = z.cols();
    let mut sf = Vec::with_capacity(if final_ { n } else { 0 });
    let mut sg = Vec::with_capacity(sf.capacity());
    let mut sigma = Vec::with_capacity(sf.capacity());
    for j in 0..n {
        let a = dotprod::norm_sq(f.col(j), compensated);
        let b = dotprod::norm_sq(g.col(j), compensated);
        if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
            return Err(Error::ZeroColumn(j));
        }
        let theta = 1.0 / (a + b).sqrt();
        if theta != 1.0 {
            z.col_mut(j).scale(theta);
        }
        if final_ {
            let (nf, ng) = (a.sqrt(), b.sqrt());
            if nf != 1.0 {
                f.col_mut(j).divide(nf);
            }
            if ng != 1.0 {
                g.col_mut(j).divide(ng);
            }
            let (x, y) = (nf * theta, ng * theta);
            sf.push(x);
            sg.push(y);
            sigma.push(x / y);
        }
    }
    Ok(final_.then_some((sf, sg, sigma)))
}

fn view_matrix(p: &ColMut<'_>, q: &ColMut<'_>, w: usize) -> Matrix {
    let m = p.re.len() / w;
    let re: Vec<f64> = p.re.iter().chain(q.re.iter()).copied().collect();
    let im = match (p.im.as_deref(), q.im.as_deref()) {
        (Some(a), Some(b)) => Some(a.iter().chain(b.iter()).copied().collect()),
        _ => None,
    };
    Matrix::from_planes(m, 2 * w, re, im).expect("block views have consistent sizes")
}

/// Triangular factor of a block pair: Cholesky of its Grammian, or QR of
/// the block pair itself when configured or as the fallback.
fn block_factor(y: (&ColMut<'_>, &ColMut<'_>), w: usize, cfg: &SolverConfig) -> Result<Matrix> {
    let qr = || {
        let m = view_matrix(y.0, y.1, w);
        qr_shorten(&m.col_range(0, w), &m.col_range(w, w))
    };
    if cfg.qr_shorten {
        return qr();
    }
    let mut cols = split_cols(y.0, w);
    cols.extend(split_cols(y.1, w));
    let a = grammian(&cols, field_of(&cols[0]), cfg.compensated())?;
    match cholesky_upper(&a, cfg.compensated()) {
        Err(Error::NotPositiveDefinite(_)) if cfg.fallback_qr => qr(),
        other => other,
    }
}

struct BlockTask<'a> {
    f: (ColMut<'a>, ColMut<'a>),
    g: (ColMut<'a>, ColMut<'a>),
    z: (ColMut<'a>, ColMut<'a>),
}

fn process_block(t: &mut BlockTask<'_>, w: usize, cfg: &SolverConfig) -> Result<SweepStats> {
    let rf = block_factor((&t.f.0, &t.f.1), w, cfg)?;
    let rg = block_factor((&t.g.0, &t.g.1), w, cfg)?;
    let inner = solve_pointwise(&rf, &rg, cfg, true)?;
    if !inner.z.is_identity() {
        postmultiply_views(&mut t.f.0, &mut t.f.1, w, &inner.z);
        postmultiply_views(&mut t.g.0, &mut t.g.1, w, &inner.z);
        postmultiply_views(&mut t.z.0, &mut t.z.1, w, &inner.z);
    }
    Ok(inner.stats)
}

fn take2<'a>(v: &mut [Option<ColMut<'a>>], p: usize, q: usize) -> (ColMut<'a>, ColMut<'a>) {
    let a = v[p].take().expect("block indices within a step are disjoint");
    let b = v[q].take().expect("block indices within a step are disjoint");
    (a, b)
}

fn run_block_step(
    f: &mut Matrix,
    g: &mut Matrix,
    z: &mut Matrix,
    pairs: &[(usize, usize)],
    cfg: &SolverConfig,
) -> Result<SweepStats> {
    let w = cfg.block_width;
    let mut fb: Vec<Option<ColMut<'_>>> = f.col_blocks_mut(w).into_iter().map(Some).collect();
    let mut gb: Vec<Option<ColMut<'_>>> = g.col_blocks_mut(w).into_iter().map(Some).collect();
    let mut zb: Vec<Option<ColMut<'_>>> = z.col_blocks_mut(w).into_iter().map(Some).collect();
    let mut tasks: Vec<BlockTask<'_>> = pairs
        .iter()
        .map(|&(p, q)| BlockTask { f: take2(&mut fb, p, q), g: take2(&mut gb, p, q), z: take2(&mut zb, p, q) })
        .collect();
    let results: Vec<Result<SweepStats>> = tasks.par_iter_mut().map(|t| process_block(t, w, cfg)).collect();
    let mut s = SweepStats::default();
    for r in results {
        s += r?;
    }
    Ok(s)
}

/// Outer sweeps over block columns of width `cfg.block_width`, at most
/// `max_sweeps` of them, stopping after a sweep without big
/// transformations. Every other sweep is followed by the non-final
/// rescaling of `Z`. `F`, `G`, `Z` must already be prescaled.
pub fn run_outer_sweeps(
    f: &mut Matrix,
    g: &mut Matrix,
    z: &mut Matrix,
    cfg: &SolverConfig,
    max_sweeps: usize,
) -> Result<OuterRun> {
    let n = f.cols();
    let w = cfg.block_width;
    if n % (2 * w) != 0 {
        return Err(Error::Invalid(format!("order {n} is not a multiple of twice the block width {w}")));
    }
    let table = gen_table(cfg.outer_kind, n / w)?;
    let mut run = OuterRun::default();
    while run.sweeps < max_sweeps {
        let mut sweep = SweepStats::default();
        for step in &table.steps {
            sweep += run_block_step(f, g, z, step, cfg)?;
        }
        run.sweeps += 1;
        run.stats += sweep;
        if sweep.big == 0 {
            run.converged = true;
            break;
        }
        rescale_z(f, g, z, false, cfg.compensated())?;
    }
    Ok(run)
}

/// Blocked GSVD of a pair whose order is a multiple of `2·block_width`.
pub fn gsvd_blocked(p: &ProblemPair, cfg: &SolverConfig) -> Result<GsvdResult> {
    cfg.validate()?;
    let compensated = cfg.compensated();
    let (mut f, mut g, d) = prescale_init(&p.f, &p.g, cfg.prescale(), compensated)?;
    let mut z = diag_matrix(&d, f.field());
    let run = run_outer_sweeps(&mut f, &mut g, &mut z, cfg, cfg.max_outer_sweeps)?;
    let (sigma_f, sigma_g, sigma) =
        rescale_z(&mut f, &mut g, &mut z, true, compensated)?.expect("final rescale returns the values");
    Ok(GsvdResult {
        u: f,
        v: g,
        z,
        sigma_f,
        sigma_g,
        sigma,
        sweeps: run.sweeps,
        total_transforms: run.stats.total,
        big_transforms: run.stats.big,
        converged: run.converged,
        workers: 1,
    })
}

/// GSVD of `(F, G)` of any admissible shape: borders to the block size,
/// runs the blocked solver and removes the padding again.
pub fn solve(f: &Matrix, g: &Matrix, cfg: &SolverConfig) -> Result<GsvdResult> {
    cfg.validate()?;
    let p = ProblemPair::new(f.clone(), g.clone())?;
    if p.n() == 1 {
        return gsvd_1x1(f, g, cfg.compensated());
    }
    let mult = 2 * cfg.block_width;
    let b = border_pair(&p, mult, mult);
    gsvd_blocked(&b, cfg)?.strip_border(p.original_n, p.original_mf, p.original_mg)
}

/// Square reduction of a tall pair: `F·P₁ = Q_F·R_F`, `(G·P₁)·P₂ = Q_G·R_G`,
/// `F″ = R_F·P₂`, `G″ = R_G`.
#[derive(Clone, Debug)]
pub struct TallReduction {
    pub f: Matrix,
    pub g: Matrix,
    pub q_f: Matrix,
    pub q_g: Matrix,
    /// `perm[k]` is the original column at position `k` of `P″ = P₁P₂`.
    pub perm: Vec<usize>,
}

pub fn preprocess_tall(f: &Matrix, g: &Matrix) -> Result<TallReduction> {
    ProblemPair::new(f.clone(), g.clone())?;
    let qf = qr_pivoted(f)?;
    let gp1 = g.select_cols(&qf.perm);
    let qg = qr_pivoted(&gp1)?;
    let f2 = qf.r.select_cols(&qg.perm);
    let perm = qg.perm.iter().map(|&k| qf.perm[k]).collect();
    Ok(TallReduction { f: f2, g: qg.r, q_f: qf.q, q_g: qg.q, perm })
}

/// Solves a tall pair through its square reduction, mapping `U`, `V` and
/// `Z` back to the original shape.
pub fn solve_tall(f: &Matrix, g: &Matrix, cfg: &SolverConfig) -> Result<GsvdResult> {
    let t = preprocess_tall(f, g)?;
    let r = solve(&t.f, &t.g, cfg)?;
    let compensated = cfg.compensated();
    Ok(GsvdResult {
        u: t.q_f.matmul(&r.u, compensated)?,
        v: t.q_g.matmul(&r.v, compensated)?,
        z: permute_rows(&r.z, &t.perm),
        ..r
    })
}
