//! The pointwise solver: sweeps of parallel steps over a strategy table,
//! each step transforming disjoint column pairs of `F`, `G` and `Z`.
//!
//! It runs standalone and as the inner level of the blocked solver.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::arith::zfma;
use crate::blocked::rescale_z;
use crate::config::{Criterion, SolverConfig};
use crate::dotprod;
use crate::kernel2x2::{compute_transform, form_pivot, swap_columns, Mat2};
use crate::matrix::{ColMut, Field, GsvdResult, Matrix, ProblemPair};
use crate::strategies::gen_table;
use crate::{Error, Result};

/// Counts of applied transformations, all and big ones.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SweepStats {
    pub total: u64,
    pub big: u64,
}

impl std::ops::AddAssign for SweepStats {
    fn add_assign(&mut self, o: Self) {
        self.total += o.total;
        self.big += o.big;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointwiseOutput {
    pub f: Matrix,
    pub g: Matrix,
    /// Accumulated transformation, times `Θ̃` when solved as an inner problem.
    pub z: Matrix,
    pub stats: SweepStats,
    pub sweeps: usize,
    pub converged: bool,
}

/// Below this many touched entries per step the pivots run sequentially;
/// the result is the same either way.
const PAR_THRESHOLD: usize = 1 << 14;

/// Scales the columns of `F` and `G` by `1/‖g_j‖` when `prescale` is set.
/// Returns `F₀`, `G₀` and the diagonal of `Z₀`.
pub fn prescale_init(f: &Matrix, g: &Matrix, prescale: bool, compensated: bool) -> Result<(Matrix, Matrix, Vec<f64>)> {
    let (mut f0, mut g0) = (f.clone(), g.clone());
    let mut d = vec![1.0; g.cols()];
    for j in 0..g.cols() {
        let nsq = dotprod::norm_sq(g.col(j), compensated);
        if !(nsq > 0.0 && nsq.is_finite()) {
            return Err(Error::ZeroColumn(j));
        }
        if prescale && nsq != 1.0 {
            d[j] = 1.0 / nsq.sqrt();
            f0.col_mut(j).scale(d[j]);
            g0.col_mut(j).scale(d[j]);
        }
    }
    Ok((f0, g0, d))
}

pub fn diag_matrix(d: &[f64], field: Field) -> Matrix {
    let mut z = Matrix::zeros(d.len(), d.len(), field);
    for (j, &v) in d.iter().enumerate() {
        z.set(j, j, Complex64::new(v, 0.0));
    }
    z
}

/// Closed form for a single column.
pub fn gsvd_1x1(f: &Matrix, g: &Matrix, compensated: bool) -> Result<GsvdResult> {
    if f.cols() != 1 || g.cols() != 1 {
        return Err(Error::Invalid("gsvd_1x1 needs single columns".into()));
    }
    let nf = dotprod::norm_sq(f.col(0), compensated).sqrt();
    let ng = dotprod::norm_sq(g.col(0), compensated).sqrt();
    if !(nf > 0.0 && nf.is_finite()) || !(ng > 0.0 && ng.is_finite()) {
        return Err(Error::ZeroColumn(0));
    }
    let zv = 1.0 / nf.hypot(ng);
    let mut u = f.clone();
    u.col_mut(0).divide(nf);
    let mut v = g.clone();
    v.col_mut(0).divide(ng);
    let (sf, sg) = (nf * zv, ng * zv);
    Ok(GsvdResult {
        u,
        v,
        z: diag_matrix(&[zv], f.field()),
        sigma_f: vec![sf],
        sigma_g: vec![sg],
        sigma: vec![sf / sg],
        sweeps: 0,
        total_transforms: 0,
        big_transforms: 0,
        converged: true,
        workers: 1,
    })
}

#[derive(Clone, Copy)]
struct Ctx {
    order: usize,
    eps: f64,
    prescaled: bool,
    sort: bool,
    criterion: Criterion,
    complex: bool,
    compensated: bool,
}

struct PairCols<'a> {
    i: usize,
    j: usize,
    f: (ColMut<'a>, ColMut<'a>),
    g: (ColMut<'a>, ColMut<'a>),
    z: (ColMut<'a>, ColMut<'a>),
}

/// `[y_i y_j] ← [y_i y_j]·Ẑ` with the fused form; the multiply by a
/// diagonal entry equal to one is skipped.
pub fn update_pair(yi: &mut ColMut<'_>, yj: &mut ColMut<'_>, z: &Mat2) {
    let (z11, z22) = (z[0][0].re, z[1][1].re);
    debug_assert!(z[0][0].im == 0.0 && z[1][1].im == 0.0);
    match (yi.im.as_deref_mut(), yj.im.as_deref_mut()) {
        (Some(ii), Some(ji)) => {
            let (z12, z21) = (z[0][1], z[1][0]);
            for r in 0..yi.re.len() {
                let a = Complex64::new(yi.re[r], ii[r]);
                let b = Complex64::new(yj.re[r], ji[r]);
                let sa = if z11 == 1.0 { a } else { Complex64::new(a.re * z11, a.im * z11) };
                let sb = if z22 == 1.0 { b } else { Complex64::new(b.re * z22, b.im * z22) };
                let na = zfma(b, z21, sa);
                let nb = zfma(a, z12, sb);
                yi.re[r] = na.re;
                ii[r] = na.im;
                yj.re[r] = nb.re;
                ji[r] = nb.im;
            }
        }
        _ => {
            let (z12, z21) = (z[0][1].re, z[1][0].re);
            for r in 0..yi.re.len() {
                let (a, b) = (yi.re[r], yj.re[r]);
                let sa = if z11 == 1.0 { a } else { a * z11 };
                let sb = if z22 == 1.0 { b } else { b * z22 };
                yi.re[r] = b.mul_add(z21, sa);
                yj.re[r] = a.mul_add(z12, sb);
            }
        }
    }
}

fn swap_all(pc: &mut PairCols<'_>) {
    pc.f.0.swap_with(&mut pc.f.1);
    pc.g.0.swap_with(&mut pc.g.1);
    pc.z.0.swap_with(&mut pc.z.1);
}

/// One pivot: returns `(applied, big)`.
fn process_pair(pc: &mut PairCols<'_>, ctx: Ctx) -> Result<(bool, bool)> {
    let p = form_pivot(pc.f.0.as_col(), pc.f.1.as_col(), pc.g.0.as_col(), pc.g.1.as_col(), ctx.compensated)
        .map_err(|e| match e {
            Error::ZeroColumn(k) => Error::ZeroColumn(if k == 0 { pc.i } else { pc.j }),
            other => other,
        })?;
    // The complex sort decision is taken on the transformed columns below.
    let kernel_sort = ctx.sort && !ctx.complex;
    let t = compute_transform(&p, ctx.order, ctx.eps, ctx.prescaled, kernel_sort, ctx.criterion, ctx.complex);
    if !t.applied {
        let swap = if ctx.complex { ctx.sort && p_rescaled_less(&p, ctx.prescaled) } else { t.swapped };
        if swap {
            swap_all(pc);
        }
        return Ok((false, false));
    }
    let z = if t.swapped { swap_columns(&t.z) } else { t.z };
    update_pair(&mut pc.f.0, &mut pc.f.1, &z);
    update_pair(&mut pc.g.0, &mut pc.g.1, &z);
    update_pair(&mut pc.z.0, &mut pc.z.1, &z);
    let swap = if ctx.complex && ctx.sort {
        dotprod::norm_sq(pc.f.0.as_col(), ctx.compensated) < dotprod::norm_sq(pc.f.1.as_col(), ctx.compensated)
    } else {
        t.swapped
    };
    if swap {
        swap_all(pc);
    }
    Ok((true, t.is_big))
}

fn p_rescaled_less(p: &crate::kernel2x2::PivotPair, prescaled: bool) -> bool {
    if prescaled {
        p.a11 < p.a22
    } else {
        p.a11 / p.b11 < p.a22 / p.b22
    }
}

fn take_pair<'a>(v: &mut [Option<ColMut<'a>>], i: usize, j: usize) -> (ColMut<'a>, ColMut<'a>) {
    let a = v[i].take().expect("pivot indices within a step are disjoint");
    let b = v[j].take().expect("pivot indices within a step are disjoint");
    (a, b)
}

/// Runs one parallel step; per-pair results come back in step order.
fn run_step(f: &mut Matrix, g: &mut Matrix, z: &mut Matrix, pairs: &[(usize, usize)], ctx: Ctx) -> Result<SweepStats> {
    let work = (f.rows() + g.rows() + z.rows()) * pairs.len();
    let mut fc: Vec<Option<ColMut<'_>>> = f.cols_mut().into_iter().map(Some).collect();
    let mut gc: Vec<Option<ColMut<'_>>> = g.cols_mut().into_iter().map(Some).collect();
    let mut zc: Vec<Option<ColMut<'_>>> = z.cols_mut().into_iter().map(Some).collect();
    let mut items: Vec<PairCols<'_>> = pairs
        .iter()
        .map(|&(i, j)| PairCols {
            i,
            j,
            f: take_pair(&mut fc, i, j),
            g: take_pair(&mut gc, i, j),
            z: take_pair(&mut zc, i, j),
        })
        .collect();
    let results: Vec<Result<(bool, bool)>> = if work >= PAR_THRESHOLD {
        items.par_iter_mut().map(|pc| process_pair(pc, ctx)).collect()
    } else {
        items.iter_mut().map(|pc| process_pair(pc, ctx)).collect()
    };
    let mut s = SweepStats::default();
    for r in results {
        let (applied, big) = r?;
        s.total += u64::from(applied);
        s.big += u64::from(big);
    }
    Ok(s)
}

/// Solves the pair by pointwise sweeps.
///
/// With `inner` set, the sweep limit is `max_inner_sweeps`, the strategy is
/// `inner_kind`, and the returned `Z` is multiplied by `Θ̃ =
/// diag(1/√(‖f_j‖² + ‖g_j‖²))` computed from the final columns.
pub fn solve_pointwise(f: &Matrix, g: &Matrix, cfg: &SolverConfig, inner: bool) -> Result<PointwiseOutput> {
    let n = f.cols();
    if n < 2 || n % 2 != 0 || g.cols() != n {
        return Err(Error::Invalid(format!("pointwise solver needs an even order >= 2, got {n}")));
    }
    let compensated = cfg.compensated();
    let (mut f, mut g, d) = prescale_init(f, g, cfg.prescale(), compensated)?;
    let mut z = diag_matrix(&d, f.field());
    let (kind, cap) = if inner {
        (cfg.inner_kind, cfg.max_inner_sweeps)
    } else {
        (cfg.outer_kind, cfg.max_outer_sweeps)
    };
    let table = gen_table(kind, n)?;
    let ctx = Ctx {
        order: n,
        eps: cfg.gate_eps,
        prescaled: cfg.prescale(),
        sort: cfg.sorting,
        criterion: cfg.criterion(),
        complex: f.is_complex(),
        compensated,
    };
    let mut stats = SweepStats::default();
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < cap {
        let mut sweep = SweepStats::default();
        for step in &table.steps {
            sweep += run_step(&mut f, &mut g, &mut z, step, ctx)?;
        }
        sweeps += 1;
        stats += sweep;
        if sweep.total == 0 {
            converged = true;
            break;
        }
    }
    if inner {
        for j in 0..n {
            let s = dotprod::norm_sq(f.col(j), compensated) + dotprod::norm_sq(g.col(j), compensated);
            let theta = 1.0 / s.sqrt();
            if theta != 1.0 {
                z.col_mut(j).scale(theta);
            }
        }
    }
    Ok(PointwiseOutput { f, g, z, stats, sweeps, converged })
}

/// Standalone pointwise GSVD of an even-order pair, with final extraction.
pub fn gsvd_pointwise(p: &ProblemPair, cfg: &SolverConfig) -> Result<GsvdResult> {
    cfg.validate()?;
    let out = solve_pointwise(&p.f, &p.g, cfg, false)?;
    let (mut f, mut g, mut z) = (out.f, out.g, out.z);
    let (sigma_f, sigma_g, sigma) = rescale_z(&mut f, &mut g, &mut z, true, cfg.compensated())?
        .expect("final rescale returns the values");
    Ok(GsvdResult {
        u: f,
        v: g,
        z,
        sigma_f,
        sigma_g,
        sigma,
        sweeps: out.sweeps,
        total_transforms: out.stats.total,
        big_transforms: out.stats.big,
        converged: out.converged,
        workers: 1,
    })
}
