//! In-process simulation of the multi-worker solver.
//!
//! The columns are cut into `2s` stripes, two per worker. In every step a
//! worker solves the pair formed by its stripes with the blocked solver,
//! then all workers send their stripes to the holders named by the
//! communication mapping of the outermost strategy. Each stripe travels as
//! one message per plane, identified by its tag, and a receiver accepts a
//! step only when it got exactly one message for every tag.

use rayon::prelude::*;

use crate::blocked::{gsvd_blocked, rescale_z, run_outer_sweeps};
use crate::config::{SolverConfig, StrategyKind};
use crate::matrix::{Field, GsvdResult, Matrix, ProblemPair};
use crate::pointwise::{prescale_init, SweepStats};
use crate::strategies::{comm_mapping, decode_destination, gen_table, CommMapping, Slot, StrategyTable};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistConfig {
    pub workers: usize,
    /// Sweep cap of the blocked solver run on each stripe pair per step.
    pub s_inner: usize,
    pub outermost_kind: StrategyKind,
    pub max_sweeps: usize,
    /// Run the workers of a step on the thread pool instead of one by one.
    pub parallel: bool,
}

impl Default for DistConfig {
    fn default() -> Self {
        DistConfig { workers: 1, s_inner: 1, outermost_kind: StrategyKind::Me, max_sweeps: 30, parallel: true }
    }
}

impl DistConfig {
    pub fn new(workers: usize) -> Self {
        DistConfig { workers, ..Self::default() }
    }
}

/// The two stripes of `F`, `G` and `Z` held by one worker.
#[derive(Clone, Debug, PartialEq)]
pub struct StripeState {
    pub rank: usize,
    /// Global stripe ids in the first and second slot.
    pub ids: [usize; 2],
    pub f: [Matrix; 2],
    pub g: [Matrix; 2],
    pub z: [Matrix; 2],
    pub stats: SweepStats,
}

impl StripeState {
    fn joined(&self) -> (Matrix, Matrix, Matrix) {
        (join(&self.f), join(&self.g), join(&self.z))
    }

    fn set_joined(&mut self, f: Matrix, g: Matrix, z: Matrix) {
        self.f = split(&f);
        self.g = split(&g);
        self.z = split(&z);
    }
}

fn join(m: &[Matrix; 2]) -> Matrix {
    let (a, b) = (&m[0], &m[1]);
    let re = [a.re(), b.re()].concat();
    let im = a.im().zip(b.im()).map(|(x, y)| [x, y].concat());
    Matrix::from_planes(a.rows(), a.cols() + b.cols(), re, im).expect("stripes share their height")
}

fn split(m: &Matrix) -> [Matrix; 2] {
    let w = m.cols() / 2;
    [m.col_range(0, w), m.col_range(w, w)]
}

/// One plane of one stripe on its way to a slot of another worker.
#[derive(Clone, Debug, PartialEq)]
pub struct StripeMessage {
    pub tag: u8,
    pub source: usize,
    pub dest: usize,
    pub stripe: usize,
    pub rows: usize,
    pub payload: Vec<f64>,
}

/// Tags per slot: `F`, `G`, `Z` planes, real and imaginary when complex.
pub fn tags_per_slot(field: Field) -> u8 {
    match field {
        Field::Real => 3,
        Field::Complex => 6,
    }
}

/// `base + offset`, the offset being zero for the first slot of the
/// destination and one slot's worth of tags for the second.
pub fn message_tag(base: u8, destination: i64, field: Field) -> u8 {
    let per = tags_per_slot(field);
    match decode_destination(destination).1 {
        Slot::First => base,
        Slot::Second => base + per,
    }
}

fn stripe_width(n: usize, s: usize, w: usize) -> Result<usize> {
    if s == 0 || n % (2 * w * s) != 0 {
        return Err(Error::Invalid(format!("order {n} is not divisible into {s} workers of 2x{w}-wide blocks")));
    }
    Ok(n / (2 * s))
}

/// Distributes the (prescaled) pair over `s` workers following step 0 of
/// the outermost table.
pub fn partition_stripes(p: &ProblemPair, cfg: &SolverConfig, dc: &DistConfig) -> Result<Vec<StripeState>> {
    let n = p.n();
    let s = dc.workers;
    let sw = stripe_width(n, s, cfg.block_width)?;
    let table = gen_table(dc.outermost_kind, 2 * s)?;
    let field = p.field();
    let cut = |m: &Matrix, id: usize| m.col_range(id * sw, sw);
    table.steps[0]
        .iter()
        .enumerate()
        .map(|(rank, &(a, b))| {
            let ids = [a, b];
            let mut f = [cut(&p.f, a), cut(&p.f, b)];
            let mut g = [cut(&p.g, a), cut(&p.g, b)];
            // Z stripes of diag(d) with d computed per logical column.
            let mut z = [Matrix::zeros(n, sw, field), Matrix::zeros(n, sw, field)];
            for k in 0..2 {
                let (f0, g0, d) = prescale_init(&f[k], &g[k], cfg.prescale(), cfg.compensated())
                    .map_err(|e| offset_column(e, ids[k] * sw))?;
                f[k] = f0;
                g[k] = g0;
                for (j, &v) in d.iter().enumerate() {
                    z[k].set(ids[k] * sw + j, j, num_complex::Complex64::new(v, 0.0));
                }
            }
            Ok(StripeState { rank, ids, f, g, z, stats: SweepStats::default() })
        })
        .collect()
}

fn offset_column(e: Error, off: usize) -> Error {
    match e {
        Error::ZeroColumn(j) => Error::ZeroColumn(off + j),
        other => other,
    }
}

fn planes(m: &Matrix) -> Vec<&[f64]> {
    let mut v = vec![m.re()];
    if let Some(im) = m.im() {
        v.push(im);
    }
    v
}

/// Sends every stripe along the routes of step `k` and rebuilds the states
/// from the received messages.
pub fn exchange_step(
    states: &[StripeState],
    mapping: &CommMapping,
    table: &StrategyTable,
    k: usize,
    field: Field,
) -> Result<Vec<StripeState>> {
    let s = states.len();
    let per = tags_per_slot(field);
    let mut inbox: Vec<Vec<StripeMessage>> = vec![Vec::new(); s];
    for st in states {
        let route = mapping.routes[k][st.rank];
        if [route.p, route.q] != st.ids {
            return Err(Error::Protocol(format!("worker {} holds {:?}, mapping says {:?}", st.rank, st.ids, (route.p, route.q))));
        }
        for (slot, t) in [route.t0, route.t1].into_iter().enumerate() {
            let dest = decode_destination(t).0;
            let mut base = 1u8;
            for m in [&st.f[slot], &st.g[slot], &st.z[slot]] {
                for plane in planes(m) {
                    inbox[dest].push(StripeMessage {
                        tag: message_tag(base, t, field),
                        source: st.rank,
                        dest,
                        stripe: st.ids[slot],
                        rows: m.rows(),
                        payload: plane.to_vec(),
                    });
                    base += 1;
                }
            }
        }
    }
    let next = &table.steps[(k + 1) % table.steps.len()];
    let mut out = Vec::with_capacity(s);
    for (rank, msgs) in inbox.into_iter().enumerate() {
        let mut by_tag: Vec<Option<StripeMessage>> = vec![None; 2 * per as usize];
        for m in msgs {
            let idx = usize::from(m.tag) - 1;
            match by_tag.get_mut(idx) {
                Some(slot @ None) => *slot = Some(m),
                Some(Some(_)) => return Err(Error::Protocol(format!("worker {rank} got tag {} twice", m.tag))),
                None => return Err(Error::Protocol(format!("worker {rank} got unknown tag {}", m.tag))),
            }
        }
        let got: Vec<StripeMessage> = by_tag
            .into_iter()
            .enumerate()
            .map(|(i, m)| m.ok_or_else(|| Error::Protocol(format!("worker {rank} is missing tag {}", i + 1))))
            .collect::<Result<_>>()?;
        let expect = [next[rank].0, next[rank].1];
        let mut mats: Vec<Matrix> = Vec::with_capacity(6);
        for slot in 0..2 {
            let msgs = &got[slot * per as usize..(slot + 1) * per as usize];
            if msgs.iter().any(|m| m.stripe != expect[slot]) {
                return Err(Error::Protocol(format!("worker {rank} slot {slot} expected stripe {}", expect[slot])));
            }
            let per_matrix = if field == Field::Complex { 2 } else { 1 };
            for c in msgs.chunks(per_matrix) {
                let rows = c[0].rows;
                let cols = c[0].payload.len() / rows;
                let im = c.get(1).map(|m| m.payload.clone());
                mats.push(Matrix::from_planes(rows, cols, c[0].payload.clone(), im)?);
            }
        }
        let mut it = mats.into_iter();
        let mut take = || it.next().expect("three matrices per slot");
        let (f0, g0, z0, f1, g1, z1) = (take(), take(), take(), take(), take(), take());
        out.push(StripeState {
            rank,
            ids: expect,
            f: [f0, f1],
            g: [g0, g1],
            z: [z0, z1],
            stats: states[rank].stats,
        });
    }
    Ok(out)
}

fn compute(st: &mut StripeState, cfg: &SolverConfig, s_inner: usize) -> Result<SweepStats> {
    let (mut f, mut g, mut z) = st.joined();
    let run = run_outer_sweeps(&mut f, &mut g, &mut z, cfg, s_inner)?;
    st.set_joined(f, g, z);
    st.stats += run.stats;
    Ok(run.stats)
}

/// Multi-worker solve of a pair whose order is a multiple of
/// `2·block_width·workers`.
///
/// With a single worker the stripe exchange is the identity and the run
/// reduces to the blocked solver with `max_sweeps·s_inner` sweeps.
pub fn run_distributed(p: &ProblemPair, cfg: &SolverConfig, dc: &DistConfig) -> Result<GsvdResult> {
    cfg.validate()?;
    if dc.s_inner == 0 || dc.max_sweeps == 0 {
        return Err(Error::Invalid("sweep limits must be positive".into()));
    }
    let s = dc.workers;
    let n = p.n();
    let sw = stripe_width(n, s, cfg.block_width)?;
    if s == 1 {
        let single = SolverConfig { max_outer_sweeps: dc.max_sweeps * dc.s_inner, ..cfg.clone() };
        return gsvd_blocked(p, &single);
    }
    let field = p.field();
    let table = gen_table(dc.outermost_kind, 2 * s)?;
    let mapping = comm_mapping(&table);
    let mut states = partition_stripes(p, cfg, dc)?;
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < dc.max_sweeps {
        let mut big = vec![0u64; s];
        for k in 0..table.steps.len() {
            let results: Vec<Result<SweepStats>> = if dc.parallel {
                states.par_iter_mut().map(|st| compute(st, cfg, dc.s_inner)).collect()
            } else {
                states.iter_mut().map(|st| compute(st, cfg, dc.s_inner)).collect()
            };
            for (r, res) in results.into_iter().enumerate() {
                big[r] += res?.big;
            }
            states = exchange_step(&states, &mapping, &table, k, field)?;
        }
        sweeps += 1;
        // Ordered reduction over ranks.
        let total_big: u64 = big.iter().sum();
        if total_big == 0 {
            converged = true;
            break;
        }
    }
    let m_f = p.f.rows();
    let m_g = p.g.rows();
    let mut u = Matrix::zeros(m_f, n, field);
    let mut v = Matrix::zeros(m_g, n, field);
    let mut z = Matrix::zeros(n, n, field);
    let (mut sigma_f, mut sigma_g, mut sigma) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut stats = SweepStats::default();
    for st in &mut states {
        stats += st.stats;
        let (mut fj, mut gj, mut zj) = st.joined();
        let (a, b, c) = rescale_z(&mut fj, &mut gj, &mut zj, true, cfg.compensated())?.expect("final rescale returns the values");
        for (slot, &id) in st.ids.iter().enumerate() {
            for j in 0..sw {
                let (src, dst) = (slot * sw + j, id * sw + j);
                for i in 0..m_f {
                    u.set(i, dst, fj.get(i, src));
                }
                for i in 0..m_g {
                    v.set(i, dst, gj.get(i, src));
                }
                for i in 0..n {
                    z.set(i, dst, zj.get(i, src));
                }
                sigma_f[dst] = a[src];
                sigma_g[dst] = b[src];
                sigma[dst] = c[src];
            }
        }
    }
    Ok(GsvdResult {
        u,
        v,
        z,
        sigma_f,
        sigma_g,
        sigma,
        sweeps,
        total_transforms: stats.total,
        big_transforms: stats.big,
        converged,
        workers: s,
    })
}

/// Borders the pair for `dc.workers` workers, solves, and strips the border.
pub fn solve_distributed(f: &Matrix, g: &Matrix, cfg: &SolverConfig, dc: &DistConfig) -> Result<GsvdResult> {
    cfg.validate()?;
    let p = ProblemPair::new(f.clone(), g.clone())?;
    let mult = 2 * cfg.block_width;
    let b = crate::matrix::border_pair(&p, mult * dc.workers.max(1), mult);
    run_distributed(&b, cfg, dc)?.strip_border(p.original_n, p.original_mf, p.original_mg)
}
