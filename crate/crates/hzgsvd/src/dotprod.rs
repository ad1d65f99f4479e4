//! Dot products and squared norms.
//!
//! Every sum goes through a pairwise tree whose shape depends only on the
//! number of terms (padded to a power of two with `+0.0`), so results do not
//! depend on scheduling.
//!
//! The compensated variants split each product into its rounded value and
//! the exact residual recovered by one FMA. Rounded parts and residuals are
//! reduced separately and combined at the end. The rounded parts are summed
//! with two-sum at every tree node and the node errors join the residual
//! stream, which keeps the final result within an ulp of the exact value
//! for ordinary inputs. Round-to-nearest is used throughout, so residuals
//! may have either sign.

use num_complex::Complex64;

use crate::matrix::Col;
use crate::{Error, Result};

const MAX_LEVELS: usize = 64;

/// Whether `mul_add` rounds once: `fma(2^27+1, 2^27+1, -(2^54+2^28))` must
/// be exactly 1. Checked once per process.
pub fn fma_is_fused() -> bool {
    static FUSED: std::sync::OnceLock<bool> = std::sync::OnceLock::new();
    *FUSED.get_or_init(|| {
        let x = std::hint::black_box(134_217_729.0_f64);
        x.mul_add(x, -18_014_398_777_917_440.0) == 1.0
    })
}

/// Streaming fixed-shape pairwise summation.
#[derive(Clone, Debug)]
pub struct TreeSum {
    stack: [(f64, u32); MAX_LEVELS],
    depth: usize,
    count: usize,
}

impl Default for TreeSum {
    fn default() -> Self {
        Self::new()
    }
}

impl TreeSum {
    pub fn new() -> Self {
        TreeSum { stack: [(0.0, 0); MAX_LEVELS], depth: 0, count: 0 }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        let (mut v, mut level) = (x, 0u32);
        while self.depth > 0 && self.stack[self.depth - 1].1 == level {
            self.depth -= 1;
            v = self.stack[self.depth].0 + v;
            level += 1;
        }
        self.stack[self.depth] = (v, level);
        self.depth += 1;
        self.count += 1;
    }

    pub fn finish(&self) -> f64 {
        finish_tree(&self.stack[..self.depth], self.count, |l, r| l + r)
    }
}

fn finish_tree(stack: &[(f64, u32)], count: usize, mut add: impl FnMut(f64, f64) -> f64) -> f64 {
    if count == 0 {
        return 0.0;
    }
    let top = count.next_power_of_two().trailing_zeros();
    let mut it = stack.iter().rev();
    let &(mut v, mut level) = it.next().expect("non-empty");
    for &(left, l) in it {
        while level < l {
            v = add(v, 0.0);
            level += 1;
        }
        v = add(left, v);
        level += 1;
    }
    while level < top {
        v = add(v, 0.0);
        level += 1;
    }
    v
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Evaluates the padded pairwise tree over `leaf(off..off + len)` for a
/// subtree of `size` leaves (a power of two, `size >= len`). Pads and
/// all-padding subtrees contribute `zero`.
#[inline]
fn tree<T: Copy>(
    off: usize,
    len: usize,
    size: usize,
    zero: T,
    leaf: &impl Fn(usize) -> T,
    add: &impl Fn(T, T) -> T,
) -> T {
    if size == 8 && len == 8 {
        let (l0, l1, l2, l3) = (leaf(off), leaf(off + 1), leaf(off + 2), leaf(off + 3));
        let (l4, l5, l6, l7) = (leaf(off + 4), leaf(off + 5), leaf(off + 6), leaf(off + 7));
        return add(add(add(l0, l1), add(l2, l3)), add(add(l4, l5), add(l6, l7)));
    }
    if size <= 8 {
        let mut buf = [zero; 8];
        for (k, slot) in buf.iter_mut().enumerate().take(len) {
            *slot = leaf(off + k);
        }
        let mut width = size;
        while width > 1 {
            width /= 2;
            for k in 0..width {
                buf[k] = add(buf[2 * k], buf[2 * k + 1]);
            }
        }
        return buf[0];
    }
    let half = size / 2;
    if len <= half {
        let l = tree(off, len, half, zero, leaf, add);
        add(l, zero)
    } else {
        let l = tree(off, half, half, zero, leaf, add);
        let r = tree(off + half, len - half, half, zero, leaf, add);
        add(l, r)
    }
}

#[inline]
fn tree_sum<T: Copy>(len: usize, zero: T, leaf: impl Fn(usize) -> T, add: impl Fn(T, T) -> T) -> T {
    if len == 0 {
        return zero;
    }
    tree(0, len, len.next_power_of_two(), zero, &leaf, &add)
}

/// Sum of `values` in the fixed pairwise tree order.
pub fn tree_reduce(values: &[f64]) -> f64 {
    tree_sum(values.len(), 0.0, |k| values[k], |a, b| a + b)
}

/// Partial sums of a compensated reduction.
///
/// `c_r`/`c_i` are the rounded principal sums and `d_r`/`d_i` the residual
/// sums. For real data `c_i = d_i = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CompensatedAccumulator {
    pub c_r: f64,
    pub c_i: f64,
    pub d_r: f64,
    pub d_i: f64,
}

impl CompensatedAccumulator {
    /// `e = d_r + d_i`, then the smaller principal part is added first.
    pub fn combine(&self) -> f64 {
        let e = self.d_r + self.d_i;
        let (lo, hi) = if self.c_r <= self.c_i { (self.c_r, self.c_i) } else { (self.c_i, self.c_r) };
        (e + lo) + hi
    }

    /// Real case: `e + c_r`.
    pub fn combine_real(&self) -> f64 {
        self.d_r + self.c_r
    }
}

/// Node state of a compensated tree: rounded sum and accumulated residual.
type Split = (f64, f64);

#[inline]
fn split_product(a: f64, b: f64) -> Split {
    let c = a * b;
    (c, a.mul_add(b, -c))
}

/// Rounded parts meet by two-sum; its error joins the residuals of both
/// children.
#[inline]
fn split_add(l: Split, r: Split) -> Split {
    let (s, err) = two_sum(l.0, r.0);
    (s, (l.1 + r.1) + err)
}

/// Two product streams summed side by side.
#[inline]
fn split_add2(l: (Split, Split), r: (Split, Split)) -> (Split, Split) {
    (split_add(l.0, r.0), split_add(l.1, r.1))
}

fn accumulator(a: Split, b: Split) -> CompensatedAccumulator {
    CompensatedAccumulator { c_r: a.0, c_i: b.0, d_r: a.1, d_i: b.1 }
}

fn check_len(a: &Col<'_>, b: &Col<'_>) -> Result<()> {
    if a.len() != b.len() {
        Err(Error::LengthMismatch(a.len(), b.len()))
    } else {
        Ok(())
    }
}

#[inline]
fn im_at(v: Option<&[f64]>, t: usize) -> f64 {
    v.map_or(0.0, |x| x[t])
}

/// `Σ conj(a_t)·b_t` (or `Σ a_t·b_t` without conjugation) with fused
/// complex products, summed in tree order. A missing imaginary plane reads
/// as zero.
pub fn dot_ordinary(a: Col<'_>, b: Col<'_>, conjugate_first: bool) -> Result<Complex64> {
    check_len(&a, &b)?;
    match (a.im, b.im) {
        (None, None) => {
            let n = a.len();
            let (x, y) = (&a.re[..n], &b.re[..n]);
            let s = tree_sum(n, 0.0, |t| x[t] * y[t], |x, y| x + y);
            Ok(Complex64::new(s, 0.0))
        }
        (Some(ai), Some(bi)) => {
            let n = a.len();
            let (ar, ai, br, bi) = (&a.re[..n], &ai[..n], &b.re[..n], &bi[..n]);
            let sgn = if conjugate_first { -1.0 } else { 1.0 };
            let (r, i) = tree_sum(
                n,
                (0.0, 0.0),
                |t| {
                    let x = sgn * ai[t];
                    (ar[t].mul_add(br[t], -(x * bi[t])), ar[t].mul_add(bi[t], x * br[t]))
                },
                |x, y| (x.0 + y.0, x.1 + y.1),
            );
            Ok(Complex64::new(r, i))
        }
        (ai, bi) => {
            let sgn = if conjugate_first { -1.0 } else { 1.0 };
            let (r, i) = tree_sum(
                a.len(),
                (0.0, 0.0),
                |t| {
                    let (ar, ai, br, bi) = (a.re[t], sgn * im_at(ai, t), b.re[t], im_at(bi, t));
                    (ar.mul_add(br, -(ai * bi)), ar.mul_add(bi, ai * br))
                },
                |x, y| (x.0 + y.0, x.1 + y.1),
            );
            Ok(Complex64::new(r, i))
        }
    }
}

/// Compensated partial sums of the real and imaginary parts of the dot
/// product: `(real part, imaginary part)`.
pub fn dot_compensated_parts(
    a: Col<'_>,
    b: Col<'_>,
    conjugate_first: bool,
) -> Result<(CompensatedAccumulator, CompensatedAccumulator)> {
    check_len(&a, &b)?;
    const Z: Split = (0.0, 0.0);
    match (a.im, b.im) {
        (None, None) => {
            let s = tree_sum(a.len(), Z, |t| split_product(a.re[t], b.re[t]), split_add);
            Ok((accumulator(s, Z), CompensatedAccumulator::default()))
        }
        (ai, bi) => {
            let sgn = if conjugate_first { -1.0 } else { 1.0 };
            let (re, im) = tree_sum(
                a.len(),
                ((Z, Z), (Z, Z)),
                |t| {
                    let (ar, ai, br, bi) = (a.re[t], sgn * im_at(ai, t), b.re[t], im_at(bi, t));
                    ((split_product(ar, br), split_product(-ai, bi)), (split_product(ar, bi), split_product(ai, br)))
                },
                |l, r| (split_add2(l.0, r.0), split_add2(l.1, r.1)),
            );
            Ok((accumulator(re.0, re.1), accumulator(im.0, im.1)))
        }
    }
}

pub fn dot_compensated(a: Col<'_>, b: Col<'_>, conjugate_first: bool) -> Result<Complex64> {
    let real = a.im.is_none() && b.im.is_none();
    let (re, im) = dot_compensated_parts(a, b, conjugate_first)?;
    if real {
        Ok(Complex64::new(re.combine_real(), 0.0))
    } else {
        Ok(Complex64::new(re.combine(), im.combine()))
    }
}

pub fn dot(a: Col<'_>, b: Col<'_>, conjugate_first: bool, compensated: bool) -> Result<Complex64> {
    if compensated {
        dot_compensated(a, b, conjugate_first)
    } else {
        dot_ordinary(a, b, conjugate_first)
    }
}

/// `Σ |v_t|²`. Overflow yields `+inf`.
pub fn norm_sq(v: Col<'_>, compensated: bool) -> f64 {
    const Z: Split = (0.0, 0.0);
    let n = v.len();
    match (v.im, compensated) {
        (None, false) => tree_sum(n, 0.0, |t| v.re[t] * v.re[t], |x, y| x + y),
        (Some(im), false) => {
            let (re, im) = (&v.re[..n], &im[..n]);
            tree_sum(n, 0.0, |t| re[t].mul_add(re[t], im[t] * im[t]), |x, y| x + y)
        }
        (None, true) => {
            let s = tree_sum(n, Z, |t| split_product(v.re[t], v.re[t]), split_add);
            accumulator(s, Z).combine_real()
        }
        (Some(im), true) => {
            let (r, i) = tree_sum(
                n,
                (Z, Z),
                |t| (split_product(v.re[t], v.re[t]), split_product(im[t], im[t])),
                split_add2,
            );
            accumulator(r, i).combine()
        }
    }
}
