//! 2×2 pivot kernels: pivot formation, the relative-orthogonality test,
//! diagonal rescaling, the real and complex congruence transforms, and
//! the final sorting and classification.
//!
//! For a pivot `(Â, B̂)` rescaled so that `b11 = b22 = 1`, the transform `Ẑ`
//! satisfies `ẐᴴB̂Ẑ = I` and makes `ẐᴴÂẐ` diagonal.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::arith::{sign, zabs, zcmul, zmul};
use crate::config::Criterion;
use crate::dotprod;
use crate::matrix::Col;
use crate::{Error, Result};

/// Entries `[[z11, z12], [z21, z22]]`.
pub type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub const IDENTITY: Mat2 = [[ONE, ZERO], [ZERO, ONE]];
pub const SWAP: Mat2 = [[ZERO, ONE], [ONE, ZERO]];

/// The Hermitian pivot pair and its diagonal rescaler.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PivotPair {
    pub a11: f64,
    pub a22: f64,
    pub a12: Complex64,
    pub b11: f64,
    pub b22: f64,
    pub b12: Complex64,
    pub d11: f64,
    pub d22: f64,
}

impl PivotPair {
    pub fn new(a11: f64, a22: f64, a12: Complex64, b11: f64, b22: f64, b12: Complex64) -> Self {
        PivotPair { a11, a22, a12, b11, b22, b12, d11: 1.0, d22: 1.0 }
    }

    /// Pivot with `b11 = b22 = 1`.
    pub fn unit(a11: f64, a22: f64, a12: Complex64, b12: Complex64) -> Self {
        Self::new(a11, a22, a12, 1.0, 1.0, b12)
    }
}

/// Intermediate quantities of a transform, kept for inspection.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TransformScalars {
    /// `|b12'|` (signed `b12'` in the real case).
    pub x: f64,
    /// `e^{iζ} = b12' / |b12'|`.
    pub phase: Complex64,
    pub t: f64,
    pub u: f64,
    pub v: f64,
    pub h: f64,
    pub tau: f64,
    /// `tan 2ϑ` (complex) or `cot 2ϑ` (real).
    pub angle: f64,
    pub tan_gamma: f64,
    pub xi: f64,
    pub eta: f64,
}

/// `Ẑ' = (1/t)·[[cos φ, ·], [·, cos ψ]]` before row scaling and sorting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformBody {
    pub z: Mat2,
    pub cos_phi: f64,
    pub cos_psi: f64,
    pub t: f64,
    /// Produced by the proportional-pair branch.
    pub exception: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform2x2 {
    pub z: Mat2,
    pub swapped: bool,
    /// False when the pivot was already relatively orthogonal.
    pub applied: bool,
    pub is_big: bool,
    /// Predicted `(a11'', a22'')` before any swap.
    pub diag_after: (f64, f64),
}

/// Squared norms and inner products of the four pivot columns.
pub fn form_pivot(fi: Col<'_>, fj: Col<'_>, gi: Col<'_>, gj: Col<'_>, compensated: bool) -> Result<PivotPair> {
    let a11 = dotprod::norm_sq(fi, compensated);
    let a22 = dotprod::norm_sq(fj, compensated);
    let b11 = dotprod::norm_sq(gi, compensated);
    let b22 = dotprod::norm_sq(gj, compensated);
    for (k, v) in [a11, a22, b11, b22].into_iter().enumerate() {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::ZeroColumn(k % 2));
        }
    }
    let a12 = dotprod::dot(fi, fj, true, compensated)?;
    let b12 = dotprod::dot(gi, gj, true, compensated)?;
    Ok(PivotPair::new(a11, a22, a12, b11, b22, b12))
}

/// Scales the pivot congruently so that `b11 = b22 = 1`, recording the
/// scaling in `d11`, `d22`.
pub fn rescale_pivot(p: PivotPair) -> PivotPair {
    let mut q = p;
    if q.b11 != 1.0 {
        q.d11 = 1.0 / q.b11.sqrt();
        q.a11 /= q.b11;
        q.a12 *= q.d11;
        q.b12 *= q.d11;
        q.b11 = 1.0;
    }
    if q.b22 != 1.0 {
        q.d22 = 1.0 / q.b22.sqrt();
        q.a22 /= q.b22;
        q.a12 *= q.d22;
        q.b12 *= q.d22;
        q.b22 = 1.0;
    }
    q
}

/// `|a12'| < √a11'·√a22'·ε·√n` and `|b12'| < ε·√n`.
pub fn relatively_orthogonal(p: &PivotPair, n: usize, eps: f64) -> bool {
    let rn = (n as f64).sqrt();
    zabs(p.a12) < p.a11.sqrt() * p.a22.sqrt() * eps * rn && zabs(p.b12) < eps * rn
}

/// `(cos, sin)` from a tangent; an infinite tangent maps to `(0, ±1)`.
fn cos_sin(tan: f64) -> (f64, f64) {
    if tan.is_infinite() {
        (0.0, sign(1.0, tan))
    } else {
        let c = 1.0 / (1.0 + tan * tan).sqrt();
        (c, tan * c)
    }
}

fn scale(z: Complex64, s: f64) -> Complex64 {
    Complex64::new(z.re * s, z.im * s)
}

fn div(z: Complex64, s: f64) -> Complex64 {
    Complex64::new(z.re / s, z.im / s)
}

/// Real transform. `p` must be rescaled and not relatively orthogonal.
pub fn transform_real(p: &PivotPair) -> (TransformBody, TransformScalars) {
    let (a11, a22, a12) = (p.a11, p.a22, p.a12.re);
    let x = p.b12.re;
    let t = (-x).mul_add(x, 1.0).sqrt();
    let sp = (1.0 + x).sqrt();
    let sm = (1.0 - x).sqrt();
    let xi = x / (sp + sm);
    let eta = x / ((1.0 + sp) * (1.0 + sm));
    let num = t * (a22 - a11);
    let den = (-(a11 + a22)).mul_add(x, 2.0 * a12);
    let mut sc = TransformScalars { x, phase: ONE, t, xi, eta, h: a22 - a11, ..Default::default() };
    if num == 0.0 && den == 0.0 {
        // Â' and B̂' proportional: any B-orthonormal basis diagonalizes both.
        let s = sign(1.0, x);
        let ax = x.abs();
        let p1 = FRAC_1_SQRT_2 / (1.0 + ax).sqrt();
        let p2 = FRAC_1_SQRT_2 / (1.0 - ax).sqrt();
        let z = [[Complex64::new(p1, 0.0), Complex64::new(-s * p2, 0.0)], [Complex64::new(s * p1, 0.0), Complex64::new(p2, 0.0)]];
        sc.angle = f64::NAN;
        return (TransformBody { z, cos_phi: f64::NAN, cos_psi: f64::NAN, t, exception: true }, sc);
    }
    let cot = num / den;
    sc.angle = cot;
    let tan = sign(1.0, cot) / (cot.abs() + 1f64.hypot(cot));
    let c = 1.0 / tan.mul_add(tan, 1.0).sqrt();
    let s = tan * c;
    let cphi = c + xi * (-eta).mul_add(c, s);
    let cpsi = c - xi * eta.mul_add(c, s);
    let sphi = s - xi * eta.mul_add(s, c);
    let spsi = s + xi * (-eta).mul_add(s, c);
    let z = [
        [Complex64::new(cphi / t, 0.0), Complex64::new(sphi / t, 0.0)],
        [Complex64::new(-spsi / t, 0.0), Complex64::new(cpsi / t, 0.0)],
    ];
    (TransformBody { z, cos_phi: cphi, cos_psi: cpsi, t, exception: false }, sc)
}

/// Complex transform. `p` must be rescaled and not relatively orthogonal.
pub fn transform_complex(p: &PivotPair) -> (TransformBody, TransformScalars) {
    let (a11, a22) = (p.a11, p.a22);
    let x = zabs(p.b12);
    let e = if x == 0.0 { ONE } else { div(p.b12, x) };
    let z = zcmul(e, p.a12);
    let (u, v) = (z.re, z.im);
    let h = a22 - a11;
    let tau = sign(1.0, h);
    let t = (-x).mul_add(x, 1.0).sqrt();
    let mut sc = TransformScalars { x, phase: e, t, u, v, h, tau, ..Default::default() };
    if v == 0.0 && h == 0.0 {
        let p1 = FRAC_1_SQRT_2 / (1.0 + x).sqrt();
        let p2 = FRAC_1_SQRT_2 / (1.0 - x).sqrt();
        let z = [[Complex64::new(p1, 0.0), -scale(e, p2)], [scale(e.conj(), p1), Complex64::new(p2, 0.0)]];
        sc.angle = f64::NAN;
        sc.tan_gamma = f64::NAN;
        return (TransformBody { z, cos_phi: f64::NAN, cos_psi: f64::NAN, t, exception: true }, sc);
    }
    let tan2 = tau * (-(a11 + a22)).mul_add(x, 2.0 * u) / (t * h.hypot(2.0 * v));
    let tang = 2.0 * v / h;
    sc.angle = tan2;
    sc.tan_gamma = tang;
    let (c2, s2) = cos_sin(tan2);
    let (cg, sg) = cos_sin(tang);
    let tcc = t * cg * c2;
    let cphi = (0.5 * (x.mul_add(s2, 1.0) + tcc)).sqrt();
    let cpsi = (0.5 * ((-x).mul_add(s2, 1.0) + tcc)).sqrt();
    let tsc = t * sg * c2;
    let ea = div(zmul(e, Complex64::new(s2 - x, tsc)), 2.0 * cpsi);
    let eb = div(zmul(e.conj(), Complex64::new(s2 + x, -tsc)), 2.0 * cphi);
    let z = [[Complex64::new(cphi / t, 0.0), div(ea, t)], [-div(eb, t), Complex64::new(cpsi / t, 0.0)]];
    (TransformBody { z, cos_phi: cphi, cos_psi: cpsi, t, exception: false }, sc)
}

/// Dispatches on the field.
pub fn transform(p: &PivotPair, complex: bool) -> (TransformBody, TransformScalars) {
    if complex {
        transform_complex(p)
    } else {
        transform_real(p)
    }
}

/// `zᴴ Â' z` for a column `z` of a 2×2 matrix.
fn quad_form(p: &PivotPair, z1: Complex64, z2: Complex64) -> f64 {
    let cross = zmul(zcmul(z1, p.a12), z2).re;
    z1.norm_sqr() * p.a11 + 2.0 * cross + z2.norm_sqr() * p.a22
}

/// `a11''`, `a22''` predicted from `Ẑ'` and the rescaled pivot.
pub fn predicted_diagonal(z: &Mat2, p: &PivotPair, complex: bool) -> (f64, f64) {
    if complex {
        (quad_form(p, z[0][0], z[1][0]), quad_form(p, z[0][1], z[1][1]))
    } else {
        let (z11, z12, z21, z22) = (z[0][0].re, z[0][1].re, z[1][0].re, z[1][1].re);
        let a12 = p.a12.re;
        let d1 = z11 * z11 * p.a11 + 2.0 * z11 * z21 * a12 + z21 * z21 * p.a22;
        let d2 = z12 * z12 * p.a11 + 2.0 * z22 * z12 * a12 + z22 * z22 * p.a22;
        (d1, d2)
    }
}

pub fn swap_columns(z: &Mat2) -> Mat2 {
    [[z[0][1], z[0][0]], [z[1][1], z[1][0]]]
}

/// Applies `D̂`, classifies the transform and sorts its columns so that the
/// larger transformed diagonal entry comes first.
pub fn finalize_transform(
    body: &TransformBody,
    p: &PivotPair,
    sort: bool,
    criterion: Criterion,
    complex: bool,
) -> Transform2x2 {
    let small = !body.exception
        && match criterion {
            Criterion::C1 => body.z[0][0].re == 1.0 && body.z[1][1].re == 1.0,
            Criterion::C2 => body.cos_phi == 1.0 && body.cos_psi == 1.0,
        };
    let diag_after = predicted_diagonal(&body.z, p, complex);
    let mut z = body.z;
    if p.d11 != 1.0 {
        z[0] = [scale(z[0][0], p.d11), scale(z[0][1], p.d11)];
    }
    if p.d22 != 1.0 {
        z[1] = [scale(z[1][0], p.d22), scale(z[1][1], p.d22)];
    }
    let swapped = sort && diag_after.0 < diag_after.1;
    if swapped {
        z = swap_columns(&z);
    }
    Transform2x2 { z, swapped, applied: true, is_big: !small, diag_after }
}

/// The outcome for a relatively orthogonal pivot: identity, or the column
/// swap when sorting asks for it. `D̂` is not applied.
pub fn identity_or_swap(p: &PivotPair, sort: bool) -> Transform2x2 {
    let swapped = sort && p.a11 < p.a22;
    Transform2x2 {
        z: if swapped { SWAP } else { IDENTITY },
        swapped,
        applied: false,
        is_big: false,
        diag_after: (p.a11, p.a22),
    }
}

/// Full kernel for a formed pivot: rescale (unless prescaled), gate,
/// transform and finalize.
pub fn compute_transform(
    p: &PivotPair,
    n: usize,
    eps: f64,
    prescaled: bool,
    sort: bool,
    criterion: Criterion,
    complex: bool,
) -> Transform2x2 {
    let q = if prescaled {
        PivotPair { b11: 1.0, b22: 1.0, d11: 1.0, d22: 1.0, ..*p }
    } else {
        rescale_pivot(*p)
    };
    if relatively_orthogonal(&q, n, eps) {
        return identity_or_swap(&q, sort);
    }
    let (body, _) = transform(&q, complex);
    finalize_transform(&body, &q, sort, criterion, complex)
}
