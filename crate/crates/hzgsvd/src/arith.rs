//! Scalar kernels shared by the solver: fused complex products and the
//! signed-zero aware `sign` transfer.

use num_complex::Complex64;

/// `a·b` with one product and one FMA per component.
#[inline]
pub fn zmul(a: Complex64, b: Complex64) -> Complex64 {
    Complex64::new(
        a.re.mul_add(b.re, -(a.im * b.im)),
        a.re.mul_add(b.im, a.im * b.re),
    )
}

/// `a·b + c`, two roundings per component.
#[inline]
pub fn zfma(a: Complex64, b: Complex64, c: Complex64) -> Complex64 {
    let d = (-a.im).mul_add(b.im, c.re);
    let re = a.re.mul_add(b.re, d);
    let d = a.im.mul_add(b.re, c.im);
    let im = a.re.mul_add(b.im, d);
    Complex64::new(re, im)
}

/// `conj(a)·b`.
#[inline]
pub fn zcmul(a: Complex64, b: Complex64) -> Complex64 {
    Complex64::new(
        a.re.mul_add(b.re, a.im * b.im),
        a.re.mul_add(b.im, -(a.im * b.re)),
    )
}

/// Modulus without undue overflow.
#[inline]
pub fn zabs(a: Complex64) -> f64 {
    a.re.hypot(a.im)
}

/// Fortran `SIGN(a, b)`: `|a|` with the sign bit of `b`, so `-0` counts as negative.
#[inline]
pub fn sign(a: f64, b: f64) -> f64 {
    a.abs().copysign(b)
}

/// Fused multiply-add must be a single rounding, otherwise the compensated
/// products silently lose their residuals.
pub fn fma_is_fused() -> bool {
    let a = 134_217_729.0_f64; // 2^27 + 1
    let c = 18_014_398_777_917_440.0_f64; // 2^54 + 2^28
    std::hint::black_box(a).mul_add(std::hint::black_box(a), -c) == 1.0
}

/// Panics when [`fma_is_fused`] fails.
pub fn assert_fma() {
    assert!(fma_is_fused(), "fused multiply-add is not available");
}
