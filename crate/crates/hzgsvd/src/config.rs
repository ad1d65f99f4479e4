//! Solver configuration and the decoding of the eight algorithm variants.

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    /// Cyclic round-robin ordering, `n - 1` steps per sweep.
    Me,
    /// Quasi-cyclic modulus ordering, `n` steps per sweep.
    Mm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Blocking {
    /// Inner problems are diagonalized fully (up to 30 inner sweeps).
    Fb,
    /// A single inner sweep per block pair.
    Bo,
}

/// When a transformation counts as small.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Criterion {
    /// Both scaled cosines `cos φ / t` and `cos ψ / t` equal one.
    C1,
    /// Both cosines `cos φ` and `cos ψ` equal one.
    C2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Variant id `0..=7`: bit 2 picks C2 over C1, bit 1 drops the initial
    /// prescaling in favour of per-pivot rescaling, bit 0 turns on
    /// compensated dot products.
    pub variant: u8,
    pub outer_kind: StrategyKind,
    pub inner_kind: StrategyKind,
    pub blocking: Blocking,
    pub sorting: bool,
    pub max_inner_sweeps: usize,
    pub max_outer_sweeps: usize,
    pub block_width: usize,
    /// Retry a block with QR when its Grammian fails to factorize.
    pub fallback_qr: bool,
    /// Shorten every block pair by QR instead of Grammian + Cholesky.
    pub qr_shorten: bool,
    /// Tolerance of the relative-orthogonality test.
    pub gate_eps: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            variant: 0,
            outer_kind: StrategyKind::Me,
            inner_kind: StrategyKind::Me,
            blocking: Blocking::Fb,
            sorting: true,
            max_inner_sweeps: 30,
            max_outer_sweeps: 30,
            block_width: 8,
            fallback_qr: true,
            qr_shorten: false,
            gate_eps: f64::EPSILON,
        }
    }
}

impl SolverConfig {
    pub fn variant(id: u8) -> Result<Self> {
        let cfg = SolverConfig { variant: id, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_blocking(mut self, blocking: Blocking) -> Self {
        self.blocking = blocking;
        self.max_inner_sweeps = match blocking {
            Blocking::Fb => 30,
            Blocking::Bo => 1,
        };
        self
    }

    pub fn with_block_width(mut self, w: usize) -> Self {
        self.block_width = w;
        self
    }

    pub fn with_kinds(mut self, outer: StrategyKind, inner: StrategyKind) -> Self {
        self.outer_kind = outer;
        self.inner_kind = inner;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !crate::dotprod::fma_is_fused() {
            return Err(Error::Invalid("mul_add is not a fused multiply-add on this target".into()));
        }
        if self.variant > 7 {
            return Err(Error::Invalid(format!("variant {} is not in 0..=7", self.variant)));
        }
        if self.block_width == 0 {
            return Err(Error::Invalid("block width must be positive".into()));
        }
        if self.max_inner_sweeps == 0 || self.max_outer_sweeps == 0 {
            return Err(Error::Invalid("sweep limits must be positive".into()));
        }
        if !(self.gate_eps > 0.0) {
            return Err(Error::Invalid("gate tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn criterion(&self) -> Criterion {
        if self.variant < 4 {
            Criterion::C1
        } else {
            Criterion::C2
        }
    }

    pub fn prescale(&self) -> bool {
        matches!(self.variant, 0 | 1 | 4 | 5)
    }

    pub fn compensated(&self) -> bool {
        self.variant % 2 == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_decode_table() {
        let expect = [
            (Criterion::C1, true, false),
            (Criterion::C1, true, true),
            (Criterion::C1, false, false),
            (Criterion::C1, false, true),
            (Criterion::C2, true, false),
            (Criterion::C2, true, true),
            (Criterion::C2, false, false),
            (Criterion::C2, false, true),
        ];
        for (id, &(c, p, k)) in expect.iter().enumerate() {
            let cfg = SolverConfig::variant(id as u8).unwrap();
            assert_eq!((cfg.criterion(), cfg.prescale(), cfg.compensated()), (c, p, k), "variant {id}");
        }
        assert!(SolverConfig::variant(8).is_err());
    }

    #[test]
    fn bo_caps_inner_sweeps() {
        let cfg = SolverConfig::default().with_blocking(Blocking::Bo);
        assert_eq!(cfg.max_inner_sweeps, 1);
        assert_eq!(cfg.with_blocking(Blocking::Fb).max_inner_sweeps, 30);
    }
}
