//! Generalized singular value decomposition of a matrix pair `(F, G)` by the
//! implicit one-sided Hari–Zimmermann method.
//!
//! The pair is never multiplied out into Grammians globally. Columns of `F`
//! and `G` are transformed in place by 2×2 congruences until they are
//! mutually orthogonal, with a blocked outer level, parallel pivot orderings
//! and a simulated multi-worker stripe exchange on top.
//!
//! ```
//! use hzgsvd::{solve, Matrix, SolverConfig};
//!
//! let f = Matrix::from_row_major(2, 2, &[1.0, 1.0, 0.0, 1.0]);
//! let g = Matrix::identity(2, hzgsvd::Field::Real);
//! let r = solve(&f, &g, &SolverConfig::default()).unwrap();
//! let golden = (1.0 + 5f64.sqrt()) / 2.0;
//! let mut s = r.sigma.clone();
//! s.sort_by(|a, b| b.total_cmp(a));
//! assert!((s[0] - golden).abs() < 1e-14);
//! ```

pub mod arith;
pub mod blocked;
pub mod config;
pub mod distsim;
pub mod dotprod;
mod error;
pub mod factor;
pub mod harness;
pub mod io;
pub mod kernel2x2;
pub mod matrix;
pub mod pointwise;
pub mod strategies;

pub use blocked::{gsvd_blocked, solve};
pub use config::{Blocking, Criterion, SolverConfig, StrategyKind};
pub use error::{Error, Result};
pub use matrix::{Field, GsvdResult, Matrix, ProblemPair};
