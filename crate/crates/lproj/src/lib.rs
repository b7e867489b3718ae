//! Data-driven dimensionality reduction for linear programs.
//!
//! Given training LP instances that share a common structure, this crate
//! learns a dense `n x k` projection matrix `P` (by PCA over training optima
//! or by stochastic gradient ascent on the projected optimal value), reduces
//! future instances from `n` to `k` variables by optimizing over `x = P y`,
//! solves the small LP, and recovers a feasible `n`-dimensional solution
//! `P y*`. A benchmark pipeline compares the learned projections against
//! full-size solving and random column selection.
//!
//! ```
//! use lproj::densela::DenseMatrix;
//! use lproj::lp::{solve_lp, LpInstance, SolverConfig, SolveStatus};
//!
//! // maximize x1 + x2 subject to x1 <= 1, x2 <= 2
//! let a = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
//! let inst = LpInstance::new(vec![1.0, 1.0], a, vec![1.0, 2.0], "demo");
//! let sol = solve_lp(&inst, &SolverConfig::default()).unwrap();
//! assert_eq!(sol.status, SolveStatus::Optimal);
//! assert!((sol.objective.unwrap() - 3.0).abs() < 1e-9);
//! ```

pub mod bench;
pub mod datagen;
pub mod densela;
pub mod error;
pub mod learn;
pub mod lp;
pub mod mpsio;
pub mod polyproj;
pub mod project;
pub mod reform;

pub use error::{Error, Result};

// The guide chapters double as doc-tests so the book stays in sync with
// the public API.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(projected_lps, "../../../book/src/projected-lps.md");
    chapter!(solver, "../../../book/src/solver.md");
    chapter!(learning, "../../../book/src/learning.md");
    chapter!(equality_elimination, "../../../book/src/equality-elimination.md");
    chapter!(datasets_and_benchmarks, "../../../book/src/datasets-and-benchmarks.md");
    chapter!(file_formats, "../../../book/src/file-formats.md");
}
