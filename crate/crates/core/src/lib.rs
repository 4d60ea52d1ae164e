//! Classification of critical points of solutions of `-Δu = f(u)` in the plane.

mod error;
pub mod field;
pub mod index;
pub mod jets;
pub mod classify;
pub mod levelset;
pub mod replicate;
pub mod report;
pub mod solver;

pub use error::{Error, Result};
pub use field::{Domain, Nonlinearity, Point, Poly2, Rect, ScalarField};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/fields.md")]
    mod fields {}
    #[doc = include_str!("../../../book/src/jets.md")]
    mod jets {}
    #[doc = include_str!("../../../book/src/index.md")]
    mod index {}
    #[doc = include_str!("../../../book/src/classify.md")]
    mod classify {}
    #[doc = include_str!("../../../book/src/levelsets.md")]
    mod levelsets {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/replicate.md")]
    mod replicate {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
