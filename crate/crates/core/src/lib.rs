pub mod arfima;
pub mod arsieve;
pub mod estimators;
pub mod error;
pub mod fracdiff;
pub mod harness;
pub mod pfsb;
pub mod rng;
pub mod series;
pub mod spectral;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/fracdiff.md")]
    mod fracdiff {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/bootstrap.md")]
    mod bootstrap {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
