//! Joint latent space embedding of a social network and a binary
//! person-attribute matrix, fitted by variational Bayesian EM.
//!
//! Persons and attributes share one Euclidean latent space. A tie between two
//! persons, or between a person and an attribute, is more likely the closer
//! the two points are. [`vbem::fit_aplsm`] fits both matrices together;
//! [`vbem::fit_lsm`] and [`vbem::fit_blsm`] fit either one alone.
//!
//! ```
//! use jls::model::{AttributeMatrix, LatentConfig, SocialNetwork};
//! use jls::vbem::{fit_aplsm, posterior_link_probabilities, FitOptions};
//!
//! let yi = SocialNetwork::from_rows(
//!     &[vec![0, 1, 1, 0], vec![1, 0, 1, 0], vec![1, 1, 0, 1], vec![0, 0, 1, 0]],
//!     false,
//! )?;
//! let yia = AttributeMatrix::from_rows(&[vec![1, 0], vec![1, 0], vec![1, 1], vec![0, 1]])?;
//! let fit = fit_aplsm(&yi, &yia, &LatentConfig::default(), &FitOptions::with_seed(7))?;
//! assert!(fit.converged);
//! let p = posterior_link_probabilities(&fit);
//! assert_eq!(p.attributes.unwrap().shape(), (4, 2));
//! # Ok::<(), jls::Error>(())
//! ```

pub mod clustering;
pub mod error;
pub mod io;
mod linalg;
pub mod metrics;
pub mod model;
pub mod report;
pub mod simulation;
pub mod vbem;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
