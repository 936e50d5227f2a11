//! Numerical verification of calibration-based minimality for unions of
//! calibrated 2-faces that meet along singular edges.
//!
//! The crate is organised bottom-up:
//!
//! * [`exterior`]: constant-coefficient alternating forms, evaluation on
//!   frames, wedge products, isometry pushforward and a numerical comass.
//! * [`quadrature`] and [`surfaces`]: parametrized faces, their areas,
//!   form fluxes and induced boundary orientations.
//! * [`constructions`]: Kähler forms, the holomorphic `z = w²` family,
//!   books of half-planes and cones over prisms.
//! * [`criterion`]: the per-edge orientation / vanishing-sum checker.
//! * [`deform`]: boundary-fixing bump diffeomorphisms, deformed areas,
//!   swept fluxes, random trials and an adversarial search.
//! * [`scene`], [`report`], [`export`], [`tune`], [`commands`]: the text
//!   scene format, deterministic reports, OBJ export and command dispatch.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod constructions;
pub mod criterion;
pub mod deform;
mod error;
pub mod export;
pub mod exterior;
pub mod quadrature;
pub mod report;
pub mod scene;
pub mod surfaces;
pub mod tune;

pub use error::{Error, Result};

/// Dense column vector used for points and tangent vectors.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used for isometries and Jacobians.
pub type Matrix = nalgebra::DMatrix<f64>;

/// Deterministic per-task RNG: one ChaCha stream per `(seed, index)` pair.
pub(crate) fn task_rng(seed: u64, index: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Maps `f` over `0..count`, in parallel when the `parallel` feature is on.
/// Results are always returned in index order.
pub(crate) fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}
