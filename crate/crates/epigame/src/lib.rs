//! Solvers for networked SIS epidemics under the degree-based mean-field
//! approximation, and for the game in which each degree class chooses its
//! own curing rate.
//!
//! The population is described by a degree distribution P(k). In the
//! mean-field limit the stationary infection probability of a degree-k
//! node is x_k = kv / (delta_k + kv), where delta_k is the curing rate of
//! class k and v solves the consistency equation
//!
//! ```text
//! 1 = sum_k k q_k / (delta_k + k v),     q_k = k P(k) / <d>.
//! ```
//!
//! On top of the epidemic layer sit two decision models: classes that
//! minimize the true expected cost x_k + c_k delta_k, and classes that
//! perceive x_k through an inverse-S probability weighting function
//! (overweighting rare infections, underweighting likely ones). The
//! [`game`] module computes degree-based equilibria for both, [`regular`]
//! holds the closed forms for degree-regular networks, and [`netsim`]
//! validates the mean-field predictions with an exact stochastic
//! simulation on sampled configuration-model graphs.
//!
//! All analytic modules are generic over the scalar type through the
//! [`Real`] trait (`f32` or `f64`); the `*64` aliases at the crate root
//! fix the common double-precision choice.

pub mod dbmf;
mod error;
pub mod game;
pub mod netsim;
pub mod regular;
pub mod sampling;
pub mod weighting;

use std::fmt;

use num_traits::{Float, FloatConst, FromPrimitive};

pub use error::{Error, Result};

/// Scalar type for the analytic layers: any IEEE float with the usual
/// transcendental operations and `f64`-convertible constants.
pub trait Real: Float + FloatConst + FromPrimitive + fmt::Debug + fmt::Display {}

impl<T> Real for T where T: Float + FloatConst + FromPrimitive + fmt::Debug + fmt::Display {}

/// Converts an `f64` constant into the working scalar type.
///
/// Panics if the conversion fails, which cannot happen for the finite
/// tolerances and grid constants used in this crate.
pub(crate) fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("constant not representable in scalar type")
}

/// 1/e, the argument at which the inverse-S weighting derivative attains
/// its minimum; computed once so every module uses the identical value.
pub(crate) fn inv_e<T: Real>() -> T {
    (-T::one()).exp()
}

pub type WeightingSpec64 = weighting::WeightingSpec<f64>;
pub type DegreeDistribution64 = dbmf::DegreeDistribution<f64>;
pub type NeighborDistribution64 = dbmf::NeighborDistribution<f64>;
pub type CuringProfile64 = dbmf::CuringProfile<f64>;
pub type EndemicState64 = dbmf::EndemicState<f64>;
pub type GameSpec64 = game::GameSpec<f64>;
pub type EquilibriumResult64 = game::EquilibriumResult<f64>;
