//! Exact simulation of a proposed Kochen-Specker test.
//!
//! The crate compares quantum predictions for commuting product observables
//! of two two-valued degrees of freedom with those of noncontextual
//! hidden-variable value assignments, simulates a beam-combiner apparatus
//! that measures a product without measuring its factors, and enumerates
//! measurement histories to classify counterfactual outcomes as forced,
//! possible or impossible.
//!
//! All numerical types are generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the double-precision instantiation used by the
//! command-line front end.

pub mod apparatus;
pub mod counterfactual;
pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod measurement;
pub mod nchv;
pub mod presets;
pub mod rng;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use scalar::Scalar;

pub type Matrix64 = linalg::Matrix<f64>;
pub type StateVector64 = hilbert::StateVector<f64>;
pub type Observable64 = hilbert::Observable<f64>;
pub type UnitaryMap64 = hilbert::UnitaryMap<f64>;
pub type ProjectorPair64 = hilbert::ProjectorPair<f64>;
pub type Step64 = measurement::Step<f64>;
pub type CombinerUnitary64 = apparatus::CombinerUnitary<f64>;
pub type Timeline64 = counterfactual::Timeline<f64>;

pub type Matrix32 = linalg::Matrix<f32>;
pub type StateVector32 = hilbert::StateVector<f32>;
pub type Observable32 = hilbert::Observable<f32>;
pub type UnitaryMap32 = hilbert::UnitaryMap<f32>;
pub type ProjectorPair32 = hilbert::ProjectorPair<f32>;
pub type CombinerUnitary32 = apparatus::CombinerUnitary<f32>;
pub type Timeline32 = counterfactual::Timeline<f32>;
