//! Efficient universal shuffle attack against a toy anchor-based Siamese tracker.
//!
//! The crate is organised bottom-up:
//!
//! * [`diffnum`] – tensors and a define-by-run reverse-mode tape,
//! * [`tracker`] – encoder / classifier / regressor, box selection, tracking loop, training,
//! * [`losses`] – feature-deflect, confidence and drift losses,
//! * [`attack`] – greedy-gradient sampling, shuffled candidates and sign-gradient ascent,
//! * [`corpus`] – deterministic synthetic videos and their on-disk layout,
//! * [`eval`] – OTB/VOT style metrics and report rendering.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar to `f64`, which is what the pipeline uses.

pub mod attack;
mod binio;
pub mod corpus;
pub mod diffnum;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod image;
pub mod losses;
pub mod perturbation;
pub mod rng;
pub mod scalar;
pub mod tracker;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Tensor64 = diffnum::Tensor<f64>;
pub type Tape64 = diffnum::Tape<f64>;
pub type Tensor32 = diffnum::Tensor<f32>;
pub type Tape32 = diffnum::Tape<f32>;
