//! Variational autoencoder whose latent code is split into a label-relevant
//! part `z_s` and a label-irrelevant part `z_u`.
//!
//! * `z_s` comes from a deterministic encoder and is pulled towards a
//!   learnable Gaussian mixture with one diagonal component per class.
//! * `z_u` comes from an amortized Gaussian encoder regularized towards
//!   `N(0, I)` and stripped of label information by a latent adversarial
//!   classifier.
//! * A label-conditioned discriminator in data space turns the decoder into
//!   a GAN generator.
//!
//! Everything runs on the small reverse-mode engine in [`autodiff`], in
//! 64-bit floats.

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod distributions;
mod error;
pub mod eval;
pub mod losses;
pub mod models;
pub mod rng;
pub mod training;

pub use autodiff::{Graph, Tensor, Var};
pub use error::{Error, Result};
