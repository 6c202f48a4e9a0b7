//! Selective joint HDR fusion and denoising for three-frame exposure brackets.
//!
//! The crate covers the whole workflow: a synthetic bracket simulator, the
//! radiometric transforms, three trainable networks (a tone-mapped-domain
//! denoiser, a pyramid attention fusion network with one model per reference
//! frame, and a small reference selector), their training loops, metrics, and
//! an inference pipeline that picks a fusion path per scene.

pub mod cli;
pub mod image;
pub mod imaging;
pub mod loss;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod sim;
pub mod training;

pub use image::Image;
