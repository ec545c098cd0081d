//! Frequency-domain linear-attention forecasting.
//!
//! The model standardizes each input window, embeds it, moves to the
//! frequency domain with a real DFT, runs separate linear-attention encoder
//! stacks over the real and imaginary bins, returns to the time domain and
//! projects to the forecast horizon.

pub mod autodiff;
pub mod checkpoint;
pub mod data;
pub mod encoder;
pub mod error;
pub mod model;
pub mod optim;
pub mod params;
pub mod revin;
pub mod spectral;
pub mod tensor;
pub mod train;

pub use error::{FrwkvError, Result};
pub use tensor::Tensor;
