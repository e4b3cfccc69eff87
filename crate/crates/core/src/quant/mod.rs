//! Linear and codebook quantization.

mod kl;
mod kmeans;
mod linear;
mod tensor;

pub use kl::{kl_calibrate, kl_candidates, kl_divergence_at, KL_BINS, KL_EPSILON};
pub use kmeans::{kmeans_quantize, Codebook};
pub use linear::{linear_quantize, quantize_value, QuantSpec};
pub use tensor::{read_tensor, write_tensor, TensorF32, QTNS_MAGIC, QTNS_VERSION};
