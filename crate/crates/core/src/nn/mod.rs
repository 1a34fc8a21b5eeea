//! Dense feed-forward engine shared by the transmitter, receiver, generator
//! and discriminator: batched forward evaluation, exact reverse-mode
//! gradients (to parameters and to inputs), cross entropy and Adam.
//!
//! All arithmetic is 64-bit. Batches are matrices with one example per row;
//! gradient reductions happen inside single-threaded matrix products, so a
//! fixed seed reproduces parameters bit for bit.

mod adam;
mod loss;
mod net;
mod rng;

pub use adam::{AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON};
pub use loss::{cross_entropy, cross_entropy_rows, mean_cross_entropy, one_hot, softmax_cross_entropy, LOG_CLAMP};
pub use net::{Activation, Dense, DenseNet, ForwardCache, Gradients, LayerGradient, LayerSpec};
pub use rng::Rng;
