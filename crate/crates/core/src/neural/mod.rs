//! Feed-forward tanh networks with hand-written backpropagation and Adam.

mod adam;
mod mlp;
mod serial;

pub use adam::{adam_step, AdamState};
pub use mlp::{
    default_architecture, init_params, init_params_with_rng, Activation, ForwardCache, Layer,
    LayerSpec, MlpParams,
};
pub use serial::{Architecture, AutoencoderRecord, LayerRecord, MlpRecord};
