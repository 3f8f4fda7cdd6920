pub mod envs;
pub mod error;
pub mod harness;
pub mod nn;
pub mod opmodel;
pub mod opponents;
pub mod oracle;
pub mod ppo;
pub mod scalar;

pub use error::{Error, Result};

/// Random generator used by every stochastic component.
pub type SimRng = rand_chacha::ChaCha8Rng;

pub type Mlp = nn::Mlp<f64>;
pub type Mlp32 = nn::Mlp<f32>;
pub type ParamSet = nn::ParamSet<f64>;
pub type Adam = nn::Adam<f64>;
pub type MixerState = opmodel::Mixer<f64>;
