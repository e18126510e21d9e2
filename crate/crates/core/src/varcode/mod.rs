//! Variational codelength: KL of a sparsity-inducing posterior plus the
//! expected data cost under it.

pub mod kl;
mod layer;
mod probe;
mod report;
mod train;

pub use kl::{gaussian_kl_nats, group_kl_nats};
pub use layer::VarLayer;
pub use probe::{kl_bits, prune_architecture, var_forward, ForwardMode, VarParams, VarProbe, DEFAULT_PRUNE_THRESHOLD};
pub use report::{elbo_bits, pruned_accuracy, variational_codelength, VarReport};
pub use train::train_variational;
