//! Dense linear algebra, MLP passes, the bit-valued cross-entropy, Adam and
//! gradient verification.

mod adam;
mod gradcheck;
mod loss;
mod matrix;
pub(crate) mod mlp;

pub use adam::AdamState;
pub use gradcheck::{finite_diff_check, finite_diff_report, GradCheckReport};
pub use loss::{argmax, count_correct, nll_bits, softmax_nll, softmax_nll_bits};
pub use matrix::Matrix;
pub use mlp::{
    mlp_backward, mlp_forward, mlp_logits, Dense, ForwardCache, MlpConfig, MlpParams, ParamTensors,
};
