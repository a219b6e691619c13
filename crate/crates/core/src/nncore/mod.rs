//! Dense-network numerics in 64-bit floats.
//!
//! Layers keep their forward caches explicitly and expose exact reverse
//! passes; composite models chain these by hand. [`gradient_check`] compares
//! any such composition against central finite differences.

mod adam;
mod gradcheck;
mod mlp;
mod ops;
mod tensor;

pub use adam::AdamState;
pub use gradcheck::{gradient_check, BlockReport, GradCheckConfig, GradCheckReport};
pub use mlp::{Activation, FinalActivation, Mlp, MlpCache, MlpSpec};
pub use ops::{l2_normalize, l2_normalize_backward, l2_normalize_with_norms, NORM_GUARD};
pub use tensor::{ParamTensor, Params};
