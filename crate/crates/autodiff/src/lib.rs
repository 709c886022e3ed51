//! Dense `f64` tensors, a reverse-mode tape with the primitives needed for
//! recurrent sequence labelers and attention, a finite-difference gradient
//! oracle, and Adam.

pub mod error;
pub mod gradcheck;
mod linalg;
pub mod ops;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;

pub use error::{Result, TensorError};
pub use gradcheck::{finite_diff_check, GradCheckOptions, GradCheckReport};
pub use ops::{Attrs, OpKind};
pub use optim::{Adam, AdamConfig};
pub use params::{init, ParamId, ParamStore};
pub use tape::{Tape, Var};
pub use tensor::{argmax, Tensor};
