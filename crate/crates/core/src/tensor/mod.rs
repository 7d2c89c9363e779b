//! Dense tensors and a reverse-mode differentiation tape.

mod gradcheck;
mod graph;
mod value;

pub use gradcheck::{grad_check, grad_check_many, GradCheckReport, EPS_FLOOR};
pub use graph::{Gradients, Graph, Primitive, Var};
pub use value::Tensor;
