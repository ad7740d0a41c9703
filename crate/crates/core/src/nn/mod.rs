//! Small deterministic dense-network kernel: parameter tensors, dense
//! layers with cached activations, the two-class cross-entropy, plain SGD,
//! a step learning-rate schedule and a finite-difference gradient checker.

mod dense;
mod gradcheck;
mod loss;
mod param;
mod schedule;
mod sgd;

pub use dense::{Activation, DenseLayer};
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use loss::{softmax2, softmax_cross_entropy};
pub use param::ParamTensor;
pub use schedule::LrSchedule;
pub use sgd::{Sgd, SgdConfig};

/// Something that owns learnable tensors in a fixed, deterministic order.
pub trait Parameterized {
    fn params(&self) -> Vec<&ParamTensor>;
    fn params_mut(&mut self) -> Vec<&mut ParamTensor>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
