//! Numerical kernels: quadrature, log-space mixtures, scalar search.

mod logsumexp;
pub mod mixture;
mod optimize;
mod quadrature;

pub use logsumexp::{log_sum_exp, log_sum_exp_slice, softmax_into, LogSumExp};
pub use mixture::{ExpFamily, Integrator, LogMixture};
pub use optimize::{find_root, minimize_scalar, Interval};
pub use quadrature::{gauss_hermite_rule, gaussian_expectation, QuadratureRule};
pub use quadrature::{MAX_ORDER, MAX_TENSOR_DIM, MIN_ORDER};
