//! One-shot achievability bounds for network information theory.
//!
//! Modules, bottom-up:
//!
//! * [`pmf`]: finite joint distributions, kernels, common parts.
//! * [`densities`]: pointwise information and entropy densities.
//! * [`scenario`]: code sizes and reconstruction targets per coding problem.
//! * [`bounds`]: exact and loosened one-shot bounds by exhaustive summation.
//! * [`codecsim`]: Monte-Carlo simulation of the random-coding constructions.
//! * [`second_order`]: normal approximations, multivariate normal CDF, rate
//!   and region queries.

pub mod bounds;
pub mod codecsim;
pub mod densities;
pub mod pmf;
pub mod scenario;
pub mod second_order;

pub use bounds::{evaluate, BoundOptions, BoundResult};
pub use codecsim::{simulate, SimulationOptions, SimulationReport};
pub use densities::{DensitySpec, DensityValue};
pub use pmf::{Alphabet, ConditionalKernel, JointPmf, Role, Variable};
pub use scenario::Scenario;
