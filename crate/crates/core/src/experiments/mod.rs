//! Verification scenarios. Each takes a model config and run options and
//! returns an [`ExperimentReport`] whose records compare a measured quantity
//! against a bound from the model constants (or a labelled fitted constant).

mod coherent;
mod dressing;
mod dynamics;
mod form_bound;
mod regularity;
mod report;
mod resolvent;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::ModeFunction;
use crate::hamiltonians::fiber_min_eigenvalue;
use crate::linalg;
use crate::model::ModelConfig;
use crate::qspace::{FiberOperator, QSpace};
use crate::rng;

pub use coherent::exp_coherent_core;
pub use dressing::exp_dressing;
pub use dynamics::exp_dynamics;
pub use form_bound::exp_form_bound;
pub use regularity::{exp_regularity, RegularityCurve, DEAD_BAND};
pub use report::{num, ConfigEcho, ExperimentReport, Record};
pub use resolvent::exp_resolvent_rate;

/// Sweep parameters that are not part of the model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunOptions {
    pub s_list: Vec<f64>,
    pub t_list: Vec<f64>,
    /// Resolvent shift `(Re z, Im z)`.
    pub z: (f64, f64),
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { s_list: vec![1.0, 1.25, 1.5, 1.75], t_list: vec![0.5, 1.0], z: (0.0, 1.0) }
    }
}

impl RunOptions {
    pub fn z(&self) -> C64 {
        C64::new(self.z.0, self.z.1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Experiment {
    FormBound,
    ResolventRate,
    Dynamics,
    Dressing,
    Regularity,
    CoherentCore,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::FormBound,
        Experiment::ResolventRate,
        Experiment::Dynamics,
        Experiment::Dressing,
        Experiment::Regularity,
        Experiment::CoherentCore,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::FormBound => "form_bound",
            Experiment::ResolventRate => "resolvent_rate",
            Experiment::Dynamics => "dynamics",
            Experiment::Dressing => "dressing",
            Experiment::Regularity => "regularity",
            Experiment::CoherentCore => "coherent_core",
        }
    }

    pub fn run(self, config: &ModelConfig, options: &RunOptions) -> Result<ExperimentReport> {
        match self {
            Experiment::FormBound => exp_form_bound(config, options),
            Experiment::ResolventRate => exp_resolvent_rate(config, options),
            Experiment::Dynamics => exp_dynamics(config, options),
            Experiment::Dressing => exp_dressing(config, options),
            Experiment::Regularity => exp_regularity(config, options),
            Experiment::CoherentCore => exp_coherent_core(config, options),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown experiment `{s}`")))
    }
}

/// Small seeded mode function on the active modes.
fn trial_profile(space: &QSpace, seed: u64, tag: &str, index: u64, scale: f64) -> ModeFunction {
    let v = linalg::random_vector(space.active_count(), rng::derive_seed(seed, tag, index));
    ModeFunction::new(v.into_iter().map(|a| a * scale).collect())
}

/// Smallest `C ≥ 0` with `±W ≤ εH_0 + C`.
fn best_form_constant(h0: &FiberOperator, w: &FiberOperator, eps: f64) -> f64 {
    let base = h0.scale(C64::new(eps, 0.0));
    let plus = fiber_min_eigenvalue(&base.add(w));
    let minus = fiber_min_eigenvalue(&base.sub(w));
    (-plus.min(minus)).max(0.0)
}

/// The zero-momentum fiber and its neighbour.
fn sample_fibers(space: &QSpace) -> Vec<usize> {
    let all = space.all_fibers();
    let zero = space.zero_fiber();
    let pos = all.iter().position(|&p| p == zero).unwrap_or(0);
    let mut out = vec![zero];
    if all.len() > 1 {
        out.push(all[(pos + 1) % all.len()]);
    }
    out
}

/// `diag((H_0+1)^{-1/2})` on the given fibers.
fn form_weight_inverse(space: &QSpace, fibers: &[usize]) -> FiberOperator {
    let blocks = fibers
        .iter()
        .map(|&p| {
            nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                space.fock_len(),
                space.free_diagonal(p).into_iter().map(|v| C64::new((v + 1.0).powf(-0.5), 0.0)),
            ))
        })
        .collect();
    FiberOperator::new(fibers.to_vec(), blocks)
}
