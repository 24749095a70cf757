//! Direct optimisation of handle positions against target surfaces with a
//! coarse-to-fine handle schedule.

mod fit;
mod gradcheck;
mod metrics;
mod optim;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fit::{fit_handles, BlockResult, FitResult, TraceRow};
pub use gradcheck::{gradient_check, GradientCheck};
pub use metrics::{sample_like_targets, FitMetrics};

use crate::deform::{DeformError, EnergyKind};
use crate::energies::{EnergyError, LossWeights};
use crate::quality::QualityError;

#[derive(Debug, Error)]
pub enum FitError {
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Deform(#[from] DeformError),
    #[error(transparent)]
    Quality(#[from] QualityError),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error("diverged in block {block} at iteration {iteration}: loss {loss:.6e} stayed above 10x the initial {initial:.6e}")]
    Diverged { block: usize, iteration: usize, loss: f64, initial: f64 },
}

pub type Result<T, E = FitError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    GradientDescentMomentum,
    #[default]
    AdaptiveMoments,
}

/// What happens to the energy between blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MapUpdate {
    /// Rebuild the energy on the block's rest pose.
    #[default]
    Recompute,
    /// Keep the energy of the original template.
    Reuse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Handle count of each block.
    pub schedule: Vec<usize>,
    pub iters_per_block: usize,
    /// Initial step as a fraction of the template bounding-box diagonal.
    pub step_size: f64,
    pub optimizer: Optimizer,
    /// Momentum coefficient of the gradient-descent optimiser.
    pub momentum: f64,
    pub seed: u64,
    pub energy: EnergyKind,
    pub map_update: MapUpdate,
    /// Target samples drawn per structure by front-ends.
    pub samples: usize,
    #[serde(skip)]
    pub loss: LossWeights,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            schedule: vec![75, 75, 600],
            iters_per_block: 300,
            step_size: 1e-2,
            optimizer: Optimizer::default(),
            momentum: 0.9,
            seed: 0,
            energy: EnergyKind::CotangentSquared,
            map_update: MapUpdate::default(),
            samples: 5000,
            loss: LossWeights::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self, vertex_count: usize) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(FitError::Config("schedule must list at least one block".into()));
        }
        if let Some(&c) = self.schedule.iter().find(|&&c| c == 0 || c > vertex_count) {
            return Err(FitError::Config(format!("handle count {c} outside 1..={vertex_count}")));
        }
        if self.iters_per_block == 0 {
            return Err(FitError::Config("iters_per_block must be positive".into()));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(FitError::Config(format!("step_size {} must be positive", self.step_size)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(FitError::Config(format!("momentum {} must lie in [0, 1)", self.momentum)));
        }
        if self.samples == 0 {
            return Err(FitError::Config("samples must be positive".into()));
        }
        self.loss.validate()?;
        if self.schedule.windows(2).any(|w| w[1] < w[0]) {
            log::warn!("handle schedule {:?} is not nondecreasing", self.schedule);
        }
        Ok(())
    }
}
