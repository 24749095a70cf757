use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::optim::Stepper;
use super::{FitConfig, FitError, FitMetrics, MapUpdate, Result};
use crate::deform::{build_energy, compute_biharmonic, deform_from_rest, sample_handles, EnergyMatrix, HandleSet};
use crate::energies::{Objective, TargetSet};
use crate::mesh::{TaggedMesh, Vec3};

/// Evaluations above this multiple of the initial loss count towards divergence.
const DIVERGENCE_FACTOR: f64 = 10.0;
/// Consecutive diverged evaluations that abort the fit.
const DIVERGENCE_PATIENCE: usize = 50;

/// Counts consecutive evaluations far above the initial loss.
struct DivergenceGuard {
    initial: f64,
    run: usize,
}

impl DivergenceGuard {
    fn new(initial: f64) -> Self {
        Self { initial, run: 0 }
    }

    /// True once the loss has stayed above the limit for the full patience.
    fn observe(&mut self, loss: f64) -> bool {
        if self.initial > 0.0 && loss > DIVERGENCE_FACTOR * self.initial {
            self.run += 1;
        } else {
            self.run = 0;
        }
        self.run >= DIVERGENCE_PATIENCE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub block: usize,
    pub loss: f64,
    /// Summed weighted chamfer term of the supervised structures.
    pub chamfer: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockResult {
    pub handles: HandleSet,
    /// Handle positions on the block's rest pose.
    pub rest_positions: Vec<Vec3>,
    /// Best handle positions found in the block.
    pub final_positions: Vec<Vec3>,
    /// Deformed vertices at the best handle positions.
    pub vertices: Vec<Vec3>,
    pub best_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub final_vertices: Vec<Vec3>,
    pub blocks: Vec<BlockResult>,
    pub loss_trace: Vec<TraceRow>,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub metrics_before: FitMetrics,
    pub metrics_after: FitMetrics,
}

impl FitResult {
    /// Per-block best handle positions.
    pub fn handle_trajectory(&self) -> Vec<&[Vec3]> {
        self.blocks.iter().map(|b| b.final_positions.as_slice()).collect()
    }

    /// `iter,block,loss,chamfer` rows with shortest round-trip floats.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iter,block,loss,chamfer\n");
        for r in &self.loss_trace {
            let _ = writeln!(s, "{},{},{:?},{:?}", r.iter, r.block, r.loss, r.chamfer);
        }
        s
    }
}

/// Fit `template` to `targets` block by block. Each block samples handles
/// by farthest-point sampling on the current surface, builds the biharmonic
/// map, and descends on the handle positions with the gradient pulled back
/// through the map. The best positions of a block become the next rest pose.
pub fn fit_handles(template: &TaggedMesh, energy: &EnergyMatrix, targets: &TargetSet, config: &FitConfig) -> Result<FitResult> {
    let n = template.mesh.vertex_count();
    config.validate(n)?;
    if energy.dim() != n {
        return Err(FitError::Config(format!("energy is {}x{} for a template with {n} vertices", energy.dim(), energy.dim())));
    }
    let objective = Objective::new(template, targets, config.loss)?;
    let step = config.step_size * template.mesh.bounding_box().diagonal();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let metrics_before = FitMetrics::compute(template, targets, config.seed)?;
    let initial_loss = objective.evaluate(template.mesh.vertices())?.value;
    let mut current = template.clone();
    let mut blocks = Vec::with_capacity(config.schedule.len());
    let mut loss_trace = Vec::with_capacity(config.schedule.len() * config.iters_per_block);
    let mut guard = DivergenceGuard::new(initial_loss);

    for (b, &count) in config.schedule.iter().enumerate() {
        let start = rng.gen_range(0..n);
        let handles = sample_handles(&current.mesh, count, start)?;
        let block_energy = match (b, config.map_update) {
            (0, _) | (_, MapUpdate::Reuse) => None,
            (_, MapUpdate::Recompute) => Some(build_energy(&current.mesh, energy.kind())?),
        };
        let map = compute_biharmonic(block_energy.as_ref().unwrap_or(energy), &handles)?;
        let rest = current.mesh.vertices().to_vec();
        let rest_positions = handles.gather(&rest);
        let mut positions = rest_positions.clone();
        let mut best = (f64::INFINITY, positions.clone());
        let mut stepper = Stepper::new(config.optimizer, step, config.momentum, config.iters_per_block, count);

        for it in 0..=config.iters_per_block {
            if positions.iter().any(|v| !v.iter().all(|x| x.is_finite())) {
                return Err(FitError::Diverged { block: b, iteration: it, loss: f64::INFINITY, initial: initial_loss });
            }
            let vertices = deform_from_rest(&map, &rest, &rest_positions, &positions)?;
            let eval = objective.evaluate(&vertices)?;
            if !eval.value.is_finite() {
                return Err(FitError::Diverged { block: b, iteration: it, loss: eval.value, initial: initial_loss });
            }
            if eval.value < best.0 {
                best = (eval.value, positions.clone());
            }
            if guard.observe(eval.value) {
                return Err(FitError::Diverged { block: b, iteration: it, loss: eval.value, initial: initial_loss });
            }
            if it == config.iters_per_block {
                break;
            }
            loss_trace.push(TraceRow { iter: loss_trace.len(), block: b, loss: eval.value, chamfer: eval.point });
            let gradient = map.pullback(&eval.gradient);
            stepper.apply(&mut positions, &gradient);
        }

        let (best_loss, final_positions) = best;
        let vertices = deform_from_rest(&map, &rest, &rest_positions, &final_positions)?;
        current = current.with_vertices(vertices.clone())?;
        log::info!("block {b}: {count} handles, best loss {best_loss:.6e}");
        blocks.push(BlockResult { handles, rest_positions, final_positions, vertices, best_loss });
    }

    let final_loss = blocks.last().map_or(initial_loss, |b| b.best_loss);
    let metrics_after = FitMetrics::compute(&current, targets, config.seed)?;
    Ok(FitResult {
        final_vertices: current.mesh.vertices().to_vec(),
        blocks,
        loss_trace,
        initial_loss,
        final_loss,
        metrics_before,
        metrics_after,
    })
}
