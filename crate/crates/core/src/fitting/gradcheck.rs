use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::Result;
use crate::deform::{deform_from_rest, BiharmonicMap};
use crate::energies::{Evaluation, LossWeights, Objective, TargetSet};
use crate::mesh::{TaggedMesh, Vec3};

const RELATIVE_FLOOR: f64 = 1e-6;
const STEP_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    /// Probes that entered the comparison.
    pub probes: usize,
    pub skipped_kink: usize,
    /// Probes where a nearest-neighbour match or mask bit changed.
    pub skipped_switch: usize,
    pub max_abs_analytic: f64,
    pub max_abs_numeric: f64,
}

fn near_kink(base: &Evaluation, plus: &Evaluation, minus: &Evaluation) -> bool {
    base.wall_dots.iter().zip(&plus.wall_dots).zip(&minus.wall_dots).any(|((&d, &p), &m)| {
        let flips = p.signum() != m.signum() || p == 0.0 || m == 0.0;
        flips || d.abs() <= (p - m).abs()
    })
}

/// Compare the handle gradient `W^T dL/dV` with central differences of the
/// total loss along `probe_count` random handle coordinates, for
/// `V = V_rest + W (P - P_rest)`. Probes crossing a correspondence switch or
/// the orthogonality kink are skipped and counted.
pub fn gradient_check(
    template: &TaggedMesh,
    map: &BiharmonicMap,
    targets: &TargetSet,
    weights: LossWeights,
    handle_positions: &[Vec3],
    probe_count: usize,
    seed: u64,
) -> Result<GradientCheck> {
    let objective = Objective::new(template, targets, weights)?;
    let rest = template.mesh.vertices();
    let rest_handles = map.handles().gather(rest);
    let step = STEP_FRACTION * template.mesh.bounding_box().diagonal().max(f64::MIN_POSITIVE);
    let eval_at = |p: &[Vec3]| -> Result<Evaluation> {
        Ok(objective.evaluate(&deform_from_rest(map, rest, &rest_handles, p)?)?)
    };
    let base = eval_at(handle_positions)?;
    let analytic = map.pullback(&base.gradient);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = GradientCheck {
        max_relative_error: 0.0,
        probes: 0,
        skipped_kink: 0,
        skipped_switch: 0,
        max_abs_analytic: 0.0,
        max_abs_numeric: 0.0,
    };
    for _ in 0..probe_count {
        let k = rng.gen_range(0..map.handle_count());
        let c = rng.gen_range(0..3);
        let mut p = handle_positions.to_vec();
        p[k][c] += step;
        let plus = eval_at(&p)?;
        p[k][c] -= 2.0 * step;
        let minus = eval_at(&p)?;
        if plus.signature != base.signature || minus.signature != base.signature {
            out.skipped_switch += 1;
            continue;
        }
        if near_kink(&base, &plus, &minus) {
            out.skipped_kink += 1;
            continue;
        }
        let numeric = (plus.value - minus.value) / (2.0 * step);
        let a = analytic[k][c];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
        out.max_relative_error = out.max_relative_error.max(rel);
        out.max_abs_analytic = out.max_abs_analytic.max(a.abs());
        out.max_abs_numeric = out.max_abs_numeric.max(numeric.abs());
        out.probes += 1;
    }
    Ok(out)
}
