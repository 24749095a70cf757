use super::Optimizer;
use crate::mesh::Vec3;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-12;
/// The step decays along a half cosine to this fraction of its start value.
const FINAL_STEP_FRACTION: f64 = 0.01;

/// First-order optimiser over handle positions. The step length is in model
/// units: Adam moves each coordinate by about `step`, momentum descent moves
/// the handle with the largest initial gradient by about `step`.
pub(crate) struct Stepper {
    kind: Optimizer,
    step: f64,
    momentum: f64,
    iterations: usize,
    t: usize,
    first: Vec<Vec3>,
    second: Vec<Vec3>,
    gradient_scale: Option<f64>,
}

impl Stepper {
    pub fn new(kind: Optimizer, step: f64, momentum: f64, iterations: usize, handles: usize) -> Self {
        Self {
            kind,
            step,
            momentum,
            iterations,
            t: 0,
            first: vec![Vec3::zeros(); handles],
            second: vec![Vec3::zeros(); handles],
            gradient_scale: None,
        }
    }

    fn current_step(&self) -> f64 {
        let progress = self.t as f64 / self.iterations.max(1) as f64;
        let cosine = 0.5 * (1.0 + (std::f64::consts::PI * progress.min(1.0)).cos());
        self.step * (FINAL_STEP_FRACTION + (1.0 - FINAL_STEP_FRACTION) * cosine)
    }

    pub fn apply(&mut self, positions: &mut [Vec3], gradient: &[Vec3]) {
        let step = self.current_step();
        self.t += 1;
        match self.kind {
            Optimizer::AdaptiveMoments => {
                let c1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
                let c2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
                for ((p, g), (m, v)) in positions.iter_mut().zip(gradient).zip(self.first.iter_mut().zip(&mut self.second)) {
                    *m = *m * ADAM_BETA1 + g * (1.0 - ADAM_BETA1);
                    *v = *v * ADAM_BETA2 + g.component_mul(g) * (1.0 - ADAM_BETA2);
                    for d in 0..3 {
                        let mh = m[d] / c1;
                        let vh = v[d] / c2;
                        p[d] -= step * mh / (vh.sqrt() + ADAM_EPS);
                    }
                }
            }
            Optimizer::GradientDescentMomentum => {
                let scale = *self
                    .gradient_scale
                    .get_or_insert_with(|| gradient.iter().map(|g| g.norm()).fold(0.0, f64::max));
                if scale == 0.0 {
                    return;
                }
                for ((p, g), vel) in positions.iter_mut().zip(gradient).zip(self.first.iter_mut()) {
                    *vel = *vel * self.momentum - g * (step / scale);
                    *p += *vel;
                }
            }
        }
    }
}
