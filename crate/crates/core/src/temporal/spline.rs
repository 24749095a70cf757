use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{MotionSequence, Result, TemporalError};
use crate::mesh::{enclosed_volume, MeshError, TriangleMesh, Vec3};

/// End conditions of the interpolating cubic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SplineKind {
    /// Zero second derivative at both ends.
    #[default]
    Natural,
    /// Continuous third derivative at the second and second-to-last knots.
    NotAKnot,
    /// Value and first two derivatives match across the wrap; chosen
    /// automatically for periodic sequences.
    Periodic,
}

/// Interpolating cubic spline through every vertex coordinate, stored as
/// knot values and knot second derivatives. Periodic splines repeat the
/// first knot one period later.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSpline {
    kind: SplineKind,
    faces: Vec<[usize; 3]>,
    knots: Vec<f64>,
    values: Vec<Vec<Vec3>>,
    second: Vec<Vec<Vec3>>,
    period: Option<f64>,
}

impl MotionSpline {
    pub fn kind(&self) -> SplineKind {
        self.kind
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.values[0].len()
    }

    /// First and last knot of the evaluated span.
    pub fn span(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Interval index and local coordinates `(i, a, b, h)` for time `t`.
    /// Periodic splines wrap `t`; others extend their end cubics.
    fn locate(&self, t: f64) -> (usize, f64, f64, f64) {
        let (t0, _) = self.span();
        let t = match self.period {
            Some(p) => t0 + (t - t0).rem_euclid(p),
            None => t,
        };
        let m = self.knots.len() - 1;
        let i = self.knots.partition_point(|&k| k <= t).saturating_sub(1).min(m - 1);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - t) / h;
        (i, a, 1.0 - a, h)
    }

    /// All vertex positions at time `t`.
    pub fn evaluate(&self, t: f64) -> Vec<Vec3> {
        let (i, a, b, h) = self.locate(t);
        let ca = (a * a * a - a) * h * h / 6.0;
        let cb = (b * b * b - b) * h * h / 6.0;
        let (y0, y1, m0, m1) = (&self.values[i], &self.values[i + 1], &self.second[i], &self.second[i + 1]);
        (0..self.vertex_count()).map(|v| y0[v] * a + y1[v] * b + m0[v] * ca + m1[v] * cb).collect()
    }

    /// All vertex velocities at time `t`.
    pub fn derivative(&self, t: f64) -> Vec<Vec3> {
        let (i, a, b, h) = self.locate(t);
        let ca = -(3.0 * a * a - 1.0) * h / 6.0;
        let cb = (3.0 * b * b - 1.0) * h / 6.0;
        let (y0, y1, m0, m1) = (&self.values[i], &self.values[i + 1], &self.second[i], &self.second[i + 1]);
        (0..self.vertex_count()).map(|v| (y1[v] - y0[v]) / h + m0[v] * ca + m1[v] * cb).collect()
    }

    /// All vertex accelerations at time `t`.
    pub fn second_derivative(&self, t: f64) -> Vec<Vec3> {
        let (i, a, b, _) = self.locate(t);
        (0..self.vertex_count()).map(|v| self.second[i][v] * a + self.second[i + 1][v] * b).collect()
    }
}

/// Knot second derivatives `M` solve `S M = D Y`, one right-hand side per
/// vertex coordinate. Returns `S` and `D` (rows: equations, columns: knots).
fn spline_system(knots: &[f64], kind: SplineKind) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = knots.len() - 1;
    let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
    let k = m + 1;
    let mut s = DMatrix::zeros(k, k);
    let mut d = DMatrix::zeros(k, k);
    let continuity = |row: usize, prev: usize, next: usize, hp: f64, hn: f64, s: &mut DMatrix<f64>, d: &mut DMatrix<f64>| {
        s[(row, prev)] += hp / 6.0;
        s[(row, row)] += (hp + hn) / 3.0;
        s[(row, next)] += hn / 6.0;
        d[(row, next)] += 1.0 / hn;
        d[(row, row)] -= 1.0 / hn + 1.0 / hp;
        d[(row, prev)] += 1.0 / hp;
    };
    for i in 1..m {
        continuity(i, i - 1, i + 1, h[i - 1], h[i], &mut s, &mut d);
    }
    match kind {
        SplineKind::Natural => {
            s[(0, 0)] = 1.0;
            s[(m, m)] = 1.0;
        }
        SplineKind::NotAKnot if m < 3 => {
            // too few intervals for two distinct conditions: one cubic-free
            // polynomial (line or parabola) through all knots
            s[(0, 0)] = 1.0;
            s[(m, m)] = 1.0;
            if m == 2 {
                s[(0, 1)] = -1.0;
                s[(m, 1)] = -1.0;
            }
        }
        SplineKind::NotAKnot => {
            s[(0, 0)] = h[1];
            s[(0, 1)] = -(h[0] + h[1]);
            s[(0, 2)] = h[0];
            s[(m, m - 2)] = h[m - 1];
            s[(m, m - 1)] = -(h[m - 2] + h[m - 1]);
            s[(m, m)] = h[m - 2];
        }
        SplineKind::Periodic => {
            // knot m is knot 0 one period later
            let mut cyc_s = DMatrix::zeros(m, m);
            let mut cyc_d = DMatrix::zeros(m, m);
            for i in 0..m {
                let prev = (i + m - 1) % m;
                continuity(i, prev, (i + 1) % m, h[(i + m - 1) % m], h[i], &mut cyc_s, &mut cyc_d);
            }
            s.fill(0.0);
            d.fill(0.0);
            s.view_mut((0, 0), (m, m)).copy_from(&cyc_s);
            d.view_mut((0, 0), (m, m)).copy_from(&cyc_d);
            s[(m, 0)] = -1.0;
            s[(m, m)] = 1.0;
        }
    }
    (s, d)
}

/// Interpolating spline of `seq`. Periodic sequences always get periodic
/// end conditions; `kind` selects the ends of aperiodic ones.
pub fn build_motion_spline(seq: &MotionSequence, kind: SplineKind) -> Result<MotionSpline> {
    seq.validate()?;
    let mut knots = seq.times.clone();
    let mut values = seq.frames.clone();
    let kind = match seq.period {
        Some(p) => {
            knots.push(seq.times[0] + p);
            values.push(seq.frames[0].clone());
            SplineKind::Periodic
        }
        None if kind == SplineKind::Periodic => {
            return Err(TemporalError::Invalid("periodic end conditions need a period".into()));
        }
        None => kind,
    };
    let (s, d) = spline_system(&knots, kind);
    let lu = s.lu();
    let solve_map = lu.solve(&d).ok_or(TemporalError::Singular)?;
    let k = knots.len();
    let n = seq.vertex_count();
    // M = S^-1 D Y, applied per knot row to the vertex frames
    let second: Vec<Vec<Vec3>> = (0..k)
        .into_par_iter()
        .map(|row| {
            let mut out = vec![Vec3::zeros(); n];
            for (col, frame) in values.iter().enumerate() {
                let c = solve_map[(row, col)];
                if c != 0.0 {
                    for (o, y) in out.iter_mut().zip(frame) {
                        *o += y * c;
                    }
                }
            }
            out
        })
        .collect();
    Ok(MotionSpline { kind, faces: seq.faces.clone(), knots, values, second, period: seq.period })
}

/// Frames every `dt`: one full period starting at 0 for periodic splines,
/// the knot span from its first knot otherwise.
pub fn sample_motion(spline: &MotionSpline, dt: f64) -> Result<MotionSequence> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(TemporalError::Invalid(format!("time step {dt} must be positive")));
    }
    let (t0, t1) = spline.span();
    let (start, span) = match spline.period {
        Some(p) => (0.0, p),
        None => (t0, t1 - t0),
    };
    if dt > span {
        return Err(TemporalError::Invalid(format!("time step {dt} exceeds the span {span}")));
    }
    let steps = span / dt;
    let count = match spline.period {
        Some(_) => (steps - 1e-9).ceil() as usize,
        None => (steps + 1e-9).floor() as usize + 1,
    };
    let times: Vec<f64> = (0..count).map(|j| start + j as f64 * dt).collect();
    let frames: Vec<Vec<Vec3>> = times.par_iter().map(|&t| spline.evaluate(t)).collect();
    MotionSequence::new(spline.faces.clone(), frames, times, spline.period)
}

/// Enclosed volume of the faces `structure` (every face when `None`) at each
/// frame, as `(t, volume)`.
pub fn volume_trace(seq: &MotionSequence, structure: Option<&[usize]>) -> Result<Vec<(f64, f64)>> {
    seq.validate()?;
    let all: Vec<usize>;
    let faces = match structure {
        Some(f) => f,
        None => {
            all = (0..seq.faces.len()).collect();
            &all
        }
    };
    if let Some(&f) = faces.iter().find(|&&f| f >= seq.faces.len()) {
        return Err(TemporalError::Invalid(format!("structure face {f} out of range")));
    }
    let (sub, origin) = TriangleMesh::new(seq.frames[0].clone(), seq.faces.clone())?.submesh(faces)?;
    let sub_faces = sub.faces().to_vec();
    seq.frames
        .par_iter()
        .enumerate()
        .map(|(k, frame)| {
            let mesh = TriangleMesh::new(origin.iter().map(|&i| frame[i]).collect(), sub_faces.clone())?;
            match enclosed_volume(&mesh) {
                Ok(v) => Ok((seq.times[k], v.volume)),
                Err(MeshError::OpenMesh { .. }) => Err(TemporalError::OpenStructure { frame: k }),
                Err(e) => Err(e.into()),
            }
        })
        .collect()
}
