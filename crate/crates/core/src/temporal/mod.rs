//! Cubic-spline interpolation of per-vertex motion between mesh frames and
//! per-frame enclosed-volume traces.

mod io;
mod spline;

use std::path::PathBuf;

use thiserror::Error;

pub use io::{read_sequence, volume_csv, write_sequence, TimesFile};
pub use spline::{build_motion_spline, sample_motion, volume_trace, MotionSpline, SplineKind};

use crate::mesh::{MeshError, TriangleMesh, Vec3};

#[derive(Debug, Error)]
pub enum TemporalError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("invalid motion sequence: {0}")]
    Invalid(String),
    #[error("structure is not closed at frame {frame}")]
    OpenStructure { frame: usize },
    #[error("spline system is singular")]
    Singular,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

pub type Result<T, E = TemporalError> = std::result::Result<T, E>;

/// Vertex frames sharing one connectivity, at strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    pub faces: Vec<[usize; 3]>,
    pub frames: Vec<Vec<Vec3>>,
    pub times: Vec<f64>,
    /// Cycle length when the motion repeats; times then lie in `[0, period)`.
    pub period: Option<f64>,
}

impl MotionSequence {
    pub fn new(faces: Vec<[usize; 3]>, frames: Vec<Vec<Vec3>>, times: Vec<f64>, period: Option<f64>) -> Result<Self> {
        let seq = Self { faces, frames, times, period };
        seq.validate()?;
        Ok(seq)
    }

    pub fn is_periodic(&self) -> bool {
        self.period.is_some()
    }

    pub fn vertex_count(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(TemporalError::Invalid(msg));
        if self.frames.len() < 2 {
            return invalid(format!("{} frames, at least 2 are required", self.frames.len()));
        }
        if self.times.len() != self.frames.len() {
            return invalid(format!("{} times for {} frames", self.times.len(), self.frames.len()));
        }
        let n = self.vertex_count();
        if let Some(k) = self.frames.iter().position(|f| f.len() != n) {
            return invalid(format!("frame {k} has {} vertices, frame 0 has {n}", self.frames[k].len()));
        }
        if let Some(k) = self.frames.iter().position(|f| f.iter().any(|v| !v.iter().all(|x| x.is_finite()))) {
            return invalid(format!("frame {k} has a non-finite coordinate"));
        }
        if let Some(&[i, j, k]) = self.faces.iter().find(|f| f.iter().any(|&i| i >= n)) {
            return invalid(format!("face [{i}, {j}, {k}] out of range for {n} vertices"));
        }
        if !self.times.iter().all(|t| t.is_finite()) {
            return invalid("times must be finite".into());
        }
        if let Some(k) = self.times.windows(2).position(|w| w[1] <= w[0]) {
            let what = if self.times[k + 1] == self.times[k] { "duplicate" } else { "decreasing" };
            return invalid(format!("{what} times at frames {k} and {}", k + 1));
        }
        if let Some(period) = self.period {
            if !(period.is_finite() && period > 0.0) {
                return invalid(format!("period {period} must be positive"));
            }
            if self.times[0] < 0.0 || self.times[self.times.len() - 1] >= period {
                return invalid(format!("periodic times must lie in [0, {period})"));
            }
        }
        Ok(())
    }

    /// Frame `k` as a mesh.
    pub fn mesh(&self, k: usize) -> Result<TriangleMesh> {
        Ok(TriangleMesh::new(self.frames[k].clone(), self.faces.clone())?)
    }
}
