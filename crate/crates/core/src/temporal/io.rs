use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{MotionSequence, Result, TemporalError};
use crate::mesh::{read_obj, write_obj, TriangleMesh};

/// `times.json` next to the frame files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimesFile {
    pub times: Vec<f64>,
    #[serde(default)]
    pub periodic: bool,
    #[serde(default)]
    pub period: Option<f64>,
}

fn frame_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("frame_{k:04}.obj"))
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> TemporalError + '_ {
    move |source| TemporalError::Io { path: path.to_path_buf(), source }
}

/// Read `frame_####.obj` files in index order plus `times.json`.
pub fn read_sequence(dir: &Path) -> Result<MotionSequence> {
    let times_path = dir.join("times.json");
    let text = std::fs::read_to_string(&times_path).map_err(io_error(&times_path))?;
    let times: TimesFile =
        serde_json::from_str(&text).map_err(|e| TemporalError::Format { path: times_path.clone(), msg: e.to_string() })?;
    let period = match (times.periodic, times.period) {
        (true, Some(p)) => Some(p),
        (true, None) => return Err(TemporalError::Format { path: times_path, msg: "periodic sequence without period".into() }),
        (false, _) => None,
    };
    let mut frame_files: Vec<(usize, PathBuf)> = std::fs::read_dir(dir)
        .map_err(io_error(dir))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            let index = name.strip_prefix("frame_")?.strip_suffix(".obj")?.parse().ok()?;
            Some((index, e.path()))
        })
        .collect();
    frame_files.sort();
    if frame_files.len() != times.times.len() {
        return Err(TemporalError::Format {
            path: times_path,
            msg: format!("{} times for {} frame files", times.times.len(), frame_files.len()),
        });
    }
    let mut faces = None;
    let mut frames = Vec::with_capacity(frame_files.len());
    for (_, path) in &frame_files {
        let mesh = read_obj(path)?;
        match &faces {
            None => faces = Some(mesh.faces().to_vec()),
            Some(f) if f.as_slice() != mesh.faces() => {
                return Err(TemporalError::Format { path: path.clone(), msg: "connectivity differs from the first frame".into() })
            }
            Some(_) => {}
        }
        frames.push(mesh.vertices().to_vec());
    }
    MotionSequence::new(faces.unwrap_or_default(), frames, times.times, period)
}

/// Write frames and `times.json` into `dir`; returns the files written.
pub fn write_sequence(dir: &Path, seq: &MotionSequence) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    let mut written = Vec::with_capacity(seq.frames.len() + 1);
    for k in 0..seq.frames.len() {
        let path = frame_path(dir, k);
        write_obj(&TriangleMesh::new(seq.frames[k].clone(), seq.faces.clone())?, &path)?;
        written.push(path);
    }
    let times = TimesFile { times: seq.times.clone(), periodic: seq.is_periodic(), period: seq.period };
    let path = dir.join("times.json");
    let json = serde_json::to_string_pretty(&times).expect("times serialise");
    std::fs::write(&path, json + "\n").map_err(io_error(&path))?;
    written.push(path);
    Ok(written)
}

/// `t,volume_mm3` rows.
pub fn volume_csv(trace: &[(f64, f64)]) -> String {
    let mut s = String::from("t,volume_mm3\n");
    for (t, v) in trace {
        let _ = writeln!(s, "{t:?},{v:?}");
    }
    s
}
