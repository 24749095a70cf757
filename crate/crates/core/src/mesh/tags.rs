use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MeshError, Result, TriangleMesh};

/// One vessel truncation: its cap faces and the wall faces next to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapRecord {
    pub name: String,
    pub cap_faces: Vec<usize>,
    pub wall_faces: Vec<usize>,
    /// Inlet walls receive the up-weight in the surface-fitting loss.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub inlet: bool,
}

/// Template annotations: named structures, caps and per-vertex weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateTags {
    #[serde(default)]
    pub structures: BTreeMap<String, Vec<usize>>,
    #[serde(default)]
    pub caps: Vec<CapRecord>,
    #[serde(default)]
    pub vertex_weights: Vec<f64>,
}

impl TemplateTags {
    /// Tags with a single structure covering every face and unit weights.
    pub fn whole(mesh: &TriangleMesh, name: &str) -> Self {
        let mut structures = BTreeMap::new();
        structures.insert(name.to_string(), (0..mesh.face_count()).collect());
        Self { structures, caps: vec![], vertex_weights: vec![1.0; mesh.vertex_count()] }
    }

    /// Parse the JSON sidecar; missing weights default to 1.0 for each of the
    /// `vertex_count` vertices.
    pub fn from_json(text: &str, vertex_count: usize) -> Result<Self> {
        let mut tags: TemplateTags = serde_json::from_str(text).map_err(|e| MeshError::Tags(e.to_string()))?;
        if tags.vertex_weights.is_empty() {
            tags.vertex_weights = vec![1.0; vertex_count];
        }
        Ok(tags)
    }

    pub fn read(path: &Path, vertex_count: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| MeshError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text, vertex_count)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tags serialise")
    }

    pub fn validate(&self, mesh: &TriangleMesh) -> Result<()> {
        let m = mesh.face_count();
        let check = |what: &str, faces: &[usize]| -> Result<()> {
            if let Some(&f) = faces.iter().find(|&&f| f >= m) {
                return Err(MeshError::Tags(format!("{what} references face {f}, mesh has {m} faces")));
            }
            Ok(())
        };
        for (name, faces) in &self.structures {
            if faces.is_empty() {
                return Err(MeshError::Tags(format!("structure `{name}` is empty")));
            }
            check(&format!("structure `{name}`"), faces)?;
        }
        for cap in &self.caps {
            check(&format!("cap `{}`", cap.name), &cap.cap_faces)?;
            check(&format!("wall of cap `{}`", cap.name), &cap.wall_faces)?;
            let caps: BTreeSet<usize> = cap.cap_faces.iter().copied().collect();
            if let Some(f) = cap.wall_faces.iter().find(|f| caps.contains(f)) {
                return Err(MeshError::Tags(format!("cap `{}` lists face {f} as both cap and wall", cap.name)));
            }
        }
        if self.vertex_weights.len() != mesh.vertex_count() {
            return Err(MeshError::Tags(format!(
                "{} vertex weights for {} vertices",
                self.vertex_weights.len(),
                mesh.vertex_count()
            )));
        }
        if let Some(i) = self.vertex_weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(MeshError::Tags(format!("vertex weight {i} is negative or not finite")));
        }
        Ok(())
    }

    /// Sorted distinct vertices referenced by a face list.
    pub fn vertices_of(mesh: &TriangleMesh, faces: &[usize]) -> Vec<usize> {
        let set: BTreeSet<usize> = faces.iter().flat_map(|&f| mesh.faces()[f]).collect();
        set.into_iter().collect()
    }
}
