use serde::{Deserialize, Serialize};

use super::caps::{cap_cwo, cap_plane_distance};
use super::{chamfer_and_hausdorff, dice, self_intersection_fraction, CwoVariant, Result};
use crate::mesh::{enclosed_volume, TaggedMesh, TriangleMesh};

/// Metrics of one cap. A metric that cannot be evaluated (for example a
/// mean normal of zero length) is `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapQuality {
    pub name: String,
    pub cwo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cwo_centroid: Option<f64>,
    pub coplanarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub caps: Vec<CapQuality>,
    pub self_intersection_fraction: f64,
    pub chamfer: Option<f64>,
    pub symmetric_hausdorff: Option<f64>,
    pub dice: Option<f64>,
    pub volume: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    /// Surface samples per mesh for chamfer and Hausdorff distances.
    pub samples: usize,
    pub seed: u64,
    /// Voxel spacing for Dice; `None` skips it.
    pub spacing: Option<f64>,
    /// Also report the centroid-axis orthogonality variant.
    pub centroid_cwo: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { samples: 20_000, seed: 0, spacing: None, centroid_cwo: false }
    }
}

/// Round to 9 significant digits.
pub fn round_significant(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

fn round_opt(x: Option<f64>) -> Option<f64> {
    x.map(round_significant)
}

impl QualityReport {
    /// The report with every number rounded to 9 significant digits.
    pub fn rounded(&self) -> Self {
        Self {
            caps: self
                .caps
                .iter()
                .map(|c| CapQuality {
                    name: c.name.clone(),
                    cwo: round_opt(c.cwo),
                    cwo_centroid: round_opt(c.cwo_centroid),
                    coplanarity: round_opt(c.coplanarity),
                })
                .collect(),
            self_intersection_fraction: round_significant(self.self_intersection_fraction),
            chamfer: round_opt(self.chamfer),
            symmetric_hausdorff: round_opt(self.symmetric_hausdorff),
            dice: round_opt(self.dice),
            volume: round_opt(self.volume),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rounded()).expect("report serialises")
    }
}

fn or_warn(what: &str, r: Result<f64>) -> Option<f64> {
    r.map_err(|e| log::warn!("{what}: {e}")).ok()
}

/// Evaluate `mesh`, optionally against a reference surface.
pub fn quality_report(mesh: &TaggedMesh, reference: Option<&TriangleMesh>, options: &ReportOptions) -> Result<QualityReport> {
    let caps = mesh
        .tags
        .caps
        .iter()
        .map(|cap| CapQuality {
            name: cap.name.clone(),
            cwo: or_warn("cap-wall orthogonality", cap_cwo(&mesh.mesh, cap, CwoVariant::MeanNormals)),
            cwo_centroid: if options.centroid_cwo {
                or_warn("cap-wall orthogonality", cap_cwo(&mesh.mesh, cap, CwoVariant::CentroidAxis))
            } else {
                None
            },
            coplanarity: or_warn("cap coplanarity", cap_plane_distance(&mesh.mesh, cap)),
        })
        .collect();
    let (chamfer, hausdorff, overlap) = match reference {
        Some(r) => {
            let d = chamfer_and_hausdorff(&mesh.mesh, r, options.samples, options.seed)?;
            let overlap = options.spacing.map(|s| dice(&mesh.mesh, r, s)).transpose()?;
            (Some(d.chamfer), Some(d.hausdorff), overlap)
        }
        None => (None, None, None),
    };
    Ok(QualityReport {
        caps,
        self_intersection_fraction: self_intersection_fraction(&mesh.mesh),
        chamfer,
        symmetric_hausdorff: hausdorff,
        dice: overlap,
        volume: enclosed_volume(&mesh.mesh).ok().map(|v| v.volume),
    })
}
