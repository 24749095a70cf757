use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::Hasher;

use super::caps::{coplanar_term, orthogonal_term};
use super::consistency::{check_target, consistency_parts, geometric_mean};
use super::{l2_consistency, EnergyError, LossValue, LossWeights, Result, MASK_EXPANSION};
use crate::mesh::{surface_samples_on, vertex_normals, Aabb, SurfaceSamples, TaggedMesh, TemplateTags, Vec3};
use crate::spatial::KdTree;

/// How the points of a [`TargetSet`] were drawn from a target surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetSampling {
    /// Area-uniform surface samples; structure `k` in name order used seed
    /// `seed + k`.
    Surface { seed: u64 },
    /// The vertices of each structure with area-weighted vertex normals.
    Vertices,
}

/// Per-structure targets. Every template structure must either have samples
/// or be listed as unsupervised.
#[derive(Debug, Clone, Default)]
pub struct TargetSet {
    pub supervised: BTreeMap<String, SurfaceSamples>,
    pub unsupervised: BTreeSet<String>,
    /// `None` for hand-assembled sets.
    pub sampling: Option<TargetSampling>,
}

impl TargetSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_target(mut self, structure: &str, samples: SurfaceSamples) -> Self {
        self.supervised.insert(structure.to_string(), samples);
        self
    }

    pub fn with_unsupervised(mut self, structure: &str) -> Self {
        self.unsupervised.insert(structure.to_string());
        self
    }

    /// Draw `count` samples from every tagged structure of `target`; the
    /// structure at position `k` in name order uses seed `seed + k`.
    pub fn sample_structures(target: &TaggedMesh, count: usize, seed: u64) -> Result<Self> {
        let mut out = Self::new();
        for (k, (name, faces)) in target.tags.structures.iter().enumerate() {
            let s = surface_samples_on(&target.mesh, Some(faces), count, seed.wrapping_add(k as u64))?;
            out.supervised.insert(name.clone(), s);
        }
        out.sampling = Some(TargetSampling::Surface { seed });
        Ok(out)
    }

    /// Use the vertices of every tagged structure of `target` as its points.
    /// A template fitted to its own vertex targets has zero point term.
    pub fn vertex_structures(target: &TaggedMesh) -> Result<Self> {
        let mut out = Self::new();
        for (name, faces) in &target.tags.structures {
            out.supervised.insert(name.clone(), structure_vertices(target, faces)?);
        }
        out.sampling = Some(TargetSampling::Vertices);
        Ok(out)
    }

    /// All supervised samples in structure-name order.
    pub fn union(&self) -> SurfaceSamples {
        SurfaceSamples::concat(self.supervised.values())
    }
}

/// Vertices of the faces `faces` with their vertex normals on that sub-surface,
/// in first-encounter order. Each point records one incident face.
pub(crate) fn structure_vertices(mesh: &TaggedMesh, faces: &[usize]) -> Result<SurfaceSamples> {
    let (sub, origin) = mesh.mesh.submesh(faces)?;
    let normals = vertex_normals(&sub);
    let mut source_face = vec![0; origin.len()];
    for (f, tri) in sub.faces().iter().enumerate().rev() {
        for &v in tri {
            source_face[v] = faces[f];
        }
    }
    if let Some(i) = normals.iter().position(|n| (n.norm() - 1.0).abs() > 1e-9) {
        return Err(EnergyError::NonUnitNormal(i));
    }
    Ok(SurfaceSamples { points: sub.vertices().to_vec(), normals, source_face })
}

struct StructureTerm {
    origin: Vec<usize>,
    faces: Vec<[usize; 3]>,
    target: Option<(SurfaceSamples, KdTree)>,
}

/// One evaluation of the composed surface loss.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<Vec3>,
    /// Sum of the structure geometric-mean terms.
    pub geometric: f64,
    /// Sum of the structure chamfer terms.
    pub point: f64,
    /// Sum of the structure normal terms.
    pub normal: f64,
    pub coplanar: f64,
    pub orthogonal: f64,
    /// Hash of every nearest-neighbour match and weight-mask bit; equal
    /// signatures mean the frozen correspondences did not change.
    pub signature: u64,
    /// Wall-to-cap dot products in cap order.
    pub wall_dots: Vec<f64>,
}

impl Evaluation {
    pub fn loss_value(self) -> LossValue {
        LossValue { value: self.value, gradient: self.gradient }
    }
}

/// Composed loss over a fixed template topology: the sum of structure
/// geometric-consistency terms plus `alpha` times the cap regularisation
/// `coplanar + beta * orthogonal`.
pub struct Objective {
    faces: Vec<[usize; 3]>,
    tags: TemplateTags,
    structures: Vec<StructureTerm>,
    base_weights: Vec<f64>,
    mask: Option<Aabb>,
    weights: LossWeights,
}

impl Objective {
    pub fn new(template: &TaggedMesh, targets: &TargetSet, weights: LossWeights) -> Result<Self> {
        weights.validate()?;
        template.tags.validate(&template.mesh)?;
        for name in targets.supervised.keys().chain(&targets.unsupervised) {
            if !template.tags.structures.contains_key(name) {
                return Err(EnergyError::UnknownStructure(name.clone()));
            }
        }
        let mut structures = Vec::new();
        for (name, faces) in &template.tags.structures {
            let target = match targets.supervised.get(name) {
                Some(s) => {
                    check_target(s)?;
                    Some((s.clone(), KdTree::new(&s.points)))
                }
                None if targets.unsupervised.contains(name) => None,
                None => return Err(EnergyError::MissingTarget(name.clone())),
            };
            let (sub, origin) = template.mesh.submesh(faces)?;
            structures.push(StructureTerm { origin, faces: sub.faces().to_vec(), target });
        }

        let mut base_weights = template.tags.vertex_weights.clone();
        let mut inlet = vec![false; base_weights.len()];
        for cap in template.tags.caps.iter().filter(|c| c.inlet) {
            for v in TemplateTags::vertices_of(&template.mesh, &cap.wall_faces) {
                inlet[v] = true;
            }
        }
        for (w, &is_inlet) in base_weights.iter_mut().zip(&inlet) {
            if is_inlet {
                *w *= weights.inlet_weight;
            }
        }
        let mask = (!targets.supervised.is_empty()).then(|| targets.union().bounding_box().expanded(MASK_EXPANSION));

        Ok(Self { faces: template.mesh.faces().to_vec(), tags: template.tags.clone(), structures, base_weights, mask, weights })
    }

    pub fn weights(&self) -> &LossWeights {
        &self.weights
    }

    pub fn vertex_count(&self) -> usize {
        self.base_weights.len()
    }

    /// Effective vertex weights at `vertices`: tag weight, times the inlet
    /// factor, times zero outside the expanded target bounding box.
    pub fn vertex_weights(&self, vertices: &[Vec3]) -> Vec<f64> {
        self.base_weights
            .iter()
            .zip(vertices)
            .map(|(w, v)| match &self.mask {
                Some(b) if !b.contains(v) => 0.0,
                _ => *w,
            })
            .collect()
    }

    pub fn evaluate(&self, vertices: &[Vec3]) -> Result<Evaluation> {
        if vertices.len() != self.vertex_count() {
            return Err(EnergyError::ShapeMismatch(vertices.len(), self.vertex_count()));
        }
        let mut signature = DefaultHasher::new();
        let weights = self.vertex_weights(vertices);
        for w in &weights {
            signature.write_u8((*w == 0.0) as u8);
        }

        let mut gradient = vec![Vec3::zeros(); vertices.len()];
        let (mut geometric, mut point, mut normal) = (0.0, 0.0, 0.0);
        for s in &self.structures {
            let Some((target, tree)) = &s.target else { continue };
            let local: Vec<Vec3> = s.origin.iter().map(|&v| vertices[v]).collect();
            let local_w: Vec<f64> = s.origin.iter().map(|&v| weights[v]).collect();
            let parts = consistency_parts(&local, &s.faces, target, tree, &local_w, &mut signature)?;
            let (geo, dp, dn) = geometric_mean(parts.point, parts.normal);
            for (i, &v) in s.origin.iter().enumerate() {
                gradient[v] += parts.grad_point[i] * dp + parts.grad_normal[i] * dn;
            }
            geometric += geo;
            point += parts.point;
            normal += parts.normal;
        }

        let alpha = self.weights.alpha;
        let beta = self.weights.beta;
        let (mut coplanar, mut orthogonal) = (0.0, 0.0);
        let mut wall_dots = Vec::new();
        for cap in &self.tags.caps {
            coplanar += coplanar_term(vertices, &self.faces, cap, alpha, &mut gradient)?;
            if !cap.wall_faces.is_empty() {
                orthogonal += orthogonal_term(vertices, &self.faces, cap, alpha * beta, &mut gradient, &mut wall_dots)?;
            }
        }

        Ok(Evaluation {
            value: geometric + alpha * (coplanar + beta * orthogonal),
            gradient,
            geometric,
            point,
            normal,
            coplanar,
            orthogonal,
            signature: signature.finish(),
            wall_dots,
        })
    }
}

/// Composed surface loss of `template` at its own vertex positions.
pub fn total_mesh_loss(template: &TaggedMesh, targets: &TargetSet, weights: &LossWeights) -> Result<LossValue> {
    Ok(Objective::new(template, targets, *weights)?.evaluate(template.mesh.vertices())?.loss_value())
}

/// Value and gradients of the dual-supervision objective.
#[derive(Debug, Clone)]
pub struct DualValue {
    pub value: f64,
    pub grad_s: Vec<Vec3>,
    pub grad_v: Vec<Vec3>,
}

/// `lambda1 L(S) + lambda2 L(V) + lambda3 ||S - V||^2` for a directly
/// predicted surface `S` and a handle-deformed surface `V` of one template.
pub fn dual_supervision(objective: &Objective, s: &[Vec3], v: &[Vec3]) -> Result<DualValue> {
    let w = objective.weights();
    let ls = objective.evaluate(s)?;
    let lv = objective.evaluate(v)?;
    let l2 = l2_consistency(s, v)?;
    let combine = |a: &[Vec3], b: &[Vec3], wa: f64, wb: f64| a.iter().zip(b).map(|(x, y)| x * wa + y * wb).collect();
    Ok(DualValue {
        value: w.lambda1 * ls.value + w.lambda2 * lv.value + w.lambda3 * l2.value,
        grad_s: combine(&ls.gradient, &l2.grad_s, w.lambda1, w.lambda3),
        grad_v: combine(&lv.gradient, &l2.grad_v, w.lambda2, w.lambda3),
    })
}
