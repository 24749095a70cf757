use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::manifest::{manifest_path, ManifestBuilder};
use super::plot::line_plot_svg;
use super::*;
use crate::deform::{
    build_energy, compute_biharmonic, deform_from_rest, read_bhc_file, sample_handles, transfer_map, write_bhc,
};
use crate::energies::{LossWeights, TargetSet};
use crate::fitting::{fit_handles, FitConfig};
use crate::mesh::{load_tagged_mesh, read_obj, to_obj_string, TaggedMesh, TemplateTags, TriangleMesh, Vec3};
use crate::quality::{quality_report, ReportOptions};
use crate::temporal::{build_motion_spline, read_sequence, sample_motion, volume_csv, volume_trace, write_sequence};

type Result<T, E = CliError> = std::result::Result<T, E>;

pub(super) fn dispatch(cli: &Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Precompute(a) => precompute(a, seed),
        Command::Fit(a) => fit(a, cli.seed),
        Command::Evaluate(a) => evaluate(a, seed),
        Command::Interpolate(a) => interpolate(a, seed),
        Command::Deform(a) => deform(a, seed),
        Command::SampleHandles(a) => sample(a, seed),
        Command::Transfer(a) => transfer(a, seed),
    }
}

/// First farthest-point handle drawn from `seed`, as the fitting loop does
/// for its first block.
pub(crate) fn seeded_start(seed: u64, vertex_count: usize) -> usize {
    ChaCha8Rng::seed_from_u64(seed).gen_range(0..vertex_count.max(1))
}

fn load_tagged(mesh: &Path, tags: Option<&Path>) -> Result<TaggedMesh> {
    Ok(match tags {
        Some(t) => load_tagged_mesh(mesh, t)?,
        None => {
            let mesh = read_obj(mesh)?;
            let tags = TemplateTags::whole(&mesh, "surface");
            TaggedMesh::new(mesh, tags)?
        }
    })
}

fn resolve_start(start: Option<usize>, seed: u64, n: usize) -> Result<usize> {
    match start {
        Some(s) if s >= n => Err(CliError::Validation(format!("--start {s} out of range for {n} vertices"))),
        Some(s) => Ok(s),
        None => Ok(seeded_start(seed, n)),
    }
}

fn precompute(a: &PrecomputeArgs, seed: u64) -> Result<()> {
    let mut inputs = vec![a.mesh.as_path()];
    inputs.extend(a.tags.as_deref());
    let mut manifest = ManifestBuilder::new("precompute", seed, &inputs);
    let mesh = load_tagged(&a.mesh, a.tags.as_deref())?.mesh;
    let start = resolve_start(a.start, seed, mesh.vertex_count())?;
    let handles = sample_handles(&mesh, a.handles_count, start)?;
    let energy = build_energy(&mesh, a.energy)?;
    let map = compute_biharmonic(&energy, &handles)?;
    log::info!("map {}x{} with {} nonzeros", map.vertex_count(), map.handle_count(), map.nnz());
    manifest.write(&a.out, write_bhc(&map))?;
    let config = json!({
        "handles_count": a.handles_count,
        "energy": a.energy,
        "start": start,
        "nnz": map.nnz(),
        "interpolation_error": map.interpolation_error(),
        "row_sum_error": map.row_sum_error(),
    });
    manifest.finish(&manifest_path(&a.out), config)?;
    Ok(())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    fit: FitConfig,
    loss: LossWeights,
}

fn fit_config(a: &FitArgs, seed: Option<u64>) -> Result<FitConfig> {
    let file = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            toml::from_str::<RunConfig>(&text).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    let mut c = file.fit;
    c.loss = file.loss;
    if let Some(v) = &a.schedule {
        c.schedule = v.clone();
    }
    c.iters_per_block = a.iters_per_block.unwrap_or(c.iters_per_block);
    c.step_size = a.step_size.unwrap_or(c.step_size);
    c.optimizer = a.optimizer.unwrap_or(c.optimizer);
    c.energy = a.energy.unwrap_or(c.energy);
    c.map_update = a.map_update.unwrap_or(c.map_update);
    c.samples = a.samples.unwrap_or(c.samples);
    c.seed = seed.unwrap_or(c.seed);
    c.loss.alpha = a.alpha.unwrap_or(c.loss.alpha);
    c.loss.beta = a.beta.unwrap_or(c.loss.beta);
    c.loss.inlet_weight = a.inlet_weight.unwrap_or(c.loss.inlet_weight);
    Ok(c)
}

/// Structure tags for the target surface.
fn target_tags(template: &TaggedMesh, target: TriangleMesh, tags: Option<&Path>) -> Result<TaggedMesh> {
    if let Some(p) = tags {
        let tags = TemplateTags::read(p, target.vertex_count())?;
        return Ok(TaggedMesh::new(target, tags)?);
    }
    if target.face_count() == template.mesh.face_count() {
        let mut tags = template.tags.clone();
        tags.vertex_weights = vec![1.0; target.vertex_count()];
        return Ok(TaggedMesh::new(target, tags)?);
    }
    match template.tags.structures.keys().collect::<Vec<_>>().as_slice() {
        [only] => {
            let tags = TemplateTags::whole(&target, only);
            Ok(TaggedMesh::new(target, tags)?)
        }
        _ => Err(CliError::Validation(
            "target connectivity differs from the template and the template has several structures; pass --target-tags".into(),
        )),
    }
}

#[derive(Serialize)]
struct BlockSummary {
    handles: usize,
    best_loss: f64,
}

fn fit(a: &FitArgs, seed: Option<u64>) -> Result<()> {
    let mut inputs = vec![a.template.as_path(), a.tags.as_path(), a.target.as_path()];
    inputs.extend(a.target_tags.as_deref());
    inputs.extend(a.config.as_deref());
    let config = fit_config(a, seed)?;
    let mut manifest = ManifestBuilder::new("fit", config.seed, &inputs);
    let template = load_tagged_mesh(&a.template, &a.tags)?;
    let target = target_tags(&template, read_obj(&a.target)?, a.target_tags.as_deref())?;
    config.validate(template.mesh.vertex_count())?;
    let targets = match a.target_points {
        TargetPoints::Surface => TargetSet::sample_structures(&target, config.samples, config.seed)?,
        TargetPoints::Vertices => TargetSet::vertex_structures(&target)?,
    };
    let energy = build_energy(&template.mesh, config.energy)?;
    let result = fit_handles(&template, &energy, &targets, &config)?;

    let dir = &a.out_dir;
    for (b, block) in result.blocks.iter().enumerate() {
        let mesh = template.mesh.with_vertices(block.vertices.clone())?;
        manifest.write(&dir.join(format!("block_{b}.obj")), to_obj_string(&mesh))?;
    }
    let fitted = template.with_vertices(result.final_vertices.clone())?;
    manifest.write(&dir.join("fitted.obj"), to_obj_string(&fitted.mesh))?;
    manifest.write(&dir.join("loss.csv"), result.trace_csv())?;
    let options = ReportOptions { seed: config.seed, spacing: a.spacing, centroid_cwo: true, ..Default::default() };
    let report = quality_report(&fitted, Some(&target.mesh), &options)?;
    manifest.write(&dir.join("quality.json"), report.to_json() + "\n")?;
    let summary = json!({
        "initial_loss": result.initial_loss,
        "final_loss": result.final_loss,
        "diagonal": template.mesh.bounding_box().diagonal(),
        "metrics_before": result.metrics_before,
        "metrics_after": result.metrics_after,
        "blocks": result.blocks.iter().map(|b| BlockSummary { handles: b.handles.len(), best_loss: b.best_loss }).collect::<Vec<_>>(),
    });
    manifest.write(&dir.join("summary.json"), serde_json::to_string_pretty(&summary).expect("summary serialises") + "\n")?;
    if a.plot {
        let points: Vec<(f64, f64)> = result.loss_trace.iter().map(|r| (r.iter as f64, r.loss)).collect();
        manifest.write(&dir.join("loss.svg"), line_plot_svg("fitting loss", "iteration", "loss", &points, true))?;
    }
    let resolved = json!({ "fit": config, "loss": config.loss, "spacing": a.spacing, "target_points": a.target_points });
    manifest.finish(&dir.join("manifest.json"), resolved)?;
    Ok(())
}

fn evaluate(a: &EvaluateArgs, seed: u64) -> Result<()> {
    let mut inputs = vec![a.mesh.as_path()];
    inputs.extend(a.tags.as_deref());
    inputs.extend(a.reference.as_deref());
    let mut manifest = ManifestBuilder::new("evaluate", seed, &inputs);
    let mesh = load_tagged(&a.mesh, a.tags.as_deref())?;
    let reference = a.reference.as_deref().map(read_obj).transpose()?;
    if a.spacing.is_some() && reference.is_none() {
        return Err(CliError::Validation("--spacing needs --reference".into()));
    }
    let options = ReportOptions { samples: a.samples, seed, spacing: a.spacing, centroid_cwo: a.centroid_cwo };
    let report = quality_report(&mesh, reference.as_ref(), &options)?;
    manifest.write(&a.out, report.to_json() + "\n")?;
    let config = json!({ "samples": a.samples, "spacing": a.spacing, "centroid_cwo": a.centroid_cwo });
    manifest.finish(&manifest_path(&a.out), config)?;
    Ok(())
}

fn interpolate(a: &InterpolateArgs, seed: u64) -> Result<()> {
    let mut inputs = vec![a.frames_dir.as_path()];
    inputs.extend(a.tags.as_deref());
    let mut manifest = ManifestBuilder::new("interpolate", seed, &inputs);
    let seq = read_sequence(&a.frames_dir)?;
    let spline = build_motion_spline(&seq, a.kind)?;
    let sampled = sample_motion(&spline, a.dt)?;
    for path in write_sequence(&a.out_dir, &sampled)? {
        manifest.output(&path);
    }
    let structure = match (&a.tags, &a.structure) {
        (Some(tags), Some(name)) => {
            let tags = TemplateTags::read(tags, seq.vertex_count())?;
            let faces = tags
                .structures
                .get(name)
                .ok_or_else(|| CliError::Validation(format!("no structure `{name}` in the tags")))?;
            Some(faces.clone())
        }
        _ => None,
    };
    let closed = seq.mesh(0)?.is_closed() && !seq.faces.is_empty();
    let trace = match &structure {
        Some(faces) => Some(volume_trace(&sampled, Some(faces))?),
        None if closed => Some(volume_trace(&sampled, None)?),
        None => {
            log::warn!("frames are not closed; skipping the volume trace");
            None
        }
    };
    if let Some(trace) = &trace {
        manifest.write(&a.out_dir.join("volume.csv"), volume_csv(trace))?;
        if a.plot {
            manifest.write(&a.out_dir.join("volume.svg"), line_plot_svg("enclosed volume", "t (s)", "volume (mm^3)", trace, false))?;
        }
    }
    let config = json!({
        "dt": a.dt,
        "kind": spline.kind(),
        "period": spline.period(),
        "frames": sampled.frames.len(),
        "structure": a.structure,
    });
    manifest.finish(&a.out_dir.join("manifest.json"), config)?;
    Ok(())
}

/// Handle indices with their target positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandlesFile {
    pub indices: Vec<usize>,
    pub positions: Vec<[f64; 3]>,
}

impl HandlesFile {
    pub fn from_mesh(mesh: &TriangleMesh, indices: &[usize]) -> Self {
        let positions = indices.iter().map(|&i| mesh.vertices()[i].into()).collect();
        Self { indices: indices.to_vec(), positions }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let file: Self = serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        if file.indices.len() != file.positions.len() {
            return Err(CliError::Validation(format!(
                "{}: {} indices but {} positions",
                path.display(),
                file.indices.len(),
                file.positions.len()
            )));
        }
        Ok(file)
    }
}

fn deform(a: &DeformArgs, seed: u64) -> Result<()> {
    let mut inputs = vec![a.map.as_path(), a.template.as_path(), a.handles.as_path()];
    inputs.extend(a.rest.as_deref());
    let mut manifest = ManifestBuilder::new("deform", seed, &inputs);
    let map = read_bhc_file(&a.map)?;
    let template = read_obj(&a.template)?;
    let rest = match &a.rest {
        Some(p) => read_obj(p)?,
        None => template.clone(),
    };
    let handles = HandlesFile::read(&a.handles)?;
    if handles.indices != map.handles().indices() {
        return Err(CliError::Validation("handle indices differ from the ones stored in the map".into()));
    }
    if let Some(&i) = map.handles().indices().iter().find(|&&i| i >= rest.vertex_count()) {
        return Err(CliError::Validation(format!("handle {i} out of range for the rest surface")));
    }
    let rest_handles = map.handles().gather(rest.vertices());
    let positions: Vec<Vec3> = handles.positions.iter().map(|&p| p.into()).collect();
    let vertices = deform_from_rest(&map, template.vertices(), &rest_handles, &positions)?;
    manifest.write(&a.out, to_obj_string(&template.with_vertices(vertices)?))?;
    manifest.finish(&manifest_path(&a.out), json!({ "handles": map.handle_count() }))?;
    Ok(())
}

fn sample(a: &SampleHandlesArgs, seed: u64) -> Result<()> {
    let mut manifest = ManifestBuilder::new("sample-handles", seed, &[a.mesh.as_path()]);
    let mesh = read_obj(&a.mesh)?;
    let start = resolve_start(a.start, seed, mesh.vertex_count())?;
    let handles = sample_handles(&mesh, a.count, start)?;
    let file = HandlesFile::from_mesh(&mesh, handles.indices());
    manifest.write(&a.out, serde_json::to_string_pretty(&file).expect("handles serialise") + "\n")?;
    manifest.finish(&manifest_path(&a.out), json!({ "count": a.count, "start": start }))?;
    Ok(())
}

fn transfer(a: &TransferArgs, seed: u64) -> Result<()> {
    let mut manifest = ManifestBuilder::new("transfer", seed, &[a.map.as_path(), a.source.as_path(), a.target.as_path()]);
    let map = read_bhc_file(&a.map)?;
    let source = read_obj(&a.source)?;
    let target = read_obj(&a.target)?;
    let report = transfer_map(&map, &source, &target)?;
    manifest.write(&a.out, write_bhc(&report.map))?;
    let config = json!({
        "max_distance": report.max_distance,
        "diagonal": report.diagonal,
        "far_vertices": report.far_vertices,
        "row_sum_error": report.map.row_sum_error(),
    });
    manifest.finish(&manifest_path(&a.out), config)?;
    Ok(())
}
