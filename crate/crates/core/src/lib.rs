//! Handle-based template deformation with biharmonic coordinates, template
//! fitting against oriented surface samples, simulation-readiness metrics and
//! cubic-spline motion interpolation for deforming-domain flow setups.
//!
//! The crate is organised bottom-up:
//!
//! * [`mesh`] triangle meshes, tagged templates, OBJ/JSON I/O, sampling.
//! * [`spatial`] nearest-neighbour and bounding-volume acceleration.
//! * [`deform`] squared-Laplacian energies, handle sampling, the biharmonic
//!   map `V = W P` and its transfer onto alternate templates.
//! * [`energies`] fitting losses with analytic vertex gradients.
//! * [`fitting`] coarse-to-fine optimisation of handle positions.
//! * [`quality`] accuracy and mesh-quality metrics.
//! * [`temporal`] periodic / natural cubic-spline motion interpolation.
//! * [`cli`] the `meshfit` command-line front-end.

pub mod cli;
pub mod deform;
pub mod energies;
pub mod fitting;
pub mod mesh;
pub mod quality;
pub mod spatial;
pub mod temporal;

pub use mesh::{SurfaceSamples, TaggedMesh, TemplateTags, TriangleMesh, Vec3};
