//! Biharmonic handle deformation.
//!
//! A squared-Laplacian quadratic form `A` is assembled on the template, a set
//! of handle vertices is chosen by farthest-point sampling, and the linear map
//! `W = Q^T - T^T (T A T^T)^{-1} T A Q^T` is precomputed so that any handle
//! configuration `P` deforms the template as `V = W P`.

mod bhc;
mod biharmonic;
mod energy;
mod handles;
pub mod ldl;
mod transfer;

use thiserror::Error;

pub use bhc::{read_bhc, read_bhc_file, write_bhc, write_bhc_file};
pub use biharmonic::{compute_biharmonic, deform, deform_from_rest, BiharmonicMap};
pub use energy::{build_energy, EnergyKind, EnergyMatrix};
pub use handles::{farthest_point_order, sample_handles, HandleSet};
pub use transfer::{transfer_map, TransferReport};

use crate::mesh::MeshError;

#[derive(Debug, Error)]
pub enum DeformError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("invalid handle set: {0}")]
    InvalidHandles(String),
    #[error("requested {requested} handles from a mesh with {available} vertices")]
    TooManyHandles { requested: usize, available: usize },
    #[error("connected component {component} ({size} vertices, first vertex {first_vertex}) contains no handle")]
    ComponentWithoutHandle { component: usize, size: usize, first_vertex: usize },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("malformed BHC1 data: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = DeformError> = std::result::Result<T, E>;
