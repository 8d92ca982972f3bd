//! Homodyne tomography: data handling, filtered back-projection, maximum
//! likelihood reconstruction and Wigner evaluation.

mod dataset;
mod mle;
mod quad;
mod radon;
mod wigner;

pub use dataset::{fit_gaussian, GaussianEstimate, HomodyneDataset, PhaseRecord};
pub use mle::{
    mle_reconstruct, wigner_from_density, DensityMatrix, MleInput, MleOptions, MleResult,
    MleStatus, DEFAULT_BIN_WIDTH, DEFAULT_ITERATIONS, DEFAULT_MLE_N_MAX,
};
pub use radon::{
    fit_squeezed_gaussian, radon_kernel, reconstruct_wigner, reconstruct_wigner_binned, SqueezeFit,
    DEFAULT_KC,
};
pub use wigner::{GridSpec, WignerGrid};
