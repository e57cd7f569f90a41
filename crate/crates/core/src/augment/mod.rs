//! Shape-space data augmentation.
//!
//! Loadings of the original population are modelled with a Gaussian mixture;
//! new loadings are sampled from it, turned back into correspondences, and
//! paired with an image by thin-plate-spline warping the volume of the
//! nearest original shape.

mod generate;
pub mod gmm;
pub mod tps;
mod warp;

pub use generate::{generate_augmented, read_manifest, AugmentOptions, AugmentedSample, ManifestRecord, MANIFEST_NAME};
pub use gmm::{fit_gmm_em, nearest_original, sample_loadings, select_gmm_bic, EmOptions, GmmFit, GmmModel, SelectionReport};
pub use tps::{fit_tps, TpsTransform};
pub use warp::warp_volume;
