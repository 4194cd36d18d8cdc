//! Bivariate copulas: the disk model, its max-mixture extension and the Gaussian and
//! Student-t reference copulas.

pub mod disk;
pub mod kernel;
pub mod mixture;
pub mod models;
pub mod reference;
pub mod wedge;

pub use disk::{
    copula_cdf, copula_partials, copula_pdf, marshall_olkin, CopulaPoint, DiskCopula, DEFAULT_ORDER,
};
pub use kernel::DiskKernel;
pub use mixture::{CompanionPair, MixtureCopula, MixtureMarginal, MixtureParams, MixturePoint};
pub use models::{Family, ModelParams, PairCopula};
pub use reference::{
    reference_copula_cdf, reference_copula_ln_pdf, reference_copula_pdf, ReferenceFamily,
};
