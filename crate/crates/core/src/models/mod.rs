//! Distribution families, latitude laws and estimators.

mod estimation;
mod family;
mod latitude;
mod rotsym;
mod samplers;

pub(crate) use estimation::euclidean_mean;
pub use estimation::{frechet_mean, frechet_mean_seeded, frechet_objective, kappa_from_resultant, vmf_kappa_mle};
pub use family::{Family, MixtureParams};
pub(crate) use latitude::q_star_unchecked;
pub use latitude::{f_star, g_kappa_cdf, g_kappa_inv, q_star, AngularDensity, LatitudeCdf, VmfLatitude};
pub use rotsym::{latitude_map, rotsym_transport};
pub use samplers::{
    sample_sine_skew, sample_tangent_vmf, sample_uniform, sample_vmf, SineSkewParams, TangentVmfParams, VmfParams,
};
