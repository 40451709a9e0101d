//! Radially symmetric densities, their information functionals, the
//! rescaled self-convolution and executable certificates for entropy and
//! Fisher-information jump inequalities.

pub mod bounds;
pub mod convolve;
pub mod error;
pub mod experiment;
pub mod functionals;
pub mod landau;
pub mod quadrature;
pub mod radial;
pub mod regularity;
pub mod special;

pub use bounds::{BoundCertificate, CertificateName, Certifier};
pub use convolve::{mollify, ou_evolve, self_convolve_rescaled, ConvolutionResult};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, RunReport};
pub use functionals::{w2_radial_to_chi, FunctionalReport, W2Report};
pub use landau::{landau_production, landau_production_mc, LandauEstimate};
pub use quadrature::{Estimate, Precision, QuadratureSettings};
pub use radial::{GaussianMixtureSpec, ProfileLiteral, RadialProfile};
pub use regularity::{construct_approx_r, estimate_c, RadiusLaw, RegularityEstimate};
