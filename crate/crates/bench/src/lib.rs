//! Benchmark fixtures shared by the criterion targets.

use radjump_core::{GaussianMixtureSpec, QuadratureSettings, RadialProfile};

/// Two-component mixture with unit mean variance.
pub fn mixture(dim: usize) -> RadialProfile {
    let spec = GaussianMixtureSpec::new(vec![0.5, 0.5], vec![0.5, 1.5]).expect("valid mixture");
    RadialProfile::from_spec(dim, spec, QuadratureSettings::default()).expect("valid profile")
}

/// Tabulated Gaussian on a uniform grid.
pub fn tabulated(dim: usize) -> RadialProfile {
    let r: Vec<f64> = (0..400).map(|i| 12.0 * i as f64 / 399.0).collect();
    let phi = r.iter().map(|x| (-0.5 * x * x).exp()).collect();
    RadialProfile::tabulated(dim, r, phi).expect("valid profile")
}
