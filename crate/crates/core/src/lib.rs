//! Finite-scale construction of Fourier-decaying measures on sets of tight
//! Diophantine approximation order, with numerical checks of each estimate used
//! along the way.

pub mod analysis;
pub mod bump;
pub mod diophantine;
pub mod error;
pub mod grid;
pub mod layer;
pub mod numeric;
pub mod params;
pub mod periodize;
pub mod spectral;

pub use bump::{bump_grid, bump_transform, certify_decay, default_bump, widths_schedule, BumpSpec, DecayCertificate};
pub use diophantine::{estimate_exponent, QuadSurd, ThetaSpec};
pub use error::{Error, Result};
pub use grid::GridFunction;
pub use layer::{primes_in_scale, verify_regimes, LayerParams, RegimeReport, RegimeSampler, ScaleLayer};
pub use num_complex::Complex64;
pub use params::{c_of_m, derive_exponents, tau_threshold, ApproxFunction, ExponentSet, Family};
pub use periodize::{bump_on_torus, lift_check, verify_real_decay, window_transform, LiftReport, RealDecay, Window, WindowSample};
pub use spectral::{
    check_inductive_bounds, check_stability, convolve, product_measure, synthetic_stability, BoundReport,
    Coefficients, ConvolveOptions, LayerCoefficients, Lookup, MeasureOptions, Mode, ScaleSchedule, SpectralVector,
    StabilityOptions, StabilityReport, SyntheticEnvelopes, TailDescriptor,
};
pub use analysis::{dimension_report, fit_decay, normality_sum, DecayFit, DimensionReport, NormalitySum};
