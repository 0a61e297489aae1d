//! One- and two-photon transport through chains of cross-Kerr interaction
//! sites.
//!
//! The library evaluates the closed-form S-matrices for photons co- or
//! counter-propagating through a chain of two-atom Kerr sites, applies them
//! to two-photon joint spectral amplitudes, and quantifies the spectral
//! entanglement and CPHASE quality of the scattered state. An SLH-algebra
//! core regenerates the cascaded equations of motion mechanically, and a
//! quadrature/Fredholm oracle verifies the closed forms through an
//! independent numerical route.
//!
//! Modules:
//! - [`params`]: site parameters, chain topology, frequency grids.
//! - [`kernels`]: single-photon phases and connected two-photon kernels.
//! - [`wavepacket`]: pulse shapes, joint amplitudes, and the scattering
//!   engine (pointwise phases plus the on-shell convolution).
//! - [`analysis`]: Schmidt decomposition, overlaps, CPHASE fidelity, sweeps.
//! - [`slh`]: dense SLH composition and Langevin coefficients.
//! - [`oracle`]: quadrature checks and a Fredholm solver independent of the
//!   closed forms.
//!
//! All frequencies are understood in units of the decay rate of the first
//! site (`gamma` of site 1 = 1); the physics depends only on the ratios
//! chi/gamma, (omega - delta)/gamma and sigma/gamma.

pub mod analysis;
pub mod kernels;
pub mod oracle;
pub mod params;
pub mod slh;
pub mod wavepacket;

pub use analysis::{
    cphase_fidelity, cphase_overlap, fidelity_from_overlap, fidelity_sweep, overlap,
    schmidt_decompose, SchmidtReport, SweepRow, SweepTemplate,
};
pub use kernels::{
    geometric_phase_sum, kernel_infinite_diagonal, kernel_nsite_counter, kernel_single_site,
    kernel_two_site_co, kernel_two_site_counter, kernel_vatom, onres_phase,
    single_photon_amplitude, KernelSpec, KernelVariant, OnShellPoint,
};
pub use params::{ChainSpec, FrequencyGrid, Propagation, SiteParams};
pub use wavepacket::{
    make_separable_jsa, scatter_single, scatter_two_photon, JointAmplitude, PulseShape,
};

/// Errors shared by all modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("gamma must be positive and finite, got {0}")]
    InvalidGamma(f64),
    #[error("delta must be finite, got {0}")]
    InvalidDelta(f64),
    #[error("chi must be nonnegative and finite, got {0}")]
    InvalidChi(f64),
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("a chain needs at least one site")]
    EmptyChain,
    #[error("frequency grid needs an odd point count >= 3, got {0}")]
    BadGridCount(usize),
    #[error("grid half-width must be positive and finite, got {0}")]
    BadGridWidth(f64),
    #[error("kernel {variant:?} requires {requirement}")]
    KernelChainMismatch {
        variant: kernels::KernelVariant,
        requirement: &'static str,
    },
    #[error("pulse mass off the grid is {lost:.3e} (limit {limit:.1e}); widen the grid")]
    GridTooNarrow { lost: f64, limit: f64 },
    #[error("operand grids differ")]
    GridMismatch,
    #[error("tabulated pulse needs one value per grid point ({expected}, got {got})")]
    TableLengthMismatch { expected: usize, got: usize },
    #[error("tabulated pulse has zero norm")]
    ZeroNormPulse,
    #[error("value matrix shape ({0}, {1}) does not match the grids ({2}, {3})")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("operator dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("series product needs single-mode operands, got {0} and {1} modes")]
    ModeMismatch(usize, usize),
    #[error("dense SLH representation is capped at {max} sites, got {got}")]
    ChainTooLarge { max: usize, got: usize },
    #[error("site index {index} out of range for {n_total} sites")]
    SiteIndexOutOfRange { index: usize, n_total: usize },
    #[error("quadrature needs an odd point count >= 101, got {0}")]
    BadQuadraturePoints(usize),
    #[error("sweep ranges must be nonempty")]
    EmptySweep,
    #[error("linear solve failed on the shell E = {energy}")]
    SingularShellSystem { energy: f64 },
    #[error("malformed JSA file: {0}")]
    MalformedJsaFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
