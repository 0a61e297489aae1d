//! Closed-form S-matrix ingredients: single-photon transmission phases and
//! the connected (interaction) kernels of the two-photon S-matrices.
//!
//! Every connected kernel here is the smooth factor multiplying the
//! energy-conservation delta. The delta itself is never discretized:
//! kernels take an [`OnShellPoint`], which enforces
//! `omega_a + omega_b = nu_a + nu_b` structurally, and the wave-packet
//! engine integrates along that shell.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::params::{ChainSpec, Propagation, SiteParams};
use crate::{Error, Result};

/// Which closed-form kernel to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelVariant {
    SingleSite,
    VAtomLimit,
    TwoSiteCo,
    TwoSiteCounter,
    NSiteCounter,
    InfiniteDiagonal,
}

impl KernelVariant {
    /// True for the N -> infinity kernel, which multiplies the amplitude
    /// pointwise instead of entering a shell convolution.
    pub fn is_diagonal(self) -> bool {
        matches!(self, KernelVariant::InfiniteDiagonal)
    }
}

/// A kernel variant paired with the chain it acts on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub variant: KernelVariant,
    pub chain: ChainSpec,
}

impl KernelSpec {
    pub fn new(variant: KernelVariant, chain: ChainSpec) -> Result<Self> {
        let spec = Self { variant, chain };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.chain.validate()?;
        let mismatch = |requirement| Error::KernelChainMismatch {
            variant: self.variant,
            requirement,
        };
        match self.variant {
            KernelVariant::SingleSite | KernelVariant::VAtomLimit => {
                if self.chain.len() != 1 {
                    return Err(mismatch("exactly one site"));
                }
            }
            KernelVariant::TwoSiteCo => {
                if self.chain.len() != 2 || self.chain.propagation != Propagation::Co {
                    return Err(mismatch("exactly two co-propagating sites"));
                }
            }
            KernelVariant::TwoSiteCounter => {
                if self.chain.len() != 2 || self.chain.propagation != Propagation::Counter {
                    return Err(mismatch("exactly two counter-propagating sites"));
                }
            }
            KernelVariant::NSiteCounter => {
                if self.chain.propagation != Propagation::Counter {
                    return Err(mismatch("a counter-propagating chain"));
                }
                if !self.chain.is_uniform() {
                    return Err(mismatch("a uniform chain"));
                }
            }
            KernelVariant::InfiniteDiagonal => {
                if !self.chain.is_uniform() {
                    return Err(mismatch("a uniform chain"));
                }
            }
        }
        Ok(())
    }
}

/// Four frequencies constrained to the energy shell
/// `omega_a + omega_b = nu_a + nu_b`.
///
/// Constructed from `(omega_a, nu_a, nu_b)`; `omega_b` is derived, so the
/// shell constraint holds to machine precision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OnShellPoint {
    pub omega_a: f64,
    pub omega_b: f64,
    pub nu_a: f64,
    pub nu_b: f64,
}

impl OnShellPoint {
    pub fn new(omega_a: f64, nu_a: f64, nu_b: f64) -> Self {
        Self {
            omega_a,
            omega_b: nu_a + nu_b - omega_a,
            nu_a,
            nu_b,
        }
    }

    /// The point with the roles of the two photons exchanged:
    /// `(omega_a, nu_a) <-> (omega_b, nu_b)`.
    pub fn exchanged(&self) -> Self {
        Self {
            omega_a: self.omega_b,
            omega_b: self.omega_a,
            nu_a: self.nu_b,
            nu_b: self.nu_a,
        }
    }
}

/// The interaction prefactor `(1 + 2 i chi / sum_gamma)^-1` shared by the
/// single-site and N-site kernels; `sum_gamma` is `Gamma + Gamma` of the
/// pair of frequencies fixing the total energy.
#[inline]
fn interaction_prefactor(chi: f64, sum_gamma: C64) -> C64 {
    let one = C64::new(1.0, 0.0);
    one / (one + C64::new(0.0, 2.0 * chi) / sum_gamma)
}

/// Single-photon transmission amplitude of the whole chain:
/// the product of `-conj(Gamma_i(omega)) / Gamma_i(omega)` over sites.
/// Unit modulus for every real frequency.
pub fn single_photon_amplitude(omega: f64, chain: &ChainSpec) -> C64 {
    chain.sites.iter().fold(C64::new(1.0, 0.0), |acc, site| {
        let g = site.gamma_at(omega);
        acc * (-g.conj() / g)
    })
}

/// Connected kernel of the single-site two-photon S-matrix:
/// `-(i chi gamma^2 / pi) (1 + 2 i chi / (Gamma(omega_a) + Gamma(omega_b)))^-1
///   / (Gamma(nu_b) Gamma(nu_a) Gamma(omega_b) Gamma(omega_a))`.
pub fn kernel_single_site(p: OnShellPoint, site: &SiteParams) -> C64 {
    let ga = site.gamma_at(p.omega_a);
    let gb = site.gamma_at(p.omega_b);
    let pref = interaction_prefactor(site.chi, ga + gb);
    let denom = site.gamma_at(p.nu_b) * site.gamma_at(p.nu_a) * gb * ga;
    C64::new(0.0, -site.chi * site.gamma * site.gamma / PI) * pref / denom
}

/// Connected kernel in the chi -> infinity limit, where the site reduces to
/// a V-configuration three-level atom:
/// `-(gamma^2 / 2 pi) [1/Gamma(omega_a) + 1/Gamma(omega_b)]
///   / (Gamma(nu_b) Gamma(nu_a))`. Independent of chi.
pub fn kernel_vatom(p: OnShellPoint, site: &SiteParams) -> C64 {
    let one = C64::new(1.0, 0.0);
    let sum_inv = one / site.gamma_at(p.omega_a) + one / site.gamma_at(p.omega_b);
    let denom = site.gamma_at(p.nu_b) * site.gamma_at(p.nu_a);
    C64::new(-site.gamma * site.gamma / (2.0 * PI), 0.0) * sum_inv / denom
}

/// Ratio `conj(Gamma(x)) conj(Gamma(y)) / (Gamma(x) Gamma(y))` for one site:
/// the unit-modulus dressing phase picked up by a photon pair that merely
/// transits the site at frequencies `x` and `y`.
#[inline]
fn dressing_phase(site: &SiteParams, x: f64, y: f64) -> C64 {
    let gx = site.gamma_at(x);
    let gy = site.gamma_at(y);
    (gx.conj() * gy.conj()) / (gx * gy)
}

/// Connected kernel for two co-propagating sites: the chi_1-only channel
/// dressed by site-2 phases, the chi_2-only channel dressed by site-1
/// phases, and the double-interaction channel proportional to chi_1 chi_2.
pub fn kernel_two_site_co(p: OnShellPoint, s1: &SiteParams, s2: &SiteParams) -> C64 {
    let g1wa = s1.gamma_at(p.omega_a);
    let g1wb = s1.gamma_at(p.omega_b);
    let g2wa = s2.gamma_at(p.omega_a);
    let g2wb = s2.gamma_at(p.omega_b);
    let b1 = interaction_prefactor(s1.chi, g1wa + g1wb);
    let b2 = interaction_prefactor(s2.chi, g2wa + g2wb);

    let term1 = C64::new(0.0, 1.0)
        * dressing_phase(s2, p.omega_a, p.omega_b)
        * b1
        * (s1.chi * s1.gamma * s1.gamma)
        / (s1.gamma_at(p.nu_b) * s1.gamma_at(p.nu_a) * g1wb * g1wa);
    let term2 = C64::new(0.0, 1.0)
        * dressing_phase(s1, p.nu_a, p.nu_b)
        * b2
        * (s2.chi * s2.gamma * s2.gamma)
        / (s2.gamma_at(p.nu_b) * s2.gamma_at(p.nu_a) * g2wb * g2wa);
    let term3 = b1 * b2
        * (4.0 * s1.chi * s2.chi * s1.gamma * s1.gamma * s2.gamma * s2.gamma)
        / (s1.gamma_at(p.nu_b) * s1.gamma_at(p.nu_a) * g2wb * g2wa)
        / ((g1wa + g1wb) * (g1wa + g2wb) * (g2wa + g2wb));

    -(term1 + term2 + term3) / PI
}

/// Connected kernel for two counter-propagating sites. Causality removes
/// the double-interaction channel, and the dressing phases pair
/// `(omega_a, nu_b)` at site 2 and `(nu_a, omega_b)` at site 1.
pub fn kernel_two_site_counter(p: OnShellPoint, s1: &SiteParams, s2: &SiteParams) -> C64 {
    let g1wa = s1.gamma_at(p.omega_a);
    let g1wb = s1.gamma_at(p.omega_b);
    let g2wa = s2.gamma_at(p.omega_a);
    let g2wb = s2.gamma_at(p.omega_b);
    let b1 = interaction_prefactor(s1.chi, g1wa + g1wb);
    let b2 = interaction_prefactor(s2.chi, g2wa + g2wb);

    let term1 = C64::new(0.0, 1.0)
        * dressing_phase(s2, p.omega_a, p.nu_b)
        * b1
        * (s1.chi * s1.gamma * s1.gamma)
        / (s1.gamma_at(p.nu_b) * s1.gamma_at(p.nu_a) * g1wb * g1wa);
    let term2 = C64::new(0.0, 1.0)
        * dressing_phase(s1, p.nu_a, p.omega_b)
        * b2
        * (s2.chi * s2.gamma * s2.gamma)
        / (s2.gamma_at(p.nu_b) * s2.gamma_at(p.nu_a) * g2wb * g2wa);

    -(term1 + term2) / PI
}

/// How far the direct summation in [`geometric_phase_sum`] goes before
/// switching to the closed form.
const DIRECT_SUM_MAX: u32 = 4096;

/// `sum_{j=1}^{n} x^(n-j) y^(j-1) = (x^n - y^n) / (x - y)`, evaluated
/// stably: direct summation for `n <= 4096`, and for larger `n` the closed
/// form, replaced by a series expansion when `|x - y| < 1e-8` to avoid the
/// cancellation near `x = y`.
pub fn geometric_phase_sum(x: C64, y: C64, n: u32) -> C64 {
    assert!(n >= 1, "geometric_phase_sum needs n >= 1");
    if n <= DIRECT_SUM_MAX {
        // Horner recurrence S_{k+1} = x S_k + y^k.
        let mut acc = C64::new(1.0, 0.0);
        let mut ypow = C64::new(1.0, 0.0);
        for _ in 1..n {
            ypow *= y;
            acc = acc * x + ypow;
        }
        return acc;
    }
    if (x - y).norm() < 1e-8 {
        // S = x^(n-1) [n + C(n,2) eps + C(n,3) eps^2 + ...], eps = (y-x)/x.
        let eps = (y - x) / x;
        let mut term = C64::new(n as f64, 0.0);
        let mut acc = term;
        for k in 1..64u32 {
            let ratio = (n as f64 - k as f64) / (k as f64 + 1.0);
            term *= eps * ratio;
            acc += term;
            if term.norm() < 1e-17 * acc.norm() {
                break;
            }
        }
        x.powu(n - 1) * acc
    } else {
        (x.powu(n) - y.powu(n)) / (x - y)
    }
}

/// Connected kernel for `n` identical counter-propagating sites: the
/// single-site prefactor (written with the total-energy form
/// `Gamma(nu_b) + Gamma(nu_a)`) times the geometric sum of the two dressing
/// phases over the site where the interaction happens.
pub fn kernel_nsite_counter(p: OnShellPoint, site: &SiteParams, n: u32) -> C64 {
    let gna = site.gamma_at(p.nu_a);
    let gnb = site.gamma_at(p.nu_b);
    let gwa = site.gamma_at(p.omega_a);
    let gwb = site.gamma_at(p.omega_b);
    let pref = C64::new(0.0, -site.chi * site.gamma * site.gamma / PI)
        * interaction_prefactor(site.chi, gnb + gna)
        / (gnb * gna * gwb * gwa);
    let x = (gwa.conj() * gnb.conj()) / (gwa * gnb);
    let y = (gwb.conj() * gna.conj()) / (gwb * gna);
    pref * geometric_phase_sum(x, y, n)
}

/// Diagonal factor of the N -> infinity counter-propagating S-matrix,
/// evaluated at `nu_a = omega_a`, `nu_b = omega_b`:
/// `1 - (i chi gamma^3 / 4) (1 + 2 i chi / (Gamma(omega_a) + Gamma(omega_b)))^-1
///    / |Gamma(omega_b) Gamma(omega_a)|^2`.
///
/// Momentum plus energy conservation make the limiting S-matrix diagonal,
/// so this multiplies the amplitude pointwise. On resonance it reduces to
/// [`onres_phase`].
pub fn kernel_infinite_diagonal(omega_a: f64, omega_b: f64, site: &SiteParams) -> C64 {
    let gwa = site.gamma_at(omega_a);
    let gwb = site.gamma_at(omega_b);
    let mag2 = (gwb * gwa).norm_sqr();
    C64::new(1.0, 0.0)
        - C64::new(0.0, site.chi * site.gamma.powi(3) / 4.0)
            * interaction_prefactor(site.chi, gwa + gwb)
            / mag2
}

/// Narrowband on-resonance conditional phase
/// `(gamma - 2 i chi) / (gamma + 2 i chi) = exp(-2 i atan(2 chi / gamma))`.
pub fn onres_phase(chi: f64, gamma: f64) -> C64 {
    C64::new(gamma, -2.0 * chi) / C64::new(gamma, 2.0 * chi)
}

/// Evaluate the connected kernel selected by `spec` at an on-shell point.
///
/// For [`KernelVariant::InfiniteDiagonal`] the returned value is the
/// pointwise diagonal factor at `(omega_a, omega_b)`; it multiplies the
/// amplitude instead of entering a convolution.
pub fn connected_kernel(spec: &KernelSpec, p: OnShellPoint) -> C64 {
    let sites = &spec.chain.sites;
    match spec.variant {
        KernelVariant::SingleSite => kernel_single_site(p, &sites[0]),
        KernelVariant::VAtomLimit => kernel_vatom(p, &sites[0]),
        KernelVariant::TwoSiteCo => kernel_two_site_co(p, &sites[0], &sites[1]),
        KernelVariant::TwoSiteCounter => kernel_two_site_counter(p, &sites[0], &sites[1]),
        KernelVariant::NSiteCounter => {
            kernel_nsite_counter(p, &sites[0], sites.len() as u32)
        }
        KernelVariant::InfiniteDiagonal => {
            kernel_infinite_diagonal(p.omega_a, p.omega_b, &sites[0])
        }
    }
}
