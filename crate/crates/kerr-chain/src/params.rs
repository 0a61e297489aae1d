//! Physical site parameters, chain topology, and frequency grids.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Parameters of one interaction site: decay rate `gamma`, detuning `delta`
/// and cross-Kerr strength `chi`, all in angular-frequency units (the library
/// convention is units of `gamma` of the first site).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteParams {
    pub gamma: f64,
    pub delta: f64,
    pub chi: f64,
}

impl SiteParams {
    pub fn new(gamma: f64, delta: f64, chi: f64) -> Result<Self> {
        let site = Self { gamma, delta, chi };
        site.validate()?;
        Ok(site)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidGamma(self.gamma));
        }
        if !self.delta.is_finite() {
            return Err(Error::InvalidDelta(self.delta));
        }
        if !(self.chi.is_finite() && self.chi >= 0.0) {
            return Err(Error::InvalidChi(self.chi));
        }
        Ok(())
    }

    /// The complex line-response factor Gamma(omega) = gamma/2 + i(delta - omega).
    ///
    /// Its real part is always gamma/2; the single-photon transmission phase
    /// of the site is -conj(Gamma)/Gamma.
    #[inline]
    pub fn gamma_at(&self, omega: f64) -> C64 {
        C64::new(0.5 * self.gamma, self.delta - omega)
    }
}

/// Direction of the two photons through the chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Propagation {
    Co,
    Counter,
}

/// An ordered chain of interaction sites and the propagation arrangement.
///
/// Serializes as `{"propagation":"counter","sites":[{"gamma":1.0,...},...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub propagation: Propagation,
    pub sites: Vec<SiteParams>,
}

impl ChainSpec {
    pub fn new(propagation: Propagation, sites: Vec<SiteParams>) -> Result<Self> {
        let chain = Self { propagation, sites };
        chain.validate()?;
        Ok(chain)
    }

    /// A chain of `n` identical sites.
    pub fn uniform(propagation: Propagation, site: SiteParams, n: usize) -> Result<Self> {
        Self::new(propagation, vec![site; n])
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites.is_empty() {
            return Err(Error::EmptyChain);
        }
        for site in &self.sites {
            site.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// True when every site carries identical parameters.
    pub fn is_uniform(&self) -> bool {
        self.sites.windows(2).all(|w| w[0] == w[1])
    }

    /// Rescale so that `gamma` of the first site is exactly 1. Returns the
    /// rescaled chain and the original `gamma_1`, which is the frequency unit
    /// of every quantity computed from the rescaled chain.
    pub fn normalized(&self) -> (ChainSpec, f64) {
        let unit = self.sites[0].gamma;
        let sites = self
            .sites
            .iter()
            .map(|s| SiteParams {
                gamma: s.gamma / unit,
                delta: s.delta / unit,
                chi: s.chi / unit,
            })
            .collect();
        (
            ChainSpec {
                propagation: self.propagation,
                sites,
            },
            unit,
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let chain: ChainSpec = serde_json::from_str(text)?;
        chain.validate()?;
        Ok(chain)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chain serialization cannot fail")
    }
}

/// A uniform grid of angular frequencies with an odd point count, so the
/// center is itself a grid point: `omega_k = center + (k - (count-1)/2) * spacing`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub center: f64,
    pub spacing: f64,
    pub count: usize,
}

impl FrequencyGrid {
    /// Build a grid spanning `[center - half_width, center + half_width]`.
    pub fn build(center: f64, half_width: f64, count: usize) -> Result<Self> {
        if count < 3 || count % 2 == 0 {
            return Err(Error::BadGridCount(count));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::BadGridWidth(half_width));
        }
        Ok(Self {
            center,
            spacing: 2.0 * half_width / (count - 1) as f64,
            count,
        })
    }

    /// Default grid policy: centered on the detuning, half-width
    /// `max(8 sigma, 4 gamma)`, 257 points. Wide enough for both the pulse
    /// and the Lorentzian structure of the kernels.
    pub fn default_for(delta: f64, sigma: f64, gamma: f64) -> Self {
        Self::build(delta, (8.0 * sigma).max(4.0 * gamma), 257)
            .expect("default grid parameters are valid")
    }

    #[inline]
    pub fn value(&self, k: usize) -> f64 {
        self.center + (k as f64 - 0.5 * (self.count - 1) as f64) * self.spacing
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.value(k)).collect()
    }

    pub fn min(&self) -> f64 {
        self.value(0)
    }

    pub fn max(&self) -> f64 {
        self.value(self.count - 1)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.count - 1) as f64 * self.spacing
    }

    /// Fractional index of `omega` on the grid (0 at the first point).
    #[inline]
    pub fn fractional_index(&self, omega: f64) -> f64 {
        (omega - self.min()) / self.spacing
    }
}
