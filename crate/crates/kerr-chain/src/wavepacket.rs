//! Input joint spectral amplitudes and the scattering engine: pointwise
//! single-photon phases plus the on-energy-shell convolution of the
//! connected kernel.

use ndarray::parallel::prelude::*;
use ndarray::{Array2, Axis};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::kernels::{
    kernel_infinite_diagonal, kernel_nsite_counter, kernel_single_site, kernel_two_site_co,
    kernel_two_site_counter, kernel_vatom, single_photon_amplitude, KernelSpec, KernelVariant,
    OnShellPoint,
};
use crate::params::{ChainSpec, FrequencyGrid, SiteParams};
use crate::{Error, Result};

/// Mass a pulse may carry outside the grid before construction fails.
const OFF_GRID_MASS_LIMIT: f64 = 1e-4;

/// A single-photon spectral wave packet, L2-normalized.
#[derive(Clone, Debug)]
pub enum PulseShape {
    /// `xi(nu) = (2 pi sigma^2)^(-1/4) exp(-(nu - center)^2 / (4 sigma^2))`.
    Gaussian { center: f64, sigma: f64 },
    /// Complex samples on a grid, normalized to unit discrete L2 norm.
    Tabulated {
        grid: FrequencyGrid,
        values: Vec<C64>,
    },
}

impl PulseShape {
    pub fn gaussian(center: f64, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidSigma(sigma));
        }
        if !center.is_finite() {
            return Err(Error::InvalidDelta(center));
        }
        Ok(Self::Gaussian { center, sigma })
    }

    /// Wrap samples on a grid; the values are rescaled to unit norm.
    pub fn tabulated(grid: FrequencyGrid, mut values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.count {
            return Err(Error::TableLengthMismatch {
                expected: grid.count,
                got: values.len(),
            });
        }
        let norm_sq: f64 = values.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.spacing;
        if norm_sq <= 0.0 || !norm_sq.is_finite() {
            return Err(Error::ZeroNormPulse);
        }
        let scale = 1.0 / norm_sq.sqrt();
        for v in &mut values {
            *v *= scale;
        }
        Ok(Self::Tabulated { grid, values })
    }

    /// Amplitude at an arbitrary frequency. Tabulated pulses interpolate
    /// linearly and vanish outside their grid.
    pub fn eval(&self, nu: f64) -> C64 {
        match self {
            Self::Gaussian { center, sigma } => {
                let norm = (2.0 * PI * sigma * sigma).powf(-0.25);
                let d = nu - center;
                C64::new(norm * (-d * d / (4.0 * sigma * sigma)).exp(), 0.0)
            }
            Self::Tabulated { grid, values } => {
                let f = grid.fractional_index(nu);
                if f < 0.0 || f > (grid.count - 1) as f64 {
                    return C64::new(0.0, 0.0);
                }
                let k = (f.floor() as usize).min(grid.count - 2);
                let t = f - k as f64;
                values[k] * (1.0 - t) + values[k + 1] * t
            }
        }
    }

    /// Central frequency (exact for Gaussian, grid center for tables).
    pub fn center(&self) -> f64 {
        match self {
            Self::Gaussian { center, .. } => *center,
            Self::Tabulated { grid, .. } => grid.center,
        }
    }

    /// Discrete L2 norm squared of the pulse sampled on `grid`.
    pub fn mass_on_grid(&self, grid: &FrequencyGrid) -> f64 {
        (0..grid.count)
            .map(|k| self.eval(grid.value(k)).norm_sqr())
            .sum::<f64>()
            * grid.spacing
    }
}

/// A two-photon joint spectral amplitude psi(omega_a, omega_b) sampled on a
/// pair of frequency grids.
///
/// When the amplitude is a known product of analytic pulses, the pulse pair
/// is kept alongside the samples so on-shell evaluation is exact instead of
/// interpolated.
#[derive(Clone, Debug)]
pub struct JointAmplitude {
    grid_a: FrequencyGrid,
    grid_b: FrequencyGrid,
    values: Array2<C64>,
    analytic_input: Option<(PulseShape, PulseShape)>,
}

impl JointAmplitude {
    pub fn from_values(
        grid_a: FrequencyGrid,
        grid_b: FrequencyGrid,
        values: Array2<C64>,
    ) -> Result<Self> {
        if values.nrows() != grid_a.count || values.ncols() != grid_b.count {
            return Err(Error::ShapeMismatch(
                values.nrows(),
                values.ncols(),
                grid_a.count,
                grid_b.count,
            ));
        }
        Ok(Self {
            grid_a,
            grid_b,
            values,
            analytic_input: None,
        })
    }

    pub fn grid_a(&self) -> &FrequencyGrid {
        &self.grid_a
    }

    pub fn grid_b(&self) -> &FrequencyGrid {
        &self.grid_b
    }

    pub fn values(&self) -> &Array2<C64> {
        &self.values
    }

    pub fn analytic_input(&self) -> Option<&(PulseShape, PulseShape)> {
        self.analytic_input.as_ref()
    }

    /// Integration weight of one grid cell.
    pub fn cell_area(&self) -> f64 {
        self.grid_a.spacing * self.grid_b.spacing
    }

    /// `sum |psi|^2 dA` over the grid.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.cell_area()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn same_grids(&self, other: &Self) -> bool {
        self.grid_a == other.grid_a && self.grid_b == other.grid_b
    }

    /// Amplitude at an arbitrary point of the plane: exact for analytic
    /// inputs, bilinear with zero extension otherwise.
    pub fn eval(&self, nu_a: f64, nu_b: f64) -> C64 {
        if let Some((pa, pb)) = &self.analytic_input {
            return pa.eval(nu_a) * pb.eval(nu_b);
        }
        let fa = self.grid_a.fractional_index(nu_a);
        let fb = self.grid_b.fractional_index(nu_b);
        let (na, nb) = (self.grid_a.count, self.grid_b.count);
        if fa < 0.0 || fb < 0.0 || fa > (na - 1) as f64 || fb > (nb - 1) as f64 {
            return C64::new(0.0, 0.0);
        }
        let i = (fa.floor() as usize).min(na - 2);
        let j = (fb.floor() as usize).min(nb - 2);
        let (s, t) = (fa - i as f64, fb - j as f64);
        self.values[[i, j]] * ((1.0 - s) * (1.0 - t))
            + self.values[[i + 1, j]] * (s * (1.0 - t))
            + self.values[[i, j + 1]] * ((1.0 - s) * t)
            + self.values[[i + 1, j + 1]] * (s * t)
    }

    /// The amplitude with the photon roles exchanged: transposed samples on
    /// swapped grids.
    pub fn transposed(&self) -> Self {
        Self {
            grid_a: self.grid_b,
            grid_b: self.grid_a,
            values: self.values.t().to_owned(),
            analytic_input: self
                .analytic_input
                .as_ref()
                .map(|(a, b)| (b.clone(), a.clone())),
        }
    }

    /// Write the samples as CSV (`omega_a,omega_b,re,im`, row-major) plus a
    /// JSON sidecar (`<path>.json`) carrying the grids and the norm.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "omega_a,omega_b,re,im")?;
        for i in 0..self.grid_a.count {
            let wa = self.grid_a.value(i);
            for j in 0..self.grid_b.count {
                let v = self.values[[i, j]];
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e},{:.16e}",
                    wa,
                    self.grid_b.value(j),
                    v.re,
                    v.im
                )?;
            }
        }
        w.flush()?;
        let sidecar = serde_json::json!({
            "grid_a": self.grid_a,
            "grid_b": self.grid_b,
            "norm": self.norm(),
        });
        std::fs::write(
            sidecar_path(path),
            serde_json::to_string_pretty(&sidecar).expect("sidecar serializes"),
        )?;
        Ok(())
    }

    /// Read an amplitude back from [`JointAmplitude::export_csv`] output.
    pub fn import_csv(path: &Path) -> Result<Self> {
        let sidecar = std::fs::read_to_string(sidecar_path(path))?;
        let sidecar: serde_json::Value = serde_json::from_str(&sidecar)?;
        let grid_a: FrequencyGrid = serde_json::from_value(
            sidecar
                .get("grid_a")
                .ok_or_else(|| Error::MalformedJsaFile("sidecar lacks grid_a".into()))?
                .clone(),
        )?;
        let grid_b: FrequencyGrid = serde_json::from_value(
            sidecar
                .get("grid_b")
                .ok_or_else(|| Error::MalformedJsaFile("sidecar lacks grid_b".into()))?
                .clone(),
        )?;
        let reader = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut values = Array2::zeros((grid_a.count, grid_b.count));
        let mut seen = 0usize;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                continue; // header
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::MalformedJsaFile(format!(
                    "line {} has {} fields, expected 4",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::MalformedJsaFile(format!("line {}: {e}", lineno + 1)))
            };
            let (re, im) = (parse(fields[2])?, parse(fields[3])?);
            let i = seen / grid_b.count;
            let j = seen % grid_b.count;
            if i >= grid_a.count {
                return Err(Error::MalformedJsaFile("more rows than grid points".into()));
            }
            values[[i, j]] = C64::new(re, im);
            seen += 1;
        }
        if seen != grid_a.count * grid_b.count {
            return Err(Error::MalformedJsaFile(format!(
                "expected {} samples, got {seen}",
                grid_a.count * grid_b.count
            )));
        }
        Self::from_values(grid_a, grid_b, values)
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    std::path::PathBuf::from(s)
}

/// Build the separable amplitude `psi(omega_a, omega_b) = xi_a(omega_a) xi_b(omega_b)`.
///
/// Fails when either pulse carries more than 1e-4 of its mass outside its
/// grid, which would silently break normalization downstream.
pub fn make_separable_jsa(
    pulse_a: &PulseShape,
    pulse_b: &PulseShape,
    grid_a: FrequencyGrid,
    grid_b: FrequencyGrid,
) -> Result<JointAmplitude> {
    for (pulse, grid) in [(pulse_a, &grid_a), (pulse_b, &grid_b)] {
        let lost = (1.0 - pulse.mass_on_grid(grid)).abs();
        if lost > OFF_GRID_MASS_LIMIT {
            return Err(Error::GridTooNarrow {
                lost,
                limit: OFF_GRID_MASS_LIMIT,
            });
        }
    }
    let a: Vec<C64> = (0..grid_a.count).map(|i| pulse_a.eval(grid_a.value(i))).collect();
    let b: Vec<C64> = (0..grid_b.count).map(|j| pulse_b.eval(grid_b.value(j))).collect();
    let values = Array2::from_shape_fn((grid_a.count, grid_b.count), |(i, j)| a[i] * b[j]);
    Ok(JointAmplitude {
        grid_a,
        grid_b,
        values,
        analytic_input: Some((pulse_a.clone(), pulse_b.clone())),
    })
}

/// Apply the chain's single-photon S-matrix to a pulse: the S-matrix is
/// diagonal in frequency, so this is the pointwise unit-modulus multiplier
/// `xi'(omega) = S1(omega) xi(omega)`. Norm is preserved exactly.
pub fn scatter_single(
    pulse: &PulseShape,
    grid: &FrequencyGrid,
    chain: &ChainSpec,
) -> PulseShape {
    let values: Vec<C64> = (0..grid.count)
        .map(|k| {
            let w = grid.value(k);
            single_photon_amplitude(w, chain) * pulse.eval(w)
        })
        .collect();
    PulseShape::Tabulated {
        grid: *grid,
        values,
    }
}

/// Per-variant kernel evaluator used inside the convolution loop.
enum ShellKernel<'a> {
    Single(&'a SiteParams),
    VAtom(&'a SiteParams),
    TwoCo(&'a SiteParams, &'a SiteParams),
    TwoCounter(&'a SiteParams, &'a SiteParams),
    NCounter(&'a SiteParams, u32),
}

impl ShellKernel<'_> {
    #[inline]
    fn eval(&self, p: OnShellPoint) -> C64 {
        match self {
            Self::Single(s) => kernel_single_site(p, s),
            Self::VAtom(s) => kernel_vatom(p, s),
            Self::TwoCo(s1, s2) => kernel_two_site_co(p, s1, s2),
            Self::TwoCounter(s1, s2) => kernel_two_site_counter(p, s1, s2),
            Self::NCounter(s, n) => kernel_nsite_counter(p, s, *n),
        }
    }
}

/// Apply the full two-photon S-matrix selected by `kspec` to `jsa`.
///
/// The output at `(omega_a, omega_b)` is the disconnected part
/// `S1(omega_a) S1(omega_b) psi(omega_a, omega_b)` plus the connected part,
/// a trapezoid integral of `K(omega_a, omega_b; nu, E - nu) psi(nu, E - nu)`
/// along the energy shell `E = omega_a + omega_b`. The shell integral runs
/// over `nu` on the `grid_a` axis, restricted to points where `E - nu` also
/// lies within the padded `grid_b` support. Output rows (fixed `omega_a`)
/// are independent and processed in parallel.
///
/// For [`KernelVariant::InfiniteDiagonal`] the shell convolution collapses
/// to the pointwise diagonal factor.
pub fn scatter_two_photon(jsa: &JointAmplitude, kspec: &KernelSpec) -> Result<JointAmplitude> {
    kspec.validate()?;
    let chain = &kspec.chain;
    let ga = jsa.grid_a;
    let gb = jsa.grid_b;

    let gamma_ref = chain.sites[0].gamma;
    if ga.spacing > gamma_ref / 10.0 || gb.spacing > gamma_ref / 10.0 {
        log::warn!(
            "grid spacing ({:.3e}, {:.3e}) exceeds gamma/10 = {:.3e}; \
             the shell quadrature may be under-resolved",
            ga.spacing,
            gb.spacing,
            gamma_ref / 10.0
        );
    }

    let s1a: Vec<C64> = (0..ga.count)
        .map(|i| single_photon_amplitude(ga.value(i), chain))
        .collect();
    let s1b: Vec<C64> = (0..gb.count)
        .map(|j| single_photon_amplitude(gb.value(j), chain))
        .collect();

    if kspec.variant == KernelVariant::InfiniteDiagonal {
        let site = &chain.sites[0];
        let values = Array2::from_shape_fn((ga.count, gb.count), |(i, j)| {
            s1a[i] * s1b[j]
                * kernel_infinite_diagonal(ga.value(i), gb.value(j), site)
                * jsa.values[[i, j]]
        });
        return Ok(JointAmplitude {
            grid_a: ga,
            grid_b: gb,
            values,
            analytic_input: None,
        });
    }

    let sites = &chain.sites;
    let kernel = match kspec.variant {
        KernelVariant::SingleSite => ShellKernel::Single(&sites[0]),
        KernelVariant::VAtomLimit => ShellKernel::VAtom(&sites[0]),
        KernelVariant::TwoSiteCo => ShellKernel::TwoCo(&sites[0], &sites[1]),
        KernelVariant::TwoSiteCounter => ShellKernel::TwoCounter(&sites[0], &sites[1]),
        KernelVariant::NSiteCounter => ShellKernel::NCounter(&sites[0], sites.len() as u32),
        KernelVariant::InfiniteDiagonal => unreachable!("handled above"),
    };

    let pad = 0.5 * gb.spacing;
    let (b_lo, b_hi) = (gb.min() - pad, gb.max() + pad);
    let h = ga.spacing;

    let mut values = Array2::zeros((ga.count, gb.count));
    values
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let wa = ga.value(i);
            for j in 0..gb.count {
                let wb = gb.value(j);
                let energy = wa + wb;
                // nu range with both nu and E - nu inside the padded support.
                let lo_f = ga.fractional_index(energy - b_hi).ceil().max(0.0);
                let hi_f = ga
                    .fractional_index(energy - b_lo)
                    .floor()
                    .min((ga.count - 1) as f64);
                let mut connected = C64::new(0.0, 0.0);
                if hi_f >= lo_f {
                    let (k_lo, k_hi) = (lo_f as usize, hi_f as usize);
                    for k in k_lo..=k_hi {
                        let nu = ga.value(k);
                        let partner = energy - nu;
                        let psi = jsa.eval(nu, partner);
                        if psi == C64::new(0.0, 0.0) {
                            continue;
                        }
                        let p = OnShellPoint::new(wa, nu, partner);
                        let weight = if k == k_lo || k == k_hi { 0.5 * h } else { h };
                        connected += kernel.eval(p) * psi * weight;
                    }
                }
                row[j] = s1a[i] * s1b[j] * jsa.values[[i, j]] + connected;
            }
        });

    Ok(JointAmplitude {
        grid_a: ga,
        grid_b: gb,
        values,
        analytic_input: None,
    })
}
