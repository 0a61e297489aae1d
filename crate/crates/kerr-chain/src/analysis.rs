//! Quantifying the scattered state: Schmidt decomposition, spectral
//! entanglement, conditional-phase maps, and CPHASE fidelity sweeps.

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::kernels::{single_photon_amplitude, KernelSpec, KernelVariant};
use crate::params::{ChainSpec, FrequencyGrid, Propagation, SiteParams};
use crate::wavepacket::{make_separable_jsa, scatter_two_photon, JointAmplitude, PulseShape};
use crate::{Error, Result};

/// Singular values below this fraction of the largest one are treated as
/// quadrature noise and discarded.
const SVD_RELATIVE_FLOOR: f64 = 1e-12;

/// Amplitudes below this fraction of the reference maximum produce NaN in
/// the conditional phase map.
const PHASE_MAP_THRESHOLD: f64 = 1e-3;

/// Schmidt spectrum of a joint amplitude and the derived entanglement
/// measures.
#[derive(Clone, Debug)]
pub struct SchmidtReport {
    /// Descending singular values of the cell-weighted amplitude matrix;
    /// their squares sum to the squared norm of the state.
    pub singular_values: Vec<f64>,
    /// Entanglement entropy `-sum p_k log2 p_k` with `p_k` the normalized
    /// squared singular values.
    pub entropy: f64,
    /// Schmidt number `K = 1 / sum p_k^2`, the effective number of
    /// entangled mode pairs.
    pub schmidt_number: f64,
}

/// Schmidt-decompose the amplitude. Separable states give `K = 1` and zero
/// entropy; any connected-kernel contribution pushes `K` above 1.
pub fn schmidt_decompose(jsa: &JointAmplitude) -> SchmidtReport {
    let v = jsa.values();
    let weight = jsa.cell_area().sqrt();
    let m = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[[i, j]] * weight);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("singular values are finite"));
    let floor = sv.first().copied().unwrap_or(0.0) * SVD_RELATIVE_FLOOR;
    let kept: Vec<f64> = sv.iter().copied().take_while(|&s| s > floor).collect();
    let total: f64 = kept.iter().map(|s| s * s).sum();
    let mut entropy = 0.0;
    let mut purity = 0.0;
    for s in &kept {
        let p = s * s / total;
        if p > 0.0 {
            entropy -= p * p.log2();
        }
        purity += p * p;
    }
    SchmidtReport {
        singular_values: sv,
        entropy: entropy.max(0.0),
        schmidt_number: 1.0 / purity,
    }
}

/// Cell-weighted inner product `<a|b>`. The grids must match.
pub fn overlap(a: &JointAmplitude, b: &JointAmplitude) -> Result<C64> {
    if !a.same_grids(b) {
        return Err(Error::GridMismatch);
    }
    let acc: C64 = a
        .values()
        .iter()
        .zip(b.values().iter())
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok(acc * a.cell_area())
}

/// CPHASE fidelity from the two-photon overlap `O`: `F = |3 - O|^2 / 16`.
///
/// This is the dual-rail average-gate-fidelity form in the frame where the
/// deterministic single-photon phases are absorbed into the qubit
/// definition, so a perfect gate (`O = -1`) gives `F = 1` and no
/// interaction (`O = 1`) gives `F = 1/4`.
pub fn fidelity_from_overlap(o: C64) -> f64 {
    (C64::new(3.0, 0.0) - o).norm_sqr() / 16.0
}

/// Overlap `O = <(S1 x S1) psi_in | psi_out>` of the scattered state with
/// the phase-dressed input. `O = -1` is a perfect CPHASE two-photon sector.
pub fn cphase_overlap(
    jsa_out: &JointAmplitude,
    jsa_in: &JointAmplitude,
    chain: &ChainSpec,
) -> Result<C64> {
    if !jsa_in.same_grids(jsa_out) {
        return Err(Error::GridMismatch);
    }
    let ga = jsa_in.grid_a();
    let gb = jsa_in.grid_b();
    let s1a: Vec<C64> = (0..ga.count)
        .map(|i| single_photon_amplitude(ga.value(i), chain))
        .collect();
    let s1b: Vec<C64> = (0..gb.count)
        .map(|j| single_photon_amplitude(gb.value(j), chain))
        .collect();
    let vin = jsa_in.values();
    let vout = jsa_out.values();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..ga.count {
        for j in 0..gb.count {
            acc += (s1a[i] * s1b[j] * vin[[i, j]]).conj() * vout[[i, j]];
        }
    }
    Ok(acc * jsa_in.cell_area())
}

/// CPHASE gate fidelity of the scattered state against the input.
pub fn cphase_fidelity(
    jsa_out: &JointAmplitude,
    jsa_in: &JointAmplitude,
    chain: &ChainSpec,
) -> Result<f64> {
    Ok(fidelity_from_overlap(cphase_overlap(jsa_out, jsa_in, chain)?))
}

/// Pointwise phase `arg(psi_out / psi_ref)` where the reference has
/// appreciable magnitude, NaN elsewhere. Diagnoses how uniform the
/// conditional phase is across the joint spectrum.
pub fn conditional_phase_map(
    jsa_out: &JointAmplitude,
    jsa_ref: &JointAmplitude,
) -> Result<Array2<f64>> {
    if !jsa_out.same_grids(jsa_ref) {
        return Err(Error::GridMismatch);
    }
    let max_ref = jsa_ref
        .values()
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    let floor = PHASE_MAP_THRESHOLD * max_ref;
    let vr = jsa_ref.values();
    let vo = jsa_out.values();
    Ok(Array2::from_shape_fn(vr.dim(), |(i, j)| {
        if vr[[i, j]].norm() > floor {
            (vo[[i, j]] / vr[[i, j]]).arg()
        } else {
            f64::NAN
        }
    }))
}

/// One completed sweep point.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub n_sites: usize,
    pub sigma_over_gamma: f64,
    pub chi_over_gamma: f64,
    pub fidelity: f64,
    pub overlap: C64,
    pub schmidt_number: f64,
    pub entropy: f64,
}

/// A sweep point that could not be evaluated; the sweep continues past it.
#[derive(Clone, Debug)]
pub struct SweepFailure {
    pub n_sites: usize,
    pub sigma_over_gamma: f64,
    pub chi_over_gamma: f64,
    pub reason: String,
}

/// Chain template for sweeps: uniform sites with unit decay rate.
#[derive(Clone, Debug)]
pub struct SweepTemplate {
    pub propagation: Propagation,
    pub delta: f64,
    /// Points per grid axis; the default-policy width applies.
    pub grid_count: usize,
}

impl Default for SweepTemplate {
    fn default() -> Self {
        Self {
            propagation: Propagation::Counter,
            delta: 0.0,
            grid_count: 257,
        }
    }
}

/// The kernel variant a uniform chain of `n` sites dispatches to.
fn variant_for(propagation: Propagation, n: usize) -> Result<KernelVariant> {
    match (propagation, n) {
        (_, 1) => Ok(KernelVariant::SingleSite),
        (Propagation::Co, 2) => Ok(KernelVariant::TwoSiteCo),
        (Propagation::Co, _) => Err(Error::KernelChainMismatch {
            variant: KernelVariant::TwoSiteCo,
            requirement: "co-propagating closed forms exist only for N <= 2",
        }),
        (Propagation::Counter, _) => Ok(KernelVariant::NSiteCounter),
    }
}

/// Evaluate one sweep point: scatter on-resonance Gaussians through a
/// uniform chain and report fidelity and entanglement.
pub fn sweep_point(n: usize, sigma: f64, chi: f64, tmpl: &SweepTemplate) -> Result<SweepRow> {
    let site = SiteParams::new(1.0, tmpl.delta, chi)?;
    let chain = ChainSpec::uniform(tmpl.propagation, site, n)?;
    let grid = FrequencyGrid::build(tmpl.delta, (8.0 * sigma).max(4.0), tmpl.grid_count)?;
    let pulse = PulseShape::gaussian(tmpl.delta, sigma)?;
    let jsa_in = make_separable_jsa(&pulse, &pulse, grid, grid)?;
    let kspec = KernelSpec::new(variant_for(tmpl.propagation, n)?, chain.clone())?;
    let jsa_out = scatter_two_photon(&jsa_in, &kspec)?;
    let o = cphase_overlap(&jsa_out, &jsa_in, &chain)?;
    let schmidt = schmidt_decompose(&jsa_out);
    Ok(SweepRow {
        n_sites: n,
        sigma_over_gamma: sigma,
        chi_over_gamma: chi,
        fidelity: fidelity_from_overlap(o),
        overlap: o,
        schmidt_number: schmidt.schmidt_number,
        entropy: schmidt.entropy,
    })
}

/// Run the full cartesian sweep over `n_sites x sigmas x chis`.
///
/// Rows appear in input order (sites outermost, chi innermost) regardless
/// of the parallel execution schedule; failed points are reported
/// separately and do not stop the sweep.
pub fn fidelity_sweep(
    n_sites: &[usize],
    sigmas: &[f64],
    chis: &[f64],
    tmpl: &SweepTemplate,
) -> Result<(Vec<SweepRow>, Vec<SweepFailure>)> {
    if n_sites.is_empty() || sigmas.is_empty() || chis.is_empty() {
        return Err(Error::EmptySweep);
    }
    let mut points = Vec::new();
    for &n in n_sites {
        for &sigma in sigmas {
            for &chi in chis {
                points.push((n, sigma, chi));
            }
        }
    }
    let outcomes: Vec<_> = points
        .par_iter()
        .map(|&(n, sigma, chi)| (n, sigma, chi, sweep_point(n, sigma, chi, tmpl)))
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (n, sigma, chi, outcome) in outcomes {
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(SweepFailure {
                n_sites: n,
                sigma_over_gamma: sigma,
                chi_over_gamma: chi,
                reason: e.to_string(),
            }),
        }
    }
    Ok((rows, failures))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::kernel_infinite_diagonal;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::PI;

    fn site(gamma: f64, delta: f64, chi: f64) -> SiteParams {
        SiteParams::new(gamma, delta, chi).unwrap()
    }

    fn gaussian_jsa(sigma: f64, count: usize) -> JointAmplitude {
        let g = FrequencyGrid::build(0.0, (8.0 * sigma).max(4.0), count).unwrap();
        let p = PulseShape::gaussian(0.0, sigma).unwrap();
        make_separable_jsa(&p, &p, g, g).unwrap()
    }

    #[test]
    fn separable_state_has_unit_schmidt_number() {
        let report = schmidt_decompose(&gaussian_jsa(0.2, 129));
        assert!((report.schmidt_number - 1.0).abs() < 1e-9);
        assert!(report.entropy.abs() < 1e-9);
        let total: f64 = report.singular_values.iter().map(|s| s * s).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn flat_diagonal_state_counts_its_rank() {
        let g = FrequencyGrid::build(0.0, 1.0, 9).unwrap();
        let mut v: Array2<C64> = Array2::zeros((9, 9));
        for k in 0..4 {
            v[[k, k]] = C64::new(1.0, 0.0);
        }
        let jsa = JointAmplitude::from_values(g, g, v).unwrap();
        let report = schmidt_decompose(&jsa);
        assert!((report.schmidt_number - 4.0).abs() < 1e-9);
        assert!((report.entropy - 2.0).abs() < 1e-9);
    }

    #[test]
    fn scattering_entangles_at_moderate_chi() {
        let jsa = gaussian_jsa(0.2, 129);
        let chain = ChainSpec::uniform(Propagation::Counter, site(1.0, 0.0, 1.0), 1).unwrap();
        let kspec = KernelSpec::new(KernelVariant::SingleSite, chain).unwrap();
        let out = scatter_two_photon(&jsa, &kspec).unwrap();
        let report = schmidt_decompose(&out);
        assert!(report.schmidt_number > 1.01, "K = {}", report.schmidt_number);
    }

    #[test]
    fn schmidt_number_ignores_separable_phases() {
        let jsa = {
            let chain =
                ChainSpec::uniform(Propagation::Counter, site(1.0, 0.0, 1.0), 1).unwrap();
            let kspec = KernelSpec::new(KernelVariant::SingleSite, chain).unwrap();
            scatter_two_photon(&gaussian_jsa(0.2, 65), &kspec).unwrap()
        };
        let k0 = schmidt_decompose(&jsa).schmidt_number;
        let ga = *jsa.grid_a();
        let dressed = Array2::from_shape_fn(jsa.values().dim(), |(i, j)| {
            let f = C64::from_polar(1.0, 0.8 * ga.value(i).powi(2));
            let g = C64::from_polar(1.0, -1.3 * ga.value(j));
            f * g * jsa.values()[[i, j]]
        });
        let dressed = JointAmplitude::from_values(ga, ga, dressed).unwrap();
        let k1 = schmidt_decompose(&dressed).schmidt_number;
        assert!((k0 - k1).abs() < 1e-9, "K changed from {k0} to {k1}");
    }

    #[test]
    fn overlap_basics() {
        let jsa = gaussian_jsa(0.2, 65);
        let n2 = jsa.norm_sq();
        let self_overlap = overlap(&jsa, &jsa).unwrap();
        assert!((self_overlap - C64::new(n2, 0.0)).norm() < 1e-12);
        let negated =
            JointAmplitude::from_values(*jsa.grid_a(), *jsa.grid_b(), -jsa.values().clone())
                .unwrap();
        let neg_overlap = overlap(&jsa, &negated).unwrap();
        assert!((neg_overlap + C64::new(n2, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn disjoint_supports_are_orthogonal() {
        let g = FrequencyGrid::build(0.0, 1.0, 11).unwrap();
        let mut v1: Array2<C64> = Array2::zeros((11, 11));
        let mut v2: Array2<C64> = Array2::zeros((11, 11));
        v1[[1, 1]] = C64::new(1.0, 0.0);
        v2[[8, 3]] = C64::new(0.0, 1.0);
        let a = JointAmplitude::from_values(g, g, v1).unwrap();
        let b = JointAmplitude::from_values(g, g, v2).unwrap();
        assert_eq!(overlap(&a, &b).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn overlap_rejects_mismatched_grids() {
        let a = gaussian_jsa(0.2, 65);
        let b = gaussian_jsa(0.2, 33);
        assert!(matches!(overlap(&a, &b), Err(Error::GridMismatch)));
    }

    #[test]
    fn fidelity_endpoints() {
        assert!((fidelity_from_overlap(C64::new(-1.0, 0.0)) - 1.0).abs() < 1e-15);
        assert!((fidelity_from_overlap(C64::new(1.0, 0.0)) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn fidelity_symmetry_and_monotonicity() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..200 {
            let o = C64::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(-PI..PI));
            assert!((fidelity_from_overlap(o) - fidelity_from_overlap(o.conj())).abs() < 1e-15);
        }
        // Monotone decreasing in Re(O) at fixed |O|.
        for &r in &[0.3, 0.8, 1.0] {
            let mut prev = f64::INFINITY;
            for k in 0..50 {
                let theta = PI * k as f64 / 49.0; // Re(O) increases as theta drops
                let f = fidelity_from_overlap(C64::from_polar(r, PI - theta));
                assert!(f <= prev + 1e-12);
                prev = f;
            }
        }
    }

    #[test]
    fn chi_zero_chain_has_quarter_fidelity() {
        let jsa = gaussian_jsa(0.2, 129);
        let chain = ChainSpec::uniform(Propagation::Counter, site(1.0, 0.0, 0.0), 1).unwrap();
        let kspec = KernelSpec::new(KernelVariant::SingleSite, chain.clone()).unwrap();
        let out = scatter_two_photon(&jsa, &kspec).unwrap();
        let f = cphase_fidelity(&out, &jsa, &chain).unwrap();
        assert!((f - 0.25).abs() < 1e-6, "fidelity {f}");
    }

    #[test]
    fn phase_map_constants() {
        let jsa = gaussian_jsa(0.2, 33);
        let flipped =
            JointAmplitude::from_values(*jsa.grid_a(), *jsa.grid_b(), -jsa.values().clone())
                .unwrap();
        let map = conditional_phase_map(&flipped, &jsa).unwrap();
        for v in map.iter().filter(|v| !v.is_nan()) {
            assert!((v.abs() - PI).abs() < 1e-12);
        }
        let map0 = conditional_phase_map(&jsa, &jsa).unwrap();
        for v in map0.iter().filter(|v| !v.is_nan()) {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn phase_map_sees_the_narrowband_conditional_phase() {
        let sigma = 0.01;
        let g = FrequencyGrid::build(0.0, 8.0 * sigma, 129).unwrap();
        let p = PulseShape::gaussian(0.0, sigma).unwrap();
        let jsa = make_separable_jsa(&p, &p, g, g).unwrap();
        let chain = ChainSpec::uniform(Propagation::Counter, site(1.0, 0.0, 0.5), 1).unwrap();
        let kspec = KernelSpec::new(KernelVariant::InfiniteDiagonal, chain.clone()).unwrap();
        let out = scatter_two_photon(&jsa, &kspec).unwrap();
        // Reference: the same state without the interaction bracket.
        let refv = Array2::from_shape_fn(jsa.values().dim(), |(i, j)| {
            single_photon_amplitude(g.value(i), &chain)
                * single_photon_amplitude(g.value(j), &chain)
                * jsa.values()[[i, j]]
        });
        let reference = JointAmplitude::from_values(g, g, refv).unwrap();
        let map = conditional_phase_map(&out, &reference).unwrap();
        // The conditional phase drifts linearly across the pulse, so single
        // points wander a little while the weighted mean pins -pi/2.
        let mut count = 0usize;
        let mut mean = 0.0;
        let mut weight = 0.0;
        for ((i, j), v) in map.indexed_iter().filter(|(_, v)| !v.is_nan()) {
            assert!((v + PI / 2.0).abs() < 0.12, "phase {v}");
            let w = jsa.values()[[i, j]].norm_sqr();
            mean += w * v;
            weight += w;
            count += 1;
        }
        assert!(count > 100);
        assert!((mean / weight + PI / 2.0).abs() < 2e-3);
    }

    #[test]
    fn infinite_diagonal_output_stays_separable_narrowband() {
        let sigma = 0.01;
        let g = FrequencyGrid::build(0.0, 8.0 * sigma, 129).unwrap();
        let p = PulseShape::gaussian(0.0, sigma).unwrap();
        let jsa = make_separable_jsa(&p, &p, g, g).unwrap();
        let chain = ChainSpec::uniform(Propagation::Counter, site(1.0, 0.0, 10.0), 1).unwrap();
        let kspec = KernelSpec::new(KernelVariant::InfiniteDiagonal, chain).unwrap();
        let out = scatter_two_photon(&jsa, &kspec).unwrap();
        let k = schmidt_decompose(&out).schmidt_number;
        assert!((k - 1.0).abs() < 1e-3, "K = {k}");
    }

    #[test]
    fn sweep_single_tuple_matches_direct_calls() {
        let tmpl = SweepTemplate {
            grid_count: 129,
            ..SweepTemplate::default()
        };
        let (rows, failures) = fidelity_sweep(&[2], &[0.2], &[1.0], &tmpl).unwrap();
        assert!(failures.is_empty());
        assert_eq!(rows.len(), 1);
        let direct = sweep_point(2, 0.2, 1.0, &tmpl).unwrap();
        assert_eq!(rows[0].fidelity, direct.fidelity);
        assert_eq!(rows[0].schmidt_number, direct.schmidt_number);
    }

    #[test]
    fn sweep_chi_zero_column_is_quarter() {
        let tmpl = SweepTemplate {
            grid_count: 129,
            ..SweepTemplate::default()
        };
        let (rows, failures) =
            fidelity_sweep(&[1, 2], &[0.1, 0.2], &[0.0], &tmpl).unwrap();
        assert!(failures.is_empty());
        assert_eq!(rows.len(), 4);
        for row in &rows {
            assert!((row.fidelity - 0.25).abs() < 1e-6, "{row:?}");
            assert!((row.schmidt_number - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn sweep_records_unreachable_points_and_continues() {
        let tmpl = SweepTemplate {
            propagation: Propagation::Co,
            delta: 0.0,
            grid_count: 129,
        };
        // N = 3 co-propagating has no closed form; N = 1 still succeeds.
        let (rows, failures) = fidelity_sweep(&[1, 3], &[0.2], &[0.5], &tmpl).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(failures.len(), 1);
        assert_eq!(failures[0].n_sites, 3);
    }

    #[test]
    fn sweep_rejects_empty_ranges() {
        let tmpl = SweepTemplate::default();
        assert!(matches!(
            fidelity_sweep(&[], &[0.1], &[1.0], &tmpl),
            Err(Error::EmptySweep)
        ));
    }

    #[test]
    fn sweep_ordering_is_deterministic() {
        let tmpl = SweepTemplate {
            grid_count: 65,
            ..SweepTemplate::default()
        };
        let (rows, _) = fidelity_sweep(&[1, 2], &[0.2, 0.3], &[0.0, 0.5], &tmpl).unwrap();
        let keys: Vec<(usize, f64, f64)> = rows
            .iter()
            .map(|r| (r.n_sites, r.sigma_over_gamma, r.chi_over_gamma))
            .collect();
        let expect = vec![
            (1, 0.2, 0.0),
            (1, 0.2, 0.5),
            (1, 0.3, 0.0),
            (1, 0.3, 0.5),
            (2, 0.2, 0.0),
            (2, 0.2, 0.5),
            (2, 0.3, 0.0),
            (2, 0.3, 0.5),
        ];
        assert_eq!(keys, expect);
    }

    #[test]
    fn infinite_diagonal_bracket_feeds_the_phase_map_threshold() {
        // A zero-reference region produces NaN, not garbage.
        let g = FrequencyGrid::build(0.0, 1.0, 11).unwrap();
        let mut v: Array2<C64> = Array2::zeros((11, 11));
        v[[5, 5]] = C64::new(1.0, 0.0);
        let reference = JointAmplitude::from_values(g, g, v.clone()).unwrap();
        v[[5, 5]] = C64::new(0.0, 1.0);
        let out = JointAmplitude::from_values(g, g, v).unwrap();
        let map = conditional_phase_map(&out, &reference).unwrap();
        assert!((map[[5, 5]] - PI / 2.0).abs() < 1e-12);
        assert!(map[[0, 0]].is_nan());
        // Exercise the diagonal kernel on one point for coverage.
        let s = site(1.0, 0.0, 0.5);
        assert!((kernel_infinite_diagonal(0.0, 0.0, &s) - C64::new(0.0, -1.0)).norm() < 1e-14);
    }
}
