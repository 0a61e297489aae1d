//! Dense SLH composition on the atomic Hilbert space of a chain, and the
//! Langevin (Heisenberg equation) coefficients it generates.
//!
//! Each site holds two two-level atoms (A couples to the right-going mode,
//! B to the left-going mode), so a chain of N sites lives on a
//! 2^(2N)-dimensional space. The basis convention is site-major (site 1
//! slowest), A-atom before B-atom within a site, with atomic basis
//! {|0>, |1>} = {ground, excited} per atom.
//!
//! The per-site cross-Kerr term is `2 chi |11><11|`: the normalization for
//! which the Heisenberg equations of motion carry the interaction
//! coefficient `-i chi A_- (1 - B_z)`, matching the equations the
//! closed-form S-matrices are derived from. The module exists to verify
//! structure at small N, so matrices are dense and the chain length is
//! capped.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use std::collections::BTreeMap;

use crate::params::{ChainSpec, Propagation, SiteParams};
use crate::{Error, Result};

/// Dense complex operator on the chain's atomic space.
pub type OperatorMatrix = DMatrix<C64>;

/// Largest chain representable densely (dimension 4^N).
pub const MAX_DENSE_SITES: usize = 6;

/// Tolerance for Hermiticity checks on generated Hamiltonians.
const HERMITICITY_TOL: f64 = 1e-12;

/// Marker for the trivial scattering matrix: S stays the identity through
/// every composition used here, so it is carried as a tag, not a matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrivialScattering;

/// An (S, L, H) description of an open system with `S = 1`: the list of
/// field-coupling operators (one per input-output mode) and the internal
/// Hamiltonian.
#[derive(Clone, Debug)]
pub struct SlhTriple {
    pub s: TrivialScattering,
    pub l_ops: Vec<OperatorMatrix>,
    pub h: OperatorMatrix,
}

impl SlhTriple {
    pub fn new(l_ops: Vec<OperatorMatrix>, h: OperatorMatrix) -> Result<Self> {
        let triple = Self {
            s: TrivialScattering,
            l_ops,
            h,
        };
        triple.validate()?;
        Ok(triple)
    }

    /// The empty system on a given space: no modes, zero Hamiltonian.
    pub fn vacuum(dim: usize) -> Self {
        Self {
            s: TrivialScattering,
            l_ops: Vec::new(),
            h: DMatrix::zeros(dim, dim),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.l_ops.len()
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.h.nrows();
        if self.h.ncols() != dim {
            return Err(Error::DimensionMismatch(dim, self.h.ncols()));
        }
        for l in &self.l_ops {
            if l.nrows() != dim || l.ncols() != dim {
                return Err(Error::DimensionMismatch(dim, l.nrows()));
            }
        }
        let dev = (&self.h - self.h.adjoint()).camax();
        if dev > HERMITICITY_TOL {
            return Err(Error::MalformedJsaFile(format!(
                "Hamiltonian deviates from Hermitian by {dev:.3e}"
            )));
        }
        Ok(())
    }
}

/// Which atom of a site an operator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Atom {
    A,
    B,
}

fn identity2() -> DMatrix<C64> {
    DMatrix::identity(2, 2)
}

/// Pauli-Z with the ground state at +1: `|0><0| - |1><1|`.
fn pauli_z() -> DMatrix<C64> {
    let mut m = DMatrix::zeros(2, 2);
    m[(0, 0)] = C64::new(1.0, 0.0);
    m[(1, 1)] = C64::new(-1.0, 0.0);
    m
}

/// Lowering operator `|0><1|`.
fn lowering() -> DMatrix<C64> {
    let mut m = DMatrix::zeros(2, 2);
    m[(0, 1)] = C64::new(1.0, 0.0);
    m
}

/// Embed a single-atom operator at the tensor slot of (`site_index`, atom);
/// `site_index` is 1-based, site 1 is the slowest tensor factor.
pub fn embed_atom_op(
    op: &DMatrix<C64>,
    atom: Atom,
    n_total: usize,
    site_index: usize,
) -> Result<OperatorMatrix> {
    if site_index == 0 || site_index > n_total {
        return Err(Error::SiteIndexOutOfRange {
            index: site_index,
            n_total,
        });
    }
    let site_op = match atom {
        Atom::A => op.kronecker(&identity2()),
        Atom::B => identity2().kronecker(op),
    };
    let left = DMatrix::<C64>::identity(1 << (2 * (site_index - 1)), 1 << (2 * (site_index - 1)));
    let right_dim = 1 << (2 * (n_total - site_index));
    let right = DMatrix::<C64>::identity(right_dim, right_dim);
    Ok(left.kronecker(&site_op).kronecker(&right))
}

/// `A_-` (or `B_-`) at a site, embedded in the full space.
pub fn atom_lowering(atom: Atom, n_total: usize, site_index: usize) -> Result<OperatorMatrix> {
    embed_atom_op(&lowering(), atom, n_total, site_index)
}

/// `A_z` (or `B_z`) at a site, embedded in the full space.
pub fn atom_z(atom: Atom, n_total: usize, site_index: usize) -> Result<OperatorMatrix> {
    embed_atom_op(&pauli_z(), atom, n_total, site_index)
}

/// The a-mode half of one site: `L = sqrt(gamma) A_-^(i)` with the site's
/// detuning and Kerr terms (the Kerr interaction rides with the a-mode by
/// convention).
fn site_mode_a(site: &SiteParams, n_total: usize, index: usize) -> Result<SlhTriple> {
    let dim = 1 << (2 * n_total);
    let id = DMatrix::<C64>::identity(dim, dim);
    let az = atom_z(Atom::A, n_total, index)?;
    let bz = atom_z(Atom::B, n_total, index)?;
    let not_az = &id - &az;
    let not_bz = &id - &bz;
    let h = &not_az * C64::new(0.5 * site.delta, 0.0)
        + (&not_az * &not_bz) * C64::new(0.5 * site.chi, 0.0);
    let l = atom_lowering(Atom::A, n_total, index)? * C64::new(site.gamma.sqrt(), 0.0);
    SlhTriple::new(vec![l], h)
}

/// The b-mode half of one site: `L = sqrt(gamma) B_-^(i)` and the B atom's
/// detuning term.
fn site_mode_b(site: &SiteParams, n_total: usize, index: usize) -> Result<SlhTriple> {
    let dim = 1 << (2 * n_total);
    let id = DMatrix::<C64>::identity(dim, dim);
    let bz = atom_z(Atom::B, n_total, index)?;
    let h = (&id - &bz) * C64::new(0.5 * site.delta, 0.0);
    let l = atom_lowering(Atom::B, n_total, index)? * C64::new(site.gamma.sqrt(), 0.0);
    SlhTriple::new(vec![l], h)
}

/// The full two-mode triple of one site embedded at tensor slot `index` of
/// an `n_total`-site space: `L = (sqrt(gamma) A_-, sqrt(gamma) B_-)`,
/// `H = (delta/2)(1 - A_z) + (delta/2)(1 - B_z) + 2 chi |11><11|`.
pub fn site_triple(site: &SiteParams, n_total: usize, index: usize) -> Result<SlhTriple> {
    if n_total > MAX_DENSE_SITES {
        return Err(Error::ChainTooLarge {
            max: MAX_DENSE_SITES,
            got: n_total,
        });
    }
    concatenate(
        &site_mode_a(site, n_total, index)?,
        &site_mode_b(site, n_total, index)?,
    )
}

/// Concatenation product: two systems side by side, coupling lists stacked
/// and Hamiltonians added.
pub fn concatenate(g1: &SlhTriple, g2: &SlhTriple) -> Result<SlhTriple> {
    if g1.dim() != g2.dim() {
        return Err(Error::DimensionMismatch(g1.dim(), g2.dim()));
    }
    let mut l_ops = g1.l_ops.clone();
    l_ops.extend(g2.l_ops.iter().cloned());
    SlhTriple::new(l_ops, &g1.h + &g2.h)
}

/// Series product `G_down <| G_up`: the upstream output feeds the
/// downstream input. `L = L_up + L_down`,
/// `H = H_up + H_down + (1/2i)(L_down^dag L_up - L_up^dag L_down)`.
pub fn series(downstream: &SlhTriple, upstream: &SlhTriple) -> Result<SlhTriple> {
    if downstream.dim() != upstream.dim() {
        return Err(Error::DimensionMismatch(downstream.dim(), upstream.dim()));
    }
    if downstream.n_modes() != 1 || upstream.n_modes() != 1 {
        return Err(Error::ModeMismatch(
            downstream.n_modes(),
            upstream.n_modes(),
        ));
    }
    let l_up = &upstream.l_ops[0];
    let l_down = &downstream.l_ops[0];
    let exchange = (l_down.adjoint() * l_up - l_up.adjoint() * l_down) * C64::new(0.0, -0.5);
    SlhTriple::new(vec![l_up + l_down], &upstream.h + &downstream.h + exchange)
}

/// Cascade the whole chain into a single two-mode triple.
///
/// Mode a traverses the sites in order 1..N for either arrangement; mode b
/// traverses N..1 when counter-propagating and 1..N when co-propagating.
pub fn build_chain(chain: &ChainSpec) -> Result<SlhTriple> {
    chain.validate()?;
    let n = chain.len();
    if n > MAX_DENSE_SITES {
        return Err(Error::ChainTooLarge {
            max: MAX_DENSE_SITES,
            got: n,
        });
    }

    let mut mode_a = site_mode_a(&chain.sites[0], n, 1)?;
    for i in 2..=n {
        mode_a = series(&site_mode_a(&chain.sites[i - 1], n, i)?, &mode_a)?;
    }

    let mode_b = match chain.propagation {
        Propagation::Counter => {
            let mut acc = site_mode_b(&chain.sites[n - 1], n, n)?;
            for i in (1..n).rev() {
                acc = series(&site_mode_b(&chain.sites[i - 1], n, i)?, &acc)?;
            }
            acc
        }
        Propagation::Co => {
            let mut acc = site_mode_b(&chain.sites[0], n, 1)?;
            for i in 2..=n {
                acc = series(&site_mode_b(&chain.sites[i - 1], n, i)?, &acc)?;
            }
            acc
        }
    };

    concatenate(&mode_a, &mode_b)
}

/// Heisenberg-picture coefficients of an operator `X` under a triple.
#[derive(Clone, Debug)]
pub struct LangevinCoefficients {
    /// `i[H, X] + sum_m (L_m^dag X L_m - (L_m^dag L_m X + X L_m^dag L_m)/2)`.
    pub drift: OperatorMatrix,
    /// Per mode, the operators multiplying `F_in` and `F_in^dag`:
    /// `([L^dag, X], [X, L])`.
    pub in_coupling: Vec<(OperatorMatrix, OperatorMatrix)>,
    /// The input-output relation operators `L` themselves
    /// (`F_out = L + F_in`).
    pub out_coupling: Vec<OperatorMatrix>,
}

/// Generate the Langevin coefficients of `x` for the system `triple`.
pub fn langevin(triple: &SlhTriple, x: &OperatorMatrix) -> Result<LangevinCoefficients> {
    if x.nrows() != triple.dim() || x.ncols() != triple.dim() {
        return Err(Error::DimensionMismatch(triple.dim(), x.nrows()));
    }
    let h = &triple.h;
    let mut drift = (h * x - x * h) * C64::new(0.0, 1.0);
    let mut in_coupling = Vec::with_capacity(triple.n_modes());
    for l in &triple.l_ops {
        let ld = l.adjoint();
        let ldl = &ld * l;
        drift += &ld * x * l - (&ldl * x + x * &ldl) * C64::new(0.5, 0.0);
        in_coupling.push((&ld * x - x * &ld, x * l - l * x));
    }
    Ok(LangevinCoefficients {
        drift,
        in_coupling,
        out_coupling: triple.l_ops.clone(),
    })
}

/// One term of an operator expanded over products of single-atom operators:
/// the token string (`"I"`, `"Az1"`, `"Ap1 Bm2"`, ...) and its complex
/// coefficient.
pub type OperatorTerm = (String, C64);

/// Expand a dense operator over the orthogonal per-atom basis
/// {identity, Az, Ap, Am} x {identity, Bz, Bp, Bm} per site.
///
/// Terms are ordered by the number of non-identity factors, then by token
/// string; coefficients below 1e-12 are dropped. The expansion walks only
/// the nonzero entries of the matrix, so sparse chain operators stay cheap.
pub fn term_list(op: &OperatorMatrix, n_sites: usize) -> Vec<OperatorTerm> {
    let n_atoms = 2 * n_sites;
    let dim = 1usize << n_atoms;
    assert_eq!(op.nrows(), dim, "operator does not fit {n_sites} sites");

    // Per-atom candidates for an entry bit pair (row_bit, col_bit):
    // code 0 = identity, 1 = z, 2 = raising, 3 = lowering.
    // Diagonal pairs project onto identity and z with weight 1/2 each
    // (trace normalization 2), z with sign -1 on the excited state.
    // Off-diagonal pairs hit exactly one ladder operator with weight 1.
    let mut acc: BTreeMap<u64, C64> = BTreeMap::new();
    let mut combos: Vec<(u64, C64)> = Vec::new();
    let mut next: Vec<(u64, C64)> = Vec::new();
    for r in 0..dim {
        for c in 0..dim {
            let v = op[(r, c)];
            if v.norm() <= 1e-15 {
                continue;
            }
            combos.clear();
            combos.push((0u64, v));
            for atom in 0..n_atoms {
                // Atom 0 is the slowest tensor factor (site 1, atom A).
                let shift = n_atoms - 1 - atom;
                let rb = (r >> shift) & 1;
                let cb = (c >> shift) & 1;
                next.clear();
                match (rb, cb) {
                    (0, 0) => {
                        for &(code, w) in &combos {
                            next.push((code << 2, w * 0.5));
                            next.push(((code << 2) | 1, w * 0.5));
                        }
                    }
                    (1, 1) => {
                        for &(code, w) in &combos {
                            next.push((code << 2, w * 0.5));
                            next.push(((code << 2) | 1, w * -0.5));
                        }
                    }
                    (1, 0) => {
                        for &(code, w) in &combos {
                            next.push(((code << 2) | 2, w));
                        }
                    }
                    (0, 1) => {
                        for &(code, w) in &combos {
                            next.push(((code << 2) | 3, w));
                        }
                    }
                    _ => unreachable!(),
                }
                std::mem::swap(&mut combos, &mut next);
            }
            for &(code, w) in &combos {
                *acc.entry(code).or_insert(C64::new(0.0, 0.0)) += w;
            }
        }
    }

    let mut terms: Vec<(usize, String, C64)> = Vec::new();
    for (code, coeff) in acc {
        if coeff.norm() <= 1e-12 {
            continue;
        }
        let mut tokens = Vec::new();
        for atom in 0..n_atoms {
            let shift = 2 * (n_atoms - 1 - atom);
            let kind = (code >> shift) & 3;
            if kind == 0 {
                continue;
            }
            let letter = if atom % 2 == 0 { 'A' } else { 'B' };
            let site = atom / 2 + 1;
            let suffix = match kind {
                1 => 'z',
                2 => 'p',
                3 => 'm',
                _ => unreachable!(),
            };
            tokens.push(format!("{letter}{suffix}{site}"));
        }
        let weight = tokens.len();
        let name = if tokens.is_empty() {
            "I".to_string()
        } else {
            tokens.join(" ")
        };
        terms.push((weight, name, coeff));
    }
    terms.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    terms.into_iter().map(|(_, name, c)| (name, c)).collect()
}

fn format_coeff(c: C64) -> String {
    format!("({:+.16e} {:+.16e}i)", c.re, c.im)
}

/// Render the chain's L and H as stable sparse term lists for diffing.
pub fn dump_chain(chain: &ChainSpec) -> Result<String> {
    let triple = build_chain(chain)?;
    let n = chain.len();
    let mut out = String::new();
    out.push_str(&format!("sites = {n}\n"));
    out.push_str(&format!(
        "propagation = {}\n",
        match chain.propagation {
            Propagation::Co => "co",
            Propagation::Counter => "counter",
        }
    ));
    out.push_str(&format!("dim = {}\n", triple.dim()));
    out.push_str("S = identity\n");
    for (label, idx) in [("a", 0usize), ("b", 1usize)] {
        out.push_str(&format!("[L {label}]\n"));
        for (name, c) in term_list(&triple.l_ops[idx], n) {
            out.push_str(&format!("{} * {name}\n", format_coeff(c)));
        }
    }
    out.push_str("[H]\n");
    for (name, c) in term_list(&triple.h, n) {
        out.push_str(&format!("{} * {name}\n", format_coeff(c)));
    }
    Ok(out)
}
