//! Truncated Fock-space linear algebra.
//!
//! A [`CompositeBasis`] enumerates occupation tuples of a set of bosonic
//! modes, either the full tensor-product basis (row-major, last mode varies
//! fastest) or the sector-restricted basis holding only tuples whose total
//! excitation does not exceed a cutoff (ordered by total excitation, then
//! row-major within each sector). Every operator is a dense matrix expressed
//! in one of these bases.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense complex square matrix. Operators and Hamiltonians share this type.
pub type ComplexMatrix = Array2<C64>;

/// Largest amplitude allowed outside a target basis when moving a state
/// between bases.
pub const LEAKAGE_TOLERANCE: f64 = 1e-10;

#[derive(Debug)]
struct BasisData {
    mode_dims: Vec<usize>,
    max_total_excitation: Option<usize>,
    states: Vec<Vec<usize>>,
    lookup: HashMap<Vec<usize>, usize>,
}

/// Occupation-number basis over a list of truncated modes.
///
/// Cloning is cheap; the enumerated states are shared.
#[derive(Clone)]
pub struct CompositeBasis {
    inner: Arc<BasisData>,
}

impl fmt::Debug for CompositeBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositeBasis")
            .field("mode_dims", &self.inner.mode_dims)
            .field("max_total_excitation", &self.inner.max_total_excitation)
            .field("dim", &self.dim())
            .finish()
    }
}

impl PartialEq for CompositeBasis {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.mode_dims == other.inner.mode_dims
                && self.inner.max_total_excitation == other.inner.max_total_excitation)
    }
}

impl Eq for CompositeBasis {}

fn row_major_tuples(mode_dims: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = mode_dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut current = vec![0usize; mode_dims.len()];
    for _ in 0..total {
        out.push(current.clone());
        for m in (0..mode_dims.len()).rev() {
            current[m] += 1;
            if current[m] < mode_dims[m] {
                break;
            }
            current[m] = 0;
        }
    }
    out
}

impl CompositeBasis {
    /// Full tensor-product basis.
    pub fn full(mode_dims: &[usize]) -> Result<Self> {
        Self::build(mode_dims, None)
    }

    /// Basis restricted to occupation tuples with `sum(n) <= max_total_excitation`.
    pub fn restricted(mode_dims: &[usize], max_total_excitation: usize) -> Result<Self> {
        Self::build(mode_dims, Some(max_total_excitation))
    }

    fn build(mode_dims: &[usize], cutoff: Option<usize>) -> Result<Self> {
        if mode_dims.is_empty() {
            return Err(Error::param("mode_dims", "at least one mode is required"));
        }
        if let Some(m) = mode_dims.iter().position(|&d| d < 2) {
            return Err(Error::param(
                format!("mode_dims[{m}]"),
                "every mode needs a Fock dimension of at least 2",
            ));
        }
        let mut states = row_major_tuples(mode_dims);
        if let Some(cutoff) = cutoff {
            states.retain(|s| s.iter().sum::<usize>() <= cutoff);
            // stable sort keeps row-major order within each sector
            states.sort_by_key(|s| s.iter().sum::<usize>());
        }
        let lookup = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(CompositeBasis {
            inner: Arc::new(BasisData {
                mode_dims: mode_dims.to_vec(),
                max_total_excitation: cutoff,
                states,
                lookup,
            }),
        })
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.inner.mode_dims
    }

    pub fn num_modes(&self) -> usize {
        self.inner.mode_dims.len()
    }

    pub fn max_total_excitation(&self) -> Option<usize> {
        self.inner.max_total_excitation
    }

    pub fn is_restricted(&self) -> bool {
        self.inner.max_total_excitation.is_some()
    }

    pub fn dim(&self) -> usize {
        self.inner.states.len()
    }

    /// Occupation tuple of basis state `index`.
    pub fn occupations(&self, index: usize) -> &[usize] {
        &self.inner.states[index]
    }

    pub fn index_of(&self, occupations: &[usize]) -> Option<usize> {
        self.inner.lookup.get(occupations).copied()
    }

    pub fn states(&self) -> impl Iterator<Item = &[usize]> {
        self.inner.states.iter().map(|s| s.as_slice())
    }

    pub fn total_excitation(&self, index: usize) -> usize {
        self.inner.states[index].iter().sum()
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.num_modes() {
            return Err(Error::InvalidMode {
                mode,
                modes: self.num_modes(),
            });
        }
        Ok(())
    }

    fn check_same(&self, other: &CompositeBasis, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::DimensionMismatch(format!(
                "{what}: basis {:?} vs {:?}",
                self, other
            )));
        }
        Ok(())
    }
}

/// Annihilation operator of `mode`, embedded in `basis`.
pub fn annihilation_op(mode: usize, basis: &CompositeBasis) -> Result<ComplexMatrix> {
    basis.check_mode(mode)?;
    let dim = basis.dim();
    let mut op = ComplexMatrix::zeros((dim, dim));
    let mut lowered = vec![0usize; basis.num_modes()];
    for (col, occ) in basis.states().enumerate() {
        let n = occ[mode];
        if n == 0 {
            continue;
        }
        lowered.copy_from_slice(occ);
        lowered[mode] -= 1;
        // lowering never leaves a full or sector-restricted basis
        let row = basis.index_of(&lowered).expect("lowered state in basis");
        op[(row, col)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(op)
}

pub fn creation_op(mode: usize, basis: &CompositeBasis) -> Result<ComplexMatrix> {
    annihilation_op(mode, basis).map(|a| dagger(&a))
}

/// Number operator of `mode`: diagonal with the mode's occupation.
pub fn number_op(mode: usize, basis: &CompositeBasis) -> Result<ComplexMatrix> {
    basis.check_mode(mode)?;
    let diag = Array1::from_iter(basis.states().map(|s| C64::new(s[mode] as f64, 0.0)));
    Ok(ComplexMatrix::from_diag(&diag))
}

/// Total excitation operator, the sum of all number operators.
pub fn total_number_op(basis: &CompositeBasis) -> ComplexMatrix {
    let diag = Array1::from_iter(
        (0..basis.dim()).map(|i| C64::new(basis.total_excitation(i) as f64, 0.0)),
    );
    ComplexMatrix::from_diag(&diag)
}

pub fn identity(basis: &CompositeBasis) -> ComplexMatrix {
    ComplexMatrix::eye(basis.dim())
}

pub fn dagger(m: &ComplexMatrix) -> ComplexMatrix {
    m.t().mapv(|z| z.conj())
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.dot(b) - b.dot(a)
}

/// Largest entry modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Max-entry deviation from Hermiticity, `max |M - M†|`.
pub fn hermiticity_error(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Hermiticity test relative to the largest entry.
pub fn is_hermitian(m: &ComplexMatrix, rel_tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    hermiticity_error(m) <= rel_tol * scale
}

/// Induced infinity norm (max absolute row sum); an upper bound on the
/// spectral norm for Hermitian matrices.
/// Largest eigenvalue of the symmetrized entrywise modulus of `sum(mats)`.
///
/// Bounds the spectral norm of any matrix whose entries are dominated by
/// that modulus, so it covers a rotating-term Hamiltonian at every time.
pub fn modulus_norm_bound<'a>(mats: impl IntoIterator<Item = &'a ComplexMatrix>) -> f64 {
    let mut acc: Option<DMatrix<f64>> = None;
    for m in mats {
        let n = m.nrows();
        let a = acc.get_or_insert_with(|| DMatrix::zeros(n, m.ncols()));
        for ((i, j), z) in m.indexed_iter() {
            a[(i, j)] += z.norm();
        }
    }
    match acc {
        None => 0.0,
        Some(a) => {
            let sym = (&a + a.transpose()) * 0.5;
            sym.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max)
        }
    }
}

/// Index sets of the connected components of the graph with an edge
/// wherever `m[(i, j)]` or `m[(j, i)]` is nonzero.
fn nonzero_blocks(m: &ComplexMatrix) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for ((i, j), z) in m.indexed_iter() {
        if i != j && *z != C64::new(0.0, 0.0) {
            let (a, b) = (root(&mut parent, i), root(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = root(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[slot[r]].push(i);
    }
    blocks
}

/// Pure state on a [`CompositeBasis`].
#[derive(Clone, Debug)]
pub struct StateVector {
    basis: CompositeBasis,
    amplitudes: Array1<C64>,
}

pub const NORM_TOLERANCE: f64 = 1e-10;

impl StateVector {
    /// Wraps amplitudes that must already be unit norm.
    pub fn new(basis: &CompositeBasis, amplitudes: Array1<C64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state has {} amplitudes, basis has {} states",
                amplitudes.len(),
                basis.dim()
            )));
        }
        let norm = l2_norm(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::param(
                "amplitudes",
                format!("state is not normalized (norm = {norm})"),
            ));
        }
        Ok(StateVector {
            basis: basis.clone(),
            amplitudes,
        })
    }

    /// Normalizes the given amplitudes.
    pub fn normalized(basis: &CompositeBasis, amplitudes: Array1<C64>) -> Result<Self> {
        let norm = l2_norm(&amplitudes);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::param("amplitudes", "cannot normalize a zero vector"));
        }
        Self::new(basis, amplitudes.mapv(|z| z / norm))
    }

    /// Amplitudes without a normalization check; used for integrator output.
    pub(crate) fn from_raw(basis: &CompositeBasis, amplitudes: Array1<C64>) -> Self {
        StateVector {
            basis: basis.clone(),
            amplitudes,
        }
    }

    pub fn basis(&self) -> &CompositeBasis {
        &self.basis
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, occupations: &[usize]) -> Option<C64> {
        self.basis
            .index_of(occupations)
            .map(|i| self.amplitudes[i])
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.amplitudes)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.basis.check_same(&other.basis, "inner product")?;
        Ok(self
            .amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn to_density(&self) -> DensityMatrix {
        let n = self.amplitudes.len();
        let mut rho = ComplexMatrix::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                rho[(i, j)] = self.amplitudes[i] * self.amplitudes[j].conj();
            }
        }
        DensityMatrix {
            basis: self.basis.clone(),
            entries: rho,
        }
    }

    /// Re-expresses the state in `target`, which must describe the same
    /// modes. Fails when amplitude above [`LEAKAGE_TOLERANCE`] has no home
    /// in `target`.
    pub fn transfer_to(&self, target: &CompositeBasis) -> Result<StateVector> {
        check_same_modes(&self.basis, target)?;
        let mut out = Array1::zeros(target.dim());
        for (i, occ) in self.basis.states().enumerate() {
            let amp = self.amplitudes[i];
            match target.index_of(occ) {
                Some(j) => out[j] = amp,
                None if amp.norm() > LEAKAGE_TOLERANCE => {
                    return Err(Error::SectorLeakage {
                        amplitude: amp.norm(),
                    })
                }
                None => {}
            }
        }
        Ok(StateVector {
            basis: target.clone(),
            amplitudes: out,
        })
    }
}

fn l2_norm(v: &Array1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn check_same_modes(a: &CompositeBasis, b: &CompositeBasis) -> Result<()> {
    if a.mode_dims() != b.mode_dims() {
        return Err(Error::DimensionMismatch(format!(
            "bases describe different modes: {:?} vs {:?}",
            a.mode_dims(),
            b.mode_dims()
        )));
    }
    Ok(())
}

/// Unit-amplitude basis ket `|n_0, n_1, ...>`.
pub fn basis_state(occupations: &[usize], basis: &CompositeBasis) -> Result<StateVector> {
    if occupations.len() != basis.num_modes() {
        return Err(Error::InvalidOccupation {
            occupations: occupations.to_vec(),
            reason: format!("expected {} modes", basis.num_modes()),
        });
    }
    if let Some((m, (&n, &d))) = occupations
        .iter()
        .zip(basis.mode_dims())
        .enumerate()
        .find(|(_, (&n, &d))| n >= d)
    {
        return Err(Error::InvalidOccupation {
            occupations: occupations.to_vec(),
            reason: format!("mode {m} holds {n} photons but is truncated at dimension {d}"),
        });
    }
    let index = basis
        .index_of(occupations)
        .ok_or_else(|| Error::InvalidOccupation {
            occupations: occupations.to_vec(),
            reason: format!(
                "total excitation exceeds the sector cutoff {:?}",
                basis.max_total_excitation()
            ),
        })?;
    let mut amps = Array1::zeros(basis.dim());
    amps[index] = C64::new(1.0, 0.0);
    Ok(StateVector::from_raw(basis, amps))
}

/// Moves a full-basis state into a sector-restricted basis.
pub fn project_to_sector(state: &StateVector, restricted: &CompositeBasis) -> Result<StateVector> {
    if state.basis().is_restricted() || !restricted.is_restricted() {
        return Err(Error::DimensionMismatch(
            "project_to_sector expects a full-basis state and a restricted target".into(),
        ));
    }
    state.transfer_to(restricted)
}

/// Moves a sector-restricted state into the full basis.
pub fn embed_from_sector(state: &StateVector, full: &CompositeBasis) -> Result<StateVector> {
    if !state.basis().is_restricted() || full.is_restricted() {
        return Err(Error::DimensionMismatch(
            "embed_from_sector expects a restricted-basis state and a full target".into(),
        ));
    }
    state.transfer_to(full)
}

/// Density operator on a [`CompositeBasis`].
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    basis: CompositeBasis,
    entries: ComplexMatrix,
}

/// Result of an on-demand physicality check of a density matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Physicality {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl Physicality {
    pub fn within(&self, trace_tol: f64, herm_tol: f64, eig_floor: f64) -> bool {
        self.trace_error <= trace_tol
            && self.hermiticity_error <= herm_tol
            && self.min_eigenvalue >= eig_floor
    }
}

impl DensityMatrix {
    pub fn new(basis: &CompositeBasis, entries: ComplexMatrix) -> Result<Self> {
        let d = basis.dim();
        if entries.dim() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "density matrix is {:?}, basis has {d} states",
                entries.dim()
            )));
        }
        Ok(DensityMatrix {
            basis: basis.clone(),
            entries,
        })
    }

    pub fn basis(&self) -> &CompositeBasis {
        &self.basis
    }

    pub fn entries(&self) -> &ComplexMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> ComplexMatrix {
        self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.diag().sum()
    }

    pub fn purity(&self) -> f64 {
        // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.entries)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        // Decay and number-conserving dynamics keep rho block diagonal, so
        // diagonalize each connected block of the nonzero pattern.
        let mut min = f64::INFINITY;
        for block in nonzero_blocks(&self.entries) {
            let m = DMatrix::from_fn(block.len(), block.len(), |a, b| {
                let (i, j) = (block[a], block[b]);
                0.5 * (self.entries[(i, j)] + self.entries[(j, i)].conj())
            });
            min = m.symmetric_eigenvalues().iter().copied().fold(min, f64::min);
        }
        min
    }

    pub fn physicality(&self) -> Physicality {
        Physicality {
            trace_error: (self.trace() - C64::new(1.0, 0.0)).norm(),
            hermiticity_error: self.hermiticity_error(),
            min_eigenvalue: self.min_eigenvalue(),
        }
    }

    /// `Tr(rho * op)`.
    pub fn expectation(&self, op: &ComplexMatrix) -> Result<C64> {
        if op.dim() != self.entries.dim() {
            return Err(Error::DimensionMismatch(format!(
                "operator {:?} vs density matrix {:?}",
                op.dim(),
                self.entries.dim()
            )));
        }
        let n = op.nrows();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                acc += self.entries[(i, k)] * op[(k, i)];
            }
        }
        Ok(acc)
    }

    /// `<psi|rho|psi>` as a complex number.
    pub fn overlap(&self, target: &StateVector) -> Result<C64> {
        self.basis.check_same(target.basis(), "overlap")?;
        let psi = target.amplitudes();
        let rho_psi = self.entries.dot(psi);
        Ok(psi.iter().zip(rho_psi.iter()).map(|(a, b)| a.conj() * b).sum())
    }

    /// Reduced state of `keep` (mode indices, in the given order), expressed
    /// in the full basis of those modes.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        for &m in keep {
            self.basis.check_mode(m)?;
        }
        for (i, &m) in keep.iter().enumerate() {
            if keep[..i].contains(&m) {
                return Err(Error::param("keep", format!("mode {m} listed twice")));
            }
        }
        let dims: Vec<usize> = keep.iter().map(|&m| self.basis.mode_dims()[m]).collect();
        let reduced_basis = CompositeBasis::full(&dims)?;
        let traced: Vec<usize> = (0..self.basis.num_modes())
            .filter(|m| !keep.contains(m))
            .collect();

        let n = self.basis.dim();
        let kept_index: Vec<usize> = (0..n)
            .map(|i| {
                let occ = self.basis.occupations(i);
                let sub: Vec<usize> = keep.iter().map(|&m| occ[m]).collect();
                reduced_basis.index_of(&sub).expect("kept occupations are in range")
            })
            .collect();
        let env_key: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let occ = self.basis.occupations(i);
                traced.iter().map(|&m| occ[m]).collect()
            })
            .collect();

        let mut out = ComplexMatrix::zeros((reduced_basis.dim(), reduced_basis.dim()));
        for i in 0..n {
            for j in 0..n {
                if env_key[i] == env_key[j] {
                    out[(kept_index[i], kept_index[j])] += self.entries[(i, j)];
                }
            }
        }
        DensityMatrix::new(&reduced_basis, out)
    }

    /// Re-expresses the density matrix in another basis over the same modes.
    pub fn transfer_to(&self, target: &CompositeBasis) -> Result<DensityMatrix> {
        check_same_modes(&self.basis, target)?;
        let map: Vec<Option<usize>> = self.basis.states().map(|s| target.index_of(s)).collect();
        let mut out = ComplexMatrix::zeros((target.dim(), target.dim()));
        for (i, ti) in map.iter().enumerate() {
            for (j, tj) in map.iter().enumerate() {
                let v = self.entries[(i, j)];
                match (ti, tj) {
                    (Some(a), Some(b)) => out[(*a, *b)] = v,
                    _ if v.norm() > LEAKAGE_TOLERANCE => {
                        return Err(Error::SectorLeakage { amplitude: v.norm() })
                    }
                    _ => {}
                }
            }
        }
        DensityMatrix::new(target, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
        let (ra, ca) = a.dim();
        let (rb, cb) = b.dim();
        let mut out = ComplexMatrix::zeros((ra * rb, ca * cb));
        for i in 0..ra {
            for j in 0..ca {
                for k in 0..rb {
                    for l in 0..cb {
                        out[(i * rb + k, j * cb + l)] = a[(i, j)] * b[(k, l)];
                    }
                }
            }
        }
        out
    }

    fn single_mode_lowering(d: usize) -> ComplexMatrix {
        let mut a = ComplexMatrix::zeros((d, d));
        for n in 1..d {
            a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
        }
        a
    }

    fn kron_embed(mode: usize, dims: &[usize]) -> ComplexMatrix {
        dims.iter()
            .enumerate()
            .map(|(m, &d)| {
                if m == mode {
                    single_mode_lowering(d)
                } else {
                    ComplexMatrix::eye(d)
                }
            })
            .reduce(|acc, f| kron(&acc, &f))
            .unwrap()
    }

    #[test]
    fn single_mode_ladder_elements() {
        let b = CompositeBasis::full(&[2]).unwrap();
        let a = annihilation_op(0, &b).unwrap();
        assert_eq!(a[(0, 1)], C64::new(1.0, 0.0));
        assert_eq!(a[(1, 0)], C64::new(0.0, 0.0));

        let b3 = CompositeBasis::full(&[3]).unwrap();
        let a3 = annihilation_op(0, &b3).unwrap();
        assert_abs_diff_eq!(a3[(1, 2)].re, std::f64::consts::SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn embedded_ops_match_kronecker_products() {
        for dims in [vec![2, 2], vec![3, 2, 3], vec![2, 3, 2, 2]] {
            let basis = CompositeBasis::full(&dims).unwrap();
            for mode in 0..dims.len() {
                let ours = annihilation_op(mode, &basis).unwrap();
                let reference = kron_embed(mode, &dims);
                let diff = max_abs(&(&ours - &reference));
                assert!(diff <= 1e-14, "dims {dims:?} mode {mode}: {diff}");
            }
        }
    }

    #[test]
    fn number_op_is_adag_a() {
        let basis = CompositeBasis::full(&[3, 2, 3]).unwrap();
        for mode in 0..3 {
            let a = annihilation_op(mode, &basis).unwrap();
            let n = number_op(mode, &basis).unwrap();
            assert!(max_abs(&(dagger(&a).dot(&a) - &n)) < 1e-14);
        }
        let single = CompositeBasis::full(&[3]).unwrap();
        let n = number_op(0, &single).unwrap();
        let diag: Vec<f64> = n.diag().iter().map(|z| z.re).collect();
        assert_eq!(diag, vec![0.0, 1.0, 2.0]);

        let two = CompositeBasis::full(&[2, 2]).unwrap();
        let tr: C64 = number_op(0, &two).unwrap().diag().sum();
        assert_eq!(tr.re, 2.0);
    }

    #[test]
    fn invalid_mode_is_rejected() {
        let basis = CompositeBasis::full(&[2, 2]).unwrap();
        assert!(matches!(
            annihilation_op(2, &basis),
            Err(Error::InvalidMode { mode: 2, modes: 2 })
        ));
        assert!(number_op(5, &basis).is_err());
    }

    #[test]
    fn canonical_commutator_below_top_level() {
        let dims = [3, 4, 2];
        let basis = CompositeBasis::full(&dims).unwrap();
        for mode in 0..dims.len() {
            let a = annihilation_op(mode, &basis).unwrap();
            let c = commutator(&a, &dagger(&a));
            for i in 0..basis.dim() {
                for j in 0..basis.dim() {
                    let top = basis.occupations(i)[mode] == dims[mode] - 1;
                    if top && i == j {
                        // truncation artifact: [a, a+] = -(d-1) on the top level
                        assert_abs_diff_eq!(c[(i, j)].re, -((dims[mode] - 1) as f64), epsilon = 1e-12);
                        continue;
                    }
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(c[(i, j)].re, expected, epsilon = 1e-12);
                    assert_abs_diff_eq!(c[(i, j)].im, 0.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn distinct_modes_commute() {
        let basis = CompositeBasis::full(&[3, 3, 2]).unwrap();
        for m in 0..3 {
            for k in 0..3 {
                if m == k {
                    continue;
                }
                let a = annihilation_op(m, &basis).unwrap();
                let b = annihilation_op(k, &basis).unwrap();
                assert_eq!(max_abs(&commutator(&a, &b)), 0.0);
                assert_eq!(max_abs(&commutator(&a, &dagger(&b))), 0.0);
            }
        }
    }

    #[test]
    fn basis_state_indexing() {
        let basis = CompositeBasis::full(&[2, 2, 2]).unwrap();
        let zero = basis_state(&[0, 0, 0], &basis).unwrap();
        assert_eq!(zero.amplitudes()[0], C64::new(1.0, 0.0));
        let s = basis_state(&[1, 0, 0], &basis).unwrap();
        assert_eq!(s.amplitudes()[4], C64::new(1.0, 0.0));
        assert_eq!(basis.index_of(&[1, 0, 0]), Some(4));
        assert!(basis_state(&[2, 0, 0], &basis).is_err());
        assert!(basis_state(&[0, 0], &basis).is_err());
    }

    #[test]
    fn restricted_basis_size_and_order() {
        // tuples over 5 modes with sum <= 2: 1 + 5 + (5 + 10) = 21
        let brute = row_major_tuples(&[3; 5])
            .into_iter()
            .filter(|s| s.iter().sum::<usize>() <= 2)
            .count();
        assert_eq!(brute, 21);
        let basis = CompositeBasis::restricted(&[3; 5], 2).unwrap();
        assert_eq!(basis.dim(), 21);
        assert_eq!(basis.occupations(0), &[0, 0, 0, 0, 0]);
        // sector 1 in row-major order: last mode first
        assert_eq!(basis.occupations(1), &[0, 0, 0, 0, 1]);
        assert_eq!(basis.occupations(5), &[1, 0, 0, 0, 0]);
        for i in 1..basis.dim() {
            assert!(basis.total_excitation(i - 1) <= basis.total_excitation(i));
        }
        // sector-2 states, row-major: index of (1,0,1,0,0) among them
        let sector2: Vec<Vec<usize>> = row_major_tuples(&[3; 5])
            .into_iter()
            .filter(|s| s.iter().sum::<usize>() == 2)
            .collect();
        let pos = sector2.iter().position(|s| s == &[1, 0, 1, 0, 0]).unwrap();
        assert_eq!(basis.index_of(&[1, 0, 1, 0, 0]), Some(6 + pos));
        assert!(basis_state(&[1, 0, 1, 0, 0], &basis).is_ok());
        assert!(basis_state(&[1, 1, 1, 0, 0], &basis).is_err());
    }

    #[test]
    fn index_maps_are_inverse() {
        for basis in [
            CompositeBasis::full(&[2, 3, 4]).unwrap(),
            CompositeBasis::restricted(&[3, 3, 3, 3], 2).unwrap(),
        ] {
            for i in 0..basis.dim() {
                assert_eq!(basis.index_of(basis.occupations(i)), Some(i));
            }
        }
    }

    #[test]
    fn restricted_ladder_maps_sector_down() {
        let basis = CompositeBasis::restricted(&[3, 3, 3], 2).unwrap();
        let a = annihilation_op(1, &basis).unwrap();
        for col in 0..basis.dim() {
            for row in 0..basis.dim() {
                if a[(row, col)].norm() > 0.0 {
                    assert_eq!(basis.total_excitation(row) + 1, basis.total_excitation(col));
                }
            }
        }
    }

    #[test]
    fn sector_round_trip_and_leakage() {
        let full = CompositeBasis::full(&[3, 3, 3]).unwrap();
        let sector = CompositeBasis::restricted(&[3, 3, 3], 1).unwrap();
        let amps = Array1::from_iter((0..full.dim()).map(|i| {
            if full.total_excitation(i) <= 1 {
                C64::new(i as f64 + 1.0, 0.5 * i as f64)
            } else {
                C64::new(0.0, 0.0)
            }
        }));
        let psi = StateVector::normalized(&full, amps).unwrap();
        let projected = project_to_sector(&psi, &sector).unwrap();
        let back = embed_from_sector(&projected, &full).unwrap();
        let dev = (psi.amplitudes() - back.amplitudes())
            .iter()
            .fold(0.0f64, |m, z| m.max(z.norm()));
        assert!(dev < 1e-12);

        let two = basis_state(&[2, 0, 0], &full).unwrap();
        assert!(matches!(
            project_to_sector(&two, &sector),
            Err(Error::SectorLeakage { .. })
        ));
    }

    #[test]
    fn partial_trace_of_product_state() {
        let basis = CompositeBasis::full(&[2, 2, 2]).unwrap();
        let amps = Array1::from_iter(basis.states().map(|s| match s {
            [0, 1, 0] => C64::new(1.0, 0.0),
            [1, 0, 0] => C64::new(0.0, 1.0),
            _ => C64::new(0.0, 0.0),
        }));
        let psi = StateVector::normalized(&basis, amps).unwrap();
        let reduced = psi.to_density().partial_trace(&[0, 1]).unwrap();
        assert_eq!(reduced.basis().mode_dims(), &[2, 2]);
        assert_abs_diff_eq!(reduced.purity(), 1.0, epsilon = 1e-14);
        let single = reduced.partial_trace(&[0]).unwrap();
        assert_abs_diff_eq!(single.entries()[(0, 0)].re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(single.purity(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn density_physicality() {
        let basis = CompositeBasis::full(&[2, 2]).unwrap();
        let rho = basis_state(&[1, 0], &basis).unwrap().to_density();
        let p = rho.physicality();
        assert!(p.within(1e-12, 1e-12, -1e-12));
        assert_abs_diff_eq!(p.min_eigenvalue, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn eigenvalues_of_large_sparse_density_matrices() {
        let basis = CompositeBasis::full(&[3; 5]).unwrap();
        let n = basis.dim();
        let mut m = ComplexMatrix::zeros((n, n));
        let (a, b) = (basis.index_of(&[1, 0, 1, 0, 0]).unwrap(), basis.index_of(&[0, 1, 1, 0, 0]).unwrap());
        let c = basis.index_of(&[0, 0, 1, 0, 0]).unwrap();
        // Hermitian but not positive: the (a, b) block has eigenvalues 0.7 and -0.1
        m[(a, a)] = C64::new(0.3, 0.0);
        m[(b, b)] = C64::new(0.3, 0.0);
        m[(a, b)] = C64::new(0.0, 0.4);
        m[(b, a)] = C64::new(0.0, -0.4);
        m[(c, c)] = C64::new(0.4, 0.0);
        let rho = DensityMatrix::new(&basis, m).unwrap();
        assert_abs_diff_eq!(rho.min_eigenvalue(), -0.1, epsilon = 1e-12);

        let blocks = nonzero_blocks(rho.entries());
        assert_eq!(blocks.len(), n - 1);
        assert!(blocks.iter().any(|blk| blk == &vec![a.min(b), a.max(b)]));
    }

    #[test]
    fn modulus_bound_dominates_spectral_norm() {
        let basis = CompositeBasis::full(&[3, 3]).unwrap();
        let a = annihilation_op(0, &basis).unwrap();
        let hop = creation_op(1, &basis).unwrap().dot(&a);
        let h = &hop + &dagger(&hop);
        let bound = modulus_norm_bound([&hop, &dagger(&hop)]);
        // spectrum of b+a + a+b on two photons is {-2, -1, 0, 1, 2}
        assert_abs_diff_eq!(bound, 2.0, epsilon = 1e-12);
        let spectral = DMatrix::from_fn(9, 9, |i, j| h[(i, j)]).symmetric_eigenvalues().amax();
        assert!(bound >= spectral - 1e-12);
        assert_eq!(modulus_norm_bound(std::iter::empty::<&ComplexMatrix>()), 0.0);
    }
}
