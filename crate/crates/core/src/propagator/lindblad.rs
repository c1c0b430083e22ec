use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::greens::CouplingMatrices;
use crate::scalar::{Cplx, Real};

use super::operator::{CollectiveTerms, SparseOperator};
use super::state::DensityMatrix;

/// Row-parallel evaluation kicks in from this Hilbert-space dimension on.
const PARALLEL_DIM: usize = 64;

/// Matrix-free Lindblad generator
///
/// ```text
/// d rho/dt = -i [H, rho] + sum_{m,n} Gamma_mn (s-_n rho s+_m - 1/2 {s+_m s-_n, rho})
///          = -i (H_eff rho - rho H_eff^dagger) + sum_{m,n} Gamma_mn s-_n rho s+_m
/// ```
///
/// with `H_eff = H - i/2 sum Gamma_mn s+_m s-_n`. The recycling term is applied
/// by index arithmetic: `(s-_n rho s+_m)_{ij} = rho_{i+e_n, j+e_m}` when atom
/// `n` is unexcited in `i` and atom `m` unexcited in `j`.
#[derive(Debug, Clone)]
pub struct Generator<T> {
    n_atoms: usize,
    heff: SparseOperator<T>,
    gamma: Vec<T>,
    /// For each basis index, the `(atom, index | 1 << atom)` pairs over unexcited atoms.
    raised_offsets: Vec<usize>,
    raised: Vec<(usize, usize)>,
}

impl<T: Real> Generator<T> {
    pub fn new(hamiltonian: &SparseOperator<T>, couplings: &CouplingMatrices<T>) -> Result<Self> {
        let n = couplings.n_atoms();
        let dim = 1usize << n;
        if hamiltonian.dim() != dim {
            return Err(Error::Dimension(format!(
                "Hamiltonian dimension {} against {n} atoms",
                hamiltonian.dim()
            )));
        }
        let half = T::of(0.5);
        let pair: Vec<Cplx<T>> = couplings
            .gamma_matrix()
            .iter()
            .map(|&g| Cplx::new(T::zero(), -half * g))
            .collect();
        let zeros = vec![Cplx::zero(); n];
        let damping = CollectiveTerms { n_atoms: n, pair: &pair, raise: &zeros, lower: &zeros }.assemble()?;
        let heff = hamiltonian.add(&damping)?;

        let mut raised_offsets = Vec::with_capacity(dim + 1);
        let mut raised = Vec::new();
        raised_offsets.push(0);
        for i in 0..dim {
            for a in 0..n {
                if i >> a & 1 == 0 {
                    raised.push((a, i | 1 << a));
                }
            }
            raised_offsets.push(raised.len());
        }
        Ok(Self {
            n_atoms: n,
            heff,
            gamma: couplings.gamma_matrix().to_vec(),
            raised_offsets,
            raised,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        1 << self.n_atoms
    }

    pub fn effective_hamiltonian(&self) -> &SparseOperator<T> {
        &self.heff
    }

    #[inline]
    fn raised(&self, i: usize) -> &[(usize, usize)] {
        &self.raised[self.raised_offsets[i]..self.raised_offsets[i + 1]]
    }

    /// Writes `L[rho]` into `out`; both are row-major `dim x dim`.
    pub fn apply(&self, rho: &[Cplx<T>], out: &mut [Cplx<T>]) {
        let dim = self.dim();
        debug_assert_eq!(rho.len(), dim * dim);
        debug_assert_eq!(out.len(), dim * dim);
        if dim >= PARALLEL_DIM {
            out.par_chunks_mut(dim)
                .enumerate()
                .for_each(|(i, row)| self.apply_row(rho, i, row));
        } else {
            for (i, row) in out.chunks_mut(dim).enumerate() {
                self.apply_row(rho, i, row);
            }
        }
    }

    fn apply_row(&self, rho: &[Cplx<T>], i: usize, out: &mut [Cplx<T>]) {
        let dim = self.dim();
        let n = self.n_atoms;
        let rho_i = &rho[i * dim..(i + 1) * dim];

        // -i (H_eff rho)_{i,:}
        out.iter_mut().for_each(|x| *x = Cplx::zero());
        for (k, c) in self.heff.row(i) {
            let f = Cplx::new(c.im, -c.re);
            let rho_k = &rho[k * dim..(k + 1) * dim];
            for (o, r) in out.iter_mut().zip(rho_k) {
                *o = *o + f * *r;
            }
        }

        for j in 0..dim {
            // +i (rho H_eff^dagger)_{ij} = i sum_k conj(H_eff[j,k]) rho_{ik}
            let mut acc: Cplx<T> = Cplx::zero();
            for (k, c) in self.heff.row(j) {
                acc = acc + c.conj() * rho_i[k];
            }
            let mut total = Cplx::new(-acc.im, acc.re);

            // recycling
            for &(na, a) in self.raised(i) {
                let rho_a = &rho[a * dim..(a + 1) * dim];
                for &(mb, b) in self.raised(j) {
                    total = total + rho_a[b].scale(self.gamma[mb * n + na]);
                }
            }
            out[j] = out[j] + total;
        }
    }
}

/// One-shot evaluation of the Lindblad right-hand side.
pub fn lindblad_rhs<T: Real>(
    rho: &DensityMatrix<T>,
    hamiltonian: &SparseOperator<T>,
    couplings: &CouplingMatrices<T>,
) -> Result<DensityMatrix<T>> {
    if rho.n_atoms() != couplings.n_atoms() {
        return Err(Error::Dimension(format!(
            "state has {} atoms, couplings {}",
            rho.n_atoms(),
            couplings.n_atoms()
        )));
    }
    let gen = Generator::new(hamiltonian, couplings)?;
    let mut out = vec![Cplx::zero(); rho.as_slice().len()];
    gen.apply(rho.as_slice(), &mut out);
    DensityMatrix::from_raw(rho.n_atoms(), out)
}
