use std::io::{self, Read, Write};

use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};

/// Default memory cap on the number of atoms (a 1024 x 1024 state).
pub const DEFAULT_MAX_ATOMS: usize = 10;

/// Dense `2^N x 2^N` density matrix, row-major.
///
/// Basis index bit `n` set means atom `n` is excited, so index 0 is the
/// collective ground state and `dim - 1` the fully inverted state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T> {
    n_atoms: usize,
    data: Vec<Cplx<T>>,
}

impl<T: Real> DensityMatrix<T> {
    /// Wraps raw row-major entries; only the shape is checked.
    pub fn from_raw(n_atoms: usize, data: Vec<Cplx<T>>) -> Result<Self> {
        let dim = 1usize << n_atoms;
        if data.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "{n_atoms} atoms need {} entries, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(Self { n_atoms, data })
    }

    /// `|psi><psi|` for a normalised state vector.
    pub fn from_pure(psi: &[Cplx<T>]) -> Result<Self> {
        let n_atoms = atoms_for_dim(psi.len())?;
        check_normalised(psi)?;
        let dim = psi.len();
        let mut data = vec![Cplx::zero(); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = psi[i] * psi[j].conj();
            }
        }
        Ok(Self { n_atoms, data })
    }

    /// Projector onto a single basis state.
    pub fn basis_state(n_atoms: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_atoms;
        if index >= dim {
            return Err(Error::Dimension(format!("basis index {index} >= {dim}")));
        }
        let mut data = vec![Cplx::zero(); dim * dim];
        data[index * dim + index] = Cplx::one();
        Ok(Self { n_atoms, data })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        1 << self.n_atoms
    }

    pub fn as_slice(&self) -> &[Cplx<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Cplx<T>] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<Cplx<T>> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Cplx<T> {
        self.data[i * self.dim() + j]
    }

    pub fn trace(&self) -> Cplx<T> {
        let dim = self.dim();
        (0..dim).map(|i| self.data[i * dim + i]).fold(Cplx::zero(), |a, b| a + b)
    }

    /// `max |rho - rho^dagger|` over all entries.
    pub fn hermiticity_residue(&self) -> T {
        let dim = self.dim();
        let mut worst = T::zero();
        for i in 0..dim {
            for j in i..dim {
                let d = (self.data[i * dim + j] - self.data[j * dim + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Replaces the state with `(rho + rho^dagger) / 2`.
    pub fn hermitize(&mut self) {
        let dim = self.dim();
        let half = T::of(0.5);
        for i in 0..dim {
            let d = self.data[i * dim + i];
            self.data[i * dim + i] = Cplx::new(d.re, T::zero());
            for j in (i + 1)..dim {
                let a = self.data[i * dim + j];
                let b = self.data[j * dim + i];
                let m = (a + b.conj()).scale(half);
                self.data[i * dim + j] = m;
                self.data[j * dim + i] = m.conj();
            }
        }
    }

    /// Divides every entry by the real part of the trace.
    pub fn normalize_trace(&mut self) {
        let tr = self.trace().re;
        let inv = T::one() / tr;
        for x in &mut self.data {
            *x = x.scale(inv);
        }
    }

    /// `Tr rho^2`.
    pub fn purity(&self) -> T {
        // Tr(rho rho) = sum_ij rho_ij rho_ji; for Hermitian rho this is sum |rho_ij|^2
        let dim = self.dim();
        let mut acc = T::zero();
        for i in 0..dim {
            for j in 0..dim {
                acc = acc + (self.data[i * dim + j] * self.data[j * dim + i]).re;
            }
        }
        acc
    }

    /// `<psi| rho |psi>` (real part) for a normalised `psi`.
    pub fn expectation(&self, psi: &[Cplx<T>]) -> Result<T> {
        if psi.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "state vector of length {} against dimension {}",
                psi.len(),
                self.dim()
            )));
        }
        check_normalised(psi)?;
        let dim = self.dim();
        let mut acc = Cplx::zero();
        for i in 0..dim {
            if psi[i].is_zero() {
                continue;
            }
            let row = &self.data[i * dim..(i + 1) * dim];
            let inner: Cplx<T> = row
                .iter()
                .zip(psi)
                .fold(Cplx::zero(), |a, (r, p)| a + *r * *p);
            acc = acc + psi[i].conj() * inner;
        }
        Ok(acc.re)
    }

    /// Eigenvalues of the Hermitian part, ascending, in double precision.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let dim = self.dim();
        let m = nalgebra::DMatrix::from_fn(dim, dim, |i, j| {
            let a = self.get(i, j);
            let b = self.get(j, i).conj();
            Complex64::new(
                0.5 * (a.re + b.re).to_f64_lossless(),
                0.5 * (a.im + b.im).to_f64_lossless(),
            )
        });
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Checks the full set of state invariants: Hermiticity, unit trace and
    /// positivity (the eigen-decomposition makes this expensive for large N).
    pub fn validate(&self, herm_tol: f64, trace_tol: f64, psd_tol: f64) -> Result<()> {
        let h = self.hermiticity_residue().to_f64_lossless();
        if !(h <= herm_tol) {
            return Err(Error::Invariant { t: f64::NAN, what: "hermiticity residue", value: h, bound: herm_tol });
        }
        let tr = self.trace();
        let drift = (tr - Cplx::one()).norm().to_f64_lossless();
        if !(drift <= trace_tol) {
            return Err(Error::Invariant { t: f64::NAN, what: "trace drift", value: drift, bound: trace_tol });
        }
        let ev = self.min_eigenvalue();
        if !(ev >= -psd_tol) {
            return Err(Error::Invariant { t: f64::NAN, what: "negative eigenvalue", value: -ev, bound: psd_tol });
        }
        Ok(())
    }

    /// Binary dump: `dim` as little-endian `u64`, then row-major `(re, im)`
    /// pairs as little-endian `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&(self.dim() as u64).to_le_bytes())?;
        for z in &self.data {
            w.write_all(&z.re.to_f64_lossless().to_le_bytes())?;
            w.write_all(&z.im.to_f64_lossless().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> io::Result<Self> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let dim = u64::from_le_bytes(word) as usize;
        let n_atoms = atoms_for_dim(dim).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        let mut data = Vec::with_capacity(dim * dim);
        for _ in 0..dim * dim {
            r.read_exact(&mut word)?;
            let re = f64::from_le_bytes(word);
            r.read_exact(&mut word)?;
            let im = f64::from_le_bytes(word);
            data.push(Cplx::new(T::of(re), T::of(im)));
        }
        Ok(Self { n_atoms, data })
    }
}

/// `|g...g><g...g|`, guarded by the atom-number cap.
pub fn initial_ground_state<T: Real>(n_atoms: usize, max_atoms: usize) -> Result<DensityMatrix<T>> {
    if n_atoms == 0 {
        return Err(Error::Domain("need at least one atom".into()));
    }
    if n_atoms > max_atoms {
        return Err(Error::TooManyAtoms { n_atoms, cap: max_atoms });
    }
    DensityMatrix::basis_state(n_atoms, 0)
}

/// Two-atom collective states `(|eg> +/- |ge>) / sqrt 2`.
///
/// Atom 0 is the low bit, so `|eg>` is index 1 and `|ge>` index 2.
pub fn pair_state<T: Real>(symmetric: bool) -> Vec<Cplx<T>> {
    let s = T::FRAC_1_SQRT_2();
    let mut v = vec![Cplx::zero(); 4];
    v[1] = Cplx::new(s, T::zero());
    v[2] = Cplx::new(if symmetric { s } else { -s }, T::zero());
    v
}

fn atoms_for_dim(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::Dimension(format!("dimension {dim} is not 2^N with N >= 1")));
    }
    Ok(dim.trailing_zeros() as usize)
}

fn check_normalised<T: Real>(psi: &[Cplx<T>]) -> Result<()> {
    let norm: T = psi.iter().map(|z| z.norm_sqr()).sum();
    let tol = T::of(1e-10).max(T::epsilon() * T::of(100.0));
    if (norm - T::one()).abs() > tol {
        return Err(Error::Domain(format!("state vector not normalised (|psi|^2 = {norm})")));
    }
    Ok(())
}
