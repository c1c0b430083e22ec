use num_traits::Zero;

use crate::error::{Error, Result};
use crate::greens::{AtomConfiguration, CouplingMatrices};
use crate::scalar::{cis, dot3, norm3, Cplx, Real, Vec3};

use super::operator::{CollectiveTerms, SparseOperator};

/// Square resonant pulse, switched on at `t = 0` and off at `t_off`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivePulse<T> {
    /// Rabi frequency in `Gamma0`.
    pub rabi: T,
    /// Laser minus atom frequency in `Gamma0`.
    pub detuning: T,
    /// Unit propagation direction of the laser.
    pub k_hat: Vec3<T>,
    /// Switch-off time in `1/Gamma0`.
    pub t_off: T,
}

impl<T: Real> DrivePulse<T> {
    pub fn new(rabi: T, detuning: T, k_hat: Vec3<T>, t_off: T) -> Result<Self> {
        let p = Self { rabi, detuning, k_hat, t_off };
        p.validate()?;
        Ok(p)
    }

    /// Resonant pulse along `+y`.
    pub fn resonant(rabi: T, t_off: T) -> Result<Self> {
        Self::new(rabi, T::zero(), [T::zero(), T::one(), T::zero()], t_off)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rabi >= T::zero()) || !self.rabi.is_finite() {
            return Err(Error::Domain(format!("rabi must be >= 0, got {}", self.rabi)));
        }
        if !self.detuning.is_finite() {
            return Err(Error::Domain("detuning must be finite".into()));
        }
        let tol = T::of(1e-12).max(T::epsilon() * T::of(64.0));
        if !((norm3(&self.k_hat) - T::one()).abs() <= tol) {
            return Err(Error::Domain("laser direction must be a unit vector".into()));
        }
        if !(self.t_off >= T::zero()) || !self.t_off.is_finite() {
            return Err(Error::Domain(format!("t_off must be >= 0, got {}", self.t_off)));
        }
        Ok(())
    }

    /// Laser phase `k . R` at position `r` (in `lambda0`).
    pub fn phase_at(&self, r: &Vec3<T>) -> T {
        T::TAU() * dot3(&self.k_hat, r)
    }
}

fn drive_terms<T: Real>(
    config: &AtomConfiguration<T>,
    drive: &DrivePulse<T>,
    drive_on: bool,
) -> (Vec<Cplx<T>>, Vec<Cplx<T>>) {
    let n = config.n_atoms();
    if !drive_on || drive.rabi == T::zero() {
        return (vec![Cplx::zero(); n], vec![Cplx::zero(); n]);
    }
    let half = drive.rabi * T::of(0.5);
    let raise: Vec<Cplx<T>> = config
        .positions()
        .iter()
        .map(|r| cis(drive.phase_at(r)).scale(half))
        .collect();
    let lower = raise.iter().map(|z| z.conj()).collect();
    (raise, lower)
}

fn check_sizes<T: Real>(config: &AtomConfiguration<T>, couplings: &CouplingMatrices<T>) -> Result<()> {
    if config.n_atoms() != couplings.n_atoms() {
        return Err(Error::Dimension(format!(
            "configuration has {} atoms, couplings {}",
            config.n_atoms(),
            couplings.n_atoms()
        )));
    }
    Ok(())
}

/// Rotating-frame Hamiltonian
///
/// ```text
/// H = -Delta sum_n s+_n s-_n + sum_{m != n} J_mn s+_m s-_n
///     + [drive_on] 1/2 sum_n (Omega e^{i k.R_n} s+_n + h.c.)
/// ```
pub fn build_hamiltonian<T: Real>(
    config: &AtomConfiguration<T>,
    couplings: &CouplingMatrices<T>,
    drive: &DrivePulse<T>,
    drive_on: bool,
) -> Result<SparseOperator<T>> {
    check_sizes(config, couplings)?;
    let n = config.n_atoms();
    let mut pair = vec![Cplx::zero(); n * n];
    for m in 0..n {
        for k in 0..n {
            pair[m * n + k] = if m == k {
                Cplx::new(-drive.detuning, T::zero())
            } else {
                Cplx::new(couplings.j(m, k), T::zero())
            };
        }
    }
    let (raise, lower) = drive_terms(config, drive, drive_on);
    CollectiveTerms { n_atoms: n, pair: &pair, raise: &raise, lower: &lower }.assemble()
}

/// Non-Hermitian effective Hamiltonian `H - i/2 sum_{m,n} Gamma_mn s+_m s-_n`.
pub fn build_effective_hamiltonian<T: Real>(
    config: &AtomConfiguration<T>,
    couplings: &CouplingMatrices<T>,
    drive: &DrivePulse<T>,
    drive_on: bool,
) -> Result<SparseOperator<T>> {
    check_sizes(config, couplings)?;
    let n = config.n_atoms();
    let half = T::of(0.5);
    let mut pair = vec![Cplx::zero(); n * n];
    for m in 0..n {
        for k in 0..n {
            let coherent = if m == k { -drive.detuning } else { couplings.j(m, k) };
            pair[m * n + k] = Cplx::new(coherent, -half * couplings.gamma(m, k));
        }
    }
    let (raise, lower) = drive_terms(config, drive, drive_on);
    CollectiveTerms { n_atoms: n, pair: &pair, raise: &raise, lower: &lower }.assemble()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::{build_couplings, linear_dipole, sigma_minus_dipole};

    fn single() -> (AtomConfiguration<f64>, CouplingMatrices<f64>) {
        let cfg = AtomConfiguration::new(vec![[0.0; 3]], linear_dipole([0.0, 0.0, 1.0]).unwrap()).unwrap();
        let c = build_couplings(&cfg).unwrap();
        (cfg, c)
    }

    #[test]
    fn undriven_single_atom_is_zero() {
        let (cfg, c) = single();
        let h = build_hamiltonian(&cfg, &c, &DrivePulse::resonant(0.0, 1.0).unwrap(), true).unwrap();
        assert!(h.to_dense().iter().all(|z| z.is_zero()));
    }

    #[test]
    fn single_atom_rabi_is_half_sigma_x() {
        let (cfg, c) = single();
        let h = build_hamiltonian(&cfg, &c, &DrivePulse::resonant(1.0, 1.0).unwrap(), true).unwrap();
        let d = h.to_dense();
        // basis {g, e}: <e|H|g> = 1/2
        assert_eq!(d[0], Cplx::zero());
        assert_eq!(d[3], Cplx::zero());
        assert!((d[2] - Cplx::new(0.5, 0.0)).norm() < 1e-15);
        assert!((d[1] - Cplx::new(0.5, 0.0)).norm() < 1e-15);
        let off = build_hamiltonian(&cfg, &c, &DrivePulse::resonant(1.0, 1.0).unwrap(), false).unwrap();
        assert_eq!(off.nnz(), 0);
    }

    #[test]
    fn single_excitation_block_splits_by_j() {
        let d = sigma_minus_dipole([0.0, 1.0, 0.0]).unwrap();
        let cfg = AtomConfiguration::new(vec![[0.0; 3], [1.0 / 3.0, 0.0, 0.0]], d).unwrap();
        let c = build_couplings(&cfg).unwrap();
        let delta: f64 = 0.7;
        let drive = DrivePulse::new(0.0, delta, [0.0, 1.0, 0.0], 1.0).unwrap();
        let h = build_hamiltonian(&cfg, &c, &drive, true).unwrap().to_dense();
        // block on {|eg> = 1, |ge> = 2}: [[-D, J], [J, -D]] -> -D +/- J
        let (a, b, cc) = (h[1 * 4 + 1].re, h[1 * 4 + 2].re, h[2 * 4 + 2].re);
        let mean = 0.5 * (a + cc);
        let split = (0.25 * (a - cc).powi(2) + b * b).sqrt();
        assert!((mean + delta).abs() < 1e-14);
        assert!((split - c.j(0, 1).abs()).abs() < 1e-14);
        assert!((h[3 * 4 + 3].re + 2.0 * delta).abs() < 1e-14);
    }

    #[test]
    fn hermitian_with_phases() {
        let d = sigma_minus_dipole([0.0, 1.0, 0.0]).unwrap();
        let pos = vec![[0.0; 3], [0.1, 0.2, 0.3], [-0.3, 0.25, 0.1], [0.4, -0.1, 0.05]];
        let cfg = AtomConfiguration::new(pos, d).unwrap();
        let c = build_couplings(&cfg).unwrap();
        let drive = DrivePulse::new(6.1, -0.3, [0.0, 0.6, 0.8], 2.0).unwrap();
        let h = build_hamiltonian(&cfg, &c, &drive, true).unwrap();
        assert!(h.hermiticity_residue() < 1e-12);
    }

    #[test]
    fn mismatched_sizes() {
        let (cfg, _) = single();
        let two = AtomConfiguration::new(vec![[0.0; 3], [0.5, 0.0, 0.0]], *cfg.dipole()).unwrap();
        let c2 = build_couplings(&two).unwrap();
        let drive = DrivePulse::resonant(1.0, 1.0).unwrap();
        assert!(matches!(build_hamiltonian(&cfg, &c2, &drive, true), Err(Error::Dimension(_))));
    }

    #[test]
    fn drive_validation() {
        assert!(DrivePulse::new(-1.0, 0.0, [0.0, 1.0, 0.0], 1.0).is_err());
        assert!(DrivePulse::new(1.0, 0.0, [0.0, 2.0, 0.0], 1.0).is_err());
        assert!(DrivePulse::new(1.0, 0.0, [0.0, 1.0, 0.0], -1.0).is_err());
    }
}
