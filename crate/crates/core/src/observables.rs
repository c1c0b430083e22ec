//! Emission observables evaluated on density-matrix snapshots.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::greens::{AtomConfiguration, CouplingMatrices};
use crate::propagator::{pair_state, DensityMatrix};
use crate::scalar::{cis, dot3, norm3, sub3, Cplx, Real, Vec3};

/// Pair correlations `C_mn = <s+_m s-_n>`, row-major `N x N`, Hermitian.
pub fn correlations<T: Real>(rho: &DensityMatrix<T>) -> Vec<Cplx<T>> {
    let n = rho.n_atoms();
    let dim = rho.dim();
    let mut c = vec![Cplx::zero(); n * n];
    for m in 0..n {
        for a in 0..n {
            // Tr(rho s+_m s-_a) = sum_k rho[k, (k - e_a) + e_m]
            let mut acc = Cplx::zero();
            for k in 0..dim {
                if k >> a & 1 == 0 {
                    continue;
                }
                let lowered = k & !(1 << a);
                if m != a && lowered >> m & 1 == 1 {
                    continue;
                }
                acc = acc + rho.get(k, lowered | 1 << m);
            }
            c[m * n + a] = acc;
        }
    }
    c
}

/// Mean excitation per atom, `(1/N) sum_n <s+_n s-_n>`.
pub fn excited_fraction<T: Real>(rho: &DensityMatrix<T>) -> T {
    let dim = rho.dim();
    let mut acc = T::zero();
    for k in 1..dim {
        acc = acc + T::of(k.count_ones() as f64) * rho.get(k, k).re;
    }
    acc / T::of(rho.n_atoms() as f64)
}

fn phased_sum<T: Real>(c: &[Cplx<T>], config: &AtomConfiguration<T>, k_hat: &Vec3<T>) -> Cplx<T> {
    let n = config.n_atoms();
    let pos = config.positions();
    let mut acc = Cplx::zero();
    for m in 0..n {
        for a in 0..n {
            let phase = T::TAU() * dot3(k_hat, &sub3(&pos[m], &pos[a]));
            acc = acc + cis(phase) * c[m * n + a];
        }
    }
    acc
}

fn check_unit<T: Real>(v: &Vec3<T>) -> Result<()> {
    let tol = T::of(1e-12).max(T::epsilon() * T::of(64.0));
    if !((norm3(v) - T::one()).abs() <= tol) {
        return Err(Error::Domain("direction must be a unit vector".into()));
    }
    Ok(())
}

/// Plane-wave emission along `k_ax_hat`:
/// `sum_{m,n} e^{i k.(R_m - R_n)} <s+_m s-_n>`.
pub fn axial_intensity<T: Real>(
    rho: &DensityMatrix<T>,
    config: &AtomConfiguration<T>,
    k_ax_hat: &Vec3<T>,
) -> Result<T> {
    check_unit(k_ax_hat)?;
    if rho.n_atoms() != config.n_atoms() {
        return Err(Error::Dimension("state and configuration disagree on N".into()));
    }
    Ok(phased_sum(&correlations(rho), config, k_ax_hat).re)
}

/// Total photon emission rate `sum_{m,n} Gamma_mn <s+_m s-_n>` in `Gamma0`.
pub fn total_emission_rate<T: Real>(rho: &DensityMatrix<T>, couplings: &CouplingMatrices<T>) -> Result<T> {
    if rho.n_atoms() != couplings.n_atoms() {
        return Err(Error::Dimension("state and couplings disagree on N".into()));
    }
    Ok(rate_from_correlations(&correlations(rho), couplings))
}

fn rate_from_correlations<T: Real>(c: &[Cplx<T>], couplings: &CouplingMatrices<T>) -> T {
    couplings
        .gamma_matrix()
        .iter()
        .zip(c)
        .fold(T::zero(), |acc, (g, z)| acc + *g * z.re)
}

/// A collective state whose population is tracked over time.
#[derive(Debug, Clone, PartialEq)]
pub enum StateTag<T> {
    /// `(|eg> + |ge>) / sqrt 2`, two atoms only.
    Plus,
    /// `(|eg> - |ge>) / sqrt 2`, two atoms only.
    Minus,
    Custom { label: String, vector: Vec<Cplx<T>> },
}

impl<T: Real> StateTag<T> {
    pub fn label(&self) -> &str {
        match self {
            StateTag::Plus => "plus",
            StateTag::Minus => "minus",
            StateTag::Custom { label, .. } => label,
        }
    }

    pub fn vector(&self, n_atoms: usize) -> Result<Vec<Cplx<T>>> {
        match self {
            StateTag::Plus | StateTag::Minus if n_atoms != 2 => Err(Error::Dimension(format!(
                "state '{}' is defined for two atoms, not {n_atoms}",
                self.label()
            ))),
            StateTag::Plus => Ok(pair_state(true)),
            StateTag::Minus => Ok(pair_state(false)),
            StateTag::Custom { vector, .. } => {
                if vector.len() != 1 << n_atoms {
                    return Err(Error::Dimension(format!(
                        "state '{}' has length {}, expected {}",
                        self.label(),
                        vector.len(),
                        1usize << n_atoms
                    )));
                }
                Ok(vector.clone())
            }
        }
    }
}

/// `<psi| rho |psi>` clamped to `[0, 1]`.
pub fn state_population<T: Real>(rho: &DensityMatrix<T>, tag: &StateTag<T>) -> Result<T> {
    let psi = tag.vector(rho.n_atoms())?;
    Ok(rho.expectation(&psi)?.max(T::zero()).min(T::one()))
}

/// Time series of the emission observables of one run (or an ensemble mean).
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionTrajectory<T> {
    pub times: Vec<T>,
    pub n_e: Vec<T>,
    pub axial_intensity: Vec<T>,
    pub total_rate: Vec<T>,
    /// `(label, population)` columns in tag order.
    pub tagged_populations: Vec<(String, Vec<T>)>,
}

impl<T: Real> EmissionTrajectory<T> {
    pub fn empty(labels: &[String]) -> Self {
        Self {
            times: Vec::new(),
            n_e: Vec::new(),
            axial_intensity: Vec::new(),
            total_rate: Vec::new(),
            tagged_populations: labels.iter().map(|l| (l.clone(), Vec::new())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn tagged(&self, label: &str) -> Option<&[T]> {
        self.tagged_populations.iter().find(|(l, _)| l == label).map(|(_, v)| v.as_slice())
    }

    /// Index of the sample at exactly `t`, if any.
    pub fn index_of(&self, t: T) -> Option<usize> {
        self.times.iter().position(|&x| x == t)
    }

    /// Checks the column invariants, tolerating `floor` of negative round-off.
    pub fn validate(&self, floor: T) -> Result<()> {
        let n = self.times.len();
        let lens_ok = self.n_e.len() == n
            && self.axial_intensity.len() == n
            && self.total_rate.len() == n
            && self.tagged_populations.iter().all(|(_, v)| v.len() == n);
        if !lens_ok {
            return Err(Error::Dimension("trajectory columns differ in length".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("trajectory times must increase".into()));
        }
        let in_unit = |v: &T| *v >= -floor && *v <= T::one() + floor;
        if !self.n_e.iter().all(in_unit)
            || !self.tagged_populations.iter().all(|(_, c)| c.iter().all(in_unit))
        {
            return Err(Error::Domain("population outside [0, 1]".into()));
        }
        if self.axial_intensity.iter().chain(&self.total_rate).any(|v| *v < -floor) {
            return Err(Error::Domain("negative emission".into()));
        }
        Ok(())
    }
}

/// Which observables to record and along which axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservablesConfig<T> {
    pub k_ax_hat: Vec3<T>,
    pub tags: Vec<StateTag<T>>,
}

impl<T: Real> Default for ObservablesConfig<T> {
    /// Axial detection along the cloud axis `+x`, no tags.
    fn default() -> Self {
        Self { k_ax_hat: [T::one(), T::zero(), T::zero()], tags: Vec::new() }
    }
}

/// Incremental builder used while a trajectory streams.
pub struct TrajectoryRecorder<'a, T> {
    config: &'a AtomConfiguration<T>,
    couplings: &'a CouplingMatrices<T>,
    k_ax_hat: Vec3<T>,
    vectors: Vec<Vec<Cplx<T>>>,
    traj: EmissionTrajectory<T>,
}

impl<'a, T: Real> TrajectoryRecorder<'a, T> {
    pub fn new(
        config: &'a AtomConfiguration<T>,
        couplings: &'a CouplingMatrices<T>,
        observables: &ObservablesConfig<T>,
    ) -> Result<Self> {
        check_unit(&observables.k_ax_hat)?;
        let n = config.n_atoms();
        if couplings.n_atoms() != n {
            return Err(Error::Dimension("configuration and couplings disagree on N".into()));
        }
        let vectors = observables.tags.iter().map(|t| t.vector(n)).collect::<Result<Vec<_>>>()?;
        let labels: Vec<String> = observables.tags.iter().map(|t| t.label().to_string()).collect();
        Ok(Self {
            config,
            couplings,
            k_ax_hat: observables.k_ax_hat,
            vectors,
            traj: EmissionTrajectory::empty(&labels),
        })
    }

    pub fn record(&mut self, t: T, rho: &DensityMatrix<T>) -> Result<()> {
        if rho.n_atoms() != self.config.n_atoms() {
            return Err(Error::Dimension("snapshot size does not match configuration".into()));
        }
        let c = correlations(rho);
        let n = self.config.n_atoms();
        let ne = (0..n).fold(T::zero(), |a, k| a + c[k * n + k].re) / T::of(n as f64);
        self.traj.times.push(t);
        self.traj.n_e.push(ne);
        self.traj.axial_intensity.push(phased_sum(&c, self.config, &self.k_ax_hat).re);
        self.traj.total_rate.push(rate_from_correlations(&c, self.couplings));
        for (psi, (_, col)) in self.vectors.iter().zip(self.traj.tagged_populations.iter_mut()) {
            col.push(rho.expectation(psi)?);
        }
        Ok(())
    }

    pub fn finish(self) -> EmissionTrajectory<T> {
        self.traj
    }
}

/// Applies every observable to each snapshot.
pub fn record_trajectory<T: Real>(
    snapshots: &[(T, DensityMatrix<T>)],
    config: &AtomConfiguration<T>,
    couplings: &CouplingMatrices<T>,
    observables: &ObservablesConfig<T>,
) -> Result<EmissionTrajectory<T>> {
    if snapshots.is_empty() {
        return Err(Error::Domain("no snapshots to record".into()));
    }
    let mut rec = TrajectoryRecorder::new(config, couplings, observables)?;
    for (t, rho) in snapshots {
        rec.record(*t, rho)?;
    }
    Ok(rec.finish())
}
