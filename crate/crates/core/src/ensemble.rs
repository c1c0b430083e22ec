//! Disorder ensembles: sampled geometries and drive-intensity jitter.
//!
//! Every realization draws from its own ChaCha8 stream keyed by
//! `(seed, realization index, purpose)`, so results do not depend on the
//! order or the thread on which realizations run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::greens::{build_couplings, AtomConfiguration, Dipole};
use crate::observables::{EmissionTrajectory, ObservablesConfig, TrajectoryRecorder};
use crate::propagator::{evolve_with, initial_ground_state, DrivePulse, EvolutionSchedule, EvolutionStats, DEFAULT_MAX_ATOMS};
use crate::scalar::{dot3, norm3, scale3, sub3, Real, Vec3};

/// Sampling attempts per realization before giving up on the separation guard.
pub const MAX_SAMPLER_ATTEMPTS: usize = 100;

/// Intensity jitter is drawn from a normal truncated at this many sigma.
pub const JITTER_TRUNCATION: f64 = 3.0;

/// Fraction of realizations allowed to fail before the ensemble errors out.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

const GEOMETRY_STREAM: u64 = 0;
const DRIVE_STREAM: u64 = 1;

/// Geometry distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampler<T> {
    /// Two atoms at fixed distance with a randomly oriented axis.
    FixedPair { distance: T },
    /// Independent Gaussian positions; the axial direction is `x`.
    GaussianCloud { n_atoms: usize, sigma_ax: T, sigma_rad: T },
    /// Evenly spaced atoms along `axis`, no randomness.
    Chain { n_atoms: usize, spacing: T, axis: Vec3<T> },
    /// A single given geometry.
    Explicit { positions: Vec<Vec3<T>> },
}

impl<T: Real> Sampler<T> {
    pub fn n_atoms(&self) -> usize {
        match self {
            Sampler::FixedPair { .. } => 2,
            Sampler::GaussianCloud { n_atoms, .. } | Sampler::Chain { n_atoms, .. } => *n_atoms,
            Sampler::Explicit { positions } => positions.len(),
        }
    }
}

/// Measure used for the random pair axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Orientation<T> {
    /// Uniform on the sphere.
    SolidAngle,
    /// Polar angle to `axis` uniform in `[0, pi]`, azimuth uniform.
    PolarAngle { axis: Vec3<T> },
}

/// Everything needed to draw the realizations of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec<T> {
    pub n_realizations: usize,
    pub sampler: Sampler<T>,
    pub dipole: Dipole<T>,
    /// Relative standard deviation of the drive intensity.
    pub intensity_jitter_rel: T,
    pub seed: u64,
    pub orientation: Orientation<T>,
    pub max_atoms: usize,
}

impl<T: Real> EnsembleSpec<T> {
    pub fn new(n_realizations: usize, sampler: Sampler<T>, dipole: Dipole<T>, seed: u64) -> Self {
        Self {
            n_realizations,
            sampler,
            dipole,
            intensity_jitter_rel: T::zero(),
            seed,
            orientation: Orientation::SolidAngle,
            max_atoms: DEFAULT_MAX_ATOMS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_realizations == 0 {
            return Err(Error::Domain("ensemble needs at least one realization".into()));
        }
        if !(self.intensity_jitter_rel >= T::zero()) {
            return Err(Error::Domain("intensity jitter must be nonnegative".into()));
        }
        let n = self.sampler.n_atoms();
        if n == 0 {
            return Err(Error::Domain("sampler produces no atoms".into()));
        }
        if n > self.max_atoms {
            return Err(Error::TooManyAtoms { n_atoms: n, cap: self.max_atoms });
        }
        match &self.sampler {
            Sampler::FixedPair { distance } if !(*distance > T::zero()) => {
                Err(Error::Domain("pair distance must be positive".into()))
            }
            Sampler::GaussianCloud { sigma_ax, sigma_rad, .. }
                if !(*sigma_ax >= T::zero() && *sigma_rad >= T::zero()) =>
            {
                Err(Error::Domain("cloud widths must be nonnegative".into()))
            }
            Sampler::Chain { spacing, axis, .. } if !(*spacing > T::zero() && norm3(axis) > T::zero()) => {
                Err(Error::Domain("chain needs positive spacing and a nonzero axis".into()))
            }
            _ => Ok(()),
        }?;
        if let Orientation::PolarAngle { axis } = self.orientation {
            if !(norm3(&axis) > T::zero()) {
                return Err(Error::Domain("polar-angle axis must be nonzero".into()));
            }
        }
        Ok(())
    }

    fn rng(&self, index: usize, purpose: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64 * 2 + purpose);
        rng
    }
}

fn normal<T: Real, R: Rng>(rng: &mut R) -> T {
    T::of(rng.sample::<f64, _>(StandardNormal))
}

fn uniform_direction<T: Real, R: Rng>(rng: &mut R, orientation: &Orientation<T>) -> Vec3<T> {
    match orientation {
        Orientation::SolidAngle => loop {
            let v: Vec3<T> = [normal(rng), normal(rng), normal(rng)];
            let n = norm3(&v);
            if n > T::of(1e-9) {
                break scale3(&v, T::one() / n);
            }
        },
        Orientation::PolarAngle { axis } => {
            let q = scale3(axis, T::one() / norm3(axis));
            let (e1, e2) = orthonormal_frame(&q);
            let theta = T::of(rng.random::<f64>()) * T::PI();
            let phi = T::of(rng.random::<f64>()) * T::TAU();
            let (st, ct) = theta.sin_cos();
            let (sp, cp) = phi.sin_cos();
            [0, 1, 2].map(|i| q[i] * ct + (e1[i] * cp + e2[i] * sp) * st)
        }
    }
}

fn orthonormal_frame<T: Real>(q: &Vec3<T>) -> (Vec3<T>, Vec3<T>) {
    let imin = (0..3).min_by(|&a, &b| q[a].abs().partial_cmp(&q[b].abs()).unwrap()).unwrap();
    let mut seed = [T::zero(); 3];
    seed[imin] = T::one();
    let e1 = sub3(&seed, &scale3(q, dot3(&seed, q)));
    let e1 = scale3(&e1, T::one() / norm3(&e1));
    let e2 = [q[1] * e1[2] - q[2] * e1[1], q[2] * e1[0] - q[0] * e1[2], q[0] * e1[1] - q[1] * e1[0]];
    (e1, e2)
}

/// Geometry of realization `index`.
///
/// Draws that put two atoms within the coupling singularity guard are
/// redrawn from the same stream, up to [`MAX_SAMPLER_ATTEMPTS`] times.
pub fn sample_configuration<T: Real>(spec: &EnsembleSpec<T>, index: usize) -> Result<AtomConfiguration<T>> {
    spec.validate()?;
    let mut rng = spec.rng(index, GEOMETRY_STREAM);
    for _ in 0..MAX_SAMPLER_ATTEMPTS {
        let positions = match &spec.sampler {
            Sampler::FixedPair { distance } => {
                let u = uniform_direction(&mut rng, &spec.orientation);
                vec![[T::zero(); 3], scale3(&u, *distance)]
            }
            Sampler::GaussianCloud { n_atoms, sigma_ax, sigma_rad } => (0..*n_atoms)
                .map(|_| {
                    let x: T = normal(&mut rng);
                    let y: T = normal(&mut rng);
                    let z: T = normal(&mut rng);
                    [x * *sigma_ax, y * *sigma_rad, z * *sigma_rad]
                })
                .collect(),
            Sampler::Chain { n_atoms, spacing, axis } => {
                let a = scale3(axis, T::one() / norm3(axis));
                (0..*n_atoms).map(|k| scale3(&a, *spacing * T::of(k as f64))).collect()
            }
            Sampler::Explicit { positions } => positions.clone(),
        };
        match AtomConfiguration::new(positions, spec.dipole) {
            Err(Error::Singularity { .. }) if !matches!(spec.sampler, Sampler::Explicit { .. } | Sampler::Chain { .. }) => {
                continue
            }
            other => return other,
        }
    }
    Err(Error::SamplerExhausted { attempts: MAX_SAMPLER_ATTEMPTS })
}

/// Relative intensity deviation `epsilon` of realization `index`.
pub fn sample_intensity_deviation<T: Real>(spec: &EnsembleSpec<T>, index: usize) -> T {
    if spec.intensity_jitter_rel == T::zero() {
        return T::zero();
    }
    let mut rng = spec.rng(index, DRIVE_STREAM);
    loop {
        let z: T = normal(&mut rng);
        if z.abs() <= T::of(JITTER_TRUNCATION) {
            return z * spec.intensity_jitter_rel;
        }
    }
}

/// Drive of realization `index`: the Rabi frequency scales as `sqrt(1 + epsilon)`.
pub fn sample_drive<T: Real>(spec: &EnsembleSpec<T>, base: &DrivePulse<T>, index: usize) -> DrivePulse<T> {
    let eps = sample_intensity_deviation(spec, index);
    if eps == T::zero() {
        return *base;
    }
    DrivePulse { rabi: base.rabi * (T::one() + eps).max(T::zero()).sqrt(), ..*base }
}

/// Runtime switches for [`run_ensemble`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleOptions {
    pub keep_realizations: bool,
    /// Diagonalise each final state and fail realizations that are not PSD.
    pub check_positivity: bool,
    pub positivity_tolerance: f64,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self { keep_realizations: false, check_positivity: false, positivity_tolerance: 1e-8 }
    }
}

/// Outcome of one realization that completed.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization<T> {
    pub index: usize,
    pub trajectory: EmissionTrajectory<T>,
    pub stats: EvolutionStats,
    pub rabi: T,
    pub min_final_eigenvalue: Option<f64>,
}

/// Aggregated result of an ensemble run.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult<T> {
    /// Equal-weight mean over the successful realizations.
    pub mean: EmissionTrajectory<T>,
    pub succeeded: usize,
    /// `(index, error)` of excluded realizations.
    pub failures: Vec<(usize, Error)>,
    /// Worst-case drift diagnostics over all realizations.
    pub stats: EvolutionStats,
    pub min_final_eigenvalue: Option<f64>,
    pub realizations: Option<Vec<Realization<T>>>,
}

/// Simulates one realization.
pub fn run_realization<T: Real>(
    spec: &EnsembleSpec<T>,
    drive: &DrivePulse<T>,
    schedule: &EvolutionSchedule<T>,
    observables: &ObservablesConfig<T>,
    options: &EnsembleOptions,
    index: usize,
) -> Result<Realization<T>> {
    let config = sample_configuration(spec, index)?;
    let couplings = build_couplings(&config)?;
    let drive = sample_drive(spec, drive, index);
    let rho0 = initial_ground_state(config.n_atoms(), spec.max_atoms)?;
    let mut rec = TrajectoryRecorder::new(&config, &couplings, observables)?;
    let (final_state, stats) = evolve_with(&rho0, &config, &couplings, &drive, schedule, |t, rho| rec.record(t, rho))?;
    let min_final_eigenvalue = if options.check_positivity {
        let lmin = final_state.min_eigenvalue();
        if lmin < -options.positivity_tolerance {
            return Err(Error::Invariant {
                t: schedule.t_grid().last().map_or(0.0, |t| t.to_f64_lossless()),
                what: "min eigenvalue deficit",
                value: -lmin,
                bound: options.positivity_tolerance,
            });
        }
        Some(lmin)
    } else {
        None
    };
    Ok(Realization { index, trajectory: rec.finish(), stats, rabi: drive.rabi, min_final_eigenvalue })
}

/// Runs every realization on the current rayon pool and averages the
/// trajectories in index order.
///
/// Failed realizations are excluded from the mean; more than 1 % failures
/// is an error.
pub fn run_ensemble<T: Real>(
    spec: &EnsembleSpec<T>,
    drive: &DrivePulse<T>,
    schedule: &EvolutionSchedule<T>,
    observables: &ObservablesConfig<T>,
    options: &EnsembleOptions,
) -> Result<EnsembleResult<T>> {
    spec.validate()?;
    drive.validate()?;
    let outcomes: Vec<Result<Realization<T>>> = (0..spec.n_realizations)
        .into_par_iter()
        .map(|k| run_realization(spec, drive, schedule, observables, options, k))
        .collect();

    let total = outcomes.len();
    let mut failures = Vec::new();
    let mut done = Vec::with_capacity(total);
    for (k, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => done.push(r),
            Err(e) => failures.push((k, e)),
        }
    }
    if done.is_empty() || failures.len() as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::EnsembleFailure {
            failed: failures.len(),
            total,
            first: failures.first().map(|(k, e)| format!("realization {k}: {e}")).unwrap_or_default(),
        });
    }

    let mut mean = done[0].trajectory.clone();
    let mut stats = done[0].stats;
    for r in &done[1..] {
        accumulate(&mut mean, &r.trajectory)?;
        stats.merge(&r.stats);
    }
    let inv = T::one() / T::of(done.len() as f64);
    scale_columns(&mut mean, inv);
    let min_final_eigenvalue = done
        .iter()
        .filter_map(|r| r.min_final_eigenvalue)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));
    Ok(EnsembleResult {
        mean,
        succeeded: done.len(),
        failures,
        stats,
        min_final_eigenvalue,
        realizations: options.keep_realizations.then_some(done),
    })
}

fn accumulate<T: Real>(acc: &mut EmissionTrajectory<T>, x: &EmissionTrajectory<T>) -> Result<()> {
    if acc.times != x.times || acc.tagged_populations.len() != x.tagged_populations.len() {
        return Err(Error::Dimension("realizations recorded on different grids".into()));
    }
    let add = |a: &mut Vec<T>, b: &Vec<T>| a.iter_mut().zip(b).for_each(|(a, b)| *a = *a + *b);
    add(&mut acc.n_e, &x.n_e);
    add(&mut acc.axial_intensity, &x.axial_intensity);
    add(&mut acc.total_rate, &x.total_rate);
    for ((_, a), (_, b)) in acc.tagged_populations.iter_mut().zip(&x.tagged_populations) {
        add(a, b);
    }
    Ok(())
}

fn scale_columns<T: Real>(t: &mut EmissionTrajectory<T>, s: T) {
    let scale = |a: &mut Vec<T>| a.iter_mut().for_each(|v| *v = *v * s);
    scale(&mut t.n_e);
    scale(&mut t.axial_intensity);
    scale(&mut t.total_rate);
    t.tagged_populations.iter_mut().for_each(|(_, c)| scale(c));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::{linear_dipole, sigma_minus_dipole};

    fn zdip() -> Dipole<f64> {
        linear_dipole([0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn fixed_pair_keeps_distance() {
        let spec = EnsembleSpec::new(200, Sampler::FixedPair { distance: 1.0 / 3.0 }, zdip(), 7);
        for k in 0..200 {
            let c = sample_configuration(&spec, k).unwrap();
            let r = norm3(&sub3(&c.positions()[1], &c.positions()[0]));
            assert!((r - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn isotropic_axis() {
        let spec = EnsembleSpec::new(100_000, Sampler::FixedPair { distance: 1.0 }, zdip(), 11);
        let mut mean = [0.0; 3];
        let mut zz = 0.0;
        for k in 0..spec.n_realizations {
            let u = sample_configuration(&spec, k).unwrap().positions()[1];
            (0..3).for_each(|i| mean[i] += u[i]);
            zz += u[2] * u[2];
        }
        let n = spec.n_realizations as f64;
        assert!(norm3(&scale3(&mean, 1.0 / n)) < 0.01);
        assert!((zz / n - 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn polar_angle_measure_is_not_isotropic() {
        let mut spec = EnsembleSpec::new(20_000, Sampler::FixedPair { distance: 1.0 }, zdip(), 3);
        spec.orientation = Orientation::PolarAngle { axis: [0.0, 0.0, 1.0] };
        let zz: f64 = (0..spec.n_realizations)
            .map(|k| sample_configuration(&spec, k).unwrap().positions()[1][2].powi(2))
            .sum::<f64>()
            / spec.n_realizations as f64;
        // <cos^2> = 1/2 for uniform polar angle
        assert!((zz - 0.5).abs() < 0.01, "{zz}");
    }

    #[test]
    fn gaussian_widths() {
        let spec = EnsembleSpec::new(
            1,
            Sampler::GaussianCloud { n_atoms: 10, sigma_ax: 2.0, sigma_rad: 0.5 },
            zdip(),
            5,
        );
        let (mut sx, mut sy, mut sz, mut count) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..1000 {
            for p in sample_configuration(&spec, k).unwrap().positions() {
                sx += p[0] * p[0];
                sy += p[1] * p[1];
                sz += p[2] * p[2];
                count += 1.0;
            }
        }
        assert!(((sx / count).sqrt() / 2.0 - 1.0).abs() < 0.03);
        assert!(((sy / count).sqrt() / 0.5 - 1.0).abs() < 0.03);
        assert!(((sz / count).sqrt() / 0.5 - 1.0).abs() < 0.03);
    }

    #[test]
    fn sampling_is_deterministic_per_index() {
        let spec = EnsembleSpec::new(
            10,
            Sampler::GaussianCloud { n_atoms: 4, sigma_ax: 1.0, sigma_rad: 1.0 },
            zdip(),
            42,
        );
        let a = sample_configuration(&spec, 3).unwrap();
        let _ = sample_configuration(&spec, 9).unwrap();
        assert_eq!(a, sample_configuration(&spec, 3).unwrap());
        assert_ne!(a, sample_configuration(&spec, 4).unwrap());
        let other = EnsembleSpec { seed: 43, ..spec.clone() };
        assert_ne!(a, sample_configuration(&other, 3).unwrap());
    }

    #[test]
    fn degenerate_cloud_exhausts_sampler() {
        let spec = EnsembleSpec::new(
            1,
            Sampler::GaussianCloud { n_atoms: 3, sigma_ax: 0.0, sigma_rad: 0.0 },
            zdip(),
            1,
        );
        assert!(matches!(sample_configuration(&spec, 0), Err(Error::SamplerExhausted { attempts: 100 })));
    }

    #[test]
    fn intensity_jitter() {
        let mut spec = EnsembleSpec::new(1, Sampler::FixedPair { distance: 1.0 }, zdip(), 9);
        spec.intensity_jitter_rel = 0.1;
        let n = 20_000;
        let eps: Vec<f64> = (0..n).map(|k| sample_intensity_deviation(&spec, k)).collect();
        let mean = eps.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.005, "{mean}");
        assert!(eps.iter().all(|e| e.abs() <= 0.3 + 1e-15));
        let base = DrivePulse::resonant(4.0, 1.0).unwrap();
        let d = sample_drive(&spec, &base, 17);
        assert!((d.rabi - 4.0 * (1.0 + eps[17]).sqrt()).abs() < 1e-12);
        spec.intensity_jitter_rel = 0.0;
        assert_eq!(sample_drive(&spec, &base, 17), base);
    }

    #[test]
    fn single_realization_equals_direct_run() {
        let dip = sigma_minus_dipole([0.0, 1.0, 0.0]).unwrap();
        let spec = EnsembleSpec::new(1, Sampler::FixedPair { distance: 0.4 }, dip, 2);
        let drive = DrivePulse::resonant(3.0, 0.5).unwrap();
        let sched = EvolutionSchedule::uniform(2.0, 0.05, 0.5).unwrap();
        let obs = ObservablesConfig::default();
        let opts = EnsembleOptions::default();
        let ens = run_ensemble(&spec, &drive, &sched, &obs, &opts).unwrap();
        let one = run_realization(&spec, &drive, &sched, &obs, &opts, 0).unwrap();
        assert_eq!(ens.mean, one.trajectory);
    }

    #[test]
    fn mean_lies_within_realization_envelope() {
        let spec = EnsembleSpec::new(
            12,
            Sampler::GaussianCloud { n_atoms: 3, sigma_ax: 0.4, sigma_rad: 0.2 },
            zdip(),
            8,
        );
        let drive = DrivePulse::resonant(5.0, 0.4).unwrap();
        let sched = EvolutionSchedule::uniform(2.0, 0.05, 0.4).unwrap();
        let opts = EnsembleOptions { keep_realizations: true, check_positivity: true, ..Default::default() };
        let ens = run_ensemble(&spec, &drive, &sched, &ObservablesConfig::default(), &opts).unwrap();
        let reals = ens.realizations.as_ref().unwrap();
        assert_eq!(reals.len(), 12);
        assert!(ens.min_final_eigenvalue.unwrap() > -1e-8);
        for k in 0..ens.mean.len() {
            for col in [|t: &EmissionTrajectory<f64>, k: usize| t.n_e[k], |t: &EmissionTrajectory<f64>, k: usize| t.axial_intensity[k]] {
                let lo = reals.iter().map(|r| col(&r.trajectory, k)).fold(f64::INFINITY, f64::min);
                let hi = reals.iter().map(|r| col(&r.trajectory, k)).fold(f64::NEG_INFINITY, f64::max);
                let m = col(&ens.mean, k);
                assert!(m >= lo - 1e-12 && m <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn ensemble_is_thread_count_independent() {
        let spec = EnsembleSpec::new(
            8,
            Sampler::GaussianCloud { n_atoms: 3, sigma_ax: 0.5, sigma_rad: 0.3 },
            zdip(),
            21,
        );
        let drive = DrivePulse::resonant(4.0, 0.3).unwrap();
        let sched = EvolutionSchedule::uniform(1.5, 0.05, 0.3).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
                run_ensemble(&spec, &drive, &sched, &ObservablesConfig::default(), &EnsembleOptions::default())
                    .unwrap()
                    .mean
            })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn failing_realizations_abort_small_ensembles() {
        let spec = EnsembleSpec::new(
            4,
            Sampler::Explicit { positions: vec![[0.0; 3], [1e-7, 0.0, 0.0]] },
            zdip(),
            0,
        );
        let drive = DrivePulse::resonant(1.0, 0.1).unwrap();
        let sched = EvolutionSchedule::uniform(0.5, 0.1, 0.1).unwrap();
        let err = run_ensemble(&spec, &drive, &sched, &ObservablesConfig::default(), &EnsembleOptions::default());
        assert!(matches!(err, Err(Error::EnsembleFailure { failed: 4, total: 4, .. })));
    }
}
