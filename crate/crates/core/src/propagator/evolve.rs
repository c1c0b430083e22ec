use num_traits::One;

use crate::error::{Error, Result};
use crate::greens::{AtomConfiguration, CouplingMatrices};
use crate::scalar::{Cplx, Real};

use super::hamiltonian::{build_hamiltonian, DrivePulse};
use super::integrator::{integrate, IntegrationStats, Method, StepControl};
use super::lindblad::Generator;
use super::state::DensityMatrix;

/// Snapshot-level bounds on numerical drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftBounds {
    /// Abort if `|Tr rho - 1|` exceeds this.
    pub trace: f64,
    /// Renormalise the snapshot trace only above this drift.
    pub trace_renormalize: f64,
    /// Abort if `max |rho - rho^dagger|` exceeds this.
    pub hermiticity: f64,
}

impl Default for DriftBounds {
    fn default() -> Self {
        Self { trace: 1e-8, trace_renormalize: 1e-12, hermiticity: 1e-9 }
    }
}

/// Sample times and integrator settings for one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionSchedule<T> {
    t_grid: Vec<T>,
    pub rtol: T,
    pub atol: T,
    /// `None` selects `0.01 / max(1, rabi)`.
    pub max_step: Option<T>,
    pub method: Method,
    pub bounds: DriftBounds,
}

impl<T: Real> EvolutionSchedule<T> {
    /// Validates that the grid is strictly increasing and nonnegative.
    pub fn new(t_grid: Vec<T>) -> Result<Self> {
        if t_grid.is_empty() {
            return Err(Error::Domain("time grid is empty".into()));
        }
        if !(t_grid[0] >= T::zero()) {
            return Err(Error::Domain("time grid must start at t >= 0".into()));
        }
        if t_grid.iter().any(|t| !t.is_finite()) || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("time grid must be finite and strictly increasing".into()));
        }
        Ok(Self {
            t_grid,
            rtol: T::of(1e-8),
            atol: T::of(1e-10),
            max_step: None,
            method: Method::DormandPrince,
            bounds: DriftBounds::default(),
        })
    }

    /// Uniform grid `0, dt, 2 dt, ...` ending exactly at `t_end`, with
    /// `t_off` inserted exactly when it falls inside the record.
    pub fn uniform(t_end: T, dt: T, t_off: T) -> Result<Self> {
        if !(dt > T::zero()) || !(t_end > T::zero()) {
            return Err(Error::Domain("need dt > 0 and t_end > 0".into()));
        }
        let eps = dt * T::of(1e-9);
        let steps = ((t_end + eps) / dt).floor().to_usize().unwrap_or(0);
        let mut grid: Vec<T> = (0..=steps).map(|k| T::of(k as f64) * dt).collect();
        let last = grid.last_mut().expect("steps >= 0");
        if (*last - t_end).abs() <= eps * T::of(1e3) {
            *last = t_end;
        } else {
            grid.push(t_end);
        }
        if t_off > T::zero() && t_off <= t_end {
            if let Some(p) = grid.iter().position(|&t| (t - t_off).abs() <= eps) {
                grid[p] = t_off;
            } else {
                let p = grid.partition_point(|&t| t < t_off);
                grid.insert(p, t_off);
            }
        }
        Self::new(grid)
    }

    pub fn t_grid(&self) -> &[T] {
        &self.t_grid
    }

    pub fn with_tolerances(mut self, rtol: T, atol: T) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn with_max_step(mut self, max_step: T) -> Self {
        self.max_step = Some(max_step);
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_bounds(mut self, bounds: DriftBounds) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn effective_max_step(&self, rabi: T) -> T {
        self.max_step.unwrap_or_else(|| T::of(0.01) / rabi.max(T::one()))
    }
}

/// Diagnostics accumulated over one trajectory.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvolutionStats {
    pub integration: IntegrationStats,
    /// Largest `|Tr rho - 1|` over snapshots.
    pub max_trace_drift: f64,
    /// Largest `max |rho - rho^dagger|` over snapshots, before re-Hermitization.
    pub max_hermiticity_residue: f64,
}

impl EvolutionStats {
    pub fn merge(&mut self, other: &EvolutionStats) {
        self.integration.merge(other.integration);
        self.max_trace_drift = self.max_trace_drift.max(other.max_trace_drift);
        self.max_hermiticity_residue = self.max_hermiticity_residue.max(other.max_hermiticity_residue);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution<T> {
    pub snapshots: Vec<(T, DensityMatrix<T>)>,
    pub stats: EvolutionStats,
}

fn clean_snapshot<T: Real>(
    t: T,
    n_atoms: usize,
    raw: &[Cplx<T>],
    bounds: &DriftBounds,
    stats: &mut EvolutionStats,
) -> Result<DensityMatrix<T>> {
    let mut rho = DensityMatrix::from_raw(n_atoms, raw.to_vec())?;
    let herm = rho.hermiticity_residue().to_f64_lossless();
    let drift = (rho.trace() - Cplx::one()).norm().to_f64_lossless();
    stats.max_hermiticity_residue = stats.max_hermiticity_residue.max(herm);
    stats.max_trace_drift = stats.max_trace_drift.max(drift);
    if !(herm <= bounds.hermiticity) {
        return Err(Error::Invariant { t: t.to_f64_lossless(), what: "hermiticity residue", value: herm, bound: bounds.hermiticity });
    }
    if !(drift <= bounds.trace) {
        return Err(Error::Invariant { t: t.to_f64_lossless(), what: "trace drift", value: drift, bound: bounds.trace });
    }
    rho.hermitize();
    if drift > bounds.trace_renormalize {
        rho.normalize_trace();
    }
    Ok(rho)
}

/// Streams snapshots on the schedule grid to `observer` and returns the
/// final integrator state alongside the run diagnostics.
///
/// The drive acts on `[0, t_off)`; integration restarts at `t_off` so no step
/// straddles the switch-off. `rho0` is the state at `t = 0`.
pub fn evolve_with<T, O>(
    rho0: &DensityMatrix<T>,
    config: &AtomConfiguration<T>,
    couplings: &CouplingMatrices<T>,
    drive: &DrivePulse<T>,
    schedule: &EvolutionSchedule<T>,
    mut observer: O,
) -> Result<(DensityMatrix<T>, EvolutionStats)>
where
    T: Real,
    O: FnMut(T, &DensityMatrix<T>) -> Result<()>,
{
    drive.validate()?;
    let n = config.n_atoms();
    if rho0.n_atoms() != n || couplings.n_atoms() != n {
        return Err(Error::Dimension(format!(
            "state has {} atoms, configuration {n}, couplings {}",
            rho0.n_atoms(),
            couplings.n_atoms()
        )));
    }
    let grid = schedule.t_grid();
    let t_last = *grid.last().expect("validated nonempty");
    if drive.t_off >= grid[0] && drive.t_off <= t_last && !grid.contains(&drive.t_off) {
        return Err(Error::Domain(format!("switch-off time {} is not on the sample grid", drive.t_off)));
    }

    let control = StepControl {
        rtol: schedule.rtol,
        atol: schedule.atol,
        max_step: schedule.effective_max_step(drive.rabi),
    };
    let bounds = schedule.bounds;
    let mut stats = EvolutionStats::default();
    let mut y = rho0.as_slice().to_vec();
    let mut h = T::zero();

    let mut pending = grid;
    if pending[0] == T::zero() {
        observer(T::zero(), &clean_snapshot(T::zero(), n, &y, &bounds, &mut stats)?)?;
        pending = &pending[1..];
    }

    let t_switch = drive.t_off.min(t_last);
    let segments = [(T::zero(), t_switch, true), (t_switch, t_last, false)];
    for (start, end, drive_on) in segments {
        if !(end > start) {
            continue;
        }
        let split = pending.partition_point(|&t| t <= end);
        let (outputs, rest) = pending.split_at(split);
        let outputs: Vec<T> = outputs.iter().copied().filter(|&t| t > start).collect();
        pending = rest;

        let h_op = build_hamiltonian(config, couplings, drive, drive_on)?;
        let gen = Generator::new(&h_op, couplings)?;
        let seg = integrate(
            schedule.method,
            |r: &[Cplx<T>], out: &mut [Cplx<T>]| gen.apply(r, out),
            start,
            end,
            &mut y,
            &outputs,
            &control,
            &mut h,
            |t, raw| {
                let snap = clean_snapshot(t, n, raw, &bounds, &mut stats)?;
                observer(t, &snap)
            },
        )?;
        stats.integration.merge(seg);
    }
    let mut final_state = DensityMatrix::from_raw(n, y)?;
    final_state.hermitize();
    Ok((final_state, stats))
}

/// Collects every snapshot on the schedule grid.
pub fn evolve<T: Real>(
    rho0: &DensityMatrix<T>,
    config: &AtomConfiguration<T>,
    couplings: &CouplingMatrices<T>,
    drive: &DrivePulse<T>,
    schedule: &EvolutionSchedule<T>,
) -> Result<Evolution<T>> {
    let mut snapshots = Vec::with_capacity(schedule.t_grid().len());
    let (_, stats) = evolve_with(rho0, config, couplings, drive, schedule, |t, rho| {
        snapshots.push((t, rho.clone()));
        Ok(())
    })?;
    Ok(Evolution { snapshots, stats })
}
