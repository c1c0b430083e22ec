use rayon::prelude::*;

use crate::ensemble::{run_ensemble, EnsembleOptions, EnsembleResult, EnsembleSpec};
use crate::error::{Error, Result};
use crate::observables::ObservablesConfig;
use crate::propagator::{DrivePulse, EvolutionSchedule, Method};
use crate::scalar::Real;

use super::{analyze_decay_with, DecayAnalysis, DecayWindows, FitModel};

/// Shared settings of a pulse-duration sweep. Each duration reruns the full
/// ensemble with the drive switched off at that time.
#[derive(Debug, Clone)]
pub struct SweepPlan<T> {
    pub ensemble: EnsembleSpec<T>,
    /// Drive template; its `t_off` is replaced by each duration.
    pub drive: DrivePulse<T>,
    pub observables: ObservablesConfig<T>,
    pub windows: DecayWindows<T>,
    pub model: FitModel,
    /// Sample spacing of the recorded trajectories.
    pub dt: T,
    /// Record length after switch-off; defaults to what the windows need.
    pub record_after: Option<T>,
    pub rtol: T,
    pub atol: T,
    pub max_step: Option<T>,
    pub method: Method,
    pub options: EnsembleOptions,
}

impl<T: Real> SweepPlan<T> {
    pub fn new(ensemble: EnsembleSpec<T>, drive: DrivePulse<T>, dt: T) -> Self {
        Self {
            ensemble,
            drive,
            observables: ObservablesConfig::default(),
            windows: DecayWindows::default(),
            model: FitModel::Pure,
            dt,
            record_after: None,
            rtol: T::of(1e-8),
            atol: T::of(1e-10),
            max_step: None,
            method: Method::DormandPrince,
            options: EnsembleOptions::default(),
        }
    }

    /// Schedule for a pulse of length `duration`.
    pub fn schedule(&self, duration: T) -> Result<EvolutionSchedule<T>> {
        let after = self.record_after.unwrap_or_else(|| self.windows.required_record());
        let mut s = EvolutionSchedule::uniform(duration + after, self.dt, duration)?
            .with_tolerances(self.rtol, self.atol)
            .with_method(self.method);
        if let Some(h) = self.max_step {
            s = s.with_max_step(h);
        }
        Ok(s)
    }

    /// Runs and analyses the ensemble for one duration.
    pub fn run_one(&self, duration: T) -> Result<DecayAnalysis<T>> {
        self.run_point(duration).map(|(a, _)| a)
    }

    /// Like [`run_one`](Self::run_one), also returning the ensemble result
    /// the analysis was computed from.
    pub fn run_point(&self, duration: T) -> Result<(DecayAnalysis<T>, EnsembleResult<T>)> {
        if !(duration > T::zero()) {
            return Err(Error::Domain(format!("pulse duration must be positive, got {duration}")));
        }
        let drive = DrivePulse { t_off: duration, ..self.drive };
        let schedule = self.schedule(duration)?;
        let result = run_ensemble(&self.ensemble, &drive, &schedule, &self.observables, &self.options)?;
        let mut analysis = analyze_decay_with(&result.mean, duration, &self.windows, self.model)?;
        if !result.failures.is_empty() {
            analysis
                .flags
                .push(format!("{} of {} realizations excluded", result.failures.len(), self.ensemble.n_realizations));
        }
        Ok((analysis, result))
    }
}

/// One sweep point; failures are kept in place so the table stays aligned
/// with the requested durations.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T> {
    pub duration: T,
    pub outcome: std::result::Result<DecayAnalysis<T>, Error>,
}

/// Runs `plan` for every duration, in parallel, returning rows in input order.
pub fn pulse_sweep<T: Real>(plan: &SweepPlan<T>, durations: &[T]) -> Vec<SweepRow<T>> {
    durations
        .par_iter()
        .map(|&d| SweepRow { duration: d, outcome: plan.run_one(d) })
        .collect()
}

/// Scatter of the early-emission figures against the excited fraction at
/// switch-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationRow<T> {
    pub duration: T,
    pub n_e_at_t0: T,
    pub tau_super: T,
    pub n_super: T,
}

/// Successful rows of a sweep as `(n_e(t0), tau_super, n_super)` points.
pub fn correlate_vs_ne<T: Real>(rows: &[SweepRow<T>]) -> Vec<CorrelationRow<T>> {
    rows.iter()
        .filter_map(|r| {
            r.outcome.as_ref().ok().map(|a| CorrelationRow {
                duration: r.duration,
                n_e_at_t0: a.n_e_at_t0,
                tau_super: a.tau_super(),
                n_super: a.n_super(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Sampler;
    use crate::greens::linear_dipole;

    fn plan() -> SweepPlan<f64> {
        let spec = EnsembleSpec::new(
            3,
            Sampler::GaussianCloud { n_atoms: 2, sigma_ax: 0.3, sigma_rad: 0.3 },
            linear_dipole([0.0, 0.0, 1.0]).unwrap(),
            4,
        );
        SweepPlan::new(spec, DrivePulse::resonant(3.0, 0.0).unwrap(), 0.02)
    }

    #[test]
    fn rows_follow_input_order_and_keep_failures() {
        let p = plan();
        let rows = pulse_sweep(&p, &[0.5, -1.0, 0.25]);
        assert_eq!(rows.iter().map(|r| r.duration).collect::<Vec<_>>(), vec![0.5, -1.0, 0.25]);
        assert!(rows[0].outcome.is_ok());
        assert!(rows[1].outcome.is_err());
        assert!(rows[2].outcome.is_ok());
        let pts = correlate_vs_ne(&rows);
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1].duration, 0.25);
    }

    #[test]
    fn sweep_is_deterministic() {
        let p = plan();
        assert_eq!(pulse_sweep(&p, &[0.3, 0.6]), pulse_sweep(&p, &[0.3, 0.6]));
    }
}
