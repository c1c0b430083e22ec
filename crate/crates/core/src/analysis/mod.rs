//! Decay-time extraction and pulse-duration sweeps.

mod fit;
mod sweep;
mod windows;

pub use fit::{
    fit_exponential, fit_exponential_with_background, fit_with_model, integrate_window, ExpFit, FitModel, Window,
    MIN_FIT_SAMPLES,
};
pub use sweep::{correlate_vs_ne, pulse_sweep, CorrelationRow, SweepPlan, SweepRow};
pub use windows::{DecayWindows, SUPER_FIT_DELAY_NS};

use crate::error::{Error, Result};
use crate::observables::EmissionTrajectory;
use crate::scalar::Real;

/// Early/late decay figures of one emission curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveDecay<T> {
    pub tau_super: T,
    pub tau_sub: T,
    /// Integrated emission over the early count window.
    pub n_super: T,
    /// Integrated emission over the late window.
    pub n_sub: T,
    pub super_fit: Option<ExpFit<T>>,
    pub sub_fit: Option<ExpFit<T>>,
}

/// Decay analysis of a trajectory after switch-off at `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayAnalysis<T> {
    pub t0: T,
    /// Excited fraction at switch-off.
    pub n_e_at_t0: T,
    /// Figures from the axial intensity.
    pub axial: CurveDecay<T>,
    /// Figures from the total (all-direction) emission rate.
    pub total: CurveDecay<T>,
    /// Human-readable notes on failed or degenerate fits.
    pub flags: Vec<String>,
}

impl<T: Real> DecayAnalysis<T> {
    pub fn tau_super(&self) -> T {
        self.axial.tau_super
    }

    pub fn tau_sub(&self) -> T {
        self.axial.tau_sub
    }

    pub fn n_super(&self) -> T {
        self.axial.n_super
    }

    pub fn n_sub(&self) -> T {
        self.axial.n_sub
    }
}

fn value_at<T: Real>(times: &[T], values: &[T], t: T) -> Option<T> {
    let k = times.partition_point(|&x| x < t);
    if k < times.len() && times[k] == t {
        return Some(values[k]);
    }
    if k == 0 || k == times.len() {
        return None;
    }
    let f = (t - times[k - 1]) / (times[k] - times[k - 1]);
    Some(values[k - 1] + f * (values[k] - values[k - 1]))
}

fn curve_decay<T: Real>(
    label: &str,
    times: &[T],
    values: &[T],
    t0: T,
    windows: &DecayWindows<T>,
    model: FitModel,
    flags: &mut Vec<String>,
) -> Result<CurveDecay<T>> {
    let t_last = *times.last().expect("nonempty");
    let fit = |name: &str, w: Window<T>, flags: &mut Vec<String>| match fit_with_model(model, times, values, &w) {
        Ok(f) => {
            if !f.decaying {
                flags.push(format!("{label} {name} fit: no decay"));
            }
            if f.samples_excluded > 0 {
                flags.push(format!("{label} {name} fit: {} nonpositive samples dropped", f.samples_excluded));
            }
            (f.tau, Some(f))
        }
        Err(e @ Error::InsufficientSamples { .. }) => {
            flags.push(format!("{label} {name} fit: {e}"));
            (T::nan(), None)
        }
        Err(e) => {
            flags.push(format!("{label} {name} fit: {e}"));
            (T::nan(), None)
        }
    };
    let (tau_super, super_fit) = fit("early", windows.super_fit(t0), flags);
    let (tau_sub, sub_fit) = fit("late", windows.sub(t0, t_last), flags);
    Ok(CurveDecay {
        tau_super,
        tau_sub,
        n_super: integrate_window(times, values, &windows.super_count(t0))?,
        n_sub: integrate_window(times, values, &windows.sub(t0, t_last))?,
        super_fit,
        sub_fit,
    })
}

/// Analyses a trajectory whose drive switched off at `t0`, with the pure
/// exponential model.
pub fn analyze_decay<T: Real>(
    trajectory: &EmissionTrajectory<T>,
    t0: T,
    windows: &DecayWindows<T>,
) -> Result<DecayAnalysis<T>> {
    analyze_decay_with(trajectory, t0, windows, FitModel::Pure)
}

pub fn analyze_decay_with<T: Real>(
    trajectory: &EmissionTrajectory<T>,
    t0: T,
    windows: &DecayWindows<T>,
    model: FitModel,
) -> Result<DecayAnalysis<T>> {
    windows.validate()?;
    let times = &trajectory.times;
    let (Some(&first), Some(&last)) = (times.first(), times.last()) else {
        return Err(Error::Domain("empty trajectory".into()));
    };
    if t0 < first {
        return Err(Error::Domain(format!("switch-off {t0} precedes the record start {first}")));
    }
    let need = t0 + windows.required_record();
    // grid round-off of a few ulps is tolerated
    if last < need - need.abs() * T::of(1e-12) {
        return Err(Error::Domain(format!("record ends at {last}; the analysis needs data up to {need}")));
    }
    let n_e_at_t0 = value_at(times, &trajectory.n_e, t0).expect("t0 lies inside the record");
    let mut flags = Vec::new();
    let axial = curve_decay("axial", times, &trajectory.axial_intensity, t0, windows, model, &mut flags)?;
    let total = curve_decay("total", times, &trajectory.total_rate, t0, windows, model, &mut flags)?;
    Ok(DecayAnalysis { t0, n_e_at_t0, axial, total, flags })
}
