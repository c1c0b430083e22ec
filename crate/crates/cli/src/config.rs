//! Experiment configuration: TOML text in, validated [`ExperimentConfig`] out.
//!
//! Every section is optional except `[geometry]` and `[drive]`. Times and
//! lengths are in `1/Gamma0` and `lambda0`; fields with an `_ns` or
//! `_mw_cm2` suffix are SI alternatives converted on load.

use serde::{Deserialize, Serialize};

use dicke_core::analysis::{DecayWindows, FitModel};
use dicke_core::ensemble::{EnsembleOptions, EnsembleSpec, Orientation, Sampler};
use dicke_core::greens::{linear_dipole, sigma_minus_dipole, sigma_plus_dipole, AtomConfiguration, Dipole, MIN_SEPARATION};
use dicke_core::observables::{ObservablesConfig, StateTag};
use dicke_core::propagator::{DriftBounds, DrivePulse, Method, DEFAULT_MAX_ATOMS};
use dicke_core::units::{rabi_to_saturation, saturation_to_rabi, TransitionSpec};
use dicke_core::Vec3;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTransition {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda0_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma0_per_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isat_w_m2: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGeometry {
    pub sampler: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_atoms: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_ax: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<Vec3<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<Vec3<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orientation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dipole: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dipole_axis: Option<Vec3<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEnsemble {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_realizations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intensity_jitter_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_atoms: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check_positivity: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDrive {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rabi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intensity_mw_cm2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detuning: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_hat: Option<Vec3<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_ns: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSchedule {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_after: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_after_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawWindows {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub super_fit_start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub super_fit_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub super_count_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sub_start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sub_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_background: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawObservables {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_ax_hat: Option<Vec3<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tags: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub durations: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub durations_ns: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analysis: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realizations: Option<String>,
}

/// The config file as written, before defaults and validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<RawTransition>,
    pub geometry: RawGeometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<RawEnsemble>,
    pub drive: RawDrive,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<RawSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows: Option<RawWindows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observables: Option<RawObservables>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<RawSweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<RawOutput>,
}

/// Dipole orientation shared by all atoms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DipoleKind {
    SigmaMinus,
    SigmaPlus,
    Linear,
}

impl DipoleKind {
    fn name(self) -> &'static str {
        match self {
            DipoleKind::SigmaMinus => "sigma_minus",
            DipoleKind::SigmaPlus => "sigma_plus",
            DipoleKind::Linear => "linear",
        }
    }
}

/// Integration settings after defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    pub dt: f64,
    pub record_after: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_step: Option<f64>,
    pub method: Method,
}

/// Output file names, relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub trajectory: String,
    /// Base name; `.csv` and `.json` are appended.
    pub analysis: String,
    pub manifest: String,
    pub realizations: String,
}

/// Fully resolved and validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub transition: TransitionSpec,
    pub ensemble: EnsembleSpec<f64>,
    pub dipole_kind: DipoleKind,
    pub dipole_axis: Vec3<f64>,
    pub check_positivity: bool,
    /// Drive with `t_off` set to the pulse duration.
    pub drive: DrivePulse<f64>,
    pub schedule: ScheduleConfig,
    pub windows: DecayWindows<f64>,
    pub fit_model: FitModel,
    pub observables: ObservablesConfig<f64>,
    pub sweep: Option<Vec<f64>>,
    pub output: OutputConfig,
}

/// Realizations drawn by the random samplers when `n_realizations` is absent.
pub const DEFAULT_REALIZATIONS: usize = 1000;

/// Default sample spacing of recorded trajectories, in `1/Gamma0`.
pub const DEFAULT_DT: f64 = 0.01;

fn semantic(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn exclusive<T: Copy>(field_a: &str, a: Option<T>, field_b: &str, b: Option<T>) -> Result<Option<(bool, T)>, CliError> {
    match (a, b) {
        (Some(_), Some(_)) => Err(semantic(field_a, format!("give either `{field_a}` or `{field_b}`, not both"))),
        (Some(x), None) => Ok(Some((true, x))),
        (None, Some(y)) => Ok(Some((false, y))),
        (None, None) => Ok(None),
    }
}

fn finite_positive(field: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(semantic(field, format!("must be finite and > 0, got {v}")))
    }
}

fn finite_nonneg(field: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(semantic(field, format!("must be finite and >= 0, got {v}")))
    }
}

fn unit(field: &str, v: Vec3<f64>) -> Result<Vec3<f64>, CliError> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
        Ok(v)
    } else if n.is_finite() && n > 0.0 {
        Ok(v.map(|c| c / n))
    } else {
        Err(semantic(field, "must be a nonzero finite vector"))
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Parses and validates config text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    if text.trim().is_empty() {
        return Err(CliError::Syntax { line: 1, column: 1, message: "configuration is empty".into() });
    }
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        CliError::Syntax { line, column, message: e.message().trim().to_string() }
    })?;
    resolve(raw)
}

/// Applies defaults, converts SI fields, and validates cross-references.
pub fn resolve(raw: RawConfig) -> Result<ExperimentConfig, CliError> {
    let rt = raw.transition.unwrap_or_default();
    let d = TransitionSpec::default();
    let transition = TransitionSpec::new(
        rt.lambda0_m.unwrap_or(d.lambda0()),
        rt.gamma0_per_s.unwrap_or(d.gamma0()),
        rt.isat_w_m2.unwrap_or(d.isat()),
    )
    .map_err(|e| semantic("transition", e))?;

    // geometry
    let g = raw.geometry;
    let dipole_kind = match g.dipole.as_deref().unwrap_or("sigma_minus") {
        "sigma_minus" => DipoleKind::SigmaMinus,
        "sigma_plus" => DipoleKind::SigmaPlus,
        "linear" => DipoleKind::Linear,
        other => return Err(semantic("geometry.dipole", format!("unknown dipole `{other}` (sigma_minus, sigma_plus, linear)"))),
    };
    let dipole_axis = unit("geometry.dipole_axis", g.dipole_axis.unwrap_or([0.0, 1.0, 0.0]))?;
    let dipole: Dipole<f64> = match dipole_kind {
        DipoleKind::SigmaMinus => sigma_minus_dipole(dipole_axis),
        DipoleKind::SigmaPlus => sigma_plus_dipole(dipole_axis),
        DipoleKind::Linear => linear_dipole(dipole_axis),
    }
    .map_err(|e| semantic("geometry.dipole_axis", e))?;
    let need = |field: &str, v: Option<f64>| v.ok_or_else(|| semantic(&format!("geometry.{field}"), "required by this sampler"));
    let sampler = match g.sampler.as_str() {
        "fixed_pair" => Sampler::FixedPair { distance: finite_positive("geometry.distance", need("distance", g.distance)?)? },
        "gaussian_cloud" => Sampler::GaussianCloud {
            n_atoms: g.n_atoms.ok_or_else(|| semantic("geometry.n_atoms", "required by this sampler"))?,
            sigma_ax: finite_positive("geometry.sigma_ax", need("sigma_ax", g.sigma_ax)?)?,
            sigma_rad: finite_positive("geometry.sigma_rad", need("sigma_rad", g.sigma_rad)?)?,
        },
        "chain" => Sampler::Chain {
            n_atoms: g.n_atoms.ok_or_else(|| semantic("geometry.n_atoms", "required by this sampler"))?,
            spacing: finite_positive("geometry.spacing", need("spacing", g.spacing)?)?,
            axis: unit("geometry.axis", g.axis.unwrap_or([1.0, 0.0, 0.0]))?,
        },
        "explicit" => Sampler::Explicit {
            positions: g.positions.clone().ok_or_else(|| semantic("geometry.positions", "required by this sampler"))?,
        },
        other => {
            return Err(semantic(
                "geometry.sampler",
                format!("unknown sampler `{other}` (fixed_pair, gaussian_cloud, chain, explicit)"),
            ))
        }
    };
    let stray = [
        ("distance", g.distance.is_some(), matches!(sampler, Sampler::FixedPair { .. })),
        ("n_atoms", g.n_atoms.is_some(), matches!(sampler, Sampler::GaussianCloud { .. } | Sampler::Chain { .. })),
        ("sigma_ax", g.sigma_ax.is_some(), matches!(sampler, Sampler::GaussianCloud { .. })),
        ("sigma_rad", g.sigma_rad.is_some(), matches!(sampler, Sampler::GaussianCloud { .. })),
        ("spacing", g.spacing.is_some(), matches!(sampler, Sampler::Chain { .. })),
        ("axis", g.axis.is_some(), matches!(sampler, Sampler::Chain { .. })),
        ("positions", g.positions.is_some(), matches!(sampler, Sampler::Explicit { .. })),
    ];
    if let Some((field, _, _)) = stray.iter().find(|(_, given, used)| *given && !*used) {
        return Err(semantic(&format!("geometry.{field}"), format!("not used by sampler `{}`", g.sampler)));
    }
    let orientation = match g.orientation.as_deref().unwrap_or("solid_angle") {
        "solid_angle" => Orientation::SolidAngle,
        "polar_angle" => Orientation::PolarAngle { axis: dipole_axis },
        other => return Err(semantic("geometry.orientation", format!("unknown measure `{other}` (solid_angle, polar_angle)"))),
    };

    let re = raw.ensemble.unwrap_or_default();
    let random = matches!(sampler, Sampler::FixedPair { .. } | Sampler::GaussianCloud { .. });
    let n_realizations = re.n_realizations.unwrap_or(if random { DEFAULT_REALIZATIONS } else { 1 });
    if n_realizations == 0 {
        return Err(semantic("ensemble.n_realizations", "must be >= 1"));
    }
    let ensemble = EnsembleSpec {
        n_realizations,
        sampler,
        dipole,
        intensity_jitter_rel: finite_nonneg("ensemble.intensity_jitter_rel", re.intensity_jitter_rel.unwrap_or(0.0))?,
        seed: re.seed.unwrap_or(0),
        orientation,
        max_atoms: re.max_atoms.unwrap_or(DEFAULT_MAX_ATOMS),
    };
    ensemble.validate().map_err(|e| semantic("geometry", e))?;
    if let Sampler::Explicit { positions } = &ensemble.sampler {
        AtomConfiguration::new(positions.clone(), dipole)
            .map_err(|e| semantic("geometry.positions", format!("{e} (minimum {MIN_SEPARATION})")))?;
    }

    // drive
    let rd = raw.drive;
    let given = [rd.rabi.is_some(), rd.s.is_some(), rd.intensity_mw_cm2.is_some()];
    if given.iter().filter(|&&b| b).count() != 1 {
        return Err(semantic("drive", "give exactly one of `rabi`, `s` or `intensity_mw_cm2`"));
    }
    let rabi = if let Some(r) = rd.rabi {
        finite_nonneg("drive.rabi", r)?
    } else if let Some(s) = rd.s {
        saturation_to_rabi(finite_nonneg("drive.s", s)?).map_err(|e| semantic("drive.s", e))?
    } else {
        // mW/cm^2 = 10 W/m^2
        let i = finite_nonneg("drive.intensity_mw_cm2", rd.intensity_mw_cm2.unwrap())?;
        saturation_to_rabi(transition.saturation_parameter(10.0 * i)).map_err(|e| semantic("drive.intensity_mw_cm2", e))?
    };
    let duration = match exclusive("drive.duration", rd.duration, "drive.duration_ns", rd.duration_ns)? {
        Some((true, t)) => finite_positive("drive.duration", t)?,
        Some((false, ns)) => finite_positive("drive.duration_ns", transition.ns_to_gamma_units(ns))?,
        None => return Err(semantic("drive.duration", "pulse duration is required (`duration` or `duration_ns`)")),
    };
    let k_hat = unit("drive.k_hat", rd.k_hat.unwrap_or([0.0, 1.0, 0.0]))?;
    let detuning = rd.detuning.unwrap_or(0.0);
    let drive = DrivePulse::new(rabi, detuning, k_hat, duration).map_err(|e| semantic("drive", e))?;

    // windows
    let rw = raw.windows.unwrap_or_default();
    let dw = DecayWindows::<f64>::from_transition(&transition);
    let windows = DecayWindows {
        super_fit_start: rw.super_fit_start.unwrap_or(dw.super_fit_start),
        super_fit_end: rw.super_fit_end.unwrap_or(dw.super_fit_end),
        super_count_end: rw.super_count_end.unwrap_or(dw.super_count_end),
        sub_start: rw.sub_start.unwrap_or(dw.sub_start),
        sub_end: rw.sub_end,
    };
    windows.validate().map_err(|e| semantic("windows", e))?;
    let fit_model = if rw.fit_background.unwrap_or(false) { FitModel::WithBackground } else { FitModel::Pure };

    // schedule
    let rs = raw.schedule.unwrap_or_default();
    let dt = match exclusive("schedule.dt", rs.dt, "schedule.dt_ns", rs.dt_ns)? {
        Some((true, v)) => finite_positive("schedule.dt", v)?,
        Some((false, ns)) => finite_positive("schedule.dt_ns", transition.ns_to_gamma_units(ns))?,
        None => DEFAULT_DT,
    };
    let record_after = match exclusive("schedule.record_after", rs.record_after, "schedule.record_after_ns", rs.record_after_ns)? {
        Some((true, v)) => finite_nonneg("schedule.record_after", v)?,
        Some((false, ns)) => finite_nonneg("schedule.record_after_ns", transition.ns_to_gamma_units(ns))?,
        None => windows.required_record(),
    };
    let method = match rs.method.as_deref().unwrap_or("dopri5") {
        "dopri5" => Method::DormandPrince,
        "rk4" => Method::FixedRk4,
        other => return Err(semantic("schedule.method", format!("unknown method `{other}` (dopri5, rk4)"))),
    };
    let schedule = ScheduleConfig {
        dt,
        record_after,
        rtol: finite_positive("schedule.rtol", rs.rtol.unwrap_or(1e-8))?,
        atol: finite_positive("schedule.atol", rs.atol.unwrap_or(1e-10))?,
        max_step: rs.max_step.map(|h| finite_positive("schedule.max_step", h)).transpose()?,
        method,
    };

    // observables
    let ro = raw.observables.unwrap_or_default();
    let n_atoms = ensemble.sampler.n_atoms();
    let default_tags = if n_atoms == 2 { vec!["plus".to_string(), "minus".to_string()] } else { Vec::new() };
    let tags = ro
        .tags
        .unwrap_or(default_tags)
        .iter()
        .map(|t| match t.as_str() {
            "plus" if n_atoms == 2 => Ok(StateTag::Plus),
            "minus" if n_atoms == 2 => Ok(StateTag::Minus),
            "plus" | "minus" => Err(semantic("observables.tags", format!("`{t}` is defined for two atoms only"))),
            other => Err(semantic("observables.tags", format!("unknown tag `{other}` (plus, minus)"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let observables = ObservablesConfig { k_ax_hat: unit("observables.k_ax_hat", ro.k_ax_hat.unwrap_or([1.0, 0.0, 0.0]))?, tags };

    // sweep
    let sweep = match raw.sweep {
        None => None,
        Some(sw) => {
            let list = exclusive("sweep.durations", sw.durations.as_ref(), "sweep.durations_ns", sw.durations_ns.as_ref())?;
            let range = [sw.start, sw.stop].iter().any(Option::is_some) || sw.count.is_some();
            let durations = match (list, range) {
                (Some(_), true) => return Err(semantic("sweep", "give a duration list or start/stop/count, not both")),
                (Some((true, v)), false) => v.clone(),
                (Some((false, v)), false) => v.iter().map(|ns| transition.ns_to_gamma_units(*ns)).collect(),
                (None, true) => {
                    let (Some(a), Some(b), Some(n)) = (sw.start, sw.stop, sw.count) else {
                        return Err(semantic("sweep", "start, stop and count must be given together"));
                    };
                    if n == 0 {
                        return Err(semantic("sweep.count", "must be >= 1"));
                    }
                    if n == 1 {
                        vec![a]
                    } else {
                        (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
                    }
                }
                (None, false) => return Err(semantic("sweep", "no durations given")),
            };
            if durations.is_empty() {
                return Err(semantic("sweep.durations", "list is empty"));
            }
            if durations.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
                return Err(semantic("sweep.durations", "durations must be positive"));
            }
            if durations.windows(2).any(|w| w[1] <= w[0]) {
                return Err(semantic("sweep.durations", "durations must be strictly increasing"));
            }
            Some(durations)
        }
    };

    let rout = raw.output.unwrap_or_default();
    let output = OutputConfig {
        trajectory: rout.trajectory.unwrap_or_else(|| "trajectory.csv".into()),
        analysis: rout.analysis.unwrap_or_else(|| "analysis".into()),
        manifest: rout.manifest.unwrap_or_else(|| "manifest.json".into()),
        realizations: rout.realizations.unwrap_or_else(|| "realizations.csv".into()),
    };

    Ok(ExperimentConfig {
        transition,
        ensemble,
        dipole_kind,
        dipole_axis,
        check_positivity: re.check_positivity.unwrap_or(true),
        drive,
        schedule,
        windows,
        fit_model,
        observables,
        sweep,
        output,
    })
}

impl ExperimentConfig {
    /// Overrides the ensemble seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.ensemble.seed = seed;
        self
    }

    pub fn ensemble_options(&self, keep_realizations: bool) -> EnsembleOptions {
        EnsembleOptions { keep_realizations, check_positivity: self.check_positivity, ..EnsembleOptions::default() }
    }

    pub fn drift_bounds(&self) -> DriftBounds {
        DriftBounds::default()
    }

    /// The resolved config in the input format, every default spelled out in
    /// dimensionless units. Parsing it yields `self` again.
    pub fn to_raw(&self) -> RawConfig {
        let e = &self.ensemble;
        let mut geometry = RawGeometry {
            orientation: Some(
                match e.orientation {
                    Orientation::SolidAngle => "solid_angle",
                    Orientation::PolarAngle { .. } => "polar_angle",
                }
                .into(),
            ),
            dipole: Some(self.dipole_kind.name().into()),
            dipole_axis: Some(self.dipole_axis),
            ..RawGeometry::default()
        };
        match &e.sampler {
            Sampler::FixedPair { distance } => {
                geometry.sampler = "fixed_pair".into();
                geometry.distance = Some(*distance);
            }
            Sampler::GaussianCloud { n_atoms, sigma_ax, sigma_rad } => {
                geometry.sampler = "gaussian_cloud".into();
                geometry.n_atoms = Some(*n_atoms);
                geometry.sigma_ax = Some(*sigma_ax);
                geometry.sigma_rad = Some(*sigma_rad);
            }
            Sampler::Chain { n_atoms, spacing, axis } => {
                geometry.sampler = "chain".into();
                geometry.n_atoms = Some(*n_atoms);
                geometry.spacing = Some(*spacing);
                geometry.axis = Some(*axis);
            }
            Sampler::Explicit { positions } => {
                geometry.sampler = "explicit".into();
                geometry.positions = Some(positions.clone());
            }
        }
        RawConfig {
            transition: Some(RawTransition {
                lambda0_m: Some(self.transition.lambda0()),
                gamma0_per_s: Some(self.transition.gamma0()),
                isat_w_m2: Some(self.transition.isat()),
            }),
            geometry,
            ensemble: Some(RawEnsemble {
                n_realizations: Some(e.n_realizations),
                seed: Some(e.seed),
                intensity_jitter_rel: Some(e.intensity_jitter_rel),
                max_atoms: Some(e.max_atoms),
                check_positivity: Some(self.check_positivity),
            }),
            drive: RawDrive {
                rabi: Some(self.drive.rabi),
                detuning: Some(self.drive.detuning),
                k_hat: Some(self.drive.k_hat),
                duration: Some(self.drive.t_off),
                ..RawDrive::default()
            },
            schedule: Some(RawSchedule {
                dt: Some(self.schedule.dt),
                record_after: Some(self.schedule.record_after),
                rtol: Some(self.schedule.rtol),
                atol: Some(self.schedule.atol),
                max_step: self.schedule.max_step,
                method: Some(
                    match self.schedule.method {
                        Method::DormandPrince => "dopri5",
                        Method::FixedRk4 => "rk4",
                    }
                    .into(),
                ),
                ..RawSchedule::default()
            }),
            windows: Some(RawWindows {
                super_fit_start: Some(self.windows.super_fit_start),
                super_fit_end: Some(self.windows.super_fit_end),
                super_count_end: Some(self.windows.super_count_end),
                sub_start: Some(self.windows.sub_start),
                sub_end: self.windows.sub_end,
                fit_background: Some(self.fit_model == FitModel::WithBackground),
            }),
            observables: Some(RawObservables {
                k_ax_hat: Some(self.observables.k_ax_hat),
                tags: Some(self.observables.tags.iter().map(|t| t.label().to_string()).collect()),
            }),
            sweep: self.sweep.as_ref().map(|d| RawSweep { durations: Some(d.clone()), ..RawSweep::default() }),
            output: Some(RawOutput {
                trajectory: Some(self.output.trajectory.clone()),
                analysis: Some(self.output.analysis.clone()),
                manifest: Some(self.output.manifest.clone()),
                realizations: Some(self.output.realizations.clone()),
            }),
        }
    }

    /// TOML text of [`to_raw`](Self::to_raw).
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_raw()).expect("resolved config serialises")
    }

    /// Saturation parameter equivalent to the resolved Rabi frequency.
    pub fn saturation(&self) -> f64 {
        rabi_to_saturation(self.drive.rabi).unwrap_or(f64::NAN)
    }
}
