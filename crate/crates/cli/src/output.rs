//! File formats.
//!
//! Trajectory CSV columns, in order:
//! `time, n_e, axial_intensity, total_rate, pop_<tag>...`. Sweep trajectories
//! prepend a `duration` column and stack one block per duration.
//!
//! Analysis CSV columns are [`ANALYSIS_COLUMNS`]; the JSON form carries the
//! same fields with non-finite numbers as `null`.
//!
//! Numbers use Rust's shortest round-trip `f64` formatting, which is
//! locale-independent and exact.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Serialize, Serializer};

use dicke_core::analysis::{CurveDecay, DecayAnalysis, ExpFit};
use dicke_core::ensemble::Realization;
use dicke_core::observables::EmissionTrajectory;

use crate::error::CliError;

pub const TRAJECTORY_COLUMNS: [&str; 4] = ["time", "n_e", "axial_intensity", "total_rate"];

pub const ANALYSIS_COLUMNS: [&str; 21] = [
    "duration",
    "status",
    "t0",
    "n_e_at_t0",
    "tau_super",
    "tau_sub",
    "n_super",
    "n_sub",
    "total_tau_super",
    "total_tau_sub",
    "total_n_super",
    "total_n_sub",
    "super_fit_amplitude",
    "super_fit_background",
    "super_fit_rms",
    "super_fit_samples",
    "sub_fit_amplitude",
    "sub_fit_background",
    "sub_fit_rms",
    "sub_fit_samples",
    "flags",
];

fn num(v: f64) -> String {
    format!("{v}")
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn csv_err(e: csv::Error) -> std::io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => std::io::Error::other(format!("{other:?}")),
    }
}

fn trajectory_header(traj: &EmissionTrajectory<f64>) -> Vec<String> {
    TRAJECTORY_COLUMNS
        .iter()
        .map(|c| c.to_string())
        .chain(traj.tagged_populations.iter().map(|(l, _)| format!("pop_{l}")))
        .collect()
}

fn trajectory_row(traj: &EmissionTrajectory<f64>, k: usize) -> impl Iterator<Item = String> + '_ {
    [traj.times[k], traj.n_e[k], traj.axial_intensity[k], traj.total_rate[k]]
        .into_iter()
        .chain(traj.tagged_populations.iter().map(move |(_, c)| c[k]))
        .map(num)
}

pub fn write_trajectory<W: Write>(w: W, traj: &EmissionTrajectory<f64>) -> std::io::Result<()> {
    let mut out = writer(w);
    out.write_record(trajectory_header(traj)).map_err(csv_err)?;
    for k in 0..traj.len() {
        out.write_record(trajectory_row(traj, k)).map_err(csv_err)?;
    }
    out.flush()
}

/// Long format: one block per sweep duration.
pub fn write_sweep_trajectories<W: Write>(w: W, blocks: &[(f64, &EmissionTrajectory<f64>)]) -> std::io::Result<()> {
    let mut out = writer(w);
    let Some((_, first)) = blocks.first() else {
        return out.flush();
    };
    let mut header = vec!["duration".to_string()];
    header.extend(trajectory_header(first));
    out.write_record(&header).map_err(csv_err)?;
    for (d, traj) in blocks {
        for k in 0..traj.len() {
            out.write_record(std::iter::once(num(*d)).chain(trajectory_row(traj, k))).map_err(csv_err)?;
        }
    }
    out.flush()
}

pub fn write_realizations<W: Write>(w: W, realizations: &[Realization<f64>]) -> std::io::Result<()> {
    let mut out = writer(w);
    let Some(first) = realizations.first() else {
        return out.flush();
    };
    let mut header = vec!["realization".to_string(), "rabi".to_string()];
    header.extend(trajectory_header(&first.trajectory));
    out.write_record(&header).map_err(csv_err)?;
    for r in realizations {
        for k in 0..r.trajectory.len() {
            let lead = [r.index.to_string(), num(r.rabi)];
            out.write_record(lead.into_iter().chain(trajectory_row(&r.trajectory, k))).map_err(csv_err)?;
        }
    }
    out.flush()
}

/// A stored trajectory; `duration` is set for sweep files.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredTrajectory {
    pub duration: Option<f64>,
    pub trajectory: EmissionTrajectory<f64>,
}

/// Reads a file written by [`write_trajectory`] or
/// [`write_sweep_trajectories`].
pub fn read_trajectories<R: Read>(r: R, path: &Path) -> Result<Vec<StoredTrajectory>, CliError> {
    let data = |message: String| CliError::Data { path: path.to_path_buf(), message };
    let mut rdr = csv::ReaderBuilder::new().from_reader(r);
    let header: Vec<String> = rdr.headers().map_err(|e| data(e.to_string()))?.iter().map(str::to_string).collect();
    let swept = header.first().map(String::as_str) == Some("duration");
    let base = usize::from(swept);
    if header.len() < base + 4 || header[base..base + 4] != TRAJECTORY_COLUMNS {
        return Err(data(format!("unexpected header {header:?}")));
    }
    let mut labels = Vec::new();
    for h in &header[base + 4..] {
        labels.push(h.strip_prefix("pop_").ok_or_else(|| data(format!("unexpected column `{h}`")))?.to_string());
    }

    let mut out: Vec<StoredTrajectory> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| data(e.to_string()))?;
        let vals = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| data(format!("row {}: {e}", line + 2)))?;
        let duration = swept.then(|| vals[0]);
        if out.last().is_none_or(|s| s.duration != duration) {
            out.push(StoredTrajectory { duration, trajectory: EmissionTrajectory::empty(&labels) });
        }
        let t = &mut out.last_mut().expect("pushed").trajectory;
        let v = &vals[base..];
        t.times.push(v[0]);
        t.n_e.push(v[1]);
        t.axial_intensity.push(v[2]);
        t.total_rate.push(v[3]);
        for ((_, col), x) in t.tagged_populations.iter_mut().zip(&v[4..]) {
            col.push(*x);
        }
    }
    if out.is_empty() {
        return Err(data("no samples".into()));
    }
    for s in &out {
        s.trajectory.validate(f64::INFINITY).map_err(|e| data(e.to_string()))?;
    }
    Ok(out)
}

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// Summary of one exponential fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitSummary {
    #[serde(serialize_with = "finite_or_null")]
    pub amplitude: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub background: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub rms_residual: f64,
    pub samples: usize,
}

impl From<&ExpFit<f64>> for FitSummary {
    fn from(f: &ExpFit<f64>) -> Self {
        Self { amplitude: f.amplitude, background: f.background, rms_residual: f.rms_residual, samples: f.samples_used }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveSummary {
    #[serde(serialize_with = "finite_or_null")]
    pub tau_super: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub tau_sub: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub n_super: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub n_sub: f64,
    pub super_fit: Option<FitSummary>,
    pub sub_fit: Option<FitSummary>,
}

impl From<&CurveDecay<f64>> for CurveSummary {
    fn from(c: &CurveDecay<f64>) -> Self {
        Self {
            tau_super: c.tau_super,
            tau_sub: c.tau_sub,
            n_super: c.n_super,
            n_sub: c.n_sub,
            super_fit: c.super_fit.as_ref().map(FitSummary::from),
            sub_fit: c.sub_fit.as_ref().map(FitSummary::from),
        }
    }
}

/// One analysis row. Failed points keep their place with `status = "error"`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisRow {
    pub duration: f64,
    pub status: &'static str,
    #[serde(serialize_with = "finite_or_null")]
    pub t0: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub n_e_at_t0: f64,
    pub axial: Option<CurveSummary>,
    pub total: Option<CurveSummary>,
    pub flags: Vec<String>,
}

impl AnalysisRow {
    pub fn new(duration: f64, outcome: &Result<DecayAnalysis<f64>, String>) -> Self {
        match outcome {
            Ok(a) => Self {
                duration,
                status: "ok",
                t0: a.t0,
                n_e_at_t0: a.n_e_at_t0,
                axial: Some((&a.axial).into()),
                total: Some((&a.total).into()),
                flags: a.flags.clone(),
            },
            Err(msg) => Self {
                duration,
                status: "error",
                t0: f64::NAN,
                n_e_at_t0: f64::NAN,
                axial: None,
                total: None,
                flags: vec![msg.clone()],
            },
        }
    }

    fn csv_fields(&self) -> Vec<String> {
        let blank = String::new;
        let curve = |c: Option<CurveSummary>| match c {
            Some(c) => vec![num(c.tau_super), num(c.tau_sub), num(c.n_super), num(c.n_sub)],
            None => vec![blank(); 4],
        };
        let fit = |f: Option<FitSummary>| match f {
            Some(f) => vec![num(f.amplitude), num(f.background), num(f.rms_residual), f.samples.to_string()],
            None => vec![blank(); 4],
        };
        let ok = self.status == "ok";
        let mut v = vec![
            num(self.duration),
            self.status.to_string(),
            if ok { num(self.t0) } else { blank() },
            if ok { num(self.n_e_at_t0) } else { blank() },
        ];
        v.extend(curve(self.axial));
        v.extend(curve(self.total));
        v.extend(fit(self.axial.and_then(|c| c.super_fit)));
        v.extend(fit(self.axial.and_then(|c| c.sub_fit)));
        v.push(self.flags.join("; "));
        v
    }
}

pub fn write_analysis_csv<W: Write>(w: W, rows: &[AnalysisRow]) -> std::io::Result<()> {
    let mut out = writer(w);
    out.write_record(ANALYSIS_COLUMNS).map_err(csv_err)?;
    for r in rows {
        out.write_record(r.csv_fields()).map_err(csv_err)?;
    }
    out.flush()
}

pub fn write_analysis_json<W: Write>(mut w: W, rows: &[AnalysisRow]) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut w, rows)?;
    w.write_all(b"\n")
}

/// Worst-case numerical diagnostics over every realization of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Hygiene {
    pub max_trace_drift: f64,
    pub max_hermiticity_residue: f64,
    pub min_final_eigenvalue: Option<f64>,
    pub realizations_succeeded: usize,
    pub realizations_failed: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Hygiene {
    pub fn merge(&mut self, other: &Hygiene) {
        self.max_trace_drift = self.max_trace_drift.max(other.max_trace_drift);
        self.max_hermiticity_residue = self.max_hermiticity_residue.max(other.max_hermiticity_residue);
        self.min_final_eigenvalue = match (self.min_final_eigenvalue, other.min_final_eigenvalue) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.realizations_succeeded += other.realizations_succeeded;
        self.realizations_failed += other.realizations_failed;
        self.accepted_steps += other.accepted_steps;
        self.rejected_steps += other.rejected_steps;
    }
}

/// Run record written next to the data files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub program: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub hygiene: Option<Hygiene>,
    /// Resolved configuration, as TOML.
    pub config: String,
}

pub fn write_manifest<W: Write>(mut w: W, m: &Manifest) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut w, m)?;
    w.write_all(b"\n")
}
