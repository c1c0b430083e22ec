use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use dicke_core::analysis::{analyze_decay_with, SweepPlan};
use dicke_core::ensemble::{run_ensemble, EnsembleResult};
use dicke_core::propagator::EvolutionSchedule;

use crate::config::{parse_config, ExperimentConfig};
use crate::error::CliError;
use crate::output::{
    read_trajectories, write_analysis_csv, write_analysis_json, write_manifest, write_realizations,
    write_sweep_trajectories, write_trajectory, AnalysisRow, Hygiene, Manifest,
};

/// Name of the resolved config echo written to the output directory.
pub const RESOLVED_CONFIG: &str = "resolved.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Simulate,
    Sweep,
    Analyze,
}

impl Verb {
    fn name(self) -> &'static str {
        match self {
            Verb::Simulate => "simulate",
            Verb::Sweep => "sweep",
            Verb::Analyze => "analyze",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out_dir: PathBuf,
    pub keep_realizations: bool,
    /// Trajectory file read by `analyze`; defaults to the configured
    /// trajectory file inside `out_dir`.
    pub input: Option<PathBuf>,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self { seed: None, jobs: None, out_dir: out_dir.into(), keep_realizations: false, input: None }
    }
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub rows: Vec<AnalysisRow>,
    pub hygiene: Option<Hygiene>,
    pub outputs: Vec<PathBuf>,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}

fn hygiene_of(r: &EnsembleResult<f64>) -> Hygiene {
    Hygiene {
        max_trace_drift: r.stats.max_trace_drift,
        max_hermiticity_residue: r.stats.max_hermiticity_residue,
        min_final_eigenvalue: r.min_final_eigenvalue,
        realizations_succeeded: r.succeeded,
        realizations_failed: r.failures.len(),
        accepted_steps: r.stats.integration.accepted,
        rejected_steps: r.stats.integration.rejected,
    }
}

struct Sink<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl Sink<'_> {
    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }
}

fn schedule_for(cfg: &ExperimentConfig) -> Result<EvolutionSchedule<f64>, CliError> {
    let s = &cfg.schedule;
    let t0 = cfg.drive.t_off;
    let mut sched = EvolutionSchedule::uniform(t0 + s.record_after, s.dt, t0)?
        .with_tolerances(s.rtol, s.atol)
        .with_method(s.method)
        .with_bounds(cfg.drift_bounds());
    if let Some(h) = s.max_step {
        sched = sched.with_max_step(h);
    }
    Ok(sched)
}

fn sweep_plan(cfg: &ExperimentConfig, keep: bool) -> SweepPlan<f64> {
    let s = &cfg.schedule;
    SweepPlan {
        observables: cfg.observables.clone(),
        windows: cfg.windows,
        model: cfg.fit_model,
        record_after: Some(s.record_after),
        rtol: s.rtol,
        atol: s.atol,
        max_step: s.max_step,
        method: s.method,
        options: cfg.ensemble_options(keep),
        ..SweepPlan::new(cfg.ensemble.clone(), cfg.drive, s.dt)
    }
}

fn simulate(cfg: &ExperimentConfig, opts: &RunOptions, sink: &mut Sink) -> Result<(Vec<AnalysisRow>, Option<Hygiene>), CliError> {
    let schedule = schedule_for(cfg)?;
    let options = cfg.ensemble_options(opts.keep_realizations);
    let result = run_ensemble(&cfg.ensemble, &cfg.drive, &schedule, &cfg.observables, &options)?;
    let t0 = cfg.drive.t_off;
    let outcome = analyze_decay_with(&result.mean, t0, &cfg.windows, cfg.fit_model).map_err(|e| e.to_string());
    let row = AnalysisRow::new(t0, &outcome);
    sink.write(&cfg.output.trajectory, |w| write_trajectory(w, &result.mean))?;
    if let Some(reals) = &result.realizations {
        sink.write(&cfg.output.realizations, |w| write_realizations(w, reals))?;
    }
    Ok((vec![row], Some(hygiene_of(&result))))
}

fn sweep(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<(Vec<AnalysisRow>, Option<Hygiene>), CliError> {
    let durations = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep: a [sweep] section is required for the sweep verb".into()))?;
    let plan = sweep_plan(cfg, false);
    let points: Vec<_> = durations.par_iter().map(|&d| (d, plan.run_point(d))).collect();

    let mut hygiene = Hygiene::default();
    let mut rows = Vec::with_capacity(points.len());
    let mut blocks = Vec::new();
    for (d, p) in &points {
        match p {
            Ok((a, r)) => {
                hygiene.merge(&hygiene_of(r));
                rows.push(AnalysisRow::new(*d, &Ok(a.clone())));
                blocks.push((*d, &r.mean));
            }
            Err(e) => rows.push(AnalysisRow::new(*d, &Err(e.to_string()))),
        }
    }
    if blocks.is_empty() {
        let (_, first) = points.into_iter().find_map(|(d, p)| p.err().map(|e| (d, e))).expect("some point failed");
        return Err(first.into());
    }
    sink.write(&cfg.output.trajectory, |w| write_sweep_trajectories(w, &blocks))?;
    Ok((rows, Some(hygiene)))
}

fn analyze(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<AnalysisRow>, CliError> {
    let path = opts.input.clone().unwrap_or_else(|| opts.out_dir.join(&cfg.output.trajectory));
    let file = File::open(&path).map_err(|e| CliError::io(&path, e))?;
    let stored = read_trajectories(BufReader::new(file), &path)?;
    Ok(stored
        .par_iter()
        .map(|s| {
            let t0 = s.duration.unwrap_or(cfg.drive.t_off);
            let outcome = analyze_decay_with(&s.trajectory, t0, &cfg.windows, cfg.fit_model).map_err(|e| e.to_string());
            AnalysisRow::new(t0, &outcome)
        })
        .collect())
}

fn execute_inner(verb: Verb, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let start = Instant::now();
    fs::create_dir_all(&opts.out_dir).map_err(|e| CliError::io(&opts.out_dir, e))?;
    let mut sink = Sink { dir: &opts.out_dir, written: Vec::new() };
    let (rows, hygiene) = match verb {
        Verb::Simulate => simulate(cfg, opts, &mut sink)?,
        Verb::Sweep => sweep(cfg, &mut sink)?,
        Verb::Analyze => (analyze(cfg, opts)?, None),
    };
    let base = &cfg.output.analysis;
    sink.write(&format!("{base}.csv"), |w| write_analysis_csv(w, &rows))?;
    sink.write(&format!("{base}.json"), |w| write_analysis_json(w, &rows))?;
    let resolved = cfg.to_toml();
    sink.write(RESOLVED_CONFIG, |w| w.write_all(resolved.as_bytes()))?;

    let mut outputs: Vec<String> = sink
        .written
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    outputs.push(cfg.output.manifest.clone());
    let manifest = Manifest {
        program: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: verb.name().to_string(),
        seed: cfg.ensemble.seed,
        jobs: opts.jobs,
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs,
        hygiene,
        config: resolved,
    };
    sink.write(&cfg.output.manifest, |w| write_manifest(w, &manifest))?;
    Ok(RunSummary { rows, hygiene, outputs: sink.written })
}

/// Runs `verb` on a resolved config, on a dedicated pool when `jobs` is set.
pub fn execute(verb: Verb, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let cfg = match opts.seed {
        Some(seed) => cfg.clone().with_seed(seed),
        None => cfg.clone(),
    };
    match opts.jobs {
        Some(n) => {
            if n == 0 {
                return Err(CliError::Config("--jobs: must be >= 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
            pool.install(|| execute_inner(verb, &cfg, opts))
        }
        None => execute_inner(verb, &cfg, opts),
    }
}
