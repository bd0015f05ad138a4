//! The stages behind the command-line subcommands.

use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::analysis::{
    aggregate, build_reports, detection_coverage, emit_report, fluid_fits, phase_errors, report, AggregateResult,
    AnalysisError, FluidFit, ReportBundle, TrajectoryReport,
};
use crate::config::{BackendChoice, ConfigError, RunConfig};
use crate::cot::{
    expected_calls, Backend, BackendError, FrameStore, Job, OracleBackend, RemoteBackend, ReplayBackend, Runner,
    Session, SessionStatus, StoreError,
};
use crate::physics::{enumerate_grid, state_at, Domain, StimulusSpec};
use crate::render::{render_scene, CanvasStyle, Frame, Provenance, RenderError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{failed} of {total} sessions failed in the backend")]
    BackendFailures { failed: usize, total: usize },
    #[error("detection coverage {found}/{total} is below {threshold}")]
    Coverage { found: usize, total: usize, threshold: f64 },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("rendering stimulus {id}: {source}")]
    Render { id: String, source: RenderError },
}

impl PipelineError {
    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Backend(BackendError::Config(_)) => 2,
            PipelineError::Backend(_) | PipelineError::BackendFailures { .. } => 3,
            PipelineError::Coverage { .. } => 4,
            _ => 1,
        }
    }
}

/// Input frames of a stimulus, rendered from ground truth.
pub fn render_inputs(spec: &StimulusSpec) -> Result<Vec<Frame>, RenderError> {
    let style = CanvasStyle::for_domain(spec.domain());
    spec.input_frame_times
        .iter()
        .map(|&t| Ok(render_scene(&state_at(spec, t), spec, &style)?.with_time(t, Provenance::Input)))
        .collect()
}

/// Grid stimuli selected by the config.
pub fn select_stimuli(cfg: &RunConfig) -> Vec<StimulusSpec> {
    let mut out = Vec::new();
    for &d in &cfg.domains {
        for spec in enumerate_grid(d, &cfg.grid) {
            if cfg.stimulus_filter.as_deref().is_none_or(|f| spec.stimulus_id.contains(f)) {
                out.push(spec);
            }
        }
    }
    out
}

/// Render and store every selected stimulus.
pub fn gen_stimuli(cfg: &RunConfig) -> Result<Vec<(Arc<StimulusSpec>, Arc<Vec<Frame>>)>, PipelineError> {
    let store = FrameStore::new(cfg.store_dir());
    select_stimuli(cfg)
        .into_iter()
        .map(|spec| {
            let frames = render_inputs(&spec).map_err(|source| PipelineError::Render { id: spec.stimulus_id.clone(), source })?;
            store.write_stimulus(&spec, &frames)?;
            Ok((Arc::new(spec), Arc::new(frames)))
        })
        .collect()
}

pub fn make_backend(cfg: &RunConfig) -> Result<Arc<dyn Backend>, PipelineError> {
    Ok(match cfg.backend.kind {
        BackendChoice::Oracle => Arc::new(OracleBackend {
            id: cfg.backend.oracle_id.clone(),
            noise: cfg.noise.clone(),
            bias: cfg.bias.clone(),
            detectors: cfg.detectors.clone(),
        }),
        BackendChoice::Remote => {
            let var = &cfg.backend.remote.credential_env;
            if std::env::var_os(var).is_none() {
                return Err(ConfigError::Invalid(format!("environment variable {var} is not set")).into());
            }
            Arc::new(RemoteBackend::new(cfg.backend.remote.clone())?)
        }
        BackendChoice::Replay => {
            let src = cfg.backend.replay_store.clone().ok_or_else(|| {
                ConfigError::Invalid("replay backend needs backend.replay_store".into())
            })?;
            Arc::new(ReplayBackend::new(FrameStore::new(src), cfg.backend.replay_source_id.clone())?)
        }
    })
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub sessions: Vec<Session>,
    /// Backend calls issued by this invocation.
    pub calls: u64,
    /// Calls a run from an empty store would issue.
    pub expected_calls: u64,
}

impl RunSummary {
    pub fn count(&self, status: SessionStatus) -> usize {
        self.sessions.iter().filter(|s| s.status == status).count()
    }
}

/// Run every (stimulus, method, sample) session of the config.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, PipelineError> {
    let stimuli = gen_stimuli(cfg)?;
    let backend = make_backend(cfg)?;
    run_with_backend(cfg, &stimuli, backend)
}

pub fn run_with_backend(
    cfg: &RunConfig,
    stimuli: &[(Arc<StimulusSpec>, Arc<Vec<Frame>>)],
    backend: Arc<dyn Backend>,
) -> Result<RunSummary, PipelineError> {
    let methods = cfg.method_configs()?;
    let runner = Runner::new(FrameStore::new(cfg.store_dir()), backend)
        .with_context(cfg.context)
        .with_wall_clock(cfg.record_wall_clock);
    let mut jobs = Vec::new();
    let mut expected = 0;
    for d in Domain::ALL {
        let of_domain: Vec<_> = stimuli.iter().filter(|(s, _)| s.domain() == d).collect();
        let n = cfg.samples_for(d);
        expected += expected_calls(of_domain.len(), n, &methods);
        for (spec, inputs) in of_domain {
            for &method in &methods {
                for sample in 0..n {
                    jobs.push(Job { spec: spec.clone(), inputs: inputs.clone(), method, sample_index: sample });
                }
            }
        }
    }
    let sessions = runner.run_jobs(&jobs, cfg.seed, cfg.parallel)?;
    Ok(RunSummary { sessions, calls: runner.calls(), expected_calls: expected })
}

/// Detect and score every stored session; writes `trajectories.csv` to `out`.
pub fn detect(cfg: &RunConfig, out: &Path) -> Result<Vec<TrajectoryReport>, PipelineError> {
    let store = FrameStore::new(cfg.store_dir());
    let reports = build_reports(&store, &cfg.detectors)?;
    std::fs::create_dir_all(out).map_err(|source| AnalysisError::Io { path: out.to_path_buf(), source })?;
    let path = out.join(report::TRAJECTORIES_CSV);
    std::fs::write(&path, report::trajectories_csv(&reports)?).map_err(|source| AnalysisError::Io { path, source })?;
    Ok(reports)
}

/// Fail with [`PipelineError::Coverage`] when too few frames were detected.
pub fn check_coverage(cfg: &RunConfig, reports: &[TrajectoryReport]) -> Result<(usize, usize), PipelineError> {
    let (found, total) = detection_coverage(reports);
    let threshold = cfg.analysis.min_detection_coverage;
    if total > 0 && (found as f64) < threshold * total as f64 {
        return Err(PipelineError::Coverage { found, total, threshold });
    }
    Ok((found, total))
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub aggregates: Vec<AggregateResult>,
    pub phase: Vec<AggregateResult>,
    pub fits: Vec<FluidFit>,
}

pub fn analyze(cfg: &RunConfig, reports: &[TrajectoryReport]) -> Result<Analysis, PipelineError> {
    let opts = &cfg.analysis.aggregate;
    Ok(Analysis {
        aggregates: aggregate(reports, opts)?,
        phase: phase_errors(reports, opts)?,
        fits: fluid_fits(reports),
    })
}

/// Write summary and fit tables to `out`.
pub fn write_analysis(analysis: &Analysis, out: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(out).map_err(|source| AnalysisError::Io { path: out.to_path_buf(), source })?;
    for (name, bytes) in [
        (report::SUMMARY_CSV, report::summary_csv(&analysis.aggregates, &analysis.phase)?),
        (report::FITS_CSV, report::fits_csv(&analysis.fits)?),
    ] {
        let path = out.join(name);
        std::fs::write(&path, bytes).map_err(|source| AnalysisError::Io { path, source })?;
    }
    Ok(())
}

pub fn write_report(
    cfg: &RunConfig,
    reports: Vec<TrajectoryReport>,
    analysis: Analysis,
    out: &Path,
) -> Result<Vec<std::path::PathBuf>, PipelineError> {
    let bundle = ReportBundle {
        aggregates: analysis.aggregates,
        phase: analysis.phase,
        reports,
        fits: analysis.fits,
        settings: cfg.to_toml(),
    };
    Ok(emit_report(&bundle, out)?)
}

/// Run, detect, check coverage, analyze and report into `cfg.out`.
pub fn all(cfg: &RunConfig) -> Result<RunSummary, PipelineError> {
    let summary = run(cfg)?;
    let failed = summary.count(SessionStatus::BackendFailed);
    let reports = detect(cfg, &cfg.out)?;
    let analysis = analyze(cfg, &reports)?;
    write_analysis(&analysis, &cfg.out)?;
    write_report(cfg, reports.clone(), analysis, &cfg.out.join("report"))?;
    if failed > 0 {
        return Err(PipelineError::BackendFailures { failed, total: summary.sessions.len() });
    }
    check_coverage(cfg, &reports)?;
    Ok(summary)
}
