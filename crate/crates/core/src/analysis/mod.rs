//! Trajectory scoring, aggregation and report emission.

mod metrics;
pub mod report;
mod svg;

pub use metrics::{aggregate_ci, fit_line, rmse, LineFit, RmseCi, DEFAULT_RESAMPLES};
pub use report::{emit_report, ReportBundle};

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cot::{FrameStore, Session, SessionStatus, StoreError};
use crate::derender::{
    detect_ball, detect_red_centroid, detect_water_level, Detection, DetectionKind, DetectionStage,
    DetectorConfigError,
};
use crate::mental::DetectorSet;
use crate::physics::{state_at, BouncePhase, Domain, DomainParams, MugSize, StimulusSpec};
use crate::render::{CanvasStyle, Frame, Provenance};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("aggregation over an empty set: {0}")]
    Empty(String),
    #[error("degenerate line fit: {0}")]
    DegenerateFit(String),
    #[error("bouncing report {0} has steps without a phase label")]
    MissingPhase(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Detector(#[from] DetectorConfigError),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One evaluated generated frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step_index: usize,
    pub time_sec: f64,
    pub kind: DetectionKind,
    pub found: bool,
    pub stage: Option<DetectionStage>,
    /// Sub-pixel detected center (ball domains).
    pub cx: Option<f64>,
    pub cy: Option<f64>,
    pub top_y: Option<i64>,
    pub bottom_y: Option<i64>,
    /// Detected surface row after undoing the erosion bias (fluids).
    pub level_row: Option<f64>,
    pub truth_x: Option<f64>,
    pub truth_y: Option<f64>,
    pub truth_row: Option<f64>,
    /// Euclidean pixel error for positions, absolute row error for levels.
    pub error_px: Option<f64>,
    pub phase: Option<BouncePhase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub stimulus_id: String,
    pub domain: Domain,
    pub method: String,
    pub sample: u32,
    pub status: SessionStatus,
    /// Complete session with every step detected.
    pub valid: bool,
    pub records: Vec<StepRecord>,
    pub final_error: Option<f64>,
    pub spec: StimulusSpec,
}

impl TrajectoryReport {
    pub fn errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().filter_map(|r| r.error_px)
    }
}

/// Run the domain's detector on a frame.
pub fn detect_frame(frame: &Frame, domain: Domain, detectors: &DetectorSet) -> Result<Detection, DetectorConfigError> {
    Ok(match domain {
        Domain::Motion2d | Domain::Gravity2d => detect_red_centroid(frame),
        Domain::Fluids => detect_water_level(frame, &detectors.water)?,
        Domain::Bouncing => detect_ball(frame, &detectors.ball),
    })
}

/// Score one frame against the ground truth of its stimulus.
pub fn score_frame(
    frame: &Frame,
    step_index: usize,
    spec: &StimulusSpec,
    detectors: &DetectorSet,
) -> Result<StepRecord, DetectorConfigError> {
    let d = detect_frame(frame, spec.domain(), detectors)?;
    let t = frame.time_sec;
    let truth = state_at(spec, t);
    let mut r = StepRecord {
        step_index,
        time_sec: t,
        kind: d.kind,
        found: d.found,
        stage: d.diagnostics.stage,
        cx: None,
        cy: None,
        top_y: d.top_y,
        bottom_y: d.bottom_y,
        level_row: None,
        truth_x: None,
        truth_y: None,
        truth_row: None,
        error_px: None,
        phase: spec.bounce().and_then(|b| b.partition),
    };
    if let Some(fill) = truth.fill_fraction {
        let mug = CanvasStyle::for_domain(Domain::Fluids).mug;
        let truth_row = mug.water_top_row(fill) as f64;
        r.truth_row = Some(truth_row);
        if let Some(top) = d.top_y {
            let row = (top - detectors.water.erosion_bias_rows()) as f64;
            r.level_row = Some(row);
            r.error_px = Some((row - truth_row).abs());
        }
    } else if let Some(p) = truth.ball_pos {
        r.truth_x = Some(p.x);
        r.truth_y = Some(p.y);
        if let Some((x, y)) = d.precise_center() {
            r.cx = Some(x);
            r.cy = Some(y);
            r.error_px = Some((x - p.x).hypot(y - p.y));
        }
    }
    Ok(r)
}

/// Detect and score every generated frame of a session.
pub fn build_report(
    store: &FrameStore,
    session: &Session,
    spec: &StimulusSpec,
    detectors: &DetectorSet,
) -> Result<TrajectoryReport, AnalysisError> {
    let mut records = Vec::new();
    for (i, (rel, t)) in session.generated_frames().enumerate() {
        let frame = store.read_frame(rel, t, Provenance::Generated)?;
        records.push(score_frame(&frame, i, spec, detectors)?);
    }
    let complete = session.status == SessionStatus::Complete;
    let valid = complete && records.iter().all(|r| r.error_px.is_some());
    let final_error = if valid { records.last().and_then(|r| r.error_px) } else { None };
    Ok(TrajectoryReport {
        stimulus_id: session.stimulus_id.clone(),
        domain: session.domain,
        method: session.method_label.clone(),
        sample: session.sample_index,
        status: session.status,
        valid,
        records,
        final_error,
        spec: spec.clone(),
    })
}

/// Reports for every session in the store, in manifest-path order.
pub fn build_reports(store: &FrameStore, detectors: &DetectorSet) -> Result<Vec<TrajectoryReport>, AnalysisError> {
    let sessions = store.sessions()?;
    let mut specs: BTreeMap<String, StimulusSpec> = BTreeMap::new();
    for s in &sessions {
        if !specs.contains_key(&s.stimulus_id) {
            specs.insert(s.stimulus_id.clone(), store.read_spec(&s.stimulus_id)?);
        }
    }
    sessions
        .par_iter()
        .map(|s| build_report(store, s, &specs[&s.stimulus_id], detectors))
        .collect()
}

/// Fraction of generated frames in which the detector found its target.
pub fn detection_coverage(reports: &[TrajectoryReport]) -> (usize, usize) {
    let total = reports.iter().map(|r| r.records.len()).sum();
    let found = reports.iter().flat_map(|r| &r.records).filter(|r| r.found).count();
    (found, total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorMode {
    /// Error at the horizon only.
    #[default]
    FinalOnly,
    AllSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregateOptions {
    pub mode: ErrorMode,
    /// RMSE per stimulus first, then across stimuli.
    pub two_stage: bool,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        AggregateOptions { mode: ErrorMode::FinalOnly, two_stage: false, resamples: DEFAULT_RESAMPLES, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub domain: Domain,
    pub method: String,
    pub phase: Option<BouncePhase>,
    pub rmse: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
    pub invalid_count: usize,
}

type GroupKey = (Domain, String, Option<BouncePhase>);

fn report_errors(r: &TrajectoryReport, mode: ErrorMode) -> Vec<f64> {
    match mode {
        ErrorMode::FinalOnly => r.final_error.into_iter().collect(),
        ErrorMode::AllSteps => r.errors().collect(),
    }
}

fn summarize(key: &GroupKey, errors: &[f64], invalid: usize, opts: &AggregateOptions, salt: u64) -> Result<Option<AggregateResult>, AnalysisError> {
    if errors.is_empty() {
        return Ok(None);
    }
    let ci = if errors.len() >= 2 {
        aggregate_ci(errors, opts.resamples, opts.seed.wrapping_add(salt))?
    } else {
        let r = rmse(errors)?;
        RmseCi { rmse: r, lo: r, hi: r, n: 1 }
    };
    Ok(Some(AggregateResult {
        domain: key.0,
        method: key.1.clone(),
        phase: key.2,
        rmse: ci.rmse,
        ci_lo: ci.lo,
        ci_hi: ci.hi,
        n: errors.len(),
        invalid_count: invalid,
    }))
}

fn aggregate_by(
    reports: &[TrajectoryReport],
    opts: &AggregateOptions,
    key_of: impl Fn(&TrajectoryReport) -> Option<GroupKey>,
) -> Result<Vec<AggregateResult>, AnalysisError> {
    let mut groups: BTreeMap<GroupKey, Vec<&TrajectoryReport>> = BTreeMap::new();
    for r in reports {
        if let Some(k) = key_of(r) {
            groups.entry(k).or_default().push(r);
        }
    }
    let mut out = Vec::new();
    for (i, (key, members)) in groups.iter().enumerate() {
        let invalid = members.iter().filter(|r| !r.valid).count();
        let valid: Vec<&&TrajectoryReport> = members.iter().filter(|r| r.valid).collect();
        let errors: Vec<f64> = if opts.two_stage {
            let mut per_stim: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for r in &valid {
                per_stim.entry(&r.stimulus_id).or_default().extend(report_errors(r, opts.mode));
            }
            per_stim.values().filter(|e| !e.is_empty()).map(|e| rmse(e)).collect::<Result<_, _>>()?
        } else {
            valid.iter().flat_map(|r| report_errors(r, opts.mode)).collect()
        };
        if let Some(a) = summarize(key, &errors, invalid, opts, i as u64)? {
            out.push(a);
        }
    }
    Ok(out)
}

/// RMSE with bootstrap CI per (domain, method).
pub fn aggregate(reports: &[TrajectoryReport], opts: &AggregateOptions) -> Result<Vec<AggregateResult>, AnalysisError> {
    aggregate_by(reports, opts, |r| Some((r.domain, r.method.clone(), None)))
}

/// All-step errors of bouncing reports grouped by phase and method. Groups
/// without any valid error are omitted.
pub fn phase_errors(reports: &[TrajectoryReport], opts: &AggregateOptions) -> Result<Vec<AggregateResult>, AnalysisError> {
    let bouncing: Vec<TrajectoryReport> = reports.iter().filter(|r| r.domain == Domain::Bouncing).cloned().collect();
    for r in &bouncing {
        if r.records.iter().any(|s| s.phase.is_none()) {
            return Err(AnalysisError::MissingPhase(r.stimulus_id.clone()));
        }
    }
    let opts = AggregateOptions { mode: ErrorMode::AllSteps, ..opts.clone() };
    aggregate_by(&bouncing, &opts, |r| {
        let phase = r.records.first().and_then(|s| s.phase)?;
        Some((Domain::Bouncing, r.method.clone(), Some(phase)))
    })
}

/// Line fit of detected water rows over time for one fluids report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidFit {
    pub stimulus_id: String,
    pub method: String,
    pub sample: u32,
    pub flow_rate_param: f64,
    pub mug: MugSize,
    pub initial_fill_fraction: f64,
    pub fit: LineFit,
}

/// Fits for every valid fluids report with at least two generated frames.
pub fn fluid_fits(reports: &[TrajectoryReport]) -> Vec<FluidFit> {
    reports
        .iter()
        .filter(|r| r.valid)
        .filter_map(|r| {
            let DomainParams::Fluids(f) = &r.spec.params else { return None };
            let pts: Vec<(f64, f64)> = r.records.iter().filter_map(|s| Some((s.time_sec, s.level_row?))).collect();
            let fit = fit_line(&pts).ok()?;
            Some(FluidFit {
                stimulus_id: r.stimulus_id.clone(),
                method: r.method.clone(),
                sample: r.sample,
                flow_rate_param: f.flow_rate_param,
                mug: f.mug_size,
                initial_fill_fraction: f.initial_fill_fraction,
                fit,
            })
        })
        .collect()
}
