use std::fs;
use std::path::{Path, PathBuf};

use super::svg::{Axes, Svg, PALETTE};
use super::{AggregateResult, AnalysisError, FluidFit, TrajectoryReport};
use crate::physics::{state_at, BouncePhase, Domain};

/// Everything written into a report directory.
#[derive(Debug, Clone, Default)]
pub struct ReportBundle {
    pub aggregates: Vec<AggregateResult>,
    pub phase: Vec<AggregateResult>,
    pub reports: Vec<TrajectoryReport>,
    pub fits: Vec<FluidFit>,
    /// Settings the numbers were produced with, copied verbatim.
    pub settings: String,
}

pub const SUMMARY_CSV: &str = "summary.csv";
pub const TRAJECTORIES_CSV: &str = "trajectories.csv";
pub const FITS_CSV: &str = "fits.csv";

fn f4(v: f64) -> String {
    format!("{v:.4}")
}

fn opt_f(v: Option<f64>) -> String {
    v.map(f4).unwrap_or_default()
}

fn opt_i(v: Option<i64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn phase_name(p: Option<BouncePhase>) -> &'static str {
    p.map_or("", |p| p.name())
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], written: &mut Vec<PathBuf>) -> Result<(), AnalysisError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|source| AnalysisError::Io { path: path.clone(), source })?;
    written.push(path);
    Ok(())
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, AnalysisError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| AnalysisError::Csv(e.into_error().into()))
}

pub fn summary_csv(aggregates: &[AggregateResult], phase: &[AggregateResult]) -> Result<Vec<u8>, AnalysisError> {
    let rows = aggregates
        .iter()
        .map(|a| ("overall", a))
        .chain(phase.iter().map(|a| ("phase", a)))
        .map(|(group, a)| {
            vec![
                group.to_string(),
                a.domain.name().to_string(),
                a.method.clone(),
                phase_name(a.phase).to_string(),
                f4(a.rmse),
                f4(a.ci_lo),
                f4(a.ci_hi),
                a.n.to_string(),
                a.invalid_count.to_string(),
            ]
        });
    csv_bytes(&["group", "domain", "method", "phase", "rmse", "ci_lo", "ci_hi", "n", "invalid"], rows)
}

pub fn trajectories_csv(reports: &[TrajectoryReport]) -> Result<Vec<u8>, AnalysisError> {
    let rows = reports.iter().flat_map(|r| {
        r.records.iter().map(move |s| {
            vec![
                r.stimulus_id.clone(),
                r.domain.name().to_string(),
                r.method.clone(),
                r.sample.to_string(),
                r.valid.to_string(),
                s.step_index.to_string(),
                f4(s.time_sec),
                s.kind.name().to_string(),
                s.found.to_string(),
                s.stage.map_or("", |st| st.name()).to_string(),
                opt_f(s.cx),
                opt_f(s.cy),
                opt_i(s.top_y),
                opt_i(s.bottom_y),
                opt_f(s.level_row),
                opt_f(s.truth_x),
                opt_f(s.truth_y),
                opt_f(s.truth_row),
                opt_f(s.error_px),
                phase_name(s.phase).to_string(),
            ]
        })
    });
    csv_bytes(
        &[
            "stimulus_id", "domain", "method", "sample", "valid", "step_index", "time_sec", "kind", "found", "stage",
            "cx", "cy", "top_y", "bottom_y", "level_row", "truth_x", "truth_y", "truth_row", "error_px", "phase",
        ],
        rows,
    )
}

pub fn fits_csv(fits: &[FluidFit]) -> Result<Vec<u8>, AnalysisError> {
    let rows = fits.iter().map(|f| {
        vec![
            f.stimulus_id.clone(),
            f.method.clone(),
            f.sample.to_string(),
            f4(f.flow_rate_param),
            f.mug.name().to_string(),
            f4(f.initial_fill_fraction),
            f4(f.fit.slope),
            f4(f.fit.intercept),
            f4(f.fit.r2),
        ]
    });
    csv_bytes(
        &["stimulus_id", "method", "sample", "flow_rate_param", "mug", "initial_fill", "slope", "intercept", "r2"],
        rows,
    )
}

/// Grouped bars with CI whiskers, one group per label.
fn bar_chart(title: &str, bars: &[(String, String, f64, f64, f64)]) -> String {
    // (group, series, value, lo, hi)
    let mut groups: Vec<&str> = Vec::new();
    let mut series: Vec<&str> = Vec::new();
    for b in bars {
        if !groups.contains(&b.0.as_str()) {
            groups.push(&b.0);
        }
        if !series.contains(&b.1.as_str()) {
            series.push(&b.1);
        }
    }
    let width = 120.0 + 40.0 * (bars.len().max(1) as f64) + 30.0 * groups.len() as f64;
    let mut svg = Svg::new(width.max(360.0), 320.0);
    svg.text(10.0, 18.0, 13.0, "start", title);
    let y_max = bars.iter().map(|b| b.4).fold(0.0f64, f64::max).max(1.0) * 1.1;
    let axes = Axes {
        x0: 0.0,
        x1: 1.0,
        y0: 0.0,
        y1: y_max,
        left: 60.0,
        top: 40.0,
        width: width.max(360.0) - 80.0,
        height: 220.0,
        y_down: false,
    };
    axes.draw(&mut svg, "", "RMSE (px)");
    let slot = axes.width / (bars.len() as f64 + groups.len() as f64).max(1.0);
    let mut x = axes.left + slot / 2.0;
    for g in &groups {
        let start = x;
        for b in bars.iter().filter(|b| b.0 == *g) {
            let color = PALETTE[series.iter().position(|s| *s == b.1).unwrap_or(0) % PALETTE.len()];
            let (top, base) = (axes.py(b.2), axes.py(0.0));
            svg.rect(x, top, slot * 0.8, base - top, color);
            let mid = x + slot * 0.4;
            svg.line(mid, axes.py(b.3), mid, axes.py(b.4), "#000000", 1.0);
            svg.line(mid - 4.0, axes.py(b.3), mid + 4.0, axes.py(b.3), "#000000", 1.0);
            svg.line(mid - 4.0, axes.py(b.4), mid + 4.0, axes.py(b.4), "#000000", 1.0);
            x += slot;
        }
        svg.text((start + x) / 2.0, axes.top + axes.height + 16.0, 10.0, "middle", g);
        x += slot;
    }
    for (i, s) in series.iter().enumerate() {
        let ly = 300.0;
        let lx = 60.0 + 110.0 * i as f64;
        svg.rect(lx, ly - 9.0, 10.0, 10.0, PALETTE[i % PALETTE.len()]);
        svg.text(lx + 14.0, ly, 10.0, "start", s);
    }
    svg.finish()
}

pub fn rmse_svg(aggregates: &[AggregateResult]) -> String {
    let bars: Vec<_> = aggregates
        .iter()
        .map(|a| (a.domain.name().to_string(), a.method.clone(), a.rmse, a.ci_lo, a.ci_hi))
        .collect();
    bar_chart("Final-frame RMSE by domain and method (95% CI)", &bars)
}

pub fn phase_svg(phase: &[AggregateResult]) -> String {
    let bars: Vec<_> = phase
        .iter()
        .map(|a| (phase_name(a.phase).to_string(), a.method.clone(), a.rmse, a.ci_lo, a.ci_hi))
        .collect();
    bar_chart("Bouncing RMSE by phase (95% CI)", &bars)
}

const MAX_SERIES: usize = 8;

/// x(t) and y(t) panels: ground truth as lines, detections as dots.
pub fn trajectory_svg(reports: &[TrajectoryReport]) -> String {
    let chosen: Vec<&TrajectoryReport> =
        reports.iter().filter(|r| r.domain.has_ball() && r.valid).take(MAX_SERIES).collect();
    let mut svg = Svg::new(820.0, 380.0);
    svg.text(10.0, 18.0, 13.0, "start", "Ball trajectories: truth (lines) and detections (dots)");
    let t_max = chosen
        .iter()
        .flat_map(|r| r.records.iter().map(|s| s.time_sec))
        .fold(1.6f64, f64::max);
    for (panel, label) in [(0usize, "x (px)"), (1, "y (px)")] {
        let (lo, hi) = chosen
            .iter()
            .map(|r| {
                let (w, h) = (f64::from(r.spec.canvas_width), f64::from(r.spec.canvas_height));
                if panel == 0 { w } else { h }
            })
            .fold((0.0, 1.0f64), |(lo, hi), v| (lo, hi.max(v)));
        let axes = Axes {
            x0: 0.0,
            x1: t_max,
            y0: lo,
            y1: hi,
            left: 60.0 + 400.0 * panel as f64,
            top: 40.0,
            width: 330.0,
            height: 280.0,
            y_down: panel == 1,
        };
        axes.draw(&mut svg, "time (s)", label);
        for (i, r) in chosen.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let truth: Vec<(f64, f64)> = (0..=40)
                .filter_map(|k| {
                    let t = t_max * f64::from(k) / 40.0;
                    let p = state_at(&r.spec, t).ball_pos?;
                    Some((axes.px(t), axes.py(if panel == 0 { p.x } else { p.y })))
                })
                .collect();
            svg.polyline(&truth, color, 1.2);
            for s in &r.records {
                if let (Some(x), Some(y)) = (s.cx, s.cy) {
                    svg.circle(axes.px(s.time_sec), axes.py(if panel == 0 { x } else { y }), 3.0, color);
                }
            }
        }
    }
    for (i, r) in chosen.iter().enumerate() {
        let y = 352.0 + 12.0 * (i / 4) as f64;
        let x = 60.0 + 190.0 * (i % 4) as f64;
        svg.rect(x, y - 8.0, 8.0, 8.0, PALETTE[i % PALETTE.len()]);
        svg.text(x + 12.0, y, 9.0, "start", &format!("{} {} s{}", r.stimulus_id, r.method, r.sample));
    }
    svg.finish()
}

/// Detected water rows over time with their fitted lines.
pub fn water_svg(reports: &[TrajectoryReport], fits: &[FluidFit]) -> String {
    let chosen: Vec<&TrajectoryReport> =
        reports.iter().filter(|r| r.domain == Domain::Fluids && r.valid).take(MAX_SERIES).collect();
    let mut svg = Svg::new(560.0, 400.0);
    svg.text(10.0, 18.0, 13.0, "start", "Water surface row over time with line fits");
    let rows: Vec<f64> = chosen
        .iter()
        .flat_map(|r| r.records.iter().filter_map(|s| s.level_row).chain(r.records.iter().filter_map(|s| s.truth_row)))
        .collect();
    let lo = rows.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rows.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo.is_finite() { (lo - 10.0, hi + 10.0) } else { (0.0, 1.0) };
    let (t0, t1) = (0.8, 1.6);
    let axes = Axes { x0: t0, x1: t1, y0: lo, y1: hi, left: 60.0, top: 40.0, width: 460.0, height: 280.0, y_down: true };
    axes.draw(&mut svg, "time (s)", "surface row (px)");
    for (i, r) in chosen.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for s in &r.records {
            if let Some(row) = s.level_row {
                svg.circle(axes.px(s.time_sec), axes.py(row), 3.0, color);
            }
        }
        if let Some(f) = fits.iter().find(|f| f.stimulus_id == r.stimulus_id && f.method == r.method && f.sample == r.sample) {
            let line = [t0, t1].map(|t| (axes.px(t), axes.py(f.fit.slope * t + f.fit.intercept)));
            svg.polyline(&line, color, 1.0);
        }
        let y = 372.0 + 12.0 * (i / 3) as f64;
        let x = 60.0 + 165.0 * (i % 3) as f64;
        svg.rect(x, y - 8.0, 8.0, 8.0, color);
        svg.text(x + 12.0, y, 9.0, "start", &format!("{} {} s{}", r.stimulus_id, r.method, r.sample));
    }
    svg.finish()
}

/// Write the bundle. Output depends only on the bundle contents.
pub fn emit_report(bundle: &ReportBundle, out_dir: &Path) -> Result<Vec<PathBuf>, AnalysisError> {
    fs::create_dir_all(out_dir).map_err(|source| AnalysisError::Io { path: out_dir.to_path_buf(), source })?;
    let mut written = Vec::new();
    write_file(out_dir, SUMMARY_CSV, &summary_csv(&bundle.aggregates, &bundle.phase)?, &mut written)?;
    write_file(out_dir, TRAJECTORIES_CSV, &trajectories_csv(&bundle.reports)?, &mut written)?;
    write_file(out_dir, FITS_CSV, &fits_csv(&bundle.fits)?, &mut written)?;
    write_file(out_dir, "rmse_by_method.svg", rmse_svg(&bundle.aggregates).as_bytes(), &mut written)?;
    write_file(out_dir, "phase_errors.svg", phase_svg(&bundle.phase).as_bytes(), &mut written)?;
    write_file(out_dir, "trajectories.svg", trajectory_svg(&bundle.reports).as_bytes(), &mut written)?;
    write_file(out_dir, "water_levels.svg", water_svg(&bundle.reports, &bundle.fits).as_bytes(), &mut written)?;
    write_file(out_dir, "settings.toml", bundle.settings.as_bytes(), &mut written)?;
    Ok(written)
}
