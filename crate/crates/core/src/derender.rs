//! Detectors mapping a frame to its physical observable: red-ball centroid,
//! water level, and bouncing-ball center.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::render::Frame;
use crate::vision::{
    canny, clahe, close, erode, external_contours, gaussian_blur, hough_circles, resize_area_frame, rgb_to_gray,
    rgb_to_hsv, threshold_in_range, BBox, BinaryMask, ContourStats, HoughParams, VisionError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorConfigError {
    #[error("invalid detector parameters: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionKind {
    RedCentroid,
    WaterLevel,
    BallCenter,
}

impl DetectionKind {
    pub fn name(self) -> &'static str {
        match self {
            DetectionKind::RedCentroid => "red_centroid",
            DetectionKind::WaterLevel => "water_level",
            DetectionKind::BallCenter => "ball_center",
        }
    }
}

/// Which path produced a detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionStage {
    Contour,
    CoverageRows,
    ContourExtrema,
    Hough,
    ContourFallback,
}

impl DetectionStage {
    pub fn name(self) -> &'static str {
        match self {
            DetectionStage::Contour => "contour",
            DetectionStage::CoverageRows => "coverage_rows",
            DetectionStage::ContourExtrema => "contour_extrema",
            DetectionStage::Hough => "hough",
            DetectionStage::ContourFallback => "contour_fallback",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub stage: Option<DetectionStage>,
    /// Unrounded center, when the detector has one.
    pub subpixel_center: Option<(f64, f64)>,
    pub radius: Option<f64>,
    pub bbox: Option<(usize, usize, usize, usize)>,
    pub candidate_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub kind: DetectionKind,
    pub found: bool,
    pub center: Option<(i64, i64)>,
    pub top_y: Option<i64>,
    pub bottom_y: Option<i64>,
    pub diagnostics: Diagnostics,
}

impl Detection {
    pub fn not_found(kind: DetectionKind, diagnostics: Diagnostics) -> Self {
        Detection { kind, found: false, center: None, top_y: None, bottom_y: None, diagnostics }
    }

    /// Subpixel center when available, otherwise the integer center.
    pub fn precise_center(&self) -> Option<(f64, f64)> {
        self.diagnostics
            .subpixel_center
            .or(self.center.map(|(x, y)| (x as f64, y as f64)))
    }
}

fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

pub const RED_LOWER_1: [u8; 3] = [0, 70, 50];
pub const RED_UPPER_1: [u8; 3] = [10, 255, 255];
pub const RED_LOWER_2: [u8; 3] = [170, 70, 50];
pub const RED_UPPER_2: [u8; 3] = [180, 255, 255];

/// Mask of pixels in either red hue band.
pub fn red_mask(frame: &Frame) -> BinaryMask {
    let hsv = rgb_to_hsv(frame);
    let a = threshold_in_range(&hsv, RED_LOWER_1, RED_UPPER_1);
    let b = threshold_in_range(&hsv, RED_LOWER_2, RED_UPPER_2);
    a.or(&b).expect("same dims")
}

fn largest(contours: Vec<ContourStats>) -> Option<ContourStats> {
    // First of equal areas wins, in raster order of discovery.
    contours.into_iter().fold(None, |best, c| match best {
        Some(b) if b.area >= c.area => Some(b),
        _ => Some(c),
    })
}

/// Centroid of the largest red region, rounded to integer pixels.
pub fn detect_red_centroid(frame: &Frame) -> Detection {
    let kind = DetectionKind::RedCentroid;
    let Some(blob) = largest(external_contours(&red_mask(frame))) else {
        return Detection::not_found(kind, Diagnostics::default());
    };
    let Some((cx, cy)) = blob.centroid() else {
        return Detection::not_found(kind, Diagnostics::default());
    };
    let b = blob.bbox;
    Detection {
        kind,
        found: true,
        center: Some((round_half_up(cx), round_half_up(cy))),
        top_y: None,
        bottom_y: None,
        diagnostics: Diagnostics {
            stage: Some(DetectionStage::Contour),
            subpixel_center: Some((cx, cy)),
            radius: None,
            bbox: Some((b.x, b.y, b.w, b.h)),
            candidate_scores: vec![blob.area],
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaterDetectorParams {
    /// Only rows `>= y_cut` are analysed.
    pub y_cut: usize,
    /// Pixels with alpha at or below this are ignored.
    pub alpha_thresh: u8,
    pub hsv_lower: [u8; 3],
    pub hsv_upper: [u8; 3],
    pub erode_iters: usize,
    pub close_kernel: usize,
    pub coverage_main: f64,
    pub coverage_fallback: f64,
    pub ignore_top_rows: usize,
}

impl Default for WaterDetectorParams {
    fn default() -> Self {
        WaterDetectorParams {
            y_cut: 230,
            alpha_thresh: 0,
            hsv_lower: [90, 40, 120],
            hsv_upper: [130, 255, 255],
            erode_iters: 2,
            close_kernel: 5,
            coverage_main: 0.6,
            coverage_fallback: 0.3,
            ignore_top_rows: 0,
        }
    }
}

impl WaterDetectorParams {
    pub fn validate(&self) -> Result<(), DetectorConfigError> {
        if !(0.0 < self.coverage_fallback
            && self.coverage_fallback <= self.coverage_main
            && self.coverage_main <= 1.0)
        {
            return Err(DetectorConfigError::Invalid(
                "need 0 < coverage_fallback <= coverage_main <= 1".into(),
            ));
        }
        if self.close_kernel % 2 == 0 {
            return Err(DetectorConfigError::Invalid("close_kernel must be odd".into()));
        }
        if (0..3).any(|i| self.hsv_lower[i] > self.hsv_upper[i]) {
            return Err(DetectorConfigError::Invalid("hsv_lower must not exceed hsv_upper".into()));
        }
        Ok(())
    }

    /// Rows the erosion removes from the top of a solid blob.
    pub fn erosion_bias_rows(&self) -> i64 {
        self.erode_iters as i64
    }
}

/// Top and bottom rows of the largest sky-blue blob below `y_cut`.
pub fn detect_water_level(frame: &Frame, params: &WaterDetectorParams) -> Result<Detection, DetectorConfigError> {
    params.validate()?;
    let kind = DetectionKind::WaterLevel;
    if frame.height() <= params.y_cut {
        return Err(DetectorConfigError::Invalid(format!(
            "frame height {} does not exceed y_cut {}",
            frame.height(),
            params.y_cut
        )));
    }
    let (w, h) = (frame.width(), frame.height());
    let alpha = if frame.has_alpha() {
        BinaryMask::from_fn(w, h, |x, y| frame.pixel(x, y)[3] > params.alpha_thresh)
    } else {
        BinaryMask::from_fn(w, h, |_, _| true)
    };
    let hsv = rgb_to_hsv(frame);
    let color = threshold_in_range(&hsv, params.hsv_lower, params.hsv_upper);
    let roi = color.crop_rows(params.y_cut).and(&alpha.crop_rows(params.y_cut)).expect("same dims");
    let cleaned = close(&erode(&roi, 3, params.erode_iters).map_err(vision)?, params.close_kernel, 1).map_err(vision)?;

    let Some(blob) = largest(external_contours(&cleaned)) else {
        return Ok(Detection::not_found(kind, Diagnostics::default()));
    };
    let BBox { x: bx, y: by, w: bw, h: bh } = blob.bbox;
    let counts: Vec<usize> = (by..by + bh).map(|y| (bx..bx + bw).filter(|&x| cleaned.get(x, y)).count()).collect();
    let rows_at = |frac: f64| -> Vec<usize> {
        let need = frac * bw as f64;
        (0..bh).filter(|&r| counts[r] as f64 >= need).collect()
    };
    let mut rows = rows_at(params.coverage_main);
    if rows.is_empty() {
        rows = rows_at(params.coverage_fallback);
    }
    rows.retain(|&r| r >= params.ignore_top_rows);
    let y_cut = params.y_cut as i64;
    let (top, bottom, stage) = match (rows.first(), rows.last()) {
        (Some(&t), Some(&b)) => (y_cut + (by + t) as i64, y_cut + (by + b) as i64, DetectionStage::CoverageRows),
        _ => {
            let ys = blob.pixels.iter().map(|p| p.1);
            let (lo, hi) = (ys.clone().min().unwrap_or(by), ys.max().unwrap_or(by));
            (y_cut + lo as i64, y_cut + hi as i64, DetectionStage::ContourExtrema)
        }
    };
    Ok(Detection {
        kind,
        found: true,
        center: None,
        top_y: Some(top),
        bottom_y: Some(bottom),
        diagnostics: Diagnostics {
            stage: Some(stage),
            subpixel_center: None,
            radius: None,
            bbox: Some((bx, by + params.y_cut, bw, bh)),
            candidate_scores: vec![blob.area],
        },
    })
}

fn vision(e: VisionError) -> DetectorConfigError {
    DetectorConfigError::Invalid(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BallDetectorParams {
    pub dp: f64,
    pub min_dist: f64,
    pub canny_high: f64,
    pub accum_thresh: u32,
    pub r_min: f64,
    pub r_max: f64,
    pub ring_thickness: f64,
    pub clahe_clip: f64,
    pub clahe_tiles: usize,
    pub blur_ksize: usize,
    pub blur_sigma: f64,
    pub fallback_canny_low: f64,
    pub fallback_canny_high: f64,
    pub fallback_close_kernel: usize,
    pub min_area: f64,
    pub min_circularity: f64,
    /// Added to the circularity threshold to calibrate against other perimeter conventions.
    pub circularity_offset: f64,
}

impl Default for BallDetectorParams {
    fn default() -> Self {
        let h = HoughParams::default();
        BallDetectorParams {
            dp: h.dp,
            min_dist: h.min_dist,
            canny_high: h.canny_high,
            accum_thresh: h.accum_thresh,
            r_min: h.r_min,
            r_max: h.r_max,
            ring_thickness: h.ring_thickness,
            clahe_clip: 2.0,
            clahe_tiles: 8,
            blur_ksize: 7,
            blur_sigma: 1.5,
            fallback_canny_low: 50.0,
            fallback_canny_high: 150.0,
            fallback_close_kernel: 5,
            min_area: 300.0,
            min_circularity: 0.7,
            circularity_offset: 0.0,
        }
    }
}

impl BallDetectorParams {
    pub fn hough(&self) -> HoughParams {
        HoughParams {
            dp: self.dp,
            min_dist: self.min_dist,
            canny_high: self.canny_high,
            accum_thresh: self.accum_thresh,
            r_min: self.r_min,
            r_max: self.r_max,
            ring_thickness: self.ring_thickness,
            ..HoughParams::default()
        }
    }
}

/// Two-stage ball detector: Hough circles on a downscaled, contrast-enhanced
/// image, then a circularity-filtered contour fallback.
pub fn detect_ball(frame: &Frame, params: &BallDetectorParams) -> Detection {
    let kind = DetectionKind::BallCenter;
    let (w, h) = (frame.width(), frame.height());
    if let Some(d) = hough_stage(frame, params) {
        return d;
    }
    let Some((bbox, c, scores)) = contour_stage(frame, params) else {
        return Detection::not_found(kind, Diagnostics::default());
    };
    let cx = bbox.x + bbox.w / 2;
    let cy = bbox.y + bbox.h / 2;
    let r = bbox.w.max(bbox.h) / 2;
    let bx = bbox.x.min(w);
    let by = bbox.y.min(h);
    Detection {
        kind,
        found: true,
        center: Some((cx as i64, cy as i64)),
        top_y: None,
        bottom_y: None,
        diagnostics: Diagnostics {
            stage: Some(DetectionStage::ContourFallback),
            subpixel_center: Some((bbox.x as f64 + bbox.w as f64 / 2.0, bbox.y as f64 + bbox.h as f64 / 2.0)),
            radius: Some(r as f64),
            bbox: Some((bx, by, bbox.w.min(w - bx), bbox.h.min(h - by))),
            candidate_scores: scores.into_iter().chain([c]).collect(),
        },
    }
}

fn hough_stage(frame: &Frame, p: &BallDetectorParams) -> Option<Detection> {
    let (w, h) = (frame.width(), frame.height());
    let (sw, sh) = ((w as f64 * 0.5).round() as usize, (h as f64 * 0.5).round() as usize);
    if sw == 0 || sh == 0 {
        return None;
    }
    let small = rgb_to_gray(&resize_area_frame(frame, sw, sh).ok()?);
    let enhanced = clahe(&small, p.clahe_clip, (p.clahe_tiles, p.clahe_tiles)).ok()?;
    let blurred = gaussian_blur(&enhanced, p.blur_ksize, p.blur_sigma).ok()?;
    let candidates = hough_circles(&blurred, &p.hough());
    // Strongest ring response wins; the list is already in vote order for ties.
    let best = candidates.iter().fold(None::<&crate::vision::CircleCandidate>, |best, c| match best {
        Some(b) if b.edge_strength >= c.edge_strength => Some(b),
        _ => Some(c),
    })?;
    let (cx, cy, r) = (2.0 * best.cx, 2.0 * best.cy, 2.0 * best.radius);
    let x0 = (cx - r).max(0.0);
    let y0 = (cy - r).max(0.0);
    let bw = (2.0 * r).min(w as f64 - x0);
    let bh = (2.0 * r).min(h as f64 - y0);
    Some(Detection {
        kind: DetectionKind::BallCenter,
        found: true,
        center: Some((round_half_up(cx), round_half_up(cy))),
        top_y: None,
        bottom_y: None,
        diagnostics: Diagnostics {
            stage: Some(DetectionStage::Hough),
            subpixel_center: Some((cx, cy)),
            radius: Some(r),
            bbox: Some((x0 as usize, y0 as usize, bw.max(0.0) as usize, bh.max(0.0) as usize)),
            candidate_scores: candidates.iter().map(|c| c.edge_strength).collect(),
        },
    })
}

fn contour_stage(frame: &Frame, p: &BallDetectorParams) -> Option<(BBox, f64, Vec<f64>)> {
    let gray = gaussian_blur(&rgb_to_gray(frame), p.blur_ksize, p.blur_sigma).ok()?;
    let edges = canny(&gray, p.fallback_canny_low, p.fallback_canny_high).ok()?;
    let closed = close(&edges, p.fallback_close_kernel, 1).ok()?;
    let threshold = p.min_circularity + p.circularity_offset;
    let kept: Vec<(BBox, f64)> = external_contours(&closed)
        .into_iter()
        .filter(|c| c.area >= p.min_area && c.circularity >= threshold)
        .map(|c| (c.bbox, c.circularity * c.area))
        .collect();
    let scores: Vec<f64> = kept.iter().map(|k| k.1).collect();
    let (bbox, score) = kept.into_iter().fold(None::<(BBox, f64)>, |best, k| match best {
        Some(b) if b.1 >= k.1 => Some(b),
        _ => Some(k),
    })?;
    Some((bbox, score, scores))
}
