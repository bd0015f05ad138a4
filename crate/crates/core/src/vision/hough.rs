use super::{canny_with_gradients, BinaryMask, GrayImage};

#[derive(Debug, Clone, PartialEq)]
pub struct HoughParams {
    /// Inverse accumulator resolution relative to the image.
    pub dp: f64,
    pub min_dist: f64,
    /// Upper Canny threshold; the lower one is half of it.
    pub canny_high: f64,
    pub accum_thresh: u32,
    pub r_min: f64,
    pub r_max: f64,
    /// Fraction of the circumference that must be backed by edge pixels.
    pub min_coverage: f64,
    pub ring_thickness: f64,
    /// Accumulator peaks examined at most.
    pub max_peaks: usize,
}

impl Default for HoughParams {
    fn default() -> Self {
        HoughParams {
            dp: 1.2,
            min_dist: 50.0,
            canny_high: 100.0,
            accum_thresh: 18,
            r_min: 15.0,
            r_max: 200.0,
            min_coverage: 0.5,
            ring_thickness: 3.0,
            max_peaks: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircleCandidate {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    /// Accumulator votes at the center peak.
    pub score: u32,
    /// Mean edge-map value (0 or 255 per pixel) over a thin ring.
    pub edge_strength: f64,
}

/// Gradient-method circle detection.
///
/// Every edge pixel votes along its gradient line, in both directions, for
/// centers at distances `[r_min, r_max]`. Local accumulator maxima become
/// centers; each center's radius is the best-supported 4 px distance band of
/// the edge pixels around it.
pub fn hough_circles(gray: &GrayImage, p: &HoughParams) -> Vec<CircleCandidate> {
    let (w, h) = (gray.width(), gray.height());
    if w == 0 || h == 0 || !(p.r_min <= p.r_max) || !(p.dp > 0.0) {
        return Vec::new();
    }
    let Ok((edges, grad)) = canny_with_gradients(gray, p.canny_high / 2.0, p.canny_high) else {
        return Vec::new();
    };
    let aw = (w as f64 / p.dp).ceil() as usize;
    let ah = (h as f64 / p.dp).ceil() as usize;
    let acc = accumulate(&edges, &grad.dx, &grad.dy, aw, ah, p);

    let peaks = find_peaks(&acc, aw, ah, p.accum_thresh);
    let edge_pts: Vec<(f64, f64)> = (0..w * h)
        .filter(|&i| edges.bits()[i])
        .map(|i| ((i % w) as f64, (i / w) as f64))
        .collect();

    let mut out: Vec<CircleCandidate> = Vec::new();
    for &peak in peaks.iter().take(p.max_peaks) {
        let (ax, ay) = refine(&acc, aw, ah, peak);
        let (cx, cy) = (ax * p.dp, ay * p.dp);
        if out.iter().any(|c| (c.cx - cx).hypot(c.cy - cy) < p.min_dist) {
            continue;
        }
        let Some(radius) = estimate_radius(&edge_pts, cx, cy, p) else {
            continue;
        };
        out.push(CircleCandidate {
            cx,
            cy,
            radius,
            score: acc[peak],
            edge_strength: ring_edge_strength(&edges, cx, cy, radius, p.ring_thickness),
        });
    }
    // Peaks were visited in descending vote order; keep that order stable.
    out.sort_by(|a, b| b.score.cmp(&a.score));
    out
}

fn accumulate(edges: &BinaryMask, dx: &[i32], dy: &[i32], aw: usize, ah: usize, p: &HoughParams) -> Vec<u32> {
    let w = edges.width();
    let mut acc = vec![0u32; aw * ah];
    // Half-cell steps so the vote line touches every cell it crosses.
    let k_lo = (2.0 * p.r_min / p.dp).ceil() as i64;
    let k_hi = (2.0 * p.r_max / p.dp).floor() as i64;
    for (i, &on) in edges.bits().iter().enumerate() {
        if !on {
            continue;
        }
        let (gx, gy) = (f64::from(dx[i]), f64::from(dy[i]));
        let mag = gx.hypot(gy);
        if mag == 0.0 {
            continue;
        }
        let (ux, uy) = (gx / mag, gy / mag);
        let (x0, y0) = ((i % w) as f64 / p.dp, (i / w) as f64 / p.dp);
        for sign in [1.0, -1.0] {
            let mut last = usize::MAX;
            for k in k_lo..=k_hi {
                let t = sign * k as f64 * 0.5;
                let (ax, ay) = ((x0 + t * ux + 0.5).floor(), (y0 + t * uy + 0.5).floor());
                if ax < 0.0 || ay < 0.0 || ax >= aw as f64 || ay >= ah as f64 {
                    break;
                }
                let cell = ay as usize * aw + ax as usize;
                if cell != last {
                    acc[cell] += 1;
                    last = cell;
                }
            }
        }
    }
    acc
}

/// Cells at or above `thresh` that beat earlier neighbours strictly and later
/// ones weakly, sorted by votes (descending) then index.
fn find_peaks(acc: &[u32], aw: usize, ah: usize, thresh: u32) -> Vec<usize> {
    let mut peaks = Vec::new();
    for y in 0..ah {
        for x in 0..aw {
            let i = y * aw + x;
            let v = acc[i];
            if v < thresh.max(1) {
                continue;
            }
            let mut ok = true;
            'n: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= aw as isize || ny >= ah as isize {
                        continue;
                    }
                    let j = ny as usize * aw + nx as usize;
                    let earlier = j < i;
                    if (earlier && acc[j] >= v) || (!earlier && acc[j] > v) {
                        ok = false;
                        break 'n;
                    }
                }
            }
            if ok {
                peaks.push(i);
            }
        }
    }
    peaks.sort_by(|&a, &b| acc[b].cmp(&acc[a]).then(a.cmp(&b)));
    peaks
}

/// Vote-weighted centroid of the 3x3 neighbourhood, in accumulator units.
fn refine(acc: &[u32], aw: usize, ah: usize, peak: usize) -> (f64, f64) {
    let (px, py) = ((peak % aw) as isize, (peak / aw) as isize);
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for dy in -1..=1 {
        for dx in -1..=1 {
            let (nx, ny) = (px + dx, py + dy);
            if nx < 0 || ny < 0 || nx >= aw as isize || ny >= ah as isize {
                continue;
            }
            let v = f64::from(acc[ny as usize * aw + nx as usize]);
            sx += v * nx as f64;
            sy += v * ny as f64;
            sw += v;
        }
    }
    (sx / sw, sy / sw)
}

const RADIUS_BIN: f64 = 2.0;

fn estimate_radius(edge_pts: &[(f64, f64)], cx: f64, cy: f64, p: &HoughParams) -> Option<f64> {
    let nbins = ((p.r_max - p.r_min) / RADIUS_BIN).floor() as usize + 1;
    let mut hist = vec![0usize; nbins + 1];
    let mut dists = Vec::new();
    for &(x, y) in edge_pts {
        let d = (x - cx).hypot(y - cy);
        if d >= p.r_min && d <= p.r_max {
            hist[((d - p.r_min) / RADIUS_BIN) as usize] += 1;
            dists.push(d);
        }
    }
    let mut best: Option<(usize, f64)> = None;
    for b in 0..nbins {
        let count = hist[b] + hist[b + 1];
        let r_mid = p.r_min + RADIUS_BIN * (b as f64 + 1.0);
        let support = count as f64 / r_mid;
        if count > 0 && best.is_none_or(|(_, s)| support > s) {
            best = Some((b, support));
        }
    }
    let (b, _) = best?;
    let lo = p.r_min + RADIUS_BIN * b as f64;
    let hi = lo + 2.0 * RADIUS_BIN;
    let inside: Vec<f64> = dists.into_iter().filter(|&d| d >= lo && d < hi).collect();
    let r_mid = lo + RADIUS_BIN;
    if (inside.len() as f64) < p.min_coverage * std::f64::consts::TAU * r_mid {
        return None;
    }
    Some(inside.iter().sum::<f64>() / inside.len() as f64)
}

/// Mean edge value (255 on edge pixels, 0 elsewhere) over the pixels whose
/// distance to the center is within `thickness / 2` of `r`.
pub fn ring_edge_strength(edges: &BinaryMask, cx: f64, cy: f64, r: f64, thickness: f64) -> f64 {
    let half = thickness / 2.0;
    let (w, h) = (edges.width() as isize, edges.height() as isize);
    let x0 = ((cx - r - half).floor() as isize).max(0);
    let x1 = ((cx + r + half).ceil() as isize).min(w - 1);
    let y0 = ((cy - r - half).floor() as isize).max(0);
    let y1 = ((cy + r + half).ceil() as isize).min(h - 1);
    let (mut n, mut on) = (0usize, 0usize);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d = (x as f64 - cx).hypot(y as f64 - cy);
            if (d - r).abs() <= half {
                n += 1;
                if edges.get(x as usize, y as usize) {
                    on += 1;
                }
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        255.0 * on as f64 / n as f64
    }
}
