//! Slow, direct implementations of the vision primitives. Each one follows
//! the textbook definition pixel by pixel and shares no code with the
//! library beyond the image containers.

use std::collections::HashMap;

use cot_harness::render::Frame;
use cot_harness::vision::{BinaryMask, GrayImage};

fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

/// Mirror an index into `0..n` without repeating the edge sample.
pub fn mirror(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

/// Hexcone HSV with hue in half-degrees, from the sector definition.
pub fn hsv_pixel(rgb: [u8; 3]) -> [u8; 3] {
    let (r, g, b) = (f64::from(rgb[0]), f64::from(rgb[1]), f64::from(rgb[2]));
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let c = max - min;
    let s = if max == 0.0 { 0 } else { round_half_up(255.0 * c / max) };
    let h = if c == 0.0 {
        0
    } else {
        // Degrees / 2 as one exact quotient, so halves round correctly.
        let half_deg = if max == r {
            let q = 30.0 * (g - b) / c;
            if q < 0.0 {
                q + 180.0
            } else {
                q
            }
        } else if max == g {
            (30.0 * (b - r) + 60.0 * c) / c
        } else {
            (30.0 * (r - g) + 120.0 * c) / c
        };
        round_half_up(half_deg) % 180
    };
    [h as u8, s as u8, max as u8]
}

pub fn hsv(frame: &Frame) -> Vec<[u8; 3]> {
    let mut out = Vec::new();
    for y in 0..frame.height() {
        for x in 0..frame.width() {
            out.push(hsv_pixel(frame.rgb(x, y)));
        }
    }
    out
}

pub fn gray(frame: &Frame) -> GrayImage {
    GrayImage::from_fn(frame.width(), frame.height(), |x, y| {
        let [r, g, b] = frame.rgb(x, y);
        let v = (4899.0 * f64::from(r) + 9617.0 * f64::from(g) + 1868.0 * f64::from(b)) / 16384.0;
        round_half_up(v) as u8
    })
}

pub fn in_range(pixels: &[[u8; 3]], w: usize, h: usize, lo: [u8; 3], hi: [u8; 3]) -> BinaryMask {
    BinaryMask::from_fn(w, h, |x, y| {
        let p = pixels[y * w + x];
        p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1] && p[2] >= lo[2] && p[2] <= hi[2]
    })
}

/// Direct 2-D convolution with the outer product of `taps`.
pub fn blur(img: &GrayImage, taps: &[u32]) -> GrayImage {
    let r = (taps.len() / 2) as isize;
    GrayImage::from_fn(img.width(), img.height(), |x, y| {
        let mut acc = 0.0;
        for (j, &ty) in taps.iter().enumerate() {
            for (i, &tx) in taps.iter().enumerate() {
                let sx = mirror(x as isize + i as isize - r, img.width());
                let sy = mirror(y as isize + j as isize - r, img.height());
                acc += f64::from(tx * ty) * f64::from(img.get(sx, sy));
            }
        }
        round_half_up(acc / 65536.0) as u8
    })
}

fn window(mask: &BinaryMask, x: usize, y: usize, half: usize) -> (usize, usize) {
    // (set pixels, in-image pixels) of the square window
    let mut set = 0;
    let mut inside = 0;
    for dy in -(half as isize)..=half as isize {
        for dx in -(half as isize)..=half as isize {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            if nx >= 0 && ny >= 0 && (nx as usize) < mask.width() && (ny as usize) < mask.height() {
                inside += 1;
                if mask.get(nx as usize, ny as usize) {
                    set += 1;
                }
            }
        }
    }
    (set, inside)
}

pub fn erode(mask: &BinaryMask, k: usize, iters: usize) -> BinaryMask {
    let full = k * k;
    let mut m = mask.clone();
    for _ in 0..iters {
        m = BinaryMask::from_fn(m.width(), m.height(), |x, y| {
            let (set, inside) = window(&m, x, y, k / 2);
            inside == full && set == full
        });
    }
    m
}

pub fn dilate(mask: &BinaryMask, k: usize, iters: usize) -> BinaryMask {
    let mut m = mask.clone();
    for _ in 0..iters {
        m = BinaryMask::from_fn(m.width(), m.height(), |x, y| window(&m, x, y, k / 2).0 > 0);
    }
    m
}

pub fn close(mask: &BinaryMask, k: usize, iters: usize) -> BinaryMask {
    let mut m = mask.clone();
    for _ in 0..iters {
        m = erode(&dilate(&m, k, 1), k, 1);
    }
    m
}

/// Area resize by supersampling: every source pixel becomes an `nw x nh`
/// block, every destination pixel averages a `w x h` block of those.
pub fn resize_area(src: &[u8], w: usize, h: usize, c: usize, nw: usize, nh: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(nw * nh * c);
    for dy in 0..nh {
        for dx in 0..nw {
            for ch in 0..c {
                let mut sum = 0u64;
                for yy in dy * h..(dy + 1) * h {
                    for xx in dx * w..(dx + 1) * w {
                        sum += u64::from(src[((yy / nh) * w + xx / nw) * c + ch]);
                    }
                }
                let n = (w * h) as f64;
                out.push(round_half_up(sum as f64 / n) as u8);
            }
        }
    }
    out
}

/// CLAHE from its definition: per-tile clipped histograms over the mirrored
/// image, equalization tables, and bilinear blending between tile centers.
pub fn clahe(img: &GrayImage, clip_limit: f64, tx: usize, ty: usize) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let tw = (w + tx - 1) / tx;
    let th = (h + ty - 1) / ty;
    let area = tw * th;
    let clip = if clip_limit > 0.0 { ((clip_limit * area as f64 / 256.0) as usize).max(1) } else { usize::MAX };
    let padded = |x: usize, y: usize| img.get(mirror(x as isize, w), mirror(y as isize, h));

    let mut tables: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    for j in 0..ty {
        for i in 0..tx {
            let mut hist = vec![0usize; 256];
            for y in 0..th {
                for x in 0..tw {
                    hist[usize::from(padded(i * tw + x, j * th + y))] += 1;
                }
            }
            let mut excess = 0;
            for v in hist.iter_mut() {
                if *v > clip {
                    excess += *v - clip;
                    *v = clip;
                }
            }
            let each = excess / 256;
            let mut left = excess % 256;
            for v in hist.iter_mut() {
                *v += each;
            }
            if left > 0 {
                let stride = (256 / left).max(1);
                let mut bin = 0;
                while bin < 256 && left > 0 {
                    hist[bin] += 1;
                    left -= 1;
                    bin += stride;
                }
            }
            let mut table = Vec::with_capacity(256);
            let mut cum = 0;
            for count in &hist {
                cum += count;
                table.push((round_half_up(255.0 * cum as f64 / area as f64)).min(255) as f64);
            }
            tables.insert((i, j), table);
        }
    }

    // Tile-center coordinate of pixel p is p / t - 1/2; kept as a fraction
    // over 2t so the blend is exact.
    let split = |p: usize, t: usize, n: usize| -> (usize, usize, f64) {
        let num = 2 * p as i64 - t as i64;
        let den = 2 * t as i64;
        let lower = (num as f64 / den as f64).floor() as i64;
        let frac = (num - lower * den) as f64;
        let clampi = |v: i64| v.max(0).min(n as i64 - 1) as usize;
        (clampi(lower), clampi(lower + 1), frac)
    };
    GrayImage::from_fn(w, h, |x, y| {
        let v = usize::from(img.get(x, y));
        let (x1, x2, fx) = split(x, tw, tx);
        let (y1, y2, fy) = split(y, th, ty);
        let (ax, bx) = (2.0 * tw as f64 - fx, fx);
        let (ay, by) = (2.0 * th as f64 - fy, fy);
        let s = tables[&(x1, y1)][v] * ax * ay
            + tables[&(x2, y1)][v] * bx * ay
            + tables[&(x1, y2)][v] * ax * by
            + tables[&(x2, y2)][v] * bx * by;
        round_half_up(s / (4.0 * (tw * th) as f64)) as u8
    })
}

/// 3x3 Sobel derivatives with clamped borders.
pub fn sobel(img: &GrayImage) -> (Vec<i32>, Vec<i32>) {
    const KX: [[i32; 3]; 3] = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]];
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mut gx = Vec::new();
    let mut gy = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let (mut sx, mut sy) = (0, 0);
            for j in 0..3 {
                for i in 0..3 {
                    let px = (x + i as isize - 1).clamp(0, w - 1) as usize;
                    let py = (y + j as isize - 1).clamp(0, h - 1) as usize;
                    let v = i32::from(img.get(px, py));
                    sx += KX[j][i] * v;
                    sy += KX[i][j] * v;
                }
            }
            gx.push(sx);
            gy.push(sy);
        }
    }
    (gx, gy)
}

/// Canny with L2 magnitude, angle-sector non-maximum suppression and
/// hysteresis by repeated growth until nothing changes.
pub fn canny(img: &GrayImage, low: f64, high: f64) -> BinaryMask {
    let (w, h) = (img.width(), img.height());
    let (gx, gy) = sobel(img);
    // sqrt of the exact integer square, so equal magnitudes compare equal.
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(&a, &b)| f64::from(a * a + b * b).sqrt()).collect();
    let at = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    let (low, high) = (low.floor(), high.floor());
    // 0 none, 1 weak, 2 strong
    let mut state = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m <= low {
                continue;
            }
            let angle = f64::from(gy[i]).atan2(f64::from(gx[i])).to_degrees().rem_euclid(180.0);
            let (xi, yi) = (x as isize, y as isize);
            // `a` must be beaten strictly, `b` only matched.
            let (a, b) = if !(22.5..157.5).contains(&angle) {
                (at(xi - 1, yi), at(xi + 1, yi))
            } else if (67.5..=112.5).contains(&angle) {
                (at(xi, yi - 1), at(xi, yi + 1))
            } else if angle < 90.0 {
                // gradient along (+1,+1) or (-1,-1)
                (at(xi - 1, yi - 1), at(xi + 1, yi + 1))
            } else {
                (at(xi + 1, yi - 1), at(xi - 1, yi + 1))
            };
            if m > a && m >= b {
                state[i] = if m > high { 2 } else { 1 };
            }
        }
    }
    loop {
        let mut changed = false;
        for y in 0..h {
            for x in 0..w {
                if state[y * w + x] != 1 {
                    continue;
                }
                let touches = (-1isize..=1).any(|dy| {
                    (-1isize..=1).any(|dx| {
                        let (nx, ny) = (x as isize + dx, y as isize + dy);
                        nx >= 0
                            && ny >= 0
                            && nx < w as isize
                            && ny < h as isize
                            && state[ny as usize * w + nx as usize] == 2
                    })
                });
                if touches {
                    state[y * w + x] = 2;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    BinaryMask::from_fn(w, h, |x, y| state[y * w + x] == 2)
}

/// Reference shape statistics of one outer contour.
#[derive(Debug, Clone, PartialEq)]
pub struct RefContour {
    pub area: f64,
    pub bbox: (usize, usize, usize, usize),
    pub m10: f64,
    pub m01: f64,
    pub perimeter: f64,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Outer contours via union-find labelling and whole-image hole filling.
/// Returned in no particular order.
pub fn contours(mask: &BinaryMask) -> Vec<RefContour> {
    let (w, h) = (mask.width(), mask.height());
    let mut parent: Vec<usize> = (0..w * h).collect();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            for (dx, dy) in [(-1isize, -1isize), (0, -1), (1, -1), (-1, 0)] {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < w && mask.get(nx as usize, ny as usize) {
                    let a = find(&mut parent, y * w + x);
                    let b = find(&mut parent, ny as usize * w + nx as usize);
                    parent[a] = b;
                }
            }
        }
    }
    let mut comps: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                let r = find(&mut parent, y * w + x);
                comps.entry(r).or_default().push((x, y));
            }
        }
    }
    let fills: Vec<(Vec<(usize, usize)>, Vec<bool>)> = comps
        .values()
        .map(|pix| {
            // Background reachable from beyond the image, with only this
            // component in the way.
            let (pw, ph) = (w + 2, h + 2);
            let mut wall = vec![false; pw * ph];
            for &(x, y) in pix {
                wall[(y + 1) * pw + x + 1] = true;
            }
            let mut out = vec![false; pw * ph];
            let mut stack = vec![0usize];
            out[0] = true;
            while let Some(i) = stack.pop() {
                let (x, y) = (i % pw, i / pw);
                let mut push = |nx: usize, ny: usize| {
                    let j = ny * pw + nx;
                    if !out[j] && !wall[j] {
                        out[j] = true;
                        stack.push(j);
                    }
                };
                if x > 0 {
                    push(x - 1, y);
                }
                if x + 1 < pw {
                    push(x + 1, y);
                }
                if y > 0 {
                    push(x, y - 1);
                }
                if y + 1 < ph {
                    push(x, y + 1);
                }
            }
            let filled = (0..w * h).map(|i| !out[(i / w + 1) * pw + i % w + 1]).collect();
            (pix.clone(), filled)
        })
        .collect();

    let mut result = Vec::new();
    for (k, (pix, filled)) in fills.iter().enumerate() {
        let (x, y) = pix[0];
        let nested = fills.iter().enumerate().any(|(o, (_, f))| o != k && f[y * w + x]);
        if nested {
            continue;
        }
        let (mut area, mut m10, mut m01) = (0.0, 0.0, 0.0);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for i in 0..w * h {
            if filled[i] {
                let (px, py) = (i % w, i / w);
                area += 1.0;
                m10 += px as f64;
                m01 += py as f64;
                x0 = x0.min(px);
                y0 = y0.min(py);
                x1 = x1.max(px);
                y1 = y1.max(py);
            }
        }
        let set: std::collections::HashSet<(usize, usize)> = pix.iter().copied().collect();
        result.push(RefContour {
            area,
            bbox: (x0, y0, x1 - x0 + 1, y1 - y0 + 1),
            m10,
            m01,
            perimeter: trace(&set),
        });
    }
    result
}

/// Moore-neighbour tracing with an explicit backtrack pixel, stopped when
/// the start pixel is re-entered from the same backtrack pixel.
fn trace(pix: &std::collections::HashSet<(usize, usize)>) -> f64 {
    let start = *pix.iter().min_by_key(|&&(x, y)| (y, x)).expect("non-empty");
    let on = |p: (isize, isize)| p.0 >= 0 && p.1 >= 0 && pix.contains(&(p.0 as usize, p.1 as usize));
    // Clockwise in image coordinates (y down), starting east.
    let ring = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];
    let s = (start.0 as isize, start.1 as isize);
    let first_back = (s.0 - 1, s.1);
    let mut cur = s;
    let mut back = first_back;
    let mut length = 0.0;
    let mut first_move: Option<(isize, isize)> = None;
    loop {
        let bi = ring.iter().position(|&(dx, dy)| (cur.0 + dx, cur.1 + dy) == back).expect("backtrack is a neighbour");
        let mut next = None;
        let mut prev = back;
        for k in 1..=8 {
            let (dx, dy) = ring[(bi + k) % 8];
            let cand = (cur.0 + dx, cur.1 + dy);
            if on(cand) {
                next = Some(cand);
                break;
            }
            prev = cand;
        }
        let Some(n) = next else {
            return 0.0;
        };
        if cur == s {
            match first_move {
                None => first_move = Some(n),
                Some(m) if m == n => return length,
                _ => {}
            }
        }
        let step = (n.0 - cur.0).abs() + (n.1 - cur.1).abs();
        length += if step == 2 { std::f64::consts::SQRT_2 } else { 1.0 };
        back = prev;
        cur = n;
    }
}

/// Mean edge value over the pixels whose center lies within `thick / 2`
/// of the circle, scanning the whole image.
pub fn ring_strength(edges: &BinaryMask, cx: f64, cy: f64, r: f64, thick: f64) -> f64 {
    let (mut n, mut on) = (0usize, 0usize);
    for y in 0..edges.height() {
        for x in 0..edges.width() {
            if ((x as f64 - cx).hypot(y as f64 - cy) - r).abs() <= thick / 2.0 {
                n += 1;
                on += usize::from(edges.get(x, y));
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        255.0 * on as f64 / n as f64
    }
}

/// Exhaustive circle scoring: for every integer center and radius, the
/// fraction of the circumference within half a pixel of an edge pixel.
/// Returns the best `(cx, cy, r, score)`.
pub fn best_circle(edges: &BinaryMask, r_min: usize, r_max: usize) -> (f64, f64, f64, f64) {
    let (w, h) = (edges.width(), edges.height());
    let pts: Vec<(f64, f64)> = (0..w * h)
        .filter(|&i| edges.bits()[i])
        .map(|i| ((i % w) as f64, (i / w) as f64))
        .collect();
    let mut best = (0.0, 0.0, 0.0, f64::NEG_INFINITY);
    let mut counts = vec![0u32; r_max + 2];
    for cy in 0..h {
        for cx in 0..w {
            counts.iter_mut().for_each(|c| *c = 0);
            for &(x, y) in &pts {
                let d = (x - cx as f64).hypot(y - cy as f64);
                let bin = round_half_up(d);
                if bin >= r_min as i64 && bin <= r_max as i64 {
                    counts[bin as usize] += 1;
                }
            }
            for r in r_min..=r_max {
                let score = f64::from(counts[r]) / (std::f64::consts::TAU * r as f64);
                if score > best.3 {
                    best = (cx as f64, cy as f64, r as f64, score);
                }
            }
        }
    }
    best
}
