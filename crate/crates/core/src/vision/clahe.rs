use super::{reflect101, GrayImage, VisionError};

/// Contrast-limited adaptive histogram equalization on a `tiles x tiles` grid.
///
/// Images whose sides are not multiples of the grid are padded with
/// reflect-101 borders for the histograms; interpolation between tile
/// lookup tables is bilinear in exact integer arithmetic.
pub fn clahe(img: &GrayImage, clip_limit: f64, tiles: (usize, usize)) -> Result<GrayImage, VisionError> {
    let (tx, ty) = tiles;
    let (w, h) = (img.width(), img.height());
    if tx == 0 || ty == 0 {
        return Err(VisionError::BadParameter("tile grid must be non-empty".into()));
    }
    if w < tx || h < ty {
        return Err(VisionError::BadParameter(format!(
            "image {w}x{h} is smaller than the {tx}x{ty} tile grid"
        )));
    }
    if !(clip_limit >= 0.0 && clip_limit.is_finite()) {
        return Err(VisionError::BadParameter(format!("clip limit must be non-negative, got {clip_limit}")));
    }
    let tw = w.div_ceil(tx);
    let th = h.div_ceil(ty);
    let area = tw * th;
    let clip = if clip_limit > 0.0 { ((clip_limit * area as f64 / 256.0) as usize).max(1) } else { usize::MAX };
    let src = img.data();

    let mut luts = vec![[0u8; 256]; tx * ty];
    for j in 0..ty {
        for i in 0..tx {
            let mut hist = [0usize; 256];
            for y in j * th..(j + 1) * th {
                let sy = reflect101(y as isize, h);
                for x in i * tw..(i + 1) * tw {
                    hist[usize::from(src[sy * w + reflect101(x as isize, w)])] += 1;
                }
            }
            clip_histogram(&mut hist, clip);
            let lut = &mut luts[j * tx + i];
            let mut cdf = 0usize;
            for v in 0..256 {
                cdf += hist[v];
                lut[v] = ((2 * cdf * 255 + area) / (2 * area)).min(255) as u8;
            }
        }
    }

    // Tile coordinate of pixel x is x / tw - 1/2 = (2x - tw) / (2 tw).
    let axis = |p: usize, t: usize, n: usize| -> (usize, usize, i64) {
        let num = 2 * p as i64 - t as i64;
        let den = 2 * t as i64;
        let t1 = num.div_euclid(den);
        let frac = num - t1 * den;
        let a = t1.clamp(0, n as i64 - 1) as usize;
        let b = (t1 + 1).clamp(0, n as i64 - 1) as usize;
        (a, b, frac)
    };
    let denom = 4 * (tw * th) as i64;
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        let (y1, y2, fy) = axis(y, th, ty);
        let (wy1, wy2) = (2 * th as i64 - fy, fy);
        for x in 0..w {
            let (x1, x2, fx) = axis(x, tw, tx);
            let (wx1, wx2) = (2 * tw as i64 - fx, fx);
            let v = usize::from(src[y * w + x]);
            let lv = |tyi: usize, txi: usize| i64::from(luts[tyi * tx + txi][v]);
            let s = (lv(y1, x1) * wx1 + lv(y1, x2) * wx2) * wy1 + (lv(y2, x1) * wx1 + lv(y2, x2) * wx2) * wy2;
            out[y * w + x] = ((2 * s + denom) / (2 * denom)) as u8;
        }
    }
    GrayImage::new(w, h, out)
}

fn clip_histogram(hist: &mut [usize; 256], clip: usize) {
    let mut excess = 0;
    for v in hist.iter_mut() {
        if *v > clip {
            excess += *v - clip;
            *v = clip;
        }
    }
    let batch = excess / 256;
    let mut residual = excess - batch * 256;
    for v in hist.iter_mut() {
        *v += batch;
    }
    if residual > 0 {
        let step = (256 / residual).max(1);
        let mut i = 0;
        while i < 256 && residual > 0 {
            hist[i] += 1;
            residual -= 1;
            i += step;
        }
    }
}
