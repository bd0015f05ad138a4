use super::{BinaryMask, VisionError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphOp {
    Erode,
    Dilate,
    /// Dilate then erode.
    Close,
}

/// Square-kernel morphology; pixels outside the mask count as background.
pub fn morphology(mask: &BinaryMask, op: MorphOp, kernel: usize, iterations: usize) -> Result<BinaryMask, VisionError> {
    if kernel == 0 || kernel % 2 == 0 {
        return Err(VisionError::BadParameter(format!("kernel size must be odd and positive, got {kernel}")));
    }
    let mut out = mask.clone();
    for _ in 0..iterations {
        out = match op {
            MorphOp::Erode => pass(&out, kernel / 2, true),
            MorphOp::Dilate => pass(&out, kernel / 2, false),
            MorphOp::Close => pass(&pass(&out, kernel / 2, false), kernel / 2, true),
        };
    }
    Ok(out)
}

pub fn erode(mask: &BinaryMask, kernel: usize, iterations: usize) -> Result<BinaryMask, VisionError> {
    morphology(mask, MorphOp::Erode, kernel, iterations)
}

pub fn dilate(mask: &BinaryMask, kernel: usize, iterations: usize) -> Result<BinaryMask, VisionError> {
    morphology(mask, MorphOp::Dilate, kernel, iterations)
}

pub fn close(mask: &BinaryMask, kernel: usize, iterations: usize) -> Result<BinaryMask, VisionError> {
    morphology(mask, MorphOp::Close, kernel, iterations)
}

/// One separable pass: rows, then columns.
fn pass(mask: &BinaryMask, half: usize, erode: bool) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let rows = sweep(mask.bits(), w, h, half, erode, true);
    let bits = sweep(&rows, w, h, half, erode, false);
    BinaryMask::new(w, h, bits).expect("same dims")
}

fn sweep(src: &[bool], w: usize, h: usize, half: usize, erode: bool, horizontal: bool) -> Vec<bool> {
    let mut out = vec![false; src.len()];
    let (lines, len) = if horizontal { (h, w) } else { (w, h) };
    let idx = |line: usize, i: usize| if horizontal { line * w + i } else { i * w + line };
    let mut prefix = vec![0usize; len + 1];
    for line in 0..lines {
        for i in 0..len {
            prefix[i + 1] = prefix[i] + usize::from(src[idx(line, i)]);
        }
        for i in 0..len {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(len);
            let n = prefix[hi] - prefix[lo];
            out[idx(line, i)] = if erode {
                // The window must lie inside the image and be fully set.
                i >= half && i + half < len && n == 2 * half + 1
            } else {
                n > 0
            };
        }
    }
    out
}
