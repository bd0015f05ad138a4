use super::{GrayImage, VisionError};
use crate::render::Frame;

/// Overlap of destination pixel `d` with each source pixel, in units of
/// `1 / dst` source pixels. Weights for one destination pixel sum to `src`.
fn axis_weights(src: usize, dst: usize) -> Vec<Vec<(usize, u64)>> {
    (0..dst)
        .map(|d| {
            let (lo, hi) = (d * src, (d + 1) * src);
            let first = lo / dst;
            let last = (hi - 1) / dst;
            (first..=last)
                .filter_map(|i| {
                    let ov = hi.min((i + 1) * dst) as i64 - lo.max(i * dst) as i64;
                    (ov > 0).then_some((i, ov as u64))
                })
                .collect()
        })
        .collect()
}

fn resize_channels(src: &[u8], w: usize, h: usize, c: usize, nw: usize, nh: usize) -> Vec<u8> {
    let wx = axis_weights(w, nw);
    let wy = axis_weights(h, nh);
    let mut tmp = vec![0u64; h * nw * c];
    for y in 0..h {
        for (dx, taps) in wx.iter().enumerate() {
            for ch in 0..c {
                tmp[(y * nw + dx) * c + ch] =
                    taps.iter().map(|&(sx, wgt)| wgt * u64::from(src[(y * w + sx) * c + ch])).sum();
            }
        }
    }
    let total = (w * h) as u64;
    let mut out = vec![0u8; nw * nh * c];
    for (dy, taps) in wy.iter().enumerate() {
        for dx in 0..nw {
            for ch in 0..c {
                let s: u64 = taps.iter().map(|&(sy, wgt)| wgt * tmp[(sy * nw + dx) * c + ch]).sum();
                out[(dy * nw + dx) * c + ch] = ((2 * s + total) / (2 * total)) as u8;
            }
        }
    }
    out
}

fn check_dims(w: usize, h: usize, nw: usize, nh: usize) -> Result<(), VisionError> {
    if nw == 0 || nh == 0 || w == 0 || h == 0 {
        return Err(VisionError::BadParameter(format!("cannot resize {w}x{h} to {nw}x{nh}")));
    }
    Ok(())
}

/// Area-averaging resize with exact rational footprints, rounded half up.
pub fn resize_area(img: &GrayImage, new_w: usize, new_h: usize) -> Result<GrayImage, VisionError> {
    check_dims(img.width(), img.height(), new_w, new_h)?;
    let data = resize_channels(img.data(), img.width(), img.height(), 1, new_w, new_h);
    GrayImage::new(new_w, new_h, data)
}

/// [`resize_area`] over every channel of a frame; time and provenance are kept.
pub fn resize_area_frame(frame: &Frame, new_w: usize, new_h: usize) -> Result<Frame, VisionError> {
    check_dims(frame.width(), frame.height(), new_w, new_h)?;
    let c = usize::from(frame.channels());
    let data = resize_channels(frame.data(), frame.width(), frame.height(), c, new_w, new_h);
    Frame::new(new_w, new_h, frame.channels(), data, frame.time_sec, frame.provenance)
        .map_err(|e| VisionError::BadParameter(e.to_string()))
}
