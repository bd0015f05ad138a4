use super::{BinaryMask, GrayImage};
use crate::render::Frame;

/// HSV image in the 8-bit convention: `H` in `[0, 179]` (degrees / 2),
/// `S` and `V` in `[0, 255]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HsvImage {
    width: usize,
    height: usize,
    data: Vec<[u8; 3]>,
}

impl HsvImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.data[y * self.width + x]
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.data
    }
}

/// Hexcone HSV of one pixel, all divisions rounded half up.
pub fn rgb_to_hsv_pixel(rgb: [u8; 3]) -> [u8; 3] {
    let [r, g, b] = rgb.map(i32::from);
    let v = r.max(g).max(b);
    let min = r.min(g).min(b);
    let diff = v - min;
    let s = if v == 0 { 0 } else { (510 * diff + v) / (2 * v) };
    let h = if diff == 0 {
        0
    } else {
        let num = if v == r {
            g - b
        } else if v == g {
            b - r + 2 * diff
        } else {
            r - g + 4 * diff
        };
        // round(30 * num / diff) with floor semantics for negative values
        let h = (60 * num + diff).div_euclid(2 * diff);
        if h < 0 {
            h + 180
        } else {
            h
        }
    };
    [h as u8, s as u8, v as u8]
}

/// Convert an RGB(A) frame to HSV; alpha is ignored.
pub fn rgb_to_hsv(frame: &Frame) -> HsvImage {
    let c = usize::from(frame.channels());
    let data = frame.data().chunks_exact(c).map(|p| rgb_to_hsv_pixel([p[0], p[1], p[2]])).collect();
    HsvImage { width: frame.width(), height: frame.height(), data }
}

/// Luma with fixed-point BT.601 weights.
pub fn rgb_to_gray(frame: &Frame) -> GrayImage {
    let c = usize::from(frame.channels());
    let data = frame
        .data()
        .chunks_exact(c)
        .map(|p| {
            let v = u32::from(p[0]) * 4899 + u32::from(p[1]) * 9617 + u32::from(p[2]) * 1868 + 8192;
            (v >> 14) as u8
        })
        .collect();
    GrayImage::new(frame.width(), frame.height(), data).expect("frame dims are consistent")
}

/// Mask of pixels whose three channels all lie in the closed bounds.
pub fn threshold_in_range(hsv: &HsvImage, lower: [u8; 3], upper: [u8; 3]) -> BinaryMask {
    let bits = hsv
        .data
        .iter()
        .map(|p| (0..3).all(|i| lower[i] <= p[i] && p[i] <= upper[i]))
        .collect();
    BinaryMask::new(hsv.width, hsv.height, bits).expect("hsv dims are consistent")
}
