//! Image-processing primitives used by the detectors, written from scratch
//! with integer arithmetic wherever the result feeds a threshold.

mod blur;
mod canny;
mod clahe;
mod color;
mod contours;
mod hough;
mod morphology;
mod resize;

pub use blur::{gaussian_blur, gaussian_kernel_fixed};
pub use canny::{canny, canny_with_gradients, sobel, Gradients};
pub use clahe::clahe;
pub use color::{rgb_to_gray, rgb_to_hsv, rgb_to_hsv_pixel, threshold_in_range, HsvImage};
pub use contours::{external_contours, BBox, ContourStats};
pub use hough::{hough_circles, ring_edge_strength, CircleCandidate, HoughParams};
pub use morphology::{close, dilate, erode, morphology, MorphOp};
pub use resize::{resize_area, resize_area_frame};

use thiserror::Error;

use crate::render::{Frame, Provenance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VisionError {
    #[error("buffer has {actual} elements, expected {expected}")]
    BadLength { expected: usize, actual: usize },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

/// 8-bit single-channel image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, VisionError> {
        if data.len() != width * height {
            return Err(VisionError::BadLength { expected: width * height, actual: data.len() });
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage { width, height, data: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn to_frame(&self) -> Frame {
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Frame::new(self.width, self.height, 3, data, 0.0, Provenance::Input).expect("valid dims")
    }
}

/// Boolean mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, VisionError> {
        if bits.len() != width * height {
            return Err(VisionError::BadLength { expected: width * height, actual: bits.len() });
        }
        Ok(BinaryMask { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        BinaryMask { width, height, bits: vec![false; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        BinaryMask { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Element-wise AND; dimensions must match.
    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask, VisionError> {
        self.zip(other, |a, b| a && b)
    }

    /// Element-wise OR; dimensions must match.
    pub fn or(&self, other: &BinaryMask) -> Result<BinaryMask, VisionError> {
        self.zip(other, |a, b| a || b)
    }

    fn zip(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> Result<BinaryMask, VisionError> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(VisionError::BadParameter(format!(
                "mask sizes differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect();
        Ok(BinaryMask { width: self.width, height: self.height, bits })
    }

    /// Rows `y0..` of the mask.
    pub fn crop_rows(&self, y0: usize) -> BinaryMask {
        let y0 = y0.min(self.height);
        BinaryMask {
            width: self.width,
            height: self.height - y0,
            bits: self.bits[y0 * self.width..].to_vec(),
        }
    }

    /// White-on-black rendering for debug dumps.
    pub fn to_frame(&self) -> Frame {
        let data = self.bits.iter().flat_map(|&b| if b { [255; 3] } else { [0; 3] }).collect();
        Frame::new(self.width, self.height, 3, data, 0.0, Provenance::Input).expect("valid dims")
    }
}

/// Reflect-101 border index (`dcb|abcd|cba`).
pub(crate) fn reflect101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let period = 2 * (n - 1);
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}
