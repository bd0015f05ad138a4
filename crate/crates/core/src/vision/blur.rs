use super::{reflect101, GrayImage, VisionError};

/// Gaussian taps in 8-bit fixed point, summing to exactly 256.
pub fn gaussian_kernel_fixed(ksize: usize, sigma: f64) -> Result<Vec<u32>, VisionError> {
    if ksize == 0 || ksize % 2 == 0 {
        return Err(VisionError::BadParameter(format!("kernel size must be odd, got {ksize}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(VisionError::BadParameter(format!("sigma must be positive, got {sigma}")));
    }
    let c = (ksize / 2) as f64;
    let raw: Vec<f64> = (0..ksize).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = raw.iter().sum();
    let mut taps: Vec<i64> = raw.iter().map(|v| (v / total * 256.0).round() as i64).collect();
    let sum: i64 = taps.iter().sum();
    taps[ksize / 2] += 256 - sum;
    Ok(taps.into_iter().map(|t| t as u32).collect())
}

/// Separable Gaussian blur with reflect-101 borders.
pub fn gaussian_blur(img: &GrayImage, ksize: usize, sigma: f64) -> Result<GrayImage, VisionError> {
    let k = gaussian_kernel_fixed(ksize, sigma)?;
    let (w, h) = (img.width(), img.height());
    if w == 0 || h == 0 {
        return Ok(img.clone());
    }
    let r = (ksize / 2) as isize;
    let src = img.data();
    let mut tmp = vec![0u32; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0u32;
            for (i, &t) in k.iter().enumerate() {
                acc += t * u32::from(row[reflect101(x as isize + i as isize - r, w)]);
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0u32;
            for (i, &t) in k.iter().enumerate() {
                acc += t * tmp[reflect101(y as isize + i as isize - r, h) * w + x];
            }
            out[y * w + x] = ((acc + 32768) >> 16) as u8;
        }
    }
    GrayImage::new(w, h, out)
}
