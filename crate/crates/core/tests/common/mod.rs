#![allow(dead_code)]

pub mod reference;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cot_harness::render::{Frame, Provenance};
use cot_harness::vision::{BinaryMask, GrayImage};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random size with both sides in `min..=max`.
pub fn random_dims(rng: &mut impl Rng, min: usize, max: usize) -> (usize, usize) {
    (rng.random_range(min..=max), rng.random_range(min..=max))
}

/// Gray image mixing flat regions, gradients and noise, so that edge and
/// histogram code sees both ties and variety.
pub fn random_gray(rng: &mut impl Rng, w: usize, h: usize) -> GrayImage {
    match rng.random_range(0..4) {
        0 => GrayImage::from_fn(w, h, |_, _| rng.random()),
        1 => {
            let (a, b): (u8, u8) = (rng.random(), rng.random());
            let cx = rng.random_range(0.0..w as f64);
            let cy = rng.random_range(0.0..h as f64);
            let r = rng.random_range(0.5..(w.max(h) as f64 + 1.0));
            GrayImage::from_fn(w, h, |x, y| if (x as f64 - cx).hypot(y as f64 - cy) <= r { a } else { b })
        }
        2 => {
            let sx = rng.random_range(0..8usize);
            let sy = rng.random_range(0..8usize);
            let off: u8 = rng.random();
            GrayImage::from_fn(w, h, |x, y| off.wrapping_add((x * sx + y * sy) as u8))
        }
        _ => {
            let levels: Vec<u8> = (0..3).map(|_| rng.random()).collect();
            GrayImage::from_fn(w, h, |_, _| levels[rng.random_range(0..3)])
        }
    }
}

pub fn random_mask(rng: &mut impl Rng, w: usize, h: usize) -> BinaryMask {
    let p = rng.random_range(0.05..0.9);
    if rng.random_bool(0.5) {
        BinaryMask::from_fn(w, h, |_, _| rng.random_bool(p))
    } else {
        // Blocky masks give larger components, holes and nesting.
        let b = rng.random_range(2..6usize);
        let cells: Vec<bool> = (0..(w / b + 1) * (h / b + 1)).map(|_| rng.random_bool(p)).collect();
        let cw = w / b + 1;
        BinaryMask::from_fn(w, h, |x, y| cells[(y / b) * cw + x / b] ^ rng.random_bool(0.03))
    }
}

pub fn random_frame(rng: &mut impl Rng, w: usize, h: usize, channels: u8) -> Frame {
    let data: Vec<u8> = (0..w * h * usize::from(channels)).map(|_| rng.random()).collect();
    Frame::new(w, h, channels, data, 0.0, Provenance::Input).expect("dims")
}

/// Gray image of filled discs on a flat background, blurred the way the
/// detectors blur, as used by the circle tests.
pub fn disc_image(w: usize, h: usize, cx: f64, cy: f64, r: f64, fg: u8, bg: u8) -> GrayImage {
    // 4x4 supersampling gives anti-aliased edges.
    let img = GrayImage::from_fn(w, h, |x, y| {
        let mut inside = 0u32;
        for sy in 0..4 {
            for sx in 0..4 {
                let px = x as f64 + (sx as f64 + 0.5) / 4.0 - 0.5;
                let py = y as f64 + (sy as f64 + 0.5) / 4.0 - 0.5;
                if (px - cx).hypot(py - cy) <= r {
                    inside += 1;
                }
            }
        }
        ((u32::from(fg) * inside + u32::from(bg) * (16 - inside) + 8) / 16) as u8
    });
    cot_harness::vision::gaussian_blur(&img, 7, 1.5).expect("valid kernel")
}
