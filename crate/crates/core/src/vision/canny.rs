use super::{BinaryMask, GrayImage, VisionError};

/// Integer Sobel derivatives (3x3, replicated borders).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gradients {
    pub width: usize,
    pub height: usize,
    pub dx: Vec<i32>,
    pub dy: Vec<i32>,
}

impl Gradients {
    pub fn magnitude_sq(&self, i: usize) -> i64 {
        let (dx, dy) = (i64::from(self.dx[i]), i64::from(self.dy[i]));
        dx * dx + dy * dy
    }
}

pub fn sobel(img: &GrayImage) -> Gradients {
    let (w, h) = (img.width(), img.height());
    let at = |x: isize, y: isize| {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        i32::from(img.get(xc, yc))
    };
    let mut dx = vec![0; w * h];
    let mut dy = vec![0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            dx[i] = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
            dy[i] = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
        }
    }
    Gradients { width: w, height: h, dx, dy }
}

/// Canny edges with L2 gradient magnitude.
pub fn canny(img: &GrayImage, low: f64, high: f64) -> Result<BinaryMask, VisionError> {
    canny_with_gradients(img, low, high).map(|(edges, _)| edges)
}

/// Canny edges together with the Sobel gradients they were computed from.
///
/// A pixel is a candidate when its magnitude exceeds `low` and it survives
/// non-maximum suppression across its gradient direction (quantized to four
/// sectors); candidates connected to a pixel above `high` become edges.
pub fn canny_with_gradients(img: &GrayImage, low: f64, high: f64) -> Result<(BinaryMask, Gradients), VisionError> {
    if !(low >= 0.0 && low <= high) {
        return Err(VisionError::BadParameter(format!("need 0 <= low <= high, got {low} > {high}")));
    }
    let (w, h) = (img.width(), img.height());
    let g = sobel(img);
    let low_sq = (low.floor() as i64).pow(2);
    let high_sq = (high.floor() as i64).pow(2);
    let mag: Vec<i64> = (0..w * h).map(|i| g.magnitude_sq(i)).collect();
    let m_at = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0
        } else {
            mag[y as usize * w + x as usize]
        }
    };

    const TG22: i64 = 13573;
    // 0 = not an edge, 1 = weak candidate, 2 = strong
    let mut state = vec![0u8; w * h];
    let mut stack = Vec::new();
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            let m = mag[i];
            if m <= low_sq {
                continue;
            }
            let (sdx, sdy) = (i64::from(g.dx[i]), i64::from(g.dy[i]));
            let (ax, ay) = (sdx.abs(), sdy.abs() << 15);
            let tg22x = ax * TG22;
            let tg67x = tg22x + (ax << 16);
            let ((x1, y1), (x2, y2)) = if ay < tg22x {
                ((x - 1, y), (x + 1, y))
            } else if ay > tg67x {
                ((x, y - 1), (x, y + 1))
            } else {
                let s = if (sdx < 0) != (sdy < 0) { -1 } else { 1 };
                ((x - s, y - 1), (x + s, y + 1))
            };
            if m > m_at(x1, y1) && m >= m_at(x2, y2) {
                if m > high_sq {
                    state[i] = 2;
                    stack.push(i);
                } else {
                    state[i] = 1;
                }
            }
        }
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if state[j] == 1 {
                    state[j] = 2;
                    stack.push(j);
                }
            }
        }
    }
    let edges = BinaryMask::new(w, h, state.iter().map(|&s| s == 2).collect())?;
    Ok((edges, g))
}
