use std::collections::VecDeque;

use super::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BBox {
    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }
}

/// Shape statistics of one external contour.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourStats {
    /// Pixel count of the component with its holes filled.
    pub area: f64,
    pub perimeter: f64,
    pub bbox: BBox,
    pub m00: f64,
    pub m10: f64,
    pub m01: f64,
    pub circularity: f64,
    /// Pixels of the filled region, row-major within the image.
    pub pixels: Vec<(usize, usize)>,
}

impl ContourStats {
    pub fn centroid(&self) -> Option<(f64, f64)> {
        (self.m00 > 0.0).then(|| (self.m10 / self.m00, self.m01 / self.m00))
    }
}

const DIRS: [(isize, isize); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

/// Outer contours of the 8-connected components of `mask`.
///
/// Components lying inside a hole of another component are not reported,
/// and each reported region includes its own holes.
pub fn external_contours(mask: &BinaryMask) -> Vec<ContourStats> {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut comps: Vec<(Vec<usize>, BBox)> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.bits()[start] || labels[start] != 0 {
            continue;
        }
        let id = comps.len() as u32 + 1;
        labels[start] = id;
        queue.push_back(start);
        let mut pix = Vec::new();
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(i) = queue.pop_front() {
            pix.push(i);
            let (x, y) = (i % w, i / w);
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
            for (dx, dy) in DIRS {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if mask.bits()[j] && labels[j] == 0 {
                    labels[j] = id;
                    queue.push_back(j);
                }
            }
        }
        comps.push((pix, BBox { x: x0, y: y0, w: x1 - x0 + 1, h: y1 - y0 + 1 }));
    }

    let mut order: Vec<usize> = (0..comps.len()).collect();
    order.sort_by_key(|&c| std::cmp::Reverse(comps[c].1.area()));
    let mut covered = vec![false; w * h];
    let mut out = Vec::new();
    for c in order {
        let (pix, bbox) = &comps[c];
        if covered[pix[0]] {
            continue;
        }
        let id = c as u32 + 1;
        let filled = filled_region(&labels, w, id, *bbox);
        let (mut m10, mut m01) = (0.0, 0.0);
        for &(x, y) in &filled {
            covered[y * w + x] = true;
            m10 += x as f64;
            m01 += y as f64;
        }
        let area = filled.len() as f64;
        let first = pix.iter().copied().min().expect("component is non-empty");
        let perimeter = trace_perimeter(&labels, w, h, id, first);
        out.push(ContourStats {
            area,
            perimeter,
            bbox: *bbox,
            m00: area,
            m10,
            m01,
            circularity: 4.0 * std::f64::consts::PI * area / (perimeter * perimeter + 1e-6),
            pixels: filled,
        });
    }
    out
}

/// Component pixels plus every bbox pixel not 4-reachable from outside the bbox.
fn filled_region(labels: &[u32], w: usize, id: u32, b: BBox) -> Vec<(usize, usize)> {
    // Work in the bbox padded by one pixel so the flood can go around the shape.
    let (pw, ph) = (b.w + 2, b.h + 2);
    let is_obstacle = |px: usize, py: usize| {
        px >= 1 && py >= 1 && px <= b.w && py <= b.h && labels[(b.y + py - 1) * w + b.x + px - 1] == id
    };
    let mut outside = vec![false; pw * ph];
    let mut queue = VecDeque::new();
    outside[0] = true;
    queue.push_back((0usize, 0usize));
    while let Some((x, y)) = queue.pop_front() {
        for (dx, dy) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            if nx < 0 || ny < 0 || nx >= pw as isize || ny >= ph as isize {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if !outside[ny * pw + nx] && !is_obstacle(nx, ny) {
                outside[ny * pw + nx] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    let mut filled = Vec::new();
    for py in 1..=b.h {
        for px in 1..=b.w {
            if !outside[py * pw + px] {
                filled.push((b.x + px - 1, b.y + py - 1));
            }
        }
    }
    filled
}

/// Moore-neighbour trace of the outer boundary, with unit axial and
/// sqrt(2) diagonal steps. `start` must be the component's first pixel in
/// raster order, so its west neighbour is background.
fn trace_perimeter(labels: &[u32], w: usize, h: usize, id: u32, start: usize) -> f64 {
    let inside = |x: isize, y: isize| {
        x >= 0 && y >= 0 && x < w as isize && y < h as isize && labels[y as usize * w + x as usize] == id
    };
    let (sx, sy) = ((start % w) as isize, (start / w) as isize);
    let next = |x: isize, y: isize, back: usize| -> Option<usize> {
        (1..=8).map(|i| (back + i) % 8).find(|&d| inside(x + DIRS[d].0, y + DIRS[d].1))
    };
    let Some(first) = next(sx, sy, 4) else {
        return 0.0;
    };
    let (mut x, mut y, mut d) = (sx, sy, first);
    let mut length = 0.0;
    let limit = 8 * w * h + 8;
    for _ in 0..limit {
        length += if d % 2 == 0 { 1.0 } else { std::f64::consts::SQRT_2 };
        x += DIRS[d].0;
        y += DIRS[d].1;
        let back = if d % 2 == 0 { (d + 6) % 8 } else { (d + 5) % 8 };
        d = next(x, y, back).expect("a traced pixel always has its predecessor as neighbour");
        if x == sx && y == sy && d == first {
            break;
        }
    }
    length
}
