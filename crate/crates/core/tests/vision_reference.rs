mod common;

use common::reference as r;
use cot_harness::vision::*;
use proptest::prelude::*;
use rand::Rng;

fn cfg() -> ProptestConfig {
    ProptestConfig { cases: 200, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn hsv_matches_reference(seed in any::<u64>()) {
        let mut g = common::rng(seed);
        let (w, h) = common::random_dims(&mut g, 1, 64);
        let c = if g.random_bool(0.5) { 3 } else { 4 };
        let f = common::random_frame(&mut g, w, h, c);
        let want = r::hsv(&f);
        let got = rgb_to_hsv(&f);
        prop_assert_eq!(got.pixels(), want.as_slice());
    }

    #[test]
    fn gray_matches_reference(seed in any::<u64>()) {
        let mut g = common::rng(seed);
        let (w, h) = common::random_dims(&mut g, 1, 64);
        let f = common::random_frame(&mut g, w, h, 3);
        prop_assert_eq!(rgb_to_gray(&f), r::gray(&f));
    }

    #[test]
    fn in_range_matches_reference(seed in any::<u64>(), lo in any::<[u8; 3]>(), span in any::<[u8; 3]>()) {
        let mut g = common::rng(seed);
        let (w, h) = common::random_dims(&mut g, 1, 64);
        let f = common::random_frame(&mut g, w, h, 3);
        let hi = [0, 1, 2].map(|i| lo[i].saturating_add(span[i]));
        let hsv = rgb_to_hsv(&f);
        prop_assert_eq!(threshold_in_range(&hsv, lo, hi), r::in_range(hsv.pixels(), w, h, lo, hi));
    }

    #[test]
    fn blur_matches_reference(seed in any::<u64>(), k in prop::sample::select(vec![1usize, 3, 5, 7, 9]), sigma in 0.3f64..4.0) {
        let mut g = common::rng(seed);
        let (w, h) = common::random_dims(&mut g, 1, 64);
        let img = common::random_gray(&mut g, w, h);
        let taps = gaussian_kernel_fixed(k, sigma).unwrap();
        prop_assert_eq!(gaussian_blur(&img, k, sigma).unwrap(), r::blur(&img, &taps));
    }

    #[test]
    fn morphology_matches_reference(seed in any::<u64>(), k in prop::sample::select(vec![1usize, 3, 5]), iters in 0usize..3) {
        let mut g = common::rng(seed);
        let (w, h) = common::random_dims(&mut g, 1, 64);
        let m = common::random_mask(&mut g, w, h);
        prop_assert_eq!(erode(&m, k, iters).unwrap(), r::erode(&m, k, iters));
        prop_assert_eq!(dilate(&m, k, iters).unwrap(), r::dilate(&m, k, iters));
        prop_assert_eq!(close(&m, k, iters).unwrap(), r::close(&m, k, iters));
    }

    #[test]
    fn resize_matches_reference(seed in any::<u64>()) {
        let mut g = common::rng(seed);
        let (w, h) = common::random_dims(&mut g, 1, 48);
        let (nw, nh) = common::random_dims(&mut g, 1, 48);
        if g.random_bool(0.5) {
            let img = common::random_gray(&mut g, w, h);
            let want = r::resize_area(img.data(), w, h, 1, nw, nh);
            let got = resize_area(&img, nw, nh).unwrap();
            prop_assert_eq!(got.data(), want.as_slice());
        } else {
            let f = common::random_frame(&mut g, w, h, 3);
            let want = r::resize_area(f.data(), w, h, 3, nw, nh);
            let got = resize_area_frame(&f, nw, nh).unwrap();
            prop_assert_eq!(got.data(), want.as_slice());
        }
    }

    #[test]
    fn clahe_matches_reference(seed in any::<u64>(), clip in prop::sample::select(vec![0.0, 1.0, 2.0, 4.0, 40.0])) {
        let mut g = common::rng(seed);
        let (tx, ty) = (g.random_range(1..=8usize), g.random_range(1..=8usize));
        let w = g.random_range(tx.max(1)..=64);
        let h = g.random_range(ty.max(1)..=64);
        let img = common::random_gray(&mut g, w, h);
        prop_assert_eq!(clahe(&img, clip, (tx, ty)).unwrap(), r::clahe(&img, clip, tx, ty));
    }

    #[test]
    fn sobel_and_canny_match_reference(seed in any::<u64>(), low in 0.0f64..300.0, extra in 0.0f64..400.0) {
        let mut g = common::rng(seed);
        let (w, h) = common::random_dims(&mut g, 1, 64);
        let img = common::random_gray(&mut g, w, h);
        let s = sobel(&img);
        let (gx, gy) = r::sobel(&img);
        prop_assert_eq!(&s.dx, &gx);
        prop_assert_eq!(&s.dy, &gy);
        prop_assert_eq!(canny(&img, low, low + extra).unwrap(), r::canny(&img, low, low + extra));
    }

    #[test]
    fn contours_match_reference(seed in any::<u64>()) {
        let mut g = common::rng(seed);
        let (w, h) = common::random_dims(&mut g, 1, 64);
        let m = common::random_mask(&mut g, w, h);
        let mut got: Vec<r::RefContour> = external_contours(&m)
            .into_iter()
            .map(|c| r::RefContour {
                area: c.area,
                bbox: (c.bbox.x, c.bbox.y, c.bbox.w, c.bbox.h),
                m10: c.m10,
                m01: c.m01,
                perimeter: c.perimeter,
            })
            .collect();
        let mut want = r::contours(&m);
        let key = |c: &r::RefContour| (c.bbox.1, c.bbox.0, c.bbox.2, c.bbox.3, c.area as u64);
        got.sort_by_key(key);
        want.sort_by_key(key);
        prop_assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(&want) {
            prop_assert_eq!((a.area, a.bbox, a.m10, a.m01), (b.area, b.bbox, b.m10, b.m01));
            prop_assert!((a.perimeter - b.perimeter).abs() < 1e-9, "{} vs {}", a.perimeter, b.perimeter);
        }
    }

    #[test]
    fn ring_strength_matches_reference(seed in any::<u64>(), cx in -5.0f64..70.0, cy in -5.0f64..70.0, rad in 0.0f64..40.0, t in 0.5f64..5.0) {
        let mut g = common::rng(seed);
        let (w, h) = common::random_dims(&mut g, 1, 64);
        let m = common::random_mask(&mut g, w, h);
        let a = ring_edge_strength(&m, cx, cy, rad, t);
        let b = r::ring_strength(&m, cx, cy, rad, t);
        prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn kernel_taps_follow_the_gaussian() {
    for k in [1usize, 3, 5, 7, 9, 11] {
        for sigma in [0.5, 1.0, 1.5, 3.0] {
            let taps = gaussian_kernel_fixed(k, sigma).unwrap();
            assert_eq!(taps.iter().sum::<u32>(), 256);
            let c = (k / 2) as f64;
            let raw: Vec<f64> = (0..k).map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
            let total: f64 = raw.iter().sum();
            // Off-center taps are rounded; the center absorbs the residue.
            for (i, (t, v)) in taps.iter().zip(&raw).enumerate() {
                let exact = 256.0 * v / total;
                let tol = if i == k / 2 { 0.5 * k as f64 } else { 0.5 };
                assert!((f64::from(*t) - exact).abs() <= tol, "k={k} sigma={sigma} {taps:?}");
            }
        }
    }
}

#[test]
fn rectangle_perimeter_is_its_boundary_walk() {
    for (w, h) in [(1, 5), (5, 1), (2, 2), (7, 3), (10, 10)] {
        let m = BinaryMask::from_fn(w + 4, h + 4, |x, y| (2..2 + w).contains(&x) && (2..2 + h).contains(&y));
        let c = &external_contours(&m)[0];
        let expect = if w == 1 && h == 1 { 0.0 } else { 2.0 * ((w - 1) + (h - 1)) as f64 };
        assert_eq!(c.perimeter, expect, "{w}x{h}");
    }
}
