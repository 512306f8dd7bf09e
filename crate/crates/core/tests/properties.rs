use nystrom_filter::{
    brute_force_filter, extract_range_list, fast_filter, fit, jacobi_eig, psnr, select_landmarks, ssim, FilterParams,
    Image, LandmarkStrategy, RangeKernel, SpatialKernel, SymMatrix,
};
use proptest::prelude::*;

fn image(max_w: usize, max_h: usize, channels: usize) -> impl Strategy<Value = Image> {
    // At least 3x3, so every pixel-count-bounded m0 below is admissible.
    (3..=max_w, 3..=max_h).prop_flat_map(move |(w, h)| {
        prop::collection::vec(0.0..255.0f64, w * h * channels)
            .prop_map(move |s| Image::new(w, h, channels, s, 255.0).unwrap())
    })
}

fn symmetric(max_n: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-10.0..10.0f64, n * n).prop_map(move |v| {
            SymMatrix::from_fn(n, |i, j| {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                v[a * n + b]
            })
        })
    })
}

fn max_abs_diff(a: &Image, b: &Image) -> f64 {
    a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn range_list_scatters_back_to_the_guide(img in image(9, 7, 3)) {
        let list = extract_range_list(&img);
        prop_assert_eq!(list.len(), img.pixel_count());
        prop_assert_eq!(list.scatter(img.width(), img.height(), img.range_max()).unwrap(), img);
    }

    #[test]
    fn brute_force_output_is_a_convex_combination(
        img in image(10, 10, 2),
        sigma in 0.5..3.0f64,
        theta in 5.0..200.0f64,
    ) {
        let params = FilterParams::new(
            SpatialKernel::gaussian_fir_3sigma(sigma).unwrap(),
            RangeKernel::gaussian(theta).unwrap(),
            1,
        );
        let g = brute_force_filter(&img, &img, &params).unwrap();
        for (c, (lo, hi)) in img.channel_bounds().into_iter().enumerate() {
            for &v in g.channel(c) {
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn full_rank_fast_filter_equals_oracle(img in image(6, 6, 3), theta in 20.0..80.0f64) {
        let params = FilterParams::new(
            SpatialKernel::gaussian_fir(1.5, 2).unwrap(),
            RangeKernel::gaussian(theta).unwrap(),
            img.pixel_count(),
        );
        let fast = fast_filter(&img, &img, &params).unwrap();
        let exact = brute_force_filter(&img, &img, &params).unwrap();
        prop_assert!(max_abs_diff(&fast.output, &exact) < 1e-6 * 255.0);
        prop_assert_eq!(fast.guarded_pixels, 0);
    }

    #[test]
    fn fast_filter_is_reproducible(img in image(12, 12, 3), seed in any::<u64>(), m0 in 1usize..6) {
        let params = FilterParams::bilateral(2.0, 40.0, m0).unwrap().with_seed(seed);
        let a = fast_filter(&img, &img, &params).unwrap();
        let b = fast_filter(&img, &img, &params).unwrap();
        prop_assert_eq!(a.output, b.output);
    }

    #[test]
    fn jacobi_invariants(a in symmetric(12)) {
        let eig = jacobi_eig(&a).unwrap();
        let n = a.order();
        let v = eig.vectors();
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = (0..n).map(|k| v.get(k, i) * v.get(k, j)).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - expected).abs() < 1e-10);
            }
        }
        let scale = a.as_matrix().max_abs().max(f64::MIN_POSITIVE);
        let r = eig.reconstruct();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((r.get(i, j) - a.get(i, j)).abs() < 1e-10 * scale);
            }
        }
        prop_assert!(eig.values().windows(2).all(|w| w[0] >= w[1]));
        let sum: f64 = eig.values().iter().sum();
        prop_assert!((sum - a.trace()).abs() <= 1e-10 * scale * n as f64);
    }

    #[test]
    fn lloyd_error_never_increases(img in image(12, 12, 3), m0 in 1usize..8, seed in any::<u64>()) {
        let list = extract_range_list(&img);
        let set = select_landmarks(list.vectors(), m0, LandmarkStrategy::KMeans, seed, 50).unwrap();
        prop_assert!(set.history().windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        prop_assert!(set.quant_error() >= 0.0);
    }

    #[test]
    fn low_rank_kernel_is_symmetric(img in image(5, 5, 2), m0 in 1usize..9, seed in any::<u64>()) {
        let list = extract_range_list(&img);
        let kernel = RangeKernel::gaussian(60.0).unwrap();
        let set = select_landmarks(list.vectors(), m0, LandmarkStrategy::Uniform, seed, 50).unwrap();
        let model = fit(&list, set, &kernel, 1e-8).unwrap();
        for i in 0..list.len() {
            for j in 0..i {
                prop_assert_eq!(model.approx_entry(i, j), model.approx_entry(j, i));
            }
        }
    }

    #[test]
    fn quality_metrics_are_symmetric_and_bounded(a in image(16, 16, 1), shift in -20.0..20.0f64) {
        let s: Vec<f64> = a.samples().iter().map(|v| v + shift).collect();
        let b = Image::new(a.width(), a.height(), 1, s, 255.0).unwrap();
        prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        let (ab, ba) = (ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ab <= 1.0 + 1e-12);
        prop_assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn spatial_kernels_are_linear(
        u in prop::collection::vec(-5.0..5.0f64, 15 * 11),
        v in prop::collection::vec(-5.0..5.0f64, 15 * 11),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
    ) {
        let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        for k in [
            SpatialKernel::box_kernel(2),
            SpatialKernel::gaussian_fir(1.2, 3).unwrap(),
            SpatialKernel::gaussian_recursive(2.5).unwrap(),
        ] {
            let (fu, fv, fm) = (k.apply(&u, 15, 11), k.apply(&v, 15, 11), k.apply(&mix, 15, 11));
            let scale = fm.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            for i in 0..fm.len() {
                prop_assert!((fm[i] - (a * fu[i] + b * fv[i])).abs() <= 1e-10 * scale);
            }
        }
    }
}
