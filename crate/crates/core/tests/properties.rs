use std::collections::HashSet;

use proptest::prelude::*;

use ckm_sr::baselines::{cubic_resample, nn_upsample};
use ckm_sr::data::{
    generate_synthetic, split, DatasetManifest, Disjointness, ManifestEntry, Split, SyntheticSceneSpec,
};
use ckm_sr::metrics::{mse_pixel, psnr, rmse_physical, ssim};
use ckm_sr::nn::{pixel_shuffle, pixel_unshuffle, Tensor};
use ckm_sr::sampling::{downsample, downsample_values, selection_mask};
use ckm_sr::{decode_image, encode_grid, standard_codecs, CkmGrid, PixelImage, SamplingSpec};

fn codec_index() -> impl Strategy<Value = usize> {
    0..3usize
}

/// `(k, low-res width, low-res height, row phase, col phase)`
fn sampling_case() -> impl Strategy<Value = (usize, usize, usize, usize, usize)> {
    (1..=8usize, 1..=10usize, 1..=10usize).prop_flat_map(|(k, lw, lh)| (Just(k), Just(lw), Just(lh), 0..k, 0..k))
}

fn image(w: usize, h: usize) -> impl Strategy<Value = PixelImage> {
    proptest::collection::vec(any::<u8>(), w * h).prop_map(move |p| PixelImage::new(w, h, p).unwrap())
}

proptest! {
    #[test]
    fn codec_round_trip_within_bound(ci in codec_index(), t in 0.0..=1.0f64) {
        let codec = &standard_codecs()[ci];
        let v = codec.v_min + t * codec.span();
        let back = codec.decode_pixel(codec.encode_value(v));
        prop_assert!((back - v).abs() <= codec.quantization_bound() * (1.0 + 1e-12));
    }

    #[test]
    fn codec_encoding_is_monotone(ci in codec_index(), a in -400.0..300.0f64, b in -400.0..300.0f64) {
        let codec = &standard_codecs()[ci];
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(codec.encode_value(lo) <= codec.encode_value(hi));
    }

    #[test]
    fn grid_round_trips_through_pixels(ci in codec_index(), px in proptest::collection::vec(any::<u8>(), 12)) {
        let codec = &standard_codecs()[ci];
        let img = PixelImage::new(4, 3, px).unwrap();
        prop_assert_eq!(encode_grid(&decode_image(&img, codec), codec).unwrap(), img);
    }

    #[test]
    fn downsample_is_mask_then_compact((k, lw, lh, r, c) in sampling_case()) {
        let (w, h) = (lw * k, lh * k);
        let values: Vec<u32> = (0..(w * h) as u32).collect();
        let spec = SamplingSpec::with_phase(k, r, c).unwrap();
        let mask = selection_mask(w, h, &spec).unwrap();
        let compact: Vec<u32> = values.iter().zip(&mask).filter(|(_, &m)| m).map(|(&v, _)| v).collect();
        prop_assert_eq!(downsample_values(&values, w, h, &spec).unwrap(), compact);
        // Fraction law: exactly one cell per k x k block.
        prop_assert_eq!(mask.iter().filter(|&&m| m).count() * k * k, w * h);
    }

    #[test]
    fn nearest_then_downsample_is_identity((k, lw, lh, r, c) in sampling_case(), seed in any::<u64>()) {
        let codec = standard_codecs()[0].clone();
        let values = (0..lw * lh).map(|i| -147.0 + ((seed.wrapping_add(i as u64 * 7919)) % 1000) as f64 / 10.0).collect();
        let grid = CkmGrid::from_values(lw, lh, codec, values).unwrap();
        let up = nn_upsample(&grid, k).unwrap();
        prop_assert_eq!(downsample(&up, &SamplingSpec::with_phase(k, r, c).unwrap()).unwrap(), grid);
    }

    #[test]
    fn bicubic_commutes_with_affine_maps(
        values in proptest::collection::vec(-50.0..50.0f64, 12),
        k in 1..=4usize,
        scale in -3.0..3.0f64,
        shift in -100.0..100.0f64,
    ) {
        let base = cubic_resample(&values, 4, 3, k, -0.5);
        let mapped: Vec<f64> = values.iter().map(|v| scale * v + shift).collect();
        let out = cubic_resample(&mapped, 4, 3, k, -0.5);
        for (a, b) in out.iter().zip(&base) {
            prop_assert!((a - (scale * b + shift)).abs() < 1e-9);
        }
    }

    #[test]
    fn bicubic_reproduces_constants(v in -200.0..200.0f64, k in 1..=8usize) {
        let out = cubic_resample(&[v; 20], 5, 4, k, -0.5);
        prop_assert!(out.iter().all(|&x| (x - v).abs() < 1e-12));
    }

    #[test]
    fn metrics_are_symmetric(a in image(12, 12), b in image(12, 12)) {
        prop_assert_eq!(mse_pixel(&a, &b).unwrap(), mse_pixel(&b, &a).unwrap());
        prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        let (s1, s2) = (ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        prop_assert!((s1 - s2).abs() < 1e-12);
        prop_assert!(s1 <= 1.0 + 1e-12);
        let codec = &standard_codecs()[1];
        let (ga, gb) = (decode_image(&a, codec), decode_image(&b, codec));
        let (r1, r2) = (rmse_physical(&ga, &gb, false).unwrap(), rmse_physical(&gb, &ga, false).unwrap());
        prop_assert!((r1 - r2).abs() < 1e-12);
    }

    #[test]
    fn pixel_shuffle_permutes_values(c in 1..=3usize, r in 1..=3usize, h in 1..=4usize, w in 1..=4usize) {
        let n = c * r * r * h * w;
        let x = Tensor::from_vec([1, c * r * r, h, w], (0..n).map(|i| i as f64).collect()).unwrap();
        let y = pixel_shuffle(&x, r).unwrap();
        prop_assert_eq!(y.shape(), [1, c, h * r, w * r]);
        let mut seen: Vec<f64> = y.data().to_vec();
        seen.sort_by(f64::total_cmp);
        prop_assert_eq!(&seen, x.data());
        let back = pixel_unshuffle(&y, r).unwrap();
        prop_assert_eq!(back.data(), x.data());
    }

    #[test]
    fn transmitter_split_is_disjoint(
        scenes in 1..6usize,
        per_scene in 1..6usize,
        seed in any::<u64>(),
        frac in 0.0..1.0f64,
    ) {
        let entries: Vec<ManifestEntry> = (0..scenes)
            .flat_map(|s| (0..per_scene).map(move |t| ManifestEntry {
                path: format!("/d/{s}_{t}.png").into(),
                split: None,
                scene: s.to_string(),
                // Transmitter ids repeat across scenes to exercise grouping.
                transmitter: format!("site{}", t % 3),
            }))
            .collect();
        let total = entries.len();
        let m = DatasetManifest { name: "p".into(), codec: "radiomapseer_pathloss".into(), width: 4, height: 4, entries };
        let test = ((total as f64 * frac * 0.5) as usize).max(1);
        if let Ok(s) = split(&m, 0, test, Disjointness::ByTransmitter, seed) {
            prop_assert_eq!(s.count(Split::Test), test);
        }
        let train = total / 4;
        if let Ok(s) = split(&m, train, test, Disjointness::ByTransmitter, seed) {
            let ids = |t| s.entries_in(t).map(|e| e.transmitter.clone()).collect::<HashSet<_>>();
            prop_assert!(ids(Split::Train).is_disjoint(&ids(Split::Test)));
            prop_assert_eq!(s.count(Split::Train), train);
            prop_assert_eq!(s, split(&m, train, test, Disjointness::ByTransmitter, seed).unwrap());
        }
    }

    #[test]
    fn synthetic_path_loss_falls_along_free_rays(
        tr in 0..24usize,
        tc in 0..24usize,
        dir in 0..8usize,
        exponent in 1.0..5.0f64,
    ) {
        let mut spec = SyntheticSceneSpec::new(24, 24, (tr, tc)).unwrap();
        spec.exponent = exponent;
        let map = generate_synthetic(&spec).unwrap();
        let (dr, dc) = [(0i64, 1i64), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)][dir];
        let mut prev = f64::INFINITY;
        let (mut r, mut c) = (tr as i64, tc as i64);
        while (0..24).contains(&r) && (0..24).contains(&c) {
            let v = map.pathloss.get(r as usize, c as usize);
            prop_assert!(v <= prev);
            prev = v;
            r += dr;
            c += dc;
        }
    }

    #[test]
    fn synthetic_maps_round_trip_through_codecs(seed in any::<u64>(), tr in 0..20usize, tc in 0..20usize) {
        let mut spec = SyntheticSceneSpec::new(20, 20, (tr, tc)).unwrap();
        spec.random_buildings = 4;
        spec.seed = seed;
        let map = generate_synthetic(&spec).unwrap();
        for grid in [&map.pathloss, &map.aoa] {
            let codec = grid.codec();
            let back = decode_image(&encode_grid(grid, codec).unwrap(), codec);
            for (a, b) in back.values().iter().zip(grid.values()) {
                prop_assert!((a - b).abs() <= codec.quantization_bound() + 1e-9);
            }
        }
        prop_assert_eq!(map.pathloss.get(tr, tc), -50.0);
    }
}
