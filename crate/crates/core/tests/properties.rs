//! Property-based invariants across the public API.

use proptest::prelude::*;

use guided_restore::evaluation::{psnr, ssim, ImageMetric, MetricReport};
use guided_restore::guidance::masks::{mask_dropout, SemanticMaskSet};
use guided_restore::image::{FeatureMap, ImageTensor};
use guided_restore::modulation::{degradation_prompt, mask_average_pool, qgm_forward, Mlp, PromptBank, PromptParams, QgmParams};
use guided_restore::tensor::Tensor;
use guided_restore::training::{checkpoint_bytes, checkpoint_from_bytes, derive_seed, sample_batch, PairSet, TrainState};
use guided_restore::config::desk_scale_preset;

fn feature(c: usize, h: usize, w: usize) -> impl Strategy<Value = FeatureMap> {
    prop::collection::vec(-3.0f64..3.0, c * h * w).prop_map(move |d| FeatureMap::from_vec(c, h, w, d).unwrap())
}

fn dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (1usize..=4, 1usize..=5, 1usize..=5)
}

fn labels(p: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..4, p)
}

fn image(c: usize, h: usize, w: usize) -> impl Strategy<Value = ImageTensor> {
    prop::collection::vec(0.0f64..=1.0, c * h * w).prop_map(move |d| ImageTensor::from_vec(c, h, w, d).unwrap())
}

fn tensor(shape: Vec<usize>) -> impl Strategy<Value = Tensor> {
    let n: usize = shape.iter().product();
    prop::collection::vec(-1.0f64..1.0, n).prop_map(move |d| Tensor::new(shape.clone(), d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pooling_is_idempotent_and_mean_preserving(
        (c, h, w, x, l) in dims().prop_flat_map(|(c, h, w)| (Just(c), Just(h), Just(w), feature(c, h, w), labels(h * w)))
    ) {
        let ms = SemanticMaskSet::from_labels(h, w, &l).unwrap();
        let once = mask_average_pool(&x, &ms).unwrap();
        let twice = mask_average_pool(&once, &ms).unwrap();
        prop_assert!(once.tensor().max_abs_diff(twice.tensor()) < 1e-12);
        for ch in 0..c {
            let a: f64 = x.data()[ch * h * w..(ch + 1) * h * w].iter().sum();
            let b: f64 = once.data()[ch * h * w..(ch + 1) * h * w].iter().sum();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn quality_modulation_is_affine_in_features(
        (c, h, w, x, y, sw, sb, tw, tb, fq) in (1usize..=4, 1usize..=4, 1usize..=4).prop_flat_map(|(c, h, w)| (
            Just(c), Just(h), Just(w), feature(c, h, w), feature(c, h, w),
            tensor(vec![c, 3]), tensor(vec![c]), tensor(vec![c, 3]), tensor(vec![c]),
            prop::collection::vec(-1.0f64..1.0, 3),
        ))
    ) {
        let p = QgmParams { scale_weight: sw, scale_bias: sb, shift_weight: tw, shift_bias: tb };
        let sum: Vec<f64> = x.data().iter().zip(y.data()).map(|(a, b)| a + b).collect();
        let zero = FeatureMap::from_vec(c, h, w, vec![0.0; c * h * w]).unwrap();
        let f = |m: &FeatureMap| qgm_forward(m, &fq, &p).unwrap().into_tensor().into_data();
        let (fs, fx, fy, f0) = (f(&FeatureMap::from_vec(c, h, w, sum).unwrap()), f(&x), f(&y), f(&zero));
        for i in 0..fs.len() {
            prop_assert!((fs[i] - fx[i] - fy[i] + f0[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn prompt_weights_form_a_distribution(
        (fd, bank, w1, b1, w2, b2, v1, c1, v2, c2) in (1usize..=5, 1usize..=4).prop_flat_map(|(n, d)| (
            prop::collection::vec(-2.0f64..2.0, 6), tensor(vec![n, d]),
            tensor(vec![n, 6]), tensor(vec![n]), tensor(vec![n, n]), tensor(vec![n]),
            tensor(vec![d, d]), tensor(vec![d]), tensor(vec![d, d]), tensor(vec![d]),
        ))
    ) {
        let p = PromptParams {
            mlp1: Mlp { w1, b1, w2, b2 },
            mlp2: Mlp { w1: v1, b1: c1, w2: v2, b2: c2 },
        };
        let out = degradation_prompt(&fd, &PromptBank::new(bank).unwrap(), &p).unwrap();
        prop_assert!(out.weights.iter().all(|&v| v > 0.0 && v <= 1.0));
        prop_assert!((out.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_is_bounded_symmetric_and_one_on_identity(
        (a, b) in (image(3, 12, 13), image(3, 12, 13))
    ) {
        let ab = ssim(&a, &b).unwrap();
        let ba = ssim(&b, &a).unwrap();
        prop_assert!((-1.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psnr_is_symmetric_and_infinite_on_identity((a, b) in (image(1, 6, 7), image(1, 6, 7))) {
        prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        prop_assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn report_ignores_row_order(
        rows in prop::collection::vec((0usize..3, 0.0f64..50.0, 0.0f64..1.0), 1..12),
        rot in 0usize..12,
    ) {
        let metrics = |rs: &[(usize, f64, f64)]| -> Vec<ImageMetric> {
            rs.iter().enumerate().map(|(i, &(t, p, s))| ImageMetric {
                id: format!("img{i:02}"), tag: ["haze", "noise", "rain"][t].into(), psnr: p, ssim: s,
            }).collect()
        };
        let tags = vec!["snow".to_string()];
        let mut images = metrics(&rows);
        let reference = MetricReport::from_images(images.clone(), &tags);
        let k = rot % images.len();
        images.rotate_left(k);
        images.reverse();
        let permuted = MetricReport::from_images(images, &tags);
        prop_assert_eq!(reference.to_ndjson(), permuted.to_ndjson());
        prop_assert_eq!(reference.footer.len(), 1);
    }

    #[test]
    fn dropout_always_yields_a_partition(
        (h, w, l) in (1usize..=6, 1usize..=6).prop_flat_map(|(h, w)| (Just(h), Just(w), labels(h * w))),
        rate in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let ms = SemanticMaskSet::from_labels(h, w, &l).unwrap();
        let out = mask_dropout(&ms, rate, seed).unwrap();
        prop_assert!(out.is_partition());
        prop_assert!(out.len() <= ms.len());
        prop_assert_eq!(mask_dropout(&ms, 0.0, seed).unwrap(), ms);
    }

    #[test]
    fn batches_have_crop_shape_and_aligned_pairs(seed in any::<u64>(), crop in 4usize..20) {
        let rows = (0..3u64).map(|i| {
            let c = ImageTensor::from_vec(3, 10, 12, (0..360).map(|k| ((k as u64 * 7 + i) % 13) as f64 / 13.0).collect()).unwrap();
            let d = ImageTensor::from_vec(3, 10, 12, c.data().iter().map(|v| 1.0 - v).collect()).unwrap();
            (format!("p{i}"), "t".to_string(), d, c)
        }).collect();
        let set = PairSet::from_pairs(rows).unwrap();
        let batch = sample_batch(&set, crop, 3, seed).unwrap();
        prop_assert_eq!(batch.len(), 3);
        for s in &batch {
            prop_assert_eq!(s.degraded.shape(), [3, crop, crop]);
            prop_assert_eq!(s.clean.shape(), [3, crop, crop]);
            for (d, c) in s.degraded.data().iter().zip(s.clean.data()) {
                prop_assert!((d + c - 1.0).abs() < 1e-12);
            }
        }
        let again = sample_batch(&set, crop, 3, seed).unwrap();
        prop_assert!(batch.iter().zip(&again).all(|(a, b)| a.degraded == b.degraded && a.row == b.row));
    }

    #[test]
    fn derived_seeds_separate_streams(base in any::<u64>(), a in 0u64..1000, b in 0u64..1000) {
        prop_assume!(a != b);
        prop_assert_ne!(derive_seed(base, a), derive_seed(base, b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn corrupted_checkpoints_are_rejected(pos in any::<prop::sample::Index>(), flip in 1u8..=255) {
        let mut cfg = desk_scale_preset();
        cfg.level_channels = vec![4, 4, 4, 4];
        cfg.level_heads = vec![1, 1, 1, 1];
        let state = TrainState::new(&cfg).unwrap();
        let mut bytes = checkpoint_bytes(&state);
        let i = pos.index(bytes.len());
        bytes[i] ^= flip;
        prop_assert!(checkpoint_from_bytes(&bytes).is_err());
        let cut = pos.index(bytes.len());
        prop_assert!(checkpoint_from_bytes(&checkpoint_bytes(&state)[..cut]).is_err());
    }
}
