use proptest::prelude::*;

use puffin_core::complexity::{preset, system_flops, ArchSpec, LayerKind, LayerRecord, Rate};
use puffin_core::dsp::StftConfig;
use puffin_core::generator::{synthesize, StreamingSynth};
use puffin_core::linalg::Matrix;
use puffin_core::metrics::{l1_spectral_loss, lsgan_losses};
use puffin_core::pulse::pulses_from_f0;
use puffin_core::transport::{OlaOp, ResampleOp};
use puffin_core::types::{FeatureTrack, PulseTrack, SAMPLE_RATE};
use puffin_testkit::{dot, max_abs_diff, random_features, random_model, rng};

fn positions_strategy() -> impl Strategy<Value = (Vec<usize>, usize)> {
    (prop::collection::vec(120usize..=960, 1..30), 0usize..960, 1usize..960).prop_map(|(gaps, start, tail)| {
        let mut c = start;
        let mut out = vec![c];
        for g in &gaps[1..] {
            c += g;
            out.push(c);
        }
        (out, c + tail)
    })
}

fn f0_strategy(n: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(50.0f32..=400.0, 1..n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feature_parsing_is_total(bytes in prop::collection::vec(any::<u8>(), 0..600)) {
        if let Ok(track) = FeatureTrack::from_le_bytes(&bytes) {
            let _ = track.validate();
        }
    }

    #[test]
    fn short_gaps_are_rejected(first in 0usize..1000, gap in 1usize..120) {
        let positions = vec![first, first + gap];
        prop_assert!(PulseTrack::new(positions, vec![true, true], first + gap + 10, SAMPLE_RATE).is_err());
    }

    #[test]
    fn pulses_from_f0_are_in_range(f0 in f0_strategy(80), voiced in any::<bool>()) {
        let track = FeatureTrack::from_f0(&f0, voiced);
        let pulses = pulses_from_f0(&track).unwrap();
        let p = pulses.positions();
        prop_assert!(p.iter().all(|&x| x < track.total_samples()));
        prop_assert!(p.windows(2).all(|w| (120..=960).contains(&(w[1] - w[0]))));
        prop_assert_eq!(pulses.voiced().len(), p.len());
    }

    #[test]
    fn doubling_f0_halves_gaps(f0 in 50.0f32..=200.0, n in 5usize..40) {
        let base = pulses_from_f0(&FeatureTrack::constant(n, f0, true)).unwrap();
        let fast = pulses_from_f0(&FeatureTrack::constant(n, 2.0 * f0, true)).unwrap();
        let period = 48_000.0 / f64::from(f0);
        for w in base.positions().windows(2) {
            prop_assert!(((w[1] - w[0]) as f64 - period).abs() <= 1.0);
        }
        for w in fast.positions().windows(2) {
            prop_assert!(((w[1] - w[0]) as f64 - period / 2.0).abs() <= 1.0);
        }
    }

    #[test]
    fn windows_partition_unity((centers, total) in positions_strategy()) {
        let ola = OlaOp::from_centers(&centers, total, 2048).unwrap();
        let out = ola.apply(&vec![1.0; centers.len() * 2048]).unwrap();
        for &v in &out[centers[0]..=*centers.last().unwrap()] {
            prop_assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ola_is_linear_and_adjoint((centers, total) in positions_strategy(), seed in any::<u64>(), a in -3.0f64..3.0) {
        use rand::Rng;
        let mut r = rng(seed);
        let ola = OlaOp::from_centers(&centers, total, 2048).unwrap();
        let n = centers.len() * 2048;
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..total).map(|_| r.random_range(-1.0..1.0)).collect();
        let combo: Vec<f64> = x.iter().zip(&z).map(|(p, q)| a * p + q).collect();
        let lhs = ola.apply(&combo).unwrap();
        let (ox, oz) = (ola.apply(&x).unwrap(), ola.apply(&z).unwrap());
        let rhs: Vec<f64> = ox.iter().zip(&oz).map(|(p, q)| a * p + q).collect();
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-9);
        let (u, v) = (dot(&ox, &y), dot(&x, &ola.apply_adjoint(&y).unwrap()));
        prop_assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0));
    }

    #[test]
    fn resampler_adjoint((centers, total) in positions_strategy(), seed in any::<u64>()) {
        use rand::Rng;
        let mut r = rng(seed);
        let frames = total.div_ceil(480);
        let op = ResampleOp::new(&centers, 480, frames).unwrap();
        let a = Matrix::from_vec(frames, 3, (0..frames * 3).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
        let b = Matrix::from_vec(centers.len(), 3, (0..centers.len() * 3).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
        let u = dot(op.apply(&a).unwrap().as_slice(), b.as_slice());
        let v = dot(a.as_slice(), op.apply_adjoint(&b).unwrap().as_slice());
        prop_assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0));
    }

    #[test]
    fn ola_survives_serialization((centers, total) in positions_strategy()) {
        let ola = OlaOp::from_centers(&centers, total, 2048).unwrap();
        prop_assert_eq!(OlaOp::from_bytes(&ola.to_bytes()).unwrap(), ola);
    }

    #[test]
    fn losses_are_non_negative(seed in any::<u64>(), scale in 0.0f64..4.0) {
        use rand::Rng;
        let mut r = rng(seed);
        let a: Vec<f64> = (0..512).map(|_| r.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| scale * v + r.random_range(-0.1..0.1)).collect();
        let cfgs = [StftConfig::square(128, 32).unwrap(), StftConfig::square(256, 64).unwrap()];
        prop_assert!(l1_spectral_loss(&a, &b, &cfgs).unwrap() >= 0.0);
        prop_assert_eq!(l1_spectral_loss(&a, &a, &cfgs).unwrap(), 0.0);
        let m = |v: &[f64]| Matrix::from_vec(4, 4, v[..16].to_vec()).unwrap();
        let (d, g) = lsgan_losses(&m(&a), &m(&b)).unwrap();
        prop_assert!(d >= 0.0 && g >= 0.0);
    }

    #[test]
    fn flops_grow_with_every_dimension(i in 1u64..600, o in 1u64..600, k in 1u64..12, rate in 1.0f64..30_000.0) {
        let base = LayerRecord::new(LayerKind::Conv, i, o, k, Rate::Hz(rate));
        let cost = |rec: LayerRecord| {
            system_flops(&ArchSpec { name: "x".into(), layers: vec![rec], footnote: None }, 131.0)
                .unwrap()
                .total_mflops
        };
        let c = cost(base);
        for bigger in [
            LayerRecord { i: i + 1, ..base },
            LayerRecord { o: o + 1, ..base },
            LayerRecord { k: k + 1, ..base },
            LayerRecord { rate: Rate::Hz(rate * 1.5), ..base },
        ] {
            prop_assert!(cost(bigger) > c);
        }
    }

    #[test]
    fn pulse_rate_cost_is_affine(rate in 0.0f64..400.0) {
        let spec = preset("p").unwrap();
        let at = |r: f64| system_flops(&spec, r).unwrap().total_mflops;
        let slope = (at(400.0) - at(0.0)) / 400.0;
        prop_assert!((at(rate) - (at(0.0) + slope * rate)).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn streaming_equals_batch(seed in any::<u64>(), frames in 1usize..25, sparse in any::<bool>()) {
        let model = random_model(seed, 6, sparse);
        let features = random_features(&mut rng(seed ^ 0x5eed), frames);
        let batch = synthesize(&model, &features).unwrap().samples;
        let mut session = StreamingSynth::new(&model).unwrap();
        let mut out = Vec::new();
        for frame in features.frames() {
            out.extend(session.push_frame(frame).unwrap());
        }
        out.extend(session.finish().unwrap());
        prop_assert_eq!(out.len(), batch.len());
        prop_assert!(max_abs_diff(&out, &batch) < 1e-6);
    }
}
