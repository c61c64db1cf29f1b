//! Property tests over randomly drawn phantom annotations, predictions and
//! pairings.

use proptest::prelude::*;
use valvetime::eval::{cardiac_intervals, error_histogram, fd_stats, match_events, StdKind};
use valvetime::events::{
    frames_to_ms, ms_to_frames, phase_at, validate_annotation, EventAnnotation, EventSet, EventType, Phase, View,
};
use valvetime::infer::{decode, find_peaks, gaussian_smooth, FramePredictions, PostprocessConfig, PredictionKind};
use valvetime::labels::{make_phase_labels, make_phase_labels_for, make_soft_labels, MASK};
use valvetime::models::ClassificationNetConfig;
use valvetime::nn::{Network, Tensor};
use valvetime::synth::{plan_dataset, render_recording, sample_motion_program, DatasetSpec, PhantomConfig};
use valvetime::train::{make_cv_splits, masked_categorical_crossentropy, masked_mse};

fn phantom(p_missing: f64) -> PhantomConfig {
    PhantomConfig {
        p_missing_atrial_systole: p_missing,
        ..PhantomConfig::default()
    }
}

fn annotation(seed: u64) -> (EventAnnotation, usize, f64) {
    let p = sample_motion_program(seed, &phantom(0.3)).unwrap();
    (p.annotation(), p.n_frames(), p.fps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phase_at_follows_latest_event(seed in 0u64..100_000) {
        let (ann, n, _) = annotation(seed);
        prop_assert!(validate_annotation(&ann, n).is_empty());
        let events = ann.events_by_frame();
        let frames: Vec<usize> = events.iter().map(|&(_, _, f)| f).collect();
        prop_assert!(frames.windows(2).all(|w| w[0] < w[1]));
        for f in frames[0]..n {
            let (_, latest, _) = events.iter().rev().find(|&&(_, _, g)| g <= f).unwrap();
            let expected = latest.opens();
            let got = phase_at(&ann, f, n).unwrap();
            // Without atrial systole, diastasis is open-ended until the next MVC.
            prop_assert!(got == Some(expected) || (got.is_none() && expected == Phase::Diastasis));
        }
        for &(_, e, f) in &events {
            prop_assert_eq!(phase_at(&ann, f, n).unwrap(), Some(e.opens()));
        }
    }

    #[test]
    fn ms_and_frames_are_inverse(frames in -500.0f64..500.0, fps in 1.0f64..500.0) {
        let back = ms_to_frames(frames_to_ms(frames, fps).unwrap(), fps).unwrap();
        prop_assert!((back - frames).abs() <= 1e-9 * frames.abs().max(1.0));
    }

    #[test]
    fn label_values_stay_in_domain(seed in 0u64..100_000, width in 1usize..8) {
        let (ann, n, _) = annotation(seed);
        let phases = make_phase_labels(&ann, n).unwrap();
        prop_assert!(phases.classes.iter().all(|&c| c == -1 || (0..6).contains(&c)));
        let soft = make_soft_labels(&ann, n, width).unwrap();
        for (e, row) in EventType::ALL.iter().zip(&soft.rows) {
            prop_assert!(row.iter().all(|&v| v == MASK || (0.0..=1.0).contains(&v)));
            for f in ann.frames_of(*e) {
                prop_assert_eq!(row[f], 1.0);
            }
        }
    }

    #[test]
    fn two_event_labels_collapse_six(seed in 0u64..100_000) {
        let (ann, n, _) = annotation(seed);
        let six = make_phase_labels(&ann, n).unwrap().classes;
        let two = make_phase_labels_for(&EventSet::Two.project(&ann), n, EventSet::Two).unwrap().classes;
        for (s, t) in six.iter().zip(&two) {
            if *s >= 0 && *t >= 0 {
                let systole = *s == Phase::Ivc.index() as i32 || *s == Phase::Ejection.index() as i32;
                prop_assert_eq!(*t, if systole { 0 } else { 1 });
            }
        }
    }

    #[test]
    fn decoded_annotations_are_valid(seed in 0u64..100_000, noise in 0.0f32..0.9) {
        let (ann, n, fps) = annotation(seed);
        let classes = make_phase_labels(&ann, n).unwrap().classes;
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 40) as f32 / (1u64 << 24) as f32
        };
        let mut values = Vec::with_capacity(n * 6);
        for &c in &classes {
            let mut row: Vec<f32> = (0..6).map(|_| noise * next() + 1e-3).collect();
            if c >= 0 {
                row[c as usize] += 1.0 - noise;
            }
            let s: f32 = row.iter().sum();
            values.extend(row.iter().map(|v| v / s));
        }
        let pred = FramePredictions::new("p", fps, PredictionKind::PhaseProbs, EventSet::Six, values).unwrap();
        let d = decode(&pred, &PostprocessConfig::default()).unwrap();
        prop_assert!(validate_annotation(&d.annotation, n).is_empty());

        let curves: Vec<f32> = (0..n * 6).map(|_| next()).collect();
        let pred = FramePredictions::new("c", fps, PredictionKind::EventCurves, EventSet::Six, curves).unwrap();
        let d = decode(&pred, &PostprocessConfig::default()).unwrap();
        let violations = validate_annotation(&d.annotation, n);
        prop_assert!(violations.is_empty(), "{:?}", violations);
    }

    #[test]
    fn zero_sigma_smoothing_is_identity(x in prop::collection::vec(0.0f32..1.0, 1..80), th in 0.0f32..1.0) {
        let s = gaussian_smooth(&x, 0.0);
        prop_assert_eq!(&s, &x);
        prop_assert_eq!(find_peaks(&s, th), find_peaks(&x, th));
    }

    #[test]
    fn afd_bounds_and_symmetry(diffs in prop::collection::vec(-12i64..12, 1..60), fps in 20.0f64..120.0) {
        let pairs: Vec<(i64, f64)> = diffs.iter().map(|&d| (d, fps)).collect();
        let s = fd_stats(&pairs, StdKind::Sample).unwrap().unwrap();
        prop_assert!(s.afd + 1e-12 >= s.fd_mean.abs());
        prop_assert_eq!(s.afd == 0.0, diffs.iter().all(|&d| d == 0));
        let flipped: Vec<(i64, f64)> = diffs.iter().map(|&d| (-d, fps)).collect();
        let f = fd_stats(&flipped, StdKind::Sample).unwrap().unwrap();
        prop_assert!((f.fd_mean + s.fd_mean).abs() < 1e-12);
        prop_assert!((f.afd - s.afd).abs() < 1e-12);
        let hist = error_histogram(&diffs);
        prop_assert!((hist.values().sum::<f64>() - 1.0).abs() < 1e-12);
        let counts: f64 = hist.values().map(|p| p * diffs.len() as f64).sum();
        prop_assert!((counts - diffs.len() as f64).abs() < 1e-9);
    }

    #[test]
    fn pairing_swap_flips_signs(a in 0u64..50_000, b in 0u64..50_000) {
        let (x, n, _) = annotation(a);
        let (y, m, _) = annotation(b);
        let w = n.min(m) / 4;
        let xy = match_events(&x, &y, w);
        let yx = match_events(&y, &x, w);
        let mut d1: Vec<(EventType, i64)> = xy.pairs.iter().map(|p| (p.event, p.diff())).collect();
        let mut d2: Vec<(EventType, i64)> = yx.pairs.iter().map(|p| (p.event, -p.diff())).collect();
        d1.sort();
        d2.sort();
        prop_assert_eq!(d1, d2);
    }

    #[test]
    fn interval_identity_over_full_cycles(seed in 0u64..100_000) {
        let p = sample_motion_program(seed, &phantom(0.0)).unwrap();
        let ann = p.annotation();
        let ivs = cardiac_intervals(&ann, p.fps).unwrap();
        let frame_ms = 1000.0 / p.fps;
        for w in ann.cycles.windows(2) {
            let (c, next) = (&w[0], &w[1]);
            let (Some(mvc), Some(mvo), Some(next_mvc)) = (c.get(EventType::Mvc), c.get(EventType::Mvo), next.get(EventType::Mvc)) else {
                continue;
            };
            let ci = ann.cycles.iter().position(|x| x == c).unwrap();
            let iv = &ivs[ci];
            let (Some(ivct), Some(et), Some(ivrt)) = (iv.ivct, iv.et, iv.ivrt) else { continue };
            let filling = (next_mvc - mvo) as f64 * frame_ms;
            let cycle = (next_mvc - mvc) as f64 * frame_ms;
            prop_assert!((ivct + et + ivrt + filling - cycle).abs() < 1e-9);
        }
    }

    #[test]
    fn fold_plans_are_deterministic_partitions(patients in 3usize..60, k in 3usize..8, seed in 0u64..1000) {
        prop_assume!(patients >= k);
        let (manifest, _) = plan_dataset(&DatasetSpec::triplane(patients, 1)).unwrap();
        let a = make_cv_splits(&manifest, k, seed).unwrap();
        prop_assert_eq!(&a, &make_cv_splits(&manifest, k, seed).unwrap());
        let mut tested: Vec<&String> = a.folds.iter().flat_map(|f| &f.test).collect();
        tested.sort();
        let n = tested.len();
        tested.dedup();
        prop_assert_eq!(n, patients);
        prop_assert_eq!(tested.len(), patients);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn batch_loss_is_count_weighted_mean(
        l1 in 1usize..7, l2 in 1usize..7, masked in prop::collection::vec(any::<bool>(), 14), seed in 0u64..1000,
    ) {
        let t = l1.max(l2);
        let c = 4;
        let mut state = seed + 1;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            0.05 + 0.9 * ((state >> 40) as f64 / (1u64 << 24) as f64)
        };
        let mut probs = vec![0.0f64; 2 * t * c];
        let mut cls = vec![MASK; 2 * t];
        let mut reg = vec![MASK; 2 * t * c];
        for (i, len) in [l1, l2].into_iter().enumerate() {
            for f in 0..t {
                let row: Vec<f64> = (0..c).map(|_| next()).collect();
                let s: f64 = row.iter().sum();
                for k in 0..c {
                    probs[(i * t + f) * c + k] = row[k] / s;
                }
                if f < len && !masked[i * 7 + f] {
                    cls[i * t + f] = (f % c) as f32;
                    for k in 0..c {
                        reg[(i * t + f) * c + k] = next() as f32;
                    }
                }
            }
        }
        let whole = Tensor::from_vec(&[2, t, c], probs.clone());
        for (kind, labels, per) in [("ce", &cls, 1), ("mse", &reg, c)] {
            let loss = |x: &Tensor<f64>, y: &[f32]| if kind == "ce" { masked_categorical_crossentropy(x, y) } else { masked_mse(x, y) };
            let all = loss(&whole, labels);
            let (mut num, mut den) = (0.0, 0usize);
            for i in 0..2 {
                let item = Tensor::from_vec(&[1, t, c], probs[i * t * c..(i + 1) * t * c].to_vec());
                let l = loss(&item, &labels[i * t * per..(i + 1) * t * per]);
                num += l.value * l.count as f64;
                den += l.count;
            }
            prop_assert_eq!(all.count, den);
            if den > 0 {
                prop_assert!((all.value - num / den as f64).abs() <= 1e-12 * all.value.abs().max(1.0));
            }
        }
    }

    #[test]
    fn network_output_keeps_frame_axis(t in 1usize..9, len in 1usize..9) {
        let len = len.min(t);
        let cfg = ClassificationNetConfig {
            input_size: 16,
            n_blocks: 2,
            base_filters: 2,
            first_spatial_kernel: 3,
            recurrent_units: 3,
            ..ClassificationNetConfig::toy()
        };
        let mut net: Network<f32> = Network::new(&cfg.arch().unwrap(), 1).unwrap();
        let x = Tensor::from_vec(&[2, 1, t, 16, 16], vec![0.5; 2 * t * 256]);
        let y = net.predict(x, &[t, len]).unwrap();
        prop_assert_eq!(&y.shape, &vec![2, t, 6]);
    }
}

#[test]
fn views_share_event_frames() {
    let cfg = PhantomConfig {
        size: 64,
        noise: 0.0,
        ..PhantomConfig::default()
    };
    for seed in 0..4 {
        let program = sample_motion_program(seed, &cfg).unwrap();
        let anns: Vec<_> = [View::A4ch, View::A2ch, View::Aplax]
            .into_iter()
            .map(|v| render_recording(&program, v, &cfg, "r").unwrap())
            .collect();
        assert!(anns.windows(2).all(|w| w[0].1 == w[1].1));
        // Noise-free rendering depends only on its inputs.
        let again = render_recording(&program, View::Aplax, &cfg, "r").unwrap();
        assert_eq!(again.0.frames.data, anns[2].0.frames.data);
    }
}
