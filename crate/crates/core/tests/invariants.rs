//! Property suites for the contracts every module promises.

use proptest::prelude::*;

use triscan_core::dataset::{
    generate_synthetic, smote, stratified_kfold, SynthConfig,
};
use triscan_core::features::{
    byte_histogram, encode_trace, extract_static, parse_pe_header, shannon_entropy,
    StaticFeatureVector, StaticLayout,
};
use triscan_core::features::pe::fixture::build_pe;
use triscan_core::features::trace::{TraceEvent, TraceSchema};
use triscan_core::metrics::{compute_metrics, confusion_bits};

fn trace_schema(names: &[&str], t_max: usize) -> TraceSchema {
    let vocab = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.to_string(), i as u32 + 1))
        .collect();
    TraceSchema::new(vocab, vec!["a".into(), "b".into()], t_max).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn histogram_of_nonempty_input_sums_to_one(bytes in prop::collection::vec(any::<u8>(), 1..2048)) {
        let h = byte_histogram(&bytes);
        let total: f64 = h.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(h.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn entropy_is_bounded_and_order_invariant(mut bytes in prop::collection::vec(any::<u8>(), 0..1024)) {
        let h = shannon_entropy(&bytes);
        prop_assert!((0.0..=8.0 + 1e-12).contains(&h));
        bytes.reverse();
        prop_assert_eq!(shannon_entropy(&bytes), h);
        bytes.sort_unstable();
        prop_assert_eq!(shannon_entropy(&bytes), h);
    }

    #[test]
    fn static_vector_length_is_layout_constant(bytes in prop::collection::vec(any::<u8>(), 0..4096)) {
        let layout = StaticLayout::default();
        let v = extract_static(&bytes, &layout);
        prop_assert_eq!(v.dim(), layout.dim());
        prop_assert!(v.values.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn pe_parser_survives_arbitrary_bytes(bytes in prop::collection::vec(any::<u8>(), 0..2048)) {
        // Success or structured error; never a panic or wild read.
        let _ = parse_pe_header(&bytes);
    }

    #[test]
    fn pe_parser_survives_mutated_fixture(
        cut in 0usize..400,
        at in 0usize..400,
        value in any::<u8>(),
    ) {
        let data = [0xABu8; 64];
        let mut bytes = build_pe(0x14c, 99, &[(".text", &data, true), (".d", &[1u8, 2], false)]);
        if at < bytes.len() {
            bytes[at] = value;
        }
        bytes.truncate(cut.min(bytes.len()));
        let _ = parse_pe_header(&bytes);
    }

    #[test]
    fn encoded_rows_are_one_hot_and_window_capped(
        names in prop::collection::vec("[a-f]{1,4}", 1..40),
        t_max in 1usize..12,
    ) {
        let schema = trace_schema(&["alpha", "beta", "gamma"], t_max);
        let events: Vec<TraceEvent> = names
            .iter()
            .enumerate()
            .map(|(i, n)| TraceEvent {
                t: i as i64,
                kind: triscan_core::features::EventKind::ApiCall,
                name: n.clone(),
                attrs: Default::default(),
            })
            .collect();
        let trace = encode_trace(&events, &schema);
        prop_assert!(trace.len() <= t_max);
        prop_assert_eq!(trace.len(), events.len().min(t_max));
        let width = schema.vocab_width();
        for row in &trace.encoded {
            let ones = row[..width].iter().filter(|&&v| v == 1.0).count();
            let zeros = row[..width].iter().filter(|&&v| v == 0.0).count();
            prop_assert_eq!(ones, 1);
            prop_assert_eq!(ones + zeros, width);
        }
    }

    #[test]
    fn metrics_match_a_naive_recount(
        pairs in prop::collection::vec((0u8..2, 0u8..2), 1..200),
    ) {
        let y_true: Vec<u8> = pairs.iter().map(|p| p.0).collect();
        let y_pred: Vec<u8> = pairs.iter().map(|p| p.1).collect();

        // Independent naive recount.
        let mut tp = 0u64;
        let mut tn = 0u64;
        let mut fp = 0u64;
        let mut fnn = 0u64;
        for (&t, &p) in y_true.iter().zip(&y_pred) {
            match (t, p) {
                (1, 1) => tp += 1,
                (0, 0) => tn += 1,
                (0, 1) => fp += 1,
                _ => fnn += 1,
            }
        }
        let div = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let naive_acc = (tp + tn) as f64 / pairs.len() as f64;
        let naive_prec = div(tp, tp + fp);
        let naive_rec = div(tp, tp + fnn);
        let naive_f1 = if naive_prec + naive_rec == 0.0 {
            0.0
        } else {
            2.0 * naive_prec * naive_rec / (naive_prec + naive_rec)
        };
        let naive_fpr = div(fp, fp + tn);

        let r = compute_metrics(&confusion_bits(&y_true, &y_pred).unwrap()).unwrap();
        prop_assert!((r.accuracy - naive_acc).abs() < 1e-12);
        prop_assert!((r.precision - naive_prec).abs() < 1e-12);
        prop_assert!((r.recall - naive_rec).abs() < 1e-12);
        prop_assert!((r.f1 - naive_f1).abs() < 1e-12);
        prop_assert!((r.fpr - naive_fpr).abs() < 1e-12);
        prop_assert_eq!((r.counts.true_pos, r.counts.true_neg), (tp, tn));
        prop_assert_eq!((r.counts.false_pos, r.counts.false_neg), (fp, fnn));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn folds_partition_and_preserve_the_class_ratio(
        n in 20usize..200,
        ratio in 0.05f64..0.50,
        k in prop::sample::select(vec![2usize, 5, 10]),
        seed in any::<u64>(),
    ) {
        let malicious = ((n as f64 * ratio) as usize).max(k);
        let benign = (n - malicious).max(k);
        let ds = generate_synthetic(
            &SynthConfig {
                benign,
                malicious,
                trace_len: (2, 4),
                ..SynthConfig::default()
            },
            seed,
        )
        .unwrap();
        let plan = stratified_kfold(&ds, k, seed).unwrap();
        let folds = plan.fold_indices(&ds);

        let total: usize = folds.iter().map(Vec::len).sum();
        prop_assert_eq!(total, ds.len());
        let mut seen = std::collections::BTreeSet::new();
        for f in &folds {
            for &i in f {
                prop_assert!(seen.insert(i));
            }
        }

        let global_ratio = malicious as f64 / ds.len() as f64;
        for f in &folds {
            let pos = f.iter().filter(|&&i| ds.samples[i].label.is_malicious()).count();
            let ideal = f.len() as f64 * global_ratio;
            prop_assert!((pos as f64 - ideal).abs() <= 1.0 + 1e-9,
                "fold positives {} vs ideal {}", pos, ideal);
        }
    }

    #[test]
    fn smote_points_sit_on_neighbor_segments_inside_the_bbox(
        cloud in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 6..24),
        seed in any::<u64>(),
    ) {
        let minority: Vec<StaticFeatureVector> = cloud
            .iter()
            .map(|&(a, b)| StaticFeatureVector::new(vec![a, b]))
            .collect();
        let k = 3;
        let target = minority.len() + 25;
        let synth = smote(&minority, k, target, seed).unwrap();
        prop_assert_eq!(synth.len(), 25);

        // Independent geometry oracle: k nearest neighbors by brute force,
        // then residual distance to every source→neighbor segment.
        let dist2 = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
        };
        let neighbors: Vec<Vec<usize>> = (0..minority.len())
            .map(|i| {
                let mut order: Vec<usize> = (0..minority.len()).filter(|&j| j != i).collect();
                order.sort_by(|&a, &b| {
                    dist2(&minority[i].values, &minority[a].values)
                        .partial_cmp(&dist2(&minority[i].values, &minority[b].values))
                        .unwrap()
                        .then(a.cmp(&b))
                });
                order.truncate(k);
                order
            })
            .collect();

        let lo: Vec<f64> = (0..2)
            .map(|d| cloud.iter().map(|p| if d == 0 { p.0 } else { p.1 }).fold(f64::INFINITY, f64::min))
            .collect();
        let hi: Vec<f64> = (0..2)
            .map(|d| cloud.iter().map(|p| if d == 0 { p.0 } else { p.1 }).fold(f64::NEG_INFINITY, f64::max))
            .collect();

        for s in &synth {
            for d in 0..2 {
                prop_assert!(s.values[d] >= lo[d] - 1e-9 && s.values[d] <= hi[d] + 1e-9);
            }
            let mut best = f64::INFINITY;
            for (i, nns) in neighbors.iter().enumerate() {
                for &j in nns {
                    let a = &minority[i].values;
                    let b = &minority[j].values;
                    let seg2 = dist2(a, b);
                    let t = if seg2 == 0.0 {
                        0.0
                    } else {
                        ((s.values[0] - a[0]) * (b[0] - a[0])
                            + (s.values[1] - a[1]) * (b[1] - a[1]))
                            / seg2
                    };
                    if !(-1e-12..=1.0 + 1e-12).contains(&t) {
                        continue;
                    }
                    let px = a[0] + t * (b[0] - a[0]);
                    let py = a[1] + t * (b[1] - a[1]);
                    let resid = ((s.values[0] - px).powi(2) + (s.values[1] - py).powi(2)).sqrt();
                    best = best.min(resid);
                }
            }
            prop_assert!(best < 1e-9, "min residual {}", best);
        }
    }
}
