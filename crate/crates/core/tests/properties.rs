use std::f64::consts::PI;

use proptest::prelude::*;
use vidmem::content::{gsscd, vsscd};
use vidmem::content::{Metric, SimilarityResult};
use vidmem::dedup::{topk_neighbors, FeatureIndex};
use vidmem::detection::{
    aggregate, content_magnitude, motion_magnitude, step_magnitude_image, AggregationStrategy,
    MagnitudeSeries, StepMagnitude,
};
use vidmem::eval::{
    auc, best_f1, confusion_at, f1_at, summarize, AuditConfig, AuditRecord, MatchOutcome, ScoredSet,
};
use vidmem::io::{EmbeddingSequence, FlowField, FlowSequence, TensorF32};
use vidmem::motion::{direction_entropy, ofs_k, pixel_flow_cosine, NmfConfig};

fn rows(n: std::ops::RangeInclusive<usize>, d: usize) -> impl Strategy<Value = Vec<Vec<f32>>> {
    prop::collection::vec(prop::collection::vec(-1.0f32..1.0, d), n).prop_filter(
        "non-zero rows",
        |rs| {
            rs.iter()
                .all(|r| r.iter().map(|v| v * v).sum::<f32>() > 1e-3)
        },
    )
}

fn video_pair() -> impl Strategy<Value = (Vec<Vec<f32>>, Vec<Vec<f32>>)> {
    (1usize..12).prop_flat_map(|d| (rows(1..=6, d), rows(1..=6, d)))
}

fn seq(id: &str, r: &[Vec<f32>]) -> EmbeddingSequence {
    EmbeddingSequence::from_rows(id, r).unwrap()
}

proptest! {
    #[test]
    fn loaded_rows_are_unit((a, _) in video_pair()) {
        let s = seq("a", &a);
        for i in 0..s.frames() {
            let n = s.row(i).iter().map(|&v| f64::from(v).powi(2)).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() <= 1e-5);
        }
    }

    #[test]
    fn gsscd_symmetric((a, b) in video_pair()) {
        let (sa, sb) = (seq("a", &a), seq("b", &b));
        let ab = gsscd(&sa, &sb).unwrap();
        let ba = gsscd(&sb, &sa).unwrap();
        prop_assert_eq!(ab.score, ba.score);
    }

    #[test]
    fn gsscd_frame_permutation_invariant((a, b) in video_pair(), rot in 0usize..6) {
        let (sa, sb) = (seq("a", &a), seq("b", &b));
        let mut a2 = a.clone();
        let r = rot % a2.len();
        a2.rotate_left(r);
        let mut b2 = b.clone();
        b2.reverse();
        let base = gsscd(&sa, &sb).unwrap();
        let moved = gsscd(&seq("a", &a2), &seq("b", &b2)).unwrap();
        prop_assert_eq!(base.score, moved.score);
        let (i, j) = moved.argmax.unwrap();
        let mapped = ((i + r) % a.len(), b.len() - 1 - j);
        prop_assert_eq!(gsscd(&seq("x", &[a[mapped.0].clone()]), &seq("y", &[b[mapped.1].clone()])).unwrap().score, base.score);
    }

    #[test]
    fn gsscd_bounds((a, b) in video_pair()) {
        let (sa, sb) = (seq("a", &a), seq("b", &b));
        prop_assert!(gsscd(&sa, &sb).unwrap().score <= 1.0 + 1e-6);
        prop_assert!((gsscd(&sa, &sa).unwrap().score - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn gsscd_dominates_vsscd((a, b) in (1usize..12, 1usize..6).prop_flat_map(|(d, n)| (rows(n..=n, d), rows(n..=n, d)))) {
        let (sa, sb) = (seq("a", &a), seq("b", &b));
        prop_assert!(gsscd(&sa, &sb).unwrap().score >= vsscd(&sa, &sb).unwrap() - 1e-6);
    }
}

fn flow_seq(id: &str, h: usize, w: usize, flows: &[Vec<(f32, f32)>]) -> FlowSequence {
    let mut data = Vec::new();
    for f in flows {
        data.extend(f.iter().map(|p| p.0));
        data.extend(f.iter().map(|p| p.1));
    }
    FlowSequence::from_tensor(
        id,
        TensorF32::new(vec![flows.len(), 2, h, w], data).unwrap(),
    )
    .unwrap()
}

fn rotate(flows: &[Vec<(f32, f32)>], th: f64) -> Vec<Vec<(f32, f32)>> {
    let (c, s) = (th.cos(), th.sin());
    flows
        .iter()
        .map(|f| {
            f.iter()
                .map(|&(x, y)| {
                    let (x, y) = (f64::from(x), f64::from(y));
                    ((c * x - s * y) as f32, (s * x + c * y) as f32)
                })
                .collect()
        })
        .collect()
}

/// Pixels with length in [0.1, 3), away from the epsilon cut-off.
fn flows(m: usize, px: usize) -> impl Strategy<Value = Vec<Vec<(f32, f32)>>> {
    prop::collection::vec(
        prop::collection::vec((0.1f64..3.0, 0.0f64..2.0 * PI), px).prop_map(|v| {
            v.into_iter()
                .map(|(r, t)| ((r * t.cos()) as f32, (r * t.sin()) as f32))
                .collect()
        }),
        m,
    )
}

type FlowCase = (
    usize,
    usize,
    usize,
    Vec<Vec<(f32, f32)>>,
    Vec<Vec<(f32, f32)>>,
);

fn flow_case() -> impl Strategy<Value = FlowCase> {
    (1usize..5, 1usize..5, 1usize..6).prop_flat_map(|(h, w, m)| {
        (
            Just(h),
            Just(w),
            1..=m.min(4),
            flows(m, h * w),
            flows(m, h * w),
        )
    })
}

proptest! {
    #[test]
    fn ofs_in_range_and_self_is_one((h, w, k, g, t) in flow_case()) {
        let cfg = NmfConfig::default();
        let (gs, ts) = (flow_seq("g", h, w, &g), flow_seq("t", h, w, &t));
        for nmf in [false, true] {
            let s = ofs_k(&gs, &ts, k, &cfg, nmf).unwrap().score;
            prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&s));
        }
        prop_assert!((ofs_k(&gs, &gs, k, &cfg, false).unwrap().score - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn nmf_never_raises_a_scored_window((h, w, k, g, t) in flow_case()) {
        let cfg = NmfConfig::default();
        let (gs, ts) = (flow_seq("g", h, w, &g), flow_seq("t", h, w, &t));
        let on = ofs_k(&gs, &ts, k, &cfg, true).unwrap();
        let off = ofs_k(&gs, &ts, k, &cfg, false).unwrap();
        if on.argmax.is_some() {
            prop_assert!(on.score <= off.score + 1e-12);
        } else {
            prop_assert_eq!(on.score, 0.0);
        }
    }

    #[test]
    fn global_rotation_keeps_ofs_without_nmf((h, w, k, g, t) in flow_case(), th in 0.0f64..2.0 * PI) {
        let cfg = NmfConfig::default();
        let base = ofs_k(&flow_seq("g", h, w, &g), &flow_seq("t", h, w, &t), k, &cfg, false).unwrap();
        let rot = ofs_k(&flow_seq("g", h, w, &rotate(&g, th)), &flow_seq("t", h, w, &rotate(&t, th)), k, &cfg, false).unwrap();
        prop_assert!((base.score - rot.score).abs() <= 1e-6);
    }

    #[test]
    fn pixel_cosine_symmetric((h, w, _k, g, t) in flow_case()) {
        let (gs, ts) = (flow_seq("g", h, w, &g), flow_seq("t", h, w, &t));
        prop_assert_eq!(
            pixel_flow_cosine(gs.field(0), ts.field(0), 1e-8).unwrap(),
            pixel_flow_cosine(ts.field(0), gs.field(0), 1e-8).unwrap()
        );
    }

    #[test]
    fn entropy_bounds_and_bin_rotation(
        (h, w) in (1usize..8, 1usize..8),
        seed in prop::collection::vec((0usize..36, -0.4f64..0.4, 0.2f64..3.0), 64),
        shift in 0usize..36,
    ) {
        // Angles sit well inside their bins so a whole-bin rotation keeps them there.
        let px = h * w;
        let width = 2.0 * PI / 36.0;
        let field = |extra: usize| -> Vec<f32> {
            let pts: Vec<(f64, f64)> = seed[..px]
                .iter()
                .map(|&(b, off, r)| {
                    let th = -PI + ((b + extra) as f64 + 0.5 + off) * width;
                    (r * th.cos(), r * th.sin())
                })
                .collect();
            let mut d: Vec<f32> = pts.iter().map(|p| p.0 as f32).collect();
            d.extend(pts.iter().map(|p| p.1 as f32));
            d
        };
        let (a, b) = (field(0), field(shift));
        let ha = direction_entropy(FlowField::new(h, w, &a).unwrap(), 36, 1e-8);
        let hb = direction_entropy(FlowField::new(h, w, &b).unwrap(), 36, 1e-8);
        prop_assert!(ha >= 0.0 && ha <= 36f64.ln() + 1e-12);
        prop_assert!((ha - hb).abs() <= 1e-12);
    }
}

fn latent(dims: [usize; 4]) -> impl Strategy<Value = (Vec<f32>, Vec<f32>)> {
    let len: usize = dims.iter().product();
    (
        prop::collection::vec(-2.0f32..2.0, len),
        prop::collection::vec(-2.0f32..2.0, len),
    )
}

const DIMS: [usize; 4] = [2, 4, 2, 3];

fn t(data: Vec<f32>) -> TensorF32 {
    TensorF32::new(DIMS.to_vec(), data).unwrap()
}

proptest! {
    #[test]
    fn magnitudes_homogeneous((u, d) in latent(DIMS), alpha in 0.0f64..5.0) {
        let zero = t(vec![0.0; u.len()]);
        let unit = t(d.clone());
        let scaled = t(d.iter().map(|&x| (alpha * f64::from(x)) as f32).collect());
        for f in [content_magnitude, motion_magnitude] {
            let a = f(&unit, &zero).unwrap();
            let b = f(&scaled, &zero).unwrap();
            prop_assert!((b - alpha * a).abs() <= 1e-6 * a.max(1.0) * alpha.max(1.0));
        }
        let same = t(u);
        prop_assert_eq!(content_magnitude(&same, &same).unwrap(), 0.0);
        prop_assert_eq!(motion_magnitude(&same, &same).unwrap(), 0.0);
    }

    #[test]
    fn content_is_the_largest_frame_slice((c, u) in latent(DIMS)) {
        let (cond, uncond) = (t(c.clone()), t(u.clone()));
        let got = content_magnitude(&cond, &uncond).unwrap();
        let [ch, f, h, w] = DIMS;
        let slice = |v: &[f32], fr: usize| -> TensorF32 {
            let mut out = Vec::new();
            for c in 0..ch {
                let base = (c * f + fr) * h * w;
                out.extend_from_slice(&v[base..base + h * w]);
            }
            TensorF32::new(vec![ch, h, w], out).unwrap()
        };
        let best = (0..f)
            .map(|fr| step_magnitude_image(&slice(&c, fr), &slice(&u, fr)).unwrap())
            .fold(0.0, f64::max);
        prop_assert!(got >= 0.0);
        prop_assert!((got - best).abs() <= 1e-9);
        let frame_max = best;
        prop_assert!(motion_magnitude(&cond, &uncond).unwrap() <= 2.0 * frame_max + 1e-9);
    }

    #[test]
    fn first_n_total_equals_all(vals in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..40)) {
        let s = MagnitudeSeries {
            trajectory_id: "t".into(),
            steps: vals.iter().enumerate().map(|(i, &(c, m))| StepMagnitude { step: i as u32, m_content: c, m_motion: m }).collect(),
        };
        prop_assert_eq!(
            aggregate(&s, AggregationStrategy::FirstN(vals.len())).unwrap(),
            aggregate(&s, AggregationStrategy::AllSteps).unwrap()
        );
    }
}

fn index_of(n: usize, d: usize) -> impl Strategy<Value = FeatureIndex> {
    prop::collection::vec(-1.0f32..1.0, n * d)
        .prop_filter("non-zero rows", move |v| {
            v.chunks(d).all(|r| r.iter().any(|x| x.abs() > 1e-3))
        })
        .prop_map(move |v| {
            FeatureIndex::new(
                (0..n).map(|i| format!("i{i}")).collect(),
                vec![None; n],
                TensorF32::new(vec![n, d], v).unwrap(),
            )
            .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn topk_independent_of_blocks(
        (index, k) in (3usize..40, 1usize..8).prop_flat_map(|(n, d)| (index_of(n, d), 1..n)),
        br in 1usize..50, bc in 1usize..50,
    ) {
        let reference = topk_neighbors(&index, k, index.len(), index.len()).unwrap();
        let tiled = topk_neighbors(&index, k, br, bc).unwrap();
        prop_assert_eq!(&reference, &tiled);
        for (i, list) in tiled.neighbors.iter().enumerate() {
            prop_assert_eq!(list.len(), k);
            prop_assert!(list.iter().all(|n| n.index != i));
            prop_assert!(list.windows(2).all(|p| p[0].similarity >= p[1].similarity));
        }
    }

    #[test]
    fn neighbor_pairs_are_symmetric(
        (index, k) in (3usize..40, 1usize..8).prop_flat_map(|(n, d)| (index_of(n, d), 1..n)),
    ) {
        let lists = topk_neighbors(&index, k, 7, 5).unwrap().neighbors;
        for (a, list) in lists.iter().enumerate() {
            for nb in list {
                let b_list = &lists[nb.index];
                let kth = b_list.last().unwrap().similarity;
                if nb.similarity > kth {
                    let back = b_list.iter().find(|x| x.index == a);
                    prop_assert!(back.is_some_and(|x| (x.similarity - nb.similarity).abs() <= 1e-6));
                }
            }
        }
    }
}

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..40)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0u32..20, n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
        .prop_map(|(s, mut l)| {
            l[0] = true;
            l[1] = false;
            (s.into_iter().map(|v| f64::from(v) / 20.0).collect(), l)
        })
}

proptest! {
    #[test]
    fn auc_flip_complement((s, l) in scored()) {
        let a = auc(&ScoredSet::from_slices(&s, &l).unwrap()).unwrap();
        let flipped: Vec<bool> = l.iter().map(|x| !x).collect();
        let b = auc(&ScoredSet::from_slices(&s, &flipped).unwrap()).unwrap();
        prop_assert!((a + b - 1.0).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn auc_invariant_under_increasing_maps((s, l) in scored(), scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
        let a = auc(&ScoredSet::from_slices(&s, &l).unwrap()).unwrap();
        let moved: Vec<f64> = s.iter().map(|x| (scale * x + shift).exp()).collect();
        prop_assert_eq!(a, auc(&ScoredSet::from_slices(&moved, &l).unwrap()).unwrap());
    }

    #[test]
    fn f1_limits_and_best((s, l) in scored(), th in -0.5f64..1.5) {
        let set = ScoredSet::from_slices(&s, &l).unwrap();
        prop_assert_eq!(confusion_at(&set, f64::NEG_INFINITY).recall(), 1.0);
        prop_assert_eq!(f1_at(&set, f64::INFINITY), 0.0);
        let (bt, bf) = best_f1(&set);
        prop_assert!(bf >= f1_at(&set, th));
        prop_assert_eq!(f1_at(&set, bt), bf);
    }

    #[test]
    fn summary_percentages_fall_with_threshold(scores in prop::collection::vec(-1.0f64..1.0, 1..30), t1 in -1.0f64..1.0, t2 in -1.0f64..1.0) {
        let records: Vec<AuditRecord> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let m = MatchOutcome {
                    train_id: "t".into(),
                    result: SimilarityResult { score: s, argmax: Some((0, 0)), metric: Metric::Gsscd },
                    memorized: false,
                };
                AuditRecord { gen_id: format!("g{i}"), content: Some(m.clone()), motion: Some(m) }
            })
            .collect();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let at = |t: f64| {
            let cfg = AuditConfig { gsscd_threshold: t, ofs_threshold: t, ..AuditConfig::default() };
            let s = summarize(&records, &cfg).unwrap();
            (s.content.unwrap().percent_memorized, s.motion.unwrap().percent_memorized)
        };
        let (a, b) = (at(lo), at(hi));
        prop_assert!(a.0 >= b.0 && a.1 >= b.1);
    }

    #[test]
    fn vmt_roundtrip_bit_exact(dims in prop::collection::vec(1usize..5, 1..=4), bits in prop::collection::vec(any::<u32>(), 256)) {
        let len: usize = dims.iter().product();
        let data: Vec<f32> = bits
            .iter()
            .cycle()
            .take(len)
            .map(|&b| {
                let v = f32::from_bits(b);
                if v.is_finite() { v } else { f32::from_bits(b & 0x807f_ffff) }
            })
            .collect();
        let t = TensorF32::new(dims, data).unwrap();
        let back = TensorF32::from_bytes(&t.to_bytes().unwrap()).unwrap();
        prop_assert_eq!(back.dims(), t.dims());
        prop_assert!(back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
