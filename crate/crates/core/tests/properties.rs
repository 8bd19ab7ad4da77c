use proptest::prelude::*;

use parskel::analysis::{entropy_bits, ClassHistogram};
use parskel::exec::Exec;
use parskel::fusion::{collapse_dcf, fuse_crf, fuse_dcf, resize_labels, resize_stack, SilhouetteMask};
use parskel::gaitlab::features::FeatureTensor;
use parskel::gaitlab::head::Embedding;
use parskel::gaitlab::loss::{cross_entropy, triplet_gradient, triplet_loss, Triplet, TripletBatch};
use parskel::gaitlab::metrics::{evaluate, SelfMatch};
use parskel::gaitlab::pooling::{horizontal_pool, temporal_pool, PooledTensor};
use parskel::label::{LabelRaster, NUM_CLASSES};
use parskel::pose::{
    align_keypoints, filter_valid, Joint, Keypoint, KeypointFrame, KeypointSequence, Rect, ValidityConfig, NUM_JOINTS,
};
use parskel::render::raster::{rasterize_circle, Canvas, Point};
use parskel::render::{render_parsing_skeleton, Anchor, PartKind, PartMapping, RenderConfig};
use parskel::tensor::{read_tensor, write_tensor, Tensor, TensorData};

const CANVAS: Canvas = Canvas {
    width: 44,
    height: 64,
};

fn arb_keypoint() -> impl Strategy<Value = Keypoint> {
    (-8.0..52.0f64, -8.0..72.0f64, 0.0..=1.0f64).prop_map(|(x, y, c)| Keypoint::new(x, y, c).unwrap())
}

fn arb_frame() -> impl Strategy<Value = KeypointFrame> {
    (0u32..1000, prop::collection::vec(arb_keypoint(), NUM_JOINTS)).prop_map(|(i, ks)| KeypointFrame {
        frame_index: i,
        joints: ks.try_into().unwrap(),
    })
}

fn arb_rect() -> impl Strategy<Value = Rect> {
    (-50.0..50.0f64, -50.0..50.0f64, 0.5..200.0f64, 0.5..200.0f64).prop_map(|(x, y, w, h)| Rect::new(x, y, w, h))
}

fn arb_silhouette() -> impl Strategy<Value = SilhouetteMask> {
    prop::collection::vec((0.0..44.0f64, 0.0..64.0f64, 1.0..20.0f64), 0..5).prop_map(|discs| {
        let mut m = SilhouetteMask::new(CANVAS.width, CANVAS.height);
        for (x, y, r) in discs {
            for (px, py) in rasterize_circle(Point::new(x, y), r, CANVAS) {
                m.set(px, py, true);
            }
        }
        m
    })
}

fn arb_render_config() -> impl Strategy<Value = RenderConfig> {
    (1.0..12.0f64, 1.0..14.0f64, 0.0..=1.0f64).prop_map(|(r, w, tau)| RenderConfig::new(r, w, tau, CANVAS).unwrap())
}

fn arb_labels(w: u32, h: u32) -> impl Strategy<Value = LabelRaster> {
    prop::collection::vec(0u8..NUM_CLASSES as u8, (w * h) as usize).prop_map(move |v| LabelRaster::from_vec(w, h, v).unwrap())
}

fn arb_histogram() -> impl Strategy<Value = ClassHistogram> {
    prop::collection::vec(0u64..10_000, NUM_CLASSES).prop_map(|v| ClassHistogram {
        counts: v.try_into().unwrap(),
    })
}

fn support(r: &LabelRaster) -> Vec<bool> {
    r.labels().iter().map(|&l| l != 0).collect()
}

fn seg_dist(p: (f64, f64), a: Point, b: Point) -> f64 {
    let (abx, aby) = (b.x - a.x, b.y - a.y);
    let len2 = abx * abx + aby * aby;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.x) * abx + (p.1 - a.y) * aby) / len2).clamp(0.0, 1.0)
    };
    ((p.0 - a.x - t * abx).powi(2) + (p.1 - a.y - t * aby).powi(2)).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn filter_is_idempotent(frame in arb_frame(), tau in 0.0..=1.0f64) {
        let cfg = ValidityConfig::new(tau, CANVAS.width, CANVAS.height).unwrap();
        let once = filter_valid(&frame, &cfg);
        prop_assert_eq!(once.filter(&cfg), once);
    }

    #[test]
    fn filter_is_monotone_in_tau(frame in arb_frame(), a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let strict = filter_valid(&frame, &ValidityConfig::new(hi, CANVAS.width, CANVAS.height).unwrap());
        let loose = filter_valid(&frame, &ValidityConfig::new(lo, CANVAS.width, CANVAS.height).unwrap());
        for (j, _) in strict.iter() {
            prop_assert!(loose.contains(j));
        }
    }

    #[test]
    fn alignment_composes(frame in arb_frame(), a in arb_rect(), b in arb_rect(), c in arb_rect()) {
        let two_step = align_keypoints(&align_keypoints(&frame, &a, &b).unwrap(), &b, &c).unwrap();
        let direct = align_keypoints(&frame, &a, &c).unwrap();
        let back = align_keypoints(&align_keypoints(&frame, &a, &b).unwrap(), &b, &a).unwrap();
        for i in 0..NUM_JOINTS {
            prop_assert!((two_step.joints[i].x - direct.joints[i].x).abs() <= 1e-9);
            prop_assert!((two_step.joints[i].y - direct.joints[i].y).abs() <= 1e-9);
            prop_assert!((back.joints[i].x - frame.joints[i].x).abs() <= 1e-9);
            prop_assert!((back.joints[i].y - frame.joints[i].y).abs() <= 1e-9);
            prop_assert_eq!(two_step.joints[i].confidence, frame.joints[i].confidence);
        }
    }

    #[test]
    fn keypoint_text_round_trips(
        frames in prop::collection::vec(
            prop::collection::vec((-1e6..1e6f64, -1e6..1e6f64, 0.0..=1.0f64), NUM_JOINTS),
            1..5,
        )
    ) {
        let frames: Vec<KeypointFrame> = frames
            .into_iter()
            .enumerate()
            .map(|(i, ks)| KeypointFrame {
                frame_index: i as u32,
                joints: ks
                    .into_iter()
                    .map(|(x, y, c)| Keypoint::new(x, y, c).unwrap())
                    .collect::<Vec<_>>()
                    .try_into()
                    .unwrap(),
            })
            .collect();
        let seq = KeypointSequence::new("s", frames).unwrap();
        let back = KeypointSequence::parse("s", &seq.to_text(), "mem").unwrap();
        prop_assert_eq!(&back, &seq);
        prop_assert_eq!(back.to_text(), seq.to_text());
    }

    #[test]
    fn rendered_labels_stay_in_domain(frame in arb_frame(), cfg in arb_render_config()) {
        let r = render_parsing_skeleton(&frame, &PartMapping::default(), &cfg);
        prop_assert!(r.labels().iter().all(|&l| l == 0 || (2..NUM_CLASSES as u8).contains(&l)));
    }

    #[test]
    fn rendering_is_deterministic(frame in arb_frame(), cfg in arb_render_config()) {
        let m = PartMapping::default();
        prop_assert_eq!(render_parsing_skeleton(&frame, &m, &cfg), render_parsing_skeleton(&frame, &m, &cfg));
    }

    /// Every labelled pixel center lies within the drawn geometry of a part
    /// whose joints are all valid.
    #[test]
    fn support_stays_near_valid_geometry(frame in arb_frame(), cfg in arb_render_config()) {
        let mapping = PartMapping::default();
        let r = render_parsing_skeleton(&frame, &mapping, &cfg);
        let valid = filter_valid(&frame, &cfg.validity());
        let at = |j: Joint| valid.get(j).map(|k| Point::new(k.x, k.y));
        let resolve = |a: &Anchor| match *a {
            Anchor::Joint(j) => at(j),
            Anchor::Midpoint(j, k) => Some(Point::new((at(j)?.x + at(k)?.x) / 2.0, (at(j)?.y + at(k)?.y) / 2.0)),
        };
        let mut prims: Vec<(Point, Point, f64)> = Vec::new();
        for part in mapping.parts() {
            if !part.joints().iter().all(|&j| valid.contains(j)) {
                continue;
            }
            match &part.kind {
                PartKind::Discs(js) => prims.extend(js.iter().map(|&j| (at(j).unwrap(), at(j).unwrap(), cfg.radius))),
                PartKind::Segments(segs) => prims.extend(
                    segs.iter().map(|(a, b)| (resolve(a).unwrap(), resolve(b).unwrap(), cfg.line_width / 2.0)),
                ),
            }
        }
        for y in 0..CANVAS.height {
            for x in 0..CANVAS.width {
                if r.get(x, y) != 0 {
                    let p = (x as f64 + 0.5, y as f64 + 0.5);
                    prop_assert!(prims.iter().any(|&(a, b, rad)| seg_dist(p, a, b) <= rad + 1e-9));
                }
            }
        }
    }

    #[test]
    fn gating_only_shrinks_support(frame in arb_frame(), cfg in arb_render_config(), j in 0..NUM_JOINTS) {
        let m = PartMapping::default();
        let before = support(&render_parsing_skeleton(&frame, &m, &cfg));
        let mut lowered = frame.clone();
        if cfg.tau > 0.0 {
            lowered.joints[j].confidence = cfg.tau / 2.0;
        }
        let after = support(&render_parsing_skeleton(&lowered, &m, &cfg));
        prop_assert!(after.iter().zip(&before).all(|(&a, &b)| !a || b));
    }

    #[test]
    fn entropy_bounds(h in arb_histogram()) {
        let e = entropy_bits(&h);
        prop_assert!(e >= 0.0 && e <= 13f64.log2() + 1e-12);
        let nonzero = h.counts.iter().filter(|&&c| c > 0).count();
        prop_assert_eq!(e == 0.0, nonzero <= 1);
    }

    #[test]
    fn entropy_is_permutation_invariant(h in arb_histogram(), perm in Just((0..NUM_CLASSES).collect::<Vec<_>>()).prop_shuffle()) {
        let mut p = ClassHistogram::default();
        for (i, &k) in perm.iter().enumerate() {
            p.counts[k] = h.counts[i];
        }
        prop_assert!((entropy_bits(&p) - entropy_bits(&h)).abs() < 1e-12);
    }

    #[test]
    fn merging_skeleton_classes_never_raises_entropy(h in arb_histogram()) {
        let mut merged = h;
        merged.counts[2] = h.counts[2..].iter().sum();
        merged.counts[3..].fill(0);
        prop_assert!(entropy_bits(&merged) <= entropy_bits(&h) + 1e-12);
    }

    #[test]
    fn histograms_merge_by_addition(rs in prop::collection::vec(arb_labels(5, 4), 1..8)) {
        let serial = parskel::analysis::class_histogram(&rs, Exec::Serial).unwrap();
        let parallel = parskel::analysis::class_histogram(&rs, Exec::Parallel).unwrap();
        prop_assert_eq!(serial, parallel);
        prop_assert_eq!(serial.total(), 20 * rs.len() as u64);
    }

    #[test]
    fn crf_and_dcf_oracles(frame in arb_frame(), cfg in arb_render_config(), sil in arb_silhouette()) {
        let parsing = render_parsing_skeleton(&frame, &PartMapping::default(), &cfg);
        let crf = fuse_crf(&parsing, &sil).unwrap();
        let dcf = fuse_dcf(&parsing, &sil).unwrap();
        for y in 0..CANVAS.height {
            for x in 0..CANVAS.width {
                let (p, s) = (parsing.get(x, y), sil.get(x, y));
                let expect = if p != 0 { p } else if s { 1 } else { 0 };
                prop_assert_eq!(crf.get(x, y), expect);
                for k in 0..NUM_CLASSES {
                    let on = match k {
                        0 => p == 0 && !s,
                        1 => s,
                        _ => p as usize == k,
                    };
                    prop_assert_eq!(dcf.get(k, x, y), on as u8);
                }
            }
        }
        prop_assert_eq!(collapse_dcf(&dcf), crf.clone());
        prop_assert_eq!(fuse_crf(&LabelRaster::new(44, 64), &sil).unwrap(), sil.lift());
        prop_assert_eq!(fuse_crf(&parsing, &SilhouetteMask::new(44, 64)).unwrap(), parsing);
    }

    /// With the skeleton inside the silhouette, CRF refines the lifted
    /// silhouette, so its entropy cannot be lower.
    #[test]
    fn crf_entropy_dominates_contained_silhouette(frame in arb_frame(), cfg in arb_render_config(), sil in arb_silhouette()) {
        let parsing = render_parsing_skeleton(&frame, &PartMapping::default(), &cfg);
        let mut sil = sil;
        for y in 0..CANVAS.height {
            for x in 0..CANVAS.width {
                if parsing.get(x, y) != 0 {
                    sil.set(x, y, true);
                }
            }
        }
        let hist = |r: &LabelRaster| {
            let mut h = ClassHistogram::default();
            h.add_raster(r);
            h
        };
        let crf = fuse_crf(&parsing, &sil).unwrap();
        prop_assert!(entropy_bits(&hist(&crf)) + 1e-12 >= entropy_bits(&hist(&sil.lift())));
    }

    #[test]
    fn resize_matches_center_sampling(r in arb_labels(13, 9), w in 1u32..30, h in 1u32..30) {
        let out = resize_labels(&r, w, h);
        for y in 0..h {
            for x in 0..w {
                let sx = ((2 * x + 1) * 13) / (2 * w);
                let sy = ((2 * y + 1) * 9) / (2 * h);
                prop_assert_eq!(out.get(x, y), r.get(sx, sy));
            }
        }
        prop_assert_eq!(resize_labels(&out, w, h), out);
    }

    #[test]
    fn resized_dcf_collapses_to_resized_crf(frame in arb_frame(), cfg in arb_render_config(), sil in arb_silhouette(), w in 1u32..50, h in 1u32..70) {
        let parsing = render_parsing_skeleton(&frame, &PartMapping::default(), &cfg);
        let crf = fuse_crf(&parsing, &sil).unwrap();
        let dcf = fuse_dcf(&parsing, &sil).unwrap();
        prop_assert_eq!(collapse_dcf(&resize_stack(&dcf, w, h)), resize_labels(&crf, w, h));
    }

    #[test]
    fn temporal_pool_ignores_frame_order(
        vals in prop::collection::vec(-5.0..5.0f64, 2 * 3 * 6 * 4),
        perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let f = FeatureTensor::new([2, 3, 6, 4, 1], vals).unwrap();
        prop_assert_eq!(temporal_pool(&f.permute_frames(&perm).unwrap()), temporal_pool(&f));
    }

    #[test]
    fn horizontal_pool_is_positively_homogeneous(vals in prop::collection::vec(-5.0..5.0f64, 2 * 16 * 2), k in 0.0..10.0f64) {
        let z = PooledTensor::new([1, 2, 16, 2], vals).unwrap();
        let base = horizontal_pool(&z, 4).unwrap();
        let scaled = horizontal_pool(&z.scaled(k), 4).unwrap();
        for (a, b) in base[0].values.iter().zip(&scaled[0].values) {
            prop_assert!((a * k - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn losses_are_non_negative(
        p in prop::collection::vec(0.001..1.0f64, 2..10),
        label in 0usize..10,
        a in prop::collection::vec(-1.0..1.0f64, 3),
        q in prop::collection::vec(-1.0..1.0f64, 3),
        n in prop::collection::vec(-1.0..1.0f64, 3),
    ) {
        let s: f64 = p.iter().sum();
        let p: Vec<f64> = p.iter().map(|v| v / s).collect();
        let label = label % p.len();
        prop_assert!(cross_entropy(&p, label).unwrap() >= 0.0);
        let batch = TripletBatch::new(
            vec![Triplet {
                anchor: Embedding::new("a", "x", a).unwrap(),
                positive: Embedding::new("p", "x", q).unwrap(),
                negative: Embedding::new("n", "y", n).unwrap(),
            }],
            0.2,
        )
        .unwrap();
        let loss = triplet_loss(&batch);
        prop_assert!(loss >= 0.0);
        let h = batch.hinge_arguments()[0];
        prop_assert_eq!(loss == 0.0, h <= 0.0);
        if h < -1e-6 {
            let g = triplet_gradient(&batch).unwrap();
            prop_assert!(g[0].anchor.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn metrics_are_bounded_and_monotone(
        ids in 2usize..6,
        gal in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 3), 12),
        probes in prop::collection::vec((0usize..6, prop::collection::vec(-1.0..1.0f64, 3)), 1..10),
    ) {
        let gallery: Vec<Embedding> = gal
            .into_iter()
            .enumerate()
            .map(|(i, v)| Embedding::new(format!("g{i}"), format!("id{}", i % ids), v).unwrap())
            .collect();
        let probe: Vec<Embedding> = probes
            .into_iter()
            .enumerate()
            .map(|(i, (id, v))| Embedding::new(format!("p{i}"), format!("id{}", id % ids), v).unwrap())
            .collect();
        let r = evaluate(&gallery, &probe, SelfMatch::Include, Exec::Serial).unwrap();
        prop_assert!(r.rank1 <= r.rank5);
        prop_assert!(0.0 < r.minp && r.minp <= 1.0);
        prop_assert!(0.0 < r.map && r.map <= 1.0);
    }

    #[test]
    fn single_positive_minp_equals_map(
        gal in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 2), 2..8),
        probes in prop::collection::vec((0usize..8, prop::collection::vec(-1.0..1.0f64, 2)), 1..6),
    ) {
        let gallery: Vec<Embedding> = gal
            .iter()
            .enumerate()
            .map(|(i, v)| Embedding::new(format!("g{i}"), format!("id{i}"), v.clone()).unwrap())
            .collect();
        let probe: Vec<Embedding> = probes
            .into_iter()
            .enumerate()
            .map(|(i, (id, v))| Embedding::new(format!("p{i}"), format!("id{}", id % gal.len()), v).unwrap())
            .collect();
        let r = evaluate(&gallery, &probe, SelfMatch::Include, Exec::Serial).unwrap();
        prop_assert!((r.minp - r.map).abs() < 1e-12);
    }

    #[test]
    fn evaluation_is_isometry_invariant(
        gal in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 3), 6..12),
        probes in prop::collection::vec((0usize..3, prop::collection::vec(-1.0..1.0f64, 3)), 1..8),
        angles in (0.0..6.3f64, 0.0..6.3f64, 0.0..6.3f64),
        shift in prop::collection::vec(-2.0..2.0f64, 3),
    ) {
        let (a, b, c) = angles;
        let rx = [[1.0, 0.0, 0.0], [0.0, a.cos(), -a.sin()], [0.0, a.sin(), a.cos()]];
        let ry = [[b.cos(), 0.0, b.sin()], [0.0, 1.0, 0.0], [-b.sin(), 0.0, b.cos()]];
        let rz = [[c.cos(), -c.sin(), 0.0], [c.sin(), c.cos(), 0.0], [0.0, 0.0, 1.0]];
        let apply = |m: &[[f64; 3]; 3], v: &[f64]| -> Vec<f64> {
            (0..3).map(|i| (0..3).map(|j| m[i][j] * v[j]).sum()).collect()
        };
        let iso = |v: &[f64]| -> Vec<f64> {
            let r = apply(&rz, &apply(&ry, &apply(&rx, v)));
            r.iter().zip(&shift).map(|(x, s)| x + s).collect()
        };
        let gallery: Vec<Embedding> = gal
            .iter()
            .enumerate()
            .map(|(i, v)| Embedding::new(format!("g{i}"), format!("id{}", i % 3), v.clone()).unwrap())
            .collect();
        let probe: Vec<Embedding> = probes
            .iter()
            .enumerate()
            .map(|(i, (id, v))| Embedding::new(format!("p{i}"), format!("id{id}"), v.clone()).unwrap())
            .collect();
        let moved = |es: &[Embedding]| -> Vec<Embedding> {
            es.iter().map(|e| Embedding { values: iso(&e.values), ..e.clone() }).collect()
        };
        let r0 = evaluate(&gallery, &probe, SelfMatch::Include, Exec::Serial).unwrap();
        let r1 = evaluate(&moved(&gallery), &moved(&probe), SelfMatch::Include, Exec::Serial).unwrap();
        prop_assert_eq!(r0, r1);
    }

    #[test]
    fn tensors_round_trip(
        dims in prop::collection::vec(1u32..5, 1..4),
        tag in 0u8..3,
        seed in any::<u64>(),
    ) {
        let n: usize = dims.iter().map(|&d| d as usize).product();
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            s
        };
        let data = match tag {
            0 => TensorData::U8((0..n).map(|_| next() as u8).collect()),
            1 => TensorData::F32((0..n).map(|_| f32::from_bits(next() as u32)).collect()),
            _ => TensorData::F64((0..n).map(|_| f64::from_bits(next())).collect()),
        };
        let t = Tensor::new(dims, data).unwrap();
        prop_assert!(Tensor::decode(&t.encode()).unwrap().bit_eq(&t));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.tns");
        write_tensor(&p, &t).unwrap();
        prop_assert!(read_tensor(&p).unwrap().bit_eq(&t));
    }
}
