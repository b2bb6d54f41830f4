use ibpqam::constellation::{gray_decode, gray_encode, SUPPORTED_ORDERS};
use ibpqam::modem::{demodulate, frame, modulate, Demodulator};
use ibpqam::semantic::{deserialize, serialize, MaskStrategy, SemanticRecord};
use ibpqam::{Constellation, ConstellationSpec, Scheme};
use num_complex::Complex64;
use proptest::prelude::*;

fn order() -> impl Strategy<Value = u32> {
    prop::sample::select(SUPPORTED_ORDERS.to_vec())
}

fn scheme() -> impl Strategy<Value = Scheme> {
    prop_oneof![Just(Scheme::Ibp), Just(Scheme::Mqam)]
}

fn build(scheme: Scheme, order: u32, alpha: f64) -> Constellation {
    let spec =
        ConstellationSpec::new(scheme, order, alpha, ibpqam::Normalization::UnitEnergy).unwrap();
    Constellation::build(spec).unwrap()
}

proptest! {
    #[test]
    fn gray_round_trip(k in 0u32..1 << 20) {
        prop_assert_eq!(gray_decode(gray_encode(k)), k);
    }

    #[test]
    fn noiseless_round_trip(
        scheme in scheme(),
        order in order(),
        alpha in 0.05f64..=1.0,
        imp in prop::collection::vec(0u8..=1, 0..200),
        unimp in prop::collection::vec(0u8..=1, 0..600),
    ) {
        let c = build(scheme, order, alpha);
        let f = frame(&imp, &unimp, order).unwrap();
        let rx = demodulate(&modulate(&f, &c).unwrap(), &c).into_frame(f.pad_imp, f.pad_unimp);
        prop_assert_eq!(rx.deframe(), (imp, unimp));
    }

    #[test]
    fn axes_decide_independently(
        scheme in scheme(),
        order in order(),
        alpha in 0.05f64..=1.0,
        i in -2.0f64..2.0,
        q in -2.0f64..2.0,
    ) {
        let c = build(scheme, order, alpha);
        let d = Demodulator::new(&c);
        let joint = c.point(d.decide(Complex64::new(i, q)));
        let a = d.axis().decide(i);
        let b = d.axis().decide(q);
        prop_assert_eq!((joint.i_level, joint.q_level), (a, b));
    }

    #[test]
    fn record_round_trip(
        entries in prop::collection::btree_map(0u32..256, -1e6f32..1e6, 0..8),
        topic in any::<bool>(),
    ) {
        let r = SemanticRecord::new(entries.into_iter().collect()).unwrap();
        let strategy = if topic { MaskStrategy::TopicBranch } else { MaskStrategy::IndexImportant };
        let (bits, mask) = serialize(&r, strategy).unwrap();
        prop_assert_eq!(mask.flags.len(), bits.len());
        prop_assert_eq!(deserialize(&bits).unwrap().record, r);
    }
}

/// Per-axis decisions agree with brute-force nearest point over all M points.
#[test]
fn per_axis_decision_is_maximum_likelihood() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for &(scheme, order, alpha) in &[
        (Scheme::Ibp, 64, 0.5),
        (Scheme::Ibp, 256, 0.9),
        (Scheme::Ibp, 16, 0.2),
        (Scheme::Mqam, 64, 1.0),
        (Scheme::Mqam, 1024, 1.0),
    ] {
        let c = build(scheme, order, alpha);
        let d = Demodulator::new(&c);
        for _ in 0..10_000 {
            let p = c.point(rng.random_range(0..order));
            let z = Complex64::new(
                p.i + rng.random_range(-0.6..0.6),
                p.q + rng.random_range(-0.6..0.6),
            );
            let brute = c
                .points()
                .iter()
                .min_by(|a, b| {
                    let da = (a.i - z.re).powi(2) + (a.q - z.im).powi(2);
                    let db = (b.i - z.re).powi(2) + (b.q - z.im).powi(2);
                    da.total_cmp(&db)
                })
                .unwrap();
            assert_eq!(d.decide(z), brute.label);
        }
    }
}
