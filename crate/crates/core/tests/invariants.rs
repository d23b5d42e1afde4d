use std::cmp::Ordering;

use pigmix_core::colorimetry::{Lab, Srgb8};
use pigmix_core::dataset::{pack_features, swap_roles, unpack_features, Ingredient, Normalization};
use pigmix_core::eval::{cdf, fraction_below, histogram};
use pigmix_core::km::{composite_channel, mix_km, Channels, KmCoefficients};
use pigmix_core::palette::{Lut, LutBuildConfig, LutEntry, LutProvenance};
use pigmix_core::spectrum::{PigmentId, Quantity, Spectrum, SAMPLES};
use proptest::prelude::*;

fn spectrum() -> impl Strategy<Value = Spectrum> {
    proptest::collection::vec(0.0f64..=1.0, SAMPLES).prop_map(|v| Spectrum::from_slice(&v).unwrap())
}

fn grid_quantity() -> impl Strategy<Value = Quantity> {
    (5u32..=80).prop_map(|i| Quantity::from_microliters(2 * i))
}

fn pigment() -> impl Strategy<Value = PigmentId> {
    (1u8..=13).prop_map(|i| PigmentId::new(i).unwrap())
}

fn entry() -> impl Strategy<Value = LutEntry> {
    (
        pigment(),
        pigment(),
        grid_quantity(),
        grid_quantity(),
        // coarse Lab values so exact distance ties actually happen
        proptest::array::uniform3(-4i8..=4),
    )
        .prop_map(|(pa, pb, qa, qb, lab)| LutEntry {
            pigment_a: pa,
            pigment_b: pb,
            q_a: qa,
            q_b: qb,
            lab: lab.map(|v| v as f32 * 12.5),
            rgb: Srgb8::new(0, 0, 0),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn features_round_trip_and_swap(
        ta in spectrum(), ra in spectrum(), tb in spectrum(), rb in spectrum(), sub in spectrum(),
        qa in grid_quantity(), qb in grid_quantity(),
    ) {
        let norm = Normalization::default();
        let a = Ingredient { transmittance: &ta, reflectance: &ra, quantity: qa };
        let b = Ingredient { transmittance: &tb, reflectance: &rb, quantity: qb };
        let f = pack_features(a, b, &sub, &norm);
        let u = unpack_features(&f, &norm).unwrap();
        prop_assert_eq!((u.t_a, u.rw_a, u.t_b, u.rw_b, u.substrate), (ta, ra, tb, rb, sub));
        prop_assert!((u.q_a_ml - qa.ml()).abs() < 1e-15);
        prop_assert!((u.q_b_ml - qb.ml()).abs() < 1e-15);

        let mut s = f;
        swap_roles(&mut s);
        prop_assert_eq!(s, pack_features(b, a, &sub, &norm));
        swap_roles(&mut s);
        prop_assert_eq!(s, f);
    }

    // Two coats of the same paint are one coat of the summed thickness.
    #[test]
    fn km_layers_stack(k in 0.0f64..5.0, s in 0.05f64..5.0, rg in 0.0f64..=1.0, x1 in 0.0f64..4.0, x2 in 0.0f64..4.0) {
        let once = composite_channel(k, s, rg, x1 + x2).unwrap();
        let twice = composite_channel(k, s, composite_channel(k, s, rg, x1).unwrap(), x2).unwrap();
        prop_assert!((once - twice).abs() < 1e-10, "{once} vs {twice}");
    }

    #[test]
    fn mixing_a_paint_with_itself_changes_nothing(k in 0.0f64..5.0, s in 0.05f64..5.0, c in 0.0f64..=1.0) {
        let p = KmCoefficients::new(Channels::splat(k, 3).unwrap(), Channels::splat(s, 3).unwrap()).unwrap();
        let m = mix_km(&[p.clone(), p.clone()], &[c, 1.0 - c]).unwrap();
        prop_assert!((m.k.values()[0] - k).abs() < 1e-12);
        prop_assert!((m.s.values()[0] - s).abs() < 1e-12);
    }

    #[test]
    fn histogram_and_cdf_agree(d in proptest::collection::vec(0.0f64..30.0, 1..200)) {
        let h = histogram(&d);
        prop_assert_eq!(h.counts.iter().sum::<u64>() + h.overflow, d.len() as u64);
        let c = cdf(&d);
        prop_assert!(c.windows(2).all(|w| w[0].fraction <= w[1].fraction && w[0].at < w[1].at));
        prop_assert_eq!(c.last().unwrap().fraction, 1.0);
        for p in &c {
            let n = d.iter().filter(|&&x| x <= p.at).count();
            prop_assert_eq!(p.fraction, n as f64 / d.len() as f64);
        }
        // strict vs inclusive only differ on exact ties with 5
        let at5 = c.iter().find(|p| p.at == 5.0).unwrap().fraction;
        let ties = d.iter().filter(|&&x| x == 5.0).count() as f64 / d.len() as f64;
        prop_assert_eq!(fraction_below(&d, 5.0) + ties, at5);
    }

    #[test]
    fn tie_break_is_a_total_order(a in entry(), b in entry(), c in entry()) {
        prop_assert_eq!(a.tie_break(&b), b.tie_break(&a).reverse());
        prop_assert_eq!(a.tie_break(&a), Ordering::Equal);
        if a.tie_break(&b) != Ordering::Greater && b.tie_break(&c) != Ordering::Greater {
            prop_assert_ne!(a.tie_break(&c), Ordering::Greater);
        }
        if a.tie_break(&b) == Ordering::Equal {
            prop_assert_eq!(
                (a.pigment_a, a.pigment_b, a.q_a, a.q_b),
                (b.pigment_a, b.pigment_b, b.q_a, b.q_b)
            );
        }
    }

    #[test]
    fn index_agrees_with_scan(
        entries in proptest::collection::vec(entry(), 1..400),
        target in proptest::array::uniform3(-60.0f64..60.0),
        k in 1usize..6,
    ) {
        let prov = LutProvenance { model_hash: [0; 32], config: LutBuildConfig::default() };
        let lut = Lut::new(entries, prov).unwrap();
        let t = Lab::new(target[0], target[1], target[2]);
        prop_assert_eq!(lut.match_lab(t, k).unwrap(), lut.brute_force(t, k).unwrap());
    }
}
