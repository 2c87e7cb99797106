mod common;

use common::{frame_with, random_frame, random_person, rel};
use cvekit_core::data_model::parts;
use cvekit_core::densitymap::{render_ppvdm, render_vdm, SmoothingConfig};
use cvekit_core::{DensityMap, PartTaxonomy};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

fn smoothing(sigma: f64) -> SmoothingConfig {
    SmoothingConfig {
        sigma_px: sigma,
        truncation_radius: 4.0,
    }
}

fn sigma() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.0, 2.0, 4.0, 8.0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mass_is_conserved(seed in any::<u64>(), n in 0usize..8, border in any::<bool>(), s in sigma()) {
        let tax = PartTaxonomy::default();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let frame = random_frame(&mut rng, &tax, n, border);
        let total = frame.total_volume_dm3();
        let vdm = render_vdm(&frame, &smoothing(s)).unwrap();
        let pp = render_ppvdm(&frame, &tax, &smoothing(s)).unwrap();
        prop_assert!((vdm.sum() - total).abs() <= 1e-6 * total);
        prop_assert!((pp.sum() - total).abs() <= 1e-6 * total);
        prop_assert!(vdm.values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn joint_render_is_sum_of_single_renders(seed in any::<u64>(), n in 1usize..6, s in sigma()) {
        let tax = PartTaxonomy::default();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let frame = random_frame(&mut rng, &tax, n, false);
        let cfg = smoothing(s);
        for per_part in [false, true] {
            let render = |f: &cvekit_core::FrameAnnotation| {
                if per_part { render_ppvdm(f, &tax, &cfg) } else { render_vdm(f, &cfg) }.unwrap()
            };
            let joint = render(&frame);
            let mut acc = vec![0.0; joint.values().len()];
            for p in &frame.persons {
                let single = render(&frame_with("f", frame.image_w, frame.image_h, vec![p.clone()]));
                for (a, v) in acc.iter_mut().zip(single.values()) {
                    *a += v;
                }
            }
            prop_assert_eq!(joint.values(), acc.as_slice());
        }
    }

    #[test]
    fn peak_does_not_grow_with_sigma(seed in any::<u64>()) {
        let tax = PartTaxonomy::default();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let frame = random_frame(&mut rng, &tax, 1, seed % 2 == 0);
        let peaks: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&s| render_vdm(&frame, &smoothing(s)).unwrap().max_value())
            .collect();
        for w in peaks.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12), "{peaks:?}");
        }
    }

    #[test]
    fn per_part_total_equals_whole_body_total(seed in any::<u64>(), n in 1usize..8, s in sigma()) {
        let tax = PartTaxonomy::default();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let frame = random_frame(&mut rng, &tax, n, false);
        let a = render_vdm(&frame, &smoothing(s)).unwrap().sum();
        let b = render_ppvdm(&frame, &tax, &smoothing(s)).unwrap().sum();
        prop_assert!(rel(b, a) <= 1e-6);
    }
}

#[test]
fn torso_keypoints_split_torso_volume_evenly() {
    let tax = PartTaxonomy::default();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
    let mut person = random_person(&mut rng, &tax, 64, 64, 0);
    // Put every keypoint on its own pixel so impulses cannot stack.
    for (i, k) in person.keypoints.iter_mut().enumerate() {
        k.x = (3 * i) as f64 + 1.0;
        k.y = 40.0;
        k.visible = true;
    }
    person.head_px = [60.0, 5.0];
    let v_torso = person.part_volumes_dm3[&parts::TORSO];
    let frame = frame_with("f", 64, 64, vec![person.clone()]);
    let map = render_ppvdm(&frame, &tax, &SmoothingConfig::impulses()).unwrap();
    let torso: Vec<_> = person.keypoints.iter().filter(|k| k.part_id == parts::TORSO).collect();
    assert_eq!(torso.len(), 5);
    for k in torso {
        assert_eq!(map.get(k.x as usize, k.y as usize), v_torso / 5.0);
    }
}

#[test]
fn integrals_over_a_partition_add_up() {
    let tax = PartTaxonomy::default();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
    let frame = random_frame(&mut rng, &tax, 6, false);
    let map: DensityMap = render_vdm(&frame, &smoothing(2.0)).unwrap();
    let (w, h) = (frame.image_w as f64, frame.image_h as f64);
    let cut = (w / 3.0).floor() + 0.5;
    let left = map.integrate(&cvekit_core::BBox::new(0.0, 0.0, cut, h)).unwrap();
    let right = map.integrate(&cvekit_core::BBox::new(cut, 0.0, w, h)).unwrap();
    assert!(rel(left + right, map.sum()) <= 1e-12);
}
