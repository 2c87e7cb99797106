use cvekit_core::data_model::{from_json_line, read_annotations, to_json_line, write_annotations};
use cvekit_core::scenegen::{character_pools, generate_frame, SceneConfig};
use cvekit_core::{DensityMap, PartTaxonomy};
use proptest::prelude::*;

#[test]
fn annotation_write_read_write_is_stable() {
    let cfg = SceneConfig::default();
    let pools = character_pools(&cfg, 1).unwrap();
    let tax = PartTaxonomy::default();
    let frames: Vec<_> = (0..8).map(|i| generate_frame(&cfg, &pools[0], 1, i).unwrap()).collect();
    for f in &frames {
        let line = to_json_line(f).unwrap();
        let back = from_json_line(&line, &tax).unwrap();
        assert_eq!(to_json_line(&back).unwrap(), line);
    }
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    write_annotations(&frames, &a).unwrap();
    write_annotations(&read_annotations(&a, &tax).unwrap(), &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

proptest! {
    #[test]
    fn vdm_bytes_roundtrip(w in 1usize..20, h in 1usize..20, seed in any::<u32>()) {
        let values: Vec<f64> = (0..w * h)
            .map(|i| ((seed as usize).wrapping_mul(2654435761).wrapping_add(i * 40503) % 100_000) as f64 / 7.0)
            .collect();
        let map = DensityMap::from_values(w, h, values).unwrap().quantized();
        let bytes = map.to_bytes();
        prop_assert_eq!(bytes.len(), 12 + 4 * w * h);
        let back = DensityMap::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &map);
        prop_assert_eq!(back.to_bytes(), bytes);
    }
}
